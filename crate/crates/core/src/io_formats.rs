//! Text file formats for signals, warps, gesture trajectories and reports.
//!
//! A signal file is one header line followed by comma-separated rows:
//!
//! ```text
//! # ust-signal v1 space=scalar columns=t,x
//! 0.0000000000000000e0,1.0000000000000000e0
//! ```
//!
//! Every value is written with 17 significant digits, which round-trips
//! `f64` exactly. The column names are fixed by the space tag, see
//! [`column_names`]. Warps use the header `# ust-warp v1 columns=t,tau`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_se3::FLAT_LEN;
use crate::matching::{BodyTrajectory, MatchReport};
use crate::metric_spaces::{Signal, Space, TimeGrid, Warp};
use crate::reparam::UstResult;

pub const TOOL_NAME: &str = "ust";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FORMAT_VERSION: &str = "v1";
const SIGNAL_MAGIC: &str = "# ust-signal";
const WARP_MAGIC: &str = "# ust-warp";

/// Rotation drift accepted and repaired by polar projection.
pub const ROTATION_TOLERANCE: f64 = 1e-6;
/// Drift below this is left untouched so exact files round-trip bit for bit.
pub const ROTATION_SNAP: f64 = 1e-13;
/// Normalized timestamps farther than this from the uniform grid trigger resampling.
pub const UNIFORM_TOLERANCE: f64 = 1e-9;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn se3_columns(prefix: &str, out: &mut Vec<String>) {
    for r in 0..3 {
        for c in 0..3 {
            out.push(format!("{prefix}r{r}{c}"));
        }
    }
    for axis in ["x", "y", "z"] {
        out.push(format!("{prefix}p{axis}"));
    }
}

/// Column names for a space, starting with `t`.
pub fn column_names(space: Space) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    match space {
        Space::Scalar => cols.push("x".into()),
        Space::Vector(n) => cols.extend((0..n).map(|i| format!("x{i}"))),
        Space::Matrix(r, c) => {
            for i in 0..r {
                cols.extend((0..c).map(|j| format!("m{i}_{j}")));
            }
        }
        Space::Se3 => se3_columns("", &mut cols),
        Space::Se3Product(k) => {
            for j in 0..k {
                se3_columns(&format!("f{j}_"), &mut cols);
            }
        }
    }
    cols
}

/// The header line (without newline) for a signal file.
pub fn signal_header(space: Space) -> String {
    format!(
        "{SIGNAL_MAGIC} {FORMAT_VERSION} space={space} columns={}",
        column_names(space).join(",")
    )
}

fn write_rows(out: &mut String, times: &[f64], width: usize, data: &[f64]) {
    for (k, t) in times.iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for v in &data[k * width..(k + 1) * width] {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
}

/// Serializes a signal on its uniform grid.
pub fn signal_to_string(signal: &Signal) -> String {
    let mut out = signal_header(signal.space());
    out.push('\n');
    write_rows(&mut out, &signal.grid().times(), signal.space().width(), signal.data());
    out
}

pub fn write_signal(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, signal_to_string(signal))?;
    Ok(())
}

fn parse_header(line: &str, magic: &str) -> Result<Vec<(String, String)>> {
    let rest = line
        .strip_prefix(magic)
        .ok_or_else(|| Error::SchemaMismatch(format!("header must start with '{magic}'")))?;
    let mut tokens = rest.split_whitespace();
    match tokens.next() {
        Some(FORMAT_VERSION) => {}
        other => {
            return Err(Error::SchemaMismatch(format!(
                "unsupported format version {:?}",
                other.unwrap_or("")
            )))
        }
    }
    tokens
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::SchemaMismatch(format!("malformed header field '{tok}'")))
        })
        .collect()
}

fn header_field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::SchemaMismatch(format!("header lacks '{key}='")))
}

/// Parsed rows: times plus row-major values, with the file line of each row.
struct Table {
    times: Vec<f64>,
    values: Vec<f64>,
    lines: Vec<usize>,
}

fn parse_rows<'a>(lines: impl Iterator<Item = (usize, &'a str)>, width: usize) -> Result<Table> {
    let mut table = Table {
        times: Vec::new(),
        values: Vec::new(),
        lines: Vec::new(),
    };
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (i, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("column {} is not a number: '{}'", i + 1, field.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("column {} is not finite", i + 1),
                });
            }
            if i == 0 {
                table.times.push(v);
            } else if i <= width {
                table.values.push(v);
            }
            count += 1;
        }
        if count != width + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} columns, found {count}", width + 1),
            });
        }
        if let [.., prev, last] = table.times[..] {
            if last <= prev {
                return Err(Error::NonMonotoneTime(lineno));
            }
        }
        table.lines.push(lineno);
    }
    Ok(table)
}

/// Maps times affinely onto `[0, 1]`.
fn normalize_times(times: &mut [f64]) {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let span = t1 - t0;
    for t in times.iter_mut() {
        *t = (*t - t0) / span;
    }
    times[0] = 0.0;
    *times.last_mut().expect("nonempty") = 1.0;
}

fn is_uniform(times: &[f64]) -> bool {
    let h = 1.0 / (times.len() - 1) as f64;
    times
        .iter()
        .enumerate()
        .all(|(k, t)| (t - k as f64 * h).abs() <= UNIFORM_TOLERANCE)
}

/// Resamples points given at increasing `times` in `[0, 1]` onto the uniform grid
/// of the same length, interpolating in the space.
fn resample_uniform(space: Space, times: &[f64], data: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    let w = space.width();
    let grid = TimeGrid::new(n)?;
    let mut out = Vec::with_capacity(data.len());
    let mut i = 0;
    for k in 0..n {
        let u = grid.t(k);
        while i + 2 < n && times[i + 1] < u {
            i += 1;
        }
        let alpha = ((u - times[i]) / (times[i + 1] - times[i])).clamp(0.0, 1.0);
        space.interpolate_into(&data[i * w..(i + 1) * w], &data[(i + 1) * w..(i + 2) * w], alpha, &mut out)?;
    }
    Ok(out)
}

/// Nearest rotation `U V^T` from the SVD.
fn polar_projection(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// Checks every rotation block of an SE(3) row and repairs small drift in place.
fn check_rotations(space: Space, row: &mut [f64], line: usize) -> Result<()> {
    for j in 0..space.se3_factors() {
        let block = &mut row[j * FLAT_LEN..j * FLAT_LEN + 9];
        let r = Matrix3::from_row_slice(block);
        let det = r.determinant();
        if det <= 0.0 {
            return Err(Error::BadRotation {
                line,
                message: format!("determinant {det} is not positive"),
            });
        }
        let drift = (r.transpose() * r - Matrix3::identity()).norm().max((det - 1.0).abs());
        if drift > ROTATION_TOLERANCE {
            return Err(Error::BadRotation {
                line,
                message: format!("orthonormality drift {drift:e} exceeds {ROTATION_TOLERANCE:e}"),
            });
        }
        if drift > ROTATION_SNAP {
            let p = polar_projection(&r);
            for a in 0..3 {
                for b in 0..3 {
                    block[3 * a + b] = p[(a, b)];
                }
            }
        }
    }
    Ok(())
}

/// Parses a signal file from text. See the module docs for the format.
pub fn parse_signal(text: &str, expected: Option<Space>) -> Result<Signal> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| Error::SchemaMismatch("empty file".into()))?;
    let fields = parse_header(header.trim(), SIGNAL_MAGIC)?;
    let space: Space = header_field(&fields, "space")?.parse()?;
    if let Some(want) = expected {
        if want != space {
            return Err(Error::SchemaMismatch(format!("expected space {want}, file declares {space}")));
        }
    }
    let cols = header_field(&fields, "columns")?;
    let want_cols = column_names(space).join(",");
    if cols != want_cols {
        return Err(Error::SchemaMismatch(format!(
            "columns '{cols}' do not match space {space} (expected '{want_cols}')"
        )));
    }
    let width = space.width();
    let mut table = parse_rows(lines, width)?;
    let n = table.times.len();
    if n < 2 {
        return Err(Error::SignalTooShort(n));
    }
    if space.is_group() {
        for (k, row) in table.values.chunks_exact_mut(width).enumerate() {
            check_rotations(space, row, table.lines[k])?;
        }
    }
    normalize_times(&mut table.times);
    let data = if is_uniform(&table.times) {
        table.values
    } else {
        resample_uniform(space, &table.times, &table.values)?
    };
    Signal::new(space, data)
}

/// Reads a signal file, optionally requiring a particular space.
pub fn read_signal(path: impl AsRef<Path>, expected: Option<Space>) -> Result<Signal> {
    parse_signal(&fs::read_to_string(path)?, expected)
}

pub fn warp_to_string(warp: &Warp) -> String {
    let mut out = format!("{WARP_MAGIC} {FORMAT_VERSION} columns=t,tau\n");
    write_rows(&mut out, &warp.grid().times(), 1, warp.values());
    out
}

pub fn write_warp(warp: &Warp, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, warp_to_string(warp))?;
    Ok(())
}

/// Parses a warp file. Rows must lie on the uniform grid of `[0, 1]`.
pub fn parse_warp(text: &str) -> Result<Warp> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| Error::SchemaMismatch("empty file".into()))?;
    let fields = parse_header(header.trim(), WARP_MAGIC)?;
    if header_field(&fields, "columns")? != "t,tau" {
        return Err(Error::SchemaMismatch("warp columns must be 't,tau'".into()));
    }
    let table = parse_rows(lines, 1)?;
    if table.times.len() < 2 {
        return Err(Error::SignalTooShort(table.times.len()));
    }
    if !is_uniform(&table.times) {
        return Err(Error::SchemaMismatch("warp times are not the uniform grid on [0, 1]".into()));
    }
    Warp::new(table.values)
}

pub fn read_warp(path: impl AsRef<Path>) -> Result<Warp> {
    parse_warp(&fs::read_to_string(path)?)
}

/// Manifest tying the three pose files of a [`BodyTrajectory`] together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub format: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub shoulder: String,
    pub elbow: String,
    pub hand: String,
}

pub const TRAJECTORY_FORMAT: &str = "ust-trajectory";

/// Writes `<stem>.shoulder.csv`, `<stem>.elbow.csv`, `<stem>.hand.csv` and
/// `<stem>.toml` into `dir`; returns the manifest path.
pub fn write_trajectory(traj: &BodyTrajectory, label: Option<&str>, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let name = |part: &str| format!("{stem}.{part}.csv");
    write_signal(traj.shoulder(), dir.join(name("shoulder")))?;
    write_signal(traj.elbow(), dir.join(name("elbow")))?;
    write_signal(traj.hand(), dir.join(name("hand")))?;
    let manifest = TrajectoryManifest {
        format: TRAJECTORY_FORMAT.into(),
        version: FORMAT_VERSION.into(),
        label: label.map(str::to_string),
        shoulder: name("shoulder"),
        elbow: name("elbow"),
        hand: name("hand"),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    let path = dir.join(format!("{stem}.toml"));
    fs::write(&path, text)?;
    Ok(path)
}

pub fn parse_manifest(text: &str) -> Result<TrajectoryManifest> {
    let m: TrajectoryManifest = toml::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    if m.format != TRAJECTORY_FORMAT || m.version != FORMAT_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "unsupported manifest {} {}",
            m.format, m.version
        )));
    }
    Ok(m)
}

/// Reads a trajectory manifest and its pose files (paths relative to the manifest).
pub fn read_trajectory(manifest: impl AsRef<Path>) -> Result<(TrajectoryManifest, BodyTrajectory)> {
    let path = manifest.as_ref();
    let m = parse_manifest(&fs::read_to_string(path)?)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let part = |f: &str| read_signal(dir.join(f), Some(Space::Se3));
    let traj = BodyTrajectory::new(part(&m.shoulder)?, part(&m.elbow)?, part(&m.hand)?)?;
    Ok((m, traj))
}

/// Scalar summary of a [`UstResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UstSummary {
    pub samples: usize,
    pub total_length: f64,
    /// `sup |tau*(t) - t|`.
    pub warp_deviation: f64,
}

impl From<&UstResult> for UstSummary {
    fn from(r: &UstResult) -> Self {
        Self {
            samples: r.resampled.len(),
            total_length: r.total_length,
            warp_deviation: r.warp_star.deviation_from_identity(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Report {
    Match(MatchReport),
    Ust(UstSummary),
}

/// Structured report envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub report: Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            _ => Err(Error::InvalidArgument(format!("unknown report format '{s}'"))),
        }
    }
}

pub fn report_to_string(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let file = ReportFile {
                tool: TOOL_NAME.into(),
                version: TOOL_VERSION.into(),
                report: report.clone(),
            };
            let mut s = serde_json::to_string_pretty(&file).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Text => {
            let mut s = format!("{TOOL_NAME} {TOOL_VERSION}\n");
            match report {
                Report::Match(m) => {
                    let _ = writeln!(s, "method {}", m.method);
                    let _ = writeln!(s, "distance {}", fmt_f64(m.distance));
                    let _ = writeln!(s, "profile {}", m.profile.len());
                    for v in &m.profile {
                        let _ = writeln!(s, "{}", fmt_f64(*v));
                    }
                }
                Report::Ust(u) => {
                    let _ = writeln!(s, "samples {}", u.samples);
                    let _ = writeln!(s, "total_length {}", fmt_f64(u.total_length));
                    let _ = writeln!(s, "warp_deviation {}", fmt_f64(u.warp_deviation));
                }
            }
            Ok(s)
        }
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    fs::write(path, report_to_string(report, format)?)?;
    Ok(())
}

/// Parses a structured report and checks the envelope.
pub fn parse_report(text: &str) -> Result<ReportFile> {
    let file: ReportFile = serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    if file.tool != TOOL_NAME {
        return Err(Error::SchemaMismatch(format!("unexpected tool '{}'", file.tool)));
    }
    Ok(file)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportFile> {
    parse_report(&fs::read_to_string(path)?)
}
