//! Synthetic arm-gesture corpus for the action-recognition demo.
//!
//! Each gesture is a shoulder-elbow-hand kinematic chain driven by smooth
//! joint-angle profiles. Instances see an unknown rigid pose of the whole
//! body, a random time warp and Gaussian noise on every translation.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::lie_se3::{self, Se3};
use crate::matching::{self, BodyTrajectory, Method, Quotient};
use crate::metric_spaces::{random_warp_with, Signal, TimeGrid};
use crate::reparam;

pub const UPPER_ARM: f64 = 0.30;
pub const FOREARM: f64 = 0.28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gesture {
    Wave,
    Throw,
    ScratchHead,
    ThumbsUp,
    RaiseHand,
    RubEyes,
}

impl Gesture {
    pub const ALL: [Gesture; 6] = [
        Gesture::Wave,
        Gesture::Throw,
        Gesture::ScratchHead,
        Gesture::ThumbsUp,
        Gesture::RaiseHand,
        Gesture::RubEyes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Gesture::Wave => "wave",
            Gesture::Throw => "throw",
            Gesture::ScratchHead => "scratch_head",
            Gesture::ThumbsUp => "thumbs_up",
            Gesture::RaiseHand => "raise_hand",
            Gesture::RubEyes => "rub_eyes",
        }
    }

    /// Shoulder (yaw, pitch, roll) and elbow flexion at normalized time `t`.
    ///
    /// Shoulder angles stay within 0.9 rad in total and flexion within
    /// [0, 0.6], so relative rotations between any two gestures stay well
    /// below a half turn.
    fn joints(self, t: f64) -> ([f64; 3], f64) {
        let bump = (PI * t).sin().powi(2);
        let ss = t * t * (3.0 - 2.0 * t);
        match self {
            Gesture::Wave => (
                [0.1, -0.45, 0.3 * (6.0 * PI * t).sin()],
                0.3 + 0.25 * (6.0 * PI * t + 0.5).sin(),
            ),
            Gesture::Throw => (
                [0.3 * (PI * t).cos(), -0.5 + 0.9 * ss, 0.05],
                0.55 * (1.0 - ss),
            ),
            Gesture::ScratchHead => (
                [0.1, -0.6 * bump, 0.15 * (10.0 * PI * t).sin()],
                0.55 * bump,
            ),
            Gesture::ThumbsUp => (
                [0.4 * (PI * t).sin(), -0.35 * (PI * t).sin(), 0.1 * (2.0 * PI * t).sin()],
                0.5 * bump,
            ),
            Gesture::RaiseHand => ([0.0, -0.85 * ss, 0.05 * ss], 0.05 + 0.4 * (1.0 - ss)),
            Gesture::RubEyes => (
                [
                    0.2 * (8.0 * PI * t).sin() * bump,
                    -0.5 * bump,
                    0.15 * (8.0 * PI * t).cos() * bump,
                ],
                0.6 * bump,
            ),
        }
    }

    /// Noise-free gesture in the body frame on `n` samples.
    pub fn canonical(self, n: usize) -> Result<BodyTrajectory> {
        let grid = TimeGrid::new(n)?;
        let mut s = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        for k in 0..n {
            let t = grid.t(k);
            let torso = Se3::new(
                rot_zyx(0.05 * (2.0 * PI * t).sin(), 0.0, 0.0),
                Vector3::new(0.0, 0.2, 1.4 + 0.01 * (2.0 * PI * t).sin()),
            );
            let ([yaw, pitch, roll], flex) = self.joints(t);
            let upper = Se3::new(rot_zyx(yaw, pitch, roll), Vector3::zeros())
                .compose(&Se3::from_translation(Vector3::new(0.0, 0.0, -UPPER_ARM)));
            let lower = Se3::new(rot_zyx(0.0, flex, 0.0), Vector3::zeros())
                .compose(&Se3::from_translation(Vector3::new(0.0, 0.0, -FOREARM)));
            let elbow = torso.compose(&upper);
            let hand = elbow.compose(&lower);
            s.push(torso);
            e.push(elbow);
            h.push(hand);
        }
        BodyTrajectory::new(
            Signal::from_se3(&s)?,
            Signal::from_se3(&e)?,
            Signal::from_se3(&h)?,
        )
    }
}

fn rot_zyx(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    Rotation3::from_euler_angles(roll, pitch, yaw).into_inner()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub seed: u64,
    pub samples: usize,
    pub instances_per_class: usize,
    /// Noise standard deviation as a fraction of the arm length.
    pub noise_fraction: f64,
    pub warp_roughness: f64,
    /// Scale passed to the random body pose.
    pub pose_scale: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 100,
            instances_per_class: 5,
            noise_fraction: 0.01,
            warp_roughness: 0.5,
            pose_scale: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    /// One canonical trajectory per gesture.
    pub templates: Vec<(String, BodyTrajectory)>,
    /// Posed, warped and noisy instances with their true labels.
    pub queries: Vec<(String, BodyTrajectory)>,
}

/// Deterministic corpus for a configuration.
pub fn generate(cfg: &DemoConfig) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid = TimeGrid::new(cfg.samples)?;
    let sigma = cfg.noise_fraction * (UPPER_ARM + FOREARM);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut templates = Vec::new();
    let mut queries = Vec::new();
    for g in Gesture::ALL {
        let base = g.canonical(cfg.samples)?;
        templates.push((g.name().to_string(), base.clone()));
        for _ in 0..cfg.instances_per_class {
            let pose = lie_se3::random_se3_with(&mut rng, cfg.pose_scale);
            let warp = random_warp_with(&mut rng, grid, cfg.warp_roughness)?;
            let inst = base.map(|s| reparam::apply_warp(s, &warp))?.left_act(|_| pose)?;
            let inst = inst.map(|s| {
                let mut data = s.data().to_vec();
                for chunk in data.chunks_exact_mut(lie_se3::FLAT_LEN) {
                    for x in &mut chunk[9..12] {
                        *x += noise.sample(&mut rng);
                    }
                }
                Signal::new(s.space(), data)
            })?;
            queries.push((g.name().to_string(), inst));
        }
    }
    Ok(Corpus { templates, queries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub truth: String,
    pub ust_label: String,
    pub ust_score: f64,
    pub dtw_label: String,
    pub dtw_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub config: DemoConfig,
    pub quotient: Quotient,
    pub rows: Vec<DemoRow>,
    pub ust_accuracy: f64,
    pub dtw_accuracy: f64,
}

/// Classifies every query against the templates with UST and with DTW, both
/// on the quotient signals.
pub fn run(cfg: &DemoConfig, quotient: Quotient) -> Result<DemoReport> {
    let corpus = generate(cfg)?;
    classify_corpus(cfg, &corpus, quotient)
}

pub fn classify_corpus(cfg: &DemoConfig, corpus: &Corpus, quotient: Quotient) -> Result<DemoReport> {
    let templates = corpus
        .templates
        .iter()
        .map(|(l, t)| Ok((l.clone(), matching::quotient_signal(t, quotient)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(corpus.queries.len());
    for (truth, q) in &corpus.queries {
        let sig = matching::quotient_signal(q, quotient)?;
        let u = matching::classify_nearest(&sig, &templates, Method::Ust)?;
        let d = matching::classify_nearest(&sig, &templates, Method::Dtw)?;
        rows.push(DemoRow {
            truth: truth.clone(),
            ust_label: u.label,
            ust_score: u.score,
            dtw_label: d.label,
            dtw_score: d.score,
        });
    }
    let total = rows.len().max(1) as f64;
    let ust_accuracy = rows.iter().filter(|r| r.ust_label == r.truth).count() as f64 / total;
    let dtw_accuracy = rows.iter().filter(|r| r.dtw_label == r.truth).count() as f64 / total;
    Ok(DemoReport {
        config: *cfg,
        quotient,
        rows,
        ust_accuracy,
        dtw_accuracy,
    })
}
