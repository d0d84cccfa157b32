use ust_core::demo::{self, DemoConfig};
use ust_core::io_formats::{read_signal, read_trajectory, read_warp, write_signal, write_trajectory, write_warp};
use ust_core::matching::{classify_nearest, quotient_signal, ust_distance, Method, Quotient};
use ust_core::metric_spaces::{random_warp, Space};
use ust_core::reparam::{apply_warp, ust, UstOptions};
use ust_core::synth;

#[test]
fn files_through_reparam_and_matching() {
    let dir = tempfile::tempdir().unwrap();
    let x = synth::smooth_se3(9, 801);
    let w = random_warp(x.grid(), 4, 0.5).unwrap();
    write_signal(&x, dir.path().join("x.csv")).unwrap();
    write_signal(&apply_warp(&x, &w).unwrap(), dir.path().join("xw.csv")).unwrap();

    let a = read_signal(dir.path().join("x.csv"), Some(Space::Se3)).unwrap();
    let b = read_signal(dir.path().join("xw.csv"), None).unwrap();
    assert_eq!(a.data(), x.data());
    assert!(ust_distance(&a, &b).unwrap().distance < 1e-3);

    let r = ust(&a, UstOptions::default()).unwrap();
    write_warp(&r.warp_star, dir.path().join("w.csv")).unwrap();
    assert_eq!(read_warp(dir.path().join("w.csv")).unwrap(), r.warp_star);
    // The unit-speed form is already unit speed.
    let again = ust(&r.resampled, UstOptions::default()).unwrap();
    assert!(again.warp_star.deviation_from_identity() < 1e-3);
    assert!((again.total_length - r.total_length).abs() < 1e-3 * r.total_length);
}

#[test]
fn demo_corpus_survives_disk_round_trip() {
    let cfg = DemoConfig {
        instances_per_class: 1,
        ..Default::default()
    };
    let corpus = demo::generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut templates = Vec::new();
    for (label, t) in &corpus.templates {
        write_trajectory(t, Some(label), dir.path(), label).unwrap();
        let (manifest, back) = read_trajectory(dir.path().join(format!("{label}.toml"))).unwrap();
        assert_eq!(manifest.label.as_deref(), Some(label.as_str()));
        templates.push((label.clone(), quotient_signal(&back, Quotient::Relative).unwrap()));
    }
    for (truth, q) in &corpus.queries {
        let sig = quotient_signal(q, Quotient::Relative).unwrap();
        assert_eq!(&classify_nearest(&sig, &templates, Method::Ust).unwrap().label, truth);
    }
}
