mod common;

use std::path::Path;

use common::{octaug, retina_sample, s, tree, write_dataset, write_sample};
use octaug::characterize::CharacterizationReport;
use octaug::evaluate::{ResultRow, ResultTable};
use octaug::io::{
    load_image, load_manifest, read_delta_summary, read_reports, read_result_table, write_image, write_manifest,
    write_result_table, DatasetManifest, ReportFormat,
};
use octaug::pipeline::{sample_params, AppliedParams, Operator, OperatorSpec};
use octaug::{derive_rng, validate_sample, Image, Sample};
use tempfile::tempdir;

fn write_config(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn table(col: &str, values: &[(String, f64)]) -> ResultTable {
    ResultTable {
        columns: vec![col.to_string()],
        rows: values
            .iter()
            .map(|(id, v)| ResultRow {
                id: id.clone(),
                values: vec![Some(*v)],
            })
            .collect(),
    }
}

#[test]
fn empty_pipeline_copies_inputs_byte_for_byte() {
    let dir = tempdir().unwrap();
    let manifest = write_dataset(&dir.path().join("in"), 3, 48, 64, 1);
    let cfg = dir.path().join("empty.toml");
    write_config(&cfg, "master_seed = 3\noperators = []\n");
    let out = dir.path().join("out");
    let o = octaug(&["augment", "--manifest", s(&manifest), "--pipeline", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        let id = format!("scan{i:03}");
        let inp = dir.path().join("in");
        assert_eq!(
            std::fs::read(inp.join(format!("{id}.png"))).unwrap(),
            std::fs::read(out.join("images").join(format!("{id}.png"))).unwrap()
        );
        assert_eq!(
            std::fs::read(inp.join(format!("{id}.csv"))).unwrap(),
            std::fs::read(out.join("boundaries").join(format!("{id}.csv"))).unwrap()
        );
        assert_eq!(
            std::fs::read(inp.join(format!("{id}_mask.png"))).unwrap(),
            std::fs::read(out.join("masks").join(format!("{id}.png"))).unwrap()
        );
    }
}

#[test]
fn default_pipeline_writes_valid_samples_and_logs() {
    let dir = tempdir().unwrap();
    let manifest = write_dataset(&dir.path().join("in"), 3, 48, 64, 2);
    let out = dir.path().join("out");
    let o = octaug(&["augment", "--manifest", s(&manifest), "--out", s(&out), "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = load_manifest(out.join("manifest.json")).unwrap();
    assert_eq!(m.entries.len(), 3);
    for e in &m.entries {
        let sample = m.load_sample(e, false).unwrap();
        assert!(validate_sample(&sample).is_empty(), "{}", e.id);
        let log: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("logs").join(format!("{}.json", e.id))).unwrap()).unwrap();
        assert_eq!(log["master_seed"], 11);
        assert_eq!(log["entries"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn seed_determines_output_tree() {
    let dir = tempdir().unwrap();
    let manifest = write_dataset(&dir.path().join("in"), 4, 48, 64, 3);
    let run = |name: &str, seed: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = octaug(&[
            "augment", "--manifest", s(&manifest), "--out", s(&out), "--seed", seed, "--threads", threads,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        tree(&out)
    };
    let a = run("a", "5", "0");
    let b = run("b", "5", "0");
    let c = run("c", "6", "0");
    let seq = run("seq", "5", "1");
    let four = run("four", "5", "4");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(seq, four);
    assert_eq!(a, seq);
}

#[test]
fn characterize_reports_fixture_values() {
    let dir = tempdir().unwrap();
    let flat = Sample::new("flat", Image::filled(64, 64, 0.5).unwrap());
    let entries = vec![write_sample(dir.path(), &flat)];
    let manifest = dir.path().join("manifest.json");
    write_manifest(&DatasetManifest::new(entries, dir.path()), &manifest).unwrap();

    let csv = dir.path().join("r.csv");
    let o = octaug(&["characterize", "--manifest", s(&manifest), "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "id,alignment,symmetry,contrast,snr_db");
    let r: Vec<CharacterizationReport> = read_reports(&csv).unwrap();
    assert_eq!(r[0].contrast, 0.0);
    assert_eq!(r[0].alignment, 0.0);

    let json = dir.path().join("r.json");
    let o = octaug(&["characterize", "--manifest", s(&manifest), "--out", s(&json), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["rows"][0]["id"], "flat");
}

#[test]
fn characterize_partial_failure_exits_one() {
    let dir = tempdir().unwrap();
    let manifest = write_dataset(dir.path(), 2, 48, 64, 4);
    std::fs::write(dir.path().join("scan001.png"), b"not a png").unwrap();
    let out = dir.path().join("r.csv");
    let o = octaug(&["characterize", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scan001"));
    assert_eq!(read_reports(&out).unwrap().len(), 1);
}

#[test]
fn evaluate_identical_runs_is_perfect() {
    let dir = tempdir().unwrap();
    let manifest = write_dataset(dir.path(), 3, 48, 64, 5);
    let out = dir.path().join("eval.csv");
    let o = octaug(&["evaluate", "--manifest", s(&manifest), "--truth", s(&manifest), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_result_table(&out).unwrap();
    assert_eq!(t.rows.len(), 3);
    for row in &t.rows {
        for (col, v) in t.columns.iter().zip(&row.values) {
            let want = if col.starts_with("rmse") { 0.0 } else { 1.0 };
            assert_eq!(*v, Some(want), "{col}");
        }
    }
}

#[test]
fn compare_swapped_runs_negate_deltas() {
    let dir = tempdir().unwrap();
    let a: Vec<(String, f64)> = (0..8).map(|i| (format!("s{i}"), 1.0 + 0.1 * i as f64)).collect();
    let b: Vec<(String, f64)> = (0..8).map(|i| (format!("s{i}"), 1.0 + 0.13 * i as f64 + 0.01)).collect();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_result_table(&table("rmse_s1", &a), &pa, ReportFormat::Csv).unwrap();
    write_result_table(&table("rmse_s1", &b), &pb, ReportFormat::Csv).unwrap();
    let (o1, o2) = (dir.path().join("ab"), dir.path().join("ba"));
    assert_eq!(octaug(&["compare", "--aug", s(&pa), "--base", s(&pb), "--out", s(&o1)]).status.code(), Some(0));
    assert_eq!(octaug(&["compare", "--aug", s(&pb), "--base", s(&pa), "--out", s(&o2)]).status.code(), Some(0));
    let x = read_delta_summary(o1.join("summary.csv")).unwrap();
    let y = read_delta_summary(o2.join("summary.csv")).unwrap();
    assert_eq!(x[0].1, y[0].1.map(|v| -v));
    assert_eq!(x[0].2, y[0].2.map(|v| -v));
    assert_eq!(x[0].3, y[0].3);
}

#[test]
fn compare_recovers_known_shift_and_bins() {
    let dir = tempdir().unwrap();
    let base: Vec<(String, f64)> = (0..20).map(|i| (format!("s{i}"), 2.0 + (i as f64 * 0.37).sin())).collect();
    let aug: Vec<(String, f64)> = base
        .iter()
        .enumerate()
        .map(|(i, (id, v))| (id.clone(), v - 0.5 + 0.01 * (i % 3) as f64))
        .collect();
    let expected: f64 = (0..20).map(|i| -0.5 + 0.01 * (i % 3) as f64).sum::<f64>() / 20.0;
    let (pa, pb) = (dir.path().join("aug.json"), dir.path().join("base.json"));
    write_result_table(&table("rmse_s1", &aug), &pa, ReportFormat::Json).unwrap();
    write_result_table(&table("rmse_s1", &base), &pb, ReportFormat::Json).unwrap();

    let reports: Vec<CharacterizationReport> = (0..20)
        .map(|i| CharacterizationReport {
            id: format!("s{i}"),
            alignment: i as f64,
            symmetry: 0.9,
            contrast: 0.2,
            snr_db: 30.0 + i as f64,
        })
        .collect();
    let rp = dir.path().join("reports.csv");
    octaug::io::write_reports(&reports, &rp, ReportFormat::Csv).unwrap();

    let out = dir.path().join("cmp");
    let o = octaug(&[
        "compare", "--aug", s(&pa), "--base", s(&pb), "--reports", s(&rp), "--metric", "alignment", "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sum = read_delta_summary(out.join("summary.csv")).unwrap();
    assert!((sum[0].1.unwrap() - expected).abs() < 1e-5);
    assert!(sum[0].3.unwrap() < 0.001);
    let bins = std::fs::read_to_string(out.join("bins.csv")).unwrap();
    assert_eq!(bins.lines().count(), 5);
    assert!(bins.lines().skip(1).all(|l| l.contains(",alignment,") && l.contains(",5,")));
}

#[test]
fn preview_identity_and_vessels() {
    let dir = tempdir().unwrap();
    let s0 = retina_sample("p", 64, 96, 9);
    let img_path = dir.path().join("p.png");
    write_image(&s0.image, &img_path).unwrap();
    let cfg = dir.path().join("pv.toml");
    write_config(
        &cfg,
        "master_seed = 21\n\n[[operators]]\nkind = \"affine\"\nrotation_deg = 0\nshear_x = 0\nscale_x = 1\nscale_y = 1\ntranslate_x = 0\ntranslate_y = 0\n\n[[operators]]\nkind = \"vessel_sim\"\n",
    );
    let out = dir.path().join("pv");
    let o = octaug(&["preview", "--image", s(&img_path), "--pipeline", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let orig = load_image(out.join("original.png")).unwrap();
    assert_eq!(orig, load_image(&img_path).unwrap());
    assert_eq!(load_image(out.join("00_affine.png")).unwrap(), orig);

    let shaded = load_image(out.join("01_vessel_sim.png")).unwrap();
    let mut rng = derive_rng(21, 0, 1);
    let spec = OperatorSpec::new(Operator::vessel_sim(), 1.0);
    let Some(AppliedParams::VesselSim { vessels }) = sample_params(&spec, 0, 96, &mut rng).unwrap() else {
        panic!("expected vessel params");
    };
    assert!(!vessels.is_empty());
    let col_mean = |img: &Image, c: usize| (0..img.height()).map(|r| img.get(r, c)).sum::<f64>() / img.height() as f64;
    for v in &vessels {
        assert!(col_mean(&shaded, v.center) < col_mean(&orig, v.center));
    }
    assert!(shaded.data().iter().zip(orig.data()).all(|(a, b)| a <= b));
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = dir.path().join("o");
    assert_eq!(octaug(&["augment", "--manifest", s(&missing), "--out", s(&out)]).status.code(), Some(2));

    let manifest = write_dataset(&dir.path().join("in"), 1, 32, 32, 6);
    let cfg = dir.path().join("bad.toml");
    write_config(&cfg, "[[operators]]\nkind = \"contrast\"\nfactor = [2, 1]\n");
    let o = octaug(&["augment", "--manifest", s(&manifest), "--pipeline", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(octaug(&["augment", "--bogus"]).status.code(), Some(2));
    assert_eq!(octaug(&["compare", "--aug", "x", "--base", "y", "--out", "z", "--metric", "nope"]).status.code(), Some(2));
}

#[test]
fn evaluate_applies_reference_rmse_scale() {
    let dir = tempdir().unwrap();
    let truth = retina_sample("a", 48, 64, 7);
    let b = truth.boundaries.clone().unwrap();
    let shifted: Vec<Vec<f64>> = b.surfaces().iter().map(|s| s.iter().map(|v| v + 1.0).collect()).collect();
    let pred = truth.clone().with_boundaries(octaug::BoundarySet::new(64, shifted).unwrap());

    let (tdir, pdir) = (dir.path().join("t"), dir.path().join("p"));
    std::fs::create_dir_all(&tdir).unwrap();
    std::fs::create_dir_all(&pdir).unwrap();
    let mut tm = DatasetManifest::new(vec![write_sample(&tdir, &truth)], &tdir);
    tm.rmse_scale = Some(3.5);
    write_manifest(&tm, tdir.join("manifest.json")).unwrap();
    write_manifest(&DatasetManifest::new(vec![write_sample(&pdir, &pred)], &pdir), pdir.join("manifest.json")).unwrap();

    let out = dir.path().join("eval.csv");
    let (pm, tmp) = (pdir.join("manifest.json"), tdir.join("manifest.json"));
    let o = octaug(&["evaluate", "--manifest", s(&pm), "--truth", s(&tmp), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_result_table(&out).unwrap();
    for (col, v) in t.columns.iter().zip(&t.rows[0].values) {
        if col.starts_with("rmse") {
            assert!((v.unwrap() - 3.5).abs() < 1e-4, "{col} {v:?}");
        }
    }
}
