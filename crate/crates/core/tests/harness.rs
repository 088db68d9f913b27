use std::path::Path;

use commgcn::graph::{load_dataset_dir, write_dataset_dir};
use commgcn::harness::experiment::DatasetStats;
use commgcn::harness::{run_experiment, synth_sbm, ExperimentConfig, Overrides, SbmSpec};
use commgcn::SamplingMode;
use serde_json::Value;

const CONFIG: &str = r#"
seed = 5
out_dir = "unused"

[dataset.sbm]
n_nodes = 160
n_blocks = 4
p_in = 0.15
p_out = 0.01
feature_dim = 8
noise = 1.0
seed = 2

[partition]
workers = 4
strategy = "contiguous"

[sampler]
kind = "ladies"
budget = 32

[model]
layers = 2
hidden = 16

[train]
modes = ["full", "local", "skewed"]
d_values = [4.0, 16.0]
epochs = 4
batch_size = 16
"#;

fn config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema_file);
    let schema = read_json(&path);
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

/// Total `comm_nodes_epoch` of one metrics CSV.
fn csv_total(path: &Path) -> u64 {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "epoch",
            "worker",
            "loss",
            "train_acc",
            "val_acc",
            "comm_nodes_epoch"
        ]
    );
    reader
        .records()
        .map(|r| r.unwrap()[5].parse::<u64>().unwrap())
        .sum()
}

#[test]
fn outputs_follow_layout_and_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path());
    let report = run_experiment(&cfg).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "comparison.json",
            "metrics_full_0.csv",
            "metrics_local_0.csv",
            "metrics_skewed_16.csv",
            "metrics_skewed_4.csv",
            "summary.json"
        ]
    );
    let summary = read_json(&tmp.path().join("summary.json"));
    let comparison = read_json(&tmp.path().join("comparison.json"));
    assert_valid("summary.schema.json", &summary);
    assert_valid("comparison.schema.json", &comparison);
    assert_eq!(summary, serde_json::to_value(&report.summary).unwrap());
    assert_eq!(report.comparison.reductions.len(), 2);
}

#[test]
fn reduction_factor_matches_raw_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(tmp.path())).unwrap();
    let full = csv_total(&tmp.path().join("metrics_full_0.csv"));
    assert_eq!(csv_total(&tmp.path().join("metrics_local_0.csv")), 0);
    let comparison = read_json(&tmp.path().join("comparison.json"));
    assert_eq!(comparison["full_total_comm"].as_u64().unwrap(), full);
    for entry in comparison["reductions"].as_array().unwrap() {
        let d = entry["d"].as_f64().unwrap();
        let skewed = csv_total(&tmp.path().join(format!("metrics_skewed_{d}.csv")));
        assert_eq!(entry["total_comm"].as_u64().unwrap(), skewed);
        let factor = entry["reduction_factor"].as_f64().unwrap();
        assert_eq!(factor, full as f64 / skewed as f64);
        assert!(factor > 1.0);
    }
}

#[test]
fn full_only_run_has_no_reductions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path());
    cfg.apply(&Overrides {
        modes: Some(vec![SamplingMode::Full]),
        ..Overrides::default()
    })
    .unwrap();
    let report = run_experiment(&cfg).unwrap();
    assert!(report.comparison.reductions.is_empty());
    assert!(report.comparison.full_total_comm.is_some());
    assert_valid(
        "comparison.schema.json",
        &read_json(&tmp.path().join("comparison.json")),
    );
}

#[test]
fn skewed_only_run_has_no_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path());
    cfg.train.modes = vec![SamplingMode::Skewed];
    let report = run_experiment(&cfg).unwrap();
    assert!(report.comparison.reductions.is_empty());
    assert_eq!(report.comparison.full_total_comm, None);
    assert!(report
        .summary
        .cells
        .iter()
        .all(|c| c.reduction_vs_full.is_none()));
}

#[test]
fn dataset_directory_input_matches_synthetic_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&tmp.path().join("synthetic"));
    let g = synth_sbm(cfg.dataset.sbm.as_ref().unwrap()).unwrap();
    let data = tmp.path().join("data");
    write_dataset_dir(&g, &data).unwrap();

    let mut from_dir = config(&tmp.path().join("from_dir"));
    from_dir.dataset.sbm = None;
    from_dir.dataset.path = Some(data.clone());
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&from_dir).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(
        DatasetStats::of(&load_dataset_dir(&data).unwrap()),
        DatasetStats::of(&g)
    );
}

#[test]
fn saint_experiment_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = CONFIG.replace(
        "kind = \"ladies\"\nbudget = 32",
        "kind = \"saint\"\nsubgraph_size = 40",
    );
    let mut cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    cfg.out_dir = tmp.path().to_path_buf();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.summary.sampler, "saint");
    assert_valid(
        "summary.schema.json",
        &read_json(&tmp.path().join("summary.json")),
    );
    let full = report
        .summary
        .cells
        .iter()
        .find(|c| c.mode == SamplingMode::Full)
        .unwrap();
    assert!(full.total_comm > 0);
    // remote members are charged once per plan, at the input layer
    assert!(full.comm_per_layer[1..].iter().all(|&c| c == 0));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path());
    cfg.dataset.sbm = None;
    cfg.dataset.path = Some(tmp.path().join("nope"));
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, commgcn::Error::Io { .. }), "{err}");
}

#[test]
fn sbm_edge_count_matches_expectation() {
    let spec = SbmSpec {
        n_nodes: 120,
        n_blocks: 3,
        p_in: 0.2,
        p_out: 0.02,
        feature_dim: 3,
        noise: 0.0,
        seed: 0,
    };
    let mean = spec.expected_edges();
    let trials = 200;
    let counts: Vec<f64> = (0..trials)
        .map(|seed| {
            let g = synth_sbm(&SbmSpec {
                seed,
                ..spec.clone()
            })
            .unwrap();
            g.edges().count() as f64
        })
        .collect();
    let avg = counts.iter().sum::<f64>() / trials as f64;
    // each pair is an independent Bernoulli
    let pairs_in = 3.0 * (40.0 * 39.0 / 2.0);
    let pairs_out = 120.0 * 119.0 / 2.0 - pairs_in;
    let var = pairs_in * 0.2 * 0.8 + pairs_out * 0.02 * 0.98;
    let se = (var / trials as f64).sqrt();
    assert!((avg - mean).abs() <= 3.0 * se, "{avg} vs {mean} (se {se})");
}
