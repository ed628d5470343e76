use std::path::{Path, PathBuf};

use atsc::harness::{
    apply_override, compare, compare_records, gen_grid_files, improvement, load_run, parse_grid, run, HarnessError,
    RunConfig,
};
use atsc::sim::{load_flow, load_network, GridSpec};
use atsc::train::{Algorithm, METRICS_COLUMNS};
use proptest::prelude::*;

fn quick_overrides(out: &Path, seed: u64) -> Vec<String> {
    vec![
        "sim.episode_length=30".into(),
        "train.total_env_steps=90".into(),
        "train.hidden_dim=8".into(),
        "train.batch_size=2".into(),
        "train.buffer_size=2".into(),
        "train.eval_interval=1".into(),
        format!("train.seed={seed}"),
        format!("out_dir={:?}", out.to_string_lossy()),
    ]
}

#[test]
fn defaults_follow_the_hyperparameter_table() {
    let c = RunConfig::load(None, &[]).unwrap();
    assert_eq!(c.train.algorithm, Algorithm::MappoLce);
    assert_eq!(c.train.gamma, 0.985);
    assert_eq!(c.train.gae_lambda, 0.95);
    assert_eq!(c.train.eps_clip, 0.15);
    assert_eq!(c.train.critic_coef, 0.5);
    assert_eq!(c.train.grad_norm_clip, 10.0);
    assert_eq!(c.train.epochs, 2);
    assert_eq!(c.train.lambda_init, 0.01);
    assert_eq!(c.train.lambda_lr, 1e-4);
    assert_eq!(c.train.cost_estimator_lr, 1e-4);
    assert_eq!(c.train.cost_limit, 0.0);
    assert_eq!(c.train.penalty_zeta, 0.2);
    assert_eq!((c.train.batch_size, c.train.buffer_size), (8, 8));
    assert_eq!(c.train.hidden_dim, 128);
    assert_eq!(c.train.target_update_interval, 200);
    assert_eq!(c.train.learning_rate(), 5e-5);
    assert_eq!(c.network.grid, "2x2");
    assert_eq!(c.final_window, 10);
    assert_eq!(c.format_version, 1);
}

#[test]
fn overrides_and_parse_errors() {
    let c = RunConfig::load(
        None,
        &[
            "train.algorithm=\"mappo\"".into(),
            "constraint.mode=\"all\"".into(),
            "train.lr=0.001".into(),
            "network.grid=3x4".into(),
            "train.normalize_advantages=false".into(),
        ],
    )
    .unwrap();
    assert_eq!(c.train.algorithm, Algorithm::Mappo);
    assert_eq!(c.train.learning_rate(), 0.001);
    assert_eq!(parse_grid(&c.network.grid).unwrap(), (3, 4));
    assert!(!c.train.normalize_advantages);

    for bad in ["train.gamma=0", "train.tau=2.0", "train.eps_clip=-1", "network.grid=0x2", "nonsense=1", "train.gamma"] {
        let err = RunConfig::load(None, &[bad.into()]).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)), "{bad}: {err}");
        assert_eq!(err.exit_code(), 2);
    }
    let mut t = toml::Table::new();
    apply_override(&mut t, "a.b.c=1.5").unwrap();
    assert_eq!(t["a"]["b"]["c"].as_float(), Some(1.5));
}

#[test]
fn missing_flow_file_names_the_path() {
    let err = RunConfig::load(None, &["flow.file=\"/definitely/missing/flow.json\"".into()]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("/definitely/missing/flow.json"), "{err}");
    let err = RunConfig::load(Some(Path::new("/no/such/run.toml")), &[]).unwrap_err();
    assert!(err.to_string().contains("/no/such/run.toml"));
}

#[test]
fn gen_grid_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec {
        rows: 3,
        cols: 4,
        intensity: 0.05,
        seed: 2,
        ..GridSpec::default()
    };
    let (net_path, flow_path) = gen_grid_files(&spec, dir.path()).unwrap();
    let net = load_network(&std::fs::read_to_string(net_path).unwrap()).unwrap();
    let flow = load_flow(&std::fs::read_to_string(flow_path).unwrap()).unwrap();
    assert_eq!(net.num_agents(), 12);
    flow.validate(&net).unwrap();
    assert!(!flow.flows.is_empty());
}

/// Keys the schema files require are present in generated documents, and
/// every key a generated document writes is declared by its schema.
#[test]
fn generated_documents_match_schema_keys() {
    let dir = tempfile::tempdir().unwrap();
    let (net_path, flow_path) = gen_grid_files(&GridSpec::default(), dir.path()).unwrap();
    let schemas = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    for (schema, doc, item) in [
        ("network.schema.json", net_path, "roads"),
        ("flow.schema.json", flow_path, "flows"),
    ] {
        let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schemas.join(schema)).unwrap()).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(doc).unwrap()).unwrap();
        let declared = schema["properties"].as_object().unwrap();
        for key in schema["required"].as_array().unwrap() {
            assert!(doc.get(key.as_str().unwrap()).is_some(), "{key} missing");
        }
        for key in doc.as_object().unwrap().keys() {
            assert!(declared.contains_key(key), "{key} not in schema");
        }
        let item_props = schema["properties"][item]["items"]["properties"].as_object().unwrap();
        for key in doc[item][0].as_object().unwrap().keys() {
            assert!(item_props.contains_key(key), "{item}.{key} not in schema");
        }
    }
}

#[test]
fn run_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ca = RunConfig::load(None, &quick_overrides(&a, 3)).unwrap();
    let cb = RunConfig::load(None, &quick_overrides(&b, 3)).unwrap();
    let out = run(&ca).unwrap();
    run(&cb).unwrap();
    let csv_a = std::fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("metrics.csv")).unwrap());
    let header = String::from_utf8(csv_a.clone()).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, METRICS_COLUMNS.join(","));
    assert!(a.join("checkpoint.txt").is_file());
    assert!(a.join("updates.csv").is_file());
    assert_eq!(out.metrics.len(), 3);
    assert!(out.metrics.windows(2).all(|w| w[0].step < w[1].step));

    // every config value echoes into the manifest
    let record = load_run(&a).unwrap();
    assert_eq!(record.manifest.config, ca);
    assert_eq!(record.manifest.seed, 3);
    assert!(!record.manifest.git_describe.is_empty());
    assert_eq!(record.metrics, out.metrics);

    // a different seed changes the stream
    let c = dir.path().join("c");
    run(&RunConfig::load(None, &quick_overrides(&c, 4)).unwrap()).unwrap();
    assert_ne!(csv_a, std::fs::read(c.join("metrics.csv")).unwrap());

    let cmp = compare(&[a.clone(), b.clone()]).unwrap();
    for m in &cmp.metrics {
        assert!(m.improvements.iter().all(|&v| v == 0.0 || v.is_nan()), "{m:?}");
    }
    let text = cmp.to_string();
    assert!(text.contains("throughput"));

    let other = dir.path().join("other");
    let mut ov = quick_overrides(&other, 3);
    ov.push("constraint.mode=\"phaseskip\"".into());
    run(&RunConfig::load(None, &ov).unwrap()).unwrap();
    let err = compare(&[a, other]).unwrap_err();
    assert!(err.to_string().contains("constraint"), "{err}");
    assert!(matches!(compare(&[b]), Err(HarnessError::Config(_))));
}

#[test]
fn atsc_out_overrides_the_root() {
    let c = RunConfig::load(None, &["out_dir=\"runs/x\"".into()]).unwrap();
    std::env::set_var("ATSC_OUT", "/tmp/atsc-root");
    let resolved = c.resolved_out_dir();
    std::env::remove_var("ATSC_OUT");
    assert_eq!(resolved, PathBuf::from("/tmp/atsc-root/runs/x"));
    let abs = RunConfig::load(None, &["out_dir=\"/abs/dir\"".into()]).unwrap();
    assert_eq!(abs.resolved_out_dir(), PathBuf::from("/abs/dir"));
}

#[test]
fn improvement_arithmetic() {
    assert!((improvement(113.86, 100.0, true) - 13.86).abs() < 1e-9);
    assert!((improvement(90.0, 100.0, false) - 10.0).abs() < 1e-9);
    assert_eq!(improvement(5.0, 5.0, true), 0.0);
    assert_eq!(improvement(5.0, 5.0, false), 0.0);
    let _ = compare_records;
}

proptest! {
    #[test]
    fn improvement_is_antisymmetric(a in 0.1f64..1e4, b in 0.1f64..1e4) {
        let ab = improvement(a, b, true);
        let ba = improvement(b, a, true);
        prop_assert!((ab - (-ba / (1.0 + ba / 100.0))).abs() < 1e-9 * (1.0 + ab.abs()));
    }
}
