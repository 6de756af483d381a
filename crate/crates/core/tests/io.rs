use std::fs;
use std::path::PathBuf;

use hyperwalk::group::GroupSpec;
use hyperwalk::io::*;
use hyperwalk::walk::MeasureSpec;
use hyperwalk::Error;
use proptest::prelude::*;
use serde_json::{json, Value};

fn schema() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/run-config.v1.schema.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn config(op: Operation, dir: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::new(GroupSpec::free(2), op);
    c.output_dir = dir.to_path_buf();
    c
}

#[test]
fn operations_parse_by_name() {
    for op in Operation::ALL {
        assert_eq!(op.name().parse::<Operation>().unwrap(), op);
        let v = serde_json::to_value(op).unwrap();
        assert_eq!(v, json!(op.name()));
    }
    assert!(matches!("walk".parse::<Operation>(), Err(Error::Config(_))));
}

#[test]
fn malformed_configs_are_config_errors() {
    let bad = [
        r#"{"group": {"kind": "free", "rank": 2}, "operation": "frobnicate"}"#,
        r#"{"group": {"kind": "free", "rank": 2}}"#,
        r#"{"group": {"kind": "free", "rank": 2}, "operation": "pn", "params": {"nmax": 3}}"#,
        r#"{"group": {"kind": "free", "rank": 2}, "operation": "pn", "schema_version": 7}"#,
        "[1, 2]",
        "{",
    ];
    for text in bad {
        let err = RunConfig::from_json(text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        assert_eq!(err.exit_code(), 1);
    }
}

#[test]
fn overrides_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"group": {"kind": "free", "rank": 2}, "operation": "pn", "params": {"n_max": 8}}"#).unwrap();
    let c = RunConfig::load(&path, &[]).unwrap();
    assert_eq!(c.params.n_max, Some(8));
    assert_eq!(c.output_dir, PathBuf::from("out"));
    let over = [
        ("params.n_max".to_string(), json!(6)),
        ("operation".to_string(), json!("spheres")),
        ("params.seed".to_string(), json!(3)),
    ];
    let c = RunConfig::load(&path, &over).unwrap();
    assert_eq!(c.params.n_max, Some(6));
    assert_eq!(c.params.seed, Some(3));
    assert_eq!(c.operation, Operation::Spheres);
}

#[test]
fn schema_lists_every_operation_and_field() {
    let s = schema();
    let ops: Vec<&str> = s["properties"]["operation"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let names: Vec<&str> = Operation::ALL.iter().map(|o| o.name()).collect();
    assert_eq!(ops, names);
    assert_eq!(s["properties"]["schema_version"]["const"], json!(SCHEMA_VERSION));

    // a config with every field set uses only keys the schema declares
    let mut c = RunConfig::new(GroupSpec::free(2), Operation::Pn);
    c.measure = Some(MeasureSpec::new(vec![("a".into(), 1.0)]));
    c.cache_dir = Some("cache".into());
    c.workers = Some(2);
    c.params = Params {
        n_max: Some(1),
        n_min: Some(1),
        n_list: Some(vec![1]),
        prune_eps: Some(0.0),
        r_grid: Some(vec![1.0]),
        r_relative: Some(true),
        depth: Some(1),
        k_max: Some(1),
        radius: Some(1),
        samples: Some(1),
        seed: Some(1),
        x: Some("a".into()),
        y: Some("a".into()),
        z: Some("a".into()),
        threshold: Some(0.0),
        margin: Some(1),
        backend: Some(Backend::Tree),
        precision: Some(hyperwalk::tree_exact::Precision::F64),
        automaton_file: Some("f".into()),
    };
    let v = serde_json::to_value(&c).unwrap();
    let top = s["properties"].as_object().unwrap();
    for key in v.as_object().unwrap().keys() {
        assert!(top.contains_key(key), "{key}");
    }
    let params = s["properties"]["params"]["properties"].as_object().unwrap();
    for key in v["params"].as_object().unwrap().keys() {
        assert!(params.contains_key(key), "params.{key}");
    }
    assert_eq!(v["params"].as_object().unwrap().len(), params.len());
}

/// Fraction of the 4ⁿ letter sequences over {a, A, b, B} that freely reduce
/// to the empty word.
fn closed_walk_fraction(n: u32) -> f64 {
    let mut closed = 0;
    for code in 0..4u32.pow(n) {
        let mut stack: Vec<u32> = Vec::new();
        for i in 0..n {
            // letters 0/1 and 2/3 are mutually inverse
            let l = (code >> (2 * i)) & 3;
            if stack.last() == Some(&(l ^ 1)) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        closed += stack.is_empty() as u32;
    }
    closed as f64 / 4f64.powi(n as i32)
}

#[test]
fn pn_run_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Operation::Pn, dir.path());
    c.params.n_max = Some(12);
    c.params.prune_eps = Some(0.0);
    let out = run(&c).unwrap();
    assert_eq!(out.exit_code, 0);
    assert_eq!(out.manifest.status, "pass");
    assert_eq!(out.manifest.config_hash, c.hash());
    assert_eq!(out.manifest.artifacts, vec!["pn.csv"]);
    let text = fs::read_to_string(dir.path().join("pn.csv")).unwrap();
    assert!(text.starts_with(&format!("# hyperwalk {} config {}", out.manifest.version, c.hash())));
    let row: Vec<&str> = text.lines().find(|l| l.starts_with("4,")).unwrap().split(',').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), closed_walk_fraction(4));
    let saved = RunConfig::from_json(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(saved, c);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&out.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["status"], "pass");
    assert_eq!(manifest["group_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn cached_runs_record_keys_and_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Operation::Pn, &dir.path().join("a"));
    c.params.n_max = Some(9);
    c.cache_dir = Some(dir.path().join("cache"));
    let first = run(&c).unwrap();
    assert_eq!(first.manifest.cache_keys.len(), 5);
    c.output_dir = dir.path().join("b");
    let second = run(&c).unwrap();
    assert_eq!(first.manifest.cache_keys, second.manifest.cache_keys);
    let body = |p: PathBuf| fs::read_to_string(p.join("pn.csv")).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(dir.path().join("a")), body(dir.path().join("b")));
}

#[test]
fn identical_configs_give_identical_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Operation::Ancona, &dir.path().join("a"));
    c.params.samples = Some(10);
    c.params.seed = Some(5);
    run(&c).unwrap();
    let a = fs::read(dir.path().join("a/ancona.csv")).unwrap();
    c.output_dir = dir.path().join("b");
    c.workers = Some(1);
    let out = run(&c).unwrap();
    assert_eq!(out.manifest.status, "pass");
    // the config hash differs (workers), so compare past the comment line
    let b = fs::read(dir.path().join("b/ancona.csv")).unwrap();
    let skip = |v: &[u8]| v.iter().position(|&c| c == b'\n').map(|i| v[i..].to_vec()).unwrap();
    assert_eq!(skip(&a), skip(&b));
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // no exact Green function on a surface group
    let mut c = config(Operation::Llt, dir.path());
    c.group = GroupSpec::surface(2);
    let out = run(&c).unwrap();
    assert_eq!(out.exit_code, 2);
    assert_eq!(out.manifest.status, "error");
    assert!(out.manifest.error.is_some());

    // a short series cannot resolve the potential
    let mut c = config(Operation::Pressure, dir.path());
    c.params.backend = Some(Backend::Series);
    c.params.n_max = Some(4);
    c.params.r_grid = Some(vec![0.5]);
    c.params.depth = Some(2);
    assert_eq!(run(&c).unwrap().exit_code, 3);

    let mut c = config(Operation::Avoidance, dir.path());
    c.params.x = Some("aaa".into());
    assert_eq!(run(&c).unwrap().exit_code, 2);
}

#[test]
fn validate_automaton_reports_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Operation::ValidateAutomaton, &dir.path().join("ok"));
    c.params.radius = Some(8);
    let out = run(&c).unwrap();
    assert_eq!(out.manifest.status, "pass");

    // drop one edge of the free-group automaton
    let g = hyperwalk::group::Group::new(GroupSpec::free(2)).unwrap();
    let aut = hyperwalk::group::GeodesicAutomaton::build(&g, &Default::default()).unwrap();
    let file = dir.path().join("broken.txt");
    fs::write(&file, aut.without_edge(3).to_text(&g)).unwrap();
    c.output_dir = dir.path().join("bad");
    c.params.automaton_file = Some(file);
    let out = run(&c).unwrap();
    assert_eq!(out.exit_code, 0);
    assert_eq!(out.manifest.status, "fail");
    assert!(!out.manifest.summary["counterexamples"].as_array().unwrap().is_empty());
}

#[test]
fn llt_json_has_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(Operation::Llt, dir.path());
    let out = run(&c).unwrap();
    assert_eq!(out.exit_code, 0);
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("llt.json")).unwrap()).unwrap();
    let e = doc["result"]["exponent"].as_f64().unwrap();
    assert!((e + 1.5).abs() < 0.03, "{e}");
}

fn arb_group() -> impl Strategy<Value = GroupSpec> {
    prop_oneof![
        (1usize..5).prop_map(GroupSpec::free),
        prop::collection::vec(2u32..7, 2..4).prop_map(|o| GroupSpec::free_product(&o)),
        (1usize..4).prop_map(GroupSpec::lattice),
        (2usize..4).prop_map(GroupSpec::surface),
    ]
}

fn opt<T: std::fmt::Debug + Clone>(s: impl Strategy<Value = T>) -> impl Strategy<Value = Option<T>> {
    prop::option::of(s)
}

prop_compose! {
    fn arb_params()(
        n_max in opt(0usize..5000),
        prune_eps in opt(prop::num::f64::POSITIVE | prop::num::f64::ZERO),
        r_grid in opt(prop::collection::vec(prop::num::f64::NORMAL, 0..5)),
        r_relative in opt(any::<bool>()),
        depth in opt(1usize..8),
        seed in opt(any::<u64>()),
        x in opt("[a-dA-D]{0,6}"),
        threshold in opt(prop::num::f64::POSITIVE),
        backend in opt(prop_oneof![Just(Backend::Auto), Just(Backend::Tree), Just(Backend::Series)]),
    ) -> Params {
        Params { n_max, prune_eps, r_grid, r_relative, depth, seed, x, threshold, backend, ..Params::default() }
    }
}

proptest! {
    #[test]
    fn configs_round_trip(
        group in arb_group(),
        op in prop::sample::select(Operation::ALL.to_vec()),
        params in arb_params(),
        weights in opt(prop::collection::vec(prop::num::f64::POSITIVE, 1..4)),
        workers in opt(1usize..64),
        dir in "[a-z/]{1,12}",
    ) {
        let mut c = RunConfig::new(group, op);
        c.params = params;
        c.measure = weights.map(|w| MeasureSpec::new(w.into_iter().map(|p| ("a".to_string(), p)).collect()));
        c.workers = workers;
        c.output_dir = dir.into();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }
}
