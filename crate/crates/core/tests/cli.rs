use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ceg::generate::{example1_ceg, example1_tree, example2_observation};
use ceg::io::{Model, ModelFile, ObservationFile, ResultFile};
use ceg::propagation::{conditional_atom_probability, propagate};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Failures print exactly one `error[kind]: ...` line.
fn assert_error(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{kind}]: ")), "{err}");
}

#[test]
fn data_files_match_the_library() {
    let Model::Tree(t) =
        ModelFile::parse(&std::fs::read_to_string(data("example1.model.json")).unwrap()).unwrap().load().unwrap()
    else {
        panic!("tree expected")
    };
    assert_eq!(t.edges(), example1_tree().edges());

    let Model::Ceg(g) =
        ModelFile::parse(&std::fs::read_to_string(data("example1.ceg.json")).unwrap()).unwrap().load().unwrap()
    else {
        panic!("ceg expected")
    };
    assert!(g.is_isomorphic(&example1_ceg()));

    let obs = ObservationFile::parse(&std::fs::read_to_string(data("example2.observation.json")).unwrap()).unwrap();
    let ceg::Compatibility::Compatible(obs) = obs.resolve(&g).unwrap() else { panic!() };
    assert_eq!(obs, example2_observation(&g));
}

#[test]
fn fuzz_seeds_parse() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus");
    let g = example1_ceg();
    for entry in std::fs::read_dir(corpus.join("model_file")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        ModelFile::parse(&text).unwrap().load().unwrap();
    }
    for entry in std::fs::read_dir(corpus.join("observation_file")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        ObservationFile::parse(&text).unwrap().resolve(&g).unwrap();
    }
    for entry in std::fs::read_dir(corpus.join("result_file")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        ResultFile::parse(&text).unwrap().to_result(&g).unwrap();
    }
}

#[test]
fn build_prints_summary_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("c1.json");
    let second = dir.path().join("c2.json");
    let o = run(&["build", s(&data("example1.model.json")), "-o", s(&first)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "positions: 8 (incl. sink), edges: 16, atoms: 16");
    let o = run(&["build", s(&first), "-o", s(&second)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "positions: 8 (incl. sink), edges: 16, atoms: 16");
    let load = |p: &Path| match ModelFile::parse(&std::fs::read_to_string(p).unwrap()).unwrap().load().unwrap() {
        Model::Ceg(g) => g,
        Model::Tree(_) => panic!(),
    };
    assert!(load(&first).is_isomorphic(&load(&second)));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn build_reports_bad_sum_with_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(data("example1.model.json")).unwrap();
    let mut file = ModelFile::parse(&text).unwrap();
    file.tree.as_mut().unwrap().edges[0].prob = "0.6".into();
    std::fs::write(&bad, file.to_json()).unwrap();
    let o = run(&["build", s(&bad)]);
    assert_error(&o, 2, "validation");
    assert!(stderr(&o).contains("at vertex v0"), "{}", stderr(&o));
}

#[test]
fn build_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\":\"ceg-model\",\"version\":1,\"tree\":{\"vertices\":[\"a\",\"b\"],\"edges\":[{\"id\":\"e\",\"from\":\"a\",\"to\":\"b\",\"prob\":\"one\"}]}}").unwrap();
    assert_error(&run(&["build", s(&bad)]), 2, "format");
    std::fs::write(&bad, "not json").unwrap();
    assert_error(&run(&["build", s(&bad)]), 2, "format");
    assert_error(&run(&["build", s(&dir.path().join("missing.json"))]), 5, "io");
    assert_error(&run(&["frobnicate"]), 2, "usage");
}

#[test]
fn propagate_running_example() {
    let dir = tempfile::tempdir().unwrap();
    let result = dir.path().join("r.json");
    let reduced = dir.path().join("red.json");
    let dot = dir.path().join("g.dot");
    let o = run(&[
        "propagate",
        s(&data("example1.ceg.json")),
        s(&data("example2.observation.json")),
        "-o",
        s(&result),
        "--reduce",
        s(&reduced),
        "--minimize",
        "--dot",
        s(&dot),
        "--counts",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("P(observation): 0.682000000000"), "{out}");
    assert!(out.contains("backward edge ops: 16"), "{out}");
    assert!(out.contains("forward edge ops: 10"), "{out}");

    let g = example1_ceg();
    let r = ResultFile::parse(&std::fs::read_to_string(&result).unwrap()).unwrap().to_result(&g).unwrap();
    assert_eq!(r, propagate(&g, &example2_observation(&g)).unwrap());

    let Model::Ceg(red) = ModelFile::parse(&std::fs::read_to_string(&reduced).unwrap()).unwrap().load().unwrap() else {
        panic!()
    };
    assert_eq!(red.edge_count(), 10);
    assert!(red.position_by_name("w3").is_none());
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph ceg {"));
}

#[test]
fn propagate_tree_model_directly() {
    let dir = tempfile::tempdir().unwrap();
    let result = dir.path().join("r.json");
    let o =
        run(&["propagate", s(&data("example1.model.json")), s(&data("example2.observation.json")), "-o", s(&result)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0.682000000000"));
}

#[test]
fn vacuous_observation_returns_the_prior() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("o.json");
    let result = dir.path().join("r.json");
    std::fs::write(&obs, "{\"format\":\"ceg-observation\",\"version\":1,\"per_position\":{}}").unwrap();
    let o = run(&["propagate", s(&data("example1.ceg.json")), s(&obs), "-o", s(&result)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = ResultFile::parse(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(r.event_probability, 1.0);
    for e in &r.edges {
        assert_eq!(e.pi_hat, e.prob, "{}", e.id);
    }
}

#[test]
fn zero_and_incompatible_observations_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("o.json");
    let result = dir.path().join("r.json");
    let model = data("example1.ceg.json");

    std::fs::write(&obs, "{\"format\":\"ceg-observation\",\"version\":1,\"per_position\":{\"w0\":[]}}").unwrap();
    assert_error(&run(&["propagate", s(&model), s(&obs), "-o", s(&result)]), 4, "zero-probability");

    std::fs::write(
        &obs,
        "{\"format\":\"ceg-observation\",\"version\":1,\"paths\":[[\"e1\",\"e5\",\"e10\"],[\"e2\",\"e6\",\"e11\"]]}",
    )
    .unwrap();
    let o = run(&["propagate", s(&model), s(&obs), "-o", s(&result)]);
    assert_error(&o, 3, "incompatible");
    assert!(stderr(&o).contains("witness path"));

    std::fs::write(&obs, "{\"format\":\"ceg-observation\",\"version\":1,\"edges\":[\"e99\"]}").unwrap();
    assert_error(&run(&["propagate", s(&model), s(&obs), "-o", s(&result)]), 2, "unknown-id");
}

#[test]
fn queries() {
    let dir = tempfile::tempdir().unwrap();
    let model = data("example1.ceg.json");
    let result = dir.path().join("r.json");
    let o = run(&["propagate", s(&model), s(&data("example2.observation.json")), "-o", s(&result)]);
    assert!(o.status.success());

    let o = run(&["query", s(&model), "reach", "w_inf"]);
    assert_eq!(stdout(&o).trim(), "1.00000000000");
    let o = run(&["query", s(&model), "reach", "w4"]);
    assert_eq!(stdout(&o).trim(), "0.510000000000");
    let o = run(&["query", s(&model), "atom", "e1", "e4"]);
    assert_eq!(stdout(&o).trim(), "0.300000000000");

    let g = example1_ceg();
    let r = propagate(&g, &example2_observation(&g)).unwrap();
    let path = ceg::CegPath::new(vec![g.edge_by_name("e1").unwrap(), g.edge_by_name("e4").unwrap()]);
    let expected = conditional_atom_probability(&g, &r, &path).unwrap();
    let o = run(&["query", s(&model), "--result", s(&result), "conditional-atom", "e1,e4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got: f64 = stdout(&o).trim().parse().unwrap();
    assert!((got - expected).abs() < 1e-11, "{got} vs {expected}");

    assert_error(&run(&["query", s(&model), "atom", "e1", "e6"]), 2, "path");
    assert_error(&run(&["query", s(&model), "atom", "e1", "nope"]), 2, "unknown-id");
    assert_error(&run(&["query", s(&model), "reach", "w9"]), 2, "unknown-id");
    assert_error(&run(&["query", s(&model), "conditional-atom", "e1", "e4"]), 2, "parameter");
}

#[test]
fn bench_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bench", "example1"]);
    let out = stdout(&o);
    assert!(out.contains("storage: 16 edge cells"), "{out}");
    assert!(out.contains("reported, not recomputed"), "{out}");

    let o = run(&["bench", "model-selection", "5"]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("bounds n=5") && l.ends_with("PASS")));
    assert_error(&run(&["bench", "model-selection", "2"]), 2, "parameter");

    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(run(&["bench", "random", "--seed", "11", "--json", s(&a)]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_ceg"))
        .args(["bench", "random", "--json", s(&b)])
        .env("CEG_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
