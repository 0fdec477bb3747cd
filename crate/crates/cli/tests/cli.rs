mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use common::{fixture, kgx, ok, s};
use kgx_core::attribution::rank_proteins;
use kgx_core::kgraph::{read_bundle, NodeKind};
use kgx_core::model::{Checkpoint, ModelRegistry};

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgx(&[
        "build",
        "--manifest",
        s(&dir.path().join("nope.json")),
        "--out",
        s(&dir.path().join("g")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    assert_eq!(kgx(&["train"]).status.code(), Some(2));
    assert_eq!(kgx(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kgx(&["--version"]).status.code(), Some(0));
    let v = String::from_utf8(kgx(&["--version"]).stdout).unwrap();
    assert!(
        v.contains("graph bundle format 1") && v.contains("checkpoint format 1"),
        "{v}"
    );

    let f = fixture(dir.path(), &[], 2);
    let bad_edge = kgx(&[
        "explain",
        "--checkpoint",
        s(&f.checkpoint),
        "--graph",
        s(&f.graph),
        "--edge",
        "disease::nope,drug::C0000",
        "--out",
        s(&dir.path().join("x.json")),
    ]);
    assert_eq!(bad_edge.status.code(), Some(2));
    let bad_threshold = kgx(&[
        "explain-eval",
        "--checkpoint",
        s(&f.checkpoint),
        "--graph",
        s(&f.graph),
        "--records",
        s(&f.data.join("records.tsv")),
        "--threshold",
        "high",
        "--out",
        s(&dir.path().join("e.json")),
    ]);
    assert_eq!(bad_threshold.status.code(), Some(2));
}

#[test]
fn build_report_matches_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &[], 1);
    let g = read_bundle(&f.graph).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("graph.kgx.report.json")).unwrap()).unwrap();
    assert_eq!(report["nodes_total"], g.n_nodes());
    assert_eq!(report["positives"], g.positives().len());
    for kind in NodeKind::ALL {
        assert_eq!(report["nodes"][kind.as_str()], g.nodes_of_kind(kind).len());
    }
    for (r, n) in g.edge_counts() {
        assert_eq!(report["edges"][r.as_str()], n, "{r}");
    }
    assert_eq!(report["graph_digest"], g.digest());
    assert!(dir.path().join("graph.kgx.run.json").exists());
}

#[test]
fn train_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &[], 7);
    let loss = fs::read_to_string(dir.path().join("model.ckpt.loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 7);
    let ck0 = dir.path().join("zero.ckpt");
    ok(&[
        "train",
        "--graph",
        s(&f.graph),
        "--seed",
        "2",
        "--epochs",
        "0",
        "--embed-dim",
        "16",
        "--out",
        s(&ck0),
    ]);
    let ck = Checkpoint::load(&ck0).unwrap();
    let g = read_bundle(&f.graph).unwrap();
    let init = ModelRegistry::builtin().init("graphix", &ck.model_config, &g).unwrap();
    let init: Vec<_> = init.tensors().into_iter().cloned().collect();
    assert_eq!(ck.tensors, init);
    assert!(kgx(&["train", "--graph", s(&f.graph), "--out", s(&ck0)]).status.code() == Some(2));
}

#[test]
fn predict_rows_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &[], 5);
    let out = dir.path().join("top.tsv");
    ok(&[
        "predict",
        "--checkpoint",
        s(&f.checkpoint),
        "--graph",
        s(&f.graph),
        "--all-novel",
        "--top",
        "1",
        "--per-node",
        "--out",
        s(&out),
    ]);
    let g = read_bundle(&f.graph).unwrap();
    let model = ModelRegistry::builtin()
        .restore(&Checkpoint::load(&f.checkpoint).unwrap(), &g)
        .unwrap();
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    let lefts: BTreeSet<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(rows.len(), g.nodes_of_kind(NodeKind::Disease).len());
    assert_eq!(lefts.len(), rows.len());
    for r in &rows {
        let pair = (g.node(r[0]).unwrap(), g.node(r[1]).unwrap());
        assert!(!g.positives().contains(&pair));
        let expect = model.score_pairs(&g, &[pair]).unwrap()[0];
        assert_eq!(r[2].parse::<f64>().unwrap(), expect);
    }

    // explicit pairs, one unknown
    let pairs = dir.path().join("pairs.tsv");
    fs::write(&pairs, "disease::D0000\tdrug::C0001\ndisease::D0000\tdrug::nope\n").unwrap();
    let out2 = dir.path().join("pairs.out.tsv");
    ok(&[
        "predict",
        "--checkpoint",
        s(&f.checkpoint),
        "--graph",
        s(&f.graph),
        "--pairs",
        s(&pairs),
        "--out",
        s(&out2),
    ]);
    assert_eq!(fs::read_to_string(&out2).unwrap().lines().count(), 2);
    let skipped = fs::read_to_string(dir.path().join("pairs.out.tsv.skipped.tsv")).unwrap();
    assert!(skipped.contains("drug::nope") && skipped.contains("unknown drug label"));
}

#[test]
fn predict_drops_mesh_synonyms_and_excluded_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("dd.tsv"),
        "mesh::C04.1\tmesh::C04\nmesh::C04.2\tmesh::C04\nmesh::C10\tmesh::C04\n",
    )
    .unwrap();
    fs::write(d.join("dg.tsv"), "mesh::C04.1\tg1\nmesh::C04.2\tg2\nmesh::C10\tg3\n").unwrap();
    fs::write(d.join("gc.tsv"), "g1\tx\ng2\ty\ng3\tz\ng3\tsupp\n").unwrap();
    fs::write(d.join("dc.tsv"), "mesh::C04.1\tx\nmesh::C10\tz\n").unwrap();
    fs::write(
        d.join("manifest.json"),
        r#"{"target": "disease_drug", "relations": {"disease_disease": "dd.tsv", "disease_gene": "dg.tsv", "gene_drug": "gc.tsv", "disease_drug": "dc.tsv"}}"#,
    )
    .unwrap();
    let graph = d.join("g.kgx");
    let ck = d.join("m.ckpt");
    ok(&["build", "--manifest", s(&d.join("manifest.json")), "--out", s(&graph)]);
    ok(&[
        "train",
        "--graph",
        s(&graph),
        "--seed",
        "0",
        "--epochs",
        "2",
        "--embed-dim",
        "4",
        "--out",
        s(&ck),
    ]);
    fs::write(d.join("supplements.txt"), "drug::supp\n").unwrap();
    let all = d.join("all.tsv");
    let filtered = d.join("filtered.tsv");
    ok(&[
        "predict",
        "--checkpoint",
        s(&ck),
        "--graph",
        s(&graph),
        "--all-novel",
        "--out",
        s(&all),
    ]);
    ok(&[
        "predict",
        "--checkpoint",
        s(&ck),
        "--graph",
        s(&graph),
        "--all-novel",
        "--exclude-mesh-synonyms",
        "--exclude-nodes",
        s(&d.join("supplements.txt")),
        "--out",
        s(&filtered),
    ]);
    let rows = |p: &std::path::Path| -> BTreeSet<(String, String)> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let v: Vec<&str> = l.split('\t').collect();
                (v[0].to_string(), v[1].to_string())
            })
            .collect()
    };
    let (all, filtered) = (rows(&all), rows(&filtered));
    let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
    // C04.2 shares C04 with C04.1, which is already linked to x
    assert!(all.contains(&pair("mesh::C04.2", "drug::x")));
    assert!(!filtered.contains(&pair("mesh::C04.2", "drug::x")));
    assert!(filtered.contains(&pair("mesh::C04.2", "drug::z")));
    assert!(filtered.iter().all(|(_, b)| b != "drug::supp"));
    assert!(all.iter().any(|(_, b)| b == "drug::supp"));
}

#[test]
fn explain_report_validates_and_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &[], 20);
    let schema: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../schemas/attribution-report.schema.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let g = read_bundle(&f.graph).unwrap();
    let model = ModelRegistry::builtin()
        .restore(&Checkpoint::load(&f.checkpoint).unwrap(), &g)
        .unwrap();
    let gcn = model.as_gcn().unwrap();
    for (k, m) in [(0usize, "30"), (1, "1")] {
        let (a, b) = g.positives()[k];
        let edge = format!("{},{}", g.label(a), g.label(b));
        for format in ["dot", "graphml", "json"] {
            let out = dir.path().join(format!("ex{k}{format}.json"));
            ok(&[
                "explain",
                "--checkpoint",
                s(&f.checkpoint),
                "--graph",
                s(&f.graph),
                "--edge",
                &edge,
                "--m",
                m,
                "--format",
                format,
                "--out",
                s(&out),
            ]);
            let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
            assert!(validator.is_valid(&report), "{report}");
            let export = out.with_extension(format!("subgraph.{format}"));
            assert!(fs::metadata(&export).unwrap().len() > 0);

            let req = kgx_core::attribution::AttributionRequest::for_model(gcn, (a, b), m.parse().unwrap());
            let direct = kgx_core::attribution::integrated_gradients(&g, gcn, &req).unwrap();
            let head = rank_proteins(&direct).first().map(|&(n, _)| g.label(n).to_string());
            assert_eq!(report["top_gene"].as_str().map(String::from), head);
        }
    }
    let invalid = serde_json::json!({"edge": ["a"], "score": 1.0});
    assert!(!validator.is_valid(&invalid));
}

#[test]
fn explain_eval_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &["--mediator-fraction", "1", "--noise", "0"], 30);
    let all: Vec<String> = fs::read_to_string(f.data.join("records.tsv"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let mut records: Vec<String> = all.iter().take(21).cloned().collect();
    records.push("disease::missing\tdrug::C0000\tgene::G0000".into());
    let rec = dir.path().join("records.tsv");
    fs::write(&rec, records.join("\n") + "\n").unwrap();
    let out = dir.path().join("ee.json");
    ok(&[
        "explain-eval",
        "--checkpoint",
        s(&f.checkpoint),
        "--graph",
        s(&f.graph),
        "--records",
        s(&rec),
        "--threshold",
        "none",
        "--out",
        s(&out),
    ]);
    let tsv = fs::read_to_string(dir.path().join("ee.json.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(
        lines[0],
        "disease\tdrug\ttarget_protein\tn_candidate_proteins\ttarget_ranking"
    );
    assert_eq!(lines.len(), 1 + 21 + 1);
    assert_eq!(lines[22].trim(), "total accuracy = 21/21(100%)");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(summary["skipped"].as_array().unwrap().len(), 1);
    assert!(summary["skipped"][0]["reason"]
        .as_str()
        .unwrap()
        .contains("not in graph"));
    for r in summary["records"].as_array().unwrap() {
        assert_eq!(r["n_candidates"], 1);
        assert_eq!(r["hit_at_1"], true);
    }
}

#[test]
fn embeddings_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &[], 3);
    let out = dir.path().join("emb.csv");
    ok(&[
        "export-embeddings",
        "--checkpoint",
        s(&f.checkpoint),
        "--graph",
        s(&f.graph),
        "--out",
        s(&out),
    ]);
    let g = read_bundle(&f.graph).unwrap();
    let model = ModelRegistry::builtin()
        .restore(&Checkpoint::load(&f.checkpoint).unwrap(), &g)
        .unwrap();
    let emb = model.node_embeddings();
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 2 + emb.ncols());
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), g.n_nodes());
    for (i, row) in rows.iter().enumerate() {
        let v: Vec<&str> = row.split(',').collect();
        let id = g.node(v[0]).unwrap();
        assert_eq!(id.0, i);
        assert_eq!(v[1], g.kind(id).as_str());
        for (c, x) in v[2..].iter().enumerate() {
            assert_eq!(x.parse::<f64>().unwrap().to_bits(), emb[[i, c]].to_bits());
        }
    }
}

#[test]
fn evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path(), &[], 1);
    let run = |seed: &str, folds: &str| -> serde_json::Value {
        let out = dir.path().join(format!("m{seed}.json"));
        ok(&[
            "evaluate",
            "--graph",
            s(&f.graph),
            "--folds",
            folds,
            "--seed",
            seed,
            "--epochs",
            "3",
            "--embed-dim",
            "8",
            "--out",
            s(&out),
        ]);
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap()
    };
    let a = run("1", "3");
    let b = run("2", "3");
    assert_eq!(a["folds"], 3);
    assert_eq!(a["per_fold"].as_array().unwrap().len(), 3);
    assert_eq!(a["graph_hash"], read_bundle(&f.graph).unwrap().digest());
    let roc = |v: &serde_json::Value| -> Vec<f64> {
        v["per_fold"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| f["roc_auc"].as_f64().unwrap())
            .collect()
    };
    assert_ne!(roc(&a), roc(&b));
    let table: BTreeMap<String, String> = serde_json::from_value(a["table"].clone()).unwrap();
    assert!(table["roc_auc"].contains('±'));
}
