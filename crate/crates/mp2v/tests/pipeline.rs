use std::path::Path;

use mp2v::io::{self, Which};
use mp2v::pipeline::{
    cmd_eval, cmd_nn, cmd_train, tune_alpha, EvalData, MetadataSource, Method, Mode, Phases, RunConfig,
};
use mp2v::synthetic::{generate, SyntheticSpec, CATEGORY_ATTRIBUTE};
use mp2v::Error;
use mp2v_core::corpus::Phase;
use mp2v_core::metrics::{evaluate, EvalConfig};
use mp2v_core::model::EmbeddingModel;
use mp2v_core::scorer::Mix;
use mp2v_core::train::HyperParams;

fn fixture(out: &Path) -> RunConfig {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    RunConfig {
        sessions: dir.join("sessions.tsv"),
        metadata: vec![MetadataSource {
            name: CATEGORY_ATTRIBUTE.into(),
            path: dir.join("categories.tsv"),
        }],
        out: out.to_path_buf(),
        epochs: Some(2),
        params: HyperParams {
            dim: 16,
            ..HyperParams::default()
        },
        eval: EvalConfig {
            bootstrap_samples: 50,
            ..EvalConfig::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn tuned_alpha_table_matches_mix_evaluation() {
    let corpus = generate(&SyntheticSpec {
        sessions: 400,
        categories: 5,
        items_per_category: 30,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let data = EvalData::new(&corpus.sessions, Phase::Tuning, 1, 3).unwrap();
    let params = HyperParams {
        dim: 16,
        epochs: 3,
        min_count: 1,
        ..HyperParams::default()
    };
    let trained =
        mp2v::pipeline::train_split(&data.split, &[corpus.metadata()], &params, Mode::Metaprod2vec.kinds()).unwrap();
    let emb = data.embedding_scorer("emb", trained.vocab.tokens(), &trained.model);
    let co = data.cocounts(Default::default());
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for pool in [5, 40] {
        let (best, table) = tune_alpha(&emb, &co, &data.cases, &grid, 10, pool).unwrap();
        assert!(table
            .iter()
            .all(|s| s.hr <= table.iter().find(|t| t.alpha == best).unwrap().hr));
        let config = EvalConfig {
            k_list: vec![10],
            bootstrap_samples: 0,
            ..EvalConfig::default()
        };
        for score in &table {
            let mix = Mix::new("mix", score.alpha, &emb, &co, pool).unwrap();
            let report = data.evaluate(&mix, &config).unwrap();
            assert!(
                (report.hr(10).unwrap() - score.hr).abs() < 1e-12,
                "alpha {}",
                score.alpha
            );
            assert!(
                (report.ndcg(10).unwrap() - score.ndcg).abs() < 1e-12,
                "alpha {}",
                score.alpha
            );
        }
    }
}

#[test]
fn parallel_evaluation_matches_sequential() {
    let corpus = generate(&SyntheticSpec {
        sessions: 300,
        categories: 4,
        items_per_category: 20,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let data = EvalData::new(&corpus.sessions, Phase::Final, 1, 3).unwrap();
    let config = EvalConfig::default();
    let co = data.cocounts(Default::default());
    let parallel = data.evaluate(&co, &config).unwrap();
    let sequential = evaluate(&co, &data.cases, data.skipped, &config).unwrap();
    assert_eq!(parallel, sequential);
}

#[test]
fn bestof_alone_needs_no_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        methods: vec![Method::BestOf],
        ..fixture(dir.path())
    };
    let outcome = cmd_eval(&config).unwrap();
    assert_eq!(outcome.reports.len(), 1);
    assert!(dir.path().join("report.bestof.json").is_file());
    assert!(dir.path().join("eval.config.json").is_file());
}

#[test]
fn missing_embeddings_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        methods: vec![Method::BestOf, Method::MixProd2vec],
        ..fixture(dir.path())
    };
    match cmd_eval(&config) {
        Err(Error::MissingArtifacts { command, missing }) => {
            assert_eq!(command, "train");
            assert_eq!(missing.len(), 2);
            assert!(missing.iter().all(|m| m.contains("prod2vec.")));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn comparison_rows_follow_fixed_order_and_configs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    for mode in [Mode::Metaprod2vec, Mode::Prod2vec] {
        cmd_train(&RunConfig { mode, ..config.clone() }).unwrap();
    }
    let shuffled = RunConfig {
        methods: vec![
            Method::MixMetaprod2vec,
            Method::BestOf,
            Method::Prod2vec,
            Method::CoCounts,
            Method::MixProd2vec,
            Method::Metaprod2vec,
        ],
        ..config.clone()
    };
    cmd_eval(&shuffled).unwrap();
    let table = std::fs::read_to_string(dir.path().join("comparison.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    let want: Vec<&str> = Method::ALL.iter().map(|m| m.display_name()).collect();
    assert_eq!(rows, want);

    let written: RunConfig = io::read_json(&dir.path().join("eval.config.json")).unwrap();
    assert_eq!(written, shuffled);
    for name in ["train.prod2vec.config.json", "train.metaprod2vec.config.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.mix-metaprod2vec.json")).unwrap())
            .unwrap();
    for key in ["method", "metrics", "buckets", "evaluated", "skipped"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert!(report["metrics"]["HR@10"]["est"].is_number());
}

#[test]
fn train_logs_only_the_enabled_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        phases: Phases::Final,
        ..fixture(dir.path())
    };
    for (mode, kinds) in [
        (Mode::Prod2vec, vec!["JI"]),
        (Mode::Metaprod2vec, vec!["IM", "JI", "JM", "MI", "MM"]),
    ] {
        cmd_train(&RunConfig { mode, ..config.clone() }).unwrap();
        let log = std::fs::read_to_string(dir.path().join(format!("{}.final.log.jsonl", mode.slug()))).unwrap();
        assert_eq!(log.lines().count(), 2);
        for line in log.lines() {
            let entry: serde_json::Value = serde_json::from_str(line).unwrap();
            let keys: Vec<&String> = entry["mean_loss"].as_object().unwrap().keys().collect();
            assert_eq!(keys, kinds);
        }
    }
    assert!(!dir.path().join("prod2vec.tuning.vec").exists());
}

#[test]
fn metaprod2vec_with_missing_metadata_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture(dir.path());
    config.metadata[0].path = dir.path().join("absent.tsv");
    let err = cmd_train(&config).unwrap_err();
    assert!(err.to_string().contains("absent.tsv"), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    config.metadata.clear();
    assert!(matches!(cmd_train(&config), Err(Error::Config(_))));
}

fn nn_fixture(dir: &Path) -> std::path::PathBuf {
    let tokens: Vec<String> = ["a", "b", "c", "d", "artist:x"].iter().map(|s| s.to_string()).collect();
    let rows = [[1.0f32, 0.0], [1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [0.8, 0.6]];
    let model =
        EmbeddingModel::<f32>::from_tables(5, 2, rows.iter().flatten().copied().collect(), vec![0.0; 10]).unwrap();
    let path = dir.join("emb.vec");
    io::save_embeddings(&model, &tokens, &path, Which::Input).unwrap();
    path
}

#[test]
fn nn_ranks_duplicates_first_and_excludes_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = nn_fixture(dir.path());
    let n = cmd_nn(&path, "a", 1).unwrap();
    assert_eq!((n[0].rank, n[0].item.as_str(), n[0].score), (1, "b", 1.0));

    let all = cmd_nn(&path, "a", 100).unwrap();
    let items: Vec<&str> = all.iter().map(|n| n.item.as_str()).collect();
    assert_eq!(items, ["b", "d", "c"]);

    let from_meta = cmd_nn(&path, "artist:x", 10).unwrap();
    assert_eq!(from_meta.len(), 4);
    assert!(from_meta.iter().all(|n| !n.item.contains(':')));

    let err = cmd_nn(&path, "zzz", 3).unwrap_err();
    assert!(err.to_string().contains("zzz"));
}

#[test]
fn run_config_round_trips_through_json() {
    let config = RunConfig {
        methods: vec![Method::CoCounts],
        alpha_grid: vec![0.1, 0.2],
        ..fixture(Path::new("out"))
    };
    let text = serde_json::to_string(&config).unwrap();
    assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), config);
    // partial files fall back to defaults
    let partial: RunConfig = serde_json::from_str(r#"{"sessions": "s.tsv", "params": {"dim": 8}}"#).unwrap();
    assert_eq!(partial.params.dim, 8);
    assert_eq!(partial.params.window, HyperParams::default().window);
    assert_eq!(partial.methods, Method::ALL);
}
