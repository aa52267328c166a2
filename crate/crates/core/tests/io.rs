use std::fs;

use dsf_core::io::{
    config_hash, load_config, load_dataset, parse_config, read_csv, render_config, write_csv, write_dataset,
};
use dsf_core::model::GammaInit;
use dsf_core::synthetic::block_model;
use dsf_core::tensor::Checkpoint;
use dsf_core::{Backbone, DsfConfig, DsfModel, DsfParams, Error, ErrorKind, Graph, Mode};
use std::path::Path;

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g: Graph = block_model(30, 3, 0.1, 0.3, 4, 1.0, 2).unwrap();
    write_dataset(dir.path(), "toy", &g).unwrap();
    let back = load_dataset::<f64>(dir.path()).unwrap();
    assert_eq!(back.meta.name, "toy");
    assert_eq!(back.meta.num_nodes, 30);
    assert_eq!(back.graph.edges(), g.edges());
    assert_eq!(back.graph.labels(), g.labels());
    assert_eq!(back.graph.features(), g.features());
}

fn write_toy(dir: &Path, edges: &str, nodes: &str) {
    fs::write(
        dir.join("meta.json"),
        r#"{"name":"toy","num_nodes":3,"num_features":2,"num_classes":2}"#,
    )
    .unwrap();
    fs::write(dir.join("edges.tsv"), edges).unwrap();
    fs::write(dir.join("nodes.tsv"), nodes).unwrap();
}

const NODES: &str = "0\t0\t1,2\n1\t1\t0.5,-1\n2\t0\t3,4\n";

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), "0\t1\n1\t2\n1 2\n", NODES);
    match load_dataset::<f64>(dir.path()) {
        Err(Error::Parse { line, path, .. }) => {
            assert_eq!(line, 3);
            assert!(path.ends_with("edges.tsv"));
        }
        other => panic!("unexpected {other:?}"),
    }

    write_toy(dir.path(), "0\t7\n", NODES);
    assert!(matches!(load_dataset::<f64>(dir.path()), Err(Error::Parse { line: 1, .. })));

    write_toy(dir.path(), "0\t1\n", "0\t0\t1,2\n1\t1\t0.5\n2\t0\t3,4\n");
    assert!(matches!(load_dataset::<f64>(dir.path()), Err(Error::Parse { line: 2, .. })));

    write_toy(dir.path(), "0\t1\n", "0\t0\t1,2\n2\t0\t3,4\n");
    let err = load_dataset::<f64>(dir.path()).unwrap_err();
    assert!(err.to_string().contains("node 1 missing"), "{err}");

    write_toy(dir.path(), "0\t1\n", "0\t0\t1,2\n1\t5\t0,0\n2\t0\t3,4\n");
    assert!(matches!(load_dataset::<f64>(dir.path()), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn missing_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_toy(dir.path(), "0\t1\n", NODES);
    fs::remove_file(dir.path().join("nodes.tsv")).unwrap();
    let err = load_dataset::<f64>(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn config_round_trip_and_hash() {
    let config = DsfConfig {
        order: 7,
        backbone: Backbone::Jacobi,
        mode: Mode::I,
        eta2: 0.25,
        gamma_init: Some(GammaInit::Ppr(0.2)),
        jacobi_a: -0.5,
        ..DsfConfig::default()
    };
    let text = render_config(&config);
    let back = parse_config(&text, Path::new("inline")).unwrap();
    assert_eq!(back, config);
    assert_eq!(config_hash(&back), config_hash(&config));
    assert_eq!(config_hash(&config).len(), 16);
    assert_ne!(config_hash(&config), config_hash(&DsfConfig::default()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    fs::write(&path, "# comment\norder = 3\n\nbackbone = bern # trailing\n").unwrap();
    let loaded = load_config(&path).unwrap();
    assert_eq!((loaded.order, loaded.backbone), (3, Backbone::Bern));

    let err = parse_config("order = 3\nnonsense = 1\n", Path::new("cfg")).unwrap_err();
    assert!(err.to_string().contains("cfg:2"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Usage);
    assert!(parse_config("order 3\n", Path::new("cfg")).is_err());
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_csv(&path, &["a", "b"], vec![vec!["1".into(), "2.5".into()], vec!["-3".into(), "1e-3".into()]])
        .unwrap();
    let (header, rows) = read_csv(&path).unwrap();
    assert_eq!(header, vec!["a", "b"]);
    assert_eq!(rows, vec![vec![1.0, 2.5], vec![-3.0, 1e-3]]);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let g: Graph = block_model(12, 2, 0.2, 0.4, 3, 1.0, 5).unwrap();
    let config = DsfConfig {
        order: 3,
        hidden: 5,
        pe_dim: 3,
        ..DsfConfig::default()
    };
    let model = DsfModel::new(&g, config).unwrap();
    let params = model.init_params(&mut dsf_core::rng::rng_for(8, &[]));
    let json = params.to_checkpoint().to_json().unwrap();
    let back = DsfParams::from_checkpoint(&params, &Checkpoint::from_json(&json).unwrap()).unwrap();
    assert_eq!(back, params);
    assert!(Checkpoint::from_json("{\"format\":\"other\",\"params\":[]}").is_err());
}
