use dynlsm::io::{
    load_archive, parse_archive, read_edge_table, read_series, read_trajectory, save_archive,
    to_canonical_json, write_edge_table, write_series, write_trajectory, EdgeRow, FitArchive,
};
use dynlsm::metrics::predict_edges;
use dynlsm::simulate::{mask_edges, simulate_binary, simulate_gaussian};
use dynlsm::{fit, Error, Family, ModelConfig, ScaleMode};
use tempfile::tempdir;

fn small_fit(family: Family) -> (dynlsm::NetworkSeries, ModelConfig, dynlsm::FitResult) {
    let sim = simulate_binary(12, 4, 2, 0.1, 0.5, 1.0, 21).unwrap();
    let (train, _) = mask_edges(&sim.series, 0.2, 22).unwrap();
    let cfg = ModelConfig {
        family,
        max_iters: 5,
        ..Default::default()
    };
    let res = fit(&train, &cfg).unwrap();
    (train, cfg, res)
}

#[test]
fn series_round_trip_is_exact() {
    let dir = tempdir().unwrap();
    let sim = simulate_gaussian(9, 3, 2, 0.4, 0.1, 0.1, 3).unwrap();
    let (train, _) = mask_edges(&sim.series, 0.3, 4).unwrap();
    let path = dir.path().join("series.csv");
    write_series(&path, &train, Some(3)).unwrap();
    let (back, header) = read_series(&path, false).unwrap();
    assert_eq!(back, train);
    assert_eq!(header.seed, Some(3));
    assert_eq!(header.noise_sd, Some(0.1));
}

#[test]
fn dense_bernoulli_round_trip() {
    let dir = tempdir().unwrap();
    let sim = simulate_binary(9, 3, 2, 0.1, 0.0, -1.0, 5).unwrap();
    let path = dir.path().join("series.csv");
    write_series(&path, &sim.series, None).unwrap();
    let (back, _) = read_series(&path, false).unwrap();
    assert_eq!(back, sim.series);
}

#[test]
fn archive_save_load_save_is_byte_identical() {
    for family in [Family::Smf, Family::Mf] {
        let dir = tempdir().unwrap();
        let (train, cfg, res) = small_fit(family);
        let archive = FitArchive::from_fit(&res, &cfg, &train, true);
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        save_archive(&a, &archive).unwrap();
        let loaded = load_archive(&a).unwrap();
        assert_eq!(loaded, archive);
        save_archive(&b, &loaded).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(loaded.state().unwrap(), res.state);
    }
}

#[test]
fn predictions_from_loaded_archive_are_bitwise_equal() {
    let dir = tempdir().unwrap();
    let (train, cfg, res) = small_fit(Family::Smf);
    let path = dir.path().join("fit.json");
    save_archive(&path, &FitArchive::from_fit(&res, &cfg, &train, false)).unwrap();
    let state = load_archive(&path).unwrap().state().unwrap();
    let pairs: Vec<_> = (0..4)
        .flat_map(|t| (1..12).map(move |j| (t, 0, j)))
        .collect();
    let want = predict_edges(&res.state, train.kind(), &pairs).unwrap();
    let got = predict_edges(&state, train.kind(), &pairs).unwrap();
    assert_eq!(
        want.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        got.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn damaged_archives_are_schema_errors() {
    let (train, cfg, res) = small_fit(Family::Smf);
    let archive = FitArchive::from_fit(&res, &cfg, &train, false);
    let bytes = to_canonical_json(&archive).unwrap();
    let truncated = &bytes[..bytes.len() / 2];
    assert!(matches!(
        parse_archive(truncated, "fit.json"),
        Err(Error::Schema(_))
    ));

    let mut wrong = archive.clone();
    wrong.version = "dynlsm-fit-v0".into();
    let msg = parse_archive(&to_canonical_json(&wrong).unwrap(), "fit.json")
        .unwrap_err()
        .to_string();
    assert!(msg.contains("version"), "{msg}");

    let mut short = archive.clone();
    short.moments.means.pop();
    assert!(parse_archive(&to_canonical_json(&short).unwrap(), "fit.json").is_err());

    let mut nan = archive;
    nan.beta.mean = f64::NAN;
    let dir = tempdir().unwrap();
    assert!(save_archive(&dir.path().join("x.json"), &nan).is_err());
}

#[test]
fn edge_tables_and_trajectories_round_trip() {
    let dir = tempdir().unwrap();
    let rows = vec![
        EdgeRow {
            t: 0,
            i: 0,
            j: 3,
            value: 0.25,
        },
        EdgeRow {
            t: 2,
            i: 1,
            j: 2,
            value: -1.0e-7,
        },
    ];
    let path = dir.path().join("scores.csv");
    write_edge_table(&path, "score", &rows, Some("seed=1")).unwrap();
    assert_eq!(read_edge_table(&path, true).unwrap(), rows);

    let sim = simulate_gaussian(5, 3, 2, 0.4, 0.1, 0.1, 8).unwrap();
    let tpath = dir.path().join("traj.csv");
    write_trajectory(&tpath, &sim.truth, Some("seed=8")).unwrap();
    assert_eq!(read_trajectory(&tpath).unwrap(), sim.truth);
}

#[test]
fn empty_and_malformed_tables_are_rejected() {
    let dir = tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "t,i,j,score\n").unwrap();
    assert!(read_edge_table(&empty, true).is_err());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,i,j,score\n1,2,3,abc\n").unwrap();
    match read_edge_table(&bad, true) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    let missing = dir.path().join("missing.csv");
    assert!(read_series(&missing, false).is_err());
}

#[test]
fn archive_config_survives_round_trip() {
    let (train, mut cfg, res) = small_fit(Family::Smf);
    cfg.scales = ScaleMode::Fixed {
        sigma0: 0.5,
        tau: 0.01,
    };
    cfg.stop_tol = Some(0.02);
    let archive = FitArchive::from_fit(&res, &cfg, &train, false);
    let back = parse_archive(&to_canonical_json(&archive).unwrap(), "a").unwrap();
    assert_eq!(back.config, cfg);
}
