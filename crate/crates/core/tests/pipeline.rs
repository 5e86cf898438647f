use ewens_hoeffding::io;
use ewens_hoeffding::montecarlo::{self, B1Mode, MatrixSource, SimulationConfig};
use ewens_hoeffding::oracle;
use ewens_hoeffding::rng::substream;
use ewens_hoeffding::{EwensParams, SamplerKind, TestMatrixGenerator};
use proptest::prelude::*;

fn file_config(path: std::path::PathBuf, n: usize, theta: f64, count: usize) -> SimulationConfig {
    SimulationConfig {
        params: EwensParams::new(n, theta).unwrap(),
        matrix_source: MatrixSource::File(path),
        sample_count: count,
        seed: 4,
        worker_count: 3,
        sampler: SamplerKind::AcceptReject,
        s_grid: None,
        t_grid: None,
        b1_mode: B1Mode::NegativeCorrelation,
        comparison_curve: false,
        comparison_c: None,
        iteration_cap: 1_000_000,
    }
}

#[test]
fn matrix_file_round_trip_feeds_simulation_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let a = TestMatrixGenerator::new(7)
        .generate(0.5, &mut substream(12, 0))
        .unwrap();
    io::save_matrix_csv(&path, a.matrix()).unwrap();
    io::write_json(&io::sidecar_path(&path), &io::MatrixSidecar::for_matrix(&a)).unwrap();

    let config = file_config(path.clone(), 7, 0.5, 20_000);
    let run = montecarlo::run_simulation_detailed(&config).unwrap();
    assert_eq!(run.matrix.matrix.matrix(), a.matrix());
    assert_eq!(run.matrix.matrix.m_max(), a.m_max());

    let exact = oracle::build_joint(&a).unwrap().exact_summary();
    let s = &run.summary;
    assert!((s.sigma2_hat - exact.sigma2).abs() < 4.0 * s.sigma2_se);
    assert!(s.passed());

    let sidecar =
        io::parse_sidecar(&std::fs::read_to_string(io::sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar.n, 7);
    assert_eq!(sidecar.m_max, a.m_max());
}

#[test]
fn wrong_size_matrix_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    std::fs::write(&path, "1,0\n0,1\n").unwrap();
    assert!(montecarlo::run_simulation(&file_config(path, 5, 1.0, 100)).is_err());
}

#[test]
fn tail_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let a = TestMatrixGenerator::new(12)
        .generate(1.0, &mut substream(2, 0))
        .unwrap();
    io::save_matrix_csv(&path, a.matrix()).unwrap();
    let mut config = file_config(path, 12, 1.0, 2000);
    config.sampler = SamplerKind::Crp;
    config.t_grid = Some(vec![0.0, 1.0, 5.0, 20.0, 200.0]);
    let summary = montecarlo::run_simulation(&config).unwrap();
    let tail_path = dir.path().join("tail.csv");
    io::save_tail_csv(&tail_path, &summary).unwrap();
    let text = std::fs::read_to_string(tail_path).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(
        rows[0],
        [
            "t",
            "empirical",
            "bound1",
            "bound2",
            "bound3_line1",
            "bound3_line2"
        ]
    );
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.len() == 6));
    assert_eq!(rows[1][4], "NA");
    let b3_defined = summary.bound_curves.as_ref().unwrap().bound3_line1[4].is_some();
    assert_eq!(rows[5][4] != "NA", b3_defined);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn summary_invariants(n in 3usize..25, theta in 0.3f64..3.0, seed in any::<u64>(), workers in 1usize..4) {
        let a = TestMatrixGenerator::new(n).generate(theta, &mut substream(seed, 0)).unwrap();
        let samples = montecarlo::simulate(&a, SamplerKind::Crp, 300, seed, workers, 1).unwrap();
        prop_assert_eq!(montecarlo::t_bound_check(&samples.t, n, theta, a.m_max()), 0);
        let bound = n as f64 * a.m_max();
        prop_assert!(samples.y.iter().all(|y| y.abs() <= bound * (1.0 + 1e-12)));

        let grid: Vec<f64> = (0..30).map(|k| k as f64 * bound / 29.0).collect();
        let tail = montecarlo::empirical_tail(&samples.y, &grid);
        prop_assert!(tail.windows(2).all(|w| w[1].fraction <= w[0].fraction));
        prop_assert!(tail.iter().all(|p| (0.0..=1.0).contains(&p.fraction)));

        let again = montecarlo::simulate(&a, SamplerKind::Crp, 300, seed, workers, 1).unwrap();
        prop_assert_eq!(samples, again);
    }
}
