use hdgc_core::montecarlo::{run_size_experiment, summarize, verify_null_pair, McConfig, McMethod};
use hdgc_core::var::{make_dgp, DgpKind, DgpSpec};

fn dgp1(d: usize) -> DgpSpec {
    DgpSpec::new(DgpKind::Tridiagonal, d, 0)
}

#[test]
fn oracle_control_holds_every_level() {
    let reps = 4000;
    let cfg = McConfig::new(dgp1(20), 400, vec![1, 6, 12], vec![McMethod::Oracle], reps, 99);
    let result = run_size_experiment(&cfg).unwrap();
    for cell in &result.cells {
        assert_eq!(cell.valid, reps);
        for level in [0.01, 0.05, 0.10] {
            let rate = cell.rate_at(level);
            let sigma = (level * (1.0 - level) / reps as f64).sqrt();
            assert!(
                (rate - level).abs() <= 3.0 * sigma,
                "h={} level {level}: rate {rate}",
                cell.h
            );
        }
    }
}

#[test]
fn size_does_not_worsen_with_sample_size() {
    let run = |n| {
        let cfg = McConfig::new(dgp1(20), n, vec![4], vec!["de2s-hc".parse().unwrap()], 200, 17);
        run_size_experiment(&cfg).unwrap().cells.remove(0)
    };
    let (small, large) = (run(200), run(1600));
    let slack = 2.0 * small.stderr.max(large.stderr);
    assert!(
        large.rate <= small.rate + slack,
        "n=200: {} ± {}, n=1600: {} ± {}",
        small.rate,
        small.stderr,
        large.rate,
        large.stderr
    );
    assert!((large.rate - 0.05).abs() < 0.05);
}

#[test]
fn null_pair_of_banded_dgps() {
    for kind in [DgpKind::Tridiagonal, DgpKind::BlockDiagonal] {
        let model = make_dgp(&DgpSpec::new(kind, 20, 3)).unwrap();
        let largest = verify_null_pair(&model, 0, 19, &[1, 2, 4, 8, 12], 1e-6).unwrap();
        assert!(largest <= 1e-6, "{kind:?}: {largest}");
    }
    let model = make_dgp(&dgp1(20)).unwrap();
    assert!(verify_null_pair(&model, 0, 1, &[1], 1e-6).is_err());
}

#[test]
fn results_are_deterministic_across_workers() {
    let methods = ["de2s-hc", "de-ls-hac", "oracle"]
        .iter()
        .map(|m| m.parse().unwrap())
        .collect();
    let mut cfg = McConfig::new(dgp1(10), 200, vec![1, 3], methods, 12, 5);
    cfg.null_tolerance = 1e-3;
    let texts: Vec<String> = [1, 2, 4, 0]
        .into_iter()
        .map(|workers| {
            cfg.workers = workers;
            let result = run_size_experiment(&cfg).unwrap();
            format!(
                "{}{}",
                summarize(std::slice::from_ref(&result)).unwrap(),
                serde_json::to_string(&result).unwrap()
            )
        })
        .collect();
    assert!(texts.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = McConfig::new(dgp1(10), 200, vec![1], vec![McMethod::Oracle], 10, 1);
    cfg.null_tolerance = 1e-3;
    assert!(run_size_experiment(&cfg).is_ok());
    for broken in [
        McConfig { reps: 0, ..cfg.clone() },
        McConfig {
            nominal_level: 1.0,
            ..cfg.clone()
        },
        McConfig {
            horizons: vec![],
            ..cfg.clone()
        },
        McConfig {
            dgp: dgp1(1),
            ..cfg.clone()
        },
        McConfig {
            effect: Some(10),
            ..cfg.clone()
        },
    ] {
        assert!(run_size_experiment(&broken).is_err());
    }
}
