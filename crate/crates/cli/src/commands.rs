use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use hdgc_core::covariance::CovarianceSet;
use hdgc_core::inference::VarianceChoice;
use hdgc_core::montecarlo::{run_size_experiment, summarize, McConfig, McMethod};
use hdgc_core::network::{export_heatmap, run_network};
use hdgc_core::pipeline::{fit_stable, FittedSystem, TestConfig, TestMethod, ThresholdConfig, HARD_THRESHOLD};
use hdgc_core::regularized::{threshold_fit, InfoCriterion, Lambda, PenaltyConfig, PenaltyMethod};
use hdgc_core::var::{make_dgp, simulate, DgpKind, DgpSpec, DEFAULT_BURN_IN};
use hdgc_core::{TimeSeriesPanel, VarModel};

use crate::config::{Command, FitArgs, Horizons, McArgs, NetworkArgs, PenaltyArgs, SimulateArgs, TestArgs};
use crate::CliError;

type Out = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn penalty_config(args: &PenaltyArgs) -> Result<PenaltyConfig, CliError> {
    let mut cfg = PenaltyConfig::default();
    if let Some(m) = &args.penalty {
        cfg.method = match m.as_str() {
            "lasso" => PenaltyMethod::Lasso,
            "adalasso" => PenaltyMethod::AdaptiveLasso,
            "elnet" => PenaltyMethod::ElasticNet,
            other => return Err(usage(format!("unknown penalty `{other}`"))),
        };
    }
    if let Some(l) = &args.lambda {
        cfg.lambda = if l.eq_ignore_ascii_case("auto") {
            Lambda::Auto
        } else {
            Lambda::Fixed(l.parse().map_err(|_| usage(format!("invalid lambda `{l}`")))?)
        };
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(t) = args.tau {
        cfg.tau = t;
    }
    if let Some(ic) = &args.ic {
        cfg.ic = match ic.as_str() {
            "bic" => InfoCriterion::Bic,
            "aic" => InfoCriterion::Aic,
            other => return Err(usage(format!("unknown information criterion `{other}`"))),
        };
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn threshold(args: &PenaltyArgs) -> Result<Option<ThresholdConfig>, CliError> {
    match args.thr {
        Some(t) if t.is_nan() || t < 0.0 => Err(usage(format!("--thr must be >= 0, got {t}"))),
        Some(t) => Ok(Some(ThresholdConfig {
            lambda: t,
            nu: HARD_THRESHOLD,
        })),
        None => Ok(None),
    }
}

fn test_method(method: &Option<String>, variance: &Option<String>) -> Result<TestMethod, CliError> {
    let base: TestMethod = method
        .as_deref()
        .unwrap_or("de2s-hc")
        .parse()
        .map_err(|e: hdgc_core::Error| usage(e.to_string()))?;
    match variance {
        Some(v) => {
            let v: VarianceChoice = v.parse().map_err(|e: hdgc_core::Error| usage(e.to_string()))?;
            TestMethod::new(base.method, v).map_err(|e| usage(e.to_string()))
        }
        None => Ok(base),
    }
}

fn horizons(h: &Option<Horizons>) -> Vec<usize> {
    h.as_ref().map(|h| h.0.clone()).unwrap_or_else(|| vec![1])
}

fn series(panel: &TimeSeriesPanel, name: &str) -> Result<usize, CliError> {
    panel.index_of(name).ok_or_else(|| {
        usage(format!(
            "unknown series `{name}`; available: {}",
            panel.names().join(", ")
        ))
    })
}

fn read_panel(path: &Path) -> Result<TimeSeriesPanel, CliError> {
    TimeSeriesPanel::from_csv_path(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Domain(format!("cannot start worker pool: {e}")))
}

fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Out {
    let mut w = csv::Writer::from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Out {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

pub fn dispatch(command: &Command) -> Out {
    match command {
        Command::Simulate(a) => run_simulate(a),
        Command::Fit(a) => run_fit(a),
        Command::Test(a) => run_test(a),
        Command::Mc(a) => run_mc(a),
        Command::Network(a) => run_network_cmd(a),
    }
}

fn dgp_kind(index: Option<u8>) -> Result<DgpKind, CliError> {
    let i = index.unwrap_or(1);
    DgpKind::from_index(i).ok_or_else(|| usage(format!("unknown design {i}; expected 1, 2 or 3")))
}

fn run_simulate(a: &SimulateArgs) -> Out {
    let model = match &a.model {
        Some(path) => VarModel::from_json(&fs::read_to_string(path)?)?,
        None => make_dgp(&DgpSpec::new(
            dgp_kind(a.dgp)?,
            a.d.unwrap_or(20),
            a.dgp_seed.unwrap_or(0),
        ))?,
    };
    let n = a.n.unwrap_or(200);
    let panel = simulate(&model, n, a.burn_in.unwrap_or(DEFAULT_BURN_IN), a.seed.unwrap_or(0))?;
    if let Some(path) = &a.save_model {
        fs::write(path, model.to_json()? + "\n")?;
    }
    match &a.out {
        Some(path) => panel.write_csv(fs::File::create(path)?)?,
        None => panel.write_csv(std::io::stdout().lock())?,
    }
    log::info!("simulated {n} observations of {} series", model.d());
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    names: Vec<String>,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    sigma_u: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    nonzero: usize,
    spectral_radius: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn run_fit(a: &FitArgs) -> Out {
    let panel = read_panel(required(&a.input, "input")?)?.demeaned();
    let p = a.p.unwrap_or(4);
    let penalty = penalty_config(&a.penalty)?;
    let (mut fit, mut cov) = fit_stable(&panel, p, &penalty, 1)?;
    if let Some(thr) = threshold(&a.penalty)? {
        fit = threshold_fit(&fit, &panel, thr.lambda, thr.nu)?;
        cov = CovarianceSet::from_fit(&fit, 1)?;
    }
    let model = fit.model_hat()?;
    if let Some(dir) = &a.dump_cov {
        fs::create_dir_all(dir)?;
        write_matrix_csv(&dir.join("sigma_u.csv"), &cov.sigma_u_hat)?;
        write_matrix_csv(&dir.join("sigma_w.csv"), &cov.sigma_w)?;
        write_matrix_csv(&dir.join("sigma_uw.csv"), &cov.sigma_uw)?;
    }
    if let Some(path) = &a.out {
        fs::write(path, model.to_json()? + "\n")?;
    }
    print_json(&FitSummary {
        names: panel.names().to_vec(),
        p,
        a: fit.slopes.iter().map(rows).collect(),
        sigma_u: rows(model.sigma_u()),
        lambda: fit.lambda_used.clone(),
        nonzero: fit.nonzero_count,
        spectral_radius: model.companion().spectral_radius()?,
    })
}

fn test_config(p: Option<usize>, penalty: &PenaltyArgs, bandwidth: Option<usize>) -> Result<TestConfig, CliError> {
    Ok(TestConfig {
        p: p.unwrap_or(4),
        penalty: penalty_config(penalty)?,
        threshold: threshold(penalty)?,
        bandwidth,
    })
}

fn run_test(a: &TestArgs) -> Out {
    let panel = read_panel(required(&a.input, "input")?)?;
    let cause = series(&panel, required(&a.cause, "cause")?)?;
    let effect = series(&panel, required(&a.effect, "effect")?)?;
    let method = test_method(&a.method, &a.variance)?;
    let cfg = test_config(a.p, &a.penalty, a.bandwidth)?;
    let hs = horizons(&a.horizons);
    let h_max = hs.iter().copied().max().unwrap_or(1);
    let system = FittedSystem::new(&panel, &cfg, h_max)?;
    let mut lines = String::new();
    for &h in &hs {
        let record = system.record(cause, effect, h, method)?;
        lines.push_str(&serde_json::to_string(&record)?);
        lines.push('\n');
    }
    print!("{lines}");
    if let Some(path) = &a.out {
        fs::write(path, &lines)?;
    }
    Ok(())
}

fn mc_series(name: &str, d: usize) -> Result<usize, CliError> {
    name.strip_prefix('w')
        .and_then(|i| i.parse::<usize>().ok())
        .filter(|&i| (1..=d).contains(&i))
        .map(|i| i - 1)
        .ok_or_else(|| usage(format!("unknown series `{name}`; simulated series are w1..w{d}")))
}

fn run_mc(a: &McArgs) -> Out {
    let d = a.d.unwrap_or(20);
    let dgp = DgpSpec::new(dgp_kind(a.dgp)?, d, a.dgp_seed.unwrap_or(0));
    let methods = match &a.methods {
        Some(list) => list
            .0
            .iter()
            .map(|m| m.parse::<McMethod>().map_err(|e| usage(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![McMethod::Test("de2s-hc".parse()?), McMethod::Test("de-ls-hac".parse()?)],
    };
    let mut cfg = McConfig::new(
        dgp,
        a.n.unwrap_or(200),
        horizons(&a.horizons),
        methods,
        a.reps.unwrap_or(100),
        a.seed.unwrap_or(0),
    );
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(level) = a.level {
        cfg.nominal_level = level;
    }
    if let Some(tol) = a.null_tol {
        cfg.null_tolerance = tol;
    }
    cfg.workers = a.workers.unwrap_or(0);
    cfg.cause = a.cause.as_deref().map(|c| mc_series(c, d)).transpose()?;
    cfg.effect = a.effect.as_deref().map(|e| mc_series(e, d)).transpose()?;
    cfg.penalty = penalty_config(&a.penalty)?;
    cfg.bandwidth = a.bandwidth;
    if a.penalty.thr.is_some() {
        return Err(usage("--thr is not available for mc"));
    }
    let result = run_size_experiment(&cfg)?;
    let table = summarize(std::slice::from_ref(&result))?;
    match &a.out {
        Some(path) => fs::write(path, &table)?,
        None => print!("{table}"),
    }
    if let Some(path) = &a.raw {
        fs::write(path, serde_json::to_string_pretty(&result)? + "\n")?;
    }
    Ok(())
}

fn run_network_cmd(a: &NetworkArgs) -> Out {
    let panel = read_panel(required(&a.input, "input")?)?;
    let out_dir: &PathBuf = required(&a.out_dir, "out-dir")?;
    let method = test_method(&a.method, &a.variance)?;
    let cfg = test_config(a.p, &a.penalty, a.bandwidth)?;
    let hs = horizons(&a.horizons);
    let workers = a.workers.unwrap_or(0);
    let net = if workers > 0 {
        pool(workers)?.install(|| run_network(&panel, &hs, method, &cfg))?
    } else {
        run_network(&panel, &hs, method, &cfg)?
    };
    let missing = net.cells.iter().filter(|c| c.pvalue.is_none()).count();
    if missing > 0 {
        log::warn!("{missing} of {} cells could not be tested", net.cells.len());
    }
    for path in export_heatmap(&net, out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}
