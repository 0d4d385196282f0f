//! Subcommand implementations. Each reads its inputs from a validated
//! [`RunConfig`] and writes its outputs into the `out` directory.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use lowrisk::calibrate::{build_grid, calibrate, CalibrationMethod, CalibrationOptions};
use lowrisk::conformal::{fdr_screen, tune_gamma, ConformalConfig, TuneCriterion, TuneOptions};
use lowrisk::io::{
    read_covariates_file, read_curves_file, read_dataset_file, write_curves_file, write_dataset_file,
};
use lowrisk::ipcw::weights_for;
use lowrisk::models::{fit_censoring, fit_cox};
use lowrisk::report::{emit_report, read_metrics_csv, summarize, write_metrics_csv};
use lowrisk::seed::derive_seed;
use lowrisk::simulate::{replicate_datasets, run_protocol, GammaChoice, Method, Population, ReplicateConfig};
use lowrisk::{
    CensoredDataset, ConditionalSurvival, CoxModel, CoxOptions, Flavor, RiskProfile, SurvivalCurveSet, TimeGrid,
    WeibullPopulation,
};
use serde_json::json;

use crate::config::{Command, ConfigError, RunConfig};

pub const EFFECTIVE_CONFIG: &str = "effective.cfg";

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(lowrisk::Error),
    Io(std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for bad input data, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 4,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<lowrisk::Error> for CliError {
    fn from(e: lowrisk::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Runs the configured command. The effective configuration is written first.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let out = cfg.path("out");
    fs::create_dir_all(&out)?;
    fs::write(out.join(EFFECTIVE_CONFIG), cfg.to_text())?;
    match cfg.command {
        Command::Fit => fit(cfg, &out),
        Command::Calibrate => calibrate_cmd(cfg, &out),
        Command::Screen => screen(cfg, &out),
        Command::TuneGamma => tune(cfg, &out),
        Command::Simulate => simulate(cfg, &out),
        Command::Report => report(cfg, &out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_model(w: &mut impl Write, name: &str, m: &CoxModel) -> Result<()> {
    for (j, b) in m.coefficients.iter().enumerate() {
        writeln!(w, "{name},beta_x{},{b}", j + 1)?;
    }
    let d = &m.diagnostics;
    writeln!(w, "{name},log_partial_likelihood,{}", d.log_partial_likelihood)?;
    writeln!(w, "{name},iterations,{}", d.iterations)?;
    writeln!(w, "{name},gradient_norm,{}", d.gradient_norm)?;
    for c in &d.degenerate_columns {
        writeln!(w, "{name},degenerate_x{},1", c + 1)?;
    }
    Ok(())
}

fn fit(cfg: &RunConfig, out: &Path) -> Result<()> {
    let data_path = cfg.path("data");
    let train = read_dataset_file(&data_path)?;
    let opts = CoxOptions {
        max_iter: cfg.usize("max_iter"),
        ..CoxOptions::default()
    };
    let s_model = fit_cox(&train, opts)?;
    let g_model = fit_censoring(&train, opts)?;

    let mut w = create(&out.join("model.csv"))?;
    writeln!(w, "model,term,value")?;
    write_model(&mut w, "survival", &s_model)?;
    write_model(&mut w, "censoring", &g_model)?;
    w.flush()?;

    let end = cfg
        .auto_f64("grid_end")
        .unwrap_or_else(|| train.iter().map(|r| r.observed_time).fold(0.0, f64::max));
    let grid = TimeGrid::uniform(end, cfg.usize("grid_points"))?;
    let mut targets = cfg.str_list("predict");
    if targets.is_empty() {
        targets.push(data_path.to_string_lossy().into_owned());
    }
    for target in targets {
        let path = Path::new(&target);
        let (ids, rows) = read_covariates_file(path)?;
        let name = stem(path);
        let s = SurvivalCurveSet::tabulate(&s_model.curves(&rows)?, ids.clone(), grid.clone())?;
        let g = SurvivalCurveSet::tabulate(&g_model.curves(&rows)?, ids, grid.clone())?;
        write_curves_file(&s, &out.join(format!("{name}_s_curves.csv")))?;
        write_curves_file(&g, &out.join(format!("{name}_g_curves.csv")))?;
    }
    Ok(())
}

fn calibration_inputs(cfg: &RunConfig) -> Result<(CensoredDataset, SurvivalCurveSet, SurvivalCurveSet)> {
    let cal = read_dataset_file(&cfg.path("cal"))?;
    let ids: Vec<String> = cal.iter().map(|r| r.id.clone()).collect();
    let s = read_curves_file(&cfg.path("s_curves"))?.aligned_to(&ids)?;
    let g = read_curves_file(&cfg.path("g_curves"))?.aligned_to(&ids)?;
    Ok((cal, s, g))
}

fn check_horizon(curves: &SurvivalCurveSet, t0: f64) -> Result<()> {
    let end = curves.grid().last();
    if t0 > end {
        return Err(lowrisk::Error::CurveRange { time: t0, grid_end: end }.into());
    }
    Ok(())
}

fn calibrate_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (cal, s, g) = calibration_inputs(cfg)?;
    let t0 = cfg.f64("t0");
    check_horizon(&s, t0)?;
    check_horizon(&g, t0)?;
    let flavor: Flavor = cfg.str("flavor").parse()?;
    let method: CalibrationMethod = cfg.str("method").parse()?;
    let scores: Vec<f64> = (0..s.len()).map(|i| s.survival(i, t0)).collect();
    let weights = weights_for(flavor, &cal, &g, t0, cfg.f64("winsor_pct"))?;
    let profile = RiskProfile::new(&cal, &scores, &weights, t0)?;
    let grid = build_grid(&scores, cfg.usize("grid_size"))?;
    let opts = CalibrationOptions {
        n_min: cfg.usize("n_min"),
        multiplier_draws: cfg.usize("multiplier_draws"),
        seed: derive_seed(cfg.u64("seed"), "calibrate", 0),
        ..CalibrationOptions::new(cfg.f64("alpha"), cfg.f64("delta"))
    };
    let result = calibrate(method, &profile, &weights, &grid, &opts)?;

    let mut w = create(&out.join("calibration.csv"))?;
    writeln!(w, "lambda,n_selected,mu_hat,r_hat,ucb,fallback,path")?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for e in &result.table {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.lambda,
            e.n_selected,
            e.mu_hat,
            opt(e.r_hat),
            opt(e.ucb),
            u8::from(e.fallback),
            e.path
        )?;
    }
    w.flush()?;

    let rule = result.rule(t0);
    let selected = scores.iter().filter(|&&x| rule.selects(x)).count();
    write_json(
        &out.join("summary.json"),
        &json!({
            "method": method.name(),
            "flavor": flavor.to_string(),
            "alpha": result.alpha,
            "delta": result.delta,
            "t0": t0,
            "n": cal.len(),
            "lambda_hat": result.lambda_hat,
            "abstained": result.abstained(),
            "n_selected": selected,
            "band_halfwidth": result.band_halfwidth.and_then(finite),
            "ltt_stops": result.ltt_stops,
            "weight_cap": finite(weights.cap),
        }),
    )
}

fn tune_options(cfg: &RunConfig, candidates: Option<Vec<f64>>) -> Result<TuneOptions> {
    let criterion: TuneCriterion = cfg.str("criterion").parse()?;
    let mut opts = TuneOptions {
        candidates,
        reps: cfg.usize("tune_reps"),
        criterion,
        winsor_pct: cfg.f64("winsor_pct"),
        seed: derive_seed(cfg.u64("seed"), "tune", 0),
        ..TuneOptions::default()
    };
    if cfg.command == Command::TuneGamma {
        let f = cfg.f64_list("fractions");
        opts.fractions = (f[0], f[1], f[2]);
    }
    Ok(opts)
}

fn screen(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (cal, s, g) = calibration_inputs(cfg)?;
    let test = read_curves_file(&cfg.path("test_curves"))?;
    let t0 = cfg.f64("t0");
    let alpha = cfg.f64("alpha");
    let gamma = match cfg.auto_f64("gamma") {
        Some(v) => v,
        None => {
            let tune_path = cfg.str_list("tune_data").remove(0);
            let data = read_dataset_file(Path::new(&tune_path))?;
            tune_gamma(&data, t0, alpha, &tune_options(cfg, None)?, None)?.gamma
        }
    };
    let conf = ConformalConfig {
        gamma,
        nu: cfg.f64("nu"),
        bootstrap_b: cfg.usize("bootstrap_b"),
        winsor_pct: cfg.f64("winsor_pct"),
        seed: derive_seed(cfg.u64("seed"), "conformal", 0),
        extrapolate: cfg.bool("extrapolate"),
        ..ConformalConfig::new(alpha)
    };
    let res = fdr_screen(&s, &g, &cal, &test, t0, &conf)?;

    let mut selected = vec![false; test.len()];
    for &j in &res.rejected {
        selected[j] = true;
    }
    let mut w = create(&out.join("screen.csv"))?;
    writeln!(w, "id,score,p_value,selected")?;
    for (j, id) in test.ids().iter().enumerate() {
        writeln!(w, "{id},{},{},{}", res.risk_scores[j], res.p_values[j], u8::from(selected[j]))?;
    }
    w.flush()?;

    let mut w = create(&out.join("summary.jsonl"))?;
    let line = json!({
        "alpha": alpha,
        "gamma": gamma,
        "t0": t0,
        "n_cal": cal.len(),
        "n_test": test.len(),
        "q_hat": res.q_hat,
        "implied_lambda": res.implied_lambda,
        "p_positive": res.p_positive_est,
        "abstained": res.abstained,
        "n_selected": res.r(),
        "n_selected_before_abstention": res.bh_rejected.len(),
        "clipped_p_values": res.clipped,
    });
    writeln!(w, "{line}")?;
    w.flush()?;
    Ok(())
}

fn tune(cfg: &RunConfig, out: &Path) -> Result<()> {
    let data = read_dataset_file(&cfg.path("data"))?;
    let listed = cfg.f64_list("candidates");
    let candidates = (!listed.is_empty()).then_some(listed);
    let res = tune_gamma(&data, cfg.f64("t0"), cfg.f64("alpha"), &tune_options(cfg, candidates)?, None)?;
    let mut w = create(&out.join("gamma.csv"))?;
    writeln!(w, "gamma,mean_criterion")?;
    for (gm, c) in res.candidates.iter().zip(&res.mean_criterion) {
        writeln!(w, "{gm},{c}")?;
    }
    w.flush()?;
    write_json(
        &out.join("summary.json"),
        &json!({ "gamma": res.gamma, "criterion": cfg.str("criterion"), "reps": cfg.usize("tune_reps") }),
    )
}

fn population(cfg: &RunConfig) -> Result<Population> {
    if cfg.str("population") == "weibull" {
        return Ok(Population::Weibull(WeibullPopulation::reference()));
    }
    let s = read_curves_file(Path::new(&cfg.str_list("pop_s_curves")[0]))?;
    let g = read_curves_file(Path::new(&cfg.str_list("pop_g_curves")[0]))?.aligned_to(s.ids())?;
    let (ids, rows) = read_covariates_file(Path::new(&cfg.str_list("pop_covariates")[0]))?;
    let by_id: std::collections::HashMap<&str, &Vec<f64>> = ids.iter().map(String::as_str).zip(&rows).collect();
    let covariates = s
        .ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|r| (*r).clone())
                .ok_or_else(|| lowrisk::Error::Alignment(format!("no covariates for subject '{id}'")))
        })
        .collect::<lowrisk::Result<Vec<_>>>()?;
    Ok(Population::Curves { s, g, covariates })
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let methods = match cfg.str("methods") {
        "all" => Method::ALL.to_vec(),
        _ => cfg
            .str_list("methods")
            .iter()
            .map(|m| m.parse())
            .collect::<lowrisk::Result<Vec<Method>>>()?,
    };
    let config = ReplicateConfig {
        n_train: cfg.usize("n_train"),
        n_cal: cfg.usize("n_cal"),
        n_test: cfg.usize("n_test"),
        t0_list: cfg.f64_list("horizons"),
        methods,
        master_seed: cfg.u64("seed"),
        replicates: cfg.usize("replicates"),
        flavor: cfg.str("flavor").parse()?,
        grid_size: cfg.usize("grid_size"),
        n_min: cfg.usize("n_min"),
        winsor_pct: cfg.f64("winsor_pct"),
        multiplier_draws: cfg.usize("multiplier_draws"),
        nu: cfg.f64("nu"),
        abstention_b: cfg.usize("bootstrap_b"),
        gamma: cfg.auto_f64("sim_gamma").map_or(GammaChoice::Tuned, GammaChoice::Fixed),
        tune_reps: cfg.usize("tune_reps"),
        ..ReplicateConfig::new(cfg.f64("alpha"), cfg.f64("delta"))
    };
    let pop = population(cfg)?;
    let output = run_protocol(&config, &pop)?;

    write_metrics_csv(&output.rows, create(&out.join("metrics.csv"))?)?;
    emit_report(&summarize(&output.rows), create(&out.join("summary.csv"))?)?;
    let mut w = create(&out.join("failures.csv"))?;
    writeln!(w, "replicate,message")?;
    for (r, msg) in &output.failures {
        writeln!(w, "{r},\"{}\"", msg.replace('"', "'"))?;
    }
    w.flush()?;

    if cfg.bool("write_datasets") {
        let dir = out.join("datasets");
        fs::create_dir_all(&dir)?;
        for r in 0..config.replicates {
            let (train, cal, test) = replicate_datasets(&config, &pop, r)?;
            for (name, d) in [("train", &train), ("cal", &cal), ("test", &test)] {
                write_dataset_file(d, &dir.join(format!("rep{r:04}_{name}.csv")))?;
            }
        }
    }
    Ok(())
}

fn report(cfg: &RunConfig, out: &Path) -> Result<()> {
    let rows = read_metrics_csv(File::open(cfg.path("metrics"))?)?;
    emit_report(&summarize(&rows), create(&out.join("summary.csv"))?)?;
    Ok(())
}
