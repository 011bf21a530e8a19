//! Subcommand bodies. Each returns a RunOutput holding the JSON summary,
//! any CSV tables, and an optional failure that drives the exit code after
//! the artifacts are written.

use serde_json::{json, Value};

use longvol::{
    asymptotic_gamma, c_factor, classify_memory, covariance_surface, default_balance_tol,
    discrete_memory, discrete_stationarity, empirical_autocov, empirical_moments, gamma,
    resolvent, returns_efficiency, simulate, simulate_discrete, solve_second_moment,
    stationarity_margin, Balance, IntegralVerdict, MemoryClass, ModelConfig, MomentSolution,
    NonStationaryReason, PathEnsemble, Stationarity, DEFAULT_STEP,
};

use crate::config::FileConfig;
use crate::emit::{num, Csv, RunOutput};
use crate::error::{CliError, ErrorKind};

#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

/// Fold the command-line flags into the parsed file config, so the manifest
/// snapshot records what actually ran.
pub fn apply_overrides(file: &mut FileConfig, ov: &Overrides) {
    if let Some(seed) = ov.seed {
        file.sim.seed = seed;
        if let Some(d) = file.discrete.as_mut() {
            d.seed = seed;
        }
    }
    if let Some(paths) = ov.paths {
        file.sim.paths = paths;
        if let Some(d) = file.discrete.as_mut() {
            d.paths = paths;
        }
    }
    if let Some(step) = ov.step {
        file.sim.step = step;
        file.solve.step = step;
    }
    if let Some(t) = ov.horizon {
        file.sim.t_end = t;
        file.solve.horizon = t;
    }
}

fn memory_str(m: MemoryClass) -> &'static str {
    match m {
        MemoryClass::Short => "short",
        MemoryClass::Long => "long",
        MemoryClass::Undetermined => "undetermined",
    }
}

fn reason_str(r: NonStationaryReason) -> &'static str {
    match r {
        NonStationaryReason::KernelNotL2 => "KernelNotL2",
        NonStationaryReason::MarginAtLeastOne { .. } => "MarginAtLeastOne",
        NonStationaryReason::Undetermined => "Undetermined",
    }
}

fn verdict_parts(st: &Stationarity) -> (bool, Value, Value) {
    let margin = st.margin().map_or(Value::Null, Value::from);
    match st {
        Stationarity::Stationary { .. } => (true, margin, Value::Null),
        Stationarity::NonStationary { reason } => (false, margin, Value::from(reason_str(*reason))),
    }
}

pub fn validate(file: &FileConfig) -> Result<RunOutput, CliError> {
    let (lambda, kappa) = file.build_measures()?;
    let tol = default_balance_tol(&lambda, &kappa);
    let balance = validate_balance_checked(&lambda, &kappa, tol)?;
    if let Balance::Unbalanced { discrepancy } = balance {
        let summary = json!({
            "balanced": false,
            "balance_discrepancy": discrepancy,
            "balance_tol": tol,
        });
        return Ok(RunOutput::new("validate.json", summary).with_failure(CliError::new(
            ErrorKind::Config,
            "measures",
            "validate_balance",
            format!("mass discrepancy {discrepancy:e} exceeds tolerance {tol:e}"),
        )));
    }

    let model = file.build_model()?;
    let st = stationarity_margin(&model)
        .map_err(|e| CliError::from_lib(e, "moments", "stationarity_margin"))?;
    let (stationary, margin, reason) = verdict_parts(&st);
    let memory = classify_memory(&model).map_or(Value::Null, |m| Value::from(memory_str(m)));
    let summary = json!({
        "balanced": true,
        "balance_tol": tol,
        "stationary": stationary,
        "margin": margin,
        "reason": reason,
        "memory": memory,
        "near_critical": st.near_critical(),
    });
    Ok(RunOutput::new("validate.json", summary))
}

fn validate_balance_checked(
    lambda: &longvol::SignedMeasure,
    kappa: &longvol::SignedMeasure,
    tol: f64,
) -> Result<Balance, CliError> {
    longvol::validate_balance(lambda, kappa, tol)
        .map_err(|e| CliError::from_lib(e, "measures", "validate_balance"))
}

pub fn analyze(file: &FileConfig, ov: &Overrides) -> Result<RunOutput, CliError> {
    let model = file.build_model()?;
    let kernel = model.kernel();
    let step = ov.step.unwrap_or(DEFAULT_STEP);
    let horizon = ov.horizon.unwrap_or_else(|| kernel.default_horizon());
    if !(step > 0.0 && step.is_finite() && horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::new(
            ErrorKind::Config,
            "cli",
            "analyze",
            format!("grid needs positive step and horizon, got step={step}, horizon={horizon}"),
        ));
    }
    let n = (horizon / step).ceil() as usize;
    let mut csv = Csv::new("x,K");
    // the kernel is left-continuous with a jump structure at 0, so the
    // x = 0 row carries the right limit
    let k0 = kernel.at_zero_plus().map_err(|e| CliError::from_lib(e, "kernel", "at_zero_plus"))?;
    csv.row(&[num(0.0), num(k0)]);
    for j in 1..=n {
        let x = j as f64 * step;
        let k = kernel.eval(x).map_err(|e| CliError::from_lib(e, "kernel", "eval"))?;
        csv.row(&[num(x), num(k)]);
    }

    let norm_horizon = kernel.default_horizon();
    let l1 = kernel
        .l1_norm(norm_horizon, DEFAULT_STEP)
        .map_err(|e| CliError::from_lib(e, "kernel", "l1_norm"))?;
    let l2 = kernel
        .l2_norm_sq(norm_horizon, DEFAULT_STEP)
        .map_err(|e| CliError::from_lib(e, "kernel", "l2_norm_sq"))?;
    let verdict = |v: &IntegralVerdict| match v {
        IntegralVerdict::Finite(_) => "finite",
        IntegralVerdict::Divergent => "divergent",
        IntegralVerdict::Undetermined => "undetermined",
    };
    let summary = json!({
        "l1": l1.finite(),
        "l1_verdict": verdict(&l1),
        "l2_sq": l2.finite(),
        "l2_verdict": verdict(&l2),
        "k_at_zero_plus": kernel.at_zero_plus().ok(),
        "tau": kernel.tau(),
        "grid": {"step": step, "horizon": horizon, "points": n + 1},
    });
    Ok(RunOutput::new("analyze.json", summary).with_csv("kernel.csv", csv.into_text()))
}

pub fn solve(file: &FileConfig) -> Result<RunOutput, CliError> {
    let model = file.build_model()?;
    let spec = &file.solve;
    let sol = solve_second_moment(&model, spec.horizon, spec.step)
        .map_err(|e| CliError::from_lib(e, "moments", "solve_second_moment"))?;
    let res = if spec.resolvent {
        Some(
            resolvent(&model, spec.horizon, spec.step)
                .map_err(|e| CliError::from_lib(e, "moments", "resolvent"))?,
        )
    } else {
        None
    };

    let mut csv = Csv::new(if res.is_some() { "t,EV2,resolvent" } else { "t,EV2" });
    for (i, (&t, &f)) in sol.times().iter().zip(sol.values()).enumerate() {
        let mut cells = vec![num(t), num(f)];
        if let Some(r) = &res {
            cells.push(num(r.values()[i]));
        }
        csv.row(&cells);
    }

    let st = sol.stationary();
    let (stationary, margin, reason) = verdict_parts(&st);
    let verdict = if stationary { Value::from("stationary") } else { reason };
    let summary = json!({
        "margin": margin,
        "limit": sol.limit(),
        "verdict": verdict,
        "final_value": sol.final_value(),
        "grid": {"step": spec.step, "horizon": spec.horizon},
    });
    Ok(RunOutput::new("solve.json", summary).with_csv("moments.csv", csv.into_text()))
}

pub fn gamma_cmd(file: &FileConfig) -> Result<RunOutput, CliError> {
    let model = file.build_model()?;
    let memory = classify_memory(&model)
        .map_err(|e| CliError::from_lib(e, "autocov", "classify_memory"))?;
    let cf = c_factor(&model).map_err(|e| CliError::from_lib(e, "autocov", "c_factor"))?;

    let mut csv = Csv::new("delta,gamma,asymptote,ratio");
    for &d in &file.gamma.deltas {
        let g = gamma(&model, d).map_err(|e| CliError::from_lib(e, "autocov", "gamma"))?;
        // the asymptote is undefined at d = 0 and for unsupported tail
        // regimes; leave those cells empty rather than failing the table
        let asy = if d > 0.0 { asymptotic_gamma(&model, d).ok().map(|a| a.value) } else { None };
        let ratio = asy.map(|a| g / a);
        csv.row(&[
            num(d),
            num(g),
            asy.map_or(String::new(), num),
            ratio.map_or(String::new(), num),
        ]);
    }
    let summary = json!({
        "memory_class": memory_str(memory),
        "c_factor": cf,
    });
    Ok(RunOutput::new("gamma.json", summary).with_csv("gamma.csv", csv.into_text()))
}

/// Sample times for the estimator report: quarter points of the horizon,
/// snapped to the grid.
fn sample_times(t_end: f64, h: f64) -> Vec<f64> {
    let n = (t_end / h).round() as usize;
    [n / 4, n / 2, 3 * n / 4, n]
        .iter()
        .map(|&i| i as f64 * h)
        .filter(|&t| t > 0.0)
        .collect()
}

struct EnsembleReport {
    times: Vec<f64>,
    mean_v: Vec<f64>,
    se_mean_v: Vec<f64>,
    var_v: Vec<f64>,
    se_var_v: Vec<f64>,
    theory_var_v: Vec<f64>,
    autocov: Vec<Value>,
    efficiency: Value,
}

fn ensemble_report(
    file: &FileConfig,
    model: &ModelConfig,
    e: &PathEnsemble,
    sol: &MomentSolution,
) -> Result<EnsembleReport, CliError> {
    let spec = &file.sim;
    let sigma_sq = model.sigma() * model.sigma();
    let times = sample_times(spec.t_end, spec.step);
    let mut mean_v = Vec::new();
    let mut se_mean_v = Vec::new();
    let mut var_v = Vec::new();
    let mut se_var_v = Vec::new();
    let mut theory_var_v = Vec::new();
    for &t in &times {
        let m = empirical_moments(e, t)
            .map_err(|err| CliError::from_lib(err, "simulate", "empirical_moments"))?;
        mean_v.push(m.mean);
        se_mean_v.push(m.se_mean.unwrap_or(0.0));
        var_v.push(m.var);
        se_var_v.push(m.se_var.unwrap_or(0.0));
        let i = e.grid_index(t).map_err(|err| CliError::from_lib(err, "simulate", "grid_index"))?;
        theory_var_v.push(sol.values()[i] - sigma_sq);
    }

    let max_lag = spec.autocov_lags.iter().cloned().fold(0.0f64, f64::max);
    let anchor = spec.t_end - max_lag;
    let mut autocov = Vec::new();
    for &lag in &spec.autocov_lags {
        let a = empirical_autocov(e, anchor, lag)
            .map_err(|err| CliError::from_lib(err, "simulate", "empirical_autocov"))?;
        let theory = covariance_surface(model, anchor, lag, spec.step)
            .map_err(|err| CliError::from_lib(err, "moments", "covariance_surface"))?;
        autocov.push(json!({
            "t": anchor,
            "delta": lag,
            "empirical": a.cov,
            "se": a.se,
            "theory": theory,
        }));
    }

    let eff = returns_efficiency(e, spec.efficiency_delta, spec.efficiency_big_delta, spec.efficiency_t)
        .map_err(|err| CliError::from_lib(err, "simulate", "returns_efficiency"))?;
    let efficiency = json!({
        "t": spec.efficiency_t,
        "delta": spec.efficiency_delta,
        "big_delta": spec.efficiency_big_delta,
        "corr": eff.corr,
        "se": eff.se,
        "degenerate": eff.degenerate,
        "theory": 0.0,
    });

    Ok(EnsembleReport {
        times,
        mean_v,
        se_mean_v,
        var_v,
        se_var_v,
        theory_var_v,
        autocov,
        efficiency,
    })
}

fn paths_csv(e: &PathEnsemble, emit_paths: usize) -> Csv {
    let mut csv = Csv::new("path,t,V,X,S");
    let times = e.times();
    for p in 0..emit_paths.min(e.paths()) {
        let v = e.v(p);
        let x = e.x(p);
        let s = e.price_path(p);
        for i in 0..times.len() {
            csv.row(&[p.to_string(), num(times[i]), num(v[i]), num(x[i]), num(s[i])]);
        }
    }
    csv
}

pub fn simulate_cmd(file: &FileConfig) -> Result<RunOutput, CliError> {
    let model = file.build_model()?;
    let sim = file.build_sim(model.clone())?;
    let e = simulate(&sim).map_err(|err| CliError::from_lib(err, "simulate", "simulate"))?;
    let sol = solve_second_moment(&model, file.sim.t_end, file.sim.step)
        .map_err(|err| CliError::from_lib(err, "moments", "solve_second_moment"))?;
    let report = ensemble_report(file, &model, &e, &sol)?;

    let summary = json!({
        "t": report.times,
        "mean_v": report.mean_v,
        "se_mean_v": report.se_mean_v,
        "var_v": report.var_v,
        "se_var_v": report.se_var_v,
        "theory": {"mean_v": model.sigma(), "var_v": report.theory_var_v},
        "autocov": report.autocov,
        "efficiency": report.efficiency,
        "ensemble": {
            "paths": e.paths(),
            "steps": e.steps(),
            "h": e.h(),
            "seed": file.sim.seed,
            "t_end": file.sim.t_end,
        },
    });
    let mut out = RunOutput::new("estimators.json", summary);
    if file.sim.emit_paths > 0 {
        out = out.with_csv("paths.csv", paths_csv(&e, file.sim.emit_paths).into_text());
    }
    Ok(out)
}

pub fn discrete_cmd(file: &FileConfig) -> Result<RunOutput, CliError> {
    let model = file.build_model()?;
    let (dm, spec) = file.build_discrete(&model)?;
    let st = discrete_stationarity(&dm)
        .map_err(|e| CliError::from_lib(e, "discrete", "discrete_stationarity"))?;
    let memory =
        discrete_memory(&dm).map_err(|e| CliError::from_lib(e, "discrete", "discrete_memory"))?;
    let ens = simulate_discrete(&dm, spec.steps, spec.paths, spec.seed)
        .map_err(|e| CliError::from_lib(e, "discrete", "simulate_discrete"))?;

    let nf = spec.paths as f64;
    let mean_v_final = (0..spec.paths).map(|p| ens.v(p, spec.steps)).sum::<f64>() / nf;
    let var_v_final = if spec.paths > 1 {
        (0..spec.paths).map(|p| (ens.v(p, spec.steps) - mean_v_final).powi(2)).sum::<f64>()
            / (nf - 1.0)
    } else {
        0.0
    };

    let (stationary, margin, reason) = verdict_parts(&st);
    let verdict = if stationary { Value::from("stationary") } else { reason };
    let summary = json!({
        "margin": margin,
        "verdict": verdict,
        "memory": memory_str(memory),
        "steps": spec.steps,
        "paths": spec.paths,
        "seed": spec.seed,
        "sigma": dm.sigma(),
        "beta": dm.beta(),
        "mean_v_final": mean_v_final,
        "se_mean_v_final": (var_v_final / nf).sqrt(),
    });

    let mut out = RunOutput::new("discrete.json", summary);
    if spec.emit_paths > 0 {
        let mut csv = Csv::new("path,n,V,U,X");
        for p in 0..spec.emit_paths.min(spec.paths) {
            for n in 1..=spec.steps {
                csv.row(&[
                    p.to_string(),
                    n.to_string(),
                    num(ens.v(p, n)),
                    num(ens.u(p, n)),
                    num(ens.x(p, n)),
                ]);
            }
        }
        out = out.with_csv("discrete_paths.csv", csv.into_text());
    }
    Ok(out)
}

struct Check {
    name: String,
    theory: f64,
    empirical: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        (self.empirical - self.theory).abs() <= self.tolerance
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "theory": self.theory,
            "empirical": self.empirical,
            "tolerance": self.tolerance,
            "deviation": (self.empirical - self.theory).abs(),
            "pass": self.pass(),
        })
    }
}

pub fn report_cmd(file: &FileConfig) -> Result<RunOutput, CliError> {
    let model = file.build_model()?;
    let sim = file.build_sim(model.clone())?;
    let e = simulate(&sim).map_err(|err| CliError::from_lib(err, "simulate", "simulate"))?;
    let sol = solve_second_moment(&model, file.sim.t_end, file.sim.step)
        .map_err(|err| CliError::from_lib(err, "moments", "solve_second_moment"))?;
    let rep = ensemble_report(file, &model, &e, &sol)?;
    let sigma = model.sigma();
    let nf = e.paths() as f64;

    let mut checks = Vec::new();
    for (i, &t) in rep.times.iter().enumerate() {
        checks.push(Check {
            name: format!("mean_v(t={t})"),
            theory: sigma,
            empirical: rep.mean_v[i],
            tolerance: 3.0 * rep.se_mean_v[i],
        });
    }
    let last = rep.times.len() - 1;
    checks.push(Check {
        name: format!("var_v(t={})", rep.times[last]),
        theory: rep.theory_var_v[last],
        empirical: rep.var_v[last],
        tolerance: (0.05 * rep.theory_var_v[last].abs()).max(3.0 * rep.se_var_v[last]),
    });

    for row in &rep.autocov {
        let theory = row["theory"].as_f64().unwrap();
        let se = row["se"].as_f64().unwrap_or(0.0);
        checks.push(Check {
            name: format!("autocov(t={},delta={})", row["t"], row["delta"]),
            theory,
            empirical: row["empirical"].as_f64().unwrap(),
            tolerance: (0.10 * theory.abs()).max(3.0 * se),
        });
    }

    // martingale mean and the isometry for the cumulative process
    let n_steps = e.steps();
    let xs: Vec<f64> = (0..e.paths()).map(|p| e.x(p)[n_steps]).collect();
    let mean_x = xs.iter().sum::<f64>() / nf;
    let var_x = xs.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>() / (nf - 1.0);
    checks.push(Check {
        name: format!("mean_x(t={})", file.sim.t_end),
        theory: 0.0,
        empirical: mean_x,
        tolerance: 3.0 * (var_x / nf).sqrt(),
    });

    let x_sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let mean_x_sq = x_sq.iter().sum::<f64>() / nf;
    let var_x_sq = x_sq.iter().map(|x| (x - mean_x_sq).powi(2)).sum::<f64>() / (nf - 1.0);
    let isometry: f64 = sol.values()[..n_steps].iter().sum::<f64>() * file.sim.step;
    checks.push(Check {
        name: format!("isometry(t={})", file.sim.t_end),
        theory: isometry,
        empirical: mean_x_sq,
        tolerance: (0.05 * isometry.abs()).max(3.0 * (var_x_sq / nf).sqrt()),
    });

    let eff = &rep.efficiency;
    checks.push(Check {
        name: format!(
            "return_corr(delta={},Delta={})",
            file.sim.efficiency_delta, file.sim.efficiency_big_delta
        ),
        theory: 0.0,
        empirical: eff["corr"].as_f64().unwrap(),
        tolerance: 3.0 * eff["se"].as_f64().unwrap_or(0.0),
    });

    let all_pass = checks.iter().all(Check::pass);
    let summary = json!({
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "all_pass": all_pass,
        "ensemble": {
            "paths": e.paths(),
            "steps": e.steps(),
            "h": e.h(),
            "seed": file.sim.seed,
            "t_end": file.sim.t_end,
        },
    });
    let mut out = RunOutput::new("report.json", summary);
    if !all_pass {
        let failed: Vec<&str> =
            checks.iter().filter(|c| !c.pass()).map(|c| c.name.as_str()).collect();
        out = out.with_failure(CliError::new(
            ErrorKind::ToleranceFailure,
            "cli",
            "report",
            format!("checks outside tolerance: {}", failed.join(", ")),
        ));
    }
    Ok(out)
}
