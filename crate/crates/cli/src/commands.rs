//! The five subcommands. Each returns a JSON report for stdout and, when
//! the outcome is not a success, the failure that sets the exit code.

use std::fs;
use std::path::Path;

use gimvi_core::analysis::{fit_exponential_rate_above, fit_linear_rate_above, DEFAULT_WINDOW, DISTANCE_FLOOR};
use gimvi_core::discrete::check_difference_identities;
use gimvi_core::dynamics::{
    check_lemma_estimates, check_phi_lipschitz, check_residual_lipschitz, integrate_first_order_baseline,
    integrate_second_order_baseline, integrate_third_order, stable_substeps, Trajectory,
};
use gimvi_core::params::{
    check_continuous_rate, check_discrete_rate, check_discrete_standing, continuous_pack, delta, discrete_pack,
    max_feasible_eps, max_feasible_xi, synth_small_rate, synthesize,
};
use gimvi_core::prox::check_prox_inequalities;
use gimvi_core::{
    check_constants, gamma_bar, reference_solution, rng, run_scheme, verify_theorem, AuditReport, DynParams, Error,
    ProblemInstance, RateClaim, RateFit, Region, TimeGrid, TripleVec, Verdict, VerdictKind, VerifyOptions,
};
use serde_json::{json, Value};

use crate::config::{Mode, ParamsSource, RunConfig};
use crate::exit::{from_core, Failure};

/// Tolerance of the reference solution every run is measured against.
const REFERENCE_TOL: f64 = 1e-12;

pub struct Outcome {
    pub report: Value,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Self { report, failure: None }
    }
}

type CmdResult = Result<Outcome, Failure>;

fn core<T>(r: gimvi_core::Result<T>) -> Result<T, Failure> {
    r.map_err(from_core)
}

fn certified(cfg: &RunConfig) -> Result<ProblemInstance, Failure> {
    cfg.raw_instance()?
        .validated()
        .map_err(|e| Failure::Invalid(e.to_string()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn distance_floor(c: f64) -> f64 {
    DISTANCE_FLOOR.max(100.0 * REFERENCE_TOL / c)
}

/// Configured start, or the solution shifted by a seeded `U(−1, 1)ⁿ` draw.
fn start_point(cfg: &RunConfig, w_star: &[f64]) -> Result<Vec<f64>, Failure> {
    match &cfg.init {
        Some(init) if init.len() != w_star.len() => Err(Failure::Usage(format!(
            "init has {} entries, instance dimension is {}",
            init.len(),
            w_star.len()
        ))),
        Some(init) => Ok(init.clone()),
        None => {
            let mut r = rng::seeded(cfg.seed);
            Ok(w_star.iter().map(|w| w + rng::uniform(&mut r, -1.0, 1.0)).collect())
        }
    }
}

fn fit_json(fit: gimvi_core::Result<RateFit>) -> Result<Value, Failure> {
    match fit {
        Ok(fit) => Ok(json!(fit)),
        Err(e @ (Error::DegenerateData { .. } | Error::InsufficientData { .. })) => {
            Ok(json!({ "unavailable": e.to_string() }))
        }
        Err(e) => Err(from_core(e)),
    }
}

fn fitted_slope(fit: &Value) -> Option<f64> {
    fit.get("slope").and_then(Value::as_f64)
}

pub fn validate(cfg: &RunConfig) -> CmdResult {
    let inst = cfg.raw_instance()?;
    let checks = inst.checks();
    let c = inst.c();
    let c1 = inst.c1().ok();
    let gb = gamma_bar(&inst).ok();
    let report = json!({
        "dim": inst.dim(),
        "gamma": inst.gamma(),
        "constants": inst.constants(),
        "certified": inst.is_certified(),
        "c": c,
        "c1": c1,
        "delta": c1.map(|c1| delta(c, c1)),
        "residual_lipschitz": inst.residual_lipschitz(),
        "gamma_bar": gb.map(|g| json!({
            "value": g.paper_value().ok(),
            "discriminant": g.paper_discriminant,
            "quadratic_root": g.quadratic_root,
            "quadratic_discriminant": g.quadratic_discriminant,
        })),
        "checks": checks,
    });
    let failure = checks
        .iter()
        .find(|k| !k.pass)
        .map(|k| Failure::Invalid(k.reason.to_string()));
    Ok(Outcome { report, failure })
}

/// Coefficients for the third-order system or the scheme, and the rate
/// claimed for them.
fn resolve_params(
    cfg: &RunConfig,
    source: ParamsSource,
    inst: &ProblemInstance,
) -> Result<(DynParams, Option<f64>, Option<f64>), Failure> {
    let c = inst.c();
    let c1 = core(inst.c1())?;
    match source.region() {
        Some(region) => {
            let s = core(synthesize(region, c, c1, cfg.seed))?;
            Ok((s.params, s.eps.or(region.fixed_eps()), s.xi))
        }
        None => {
            let p = cfg.explicit_params().expect("explicit source")?;
            let eps = max_feasible_eps(&continuous_pack(c1, &p), c, c1, &p);
            let xi = max_feasible_xi(&discrete_pack(c1, &p), c, c1, &p);
            Ok((p, Some(eps), Some(xi)))
        }
    }
}

fn verdict(inst: &ProblemInstance, claim: RateClaim, params: &DynParams, cfg: &RunConfig) -> Result<Verdict, Failure> {
    let (mode, rate) = match claim {
        RateClaim::Continuous { eps } => ("continuous", eps),
        RateClaim::Discrete { xi } => ("discrete", xi),
    };
    if rate <= 0.0 {
        // no rate at all is certified for these coefficients
        return Ok(Verdict {
            mode,
            params: *params,
            eps_or_xi: rate,
            threshold: None,
            runs: Vec::new(),
            verdict: VerdictKind::NotApplicable,
        });
    }
    let opts = VerifyOptions {
        runs: cfg.runs,
        seed: cfg.seed,
        horizon: cfg.horizon,
        dt: cfg.dt,
        max_iter: cfg.max_iter,
        ..VerifyOptions::default()
    };
    core(verify_theorem(inst, claim, params, &opts))
}

fn third_order_run(
    inst: &ProblemInstance,
    params: &DynParams,
    w0: &[f64],
    w_star: &[f64],
    cfg: &RunConfig,
) -> Result<Trajectory, Failure> {
    let grid = core(TimeGrid::new(0.0, cfg.horizon, cfg.dt))?.with_substeps(stable_substeps(
        params,
        inst.residual_lipschitz(),
        cfg.dt,
    ));
    let zeros = vec![0.0; w0.len()];
    let init = core(TripleVec::new(w0.to_vec(), zeros.clone(), zeros))?;
    core(integrate_third_order(inst, params, &init, &grid, Some(w_star)))
}

pub fn solve(cfg: &RunConfig) -> CmdResult {
    let inst = certified(cfg)?;
    let mode = cfg.mode();
    let w_star = core(reference_solution(&inst, REFERENCE_TOL))?;
    let w0 = start_point(cfg, &w_star)?;
    let floor = distance_floor(inst.c());
    let out = cfg.out_dir();
    let grid = core(TimeGrid::new(0.0, cfg.horizon, cfg.dt))?;

    let mut report = json!({ "mode": mode.name(), "seed": cfg.seed });
    let mut verdict_out = None;
    match mode {
        Mode::Continuous3rd | Mode::Discrete => {
            let (params, eps, xi) = resolve_params(cfg, cfg.params_source(), &inst)?;
            report["params"] = json!(params);
            let (csv, fit, claim) = if mode == Mode::Discrete {
                let hist = core(run_scheme(
                    &inst,
                    &params,
                    (&w0, &w0, &w0),
                    cfg.max_iter,
                    cfg.tol,
                    Some(&w_star),
                ))?;
                report["iterations"] = json!(hist.len());
                report["converged"] = json!(hist.converged);
                report["max_consistency"] = json!(hist.max_consistency());
                report["final_residual"] = json!(hist.residual_norms.last());
                report["final_distance"] = json!(hist.distances().and_then(|d| d.last().copied()));
                let fit = fit_json(fit_linear_rate_above(&hist, DEFAULT_WINDOW, floor))?;
                (hist.to_csv(), fit, RateClaim::Discrete { xi: xi.unwrap_or(0.0) })
            } else {
                let traj = third_order_run(&inst, &params, &w0, &w_star, cfg)?;
                report["final_residual"] = json!(traj.residual_norms.last());
                report["final_distance"] = json!(traj.distances().and_then(|d| d.last().copied()));
                let fit = fit_json(fit_exponential_rate_above(&traj, DEFAULT_WINDOW, floor))?;
                (
                    traj.to_csv(),
                    fit,
                    RateClaim::Continuous {
                        eps: eps.unwrap_or(0.0),
                    },
                )
            };
            report["fit"] = fit;
            let v = verdict(&inst, claim, &params, cfg)?;
            report["verdict"] = json!(v.verdict);
            write(
                &out,
                if mode == Mode::Discrete {
                    "history.csv"
                } else {
                    "trajectory.csv"
                },
                &csv,
            )?;
            verdict_out = Some(v);
        }
        Mode::Continuous2nd | Mode::Continuous1st => {
            let traj = if mode == Mode::Continuous2nd {
                report["kappa"] = json!(cfg.kappa);
                let v0 = vec![0.0; w0.len()];
                core(integrate_second_order_baseline(
                    &inst,
                    cfg.kappa,
                    cfg.rho,
                    (&w0, &v0),
                    &grid,
                    Some(&w_star),
                ))?
            } else {
                core(integrate_first_order_baseline(
                    &inst,
                    cfg.rho,
                    &w0,
                    &grid,
                    Some(&w_star),
                ))?
            };
            report["rho"] = json!(cfg.rho);
            report["final_residual"] = json!(traj.residual_norms.last());
            report["final_distance"] = json!(traj.distances().and_then(|d| d.last().copied()));
            report["fit"] = fit_json(fit_exponential_rate_above(&traj, DEFAULT_WINDOW, floor))?;
            write(&out, "trajectory.csv", &traj.to_csv())?;
        }
    }
    write(&out, "fit.json", &pretty(&report))?;
    if let Some(v) = verdict_out {
        write(&out, "verdict.json", &pretty(&v))?;
    }
    Ok(Outcome::ok(report))
}

pub fn compare(cfg: &RunConfig) -> CmdResult {
    let inst = certified(cfg)?;
    let w_star = core(reference_solution(&inst, REFERENCE_TOL))?;
    let w0 = start_point(cfg, &w_star)?;
    let floor = distance_floor(inst.c());
    let grid = core(TimeGrid::new(0.0, cfg.horizon, cfg.dt))?;
    let source = cfg.params.unwrap_or(ParamsSource::DoubleRate);
    if source.region().is_some_and(|r| !r.is_continuous()) {
        return Err(Failure::Usage("compare needs a continuous parameter source".into()));
    }
    let (params, _, _) = resolve_params(cfg, source, &inst)?;

    let first = core(integrate_first_order_baseline(
        &inst,
        cfg.rho,
        &w0,
        &grid,
        Some(&w_star),
    ))?;
    let v0 = vec![0.0; w0.len()];
    let second = core(integrate_second_order_baseline(
        &inst,
        cfg.kappa,
        cfg.rho,
        (&w0, &v0),
        &grid,
        Some(&w_star),
    ))?;
    let third = third_order_run(&inst, &params, &w0, &w_star, cfg)?;

    let mut csv = String::from("t,first_order,second_order,third_order\n");
    for i in 0..first.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            first.times[i], first.residual_norms[i], second.residual_norms[i], third.residual_norms[i]
        ));
    }
    let mut fits = serde_json::Map::new();
    for (name, traj) in [
        ("first_order", &first),
        ("second_order", &second),
        ("third_order", &third),
    ] {
        fits.insert(
            name.into(),
            fit_json(fit_exponential_rate_above(traj, DEFAULT_WINDOW, floor))?,
        );
    }
    let slope = |k: &str| fitted_slope(&fits[k]);
    let ordered = match (slope("first_order"), slope("second_order"), slope("third_order")) {
        (Some(s1), Some(s2), Some(s3)) => Some(s3 <= s2 && s2 <= s1 + 0.1),
        _ => None,
    };
    let report = json!({
        "rows": first.len(),
        "third_order_params": params,
        "second_order": { "kappa": cfg.kappa, "rho": cfg.rho },
        "first_order": { "rho": cfg.rho },
        "fits": fits,
        "ordered": ordered,
    });
    let out = cfg.out_dir();
    write(&out, "compare.csv", &csv)?;
    write(&out, "compare.json", &pretty(&report))?;
    Ok(Outcome::ok(report))
}

pub fn tune(cfg: &RunConfig) -> CmdResult {
    let inst = certified(cfg)?;
    let c = inst.c();
    let c1 = core(inst.c1())?;
    let mut entries = Vec::new();
    let mut empty = Vec::new();
    for region in Region::ALL {
        let s = match synthesize(region, c, c1, cfg.seed) {
            Ok(s) => s,
            Err(e @ Error::EmptyRegion(_)) => {
                empty.push(format!("{region:?}"));
                entries.push(json!({ "region": region, "error": e.to_string() }));
                continue;
            }
            Err(e) => return Err(from_core(e)),
        };
        let p = s.params;
        let cpack = continuous_pack(c1, &p);
        let dpack = discrete_pack(c1, &p);
        let mut ok = s.bounds.is_none_or(|b| b.nonempty());
        let continuous = match s.eps.or(region.fixed_eps()) {
            Some(eps) if region.is_continuous() => {
                let r = core(check_continuous_rate(&cpack, c, c1, &p, eps))?;
                ok &= r.passed();
                Some(r)
            }
            _ => None,
        };
        let discrete = match s.xi {
            Some(xi) if region.is_discrete() => {
                let r = core(check_discrete_rate(&dpack, c, c1, &p, xi))?;
                ok &= r.passed() && check_discrete_standing(c1, &p).holds();
                Some(r)
            }
            _ => None,
        };
        if !ok {
            empty.push(format!("{region:?}"));
        }
        entries.push(json!({
            "region": region,
            "synthesized": s,
            "continuous_report": continuous,
            "discrete_report": discrete,
            "max_feasible_eps": max_feasible_eps(&cpack, c, c1, &p),
            "max_feasible_xi": max_feasible_xi(&dpack, c, c1, &p),
            "pass": ok,
        }));
    }
    let report = json!({ "c": c, "c1": c1, "delta": delta(c, c1), "regions": entries });
    write(&cfg.out_dir(), "tune.json", &pretty(&report))?;
    let failure = (!empty.is_empty()).then(|| Failure::EmptyRegion(empty.join(", ")));
    Ok(Outcome { report, failure })
}

/// Runs every property audit. Instance invariants are not enforced first:
/// inconsistent constants are exactly what the audits are meant to expose.
pub fn audit(cfg: &RunConfig) -> CmdResult {
    let inst = cfg.raw_instance()?;
    let (n, seed, trials) = (inst.dim(), cfg.seed, cfg.trials);
    let mut report = AuditReport::default();
    report.extend(core(check_prox_inequalities(
        n,
        inst.omega(),
        inst.h(),
        inst.gamma(),
        trials,
        seed,
    ))?);
    report.push(core(check_residual_lipschitz(&inst, trials, seed))?);
    report.extend(core(check_constants(&inst, trials, seed))?);
    if let Ok(c1) = inst.c1() {
        let params = core(synth_small_rate(inst.c(), c1, seed))?.params;
        report.push(core(check_phi_lipschitz(&inst, &params, trials, seed))?);
        let w_star = core(reference_solution(&inst, REFERENCE_TOL))?;
        report.extend(core(check_lemma_estimates(&inst, &w_star, trials, seed))?);
    }
    report.extend(core(check_difference_identities(seed, trials))?);
    let failed: Vec<String> = report.failures().map(|c| c.name.clone()).collect();
    let json = json!({ "passed": report.passed(), "checks": report.checks });
    write(&cfg.out_dir(), "audit.json", &pretty(&json))?;
    let failure = (!failed.is_empty()).then(|| Failure::AuditViolation(failed.join(", ")));
    Ok(Outcome { report: json, failure })
}
