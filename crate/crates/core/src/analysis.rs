//! Reference solutions, log-linear rate fits, and empirical checks of the
//! exponential (continuous) and linear (discrete) convergence guarantees.

use serde::{Deserialize, Serialize};

use crate::discrete::{run_scheme, IterateHistory};
use crate::dynamics::{integrate_third_order_until, residual, stable_substeps, DynParams, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::params::{check_continuous_rate, check_discrete_rate, continuous_pack, discrete_pack};
use crate::prox::prox;
use crate::rng;
use crate::vector::{check_dim, dot, norm, sub, TripleVec};

pub const REFERENCE_MAX_ITER: usize = 10_000_000;
/// Feasible points at which a reference solution is validated.
pub const VALIDATION_POINTS: usize = 100;
/// Distances at or below this are treated as converged by the fits.
pub const DISTANCE_FLOOR: f64 = 1e-14;
pub const MIN_FIT_SAMPLES: usize = 10;
pub const DEFAULT_WINDOW: f64 = 0.25;
/// Allowance on the continuous slope threshold for the polynomial prefactor
/// and integration error.
pub const SLOPE_MARGIN: f64 = 0.25;

/// Solution of the instance by the damped residual iteration
/// `w ← w − c₁Ψ(w)` started from the projection of the origin.
pub fn reference_solution(inst: &ProblemInstance, tol: f64) -> Result<Vec<f64>> {
    let start = inst.omega().project(&vec![0.0; inst.dim()]);
    reference_solution_from(inst, &start, tol)
}

/// As [`reference_solution`], started from a seeded feasible point.
pub fn reference_solution_seeded(inst: &ProblemInstance, seed: u64, tol: f64) -> Result<Vec<f64>> {
    let mut rng = rng::seeded(seed);
    let start = inst.omega().sample(inst.dim(), &mut rng);
    reference_solution_from(inst, &start, tol)
}

pub fn reference_solution_from(inst: &ProblemInstance, start: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_dim(inst.dim(), start)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    let c1 = inst.c1()?;
    let mut w = start.to_vec();
    let mut psi = residual(inst, &w)?;
    let mut iterations = 0;
    while norm(&psi) > tol {
        if iterations == REFERENCE_MAX_ITER {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm(&psi),
            });
        }
        for (wi, pi) in w.iter_mut().zip(&psi) {
            *wi -= c1 * pi;
        }
        psi = residual(inst, &w)?;
        iterations += 1;
    }
    validate_solution(inst, &w, tol)?;
    Ok(w)
}

/// Checks the variational inequality at `p = P_Ω^{γh}(F(w) − γg(w))` on
/// sampled feasible points. With `‖Ψ(w)‖ ≤ tol` the prox characterization
/// bounds the violation by `tol‖v − p‖/γ`; a tenfold allowance is granted.
pub fn validate_solution(inst: &ProblemInstance, w: &[f64], tol: f64) -> Result<()> {
    let gamma = inst.gamma();
    let fw = inst.f().apply(w);
    let gw = inst.g().apply(w);
    let u: Vec<f64> = fw.iter().zip(&gw).map(|(f, g)| f - gamma * g).collect();
    let p = prox(inst.omega(), inst.h(), gamma, &u)?;
    let hp = inst.h().value(&p);
    let mut rng = rng::seeded(0x5eed);
    for _ in 0..VALIDATION_POINTS {
        let v = inst.omega().sample(inst.dim(), &mut rng);
        let gap = sub(&v, &p);
        let slack = dot(&gw, &gap) + inst.h().value(&v) - hp;
        let allowed = 10.0 * tol * (1.0 + norm(&gap) / gamma);
        if slack < -allowed {
            return Err(Error::ValidationFailed(format!(
                "variational inequality violated by {} (allowed {allowed})",
                -slack
            )));
        }
    }
    Ok(())
}

/// Least-squares line through `(x, log d)` on a trailing window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Half-open index range `[start, end)` of the fitted samples.
    pub window: (usize, usize),
    /// Largest `d(k+1)/d(k)` inside the window (discrete fits only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tail_ratio: Option<f64>,
}

impl RateFit {
    /// Fitted per-step factor `q = e^{slope}`.
    pub fn factor(&self) -> f64 {
        self.slope.exp()
    }
}

/// Fits `log d` against `x` over the trailing `window_fraction` of the first
/// contiguous run of samples with `d > floor`. Leading samples at or below
/// the floor (e.g. a zero start) are skipped.
pub fn fit_log_linear(xs: &[f64], ds: &[f64], window_fraction: f64, floor: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window_fraction must lie in (0, 1), got {window_fraction}"
        )));
    }
    if xs.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ds.len(),
        });
    }
    let converged = DISTANCE_FLOOR.max(floor);
    if ds.iter().all(|d| !(*d > converged)) {
        return Err(Error::DegenerateData { floor: converged });
    }
    let begin = ds
        .iter()
        .position(|d| *d > floor)
        .expect("some sample is above the floor");
    let prefix = ds[begin..]
        .iter()
        .position(|d| !(*d > floor))
        .map_or(ds.len(), |i| begin + i);
    if prefix - begin < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: prefix - begin,
        });
    }
    let width = ((window_fraction * (prefix - begin) as f64).ceil() as usize).clamp(3, prefix - begin);
    let start = prefix - width;
    let x = &xs[start..prefix];
    let y: Vec<f64> = ds[start..prefix].iter().map(|d| d.ln()).collect();
    let m = width as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let syy: f64 = y.iter().map(|yi| (yi - my) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| {
                let e = yi - (intercept + slope * xi);
                e * e
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window: (start, prefix),
        max_tail_ratio: None,
    })
}

/// Exponential decay exponent of `‖w(t) − w*‖`; the slope estimates `−θ`.
/// Every positive distance is used; see [`fit_exponential_rate_above`] to
/// cut off a numerical floor.
pub fn fit_exponential_rate(traj: &Trajectory, window_fraction: f64) -> Result<RateFit> {
    fit_exponential_rate_above(traj, window_fraction, 0.0)
}

pub fn fit_exponential_rate_above(traj: &Trajectory, window_fraction: f64, floor: f64) -> Result<RateFit> {
    let d = traj
        .distances()
        .ok_or_else(|| Error::InvalidArgument("trajectory carries no distances".into()))?;
    fit_log_linear(&traj.times, &d, window_fraction, floor)
}

/// Per-iteration log factor of `‖w(k) − w*‖`, plus the largest tail ratio.
pub fn fit_linear_rate(hist: &IterateHistory, window_fraction: f64) -> Result<RateFit> {
    fit_linear_rate_above(hist, window_fraction, 0.0)
}

pub fn fit_linear_rate_above(hist: &IterateHistory, window_fraction: f64, floor: f64) -> Result<RateFit> {
    let d = hist
        .distances()
        .ok_or_else(|| Error::InvalidArgument("history carries no distances".into()))?;
    let ks: Vec<f64> = (0..d.len()).map(|k| k as f64).collect();
    let mut fit = fit_log_linear(&ks, &d, window_fraction, floor)?;
    let (start, end) = fit.window;
    fit.max_tail_ratio = Some(max_ratio(&d[start..end]));
    Ok(fit)
}

fn max_ratio(d: &[f64]) -> f64 {
    d.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Which guarantee to test, with its rate parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateClaim {
    /// `‖w(t) − w*‖ = O(poly(t)·e^{−εt})` for the third-order system.
    Continuous { eps: f64 },
    /// `‖w(k) − w*‖ ≤ Q qᵏ` for the discrete scheme.
    Discrete { xi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub runs: usize,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub max_iter: usize,
    pub window_fraction: f64,
    pub reference_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            runs: 10,
            seed: 0,
            horizon: crate::dynamics::DEFAULT_HORIZON,
            dt: crate::dynamics::DEFAULT_DT,
            max_iter: 1_000_000,
            window_fraction: DEFAULT_WINDOW,
            reference_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub slope: f64,
    pub r2: f64,
    /// Record spacing used (continuous) or 1 (discrete).
    pub step: f64,
    /// Time horizon (continuous) or iteration count (discrete) of the run.
    pub span: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_ratio: Option<f64>,
    /// Distances strictly decrease over the fit window.
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub mode: &'static str,
    pub params: DynParams,
    pub eps_or_xi: f64,
    /// Slope bound each continuous run must meet, `min{0, −(ε − margin)}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub runs: Vec<RunSummary>,
    pub verdict: VerdictKind,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.verdict == VerdictKind::Pass
    }

    pub fn worst_slope(&self) -> f64 {
        self.runs.iter().map(|r| r.slope).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Slope a continuous run must reach for a claimed rate `ε`.
pub fn continuous_threshold(eps: f64) -> f64 {
    (-(eps - SLOPE_MARGIN)).min(0.0)
}

fn strictly_decreasing(d: &[f64]) -> bool {
    d.windows(2).all(|w| w[1] < w[0])
}

/// Runs the claimed dynamics from `opts.runs` seeded starting points and
/// fits the decay of `‖w − w*‖`. The verdict is `NOT_APPLICABLE` when the
/// parameters fail the conditions behind the claim.
pub fn verify_theorem(
    inst: &ProblemInstance,
    claim: RateClaim,
    params: &DynParams,
    opts: &VerifyOptions,
) -> Result<Verdict> {
    params.validate()?;
    let c = inst.c();
    let c1 = inst.c1()?;
    let (mode, rate, applicable) = match claim {
        RateClaim::Continuous { eps } => (
            "continuous",
            eps,
            check_continuous_rate(&continuous_pack(c1, params), c, c1, params, eps)?.passed(),
        ),
        RateClaim::Discrete { xi } => (
            "discrete",
            xi,
            check_discrete_rate(&discrete_pack(c1, params), c, c1, params, xi)?.passed(),
        ),
    };
    let threshold = matches!(claim, RateClaim::Continuous { .. }).then(|| continuous_threshold(rate));
    let mut verdict = Verdict {
        mode,
        params: *params,
        eps_or_xi: rate,
        threshold,
        runs: Vec::new(),
        verdict: VerdictKind::NotApplicable,
    };
    if !applicable {
        return Ok(verdict);
    }
    let w_star = reference_solution(inst, opts.reference_tol)?;
    let floor = DISTANCE_FLOOR.max(100.0 * opts.reference_tol / c);
    for i in 0..opts.runs {
        let seed = opts.seed.wrapping_add(i as u64);
        let run = match claim {
            RateClaim::Continuous { .. } => {
                continuous_run(inst, params, &w_star, seed, opts, floor, threshold.unwrap())?
            }
            RateClaim::Discrete { .. } => discrete_run(inst, params, &w_star, seed, opts, floor, c)?,
        };
        verdict.runs.push(run);
    }
    verdict.verdict = if verdict.runs.iter().all(|r| r.pass) {
        VerdictKind::Pass
    } else {
        VerdictKind::Fail
    };
    Ok(verdict)
}

fn perturbed(rng: &mut rng::Rng, base: &[f64]) -> Vec<f64> {
    base.iter().map(|b| b + rng::uniform(rng, -1.0, 1.0)).collect()
}

/// Records with fewer samples above the floor than this are repeated on a
/// ten times finer record grid.
const MIN_RESOLVED: usize = 40;
/// Runs that end above this fraction of their peak distance are repeated on
/// a four times longer (and coarser) record grid, at most `MAX_EXTENSIONS`
/// times.
const SLOW_DECAY: f64 = 1e-3;
const MAX_EXTENSIONS: usize = 6;

fn continuous_run(
    inst: &ProblemInstance,
    params: &DynParams,
    w_star: &[f64],
    seed: u64,
    opts: &VerifyOptions,
    floor: f64,
    threshold: f64,
) -> Result<RunSummary> {
    let n = inst.dim();
    let mut rng = rng::seeded(seed);
    let init = TripleVec {
        v1: perturbed(&mut rng, w_star),
        v2: rng::uniform_vec(&mut rng, n, -1.0, 1.0),
        v3: rng::uniform_vec(&mut rng, n, -1.0, 1.0),
    };
    let lip = inst.residual_lipschitz();
    let mut dt = opts.dt;
    let mut horizon = opts.horizon;
    let mut extensions = 0;
    let traj = loop {
        let grid = TimeGrid::new(0.0, horizon, dt)?.with_substeps(stable_substeps(params, lip, dt));
        let traj = integrate_third_order_until(inst, params, &init, &grid, w_star, 1e-3 * floor)?;
        let d = traj.distances().expect("distances requested");
        let resolved = d.iter().position(|x| !(*x > floor)).unwrap_or(d.len());
        if resolved < MIN_RESOLVED && dt > opts.dt * 1e-3 {
            // the decay outruns the record grid: resample up to just past the crossing
            let crossing = traj.times[resolved.min(traj.len() - 1)];
            dt /= 10.0;
            horizon = (2.0 * crossing).max(MIN_RESOLVED as f64 * 2.0 * dt).min(horizon);
            continue;
        }
        let peak = d.iter().copied().fold(0.0, f64::max);
        let last = *d.last().expect("trajectories are nonempty");
        if last > floor && last > SLOW_DECAY * peak && extensions < MAX_EXTENSIONS {
            // too slow to show its rate: stretch the record grid
            horizon *= 4.0;
            dt *= 4.0;
            extensions += 1;
            continue;
        }
        break traj;
    };
    let fit = match fit_exponential_rate_above(&traj, opts.window_fraction, floor) {
        Ok(fit) => fit,
        Err(Error::DegenerateData { .. }) => return Ok(converged_run(seed, dt, traj.times[traj.len() - 1])),
        Err(e) => return Err(e),
    };
    let d = traj.distances().expect("distances requested");
    let monotone = strictly_decreasing(&d[fit.window.0..fit.window.1]);
    Ok(RunSummary {
        seed,
        slope: fit.slope,
        r2: fit.r_squared,
        step: dt,
        span: traj.times[traj.len() - 1],
        tail_ratio: None,
        monotone,
        pass: monotone && fit.slope < 0.0 && fit.slope <= threshold,
    })
}

fn discrete_run(
    inst: &ProblemInstance,
    params: &DynParams,
    w_star: &[f64],
    seed: u64,
    opts: &VerifyOptions,
    floor: f64,
    c: f64,
) -> Result<RunSummary> {
    let mut rng = rng::seeded(seed);
    let w0 = perturbed(&mut rng, w_star);
    // keep iterating until the distance is well under the fit floor
    let tol = 0.1 * c * floor;
    let hist = run_scheme(inst, params, (&w0, &w0, &w0), opts.max_iter, tol, Some(w_star))?;
    let fit = match fit_linear_rate_above(&hist, opts.window_fraction, floor) {
        Ok(fit) => fit,
        Err(Error::DegenerateData { .. }) => return Ok(converged_run(seed, 1.0, (hist.len() - 1) as f64)),
        Err(e) => return Err(e),
    };
    let ratio = fit.max_tail_ratio.expect("discrete fits carry ratios");
    Ok(RunSummary {
        seed,
        slope: fit.slope,
        r2: fit.r_squared,
        step: 1.0,
        span: (hist.len() - 1) as f64,
        tail_ratio: Some(ratio),
        monotone: ratio < 1.0,
        pass: fit.factor() < 1.0 && ratio < 1.0,
    })
}

/// A run that started within the floor of `w*`.
fn converged_run(seed: u64, step: f64, span: f64) -> RunSummary {
    RunSummary {
        seed,
        slope: f64::NEG_INFINITY,
        r2: 1.0,
        step,
        span,
        tail_ratio: None,
        monotone: true,
        pass: true,
    }
}
