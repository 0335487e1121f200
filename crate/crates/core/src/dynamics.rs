//! The residual map `Ψ`, the third-order system
//! `w''' + a₂w'' + a₁w' + a₀Ψ(w) = 0` in first-order form, fixed-step RK4
//! integration, and the first- and second-order baseline systems.

use serde::{Deserialize, Serialize};

use crate::audit::{AuditCheck, AuditReport};
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::prox::{prox, AUDIT_TOL};
use crate::rng;
use crate::vector::{all_finite, check_dim, distance, dot, norm, norm_sq, sub, TripleVec};

/// Any state norm above this aborts a run.
pub const DIVERGENCE_NORM: f64 = 1e12;
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 40.0;

/// Coefficients of `w''' + a₂w'' + a₁w' + a₀Ψ(w) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl DynParams {
    pub fn new(a0: f64, a1: f64, a2: f64) -> Result<Self> {
        let p = Self { a0, a1, a2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a0", self.a0), ("a1", self.a1), ("a2", self.a2)] {
            if !v.is_finite() {
                return Err(Error::NonFinite("dynamics coefficient"));
            }
            if v <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `Ψ(w) = F(w) − P_Ω^{γh}(F(w) − γ g(w))`; zero exactly at solutions.
pub fn residual(inst: &ProblemInstance, w: &[f64]) -> Result<Vec<f64>> {
    check_dim(inst.dim(), w)?;
    let fw = inst.f().apply(w);
    let gw = inst.g().apply(w);
    let gamma = inst.gamma();
    let arg: Vec<f64> = fw.iter().zip(&gw).map(|(f, g)| f - gamma * g).collect();
    let p = prox(inst.omega(), inst.h(), gamma, &arg)?;
    Ok(sub(&fw, &p))
}

/// `Φ(v₁, v₂, v₃) = (v₂, v₃, −a₁v₂ − a₂v₃ − a₀Ψ(v₁))`.
pub fn phi_map(inst: &ProblemInstance, params: &DynParams, v: &TripleVec) -> Result<TripleVec> {
    check_dim(inst.dim(), &v.v2)?;
    check_dim(inst.dim(), &v.v3)?;
    let psi = residual(inst, &v.v1)?;
    let acc = (0..inst.dim())
        .map(|i| -params.a1 * v.v2[i] - params.a2 * v.v3[i] - params.a0 * psi[i])
        .collect();
    Ok(TripleVec {
        v1: v.v2.clone(),
        v2: v.v3.clone(),
        v3: acc,
    })
}

/// Lipschitz modulus of `Φ` implied by `L_Ψ`:
/// `√(1 + (a₁² + a₂² + 2a₀²)(1 + L_Ψ))`.
pub fn phi_lipschitz_bound(params: &DynParams, residual_lipschitz: f64) -> f64 {
    let DynParams { a0, a1, a2 } = *params;
    (1.0 + (a1 * a1 + a2 * a2 + 2.0 * a0 * a0) * (1.0 + residual_lipschitz)).sqrt()
}

/// Record times `t0, t0 + dt, …, t_end`. Each record interval is split into
/// `substeps` RK4 steps; only the recorded states are kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub substeps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && dt.is_finite()) {
            return Err(Error::NonFinite("time grid"));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        if t_end <= t0 {
            return Err(Error::InvalidArgument(format!(
                "horizon end {t_end} must exceed start {t0}"
            )));
        }
        Ok(Self {
            t0,
            t_end,
            dt,
            substeps: 1,
        })
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    /// Number of record intervals, `(t_end − t0)/dt` rounded.
    pub fn steps(&self) -> usize {
        (((self.t_end - self.t0) / self.dt).round() as usize).max(1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// RK4 substeps per record interval that keep the scaled spectrum of the
/// third-order linearization inside the stability region. Root moduli of
/// `s³ + a₂s² + a₁s + a₀L` are bounded by `2·max(a₂, √a₁, ∛(a₀L/2))`.
pub fn stable_substeps(params: &DynParams, residual_lipschitz: f64, dt: f64) -> usize {
    let radius = 2.0
        * params
            .a2
            .max(params.a1.sqrt())
            .max((0.5 * params.a0 * residual_lipschitz).cbrt());
    let h_max = 2.5 / radius;
    ((dt / h_max).ceil() as usize).max(1)
}

/// Recorded run of one of the continuous systems.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    /// Order of the integrated system (1, 2 or 3).
    pub order: usize,
    pub times: Vec<f64>,
    /// Position, velocity, acceleration; untracked components are zero.
    pub states: Vec<TripleVec>,
    pub residual_norms: Vec<f64>,
    /// `‖w(t) − w*‖²` when a solution was supplied.
    pub distance_sq: Option<Vec<f64>>,
    /// `‖w'(t)‖²` and `‖w''(t)‖²`; NaN where the system does not track them.
    pub derivative_norms: [Vec<f64>; 2],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `‖w(t) − w*‖` per record.
    pub fn distances(&self) -> Option<Vec<f64>> {
        self.distance_sq.as_ref().map(|d| d.iter().map(|x| x.sqrt()).collect())
    }

    pub fn final_state(&self) -> &TripleVec {
        self.states.last().expect("trajectories are nonempty")
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Columns `t, w0 … w{n−1}, residual_norm, [phi,] phi1, phi2`.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",w{i}"));
        }
        out.push_str(",residual_norm");
        if self.distance_sq.is_some() {
            out.push_str(",phi");
        }
        out.push_str(",phi1,phi2\n");
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&t.to_string());
            for x in &self.states[k].v1 {
                out.push_str(&format!(",{x}"));
            }
            out.push_str(&format!(",{}", self.residual_norms[k]));
            if let Some(d) = &self.distance_sq {
                out.push_str(&format!(",{}", d[k]));
            }
            out.push_str(&format!(
                ",{},{}\n",
                self.derivative_norms[0][k], self.derivative_norms[1][k]
            ));
        }
        out
    }
}

fn rk4_step<F>(rhs: &mut F, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let shifted = |k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = rhs(y)?;
    let k2 = rhs(&shifted(&k1, 0.5 * h))?;
    let k3 = rhs(&shifted(&k2, 0.5 * h))?;
    let k4 = rhs(&shifted(&k3, h))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Predicate on a flat state that ends an integration early.
type StopFn<'a> = &'a dyn Fn(&[f64]) -> bool;

/// Integrates `y' = rhs(y)` and returns the states at every record time,
/// ending early after the first recorded state for which `stop` holds.
fn integrate<F>(mut rhs: F, y0: Vec<f64>, grid: &TimeGrid, stop: Option<StopFn<'_>>) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !all_finite(&y0) {
        return Err(Error::NonFinite("initial state"));
    }
    let steps = grid.steps();
    let h = grid.dt / grid.substeps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push(y.clone());
    for i in 0..steps {
        for j in 0..grid.substeps {
            y = rk4_step(&mut rhs, &y, h)?;
            let size = norm(&y);
            if !(size <= DIVERGENCE_NORM) {
                return Err(Error::StepDiverged {
                    t: grid.time(i) + (j + 1) as f64 * h,
                    norm: size,
                });
            }
        }
        out.push(y.clone());
        if stop.is_some_and(|f| f(&y)) {
            break;
        }
    }
    Ok(out)
}

fn record(
    inst: &ProblemInstance,
    order: usize,
    grid: &TimeGrid,
    states: Vec<TripleVec>,
    w_star: Option<&[f64]>,
) -> Result<Trajectory> {
    let times = (0..states.len()).map(|i| grid.time(i)).collect();
    let residual_norms = states
        .iter()
        .map(|s| residual(inst, &s.v1).map(|r| norm(&r)))
        .collect::<Result<Vec<_>>>()?;
    let distance_sq = w_star.map(|ws| states.iter().map(|s| norm_sq(&sub(&s.v1, ws))).collect());
    let tracked = |k: usize, v: &Vec<f64>| if order > k { norm_sq(v) } else { f64::NAN };
    let derivative_norms = [
        states.iter().map(|s| tracked(1, &s.v2)).collect(),
        states.iter().map(|s| tracked(2, &s.v3)).collect(),
    ];
    Ok(Trajectory {
        order,
        times,
        states,
        residual_norms,
        distance_sq,
        derivative_norms,
    })
}

fn check_solution(inst: &ProblemInstance, w_star: Option<&[f64]>) -> Result<()> {
    match w_star {
        Some(ws) => check_dim(inst.dim(), ws),
        None => Ok(()),
    }
}

/// RK4 on `v' = Φ(v)` from `init` at `grid.t0`.
pub fn integrate_third_order(
    inst: &ProblemInstance,
    params: &DynParams,
    init: &TripleVec,
    grid: &TimeGrid,
    w_star: Option<&[f64]>,
) -> Result<Trajectory> {
    params.validate()?;
    check_dim(inst.dim(), &init.v1)?;
    check_dim(inst.dim(), &init.v2)?;
    check_dim(inst.dim(), &init.v3)?;
    check_solution(inst, w_star)?;
    let flat = integrate(
        |y| Ok(phi_map(inst, params, &TripleVec::from_flat(y))?.flatten()),
        init.flatten(),
        grid,
        None,
    )?;
    let states = flat.iter().map(|y| TripleVec::from_flat(y)).collect();
    record(inst, 3, grid, states, w_star)
}

/// As [`integrate_third_order`], but ends after the first record with
/// `‖w − w*‖ ≤ stop_distance`.
pub fn integrate_third_order_until(
    inst: &ProblemInstance,
    params: &DynParams,
    init: &TripleVec,
    grid: &TimeGrid,
    w_star: &[f64],
    stop_distance: f64,
) -> Result<Trajectory> {
    params.validate()?;
    check_dim(inst.dim(), &init.v1)?;
    check_dim(inst.dim(), &init.v2)?;
    check_dim(inst.dim(), &init.v3)?;
    check_dim(inst.dim(), w_star)?;
    let n = inst.dim();
    let stop = |y: &[f64]| norm(&sub(&y[..n], w_star)) <= stop_distance;
    let flat = integrate(
        |y| Ok(phi_map(inst, params, &TripleVec::from_flat(y))?.flatten()),
        init.flatten(),
        grid,
        Some(&stop),
    )?;
    let states = flat.iter().map(|y| TripleVec::from_flat(y)).collect();
    record(inst, 3, grid, states, Some(w_star))
}

/// RK4 on `w' = −ρΨ(w)`.
pub fn integrate_first_order_baseline(
    inst: &ProblemInstance,
    rho: f64,
    init: &[f64],
    grid: &TimeGrid,
    w_star: Option<&[f64]>,
) -> Result<Trajectory> {
    positive("rho", rho)?;
    check_dim(inst.dim(), init)?;
    check_solution(inst, w_star)?;
    let flat = integrate(
        |y| Ok(residual(inst, y)?.iter().map(|r| -rho * r).collect()),
        init.to_vec(),
        grid,
        None,
    )?;
    let states = flat.into_iter().map(TripleVec::at_rest).collect();
    record(inst, 1, grid, states, w_star)
}

/// RK4 on `w'' + κw' + ρΨ(w) = 0` with constant `κ`, `ρ`.
pub fn integrate_second_order_baseline(
    inst: &ProblemInstance,
    kappa: f64,
    rho: f64,
    init: (&[f64], &[f64]),
    grid: &TimeGrid,
    w_star: Option<&[f64]>,
) -> Result<Trajectory> {
    positive("kappa", kappa)?;
    positive("rho", rho)?;
    let n = inst.dim();
    check_dim(n, init.0)?;
    check_dim(n, init.1)?;
    check_solution(inst, w_star)?;
    let mut y0 = init.0.to_vec();
    y0.extend_from_slice(init.1);
    let flat = integrate(
        |y| {
            let (w, v) = y.split_at(n);
            let psi = residual(inst, w)?;
            let mut dy = v.to_vec();
            dy.extend((0..n).map(|i| -kappa * v[i] - rho * psi[i]));
            Ok(dy)
        },
        y0,
        grid,
        None,
    )?;
    let states = flat
        .into_iter()
        .map(|y| TripleVec {
            v1: y[..n].to_vec(),
            v2: y[n..].to_vec(),
            v3: vec![0.0; n],
        })
        .collect();
    record(inst, 2, grid, states, w_star)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn sample_point(rng: &mut rng::Rng, n: usize) -> Vec<f64> {
    rng::gaussian_vec(rng, n).iter().map(|x| 2.0 * x).collect()
}

/// Samples `‖Ψ(x) − Ψ(y)‖ ≤ (2η + γβ)‖x − y‖` on random pairs.
pub fn check_residual_lipschitz(inst: &ProblemInstance, pairs: usize, seed: u64) -> Result<AuditCheck> {
    let l = inst.residual_lipschitz();
    let mut rng = rng::seeded(seed);
    let mut t = AuditCheck::start("residual.lipschitz", AUDIT_TOL);
    for _ in 0..pairs {
        let x = sample_point(&mut rng, inst.dim());
        let y = sample_point(&mut rng, inst.dim());
        let gap = distance(&residual(inst, &x)?, &residual(inst, &y)?);
        t.record(l * distance(&x, &y) - gap);
    }
    Ok(t.finish())
}

/// Samples `‖Φ(u) − Φ(v)‖ ≤ L_Φ‖u − v‖` with the bound of
/// [`phi_lipschitz_bound`].
pub fn check_phi_lipschitz(inst: &ProblemInstance, params: &DynParams, pairs: usize, seed: u64) -> Result<AuditCheck> {
    let l = phi_lipschitz_bound(params, inst.residual_lipschitz());
    let n = inst.dim();
    let mut rng = rng::seeded(seed);
    let mut t = AuditCheck::start("phi.lipschitz", AUDIT_TOL);
    for _ in 0..pairs {
        let u = TripleVec::from_flat(&sample_point(&mut rng, 3 * n));
        let v = TripleVec::from_flat(&sample_point(&mut rng, 3 * n));
        let gap = phi_map(inst, params, &u)?.sub(&phi_map(inst, params, &v)?).norm();
        t.record(l * u.sub(&v).norm() - gap);
    }
    Ok(t.finish())
}

/// Samples the residual estimates around a solution `w*`:
/// `⟨w − w*, Ψ(w)⟩ ≥ c₁‖Ψ(w)‖²` and `c‖w − w*‖ ≤ ‖Ψ(w)‖` (enforced), and
/// `⟨Ψ(w), w − w*⟩ ≥ c‖w − w*‖²` (logged only).
pub fn check_lemma_estimates(inst: &ProblemInstance, w_star: &[f64], points: usize, seed: u64) -> Result<AuditReport> {
    check_dim(inst.dim(), w_star)?;
    let c = inst.c();
    let c1 = inst.c1()?;
    let mut rng = rng::seeded(seed);
    let mut cocoercive = AuditCheck::start("lemma.cocoercivity", AUDIT_TOL);
    let mut error_bound = AuditCheck::start("lemma.error-bound", AUDIT_TOL);
    let mut growth = AuditCheck::start("lemma.quadratic-growth", AUDIT_TOL).logged_only();
    for _ in 0..points {
        // radii spread over several decades around w*
        let radius = 10f64.powf(rng::uniform(&mut rng, -3.0, 0.5));
        let dir = rng::gaussian_vec(&mut rng, inst.dim());
        let scale = radius / norm(&dir).max(f64::MIN_POSITIVE);
        let w: Vec<f64> = w_star.iter().zip(&dir).map(|(s, d)| s + scale * d).collect();
        let e = sub(&w, w_star);
        let psi = residual(inst, &w)?;
        cocoercive.record(dot(&e, &psi) - c1 * norm_sq(&psi));
        error_bound.record(norm(&psi) - c * norm(&e));
        growth.record(dot(&psi, &e) - c * norm_sq(&e));
    }
    let mut report = AuditReport::default();
    for t in [cocoercive, error_bound, growth] {
        report.push(t.finish());
    }
    Ok(report)
}
