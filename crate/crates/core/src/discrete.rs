//! The explicit scheme
//! `w^{Δ³}(k) + a₂w^{Δ²}(k) + a₁w^{Δ}(k) + a₀Ψ(w(k)) = 0`, solved forward as
//! a three-term recursion, and the difference-calculus identities used in
//! its analysis.

use serde::Serialize;

use crate::audit::{AuditCheck, AuditReport};
use crate::dynamics::{residual, DynParams, DIVERGENCE_NORM};
use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::rng;
use crate::vector::{check_dim, dot, norm, norm_sq, sub};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-10;

/// `p`-fold forward difference `z^{Δ(p)}(k)`; the result has `len − p` entries.
pub fn forward_difference(z: &[Vec<f64>], p: usize) -> Result<Vec<Vec<f64>>> {
    if p == 0 {
        return Err(Error::InvalidArgument("difference order must be >= 1".into()));
    }
    if z.len() <= p {
        return Err(Error::LengthTooShort { len: z.len(), order: p });
    }
    let mut cur = z.to_vec();
    for _ in 0..p {
        cur = cur.windows(2).map(|w| sub(&w[1], &w[0])).collect();
    }
    Ok(cur)
}

fn check_history(inst: &ProblemInstance, w: [&[f64]; 3]) -> Result<()> {
    for v in w {
        check_dim(inst.dim(), v)?;
    }
    Ok(())
}

/// `w(k+3) = (3 − a₂)w(k+2) + (2a₂ − a₁ − 3)w(k+1) + (a₁ + 1 − a₂)w(k) − a₀Ψ(w(k))`.
pub fn step_scheme(
    inst: &ProblemInstance,
    params: &DynParams,
    w_k: &[f64],
    w_k1: &[f64],
    w_k2: &[f64],
) -> Result<Vec<f64>> {
    check_history(inst, [w_k, w_k1, w_k2])?;
    let DynParams { a0, a1, a2 } = *params;
    let (c2, c1, c0) = (3.0 - a2, 2.0 * a2 - a1 - 3.0, a1 + 1.0 - a2);
    let psi = residual(inst, w_k)?;
    Ok((0..inst.dim())
        .map(|i| c2 * w_k2[i] + c1 * w_k1[i] + c0 * w_k[i] - a0 * psi[i])
        .collect())
}

/// The same update as a forward-backward step with two momentum terms:
/// `w(k+2) + (2 − a₂)(w(k+2) − w(k+1)) + (a₂ − a₁ − 1)(w(k+1) − w(k)) − a₀Ψ(w(k))`.
/// Equal histories at a zero of `Ψ` are reproduced exactly.
pub fn step_double_momentum(
    inst: &ProblemInstance,
    params: &DynParams,
    w_k: &[f64],
    w_k1: &[f64],
    w_k2: &[f64],
) -> Result<Vec<f64>> {
    check_history(inst, [w_k, w_k1, w_k2])?;
    let DynParams { a0, a1, a2 } = *params;
    let psi = residual(inst, w_k)?;
    Ok((0..inst.dim())
        .map(|i| w_k2[i] + (2.0 - a2) * (w_k2[i] - w_k1[i]) + (a2 - a1 - 1.0) * (w_k1[i] - w_k[i]) - a0 * psi[i])
        .collect())
}

/// Recorded run of the scheme.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterateHistory {
    pub iterates: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    /// `x(k) = ‖w(k) − w*‖²` when a solution was supplied.
    pub distance_sq: Option<Vec<f64>>,
    /// `y_p(k) = ‖w^{Δ(p)}(k)‖²` for `p = 1, 2, 3`; entry `p − 1` has
    /// `len − p` values.
    pub difference_norms: [Vec<f64>; 3],
    /// `‖w^{Δ³} + a₂w^{Δ²} + a₁w^{Δ} + a₀Ψ(w(k))‖ / max(1, stencil norm)`
    /// for each recorded `k`.
    pub consistency: Vec<f64>,
    pub converged: bool,
}

impl IterateHistory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// `‖w(k) − w*‖` per iterate.
    pub fn distances(&self) -> Option<Vec<f64>> {
        self.distance_sq.as_ref().map(|d| d.iter().map(|x| x.sqrt()).collect())
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("histories are nonempty")
    }

    pub fn max_consistency(&self) -> f64 {
        self.consistency.iter().copied().fold(0.0, f64::max)
    }

    /// Columns `k, w0 … w{n−1}, residual_norm, [x,] y1, y2, y3`; differences
    /// that run past the end of the history are written as NaN.
    pub fn to_csv(&self) -> String {
        let n = self.iterates[0].len();
        let mut out = String::from("k");
        for i in 0..n {
            out.push_str(&format!(",w{i}"));
        }
        out.push_str(",residual_norm");
        if self.distance_sq.is_some() {
            out.push_str(",x");
        }
        out.push_str(",y1,y2,y3\n");
        for (k, w) in self.iterates.iter().enumerate() {
            out.push_str(&k.to_string());
            for x in w {
                out.push_str(&format!(",{x}"));
            }
            out.push_str(&format!(",{}", self.residual_norms[k]));
            if let Some(d) = &self.distance_sq {
                out.push_str(&format!(",{}", d[k]));
            }
            for y in &self.difference_norms {
                out.push_str(&format!(",{}", y.get(k).copied().unwrap_or(f64::NAN)));
            }
            out.push('\n');
        }
        out
    }
}

/// Iterates the scheme from `(w(0), w(1), w(2))` until `‖Ψ(w(k))‖ ≤ tol` at
/// the newest iterate (at least one step is always taken) or `k = max_iter`.
pub fn run_scheme(
    inst: &ProblemInstance,
    params: &DynParams,
    init: (&[f64], &[f64], &[f64]),
    max_iter: usize,
    tol: f64,
    w_star: Option<&[f64]>,
) -> Result<IterateHistory> {
    params.validate()?;
    if max_iter < 3 {
        return Err(Error::InvalidArgument("max_iter must be >= 3".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    check_history(inst, [init.0, init.1, init.2])?;
    if let Some(ws) = w_star {
        check_dim(inst.dim(), ws)?;
    }
    let mut iterates = vec![init.0.to_vec(), init.1.to_vec(), init.2.to_vec()];
    let mut residuals = Vec::with_capacity(iterates.len());
    for w in &iterates {
        residuals.push(residual(inst, w)?);
    }
    let mut converged = false;
    while iterates.len() <= max_iter {
        let k = iterates.len() - 3;
        let next = step_double_momentum(inst, params, &iterates[k], &iterates[k + 1], &iterates[k + 2])?;
        let size = norm(&next);
        if !(size <= DIVERGENCE_NORM) {
            return Err(Error::Diverged { k: k + 3, norm: size });
        }
        let psi = residual(inst, &next)?;
        let done = norm(&psi) <= tol;
        iterates.push(next);
        residuals.push(psi);
        if done {
            converged = true;
            break;
        }
    }

    let consistency = (0..iterates.len() - 3)
        .map(|k| {
            let (w0, w1, w2, w3) = (&iterates[k], &iterates[k + 1], &iterates[k + 2], &iterates[k + 3]);
            let scale = [w0, w1, w2, w3].iter().map(|w| norm(w)).fold(1.0, f64::max);
            let gap: Vec<f64> = (0..inst.dim())
                .map(|i| {
                    let d1 = w1[i] - w0[i];
                    let d2 = w2[i] - 2.0 * w1[i] + w0[i];
                    let d3 = w3[i] - 3.0 * w2[i] + 3.0 * w1[i] - w0[i];
                    d3 + params.a2 * d2 + params.a1 * d1 + params.a0 * residuals[k][i]
                })
                .collect();
            norm(&gap) / scale
        })
        .collect();
    let difference_norms = [1, 2, 3].map(|p| {
        forward_difference(&iterates, p)
            .expect("history has at least four iterates")
            .iter()
            .map(|d| norm_sq(d))
            .collect()
    });
    Ok(IterateHistory {
        residual_norms: residuals.iter().map(|r| norm(r)).collect(),
        distance_sq: w_star.map(|ws| iterates.iter().map(|w| norm_sq(&sub(w, ws))).collect()),
        difference_norms,
        consistency,
        converged,
        iterates,
    })
}

fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0)
}

fn inner_at(y: &[Vec<f64>], z: &[Vec<f64>], k: usize) -> f64 {
    dot(&y[k], &z[k])
}

/// Sides of `⟨y, z⟩^Δ(k) = ⟨y^Δ, z^Δ⟩ + ⟨y^Δ, z⟩ + ⟨y, z^Δ⟩`.
fn product_rule(y: &[Vec<f64>], z: &[Vec<f64>], k: usize) -> (f64, f64) {
    let dy = sub(&y[k + 1], &y[k]);
    let dz = sub(&z[k + 1], &z[k]);
    let lhs = inner_at(y, z, k + 1) - inner_at(y, z, k);
    let rhs = dot(&dy, &dz) + dot(&dy, &z[k]) + dot(&y[k], &dz);
    (lhs, rhs)
}

/// Sides of `θ^{k+1} z^Δ(k) = (θᵏz)^Δ(k) + (1 − θ)θᵏ z(k)`, compared in norm.
fn weighted_shift(theta: f64, z: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let tk = theta.powi(k as i32);
    let tk1 = theta.powi(k as i32 + 1);
    let lhs = z[k + 1].iter().zip(&z[k]).map(|(a, b)| tk1 * (a - b)).collect();
    let rhs = z[k + 1]
        .iter()
        .zip(&z[k])
        .map(|(a, b)| (tk1 * a - tk * b) + (1.0 - theta) * tk * b)
        .collect();
    (lhs, rhs)
}

/// Sides of `(‖x‖²)^Δ(k) = ‖x^Δ(k)‖² + 2⟨x^Δ(k), x(k)⟩`.
fn square_norm(x: &[Vec<f64>], k: usize) -> (f64, f64) {
    let dx = sub(&x[k + 1], &x[k]);
    (
        norm_sq(&x[k + 1]) - norm_sq(&x[k]),
        norm_sq(&dx) + 2.0 * dot(&dx, &x[k]),
    )
}

/// Evaluates the three difference identities on random Gaussian sequences
/// and reports the worst relative violation of each.
pub fn check_difference_identities(seed: u64, trials: usize) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    const LEN: usize = 8;
    let mut rng = rng::seeded(seed);
    let mut product = AuditCheck::start("difference.product-rule", IDENTITY_TOL);
    let mut shift = AuditCheck::start("difference.weighted-shift", IDENTITY_TOL);
    let mut square = AuditCheck::start("difference.square-norm", IDENTITY_TOL);
    for _ in 0..trials {
        let dim = 1 + (rng::uniform(&mut rng, 0.0, 5.0) as usize);
        let theta = rng::uniform(&mut rng, 0.1, 2.0);
        let mut seq = || -> Vec<Vec<f64>> { (0..LEN).map(|_| rng::gaussian_vec(&mut rng, dim)).collect() };
        let (y, z) = (seq(), seq());
        for k in 0..LEN - 1 {
            let (l, r) = product_rule(&y, &z, k);
            product.record(-relative_gap(l, r));
            let (l, r) = weighted_shift(theta, &z, k);
            shift.record(-norm(&sub(&l, &r)) / norm(&l).max(norm(&r)).max(1.0));
            let (l, r) = square_norm(&y, k);
            square.record(-relative_gap(l, r));
        }
    }
    let mut report = AuditReport::default();
    for t in [product, shift, square] {
        report.push(t.finish());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::canonical_affine_instance;
    use proptest::prelude::*;

    fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    fn linear_rate() -> DynParams {
        DynParams::new(0.0015, 0.25, 0.9).unwrap()
    }

    #[test]
    fn differences_of_powers() {
        let k2: Vec<f64> = (0..6).map(|k| (k * k) as f64).collect();
        let k3: Vec<f64> = (0..6).map(|k| (k * k * k) as f64).collect();
        assert!(forward_difference(&scalars(&k2), 2)
            .unwrap()
            .iter()
            .all(|d| d[0] == 2.0));
        assert!(forward_difference(&scalars(&k3), 3)
            .unwrap()
            .iter()
            .all(|d| d[0] == 6.0));
        let c = scalars(&[4.0; 5]);
        assert!(forward_difference(&c, 1).unwrap().iter().all(|d| d[0] == 0.0));
        assert_eq!(
            forward_difference(&c[..2], 2).unwrap_err(),
            Error::LengthTooShort { len: 2, order: 2 }
        );
    }

    #[test]
    fn step_hand_value() {
        let inst = ProblemInstance::canonical();
        let p = DynParams::new(0.005, 0.25, 0.9).unwrap();
        // coefficients 2.1, −1.45, 0.35 sum to 1; Ψ(1) = 1
        let w = step_scheme(&inst, &p, &[1.0], &[1.0], &[1.0]).unwrap();
        assert!((w[0] - 0.995).abs() < 1e-14);
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let inst = ProblemInstance::canonical();
        let p = DynParams::new(0.37, 1.3, 2.9).unwrap();
        assert_eq!(
            step_double_momentum(&inst, &p, &[0.0], &[0.0], &[0.0]).unwrap(),
            vec![0.0]
        );
        let w = step_scheme(&inst, &p, &[0.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(w, vec![0.0]);
    }

    #[test]
    fn run_from_solution_stops_after_one_step() {
        let inst = ProblemInstance::canonical();
        let z = [0.0];
        let h = run_scheme(&inst, &linear_rate(), (&z, &z, &z), 100, 1e-10, Some(&z)).unwrap();
        assert_eq!(h.len(), 4);
        assert!(h.converged);
    }

    #[test]
    fn feasible_run_converges_geometrically() {
        let inst = ProblemInstance::canonical();
        let w0 = [0.9];
        let h = run_scheme(&inst, &linear_rate(), (&w0, &w0, &w0), 100_000, 1e-10, Some(&[0.0])).unwrap();
        assert!(h.converged);
        let d = h.distances().unwrap();
        let tail = &d[d.len() / 2..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
        assert!(h.max_consistency() <= 1e-12);
    }

    #[test]
    fn large_a0_diverges() {
        let inst = ProblemInstance::canonical();
        let p = DynParams::new(100.0, 0.25, 0.9).unwrap();
        let w0 = [0.5];
        let err = run_scheme(&inst, &p, (&w0, &w0, &w0), 10_000, 1e-10, None).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn history_csv_layout() {
        let inst = ProblemInstance::canonical();
        let w0 = [0.5];
        let h = run_scheme(&inst, &linear_rate(), (&w0, &w0, &w0), 5, 1e-10, Some(&[0.0])).unwrap();
        let csv = h.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "k,w0,residual_norm,x,y1,y2,y3");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[6].ends_with("NaN,NaN,NaN"));
    }

    #[test]
    fn identities_on_random_sequences() {
        let report = check_difference_identities(9, 100).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn weighted_shift_on_powers_of_two() {
        let z = scalars(&(0..10).map(|k| 2f64.powi(k)).collect::<Vec<_>>());
        for k in 0..9 {
            let (l, r) = weighted_shift(2.0, &z, k);
            assert_eq!(l, r);
        }
    }

    #[test]
    fn identities_on_constant_sequences() {
        let c = vec![vec![1.5, -2.0]; 4];
        assert_eq!(product_rule(&c, &c, 1), (0.0, 0.0));
        assert_eq!(square_norm(&c, 0), (0.0, 0.0));
        let (l, r) = weighted_shift(0.5, &c, 2);
        assert!(norm(&sub(&l, &r)) < 1e-15);
    }

    proptest! {
        #[test]
        fn forms_agree(
            a0 in 0.001f64..2.0, a1 in 0.01f64..5.0, a2 in 0.01f64..5.0,
            w in proptest::collection::vec(-3.0f64..3.0, 30),
        ) {
            let inst = canonical_affine_instance();
            let p = DynParams::new(a0, a1, a2).unwrap();
            let x = step_scheme(&inst, &p, &w[..10], &w[10..20], &w[20..]).unwrap();
            let y = step_double_momentum(&inst, &p, &w[..10], &w[10..20], &w[20..]).unwrap();
            let scale = norm(&w).max(1.0) * (1.0 + a1 + a2);
            prop_assert!(norm(&sub(&x, &y)) <= 1e-14 * scale);
        }

        #[test]
        fn coefficients_sum_to_one(a1 in 0.0f64..10.0, a2 in 0.0f64..10.0) {
            let s = (3.0 - a2) + (2.0 * a2 - a1 - 3.0) + (a1 + 1.0 - a2);
            prop_assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
