//! The generalized h-projection `P_Ω^{γh}(w) = argmin_{v∈Ω} γh(v) + ½‖w − v‖²`.
//!
//! Closed forms cover every combination of {whole space, box, ball} with
//! {zero, linear, separable quadratic} `h`. Anything else goes through a
//! projected-gradient inner solve, which also serves as the independent
//! route the closed forms are audited against.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audit::{AuditCheck, AuditReport};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::vector::{check_dim, dot, norm, sub};

/// Gradient-map tolerance of the inner solver.
pub const INNER_TOL: f64 = 1e-12;
pub const INNER_MAX_ITER: usize = 100_000;
/// Slack tolerance used by the prox audits.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum FeasibleSet {
    WholeSpace,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl FeasibleSet {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let set = FeasibleSet::Box { lo, hi };
        set.validate()?;
        Ok(set)
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = FeasibleSet::Ball { center, radius };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::WholeSpace => Ok(()),
            FeasibleSet::Box { lo, hi } => {
                check_dim(lo.len(), hi)?;
                if lo.is_empty() {
                    return Err(Error::InvalidArgument("box of dimension 0".into()));
                }
                if lo.iter().chain(hi).any(|x| x.is_nan()) {
                    return Err(Error::NonFinite("box bounds"));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::InvalidArgument("box needs lo <= hi".into()));
                }
                Ok(())
            }
            FeasibleSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidArgument("ball of dimension 0".into()));
                }
                if !center.iter().all(|x| x.is_finite()) {
                    return Err(Error::NonFinite("ball center"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidArgument("ball radius must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::WholeSpace => None,
            FeasibleSet::Box { lo, .. } => Some(lo.len()),
            FeasibleSet::Ball { center, .. } => Some(center.len()),
        }
    }

    /// Metric projection onto the set.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace => w.to_vec(),
            FeasibleSet::Box { lo, hi } => w
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| x.clamp(*l, *h))
                .collect(),
            FeasibleSet::Ball { center, radius } => {
                let offset = sub(w, center);
                let len = norm(&offset);
                if len <= *radius {
                    w.to_vec()
                } else {
                    let s = radius / len;
                    center.iter().zip(&offset).map(|(c, o)| c + s * o).collect()
                }
            }
        }
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::WholeSpace => true,
            FeasibleSet::Box { lo, hi } => w
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| *x >= l - tol && *x <= h + tol),
            FeasibleSet::Ball { center, radius } => norm(&sub(w, center)) <= radius + tol,
        }
    }

    /// Uniform sample from the set; the whole space is sampled as N(0, 9 I).
    pub fn sample(&self, dim: usize, rng: &mut Rng) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace => rng::gaussian_vec(rng, dim).into_iter().map(|x| 3.0 * x).collect(),
            FeasibleSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| rng::uniform(rng, *l, *h)).collect(),
            FeasibleSet::Ball { center, radius } => {
                let n = center.len();
                let mut dir = rng::gaussian_vec(rng, n);
                let len = norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng::uniform(rng, 0.0, 1.0).powf(1.0 / n as f64);
                for (d, c) in dir.iter_mut().zip(center) {
                    *d = c + r * *d / len;
                }
                dir
            }
        }
    }

    /// A point near the set, possibly outside it.
    fn sample_nearby(&self, dim: usize, rng: &mut Rng) -> Vec<f64> {
        let base = self.sample(dim, rng);
        let spread = rng::uniform(rng, 0.0, 2.0);
        base.iter()
            .zip(rng::gaussian_vec(rng, dim))
            .map(|(b, g)| b + spread * g)
            .collect()
    }
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A user-supplied convex `h` with a (sub)gradient oracle.
#[derive(Clone)]
pub struct CustomH {
    pub value: ScalarFn,
    pub gradient: GradientFn,
}

impl fmt::Debug for CustomH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomH { .. }")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum HSpec {
    Zero,
    /// `h(v) = ⟨s, v⟩`
    Linear {
        s: Vec<f64>,
    },
    /// `h(v) = ½ Σ qᵢ vᵢ²` with `q ≥ 0`
    SeparableQuadratic {
        q: Vec<f64>,
    },
    #[serde(skip)]
    Custom(CustomH),
}

impl HSpec {
    pub fn custom(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        HSpec::Custom(CustomH {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HSpec::Zero | HSpec::Custom(_) => Ok(()),
            HSpec::Linear { s } => {
                if s.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::NonFinite("linear h"))
                }
            }
            HSpec::SeparableQuadratic { q } => {
                if q.iter().all(|x| x.is_finite() && *x >= 0.0) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(
                        "separable-quadratic h needs finite q >= 0".into(),
                    ))
                }
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            HSpec::Linear { s } => Some(s.len()),
            HSpec::SeparableQuadratic { q } => Some(q.len()),
            HSpec::Zero | HSpec::Custom(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, HSpec::Zero)
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        match self {
            HSpec::Zero => 0.0,
            HSpec::Linear { s } => dot(s, v),
            HSpec::SeparableQuadratic { q } => 0.5 * q.iter().zip(v).map(|(qi, vi)| qi * vi * vi).sum::<f64>(),
            HSpec::Custom(c) => (c.value)(v),
        }
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        match self {
            HSpec::Zero => vec![0.0; v.len()],
            HSpec::Linear { s } => s.clone(),
            HSpec::SeparableQuadratic { q } => q.iter().zip(v).map(|(qi, vi)| qi * vi).collect(),
            HSpec::Custom(c) => (c.gradient)(v),
        }
    }
}

fn check_inputs(omega: &FeasibleSet, h: &HSpec, gamma: f64, w: &[f64]) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if w.is_empty() {
        return Err(Error::InvalidArgument("empty point".into()));
    }
    if !w.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("prox input"));
    }
    if let Some(n) = omega.dim() {
        check_dim(n, w)?;
    }
    if let Some(n) = h.dim() {
        check_dim(n, w)?;
    }
    Ok(())
}

/// `P_Ω^{γh}(w)`, exact for the named families.
pub fn prox(omega: &FeasibleSet, h: &HSpec, gamma: f64, w: &[f64]) -> Result<Vec<f64>> {
    check_inputs(omega, h, gamma, w)?;
    match h {
        HSpec::Zero => Ok(omega.project(w)),
        // γ⟨s,v⟩ + ½‖w − v‖² = ½‖v − (w − γs)‖² + const
        HSpec::Linear { s } => {
            let shifted: Vec<f64> = w.iter().zip(s).map(|(wi, si)| wi - gamma * si).collect();
            Ok(omega.project(&shifted))
        }
        HSpec::SeparableQuadratic { q } => match omega {
            FeasibleSet::WholeSpace => Ok(shrink(w, q, gamma)),
            // separable objective and separable set: clamp each coordinate
            FeasibleSet::Box { .. } => Ok(omega.project(&shrink(w, q, gamma))),
            FeasibleSet::Ball { center, radius } => Ok(ball_quadratic(center, *radius, q, gamma, w)),
        },
        HSpec::Custom(_) => prox_inner_solve(omega, h, gamma, w),
    }
}

fn shrink(w: &[f64], q: &[f64], gamma: f64) -> Vec<f64> {
    w.iter().zip(q).map(|(wi, qi)| wi / (1.0 + gamma * qi)).collect()
}

/// Ball with separable quadratic h. KKT gives
/// `v(μ) = (w + μc) / (1 + γq + μ)` with the multiplier μ ≥ 0 fixed by
/// `‖v(μ) − c‖ = r`, which is monotone in μ and solved by bisection.
fn ball_quadratic(center: &[f64], radius: f64, q: &[f64], gamma: f64, w: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = w
        .iter()
        .zip(center.iter().zip(q))
        .map(|(wi, (ci, qi))| wi - ci * (1.0 + gamma * qi))
        .collect();
    let offset_norm = |mu: f64| -> f64 {
        r.iter()
            .zip(q)
            .map(|(ri, qi)| {
                let d = 1.0 + gamma * qi + mu;
                (ri / d) * (ri / d)
            })
            .sum::<f64>()
            .sqrt()
    };
    let point = |mu: f64| -> Vec<f64> {
        r.iter()
            .zip(center.iter().zip(q))
            .map(|(ri, (ci, qi))| ci + ri / (1.0 + gamma * qi + mu))
            .collect()
    };
    if offset_norm(0.0) <= radius {
        return point(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, norm(&r) / radius);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if offset_norm(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    point(hi)
}

/// Projected-gradient solve of `min_{v∈Ω} γh(v) + ½‖w − v‖²` using only
/// `h.value`/`h.gradient` and the metric projection. The step is halved until
/// the local gradient-Lipschitz estimate accepts it; iteration stops when the
/// gradient-map norm falls below [`INNER_TOL`].
pub fn prox_inner_solve(omega: &FeasibleSet, h: &HSpec, gamma: f64, w: &[f64]) -> Result<Vec<f64>> {
    check_inputs(omega, h, gamma, w)?;
    let objective_grad = |v: &[f64]| -> Vec<f64> {
        let gh = h.gradient(v);
        v.iter()
            .zip(w)
            .zip(gh)
            .map(|((vi, wi), gi)| vi - wi + gamma * gi)
            .collect()
    };
    let scale = 1.0_f64.max(norm(w));
    let mut v = omega.project(w);
    let mut grad = objective_grad(&v);
    let mut step = 1.0_f64;
    let mut map_norm = f64::INFINITY;
    for _ in 0..INNER_MAX_ITER {
        let (trial, trial_grad) = loop {
            let moved: Vec<f64> = v.iter().zip(&grad).map(|(vi, gi)| vi - step * gi).collect();
            let trial = omega.project(&moved);
            let trial_grad = objective_grad(&trial);
            let dv = norm(&sub(&trial, &v));
            let dg = norm(&sub(&trial_grad, &grad));
            if step * dg <= dv * (1.0 + 1e-12) || step < 1e-14 {
                break (trial, trial_grad);
            }
            step *= 0.5;
        };
        map_norm = norm(&sub(&trial, &v)) / step;
        v = trial;
        grad = trial_grad;
        if !v.iter().all(|x| x.is_finite()) {
            break;
        }
        if map_norm <= INNER_TOL * scale {
            return Ok(v);
        }
        step = (2.0 * step).min(1.0);
    }
    Err(Error::InnerSolveFailed {
        iterations: INNER_MAX_ITER,
        residual: map_norm,
    })
}

/// Samples the three projection inequalities: the obtuse-angle property
/// (metric projection only), nonexpansiveness, and the variational
/// characterization of the prox point.
pub fn check_prox_inequalities(
    dim: usize,
    omega: &FeasibleSet,
    h: &HSpec,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut obtuse = h.is_zero().then(|| AuditCheck::start("prox.obtuse-angle", AUDIT_TOL));
    let mut nonexpansive = AuditCheck::start("prox.nonexpansive", AUDIT_TOL);
    let mut characterization = AuditCheck::start("prox.characterization", AUDIT_TOL);
    for _ in 0..trials {
        let w = omega.sample_nearby(dim, &mut rng);
        let u = omega.sample_nearby(dim, &mut rng);
        let v = omega.sample(dim, &mut rng);
        let pw = prox(omega, h, gamma, &w)?;
        let pu = prox(omega, h, gamma, &u)?;

        if let Some(t) = obtuse.as_mut() {
            t.record(dot(&sub(&w, &pw), &sub(&pw, &v)));
        }
        nonexpansive.record(norm(&sub(&w, &u)) - norm(&sub(&pw, &pu)));
        characterization.record(dot(&sub(&pw, &w), &sub(&v, &pw)) + gamma * h.value(&v) - gamma * h.value(&pw));
    }
    let mut report = AuditReport::default();
    report.push(match obtuse {
        Some(t) => t.finish(),
        None => AuditCheck::not_applicable("prox.obtuse-angle"),
    });
    report.push(nonexpansive.finish());
    report.push(characterization.finish());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::distance;

    fn quad(q: Vec<f64>) -> HSpec {
        HSpec::SeparableQuadratic { q }
    }

    #[test]
    fn whole_space_zero_is_identity() {
        let p = prox(&FeasibleSet::WholeSpace, &HSpec::Zero, 0.7, &[3.0, -7.0]).unwrap();
        assert_eq!(p, vec![3.0, -7.0]);
    }

    #[test]
    fn box_zero_clamps() {
        let omega = FeasibleSet::cube(2, 0.0, 1.0).unwrap();
        assert_eq!(prox(&omega, &HSpec::Zero, 1.0, &[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn whole_space_quadratic_matches_grid_search() {
        let h = quad(vec![1.0, 1.0]);
        let w = [2.0, 4.0];
        let p = prox(&FeasibleSet::WholeSpace, &h, 1.0, &w).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);

        // dense grid oracle on the separable objective, one coordinate at a time
        for (i, wi) in w.iter().enumerate() {
            let best = (0..=8000)
                .map(|k| -4.0 + k as f64 * 1e-3)
                .min_by(|a, b| {
                    let fa = 0.5 * a * a + 0.5 * (wi - a) * (wi - a);
                    let fb = 0.5 * b * b + 0.5 * (wi - b) * (wi - b);
                    fa.total_cmp(&fb)
                })
                .unwrap();
            assert!((best - p[i]).abs() <= 1e-3);
        }
    }

    #[test]
    fn box_linear_and_quadratic_closed_forms() {
        let omega = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let lin = HSpec::Linear { s: vec![1.0, -2.0] };
        assert_eq!(prox(&omega, &lin, 0.5, &[0.2, 0.3]).unwrap(), vec![-0.3, 1.0]);
        let q = quad(vec![1.0, 3.0]);
        assert_eq!(prox(&omega, &q, 1.0, &[4.0, 2.0]).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn ball_zero_is_radial() {
        let omega = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = prox(&omega, &HSpec::Zero, 1.0, &[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(prox(&omega, &HSpec::Zero, 1.0, &[0.1, 0.2]).unwrap(), vec![0.1, 0.2]);
    }

    #[test]
    fn ball_quadratic_lands_on_boundary() {
        let omega = FeasibleSet::ball(vec![0.5, -0.5, 0.0], 0.75).unwrap();
        let h = quad(vec![0.0, 1.0, 4.0]);
        let w = [3.0, -2.0, 1.0];
        let p = prox(&omega, &h, 0.5, &w).unwrap();
        let fallback = prox_inner_solve(&omega, &h, 0.5, &w).unwrap();
        assert!(norm(&sub(&p, &fallback)) < 1e-9);
        assert!((norm(&sub(&p, &[0.5, -0.5, 0.0])) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn custom_h_uses_inner_solver() {
        // h(v) = ½‖v‖² supplied as a callback must reproduce the closed form
        let h = HSpec::custom(|v| 0.5 * dot(v, v), |v| v.to_vec());
        let omega = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let p = prox(&omega, &h, 1.0, &[1.0, 5.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-11 && (p[1] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn nonsmooth_custom_h_can_exhaust_the_inner_solver() {
        // subgradient of |v| oscillates around the kink at the minimizer
        let h = HSpec::custom(|v| v[0].abs(), |v| vec![if v[0] >= 0.0 { 1.0 } else { -1.0 }]);
        let err = prox(&FeasibleSet::WholeSpace, &h, 1.0, &[0.5]).unwrap_err();
        assert!(matches!(err, Error::InnerSolveFailed { .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        let omega = FeasibleSet::cube(2, 0.0, 1.0).unwrap();
        assert!(prox(&omega, &HSpec::Zero, 0.0, &[0.0, 0.0]).is_err());
        assert!(prox(&omega, &HSpec::Zero, 1.0, &[0.0]).is_err());
        assert!(FeasibleSet::cube(2, 1.0, 0.0).is_err());
        assert!(FeasibleSet::ball(vec![0.0], 0.0).is_err());
        assert!(quad(vec![-1.0]).validate().is_err());
    }

    #[test]
    fn interior_points_are_fixed_for_projection() {
        let omega = FeasibleSet::cube(3, -1.0, 1.0).unwrap();
        let w = [0.25, -0.5, 0.9];
        assert_eq!(prox(&omega, &HSpec::Zero, 2.0, &w).unwrap(), w.to_vec());
    }

    #[test]
    fn whole_space_audit_has_zero_slack() {
        let report = check_prox_inequalities(3, &FeasibleSet::WholeSpace, &HSpec::Zero, 1.0, 200, 7).unwrap();
        assert!(report.passed());
        assert_eq!(report.get("prox.obtuse-angle").unwrap().worst_slack, 0.0);
        assert_eq!(report.get("prox.characterization").unwrap().worst_slack, 0.0);
    }

    #[test]
    fn box_audits_pass() {
        let omega = FeasibleSet::cube(4, 0.0, 1.0).unwrap();
        let zero = check_prox_inequalities(4, &omega, &HSpec::Zero, 1.0, 1000, 1).unwrap();
        assert!(zero.passed(), "{zero:?}");
        let h = quad(vec![0.5, 1.0, 2.0, 0.0]);
        let q = check_prox_inequalities(4, &omega, &h, 0.8, 1000, 2).unwrap();
        assert!(q.passed(), "{q:?}");
        assert!(!q.get("prox.obtuse-angle").unwrap().applicable);
    }

    #[test]
    fn omega_and_h_serialize_with_variant_tag() {
        let omega = FeasibleSet::cube(1, -1.0, 1.0).unwrap();
        let json = serde_json::to_string(&omega).unwrap();
        assert_eq!(json, r#"{"variant":"box","lo":[-1.0],"hi":[1.0]}"#);
        let h: HSpec = serde_json::from_str(r#"{"variant":"separable-quadratic","q":[1.0]}"#).unwrap();
        assert_eq!(h.value(&[2.0]), 2.0);
        assert!(serde_json::to_string(&HSpec::custom(|_| 0.0, |v| v.to_vec())).is_err());
    }

    proptest::proptest! {
        #[test]
        fn prox_is_feasible_nonexpansive_and_matches_fallback(
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            q in proptest::collection::vec(0.0f64..2.0, 3),
            gamma in 0.05f64..3.0,
            ball in proptest::bool::ANY,
        ) {
            let omega = if ball {
                FeasibleSet::ball(vec![0.2, -0.1, 0.0], 1.3).unwrap()
            } else {
                FeasibleSet::cube(3, -1.0, 1.0).unwrap()
            };
            let h = quad(q);
            let px = prox(&omega, &h, gamma, &x).unwrap();
            let py = prox(&omega, &h, gamma, &y).unwrap();
            proptest::prop_assert!(omega.contains(&px, 1e-12));
            proptest::prop_assert!(distance(&px, &py) <= distance(&x, &y) + AUDIT_TOL);
            let inner = prox_inner_solve(&omega, &h, gamma, &x).unwrap();
            proptest::prop_assert!(distance(&px, &inner) <= 1e-8);
        }
    }
}
