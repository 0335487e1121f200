//! Constant packs, the feasibility inequalities of the continuous and
//! discrete rate theorems, and samplers for the parameter regions that are
//! guaranteed to satisfy them.

use serde::{Deserialize, Serialize};

use crate::dynamics::DynParams;
use crate::error::{Error, Result};
use crate::rng;

/// Points in each of the log and linear grids scanned by the rate searches.
pub const SEARCH_GRID: usize = 10_000;
/// Bisection steps after the grid scan.
pub const SEARCH_BISECTIONS: usize = 60;
/// Relative margin kept inside every open region when sampling.
pub const REGION_MARGIN: f64 = 0.05;

/// Constants of the continuous rate conditions.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPack {
    pub C2: f64,
    pub C1: f64,
    pub C0: f64,
    pub A1: f64,
    pub A0: f64,
}

/// Constants of the discrete rate conditions.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePack {
    pub B2: f64,
    pub B1: f64,
    pub B0: f64,
    pub D1: f64,
    pub D0: f64,
    pub E0: f64,
}

pub fn continuous_pack(c1: f64, p: &DynParams) -> ContinuousPack {
    let DynParams { a0, a1, a2 } = *p;
    let r = c1 / a0;
    ContinuousPack {
        C2: r * a1,
        C1: r * a2 * a1 - 3.0,
        C0: r * a1 * a1 - 2.0 * a2,
        A1: r * a2,
        A0: r * (a2 * a2 - 2.0 * a1),
    }
}

pub fn discrete_pack(c1: f64, p: &DynParams) -> DiscretePack {
    let DynParams { a0, a1, a2 } = *p;
    let r = c1 / a0;
    DiscretePack {
        B2: r * a1 - 3.0,
        B1: r * a2 * a1 - 2.0 * a2 - 3.0,
        B0: r * a1 * a1 - 2.0 * a2 - a1,
        D1: r * (a2 - 2.0 * a1) + 3.0,
        D0: r * (a2 * a2 - 2.0 * a1 - a2 * a1) + a2 + 3.0,
        E0: r * (1.0 - a2 + a1) - 1.0,
    }
}

/// `δ = 1/(c₁²c²)`.
pub fn delta(c: f64, c1: f64) -> f64 {
    1.0 / (c1 * c1 * c * c)
}

/// One inequality `lhs ≥ 0` (or `> 0` when strict) evaluated at a rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub lhs: f64,
    /// Distance to the boundary; equals `lhs` for every condition here.
    pub slack: f64,
    pub strict: bool,
    pub pass: bool,
}

impl Condition {
    fn new(name: &'static str, lhs: f64, strict: bool) -> Self {
        let pass = if strict { lhs > 0.0 } else { lhs >= 0.0 };
        Self {
            name,
            lhs,
            slack: lhs,
            strict,
            pass,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// `ε` for the continuous conditions, `ξ` for the discrete ones.
    pub rate: f64,
    pub conditions: Vec<Condition>,
    pub verdict: Feasibility,
    /// Discrete only: the same conditions rewritten in `l = 1/(1 − ξ)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transformed: Option<Vec<Condition>>,
    /// Names of conditions whose two forms disagree on pass/fail.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub disagreements: Vec<&'static str>,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Feasibility::Feasible
    }

    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    fn from_conditions(rate: f64, conditions: Vec<Condition>) -> Self {
        let verdict = if conditions.iter().all(|c| c.pass) {
            Feasibility::Feasible
        } else {
            Feasibility::Infeasible
        };
        Self {
            rate,
            conditions,
            verdict,
            transformed: None,
            disagreements: Vec::new(),
        }
    }
}

pub const CONTINUOUS_NAMES: [&str; 6] = [
    "rate-cubic",
    "velocity-quadratic",
    "distance-quadratic",
    "velocity-linear",
    "acceleration-linear",
    "damping-dominance",
];

pub const DISCRETE_NAMES: [&str; 6] = [
    "rate-cubic",
    "first-difference-quadratic",
    "distance-quadratic",
    "first-difference-linear",
    "second-difference-linear",
    "damping-dominance",
];

fn continuous_lhs(k: &ContinuousPack, c: f64, c1: f64, p: &DynParams, e: f64) -> [f64; 6] {
    let DynParams { a0, a1, a2 } = *p;
    [
        -e * e * e + a2 * e * e - a1 * e + c1 * c * c * a0,
        k.C2 * e * e - k.C1 * e + k.C0,
        3.0 * e * e - 2.0 * a2 * e + a1,
        -2.0 * k.C2 * e + k.C1,
        -k.A1 * e + k.A0,
        a2 - 2.0 * e,
    ]
}

fn discrete_lhs(k: &DiscretePack, c: f64, c1: f64, p: &DynParams, x: f64) -> [f64; 6] {
    let DynParams { a0, a1, a2 } = *p;
    [
        -x * x * x + a2 * x * x - a1 * x + c1 * c * c * a0,
        k.B2 * x * x - k.B1 * x + k.B0,
        3.0 * x * x - 2.0 * a2 * x + a1,
        -2.0 * k.B2 * x + k.B1,
        -k.D1 * x + k.D0,
        a2 - 3.0 * x,
    ]
}

/// The discrete conditions multiplied through by powers of `l = 1/(1 − ξ)`.
fn discrete_lhs_transformed(k: &DiscretePack, c: f64, c1: f64, p: &DynParams, xi: f64) -> [f64; 6] {
    let DynParams { a0, a1, a2 } = *p;
    let l = 1.0 / (1.0 - xi);
    let m = 1.0 - l;
    [
        c1 * c * c * a0 * l * l * l + a1 * l * l * m + (a2 * l + m) * m * m,
        k.B0 * l * l + k.B1 * m * l + k.B2 * m * m,
        a1 * l * l + 2.0 * a2 * l * m + 3.0 * m * m,
        k.B1 * l + 2.0 * k.B2 * m,
        k.D0 * l + k.D1 * m,
        l * a2 + 3.0 * m,
    ]
}

fn all_pass(lhs: &[f64; 6]) -> bool {
    lhs[..5].iter().all(|v| *v >= 0.0) && lhs[5] > 0.0
}

fn conditions(names: [&'static str; 6], lhs: [f64; 6]) -> Vec<Condition> {
    (0..6).map(|i| Condition::new(names[i], lhs[i], i == 5)).collect()
}

/// Evaluates the six continuous exponential-rate conditions at `ε`.
pub fn check_continuous_rate(
    pack: &ContinuousPack,
    c: f64,
    c1: f64,
    params: &DynParams,
    eps: f64,
) -> Result<FeasibilityReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let lhs = continuous_lhs(pack, c, c1, params, eps);
    Ok(FeasibilityReport::from_conditions(
        eps,
        conditions(CONTINUOUS_NAMES, lhs),
    ))
}

/// Evaluates the six discrete linear-rate conditions at `ξ ∈ (0, 1)`, both
/// directly and in the `l = 1/(1 − ξ)` form, and records any pass/fail
/// disagreement between the two.
pub fn check_discrete_rate(
    pack: &DiscretePack,
    c: f64,
    c1: f64,
    params: &DynParams,
    xi: f64,
) -> Result<FeasibilityReport> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidXi(xi));
    }
    let direct = conditions(DISCRETE_NAMES, discrete_lhs(pack, c, c1, params, xi));
    let transformed = conditions(DISCRETE_NAMES, discrete_lhs_transformed(pack, c, c1, params, xi));
    let disagreements = direct
        .iter()
        .zip(&transformed)
        .filter(|(a, b)| a.pass != b.pass)
        .map(|(a, _)| a.name)
        .collect();
    let mut report = FeasibilityReport::from_conditions(xi, direct);
    report.transformed = Some(transformed);
    report.disagreements = disagreements;
    Ok(report)
}

/// `1/(1 − ξ)`.
pub fn l_of_xi(xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidXi(xi));
    }
    Ok(1.0 / (1.0 - xi))
}

/// The three standing inequalities of the discrete analysis and whether
/// each holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiscreteStanding {
    /// `(c₁/a₀)(1 − a₂ + a₁) > 1`
    pub momentum_balance: bool,
    /// `(c₁/a₀)(2a₁ − a₂) < 3`
    pub damping_balance: bool,
    /// `c₁a₁/a₀ > 3`
    pub friction_ratio: bool,
}

impl DiscreteStanding {
    pub fn holds(&self) -> bool {
        self.momentum_balance && self.damping_balance && self.friction_ratio
    }
}

pub fn check_discrete_standing(c1: f64, p: &DynParams) -> DiscreteStanding {
    let r = c1 / p.a0;
    DiscreteStanding {
        momentum_balance: r * (1.0 - p.a2 + p.a1) > 1.0,
        damping_balance: r * (2.0 * p.a1 - p.a2) < 3.0,
        friction_ratio: r * p.a1 > 3.0,
    }
}

/// Supremum of `{x ∈ (0, upper) : feasible(x)}` by a log grid and a linear
/// grid followed by bisection above the largest feasible grid point. The
/// returned value is itself feasible; 0 means no feasible point was found.
fn search_supremum(upper: f64, feasible: impl Fn(f64) -> bool) -> f64 {
    if !(upper > 0.0 && upper.is_finite()) {
        return 0.0;
    }
    let n = SEARCH_GRID;
    let log_lo = (upper * 1e-12).ln();
    let log_hi = upper.ln();
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (log_lo + (log_hi - log_lo) * i as f64 / n as f64).exp())
        .chain((1..=n).map(|i| upper * i as f64 / (n + 1) as f64))
        .filter(|x| *x > 0.0 && *x < upper)
        .collect();
    grid.sort_by(f64::total_cmp);
    let Some(pos) = grid.iter().rposition(|x| feasible(*x)) else {
        return 0.0;
    };
    let mut lo = grid[pos];
    let mut hi = grid.get(pos + 1).copied().unwrap_or(upper);
    for _ in 0..SEARCH_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `ε ∈ (0, a₂/2)` satisfying every continuous condition, or 0.
pub fn max_feasible_eps(pack: &ContinuousPack, c: f64, c1: f64, params: &DynParams) -> f64 {
    search_supremum(0.5 * params.a2, |e| all_pass(&continuous_lhs(pack, c, c1, params, e)))
}

/// Largest `ξ ∈ (0, min{1, a₂/3})` satisfying every discrete condition, or 0.
pub fn max_feasible_xi(pack: &DiscretePack, c: f64, c1: f64, params: &DynParams) -> f64 {
    search_supremum((params.a2 / 3.0).min(1.0), |x| {
        all_pass(&discrete_lhs(pack, c, c1, params, x))
    })
}

/// Parameter regions with guaranteed rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Exponential rate for some small `ε > 0`.
    #[serde(alias = "cor35")]
    SmallRate,
    /// Exponential rate `ε = 1`.
    #[serde(alias = "thm36")]
    UnitRate,
    /// Exponential rate `ε = 2`.
    #[serde(alias = "eps2")]
    DoubleRate,
    /// Linear rate of the discrete scheme.
    #[serde(alias = "cor43")]
    LinearRate,
    /// Both the small-rate and the linear-rate guarantees.
    Common,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::SmallRate,
        Region::UnitRate,
        Region::DoubleRate,
        Region::LinearRate,
        Region::Common,
    ];

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Region::LinearRate)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Region::LinearRate | Region::Common)
    }

    /// Rate fixed by the region, if any.
    pub fn fixed_eps(&self) -> Option<f64> {
        match self {
            Region::UnitRate => Some(1.0),
            Region::DoubleRate => Some(2.0),
            _ => None,
        }
    }
}

/// Interval ends of the two-sided regions: `a₂ > a2_min`,
/// `a1_lo < a₁ < a1_hi`, `a0_lo < a₀ < a0_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionBounds {
    pub a2_min: f64,
    pub a1_lo: f64,
    pub a1_hi: f64,
    pub a0_lo: f64,
    pub a0_hi: f64,
}

impl RegionBounds {
    pub fn nonempty(&self) -> bool {
        self.a1_lo < self.a1_hi && self.a0_lo < self.a0_hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Synthesized {
    pub region: Region,
    pub params: DynParams,
    /// A continuous rate at which every continuous condition holds.
    pub eps: Option<f64>,
    /// A discrete rate at which every discrete condition holds.
    pub xi: Option<f64>,
    pub bounds: Option<RegionBounds>,
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

/// `(1 + m)` to `1.5` times a strict lower bound.
fn above(rng: &mut rng::Rng, bound: f64) -> f64 {
    bound * rng::uniform(rng, 1.0 + REGION_MARGIN, 1.5)
}

/// A point at least `margin` (relative to the width) inside `(lo, hi)`.
fn inside(rng: &mut rng::Rng, lo: f64, hi: f64, what: &str) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::EmptyRegion(format!("{what}: interval ({lo}, {hi}) is empty")));
    }
    Ok(lo + (hi - lo) * rng::uniform(rng, REGION_MARGIN, 1.0 - REGION_MARGIN))
}

fn below(rng: &mut rng::Rng, bound: f64, what: &str) -> Result<f64> {
    inside(rng, 0.0, bound, what)
}

fn make_params(a0: f64, a1: f64, a2: f64) -> Result<DynParams> {
    DynParams::new(a0, a1, a2).map_err(|e| Error::EmptyRegion(format!("sampled tuple invalid: {e}")))
}

fn continuous_eps(c: f64, c1: f64, p: &DynParams, region: Region) -> Result<f64> {
    let pack = continuous_pack(c1, p);
    let eps = match region.fixed_eps() {
        Some(eps) => eps,
        None => max_feasible_eps(&pack, c, c1, p),
    };
    if eps > 0.0 && all_pass(&continuous_lhs(&pack, c, c1, p, eps)) {
        Ok(eps)
    } else {
        Err(Error::EmptyRegion(format!(
            "{region:?} sample {p:?} fails the continuous conditions"
        )))
    }
}

fn discrete_xi(c: f64, c1: f64, p: &DynParams, region: Region) -> Result<f64> {
    if !check_discrete_standing(c1, p).holds() {
        return Err(Error::EmptyRegion(format!(
            "{region:?} sample {p:?} violates the standing discrete inequalities"
        )));
    }
    let xi = max_feasible_xi(&discrete_pack(c1, p), c, c1, p);
    if xi > 0.0 {
        Ok(xi)
    } else {
        Err(Error::EmptyRegion(format!(
            "{region:?} sample {p:?} fails the discrete conditions"
        )))
    }
}

/// Samples the small-rate region `a₁ < a₂²/2`,
/// `a₀ < c₁·min{a₁a₂/3, a₁²/(2a₂)}` and finds a feasible `ε`.
pub fn synth_small_rate(c: f64, c1: f64, seed: u64) -> Result<Synthesized> {
    positive("c", c)?;
    positive("c1", c1)?;
    let mut rng = rng::seeded(seed);
    let a2 = rng::uniform(&mut rng, 0.5, 3.0);
    let a1 = below(&mut rng, a2 * a2 / 2.0, "a1")?;
    let a0 = below(&mut rng, c1 * (a1 * a2 / 3.0).min(a1 * a1 / (2.0 * a2)), "a0")?;
    let params = make_params(a0, a1, a2)?;
    let eps = continuous_eps(c, c1, &params, Region::SmallRate)?;
    Ok(Synthesized {
        region: Region::SmallRate,
        params,
        eps: Some(eps),
        xi: None,
        bounds: None,
    })
}

/// Bounds of the `ε = 1` region for a given `a₂` and `a₁`.
pub fn unit_rate_bounds(c: f64, c1: f64, a2: f64, a1: f64) -> RegionBounds {
    let d = delta(c, c1);
    RegionBounds {
        a2_min: 3f64.max(3.0 * d + 2.0).max(4.0 * d),
        a1_lo: (2.0 * a2 - 3.0).max(d * (2.0 * a2 - 3.0)),
        a1_hi: 0.5 * a2 * (a2 - 1.0),
        a0_lo: (a1 - a2 + 1.0) / (c1 * c * c),
        a0_hi: c1 * (a1 * (a2 - 2.0) / 3.0).min(a1 * (a1 - a2 + 1.0) / (2.0 * a2 - 3.0)),
    }
}

/// Bounds of the `ε = 2` region for a given `a₂` and `a₁`.
pub fn double_rate_bounds(c: f64, c1: f64, a2: f64, a1: f64) -> RegionBounds {
    let d = delta(c, c1);
    let gap = a1 - 2.0 * a2 + 4.0;
    RegionBounds {
        a2_min: (8.0 * d).max(6.0).max(6.0 * d + 4.0),
        a1_lo: (4.0 * (a2 - 3.0)).max(4.0 * d * (a2 - 3.0)),
        a1_hi: 0.5 * a2 * (a2 - 2.0),
        a0_lo: 2.0 / (c1 * c * c) * gap,
        a0_hi: c1 * a1 * (gap / (2.0 * (a2 - 3.0))).min((a2 - 4.0) / 3.0),
    }
}

fn synth_two_sided(
    c: f64,
    c1: f64,
    seed: u64,
    region: Region,
    bounds: fn(f64, f64, f64, f64) -> RegionBounds,
) -> Result<Synthesized> {
    positive("c", c)?;
    positive("c1", c1)?;
    let mut rng = rng::seeded(seed);
    let a2 = above(&mut rng, bounds(c, c1, 0.0, 0.0).a2_min);
    let b = bounds(c, c1, a2, 0.0);
    let a1 = inside(&mut rng, b.a1_lo, b.a1_hi, "a1")?;
    let b = bounds(c, c1, a2, a1);
    let a0 = inside(&mut rng, b.a0_lo, b.a0_hi, "a0")?;
    let params = make_params(a0, a1, a2)?;
    let eps = continuous_eps(c, c1, &params, region)?;
    Ok(Synthesized {
        region,
        params,
        eps: Some(eps),
        xi: None,
        bounds: Some(b),
    })
}

/// Samples the `ε = 1` region.
pub fn synth_unit_rate(c: f64, c1: f64, seed: u64) -> Result<Synthesized> {
    synth_two_sided(c, c1, seed, Region::UnitRate, unit_rate_bounds)
}

/// Samples the `ε = 2` region.
pub fn synth_double_rate(c: f64, c1: f64, seed: u64) -> Result<Synthesized> {
    synth_two_sided(c, c1, seed, Region::DoubleRate, double_rate_bounds)
}

/// Samples the discrete region `a₂ < 2`, `max{0, a₂ − 1} < a₁ < a₂²/(a₂ + 2)`,
/// `a₀ < c₁·min{a₁²/(a₁ + 2a₂), 1 − a₂ + a₁}` and finds a feasible `ξ`.
pub fn synth_linear_rate(c: f64, c1: f64, seed: u64) -> Result<Synthesized> {
    positive("c", c)?;
    positive("c1", c1)?;
    let mut rng = rng::seeded(seed);
    let a2 = below(&mut rng, 2.0, "a2")?;
    let a1 = inside(&mut rng, (a2 - 1.0).max(0.0), a2 * a2 / (a2 + 2.0), "a1")?;
    let a0 = below(&mut rng, c1 * (a1 * a1 / (a1 + 2.0 * a2)).min(1.0 - a2 + a1), "a0")?;
    let params = make_params(a0, a1, a2)?;
    let xi = discrete_xi(c, c1, &params, Region::LinearRate)?;
    Ok(Synthesized {
        region: Region::LinearRate,
        params,
        eps: None,
        xi: Some(xi),
        bounds: None,
    })
}

/// Samples `a₂ < 1`, `a₁ < a₂²/(a₂ + 2)`,
/// `a₀ < c₁·min{a₁a₂/3, a₁²/(a₁ + 2a₂)}`, which lies in both the small-rate
/// and the linear-rate regions.
pub fn synth_common(c: f64, c1: f64, seed: u64) -> Result<Synthesized> {
    positive("c", c)?;
    positive("c1", c1)?;
    let mut rng = rng::seeded(seed);
    let a2 = below(&mut rng, 1.0, "a2")?;
    let a1 = below(&mut rng, a2 * a2 / (a2 + 2.0), "a1")?;
    let a0 = below(&mut rng, c1 * (a1 * a2 / 3.0).min(a1 * a1 / (a1 + 2.0 * a2)), "a0")?;
    let params = make_params(a0, a1, a2)?;
    let eps = continuous_eps(c, c1, &params, Region::Common)?;
    let xi = discrete_xi(c, c1, &params, Region::Common)?;
    Ok(Synthesized {
        region: Region::Common,
        params,
        eps: Some(eps),
        xi: Some(xi),
        bounds: None,
    })
}

pub fn synthesize(region: Region, c: f64, c1: f64, seed: u64) -> Result<Synthesized> {
    match region {
        Region::SmallRate => synth_small_rate(c, c1, seed),
        Region::UnitRate => synth_unit_rate(c, c1, seed),
        Region::DoubleRate => synth_double_rate(c, c1, seed),
        Region::LinearRate => synth_linear_rate(c, c1, seed),
        Region::Common => synth_common(c, c1, seed),
    }
}

/// Membership tests for the small-rate and linear-rate regions.
pub fn in_small_rate_region(c1: f64, p: &DynParams) -> bool {
    p.a1 < p.a2 * p.a2 / 2.0 && p.a0 < c1 * (p.a1 * p.a2 / 3.0).min(p.a1 * p.a1 / (2.0 * p.a2))
}

pub fn in_linear_rate_region(c1: f64, p: &DynParams) -> bool {
    p.a2 < 2.0
        && p.a1 > (p.a2 - 1.0).max(0.0)
        && p.a1 < p.a2 * p.a2 / (p.a2 + 2.0)
        && p.a0 < c1 * (p.a1 * p.a1 / (p.a1 + 2.0 * p.a2)).min(1.0 - p.a2 + p.a1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C: f64 = 2.5;
    const C1: f64 = 2.5 / 9.0;
    // canonical one-dimensional instance
    const C_CANON: f64 = 0.5;
    const C1_CANON: f64 = 1.0 / 18.0;

    fn p(a0: f64, a1: f64, a2: f64) -> DynParams {
        DynParams::new(a0, a1, a2).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn continuous_pack_hand_values() {
        let k = continuous_pack(1.0, &p(1.0, 1.0, 1.0));
        assert_eq!((k.C2, k.C1, k.C0, k.A1, k.A0), (1.0, -2.0, -1.0, 1.0, -1.0));
        let k = continuous_pack(0.2778, &p(0.02, 0.4, 1.0));
        assert!(close(k.C2, 5.556, 1e-3) && close(k.C1, 2.556, 1e-3) && close(k.C0, 0.2224, 1e-4));
        assert!(close(k.A1, 13.89, 1e-3) && close(k.A0, 2.778, 1e-3));
    }

    #[test]
    fn continuous_pack_scales_with_inverse_a0() {
        let k = continuous_pack(0.3, &p(0.1, 0.7, 1.9));
        let h = continuous_pack(0.3, &p(0.2, 0.7, 1.9));
        assert!(close(h.C2, k.C2 / 2.0, 1e-15) && close(h.A1, k.A1 / 2.0, 1e-15));
        assert!(close(h.C1 + 3.0, (k.C1 + 3.0) / 2.0, 1e-14));
        assert!(close(h.C0 + 2.0 * 1.9, (k.C0 + 2.0 * 1.9) / 2.0, 1e-14));
        assert!(close(h.A0, k.A0 / 2.0, 1e-15));
    }

    #[test]
    fn discrete_pack_hand_values() {
        let k = discrete_pack(1.0, &p(0.1, 0.25, 0.9));
        assert!(close(k.B2, -0.5, 1e-12) && close(k.B1, -2.55, 1e-12) && close(k.B0, -1.425, 1e-12));
        assert!(close(k.D1, 7.0, 1e-12) && close(k.D0, 4.75, 1e-12) && close(k.E0, 2.5, 1e-12));
        // c₁a₁/a₀ = 3 puts B₂ on its boundary
        assert_eq!(discrete_pack(0.75, &p(0.25, 1.0, 0.9)).B2, 0.0);
    }

    #[test]
    fn delta_decreases_in_c() {
        assert!(close(delta(C, 0.2778), 2.0736, 1e-3));
        assert!(delta(3.0, 0.2778) < delta(2.5, 0.2778));
        assert_eq!(delta(C_CANON, C1_CANON), 1296.0);
    }

    #[test]
    fn unit_rate_hand_example() {
        let b = unit_rate_bounds(C, 0.2778, 9.0, 34.0);
        assert!(close(b.a2_min, 8.29, 0.01));
        assert!(close(b.a1_lo, 31.10, 0.01) && b.a1_hi == 36.0);
        assert!(close(b.a0_lo, 14.98, 0.01) && close(b.a0_hi, 16.37, 0.01));
        let t = p(15.5, 34.0, 9.0);
        let r = check_continuous_rate(&continuous_pack(0.2778, &t), C, 0.2778, &t, 1.0).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn strict_damping_boundary() {
        let t = p(15.5, 34.0, 9.0);
        let r = check_continuous_rate(&continuous_pack(0.2778, &t), C, 0.2778, &t, 4.5).unwrap();
        let d = r.get("damping-dominance").unwrap();
        assert_eq!(d.lhs, 0.0);
        assert!(!d.pass && !r.passed());
    }

    #[test]
    fn rate_must_be_positive() {
        let t = p(0.1, 0.2, 0.3);
        assert!(check_continuous_rate(&continuous_pack(C1, &t), C, C1, &t, 0.0).is_err());
        let k = discrete_pack(C1, &t);
        assert_eq!(
            check_discrete_rate(&k, C, C1, &t, 1.0).unwrap_err(),
            Error::InvalidXi(1.0)
        );
        assert!(check_discrete_rate(&k, C, C1, &t, 1.5).is_err());
        assert_eq!(l_of_xi(0.5).unwrap(), 2.0);
    }

    #[test]
    fn small_rate_hand_example() {
        let t = p(0.02, 0.4, 1.0);
        assert!(in_small_rate_region(0.2778, &t));
        let k = continuous_pack(0.2778, &t);
        assert!(max_feasible_eps(&k, C, 0.2778, &t) > 0.0);
    }

    #[test]
    fn linear_rate_hand_example() {
        let t = p(0.005, 0.25, 0.9);
        assert!(in_linear_rate_region(0.2778, &t));
        assert!(check_discrete_standing(0.2778, &t).holds());
        let k = discrete_pack(0.2778, &t);
        assert!(k.B2 > 0.0 && k.D1 > 0.0 && k.E0 > 0.0);
        let xi = max_feasible_xi(&k, C, 0.2778, &t);
        let r = check_discrete_rate(&k, C, 0.2778, &t, xi).unwrap();
        assert!(r.passed() && r.disagreements.is_empty());
    }

    #[test]
    fn unit_and_double_rate_searches_reach_their_rates() {
        for seed in 0..5 {
            let s = synth_unit_rate(C_CANON, C1_CANON, seed).unwrap();
            let k = continuous_pack(C1_CANON, &s.params);
            assert!(max_feasible_eps(&k, C_CANON, C1_CANON, &s.params) >= 1.0);
            let s = synth_double_rate(C_CANON, C1_CANON, seed).unwrap();
            let k = continuous_pack(C1_CANON, &s.params);
            assert!(max_feasible_eps(&k, C_CANON, C1_CANON, &s.params) >= 2.0);
            let b = s.bounds.unwrap();
            assert!(s.params.a1 - 2.0 * s.params.a2 + 4.0 > 0.0 && b.nonempty());
        }
    }

    #[test]
    fn huge_a0_has_no_feasible_rate() {
        let t = p(1e6, 0.4, 1.0);
        assert_eq!(max_feasible_eps(&continuous_pack(C1, &t), C, C1, &t), 0.0);
    }

    #[test]
    fn search_brackets_the_boundary() {
        let s = synth_small_rate(C, C1, 7).unwrap();
        let k = continuous_pack(C1, &s.params);
        let e = max_feasible_eps(&k, C, C1, &s.params);
        assert!(check_continuous_rate(&k, C, C1, &s.params, e).unwrap().passed());
        let past = check_continuous_rate(&k, C, C1, &s.params, e * (1.0 + 1e-9)).unwrap();
        assert!(!past.passed());
    }

    #[test]
    fn common_region_lies_in_both() {
        for seed in 0..20 {
            let s = synth_common(C_CANON, C1_CANON, seed).unwrap();
            assert!(in_small_rate_region(C1_CANON, &s.params));
            assert!(in_linear_rate_region(C1_CANON, &s.params));
        }
    }

    #[test]
    fn linear_rate_tuples_lie_in_common_region_when_a2_below_one() {
        for seed in 0..50 {
            let s = synth_linear_rate(C_CANON, C1_CANON, seed).unwrap();
            let t = s.params;
            if t.a2 < 1.0 {
                assert!(t.a1 < t.a2 * t.a2 / (t.a2 + 2.0));
                assert!(t.a0 < C1_CANON * (t.a1 * t.a1 / (t.a1 + 2.0 * t.a2)));
            }
        }
    }

    #[test]
    fn region_aliases_parse() {
        let r: Region = serde_json::from_str("\"cor35\"").unwrap();
        assert_eq!(r, Region::SmallRate);
        let r: Region = serde_json::from_str("\"double-rate\"").unwrap();
        assert_eq!(r, Region::DoubleRate);
        for (alias, region) in [
            ("thm36", Region::UnitRate),
            ("eps2", Region::DoubleRate),
            ("cor43", Region::LinearRate),
        ] {
            assert_eq!(serde_json::from_str::<Region>(&format!("\"{alias}\"")).unwrap(), region);
        }
    }

    #[test]
    fn report_json_shape() {
        let t = p(15.5, 34.0, 9.0);
        let r = check_continuous_rate(&continuous_pack(0.2778, &t), C, 0.2778, &t, 1.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["verdict"], "feasible");
        assert_eq!(v["conditions"].as_array().unwrap().len(), 6);
        assert!(v["conditions"][0]["slack"].is_number());
    }

    proptest! {
        #[test]
        fn synthesized_tuples_pass_their_checkers(seed in 0u64..10_000, c in 0.05f64..3.0, ratio in 0.01f64..0.5) {
            let c1 = c * ratio;
            for region in Region::ALL {
                let s = synthesize(region, c, c1, seed).unwrap();
                if let Some(eps) = s.eps {
                    let k = continuous_pack(c1, &s.params);
                    prop_assert!(check_continuous_rate(&k, c, c1, &s.params, eps).unwrap().passed());
                }
                if let Some(xi) = s.xi {
                    let k = discrete_pack(c1, &s.params);
                    let r = check_discrete_rate(&k, c, c1, &s.params, xi).unwrap();
                    prop_assert!(r.passed());
                    prop_assert!(check_discrete_standing(c1, &s.params).holds());
                }
            }
        }

        #[test]
        fn transformed_forms_agree(a0 in 0.001f64..1.0, a1 in 0.01f64..2.0, a2 in 0.01f64..3.0, xi in 0.01f64..0.99) {
            let t = p(a0, a1, a2);
            let k = discrete_pack(C1, &t);
            let l = 1.0 / (1.0 - xi);
            let direct = discrete_lhs(&k, C, C1, &t, xi);
            let lform = discrete_lhs_transformed(&k, C, C1, &t, xi);
            // the l-forms are the direct forms times l³, l², l², l, l, l
            let powers = [3, 2, 2, 1, 1, 1];
            for i in 0..6 {
                let scaled = direct[i] * l.powi(powers[i]);
                let scale = 1.0 + scaled.abs() + lform[i].abs() + l.powi(3) * (a0 + a1 + a2 + k.B0.abs() + k.B1.abs() + k.B2.abs() + k.D0.abs() + k.D1.abs());
                prop_assert!((scaled - lform[i]).abs() <= 1e-12 * scale);
            }
        }
    }
}
