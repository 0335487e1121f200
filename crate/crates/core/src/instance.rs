//! Problem data: the operators `F` and `g`, the set `Ω`, the function `h`,
//! the step `γ`, and the monotonicity/Lipschitz constants that every rate
//! bound is built from.
//!
//! Affine operators are certified: their constants are computed exactly from
//! spectral quantities. Callback operators are accepted with user-supplied
//! constants and flagged as uncertified.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::audit::{AuditCheck, AuditReport};
use crate::error::{Error, Result};
use crate::prox::{FeasibleSet, HSpec, AUDIT_TOL};
use crate::rng;
use crate::vector::{check_dim, dot, norm_sq, sub};

/// Slack allowed on the necessary inequalities `ζ ≤ ηβ` and `λ ≤ η`.
pub const CONSTANT_SLACK: f64 = 1e-12;

/// Step sizes scanned by recipes that do not fix `γ`.
pub fn gamma_grid() -> impl Iterator<Item = f64> {
    (1..=40).map(|k| k as f64 * 0.05)
}

/// `w ↦ M w + b` with `M` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineOp {
    dim: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineOp {
    pub fn from_rows(rows: &[Vec<f64>], offset: Vec<f64>) -> Result<Self> {
        let dim = rows.len();
        let mut matrix = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row)?;
            matrix.extend_from_slice(row);
        }
        Self::from_row_major(dim, matrix, offset)
    }

    pub fn from_row_major(dim: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("operator dimension must be >= 1".into()));
        }
        check_dim(dim * dim, &matrix)?;
        check_dim(dim, &offset)?;
        if !matrix.iter().chain(&offset).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("affine operator"));
        }
        Ok(Self { dim, matrix, offset })
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = scale;
        }
        Self {
            dim,
            matrix,
            offset: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// `M e` without the offset.
    pub fn apply_linear(&self, e: &[f64]) -> Vec<f64> {
        self.matrix.chunks(self.dim).map(|row| dot(row, e)).collect()
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.apply_linear(w);
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.matrix)
    }
}

pub type OperatorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum Operator {
    Affine(AffineOp),
    Custom { dim: usize, map: OperatorFn },
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::Affine(op) => f.debug_tuple("Affine").field(op).finish(),
            Operator::Custom { dim, .. } => write!(f, "Custom {{ dim: {dim} }}"),
        }
    }
}

impl Operator {
    pub fn custom(dim: usize, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Operator::Custom {
            dim,
            map: Arc::new(map),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Affine(op) => op.dim(),
            Operator::Custom { dim, .. } => *dim,
        }
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            Operator::Affine(op) => op.apply(w),
            Operator::Custom { map, .. } => map(w),
        }
    }

    pub fn as_affine(&self) -> Option<&AffineOp> {
        match self {
            Operator::Affine(op) => Some(op),
            Operator::Custom { .. } => None,
        }
    }
}

/// Lipschitz moduli `eta` (of F) and `beta` (of g), strong-monotonicity
/// modulus `lambda` of F, and coupled-monotonicity modulus `zeta` of (F, g).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceConstants {
    pub eta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub zeta: f64,
}

impl InstanceConstants {
    /// `c(γ) = λ + γζ − η²/2 − γ²β/2 − 1/2`
    pub fn c(&self, gamma: f64) -> f64 {
        self.lambda + gamma * self.zeta - 0.5 * self.eta * self.eta - 0.5 * gamma * gamma * self.beta - 0.5
    }

    /// Lipschitz modulus `2η + γβ` of the residual map.
    pub fn residual_lipschitz(&self, gamma: f64) -> f64 {
        2.0 * self.eta + gamma * self.beta
    }

    /// `c₁ = c / (2η + γβ)²`, defined only when `c > 0`.
    pub fn c1(&self, gamma: f64) -> Result<f64> {
        let c = self.c(gamma);
        if !(c > 0.0) {
            return Err(Error::NonPositiveC(c));
        }
        let l = self.residual_lipschitz(gamma);
        Ok(c / (l * l))
    }

    /// Exact constants of an affine pair: `η = σ_max(M)`, `β = σ_max(G)`,
    /// `λ = λ_min(sym M)`, `ζ = λ_min(sym MᵀG)`.
    pub fn spectral(f: &AffineOp, g: &AffineOp) -> Self {
        let m = f.to_matrix();
        let gm = g.to_matrix();
        let coupled = m.transpose() * &gm;
        Self {
            eta: largest_singular_value(&m),
            beta: largest_singular_value(&gm),
            lambda: smallest_symmetric_eigenvalue(&m),
            zeta: smallest_symmetric_eigenvalue(&coupled),
        }
    }

    fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()));
        close(self.eta, other.eta)
            && close(self.beta, other.beta)
            && close(self.lambda, other.lambda)
            && close(self.zeta, other.zeta)
    }
}

fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn smallest_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// One named invariant of an instance and whether it holds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceCheck {
    pub name: &'static str,
    pub value: f64,
    pub pass: bool,
    /// Short failure reason, e.g. `"zeta nonpositive"`.
    pub reason: &'static str,
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    dim: usize,
    f: Operator,
    g: Operator,
    omega: FeasibleSet,
    h: HSpec,
    gamma: f64,
    constants: InstanceConstants,
    certified: bool,
}

impl ProblemInstance {
    /// Builds and validates an affine instance with spectral constants.
    pub fn affine(f: AffineOp, g: AffineOp, omega: FeasibleSet, h: HSpec, gamma: f64) -> Result<Self> {
        Self::affine_unchecked(f, g, omega, h, gamma)?.validated()
    }

    /// Affine instance with spectral constants but without invariant checks;
    /// used to report on instances that are expected to fail.
    pub fn affine_unchecked(f: AffineOp, g: AffineOp, omega: FeasibleSet, h: HSpec, gamma: f64) -> Result<Self> {
        let constants = InstanceConstants::spectral(&f, &g);
        Self::assemble(
            Operator::Affine(f),
            Operator::Affine(g),
            omega,
            h,
            gamma,
            constants,
            true,
        )
    }

    /// Instance with callback operators; the supplied constants are trusted
    /// and the instance is flagged as uncertified.
    pub fn custom(
        f: Operator,
        g: Operator,
        omega: FeasibleSet,
        h: HSpec,
        gamma: f64,
        constants: InstanceConstants,
    ) -> Result<Self> {
        Self::assemble(f, g, omega, h, gamma, constants, false)?.validated()
    }

    fn assemble(
        f: Operator,
        g: Operator,
        omega: FeasibleSet,
        h: HSpec,
        gamma: f64,
        constants: InstanceConstants,
        certified: bool,
    ) -> Result<Self> {
        let dim = f.dim();
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.dim(),
            });
        }
        omega.validate()?;
        h.validate()?;
        for n in [omega.dim(), h.dim()].into_iter().flatten() {
            if n != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: n });
            }
        }
        let c = constants;
        if ![gamma, c.eta, c.beta, c.lambda, c.zeta].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("instance constants"));
        }
        Ok(Self {
            dim,
            f,
            g,
            omega,
            h,
            gamma,
            constants,
            certified,
        })
    }

    /// The one-dimensional reference problem: `F = g = id`, `Ω = [−1, 1]`,
    /// `h ≡ 0`, `γ = 1`. Its residual is `Ψ(w) = w` and `c = 1/2`.
    pub fn canonical() -> Self {
        Self::affine(
            AffineOp::scaled_identity(1, 1.0),
            AffineOp::scaled_identity(1, 1.0),
            FeasibleSet::Box {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
            HSpec::Zero,
            1.0,
        )
        .expect("canonical instance is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn f(&self) -> &Operator {
        &self.f
    }
    pub fn g(&self) -> &Operator {
        &self.g
    }
    pub fn omega(&self) -> &FeasibleSet {
        &self.omega
    }
    pub fn h(&self) -> &HSpec {
        &self.h
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn constants(&self) -> &InstanceConstants {
        &self.constants
    }
    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// Same problem with replaced constants. The result is uncertified unless
    /// the new constants agree with the spectral ones.
    pub fn with_constants(&self, constants: InstanceConstants) -> Self {
        let mut out = self.clone();
        out.constants = constants;
        out.certified = out.spectral_constants().is_some_and(|s| s.approx_eq(&constants, 1e-9));
        out
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.gamma = gamma;
        out
    }

    fn spectral_constants(&self) -> Option<InstanceConstants> {
        match (self.f.as_affine(), self.g.as_affine()) {
            (Some(f), Some(g)) => Some(InstanceConstants::spectral(f, g)),
            _ => None,
        }
    }

    pub fn c(&self) -> f64 {
        compute_c(self)
    }

    pub fn c1(&self) -> Result<f64> {
        compute_c1(self)
    }

    pub fn residual_lipschitz(&self) -> f64 {
        self.constants.residual_lipschitz(self.gamma)
    }

    /// Every instance invariant, in evaluation order.
    pub fn checks(&self) -> Vec<InstanceCheck> {
        let k = &self.constants;
        let c = self.c();
        let mut checks = vec![
            InstanceCheck {
                name: "gamma positive",
                value: self.gamma,
                pass: self.gamma > 0.0,
                reason: "gamma nonpositive",
            },
            InstanceCheck {
                name: "lambda positive",
                value: k.lambda,
                pass: k.lambda > 0.0,
                reason: "lambda nonpositive",
            },
            InstanceCheck {
                name: "zeta positive",
                value: k.zeta,
                pass: k.zeta > 0.0,
                reason: "zeta nonpositive",
            },
            InstanceCheck {
                name: "zeta <= eta*beta",
                value: k.eta * k.beta - k.zeta,
                pass: k.zeta <= k.eta * k.beta + CONSTANT_SLACK,
                reason: "zeta exceeds eta*beta",
            },
            InstanceCheck {
                name: "lambda <= eta",
                value: k.eta - k.lambda,
                pass: k.lambda <= k.eta + CONSTANT_SLACK,
                reason: "lambda exceeds eta",
            },
            InstanceCheck {
                name: "c positive",
                value: c,
                pass: c > 0.0,
                reason: "c ≤ 0",
            },
        ];
        if let Some(spectral) = self.spectral_constants() {
            let worst = [
                spectral.eta - k.eta,
                spectral.beta - k.beta,
                spectral.lambda - k.lambda,
                spectral.zeta - k.zeta,
            ]
            .iter()
            .fold(0.0_f64, |m, d| m.max(d.abs()));
            checks.push(InstanceCheck {
                name: "constants match operators",
                value: worst,
                pass: spectral.approx_eq(k, 1e-9),
                reason: "constants inconsistent with operators",
            });
        }
        checks
    }

    /// Returns the instance if every check passes, else the first failure.
    pub fn validated(self) -> Result<Self> {
        match self.checks().into_iter().find(|c| !c.pass) {
            None => Ok(self),
            Some(check) if check.name == "c positive" => Err(Error::NonPositiveC(check.value)),
            Some(check) => Err(Error::InvalidInstance(check.reason.to_string())),
        }
    }

    pub fn to_document(&self) -> Result<InstanceDocument> {
        let (Some(f), Some(g)) = (self.f.as_affine(), self.g.as_affine()) else {
            return Err(Error::Serialization("only affine instances serialize".into()));
        };
        Ok(InstanceDocument {
            dim: self.dim,
            m: f.rows(),
            b: f.offset().to_vec(),
            g: g.rows(),
            d: g.offset().to_vec(),
            omega: self.omega.clone(),
            h: self.h.clone(),
            gamma: self.gamma,
            constants: self.constants,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document()?)?)
    }

    /// Loads an instance without validating it. Stored constants are kept as
    /// written; the instance counts as certified only if they match the
    /// spectral values of the stored matrices.
    pub fn from_json(json: &str) -> Result<Self> {
        let doc: InstanceDocument = serde_json::from_str(json)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: InstanceDocument) -> Result<Self> {
        let f = AffineOp::from_rows(&doc.m, doc.b)?;
        let g = AffineOp::from_rows(&doc.g, doc.d)?;
        if f.dim() != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                got: f.dim(),
            });
        }
        let inst = Self::affine_unchecked(f, g, doc.omega, doc.h, doc.gamma)?;
        Ok(inst.with_constants(doc.constants))
    }
}

/// On-disk form of an affine instance; matrices are lists of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub omega: FeasibleSet,
    pub h: HSpec,
    pub gamma: f64,
    pub constants: InstanceConstants,
}

/// Families of affine instances with certifiable constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InstanceRecipe {
    /// `F(w) = (I + spread·A) w + b` and `g = θ·F + noise·E w + d` with
    /// Gaussian `A`, `E` scaled by `1/√n`, offsets uniform in
    /// `[−offset_scale, offset_scale]`, `Ω = [−1, 1]ⁿ` and a separable
    /// quadratic `h` with weights uniform in `[0, 0.5]`. Without a fixed `γ`,
    /// the grid value maximizing `c` is used.
    SpdAffine {
        theta: f64,
        spread: f64,
        noise: f64,
        offset_scale: f64,
        #[serde(default)]
        gamma: Option<f64>,
    },
    /// `F = f_scale·I`, `g = g_scale·I`, `Ω = [−1, 1]ⁿ`, `h ≡ 0`.
    ScaledIdentity { f_scale: f64, g_scale: f64, gamma: f64 },
}

impl InstanceRecipe {
    pub fn spd_affine() -> Self {
        InstanceRecipe::SpdAffine {
            theta: 1.5,
            spread: 0.1,
            noise: 0.02,
            offset_scale: 1.5,
            gamma: None,
        }
    }

    pub fn scaled_identity(f_scale: f64, g_scale: f64, gamma: f64) -> Self {
        InstanceRecipe::ScaledIdentity {
            f_scale,
            g_scale,
            gamma,
        }
    }
}

/// Draws an instance from a recipe without validating it. The RNG stream is
/// consumed in a fixed order: `A`, `E` (row-major), `b`, `d`, `q`.
pub fn draw_affine_instance(dim: usize, seed: u64, recipe: &InstanceRecipe) -> Result<ProblemInstance> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be >= 1".into()));
    }
    match *recipe {
        InstanceRecipe::ScaledIdentity {
            f_scale,
            g_scale,
            gamma,
        } => ProblemInstance::affine_unchecked(
            AffineOp::scaled_identity(dim, f_scale),
            AffineOp::scaled_identity(dim, g_scale),
            FeasibleSet::cube(dim, -1.0, 1.0)?,
            HSpec::Zero,
            gamma,
        ),
        InstanceRecipe::SpdAffine {
            theta,
            spread,
            noise,
            offset_scale,
            gamma,
        } => {
            let mut rng = rng::seeded(seed);
            let inv_sqrt = 1.0 / (dim as f64).sqrt();
            let a = rng::gaussian_vec(&mut rng, dim * dim);
            let e = rng::gaussian_vec(&mut rng, dim * dim);
            let b = rng::uniform_vec(&mut rng, dim, -offset_scale, offset_scale);
            let d = rng::uniform_vec(&mut rng, dim, -offset_scale, offset_scale);
            let q = rng::uniform_vec(&mut rng, dim, 0.0, 0.5);

            let mut m: Vec<f64> = a.iter().map(|x| spread * inv_sqrt * x).collect();
            for i in 0..dim {
                m[i * dim + i] += 1.0;
            }
            let gm: Vec<f64> = m
                .iter()
                .zip(&e)
                .map(|(mi, ei)| theta * mi + noise * inv_sqrt * ei)
                .collect();
            let f = AffineOp::from_row_major(dim, m, b)?;
            let g = AffineOp::from_row_major(dim, gm, d)?;
            let omega = FeasibleSet::cube(dim, -1.0, 1.0)?;
            let h = HSpec::SeparableQuadratic { q };
            let gamma = match gamma {
                Some(gamma) => gamma,
                None => {
                    let k = InstanceConstants::spectral(&f, &g);
                    gamma_grid()
                        .max_by(|x, y| k.c(*x).total_cmp(&k.c(*y)))
                        .expect("grid is nonempty")
                }
            };
            ProblemInstance::affine_unchecked(f, g, omega, h, gamma)
        }
    }
}

/// Draws and validates an instance; failures surface as `RecipeInfeasible`.
pub fn make_affine_instance(dim: usize, seed: u64, recipe: &InstanceRecipe) -> Result<ProblemInstance> {
    let inst = draw_affine_instance(dim, seed, recipe)?;
    match inst.validated() {
        Ok(inst) => Ok(inst),
        Err(Error::NonPositiveC(c)) => Err(Error::RecipeInfeasible(match recipe {
            InstanceRecipe::SpdAffine { gamma: None, .. } => {
                format!("c(γ) ≤ 0 for every γ on the grid (best c = {c})")
            }
            _ => format!("c = {c} ≤ 0"),
        })),
        Err(Error::InvalidInstance(reason)) => Err(Error::RecipeInfeasible(reason)),
        Err(other) => Err(other),
    }
}

/// The ten-dimensional affine instance used throughout the test suites.
pub fn canonical_affine_instance() -> ProblemInstance {
    make_affine_instance(10, 42, &InstanceRecipe::spd_affine()).expect("seed 42 draws a valid instance")
}

pub fn compute_c(inst: &ProblemInstance) -> f64 {
    inst.constants.c(inst.gamma)
}

pub fn compute_c1(inst: &ProblemInstance) -> Result<f64> {
    inst.constants.c1(inst.gamma)
}

/// Upper bounds on the step size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaBar {
    /// `(c + √(c² + β(2λ − η² − 1)))/β` with `c` at the instance's own `γ`;
    /// `None` when the square-root argument is negative.
    pub paper_value: Option<f64>,
    pub paper_discriminant: f64,
    /// Largest root of `c(γ) = 0` viewed as a quadratic in `γ`; this is the
    /// bound used for admissibility.
    pub quadratic_root: Option<f64>,
    pub quadratic_discriminant: f64,
}

impl GammaBar {
    pub fn paper_value(&self) -> Result<f64> {
        self.paper_value
            .ok_or(Error::NegativeDiscriminant(self.paper_discriminant))
    }
}

pub fn gamma_bar(inst: &ProblemInstance) -> Result<GammaBar> {
    let k = &inst.constants;
    if !(k.beta > 0.0) {
        return Err(Error::ZeroBeta);
    }
    let c = inst.c();
    let base = 2.0 * k.lambda - k.eta * k.eta - 1.0;
    let paper_discriminant = c * c + k.beta * base;
    // −(β/2)γ² + ζγ + (λ − η²/2 − 1/2) = 0
    let quadratic_discriminant = k.zeta * k.zeta + k.beta * base;
    Ok(GammaBar {
        paper_value: (paper_discriminant >= 0.0).then(|| (c + paper_discriminant.sqrt()) / k.beta),
        paper_discriminant,
        quadratic_root: (quadratic_discriminant >= 0.0).then(|| (k.zeta + quadratic_discriminant.sqrt()) / k.beta),
        quadratic_discriminant,
    })
}

/// Difference quotients of one random pair: `‖ΔF‖/‖e‖`, `‖Δg‖/‖e‖`,
/// `⟨ΔF, e⟩/‖e‖²`, `⟨ΔF, Δg⟩/‖e‖²`.
fn sample_quotients(inst: &ProblemInstance, rng: &mut rng::Rng) -> Option<InstanceConstants> {
    let n = inst.dim;
    let x: Vec<f64> = rng::gaussian_vec(rng, n).iter().map(|v| 2.0 * v).collect();
    let y: Vec<f64> = rng::gaussian_vec(rng, n).iter().map(|v| 2.0 * v).collect();
    let e = sub(&x, &y);
    let e2 = norm_sq(&e);
    if e2 == 0.0 {
        return None;
    }
    let df = sub(&inst.f.apply(&x), &inst.f.apply(&y));
    let dg = sub(&inst.g.apply(&x), &inst.g.apply(&y));
    Some(InstanceConstants {
        eta: (norm_sq(&df) / e2).sqrt(),
        beta: (norm_sq(&dg) / e2).sqrt(),
        lambda: dot(&df, &e) / e2,
        zeta: dot(&df, &dg) / e2,
    })
}

/// Sampling estimates of the constants from random pairs `x, y`. For affine
/// operators the Lipschitz estimates never exceed the exact moduli and the
/// monotonicity estimates never fall below them; they are not certificates.
pub fn estimate_constants(inst: &ProblemInstance, samples: usize, seed: u64) -> Result<InstanceConstants> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut est = InstanceConstants {
        eta: 0.0,
        beta: 0.0,
        lambda: f64::INFINITY,
        zeta: f64::INFINITY,
    };
    for _ in 0..samples {
        if let Some(q) = sample_quotients(inst, &mut rng) {
            est.eta = est.eta.max(q.eta);
            est.beta = est.beta.max(q.beta);
            est.lambda = est.lambda.min(q.lambda);
            est.zeta = est.zeta.min(q.zeta);
        }
    }
    Ok(est)
}

/// Audits the stored constants against sampled difference quotients of the
/// operators. Catches constants that are too optimistic, e.g. an
/// underestimated Lipschitz modulus.
pub fn check_constants(inst: &ProblemInstance, samples: usize, seed: u64) -> Result<AuditReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let k = inst.constants;
    let mut rng = rng::seeded(seed);
    let mut lip_f = AuditCheck::start("constants.lipschitz-F", AUDIT_TOL);
    let mut lip_g = AuditCheck::start("constants.lipschitz-g", AUDIT_TOL);
    let mut mono = AuditCheck::start("constants.monotone-F", AUDIT_TOL);
    let mut coupled = AuditCheck::start("constants.coupled-monotone", AUDIT_TOL);
    for _ in 0..samples {
        if let Some(q) = sample_quotients(inst, &mut rng) {
            lip_f.record(k.eta - q.eta);
            lip_g.record(k.beta - q.beta);
            mono.record(q.lambda - k.lambda);
            coupled.record(q.zeta - k.zeta);
        }
    }
    let mut report = AuditReport::default();
    for t in [lip_f, lip_g, mono, coupled] {
        report.push(t.finish());
    }
    Ok(report)
}
