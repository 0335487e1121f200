//! Third-order inertial dynamics and double-momentum forward-backward schemes
//! for generalized inverse mixed variational inequalities: find `w*` with
//! `F(w*) ∈ Ω` and `⟨g(w*), v − F(w*)⟩ + h(v) − h(F(w*)) ≥ 0` for all `v ∈ Ω`.

// `!(x > y)` guards are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audit;
pub mod discrete;
pub mod dynamics;
pub mod error;
pub mod instance;
pub mod params;
pub mod prox;
pub mod rng;
pub mod vector;

pub use analysis::{reference_solution, verify_theorem, RateClaim, RateFit, Verdict, VerdictKind, VerifyOptions};
pub use audit::{AuditCheck, AuditReport};
pub use discrete::{run_scheme, IterateHistory};
pub use dynamics::{residual, DynParams, TimeGrid, Trajectory};
pub use error::{Error, Result};
pub use instance::{
    canonical_affine_instance, check_constants, compute_c, compute_c1, draw_affine_instance, estimate_constants,
    gamma_bar, make_affine_instance, AffineOp, GammaBar, InstanceConstants, InstanceRecipe, Operator, ProblemInstance,
};
pub use params::{Region, Synthesized};
pub use prox::{prox, FeasibleSet, HSpec};
pub use vector::TripleVec;
