//! # eotlab
//!
//! A desk-scale numerical laboratory for entropy-regularized optimal transport
//! with quadratic cost on bounded convex domains.
//!
//! The crate solves the discrete Schrödinger system for the potential pair
//! (u_eps, v_eps) with log-domain Sinkhorn updates, builds exact eps = 0
//! references (1D quantile coupling, discrete Kantorovich LP), and measures
//! every quantity that controls the small-eps regularity of the potentials:
//!
//! - the duality gap W_eps^2 - W_2^2 and its eps*log(1/eps) rate,
//! - L^p and sup-norm errors of gradients and potentials against the
//!   Kantorovich reference,
//! - Hessian sup-norms and their growth exponent in 1/eps,
//! - Hölder seminorms of the entropic gradient, uniformly over an eps sweep,
//! - p-detachment certificates for dual pairs and the convex-ball lower
//!   bound used to localize potentials.
//!
//! ## Layout
//!
//! | module | contents |
//! |--------|----------|
//! | [`marginals`] | convex domains, densities with two-sided bounds, midpoint-rule discretization |
//! | [`field`] | grid-sampled potentials with multilinear interpolation |
//! | [`sinkhorn`] | the log-domain Schrödinger solver |
//! | [`potentials`] | plan density, costs, gradient/Hessian representation formulas |
//! | [`reference`] | quantile coupling, transportation simplex, Monge-Ampère residual |
//! | [`detachment`] | Legendre transforms, detachment certificates, convex-ball bound |
//! | [`estimates`] | the eps-sweep harness and rate fitting |
//! | [`config`] | the flat experiment-configuration format |
//! | [`report`] | CSV / summary serialization with bit-stable formatting |
//!
//! All solvers are deterministic: fixed iteration order, sequential
//! reductions, no randomness outside the seeded low-discrepancy sequences.

pub mod config;
pub mod detachment;
pub mod estimates;
pub mod field;
pub mod marginals;
pub mod num;
pub mod potentials;
pub mod reference;
pub mod report;
pub mod sinkhorn;

pub use config::{parse_config, ExperimentConfig};
pub use detachment::{
    check_p_detachment, convex_ball_lower_bound, global_detachment_forward, legendre_transform,
    DetachmentCertificate,
};
pub use estimates::{
    beta_from_alpha, fit_rate, hessian_sup_norm, holder_seminorm, lp_gradient_error, p0_from_alpha,
    run_sweep, sup_gradient_error, sup_potential_error, FitModel, SweepReport,
};
pub use field::{PotentialField, PotentialKind};
pub use marginals::{build_marginal, ConvexDomain, DensitySpec, DiscreteMarginal};
pub use potentials::{
    dual_value, entropic_cost, grad_u, grad_v, hessian_u, hessian_v, plan_density,
    suboptimality_gap,
};
pub use reference::{
    holder_exponent_u0, ma_residual, solve_discrete_lp, solve_quantile_1d, ReferenceSolution,
};
pub use sinkhorn::{normalize_pair, solve_schrodinger, EntropicSolution, SolverOptions};

/// Crate-wide error type.
///
/// Individual modules define focused error enums; this umbrella exists so
/// drivers (the CLI, the sweep harness) can propagate any failure with `?`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] marginals::GeometryError),
    #[error(transparent)]
    Marginal(#[from] marginals::MarginalError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Solve(#[from] sinkhorn::SolveError),
    #[error(transparent)]
    Potential(#[from] potentials::PotentialError),
    #[error(transparent)]
    Reference(#[from] reference::ReferenceError),
    #[error(transparent)]
    Detachment(#[from] detachment::DetachmentError),
    #[error(transparent)]
    Estimate(#[from] estimates::EstimateError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
