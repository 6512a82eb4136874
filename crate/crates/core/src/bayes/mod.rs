//! Probability primitives: Beta densities and conjugate updates, the
//! transformed posterior over `m̂`, quadrature, a Monte Carlo oracle, and
//! entropy utilities over categorical predictions.

mod beta;
mod montecarlo;
mod prob;
mod quadrature;
mod special;

pub use beta::{beta_pdf, beta_update, transformed_pdf, transformed_pdf_split, BetaParams};
pub use montecarlo::{mc_oracle_e, mc_oracle_estimate, McEstimate, MIN_SAMPLES};
pub use prob::{cross_entropy, entropy, kl_divergence, softmax, ProbVector, PROB_FLOOR};
pub use quadrature::{
    expected_interpolation_coefficient, integrate_unit_logit, logistic_pair, simpson,
    transformed_pdf_mass, QuadratureConfig,
};
pub use special::{ln_beta, ln_gamma};
