//! Generalization-bound and privacy arithmetic.

mod identities;
mod kl;
mod kl_estimate;
mod pac_bayes;
mod privacy;
mod report;

pub use identities::{
    bound_optimizer_bruteforce_check, catoni_identity_check, discrete_gibbs, discrete_gibbs_kl,
    BoundOptimizerCheck, BoundOptimizerProblem, CatoniCheck, OPTIMIZER_TIE_TOLERANCE,
};
pub use kl::{kl_bernoulli, kl_inverse_lower, kl_inverse_upper, KL_INVERSE_CLAMP};
pub use kl_estimate::{estimate_kl_gibbs_prior, KlEstimate, MIN_KL_SAMPLES};
pub use pac_bayes::{
    c_bound, dp_pac_bayes_bound, dp_penalty, effective_epsilon, h_bound, linear_pac_bayes,
    ClampedBound, DpPacBayesBound,
};
pub use privacy::{
    epsilon_gibbs_posterior, epsilon_local_entropy, Mechanism, PrivacyBudget, DEFAULT_DELTA,
};
pub use report::{BoundInputs, BoundReport, SweepPoint, REPORT_SCHEMA_VERSION};
