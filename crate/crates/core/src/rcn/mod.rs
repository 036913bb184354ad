//! Learning ℓp-robust halfspaces under random classification noise.
//!
//! Two convex surrogates over the unit ℓq ball, both minimized with
//! stochastic mirror descent: the leaky hinge `G_λ^γ` and a GLM loss built
//! from a clamped link function.

pub mod mirror;
pub mod surrogate;
pub mod train;

pub use mirror::{smd_minimize, Averaging, MirrorDescentConfig, Potential, StochasticOracle, TrainedModel};
pub use surrogate::{glm_grad, glm_loss, leaky_grad, link_u, phi, SurrogateSpec};
pub use train::{train_glm, train_leaky, DatasetSource, ExampleSource, RcnConfig, SurrogateKind};
