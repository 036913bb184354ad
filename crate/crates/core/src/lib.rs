//! Adversarially robust learning of halfspaces.
//!
//! Exact robust ERM for convex perturbation sets via the ellipsoid method,
//! the converse reduction from robust-loss evaluation to approximate
//! separation, and a mirror-descent learner for ℓp-robust halfspaces under
//! random classification noise.

// `!(x > 0.0)` is used throughout so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod cert;
pub mod datagen;
pub mod dataset;
pub mod ellipsoid;
pub mod error;
pub mod loss;
pub mod minnorm;
pub mod model;
pub mod norm;
pub mod rcn;
pub mod reduction;
pub mod rerm;
pub mod rng;
pub mod types;

pub use adversary::{
    convexify, AdversarySpec, AffineImageHull, FeatureMap, HullAdversary, IdentityMap, Membership,
    NormBallAdversary, PerturbationSet, PolytopeAdversary, SeparationResult, SquaredNormLift,
};
pub use cert::{cert, cert_fastpath, cert_linear, empirical_robust_risk, CertMode, CertResult};
pub use datagen::{generate, PlantSpec, PlantedSampler};
pub use dataset::{Dataset, DatasetMeta};
pub use ellipsoid::{find_feasible, FeasibilityConfig, FeasibilityReport, FeasibilityResult, SeparationOracle};
pub use error::{Error, Result};
pub use model::ModelFile;
pub use norm::{NormSpec, DEFAULT_TOLERANCE};
pub use rcn::{train_glm, train_leaky, RcnConfig, SurrogateKind, SurrogateSpec, TrainedModel};
pub use reduction::{approx_sep_from_eval, mem_to_approx_sep, ApproxSepResult, LpEvaluator, RobustLossEvaluator};
pub use rerm::{rerm, rerm_feature_mapped, RermConfig, RermOutcome, RermResult, RermStats};
pub use types::{Halfspace, Label, LabeledExample, Vector};
