//! Finite-model primitives: distributions, environment kernels, validation and
//! the joint human-AI POMDP.

mod dist;
mod env;
mod joint;
mod validate;

pub use dist::{Distribution, MIN_NORMALIZER, NORMALIZATION_TOL};
pub use env::EnvModel;
pub use joint::{build_human_ai_pomdp, JointPomdp};
pub use validate::{check_row, ValidationReport, Violation};

pub(crate) use dist::sample_index as sample_row;
pub(crate) use env::check_index as check_index_pub;
