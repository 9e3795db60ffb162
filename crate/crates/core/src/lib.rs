//! Constructive regularity and uniformity partitions for permutations, with
//! pattern counting, pattern destruction and quasirandomness statistics.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cdf;
pub mod counting;
pub mod density;
pub mod dominance;
pub mod error;
pub mod patterns;
pub mod perm;
pub mod quasirand;
pub mod regularity;
pub mod uniformity;

pub use cdf::{Interp, Nearness, StepCdf};
pub use counting::{
    estimate_pattern_count, omega_integral, simplex_integral, EstimateOptions, OmegaForm,
    PatternEstimate, SimplexSpec,
};
pub use density::{cdf_l, density, pair_count};
pub use dominance::DominanceTable;
pub use error::{Error, Result};
pub use patterns::{count_pattern, destroy_pattern, universality_check, verify_destroyed, Pattern};
pub use perm::{
    format_permutation, generate, parse_permutation, GeneratorKind, IndexSet, Interval,
    Permutation, Subset,
};
pub use quasirand::{discrepancy, discrepancy_star, quasirandom_report, QuasirandomReport};
pub use regularity::{regular_partition, EquitablePartition, RegularityLimits};
pub use uniformity::{uniform_partition, verify_uniform, UniformPartition, UniformStrategy};
