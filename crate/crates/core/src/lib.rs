//! Non-overlapping template matching randomness testing, with the joint
//! distribution of correlated test items and a whitening transform that
//! makes the template battery independent.
//!
//! The test counts occurrences of a short aperiodic bit pattern (a
//! "template") in each block of a sequence and turns the counts into a
//! chi-square p-value. Runs of the test with different templates over the
//! same data are correlated; this crate computes that correlation in closed
//! form, evaluates the exact bivariate distribution of two correlated test
//! statistics, and builds the eigendecomposition-based transform that maps
//! the standardized count vectors of a whole battery to independent
//! components.
//!
//! Template strings are written leftmost bit first: `"001"` matches windows
//! reading `0, 0, 1` in stream order. Watch out when comparing against
//! tools that print templates reversed.
//!
//! Modules:
//! - [`bitstream`]: packed bit sequences, ingestion, block partitioning.
//! - [`templates`]: aperiodic template enumeration, overlap indicators and
//!   the closed-form correlation.
//! - [`specfun`]: incomplete gamma functions and chi-square tails.
//! - [`matching`]: the matching test proper with theoretical moments.
//! - [`jointdist`]: the bivariate chi-square series CDF, density, p-value
//!   tails and the Monte Carlo oracle.
//! - [`whitening`]: rank analysis of the template correlation matrix and
//!   the whitening transform.
//! - [`generators`]: deterministic Mersenne Twister and AES-128 counter
//!   mode bit sources.
//! - [`experiments`]: reproducible joint-histogram and rejection-count
//!   experiment runners.

pub mod bitstream;
pub mod experiments;
pub mod generators;
pub mod jointdist;
pub mod matching;
pub mod specfun;
pub mod templates;
pub mod whitening;

pub use bitstream::{BitOrder, BitSequence, BitstreamError, BlockSet};
pub use templates::{
    correlation, default_battery, enumerate_aperiodic, overlap_profile, CorrelationMatrix,
    OverlapProfile, Template, TemplateError,
};
pub use matching::{
    count_occurrences, exact_count_moments, run_test, standardized_counts, theoretical_mu,
    theoretical_sigma_sq, MatchingError, StandardizedCounts, TestOutcome,
};
pub use jointdist::{
    cell_probability, joint_cdf, joint_cdf_terms, joint_pdf, joint_pvalue_tail, EvenDof,
    JointChiSqSampler, JointDistError, JointParams,
};
pub use whitening::{
    eigendecompose, orthogonal_battery, rank_analysis, raw_battery, BatteryResult,
    EigenDecomposition, RankAnalysis, WhiteningError, WhiteningTransform,
};
pub use generators::{seed_for_index, GeneratorKind, GeneratorSpec};
pub use experiments::{
    run_battery, run_joint_histogram, run_rejection_histogram, BatteryReport, ExperimentConfig,
    ExperimentError, JointHistogramReport, RejectionReport,
};
