//! Confidence intervals for the risk ratio from two independent binomial counts.
//!
//! All methods share one convention for sidedness: a one-sided `1 - a` bound
//! is the matching endpoint of the two-sided `1 - 2a` interval.

mod delta;
mod likelihood;
mod wang_shan;
mod wilson;

pub use delta::{delta_interval, log_rr_standard_error};
pub use likelihood::{
    constrained_binomial_mle, koopman_interval, koopman_statistic, lr_statistic, lrt_interval,
    ConstrainedMle,
};
pub use wang_shan::{
    at_least_as_extreme, interval_from_tables, wang_shan_interval, wang_shan_interval_with_store,
    WangShanConfig, WangShanStore, WangShanTable, TABLE_FORMAT_VERSION,
};
pub use wilson::wilson_interval;
