//! Target distributions, error metrics and the kernel density baseline.

mod dist;
mod kde;
mod metrics;

pub use dist::{draw_sample, read_sample, write_sample, DistSpec};
pub use kde::{kde_bandwidth_search, kde_estimate, BandwidthSearch, Kernel};
pub use metrics::{histogram_density, kl_divergence, mse, Grid, MetricReport, HEP_BINS};
