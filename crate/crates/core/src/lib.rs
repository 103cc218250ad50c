//! Median-of-means and median-of-U-statistics estimation under contamination.
//!
//! A sample of size `n` holds `n − n_O` i.i.d. inliers and `n_O` arbitrary
//! outliers. Splitting it into `K` disjoint blocks and taking the median of
//! per-block estimates gives estimators whose deviation bounds only depend
//! on the outlier fraction `ε = n_O/n` through a few constants, provided `K`
//! is large enough for sane blocks to be a strict majority.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`calibration`] | α-mappings, derived constants, block counts, δ-ranges |
//! | [`partitioning`] | contiguous/random block partitions, diagonal pairings |
//! | [`estimators`] | mean, median, trimmed mean, MoM, U-statistics, MoU, MoU₂, MoU₂-diag |
//! | [`bounds`] | closed-form deviation, expectation and generalization bounds |
//! | [`contamination`] | seeded contaminated-sample generators |
//! | [`learning`] | pairwise losses and MoU gradient descent |
//! | [`harness`] | experiment runners, config and CSV I/O behind the `mom` CLI |
//!
//! ```
//! use mom_core::calibration::{block_count_subgaussian, AlphaMapping};
//! use mom_core::estimators::mom;
//! use mom_core::partitioning::partition_contiguous;
//!
//! let mut values: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
//! values[3] = 1e6;
//! let k = block_count_subgaussian(&AlphaMapping::Harmonic, 0.01, values.len()).unwrap();
//! let est = mom(&values, &partition_contiguous(values.len(), k).unwrap()).unwrap();
//! assert!(est < 10.0);
//! ```

pub mod bounds;
pub mod calibration;
pub mod contamination;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod learning;
pub mod numeric;
pub mod partitioning;

pub use error::{Error, Result};
