//! Identification of a governing differential equation from one noisy
//! space-time observation.
//!
//! The crate is `no_std` (it needs `alloc`). Every stage of the pipeline is a
//! pure function over owned data:
//!
//! * [`grid`] holds the sampled field and the Gaussian noise model.
//! * [`simulate`] generates benchmark data and time-evolves candidate models.
//! * [`denoise`] provides the LSMA and MLS smoothers, finite differences and
//!   successively denoised differentiation.
//! * [`dictionary`] enumerates feature terms and evaluates them pointwise.
//! * [`system`] assembles the differential or weak-form linear system together
//!   with its normalizations and the high-dynamic-region selector.
//! * [`sparse`] searches supports (LASSO, subspace pursuit, group subspace
//!   pursuit, trimming).
//! * [`select`] arbitrates between candidate models.
//! * [`varying`] handles space/time varying coefficients.
//! * [`metrics`] computes the evaluation quantities.
//! * [`pipeline`] chains the stages into the named identification methods.
//!
//! With the `parallel` feature, independent candidate evaluations run on a
//! rayon pool; results are reduced in a fixed order so reports stay
//! deterministic.

#![no_std]
// `!(x > 0.0)` guards deliberately reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod denoise;
pub mod dictionary;
mod error;
pub mod fft;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod select;
pub mod simulate;
pub mod sparse;
pub mod system;
pub mod varying;

pub use error::{Error, Result};

/// Items every module pulls in: the `alloc` collections and float methods.
///
/// Float methods resolve through `num_traits::Float` (backed by `libm`) when
/// std is absent, and through the inherent methods when std is linked.
pub(crate) mod prelude {
    pub use alloc::borrow::ToOwned;
    pub use alloc::boxed::Box;
    pub use alloc::collections::{BTreeMap, BTreeSet};
    pub use alloc::format;
    pub use alloc::string::String;
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[allow(unused_imports)]
    pub use num_traits::Float;
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is enabled.
/// Output order always matches input order.
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> alloc::vec::Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
