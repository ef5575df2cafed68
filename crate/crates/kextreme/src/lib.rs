//! Exact-arithmetic toolkit for decreasing rearrangements, submajorization
//! orbits, Marcinkiewicz norms and k-extreme points.
//!
//! The crate decides, in exact rational arithmetic, whether a step function
//! is a k-extreme point of an orbit `Ω(g)`, the positive orbit `Ω′(g)` or a
//! Marcinkiewicz unit ball, and emits machine-checkable witnesses whenever
//! the answer is negative. A finite-dimensional polyhedral oracle provides
//! independent ground truth, and a floating-point matrix companion carries
//! the singular-value specialization.
//!
//! Every value is immutable and every operation is a pure function of its
//! inputs, so concurrent use is unrestricted throughout.
//!
//! Start with the runnable programs under `examples/` — there is one per
//! capability — or with the `kextreme` binary for batch JSON processing.

pub mod cli;
pub mod exactpoly;
pub mod extremality;
pub mod major;
pub mod matop;
pub mod oracle;
pub(crate) mod ratlinalg;
pub mod scalar;
pub mod stepfn;

pub use extremality::{
    gen_witness, k_extreme, mu_average_check, verify_witness, ExtremalityVerdict, Witness,
};
pub use major::{contains, equimeasurable, marcinkiewicz_norm, submajorizes, BallKind, BallSpec};
pub use scalar::{ExtendedScalar, Scalar};
pub use stepfn::{IntegralCurve, StepFunction};
