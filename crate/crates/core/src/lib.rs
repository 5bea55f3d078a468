pub mod cutoff;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod multiindex;
pub mod numberfield;
pub mod phases;
pub mod poly;
pub mod quadrature;
pub mod rational;
pub mod roots;
pub mod stats;
pub mod sublevel;
pub mod tarry;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/number-fields.md")]
    mod number_fields {}
    #[doc = include_str!("../../../book/src/trace-phases.md")]
    mod trace_phases {}
    #[doc = include_str!("../../../book/src/functionals.md")]
    mod functionals {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/sublevel.md")]
    mod sublevel {}
    #[doc = include_str!("../../../book/src/tarry.md")]
    mod tarry {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
