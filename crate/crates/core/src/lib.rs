pub mod constants;
pub mod error;
pub mod langevin;
pub mod manifold;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/ledger.md")]
    mod ledger {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/tubes.md")]
    mod tubes {}
    #[doc = include_str!("../../../book/src/langevin.md")]
    mod langevin {}
}
