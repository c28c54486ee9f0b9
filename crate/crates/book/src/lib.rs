//! Runs the guide's code samples as doctests.

#[cfg(doctest)]
mod chapters {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/detector-scalars.md")]
    mod detector_scalars {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/mutual-information.md")]
    mod mutual_information {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/lattice-oracle.md")]
    mod lattice_oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
