//! Numerical toolkit for Fefferman's complex Monge–Ampère operator on
//! bounded domains in `C^n`.

pub mod expr;
pub mod jets;
pub mod calculus;
pub mod fefferman;
pub mod geometry;
pub mod criteria;
pub mod solver;
pub mod spectrum;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/expressions.md")]
    pub struct Expressions;
    #[doc = include_str!("../../../book/src/operator.md")]
    pub struct Operator;
    #[doc = include_str!("../../../book/src/approximation.md")]
    pub struct Approximation;
    #[doc = include_str!("../../../book/src/criteria.md")]
    pub struct Criteria;
    #[doc = include_str!("../../../book/src/sampling.md")]
    pub struct Sampling;
    #[doc = include_str!("../../../book/src/radial.md")]
    pub struct Radial;
    #[doc = include_str!("../../../book/src/spectrum.md")]
    pub struct Spectrum;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
