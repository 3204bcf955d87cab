//! Demand distributions, loss functions and period-range convolutions.

mod convolution;
mod distribution;
pub mod special;

pub use convolution::{
    convolve, convolve_with, Convolution, ConvolutionConfig, ConvolutionTable, DemandProcess,
};
pub use distribution::{Distribution, DistributionSpec, GridLaw, Interval, Law, GRID_MASS_TOLERANCE};
