//! Principal components regression with Laplacian eigenmaps (PCR-LE).
//!
//! The crate builds ε-neighborhood graphs over design points, computes the
//! lowest-frequency eigenvectors of the unnormalized graph Laplacian, and
//! regresses responses onto them. Alongside the estimator and its
//! goodness-of-fit test it ships the population-level spectral series
//! oracle, kernel smoothing, least squares on Neumann cosines, Laplacian
//! smoothing, uniform edge sparsification, and a seeded Monte-Carlo harness
//! for rate experiments.
//!
//! ```
//! use pcrle::{graph::{build_graph, Kernel}, sampling, spectra, regress, rng::SeedSequence};
//!
//! let mut rng = SeedSequence::new(7).stream(0);
//! let points = sampling::sample_uniform_cube(400, 1, &mut rng).unwrap();
//! let f0 = sampling::RegressionFunction::Constant(0.0);
//! let data = sampling::make_responses(&points, &f0, 1.0, &mut rng).unwrap();
//! let g = build_graph(&points, 0.05, Kernel::Boxcar, 1).unwrap();
//! let spectrum = spectra::smallest_eigenpairs(&g, 8, &spectra::EigenOptions::default()).unwrap();
//! let fit = regress::pcr_le_fit(&spectrum, &data.responses, 8).unwrap();
//! assert_eq!(fit.fitted.len(), 400);
//! ```

pub mod error;
pub mod experiments;
pub mod graph;
pub mod linalg;
pub mod regress;
pub mod rng;
pub mod sampling;
pub mod sparsify;
pub mod spectra;
pub mod tune;

pub use error::{Error, Result};
