//! Deformation quantization of the cylinder ℝⁿ × 𝕋ᵈ on truncated Fourier spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`fourier`] holds geometries, mode windows and transforms;
//! * [`star`] the twisted convolution products and their representations;
//! * [`crossed`] the partial-Fourier picture and the crossed-product map `Q`;
//! * [`clifford`] gamma matrices, gradings and fundamental symmetries;
//! * [`operator`] and [`modeop`] dense and lazy operators on spinor-valued mode spaces;
//! * [`spectral`] Dirac operators, Schatten sums and Dixmier-trace estimates;
//! * [`cocycle`] Chern characters, Hochschild cocycles and admissibility checks;
//! * [`morita`] the bimodule `𝒮(ℝ)` between the cylinder algebra and `𝒮(ℤ)`;
//! * [`cli`] the experiment driver behind the `starcyl` binary.

pub mod cli;
pub mod clifford;
pub mod cocycle;
pub mod crossed;
pub mod fit;
pub mod fourier;
pub mod modeop;
pub mod morita;
pub mod operator;
pub mod spectral;
pub mod star;

pub use num_complex::Complex64;
