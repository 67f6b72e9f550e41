//! Transition densities from characteristic functions.
//!
//! A single-layer network with Gaussian activation is fitted in the Fourier
//! domain, where its transform is available in closed form, and the fitted
//! density is then used for European and Bermudan pricing.
//!
//! ```
//! use cfnet::charlib::{CharFn, Dynamics, MertonParams, ModelSpec};
//!
//! let model = ModelSpec::new(Dynamics::Merton(MertonParams::risk_neutral(0.05, 0.15, 0.1, -1.08, 0.4)), 1.0).unwrap();
//! let g0 = model.eval(0.0);
//! assert!((g0.re - 1.0).abs() < 1e-12 && g0.im.abs() < 1e-12);
//! ```

pub mod charlib;
pub mod cosref;
pub mod gaussnet;
pub mod pricer;
pub mod quadint;
pub mod sampler;
pub mod trainer;

pub use num_complex::Complex64;
