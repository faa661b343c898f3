//! Simulation and analysis toolkit for post-selected multi-photon GHZ states
//! in path-encoded photonic circuits.
//!
//! The crate is organized bottom-up:
//!
//! - [`qmath`]: dense complex linear algebra for up to a handful of qubits.
//! - [`circuit`]: analytic models of the Bell-pair sources, the path-parity
//!   sorter, noisy GHZ states and the interference fringes.
//! - [`sampler`]: seeded finite-count measurement records.
//! - [`tomography`]: linear-inversion reconstruction with physical projection.
//! - [`nonlocality`]: all-versus-nothing error rates, Mermin values, the
//!   GHZ entanglement witness and noise-model calibration.
//! - [`resample`]: the Poisson Monte Carlo engine behind every error bar.
//!
//! Qubit `0` (photon A) is always the most significant bit of a
//! computational-basis index.

pub mod circuit;
pub mod error;
pub mod exec;
pub mod nonlocality;
pub mod qmath;
pub mod resample;
pub mod sampler;
pub mod tomography;

pub use error::{Error, Result};
pub use exec::Execution;
pub use qmath::{ComplexMatrix, DensityMatrix, Ket, Pauli, PauliString};
pub use resample::{ResampleConfig, UncertainValue};
pub use sampler::{Basis, CountRecord, ExperimentRecords, MeasurementSetting, SamplerConfig};
