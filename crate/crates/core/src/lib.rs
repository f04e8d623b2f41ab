//! Desk-scale numerical laboratory for incompressible Euler flows and related models.

pub mod error;
pub mod euler2d;
pub mod fit;
pub mod ipm;
pub mod lagrangian;
pub mod linalg;
pub mod models1d;
pub mod presets;
pub mod selfsim;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
pub use euler2d::{DiagnosticsRecord, EulerRun, EulerState, RunSettings, SteadyState};
pub use lagrangian::{FlowMapSnapshot, ParticleSet, WindingRecord};
pub use spectral::{
    biot_savart, dealias, hilbert_transform, leray_project, spectral_calculus, Derived, Grid1, Grid2,
    SpectralField1, SpectralField2, SpectralOp, VectorField2, C64,
};
