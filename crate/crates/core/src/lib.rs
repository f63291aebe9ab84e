//! Information-plane analysis of small feed-forward networks.
//!
//! Representations are either layer activations or layer conductances
//! (Jacobian-weighted inputs). Both can be placed on the information plane,
//! scored with per-layer transfer-efficiency metrics, and checked against the
//! data processing inequality.

// `!(x > 0.0)` guards intentionally reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conductance;
pub mod dpi;
pub mod dump;
pub mod error;
pub mod estimators;
pub mod ite;
pub mod network;
pub mod plane;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use conductance::{
    batch_conductance, completeness_gap, conductance_all_layers, gradient_conductance,
    integrated_gradients_conductance, ConductanceMethod, ConductanceRecord, IgConfig, IgRule,
    DEFAULT_IG_STEPS,
};
pub use dpi::{dpi_check, plane_dpi, DpiAxis, DpiReport, Violation, DEFAULT_DPI_TOLERANCE};
pub use dump::{read_dump, write_dump, Dump, DumpContents, DumpManifest, LayerKind, Units};
pub use error::{Error, Result};
pub use estimators::{
    BinningConfig, Estimator, GaussianSpec, LabelEntropyMode, LabelSet, MIEstimate,
};
pub use ite::{ite_profile, ITEConfig, ITERow};
pub use network::{Activation, LayerTrace, Network, NetworkSpec};
pub use plane::{
    activation_plane, conductance_plane, Basis, PlaneConfig, PlaneEstimator, PlaneRow,
    Representation,
};
pub use tensor::Tensor;
