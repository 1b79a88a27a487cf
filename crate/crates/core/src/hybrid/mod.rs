//! Hybrid classifiers: a classical layer stack whose scalar output is the
//! rotation angle of a one-qubit circuit, read out as a class distribution.

mod arch;
mod head;
mod model;

pub use arch::{Architecture, LayerSpec, ModelId};
pub use head::{HeadMode, QuantumHead};
pub use model::{build_m1, build_m2, build_m3, HybridModel, DEFAULT_INIT_SEED};
