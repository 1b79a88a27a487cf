//! Numerical core for hybrid classical/quantum image classifiers.
//!
//! A small CNN engine with explicit backpropagation, an exact single-qubit
//! statevector simulator with parameter-shift gradients, the three hybrid
//! model builders, ensembling rules and classification metrics.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, image decoding
//! and the command line live in the `hqcnn` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;

pub mod ensemble;
pub mod hybrid;
pub mod metrics;
pub mod nn;
pub mod qsim;
pub mod rng;
pub mod split;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Parameter, Tensor};

/// Binary class label. Index 1 is always the malignant class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Benign = 0,
    Malignant = 1,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Benign, Class::Malignant];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Class> {
        match index {
            0 => Some(Class::Benign),
            1 => Some(Class::Malignant),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Benign => "benign",
            Class::Malignant => "malignant",
        }
    }

    pub fn from_name(name: &str) -> Option<Class> {
        match name {
            "benign" => Some(Class::Benign),
            "malignant" => Some(Class::Malignant),
            _ => None,
        }
    }
}

impl core::fmt::Display for Class {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}
