use core::fmt;
use core::str::FromStr;

use crate::qsim::{self, Circuit, Observable};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    /// Exact measurement probabilities.
    Analytic,
    /// Probabilities estimated from `shots` measurements. Sampling seeds are
    /// derived from `seed` and the angle, so the head stays a pure function.
    Shots { shots: u64, seed: u64 },
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadMode::Analytic => f.write_str("analytic"),
            HeadMode::Shots { shots, .. } => write!(f, "shots:{shots}"),
        }
    }
}

impl FromStr for HeadMode {
    type Err = Error;

    /// Parses `analytic` or `shots:N`; the sampling seed starts at 0.
    fn from_str(s: &str) -> Result<Self> {
        if s == "analytic" {
            return Ok(HeadMode::Analytic);
        }
        s.strip_prefix("shots:")
            .and_then(|n| n.parse::<u64>().ok())
            .filter(|&n| n > 0)
            .map(|shots| HeadMode::Shots { shots, seed: 0 })
            .ok_or_else(|| {
                Error::Parse(alloc::format!(
                    "head mode `{s}`, expected analytic or shots:N"
                ))
            })
    }
}

/// `theta -> [P(0), P(1)]` through Hadamard then `Ry(theta)` on `|0>`.
/// Class index 1 is the probability of measuring `|1>`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumHead {
    pub mode: HeadMode,
    circuit: Circuit,
}

impl Default for QuantumHead {
    fn default() -> Self {
        QuantumHead::new(HeadMode::Analytic)
    }
}

impl QuantumHead {
    pub fn new(mode: HeadMode) -> QuantumHead {
        QuantumHead {
            mode,
            circuit: Circuit::hadamard_ry(),
        }
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn forward(&self, theta: f64) -> Result<[f64; 2]> {
        if !theta.is_finite() {
            return Err(Error::Contract(alloc::format!(
                "non-finite circuit angle {theta}"
            )));
        }
        let state = qsim::run_circuit(&self.circuit, &[theta])?;
        let p1 = match self.mode {
            HeadMode::Analytic => qsim::prob_one(&state),
            HeadMode::Shots { shots, seed } => {
                let seed = rng::derive_seed(seed, &[theta.to_bits(), 0]);
                qsim::sampled_expectation(&state, Observable::ProjectorOne, shots, seed)?
            }
        };
        Ok([1.0 - p1, p1])
    }

    /// `upstream . d[p0, p1]/dtheta`, with `dp1/dtheta` from the parameter
    /// shift rule on the `|1>` projector and `dp0 = -dp1`.
    pub fn backward(&self, upstream: [f64; 2], theta: f64) -> Result<f64> {
        let dp1 = match self.mode {
            HeadMode::Analytic => {
                qsim::param_shift_grad(&self.circuit, &[theta], 0, Observable::ProjectorOne)?
            }
            HeadMode::Shots { shots, seed } => {
                let seed = rng::derive_seed(seed, &[theta.to_bits(), 1]);
                qsim::param_shift_grad_sampled(
                    &self.circuit,
                    &[theta],
                    0,
                    Observable::ProjectorOne,
                    shots,
                    seed,
                )?
            }
        };
        Ok((upstream[1] - upstream[0]) * dp1)
    }
}
