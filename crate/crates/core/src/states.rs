//! Target states of the purification protocol and the fidelity measure.
//!
//! All labels use the physical basis: `g` is an emitter without an
//! excitation, `e` one with. The three-emitter `t1..t4` states are the
//! mixed-symmetry partners of the W states: `t1`, `t2` span the
//! one-excitation complement of W, `t3`, `t4` the two-excitation one.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, DensityMatrix, StateVector};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    Singlet,
    W,
    Ghz,
    /// Mixed-symmetry state `t1`..`t4`.
    T(u8),
    /// Product configuration written emitter 1 first, e.g. `egg`.
    Product(String),
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Singlet => f.write_str("singlet"),
            StateLabel::W => f.write_str("w"),
            StateLabel::Ghz => f.write_str("ghz"),
            StateLabel::T(i) => write!(f, "t{i}"),
            StateLabel::Product(cfg) => write!(f, "product({cfg})"),
        }
    }
}

impl FromStr for StateLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidParameter(format!("unknown state label `{s}`"));
        match lower.as_str() {
            "singlet" => return Ok(StateLabel::Singlet),
            "w" => return Ok(StateLabel::W),
            "ghz" => return Ok(StateLabel::Ghz),
            "t1" | "t2" | "t3" | "t4" => return Ok(StateLabel::T(lower.as_bytes()[1] - b'0')),
            _ => {}
        }
        let body = lower
            .strip_prefix("product(")
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(&lower);
        if !body.is_empty() && body.chars().all(|c| matches!(c, '0' | '1' | 'g' | 'e')) {
            let normalized = body
                .chars()
                .map(|c| if c == '1' || c == 'e' { 'e' } else { 'g' })
                .collect();
            Ok(StateLabel::Product(normalized))
        } else {
            Err(bad())
        }
    }
}

/// A labelled emitter-space target state.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedState {
    label: StateLabel,
    state: StateVector,
}

impl NamedState {
    pub fn label(&self) -> &StateLabel {
        &self.label
    }

    pub fn n_emitters(&self) -> usize {
        self.state.space().n_emitters()
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.state).expect("named states are normalized")
    }
}

/// Builds the state for `label` on `n_emitters` emitters.
///
/// `singlet` needs two emitters; `w`, `ghz` and `t1..t4` need three.
pub fn make_named_state(label: &StateLabel, n_emitters: usize) -> Result<NamedState> {
    let space = CompositeSpace::emitters_only(n_emitters)?;
    let incompatible = || Error::IncompatibleLabel {
        label: label.to_string(),
        n_emitters,
    };
    let terms: Vec<(&str, f64)> = match label {
        StateLabel::Singlet if n_emitters == 2 => vec![("eg", 1.0), ("ge", -1.0)],
        StateLabel::W if n_emitters == 3 => vec![("egg", 1.0), ("geg", 1.0), ("gge", 1.0)],
        StateLabel::Ghz if n_emitters == 3 => vec![("ggg", 1.0), ("eee", -1.0)],
        StateLabel::T(1) if n_emitters == 3 => vec![("egg", 1.0), ("gge", -1.0)],
        StateLabel::T(2) if n_emitters == 3 => vec![("egg", 1.0), ("geg", -2.0), ("gge", 1.0)],
        StateLabel::T(3) if n_emitters == 3 => vec![("gee", 1.0), ("eeg", -1.0)],
        StateLabel::T(4) if n_emitters == 3 => vec![("gee", 1.0), ("ege", -2.0), ("eeg", 1.0)],
        StateLabel::Product(cfg) => {
            if cfg.chars().count() != n_emitters {
                return Err(incompatible());
            }
            vec![(cfg.as_str(), 1.0)]
        }
        _ => return Err(incompatible()),
    };
    let mut amps = DVector::<Complex64>::zeros(space.dim());
    for (cfg, w) in &terms {
        amps[space.parse_config(cfg)?] = Complex64::new(*w, 0.0);
    }
    let state = StateVector::new(space, amps)?.normalized()?;
    Ok(NamedState {
        label: label.clone(),
        state,
    })
}

/// `⟨ψ|ρ|ψ⟩`, clamped into `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, target: &NamedState) -> Result<f64> {
    Ok(rho.expectation_in(&target.state)?.clamp(0.0, 1.0))
}
