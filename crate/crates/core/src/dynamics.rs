//! Resonant emitter–cavity coupling and exact unitary evolution.
//!
//! Units: `ħ = 1`. Times only ever enter through the product `γt`, so
//! dimensionless runs set `γ = 1` and pass `γτ` as the time.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, OperatorMatrix, StateVector};
use crate::linalg::BlockEigen;

/// Parameters of the coupling Hamiltonian
/// `H = γ Σ_n m_n (a σ_n⁺ + a† σ_n⁻)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    space: CompositeSpace,
    gamma: f64,
    multipliers: Vec<f64>,
}

impl HamiltonianSpec {
    /// Identical couplings `γ` on every emitter.
    pub fn new(space: CompositeSpace, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "coupling must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self {
            space,
            gamma,
            multipliers: vec![1.0; space.n_emitters()],
        })
    }

    /// Per-emitter coupling multipliers `m_n` (emitter 1 first).
    pub fn with_multipliers(mut self, multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.len() != self.space.n_emitters() {
            return Err(Error::InvalidParameter(format!(
                "{} coupling multipliers given for {} emitters",
                multipliers.len(),
                self.space.n_emitters()
            )));
        }
        if multipliers.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "coupling multipliers must be finite".into(),
            ));
        }
        self.multipliers = multipliers;
        Ok(self)
    }

    /// Same couplings on a different space (e.g. a larger photon cutoff).
    pub fn on_space(&self, space: CompositeSpace) -> Result<Self> {
        if space.n_emitters() != self.space.n_emitters() {
            return Err(Error::SpaceMismatch {
                left: self.space,
                right: space,
            });
        }
        Ok(Self {
            space,
            gamma: self.gamma,
            multipliers: self.multipliers.clone(),
        })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn has_identical_couplings(&self) -> bool {
        self.multipliers.iter().all(|&m| m == self.multipliers[0])
    }
}

/// Builds `H = γ Σ_n m_n (a σ_n⁺ + a† σ_n⁻)` on the spec's space.
///
/// The result is attested Hermitian and commutes with the total excitation
/// number.
pub fn build_tc_hamiltonian(spec: &HamiltonianSpec) -> OperatorMatrix {
    let space = spec.space;
    let d = space.dim();
    let mut h = DMatrix::zeros(d, d);
    for photons in 1..=space.photon_cutoff() {
        let field = (photons as f64).sqrt();
        for config in 0..space.emitter_dim() {
            let from = space.index(config, photons);
            for (n, &m) in spec.multipliers.iter().enumerate() {
                let bit = 1 << n;
                if config & bit != 0 {
                    continue;
                }
                // a σ⁺ : one photon absorbed by emitter n
                let to = space.index(config | bit, photons - 1);
                let g = Complex64::new(spec.gamma * m * field, 0.0);
                h[(to, from)] = g;
                h[(from, to)] = g;
            }
        }
    }
    OperatorMatrix::new(space, h).expect("shape").attest()
}

/// `U(t) = e^{-iHt}` together with the time it was evaluated at.
#[derive(Debug, Clone)]
pub struct Propagator {
    unitary: OperatorMatrix,
    time: f64,
}

impl Propagator {
    pub fn operator(&self) -> &OperatorMatrix {
        &self.unitary
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        self.unitary.matrix()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.unitary.apply(state)
    }
}

/// Cached eigendecomposition of a Hamiltonian, for evaluating many
/// propagators of the same `H`.
#[derive(Debug, Clone)]
pub struct SpectralHamiltonian {
    space: CompositeSpace,
    eigen: BlockEigen,
}

impl SpectralHamiltonian {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian {
                residual: crate::linalg::hermitian_residual(h.matrix()),
            });
        }
        Ok(Self {
            space: h.space(),
            eigen: BlockEigen::new(h.matrix())?,
        })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen.eigenvalues()
    }

    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("evolution time {t} is not finite")));
        }
        let u = OperatorMatrix::new(self.space, self.eigen.exp_minus_i(t))?.attest();
        if !u.is_unitary() {
            return Err(Error::Numeric(format!(
                "propagator at t = {t} failed the unitarity check (residual {:e})",
                crate::linalg::unitary_residual(u.matrix())
            )));
        }
        Ok(Propagator { unitary: u, time: t })
    }
}

/// `U(t) = V e^{-iΛt} V†` from the Hermitian eigendecomposition of `h`.
pub fn propagator(h: &OperatorMatrix, t: f64) -> Result<Propagator> {
    SpectralHamiltonian::new(h)?.propagator(t)
}

/// `U(t)|ψ⟩`.
pub fn evolve(state: &StateVector, h: &OperatorMatrix, t: f64) -> Result<StateVector> {
    if state.space() != h.space() {
        return Err(Error::SpaceMismatch {
            left: state.space(),
            right: h.space(),
        });
    }
    propagator(h, t)?.apply(state)
}
