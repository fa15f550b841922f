use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::space::CompositeSpace;
use crate::linalg;

/// Tolerance on `|‖ψ‖ - 1|` for a vector to count as normalized.
pub const NORM_TOL: f64 = 1e-12;

/// A pure state (not necessarily normalized) on a [`CompositeSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: CompositeSpace,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn new(space: CompositeSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::LengthMismatch {
                expected: space.dim(),
                got: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "state amplitudes must be finite".into(),
            ));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn from_slice(space: CompositeSpace, amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(space, DVector::from_column_slice(amplitudes))
    }

    pub fn zeros(space: CompositeSpace) -> Self {
        Self {
            space,
            amplitudes: DVector::zeros(space.dim()),
        }
    }

    /// Product state `|config⟩ ⊗ |photons⟩`, with the configuration written
    /// emitter 1 first (`"10"` is emitter 1 excited, emitter 2 ground).
    pub fn basis(space: CompositeSpace, config: &str, photons: usize) -> Result<Self> {
        let bits = space.parse_config(config)?;
        Self::basis_from_config(space, bits, photons)
    }

    /// Same as [`Self::basis`] with the configuration given as a bit mask.
    pub fn basis_from_config(space: CompositeSpace, config: usize, photons: usize) -> Result<Self> {
        let idx = space.try_index(config, photons)?;
        let mut out = Self::zeros(space);
        out.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(out)
    }

    /// Emitter-space vector `v ⊗ |photons⟩` lifted into `target`.
    pub fn tensor_fock(&self, target: CompositeSpace, photons: usize) -> Result<Self> {
        if self.space != target.emitter_space() {
            return Err(Error::SpaceMismatch {
                left: self.space,
                right: target.emitter_space(),
            });
        }
        let mut out = Self::zeros(target);
        for (config, amp) in self.amplitudes.iter().enumerate() {
            out.amplitudes[target.try_index(config, photons)?] = *amp;
        }
        Ok(out)
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            space: self.space,
            amplitudes: self.amplitudes.unscale(n),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_space(other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Distance to `other` minimized over a global phase.
    pub fn phase_distance(&self, other: &StateVector) -> Result<f64> {
        let ip = self.inner(other)?;
        let phase = if ip.norm() > 0.0 {
            ip / ip.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        Ok((&other.amplitudes - &self.amplitudes * phase).norm())
    }

    /// Contracts the cavity factor with `⟨photons|`, returning the
    /// (generally sub-normalized) emitter-space vector. Its squared norm is
    /// the probability of finding `photons` photons.
    pub fn project_cavity(&self, photons: usize) -> Result<StateVector> {
        if photons > self.space.photon_cutoff() {
            return Err(Error::PhotonOutOfRange {
                photons,
                cutoff: self.space.photon_cutoff(),
            });
        }
        let ed = self.space.emitter_dim();
        let start = photons * ed;
        Ok(StateVector {
            space: self.space.emitter_space(),
            amplitudes: self.amplitudes.rows(start, ed).into_owned(),
        })
    }

    pub(crate) fn check_space(&self, other: CompositeSpace) -> Result<()> {
        if self.space != other {
            return Err(Error::SpaceMismatch {
                left: self.space,
                right: other,
            });
        }
        Ok(())
    }
}

/// A mixed state on a [`CompositeSpace`] (usually the emitter-only space).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: CompositeSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Hermiticity and trace tolerance applied by [`Self::new`].
    pub const TOL: f64 = 1e-12;
    /// Most negative eigenvalue accepted by [`Self::new`].
    pub const EIGEN_FLOOR: f64 = -1e-10;

    /// Validates Hermiticity, unit trace and positivity at the default
    /// tolerances.
    pub fn new(space: CompositeSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::with_tolerance(space, matrix, Self::TOL, Self::EIGEN_FLOOR)
    }

    /// Validates with loosened tolerances, then symmetrizes and rescales to
    /// unit trace. Intended for hand-written input.
    pub fn with_tolerance(
        space: CompositeSpace,
        matrix: DMatrix<Complex64>,
        tol: f64,
        eigen_floor: f64,
    ) -> Result<Self> {
        let d = space.dim();
        if matrix.shape() != (d, d) {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {:?} does not match dimension {d}",
                matrix.shape()
            )));
        }
        let herm = linalg::hermitian_residual(&matrix);
        if !(herm <= tol) {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (residual {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if !((tr.re - 1.0).abs() <= tol && tr.im.abs() <= tol) {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace is {tr} instead of 1"
            )));
        }
        let sym = linalg::hermitian_part(&matrix).unscale(tr.re);
        let min_eig = sym
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < eigen_floor {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { space, matrix: sym })
    }

    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let psi = state.normalized()?;
        let m = psi.amplitudes() * psi.amplitudes().adjoint();
        Ok(Self {
            space: state.space(),
            matrix: m,
        })
    }

    /// Convex combination `Σ w_i |ψ_i⟩⟨ψ_i|` with weights rescaled to sum to 1.
    pub fn mixture(states: &[(f64, StateVector)]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let space = first.1.space();
        let total: f64 = states.iter().map(|(w, _)| *w).sum();
        if states.iter().any(|(w, _)| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "mixture weights must be non-negative with a positive sum".into(),
            ));
        }
        let mut m = DMatrix::zeros(space.dim(), space.dim());
        for (w, s) in states {
            s.check_space(space)?;
            let psi = s.normalized()?;
            m += (psi.amplitudes() * psi.amplitudes().adjoint()).scale(*w / total);
        }
        Ok(Self { space, matrix: m })
    }

    pub fn maximally_mixed(space: CompositeSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: DMatrix::identity(d, d).unscale(d as f64),
        }
    }

    /// Wraps a matrix produced by an operation that preserves the density
    /// matrix invariants by construction.
    pub(crate) fn from_trusted(space: CompositeSpace, matrix: DMatrix<Complex64>) -> Self {
        Self { space, matrix }
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨ψ|ρ|ψ⟩` for a (normalized) pure state ψ.
    pub fn expectation_in(&self, psi: &StateVector) -> Result<f64> {
        psi.check_space(self.space)?;
        let v = psi.amplitudes();
        Ok(v.dotc(&(&self.matrix * v)).re)
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}
