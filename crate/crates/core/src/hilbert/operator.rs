use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::space::CompositeSpace;
use crate::hilbert::state::StateVector;
use crate::linalg;

/// Tolerance for the Hermitian attestation, `‖A - A†‖_max`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for the unitary attestation, `‖A†A - I‖_max`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Dense operator on a [`CompositeSpace`].
///
/// The `hermitian` / `unitary` flags are only ever set by [`Self::attest`],
/// after the corresponding residual has been measured.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: CompositeSpace,
    matrix: DMatrix<Complex64>,
    hermitian: bool,
    unitary: bool,
}

impl OperatorMatrix {
    pub fn new(space: CompositeSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.shape() != (space.dim(), space.dim()) {
            return Err(Error::LengthMismatch {
                expected: space.dim(),
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            space,
            matrix,
            hermitian: false,
            unitary: false,
        })
    }

    pub fn identity(space: CompositeSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: DMatrix::identity(d, d),
            hermitian: true,
            unitary: true,
        }
    }

    /// Measures Hermiticity and unitarity and sets the flags accordingly.
    pub fn attest(mut self) -> Self {
        self.hermitian = linalg::hermitian_residual(&self.matrix) <= HERMITIAN_TOL;
        self.unitary = linalg::unitary_residual(&self.matrix) <= UNITARY_TOL;
        self
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_space(other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix * &other.matrix,
            hermitian: false,
            unitary: false,
        })
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_space(other.space)?;
        Ok(Self {
            space: self.space,
            matrix: linalg::commutator(&self.matrix, &other.matrix),
            hermitian: false,
            unitary: false,
        })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        state.check_space(self.space)?;
        StateVector::new(self.space, &self.matrix * state.amplitudes())
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, state: &StateVector) -> Result<Complex64> {
        state.check_space(self.space)?;
        let v = state.amplitudes();
        Ok(v.dotc(&(&self.matrix * v)))
    }

    fn check_space(&self, other: CompositeSpace) -> Result<()> {
        if self.space != other {
            return Err(Error::SpaceMismatch {
                left: self.space,
                right: other,
            });
        }
        Ok(())
    }
}

/// Cavity annihilation and creation operators `(a, a†)`, identity on the
/// emitters. `a†` annihilates the top Fock level.
pub fn ladder_operators(space: CompositeSpace) -> (OperatorMatrix, OperatorMatrix) {
    let d = space.dim();
    let mut a = DMatrix::zeros(d, d);
    for config in 0..space.emitter_dim() {
        for n in 1..=space.photon_cutoff() {
            a[(space.index(config, n - 1), space.index(config, n))] =
                Complex64::new((n as f64).sqrt(), 0.0);
        }
    }
    let a_dag = a.adjoint();
    (
        OperatorMatrix::new(space, a).expect("shape").attest(),
        OperatorMatrix::new(space, a_dag).expect("shape").attest(),
    )
}

/// `σ⁻` on emitter `emitter` (1-based), identity elsewhere.
pub fn emitter_lowering(space: CompositeSpace, emitter: usize) -> Result<OperatorMatrix> {
    if emitter == 0 || emitter > space.n_emitters() {
        return Err(Error::EmitterIndex {
            index: emitter,
            n_emitters: space.n_emitters(),
        });
    }
    let bit = 1usize << (emitter - 1);
    let d = space.dim();
    let mut m = DMatrix::zeros(d, d);
    for photons in 0..=space.photon_cutoff() {
        for config in (0..space.emitter_dim()).filter(|c| c & bit != 0) {
            m[(space.index(config ^ bit, photons), space.index(config, photons))] =
                Complex64::new(1.0, 0.0);
        }
    }
    Ok(OperatorMatrix::new(space, m)?.attest())
}

/// `σ⁺` on emitter `emitter` (1-based).
pub fn emitter_raising(space: CompositeSpace, emitter: usize) -> Result<OperatorMatrix> {
    Ok(emitter_lowering(space, emitter)?.adjoint())
}

/// `N_tot = a†a + Σ σ⁺σ⁻`, diagonal in the product basis.
pub fn total_excitation_operator(space: CompositeSpace) -> OperatorMatrix {
    let d = space.dim();
    let m = DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex64::new(space.quanta(r) as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    OperatorMatrix::new(space, m).expect("shape").attest()
}
