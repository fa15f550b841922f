//! The conditional map obtained by letting emitters and cavity evolve for a
//! fixed interval and then finding the cavity in a fixed Fock state.
//!
//! For an emitter state `v` and kept photon number `k`, the channel operator
//! is `K = ⟨k|U(τ)|k⟩`, i.e. `K v = ⟨k| U(τ) (v ⊗ |k⟩)`. It is a contraction;
//! eigenvectors with `|λ| = 1` are left untouched by evolution and
//! measurement alike (photon-trapping states), everything else decays under
//! repeated successful measurements.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{build_tc_hamiltonian, HamiltonianSpec, SpectralHamiltonian};
use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, DensityMatrix, StateVector};
use crate::linalg;
use crate::states::{make_named_state, StateLabel};

/// Default `1 - |λ|` below which an eigenvector counts as trapping.
pub const TRAPPING_TOL: f64 = 1e-9;
/// Default eigenvalue distance for grouping degenerate eigenvalues.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Conditional probabilities at or below this abort the step.
pub const PROBABILITY_THRESHOLD: f64 = 1e-14;

/// Smallest photon cutoff that holds every state reachable from
/// `v ⊗ |kept⟩` with `v` arbitrary.
pub fn required_cutoff(n_emitters: usize, kept_photons: usize) -> usize {
    n_emitters + kept_photons
}

#[derive(Debug, Clone)]
pub struct ConditionalChannel {
    spec: HamiltonianSpec,
    tau: f64,
    kept_photons: usize,
    operator: DMatrix<Complex64>,
}

/// Builds `K = ⟨k|U(τ)|k⟩` for the coupling in `spec`.
///
/// The spec's photon cutoff must be at least `n_emitters + k`, otherwise
/// the truncated dynamics would not conserve probability inside the
/// sector that `v ⊗ |k⟩` explores.
pub fn conditional_channel(
    spec: &HamiltonianSpec,
    tau: f64,
    kept_photons: usize,
) -> Result<ConditionalChannel> {
    let space = spec.space();
    let required = required_cutoff(space.n_emitters(), kept_photons);
    if space.photon_cutoff() < required {
        return Err(Error::SectorNotClosed {
            cutoff: space.photon_cutoff(),
            kept: kept_photons,
            required,
        });
    }
    let h = build_tc_hamiltonian(spec);
    let u = SpectralHamiltonian::new(&h)?.propagator(tau)?;
    let ed = space.emitter_dim();
    let offset = kept_photons * ed;
    let operator = u.matrix().view((offset, offset), (ed, ed)).into_owned();
    Ok(ConditionalChannel {
        spec: spec.clone(),
        tau,
        kept_photons,
        operator,
    })
}

/// All blocks `⟨j|U(τ)|k⟩`, `j = 0..=cutoff`, for a cavity prepared with
/// `k` photons. Together they form a complete set of measurement operators
/// on the emitters: `Σ_j K_j† K_j = I`.
pub fn measurement_operators(
    spec: &HamiltonianSpec,
    tau: f64,
    prepared_photons: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    let space = spec.space();
    let required = required_cutoff(space.n_emitters(), prepared_photons);
    if space.photon_cutoff() < required {
        return Err(Error::SectorNotClosed {
            cutoff: space.photon_cutoff(),
            kept: prepared_photons,
            required,
        });
    }
    let h = build_tc_hamiltonian(spec);
    let u = SpectralHamiltonian::new(&h)?.propagator(tau)?;
    let ed = space.emitter_dim();
    Ok((0..=space.photon_cutoff())
        .map(|j| {
            u.matrix()
                .view((j * ed, prepared_photons * ed), (ed, ed))
                .into_owned()
        })
        .collect())
}

impl ConditionalChannel {
    /// Unit coupling on exactly the cutoff the channel needs, with the
    /// interval given as the dimensionless `γτ`.
    pub fn for_emitters(n_emitters: usize, gamma_tau: f64, kept_photons: usize) -> Result<Self> {
        let space = CompositeSpace::new(n_emitters, required_cutoff(n_emitters, kept_photons))?;
        conditional_channel(&HamiltonianSpec::new(space, 1.0)?, gamma_tau, kept_photons)
    }

    /// Like [`Self::for_emitters`] with per-emitter coupling multipliers.
    pub fn with_couplings(multipliers: &[f64], gamma_tau: f64, kept_photons: usize) -> Result<Self> {
        let n = multipliers.len();
        let space = CompositeSpace::new(n, required_cutoff(n, kept_photons))?;
        let spec = HamiltonianSpec::new(space, 1.0)?.with_multipliers(multipliers.to_vec())?;
        conditional_channel(&spec, gamma_tau, kept_photons)
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma_tau(&self) -> f64 {
        self.spec.gamma() * self.tau
    }

    pub fn kept_photons(&self) -> usize {
        self.kept_photons
    }

    pub fn n_emitters(&self) -> usize {
        self.spec.space().n_emitters()
    }

    pub fn emitter_space(&self) -> CompositeSpace {
        self.spec.space().emitter_space()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.operator
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        v.check_space(self.emitter_space())?;
        StateVector::new(self.emitter_space(), &self.operator * v.amplitudes())
    }

    pub fn spectrum(&self) -> Result<ChannelSpectrum> {
        channel_spectrum(self)
    }
}

/// How the eigensystem was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decomposition {
    /// Hermitian channel: orthonormal eigenvectors, real eigenvalues.
    Hermitian,
    /// General complex Schur form with eigenvectors by back-substitution.
    Schur,
    /// The Schur route found no complete eigenbasis. The reported vectors
    /// are the Schur vectors, not eigenvectors.
    Defective,
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: Complex64,
    pub vector: StateVector,
    /// Index into [`ChannelSpectrum::groups`].
    pub group: usize,
}

impl Eigenpair {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSpectrum {
    pairs: Vec<Eigenpair>,
    groups: Vec<Vec<usize>>,
    decomposition: Decomposition,
    schur: Option<(DMatrix<Complex64>, DMatrix<Complex64>)>,
}

/// Full eigensystem of the channel operator, sorted by descending
/// eigenvalue magnitude.
pub fn channel_spectrum(channel: &ConditionalChannel) -> Result<ChannelSpectrum> {
    spectrum_of(channel.emitter_space(), channel.matrix(), DEGENERACY_TOL)
}

/// Eigensystem of an arbitrary square matrix acting on `space`.
///
/// Hermitian input (to `1e-10`) goes through the Hermitian solver, so
/// degenerate subspaces come back with orthonormal bases. Anything else
/// uses the complex Schur decomposition.
pub fn spectrum_of(
    space: CompositeSpace,
    matrix: &DMatrix<Complex64>,
    degeneracy_tol: f64,
) -> Result<ChannelSpectrum> {
    let d = space.dim();
    if matrix.shape() != (d, d) {
        return Err(Error::LengthMismatch {
            expected: d,
            got: matrix.nrows(),
        });
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }

    let (values, vectors, decomposition, schur) = if linalg::hermitian_residual(matrix) <= 1e-10 {
        let eig = linalg::hermitian_part(matrix).symmetric_eigen();
        let values: Vec<Complex64> = eig.eigenvalues.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        (values, eig.eigenvectors, Decomposition::Hermitian, None)
    } else {
        let (q, t) = Schur::new(matrix.clone()).unpack();
        let (values, x, complete) = triangular_eigenvectors(&t);
        if complete {
            (values, &q * x, Decomposition::Schur, Some((q, t)))
        } else {
            (values, q.clone(), Decomposition::Defective, Some((q, t)))
        }
    };

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (values[a], values[b]);
        zb.norm()
            .total_cmp(&za.norm())
            .then(zb.re.total_cmp(&za.re))
            .then(zb.im.total_cmp(&za.im))
    });

    let mut pairs = Vec::with_capacity(d);
    for &i in &order {
        let col = vectors.column(i).into_owned();
        let mut v = StateVector::new(space, col)?;
        if v.norm() > 0.0 {
            v = v.normalized()?;
        }
        pairs.push(Eigenpair {
            value: values[i],
            vector: fix_phase(v),
            group: usize::MAX,
        });
    }

    // Group by eigenvalue distance, chaining transitively.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        if pairs[i].group != usize::MAX {
            continue;
        }
        let g = groups.len();
        let mut members = vec![i];
        pairs[i].group = g;
        let mut cursor = 0;
        while cursor < members.len() {
            let anchor = pairs[members[cursor]].value;
            for j in 0..d {
                if pairs[j].group == usize::MAX && (pairs[j].value - anchor).norm() <= degeneracy_tol {
                    pairs[j].group = g;
                    members.push(j);
                }
            }
            cursor += 1;
        }
        members.sort_unstable();
        groups.push(members);
    }

    Ok(ChannelSpectrum {
        pairs,
        groups,
        decomposition,
        schur,
    })
}

/// Rotates a vector so that its largest-magnitude amplitude (first one on
/// ties) is real and positive. Makes reported eigenvectors reproducible.
fn fix_phase(v: StateVector) -> StateVector {
    let amps = v.amplitudes();
    let mut best = 0;
    for (i, z) in amps.iter().enumerate() {
        if z.norm() > amps[best].norm() + 1e-12 {
            best = i;
        }
    }
    let pivot = amps[best];
    if pivot.norm() == 0.0 {
        return v;
    }
    let phase = pivot.conj() / pivot.norm();
    let space = v.space();
    StateVector::new(space, v.into_amplitudes() * phase).expect("finite")
}

/// Eigenvalues and eigenvectors of an upper-triangular matrix. The third
/// value is false when some eigenvector could not be formed (defective
/// Jordan structure).
fn triangular_eigenvectors(t: &DMatrix<Complex64>) -> (Vec<Complex64>, DMatrix<Complex64>, bool) {
    let n = t.nrows();
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = linalg::max_abs(t).max(1.0);
    let eps = 1e-12 * scale;
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        x[(i, i)] = Complex64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let mut rhs = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=i {
                rhs -= t[(j, l)] * x[(l, i)];
            }
            let denom = t[(j, j)] - values[i];
            x[(j, i)] = if denom.norm() > eps {
                rhs / denom
            } else if rhs.norm() <= 1e-10 * scale {
                Complex64::new(0.0, 0.0)
            } else {
                return (values, x, false);
            };
        }
    }
    for i in 0..n {
        let norm = x.column(i).norm();
        x.column_mut(i).unscale_mut(norm);
    }
    let smallest = x.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
    (values, x, smallest > 1e-8)
}

impl ChannelSpectrum {
    pub fn pairs(&self) -> &[Eigenpair] {
        &self.pairs
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.pairs.iter().map(Eigenpair::magnitude).collect()
    }

    /// Indices into [`Self::pairs`], one list per group of eigenvalues
    /// closer than the degeneracy tolerance.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Group sizes, in group order.
    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn decomposition(&self) -> Decomposition {
        self.decomposition
    }

    pub fn is_diagonalizable(&self) -> bool {
        self.decomposition != Decomposition::Defective
    }

    /// `(Q, T)` with `K = Q T Q†`, when the Schur route was taken.
    pub fn schur_form(&self) -> Option<&(DMatrix<Complex64>, DMatrix<Complex64>)> {
        self.schur.as_ref()
    }

    /// `max_i ‖K v_i - λ_i v_i‖` against the matrix the spectrum came from.
    pub fn reconstruction_residual(&self, matrix: &DMatrix<Complex64>) -> f64 {
        self.pairs
            .iter()
            .map(|p| (matrix * p.vector.amplitudes() - p.vector.amplitudes() * p.value).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_trapping(&self, index: usize, tol: f64) -> bool {
        self.pairs[index].magnitude() >= 1.0 - tol
    }

    pub fn trapping_indices(&self, tol: f64) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&i| self.is_trapping(i, tol))
            .collect()
    }

    pub fn trapping_states(&self, tol: f64) -> Vec<StateVector> {
        self.trapping_indices(tol)
            .into_iter()
            .map(|i| self.pairs[i].vector.clone())
            .collect()
    }
}

/// Eigenvectors whose eigenvalue magnitude is at least `1 - tol`.
///
/// `tol` must lie in `(0, 1e-3]`.
pub fn find_trapping_states(channel: &ConditionalChannel, tol: f64) -> Result<Vec<StateVector>> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "trapping tolerance {tol} is outside (0, 1e-3]"
        )));
    }
    Ok(channel_spectrum(channel)?.trapping_states(tol))
}

/// One successful measurement: `ρ' = KρK†/p` with `p = Tr(KρK†)`.
pub fn conditional_step(rho: &DensityMatrix, channel: &ConditionalChannel) -> Result<(DensityMatrix, f64)> {
    conditional_step_with_threshold(rho, channel, PROBABILITY_THRESHOLD)
}

pub fn conditional_step_with_threshold(
    rho: &DensityMatrix,
    channel: &ConditionalChannel,
    threshold: f64,
) -> Result<(DensityMatrix, f64)> {
    if rho.space() != channel.emitter_space() {
        return Err(Error::SpaceMismatch {
            left: rho.space(),
            right: channel.emitter_space(),
        });
    }
    let k = channel.matrix();
    let unnormalized = k * rho.matrix() * k.adjoint();
    let p = unnormalized.trace().re;
    if !(p > threshold) {
        return Err(Error::ProtocolFailure {
            probability: p,
            threshold,
        });
    }
    let next = linalg::hermitian_part(&unnormalized).unscale(p);
    Ok((DensityMatrix::from_trusted(rho.space(), next), p.min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GhzVerdict {
    /// GHZ has weight outside the persisting subspace, so repeated
    /// measurement does not preserve it.
    NotPreserved,
    /// GHZ lies inside the persisting subspace.
    Preserved,
    /// Every eigenvalue has unit magnitude (e.g. `τ = 0`); nothing is
    /// filtered, so the question has no answer.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GhzComponent {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub magnitude: f64,
    /// `|⟨v_i|GHZ⟩|²`.
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GhzReport {
    pub gamma_tau: f64,
    pub kept_photons: usize,
    pub expansion: Vec<GhzComponent>,
    /// Largest single overlap with a persisting (`|λ| ≥ 1 - tol`) eigenvector.
    pub max_persisting_overlap: f64,
    /// Total weight on persisting eigenvectors.
    pub persisting_weight: f64,
    pub verdict: GhzVerdict,
}

/// Expands the three-emitter GHZ state in the channel's eigenvectors and
/// decides whether repeated successful measurements could keep it.
pub fn ghz_preservation_check(channel: &ConditionalChannel) -> Result<GhzReport> {
    ghz_preservation_check_with_tol(channel, TRAPPING_TOL)
}

pub fn ghz_preservation_check_with_tol(channel: &ConditionalChannel, tol: f64) -> Result<GhzReport> {
    if channel.n_emitters() != 3 {
        return Err(Error::IncompatibleLabel {
            label: StateLabel::Ghz.to_string(),
            n_emitters: channel.n_emitters(),
        });
    }
    let ghz = make_named_state(&StateLabel::Ghz, 3)?;
    let spectrum = channel_spectrum(channel)?;
    let mut expansion = Vec::with_capacity(spectrum.pairs.len());
    let (mut max_overlap, mut persisting_weight) = (0.0f64, 0.0f64);
    for (i, pair) in spectrum.pairs.iter().enumerate() {
        let weight = pair.vector.overlap(ghz.state())?;
        if spectrum.is_trapping(i, tol) {
            max_overlap = max_overlap.max(weight);
            persisting_weight += weight;
        }
        expansion.push(GhzComponent {
            eigenvalue_re: pair.value.re,
            eigenvalue_im: pair.value.im,
            magnitude: pair.magnitude(),
            weight,
        });
    }
    let verdict = if spectrum.trapping_indices(tol).len() == spectrum.pairs.len() {
        GhzVerdict::Inconclusive
    } else if persisting_weight >= 1.0 - 1e-6 {
        GhzVerdict::Preserved
    } else {
        GhzVerdict::NotPreserved
    };
    Ok(GhzReport {
        gamma_tau: channel.gamma_tau(),
        kept_photons: channel.kept_photons(),
        expansion,
        max_persisting_overlap: max_overlap,
        persisting_weight,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ChannelKey {
    space: CompositeSpace,
    gamma: u64,
    multipliers: Vec<u64>,
    tau: u64,
    kept_photons: usize,
}

/// Memoizes channels by their exact inputs (bit patterns of the floats).
/// No interpolation between nearby intervals.
#[derive(Debug, Default)]
pub struct ChannelCache {
    entries: HashMap<ChannelKey, Arc<ConditionalChannel>>,
}

impl ChannelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(
        &mut self,
        spec: &HamiltonianSpec,
        tau: f64,
        kept_photons: usize,
    ) -> Result<Arc<ConditionalChannel>> {
        let key = ChannelKey {
            space: spec.space(),
            gamma: spec.gamma().to_bits(),
            multipliers: spec.multipliers().iter().map(|m| m.to_bits()).collect(),
            tau: tau.to_bits(),
            kept_photons,
        };
        if let Some(hit) = self.entries.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let channel = Arc::new(conditional_channel(spec, tau, kept_photons)?);
        self.entries.insert(key, Arc::clone(&channel));
        Ok(channel)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
