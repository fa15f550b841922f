//! Self-check suite: structural invariants of the model plus agreement
//! between simulation and the closed forms.
//!
//! Every property reports the worst residual it measured and the tolerance
//! it was held to, so a failure says by how much.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{
    channel_spectrum, conditional_channel, ghz_preservation_check, measurement_operators,
    ConditionalChannel, TRAPPING_TOL,
};
use crate::closed_form::{reference_curve, FormulaVariant};
use crate::dynamics::{build_tc_hamiltonian, HamiltonianSpec, SpectralHamiltonian};
use crate::error::Result;
use crate::hilbert::{total_excitation_operator, CompositeSpace, DensityMatrix, StateVector};
use crate::linalg::{max_abs, max_abs_diff, unitary_residual};
use crate::protocol::run_purification;
use crate::states::{make_named_state, StateLabel};

/// `γτ = 0.1, 0.2, …, 3.0`.
pub fn standard_grid() -> Vec<f64> {
    (1..=30).map(|i| i as f64 / 10.0).collect()
}

/// Interval values away from every accidental revival or degeneracy of the
/// two- and three-emitter channels with up to three kept photons.
pub const GENERIC_GAMMA_TAU: [f64; 10] = [0.37, 0.61, 0.83, 1.07, 1.19, 1.43, 1.67, 1.87, 2.11, 2.39];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Coupling multipliers for emitters 1, 2, …; missing entries are 1.
    pub couplings: Vec<f64>,
    /// Closed forms that simulation is compared against.
    pub variant: FormulaVariant,
    /// Seed for the randomized structural checks.
    pub seed: u64,
    /// Number of randomized cases per structural check.
    pub random_cases: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            couplings: Vec::new(),
            variant: FormulaVariant::Corrected,
            seed: 0x5eed,
            random_cases: 50,
        }
    }
}

impl VerifyOptions {
    fn multipliers(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.couplings.get(i).copied().unwrap_or(1.0))
            .collect()
    }

    fn channel(&self, n: usize, gamma_tau: f64, k: usize) -> Result<ConditionalChannel> {
        ConditionalChannel::with_couplings(&self.multipliers(n), gamma_tau, k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl PropertyReport {
    fn at_most(name: &'static str, residual: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: residual <= tolerance,
            residual,
            tolerance,
            detail: detail.into(),
        }
    }
}

/// Runs every property and returns one report each, in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<PropertyReport>> {
    Ok(vec![
        excitation_conservation(opts)?,
        propagator_unitarity(opts)?,
        propagator_group_law(opts)?,
        sector_block_structure(opts)?,
        channel_contraction(opts)?,
        probability_completeness(opts)?,
        singlet_trapping(opts)?,
        unique_trapping_state(opts)?,
        two_emitter_closed_form(opts)?,
        photon_number_frequency(opts)?,
        three_emitter_closed_form(opts)?,
        three_emitter_degeneracy(opts)?,
        ghz_non_preservation(opts)?,
        purification_convergence(opts)?,
        vacuum_exclusion(opts)?,
    ])
}

fn random_spec(rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<(HamiltonianSpec, f64)> {
    let n = rng.random_range(1..=3);
    let cutoff = rng.random_range(1..=4);
    let gamma = rng.random_range(0.2..2.0);
    let base = opts.multipliers(n);
    let mult = base.iter().map(|m| m * rng.random_range(0.8..1.2)).collect();
    let spec = HamiltonianSpec::new(CompositeSpace::new(n, cutoff)?, gamma)?.with_multipliers(mult)?;
    Ok((spec, rng.random_range(-3.0..3.0)))
}

fn random_state(rng: &mut ChaCha8Rng, space: CompositeSpace) -> Result<StateVector> {
    loop {
        let amps: Vec<Complex64> = (0..space.dim())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let v = StateVector::from_slice(space, &amps)?;
        if v.norm() > 1e-3 {
            return v.normalized();
        }
    }
}

fn excitation_conservation(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    for _ in 0..opts.random_cases {
        let (spec, _) = random_spec(&mut rng, opts)?;
        let h = build_tc_hamiltonian(&spec);
        let comm = h.commutator(&total_excitation_operator(spec.space()))?;
        worst = worst.max(max_abs(comm.matrix()));
    }
    Ok(PropertyReport::at_most(
        "excitation_conservation",
        worst,
        1e-12,
        "max |[H, N_tot]| over randomized couplings",
    ))
}

fn propagator_unitarity(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 1);
    let mut worst = 0.0f64;
    for _ in 0..opts.random_cases {
        let (spec, t) = random_spec(&mut rng, opts)?;
        let sh = SpectralHamiltonian::new(&build_tc_hamiltonian(&spec))?;
        worst = worst.max(unitary_residual(sh.propagator(t)?.matrix()));
    }
    Ok(PropertyReport::at_most(
        "propagator_unitarity",
        worst,
        1e-10,
        "max |U†U - I|",
    ))
}

fn propagator_group_law(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 2);
    let mut worst = 0.0f64;
    for _ in 0..opts.random_cases {
        let (spec, t1) = random_spec(&mut rng, opts)?;
        let t2 = rng.random_range(-3.0..3.0);
        let sh = SpectralHamiltonian::new(&build_tc_hamiltonian(&spec))?;
        let lhs = sh.propagator(t1)?.matrix() * sh.propagator(t2)?.matrix();
        worst = worst.max(max_abs_diff(&lhs, sh.propagator(t1 + t2)?.matrix()));
        let id = sh.propagator(0.0)?;
        worst = worst.max(max_abs_diff(id.matrix(), &DMatrix::identity(spec.space().dim(), spec.space().dim())));
    }
    Ok(PropertyReport::at_most(
        "propagator_group_law",
        worst,
        1e-10,
        "max |U(t1)U(t2) - U(t1+t2)| and |U(0) - I|",
    ))
}

fn sector_block_structure(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 3);
    let mut worst = 0.0f64;
    for _ in 0..opts.random_cases {
        let (spec, t) = random_spec(&mut rng, opts)?;
        let space = spec.space();
        let u = SpectralHamiltonian::new(&build_tc_hamiltonian(&spec))?.propagator(t)?;
        for r in 0..space.dim() {
            for c in 0..space.dim() {
                if space.quanta(r) != space.quanta(c) {
                    worst = worst.max(u.matrix()[(r, c)].norm());
                }
            }
        }
    }
    Ok(PropertyReport::at_most(
        "sector_block_structure",
        worst,
        1e-12,
        "max |<b|U|b'>| across excitation sectors",
    ))
}

fn channel_contraction(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..opts.random_cases {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(0..=3);
        let ch = opts.channel(n, rng.random_range(0.0..3.0), k)?;
        let top = channel_spectrum(&ch)?.magnitudes()[0];
        worst = worst.max(top - 1.0);
    }
    Ok(PropertyReport::at_most(
        "channel_contraction",
        worst.max(0.0),
        1e-10,
        "max(|λ| - 1) over randomized channels",
    ))
}

fn probability_completeness(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 5);
    let mut worst = 0.0f64;
    for _ in 0..opts.random_cases {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(0..=2);
        let space = CompositeSpace::new(n, n + k)?;
        let spec = HamiltonianSpec::new(space, 1.0)?.with_multipliers(opts.multipliers(n))?;
        let ops = measurement_operators(&spec, rng.random_range(0.0..3.0), k)?;
        let v = random_state(&mut rng, space.emitter_space())?;
        let total: f64 = ops
            .iter()
            .map(|m| (m * v.amplitudes()).norm_squared())
            .sum();
        worst = worst.max((total - 1.0).abs());
    }
    Ok(PropertyReport::at_most(
        "probability_completeness",
        worst,
        1e-10,
        "max |Σ_j p_j - 1| over all photon-count outcomes",
    ))
}

fn singlet_trapping(opts: &VerifyOptions) -> Result<PropertyReport> {
    let singlet = make_named_state(&StateLabel::Singlet, 2)?;
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for &gt in &standard_grid() {
            let ch = opts.channel(2, gt, k)?;
            let out = ch.apply(singlet.state())?;
            worst = worst.max(singlet.state().phase_distance(&out)?);
        }
    }
    Ok(PropertyReport::at_most(
        "singlet_trapping",
        worst,
        1e-10,
        "max |K ψ⁻ - e^{iθ} ψ⁻| for k = 1..3 over the γτ grid",
    ))
}

fn unique_trapping_state(opts: &VerifyOptions) -> Result<PropertyReport> {
    let singlet = make_named_state(&StateLabel::Singlet, 2)?;
    let mut worst = 0.0f64;
    let mut bad_counts = 0usize;
    for k in 1..=3 {
        for &gt in &GENERIC_GAMMA_TAU {
            let sp = channel_spectrum(&opts.channel(2, gt, k)?)?;
            let trapped = sp.trapping_states(TRAPPING_TOL);
            if trapped.len() != 1 {
                bad_counts += 1;
                worst = 1.0;
                continue;
            }
            worst = worst.max(1.0 - trapped[0].overlap(singlet.state())?);
        }
    }
    let mut report = PropertyReport::at_most(
        "unique_trapping_state",
        worst,
        1e-10,
        format!("1 - |<ψ⁻|v>|² for the single |λ|=1 eigenvector; {bad_counts} channels without exactly one"),
    );
    report.passed &= bad_counts == 0;
    Ok(report)
}

/// Worst `(|ΔP|, |ΔF|)` between simulation and the selected closed forms.
fn closed_form_gap(
    opts: &VerifyOptions,
    n: usize,
    k: usize,
    initial: &str,
    target: StateLabel,
    max_steps: usize,
) -> Result<(f64, f64)> {
    let rho = make_named_state(&StateLabel::Product(initial.into()), n)?.density_matrix();
    let target = make_named_state(&target, n)?;
    let (mut dp, mut df) = (0.0f64, 0.0f64);
    for &gt in &standard_grid() {
        let run = run_purification(&rho, &opts.channel(n, gt, k)?, max_steps, &target)?;
        for rec in &run.records {
            let (p, f) = reference_curve(n, k, opts.variant, gt, rec.step as u32)
                .expect("closed form exists for this scenario");
            dp = dp.max(abs_gap(rec.p_cumulative, p.value));
            df = df.max(abs_gap(rec.fidelity, f.value));
        }
        if run.records.len() < max_steps + 1 {
            dp = f64::INFINITY;
        }
    }
    Ok((dp, df))
}

fn abs_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

fn two_emitter_closed_form(opts: &VerifyOptions) -> Result<PropertyReport> {
    let (dp, df) = closed_form_gap(opts, 2, 1, "eg", StateLabel::Singlet, 20)?;
    Ok(PropertyReport::at_most(
        "two_emitter_closed_form",
        dp.max(df),
        1e-10,
        format!("{} forms, N ≤ 20, γτ grid: max |ΔP| = {dp:e}, max |ΔF| = {df:e}", opts.variant),
    ))
}

fn photon_number_frequency(opts: &VerifyOptions) -> Result<PropertyReport> {
    let s = 0.5f64.sqrt();
    let mut worst = 0.0f64;
    for k in 1..=3usize {
        let freq = match opts.variant {
            FormulaVariant::Corrected => ((4 * k + 2) as f64).sqrt(),
            FormulaVariant::Literal => ((2 * (k + 1)) as f64).sqrt(),
        };
        for &gt in &standard_grid() {
            let ch = opts.channel(2, gt, k)?;
            let plus = StateVector::from_slice(
                ch.emitter_space(),
                &[0.0, s, s, 0.0].map(|x| Complex64::new(x, 0.0)),
            )?;
            let amp = plus.inner(&ch.apply(&plus)?)?;
            worst = worst.max((amp - Complex64::new((freq * gt).cos(), 0.0)).norm());
        }
    }
    Ok(PropertyReport::at_most(
        "photon_number_frequency",
        worst,
        1e-10,
        format!("{} frequency for the symmetric pair, k = 1..3", opts.variant),
    ))
}

fn three_emitter_closed_form(opts: &VerifyOptions) -> Result<PropertyReport> {
    let (dp, df) = closed_form_gap(opts, 3, 1, "egg", StateLabel::W, 20)?;
    Ok(PropertyReport::at_most(
        "three_emitter_closed_form",
        dp.max(df),
        1e-10,
        format!("N ≤ 20, γτ grid: max |ΔP| = {dp:e}, max |ΔF| = {df:e}"),
    ))
}

fn three_emitter_degeneracy(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut misses = 0usize;
    for &gt in &GENERIC_GAMMA_TAU {
        let sp = channel_spectrum(&opts.channel(3, gt, 1)?)?;
        let mut mult = sp.multiplicities();
        mult.sort_unstable();
        if mult != [1, 1, 1, 1, 2, 2] {
            misses += 1;
        }
    }
    Ok(PropertyReport::at_most(
        "three_emitter_degeneracy",
        misses as f64,
        0.0,
        "generic intervals whose spectrum is not four singles plus two pairs",
    ))
}

fn ghz_non_preservation(opts: &VerifyOptions) -> Result<PropertyReport> {
    let mut worst = 0.0f64;
    let mut points: Vec<f64> = GENERIC_GAMMA_TAU.to_vec();
    points.push(PI / 10f64.sqrt());
    for gt in points {
        let report = ghz_preservation_check(&opts.channel(3, gt, 1)?)?;
        worst = worst.max(report.max_persisting_overlap);
    }
    Ok(PropertyReport::at_most(
        "ghz_non_preservation",
        worst,
        1e-3,
        "max overlap of GHZ with any |λ| ≥ 1 - 1e-9 eigenvector",
    ))
}

fn purification_convergence(opts: &VerifyOptions) -> Result<PropertyReport> {
    let cases = [
        (2, 0.9, "eg", StateLabel::Singlet),
        (2, 0.37, "eg", StateLabel::Singlet),
        (3, PI / 10f64.sqrt(), "egg", StateLabel::W),
    ];
    let mut worst = 0.0f64;
    for (n, gt, initial, target) in cases {
        let rho = make_named_state(&StateLabel::Product(initial.into()), n)?.density_matrix();
        let target = make_named_state(&target, n)?;
        let run = run_purification(&rho, &opts.channel(n, gt, 1)?, 30, &target)?;
        worst = worst.max(1.0 - run.last().fidelity);
    }
    Ok(PropertyReport::at_most(
        "purification_convergence",
        worst,
        1e-6,
        "1 - F after 30 successful steps",
    ))
}

fn vacuum_exclusion(opts: &VerifyOptions) -> Result<PropertyReport> {
    let space = CompositeSpace::new(3, 4)?;
    let spec = HamiltonianSpec::new(space, 1.0)?.with_multipliers(opts.multipliers(3))?;
    let ch = conditional_channel(&spec, PI / 10f64.sqrt(), 1)?;
    let w = make_named_state(&StateLabel::W, 3)?;
    let vac = DensityMatrix::from_pure(&StateVector::basis(space.emitter_space(), "ggg", 0)?)?;
    let run = run_purification(&vac, &ch, 25, &w)?;
    let worst = run.records.iter().map(|r| r.fidelity).fold(0.0, f64::max);
    Ok(PropertyReport::at_most(
        "vacuum_exclusion",
        worst,
        1e-12,
        "largest W fidelity reached from the all-ground state",
    ))
}
