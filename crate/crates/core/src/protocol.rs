//! The repeated evolve–measure–reinject loop, followed along the branch
//! where every measurement finds the kept photon number.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{conditional_step_with_threshold, ConditionalChannel, PROBABILITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::states::{fidelity, NamedState};

/// State of the conditioned branch after `step` successful measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// Probability that measurement `step` succeeds given the previous
    /// ones did (1 at step 0).
    pub p_step: f64,
    /// Probability that measurements `1..=step` all succeed.
    pub p_cumulative: f64,
    pub fidelity: f64,
    /// `Π_{i=0..=step} P_i`, product of the cumulative probabilities.
    pub yield_product: f64,
}

impl StepRecord {
    /// Surviving fraction of pairs, which is `P_N` itself.
    pub fn yield_survival(&self) -> f64 {
        self.p_cumulative
    }
}

/// Echo of the inputs a run was made with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunEcho {
    pub n_emitters: usize,
    pub kept_photons: usize,
    pub gamma_tau: f64,
    pub initial: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// The branch probability of `step` fell to or below the threshold.
    Truncated { step: usize, probability: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolResult {
    pub echo: RunEcho,
    pub records: Vec<StepRecord>,
    pub termination: Termination,
}

impl ProtocolResult {
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("a run always has the step-0 record")
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self.termination, Termination::Truncated { .. })
    }
}

/// Iterates the conditional channel `n_max` times from `initial`,
/// recording success probabilities and the fidelity to `target`.
///
/// The calculation is deterministic: it follows the success branch rather
/// than sampling it. A step whose probability falls to the threshold ends
/// the run early with [`Termination::Truncated`].
pub fn run_purification(
    initial: &DensityMatrix,
    channel: &ConditionalChannel,
    n_max: usize,
    target: &NamedState,
) -> Result<ProtocolResult> {
    run_purification_with_threshold(initial, channel, n_max, target, PROBABILITY_THRESHOLD)
}

pub fn run_purification_with_threshold(
    initial: &DensityMatrix,
    channel: &ConditionalChannel,
    n_max: usize,
    target: &NamedState,
    threshold: f64,
) -> Result<ProtocolResult> {
    if initial.space() != channel.emitter_space() {
        return Err(Error::SpaceMismatch {
            left: initial.space(),
            right: channel.emitter_space(),
        });
    }
    let echo = RunEcho {
        n_emitters: channel.n_emitters(),
        kept_photons: channel.kept_photons(),
        gamma_tau: channel.gamma_tau(),
        initial: "custom".into(),
        target: target.label().to_string(),
    };
    let mut records = Vec::with_capacity(n_max + 1);
    records.push(StepRecord {
        step: 0,
        p_step: 1.0,
        p_cumulative: 1.0,
        fidelity: fidelity(initial, target)?,
        yield_product: 1.0,
    });
    let mut rho = initial.clone();
    let mut termination = Termination::Completed;
    for step in 1..=n_max {
        let prev = records[step - 1];
        match conditional_step_with_threshold(&rho, channel, threshold) {
            Ok((next, p)) => {
                let p_cumulative = prev.p_cumulative * p;
                records.push(StepRecord {
                    step,
                    p_step: p,
                    p_cumulative,
                    fidelity: fidelity(&next, target)?,
                    yield_product: prev.yield_product * p_cumulative,
                });
                rho = next;
            }
            Err(Error::ProtocolFailure { probability, .. }) => {
                termination = Termination::Truncated { step, probability };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ProtocolResult {
        echo,
        records,
        termination,
    })
}

/// Both yield readings, indexed by step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldCurve {
    /// `Y_N = Π_{i=0..=N} P_i`.
    pub product: Vec<f64>,
    /// `Y_N = P_N`.
    pub survival: Vec<f64>,
}

pub fn yield_curve(result: &ProtocolResult) -> YieldCurve {
    YieldCurve {
        product: result.records.iter().map(|r| r.yield_product).collect(),
        survival: result.records.iter().map(StepRecord::yield_survival).collect(),
    }
}

/// Monte-Carlo estimate of the survival fraction: each trajectory draws
/// success or failure at every step with the branch probabilities of
/// `result` and stops at its first failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledSurvival {
    pub seed: u64,
    pub trajectories: usize,
    /// Number of trajectories still alive after each step (index = step).
    pub survivors: Vec<usize>,
}

impl SampledSurvival {
    pub fn fraction(&self, step: usize) -> f64 {
        self.survivors[step] as f64 / self.trajectories as f64
    }
}

pub fn sample_survival(result: &ProtocolResult, trajectories: usize, seed: u64) -> SampledSurvival {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut survivors = vec![0usize; result.records.len()];
    for _ in 0..trajectories {
        survivors[0] += 1;
        for rec in &result.records[1..] {
            if rng.random::<f64>() >= rec.p_step {
                break;
            }
            survivors[rec.step] += 1;
        }
    }
    SampledSurvival {
        seed,
        trajectories,
        survivors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_named_state, StateLabel};
    use std::f64::consts::PI;

    fn product(cfg: &str) -> DensityMatrix {
        make_named_state(&StateLabel::Product(cfg.into()), cfg.len())
            .unwrap()
            .density_matrix()
    }

    #[test]
    fn zero_steps_gives_initial_record() {
        let ch = ConditionalChannel::for_emitters(3, 0.5, 1).unwrap();
        let w = make_named_state(&StateLabel::W, 3).unwrap();
        let r = run_purification(&product("egg"), &ch, 0, &w).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].p_cumulative, 1.0);
        assert!((r.records[0].fidelity - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.termination, Termination::Completed);
    }

    #[test]
    fn one_step_exact_purification() {
        let gt = PI / (2.0 * 6f64.sqrt());
        let ch = ConditionalChannel::for_emitters(2, gt, 1).unwrap();
        let singlet = make_named_state(&StateLabel::Singlet, 2).unwrap();
        let r = run_purification(&product("eg"), &ch, 1, &singlet).unwrap();
        assert!((r.records[1].p_cumulative - 0.5).abs() < 1e-12);
        assert!((r.records[1].fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_state_limit() {
        let ch = ConditionalChannel::for_emitters(3, PI / 10f64.sqrt(), 1).unwrap();
        let w = make_named_state(&StateLabel::W, 3).unwrap();
        let r = run_purification(&product("egg"), &ch, 20, &w).unwrap();
        assert!(r.records[5].fidelity >= 0.995);
        assert!((r.last().p_cumulative - 1.0 / 3.0).abs() < 1e-6);
        assert!(r.last().fidelity >= 1.0 - 1e-6);
    }

    #[test]
    fn cumulative_is_product_of_steps() {
        let ch = ConditionalChannel::for_emitters(3, 1.1, 1).unwrap();
        let w = make_named_state(&StateLabel::W, 3).unwrap();
        let r = run_purification(&product("egg"), &ch, 15, &w).unwrap();
        let mut p = 1.0;
        let mut y = 1.0;
        for rec in &r.records {
            p *= rec.p_step;
            y *= p;
            assert!((rec.p_cumulative - p).abs() < 1e-12);
            assert!((rec.yield_product - y).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&rec.fidelity));
        }
        let ys = yield_curve(&r);
        assert!(ys.product.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(ys.survival[3], r.records[3].p_cumulative);
    }

    #[test]
    fn trapped_initial_state_has_unit_yield() {
        let ch = ConditionalChannel::for_emitters(2, 0.8, 1).unwrap();
        let singlet = make_named_state(&StateLabel::Singlet, 2).unwrap();
        let r = run_purification(&singlet.density_matrix(), &ch, 10, &singlet).unwrap();
        let ys = yield_curve(&r);
        assert!(ys.product.iter().all(|y| (y - 1.0).abs() < 1e-12));
        assert!(ys.survival.iter().all(|y| (y - 1.0).abs() < 1e-12));
    }

    #[test]
    fn vanishing_branch_truncates() {
        let gt = PI / (2.0 * 6f64.sqrt());
        let ch = ConditionalChannel::for_emitters(2, gt, 1).unwrap();
        let singlet = make_named_state(&StateLabel::Singlet, 2).unwrap();
        let s = 0.5f64.sqrt();
        let plus = crate::hilbert::StateVector::from_slice(
            ch.emitter_space(),
            &[0.0, s, s, 0.0].map(|x| num_complex::Complex64::new(x, 0.0)),
        )
        .unwrap();
        let rho = DensityMatrix::from_pure(&plus).unwrap();
        let r = run_purification(&rho, &ch, 5, &singlet).unwrap();
        assert!(r.is_truncated());
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn space_mismatch() {
        let ch = ConditionalChannel::for_emitters(2, 0.8, 1).unwrap();
        let w = make_named_state(&StateLabel::W, 3).unwrap();
        assert!(run_purification(&product("egg"), &ch, 3, &w).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_close() {
        let ch = ConditionalChannel::for_emitters(3, PI / 6f64.sqrt(), 1).unwrap();
        let w = make_named_state(&StateLabel::W, 3).unwrap();
        let r = run_purification(&product("egg"), &ch, 6, &w).unwrap();
        let a = sample_survival(&r, 20_000, 7);
        let b = sample_survival(&r, 20_000, 7);
        assert_eq!(a, b);
        for rec in &r.records {
            assert!((a.fraction(rec.step) - rec.p_cumulative).abs() < 0.02);
        }
    }
}
