//! Closed-form success probabilities and fidelities for the two- and
//! three-emitter protocols, including the literal two-emitter forms that
//! simulation shows to be wrong.
//!
//! Two emitters prepared in `|eg⟩` split evenly between the singlet
//! (eigenvalue 1) and the symmetric pair, whose amplitude is multiplied by
//! `c = cos(√(4k+2) γτ)` per successful step when `k` photons are kept:
//!
//! ```text
//! P_N = ½ (1 + c^{2N})        F_N = ½ / P_N = 1 / (1 + c^{2N})
//! ```
//!
//! The literal fidelity `1 / (2 c^{2N})` diverges where `c = 0` and exceeds
//! one whenever `c^{2N} < ½`. The literal generalized frequency `√(2(k+1))`
//! disagrees with `√6` at `k = 1`; it only matches if `k` is read as the
//! total number of quanta. Both literal variants are kept so they can be
//! shown failing.
//!
//! Three emitters prepared in `|egg⟩` have weight ⅓ on W (factor
//! `cos(√10 γτ)` per step) and ⅔ on the one-excitation mixed-symmetry pair
//! (factor `cos(γτ)`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `½(1 + cos(√6 γτ)^{2N})`, one kept photon.
    TwoProbability,
    /// `1 / (2 cos(√6 γτ)^{2N})`, taken literally.
    TwoFidelityLiteral,
    /// `1 / (1 + cos(√6 γτ)^{2N})`.
    TwoFidelityCorrected,
    /// `½(1 + cos(√(2(k+1)) γτ)^{2N})`, taken literally.
    PhotonProbabilityLiteral,
    /// `½(1 + cos(√(4k+2) γτ)^{2N})`.
    PhotonProbabilityCorrected,
    /// `1 / (2 cos(√(2(k+1)) γτ)^{2N})`, taken literally.
    PhotonFidelityLiteral,
    /// `1 / (1 + cos(√(4k+2) γτ)^{2N})`.
    PhotonFidelityCorrected,
    /// `⅓(cos(√10 γτ)^{2N} + 2 cos(γτ)^{2N})`.
    ThreeProbability,
    /// `cos(√10 γτ)^{2N} / (cos(√10 γτ)^{2N} + 2 cos(γτ)^{2N})`.
    ThreeFidelity,
}

impl ClosedForm {
    pub const ALL: [ClosedForm; 9] = [
        ClosedForm::TwoProbability,
        ClosedForm::TwoFidelityLiteral,
        ClosedForm::TwoFidelityCorrected,
        ClosedForm::PhotonProbabilityLiteral,
        ClosedForm::PhotonProbabilityCorrected,
        ClosedForm::PhotonFidelityLiteral,
        ClosedForm::PhotonFidelityCorrected,
        ClosedForm::ThreeProbability,
        ClosedForm::ThreeFidelity,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ClosedForm::TwoProbability => "two_probability",
            ClosedForm::TwoFidelityLiteral => "two_fidelity_literal",
            ClosedForm::TwoFidelityCorrected => "two_fidelity_corrected",
            ClosedForm::PhotonProbabilityLiteral => "photon_probability_literal",
            ClosedForm::PhotonProbabilityCorrected => "photon_probability_corrected",
            ClosedForm::PhotonFidelityLiteral => "photon_fidelity_literal",
            ClosedForm::PhotonFidelityCorrected => "photon_fidelity_corrected",
            ClosedForm::ThreeProbability => "three_probability",
            ClosedForm::ThreeFidelity => "three_fidelity",
        }
    }

    /// Evaluates the formula. `kept_photons` only matters for the
    /// `Photon*` forms.
    pub fn evaluate(self, gamma_tau: f64, steps: u32, kept_photons: usize) -> Prediction {
        let pow = |c: f64| {
            if steps <= 1 << 29 {
                c.powi(2 * steps as i32)
            } else {
                c.abs().powf(2.0 * steps as f64)
            }
        };
        let literal_freq = (2.0 * (kept_photons as f64 + 1.0)).sqrt();
        let corrected_freq = (4.0 * kept_photons as f64 + 2.0).sqrt();
        let two = |freq: f64| pow((freq * gamma_tau).cos());
        let value = match self {
            ClosedForm::TwoProbability => 0.5 * (1.0 + two(6f64.sqrt())),
            ClosedForm::TwoFidelityLiteral => 1.0 / (2.0 * two(6f64.sqrt())),
            ClosedForm::TwoFidelityCorrected => 1.0 / (1.0 + two(6f64.sqrt())),
            ClosedForm::PhotonProbabilityLiteral => 0.5 * (1.0 + two(literal_freq)),
            ClosedForm::PhotonProbabilityCorrected => 0.5 * (1.0 + two(corrected_freq)),
            ClosedForm::PhotonFidelityLiteral => 1.0 / (2.0 * two(literal_freq)),
            ClosedForm::PhotonFidelityCorrected => 1.0 / (1.0 + two(corrected_freq)),
            ClosedForm::ThreeProbability => {
                (pow((10f64.sqrt() * gamma_tau).cos()) + 2.0 * pow(gamma_tau.cos())) / 3.0
            }
            ClosedForm::ThreeFidelity => {
                let w = pow((10f64.sqrt() * gamma_tau).cos());
                let denom = w + 2.0 * pow(gamma_tau.cos());
                if denom == 0.0 {
                    f64::NAN
                } else {
                    w / denom
                }
            }
        };
        Prediction {
            formula: self,
            gamma_tau,
            steps,
            kept_photons,
            value,
            validity: Validity::of(value),
        }
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ClosedForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClosedForm::ALL
            .into_iter()
            .find(|f| f.id() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown closed form `{s}`")))
    }
}

/// Whether a predicted value can be a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    /// Finite or infinite but outside `[0, 1]`.
    OutOfRange,
    /// `0/0`.
    Undefined,
}

impl Validity {
    const SLACK: f64 = 1e-12;

    fn of(value: f64) -> Self {
        if value.is_nan() {
            Validity::Undefined
        } else if value < -Self::SLACK || value > 1.0 + Self::SLACK {
            Validity::OutOfRange
        } else {
            Validity::Valid
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub formula: ClosedForm,
    pub gamma_tau: f64,
    pub steps: u32,
    pub kept_photons: usize,
    pub value: f64,
    pub validity: Validity,
}

impl Prediction {
    pub fn is_valid(&self) -> bool {
        self.validity == Validity::Valid
    }
}

/// Literal and corrected two-emitter predictions side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoEmitterPrediction {
    pub probability_literal: Prediction,
    pub probability: Prediction,
    pub fidelity_literal: Prediction,
    pub fidelity: Prediction,
}

/// Two emitters starting in `|eg⟩`, `steps` successful measurements of
/// `kept_photons` photons.
///
/// For one kept photon the literal probability is the `√6` form (which is
/// right); for more photons it is the `√(2(k+1))` generalization (which is
/// not). `fidelity` is `½ / probability` with the corrected probability.
pub fn closed_form_two_emitter(gamma_tau: f64, steps: u32, kept_photons: usize) -> Result<TwoEmitterPrediction> {
    if kept_photons == 0 {
        return Err(Error::InvalidParameter(
            "the two-emitter forms need at least one kept photon".into(),
        ));
    }
    let (p_lit, f_lit) = if kept_photons == 1 {
        (ClosedForm::TwoProbability, ClosedForm::TwoFidelityLiteral)
    } else {
        (ClosedForm::PhotonProbabilityLiteral, ClosedForm::PhotonFidelityLiteral)
    };
    let probability = ClosedForm::PhotonProbabilityCorrected.evaluate(gamma_tau, steps, kept_photons);
    let mut fidelity = ClosedForm::PhotonFidelityCorrected.evaluate(gamma_tau, steps, kept_photons);
    if kept_photons == 1 {
        fidelity.formula = ClosedForm::TwoFidelityCorrected;
    }
    Ok(TwoEmitterPrediction {
        probability_literal: p_lit.evaluate(gamma_tau, steps, kept_photons),
        probability,
        fidelity_literal: f_lit.evaluate(gamma_tau, steps, kept_photons),
        fidelity,
    })
}

/// Three emitters starting in `|egg⟩`, one kept photon: `(P_N, F_N)` with
/// W as the target.
pub fn closed_form_three_emitter(gamma_tau: f64, steps: u32) -> (Prediction, Prediction) {
    (
        ClosedForm::ThreeProbability.evaluate(gamma_tau, steps, 1),
        ClosedForm::ThreeFidelity.evaluate(gamma_tau, steps, 1),
    )
}

/// Which family of closed forms fills reference columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaVariant {
    #[default]
    Corrected,
    Literal,
}

impl FromStr for FormulaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "corrected" | "two_fidelity_corrected" | "photon_fidelity_corrected"
            | "photon_probability_corrected" => Ok(FormulaVariant::Corrected),
            "literal" | "two_fidelity_literal" | "photon_fidelity_literal"
            | "photon_probability_literal" => Ok(FormulaVariant::Literal),
            other => Err(Error::InvalidParameter(format!(
                "unknown formula variant `{other}` (expected corrected or literal)"
            ))),
        }
    }
}

impl fmt::Display for FormulaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormulaVariant::Corrected => "corrected",
            FormulaVariant::Literal => "literal",
        })
    }
}

/// Closed-form `(P_N, F_N)` for the default scenario of `n_emitters`
/// (first emitter excited, target singlet / W), if one exists.
///
/// Two emitters: any kept photon number. Three emitters: one kept photon.
/// The variant only affects the two-emitter case.
pub fn reference_curve(
    n_emitters: usize,
    kept_photons: usize,
    variant: FormulaVariant,
    gamma_tau: f64,
    steps: u32,
) -> Option<(Prediction, Prediction)> {
    match (n_emitters, kept_photons) {
        (2, k) if k >= 1 => {
            let two = closed_form_two_emitter(gamma_tau, steps, k).ok()?;
            Some(match variant {
                FormulaVariant::Corrected => (two.probability, two.fidelity),
                FormulaVariant::Literal => (two.probability_literal, two.fidelity_literal),
            })
        }
        (3, 1) => Some(closed_form_three_emitter(gamma_tau, steps)),
        _ => None,
    }
}
