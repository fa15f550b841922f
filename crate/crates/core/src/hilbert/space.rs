use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default guard on the total dimension of a composite space.
pub const DEFAULT_DIM_LIMIT: usize = 1 << 20;

/// Product space of `n_emitters` two-level emitters and one cavity mode
/// truncated at `photon_cutoff` photons (inclusive).
///
/// Basis ordering: the emitter configuration is the fast index and the photon
/// number the slow one, so basis index `i` corresponds to
/// `(i % 2^n, i / 2^n)`. Within the configuration, emitter 1 is the least
/// significant bit and a set bit means the emitter is excited.
///
/// A space with `photon_cutoff == 0` doubles as the emitter-only space: the
/// cavity factor is one-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositeSpace {
    n_emitters: usize,
    photon_cutoff: usize,
}

impl CompositeSpace {
    pub fn new(n_emitters: usize, photon_cutoff: usize) -> Result<Self> {
        Self::with_limit(n_emitters, photon_cutoff, DEFAULT_DIM_LIMIT)
    }

    pub fn with_limit(n_emitters: usize, photon_cutoff: usize, limit: usize) -> Result<Self> {
        if n_emitters == 0 {
            return Err(Error::NoEmitters);
        }
        let dim = if n_emitters >= 100 {
            u128::MAX
        } else {
            (1u128 << n_emitters).saturating_mul(photon_cutoff as u128 + 1)
        };
        if dim > limit as u128 {
            return Err(Error::DimensionTooLarge { dim, limit });
        }
        Ok(Self {
            n_emitters,
            photon_cutoff,
        })
    }

    /// The emitter-only space (cavity restricted to vacuum).
    pub fn emitters_only(n_emitters: usize) -> Result<Self> {
        Self::new(n_emitters, 0)
    }

    pub fn n_emitters(&self) -> usize {
        self.n_emitters
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_cutoff
    }

    /// Number of emitter configurations, `2^n`.
    pub fn emitter_dim(&self) -> usize {
        1 << self.n_emitters
    }

    pub fn fock_dim(&self) -> usize {
        self.photon_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.emitter_dim() * self.fock_dim()
    }

    /// The emitter factor of this space.
    pub fn emitter_space(&self) -> CompositeSpace {
        CompositeSpace {
            n_emitters: self.n_emitters,
            photon_cutoff: 0,
        }
    }

    /// Largest number of quanta any basis state can hold.
    pub fn max_quanta(&self) -> usize {
        self.n_emitters + self.photon_cutoff
    }

    /// Basis index of `(emitter configuration, photon number)`.
    ///
    /// Panics if either label is out of range; use [`Self::try_index`] for
    /// checked access.
    pub fn index(&self, config: usize, photons: usize) -> usize {
        self.try_index(config, photons)
            .expect("basis labels out of range")
    }

    pub fn try_index(&self, config: usize, photons: usize) -> Result<usize> {
        if photons > self.photon_cutoff {
            return Err(Error::PhotonOutOfRange {
                photons,
                cutoff: self.photon_cutoff,
            });
        }
        if config >= self.emitter_dim() {
            return Err(Error::InvalidParameter(format!(
                "emitter configuration {config:#b} has bits beyond {} emitters",
                self.n_emitters
            )));
        }
        Ok(photons * self.emitter_dim() + config)
    }

    /// Inverse of [`Self::index`]: `(emitter configuration, photon number)`.
    pub fn labels(&self, index: usize) -> (usize, usize) {
        assert!(index < self.dim(), "basis index {index} out of range");
        (index % self.emitter_dim(), index / self.emitter_dim())
    }

    /// Total quanta (excited emitters plus photons) of a basis state.
    pub fn quanta(&self, index: usize) -> usize {
        let (config, photons) = self.labels(index);
        config.count_ones() as usize + photons
    }

    /// Basis indices whose total quanta equal `m`, in ascending order.
    pub fn sector(&self, m: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.quanta(i) == m).collect()
    }

    /// Parses an emitter configuration written left to right starting with
    /// emitter 1, using `1`/`e` for excited and `0`/`g` for ground.
    pub fn parse_config(&self, labels: &str) -> Result<usize> {
        let chars: Vec<char> = labels.chars().collect();
        if chars.len() != self.n_emitters {
            return Err(Error::BitstringLength {
                expected: self.n_emitters,
                got: chars.len(),
            });
        }
        chars.iter().enumerate().try_fold(0usize, |acc, (i, &c)| {
            match c {
                '1' | 'e' | 'E' => Ok(acc | (1 << i)),
                '0' | 'g' | 'G' => Ok(acc),
                other => Err(Error::InvalidBit(other)),
            }
        })
    }

    /// Inverse of [`Self::parse_config`], written with `g`/`e`.
    pub fn config_label(&self, config: usize) -> String {
        (0..self.n_emitters)
            .map(|i| if config >> i & 1 == 1 { 'e' } else { 'g' })
            .collect()
    }

    /// Human-readable basis label such as `eg;1`.
    pub fn basis_label(&self, index: usize) -> String {
        let (config, photons) = self.labels(index);
        format!("{};{}", self.config_label(config), photons)
    }
}

impl fmt::Display for CompositeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} emitters x {} Fock levels",
            self.n_emitters,
            self.fock_dim()
        )
    }
}
