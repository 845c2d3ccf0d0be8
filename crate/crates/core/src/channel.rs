//! Random channel realizations.

use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Variance of each self-interference matrix entry.
pub const SI_ENTRY_VARIANCE: f64 = 0.1;

/// One draw of every channel in the system, with the trace gains the model
/// actually consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_up: Vec<DVector<f64>>,
    pub h_down: Vec<DVector<f64>>,
    pub h_an: DMatrix<Complex64>,
    /// `trace(h h^H)` per vehicle, uplink.
    pub g_up: Vec<f64>,
    /// `trace(h^T (h^T)^H)` per vehicle, downlink.
    pub g_down: Vec<f64>,
    /// `trace(H_an H_an^H)`.
    pub g_si: f64,
}

impl ChannelSet {
    pub fn from_parts(
        h_up: Vec<DVector<f64>>,
        h_down: Vec<DVector<f64>>,
        h_an: DMatrix<Complex64>,
    ) -> Result<Self> {
        if h_up.len() != h_down.len() {
            return Err(Error::Dimension(format!(
                "{} uplink vs {} downlink channels",
                h_up.len(),
                h_down.len()
            )));
        }
        let n = h_an.nrows();
        if h_an.ncols() != n || h_up.iter().chain(&h_down).any(|h| h.len() != n) {
            return Err(Error::Dimension(format!(
                "channel vectors must all have length {n}"
            )));
        }
        let g_up = h_up.iter().map(|h| h.norm_squared()).collect();
        let g_down = h_down.iter().map(|h| h.norm_squared()).collect();
        let g_si = h_an.iter().map(|z| z.norm_sqr()).sum();
        Ok(Self {
            h_up,
            h_down,
            h_an,
            g_up,
            g_down,
            g_si,
        })
    }

    /// Single-antenna channel with the given gains. Handy for hand-built
    /// instances where only the gains matter.
    pub fn from_gains(g_up: &[f64], g_down: &[f64], g_si: f64) -> Result<Self> {
        if g_up.iter().chain(g_down).any(|g| *g < 0.0) || g_si < 0.0 {
            return Err(Error::Dimension("gains must be non-negative".into()));
        }
        let vec1 = |g: &f64| DVector::from_element(1, g.sqrt());
        Self::from_parts(
            g_up.iter().map(vec1).collect(),
            g_down.iter().map(vec1).collect(),
            DMatrix::from_element(1, 1, Complex64::new(g_si.sqrt(), 0.0)),
        )
    }

    pub fn vehicles(&self) -> usize {
        self.g_up.len()
    }

    pub fn antennas(&self) -> usize {
        self.h_an.nrows()
    }

    /// Stable-within-a-build fingerprint of every channel coefficient.
    pub fn digest(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for h in self.h_up.iter().chain(&self.h_down) {
            for v in h.iter() {
                v.to_bits().hash(&mut hasher);
            }
        }
        for z in self.h_an.iter() {
            z.re.to_bits().hash(&mut hasher);
            z.im.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }
}

/// RNG stream for one Monte-Carlo trial.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws the channels for trial `trial_index` of `cfg.seed`.
///
/// Uplink and downlink entries are real `U(0.5, 1)`; self-interference entries
/// are `CN(0, 0.1)`.
pub fn generate_channels(cfg: &SystemConfig, trial_index: u64) -> Result<ChannelSet> {
    generate_channels_with(cfg, &mut trial_rng(cfg.seed, trial_index))
}

pub fn generate_channels_with<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelSet> {
    if cfg.vehicles == 0 || cfg.antennas == 0 {
        return Err(Error::InvalidConfig("K and N must be positive".into()));
    }
    let (k, n) = (cfg.vehicles, cfg.antennas);
    let uniform = Uniform::new_inclusive(0.5, 1.0).expect("valid range");
    let gauss = Normal::new(0.0, (SI_ENTRY_VARIANCE / 2.0).sqrt()).expect("valid sd");

    let draw_vec = |rng: &mut R| DVector::from_fn(n, |_, _| uniform.sample(rng));
    let h_up: Vec<_> = (0..k).map(|_| draw_vec(rng)).collect();
    let h_down: Vec<_> = (0..k).map(|_| draw_vec(rng)).collect();
    let h_an = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(gauss.sample(rng), gauss.sample(rng))
    });
    ChannelSet::from_parts(h_up, h_down, h_an)
}
