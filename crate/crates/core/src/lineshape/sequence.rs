use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest layer count for which all `2^N` quality sequences are enumerated.
pub const MAX_ENUMERATED_LAYERS: usize = 20;

/// Two-level hit quality: good hits with probability `p_good`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMix {
    pub sigma_good: f64,
    pub sigma_bad: f64,
    pub p_good: f64,
}

impl QualityMix {
    pub fn new(sigma_good: f64, sigma_bad: f64, p_good: f64) -> Result<Self> {
        for (name, s) in [("sigma_good", sigma_good), ("sigma_bad", sigma_bad)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {s}")));
            }
        }
        if !(0.0..=1.0).contains(&p_good) {
            return Err(Error::invalid("p_good", format!("must lie in [0, 1], got {p_good}")));
        }
        Ok(Self { sigma_good, sigma_bad, p_good })
    }

    /// σ_good = 0.018, σ_bad = 0.18 strip widths, 20% good hits.
    pub fn toy_default() -> Self {
        Self { sigma_good: 0.018, sigma_bad: 0.18, p_good: 0.2 }
    }

    /// True when every track has identical hit variances.
    pub fn is_homoscedastic(&self) -> bool {
        self.sigma_good == self.sigma_bad || self.p_good == 0.0 || self.p_good == 1.0
    }

    pub fn sigma(&self, good: bool) -> f64 {
        if good {
            self.sigma_good
        } else {
            self.sigma_bad
        }
    }

    /// Expected hit variance over the mix.
    pub fn mean_variance(&self) -> f64 {
        self.p_good * self.sigma_good.powi(2) + (1.0 - self.p_good) * self.sigma_bad.powi(2)
    }
}

/// Per-layer good/bad pattern of one track. Bit `j` of the mask is layer `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QualitySequence {
    mask: u32,
    n_layers: u8,
}

impl QualitySequence {
    pub fn from_mask(mask: u32, n_layers: usize) -> Self {
        assert!(n_layers <= 32);
        let m = if n_layers == 32 { mask } else { mask & ((1u32 << n_layers) - 1) };
        Self { mask: m, n_layers: n_layers as u8 }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let mask = flags
            .iter()
            .enumerate()
            .fold(0u32, |m, (j, &g)| if g { m | (1 << j) } else { m });
        Self::from_mask(mask, flags.len())
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers as usize
    }

    pub fn is_good(&self, layer: usize) -> bool {
        self.mask >> layer & 1 == 1
    }

    pub fn flags(&self) -> Vec<bool> {
        (0..self.n_layers()).map(|j| self.is_good(j)).collect()
    }

    pub fn good_count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn sigmas(&self, mix: &QualityMix) -> Vec<f64> {
        (0..self.n_layers()).map(|j| mix.sigma(self.is_good(j))).collect()
    }

    /// `p^(#good) (1−p)^(#bad)`.
    pub fn probability(&self, p_good: f64) -> f64 {
        let g = self.good_count() as i32;
        let b = self.n_layers() as i32 - g;
        p_good.powi(g) * (1.0 - p_good).powi(b)
    }
}

/// All `2^N` sequences with their binomial weights, in mask order.
pub fn enumerate_sequences(n_layers: usize, p_good: f64) -> Result<Vec<(QualitySequence, f64)>> {
    if n_layers > MAX_ENUMERATED_LAYERS {
        return Err(Error::TooManyLayers { n_layers, max: MAX_ENUMERATED_LAYERS });
    }
    if !(0.0..=1.0).contains(&p_good) {
        return Err(Error::invalid("p_good", format!("must lie in [0, 1], got {p_good}")));
    }
    Ok((0..1u32 << n_layers)
        .map(|m| {
            let s = QualitySequence::from_mask(m, n_layers);
            (s, s.probability(p_good))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_good_weight() {
        let seqs = enumerate_sequences(7, 0.2).unwrap();
        assert_eq!(seqs.len(), 128);
        let (s, w) = seqs[127];
        assert_eq!(s.good_count(), 7);
        assert!((w - 1.28e-5).abs() < 1e-18);
    }

    #[test]
    fn two_layers_uniform() {
        let seqs = enumerate_sequences(2, 0.5).unwrap();
        assert_eq!(seqs.len(), 4);
        assert!(seqs.iter().all(|(_, w)| *w == 0.25));
    }

    #[test]
    fn weights_sum_to_one() {
        for n in 1..=16 {
            for p in [0.0, 0.2, 0.5, 0.73, 1.0] {
                let total: f64 = enumerate_sequences(n, p).unwrap().iter().map(|(_, w)| w).sum();
                // naive summation of 2^n terms
                let tol = (1u64 << n) as f64 * 4.0 * f64::EPSILON;
                assert!((total - 1.0).abs() < tol, "n={n} p={p}: {total}");
            }
        }
    }

    #[test]
    fn guard_on_size() {
        assert!(matches!(enumerate_sequences(21, 0.2), Err(Error::TooManyLayers { n_layers: 21, .. })));
        assert!(enumerate_sequences(4, 1.5).is_err());
    }

    #[test]
    fn flags_round_trip() {
        let flags = [true, false, false, true, true];
        let s = QualitySequence::from_flags(&flags);
        assert_eq!(s.flags(), flags);
        assert_eq!(s.good_count(), 3);
        let mix = QualityMix::toy_default();
        assert_eq!(s.sigmas(&mix), vec![0.018, 0.18, 0.18, 0.018, 0.018]);
    }

    #[test]
    fn mix_validation() {
        assert!(QualityMix::new(0.0, 0.18, 0.2).is_err());
        assert!(QualityMix::new(0.018, 0.18, -0.1).is_err());
        assert!(QualityMix::new(0.018, 0.018, 0.2).unwrap().is_homoscedastic());
        assert!(!QualityMix::toy_default().is_homoscedastic());
    }
}
