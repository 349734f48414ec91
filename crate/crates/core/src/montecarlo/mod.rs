//! Track-ensemble Monte Carlo.
//!
//! Track `i` draws from its own ChaCha8 stream `(seed, i)`, so an ensemble
//! does not depend on how the work is split across threads. Per-track
//! values are collected in index order and every reduction runs over them
//! sequentially (or over fixed-size chunks merged in order).

mod histogram;
mod verify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{LinearEstimator, Method, Order, Param, TrackParams};
use crate::geometry::{TrackerGeometry, DEFAULT_TRACKER_LENGTH_SW};
use crate::hit_models::HitKind;
use crate::lineshape::{QualityMix, QualitySequence};

pub use histogram::{decompose_by_quality, histogram, BinSpec, EmpiricalPdf, Histogram, PeakEstimate, QualitySplit};
pub use verify::{
    covariance_check, inequalities_from_ensemble, verify_inequalities, CovarianceReport, EntryCheck,
    InequalityOptions, InequalityReport, ParamRatio, Status, COVARIANCE_Z_LIMIT, MIN_TRACKS_FOR_VERDICT,
};

pub const DEFAULT_N_TRACKS: usize = 150_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub geom: TrackerGeometry,
    pub hit_kind: HitKind,
    pub mix: QualityMix,
    pub n_tracks: usize,
    pub true_params: TrackParams,
    pub order: Order,
    pub seed: u64,
    /// Quality pattern shared by every track instead of Bernoulli draws.
    pub fixed_sequence: Option<Vec<bool>>,
}

impl SimulationConfig {
    /// Toy tracker with `n_layers` equally spaced layers, rectangular hits,
    /// the default quality mix, 150 000 tracks and a zero true track.
    pub fn toy(n_layers: usize) -> Result<Self> {
        Ok(Self {
            geom: TrackerGeometry::equal_spacing(n_layers, DEFAULT_TRACKER_LENGTH_SW)?,
            hit_kind: HitKind::Rectangular,
            mix: QualityMix::toy_default(),
            n_tracks: DEFAULT_N_TRACKS,
            true_params: TrackParams::straight(0.0, 0.0),
            order: Order::Straight,
            seed: 0,
            fixed_sequence: None,
        })
    }

    /// Switch the track model order, keeping `η = 0` for parabolic tracks.
    pub fn with_order(mut self, order: Order) -> Self {
        self.order = order;
        self.true_params.eta = match order {
            Order::Straight => None,
            Order::Parabolic => Some(self.true_params.eta.unwrap_or(0.0)),
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.geom.n_layers();
        if self.n_tracks == 0 {
            return Err(Error::invalid("n_tracks", "must be positive"));
        }
        if self.order.n_params() > n {
            return Err(Error::invalid(
                "order",
                format!("a {}-parameter fit needs at least {} layers, got {n}", self.order.n_params(), self.order.n_params()),
            ));
        }
        if n > 32 {
            return Err(Error::invalid("n_layers", format!("at most 32 layers are supported, got {n}")));
        }
        QualityMix::new(self.mix.sigma_good, self.mix.sigma_bad, self.mix.p_good)?;
        if let Some(f) = &self.fixed_sequence {
            if f.len() != n {
                return Err(Error::invalid(
                    "fixed_sequence",
                    format!("expected {n} flags, got {}", f.len()),
                ));
            }
        }
        Ok(())
    }

    /// Every track sees the same hit variances.
    pub fn is_homoscedastic(&self) -> bool {
        match &self.fixed_sequence {
            Some(f) => self.mix.sigma_good == self.mix.sigma_bad || f.iter().all(|g| *g == f[0]),
            None => self.mix.is_homoscedastic(),
        }
    }

    fn track_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One simulated track: quality mask, hit sigmas and measured positions.
pub(crate) struct TrackDraw {
    pub mask: u32,
    pub sigmas: Vec<f64>,
    pub x: Vec<f64>,
}

/// Draw track `index`: quality flags first (unless fixed), then one hit per layer.
pub(crate) fn draw_track(config: &SimulationConfig, truth: &[f64], index: usize) -> TrackDraw {
    let mut rng = config.track_rng(index);
    let n = truth.len();
    let mask = match &config.fixed_sequence {
        Some(f) => QualitySequence::from_flags(f).mask(),
        None => (0..n).fold(0u32, |m, j| if rng.random::<f64>() < config.mix.p_good { m | 1 << j } else { m }),
    };
    let mut sigmas = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for (j, t) in truth.iter().enumerate() {
        let s = config.mix.sigma(mask >> j & 1 == 1);
        sigmas.push(s);
        x.push(t + s * config.hit_kind.sample_unit(&mut rng));
    }
    TrackDraw { mask, sigmas, x }
}

pub(crate) fn true_positions(config: &SimulationConfig) -> Vec<f64> {
    config.geom.positions().iter().map(|y| config.true_params.position(*y)).collect()
}

fn as_array(p: &TrackParams) -> [f64; 3] {
    [p.beta, p.gamma, p.eta.unwrap_or(0.0)]
}

/// Sample mean and variance (`n − 1` denominator) of one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorStats {
    pub method: Method,
    pub param: Param,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub order: Order,
    pub n_layers: usize,
    pub true_params: TrackParams,
    standard: Vec<[f64; 3]>,
    weighted: Vec<[f64; 3]>,
    masks: Vec<u32>,
    pub stats: Vec<EstimatorStats>,
}

impl EnsembleResult {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn estimates(&self, method: Method, param: Param) -> Vec<f64> {
        let k = param.index();
        self.rows(method).iter().map(|r| r[k]).collect()
    }

    /// Per-track `[β, γ, η]` (η is zero for straight fits).
    pub fn rows(&self, method: Method) -> &[[f64; 3]] {
        match method {
            Method::Standard => &self.standard,
            Method::Weighted => &self.weighted,
        }
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn sequence(&self, track: usize) -> QualitySequence {
        QualitySequence::from_mask(self.masks[track], self.n_layers)
    }

    pub fn good_counts(&self) -> Vec<usize> {
        self.masks.iter().map(|m| m.count_ones() as usize).collect()
    }

    pub fn stat(&self, method: Method, param: Param) -> Option<&EstimatorStats> {
        self.stats.iter().find(|s| s.method == method && s.param == param)
    }
}

pub(crate) fn mean_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Generate the ensemble and fit every track with both methods.
pub fn simulate(config: &SimulationConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let truth = true_positions(config);
    let standard = LinearEstimator::new(Method::Standard, &config.geom, None, config.order)?;
    let rows: Vec<(u32, [f64; 3], [f64; 3])> = (0..config.n_tracks)
        .into_par_iter()
        .map(|i| {
            let t = draw_track(config, &truth, i);
            let weighted = LinearEstimator::new(Method::Weighted, &config.geom, Some(&t.sigmas), config.order)?;
            Ok((t.mask, as_array(&standard.estimate(&t.x)), as_array(&weighted.estimate(&t.x))))
        })
        .collect::<Result<_>>()?;

    let mut masks = Vec::with_capacity(rows.len());
    let mut std_rows = Vec::with_capacity(rows.len());
    let mut wtd_rows = Vec::with_capacity(rows.len());
    for (m, s, w) in rows {
        masks.push(m);
        std_rows.push(s);
        wtd_rows.push(w);
    }
    let mut stats = Vec::new();
    for method in Method::BOTH {
        let src = if method == Method::Standard { &std_rows } else { &wtd_rows };
        for &param in config.order.params() {
            let k = param.index();
            let (mean, variance) = mean_variance(src.iter().map(|r| r[k]));
            stats.push(EstimatorStats {
                method,
                param,
                mean,
                variance,
                mean_error: (variance / src.len() as f64).sqrt(),
            });
        }
    }
    Ok(EnsembleResult {
        order: config.order,
        n_layers: config.geom.n_layers(),
        true_params: config.true_params,
        standard: std_rows,
        weighted: wtd_rows,
        masks,
        stats,
    })
}
