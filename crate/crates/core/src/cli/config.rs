//! Run configuration: a JSON file with every key optional, plus flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Order, TrackParams};
use crate::geometry::{TrackerGeometry, DEFAULT_TRACKER_LENGTH_SW};
use crate::hit_models::HitKind;
use crate::lineshape::{QualityMix, DEFAULT_CORE_FRACTION, MAX_ENUMERATED_LAYERS};
use crate::montecarlo::{BinSpec, InequalityOptions, SimulationConfig, DEFAULT_N_TRACKS};

/// Every field of the JSON config. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub n_layers: usize,
    /// Tracker length in strip widths; layers are equally spaced over it.
    pub tracker_length_sw: f64,
    /// Explicit layer coordinates; overrides `n_layers` and the length.
    pub layer_positions: Option<Vec<f64>>,
    pub hit_kind: HitKind,
    pub sigma_good: f64,
    pub sigma_bad: f64,
    pub p_good: f64,
    pub n_tracks: usize,
    pub order: Order,
    pub true_params: TrackParams,
    pub seed: u64,
    /// Histogram bins across the central 99.9% of the sample.
    pub bins: usize,
    pub bin_width: Option<f64>,
    pub core_fraction: f64,
    pub quality_threshold: usize,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    pub covariance_tracks: usize,
    /// Quality pattern for the covariance check; alternating bad/good by default.
    pub covariance_sequence: Option<Vec<bool>>,
    pub sweep_n_min: usize,
    pub sweep_n_max: usize,
    /// Smallest layer count included in the growth-slope fits.
    pub slope_n_min: usize,
    pub grid_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_layers: 7,
            tracker_length_sw: DEFAULT_TRACKER_LENGTH_SW,
            layer_positions: None,
            hit_kind: HitKind::Rectangular,
            sigma_good: 0.018,
            sigma_bad: 0.18,
            p_good: 0.2,
            n_tracks: DEFAULT_N_TRACKS,
            order: Order::Straight,
            true_params: TrackParams::straight(0.0, 0.0),
            seed: 1,
            bins: 200,
            bin_width: None,
            core_fraction: DEFAULT_CORE_FRACTION,
            quality_threshold: 2,
            bootstrap_resamples: 200,
            confidence: 0.99,
            covariance_tracks: 1_000_000,
            covariance_sequence: None,
            sweep_n_min: 2,
            sweep_n_max: 13,
            slope_n_min: 4,
            grid_points: 4096,
        }
    }
}

/// Values given on the command line; `None` keeps the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_layers: Option<usize>,
    pub n_tracks: Option<usize>,
    pub hit_kind: Option<HitKind>,
    pub order: Option<Order>,
    pub p_good: Option<f64>,
    pub sigma_good: Option<f64>,
    pub sigma_bad: Option<f64>,
}

/// Config problems, reported with the location when known.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path}, line {line}, column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl RunConfig {
    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> std::result::Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.n_layers {
            self.n_layers = v;
        }
        if let Some(v) = o.n_tracks {
            self.n_tracks = v;
        }
        if let Some(v) = o.hit_kind {
            self.hit_kind = v;
        }
        if let Some(v) = o.order {
            self.order = v;
        }
        if let Some(v) = o.p_good {
            self.p_good = v;
        }
        if let Some(v) = o.sigma_good {
            self.sigma_good = v;
        }
        if let Some(v) = o.sigma_bad {
            self.sigma_bad = v;
        }
    }

    pub fn geometry(&self) -> Result<TrackerGeometry> {
        match &self.layer_positions {
            Some(p) => TrackerGeometry::from_positions(p),
            None => TrackerGeometry::equal_spacing(self.n_layers, self.tracker_length_sw),
        }
    }

    pub fn mix(&self) -> Result<QualityMix> {
        QualityMix::new(self.sigma_good, self.sigma_bad, self.p_good)
    }

    /// Simulation settings for `n_layers` equally spaced layers, or for
    /// the configured geometry when `n_layers` is `None`.
    pub fn simulation(&self, n_layers: Option<usize>) -> Result<SimulationConfig> {
        let geom = match n_layers {
            Some(n) => TrackerGeometry::equal_spacing(n, self.tracker_length_sw)?,
            None => self.geometry()?,
        };
        let mut true_params = self.true_params;
        true_params.eta = match self.order {
            Order::Straight => None,
            Order::Parabolic => Some(true_params.eta.unwrap_or(0.0)),
        };
        let config = SimulationConfig {
            geom,
            hit_kind: self.hit_kind,
            mix: self.mix()?,
            n_tracks: self.n_tracks,
            true_params,
            order: self.order,
            seed: self.seed,
            fixed_sequence: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn bin_spec(&self) -> BinSpec {
        BinSpec { bin_width: self.bin_width, range: None, bins: self.bins, core_fraction: self.core_fraction }
    }

    pub fn inequality_options(&self) -> InequalityOptions {
        InequalityOptions { resamples: self.bootstrap_resamples, confidence: self.confidence }
    }

    /// Configured covariance sequence, or layers alternating bad/good.
    pub fn covariance_sequence(&self, n_layers: usize) -> Vec<bool> {
        self.covariance_sequence.clone().unwrap_or_else(|| (0..n_layers).map(|j| j % 2 == 1).collect())
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let geom = self.geometry()?;
        self.mix()?;
        if self.order.n_params() > geom.n_layers() {
            return Err(Error::invalid(
                "order",
                format!("a {}-parameter fit needs at least {} layers, got {}", self.order.n_params(), self.order.n_params(), geom.n_layers()),
            ));
        }
        if self.n_tracks == 0 {
            return Err(Error::invalid("n_tracks", "must be positive"));
        }
        if self.bins == 0 {
            return Err(Error::invalid("bins", "must be positive"));
        }
        if !(self.core_fraction > 0.0 && self.core_fraction < 1.0) {
            return Err(Error::invalid("core_fraction", format!("must lie in (0, 1), got {}", self.core_fraction)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid("confidence", format!("must lie in (0, 1), got {}", self.confidence)));
        }
        if let Some(s) = &self.covariance_sequence {
            if s.len() != geom.n_layers() {
                return Err(Error::invalid(
                    "covariance_sequence",
                    format!("expected {} flags, got {}", geom.n_layers(), s.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        if self.layer_positions.is_some() {
            return Err(Error::invalid("layer_positions", "a sweep uses equally spaced layers"));
        }
        let (lo, hi) = (self.sweep_n_min, self.sweep_n_max);
        if !(2 <= lo && lo <= hi && hi <= MAX_ENUMERATED_LAYERS) {
            return Err(Error::invalid(
                "sweep_n_min",
                format!("need 2 ≤ sweep_n_min ≤ sweep_n_max ≤ {MAX_ENUMERATED_LAYERS}, got {lo}..{hi}"),
            ));
        }
        if self.order.n_params() > lo {
            return Err(Error::invalid("sweep_n_min", format!("order {} needs at least {} layers", self.order, self.order.n_params())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = RunConfig::parse("{}", "test").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let err = RunConfig::parse("{\n  \"n_layer\": 7\n}", "cfg.json").unwrap_err();
        match err {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("n_layer"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn round_trip_and_overrides() {
        let mut c = RunConfig::parse(
            r#"{"n_layers": 5, "hit_kind": "triangular", "order": 3, "true_params": {"beta": 0.1, "gamma": 0.0}}"#,
            "t",
        )
        .unwrap();
        assert_eq!(c.order, Order::Parabolic);
        assert_eq!(c.hit_kind, HitKind::Triangular);
        c.apply(&Overrides { n_layers: Some(9), p_good: Some(0.5), ..Default::default() });
        assert_eq!((c.n_layers, c.p_good), (9, 0.5));
        let s = c.simulation(None).unwrap();
        assert_eq!(s.true_params.eta, Some(0.0));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let c = RunConfig { n_layers: 1, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "n_layers", .. })));
        let c = RunConfig { order: Order::Parabolic, n_layers: 2, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "order", .. })));
        let c = RunConfig { sweep_n_max: 21, ..Default::default() };
        assert!(c.validate_sweep().is_err());
        assert!(RunConfig::parse(r#"{"order": 4}"#, "t").is_err());
    }

    #[test]
    fn alternating_covariance_sequence() {
        let c = RunConfig::default();
        assert_eq!(c.covariance_sequence(4), vec![false, true, false, true]);
    }
}
