//! Tracker layer coordinates.
//!
//! Positions are in strip widths and measured from a reference plane
//! chosen so that `Σ y_j = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STRIP_WIDTH_UM: f64 = 63.0;
pub const TRACKER_LENGTH_MM: f64 = 445.0;
/// 445 mm in units of 63 µm strips.
pub const DEFAULT_TRACKER_LENGTH_SW: f64 = TRACKER_LENGTH_MM * 1000.0 / STRIP_WIDTH_UM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerGeometry {
    y: Vec<f64>,
    length: f64,
}

impl TrackerGeometry {
    /// Layers evenly spread over `length`, centred on the reference plane.
    pub fn equal_spacing(n_layers: usize, length: f64) -> Result<Self> {
        if n_layers < 2 {
            return Err(Error::invalid(
                "n_layers",
                format!("need at least 2 layers, got {n_layers}"),
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid("tracker_length_sw", format!("must be positive, got {length}")));
        }
        let step = length / (n_layers - 1) as f64;
        let half = 0.5 * length;
        let mut y: Vec<f64> = (0..n_layers).map(|j| step * j as f64 - half).collect();
        // exact mirror pairs
        for j in 0..n_layers / 2 {
            y[n_layers - 1 - j] = -y[j];
        }
        if n_layers % 2 == 1 {
            y[n_layers / 2] = 0.0;
        }
        Ok(Self { y, length })
    }

    /// Arbitrary layer positions, shifted so that their sum vanishes.
    pub fn from_positions(positions: &[f64]) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid(
                "layer_positions",
                format!("need at least 2 layers, got {}", positions.len()),
            ));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer_positions", "positions must be finite"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("layer_positions", "positions must be strictly increasing"));
        }
        let mean = positions.iter().sum::<f64>() / positions.len() as f64;
        let y: Vec<f64> = positions.iter().map(|v| v - mean).collect();
        let length = y[y.len() - 1] - y[0];
        Ok(Self { y, length })
    }

    pub fn n_layers(&self) -> usize {
        self.y.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.y
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `Σ y_j^k`.
    pub fn moment(&self, k: i32) -> f64 {
        self.y.iter().map(|v| v.powi(k)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let g = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        assert_eq!(g.positions(), &[-1.0, 1.0]);
        let g = TrackerGeometry::equal_spacing(3, 2.0).unwrap();
        assert_eq!(g.positions(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn default_tracker() {
        assert!((DEFAULT_TRACKER_LENGTH_SW - 7063.492063492063).abs() < 1e-9);
        let g = TrackerGeometry::equal_spacing(13, 7063.49).unwrap();
        assert!((g.positions()[0] + 3531.745).abs() < 1e-9);
        assert!((g.positions()[12] - 3531.745).abs() < 1e-9);
        assert!(g.moment(1).abs() <= 1e-12 * g.length());
    }

    #[test]
    fn invariants_for_all_sizes() {
        for n in 2..=20 {
            let g = TrackerGeometry::equal_spacing(n, DEFAULT_TRACKER_LENGTH_SW).unwrap();
            let y = g.positions();
            assert_eq!(y.len(), n);
            assert!(y.windows(2).all(|w| w[1] > w[0]));
            assert!(g.moment(1).abs() <= 1e-12 * g.length());
            // mirrored layers: odd moments cancel up to rounding
            assert!(g.moment(3).abs() <= 1e-12 * g.length().powi(3));
            assert!(((y[n - 1] - y[0]) - g.length()).abs() <= 1e-12 * g.length());
        }
    }

    #[test]
    fn rejects_single_layer() {
        assert!(matches!(
            TrackerGeometry::equal_spacing(1, 10.0),
            Err(Error::InvalidParameter { name: "n_layers", .. })
        ));
        assert!(TrackerGeometry::equal_spacing(3, 0.0).is_err());
        assert!(TrackerGeometry::from_positions(&[1.0]).is_err());
        assert!(TrackerGeometry::from_positions(&[1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn recentering_is_translation_invariant() {
        let raw = [0.0, 100.0, 250.0, 900.0, 1000.0];
        let a = TrackerGeometry::from_positions(&raw).unwrap();
        let shifted: Vec<f64> = raw.iter().map(|v| v + 3210.5).collect();
        let b = TrackerGeometry::from_positions(&shifted).unwrap();
        for (u, v) in a.positions().iter().zip(b.positions()) {
            assert!((u - v).abs() < 1e-9);
        }
        assert!(a.moment(1).abs() < 1e-12 * a.length());
        assert!((a.length() - 1000.0).abs() < 1e-12);
    }
}
