//! Zero-mean hit-error models.
//!
//! Every model is a density `f(x)` on the whole real line with
//! `∫f = 1`, `∫x f = 0` and `∫x² f = σ²`. The Gaussian is the regular
//! reference; the rectangular and triangular families have finite
//! support and are not differentiable at its edges.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the unit-variance rectangular density.
pub const RECT_HALF_WIDTH: f64 = 1.732_050_807_568_877_2; // √3
/// Half-width of the unit-variance symmetric triangular density.
pub const TRIANGLE_HALF_WIDTH: f64 = 2.449_489_742_783_178; // √6

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitKind {
    Gaussian,
    Rectangular,
    Triangular,
}

impl HitKind {
    pub const ALL: [HitKind; 3] = [HitKind::Gaussian, HitKind::Rectangular, HitKind::Triangular];

    pub fn as_str(self) -> &'static str {
        match self {
            HitKind::Gaussian => "gaussian",
            HitKind::Rectangular => "rectangular",
            HitKind::Triangular => "triangular",
        }
    }

    /// Support half-width of the unit-variance member, `None` for unbounded.
    pub fn unit_half_width(self) -> Option<f64> {
        match self {
            HitKind::Gaussian => None,
            HitKind::Rectangular => Some(RECT_HALF_WIDTH),
            HitKind::Triangular => Some(TRIANGLE_HALF_WIDTH),
        }
    }

    /// Draw from the unit-variance member.
    pub fn sample_unit<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            HitKind::Gaussian => rng.sample(StandardNormal),
            HitKind::Rectangular => (rng.random::<f64>() - 0.5) * (2.0 * RECT_HALF_WIDTH),
            HitKind::Triangular => {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                (u + v - 1.0) * TRIANGLE_HALF_WIDTH
            }
        }
    }

    fn unit_density(self, z: f64) -> f64 {
        match self {
            HitKind::Gaussian => (-0.5 * z * z).exp() / (2.0 * PI).sqrt(),
            HitKind::Rectangular => {
                if z.abs() <= RECT_HALF_WIDTH {
                    0.5 / RECT_HALF_WIDTH
                } else {
                    0.0
                }
            }
            HitKind::Triangular => {
                let a = TRIANGLE_HALF_WIDTH;
                if z.abs() < a {
                    (a - z.abs()) / (a * a)
                } else {
                    0.0
                }
            }
        }
    }

    fn unit_cdf(self, z: f64) -> f64 {
        match self {
            HitKind::Gaussian => 0.5 * erfc(-z / SQRT_2),
            HitKind::Rectangular => {
                let a = RECT_HALF_WIDTH;
                if z <= -a {
                    0.0
                } else if z >= a {
                    1.0
                } else {
                    (z + a) / (2.0 * a)
                }
            }
            HitKind::Triangular => {
                let a = TRIANGLE_HALF_WIDTH;
                if z <= -a {
                    0.0
                } else if z >= a {
                    1.0
                } else if z <= 0.0 {
                    let t = z + a;
                    0.5 * t * t / (a * a)
                } else {
                    let t = a - z;
                    1.0 - 0.5 * t * t / (a * a)
                }
            }
        }
    }
}

impl fmt::Display for HitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(HitKind::Gaussian),
            "rectangular" => Ok(HitKind::Rectangular),
            "triangular" => Ok(HitKind::Triangular),
            other => Err(Error::invalid(
                "hit_kind",
                format!("unknown kind `{other}` (expected gaussian, rectangular or triangular)"),
            )),
        }
    }
}

/// A hit-error density of a given family scaled to standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitModel {
    kind: HitKind,
    sigma: f64,
}

impl HitModel {
    pub fn new(kind: HitKind, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("must be positive and finite, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn kind(&self) -> HitKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-width of the support, `None` for the Gaussian.
    pub fn support_half_width(&self) -> Option<f64> {
        self.kind.unit_half_width().map(|a| a * self.sigma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sigma * self.kind.sample_unit(rng)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.kind.unit_density(x / self.sigma) / self.sigma
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.kind.unit_cdf(x / self.sigma)
    }
}
