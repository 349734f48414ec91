//! Sampling distributions ("line-shapes") of the track estimators over a
//! binomial mixture of hit-quality sequences.
//!
//! For a fixed sequence the estimator is `Σ_j c_j x_j`, so its density is
//! the convolution of the `c_j`-scaled hit densities, with variance
//! `Σ_j c_j² σ_j²`. The ensemble line-shape is the mixture of these
//! components with weights `p^(#good)(1−p)^(#bad)`. With Gaussian hits each
//! component is Gaussian and the maximum of the mixture is
//! `Σ_s p_s / √(2π V_s)`.

mod convolution;
mod sequence;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{self, LinearEstimator, Method, Order, Param};
use crate::geometry::TrackerGeometry;
use crate::hit_models::HitKind;

pub use sequence::{enumerate_sequences, QualityMix, QualitySequence, MAX_ENUMERATED_LAYERS};

/// Default fraction of the peak height that delimits the core for the
/// log-parabola fit.
pub const DEFAULT_CORE_FRACTION: f64 = 0.6;

/// How the per-sequence variance of the standard fit is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardVariance {
    /// `(R⁻¹ C R⁻¹)_kk`, the exact variance of the standard estimator.
    Sandwich,
    /// `(R⁻¹)_kk` scaled by the mean hit variance of the track.
    MeanHitVariance,
}

/// One mixture component: a quality sequence's weight and the variance
/// of the estimator for that sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub mask: u32,
    pub weight: f64,
    pub variance: f64,
}

/// Variance of the estimator of `param` for one fixed quality sequence.
pub fn component_variance(
    seq: &QualitySequence,
    mix: &QualityMix,
    geom: &TrackerGeometry,
    method: Method,
    param: Param,
    order: Order,
) -> Result<f64> {
    let sigmas = seq.sigmas(mix);
    estimators::predicted_variance(method, geom, &sigmas, order, param)
}

/// `Σ w / √(2π V)`: the mixture density at its centre.
pub fn mixture_maximum(components: &[Component]) -> f64 {
    components
        .iter()
        .map(|c| c.weight / (2.0 * PI * c.variance).sqrt())
        .sum()
}

/// `Σ w V`, the full variance of the mixture.
pub fn mixture_variance(components: &[Component]) -> f64 {
    components.iter().map(|c| c.weight * c.variance).sum()
}

/// Variance of the Gaussian osculating the log-mixture at its peak:
/// `Σ_eff = (Σ w V^(-1/2)) / (Σ w V^(-3/2))`.
pub fn effective_core_variance(components: &[Component]) -> f64 {
    let (num, den) = components.iter().fold((0.0, 0.0), |(n, d), c| {
        let s = c.variance.sqrt();
        (n + c.weight / s, d + c.weight / (c.variance * s))
    });
    num / den
}

/// Large-sample form of the mixture maximum: the average of
/// `1/√(2π V_k)` over per-track variances.
pub fn mean_maximum_from_tracks<I: IntoIterator<Item = f64>>(variances: I) -> f64 {
    let (sum, n) = variances
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + 1.0 / (2.0 * PI * v).sqrt(), n + 1));
    sum / n as f64
}

/// Uniform lattice `x_k = k·dx`, `k = −P/2 … P/2−1`, covering ±`span_sigmas`
/// standard deviations of the widest component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub points: usize,
    pub span_sigmas: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 4096, span_sigmas: 6.0 }
    }
}

/// Minimum number of lattice points across ±3 std of the narrowest component.
const MIN_POINTS_ACROSS_CORE: f64 = 32.0;

impl GridSpec {
    fn step(&self, components: &[Component]) -> Result<f64> {
        if !self.points.is_power_of_two() || self.points < 64 {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two ≥ 64, got {}",
                self.points
            )));
        }
        if !(self.span_sigmas.is_finite() && self.span_sigmas > 0.0) {
            return Err(Error::InvalidGrid(format!("span must be positive, got {}", self.span_sigmas)));
        }
        let (lo, hi) = components
            .iter()
            .filter(|c| c.weight > 0.0)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.variance), hi.max(c.variance)));
        if hi <= 0.0 {
            return Err(Error::InvalidGrid("mixture has no components".into()));
        }
        let dx = self.span_sigmas * hi.sqrt() / (self.points / 2) as f64;
        let across = 6.0 * lo.sqrt() / dx;
        if across < MIN_POINTS_ACROSS_CORE {
            return Err(Error::InvalidGrid(format!(
                "only {across:.1} points across ±3σ of the narrowest component (need {MIN_POINTS_ACROSS_CORE})"
            )));
        }
        Ok(dx)
    }
}

/// A density tabulated on a centred uniform lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineShape {
    pub step: f64,
    /// Lattice index of the first point (negative).
    pub first_index: i64,
    pub density: Vec<f64>,
    /// Density at the centre.
    pub maximum: f64,
    /// Effective variance of the Gaussian core.
    pub core_variance: f64,
}

impl LineShape {
    pub fn axis(&self) -> Vec<f64> {
        (0..self.density.len())
            .map(|i| (self.first_index + i as i64) as f64 * self.step)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Index of `x = 0`.
    pub fn centre_index(&self) -> usize {
        (-self.first_index) as usize
    }

    pub fn trapezoid_integral(&self) -> f64 {
        trapezoid(&self.density, self.step)
    }

    /// Largest `|f(x) − f(−x)|` over lattice points that have a mirror.
    pub fn asymmetry(&self) -> f64 {
        let c = self.centre_index();
        let reach = c.min(self.density.len() - 1 - c);
        (1..=reach)
            .map(|k| (self.density[c + k] - self.density[c - k]).abs())
            .fold(0.0, f64::max)
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values.iter().sum();
    step * (inner - 0.5 * (values[0] + values[values.len() - 1]))
}

/// A quadratic fit to `ln f` over the core of a peaked density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoreFit {
    /// `−1 / (2a)` for `ln f ≈ a x² + b x + c`.
    pub variance: f64,
    pub centre: f64,
    /// `exp` of the fitted parabola at its vertex.
    pub peak: f64,
    pub bins: usize,
}

/// Fit a parabola to the logarithm of `density` over the contiguous run of
/// points around the maximum whose density is at least `fraction` of it.
/// `weights` are per-point inverse variances of `ln f` (counts for a
/// histogram); uniform when `None`.
pub fn core_fit(x: &[f64], density: &[f64], weights: Option<&[f64]>, fraction: f64) -> Result<CoreFit> {
    if x.len() != density.len() || x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("core_fraction", format!("must lie in (0, 1), got {fraction}")));
    }
    let imax = density
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > density[best] { i } else { best });
    let cut = fraction * density[imax];
    if !(cut > 0.0) {
        return Err(Error::InsufficientData("density has no positive peak".into()));
    }
    let mut lo = imax;
    while lo > 0 && density[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < density.len() && density[hi + 1] >= cut {
        hi += 1;
    }
    let bins = hi - lo + 1;
    if bins < 5 {
        return Err(Error::InsufficientData(format!(
            "only {bins} points above {fraction} of the peak (need 5)"
        )));
    }
    let x0 = x[imax];
    let scale = (x[hi] - x[lo]).abs().max(f64::MIN_POSITIVE);
    let u: Vec<f64> = x[lo..=hi].iter().map(|v| (v - x0) / scale).collect();
    let ln: Vec<f64> = density[lo..=hi].iter().map(|v| v.ln()).collect();
    let sig: Vec<f64> = match weights {
        Some(w) => w[lo..=hi].iter().map(|w| 1.0 / w.max(f64::MIN_POSITIVE).sqrt()).collect(),
        None => vec![1.0; bins],
    };
    let [c, b, a] = quadratic_fit(&u, &ln, &sig)?;
    if !(a < 0.0) {
        return Err(Error::InsufficientData("log-density core is not concave".into()));
    }
    let vertex = -b / (2.0 * a);
    Ok(CoreFit {
        variance: -scale * scale / (2.0 * a),
        centre: x0 + vertex * scale,
        peak: (c - b * b / (4.0 * a)).exp(),
        bins,
    })
}

/// Weighted least-squares parabola `c₀ + c₁u + c₂u²` through `(u, v)`
/// with per-point standard deviations `sig`.
pub(crate) fn quadratic_fit(u: &[f64], v: &[f64], sig: &[f64]) -> Result<[f64; 3]> {
    let est = LinearEstimator::from_positions(Method::Weighted, u, Some(sig), Order::Parabolic)?;
    let p = est.estimate(v);
    Ok([p.beta, p.gamma, p.eta.unwrap_or(0.0)])
}

/// The geometry, hit-quality mix and estimated parameter shared by the
/// line-shape computations.
#[derive(Debug, Clone)]
pub struct MixtureModel<'a> {
    pub geom: &'a TrackerGeometry,
    pub mix: QualityMix,
    pub order: Order,
    pub param: Param,
}

impl<'a> MixtureModel<'a> {
    /// Direction estimator of a straight-track fit.
    pub fn direction(geom: &'a TrackerGeometry, mix: QualityMix) -> Self {
        Self { geom, mix, order: Order::Straight, param: Param::Gamma }
    }

    fn sequences(&self) -> Result<Vec<(QualitySequence, f64)>> {
        enumerate_sequences(self.geom.n_layers(), self.mix.p_good)
    }

    /// All `2^N` components; the standard fit uses the exact sandwich variance.
    pub fn components(&self, method: Method) -> Result<Vec<Component>> {
        self.components_with(method, StandardVariance::Sandwich)
    }

    pub fn components_with(&self, method: Method, convention: StandardVariance) -> Result<Vec<Component>> {
        let r_inv = estimators::standard_r_inverse(self.geom, self.order, self.param)?;
        self.sequences()?
            .into_par_iter()
            .map(|(seq, weight)| {
                let variance = match (method, convention) {
                    (Method::Standard, StandardVariance::MeanHitVariance) => {
                        let s = seq.sigmas(&self.mix);
                        r_inv * s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64
                    }
                    _ => component_variance(&seq, &self.mix, self.geom, method, self.param, self.order)?,
                };
                Ok(Component { mask: seq.mask(), weight, variance })
            })
            .collect()
    }

    /// Mixture of Gaussian components tabulated on the lattice.
    pub fn gaussian_mixture(&self, method: Method, grid: &GridSpec) -> Result<LineShape> {
        let comps = self.components(method)?;
        gaussian_lineshape(&comps, grid)
    }

    /// Mixture of the exact per-sequence convolutions for hit densities of
    /// the given family.
    pub fn exact_lineshape(&self, method: Method, kind: HitKind, grid: &GridSpec) -> Result<LineShape> {
        let comps = self.components(method)?;
        let step = grid.step(&comps)?;
        let seqs = self.sequences()?;
        let density = convolution::mixture_density(self, method, kind, &seqs, grid.points, step)?;
        let mut shape = LineShape {
            step,
            first_index: -((grid.points / 2) as i64),
            density,
            maximum: 0.0,
            core_variance: effective_core_variance(&comps),
        };
        let norm = shape.trapezoid_integral();
        shape.density.iter_mut().for_each(|v| *v /= norm);
        shape.maximum = shape.density[shape.centre_index()];
        Ok(shape)
    }

    /// Analytic `Σ_eff` and, when the core is resolved, the log-parabola
    /// fit to the tabulated Gaussian mixture.
    pub fn effective_variance(&self, method: Method, grid: &GridSpec, fraction: f64) -> Result<EffectiveVariance> {
        let comps = self.components(method)?;
        let shape = gaussian_lineshape(&comps, grid)?;
        let fit = core_fit(&shape.axis(), &shape.density, None, fraction).ok();
        Ok(EffectiveVariance {
            analytic: effective_core_variance(&comps),
            empirical: fit.map(|f| f.variance),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveVariance {
    pub analytic: f64,
    pub empirical: Option<f64>,
}

/// Tabulate `Σ w N(0, V)` for the given components.
pub fn gaussian_lineshape(components: &[Component], grid: &GridSpec) -> Result<LineShape> {
    let step = grid.step(components)?;
    let half = (grid.points / 2) as i64;
    let density = (-half..half)
        .map(|k| {
            let x = k as f64 * step;
            components
                .iter()
                .map(|c| c.weight * (-0.5 * x * x / c.variance).exp() / (2.0 * PI * c.variance).sqrt())
                .sum()
        })
        .collect();
    Ok(LineShape {
        step,
        first_index: -half,
        density,
        maximum: mixture_maximum(components),
        core_variance: effective_core_variance(components),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_TRACKER_LENGTH_SW;

    fn comp(weight: f64, variance: f64) -> Component {
        Component { mask: 0, weight, variance }
    }

    #[test]
    fn single_component_maximum_and_core() {
        let c = [comp(1.0, 2.5)];
        assert!((mixture_maximum(&c) - 1.0 / (2.0 * PI * 2.5).sqrt()).abs() < 1e-15);
        assert!((effective_core_variance(&c) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn two_component_core_variance() {
        // (½·1 + ½·½) / (½·1 + ½·⅛) = 0.75 / 0.5625 = 4/3
        let c = [comp(0.5, 1.0), comp(0.5, 4.0)];
        assert!((effective_core_variance(&c) - 4.0 / 3.0).abs() < 1e-15);
        // cross-check: −1 / (d² ln Π / dx²) at 0 by central differences
        let ln_pi = |x: f64| -> f64 {
            c.iter()
                .map(|k| k.weight * (-0.5 * x * x / k.variance).exp() / (2.0 * PI * k.variance).sqrt())
                .sum::<f64>()
                .ln()
        };
        let h = 1e-3;
        let d2 = (ln_pi(h) - 2.0 * ln_pi(0.0) + ln_pi(-h)) / (h * h);
        assert!((-1.0 / d2 - 4.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn degenerate_mix_single_sequence() {
        let geom = TrackerGeometry::equal_spacing(7, DEFAULT_TRACKER_LENGTH_SW).unwrap();
        let mix = QualityMix::new(0.018, 0.18, 1.0).unwrap();
        let m = MixtureModel::direction(&geom, mix);
        let comps = m.components(Method::Weighted).unwrap();
        let live: Vec<_> = comps.iter().filter(|c| c.weight > 0.0).collect();
        assert_eq!(live.len(), 1);
        let want = 0.018f64.powi(2) / geom.moment(2);
        assert!((live[0].variance / want - 1.0).abs() < 1e-12);
        assert!((mixture_maximum(&comps) - 1.0 / (2.0 * PI * want).sqrt()).abs() / mixture_maximum(&comps) < 1e-12);
    }

    #[test]
    fn three_layer_mixed_sequence_closed_form() {
        let geom = TrackerGeometry::equal_spacing(3, 2.0).unwrap();
        let mix = QualityMix::toy_default();
        let seq = QualitySequence::from_flags(&[false, false, true]);
        let v = component_variance(&seq, &mix, &geom, Method::Weighted, Param::Gamma, Order::Straight).unwrap();
        // I = [[s0, s1], [s1, s2]] with w = (1/b², 1/b², 1/g²), y = (−1, 0, 1)
        let (wb, wg) = (1.0 / 0.18f64.powi(2), 1.0 / 0.018f64.powi(2));
        let (s0, s1, s2) = (2.0 * wb + wg, -wb + wg, wb + wg);
        let want = s0 / (s0 * s2 - s1 * s1);
        assert!((v / want - 1.0).abs() < 1e-12);
        let vs = component_variance(&seq, &mix, &geom, Method::Standard, Param::Gamma, Order::Straight).unwrap();
        // γ̂ = (x₃ − x₁)/2
        assert!((vs / ((0.18f64.powi(2) + 0.018f64.powi(2)) / 4.0) - 1.0).abs() < 1e-12);
        assert!(vs > v);
    }

    #[test]
    fn grid_guards() {
        let c = [comp(0.5, 1.0), comp(0.5, 1e-6)];
        let err = gaussian_lineshape(&c, &GridSpec::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
        let err = gaussian_lineshape(&[comp(1.0, 1.0)], &GridSpec { points: 1000, span_sigmas: 6.0 }).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)));
    }

    #[test]
    fn gaussian_mixture_is_normalised_and_symmetric() {
        let geom = TrackerGeometry::equal_spacing(7, DEFAULT_TRACKER_LENGTH_SW).unwrap();
        let m = MixtureModel::direction(&geom, QualityMix::toy_default());
        for method in Method::BOTH {
            let s = m.gaussian_mixture(method, &GridSpec::default()).unwrap();
            assert!((s.trapezoid_integral() - 1.0).abs() < 1e-6);
            assert!(s.asymmetry() <= 1e-12 * s.maximum);
            assert!(s.density.iter().all(|v| *v >= 0.0));
            assert!((s.density[s.centre_index()] / s.maximum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_maximum_exceeds_standard() {
        let geom = TrackerGeometry::equal_spacing(7, DEFAULT_TRACKER_LENGTH_SW).unwrap();
        let m = MixtureModel::direction(&geom, QualityMix::toy_default());
        let pi0 = mixture_maximum(&m.components(Method::Weighted).unwrap());
        let b0 = mixture_maximum(&m.components(Method::Standard).unwrap());
        assert!(pi0 > b0);
    }

    #[test]
    fn equal_sigmas_give_equal_maxima() {
        let geom = TrackerGeometry::equal_spacing(6, DEFAULT_TRACKER_LENGTH_SW).unwrap();
        let mix = QualityMix::new(0.05, 0.05, 0.3).unwrap();
        let m = MixtureModel::direction(&geom, mix);
        let w = m.components(Method::Weighted).unwrap();
        let s = m.components(Method::Standard).unwrap();
        for (a, b) in w.iter().zip(&s) {
            assert!((a.variance / b.variance - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_maximum_matches_enumeration_for_exact_weights() {
        let comps = [comp(0.25, 1.0), comp(0.75, 4.0)];
        // a "track list" that reproduces the weights exactly
        let tracks = [1.0, 4.0, 4.0, 4.0];
        assert!((mean_maximum_from_tracks(tracks) - mixture_maximum(&comps)).abs() < 1e-15);
    }

    #[test]
    fn core_fit_recovers_gaussian() {
        let v = 0.37;
        let x: Vec<f64> = (-200..=200).map(|k| k as f64 * 0.01).collect();
        let d: Vec<f64> = x.iter().map(|x| (-0.5 * x * x / v).exp() / (2.0 * PI * v).sqrt()).collect();
        let f = core_fit(&x, &d, None, 0.6).unwrap();
        assert!((f.variance / v - 1.0).abs() < 1e-9);
        assert!(f.centre.abs() < 1e-9);
        assert!((f.peak - 1.0 / (2.0 * PI * v).sqrt()).abs() < 1e-9);
        let few = core_fit(&x[..4], &d[..4], None, 0.6);
        assert!(matches!(few, Err(Error::InsufficientData(_))));
    }
}
