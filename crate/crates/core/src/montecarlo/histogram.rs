//! Empirical densities of the fitted parameters and their peak heights.

use serde::Serialize;

use super::EnsembleResult;
use crate::error::{Error, Result};
use crate::estimators::{Method, Param};
use crate::lineshape::{core_fit, quadratic_fit, CoreFit, DEFAULT_CORE_FRACTION};

/// Default number of bins across the central 99.9% of the sample.
pub const DEFAULT_BINS: usize = 200;
const CENTRAL_FRACTION: f64 = 0.999;
/// Bins on each side of the smoothed maximum used by the peak fit.
const PEAK_HALF_WINDOW: usize = 4;

/// Binning choice. Missing values fall back to the central 99.9% of the
/// sample and `DEFAULT_BINS` bins across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinSpec {
    pub bin_width: Option<f64>,
    pub range: Option<(f64, f64)>,
    pub bins: usize,
    pub core_fraction: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self { bin_width: None, range: None, bins: DEFAULT_BINS, core_fraction: DEFAULT_CORE_FRACTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// Left edge of the first bin.
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Sample size, including values outside the binned range.
    pub total: usize,
}

impl Histogram {
    /// Count `values` into `n_bins` bins of width `bin_width` starting at `lo`.
    pub fn with_edges<'a>(values: impl IntoIterator<Item = &'a f64>, lo: f64, bin_width: f64, n_bins: usize) -> Self {
        let mut counts = vec![0u64; n_bins];
        let mut total = 0;
        for v in values {
            total += 1;
            let k = ((v - lo) / bin_width).floor();
            if k >= 0.0 && k < n_bins as f64 {
                counts[k as usize] += 1;
            }
        }
        Self { lo, bin_width, counts, total }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.bin_width
    }

    pub fn centres(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|i| self.lo + (i as f64 + 0.5) * self.bin_width).collect()
    }

    /// `counts / (total · bin_width)`; all zero for an empty sample.
    pub fn density(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.n_bins()];
        }
        let norm = self.total as f64 * self.bin_width;
        self.counts.iter().map(|c| *c as f64 / norm).collect()
    }
}

/// Peak height and location of a histogram by three estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEstimate {
    /// Highest bin density and its centre.
    pub max_bin: f64,
    pub max_bin_location: f64,
    /// Parabola through the highest bin and its two neighbours.
    pub refined: f64,
    pub refined_location: f64,
    /// Least-squares parabola over nine bins around the maximum of the
    /// three-bin moving average, read at its vertex (or at the window
    /// centre when the top is flat); less sensitive to a single high bin.
    pub fitted: f64,
    pub fitted_location: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPdf {
    pub histogram: Histogram,
    pub peak: PeakEstimate,
    /// Log-density parabola over the bins above the core fraction of the peak.
    pub core: Option<CoreFit>,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Bin edges for `values` under `spec`: `(lo, bin_width, n_bins)`. Without an
/// explicit range the bin centres sit on multiples of the bin width.
pub(crate) fn bin_layout(values: &[f64], spec: &BinSpec) -> Result<(f64, f64, usize)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("estimates", "contain non-finite values"));
    }
    if spec.bins == 0 {
        return Err(Error::invalid("bins", "must be positive"));
    }
    if let Some(w) = spec.bin_width {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::invalid("bin_width", format!("must be positive, got {w}")));
        }
    }
    if let Some((lo, hi)) = spec.range {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid("range", format!("need lo < hi, got ({lo}, {hi})")));
        }
        let w = spec.bin_width.unwrap_or((hi - lo) / spec.bins as f64);
        let n = ((hi - lo) / w - 1e-9).ceil().max(1.0) as usize;
        return Ok((lo, w, n));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - CENTRAL_FRACTION);
    let (qlo, qhi) = (quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail));
    let w = match spec.bin_width {
        Some(w) => w,
        None if qhi > qlo => (qhi - qlo) / spec.bins as f64,
        None => return Err(Error::InsufficientData("sample has no spread; give a bin width".into())),
    };
    let (klo, khi) = ((qlo / w).round(), (qhi / w).round());
    Ok(((klo - 0.5) * w, w, (khi - klo) as usize + 1))
}

fn peak_estimate(h: &Histogram) -> PeakEstimate {
    let d = h.density();
    let c = h.centres();
    let n = d.len();
    let imax = (0..n).fold(0, |b, i| if h.counts[i] > h.counts[b] { i } else { b });
    let (mut refined, mut refined_location) = (d[imax], c[imax]);
    if imax > 0 && imax + 1 < n {
        let (l, m, r) = (d[imax - 1], d[imax], d[imax + 1]);
        let curv = l - 2.0 * m + r;
        if curv < 0.0 {
            let delta = 0.5 * (l - r) / curv;
            refined = m - 0.25 * (l - r) * delta;
            refined_location = c[imax] + delta * h.bin_width;
        }
    }
    let (mut fitted, mut fitted_location) = (refined, refined_location);
    if n > 2 * PEAK_HALF_WINDOW {
        let smooth = |i: usize| d[i.saturating_sub(1)..(i + 2).min(n)].iter().sum::<f64>();
        let j = (0..n).fold(0, |b, i| if smooth(i) > smooth(b) { i } else { b });
        let j = j.clamp(PEAK_HALF_WINDOW, n - 1 - PEAK_HALF_WINDOW);
        let u: Vec<f64> = (0..2 * PEAK_HALF_WINDOW + 1).map(|k| k as f64 - PEAK_HALF_WINDOW as f64).collect();
        let v = &d[j - PEAK_HALF_WINDOW..=j + PEAK_HALF_WINDOW];
        if let Ok([c0, c1, c2]) = quadratic_fit(&u, v, &vec![1.0; u.len()]) {
            let vertex = -c1 / (2.0 * c2);
            if c2 < 0.0 && vertex.abs() <= PEAK_HALF_WINDOW as f64 {
                fitted = c0 + c1 * vertex + c2 * vertex * vertex;
                fitted_location = c[j] + vertex * h.bin_width;
            } else {
                // flat top: the smoothed value at the window centre
                fitted = c0;
                fitted_location = c[j];
            }
        }
    }
    PeakEstimate { max_bin: d[imax], max_bin_location: c[imax], refined, refined_location, fitted, fitted_location }
}

/// Density-normalised histogram of `estimates` with its peak and core fit.
pub fn histogram(estimates: &[f64], spec: &BinSpec) -> Result<EmpiricalPdf> {
    let (lo, w, n) = bin_layout(estimates, spec)?;
    let histogram = Histogram::with_edges(estimates, lo, w, n);
    Ok(analyse(histogram, spec.core_fraction))
}

fn analyse(histogram: Histogram, core_fraction: f64) -> EmpiricalPdf {
    let peak = peak_estimate(&histogram);
    let counts: Vec<f64> = histogram.counts.iter().map(|c| *c as f64).collect();
    let core = core_fit(&histogram.centres(), &histogram.density(), Some(&counts), core_fraction).ok();
    EmpiricalPdf { histogram, peak, core }
}

/// Tracks split by the number of good hits, binned like the full sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualitySplit {
    pub method: Method,
    pub param: Param,
    pub threshold: usize,
    /// Share of tracks with at least `threshold` good hits.
    pub fraction_at_least: f64,
    pub full: Histogram,
    pub at_least: Histogram,
    pub below: Histogram,
}

impl QualitySplit {
    /// `fraction · density` of each subset; together they add up to the
    /// full density.
    pub fn scaled_densities(&self) -> (Vec<f64>, Vec<f64>) {
        let f = self.fraction_at_least;
        let a = self.at_least.density().iter().map(|v| f * v).collect();
        let b = self.below.density().iter().map(|v| (1.0 - f) * v).collect();
        (a, b)
    }
}

/// Split the estimates of `param` by good-hit count.
pub fn decompose_by_quality(
    ensemble: &EnsembleResult,
    method: Method,
    param: Param,
    threshold: usize,
    spec: &BinSpec,
) -> Result<QualitySplit> {
    let values = ensemble.estimates(method, param);
    let (lo, w, n) = bin_layout(&values, spec)?;
    let good = ensemble.good_counts();
    let (hi_set, lo_set): (Vec<_>, Vec<_>) = values.iter().zip(&good).partition(|(_, g)| **g >= threshold);
    let at_least = Histogram::with_edges(hi_set.iter().map(|(v, _)| *v), lo, w, n);
    let below = Histogram::with_edges(lo_set.iter().map(|(v, _)| *v), lo, w, n);
    Ok(QualitySplit {
        method,
        param,
        threshold,
        fraction_at_least: at_least.total as f64 / values.len() as f64,
        full: Histogram::with_edges(&values, lo, w, n),
        at_least,
        below,
    })
}
