//! Covariance identities and variance inequalities checked on ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{draw_track, simulate, true_positions, EnsembleResult, SimulationConfig};
use crate::error::{Error, Result};
use crate::estimators::{info_weighted, LinearEstimator, Method, Param};

/// Below this many tracks a verdict is reported as insufficient.
pub const MIN_TRACKS_FOR_VERDICT: usize = 1000;
/// Largest acceptable |z| for a covariance entry.
pub const COVARIANCE_Z_LIMIT: f64 = 4.0;
/// Tracks per work item of the chunked reductions.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Status {
    Pass,
    Fail,
    EqualityExpected,
    Insufficient,
}

impl Status {
    /// Pass and expected equality both count as success.
    pub fn is_ok(self) -> bool {
        matches!(self, Status::Pass | Status::EqualityExpected)
    }

    /// Combine verdicts: any failure fails, then insufficiency, then pass.
    pub fn combine(statuses: impl IntoIterator<Item = Status>) -> Status {
        let mut all_equal = true;
        let mut worst = Status::Pass;
        for s in statuses {
            match s {
                Status::Fail => return Status::Fail,
                Status::Insufficient => worst = Status::Insufficient,
                Status::Pass => all_equal = false,
                Status::EqualityExpected => {}
            }
        }
        match worst {
            Status::Insufficient => Status::Insufficient,
            _ if all_equal => Status::EqualityExpected,
            _ => Status::Pass,
        }
    }
}

/// One matrix entry: sample mean against its expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntryCheck {
    pub row: usize,
    pub col: usize,
    pub sample: f64,
    pub expected: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub sequence: Vec<bool>,
    pub n_tracks: usize,
    /// `E[U Uᵀ]` against `I`.
    pub score_moments: Vec<EntryCheck>,
    /// `E[(T_std − θ)(T_wtd − θ)ᵀ]` against `I⁻¹`.
    pub cross_covariance: Vec<EntryCheck>,
    /// Largest per-track difference between the two fits.
    pub max_fit_difference: f64,
    pub max_abs_z: f64,
    pub status: Status,
}

/// Running sums of `v` and `v²` for the upper triangle of two 3×3 outer
/// products, merged in chunk order.
#[derive(Clone, Copy, Default)]
struct Moments {
    score: [[(f64, f64); 3]; 3],
    cross: [[(f64, f64); 3]; 3],
    max_diff: f64,
}

impl Moments {
    fn merge(mut self, o: &Moments) -> Moments {
        for a in 0..3 {
            for b in 0..3 {
                self.score[a][b].0 += o.score[a][b].0;
                self.score[a][b].1 += o.score[a][b].1;
                self.cross[a][b].0 += o.cross[a][b].0;
                self.cross[a][b].1 += o.cross[a][b].1;
            }
        }
        self.max_diff = self.max_diff.max(o.max_diff);
        self
    }
}

fn entry(row: usize, col: usize, (s, s2): (f64, f64), n: usize, expected: f64) -> EntryCheck {
    let nf = n as f64;
    let sample = s / nf;
    let var = (s2 / nf - sample * sample).max(0.0) * nf / (nf - 1.0).max(1.0);
    let std_error = (var / nf).sqrt();
    let diff = sample - expected;
    let z = if std_error > 0.0 {
        diff / std_error
    } else if diff.abs() <= 1e-12 * expected.abs().max(f64::MIN_POSITIVE) {
        0.0
    } else {
        f64::INFINITY
    };
    EntryCheck { row, col, sample, expected, std_error, z }
}

/// Compare the sample moments of the Gaussian score vector
/// `U_a = Σ_j (x_j − μ_j) y_j^a / σ_j²` with `I`, and the cross-covariance
/// of the two fits with `I⁻¹`, for one fixed quality sequence.
pub fn covariance_check(config: &SimulationConfig) -> Result<CovarianceReport> {
    config.validate()?;
    let sequence = config
        .fixed_sequence
        .clone()
        .ok_or_else(|| Error::invalid("fixed_sequence", "the covariance check needs one fixed quality sequence"))?;
    let geom = &config.geom;
    let order = config.order;
    let k = order.n_params();
    let truth = true_positions(config);
    let theta = [config.true_params.beta, config.true_params.gamma, config.true_params.eta.unwrap_or(0.0)];
    let sigmas: Vec<f64> = sequence.iter().map(|g| config.mix.sigma(*g)).collect();
    let info = info_weighted(geom, &sigmas, order)?;
    let standard = LinearEstimator::new(Method::Standard, geom, None, order)?;
    let weighted = LinearEstimator::new(Method::Weighted, geom, Some(&sigmas), order)?;
    let y = geom.positions();

    let n = config.n_tracks;
    let partials: Vec<Moments> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let t = draw_track(config, &truth, i);
                let mut u = [0.0; 3];
                for j in 0..y.len() {
                    let r = (t.x[j] - truth[j]) / (t.sigmas[j] * t.sigmas[j]);
                    let mut p = r;
                    for ua in u.iter_mut().take(k) {
                        *ua += p;
                        p *= y[j];
                    }
                }
                let s = standard.estimate(&t.x);
                let w = weighted.estimate(&t.x);
                let ds: Vec<f64> = order.params().iter().map(|p| s.get(*p) - theta[p.index()]).collect();
                let dw: Vec<f64> = order.params().iter().map(|p| w.get(*p) - theta[p.index()]).collect();
                for a in 0..k {
                    m.max_diff = m.max_diff.max((ds[a] - dw[a]).abs());
                    for b in 0..k {
                        let v = u[a] * u[b];
                        m.score[a][b].0 += v;
                        m.score[a][b].1 += v * v;
                        let v = ds[a] * dw[b];
                        m.cross[a][b].0 += v;
                        m.cross[a][b].1 += v * v;
                    }
                }
            }
            m
        })
        .collect();
    let total = partials.iter().fold(Moments::default(), |acc, m| acc.merge(m));

    let mut score_moments = Vec::new();
    let mut cross_covariance = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if b >= a {
                score_moments.push(entry(a, b, total.score[a][b], n, info.matrix.get(a, b)));
            }
            // the cross-covariance is not symmetric sample-wise
            cross_covariance.push(entry(a, b, total.cross[a][b], n, info.inverse.get(a, b)));
        }
    }
    let max_abs_z = score_moments.iter().chain(&cross_covariance).map(|e| e.z.abs()).fold(0.0, f64::max);
    let status = if n < MIN_TRACKS_FOR_VERDICT {
        Status::Insufficient
    } else if max_abs_z < COVARIANCE_Z_LIMIT {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(CovarianceReport {
        sequence,
        n_tracks: n,
        score_moments,
        cross_covariance,
        max_fit_difference: total.max_diff,
        max_abs_z,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityOptions {
    pub resamples: usize,
    /// Two-sided confidence level of the bootstrap interval.
    pub confidence: f64,
}

impl Default for InequalityOptions {
    fn default() -> Self {
        Self { resamples: 200, confidence: 0.99 }
    }
}

/// `var(standard) / var(weighted)` for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRatio {
    pub param: Param,
    pub var_standard: f64,
    pub var_weighted: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub n_tracks: usize,
    pub resamples: usize,
    pub confidence: f64,
    pub ratios: Vec<ParamRatio>,
    pub status: Status,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] * (1.0 - f) + next * f,
        None => sorted[i],
    }
}

/// Per-parameter variances of both fits over the tracks `idx`.
fn resample_variances(ens: &EnsembleResult, idx: &[usize], k: usize) -> [[f64; 3]; 2] {
    let mut out = [[0.0; 3]; 2];
    for (m, method) in Method::BOTH.iter().enumerate() {
        let rows = ens.rows(*method);
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for &i in idx {
            for a in 0..k {
                sum[a] += rows[i][a];
                sq[a] += rows[i][a] * rows[i][a];
            }
        }
        let n = idx.len() as f64;
        for a in 0..k {
            let mean = sum[a] / n;
            out[m][a] = (sq[a] / n - mean * mean) * n / (n - 1.0);
        }
    }
    out
}

/// Variance ratios with percentile-bootstrap intervals. The resamples use
/// their own streams of the configured seed, disjoint from the track streams.
pub fn inequalities_from_ensemble(
    config: &SimulationConfig,
    ens: &EnsembleResult,
    opts: &InequalityOptions,
) -> Result<InequalityReport> {
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Error::invalid("confidence", format!("must lie in (0, 1), got {}", opts.confidence)));
    }
    let n = ens.len();
    let k = ens.order.n_params();
    let equality = config.is_homoscedastic() || ens.n_layers == k;
    let insufficient = n < MIN_TRACKS_FOR_VERDICT || opts.resamples < 2;

    let boot: Vec<[[f64; 3]; 2]> = if equality || insufficient {
        Vec::new()
    } else {
        (0..opts.resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(u64::MAX - b as u64);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                resample_variances(ens, &idx, k)
            })
            .collect()
    };
    let tail = 0.5 * (1.0 - opts.confidence);
    let ratios: Vec<ParamRatio> = ens
        .order
        .params()
        .iter()
        .map(|&param| {
            let var_standard = ens.stat(Method::Standard, param).map_or(f64::NAN, |s| s.variance);
            let var_weighted = ens.stat(Method::Weighted, param).map_or(f64::NAN, |s| s.variance);
            let ratio = var_standard / var_weighted;
            let (ci_low, ci_high, status) = if equality {
                (ratio, ratio, Status::EqualityExpected)
            } else if insufficient {
                (f64::NAN, f64::NAN, Status::Insufficient)
            } else {
                let a = param.index();
                let mut r: Vec<f64> = boot.iter().map(|v| v[0][a] / v[1][a]).collect();
                r.sort_by(f64::total_cmp);
                let (lo, hi) = (quantile(&r, tail), quantile(&r, 1.0 - tail));
                (lo, hi, if lo > 1.0 { Status::Pass } else { Status::Fail })
            };
            ParamRatio { param, var_standard, var_weighted, ratio, ci_low, ci_high, status }
        })
        .collect();
    let status = Status::combine(ratios.iter().map(|r| r.status));
    Ok(InequalityReport { n_tracks: n, resamples: opts.resamples, confidence: opts.confidence, ratios, status })
}

/// Simulate `config` and test `var(standard) > var(weighted)` per parameter.
pub fn verify_inequalities(config: &SimulationConfig, opts: &InequalityOptions) -> Result<InequalityReport> {
    let ens = simulate(config)?;
    inequalities_from_ensemble(config, &ens, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Order;
    use crate::hit_models::HitKind;
    use crate::lineshape::QualityMix;

    fn config(n: usize, tracks: usize) -> SimulationConfig {
        let mut c = SimulationConfig::toy(n).unwrap();
        c.n_tracks = tracks;
        c.seed = 11;
        c
    }

    #[test]
    fn status_combination() {
        use Status::*;
        assert_eq!(Status::combine([Pass, EqualityExpected]), Pass);
        assert_eq!(Status::combine([EqualityExpected, EqualityExpected]), EqualityExpected);
        assert_eq!(Status::combine([Pass, Insufficient]), Insufficient);
        assert_eq!(Status::combine([Insufficient, Fail]), Fail);
        assert_eq!(serde_json::to_string(&EqualityExpected).unwrap(), "\"EQUALITY-EXPECTED\"");
    }

    #[test]
    fn covariance_identities_gaussian() {
        let mut c = config(5, 100_000);
        c.hit_kind = HitKind::Gaussian;
        c.fixed_sequence = Some(vec![false, true, false, false, true]);
        let r = covariance_check(&c).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
        assert_eq!(r.score_moments.len(), 3);
        assert_eq!(r.cross_covariance.len(), 4);
    }

    #[test]
    fn homoscedastic_cross_covariance_is_the_variance() {
        let mut c = config(4, 5000);
        c.fixed_sequence = Some(vec![true; 4]);
        let r = covariance_check(&c).unwrap();
        assert!(r.max_fit_difference < 1e-12);
    }

    #[test]
    fn covariance_check_needs_a_sequence() {
        assert!(covariance_check(&config(4, 100)).is_err());
    }

    #[test]
    fn strict_inequality_at_seven_layers() {
        let r = verify_inequalities(&config(7, 20_000), &InequalityOptions::default()).unwrap();
        assert_eq!(r.status, Status::Pass, "{r:?}");
        for p in &r.ratios {
            assert!(p.ci_low <= p.ratio && p.ratio <= p.ci_high);
        }
    }

    #[test]
    fn degenerate_cases_expect_equality() {
        let r = verify_inequalities(&config(2, 5000), &InequalityOptions::default()).unwrap();
        assert_eq!(r.status, Status::EqualityExpected);
        for p in &r.ratios {
            assert!((p.ratio - 1.0).abs() < 1e-9);
        }
        let r = verify_inequalities(&config(3, 5000).with_order(Order::Parabolic), &InequalityOptions::default())
            .unwrap();
        assert_eq!(r.status, Status::EqualityExpected);
        let mut c = config(6, 5000);
        c.mix = QualityMix::new(0.05, 0.05, 0.2).unwrap();
        assert_eq!(verify_inequalities(&c, &InequalityOptions::default()).unwrap().status, Status::EqualityExpected);
    }

    #[test]
    fn small_samples_are_insufficient() {
        let r = verify_inequalities(&config(7, 100), &InequalityOptions::default()).unwrap();
        assert_eq!(r.status, Status::Insufficient);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let c = config(5, 3000);
        let a = verify_inequalities(&c, &InequalityOptions::default()).unwrap();
        let b = verify_inequalities(&c, &InequalityOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
