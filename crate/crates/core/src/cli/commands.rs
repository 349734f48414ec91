//! The four experiment drivers behind the subcommands.

use std::io;

use serde::Serialize;

use super::config::RunConfig;
use super::output::{csv_bytes, histogram_csv, num, quality_split_csv, OutputDir};
use crate::error::{Error, Result};
use crate::estimators::{LinearEstimator, Method, Order, Param};
use crate::hit_models::HitKind;
use crate::lineshape::{
    effective_core_variance, mixture_maximum, mixture_variance, GridSpec, MixtureModel, StandardVariance,
    MAX_ENUMERATED_LAYERS,
};
use crate::montecarlo::{
    covariance_check, decompose_by_quality, histogram, inequalities_from_ensemble, simulate, CovarianceReport,
    EmpiricalPdf, EnsembleResult, EstimatorStats, InequalityReport, PeakEstimate, SimulationConfig, Status,
};

/// Exact convolved line-shapes are skipped above this many layers.
pub const EXACT_MAX_LAYERS: usize = 14;

/// Failure of a driver: bad input, or a write error.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
}

/// Mixture predictions for the direction estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Analytic {
    pub pi0: f64,
    pub b0: f64,
    /// `B(0)` with each standard-fit variance taken as `(R⁻¹)_γγ` times the
    /// track's mean hit variance.
    pub b0_mean_hit_variance: f64,
    pub sigma_eff_weighted: f64,
    pub sigma_eff_standard: f64,
    pub var_mixture_weighted: f64,
    pub var_mixture_standard: f64,
    /// Centre of the exactly convolved line-shape for the configured hit kind.
    pub exact_peak_weighted: Option<f64>,
    pub exact_peak_standard: Option<f64>,
}

pub fn analytic(sim: &SimulationConfig, grid_points: usize, exact: bool) -> Result<Option<Analytic>> {
    if sim.geom.n_layers() > MAX_ENUMERATED_LAYERS {
        return Ok(None);
    }
    let model = MixtureModel { geom: &sim.geom, mix: sim.mix, order: sim.order, param: Param::Gamma };
    let w = model.components(Method::Weighted)?;
    let s = model.components(Method::Standard)?;
    let s_mean = model.components_with(Method::Standard, StandardVariance::MeanHitVariance)?;
    let grid = GridSpec { points: grid_points, ..GridSpec::default() };
    let exact_peak = |method| -> Result<Option<f64>> {
        if !exact || sim.geom.n_layers() > EXACT_MAX_LAYERS {
            return Ok(None);
        }
        match model.exact_lineshape(method, sim.hit_kind, &grid) {
            Ok(shape) => Ok(Some(shape.maximum)),
            Err(Error::InvalidGrid(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    Ok(Some(Analytic {
        pi0: mixture_maximum(&w),
        b0: mixture_maximum(&s),
        b0_mean_hit_variance: mixture_maximum(&s_mean),
        sigma_eff_weighted: effective_core_variance(&w),
        sigma_eff_standard: effective_core_variance(&s),
        var_mixture_weighted: mixture_variance(&w),
        var_mixture_standard: mixture_variance(&s),
        exact_peak_weighted: exact_peak(Method::Weighted)?,
        exact_peak_standard: exact_peak(Method::Standard)?,
    }))
}

/// The three ways of quoting how much better the weighted fit resolves γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gains {
    /// `√(var_std / var_wtd)` of the simulated estimates.
    pub sqrt_variance_ratio: f64,
    /// `Π(0) / B(0)`.
    pub maxima_ratio: Option<f64>,
    /// `√(Σ_eff,std / Σ_eff,wtd)`.
    pub sqrt_core_variance_ratio: Option<f64>,
}

impl Gains {
    pub fn new(ens: &EnsembleResult, a: Option<&Analytic>) -> Self {
        let var = |m| ens.stat(m, Param::Gamma).map_or(f64::NAN, |s: &EstimatorStats| s.variance);
        Self {
            sqrt_variance_ratio: (var(Method::Standard) / var(Method::Weighted)).sqrt(),
            maxima_ratio: a.map(|a| a.pi0 / a.b0),
            sqrt_core_variance_ratio: a.map(|a| (a.sigma_eff_standard / a.sigma_eff_weighted).sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfSummary {
    pub bin_width: f64,
    pub n_bins: usize,
    pub peak: PeakEstimate,
    /// Log-parabola core fit; `null` when too few bins clear the cut.
    pub core_variance: Option<f64>,
    pub core_bins: Option<usize>,
}

impl PdfSummary {
    fn new(pdf: &EmpiricalPdf) -> Self {
        Self {
            bin_width: pdf.histogram.bin_width,
            n_bins: pdf.histogram.n_bins(),
            peak: pdf.peak,
            core_variance: pdf.core.map(|c| c.variance),
            core_bins: pdf.core.map(|c| c.bins),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodPair<T> {
    pub standard: T,
    pub weighted: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSummary {
    pub threshold: usize,
    pub fraction_at_least: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub n_layers: usize,
    pub n_tracks: usize,
    pub hit_kind: HitKind,
    pub order: Order,
    pub seed: u64,
    /// Parameter whose distributions are histogrammed.
    pub param: Param,
    pub estimators: Vec<EstimatorStats>,
    pub histograms: MethodPair<PdfSummary>,
    pub analytic: Option<Analytic>,
    pub gains: Gains,
    pub quality_split: SplitSummary,
    pub inequalities: InequalityReport,
    pub status: Status,
}

fn histograms(ens: &EnsembleResult, cfg: &RunConfig) -> Result<MethodPair<EmpiricalPdf>> {
    let spec = cfg.bin_spec();
    Ok(MethodPair {
        standard: histogram(&ens.estimates(Method::Standard, Param::Gamma), &spec)?,
        weighted: histogram(&ens.estimates(Method::Weighted, Param::Gamma), &spec)?,
    })
}

pub fn run_simulate(cfg: &RunConfig, out: &mut OutputDir) -> std::result::Result<SimulateSummary, RunError> {
    cfg.validate()?;
    let sim = cfg.simulation(None)?;
    let ens = simulate(&sim)?;
    let pdfs = histograms(&ens, cfg)?;
    out.write("histogram_standard.csv", &histogram_csv(&pdfs.standard.histogram)?)?;
    out.write("histogram_weighted.csv", &histogram_csv(&pdfs.weighted.histogram)?)?;
    let split = decompose_by_quality(&ens, Method::Weighted, Param::Gamma, cfg.quality_threshold, &cfg.bin_spec())?;
    out.write("quality_split.csv", &quality_split_csv(&split)?)?;

    let analytic = analytic(&sim, cfg.grid_points, true)?;
    let inequalities = inequalities_from_ensemble(&sim, &ens, &cfg.inequality_options())?;
    let summary = SimulateSummary {
        n_layers: sim.geom.n_layers(),
        n_tracks: sim.n_tracks,
        hit_kind: sim.hit_kind,
        order: sim.order,
        seed: sim.seed,
        param: Param::Gamma,
        estimators: ens.stats.clone(),
        histograms: MethodPair { standard: PdfSummary::new(&pdfs.standard), weighted: PdfSummary::new(&pdfs.weighted) },
        gains: Gains::new(&ens, analytic.as_ref()),
        analytic,
        quality_split: SplitSummary { threshold: split.threshold, fraction_at_least: split.fraction_at_least },
        status: inequalities.status,
        inequalities,
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub peak_standard: f64,
    pub peak_weighted: f64,
    pub pi0_analytic: f64,
    pub b0_analytic: f64,
    pub var_standard: f64,
    pub var_weighted: f64,
    pub sigma_eff_weighted: f64,
    pub sigma_eff_standard: f64,
}

/// Least-squares slopes of `ln(value)` against `ln N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slopes {
    pub n_min: usize,
    pub n_max: usize,
    pub peak_standard: f64,
    pub peak_weighted: f64,
    pub pi0_analytic: f64,
    pub b0_analytic: f64,
    pub var_standard: f64,
    pub var_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub hit_kind: HitKind,
    pub order: Order,
    pub n_tracks: usize,
    pub seed: u64,
    /// Which histogram peak estimate fills the peak columns.
    pub peak_estimator: &'static str,
    pub rows: Vec<SweepRow>,
    pub slopes: Option<Slopes>,
}

pub fn loglog_slope(n: &[f64], v: &[f64]) -> Result<f64> {
    let ln_n: Vec<f64> = n.iter().map(|x| x.ln()).collect();
    let ln_v: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let fit = LinearEstimator::from_positions(Method::Standard, &ln_n, None, Order::Straight)?;
    Ok(fit.estimate(&ln_v).gamma)
}

fn slopes(rows: &[SweepRow], n_min: usize) -> Result<Option<Slopes>> {
    let used: Vec<&SweepRow> = rows.iter().filter(|r| r.n >= n_min).collect();
    if used.len() < 2 {
        return Ok(None);
    }
    let n: Vec<f64> = used.iter().map(|r| r.n as f64).collect();
    let s = |f: fn(&SweepRow) -> f64| loglog_slope(&n, &used.iter().map(|r| f(r)).collect::<Vec<_>>());
    Ok(Some(Slopes {
        n_min: used[0].n,
        n_max: used[used.len() - 1].n,
        peak_standard: s(|r| r.peak_standard)?,
        peak_weighted: s(|r| r.peak_weighted)?,
        pi0_analytic: s(|r| r.pi0_analytic)?,
        b0_analytic: s(|r| r.b0_analytic)?,
        var_standard: s(|r| r.var_standard)?,
        var_weighted: s(|r| r.var_weighted)?,
    }))
}

pub fn run_sweep(cfg: &RunConfig, out: &mut OutputDir) -> std::result::Result<SweepSummary, RunError> {
    cfg.validate_sweep()?;
    let mut rows = Vec::new();
    for n in cfg.sweep_n_min..=cfg.sweep_n_max {
        let sim = cfg.simulation(Some(n))?;
        let ens = simulate(&sim)?;
        let pdfs = histograms(&ens, cfg)?;
        out.write(&format!("histogram_standard_N{n:02}.csv"), &histogram_csv(&pdfs.standard.histogram)?)?;
        out.write(&format!("histogram_weighted_N{n:02}.csv"), &histogram_csv(&pdfs.weighted.histogram)?)?;
        let a = analytic(&sim, cfg.grid_points, false)?.expect("sweep stays within the enumeration limit");
        let var = |m| ens.stat(m, Param::Gamma).map_or(f64::NAN, |s| s.variance);
        rows.push(SweepRow {
            n,
            peak_standard: pdfs.standard.peak.fitted,
            peak_weighted: pdfs.weighted.peak.fitted,
            pi0_analytic: a.pi0,
            b0_analytic: a.b0,
            var_standard: var(Method::Standard),
            var_weighted: var(Method::Weighted),
            sigma_eff_weighted: a.sigma_eff_weighted,
            sigma_eff_standard: a.sigma_eff_standard,
        });
    }
    let table = csv_bytes(
        &[
            "N",
            "peak_standard",
            "peak_weighted",
            "pi0_analytic",
            "b0_analytic",
            "var_standard",
            "var_weighted",
            "sigma_eff_weighted",
            "sigma_eff_standard",
        ],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                num(r.peak_standard),
                num(r.peak_weighted),
                num(r.pi0_analytic),
                num(r.b0_analytic),
                num(r.var_standard),
                num(r.var_weighted),
                num(r.sigma_eff_weighted),
                num(r.sigma_eff_standard),
            ]
        }),
    )?;
    out.write("sweep.csv", &table)?;
    let summary = SweepSummary {
        hit_kind: cfg.hit_kind,
        order: cfg.order,
        n_tracks: cfg.n_tracks,
        seed: cfg.seed,
        peak_estimator: "fitted",
        slopes: slopes(&rows, cfg.slope_n_min)?,
        rows,
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub n_layers: usize,
    pub order: Order,
    pub hit_kind: HitKind,
    pub covariance: CovarianceReport,
    pub inequalities: InequalityReport,
    pub status: Status,
}

pub fn run_verify(cfg: &RunConfig, out: &mut OutputDir) -> std::result::Result<VerifyReport, RunError> {
    cfg.validate()?;
    let sim = cfg.simulation(None)?;
    let mut cov = sim.clone();
    cov.n_tracks = cfg.covariance_tracks;
    cov.fixed_sequence = Some(cfg.covariance_sequence(sim.geom.n_layers()));
    let covariance = covariance_check(&cov)?;
    let ens = simulate(&sim)?;
    let inequalities = inequalities_from_ensemble(&sim, &ens, &cfg.inequality_options())?;
    // the identities hold in every configuration; equality is a property of the inequalities
    let status = match (covariance.status, inequalities.status) {
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        (Status::Pass, s) => s,
        _ => Status::Insufficient,
    };
    let report = VerifyReport {
        n_layers: sim.geom.n_layers(),
        order: sim.order,
        hit_kind: sim.hit_kind,
        covariance,
        inequalities,
        status,
    };
    out.write_json("report.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineshapeSummary {
    pub n_layers: usize,
    pub hit_kind: HitKind,
    pub order: Order,
    pub param: Param,
    pub grid_points: usize,
    pub step: MethodPair<f64>,
    pub analytic: Analytic,
    /// Log-parabola fit over the core of the Gaussian mixture.
    pub core_fit_weighted: Option<f64>,
    pub core_fit_standard: Option<f64>,
}

pub fn run_lineshape(cfg: &RunConfig, out: &mut OutputDir) -> std::result::Result<LineshapeSummary, RunError> {
    cfg.validate()?;
    let sim = cfg.simulation(None)?;
    let n = sim.geom.n_layers();
    if n > MAX_ENUMERATED_LAYERS {
        return Err(Error::TooManyLayers { n_layers: n, max: MAX_ENUMERATED_LAYERS }.into());
    }
    let model = MixtureModel { geom: &sim.geom, mix: sim.mix, order: sim.order, param: Param::Gamma };
    let grid = GridSpec { points: cfg.grid_points, ..GridSpec::default() };
    let mut step = MethodPair { standard: 0.0, weighted: 0.0 };
    let mut core = MethodPair { standard: None, weighted: None };
    for method in Method::BOTH {
        let gauss = model.gaussian_mixture(method, &grid)?;
        let exact = model.exact_lineshape(method, sim.hit_kind, &grid)?;
        let x = gauss.axis();
        let table = csv_bytes(
            &["x", "gaussian_mixture", "exact"],
            (0..x.len()).map(|i| vec![num(x[i]), num(gauss.density[i]), num(exact.density[i])]),
        )?;
        out.write(&format!("lineshape_{method}.csv"), &table)?;
        let ev = model.effective_variance(method, &grid, cfg.core_fraction)?;
        match method {
            Method::Standard => (step.standard, core.standard) = (gauss.step, ev.empirical),
            Method::Weighted => (step.weighted, core.weighted) = (gauss.step, ev.empirical),
        }
    }
    let analytic = analytic(&sim, cfg.grid_points, true)?.expect("checked against the enumeration limit");
    let summary = LineshapeSummary {
        n_layers: n,
        hit_kind: sim.hit_kind,
        order: sim.order,
        param: Param::Gamma,
        grid_points: cfg.grid_points,
        step,
        analytic,
        core_fit_weighted: core.weighted,
        core_fit_standard: core.standard,
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}
