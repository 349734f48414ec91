//! Exact per-sequence line-shapes by discrete convolution.
//!
//! Each scaled hit density `c_j·ε_j` is reduced to point masses on the
//! lattice `m·dx`, the kernels are convolved with zero-padded FFTs (the
//! padded length is twice the lattice, so no mass wraps into the kept
//! window), and the per-sequence densities are summed with their
//! binomial weights in a fixed chunk order.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{MixtureModel, QualitySequence};
use crate::error::Result;
use crate::estimators::{LinearEstimator, Method};
use crate::hit_models::{HitKind, HitModel};

/// Sequences summed sequentially inside one parallel work item.
const CHUNK: usize = 32;
/// Gaussian kernels are truncated at this many standard deviations.
const GAUSS_REACH: f64 = 9.0;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

/// Lattice masses of one scaled hit density, indexed by offset `m`,
/// `m = −reach…reach`, normalised to unit total mass.
fn kernel_masses(kind: HitKind, scale: f64, step: f64, max_reach: usize) -> (usize, Vec<f64>) {
    // narrower than a thousandth of a cell: a point mass
    if scale < 1e-3 * step {
        return (0, vec![1.0]);
    }
    let model = HitModel::new(kind, scale).expect("positive scale");
    let support = model.support_half_width().unwrap_or(GAUSS_REACH * scale);
    let reach = ((support / step).ceil() as usize + 1).min(max_reach);
    let sample_points = kind == HitKind::Gaussian && scale >= step;
    let mut masses: Vec<f64> = (0..=2 * reach)
        .map(|i| {
            let x = (i as f64 - reach as f64) * step;
            if sample_points {
                model.density(x) * step
            } else {
                model.cdf(x + 0.5 * step) - model.cdf(x - 0.5 * step)
            }
        })
        .collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    (reach, masses)
}

fn sequence_density(
    coeffs: &[f64],
    sigmas: &[f64],
    kind: HitKind,
    points: usize,
    step: f64,
    plans: &Plans,
    spectrum: &mut [Complex<f64>],
    buffer: &mut [Complex<f64>],
    out: &mut [f64],
    weight: f64,
) {
    let len = plans.len;
    spectrum.iter_mut().for_each(|v| *v = Complex::new(1.0, 0.0));
    for (c, s) in coeffs.iter().zip(sigmas) {
        let (reach, masses) = kernel_masses(kind, c.abs() * s, step, points / 2);
        if reach == 0 {
            continue;
        }
        buffer.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        for (i, m) in masses.iter().enumerate() {
            let offset = i as isize - reach as isize;
            let idx = offset.rem_euclid(len as isize) as usize;
            buffer[idx] = Complex::new(*m, 0.0);
        }
        plans.forward.process(buffer);
        for (a, b) in spectrum.iter_mut().zip(buffer.iter()) {
            *a *= *b;
        }
    }
    buffer.copy_from_slice(spectrum);
    plans.inverse.process(buffer);
    let norm = 1.0 / len as f64;
    let half = (points / 2) as isize;
    for (k, o) in out.iter_mut().enumerate() {
        let offset = k as isize - half;
        let idx = offset.rem_euclid(len as isize) as usize;
        // masses → density
        *o += weight * (buffer[idx].re * norm).max(0.0) / step;
    }
}

pub(super) fn mixture_density(
    model: &MixtureModel<'_>,
    method: Method,
    kind: HitKind,
    seqs: &[(QualitySequence, f64)],
    points: usize,
    step: f64,
) -> Result<Vec<f64>> {
    let len = 2 * points;
    let mut planner = FftPlanner::new();
    let plans = Plans {
        forward: planner.plan_fft_forward(len),
        inverse: planner.plan_fft_inverse(len),
        len,
    };
    let standard = match method {
        Method::Standard => Some(LinearEstimator::new(Method::Standard, model.geom, None, model.order)?),
        Method::Weighted => None,
    };
    let partials: Vec<Vec<f64>> = seqs
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<Vec<f64>> {
            let mut spectrum = vec![Complex::new(0.0, 0.0); len];
            let mut buffer = vec![Complex::new(0.0, 0.0); len];
            let mut acc = vec![0.0; points];
            for (seq, weight) in chunk {
                if *weight == 0.0 {
                    continue;
                }
                let sigmas = seq.sigmas(&model.mix);
                let coeffs = match &standard {
                    Some(est) => est.coefficients(model.param),
                    None => LinearEstimator::new(Method::Weighted, model.geom, Some(&sigmas), model.order)?
                        .coefficients(model.param),
                };
                sequence_density(
                    &coeffs, &sigmas, kind, points, step, &plans, &mut spectrum, &mut buffer, &mut acc, *weight,
                );
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; points];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Order;
    use crate::geometry::TrackerGeometry;
    use crate::lineshape::{GridSpec, QualityMix};

    #[test]
    fn kernel_masses_are_normalised() {
        for kind in HitKind::ALL {
            for scale in [1e-6, 0.3, 1.0, 7.5, 40.0] {
                let (reach, m) = kernel_masses(kind, scale, 1.0, 2048);
                assert_eq!(m.len(), 2 * reach + 1);
                assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                // symmetric
                for i in 0..reach {
                    assert!((m[i] - m[2 * reach - i]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn two_equal_rectangles_make_a_triangle() {
        // N = 2, equal σ: γ̂ = (x₂ − x₁)/2, a sum of two uniforms of
        // half-width a = σ√3/2, i.e. a triangle on [−2a, 2a] of height 1/(2a).
        let geom = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        let sigma = 0.1;
        let mix = QualityMix::new(sigma, sigma, 0.5).unwrap();
        let m = MixtureModel { geom: &geom, mix, order: Order::Straight, param: crate::estimators::Param::Gamma };
        for method in Method::BOTH {
            let s = m.exact_lineshape(method, HitKind::Rectangular, &GridSpec::default()).unwrap();
            let a = sigma * 3f64.sqrt() / 2.0;
            let apex = 1.0 / (2.0 * a);
            assert!((s.maximum / apex - 1.0).abs() < 2e-3, "{method}: {} vs {apex}", s.maximum);
            // linear flank: f(x) = (2a − x)/(4a²)
            let k = (a / s.step).round() as usize;
            let x = k as f64 * s.step;
            let want = (2.0 * a - x) / (4.0 * a * a);
            assert!((s.density[s.centre_index() + k] / want - 1.0).abs() < 5e-3);
            assert!((s.trapezoid_integral() - 1.0).abs() < 1e-6);
        }
    }
}
