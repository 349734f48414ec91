//! Closed-form standard and weighted least-squares track estimators.
//!
//! A track crosses layer `j` at `x_j = β + y_j γ (+ y_j² η)`. The
//! standard fit minimises `Σ (x_j − track)²`, the weighted fit
//! `Σ (x_j − track)² / σ_j²`. Both are linear maps of the observations,
//! `θ̂_k = Σ_j c_kj x_j`, and [`LinearEstimator`] keeps those
//! coefficients explicitly so that line-shape code can reuse them.

mod matrix;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TrackerGeometry;

pub use matrix::SymMatrix;

/// Polynomial order of the track model, i.e. number of parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    /// Straight track, `(β, γ)`.
    Straight,
    /// Parabolic track, `(β, γ, η)`.
    Parabolic,
}

impl Order {
    pub fn n_params(self) -> usize {
        match self {
            Order::Straight => 2,
            Order::Parabolic => 3,
        }
    }

    pub fn params(self) -> &'static [Param] {
        match self {
            Order::Straight => &[Param::Beta, Param::Gamma],
            Order::Parabolic => &[Param::Beta, Param::Gamma, Param::Eta],
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Order::Straight),
            3 => Ok(Order::Parabolic),
            _ => Err(Error::invalid("order", format!("must be 2 or 3, got {v}"))),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.n_params() as u8
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n_params())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Beta,
    Gamma,
    Eta,
}

impl Param {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Param::Beta => "beta",
            Param::Gamma => "gamma",
            Param::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Homoscedastic least squares, ignores the hit variances.
    Standard,
    /// Heteroscedastic least squares with weights `1/σ_j²`.
    Weighted,
}

impl Method {
    pub const BOTH: [Method; 2] = [Method::Standard, Method::Weighted];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Weighted => "weighted",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InfoKind {
    /// `R`, the unweighted moment matrix.
    StandardR,
    /// `I`, the `1/σ²`-weighted moment matrix.
    WeightedI,
}

/// `R` or `I` together with its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub matrix: SymMatrix,
    pub inverse: SymMatrix,
}

impl InfoMatrix {
    fn new(kind: InfoKind, matrix: SymMatrix) -> Result<Self> {
        let what = match kind {
            InfoKind::StandardR => "R",
            InfoKind::WeightedI => "I",
        };
        let inverse = matrix.inverse(what)?;
        Ok(Self { kind, matrix, inverse })
    }

    pub fn order(&self) -> usize {
        self.matrix.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackParams {
    pub beta: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl TrackParams {
    pub fn straight(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma, eta: None }
    }

    pub fn parabolic(beta: f64, gamma: f64, eta: f64) -> Self {
        Self { beta, gamma, eta: Some(eta) }
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Beta => self.beta,
            Param::Gamma => self.gamma,
            Param::Eta => self.eta.unwrap_or(0.0),
        }
    }

    /// Track position at layer coordinate `y`.
    pub fn position(&self, y: f64) -> f64 {
        self.beta + y * self.gamma + y * y * self.eta.unwrap_or(0.0)
    }

    fn from_vec(v: &[f64; 3], order: Order) -> Self {
        match order {
            Order::Straight => Self::straight(v[0], v[1]),
            Order::Parabolic => Self::parabolic(v[0], v[1], v[2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub method: Method,
    pub params: TrackParams,
    /// `R⁻¹` for the standard fit, `I⁻¹` for the weighted fit.
    pub predicted_covariance: SymMatrix,
}

/// `Σ_j w_j y_j^(a+b)` for `a, b < order`; `w_j = 1` when `weights` is `None`.
pub fn moment_matrix(y: &[f64], weights: Option<&[f64]>, order: Order) -> SymMatrix {
    let n = order.n_params();
    let mut m = SymMatrix::zeros(n);
    let mut sums = [0.0; 5];
    for (j, &yj) in y.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[j]);
        let mut p = w;
        for s in sums.iter_mut().take(2 * n - 1) {
            *s += p;
            p *= yj;
        }
    }
    for a in 0..n {
        for b in a..n {
            m.set(a, b, sums[a + b]);
        }
    }
    m
}

fn check_order(n_layers: usize, order: Order) -> Result<()> {
    if order.n_params() > n_layers {
        return Err(Error::invalid(
            "order",
            format!("a {}-parameter fit needs at least {} layers, got {n_layers}", order.n_params(), order.n_params()),
        ));
    }
    Ok(())
}

fn check_sigmas(n_layers: usize, sigmas: &[f64]) -> Result<()> {
    if sigmas.len() != n_layers {
        return Err(Error::invalid(
            "sigmas",
            format!("expected {n_layers} values, got {}", sigmas.len()),
        ));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::invalid("sigmas", format!("must be positive, got {s}")));
    }
    Ok(())
}

fn inverse_variances(sigmas: &[f64]) -> Vec<f64> {
    sigmas.iter().map(|s| 1.0 / (s * s)).collect()
}

/// `R` from raw positions. With centred positions the order-2 matrix
/// is `diag(N, Σy²)`.
fn standard_matrix(y: &[f64], order: Order) -> SymMatrix {
    let span = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let centred = y.iter().sum::<f64>().abs() <= 1e-12 * span * y.len() as f64;
    match order {
        Order::Straight if centred => {
            let mut m = SymMatrix::zeros(2);
            m.set(0, 0, y.len() as f64);
            m.set(1, 1, y.iter().map(|v| v * v).sum());
            m
        }
        _ => moment_matrix(y, None, order),
    }
}

/// `R`, the information matrix of the standard fit.
pub fn info_standard(geom: &TrackerGeometry, order: Order) -> Result<InfoMatrix> {
    check_order(geom.n_layers(), order)?;
    InfoMatrix::new(InfoKind::StandardR, standard_matrix(geom.positions(), order))
}

/// `I`, the information matrix of the weighted fit.
pub fn info_weighted(geom: &TrackerGeometry, sigmas: &[f64], order: Order) -> Result<InfoMatrix> {
    check_order(geom.n_layers(), order)?;
    check_sigmas(geom.n_layers(), sigmas)?;
    let w = inverse_variances(sigmas);
    InfoMatrix::new(InfoKind::WeightedI, moment_matrix(geom.positions(), Some(&w), order))
}

/// Explicit linear form `θ̂_k = Σ_j c_kj x_j` of one fit method for one
/// sequence of hit variances.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimator {
    method: Method,
    order: Order,
    info: InfoMatrix,
    /// `coeffs[j][k]`: weight of observation `j` in parameter `k`.
    coeffs: Vec<[f64; 3]>,
}

impl LinearEstimator {
    /// Build from raw positions. Duplicate positions are accepted as long
    /// as the information matrix stays nonsingular. `sigmas` is required
    /// for the weighted method and ignored by the standard one.
    pub fn from_positions(method: Method, y: &[f64], sigmas: Option<&[f64]>, order: Order) -> Result<Self> {
        check_order(y.len(), order)?;
        let weights = match method {
            Method::Standard => None,
            Method::Weighted => {
                let s = sigmas.ok_or_else(|| Error::invalid("sigmas", "the weighted fit needs hit sigmas"))?;
                check_sigmas(y.len(), s)?;
                Some(inverse_variances(s))
            }
        };
        let info = match &weights {
            None => InfoMatrix::new(InfoKind::StandardR, standard_matrix(y, order))?,
            Some(w) => InfoMatrix::new(InfoKind::WeightedI, moment_matrix(y, Some(w), order))?,
        };
        let n = order.n_params();
        let coeffs = y
            .iter()
            .enumerate()
            .map(|(j, &yj)| {
                let w = weights.as_ref().map_or(1.0, |w| w[j]);
                let mut basis = [0.0; 3];
                let mut p = w;
                for b in basis.iter_mut().take(n) {
                    *b = p;
                    p *= yj;
                }
                info.inverse.mul_vec(&basis)
            })
            .collect();
        Ok(Self { method, order, info, coeffs })
    }

    pub fn new(method: Method, geom: &TrackerGeometry, sigmas: Option<&[f64]>, order: Order) -> Result<Self> {
        Self::from_positions(method, geom.positions(), sigmas, order)
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn info(&self) -> &InfoMatrix {
        &self.info
    }

    /// Per-layer coefficients of one parameter.
    pub fn coefficients(&self, p: Param) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[p.index()]).collect()
    }

    pub fn estimate(&self, x: &[f64]) -> TrackParams {
        debug_assert_eq!(x.len(), self.coeffs.len());
        let mut t = [0.0; 3];
        for (c, xj) in self.coeffs.iter().zip(x) {
            for k in 0..self.order.n_params() {
                t[k] += c[k] * xj;
            }
        }
        TrackParams::from_vec(&t, self.order)
    }

    /// Exact variance `Σ_j c_kj² σ_j²` of a parameter when the hits have
    /// standard deviations `sigmas`.
    pub fn variance_under(&self, sigmas: &[f64], p: Param) -> f64 {
        self.coeffs
            .iter()
            .zip(sigmas)
            .map(|(c, s)| (c[p.index()] * s).powi(2))
            .sum()
    }
}

/// Fit one track. `sigmas` is required for [`Method::Weighted`].
pub fn fit(method: Method, geom: &TrackerGeometry, sigmas: Option<&[f64]>, x: &[f64], order: Order) -> Result<FitResult> {
    if x.len() != geom.n_layers() {
        return Err(Error::invalid(
            "x",
            format!("expected {} observations, got {}", geom.n_layers(), x.len()),
        ));
    }
    let est = LinearEstimator::new(method, geom, sigmas, order)?;
    Ok(FitResult {
        method,
        params: est.estimate(x),
        predicted_covariance: est.info.inverse,
    })
}

/// Covariance of the estimates when hit `j` has standard deviation `σ_j`.
///
/// Weighted: `I⁻¹`. Standard: the sandwich `R⁻¹·C·R⁻¹` with
/// `C_ab = Σ_j y_j^(a+b) σ_j²`.
pub fn predicted_covariance(method: Method, geom: &TrackerGeometry, sigmas: &[f64], order: Order) -> Result<SymMatrix> {
    match method {
        Method::Weighted => Ok(info_weighted(geom, sigmas, order)?.inverse),
        Method::Standard => {
            check_sigmas(geom.n_layers(), sigmas)?;
            let r = info_standard(geom, order)?;
            let var: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
            let c = moment_matrix(geom.positions(), Some(&var), order);
            Ok(r.inverse.sandwich(&c))
        }
    }
}

pub fn predicted_variance(method: Method, geom: &TrackerGeometry, sigmas: &[f64], order: Order, p: Param) -> Result<f64> {
    if p.index() >= order.n_params() {
        return Err(Error::invalid("param", format!("{} is not a parameter of an order-{order} fit", p.as_str())));
    }
    let cov = predicted_covariance(method, geom, sigmas, order)?;
    Ok(cov.get(p.index(), p.index()))
}

/// `(R⁻¹)_kk`, the σ-free standard-fit value. Multiply by a hit variance
/// to get a variance.
pub fn standard_r_inverse(geom: &TrackerGeometry, order: Order, p: Param) -> Result<f64> {
    let r = info_standard(geom, order)?;
    Ok(r.inverse.get(p.index(), p.index()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g3() -> TrackerGeometry {
        TrackerGeometry::equal_spacing(3, 2.0).unwrap()
    }

    fn assert_matrix(m: &SymMatrix, want: &[&[f64]], tol: f64) {
        for (i, row) in want.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((m.get(i, j) - v).abs() <= tol, "({i},{j}): {} vs {v}", m.get(i, j));
            }
        }
    }

    #[test]
    fn info_standard_examples() {
        let r = info_standard(&g3(), Order::Straight).unwrap();
        assert_matrix(&r.matrix, &[&[3.0, 0.0], &[0.0, 2.0]], 0.0);
        let r = info_standard(&g3(), Order::Parabolic).unwrap();
        assert_matrix(&r.matrix, &[&[3.0, 0.0, 2.0], &[0.0, 2.0, 0.0], &[2.0, 0.0, 2.0]], 0.0);
        let g2 = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        let r = info_standard(&g2, Order::Straight).unwrap();
        assert_matrix(&r.matrix, &[&[2.0, 0.0], &[0.0, 2.0]], 0.0);
        assert_eq!(r.kind, InfoKind::StandardR);
    }

    #[test]
    fn info_weighted_examples() {
        let g2 = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        let i = info_weighted(&g2, &[1.0, 1.0], Order::Straight).unwrap();
        assert_matrix(&i.matrix, &[&[2.0, 0.0], &[0.0, 2.0]], 0.0);

        let sig = [0.18, 0.18, 0.018];
        let i = info_weighted(&g3(), &sig, Order::Straight).unwrap();
        let y = [-1.0, 0.0, 1.0];
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (yj, sj) in y.iter().zip(sig) {
            s0 += 1.0 / (sj * sj);
            s1 += yj / (sj * sj);
            s2 += yj * yj / (sj * sj);
        }
        assert_matrix(&i.matrix, &[&[s0, s1], &[s1, s2]], 1e-9);

        let s = 0.3;
        let i = info_weighted(&g3(), &[s, s, s], Order::Parabolic).unwrap();
        let k = 1.0 / (s * s);
        assert_matrix(&i.matrix, &[&[3.0 * k, 0.0, 2.0 * k], &[0.0, 2.0 * k, 0.0], &[2.0 * k, 0.0, 2.0 * k]], 1e-12);
    }

    #[test]
    fn order_needs_enough_layers() {
        let g2 = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        assert!(matches!(
            info_standard(&g2, Order::Parabolic),
            Err(Error::InvalidParameter { name: "order", .. })
        ));
    }

    #[test]
    fn duplicate_positions_allowed_when_nonsingular() {
        let y = [-1.0, -1.0, 1.0];
        let est = LinearEstimator::from_positions(Method::Standard, &y, None, Order::Straight);
        assert!(est.is_ok());
        let sing = LinearEstimator::from_positions(Method::Weighted, &[2.0, 2.0, 2.0], Some(&[1.0, 1.0, 1.0]), Order::Straight);
        assert!(matches!(sing, Err(Error::SingularMatrix { .. })));
        let sing3 = LinearEstimator::from_positions(Method::Weighted, &y, Some(&[1.0, 2.0, 1.0]), Order::Parabolic);
        assert!(matches!(sing3, Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn noise_free_line_recovered() {
        let geom = TrackerGeometry::equal_spacing(7, 7063.49).unwrap();
        let x: Vec<f64> = geom.positions().iter().map(|y| 0.5 + 0.001 * y).collect();
        let sig = [0.18, 0.018, 0.18, 0.18, 0.018, 0.18, 0.18];
        for method in Method::BOTH {
            let r = fit(method, &geom, Some(&sig), &x, Order::Straight).unwrap();
            assert!((r.params.beta - 0.5).abs() < 1e-12, "{method}: {:?}", r.params);
            assert!((r.params.gamma - 0.001).abs() < 1e-15, "{method}: {:?}", r.params);
        }
        let xp: Vec<f64> = geom.positions().iter().map(|y| 0.5 + 0.001 * y + 2e-8 * y * y).collect();
        for method in Method::BOTH {
            let r = fit(method, &geom, Some(&sig), &xp, Order::Parabolic).unwrap();
            assert!((r.params.beta - 0.5).abs() < 1e-9);
            assert!((r.params.gamma - 0.001).abs() < 1e-14);
            assert!((r.params.eta.unwrap() - 2e-8).abs() < 1e-18);
        }
    }

    #[test]
    fn interpolating_fits_coincide() {
        let g2 = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        let sig = [0.18, 0.018];
        let x = [0.37, -1.2];
        let a = fit(Method::Standard, &g2, None, &x, Order::Straight).unwrap();
        let b = fit(Method::Weighted, &g2, Some(&sig), &x, Order::Straight).unwrap();
        assert!((a.params.beta - b.params.beta).abs() < 1e-12);
        assert!((a.params.gamma - b.params.gamma).abs() < 1e-12);

        let sig3 = [0.018, 0.18, 0.05];
        let x3 = [0.1, 0.4, -0.3];
        let a = fit(Method::Standard, &g3(), None, &x3, Order::Parabolic).unwrap();
        let b = fit(Method::Weighted, &g3(), Some(&sig3), &x3, Order::Parabolic).unwrap();
        for p in Order::Parabolic.params() {
            assert!((a.params.get(*p) - b.params.get(*p)).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_fit_requires_sigmas() {
        let err = fit(Method::Weighted, &g3(), None, &[0.0; 3], Order::Straight).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "sigmas", .. }));
        let err = fit(Method::Weighted, &g3(), Some(&[0.1, -0.2, 0.1]), &[0.0; 3], Order::Straight).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "sigmas", .. }));
    }

    #[test]
    fn predicted_variance_homoscedastic() {
        let geom = TrackerGeometry::equal_spacing(7, 7063.49).unwrap();
        let s = 0.018;
        let sig = [s; 7];
        let sy2 = geom.moment(2);
        for m in Method::BOTH {
            let v = predicted_variance(m, &geom, &sig, Order::Straight, Param::Gamma).unwrap();
            assert!((v / (s * s / sy2) - 1.0).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn predicted_variance_two_layers_closed_form() {
        // y = ±1: γ̂_std = (x₂ − x₁)/2 so Var = (σ₁² + σ₂²)/4; the weighted
        // fit interpolates both points too, so it has the same variance.
        let g2 = TrackerGeometry::equal_spacing(2, 2.0).unwrap();
        let (s1, s2) = (0.18f64, 0.018f64);
        let vs = predicted_variance(Method::Standard, &g2, &[s1, s2], Order::Straight, Param::Gamma).unwrap();
        let vw = predicted_variance(Method::Weighted, &g2, &[s1, s2], Order::Straight, Param::Gamma).unwrap();
        let want = (s1 * s1 + s2 * s2) / 4.0;
        assert!((vs / want - 1.0).abs() < 1e-12);
        // 2×2 symbolic inverse: I = [[a+b, b−a], [b−a, a+b]], a=1/σ₁², b=1/σ₂²,
        // (I⁻¹)₂₂ = (a+b)/(4ab)
        let (a, b) = (1.0 / (s1 * s1), 1.0 / (s2 * s2));
        assert!((vw / ((a + b) / (4.0 * a * b)) - 1.0).abs() < 1e-12);
        assert!(vs >= vw * (1.0 - 1e-12));
    }

    #[test]
    fn sandwich_matches_coefficient_route() {
        let geom = TrackerGeometry::equal_spacing(6, 7063.49).unwrap();
        let sig = [0.18, 0.018, 0.018, 0.18, 0.18, 0.018];
        for order in [Order::Straight, Order::Parabolic] {
            for method in Method::BOTH {
                let est = LinearEstimator::new(method, &geom, Some(&sig), order).unwrap();
                for p in order.params() {
                    let a = predicted_variance(method, &geom, &sig, order, *p).unwrap();
                    let b = est.variance_under(&sig, *p);
                    assert!((a / b - 1.0).abs() < 1e-9, "{method} {order} {p:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn r_inverse_is_sigma_free() {
        let geom = TrackerGeometry::equal_spacing(7, 7063.49).unwrap();
        let r = standard_r_inverse(&geom, Order::Straight, Param::Gamma).unwrap();
        assert!((r - 1.0 / geom.moment(2)).abs() < 1e-20);
    }

    fn sigma_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.018), Just(0.18), 0.01f64..0.5], n)
    }

    proptest! {
        #[test]
        fn estimates_are_linear(
            n in 3usize..10,
            seed_x in proptest::collection::vec(-1.0f64..1.0, 20),
            seed_z in proptest::collection::vec(-1.0f64..1.0, 20),
            sig in sigma_strategy(20),
        ) {
            let geom = TrackerGeometry::equal_spacing(n, 7063.49).unwrap();
            let sig = &sig[..n];
            let x1 = &seed_x[..n];
            let x2 = &seed_z[..n];
            let sum: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a + b).collect();
            for order in [Order::Straight, Order::Parabolic] {
                for m in Method::BOTH {
                    let est = LinearEstimator::new(m, &geom, Some(sig), order).unwrap();
                    let zero = est.estimate(&vec![0.0; n]);
                    let a = est.estimate(x1);
                    let b = est.estimate(x2);
                    let c = est.estimate(&sum);
                    for p in order.params() {
                        let lhs = c.get(*p) - zero.get(*p);
                        let rhs = (a.get(*p) - zero.get(*p)) + (b.get(*p) - zero.get(*p));
                        let scale = a.get(*p).abs() + b.get(*p).abs() + 1e-300;
                        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
                    }
                }
            }
        }

        #[test]
        fn homoscedastic_collapse(n in 3usize..14, s in 0.01f64..1.0, xs in proptest::collection::vec(-1.0f64..1.0, 14)) {
            let geom = TrackerGeometry::equal_spacing(n, 7063.49).unwrap();
            let sig = vec![s; n];
            for order in [Order::Straight, Order::Parabolic] {
                let a = fit(Method::Standard, &geom, None, &xs[..n], order).unwrap();
                let b = fit(Method::Weighted, &geom, Some(&sig), &xs[..n], order).unwrap();
                for p in order.params() {
                    let (u, v) = (a.params.get(*p), b.params.get(*p));
                    prop_assert!((u - v).abs() <= 1e-12 * (u.abs() + v.abs() + 1e-300), "{:?}: {} vs {}", p, u, v);
                }
            }
        }

        #[test]
        fn standard_never_beats_weighted(n in 3usize..14, sig in sigma_strategy(14)) {
            let geom = TrackerGeometry::equal_spacing(n, 7063.49).unwrap();
            let sig = &sig[..n];
            for order in [Order::Straight, Order::Parabolic] {
                if order.n_params() > n { continue; }
                for p in order.params() {
                    let vs = predicted_variance(Method::Standard, &geom, sig, order, *p).unwrap();
                    let vw = predicted_variance(Method::Weighted, &geom, sig, order, *p).unwrap();
                    prop_assert!(vs >= vw * (1.0 - 1e-9));
                }
            }
        }
    }
}
