//! Least-squares polynomial models of sampled signals.
//!
//! Fits are carried out in a Chebyshev basis over the affine map
//! `x = (t - center) / half_width`, which sends the fitted domain onto
//! `[-1, 1]`. The Chebyshev series is the source of truth for evaluation,
//! differentiation and integration. Ascending raw-power coefficients in `t`
//! are derived from it for reporting; at high degree over long time spans
//! that expansion loses precision, which [`PolyModel::raw_lossy`] records.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for the rank decision in [`fit_poly`].
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Raw coefficients are flagged lossy once their evaluation drifts from the
/// Chebyshev evaluation by more than this fraction of the model's peak value.
pub const RAW_PRECISION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMap {
    pub center: f64,
    pub half_width: f64,
}

impl ScaleMap {
    pub fn for_domain(lo: f64, hi: f64) -> Self {
        ScaleMap {
            center: 0.5 * (lo + hi),
            half_width: 0.5 * (hi - lo),
        }
    }

    #[inline]
    pub fn to_unit(&self, t: f64) -> f64 {
        (t - self.center) / self.half_width
    }
}

/// Polynomial of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    /// Ascending powers of `t`, derived from the Chebyshev series.
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    pub scaling: ScaleMap,
    /// Chebyshev coefficients in the scaled variable.
    pub chebyshev: Vec<f64>,
    pub raw_lossy: bool,
}

impl PolyModel {
    pub fn from_chebyshev(chebyshev: Vec<f64>, scaling: ScaleMap, domain: [f64; 2]) -> Self {
        let coefficients = cheb_to_raw(&chebyshev, scaling);
        let mut model = PolyModel {
            coefficients,
            domain,
            scaling,
            chebyshev,
            raw_lossy: false,
        };
        model.raw_lossy = model.raw_drift() > RAW_PRECISION;
        model
    }

    /// Builds a model from ascending raw coefficients. The Chebyshev series is
    /// derived from them, so precision is bounded by the raw representation.
    pub fn from_raw(coefficients: &[f64], domain: [f64; 2]) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Parameter("polynomial needs at least one coefficient".into()));
        }
        check_domain(domain)?;
        let scaling = ScaleMap::for_domain(domain[0], domain[1]);
        let chebyshev = raw_to_cheb(coefficients, scaling);
        let mut model = PolyModel {
            coefficients: coefficients.to_vec(),
            domain,
            scaling,
            chebyshev,
            raw_lossy: false,
        };
        model.raw_lossy = model.raw_drift() > RAW_PRECISION;
        Ok(model)
    }

    pub fn degree(&self) -> usize {
        self.chebyshev.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        clenshaw(&self.chebyshev, self.scaling.to_unit(t))
    }

    /// Horner evaluation of the raw coefficients.
    pub fn eval_raw(&self, t: f64) -> f64 {
        horner(&self.coefficients, t)
    }

    pub fn derivative(&self) -> PolyModel {
        let mut d = cheb_derivative(&self.chebyshev);
        let inv = 1.0 / self.scaling.half_width;
        d.iter_mut().for_each(|c| *c *= inv);
        let mut raw: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| j as f64 * c)
            .collect();
        if raw.is_empty() {
            raw.push(0.0);
        }
        self.with_series(d, raw)
    }

    pub fn nth_derivative(&self, order: usize) -> PolyModel {
        (0..order).fold(self.clone(), |m, _| m.derivative())
    }

    /// Antiderivative vanishing at `t = 0`: raw coefficients follow
    /// `c_j -> c_j / (j + 1)` on the raised power.
    pub fn antiderivative(&self) -> PolyModel {
        let h = self.scaling.half_width;
        let mut series = cheb_integral(&self.chebyshev);
        series.iter_mut().for_each(|c| *c *= h);
        let at_zero = clenshaw(&series, self.scaling.to_unit(0.0));
        series[0] -= at_zero;
        let mut raw = Vec::with_capacity(self.coefficients.len() + 1);
        raw.push(0.0);
        raw.extend(
            self.coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| c / (j as f64 + 1.0)),
        );
        self.with_series(series, raw)
    }

    pub fn scaled(&self, factor: f64) -> PolyModel {
        PolyModel {
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            domain: self.domain,
            scaling: self.scaling,
            chebyshev: self.chebyshev.iter().map(|c| c * factor).collect(),
            raw_lossy: self.raw_lossy,
        }
    }

    fn with_series(&self, chebyshev: Vec<f64>, coefficients: Vec<f64>) -> PolyModel {
        let mut model = PolyModel {
            coefficients,
            domain: self.domain,
            scaling: self.scaling,
            chebyshev,
            raw_lossy: false,
        };
        model.raw_lossy = model.raw_drift() > RAW_PRECISION;
        model
    }

    /// Largest gap between raw and Chebyshev evaluation over the domain,
    /// relative to the model's peak magnitude there.
    fn raw_drift(&self) -> f64 {
        const PROBES: usize = 65;
        let [lo, hi] = self.domain;
        let mut peak = 0.0f64;
        let mut drift = 0.0f64;
        for k in 0..PROBES {
            let t = lo + (hi - lo) * k as f64 / (PROBES - 1) as f64;
            let exact = self.eval(t);
            peak = peak.max(exact.abs());
            drift = drift.max((exact - self.eval_raw(t)).abs());
        }
        if peak == 0.0 {
            if drift == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            drift / peak
        }
    }
}

/// Two polynomial pieces meeting at the breakpoint `T`. Both pieces are
/// expressed in powers of `t` (not `t - T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolyModel {
    pub piece1: PolyModel,
    pub piece2: PolyModel,
    pub breakpoint: f64,
}

impl PiecewisePolyModel {
    pub fn new(piece1: PolyModel, piece2: PolyModel, breakpoint: f64) -> Result<Self> {
        if !(breakpoint > piece1.domain[0] && breakpoint < piece2.domain[1]) {
            return Err(Error::Parameter(format!(
                "breakpoint {breakpoint} not inside ({}, {})",
                piece1.domain[0], piece2.domain[1]
            )));
        }
        Ok(PiecewisePolyModel {
            piece1,
            piece2,
            breakpoint,
        })
    }

    pub fn domain(&self) -> [f64; 2] {
        [self.piece1.domain[0], self.piece2.domain[1]]
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.breakpoint {
            self.piece1.eval(t)
        } else {
            self.piece2.eval(t)
        }
    }

    /// Each piece integrated from `t = 0` on its own, so the result is in
    /// general discontinuous at the breakpoint; see [`Self::jump`].
    pub fn antiderivative(&self) -> PiecewisePolyModel {
        PiecewisePolyModel {
            piece1: self.piece1.antiderivative(),
            piece2: self.piece2.antiderivative(),
            breakpoint: self.breakpoint,
        }
    }

    /// `piece2(T) - piece1(T)`.
    pub fn jump(&self) -> f64 {
        self.piece2.eval(self.breakpoint) - self.piece1.eval(self.breakpoint)
    }

    pub fn scaled(&self, factor: f64) -> PiecewisePolyModel {
        PiecewisePolyModel {
            piece1: self.piece1.scaled(factor),
            piece2: self.piece2.scaled(factor),
            breakpoint: self.breakpoint,
        }
    }
}

/// Goodness of fit. `sst` is defined as `sse + ssr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub sse: f64,
    pub ssr: f64,
    pub sst: f64,
    pub r_squared: f64,
}

impl FitStats {
    pub fn from_sums(sse: f64, ssr: f64) -> Self {
        let sst = sse + ssr;
        let r_squared = if sst > 0.0 { ssr / sst } else { 1.0 };
        FitStats {
            sse,
            ssr,
            sst,
            r_squared,
        }
    }
}

pub fn fit_stats(y: &[f64], y_hat: &[f64]) -> Result<FitStats> {
    if y.len() != y_hat.len() {
        return Err(Error::Shape(format!(
            "{} observations vs {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::TooShort { len: y.len(), min: 2 });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    let ssr: f64 = y_hat.iter().map(|b| (b - mean).powi(2)).sum();
    let mut stats = FitStats::from_sums(sse, ssr);
    // zero-variance target: R^2 is 1 for a perfect fit, 0 otherwise
    if y.iter().all(|v| *v == y[0]) {
        let scale = y[0].abs().max(f64::MIN_POSITIVE);
        let perfect = sse <= y.len() as f64 * (1e-12 * scale).powi(2);
        stats.r_squared = if perfect { 1.0 } else { 0.0 };
    }
    Ok(stats)
}

/// Least-squares fit of `y(t)` by a polynomial of the given degree.
pub fn fit_poly(t: &[f64], y: &[f64], degree: usize) -> Result<(PolyModel, FitStats)> {
    if t.len() != y.len() {
        return Err(Error::Shape(format!("{} times vs {} values", t.len(), y.len())));
    }
    if t.len() <= degree {
        return Err(Error::Underdetermined {
            samples: t.len(),
            degree,
        });
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("time must be strictly increasing".into()));
    }
    let domain = [t[0], t[t.len() - 1]];
    let scaling = ScaleMap::for_domain(domain[0], domain[1]);
    let n = degree + 1;
    let mut design = DMatrix::<f64>::zeros(t.len(), n);
    for (row, &ti) in t.iter().enumerate() {
        let x = scaling.to_unit(ti);
        let (mut prev, mut cur) = (1.0, x);
        design[(row, 0)] = 1.0;
        if n > 1 {
            design[(row, 1)] = x;
        }
        for col in 2..n {
            let next = 2.0 * x * cur - prev;
            design[(row, col)] = next;
            prev = cur;
            cur = next;
        }
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > RANK_TOLERANCE * smax)
        .count();
    if rank < n {
        return Err(Error::Conditioning { rank, needed: n });
    }
    let rhs = DVector::from_column_slice(y);
    let solution = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Validation(e.to_string()))?;
    let model = PolyModel::from_chebyshev(solution.iter().copied().collect(), scaling, domain);
    let fitted: Vec<f64> = t.iter().map(|&ti| model.eval(ti)).collect();
    let stats = fit_stats(y, &fitted)?;
    Ok((model, stats))
}

/// Independent fits on `t <= T` and `t > T`.
pub fn fit_piecewise(
    t: &[f64],
    y: &[f64],
    breakpoint: f64,
    degree: usize,
) -> Result<(PiecewisePolyModel, [FitStats; 2])> {
    if t.len() != y.len() {
        return Err(Error::Shape(format!("{} times vs {} values", t.len(), y.len())));
    }
    if t.is_empty() || !(breakpoint > t[0] && breakpoint < t[t.len() - 1]) {
        return Err(Error::Parameter(format!(
            "breakpoint {breakpoint} must lie strictly inside the record"
        )));
    }
    let split = t.partition_point(|&ti| ti <= breakpoint);
    let (m1, s1) = fit_poly(&t[..split], &y[..split], degree)?;
    let (m2, s2) = fit_poly(&t[split..], &y[split..], degree)?;
    let piece1 = stretch(m1, [t[0], breakpoint]);
    let piece2 = stretch(m2, [breakpoint, t[t.len() - 1]]);
    Ok((PiecewisePolyModel::new(piece1, piece2, breakpoint)?, [s1, s2]))
}

// The fitted domain ends at the last sample on each side; the nominal piece
// domain extends to the breakpoint. The scaling map is left untouched.
fn stretch(mut model: PolyModel, domain: [f64; 2]) -> PolyModel {
    model.domain = domain;
    model.raw_lossy = model.raw_drift() > RAW_PRECISION;
    model
}

fn check_domain(domain: [f64; 2]) -> Result<()> {
    if !(domain[0].is_finite() && domain[1].is_finite() && domain[1] > domain[0]) {
        return Err(Error::Parameter(format!("degenerate domain {domain:?}")));
    }
    Ok(())
}

#[inline]
pub(crate) fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => x * b1 - b2 + c0,
        None => 0.0,
    }
}

#[inline]
pub(crate) fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn cheb_derivative(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut b = vec![0.0; n + 1];
    for k in (1..n).rev() {
        b[k - 1] = b[k + 1] + 2.0 * k as f64 * a[k];
    }
    b[0] *= 0.5;
    b.truncate(n - 1);
    b
}

fn cheb_integral(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let at = |k: usize| a.get(k).copied().unwrap_or(0.0);
    let mut c = vec![0.0; n + 1];
    c[1] = at(0) - 0.5 * at(2);
    for k in 2..=n {
        c[k] = (at(k - 1) - at(k + 1)) / (2.0 * k as f64);
    }
    c
}

fn cheb_to_raw(cheb: &[f64], map: ScaleMap) -> Vec<f64> {
    let n = cheb.len();
    // monomials in x
    let mut mono = vec![0.0; n];
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    t_prev[0] = 1.0;
    if n > 0 {
        mono[0] += cheb[0];
    }
    if n > 1 {
        t_cur[1] = 1.0;
        mono[1] += cheb[1];
    }
    for k in 2..n {
        let mut next = vec![0.0; n];
        for i in 0..n - 1 {
            next[i + 1] += 2.0 * t_cur[i];
        }
        for i in 0..n {
            next[i] -= t_prev[i];
        }
        for i in 0..n {
            mono[i] += cheb[k] * next[i];
        }
        t_prev = std::mem::replace(&mut t_cur, next);
    }
    // substitute x = (t - center) / half_width by Horner's rule
    let inv = 1.0 / map.half_width;
    let mut raw = vec![0.0; n.max(1)];
    for k in (0..n).rev() {
        let mut next = vec![0.0; n.max(1)];
        for i in 0..n {
            if i + 1 < n {
                next[i + 1] += raw[i] * inv;
            }
            next[i] -= raw[i] * map.center * inv;
        }
        next[0] += mono[k];
        raw = next;
    }
    raw
}

fn raw_to_cheb(raw: &[f64], map: ScaleMap) -> Vec<f64> {
    let n = raw.len();
    // monomials in x via t = center + half_width * x
    let mut mono = vec![0.0; n];
    for k in (0..n).rev() {
        let mut next = vec![0.0; n];
        for i in 0..n {
            if i + 1 < n {
                next[i + 1] += mono[i] * map.half_width;
            }
            next[i] += mono[i] * map.center;
        }
        next[0] += raw[k];
        mono = next;
    }
    // x * T_0 = T_1, x * T_k = (T_{k+1} + T_{k-1}) / 2
    let mut cheb = vec![0.0; n];
    for k in (0..n).rev() {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let c = cheb[i];
            if c == 0.0 {
                continue;
            }
            if i == 0 {
                if n > 1 {
                    next[1] += c;
                }
            } else {
                if i + 1 < n {
                    next[i + 1] += 0.5 * c;
                }
                next[i - 1] += 0.5 * c;
            }
        }
        next[0] += mono[k];
        cheb = next;
    }
    cheb
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn two_points_degree_one_is_identity() {
        let (m, s) = fit_poly(&[0.0, 1.0], &[0.0, 1.0], 1).unwrap();
        assert!(close(m.eval(0.5), 0.5, 1e-12));
        assert!(m.coefficients[0].abs() < 1e-14);
        assert!(close(m.coefficients[1], 1.0, 1e-12));
        assert!(close(s.r_squared, 1.0, 1e-12));
    }

    #[test]
    fn constant_target_reports_unit_r_squared() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y = vec![3.0; 10];
        let (_, s) = fit_poly(&t, &y, 2).unwrap();
        assert!(s.ssr < 1e-20 && s.sst < 1e-20);
        assert_eq!(s.r_squared, 1.0);
    }

    #[test]
    fn underdetermined_fit_is_rejected() {
        let err = fit_poly(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], 3).unwrap_err();
        assert!(matches!(err, Error::Underdetermined { samples: 3, degree: 3 }));
    }

    #[test]
    fn interpolates_when_samples_equal_degree_plus_one() {
        let t: Vec<f64> = (0..8).map(|k| 0.5 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| (x * 1.3).sin() + 0.2 * x).collect();
        let (m, _) = fit_poly(&t, &y, 7).unwrap();
        for (ti, yi) in t.iter().zip(&y) {
            assert!((m.eval(*ti) - yi).abs() < 1e-9 * yi.abs().max(1.0));
        }
    }

    #[test]
    fn antiderivative_of_identity() {
        let m = PolyModel::from_raw(&[0.0, 1.0], [0.0, 2.0]).unwrap();
        let a = m.antiderivative();
        assert_eq!(a.coefficients, vec![0.0, 0.0, 0.5]);
        assert!(close(a.eval(2.0), 2.0, 1e-14));
        assert!(a.eval(0.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_undoes_antiderivative() {
        let m = PolyModel::from_raw(&[1.5, -2.0, 0.25, 3.0, -0.5], [0.0, 3.0]).unwrap();
        let back = m.antiderivative().derivative();
        assert_eq!(back.coefficients, m.coefficients);
        for k in 0..=30 {
            let t = 0.1 * k as f64;
            assert!((back.eval(t) - m.eval(t)).abs() < 1e-12 * m.eval(t).abs().max(1.0));
        }
    }

    #[test]
    fn raw_rule_applied_to_fitted_coefficients() {
        let t: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        let (m, _) = fit_poly(&t, &y, 6).unwrap();
        let a = m.antiderivative();
        for (j, c) in m.coefficients.iter().enumerate() {
            assert_eq!(a.coefficients[j + 1], c / (j as f64 + 1.0));
        }
        // the Chebyshev route agrees with the raw route
        for &ti in &t {
            assert!((a.eval(ti) - a.eval_raw(ti)).abs() < 1e-10);
        }
    }

    #[test]
    fn piecewise_tent_is_exact_at_degree_one() {
        let t: Vec<f64> = (0..=40).map(|k| 0.5 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| if x <= 10.0 { x } else { 20.0 - x }).collect();
        let (m, stats) = fit_piecewise(&t, &y, 10.0, 1).unwrap();
        assert!(close(stats[0].r_squared, 1.0, 1e-12));
        assert!(close(stats[1].r_squared, 1.0, 1e-12));
        assert!(close(m.piece2.coefficients[0], 20.0, 1e-12));
        assert!(close(m.piece2.coefficients[1], -1.0, 1e-12));
        assert_eq!(m.piece1.domain, [0.0, 10.0]);
        assert_eq!(m.piece2.domain, [10.0, 20.0]);
    }

    #[test]
    fn piecewise_side_with_too_few_samples() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y = t.clone();
        assert!(matches!(
            fit_piecewise(&t, &y, 1.5, 3),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn flux_jump_reported_at_breakpoint() {
        let p1 = PolyModel::from_raw(&[0.0, 1.0], [0.0, 1.0]).unwrap();
        let p2 = PolyModel::from_raw(&[2.0, -1.0], [1.0, 2.0]).unwrap();
        let pw = PiecewisePolyModel::new(p1, p2, 1.0).unwrap();
        // continuous at T = 1 but the integrals from zero differ: 1/2 vs 3/2
        assert!(pw.jump().abs() < 1e-15);
        assert!(close(pw.antiderivative().jump(), 1.0, 1e-14));
    }

    #[test]
    fn fit_stats_length_mismatch() {
        assert!(matches!(fit_stats(&[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
    }
}
