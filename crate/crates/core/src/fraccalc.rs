//! Riemann–Liouville fractional derivatives with lower terminal 0.
//!
//! Two routes are provided for polynomial models:
//!
//! * the termwise power rule `D^a (c t^b) = c Γ(b+1) / Γ(b-a+1) t^(b-a)` on
//!   raw coefficients ([`rl_poly_termwise`], [`rl_piecewise_termwise`]);
//! * a quadrature route on the Chebyshev series ([`RlOperator`]), which splits
//!   the derivative into boundary terms plus
//!   `Γ(m-a)^-1 ∫ (t-s)^(m-a-1) f^(m)(s) ds` and integrates the latter with
//!   Gauss–Jacobi nodes. For polynomial integrands the quadrature is exact,
//!   so both routes agree in exact arithmetic; the second stays accurate at
//!   degrees where raw coefficients cancel catastrophically.
//!
//! [`gl_oracle`] is an independent Grünwald–Letnikov discretization used for
//! verification only.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyfit::{PiecewisePolyModel, PolyModel};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gauss–Jacobi node count; exact for integrands of degree < 48.
const JACOBI_NODES: usize = 24;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `sin(pi x)` with exact argument reduction.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x * 0.5).round();
    if r == 0.0 || r.abs() == 1.0 {
        0.0
    } else if r.abs() == 0.5 {
        r.signum()
    } else {
        (PI * r).sin()
    }
}

fn lanczos_positive(x: f64) -> f64 {
    // x >= 0.5
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    let half = 0.5 * (z + 0.5);
    let p = t.powf(half);
    (2.0 * PI).sqrt() * p * (p * (-t).exp()) * sum
}

/// Gamma function; Lanczos approximation with reflection below 1/2.
pub fn gamma(x: f64) -> Result<f64> {
    if is_nonpositive_integer(x) {
        return Err(Error::GammaPole(x));
    }
    if x == x.round() && x <= 23.0 {
        let mut f = 1.0;
        for k in 2..(x as u32) {
            f *= k as f64;
        }
        return Ok(f);
    }
    if x < 0.5 {
        Ok(PI / (sin_pi(x) * lanczos_positive(1.0 - x)))
    } else {
        Ok(lanczos_positive(x))
    }
}

/// `1 / Γ(x)`, zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x < 0.5 {
        sin_pi(x) * lanczos_positive(1.0 - x) / PI
    } else {
        1.0 / gamma(x).unwrap_or(f64::INFINITY)
    }
}

/// Order pair `(α1, α2)` on `[0, 2]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracOrderPair {
    pub alpha1: f64,
    pub alpha2: f64,
    pub m1: u32,
    pub m2: u32,
}

impl FracOrderPair {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        for a in [alpha1, alpha2] {
            if !(0.0..=2.0).contains(&a) {
                return Err(Error::Domain { t: a, lo: 0.0, hi: 2.0 });
            }
        }
        Ok(FracOrderPair {
            alpha1,
            alpha2,
            m1: ceiling_index(alpha1),
            m2: ceiling_index(alpha2),
        })
    }
}

/// `m` with `m - 1 < α < m`, or `α` itself for integer orders.
pub fn ceiling_index(alpha: f64) -> u32 {
    alpha.ceil() as u32
}

/// Power rule `D^α (a t^β)` for `β > -1`, `t > 0`.
pub fn rl_power(a: f64, beta: f64, alpha: f64, t: f64) -> f64 {
    if alpha == 0.0 {
        return a * t.powf(beta);
    }
    let scale = rgamma(beta - alpha + 1.0);
    if scale == 0.0 || a == 0.0 {
        return 0.0;
    }
    // Γ(β + 1) is finite for β > -1
    a * gamma(beta + 1.0).unwrap_or(f64::NAN) * scale * t.powf(beta - alpha)
}

/// Termwise power rule over ascending raw coefficients.
pub fn rl_poly_termwise(coefficients: &[f64], alpha: f64, t: f64) -> f64 {
    coefficients
        .iter()
        .enumerate()
        .map(|(j, &c)| rl_power(c, j as f64, alpha, t))
        .sum()
}

/// Memory-effect form for a two-piece polynomial in raw powers of `t`:
/// for `t > T` the derivative of piece 1 plus the switch-on of
/// `(c2_j - c1_j) t^j` at `T`, expanded in powers of `t - T`.
pub fn rl_piecewise_termwise(
    piece1: &[f64],
    piece2: &[f64],
    breakpoint: f64,
    alpha: f64,
    t: f64,
) -> f64 {
    if t <= breakpoint {
        return rl_poly_termwise(piece1, alpha, t);
    }
    let dt = t - breakpoint;
    let len = piece1.len().max(piece2.len());
    let mut total = 0.0;
    for j in 0..len {
        let c1 = piece1.get(j).copied().unwrap_or(0.0);
        let c2 = piece2.get(j).copied().unwrap_or(0.0);
        let diff = c2 - c1;
        if diff != 0.0 {
            let mut inner = 0.0;
            for k in 0..=j {
                let weight = rgamma(k as f64 + 1.0 - alpha);
                if weight == 0.0 {
                    continue;
                }
                inner += binomial(j, k)
                    * factorial(k)
                    * breakpoint.powi((j - k) as i32)
                    * weight
                    * dt.powf(k as f64 - alpha);
            }
            total += diff * inner;
        }
        total += rl_power(c1, j as f64, alpha, t);
    }
    total
}

pub(crate) fn factorial(n: usize) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Gauss–Jacobi rule on `[0, 1]` for the weight `(1 - w)^exponent`.
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    /// Golub–Welsch on the Jacobi matrix of `P^(a, 0)`, mapped to `[0, 1]`.
    pub fn new(exponent: f64, n: usize) -> Self {
        let (a, b) = (exponent, 0.0f64);
        let ab = a + b;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let k = i as f64;
            let diag = if i == 0 {
                (b - a) / (ab + 2.0)
            } else {
                (b * b - a * a) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
            };
            jac[(i, i)] = diag;
            if i + 1 < n {
                let k = k + 1.0;
                let s = 2.0 * k + ab;
                let off = if i == 0 {
                    (4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))).sqrt()
                } else {
                    (4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0)))
                        .sqrt()
                };
                jac[(i, i + 1)] = off;
                jac[(i + 1, i)] = off;
            }
        }
        // ∫_{-1}^{1} (1-x)^a dx
        let mu0 = 2f64.powf(a + 1.0) / (a + 1.0);
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        // w = (1 + x) / 2, so (1 - w)^a dw = 2^(-a-1) (1 - x)^a dx
        let scale = 2f64.powf(-a - 1.0);
        GaussJacobi {
            nodes: pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect(),
            weights: pairs.iter().map(|p| p.1 * scale).collect(),
        }
    }
}

/// A prepared Riemann–Liouville derivative of fixed order.
#[derive(Debug, Clone)]
pub struct RlOperator {
    alpha: f64,
    m: usize,
    integer: bool,
    quadrature: Option<GaussJacobi>,
    // 1 / Γ(k + 1 - α) for k < m, and 1 / Γ(m - α)
    boundary: Vec<f64>,
    kernel: f64,
}

impl RlOperator {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("order {alpha} must be >= 0")));
        }
        let integer = alpha == alpha.round();
        let m = alpha.ceil() as usize;
        if integer {
            return Ok(RlOperator {
                alpha,
                m,
                integer,
                quadrature: None,
                boundary: Vec::new(),
                kernel: 0.0,
            });
        }
        let exponent = m as f64 - alpha - 1.0;
        Ok(RlOperator {
            alpha,
            m,
            integer,
            quadrature: Some(GaussJacobi::new(exponent, JACOBI_NODES)),
            boundary: (0..m).map(|k| rgamma(k as f64 + 1.0 - alpha)).collect(),
            kernel: rgamma(m as f64 - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ceiling(&self) -> usize {
        self.m
    }

    /// Derivative with lower terminal `start` of the function whose `k`-th
    /// derivative at `s` is `deriv(k, s)`: boundary terms at `start` plus
    /// the quadrature of `f^(m)` over `[start, t]`.
    fn apply_from<F>(&self, deriv: F, start: f64, t: f64) -> f64
    where
        F: Fn(usize, f64) -> f64,
    {
        if self.integer {
            return deriv(self.m, t);
        }
        let h = t - start;
        let mut total = 0.0;
        for (k, w) in self.boundary.iter().enumerate() {
            if *w != 0.0 {
                total += deriv(k, start) * h.powf(k as f64 - self.alpha) * w;
            }
        }
        let quad = self.quadrature.as_ref().expect("fractional order has nodes");
        let integral: f64 = quad
            .nodes
            .iter()
            .zip(&quad.weights)
            .map(|(w, wt)| wt * deriv(self.m, start + w * h))
            .sum();
        total + self.kernel * h.powf(self.m as f64 - self.alpha) * integral
    }

    pub fn apply_poly(&self, model: &PreparedPoly, t: f64) -> f64 {
        self.apply_from(|k, s| model.derivs[k].eval(s), 0.0, t)
    }

    pub fn apply_piecewise(&self, model: &PreparedPiecewise, t: f64) -> Result<f64> {
        model.guard(t)?;
        let left = self.apply_poly(&model.piece1, t);
        if t < model.breakpoint {
            return Ok(left);
        }
        let (p1, p2) = (&model.piece1.derivs, &model.piece2.derivs);
        let memory = self.apply_from(|k, s| p2[k].eval(s) - p1[k].eval(s), model.breakpoint, t);
        Ok(left + memory)
    }
}

/// A polynomial with its first two derivatives precomputed.
#[derive(Debug, Clone)]
pub struct PreparedPoly {
    derivs: [PolyModel; 3],
    domain: [f64; 2],
}

impl PreparedPoly {
    pub fn new(model: &PolyModel) -> Self {
        let d1 = model.derivative();
        let d2 = d1.derivative();
        PreparedPoly {
            derivs: [model.clone(), d1, d2],
            domain: model.domain,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivs[0].eval(t)
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }
}

#[derive(Debug, Clone)]
pub struct PreparedPiecewise {
    piece1: PreparedPoly,
    piece2: PreparedPoly,
    breakpoint: f64,
    guard: f64,
}

impl PreparedPiecewise {
    pub fn new(model: &PiecewisePolyModel) -> Self {
        let [lo, hi] = model.domain();
        let span = hi.max(hi - lo);
        PreparedPiecewise {
            piece1: PreparedPoly::new(&model.piece1),
            piece2: PreparedPoly::new(&model.piece2),
            breakpoint: model.breakpoint,
            guard: singular_guard(span),
        }
    }

    pub fn breakpoint(&self) -> f64 {
        self.breakpoint
    }

    pub fn guard_width(&self) -> f64 {
        self.guard
    }

    pub fn domain(&self) -> [f64; 2] {
        [self.piece1.domain[0], self.piece2.domain[1]]
    }

    fn guard(&self, t: f64) -> Result<()> {
        if (t - self.breakpoint).abs() < self.guard {
            return Err(Error::Singularity {
                t,
                vertex: self.breakpoint,
                guard: self.guard,
            });
        }
        Ok(())
    }
}

/// Half-width of the refused neighbourhood around the vertex time.
pub fn singular_guard(t_max: f64) -> f64 {
    (1e-6 * t_max).max(1e-6)
}

fn check_time(t: f64, domain: [f64; 2]) -> Result<()> {
    let hi = domain[1] + 1e-12 * domain[1].abs().max(1.0);
    if !(t > 0.0 && t <= hi) {
        return Err(Error::Domain {
            t,
            lo: 0.0,
            hi: domain[1],
        });
    }
    Ok(())
}

/// `D^α` of a single polynomial at `t`.
pub fn rl_poly(model: &PolyModel, alpha: f64, t: f64) -> Result<f64> {
    check_time(t, model.domain)?;
    let op = RlOperator::new(alpha)?;
    Ok(op.apply_poly(&PreparedPoly::new(model), t))
}

/// `D^α` of a two-piece polynomial at `t`, including the memory of piece 1
/// for `t > T`. Refuses `t` within [`singular_guard`] of `T`.
pub fn rl_piecewise(model: &PiecewisePolyModel, alpha: f64, t: f64) -> Result<f64> {
    check_time(t, model.domain())?;
    let op = RlOperator::new(alpha)?;
    op.apply_piecewise(&PreparedPiecewise::new(model), t)
}

/// Grünwald–Letnikov approximation `h^-α Σ_k (-1)^k C(α, k) f(t - k h)`.
/// The step is adjusted down so the stencil lands exactly on 0.
pub fn gl_oracle<F>(f: F, alpha: f64, t: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(t > 0.0 && h > 0.0) || h > t / 100.0 {
        return Err(Error::Parameter(format!("step {h} too large for t = {t}")));
    }
    let n = (t / h).ceil() as usize;
    let step = t / n as f64;
    let mut weight = 1.0;
    let mut sum = f(t);
    for k in 1..=n {
        weight *= 1.0 - (alpha + 1.0) / k as f64;
        sum += weight * f(t - k as f64 * step);
    }
    Ok(sum / step.powf(alpha))
}
