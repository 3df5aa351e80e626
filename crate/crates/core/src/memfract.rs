//! Memfractance curves, singularity loci, order search and classification
//! on the memfractance plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv_data::CvRun;
use crate::error::{Error, Result};
use crate::fraccalc::{FracOrderPair, PreparedPiecewise, PreparedPoly, RlOperator};
use crate::polyfit::{fit_stats, FitStats, PiecewisePolyModel, PolyModel};

/// Points `|denominator| < DEFAULT_SINGULAR_DELTA * max|denominator|` are singular.
pub const DEFAULT_SINGULAR_DELTA: f64 = 1e-9;
/// Numerator and denominator zeros match within this fraction of `t_max`.
pub const ZERO_MATCH_TOLERANCE: f64 = 1e-3;
/// Couples whose range is within this fraction of `|median F|` of the best
/// range are treated as tied.
pub const NEAR_TIE: f64 = 1e-6;
/// A curve whose relative range is below this is constant.
pub const CONSTANT_TOLERANCE: f64 = 1e-6;
const SCAN_CELLS: usize = 2000;
const BISECTION_LIMIT: usize = 200;

/// A fitted voltage or current signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalModel {
    Single(PolyModel),
    Piecewise(PiecewisePolyModel),
}

impl SignalModel {
    pub fn domain(&self) -> [f64; 2] {
        match self {
            SignalModel::Single(m) => m.domain,
            SignalModel::Piecewise(m) => m.domain(),
        }
    }

    pub fn breakpoint(&self) -> Option<f64> {
        match self {
            SignalModel::Single(_) => None,
            SignalModel::Piecewise(m) => Some(m.breakpoint),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SignalModel::Single(m) => m.eval(t),
            SignalModel::Piecewise(m) => m.eval(t),
        }
    }

    pub fn antiderivative(&self) -> SignalModel {
        match self {
            SignalModel::Single(m) => SignalModel::Single(m.antiderivative()),
            SignalModel::Piecewise(m) => SignalModel::Piecewise(m.antiderivative()),
        }
    }

    pub fn scaled(&self, factor: f64) -> SignalModel {
        match self {
            SignalModel::Single(m) => SignalModel::Single(m.scaled(factor)),
            SignalModel::Piecewise(m) => SignalModel::Piecewise(m.scaled(factor)),
        }
    }
}

impl From<PolyModel> for SignalModel {
    fn from(m: PolyModel) -> Self {
        SignalModel::Single(m)
    }
}

impl From<PiecewisePolyModel> for SignalModel {
    fn from(m: PiecewisePolyModel) -> Self {
        SignalModel::Piecewise(m)
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Single(PreparedPoly),
    Piecewise(PreparedPiecewise),
}

impl Prepared {
    fn new(model: &SignalModel) -> Self {
        match model {
            SignalModel::Single(m) => Prepared::Single(PreparedPoly::new(m)),
            SignalModel::Piecewise(m) => Prepared::Piecewise(PreparedPiecewise::new(m)),
        }
    }

    fn rl(&self, op: &RlOperator, t: f64) -> Result<f64> {
        match self {
            Prepared::Single(m) => Ok(op.apply_poly(m, t)),
            Prepared::Piecewise(m) => op.apply_piecewise(m, t),
        }
    }

    fn vertex(&self) -> Option<(f64, f64)> {
        match self {
            Prepared::Single(_) => None,
            Prepared::Piecewise(m) => Some((m.breakpoint(), m.guard_width())),
        }
    }
}

/// Uniform grid of `points` over `domain`, without `t <= 0` and without the
/// guarded neighbourhood of the breakpoint.
pub fn evaluation_grid(
    domain: [f64; 2],
    breakpoint: Option<(f64, f64)>,
    points: usize,
) -> Vec<f64> {
    let [lo, hi] = domain;
    let last = (points.max(2) - 1) as f64;
    (0..points.max(2))
        .map(|k| lo + (hi - lo) * (k as f64 / last))
        .filter(|&t| t > 0.0)
        .filter(|&t| breakpoint.is_none_or(|(vertex, guard)| (t - vertex).abs() >= guard))
        .collect()
}

/// Flux and charge of a model pair, ready for repeated fractional
/// differentiation.
#[derive(Debug, Clone)]
pub struct MemfractanceProblem {
    flux: Prepared,
    charge: Prepared,
    domain: [f64; 2],
}

impl MemfractanceProblem {
    pub fn new(v_model: &SignalModel, i_model: &SignalModel) -> Result<Self> {
        let (dv, di) = (v_model.domain(), i_model.domain());
        let span = (dv[1] - dv[0]).abs().max(dv[1].abs());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * span;
        if !(close(dv[0], di[0]) && close(dv[1], di[1])) {
            return Err(Error::Shape(format!(
                "voltage domain {dv:?} differs from current domain {di:?}"
            )));
        }
        match (v_model.breakpoint(), i_model.breakpoint()) {
            (None, None) => {}
            (Some(a), Some(b)) if close(a, b) => {}
            (a, b) => {
                return Err(Error::Shape(format!(
                    "breakpoints differ: voltage {a:?}, current {b:?}"
                )))
            }
        }
        Ok(MemfractanceProblem {
            flux: Prepared::new(&v_model.antiderivative()),
            charge: Prepared::new(&i_model.antiderivative()),
            domain: dv,
        })
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn t_max(&self) -> f64 {
        self.domain[1]
    }

    /// Breakpoint and guard half-width for piecewise models.
    pub fn vertex(&self) -> Option<(f64, f64)> {
        self.flux.vertex()
    }

    pub fn grid(&self, points: usize) -> Vec<f64> {
        evaluation_grid(self.domain, self.vertex(), points)
    }

    /// `D^α φ(t)`.
    pub fn numerator(&self, alpha: f64, t: f64) -> Result<f64> {
        self.flux.rl(&RlOperator::new(alpha)?, t)
    }

    /// `D^α q(t)`.
    pub fn denominator(&self, alpha: f64, t: f64) -> Result<f64> {
        self.charge.rl(&RlOperator::new(alpha)?, t)
    }

    fn profile(&self, side: Side, alpha: f64, grid: &[f64]) -> Result<Profile> {
        let op = RlOperator::new(alpha)?;
        let target = match side {
            Side::Numerator => &self.flux,
            Side::Denominator => &self.charge,
        };
        let values = grid
            .iter()
            .map(|&t| target.rl(&op, t))
            .collect::<Result<Vec<_>>>()?;
        let zeros = scan_zeros(
            |t| target.rl(&op, t),
            grid,
            &values,
            self.vertex().map(|v| v.0),
            1e-9 * self.t_max(),
        )?;
        Ok(Profile {
            alpha,
            values,
            zeros,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Numerator,
    Denominator,
}

#[derive(Debug, Clone)]
struct Profile {
    alpha: f64,
    values: Vec<f64>,
    zeros: Vec<f64>,
}

/// Sign-change roots of `f` over consecutive grid cells, refined by
/// bisection to `tol`. Cells straddling the vertex are skipped.
fn scan_zeros<F>(
    f: F,
    grid: &[f64],
    values: &[f64],
    vertex: Option<f64>,
    tol: f64,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut zeros = Vec::new();
    for k in 0..grid.len() {
        if values[k] == 0.0 {
            zeros.push(grid[k]);
            continue;
        }
        let Some(&b) = grid.get(k + 1) else { break };
        let a = grid[k];
        if vertex.is_some_and(|v| a < v && b > v) {
            continue;
        }
        let (fa, fb) = (values[k], values[k + 1]);
        if fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (a, b, fa);
        for _ in 0..BISECTION_LIMIT {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        zeros.push(0.5 * (lo + hi));
    }
    Ok(zeros)
}

/// Roots of a fractional derivative in time, for one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroLocus {
    pub parameter: f64,
    pub zeros: Vec<f64>,
}

/// Zeros of `D^α2 q` on `interval`, `q` being the antiderivative of
/// `i_model`.
pub fn denominator_zeros(
    i_model: &SignalModel,
    alpha2: f64,
    interval: [f64; 2],
) -> Result<ZeroLocus> {
    let [lo, hi] = i_model.domain();
    if !(interval[0] >= lo && interval[1] <= hi && interval[1] > interval[0]) {
        return Err(Error::Domain {
            t: if interval[0] < lo { interval[0] } else { interval[1] },
            lo,
            hi,
        });
    }
    let charge = Prepared::new(&i_model.antiderivative());
    let op = RlOperator::new(alpha2)?;
    let grid = evaluation_grid(interval, charge.vertex(), SCAN_CELLS + 1);
    let values = grid
        .iter()
        .map(|&t| charge.rl(&op, t))
        .collect::<Result<Vec<_>>>()?;
    let zeros = scan_zeros(
        |t| charge.rl(&op, t),
        &grid,
        &values,
        charge.vertex().map(|v| v.0),
        1e-9 * hi,
    )?;
    Ok(ZeroLocus {
        parameter: alpha2,
        zeros,
    })
}

/// Sampled `F = D^α1 φ / D^α2 q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemfractanceCurve {
    pub orders: FracOrderPair,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Grid points dropped because the denominator vanishes there.
    pub singular_points: Vec<f64>,
    /// Sign-change roots of the denominator.
    pub denominator_zeros: Vec<f64>,
    pub range_value: f64,
}

impl MemfractanceCurve {
    pub fn median(&self) -> f64 {
        median(&self.values)
    }

    /// `range / |median|`, infinite for a zero median with nonzero range.
    pub fn relative_range(&self) -> f64 {
        relative(self.range_value, self.median())
    }

    pub fn is_constant(&self) -> bool {
        self.relative_range() < CONSTANT_TOLERANCE
    }
}

fn relative(range: f64, median: f64) -> f64 {
    if range == 0.0 {
        0.0
    } else {
        range / median.abs()
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

// Retained quotients and their extent for one couple.
fn quotient(num: &[f64], den: &[f64], delta: f64) -> (Vec<usize>, f64) {
    let scale = den.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let threshold = delta * scale;
    let kept: Vec<usize> = (0..den.len())
        .filter(|&k| scale > 0.0 && den[k].abs() >= threshold)
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &k in &kept {
        let f = num[k] / den[k];
        lo = lo.min(f);
        hi = hi.max(f);
    }
    let range = if kept.is_empty() { f64::NAN } else { hi - lo };
    (kept, range)
}

/// Memfractance of a model pair on `grid` for one couple of orders.
pub fn memfractance(
    v_model: &SignalModel,
    i_model: &SignalModel,
    orders: FracOrderPair,
    grid: &[f64],
) -> Result<MemfractanceCurve> {
    let problem = MemfractanceProblem::new(v_model, i_model)?;
    memfractance_on(&problem, orders, grid, DEFAULT_SINGULAR_DELTA)
}

/// As [`memfractance`], reusing prepared models and a chosen threshold.
pub fn memfractance_on(
    problem: &MemfractanceProblem,
    orders: FracOrderPair,
    grid: &[f64],
    singular_delta: f64,
) -> Result<MemfractanceCurve> {
    let [lo, hi] = problem.domain();
    if let Some(&t) = grid.iter().find(|&&t| !(t > 0.0 && t >= lo && t <= hi)) {
        return Err(Error::Domain { t, lo, hi });
    }
    let num = problem.profile(Side::Numerator, orders.alpha1, grid)?;
    let den = problem.profile(Side::Denominator, orders.alpha2, grid)?;
    curve_from_profiles(&num, &den, grid, orders, singular_delta)
}

fn curve_from_profiles(
    num: &Profile,
    den: &Profile,
    grid: &[f64],
    orders: FracOrderPair,
    singular_delta: f64,
) -> Result<MemfractanceCurve> {
    let (kept, range_value) = quotient(&num.values, &den.values, singular_delta);
    if kept.is_empty() {
        return Err(Error::Degenerate(format!(
            "denominator vanishes on the whole grid for alpha2 = {}",
            orders.alpha2
        )));
    }
    let mut singular_points = Vec::new();
    let mut next = kept.iter().peekable();
    for (k, &t) in grid.iter().enumerate() {
        if next.peek() == Some(&&k) {
            next.next();
        } else {
            singular_points.push(t);
        }
    }
    Ok(MemfractanceCurve {
        orders,
        t_grid: kept.iter().map(|&k| grid[k]).collect(),
        values: kept.iter().map(|&k| num.values[k] / den.values[k]).collect(),
        singular_points,
        denominator_zeros: den.zeros.clone(),
        range_value,
    })
}

/// Search settings for [`optimize_orders`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alpha_step: f64,
    pub grid_points: usize,
    pub singular_delta: f64,
    pub refine: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha_step: 0.01,
            grid_points: 2001,
            singular_delta: DEFAULT_SINGULAR_DELTA,
            refine: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_step > 0.0 && self.alpha_step <= 0.1) {
            return Err(Error::Parameter(format!(
                "alpha step {} must lie in (0, 0.1]",
                self.alpha_step
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::Parameter(format!(
                "grid of {} points is too coarse",
                self.grid_points
            )));
        }
        if !(self.singular_delta >= 0.0 && self.singular_delta < 1.0) {
            return Err(Error::Parameter(format!(
                "singular threshold {} must lie in [0, 1)",
                self.singular_delta
            )));
        }
        Ok(())
    }
}

/// Orders `0, step, 2 step, ..` up to 2, built from integer ratios when the
/// step divides 1 so that grid values are exact decimals.
fn alpha_lattice(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let per_unit = (1.0 / step).round();
    let exact = ((1.0 / step) - per_unit).abs() < 1e-9;
    let at = |n: i64| {
        if exact {
            n as f64 / per_unit
        } else {
            n as f64 * step
        }
    };
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first.max(0)..=last)
        .map(at)
        .filter(|a| *a <= 2.0 + 1e-12)
        .map(|a| a.min(2.0))
        .collect()
}

/// Range and admissibility of one couple in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupleRange {
    pub alpha1: f64,
    pub alpha2: f64,
    pub admissible: bool,
    /// `None` when every grid point is singular.
    pub range: Option<f64>,
}

/// One rectangular block of the order search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub step: f64,
    pub numerator_loci: Vec<ZeroLocus>,
    pub denominator_loci: Vec<ZeroLocus>,
    /// Row-major in `alpha1`, then `alpha2`.
    pub couples: Vec<CoupleRange>,
}

impl ScanResult {
    pub fn admissible(&self) -> impl Iterator<Item = &CoupleRange> {
        self.couples.iter().filter(|c| c.admissible)
    }
}

/// Optimum of the order search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderOptimum {
    pub orders: FracOrderPair,
    pub range: f64,
    /// Number of couples within [`NEAR_TIE`] of the optimum in the final pass.
    pub ties: usize,
    pub coarse: ScanResult,
    pub refined: Option<ScanResult>,
    pub curve: MemfractanceCurve,
}

/// A denominator zero is removable when a numerator zero lies within `tau`.
/// A couple is admissible when all its denominator zeros are removable.
fn removable(den_zeros: &[f64], num_zeros: &[f64], tau: f64) -> bool {
    den_zeros
        .iter()
        .all(|z| num_zeros.iter().any(|w| (z - w).abs() <= tau))
}

fn scan(
    problem: &MemfractanceProblem,
    grid: &[f64],
    alpha1: &[f64],
    alpha2: &[f64],
    step: f64,
    cfg: &SearchConfig,
) -> Result<(ScanResult, Vec<Profile>, Vec<Profile>)> {
    let num: Vec<Profile> = alpha1
        .par_iter()
        .map(|&a| problem.profile(Side::Numerator, a, grid))
        .collect::<Result<_>>()?;
    let den: Vec<Profile> = alpha2
        .par_iter()
        .map(|&a| problem.profile(Side::Denominator, a, grid))
        .collect::<Result<_>>()?;
    let tau = ZERO_MATCH_TOLERANCE * problem.t_max();
    let couples: Vec<CoupleRange> = num
        .par_iter()
        .flat_map_iter(|n| {
            den.iter().map(move |d| {
                let (kept, range) = quotient(&n.values, &d.values, cfg.singular_delta);
                CoupleRange {
                    alpha1: n.alpha,
                    alpha2: d.alpha,
                    admissible: removable(&d.zeros, &n.zeros, tau),
                    range: (!kept.is_empty() && range.is_finite()).then_some(range),
                }
            })
        })
        .collect();
    let locus = |p: &Profile| ZeroLocus {
        parameter: p.alpha,
        zeros: p.zeros.clone(),
    };
    let result = ScanResult {
        step,
        numerator_loci: num.iter().map(locus).collect(),
        denominator_loci: den.iter().map(locus).collect(),
        couples,
    };
    Ok((result, num, den))
}

/// Best admissible couple of a scan: minimum range, then the median (in
/// `(α1, α2)` order) of all couples within [`NEAR_TIE`] of it.
fn select(
    result: &ScanResult,
    num: &[Profile],
    den: &[Profile],
    grid: &[f64],
    delta: f64,
) -> Option<(usize, usize, usize)> {
    let width = den.len();
    let scored: Vec<(usize, f64)> = result
        .couples
        .iter()
        .enumerate()
        .filter(|(_, c)| c.admissible)
        .filter_map(|(k, c)| c.range.map(|r| (k, r)))
        .collect();
    let best = scored
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
    let (i, j) = (best.0 / width, best.0 % width);
    let orders = FracOrderPair::new(num[i].alpha, den[j].alpha).ok()?;
    let curve = curve_from_profiles(&num[i], &den[j], grid, orders, delta).ok()?;
    let slack = NEAR_TIE * curve.median().abs();
    // couples are row-major in (α1, α2), so index order is the tie order
    let tied: Vec<usize> = scored
        .iter()
        .filter(|(_, r)| *r <= best.1 + slack)
        .map(|(k, _)| *k)
        .collect();
    let pick = tied[(tied.len() - 1) / 2];
    Some((pick / width, pick % width, tied.len()))
}

/// Admissible couples on the full `[0, 2]^2` lattice of the given step.
pub fn admissible_couples(
    v_model: &SignalModel,
    i_model: &SignalModel,
    alpha_grid_step: f64,
) -> Result<Vec<(f64, f64)>> {
    let cfg = SearchConfig {
        alpha_step: alpha_grid_step,
        ..SearchConfig::default()
    };
    cfg.validate()?;
    let problem = MemfractanceProblem::new(v_model, i_model)?;
    let grid = problem.grid(cfg.grid_points);
    let alphas = alpha_lattice(alpha_grid_step, 0.0, 2.0);
    let (result, _, _) = scan(&problem, &grid, &alphas, &alphas, alpha_grid_step, &cfg)?;
    Ok(result.admissible().map(|c| (c.alpha1, c.alpha2)).collect())
}

/// Admissible couple of minimum memfractance range, searched on a coarse
/// lattice and then once more at a tenth of the step around the winner.
pub fn optimize_orders(
    v_model: &SignalModel,
    i_model: &SignalModel,
    cfg: &SearchConfig,
) -> Result<OrderOptimum> {
    cfg.validate()?;
    let problem = MemfractanceProblem::new(v_model, i_model)?;
    optimize_on(&problem, cfg)
}

pub fn optimize_on(problem: &MemfractanceProblem, cfg: &SearchConfig) -> Result<OrderOptimum> {
    let grid = problem.grid(cfg.grid_points);
    if grid.is_empty() {
        return Err(Error::Degenerate("empty evaluation grid".into()));
    }
    let alphas = alpha_lattice(cfg.alpha_step, 0.0, 2.0);
    let (coarse, num, den) = scan(problem, &grid, &alphas, &alphas, cfg.alpha_step, cfg)?;
    let (i, j, ties) = select(&coarse, &num, &den, &grid, cfg.singular_delta).ok_or(
        Error::NoSolution {
            step: cfg.alpha_step,
        },
    )?;
    let mut best = (num[i].clone(), den[j].clone(), ties);
    let mut refined = None;
    if cfg.refine {
        let fine = cfg.alpha_step / 10.0;
        let around = |a: f64| alpha_lattice(fine, a - cfg.alpha_step, a + cfg.alpha_step);
        let (a1, a2) = (around(num[i].alpha), around(den[j].alpha));
        let (result, fnum, fden) = scan(problem, &grid, &a1, &a2, fine, cfg)?;
        if let Some((fi, fj, fties)) = select(&result, &fnum, &fden, &grid, cfg.singular_delta) {
            best = (fnum[fi].clone(), fden[fj].clone(), fties);
        }
        refined = Some(result);
    }
    let (n, d, ties) = best;
    let orders = FracOrderPair::new(n.alpha, d.alpha)?;
    let curve = curve_from_profiles(&n, &d, &grid, orders, cfg.singular_delta)?;
    Ok(OrderOptimum {
        orders,
        range: curve.range_value,
        ties,
        coarse,
        refined,
        curve,
    })
}

/// A labelled point of the memfractance plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeNode {
    pub label: String,
    pub at: [f64; 2],
    /// Element the node reduces to when the memfractance is constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memoryless: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeTriangle {
    pub name: String,
    /// Indices into the node list.
    pub vertices: [usize; 3],
}

/// Labelled triangulation of `[0, 2]^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nodes: Vec<LatticeNode>,
    pub triangles: Vec<LatticeTriangle>,
}

impl Default for Lattice {
    /// Node `(a, b)` pairs `v` differentiated `a - 2` times with `i`
    /// differentiated `b - 2` times; each unit square is cut along its
    /// rising diagonal.
    fn default() -> Self {
        let names = [
            // (label, memoryless counterpart) at (a, b), b-major
            ("2nd-order memristor", "resistor"),
            ("memcapacitor", "capacitor"),
            ("negative-resistor", "negative-resistor"),
            ("meminductor", "inductor"),
            ("memristor", "resistor"),
            ("capacitor", "capacitor"),
            ("negative-conductor", "negative-conductor"),
            ("inductor", "inductor"),
            ("resistor", "resistor"),
        ];
        let nodes = names
            .iter()
            .enumerate()
            .map(|(k, (label, plain))| LatticeNode {
                label: label.to_string(),
                at: [(k % 3) as f64, (k / 3) as f64],
                memoryless: (label != plain).then(|| plain.to_string()),
            })
            .collect();
        let id = |a: usize, b: usize| 3 * b + a;
        let mut triangles = Vec::new();
        for b in 0..2 {
            for a in 0..2 {
                triangles.push([id(a, b), id(a + 1, b), id(a + 1, b + 1)]);
                triangles.push([id(a, b), id(a, b + 1), id(a + 1, b + 1)]);
            }
        }
        // the three cells named in the identification literature come first
        let named = [
            [id(1, 0), id(2, 0), id(2, 1)],
            [id(1, 1), id(2, 1), id(2, 2)],
            [id(0, 0), id(1, 0), id(1, 1)],
        ];
        let rest = triangles.into_iter().filter(|t| !named.contains(t));
        let triangles = named
            .into_iter()
            .chain(rest)
            .enumerate()
            .map(|(k, vertices)| LatticeTriangle {
                name: format!("T{}", k + 1),
                vertices,
            })
            .collect();
        Lattice { nodes, triangles }
    }
}

impl Lattice {
    pub fn from_json(text: &str) -> Result<Self> {
        let lattice: Lattice =
            serde_json::from_str(text).map_err(|e| Error::Parameter(format!("lattice: {e}")))?;
        lattice.validate()?;
        Ok(lattice)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.triangles.is_empty() {
            return Err(Error::Parameter("lattice needs nodes and triangles".into()));
        }
        for tri in &self.triangles {
            if tri.vertices.iter().any(|&v| v >= self.nodes.len()) {
                return Err(Error::Parameter(format!(
                    "triangle {} refers to a missing node",
                    tri.name
                )));
            }
            if self.area2(tri).abs() < 1e-12 {
                return Err(Error::Parameter(format!("triangle {} is degenerate", tri.name)));
            }
        }
        Ok(())
    }

    fn area2(&self, tri: &LatticeTriangle) -> f64 {
        let [a, b, c] = tri.vertices.map(|v| self.nodes[v].at);
        (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    }

    fn barycentric(&self, tri: &LatticeTriangle, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = tri.vertices.map(|v| self.nodes[v].at);
        let area = self.area2(tri);
        let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / area;
        let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / area;
        [l1, l2, 1.0 - l1 - l2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleHit {
    pub name: String,
    pub labels: [String; 3],
    pub vertices: [[f64; 2]; 3],
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestElement {
    pub label: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub orders: FracOrderPair,
    pub containing_triangle: Option<TriangleHit>,
    /// All lattice labels by increasing distance.
    pub nearest_elements: Vec<NearestElement>,
    /// Mem-elements were relabelled to their memoryless counterparts.
    pub memoryless: bool,
}

impl ClassificationResult {
    pub fn nearest(&self) -> Option<&str> {
        self.nearest_elements.first().map(|n| n.label.as_str())
    }
}

const BARYCENTRIC_TOLERANCE: f64 = 1e-12;

/// Locates `orders` on the lattice.
pub fn classify(orders: FracOrderPair, lattice: &Lattice) -> Result<ClassificationResult> {
    let p = [orders.alpha1, orders.alpha2];
    for x in p {
        if !(0.0..=2.0).contains(&x) {
            return Err(Error::Domain { t: x, lo: 0.0, hi: 2.0 });
        }
    }
    let containing_triangle = lattice.triangles.iter().find_map(|tri| {
        let bary = lattice.barycentric(tri, p);
        bary.iter()
            .all(|l| *l >= -BARYCENTRIC_TOLERANCE)
            .then(|| TriangleHit {
                name: tri.name.clone(),
                labels: tri.vertices.map(|v| lattice.nodes[v].label.clone()),
                vertices: tri.vertices.map(|v| lattice.nodes[v].at),
                barycentric: bary,
            })
    });
    let mut nearest_elements: Vec<NearestElement> = lattice
        .nodes
        .iter()
        .map(|n| NearestElement {
            label: n.label.clone(),
            distance: (n.at[0] - p[0]).hypot(n.at[1] - p[1]),
        })
        .collect();
    nearest_elements.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(ClassificationResult {
        orders,
        containing_triangle,
        nearest_elements,
        memoryless: false,
    })
}

/// [`classify`], relabelling mem-elements by their memoryless counterparts
/// when the optimal memfractance is constant.
pub fn classify_curve(curve: &MemfractanceCurve, lattice: &Lattice) -> Result<ClassificationResult> {
    let mut result = classify(curve.orders, lattice)?;
    if curve.is_constant() {
        let plain = |label: &str| {
            lattice
                .nodes
                .iter()
                .find(|n| n.label == label)
                .and_then(|n| n.memoryless.clone())
                .unwrap_or_else(|| label.to_string())
        };
        let mut seen = Vec::new();
        result.nearest_elements = result
            .nearest_elements
            .into_iter()
            .filter_map(|n| {
                let label = plain(&n.label);
                if seen.contains(&label) {
                    return None;
                }
                seen.push(label.clone());
                Some(NearestElement {
                    label,
                    distance: n.distance,
                })
            })
            .collect();
        result.memoryless = true;
    }
    Ok(result)
}

/// Model predictions against the data they were fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub voltage_stats: FitStats,
    pub current_stats: FitStats,
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub voltage_model: Vec<f64>,
    pub current: Vec<f64>,
    pub current_model: Vec<f64>,
}

pub fn reconstruct_compare(
    v_model: &SignalModel,
    i_model: &SignalModel,
    run: &CvRun,
) -> Result<Reconstruction> {
    for model in [v_model, i_model] {
        let [lo, hi] = model.domain();
        let slack = 1e-9 * (hi - lo);
        for &t in [run.time[0], run.time[run.len() - 1]].iter() {
            if t < lo - slack || t > hi + slack {
                return Err(Error::Domain { t, lo, hi });
            }
        }
    }
    let voltage_model: Vec<f64> = run.time.iter().map(|&t| v_model.eval(t)).collect();
    let current_model: Vec<f64> = run.time.iter().map(|&t| i_model.eval(t)).collect();
    Ok(Reconstruction {
        voltage_stats: fit_stats(&run.voltage, &voltage_model)?,
        current_stats: fit_stats(&run.current, &current_model)?,
        time: run.time.clone(),
        voltage: run.voltage.clone(),
        voltage_model,
        current: run.current.clone(),
        current_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::gamma;
    use crate::polyfit::fit_poly;

    fn poly(c: &[f64], hi: f64) -> SignalModel {
        PolyModel::from_raw(c, [0.0, hi]).unwrap().into()
    }

    #[test]
    fn constructed_linear_root() {
        let locus = denominator_zeros(&poly(&[-5.0, 1.0], 10.0), 1.0, [0.0, 10.0]).unwrap();
        assert_eq!(locus.zeros.len(), 1);
        assert!((locus.zeros[0] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn constructed_fractional_roots() {
        // D^α q = t^(1-α) (t - 2)(t - 7) for q = Σ c_j t^j
        let alpha = 0.5;
        let g = |j: f64| gamma(j + 1.0).unwrap() / gamma(j + 1.0 - alpha).unwrap();
        let (c1, c2, c3) = (14.0 / g(1.0), -9.0 / g(2.0), 1.0 / g(3.0));
        let current = poly(&[c1, 2.0 * c2, 3.0 * c3], 10.0);
        let locus = denominator_zeros(&current, alpha, [0.0, 10.0]).unwrap();
        assert_eq!(locus.zeros.len(), 2);
        assert!((locus.zeros[0] - 2.0).abs() < 1e-6);
        assert!((locus.zeros[1] - 7.0).abs() < 1e-6);
    }

    #[test]
    fn zero_voltage_gives_zero_curve() {
        let v = poly(&[0.0], 4.0);
        let i = poly(&[1.0, 1.0], 4.0);
        let grid = evaluation_grid([0.0, 4.0], None, 101);
        let curve = memfractance(&v, &i, FracOrderPair::new(0.5, 0.5).unwrap(), &grid).unwrap();
        assert!(curve.values.iter().all(|f| *f == 0.0));
        assert_eq!(curve.range_value, 0.0);
    }

    #[test]
    fn vanishing_denominator_is_degenerate() {
        let v = poly(&[1.0], 4.0);
        let i = poly(&[0.0], 4.0);
        let grid = evaluation_grid([0.0, 4.0], None, 11);
        let err = memfractance(&v, &i, FracOrderPair::new(1.0, 1.0).unwrap(), &grid);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn singular_points_recorded() {
        // i = t - 2 vanishes at a grid point
        let v = poly(&[1.0], 4.0);
        let i = poly(&[-2.0, 1.0], 4.0);
        let grid = evaluation_grid([0.0, 4.0], None, 101);
        let curve = memfractance(&v, &i, FracOrderPair::new(1.0, 1.0).unwrap(), &grid).unwrap();
        assert_eq!(curve.singular_points, vec![2.0]);
        assert_eq!(curve.t_grid.len(), 99);
        assert_eq!(curve.denominator_zeros, vec![2.0]);
    }

    #[test]
    fn proportional_models_admit_the_diagonal() {
        let i = poly(&[0.3, -1.0, 0.5, 0.02], 6.0);
        let v = match &i {
            SignalModel::Single(m) => SignalModel::Single(m.scaled(250.0)),
            _ => unreachable!(),
        };
        let couples = admissible_couples(&v, &i, 0.1).unwrap();
        for n in 0..=20 {
            let a = n as f64 / 10.0;
            assert!(couples.contains(&(a, a)), "missing ({a}, {a})");
        }
    }

    #[test]
    fn lattice_grid_is_exact() {
        let a = alpha_lattice(0.01, 0.0, 2.0);
        assert_eq!(a.len(), 201);
        assert_eq!(a[7], 0.07);
        assert_eq!(a[200], 2.0);
        let b = alpha_lattice(0.001, 1.43, 1.45);
        assert_eq!(b.len(), 21);
        assert_eq!(b[0], 1.43);
        assert_eq!(b[11], 1.441);
        let c = alpha_lattice(0.001, -0.01, 0.01);
        assert_eq!(c.len(), 11);
    }

    #[test]
    fn triangle_labels() {
        let lattice = Lattice::default();
        let cases = [
            ((1.441224116, 0.154232123), "T1", ["memcapacitor", "negative-resistor", "capacitor"]),
            ((1.971795208, 1.483238482), "T2", ["memristor", "capacitor", "resistor"]),
            ((0.171972381, 0.054935584), "T3", ["2nd-order memristor", "memcapacitor", "memristor"]),
        ];
        for ((a1, a2), name, labels) in cases {
            let hit = classify(FracOrderPair::new(a1, a2).unwrap(), &lattice)
                .unwrap()
                .containing_triangle
                .unwrap();
            assert_eq!(hit.name, name);
            assert_eq!(hit.labels, labels.map(String::from));
            assert!(hit.barycentric.iter().all(|l| *l >= -1e-12));
        }
    }

    #[test]
    fn classify_corners_and_outside() {
        let lattice = Lattice::default();
        let r = classify(FracOrderPair::new(2.0, 2.0).unwrap(), &lattice).unwrap();
        assert_eq!(r.nearest(), Some("resistor"));
        assert_eq!(r.nearest_elements[0].distance, 0.0);
        assert!(r.containing_triangle.is_some());
        let bad = FracOrderPair {
            alpha1: 2.5,
            alpha2: 0.0,
            m1: 3,
            m2: 0,
        };
        assert!(classify(bad, &lattice).is_err());
    }

    #[test]
    fn lattice_round_trips_through_json() {
        let lattice = Lattice::default();
        let text = serde_json::to_string(&lattice).unwrap();
        assert_eq!(Lattice::from_json(&text).unwrap(), lattice);
        assert!(Lattice::from_json(r#"{"nodes":[],"triangles":[]}"#).is_err());
    }

    #[test]
    fn reconstruction_of_own_predictions() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| (x * 1.3).sin()).collect();
        let (vm, _) = fit_poly(&t, &v, 8).unwrap();
        let v_hat: Vec<f64> = t.iter().map(|&x| vm.eval(x)).collect();
        let i_hat: Vec<f64> = v_hat.iter().map(|x| x * 1e-3).collect();
        let (vm2, _) = fit_poly(&t, &v_hat, 8).unwrap();
        let (im2, _) = fit_poly(&t, &i_hat, 8).unwrap();
        let run = CvRun::from_samples(t, v_hat, i_hat, "own").unwrap();
        let rec = reconstruct_compare(&vm2.into(), &im2.into(), &run).unwrap();
        assert!((rec.voltage_stats.r_squared - 1.0).abs() < 1e-12);
        assert!((rec.current_stats.r_squared - 1.0).abs() < 1e-12);
    }
}
