//! Degree of memristance on `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::cv_data::CvRun;
use crate::error::{Error, Result};

/// Allowed `|v_end - v_start|` as a fraction of the peak-to-peak voltage.
pub const CLOSURE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub lobe_weight: f64,
    pub pinch_weight: f64,
    pub frequency_weight: f64,
    /// Pinch and lobe count only while the lobe area exceeds this.
    pub lobe_gate: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            lobe_weight: 0.5,
            pinch_weight: 0.3,
            frequency_weight: 0.2,
            lobe_gate: 0.01,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.lobe_weight, self.pinch_weight, self.frequency_weight];
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("score weights {w:?} must be >= 0 and sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub lobe_area_norm: f64,
    pub pinch_closeness: f64,
    pub frequency_divergence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristanceScore {
    pub value: f64,
    /// Components as weighted into `value`, after gating.
    pub components: ScoreComponents,
    /// Components before gating.
    pub raw: ScoreComponents,
}

/// Lobe area and pinch closeness of one closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Loop {
    lobe: f64,
    pinch: f64,
}

fn extent(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn measure(run: &CvRun) -> Result<Loop> {
    let (v, i) = (&run.voltage, &run.current);
    let n = v.len();
    let v_pp = extent(v);
    let (start, end) = (v[0], v[n - 1]);
    if (end - start).abs() > CLOSURE_TOLERANCE * v_pp {
        return Err(Error::OpenSweep { start, end });
    }
    let i_max = i.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let i_pp = extent(i);

    // ∮ i dv split by the sign of v, each lobe taken in magnitude
    let (mut pos, mut neg) = (0.0, 0.0);
    for k in 0..n - 1 {
        let area = 0.5 * (i[k] + i[k + 1]) * (v[k + 1] - v[k]);
        if v[k] + v[k + 1] >= 0.0 {
            pos += area;
        } else {
            neg += area;
        }
    }
    // a pinched lobe of peak (V, I) under an ohmic on-branch encloses at most
    // the triangle V I / 2
    let bound = 0.25 * v_pp * i_pp;
    let lobe = if bound > 0.0 {
        ((pos.abs() + neg.abs()) / bound).min(1.0)
    } else {
        0.0
    };

    // current where the voltage crosses zero, interpolated between samples
    let mut at_zero = 0.0f64;
    for k in 0..n {
        if v[k] == 0.0 {
            at_zero = at_zero.max(i[k].abs());
        }
        if k + 1 < n && v[k] * v[k + 1] < 0.0 {
            let s = v[k] / (v[k] - v[k + 1]);
            at_zero = at_zero.max((i[k] + s * (i[k + 1] - i[k])).abs());
        }
    }
    let pinch = if i_max > 0.0 { 1.0 - at_zero / i_max } else { 1.0 };
    Ok(Loop {
        lobe,
        pinch: pinch.clamp(0.0, 1.0),
    })
}

fn combine(lobe: f64, pinch: f64, frequency: f64, cfg: &ScoreConfig) -> MemristanceScore {
    let raw = ScoreComponents {
        lobe_area_norm: lobe,
        pinch_closeness: pinch,
        frequency_divergence: frequency,
    };
    let open = lobe > cfg.lobe_gate;
    let components = ScoreComponents {
        // an open loop is a lobe only as far as it is pinched
        lobe_area_norm: lobe * pinch,
        pinch_closeness: if open { pinch } else { 0.0 },
        frequency_divergence: if open { frequency } else { 0.0 },
    };
    let value = cfg.lobe_weight * components.lobe_area_norm
        + cfg.pinch_weight * components.pinch_closeness
        + cfg.frequency_weight * components.frequency_divergence;
    MemristanceScore {
        value: value.clamp(0.0, 1.0),
        components,
        raw,
    }
}

/// Score of a single closed sweep; the frequency component is 0.
pub fn memristance_degree(run: &CvRun) -> Result<MemristanceScore> {
    memristance_degree_with(run, &ScoreConfig::default())
}

pub fn memristance_degree_with(run: &CvRun, cfg: &ScoreConfig) -> Result<MemristanceScore> {
    cfg.validate()?;
    let m = measure(run)?;
    Ok(combine(m.lobe, m.pinch, 0.0, cfg))
}

/// Score over runs taken at different sweep rates: mean lobe and pinch,
/// with the frequency component the relative spread of lobe areas.
pub fn memristance_degree_runs(runs: &[CvRun], cfg: &ScoreConfig) -> Result<MemristanceScore> {
    cfg.validate()?;
    if runs.is_empty() {
        return Err(Error::Parameter("no runs to score".into()));
    }
    let loops = runs.iter().map(measure).collect::<Result<Vec<_>>>()?;
    let count = loops.len() as f64;
    let lobe = loops.iter().map(|l| l.lobe).sum::<f64>() / count;
    let pinch = loops.iter().map(|l| l.pinch).sum::<f64>() / count;
    let hi = loops.iter().map(|l| l.lobe).fold(0.0f64, f64::max);
    let lo = loops.iter().map(|l| l.lobe).fold(f64::INFINITY, f64::min);
    let frequency = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    Ok(combine(lobe, pinch, frequency, cfg))
}
