//! Synthetic sweeps and ideal-element responses.

use serde::{Deserialize, Serialize};

use crate::cv_data::CvRun;
use crate::error::{Error, Result};

/// A uniformly sampled voltage programme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub v_peak: f64,
    pub step_delay: f64,
}

impl Sweep {
    pub fn t_max(&self) -> f64 {
        self.time[self.time.len() - 1]
    }

    fn into_run(self, current: Vec<f64>, label: &str) -> Result<CvRun> {
        let range = (-self.v_peak.abs(), self.v_peak.abs());
        CvRun::new(self.time, self.voltage, current, range, self.step_delay, label)
    }
}

fn check_sweep(v_peak: f64, samples: usize, step_delay: f64) -> Result<()> {
    if samples < 5 {
        return Err(Error::Parameter(format!("sweep needs >= 5 samples, got {samples}")));
    }
    if !(v_peak >= 0.0 && v_peak.is_finite()) {
        return Err(Error::Parameter(format!("peak voltage {v_peak} must be >= 0")));
    }
    if !(step_delay > 0.0 && step_delay.is_finite()) {
        return Err(Error::Parameter(format!("step delay {step_delay} must be > 0")));
    }
    Ok(())
}

fn sample_times(samples: usize, step_delay: f64) -> Vec<f64> {
    (0..samples).map(|k| k as f64 * step_delay).collect()
}

/// `0 -> +V -> -V -> 0`, piecewise linear.
pub fn triangular_sweep(v_peak: f64, samples: usize, step_delay: f64) -> Result<Sweep> {
    check_sweep(v_peak, samples, step_delay)?;
    let last = (samples - 1) as f64;
    let voltage = (0..samples)
        .map(|k| {
            let phase = k as f64 / last;
            if phase <= 0.25 {
                4.0 * v_peak * phase
            } else if phase <= 0.75 {
                v_peak * (2.0 - 4.0 * phase)
            } else {
                v_peak * (4.0 * phase - 4.0)
            }
        })
        .collect();
    Ok(Sweep {
        time: sample_times(samples, step_delay),
        voltage,
        v_peak,
        step_delay,
    })
}

/// `0 -> +V -> 0` with a single vertex at mid-record.
pub fn tent_sweep(v_peak: f64, samples: usize, step_delay: f64) -> Result<Sweep> {
    check_sweep(v_peak, samples, step_delay)?;
    let last = (samples - 1) as f64;
    let voltage = (0..samples)
        .map(|k| {
            let phase = k as f64 / last;
            v_peak * (1.0 - 2.0 * (phase - 0.5).abs())
        })
        .collect();
    Ok(Sweep {
        time: sample_times(samples, step_delay),
        voltage,
        v_peak,
        step_delay,
    })
}

/// Linear dopant-drift memristor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorParams {
    pub r_on: f64,
    pub r_off: f64,
    /// film thickness, m
    pub thickness: f64,
    /// dopant mobility, m^2 / (V s)
    pub mobility: f64,
    /// initial doped width, m
    pub w0: f64,
    /// Joglekar window exponent; 0 disables the window
    pub window_exponent: u32,
}

impl Default for MemristorParams {
    fn default() -> Self {
        MemristorParams {
            r_on: 100.0,
            r_off: 16e3,
            thickness: 10e-9,
            mobility: 1e-14,
            w0: 5e-9,
            window_exponent: 0,
        }
    }
}

impl MemristorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_on > 0.0 && self.r_on <= self.r_off) {
            return Err(Error::Parameter(format!(
                "need 0 < R_on <= R_off, got {} and {}",
                self.r_on, self.r_off
            )));
        }
        if !(self.thickness > 0.0 && self.w0 > 0.0 && self.w0 < self.thickness) {
            return Err(Error::Parameter(format!(
                "need 0 < w0 < D, got w0 = {} D = {}",
                self.w0, self.thickness
            )));
        }
        if !(self.mobility >= 0.0 && self.mobility.is_finite()) {
            return Err(Error::Parameter(format!("mobility {} must be >= 0", self.mobility)));
        }
        Ok(())
    }

    pub fn memristance(&self, w: f64) -> f64 {
        let x = w / self.thickness;
        self.r_on * x + self.r_off * (1.0 - x)
    }

    fn window(&self, w: f64) -> f64 {
        if self.window_exponent == 0 {
            1.0
        } else {
            1.0 - (2.0 * w / self.thickness - 1.0).powi(2 * self.window_exponent as i32)
        }
    }
}

/// Explicit fixed-step integration of `dw/dt = mu R_on / D * i * f(w)` at
/// the sweep's sample spacing, with `w` clamped to `[0, D]`. First-order
/// accurate in the step.
pub fn simulate_memristor(params: &MemristorParams, sweep: &Sweep) -> Result<CvRun> {
    params.validate()?;
    let rate = params.mobility * params.r_on / params.thickness;
    let mut w = params.w0;
    let mut current = Vec::with_capacity(sweep.voltage.len());
    for (k, &v) in sweep.voltage.iter().enumerate() {
        let i = v / params.memristance(w);
        current.push(i);
        if let Some(next_t) = sweep.time.get(k + 1) {
            let dt = next_t - sweep.time[k];
            w = (w + dt * rate * i * params.window(w)).clamp(0.0, params.thickness);
        }
    }
    sweep.clone().into_run(current, "memristor")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Inductor,
}

impl std::str::FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resistor" => Ok(ElementKind::Resistor),
            "capacitor" => Ok(ElementKind::Capacitor),
            "inductor" => Ok(ElementKind::Inductor),
            other => Err(Error::Parameter(format!("unknown element kind {other:?}"))),
        }
    }
}

/// Resistor `i = v / R`; capacitor `i = C dv/dt` by finite differences
/// (central inside, one-sided at the ends); inductor `i = (1/L) ∫ v dt` by
/// cumulative trapezoid from zero.
pub fn simulate_linear_element(kind: ElementKind, value: f64, sweep: &Sweep) -> Result<CvRun> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::Parameter(format!("element value {value} must be > 0")));
    }
    let (t, v) = (&sweep.time, &sweep.voltage);
    let n = v.len();
    let current: Vec<f64> = match kind {
        ElementKind::Resistor => v.iter().map(|x| x / value).collect(),
        ElementKind::Capacitor => (0..n)
            .map(|k| {
                let (a, b) = match k {
                    0 => (0, 1),
                    k if k == n - 1 => (n - 2, n - 1),
                    k => (k - 1, k + 1),
                };
                value * (v[b] - v[a]) / (t[b] - t[a])
            })
            .collect(),
        ElementKind::Inductor => {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(n);
            out.push(0.0);
            for k in 1..n {
                acc += 0.5 * (v[k] + v[k - 1]) * (t[k] - t[k - 1]);
                out.push(acc / value);
            }
            out
        }
    };
    let label = match kind {
        ElementKind::Resistor => "resistor",
        ElementKind::Capacitor => "capacitor",
        ElementKind::Inductor => "inductor",
    };
    sweep.clone().into_run(current, label)
}
