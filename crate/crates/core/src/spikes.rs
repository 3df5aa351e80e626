//! Current spikes on I-V traces and their voltage-interval histograms.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cv_data::CvRun;
use crate::error::{Error, Result};

pub const MIN_SPIKE_RUN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepPhase {
    #[serde(rename = "positive-sweep")]
    Positive,
    #[serde(rename = "negative-sweep")]
    Negative,
}

impl SweepPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepPhase::Positive => "positive-sweep",
            SweepPhase::Negative => "negative-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub spike_indices: Vec<usize>,
    pub spike_times: Vec<f64>,
    pub spike_voltages: Vec<f64>,
    pub spike_currents: Vec<f64>,
    pub phase: Vec<SweepPhase>,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.spike_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_indices.is_empty()
    }

    /// `index,t,v,i,phase` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["index", "t", "v", "i", "phase"]).map_err(io)?;
        for k in 0..self.len() {
            w.write_record([
                self.spike_indices[k].to_string(),
                self.spike_times[k].to_string(),
                self.spike_voltages[k].to_string(),
                self.spike_currents[k].to_string(),
                self.phase[k].as_str().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeConfig {
    /// Minimum prominence in robust sigmas (1.4826 MAD) of the residual.
    pub prominence_k: f64,
    /// Baseline window as a fraction of the record.
    pub window_fraction: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            prominence_k: 4.0,
            window_fraction: 0.05,
        }
    }
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Odd window of `fraction * n` samples (at least 3).
pub fn median_window(n: usize, fraction: f64) -> usize {
    let w = ((fraction * n as f64).round() as usize).max(3);
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Centred moving median; the window shrinks symmetrically at the edges.
pub fn moving_median(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = x.len();
    let mut buf = Vec::with_capacity(window);
    (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            buf.clear();
            buf.extend_from_slice(&x[k - h..=k + h]);
            median_in_place(&mut buf)
        })
        .collect()
}

/// Prominence of the peak at `k`, as defined for 1-D peak finding: height
/// above the higher of the two lowest points reachable before a taller
/// sample or the record edge.
fn prominence(a: &[f64], k: usize) -> f64 {
    let peak = a[k];
    let mut left = peak;
    for &x in a[..k].iter().rev() {
        if x > peak {
            break;
        }
        left = left.min(x);
    }
    let mut right = peak;
    for &x in &a[k + 1..] {
        if x > peak {
            break;
        }
        right = right.min(x);
    }
    peak - left.max(right)
}

/// Samples above half prominence, contiguous with the peak.
fn width(a: &[f64], k: usize, prom: f64) -> usize {
    let level = a[k] - 0.5 * prom;
    let left = a[..k].iter().rev().take_while(|&&x| x > level).count();
    let right = a[k + 1..].iter().take_while(|&&x| x > level).count();
    1 + left + right
}

/// Spikes with the default window and the given prominence factor.
pub fn detect_spikes(run: &CvRun, prominence_k: f64) -> Result<SpikeTrain> {
    detect_spikes_with(
        run,
        &SpikeConfig {
            prominence_k,
            ..SpikeConfig::default()
        },
    )
}

/// Centred quadratic least-squares fit over `window` samples, evaluated at
/// each centre, using only samples with `keep` set. With every sample kept
/// this is the order-2 Savitzky–Golay smoother. The window shrinks
/// symmetrically at the edges; centres with fewer than three kept
/// neighbours take `fallback`.
pub fn local_quadratic(x: &[f64], keep: &[bool], window: usize, fallback: &[f64]) -> Vec<f64> {
    let half = window / 2;
    let n = x.len();
    (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            if h < 2 {
                return x[k];
            }
            let hf = h as f64;
            // moments of u = j / h and of x u^p over the kept samples
            let (mut s, mut m) = ([0.0f64; 5], [0.0f64; 3]);
            for idx in k - h..=k + h {
                if !keep[idx] {
                    continue;
                }
                let u = (idx as f64 - k as f64) / hf;
                let mut p = 1.0;
                for (e, acc) in s.iter_mut().enumerate() {
                    *acc += p;
                    if e < 3 {
                        m[e] += p * x[idx];
                    }
                    p *= u;
                }
            }
            if s[0] < 3.0 {
                return fallback[k];
            }
            let det3 = |c: [[f64; 3]; 3]| {
                c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
                    - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
                    + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
            };
            let normal = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
            let det = det3(normal);
            if det.abs() <= 1e-12 * s[0].powi(3) {
                return fallback[k];
            }
            // Cramer's rule for the constant term
            let first = [[m[0], s[1], s[2]], [m[1], s[2], s[3]], [m[2], s[3], s[4]]];
            det3(first) / det
        })
        .collect()
}

/// Normal-consistent MAD: `1.4826 * median |r - median r|`.
pub fn robust_sigma(r: &[f64]) -> f64 {
    let centre = median_in_place(&mut r.to_vec());
    1.4826 * median_in_place(&mut r.iter().map(|x| (x - centre).abs()).collect::<Vec<_>>())
}

/// Samples beyond this many robust sigmas are left out of the baseline fit.
const OUTLIER_SIGMAS: f64 = 3.0;

/// Monotone branches of the sweep: the record split after its interior
/// voltage maximum and minimum.
pub fn sweep_branches(voltage: &[f64]) -> Vec<Range<usize>> {
    let n = voltage.len();
    let by = |better: fn(f64, f64) -> bool| {
        (0..n).fold(0, |best, k| if better(voltage[k], voltage[best]) { k } else { best })
    };
    let mut cuts: Vec<usize> = [by(|a, b| a > b), by(|a, b| a < b)]
        .into_iter()
        .filter(|&k| k > 0 && k + 1 < n)
        .map(|k| k + 1)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    bounds.windows(2).map(|w| w[0]..w[1]).collect()
}

fn per_branch(branches: &[Range<usize>], f: impl Fn(Range<usize>) -> Vec<f64>) -> Vec<f64> {
    branches.iter().flat_map(|r| f(r.clone())).collect()
}

/// Residuals of the current against a moving median and against a robust
/// local quadratic, both taken per sweep branch. The median is exact on
/// monotone noiseless stretches but lags curvature; the quadratic follows
/// curvature. Two refits leave out the outliers of the previous fit.
pub fn spike_residuals(run: &CvRun, window: usize) -> (Vec<f64>, Vec<f64>) {
    let i = &run.current;
    let branches = sweep_branches(&run.voltage);
    let floor = 1e-9 * i.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let median = per_branch(&branches, |r| moving_median(&i[r], window));
    let all = vec![true; i.len()];
    let mut quad = per_branch(&branches, |r| local_quadratic(&i[r.clone()], &all[r.clone()], window, &i[r]));
    for _ in 0..2 {
        let residual: Vec<f64> = i.iter().zip(&quad).map(|(x, b)| x - b).collect();
        let cut = (OUTLIER_SIGMAS * robust_sigma(&residual)).max(floor);
        let keep: Vec<bool> = residual.iter().map(|r| r.abs() <= cut).collect();
        quad = per_branch(&branches, |r| {
            local_quadratic(&i[r.clone()], &keep[r.clone()], window, &quad[r])
        });
    }
    let diff = |b: &[f64]| i.iter().zip(b).map(|(x, y)| x - y).collect();
    (diff(&median), diff(&quad))
}

/// Local maxima of `min(|r_median|, |r_quadratic|)` (see
/// [`spike_residuals`]) whose prominence reaches `k` robust sigmas of the
/// quadratic residual and which span at most an eighth of the window.
/// Samples at the record ends and at the sweep vertices are never spikes.
pub fn detect_spikes_with(run: &CvRun, cfg: &SpikeConfig) -> Result<SpikeTrain> {
    let n = run.len();
    if n < MIN_SPIKE_RUN {
        return Err(Error::TooShort {
            len: n,
            min: MIN_SPIKE_RUN,
        });
    }
    if !(cfg.prominence_k >= 0.0 && cfg.window_fraction > 0.0 && cfg.window_fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "prominence factor {} must be >= 0 and window fraction {} in (0, 1]",
            cfg.prominence_k, cfg.window_fraction
        )));
    }
    let window = median_window(n, cfg.window_fraction);
    let (r_median, r_quad) = spike_residuals(run, window);
    let scale = run.current.iter().fold(0.0f64, |m, i| m.max(i.abs()));
    let threshold = (cfg.prominence_k * robust_sigma(&r_quad)).max(1e-9 * scale);
    let max_width = (window / 8).max(2);

    let a: Vec<f64> = r_median.iter().zip(&r_quad).map(|(m, q)| m.abs().min(q.abs())).collect();
    let mut train = SpikeTrain {
        spike_indices: Vec::new(),
        spike_times: Vec::new(),
        spike_voltages: Vec::new(),
        spike_currents: Vec::new(),
        phase: Vec::new(),
    };
    for k in 1..n - 1 {
        if !(a[k] > a[k - 1] && a[k] >= a[k + 1]) {
            continue;
        }
        let prom = prominence(&a, k);
        if prom < threshold || prom <= 1e-9 * scale || width(&a, k, prom) > max_width {
            continue;
        }
        let slope = (run.voltage[k + 1] - run.voltage[k - 1]) / (run.time[k + 1] - run.time[k - 1]);
        train.spike_indices.push(k);
        train.spike_times.push(run.time[k]);
        train.spike_voltages.push(run.voltage[k]);
        train.spike_currents.push(run.current[k]);
        train.phase.push(if slope >= 0.0 {
            SweepPhase::Positive
        } else {
            SweepPhase::Negative
        });
    }
    Ok(train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl IntervalHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `lo,hi,count` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["lo", "hi", "count"]).map_err(io)?;
        for (k, c) in self.counts.iter().enumerate() {
            w.write_record([
                self.bin_edges[k].to_string(),
                self.bin_edges[k + 1].to_string(),
                c.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of `|Δv|` between consecutive spikes over the occupied bins.
pub fn interval_histogram(train: &SpikeTrain, bin_width: f64) -> Result<IntervalHistogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Parameter(format!("bin width {bin_width} must be > 0")));
    }
    let bins: Vec<u64> = train
        .spike_voltages
        .windows(2)
        .map(|w| ((w[1] - w[0]).abs() / bin_width + 1e-9).floor() as u64)
        .collect();
    let (Some(&lo), Some(&hi)) = (bins.iter().min(), bins.iter().max()) else {
        return Ok(IntervalHistogram {
            bin_edges: Vec::new(),
            counts: Vec::new(),
        });
    };
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for b in bins {
        counts[(b - lo) as usize] += 1;
    }
    Ok(IntervalHistogram {
        bin_edges: (lo..=hi + 1).map(|b| b as f64 * bin_width).collect(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_run(n: usize) -> CvRun {
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.01).collect();
        let v: Vec<f64> = (0..n).map(|k| -0.5 + k as f64 / (n - 1) as f64).collect();
        let i = v.iter().map(|x| x / 1e3).collect();
        CvRun::from_samples(t, v, i, "ramp").unwrap()
    }

    fn train_at(voltages: &[f64]) -> SpikeTrain {
        SpikeTrain {
            spike_indices: (0..voltages.len()).collect(),
            spike_times: vec![0.0; voltages.len()],
            spike_voltages: voltages.to_vec(),
            spike_currents: vec![0.0; voltages.len()],
            phase: vec![SweepPhase::Positive; voltages.len()],
        }
    }

    #[test]
    fn smooth_line_has_no_spikes() {
        assert!(detect_spikes(&ramp_run(401), 4.0).unwrap().is_empty());
    }

    #[test]
    fn single_bump_on_line() {
        let mut run = ramp_run(201);
        run.current[60] += 1e-4;
        let train = detect_spikes(&run, 4.0).unwrap();
        assert_eq!(train.spike_indices, vec![60]);
        assert_eq!(train.phase, vec![SweepPhase::Positive]);
    }

    #[test]
    fn short_run_is_rejected() {
        assert!(matches!(
            detect_spikes(&ramp_run(20), 4.0),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn moving_median_edges() {
        let x = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(moving_median(&x, 3), vec![5.0, 3.0, 2.0, 3.0, 4.0]);
        assert_eq!(median_window(401, 0.05), 21);
        assert_eq!(median_window(21, 0.05), 3);
    }

    #[test]
    fn quadratic_smoother_weights() {
        let x = [0.0, 0.0, 35.0, 0.0, 0.0];
        assert!((local_quadratic(&x, &[true; 5], 5, &x)[2] - 17.0).abs() < 1e-12);
        let mut parabola: Vec<f64> = (0..40).map(|k| 0.3 * (k * k) as f64 - 2.0 * k as f64 + 1.0).collect();
        let exact = parabola.clone();
        parabola[20] += 50.0;
        let mut keep = vec![true; 40];
        keep[20] = false;
        for (a, b) in local_quadratic(&parabola, &keep, 11, &parabola).iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bumps_on_a_curved_base() {
        let n = 801;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 1e-3).collect();
        let v: Vec<f64> = t.iter().map(|x| (6.0 * x).sin()).collect();
        let mut i: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(k, x)| x / 1e3 + 1e-6 * (((k * 7919) % 101) as f64 / 50.0 - 1.0))
            .collect();
        for k in [150, 270, 500] {
            i[k] -= 5e-5;
        }
        let run = CvRun::from_samples(t, v, i, "curved").unwrap();
        assert_eq!(detect_spikes(&run, 4.0).unwrap().spike_indices, vec![150, 270, 500]);
    }

    #[test]
    fn branches_split_after_extremes() {
        let v = [0.0, 0.5, 1.0, 0.5, 0.0, -0.5, -1.0, -0.5, 0.0];
        assert_eq!(sweep_branches(&v), vec![0..3, 3..7, 7..9]);
        assert_eq!(sweep_branches(&[0.0, 1.0, 2.0]), vec![0..3]);
    }

    #[test]
    fn bumps_next_to_a_vertex() {
        let n = 401;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.01).collect();
        let v: Vec<f64> = (0..n)
            .map(|k| {
                let x = k as f64 / 100.0;
                if x <= 1.0 { x } else if x <= 3.0 { 2.0 - x } else { x - 4.0 }
            })
            .collect();
        let mut i: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(k, x)| x / 1e3 * (1.0 + 0.3 * x) + 1e-6 * (((k * 7919) % 101) as f64 / 50.0 - 1.0))
            .collect();
        for k in [97, 104, 296, 309] {
            i[k] += 3e-5;
        }
        let run = CvRun::from_samples(t, v, i, "vertex").unwrap();
        assert_eq!(detect_spikes(&run, 4.0).unwrap().spike_indices, vec![97, 104, 296, 309]);
    }

    #[test]
    fn prominence_matches_definition() {
        let a = [0.0, 2.0, 1.0, 3.0, 0.5, 0.0];
        assert_eq!(prominence(&a, 1), 1.0);
        assert_eq!(prominence(&a, 3), 3.0);
    }

    #[test]
    fn evenly_spaced_voltages() {
        let h = interval_histogram(&train_at(&[0.1, 0.2, 0.3]), 0.05).unwrap();
        assert_eq!(h.counts, vec![2]);
        assert!((h.bin_edges[0] - 0.1).abs() < 1e-15);
        let many: Vec<f64> = (0..9).map(|k| -0.4 + 0.1 * k as f64).collect();
        let h = interval_histogram(&train_at(&many), 0.05).unwrap();
        assert_eq!(h.counts, vec![8]);
    }

    #[test]
    fn sparse_trains_give_empty_histograms() {
        assert_eq!(interval_histogram(&train_at(&[]), 0.1).unwrap().total(), 0);
        assert!(interval_histogram(&train_at(&[0.3]), 0.1).unwrap().counts.is_empty());
        assert!(interval_histogram(&train_at(&[0.3]), 0.0).is_err());
    }
}
