//! Cyclic-voltammetry records: CSV ingestion, run averaging, vertex
//! detection and envelope histograms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed overshoot of |v| beyond the nominal sweep range.
pub const SWEEP_SLACK: f64 = 0.01;

/// One acquisition: aligned time, voltage and current samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRun {
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub sweep_range: (f64, f64),
    pub step_delay: f64,
    pub label: String,
}

impl CvRun {
    pub fn new(
        time: Vec<f64>,
        voltage: Vec<f64>,
        current: Vec<f64>,
        sweep_range: (f64, f64),
        step_delay: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let run = CvRun {
            time,
            voltage,
            current,
            sweep_range,
            step_delay,
            label: label.into(),
        };
        run.validate()?;
        Ok(run)
    }

    /// Sweep range taken from the voltage extent and step delay from the
    /// median sample spacing.
    pub fn from_samples(
        time: Vec<f64>,
        voltage: Vec<f64>,
        current: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if time.len() != voltage.len() || time.len() != current.len() {
            return Err(Error::Shape(format!(
                "column lengths t={} v={} i={}",
                time.len(),
                voltage.len(),
                current.len()
            )));
        }
        if time.len() < 3 {
            return Err(Error::TooShort { len: time.len(), min: 3 });
        }
        let lo = voltage.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = voltage.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut steps: Vec<f64> = time.windows(2).map(|w| w[1] - w[0]).collect();
        steps.sort_by(f64::total_cmp);
        let step_delay = steps[steps.len() / 2];
        CvRun::new(time, voltage, current, (lo, hi), step_delay, label)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        self.time[self.time.len() - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.time.len();
        if self.voltage.len() != n || self.current.len() != n {
            return Err(Error::Shape(format!(
                "column lengths t={} v={} i={}",
                n,
                self.voltage.len(),
                self.current.len()
            )));
        }
        if n < 3 {
            return Err(Error::TooShort { len: n, min: 3 });
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !(finite(&self.time) && finite(&self.voltage) && finite(&self.current)) {
            return Err(Error::Validation("non-finite sample".into()));
        }
        if self.time[0] < 0.0 {
            return Err(Error::Validation(format!(
                "first time {} is negative",
                self.time[0]
            )));
        }
        if let Some(k) = self.time.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "time not strictly increasing at row {}",
                k + 2
            )));
        }
        let limit = self.sweep_range.0.abs().max(self.sweep_range.1.abs()) * (1.0 + SWEEP_SLACK);
        if let Some(k) = self.voltage.iter().position(|v| v.abs() > limit) {
            return Err(Error::Validation(format!(
                "|v| = {} at row {} exceeds sweep range {:?}",
                self.voltage[k].abs(),
                k + 1,
                self.sweep_range
            )));
        }
        Ok(())
    }

    /// Writes the `t,v,i` CSV this module parses.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "v", "i"]).map_err(io)?;
        for k in 0..self.len() {
            w.write_record(&[
                self.time[k].to_string(),
                self.voltage[k].to_string(),
                self.current[k].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses a `t,v,i` CSV. Row numbers in errors count data rows from 1.
pub fn parse_cv_csv<R: Read>(source: R, label: &str) -> Result<CvRun> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { row: 0, message: e.to_string() })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["t", "v", "i"] {
        return Err(Error::Parse {
            row: 0,
            message: format!("expected header t,v,i, found {}", names.join(",")),
        });
    }
    let (mut t, mut v, mut i) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let mut cells = [0.0; 3];
        for (c, field) in record.iter().enumerate() {
            cells[c] = field.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric cell {field:?} in column {}", names[c]),
            })?;
        }
        t.push(cells[0]);
        v.push(cells[1]);
        i.push(cells[2]);
    }
    CvRun::from_samples(t, v, i, label)
}

/// Runs acquired under the same sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub runs: Vec<CvRun>,
    pub vertex_time: Option<f64>,
    pub t_max: f64,
}

impl RunSet {
    pub fn new(runs: Vec<CvRun>) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::Validation("empty run set".into()))?;
        let n = first.len();
        if let Some((k, r)) = runs.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Shape(format!(
                "run {k} has {} samples, run 0 has {n}",
                r.len()
            )));
        }
        let t_max = runs.iter().map(CvRun::t_max).fold(f64::NEG_INFINITY, f64::max);
        Ok(RunSet {
            runs,
            vertex_time: None,
            t_max,
        })
    }

    /// Per-run time of max |v|, earliest on ties.
    pub fn vertex_times(&self) -> Result<Vec<f64>> {
        self.runs
            .iter()
            .enumerate()
            .map(|(k, run)| {
                let mut best = 0;
                for (j, v) in run.voltage.iter().enumerate() {
                    if v.abs() > run.voltage[best].abs() {
                        best = j;
                    }
                }
                if best == 0 || best == run.len() - 1 {
                    Err(Error::NoVertex { run: k, index: best })
                } else {
                    Ok(run.time[best])
                }
            })
            .collect()
    }

    /// Mean vertex time across runs; stored in [`RunSet::vertex_time`].
    pub fn detect_vertex(&mut self) -> Result<f64> {
        let times = self.vertex_times()?;
        let vertex = times.iter().sum::<f64>() / times.len() as f64;
        if !(vertex > 0.0 && vertex < self.t_max) {
            return Err(Error::Validation(format!(
                "vertex time {vertex} outside (0, {})",
                self.t_max
            )));
        }
        self.vertex_time = Some(vertex);
        Ok(vertex)
    }

    /// Index-wise arithmetic mean of time, voltage and current.
    pub fn average(&self) -> Result<CvRun> {
        let n = self.runs[0].len();
        let count = self.runs.len() as f64;
        let mean = |pick: fn(&CvRun) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    // sorted summation keeps the result independent of run order
                    let mut xs: Vec<f64> = self.runs.iter().map(|r| pick(r)[k]).collect();
                    xs.sort_by(f64::total_cmp);
                    xs.iter().sum::<f64>() / count
                })
                .collect()
        };
        let time = mean(|r| &r.time);
        let voltage = mean(|r| &r.voltage);
        let current = mean(|r| &r.current);
        let first = &self.runs[0];
        let lo = self.runs.iter().map(|r| r.sweep_range.0).fold(f64::INFINITY, f64::min);
        let hi = self
            .runs
            .iter()
            .map(|r| r.sweep_range.1)
            .fold(f64::NEG_INFINITY, f64::max);
        CvRun::new(
            time,
            voltage,
            current,
            (lo, hi),
            first.step_delay,
            format!("mean of {} runs", self.runs.len()),
        )
    }
}

pub fn average_runs(set: &RunSet) -> Result<CvRun> {
    set.average()
}

/// Counts over (time, current) cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub t_edges: Vec<f64>,
    pub i_edges: Vec<f64>,
    /// `counts[t_bin][i_bin]`
    pub counts: Vec<Vec<u64>>,
}

impl Histogram2D {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Two edge rows followed by one row of counts per time bin.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let edge_row = |name: &str, edges: &[f64]| {
            std::iter::once(name.to_string())
                .chain(edges.iter().map(f64::to_string))
                .collect::<Vec<_>>()
        };
        w.write_record(edge_row("t_edges", &self.t_edges)).map_err(io)?;
        w.write_record(edge_row("i_edges", &self.i_edges)).map_err(io)?;
        for (k, row) in self.counts.iter().enumerate() {
            let mut rec = vec![format!("t_bin_{k}")];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = 0.5 * lo.abs().max(1e-300);
        (lo - pad, hi + pad)
    };
    (0..=bins)
        .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
        .collect()
}

fn bin_of(x: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let k = ((x - lo) / (hi - lo) * bins as f64).floor();
    (k.max(0.0) as usize).min(bins - 1)
}

/// 2-D histogram of every (t, i) sample of every run.
pub fn envelope_histogram(set: &RunSet, bins: (usize, usize)) -> Result<Histogram2D> {
    if set.runs.is_empty() {
        return Err(Error::Validation("empty run set".into()));
    }
    if bins.0 == 0 || bins.1 == 0 {
        return Err(Error::Parameter("histogram needs at least one bin per axis".into()));
    }
    let samples = || set.runs.iter().flat_map(|r| r.time.iter().zip(&r.current));
    let (mut t_lo, mut t_hi, mut i_lo, mut i_hi) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (t, i) in samples() {
        t_lo = t_lo.min(*t);
        t_hi = t_hi.max(*t);
        i_lo = i_lo.min(*i);
        i_hi = i_hi.max(*i);
    }
    let t_edges = uniform_edges(t_lo, t_hi, bins.0);
    let i_edges = uniform_edges(i_lo, i_hi, bins.1);
    let mut counts = vec![vec![0u64; bins.1]; bins.0];
    for (t, i) in samples() {
        counts[bin_of(*t, &t_edges)][bin_of(*i, &i_edges)] += 1;
    }
    Ok(Histogram2D {
        t_edges,
        i_edges,
        counts,
    })
}
