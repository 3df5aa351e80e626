//! Analysis pipeline and the canonical JSON report.

use serde::{Deserialize, Serialize};

use memfract::cv_data::{CvRun, RunSet};
use memfract::fraccalc::FracOrderPair;
use memfract::memfract::{
    classify_curve, optimize_on, reconstruct_compare, ClassificationResult, Lattice,
    MemfractanceCurve, MemfractanceProblem, Reconstruction, ScanResult, SearchConfig, SignalModel,
    ZeroLocus,
};
use memfract::polyfit::{fit_piecewise, fit_poly, FitStats};
use memfract::score::{memristance_degree, MemristanceScore};
use memfract::spikes::{detect_spikes, interval_histogram, IntervalHistogram, SpikeTrain};
use memfract::Result;

use crate::config::AnalysisConfig;

pub const REPORT_VERSION: u32 = 1;

/// Fitted voltage and current models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub piecewise: bool,
    pub degree: usize,
    pub vertex_time: Option<f64>,
    pub voltage: SignalModel,
    pub current: SignalModel,
    /// One entry per piece.
    pub voltage_stats: Vec<FitStats>,
    pub current_stats: Vec<FitStats>,
    /// Flux and charge discontinuity at the vertex for piecewise fits.
    pub flux_jump: Option<f64>,
    pub charge_jump: Option<f64>,
}

pub fn fit_models(run: &CvRun, degree: usize, piecewise: bool) -> Result<FitReport> {
    if !piecewise {
        let (vm, vs) = fit_poly(&run.time, &run.voltage, degree)?;
        let (im, is) = fit_poly(&run.time, &run.current, degree)?;
        return Ok(FitReport {
            piecewise,
            degree,
            vertex_time: None,
            voltage: vm.into(),
            current: im.into(),
            voltage_stats: vec![vs],
            current_stats: vec![is],
            flux_jump: None,
            charge_jump: None,
        });
    }
    let vertex = RunSet::new(vec![run.clone()])?.detect_vertex()?;
    let (vm, vs) = fit_piecewise(&run.time, &run.voltage, vertex, degree)?;
    let (im, is) = fit_piecewise(&run.time, &run.current, vertex, degree)?;
    Ok(FitReport {
        piecewise,
        degree,
        vertex_time: Some(vertex),
        flux_jump: Some(vm.antiderivative().jump()),
        charge_jump: Some(im.antiderivative().jump()),
        voltage: vm.into(),
        current: im.into(),
        voltage_stats: vs.to_vec(),
        current_stats: is.to_vec(),
    })
}

/// Coarse search range values on a sub-sampled lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeMap {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    /// `range[i][j]` for `(alpha1[i], alpha2[j])`; null where all points are singular.
    pub range: Vec<Vec<Option<f64>>>,
    pub admissible: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub coarse_step: f64,
    pub refined_step: Option<f64>,
    pub admissible_count: usize,
    /// Maximal runs `[alpha1, alpha2_lo, alpha2_hi]` of admissible couples
    /// on the coarse lattice.
    pub admissible_runs: Vec<[f64; 3]>,
    pub numerator_loci: Vec<ZeroLocus>,
    pub denominator_loci: Vec<ZeroLocus>,
    pub range_map: RangeMap,
    /// Couples tied with the optimum in the final pass.
    pub ties: usize,
}

fn summarize(scan: &ScanResult, refined: Option<&ScanResult>, ties: usize) -> SearchReport {
    let n1 = scan.numerator_loci.len();
    let n2 = scan.denominator_loci.len();
    let at = |i: usize, j: usize| &scan.couples[i * n2 + j];
    let mut admissible_runs = Vec::new();
    for i in 0..n1 {
        let mut j = 0;
        while j < n2 {
            if !at(i, j).admissible {
                j += 1;
                continue;
            }
            let start = j;
            while j + 1 < n2 && at(i, j + 1).admissible {
                j += 1;
            }
            admissible_runs.push([at(i, start).alpha1, at(i, start).alpha2, at(i, j).alpha2]);
            j += 1;
        }
    }
    let stride = ((0.05 / scan.step).round() as usize).max(1);
    let pick1: Vec<usize> = (0..n1).step_by(stride).collect();
    let pick2: Vec<usize> = (0..n2).step_by(stride).collect();
    let range_map = RangeMap {
        alpha1: pick1.iter().map(|&i| scan.numerator_loci[i].parameter).collect(),
        alpha2: pick2.iter().map(|&j| scan.denominator_loci[j].parameter).collect(),
        range: pick1
            .iter()
            .map(|&i| pick2.iter().map(|&j| at(i, j).range).collect())
            .collect(),
        admissible: pick1
            .iter()
            .map(|&i| pick2.iter().map(|&j| at(i, j).admissible).collect())
            .collect(),
    };
    SearchReport {
        coarse_step: scan.step,
        refined_step: refined.map(|r| r.step),
        admissible_count: scan.admissible().count(),
        admissible_runs,
        numerator_loci: scan.numerator_loci.clone(),
        denominator_loci: scan.denominator_loci.clone(),
        range_map,
        ties,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub orders: FracOrderPair,
    pub range: f64,
    pub median: f64,
    /// `range / |median|`; null when the median is 0 and the range is not.
    pub relative_range: Option<f64>,
}

/// A component that may fail without failing the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub value: Option<T>,
    pub error: Option<String>,
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(value) => Outcome {
                value: Some(value),
                error: None,
            },
            Err(e) => Outcome {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeReport {
    pub train: SpikeTrain,
    pub intervals: IntervalHistogram,
}

pub fn spike_report(run: &CvRun, k: f64, bin_width: f64) -> Result<SpikeReport> {
    let train = detect_spikes(run, k)?;
    let intervals = interval_histogram(&train, bin_width)?;
    Ok(SpikeReport { train, intervals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub input: String,
    pub samples: usize,
    pub config: AnalysisConfig,
    pub fit: FitReport,
    pub reconstruction: Reconstruction,
    pub search: SearchReport,
    pub optimum: OptimumReport,
    pub curve: MemfractanceCurve,
    pub lattice: Lattice,
    pub classification: ClassificationResult,
    pub score: Outcome<MemristanceScore>,
    pub spikes: Outcome<SpikeReport>,
}

/// Full pipeline on one record.
pub fn analyze(run: &CvRun, input: &str, cfg: &AnalysisConfig, lattice: Lattice) -> Result<Report> {
    let fit = fit_models(run, cfg.degree, cfg.piecewise)?;
    let reconstruction = reconstruct_compare(&fit.voltage, &fit.current, run)?;
    let problem = MemfractanceProblem::new(&fit.voltage, &fit.current)?;
    let search = SearchConfig {
        alpha_step: cfg.alpha_step,
        grid_points: cfg.grid_points,
        singular_delta: cfg.singular_delta,
        refine: true,
    };
    search.validate()?;
    let opt = optimize_on(&problem, &search)?;
    let classification = classify_curve(&opt.curve, &lattice)?;
    let optimum = OptimumReport {
        orders: opt.orders,
        range: opt.range,
        median: opt.curve.median(),
        relative_range: Some(opt.curve.relative_range()).filter(|r| r.is_finite()),
    };
    Ok(Report {
        version: REPORT_VERSION,
        input: input.to_string(),
        samples: run.len(),
        config: cfg.clone(),
        fit,
        reconstruction,
        search: summarize(&opt.coarse, opt.refined.as_ref(), opt.ties),
        optimum,
        curve: opt.curve,
        lattice,
        classification,
        score: memristance_degree(run).into(),
        spikes: spike_report(run, cfg.spike_k, cfg.interval_bin_width).into(),
    })
}
