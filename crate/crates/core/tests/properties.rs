use proptest::prelude::*;

use memfract::cv_data::{envelope_histogram, CvRun, RunSet};
use memfract::fraccalc::{rl_poly, FracOrderPair};
use memfract::memfract::{classify, evaluation_grid, memfractance, Lattice, SignalModel};
use memfract::polyfit::{fit_poly, PolyModel};
use memfract::score::memristance_degree;
use memfract::spikes::detect_spikes;
use memfract::synth::{simulate_memristor, triangular_sweep, MemristorParams};

fn run_from(current: Vec<f64>) -> CvRun {
    let n = current.len();
    let t: Vec<f64> = (0..n).map(|k| 0.1 * k as f64).collect();
    let v: Vec<f64> = (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * k as f64 / (n - 1) as f64 - 1.0).abs()))
        .collect();
    CvRun::from_samples(t, v, current, "prop").unwrap()
}

fn currents(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e-3..1e-3f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn averaging_ignores_run_order(a in currents(25), b in currents(25), c in currents(25)) {
        let runs = vec![run_from(a), run_from(b), run_from(c)];
        let mut reversed = runs.clone();
        reversed.reverse();
        let fwd = RunSet::new(runs).unwrap().average().unwrap();
        let rev = RunSet::new(reversed).unwrap().average().unwrap();
        prop_assert_eq!(fwd.time, rev.time);
        prop_assert_eq!(fwd.voltage, rev.voltage);
        prop_assert_eq!(fwd.current, rev.current);
    }

    #[test]
    fn vertex_ignores_voltage_scale(peak in 3usize..37, c in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
        let n = 41;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.5).collect();
        let v: Vec<f64> = (0..n).map(|k| 1.0 - (k as f64 - peak as f64).abs() / n as f64).collect();
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let i = vec![0.0; n];
        let mut a = RunSet::new(vec![CvRun::from_samples(t.clone(), v, i.clone(), "a").unwrap()]).unwrap();
        let mut b = RunSet::new(vec![CvRun::from_samples(t, scaled, i, "b").unwrap()]).unwrap();
        prop_assert_eq!(a.detect_vertex().unwrap(), b.detect_vertex().unwrap());
    }

    #[test]
    fn histogram_conserves_samples(a in currents(30), b in currents(30), nt in 1usize..8, ni in 1usize..8) {
        let set = RunSet::new(vec![run_from(a), run_from(b)]).unwrap();
        prop_assert_eq!(envelope_histogram(&set, (nt, ni)).unwrap().total(), 60);
    }

    #[test]
    fn fractional_derivative_is_linear(
        c1 in prop::collection::vec(-2.0..2.0f64, 1..6),
        c2 in prop::collection::vec(-2.0..2.0f64, 1..6),
        alpha in 0.0..2.0f64,
        t in 0.1..3.0f64,
    ) {
        let len = c1.len().max(c2.len());
        let sum: Vec<f64> = (0..len)
            .map(|j| c1.get(j).unwrap_or(&0.0) + c2.get(j).unwrap_or(&0.0))
            .collect();
        let m = |c: &[f64]| PolyModel::from_raw(c, [0.0, 3.0]).unwrap();
        let lhs = rl_poly(&m(&sum), alpha, t).unwrap();
        let rhs = rl_poly(&m(&c1), alpha, t).unwrap() + rl_poly(&m(&c2), alpha, t).unwrap();
        let scale = rl_poly(&m(&c1), alpha, t).unwrap().abs() + rl_poly(&m(&c2), alpha, t).unwrap().abs();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300) + 1e-14);
    }

    #[test]
    fn spikes_ignore_current_scale(c in 0.01..100.0f64, seed in 0usize..50) {
        let n = 201;
        let mut i: Vec<f64> = (0..n).map(|k| 1e-4 * ((k * 7919 + seed * 31) % 97) as f64 / 97.0).collect();
        for k in [40, 90, 150] {
            i[k] += 5e-4;
        }
        let base = detect_spikes(&run_from(i.clone()), 4.0).unwrap();
        let scaled = detect_spikes(&run_from(i.iter().map(|x| c * x).collect()), 4.0).unwrap();
        prop_assert_eq!(base.spike_indices, scaled.spike_indices);
    }

    #[test]
    fn score_ignores_joint_scaling(a in 0.01..100.0f64, b in 0.01..100.0f64) {
        let s = triangular_sweep(1.0, 401, 0.002).unwrap();
        let run = simulate_memristor(&MemristorParams::default(), &s).unwrap();
        let mut scaled = run.clone();
        scaled.voltage.iter_mut().for_each(|v| *v *= a);
        scaled.current.iter_mut().for_each(|i| *i *= b);
        let (x, y) = (memristance_degree(&run).unwrap(), memristance_degree(&scaled).unwrap());
        prop_assert!((x.value - y.value).abs() < 1e-12);
        prop_assert!((x.raw.lobe_area_norm - y.raw.lobe_area_norm).abs() < 1e-12);
        prop_assert!((x.raw.pinch_closeness - y.raw.pinch_closeness).abs() < 1e-12);
    }

    #[test]
    fn classification_is_pure(a1 in 0.0..=2.0f64, a2 in 0.0..=2.0f64) {
        let lattice = Lattice::default();
        let orders = FracOrderPair::new(a1, a2).unwrap();
        let first = classify(orders, &lattice).unwrap();
        prop_assert_eq!(&first, &classify(orders, &lattice).unwrap());
        let hit = first.containing_triangle.expect("lattice covers the square");
        prop_assert!(hit.barycentric.iter().all(|l| *l >= -1e-12));
    }

    #[test]
    fn memfractance_scales_inversely_with_current(c in 0.01..100.0f64, a1 in 0.0..2.0f64, a2 in 0.0..2.0f64) {
        let s = triangular_sweep(1.0, 201, 0.002).unwrap();
        let run = simulate_memristor(&MemristorParams::default(), &s).unwrap();
        let scaled: Vec<f64> = run.current.iter().map(|i| c * i).collect();
        let (vm, _) = fit_poly(&run.time, &run.voltage, 12).unwrap();
        let (im, _) = fit_poly(&run.time, &run.current, 12).unwrap();
        let (im_c, _) = fit_poly(&run.time, &scaled, 12).unwrap();
        let v: SignalModel = vm.into();
        let grid = evaluation_grid(v.domain(), None, 101);
        let orders = FracOrderPair::new(a1, a2).unwrap();
        let base = memfractance(&v, &im.into(), orders, &grid).unwrap();
        let other = memfractance(&v, &im_c.into(), orders, &grid).unwrap();
        prop_assert_eq!(&base.t_grid, &other.t_grid);
        for (f, g) in base.values.iter().zip(&other.values) {
            prop_assert!((f / c - g).abs() <= 1e-7 * (f / c).abs(), "{f} {g} {c}");
        }
    }
}

#[test]
fn wider_resistance_ratio_widens_lobes() {
    let s = triangular_sweep(1.0, 401, 0.002).unwrap();
    let mut last = 0.0;
    for r_off in [200.0, 1e3, 4e3, 16e3] {
        let params = MemristorParams {
            r_off,
            ..MemristorParams::default()
        };
        let run = simulate_memristor(&params, &s).unwrap();
        let lobe = memristance_degree(&run).unwrap().raw.lobe_area_norm;
        assert!(lobe >= last, "R_off {r_off}: {lobe} < {last}");
        last = lobe;
    }
}
