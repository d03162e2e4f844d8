use num_complex::Complex64;
use pcflow::chart::TorusChart;
use pcflow::chern::ChernPackage;
use pcflow::flow::{flow_rhs, FlowState};
use pcflow::initial::{self, DataKind, DataSpec};
use pcflow::metric::HermitianMetric;
use pcflow::ops;
use std::time::Instant;

fn main() {
    for grid in [12usize, 16, 24] {
        let chart = TorusChart::new(2, grid).unwrap();
        let mut spec = DataSpec::defaults(DataKind::PluriclosedRankOne, 2);
        spec.epsilon = 0.05;
        let m = initial::make_pluriclosed_rank_one(&chart, &spec).unwrap();

        // single full transform
        let mut buf: Vec<Complex64> = m.g().comp(0).to_vec();
        let t0 = Instant::now();
        let reps = 50;
        for _ in 0..reps { chart.forward(&mut buf); chart.inverse(&mut buf); }
        let fft_ms = t0.elapsed().as_secs_f64() * 1000.0 / (reps as f64 * 2.0);

        let t0 = Instant::now();
        let pkg = ChernPackage::compute(&m);
        let pkg_ms = t0.elapsed().as_secs_f64() * 1000.0;

        let t0 = Instant::now();
        let _m2 = HermitianMetric::new(m.g().clone()).unwrap();
        let met_ms = t0.elapsed().as_secs_f64() * 1000.0;

        let state = FlowState::new(m, None).unwrap();
        let t0 = Instant::now();
        let _ = flow_rhs(&state).unwrap();
        let rhs_ms = t0.elapsed().as_secs_f64() * 1000.0;

        let t0 = Instant::now();
        let _ = ops::max_norm(&pkg.curvature, &state.metric).unwrap();
        let on_ms = t0.elapsed().as_secs_f64() * 1000.0;

        let t0 = Instant::now();
        let _ = pcflow::chern::pluriclosed_residual(&state.metric, &pkg).unwrap();
        let pc_ms = t0.elapsed().as_secs_f64() * 1000.0;

        let t0 = Instant::now();
        let _ = pcflow::chern::derivative_norm_maxes(&pkg.curvature, &state.metric, &pkg.gamma).unwrap();
        let dn_ms = t0.elapsed().as_secs_f64() * 1000.0;

        println!("N={grid}: fft {fft_ms:.2}ms  pkg {pkg_ms:.1}ms  metric_new {met_ms:.1}ms  rhs {rhs_ms:.1}ms  |curv| {on_ms:.1}ms  pc_resid {pc_ms:.1}ms  d1d2 {dn_ms:.1}ms");
    }
}
