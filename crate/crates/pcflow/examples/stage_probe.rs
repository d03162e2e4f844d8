use pcflow::chart::{DerivDirection, TorusChart};
use pcflow::initial::{self, DataKind, DataSpec};
use pcflow::metric::HermitianMetric;
use pcflow::tensor::TensorField;
use std::time::Instant;

fn main() {
    let grid = 24usize;
    let chart = TorusChart::new(2, grid).unwrap();
    let mut spec = DataSpec::defaults(DataKind::PluriclosedRankOne, 2);
    spec.epsilon = 0.05;
    let m = initial::make_pluriclosed_rank_one(&chart, &spec).unwrap();
    let _ = pcflow::chern::stage_rates(&m, false);

    let t0 = Instant::now();
    let ghat = m.g().to_spectral();
    let t1 = t0.elapsed().as_secs_f64()*1e3;
    let t0 = Instant::now();
    let _dg: Vec<TensorField> = (0..2).map(|a| ghat.derivative(DerivDirection::Holomorphic(a))).collect();
    let t2 = t0.elapsed().as_secs_f64()*1e3;
    let t0 = Instant::now();
    let mut d2g: Vec<TensorField> = Vec::new();
    for a in 0..2 { for b in 0..2 {
        d2g.push(ghat.derived(&[DerivDirection::Holomorphic(a), DerivDirection::AntiHolomorphic(b)]));
    }}
    let t3 = t0.elapsed().as_secs_f64()*1e3;
    let t0 = Instant::now();
    let (_r, _) = pcflow::chern::stage_rates(&m, false);
    let t4 = t0.elapsed().as_secs_f64()*1e3;
    let t0 = Instant::now();
    let (_r, _) = pcflow::chern::stage_rates(&m, true);
    let t5 = t0.elapsed().as_secs_f64()*1e3;
    let t0 = Instant::now();
    let _m2 = HermitianMetric::new(m.g().clone()).unwrap();
    let t6 = t0.elapsed().as_secs_f64()*1e3;
    println!("ghat {t1:.0} dg {t2:.0} d2g {t3:.0} | stage_rates {t4:.0} (+diag {t5:.0}) metric_new {t6:.0} [ms]");
}
