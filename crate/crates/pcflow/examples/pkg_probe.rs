use pcflow::chart::{DerivDirection, TorusChart};
use pcflow::initial::{self, DataKind, DataSpec};
use pcflow::tensor::TensorField;
use std::time::Instant;

fn main() {
    for grid in [16usize, 24] {
        let chart = TorusChart::new(2, grid).unwrap();
        let mut spec = DataSpec::defaults(DataKind::PluriclosedRankOne, 2);
        spec.epsilon = 0.05;
        let m = initial::make_pluriclosed_rank_one(&chart, &spec).unwrap();
        // warm
        let _ = pcflow::chern::ChernPackage::compute(&m);

        let t0 = Instant::now();
        let ghat = m.g().to_spectral();
        let t1 = t0.elapsed().as_secs_f64()*1e3;

        let t0 = Instant::now();
        let dg: Vec<TensorField> = (0..2).map(|a| ghat.derivative(DerivDirection::Holomorphic(a))).collect();
        let t2 = t0.elapsed().as_secs_f64()*1e3;

        let t0 = Instant::now();
        let gamma = pcflow::chern::christoffel(&m);
        let t3 = t0.elapsed().as_secs_f64()*1e3; // includes dg recompute: subtract t1+t2 mentally

        let t0 = Instant::now();
        let ghat2 = gamma.to_spectral();
        let t4 = t0.elapsed().as_secs_f64()*1e3;

        let t0 = Instant::now();
        let _dbg: Vec<TensorField> = (0..2).map(|j| ghat2.derivative(DerivDirection::AntiHolomorphic(j))).collect();
        let t5 = t0.elapsed().as_secs_f64()*1e3;

        // single comp FFT timings: fwd vs derived-style
        let mut one = m.g().comp(0).to_vec();
        let t0 = Instant::now();
        for _ in 0..10 { chart.forward(&mut one); }
        let t_fwd = t0.elapsed().as_secs_f64()*1e2;
        let t0 = Instant::now();
        for _ in 0..10 { chart.inverse(&mut one); }
        let t_inv = t0.elapsed().as_secs_f64()*1e2;

        let t0 = Instant::now();
        let _pkg = pcflow::chern::ChernPackage::compute(&m);
        let t_all = t0.elapsed().as_secs_f64()*1e3;
        let t0 = Instant::now();
        let _pkg = pcflow::chern::ChernPackage::compute_with_diagnostics(&m);
        let t_alld = t0.elapsed().as_secs_f64()*1e3;

        println!("N={grid}: ghat {t1:.0} dg {t2:.0} gamma(incl dg) {t3:.0} gammahat {t4:.0} dbg {t5:.0} | 1-comp fwd {t_fwd:.2} inv {t_inv:.2} | pkg {t_all:.0} pkg+diag {t_alld:.0} [ms]");
    }
}
