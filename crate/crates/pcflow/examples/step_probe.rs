use pcflow::flow::{self, FlowControls, FlowState};
use pcflow::initial::{self, DataKind, DataSpec};
use pcflow::chart::TorusChart;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let grid: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(24);
    let horizon: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let chart = TorusChart::new(2, grid).unwrap();
    let mut spec = DataSpec::defaults(DataKind::PluriclosedRankOne, 2);
    spec.epsilon = 0.05;
    let m = initial::make_pluriclosed_rank_one(&chart, &spec).unwrap();
    let state = FlowState::new(m, None).unwrap();
    let controls = FlowControls { safety: 0.5, deriv_stride: 1_000_000, ..Default::default() };
    let t0 = Instant::now();
    let res = flow::run(state, horizon, &controls).unwrap();
    let el = t0.elapsed().as_secs_f64();
    let steps = res.records.len() - 1;
    println!("N={grid} horizon {horizon}: {} steps in {el:.1}s = {:.0} ms/step (outcome {:?})",
        steps, el * 1000.0 / steps.max(1) as f64, res.outcome);
}
