// scratch probe with phase timing
use pcflow::chart::TorusChart;
use pcflow::flow::{self, FlowControls, FlowState};
use pcflow::identity::{evaluate, CaseId, CaseInputs};
use pcflow::initial::{self, DataKind, DataSpec};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let grid: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(12);
    let pdt: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let chart = TorusChart::new(2, grid).unwrap();
    let mut spec = DataSpec::defaults(DataKind::HermitianSymplectic, 2);
    spec.epsilon = 0.05;
    let t0 = Instant::now();
    let hs = initial::make_hermitian_symplectic(&chart, &spec).unwrap();
    let state = FlowState::from_hs(hs).unwrap();
    println!("build: {:.2}s", t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    let controls = FlowControls { probe_times: vec![0.02], deriv_stride: 1_000_000, ..Default::default() };
    let res = flow::run(state, 0.02, &controls).unwrap();
    println!("flow to 0.02: {:.2}s ({} records)", t0.elapsed().as_secs_f64(), res.records.len());
    let t0 = Instant::now();
    let triple = flow::probe_triple(&res.final_state, pdt).unwrap();
    println!("triple: {:.2}s", t0.elapsed().as_secs_f64());
    for id in [CaseId::EvChristoffel, CaseId::EvCurvature, CaseId::EvTorsion,
               CaseId::EvNormGeneral, CaseId::EvTorsionSq, CaseId::EvTorsionSqDim2,
               CaseId::EvPhiHeat, CaseId::DivTVsLaplacePhi, CaseId::HsCompat] {
        let t0 = Instant::now();
        let rep = evaluate(&id.case(), &CaseInputs::Triple { triple: &triple, dt: pdt }).unwrap();
        println!("{:22} rel {:.3e} pass {}  ({:.2}s)", rep.case, rep.rel_residual, rep.pass, t0.elapsed().as_secs_f64());
    }
}
