//! Explicit adaptive integration of the pluriclosed flow ∂ₜg = −S + Q,
//! optionally coupled to the (2,0)-part heat flow ∂ₜφ = Δφ, with per-step
//! diagnostics and estimate monitors.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use std::sync::OnceLock;

use crate::chern::{self, ChernPackage, LaplacianVariant, PackageDiagnostics, StageRates};
use crate::error::{Error, Result};
use crate::initial;
use crate::metric::HermitianMetric;
use crate::ops;
use crate::tensor::TensorField;

/// One point of the flow trajectory. The flow itself only needs the trace
/// rates (S, Ric, Q, T); the full Chern package is rebuilt lazily when an
/// identity check or derivative monitor asks for it.
pub struct FlowState {
    pub t: f64,
    pub metric: HermitianMetric,
    pub phi: Option<TensorField>,
    rates: StageRates,
    pub pkg_diag: PackageDiagnostics,
    package_cell: OnceLock<ChernPackage>,
}

impl Clone for FlowState {
    fn clone(&self) -> Self {
        let cell = OnceLock::new();
        if let Some(pkg) = self.package_cell.get() {
            let _ = cell.set(pkg.clone());
        }
        FlowState {
            t: self.t,
            metric: self.metric.clone(),
            phi: self.phi.clone(),
            rates: StageRates {
                torsion: self.rates.torsion.clone(),
                s_trace: self.rates.s_trace.clone(),
                ric_trace: self.rates.ric_trace.clone(),
                q_tensor: self.rates.q_tensor.clone(),
            },
            pkg_diag: self.pkg_diag,
            package_cell: cell,
        }
    }
}

impl FlowState {
    pub fn new(metric: HermitianMetric, phi: Option<TensorField>) -> Result<FlowState> {
        if let Some(phi) = &phi {
            if (phi.p(), phi.q()) != (2, 0) {
                return Err(Error::Signature {
                    expected_p: 2,
                    expected_q: 0,
                    got_p: phi.p(),
                    got_q: phi.q(),
                });
            }
            if !phi.chart().same_as(metric.chart()) {
                return Err(Error::ChartMismatch("phi chart differs from metric".into()));
            }
        }
        let (rates, diag) = chern::stage_rates(&metric, true);
        Ok(FlowState {
            t: 0.0,
            metric,
            phi,
            rates,
            pkg_diag: diag,
            package_cell: OnceLock::new(),
        })
    }

    pub fn from_hs(hs: initial::HsState) -> Result<FlowState> {
        FlowState::new(hs.omega, Some(hs.phi))
    }

    pub fn rates(&self) -> &StageRates {
        &self.rates
    }

    /// The full canonical Chern package of this state (Γ-path curvature),
    /// built on first use and cached.
    pub fn package(&self) -> &ChernPackage {
        self.package_cell
            .get_or_init(|| ChernPackage::compute(&self.metric))
    }
}

/// Integration controls. `deriv_stride` refreshes the expensive derivative
/// norms d1/d2 every k-th step (they are always refreshed at probe times and
/// at the final record; intermediate records carry the last computed value).
#[derive(Debug, Clone)]
pub struct FlowControls {
    pub safety: f64,
    pub blowup_factor: f64,
    pub max_rejects: usize,
    pub deriv_stride: usize,
    pub probe_times: Vec<f64>,
}

impl Default for FlowControls {
    fn default() -> Self {
        FlowControls {
            safety: 0.2,
            blowup_factor: 1e3,
            max_rejects: 10,
            deriv_stride: 1,
            probe_times: Vec::new(),
        }
    }
}

/// Per-step monitor row. `max_ric_s` backs the torsion-estimate monitor and
/// is not part of the CSV schema.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub max_curv: f64,
    pub max_torsion_sq: f64,
    pub max_phi_sq: f64,
    pub d1: f64,
    pub d2: f64,
    pub scaled1: f64,
    pub scaled2: f64,
    pub pluriclosed_residual: f64,
    pub hs_residual: f64,
    pub min_eig: f64,
    #[serde(skip)]
    pub max_ric_s: f64,
}

/// The flow right-hand side: Hermitian-symmetrized −S + Q and, when φ is
/// present, Δφ. Returns the symmetrization correction magnitude as the
/// third element (a numerical guard; it is round-off sized).
pub fn flow_rhs(state: &FlowState) -> Result<(TensorField, Option<TensorField>, f64)> {
    let phi_gamma = state.phi.as_ref().map(|_| state.package().gamma.clone());
    rhs_from_parts(
        &state.metric,
        &state.rates.s_trace,
        &state.rates.q_tensor,
        state.phi.as_ref(),
        phi_gamma.as_ref(),
    )
}

fn rhs_from_parts(
    metric: &HermitianMetric,
    s_trace: &TensorField,
    q_tensor: &TensorField,
    phi: Option<&TensorField>,
    gamma: Option<&TensorField>,
) -> Result<(TensorField, Option<TensorField>, f64)> {
    let n = metric.n();
    let points = metric.chart().points();
    let mut raw = q_tensor.sub(s_trace);
    // Hermitian symmetrization: rate[i,j] = (raw[i,j] + conj(raw[j,i]))/2
    let mut correction: f64 = 0.0;
    {
        let snapshot = raw.clone();
        let data = raw.data_mut();
        let corr: Vec<f64> = (0..n * n)
            .map(|c| {
                let (i, j) = (c / n, c % n);
                let other = snapshot.comp(j * n + i);
                let this = &mut data[c * points..(c + 1) * points];
                let mut worst: f64 = 0.0;
                for (v, o) in this.iter_mut().zip(other) {
                    let sym = (*v + o.conj()) * 0.5;
                    worst = worst.max((*v - sym).norm());
                    *v = sym;
                }
                worst
            })
            .collect();
        correction = corr.into_iter().fold(correction, f64::max);
    }
    let phi_rate = match (phi, gamma) {
        (Some(phi), Some(gamma)) => Some(chern::chern_laplacian(
            phi,
            metric,
            gamma,
            LaplacianVariant::Box,
        )?),
        (Some(_), None) => {
            return Err(Error::argument("phi rate needs Christoffel symbols"));
        }
        _ => None,
    };
    Ok((raw, phi_rate, correction))
}

fn advanced_metric(
    base: &HermitianMetric,
    rate: &TensorField,
    dt: f64,
) -> Result<HermitianMetric> {
    let mut g = base.g().clone();
    g.axpy(Complex64::new(dt, 0.0), rate);
    HermitianMetric::new(g)
}

fn advanced_phi(base: &Option<TensorField>, rate: &Option<TensorField>, dt: f64) -> Option<TensorField> {
    match (base, rate) {
        (Some(phi), Some(r)) => {
            let mut out = phi.clone();
            out.axpy(Complex64::new(dt, 0.0), r);
            Some(out)
        }
        _ => base.clone(),
    }
}

/// One classical 4-stage explicit step of size `dt` (sign-free; negative dt
/// steps backwards). Positivity is enforced at every stage; a violation
/// surfaces as `Error::Positivity`, which `run` treats as a step rejection.
pub fn step_rk4(state: &FlowState, dt: f64) -> Result<FlowState> {
    if dt == 0.0 {
        return Err(Error::argument("dt must be nonzero"));
    }
    let (k1_g, k1_p, _) = flow_rhs(state)?;
    // positivity margin heuristic: min_eig > 10·|dt|·max|rate|
    let rate_inf = k1_g.max_abs();
    if state.metric.min_eig() <= 10.0 * dt.abs() * rate_inf {
        return Err(Error::Positivity {
            min_eig: state.metric.min_eig(),
            max_admissible_eps: None,
        });
    }

    let half = 0.5 * dt;
    // stage right sides come from the lean trace rates; Christoffel symbols
    // are only assembled when a (2,0)-part is being evolved
    let stage_rhs = |metric: &HermitianMetric,
                     phi: Option<&TensorField>|
     -> Result<(TensorField, Option<TensorField>)> {
        let (rates, _) = chern::stage_rates(metric, false);
        let gamma = phi.map(|_| chern::christoffel(metric));
        let (g_rate, phi_rate, _) =
            rhs_from_parts(metric, &rates.s_trace, &rates.q_tensor, phi, gamma.as_ref())?;
        Ok((g_rate, phi_rate))
    };

    let m1 = advanced_metric(&state.metric, &k1_g, half)?;
    let p1 = advanced_phi(&state.phi, &k1_p, half);
    let (k2_g, k2_p) = stage_rhs(&m1, p1.as_ref())?;
    let m2 = advanced_metric(&state.metric, &k2_g, half)?;
    let p2 = advanced_phi(&state.phi, &k2_p, half);
    let (k3_g, k3_p) = stage_rhs(&m2, p2.as_ref())?;
    let m3 = advanced_metric(&state.metric, &k3_g, dt)?;
    let p3 = advanced_phi(&state.phi, &k3_p, dt);
    let (k4_g, k4_p) = stage_rhs(&m3, p3.as_ref())?;

    let sixth = dt / 6.0;
    let mut g = state.metric.g().clone();
    g.axpy(Complex64::new(sixth, 0.0), &k1_g);
    g.axpy(Complex64::new(2.0 * sixth, 0.0), &k2_g);
    g.axpy(Complex64::new(2.0 * sixth, 0.0), &k3_g);
    g.axpy(Complex64::new(sixth, 0.0), &k4_g);
    hermitian_symmetrize(&mut g);
    let metric = HermitianMetric::new(g)?;

    let phi = match &state.phi {
        Some(phi) => {
            let mut out = phi.clone();
            out.axpy(Complex64::new(sixth, 0.0), k1_p.as_ref().unwrap());
            out.axpy(Complex64::new(2.0 * sixth, 0.0), k2_p.as_ref().unwrap());
            out.axpy(Complex64::new(2.0 * sixth, 0.0), k3_p.as_ref().unwrap());
            out.axpy(Complex64::new(sixth, 0.0), k4_p.as_ref().unwrap());
            Some(out)
        }
        None => None,
    };
    let (rates, diag) = chern::stage_rates(&metric, true);
    Ok(FlowState {
        t: state.t + dt,
        metric,
        phi,
        rates,
        pkg_diag: diag,
        package_cell: OnceLock::new(),
    })
}

/// Exact Hermitian projection g ← (g + gᴴ)/2.
pub fn hermitian_symmetrize(g: &mut TensorField) {
    let n = g.chart().n();
    let points = g.points();
    let snapshot = g.clone();
    let data = g.data_mut();
    data.par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, slice)| {
            let (i, j) = (c / n, c % n);
            let other = snapshot.comp(j * n + i);
            for (v, o) in slice.iter_mut().zip(other) {
                *v = (*v + o.conj()) * 0.5;
            }
        });
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunOutcome {
    Completed,
    BlowupSuspected,
    PositivityBreakdown { t: f64, dt: f64 },
}

pub struct RunResult {
    pub final_state: FlowState,
    pub records: Vec<DiagnosticsRecord>,
    /// States captured exactly at the requested probe times.
    pub probes: Vec<FlowState>,
    pub outcome: RunOutcome,
}

fn diagnostics(
    state: &FlowState,
    dt: f64,
    k0: f64,
    deriv: Option<(f64, f64)>,
    prev: Option<&DiagnosticsRecord>,
) -> Result<DiagnosticsRecord> {
    let m = &state.metric;
    let d = &state.pkg_diag;
    let (max_curv, max_torsion_sq, pc_rel, max_ric_s) = (
        d.max_curv,
        d.max_torsion_sq,
        d.pluriclosed_rel(),
        d.max_ric_s,
    );
    let max_phi_sq = match &state.phi {
        Some(phi) => ops::max_norm_sq(phi, m)?,
        None => 0.0,
    };
    let (d1, d2) = match (deriv, prev) {
        (Some(d), _) => d,
        (None, Some(p)) => (p.d1, p.d2),
        (None, None) => (0.0, 0.0),
    };
    let (scaled1, scaled2) = if k0 > 0.0 {
        (state.t * d1 / k0, state.t.powf(1.5) * d2 / k0)
    } else {
        (0.0, 0.0)
    };
    let hs_residual = match &state.phi {
        Some(phi) => initial::hs_compat_residual(m, state.package(), phi)?,
        None => 0.0,
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        dt,
        max_curv,
        max_torsion_sq,
        max_phi_sq,
        d1,
        d2,
        scaled1,
        scaled2,
        pluriclosed_residual: pc_rel,
        hs_residual,
        min_eig: m.min_eig(),
        max_ric_s,
    })
}

/// Adaptive run to `horizon`. dt = safety·h²·min_eig/max(1, max|Ω|), capped
/// by the positivity margin and clamped to hit probe times and the horizon
/// exactly. Diagnostics are recorded at t = 0 and after every accepted step;
/// partial results are always returned.
pub fn run(initial_state: FlowState, horizon: f64, controls: &FlowControls) -> Result<RunResult> {
    if !(horizon > 0.0) {
        return Err(Error::argument("horizon must be positive"));
    }
    if controls.deriv_stride == 0 {
        return Err(Error::argument("deriv_stride must be >= 1"));
    }
    let mut probe_times: Vec<f64> = controls
        .probe_times
        .iter()
        .cloned()
        .filter(|&t| t > initial_state.t && t <= horizon)
        .collect();
    probe_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    probe_times.dedup();

    let h = initial_state.metric.chart().spacing();
    let mut state = initial_state;
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut probes: Vec<FlowState> = Vec::new();

    let deriv0 = derivative_norms(&state)?;
    let first = diagnostics(&state, 0.0, 0.0, Some(deriv0), None)?;
    let k0 = first.max_curv;
    // rescale the t=0 record's scaled monitors (K now known; they are 0 at t=0 anyway)
    records.push(first);

    let mut step_index: usize = 0;
    let eps_t = 1e-12;
    loop {
        if state.t >= horizon - eps_t {
            return Ok(RunResult {
                final_state: state,
                records,
                probes,
                outcome: RunOutcome::Completed,
            });
        }
        let last = records.last().unwrap();
        if k0 > 0.0 && last.max_curv > controls.blowup_factor * k0 {
            return Ok(RunResult {
                final_state: state,
                records,
                probes,
                outcome: RunOutcome::BlowupSuspected,
            });
        }

        let mut dt = controls.safety * h * h * state.metric.min_eig() / last.max_curv.max(1.0);
        // margin cap (keeps the step_rk4 precondition satisfied with room);
        // the metric rate alone governs positivity
        let rate_inf = {
            let raw = state.rates.q_tensor.sub(&state.rates.s_trace);
            raw.max_abs().max(1e-300)
        };
        dt = dt.min(0.05 * state.metric.min_eig() / rate_inf);
        // clamp to the next probe time / horizon
        let next_event = probe_times
            .first()
            .cloned()
            .unwrap_or(horizon)
            .min(horizon);
        if state.t + dt >= next_event - eps_t {
            dt = next_event - state.t;
        }

        let mut rejects = 0usize;
        let next = loop {
            match step_rk4(&state, dt) {
                Ok(next) => break Some(next),
                Err(Error::Positivity { .. }) if rejects < controls.max_rejects => {
                    rejects += 1;
                    dt *= 0.5;
                }
                Err(Error::Positivity { .. }) => break None,
                Err(e) => return Err(e),
            }
        };
        let Some(next) = next else {
            return Ok(RunResult {
                outcome: RunOutcome::PositivityBreakdown { t: state.t, dt },
                final_state: state,
                records,
                probes,
            });
        };
        state = next;
        step_index += 1;

        let at_probe = probe_times
            .first()
            .map(|&p| (state.t - p).abs() < eps_t)
            .unwrap_or(false);
        let at_end = state.t >= horizon - eps_t;
        let refresh = step_index % controls.deriv_stride == 0 || at_probe || at_end;
        let deriv = if refresh {
            Some(derivative_norms(&state)?)
        } else {
            None
        };
        let rec = diagnostics(&state, dt, k0, deriv, records.last())?;
        records.push(rec);
        if at_probe {
            probe_times.remove(0);
            probes.push(state.clone());
        }
    }
}

fn derivative_norms(state: &FlowState) -> Result<(f64, f64)> {
    let pkg = state.package();
    chern::derivative_norm_maxes(&pkg.curvature, &state.metric, &pkg.gamma)
}

/// Snapshot triple (t−Δt, t, t+Δt) around a state, via single fixed RK4
/// steps of ±Δt (decoupled from the run's adaptive dt).
pub fn probe_triple(state: &FlowState, dt: f64) -> Result<(FlowState, FlowState, FlowState)> {
    let back = step_rk4(state, -dt)?;
    let fwd = step_rk4(state, dt)?;
    Ok((back, state.clone(), fwd))
}

// ---- estimate monitors -----------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MonitorVerdict {
    pub name: String,
    /// "pass" | "fail" | "skipped"
    pub status: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub smoothing_m1: MonitorVerdict,
    pub smoothing_m2: MonitorVerdict,
    pub torsion_vs_ricci: MonitorVerdict,
    pub phi_monotone: MonitorVerdict,
    pub loglog_slope_d1: Option<f64>,
}

/// Shape checks of the derivative estimates and the HS monotone quantity.
///
/// (a) sup_t t^{(m+1)/2}·max|DᵐΩ|/K for m = 1,2 must stay below `bound`
///     (K = max|Ω| at t = 0);
/// (b) max|T|² ≤ max(c·K_ric, initial max|T|²) with K_ric = sup max|Ric+S|;
///     c is fitted and reported, not asserted;
/// (c) max|φ|² strictly decreasing (any increase above 1e-10·max flagged).
pub fn estimate_monitors(records: &[DiagnosticsRecord], bound: f64) -> Result<EstimateReport> {
    if records.is_empty() {
        return Err(Error::argument("estimate_monitors needs records"));
    }
    // round-off noise on exactly-flat data must not arm the monitors
    let tiny = 1e-12;
    let k0 = if records[0].max_curv > tiny {
        records[0].max_curv
    } else {
        0.0
    };
    let skipped = |name: &str, note: &str| MonitorVerdict {
        name: name.into(),
        status: "skipped".into(),
        value: None,
        bound: None,
        note: note.into(),
    };

    let (m1, m2) = if k0 > 0.0 {
        let sup1 = records
            .iter()
            .map(|r| r.scaled1)
            .fold(0.0f64, f64::max);
        let sup2 = records
            .iter()
            .map(|r| r.scaled2)
            .fold(0.0f64, f64::max);
        let verdict = |name: &str, v: f64| MonitorVerdict {
            name: name.into(),
            status: if v.is_finite() && v <= bound {
                "pass".into()
            } else {
                "fail".into()
            },
            value: Some(v),
            bound: Some(bound),
            note: String::new(),
        };
        (
            verdict("smoothing_m1: sup t·|D1(curv)|/K", sup1),
            verdict("smoothing_m2: sup t^1.5·|D2(curv)|/K", sup2),
        )
    } else {
        (
            skipped("smoothing_m1", "K = 0 on flat data"),
            skipped("smoothing_m2", "K = 0 on flat data"),
        )
    };

    let k_ric = records.iter().map(|r| r.max_ric_s).fold(0.0f64, f64::max);
    let torsion = if k_ric > tiny {
        let c_fit = records
            .iter()
            .map(|r| r.max_torsion_sq / k_ric)
            .fold(0.0f64, f64::max);
        let t0 = records[0].max_torsion_sq;
        let bound_val = (c_fit * k_ric).max(t0);
        let ok = records
            .iter()
            .all(|r| r.max_torsion_sq <= bound_val * (1.0 + 1e-12) + 1e-300);
        MonitorVerdict {
            name: "torsion_sq <= max(c·sup|Ric+S|, initial)".into(),
            status: if ok { "pass".into() } else { "fail".into() },
            value: Some(c_fit),
            bound: None,
            note: format!("fitted c = {c_fit:.6e}, sup|Ric+S| = {k_ric:.6e}"),
        }
    } else {
        skipped("torsion_vs_ricci", "|Ric+S| = 0 along the run")
    };

    let phi_max = records.iter().map(|r| r.max_phi_sq).fold(0.0f64, f64::max);
    let phi = if phi_max > tiny {
        let tol = 1e-10 * phi_max;
        let mut ok = true;
        for w in records.windows(2) {
            if w[1].max_phi_sq > w[0].max_phi_sq + tol {
                ok = false;
                break;
            }
        }
        // strictness: require overall decrease too
        let strict = records.last().unwrap().max_phi_sq < records[0].max_phi_sq;
        MonitorVerdict {
            name: "max|phi|^2 strictly decreasing".into(),
            status: if ok && strict { "pass".into() } else { "fail".into() },
            value: Some(records.last().unwrap().max_phi_sq / records[0].max_phi_sq),
            bound: None,
            note: "value = final/initial ratio".into(),
        }
    } else {
        skipped("phi_monotone", "no (2,0)-part on this run")
    };

    // log-log slope of d1 vs t over the early window (first half of records
    // with t > 0 and d1 > 0), reported only
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t > 0.0 && r.d1 > 0.0)
        .map(|r| (r.t.ln(), r.d1.ln()))
        .collect();
    let slope = if pts.len() >= 4 {
        let half = &pts[..pts.len() / 2];
        let nf = half.len() as f64;
        let sx: f64 = half.iter().map(|p| p.0).sum();
        let sy: f64 = half.iter().map(|p| p.1).sum();
        let sxx: f64 = half.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = half.iter().map(|p| p.0 * p.1).sum();
        let denom = nf * sxx - sx * sx;
        if denom.abs() > 1e-30 {
            Some((nf * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };

    Ok(EstimateReport {
        smoothing_m1: m1,
        smoothing_m2: m2,
        torsion_vs_ricci: torsion,
        phi_monotone: phi,
        loglog_slope_d1: slope,
    })
}
