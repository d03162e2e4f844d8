//! Validated initial metrics: flat, Kähler potential perturbations,
//! non-Kähler pluriclosed metrics from a rank-one Fourier ansatz, and
//! Hermitian-symplectic pairs (ω, φ).
//!
//! The rank-one ansatz places ĝ_{pq̄} = ε·b_p τ_q at one Fourier mode κ
//! (plus the Hermitian-conjugate data at −κ), where τ_q is the ∂_{z̄_q}
//! symbol of κ. The pluriclosed condition in symbols,
//! σ_iτ_j ĝ_{pq̄} − σ_pτ_j ĝ_{iq̄} − σ_iτ_q ĝ_{pj̄} + σ_pτ_q ĝ_{ij̄} = 0,
//! holds identically for this ansatz, and torsion is nonzero whenever b is
//! not parallel to σ.
//!
//! The default coefficient vector additionally satisfies Σ_p τ_p b_p = 0.
//! With that choice every word in the Neumann series of g⁻¹ alternates the
//! mode's ±κ factors, so g⁻¹ (hence Γ, Ω, S, Q) is *exactly* band-limited;
//! all spectral derivatives taken downstream then sit inside the dealias
//! band and the identity suite is exact to round-off. Other vectors are
//! accepted but carry slowly decaying spectral tails.

use num_complex::Complex64;

use crate::chart::ChartRef;
use crate::chern::{self, ChernPackage};
use crate::error::{Error, Result};
use crate::metric::HermitianMetric;
use crate::ops;
use crate::prng::SplitMix64;
use crate::tensor::TensorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Flat,
    Kahler,
    PluriclosedRankOne,
    HermitianSymplectic,
}

impl DataKind {
    pub fn parse(s: &str) -> Result<DataKind> {
        match s {
            "flat" => Ok(DataKind::Flat),
            "kahler" => Ok(DataKind::Kahler),
            "rank_one" | "pluriclosed_rank_one" => Ok(DataKind::PluriclosedRankOne),
            "hs" | "hermitian_symplectic" => Ok(DataKind::HermitianSymplectic),
            other => Err(Error::Config(format!(
                "data.kind: unknown kind '{other}' (expected flat|kahler|rank_one|hs)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DataKind::Flat => "flat",
            DataKind::Kahler => "kahler",
            DataKind::PluriclosedRankOne => "rank_one",
            DataKind::HermitianSymplectic => "hs",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataSpec {
    pub kind: DataKind,
    pub epsilon: f64,
    /// x-frequency per complex axis.
    pub mode_k: Vec<i64>,
    /// y-frequency per complex axis.
    pub mode_m: Vec<i64>,
    /// Coefficient vector b (rank-one and HS kinds); empty = default.
    pub b: Vec<Complex64>,
    pub seed: u64,
}

impl DataSpec {
    /// Defaults: ε = 0.05, mode k = (1,0,...), m = (0,1,0,...) and the
    /// band-limit-preserving coefficient vector b with Σ τ_p b_p = 0.
    pub fn defaults(kind: DataKind, n: usize) -> DataSpec {
        let mut mode_k = vec![0i64; n];
        let mut mode_m = vec![0i64; n];
        mode_k[0] = 1;
        if n > 1 {
            mode_m[1] = 1;
        } else {
            mode_m[0] = 1;
        }
        DataSpec {
            kind,
            epsilon: 0.05,
            mode_k,
            mode_m,
            b: Vec::new(),
            seed: 1,
        }
    }

    /// Interleaved real-axis frequency vector (k_1, m_1, k_2, m_2, ...).
    pub fn kappa(&self, n: usize) -> Result<Vec<i64>> {
        if self.mode_k.len() != n || self.mode_m.len() != n {
            return Err(Error::Config(format!(
                "data.mode: expected {n} entries per axis, got k:{} m:{}",
                self.mode_k.len(),
                self.mode_m.len()
            )));
        }
        let mut kappa = Vec::with_capacity(2 * n);
        for j in 0..n {
            kappa.push(self.mode_k[j]);
            kappa.push(self.mode_m[j]);
        }
        Ok(kappa)
    }

    /// The coefficient vector, defaulted so that Σ τ_p b_p = 0 (see module
    /// docs); falls back to an explicit user vector when given.
    pub fn coefficient_vector(&self, chart: &ChartRef) -> Result<Vec<Complex64>> {
        let n = chart.n();
        if !self.b.is_empty() {
            if self.b.len() != n {
                return Err(Error::Config(format!(
                    "data.b: expected {n} complex entries, got {}",
                    self.b.len()
                )));
            }
            return Ok(self.b.clone());
        }
        let kappa = self.kappa(n)?;
        let tau: Vec<Complex64> = (0..n).map(|j| chart.tau(j, &kappa)).collect();
        // pick the two axes with the largest |τ| and solve τ_u b_u + τ_v b_v = 0
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| tau[b].norm().partial_cmp(&tau[a].norm()).unwrap());
        let (u, v) = (order[0], order[1 % n]);
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        if n == 1 || tau[v].norm() == 0.0 {
            // no second axis to balance against; fall back to a unit vector
            b[u] = Complex64::new(1.0, 0.0);
        } else {
            b[v] = Complex64::new(1.0, 0.0);
            b[u] = -tau[v] / tau[u];
        }
        Ok(b)
    }
}

/// The unit metric g = δ.
pub fn make_flat(chart: &ChartRef) -> Result<HermitianMetric> {
    let g = TensorField::from_fn(chart.clone(), 1, 1, |idx, _| {
        if idx[0] == idx[1] {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    HermitianMetric::new(g)
}

/// g = δ + ∂∂̄f for the real potential f = ε cos(2π κ·x).
pub fn make_kahler_perturbation(chart: &ChartRef, spec: &DataSpec) -> Result<HermitianMetric> {
    let n = chart.n();
    let kappa = spec.kappa(n)?;
    if kappa.iter().all(|&k| k == 0) {
        return Err(Error::Config("data.mode: mode must be nonzero".into()));
    }
    let mode = chart.fourier_mode(&kappa);
    let sigma: Vec<Complex64> = (0..n).map(|j| chart.sigma(j, &kappa)).collect();
    let tau: Vec<Complex64> = (0..n).map(|j| chart.tau(j, &kappa)).collect();
    let eps = spec.epsilon;
    // ∂_i∂_j̄ f = ε σ_i τ_j cos(2πκ·x) since σ(−κ)τ(−κ) = σ(κ)τ(κ)
    let g = TensorField::from_fn(chart.clone(), 1, 1, |idx, gpt| {
        let (i, j) = (idx[0], idx[1]);
        let base = if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        base + eps * sigma[i] * tau[j] * mode[gpt].re
    });
    HermitianMetric::new(g).map_err(|e| match e {
        Error::Positivity { min_eig, .. } => Error::Positivity {
            min_eig,
            max_admissible_eps: Some(eps / (1.0 - min_eig)),
        },
        other => other,
    })
}

fn rank_one_field(
    chart: &ChartRef,
    kappa: &[i64],
    b: &[Complex64],
    eps: f64,
) -> (TensorField, Vec<Complex64>, Vec<Complex64>) {
    let n = chart.n();
    let mode = chart.fourier_mode(kappa);
    let sigma: Vec<Complex64> = (0..n).map(|j| chart.sigma(j, kappa)).collect();
    let tau: Vec<Complex64> = (0..n).map(|j| chart.tau(j, kappa)).collect();
    let g = TensorField::from_fn(chart.clone(), 1, 1, |idx, gpt| {
        let (p, q) = (idx[0], idx[1]);
        let base = if p == q {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let m = mode[gpt];
        base + eps * (b[p] * tau[q] * m + (b[q] * tau[p]).conj() * m.conj())
    });
    (g, sigma, tau)
}

/// Certified non-Kähler pluriclosed metric from the rank-one ansatz.
pub fn make_pluriclosed_rank_one(chart: &ChartRef, spec: &DataSpec) -> Result<HermitianMetric> {
    let n = chart.n();
    if n < 2 {
        return Err(Error::argument(
            "rank-one pluriclosed data needs complex dimension n >= 2",
        ));
    }
    let kappa = spec.kappa(n)?;
    if kappa.iter().all(|&k| k == 0) {
        return Err(Error::Config("data.mode: mode must be nonzero".into()));
    }
    let b = spec.coefficient_vector(chart)?;
    let sigma: Vec<Complex64> = (0..n).map(|j| chart.sigma(j, &kappa)).collect();
    // torsion coefficients W_{ij} = σ_i b_j − σ_j b_i vanish iff b ∥ σ
    let mut w_max: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            w_max = w_max.max((sigma[i] * b[j] - sigma[j] * b[i]).norm());
        }
    }
    if w_max < 1e-14 {
        return Err(Error::Degenerate(
            "coefficient vector parallel to the mode symbol; torsion would vanish".into(),
        ));
    }
    let (g, _, _) = rank_one_field(chart, &kappa, &b, spec.epsilon);
    HermitianMetric::new(g).map_err(|e| match e {
        Error::Positivity { min_eig, .. } => Error::Positivity {
            min_eig,
            // the perturbation is linear in ε, so the admissible range is exact
            max_admissible_eps: Some(spec.epsilon / (1.0 - min_eig)),
        },
        other => other,
    })
}

/// Hermitian-symplectic pair: the rank-one metric ω together with the
/// (2,0)-part φ̂_{ij} = −ε(σ_i b_j − σ_j b_i) at the mode, which satisfies
/// ∂φ = 0 identically and ∇̄φ = −T exactly for this ansatz.
pub struct HsState {
    pub omega: HermitianMetric,
    pub phi: TensorField,
    pub compat_residual: f64,
}

pub fn make_hermitian_symplectic(chart: &ChartRef, spec: &DataSpec) -> Result<HsState> {
    let n = chart.n();
    let omega = make_pluriclosed_rank_one(chart, spec)?;
    let kappa = spec.kappa(n)?;
    let b = spec.coefficient_vector(chart)?;
    let sigma: Vec<Complex64> = (0..n).map(|j| chart.sigma(j, &kappa)).collect();
    let mode = chart.fourier_mode(&kappa);
    let eps = spec.epsilon;
    let phi = TensorField::from_fn(chart.clone(), 2, 0, |idx, gpt| {
        let (i, j) = (idx[0], idx[1]);
        -eps * (sigma[i] * b[j] - sigma[j] * b[i]) * mode[gpt]
    });
    // construction invariant: max|∇̄φ + T| small (φ has no barred slots, so
    // ∇̄φ = ∂̄φ)
    let pkg = ChernPackage::compute(&omega);
    let compat = hs_compat_residual(&omega, &pkg, &phi)?;
    if compat > 1e-8 {
        return Err(Error::argument(format!(
            "HS compatibility residual {compat:.3e} exceeds 1e-8 at construction"
        )));
    }
    Ok(HsState {
        omega,
        phi,
        compat_residual: compat,
    })
}

/// max|∇̄φ + T| over slots and grid.
pub fn hs_compat_residual(
    metric: &HermitianMetric,
    pkg: &ChernPackage,
    phi: &TensorField,
) -> Result<f64> {
    let nb = chern::covariant_derivative(phi, metric, &pkg.gamma, chern::GradDirection::AntiHolomorphic)?;
    // (∇̄φ)[i,j;k̄] + T[i,j;k̄]
    Ok(nb.add(&pkg.torsion).max_abs())
}

/// Random Hermitian single-mode perturbation (band-limited, generally NOT
/// pluriclosed); negative control for the certification residuals.
pub fn make_random_hermitian(chart: &ChartRef, eps: f64, seed: u64) -> Result<HermitianMetric> {
    let n = chart.n();
    let mut kappa = vec![0i64; 2 * n];
    kappa[0] = 1;
    if 2 * n > 3 {
        kappa[3] = 1;
    }
    let mode = chart.fourier_mode(&kappa);
    let mut rng = SplitMix64::new(seed);
    let mut coef = vec![Complex64::new(0.0, 0.0); n * n];
    for v in coef.iter_mut() {
        *v = Complex64::new(rng.next_signed(), rng.next_signed());
    }
    let g = TensorField::from_fn(chart.clone(), 1, 1, |idx, gpt| {
        let (i, j) = (idx[0], idx[1]);
        let base = if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let m = mode[gpt];
        base + eps * (coef[i * n + j] * m + coef[j * n + i].conj() * m.conj())
    });
    HermitianMetric::new(g)
}

/// Validation summary for a metric (optionally with an HS (2,0)-part).
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub hermitian_residual: f64,
    pub pluriclosed_residual: f64,
    pub pluriclosed_rel_residual: f64,
    pub torsion_sq_max: f64,
    pub hs_compat_residual: Option<f64>,
    pub pass: bool,
}

/// Report-only validation against the tolerance ladder (pluriclosed
/// certification at 1e-8 relative, HS compatibility at 1e-8).
pub fn validate(metric: &HermitianMetric, phi: Option<&TensorField>) -> Result<ValidationReport> {
    let pkg = ChernPackage::compute(metric);
    let (pc_abs, pc_rel) = chern::pluriclosed_residual(metric, &pkg)?;
    let tsq = ops::max_norm_sq(&pkg.torsion, metric)?;
    let hs = match phi {
        Some(phi) => Some(hs_compat_residual(metric, &pkg, phi)?),
        None => None,
    };
    let pass = pc_rel < 1e-8 && hs.map_or(true, |h| h < 1e-8) && metric.min_eig() > 0.0;
    Ok(ValidationReport {
        min_eig: metric.min_eig(),
        max_eig: metric.max_eig(),
        hermitian_residual: metric.hermitian_residual(),
        pluriclosed_residual: pc_abs,
        pluriclosed_rel_residual: pc_rel,
        torsion_sq_max: tsq,
        hs_compat_residual: hs,
        pass,
    })
}
