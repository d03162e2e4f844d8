//! Hermitian metrics with cached pointwise inverse and eigenvalue extremes.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chart::ChartRef;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::TensorField;

/// A positive Hermitian (1,1) tensor field g_{ij̄} together with its
/// pointwise inverse. The inverse is stored as a (1,1) field whose component
/// (a, b) holds g^{b̄a}, i.e. Σ_b g_{ib̄} g^{b̄a} = δ_i^a pointwise.
#[derive(Debug, Clone)]
pub struct HermitianMetric {
    g: TensorField,
    g_inv: TensorField,
    min_eig: f64,
    max_eig: f64,
    hermitian_residual: f64,
    inverse_residual: f64,
}

impl HermitianMetric {
    pub fn new(g: TensorField) -> Result<Self> {
        if (g.p(), g.q()) != (1, 1) {
            return Err(Error::Signature {
                expected_p: 1,
                expected_q: 1,
                got_p: g.p(),
                got_q: g.q(),
            });
        }
        let chart = g.chart().clone();
        let n = chart.n();
        let points = chart.points();
        let scale = 1.0 + g.max_abs();

        // Hermitian symmetry residual max |g_ij̄ - conj(g_jī)|.
        let herm = (0..n * n)
            .into_par_iter()
            .map(|c| {
                let (i, j) = (c / n, c % n);
                let a = g.comp(i * n + j);
                let b = g.comp(j * n + i);
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - y.conj()).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        if herm > 1e-10 * scale {
            return Err(Error::argument(format!(
                "metric is not Hermitian: residual {herm:.3e}"
            )));
        }

        // Pointwise inverse + eigenvalue extremes, cache-blocked over point
        // chunks. The inverse is stored back in component-major layout.
        const CHUNK: usize = 2048;
        let chunk = CHUNK.min(points);
        let nblocks = points.div_ceil(chunk);
        let mut inv_buf = vec![Complex64::new(0.0, 0.0); points * n * n];
        let stats: Vec<(f64, f64, f64)> = inv_buf
            .par_chunks_mut(chunk * n * n)
            .enumerate()
            .map(|(ci, inv_loc)| {
                let start = ci * chunk;
                let len = (points - start).min(chunk);
                let mut gl = vec![Complex64::new(0.0, 0.0); n * n * len];
                for c in 0..n * n {
                    gl[c * len..(c + 1) * len].copy_from_slice(&g.comp(c)[start..start + len]);
                }
                let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
                let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
                let mut lo_all = f64::INFINITY;
                let mut hi_all = f64::NEG_INFINITY;
                let mut res_all: f64 = 0.0;
                for gpt in 0..len {
                    for c in 0..n * n {
                        mat[c] = gl[c * len + gpt];
                    }
                    let (lo, hi) = linalg::eig_range(&mat, n);
                    lo_all = lo_all.min(lo);
                    hi_all = hi_all.max(hi);
                    if !linalg::invert(&mat, n, &mut inv) {
                        res_all = f64::INFINITY;
                        continue;
                    }
                    let mut res: f64 = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let mut s = Complex64::new(0.0, 0.0);
                            for k in 0..n {
                                s += mat[i * n + k] * inv[k * n + j];
                            }
                            if i == j {
                                s -= Complex64::new(1.0, 0.0);
                            }
                            res = res.max(s.norm());
                        }
                    }
                    res_all = res_all.max(res);
                    // store g^{b̄a} at component (a,b): inv matrix entry [b][a]
                    for a in 0..n {
                        for b in 0..n {
                            inv_loc[(a * n + b) * len + gpt] = inv[b * n + a];
                        }
                    }
                }
                (lo_all, hi_all, res_all)
            })
            .collect();

        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        let mut inv_res: f64 = 0.0;
        for (lo, hi, r) in stats {
            min_eig = min_eig.min(lo);
            max_eig = max_eig.max(hi);
            inv_res = inv_res.max(r);
        }
        if !(min_eig > 0.0) {
            return Err(Error::Positivity {
                min_eig,
                max_admissible_eps: None,
            });
        }
        if inv_res > 1e-12 * scale.max(max_eig) {
            return Err(Error::argument(format!(
                "metric inverse residual {inv_res:.3e} exceeds 1e-12 relative"
            )));
        }

        let mut g_inv = TensorField::zero(chart, 1, 1);
        for ci in 0..nblocks {
            let start = ci * chunk;
            let len = (points - start).min(chunk);
            let base = ci * chunk * n * n;
            for c in 0..n * n {
                g_inv.comp_mut(c)[start..start + len]
                    .copy_from_slice(&inv_buf[base + c * len..base + (c + 1) * len]);
            }
        }

        Ok(HermitianMetric {
            g,
            g_inv,
            min_eig,
            max_eig,
            hermitian_residual: herm,
            inverse_residual: inv_res,
        })
    }

    pub fn chart(&self) -> &ChartRef {
        self.g.chart()
    }

    pub fn n(&self) -> usize {
        self.g.chart().n()
    }

    pub fn g(&self) -> &TensorField {
        &self.g
    }

    /// Inverse metric as a (1,1) field; component (a,b) is g^{b̄a}.
    pub fn g_inv(&self) -> &TensorField {
        &self.g_inv
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn max_eig(&self) -> f64 {
        self.max_eig
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.hermitian_residual
    }

    pub fn inverse_residual(&self) -> f64 {
        self.inverse_residual
    }

    /// g_{ij̄} at a point.
    pub fn g_at(&self, i: usize, j: usize, gpt: usize) -> Complex64 {
        let n = self.n();
        self.g.comp(i * n + j)[gpt]
    }

    /// g^{b̄a} at a point.
    pub fn inv_at(&self, a: usize, b: usize, gpt: usize) -> Complex64 {
        let n = self.n();
        self.g_inv.comp(a * n + b)[gpt]
    }

    /// The metric a·g for a constant a > 0 (used by scaling-invariance checks).
    pub fn scaled(&self, a: f64) -> Result<HermitianMetric> {
        if !(a > 0.0) {
            return Err(Error::argument("scale factor must be positive"));
        }
        HermitianMetric::new(self.g.scaled(Complex64::new(a, 0.0)))
    }
}
