//! Chern-connection geometry of a Hermitian metric: Christoffel symbols,
//! torsion, curvature, traces, covariant derivatives, Laplacians, torsion
//! divergence, and mixed gradient norms.
//!
//! Storage conventions (see [`crate::tensor`]): the curvature Ω_{ij̄pq̄} is a
//! (2,2) field with component (i, p, j, q); torsion T_{ijk̄} is (2,1) with
//! component (i, j, k). Christoffel symbols Γ_{ij}^a are held in a
//! (3,0)-shaped field with component (i, j, a); the third slot is a raised
//! index, so Γ is connection data rather than a tensor and is never fed to
//! metric contractions.
//!
//! Accuracy note: spectral derivatives apply the 2/3 dealias mask, so every
//! identity of this module is exact (to round-off) whenever each
//! *differentiated* intermediate stays inside the mask band; products that
//! are only combined pointwise may exceed it freely.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chart::DerivDirection;
use crate::error::{Error, Result};
use crate::metric::HermitianMetric;
use crate::ops;
use crate::tensor::{decode_index, TensorField};

/// Gradient flavor for [`covariant_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradDirection {
    /// ∇: adds one unbarred slot (in front of the unbarred block).
    Holomorphic,
    /// ∇̄: adds one barred slot (in front of the barred block).
    AntiHolomorphic,
}

/// Which Laplacian trace to take in [`chern_laplacian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianVariant {
    /// Δ = ∇_a ∇_ā (∇̄ first, then ∇, then the metric trace).
    Box,
    /// Δ̄ = ∇_ā ∇_a.
    BoxBar,
}

/// All first-order Chern data of one metric.
#[derive(Clone)]
pub struct ChernPackage {
    pub gamma: TensorField,
    pub torsion: TensorField,
    pub curvature: TensorField,
    pub s_trace: TensorField,
    pub ric_trace: TensorField,
    pub q_tensor: TensorField,
}

/// ∂_a g for all holomorphic axes a, from one forward transform of g.
fn metric_derivatives(metric: &HermitianMetric) -> Vec<TensorField> {
    let spec = metric.g().to_spectral();
    (0..metric.n())
        .map(|a| spec.derivative(DerivDirection::Holomorphic(a)))
        .collect()
}

/// Γ_{ij}^a = ∂_i g_{jb̄} g^{b̄a}, stored at component (i, j, a).
pub fn christoffel(metric: &HermitianMetric) -> TensorField {
    let dg = metric_derivatives(metric);
    christoffel_from_derivs(metric, &dg)
}

fn christoffel_from_derivs(metric: &HermitianMetric, dg: &[TensorField]) -> TensorField {
    let n = metric.n();
    let points = metric.chart().points();
    let mut gamma = TensorField::zero(metric.chart().clone(), 3, 0);
    let ginv = metric.g_inv();
    gamma
        .data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, out)| {
            let idx = decode_index(c, n, 3);
            let (i, j, a) = (idx[0], idx[1], idx[2]);
            for b in 0..n {
                let d = dg[i].comp(j * n + b);
                let m = ginv.comp(a * n + b);
                for ((o, &dv), &mv) in out.iter_mut().zip(d).zip(m) {
                    *o += dv * mv;
                }
            }
        });
    gamma
}

/// T_{ijk̄} = ∂_i g_{jk̄} − ∂_j g_{ik̄}; antisymmetric in (i,j) by construction.
pub fn torsion(metric: &HermitianMetric) -> TensorField {
    let dg = metric_derivatives(metric);
    torsion_from_derivs(metric, &dg)
}

fn torsion_from_derivs(metric: &HermitianMetric, dg: &[TensorField]) -> TensorField {
    let n = metric.n();
    let points = metric.chart().points();
    let mut t = TensorField::zero(metric.chart().clone(), 2, 1);
    t.data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, out)| {
            let idx = decode_index(c, n, 3);
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            let a = dg[i].comp(j * n + k);
            let b = dg[j].comp(i * n + k);
            for ((o, &av), &bv) in out.iter_mut().zip(a).zip(b) {
                *o = av - bv;
            }
        });
    t
}

/// Ω_{ij̄pq̄} = −∂_{j̄} Γ_{ip}^a g_{aq̄} (the canonical path).
pub fn chern_curvature(metric: &HermitianMetric, gamma: &TensorField) -> TensorField {
    let n = metric.n();
    let points = metric.chart().points();
    let gspec = gamma.to_spectral();
    let dbar_gamma: Vec<TensorField> = (0..n)
        .map(|j| gspec.derivative(DerivDirection::AntiHolomorphic(j)))
        .collect();
    let g = metric.g();
    let mut omega = TensorField::zero(metric.chart().clone(), 2, 2);
    omega
        .data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, out)| {
            let idx = decode_index(c, n, 4);
            // component (i, p, j, q) = Ω_{i j̄ p q̄}
            let (i, p, j, q) = (idx[0], idx[1], idx[2], idx[3]);
            for a in 0..n {
                let dg_comp = dbar_gamma[j].comp((i * n + p) * n + a);
                let g_comp = g.comp(a * n + q);
                for ((o, &dv), &gv) in out.iter_mut().zip(dg_comp).zip(g_comp) {
                    *o -= dv * gv;
                }
            }
        });
    omega
}

/// Ω via the expanded form −∂_i∂_{j̄} g_{pq̄} + g^{b̄a} ∂_i g_{pb̄} ∂_{j̄} g_{aq̄}
/// (independent cross-check of [`chern_curvature`]).
pub fn chern_curvature_expanded(metric: &HermitianMetric) -> TensorField {
    let n = metric.n();
    let points = metric.chart().points();
    let spec = metric.g().to_spectral();
    let dg: Vec<TensorField> = (0..n)
        .map(|a| spec.derivative(DerivDirection::Holomorphic(a)))
        .collect();
    // second derivatives ∂_i ∂_j̄ g, one inverse pass each
    let mut d2: Vec<Vec<TensorField>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(spec.derived(&[
                DerivDirection::Holomorphic(i),
                DerivDirection::AntiHolomorphic(j),
            ]));
        }
        d2.push(row);
    }
    let ginv = metric.g_inv();
    let mut omega = TensorField::zero(metric.chart().clone(), 2, 2);
    omega
        .data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, out)| {
            let idx = decode_index(c, n, 4);
            let (i, p, j, q) = (idx[0], idx[1], idx[2], idx[3]);
            let second = d2[i][j].comp(p * n + q);
            for (o, &sv) in out.iter_mut().zip(second) {
                *o = -sv;
            }
            for a in 0..n {
                for b in 0..n {
                    let m = ginv.comp(a * n + b);
                    let d1 = dg[i].comp(p * n + b);
                    // ∂_j̄ g_{aq̄} = conj(∂_j g_{qā})
                    let d2c = dg[j].comp(q * n + a);
                    for g in 0..points {
                        out[g] += m[g] * d1[g] * d2c[g].conj();
                    }
                }
            }
        });
    omega
}

/// The three curvature/torsion traces (S, Ric, Q).
///
/// S_{ij̄} = g^{b̄a} Ω_{ab̄ij̄} (first pair), Ric_{ij̄} = g^{b̄a} Ω_{ij̄ab̄}
/// (second pair), Q_{ij̄} = g^{b̄a} g^{t̄s} T_{iat̄} T_{j̄b̄s}.
pub fn curvature_traces(
    metric: &HermitianMetric,
    curvature: &TensorField,
    torsion: &TensorField,
) -> (TensorField, TensorField, TensorField) {
    let n = metric.n();
    let points = metric.chart().points();
    let ginv = metric.g_inv();

    let mut s = TensorField::zero(metric.chart().clone(), 1, 1);
    let mut ric = TensorField::zero(metric.chart().clone(), 1, 1);
    s.data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, out)| {
            let (i, j) = (c / n, c % n);
            for a in 0..n {
                for b in 0..n {
                    let m = ginv.comp(a * n + b);
                    let om = curvature.comp(((a * n + i) * n + b) * n + j);
                    for ((o, &mv), &ov) in out.iter_mut().zip(m).zip(om) {
                        *o += mv * ov;
                    }
                }
            }
        });
    ric.data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, out)| {
            let (i, j) = (c / n, c % n);
            for a in 0..n {
                for b in 0..n {
                    let m = ginv.comp(a * n + b);
                    let om = curvature.comp(((i * n + a) * n + j) * n + b);
                    for ((o, &mv), &ov) in out.iter_mut().zip(m).zip(om) {
                        *o += mv * ov;
                    }
                }
            }
        });

    // Q is assembled cache-blocked: gather T and g⁻¹ per point chunk, then
    // run the small quadruple loop hot.
    let mut q = TensorField::zero(metric.chart().clone(), 1, 1);
    let chunk = 2048usize.min(points);
    let nb = points.div_ceil(chunk);
    let mut qbuf = vec![Complex64::new(0.0, 0.0); points * n * n];
    qbuf.par_chunks_mut(chunk * n * n)
        .enumerate()
        .for_each(|(ci, qloc)| {
            let start = ci * chunk;
            let len = (points - start).min(chunk);
            let nt = n * n * n;
            let mut tl = vec![Complex64::new(0.0, 0.0); nt * len];
            for c in 0..nt {
                tl[c * len..(c + 1) * len].copy_from_slice(&torsion.comp(c)[start..start + len]);
            }
            let mut ml = vec![Complex64::new(0.0, 0.0); n * n * len];
            for c in 0..n * n {
                ml[c * len..(c + 1) * len].copy_from_slice(&ginv.comp(c)[start..start + len]);
            }
            for g in 0..len {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for a in 0..n {
                            for b in 0..n {
                                let m1 = ml[(a * n + b) * len + g];
                                for sx in 0..n {
                                    for t in 0..n {
                                        let m2 = ml[(sx * n + t) * len + g];
                                        let t1 = tl[((i * n + a) * n + t) * len + g];
                                        let t2 = tl[((j * n + b) * n + sx) * len + g];
                                        acc += m1 * m2 * t1 * t2.conj();
                                    }
                                }
                            }
                        }
                        qloc[(i * n + j) * len + g] = acc;
                    }
                }
            }
        });
    // scatter back to component-major layout
    for ci in 0..nb {
        let start = ci * chunk;
        let len = (points - start).min(chunk);
        for c in 0..n * n {
            q.comp_mut(c)[start..start + len]
                .copy_from_slice(&qbuf[ci * chunk * n * n + c * len..ci * chunk * n * n + (c + 1) * len]);
        }
    }
    (s, ric, q)
}

/// Grid maxima that fall out of the package assembly for free (all norms
/// are metric norms; the pluriclosed residual follows the Lemma-style
/// normalization by the largest single term).
#[derive(Debug, Clone, Copy, Default)]
pub struct PackageDiagnostics {
    pub max_curv: f64,
    pub max_torsion_sq: f64,
    pub max_ric_s: f64,
    pub pluriclosed_abs: f64,
    pub pluriclosed_term_max: f64,
}

impl PackageDiagnostics {
    pub fn pluriclosed_rel(&self) -> f64 {
        self.pluriclosed_abs / (1.0 + self.pluriclosed_term_max)
    }
}

// ---- split-plane kernels ----------------------------------------------------
// The flow inner loops are complex multiply-accumulate streams; storing the
// chunk-local operands as separate re/im planes lets them autovectorize.

struct Planes {
    re: Vec<f64>,
    im: Vec<f64>,
    len: usize,
}

impl Planes {
    fn zeroed(comps: usize, len: usize) -> Planes {
        Planes {
            re: vec![0.0; comps * len],
            im: vec![0.0; comps * len],
            len,
        }
    }

    fn gather(field: &TensorField, comps: usize, start: usize, len: usize) -> Planes {
        let mut p = Planes::zeroed(comps, len);
        for c in 0..comps {
            let src = &field.comp(c)[start..start + len];
            let re = &mut p.re[c * len..(c + 1) * len];
            let im = &mut p.im[c * len..(c + 1) * len];
            for (g, v) in src.iter().enumerate() {
                re[g] = v.re;
                im[g] = v.im;
            }
        }
        p
    }

    #[inline]
    fn comp(&self, c: usize) -> (&[f64], &[f64]) {
        (
            &self.re[c * self.len..(c + 1) * self.len],
            &self.im[c * self.len..(c + 1) * self.len],
        )
    }

    fn scatter_into(&self, out: &mut [Complex64], c: usize) {
        let (re, im) = self.comp(c);
        for (g, o) in out.iter_mut().enumerate() {
            *o = Complex64::new(re[g], im[g]);
        }
    }

    fn at(&self, c: usize, g: usize) -> Complex64 {
        Complex64::new(self.re[c * self.len + g], self.im[c * self.len + g])
    }
}

/// dst[dc] += a[ac]·b[bc] (complex, split planes); CONJ_B conjugates b,
/// SUB subtracts the product instead.
#[inline]
fn cmul_acc<const CONJ_B: bool, const SUB: bool>(
    dst: &mut Planes,
    dc: usize,
    a: &Planes,
    ac: usize,
    b: &Planes,
    bc: usize,
) {
    let len = dst.len;
    let lo = dc * len;
    let dr = &mut dst.re[lo..lo + len];
    let di = &mut dst.im[lo..lo + len];
    let (ar, ai) = a.comp(ac);
    let (br, bi) = b.comp(bc);
    for g in 0..len {
        let bim = if CONJ_B { -bi[g] } else { bi[g] };
        let re = ar[g] * br[g] - ai[g] * bim;
        let im = ar[g] * bim + ai[g] * br[g];
        if SUB {
            dr[g] -= re;
            di[g] -= im;
        } else {
            dr[g] += re;
            di[g] += im;
        }
    }
}

/// The flow right-hand-side ingredients (S, Ric, Q, T) computed through the
/// expanded curvature form −∂_i∂_j̄g_{pq̄} + g^{b̄a}∂_ig_{pb̄}∂_j̄g_{aq̄}
/// without materializing Γ or the full curvature. Numerically identical to
/// the canonical package traces (both paths are exact on band-limited data);
/// used for RK stages where only the rates are needed.
pub struct StageRates {
    pub torsion: TensorField,
    pub s_trace: TensorField,
    pub ric_trace: TensorField,
    pub q_tensor: TensorField,
}

/// Compute S, Ric, Q, T (and optionally the grid diagnostics) from ∂g and
/// ∂∂̄g alone. 28 spectral transforms instead of the canonical 36, and no
/// rank-4 field is stored (the curvature is formed chunk-locally).
pub fn stage_rates(metric: &HermitianMetric, want_diag: bool) -> (StageRates, PackageDiagnostics) {
    let chart = metric.chart().clone();
    let n = chart.n();
    let points = chart.points();
    let ginv = metric.g_inv();
    let g = metric.g();
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;

    let ghat = g.to_spectral();
    let dg: Vec<TensorField> = (0..n)
        .map(|a| ghat.derivative(DerivDirection::Holomorphic(a)))
        .collect();
    // ∂_a ∂_b̄ g, one fused inverse each
    let mut d2g: Vec<TensorField> = Vec::with_capacity(n2);
    for a in 0..n {
        for b in 0..n {
            d2g.push(ghat.derived(&[
                DerivDirection::Holomorphic(a),
                DerivDirection::AntiHolomorphic(b),
            ]));
        }
    }
    drop(ghat);
    let torsion = torsion_from_derivs(metric, &dg);

    let chunk = 1024usize.min(points);
    let nblocks = points.div_ceil(chunk);
    let mut tr_buf = vec![Complex64::new(0.0, 0.0); points * 3 * n2];
    let diag: Vec<PackageDiagnostics> = tr_buf
        .par_chunks_mut(chunk * 3 * n2)
        .enumerate()
        .map(|(ci, tr_loc)| {
            let start = ci * chunk;
            let len = (points - start).min(chunk);
            let gi_l = Planes::gather(ginv, n2, start, len);
            let t_l = Planes::gather(&torsion, n3, start, len);
            let mut dg_l = Planes::zeroed(n * n2, len);
            for (a, f) in dg.iter().enumerate() {
                for c in 0..n2 {
                    let src = &f.comp(c)[start..start + len];
                    let lo = (a * n2 + c) * len;
                    for (g2, v) in src.iter().enumerate() {
                        dg_l.re[lo + g2] = v.re;
                        dg_l.im[lo + g2] = v.im;
                    }
                }
            }
            let mut d2_l = Planes::zeroed(n2 * n2, len);
            for (ab, f) in d2g.iter().enumerate() {
                for c in 0..n2 {
                    let src = &f.comp(c)[start..start + len];
                    let lo = (ab * n2 + c) * len;
                    for (g2, v) in src.iter().enumerate() {
                        d2_l.re[lo + g2] = v.re;
                        d2_l.im[lo + g2] = v.im;
                    }
                }
            }

            // X[i][(p,a)] = Σ_b g^{b̄a} ∂_i g_{pb̄}
            let mut x_l = Planes::zeroed(n * n2, len);
            for i in 0..n {
                for pp in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            cmul_acc::<false, false>(
                                &mut x_l,
                                i * n2 + pp * n + a,
                                &gi_l,
                                a * n + b,
                                &dg_l,
                                i * n2 + pp * n + b,
                            );
                        }
                    }
                }
            }
            // Ω_{ij̄pq̄} = −∂_i∂_j̄ g_{pq̄} + Σ_a X[i][(p,a)]·conj(∂_j g_{qā})
            let mut om_l = Planes::zeroed(n4, len);
            for i in 0..n {
                for j in 0..n {
                    for pp in 0..n {
                        for q in 0..n {
                            let oc = ((i * n + pp) * n + j) * n + q;
                            {
                                let lo = oc * len;
                                let d2lo = ((i * n + j) * n2 + pp * n + q) * len;
                                for g2 in 0..len {
                                    om_l.re[lo + g2] = -d2_l.re[d2lo + g2];
                                    om_l.im[lo + g2] = -d2_l.im[d2lo + g2];
                                }
                            }
                            for a in 0..n {
                                cmul_acc::<true, false>(
                                    &mut om_l,
                                    oc,
                                    &x_l,
                                    i * n2 + pp * n + a,
                                    &dg_l,
                                    j * n2 + q * n + a,
                                );
                            }
                        }
                    }
                }
            }
            compute_traces_and_diag(n, len, &om_l, &t_l, &gi_l, tr_loc, want_diag)
        })
        .collect();

    let mut s_trace = TensorField::zero(chart.clone(), 1, 1);
    let mut ric_trace = TensorField::zero(chart.clone(), 1, 1);
    let mut q_tensor = TensorField::zero(chart.clone(), 1, 1);
    for ci in 0..nblocks {
        let start = ci * chunk;
        let len = (points - start).min(chunk);
        let tb = ci * chunk * 3 * n2;
        for c in 0..n2 {
            s_trace.comp_mut(c)[start..start + len]
                .copy_from_slice(&tr_buf[tb + c * len..tb + (c + 1) * len]);
            ric_trace.comp_mut(c)[start..start + len]
                .copy_from_slice(&tr_buf[tb + (n2 + c) * len..tb + (n2 + c + 1) * len]);
            q_tensor.comp_mut(c)[start..start + len]
                .copy_from_slice(&tr_buf[tb + (2 * n2 + c) * len..tb + (2 * n2 + c + 1) * len]);
        }
    }
    let mut agg = PackageDiagnostics::default();
    for d in diag {
        agg.max_curv = agg.max_curv.max(d.max_curv);
        agg.max_torsion_sq = agg.max_torsion_sq.max(d.max_torsion_sq);
        agg.max_ric_s = agg.max_ric_s.max(d.max_ric_s);
        agg.pluriclosed_abs = agg.pluriclosed_abs.max(d.pluriclosed_abs);
        agg.pluriclosed_term_max = agg.pluriclosed_term_max.max(d.pluriclosed_term_max);
    }
    agg.max_curv = agg.max_curv.max(0.0).sqrt();
    agg.max_ric_s = agg.max_ric_s.max(0.0).sqrt();
    (
        StageRates {
            torsion,
            s_trace,
            ric_trace,
            q_tensor,
        },
        agg,
    )
}

/// Shared trace/diagnostic kernel over one chunk with the curvature held in
/// a local buffer. Writes S, Ric, Q into `tr_loc` and returns the chunk's
/// diagnostics (squared norms; caller takes roots after aggregation).
#[allow(clippy::too_many_arguments)]
fn compute_traces_and_diag(
    n: usize,
    len: usize,
    om_l: &Planes,
    t_l: &Planes,
    gi_l: &Planes,
    tr_loc: &mut [Complex64],
    want_diag: bool,
) -> PackageDiagnostics {
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    // S_{ij̄} = g^{b̄a}Ω_{ab̄ij̄}, Ric_{ij̄} = g^{b̄a}Ω_{ij̄ab̄}
    let mut s_l = Planes::zeroed(n2, len);
    let mut r_l = Planes::zeroed(n2, len);
    for i in 0..n {
        for j in 0..n {
            let c = i * n + j;
            for a in 0..n {
                for b in 0..n {
                    cmul_acc::<false, false>(
                        &mut s_l,
                        c,
                        gi_l,
                        a * n + b,
                        om_l,
                        ((a * n + i) * n + b) * n + j,
                    );
                    cmul_acc::<false, false>(
                        &mut r_l,
                        c,
                        gi_l,
                        a * n + b,
                        om_l,
                        ((i * n + a) * n + j) * n + b,
                    );
                }
            }
        }
    }
    // Q via factorized raisings
    let mut x_l = Planes::zeroed(n3, len);
    for i in 0..n {
        for a in 0..n {
            for sx in 0..n {
                for t in 0..n {
                    cmul_acc::<false, false>(
                        &mut x_l,
                        (i * n + a) * n + sx,
                        gi_l,
                        sx * n + t,
                        t_l,
                        (i * n + a) * n + t,
                    );
                }
            }
        }
    }
    let mut y_l = Planes::zeroed(n3, len);
    for i in 0..n {
        for b in 0..n {
            for sx in 0..n {
                for a in 0..n {
                    cmul_acc::<false, false>(
                        &mut y_l,
                        (i * n + b) * n + sx,
                        gi_l,
                        a * n + b,
                        &x_l,
                        (i * n + a) * n + sx,
                    );
                }
            }
        }
    }
    let mut q_l = Planes::zeroed(n2, len);
    for i in 0..n {
        for j in 0..n {
            for b in 0..n {
                for sx in 0..n {
                    cmul_acc::<true, false>(
                        &mut q_l,
                        i * n + j,
                        &y_l,
                        (i * n + b) * n + sx,
                        t_l,
                        (j * n + b) * n + sx,
                    );
                }
            }
        }
    }
    // scatter S, Ric, Q into the interleaved chunk output
    for c in 0..n2 {
        s_l.scatter_into(&mut tr_loc[c * len..(c + 1) * len], c);
        r_l.scatter_into(&mut tr_loc[(n2 + c) * len..(n2 + c + 1) * len], c);
        q_l.scatter_into(&mut tr_loc[(2 * n2 + c) * len..(2 * n2 + c + 1) * len], c);
    }

    let mut d = PackageDiagnostics::default();
    if want_diag {
        let mut om_pt = vec![Complex64::new(0.0, 0.0); n4];
        let mut t_pt = vec![Complex64::new(0.0, 0.0); n3];
        let mut gi_pt = vec![Complex64::new(0.0, 0.0); n2];
        let mut rs_pt = vec![Complex64::new(0.0, 0.0); n2];
        let mut scratch = vec![Complex64::new(0.0, 0.0); n4];
        let mut scratch2 = vec![Complex64::new(0.0, 0.0); n4];
        for gp in 0..len {
            for c in 0..n2 {
                gi_pt[c] = gi_l.at(c, gp);
            }
            for c in 0..n3 {
                t_pt[c] = t_l.at(c, gp);
            }
            for c in 0..n4 {
                om_pt[c] = om_l.at(c, gp);
            }
            d.max_curv = d.max_curv.max(norm_sq_point(
                &om_pt, &mut scratch, &mut scratch2, n, 2, 4, &gi_pt,
            ));
            d.max_torsion_sq = d.max_torsion_sq.max(norm_sq_point(
                &t_pt, &mut scratch, &mut scratch2, n, 2, 3, &gi_pt,
            ));
            for c in 0..n2 {
                rs_pt[c] = s_l.at(c, gp) + r_l.at(c, gp);
            }
            d.max_ric_s = d.max_ric_s.max(norm_sq_point(
                &rs_pt, &mut scratch, &mut scratch2, n, 1, 2, &gi_pt,
            ));
            for i in 0..n {
                for pp in i + 1..n {
                    for j in 0..n {
                        for q in j + 1..n {
                            let oc = |a: usize, b: usize, c2: usize, d2: usize| {
                                ((a * n + b) * n + c2) * n + d2
                            };
                            let o1 = om_pt[oc(i, pp, j, q)];
                            let o2 = om_pt[oc(pp, i, j, q)];
                            let o3 = om_pt[oc(i, pp, q, j)];
                            let o4 = om_pt[oc(pp, i, q, j)];
                            let mut tt = Complex64::new(0.0, 0.0);
                            for a in 0..n {
                                for b in 0..n {
                                    tt += gi_pt[a * n + b]
                                        * t_pt[(i * n + pp) * n + b]
                                        * t_pt[(j * n + q) * n + a].conj();
                                }
                            }
                            let r = o1 - o2 - o3 + o4 - tt;
                            d.pluriclosed_abs = d.pluriclosed_abs.max(r.norm());
                            d.pluriclosed_term_max = d
                                .pluriclosed_term_max
                                .max(o1.norm())
                                .max(o2.norm())
                                .max(o3.norm())
                                .max(o4.norm())
                                .max(tt.norm());
                        }
                    }
                }
            }
        }
    }
    d
}

/// Raise every slot of a single point's component vector in place.
/// `ginv_pt` is the local n×n inverse (component (a,b) = g^{b̄a}).
fn raise_point(
    vals: &mut [Complex64],
    tmp: &mut [Complex64],
    n: usize,
    p: usize,
    rank: usize,
    ginv_pt: &[Complex64],
) {
    let comps = vals.len();
    for slot in 0..rank {
        let barred = slot >= p;
        let stride = n.pow((rank - 1 - slot) as u32);
        tmp[..comps].fill(Complex64::new(0.0, 0.0));
        for c in 0..comps {
            let sv = (c / stride) % n;
            let base = c - sv * stride;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let mc = if barred { sv * n + i } else { i * n + sv };
                acc += vals[base + i * stride] * ginv_pt[mc];
            }
            tmp[c] = acc;
        }
        vals[..comps].copy_from_slice(&tmp[..comps]);
    }
}

fn norm_sq_point(
    vals: &[Complex64],
    scratch: &mut [Complex64],
    scratch2: &mut [Complex64],
    n: usize,
    p: usize,
    rank: usize,
    ginv_pt: &[Complex64],
) -> f64 {
    let comps = vals.len();
    scratch[..comps].copy_from_slice(vals);
    raise_point(&mut scratch[..comps], scratch2, n, p, rank, ginv_pt);
    let mut acc = 0.0;
    for c in 0..comps {
        acc += (scratch[c] * vals[c].conj()).re;
    }
    acc
}

impl ChernPackage {
    pub fn compute(metric: &HermitianMetric) -> ChernPackage {
        Self::compute_fused(metric, false).0
    }

    pub fn compute_with_diagnostics(metric: &HermitianMetric) -> (ChernPackage, PackageDiagnostics) {
        Self::compute_fused(metric, true)
    }

    /// Single-pipeline package build: spectral work first (shared forward
    /// transforms, fused symbol application), then two cache-blocked
    /// assembly phases. Matches the reference operations `christoffel`,
    /// `torsion`, `chern_curvature`, `curvature_traces` to round-off.
    fn compute_fused(metric: &HermitianMetric, want_diag: bool) -> (ChernPackage, PackageDiagnostics) {
        let chart = metric.chart().clone();
        let n = chart.n();
        let points = chart.points();
        let ginv = metric.g_inv();
        let g = metric.g();

        let ghat = g.to_spectral();
        let dg: Vec<TensorField> = (0..n)
            .map(|a| ghat.derivative(DerivDirection::Holomorphic(a)))
            .collect();
        let gamma = christoffel_from_derivs(metric, &dg);
        let torsion = torsion_from_derivs(metric, &dg);
        drop(dg);
        let gamma_hat = gamma.to_spectral();
        let dbg: Vec<TensorField> = (0..n)
            .map(|j| gamma_hat.derivative(DerivDirection::AntiHolomorphic(j)))
            .collect();
        drop(gamma_hat);

        // phase 2: Ω, S, Ric, Q (+ diagnostics) per point chunk
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let chunk = 1024usize.min(points);
        let nblocks = points.div_ceil(chunk);
        let mut om_buf = vec![Complex64::new(0.0, 0.0); points * n4];
        let mut tr_buf = vec![Complex64::new(0.0, 0.0); points * 3 * n2];
        let diag: Vec<PackageDiagnostics> = om_buf
            .par_chunks_mut(chunk * n4)
            .zip(tr_buf.par_chunks_mut(chunk * 3 * n2))
            .enumerate()
            .map(|(ci, (om_loc, tr_loc))| {
                let start = ci * chunk;
                let len = (points - start).min(chunk);
                // local gathers
                let mut dbg_l = vec![Complex64::new(0.0, 0.0); n4 * len];
                for j in 0..n {
                    for c in 0..n3 {
                        dbg_l[(j * n3 + c) * len..(j * n3 + c + 1) * len]
                            .copy_from_slice(&dbg[j].comp(c)[start..start + len]);
                    }
                }
                let mut g_l = vec![Complex64::new(0.0, 0.0); n2 * len];
                let mut gi_l = vec![Complex64::new(0.0, 0.0); n2 * len];
                for c in 0..n2 {
                    g_l[c * len..(c + 1) * len].copy_from_slice(&g.comp(c)[start..start + len]);
                    gi_l[c * len..(c + 1) * len]
                        .copy_from_slice(&ginv.comp(c)[start..start + len]);
                }
                let mut t_l = vec![Complex64::new(0.0, 0.0); n3 * len];
                for c in 0..n3 {
                    t_l[c * len..(c + 1) * len]
                        .copy_from_slice(&torsion.comp(c)[start..start + len]);
                }

                let mut d = PackageDiagnostics::default();
                // Ω_{ij̄pq̄} = −Σ_a ∂̄_j Γ_{ip}^a g_{aq̄}, slice loops over the chunk
                for i in 0..n {
                    for pp in 0..n {
                        for j in 0..n {
                            for q in 0..n {
                                let oc = ((i * n + pp) * n + j) * n + q;
                                let dst = &mut om_loc[oc * len..(oc + 1) * len];
                                dst.fill(Complex64::new(0.0, 0.0));
                                for a in 0..n {
                                    let db = &dbg_l[(j * n3 + (i * n + pp) * n + a) * len
                                        ..(j * n3 + (i * n + pp) * n + a + 1) * len];
                                    let gl = &g_l[(a * n + q) * len..(a * n + q + 1) * len];
                                    for ((o, &x), &y) in dst.iter_mut().zip(db).zip(gl) {
                                        *o -= x * y;
                                    }
                                }
                            }
                        }
                    }
                }
                // S and Ric traces
                for i in 0..n {
                    for j in 0..n {
                        let (s_dst, rest) = tr_loc.split_at_mut(n2 * len);
                        let (r_dst, q_dst) = rest.split_at_mut(n2 * len);
                        let c = i * n + j;
                        let s_dst = &mut s_dst[c * len..(c + 1) * len];
                        let r_dst = &mut r_dst[c * len..(c + 1) * len];
                        s_dst.fill(Complex64::new(0.0, 0.0));
                        r_dst.fill(Complex64::new(0.0, 0.0));
                        let _ = &q_dst;
                        for a in 0..n {
                            for b in 0..n {
                                let m1 = &gi_l[(a * n + b) * len..(a * n + b + 1) * len];
                                let so = ((a * n + i) * n + b) * n + j;
                                let ro = ((i * n + a) * n + j) * n + b;
                                let s_src = &om_loc[so * len..(so + 1) * len];
                                let r_src = &om_loc[ro * len..(ro + 1) * len];
                                for g2 in 0..len {
                                    s_dst[g2] += m1[g2] * s_src[g2];
                                    r_dst[g2] += m1[g2] * r_src[g2];
                                }
                            }
                        }
                    }
                }
                // Q via two factorized raisings:
                // X[i,a,s] = Σ_t g^{t̄s} T_{iat̄}; Y[i,b,s] = Σ_a g^{b̄a} X[i,a,s];
                // Q[i,j] = Σ_{b,s} Y[i,b,s]·conj(T_{jbs̄})
                let mut x_l = vec![Complex64::new(0.0, 0.0); n3 * len];
                for i in 0..n {
                    for a in 0..n {
                        for sx in 0..n {
                            let dst = &mut x_l[((i * n + a) * n + sx) * len
                                ..((i * n + a) * n + sx + 1) * len];
                            for t in 0..n {
                                let m = &gi_l[(sx * n + t) * len..(sx * n + t + 1) * len];
                                let tsrc =
                                    &t_l[((i * n + a) * n + t) * len..((i * n + a) * n + t + 1) * len];
                                for ((o, &mv), &tv) in dst.iter_mut().zip(m).zip(tsrc) {
                                    *o += mv * tv;
                                }
                            }
                        }
                    }
                }
                let mut y_l = vec![Complex64::new(0.0, 0.0); n3 * len];
                for i in 0..n {
                    for b in 0..n {
                        for sx in 0..n {
                            let dst = &mut y_l[((i * n + b) * n + sx) * len
                                ..((i * n + b) * n + sx + 1) * len];
                            for a in 0..n {
                                let m = &gi_l[(a * n + b) * len..(a * n + b + 1) * len];
                                let xsrc =
                                    &x_l[((i * n + a) * n + sx) * len..((i * n + a) * n + sx + 1) * len];
                                for ((o, &mv), &xv) in dst.iter_mut().zip(m).zip(xsrc) {
                                    *o += mv * xv;
                                }
                            }
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        let qo = 2 * n2 + 0;
                        let c = i * n + j;
                        let base = (qo * 0 + 2 * n2 + c) * len;
                        let (_, rest) = tr_loc.split_at_mut(2 * n2 * len);
                        let q_dst = &mut rest[c * len..(c + 1) * len];
                        q_dst.fill(Complex64::new(0.0, 0.0));
                        let _ = base;
                        for b in 0..n {
                            for sx in 0..n {
                                let ysrc =
                                    &y_l[((i * n + b) * n + sx) * len..((i * n + b) * n + sx + 1) * len];
                                let tsrc =
                                    &t_l[((j * n + b) * n + sx) * len..((j * n + b) * n + sx + 1) * len];
                                for ((o, &yv), &tv) in q_dst.iter_mut().zip(ysrc).zip(tsrc) {
                                    *o += yv * tv.conj();
                                }
                            }
                        }
                    }
                }
                if want_diag {
                    let mut om_pt = vec![Complex64::new(0.0, 0.0); n4];
                    let mut t_pt = vec![Complex64::new(0.0, 0.0); n3];
                    let mut gi_pt = vec![Complex64::new(0.0, 0.0); n2];
                    let mut rs_pt = vec![Complex64::new(0.0, 0.0); n2];
                    let mut scratch = vec![Complex64::new(0.0, 0.0); n4];
                    let mut scratch2 = vec![Complex64::new(0.0, 0.0); n4];
                    for gp in 0..len {
                        for c in 0..n2 {
                            gi_pt[c] = gi_l[c * len + gp];
                        }
                        for c in 0..n3 {
                            t_pt[c] = t_l[c * len + gp];
                        }
                        for c in 0..n4 {
                            om_pt[c] = om_loc[c * len + gp];
                        }
                        d.max_curv = d.max_curv.max(norm_sq_point(
                            &om_pt, &mut scratch, &mut scratch2, n, 2, 4, &gi_pt,
                        ));
                        d.max_torsion_sq = d.max_torsion_sq.max(norm_sq_point(
                            &t_pt, &mut scratch, &mut scratch2, n, 2, 3, &gi_pt,
                        ));
                        for c in 0..n2 {
                            rs_pt[c] = tr_loc[c * len + gp] + tr_loc[(n2 + c) * len + gp];
                        }
                        d.max_ric_s = d.max_ric_s.max(norm_sq_point(
                            &rs_pt, &mut scratch, &mut scratch2, n, 1, 2, &gi_pt,
                        ));
                        // pluriclosed residual restricted to i<p, j<q (exact
                        // antisymmetry of the combination in both pairs)
                        for i in 0..n {
                            for pp in i + 1..n {
                                for j in 0..n {
                                    for q in j + 1..n {
                                        let oc = |a: usize, b: usize, c2: usize, d2: usize| {
                                            ((a * n + b) * n + c2) * n + d2
                                        };
                                        let o1 = om_pt[oc(i, pp, j, q)];
                                        let o2 = om_pt[oc(pp, i, j, q)];
                                        let o3 = om_pt[oc(i, pp, q, j)];
                                        let o4 = om_pt[oc(pp, i, q, j)];
                                        let mut tt = Complex64::new(0.0, 0.0);
                                        for a in 0..n {
                                            for b in 0..n {
                                                tt += gi_pt[a * n + b]
                                                    * t_pt[(i * n + pp) * n + b]
                                                    * t_pt[(j * n + q) * n + a].conj();
                                            }
                                        }
                                        let r = o1 - o2 - o3 + o4 - tt;
                                        d.pluriclosed_abs = d.pluriclosed_abs.max(r.norm());
                                        d.pluriclosed_term_max = d
                                            .pluriclosed_term_max
                                            .max(o1.norm())
                                            .max(o2.norm())
                                            .max(o3.norm())
                                            .max(o4.norm())
                                            .max(tt.norm());
                                    }
                                }
                            }
                        }
                    }
                }
                                d
            })
            .collect();

        // scatter to component-major fields
        let mut curvature = TensorField::zero(chart.clone(), 2, 2);
        let mut s_trace = TensorField::zero(chart.clone(), 1, 1);
        let mut ric_trace = TensorField::zero(chart.clone(), 1, 1);
        let mut q_tensor = TensorField::zero(chart.clone(), 1, 1);
        for ci in 0..nblocks {
            let start = ci * chunk;
            let len = (points - start).min(chunk);
            let ob = ci * chunk * n4;
            for c in 0..n4 {
                curvature.comp_mut(c)[start..start + len]
                    .copy_from_slice(&om_buf[ob + c * len..ob + (c + 1) * len]);
            }
            let tb = ci * chunk * 3 * n2;
            for c in 0..n2 {
                s_trace.comp_mut(c)[start..start + len]
                    .copy_from_slice(&tr_buf[tb + c * len..tb + (c + 1) * len]);
                ric_trace.comp_mut(c)[start..start + len]
                    .copy_from_slice(&tr_buf[tb + (n2 + c) * len..tb + (n2 + c + 1) * len]);
                q_tensor.comp_mut(c)[start..start + len]
                    .copy_from_slice(&tr_buf[tb + (2 * n2 + c) * len..tb + (2 * n2 + c + 1) * len]);
            }
        }

        let mut agg = PackageDiagnostics::default();
        for d in diag {
            agg.max_curv = agg.max_curv.max(d.max_curv);
            agg.max_torsion_sq = agg.max_torsion_sq.max(d.max_torsion_sq);
            agg.max_ric_s = agg.max_ric_s.max(d.max_ric_s);
            agg.pluriclosed_abs = agg.pluriclosed_abs.max(d.pluriclosed_abs);
            agg.pluriclosed_term_max = agg.pluriclosed_term_max.max(d.pluriclosed_term_max);
        }
        // the assembly accumulates squared norms; convert
        agg.max_curv = agg.max_curv.max(0.0).sqrt();
        agg.max_ric_s = agg.max_ric_s.max(0.0).sqrt();
        (
            ChernPackage {
                gamma,
                torsion,
                curvature,
                s_trace,
                ric_trace,
                q_tensor,
            },
            agg,
        )
    }
}

/// Full covariant gradient ∇A (Holomorphic) or ∇̄A (AntiHolomorphic).
///
/// ∇ adds an unbarred slot d in front of the unbarred block with
/// −Γ_{d p_α}^c corrections on unbarred slots; barred slots are inert.
/// ∇̄ adds a barred slot d̄ in front of the barred block with −conj(Γ_{d q_β}^c)
/// corrections on barred slots; unbarred slots are inert.
pub fn covariant_derivative(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
    dir: GradDirection,
) -> Result<TensorField> {
    let spec = a.to_spectral();
    covariant_derivative_spectral(a, &spec, metric, gamma, dir)
}

/// Both gradients of `a` from a single forward transform.
pub fn covariant_derivative_both(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
) -> Result<(TensorField, TensorField)> {
    let spec = a.to_spectral();
    let grad = covariant_derivative_spectral(a, &spec, metric, gamma, GradDirection::Holomorphic)?;
    let grad_bar =
        covariant_derivative_spectral(a, &spec, metric, gamma, GradDirection::AntiHolomorphic)?;
    Ok((grad, grad_bar))
}

fn covariant_derivative_spectral(
    a: &TensorField,
    spec: &crate::tensor::SpectralTensor,
    metric: &HermitianMetric,
    gamma: &TensorField,
    dir: GradDirection,
) -> Result<TensorField> {
    if !a.chart().same_as(metric.chart()) || !gamma.chart().same_as(metric.chart()) {
        return Err(Error::ChartMismatch("covariant derivative operands".into()));
    }
    let n = a.chart().n();
    let points = a.points();
    let (p, q) = (a.p(), a.q());
    let deriv: Vec<TensorField> = (0..n)
        .map(|d| match dir {
            GradDirection::Holomorphic => spec.derivative(DerivDirection::Holomorphic(d)),
            GradDirection::AntiHolomorphic => spec.derivative(DerivDirection::AntiHolomorphic(d)),
        })
        .collect();

    let (out_p, out_q) = match dir {
        GradDirection::Holomorphic => (p + 1, q),
        GradDirection::AntiHolomorphic => (p, q + 1),
    };
    let mut out = TensorField::zero(a.chart().clone(), out_p, out_q);
    let rank = p + q;
    out.data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, slice)| {
            let idx = decode_index(c, n, rank + 1);
            // new slot sits at position 0 (Holomorphic) or position p (AntiHolomorphic)
            let (d, rest) = match dir {
                GradDirection::Holomorphic => (idx[0], idx[1..].to_vec()),
                GradDirection::AntiHolomorphic => {
                    let d = idx[p];
                    let mut rest = Vec::with_capacity(rank);
                    rest.extend_from_slice(&idx[..p]);
                    rest.extend_from_slice(&idx[p + 1..]);
                    (d, rest)
                }
            };
            let base_c = rest.iter().fold(0usize, |acc, &i| acc * n + i);
            let dcomp = deriv[d].comp(base_c);
            slice.copy_from_slice(dcomp);
            // connection corrections
            match dir {
                GradDirection::Holomorphic => {
                    for alpha in 0..p {
                        let stride = n.pow((rank - 1 - alpha) as u32);
                        let slot_val = rest[alpha];
                        let base = base_c - slot_val * stride;
                        for cc in 0..n {
                            let gcomp = gamma.comp((d * n + slot_val) * n + cc);
                            let acomp = a.comp(base + cc * stride);
                            for ((o, &gv), &av) in slice.iter_mut().zip(gcomp).zip(acomp) {
                                *o -= gv * av;
                            }
                        }
                    }
                }
                GradDirection::AntiHolomorphic => {
                    for beta in 0..q {
                        let slot = p + beta;
                        let stride = n.pow((rank - 1 - slot) as u32);
                        let slot_val = rest[slot];
                        let base = base_c - slot_val * stride;
                        for cc in 0..n {
                            let gcomp = gamma.comp((d * n + slot_val) * n + cc);
                            let acomp = a.comp(base + cc * stride);
                            for ((o, &gv), &av) in slice.iter_mut().zip(gcomp).zip(acomp) {
                                *o -= gv.conj() * av;
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Chern Laplacian ΔA = g^{ā'a} ∇_a ∇_ā' A (Box) or Δ̄A = g^{ā'a} ∇_ā' ∇_a A
/// (BoxBar): two covariant derivatives, then the metric trace over the two
/// new slots.
pub fn chern_laplacian(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
    variant: LaplacianVariant,
) -> Result<TensorField> {
    let second = match variant {
        LaplacianVariant::Box => {
            let first = covariant_derivative(a, metric, gamma, GradDirection::AntiHolomorphic)?;
            covariant_derivative(&first, metric, gamma, GradDirection::Holomorphic)?
        }
        LaplacianVariant::BoxBar => {
            let first = covariant_derivative(a, metric, gamma, GradDirection::Holomorphic)?;
            covariant_derivative(&first, metric, gamma, GradDirection::AntiHolomorphic)?
        }
    };
    // Trace over the two new slots: unbarred slot 0, barred slot (second.p()).
    trace_first_pair(&second, metric)
}

/// Metric trace over (unbarred slot 0, barred slot p) of a (p,q) field:
/// out = Σ g^{b̄a}·f[a, ...; b̄, ...].
fn trace_first_pair(f: &TensorField, metric: &HermitianMetric) -> Result<TensorField> {
    let n = f.chart().n();
    let points = f.points();
    if f.p() == 0 || f.q() == 0 {
        return Err(Error::argument("trace_first_pair needs both slot kinds"));
    }
    let (p, q) = (f.p(), f.q());
    let rank = p + q;
    let mut out = TensorField::zero(f.chart().clone(), p - 1, q - 1);
    let ginv = metric.g_inv();
    let stride_u = n.pow((rank - 1) as u32);
    let stride_b = n.pow((rank - 1 - p) as u32);
    out.data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, slice)| {
            let idx = decode_index(c, n, rank - 2);
            // rebuild source base index with slots 0 and p zeroed
            let mut src = vec![0usize; rank];
            src[1..p].copy_from_slice(&idx[..p - 1]);
            src[p + 1..].copy_from_slice(&idx[p - 1..]);
            let base = src.iter().fold(0usize, |acc, &i| acc * n + i);
            for a in 0..n {
                for b in 0..n {
                    let m = ginv.comp(a * n + b);
                    let fcomp = f.comp(base + a * stride_u + b * stride_b);
                    for ((o, &mv), &fv) in slice.iter_mut().zip(m).zip(fcomp) {
                        *o += mv * fv;
                    }
                }
            }
        });
    Ok(out)
}

/// (div T)_{ij} = −∇_a T_{ijā}: the metric trace of ∇T over the derivative
/// slot and the torsion's barred slot, negated. Antisymmetric in (i,j).
pub fn divergence_t(
    torsion: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
) -> Result<TensorField> {
    let nt = covariant_derivative(torsion, metric, gamma, GradDirection::Holomorphic)?;
    // ∇T is (3,1): slots (a,i,j; k̄); trace (slot 0, barred slot 3) with g^{k̄a}.
    let traced = trace_first_pair(&nt, metric)?;
    Ok(traced.scaled(Complex64::new(-1.0, 0.0)))
}

/// Grid max of |Dᵐa|², the sum over all 2^m mixed ∇/∇̄ branches of the
/// pointwise squared norm. m ≤ 3 (cost guard).
pub fn mixed_gradient_norm_sq_max(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
    m: usize,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::argument("gradient order m must be >= 1"));
    }
    if m > 3 {
        return Err(Error::argument("gradient order m > 3 unsupported"));
    }
    let mut acc = vec![0.0f64; a.points()];
    branch_norms(a, metric, gamma, m, &mut acc)?;
    Ok(acc.iter().cloned().fold(0.0, f64::max))
}

/// Pointwise |Dᵐa|² field (sum over branches).
pub fn mixed_gradient_norm_sq_field(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
    m: usize,
) -> Result<Vec<f64>> {
    if m == 0 || m > 3 {
        return Err(Error::argument("gradient order must be 1..=3"));
    }
    let mut acc = vec![0.0f64; a.points()];
    branch_norms(a, metric, gamma, m, &mut acc)?;
    Ok(acc)
}

fn branch_norms(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
    depth: usize,
    acc: &mut [f64],
) -> Result<()> {
    for dir in [GradDirection::Holomorphic, GradDirection::AntiHolomorphic] {
        let d = covariant_derivative(a, metric, gamma, dir)?;
        if depth == 1 {
            let ns = ops::norm_sq_field(&d, metric)?;
            for (o, v) in acc.iter_mut().zip(ns) {
                *o += v;
            }
        } else {
            branch_norms(&d, metric, gamma, depth - 1, acc)?;
        }
    }
    Ok(())
}

/// Residual of the pluriclosed characterization
/// Ω_{ij̄pq̄} − Ω_{pj̄iq̄} − Ω_{iq̄pj̄} + Ω_{pq̄ij̄} − g^{b̄a} T_{ipb̄} T_{j̄q̄a},
/// returned as (max abs, relative) where relative divides by
/// 1 + max single-term magnitude.
pub fn pluriclosed_residual(
    metric: &HermitianMetric,
    pkg: &ChernPackage,
) -> Result<(f64, f64)> {
    let n = metric.n();
    let points = metric.chart().points();
    let ginv = metric.g_inv();
    let om = &pkg.curvature;
    let t = &pkg.torsion;
    let chunk = 2048usize.min(points);
    let stats: Vec<(f64, f64)> = (0..points.div_ceil(chunk))
        .into_par_iter()
        .map(|ci| {
            let start = ci * chunk;
            let len = (points - start).min(chunk);
            let ncomp4 = n * n * n * n;
            let mut oml = vec![Complex64::new(0.0, 0.0); ncomp4 * len];
            for c in 0..ncomp4 {
                oml[c * len..(c + 1) * len].copy_from_slice(&om.comp(c)[start..start + len]);
            }
            let nt = n * n * n;
            let mut tl = vec![Complex64::new(0.0, 0.0); nt * len];
            for c in 0..nt {
                tl[c * len..(c + 1) * len].copy_from_slice(&t.comp(c)[start..start + len]);
            }
            let mut ml = vec![Complex64::new(0.0, 0.0); n * n * len];
            for c in 0..n * n {
                ml[c * len..(c + 1) * len].copy_from_slice(&ginv.comp(c)[start..start + len]);
            }
            let oc = |i: usize, p: usize, j: usize, q: usize| ((i * n + p) * n + j) * n + q;
            let mut worst: f64 = 0.0;
            let mut tmax: f64 = 0.0;
            for g in 0..len {
                for i in 0..n {
                    for p in 0..n {
                        for j in 0..n {
                            for q in 0..n {
                                let o1 = oml[oc(i, p, j, q) * len + g];
                                let o2 = oml[oc(p, i, j, q) * len + g];
                                let o3 = oml[oc(i, p, q, j) * len + g];
                                let o4 = oml[oc(p, i, q, j) * len + g];
                                let mut tt = Complex64::new(0.0, 0.0);
                                for a in 0..n {
                                    for b in 0..n {
                                        // g^{b̄a} T_{ipb̄} conj(T_{jqā})
                                        tt += ml[(a * n + b) * len + g]
                                            * tl[((i * n + p) * n + b) * len + g]
                                            * tl[((j * n + q) * n + a) * len + g].conj();
                                    }
                                }
                                let r = o1 - o2 - o3 + o4 - tt;
                                worst = worst.max(r.norm());
                                tmax = tmax
                                    .max(o1.norm())
                                    .max(o2.norm())
                                    .max(o3.norm())
                                    .max(o4.norm())
                                    .max(tt.norm());
                            }
                        }
                    }
                }
            }
            (worst, tmax)
        })
        .collect();
    let max_abs = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let max_term = stats.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok((max_abs, max_abs / (1.0 + max_term)))
}

/// Flow diagnostics: (max|D¹a|, max|D²a|) for a *self-conjugate* tensor
/// (conj(a) = a as stored fields, which holds for the Chern curvature by its
/// Hermitian symmetry). Conjugation swaps ∇ and ∇̄, so |∇̄a| = |∇a| and
/// |∇̄∇̄a| = |∇∇a|, |∇∇̄a| = |∇̄∇a| pointwise; the branch sums collapse to
/// 2|∇a|² and 2(|∇∇a|² + |∇̄∇a|²), halving the work.
pub fn derivative_norm_maxes(
    a: &TensorField,
    metric: &HermitianMetric,
    gamma: &TensorField,
) -> Result<(f64, f64)> {
    let na = covariant_derivative(a, metric, gamma, GradDirection::Holomorphic)?;
    let d1f = ops::norm_sq_field(&na, metric)?;
    let max1 = (2.0 * d1f.iter().cloned().fold(0.0f64, f64::max)).sqrt();

    let (nna, nbna) = covariant_derivative_both(&na, metric, gamma)?;
    let d2a = ops::norm_sq_field(&nna, metric)?;
    drop(nna);
    let d2b = ops::norm_sq_field(&nbna, metric)?;
    drop(nbna);
    let max2sq = d2a
        .iter()
        .zip(d2b.iter())
        .map(|(a, b)| a + b)
        .fold(0.0f64, f64::max);
    Ok((max1, (2.0 * max2sq).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::TorusChart;
    use crate::metric::HermitianMetric;
    use crate::ops::{inner_product, max_norm};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flat(chart: &crate::chart::ChartRef) -> HermitianMetric {
        let g = TensorField::from_fn(chart.clone(), 1, 1, |idx, _| {
            if idx[0] == idx[1] {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        HermitianMetric::new(g).unwrap()
    }

    /// Certified pluriclosed rank-one metric (exactly band-limited).
    fn rank_one(chart: &crate::chart::ChartRef, eps: f64) -> HermitianMetric {
        let mut spec = crate::initial::DataSpec::defaults(
            crate::initial::DataKind::PluriclosedRankOne,
            chart.n(),
        );
        spec.epsilon = eps;
        crate::initial::make_pluriclosed_rank_one(chart, &spec).unwrap()
    }

    /// Hermitian single-mode perturbation of δ (generally not pluriclosed).
    fn bumpy_metric(chart: &crate::chart::ChartRef, eps: f64) -> HermitianMetric {
        let n = chart.n();
        let kappa: Vec<i64> = {
            let mut k = vec![0i64; 2 * n];
            k[0] = 1;
            k[3.min(2 * n - 1)] = 1;
            k
        };
        let mode = chart.fourier_mode(&kappa);
        let mut rng = crate::prng::SplitMix64::new(99);
        let mut coef = vec![c(0.0, 0.0); n * n];
        for v in coef.iter_mut() {
            *v = c(rng.next_signed(), rng.next_signed());
        }
        let g = TensorField::from_fn(chart.clone(), 1, 1, |idx, gpt| {
            let (i, j) = (idx[0], idx[1]);
            let base = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            let m = mode[gpt];
            base + eps * (coef[i * n + j] * m + coef[j * n + i].conj() * m.conj())
        });
        HermitianMetric::new(g).unwrap()
    }

    #[test]
    fn flat_metric_has_trivial_package() {
        let chart = TorusChart::new(2, 4).unwrap();
        let m = flat(&chart);
        let pkg = ChernPackage::compute(&m);
        assert_eq!(pkg.gamma.max_abs(), 0.0);
        assert_eq!(pkg.torsion.max_abs(), 0.0);
        assert_eq!(pkg.curvature.max_abs(), 0.0);
        assert_eq!(pkg.s_trace.max_abs(), 0.0);
        assert_eq!(pkg.ric_trace.max_abs(), 0.0);
        assert_eq!(pkg.q_tensor.max_abs(), 0.0);
    }

    #[test]
    fn conformal_christoffel_matches_analytic() {
        // n=1, g = e^u δ with u = 0.2 cos(2πx): Γ_{11}^1 = ∂_z u = −0.2π sin(2πx).
        let chart = TorusChart::new(1, 24).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let g = TensorField::from_fn(chart.clone(), 1, 1, |_, gpt| {
            let x = chart.coords(gpt)[0];
            c((0.2 * (two_pi * x).cos()).exp(), 0.0)
        });
        let m = HermitianMetric::new(g).unwrap();
        let gamma = christoffel(&m);
        let mut err: f64 = 0.0;
        for gpt in 0..chart.points() {
            let x = chart.coords(gpt)[0];
            let expect = c(-0.2 * std::f64::consts::PI * (two_pi * x).sin(), 0.0);
            err = err.max((gamma.at(&[0, 0, 0], gpt) - expect).norm());
        }
        assert!(err < 1e-10, "Γ analytic residual {err}");
    }

    #[test]
    fn conformal_curvature_matches_analytic() {
        // Ω_{11̄11̄} = −e^u ∂_z∂_z̄ u with ∂_z∂_z̄u = ¼Δu = −π²·0.2·cos(2πx).
        let chart = TorusChart::new(1, 24).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let g = TensorField::from_fn(chart.clone(), 1, 1, |_, gpt| {
            let x = chart.coords(gpt)[0];
            c((0.2 * (two_pi * x).cos()).exp(), 0.0)
        });
        let m = HermitianMetric::new(g).unwrap();
        let gamma = christoffel(&m);
        let omega = chern_curvature(&m, &gamma);
        let pi = std::f64::consts::PI;
        let mut err: f64 = 0.0;
        for gpt in 0..chart.points() {
            let x = chart.coords(gpt)[0];
            let u = 0.2 * (two_pi * x).cos();
            let expect = c(u.exp() * pi * pi * 0.2 * (two_pi * x).cos(), 0.0);
            err = err.max((omega.at(&[0, 0, 0, 0], gpt) - expect).norm());
        }
        assert!(err < 1e-9, "Ω analytic residual {err}");
    }

    #[test]
    fn curvature_paths_agree() {
        let chart = TorusChart::new(2, 12).unwrap();
        let m = rank_one(&chart, 0.05);
        let gamma = christoffel(&m);
        let a = chern_curvature(&m, &gamma);
        let b = chern_curvature_expanded(&m);
        let diff = a.sub(&b).max_abs();
        assert!(diff < 1e-9, "path disagreement {diff}");
    }

    #[test]
    fn curvature_hermitian_symmetry() {
        // conj(Ω_{ij̄pq̄}) = Ω_{jīqp̄}
        let chart = TorusChart::new(2, 12).unwrap();
        let m = rank_one(&chart, 0.05);
        let gamma = christoffel(&m);
        let om = chern_curvature(&m, &gamma);
        let n = 2;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        let a = om.comp(((i * n + p) * n + j) * n + q);
                        let b = om.comp(((j * n + q) * n + i) * n + p);
                        for (x, y) in a.iter().zip(b) {
                            err = err.max((x.conj() - y).norm());
                        }
                    }
                }
            }
        }
        assert!(err < 1e-10, "curvature symmetry residual {err}");
    }

    #[test]
    fn torsion_antisymmetry_is_exact() {
        let chart = TorusChart::new(2, 8).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let t = torsion(&m);
        let n = 2;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = t.comp((i * n + j) * n + k);
                    let b = t.comp((j * n + i) * n + k);
                    for (x, y) in a.iter().zip(b) {
                        assert_eq!(*x, -*y);
                    }
                }
            }
        }
    }

    #[test]
    fn metric_compatibility() {
        let chart = TorusChart::new(2, 12).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let gamma = christoffel(&m);
        let ng = covariant_derivative(m.g(), &m, &gamma, GradDirection::Holomorphic).unwrap();
        let nbg = covariant_derivative(m.g(), &m, &gamma, GradDirection::AntiHolomorphic).unwrap();
        assert!(ng.max_abs() < 1e-9, "|∇g| = {}", ng.max_abs());
        assert!(nbg.max_abs() < 1e-9, "|∇̄g| = {}", nbg.max_abs());
    }

    #[test]
    fn gradient_of_scalar_is_spectral_derivative() {
        let chart = TorusChart::new(2, 8).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let gamma = christoffel(&m);
        let f = TensorField::from_fn(chart.clone(), 0, 0, |_, gpt| {
            let x = chart.coords(gpt);
            c(
                (2.0 * std::f64::consts::PI * x[0]).cos(),
                (2.0 * std::f64::consts::PI * x[1]).sin(),
            )
        });
        let grad = covariant_derivative(&f, &m, &gamma, GradDirection::Holomorphic).unwrap();
        for d in 0..2 {
            let plain = f
                .spectral_derivative(DerivDirection::Holomorphic(d))
                .unwrap();
            let mut err: f64 = 0.0;
            for gpt in 0..chart.points() {
                err = err.max((grad.at(&[d], gpt) - plain.at(&[], gpt)).norm());
            }
            assert!(err < 1e-14);
        }
    }

    #[test]
    fn laplacian_on_flat_scalars_is_quarter_real_laplacian() {
        // Δf = ¼(f_xx + f_yy + ...) on the flat metric; single mode oracle:
        // f = e^{2πi(x_1 + 2y_2)} has Δf = −π²(1² + 2²) f.
        let chart = TorusChart::new(2, 12).unwrap();
        let m = flat(&chart);
        let gamma = christoffel(&m);
        let kappa = [1i64, 0, 0, 2];
        let mode = chart.fourier_mode(&kappa);
        let f = TensorField::from_data(chart.clone(), 0, 0, mode.clone()).unwrap();
        let lap = chern_laplacian(&f, &m, &gamma, LaplacianVariant::Box).unwrap();
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut err: f64 = 0.0;
        for (l, m0) in lap.data().iter().zip(mode.iter()) {
            err = err.max((l + pi2 * 5.0 * m0).norm());
        }
        assert!(err < 1e-10, "laplacian multiplier residual {err}");

        let constf = TensorField::from_fn(chart.clone(), 0, 0, |_, _| c(3.0, -1.0));
        let lapc = chern_laplacian(&constf, &m, &gamma, LaplacianVariant::Box).unwrap();
        assert!(lapc.max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_difference_is_curvature_action() {
        // (Δ − Δ̄)A = S∘A for A = T on non-Kähler data.
        let chart = TorusChart::new(2, 12).unwrap();
        let m = rank_one(&chart, 0.05);
        let pkg = ChernPackage::compute(&m);
        let t = &pkg.torsion;
        let lap = chern_laplacian(t, &m, &pkg.gamma, LaplacianVariant::Box).unwrap();
        let lapbar = chern_laplacian(t, &m, &pkg.gamma, LaplacianVariant::BoxBar).unwrap();
        let action = crate::ops::circle_op(&pkg.s_trace, t, &m).unwrap();
        let resid = lap.sub(&lapbar).sub(&action).max_abs();
        let scale = 1.0 + lap.max_abs().max(action.max_abs());
        assert!(resid / scale < 1e-8, "Δ−Δ̄ residual {resid}");
    }

    #[test]
    fn divergence_is_antisymmetric_and_kahler_zero() {
        let chart = TorusChart::new(2, 12).unwrap();
        let m = bumpy_metric(&chart, 0.03);
        let pkg = ChernPackage::compute(&m);
        let div = divergence_t(&pkg.torsion, &m, &pkg.gamma).unwrap();
        let n = 2;
        for i in 0..n {
            for j in 0..n {
                let a = div.comp(i * n + j);
                let b = div.comp(j * n + i);
                for (x, y) in a.iter().zip(b) {
                    assert!((x + y).norm() < 1e-12);
                }
            }
        }
        // flat (trivially Kähler): div T = 0
        let mf = flat(&chart);
        let pf = ChernPackage::compute(&mf);
        let divf = divergence_t(&pf.torsion, &mf, &pf.gamma).unwrap();
        assert!(divf.max_abs() < 1e-12);
    }

    #[test]
    fn mixed_gradient_norms_basics() {
        let chart = TorusChart::new(2, 8).unwrap();
        let m = flat(&chart);
        let gamma = christoffel(&m);
        let constf = TensorField::from_fn(chart.clone(), 0, 0, |_, _| c(2.0, 0.0));
        for order in 1..=3 {
            let v = mixed_gradient_norm_sq_max(&constf, &m, &gamma, order).unwrap();
            assert_eq!(v, 0.0);
        }
        assert!(mixed_gradient_norm_sq_max(&constf, &m, &gamma, 4).is_err());
        assert!(mixed_gradient_norm_sq_max(&constf, &m, &gamma, 0).is_err());

        // single mode: |D¹f|² = |∂f|² + |∂̄f|² = (|σ|² + |τ|²)|f|²
        let kappa = [1i64, 0, 0, 0];
        let f =
            TensorField::from_data(chart.clone(), 0, 0, chart.fourier_mode(&kappa)).unwrap();
        let got = mixed_gradient_norm_sq_max(&f, &m, &gamma, 1).unwrap();
        let s: f64 = (0..2)
            .map(|j| chart.sigma(j, &kappa).norm_sqr() + chart.tau(j, &kappa).norm_sqr())
            .sum();
        assert!((got - s).abs() < 1e-10 * (1.0 + s), "got {got}, want {s}");
    }

    #[test]
    fn branch_subsum_bounded_by_total() {
        let chart = TorusChart::new(2, 8).unwrap();
        let m = bumpy_metric(&chart, 0.04);
        let pkg = ChernPackage::compute(&m);
        let total =
            mixed_gradient_norm_sq_field(&pkg.torsion, &m, &pkg.gamma, 1).unwrap();
        let nt =
            covariant_derivative(&pkg.torsion, &m, &pkg.gamma, GradDirection::Holomorphic)
                .unwrap();
        let sub = crate::ops::norm_sq_field(&nt, &m).unwrap();
        for (t, s) in total.iter().zip(sub.iter()) {
            assert!(t - s >= -1e-12, "|D¹T|² < |∇T|² pointwise");
        }
    }

    #[test]
    fn fused_package_matches_reference_ops() {
        let chart = TorusChart::new(2, 8).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let (pkg, diag) = ChernPackage::compute_with_diagnostics(&m);
        let gamma_ref = christoffel(&m);
        let t_ref = torsion(&m);
        let om_ref = chern_curvature(&m, &gamma_ref);
        let (s_ref, ric_ref, q_ref) = curvature_traces(&m, &om_ref, &t_ref);
        assert!(pkg.gamma.sub(&gamma_ref).max_abs() < 1e-14);
        assert!(pkg.torsion.sub(&t_ref).max_abs() < 1e-14);
        assert!(pkg.curvature.sub(&om_ref).max_abs() < 1e-13);
        assert!(pkg.s_trace.sub(&s_ref).max_abs() < 1e-13);
        assert!(pkg.ric_trace.sub(&ric_ref).max_abs() < 1e-13);
        assert!(pkg.q_tensor.sub(&q_ref).max_abs() < 1e-13);
        // in-chunk diagnostics match the standalone ops
        let mc = crate::ops::max_norm(&pkg.curvature, &m).unwrap();
        assert!((diag.max_curv - mc).abs() < 1e-12 * (1.0 + mc));
        let mt = crate::ops::max_norm_sq(&pkg.torsion, &m).unwrap();
        assert!((diag.max_torsion_sq - mt).abs() < 1e-12 * (1.0 + mt));
        let (pc_abs, pc_rel) = pluriclosed_residual(&m, &pkg).unwrap();
        assert!((diag.pluriclosed_abs - pc_abs).abs() < 1e-12 * (1.0 + pc_abs));
        assert!((diag.pluriclosed_rel() - pc_rel).abs() < 1e-12 * (1.0 + pc_rel));
        let rs = pkg.ric_trace.add(&pkg.s_trace);
        let mr = crate::ops::max_norm(&rs, &m).unwrap();
        assert!((diag.max_ric_s - mr).abs() < 1e-12 * (1.0 + mr));
    }

    #[test]
    fn q_trace_equals_torsion_norm() {
        let chart = TorusChart::new(2, 12).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let pkg = ChernPackage::compute(&m);
        let trq = crate::ops::trace(&pkg.q_tensor, &[(0, 1)], &m).unwrap();
        let tsq = crate::ops::norm_sq_field(&pkg.torsion, &m).unwrap();
        let mut err: f64 = 0.0;
        for (a, b) in trq.data().iter().zip(tsq.iter()) {
            err = err.max((a - c(*b, 0.0)).norm());
        }
        assert!(err < 1e-10, "tr Q − |T|² residual {err}");
        assert!(max_norm(&pkg.torsion, &m).unwrap() > 1e-3);
    }

    #[test]
    fn q_is_hermitian_psd() {
        let chart = TorusChart::new(2, 8).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let pkg = ChernPackage::compute(&m);
        let n = 2;
        for gpt in 0..chart.points() {
            let mut mat = vec![c(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    mat[i * n + j] = pkg.q_tensor.at(&[i, j], gpt);
                }
            }
            let (lo, _) = crate::linalg::eig_range(&mat, n);
            assert!(lo >= -1e-12, "Q min eigenvalue {lo} at {gpt}");
            for i in 0..n {
                for j in 0..n {
                    assert!((mat[i * n + j] - mat[j * n + i].conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn s_and_ric_differ_off_kahler() {
        let chart = TorusChart::new(2, 12).unwrap();
        let m = bumpy_metric(&chart, 0.05);
        let pkg = ChernPackage::compute(&m);
        let diff = pkg.s_trace.sub(&pkg.ric_trace).max_abs();
        assert!(diff > 1e-4, "S and Ric should differ, got {diff}");
    }

    #[test]
    fn commutator_on_bandlimited_field_matches_circle() {
        // (∇_p∇_q̄ − ∇_q̄∇_p)A = Ω_{pq̄}∘A on a band-limited random (1,1) field.
        let chart = TorusChart::new(2, 12).unwrap();
        let m = rank_one(&chart, 0.05);
        let pkg = ChernPackage::compute(&m);
        let kappa = [0i64, 1, 0, 0];
        let mode = chart.fourier_mode(&kappa);
        let mut rng = crate::prng::SplitMix64::new(7);
        let mut coef = vec![c(0.0, 0.0); 4];
        for v in coef.iter_mut() {
            *v = c(rng.next_signed(), rng.next_signed());
        }
        let a = TensorField::from_fn(chart.clone(), 1, 1, |idx, gpt| {
            coef[idx[0] * 2 + idx[1]] * mode[gpt] + c(0.3, 0.1)
        });
        let nb = covariant_derivative(&a, &m, &pkg.gamma, GradDirection::AntiHolomorphic).unwrap();
        let n_nb = covariant_derivative(&nb, &m, &pkg.gamma, GradDirection::Holomorphic).unwrap();
        let nf = covariant_derivative(&a, &m, &pkg.gamma, GradDirection::Holomorphic).unwrap();
        let nb_n = covariant_derivative(&nf, &m, &pkg.gamma, GradDirection::AntiHolomorphic).unwrap();
        let comm = n_nb.sub(&nb_n);
        let action = crate::ops::circle_op(&pkg.curvature, &a, &m).unwrap();
        let resid = comm.sub(&action).max_abs();
        let scale = 1.0 + comm.max_abs();
        assert!(resid / scale < 1e-8, "commutator residual {resid}");
    }

    #[test]
    fn first_bianchi_holds() {
        // ∇_j̄ T_{ipq̄} = Ω_{pj̄iq̄} − Ω_{ij̄pq̄}
        let chart = TorusChart::new(2, 12).unwrap();
        let m = rank_one(&chart, 0.05);
        let pkg = ChernPackage::compute(&m);
        let nbt =
            covariant_derivative(&pkg.torsion, &m, &pkg.gamma, GradDirection::AntiHolomorphic)
                .unwrap();
        let n = 2;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for p in 0..n {
                for j in 0..n {
                    for q in 0..n {
                        // (∇̄T)[i,p; j̄,q̄] with new barred slot first
                        let lhs = nbt.comp(((i * n + p) * n + j) * n + q);
                        let o1 = pkg.curvature.comp(((p * n + i) * n + j) * n + q);
                        let o2 = pkg.curvature.comp(((i * n + p) * n + j) * n + q);
                        for ((l, a), b) in lhs.iter().zip(o1).zip(o2) {
                            err = err.max((l - (a - b)).norm());
                        }
                    }
                }
            }
        }
        let scale = 1.0 + pkg.curvature.max_abs();
        assert!(err / scale < 1e-8, "first Bianchi residual {err}");
    }

    #[test]
    fn inner_product_against_laplacian_is_finite() {
        // smoke: (T, ΔT) computable and finite on perturbed data
        let chart = TorusChart::new(2, 8).unwrap();
        let m = bumpy_metric(&chart, 0.03);
        let pkg = ChernPackage::compute(&m);
        let lap = chern_laplacian(&pkg.torsion, &m, &pkg.gamma, LaplacianVariant::Box).unwrap();
        let ip = inner_product(&pkg.torsion, &lap, &m).unwrap();
        assert!(ip.max_abs().is_finite());
    }
}
