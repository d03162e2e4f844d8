//! Brute-force oracles, independent of the production einsum/FFT paths:
//! naive O(points²) DFT derivatives and nested-loop contractions.

use num_complex::Complex64;
use pcflow::chart::ChartRef;
use pcflow::metric::HermitianMetric;
use pcflow::tensor::{decode_index, TensorField};

/// Signed frequency of index k on an N-point axis.
fn signed(k: usize, grid: usize) -> i64 {
    if k < grid / 2 {
        k as i64
    } else {
        k as i64 - grid as i64
    }
}

/// Naive spectral derivative of one scalar component: direct DFT, symbol
/// multiply (with Nyquist zeroing and the 2/3 mask), direct inverse DFT.
pub fn naive_derivative(
    chart: &ChartRef,
    comp: &[Complex64],
    axis_j: usize,
    antiholomorphic: bool,
) -> Vec<Complex64> {
    let n = chart.n();
    let grid = chart.grid();
    let points = chart.points();
    let axes = 2 * n;
    let two_pi = 2.0 * std::f64::consts::PI;
    let cutoff = (grid / 3) as i64;

    let coords = |g: usize| -> Vec<usize> {
        let mut out = vec![0usize; axes];
        let mut rem = g;
        for a in (0..axes).rev() {
            out[a] = rem % grid;
            rem /= grid;
        }
        out
    };

    // forward DFT
    let mut hat = vec![Complex64::new(0.0, 0.0); points];
    for (kflat, h) in hat.iter_mut().enumerate() {
        let kidx = coords(kflat);
        let mut acc = Complex64::new(0.0, 0.0);
        for (g, v) in comp.iter().enumerate() {
            let x = coords(g);
            let mut phase = 0.0;
            for a in 0..axes {
                phase -= two_pi * (kidx[a] * x[a]) as f64 / grid as f64;
            }
            acc += v * Complex64::from_polar(1.0, phase);
        }
        *h = acc / points as f64;
    }
    // symbol multiply + inverse DFT
    let mut out = vec![Complex64::new(0.0, 0.0); points];
    for (g, o) in out.iter_mut().enumerate() {
        let x = coords(g);
        let mut acc = Complex64::new(0.0, 0.0);
        for (kflat, h) in hat.iter().enumerate() {
            let kidx = coords(kflat);
            let mut masked = false;
            for a in 0..axes {
                if signed(kidx[a], grid).abs() > cutoff {
                    masked = true;
                    break;
                }
            }
            if masked {
                continue;
            }
            let kx_idx = kidx[2 * axis_j];
            let ky_idx = kidx[2 * axis_j + 1];
            // standard multipliers with the Nyquist mode zeroed
            let kx = if kx_idx == grid / 2 { 0.0 } else { signed(kx_idx, grid) as f64 };
            let ky = if ky_idx == grid / 2 { 0.0 } else { signed(ky_idx, grid) as f64 };
            let sym = if antiholomorphic {
                std::f64::consts::PI * Complex64::new(-ky, kx)
            } else {
                std::f64::consts::PI * Complex64::new(ky, kx)
            };
            let mut phase = 0.0;
            for a in 0..axes {
                phase += two_pi * (kidx[a] * x[a]) as f64 / grid as f64;
            }
            acc += sym * h * Complex64::from_polar(1.0, phase);
        }
        *o = acc;
    }
    out
}

fn naive_inverse_at(metric: &HermitianMetric, gpt: usize) -> Vec<Complex64> {
    // hand-rolled cofactor/Gauss inverse of the pointwise matrix G[i][j] = g_{ij̄};
    // returns M with M[a*n+b] = g^{b̄a} (component layout of the library)
    let n = metric.n();
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            mat[i * n + j] = metric.g_at(i, j, gpt);
        }
    }
    let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
    match n {
        1 => inv[0] = Complex64::new(1.0, 0.0) / mat[0],
        2 => {
            let det = mat[0] * mat[3] - mat[1] * mat[2];
            inv[0] = mat[3] / det;
            inv[1] = -mat[1] / det;
            inv[2] = -mat[2] / det;
            inv[3] = mat[0] / det;
        }
        _ => {
            // Gauss-Jordan
            let mut m = mat.clone();
            for i in 0..n {
                inv[i * n + i] = Complex64::new(1.0, 0.0);
            }
            for col in 0..n {
                let piv = (col..n)
                    .max_by(|&a, &b| {
                        m[a * n + col]
                            .norm()
                            .partial_cmp(&m[b * n + col].norm())
                            .unwrap()
                    })
                    .unwrap();
                for c in 0..n {
                    m.swap(col * n + c, piv * n + c);
                    inv.swap(col * n + c, piv * n + c);
                }
                let d = m[col * n + col];
                for c in 0..n {
                    m[col * n + c] /= d;
                    inv[col * n + c] /= d;
                }
                for r in 0..n {
                    if r != col {
                        let f = m[r * n + col];
                        for c in 0..n {
                            let mv = m[col * n + c];
                            let iv = inv[col * n + c];
                            m[r * n + c] -= f * mv;
                            inv[r * n + c] -= f * iv;
                        }
                    }
                }
            }
        }
    }
    // transpose into g^{b̄a} layout: component (a,b) = matrix entry [b][a]
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        for b in 0..n {
            out[a * n + b] = inv[b * n + a];
        }
    }
    out
}

/// Nested-loop contraction oracle matching `ops::contract`'s contract:
/// pairings of (slot in a, slot in b), metric factor g^{b̄a} per pair,
/// leftover slots of a then b.
pub fn naive_contract(
    a: &TensorField,
    b: &TensorField,
    pairing: &[(usize, usize)],
    metric: &HermitianMetric,
) -> TensorField {
    let n = a.chart().n();
    let points = a.chart().points();
    let free_a: Vec<usize> = (0..a.rank())
        .filter(|s| !pairing.iter().any(|(x, _)| x == s))
        .collect();
    let free_b: Vec<usize> = (0..b.rank())
        .filter(|s| !pairing.iter().any(|(_, y)| y == s))
        .collect();
    let out_p = free_a.iter().filter(|&&s| s < a.p()).count()
        + free_b.iter().filter(|&&s| s < b.p()).count();
    let out_q = free_a.len() + free_b.len() - out_p;
    // output slot order: free unbarred of a then b, free barred of a then b
    let mut order: Vec<(bool, usize)> = Vec::new();
    for &s in free_a.iter().filter(|&&s| s < a.p()) {
        order.push((true, s));
    }
    for &s in free_b.iter().filter(|&&s| s < b.p()) {
        order.push((false, s));
    }
    for &s in free_a.iter().filter(|&&s| s >= a.p()) {
        order.push((true, s));
    }
    for &s in free_b.iter().filter(|&&s| s >= b.p()) {
        order.push((false, s));
    }

    let mut out = TensorField::zero(a.chart().clone(), out_p, out_q);
    let out_comps = out.comps();
    let npairs = pairing.len();
    for gpt in 0..points {
        let ginv = naive_inverse_at(metric, gpt);
        for c in 0..out_comps {
            let out_idx = decode_index(c, n, out_p + out_q);
            let mut acc = Complex64::new(0.0, 0.0);
            // loop over all pair value assignments: (unbarred u, barred v) per pair
            let total = n.pow((2 * npairs) as u32);
            for flat in 0..total {
                let mut vals = vec![0usize; 2 * npairs];
                let mut rem = flat;
                for v in vals.iter_mut().rev() {
                    *v = rem % n;
                    rem /= n;
                }
                let mut idx_a = vec![0usize; a.rank()];
                let mut idx_b = vec![0usize; b.rank()];
                for (k, &(sa, sb)) in pairing.iter().enumerate() {
                    let u = vals[2 * k];
                    let v = vals[2 * k + 1];
                    // unbarred slot takes u, barred slot takes v; factor g^{v̄u}
                    if sa < a.p() {
                        idx_a[sa] = u;
                        idx_b[sb] = v;
                    } else {
                        idx_a[sa] = v;
                        idx_b[sb] = u;
                    }
                }
                for (pos, &(in_a, slot)) in order.iter().enumerate() {
                    if in_a {
                        idx_a[slot] = out_idx[pos];
                    } else {
                        idx_b[slot] = out_idx[pos];
                    }
                }
                let mut term = a.at(&idx_a, gpt) * b.at(&idx_b, gpt);
                for (k, _) in pairing.iter().enumerate() {
                    let u = vals[2 * k];
                    let v = vals[2 * k + 1];
                    term *= ginv[u * n + v];
                }
                acc += term;
            }
            out.comp_mut(c)[gpt] = acc;
        }
    }
    out
}

/// Naive Chern curvature: Γ_{ij}^a = ∂_i g_{jb̄} g^{b̄a} with naive-DFT
/// derivatives, then Ω_{ij̄pq̄} = −∂_j̄ Γ_{ip}^a g_{aq̄}, all in plain loops.
pub fn naive_curvature(metric: &HermitianMetric) -> TensorField {
    let chart = metric.chart().clone();
    let n = chart.n();
    let points = chart.points();
    // ∂_i g
    let mut dg = vec![vec![Vec::new(); n * n]; n];
    for i in 0..n {
        for c in 0..n * n {
            dg[i][c] = naive_derivative(&chart, metric.g().comp(c), i, false);
        }
    }
    // Γ
    let mut gamma = vec![vec![Complex64::new(0.0, 0.0); points]; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for gpt in 0..points {
                    let ginv = naive_inverse_at(metric, gpt);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..n {
                        acc += dg[i][j * n + b][gpt] * ginv[a * n + b];
                    }
                    gamma[(i * n + j) * n + a][gpt] = acc;
                }
            }
        }
    }
    // ∂_j̄ Γ then multiply by g
    let mut out = TensorField::zero(chart.clone(), 2, 2);
    for i in 0..n {
        for p in 0..n {
            for j in 0..n {
                for q in 0..n {
                    let mut comp = vec![Complex64::new(0.0, 0.0); points];
                    for a in 0..n {
                        let dbar = naive_derivative(&chart, &gamma[(i * n + p) * n + a], j, true);
                        for (gpt, v) in dbar.iter().enumerate() {
                            comp[gpt] -= v * metric.g_at(a, q, gpt);
                        }
                    }
                    out.comp_mut(((i * n + p) * n + j) * n + q)
                        .copy_from_slice(&comp);
                }
            }
        }
    }
    out
}

pub fn random_band_limited(
    chart: &ChartRef,
    p: usize,
    q: usize,
    seed: u64,
) -> TensorField {
    let mut rng = pcflow::prng::SplitMix64::new(seed);
    let mut f = TensorField::zero(chart.clone(), p, q);
    for v in f.data_mut() {
        *v = Complex64::new(rng.next_signed(), rng.next_signed());
    }
    f
}
