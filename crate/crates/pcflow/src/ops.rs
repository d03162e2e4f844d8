//! Metric contractions, Hermitian inner products, and the slot-signed
//! bracket operators h[A] and Z∘A.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::einsum::{einsum, Factor, Term};
use crate::error::{Error, Result};
use crate::metric::HermitianMetric;
use crate::tensor::TensorField;

const LABEL_POOL: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";

/// Pointwise contraction of `a` against `b`. Each pairing joins one unbarred
/// and one barred slot (slots numbered 0..p+q, unbarred block first, in
/// either operand) and inserts g^{b̄a}. The result keeps the leftover slots
/// of `a` then `b`, unbarred block first.
pub fn contract(
    a: &TensorField,
    b: &TensorField,
    pairing: &[(usize, usize)],
    metric: &HermitianMetric,
) -> Result<TensorField> {
    if !a.same_chart(b) || !metric.chart().same_as(a.chart()) {
        return Err(Error::ChartMismatch("contract operands".into()));
    }
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    let mut labels_a: Vec<u8> = vec![0; a.rank()];
    let mut labels_b: Vec<u8> = vec![0; b.rank()];
    let mut pool = LABEL_POOL.iter().copied();
    for &(sa, sb) in pairing {
        if sa >= a.rank() || sb >= b.rank() {
            return Err(Error::argument(format!(
                "pairing ({sa},{sb}) out of range"
            )));
        }
        if used_a[sa] || used_b[sb] {
            return Err(Error::argument("slot paired twice"));
        }
        let bar_a = sa >= a.p();
        let bar_b = sb >= b.p();
        if bar_a == bar_b {
            return Err(Error::argument(format!(
                "pairing ({sa},{sb}) must join one unbarred and one barred slot"
            )));
        }
        let l = pool.next().ok_or_else(|| Error::argument("too many slots"))?;
        labels_a[sa] = l;
        labels_b[sb] = l;
        used_a[sa] = true;
        used_b[sb] = true;
    }
    // free slots, preserving relative order: a's then b's within each block
    let mut out_unbarred = Vec::new();
    let mut out_barred = Vec::new();
    for (slot, used) in used_a.iter().enumerate() {
        if !used {
            let l = pool.next().ok_or_else(|| Error::argument("too many slots"))?;
            labels_a[slot] = l;
            if slot < a.p() {
                out_unbarred.push(l);
            } else {
                out_barred.push(l);
            }
        }
    }
    for (slot, used) in used_b.iter().enumerate() {
        if !used {
            let l = pool.next().ok_or_else(|| Error::argument("too many slots"))?;
            labels_b[slot] = l;
            if slot < b.p() {
                out_unbarred.push(l);
            } else {
                out_barred.push(l);
            }
        }
    }
    let out_p = out_unbarred.len();
    let out_q = out_barred.len();
    let mut out_labels = String::new();
    for l in out_unbarred.iter().chain(out_barred.iter()) {
        out_labels.push(*l as char);
    }
    let term = Term {
        coeff: Complex64::new(1.0, 0.0),
        name: "contract".into(),
        factors: vec![
            Factor {
                field: a,
                labels: labels_a,
            },
            Factor {
                field: b,
                labels: labels_b,
            },
        ],
    };
    einsum(a.chart(), out_p, out_q, &out_labels, &[term], metric)
}

/// Internal metric trace over slot pairs of a single tensor (the repeated-
/// subscript convention), e.g. tr Q = trace(Q, &[(0,1)]).
pub fn trace(
    a: &TensorField,
    pairs: &[(usize, usize)],
    metric: &HermitianMetric,
) -> Result<TensorField> {
    if !metric.chart().same_as(a.chart()) {
        return Err(Error::ChartMismatch("trace operand".into()));
    }
    let mut labels: Vec<u8> = vec![0; a.rank()];
    let mut used = vec![false; a.rank()];
    let mut pool = LABEL_POOL.iter().copied();
    for &(s1, s2) in pairs {
        if s1 >= a.rank() || s2 >= a.rank() || s1 == s2 {
            return Err(Error::argument("trace pair out of range"));
        }
        if used[s1] || used[s2] {
            return Err(Error::argument("slot traced twice"));
        }
        if (s1 >= a.p()) == (s2 >= a.p()) {
            return Err(Error::argument(
                "trace pair must join one unbarred and one barred slot",
            ));
        }
        let l = pool.next().unwrap();
        labels[s1] = l;
        labels[s2] = l;
        used[s1] = true;
        used[s2] = true;
    }
    let mut out_unbarred = Vec::new();
    let mut out_barred = Vec::new();
    for (slot, u) in used.iter().enumerate() {
        if !u {
            let l = pool.next().unwrap();
            labels[slot] = l;
            if slot < a.p() {
                out_unbarred.push(l);
            } else {
                out_barred.push(l);
            }
        }
    }
    let out_p = out_unbarred.len();
    let out_q = out_barred.len();
    let mut out_labels = String::new();
    for l in out_unbarred.iter().chain(out_barred.iter()) {
        out_labels.push(*l as char);
    }
    let term = Term {
        coeff: Complex64::new(1.0, 0.0),
        name: "trace".into(),
        factors: vec![Factor {
            field: a,
            labels,
        }],
    };
    einsum(a.chart(), out_p, out_q, &out_labels, &[term], metric)
}

const CHUNK: usize = 2048;

/// Pointwise Hermitian inner product (a,b): full contraction of a against
/// conj(b) with metric raising. Returns a scalar (0,0) complex field;
/// (a,a) is real and ≥ 0 pointwise.
///
/// Cache-blocked: grid points are processed in chunks, with all components
/// of the chunk gathered into a hot scratch buffer before the rank raising
/// passes run; the whole field is then read only once.
pub fn inner_product(
    a: &TensorField,
    b: &TensorField,
    metric: &HermitianMetric,
) -> Result<TensorField> {
    if (a.p(), a.q()) != (b.p(), b.q()) {
        return Err(Error::Signature {
            expected_p: a.p(),
            expected_q: a.q(),
            got_p: b.p(),
            got_q: b.q(),
        });
    }
    if !a.same_chart(b) || !metric.chart().same_as(a.chart()) {
        return Err(Error::ChartMismatch("inner product operands".into()));
    }
    let points = a.points();
    let mut out = TensorField::zero(a.chart().clone(), 0, 0);
    let out_data = out.data_mut();
    out_data
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(ci, oslice)| {
            let start = ci * CHUNK;
            let len = oslice.len();
            let raised = raise_chunk(a, metric, start, len);
            let comps = a.comps();
            for c in 0..comps {
                let bc = &b.comp(c)[start..start + len];
                let rc = &raised[c * len..(c + 1) * len];
                for ((o, &rv), &bv) in oslice.iter_mut().zip(rc).zip(bc) {
                    *o += rv * bv.conj();
                }
            }
        });
    let _ = points;
    Ok(out)
}

/// Gather all components of `a` over [start, start+len) and raise every slot
/// in the local buffer. Layout: [comp][point-in-chunk].
fn raise_chunk(a: &TensorField, metric: &HermitianMetric, start: usize, len: usize) -> Vec<Complex64> {
    let n = a.chart().n();
    let rank = a.rank();
    let comps = a.comps();
    let mut cur = vec![Complex64::new(0.0, 0.0); comps * len];
    for c in 0..comps {
        cur[c * len..(c + 1) * len].copy_from_slice(&a.comp(c)[start..start + len]);
    }
    // local copy of the inverse metric over the chunk
    let ginv = metric.g_inv();
    let mut ml = vec![Complex64::new(0.0, 0.0); n * n * len];
    for c in 0..n * n {
        ml[c * len..(c + 1) * len].copy_from_slice(&ginv.comp(c)[start..start + len]);
    }
    let mut next = vec![Complex64::new(0.0, 0.0); comps * len];
    for slot in 0..rank {
        let barred = slot >= a.p();
        let stride = n.pow((rank - 1 - slot) as u32);
        next.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for c in 0..comps {
            let slot_val = (c / stride) % n;
            let base = c - slot_val * stride;
            for i in 0..n {
                let sc = base + i * stride;
                // unbarred slot i of a pairs with conj(b)'s barred j̄ via
                // g^{j̄i} = inv_at(i, j); barred slot t̄ pairs with unbarred s
                // via g^{t̄s} = inv_at(s, t).
                let mc = if barred {
                    slot_val * n + i
                } else {
                    i * n + slot_val
                };
                let m = &ml[mc * len..(mc + 1) * len];
                let src = &cur[sc * len..(sc + 1) * len];
                let dst = &mut next[c * len..(c + 1) * len];
                for ((o, &sv), &mv) in dst.iter_mut().zip(src).zip(m) {
                    *o += sv * mv;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Pointwise squared norm |a|² = Re (a,a) as a real field.
pub fn norm_sq_field(a: &TensorField, metric: &HermitianMetric) -> Result<Vec<f64>> {
    let ip = inner_product(a, a, metric)?;
    Ok(ip.data().iter().map(|v| v.re).collect())
}

/// Grid maximum of the pointwise metric norm |a|_g.
pub fn max_norm(a: &TensorField, metric: &HermitianMetric) -> Result<f64> {
    let ns = norm_sq_field(a, metric)?;
    Ok(ns.iter().cloned().fold(0.0f64, f64::max).max(0.0).sqrt())
}

/// Grid maximum of |a|²_g.
pub fn max_norm_sq(a: &TensorField, metric: &HermitianMetric) -> Result<f64> {
    let ns = norm_sq_field(a, metric)?;
    Ok(ns.iter().cloned().fold(0.0f64, f64::max).max(0.0))
}

fn check_hermitian_11(h: &TensorField) -> Result<()> {
    if (h.p(), h.q()) != (1, 1) {
        return Err(Error::Signature {
            expected_p: 1,
            expected_q: 1,
            got_p: h.p(),
            got_q: h.q(),
        });
    }
    let n = h.chart().n();
    let scale = 1.0 + h.max_abs();
    for i in 0..n {
        for j in 0..n {
            let a = h.comp(i * n + j);
            let b = h.comp(j * n + i);
            let r = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y.conj()).norm())
                .fold(0.0, f64::max);
            if r > 1e-10 * scale {
                return Err(Error::argument(format!(
                    "h is not Hermitian: residual {r:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// The bracket h[A]: minus-signed metric contraction of a Hermitian (1,1)
/// tensor h against every slot of A,
/// (h[A]) = −Σ_α h_{p_α ā} A_{…a…} − Σ_β h_{a q̄_β} A_{…ā…}.
pub fn h_bracket(
    h: &TensorField,
    a: &TensorField,
    metric: &HermitianMetric,
) -> Result<TensorField> {
    check_hermitian_11(h)?;
    slot_signed_bracket(h, &[], a, metric, -1.0)
}

/// The operator Z∘A for Z with a trailing (1,1) acting pair (its last
/// unbarred and last barred slot): minus sign on unbarred slots of A, plus
/// sign on barred slots. The result carries Z's leading slots then A's.
pub fn circle_op(
    z: &TensorField,
    a: &TensorField,
    metric: &HermitianMetric,
) -> Result<TensorField> {
    if z.p() == 0 || z.q() == 0 {
        return Err(Error::argument(
            "circle operand must have at least one unbarred and one barred slot",
        ));
    }
    // leading slots of z (all but the acting pair), labeled as output prefix
    let prefix: Vec<usize> = (0..z.rank())
        .filter(|&s| s != z.p() - 1 && s != z.rank() - 1)
        .collect();
    slot_signed_bracket(z, &prefix, a, metric, 1.0)
}

/// Shared machinery: for each slot of `a`, contract `op`'s acting pair
/// against that slot. Unbarred slots always get −1; barred slots get
/// `barred_sign` (−1 for h[A], +1 for Z∘A).
fn slot_signed_bracket(
    op: &TensorField,
    op_prefix_slots: &[usize],
    a: &TensorField,
    metric: &HermitianMetric,
    barred_sign: f64,
) -> Result<TensorField> {
    if !op.same_chart(a) || !metric.chart().same_as(a.chart()) {
        return Err(Error::ChartMismatch("bracket operands".into()));
    }
    // Build labels: op prefix slots get fresh output labels; acting pair gets
    // per-term labels; a's slots get fixed labels reused across terms.
    let mut pool = LABEL_POOL.iter().copied();
    let act_u = op.p() - 1;
    let act_b = op.rank() - 1;
    let mut op_labels_base: Vec<u8> = vec![0; op.rank()];
    let mut prefix_unbarred = Vec::new();
    let mut prefix_barred = Vec::new();
    for &s in op_prefix_slots {
        let l = pool.next().unwrap();
        op_labels_base[s] = l;
        if s < op.p() {
            prefix_unbarred.push(l);
        } else {
            prefix_barred.push(l);
        }
    }
    let a_labels: Vec<u8> = (0..a.rank()).map(|_| pool.next().unwrap()).collect();
    let trace_label = pool.next().unwrap();

    let out_p = prefix_unbarred.len() + a.p();
    let out_q = prefix_barred.len() + a.q();
    let mut out_labels = String::new();
    for &l in prefix_unbarred.iter().chain(a_labels[..a.p()].iter()) {
        out_labels.push(l as char);
    }
    for &l in prefix_barred.iter().chain(a_labels[a.p()..].iter()) {
        out_labels.push(l as char);
    }

    let mut terms = Vec::new();
    for slot in 0..a.rank() {
        let barred = slot >= a.p();
        let sign = if barred { barred_sign } else { -1.0 };
        let mut op_labels = op_labels_base.clone();
        let mut al = a_labels.clone();
        // op's acting pair: the slot matching a's variance carries the output
        // label of that slot; the other side is traced into A.
        if barred {
            op_labels[act_b] = a_labels[slot];
            op_labels[act_u] = trace_label;
        } else {
            op_labels[act_u] = a_labels[slot];
            op_labels[act_b] = trace_label;
        }
        al[slot] = trace_label;
        terms.push(Term {
            coeff: Complex64::new(sign, 0.0),
            name: format!("slot{slot}"),
            factors: vec![
                Factor {
                    field: op,
                    labels: op_labels,
                },
                Factor {
                    field: a,
                    labels: al,
                },
            ],
        });
    }
    einsum(a.chart(), out_p, out_q, &out_labels, &terms, metric)
}
