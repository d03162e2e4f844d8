//! Traced tensor contraction in the paper's index convention.
//!
//! A term is a product of tensor-field factors with single-character slot
//! labels (unbarred block first, matching storage order). A label appearing
//! on one unbarred and one barred slot is traced through the inverse metric:
//! the pair (a, b̄) contributes Σ_{a,b} g^{b̄a} X[a] Y[b̄]. A label appearing
//! on one operand slot and in the output is free. Anything else is rejected.
//!
//! Evaluation precompiles the index bookkeeping into a flat plan (one entry
//! per assignment of all loop indices), grouped by output component so that
//! execution streams over grid points.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chart::ChartRef;
use crate::error::{Error, Result};
use crate::metric::HermitianMetric;
use crate::tensor::TensorField;

pub struct Factor<'a> {
    pub field: &'a TensorField,
    pub labels: Vec<u8>,
}

impl<'a> Factor<'a> {
    pub fn new(field: &'a TensorField, labels: &str) -> Self {
        Factor {
            field,
            labels: labels.bytes().filter(|b| !b.is_ascii_whitespace()).collect(),
        }
    }
}

pub struct Term<'a> {
    pub coeff: Complex64,
    pub name: String,
    pub factors: Vec<Factor<'a>>,
}

impl<'a> Term<'a> {
    pub fn new(coeff: f64, name: &str, factors: Vec<Factor<'a>>) -> Self {
        Term {
            coeff: Complex64::new(coeff, 0.0),
            name: name.to_string(),
            factors,
        }
    }
}

struct Plan {
    /// entry ranges per output component
    group_offsets: Vec<usize>,
    factor_comps: Vec<u32>,
    ginv_comps: Vec<u32>,
    nfactors: usize,
    ntraced: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LabelKind {
    Free { out_slot: usize, barred: bool },
    Traced,
}

struct LabelInfo {
    kind: LabelKind,
    /// (factor index, slot index, barred) occurrences among operands
    occurrences: Vec<(usize, usize, bool)>,
}

fn build_plan(
    out_p: usize,
    out_q: usize,
    out_labels: &[u8],
    term: &Term<'_>,
    n: usize,
) -> Result<Plan> {
    if out_labels.len() != out_p + out_q {
        return Err(Error::argument("output label count mismatch"));
    }
    let mut labels: Vec<(u8, LabelInfo)> = Vec::new();
    fn find(l: u8, labels: &mut Vec<(u8, LabelInfo)>) -> usize {
        if let Some(i) = labels.iter().position(|(c, _)| *c == l) {
            i
        } else {
            labels.push((
                l,
                LabelInfo {
                    kind: LabelKind::Traced,
                    occurrences: Vec::new(),
                },
            ));
            labels.len() - 1
        }
    }
    for (fi, f) in term.factors.iter().enumerate() {
        if f.labels.len() != f.field.rank() {
            return Err(Error::argument(format!(
                "factor {fi} of term '{}' has {} labels for rank {}",
                term.name,
                f.labels.len(),
                f.field.rank()
            )));
        }
        for (slot, &l) in f.labels.iter().enumerate() {
            let barred = slot >= f.field.p();
            let idx = find(l, &mut labels);
            labels[idx].1.occurrences.push((fi, slot, barred));
        }
    }
    for (out_slot, &l) in out_labels.iter().enumerate() {
        let barred = out_slot >= out_p;
        let idx = find(l, &mut labels);
        if labels[idx].1.kind != LabelKind::Traced {
            return Err(Error::argument(format!(
                "label '{}' repeated in output",
                l as char
            )));
        }
        labels[idx].1.kind = LabelKind::Free { out_slot, barred };
    }
    let mut free: Vec<usize> = Vec::new();
    let mut traced: Vec<usize> = Vec::new();
    for (i, (l, info)) in labels.iter().enumerate() {
        match info.kind {
            LabelKind::Free { barred, .. } => {
                if info.occurrences.len() != 1 {
                    return Err(Error::argument(format!(
                        "free label '{}' must appear on exactly one operand slot",
                        *l as char
                    )));
                }
                if info.occurrences[0].2 != barred {
                    return Err(Error::argument(format!(
                        "label '{}' changes barredness between operand and output",
                        *l as char
                    )));
                }
                free.push(i);
            }
            LabelKind::Traced => {
                if info.occurrences.len() != 2 || info.occurrences[0].2 == info.occurrences[1].2 {
                    return Err(Error::argument(format!(
                        "traced label '{}' must appear on exactly one unbarred and one barred slot",
                        *l as char
                    )));
                }
                traced.push(i);
            }
        }
    }

    let nfactors = term.factors.len();
    let ntraced = traced.len();
    let nvals = free.len() + 2 * ntraced;
    let total: usize = n.pow(nvals as u32);
    let out_comps = n.pow((out_p + out_q) as u32);

    // Resolve, per factor slot, where its value comes from in the
    // assignment vector [free values..., (u,b) per traced label...].
    let mut slot_source: Vec<Vec<usize>> = Vec::with_capacity(nfactors);
    for f in &term.factors {
        let mut src = Vec::with_capacity(f.labels.len());
        for (slot, &l) in f.labels.iter().enumerate() {
            let li = labels.iter().position(|(c, _)| *c == l).unwrap();
            let barred = slot >= f.field.p();
            let pos = match labels[li].1.kind {
                LabelKind::Free { .. } => free.iter().position(|&x| x == li).unwrap(),
                LabelKind::Traced => {
                    let tpos = traced.iter().position(|&x| x == li).unwrap();
                    free.len() + 2 * tpos + usize::from(barred)
                }
            };
            src.push(pos);
        }
        slot_source.push(src);
    }
    let mut out_source = vec![0usize; out_p + out_q];
    for (fpos, &li) in free.iter().enumerate() {
        if let LabelKind::Free { out_slot, .. } = labels[li].1.kind {
            out_source[out_slot] = fpos;
        }
    }

    let mut buckets: Vec<Vec<(Vec<u32>, Vec<u32>)>> = vec![Vec::new(); out_comps];
    let mut vals = vec![0usize; nvals];
    for flat in 0..total {
        let mut rem = flat;
        for v in vals.iter_mut().rev() {
            *v = rem % n;
            rem /= n;
        }
        let out_c = out_source
            .iter()
            .fold(0usize, |acc, &pos| acc * n + vals[pos]);
        let mut fcomps = vec![0u32; nfactors];
        for (fi, src) in slot_source.iter().enumerate() {
            fcomps[fi] = src.iter().fold(0usize, |acc, &pos| acc * n + vals[pos]) as u32;
        }
        let mut gcomps = vec![0u32; ntraced];
        for (t, gc) in gcomps.iter_mut().enumerate() {
            let u = vals[free.len() + 2 * t];
            let b = vals[free.len() + 2 * t + 1];
            *gc = (u * n + b) as u32;
        }
        buckets[out_c].push((fcomps, gcomps));
    }

    let mut group_offsets = Vec::with_capacity(out_comps + 1);
    let mut factor_comps = Vec::new();
    let mut ginv_comps = Vec::new();
    group_offsets.push(0usize);
    let mut count = 0usize;
    for bucket in buckets {
        for (fc, gc) in bucket {
            factor_comps.extend_from_slice(&fc);
            ginv_comps.extend_from_slice(&gc);
            count += 1;
        }
        group_offsets.push(count);
    }
    Ok(Plan {
        group_offsets,
        factor_comps,
        ginv_comps,
        nfactors,
        ntraced,
    })
}

/// Accumulate one term into `out` (+= semantics).
fn accumulate(
    out: &mut TensorField,
    out_labels: &[u8],
    term: &Term<'_>,
    metric: &HermitianMetric,
) -> Result<()> {
    let chart = out.chart().clone();
    for f in &term.factors {
        if !f.field.chart().same_as(&chart) {
            return Err(Error::ChartMismatch(format!(
                "factor of term '{}' lives on a different chart",
                term.name
            )));
        }
    }
    if !metric.chart().same_as(&chart) {
        return Err(Error::ChartMismatch(
            "metric chart differs from output".into(),
        ));
    }
    let n = chart.n();
    let points = chart.points();
    let plan = build_plan(out.p(), out.q(), out_labels, term, n)?;
    let coeff = term.coeff;
    let fields: Vec<&TensorField> = term.factors.iter().map(|f| f.field).collect();
    let ginv = metric.g_inv();
    out.data_mut()
        .par_chunks_mut(points)
        .enumerate()
        .for_each(|(c, slice)| {
            let lo = plan.group_offsets[c];
            let hi = plan.group_offsets[c + 1];
            for e in lo..hi {
                let fc = &plan.factor_comps[e * plan.nfactors..(e + 1) * plan.nfactors];
                let gc = &plan.ginv_comps[e * plan.ntraced..(e + 1) * plan.ntraced];
                match (plan.nfactors, plan.ntraced) {
                    (1, 0) => {
                        let a = fields[0].comp(fc[0] as usize);
                        for (o, &av) in slice.iter_mut().zip(a) {
                            *o += coeff * av;
                        }
                    }
                    (1, 1) => {
                        let a = fields[0].comp(fc[0] as usize);
                        let m = ginv.comp(gc[0] as usize);
                        for ((o, &av), &mv) in slice.iter_mut().zip(a).zip(m) {
                            *o += coeff * av * mv;
                        }
                    }
                    (2, 1) => {
                        let a = fields[0].comp(fc[0] as usize);
                        let b = fields[1].comp(fc[1] as usize);
                        let m = ginv.comp(gc[0] as usize);
                        for (((o, &av), &bv), &mv) in slice.iter_mut().zip(a).zip(b).zip(m) {
                            *o += coeff * av * bv * mv;
                        }
                    }
                    (2, 2) => {
                        let a = fields[0].comp(fc[0] as usize);
                        let b = fields[1].comp(fc[1] as usize);
                        let m0 = ginv.comp(gc[0] as usize);
                        let m1 = ginv.comp(gc[1] as usize);
                        for g in 0..points {
                            slice[g] += coeff * a[g] * b[g] * m0[g] * m1[g];
                        }
                    }
                    _ => {
                        let fslices: Vec<&[Complex64]> = fc
                            .iter()
                            .enumerate()
                            .map(|(fi, &c2)| fields[fi].comp(c2 as usize))
                            .collect();
                        let gslices: Vec<&[Complex64]> =
                            gc.iter().map(|&c2| ginv.comp(c2 as usize)).collect();
                        for (g, o) in slice.iter_mut().enumerate() {
                            let mut v = coeff;
                            for f in &fslices {
                                v *= f[g];
                            }
                            for mslice in &gslices {
                                v *= mslice[g];
                            }
                            *o += v;
                        }
                    }
                }
            }
        });
    Ok(())
}

/// Evaluate Σ terms into a fresh (out_p, out_q) field.
pub fn einsum(
    chart: &ChartRef,
    out_p: usize,
    out_q: usize,
    out_labels: &str,
    terms: &[Term<'_>],
    metric: &HermitianMetric,
) -> Result<TensorField> {
    let out_labels: Vec<u8> = out_labels
        .bytes()
        .filter(|b| !b.is_ascii_whitespace())
        .collect();
    let mut out = TensorField::zero(chart.clone(), out_p, out_q);
    for term in terms {
        accumulate(&mut out, &out_labels, term, metric)?;
    }
    Ok(out)
}

/// Evaluate Σ terms, also reporting max |term| over components and points for
/// each term (debugging aid for residual reports).
pub fn einsum_with_magnitudes(
    chart: &ChartRef,
    out_p: usize,
    out_q: usize,
    out_labels: &str,
    terms: &[Term<'_>],
    metric: &HermitianMetric,
) -> Result<(TensorField, Vec<(String, f64)>)> {
    let out_labels: Vec<u8> = out_labels
        .bytes()
        .filter(|b| !b.is_ascii_whitespace())
        .collect();
    let mut out = TensorField::zero(chart.clone(), out_p, out_q);
    let mut magnitudes = Vec::with_capacity(terms.len());
    for term in terms {
        let mut single = TensorField::zero(chart.clone(), out_p, out_q);
        accumulate(&mut single, &out_labels, term, metric)?;
        magnitudes.push((term.name.clone(), single.max_abs()));
        out.axpy(Complex64::new(1.0, 0.0), &single);
    }
    Ok((out, magnitudes))
}
