//! Complex tensor fields on a torus chart.
//!
//! A `TensorField` of signature (p,q) stores one complex value per
//! (index-tuple, grid-point) for p unbarred and q barred covariant slots.
//! Component storage is index-major then grid-point-major: the component
//! with multi-index (a_1..a_p, b_1..b_q) occupies a contiguous slice of
//! `points` values, and multi-indices are row-major with the unbarred block
//! first. A (2,2) field holding the Chern curvature therefore keeps
//! Ω_{i j̄ p q̄} at component (i, p, j, q): unbarred slots in order of
//! appearance, then barred slots in order of appearance.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chart::{ChartRef, DerivDirection};
use crate::error::{Error, Result};

#[derive(Clone)]
pub struct TensorField {
    chart: ChartRef,
    p: usize,
    q: usize,
    data: Vec<Complex64>,
}

impl std::fmt::Debug for TensorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorField")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("chart", &self.chart)
            .finish()
    }
}

impl TensorField {
    pub fn zero(chart: ChartRef, p: usize, q: usize) -> Self {
        let len = chart.comp_count(p + q) * chart.points();
        TensorField {
            chart,
            p,
            q,
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_data(chart: ChartRef, p: usize, q: usize, data: Vec<Complex64>) -> Result<Self> {
        let expect = chart.comp_count(p + q) * chart.points();
        if data.len() != expect {
            return Err(Error::argument(format!(
                "data length {} != n^(p+q)·N^(2n) = {expect}",
                data.len()
            )));
        }
        Ok(TensorField { chart, p, q, data })
    }

    /// Build pointwise: f(component multi-index, grid point) -> value.
    pub fn from_fn(
        chart: ChartRef,
        p: usize,
        q: usize,
        f: impl Fn(&[usize], usize) -> Complex64 + Sync,
    ) -> Self {
        let mut out = TensorField::zero(chart, p, q);
        let n = out.chart.n();
        let points = out.chart.points();
        let rank = p + q;
        out.data
            .par_chunks_mut(points)
            .enumerate()
            .for_each(|(c, comp)| {
                let idx = decode_index(c, n, rank);
                for (g, v) in comp.iter_mut().enumerate() {
                    *v = f(&idx, g);
                }
            });
        out
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rank(&self) -> usize {
        self.p + self.q
    }

    pub fn comps(&self) -> usize {
        self.chart.comp_count(self.rank())
    }

    pub fn points(&self) -> usize {
        self.chart.points()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Flat component index of a multi-index (unbarred block then barred block).
    pub fn comp_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let n = self.chart.n();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let pts = self.points();
        &self.data[c * pts..(c + 1) * pts]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let pts = self.points();
        &mut self.data[c * pts..(c + 1) * pts]
    }

    /// Value at (multi-index, point); convenience for tests and oracles.
    pub fn at(&self, idx: &[usize], g: usize) -> Complex64 {
        self.data[self.comp_index(idx) * self.points() + g]
    }

    pub fn same_chart(&self, other: &TensorField) -> bool {
        self.chart.same_as(&other.chart)
    }

    /// Complex conjugation: maps signature (p,q) to (q,p). The barred block
    /// becomes the unbarred block (order kept) and vice versa, so that e.g.
    /// conj(T)_{k, (ī,j̄)} = conj(T_{(i,j), k̄}). Involutive.
    pub fn conjugate(&self) -> TensorField {
        let n = self.chart.n();
        let points = self.points();
        let mut out = TensorField::zero(self.chart.clone(), self.q, self.p);
        let p = self.p;
        let q = self.q;
        let rank = p + q;
        out.data
            .par_chunks_mut(points)
            .enumerate()
            .for_each(|(c, comp)| {
                let idx = decode_index(c, n, rank);
                // out index = (old barred block, old unbarred block)
                let mut src = vec![0usize; rank];
                src[..p].copy_from_slice(&idx[q..]);
                src[p..].copy_from_slice(&idx[..q]);
                let sc = src.iter().fold(0, |acc, &i| acc * n + i);
                let src_comp = &self.data[sc * points..(sc + 1) * points];
                for (v, s) in comp.iter_mut().zip(src_comp) {
                    *v = s.conj();
                }
            });
        out
    }

    /// Componentwise dealiased spectral partial derivative ∂_{z_j} or ∂_{z̄_j}.
    /// Adds no tensor slot; raw coordinate derivative used inside connection
    /// formulas.
    pub fn spectral_derivative(&self, dir: DerivDirection) -> Result<TensorField> {
        if dir.axis() >= self.chart.n() {
            return Err(Error::argument(format!(
                "derivative axis {} out of range for n = {}",
                dir.axis(),
                self.chart.n()
            )));
        }
        let mut out = self.clone();
        let chart = self.chart.clone();
        out.data
            .par_chunks_mut(self.points())
            .for_each(|comp| {
                chart.forward(comp);
                chart.apply_deriv_symbol(comp, dir);
                chart.inverse(comp);
            });
        Ok(out)
    }

    /// Forward-transform every component once, for reuse across directions.
    pub fn to_spectral(&self) -> SpectralTensor {
        let mut data = self.data.clone();
        let chart = self.chart.clone();
        data.par_chunks_mut(self.points())
            .for_each(|comp| chart.forward(comp));
        SpectralTensor {
            chart,
            p: self.p,
            q: self.q,
            data,
        }
    }

    // ---- arithmetic --------------------------------------------------------

    pub fn scale(&mut self, alpha: Complex64) {
        self.data.par_iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: Complex64) -> TensorField {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// self += alpha * x
    pub fn axpy(&mut self, alpha: Complex64, x: &TensorField) {
        assert_eq!(self.data.len(), x.data.len(), "axpy shape mismatch");
        self.data
            .par_iter_mut()
            .zip(x.data.par_iter())
            .for_each(|(a, b)| *a += alpha * b);
    }

    pub fn add(&self, other: &TensorField) -> TensorField {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &TensorField) -> TensorField {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// Max of |value| over all components and points.
    pub fn max_abs(&self) -> f64 {
        self.data
            .par_iter()
            .map(|v| v.norm())
            .reduce(|| 0.0, f64::max)
    }
}

/// A tensor field held in spectral space (same layout, Fourier coefficients).
pub struct SpectralTensor {
    chart: ChartRef,
    p: usize,
    q: usize,
    data: Vec<Complex64>,
}

impl SpectralTensor {
    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    /// Apply one derivative symbol and transform back.
    pub fn derivative(&self, dir: DerivDirection) -> TensorField {
        self.derived(&[dir])
    }

    /// Apply several derivative symbols (e.g. ∂_a∂_b̄) with one inverse pass.
    pub fn derived(&self, dirs: &[DerivDirection]) -> TensorField {
        let points = self.chart.points();
        let mut out = TensorField {
            chart: self.chart.clone(),
            p: self.p,
            q: self.q,
            data: vec![Complex64::new(0.0, 0.0); self.data.len()],
        };
        let chart = self.chart.clone();
        let dirs = dirs.to_vec();
        out.data
            .par_chunks_mut(points)
            .enumerate()
            .for_each(|(c, comp)| {
                let src = &self.data[c * points..(c + 1) * points];
                chart.deriv_symbol_into(src, comp, dirs[0]);
                for &d in &dirs[1..] {
                    chart.apply_deriv_symbol(comp, d);
                }
                chart.inverse(comp);
            });
        out
    }
}

/// Decode a flat component index into a row-major multi-index.
pub fn decode_index(mut c: usize, n: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0usize; rank];
    for k in (0..rank).rev() {
        idx[k] = c % n;
        c /= n;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::TorusChart;

    fn cplx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn data_length_invariant() {
        let chart = TorusChart::new(2, 4).unwrap();
        let f = TensorField::zero(chart.clone(), 2, 1);
        assert_eq!(f.data().len(), 2usize.pow(3) * chart.points());
        assert!(TensorField::from_data(chart, 1, 1, vec![cplx(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn conjugate_is_involution_and_swaps_blocks() {
        let chart = TorusChart::new(2, 4).unwrap();
        let mut rng = crate::prng::SplitMix64::new(3);
        let f = TensorField::from_fn(chart, 2, 1, |_, _| cplx(0.0, 0.0));
        let mut f = f;
        for v in f.data_mut() {
            *v = cplx(rng.next_signed(), rng.next_signed());
        }
        let c = f.conjugate();
        assert_eq!((c.p(), c.q()), (1, 2));
        // conj(T)[k,(i,j)](g) = conj(T[(i,j),k](g))
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for g in [0usize, 5, 17] {
                        assert_eq!(c.at(&[k, i, j], g), f.at(&[i, j, k], g).conj());
                    }
                }
            }
        }
        let cc = c.conjugate();
        for (a, b) in cc.data().iter().zip(f.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let chart = TorusChart::new(2, 8).unwrap();
        let f = TensorField::from_fn(chart, 0, 0, |_, _| cplx(1.3, -0.4));
        for dir in [
            DerivDirection::Holomorphic(0),
            DerivDirection::AntiHolomorphic(1),
        ] {
            let d = f.spectral_derivative(dir).unwrap();
            assert_eq!(d.max_abs(), 0.0);
        }
    }

    #[test]
    fn derivative_of_single_mode_matches_analytic() {
        // f = e^{2πi x_1} on n=2: ∂_{z_1} f = πi f, ∂_{z̄_1} f = πi f, ∂_{z_2} f = 0.
        let chart = TorusChart::new(2, 8).unwrap();
        let kappa = [1i64, 0, 0, 0];
        let mode = chart.fourier_mode(&kappa);
        let f = TensorField::from_data(chart.clone(), 0, 0, mode.clone()).unwrap();

        let d = f
            .spectral_derivative(DerivDirection::Holomorphic(0))
            .unwrap();
        let pi_i = Complex64::new(0.0, std::f64::consts::PI);
        let mut err: f64 = 0.0;
        for (a, m) in d.data().iter().zip(mode.iter()) {
            err = err.max((a - pi_i * m).norm());
        }
        assert!(err < 1e-12, "max abs error {err}");

        let d2 = f
            .spectral_derivative(DerivDirection::Holomorphic(1))
            .unwrap();
        assert!(d2.max_abs() < 1e-13);
    }

    #[test]
    fn derivative_axis_out_of_range() {
        let chart = TorusChart::new(2, 4).unwrap();
        let f = TensorField::zero(chart, 0, 0);
        assert!(f
            .spectral_derivative(DerivDirection::Holomorphic(2))
            .is_err());
    }

    #[test]
    fn mixed_derivatives_commute() {
        let chart = TorusChart::new(2, 12).unwrap();
        // sin(2πx_1)·sin(2πy_2) via exponentials
        let f = TensorField::from_fn(chart.clone(), 0, 0, |_, g| {
            let c = chart.coords(g);
            let two_pi = 2.0 * std::f64::consts::PI;
            cplx((two_pi * c[0]).sin() * (two_pi * c[3]).sin(), 0.0)
        });
        let a = DerivDirection::Holomorphic(0);
        let b = DerivDirection::AntiHolomorphic(1);
        let ab = f
            .spectral_derivative(a)
            .unwrap()
            .spectral_derivative(b)
            .unwrap();
        let ba = f
            .spectral_derivative(b)
            .unwrap()
            .spectral_derivative(a)
            .unwrap();
        assert!(ab.sub(&ba).max_abs() < 1e-13);
    }

    #[test]
    fn conjugation_commutes_with_derivative() {
        let chart = TorusChart::new(1, 12).unwrap();
        let f = TensorField::from_fn(chart.clone(), 0, 0, |_, g| {
            let c = chart.coords(g);
            let two_pi = 2.0 * std::f64::consts::PI;
            Complex64::from_polar(1.0, two_pi * (c[0] - 2.0 * c[1]))
        });
        let lhs = f
            .spectral_derivative(DerivDirection::Holomorphic(0))
            .unwrap()
            .conjugate();
        let rhs = f
            .conjugate()
            .spectral_derivative(DerivDirection::AntiHolomorphic(0))
            .unwrap();
        assert!(lhs.sub(&rhs).max_abs() < 1e-13);
    }

    #[test]
    fn antiholomorphic_derivative_matches_finite_differences() {
        // f = sin(2πx_1) sin(2πy_2): spectral ∂_{z̄_2} f vs 4th-order central
        // differences, which converge at O(N^-4).
        let two_pi = 2.0 * std::f64::consts::PI;
        let f_expr = |x1: f64, y2: f64| (two_pi * x1).sin() * (two_pi * y2).sin();
        let mut errs = Vec::new();
        for grid in [12usize, 24] {
            let chart = TorusChart::new(2, grid).unwrap();
            let f = TensorField::from_fn(chart.clone(), 0, 0, |_, g| {
                let c = chart.coords(g);
                cplx(f_expr(c[0], c[3]), 0.0)
            });
            let d = f
                .spectral_derivative(DerivDirection::AntiHolomorphic(1))
                .unwrap();
            // 4th-order central differences in x_2 (axis 2) and y_2 (axis 3):
            // ∂ ≈ (-f(+2h) + 8f(+h) - 8f(-h) + f(-2h)) / 12h, ∂_z̄ = (∂_x + i∂_y)/2.
            let h = chart.spacing();
            let pts = chart.points();
            let stride_x = grid; // axis 2 stride on an n=2 chart
            let stride_y = 1usize;
            let shift = |g: usize, stride: usize, by: i64| -> usize {
                let axis_len = grid as i64;
                let idx = ((g / stride) % grid) as i64;
                let new = (idx + by).rem_euclid(axis_len) as usize;
                g - ((g / stride) % grid) * stride + new * stride
            };
            let mut err: f64 = 0.0;
            for g in 0..pts {
                let fd = |stride: usize| -> f64 {
                    let v = |by: i64| f.data()[shift(g, stride, by)].re;
                    (-v(2) + 8.0 * v(1) - 8.0 * v(-1) + v(-2)) / (12.0 * h)
                };
                let approx = cplx(fd(stride_x), fd(stride_y) * 0.0)
                    + Complex64::i() * cplx(fd(stride_y), 0.0);
                let approx = approx * 0.5;
                err = err.max((d.data()[g] - approx).norm());
            }
            errs.push(err);
        }
        // error is the FD truncation: O(N^-4) decay, so 1 order of magnitude per doubling
        assert!(errs[1] < errs[0] / 10.0, "errors {errs:?}");
        assert!(errs[0] < 1e-1);
    }
}
