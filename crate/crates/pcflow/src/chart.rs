//! Discretization of the flat torus ℂⁿ/(ℤ+iℤ)ⁿ.
//!
//! Each complex coordinate z_j = x_j + i·y_j contributes two real axes of
//! period 1, sampled with `grid` points each, so a chart carries `grid^(2n)`
//! points. Real axes are ordered (x_1, y_1, x_2, y_2, ...) with axis 0
//! slowest (row-major).
//!
//! Spectral conventions, for a field f(x) = Σ_k f̂_k e^{2πi k·x}:
//!
//! ```text
//! ∂_x  ↦ 2πi·k_x                (Nyquist mode zeroed)
//! ∂_z  = (∂_x − i∂_y)/2  ↦ π(k_y + i·k_x)
//! ∂_z̄  = (∂_x + i∂_y)/2  ↦ π(−k_y + i·k_x)
//! ```
//!
//! Every spectral derivative also applies the 2/3-rule dealiasing mask
//! (modes with any |k| > ⌊grid/3⌋ are zeroed), so quadratic nonlinearities
//! formed in physical space cannot alias back into the resolved band.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Direction of a Chern-coordinate derivative on the chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivDirection {
    /// ∂_{z_j}, 0-based complex axis j.
    Holomorphic(usize),
    /// ∂_{z̄_j}, 0-based complex axis j.
    AntiHolomorphic(usize),
}

impl DerivDirection {
    pub fn axis(self) -> usize {
        match self {
            DerivDirection::Holomorphic(j) | DerivDirection::AntiHolomorphic(j) => j,
        }
    }
}

pub struct TorusChart {
    n: usize,
    grid: usize,
    points: usize,
    /// Stride of each real axis (axis 0 slowest).
    strides: Vec<usize>,
    /// Standard first-derivative multiplier 2πi·k per frequency index
    /// (Nyquist zeroed). Shared by every axis.
    axis_symbol: Vec<Complex64>,
    /// Per-axis dealias flag: |k| ≤ ⌊grid/3⌋.
    mask1d: Vec<bool>,
    /// Full-grid dealias mask (product of per-axis flags), stored as 0/1.
    mask: Vec<f64>,
    /// Per-axis frequency index of every grid point (fast symbol lookup).
    axis_index: Vec<Vec<u16>>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusChart")
            .field("n", &self.n)
            .field("grid", &self.grid)
            .field("points", &self.points)
            .finish()
    }
}

pub type ChartRef = Arc<TorusChart>;

impl TorusChart {
    /// Build a chart. `grid` must be even and ≥ 2; the CLI additionally
    /// restricts to 4..=64, but tiny grids are allowed here so that
    /// brute-force oracles can run on 2^(2n) points.
    pub fn new(n: usize, grid: usize) -> Result<ChartRef> {
        if n == 0 {
            return Err(Error::argument("complex dimension n must be >= 1"));
        }
        if grid < 2 || grid % 2 != 0 {
            return Err(Error::argument(format!(
                "grid must be even and >= 2, got {grid}"
            )));
        }
        let axes = 2 * n;
        let points = grid.checked_pow(axes as u32).ok_or_else(|| {
            Error::argument(format!("grid {grid}^(2*{n}) overflows usize"))
        })?;

        let mut strides = vec![0usize; axes];
        let mut s = 1usize;
        for a in (0..axes).rev() {
            strides[a] = s;
            s *= grid;
        }

        let two_pi = 2.0 * std::f64::consts::PI;
        let mut axis_symbol = vec![Complex64::new(0.0, 0.0); grid];
        let mut mask1d = vec![false; grid];
        let cutoff = (grid / 3) as i64;
        for idx in 0..grid {
            let k = signed_freq(idx, grid);
            // Nyquist has no well-defined sign for odd derivatives.
            let sym = if idx == grid / 2 { 0.0 } else { two_pi * k as f64 };
            axis_symbol[idx] = Complex64::new(0.0, sym);
            mask1d[idx] = k.abs() <= cutoff;
        }

        let mut mask = vec![1.0f64; points];
        for (g, m) in mask.iter_mut().enumerate() {
            for a in 0..axes {
                let idx = (g / strides[a]) % grid;
                if !mask1d[idx] {
                    *m = 0.0;
                    break;
                }
            }
        }
        let axis_index: Vec<Vec<u16>> = (0..axes)
            .map(|a| {
                (0..points)
                    .map(|g| ((g / strides[a]) % grid) as u16)
                    .collect()
            })
            .collect();

        let mut planner = FftPlanner::<f64>::new();
        let fft_fwd = planner.plan_fft_forward(grid);
        let fft_inv = planner.plan_fft_inverse(grid);

        Ok(Arc::new(TorusChart {
            n,
            grid,
            points,
            strides,
            axis_symbol,
            mask1d,
            mask,
            axis_index,
            fft_fwd,
            fft_inv,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.grid as f64
    }

    /// Number of components of a rank-r tensor: n^r.
    pub fn comp_count(&self, rank: usize) -> usize {
        self.n.pow(rank as u32)
    }

    pub fn same_as(&self, other: &TorusChart) -> bool {
        self.n == other.n && self.grid == other.grid
    }

    /// Real coordinates (x_1, y_1, ..., x_n, y_n) of grid point g, in [0,1).
    pub fn coords(&self, g: usize) -> Vec<f64> {
        (0..2 * self.n)
            .map(|a| ((g / self.strides[a]) % self.grid) as f64 * self.spacing())
            .collect()
    }

    /// ∂_{z_j} multiplier at the signed frequency vector κ (length 2n,
    /// ordered like the axes). Exact for |κ| below Nyquist.
    pub fn sigma(&self, j: usize, kappa: &[i64]) -> Complex64 {
        let kx = kappa[2 * j] as f64;
        let ky = kappa[2 * j + 1] as f64;
        std::f64::consts::PI * Complex64::new(ky, kx)
    }

    /// ∂_{z̄_j} multiplier at the signed frequency vector κ.
    pub fn tau(&self, j: usize, kappa: &[i64]) -> Complex64 {
        let kx = kappa[2 * j] as f64;
        let ky = kappa[2 * j + 1] as f64;
        std::f64::consts::PI * Complex64::new(-ky, kx)
    }

    /// Raw ∂_x / ∂_y spectral multiplier for one axis frequency index.
    pub fn axis_symbol(&self, idx: usize) -> Complex64 {
        self.axis_symbol[idx]
    }

    /// ∂_{z_j} multiplier by frequency *indices* on the two real axes of
    /// complex axis j: (axis_symbol(ix) − i·axis_symbol(iy)) / 2.
    pub fn dz_symbol(&self, ix: usize, iy: usize) -> Complex64 {
        (self.axis_symbol[ix] - Complex64::i() * self.axis_symbol[iy]) * 0.5
    }

    /// ∂_{z̄_j} multiplier by frequency indices.
    pub fn dzbar_symbol(&self, ix: usize, iy: usize) -> Complex64 {
        (self.axis_symbol[ix] + Complex64::i() * self.axis_symbol[iy]) * 0.5
    }

    pub fn dealias_keep(&self, idx: usize) -> bool {
        self.mask1d[idx]
    }

    /// The complex exponential field e^{2πi κ·x}, evaluated exactly.
    pub fn fourier_mode(&self, kappa: &[i64]) -> Vec<Complex64> {
        assert_eq!(kappa.len(), 2 * self.n);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut out = vec![Complex64::new(0.0, 0.0); self.points];
        for (g, v) in out.iter_mut().enumerate() {
            let mut phase = 0.0;
            for a in 0..2 * self.n {
                let idx = (g / self.strides[a]) % self.grid;
                phase += kappa[a] as f64 * idx as f64 / self.grid as f64;
            }
            *v = Complex64::from_polar(1.0, two_pi * phase);
        }
        out
    }

    // ---- spectral machinery ------------------------------------------------

    /// In-place forward FFT over all 2n axes (unnormalized).
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.points);
        for a in 0..2 * self.n {
            self.fft_axis(data, a, false);
        }
    }

    /// In-place inverse FFT over all 2n axes, normalized by 1/points.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.points);
        for a in 0..2 * self.n {
            self.fft_axis(data, a, true);
        }
        let scale = 1.0 / self.points as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn fft_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let nfft = self.grid;
        let s = self.strides[axis];
        let fft = if inverse { &self.fft_inv } else { &self.fft_fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        if s == 1 {
            for chunk in data.chunks_exact_mut(nfft) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
        } else {
            let block = s * nfft;
            let nblocks = self.points / block;
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for b in 0..nblocks {
                for inner in 0..s {
                    let base = b * block + inner;
                    for k in 0..nfft {
                        buf[k] = data[base + k * s];
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    for k in 0..nfft {
                        data[base + k * s] = buf[k];
                    }
                }
            }
        }
    }

    /// Multiply spectral data by the dealiased ∂_{z_j} or ∂_{z̄_j} symbol.
    pub fn apply_deriv_symbol(&self, spec: &mut [Complex64], dir: DerivDirection) {
        let tab = self.symbol_table(dir);
        let ix_tab = &self.axis_index[2 * dir.axis()];
        let iy_tab = &self.axis_index[2 * dir.axis() + 1];
        let grid = self.grid;
        for (g, v) in spec.iter_mut().enumerate() {
            let t = tab[ix_tab[g] as usize * grid + iy_tab[g] as usize];
            *v *= t * self.mask[g];
        }
    }

    /// dst = symbol·mask·src in a single pass (out-of-place fast path).
    pub fn deriv_symbol_into(&self, src: &[Complex64], dst: &mut [Complex64], dir: DerivDirection) {
        let tab = self.symbol_table(dir);
        let ix_tab = &self.axis_index[2 * dir.axis()];
        let iy_tab = &self.axis_index[2 * dir.axis() + 1];
        let grid = self.grid;
        for (g, o) in dst.iter_mut().enumerate() {
            let t = tab[ix_tab[g] as usize * grid + iy_tab[g] as usize];
            *o = src[g] * t * self.mask[g];
        }
    }

    fn symbol_table(&self, dir: DerivDirection) -> Vec<Complex64> {
        debug_assert!(dir.axis() < self.n);
        let grid = self.grid;
        let mut tab = vec![Complex64::new(0.0, 0.0); grid * grid];
        for ix in 0..grid {
            for iy in 0..grid {
                tab[ix * grid + iy] = match dir {
                    DerivDirection::Holomorphic(_) => self.dz_symbol(ix, iy),
                    DerivDirection::AntiHolomorphic(_) => self.dzbar_symbol(ix, iy),
                };
            }
        }
        tab
    }

    /// Zero all modes outside the 2/3 band (explicit dealias of a spectral field).
    pub fn apply_dealias(&self, spec: &mut [Complex64]) {
        for (g, v) in spec.iter_mut().enumerate() {
            *v *= self.mask[g];
        }
    }
}

/// Signed frequency for index `idx` on an N-point axis: 0..N/2-1 map to
/// themselves, N/2..N-1 map to idx-N.
pub fn signed_freq(idx: usize, grid: usize) -> i64 {
    if idx < grid / 2 {
        idx as i64
    } else {
        idx as i64 - grid as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusChart::new(0, 8).is_err());
        assert!(TorusChart::new(1, 7).is_err());
        assert!(TorusChart::new(1, 0).is_err());
        assert!(TorusChart::new(2, 2).is_ok());
    }

    #[test]
    fn grid_size_is_n_to_2n() {
        let chart = TorusChart::new(2, 6).unwrap();
        assert_eq!(chart.points(), 6usize.pow(4));
    }

    #[test]
    fn dz_symbol_combination() {
        // ∂_z symbol = (∂_x symbol − i ∂_y symbol)/2, ∂_z̄ = (∂_x + i ∂_y)/2.
        let chart = TorusChart::new(1, 12).unwrap();
        for ix in 0..12 {
            for iy in 0..12 {
                let sx = chart.axis_symbol(ix);
                let sy = chart.axis_symbol(iy);
                let dz = chart.dz_symbol(ix, iy);
                let dzb = chart.dzbar_symbol(ix, iy);
                assert_eq!(dz, (sx - Complex64::i() * sy) * 0.5);
                assert_eq!(dzb, (sx + Complex64::i() * sy) * 0.5);
            }
        }
        // Zero frequency: exactly zero.
        assert_eq!(chart.dz_symbol(0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(chart.dzbar_symbol(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fft_round_trip() {
        let chart = TorusChart::new(2, 4).unwrap();
        let mut rng = crate::prng::SplitMix64::new(1);
        let orig: Vec<Complex64> = (0..chart.points())
            .map(|_| Complex64::new(rng.next_signed(), rng.next_signed()))
            .collect();
        let mut data = orig.clone();
        chart.forward(&mut data);
        chart.inverse(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn conjugate_symbol_relation() {
        // conj(τ(κ)) = −σ(κ) and σ(−κ) = −σ(κ), so conj∘∂_z = ∂_z̄∘conj at symbol level.
        let chart = TorusChart::new(2, 8).unwrap();
        let kappa = [1i64, -2, 0, 3];
        for j in 0..2 {
            let s = chart.sigma(j, &kappa);
            let t = chart.tau(j, &kappa);
            assert!((t.conj() + s).norm() < 1e-15);
            let neg: Vec<i64> = kappa.iter().map(|k| -k).collect();
            assert!((chart.sigma(j, &neg) + s).norm() < 1e-15);
        }
    }
}
