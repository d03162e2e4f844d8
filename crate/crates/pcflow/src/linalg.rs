//! Small dense Hermitian matrix kernels used pointwise on the grid.
//! Matrices are row-major `n`×`n` slices of Complex64 with n tiny (1..=3 in
//! practice), so everything is closed-form where possible.

use num_complex::Complex64;

/// Invert a (Hermitian, positive) matrix into `out`. Returns false if the
/// pivot collapses.
pub fn invert(a: &[Complex64], n: usize, out: &mut [Complex64]) -> bool {
    match n {
        1 => {
            let d = a[0];
            if d.norm() == 0.0 {
                return false;
            }
            out[0] = Complex64::new(1.0, 0.0) / d;
            true
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if det.norm() == 0.0 {
                return false;
            }
            let inv_det = Complex64::new(1.0, 0.0) / det;
            out[0] = a[3] * inv_det;
            out[1] = -a[1] * inv_det;
            out[2] = -a[2] * inv_det;
            out[3] = a[0] * inv_det;
            true
        }
        3 => {
            let c00 = a[4] * a[8] - a[5] * a[7];
            let c01 = a[5] * a[6] - a[3] * a[8];
            let c02 = a[3] * a[7] - a[4] * a[6];
            let det = a[0] * c00 + a[1] * c01 + a[2] * c02;
            if det.norm() == 0.0 {
                return false;
            }
            let inv_det = Complex64::new(1.0, 0.0) / det;
            out[0] = c00 * inv_det;
            out[1] = (a[2] * a[7] - a[1] * a[8]) * inv_det;
            out[2] = (a[1] * a[5] - a[2] * a[4]) * inv_det;
            out[3] = c01 * inv_det;
            out[4] = (a[0] * a[8] - a[2] * a[6]) * inv_det;
            out[5] = (a[2] * a[3] - a[0] * a[5]) * inv_det;
            out[6] = c02 * inv_det;
            out[7] = (a[1] * a[6] - a[0] * a[7]) * inv_det;
            out[8] = (a[0] * a[4] - a[1] * a[3]) * inv_det;
            true
        }
        _ => invert_gauss(a, n, out),
    }
}

fn invert_gauss(a: &[Complex64], n: usize, out: &mut [Complex64]) -> bool {
    let mut m = a.to_vec();
    for (i, v) in out.iter_mut().enumerate() {
        *v = if i / n == i % n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].norm() > m[piv * n + col].norm() {
                piv = r;
            }
        }
        if m[piv * n + col].norm() == 0.0 {
            return false;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
                out.swap(col * n + c, piv * n + c);
            }
        }
        let d = m[col * n + col];
        for c in 0..n {
            m[col * n + c] /= d;
            out[col * n + c] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f.norm() == 0.0 {
                continue;
            }
            for c in 0..n {
                let mv = m[col * n + c];
                let ov = out[col * n + c];
                m[r * n + c] -= f * mv;
                out[r * n + c] -= f * ov;
            }
        }
    }
    true
}

/// Determinant of a small matrix (Hermitian usage: real up to round-off).
pub fn det(a: &[Complex64], n: usize) -> Complex64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {
            // LU without pivoting refinement is fine for the validated metrics
            // this is used on.
            let mut m = a.to_vec();
            let mut d = Complex64::new(1.0, 0.0);
            for col in 0..n {
                let mut piv = col;
                for r in col + 1..n {
                    if m[r * n + col].norm() > m[piv * n + col].norm() {
                        piv = r;
                    }
                }
                if m[piv * n + col].norm() == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                if piv != col {
                    for c in 0..n {
                        m.swap(col * n + c, piv * n + c);
                    }
                    d = -d;
                }
                d *= m[col * n + col];
                for r in col + 1..n {
                    let f = m[r * n + col] / m[col * n + col];
                    for c in col..n {
                        let v = m[col * n + c];
                        m[r * n + c] -= f * v;
                    }
                }
            }
            d
        }
    }
}

/// Eigenvalue range (min, max) of a Hermitian matrix.
pub fn eig_range(a: &[Complex64], n: usize) -> (f64, f64) {
    match n {
        1 => (a[0].re, a[0].re),
        2 => {
            let tr = a[0].re + a[3].re;
            let off = a[1].norm_sqr();
            let disc = ((a[0].re - a[3].re).powi(2) + 4.0 * off).max(0.0).sqrt();
            ((tr - disc) * 0.5, (tr + disc) * 0.5)
        }
        3 => eig3(a),
        _ => jacobi_range(a, n),
    }
}

/// Trigonometric closed form for Hermitian 3x3 eigenvalues.
fn eig3(a: &[Complex64]) -> (f64, f64) {
    let p1 = a[1].norm_sqr() + a[2].norm_sqr() + a[5].norm_sqr();
    let tr = a[0].re + a[4].re + a[8].re;
    if p1 == 0.0 {
        let d = [a[0].re, a[4].re, a[8].re];
        return (
            d.iter().cloned().fold(f64::INFINITY, f64::min),
            d.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
    }
    let q = tr / 3.0;
    let p2 = (a[0].re - q).powi(2) + (a[4].re - q).powi(2) + (a[8].re - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [Complex64::new(0.0, 0.0); 9];
    for i in 0..9 {
        b[i] = a[i] / p;
    }
    for i in 0..3 {
        b[i * 3 + i] -= q / p;
    }
    let r = (det(&b, 3).re / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    (e3.min(e2).min(e1), e1.max(e2).max(e3))
}

/// Cyclic Jacobi sweeps; only used above n = 3.
fn jacobi_range(a: &[Complex64], n: usize) -> (f64, f64) {
    let mut m = a.to_vec();
    for _sweep in 0..50 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[p * n + q].norm_sqr();
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let phase = apq / apq.norm();
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // columns
                for r in 0..n {
                    let mrp = m[r * n + p];
                    let mrq = m[r * n + q];
                    m[r * n + p] = mrp * c - mrq * phase.conj() * s;
                    m[r * n + q] = mrp * phase * s + mrq * c;
                }
                // rows
                for r in 0..n {
                    let mpr = m[p * n + r];
                    let mqr = m[q * n + r];
                    m[p * n + r] = mpr * c - mqr * phase * s;
                    m[q * n + r] = mpr * phase.conj() * s + mqr * c;
                }
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        lo = lo.min(m[i * n + i].re);
        hi = hi.max(m[i * n + i].re);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn invert_2x2_hermitian() {
        let a = [c(2.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(1.5, 0.0)];
        let mut inv = [c(0.0, 0.0); 4];
        assert!(invert(&a, 2, &mut inv));
        // a * inv = I
        for i in 0..2 {
            for j in 0..2 {
                let mut s = c(0.0, 0.0);
                for k in 0..2 {
                    s += a[i * 2 + k] * inv[k * 2 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - c(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn eig2_matches_trace_det() {
        let a = [c(2.0, 0.0), c(0.5, 0.25), c(0.5, -0.25), c(1.0, 0.0)];
        let (lo, hi) = eig_range(&a, 2);
        assert!((lo + hi - 3.0).abs() < 1e-12);
        let detv = det(&a, 2).re;
        assert!((lo * hi - detv).abs() < 1e-12);
        assert!(lo < hi);
    }

    #[test]
    fn eig3_and_jacobi_agree() {
        let a = [
            c(3.0, 0.0),
            c(0.2, 0.4),
            c(-0.1, 0.3),
            c(0.2, -0.4),
            c(2.0, 0.0),
            c(0.5, -0.2),
            c(-0.1, -0.3),
            c(0.5, 0.2),
            c(1.0, 0.0),
        ];
        let (lo1, hi1) = eig3(&a);
        let (lo2, hi2) = jacobi_range(&a, 3);
        assert!((lo1 - lo2).abs() < 1e-10, "{lo1} vs {lo2}");
        assert!((hi1 - hi2).abs() < 1e-10, "{hi1} vs {hi2}");
    }
}
