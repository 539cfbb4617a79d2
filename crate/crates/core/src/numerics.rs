//! Quadrature, ODE integration, root finding and null-space helpers.

use crate::error::{Error, Result};
use crate::poly::C64;
use nalgebra::DMatrix;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7,15) on a finite interval: the interval with the largest
/// error estimate is bisected until the summed estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite value".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature(format!("interval [{lo:.3e},{hi:.3e}] cannot be split, error {err:.3e}")));
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    let err: f64 = parts.iter().map(|p| p.3).sum();
    Err(Error::Quadrature(format!("subdivision limit reached, error estimate {err:.3e}")))
}

/// Trapezoid rule on `[lo, hi]` with step halving until two successive values agree to `rel_tol`.
/// Intended for analytic integrands that decay at both ends after an exponential substitution.
pub fn trapezoid_line<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let mut n = 64usize;
    let mut h = (hi - lo) / n as f64;
    let mut sum = 0.5 * (g(lo) + g(hi)) + (1..n).map(|i| g(lo + i as f64 * h)).sum::<f64>();
    let mut prev = sum * h;
    for _ in 0..11 {
        let mid: f64 = (0..n).map(|i| g(lo + (i as f64 + 0.5) * h)).sum();
        sum += mid;
        n *= 2;
        h *= 0.5;
        let cur = sum * h;
        if (cur - prev).abs() <= rel_tol * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!("trapezoid on [{lo},{hi}] not converged, last {prev:e}")))
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Convergence(format!("no sign change on [{a},{b}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() < tol {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-14, max_steps: 5_000_000 }
    }
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) with adaptive steps. Returns the state at every entry of `times`
/// (the first entry is the initial time).
pub fn dopri5<F>(mut f: F, y0: &[f64], times: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = times[0];
    let mut out = vec![y.clone()];
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut h = 1e-3_f64.min((times.last().unwrap() - t).abs().max(1e-12));
    let mut steps = 0usize;
    f(t, &y, &mut k[0]);
    for &target in &times[1..] {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Convergence(format!("ODE step budget exhausted at t={t}")));
            }
            let hh = h.min(target - t);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc += hh * DP_A[s][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                let (_, tail) = k.split_at_mut(s);
                f(t + DP_C[s] * hh, &tmp, &mut tail[0]);
            }
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += DP_E[s] * k[s][i];
                }
                e *= hh;
                let sc = opts.atol + opts.rtol * y[i].abs().max(tmp[i].abs());
                err += (e / sc).powi(2);
            }
            err = (err / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Convergence(format!("non-finite ODE state at t={t}")));
            }
            if err <= 1.0 {
                t += hh;
                y.copy_from_slice(&tmp);
                let last = k[6].clone();
                k[0] = last;
                if hh < h && t >= target {
                    // Clamped step: keep the previous proposal.
                } else {
                    h = hh * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                }
            } else {
                h = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Convergence(format!("ODE step underflow at t={t}")));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Orthonormal basis of the (numerical) null space of `a`, columns of the result.
/// Singular values below `rel * max(max_singular, scale)` count as zero; `scale` keeps an
/// all-roundoff matrix from being judged against its own noise.
pub fn null_space(a: &DMatrix<C64>, rel: f64, scale: f64) -> DMatrix<C64> {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::<C64>::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(scale, f64::max).max(f64::MIN_POSITIVE);
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= rel * smax)
        .collect();
    let mut out = DMatrix::<C64>::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        for j in 0..n {
            out[(j, c)] = vt[(i, j)].conj();
        }
    }
    out
}

/// Spectral data of a Hermitian matrix: ascending eigenvalues and matching eigenvector columns.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = a.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<C64>::zeros(a.nrows(), a.ncols());
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Unitary `exp(-i t H)` for Hermitian `H`.
pub fn unitary_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(h);
    let n = vals.len();
    let mut d = DMatrix::<C64>::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        d[(i, i)] = C64::from_polar(1.0, -l * t);
    }
    &vecs * d * vecs.adjoint()
}

pub fn max_abs(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_sqrt() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-14, 1e-14).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn trapezoid_gaussian() {
        let v = trapezoid_line(|x| (-x * x).exp(), -12.0, 12.0, 1e-14).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn dopri_harmonic_oscillator() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let out = dopri5(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[1.0, 0.0],
            &times,
            OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - t.cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let ns = null_space(&a, 1e-12, 0.0);
        assert_eq!(ns.ncols(), 1);
        assert!((ns[(0, 0)] + ns[(1, 0)]).norm() < 1e-12);
    }
}
