//! Spectral application of homogeneous operators on periodic grids; exact
//! for trigonometric polynomials below the Nyquist mode.

use crate::error::MzError;
use crate::field::grid::{Boundary, Grid, GridField};
use crate::field::operator::HomogeneousOperator;
use crate::Result;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// In-place multidimensional FFT, one axis at a time.
fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let d = shape.len();
    let mut strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    for axis in 0..d {
        let n = shape[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride = strides[axis];
        let lines = total / n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        for line in 0..lines {
            // Base offset of this line: distribute `line` over all axes
            // except `axis`.
            let mut rem = line;
            let mut base = 0usize;
            for a in (0..d).rev() {
                if a == axis {
                    continue;
                }
                let idx = rem % shape[a];
                rem /= shape[a];
                base += idx * strides[a];
            }
            for i in 0..n {
                scratch[i] = data[base + i * stride];
            }
            fft.process(&mut scratch);
            for i in 0..n {
                data[base + i * stride] = scratch[i];
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Signed integer frequency of a node index on an axis of length `n`.
fn freq(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// `(i kappa)^alpha` over all axes, with odd powers zeroed at the Nyquist
/// mode (even `n`, `idx = n/2`).
fn symbol_factor(idx: &[usize], grid: &Grid, alpha: &[usize]) -> Complex64 {
    let mut f = Complex64::new(1.0, 0.0);
    for a in 0..grid.dim {
        let e = alpha[a];
        if e == 0 {
            continue;
        }
        let n = grid.shape[a];
        let len = grid.spacing * n as f64;
        if n % 2 == 0 && idx[a] == n / 2 && e % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        let kappa = 2.0 * PI * freq(idx[a], n) as f64 / len;
        let ik = Complex64::new(0.0, kappa);
        for _ in 0..e {
            f *= ik;
        }
    }
    f
}

/// Apply the operator spectrally while the caller streams input components
/// one at a time through `fill(component, buffer)`.
pub fn apply_operator_spectral_streaming<F>(
    op: &HomogeneousOperator,
    grid: &Grid,
    mut fill: F,
) -> Result<GridField>
where
    F: FnMut(usize, &mut [f64]),
{
    op.validate()?;
    grid.validate()?;
    if grid.boundary != Boundary::Periodic {
        return Err(MzError::Argument("spectral application needs a periodic grid".into()));
    }
    if op.dim() != grid.dim {
        return Err(MzError::GridMismatch("operator/grid dimension mismatch".into()));
    }
    let nodes = grid.node_count();
    let k = op.out_components;
    let mut out_spectra: Vec<Vec<Complex64>> = (0..k)
        .map(|_| vec![Complex64::new(0.0, 0.0); nodes])
        .collect();
    let mut real_buf = vec![0.0f64; nodes];
    let mut spec = vec![Complex64::new(0.0, 0.0); nodes];
    let mut idx = vec![0usize; grid.dim];

    for c in 0..op.in_components {
        fill(c, &mut real_buf);
        for (s, &v) in spec.iter_mut().zip(real_buf.iter()) {
            *s = Complex64::new(v, 0.0);
        }
        fft_nd(&mut spec, &grid.shape, false);
        for term in &op.terms {
            let mut rows: Vec<(usize, f64)> = Vec::new();
            for r in 0..k {
                let coeff = term.coeff[r * op.in_components + c];
                if coeff != 0.0 {
                    rows.push((r, coeff));
                }
            }
            if rows.is_empty() {
                continue;
            }
            for n in 0..nodes {
                grid.fill_multi(n, &mut idx);
                let factor = symbol_factor(&idx, grid, &term.alpha);
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                let v = spec[n] * factor;
                for &(r, coeff) in &rows {
                    out_spectra[r][n] += coeff * v;
                }
            }
        }
    }

    let mut out = GridField::zeros(grid.clone(), k);
    for (r, spectrum) in out_spectra.iter_mut().enumerate() {
        fft_nd(spectrum, &grid.shape, true);
        for n in 0..nodes {
            out.data[n * k + r] = spectrum[n].re;
        }
    }
    Ok(out)
}

/// Apply the operator spectrally to a stored field.
pub fn apply_operator_spectral(op: &HomogeneousOperator, u: &GridField) -> Result<GridField> {
    u.validate()?;
    if u.components != op.in_components {
        return Err(MzError::ComponentMismatch { expected: op.in_components, got: u.components });
    }
    let grid = u.grid.clone();
    let m = u.components;
    apply_operator_spectral_streaming(op, &grid, |c, buf| {
        for n in 0..buf.len() {
            buf[n] = u.data[n * m + c];
        }
    })
}
