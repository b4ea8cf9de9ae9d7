//! FFT-based periodic Poisson solver.
//!
//! The Fourier symbol used here is that of the discrete Laplacian formed by
//! [`gradient`](crate::grid::gradient) followed by
//! [`VectorFieldG::divergence`](crate::grid::VectorFieldG::divergence):
//! `−Σ_axis 4 sin²(π m / n) / h²`, which vanishes only at `k = 0`.

use rustfft::{FftDirection, FftPlanner};

use crate::grid::{Grid3D, ScalarFieldG};
use crate::scalar::{czero, Cplx, Real};

fn fft_axis<T: Real>(
    planner: &mut FftPlanner<T>,
    grid: &Grid3D<T>,
    data: &mut [Cplx<T>],
    axis: usize,
    dir: FftDirection,
) {
    let n = grid.dims[axis];
    if n == 1 {
        return;
    }
    let fft = planner.plan_fft(n, dir);
    let mut line = vec![czero::<T>(); n];
    let [nx, ny, nz] = grid.dims;
    let (outer_a, outer_b) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    for b in 0..outer_b {
        for a in 0..outer_a {
            let idx = |i: usize| match axis {
                0 => grid.index(i, a, b),
                1 => grid.index(a, i, b),
                _ => grid.index(a, b, i),
            };
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[idx(i)];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[idx(i)] = *v;
            }
        }
    }
}

/// In-place 3-D DFT (unnormalised forward, `1/N`-normalised inverse).
pub fn fft3<T: Real>(grid: &Grid3D<T>, data: &mut [Cplx<T>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let dir = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    for axis in 0..3 {
        fft_axis(&mut planner, grid, data, axis, dir);
    }
    if inverse {
        let scale = T::one() / T::nu(grid.len());
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }
}

/// Symbol of the discrete Laplacian for Fourier index `m` on each axis.
pub fn laplacian_symbol<T: Real>(grid: &Grid3D<T>, idx: usize) -> T {
    let m = grid.unravel(idx);
    let mut s = T::zero();
    for axis in 0..3 {
        let n = T::nu(grid.dims[axis]);
        let h = grid.spacing[axis];
        let arg = T::PI() * T::nu(m[axis]) / n;
        let sn = arg.sin();
        s = s - T::lit(4.0) * sn * sn / (h * h);
    }
    s
}

/// Solves `∇²χ = f` under periodic boundary conditions. The mean (k = 0)
/// component of `f` is discarded and `χ` is returned with zero mean.
pub fn solve_poisson<T: Real>(f: &ScalarFieldG<T>) -> ScalarFieldG<T> {
    let grid = f.grid;
    let mut data = f.values.clone();
    fft3(&grid, &mut data, false);
    for (idx, v) in data.iter_mut().enumerate() {
        let sym = laplacian_symbol(&grid, idx);
        *v = if idx == 0 || sym == T::zero() {
            czero()
        } else {
            *v / sym
        };
    }
    fft3(&grid, &mut data, true);
    ScalarFieldG { grid, values: data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gradient;
    use crate::scalar::cplx;

    #[test]
    fn fft_roundtrip() {
        let g = Grid3D::new([4, 3, 5], [1.0, 0.5, 2.0], [0.0; 3]).unwrap();
        let orig: Vec<Cplx<f64>> = (0..g.len())
            .map(|i| cplx((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut d = orig.clone();
        fft3(&g, &mut d, false);
        fft3(&g, &mut d, true);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn poisson_inverts_discrete_laplacian() {
        let g = Grid3D::<f64>::centered(8, 0.5).unwrap();
        let mut f = ScalarFieldG::from_fn(g, |[x, y, z]| {
            cplx(x * (-(x * x + y * y + z * z)).exp(), 0.2 * y)
        });
        let mean = f.values.iter().sum::<Cplx<f64>>() / g.len() as f64;
        f.values.iter_mut().for_each(|v| *v -= mean);
        let chi = solve_poisson(&f);
        let lap = gradient(&chi).divergence();
        let err = lap
            .values
            .iter()
            .zip(&f.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * f.max_abs(), "residual {err}");
    }
}
