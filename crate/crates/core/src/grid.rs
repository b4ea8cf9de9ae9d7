//! Uniform 3-D grids and complex fields sampled on them.
//!
//! Points are stored with x fastest, then y, then z. All spatial integrals use
//! the midpoint rule (`Σ f · dV`).

use crate::error::{Error, Result};
use crate::scalar::{czero, pairwise_sum, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3D<T> {
    pub dims: [usize; 3],
    pub spacing: [T; 3],
    pub origin: [T; 3],
}

impl<T: Real> Grid3D<T> {
    pub fn new(dims: [usize; 3], spacing: [T; 3], origin: [T; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::GridMismatch(format!("grid dims must be ≥ 1, got {dims:?}")));
        }
        if spacing.iter().any(|&d| !(d > T::zero()) || !d.is_finite()) {
            return Err(Error::GridMismatch(format!(
                "grid spacing must be positive, got {:?}",
                spacing.map(|d| d.as_f64())
            )));
        }
        Ok(Grid3D {
            dims,
            spacing,
            origin,
        })
    }

    /// Grid of `n³` points with spacing `h`, centred on the origin.
    pub fn centered(n: usize, h: T) -> Result<Self> {
        let half = T::nu(n - 1) * h / T::lit(2.0);
        Self::new([n; 3], [h; 3], [-half; 3])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cell_volume(&self) -> T {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Volume of the periodic box.
    pub fn box_volume(&self) -> T {
        self.cell_volume() * T::nu(self.len())
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.dims[0];
        let iy = (idx / self.dims[0]) % self.dims[1];
        let iz = idx / (self.dims[0] * self.dims[1]);
        [ix, iy, iz]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [T; 3] {
        let i = self.unravel(idx);
        [
            self.origin[0] + T::nu(i[0]) * self.spacing[0],
            self.origin[1] + T::nu(i[1]) * self.spacing[1],
            self.origin[2] + T::nu(i[2]) * self.spacing[2],
        ]
    }

    pub fn points(&self) -> impl Iterator<Item = [T; 3]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Index of the neighbour `shift` steps along `axis`, with periodic wrap.
    #[inline]
    pub fn neighbour(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let mut i = self.unravel(idx);
        let n = self.dims[axis];
        i[axis] = if forward { (i[axis] + 1) % n } else { (i[axis] + n - 1) % n };
        self.index(i[0], i[1], i[2])
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self == other
    }

    pub fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: grids differ")))
        }
    }
}

/// Complex scalar field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldG<T> {
    pub grid: Grid3D<T>,
    pub values: Vec<Cplx<T>>,
}

impl<T: Real> ScalarFieldG<T> {
    pub fn zeros(grid: Grid3D<T>) -> Self {
        ScalarFieldG {
            values: vec![czero(); grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid3D<T>, values: Vec<Cplx<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "scalar field has {} values for {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarFieldG { grid, values })
    }

    pub fn from_fn(grid: Grid3D<T>, f: impl Fn([T; 3]) -> Cplx<T>) -> Self {
        let values = grid.points().map(f).collect();
        ScalarFieldG { grid, values }
    }

    /// Midpoint-rule integral `Σ f dV`.
    pub fn integral(&self) -> Cplx<T> {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn conj(&self) -> Self {
        ScalarFieldG {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        ScalarFieldG {
            grid: self.grid,
            values: self.values.iter().map(|v| *v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn l2(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }
}

/// Complex 3-vector field, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldG<T> {
    pub grid: Grid3D<T>,
    pub comps: [Vec<Cplx<T>>; 3],
}

impl<T: Real> VectorFieldG<T> {
    pub fn zeros(grid: Grid3D<T>) -> Self {
        let n = grid.len();
        VectorFieldG {
            grid,
            comps: [vec![czero(); n], vec![czero(); n], vec![czero(); n]],
        }
    }

    pub fn from_comps(grid: Grid3D<T>, comps: [Vec<Cplx<T>>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch(
                "vector field component length differs from point count".into(),
            ));
        }
        Ok(VectorFieldG { grid, comps })
    }

    pub fn from_fn(grid: Grid3D<T>, f: impl Fn([T; 3]) -> [Cplx<T>; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.point(idx));
            for k in 0..3 {
                out.comps[k][idx] = v[k];
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [Cplx<T>; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    pub fn integral(&self) -> [Cplx<T>; 3] {
        let dv = self.grid.cell_volume();
        [0, 1, 2].map(|k| pairwise_sum(&self.comps[k]) * dv)
    }

    pub fn conj(&self) -> Self {
        VectorFieldG {
            grid: self.grid,
            comps: [0, 1, 2].map(|k| self.comps[k].iter().map(|v| v.conj()).collect()),
        }
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        VectorFieldG {
            grid: self.grid,
            comps: [0, 1, 2].map(|k| self.comps[k].iter().map(|v| *v * s).collect()),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        VectorFieldG {
            grid: self.grid,
            comps: [0, 1, 2].map(|k| {
                self.comps[k]
                    .iter()
                    .zip(&other.comps[k])
                    .map(|(a, b)| *a + *b)
                    .collect()
            }),
        }
    }

    pub fn max_abs(&self) -> T {
        (0..self.grid.len()).fold(T::zero(), |m, i| {
            let v = self.at(i);
            m.max((v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt())
        })
    }

    pub fn l2(&self) -> T {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// Pointwise dot product with another (complex) vector field, no conjugation.
    pub fn dot(&self, other: &Self) -> ScalarFieldG<T> {
        let values = (0..self.grid.len())
            .map(|i| {
                self.comps[0][i] * other.comps[0][i]
                    + self.comps[1][i] * other.comps[1][i]
                    + self.comps[2][i] * other.comps[2][i]
            })
            .collect();
        ScalarFieldG {
            grid: self.grid,
            values,
        }
    }

    /// Discrete divergence: forward differences with periodic wrap.
    pub fn divergence(&self) -> ScalarFieldG<T> {
        let g = &self.grid;
        let mut out = ScalarFieldG::zeros(*g);
        for idx in 0..g.len() {
            let mut acc = czero();
            for axis in 0..3 {
                let fwd = g.neighbour(idx, axis, true);
                acc = acc + (self.comps[axis][fwd] - self.comps[axis][idx]) / g.spacing[axis];
            }
            out.values[idx] = acc;
        }
        out
    }
}

/// Discrete gradient: backward differences with periodic wrap. Paired with
/// [`VectorFieldG::divergence`] it yields the 7-point Laplacian.
pub fn gradient<T: Real>(f: &ScalarFieldG<T>) -> VectorFieldG<T> {
    let g = &f.grid;
    let mut out = VectorFieldG::zeros(*g);
    for idx in 0..g.len() {
        for axis in 0..3 {
            let bwd = g.neighbour(idx, axis, false);
            out.comps[axis][idx] = (f.values[idx] - f.values[bwd]) / g.spacing[axis];
        }
    }
    out
}
