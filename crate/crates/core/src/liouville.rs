//! Reduction of spatial integrals to `N × N` coupling matrices and nested
//! commutator expectation values with dephasing.
//!
//! Time-ordered integrals are evaluated in the Schrödinger frame. For a
//! coherence `(α, β)` the free evolution over one step is the factor
//! `exp(−(iω_{αβ} + η_{αβ}) dt)`, so iterated integrals become a sequence of
//! dressed cumulative trapezoids, innermost interaction first.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{AinvSeries, TimeGrid};
use crate::grid::{ScalarFieldG, VectorFieldG};
use crate::matrix::CMat;
use crate::model::MolecularModel;
use crate::scalar::{cplx, czero, pairwise_sum, Cplx, Real};

/// `M_{αβ} = ∫ F(r)·j_{αβ}(r) dr`.
pub fn project_current<T: Real>(model: &MolecularModel<T>, f: &VectorFieldG<T>) -> Result<CMat<T>> {
    model.grid.ensure_same(&f.grid, "project_current")?;
    let n = model.n_states();
    let dv = model.grid.cell_volume();
    let mut buf = vec![czero::<T>(); model.grid.len()];
    Ok(CMat::from_fn(n, |a, b| {
        let j = model.current(a, b);
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = f.comps[0][i] * j.comps[0][i] + f.comps[1][i] * j.comps[1][i] + f.comps[2][i] * j.comps[2][i];
        }
        pairwise_sum(&buf) * dv
    }))
}

/// `M_{αβ} = ∫ F(r) σ_{αβ}(r) dr`.
pub fn project_charge<T: Real>(model: &MolecularModel<T>, f: &ScalarFieldG<T>) -> Result<CMat<T>> {
    model.grid.ensure_same(&f.grid, "project_charge")?;
    let n = model.n_states();
    let dv = model.grid.cell_volume();
    let mut buf = vec![czero::<T>(); model.grid.len()];
    Ok(CMat::from_fn(n, |a, b| {
        let s = model.sigma(a, b);
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = f.values[i] * s.values[i];
        }
        pairwise_sum(&buf) * dv
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingLabel {
    /// `∫ A·ĵ`
    JA,
    /// `∫ A² σ̂`
    SigmaA2,
    /// `∫ A₀ σ̂`
    SigmaA0,
    SigmaPlain,
}

/// Schrödinger-picture coupling matrices on a time grid.
#[derive(Debug, Clone)]
pub struct ProjectedCoupling<T> {
    pub label: CouplingLabel,
    pub time_grid: TimeGrid<T>,
    pub matrices: Vec<CMat<T>>,
}

/// Projections of the separable `A^inv` terms onto the model, computed once.
#[derive(Debug, Clone)]
pub struct TermProjections<T> {
    pub n: usize,
    /// `∫ S_m·j`
    pub current: Vec<CMat<T>>,
    /// `∫ (S_m·S_m') σ`, indexed `[m][m']`.
    pub charge: Vec<Vec<CMat<T>>>,
}

impl<T: Real> TermProjections<T> {
    pub fn new(model: &MolecularModel<T>, ainv: &AinvSeries<T>) -> Result<Self> {
        let current = ainv
            .spatial
            .iter()
            .map(|s| project_current(model, s))
            .collect::<Result<Vec<_>>>()?;
        let nt = ainv.spatial.len();
        let mut charge: Vec<Vec<CMat<T>>> = vec![Vec::with_capacity(nt); nt];
        for m in 0..nt {
            for mp in 0..nt {
                if mp < m {
                    let c = charge[mp][m].clone();
                    charge[m].push(c);
                } else {
                    let prod = ainv.spatial[m].dot(&ainv.spatial[mp]);
                    charge[m].push(project_charge(model, &prod)?);
                }
            }
        }
        Ok(TermProjections {
            n: model.n_states(),
            current,
            charge,
        })
    }

    /// `V(t_k) = ∫ A^inv(t_k)·ĵ`.
    pub fn coupling_ja(&self, ainv: &AinvSeries<T>) -> ProjectedCoupling<T> {
        let n = self.n;
        let matrices = (0..ainv.time_grid.n_t)
            .map(|k| {
                let mut v = CMat::zeros(n);
                for (m, p) in self.current.iter().enumerate() {
                    v.axpy(cplx(ainv.integrals[m][k], T::zero()), p);
                }
                v
            })
            .collect();
        ProjectedCoupling {
            label: CouplingLabel::JA,
            time_grid: ainv.time_grid,
            matrices,
        }
    }

    /// `∫ |A^inv(t_k)|² σ̂`, without the `e/2m` prefactor.
    pub fn coupling_sigma_a2(&self, ainv: &AinvSeries<T>) -> ProjectedCoupling<T> {
        let n = self.n;
        let nt = self.current.len();
        let matrices = (0..ainv.time_grid.n_t)
            .map(|k| {
                let mut v = CMat::zeros(n);
                for m in 0..nt {
                    for mp in 0..nt {
                        let w = ainv.integrals[m][k] * ainv.integrals[mp][k];
                        v.axpy(cplx(w, T::zero()), &self.charge[m][mp]);
                    }
                }
                v
            })
            .collect();
        ProjectedCoupling {
            label: CouplingLabel::SigmaA2,
            time_grid: ainv.time_grid,
            matrices,
        }
    }
}

/// Which side(s) of a density matrix a superoperator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperoperatorSide {
    Left,
    Right,
    /// `(Left + Right)/2`
    Plus,
    /// `Left − Right`
    Minus,
}

impl SuperoperatorSide {
    /// Action on a density-like matrix.
    pub fn apply<T: Real>(self, v: &CMat<T>, x: &CMat<T>) -> CMat<T> {
        match self {
            SuperoperatorSide::Left => v * x,
            SuperoperatorSide::Right => x * v,
            SuperoperatorSide::Plus => (&(v * x) + &(x * v)).scale(cplx(T::lit(0.5), T::zero())),
            SuperoperatorSide::Minus => &(v * x) - &(x * v),
        }
    }

    /// Liouville-space matrix (`N² × N²`) acting on row-major `vec(X)`.
    pub fn matrix<T: Real>(self, v: &CMat<T>) -> CMat<T> {
        let n = v.n();
        let left = CMat::from_fn(n * n, |p, q| {
            let (a, b, c, d) = (p / n, p % n, q / n, q % n);
            if b == d {
                v[(a, c)]
            } else {
                czero()
            }
        });
        let right = CMat::from_fn(n * n, |p, q| {
            let (a, b, c, d) = (p / n, p % n, q / n, q % n);
            if a == c {
                v[(d, b)]
            } else {
                czero()
            }
        });
        match self {
            SuperoperatorSide::Left => left,
            SuperoperatorSide::Right => right,
            SuperoperatorSide::Plus => (&left + &right).scale(cplx(T::lit(0.5), T::zero())),
            SuperoperatorSide::Minus => &left - &right,
        }
    }
}

/// Per-coherence free-evolution data of a model.
#[derive(Debug, Clone)]
pub struct Dressing<T> {
    pub n: usize,
    pub omega: Vec<T>,
    pub eta: Vec<T>,
}

impl<T: Real> Dressing<T> {
    pub fn from_model(model: &MolecularModel<T>) -> Self {
        let n = model.n_states();
        let mut omega = Vec::with_capacity(n * n);
        let mut eta = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                omega.push(model.omega(a, b));
                eta.push(model.eta(a, b));
            }
        }
        Dressing { n, omega, eta }
    }

    /// `exp(−(iω_{αβ} + η_{αβ}) s)` as a matrix.
    pub fn propagator(&self, s: T) -> CMat<T> {
        let n = self.n;
        CMat::from_fn(n, |a, b| {
            let i = a * n + b;
            let z = cplx(-self.eta[i] * s, -self.omega[i] * s);
            z.exp()
        })
    }
}

/// `φ₁(x) = (eˣ − 1)/x` and `φ₂(x) = (eˣ − 1 − x)/x²`.
pub fn phi12<T: Real>(x: Cplx<T>) -> (Cplx<T>, Cplx<T>) {
    if x.norm() < T::lit(0.2) {
        // Taylor: φ₁ = Σ xᵏ/(k+1)!, φ₂ = Σ xᵏ/(k+2)!
        let mut p1 = czero();
        let mut p2 = czero();
        let mut term = cplx(T::one(), T::zero());
        for k in 0..18 {
            let f1 = T::one() / factorial::<T>(k + 1);
            let f2 = T::one() / factorial::<T>(k + 2);
            p1 = p1 + term * f1;
            p2 = p2 + term * f2;
            term = term * x;
        }
        (p1, p2)
    } else {
        let e = x.exp();
        let one = cplx(T::one(), T::zero());
        let p1 = (e - one) / x;
        (p1, (p1 - one) / x)
    }
}

fn factorial<T: Real>(k: usize) -> T {
    (1..=k).fold(T::one(), |a, j| a * T::nu(j))
}

/// One-step weights for `∫ G(t_k − τ)∘f(τ) dτ` over `[t_{k−1}, t_k]` with `f`
/// linear between samples: `G∘Y + W₀∘f_{k−1} + W₁∘f_k`.
#[derive(Debug, Clone)]
pub struct StepWeights<T> {
    pub g: CMat<T>,
    pub w0: CMat<T>,
    pub w1: CMat<T>,
}

impl<T: Real> Dressing<T> {
    pub fn step_weights(&self, dt: T) -> StepWeights<T> {
        let n = self.n;
        let mut g = CMat::zeros(n);
        let mut w0 = CMat::zeros(n);
        let mut w1 = CMat::zeros(n);
        let h = cplx(dt, T::zero());
        for a in 0..n {
            for b in 0..n {
                let i = a * n + b;
                let x = cplx(-self.eta[i] * dt, -self.omega[i] * dt);
                let (p1, p2) = phi12(x);
                g[(a, b)] = x.exp();
                w0[(a, b)] = h * (p1 - p2);
                w1[(a, b)] = h * p2;
            }
        }
        StepWeights { g, w0, w1 }
    }
}

/// `Y(t_k) = ∫_{t0}^{t_k} G(t_k − τ)∘f(τ) dτ` with `G(s) = exp(−(iω + η)s)`
/// element-wise. `f` is interpolated linearly between samples and the free
/// evolution is integrated exactly, which reduces to the trapezoidal rule
/// when `ω = η = 0`.
pub fn dressed_cumulative<T: Real>(d: &Dressing<T>, f: &[CMat<T>], dt: T) -> Vec<CMat<T>> {
    let w = d.step_weights(dt);
    let mut out = Vec::with_capacity(f.len());
    let mut y = CMat::zeros(d.n);
    for k in 0..f.len() {
        if k > 0 {
            let mut next = w.g.hadamard(&y);
            next = &next + &w.w0.hadamard(&f[k - 1]);
            next = &next + &w.w1.hadamard(&f[k]);
            y = next;
        }
        out.push(y.clone());
    }
    out
}

/// Scales element `(α, β)` at time `τ` by `exp(iω_{αβ}(τ − t_ref) − η_{αβ}|τ − t_ref|)`.
pub fn heisenberg_dress<T: Real>(
    model: &MolecularModel<T>,
    series: &[CMat<T>],
    time_grid: &TimeGrid<T>,
    t_ref: T,
) -> Vec<CMat<T>> {
    let d = Dressing::from_model(model);
    let n = d.n;
    series
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let s = time_grid.t(k) - t_ref;
            CMat::from_fn(n, |a, b| {
                let i = a * n + b;
                let z = cplx(-d.eta[i] * s.abs(), d.omega[i] * s);
                m[(a, b)] * z.exp()
            })
        })
        .collect()
}

/// `ρ_eq = Σ_α P(α)|α⟩⟨α|`.
pub fn equilibrium<T: Real>(model: &MolecularModel<T>) -> CMat<T> {
    CMat::diag(&model.populations.iter().map(|&p| cplx(p, T::zero())).collect::<Vec<_>>())
}

fn check_series<T: Real>(
    time_grid: &TimeGrid<T>,
    n: usize,
    o: &[CMat<T>],
    vs: &[&[CMat<T>]],
) -> Result<()> {
    if vs.is_empty() || vs.len() > 3 {
        return Err(Error::InvalidOrder(vs.len()));
    }
    let ok = |s: &[CMat<T>]| s.len() == time_grid.n_t && s.iter().all(|m| m.n() == n);
    if !ok(o) || !vs.iter().all(|v| ok(v)) {
        return Err(Error::GridMismatch("series length or matrix size differs from model/time grid".into()));
    }
    Ok(())
}

/// `C(t) = Tr(O(t) X_n(t))` where `X_0 = ρ_eq` and
/// `X_k(t) = ∫^t G(t−τ)∘[V_k(τ), X_{k−1}(τ)] dτ`, equivalently
/// `⟨[[…[O(t), V_n(τ_n)]…], V_1(τ_1)]⟩` over `t ≥ τ_n ≥ … ≥ τ_1`.
///
/// Hilbert-space form: the nested commutator is expanded into its `2ⁿ`
/// left/right multiplication branches, each integrated separately.
pub fn nested_commutator_expectation<T: Real>(
    model: &MolecularModel<T>,
    time_grid: &TimeGrid<T>,
    o: &[CMat<T>],
    vs: &[&[CMat<T>]],
) -> Result<Vec<Cplx<T>>> {
    let n = model.n_states();
    check_series(time_grid, n, o, vs)?;
    let d = Dressing::from_model(model);
    let rho = equilibrium(model);
    let order = vs.len();
    let branches: Vec<Vec<Cplx<T>>> = (0..1usize << order)
        .into_par_iter()
        .map(|mask| {
            let mut x: Vec<CMat<T>> = vec![rho.clone(); time_grid.n_t];
            let mut sign = T::one();
            for (k, v) in vs.iter().enumerate() {
                let right = mask & (1 << k) != 0;
                if right {
                    sign = -sign;
                }
                let f: Vec<CMat<T>> = v
                    .iter()
                    .zip(&x)
                    .map(|(vm, xm)| if right { xm * vm } else { vm * xm })
                    .collect();
                x = dressed_cumulative(&d, &f, time_grid.dt);
            }
            o.iter()
                .zip(&x)
                .map(|(om, xm)| om.trace_product(xm) * sign)
                .collect()
        })
        .collect();
    let mut out = vec![czero(); time_grid.n_t];
    for b in &branches {
        for (o, v) in out.iter_mut().zip(b) {
            *o = *o + *v;
        }
    }
    Ok(out)
}

/// Liouville-space form of [`nested_commutator_expectation`]: vectorised
/// density matrices propagated with `V⁻` superoperator matrices.
pub fn nested_commutator_expectation_liouville<T: Real>(
    model: &MolecularModel<T>,
    time_grid: &TimeGrid<T>,
    o: &[CMat<T>],
    vs: &[&[CMat<T>]],
) -> Result<Vec<Cplx<T>>> {
    let n = model.n_states();
    check_series(time_grid, n, o, vs)?;
    let nn = n * n;
    let d = Dressing::from_model(model);
    // Diagonal Liouville propagator and step weights.
    let dt = time_grid.dt;
    let mut g = Vec::with_capacity(nn);
    let mut w0 = Vec::with_capacity(nn);
    let mut w1 = Vec::with_capacity(nn);
    for i in 0..nn {
        let x = cplx(-d.eta[i] * dt, -d.omega[i] * dt);
        let (p1, p2) = phi12(x);
        g.push(x.exp());
        w0.push((p1 - p2) * dt);
        w1.push(p2 * dt);
    }
    let rho = equilibrium(model);
    let mut x: Vec<Vec<Cplx<T>>> = vec![rho.as_slice().to_vec(); time_grid.n_t];
    for v in vs {
        let f: Vec<Vec<Cplx<T>>> = v
            .iter()
            .zip(&x)
            .map(|(vm, xv)| {
                let l = SuperoperatorSide::Minus.matrix(vm);
                (0..nn)
                    .map(|p| (0..nn).fold(czero(), |acc, q| acc + l[(p, q)] * xv[q]))
                    .collect()
            })
            .collect();
        let mut y = vec![czero::<T>(); nn];
        let mut next = Vec::with_capacity(time_grid.n_t);
        for k in 0..time_grid.n_t {
            if k > 0 {
                for p in 0..nn {
                    y[p] = g[p] * y[p] + w0[p] * f[k - 1][p] + w1[p] * f[k][p];
                }
            }
            next.push(y.clone());
        }
        x = next;
    }
    // ⟨⟨O†|X⟩⟩ = Σ_{ab} O_{ba} X_{ab}
    Ok(o.iter()
        .zip(&x)
        .map(|(om, xv)| {
            let mut acc = czero();
            for a in 0..n {
                for b in 0..n {
                    acc = acc + om[(b, a)] * xv[a * n + b];
                }
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid3D;
    use crate::model::{build_model_from_charges, dipole_moments, gaussian_density, ChargeSet, PairMap};
    use crate::units::Units;

    fn two_level(w: f64, eta: f64, pops: [f64; 2]) -> MolecularModel<f64> {
        let grid = Grid3D::<f64>::centered(10, 0.6).unwrap();
        let s10 = ScalarFieldG::from_fn(grid, |[x, y, z]| cplx(0.3 * z * (-(x * x + y * y + z * z) / 2.0).exp(), 0.0));
        let s00 = gaussian_density(grid, [0.0; 3], 1.0, 1.0);
        build_model_from_charges(ChargeSet {
            energies: vec![0.0, w],
            populations: pops.to_vec(),
            dephasing: vec![0.0, eta, eta, 0.0],
            electron_count: 1,
            units: Units::default(),
            sigma: PairMap::from_fn(2, |a, b| match (a, b) {
                (1, 0) => s10.clone(),
                (0, 1) => s10.conj(),
                _ => s00.clone(),
            }),
            transverse_current: None,
        })
        .unwrap()
    }

    fn three_level() -> MolecularModel<f64> {
        let grid = Grid3D::<f64>::centered(8, 0.7).unwrap();
        let lobe = |c: f64, axis: usize| {
            ScalarFieldG::from_fn(grid, move |r| {
                let d2 = r.iter().map(|x| x * x).sum::<f64>();
                cplx(c * r[axis] * (-d2 / 2.0).exp(), 0.1 * c * r[axis] * (-d2).exp())
            })
        };
        let s00 = gaussian_density(grid, [0.0; 3], 1.0, 1.0);
        let s10 = lobe(0.3, 2);
        let s20 = lobe(0.2, 0);
        let s21 = lobe(0.25, 1);
        build_model_from_charges(ChargeSet {
            energies: vec![0.0, 0.1, 0.22],
            populations: vec![0.7, 0.2, 0.1],
            dephasing: vec![0.0, 0.01, 0.02, 0.01, 0.0, 0.015, 0.02, 0.015, 0.0],
            electron_count: 1,
            units: Units::default(),
            sigma: PairMap::from_fn(3, |a, b| match (a, b) {
                (1, 0) => s10.clone(),
                (0, 1) => s10.conj(),
                (2, 0) => s20.clone(),
                (0, 2) => s20.conj(),
                (2, 1) => s21.clone(),
                (1, 2) => s21.conj(),
                _ => s00.clone(),
            }),
            transverse_current: None,
        })
        .unwrap()
    }

    fn random_series(n: usize, nt: usize, seed: u64) -> Vec<CMat<f64>> {
        let mut s = seed;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..nt)
            .map(|_| {
                let m = CMat::from_fn(n, |_, _| cplx(rnd(), rnd()));
                &m + &m.adjoint()
            })
            .collect()
    }

    #[test]
    fn projections_match_moments() {
        let m = two_level(0.1, 0.0, [1.0, 0.0]);
        let g = m.grid;
        let ez = VectorFieldG::from_fn(g, |_| [czero(), czero(), cplx(1.0, 0.0)]);
        let pj = project_current(&m, &ez).unwrap();
        let mu = dipole_moments(&m);
        let expect = cplx(0.0, m.omega(1, 0)) * mu.get(1, 0)[2];
        assert!((pj[(1, 0)] - expect).norm() < 1e-10 * expect.norm());
        assert!(pj.hermiticity_deviation() <= 1e-12 * pj.max_abs());

        let z = ScalarFieldG::from_fn(g, |r| cplx(r[2], 0.0));
        let pc = project_charge(&m, &z).unwrap();
        assert!((pc[(1, 0)] - mu.get(1, 0)[2]).norm() < 1e-15);
        let one = ScalarFieldG::from_fn(g, |_| cplx(1.0, 0.0));
        let pc = project_charge(&m, &one).unwrap();
        assert!((pc[(0, 0)].re - 1.0).abs() < 1e-12 && pc[(1, 0)].norm() < 1e-12);
        assert_eq!(project_charge(&m, &ScalarFieldG::zeros(g)).unwrap().max_abs(), 0.0);
        assert_eq!(project_current(&m, &VectorFieldG::zeros(g)).unwrap().max_abs(), 0.0);

        let other = Grid3D::<f64>::centered(4, 1.0).unwrap();
        assert!(project_charge(&m, &ScalarFieldG::zeros(other)).is_err());
    }

    #[test]
    fn superoperator_identities() {
        let v = random_series(3, 1, 7).pop().unwrap();
        let x = random_series(3, 1, 9).pop().unwrap();
        let l = SuperoperatorSide::Left.apply(&v, &x);
        let r = SuperoperatorSide::Right.apply(&v, &x);
        let p = SuperoperatorSide::Plus.apply(&v, &x);
        let mi = SuperoperatorSide::Minus.apply(&v, &x);
        assert!((&p - &(&l + &r).scale(cplx(0.5, 0.0))).max_abs() < 1e-15);
        assert!((&mi - &(&l - &r)).max_abs() < 1e-15);
        for side in [
            SuperoperatorSide::Left,
            SuperoperatorSide::Right,
            SuperoperatorSide::Plus,
            SuperoperatorSide::Minus,
        ] {
            let sm = side.matrix(&v);
            let direct = side.apply(&v, &x);
            for p in 0..9 {
                let y = (0..9).fold(czero::<f64>(), |acc, q| acc + sm[(p, q)] * x.as_slice()[q]);
                assert!((y - direct.as_slice()[p]).norm() < 1e-14);
            }
        }
        // Tr(Q⁻ ρ) vanishes for any ρ.
        assert!(mi.trace().norm() < 1e-14);
    }

    #[test]
    fn dressing_identities() {
        let m = two_level(0.1, 0.0, [1.0, 0.0]);
        let tg = TimeGrid::new(0.0, 0.5, 21).unwrap();
        let s = random_series(2, 21, 3);
        let fwd = heisenberg_dress(&m, &s, &tg, 0.0);
        // Dressing at τ − t_ref then at the reversed offset is the identity.
        for (k, mk) in fwd.iter().enumerate() {
            let t = tg.t(k);
            let undo = heisenberg_dress(&m, std::slice::from_ref(mk), &TimeGrid::new(0.0, 1.0, 2).unwrap(), t);
            assert!((&undo[0] - &s[k]).max_abs() < 1e-14);
        }

        let z = MolecularModel::with_energies(&m, vec![0.0, 0.0]);
        assert_eq!(heisenberg_dress(&z, &s, &tg, 3.0), s);

        let md = two_level(0.1, 0.002, [1.0, 0.0]);
        let d = heisenberg_dress(&md, &s, &tg, 2.0);
        for k in [0, 7, 20] {
            let expect = s[k][(1, 0)].norm() * (-0.002 * (tg.t(k) - 2.0f64).abs()).exp();
            assert!((d[k][(1, 0)].norm() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn first_order_two_level_closed_form() {
        let w = 0.1;
        let m = two_level(w, 0.0, [1.0, 0.0]);
        let tg = TimeGrid::new(0.0, 0.01 / w, 4001).unwrap();
        let v01 = cplx(0.3, -0.2);
        let vmat = CMat::from_fn(2, |a, b| match (a, b) {
            (0, 1) => v01,
            (1, 0) => v01.conj(),
            _ => czero(),
        });
        let t_on = 0.0;
        let v: Vec<CMat<f64>> = vec![vmat.clone(); tg.n_t];
        let c = nested_commutator_expectation(&m, &tg, &v, &[&v]).unwrap();
        // ⟨[V_I(t), V_I(τ)]⟩ = −2i|V₁₀|² sin(ω(t−τ)) for P₀ = 1, integrated over τ.
        let mut worst: f64 = 0.0;
        for (k, &t) in tg.times().iter().enumerate() {
            let s = (t - t_on).max(0.0);
            let exact = cplx(0.0, -2.0 * v01.norm_sqr() * (1.0 - (w * s).cos()) / w);
            worst = worst.max((c[k] - exact).norm());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn step_weights_reduce_to_trapezoid() {
        let d = Dressing {
            n: 1,
            omega: vec![0.0],
            eta: vec![0.0],
        };
        let w = d.step_weights(0.3);
        assert!((w.w0[(0, 0)] - cplx(0.15, 0.0)).norm() < 1e-15);
        assert!((w.w1[(0, 0)] - cplx(0.15, 0.0)).norm() < 1e-15);
        // series and closed forms meet continuously
        let (a1, a2) = phi12(cplx(0.1999999, 0.0));
        let (b1, b2) = phi12(cplx(0.2000001, 0.0));
        assert!((a1 - b1).norm() < 1e-6 && (a2 - b2).norm() < 1e-6);
        let x = cplx(0.05f64, -0.13);
        let (p1, p2) = phi12(x);
        let e = x.exp();
        assert!((p1 * x - (e - 1.0)).norm() < 1e-15);
        assert!((p2 * x * x - (e - 1.0 - x)).norm() < 1e-15);
    }

    #[test]
    fn maximally_mixed_gives_zero() {
        let m = two_level(0.1, 0.0, [0.5, 0.5]);
        let tg = TimeGrid::new(0.0, 0.1, 50).unwrap();
        let v = random_series(2, 50, 5);
        let v2: Vec<CMat<f64>> = v.iter().map(|x| CMat::diag(&[x[(0, 0)], x[(0, 0)]])).collect();
        // O = V with V ∝ identity-compatible diagonal: commutator vanishes.
        let c = nested_commutator_expectation(&m, &tg, &v2, &[&v2]).unwrap();
        assert!(c.iter().all(|z| z.norm() < 1e-15));
        // generic O, V: first order commutator with ρ ∝ I vanishes.
        let c = nested_commutator_expectation(&m, &tg, &v, &[&v]).unwrap();
        assert!(c.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn hilbert_and_liouville_forms_agree() {
        let m = three_level();
        let tg = TimeGrid::new(0.0, 0.2, 120).unwrap();
        let o = random_series(3, 120, 1);
        let v1 = random_series(3, 120, 2);
        let v2 = random_series(3, 120, 3);
        let v3 = random_series(3, 120, 4);
        for vs in [vec![&v1[..]], vec![&v1[..], &v2[..]], vec![&v1[..], &v2[..], &v3[..]]] {
            let h = nested_commutator_expectation(&m, &tg, &o, &vs).unwrap();
            let l = nested_commutator_expectation_liouville(&m, &tg, &o, &vs).unwrap();
            let scale = h.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            let dev = h.iter().zip(&l).fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
            assert!(dev <= 1e-12 * scale, "order {} dev {dev} scale {scale}", vs.len());
        }
    }

    #[test]
    fn zero_interaction_and_bad_order() {
        let m = three_level();
        let tg = TimeGrid::new(0.0, 0.2, 30).unwrap();
        let o = random_series(3, 30, 1);
        let z = vec![CMat::zeros(3); 30];
        let v = random_series(3, 30, 2);
        let c = nested_commutator_expectation(&m, &tg, &o, &[&v, &z]).unwrap();
        assert!(c.iter().all(|x| x.norm() == 0.0));
        assert!(matches!(
            nested_commutator_expectation(&m, &tg, &o, &[]),
            Err(Error::InvalidOrder(0))
        ));
        assert!(nested_commutator_expectation(&m, &tg, &o[..10], &[&v]).is_err());
    }

    #[test]
    fn causality_late_interaction() {
        let m = three_level();
        let tg = TimeGrid::new(0.0, 0.2, 60).unwrap();
        let o = random_series(3, 60, 1);
        let mut v = random_series(3, 60, 2);
        for (k, vm) in v.iter_mut().enumerate() {
            if k < 40 {
                *vm = CMat::zeros(3);
            }
        }
        let c = nested_commutator_expectation(&m, &tg, &o, &[&v, &v]).unwrap();
        for x in &c[..40] {
            assert_eq!(x.norm(), 0.0);
        }
    }
}
