//! Few-level molecular models described by transition charge and current
//! densities sampled on a grid.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{gradient, Grid3D, ScalarFieldG, VectorFieldG};
use crate::scalar::{ci, cplx, czero, Cplx, Real};
use crate::spectral::solve_poisson;
use crate::units::Units;

/// Dense `n × n` table indexed by a state pair `(α, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMap<F> {
    n: usize,
    items: Vec<F>,
}

impl<F> PairMap<F> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut items = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                items.push(f(a, b));
            }
        }
        PairMap { n, items }
    }

    pub fn from_vec(n: usize, items: Vec<F>) -> Result<Self> {
        if items.len() != n * n {
            return Err(Error::InvalidModel(format!(
                "pair table has {} entries, expected {}",
                items.len(),
                n * n
            )));
        }
        Ok(PairMap { n, items })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> &F {
        &self.items[a * self.n + b]
    }

    #[inline]
    pub fn get_mut(&mut self, a: usize, b: usize) -> &mut F {
        &mut self.items[a * self.n + b]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &F)> {
        let n = self.n;
        self.items.iter().enumerate().map(move |(i, f)| ((i / n, i % n), f))
    }
}

pub type Vec3<T> = [Cplx<T>; 3];

/// Eigenstate-basis model: energies, populations, dephasing and per-pair
/// transition densities. Immutable once built; all maps are Hermitian-complete.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularModel<T> {
    pub grid: Grid3D<T>,
    pub energies: Vec<T>,
    pub populations: Vec<T>,
    /// Row-major `n × n` coherence decay rates.
    pub dephasing: Vec<T>,
    pub electron_count: usize,
    pub units: Units<T>,
    sigma: PairMap<ScalarFieldG<T>>,
    current: PairMap<VectorFieldG<T>>,
}

/// Inputs for [`build_model_from_charges`].
#[derive(Debug, Clone)]
pub struct ChargeSet<T> {
    pub energies: Vec<T>,
    pub populations: Vec<T>,
    pub dephasing: Vec<T>,
    pub electron_count: usize,
    pub units: Units<T>,
    pub sigma: PairMap<ScalarFieldG<T>>,
    /// Optional divergence-free currents added on top of the longitudinal part.
    pub transverse_current: Option<PairMap<Option<VectorFieldG<T>>>>,
}

impl<T: Real> MolecularModel<T> {
    /// Assembles a model from already-complete maps without any checking.
    /// Use [`validate_model`] to inspect the result.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: Grid3D<T>,
        energies: Vec<T>,
        populations: Vec<T>,
        dephasing: Vec<T>,
        electron_count: usize,
        units: Units<T>,
        sigma: PairMap<ScalarFieldG<T>>,
        current: PairMap<VectorFieldG<T>>,
    ) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::InvalidModel("n_states must be ≥ 1".into()));
        }
        if populations.len() != n || dephasing.len() != n * n {
            return Err(Error::InvalidModel("population/dephasing shape mismatch".into()));
        }
        if sigma.n() != n || current.n() != n {
            return Err(Error::InvalidModel("density maps do not match n_states".into()));
        }
        for (_, s) in sigma.iter() {
            grid.ensure_same(&s.grid, "charge density")?;
        }
        for (_, j) in current.iter() {
            grid.ensure_same(&j.grid, "current density")?;
        }
        Ok(MolecularModel {
            grid,
            energies,
            populations,
            dephasing,
            electron_count,
            units,
            sigma,
            current,
        })
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    /// `ω_{αβ} = (E_α − E_β)/ħ`.
    #[inline]
    pub fn omega(&self, a: usize, b: usize) -> T {
        (self.energies[a] - self.energies[b]) / self.units.hbar
    }

    #[inline]
    pub fn eta(&self, a: usize, b: usize) -> T {
        self.dephasing[a * self.n_states() + b]
    }

    #[inline]
    pub fn sigma(&self, a: usize, b: usize) -> &ScalarFieldG<T> {
        self.sigma.get(a, b)
    }

    #[inline]
    pub fn current(&self, a: usize, b: usize) -> &VectorFieldG<T> {
        self.current.get(a, b)
    }

    pub fn sigma_map(&self) -> &PairMap<ScalarFieldG<T>> {
        &self.sigma
    }

    pub fn current_map(&self) -> &PairMap<VectorFieldG<T>> {
        &self.current
    }

    /// Returns a copy with one charge density replaced (no re-validation).
    pub fn with_sigma(&self, a: usize, b: usize, s: ScalarFieldG<T>) -> Self {
        let mut m = self.clone();
        *m.sigma.get_mut(a, b) = s;
        m
    }

    /// Returns a copy with one current density replaced (no re-validation).
    pub fn with_current(&self, a: usize, b: usize, j: VectorFieldG<T>) -> Self {
        let mut m = self.clone();
        *m.current.get_mut(a, b) = j;
        m
    }

    pub fn with_populations(&self, populations: Vec<T>) -> Self {
        MolecularModel {
            populations,
            ..self.clone()
        }
    }

    pub fn with_dephasing(&self, dephasing: Vec<T>) -> Self {
        MolecularModel {
            dephasing,
            ..self.clone()
        }
    }

    pub fn with_energies(&self, energies: Vec<T>) -> Self {
        MolecularModel {
            energies,
            ..self.clone()
        }
    }
}

fn check_scalars<T: Real>(
    energies: &[T],
    populations: &[T],
    dephasing: &[T],
    electron_count: usize,
) -> Result<()> {
    let n = energies.len();
    if n == 0 {
        return Err(Error::InvalidModel("n_states must be ≥ 1".into()));
    }
    if electron_count == 0 {
        return Err(Error::InvalidModel("electron_count must be ≥ 1".into()));
    }
    if populations.len() != n || dephasing.len() != n * n {
        return Err(Error::InvalidModel("population/dephasing shape mismatch".into()));
    }
    if populations.iter().any(|&p| p < T::zero()) {
        return Err(Error::InvalidModel("negative population".into()));
    }
    let total: f64 = populations.iter().map(|p| p.as_f64()).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!("populations sum to {total}")));
    }
    for a in 0..n {
        if dephasing[a * n + a] != T::zero() {
            return Err(Error::InvalidModel("η_αα must be zero".into()));
        }
        for b in 0..n {
            let e = dephasing[a * n + b];
            if e < T::zero() || e != dephasing[b * n + a] {
                return Err(Error::InvalidModel("η must be symmetric and ≥ 0".into()));
            }
        }
    }
    Ok(())
}

/// Builds a model whose transition currents satisfy the discrete continuity
/// equation `∇·j_{αβ} + iω_{αβ}σ_{αβ} = 0`.
///
/// The longitudinal part is `∇χ` with `∇²χ = −iωσ` solved spectrally. The
/// uniform (k = 0) current, which continuity leaves free, is fixed so that
/// `∫j_{αβ} = iω_{αβ} ∫r σ_{αβ}`.
pub fn build_model_from_charges<T: Real>(input: ChargeSet<T>) -> Result<MolecularModel<T>> {
    let ChargeSet {
        energies,
        populations,
        dephasing,
        electron_count,
        units,
        sigma,
        transverse_current,
    } = input;
    check_scalars(&energies, &populations, &dephasing, electron_count)?;
    let n = energies.len();
    if sigma.n() != n {
        return Err(Error::InvalidModel("sigma set does not match n_states".into()));
    }
    let grid = sigma.get(0, 0).grid;
    for (_, s) in sigma.iter() {
        grid.ensure_same(&s.grid, "sigma set")?;
    }
    if let Some(tc) = &transverse_current {
        if tc.n() != n {
            return Err(Error::InvalidModel("transverse current set shape mismatch".into()));
        }
        for (_, j) in tc.iter() {
            if let Some(j) = j {
                grid.ensure_same(&j.grid, "transverse current")?;
            }
        }
    }

    for a in 0..n {
        for b in 0..=a {
            let sab = sigma.get(a, b);
            let sba = sigma.get(b, a);
            let scale = sab.max_abs().max(sba.max_abs()).as_f64();
            let dev = sab
                .values
                .iter()
                .zip(&sba.values)
                .map(|(x, y)| (*x - y.conj()).norm().as_f64())
                .fold(0.0, f64::max);
            if dev > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NonHermitian {
                    what: format!("sigma({a},{b})"),
                    deviation: dev,
                });
            }
        }
    }

    let npts = grid.len();
    let dv = grid.cell_volume().as_f64();
    for a in 0..n {
        for b in 0..a {
            let s = sigma.get(a, b);
            let integral = s.integral().norm().as_f64();
            let bound = 1e-10 * s.max_abs().as_f64() * dv * npts as f64;
            if integral > bound {
                return Err(Error::NonNeutralCoherence {
                    alpha: a,
                    beta: b,
                    integral,
                    bound,
                });
            }
        }
    }

    let volume = grid.box_volume();
    let mut current = PairMap::from_fn(n, |_, _| VectorFieldG::zeros(grid));
    let mut sigma_out = PairMap::from_fn(n, |a, b| sigma.get(a, b).clone());
    for a in 0..n {
        for b in 0..=a {
            let s = sigma.get(a, b);
            let w = (energies[a] - energies[b]) / units.hbar;
            let mut j = if a != b && w != T::zero() {
                let rhs = s.scale(-ci::<T>() * w);
                gradient(&solve_poisson(&rhs))
            } else {
                VectorFieldG::zeros(grid)
            };
            if let Some(Some(jt)) = transverse_current.as_ref().map(|tc| tc.get(a, b)) {
                j = j.add(jt);
            }
            let target = first_moment(s).map(|m| m * ci::<T>() * w);
            let have = j.integral();
            for k in 0..3 {
                let shift = (target[k] - have[k]) / volume;
                j.comps[k].iter_mut().for_each(|v| *v = *v + shift);
            }
            if a == b {
                // Diagonal entries must be real for exact Hermiticity.
                for comp in j.comps.iter_mut() {
                    comp.iter_mut().for_each(|v| v.im = T::zero());
                }
                sigma_out.get_mut(a, a).values.iter_mut().for_each(|v| v.im = T::zero());
            } else {
                *sigma_out.get_mut(b, a) = s.conj();
                *current.get_mut(b, a) = j.conj();
            }
            *current.get_mut(a, b) = j;
        }
    }

    MolecularModel::from_parts(
        grid,
        energies,
        populations,
        dephasing,
        electron_count,
        units,
        sigma_out,
        current,
    )
}

/// `∫ r σ(r) dr` by midpoint quadrature.
pub fn first_moment<T: Real>(s: &ScalarFieldG<T>) -> Vec3<T> {
    let g = &s.grid;
    let mut acc = [czero::<T>(); 3];
    // Pairwise summation per component keeps the reduction order fixed.
    let mut terms: [Vec<Cplx<T>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for idx in 0..g.len() {
        let r = g.point(idx);
        for k in 0..3 {
            terms[k].push(s.values[idx] * r[k]);
        }
    }
    for k in 0..3 {
        acc[k] = crate::scalar::pairwise_sum(&terms[k]) * g.cell_volume();
    }
    acc
}

/// Transition dipoles `μ_{αβ} = ∫ r σ_{αβ}(r) dr`.
pub fn dipole_moments<T: Real>(model: &MolecularModel<T>) -> PairMap<Vec3<T>> {
    PairMap::from_fn(model.n_states(), |a, b| first_moment(model.sigma(a, b)))
}

/// Current integrals `u_{αβ} = ∫ j_{αβ}(r) dr`.
pub fn current_integrals<T: Real>(model: &MolecularModel<T>) -> PairMap<Vec3<T>> {
    PairMap::from_fn(model.n_states(), |a, b| model.current(a, b).integral())
}

/// Equilibrium charge density `σ₀(r) = Σ_α P(α) σ_{αα}(r)`.
pub fn ground_charge_density<T: Real>(model: &MolecularModel<T>) -> ScalarFieldG<T> {
    let mut out = ScalarFieldG::zeros(model.grid);
    for a in 0..model.n_states() {
        let p = model.populations[a];
        for (o, s) in out.values.iter_mut().zip(&model.sigma(a, a).values) {
            *o = *o + *s * p;
        }
    }
    out
}

/// Tolerances applied by [`validate_model`].
#[derive(Debug, Clone, Copy)]
pub struct ModelTolerances {
    pub continuity: f64,
    pub hermiticity: f64,
    pub neutrality: f64,
    pub diagonal_charge: f64,
    pub population_sum: f64,
    pub boundary_decay: f64,
}

impl Default for ModelTolerances {
    fn default() -> Self {
        ModelTolerances {
            continuity: 1e-10,
            hermiticity: 1e-12,
            neutrality: 1e-10,
            diagonal_charge: 1e-8,
            population_sum: 1e-12,
            boundary_decay: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairResidual {
    pub alpha: usize,
    pub beta: usize,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub continuity: Vec<PairResidual>,
    pub hermiticity_max_deviation: f64,
    pub hermiticity_pass: bool,
    pub neutrality: Vec<PairResidual>,
    pub diagonal_charge: Vec<PairResidual>,
    pub population_sum: f64,
    pub populations_pass: bool,
    pub dephasing_pass: bool,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |p: bool| if p { "ok" } else { "FAIL" };
        writeln!(f, "continuity (relative L2):")?;
        for r in &self.continuity {
            writeln!(f, "  ({},{}) {:.3e} {}", r.alpha, r.beta, r.value, flag(r.pass))?;
        }
        writeln!(
            f,
            "hermiticity max deviation: {:.3e} {}",
            self.hermiticity_max_deviation,
            flag(self.hermiticity_pass)
        )?;
        writeln!(f, "coherence neutrality |∫σ|:")?;
        for r in &self.neutrality {
            writeln!(f, "  ({},{}) {:.3e} {}", r.alpha, r.beta, r.value, flag(r.pass))?;
        }
        writeln!(f, "diagonal charge (relative to N e):")?;
        for r in &self.diagonal_charge {
            writeln!(f, "  ({},{}) {:.3e} {}", r.alpha, r.beta, r.value, flag(r.pass))?;
        }
        writeln!(
            f,
            "population sum: {:.17} {}",
            self.population_sum,
            flag(self.populations_pass)
        )?;
        writeln!(f, "dephasing matrix: {}", flag(self.dephasing_pass))?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(f, "result: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Continuity residual `‖∇·j_{αβ} + iω_{αβ}σ_{αβ}‖₂ / ‖ω_{αβ}σ_{αβ}‖₂`.
pub fn continuity_residual<T: Real>(model: &MolecularModel<T>, a: usize, b: usize) -> f64 {
    let w = model.omega(a, b);
    let div = model.current(a, b).divergence();
    let s = model.sigma(a, b);
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, sv) in div.values.iter().zip(&s.values) {
        let src = *sv * w;
        num += (*d + ci::<T>() * src).norm_sqr().as_f64();
        den += src.norm_sqr().as_f64();
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

fn boundary_max<T: Real>(s: &ScalarFieldG<T>) -> T {
    let g = &s.grid;
    let mut m = T::zero();
    for idx in 0..g.len() {
        let i = g.unravel(idx);
        let on_edge = (0..3).any(|k| i[k] == 0 || i[k] + 1 == g.dims[k]);
        if on_edge {
            m = m.max(s.values[idx].norm());
        }
    }
    m
}

/// Checks every model invariant and reports residuals. Never fails.
pub fn validate_model<T: Real>(model: &MolecularModel<T>) -> ValidationReport {
    validate_model_with(model, &ModelTolerances::default())
}

pub fn validate_model_with<T: Real>(
    model: &MolecularModel<T>,
    tol: &ModelTolerances,
) -> ValidationReport {
    let n = model.n_states();
    let g = &model.grid;
    let dv = g.cell_volume().as_f64();
    let mut warnings = Vec::new();

    let mut continuity = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let value = continuity_residual(model, a, b);
                continuity.push(PairResidual {
                    alpha: a,
                    beta: b,
                    value,
                    pass: value <= tol.continuity,
                });
            }
        }
    }

    let mut herm = 0.0f64;
    let mut scale = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let (sab, sba) = (model.sigma(a, b), model.sigma(b, a));
            scale = scale.max(sab.max_abs().as_f64());
            for (x, y) in sab.values.iter().zip(&sba.values) {
                herm = herm.max((*x - y.conj()).norm().as_f64());
            }
            let (jab, jba) = (model.current(a, b), model.current(b, a));
            for k in 0..3 {
                for (x, y) in jab.comps[k].iter().zip(&jba.comps[k]) {
                    herm = herm.max((*x - y.conj()).norm().as_f64());
                }
            }
        }
    }
    let hermiticity_pass = herm <= tol.hermiticity * scale.max(f64::MIN_POSITIVE);

    let mut neutrality = Vec::new();
    let mut diagonal_charge = Vec::new();
    let ne = model.electron_count as f64 * model.units.charge.as_f64();
    for a in 0..n {
        for b in 0..n {
            let s = model.sigma(a, b);
            let integral = s.integral();
            if a == b {
                let value = (integral.re.as_f64() - ne).abs() / ne;
                diagonal_charge.push(PairResidual {
                    alpha: a,
                    beta: a,
                    value,
                    pass: value <= tol.diagonal_charge,
                });
            } else {
                let value = integral.norm().as_f64();
                let bound = tol.neutrality * s.max_abs().as_f64() * dv * g.len() as f64;
                neutrality.push(PairResidual {
                    alpha: a,
                    beta: b,
                    value,
                    pass: value <= bound,
                });
            }
            let edge = boundary_max(s).as_f64();
            let peak = s.max_abs().as_f64();
            if peak > 0.0 && edge > tol.boundary_decay * peak {
                warnings.push(format!(
                    "sigma({a},{b}) at box boundary is {:.2e} of its maximum",
                    edge / peak
                ));
            }
        }
    }

    let population_sum: f64 = model.populations.iter().map(|p| p.as_f64()).sum();
    let populations_pass = model.populations.iter().all(|&p| p >= T::zero())
        && (population_sum - 1.0).abs() <= tol.population_sum;
    let dephasing_pass = (0..n).all(|a| {
        model.eta(a, a) == T::zero()
            && (0..n).all(|b| model.eta(a, b) >= T::zero() && model.eta(a, b) == model.eta(b, a))
    });

    let pass = continuity.iter().all(|r| r.pass)
        && hermiticity_pass
        && neutrality.iter().all(|r| r.pass)
        && diagonal_charge.iter().all(|r| r.pass)
        && populations_pass
        && dephasing_pass;

    ValidationReport {
        continuity,
        hermiticity_max_deviation: herm,
        hermiticity_pass,
        neutrality,
        diagonal_charge,
        population_sum,
        populations_pass,
        dephasing_pass,
        warnings,
        pass,
    }
}

/// Normalised isotropic Gaussian `exp(−|r−c|²/2w²)` scaled to integrate to `total`
/// on the grid.
pub fn gaussian_density<T: Real>(grid: Grid3D<T>, center: [T; 3], width: T, total: T) -> ScalarFieldG<T> {
    let raw = ScalarFieldG::from_fn(grid, |r| {
        let d2 = (0..3).map(|k| (r[k] - center[k]).powi(2)).fold(T::zero(), |a, b| a + b);
        cplx((-d2 / (T::lit(2.0) * width * width)).exp(), T::zero())
    });
    let norm = raw.integral().re;
    raw.scale(cplx(total / norm, T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tlm(w: f64) -> ChargeSet<f64> {
        let grid = Grid3D::<f64>::centered(12, 0.5).unwrap();
        let s10 = ScalarFieldG::from_fn(grid, |[x, y, z]| {
            cplx(0.2 * z * (-(x * x + y * y + z * z) / 2.0).exp(), 0.0)
        });
        let s00 = gaussian_density(grid, [0.0; 3], 1.0, 1.0);
        let sigma = PairMap::from_fn(2, |a, b| match (a, b) {
            (1, 0) => s10.clone(),
            (0, 1) => s10.conj(),
            _ => s00.clone(),
        });
        ChargeSet {
            energies: vec![0.0, w],
            populations: vec![1.0, 0.0],
            dephasing: vec![0.0; 4],
            electron_count: 1,
            units: Units::default(),
            sigma,
            transverse_current: None,
        }
    }

    #[test]
    fn single_state_model_has_zero_current() {
        let grid = Grid3D::centered(6, 0.5).unwrap();
        let s = gaussian_density(grid, [0.0; 3], 0.7, 2.0);
        let m = build_model_from_charges(ChargeSet {
            energies: vec![-1.0],
            populations: vec![1.0],
            dephasing: vec![0.0],
            electron_count: 2,
            units: Units::default(),
            sigma: PairMap::from_fn(1, |_, _| s.clone()),
            transverse_current: None,
        })
        .unwrap();
        assert_eq!(m.current(0, 0).max_abs(), 0.0);
        assert!(validate_model(&m).pass);
    }

    #[test]
    fn continuity_and_stokes_hold_after_build() {
        let m = build_model_from_charges(tlm(0.1)).unwrap();
        assert!(continuity_residual(&m, 1, 0) < 1e-12);
        assert!(continuity_residual(&m, 0, 1) < 1e-12);
        let mu = dipole_moments(&m);
        let u = current_integrals(&m);
        let w = m.omega(1, 0);
        for k in 0..3 {
            let expect = ci::<f64>() * w * mu.get(1, 0)[k];
            assert!((u.get(1, 0)[k] - expect).norm() <= 1e-8 * mu.get(1, 0)[2].norm() * w);
        }
        assert!(mu.get(1, 0)[0].norm() < 1e-14 && mu.get(1, 0)[1].norm() < 1e-14);
        assert_eq!(u.get(0, 0), &[czero(); 3]);
        assert!(validate_model(&m).pass);
    }

    #[test]
    fn non_neutral_coherence_is_rejected() {
        let mut cs = tlm(0.1);
        let shifted = cs.sigma.get(1, 0).clone();
        let bump = gaussian_density(shifted.grid, [0.0; 3], 1.0, 0.01);
        let s = ScalarFieldG::from_values(
            shifted.grid,
            shifted.values.iter().zip(&bump.values).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        *cs.sigma.get_mut(0, 1) = s.conj();
        *cs.sigma.get_mut(1, 0) = s;
        assert!(matches!(
            build_model_from_charges(cs),
            Err(Error::NonNeutralCoherence { .. })
        ));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut cs = tlm(0.1);
        let s = cs.sigma.get(0, 1).scale(cplx(2.0, 0.0));
        *cs.sigma.get_mut(0, 1) = s;
        assert!(matches!(build_model_from_charges(cs), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let mut cs = tlm(0.1);
        let other = Grid3D::centered(12, 0.6).unwrap();
        *cs.sigma.get_mut(1, 1) = gaussian_density(other, [0.0; 3], 1.0, 1.0);
        assert!(matches!(build_model_from_charges(cs), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn validator_flags_hermiticity_and_continuity() {
        let m = build_model_from_charges(tlm(0.1)).unwrap();
        let bad = m.with_sigma(1, 0, m.sigma(0, 1).conj().scale(cplx(2.0, 0.0)));
        let r = validate_model(&bad);
        assert!(!r.hermiticity_pass && !r.pass);

        let zeroed = m.with_current(1, 0, VectorFieldG::zeros(m.grid));
        let r = validate_model(&zeroed);
        let c = r.continuity.iter().find(|c| c.alpha == 1 && c.beta == 0).unwrap();
        assert!((c.value - 1.0).abs() < 1e-14);
        assert!(!r.pass);
    }

    #[test]
    fn moments_invariant_under_energy_shift() {
        let m = build_model_from_charges(tlm(0.1)).unwrap();
        let shifted = m.with_energies(m.energies.iter().map(|e| e + 3.0).collect());
        assert_eq!(dipole_moments(&m), dipole_moments(&shifted));
        assert!((shifted.omega(1, 0) - m.omega(1, 0)).abs() < 1e-14);
        assert!(continuity_residual(&shifted, 1, 0) < 1e-12);
    }

    #[test]
    fn ground_density_mixes_populations() {
        let m = build_model_from_charges(tlm(0.1)).unwrap();
        let g = ground_charge_density(&m);
        assert_eq!(g, *m.sigma(0, 0));
        let half = m.with_populations(vec![0.5, 0.5]);
        let g = ground_charge_density(&half);
        for (i, v) in g.values.iter().enumerate() {
            let mean = (m.sigma(0, 0).values[i] + m.sigma(1, 1).values[i]) * 0.5;
            assert!((v - mean).norm() < 1e-15);
        }
        assert!((g.integral().re - 1.0).abs() < 1e-12);
    }
}
