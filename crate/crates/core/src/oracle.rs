//! Nonperturbative reference: density-matrix propagation under the full
//! minimal-coupling Hamiltonian and order extraction by amplitude scanning.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{DrivingField, ETime, Temporal, TimeGrid};
use crate::grid::{ScalarFieldG, VectorFieldG};
use crate::liouville::{equilibrium, project_charge, project_current};
use crate::matrix::CMat;
use crate::model::MolecularModel;
use crate::scalar::{cplx, czero, Cplx, Real};
use crate::signals::{SignalKind, SignalTrace};

/// Potentials used in the propagated Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleGauge {
    /// `A₀ = 0` and `𝒜 = ∫E dt`, built analytically from the field.
    #[default]
    Temporal,
    /// The field's own `A/κ` and `A₀`.
    AsGiven,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions<T> {
    pub gauge: OracleGauge,
    /// Initial RK4 substeps per field time step.
    pub substeps: usize,
    /// Endpoint change and trace drift accepted for convergence.
    pub tolerance: T,
    pub max_halvings: usize,
}

impl<T: Real> Default for OracleOptions<T> {
    fn default() -> Self {
        OracleOptions {
            gauge: OracleGauge::Temporal,
            substeps: 1,
            tolerance: T::lit(1e-8),
            max_halvings: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityTrajectory<T> {
    pub time_grid: TimeGrid<T>,
    pub rho: Vec<CMat<T>>,
    pub gauge: OracleGauge,
    /// RK4 substeps per field step of the accepted run.
    pub substeps: usize,
    pub trace_drift: T,
    pub hermiticity: T,
    /// Endpoint change against the previous halving.
    pub endpoint_change: T,
    /// Positivity spot checks (smallest eigenvalue above `−10⁻⁸`).
    pub positive: bool,
}

impl<T: Real> DensityTrajectory<T> {
    /// Largest population change from the initial state.
    pub fn max_transfer(&self) -> T {
        let r0 = &self.rho[0];
        self.rho.iter().fold(T::zero(), |acc, r| {
            (0..r.n()).fold(acc, |a, i| a.max((r[(i, i)] - r0[(i, i)]).norm()))
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum TimeFn<T> {
    Integral(ETime<T>),
    Rate(ETime<T>),
    Potential { g: Temporal<T>, kappa: T },
    Scalar { h: Temporal<T> },
}

impl<T: Real> TimeFn<T> {
    fn at(&self, t: T) -> T {
        match self {
            TimeFn::Integral(e) => e.integral(t),
            TimeFn::Rate(e) => e.value(t),
            TimeFn::Potential { g, kappa } => g.value(t) / *kappa,
            TimeFn::Scalar { h } => h.value(t),
        }
    }
}

/// Model-projected Hamiltonian and observables for one field and gauge.
struct Projected<T> {
    energies: Vec<T>,
    eta: Vec<T>,
    hbar: T,
    e_over_m: T,
    /// `𝒜 = Σ S_m f_m(t)`.
    a_fields: Vec<VectorFieldG<T>>,
    a_time: Vec<TimeFn<T>>,
    a_cur: Vec<CMat<T>>,
    a_aa: Vec<Vec<CMat<T>>>,
    a0_cur: Vec<CMat<T>>,
    a0_time: Vec<TimeFn<T>>,
    e_time: Vec<TimeFn<T>>,
    e_cur: Vec<CMat<T>>,
    e_ea: Vec<Vec<CMat<T>>>,
}

impl<T: Real> Projected<T> {
    fn new(model: &MolecularModel<T>, field: &DrivingField<T>, gauge: OracleGauge) -> Result<Self> {
        field.check_switched_off()?;
        let grid = model.grid;
        let eterms = field.e_terms();
        let mut e_fields = Vec::new();
        let mut e_time = Vec::new();
        for term in &eterms {
            e_fields.push(term.spatial.sample(&grid)?);
            e_time.push(TimeFn::Rate(term.time));
        }
        let mut a_fields = Vec::new();
        let mut a_time = Vec::new();
        let mut a0_cur = Vec::new();
        let mut a0_time = Vec::new();
        match gauge {
            OracleGauge::Temporal => {
                for (term, f) in eterms.iter().zip(&e_fields) {
                    a_fields.push(f.clone());
                    a_time.push(TimeFn::Integral(term.time));
                }
            }
            OracleGauge::AsGiven => {
                for (s, g) in field.a_terms() {
                    a_fields.push(s.sample(&grid)?);
                    a_time.push(TimeFn::Potential {
                        g,
                        kappa: field.a_dot_convention,
                    });
                }
                for a in field.a0_terms() {
                    let phi = ScalarFieldG::from_fn(grid, |r| cplx(a.spatial.value(r) * a.scale, T::zero()));
                    a0_cur.push(project_charge(model, &phi)?);
                    a0_time.push(TimeFn::Scalar { h: a.temporal });
                }
            }
        }
        let cur = |fs: &[VectorFieldG<T>]| fs.iter().map(|f| project_current(model, f)).collect::<Result<Vec<_>>>();
        let cross = |xs: &[VectorFieldG<T>]| {
            xs.iter()
                .map(|x| a_fields.iter().map(|a| project_charge(model, &x.dot(a))).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
        };
        Ok(Projected {
            energies: model.energies.clone(),
            eta: model.dephasing.clone(),
            hbar: model.units.hbar,
            e_over_m: model.units.e_over_m(),
            a_cur: cur(&a_fields)?,
            a_aa: cross(&a_fields)?,
            e_cur: cur(&e_fields)?,
            e_ea: cross(&e_fields)?,
            a_fields,
            a_time,
            a0_cur,
            a0_time,
            e_time,
        })
    }

    fn hamiltonian(&self, t: T) -> CMat<T> {
        let mut h = CMat::diag(&self.energies.iter().map(|&e| cplx(e, T::zero())).collect::<Vec<_>>());
        let f: Vec<T> = self.a_time.iter().map(|x| x.at(t)).collect();
        let half = self.e_over_m / T::lit(2.0);
        for (m, fm) in f.iter().enumerate() {
            if *fm == T::zero() {
                continue;
            }
            h.axpy(cplx(*fm, T::zero()), &self.a_cur[m]);
            for (mp, fmp) in f.iter().enumerate() {
                h.axpy(cplx(half * *fm * *fmp, T::zero()), &self.a_aa[m][mp]);
            }
        }
        for (c, tf) in self.a0_cur.iter().zip(&self.a0_time) {
            h.axpy(cplx(tf.at(t), T::zero()), c);
        }
        h
    }

    /// `−∫E·J` for the state `ρ` at time `t`.
    fn energy_rate(&self, t: T, rho: &CMat<T>) -> Cplx<T> {
        let f: Vec<T> = self.a_time.iter().map(|x| x.at(t)).collect();
        let mut acc = czero();
        for (m, tf) in self.e_time.iter().enumerate() {
            let e = tf.at(t);
            if e == T::zero() {
                continue;
            }
            acc = acc + self.e_cur[m].trace_product(rho) * e;
            for (mp, fmp) in f.iter().enumerate() {
                acc = acc + self.e_ea[m][mp].trace_product(rho) * (e * *fmp * self.e_over_m);
            }
        }
        -acc
    }

    fn vector_potential(&self, t: T) -> Option<VectorFieldG<T>> {
        let first = self.a_fields.first()?;
        let mut out = VectorFieldG::zeros(first.grid);
        for (s, tf) in self.a_fields.iter().zip(&self.a_time) {
            let w = tf.at(t);
            for c in 0..3 {
                for (o, v) in out.comps[c].iter_mut().zip(&s.comps[c]) {
                    *o = *o + *v * w;
                }
            }
        }
        Some(out)
    }
}

/// `ρ̇ = −(i/ħ)[H, ρ] − η∘ρ`.
fn rhs<T: Real>(h: &CMat<T>, rho: &CMat<T>, eta: &[T], hbar: T) -> CMat<T> {
    let n = rho.n();
    let c = h.commutator(rho).scale(cplx(T::zero(), -T::one() / hbar));
    CMat::from_fn(n, |a, b| c[(a, b)] - rho[(a, b)] * eta[a * n + b])
}

fn rk4_run<T: Real>(
    h: &(dyn Fn(T) -> CMat<T> + Sync),
    eta: &[T],
    hbar: T,
    rho0: &CMat<T>,
    tg: &TimeGrid<T>,
    substeps: usize,
) -> Vec<CMat<T>> {
    let hs = tg.dt / T::nu(substeps);
    let half = hs / T::lit(2.0);
    let mut out = Vec::with_capacity(tg.n_t);
    let mut rho = rho0.clone();
    out.push(rho.clone());
    for k in 1..tg.n_t {
        let base = tg.t(k - 1);
        for s in 0..substeps {
            let t = base + hs * T::nu(s);
            let hm = h(t + half);
            let k1 = rhs(&h(t), &rho, eta, hbar);
            let mut y = rho.clone();
            y.axpy(cplx(half, T::zero()), &k1);
            let k2 = rhs(&hm, &y, eta, hbar);
            let mut y = rho.clone();
            y.axpy(cplx(half, T::zero()), &k2);
            let k3 = rhs(&hm, &y, eta, hbar);
            let mut y = rho.clone();
            y.axpy(cplx(hs, T::zero()), &k3);
            let k4 = rhs(&h(t + hs), &y, eta, hbar);
            let w = hs / T::lit(6.0);
            rho.axpy(cplx(w, T::zero()), &k1);
            rho.axpy(cplx(w * T::lit(2.0), T::zero()), &k2);
            rho.axpy(cplx(w * T::lit(2.0), T::zero()), &k3);
            rho.axpy(cplx(w, T::zero()), &k4);
        }
        out.push(rho.clone());
    }
    out
}

/// RK4 propagation of `ρ` under an arbitrary Hamiltonian `h(t)` with pure
/// dephasing, halving the substep until the endpoint is converged.
pub fn propagate_hamiltonian<T: Real>(
    h: &(dyn Fn(T) -> CMat<T> + Sync),
    eta: &[T],
    hbar: T,
    rho0: &CMat<T>,
    tg: &TimeGrid<T>,
    opts: &OracleOptions<T>,
) -> Result<DensityTrajectory<T>> {
    let mut m = opts.substeps.max(1);
    let mut prev = rk4_run(h, eta, hbar, rho0, tg, m);
    let mut change = T::infinity();
    for _ in 0..opts.max_halvings {
        m *= 2;
        let cur = rk4_run(h, eta, hbar, rho0, tg, m);
        change = (cur.last().unwrap() - prev.last().unwrap()).max_abs();
        prev = cur;
        if change < opts.tolerance {
            return finish(prev, tg, opts, m, change);
        }
    }
    Err(Error::NonConvergent {
        change: change.as_f64(),
        halvings: opts.max_halvings,
    })
}

fn finish<T: Real>(
    rho: Vec<CMat<T>>,
    tg: &TimeGrid<T>,
    opts: &OracleOptions<T>,
    substeps: usize,
    change: T,
) -> Result<DensityTrajectory<T>> {
    let tr0 = rho[0].trace();
    let trace_drift = rho.iter().fold(T::zero(), |a, r| a.max((r.trace() - tr0).norm()));
    if trace_drift > opts.tolerance {
        return Err(Error::TraceDrift(trace_drift.as_f64()));
    }
    let hermiticity = rho.iter().fold(T::zero(), |a, r| a.max(r.hermiticity_deviation()));
    if hermiticity > T::lit(1e-10) {
        return Err(Error::NonHermitian {
            what: "density matrix".into(),
            deviation: hermiticity.as_f64(),
        });
    }
    let stride = (rho.len() / 16).max(1);
    let positive = rho
        .iter()
        .step_by(stride)
        .chain(rho.last())
        .all(|r| r.is_psd(T::lit(1e-8)));
    Ok(DensityTrajectory {
        time_grid: *tg,
        rho,
        gauge: opts.gauge,
        substeps,
        trace_drift,
        hermiticity,
        endpoint_change: change,
        positive,
    })
}

/// Propagates `ρ_eq` under `H₀ + H_int(t)` with
/// `H_int = ∫𝒜·ĵ + (e/2m)∫σ̂𝒜² + ∫A₀σ̂` in the requested gauge.
pub fn propagate<T: Real>(model: &MolecularModel<T>, field: &DrivingField<T>, opts: &OracleOptions<T>) -> Result<DensityTrajectory<T>> {
    let p = Projected::new(model, field, opts.gauge)?;
    let h = |t: T| p.hamiltonian(t);
    propagate_hamiltonian(&h, &p.eta, p.hbar, &equilibrium(model), &field.time_grid, opts)
}

/// `J(r,t) = Σ ρ_βα j_αβ(r) + (e/m) 𝒜(r,t) Σ ρ_βα σ_αβ(r)` on the time grid.
pub fn oracle_current<T: Real>(
    model: &MolecularModel<T>,
    traj: &DensityTrajectory<T>,
    field: &DrivingField<T>,
) -> Result<Vec<VectorFieldG<T>>> {
    let p = Projected::new(model, field, traj.gauge)?;
    let n = model.n_states();
    let em = model.units.e_over_m();
    traj.rho
        .iter()
        .enumerate()
        .map(|(k, rho)| {
            let mut j = VectorFieldG::zeros(model.grid);
            let mut s = ScalarFieldG::zeros(model.grid);
            for a in 0..n {
                for b in 0..n {
                    let w = rho[(b, a)];
                    if w == czero() {
                        continue;
                    }
                    let ja = model.current(a, b);
                    for c in 0..3 {
                        for (o, v) in j.comps[c].iter_mut().zip(&ja.comps[c]) {
                            *o = *o + *v * w;
                        }
                    }
                    for (o, v) in s.values.iter_mut().zip(&model.sigma(a, b).values) {
                        *o = *o + *v * w;
                    }
                }
            }
            if let Some(a) = p.vector_potential(traj.time_grid.t(k)) {
                for c in 0..3 {
                    for ((o, av), sv) in j.comps[c].iter_mut().zip(&a.comps[c]).zip(&s.values) {
                        *o = *o + *av * *sv * em;
                    }
                }
            }
            Ok(j)
        })
        .collect()
}

/// `Ẇ_f(t) = −∫E·J` along the trajectory.
pub fn oracle_energy_exchange<T: Real>(
    model: &MolecularModel<T>,
    traj: &DensityTrajectory<T>,
    field: &DrivingField<T>,
) -> Result<SignalTrace<T>> {
    let p = Projected::new(model, field, traj.gauge)?;
    let values = traj
        .rho
        .iter()
        .enumerate()
        .map(|(k, r)| p.energy_rate(traj.time_grid.t(k), r))
        .collect();
    Ok(SignalTrace {
        kind: SignalKind::EnergyExchange,
        order: 0,
        axis: traj.time_grid.times(),
        values,
        axis_unit: "atomic_time",
        value_unit: "hartree/atomic_time",
    })
}

/// Field scale giving a peak population transfer of about `target`,
/// assuming the transfer grows as `λ²`.
pub fn perturbative_scale<T: Real>(
    model: &MolecularModel<T>,
    field: &DrivingField<T>,
    target: T,
    opts: &OracleOptions<T>,
) -> Result<T> {
    let mut lam = T::one();
    for _ in 0..4 {
        let p = propagate(model, &field.scaled(lam), opts)?.max_transfer();
        if p == T::zero() {
            return Err(Error::InvalidField("field produces no population transfer".into()));
        }
        let next = lam * (target / p).sqrt();
        if ((next - lam) / lam).abs() < T::lit(1e-2) {
            return Ok(next);
        }
        lam = next;
    }
    Ok(lam)
}

#[derive(Debug, Clone)]
pub struct OrderFit<T> {
    pub lambdas: Vec<T>,
    /// `c₂, c₃, c₄`: counterparts of the order 1, 2, 3 energy exchange.
    pub coefficients: Vec<SignalTrace<T>>,
    /// `c₅`, absorbing leakage from higher orders.
    pub leakage: Vec<T>,
    pub condition: T,
    pub max_transfer: T,
    pub substeps: usize,
}

/// Least-squares fit of `Ẇ(t; λ) = Σ_{m=2..5} c_m(t) λ^m` over oracle runs of
/// `field.scaled(λ)`.
pub fn extract_orders<T: Real>(
    model: &MolecularModel<T>,
    field: &DrivingField<T>,
    lambdas: &[T],
    opts: &OracleOptions<T>,
) -> Result<OrderFit<T>> {
    let mut sorted: Vec<f64> = lambdas.iter().map(|l| l.as_f64()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    if sorted.len() < 5 || sorted[0] <= 0.0 {
        return Err(Error::Config("order extraction needs at least 5 distinct positive amplitudes".into()));
    }
    let runs = lambdas
        .par_iter()
        .map(|&l| {
            let f = field.scaled(l);
            let traj = propagate(model, &f, opts)?;
            let w = oracle_energy_exchange(model, &traj, &f)?;
            Ok((traj.max_transfer(), traj.substeps, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_transfer = runs.iter().fold(T::zero(), |a, r| a.max(r.0));
    if max_transfer > T::lit(1e-2) {
        return Err(Error::NotPerturbative(max_transfer.as_f64()));
    }
    let lref = *sorted.last().unwrap();
    let nl = lambdas.len();
    let v = DMatrix::from_fn(nl, 4, |i, j| (lambdas[i].as_f64() / lref).powi(j as i32 + 2));
    let sv = v.clone().svd(true, true);
    let smax = sv.singular_values.max();
    let smin = sv.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e8) {
        return Err(Error::IllConditionedFit(condition));
    }
    let nt = field.time_grid.n_t;
    let mut coeff = vec![vec![0.0f64; nt]; 4];
    for k in 0..nt {
        let b = DVector::from_fn(nl, |i, _| runs[i].2.values[k].re.as_f64());
        let x = sv.solve(&b, 0.0).map_err(|e| Error::Config(e.to_string()))?;
        for m in 0..4 {
            coeff[m][k] = x[m] / lref.powi(m as i32 + 2);
        }
    }
    let axis = field.time_grid.times();
    let coefficients = (0..3)
        .map(|m| SignalTrace {
            kind: SignalKind::EnergyExchange,
            order: m + 1,
            axis: axis.clone(),
            values: coeff[m].iter().map(|&c| cplx(T::lit(c), T::zero())).collect(),
            axis_unit: "atomic_time",
            value_unit: "hartree/atomic_time",
        })
        .collect();
    Ok(OrderFit {
        lambdas: lambdas.to_vec(),
        coefficients,
        leakage: coeff[3].iter().map(|&c| T::lit(c)).collect(),
        condition: T::lit(condition),
        max_transfer,
        substeps: runs.iter().map(|r| r.1).max().unwrap_or(1),
    })
}
