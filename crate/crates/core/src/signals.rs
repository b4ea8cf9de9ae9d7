//! Observable signals: energy exchange, dipole-limit comparators, linear
//! spectra and heterodyne-detected signals.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{cumulative_trapezoid_c, DrivingField, ETerm, TimeGrid, VectorProfile};
use crate::grid::VectorFieldG;
use crate::liouville::{dressed_cumulative, equilibrium, heisenberg_dress, Dressing};
use crate::matrix::CMat;
use crate::model::{current_integrals, dipole_moments, MolecularModel};
use crate::response::{InducedCurrent, ResponseEngine};
use crate::scalar::{cis, cplx, czero, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    EnergyExchange,
    Heterodyne,
    SpectrumDipole,
    SpectrumNaiveMc,
    /// `ΔW⁽¹⁾_d(ω)` for a monochromatic field.
    ExchangeDipole,
    /// `ΔW⁽¹⁾_mc(ω)` for a monochromatic field.
    ExchangeNaiveMc,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::EnergyExchange => "energy_exchange",
            SignalKind::Heterodyne => "heterodyne",
            SignalKind::SpectrumDipole => "spectrum_dipole",
            SignalKind::SpectrumNaiveMc => "spectrum_naive_mc",
            SignalKind::ExchangeDipole => "exchange_dipole",
            SignalKind::ExchangeNaiveMc => "exchange_naive_mc",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SignalTrace<T> {
    pub kind: SignalKind,
    /// 0 for a total over orders.
    pub order: usize,
    pub axis: Vec<T>,
    pub values: Vec<Cplx<T>>,
    pub axis_unit: &'static str,
    pub value_unit: &'static str,
}

impl<T: Real> SignalTrace<T> {
    /// CSV text: one header comment then `axis,re,im` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# {}, {}, {}, {}",
            self.kind.name(),
            self.order,
            self.axis_unit,
            self.value_unit
        );
        for (x, v) in self.axis.iter().zip(&self.values) {
            // `+ 0.0` folds negative zero
            let f = |y: T| y.as_f64() + 0.0;
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", f(*x), f(v.re), f(v.im));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Trapezoidal integral of the trace over its axis.
    pub fn integral(&self) -> Cplx<T> {
        let mut acc = czero();
        for k in 1..self.axis.len() {
            let h = self.axis[k] - self.axis[k - 1];
            acc = acc + (self.values[k] + self.values[k - 1]) * (h / T::lit(2.0));
        }
        acc
    }
}

/// `ΔẆ⁽ⁿ⁾(t) = −∫ E(r,t)·J⁽ⁿ⁾(r,t) dr` from an already computed current.
pub fn energy_exchange_of<T: Real>(current: &InducedCurrent<T>) -> SignalTrace<T> {
    SignalTrace {
        kind: SignalKind::EnergyExchange,
        order: current.order,
        axis: current.time_grid.times(),
        values: current.energy_rate(),
        axis_unit: "atomic_time",
        value_unit: "hartree/atomic_time",
    }
}

/// Energy exchange rate of order `n` (1..=3), or the sum of orders 1..=3 for `n = 0`.
pub fn energy_exchange<T: Real>(model: &MolecularModel<T>, field: &DrivingField<T>, order: usize) -> Result<SignalTrace<T>> {
    if order > 3 {
        return Err(Error::InvalidOrder(order));
    }
    let eng = ResponseEngine::new(model, field)?;
    if order > 0 {
        return Ok(energy_exchange_of(&eng.current(order)?));
    }
    let traces: Vec<_> = eng.currents(3)?.iter().map(energy_exchange_of).collect();
    let mut total = traces[0].clone();
    total.order = 0;
    for t in &traces[1..] {
        for (a, b) in total.values.iter_mut().zip(&t.values) {
            *a = *a + *b;
        }
    }
    Ok(total)
}

/// Uniform value of each `E` term, or an error if any term varies over the grid.
fn uniform_terms<T: Real>(model: &MolecularModel<T>, terms: &[ETerm<T>]) -> Result<Vec<[T; 3]>> {
    let mut out = Vec::with_capacity(terms.len());
    for term in terms {
        let s = term.spatial.sample(&model.grid)?;
        let v0 = s.at(0);
        let scale = s.max_abs().as_f64();
        let mut dev = 0.0f64;
        for idx in 0..model.grid.len() {
            let v = s.at(idx);
            for c in 0..3 {
                dev = dev.max((v[c] - v0[c]).norm().as_f64());
            }
        }
        if scale > 0.0 && dev > 1e-10 * scale {
            return Err(Error::NonUniformField(dev / scale));
        }
        out.push([v0[0].re, v0[1].re, v0[2].re]);
    }
    Ok(out)
}

/// Spatially uniform `E(t_k)` of a field, with a uniformity check.
pub fn uniform_e_series<T: Real>(model: &MolecularModel<T>, field: &DrivingField<T>) -> Result<Vec<[T; 3]>> {
    let terms = field.e_terms();
    let vecs = uniform_terms(model, &terms)?;
    Ok(field
        .time_grid
        .times()
        .iter()
        .map(|&t| {
            let mut e = [T::zero(); 3];
            for (term, v) in terms.iter().zip(&vecs) {
                let w = term.time.value(t);
                for c in 0..3 {
                    e[c] = e[c] + v[c] * w;
                }
            }
            e
        })
        .collect())
}

/// Dipole-limit first-order energy exchange, computed without any current
/// density: the length-form coupling `−μ·E(t)` drives `ρ`, the polarisation
/// is `P = Tr(μ ρ)`, and `ΔẆ_d = −E·dP/dt` with `dP/dt` taken from the
/// equation of motion.
pub fn dipole_linear_exchange<T: Real>(model: &MolecularModel<T>, field: &DrivingField<T>) -> Result<SignalTrace<T>> {
    field.check_switched_off()?;
    let e = uniform_e_series(model, field)?;
    let n = model.n_states();
    let mu = dipole_moments(model);
    let mu_m: [CMat<T>; 3] = [0, 1, 2].map(|c| CMat::from_fn(n, |a, b| mu.get(a, b)[c]));
    let hbar = model.units.hbar;
    let rho0 = equilibrium(model);
    let coupling: Vec<CMat<T>> = e
        .iter()
        .map(|ek| {
            let mut v = CMat::zeros(n);
            for c in 0..3 {
                v.axpy(cplx(-ek[c], T::zero()), &mu_m[c]);
            }
            v
        })
        .collect();
    let mi = cplx(T::zero(), -T::one() / hbar);
    let f: Vec<CMat<T>> = coupling.iter().map(|v| v.commutator(&rho0).scale(mi)).collect();
    let d = Dressing::from_model(model);
    let rho1 = dressed_cumulative(&d, &f, field.time_grid.dt);
    // dρ/dt = −(iω + η)∘ρ + f
    let decay = CMat::from_fn(n, |a, b| cplx(-model.eta(a, b), -model.omega(a, b)));
    let values = rho1
        .iter()
        .zip(&f)
        .zip(&e)
        .map(|((r, fk), ek)| {
            let rdot = &decay.hadamard(r) + fk;
            let mut acc = czero();
            for c in 0..3 {
                acc = acc + mu_m[c].trace_product(&rdot) * ek[c];
            }
            -acc
        })
        .collect();
    Ok(SignalTrace {
        kind: SignalKind::EnergyExchange,
        order: 1,
        axis: field.time_grid.times(),
        values,
        axis_unit: "atomic_time",
        value_unit: "hartree/atomic_time",
    })
}

/// Ground-state expectation `⟨0|[μ_k, u_s]|0⟩` from grid moments.
pub fn mu_u_commutator<T: Real>(model: &MolecularModel<T>) -> [[Cplx<T>; 3]; 3] {
    let n = model.n_states();
    let mu = dipole_moments(model);
    let u = current_integrals(model);
    let rho0 = equilibrium(model);
    let mut out = [[czero(); 3]; 3];
    for k in 0..3 {
        let mk = CMat::from_fn(n, |a, b| mu.get(a, b)[k]);
        for s in 0..3 {
            let us = CMat::from_fn(n, |a, b| u.get(a, b)[s]);
            out[k][s] = rho0.trace_product(&mk.commutator(&us));
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SpectraOptions<T> {
    /// Unit polarisation of the probing field.
    pub polarization: [T; 3],
    /// Monochromatic field amplitude `|E₀|`.
    pub e0: T,
    /// Number density; defaults to one molecule per grid box.
    pub n0: Option<T>,
    /// Reference (ground) state index.
    pub ground: usize,
}

impl<T: Real> Default for SpectraOptions<T> {
    fn default() -> Self {
        SpectraOptions {
            polarization: [T::zero(), T::zero(), T::one()],
            e0: T::one(),
            n0: None,
            ground: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSpectra<T> {
    pub dipole: SignalTrace<T>,
    pub naive_mc: SignalTrace<T>,
    pub exchange_dipole: SignalTrace<T>,
    pub exchange_naive_mc: SignalTrace<T>,
}

fn project3<T: Real>(v: &[Cplx<T>; 3], e: &[T; 3]) -> Cplx<T> {
    v[0] * e[0] + v[1] * e[1] + v[2] * e[2]
}

struct Resonance<T> {
    weight: T,
    mu2: T,
    u2: T,
    omega: T,
    eta: T,
}

fn resonances<T: Real>(model: &MolecularModel<T>, opts: &SpectraOptions<T>) -> Result<Vec<Resonance<T>>> {
    let mu = dipole_moments(model);
    let u = current_integrals(model);
    let g = opts.ground;
    let mut out = Vec::new();
    for a in 0..model.n_states() {
        if a == g {
            continue;
        }
        let m = project3(mu.get(a, g), &opts.polarization).norm_sqr();
        let uu = project3(u.get(a, g), &opts.polarization).norm_sqr();
        if m == T::zero() && uu == T::zero() {
            continue;
        }
        let eta = model.eta(a, g);
        if eta <= T::zero() {
            return Err(Error::ZeroLinewidth { alpha: a, beta: g });
        }
        out.push(Resonance {
            weight: model.populations[a] - model.populations[g],
            mu2: m,
            u2: uu,
            omega: model.omega(a, g),
            eta,
        });
    }
    Ok(out)
}

fn number_density<T: Real>(model: &MolecularModel<T>, opts: &SpectraOptions<T>) -> T {
    opts.n0.unwrap_or_else(|| T::one() / model.grid.box_volume())
}

/// Sum-over-states spectra
/// `𝒮_d(ω) = (n₀/ħ) Σ_α (P_α − P₀)|μ_{α0}|²/(ω − ω_{α0} + iη_{α0})` and the
/// same with `|j_{α0}|²` for naive minimal coupling, plus the monochromatic
/// exchanges `ΔW_d = −2|E₀|²ω Im 𝒮_d` and `ΔW_mc = −2|A₀|²ω Im 𝒮_mc` with
/// `|A₀| = |E₀|/ω`.
pub fn linear_spectra<T: Real>(model: &MolecularModel<T>, omegas: &[T], opts: &SpectraOptions<T>) -> Result<LinearSpectra<T>> {
    let res = resonances(model, opts)?;
    let n0 = number_density(model, opts);
    let pref = n0 / model.units.hbar;
    let sum = |w: T, sel: &dyn Fn(&Resonance<T>) -> T| {
        res.iter().fold(czero::<T>(), |acc, r| {
            acc + cplx(r.weight * sel(r), T::zero()) / cplx(w - r.omega, r.eta)
        }) * pref
    };
    let sd: Vec<Cplx<T>> = omegas.iter().map(|&w| sum(w, &|r| r.mu2)).collect();
    let smc: Vec<Cplx<T>> = omegas.iter().map(|&w| sum(w, &|r| r.u2)).collect();
    let e2 = opts.e0 * opts.e0;
    let two = T::lit(2.0);
    let wd = omegas
        .iter()
        .zip(&sd)
        .map(|(&w, s)| cplx(-two * e2 * w * s.im, T::zero()))
        .collect();
    let wmc = omegas
        .iter()
        .zip(&smc)
        .map(|(&w, s)| cplx(-two * (e2 / (w * w)) * w * s.im, T::zero()))
        .collect();
    let mk = |kind, values, unit| SignalTrace {
        kind,
        order: 1,
        axis: omegas.to_vec(),
        values,
        axis_unit: "hartree/hbar",
        value_unit: unit,
    };
    Ok(LinearSpectra {
        dipole: mk(SignalKind::SpectrumDipole, sd, "bohr^-1/hartree"),
        naive_mc: mk(SignalKind::SpectrumNaiveMc, smc, "bohr^-1 hartree"),
        exchange_dipole: mk(SignalKind::ExchangeDipole, wd, "hartree/atomic_time/bohr^3"),
        exchange_naive_mc: mk(SignalKind::ExchangeNaiveMc, wmc, "hartree/atomic_time/bohr^3"),
    })
}

/// `𝒮_d(ω) = (n₀/ħ)(−i)∫₀^∞ C(τ) e^{iωτ} dτ` evaluated by trapezoidal
/// quadrature of the dressed dipole correlation
/// `C(τ) = Σ_α (P_α − P₀) μ_{0α}(τ) μ_{α0}` on `[0, τ_max]`.
pub fn spectrum_dipole_discrete<T: Real>(
    model: &MolecularModel<T>,
    omegas: &[T],
    opts: &SpectraOptions<T>,
    dt: T,
    tau_max: T,
) -> Result<SignalTrace<T>> {
    resonances(model, opts)?;
    let n = model.n_states();
    let g = opts.ground;
    let mu = dipole_moments(model);
    let m = CMat::from_fn(n, |a, b| project3(mu.get(a, b), &opts.polarization));
    let nt = (tau_max / dt).ceil().to_usize().unwrap_or(2).max(2);
    let tg = TimeGrid::new(T::zero(), dt, nt)?;
    let dressed = heisenberg_dress(model, &vec![m.clone(); nt], &tg, T::zero());
    let corr: Vec<Cplx<T>> = dressed
        .iter()
        .map(|dm| {
            (0..n)
                .filter(|&a| a != g)
                .fold(czero(), |acc, a| {
                    acc + dm[(g, a)] * m[(a, g)] * (model.populations[a] - model.populations[g])
                })
        })
        .collect();
    let pref = cplx(T::zero(), -number_density(model, opts) / model.units.hbar);
    let values = omegas
        .iter()
        .map(|&w| {
            let f: Vec<Cplx<T>> = corr
                .iter()
                .enumerate()
                .map(|(k, c)| *c * cis(w * tg.t(k)))
                .collect();
            *cumulative_trapezoid_c(&f, dt).last().unwrap() * pref
        })
        .collect();
    Ok(SignalTrace {
        kind: SignalKind::SpectrumDipole,
        order: 1,
        axis: omegas.to_vec(),
        values,
        axis_unit: "hartree/hbar",
        value_unit: "bohr^-1/hartree",
    })
}

/// Complex heterodyne envelope with analytic derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HetEnvelope<T> {
    Constant(Cplx<T>),
    Gaussian { amp: Cplx<T>, center: T, width: T },
}

impl<T: Real> HetEnvelope<T> {
    pub fn value(&self, t: T) -> Cplx<T> {
        match *self {
            HetEnvelope::Constant(c) => c,
            HetEnvelope::Gaussian { amp, center, width } => {
                let x = (t - center) / width;
                amp * (-x * x / T::lit(2.0)).exp()
            }
        }
    }

    pub fn derivative(&self, t: T) -> Cplx<T> {
        match *self {
            HetEnvelope::Constant(_) => czero(),
            HetEnvelope::Gaussian { center, width, .. } => self.value(t) * (-(t - center) / (width * width)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HetSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy)]
pub struct HeterodyneMode<T> {
    pub q: [T; 3],
    pub polarization: [T; 3],
    pub omega: T,
    pub e_env: HetEnvelope<T>,
    pub a_env: HetEnvelope<T>,
    pub sign: HetSign,
    /// Quantisation volume; defaults to the grid box volume.
    pub volume: Option<T>,
}

impl<T: Real> HeterodyneMode<T> {
    fn validate(&self) -> Result<()> {
        let e = self.polarization;
        let qe = (self.q[0] * e[0] + self.q[1] * e[1] + self.q[2] * e[2]).abs().as_f64();
        if qe > 1e-12 {
            return Err(Error::NonTransverse(qe));
        }
        let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt().as_f64();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidField(format!("heterodyne polarization norm {norm}")));
        }
        if !(self.omega > T::zero()) {
            return Err(Error::InvalidField("heterodyne carrier must be positive".into()));
        }
        Ok(())
    }

    /// `ε = (2πħω_s/V)^{1/2}`.
    pub fn normalization(&self, model: &MolecularModel<T>) -> T {
        let v = self.volume.unwrap_or_else(|| model.grid.box_volume());
        (T::lit(2.0) * T::PI() * model.units.hbar * self.omega / v).sqrt()
    }
}

/// `∫ e^{−iq·r} e_s·J(r,t) dr` summed over the supplied orders.
pub fn heterodyne_projection<T: Real>(currents: &[InducedCurrent<T>], mode: &HeterodyneMode<T>) -> Result<Vec<Cplx<T>>> {
    mode.validate()?;
    let first = currents.first().ok_or(Error::InvalidOrder(0))?;
    let grid = first.model().grid;
    let f = VectorFieldG::from_fn(grid, |r| {
        let ph = cis(-(mode.q[0] * r[0] + mode.q[1] * r[1] + mode.q[2] * r[2]));
        mode.polarization.map(|c| ph * c)
    });
    let mut out = vec![czero(); first.time_grid.n_t];
    for j in currents {
        for (o, v) in out.iter_mut().zip(j.projected(&f)?) {
            *o = *o + v;
        }
    }
    Ok(out)
}

/// Heterodyne signal
/// `S = X + X*`, `X = (Ē̇* ± Ā̇*) K ∫^t P + (Ē* ± Ā*) K P`, with
/// `P(t) = e^{iω_s t}∫ e^{−iq_s·r} e_s·J(r,t) dr` and `K = icε/(ħω_s)`.
pub fn heterodyne_signal<T: Real>(
    model: &MolecularModel<T>,
    field: &DrivingField<T>,
    mode: &HeterodyneMode<T>,
    max_order: usize,
) -> Result<SignalTrace<T>> {
    mode.validate()?;
    if !(1..=3).contains(&max_order) {
        return Err(Error::InvalidOrder(max_order));
    }
    let currents = ResponseEngine::new(model, field)?.currents(max_order)?;
    heterodyne_from_currents(model, &currents, mode)
}

pub fn heterodyne_from_currents<T: Real>(
    model: &MolecularModel<T>,
    currents: &[InducedCurrent<T>],
    mode: &HeterodyneMode<T>,
) -> Result<SignalTrace<T>> {
    let proj = heterodyne_projection(currents, mode)?;
    let tg = currents[0].time_grid;
    let times = tg.times();
    let p: Vec<Cplx<T>> = proj.iter().zip(&times).map(|(v, &t)| *v * cis(mode.omega * t)).collect();
    let cum = cumulative_trapezoid_c(&p, tg.dt);
    let k = cplx(T::zero(), model.units.c * mode.normalization(model) / (model.units.hbar * mode.omega));
    let s = match mode.sign {
        HetSign::Plus => T::one(),
        HetSign::Minus => -T::one(),
    };
    let values = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let wdot = mode.e_env.derivative(t).conj() + mode.a_env.derivative(t).conj() * s;
            let w = mode.e_env.value(t).conj() + mode.a_env.value(t).conj() * s;
            let x = wdot * k * cum[i] + w * k * p[i];
            cplx((x + x.conj()).re, T::zero())
        })
        .collect();
    Ok(SignalTrace {
        kind: SignalKind::Heterodyne,
        order: currents.last().map_or(0, |c| c.order),
        axis: times,
        values,
        axis_unit: "atomic_time",
        value_unit: "photons/atomic_time",
    })
}

/// Spatially uniform vector profile check used by callers that need the
/// dipole limit.
pub fn is_uniform<T: Real>(model: &MolecularModel<T>, p: &VectorProfile<T>) -> bool {
    p.sample(&model.grid)
        .map(|s| {
            let v0 = s.at(0);
            (0..model.grid.len()).all(|i| {
                let v = s.at(i);
                (0..3).all(|c| (v[c] - v0[c]).norm() <= T::lit(1e-10) * s.max_abs())
            })
        })
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Envelope, FieldMode};
    use crate::grid::{Grid3D, ScalarFieldG};
    use crate::model::{build_model_from_charges, gaussian_density, ChargeSet, PairMap};
    use crate::units::Units;

    fn tlm(eta: f64) -> MolecularModel<f64> {
        let grid = Grid3D::<f64>::centered(10, 0.6).unwrap();
        let s10 = ScalarFieldG::from_fn(grid, |[x, y, z]| cplx(0.5 * z * (-(x * x + y * y + z * z) / 2.0).exp(), 0.0));
        let s00 = gaussian_density(grid, [0.0; 3], 1.0, 1.0);
        build_model_from_charges(ChargeSet {
            energies: vec![0.0, 0.1],
            populations: vec![1.0, 0.0],
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

    fn uniform_field(amp: f64, q: f64) -> DrivingField<f64> {
        let tg = TimeGrid::new(0.0, 0.2, 600).unwrap();
        DrivingField::new(
            vec![FieldMode::plane_wave(
                amp,
                0.1,
                [q, 0.0, 0.0],
                [0.0, 0.0, 1.0],
                Envelope::Gaussian {
                    center: 60.0,
                    width: 9.0,
                },
            )],
            tg,
        )
        .unwrap()
    }

    #[test]
    fn csv_format() {
        let t = SignalTrace {
            kind: SignalKind::EnergyExchange,
            order: 2,
            axis: vec![0.0, 0.5],
            values: vec![cplx(1.0, 0.0), cplx(-1.0 / 3.0, 0.25)],
            axis_unit: "atomic_time",
            value_unit: "hartree/atomic_time",
        };
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# energy_exchange, 2, atomic_time, hartree/atomic_time");
        assert_eq!(lines[2], "5.0000000000000000e-1,-3.3333333333333331e-1,2.5000000000000000e-1");
    }

    #[test]
    fn energy_exchange_zero_and_scaling() {
        let m = tlm(0.01);
        let z = energy_exchange(&m, &DrivingField::zero(TimeGrid::new(0.0, 0.2, 40).unwrap()), 1).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
        for n in 1..=3 {
            let a = energy_exchange(&m, &uniform_field(0.01, 0.0), n).unwrap();
            let b = energy_exchange(&m, &uniform_field(0.02, 0.0), n).unwrap();
            let s = 2f64.powi(n as i32 + 1);
            let scale = a.values.iter().fold(0.0f64, |x, v| x.max(v.norm()));
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((*x * s - y).norm() <= 1e-12 * scale * s);
                assert!(x.im.abs() <= 1e-10 * scale);
            }
        }
        assert!(energy_exchange(&m, &uniform_field(0.01, 0.0), 4).is_err());
    }

    #[test]
    fn absorption_drains_field_energy() {
        let m = tlm(0.01);
        let w = energy_exchange(&m, &uniform_field(0.01, 0.0), 1).unwrap();
        assert!(w.integral().re < 0.0);
    }

    #[test]
    fn dipole_route_rejects_non_uniform_field() {
        let m = tlm(0.01);
        assert!(matches!(
            dipole_linear_exchange(&m, &uniform_field(0.01, 0.3)),
            Err(Error::NonUniformField(_))
        ));
        let z = dipole_linear_exchange(&m, &DrivingField::zero(TimeGrid::new(0.0, 0.2, 40).unwrap())).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn lorentzian_ratio_and_discrete_transform() {
        let m = tlm(0.002);
        let omegas: Vec<f64> = (0..41).map(|i| 0.08 + 0.001 * i as f64).collect();
        let sp = linear_spectra(&m, &omegas, &SpectraOptions::default()).unwrap();
        for (i, &w) in omegas.iter().enumerate() {
            let r = sp.exchange_naive_mc.values[i] / sp.exchange_dipole.values[i];
            assert!((r.norm() - (0.1 / w).powi(2)).abs() < 1e-8 * r.norm());
        }
        let disc = spectrum_dipole_discrete(&m, &omegas, &SpectraOptions::default(), 0.25, 20.0 / 0.002).unwrap();
        let scale = sp.dipole.values.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        for (a, b) in disc.values.iter().zip(&sp.dipole.values) {
            assert!((a - b).norm() < 1e-3 * scale, "{a} {b}");
        }
        assert!(matches!(
            linear_spectra(&tlm(0.0), &omegas, &SpectraOptions::default()),
            Err(Error::ZeroLinewidth { .. })
        ));
    }

    #[test]
    fn heterodyne_basics() {
        let m = tlm(0.01);
        let f = uniform_field(0.01, 0.0);
        let mut mode = HeterodyneMode {
            q: [0.0, 0.0, 0.0],
            polarization: [0.0, 0.0, 1.0],
            omega: 0.1,
            e_env: HetEnvelope::Constant(cplx(1.0, 0.0)),
            a_env: HetEnvelope::Constant(cplx(0.0, 0.5)),
            sign: HetSign::Plus,
            volume: None,
        };
        let cur = ResponseEngine::new(&m, &f).unwrap().currents(1).unwrap();
        let plus = heterodyne_from_currents(&m, &cur, &mode).unwrap();
        // Constant envelopes and q → 0: S = 2 Re[(Ē* + Ā*) K e^{iωt} ∫ e_s·J].
        let tot = cur[0].total().unwrap();
        let k = cplx(0.0, m.units.c * mode.normalization(&m) / (m.units.hbar * mode.omega));
        let w = cplx(1.0, -0.5);
        for (i, &t) in f.time_grid.times().iter().enumerate() {
            let x = w * k * cis(0.1 * t) * tot[i][2];
            assert!((plus.values[i].re - 2.0 * x.re).abs() <= 1e-12 * (x.norm() + 1e-30));
        }
        mode.sign = HetSign::Minus;
        let minus = heterodyne_from_currents(&m, &cur, &mode).unwrap();
        for (i, &t) in f.time_grid.times().iter().enumerate() {
            let a_part = cplx(0.0, -0.5) * k * cis(0.1 * t) * tot[i][2];
            let diff = plus.values[i].re - minus.values[i].re;
            assert!((diff - 4.0 * a_part.re).abs() <= 1e-12 * (a_part.norm() + 1e-30));
        }
        mode.polarization = [1.0, 0.0, 0.0];
        mode.q = [0.2, 0.0, 0.0];
        assert!(matches!(heterodyne_from_currents(&m, &cur, &mode), Err(Error::NonTransverse(_))));
        let z = heterodyne_signal(
            &m,
            &DrivingField::zero(TimeGrid::new(0.0, 0.2, 40).unwrap()),
            &HeterodyneMode {
                q: [0.0; 3],
                polarization: [0.0, 0.0, 1.0],
                ..mode
            },
            3,
        )
        .unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
    }
}
