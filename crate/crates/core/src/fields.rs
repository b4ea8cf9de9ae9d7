//! Space–time driving fields.
//!
//! Every potential is a finite sum of separable terms `S(r)·g(t)`. Vector
//! potential terms give `E = S ġ / κ`; scalar potential terms `a(r)·h(t)` give
//! `E = −∇a h`. Here `κ` is the `a_dot_convention` (1 or c). Because all
//! spatial and temporal factors are closed forms, `E` and
//! `A^inv = ∫E dt` are obtained without numerical differentiation.

use crate::error::{Error, Result};
use crate::grid::{Grid3D, ScalarFieldG, VectorFieldG};
use crate::scalar::{cplx, Cplx, Real};
use crate::units::Units;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub t0: T,
    pub dt: T,
    pub n_t: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, dt: T, n_t: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidField("time step must be positive".into()));
        }
        if n_t < 2 {
            return Err(Error::InvalidField("time grid needs at least 2 points".into()));
        }
        Ok(TimeGrid { t0, dt, n_t })
    }

    #[inline]
    pub fn t(&self, k: usize) -> T {
        self.t0 + T::nu(k) * self.dt
    }

    pub fn end(&self) -> T {
        self.t(self.n_t - 1)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.n_t).map(|k| self.t(k)).collect()
    }

    pub fn check(&self, t: T) -> Result<()> {
        let slack = self.dt * T::lit(1e-9);
        if t < self.t0 - slack || t > self.end() + slack || !t.is_finite() {
            return Err(Error::TimeOutOfRange {
                t: t.as_f64(),
                start: self.t0.as_f64(),
                end: self.end().as_f64(),
            });
        }
        Ok(())
    }
}

/// Cumulative trapezoidal integral of uniformly sampled values, starting at 0.
pub fn cumulative_trapezoid<T: Real>(f: &[T], dt: T) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = T::zero();
    let half = dt / T::lit(2.0);
    for (k, v) in f.iter().enumerate() {
        if k > 0 {
            acc = acc + half * (f[k - 1] + *v);
        }
        out.push(acc);
    }
    out
}

/// Complex variant of [`cumulative_trapezoid`].
pub fn cumulative_trapezoid_c<T: Real>(f: &[Cplx<T>], dt: T) -> Vec<Cplx<T>> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = cplx(T::zero(), T::zero());
    let half = dt / T::lit(2.0);
    for (k, v) in f.iter().enumerate() {
        if k > 0 {
            acc = acc + (f[k - 1] + *v) * half;
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope<T> {
    /// `exp(−(t−t_c)²/2τ²) − e^{−18}` on `|t − t_c| ≤ 6τ`, zero outside,
    /// rescaled to unit peak. The offset makes the truncation continuous.
    Gaussian { center: T, width: T },
    /// Half-cosine ramp up over `ramp`, flat for `plateau`, ramp down.
    FlatTop { start: T, ramp: T, plateau: T },
}

const GAUSS_CUT: f64 = 6.0;

impl<T: Real> Envelope<T> {
    fn validate(&self) -> Result<()> {
        match *self {
            Envelope::Gaussian { width, .. } if !(width > T::zero()) => {
                Err(Error::InvalidField("Gaussian width must be positive".into()))
            }
            Envelope::FlatTop { ramp, plateau, .. } if !(ramp > T::zero()) || plateau < T::zero() => {
                Err(Error::InvalidField("flat-top ramp must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Support `[start, end]` plus interior kinks, in increasing order.
    pub fn breakpoints(&self) -> Vec<T> {
        match *self {
            Envelope::Gaussian { center, width } => {
                let c = T::lit(GAUSS_CUT) * width;
                vec![center - c, center, center + c]
            }
            Envelope::FlatTop {
                start,
                ramp,
                plateau,
            } => vec![start, start + ramp, start + ramp + plateau, start + ramp + plateau + ramp],
        }
    }

    /// Value and time derivative.
    pub fn eval(&self, t: T) -> (T, T) {
        match *self {
            Envelope::Gaussian { center, width } => {
                let x = (t - center) / width;
                if x.abs() > T::lit(GAUSS_CUT) {
                    return (T::zero(), T::zero());
                }
                let floor = T::lit((-GAUSS_CUT * GAUSS_CUT / 2.0).exp());
                let norm = T::one() / (T::one() - floor);
                let g = (-x * x / T::lit(2.0)).exp();
                ((g - floor) * norm, -g * x / width * norm)
            }
            Envelope::FlatTop {
                start,
                ramp,
                plateau,
            } => {
                let half = T::lit(0.5);
                let up_end = start + ramp;
                let down = up_end + plateau;
                if t <= start || t >= down + ramp {
                    (T::zero(), T::zero())
                } else if t < up_end {
                    let a = T::PI() * (t - start) / ramp;
                    (half * (T::one() - a.cos()), half * T::PI() / ramp * a.sin())
                } else if t <= down {
                    (T::one(), T::zero())
                } else {
                    let a = T::PI() * (t - down) / ramp;
                    (half * (T::one() + a.cos()), -half * T::PI() / ramp * a.sin())
                }
            }
        }
    }

    /// Natural time scale used to size quadrature panels.
    fn scale(&self) -> T {
        match *self {
            Envelope::Gaussian { width, .. } => width,
            Envelope::FlatTop { ramp, .. } => ramp,
        }
    }
}

/// Carrier-modulated temporal profile `env(t)·cos(ωt + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile<T> {
    pub envelope: Envelope<T>,
    pub omega: T,
    pub phase: T,
}

impl<T: Real> Profile<T> {
    pub fn value(&self, t: T) -> T {
        self.envelope.eval(t).0 * (self.omega * t + self.phase).cos()
    }

    pub fn derivative(&self, t: T) -> T {
        let (e, de) = self.envelope.eval(t);
        let arg = self.omega * t + self.phase;
        de * arg.cos() - e * self.omega * arg.sin()
    }

    /// `∫_{t0}^{t} value`, by 8-point Gauss–Legendre panels aligned with the
    /// envelope kinks.
    pub fn antiderivative(&self, t0: T, t: T) -> T {
        if t <= t0 {
            return T::zero();
        }
        let bp = self.envelope.breakpoints();
        let lo = t0.max(bp[0]);
        let hi = t.min(*bp.last().unwrap());
        if hi <= lo {
            return T::zero();
        }
        let mut cuts = vec![lo];
        cuts.extend(bp.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        let mut width = self.envelope.scale() / T::lit(4.0);
        if self.omega != T::zero() {
            width = width.min(T::PI() / (T::lit(4.0) * self.omega.abs()));
        }
        let mut acc = T::zero();
        for w in cuts.windows(2) {
            let span = w[1] - w[0];
            let panels = (span / width).ceil().to_usize().unwrap_or(1).max(1);
            let h = span / T::nu(panels);
            for p in 0..panels {
                let a = w[0] + T::nu(p) * h;
                acc = acc + gauss_legendre8(|x| self.value(x), a, a + h);
            }
        }
        acc
    }
}

fn gauss_legendre8<T: Real>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    const NODES: [(f64, f64); 4] = [
        (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
        (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    ];
    let mid = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let mut s = T::zero();
    for (x, w) in NODES {
        let dx = half * T::lit(x);
        s = s + T::lit(w) * (f(mid - dx) + f(mid + dx));
    }
    s * half
}

/// Time factor of a separable term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temporal<T> {
    Value(Profile<T>),
    /// Time derivative of the profile (its antiderivative is exact).
    Derivative(Profile<T>),
}

impl<T: Real> Temporal<T> {
    pub fn value(&self, t: T) -> T {
        match self {
            Temporal::Value(p) => p.value(t),
            Temporal::Derivative(p) => p.derivative(t),
        }
    }

    pub fn derivative(&self, t: T) -> T {
        match self {
            Temporal::Value(p) => p.derivative(t),
            Temporal::Derivative(p) => {
                // Central difference on an analytic function; used only for
                // scalar potentials paired with vector terms in tests.
                let h = T::lit(1e-5);
                (p.derivative(t + h) - p.derivative(t - h)) / (T::lit(2.0) * h)
            }
        }
    }

    pub fn antiderivative(&self, t0: T, t: T) -> T {
        match self {
            Temporal::Value(p) => p.antiderivative(t0, t),
            Temporal::Derivative(p) => p.value(t) - p.value(t0),
        }
    }
}

/// Analytic scalar spatial factor with analytic gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarProfile<T> {
    /// `g·r`
    Linear { g: [T; 3] },
    /// `amp·sin(k·r)`
    Sine { amp: T, k: [T; 3] },
}

fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl<T: Real> ScalarProfile<T> {
    pub fn value(&self, r: [T; 3]) -> T {
        match *self {
            ScalarProfile::Linear { g } => dot3(g, r),
            ScalarProfile::Sine { amp, k } => amp * dot3(k, r).sin(),
        }
    }

    pub fn gradient(&self, r: [T; 3]) -> [T; 3] {
        match *self {
            ScalarProfile::Linear { g } => g,
            ScalarProfile::Sine { amp, k } => {
                let c = amp * dot3(k, r).cos();
                k.map(|kk| kk * c)
            }
        }
    }
}

/// Vector spatial factor.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorProfile<T> {
    /// `amp·cos(q·r + phase)·exp(−κ·r)`
    Wave {
        amp: [T; 3],
        q: [T; 3],
        kappa: [T; 3],
        phase: T,
    },
    /// `scale·∇s(r)`
    Gradient { scalar: ScalarProfile<T>, scale: T },
    /// Sampled profile; only evaluable on its own grid.
    Gridded(VectorFieldG<T>),
}

impl<T: Real> VectorProfile<T> {
    pub fn at(&self, r: [T; 3]) -> Result<[T; 3]> {
        match self {
            VectorProfile::Wave {
                amp,
                q,
                kappa,
                phase,
            } => {
                let f = (dot3(*q, r) + *phase).cos() * (-dot3(*kappa, r)).exp();
                Ok(amp.map(|a| a * f))
            }
            VectorProfile::Gradient { scalar, scale } => Ok(scalar.gradient(r).map(|g| g * *scale)),
            VectorProfile::Gridded(_) => Err(Error::InvalidField(
                "gridded profile has no off-grid values".into(),
            )),
        }
    }

    pub fn sample(&self, grid: &Grid3D<T>) -> Result<VectorFieldG<T>> {
        match self {
            VectorProfile::Gridded(f) => {
                grid.ensure_same(&f.grid, "gridded field profile")?;
                Ok(f.clone())
            }
            other => {
                let mut out = VectorFieldG::zeros(*grid);
                for idx in 0..grid.len() {
                    let v = other.at(grid.point(idx))?;
                    for k in 0..3 {
                        out.comps[k][idx] = cplx(v[k], T::zero());
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeKind<T> {
    PlaneWave { q: [T; 3] },
    /// Plane wave along `q` decaying as `exp(−κ·r)`.
    Evanescent { q: [T; 3], kappa: [T; 3] },
    /// `F(r)·env(t)·cos(ωt)`; the polarization is carried by `F`.
    Gridded { profile: VectorFieldG<T> },
}

/// One mode of the vector potential,
/// `A = amplitude·e·env(t)·cos(q·r − ωt)` (times `exp(−κ·r)` if evanescent).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMode<T> {
    pub kind: ModeKind<T>,
    pub amplitude: T,
    pub omega: T,
    pub polarization: [T; 3],
    pub envelope: Envelope<T>,
}

impl<T: Real> FieldMode<T> {
    pub fn plane_wave(amplitude: T, omega: T, q: [T; 3], polarization: [T; 3], envelope: Envelope<T>) -> Self {
        FieldMode {
            kind: ModeKind::PlaneWave { q },
            amplitude,
            omega,
            polarization,
            envelope,
        }
    }

    fn validate(&self) -> Result<()> {
        self.envelope.validate()?;
        if let ModeKind::Gridded { .. } = self.kind {
            return Ok(());
        }
        let e = self.polarization;
        let norm = dot3(e, e).sqrt().as_f64();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidField(format!("polarization norm {norm} ≠ 1")));
        }
        if let ModeKind::PlaneWave { q } = self.kind {
            let qe = dot3(q, e).abs().as_f64();
            if qe > 1e-12 {
                return Err(Error::InvalidField(format!("mode not transverse: |q·e| = {qe:.3e}")));
            }
        }
        Ok(())
    }

    fn terms(&self) -> Vec<(VectorProfile<T>, Temporal<T>)> {
        let amp = self.polarization.map(|c| c * self.amplitude);
        let cos_t = Profile {
            envelope: self.envelope,
            omega: self.omega,
            phase: T::zero(),
        };
        let sin_t = Profile {
            phase: -T::FRAC_PI_2(),
            ..cos_t
        };
        // cos(q·r − ωt) = cos(q·r)cos(ωt) + sin(q·r)sin(ωt)
        let wave = |q: [T; 3], kappa: [T; 3]| {
            vec![
                (
                    VectorProfile::Wave {
                        amp,
                        q,
                        kappa,
                        phase: T::zero(),
                    },
                    Temporal::Value(cos_t),
                ),
                (
                    VectorProfile::Wave {
                        amp,
                        q,
                        kappa,
                        phase: -T::FRAC_PI_2(),
                    },
                    Temporal::Value(sin_t),
                ),
            ]
        };
        match &self.kind {
            ModeKind::PlaneWave { q } => wave(*q, [T::zero(); 3]),
            ModeKind::Evanescent { q, kappa } => wave(*q, *kappa),
            ModeKind::Gridded { profile } => vec![(
                VectorProfile::Gridded(profile.scale(cplx(self.amplitude, T::zero()))),
                Temporal::Value(cos_t),
            )],
        }
    }
}

/// Scalar potential term `a(r)·h(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTerm<T> {
    pub spatial: ScalarProfile<T>,
    pub scale: T,
    pub temporal: Temporal<T>,
}

/// Gauge function `φ = s(r)·h(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaugeFn<T> {
    Zero,
    Linear { g: [T; 3], time: Profile<T> },
    Sinusoidal { amp: T, k: [T; 3], time: Profile<T> },
}

impl<T: Real> GaugeFn<T> {
    pub fn value(&self, r: [T; 3], t: T) -> T {
        match self.parts() {
            Some((s, h)) => s.value(r) * h.value(t),
            None => T::zero(),
        }
    }

    fn parts(&self) -> Option<(ScalarProfile<T>, Profile<T>)> {
        match *self {
            GaugeFn::Zero => None,
            GaugeFn::Linear { g, time } => Some((ScalarProfile::Linear { g }, time)),
            GaugeFn::Sinusoidal { amp, k, time } => Some((ScalarProfile::Sine { amp, k }, time)),
        }
    }
}

/// Separable contribution to `E`: `E = spatial · T(t)` and
/// `A^inv = spatial · I(t)` with `I = ∫_{t0}^{t} T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ETerm<T> {
    pub spatial: VectorProfile<T>,
    pub time: ETime<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ETime<T> {
    /// From a vector potential term `S·g`: `T = ġ/κ`, `I = (g − g(t0))/κ`.
    FromA { g: Temporal<T>, kappa: T, t0: T },
    /// From a scalar potential term `a·h`, spatial factor `−∇a`: `T = h`.
    FromA0 { h: Temporal<T>, t0: T },
}

impl<T: Real> ETime<T> {
    pub fn value(&self, t: T) -> T {
        match self {
            ETime::FromA { g, kappa, .. } => g.derivative(t) / *kappa,
            ETime::FromA0 { h, .. } => h.value(t),
        }
    }

    pub fn integral(&self, t: T) -> T {
        match self {
            ETime::FromA { g, kappa, t0 } => (g.value(t) - g.value(*t0)) / *kappa,
            ETime::FromA0 { h, t0 } => h.antiderivative(*t0, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrivingField<T> {
    pub modes: Vec<FieldMode<T>>,
    pub scalar_potential: Vec<ScalarTerm<T>>,
    /// Gauge functions applied so far, in order.
    pub gauge_fns: Vec<GaugeFn<T>>,
    pub time_grid: TimeGrid<T>,
    /// `κ` in `E = Ȧ/κ − ∇A₀`; 1 or c.
    pub a_dot_convention: T,
    pub units: Units<T>,
}

impl<T: Real> DrivingField<T> {
    pub fn new(modes: Vec<FieldMode<T>>, time_grid: TimeGrid<T>) -> Result<Self> {
        for m in &modes {
            m.validate()?;
        }
        Ok(DrivingField {
            modes,
            scalar_potential: Vec::new(),
            gauge_fns: Vec::new(),
            time_grid,
            a_dot_convention: T::one(),
            units: Units::default(),
        })
    }

    pub fn zero(time_grid: TimeGrid<T>) -> Self {
        DrivingField {
            modes: Vec::new(),
            scalar_potential: Vec::new(),
            gauge_fns: Vec::new(),
            time_grid,
            a_dot_convention: T::one(),
            units: Units::default(),
        }
    }

    pub fn with_convention(mut self, kappa: T) -> Self {
        self.a_dot_convention = kappa;
        self
    }

    pub fn with_units(mut self, units: Units<T>) -> Self {
        self.units = units;
        self
    }

    pub fn with_scalar_potential(mut self, terms: Vec<ScalarTerm<T>>) -> Self {
        self.scalar_potential = terms;
        self
    }

    /// Every field scaled by `λ`.
    pub fn scaled(&self, lambda: T) -> Self {
        let mut f = self.clone();
        for m in &mut f.modes {
            m.amplitude = m.amplitude * lambda;
        }
        for s in &mut f.scalar_potential {
            s.scale = s.scale * lambda;
        }
        for g in &mut f.gauge_fns {
            match g {
                GaugeFn::Zero => {}
                GaugeFn::Linear { g, .. } => *g = g.map(|x| x * lambda),
                GaugeFn::Sinusoidal { amp, .. } => *amp = *amp * lambda,
            }
        }
        f
    }

    /// All vector-potential terms `S(r)·g(t)`.
    pub fn a_terms(&self) -> Vec<(VectorProfile<T>, Temporal<T>)> {
        let mut out: Vec<_> = self.modes.iter().flat_map(|m| m.terms()).collect();
        let ec = self.units.charge / self.units.c;
        for g in &self.gauge_fns {
            if let Some((s, h)) = g.parts() {
                out.push((VectorProfile::Gradient { scalar: s, scale: ec }, Temporal::Value(h)));
            }
        }
        out
    }

    /// All scalar-potential terms `a(r)·h(t)`.
    pub fn a0_terms(&self) -> Vec<ScalarTerm<T>> {
        let mut out = self.scalar_potential.clone();
        let scale = self.units.charge / (self.units.c * self.a_dot_convention);
        for g in &self.gauge_fns {
            if let Some((s, h)) = g.parts() {
                out.push(ScalarTerm {
                    spatial: s,
                    scale,
                    temporal: Temporal::Derivative(h),
                });
            }
        }
        out
    }

    /// Separable decomposition of `E` (and hence `A^inv`).
    pub fn e_terms(&self) -> Vec<ETerm<T>> {
        let t0 = self.time_grid.t0;
        let mut out: Vec<ETerm<T>> = self
            .a_terms()
            .into_iter()
            .map(|(s, g)| ETerm {
                spatial: s,
                time: ETime::FromA {
                    g,
                    kappa: self.a_dot_convention,
                    t0,
                },
            })
            .collect();
        for a in self.a0_terms() {
            out.push(ETerm {
                spatial: VectorProfile::Gradient {
                    scalar: a.spatial,
                    scale: -a.scale,
                },
                time: ETime::FromA0 { h: a.temporal, t0 },
            });
        }
        out
    }

    /// Largest envelope value `|A|/peak` among modes at `t0`.
    pub fn check_switched_off(&self) -> Result<()> {
        let t0 = self.time_grid.t0;
        for (i, m) in self.modes.iter().enumerate() {
            let ratio = m.envelope.eval(t0).0.abs().as_f64();
            if ratio > 1e-12 {
                return Err(Error::EnvelopeNotOff { mode: i, ratio });
            }
        }
        Ok(())
    }
}

fn accumulate<T: Real>(out: &mut VectorFieldG<T>, grid: &Grid3D<T>, s: &VectorProfile<T>, w: T) -> Result<()> {
    if w == T::zero() {
        return Ok(());
    }
    let f = s.sample(grid)?;
    for k in 0..3 {
        for (o, v) in out.comps[k].iter_mut().zip(&f.comps[k]) {
            *o = *o + *v * w;
        }
    }
    Ok(())
}

pub fn evaluate_a<T: Real>(field: &DrivingField<T>, grid: &Grid3D<T>, t: T) -> Result<VectorFieldG<T>> {
    field.time_grid.check(t)?;
    let mut out = VectorFieldG::zeros(*grid);
    for (s, g) in field.a_terms() {
        accumulate(&mut out, grid, &s, g.value(t))?;
    }
    Ok(out)
}

pub fn evaluate_e<T: Real>(field: &DrivingField<T>, grid: &Grid3D<T>, t: T) -> Result<VectorFieldG<T>> {
    field.time_grid.check(t)?;
    let mut out = VectorFieldG::zeros(*grid);
    for term in field.e_terms() {
        accumulate(&mut out, grid, &term.spatial, term.time.value(t))?;
    }
    Ok(out)
}

pub fn evaluate_a0<T: Real>(field: &DrivingField<T>, grid: &Grid3D<T>, t: T) -> Result<ScalarFieldG<T>> {
    field.time_grid.check(t)?;
    let mut out = ScalarFieldG::zeros(*grid);
    for a in field.a0_terms() {
        let h = a.temporal.value(t) * a.scale;
        if h == T::zero() {
            continue;
        }
        for (idx, o) in out.values.iter_mut().enumerate() {
            *o = *o + cplx(a.spatial.value(grid.point(idx)) * h, T::zero());
        }
    }
    Ok(out)
}

/// `A^inv(r, t)` on the time grid, stored separably as spatial factors and
/// cumulative-trapezoid integrals of their time factors.
#[derive(Debug, Clone)]
pub struct AinvSeries<T> {
    pub time_grid: TimeGrid<T>,
    pub spatial: Vec<VectorFieldG<T>>,
    /// `integrals[m][k] ≈ ∫_{t0}^{t_k} T_m`.
    pub integrals: Vec<Vec<T>>,
    /// `rates[m][k] = T_m(t_k)`, the time factors of `E`.
    pub rates: Vec<Vec<T>>,
}

impl<T: Real> AinvSeries<T> {
    pub fn at(&self, k: usize) -> VectorFieldG<T> {
        let grid = self.spatial.first().map(|s| s.grid);
        let mut out = match grid {
            Some(g) => VectorFieldG::zeros(g),
            None => return VectorFieldG::zeros(Grid3D::new([1; 3], [T::one(); 3], [T::zero(); 3]).unwrap()),
        };
        for (s, i) in self.spatial.iter().zip(&self.integrals) {
            let w = i[k];
            for c in 0..3 {
                for (o, v) in out.comps[c].iter_mut().zip(&s.comps[c]) {
                    *o = *o + *v * w;
                }
            }
        }
        out
    }

    pub fn n_terms(&self) -> usize {
        self.spatial.len()
    }
}

/// Cumulative trapezoid of `E` on the time grid. Gauge-independent because
/// only `E` enters.
pub fn compute_a_inv<T: Real>(field: &DrivingField<T>, grid: &Grid3D<T>) -> Result<AinvSeries<T>> {
    field.check_switched_off()?;
    let tg = field.time_grid;
    let times = tg.times();
    let mut spatial = Vec::new();
    let mut integrals = Vec::new();
    let mut rates = Vec::new();
    for term in field.e_terms() {
        let r: Vec<T> = times.iter().map(|&t| term.time.value(t)).collect();
        if r.iter().all(|v| *v == T::zero()) {
            continue;
        }
        integrals.push(cumulative_trapezoid(&r, tg.dt));
        rates.push(r);
        spatial.push(term.spatial.sample(grid)?);
    }
    Ok(AinvSeries {
        time_grid: tg,
        spatial,
        integrals,
        rates,
    })
}

/// Returns the field with `A ← A + (e/c)∇φ` and `A₀ ← A₀ + (e/(cκ))∂φ/∂t`.
pub fn apply_gauge<T: Real>(field: &DrivingField<T>, phi: GaugeFn<T>) -> DrivingField<T> {
    let mut out = field.clone();
    if phi != GaugeFn::Zero {
        out.gauge_fns.push(phi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tg() -> TimeGrid<f64> {
        TimeGrid::new(0.0, 0.05, 2048).unwrap()
    }

    fn pulse(omega: f64) -> FieldMode<f64> {
        FieldMode::plane_wave(
            0.01,
            omega,
            [0.0, 0.0, 0.3],
            [1.0, 0.0, 0.0],
            Envelope::Gaussian {
                center: 51.2,
                width: 8.0,
            },
        )
    }

    fn max_dev(a: &VectorFieldG<f64>, b: &VectorFieldG<f64>) -> f64 {
        (0..3)
            .flat_map(|k| a.comps[k].iter().zip(&b.comps[k]).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_field_is_zero() {
        let g = Grid3D::centered(4, 1.0).unwrap();
        let f = DrivingField::zero(tg());
        assert_eq!(evaluate_a(&f, &g, 3.0).unwrap().max_abs(), 0.0);
        assert_eq!(evaluate_e(&f, &g, 3.0).unwrap().max_abs(), 0.0);
        assert_eq!(evaluate_a0(&f, &g, 3.0).unwrap().max_abs(), 0.0);
        assert!(evaluate_e(&f, &g, 200.0).is_err());
    }

    #[test]
    fn plane_wave_matches_closed_form() {
        let env = Envelope::FlatTop {
            start: 0.0,
            ramp: 10.0,
            plateau: 50.0,
        };
        let (amp, w, q) = (0.02, 0.3, [0.0, 0.2, 0.0]);
        let mode = FieldMode::plane_wave(amp, w, q, [0.0, 0.0, 1.0], env);
        let g = Grid3D::new([1, 5, 1], [1.0; 3], [0.0, -2.0, 0.0]).unwrap();
        for kappa in [1.0, 137.035999] {
            let f = DrivingField::new(vec![mode.clone()], tg()).unwrap().with_convention(kappa);
            let t = 33.3;
            let e = evaluate_e(&f, &g, t).unwrap();
            let a = evaluate_a(&f, &g, t).unwrap();
            for idx in 0..g.len() {
                let y = g.point(idx)[1];
                let ph = q[1] * y - w * t;
                assert!((a.comps[2][idx].re - amp * ph.cos()).abs() < 1e-15);
                let expect = amp * w * ph.sin() / kappa;
                assert!((e.comps[2][idx].re - expect).abs() < 1e-15);
                assert_eq!(e.comps[0][idx].re, 0.0);
            }
        }
    }

    #[test]
    fn evanescent_decay_length() {
        let ld = 2.5;
        let mode = FieldMode {
            kind: ModeKind::Evanescent {
                q: [0.4, 0.0, 0.0],
                kappa: [0.0, 0.0, 1.0 / ld],
            },
            amplitude: 1.0,
            omega: 0.1,
            polarization: [0.0, 1.0, 0.0],
            envelope: Envelope::Gaussian {
                center: 50.0,
                width: 5.0,
            },
        };
        let g = Grid3D::new([3, 1, 2], [0.7, 1.0, ld], [0.0, 0.0, -1.0]).unwrap();
        let f = DrivingField::new(vec![mode], tg()).unwrap();
        let a = evaluate_a(&f, &g, 49.0).unwrap();
        for ix in 0..3 {
            let lo = a.comps[1][g.index(ix, 0, 0)].re;
            let hi = a.comps[1][g.index(ix, 0, 1)].re;
            assert!((hi / lo - (-1.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn transversality_and_polarization_enforced() {
        let mut m = pulse(0.1);
        m.kind = ModeKind::PlaneWave { q: [0.3, 0.0, 0.0] };
        assert!(DrivingField::new(vec![m], tg()).is_err());
        let mut m = pulse(0.1);
        m.polarization = [1.0, 1.0, 0.0];
        assert!(DrivingField::new(vec![m], tg()).is_err());
        let mut m = pulse(0.1);
        m.envelope = Envelope::Gaussian {
            center: 1.0,
            width: 0.0,
        };
        assert!(DrivingField::new(vec![m], tg()).is_err());
    }

    #[test]
    fn envelope_must_be_off_at_start() {
        let mut m = pulse(0.1);
        m.envelope = Envelope::Gaussian {
            center: 10.0,
            width: 8.0,
        };
        let f = DrivingField::new(vec![m], tg()).unwrap();
        let g = Grid3D::centered(2, 1.0).unwrap();
        assert!(matches!(compute_a_inv(&f, &g), Err(Error::EnvelopeNotOff { .. })));
    }

    #[test]
    fn a_inv_tracks_a_in_field_gauge() {
        let g = Grid3D::centered(4, 1.0).unwrap();
        let f = DrivingField::new(vec![pulse(0.1)], tg()).unwrap();
        let ai = compute_a_inv(&f, &g).unwrap();
        let mut worst: f64 = 0.0;
        for k in (0..2048).step_by(97) {
            let a = evaluate_a(&f, &g, f.time_grid.t(k)).unwrap();
            worst = worst.max(max_dev(&ai.at(k), &a));
        }
        // Trapezoid error ~ dt²/12 · max|Ë| · T
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn gauge_transforms_leave_e_and_a_inv_unchanged() {
        let g = Grid3D::centered(6, 0.5).unwrap();
        let base = DrivingField::new(vec![pulse(0.1)], tg()).unwrap();
        let time = Profile {
            envelope: Envelope::Gaussian {
                center: 40.0,
                width: 6.0,
            },
            omega: 0.07,
            phase: 0.3,
        };
        let gauges = [
            GaugeFn::Zero,
            GaugeFn::Linear {
                g: [0.5, -1.0, 2.0],
                time,
            },
            GaugeFn::Sinusoidal {
                amp: 3.0,
                k: [std::f64::consts::PI / 1.5, 0.0, std::f64::consts::PI / 3.0],
                time,
            },
        ];
        let a0 = compute_a_inv(&base, &g).unwrap();
        for kappa in [1.0, 137.035999] {
            let base = base.clone().with_convention(kappa);
            let a0k = compute_a_inv(&base, &g).unwrap();
            for phi in gauges {
                let gf = apply_gauge(&base, phi);
                for t in [20.0, 40.0, 41.3, 77.0] {
                    let e1 = evaluate_e(&base, &g, t).unwrap();
                    let e2 = evaluate_e(&gf, &g, t).unwrap();
                    assert!(max_dev(&e1, &e2) <= 1e-12 * e1.max_abs().max(1e-300) + 1e-18);
                }
                let ag = compute_a_inv(&gf, &g).unwrap();
                for k in [0, 500, 800, 1500] {
                    let d = max_dev(&ag.at(k), &a0k.at(k));
                    assert!(d <= 1e-12 * 1e-2, "{d}");
                }
            }
        }
        let _ = a0;
    }

    #[test]
    fn linear_gauge_shifts_a_uniformly() {
        let g = Grid3D::centered(3, 1.0).unwrap();
        let time = Profile {
            envelope: Envelope::FlatTop {
                start: 5.0,
                ramp: 5.0,
                plateau: 10.0,
            },
            omega: 0.0,
            phase: 0.0,
        };
        let base = DrivingField::zero(tg());
        let gf = apply_gauge(
            &base,
            GaugeFn::Linear {
                g: [1.0, 2.0, 3.0],
                time,
            },
        );
        let a = evaluate_a(&gf, &g, 12.0).unwrap();
        let ec = 1.0 / 137.035999;
        for idx in 0..g.len() {
            for k in 0..3 {
                assert!((a.comps[k][idx].re - ec * (k + 1) as f64).abs() < 1e-16);
            }
        }
        assert_eq!(evaluate_a(&apply_gauge(&base, GaugeFn::Zero), &g, 12.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn a_inv_is_linear_in_amplitude() {
        let g = Grid3D::centered(3, 1.0).unwrap();
        let f = DrivingField::new(vec![pulse(0.2)], tg()).unwrap();
        let a1 = compute_a_inv(&f, &g).unwrap();
        let a2 = compute_a_inv(&f.scaled(2.0), &g).unwrap();
        for k in [100, 1000, 2000] {
            let x = a1.at(k).scale(cplx(2.0, 0.0));
            assert_eq!(x, a2.at(k));
        }
    }

    #[test]
    fn profile_antiderivative_matches_closed_form() {
        let p: Profile<f64> = Profile {
            envelope: Envelope::FlatTop {
                start: 1.0,
                ramp: 2.0,
                plateau: 3.0,
            },
            omega: 0.0,
            phase: 0.0,
        };
        // ramp integrates to ramp/2
        assert!((p.antiderivative(0.0, 20.0) - 5.0).abs() < 1e-13);
        let q: Profile<f64> = Profile {
            envelope: Envelope::Gaussian {
                center: 30.0,
                width: 4.0,
            },
            omega: 0.0,
            phase: 0.0,
        };
        let floor = (-18.0f64).exp();
        let exact = (4.0 * (2.0 * std::f64::consts::PI).sqrt() * statrs_erf6() - 48.0 * floor) / (1.0 - floor);
        assert!((q.antiderivative(0.0, 60.0) - exact).abs() < 1e-12);
    }

    // erf(6/√2), tabulated
    fn statrs_erf6() -> f64 {
        0.999_999_998_026_824_9
    }
}
