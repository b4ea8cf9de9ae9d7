//! Synthetic models built from Gaussian-lobe transition charges.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid3D, ScalarFieldG};
use crate::io::{parse_sections, read_text, Section};
use crate::model::{build_model_from_charges, dipole_moments, gaussian_density, ChargeSet, MolecularModel, PairMap};
use crate::scalar::{cis, cplx, Cplx, Real};
use crate::units::Units;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobeKind {
    /// `G(r − c)`: carries net charge.
    S,
    /// `(r − c)_axis G(r − c)`: odd under inversion through `c`.
    P(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lobe<T> {
    pub kind: LobeKind,
    pub amplitude: Cplx<T>,
    pub center: [T; 3],
    pub width: T,
}

impl<T: Real> Lobe<T> {
    fn at(&self, r: [T; 3]) -> Cplx<T> {
        let d = [r[0] - self.center[0], r[1] - self.center[1], r[2] - self.center[2]];
        let g = (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (T::lit(2.0) * self.width * self.width)).exp();
        let s = match self.kind {
            LobeKind::S => g,
            LobeKind::P(a) => d[a] * g,
        };
        self.amplitude * s
    }
}

/// Transition density `σ_{upper,lower}` as a sum of lobes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec<T> {
    pub upper: usize,
    pub lower: usize,
    pub lobes: Vec<Lobe<T>>,
    /// Rescales the lobes so the grid dipole has this norm.
    pub dipole: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec<T> {
    pub n_grid: usize,
    pub spacing: T,
    pub energies: Vec<T>,
    pub populations: Vec<T>,
    /// Dephasing rate shared by all coherences.
    pub dephasing: T,
    pub electron_count: usize,
    /// Width of the Gaussian state densities.
    pub density_width: T,
    pub transitions: Vec<TransitionSpec<T>>,
}

fn p_lobe<T: Real>(axis: usize, amp: T) -> Lobe<T> {
    Lobe {
        kind: LobeKind::P(axis),
        amplitude: cplx(amp, T::zero()),
        center: [T::zero(); 3],
        width: T::one(),
    }
}

impl<T: Real> GeneratorSpec<T> {
    /// Centrosymmetric two-level model: 16³ grid, spacing 0.5, `ω₁₀ = 0.1`,
    /// `σ₁₀ ∝ z e^{−r²/2}` with `|μ₁₀| = √5`, which saturates the TRK sum rule
    /// for one electron.
    pub fn tlm_a() -> Self {
        GeneratorSpec {
            n_grid: 16,
            spacing: T::lit(0.5),
            energies: vec![T::zero(), T::lit(0.1)],
            populations: vec![T::one(), T::zero()],
            dephasing: T::zero(),
            electron_count: 1,
            density_width: T::one(),
            transitions: vec![TransitionSpec {
                upper: 1,
                lower: 0,
                lobes: vec![p_lobe(2, T::one())],
                dipole: Some(T::lit(5.0).sqrt()),
            }],
        }
    }

    /// Three-level ladder `0 → 1 → 2` with z-polarised steps.
    pub fn ladder() -> Self {
        GeneratorSpec {
            n_grid: 12,
            spacing: T::lit(0.6),
            energies: vec![T::zero(), T::lit(0.1), T::lit(0.22)],
            populations: vec![T::one(), T::zero(), T::zero()],
            dephasing: T::zero(),
            electron_count: 1,
            density_width: T::one(),
            transitions: vec![
                TransitionSpec {
                    upper: 1,
                    lower: 0,
                    lobes: vec![p_lobe(2, T::one())],
                    dipole: Some(T::lit(1.5)),
                },
                TransitionSpec {
                    upper: 2,
                    lower: 1,
                    lobes: vec![p_lobe(2, T::one())],
                    dipole: Some(T::lit(1.0)),
                },
            ],
        }
    }

    /// Ladder plus a direct `0 → 2` transition: every three-photon loop is
    /// open, so even orders survive.
    pub fn non_centrosymmetric() -> Self {
        let mut s = Self::ladder();
        s.n_grid = 16;
        s.spacing = T::lit(0.5);
        s.transitions.push(TransitionSpec {
            upper: 2,
            lower: 0,
            lobes: vec![p_lobe(2, T::one())],
            dipole: Some(T::lit(0.8)),
        });
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let secs = parse_sections(&read_text(path)?, path)?;
        let model = secs
            .iter()
            .find(|s| s.name == "model")
            .ok_or_else(|| Error::MissingKey {
                path: path.to_path_buf(),
                key: "[model]".into(),
            })?;
        let preset = model.get("preset").unwrap_or("none");
        let mut spec = match preset {
            "tlm_a" => Self::tlm_a(),
            "ladder" => Self::ladder(),
            "non_centrosymmetric" => Self::non_centrosymmetric(),
            "none" => GeneratorSpec {
                n_grid: model.parse("n_grid")?,
                spacing: T::lit(model.parse("spacing")?),
                energies: lits(model.list("energies")?),
                populations: Vec::new(),
                dephasing: T::zero(),
                electron_count: 1,
                density_width: T::one(),
                transitions: Vec::new(),
            },
            p => return Err(Error::Config(format!("unknown generator preset {p:?}"))),
        };
        spec.n_grid = model.parse_or("n_grid", spec.n_grid)?;
        spec.spacing = T::lit(model.parse_or("spacing", spec.spacing.as_f64())?);
        spec.energies = lits(model.list_or("energies", f64s(&spec.energies))?);
        let n = spec.energies.len();
        let mut ground = vec![0.0; n];
        ground[0] = 1.0;
        let default_pop = if spec.populations.len() == n { f64s(&spec.populations) } else { ground };
        spec.populations = lits(model.list_or("populations", default_pop)?);
        spec.dephasing = T::lit(model.parse_or("dephasing", spec.dephasing.as_f64())?);
        spec.electron_count = model.parse_or("electron_count", spec.electron_count)?;
        spec.density_width = T::lit(model.parse_or("density_width", spec.density_width.as_f64())?);
        let trans: Vec<&Section> = secs.iter().filter(|s| s.name == "transition").collect();
        if !trans.is_empty() {
            spec.transitions = trans.into_iter().map(parse_transition).collect::<Result<_>>()?;
        }
        Ok(spec)
    }
}

fn lits<T: Real>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

fn f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn parse_transition<T: Real>(s: &Section) -> Result<TransitionSpec<T>> {
    let kind = match s.get("kind").unwrap_or("p_z") {
        "s" => LobeKind::S,
        "p_x" => LobeKind::P(0),
        "p_y" => LobeKind::P(1),
        "p_z" => LobeKind::P(2),
        k => return Err(Error::Config(format!("unknown lobe kind {k:?}"))),
    };
    let amp: f64 = s.parse_or("amplitude", 1.0)?;
    let phase: f64 = s.parse_or("phase", 0.0)?;
    let lobe = Lobe {
        kind,
        amplitude: cis(T::lit(phase)) * T::lit(amp),
        center: s.triple_or("center", [0.0; 3])?.map(T::lit),
        width: T::lit(s.parse_or("width", 1.0)?),
    };
    Ok(TransitionSpec {
        upper: s.parse("upper")?,
        lower: s.parse("lower")?,
        lobes: vec![lobe],
        dipole: match s.get("dipole") {
            None => None,
            Some(_) => Some(T::lit(s.parse("dipole")?)),
        },
    })
}

/// Builds the model; non-neutral transition lobes fail the continuity build.
pub fn generate<T: Real>(spec: &GeneratorSpec<T>) -> Result<MolecularModel<T>> {
    let n = spec.energies.len();
    if spec.populations.len() != n {
        return Err(Error::InvalidModel("populations length differs from energies".into()));
    }
    let grid = Grid3D::centered(spec.n_grid, spec.spacing)?;
    let density = gaussian_density(grid, [T::zero(); 3], spec.density_width, T::nu(spec.electron_count));
    let mut sig: Vec<Option<ScalarFieldG<T>>> = vec![None; n * n];
    for a in 0..n {
        sig[a * n + a] = Some(density.clone());
    }
    for t in &spec.transitions {
        if t.upper >= n || t.lower >= n || t.upper == t.lower {
            return Err(Error::InvalidModel(format!("bad transition {} → {}", t.lower, t.upper)));
        }
        let mut s = ScalarFieldG::from_fn(grid, |r| t.lobes.iter().fold(cplx(T::zero(), T::zero()), |acc, l| acc + l.at(r)));
        if let Some(target) = t.dipole {
            let mu = first_moment_norm(&s);
            if mu == T::zero() {
                return Err(Error::InvalidModel(format!("transition {} → {} has no dipole to scale", t.lower, t.upper)));
            }
            s = s.scale(cplx(target / mu, T::zero()));
        }
        sig[t.lower * n + t.upper] = Some(s.conj());
        sig[t.upper * n + t.lower] = Some(s);
    }
    let zero = ScalarFieldG::zeros(grid);
    build_model_from_charges(ChargeSet {
        energies: spec.energies.clone(),
        populations: spec.populations.clone(),
        dephasing: (0..n * n)
            .map(|i| if i / n == i % n { T::zero() } else { spec.dephasing })
            .collect(),
        electron_count: spec.electron_count,
        units: Units::default(),
        sigma: PairMap::from_vec(n, sig.into_iter().map(|s| s.unwrap_or_else(|| zero.clone())).collect())?,
        transverse_current: None,
    })
}

fn first_moment_norm<T: Real>(s: &ScalarFieldG<T>) -> T {
    let g = s.grid;
    let dv = g.cell_volume();
    let mut m = [cplx(T::zero(), T::zero()); 3];
    for (i, v) in s.values.iter().enumerate() {
        let r = g.point(i);
        for c in 0..3 {
            m[c] = m[c] + *v * r[c] * dv;
        }
    }
    (m[0].norm_sqr() + m[1].norm_sqr() + m[2].norm_sqr()).sqrt()
}

/// Norm of the grid dipole `μ_{αβ}` of a built model.
pub fn dipole_norm<T: Real>(model: &MolecularModel<T>, a: usize, b: usize) -> T {
    let mu = dipole_moments(model);
    let v = mu.get(a, b);
    (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
}
