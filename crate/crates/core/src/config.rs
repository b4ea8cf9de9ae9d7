//! Run configuration: flat sectioned text, one `[mode]` block per field mode.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{DrivingField, Envelope, FieldMode, GaugeFn, ModeKind, Profile, TimeGrid};
use crate::io::{parse_sections, read_text, Section};
use crate::oracle::{OracleGauge, OracleOptions};
use crate::scalar::cis;
use crate::signals::{HetEnvelope, HetSign, HeterodyneMode, SpectraOptions};
use crate::units::SPEED_OF_LIGHT_AU;

#[derive(Debug, Clone)]
pub struct SpectraRequest {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub options: SpectraOptions<f64>,
    /// Also evaluate the dipole spectrum by quadrature of the correlation.
    pub discrete: bool,
}

#[derive(Debug, Clone)]
pub struct OracleRequest {
    /// Amplitudes relative to `lambda_max`.
    pub lambdas: Vec<f64>,
    /// Fixed `λ_max`; found from `target_transfer` when absent.
    pub lambda_max: Option<f64>,
    pub target_transfer: f64,
    pub options: OracleOptions<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: PathBuf,
    /// SHA-256 of the config file bytes.
    pub hash: String,
    pub model_path: PathBuf,
    pub field: DrivingField<f64>,
    pub orders: Vec<usize>,
    pub total: bool,
    pub dipole: bool,
    pub spectra: Option<SpectraRequest>,
    pub heterodyne: Vec<HeterodyneMode<f64>>,
    pub heterodyne_max_order: usize,
    pub oracle: OracleRequest,
    pub a0_sign: f64,
    pub output_dir: PathBuf,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn f3(s: &Section, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
    s.triple_or(key, default)
}

fn envelope(s: &Section) -> Result<Envelope<f64>> {
    match s.get("envelope").unwrap_or("gaussian") {
        "gaussian" => Ok(Envelope::Gaussian {
            center: s.parse("t_center")?,
            width: s.parse("t_width")?,
        }),
        "flat_top" => Ok(Envelope::FlatTop {
            start: s.parse("t_start")?,
            ramp: s.parse("t_ramp")?,
            plateau: s.parse("t_plateau")?,
        }),
        e => Err(Error::Config(format!("[{}] unknown envelope {e:?}", s.name))),
    }
}

fn mode(s: &Section) -> Result<FieldMode<f64>> {
    let q = f3(s, "q", [0.0; 3])?;
    let kind = match s.get("kind").unwrap_or("plane_wave") {
        "plane_wave" => ModeKind::PlaneWave { q },
        "evanescent" => ModeKind::Evanescent {
            q,
            kappa: s.triple("kappa")?,
        },
        k => return Err(Error::Config(format!("[mode] unknown kind {k:?}"))),
    };
    Ok(FieldMode {
        kind,
        amplitude: s.parse("amplitude")?,
        omega: s.parse("omega")?,
        polarization: s.triple("polarization")?,
        envelope: envelope(s)?,
    })
}

fn gauge(s: Option<&Section>) -> Result<GaugeFn<f64>> {
    let Some(s) = s else { return Ok(GaugeFn::Zero) };
    let time = |s: &Section| -> Result<Profile<f64>> {
        Ok(Profile {
            envelope: envelope(s)?,
            omega: s.parse_or("omega", 0.0)?,
            phase: s.parse_or("phase", 0.0)?,
        })
    };
    match s.get("kind").unwrap_or("zero") {
        "zero" => Ok(GaugeFn::Zero),
        "linear" => Ok(GaugeFn::Linear {
            g: s.triple("g")?,
            time: time(s)?,
        }),
        "sinusoidal" => Ok(GaugeFn::Sinusoidal {
            amp: s.parse("amp")?,
            k: s.triple("k")?,
            time: time(s)?,
        }),
        k => Err(Error::Config(format!("[gauge] unknown kind {k:?}"))),
    }
}

fn het_envelope(s: &Section, prefix: &str) -> Result<HetEnvelope<f64>> {
    let amp = s.parse_or(&format!("{prefix}_amplitude"), 0.0)?;
    let amp = cis(s.parse_or(&format!("{prefix}_phase"), 0.0)?) * amp;
    match s.get("envelope").unwrap_or("constant") {
        "constant" => Ok(HetEnvelope::Constant(amp)),
        "gaussian" => Ok(HetEnvelope::Gaussian {
            amp,
            center: s.parse("t_center")?,
            width: s.parse("t_width")?,
        }),
        e => Err(Error::Config(format!("[heterodyne] unknown envelope {e:?}"))),
    }
}

fn bool_key(s: Option<&Section>, key: &str, default: bool) -> Result<bool> {
    match s {
        Some(s) => s.parse_or(key, default),
        None => Ok(default),
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let secs = parse_sections(&text, path)?;
        if !secs[0].entries.is_empty() {
            return Err(Error::Config(format!("{}: keys outside any section", path.display())));
        }
        let known = [
            "model",
            "time",
            "mode",
            "gauge",
            "outputs",
            "heterodyne",
            "oracle",
            "conventions",
            "tolerances",
            "output",
        ];
        for s in &secs[1..] {
            if !known.contains(&s.name.as_str()) {
                return Err(Error::Config(format!("unknown section [{}]", s.name)));
            }
        }
        let one = |name: &str| -> Result<Option<&Section>> {
            let v: Vec<&Section> = secs.iter().filter(|s| s.name == name).collect();
            match v.len() {
                0 => Ok(None),
                1 => Ok(Some(v[0])),
                _ => Err(Error::Config(format!("section [{name}] repeated"))),
            }
        };
        let need = |name: &str| -> Result<&Section> {
            one(name)?.ok_or_else(|| Error::MissingKey {
                path: path.to_path_buf(),
                key: format!("[{name}]"),
            })
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let model_path = base.join(need("model")?.require("path")?);
        let t = need("time")?;
        let time_grid = TimeGrid::new(t.parse_or("t0", 0.0)?, t.parse("dt")?, t.parse("n_t")?)?;

        let conv = one("conventions")?;
        let kappa = match conv.and_then(|c| c.get("a_dot_convention")).unwrap_or("1") {
            "1" => 1.0,
            "c" => SPEED_OF_LIGHT_AU,
            k => return Err(Error::Config(format!("a_dot_convention must be 1 or c, got {k:?}"))),
        };
        let a0_sign = match conv.and_then(|c| c.get("a0_sign")).unwrap_or("+") {
            "+" => 1.0,
            s => {
                return Err(Error::Config(format!(
                    "a0_sign {s:?} unsupported: only `+` keeps E gauge invariant with this Hamiltonian"
                )))
            }
        };
        let het_sign = match conv.and_then(|c| c.get("heterodyne_sign")).unwrap_or("+") {
            "+" => HetSign::Plus,
            "-" => HetSign::Minus,
            s => return Err(Error::Config(format!("heterodyne_sign must be + or -, got {s:?}"))),
        };
        let n0 = match conv.and_then(|c| c.get("n0")) {
            None => None,
            Some(_) => Some(conv.unwrap().parse::<f64>("n0")?),
        };

        let modes = secs
            .iter()
            .filter(|s| s.name == "mode")
            .map(mode)
            .collect::<Result<Vec<_>>>()?;
        let field = DrivingField::new(modes, time_grid)?.with_convention(kappa);
        let field = crate::fields::apply_gauge(&field, gauge(one("gauge")?)?);

        let out = one("outputs")?;
        let orders: Vec<usize> = match out {
            Some(s) => s.list_or("orders", vec![1])?,
            None => vec![1],
        };
        if let Some(&bad) = orders.iter().find(|&&o| !(1..=3).contains(&o)) {
            return Err(Error::Config(format!("requested order {bad} outside 1..=3")));
        }
        let spectra = if bool_key(out, "spectra", false)? {
            let s = out.unwrap();
            Some(SpectraRequest {
                omega_min: s.parse("omega_min")?,
                omega_max: s.parse("omega_max")?,
                n_omega: s.parse_or("n_omega", 201)?,
                options: SpectraOptions {
                    polarization: f3(s, "spectra_polarization", [0.0, 0.0, 1.0])?,
                    e0: s.parse_or("e0", 1.0)?,
                    n0,
                    ground: 0,
                },
                discrete: s.parse_or("discrete", false)?,
            })
        } else {
            None
        };

        let mut heterodyne = Vec::new();
        let mut heterodyne_max_order = 1;
        if let Some(h) = one("heterodyne")? {
            heterodyne_max_order = h.parse_or("max_order", 1)?;
            if !(1..=3).contains(&heterodyne_max_order) {
                return Err(Error::Config(format!("heterodyne max_order {heterodyne_max_order} outside 1..=3")));
            }
            heterodyne.push(HeterodyneMode {
                q: f3(h, "q", [0.0; 3])?,
                polarization: h.triple("polarization")?,
                omega: h.parse("omega")?,
                e_env: het_envelope(h, "e")?,
                a_env: het_envelope(h, "a")?,
                sign: het_sign,
                volume: match h.get("volume") {
                    None => None,
                    Some(_) => Some(h.parse("volume")?),
                },
            });
        }

        let tol = one("tolerances")?;
        let o = one("oracle")?;
        let gauge = match o.and_then(|s| s.get("gauge")).unwrap_or("temporal") {
            "temporal" => OracleGauge::Temporal,
            "as_given" => OracleGauge::AsGiven,
            g => return Err(Error::Config(format!("[oracle] unknown gauge {g:?}"))),
        };
        let d = OracleOptions::<f64>::default();
        let options = OracleOptions {
            gauge,
            substeps: match o {
                Some(s) => s.parse_or("substeps", d.substeps)?,
                None => d.substeps,
            },
            tolerance: match tol {
                Some(s) => s.parse_or("oracle", d.tolerance)?,
                None => d.tolerance,
            },
            max_halvings: match o {
                Some(s) => s.parse_or("max_halvings", d.max_halvings)?,
                None => d.max_halvings,
            },
        };
        let oracle = OracleRequest {
            lambdas: match o {
                Some(s) => s.list_or("lambdas", vec![0.2, 0.4, 0.6, 0.8, 1.0])?,
                None => vec![0.2, 0.4, 0.6, 0.8, 1.0],
            },
            lambda_max: match o.and_then(|s| s.get("lambda_max")) {
                None => None,
                Some(_) => Some(o.unwrap().parse("lambda_max")?),
            },
            target_transfer: match o {
                Some(s) => s.parse_or("target_transfer", 3e-3)?,
                None => 3e-3,
            },
            options,
        };

        let output_dir = base.join(need("output")?.require("dir")?);
        let hash = hex(&Sha256::digest(text.as_bytes()));
        Ok(RunConfig {
            source: path.to_path_buf(),
            hash,
            model_path,
            field,
            orders,
            total: bool_key(out, "total", false)?,
            dipole: bool_key(out, "dipole", false)?,
            spectra,
            heterodyne,
            heterodyne_max_order,
            oracle,
            a0_sign,
            output_dir,
        })
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.spectra.as_ref().map_or(Vec::new(), |s| {
            let n = s.n_omega.max(2);
            (0..n)
                .map(|i| s.omega_min + (s.omega_max - s.omega_min) * i as f64 / (n - 1) as f64)
                .collect()
        })
    }

    /// Text key-value run record.
    pub fn record(&self) -> String {
        let mut r = String::new();
        let mut kv = |k: &str, v: String| {
            r.push_str(k);
            r.push_str(" = ");
            r.push_str(&v);
            r.push('\n');
        };
        kv("config", self.source.display().to_string());
        kv("config_sha256", self.hash.clone());
        kv("model", self.model_path.display().to_string());
        kv("a_dot_convention", format!("{:.16e}", self.field.a_dot_convention));
        kv("a0_sign", format!("{:+}", self.a0_sign));
        if let Some(h) = self.heterodyne.first() {
            kv(
                "heterodyne_sign",
                match h.sign {
                    HetSign::Plus => "+".into(),
                    HetSign::Minus => "-".into(),
                },
            );
        }
        kv("oracle_tolerance", format!("{:.16e}", self.oracle.options.tolerance));
        kv("oracle_gauge", format!("{:?}", self.oracle.options.gauge));
        kv(
            "orders",
            self.orders.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", "),
        );
        kv("time_grid", format!(
            "{:.16e}, {:.16e}, {}",
            self.field.time_grid.t0, self.field.time_grid.dt, self.field.time_grid.n_t
        ));
        r
    }
}
