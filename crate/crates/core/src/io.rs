//! NLRM/1 model directories and the sectioned `key = value` text format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Grid3D, ScalarFieldG, VectorFieldG};
use crate::model::{MolecularModel, PairMap};
use crate::scalar::{cplx, Cplx, Real};
use crate::units::Units;

pub const MANIFEST: &str = "model.nlrm";
pub const FORMAT_TAG: &str = "NLRM/1";

/// One `[section]` of a key-value file. Keys keep their line numbers.
#[derive(Debug, Clone, Default)]
pub struct Section {
    pub name: String,
    pub entries: BTreeMap<String, (String, usize)>,
    pub path: PathBuf,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey {
            path: self.path.clone(),
            key: if self.name.is_empty() {
                key.to_string()
            } else {
                format!("{}.{}", self.name, key)
            },
        })
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        let line = self.entries.get(key).map_or(0, |e| e.1);
        Error::parse(&self.path, format!("line {line}: {key}: {what}"))
    }

    pub fn parse<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let v = self.require(key)?;
        v.parse().map_err(|_| self.bad(key, &format!("cannot parse {v:?}")))
    }

    pub fn parse_or<V: std::str::FromStr>(&self, key: &str, default: V) -> Result<V> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.parse(key),
        }
    }

    pub fn list<V: std::str::FromStr>(&self, key: &str) -> Result<Vec<V>> {
        let v = self.require(key)?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| self.bad(key, &format!("cannot parse element {s:?}"))))
            .collect()
    }

    pub fn list_or<V: std::str::FromStr>(&self, key: &str, default: Vec<V>) -> Result<Vec<V>> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.list(key),
        }
    }

    pub fn triple<V: std::str::FromStr + Copy>(&self, key: &str) -> Result<[V; 3]> {
        let v: Vec<V> = self.list(key)?;
        <[V; 3]>::try_from(v).map_err(|_| self.bad(key, "expected 3 values"))
    }

    pub fn triple_or<V: std::str::FromStr + Copy>(&self, key: &str, default: [V; 3]) -> Result<[V; 3]> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.triple(key),
        }
    }
}

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Keys before any header land in a section with an empty name.
pub fn parse_sections(text: &str, path: &Path) -> Result<Vec<Section>> {
    let mut out = vec![Section {
        path: path.to_path_buf(),
        ..Section::default()
    }];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            out.push(Section {
                name: name.trim().to_string(),
                entries: BTreeMap::new(),
                path: path.to_path_buf(),
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("line {}: expected `key = value`", i + 1)))?;
        let sec = out.last_mut().unwrap();
        let key = k.trim().to_string();
        if sec.entries.contains_key(&key) {
            return Err(Error::parse(path, format!("line {}: duplicate key {key}", i + 1)));
        }
        sec.entries.insert(key, (v.trim().to_string(), i + 1));
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Float formatting used by every text output: 17 significant digits.
pub fn fmt_f<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub fn fmt_list<T: Real>(xs: &[T]) -> String {
    xs.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(", ")
}

fn encode<T: Real>(vals: &[Cplx<T>], buf: &mut Vec<u8>) {
    for v in vals {
        buf.extend_from_slice(&v.re.as_f64().to_le_bytes());
        buf.extend_from_slice(&v.im.as_f64().to_le_bytes());
    }
}

fn decode<T: Real>(bytes: &[u8]) -> Vec<Cplx<T>> {
    bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            cplx(T::lit(re), T::lit(im))
        })
        .collect()
}

fn read_binary(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::BinaryLength {
            path: path.to_path_buf(),
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

fn sigma_name(a: usize, b: usize) -> String {
    format!("sigma_{a}_{b}.c128")
}

fn current_name(a: usize, b: usize) -> String {
    format!("current_{a}_{b}.c128")
}

/// Writes `model` as an NLRM/1 directory, creating it if needed.
pub fn write_model<T: Real>(model: &MolecularModel<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = &model.grid;
    let mut m = String::new();
    let _ = writeln!(m, "format = {FORMAT_TAG}");
    let _ = writeln!(m, "n_states = {}", model.n_states());
    let _ = writeln!(m, "energies = {}", fmt_list(&model.energies));
    let _ = writeln!(m, "populations = {}", fmt_list(&model.populations));
    let _ = writeln!(m, "dephasing = {}", fmt_list(&model.dephasing));
    let _ = writeln!(m, "electron_count = {}", model.electron_count);
    let _ = writeln!(m, "grid_dims = {}, {}, {}", g.dims[0], g.dims[1], g.dims[2]);
    let _ = writeln!(m, "grid_spacing = {}", fmt_list(&g.spacing));
    let _ = writeln!(m, "grid_origin = {}", fmt_list(&g.origin));
    let _ = writeln!(m, "endianness = little");
    let u = &model.units;
    let _ = writeln!(m, "hbar = {}", fmt_f(u.hbar));
    let _ = writeln!(m, "charge = {}", fmt_f(u.charge));
    let _ = writeln!(m, "mass = {}", fmt_f(u.mass));
    let _ = writeln!(m, "c = {}", fmt_f(u.c));
    write_bytes(&dir.join(MANIFEST), m.as_bytes())?;
    let n = model.n_states();
    for a in 0..n {
        for b in 0..=a {
            let mut buf = Vec::with_capacity(16 * g.len());
            encode(&model.sigma(a, b).values, &mut buf);
            write_bytes(&dir.join(sigma_name(a, b)), &buf)?;
            let mut buf = Vec::with_capacity(48 * g.len());
            for c in &model.current(a, b).comps {
                encode(c, &mut buf);
            }
            write_bytes(&dir.join(current_name(a, b)), &buf)?;
        }
    }
    Ok(())
}

/// Reads an NLRM/1 directory. Pairs with `α < β` are the adjoints of the
/// stored `β, α` densities.
pub fn read_model<T: Real>(dir: &Path) -> Result<MolecularModel<T>> {
    let mpath = dir.join(MANIFEST);
    let secs = parse_sections(&read_text(&mpath)?, &mpath)?;
    let s = &secs[0];
    let tag = s.require("format")?;
    if tag != FORMAT_TAG {
        return Err(Error::parse(&mpath, format!("unsupported format {tag:?}")));
    }
    if s.require("endianness")? != "little" {
        return Err(Error::parse(&mpath, "only little-endian data is supported"));
    }
    let n: usize = s.parse("n_states")?;
    let lf = |k: &str| -> Result<Vec<T>> { Ok(s.list::<f64>(k)?.into_iter().map(T::lit).collect()) };
    let energies = lf("energies")?;
    let populations = lf("populations")?;
    let dephasing = lf("dephasing")?;
    if energies.len() != n || populations.len() != n || dephasing.len() != n * n {
        return Err(Error::parse(&mpath, "energies/populations/dephasing length disagrees with n_states"));
    }
    let electron_count = s.parse("electron_count")?;
    let dims: [usize; 3] = s.triple("grid_dims")?;
    let spacing = s.triple::<f64>("grid_spacing")?.map(T::lit);
    let origin = s.triple::<f64>("grid_origin")?.map(T::lit);
    let d = Units::<T>::default();
    let uf = |k: &str, def: T| -> Result<T> { Ok(s.parse_or(k, def.as_f64()).map(T::lit)?) };
    let units = Units {
        hbar: uf("hbar", d.hbar)?,
        charge: uf("charge", d.charge)?,
        mass: uf("mass", d.mass)?,
        c: uf("c", d.c)?,
    };
    let grid = Grid3D::new(dims, spacing, origin)?;
    let len = grid.len();
    let mut sig = Vec::with_capacity(n * n);
    let mut cur = Vec::with_capacity(n * n);
    let mut lower_s: BTreeMap<(usize, usize), ScalarFieldG<T>> = BTreeMap::new();
    let mut lower_j: BTreeMap<(usize, usize), VectorFieldG<T>> = BTreeMap::new();
    for a in 0..n {
        for b in 0..=a {
            let v = decode(&read_binary(&dir.join(sigma_name(a, b)), 16 * len)?);
            lower_s.insert((a, b), ScalarFieldG::from_values(grid, v)?);
            let v: Vec<Cplx<T>> = decode(&read_binary(&dir.join(current_name(a, b)), 48 * len)?);
            let comps = [v[..len].to_vec(), v[len..2 * len].to_vec(), v[2 * len..].to_vec()];
            lower_j.insert((a, b), VectorFieldG::from_comps(grid, comps)?);
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a >= b {
                sig.push(lower_s[&(a, b)].clone());
                cur.push(lower_j[&(a, b)].clone());
            } else {
                sig.push(lower_s[&(b, a)].conj());
                cur.push(lower_j[&(b, a)].conj());
            }
        }
    }
    MolecularModel::from_parts(
        grid,
        energies,
        populations,
        dephasing,
        electron_count,
        units,
        PairMap::from_vec(n, sig)?,
        PairMap::from_vec(n, cur)?,
    )
}
