//! Command implementations behind the `nlres` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::generator::{generate, GeneratorSpec};
use crate::io::{read_model, write_bytes, write_model};
use crate::model::{validate_model, MolecularModel};
use crate::oracle::{extract_orders, perturbative_scale};
use crate::response::ResponseEngine;
use crate::scalar::rel_l2;
use crate::signals::{
    dipole_linear_exchange, energy_exchange_of, heterodyne_from_currents, linear_spectra, spectrum_dipole_discrete,
    SignalTrace,
};

/// Exclusive ownership of an output directory for the life of the guard.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub const NAME: &'static str = ".nlres.lock";

    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(Self::NAME);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(OutputLock { path })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Validates an NLRM/1 directory, writing `validation.txt` beside the manifest.
pub fn cmd_validate(dir: &Path) -> Result<(bool, String)> {
    let model: MolecularModel<f64> = read_model(dir)?;
    let report = validate_model(&model);
    let text = format!("{report}");
    write_bytes(&dir.join("validation.txt"), text.as_bytes())?;
    Ok((report.pass, text))
}

/// Generator spec from a file, or one of the preset names.
pub fn load_generator_spec(spec: &str) -> Result<GeneratorSpec<f64>> {
    match spec {
        "tlm_a" | "default" => Ok(GeneratorSpec::tlm_a()),
        "ladder" => Ok(GeneratorSpec::ladder()),
        "non_centrosymmetric" => Ok(GeneratorSpec::non_centrosymmetric()),
        p => GeneratorSpec::read(Path::new(p)),
    }
}

pub fn cmd_gen_model(spec: &str, out: &Path) -> Result<MolecularModel<f64>> {
    let model = generate(&load_generator_spec(spec)?)?;
    write_model(&model, out)?;
    Ok(model)
}

fn write_trace(dir: &Path, name: &str, t: &SignalTrace<f64>, written: &mut Vec<String>) -> Result<()> {
    t.write_csv(&dir.join(name))?;
    written.push(name.to_string());
    Ok(())
}

/// Runs every requested output; returns the files written.
pub fn cmd_run(config: &Path) -> Result<Vec<String>> {
    let cfg = RunConfig::read(config)?;
    let model: MolecularModel<f64> = read_model(&cfg.model_path)?;
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let dir = &cfg.output_dir;
    let mut written = Vec::new();
    let field = &cfg.field;
    let need = cfg
        .orders
        .iter()
        .copied()
        .chain(cfg.heterodyne.iter().map(|_| cfg.heterodyne_max_order))
        .chain(if cfg.total { Some(3) } else { None })
        .max()
        .unwrap_or(0);
    if need > 0 {
        let currents = ResponseEngine::new(&model, field)?.currents(need)?;
        let traces: Vec<_> = currents.iter().map(energy_exchange_of).collect();
        for &o in &cfg.orders {
            write_trace(dir, &format!("energy_exchange_order{o}.csv"), &traces[o - 1], &mut written)?;
        }
        if cfg.total {
            let mut total = traces[0].clone();
            total.order = 0;
            for t in &traces[1..3] {
                for (a, b) in total.values.iter_mut().zip(&t.values) {
                    *a += *b;
                }
            }
            write_trace(dir, "energy_exchange_total.csv", &total, &mut written)?;
        }
        for (i, h) in cfg.heterodyne.iter().enumerate() {
            let s = heterodyne_from_currents(&model, &currents[..cfg.heterodyne_max_order], h)?;
            write_trace(dir, &format!("heterodyne_{i}.csv"), &s, &mut written)?;
        }
    }
    if cfg.dipole {
        let d = dipole_linear_exchange(&model, field)?;
        write_trace(dir, "dipole_energy_exchange_order1.csv", &d, &mut written)?;
    }
    if let Some(sp) = &cfg.spectra {
        let omegas = cfg.omegas();
        let s = linear_spectra(&model, &omegas, &sp.options)?;
        write_trace(dir, "spectrum_dipole.csv", &s.dipole, &mut written)?;
        write_trace(dir, "spectrum_naive_mc.csv", &s.naive_mc, &mut written)?;
        write_trace(dir, "exchange_dipole.csv", &s.exchange_dipole, &mut written)?;
        write_trace(dir, "exchange_naive_mc.csv", &s.exchange_naive_mc, &mut written)?;
        if sp.discrete {
            let wmax = omegas.iter().fold(0.0f64, |a, w| a.max(w.abs()));
            let eta_min = (0..model.n_states())
                .filter(|&a| a != sp.options.ground)
                .map(|a| model.eta(a, sp.options.ground))
                .filter(|e| *e > 0.0)
                .fold(f64::INFINITY, f64::min);
            let d = spectrum_dipole_discrete(&model, &omegas, &sp.options, 0.2 / wmax, 20.0 / eta_min)?;
            write_trace(dir, "spectrum_dipole_discrete.csv", &d, &mut written)?;
        }
    }
    let mut record = cfg.record();
    let _ = writeln!(record, "outputs = {}", written.join(", "));
    write_bytes(&dir.join("run_record.txt"), record.as_bytes())?;
    written.push("run_record.txt".into());
    Ok(written)
}

/// Per-order comparison of the oracle fit against the perturbative engine.
#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub lambda_max: f64,
    /// Relative L2 error of `c_{n+1}` against `ΔẆ⁽ⁿ⁾`, per order.
    pub relative_error: [f64; 3],
    /// `‖c_{n+1}‖ / ‖c₂‖` and `‖ΔẆ⁽ⁿ⁾‖ / ‖ΔẆ⁽¹⁾‖`.
    pub oracle_scale: [f64; 3],
    pub engine_scale: [f64; 3],
    pub condition: f64,
    pub max_transfer: f64,
}

fn l2(v: &[num_complex::Complex<f64>]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Oracle fit at the config's field scaled to `λ_max`, compared with the
/// engine at the same amplitude.
pub fn oracle_compare(
    model: &MolecularModel<f64>,
    cfg: &RunConfig,
) -> Result<(OracleComparison, Vec<SignalTrace<f64>>, Vec<SignalTrace<f64>>)> {
    let opts = cfg.oracle.options;
    let lmax = match cfg.oracle.lambda_max {
        Some(l) => l,
        None => perturbative_scale(model, &cfg.field, cfg.oracle.target_transfer, &opts)?,
    };
    let field = cfg.field.scaled(lmax);
    let fit = extract_orders(model, &field, &cfg.oracle.lambdas, &opts)?;
    let engine: Vec<_> = ResponseEngine::new(model, &field)?
        .currents(3)?
        .iter()
        .map(energy_exchange_of)
        .collect();
    let c2 = l2(&fit.coefficients[0].values);
    let w1 = l2(&engine[0].values);
    let mut cmp = OracleComparison {
        lambda_max: lmax,
        relative_error: [0.0; 3],
        oracle_scale: [0.0; 3],
        engine_scale: [0.0; 3],
        condition: fit.condition,
        max_transfer: fit.max_transfer,
    };
    for n in 0..3 {
        cmp.relative_error[n] = rel_l2(&fit.coefficients[n].values, &engine[n].values, 0.0);
        cmp.oracle_scale[n] = l2(&fit.coefficients[n].values) / c2;
        cmp.engine_scale[n] = l2(&engine[n].values) / w1;
    }
    Ok((cmp, fit.coefficients, engine))
}

pub fn cmd_oracle(config: &Path) -> Result<OracleComparison> {
    let cfg = RunConfig::read(config)?;
    let model: MolecularModel<f64> = read_model(&cfg.model_path)?;
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let dir = &cfg.output_dir;
    let (cmp, fit, engine) = oracle_compare(&model, &cfg)?;
    let mut written = Vec::new();
    for n in 0..3 {
        write_trace(dir, &format!("oracle_c{}.csv", n + 2), &fit[n], &mut written)?;
        write_trace(dir, &format!("engine_order{}.csv", n + 1), &engine[n], &mut written)?;
    }
    let mut r = cfg.record();
    let _ = writeln!(r, "lambda_max = {:.16e}", cmp.lambda_max);
    let _ = writeln!(r, "fit_condition = {:.16e}", cmp.condition);
    let _ = writeln!(r, "max_population_transfer = {:.16e}", cmp.max_transfer);
    for n in 0..3 {
        let _ = writeln!(r, "order{}_relative_l2 = {:.16e}", n + 1, cmp.relative_error[n]);
        let _ = writeln!(r, "order{}_oracle_scale = {:.16e}", n + 1, cmp.oracle_scale[n]);
        let _ = writeln!(r, "order{}_engine_scale = {:.16e}", n + 1, cmp.engine_scale[n]);
    }
    let _ = writeln!(r, "outputs = {}", written.join(", "));
    write_bytes(&dir.join("oracle_comparison.txt"), r.as_bytes())?;
    Ok(cmp)
}
