//! Command dispatch for the `bjj` binary: one output directory per run with
//! the config copied in next to the CSV/JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bosonic::{loss_decoherence_estimate, number_noise_rate, phase_noise_rate, thermal_coherence};
use crate::config::{self, EvolveConfig, GroundConfig, InitialState, LifetimeConfig, RatesConfig, SemiclassicalConfig, SweepConfig};
use crate::lindblad::{evolve, NoiseChannels, SectoredDensityMatrix};
use crate::model::{characteristic_params, coherence_g1, ground_state, hamiltonian_tridiag, thermal_occupation, thermal_state, ModelParams, Regime};
use crate::noise::{dephasing_rate, fit_lifetimes, loss_rate, synthetic_lifetimes, KernelOverlaps, LifetimeDataset, LifetimeRow};
use crate::semiclassical::{run_ensemble, SemiclassicalOptions};
use crate::trap::{self, TwoModeExtraction};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const UM: f64 = 1e-6;
const UM2: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "bjj", version, about = "Two-mode Bose-Josephson junction decoherence toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// RNG seed; overrides any seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel engines (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic parameters and ground/thermal coherence.
    Ground(RunArgs),
    /// Exact master-equation evolution.
    Evolve(RunArgs),
    /// Truncated-Wigner ensemble evolution.
    Semiclassical(RunArgs),
    /// Two-mode parameters over a grid of atom numbers and barrier heights.
    Sweep(RunArgs),
    /// Master-equation rates from magnetic-noise models.
    Rates(RunArgs),
    /// Lifetime-versus-distance fit.
    Lifetime {
        #[command(flatten)]
        run: RunArgs,
        /// CSV with columns z0_um, tau_s, sigma_s.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

impl Command {
    pub fn run_args(&self) -> &RunArgs {
        match self {
            Command::Ground(a) | Command::Evolve(a) | Command::Semiclassical(a) | Command::Sweep(a) | Command::Rates(a) => a,
            Command::Lifetime { run, .. } => run,
        }
    }
}

pub fn exit_code(result: &Result<Vec<PathBuf>>) -> i32 {
    match result {
        Ok(_) => EXIT_OK,
        Err(e) if e.is_config() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERICAL,
    }
}

/// Sizes the global rayon pool; a pool that already exists is kept.
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::invalid("--threads", "must be >= 1"));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized; --threads {n} ignored");
        }
    }
    Ok(())
}

/// Executes one command and returns the files written.
pub fn run(cmd: &Command) -> Result<Vec<PathBuf>> {
    let args = cmd.run_args();
    configure_threads(args.threads)?;
    match cmd {
        Command::Ground(a) => cmd_ground(&load_checked(a, GroundConfig::validate)?, a),
        Command::Evolve(a) => cmd_evolve(&load_checked(a, EvolveConfig::validate)?, a),
        Command::Semiclassical(a) => cmd_semiclassical(&load_checked(a, SemiclassicalConfig::validate)?, a),
        Command::Sweep(a) => cmd_sweep(&load_checked(a, SweepConfig::validate)?, a),
        Command::Rates(a) => cmd_rates(&load_checked(a, RatesConfig::validate)?, a),
        Command::Lifetime { run, data } => cmd_lifetime(&load_checked(run, LifetimeConfig::validate)?, run, data.as_deref()),
    }
}

fn load_checked<T: serde::de::DeserializeOwned>(a: &RunArgs, check: fn(&T) -> Result<()>) -> Result<T> {
    let cfg: T = config::load(&a.config)?;
    check(&cfg)?;
    fs::create_dir_all(&a.out)?;
    fs::copy(&a.config, a.out.join("config.json"))?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "U")]
    pub u_pair: f64,
    pub epsilon: f64,
    pub u: f64,
    pub xi: f64,
    #[serde(rename = "omegaJ")]
    pub omega_j: f64,
    pub eps_c: f64,
    pub regime: Regime,
    pub energy: f64,
    pub degenerate: bool,
    pub g1_ground: Option<f64>,
    pub kt: f64,
    pub g1_thermal: Option<f64>,
    /// Linearized estimate with the Josephson mode at thermal occupation.
    pub g1_thermal_bosonic: f64,
}

pub fn ground_report(c: &GroundConfig) -> Result<GroundReport> {
    let p = c.model;
    let ch = characteristic_params(&p);
    let h = hamiltonian_tridiag(&p);
    let gs = ground_state(&h)?;
    let g1_ground = coherence_g1(&gs.density()).ok();
    let g1_thermal = coherence_g1(&thermal_state(&h, c.kt)?).ok();
    let n_t = thermal_occupation(ch.omega_j, c.kt);
    Ok(GroundReport {
        n: p.n,
        j: p.j,
        u_pair: p.u,
        epsilon: p.epsilon,
        u: ch.u,
        xi: ch.xi,
        omega_j: ch.omega_j,
        eps_c: ch.eps_c,
        regime: ch.regime,
        energy: gs.energy,
        degenerate: gs.degenerate,
        g1_ground,
        kt: c.kt,
        g1_thermal,
        g1_thermal_bosonic: thermal_coherence(p.n as f64, ch.xi, n_t),
    })
}

fn cmd_ground(c: &GroundConfig, a: &RunArgs) -> Result<Vec<PathBuf>> {
    let report = ground_report(c)?;
    let path = a.out.join("ground.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

pub fn initial_state(p: &ModelParams, init: InitialState) -> Result<SectoredDensityMatrix> {
    let h = hamiltonian_tridiag(p);
    match init {
        InitialState::Ground => Ok(SectoredDensityMatrix::pure(&ground_state(&h)?.psi)),
        InitialState::Thermal { kt } => SectoredDensityMatrix::from_block(p.n, &thermal_state(&h, kt)?),
    }
}

/// Linearized decoherence rate summed over the active channels. Tunneling
/// noise has no linearized counterpart and is left out.
pub fn linearized_rate(p: &ModelParams, nc: &NoiseChannels) -> impl Fn(f64) -> f64 {
    let ch = characteristic_params(p);
    let phase = phase_noise_rate(nc.gamma3, ch.xi, ch.omega_j);
    let number = number_noise_rate(nc.gamma2, ch.xi, ch.omega_j);
    let loss = loss_decoherence_estimate(0.5 * (nc.gamma_l + nc.gamma_r), ch.xi, p.n as f64, ch.omega_j);
    move |t| phase.rate(t) + number.rate(t) + loss.rate(t)
}

pub const EVOLVE_COLUMNS: [&str; 8] = ["t", "S1", "S2", "S3", "S3sq", "g1", "N_mean", "Gamma"];

fn cmd_evolve(c: &EvolveConfig, a: &RunArgs) -> Result<Vec<PathBuf>> {
    let rho0 = initial_state(&c.model, c.initial)?;
    let t = c.time.points();
    let res = evolve(&rho0, &c.model, &c.noise, &t, c.tol)?;

    let path = a.out.join("evolve.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header: Vec<&str> = EVOLVE_COLUMNS.to_vec();
    if c.overlay {
        header.extend(["g1_ref", "Gamma_bosonic"]);
    }
    w.write_record(&header)?;
    let single = c.noise.gamma2 + c.noise.gamma3;
    let g1_0 = res.g1.first().copied().unwrap_or(1.0);
    let bosonic = linearized_rate(&c.model, &c.noise);
    for i in 0..res.t.len() {
        let mut row = vec![
            num(res.t[i]),
            num(res.s1[i]),
            num(res.s2[i]),
            num(res.s3[i]),
            num(res.s3sq[i]),
            num(res.g1[i]),
            num(res.n_mean[i]),
            opt(res.gamma[i]),
        ];
        if c.overlay {
            row.push(num(g1_0 * (-single * res.t[i]).exp()));
            row.push(num(bosonic(res.t[i])));
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let summary = a.out.join("summary.json");
    write_json(
        &summary,
        &serde_json::json!({
            "accepted_steps": res.stats.accepted,
            "rejected_steps": res.stats.rejected,
            "final_trace": res.trace.last(),
            "max_hermiticity_error": res.max_hermiticity_error,
        }),
    )?;
    Ok(vec![path, summary])
}

pub const SEMICLASSICAL_COLUMNS: [&str; 6] = ["t", "S_over_s_direct", "S_over_s_gaussian", "var_phi", "var_n", "stderr"];

fn cmd_semiclassical(c: &SemiclassicalConfig, a: &RunArgs) -> Result<Vec<PathBuf>> {
    let opts = SemiclassicalOptions {
        trajectories: c.trajectories,
        seed: a.seed.or(c.seed).unwrap_or(0),
        dt: c.dt,
    };
    let res = run_ensemble(&c.model, &c.noise, &c.time.points(), opts)?;
    let path = a.out.join("semiclassical.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(SEMICLASSICAL_COLUMNS)?;
    for i in 0..res.t.len() {
        w.write_record([
            num(res.t[i]),
            num(res.direct[i]),
            num(res.gaussian[i]),
            num(res.var_phi[i]),
            num(res.var_n[i]),
            num(res.stderr[i]),
        ])?;
    }
    w.flush()?;
    Ok(vec![path])
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "N", "V0", "mu_par", "E1", "E2", "E3", "J", "U", "u", "xi2", "omegaJ", "cross", "valid", "fock", "loss_enhanced",
];

fn sweep_row(e: &TwoModeExtraction) -> Vec<String> {
    let en = |k: usize| e.energies.get(k).copied().map(num).unwrap_or_default();
    vec![
        e.n.to_string(),
        num(e.v0),
        num(e.mu_parallel),
        en(0),
        en(1),
        en(2),
        num(e.j),
        num(e.u),
        num(e.u_dimless),
        num(e.xi * e.xi),
        num(e.omega_j_hz),
        num(e.cross_ratio),
        e.flags.two_mode_valid.to_string(),
        e.flags.fock.to_string(),
        e.flags.loss_enhanced.to_string(),
    ]
}

fn cmd_sweep(c: &SweepConfig, a: &RunArgs) -> Result<Vec<PathBuf>> {
    let rows = trap::sweep(&c.trap, &c.grid, &c.ns, &c.v0s);
    let path = a.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record(sweep_row(&r?))?;
    }
    w.flush()?;
    let mut files = vec![path];
    if let Some(b) = c.boundary {
        let mut out = Vec::new();
        for &n in &c.ns {
            let base = trap::TrapSpec { n, ..c.trap };
            let v0 = trap::validity_boundary(&base, &c.grid, b.lo, b.hi, b.tol_hz)?;
            out.push(serde_json::json!({ "N": n, "V0_boundary": v0 }));
        }
        let p = a.out.join("boundary.json");
        write_json(&p, &out)?;
        files.push(p);
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesReport {
    /// Dephasing coefficient (1/s).
    pub gamma_p: Option<f64>,
    pub alpha: Option<KernelOverlaps>,
    pub long_correlation: Option<bool>,
    /// Per-well loss rate (1/s).
    pub gamma_loss: Option<f64>,
    pub j_hz: Option<f64>,
    /// Rates in units of `J / hbar`, ready for the master equation.
    pub gamma_p_over_j: Option<f64>,
    pub gamma_loss_over_j: Option<f64>,
    pub trap: Option<TwoModeExtraction>,
}

pub fn rates_report(c: &RatesConfig) -> Result<RatesReport> {
    let mut j_hz = c.j_hz;
    let mut extraction = None;
    let mut dens: (Vec<f64>, Vec<f64>, f64) = (Vec::new(), Vec::new(), 1.0);
    let mut d = c.d;
    if let Some(spec) = &c.trap {
        let (g, m, e) = trap::analyze(spec, &c.grid)?;
        let (l, r) = trap::localized_modes(&g.phi0, &m.phi[1]);
        dens = (l.iter().map(|v| v * v).collect(), r.iter().map(|v| v * v).collect(), g.dx);
        j_hz = j_hz.or(Some(e.j));
        d = d.or(Some(spec.d));
        extraction = Some(e);
    }
    let deph = match &c.dephasing {
        Some(m) => {
            let d = d.ok_or_else(|| Error::invalid("d", "well separation required"))?;
            Some(dephasing_rate(m, &dens.0, &dens.1, dens.2, d)?)
        }
        None => None,
    };
    let gamma_loss = c.loss.as_ref().map(loss_rate).transpose()?;
    let in_j = |g: Option<f64>| -> Option<f64> { Some(g? / (2.0 * std::f64::consts::PI * j_hz?)) };
    let gamma_p = deph.map(|x| x.gamma_p);
    Ok(RatesReport {
        gamma_p,
        alpha: deph.and_then(|x| x.alpha),
        long_correlation: deph.map(|x| x.long_correlation),
        gamma_loss,
        j_hz,
        gamma_p_over_j: in_j(gamma_p),
        gamma_loss_over_j: in_j(gamma_loss),
        trap: extraction,
    })
}

fn cmd_rates(c: &RatesConfig, a: &RunArgs) -> Result<Vec<PathBuf>> {
    let report = rates_report(c)?;
    let path = a.out.join("rates.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LifetimeCsvRow {
    pub z0_um: f64,
    pub tau_s: f64,
    pub sigma_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LifetimeReport {
    /// um^2/s
    pub c_total: f64,
    pub c1: f64,
    pub c1_cascaded: f64,
    pub c2: f64,
    #[serde(rename = "I_nA_sqrtHz")]
    pub i_na_sqrt_hz: f64,
    /// Set when `c2 <= 0`; the current is then an upper bound.
    pub johnson_dominated: bool,
    pub slope_free_fit: f64,
    pub points: usize,
    pub skin_depth_um: f64,
    pub n_th: f64,
}

pub fn read_lifetime_csv(path: &Path) -> Result<Vec<LifetimeRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize::<LifetimeCsvRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Ok(LifetimeRow {
                z0: row.z0_um * UM,
                tau: row.tau_s,
                sigma: row.sigma_s,
            })
        })
        .collect()
}

pub fn write_lifetime_csv(path: &Path, rows: &[LifetimeRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(LifetimeCsvRow {
            z0_um: r.z0 / UM,
            tau_s: r.tau,
            sigma_s: r.sigma,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn lifetime_report(data: &LifetimeDataset) -> Result<LifetimeReport> {
    let fit = fit_lifetimes(data)?;
    Ok(LifetimeReport {
        c_total: fit.c_total / UM2,
        c1: fit.c1_model / UM2,
        c1_cascaded: fit.c1_cascaded / UM2,
        c2: fit.c2 / UM2,
        i_na_sqrt_hz: fit.current * 1e9,
        johnson_dominated: fit.johnson_dominated,
        slope_free_fit: fit.slope_free,
        points: fit.points,
        skin_depth_um: data.chip.skin_depth() / UM,
        n_th: data.chip.thermal_occupation(),
    })
}

fn cmd_lifetime(c: &LifetimeConfig, a: &RunArgs, data: Option<&Path>) -> Result<Vec<PathBuf>> {
    let rows = match (data, &c.synthetic) {
        (Some(p), _) => read_lifetime_csv(p)?,
        (None, Some(s)) => {
            let z0: Vec<f64> = s.z0_um.iter().map(|z| z * UM).collect();
            synthetic_lifetimes(s.c_total * UM2, &z0, s.rel_sigma, a.seed.or(s.seed).unwrap_or(0))
        }
        (None, None) => return Err(Error::Config("lifetime needs --data or a `synthetic` block".into())),
    };
    let data_path = a.out.join("data.csv");
    write_lifetime_csv(&data_path, &rows)?;
    let report = lifetime_report(&LifetimeDataset { rows, chip: c.chip })?;
    let path = a.out.join("lifetime.json");
    write_json(&path, &report)?;
    Ok(vec![data_path, path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ground_report_values() {
        let c: GroundConfig = config::parse(r#"{"model": {"N": 50, "U": 0.25}}"#).unwrap();
        let r = ground_report(&c).unwrap();
        assert!((r.xi - 1.92).abs() < 0.005);
        assert!((r.omega_j - 3.67).abs() < 0.005);
        assert_eq!(r.regime, Regime::Josephson);
        assert_relative_eq!(r.g1_thermal.unwrap(), r.g1_ground.unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn linearized_rate_sums_channels() {
        let p = ModelParams::from_u(50, 12.5).unwrap();
        let f = linearized_rate(&p, &NoiseChannels::phase(0.01));
        assert_relative_eq!(f(0.0), 0.01, max_relative = 1e-12);
        let g = linearized_rate(&p, &NoiseChannels::default());
        assert_eq!(g(1.3), 0.0);
    }

    #[test]
    fn lifetime_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let rows = synthetic_lifetimes(65.0 * UM2, &[3e-6, 6e-6, 12e-6], 0.1, 3);
        write_lifetime_csv(&p, &rows).unwrap();
        let back = read_lifetime_csv(&p).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_relative_eq!(a.z0, b.z0, max_relative = 1e-14);
            assert_eq!(a.tau, b.tau);
        }
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("z0_um,tau_s,sigma_s\n"));
    }
}
