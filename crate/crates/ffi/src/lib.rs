//! C ABI over `bjj-core`.
//!
//! Every entry point returns a [`BjjStatus`]; results go through out-pointers.
//! On failure the message is available from [`bjj_last_error`] on the same
//! thread until the next call. Heap results are opaque handles released with
//! their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bjj_core::constants::{RB87_MASS, RB87_SCATTERING_LENGTH};
use bjj_core::lindblad::{evolve, uniform_grid, EvolutionResult, NoiseChannels, SectoredDensityMatrix};
use bjj_core::model::{
    characteristic_params, coherence_g1, ground_state, hamiltonian_tridiag, thermal_state, ModelParams, Regime,
};
use bjj_core::noise::{fit_lifetimes, ChipConstants, LifetimeDataset, LifetimeRow};
use bjj_core::semiclassical::{run_ensemble, SemiclassicalOptions, SemiclassicalResult};
use bjj_core::trap::{analyze, GridSpec, TrapSpec};
use bjj_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BjjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: BjjStatus, msg: impl Into<String>) -> BjjStatus {
    set_error(msg.into());
    status
}

fn from_core(e: Error) -> BjjStatus {
    let status = if e.is_config() {
        BjjStatus::InvalidArgument
    } else {
        BjjStatus::Numerical
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> Result<(), BjjStatus>>(f: F) -> BjjStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BjjStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BjjStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read<'a, T>(p: *const T, name: &str) -> Result<&'a T, BjjStatus> {
    p.as_ref().ok_or_else(|| fail(BjjStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn write<T>(p: *mut T, name: &str, value: T) -> Result<(), BjjStatus> {
    if p.is_null() {
        return Err(fail(BjjStatus::NullPointer, format!("`{name}` is null")));
    }
    p.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library; valid until the next `bjj_*` call on the same thread.
#[no_mangle]
pub extern "C" fn bjj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BjjParams {
    pub n: usize,
    pub epsilon: f64,
    pub j: f64,
    /// Interaction per pair.
    pub u: f64,
}

impl BjjParams {
    fn to_core(self) -> Result<ModelParams, BjjStatus> {
        ModelParams::new(self.n, self.epsilon, self.j, self.u).map_err(from_core)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BjjNoise {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
}

impl BjjNoise {
    fn to_core(self) -> Result<NoiseChannels, BjjStatus> {
        let nc = NoiseChannels {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma3: self.gamma3,
            gamma_l: self.gamma_l,
            gamma_r: self.gamma_r,
        };
        nc.validate().map_err(from_core)?;
        Ok(nc)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BjjRegime {
    Rabi = 0,
    Josephson = 1,
    Fock = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BjjCharacteristics {
    /// Dimensionless interaction `N U / J`.
    pub u: f64,
    pub xi: f64,
    pub omega_j: f64,
    pub eps_c: f64,
    pub regime: BjjRegime,
}

/// # Safety
/// `params` must be null or point to a valid `BjjParams`; `out` likewise for writing.
#[no_mangle]
pub unsafe extern "C" fn bjj_characteristics(params: *const BjjParams, out: *mut BjjCharacteristics) -> BjjStatus {
    guard(|| {
        let p = read(params, "params")?.to_core()?;
        let c = characteristic_params(&p);
        let regime = match c.regime {
            Regime::Rabi => BjjRegime::Rabi,
            Regime::Josephson => BjjRegime::Josephson,
            Regime::Fock => BjjRegime::Fock,
        };
        write(
            out,
            "out",
            BjjCharacteristics {
                u: c.u,
                xi: c.xi,
                omega_j: c.omega_j,
                eps_c: c.eps_c,
                regime,
            },
        )
    })
}

/// Coherence of the ground state.
///
/// # Safety
/// `params` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn bjj_ground_g1(params: *const BjjParams, out: *mut f64) -> BjjStatus {
    guard(|| {
        let p = read(params, "params")?.to_core()?;
        let gs = ground_state(&hamiltonian_tridiag(&p)).map_err(from_core)?;
        let g = coherence_g1(&gs.density()).map_err(from_core)?;
        write(out, "out", g)
    })
}

/// Coherence of the canonical state at temperature `kt` (units of energy, same as `J`).
///
/// # Safety
/// `params` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn bjj_thermal_g1(params: *const BjjParams, kt: f64, out: *mut f64) -> BjjStatus {
    guard(|| {
        let p = read(params, "params")?.to_core()?;
        let rho = thermal_state(&hamiltonian_tridiag(&p), kt).map_err(from_core)?;
        let g = coherence_g1(&rho).map_err(from_core)?;
        write(out, "out", g)
    })
}

/// Opaque result of [`bjj_evolve`].
pub struct BjjEvolution(EvolutionResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BjjColumn {
    Time = 0,
    S1 = 1,
    S2 = 2,
    S3 = 3,
    S3Sq = 4,
    G1 = 5,
    NMean = 6,
    /// `-d ln g1 / dt`; NaN where undefined.
    Gamma = 7,
    Trace = 8,
}

/// Evolves the ground state of `params` under `noise` and samples
/// `steps + 1` equally spaced times on `[0, t_end]`.
///
/// # Safety
/// `params`, `noise` and `out` must be null or valid. On success `*out` owns
/// a handle to be released with [`bjj_evolution_free`].
#[no_mangle]
pub unsafe extern "C" fn bjj_evolve(
    params: *const BjjParams,
    noise: *const BjjNoise,
    t_end: f64,
    steps: usize,
    tol: f64,
    out: *mut *mut BjjEvolution,
) -> BjjStatus {
    guard(|| {
        let p = read(params, "params")?.to_core()?;
        let nc = read(noise, "noise")?.to_core()?;
        if !(t_end > 0.0 && t_end.is_finite()) || steps == 0 {
            return Err(fail(BjjStatus::InvalidArgument, "need t_end > 0 and steps >= 1"));
        }
        let gs = ground_state(&hamiltonian_tridiag(&p)).map_err(from_core)?;
        let rho0 = SectoredDensityMatrix::pure(&gs.psi);
        let res = evolve(&rho0, &p, &nc, &uniform_grid(t_end, steps), tol).map_err(from_core)?;
        write(out, "out", Box::into_raw(Box::new(BjjEvolution(res))))
    })
}

/// Number of samples in the evolution, 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle from [`bjj_evolve`].
#[no_mangle]
pub unsafe extern "C" fn bjj_evolution_len(h: *const BjjEvolution) -> usize {
    h.as_ref().map_or(0, |e| e.0.t.len())
}

/// Copies one column into `buf`, which must hold `len` doubles with `len`
/// equal to [`bjj_evolution_len`].
///
/// # Safety
/// `h` must be a live handle and `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn bjj_evolution_column(
    h: *const BjjEvolution,
    column: BjjColumn,
    buf: *mut f64,
    len: usize,
) -> BjjStatus {
    guard(|| {
        let e = &read(h, "handle")?.0;
        if buf.is_null() {
            return Err(fail(BjjStatus::NullPointer, "`buf` is null"));
        }
        if len != e.t.len() {
            return Err(fail(
                BjjStatus::InvalidArgument,
                format!("buffer length {len} does not match {} samples", e.t.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        let src = match column {
            BjjColumn::Time => &e.t,
            BjjColumn::S1 => &e.s1,
            BjjColumn::S2 => &e.s2,
            BjjColumn::S3 => &e.s3,
            BjjColumn::S3Sq => &e.s3sq,
            BjjColumn::G1 => &e.g1,
            BjjColumn::NMean => &e.n_mean,
            BjjColumn::Trace => &e.trace,
            BjjColumn::Gamma => {
                for (d, g) in dst.iter_mut().zip(&e.gamma) {
                    *d = g.unwrap_or(f64::NAN);
                }
                return Ok(());
            }
        };
        dst.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`bjj_evolve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bjj_evolution_free(h: *mut BjjEvolution) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Opaque result of [`bjj_semiclassical`].
pub struct BjjEnsemble(SemiclassicalResult);

/// Truncated-Wigner ensemble of `trajectories` samples from the ground
/// state, recorded at `steps + 1` times on `[0, t_end]`. Deterministic for a
/// given `seed` regardless of thread count.
///
/// # Safety
/// `params`, `noise` and `out` must be null or valid. On success `*out` owns
/// a handle to be released with [`bjj_ensemble_free`].
#[no_mangle]
pub unsafe extern "C" fn bjj_semiclassical(
    params: *const BjjParams,
    noise: *const BjjNoise,
    t_end: f64,
    steps: usize,
    trajectories: usize,
    seed: u64,
    out: *mut *mut BjjEnsemble,
) -> BjjStatus {
    guard(|| {
        let p = read(params, "params")?.to_core()?;
        let nc = read(noise, "noise")?.to_core()?;
        if !(t_end > 0.0 && t_end.is_finite()) || steps == 0 {
            return Err(fail(BjjStatus::InvalidArgument, "need t_end > 0 and steps >= 1"));
        }
        let opts = SemiclassicalOptions {
            trajectories,
            seed,
            dt: None,
        };
        let res = run_ensemble(&p, &nc, &uniform_grid(t_end, steps), opts).map_err(from_core)?;
        write(out, "out", Box::into_raw(Box::new(BjjEnsemble(res))))
    })
}

/// # Safety
/// `h` must be null or a live handle from [`bjj_semiclassical`].
#[no_mangle]
pub unsafe extern "C" fn bjj_ensemble_len(h: *const BjjEnsemble) -> usize {
    h.as_ref().map_or(0, |e| e.0.t.len())
}

/// Copies the sample times and the direct and Gaussian coherence estimates.
/// Any of the three buffers may be null to skip it; each non-null buffer must
/// hold `len` doubles, `len` equal to [`bjj_ensemble_len`].
///
/// # Safety
/// `h` must be a live handle and each non-null buffer valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn bjj_ensemble_coherence(
    h: *const BjjEnsemble,
    t: *mut f64,
    direct: *mut f64,
    gaussian: *mut f64,
    len: usize,
) -> BjjStatus {
    guard(|| {
        let e = &read(h, "handle")?.0;
        if len != e.t.len() {
            return Err(fail(
                BjjStatus::InvalidArgument,
                format!("buffer length {len} does not match {} samples", e.t.len()),
            ));
        }
        for (buf, src) in [(t, &e.t), (direct, &e.direct), (gaussian, &e.gaussian)] {
            if !buf.is_null() {
                std::slice::from_raw_parts_mut(buf, len).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`bjj_semiclassical`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bjj_ensemble_free(h: *mut BjjEnsemble) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Double-well trap in SI units; `v0` is the barrier height over `h` in Hz.
/// Zero `mass` or `a_s` selects rubidium-87.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BjjTrapSpec {
    pub d: f64,
    pub v0: f64,
    pub omega_x: f64,
    pub omega_perp: f64,
    pub n: usize,
    pub mass: f64,
    pub a_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BjjTrapResult {
    /// Axial chemical potential (Hz).
    pub mu_parallel: f64,
    pub mu_chemical: f64,
    /// Tunneling and interaction over `h` (Hz).
    pub j: f64,
    pub u: f64,
    pub u_dimless: f64,
    pub xi: f64,
    pub omega_j_hz: f64,
    pub cross_ratio: f64,
    pub two_mode_valid: bool,
    pub fock: bool,
    pub loss_enhanced: bool,
}

/// Solves the trapped ground state on `points` grid points (0 for the
/// default) and extracts the two-mode parameters.
///
/// # Safety
/// `spec` and `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn bjj_trap_analyze(spec: *const BjjTrapSpec, points: usize, out: *mut BjjTrapResult) -> BjjStatus {
    guard(|| {
        let s = read(spec, "spec")?;
        let core = TrapSpec {
            d: s.d,
            v0: s.v0,
            omega_x: s.omega_x,
            omega_perp: s.omega_perp,
            n: s.n,
            mass: if s.mass == 0.0 { RB87_MASS } else { s.mass },
            a_s: if s.a_s == 0.0 { RB87_SCATTERING_LENGTH } else { s.a_s },
        };
        let mut grid = GridSpec::default();
        if points != 0 {
            grid.points = points;
        }
        let (_, _, x) = analyze(&core, &grid).map_err(from_core)?;
        write(
            out,
            "out",
            BjjTrapResult {
                mu_parallel: x.mu_parallel,
                mu_chemical: x.mu_chemical,
                j: x.j,
                u: x.u,
                u_dimless: x.u_dimless,
                xi: x.xi,
                omega_j_hz: x.omega_j_hz,
                cross_ratio: x.cross_ratio,
                two_mode_valid: x.flags.two_mode_valid,
                fock: x.flags.fock,
                loss_enhanced: x.flags.loss_enhanced,
            },
        )
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BjjLifetimeFit {
    /// Coefficients of `1/tau = c / z0^2` (m^2/s).
    pub c_total: f64,
    pub c1: f64,
    pub c2: f64,
    /// Current noise (A/sqrt(Hz)); an upper bound when `johnson_dominated`.
    pub current: f64,
    pub johnson_dominated: bool,
    pub slope_free: f64,
}

/// Fits `n` lifetime measurements (distance in m, lifetime and its error in
/// s) with the default gold-chip constants.
///
/// # Safety
/// `z0`, `tau` and `sigma` must each be valid for `n` reads; `out` must be
/// null or valid.
#[no_mangle]
pub unsafe extern "C" fn bjj_lifetime_fit(
    z0: *const f64,
    tau: *const f64,
    sigma: *const f64,
    n: usize,
    out: *mut BjjLifetimeFit,
) -> BjjStatus {
    guard(|| {
        if z0.is_null() || tau.is_null() || sigma.is_null() {
            return Err(fail(BjjStatus::NullPointer, "data pointer is null"));
        }
        let (z0, tau, sigma) = (
            std::slice::from_raw_parts(z0, n),
            std::slice::from_raw_parts(tau, n),
            std::slice::from_raw_parts(sigma, n),
        );
        let rows = (0..n)
            .map(|i| LifetimeRow {
                z0: z0[i],
                tau: tau[i],
                sigma: sigma[i],
            })
            .collect();
        let fit = fit_lifetimes(&LifetimeDataset {
            rows,
            chip: ChipConstants::default(),
        })
        .map_err(from_core)?;
        write(
            out,
            "out",
            BjjLifetimeFit {
                c_total: fit.c_total,
                c1: fit.c1_cascaded,
                c2: fit.c2,
                current: fit.current,
                johnson_dominated: fit.johnson_dominated,
                slope_free: fit.slope_free,
            },
        )
    })
}
