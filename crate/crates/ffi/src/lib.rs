//! C ABI over `echo_lab`.
//!
//! Every fallible call returns an [`EchoStatus`]; on failure the message is
//! kept per thread and can be copied out with [`echo_last_error_message`].
//! Echo runs live behind an opaque [`EchoKrRun`] pointer that the caller
//! releases with [`echo_kr_run_free`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use echo_lab::kicked_rotor::{echo_amplitudes, EchoRecord, KickOrder, KickedRotorParams};
use echo_lab::metrics::{fit_exp_rate, EchoObservables};
use echo_lab::quantum::{default_sigma, make_grid, MixtureSpec, Region};
use echo_lab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotNormalized = 3,
    NormDrift = 4,
    NonConvergence = 5,
    FitFailed = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// Kick ordering inside one Floquet period.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoKickOrder {
    DriftThenKick = 0,
    KickThenDrift = 1,
}

/// Parameters of a kicked-rotor echo run over a random packet mixture.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EchoKrConfig {
    /// Hilbert-space dimension; ħ = 2π/n.
    pub n: usize,
    pub kick_strength: f64,
    /// Perturbation in units of ħ.
    pub eps_over_hbar: f64,
    pub packets: usize,
    pub steps: usize,
    pub seed: u64,
    /// Mixture region in units of 2π.
    pub theta_min: f64,
    pub theta_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub kick_order: EchoKickOrder,
}

/// Opaque result of [`echo_kr_run`].
pub struct EchoKrRun {
    record: EchoRecord,
    observables: EchoObservables,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EchoStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::ShapeMismatch(_) | Error::GridMismatch(_) => {
            EchoStatus::InvalidArgument
        }
        Error::NotNormalized { .. } => EchoStatus::NotNormalized,
        Error::NormDrift { .. } => EchoStatus::NormDrift,
        Error::NonConvergence { .. } => EchoStatus::NonConvergence,
        Error::Fit(_) => EchoStatus::FitFailed,
        Error::OracleTooLarge { .. } => EchoStatus::OutOfRange,
        _ => EchoStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (EchoStatus, String)>) -> EchoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EchoStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EchoStatus::Internal
        }
    }
}

fn lift(e: Error) -> (EchoStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EchoStatus, String) {
    (EchoStatus::NullPointer, format!("`{what}` is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn echo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn echo_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Defaults of the standard experiment: N = 8192, K = 10, ε/ħ = 1.1,
/// 100 packets, 40 steps.
#[no_mangle]
pub extern "C" fn echo_kr_config_default() -> EchoKrConfig {
    let r = Region::fig1();
    EchoKrConfig {
        n: 8192,
        kick_strength: 10.0,
        eps_over_hbar: 1.1,
        packets: 100,
        steps: 40,
        seed: 20240521,
        theta_min: r.theta_min,
        theta_max: r.theta_max,
        p_min: r.p_min,
        p_max: r.p_max,
        kick_order: EchoKickOrder::DriftThenKick,
    }
}

/// Propagates every packet of the mixture under both branches and stores the
/// echo amplitudes. On success `*out` owns a new run.
///
/// # Safety
/// `config` must point to a valid config and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_run(config: *const EchoKrConfig, out: *mut *mut EchoKrRun) -> EchoStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let grid = make_grid(cfg.n).map_err(lift)?;
        let order = match cfg.kick_order {
            EchoKickOrder::DriftThenKick => KickOrder::DriftThenKick,
            EchoKickOrder::KickThenDrift => KickOrder::KickThenDrift,
        };
        let params = KickedRotorParams::new(grid, cfg.kick_strength, cfg.eps_over_hbar * grid.hbar())
            .map_err(lift)?
            .with_kick_order(order);
        let region = Region::new(cfg.theta_min, cfg.theta_max, cfg.p_min, cfg.p_max).map_err(lift)?;
        let mixture = MixtureSpec::random(region, cfg.packets, default_sigma(&grid), cfg.seed).map_err(lift)?;
        let record = echo_amplitudes(&mixture, &params, cfg.steps, false).map_err(lift)?;
        let observables = EchoObservables::from_record(&record).map_err(lift)?;
        *out = Box::into_raw(Box::new(EchoKrRun { record, observables }));
        Ok(())
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a pointer obtained from [`echo_kr_run`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_run_free(run: *mut EchoKrRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded times (steps + 1); zero for a null run.
///
/// # Safety
/// `run` must be null or a live run.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_len(run: *const EchoKrRun) -> usize {
    run.as_ref().map_or(0, |r| r.record.times.len())
}

/// Number of packets in the mixture; zero for a null run.
///
/// # Safety
/// `run` must be null or a live run.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_packets(run: *const EchoKrRun) -> usize {
    run.as_ref().map_or(0, |r| r.record.amplitudes.len())
}

unsafe fn copy_series(run: *const EchoKrRun, out: *mut f64, len: usize, pick: fn(&EchoObservables) -> &[f64]) -> EchoStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let src = pick(&r.observables);
        if len < src.len() {
            return Err((EchoStatus::BufferTooSmall, format!("need {} values, got room for {len}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
        Ok(())
    })
}

/// Copies the allegiance curve into `out` (at least [`echo_kr_len`] values).
///
/// # Safety
/// `run` must be a live run and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_allegiance(run: *const EchoKrRun, out: *mut f64, len: usize) -> EchoStatus {
    copy_series(run, out, len, |o| &o.allegiance)
}

/// Copies the averaged fidelity curve into `out`.
///
/// # Safety
/// `run` must be a live run and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_avg_fidelity(run: *const EchoKrRun, out: *mut f64, len: usize) -> EchoStatus {
    copy_series(run, out, len, |o| &o.avg_fidelity)
}

/// Echo amplitude of one packet at one recorded time.
///
/// # Safety
/// `run` must be a live run; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn echo_kr_amplitude(
    run: *const EchoKrRun,
    packet: usize,
    time_index: usize,
    re: *mut f64,
    im: *mut f64,
) -> EchoStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let f = r
            .record
            .amplitudes
            .get(packet)
            .and_then(|a| a.get(time_index))
            .ok_or_else(|| (EchoStatus::OutOfRange, format!("no amplitude at packet {packet}, time index {time_index}")))?;
        *re = f.re;
        *im = f.im;
        Ok(())
    })
}

/// Standard-map Lyapunov exponent averaged over ten seeded starting points.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn echo_lyapunov(k: f64, n_transient: usize, n_iter: usize, seed: u64, out: *mut f64) -> EchoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = echo_lab::classical::lyapunov(k, n_transient, n_iter, seed).map_err(lift)?.mean;
        Ok(())
    })
}

/// Least-squares exponential rate of `values` against `times` on
/// `[t1, t2]`. Pass NaN as `saturation` to disable plateau truncation.
///
/// # Safety
/// `times` and `values` must hold `len` doubles; `rate` must be writable and
/// `stderr` may be null.
#[no_mangle]
pub unsafe extern "C" fn echo_fit_exp_rate(
    times: *const f64,
    values: *const f64,
    len: usize,
    t1: f64,
    t2: f64,
    saturation: f64,
    rate: *mut f64,
    stderr: *mut f64,
) -> EchoStatus {
    guard(|| {
        if times.is_null() || values.is_null() || rate.is_null() {
            return Err(null("times/values/rate"));
        }
        let t = std::slice::from_raw_parts(times, len);
        let v = std::slice::from_raw_parts(values, len);
        let sat = (!saturation.is_nan()).then_some(saturation);
        let fit = fit_exp_rate(t, v, (t1, t2), sat).map_err(lift)?;
        *rate = fit.rate;
        if !stderr.is_null() {
            *stderr = fit.stderr;
        }
        Ok(())
    })
}
