//! C interface to the differential count-rate scanner.
//!
//! Conventions: fallible calls return a [`RatescanStatus`] and write their
//! result through an out-pointer; `RATESCAN_STATUS_OK` means the out-pointer
//! is valid. Handles returned through out-pointers are owned by the caller
//! and must be released with the matching `*_free`. Accessors copy into
//! caller-provided buffers whose length must match exactly. On any failure a
//! human-readable message is stored per thread and can be read with
//! [`ratescan_last_error_message`] until the next failing call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ratescan::ebayes::estimate_gamma_hyperparams;
use ratescan::multires::run_multiscale;
use ratescan::{CountTrack, Error, Hyperparams, SamplerConfig};

/// Outcome of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RatescanStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was outside its admissible domain.
    InvalidArgument = 2,
    /// A track file was malformed.
    ParseError = 3,
    /// The problem exceeds a hard size limit.
    TooLarge = 4,
    /// The operating system reported a failure.
    IoError = 5,
    /// An internal invariant failed; please report a bug.
    InternalError = 6,
}

/// Two-group count track over ordered positions (opaque).
pub struct RatescanTrack {
    inner: CountTrack,
}

/// Result of a scan (opaque): per-position posterior probabilities of
/// differential rates, the flagged subset, and work statistics.
pub struct RatescanResult {
    omegas: Vec<(i64, f64)>,
    flagged: Vec<(i64, f64)>,
    invocations: usize,
}

/// Scan configuration.
///
/// `alpha` and `beta` are the shape and rate of the Gamma prior on cluster
/// rates; leave either at zero (or negative) to fit both from the track's
/// pooled counts. `diff_prob` is the prior probability that a position is
/// differential, `threshold` the posterior probability above which positions
/// are flagged and below which intervals may be pruned, `dp_precision` the
/// Dirichlet-process concentration. `max_depth` of zero tests every position
/// in a single chain; a positive depth scans a binary interval tree of that
/// height, pruning intervals whose aggregate evidence is compatible with no
/// differential position.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RatescanOptions {
    pub alpha: f64,
    pub beta: f64,
    pub dp_precision: f64,
    pub diff_prob: f64,
    pub threshold: f64,
    pub sweeps: u64,
    pub burnin: u64,
    pub seed: u64,
    pub max_depth: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_message(msg: &str) {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn remember(err: &Error) -> RatescanStatus {
    set_message(&err.to_string());
    match err {
        Error::InvalidTrack(_) | Error::Domain(_) => RatescanStatus::InvalidArgument,
        Error::Parse { .. } => RatescanStatus::ParseError,
        Error::TooLarge(_) => RatescanStatus::TooLarge,
        Error::Io(_) => RatescanStatus::IoError,
        Error::InvalidState(_) => RatescanStatus::InternalError,
    }
}

fn null_arg() -> RatescanStatus {
    set_message("a required pointer argument was null");
    RatescanStatus::NullPointer
}

/// Unwinding across the C boundary is undefined behavior; trap it.
fn guarded<F: FnOnce() -> RatescanStatus>(f: F) -> RatescanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_message("internal panic");
            RatescanStatus::InternalError
        }
    }
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

fn emit_track(track: ratescan::Result<CountTrack>, out: *mut *mut RatescanTrack) -> RatescanStatus {
    match track {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(RatescanTrack { inner })) };
            RatescanStatus::Ok
        }
        Err(e) => remember(&e),
    }
}

/// Message describing the most recent failure on this thread. Never null;
/// empty before the first failure. Valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn ratescan_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ratescan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Build a track with unit exposures from parallel arrays of length `len`.
/// Positions must be strictly increasing.
///
/// # Safety
/// The three input pointers must address `len` readable elements each and
/// `out` must be a valid location to store the new handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_track_new(
    positions: *const i64,
    counts1: *const u64,
    counts2: *const u64,
    len: usize,
    out: *mut *mut RatescanTrack,
) -> RatescanStatus {
    guarded(|| {
        let args = (slice_arg(positions, len), slice_arg(counts1, len), slice_arg(counts2, len));
        let (Some(p), Some(c1), Some(c2)) = args else {
            return null_arg();
        };
        if out.is_null() {
            return null_arg();
        }
        emit_track(CountTrack::new(p.to_vec(), c1.to_vec(), c2.to_vec()), out)
    })
}

/// Like [`ratescan_track_new`] with per-position, per-group exposures, which
/// must be positive and finite.
///
/// # Safety
/// All five input pointers must address `len` readable elements each and
/// `out` must be a valid location to store the new handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_track_new_with_exposures(
    positions: *const i64,
    counts1: *const u64,
    counts2: *const u64,
    exposures1: *const f64,
    exposures2: *const f64,
    len: usize,
    out: *mut *mut RatescanTrack,
) -> RatescanStatus {
    guarded(|| {
        let args = (
            slice_arg(positions, len),
            slice_arg(counts1, len),
            slice_arg(counts2, len),
            slice_arg(exposures1, len),
            slice_arg(exposures2, len),
        );
        let (Some(p), Some(c1), Some(c2), Some(e1), Some(e2)) = args else {
            return null_arg();
        };
        if out.is_null() {
            return null_arg();
        }
        emit_track(
            CountTrack::with_exposures(p.to_vec(), c1.to_vec(), c2.to_vec(), e1.to_vec(), e2.to_vec()),
            out,
        )
    })
}

/// Read a track from a CSV file with header
/// `position,count1,count2[,exposure1,exposure2]`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid location
/// to store the new handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_track_from_csv(
    path: *const c_char,
    out: *mut *mut RatescanTrack,
) -> RatescanStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return null_arg();
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_message("path is not valid UTF-8");
            return RatescanStatus::InvalidArgument;
        };
        emit_track(ratescan::io::read_track(path), out)
    })
}

/// Number of positions, or 0 for a null handle.
///
/// # Safety
/// `track` must be null or a live handle from a `ratescan_track_*` call.
#[no_mangle]
pub unsafe extern "C" fn ratescan_track_len(track: *const RatescanTrack) -> usize {
    if track.is_null() {
        0
    } else {
        (*track).inner.len()
    }
}

/// Release a track handle. Null is ignored.
///
/// # Safety
/// `track` must be null or an owned handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ratescan_track_free(track: *mut RatescanTrack) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}

/// Default options: hyperparameters fitted from the data, uninformative 0.5
/// prior and threshold, 10k sweeps with 2k burn-in, depth-10 tree.
#[no_mangle]
pub extern "C" fn ratescan_options_default() -> RatescanOptions {
    RatescanOptions {
        alpha: 0.0,
        beta: 0.0,
        dp_precision: 1.0,
        diff_prob: 0.5,
        threshold: 0.5,
        sweeps: 10_000,
        burnin: 2_000,
        seed: 0,
        max_depth: 10,
    }
}

/// Scan a track for regions of differential rates. Identical inputs (track,
/// options, seed) produce identical results.
///
/// # Safety
/// `track` must be a live track handle, `options` a readable options struct,
/// and `out` a valid location to store the new result handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_scan(
    track: *const RatescanTrack,
    options: *const RatescanOptions,
    out: *mut *mut RatescanResult,
) -> RatescanStatus {
    guarded(|| {
        if track.is_null() || options.is_null() || out.is_null() {
            return null_arg();
        }
        let track = &(*track).inner;
        let opt = *options;
        let (alpha, beta) = if opt.alpha > 0.0 && opt.beta > 0.0 {
            (opt.alpha, opt.beta)
        } else {
            estimate_gamma_hyperparams(track)
        };
        let run = (|| {
            let hp = Hyperparams::new(alpha, beta, opt.dp_precision, opt.diff_prob, opt.threshold)?;
            let cfg = SamplerConfig::new(opt.sweeps as usize, opt.burnin as usize, opt.seed)?;
            run_multiscale(track, &hp, &cfg, opt.max_depth as usize)
        })();
        match run {
            Ok(res) => {
                let mut omegas = res.position_omegas;
                omegas.sort_by_key(|&(p, _)| p);
                let mut flagged = res.flagged;
                flagged.sort_by_key(|&(p, _)| p);
                let handle = RatescanResult {
                    omegas,
                    flagged,
                    invocations: res.stats.sampler_invocations,
                };
                *out = Box::into_raw(Box::new(handle));
                RatescanStatus::Ok
            }
            Err(e) => remember(&e),
        }
    })
}

/// Number of scored positions (the track length), or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_result_len(result: *const RatescanResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).omegas.len()
    }
}

/// Number of positions whose posterior exceeded the threshold.
///
/// # Safety
/// `result` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_result_flagged_len(result: *const RatescanResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).flagged.len()
    }
}

/// Chains run during the scan (pruning makes this far smaller than a
/// position-by-position pass on long tracks).
///
/// # Safety
/// `result` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ratescan_result_invocations(result: *const RatescanResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).invocations
    }
}

unsafe fn copy_pairs(
    pairs: &[(i64, f64)],
    positions: *mut i64,
    omegas: *mut f64,
    len: usize,
) -> RatescanStatus {
    if len != pairs.len() {
        set_message(&format!("buffer length {len} does not match result length {}", pairs.len()));
        return RatescanStatus::InvalidArgument;
    }
    for (i, &(p, om)) in pairs.iter().enumerate() {
        if !positions.is_null() {
            *positions.add(i) = p;
        }
        if !omegas.is_null() {
            *omegas.add(i) = om;
        }
    }
    RatescanStatus::Ok
}

/// Copy positions and their posterior probabilities, ordered by position,
/// into caller buffers of exactly [`ratescan_result_len`] elements. Either
/// buffer may be null to skip that column.
///
/// # Safety
/// `result` must be a live result handle; non-null buffers must hold `len`
/// writable elements.
#[no_mangle]
pub unsafe extern "C" fn ratescan_result_omegas(
    result: *const RatescanResult,
    positions: *mut i64,
    omegas: *mut f64,
    len: usize,
) -> RatescanStatus {
    guarded(|| {
        if result.is_null() {
            return null_arg();
        }
        copy_pairs(&(*result).omegas, positions, omegas, len)
    })
}

/// Copy the flagged positions and their posteriors, ordered by position,
/// into caller buffers of exactly [`ratescan_result_flagged_len`] elements.
/// Either buffer may be null to skip that column.
///
/// # Safety
/// `result` must be a live result handle; non-null buffers must hold `len`
/// writable elements.
#[no_mangle]
pub unsafe extern "C" fn ratescan_result_flagged(
    result: *const RatescanResult,
    positions: *mut i64,
    omegas: *mut f64,
    len: usize,
) -> RatescanStatus {
    guarded(|| {
        if result.is_null() {
            return null_arg();
        }
        copy_pairs(&(*result).flagged, positions, omegas, len)
    })
}

/// Release a result handle. Null is ignored.
///
/// # Safety
/// `result` must be null or an owned handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ratescan_result_free(result: *mut RatescanResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
