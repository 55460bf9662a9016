//! C ABI for the epconc toolkit: flat functions, plain structs, and an
//! opaque yield-table handle, so other languages can run the protocol
//! and read the closed-form analysis without touching Rust types.
//!
//! Conventions: every fallible call returns an [`EpconcStatus`] and
//! writes its result through an out-pointer; strings returned through
//! `char **` are NUL-terminated, owned by the library, and must be
//! released with [`epconc_string_free`]; handles must be released with
//! their matching `_free` function. All functions are safe to call from
//! any thread as long as a handle is not freed while in use.

use epconc::analysis;
use epconc::circuits::PermDirection;
use epconc::cli::{cmd_export, yield_table_to_csv, NetworkKind};
use epconc::protocol::{run_protocol, run_trials, Engine, PairParams, ProtocolError};
use epconc::YieldTable;
use std::ffi::{c_char, CString};

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EpconcStatus {
    /// The call succeeded and any out-parameters are valid.
    EpconcOk = 0,
    /// A parameter was out of range or inconsistent.
    EpconcInvalidArgument = 1,
    /// The requested size exceeds an engine limit.
    EpconcLimitExceeded = 2,
    /// A required pointer was NULL.
    EpconcNullPointer = 3,
    /// An internal invariant failed; not expected in normal use.
    EpconcInternalError = 4,
}

/// Simulation backend selector.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EpconcEngine {
    /// Compressed matched-pair engine; handles up to 20 shared pairs.
    EpconcEngineMirrored = 0,
    /// Literal two-party engine; handles up to 6 shared pairs.
    EpconcEngineFull = 1,
}

/// Network selector for netlist export.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EpconcNetwork {
    EpconcNetworkHamming = 0,
    EpconcNetworkPerm = 1,
    EpconcNetworkCascade = 2,
}

/// Direction selector for the ranking network.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EpconcDirection {
    EpconcDirectionInverse = 0,
    EpconcDirectionForward = 1,
}

/// Observables of one protocol run.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EpconcProtocolResult {
    /// Measured Hamming weight j.
    pub weight: u32,
    /// Bit length k of C(n,j).
    pub bit_length: u32,
    /// Cascade stop iteration l.
    pub stop_index: u32,
    /// Number of clean pairs distilled, k - l - 1.
    pub pairs: u32,
    /// Fidelity of the retained state against the ideal reference.
    pub fidelity: f64,
}

/// One per-weight row of a yield table.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EpconcYieldRow {
    pub weight: u32,
    pub probability: f64,
    pub bit_length: u32,
    pub expected_pairs: f64,
    pub lower_bound: f64,
    /// NaN when no trial measured this weight.
    pub empirical_mean: f64,
    pub trials: u64,
}

/// Aggregates of a yield table.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EpconcYieldTotals {
    pub expected_pairs: f64,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub entropy_ceiling: f64,
    pub expected_entropy: f64,
    pub lower_bound: f64,
    pub lower_bound_clamped: f64,
    pub trials: u64,
}

/// Opaque aggregated trial statistics; release with
/// [`epconc_yield_table_free`].
pub struct EpconcYieldTable {
    inner: YieldTable,
}

fn status_of(err: &ProtocolError) -> EpconcStatus {
    match err {
        ProtocolError::InvalidAlpha(_) | ProtocolError::NoPairs => {
            EpconcStatus::EpconcInvalidArgument
        }
        ProtocolError::EngineLimit { .. } => EpconcStatus::EpconcLimitExceeded,
        _ => EpconcStatus::EpconcInternalError,
    }
}

fn engine_of(engine: EpconcEngine) -> Engine {
    match engine {
        EpconcEngine::EpconcEngineMirrored => Engine::Mirrored,
        EpconcEngine::EpconcEngineFull => Engine::Full,
    }
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn epconc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Run the protocol once with the given seed.
///
/// # Safety
/// `out` must point to writable memory for one `EpconcProtocolResult`.
#[no_mangle]
pub unsafe extern "C" fn epconc_run_protocol(
    alpha: f64,
    n: u32,
    seed: u64,
    engine: EpconcEngine,
    out: *mut EpconcProtocolResult,
) -> EpconcStatus {
    if out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    let params = match PairParams::new(alpha, n as usize) {
        Ok(p) => p,
        Err(e) => return status_of(&e),
    };
    match run_protocol(&params, seed, engine_of(engine)) {
        Ok(o) => {
            out.write(EpconcProtocolResult {
                weight: o.j as u32,
                bit_length: o.k as u32,
                stop_index: o.l as u32,
                pairs: o.pairs as u32,
                fidelity: o.fidelity_vs_ideal,
            });
            EpconcStatus::EpconcOk
        }
        Err(e) => status_of(&e),
    }
}

/// Run independent seeded trials and hand back the aggregated table.
///
/// # Safety
/// `out` must point to writable memory for one pointer. On success it
/// receives a handle that must be released with
/// [`epconc_yield_table_free`].
#[no_mangle]
pub unsafe extern "C" fn epconc_run_trials(
    alpha: f64,
    n: u32,
    trials: u64,
    seed: u64,
    engine: EpconcEngine,
    out: *mut *mut EpconcYieldTable,
) -> EpconcStatus {
    if out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    if trials == 0 {
        return EpconcStatus::EpconcInvalidArgument;
    }
    let params = match PairParams::new(alpha, n as usize) {
        Ok(p) => p,
        Err(e) => return status_of(&e),
    };
    match run_trials(&params, trials, seed, engine_of(engine)) {
        Ok(table) => {
            out.write(Box::into_raw(Box::new(EpconcYieldTable { inner: table })));
            EpconcStatus::EpconcOk
        }
        Err(e) => status_of(&e),
    }
}

/// Release a yield table handle. NULL is ignored.
///
/// # Safety
/// `table` must have come from [`epconc_run_trials`] and not have been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn epconc_yield_table_free(table: *mut EpconcYieldTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of rows (one per weight 0..=n) in the table.
///
/// # Safety
/// `table` must be a live handle from [`epconc_run_trials`].
#[no_mangle]
pub unsafe extern "C" fn epconc_yield_table_rows(table: *const EpconcYieldTable) -> usize {
    if table.is_null() {
        return 0;
    }
    (*table).inner.rows.len()
}

/// Copy out one row.
///
/// # Safety
/// `table` must be a live handle and `out` writable for one row.
#[no_mangle]
pub unsafe extern "C" fn epconc_yield_table_row(
    table: *const EpconcYieldTable,
    index: usize,
    out: *mut EpconcYieldRow,
) -> EpconcStatus {
    if table.is_null() || out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    let rows = &(*table).inner.rows;
    let Some(row) = rows.get(index) else {
        return EpconcStatus::EpconcInvalidArgument;
    };
    out.write(EpconcYieldRow {
        weight: row.j as u32,
        probability: row.prob_j,
        bit_length: row.k as u32,
        expected_pairs: row.expected_pairs_exact,
        lower_bound: row.lower_bound_k_minus_2,
        empirical_mean: row.empirical_mean,
        trials: row.trials,
    });
    EpconcStatus::EpconcOk
}

/// Copy out the aggregate statistics.
///
/// # Safety
/// `table` must be a live handle and `out` writable for one totals
/// struct.
#[no_mangle]
pub unsafe extern "C" fn epconc_yield_table_totals(
    table: *const EpconcYieldTable,
    out: *mut EpconcYieldTotals,
) -> EpconcStatus {
    if table.is_null() || out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    let t = &(*table).inner.totals;
    out.write(EpconcYieldTotals {
        expected_pairs: t.expected_pairs,
        empirical_mean: t.empirical_mean,
        empirical_variance: t.empirical_variance,
        entropy_ceiling: t.entropy_ceiling,
        expected_entropy: t.expected_entropy,
        lower_bound: t.lower_bound,
        lower_bound_clamped: t.lower_bound_clamped,
        trials: t.trials,
    });
    EpconcStatus::EpconcOk
}

/// Render the table in its fixed-column CSV form.
///
/// # Safety
/// `table` must be a live handle and `out` writable for one pointer.
/// The returned string must be released with [`epconc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn epconc_yield_table_csv(
    table: *const EpconcYieldTable,
    out: *mut *mut c_char,
) -> EpconcStatus {
    if table.is_null() || out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    match CString::new(yield_table_to_csv(&(*table).inner)) {
        Ok(s) => {
            out.write(s.into_raw());
            EpconcStatus::EpconcOk
        }
        Err(_) => EpconcStatus::EpconcInternalError,
    }
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must have come from this library and not have been freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn epconc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Binary entropy H(p) in bits.
///
/// # Safety
/// `out` must be writable for one double.
#[no_mangle]
pub unsafe extern "C" fn epconc_binary_entropy(p: f64, out: *mut f64) -> EpconcStatus {
    if out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    match analysis::binary_entropy(p) {
        Ok(v) => {
            out.write(v);
            EpconcStatus::EpconcOk
        }
        Err(_) => EpconcStatus::EpconcInvalidArgument,
    }
}

/// Analytic expected number of clean pairs per run.
///
/// # Safety
/// `out` must be writable for one double.
#[no_mangle]
pub unsafe extern "C" fn epconc_expected_pairs(
    alpha: f64,
    n: u32,
    out: *mut f64,
) -> EpconcStatus {
    if out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    match analysis::expected_pairs_total(alpha, n as usize) {
        Ok(y) => {
            out.write(y.expected_pairs);
            EpconcStatus::EpconcOk
        }
        Err(_) => EpconcStatus::EpconcInvalidArgument,
    }
}

/// Expected concentrated entropy of entanglement for (alpha, n).
///
/// # Safety
/// `out` must be writable for one double.
#[no_mangle]
pub unsafe extern "C" fn epconc_expected_concentrated_entropy(
    alpha: f64,
    n: u32,
    out: *mut f64,
) -> EpconcStatus {
    if out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    match analysis::expected_concentrated_entropy(alpha, n as usize) {
        Ok(v) => {
            out.write(v);
            EpconcStatus::EpconcOk
        }
        Err(_) => EpconcStatus::EpconcInvalidArgument,
    }
}

/// Render one of the reversible networks as a text netlist.
///
/// `j` is ignored for the Hamming network; `direction` only matters for
/// the ranking network.
///
/// # Safety
/// `out` must be writable for one pointer. The returned string must be
/// released with [`epconc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn epconc_netlist(
    network: EpconcNetwork,
    n: u32,
    j: u32,
    direction: EpconcDirection,
    out: *mut *mut c_char,
) -> EpconcStatus {
    if out.is_null() {
        return EpconcStatus::EpconcNullPointer;
    }
    let kind = match network {
        EpconcNetwork::EpconcNetworkHamming => NetworkKind::Hamming,
        EpconcNetwork::EpconcNetworkPerm => NetworkKind::Perm,
        EpconcNetwork::EpconcNetworkCascade => NetworkKind::Cascade,
    };
    let weight = match kind {
        NetworkKind::Hamming => None,
        _ => Some(j as usize),
    };
    let dir = match direction {
        EpconcDirection::EpconcDirectionInverse => PermDirection::InverseF,
        EpconcDirection::EpconcDirectionForward => PermDirection::ForwardF,
    };
    match cmd_export(kind, n as usize, weight, dir) {
        Ok(text) => match CString::new(text) {
            Ok(s) => {
                out.write(s.into_raw());
                EpconcStatus::EpconcOk
            }
            Err(_) => EpconcStatus::EpconcInternalError,
        },
        Err(_) => EpconcStatus::EpconcInvalidArgument,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn protocol_roundtrip_through_the_abi() {
        let mut result = EpconcProtocolResult {
            weight: 99,
            bit_length: 0,
            stop_index: 0,
            pairs: 0,
            fidelity: 0.0,
        };
        let status = unsafe {
            epconc_run_protocol(
                std::f64::consts::FRAC_1_SQRT_2,
                3,
                7,
                EpconcEngine::EpconcEngineMirrored,
                &mut result,
            )
        };
        assert_eq!(status, EpconcStatus::EpconcOk);
        assert!(result.weight <= 3);
        assert_eq!(result.pairs, result.bit_length - result.stop_index - 1);
        assert!(result.fidelity >= 1.0 - 1e-9);
    }

    #[test]
    fn invalid_arguments_map_to_statuses() {
        let mut result = EpconcProtocolResult {
            weight: 0,
            bit_length: 0,
            stop_index: 0,
            pairs: 0,
            fidelity: 0.0,
        };
        let status = unsafe {
            epconc_run_protocol(1.5, 3, 7, EpconcEngine::EpconcEngineMirrored, &mut result)
        };
        assert_eq!(status, EpconcStatus::EpconcInvalidArgument);
        let status = unsafe {
            epconc_run_protocol(0.6, 9, 7, EpconcEngine::EpconcEngineFull, &mut result)
        };
        assert_eq!(status, EpconcStatus::EpconcLimitExceeded);
        let status = unsafe {
            epconc_run_protocol(0.6, 3, 7, EpconcEngine::EpconcEngineMirrored, ptr::null_mut())
        };
        assert_eq!(status, EpconcStatus::EpconcNullPointer);
    }

    #[test]
    fn yield_table_handle_lifecycle() {
        let mut table: *mut EpconcYieldTable = ptr::null_mut();
        let status = unsafe {
            epconc_run_trials(
                std::f64::consts::FRAC_1_SQRT_2,
                3,
                500,
                1,
                EpconcEngine::EpconcEngineMirrored,
                &mut table,
            )
        };
        assert_eq!(status, EpconcStatus::EpconcOk);
        assert!(!table.is_null());
        unsafe {
            assert_eq!(epconc_yield_table_rows(table), 4);
            let mut row = std::mem::zeroed::<EpconcYieldRow>();
            assert_eq!(epconc_yield_table_row(table, 1, &mut row), EpconcStatus::EpconcOk);
            assert_eq!(row.weight, 1);
            assert!((row.probability - 0.375).abs() < 1e-12);
            assert_eq!(
                epconc_yield_table_row(table, 9, &mut row),
                EpconcStatus::EpconcInvalidArgument
            );
            let mut totals = std::mem::zeroed::<EpconcYieldTotals>();
            assert_eq!(epconc_yield_table_totals(table, &mut totals), EpconcStatus::EpconcOk);
            assert_eq!(totals.trials, 500);
            assert!((totals.expected_pairs - 0.5).abs() < 1e-12);
            let mut csv: *mut c_char = ptr::null_mut();
            assert_eq!(epconc_yield_table_csv(table, &mut csv), EpconcStatus::EpconcOk);
            let text = std::ffi::CStr::from_ptr(csv).to_str().unwrap().to_string();
            assert!(text.starts_with("j,prob_j,k,"));
            epconc_string_free(csv);
            epconc_yield_table_free(table);
        }
    }

    #[test]
    fn netlist_and_scalars() {
        let mut value = 0.0f64;
        assert_eq!(unsafe { epconc_binary_entropy(0.5, &mut value) }, EpconcStatus::EpconcOk);
        assert_eq!(value, 1.0);
        assert_eq!(
            unsafe { epconc_binary_entropy(2.0, &mut value) },
            EpconcStatus::EpconcInvalidArgument
        );
        assert_eq!(
            unsafe { epconc_expected_pairs(std::f64::consts::FRAC_1_SQRT_2, 3, &mut value) },
            EpconcStatus::EpconcOk
        );
        assert!((value - 0.5).abs() < 1e-12);

        let mut text: *mut c_char = ptr::null_mut();
        let status = unsafe {
            epconc_netlist(
                EpconcNetwork::EpconcNetworkCascade,
                3,
                1,
                EpconcDirection::EpconcDirectionInverse,
                &mut text,
            )
        };
        assert_eq!(status, EpconcStatus::EpconcOk);
        let s = unsafe { std::ffi::CStr::from_ptr(text) }.to_str().unwrap();
        assert!(s.starts_with("NOT t1"));
        unsafe { epconc_string_free(text) };

        let version = unsafe { std::ffi::CStr::from_ptr(epconc_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
