//! C ABI over the container relocation core: opaque handles for instances
//! and priority rules, status codes, and a solve call that reports the move
//! counts and total energy of one retrieval episode.
//!
//! The generated header lands in `include/crp.h`. Every function returning
//! [`CrpStatus`] stores a human-readable message retrievable through
//! [`crp_last_error`] on failure. Handles must be released with their
//! `_free` function; all pointers are owned by exactly one side.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use crp_core::energy::{EnergyParams, KinematicsConfig};
use crp_core::ga::{GrhParams, GENE_COUNT};
use crp_core::gp::ExprTree;
use crp_core::instance::{attach_weights, parse_caserta, parse_native, parse_zhu, Instance};
use crp_core::priority::{
    GrhPriority, LowestStack, PriorityFunction, ReshuffleIndex, TreePriority,
};
use crp_core::scheme::{run_scheme, Scheme};
use crp_core::yard::Slot;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    BadArgument = 4,
    Infeasible = 5,
}

/// Relocation scheme selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrpScheme {
    Restricted = 0,
    Unrestricted = 1,
}

/// Energy rates; mirror of the core defaults when obtained from
/// [`crp_default_energy_params`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrpEnergyParams {
    pub hoist_per_tier: f64,
    pub lower_per_tier: f64,
    pub cross_per_stack: f64,
    pub crane_weight: f64,
}

/// Crane travel conventions.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrpKinematics {
    pub count_empty_moves: bool,
    pub truck_tier: usize,
    pub initial_crane_stack: usize,
    pub initial_crane_tier: usize,
}

/// Outcome of one solved episode.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CrpSolveResult {
    pub total_energy: f64,
    pub moves: u64,
    pub relocations: u64,
    pub retrievals: u64,
}

/// Opaque benchmark instance handle.
pub struct CrpInstance {
    inner: Instance,
}

/// Opaque priority rule handle.
pub struct CrpRule {
    inner: Box<dyn PriorityFunction>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: CrpStatus, message: impl Into<Vec<u8>>) -> CrpStatus {
    let text = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    status
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn crp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn crp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, CrpStatus> {
    if ptr.is_null() {
        return Err(CrpStatus::NullPointer);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| CrpStatus::InvalidUtf8)
}

/// Parse an instance from text, sniffing the format: native (`instance`
/// header), Zhu (3-integer header), or Caserta (2-integer header). On
/// success `*out` owns a new handle.
///
/// # Safety
/// `text` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crp_instance_parse(
    text: *const c_char,
    out: *mut *mut CrpInstance,
) -> CrpStatus {
    if out.is_null() {
        return fail(CrpStatus::NullPointer, "out pointer is null");
    }
    let text = match read_str(text) {
        Ok(t) => t,
        Err(status) => return fail(status, "instance text is null or not UTF-8"),
    };
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let parsed = if first.starts_with("instance") {
        parse_native(text)
    } else if first.split_whitespace().count() == 3 {
        parse_zhu(text)
    } else {
        parse_caserta(text)
    };
    match parsed {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(CrpInstance { inner }));
            CrpStatus::Ok
        }
        Err(e) => fail(CrpStatus::ParseError, e.to_string()),
    }
}

/// Attach seeded uniform container weights (see the format docs for the
/// exact generator). Fails if weights are already present.
///
/// # Safety
/// `instance` must be a live handle from `crp_instance_parse`.
#[no_mangle]
pub unsafe extern "C" fn crp_instance_attach_weights(
    instance: *mut CrpInstance,
    seed: u64,
) -> CrpStatus {
    let Some(handle) = instance.as_mut() else {
        return fail(CrpStatus::NullPointer, "instance handle is null");
    };
    match attach_weights(&handle.inner, seed) {
        Ok(weighted) => {
            handle.inner = weighted;
            CrpStatus::Ok
        }
        Err(e) => fail(CrpStatus::BadArgument, e.to_string()),
    }
}

/// Number of containers in the instance.
///
/// # Safety
/// `instance` must be a live handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn crp_instance_container_count(instance: *const CrpInstance) -> u64 {
    instance
        .as_ref()
        .map_or(0, |h| h.inner.container_count() as u64)
}

/// Number of stacks in the instance.
///
/// # Safety
/// `instance` must be a live handle (null returns 0).
#[no_mangle]
pub unsafe extern "C" fn crp_instance_stack_count(instance: *const CrpInstance) -> u64 {
    instance.as_ref().map_or(0, |h| h.inner.stack_count() as u64)
}

/// Release an instance handle. Null is a no-op.
///
/// # Safety
/// `instance` must have come from `crp_instance_parse` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn crp_instance_free(instance: *mut CrpInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// The lowest-stack (TLP) baseline rule.
#[no_mangle]
pub extern "C" fn crp_rule_tlp() -> *mut CrpRule {
    Box::into_raw(Box::new(CrpRule {
        inner: Box::new(LowestStack),
    }))
}

/// The reshuffle-index (RI) baseline rule.
#[no_mangle]
pub extern "C" fn crp_rule_ri() -> *mut CrpRule {
    Box::into_raw(Box::new(CrpRule {
        inner: Box::new(ReshuffleIndex),
    }))
}

/// A GRH rule from its 12 parameters (each in [0, 1], in the order alpha,
/// beta, gamma, p1, delta, p2, epsilon, p3, eta, theta, p4, mu).
///
/// # Safety
/// `genes` must point to 12 readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn crp_rule_grh(genes: *const f64, out: *mut *mut CrpRule) -> CrpStatus {
    if genes.is_null() || out.is_null() {
        return fail(CrpStatus::NullPointer, "genes or out pointer is null");
    }
    let mut buf = [0.0; GENE_COUNT];
    std::ptr::copy_nonoverlapping(genes, buf.as_mut_ptr(), GENE_COUNT);
    match GrhParams::new(buf) {
        Ok(params) => {
            *out = Box::into_raw(Box::new(CrpRule {
                inner: Box::new(GrhPriority::new(params)),
            }));
            CrpStatus::Ok
        }
        Err(e) => fail(CrpStatus::BadArgument, e.to_string()),
    }
}

/// An evolved rule from its s-expression, e.g. `(add (mul n_s r_s) k_s)`.
///
/// # Safety
/// `text` must be a valid nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crp_rule_parse_tree(
    text: *const c_char,
    out: *mut *mut CrpRule,
) -> CrpStatus {
    if out.is_null() {
        return fail(CrpStatus::NullPointer, "out pointer is null");
    }
    let text = match read_str(text) {
        Ok(t) => t,
        Err(status) => return fail(status, "tree text is null or not UTF-8"),
    };
    match ExprTree::parse(text.trim()) {
        Ok(tree) => {
            *out = Box::into_raw(Box::new(CrpRule {
                inner: Box::new(TreePriority::new(tree)),
            }));
            CrpStatus::Ok
        }
        Err(e) => fail(CrpStatus::ParseError, e.to_string()),
    }
}

/// Release a rule handle. Null is a no-op.
///
/// # Safety
/// `rule` must have come from a `crp_rule_*` constructor and not been freed.
#[no_mangle]
pub unsafe extern "C" fn crp_rule_free(rule: *mut CrpRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Default energy rates (0.9 / 0.02 / 0.08 per ton, crane 0.5 t).
#[no_mangle]
pub extern "C" fn crp_default_energy_params() -> CrpEnergyParams {
    let p = EnergyParams::default();
    CrpEnergyParams {
        hoist_per_tier: p.hoist,
        lower_per_tier: p.lower,
        cross_per_stack: p.cross,
        crane_weight: p.crane_weight,
    }
}

/// Default crane travel convention (count empty moves, truck tier 1, crane
/// starting at the truck).
#[no_mangle]
pub extern "C" fn crp_default_kinematics() -> CrpKinematics {
    let k = KinematicsConfig::default();
    CrpKinematics {
        count_empty_moves: k.count_empty_moves,
        truck_tier: k.truck_tier,
        initial_crane_stack: k.initial_crane_position.stack,
        initial_crane_tier: k.initial_crane_position.tier,
    }
}

/// Run one full retrieval episode of `rule` over `instance` and fill
/// `result` with the move counts and total energy consumed. `energy` and
/// `kinematics` may be null to use the defaults. The instance must carry
/// container weights (parse them or call `crp_instance_attach_weights`).
///
/// # Safety
/// `instance` and `rule` must be live handles; `result` must be a valid
/// pointer; `energy`/`kinematics`, when non-null, must point to readable
/// structs.
#[no_mangle]
pub unsafe extern "C" fn crp_solve(
    instance: *const CrpInstance,
    rule: *const CrpRule,
    scheme: CrpScheme,
    energy: *const CrpEnergyParams,
    kinematics: *const CrpKinematics,
    result: *mut CrpSolveResult,
) -> CrpStatus {
    let (Some(instance), Some(rule)) = (instance.as_ref(), rule.as_ref()) else {
        return fail(CrpStatus::NullPointer, "instance or rule handle is null");
    };
    if result.is_null() {
        return fail(CrpStatus::NullPointer, "result pointer is null");
    }
    let energy = energy.as_ref().map_or_else(EnergyParams::default, |e| EnergyParams {
        hoist: e.hoist_per_tier,
        lower: e.lower_per_tier,
        cross: e.cross_per_stack,
        crane_weight: e.crane_weight,
    });
    let kinematics = kinematics
        .as_ref()
        .map_or_else(KinematicsConfig::default, |k| KinematicsConfig {
            count_empty_moves: k.count_empty_moves,
            truck_tier: k.truck_tier,
            initial_crane_position: Slot::new(k.initial_crane_stack, k.initial_crane_tier),
        });
    let scheme = match scheme {
        CrpScheme::Restricted => Scheme::Restricted,
        CrpScheme::Unrestricted => Scheme::Unrestricted,
    };
    let bay = match instance.inner.to_bay(kinematics.initial_crane_position) {
        Ok(bay) => bay,
        Err(e) => return fail(CrpStatus::BadArgument, e.to_string()),
    };
    match run_scheme(scheme, bay, rule.inner.as_ref(), &energy, &kinematics) {
        Ok(episode) => {
            *result = CrpSolveResult {
                total_energy: episode.total_energy,
                moves: episode.moves.len() as u64,
                relocations: episode.relocations() as u64,
                retrievals: episode.retrievals() as u64,
            };
            CrpStatus::Ok
        }
        Err(e) => fail(CrpStatus::Infeasible, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "2 4\n2 2 1\n2 3 4\n";

    fn parse(text: &str) -> *mut CrpInstance {
        let c = CString::new(text).unwrap();
        let mut out: *mut CrpInstance = std::ptr::null_mut();
        let status = unsafe { crp_instance_parse(c.as_ptr(), &mut out) };
        assert_eq!(status, CrpStatus::Ok);
        assert!(!out.is_null());
        out
    }

    #[test]
    fn parse_weight_solve_free_cycle() {
        let instance = parse(TOY);
        unsafe {
            assert_eq!(crp_instance_container_count(instance), 4);
            assert_eq!(crp_instance_stack_count(instance), 2);
            assert_eq!(crp_instance_attach_weights(instance, 7), CrpStatus::Ok);
            let rule = crp_rule_tlp();
            let mut result = CrpSolveResult::default();
            let status = crp_solve(
                instance,
                rule,
                CrpScheme::Restricted,
                std::ptr::null(),
                std::ptr::null(),
                &mut result,
            );
            assert_eq!(status, CrpStatus::Ok);
            assert_eq!(result.retrievals, 4);
            assert!(result.total_energy > 0.0);
            assert!(result.moves >= result.relocations + result.retrievals);
            crp_rule_free(rule);
            crp_instance_free(instance);
        }
    }

    #[test]
    fn solve_without_weights_reports_error() {
        let instance = parse(TOY);
        unsafe {
            let rule = crp_rule_ri();
            let mut result = CrpSolveResult::default();
            let status = crp_solve(
                instance,
                rule,
                CrpScheme::Restricted,
                std::ptr::null(),
                std::ptr::null(),
                &mut result,
            );
            assert_eq!(status, CrpStatus::BadArgument);
            let message = CStr::from_ptr(crp_last_error()).to_str().unwrap();
            assert!(message.contains("weights"), "unexpected message {message}");
            crp_rule_free(rule);
            crp_instance_free(instance);
        }
    }

    #[test]
    fn tree_and_grh_rules_solve() {
        let instance = parse(TOY);
        unsafe {
            crp_instance_attach_weights(instance, 1);
            let tree_text = CString::new("(add n_s (mul r_s t_s))").unwrap();
            let mut tree_rule: *mut CrpRule = std::ptr::null_mut();
            assert_eq!(
                crp_rule_parse_tree(tree_text.as_ptr(), &mut tree_rule),
                CrpStatus::Ok
            );
            let genes = [0.5; GENE_COUNT];
            let mut grh_rule: *mut CrpRule = std::ptr::null_mut();
            assert_eq!(crp_rule_grh(genes.as_ptr(), &mut grh_rule), CrpStatus::Ok);
            for rule in [tree_rule, grh_rule] {
                let mut result = CrpSolveResult::default();
                let status = crp_solve(
                    instance,
                    rule,
                    CrpScheme::Unrestricted,
                    std::ptr::null(),
                    std::ptr::null(),
                    &mut result,
                );
                assert_eq!(status, CrpStatus::Ok);
                assert_eq!(result.retrievals, 4);
            }
            crp_rule_free(tree_rule);
            crp_rule_free(grh_rule);
            crp_instance_free(instance);
        }
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        unsafe {
            let mut out: *mut CrpInstance = std::ptr::null_mut();
            let bad = CString::new("definitely not an instance").unwrap();
            assert_eq!(
                crp_instance_parse(bad.as_ptr(), &mut out),
                CrpStatus::ParseError
            );
            assert_eq!(
                crp_instance_parse(std::ptr::null(), &mut out),
                CrpStatus::NullPointer
            );
            let mut rule: *mut CrpRule = std::ptr::null_mut();
            let bad_tree = CString::new("(add n_s)").unwrap();
            assert_eq!(
                crp_rule_parse_tree(bad_tree.as_ptr(), &mut rule),
                CrpStatus::ParseError
            );
            let bad_genes = [2.0; GENE_COUNT];
            assert_eq!(
                crp_rule_grh(bad_genes.as_ptr(), &mut rule),
                CrpStatus::BadArgument
            );
        }
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/include/crp.h"
        ))
        .expect("cbindgen header generated at build time");
        for symbol in [
            "crp_instance_parse",
            "crp_instance_attach_weights",
            "crp_rule_tlp",
            "crp_rule_grh",
            "crp_rule_parse_tree",
            "crp_solve",
            "crp_last_error",
            "CrpSolveResult",
        ] {
            assert!(header.contains(symbol), "header misses {symbol}");
        }
    }
}
