//! C ABI over the token object, its spender analysis and the JSON command
//! interface.
//!
//! # Conventions
//!
//! Every function returns a [`TsyncStatus`]; results go through out
//! pointers. On a nonzero status [`tsync_last_error`] describes the failure.
//! Handles are not synchronized: a [`TsyncToken`] may move between threads
//! but must not be used from two at once. Panics never cross the boundary;
//! they surface as [`TsyncStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tokensync::analysis::{class_k, enabled_spenders, unique_transfer};
use tokensync::cli::{execute_json, ExitStatus};
use tokensync::objects::{AccountId, Invocation, ProcessId, TokenState, Value};

#[repr(i32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsyncStatus {
    Ok = 0,
    /// A checked property does not hold (command calls only).
    PropertyViolated = 1,
    InputError = 2,
    ResourceBound = 3,
    NullPointer = -1,
    Panic = -2,
}

impl From<ExitStatus> for TsyncStatus {
    fn from(e: ExitStatus) -> Self {
        match e {
            ExitStatus::Pass => TsyncStatus::Ok,
            ExitStatus::Violation => TsyncStatus::PropertyViolated,
            ExitStatus::InputError => TsyncStatus::InputError,
            ExitStatus::ResourceBound => TsyncStatus::ResourceBound,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsyncMethod {
    Transfer,
    TransferFrom,
    Approve,
    BalanceOf,
    Allowance,
    TotalSupply,
}

/// One token operation. Unused fields are ignored.
///
/// | method        | account  | target   | value |
/// |---------------|----------|----------|-------|
/// | transfer      |          | to       | value |
/// | transferFrom  | from     | to       | value |
/// | approve       |          | spender  | value |
/// | balanceOf     | account  |          |       |
/// | allowance     | account  | spender  |       |
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TsyncOp {
    pub method: TsyncMethod,
    pub caller: usize,
    pub account: usize,
    pub target: usize,
    pub value: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsyncValueKind {
    Bottom,
    Bool,
    Nat,
}

/// A response. Booleans are 0 or 1 in `value`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TsyncValue {
    pub kind: TsyncValueKind,
    pub value: u64,
}

impl From<Value> for TsyncValue {
    fn from(v: Value) -> Self {
        match v {
            Value::Bottom => TsyncValue { kind: TsyncValueKind::Bottom, value: 0 },
            Value::Bool(b) => TsyncValue { kind: TsyncValueKind::Bool, value: b as u64 },
            Value::Nat(n) => TsyncValue { kind: TsyncValueKind::Nat, value: n },
        }
    }
}

/// Opaque token state. Account `i` is owned by process `i`.
pub struct TsyncToken {
    state: TokenState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(TsyncStatus, String);

fn fail<T>(status: TsyncStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<TsyncStatus, Failure>) -> TsyncStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            TsyncStatus::Panic
        }
    }
}

unsafe fn token<'a>(t: *const TsyncToken) -> Result<&'a TsyncToken, Failure> {
    match unsafe { t.as_ref() } {
        Some(t) => Ok(t),
        None => fail(TsyncStatus::NullPointer, "null token handle"),
    }
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<TsyncStatus, Failure> {
    if out.is_null() {
        return fail(TsyncStatus::NullPointer, "null out pointer");
    }
    unsafe { out.write(v) };
    Ok(TsyncStatus::Ok)
}

fn account(t: &TsyncToken, a: usize) -> Result<AccountId, Failure> {
    if a < t.state.accounts() {
        Ok(AccountId(a))
    } else {
        fail(TsyncStatus::InputError, format!("unknown account {a}"))
    }
}

fn invocation(op: &TsyncOp) -> Invocation {
    match op.method {
        TsyncMethod::Transfer => Invocation::Transfer { to: AccountId(op.target), value: op.value },
        TsyncMethod::TransferFrom => {
            Invocation::TransferFrom { from: AccountId(op.account), to: AccountId(op.target), value: op.value }
        }
        TsyncMethod::Approve => Invocation::Approve { spender: ProcessId(op.target), value: op.value },
        TsyncMethod::BalanceOf => Invocation::BalanceOf { account: AccountId(op.account) },
        TsyncMethod::Allowance => Invocation::Allowance { account: AccountId(op.account), spender: ProcessId(op.target) },
        TsyncMethod::TotalSupply => Invocation::TotalSupply,
    }
}

/// Description of the last failure on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tsync_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a token with `n` accounts, the given balances and no allowances.
///
/// # Safety
/// `balances` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_new(balances: *const u64, n: usize, out: *mut *mut TsyncToken) -> TsyncStatus {
    guard(|| {
        if balances.is_null() || out.is_null() {
            return fail(TsyncStatus::NullPointer, "null argument");
        }
        let b = unsafe { std::slice::from_raw_parts(balances, n) }.to_vec();
        let state = TokenState::with_balances(b).or_else(|e| fail(TsyncStatus::InputError, e.to_string()))?;
        unsafe { write(out, Box::into_raw(Box::new(TsyncToken { state }))) }
    })
}

/// # Safety
/// `t` must come from [`tsync_token_new`] or [`tsync_token_clone`] and not
/// have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_free(t: *mut TsyncToken) {
    if !t.is_null() {
        drop(unsafe { Box::from_raw(t) });
    }
}

/// # Safety
/// `t` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_clone(t: *const TsyncToken, out: *mut *mut TsyncToken) -> TsyncStatus {
    guard(|| {
        let t = unsafe { token(t) }?;
        unsafe { write(out, Box::into_raw(Box::new(TsyncToken { state: t.state.clone() }))) }
    })
}

/// Applies `op` on behalf of `op.caller`. A refused operation is not an
/// error: the response is false and the state is unchanged.
///
/// # Safety
/// `t` must be a live handle; `op` readable; `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_apply(t: *mut TsyncToken, op: *const TsyncOp, out: *mut TsyncValue) -> TsyncStatus {
    guard(|| {
        let t = match unsafe { t.as_mut() } {
            Some(t) => t,
            None => return fail(TsyncStatus::NullPointer, "null token handle"),
        };
        let op = match unsafe { op.as_ref() } {
            Some(op) => op,
            None => return fail(TsyncStatus::NullPointer, "null operation"),
        };
        let (next, r) = t
            .state
            .apply(ProcessId(op.caller), &invocation(op))
            .or_else(|e| fail(TsyncStatus::InputError, e.to_string()))?;
        t.state = next;
        if out.is_null() {
            Ok(TsyncStatus::Ok)
        } else {
            unsafe { write(out, r.into()) }
        }
    })
}

/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_accounts(t: *const TsyncToken, out: *mut usize) -> TsyncStatus {
    guard(|| unsafe { write(out, token(t)?.state.accounts()) })
}

/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_balance(t: *const TsyncToken, account: usize, out: *mut u64) -> TsyncStatus {
    guard(|| {
        let t = unsafe { token(t) }?;
        let a = self::account(t, account)?;
        unsafe { write(out, t.state.balance(a)) }
    })
}

/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_allowance(
    t: *const TsyncToken,
    account: usize,
    spender: usize,
    out: *mut u64,
) -> TsyncStatus {
    guard(|| {
        let t = unsafe { token(t) }?;
        let a = self::account(t, account)?;
        if spender >= t.state.accounts() {
            return fail(TsyncStatus::InputError, format!("unknown process {spender}"));
        }
        unsafe { write(out, t.state.allowance(a, ProcessId(spender))) }
    })
}

/// The largest enabled-spender set over all accounts.
///
/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_class_k(t: *const TsyncToken, out: *mut usize) -> TsyncStatus {
    guard(|| unsafe { write(out, class_k(&token(t)?.state)) })
}

/// Enabled spenders of `account` as a bitmask over process indices.
///
/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_enabled_spenders(t: *const TsyncToken, account: usize, out: *mut u64) -> TsyncStatus {
    guard(|| {
        let t = unsafe { token(t) }?;
        let s = enabled_spenders(&t.state, AccountId(account)).or_else(|e| fail(TsyncStatus::InputError, e.to_string()))?;
        unsafe { write(out, s.spenders.bits()) }
    })
}

/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_token_unique_transfer(t: *const TsyncToken, account: usize, out: *mut bool) -> TsyncStatus {
    guard(|| {
        let t = unsafe { token(t) }?;
        let u = unique_transfer(&t.state, AccountId(account)).or_else(|e| fail(TsyncStatus::InputError, e.to_string()))?;
        unsafe { write(out, u) }
    })
}

/// Runs one command given as JSON, e.g.
/// `{"command": "replay-example"}`, and stores the JSON outcome
/// (`exit`, `report`, `text`) in `out`. The status mirrors the command's
/// exit code. Free the string with [`tsync_string_free`].
///
/// # Safety
/// `request` must be a nul-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsync_run_command(request: *const c_char, out: *mut *mut c_char) -> TsyncStatus {
    guard(|| {
        if request.is_null() || out.is_null() {
            return fail(TsyncStatus::NullPointer, "null argument");
        }
        let text = match unsafe { CStr::from_ptr(request) }.to_str() {
            Ok(s) => s,
            Err(e) => return fail(TsyncStatus::InputError, format!("request is not UTF-8: {e}")),
        };
        let outcome = execute_json(text);
        let json = serde_json::json!({
            "exit": outcome.exit.code(),
            "report": outcome.report,
            "text": outcome.text,
        });
        let s = CString::new(json.to_string()).expect("JSON has no nul bytes");
        unsafe { write(out, s.into_raw()) }?;
        let status = TsyncStatus::from(outcome.exit);
        if status != TsyncStatus::Ok {
            set_error(outcome.text.trim_end());
        }
        Ok(status)
    })
}

/// # Safety
/// `s` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn tsync_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let s = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(s, TsyncStatus::Panic);
        let msg = unsafe { CStr::from_ptr(tsync_last_error()) }.to_str().unwrap().to_owned();
        assert_eq!(msg, "panic: boom");
    }
}
