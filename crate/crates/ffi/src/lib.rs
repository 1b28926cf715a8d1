//! C interface: opaque handles for finished runs and for a run service,
//! status codes for every call, and a per-thread last-error message.
//!
//! Strings are NUL-terminated UTF-8. Functions that return text write into a
//! caller buffer and always report the required size (including the NUL)
//! through `needed`; a short buffer yields `FG_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fedgraph::error::Error;
use fedgraph::federation::{load_parties, simulate, NoopObserver, RunConfig, RunOutcome};
use fedgraph::representation::FederatedRepresentation;
use fedgraph::service::{
    sanitize_id, Component, EmbeddingOptions, ManagerOptions, RunManager, RunStatus, RunStore, SelectionQuery,
};
use serde::de::DeserializeOwned;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    NotFound = 5,
    InvalidTransition = 6,
    Io = 7,
    Protocol = 8,
    Privacy = 9,
    BufferTooSmall = 10,
    Panic = 11,
    Internal = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgRunStatus {
    Configured = 0,
    Running = 1,
    Paused = 2,
    Stopped = 3,
    Finished = 4,
    Failed = 5,
}

impl From<RunStatus> for FgRunStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Configured => FgRunStatus::Configured,
            RunStatus::Running => FgRunStatus::Running,
            RunStatus::Paused => FgRunStatus::Paused,
            RunStatus::Stopped => FgRunStatus::Stopped,
            RunStatus::Finished => FgRunStatus::Finished,
            RunStatus::Failed => FgRunStatus::Failed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgComponent {
    Embedding = 0,
    Structure = 1,
    Attribute = 2,
}

/// A finished run and its final representation.
pub struct FgRun {
    outcome: RunOutcome,
    rep: FederatedRepresentation,
}

/// A run service over a directory of run records.
pub struct FgService {
    manager: RunManager,
}

struct Fail(FgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::NonFinite(_) => {
                FgStatus::InvalidArgument
            }
            Error::Config(_) | Error::Schema(_) | Error::Json(_) => FgStatus::Config,
            Error::NotFound(_) => FgStatus::NotFound,
            Error::InvalidTransition { .. } => FgStatus::InvalidTransition,
            Error::Io(_) | Error::Csv(_) | Error::Checkpoint(_) => FgStatus::Io,
            Error::Protocol(_) | Error::Disconnected(_) | Error::AggregationAborted(_) => FgStatus::Protocol,
            Error::PrivacyConfig(_) => FgStatus::Privacy,
            _ => FgStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            FgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            FgStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(FgStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(FgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn json_arg<T: DeserializeOwned + Default>(p: *const c_char, what: &str) -> Result<T, Fail> {
    match optional_text(p, what)? {
        None => Ok(T::default()),
        Some(raw) => serde_json::from_str(raw).map_err(|e| Fail(FgStatus::InvalidArgument, format!("bad {what}: {e}"))),
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn write_text(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Fail> {
    let size = s.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if buf.is_null() || len < size {
        return Err(Fail(FgStatus::BufferTooSmall, format!("{size} bytes needed, {len} given")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Run every party in process and keep the outcome. `data_dir` may be null
/// (the current directory); relative data paths resolve against it.
///
/// # Safety
/// `config_toml` and a non-null `data_dir` must be NUL-terminated strings;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_simulate(
    config_toml: *const c_char,
    data_dir: *const c_char,
    out_run: *mut *mut FgRun,
) -> FgStatus {
    guard(|| {
        let out_run = out(out_run, "out")?;
        *out_run = ptr::null_mut();
        let cfg = RunConfig::from_toml(text(config_toml, "config")?)?;
        let base = PathBuf::from(optional_text(data_dir, "data_dir")?.unwrap_or("."));
        let parties = load_parties(&cfg, &base)?;
        let outcome = simulate(cfg, &parties, &mut NoopObserver, None, None)?;
        let rep = outcome.representation()?;
        *out_run = Box::into_raw(Box::new(FgRun { outcome, rep }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from `fg_run_simulate` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fg_run_free(run: *mut FgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Node count and width of the final embedding rows.
///
/// # Safety
/// `run` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_shape(run: *const FgRun, nodes: *mut usize, dim: *mut usize) -> FgStatus {
    guard(|| {
        let run = handle(run, "run")?;
        *out(nodes, "nodes")? = run.rep.embedding.rows();
        *out(dim, "dim")? = run.rep.embedding.cols();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `round` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_last_round(run: *const FgRun, round: *mut u64) -> FgStatus {
    guard(|| {
        *out(round, "round")? = handle(run, "run")?.outcome.last_round;
        Ok(())
    })
}

/// Copy the row-major embedding into `buf`, which holds `len` floats.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fg_run_embedding(run: *const FgRun, buf: *mut f32, len: usize) -> FgStatus {
    guard(|| {
        let data = handle(run, "run")?.rep.embedding.as_slice();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < data.len() {
            return Err(Fail(FgStatus::BufferTooSmall, format!("{} floats needed, {len} given", data.len())));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_edge_count(run: *const FgRun, count: *mut usize) -> FgStatus {
    guard(|| {
        *out(count, "count")? = handle(run, "run")?.rep.structure.len();
        Ok(())
    })
}

/// Reconstructed edges as row pairs, flattened: `buf` holds `len` values,
/// two per edge.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fg_run_edges(run: *const FgRun, buf: *mut u32, len: usize) -> FgStatus {
    guard(|| {
        let edges = &handle(run, "run")?.rep.structure;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < edges.len() * 2 {
            return Err(Fail(FgStatus::BufferTooSmall, format!("{} values needed, {len} given", edges.len() * 2)));
        }
        for (i, &(a, b)) in edges.iter().enumerate() {
            *buf.add(2 * i) = a;
            *buf.add(2 * i + 1) = b;
        }
        Ok(())
    })
}

/// Public id of the node at `row`.
///
/// # Safety
/// `buf` must be valid for `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn fg_run_node_id(
    run: *const FgRun,
    row: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FgStatus {
    guard(|| {
        let ids = &handle(run, "run")?.rep.node_ids;
        let id = ids.get(row).ok_or_else(|| {
            Fail(FgStatus::InvalidArgument, format!("row {row} out of range for {} nodes", ids.len()))
        })?;
        write_text(id.as_str(), buf, len, needed)
    })
}

/// Released attribute histograms as JSON.
///
/// # Safety
/// `buf` must be valid for `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn fg_run_histograms_json(
    run: *const FgRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FgStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(run, "run")?.rep.histograms).map_err(Error::from)?;
        write_text(&json, buf, len, needed)
    })
}

/// Write the representation export directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fg_run_export(run: *const FgRun, dir: *const c_char) -> FgStatus {
    guard(|| {
        let run = handle(run, "run")?;
        run.rep.export(std::path::Path::new(text(dir, "dir")?))?;
        Ok(())
    })
}

/// Open (or create) a run store. `data_dir` may be null.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_service` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_service_open(
    store_dir: *const c_char,
    data_dir: *const c_char,
    out_service: *mut *mut FgService,
) -> FgStatus {
    guard(|| {
        let out_service = out(out_service, "out")?;
        *out_service = ptr::null_mut();
        let store = RunStore::open(text(store_dir, "store_dir")?)?;
        let mut options = ManagerOptions::default();
        if let Some(d) = optional_text(data_dir, "data_dir")? {
            options.data_dir = d.into();
        }
        let manager = RunManager::open(store, options)?;
        *out_service = Box::into_raw(Box::new(FgService { manager }));
        Ok(())
    })
}

/// # Safety
/// `service` must come from `fg_service_open` and not be used afterwards.
/// Runs still in progress keep going on their own threads.
#[no_mangle]
pub unsafe extern "C" fn fg_service_free(service: *mut FgService) {
    if !service.is_null() {
        drop(Box::from_raw(service));
    }
}

/// Create a run from a configuration document and write its id. The run is
/// only created when `buf` is large enough; on `FG_STATUS_BUFFER_TOO_SMALL`
/// nothing happened and `needed` holds a size that always suffices.
///
/// # Safety
/// `config_toml` must be NUL-terminated; `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fg_service_create_run(
    service: *const FgService,
    config_toml: *const c_char,
    simulated: bool,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FgStatus {
    guard(|| {
        let svc = handle(service, "service")?;
        let cfg = RunConfig::from_toml(text(config_toml, "config")?)?;
        // base, a dash, at most ten digits of sequence number, and the NUL
        let bound = sanitize_id(&cfg.run_id).len() + 12;
        if !needed.is_null() {
            *needed = bound;
        }
        if buf.is_null() || len < bound {
            return Err(Fail(FgStatus::BufferTooSmall, format!("{bound} bytes needed, {len} given")));
        }
        let id = svc.manager.create(cfg, simulated)?;
        write_text(&id, buf, len, needed)
    })
}

unsafe fn lifecycle(
    service: *const FgService,
    id: *const c_char,
    f: impl FnOnce(&RunManager, &str) -> fedgraph::error::Result<()>,
) -> FgStatus {
    guard(|| {
        let svc = handle(service, "service")?;
        f(&svc.manager, text(id, "id")?)?;
        Ok(())
    })
}

/// # Safety
/// `id` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fg_service_start(service: *const FgService, id: *const c_char) -> FgStatus {
    lifecycle(service, id, RunManager::start)
}

/// # Safety
/// `id` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fg_service_pause(service: *const FgService, id: *const c_char) -> FgStatus {
    lifecycle(service, id, RunManager::pause)
}

/// # Safety
/// `id` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fg_service_resume(service: *const FgService, id: *const c_char) -> FgStatus {
    lifecycle(service, id, RunManager::resume)
}

/// # Safety
/// `id` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fg_service_early_stop(service: *const FgService, id: *const c_char) -> FgStatus {
    lifecycle(service, id, RunManager::early_stop)
}

/// # Safety
/// `id` must be NUL-terminated; `status` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_service_status(
    service: *const FgService,
    id: *const c_char,
    status: *mut FgRunStatus,
) -> FgStatus {
    guard(|| {
        let svc = handle(service, "service")?;
        let record = svc.manager.get(text(id, "id")?)?;
        *out(status, "status")? = record.status.into();
        Ok(())
    })
}

/// Block until the run's worker exits, then report its status.
///
/// # Safety
/// `id` must be NUL-terminated; `status` may be null.
#[no_mangle]
pub unsafe extern "C" fn fg_service_wait(
    service: *const FgService,
    id: *const c_char,
    status: *mut FgRunStatus,
) -> FgStatus {
    guard(|| {
        let svc = handle(service, "service")?;
        let record = svc.manager.wait(text(id, "id")?)?;
        if !status.is_null() {
            *status = record.status.into();
        }
        Ok(())
    })
}

/// One component of a run's representation as JSON. `checkpoint < 0` means
/// the latest; `selection_json` and `options_json` may be null.
///
/// # Safety
/// String arguments must be NUL-terminated; `buf` valid for `len` bytes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fg_service_query(
    service: *const FgService,
    id: *const c_char,
    checkpoint: i64,
    component: FgComponent,
    selection_json: *const c_char,
    options_json: *const c_char,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FgStatus {
    guard(|| {
        let svc = handle(service, "service")?;
        let selection: SelectionQuery = json_arg(selection_json, "selection")?;
        let options: EmbeddingOptions = json_arg(options_json, "options")?;
        let component = match component {
            FgComponent::Embedding => Component::Embedding,
            FgComponent::Structure => Component::Structure,
            FgComponent::Attribute => Component::Attribute,
        };
        let round = u64::try_from(checkpoint).ok();
        let payload = svc.manager.query(text(id, "id")?, round, component, &selection, &options)?;
        let json = serde_json::to_string(&payload).map_err(Error::from)?;
        write_text(&json, buf, len, needed)
    })
}
