//! C ABI for the plateink engine.
//!
//! Engines are opaque handles. Every fallible call returns a [`PiStatus`];
//! the message for the most recent failure on the calling thread is available
//! from [`pi_last_error_message`]. Strings and buffers handed out by the
//! library must be released with [`pi_string_free`] and [`pi_buffer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use plateink::asset_library::AssetLibrary;
use plateink::composition::{
    apply_command, load_state, save_state, state_to_json, Command, Composition, Context, Event,
};
use plateink::data_model::{load_dataset, Dataset};
use plateink::renderer::{render_composition, Camera, RenderSettings};
use plateink::sampling::prng_next;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    ParseFailed = 4,
    Refused = 5,
    RenderFailed = 6,
    IoFailed = 7,
    InvalidArgument = 8,
    Panicked = 9,
}

/// Dataset, asset library and the current composition.
pub struct PiEngine {
    dataset: Dataset,
    library: AssetLibrary,
    composition: Composition,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PiStatus, msg: impl Into<String>) -> PiStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PiStatus) -> PiStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(PiStatus::Panicked, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PiStatus> {
    if p.is_null() {
        return Err(fail(PiStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PiStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Opens a dataset manifest and an asset library directory. On success
/// `*out` receives a handle to release with [`pi_engine_free`].
///
/// # Safety
/// `dataset_path` and `assets_dir` must be NUL-terminated strings and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_open(
    dataset_path: *const c_char,
    assets_dir: *const c_char,
    out: *mut *mut PiEngine,
) -> PiStatus {
    guard(|| {
        if out.is_null() {
            return fail(PiStatus::NullArgument, "out is null");
        }
        let (ds_path, assets) = match (
            str_arg(dataset_path, "dataset_path"),
            str_arg(assets_dir, "assets_dir"),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let dataset = match load_dataset(ds_path) {
            Ok(d) => d,
            Err(e) => return fail(PiStatus::LoadFailed, e.to_string()),
        };
        let library = match AssetLibrary::open(assets) {
            Ok((lib, _)) => lib,
            Err(e) => return fail(PiStatus::LoadFailed, e.to_string()),
        };
        let engine = PiEngine {
            dataset,
            library,
            composition: Composition::default(),
        };
        *out = Box::into_raw(Box::new(engine));
        PiStatus::Ok
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from [`pi_engine_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_free(engine: *mut PiEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Applies one JSON command. Returns `Refused` when the engine rejects it,
/// leaving the state unchanged. When `out_events` is non-null it receives the
/// JSON array of resulting events either way.
///
/// # Safety
/// `engine` must be a live handle and `command_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_apply_command(
    engine: *mut PiEngine,
    command_json: *const c_char,
    out_events: *mut *mut c_char,
) -> PiStatus {
    guard(|| {
        let Some(engine) = engine.as_mut() else {
            return fail(PiStatus::NullArgument, "engine is null");
        };
        let text = match str_arg(command_json, "command_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cmd: Command = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(PiStatus::ParseFailed, e.to_string()),
        };
        let ctx = Context {
            dataset: &engine.dataset,
            library: &engine.library,
        };
        let (next, events) = apply_command(&engine.composition, &cmd, &ctx);
        engine.composition = next;
        if !out_events.is_null() {
            *out_events = into_c_string(serde_json::to_string(&events).expect("events serialize"));
        }
        match events.iter().find_map(|e| match e {
            Event::Refused { reason } => Some(reason.message.clone()),
            _ => None,
        }) {
            Some(msg) => fail(PiStatus::Refused, msg),
            None => PiStatus::Ok,
        }
    })
}

/// Current revision, or 0 for a null handle.
///
/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_revision(engine: *const PiEngine) -> u64 {
    engine.as_ref().map_or(0, |e| e.composition.revision)
}

/// Current state as state-file JSON.
///
/// # Safety
/// `engine` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_state_json(
    engine: *const PiEngine,
    out: *mut *mut c_char,
) -> PiStatus {
    guard(|| {
        let (Some(engine), false) = (engine.as_ref(), out.is_null()) else {
            return fail(PiStatus::NullArgument, "engine or out is null");
        };
        *out = into_c_string(state_to_json(&engine.composition));
        PiStatus::Ok
    })
}

/// # Safety
/// `engine` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_save_state(
    engine: *const PiEngine,
    path: *const c_char,
) -> PiStatus {
    guard(|| {
        let Some(engine) = engine.as_ref() else {
            return fail(PiStatus::NullArgument, "engine is null");
        };
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_state(&engine.composition, path) {
            Ok(()) => PiStatus::Ok,
            Err(e) => fail(PiStatus::IoFailed, e.to_string()),
        }
    })
}

/// Replaces the current state with a saved one.
///
/// # Safety
/// `engine` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_load_state(
    engine: *mut PiEngine,
    path: *const c_char,
) -> PiStatus {
    guard(|| {
        let Some(engine) = engine.as_mut() else {
            return fail(PiStatus::NullArgument, "engine is null");
        };
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_state(path) {
            Ok(loaded) => {
                engine.composition = loaded.composition;
                PiStatus::Ok
            }
            Err(plateink::composition::StateError::Io { path, source }) => {
                fail(PiStatus::IoFailed, format!("{}: {source}", path.display()))
            }
            Err(e) => fail(PiStatus::ParseFailed, e.to_string()),
        }
    })
}

/// Renders the current state to PNG bytes. `camera` is null for the default
/// camera or `px,py,pz,lx,ly,lz,ux,uy,uz,fov`. Release the buffer with
/// [`pi_buffer_free`].
///
/// # Safety
/// `engine` must be a live handle, `camera` null or a NUL-terminated string,
/// and `out_data`/`out_len` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pi_engine_render_png(
    engine: *const PiEngine,
    width: u32,
    height: u32,
    camera: *const c_char,
    out_data: *mut *mut u8,
    out_len: *mut usize,
) -> PiStatus {
    guard(|| {
        let Some(engine) = engine.as_ref() else {
            return fail(PiStatus::NullArgument, "engine is null");
        };
        if out_data.is_null() || out_len.is_null() {
            return fail(PiStatus::NullArgument, "output pointer is null");
        }
        let cam = if camera.is_null() {
            None
        } else {
            let flag = match str_arg(camera, "camera") {
                Ok(f) => f,
                Err(s) => return s,
            };
            match Camera::parse_flag(flag, width, height) {
                Ok(c) => Some(c),
                Err(e) => return fail(PiStatus::InvalidArgument, e.to_string()),
            }
        };
        let rendered = match render_composition(
            &engine.composition,
            &engine.dataset,
            &engine.library,
            cam,
            width,
            height,
            &RenderSettings::default(),
        ) {
            Ok(r) => r,
            Err(e) => return fail(PiStatus::RenderFailed, e.to_string()),
        };
        let boxed = rendered.png.into_boxed_slice();
        *out_len = boxed.len();
        *out_data = Box::into_raw(boxed) as *mut u8;
        PiStatus::Ok
    })
}

/// # Safety
/// `data`/`len` must come from [`pi_engine_render_png`]. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pi_buffer_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(data, len)));
    }
}

/// # Safety
/// `s` must be a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// One xorshift64* step: writes the output and the next state.
///
/// # Safety
/// `out_value` and `out_state` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pi_prng_next(
    state: u64,
    out_value: *mut u64,
    out_state: *mut u64,
) -> PiStatus {
    if out_value.is_null() || out_state.is_null() {
        return fail(PiStatus::NullArgument, "output pointer is null");
    }
    match prng_next(state) {
        Ok((value, next)) => {
            *out_value = value;
            *out_state = next;
            PiStatus::Ok
        }
        Err(e) => fail(PiStatus::InvalidArgument, e.to_string()),
    }
}
