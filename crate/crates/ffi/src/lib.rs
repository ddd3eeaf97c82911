//! C ABI over the arasim library.
//!
//! All objects cross the boundary as opaque handles owned by Rust; callers
//! free them with the matching `*_free` function. Every fallible call
//! returns an [`AraStatus`] code and leaves a human-readable message
//! retrievable through [`ara_last_error`] (thread-local, valid until the
//! next failing call on the same thread). Strings returned through out
//! parameters are NUL-terminated, UTF-8, and released with
//! [`ara_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};

use libc::c_char;

use arasim::crossbar::{
    buffer_demand, check_feasibility, cross_point_count, private_buffer_topology,
    synthesize_crossbar, CrossbarTopology, FeasibilityReport,
};
use arasim::interleave::{synthesize_interleave, InterleaveMap};
use arasim::sim::{run_simulation, PlatformModel};
use arasim::spec::{expand_instances, parse_spec, validate_spec, AraSpec};
use arasim::workload::{builtin_kernels, load_trace, parse_pattern, synth_workload};
use arasim::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AraStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidSpec = 4,
    CapacityError = 5,
    ContractError = 6,
    ConfigError = 7,
    TraceError = 8,
    ProtocolError = 9,
    SimulationError = 10,
    PlanError = 11,
    IoError = 12,
    InternalError = 13,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> AraStatus {
    match err {
        Error::Parse { .. } | Error::MissingSection(_) | Error::Value { .. } => {
            AraStatus::ParseError
        }
        Error::Capacity(_) => AraStatus::CapacityError,
        Error::Contract(_) => AraStatus::ContractError,
        Error::Trace { .. } => AraStatus::TraceError,
        Error::Config(_) => AraStatus::ConfigError,
        Error::Protocol(_) => AraStatus::ProtocolError,
        Error::Simulation(_) => AraStatus::SimulationError,
        Error::Plan(_) => AraStatus::PlanError,
        Error::Io(_) => AraStatus::IoError,
        Error::Json(_) | Error::Csv(_) => AraStatus::InternalError,
    }
}

fn fail(err: &Error) -> AraStatus {
    set_error(&err.to_string());
    status_of(err)
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, AraStatus> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(AraStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        AraStatus::InvalidUtf8
    })
}

fn string_out(s: String, out: *mut *mut c_char) -> AraStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            AraStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL byte");
            AraStatus::InternalError
        }
    }
}

/// Parsed, validated system specification.
pub struct AraSpecHandle {
    spec: AraSpec,
}

/// A synthesized interconnect: crossbar topology plus bank-to-DMAC map.
pub struct AraSynthHandle {
    topology: CrossbarTopology,
    interleave: InterleaveMap,
    feasibility: FeasibilityReport,
    demand: usize,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ara_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ara_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned through an out parameter.
///
/// # Safety
/// `s` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn ara_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse an ARA specification XML document.
///
/// # Safety
/// `xml` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_spec_parse(
    xml: *const c_char,
    out: *mut *mut AraSpecHandle,
) -> AraStatus {
    if out.is_null() {
        set_error("null out pointer");
        return AraStatus::NullArgument;
    }
    let text = match cstr_arg(xml) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match parse_spec(text) {
        Ok(spec) => {
            let report = validate_spec(&spec);
            if !report.is_valid() {
                let msgs: Vec<String> = report
                    .violations
                    .iter()
                    .map(|v| v.message.clone())
                    .collect();
                set_error(&msgs.join("; "));
                return AraStatus::InvalidSpec;
            }
            *out = Box::into_raw(Box::new(AraSpecHandle { spec }));
            AraStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `h` must come from [`ara_spec_parse`] and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn ara_spec_free(h: *mut AraSpecHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Canonical JSON dump of a parsed specification.
///
/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_spec_to_json(
    h: *const AraSpecHandle,
    out: *mut *mut c_char,
) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    string_out((*h).spec.to_json(), out)
}

/// Banks needed so any `connectivity` simultaneously active accelerators can
/// hold one bank per port. Pass `connectivity = 0` for the spec's value.
///
/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_spec_buffer_demand(
    h: *const AraSpecHandle,
    connectivity: u32,
    out: *mut u64,
) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    let spec = &(*h).spec;
    let c = if connectivity == 0 {
        spec.interconnect.acc_to_buf.connectivity as usize
    } else {
        connectivity as usize
    };
    match buffer_demand(&expand_instances(spec), c) {
        Ok(d) => {
            *out = d as u64;
            AraStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Synthesize the partial crossbar and interleaved network. Set
/// `private_buffers` for one dedicated bank per port; `connectivity = 0`
/// uses the spec's value.
///
/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_synthesize(
    h: *const AraSpecHandle,
    private_buffers: bool,
    connectivity: u32,
    out: *mut *mut AraSynthHandle,
) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    let spec = &(*h).spec;
    let instances = expand_instances(spec);
    let c = if connectivity == 0 {
        spec.interconnect.acc_to_buf.connectivity as usize
    } else {
        connectivity as usize
    };
    let build = || -> Result<AraSynthHandle, Error> {
        let demand = buffer_demand(&instances, c)?;
        let topology = if private_buffers {
            private_buffer_topology(&instances)
        } else {
            synthesize_crossbar(&instances, spec.shared_buffers.count as usize, c)?
        };
        let interleave = synthesize_interleave(
            &topology,
            spec.shared_buffers.num_dmacs as usize,
            spec.interconnect.buf_to_dmac.strategy,
        )?;
        let feasibility = check_feasibility(&topology, c)?;
        Ok(AraSynthHandle {
            topology,
            interleave,
            feasibility,
            demand,
        })
    };
    match build() {
        Ok(handle) => {
            *out = Box::into_raw(Box::new(handle));
            AraStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `h` must come from [`ara_synthesize`] and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn ara_synth_free(h: *mut AraSynthHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Topology and interleave map as one JSON document (the `synth` file
/// format of the command-line tool).
///
/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_synth_to_json(
    h: *const AraSynthHandle,
    out: *mut *mut c_char,
) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    let s = &*h;
    let bundle = serde_json::json!({
        "topology": s.topology.to_json_value(),
        "interleave": s.interleave,
    });
    string_out(
        serde_json::to_string_pretty(&bundle).unwrap_or_default(),
        out,
    )
}

/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_synth_cross_points(
    h: *const AraSynthHandle,
    out: *mut u64,
) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    *out = cross_point_count(&(*h).topology) as u64;
    AraStatus::Ok
}

/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_synth_num_banks(h: *const AraSynthHandle, out: *mut u64) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    *out = (*h).topology.num_banks() as u64;
    AraStatus::Ok
}

/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_synth_buffer_demand(
    h: *const AraSynthHandle,
    out: *mut u64,
) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    *out = (*h).demand as u64;
    AraStatus::Ok
}

/// Whether the synthesized topology passed the exhaustive subset oracle.
///
/// # Safety
/// `h` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ara_synth_feasible(h: *const AraSynthHandle, out: *mut bool) -> AraStatus {
    if h.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    *out = (*h).feasibility.feasible;
    AraStatus::Ok
}

/// Simulate a workload and return the performance report as JSON.
///
/// Exactly one of `trace_text` (trace file contents) and `pattern`
/// (generator syntax such as `all_parallel:2`) must be non-NULL. `synth` may
/// be NULL to synthesize the spec's shared topology on the fly. `overrides`
/// is an optional `;`-separated `key=value` list applied to the platform
/// model.
///
/// # Safety
/// Non-NULL pointers must be valid; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ara_simulate(
    spec: *const AraSpecHandle,
    synth: *const AraSynthHandle,
    trace_text: *const c_char,
    pattern: *const c_char,
    overrides: *const c_char,
    out_json: *mut *mut c_char,
) -> AraStatus {
    if spec.is_null() || out_json.is_null() {
        set_error("null pointer argument");
        return AraStatus::NullArgument;
    }
    let spec = &(*spec).spec;

    let mut platform = PlatformModel {
        acc_clock_hz: spec.acc_frequency_hz,
        ..Default::default()
    };
    if !overrides.is_null() {
        let text = match cstr_arg(overrides) {
            Ok(t) => t,
            Err(s) => return s,
        };
        for kv in text.split(';').filter(|s| !s.trim().is_empty()) {
            let Some((k, v)) = kv.split_once('=') else {
                set_error(&format!("override `{kv}` is not key=value"));
                return AraStatus::ConfigError;
            };
            if let Err(e) = platform.apply_override(k.trim(), v.trim()) {
                return fail(&e);
            }
        }
    }

    let run = || -> Result<String, Error> {
        let owned;
        let (topology, interleave) = if synth.is_null() {
            let instances = expand_instances(spec);
            let c = spec.interconnect.acc_to_buf.connectivity as usize;
            let topo = synthesize_crossbar(&instances, spec.shared_buffers.count as usize, c)?;
            let ilv = synthesize_interleave(
                &topo,
                spec.shared_buffers.num_dmacs as usize,
                spec.interconnect.buf_to_dmac.strategy,
            )?;
            owned = (topo, ilv);
            (&owned.0, &owned.1)
        } else {
            (&(*synth).topology, &(*synth).interleave)
        };

        let kernels = builtin_kernels();
        let workload = match (trace_text.is_null(), pattern.is_null()) {
            (false, true) => {
                let text = CStr::from_ptr(trace_text)
                    .to_str()
                    .map_err(|_| Error::Config("trace is not valid UTF-8".into()))?;
                load_trace(text, kernels)?
            }
            (true, false) => {
                let text = CStr::from_ptr(pattern)
                    .to_str()
                    .map_err(|_| Error::Config("pattern is not valid UTF-8".into()))?;
                synth_workload(&parse_pattern(text)?, spec, kernels)?
            }
            _ => {
                return Err(Error::Config(
                    "exactly one of trace_text and pattern must be provided".into(),
                ))
            }
        };
        let report = run_simulation(spec, topology, interleave, &workload, &platform)?;
        Ok(report.to_json())
    };
    match run() {
        Ok(json) => string_out(json, out_json),
        Err(e) => fail(&e),
    }
}
