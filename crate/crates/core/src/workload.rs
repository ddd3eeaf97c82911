//! Kernel descriptors and timed application traces.
//!
//! A trace is plain text, one event per line:
//!
//! ```text
//! <time> <app> <verb> [<kernel> [<multiplier>]]
//! ```
//!
//! `time` is in accelerator cycles, `app` is any identifier, and `verb` is
//! one of `reserve`, `check_reserved`, `send_param`, `check_done`, `free`,
//! `run`. `kernel` and the task-size `multiplier` (default 1) appear on
//! `reserve` and `run` lines only. Blank lines and `#` comments are skipped.
//!
//! Page counts per task are model parameters, not measurements: a task reads
//! roughly one 128x128 slice of 4-byte pixels (16 pages) except the gaussian
//! kernel, which fetches four pages. `reuse_factor` scales pages fetched
//! without changing the computational work or the pages written back.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::AraSpec;

/// Parametric accelerator behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDescriptor {
    pub name: String,
    pub port_count: u64,
    pub pages_in: u64,
    pub pages_out: u64,
    pub compute_cycles_per_page: u64,
    /// Fraction of `pages_in` actually fetched, in (0, 1]. 1 = no reuse.
    pub reuse_factor: f64,
}

impl KernelDescriptor {
    /// Pages fetched for one task after reuse scaling and size multiplication.
    pub fn effective_pages_in(&self, multiplier: u64) -> u64 {
        let raw = (self.pages_in * multiplier) as f64 * self.reuse_factor;
        raw.ceil() as u64
    }

    /// Pages written back; reuse never alters output volume.
    pub fn effective_pages_out(&self, multiplier: u64) -> u64 {
        self.pages_out * multiplier
    }

    /// Total compute for one task; independent of the reuse factor.
    pub fn compute_cycles(&self, multiplier: u64) -> u64 {
        self.compute_cycles_per_page * self.pages_in * multiplier
    }

    pub fn validate(&self) -> Result<()> {
        if self.port_count == 0 {
            return Err(Error::Config(format!(
                "kernel `{}` has zero ports",
                self.name
            )));
        }
        if !(self.reuse_factor > 0.0 && self.reuse_factor <= 1.0) {
            return Err(Error::Config(format!(
                "kernel `{}` reuse_factor {} outside (0, 1]",
                self.name, self.reuse_factor
            )));
        }
        Ok(())
    }
}

/// Built-in desk-scale analogs of the medical-imaging kernels. Port counts
/// follow the example system; page counts and compute density are calibrated
/// model defaults.
pub fn builtin_kernels() -> BTreeMap<String, KernelDescriptor> {
    let mk = |name: &str, ports: u64, pages_in: u64, pages_out: u64, ccp: u64| {
        (
            name.to_string(),
            KernelDescriptor {
                name: name.to_string(),
                port_count: ports,
                pages_in,
                pages_out,
                compute_cycles_per_page: ccp,
                reuse_factor: 1.0,
            },
        )
    };
    BTreeMap::from([
        mk("gradient", 6, 16, 2, 80),
        mk("segmentation", 8, 16, 2, 75),
        mk("rician", 12, 16, 2, 75),
        mk("gaussian", 5, 4, 1, 120),
    ])
}

/// Partial kernel override, merged field-by-field over a base descriptor.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct KernelOverride {
    pub port_count: Option<u64>,
    pub pages_in: Option<u64>,
    pub pages_out: Option<u64>,
    pub compute_cycles_per_page: Option<u64>,
    pub reuse_factor: Option<f64>,
}

/// Merge a `{name: override}` table over the builtins. Unknown names create
/// new descriptors and must then specify every field.
pub fn merge_kernel_overrides(
    mut base: BTreeMap<String, KernelDescriptor>,
    overrides: &BTreeMap<String, KernelOverride>,
) -> Result<BTreeMap<String, KernelDescriptor>> {
    for (name, ov) in overrides {
        match base.get_mut(name) {
            Some(k) => {
                if let Some(v) = ov.port_count {
                    k.port_count = v;
                }
                if let Some(v) = ov.pages_in {
                    k.pages_in = v;
                }
                if let Some(v) = ov.pages_out {
                    k.pages_out = v;
                }
                if let Some(v) = ov.compute_cycles_per_page {
                    k.compute_cycles_per_page = v;
                }
                if let Some(v) = ov.reuse_factor {
                    k.reuse_factor = v;
                }
                k.validate()?;
            }
            None => {
                let (Some(ports), Some(pages_in)) = (ov.port_count, ov.pages_in) else {
                    return Err(Error::Config(format!(
                        "new kernel `{name}` must specify at least port_count and pages_in"
                    )));
                };
                let k = KernelDescriptor {
                    name: name.clone(),
                    port_count: ports,
                    pages_in,
                    pages_out: ov.pages_out.unwrap_or(0),
                    compute_cycles_per_page: ov.compute_cycles_per_page.unwrap_or(0),
                    reuse_factor: ov.reuse_factor.unwrap_or(1.0),
                };
                k.validate()?;
                base.insert(name.clone(), k);
            }
        }
    }
    Ok(base)
}

/// Apply one reuse factor to every kernel (sweep axis).
pub fn apply_reuse_factor(kernels: &mut BTreeMap<String, KernelDescriptor>, reuse: f64) {
    for k in kernels.values_mut() {
        k.reuse_factor = reuse;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Reserve,
    CheckReserved,
    SendParam,
    CheckDone,
    Free,
    Run,
}

impl Verb {
    fn parse(s: &str) -> Option<Verb> {
        Some(match s {
            "reserve" => Verb::Reserve,
            "check_reserved" => Verb::CheckReserved,
            "send_param" => Verb::SendParam,
            "check_done" => Verb::CheckDone,
            "free" => Verb::Free,
            "run" => Verb::Run,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Reserve => "reserve",
            Verb::CheckReserved => "check_reserved",
            Verb::SendParam => "send_param",
            Verb::CheckDone => "check_done",
            Verb::Free => "free",
            Verb::Run => "run",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: u64,
    pub app: usize,
    pub verb: Verb,
    pub kernel: Option<String>,
    pub multiplier: u64,
}

/// A validated, time-sorted trace plus the kernel set it runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    /// App names in first-appearance order; `TraceEvent::app` indexes this.
    pub apps: Vec<String>,
    pub events: Vec<TraceEvent>,
    pub kernels: BTreeMap<String, KernelDescriptor>,
}

impl Workload {
    pub fn empty(kernels: BTreeMap<String, KernelDescriptor>) -> Self {
        Workload {
            apps: Vec::new(),
            events: Vec::new(),
            kernels,
        }
    }
}

/// Parse and validate a trace file against a kernel table.
pub fn load_trace(text: &str, kernels: BTreeMap<String, KernelDescriptor>) -> Result<Workload> {
    struct Raw {
        line: usize,
        time: u64,
        app: String,
        verb: Verb,
        kernel: Option<String>,
        multiplier: u64,
    }

    let mut raws: Vec<Raw> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Trace {
                line: lineno,
                msg: "expected `<time> <app> <verb> [kernel [multiplier]]`".into(),
            });
        }
        let time: u64 = fields[0].parse().map_err(|_| Error::Trace {
            line: lineno,
            msg: format!("invalid time `{}`", fields[0]),
        })?;
        let app = fields[1].to_string();
        let verb = Verb::parse(fields[2]).ok_or_else(|| Error::Trace {
            line: lineno,
            msg: format!("unknown verb `{}`", fields[2]),
        })?;
        let needs_kernel = matches!(verb, Verb::Reserve | Verb::Run);
        let (kernel, multiplier) =
            if needs_kernel {
                let Some(k) = fields.get(3) else {
                    return Err(Error::Trace {
                        line: lineno,
                        msg: format!("verb `{}` requires a kernel name", verb.as_str()),
                    });
                };
                let mult =
                    match fields.get(4) {
                        None => 1,
                        Some(m) => m.parse::<u64>().ok().filter(|&m| m >= 1).ok_or_else(|| {
                            Error::Trace {
                                line: lineno,
                                msg: format!("invalid multiplier `{m}`"),
                            }
                        })?,
                    };
                if fields.len() > 5 {
                    return Err(Error::Trace {
                        line: lineno,
                        msg: "trailing fields".into(),
                    });
                }
                (Some(k.to_string()), mult)
            } else {
                if fields.len() > 3 {
                    return Err(Error::Trace {
                        line: lineno,
                        msg: format!("verb `{}` takes no further fields", verb.as_str()),
                    });
                }
                (None, 1)
            };
        if let Some(k) = &kernel {
            if !kernels.contains_key(k) {
                return Err(Error::Trace {
                    line: lineno,
                    msg: format!("unknown kernel `{k}`"),
                });
            }
        }
        raws.push(Raw {
            line: lineno,
            time,
            app,
            verb,
            kernel,
            multiplier,
        });
    }

    // Stable sort by time keeps same-time lines in file order.
    raws.sort_by_key(|r| r.time);

    let mut apps: Vec<String> = Vec::new();
    let mut app_index = BTreeMap::new();
    let mut events = Vec::with_capacity(raws.len());
    let mut states: Vec<AppState> = Vec::new();

    #[derive(Clone, Copy, PartialEq)]
    enum AppState {
        Idle,
        Reserved,
        Active,
    }

    for raw in &raws {
        let app = *app_index.entry(raw.app.clone()).or_insert_with(|| {
            apps.push(raw.app.clone());
            states.push(AppState::Idle);
            apps.len() - 1
        });
        let state = states[app];
        let err = |msg: String| Error::Trace {
            line: raw.line,
            msg,
        };
        states[app] = match (state, raw.verb) {
            (AppState::Idle, Verb::Reserve) => AppState::Reserved,
            (AppState::Idle, Verb::Run) => AppState::Idle,
            (AppState::Reserved, Verb::CheckReserved) => AppState::Reserved,
            (AppState::Reserved, Verb::SendParam) => AppState::Active,
            (AppState::Active, Verb::CheckDone) => AppState::Active,
            (AppState::Active, Verb::Free) => AppState::Idle,
            (_, Verb::SendParam) => {
                return Err(err(format!("app `{}`: send_param before reserve", raw.app)))
            }
            (_, Verb::Free) => {
                return Err(err(format!(
                    "app `{}`: free without an active task",
                    raw.app
                )))
            }
            (_, v) => {
                return Err(err(format!(
                    "app `{}`: verb `{}` violates the reserve/send_param/free protocol",
                    raw.app,
                    v.as_str()
                )))
            }
        };
        events.push(TraceEvent {
            time: raw.time,
            app,
            verb: raw.verb,
            kernel: raw.kernel.clone(),
            multiplier: raw.multiplier,
        });
    }
    for (app, state) in states.iter().enumerate() {
        if !matches!(state, AppState::Idle) {
            return Err(Error::Trace {
                line: text.lines().count(),
                msg: format!("app `{}` ends with an unfinished task", apps[app]),
            });
        }
    }

    Ok(Workload {
        apps,
        events,
        kernels,
    })
}

/// Render a workload back to the trace text format.
pub fn trace_to_text(workload: &Workload) -> String {
    let mut out = String::new();
    for ev in &workload.events {
        match &ev.kernel {
            Some(k) => out.push_str(&format!(
                "{} {} {} {} {}\n",
                ev.time,
                workload.apps[ev.app],
                ev.verb.as_str(),
                k,
                ev.multiplier
            )),
            None => out.push_str(&format!(
                "{} {} {}\n",
                ev.time,
                workload.apps[ev.app],
                ev.verb.as_str()
            )),
        }
    }
    out
}

/// Built-in trace generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Pattern {
    /// One task at t=0.
    Single { kernel: String, multiplier: u64 },
    /// One task per expanded instance at t=0, app per instance.
    AllParallel { multiplier: u64 },
    /// `count` back-to-back tasks from one app.
    Stream {
        kernel: String,
        count: u64,
        multiplier: u64,
    },
    /// `count` tasks with exponential inter-arrival times, one app each,
    /// kernels drawn uniformly from the spec's types.
    Poisson {
        mean_interarrival_cycles: f64,
        count: u64,
        seed: u64,
        multiplier: u64,
    },
}

/// Parse the compact pattern syntax used on the command line:
/// `single:<kernel>[:mult]`, `all_parallel[:mult]`,
/// `stream:<kernel>:<count>[:mult]`, `poisson:<mean>:<count>:<seed>[:mult]`.
pub fn parse_pattern(s: &str) -> Result<Pattern> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = |msg: &str| Error::Config(format!("pattern `{s}`: {msg}"));
    let mult = |idx: usize| -> Result<u64> {
        match parts.get(idx) {
            None => Ok(1),
            Some(m) => m.parse().map_err(|_| bad("invalid multiplier")),
        }
    };
    match parts[0] {
        "single" => {
            let kernel = parts
                .get(1)
                .ok_or_else(|| bad("missing kernel"))?
                .to_string();
            Ok(Pattern::Single {
                kernel,
                multiplier: mult(2)?,
            })
        }
        "all_parallel" => Ok(Pattern::AllParallel {
            multiplier: mult(1)?,
        }),
        "stream" => {
            let kernel = parts
                .get(1)
                .ok_or_else(|| bad("missing kernel"))?
                .to_string();
            let count = parts
                .get(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("missing or invalid count"))?;
            Ok(Pattern::Stream {
                kernel,
                count,
                multiplier: mult(3)?,
            })
        }
        "poisson" => {
            let mean = parts
                .get(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("missing or invalid mean inter-arrival"))?;
            let count = parts
                .get(2)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("missing or invalid count"))?;
            let seed = parts
                .get(3)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("missing or invalid seed"))?;
            Ok(Pattern::Poisson {
                mean_interarrival_cycles: mean,
                count,
                seed,
                multiplier: mult(4)?,
            })
        }
        other => Err(bad(&format!("unknown pattern kind `{other}`"))),
    }
}

/// Generate a workload from a pattern. Deterministic for a fixed seed.
pub fn synth_workload(
    pattern: &Pattern,
    spec: &AraSpec,
    kernels: BTreeMap<String, KernelDescriptor>,
) -> Result<Workload> {
    let mut apps = Vec::new();
    let mut events = Vec::new();
    let mut push_run =
        |apps: &mut Vec<String>, time: u64, app: String, kernel: String, mult: u64| {
            let idx = match apps.iter().position(|a| *a == app) {
                Some(i) => i,
                None => {
                    apps.push(app);
                    apps.len() - 1
                }
            };
            events.push(TraceEvent {
                time,
                app: idx,
                verb: Verb::Run,
                kernel: Some(kernel),
                multiplier: mult,
            });
        };

    match pattern {
        Pattern::Single { kernel, multiplier } => {
            require_kernel(&kernels, kernel)?;
            push_run(&mut apps, 0, "app0".into(), kernel.clone(), *multiplier);
        }
        Pattern::AllParallel { multiplier } => {
            for (i, inst) in crate::spec::expand_instances(spec).iter().enumerate() {
                require_kernel(&kernels, &inst.type_name)?;
                push_run(
                    &mut apps,
                    0,
                    format!("app{i}"),
                    inst.type_name.clone(),
                    *multiplier,
                );
            }
        }
        Pattern::Stream {
            kernel,
            count,
            multiplier,
        } => {
            require_kernel(&kernels, kernel)?;
            for t in 0..*count {
                push_run(&mut apps, t, "app0".into(), kernel.clone(), *multiplier);
            }
        }
        Pattern::Poisson {
            mean_interarrival_cycles,
            count,
            seed,
            multiplier,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let names: Vec<String> = spec.acc_types.iter().map(|t| t.name.clone()).collect();
            if names.is_empty() {
                return Err(Error::Config(
                    "poisson pattern needs at least one acc type".into(),
                ));
            }
            for name in &names {
                require_kernel(&kernels, name)?;
            }
            let mut t = 0f64;
            for i in 0..*count {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                t += -mean_interarrival_cycles * u.ln();
                let kernel = names[rng.random_range(0..names.len())].clone();
                push_run(&mut apps, t as u64, format!("app{i}"), kernel, *multiplier);
            }
        }
    }
    let mut workload = Workload {
        apps,
        events,
        kernels,
    };
    workload.events.sort_by_key(|e| e.time);
    Ok(workload)
}

fn require_kernel(kernels: &BTreeMap<String, KernelDescriptor>, name: &str) -> Result<()> {
    if kernels.contains_key(name) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown kernel `{name}`")))
    }
}


#[cfg(test)]
mod validation_tests {
    use super::*;

    #[test]
    fn out_of_range_reuse_factor_is_config_error() {
        let mut overrides = BTreeMap::new();
        overrides.insert(
            "gaussian".to_string(),
            KernelOverride {
                reuse_factor: Some(1.5),
                ..Default::default()
            },
        );
        assert!(merge_kernel_overrides(builtin_kernels(), &overrides).is_err());
        overrides.insert(
            "gaussian".to_string(),
            KernelOverride {
                reuse_factor: Some(0.0),
                ..Default::default()
            },
        );
        assert!(merge_kernel_overrides(builtin_kernels(), &overrides).is_err());
    }

    #[test]
    fn zero_page_kernel_is_allowed() {
        let mut overrides = BTreeMap::new();
        overrides.insert(
            "gaussian".to_string(),
            KernelOverride {
                pages_in: Some(0),
                pages_out: Some(0),
                ..Default::default()
            },
        );
        let merged = merge_kernel_overrides(builtin_kernels(), &overrides).unwrap();
        assert_eq!(merged["gaussian"].effective_pages_in(3), 0);
    }
}
