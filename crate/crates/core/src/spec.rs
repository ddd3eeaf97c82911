//! Parsed model of the ARA specification file.
//!
//! The specification is an XML document with a `<system>` root holding six
//! sections: `ACCs`, `SharedBuffers`, `Interconnects`, `IOMMU`,
//! `CoherentCache` and `AccFrequency`. The first three are mandatory; the
//! rest fall back to documented defaults. Size-like attribute values accept
//! `K`/`M`/`G` suffixes meaning x1024 steps; frequency values accept
//! `K`/`M`/`G` (optionally followed by `Hz`) meaning decimal steps, so
//! `size="16K"` is 16384 bytes and `hz="100MHz"` is 100 MHz. TLB `size` is
//! an entry count, not bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Page granularity of every DMA request.
pub const PAGE_BYTES: u64 = 4096;
/// Default per-bank and per-port buffer size.
pub const DEFAULT_BUFFER_BYTES: u64 = 16 * 1024;
/// Default TLB capacity in entries.
pub const DEFAULT_TLB_ENTRIES: u64 = 8192;
/// Default accelerator-plane clock.
pub const DEFAULT_ACC_HZ: u64 = 100_000_000;

/// One accelerator type as declared in the `ACCs` section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccTypeSpec {
    pub name: String,
    pub num_instances: u64,
    pub num_params: u64,
    pub port_count: u64,
    pub port_buffer_size_bytes: u64,
}

/// The `SharedBuffers` section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedBuffersSpec {
    pub size_bytes: u64,
    pub count: u64,
    pub num_dmacs: u64,
}

/// Interleaving strategy for the bank-to-DMAC network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterleaveStrategy {
    IntraAcc,
    InterAcc,
}

impl InterleaveStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            InterleaveStrategy::IntraAcc => "intra_acc",
            InterleaveStrategy::InterAcc => "inter_acc",
        }
    }
}

impl std::str::FromStr for InterleaveStrategy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "intra_acc" | "intra" => Ok(InterleaveStrategy::IntraAcc),
            "inter_acc" | "inter" => Ok(InterleaveStrategy::InterAcc),
            other => Err(format!("unknown interleave strategy `{other}`")),
        }
    }
}

/// The accelerator-to-buffer half of the `Interconnects` section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossbarSpec {
    pub connectivity: u64,
    pub auto: bool,
}

/// The buffer-to-DMAC half of the `Interconnects` section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleaveSpec {
    pub strategy: InterleaveStrategy,
    pub auto: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterconnectSpec {
    pub acc_to_buf: CrossbarSpec,
    pub buf_to_dmac: InterleaveSpec,
}

/// TLB eviction policy. LRU is the only one the IOMMU implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EvictPolicy {
    Lru,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IommuSpec {
    pub tlb_entries: u64,
    pub evict_policy: EvictPolicy,
}

/// Canonical in-memory mirror of an ARA specification file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AraSpec {
    pub acc_types: Vec<AccTypeSpec>,
    pub shared_buffers: SharedBuffersSpec,
    pub interconnect: InterconnectSpec,
    pub iommu: IommuSpec,
    pub coherent_cache: bool,
    pub acc_frequency_hz: u64,
}

/// One expanded accelerator instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccInstance {
    pub instance_id: usize,
    pub type_name: String,
    pub port_count: usize,
}

impl AraSpec {
    pub fn total_instances(&self) -> u64 {
        self.acc_types.iter().map(|t| t.num_instances).sum()
    }

    pub fn acc_type(&self, name: &str) -> Option<&AccTypeSpec> {
        self.acc_types.iter().find(|t| t.name == name)
    }

    /// Canonical JSON dump consumed by downstream tools.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// Expand duplicated accelerator types into concrete instances, ordered by
/// declaration then duplication index.
pub fn expand_instances(spec: &AraSpec) -> Vec<AccInstance> {
    let mut out = Vec::new();
    for ty in &spec.acc_types {
        for _ in 0..ty.num_instances {
            out.push(AccInstance {
                instance_id: out.len(),
                type_name: ty.name.clone(),
                port_count: ty.port_count as usize,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ConnectivityZero,
    ConnectivityExceedsInstances,
    ZeroPorts,
    ZeroInstances,
    ZeroBuffers,
    BufferNotPageMultiple,
    ZeroDmacs,
    ZeroTlbEntries,
    DuplicateTypeName,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

/// Outcome of [`validate_spec`]. Violations are data, not failures; an empty
/// report means the spec is valid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

pub fn validate_spec(spec: &AraSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let total = spec.total_instances();

    let c = spec.interconnect.acc_to_buf.connectivity;
    if c == 0 {
        report.push(
            ViolationKind::ConnectivityZero,
            "connectivity must be at least 1".into(),
        );
    } else if c > total {
        report.push(
            ViolationKind::ConnectivityExceedsInstances,
            format!("connectivity {c} exceeds instances {total}"),
        );
    }

    let mut seen = std::collections::BTreeSet::new();
    for ty in &spec.acc_types {
        if ty.port_count == 0 {
            report.push(
                ViolationKind::ZeroPorts,
                format!("acc type `{}` has zero ports", ty.name),
            );
        }
        if ty.num_instances == 0 {
            report.push(
                ViolationKind::ZeroInstances,
                format!("acc type `{}` has zero instances", ty.name),
            );
        }
        if !seen.insert(ty.name.clone()) {
            report.push(
                ViolationKind::DuplicateTypeName,
                format!("acc type `{}` declared more than once", ty.name),
            );
        }
    }

    let sb = &spec.shared_buffers;
    if sb.count == 0 {
        report.push(
            ViolationKind::ZeroBuffers,
            "shared buffer count must be at least 1".into(),
        );
    }
    if sb.size_bytes == 0 || !sb.size_bytes.is_multiple_of(PAGE_BYTES) {
        report.push(
            ViolationKind::BufferNotPageMultiple,
            format!(
                "buffer size {} is not a positive multiple of the {PAGE_BYTES}-byte page",
                sb.size_bytes
            ),
        );
    }
    if sb.num_dmacs == 0 {
        report.push(
            ViolationKind::ZeroDmacs,
            "numDMACs must be at least 1".into(),
        );
    }
    if spec.iommu.tlb_entries == 0 {
        report.push(
            ViolationKind::ZeroTlbEntries,
            "TLB must have at least 1 entry".into(),
        );
    }

    report
}

// ---------------------------------------------------------------------------
// XML parsing
// ---------------------------------------------------------------------------

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

/// Parse an ARA specification file, dropping unknown-attribute warnings.
pub fn parse_spec(text: &str) -> Result<AraSpec> {
    parse_spec_full(text).map(|(spec, _)| spec)
}

/// Parse an ARA specification file, returning the spec plus any warnings
/// (unknown elements or attributes tolerated for forward compatibility).
pub fn parse_spec_full(text: &str) -> Result<(AraSpec, Vec<String>)> {
    let mut parser = Parser::new(text);
    let spec = parser.parse()?;
    Ok((spec, parser.warnings))
}

struct Parser<'a> {
    text: &'a str,
    reader: Reader<&'a [u8]>,
    warnings: Vec<String>,
}

type Attrs = Vec<(String, String)>;

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(true);
        Parser {
            text,
            reader,
            warnings: Vec::new(),
        }
    }

    fn line(&self) -> usize {
        let pos = (self.reader.buffer_position() as usize).min(self.text.len());
        self.text[..pos].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn parse_err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line(),
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<Event<'a>> {
        self.reader.read_event().map_err(|e| Error::Parse {
            line: self.line(),
            msg: e.to_string(),
        })
    }

    fn attrs(&mut self, start: &BytesStart<'a>) -> Result<Attrs> {
        let mut out = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| self.parse_err(e.to_string()))?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr
                .unescape_value()
                .map_err(|e| self.parse_err(e.to_string()))?
                .into_owned();
            out.push((key, value));
        }
        Ok(out)
    }

    fn warn_unknown_attrs(&mut self, element: &str, attrs: &Attrs, known: &[&str]) {
        for (k, _) in attrs {
            if !known.contains(&k.as_str()) {
                self.warnings.push(format!(
                    "line {}: unknown attribute `{k}` on <{element}>",
                    self.line()
                ));
            }
        }
    }

    fn skip_element(&mut self, start: &BytesStart<'a>) -> Result<()> {
        let end = start.to_end().into_owned();
        self.reader
            .read_to_end(end.name())
            .map_err(|e| Error::Parse {
                line: self.line(),
                msg: e.to_string(),
            })?;
        Ok(())
    }

    fn parse(&mut self) -> Result<AraSpec> {
        // Find the <system> root.
        loop {
            match self.next()? {
                Event::Start(e) if e.name().as_ref() == b"system" => break,
                Event::Decl(_)
                | Event::Comment(_)
                | Event::Text(_)
                | Event::PI(_)
                | Event::DocType(_) => {}
                Event::Eof => return Err(self.parse_err("missing <system> root element")),
                Event::Start(e) | Event::Empty(e) => {
                    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                    return Err(self.parse_err(format!("expected <system> root, found <{name}>")));
                }
                Event::End(_) => return Err(self.parse_err("unexpected end tag before <system>")),
                _ => {}
            }
        }

        let mut acc_types: Option<Vec<AccTypeSpec>> = None;
        let mut shared: Option<SharedBuffersSpec> = None;
        let mut interconnect: Option<InterconnectSpec> = None;
        let mut iommu: Option<IommuSpec> = None;
        let mut coherent: Option<bool> = None;
        let mut freq: Option<u64> = None;

        loop {
            let (owned, has_children) = match self.next()? {
                Event::Start(e) => (e.into_owned(), true),
                Event::Empty(e) => (e.into_owned(), false),
                Event::End(e) if e.name().as_ref() == b"system" => break,
                Event::Eof => return Err(self.parse_err("unexpected end of file inside <system>")),
                _ => continue,
            };
            let name = String::from_utf8_lossy(owned.name().as_ref()).into_owned();
            match name.as_str() {
                "ACCs" => {
                    acc_types = Some(if has_children {
                        self.parse_accs()?
                    } else {
                        Vec::new()
                    })
                }
                "SharedBuffers" => {
                    let attrs = self.attrs(&owned)?;
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                    shared = Some(self.parse_shared_buffers(attrs)?);
                }
                "Interconnects" => {
                    interconnect = Some(if has_children {
                        self.parse_interconnects()?
                    } else {
                        InterconnectSpec {
                            acc_to_buf: CrossbarSpec {
                                connectivity: 1,
                                auto: true,
                            },
                            buf_to_dmac: InterleaveSpec {
                                strategy: InterleaveStrategy::IntraAcc,
                                auto: true,
                            },
                        }
                    })
                }
                "IOMMU" => {
                    iommu = Some(if has_children {
                        self.parse_iommu()?
                    } else {
                        IommuSpec {
                            tlb_entries: DEFAULT_TLB_ENTRIES,
                            evict_policy: EvictPolicy::Lru,
                        }
                    })
                }
                "CoherentCache" => {
                    let attrs = self.attrs(&owned)?;
                    self.warn_unknown_attrs("CoherentCache", &attrs, &["use"]);
                    coherent = Some(self.attr_u64(&attrs, "use")?.unwrap_or(0) != 0);
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                }
                "AccFrequency" => {
                    let attrs = self.attrs(&owned)?;
                    self.warn_unknown_attrs("AccFrequency", &attrs, &["hz"]);
                    freq = Some(match find(&attrs, "hz") {
                        Some(v) => self.scaled(v, "hz", ScaleKind::Hz)?,
                        None => DEFAULT_ACC_HZ,
                    });
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                }
                other => {
                    self.warnings
                        .push(format!("line {}: unknown element <{other}>", self.line()));
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                }
            }
        }

        let acc_types = acc_types.ok_or(Error::MissingSection("ACCs"))?;
        let shared_buffers = shared.ok_or(Error::MissingSection("SharedBuffers"))?;
        let interconnect = interconnect.ok_or(Error::MissingSection("Interconnects"))?;

        Ok(AraSpec {
            acc_types,
            shared_buffers,
            interconnect,
            iommu: iommu.unwrap_or(IommuSpec {
                tlb_entries: DEFAULT_TLB_ENTRIES,
                evict_policy: EvictPolicy::Lru,
            }),
            coherent_cache: coherent.unwrap_or(false),
            acc_frequency_hz: freq.unwrap_or(DEFAULT_ACC_HZ),
        })
    }

    fn parse_accs(&mut self) -> Result<Vec<AccTypeSpec>> {
        let mut types = Vec::new();
        loop {
            let (owned, has_children) = match self.next()? {
                Event::Start(e) => (e.into_owned(), true),
                Event::Empty(e) => (e.into_owned(), false),
                Event::End(e) if e.name().as_ref() == b"ACCs" => break,
                Event::Eof => return Err(self.parse_err("unexpected end of file inside <ACCs>")),
                _ => continue,
            };
            let name = String::from_utf8_lossy(owned.name().as_ref()).into_owned();
            if name == "acc" {
                types.push(self.parse_acc(&owned, has_children)?);
            } else {
                self.warnings.push(format!(
                    "line {}: unknown element <{name}> in <ACCs>",
                    self.line()
                ));
                if has_children {
                    self.skip_element(&owned)?;
                }
            }
        }
        Ok(types)
    }

    fn parse_acc(&mut self, start: &BytesStart<'a>, has_children: bool) -> Result<AccTypeSpec> {
        let attrs = self.attrs(start)?;
        self.warn_unknown_attrs("acc", &attrs, &["type", "num", "num_params"]);
        let ty_name = find(&attrs, "type")
            .ok_or_else(|| self.parse_err("<acc> is missing the `type` attribute"))?
            .to_owned();
        let num = self.attr_u64(&attrs, "num")?.unwrap_or(1);
        let num_params = self.attr_u64(&attrs, "num_params")?.unwrap_or(0);

        let mut port_count = 0u64;
        let mut port_size: Option<u64> = None;

        // <acc .../> without ports parses; validation flags the zero ports.
        let mut open = has_children;
        while open {
            let (owned, child_has_children) = match self.next()? {
                Event::Start(e) => (e.into_owned(), true),
                Event::Empty(e) => (e.into_owned(), false),
                Event::End(e) if e.name().as_ref() == b"acc" => {
                    open = false;
                    continue;
                }
                Event::Eof => return Err(self.parse_err("unexpected end of file inside <acc>")),
                _ => continue,
            };
            let name = String::from_utf8_lossy(owned.name().as_ref()).into_owned();
            if name == "port" {
                let pattrs = self.attrs(&owned)?;
                self.warn_unknown_attrs("port", &pattrs, &["size", "num"]);
                port_count += self.attr_u64(&pattrs, "num")?.unwrap_or(1);
                if let Some(v) = find(&pattrs, "size") {
                    let bytes = self.scaled(v, "size", ScaleKind::Binary)?;
                    if let Some(prev) = port_size {
                        if prev != bytes {
                            self.warnings.push(format!(
                                "line {}: conflicting port sizes on acc `{ty_name}`; keeping first",
                                self.line()
                            ));
                        }
                    } else {
                        port_size = Some(bytes);
                    }
                }
                if child_has_children {
                    self.skip_element(&owned)?;
                }
            } else {
                self.warnings.push(format!(
                    "line {}: unknown element <{name}> in <acc>",
                    self.line()
                ));
                if child_has_children {
                    self.skip_element(&owned)?;
                }
            }
        }

        Ok(AccTypeSpec {
            name: ty_name,
            num_instances: num,
            num_params,
            port_count,
            port_buffer_size_bytes: port_size.unwrap_or(DEFAULT_BUFFER_BYTES),
        })
    }

    fn parse_shared_buffers(&mut self, attrs: Attrs) -> Result<SharedBuffersSpec> {
        self.warn_unknown_attrs("SharedBuffers", &attrs, &["size", "num", "numDMACs"]);
        let size_bytes = match find(&attrs, "size") {
            Some(v) => self.scaled(v, "size", ScaleKind::Binary)?,
            None => DEFAULT_BUFFER_BYTES,
        };
        let count = self.attr_u64(&attrs, "num")?.unwrap_or(1);
        let num_dmacs = self.attr_u64(&attrs, "numDMACs")?.unwrap_or(1);
        Ok(SharedBuffersSpec {
            size_bytes,
            count,
            num_dmacs,
        })
    }

    fn parse_interconnects(&mut self) -> Result<InterconnectSpec> {
        let mut acc_to_buf: Option<CrossbarSpec> = None;
        let mut buf_to_dmac: Option<InterleaveSpec> = None;
        loop {
            let (owned, has_children) = match self.next()? {
                Event::Start(e) => (e.into_owned(), true),
                Event::Empty(e) => (e.into_owned(), false),
                Event::End(e) if e.name().as_ref() == b"Interconnects" => break,
                Event::Eof => {
                    return Err(self.parse_err("unexpected end of file inside <Interconnects>"))
                }
                _ => continue,
            };
            let name = String::from_utf8_lossy(owned.name().as_ref()).into_owned();
            match name.as_str() {
                "ACCS_to_Buffers" => {
                    let attrs = self.attrs(&owned)?;
                    self.warn_unknown_attrs(
                        "ACCS_to_Buffers",
                        &attrs,
                        &["type", "connectivity", "auto"],
                    );
                    if let Some(kind) = find(&attrs, "type") {
                        if kind != "crossbar" {
                            return Err(self.value_err(
                                "type",
                                format!(
                                    "unsupported interconnect kind `{kind}`; expected `crossbar`"
                                ),
                            ));
                        }
                    }
                    acc_to_buf = Some(CrossbarSpec {
                        connectivity: self.attr_u64(&attrs, "connectivity")?.unwrap_or(1),
                        auto: self.attr_u64(&attrs, "auto")?.unwrap_or(1) != 0,
                    });
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                }
                "Buffers_to_DMACs" => {
                    let attrs = self.attrs(&owned)?;
                    self.warn_unknown_attrs(
                        "Buffers_to_DMACs",
                        &attrs,
                        &["type", "use", "auto", "strategy"],
                    );
                    if let Some(kind) = find(&attrs, "type") {
                        if kind != "interleaved" {
                            return Err(self.value_err("type", format!("unsupported interconnect kind `{kind}`; expected `interleaved`")));
                        }
                    }
                    let strategy = match find(&attrs, "strategy") {
                        Some(v) => v
                            .parse::<InterleaveStrategy>()
                            .map_err(|e| self.value_err("strategy", e))?,
                        None => InterleaveStrategy::IntraAcc,
                    };
                    buf_to_dmac = Some(InterleaveSpec {
                        strategy,
                        auto: self.attr_u64(&attrs, "auto")?.unwrap_or(1) != 0,
                    });
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                }
                other => {
                    self.warnings.push(format!(
                        "line {}: unknown element <{other}> in <Interconnects>",
                        self.line()
                    ));
                    if has_children {
                        self.skip_element(&owned)?;
                    }
                }
            }
        }
        Ok(InterconnectSpec {
            acc_to_buf: acc_to_buf.unwrap_or(CrossbarSpec {
                connectivity: 1,
                auto: true,
            }),
            buf_to_dmac: buf_to_dmac.unwrap_or(InterleaveSpec {
                strategy: InterleaveStrategy::IntraAcc,
                auto: true,
            }),
        })
    }

    fn parse_iommu(&mut self) -> Result<IommuSpec> {
        let mut tlb_entries = DEFAULT_TLB_ENTRIES;
        let mut evict = EvictPolicy::Lru;
        loop {
            let (owned, has_children) = match self.next()? {
                Event::Start(e) => (e.into_owned(), true),
                Event::Empty(e) => (e.into_owned(), false),
                Event::End(e) if e.name().as_ref() == b"IOMMU" => break,
                Event::Eof => return Err(self.parse_err("unexpected end of file inside <IOMMU>")),
                _ => continue,
            };
            let name = String::from_utf8_lossy(owned.name().as_ref()).into_owned();
            if name == "TLB" {
                let attrs = self.attrs(&owned)?;
                self.warn_unknown_attrs("TLB", &attrs, &["size", "evict"]);
                if let Some(v) = find(&attrs, "size") {
                    // TLB size is an entry count ("8K" = 8192 entries).
                    tlb_entries = self.scaled(v, "size", ScaleKind::Binary)?;
                }
                if let Some(v) = find(&attrs, "evict") {
                    evict = match v {
                        "LRU" | "lru" => EvictPolicy::Lru,
                        other => {
                            return Err(self.value_err(
                                "evict",
                                format!("unsupported eviction policy `{other}`"),
                            ))
                        }
                    };
                }
                if has_children {
                    self.skip_element(&owned)?;
                }
            } else {
                self.warnings.push(format!(
                    "line {}: unknown element <{name}> in <IOMMU>",
                    self.line()
                ));
                if has_children {
                    self.skip_element(&owned)?;
                }
            }
        }
        Ok(IommuSpec {
            tlb_entries,
            evict_policy: evict,
        })
    }

    fn value_err(&self, attr: &str, msg: impl Into<String>) -> Error {
        Error::Value {
            line: self.line(),
            attr: attr.to_string(),
            msg: msg.into(),
        }
    }

    fn attr_u64(&self, attrs: &Attrs, key: &str) -> Result<Option<u64>> {
        match find(attrs, key) {
            None => Ok(None),
            Some(v) => {
                v.trim().parse::<u64>().map(Some).map_err(|_| {
                    self.value_err(key, format!("`{v}` is not a non-negative integer"))
                })
            }
        }
    }

    fn scaled(&self, value: &str, attr: &str, kind: ScaleKind) -> Result<u64> {
        parse_scaled(value, kind)
            .ok_or_else(|| self.value_err(attr, format!("`{value}` is not a valid quantity")))
    }
}

fn find<'v>(attrs: &'v Attrs, key: &str) -> Option<&'v str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

#[derive(Clone, Copy)]
enum ScaleKind {
    /// Sizes and entry counts: K/M/G are x1024 steps.
    Binary,
    /// Frequencies: K/M/G are decimal steps, optional trailing `Hz`.
    Hz,
}

fn parse_scaled(value: &str, kind: ScaleKind) -> Option<u64> {
    let mut v = value.trim();
    if matches!(kind, ScaleKind::Hz) {
        if let Some(stripped) = v.strip_suffix("Hz").or_else(|| v.strip_suffix("hz")) {
            v = stripped;
        }
    }
    let (mult, digits) = match v.chars().last()? {
        'K' | 'k' => (
            match kind {
                ScaleKind::Binary => 1024u64,
                ScaleKind::Hz => 1_000,
            },
            &v[..v.len() - 1],
        ),
        'M' | 'm' => (
            match kind {
                ScaleKind::Binary => 1024 * 1024,
                ScaleKind::Hz => 1_000_000,
            },
            &v[..v.len() - 1],
        ),
        'G' | 'g' => (
            match kind {
                ScaleKind::Binary => 1024 * 1024 * 1024,
                ScaleKind::Hz => 1_000_000_000,
            },
            &v[..v.len() - 1],
        ),
        _ => (1, v),
    };
    let n: u64 = digits.trim().parse().ok()?;
    n.checked_mul(mult)
}

// ---------------------------------------------------------------------------
// XML serialization (round-trip support)
// ---------------------------------------------------------------------------

/// Serialize a spec back to the XML file format. Quantities are written
/// unsuffixed; `parse_spec(to_xml(s)) == s` holds for any parsed spec.
pub fn to_xml(spec: &AraSpec) -> String {
    let mut s = String::new();
    s.push_str("<system>\n<ACCs>\n");
    for ty in &spec.acc_types {
        s.push_str(&format!(
            "  <acc type=\"{}\" num=\"{}\" num_params=\"{}\">\n    <port size=\"{}\" num=\"{}\"/>\n  </acc>\n",
            ty.name, ty.num_instances, ty.num_params, ty.port_buffer_size_bytes, ty.port_count
        ));
    }
    s.push_str("</ACCs>\n");
    s.push_str(&format!(
        "<SharedBuffers size=\"{}\" num=\"{}\" numDMACs=\"{}\"/>\n",
        spec.shared_buffers.size_bytes, spec.shared_buffers.count, spec.shared_buffers.num_dmacs
    ));
    s.push_str("<Interconnects>\n");
    s.push_str(&format!(
        "  <ACCS_to_Buffers type=\"crossbar\" connectivity=\"{}\" auto=\"{}\"/>\n",
        spec.interconnect.acc_to_buf.connectivity, spec.interconnect.acc_to_buf.auto as u8
    ));
    s.push_str(&format!(
        "  <Buffers_to_DMACs type=\"interleaved\" strategy=\"{}\" auto=\"{}\"/>\n",
        spec.interconnect.buf_to_dmac.strategy.as_str(),
        spec.interconnect.buf_to_dmac.auto as u8
    ));
    s.push_str("</Interconnects>\n");
    s.push_str(&format!(
        "<IOMMU>\n  <TLB size=\"{}\" evict=\"LRU\"/>\n</IOMMU>\n",
        spec.iommu.tlb_entries
    ));
    s.push_str(&format!(
        "<CoherentCache use=\"{}\" />\n",
        spec.coherent_cache as u8
    ));
    s.push_str(&format!(
        "<AccFrequency hz=\"{}\" />\n",
        spec.acc_frequency_hz
    ));
    s.push_str("</system>\n");
    s
}

// ---------------------------------------------------------------------------

#[cfg(test)]
pub use tests::EXAMPLE_XML;


#[cfg(test)]
mod kind_tests {
    use super::*;

    #[test]
    fn unsupported_interconnect_kind_is_value_error() {
        let xml = EXAMPLE_XML.replace("type=\"crossbar\"", "type=\"mesh\"");
        match parse_spec(&xml) {
            Err(Error::Value { attr, .. }) => assert_eq!(attr, "type"),
            other => panic!("expected value error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_evict_policy_is_value_error() {
        let xml = EXAMPLE_XML.replace("evict=\"LRU\"", "evict=\"FIFO\"");
        assert!(matches!(parse_spec(&xml), Err(Error::Value { .. })));
    }
}
