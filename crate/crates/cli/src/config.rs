//! Run configuration: a small INI-style format with explicit units.
//!
//! ```text
//! command = sweep
//!
//! [geometry]
//! design = mod_c
//!
//! [sweep]
//! depths = 300nm, 400nm, 600nm, 1um
//! target_depth = 50nm
//! ```
//!
//! Every dimensional value carries a unit suffix. Unknown sections and keys
//! are rejected, and all problems are reported together with line numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use surfloss::analysis::{SimulationSetup, DEFAULT_MIN_FIT_DEPTH};
use surfloss::geometry::{DesignParams, Interface, ModId, PerInterface, Style};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Budget,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Budget => "budget",
            Command::Compare => "compare",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulate" => Ok(Command::Simulate),
            "sweep" => Ok(Command::Sweep),
            "budget" => Ok(Command::Budget),
            "compare" => Ok(Command::Compare),
            other => Err(format!("unknown command `{other}` (expected simulate, sweep, budget or compare)")),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One itemised config problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedDesign {
    pub name: String,
    pub params: DesignParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Ascending, metres.
    pub depths: Vec<f64>,
    pub target_depth: Option<f64>,
    pub min_fit_depth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurcellConfig {
    pub g: f64,
    pub f_resonator: f64,
    pub q_c: f64,
}

/// Participations given directly instead of simulated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GivenParticipation {
    /// m⁻¹.
    pub p_over_t: PerInterface<f64>,
    pub p_substrate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetConfig {
    pub thickness: PerInterface<f64>,
    pub tan_delta: PerInterface<f64>,
    pub tan_delta_substrate: f64,
    pub other_loss: f64,
    /// Qubit frequency, Hz.
    pub frequency: f64,
    pub given: Option<GivenParticipation>,
    pub purcell: Option<PurcellConfig>,
    pub q_measured: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub mesh_dump: bool,
    pub field_dump: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub design: Option<NamedDesign>,
    pub trench: Option<f64>,
    pub setup: SimulationSetup,
    pub sweep: Option<SweepConfig>,
    pub budget: Option<BudgetConfig>,
    pub compare: Vec<NamedDesign>,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Length,
    Frequency,
    Time,
    PerLength,
    Number,
    Count,
    Flag,
    Word,
    Lengths,
    Words,
}

const SECTIONS: &[(&str, &[(&str, Kind)])] = &[
    (
        "geometry",
        &[
            ("design", Kind::Word),
            ("trench", Kind::Length),
            ("style", Kind::Word),
            ("width", Kind::Length),
            ("gap", Kind::Length),
            ("finger_pairs", Kind::Count),
            ("pad_height", Kind::Length),
            ("metal_thickness", Kind::Length),
            ("ground_box_span", Kind::Length),
        ],
    ),
    (
        "materials",
        &[
            ("eps_substrate", Kind::Number),
            ("eps_sm", Kind::Number),
            ("eps_sa", Kind::Number),
            ("eps_ma", Kind::Number),
        ],
    ),
    (
        "mesh",
        &[
            ("h_max", Kind::Length),
            ("corner_h_min", Kind::Length),
            ("grading_ratio", Kind::Number),
            ("refine_passes", Kind::Count),
            ("marker_fraction", Kind::Number),
            ("uniform_refinements", Kind::Count),
        ],
    ),
    ("participation", &[("cutoff", Kind::Length), ("sa_sidewalls", Kind::Flag)]),
    (
        "sweep",
        &[("depths", Kind::Lengths), ("target_depth", Kind::Length), ("min_fit_depth", Kind::Length)],
    ),
    (
        "budget",
        &[
            ("thickness_sm", Kind::Length),
            ("thickness_sa", Kind::Length),
            ("thickness_ma", Kind::Length),
            ("tan_sm", Kind::Number),
            ("tan_sa", Kind::Number),
            ("tan_ma", Kind::Number),
            ("tan_substrate", Kind::Number),
            ("other_loss", Kind::Number),
            ("frequency", Kind::Frequency),
            ("p_sm", Kind::PerLength),
            ("p_sa", Kind::PerLength),
            ("p_ma", Kind::PerLength),
            ("p_sub", Kind::Number),
            ("purcell_g", Kind::Frequency),
            ("resonator_frequency", Kind::Frequency),
            ("resonator_q_c", Kind::Number),
            ("q_measured", Kind::Number),
            ("t1_measured", Kind::Time),
        ],
    ),
    ("compare", &[("designs", Kind::Words)]),
    (
        "output",
        &[("dir", Kind::Word), ("mesh_dump", Kind::Flag), ("field_dump", Kind::Flag)],
    ),
];

fn kind_of(section: &str, key: &str) -> Option<Option<Kind>> {
    SECTIONS
        .iter()
        .find(|(s, _)| *s == section)
        .map(|(_, keys)| keys.iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind))
}

/// Unit suffixes with their power of ten.
fn units(kind: Kind) -> &'static [(&'static str, i32)] {
    match kind {
        Kind::Length | Kind::Lengths => &[("m", 0), ("mm", -3), ("um", -6), ("µm", -6), ("nm", -9)],
        Kind::Frequency => &[("Hz", 0), ("kHz", 3), ("MHz", 6), ("GHz", 9)],
        Kind::Time => &[("s", 0), ("ms", -3), ("us", -6), ("µs", -6), ("ns", -9)],
        Kind::PerLength => &[("/m", 0), ("1/m", 0), ("m^-1", 0), ("/um", 6)],
        _ => &[],
    }
}

// Dividing by an exact power of ten keeps `300nm` equal to the literal 3e-7.
fn apply_exponent(v: f64, exp: i32) -> f64 {
    if exp >= 0 {
        v * 10f64.powi(exp)
    } else {
        v / 10f64.powi(-exp)
    }
}

fn unit_names(kind: Kind) -> String {
    units(kind).iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
}

/// Splits `300nm` into 300 and `nm` by the longest numeric prefix.
fn split_number(text: &str) -> Option<(f64, &str)> {
    let text = text.trim();
    (1..=text.len())
        .rev()
        .filter(|&i| text.is_char_boundary(i))
        .find_map(|i| text[..i].trim().parse::<f64>().ok().map(|v| (v, text[i..].trim())))
}

fn parse_quantity(text: &str, kind: Kind) -> Result<f64, String> {
    let (v, suffix) = split_number(text).ok_or_else(|| format!("`{text}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let table = units(kind);
    if table.is_empty() {
        return if suffix.is_empty() {
            Ok(v)
        } else {
            Err(format!("dimensionless value takes no unit, found `{suffix}`"))
        };
    }
    if suffix.is_empty() {
        return Err(format!("missing unit in `{text}` (expected one of {})", unit_names(kind)));
    }
    table
        .iter()
        .find(|(u, _)| *u == suffix)
        .map(|&(_, exp)| apply_exponent(v, exp))
        .ok_or_else(|| format!("unknown unit `{suffix}` (expected one of {})", unit_names(kind)))
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: String,
    used: bool,
}

#[derive(Clone, Debug)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

struct Reader {
    sections: BTreeMap<String, Section>,
    command: Option<(usize, String)>,
    errors: Vec<ParseError>,
}

impl Reader {
    fn lex(text: &str) -> Self {
        let mut r = Reader {
            sections: BTreeMap::new(),
            command: None,
            errors: Vec::new(),
        };
        // `Some(None)` while skipping the body of a rejected section.
        let mut current: Option<Option<String>> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']').map(str::trim) else {
                    r.error(line, None, format!("malformed section header `{content}`"));
                    current = Some(None);
                    continue;
                };
                if kind_of(name, "").is_none() {
                    r.error(line, None, format!("unknown section `[{name}]`"));
                    current = Some(None);
                } else if r.sections.contains_key(name) {
                    r.error(line, None, format!("section `[{name}]` appears twice"));
                    current = Some(None);
                } else {
                    r.sections.insert(name.to_string(), Section { line, entries: BTreeMap::new() });
                    current = Some(Some(name.to_string()));
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                r.error(line, None, format!("expected `key = value`, found `{content}`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let section = match &current {
                Some(Some(name)) => name.clone(),
                Some(None) => continue,
                None => {
                    if key != "command" {
                        r.error(line, Some(key), "only `command` may appear before the first section".into());
                    } else if r.command.is_some() {
                        r.error(line, Some(key), "given twice".into());
                    } else {
                        r.command = Some((line, value.to_string()));
                    }
                    continue;
                }
            };
            if kind_of(&section, key) == Some(None) {
                r.error(line, Some(key), format!("unknown key in `[{section}]`"));
                continue;
            }
            if value.is_empty() {
                r.error(line, Some(key), "empty value".into());
                continue;
            }
            let entries = &mut r.sections.get_mut(&section).unwrap().entries;
            if entries.contains_key(key) {
                r.error(line, Some(key), "given twice".into());
                continue;
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string(), used: false });
        }
        r
    }

    fn error(&mut self, line: usize, key: Option<&str>, message: String) {
        self.errors.push(ParseError {
            line: Some(line),
            key: key.map(str::to_string),
            message,
        });
    }

    fn has(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn present(&self, section: &str, key: &str) -> bool {
        self.sections.get(section).is_some_and(|s| s.entries.contains_key(key))
    }

    fn require_section(&mut self, section: &str, command: Command) -> bool {
        if self.has(section) {
            return true;
        }
        self.errors.push(ParseError {
            line: None,
            key: None,
            message: format!("missing section `[{section}]` required by `{command}`"),
        });
        false
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        let e = self.sections.get_mut(section)?.entries.get_mut(key)?;
        e.used = true;
        Some((e.line, e.value.clone()))
    }

    fn required<T>(&mut self, section: &str, key: &str, why: &str, get: impl FnOnce(&mut Self) -> Option<T>) -> Option<T> {
        if !self.present(section, key) {
            let line = self.sections.get(section).map(|s| s.line);
            self.errors.push(ParseError {
                line,
                key: Some(key.to_string()),
                message: format!("missing in `[{section}]`: {why}"),
            });
            return None;
        }
        get(self)
    }

    fn quantity(&mut self, section: &str, key: &str) -> Option<f64> {
        let kind = kind_of(section, key).flatten().expect("key is declared");
        let (line, value) = self.take(section, key)?;
        match parse_quantity(&value, kind) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.error(line, Some(key), msg);
                None
            }
        }
    }

    fn count(&mut self, section: &str, key: &str) -> Option<usize> {
        let (line, value) = self.take(section, key)?;
        match value.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.error(line, Some(key), format!("`{value}` is not a non-negative integer"));
                None
            }
        }
    }

    fn flag(&mut self, section: &str, key: &str) -> Option<bool> {
        let (line, value) = self.take(section, key)?;
        match value.as_str() {
            "true" | "yes" | "on" => Some(true),
            "false" | "no" | "off" => Some(false),
            _ => {
                self.error(line, Some(key), format!("`{value}` is not true or false"));
                None
            }
        }
    }

    fn word(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.take(section, key)
    }

    fn lengths(&mut self, section: &str, key: &str) -> Option<(usize, Vec<f64>)> {
        let (line, value) = self.take(section, key)?;
        let mut out = Vec::new();
        for item in value.split(',') {
            match parse_quantity(item, Kind::Length) {
                Ok(v) => out.push(v),
                Err(msg) => {
                    self.error(line, Some(key), msg);
                    return None;
                }
            }
        }
        Some((line, out))
    }

    /// Flags keys that were valid but not consumed by this command.
    fn reject_unused(&mut self, command: Command) {
        let mut unused = Vec::new();
        for (name, s) in &self.sections {
            for (key, e) in &s.entries {
                if !e.used {
                    unused.push(ParseError {
                        line: Some(e.line),
                        key: Some(key.clone()),
                        message: format!("`[{name}]` key is not used by `{command}`"),
                    });
                }
            }
        }
        self.errors.extend(unused);
    }
}

/// Parses a config that names its own command.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ParseError>> {
    parse_config_with(text, None)
}

/// Parses a config; `command`, when given, must agree with any `command` key.
pub fn parse_config_with(text: &str, command: Option<Command>) -> Result<RunConfig, Vec<ParseError>> {
    let mut r = Reader::lex(text);
    let from_text = match r.command.clone() {
        Some((line, v)) => match v.parse::<Command>() {
            Ok(c) => Some(c),
            Err(msg) => {
                r.error(line, Some("command"), msg);
                return Err(r.errors);
            }
        },
        None => None,
    };
    let command = match (command, from_text) {
        (Some(a), Some(b)) if a != b => {
            let line = r.command.as_ref().map(|c| c.0).unwrap_or(0);
            r.error(line, Some("command"), format!("config says `{b}` but `{a}` was requested"));
            return Err(r.errors);
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => {
            r.errors.push(ParseError {
                line: None,
                key: Some("command".into()),
                message: "no command given".into(),
            });
            return Err(r.errors);
        }
    };

    let mut setup = SimulationSetup::default();
    read_materials(&mut r, &mut setup);
    read_mesh(&mut r, &mut setup);
    read_participation(&mut r, &mut setup);
    let output = read_output(&mut r);

    let mut cfg = RunConfig {
        command,
        design: None,
        trench: None,
        setup,
        sweep: None,
        budget: None,
        compare: Vec::new(),
        output,
    };

    match command {
        Command::Simulate => {
            if r.require_section("geometry", command) {
                cfg.design = read_design(&mut r, true);
                cfg.trench = r.required("geometry", "trench", "trench depth of the simulation", |r| r.quantity("geometry", "trench"));
            }
        }
        Command::Sweep => {
            if r.require_section("geometry", command) {
                cfg.design = read_design(&mut r, true);
            }
            if r.require_section("sweep", command) {
                cfg.sweep = read_sweep(&mut r, true);
            }
        }
        Command::Budget => {
            if r.require_section("budget", command) {
                cfg.budget = read_budget(&mut r, true);
            }
            let given = cfg.budget.as_ref().is_some_and(|b| b.given.is_some());
            if !given && cfg.budget.is_some() {
                // Participations come from a sweep extrapolated to the target depth.
                if r.require_section("geometry", command) {
                    cfg.design = read_design(&mut r, true);
                }
                if r.require_section("sweep", command) {
                    cfg.sweep = read_sweep(&mut r, true);
                    if cfg.sweep.as_ref().is_some_and(|s| s.target_depth.is_none()) {
                        r.errors.push(ParseError {
                            line: r.sections.get("sweep").map(|s| s.line),
                            key: Some("target_depth".into()),
                            message: "missing in `[sweep]`: depth the budget is evaluated at".into(),
                        });
                    }
                }
            }
        }
        Command::Compare => {
            if r.require_section("compare", command) {
                cfg.compare = read_compare(&mut r);
            }
            if r.has("sweep") {
                cfg.sweep = read_sweep(&mut r, false);
            }
            if r.require_section("budget", command) {
                cfg.budget = read_budget(&mut r, false);
            }
        }
    }
    if let Some(b) = &cfg.budget {
        cfg.setup.materials.layer_thickness = b.thickness;
        cfg.setup.materials.loss_tangent = b.tan_delta;
        cfg.setup.materials.loss_tangent_substrate = b.tan_delta_substrate;
    }
    if let Err(e) = cfg.setup.materials.validate() {
        r.errors.push(ParseError { line: None, key: None, message: e.to_string() });
    }
    if let Err(e) = cfg.setup.controls.validate() {
        r.errors.push(ParseError {
            line: r.sections.get("mesh").map(|s| s.line),
            key: None,
            message: e.to_string(),
        });
    }
    r.reject_unused(command);
    if r.errors.is_empty() {
        Ok(cfg)
    } else {
        r.errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        Err(r.errors)
    }
}

fn read_materials(r: &mut Reader, setup: &mut SimulationSetup) {
    let m = &mut setup.materials;
    if let Some(v) = r.quantity("materials", "eps_substrate") {
        m.eps_substrate = v;
    }
    for i in Interface::ALL {
        if let Some(v) = r.quantity("materials", &format!("eps_{}", i.name().to_ascii_lowercase())) {
            *m.eps_contamination.get_mut(i) = v;
        }
    }
}

fn read_mesh(r: &mut Reader, setup: &mut SimulationSetup) {
    let c = &mut setup.controls;
    if let Some(v) = r.quantity("mesh", "h_max") {
        c.h_max = v;
    }
    if let Some(v) = r.quantity("mesh", "corner_h_min") {
        c.corner_h_min = v;
    }
    if let Some(v) = r.quantity("mesh", "grading_ratio") {
        c.grading_ratio = v;
    }
    if let Some(v) = r.count("mesh", "refine_passes") {
        c.max_refine_passes = v;
    }
    if let Some(v) = r.quantity("mesh", "marker_fraction") {
        if v > 0.0 && v <= 1.0 {
            setup.marker_fraction = v;
        } else {
            let line = r.sections["mesh"].entries["marker_fraction"].line;
            r.error(line, Some("marker_fraction"), format!("must lie in (0, 1], got {v}"));
        }
    }
    if let Some(v) = r.count("mesh", "uniform_refinements") {
        setup.uniform_refinements = v;
    }
}

fn read_participation(r: &mut Reader, setup: &mut SimulationSetup) {
    if let Some(v) = r.quantity("participation", "cutoff") {
        setup.options.cutoff = v;
    }
    if let Some(v) = r.flag("participation", "sa_sidewalls") {
        setup.options.sa_sidewalls = v;
    }
}

fn read_output(r: &mut Reader) -> OutputConfig {
    OutputConfig {
        dir: r.word("output", "dir").map(|(_, v)| PathBuf::from(v)),
        mesh_dump: r.flag("output", "mesh_dump").unwrap_or(false),
        field_dump: r.flag("output", "field_dump").unwrap_or(false),
    }
}

fn read_design(r: &mut Reader, required: bool) -> Option<NamedDesign> {
    let (line, name) = if required {
        r.required("geometry", "design", "a preset (mod_a to mod_e) or `custom`", |r| r.word("geometry", "design"))?
    } else {
        r.word("geometry", "design")?
    };
    let custom_keys = ["style", "width", "gap", "finger_pairs", "pad_height"];
    let mut params = if name == "custom" {
        custom_design(r)?
    } else {
        match name.parse::<ModId>() {
            Ok(id) => {
                for key in custom_keys {
                    if let Some((l, _)) = r.take("geometry", key) {
                        r.error(l, Some(key), format!("only allowed with `design = custom`, not the `{}` preset", id.name()));
                    }
                }
                id.preset().params
            }
            Err(e) => {
                r.error(line, Some("design"), e.to_string());
                return None;
            }
        }
    };
    if let Some(v) = r.quantity("geometry", "metal_thickness") {
        params.metal_thickness = v;
    }
    if let Some(v) = r.quantity("geometry", "ground_box_span") {
        params.ground_box_span = v;
    }
    if let Err(e) = params.validate() {
        r.error(line, Some("design"), e.to_string());
        return None;
    }
    let name = name.parse::<ModId>().map(|id| id.name().to_string()).unwrap_or(name);
    Some(NamedDesign { name, params })
}

fn custom_design(r: &mut Reader) -> Option<DesignParams> {
    let (line, style) = r.required("geometry", "style", "interdigitated or pad_pair", |r| r.word("geometry", "style"))?;
    let style = match style.parse::<Style>() {
        Ok(s) => s,
        Err(e) => {
            r.error(line, Some("style"), e.to_string());
            return None;
        }
    };
    let width = r.required("geometry", "width", "conductor width", |r| r.quantity("geometry", "width"));
    let gap = r.required("geometry", "gap", "gap between conductors", |r| r.quantity("geometry", "gap"));
    match style {
        Style::Interdigitated => {
            let pairs = r.required("geometry", "finger_pairs", "number of finger pairs", |r| r.count("geometry", "finger_pairs"));
            if let Some((l, _)) = r.take("geometry", "pad_height") {
                r.error(l, Some("pad_height"), "only allowed for pad_pair designs".into());
            }
            Some(DesignParams::interdigitated(width?, gap?, pairs?))
        }
        Style::PadPair => {
            let height = r.required("geometry", "pad_height", "pad extent along the gap", |r| r.quantity("geometry", "pad_height"));
            if let Some((l, _)) = r.take("geometry", "finger_pairs") {
                r.error(l, Some("finger_pairs"), "only allowed for interdigitated designs".into());
            }
            Some(DesignParams::pad_pair(width?, gap?, height?))
        }
    }
}

fn read_sweep(r: &mut Reader, required: bool) -> Option<SweepConfig> {
    let depths = if required {
        r.required("sweep", "depths", "comma-separated trench depths", |r| r.lengths("sweep", "depths"))
    } else {
        r.lengths("sweep", "depths")
    };
    let target_depth = r.quantity("sweep", "target_depth");
    let min_fit_depth = r.quantity("sweep", "min_fit_depth").unwrap_or(DEFAULT_MIN_FIT_DEPTH);
    let mut depths = match depths {
        Some((_, d)) => d,
        None if required => return None,
        None => Vec::new(),
    };
    depths.sort_by(f64::total_cmp);
    Some(SweepConfig {
        depths,
        target_depth,
        min_fit_depth,
    })
}

fn read_budget(r: &mut Reader, allow_given: bool) -> Option<BudgetConfig> {
    let mut ok = true;
    let mut per = |r: &mut Reader, prefix: &str, why: &str| -> PerInterface<f64> {
        PerInterface::splat(()).map(|i, _| {
            let key = format!("{prefix}_{}", i.name().to_ascii_lowercase());
            let v = r.required("budget", &key, why, |r| r.quantity("budget", &key));
            ok &= v.is_some();
            v.unwrap_or(f64::NAN)
        })
    };
    let thickness = per(r, "thickness", "contamination layer thickness");
    let tan_delta = per(r, "tan", "layer loss tangent");
    let tan_delta_substrate = r.required("budget", "tan_substrate", "substrate loss tangent", |r| r.quantity("budget", "tan_substrate"));
    let other_loss = r.required("budget", "other_loss", "loss not attributed to dielectrics (may be 0)", |r| r.quantity("budget", "other_loss"));
    let frequency = r.required("budget", "frequency", "qubit frequency", |r| r.quantity("budget", "frequency"));

    let given_keys = ["p_sm", "p_sa", "p_ma", "p_sub"];
    let given = if given_keys.iter().any(|k| r.present("budget", k)) {
        if allow_given {
            let p_sm = r.required("budget", "p_sm", "all participations or none", |r| r.quantity("budget", "p_sm"));
            let p_sa = r.required("budget", "p_sa", "all participations or none", |r| r.quantity("budget", "p_sa"));
            let p_ma = r.required("budget", "p_ma", "all participations or none", |r| r.quantity("budget", "p_ma"));
            let p_sub = r.required("budget", "p_sub", "all participations or none", |r| r.quantity("budget", "p_sub"));
            if r.has("geometry") {
                let line = r.sections["geometry"].line;
                r.error(line, None, "participations are given in `[budget]`, so `[geometry]` would be ignored".into());
            }
            match (p_sm, p_sa, p_ma, p_sub) {
                (Some(sm), Some(sa), Some(ma), Some(sub)) => Some(GivenParticipation {
                    p_over_t: PerInterface { sm, sa, ma },
                    p_substrate: sub,
                }),
                _ => {
                    ok = false;
                    None
                }
            }
        } else {
            None
        }
    } else {
        None
    };

    let purcell_keys = ["purcell_g", "resonator_frequency", "resonator_q_c"];
    let purcell = if purcell_keys.iter().any(|k| r.present("budget", k)) {
        let why = "all Purcell parameters or none";
        let g = r.required("budget", "purcell_g", why, |r| r.quantity("budget", "purcell_g"));
        let f = r.required("budget", "resonator_frequency", why, |r| r.quantity("budget", "resonator_frequency"));
        let q = r.required("budget", "resonator_q_c", why, |r| r.quantity("budget", "resonator_q_c"));
        match (g, f, q) {
            (Some(g), Some(f_resonator), Some(q_c)) => Some(PurcellConfig { g, f_resonator, q_c }),
            _ => {
                ok = false;
                None
            }
        }
    } else {
        None
    };

    let q_measured = r.quantity("budget", "q_measured");
    let t1_measured = r.quantity("budget", "t1_measured");
    if q_measured.is_some() && t1_measured.is_some() {
        let line = r.sections["budget"].entries["t1_measured"].line;
        r.error(line, Some("t1_measured"), "give either q_measured or t1_measured".into());
        ok = false;
    }
    let q_measured = match (q_measured, t1_measured, frequency) {
        (Some(q), _, _) => Some(q),
        (None, Some(t1), Some(f)) => Some(2.0 * std::f64::consts::PI * f * t1),
        _ => None,
    };

    if !ok {
        return None;
    }
    Some(BudgetConfig {
        thickness,
        tan_delta,
        tan_delta_substrate: tan_delta_substrate?,
        other_loss: other_loss?,
        frequency: frequency?,
        given,
        purcell,
        q_measured,
    })
}

fn read_compare(r: &mut Reader) -> Vec<NamedDesign> {
    let Some((line, value)) = r.required("compare", "designs", "comma-separated presets", |r| r.word("compare", "designs")) else {
        return Vec::new();
    };
    let mut out: Vec<NamedDesign> = Vec::new();
    for item in value.split(',').map(str::trim) {
        match item.parse::<ModId>() {
            Ok(id) if out.iter().any(|d| d.name == id.name()) => {
                r.error(line, Some("designs"), format!("`{}` listed twice", id.name()));
            }
            Ok(id) => out.push(NamedDesign {
                name: id.name().to_string(),
                params: id.preset().params,
            }),
            Err(e) => r.error(line, Some("designs"), e.to_string()),
        }
    }
    if out.len() < 2 {
        r.error(line, Some("designs"), "a comparison needs at least two designs".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("300nm", Kind::Length).unwrap(), 300e-9);
        assert_eq!(parse_quantity("1.5 um", Kind::Length).unwrap(), 1.5e-6);
        assert_eq!(parse_quantity("4.8GHz", Kind::Frequency).unwrap(), 4.8e9);
        assert_eq!(parse_quantity("1e-9m", Kind::Length).unwrap(), 1e-9);
        assert_eq!(parse_quantity("1.24e6/m", Kind::PerLength).unwrap(), 1.24e6);
        assert_eq!(parse_quantity("50us", Kind::Time).unwrap(), 50e-6);
        assert!(parse_quantity("300", Kind::Length).unwrap_err().contains("missing unit"));
        assert!(parse_quantity("300 parsecs", Kind::Length).unwrap_err().contains("unknown unit"));
        assert!(parse_quantity("5 nm", Kind::Number).is_err());
        assert!(parse_quantity("inf nm", Kind::Length).is_err());
    }

    #[test]
    fn errors_are_collected_with_lines() {
        let text = "command = simulate\n[geometry]\ndesign = mod_c\ntrench = 300\ncolour = red\n[mesh]\nh_max = 5\n";
        let errs = parse_config(text).unwrap_err();
        let lines: Vec<_> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![Some(4), Some(5), Some(7)]);
    }

    #[test]
    fn command_mismatch() {
        let text = "command = sweep\n[geometry]\ndesign = mod_c\ntrench = 300nm\n";
        let errs = parse_config_with(text, Some(Command::Simulate)).unwrap_err();
        assert_eq!(errs[0].key.as_deref(), Some("command"));
        assert!(parse_config_with("[geometry]\ndesign = mod_c\ntrench = 300nm\n", Some(Command::Simulate)).is_ok());
    }

    #[test]
    fn custom_design_needs_its_shape() {
        let text = "command = simulate\n[geometry]\ndesign = custom\nstyle = pad_pair\nwidth = 10um\ngap = 5um\ntrench = 0nm\n";
        let errs = parse_config(text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].key.as_deref(), Some("pad_height"));
        let ok = parse_config(&format!("{text}pad_height = 100um\n")).unwrap();
        assert_eq!(ok.design.unwrap().params.pad_height, Some(100e-6));
    }

    #[test]
    fn unused_keys_are_rejected() {
        let text = "command = simulate\n[geometry]\ndesign = mod_c\ntrench = 300nm\n[sweep]\ndepths = 300nm, 400nm\n";
        let errs = parse_config(text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("not used by `simulate`"));
    }
}
