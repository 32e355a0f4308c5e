//! Executes a parsed config and collects its artifacts in memory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::json;
use sha2::{Digest, Sha256};
use surfloss::analysis::{
    compare_designs, log_extrapolate, loss_budget, purcell_limit, simulate, t1_from_q, tan_delta_bound, trench_sweep,
    CompareSetup, LossBudget, LossChannel, PurcellParams, Simulation,
};
use surfloss::field::{capacitance, charging_energy};
use surfloss::geometry::Interface;
use surfloss::report::{
    budget_csv, comparison_csv, comparison_plot, fit_csv, fmt_f64, participation_row, sweep_csv, sweep_plot,
    PARTICIPATION_HEADER,
};
use surfloss::units::to_nm;

use crate::config::{BudgetConfig, Command, GivenParticipation, NamedDesign, ParseError, RunConfig};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config ({} problem(s))", .0.len())]
    Config(Vec<ParseError>),

    #[error(transparent)]
    Run(#[from] surfloss::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Config(_) => 2,
            CliError::Run(_) | CliError::Write { .. } => 1,
        }
    }

    /// Machine-readable report for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config(errors) => json!({
                "error": "invalid-config",
                "message": self.to_string(),
                "problems": errors.iter().map(|e| json!({
                    "line": e.line,
                    "key": e.key,
                    "message": e.message,
                })).collect::<Vec<_>>(),
            }),
            CliError::Run(e) => json!({ "error": e.kind(), "message": e.to_string() }),
            CliError::ReadConfig { .. } => json!({ "error": "unreadable-config", "message": self.to_string() }),
            CliError::Write { .. } => json!({ "error": "write-failure", "message": self.to_string() }),
        }
    }
}

/// Named file contents, in the order they were produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// `sha256  name` per artifact, sorted by name.
    pub fn manifest(&self) -> String {
        let mut names: Vec<_> = self.files.iter().collect();
        names.sort_by(|a, b| a.0.cmp(&b.0));
        names
            .into_iter()
            .map(|(name, content)| format!("{}  {name}\n", hex::encode(Sha256::digest(content.as_bytes()))))
            .collect()
    }

    /// Writes every artifact and the manifest; nothing is written before this.
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Write { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, content) in self.files.iter().chain([&(MANIFEST.to_string(), self.manifest())]) {
            let path = dir.join(name);
            fs::write(&path, content).map_err(io(&path))?;
        }
        Ok(())
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut out = Artifacts::default();
    match cfg.command {
        Command::Simulate => run_simulate(cfg, &mut out)?,
        Command::Sweep => run_sweep(cfg, &mut out)?,
        Command::Budget => run_budget(cfg, &mut out)?,
        Command::Compare => run_compare(cfg, &mut out)?,
    }
    Ok(out)
}

fn design(cfg: &RunConfig) -> &NamedDesign {
    cfg.design.as_ref().expect("validated config has a design")
}

fn log_warnings(design: &str, depth: f64, warnings: &[String]) {
    for w in warnings {
        warn!("{design} at {} nm: {w}", to_nm(depth));
    }
}

fn summary(rows: &[(&str, f64, &str)]) -> String {
    let mut s = String::from("quantity,value,unit\n");
    for (q, v, u) in rows {
        let _ = writeln!(s, "{q},{},{u}", fmt_f64(*v));
    }
    s
}

fn run_simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let d = design(cfg);
    let depth = cfg.trench.expect("validated config has a trench depth");
    info!("simulating {} at {} nm", d.name, to_nm(depth));
    let sim = simulate(&d.params, depth, &cfg.setup)?;
    log_warnings(&d.name, depth, &sim.report.warnings);
    out.add("participation.csv", format!("{PARTICIPATION_HEADER}{}", participation_row(&d.name, depth, &sim.report)));

    let c = capacitance(&sim.solution)?;
    let mut rows = vec![("capacitance_per_length", c, "F/m")];
    if let Some(h) = d.params.pad_height {
        rows.push(("capacitance", c * h, "F"));
        rows.push(("charging_energy", charging_energy(c * h)?, "Hz"));
    }
    rows.push(("total_energy", sim.solution.total_energy, "J/m"));
    rows.push(("triangles", sim.mesh().triangles.len() as f64, ""));
    out.add("simulation.csv", summary(&rows));
    dumps(cfg, &sim, out);
    Ok(())
}

fn dumps(cfg: &RunConfig, sim: &Simulation, out: &mut Artifacts) {
    if cfg.output.mesh_dump {
        out.add("mesh.txt", sim.mesh().to_text());
    }
    if cfg.output.field_dump {
        out.add("field.txt", sim.solution.field_dump());
    }
}

fn run_sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let d = design(cfg);
    let s = cfg.sweep.as_ref().expect("validated config has a sweep");
    let sweep = trench_sweep(&d.name, &d.params, &s.depths, s.min_fit_depth, &cfg.setup)?;
    for run in &sweep.runs {
        log_warnings(&d.name, run.trench_depth, &run.report.warnings);
    }
    out.add("sweep.csv", sweep_csv(&sweep));
    let fits = s.target_depth.map(|t| log_extrapolate(&sweep, t)).transpose()?;
    out.add("sweep_plot.txt", sweep_plot(&sweep, fits.as_ref()));
    if let Some(f) = &fits {
        out.add("fit.csv", fit_csv(&d.name, f));
    }
    if let Some(last) = sweep.runs.last() {
        dumps(cfg, last, out);
    }
    Ok(())
}

fn channels(b: &BudgetConfig, p: &GivenParticipation) -> Vec<LossChannel> {
    let mut all: Vec<LossChannel> = Interface::ALL
        .iter()
        .map(|&i| LossChannel::surface(i.name(), *p.p_over_t.get(i), *b.thickness.get(i), *b.tan_delta.get(i)))
        .collect();
    all.push(LossChannel::bulk("substrate", p.p_substrate, b.tan_delta_substrate));
    all
}

fn run_budget(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let b = cfg.budget.as_ref().expect("validated config has a budget");
    let given = match b.given {
        Some(g) => g,
        None => {
            let d = design(cfg);
            let s = cfg.sweep.as_ref().expect("validated config has a sweep");
            let target = s.target_depth.expect("validated budget sweep has a target");
            let sweep = trench_sweep(&d.name, &d.params, &s.depths, s.min_fit_depth, &cfg.setup)?;
            let fits = log_extrapolate(&sweep, target)?;
            let direct = simulate(&d.params, target, &cfg.setup)?;
            out.add("sweep.csv", sweep_csv(&sweep));
            out.add("fit.csv", fit_csv(&d.name, &fits));
            GivenParticipation {
                p_over_t: fits.map(|_, f| f.extrapolated_value),
                p_substrate: direct.report.p_substrate,
            }
        }
    };
    let budget: LossBudget = loss_budget(channels(b, &given), b.other_loss, b.frequency)?;
    out.add("budget.csv", budget_csv(&budget));

    let mut rows = vec![
        ("q_total", budget.q, ""),
        ("t1", budget.t1.unwrap_or(f64::INFINITY), "s"),
    ];
    if let Some(p) = b.purcell {
        let t1 = purcell_limit(&PurcellParams {
            g: p.g,
            f_qubit: b.frequency,
            f_res: p.f_resonator,
            q_c: p.q_c,
        })?;
        rows.push(("purcell_t1", t1, "s"));
    }
    if let Some(q) = b.q_measured {
        rows.push(("q_measured", q, ""));
        rows.push(("t1_measured", t1_from_q(q, b.frequency)?, "s"));
        rows.push(("tan_delta_substrate_bound", tan_delta_bound(q, given.p_substrate)?, ""));
    }
    out.add("budget_summary.csv", summary(&rows));
    Ok(())
}

fn run_compare(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let b = cfg.budget.as_ref().expect("validated config has a budget");
    let mut setup = CompareSetup {
        simulation: cfg.setup.clone(),
        other_loss: b.other_loss,
        frequency: b.frequency,
        ..CompareSetup::default()
    };
    if let Some(s) = &cfg.sweep {
        if !s.depths.is_empty() {
            setup.depths = s.depths.clone();
        }
        if let Some(t) = s.target_depth {
            setup.target_depth = t;
        }
        setup.min_fit_depth = s.min_fit_depth;
    }
    let designs: Vec<_> = cfg.compare.iter().map(|d| (d.name.clone(), d.params.clone())).collect();
    let rows = compare_designs(&designs, &setup)?;
    out.add("comparison.csv", comparison_csv(&rows));
    out.add("comparison_plot.txt", comparison_plot(&rows));
    let mut fits = String::new();
    for (k, r) in rows.iter().enumerate() {
        let csv = fit_csv(&r.design, &r.fits);
        let body = if k == 0 { csv.as_str() } else { csv.split_once('\n').map_or("", |x| x.1) };
        fits.push_str(body);
    }
    out.add("comparison_fits.csv", fits);
    Ok(())
}
