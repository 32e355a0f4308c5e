use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{capacitance, solve, FieldSolution, MaterialStack};
use crate::geometry::{build_layout, DesignParams, LayoutSpec};
use crate::mesh::{generate_mesh, refine, refine_uniform, Mesh, MeshControls};
use crate::participation::{participation_report, ParticipationOptions, ParticipationReport};
use crate::units::to_nm;

/// Shallowest trench the sweeps accept by default, metres.
pub const DEFAULT_MIN_FIT_DEPTH: f64 = 300e-9;

/// Everything except the geometry that determines a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationSetup {
    pub materials: MaterialStack,
    pub controls: MeshControls,
    pub options: ParticipationOptions,
    /// Fraction of elements bisected on each adaptive pass.
    pub marker_fraction: f64,
    /// Uniform refinements applied to the generated mesh before solving.
    pub uniform_refinements: usize,
    /// Potential difference between the driven electrodes, volts.
    pub drive_voltage: f64,
}

impl Default for SimulationSetup {
    fn default() -> Self {
        SimulationSetup {
            materials: MaterialStack::default(),
            controls: MeshControls::default(),
            options: ParticipationOptions::default(),
            marker_fraction: 0.2,
            uniform_refinements: 0,
            drive_voltage: 1.0,
        }
    }
}

/// Result of one adaptive simulation of one layout.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub trench_depth: f64,
    pub report: ParticipationReport,
    /// Capacitance per unit length between the driven electrodes, F/m.
    pub capacitance: f64,
    /// Stored energy after each solve, J/m.
    pub energy_history: Vec<f64>,
    pub solution: FieldSolution,
}

impl Simulation {
    pub fn mesh(&self) -> &Mesh {
        &self.solution.mesh
    }
}

/// Antisymmetric drive: `plus`/`top` at `+v/2`, `minus`/`bottom` at `-v/2`,
/// `ground` at zero.
pub fn standard_drive(electrodes: &[String], v: f64) -> Result<BTreeMap<String, f64>> {
    electrodes
        .iter()
        .map(|name| {
            let u = match name.as_str() {
                "plus" | "top" => 0.5 * v,
                "minus" | "bottom" => -0.5 * v,
                "ground" => 0.0,
                other => return Err(Error::invalid(format!("no standard voltage for electrode `{other}`"))),
            };
            Ok((name.clone(), u))
        })
        .collect()
}

/// Meshes, solves and adaptively refines `layout`.
pub fn simulate_layout(layout: &LayoutSpec, setup: &SimulationSetup) -> Result<Simulation> {
    if !(setup.drive_voltage.is_finite() && setup.drive_voltage != 0.0) {
        return Err(Error::invalid("drive voltage must be finite and non-zero"));
    }
    let voltages = standard_drive(&layout.electrodes(), setup.drive_voltage)?;
    let mut mesh = generate_mesh(layout, &setup.controls)?;
    for _ in 0..setup.uniform_refinements {
        mesh = refine_uniform(&mesh);
    }
    let mut mesh = Arc::new(mesh);
    let mut sol = solve(mesh.clone(), &setup.materials, &voltages)?;
    let mut report = participation_report(&sol, &setup.materials, &setup.options)?;
    let mut energy_history = vec![sol.total_energy];
    for pass in 0..setup.controls.max_refine_passes {
        let finer = Arc::new(refine(&mesh, &sol, setup.marker_fraction)?);
        let next = solve(finer.clone(), &setup.materials, &voltages)?;
        let mut next_report = participation_report(&next, &setup.materials, &setup.options)?;
        next_report.mesh_convergence = Some(next_report.convergence_from(&report));
        log::debug!(
            "refinement pass {}: {} -> {} triangles, energy {:.6e} J/m",
            pass + 1,
            mesh.triangles.len(),
            finer.triangles.len(),
            next.total_energy
        );
        energy_history.push(next.total_energy);
        mesh = finer;
        sol = next;
        report = next_report;
    }
    Ok(Simulation {
        trench_depth: layout.trench_depth,
        capacitance: capacitance(&sol)?,
        report,
        energy_history,
        solution: sol,
    })
}

/// Builds and simulates a design at one trench depth.
pub fn simulate(params: &DesignParams, trench_depth: f64, setup: &SimulationSetup) -> Result<Simulation> {
    let layout = build_layout(params, trench_depth)?;
    simulate_layout(&layout, setup).map_err(|e| Error::AtDepth {
        depth_nm: to_nm(trench_depth),
        source: Box::new(e),
    })
}

/// One simulation per trench depth.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub design: String,
    /// Strictly increasing, metres.
    pub depths: Vec<f64>,
    pub runs: Vec<Simulation>,
}

impl SweepResult {
    pub fn reports(&self) -> impl Iterator<Item = &ParticipationReport> {
        self.runs.iter().map(|r| &r.report)
    }
}

/// Simulates `params` at every depth, concurrently. Depths are sorted and
/// must be distinct and no shallower than `min_fit_depth`.
pub fn trench_sweep(
    design: &str,
    params: &DesignParams,
    depths: &[f64],
    min_fit_depth: f64,
    setup: &SimulationSetup,
) -> Result<SweepResult> {
    if depths.is_empty() {
        return Err(Error::invalid("a sweep needs at least one depth"));
    }
    let mut sorted = depths.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("sweep depths must be distinct"));
    }
    if let Some(&d) = sorted.iter().find(|&&d| !(d >= min_fit_depth)) {
        return Err(Error::invalid(format!(
            "sweep depth {} nm is below the minimum of {} nm",
            to_nm(d),
            to_nm(min_fit_depth)
        )));
    }
    let runs = sorted
        .par_iter()
        .map(|&d| simulate(params, d, setup))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        design: design.to_string(),
        depths: sorted,
        runs,
    })
}
