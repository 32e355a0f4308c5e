use rayon::prelude::*;

use super::budget::{loss_budget, LossChannel};
use super::fit::{log_extrapolate, LogFit};
use super::simulate::{simulate, trench_sweep, SimulationSetup};
use crate::error::{Error, Result};
use crate::geometry::{DesignParams, Interface, PerInterface};
use crate::units::nm;

/// Sweep and budget settings shared by every design of a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareSetup {
    pub simulation: SimulationSetup,
    /// Depths of the fitting sweep, metres.
    pub depths: Vec<f64>,
    pub min_fit_depth: f64,
    /// Depth at which the designs are compared, metres.
    pub target_depth: f64,
    pub other_loss: f64,
    /// Qubit frequency, Hz.
    pub frequency: f64,
}

impl Default for CompareSetup {
    fn default() -> Self {
        CompareSetup {
            simulation: SimulationSetup::default(),
            depths: [300.0, 400.0, 600.0, 1000.0].map(nm).to_vec(),
            min_fit_depth: super::DEFAULT_MIN_FIT_DEPTH,
            target_depth: nm(50.0),
            other_loss: 0.0,
            frequency: 4.8e9,
        }
    }
}

/// One row of a design comparison.
#[derive(Clone, Debug)]
pub struct DesignComparison {
    pub design: String,
    pub fits: PerInterface<LogFit>,
    /// Substrate participation from a direct solve at the target depth.
    pub p_substrate: f64,
    /// Predicted Q with every channel lossy.
    pub q_total: f64,
    /// Predicted Q if the named interface were the only lossy surface.
    pub q_single_interface: PerInterface<f64>,
}

impl DesignComparison {
    /// Extrapolated per-unit-thickness participation, m⁻¹.
    pub fn p_over_t(&self, i: Interface) -> f64 {
        self.fits.get(i).extrapolated_value
    }

    /// Inverse SA participation, m.
    pub fn inverse_p_sa(&self) -> f64 {
        1.0 / self.p_over_t(Interface::Sa)
    }
}

/// Extrapolates every design to the target depth and predicts its Q.
pub fn compare_designs(designs: &[(String, DesignParams)], setup: &CompareSetup) -> Result<Vec<DesignComparison>> {
    if designs.len() < 2 {
        return Err(Error::invalid("a comparison needs at least two designs"));
    }
    designs
        .par_iter()
        .map(|(name, params)| compare_one(name, params, setup).map_err(|e| Error::InDesign {
            design: name.clone(),
            source: Box::new(e),
        }))
        .collect()
}

fn compare_one(name: &str, params: &DesignParams, setup: &CompareSetup) -> Result<DesignComparison> {
    let sweep = trench_sweep(name, params, &setup.depths, setup.min_fit_depth, &setup.simulation)?;
    let fits = log_extrapolate(&sweep, setup.target_depth)?;
    let direct = simulate(params, setup.target_depth, &setup.simulation)?;
    let p_substrate = direct.report.p_substrate;
    let m = &setup.simulation.materials;

    let surface = |i: Interface| {
        LossChannel::surface(
            i.name(),
            fits.get(i).extrapolated_value,
            *m.layer_thickness.get(i),
            *m.loss_tangent.get(i),
        )
    };
    let substrate = LossChannel::bulk("substrate", p_substrate, m.loss_tangent_substrate);
    let mut all: Vec<LossChannel> = Interface::ALL.iter().map(|&i| surface(i)).collect();
    all.push(substrate.clone());
    let q_total = loss_budget(all, setup.other_loss, setup.frequency)?.q;
    let q_single_interface = PerInterface::splat(()).try_map(|i, _| {
        Ok(loss_budget(vec![surface(i), substrate.clone()], setup.other_loss, setup.frequency)?.q)
    })?;
    Ok(DesignComparison {
        design: name.to_string(),
        fits,
        p_substrate,
        q_total,
        q_single_interface,
    })
}
