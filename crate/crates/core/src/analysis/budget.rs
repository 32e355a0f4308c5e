use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One loss channel. Surface channels carry a participation per unit
/// thickness and a layer thickness; bulk channels a plain participation.
#[derive(Clone, Debug, PartialEq)]
pub struct LossChannel {
    pub name: String,
    /// m⁻¹ for surface channels, dimensionless for bulk ones.
    pub participation: f64,
    /// Layer thickness in metres, surface channels only.
    pub thickness: Option<f64>,
    pub tan_delta: f64,
}

impl LossChannel {
    pub fn surface(name: impl Into<String>, p_over_t: f64, thickness: f64, tan_delta: f64) -> Self {
        LossChannel {
            name: name.into(),
            participation: p_over_t,
            thickness: Some(thickness),
            tan_delta,
        }
    }

    pub fn bulk(name: impl Into<String>, participation: f64, tan_delta: f64) -> Self {
        LossChannel {
            name: name.into(),
            participation,
            thickness: None,
            tan_delta,
        }
    }

    /// Contribution to `1/Q`.
    pub fn loss(&self) -> f64 {
        self.participation * self.thickness.unwrap_or(1.0) * self.tan_delta
    }

    fn validate(&self) -> Result<()> {
        let values = [self.participation, self.thickness.unwrap_or(0.0), self.tan_delta];
        if values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!("channel `{}` has a negative or non-finite input", self.name)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBudget {
    pub channels: Vec<LossChannel>,
    /// Lumped `1/Q` of everything not modelled.
    pub other_loss: f64,
    /// Hz.
    pub frequency: f64,
    pub inverse_q: f64,
    /// Infinite when nothing is lossy.
    pub q: f64,
    /// Seconds; `None` when Q is infinite.
    pub t1: Option<f64>,
}

impl LossBudget {
    pub fn infinite_q(&self) -> bool {
        self.inverse_q == 0.0
    }

    /// Quality factor the channel would give alone.
    pub fn channel_q(&self, index: usize) -> f64 {
        1.0 / self.channels[index].loss()
    }
}

/// Composes channel losses into Q and T1 at `frequency` (Hz).
pub fn loss_budget(channels: Vec<LossChannel>, other_loss: f64, frequency: f64) -> Result<LossBudget> {
    for c in &channels {
        c.validate()?;
    }
    if !(other_loss.is_finite() && other_loss >= 0.0) {
        return Err(Error::invalid(format!("other loss must be non-negative, got {other_loss}")));
    }
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::invalid(format!("frequency must be positive, got {frequency}")));
    }
    let inverse_q = channels.iter().map(LossChannel::loss).sum::<f64>() + other_loss;
    let (q, t1) = if inverse_q == 0.0 {
        log::warn!("no loss in the budget: Q is infinite and T1 undefined");
        (f64::INFINITY, None)
    } else {
        let q = 1.0 / inverse_q;
        (q, Some(q / (2.0 * PI * frequency)))
    };
    Ok(LossBudget {
        channels,
        other_loss,
        frequency,
        inverse_q,
        q,
        t1,
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `Q = 2 pi f T1` with T1 in seconds and f in Hz.
pub fn q_from_t1(t1: f64, frequency: f64) -> Result<f64> {
    positive("T1", t1)?;
    positive("frequency", frequency)?;
    Ok(2.0 * PI * frequency * t1)
}

/// T1 in seconds for a quality factor at frequency f (Hz).
pub fn t1_from_q(q: f64, frequency: f64) -> Result<f64> {
    positive("Q", q)?;
    positive("frequency", frequency)?;
    Ok(q / (2.0 * PI * frequency))
}

/// Largest substrate loss tangent compatible with a measured Q.
pub fn tan_delta_bound(q_measured: f64, p_substrate: f64) -> Result<f64> {
    positive("measured Q", q_measured)?;
    if !(p_substrate > 0.0 && p_substrate <= 1.0) {
        return Err(Error::invalid(format!("substrate participation must lie in (0, 1], got {p_substrate}")));
    }
    Ok(1.0 / (p_substrate * q_measured))
}

/// Qubit and readout-resonator parameters. Frequencies in Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurcellParams {
    pub g: f64,
    pub f_qubit: f64,
    pub f_res: f64,
    pub q_c: f64,
}

/// T1 limit (seconds) from decay through the readout resonator in the
/// dispersive limit: `1/T1 = (g/Δ)^2 κ` with `κ = 2π f_res / Q_c`.
pub fn purcell_limit(p: &PurcellParams) -> Result<f64> {
    if !(p.g >= 0.0 && p.g.is_finite()) {
        return Err(Error::invalid(format!("coupling must be non-negative, got {}", p.g)));
    }
    positive("qubit frequency", p.f_qubit)?;
    positive("resonator frequency", p.f_res)?;
    positive("coupling quality factor", p.q_c)?;
    let detuning = p.f_res - p.f_qubit;
    if detuning == 0.0 {
        return Err(Error::DivergentRate("qubit and resonator are degenerate".into()));
    }
    let kappa = 2.0 * PI * p.f_res / p.q_c;
    let rate = (p.g / detuning).powi(2) * kappa;
    Ok(1.0 / rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_surface_channel() {
        let b = loss_budget(vec![LossChannel::surface("SA", 1.24e6, 3e-9, 2e-3)], 0.0, 4.8e9).unwrap();
        assert!((b.inverse_q - 7.44e-6).abs() < 1e-12);
        assert!((b.q - 1.344e5).abs() < 100.0);
    }

    #[test]
    fn lossless_budget_has_infinite_q() {
        let b = loss_budget(vec![LossChannel::bulk("substrate", 0.92, 0.0)], 0.0, 4.8e9).unwrap();
        assert!(b.infinite_q());
        assert!(b.t1.is_none());
    }

    #[test]
    fn negative_inputs_are_rejected() {
        assert!(loss_budget(vec![LossChannel::bulk("x", -0.1, 1e-6)], 0.0, 1e9).is_err());
        assert!(loss_budget(vec![], -1e-7, 1e9).is_err());
        assert!(q_from_t1(0.0, 1e9).is_err());
    }

    #[test]
    fn degenerate_resonator_diverges() {
        let p = PurcellParams {
            g: 50e6,
            f_qubit: 5e9,
            f_res: 5e9,
            q_c: 1e4,
        };
        assert_eq!(purcell_limit(&p).unwrap_err().kind(), "divergent-rate");
    }
}
