use super::SweepResult;
use crate::error::{Error, Result};
use crate::geometry::{Interface, PerInterface};
use crate::units::to_nm;

/// Least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r_squared: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("abscissa and ordinate lengths differ"));
    }
    if xs.len() < 2 {
        return Err(Error::FitFailure("a line needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite data".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * mx * mx * n {
        return Err(Error::FitFailure("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_res == 0.0 || ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        intercept,
        slope,
        r_squared,
    })
}

/// Fit of `p = a + b ln(depth / 1 nm)` and its value at one depth.
#[derive(Clone, Debug, PartialEq)]
pub struct LogFit {
    pub interface: Interface,
    /// Value at 1 nm, m⁻¹.
    pub a: f64,
    /// Change per e-fold of depth, m⁻¹.
    pub b: f64,
    pub r_squared: f64,
    /// Metres.
    pub extrapolated_depth: f64,
    /// Fitted value at `extrapolated_depth`, clamped at zero.
    pub extrapolated_value: f64,
    /// Set when the fitted value was negative.
    pub clamped: bool,
}

impl LogFit {
    /// Fitted curve at `depth` metres, unclamped.
    pub fn value_at(&self, depth: f64) -> f64 {
        self.a + self.b * to_nm(depth).ln()
    }
}

/// Fits values against the logarithm of depth (metres) and evaluates the
/// fit at `target_depth`.
pub fn fit_log(interface: Interface, depths: &[f64], values: &[f64], target_depth: f64) -> Result<LogFit> {
    if !(target_depth > 0.0 && target_depth.is_finite()) {
        return Err(Error::invalid(format!("target depth must be positive, got {target_depth}")));
    }
    if let Some(d) = depths.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::FitFailure(format!("depth {d} has no logarithm")));
    }
    let xs: Vec<f64> = depths.iter().map(|&d| to_nm(d).ln()).collect();
    let line = fit_linear(&xs, values)?;
    let value = line.eval(to_nm(target_depth).ln());
    let clamped = value < 0.0;
    if clamped {
        log::warn!(
            "{interface} extrapolation to {} nm is negative ({value:.3e}); clamped to zero",
            to_nm(target_depth)
        );
    }
    Ok(LogFit {
        interface,
        a: line.intercept,
        b: line.slope,
        r_squared: line.r_squared,
        extrapolated_depth: target_depth,
        extrapolated_value: value.max(0.0),
        clamped,
    })
}

/// Minimum number of sweep points accepted for extrapolation.
pub const MIN_FIT_POINTS: usize = 4;

/// Logarithmic fit of every interface participation of a sweep.
pub fn log_extrapolate(sweep: &SweepResult, target_depth: f64) -> Result<PerInterface<LogFit>> {
    if sweep.depths.len() < MIN_FIT_POINTS {
        return Err(Error::invalid(format!(
            "extrapolation needs at least {MIN_FIT_POINTS} depths, the sweep has {}",
            sweep.depths.len()
        )));
    }
    PerInterface::splat(()).try_map(|i, _| {
        let values: Vec<f64> = sweep.reports().map(|r| *r.p_over_t.get(i)).collect();
        fit_log(i, &sweep.depths, &values, target_depth)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::nm;

    #[test]
    fn exact_log_data_is_recovered() {
        let depths: Vec<f64> = [300.0, 400.0, 600.0, 1000.0].iter().map(|&d| nm(d)).collect();
        let values: Vec<f64> = depths.iter().map(|&d| 5e5 - 3e4 * to_nm(d).ln()).collect();
        let fit = fit_log(Interface::Sm, &depths, &values, nm(50.0)).unwrap();
        assert!((fit.a - 5e5).abs() < 1e-9 * 5e5);
        assert!((fit.b + 3e4).abs() < 1e-9 * 3e4);
        assert_eq!(fit.r_squared, 1.0);
        assert!((fit.extrapolated_value - (5e5 - 3e4 * 50f64.ln())).abs() < 1e-6);
    }

    #[test]
    fn coincident_depths_fail() {
        let depths = vec![nm(300.0); 4];
        let err = fit_log(Interface::Sa, &depths, &[1.0, 2.0, 3.0, 4.0], nm(50.0)).unwrap_err();
        assert_eq!(err.kind(), "fit-failure");
    }

    #[test]
    fn negative_extrapolation_is_clamped() {
        let depths: Vec<f64> = [300.0, 400.0, 600.0, 1000.0].iter().map(|&d| nm(d)).collect();
        let values: Vec<f64> = depths.iter().map(|&d| -1.0 + to_nm(d).ln()).collect();
        let fit = fit_log(Interface::Ma, &depths, &values, nm(0.1)).unwrap();
        assert!(fit.clamped);
        assert_eq!(fit.extrapolated_value, 0.0);
        assert!(fit.value_at(nm(0.1)) < 0.0);
    }
}
