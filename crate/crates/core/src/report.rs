//! Fixed-format text tables.
//!
//! Floats are written in scientific notation with nine significant digits
//! so that identical runs produce identical bytes.

use std::fmt::Write as _;

use crate::analysis::{DesignComparison, LogFit, LossBudget, SweepResult};
use crate::geometry::{Interface, PerInterface};
use crate::participation::ParticipationReport;
use crate::units::to_nm;

/// Nine significant digits; infinities and NaN spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.8e}")
    }
}

fn row(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

pub const PARTICIPATION_HEADER: &str =
    "design,trench_nm,p_sm,p_sa,p_ma,p_sub,p_vac,cutoff_nm,conv_sm,conv_sa,conv_ma,conv_sub\n";

/// One participation CSV row (no header).
pub fn participation_row(design: &str, trench_depth: f64, r: &ParticipationReport) -> String {
    let conv = r.mesh_convergence;
    let c = |f: &dyn Fn(&crate::participation::Convergence) -> f64| conv.as_ref().map(f).map(fmt_f64).unwrap_or_else(|| "nan".into());
    row(&[
        design.to_string(),
        fmt_f64(to_nm(trench_depth)),
        fmt_f64(r.p_over_t.sm),
        fmt_f64(r.p_over_t.sa),
        fmt_f64(r.p_over_t.ma),
        fmt_f64(r.p_substrate),
        fmt_f64(r.p_vacuum),
        fmt_f64(to_nm(r.cutoff)),
        c(&|v| v.p_over_t.sm),
        c(&|v| v.p_over_t.sa),
        c(&|v| v.p_over_t.ma),
        c(&|v| v.p_substrate),
    ])
}

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = PARTICIPATION_HEADER.to_string();
    for run in &sweep.runs {
        s.push_str(&participation_row(&sweep.design, run.trench_depth, &run.report));
    }
    s
}

pub fn fit_csv(design: &str, fits: &PerInterface<LogFit>) -> String {
    let mut s = String::from("design,interface,a_per_m,b_per_m,r_squared,target_nm,extrapolated_per_m,clamped\n");
    for i in Interface::ALL {
        let f = fits.get(i);
        s.push_str(&row(&[
            design.to_string(),
            i.name().to_string(),
            fmt_f64(f.a),
            fmt_f64(f.b),
            fmt_f64(f.r_squared),
            fmt_f64(to_nm(f.extrapolated_depth)),
            fmt_f64(f.extrapolated_value),
            f.clamped.to_string(),
        ]));
    }
    s
}

/// Columnar plot data: depth against each interface participation.
pub fn sweep_plot(sweep: &SweepResult, fits: Option<&PerInterface<LogFit>>) -> String {
    let mut s = String::from("# trench_nm p_sm p_sa p_ma");
    if fits.is_some() {
        s.push_str(" fit_sm fit_sa fit_ma");
    }
    s.push('\n');
    for (d, r) in sweep.depths.iter().zip(sweep.reports()) {
        let mut cols = vec![fmt_f64(to_nm(*d)), fmt_f64(r.p_over_t.sm), fmt_f64(r.p_over_t.sa), fmt_f64(r.p_over_t.ma)];
        if let Some(f) = fits {
            cols.extend(Interface::ALL.map(|i| fmt_f64(f.get(i).value_at(*d))));
        }
        let _ = writeln!(s, "{}", cols.join(" "));
    }
    s
}

pub fn budget_csv(b: &LossBudget) -> String {
    let mut s = String::from("channel,participation,thickness_nm,tan_delta,inverse_q,channel_q\n");
    for (k, c) in b.channels.iter().enumerate() {
        s.push_str(&row(&[
            c.name.clone(),
            fmt_f64(c.participation),
            c.thickness.map(|t| fmt_f64(to_nm(t))).unwrap_or_default(),
            fmt_f64(c.tan_delta),
            fmt_f64(c.loss()),
            fmt_f64(b.channel_q(k)),
        ]));
    }
    s.push_str(&row(&[
        "other".into(),
        String::new(),
        String::new(),
        String::new(),
        fmt_f64(b.other_loss),
        fmt_f64(1.0 / b.other_loss),
    ]));
    s.push_str(&row(&[
        "total".into(),
        String::new(),
        String::new(),
        String::new(),
        fmt_f64(b.inverse_q),
        fmt_f64(b.q),
    ]));
    s
}

pub fn comparison_csv(rows: &[DesignComparison]) -> String {
    let mut s = String::from(
        "design,p_sm,p_sa,p_ma,p_sub,inverse_p_sa_m,q_total,q_only_sm,q_only_sa,q_only_ma\n",
    );
    for r in rows {
        s.push_str(&row(&[
            r.design.clone(),
            fmt_f64(r.p_over_t(Interface::Sm)),
            fmt_f64(r.p_over_t(Interface::Sa)),
            fmt_f64(r.p_over_t(Interface::Ma)),
            fmt_f64(r.p_substrate),
            fmt_f64(r.inverse_p_sa()),
            fmt_f64(r.q_total),
            fmt_f64(r.q_single_interface.sm),
            fmt_f64(r.q_single_interface.sa),
            fmt_f64(r.q_single_interface.ma),
        ]));
    }
    s
}

/// Columnar plot data: inverse SA participation against predicted Q.
pub fn comparison_plot(rows: &[DesignComparison]) -> String {
    let mut s = String::from("# design inverse_p_sa_m q_total q_only_sa\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            r.design,
            fmt_f64(r.inverse_p_sa()),
            fmt_f64(r.q_total),
            fmt_f64(r.q_single_interface.sa)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_nine_significant_digits() {
        assert_eq!(fmt_f64(229000.0), "2.29000000e5");
        assert_eq!(fmt_f64(-1.0 / 3.0), "-3.33333333e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }
}
