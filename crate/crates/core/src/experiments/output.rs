//! CSV renderings of experiment results. Floats use Rust's shortest
//! round-trip formatting, so equal results give byte-identical files.

use std::io::Write;

use super::{ClusterReport, SensitivityCurve, SweepKind, SweepResult};
use crate::error::Result;

/// `method,n,mean,se` for estimation sweeps, `method,n,critical_radius` for
/// testing sweeps.
pub fn write_summary_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    match result.kind {
        SweepKind::Estimation => {
            writeln!(w, "method,n,mean,se")?;
            for r in &result.rows {
                writeln!(w, "{},{},{},{}", r.method, r.n, r.value, r.se.unwrap_or(f64::NAN))?;
            }
        }
        SweepKind::Testing => {
            writeln!(w, "method,n,critical_radius")?;
            for r in &result.rows {
                writeln!(w, "{},{},{}", r.method, r.n, r.value)?;
            }
        }
    }
    Ok(())
}

/// `method,slope,intercept,slope_se,reference_slope`
pub fn write_slopes_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "method,slope,intercept,slope_se,reference_slope")?;
    for s in &result.slopes {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.method, s.fit.slope, s.fit.intercept, s.fit.slope_se, result.reference_slope
        )?;
    }
    Ok(())
}

/// `method,n,index,norm_sq,type_two`; the null row has an empty index.
pub fn write_power_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "method,n,index,norm_sq,type_two")?;
    for p in &result.power {
        let idx = p.index.map(|i| i.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", p.method, p.n, idx, p.norm_sq, p.type_two)?;
    }
    Ok(())
}

/// `method,n,threshold,type_one,binomial_se`
pub fn write_calibration_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "method,n,threshold,type_one,binomial_se")?;
    for c in &result.calibration {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.method, c.n, c.threshold, c.type_one, c.binomial_se
        )?;
    }
    Ok(())
}

/// `parameter,value,mean,se`
pub fn write_curve_csv<W: Write>(curve: &SensitivityCurve, mut w: W) -> Result<()> {
    writeln!(w, "parameter,value,mean,se")?;
    for p in &curve.rows {
        writeln!(w, "{},{},{},{}", curve.parameter, p.value, p.mean, p.se)?;
    }
    Ok(())
}

/// `method,mean_risk,se,tuning,ratio_to_pcr_le`
pub fn write_cluster_csv<W: Write>(report: &ClusterReport, mut w: W) -> Result<()> {
    writeln!(w, "method,mean_risk,se,tuning,ratio_to_pcr_le")?;
    for r in &report.rows {
        let t = r.tuning.map(|t| t.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", r.method, r.mean_risk, r.se, t, r.ratio_to_pcr_le)?;
    }
    Ok(())
}
