//! CSV emission. Floats carry 12 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

use super::experiment::{ExperimentResult, PolicyResult};

pub const SUMMARY_HEADER: &str = "policy,mean_rate_bps,std_rate_bps,runtime_norm_s";
pub const FRAME_HEADER: &str = "trial,frame,rho,alpha_a,alpha_b,d_b_w,e_b_j,residual_j,rate_bps";

/// Formats `x` like C's `%.12g`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

/// Whether the runtime column carries measured times. Without timing the
/// column is zero so that output bytes depend only on the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    #[default]
    Omit,
    Record,
}

fn summary_fields(p: &PolicyResult, timing: Timing) -> String {
    let rt = if timing == Timing::Record { p.runtime_norm_s } else { 0.0 };
    format!("{},{},{},{}", p.policy.name(), fmt_float(p.mean_rate_bps), fmt_float(p.std_rate_bps), fmt_float(rt))
}

pub fn summary_csv(res: &ExperimentResult, timing: Timing) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for p in &res.policies {
        let _ = writeln!(s, "{}", summary_fields(p, timing));
    }
    s
}

/// Summary rows for several runs, each prefixed by its parameter values.
pub fn sweep_csv(param_names: &[&str], runs: &[(Vec<f64>, ExperimentResult)], timing: Timing) -> String {
    let mut s = String::new();
    for name in param_names {
        let _ = write!(s, "{name},");
    }
    let _ = writeln!(s, "{SUMMARY_HEADER}");
    for (vals, res) in runs {
        for p in &res.policies {
            for v in vals {
                let _ = write!(s, "{},", fmt_float(*v));
            }
            let _ = writeln!(s, "{}", summary_fields(p, timing));
        }
    }
    s
}

pub fn frames_csv(p: &PolicyResult) -> String {
    let mut s = format!("{FRAME_HEADER}\n");
    for r in &p.frames {
        let d = &r.decision;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.frame,
            fmt_float(d.rho),
            fmt_float(d.alpha_a),
            fmt_float(d.alpha_b),
            fmt_float(d.d_b),
            fmt_float(r.e_b),
            fmt_float(r.residual),
            fmt_float(r.rate_bps)
        );
    }
    s
}

pub fn emit_csv(res: &ExperimentResult, path: &Path, timing: Timing) -> Result<()> {
    std::fs::write(path, summary_csv(res, timing))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(1019630.123456789), "1019630.12346");
        assert_eq!(fmt_float(0.1), "0.1");
        assert_eq!(fmt_float(1e-7), "1e-7");
        assert_eq!(fmt_float(-2.5e13), "-2.5e13");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        for x in [std::f64::consts::PI, 6.02e23, 1.5e-9, 123456789012.0] {
            let y: f64 = fmt_float(x).parse().unwrap();
            assert!((x - y).abs() <= 1e-11 * x.abs(), "{x} {y}");
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        assert_eq!(summary_csv(&ExperimentResult::default(), Timing::Omit), format!("{SUMMARY_HEADER}\n"));
    }
}
