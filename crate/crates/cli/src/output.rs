//! Curve tables. Floats use Rust's shortest round-trip formatting in both CSV
//! and JSON, so output is byte-stable and re-parses to the same values.

use std::fmt::Write as _;

use serde::Serialize;

use mrl_core::mrl_smooth::{MrlEstimate, Undefined};
use mrl_core::StepSurvival;

#[derive(Debug, Serialize)]
pub struct Meta {
    pub n: usize,
    /// One entry per curve, written as a bare number when there is only one.
    #[serde(serialize_with = "scalar_if_single")]
    pub lambda_used: Vec<f64>,
    pub censoring_rate: f64,
    pub tie_rule: &'static str,
    pub alpha: f64,
    pub grid_points: usize,
    pub t_max_frac: f64,
    pub version: &'static str,
}

fn scalar_if_single<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    match v {
        [one] => s.serialize_f64(*one),
        _ => v.serialize(s),
    }
}

#[derive(Debug, Serialize)]
pub struct Row {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub t: f64,
    pub mrl: Option<f64>,
    pub stderr: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub defined: bool,
    pub step_mrl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undefined: Option<Undefined>,
}

#[derive(Debug, Serialize)]
pub struct Table {
    pub meta: Meta,
    pub points: Vec<Row>,
}

pub fn rows(curve: &MrlEstimate, step: &StepSurvival, with_lambda: bool) -> Result<Vec<Row>, mrl_core::KmError> {
    curve
        .points
        .iter()
        .map(|p| {
            Ok(Row {
                lambda: with_lambda.then_some(curve.lambda_used),
                t: p.t,
                mrl: p.mrl,
                stderr: p.stderr,
                ci_lower: p.ci_lower,
                ci_upper: p.ci_upper,
                defined: p.is_defined(),
                step_mrl: step.step_mrl(p.t)?,
                undefined: p.undefined,
            })
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

impl Table {
    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "# n={}", m.n);
        let _ = writeln!(out, "# lambda_used={}", list(&m.lambda_used));
        let _ = writeln!(out, "# censoring_rate={}", m.censoring_rate);
        let _ = writeln!(out, "# tie_rule={}", m.tie_rule);
        let _ = writeln!(out, "# alpha={}", m.alpha);
        let _ = writeln!(out, "# grid_points={}", m.grid_points);
        let _ = writeln!(out, "# t_max_frac={}", m.t_max_frac);
        let _ = writeln!(out, "# version={}", m.version);
        let with_lambda = self.points.first().is_some_and(|r| r.lambda.is_some());
        if with_lambda {
            out.push_str("lambda,");
        }
        out.push_str("t,mrl,stderr,ci_lower,ci_upper,defined,step_mrl\n");
        for r in &self.points {
            if let Some(l) = r.lambda {
                let _ = write!(out, "{l},");
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t,
                cell(r.mrl),
                cell(r.stderr),
                cell(r.ci_lower),
                cell(r.ci_upper),
                u8::from(r.defined),
                cell(r.step_mrl)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}
