//! Report rendering: table, JSON and CSV.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;
use telesim::experiment::{Averaging, ScenarioReport, CLASSICAL_FIDELITY_THRESHOLD};
use telesim::oracle::Check;

pub const SCHEMA_VERSION: u32 = 1;
const MACHINE_DIGITS: usize = 12;

#[derive(Debug, Serialize)]
pub struct Document<'a> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: &'a ScenarioReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<&'a [Check]>,
}

/// Rounds to `digits` significant digits; the result prints without trailing noise.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0), MACHINE_DIGITS);
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

pub fn json(report: &ScenarioReport, verification: Option<&[Check]>) -> String {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        report,
        verification,
    };
    let mut value = serde_json::to_value(&doc).expect("report serializes");
    round_numbers(&mut value);
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

pub fn csv(report: &ScenarioReport) -> String {
    let mut out = String::from("schema_version,sector_m,sector_n,weight,branch,probability,max_amplitude\n");
    for s in &report.sectors {
        for b in &s.branches {
            let _ = writeln!(
                out,
                "{SCHEMA_VERSION},{},{},{},{},{},{}",
                s.sector.m,
                s.sector.n,
                round_sig(s.weight, MACHINE_DIGITS),
                b.label,
                round_sig(b.probability, MACHINE_DIGITS),
                round_sig(b.max_amplitude, MACHINE_DIGITS),
            );
        }
    }
    out
}

pub fn table(report: &ScenarioReport, verification: Option<&[Check]>) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "scheme            {}", c.scheme.name());
    let _ = writeln!(
        out,
        "chi               {:.6} / {:.6}",
        c.params.chi,
        c.params.second_chi()
    );
    let _ = writeln!(out, "max pairs         {}", c.params.max_pairs);
    let _ = writeln!(out, "rot1 (theta, phi) {:.6} {:.6}", c.rot1.theta, c.rot1.phi);
    let _ = writeln!(out, "rot4 (theta, phi) {:.6} {:.6}", c.rot4.theta, c.rot4.phi);
    let _ = writeln!(out, "efficiency        {:.6}", c.efficiency);
    let _ = writeln!(out, "conventions       pbs {:?}, bs {:?}", c.pbs_convention, c.bs_convention);
    out.push('\n');

    let labels: Vec<&str> = report
        .sectors
        .first()
        .map(|s| s.branches.iter().map(|b| b.label.as_str()).collect())
        .unwrap_or_default();
    let _ = write!(out, "{:<8}{:>12}", "sector", "weight");
    for l in &labels {
        let _ = write!(out, "{:>12}", format!("P({l})"));
    }
    let _ = writeln!(out, "{:>12}", "P(total)");
    for s in &report.sectors {
        let _ = write!(out, "{:<8}{:>12.6}", s.sector.to_string(), s.weight);
        for b in &s.branches {
            let _ = write!(out, "{:>12.6}", b.probability);
        }
        let _ = writeln!(out, "{:>12.6}", s.total_probability());
    }
    out.push('\n');

    let _ = writeln!(out, "coincidence probability  {:.6}", report.coincidence_probability);
    let _ = writeln!(out, "{:<8}{:>12}{:>12}{:>14}", "branch", "probability", "fidelity", "1-photon wt");
    for b in &report.branches {
        let (f, w) = b
            .fidelity
            .as_ref()
            .map_or(("-".to_string(), "-".to_string()), |r| {
                (format!("{:.6}", r.raw), format!("{:.6}", r.single_photon_weight))
            });
        let _ = writeln!(out, "{:<8}{:>12.6}{:>12}{:>14}", b.label, b.probability, f, w);
    }
    let _ = writeln!(out, "conditional fidelity     {:.6}", report.conditional_fidelity);
    out.push('\n');

    let mode = match c.averaging {
        Averaging::SixState => "six-state".to_string(),
        Averaging::MonteCarlo { samples } => format!("monte-carlo, {samples} samples"),
    };
    let side = if report.average_fidelity > CLASSICAL_FIDELITY_THRESHOLD {
        "above"
    } else {
        "not above"
    };
    let _ = writeln!(out, "average fidelity         {:.6}  ({mode})", report.average_fidelity);
    let _ = writeln!(
        out,
        "classical limit          {:.6}  ({side})",
        report.classical_threshold
    );
    let _ = writeln!(out, "survival ratio (1,1)     {:.6}", report.survival_ratio);

    if let Some(checks) = verification {
        let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
        let worst = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
        out.push('\n');
        let _ = writeln!(
            out,
            "verification             {} checks, {} failed, worst deviation {:.3e}",
            checks.len(),
            failed.len(),
            worst
        );
        for c in failed {
            let _ = writeln!(out, "  FAIL {} ({:.3e} > {:.1e})", c.name, c.deviation, c.tolerance);
        }
    }
    out
}
