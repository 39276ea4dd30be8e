//! `cvtg layout` — solve and verify a box-layout problem.

use serde::Deserialize;

use cvtg_core::layout::{solve_layout, verify_layout, LayoutError, LayoutProblem};

use super::print_json;
use crate::{CliError, LayoutArgs};

/// Problem file with optional geometry; flags override, toolkit defaults
/// fill the rest.
#[derive(Deserialize)]
struct ProblemFile {
    targets: Vec<(f64, f64)>,
    #[serde(default)]
    a_min: Option<f64>,
    #[serde(default)]
    r_min: Option<f64>,
    #[serde(default)]
    r_max: Option<f64>,
    #[serde(default)]
    big_m: Option<f64>,
    #[serde(default)]
    area_cuts: Option<usize>,
}

pub fn run(args: LayoutArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.problem).map_err(|e| {
        CliError::Input(format!("cannot read problem {}: {e}", args.problem.display()))
    })?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad problem JSON: {e}")))?;

    let n = file.targets.len().max(1);
    let mut problem = LayoutProblem::new(
        file.targets,
        args.a_min
            .or(file.a_min)
            .unwrap_or(0.5 / (2.0 * n as f64)),
        args.r_min.or(file.r_min).unwrap_or(1.0),
        args.r_max.or(file.r_max).unwrap_or(6.0),
    );
    if let Some(big_m) = args.big_m.or(file.big_m) {
        problem.big_m = big_m;
    }
    if let Some(cuts) = args.area_cuts.or(file.area_cuts) {
        problem.area_cuts = cuts;
    }

    let solution = solve_layout(&problem).map_err(|e| match e {
        LayoutError::Infeasible { .. } | LayoutError::InvalidProblem(_) => {
            CliError::Domain(e.to_string())
        }
        LayoutError::Internal(m) => CliError::Internal(m),
    })?;

    let violations = verify_layout(&solution, &problem);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("verification: {v}");
        }
        return Err(CliError::Internal(format!(
            "solution failed independent verification with {} violation(s)",
            violations.len()
        )));
    }

    let mut out = serde_json::to_value(&solution)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    out.as_object_mut()
        .expect("solution serializes to an object")
        .insert("verified".into(), serde_json::Value::Bool(true));
    print_json(&out)
}
