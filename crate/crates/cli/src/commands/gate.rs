//! `cvtg gate` — build an attention gate from anchor maps.

use std::path::{Path, PathBuf};

use cvtg_core::gate::{
    build_gate_stages, read_map, write_atnm, AttentionMap, GateConfig, GateError,
};

use super::print_json;
use crate::{CliError, GateArgs};

fn map_error(e: GateError) -> CliError {
    match e {
        GateError::AllZeroMap => CliError::Domain(e.to_string()),
        GateError::Io(_) => CliError::Input(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

fn stage_path(out: &Path, stage: &str) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".");
    name.push(stage);
    PathBuf::from(name)
}

fn write_stage(map: &AttentionMap, out: &Path, stage: &str) -> Result<(), CliError> {
    let path = stage_path(out, stage);
    write_atnm(map, &path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn run(args: GateArgs) -> Result<(), CliError> {
    let config = GateConfig {
        kernel: args.kernel,
        q_low: args.qlow,
        q_high: args.qhigh,
        sigma_floor: args.sigma_floor,
        ..GateConfig::default()
    };
    config.validate().map_err(map_error)?;

    let mut maps = Vec::with_capacity(args.maps.len());
    for path in &args.maps {
        maps.push(
            read_map(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        );
    }

    let stages = build_gate_stages(&maps, &config).map_err(map_error)?;
    write_atnm(&stages.gate.to_map(), &args.out)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))?;

    let sidecar = serde_json::json!({
        "peak": [stages.gate.peak.0, stages.gate.peak.1],
        "sigma": [stages.gate.sigma.0, stages.gate.sigma.1],
    });
    let sidecar_path = stage_path(&args.out, "json");
    std::fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).expect("static shape"),
    )
    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", sidecar_path.display())))?;

    if args.emit_stages {
        write_stage(&stages.averaged, &args.out, "averaged")?;
        write_stage(&stages.smoothed, &args.out, "smoothed")?;
        write_stage(&stages.retained, &args.out, "retained")?;
    }

    print_json(&sidecar)
}
