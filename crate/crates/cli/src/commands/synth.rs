//! `cvtg synth` — deterministic synthetic attention maps.

use cvtg_core::gate::{synthesize_map, write_atnm, write_map_json, Blob};

use super::print_json;
use crate::{CliError, SynthArgs};

fn parse_blob(spec: &str) -> Result<Blob, CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 4 {
        return Err(CliError::Input(format!(
            "blob must be \"cx,cy,sigma,amplitude\", got {spec:?}"
        )));
    }
    let mut nums = [0.0f64; 4];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| CliError::Input(format!("bad blob component {part:?}: {e}")))?;
    }
    if nums[2] <= 0.0 {
        return Err(CliError::Input(format!("blob sigma must be > 0, got {}", nums[2])));
    }
    if nums[3] < 0.0 {
        return Err(CliError::Input(format!(
            "blob amplitude must be >= 0, got {}",
            nums[3]
        )));
    }
    Ok(Blob {
        center: (nums[0], nums[1]),
        sigma: nums[2],
        amplitude: nums[3],
    })
}

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    if args.height == 0 || args.width == 0 {
        return Err(CliError::Input("dims must be positive".into()));
    }
    if args.noise < 0.0 {
        return Err(CliError::Input("noise must be >= 0".into()));
    }
    let blobs = args
        .blob
        .iter()
        .map(|s| parse_blob(s))
        .collect::<Result<Vec<_>, _>>()?;
    let map = synthesize_map(&blobs, args.noise, args.height, args.width, args.seed);

    let as_json = args.out.extension().is_some_and(|e| e == "json");
    let write = if as_json { write_map_json } else { write_atnm };
    write(&map, &args.out)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))?;

    print_json(&serde_json::json!({
        "out": args.out.display().to_string(),
        "height": args.height,
        "width": args.width,
        "seed": args.seed,
    }))
}
