//! Drive a full experiment from a JSON config, exactly as the `mz truncate`
//! subcommand does.
//!
//! Run with: cargo run --release --example experiment_config

use mz::harness::{load_config, run_config};

fn main() -> mz::Result<()> {
    let dir = std::env::temp_dir().join("mz_example_run");
    std::fs::create_dir_all(&dir)?;
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{
  "seed": 11,
  "mode": "whole_space",
  "operator": {{ "type": "builtin", "name": "gradient", "dim": 2 }},
  "k": {{ "kind": "ball", "center": [0.0, 0.0], "radius": 1.0 }},
  "grid": {{ "shape": [257, 257], "spacing": 0.03125, "boundary": "extend" }},
  "generator": {{
    "name": "spike_train",
    "lambda0": 0.0015,
    "ratio": 0.5,
    "support": {{ "lo": [2.5, 2.5], "hi": [5.5, 5.5] }},
    "spikes": 2,
    "bump_radius": 0.1,
    "j_count": 3
  }},
  "m_bound": 2.5,
  "schedule": {{ "gamma": 2.5, "alpha": 0.01 }},
  "output": {{ "out_dir": {:?}, "dump_fields": false }}
}}"#,
            dir.join("out").to_str().unwrap()
        ),
    )?;

    let config = load_config(&config_path)?;
    let summary = run_config(&config, None)?;
    println!("mode {:?}, {} members, all checks ok: {}", summary.mode, summary.entries.len(), summary.all_ok);
    for entry in &summary.entries {
        println!(
            "  j = {}: lambda target {:.3e}, measured {:.3e}, moment drift {:.2e}",
            entry.j,
            entry.lambda_target.unwrap_or(f64::NAN),
            entry.lambda_measured,
            entry.first_moment_drift
        );
    }
    println!("reports under {:?}", dir.join("out"));
    Ok(())
}
