//! Experiment configuration, drivers and report emission behind the CLI.

pub mod generate;

pub use generate::{generate_sequence, FamilyName, SyntheticFamily};

use crate::convex::ConvexBody;
use crate::error::MzError;
use crate::euler;
use crate::field::grid::{Boundary, Grid, GridField};
use crate::field::integral::l1_dist_integral;
use crate::field::io::{read_field, write_field};
use crate::field::operator::{apply_operator, HomogeneousOperator, OpTerm};
use crate::truncation::diagnostics::{growth_admissibility, young_measure_compare};
use crate::truncation::drivers::{
    truncate_domain, truncate_varying_k, truncate_whole_space, AxisBox, DomainTruncationConfig,
    KMap, VaryingKConfig, WholeSpaceParams,
};
use crate::truncation::Constants;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Cap the worker pool from the `MZ_THREADS` environment variable.  Results
/// do not depend on the worker count (disjoint writes, fixed reduction
/// order); the cap only bounds resources.
pub fn init_threads() {
    if let Ok(v) = std::env::var("MZ_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub spacing: f64,
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let origin = self.origin.clone().unwrap_or_else(|| vec![0.0; self.shape.len()]);
        Grid::new(self.shape.clone(), self.spacing, origin, self.boundary)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `gradient`, `symgrad`, `laplacian`, or `euler_b`.
    Builtin { name: String, dim: usize },
    Inline {
        order: usize,
        in_components: usize,
        out_components: usize,
        terms: Vec<OpTerm>,
    },
}

impl OperatorSpec {
    pub fn resolve(&self) -> Result<HomogeneousOperator> {
        match self {
            OperatorSpec::Builtin { name, dim } => match name.as_str() {
                "gradient" => Ok(HomogeneousOperator::gradient(*dim)),
                "symgrad" => Ok(euler::symgrad_pair(*dim).0),
                "laplacian" => Ok(HomogeneousOperator::laplacian(*dim)),
                "euler_b" => euler::build_euler_b(*dim),
                other => Err(MzError::Config(format!("unknown builtin operator {other}"))),
            },
            OperatorSpec::Inline { order, in_components, out_components, terms } => {
                HomogeneousOperator::new(*order, *in_components, *out_components, terms.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WholeSpace,
    Domain,
    VaryingK,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Total inflation budget (absolute units).
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub c3: Option<f64>,
    #[serde(default)]
    pub c4: Option<f64>,
    #[serde(default)]
    pub c5: Option<f64>,
    #[serde(default)]
    pub lambda_stop_coeff: Option<f64>,
    #[serde(default)]
    pub slack_coeff: Option<f64>,
    #[serde(default)]
    pub radius_cap_frac: Option<f64>,
    #[serde(default)]
    pub stage_floor_frac: Option<f64>,
    #[serde(default)]
    pub max_stages: Option<usize>,
}

fn default_alpha() -> f64 {
    0.01
}

impl ScheduleSpec {
    pub fn constants(&self, d: usize) -> Constants {
        let mut c = Constants::defaults(d);
        if let Some(v) = self.c2 {
            c.c2 = v;
        }
        if let Some(v) = self.c3 {
            c.c3 = v;
        }
        if let Some(v) = self.c4 {
            c.c4 = v;
        }
        if let Some(v) = self.c5 {
            c.c5 = v;
        }
        if let Some(v) = self.lambda_stop_coeff {
            c.lambda_stop_coeff = v;
        }
        if let Some(v) = self.slack_coeff {
            c.slack_coeff = v;
        }
        if let Some(v) = self.radius_cap_frac {
            c.radius_cap_frac = v;
        }
        if let Some(v) = self.stage_floor_frac {
            c.stage_floor_frac = v;
        }
        c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub v: AxisBox,
    pub u: AxisBox,
    pub cutoff_width: f64,
    #[serde(default)]
    pub u0_path: Option<String>,
    #[serde(default = "default_u0_tol")]
    pub u0_tol: f64,
}

fn default_u0_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaryingSpec {
    pub eta: f64,
    pub levels: Vec<usize>,
    /// Rows `(eps, delta)`: `d_H(K_x, K_y) <= eps` whenever `|x-y| <= delta`.
    pub modulus: Vec<(f64, f64)>,
    /// Absolute derivative bound on the inputs.
    pub m_abs: f64,
    pub cutoff_width: f64,
    #[serde(default = "default_u0_tol")]
    pub u0_tol: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub dump_fields: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mode: Mode,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub k: Option<ConvexBody>,
    #[serde(default)]
    pub k_map: Option<KMap>,
    pub grid: GridSpec,
    #[serde(default)]
    pub generator: Option<SyntheticFamily>,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub m_bound: f64,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub varying: Option<VaryingSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MzError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| MzError::Config(format!("config schema error in {}: {e}", path.display())))?;
    for input in &config.inputs {
        if !Path::new(input).exists() {
            return Err(MzError::Config(format!("referenced field file missing: {input}")));
        }
    }
    Ok(config)
}

#[derive(Debug, Serialize)]
pub struct RunEntry {
    pub j: usize,
    pub lambda_target: Option<f64>,
    pub lambda_measured: f64,
    pub growth_value: f64,
    pub first_moment_drift: f64,
    pub checks_ok: bool,
    pub report: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub entries: Vec<RunEntry>,
    /// Whether the admissibility functional decreases along the sequence.
    pub growth_decreasing: bool,
    pub all_ok: bool,
}

/// Run the configured experiment: one driver invocation per `j`, report
/// files under the output directory, exit 0 iff every asserted invariant
/// passed within slack.
pub fn run_config(config: &ExperimentConfig, out_dir_override: Option<&Path>) -> Result<RunSummary> {
    let grid = config.grid.build()?;
    let op = config.operator.resolve()?;
    let d = grid.dim;
    let constants = config.schedule.constants(d);

    let out_dir: PathBuf = out_dir_override
        .map(|p| p.to_path_buf())
        .or_else(|| config.output.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mz-out"));
    std::fs::create_dir_all(&out_dir)?;

    let body_for_generation: ConvexBody = match (&config.k, &config.k_map) {
        (Some(k), _) => k.clone(),
        (None, Some(map)) => {
            let center: Vec<f64> = (0..d)
                .map(|a| grid.origin[a] + 0.5 * grid.spacing * (grid.shape[a] - 1) as f64)
                .collect();
            map.body_at(&center)
        }
        (None, None) => return Err(MzError::Config("config needs k or k_map".into())),
    };

    let js: Vec<usize> = match (&config.generator, config.inputs.is_empty()) {
        (Some(g), _) => (0..g.j_count).collect(),
        (None, false) => (0..config.inputs.len()).collect(),
        (None, true) => return Err(MzError::Config("config needs a generator or input files".into())),
    };

    let mut entries = Vec::new();
    let mut all_ok = true;
    for &j in &js {
        let u_j = match &config.generator {
            Some(family) => generate_sequence(family, j, &grid, &op, &body_for_generation, config.seed)?,
            None => read_field(Path::new(&config.inputs[j]))?,
        };
        let bu = apply_operator(&op, &u_j)?;
        let lambda_measured = l1_dist_integral(&bu, &body_for_generation)?.1;
        let growth_value = growth_admissibility(
            lambda_measured,
            config.m_bound,
            0.5,
            d,
            body_for_generation.sup_norm()?,
            crate::field::operator::operator_constant(&op)?,
            constants.c2,
        )?;

        let mut whole = WholeSpaceParams {
            gamma: config.schedule.gamma,
            m_bound: config.m_bound,
            alpha: config.schedule.alpha,
            constants: constants.clone(),
            support: None,
            max_stages: config.schedule.max_stages.unwrap_or(1000),
        };

        let (w_j, checks_ok, report_value) = match config.mode {
            Mode::WholeSpace => {
                let k = config.k.as_ref().ok_or_else(|| {
                    MzError::Config("whole_space mode needs a fixed body k".into())
                })?;
                if let Some(g) = &config.generator {
                    whole.support = Some(g.support.clone());
                }
                let (w, report) = truncate_whole_space(&u_j, k, &op, &whole)?;
                let ok = report.all_checks_ok();
                (w, ok, serde_json::to_value(&report)?)
            }
            Mode::Domain => {
                let k = config
                    .k
                    .as_ref()
                    .ok_or_else(|| MzError::Config("domain mode needs a fixed body k".into()))?;
                let spec = config
                    .domain
                    .as_ref()
                    .ok_or_else(|| MzError::Config("domain mode needs a domain section".into()))?;
                let u0 = match &spec.u0_path {
                    Some(p) => read_field(Path::new(p))?,
                    None => GridField::zeros(grid.clone(), op.in_components),
                };
                let cfg = DomainTruncationConfig {
                    u0,
                    v: spec.v.clone(),
                    u_box: spec.u.clone(),
                    cutoff_width: spec.cutoff_width,
                    u0_tol: spec.u0_tol,
                    k_offset: 0.0,
                    whole: whole.clone(),
                };
                let (w, report) = truncate_domain(&u_j, &cfg, k, &op)?;
                let ok = report.inner.all_checks_ok() && report.mask_copy_changed == 0;
                (w, ok, serde_json::to_value(&report)?)
            }
            Mode::VaryingK => {
                let map = config
                    .k_map
                    .as_ref()
                    .ok_or_else(|| MzError::Config("varying_k mode needs k_map".into()))?;
                let spec = config
                    .varying
                    .as_ref()
                    .ok_or_else(|| MzError::Config("varying_k mode needs a varying section".into()))?;
                let level = spec.levels[j.min(spec.levels.len() - 1)];
                let cfg = VaryingKConfig {
                    k_map: map.clone(),
                    eta: spec.eta,
                    modulus: spec.modulus.clone(),
                    level,
                    u0: GridField::zeros(grid.clone(), op.in_components),
                    m_abs: spec.m_abs,
                    cutoff_width: spec.cutoff_width,
                    u0_tol: spec.u0_tol,
                    whole: whole.clone(),
                };
                let (w, report) = truncate_varying_k(&u_j, &cfg, &op)?;
                let ok = report.bound_ok;
                (w, ok, serde_json::to_value(&report)?)
            }
        };

        let first_moment = {
            let mut e = vec![0usize; op.in_components];
            e[0] = 1;
            e
        };
        let drift = young_measure_compare(&u_j, &w_j, &[first_moment])
            .map(|t| t.rows.first().map(|r| r.abs_diff).unwrap_or(0.0))
            .unwrap_or(f64::NAN);

        let report_path = out_dir.join(format!("report_j{j}.json"));
        std::fs::write(&report_path, serde_json::to_string_pretty(&report_value)?)?;
        if config.output.dump_fields {
            write_field(&out_dir.join(format!("w_j{j}.fld")), &w_j)?;
        }
        all_ok &= checks_ok;
        entries.push(RunEntry {
            j,
            lambda_target: config.generator.as_ref().map(|g| g.lambda_target(j)),
            lambda_measured,
            growth_value,
            first_moment_drift: drift,
            checks_ok,
            report: report_value,
        });
    }

    let growth_decreasing = entries
        .windows(2)
        .all(|w| w[1].growth_value <= w[0].growth_value * (1.0 + 1e-12));
    let summary =
        RunSummary { mode: config.mode, seed: config.seed, entries, growth_decreasing, all_ok };
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    if !summary.all_ok {
        return Err(MzError::Invariant(
            "one or more recorded inequality checks failed; see the report files".into(),
        ));
    }
    Ok(summary)
}

/// Deterministic random trigonometric field component: a few integer-mode
/// sine waves below the Nyquist frequency.
pub fn fill_random_trig(
    grid: &Grid,
    seed: u64,
    component: usize,
    modes: usize,
    max_freq: i64,
    buf: &mut [f64],
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (component as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let d = grid.dim;
    let mut waves = Vec::with_capacity(modes);
    for _ in 0..modes {
        let mut kvec = vec![0i64; d];
        loop {
            for k in kvec.iter_mut() {
                *k = rng.gen_range(-max_freq..=max_freq);
            }
            if kvec.iter().any(|&k| k != 0) {
                break;
            }
        }
        let amp = rng.gen::<f64>() * 2.0 - 1.0;
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        waves.push((kvec, amp, phase));
    }
    let mut idx = vec![0usize; d];
    for n in 0..grid.node_count() {
        grid.fill_multi(n, &mut idx);
        let mut v = 0.0;
        for (kvec, amp, phase) in &waves {
            let mut arg = *phase;
            for a in 0..d {
                let len = grid.spacing * grid.shape[a] as f64;
                let x = grid.origin[a] + grid.spacing * idx[a] as f64;
                arg += std::f64::consts::TAU * (kvec[a] as f64) * x / len;
            }
            v += amp * arg.sin();
        }
        buf[n] = v;
    }
}

#[derive(Debug, Serialize)]
pub struct EulerPotentialReport {
    pub d: usize,
    pub grid_nodes_per_axis: usize,
    pub state_components: usize,
    pub potential_components: usize,
    pub sup_state: f64,
    pub sup_residual: f64,
    pub relative_residual: f64,
    pub wall_clock_seconds: f64,
}

/// Generate random trigonometric potential components, build the state field
/// through the potential operator (spectrally, streaming one component at a
/// time), and verify the constraint residual.
pub fn run_euler_potential(
    d: usize,
    n: usize,
    seed: u64,
    out: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<EulerPotentialReport> {
    let start = std::time::Instant::now();
    let grid = Grid::cube(d + 1, n, 1.0, Boundary::Periodic)?;
    let b_op = euler::build_euler_b(d)?;
    let state = euler::apply_operator_spectral_streaming(&b_op, &grid, |c, buf| {
        fill_random_trig(&grid, seed, c, 3, 3, buf);
    })?;
    let residual = euler::apply_a_euler(&state, true)?;
    let sup_state = state.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_residual = residual.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let report = EulerPotentialReport {
        d,
        grid_nodes_per_axis: n,
        state_components: euler::n_components(d),
        potential_components: euler::potential_component_count(d),
        sup_state,
        sup_residual,
        relative_residual: if sup_state > 0.0 { sup_residual / sup_state } else { 0.0 },
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = out {
        write_field(path, &state)?;
    }
    if let Some(path) = report_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Symbol exactness for a named operator pair.
pub fn run_symbol_check(pair: &str, d: usize, trials: usize, tol: f64) -> Result<euler::ExactnessReport> {
    let (a_op, b_op) = match pair {
        "euler" => (euler::build_euler_a(d), euler::build_euler_b(d)?),
        "symgrad" => {
            let (e_op, annihilator) = euler::symgrad_pair(d);
            (annihilator, e_op)
        }
        other => return Err(MzError::Config(format!("unknown pair {other}; use euler or symgrad"))),
    };
    euler::exactness_check(&a_op, &b_op, trials, tol, 0x5eed_cafe)
}
