//! Experiment driver for `nhgeom`: reads a JSON config, runs one command,
//! and writes CSV/JSON outputs for plotting.
//!
//! Exit status: 0 on success, 2 for configuration problems, 3 when a
//! numerical diagnostic aborts the run, 1 for I/O failures.

mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nhgeom::dynamics::{
    evolve, optimize_generator_detailed, speed_limit_bounds, write_table, GeneratorSchedule, HamiltonianSchedule,
    IntegratorConfig, Optimized, StaField, TrajectoryRecord,
};
use nhgeom::geodesic::{geodesic_generator, time_independent_check, GeodesicField, GeodesicPlan, TimeIndependentVerdict};
use nhgeom::linalg::{cr, commutator, identity, pauli_x, pauli_z, trace_distance, MatrixJson};
use nhgeom::metric::{bures_inner, bures_norm};
use nhgeom::state::{decompose_tangent, tangent_from_h_gamma, DensityOperator, TangentVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig};

/// Environment variable that redirects all output files.
pub const OUTPUT_DIR_ENV: &str = "NHGEOM_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("{op} failed: {source}")]
    Numerical {
        op: &'static str,
        #[source]
        source: nhgeom::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }
}

trait Context<T> {
    fn during(self, op: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for nhgeom::Result<T> {
    fn during(self, op: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { op, source })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Files written and lines meant for stdout.
#[derive(Debug, Default, Clone)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl Report {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// Output directory: explicit flag, then [`OUTPUT_DIR_ENV`], then the config's
/// `output` field, then the working directory.
pub fn resolve_output_dir(config: &ExperimentConfig, flag: Option<&Path>, env: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Writes a trajectory as CSV; see [`TrajectoryRecord::write_csv`] for the columns.
pub fn emit_csv(record: &TrajectoryRecord, path: &Path, include_states: bool) -> Result<(), CliError> {
    if record.is_empty() {
        return Err(io_err(path)(io::Error::new(io::ErrorKind::InvalidInput, "empty trajectory")));
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    record.write_csv(&mut out, include_states).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn emit_table(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write_table(&mut out, columns, rows).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn emit_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn integrator(inputs: &config::Inputs, step: f64, track: bool) -> IntegratorConfig {
    IntegratorConfig {
        rank_tol: inputs.rank_tol,
        cluster_tol: inputs.cluster_tol,
        track_optimized_rate: track,
        ..IntegratorConfig::with_step(step)
    }
}

/// Runs one experiment, writing its outputs into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Report, CliError> {
    let inputs = config.inputs()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut report = Report::default();
    match config.command {
        Command::Evolve => run_evolve(config, &inputs, out_dir, &mut report)?,
        Command::Speedlimit => run_speedlimit(config, &inputs, out_dir, &mut report)?,
        Command::Decompose => run_decompose(config, &inputs, out_dir, &mut report)?,
        Command::Optimize => run_optimize(&inputs, out_dir, &mut report)?,
        Command::Geodesic => run_geodesic(config, &inputs, out_dir, &mut report)?,
        Command::Sta => run_sta(config, &inputs, out_dir, &mut report)?,
        Command::ReproduceQubit => reproduce_qubit(&inputs, out_dir, &mut report)?,
        Command::ReproduceQutrit => reproduce_qutrit(out_dir, &mut report)?,
    }
    Ok(report)
}

const DEFAULT_STEP: f64 = 1e-3;

fn constant_trajectory(config: &ExperimentConfig, inputs: &config::Inputs) -> Result<TrajectoryRecord, CliError> {
    let rho0 = inputs.rho0.as_ref().expect("validated");
    let gen = inputs.generator.clone().expect("validated");
    let horizon = inputs.horizon.expect("validated");
    let schedule = GeneratorSchedule::constant(gen, 0.0, horizon).during("schedule")?;
    let ic = integrator(inputs, inputs.dt.unwrap_or(DEFAULT_STEP), config.track_optimized);
    if config.optimize {
        evolve(rho0, &Optimized(schedule), &ic).during("evolve")
    } else {
        evolve(rho0, &schedule, &ic).during("evolve")
    }
}

fn run_evolve(config: &ExperimentConfig, inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let record = constant_trajectory(config, inputs)?;
    let path = dir.join("trajectory.csv");
    emit_csv(&record, &path, config.include_states)?;
    report.files.push(path);
    report.say(format!(
        "steps {}  rank {}  final norm {:.12}",
        record.len() - 1,
        record.rank(),
        record.norms.last().unwrap()
    ));
    Ok(())
}

fn run_speedlimit(config: &ExperimentConfig, inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let record = constant_trajectory(config, inputs)?;
    let limits = speed_limit_bounds(&record).during("speed_limit_bounds")?;
    let csv = dir.join("trajectory.csv");
    emit_csv(&record, &csv, config.include_states)?;
    let path = dir.join("speedlimit.json");
    emit_json(&path, &serde_json::to_value(limits).expect("plain floats"))?;
    report.files.extend([csv, path]);
    report.say(format!(
        "elapsed {:.9}  qsl {:.9}  qsl_weak {:.9}",
        limits.elapsed, limits.qsl, limits.qsl_weak
    ));
    Ok(())
}

fn run_decompose(config: &ExperimentConfig, inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let rho = std::sync::Arc::new(inputs.rho0.clone().expect("validated"));
    let v = match (&inputs.tangent, &config.h, &config.gamma, config.seed) {
        (Some(t), ..) => TangentVector::new(rho.clone(), t.clone()).during("tangent")?,
        (None, None, None, Some(seed)) => nhgeom::sampling::tangent(&mut ChaCha8Rng::seed_from_u64(seed), &rho),
        _ => tangent_from_h_gamma(inputs.generator.as_ref().expect("validated"), &rho).during("tangent")?,
    };
    let d = decompose_tangent(&v);
    let norm = |t: &TangentVector| bures_norm(t).during("bures_norm");
    let norms = [norm(&d.coherent)?, norm(&d.classical)?, norm(&d.lifting)?];
    let value = json!({
        "tangent": MatrixJson::from_matrix(v.matrix()),
        "coherent": MatrixJson::from_matrix(d.coherent.matrix()),
        "classical": MatrixJson::from_matrix(d.classical.matrix()),
        "lifting": MatrixJson::from_matrix(d.lifting.matrix()),
        "bures_norm": {
            "tangent": norm(&v)?,
            "coherent": norms[0],
            "classical": norms[1],
            "lifting": norms[2],
        },
        "bures_inner": {
            "coherent_incoherent": bures_inner(&d.coherent, &d.incoherent()).during("bures_inner")?,
            "classical_lifting": bures_inner(&d.classical, &d.lifting).during("bures_inner")?,
        },
    });
    let path = dir.join("decompose.json");
    emit_json(&path, &value)?;
    report.files.push(path);
    report.say(format!(
        "bures norms: coherent {:.9}  classical {:.9}  lifting {:.9}",
        norms[0], norms[1], norms[2]
    ));
    Ok(())
}

fn run_optimize(inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let rho = inputs.rho0.as_ref().expect("validated");
    let gen = inputs.generator.as_ref().expect("validated");
    let opt = optimize_generator_detailed(gen, rho).during("optimize_generator")?;
    let before = 2.0 * rho.expectation(&opt.gamma_shifted);
    let after = 2.0 * rho.expectation(&opt.generator.gamma);
    let value = json!({
        "h_opt": MatrixJson::from_matrix(&opt.generator.h),
        "gamma_opt": MatrixJson::from_matrix(&opt.generator.gamma),
        "hamiltonian_correction": MatrixJson::from_matrix(&opt.hamiltonian_correction),
        "gamma_coherent": MatrixJson::from_matrix(&opt.gamma_coherent),
        "mu_c_min": opt.mu_c_min,
        "decay_rate_floor_shifted": before,
        "decay_rate_optimized": after,
    });
    let path = dir.join("optimize.json");
    emit_json(&path, &value)?;
    report.files.push(path);
    report.say(format!("decay rate {before:.12} -> {after:.12}"));
    Ok(())
}

fn run_geodesic(config: &ExperimentConfig, inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let rho1 = inputs.rho1.as_ref().expect("validated");
    let rho2 = inputs.rho2.as_ref().expect("validated");
    let plan = GeodesicPlan::from_states(rho1, rho2, inputs.r_scale).during("geodesic_plan")?;
    let step = inputs.dt.unwrap_or(plan.theta() / 2000.0);
    let ic = integrator(inputs, step, config.track_optimized);
    let field = GeodesicField::new(plan.clone(), false);
    let record = evolve(rho1, &field, &ic).during("evolve")?;
    let limits = speed_limit_bounds(&record).during("speed_limit_bounds")?;
    let end = trace_distance(record.states.last().unwrap().matrix(), rho2.matrix());

    let plan_path = dir.join("geodesic_plan.json");
    emit_json(&plan_path, &serde_json::to_value(plan.to_json()).expect("plain data"))?;
    let csv = dir.join("geodesic.csv");
    emit_csv(&record, &csv, config.include_states)?;
    let limits_path = dir.join("speedlimit.json");
    emit_json(&limits_path, &serde_json::to_value(limits).expect("plain floats"))?;
    report.files.extend([plan_path, csv, limits_path]);
    if plan.ambiguous_alignment() {
        report.say("warning: singular overlap, aligned endpoint is not unique");
    }
    report.say(format!("theta {:.12}  qsl {:.12}  endpoint distance {end:.3e}", plan.theta(), limits.qsl));
    Ok(())
}

fn run_sta(config: &ExperimentConfig, inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let (a, b) = inputs.h0.clone().expect("validated");
    let horizon = inputs.horizon.unwrap_or(1.0);
    let schedule = HamiltonianSchedule::linear(a, b, 0.0, horizon).during("sta_schedule")?;
    let field = StaField {
        schedule,
        beta: inputs.beta,
        cluster_tol: inputs.cluster_tol,
    };
    let rho0 = field.reference(0.0).during("gibbs_state")?;
    let ic = integrator(inputs, inputs.dt.unwrap_or(1e-4), config.track_optimized);
    let record = evolve(&rho0, &field, &ic).during("evolve")?;
    let mut rows = Vec::with_capacity(record.len());
    let mut worst = 0.0f64;
    for (k, (t, s)) in record.times.iter().zip(&record.states).enumerate() {
        let reference = field.reference(*t).during("gibbs_state")?;
        let distance = trace_distance(s.matrix(), reference.matrix());
        let gamma = &record.generators[k].gamma;
        let residual = commutator(gamma, reference.matrix()).norm();
        worst = worst.max(distance);
        rows.push(vec![*t, record.norms[k], record.decay_rates[k], record.speeds[k], distance, residual]);
    }
    let path = dir.join("sta.csv");
    emit_table(&path, &["t", "norm", "gamma", "speed", "trace_distance", "commutator"], &rows)?;
    report.files.push(path);
    report.say(format!("max trace distance to Gibbs curve {worst:.3e}"));
    Ok(())
}

fn qubit(x: f64, z: f64) -> Result<DensityOperator, CliError> {
    DensityOperator::new((identity(2) + pauli_x() * cr(x) + pauli_z() * cr(z)) * cr(0.5), nhgeom::state::DEFAULT_RANK_TOL)
        .during("state")
}

fn reproduce_qubit(inputs: &config::Inputs, dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let rho1 = qubit(0.0, 0.2)?;
    let rho2 = qubit(-0.5, -0.5)?;
    let plan = GeodesicPlan::from_states(&rho1, &rho2, inputs.r_scale).during("geodesic_plan")?;
    let step = inputs.dt.unwrap_or(plan.theta() / 2000.0);
    let ic = integrator(inputs, step, true);
    let baseline = evolve(&rho1, &GeodesicField::new(plan.clone(), true), &ic).during("evolve")?;
    let optimized = evolve(&rho1, &Optimized(GeodesicField::new(plan.clone(), true)), &ic).during("evolve")?;

    let mut norms = Vec::with_capacity(baseline.len());
    let mut rates = Vec::with_capacity(baseline.len());
    for k in 0..baseline.len() {
        let (nb, no) = (baseline.norms[k], optimized.norms[k]);
        let (gb, go) = (baseline.decay_rates[k], optimized.decay_rates[k]);
        norms.push(vec![baseline.times[k], nb, no, (no - nb) / nb]);
        rates.push(vec![baseline.times[k], gb, go, gb * nb, go * no]);
    }
    let norms_path = dir.join("qubit_norms.csv");
    emit_table(&norms_path, &["t", "norm_baseline", "norm_opt", "rel_diff"], &norms)?;
    let rates_path = dir.join("qubit_rates.csv");
    emit_table(&rates_path, &["t", "gamma", "gamma_opt", "rate", "rate_opt"], &rates)?;
    let plan_path = dir.join("qubit_plan.json");
    emit_json(&plan_path, &serde_json::to_value(plan.to_json()).expect("plain data"))?;
    report.files.extend([norms_path, rates_path, plan_path]);

    let last = norms.last().unwrap();
    let (imin, gmin) = optimized
        .decay_rates
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, g)| if g < best.1 { (i, g) } else { best });
    report.say(format!("theta {:.12}  steps {}", plan.theta(), baseline.len() - 1));
    report.say(format!(
        "final norm baseline {:.9}  optimized {:.9}  relative difference {:.9}",
        last[1], last[2], last[3]
    ));
    report.say(format!("min gamma_opt {gmin:.3e} at t = {:.9}", optimized.times[imin]));
    Ok(())
}

fn reproduce_qutrit(dir: &Path, report: &mut Report) -> Result<(), CliError> {
    let rho1 = DensityOperator::diagonal(&[0.2, 0.4, 0.4]).during("state")?;
    let rho2 = DensityOperator::diagonal(&[0.2, 0.3, 0.5]).during("state")?;
    let plan = GeodesicPlan::from_states(&rho1, &rho2, nhgeom::geodesic::DEFAULT_R_SCALE).during("geodesic_plan")?;
    let k = geodesic_generator(&plan, 0.0).during("geodesic_generator")?.k;
    let verdict = time_independent_check(&k, 1e-9).during("time_independent_check")?;
    let verdict_text = match &verdict {
        TimeIndependentVerdict::ExistsShortestForm { .. } => "exists".to_string(),
        TimeIndependentVerdict::Fails { distinct_eigenvalues, .. } => {
            format!("fails ({distinct_eigenvalues} distinct eigenvalues)")
        }
    };
    report.say(format!("theta {:.12}", plan.theta()));
    report.say("K_g(0):");
    for i in 0..3 {
        let row: Vec<String> = (0..3)
            .map(|j| format!("{:+.12}{:+.12}i", k[(i, j)].re, k[(i, j)].im))
            .collect();
        report.say(format!("  {}", row.join("  ")));
    }
    report.say(format!("time-independent shortest form: {verdict_text}"));
    let value = json!({
        "theta": plan.theta(),
        "k_g0": MatrixJson::from_matrix(&k),
        "verdict": if verdict.exists() { "exists" } else { "fails" },
    });
    let path = dir.join("qutrit.json");
    emit_json(&path, &value)?;
    report.files.push(path);
    Ok(())
}
