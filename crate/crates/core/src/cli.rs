//! Command-line front end: model ingestion, the five subcommands, and
//! CSV/JSON emission. All documents carry the `srdkit/1` schema tag and are
//! byte-stable for fixed inputs and seeds.

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::frob_dot;
use crate::maxdet::{solve, SolverConfig, SolverSolution, SolverStatus};
use crate::model::{CovarianceSchedule, DistortionMode, Horizon};
use crate::modelfile::{matrix_from_rows, matrix_to_rows, parse_model_file, ModelFile};
use crate::problems::{build_finite_hard, build_finite_soft, build_stationary, SrdProblem};
use crate::synthesis::{synthesize, SensorDesign, DEFAULT_SNR_CLIP};
use crate::{NATS_TO_BITS, SCHEMA_VERSION};

// ---------------------------------------------------------------------------
// Output documents
// ---------------------------------------------------------------------------

type MatrixRows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: String,
    pub iterations: usize,
    pub mu: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignBody {
    pub snr: Vec<MatrixRows>,
    pub c: Vec<MatrixRows>,
    pub v: Vec<MatrixRows>,
    pub ranks: Vec<usize>,
    pub p_pred: Vec<MatrixRows>,
    pub p_filt: Vec<MatrixRows>,
    pub rate_per_step_nats: Vec<f64>,
}

impl DesignBody {
    pub fn from_design(d: &SensorDesign) -> Self {
        DesignBody {
            snr: d.snr.iter().map(matrix_to_rows).collect(),
            c: d.c.iter().map(matrix_to_rows).collect(),
            v: d.v.iter().map(matrix_to_rows).collect(),
            ranks: d.ranks.clone(),
            p_pred: d.p_pred.iter().map(matrix_to_rows).collect(),
            p_filt: d.p_filt.iter().map(matrix_to_rows).collect(),
            rate_per_step_nats: d.rate_per_step_nats.clone(),
        }
    }

    /// Rebuilds the design; `n` disambiguates zero-row sensing matrices.
    pub fn to_design(&self, n: usize) -> Result<SensorDesign> {
        let mats = |rows: &[MatrixRows], what: &str| -> Result<Vec<DMatrix<f64>>> {
            rows.iter()
                .map(|r| matrix_from_rows(r, what))
                .collect::<Result<Vec<_>>>()
        };
        let c = self
            .c
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    Ok(DMatrix::zeros(0, n))
                } else {
                    matrix_from_rows(rows, "design.c")
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let v = self
            .v
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    Ok(DMatrix::zeros(0, 0))
                } else {
                    matrix_from_rows(rows, "design.v")
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SensorDesign {
            snr: mats(&self.snr, "design.snr")?,
            c,
            v,
            ranks: self.ranks.clone(),
            p_pred: mats(&self.p_pred, "design.p_pred")?,
            p_filt: mats(&self.p_filt, "design.p_filt")?,
            rate_per_step_nats: self.rate_per_step_nats.clone(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub rank: usize,
    /// `Tr(Theta_t P_{t|t})` of the synthesized design.
    pub distortion: f64,
    /// The bound `D_t` (hard mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub schema: String,
    pub kind: String,
    pub horizon: usize,
    pub n: usize,
    pub objective_nats: f64,
    pub constant_nats: f64,
    pub rate_total_nats: f64,
    pub rate_total_bits: f64,
    pub p_filt: Vec<MatrixRows>,
    pub pi: Vec<MatrixRows>,
    pub per_step: Vec<StepRow>,
    pub design: DesignBody,
    pub solver: SolverStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignDoc {
    pub schema: String,
    pub kind: String,
    pub horizon: usize,
    pub n: usize,
    #[serde(flatten)]
    pub body: DesignBody,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDoc {
    pub schema: String,
    pub kind: String,
    pub paths: u64,
    pub seed: u64,
    pub max_rel_deviation: f64,
    pub predicted: Vec<MatrixRows>,
    pub empirical_err_cov: Vec<MatrixRows>,
    pub distortion_series: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Command bodies (library level, reused by tests and the FFI crate)
// ---------------------------------------------------------------------------

fn solve_srd(problem: &SrdProblem, cfg: &SolverConfig) -> Result<SolverSolution> {
    let sol = solve(&problem.problem, cfg)?;
    match sol.status {
        SolverStatus::Optimal => Ok(sol),
        SolverStatus::Infeasible => Err(Error::Infeasible("solver reported infeasible".into())),
        SolverStatus::MaxIters => Err(Error::Numerical(format!(
            "iteration limit reached (mu = {:.3e})",
            sol.mu
        ))),
        SolverStatus::NumericalFailure => Err(Error::Numerical(format!(
            "solver failed (primal {:.3e}, dual {:.3e})",
            sol.residuals.primal, sol.residuals.dual
        ))),
    }
}

/// One row of the stationary-curve CSV.
#[derive(Clone, Debug)]
pub struct CurveRow {
    pub d: f64,
    pub rate_nats: Option<f64>,
    pub rank: Option<usize>,
    pub status: SolverStatus,
    pub iterations: usize,
    pub mu: Option<f64>,
}

/// Distortion grid, linear or log-spaced.
pub fn distortion_grid(
    d_min: f64,
    d_max: f64,
    points: usize,
    log_spacing: bool,
) -> Result<Vec<f64>> {
    if !(d_min > 0.0) || !(d_max >= d_min) || points == 0 {
        return Err(Error::InvalidModel(format!(
            "bad distortion grid: [{d_min}, {d_max}] with {points} points"
        )));
    }
    if points == 1 {
        return Ok(vec![d_min]);
    }
    let k = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let f = i as f64 / k;
            if log_spacing {
                (d_min.ln() + f * (d_max.ln() - d_min.ln())).exp()
            } else {
                d_min + f * (d_max - d_min)
            }
        })
        .collect())
}

/// Solves the stationary problem at every grid point (in parallel) and
/// extracts the sensor rank of each solution. Failures are recorded in-row
/// and the sweep continues.
pub fn stationary_curve(mf: &ModelFile, grid: &[f64], cfg: &SolverConfig) -> Result<Vec<CurveRow>> {
    if mf.model.horizon != Horizon::Stationary {
        return Err(Error::InvalidModel(
            "srd-curve requires a stationary model".into(),
        ));
    }
    let a = &mf.model.a[0];
    let w = &mf.model.w[0];
    let theta = &mf.spec.theta[0];
    if !crate::problems::is_detectable(a, theta) {
        return Err(Error::InvalidModel(
            "(A, Theta) is not detectable; the stationary SRD function is undefined for this pair"
                .into(),
        ));
    }
    let rows: Vec<CurveRow> = grid
        .par_iter()
        .map(|&d| {
            let attempt = || -> Result<(f64, usize, SolverSolution)> {
                let srd = build_stationary(a, w, theta, d)?;
                let sol = solve(&srd.problem, cfg)?;
                if sol.status != SolverStatus::Optimal {
                    return Ok((f64::NAN, 0, sol));
                }
                let sched = srd.decode(&sol)?;
                let design = synthesize(&mf.model, &sched, cfg.rank_tol, DEFAULT_SNR_CLIP)?;
                let rank = crate::synthesis::sensor_dimension_profile(&design)[0];
                Ok((sched.objective_nats, rank, sol))
            };
            match attempt() {
                Ok((rate, rank, sol)) if sol.status == SolverStatus::Optimal => CurveRow {
                    d,
                    rate_nats: Some(rate),
                    rank: Some(rank),
                    status: SolverStatus::Optimal,
                    iterations: sol.iterations,
                    mu: Some(sol.mu),
                },
                Ok((_, _, sol)) => CurveRow {
                    d,
                    rate_nats: None,
                    rank: None,
                    status: sol.status,
                    iterations: sol.iterations,
                    mu: None,
                },
                Err(_) => CurveRow {
                    d,
                    rate_nats: None,
                    rank: None,
                    status: SolverStatus::NumericalFailure,
                    iterations: 0,
                    mu: None,
                },
            }
        })
        .collect();
    Ok(rows)
}

/// Rates must be nonincreasing in D across solved rows.
pub fn curve_is_monotone(rows: &[CurveRow]) -> bool {
    let mut last = f64::INFINITY;
    for row in rows {
        if let Some(r) = row.rate_nats {
            if r > last + 1e-9 {
                return false;
            }
            last = r;
        }
    }
    true
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("D,rate_nats,rate_bits,rank,status,iters,mu_final\n");
    for r in rows {
        let rate_nats = r.rate_nats.map(|v| v.to_string()).unwrap_or_default();
        let rate_bits = r
            .rate_nats
            .map(|v| (v * NATS_TO_BITS).to_string())
            .unwrap_or_default();
        let rank = r.rank.map(|v| v.to_string()).unwrap_or_default();
        let mu = r.mu.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.d, rate_nats, rate_bits, rank, r.status, r.iterations, mu
        ));
    }
    out
}

/// Solves the finite-horizon problem of a model file and packages schedule,
/// design and per-step rates.
pub fn compute_schedule(mf: &ModelFile, cfg: &SolverConfig) -> Result<ScheduleDoc> {
    let t_len = mf
        .model
        .horizon_len()
        .ok_or_else(|| Error::InvalidModel("schedule requires a finite-horizon model".into()))?;
    let srd = match mf.spec.mode {
        DistortionMode::Hard(_) => build_finite_hard(&mf.model, &mf.spec)?,
        DistortionMode::Soft(_) => build_finite_soft(&mf.model, &mf.spec)?,
    };
    let sol = solve_srd(&srd, cfg)?;
    let sched = srd.decode(&sol)?;
    let design = synthesize(&mf.model, &sched, cfg.rank_tol, DEFAULT_SNR_CLIP)?;
    Ok(build_schedule_doc(mf, &sched, &design, &sol, t_len))
}

fn build_schedule_doc(
    mf: &ModelFile,
    sched: &CovarianceSchedule,
    design: &SensorDesign,
    sol: &SolverSolution,
    t_len: usize,
) -> ScheduleDoc {
    let rate_total_nats: f64 = design.rate_per_step_nats.iter().sum();
    let per_step = (0..t_len)
        .map(|t| {
            let distortion = frob_dot(mf.spec.theta_at(t), &design.p_filt[t]);
            let bound = match &mf.spec.mode {
                DistortionMode::Hard(d) => Some(d[t]),
                DistortionMode::Soft(_) => None,
            };
            StepRow {
                t: t + 1,
                rate_nats: design.rate_per_step_nats[t],
                rate_bits: design.rate_per_step_nats[t] * NATS_TO_BITS,
                rank: design.ranks[t],
                distortion,
                bound,
            }
        })
        .collect();
    ScheduleDoc {
        schema: SCHEMA_VERSION.to_string(),
        kind: "schedule".to_string(),
        horizon: t_len,
        n: mf.model.n(),
        objective_nats: sched.objective_nats,
        constant_nats: sched.constant_c,
        rate_total_nats,
        rate_total_bits: rate_total_nats * NATS_TO_BITS,
        p_filt: sched.p_filt.iter().map(matrix_to_rows).collect(),
        pi: sched.pi.iter().map(matrix_to_rows).collect(),
        per_step,
        design: DesignBody::from_design(design),
        solver: SolverStats {
            status: sol.status.to_string(),
            iterations: sol.iterations,
            mu: sol.mu,
        },
    }
}

/// Re-synthesizes a design from a saved schedule document (the embedded
/// design, if any, is ignored and recomputed).
pub fn synth_from_schedule(
    mf: &ModelFile,
    doc: &ScheduleDoc,
    cfg: &SolverConfig,
) -> Result<DesignDoc> {
    let p_filt = doc
        .p_filt
        .iter()
        .map(|rows| matrix_from_rows(rows, "schedule.p_filt"))
        .collect::<Result<Vec<_>>>()?;
    let pi = doc
        .pi
        .iter()
        .map(|rows| matrix_from_rows(rows, "schedule.pi"))
        .collect::<Result<Vec<_>>>()?;
    if matches!(mf.model.horizon_len(), Some(t) if t != p_filt.len()) {
        return Err(Error::Inconsistent(format!(
            "schedule has {} steps, model horizon is {:?}",
            p_filt.len(),
            mf.model.horizon_len()
        )));
    }
    let sched = CovarianceSchedule {
        p_filt,
        pi,
        objective_nats: doc.objective_nats,
        constant_c: doc.constant_nats,
    };
    let design = synthesize(&mf.model, &sched, cfg.rank_tol, DEFAULT_SNR_CLIP)?;
    Ok(DesignDoc {
        schema: SCHEMA_VERSION.to_string(),
        kind: "design".to_string(),
        horizon: sched.p_filt.len(),
        n: mf.model.n(),
        body: DesignBody::from_design(&design),
    })
}

/// Runs the Monte Carlo check of a design against a model.
pub fn simulate_design(
    mf: &ModelFile,
    body: &DesignBody,
    paths: u64,
    seed: u64,
) -> Result<ReportDoc> {
    let design = body.to_design(mf.model.n())?;
    let model = match mf.model.horizon {
        Horizon::Finite(_) => mf.model.clone(),
        Horizon::Stationary => mf.model.truncated(design.snr.len())?,
    };
    let report = crate::sim::simulate(&model, &design, Some(&mf.spec.theta), paths, seed)?;
    Ok(ReportDoc {
        schema: SCHEMA_VERSION.to_string(),
        kind: "simulation_report".to_string(),
        paths: report.paths,
        seed: report.seed,
        max_rel_deviation: report.max_rel_deviation,
        predicted: report.predicted.iter().map(matrix_to_rows).collect(),
        empirical_err_cov: report
            .empirical_err_cov
            .iter()
            .map(matrix_to_rows)
            .collect(),
        distortion_series: report.distortion_series,
    })
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Units {
    Bits,
    Nats,
}

#[derive(Clone, Copy, Debug, Args)]
pub struct SolverOpts {
    /// Relative duality-gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Central-path neighborhood size, in (0, 1).
    #[arg(long, default_value_t = 0.3)]
    pub gamma: f64,
    /// Barrier reduction rate, in (0, 1).
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    /// Iteration limit per solve.
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Relative eigenvalue tolerance for sensor rank decisions.
    #[arg(long, default_value_t = 1e-9)]
    pub rank_tol: f64,
}

impl SolverOpts {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            sigma: self.sigma,
            eps: self.eps,
            max_iters: self.max_iters,
            rank_tol: self.rank_tol,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "srdkit",
    version,
    about = "Sequential rate-distortion functions and optimal sensor synthesis for Gauss-Markov sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the stationary SRD function over a distortion grid (CSV output).
    SrdCurve {
        /// Model file (must be stationary).
        #[arg(long)]
        model: String,
        #[arg(long)]
        d_min: f64,
        #[arg(long)]
        d_max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Log-spaced grid instead of linear.
        #[arg(long)]
        log_spacing: bool,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<String>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Solve a finite-horizon model and emit schedule + design (JSON).
    Schedule {
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: Option<String>,
        /// Units for the summary line printed to stderr.
        #[arg(long, value_enum, default_value_t = Units::Bits)]
        units: Units,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Re-synthesize the sensor design from a saved schedule (JSON).
    Synth {
        #[arg(long)]
        model: String,
        /// Schedule document produced by `schedule`.
        #[arg(long)]
        schedule: String,
        #[arg(long)]
        out: Option<String>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Monte Carlo validation of a design against a model (JSON report).
    Simulate {
        #[arg(long)]
        model: String,
        /// Design document (or a schedule document with an embedded design).
        #[arg(long)]
        design: String,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Emit a bundled example model file (pendulum or satellite).
    Preset {
        /// Preset name: "pendulum" or "satellite".
        name: String,
        /// Discretization step for the Tustin transformation.
        #[arg(long)]
        dt: Option<f64>,
        /// Emit a finite-horizon variant with the preset's default
        /// distortion profile instead of the stationary model.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::Dimension(_)
        | Error::InvalidModel(_)
        | Error::Inconsistent(_)
        | Error::NotPositiveDefinite(_)
        | Error::Io(_) => 2,
        Error::Infeasible(_) => 3,
        Error::Numerical(_) | Error::GapClosed => 4,
    }
}

fn read_file(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {path}: {e}")))
}

fn emit(out: &Option<String>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Parse(format!("serialization failed: {e}")))
}

fn load_model(path: &str) -> Result<ModelFile> {
    parse_model_file(&read_file(path)?)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SrdCurve {
            model,
            d_min,
            d_max,
            points,
            log_spacing,
            jobs,
            out,
            solver,
        } => {
            let mf = load_model(&model)?;
            let grid = distortion_grid(d_min, d_max, points, log_spacing)?;
            let cfg = solver.config();
            let rows = if jobs > 0 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
                pool.install(|| stationary_curve(&mf, &grid, &cfg))?
            } else {
                stationary_curve(&mf, &grid, &cfg)?
            };
            if !curve_is_monotone(&rows) {
                eprintln!(
                    "warning: rate column is not monotone nonincreasing in D (solver anomaly)"
                );
            }
            emit(&out, &curve_to_csv(&rows))
        }
        Command::Schedule {
            model,
            out,
            units,
            solver,
        } => {
            let mf = load_model(&model)?;
            let doc = compute_schedule(&mf, &solver.config())?;
            match units {
                Units::Bits => eprintln!(
                    "total rate: {:.6} bits over {} steps",
                    doc.rate_total_bits, doc.horizon
                ),
                Units::Nats => eprintln!(
                    "total rate: {:.6} nats over {} steps",
                    doc.rate_total_nats, doc.horizon
                ),
            }
            emit(&out, &to_pretty_json(&doc)?)
        }
        Command::Synth {
            model,
            schedule,
            out,
            solver,
        } => {
            let mf = load_model(&model)?;
            let doc: ScheduleDoc = serde_json::from_str(&read_file(&schedule)?)
                .map_err(|e| Error::Parse(format!("schedule document: {e}")))?;
            let design = synth_from_schedule(&mf, &doc, &solver.config())?;
            emit(&out, &to_pretty_json(&design)?)
        }
        Command::Simulate {
            model,
            design,
            paths,
            seed,
            out,
        } => {
            let mf = load_model(&model)?;
            let text = read_file(&design)?;
            // Accept either a design document or a schedule document with an
            // embedded design.
            let body: DesignBody = match serde_json::from_str::<DesignDoc>(&text) {
                Ok(doc) => doc.body,
                Err(_) => serde_json::from_str::<ScheduleDoc>(&text)
                    .map(|d| d.design)
                    .map_err(|e| Error::Parse(format!("design document: {e}")))?,
            };
            let report = simulate_design(&mf, &body, paths, seed)?;
            emit(&out, &to_pretty_json(&report)?)
        }
        Command::Preset {
            name,
            dt,
            horizon,
            out,
        } => {
            let doc = crate::presets::preset(&name, dt, horizon)?;
            emit(&out, &to_pretty_json(&doc)?)
        }
    }
}

/// Entry point for the `srdkit` binary; returns the process exit code
/// (0 success, 2 parse error, 3 infeasible, 4 solver failure).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with its own formatting.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let lin = distortion_grid(1.0, 3.0, 3, false).unwrap();
        assert_eq!(lin, vec![1.0, 2.0, 3.0]);
        let log = distortion_grid(0.1, 10.0, 3, true).unwrap();
        assert!((log[1] - 1.0).abs() < 1e-12);
        assert!(distortion_grid(0.0, 1.0, 3, false).is_err());
    }

    #[test]
    fn csv_shape_and_failure_rows() {
        let rows = vec![
            CurveRow {
                d: 0.5,
                rate_nats: Some(0.25),
                rank: Some(2),
                status: SolverStatus::Optimal,
                iterations: 17,
                mu: Some(1e-9),
            },
            CurveRow {
                d: 1.0,
                rate_nats: None,
                rank: None,
                status: SolverStatus::MaxIters,
                iterations: 200,
                mu: None,
            },
        ];
        let csv = curve_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "D,rate_nats,rate_bits,rank,status,iters,mu_final"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.5,0.25,"));
        let second = lines.next().unwrap();
        assert_eq!(second, "1,,,,max_iters,200,");
        assert!(curve_is_monotone(&rows));
    }

    #[test]
    fn design_body_round_trip_with_empty_sensor() {
        let body = DesignBody {
            snr: vec![vec![vec![0.0, 0.0], vec![0.0, 0.0]]],
            c: vec![vec![]],
            v: vec![vec![]],
            ranks: vec![0],
            p_pred: vec![vec![vec![2.0, 0.0], vec![0.0, 2.0]]],
            p_filt: vec![vec![vec![2.0, 0.0], vec![0.0, 2.0]]],
            rate_per_step_nats: vec![0.0],
        };
        let design = body.to_design(2).unwrap();
        assert_eq!(design.c[0].shape(), (0, 2));
        let back = DesignBody::from_design(&design);
        let a = serde_json::to_string(&body).unwrap();
        let b = serde_json::to_string(&back).unwrap();
        assert_eq!(a, b);
    }
}
