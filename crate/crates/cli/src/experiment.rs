//! Single runs and sweeps, with their on-disk artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use constraint_lifting::{
    adjudicate_p2_sign, certify, check_assumptions, run, theta1_target, AssumptionReport, Certificate,
    SignAdjudication, SimConfig, Thresholds, Trajectory,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, SweepPoint};
use crate::plot;

pub const TRACE_HEADER: [&str; 13] = [
    "t",
    "x1",
    "x2",
    "z1",
    "z2",
    "e1",
    "e2",
    "u",
    "p2_hat",
    "theta1_hat",
    "V",
    "Vdot_num",
    "Vdot_analytic",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |source| RunError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn num(v: f64) -> String {
    format!("{v:.15e}")
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), RunError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trace(path: &Path, traj: &Trajectory) -> Result<(), RunError> {
    write_rows(
        path,
        &TRACE_HEADER,
        traj.samples.iter().map(|s| {
            [
                s.t,
                s.x[0],
                s.x[1],
                s.z[0],
                s.z[1],
                s.e1,
                s.e2,
                s.u,
                s.p2_hat,
                s.theta1_hat,
                s.v,
                s.vdot_numeric,
                s.vdot_analytic,
            ]
            .map(num)
            .to_vec()
        }),
    )
}

/// `t, x1, x2, u, x1d`.
pub fn write_states(path: &Path, traj: &Trajectory, x1d: f64) -> Result<(), RunError> {
    write_rows(
        path,
        &["t", "x1", "x2", "u", "x1d"],
        traj.samples.iter().map(|s| [s.t, s.x[0], s.x[1], s.u, x1d].map(num).to_vec()),
    )
}

/// `log10` of the absolute estimation errors; exact zeros are floored at the
/// smallest normal double.
pub fn write_estimation_errors(path: &Path, traj: &Trajectory, cfg: &SimConfig) -> Result<(), RunError> {
    let params = cfg.plant.true_params();
    let target = theta1_target(&params, cfg.lifting.safe_set().xbar2());
    let lg = |e: f64| e.abs().max(f64::MIN_POSITIVE).log10();
    write_rows(
        path,
        &["t", "log10_abs_theta1_error", "log10_abs_p2_error"],
        traj.samples
            .iter()
            .map(|s| [s.t, lg(s.theta1_hat - target), lg(s.p2_hat - params.p2())].map(num).to_vec()),
    )
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub certificate: Certificate,
    pub adjudication: Option<SignAdjudication>,
    pub out_dir: PathBuf,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.certificate.all_passed()
    }
}

/// Run one configuration and write `trace.csv`, `states.csv`,
/// `estimation_errors.csv`, `cert.txt` and optionally `plot.svg` to `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome, RunError> {
    let sim = cfg.sim_config()?;
    let thresholds = cfg.thresholds.build()?;
    let traj = run(&sim).map_err(|e| RunError::Config(ConfigError::Invalid(e.to_string())))?;
    let certificate = certify(&traj, &sim, &thresholds);
    let adjudication = if cfg.controller.adjudicate_sign {
        Some(adjudicate_p2_sign(&sim, &thresholds).map_err(|e| RunError::Config(ConfigError::Invalid(e.to_string())))?)
    } else {
        None
    };

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_trace(&out_dir.join("trace.csv"), &traj)?;
    write_states(&out_dir.join("states.csv"), &traj, sim.x1d)?;
    write_estimation_errors(&out_dir.join("estimation_errors.csv"), &traj, &sim)?;

    let mut report = format!(
        "plant = {}\np2_law_sign = {}\n",
        sim.plant.shape().name(),
        sim.p2_law_sign
    );
    report.push_str(&certificate.to_report());
    if let Some(a) = &adjudication {
        report.push_str(&a.to_report());
    }
    let cert_path = out_dir.join("cert.txt");
    fs::write(&cert_path, report).map_err(io_err(&cert_path))?;

    if cfg.output.svg {
        let svg_path = out_dir.join("plot.svg");
        fs::write(&svg_path, plot::render(&traj, &sim)).map_err(io_err(&svg_path))?;
    }

    Ok(ExperimentOutcome {
        certificate,
        adjudication,
        out_dir: out_dir.to_path_buf(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    InvalidConfig,
    /// The run stopped before `t_final`.
    Aborted,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::InvalidConfig => "invalid-config",
            RowStatus::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub status: RowStatus,
    pub message: String,
    pub tracking_error_final: f64,
    pub worst_v_increment: f64,
    pub safe: bool,
    pub sup_p2_hat: f64,
    pub sup_theta1_hat: f64,
}

fn sweep_row(base: &ExperimentConfig, thresholds: &Thresholds, point: SweepPoint) -> SweepRow {
    let empty = |status, message: String| SweepRow {
        point,
        status,
        message,
        tracking_error_final: f64::NAN,
        worst_v_increment: f64::NAN,
        safe: false,
        sup_p2_hat: f64::NAN,
        sup_theta1_hat: f64::NAN,
    };
    let sim = match base.with_point(&point).sim_config() {
        Ok(s) => s,
        Err(e) => return empty(RowStatus::InvalidConfig, e.to_string()),
    };
    let traj = match run(&sim) {
        Ok(t) => t,
        Err(e) => return empty(RowStatus::InvalidConfig, e.to_string()),
    };
    let c = certify(&traj, &sim, thresholds);
    SweepRow {
        point,
        status: if c.completed { RowStatus::Ok } else { RowStatus::Aborted },
        message: c.failure.clone().unwrap_or_default(),
        tracking_error_final: c.tracking_error_final,
        worst_v_increment: c.lyapunov_monotone.worst_increment,
        safe: c.safe_invariance.passed,
        sup_p2_hat: c.estimates_bounded.sup_p2_hat,
        sup_theta1_hat: c.estimates_bounded.sup_theta1_hat,
    }
}

/// Evaluate every sweep point in parallel; rows come back in sweep order.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, RunError> {
    let thresholds = cfg.thresholds.build()?;
    Ok(cfg
        .sweep_points()
        .into_par_iter()
        .map(|p| sweep_row(cfg, &thresholds, p))
        .collect())
}

pub const SWEEP_HEADER: [&str; 14] = [
    "index",
    "k1",
    "gamma",
    "alpha",
    "x1d",
    "x1_0",
    "x2_0",
    "status",
    "tracking_error_final",
    "worst_v_increment",
    "safe",
    "sup_p2_hat",
    "sup_theta1_hat",
    "message",
];

/// Run the sweep and write `sweep.csv` to `out_dir`.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<SweepRow>, RunError> {
    let rows = sweep_rows(cfg)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_rows(
        &out_dir.join("sweep.csv"),
        &SWEEP_HEADER,
        rows.iter().enumerate().map(|(i, r)| {
            let p = r.point;
            let mut rec = vec![i.to_string()];
            rec.extend([p.k1, p.gamma, p.alpha, p.x1d, p.x1_0, p.x2_0].map(num));
            rec.push(r.status.as_str().to_string());
            rec.push(num(r.tracking_error_final));
            rec.push(num(r.worst_v_increment));
            rec.push(r.safe.to_string());
            rec.push(num(r.sup_p2_hat));
            rec.push(num(r.sup_theta1_hat));
            rec.push(r.message.clone());
            rec
        }),
    )?;
    Ok(rows)
}

pub fn assumptions(cfg: &ExperimentConfig, grid_n: usize) -> Result<AssumptionReport, RunError> {
    let plant = cfg.plant.build()?;
    let safe = cfg.safe_set()?;
    check_assumptions(plant.shape(), &safe, grid_n).map_err(|e| RunError::Config(ConfigError::Invalid(e.to_string())))
}
