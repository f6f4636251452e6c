//! Lyapunov function and trajectory-level stability/safety certificate.
//!
//! ```text
//! V = ½e₁² + 𝒱(ζ₂) + ½γ⁻¹|Θ₂|(p̂₂ − p₂)² + ½α⁻¹(Θ₁/x̄₂ − Θ̂₁)²
//! ```
//!
//! `Θ₁/x̄₂` is the value `Θ̂₁` has to reach for the drift term to cancel
//! exactly; it is `Θ₁` itself when `x̄₂ = 1`.
//!
//! The certificate turns the qualitative guarantees into checks on a logged
//! trajectory: the level set `V ≤ V(0)` is never left, `V` never increases
//! beyond integration noise, the logged `V̇` matches `−(√k₁e₁ − √k₂e₂)²`,
//! estimates stay bounded, and the final state sits at the equilibrium.

use std::fmt::Write as _;

use crate::controller::{Controller, ControllerGains, EstimatorState};
use crate::error::{ensure_finite, Result};
use crate::lifting::CoordinateFrame;
use crate::plant::{Sign, TrueParams};
use crate::simulator::{run, AugmentedState, SimConfig, Simulator, Trajectory};

/// Drift-parameter value that `Θ̂₁` is driven toward.
pub fn theta1_target(params: &TrueParams, xbar2: f64) -> f64 {
    params.theta1 / xbar2
}

pub fn lyapunov(controller: &Controller, frame: &CoordinateFrame, est: &EstimatorState, params: &TrueParams) -> Result<f64> {
    ensure_finite(est.p2_hat, "p2_hat")?;
    ensure_finite(est.theta1_hat, "theta1_hat")?;
    let gains = controller.gains();
    let lifting = controller.dynamics().lifting();
    let e1 = frame.z[0] - controller.reference().z1d();
    let barrier = lifting.family(1).vcal(frame.zeta[1]);
    let p2_err = est.p2_hat - params.p2();
    let theta1_err = theta1_target(params, lifting.safe_set().xbar2()) - est.theta1_hat;
    let v = 0.5 * e1 * e1
        + barrier
        + 0.5 / gains.gamma() * params.theta2.abs() * p2_err * p2_err
        + 0.5 / gains.alpha() * theta1_err * theta1_err;
    ensure_finite(v, "Lyapunov value")
}

/// `−(√k₁e₁ − √k₂e₂)²` with `k₂ = 1/k₁`.
pub fn vdot_analytic(e1: f64, e2: f64, gains: &ControllerGains) -> f64 {
    let r = gains.k1().sqrt() * e1 - gains.k2().sqrt() * e2;
    -(r * r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Allowed increase of `V` between samples, relative to `max(1, V(0))`.
    pub monotone_rel: f64,
    /// Sup-norm bound on `V̇_numeric − V̇_analytic`.
    pub vdot_identity: f64,
    /// Estimates must stay below `factor · (1 + V(0))`.
    pub estimate_bound_factor: f64,
    /// Bound on `|x₁(T) − x₁d|`.
    pub tracking: f64,
    /// Bound on the final `|e₁|`, `|e₂|`, `|u|`, `|z₂|` and the closed-loop
    /// residual.
    pub residual: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            monotone_rel: 1e-6,
            vdot_identity: 1e-3,
            estimate_bound_factor: 10.0,
            tracking: 0.02,
            residual: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyCheck {
    pub passed: bool,
    pub first_violation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneCheck {
    pub passed: bool,
    /// Largest `V(tₖ₊₁) − V(tₖ)`; negative when `V` strictly decreases.
    pub worst_increment: f64,
    pub worst_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub passed: bool,
    pub sup_p2_hat: f64,
    pub sup_theta1_hat: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCheck {
    pub passed: bool,
    pub e1: f64,
    pub e2: f64,
    pub u: f64,
    pub z2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub completed: bool,
    pub failure: Option<String>,
    pub failure_time: Option<f64>,
    pub samples: usize,
    pub v0: f64,
    pub safe_invariance: SafetyCheck,
    pub lyapunov_monotone: MonotoneCheck,
    /// `V(t) ≤ V(0)` and every component inside the ball implied by `V(0)`.
    pub level_set: SafetyCheck,
    pub vdot_identity_error: f64,
    pub vdot_identity_passed: bool,
    pub estimates_bounded: BoundCheck,
    pub tracking_error_final: f64,
    pub tracking_passed: bool,
    pub convergence: ConvergenceCheck,
    /// `‖closed-loop rhs‖∞` at the final state.
    pub equilibrium_residual: f64,
    pub equilibrium_passed: bool,
}

impl Certificate {
    pub fn all_passed(&self) -> bool {
        self.completed
            && self.safe_invariance.passed
            && self.lyapunov_monotone.passed
            && self.level_set.passed
            && self.vdot_identity_passed
            && self.estimates_bounded.passed
            && self.tracking_passed
            && self.convergence.passed
            && self.equilibrium_passed
    }

    /// Flat `key = value` lines.
    pub fn to_report(&self) -> String {
        let pf = |b: bool| if b { "pass" } else { "fail" };
        let opt = |t: Option<f64>| t.map_or_else(|| "none".to_string(), |t| format!("{t:.6}"));
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("all_passed", pf(self.all_passed()).into());
        kv("completed", self.completed.to_string());
        kv("failure", self.failure.clone().unwrap_or_else(|| "none".into()));
        kv("failure_time", opt(self.failure_time));
        kv("samples", self.samples.to_string());
        kv("v0", format!("{:.12e}", self.v0));
        kv("safe_invariance", pf(self.safe_invariance.passed).into());
        kv("safe_invariance.first_violation", opt(self.safe_invariance.first_violation));
        kv("lyapunov_monotone", pf(self.lyapunov_monotone.passed).into());
        kv("lyapunov_monotone.worst_increment", format!("{:.6e}", self.lyapunov_monotone.worst_increment));
        kv("lyapunov_monotone.worst_at", format!("{:.6}", self.lyapunov_monotone.worst_at));
        kv("level_set", pf(self.level_set.passed).into());
        kv("level_set.first_violation", opt(self.level_set.first_violation));
        kv("vdot_identity", pf(self.vdot_identity_passed).into());
        kv("vdot_identity.sup_error", format!("{:.6e}", self.vdot_identity_error));
        kv("estimates_bounded", pf(self.estimates_bounded.passed).into());
        kv("estimates_bounded.sup_p2_hat", format!("{:.6e}", self.estimates_bounded.sup_p2_hat));
        kv("estimates_bounded.sup_theta1_hat", format!("{:.6e}", self.estimates_bounded.sup_theta1_hat));
        kv("estimates_bounded.bound", format!("{:.6e}", self.estimates_bounded.bound));
        kv("tracking", pf(self.tracking_passed).into());
        kv("tracking.final_error", format!("{:.6e}", self.tracking_error_final));
        kv("convergence", pf(self.convergence.passed).into());
        kv("convergence.e1", format!("{:.6e}", self.convergence.e1));
        kv("convergence.e2", format!("{:.6e}", self.convergence.e2));
        kv("convergence.u", format!("{:.6e}", self.convergence.u));
        kv("convergence.z2", format!("{:.6e}", self.convergence.z2));
        kv("equilibrium", pf(self.equilibrium_passed).into());
        kv("equilibrium.residual", format!("{:.6e}", self.equilibrium_residual));
        s
    }
}

/// Check a (possibly truncated) trajectory against the stability and safety
/// guarantees.
pub fn certify(traj: &Trajectory, cfg: &SimConfig, thresholds: &Thresholds) -> Certificate {
    let params = cfg.plant.true_params();
    let samples = &traj.samples;
    let v0 = samples.first().map_or(f64::NAN, |s| s.v);
    let failure_time = traj.failure.as_ref().map(|e| e.time().unwrap_or(0.0));

    // A run that stopped early has left (or tried to leave) the guarded set.
    let first_outside = samples.iter().find(|s| !s.in_safe_set).map(|s| s.t);
    let safe_invariance = SafetyCheck {
        passed: first_outside.is_none() && traj.completed() && !samples.is_empty(),
        first_violation: first_outside.or(failure_time),
    };

    let tol = thresholds.monotone_rel * v0.abs().max(1.0);
    let (worst_increment, worst_at) = samples
        .windows(2)
        .map(|w| (w[1].v - w[0].v, w[1].t))
        .fold((f64::NEG_INFINITY, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    let lyapunov_monotone = MonotoneCheck {
        passed: samples.len() >= 2 && worst_increment < tol,
        worst_increment,
        worst_at,
    };

    let gains = &cfg.gains;
    let target = theta1_target(&params, cfg.lifting.safe_set().xbar2());
    let level = v0 + tol;
    let e1_ball = (2.0 * level).sqrt();
    let p2_ball = (2.0 * gains.gamma() * level / params.theta2.abs()).sqrt();
    let th_ball = (2.0 * gains.alpha() * level).sqrt();
    let first_outside_level = samples
        .iter()
        .find(|s| {
            !(s.v <= level
                && s.e1.abs() <= e1_ball
                && (s.p2_hat - params.p2()).abs() <= p2_ball
                && (target - s.theta1_hat).abs() <= th_ball)
        })
        .map(|s| s.t);
    let level_set = SafetyCheck {
        passed: first_outside_level.is_none() && !samples.is_empty(),
        first_violation: first_outside_level,
    };

    let vdot_identity_error = samples
        .iter()
        .map(|s| (s.vdot_numeric - s.vdot_analytic).abs())
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });

    let sup_p2_hat = samples.iter().map(|s| s.p2_hat.abs()).fold(0.0, f64::max);
    let sup_theta1_hat = samples.iter().map(|s| s.theta1_hat.abs()).fold(0.0, f64::max);
    let bound = thresholds.estimate_bound_factor * (1.0 + v0);
    let estimates_bounded = BoundCheck {
        passed: sup_p2_hat.is_finite() && sup_theta1_hat.is_finite() && sup_p2_hat < bound && sup_theta1_hat < bound,
        sup_p2_hat,
        sup_theta1_hat,
        bound,
    };

    let last = samples.last();
    let tracking_error_final = last.map_or(f64::NAN, |s| (s.x[0] - cfg.x1d).abs());
    let convergence = match last {
        Some(s) => {
            let r = thresholds.residual;
            ConvergenceCheck {
                passed: s.e1.abs() < r && s.e2.abs() < r && s.u.abs() < r && s.z[1].abs() < r,
                e1: s.e1,
                e2: s.e2,
                u: s.u,
                z2: s.z[1],
            }
        }
        None => ConvergenceCheck {
            passed: false,
            e1: f64::NAN,
            e2: f64::NAN,
            u: f64::NAN,
            z2: f64::NAN,
        },
    };

    let equilibrium_residual = last
        .and_then(|s| {
            let sim = Simulator::new(cfg).ok()?;
            let state = AugmentedState {
                plant: s.x,
                est: EstimatorState {
                    p2_hat: s.p2_hat,
                    theta1_hat: s.theta1_hat,
                },
            };
            let d = sim.rhs(&state).ok()?;
            Some(d.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
        })
        .unwrap_or(f64::NAN);

    Certificate {
        completed: traj.completed(),
        failure: traj.failure.as_ref().map(|e| e.to_string()),
        failure_time,
        samples: samples.len(),
        v0,
        safe_invariance,
        lyapunov_monotone,
        level_set,
        vdot_identity_error,
        vdot_identity_passed: vdot_identity_error < thresholds.vdot_identity,
        estimates_bounded,
        tracking_error_final,
        tracking_passed: tracking_error_final < thresholds.tracking,
        convergence,
        equilibrium_residual,
        equilibrium_passed: equilibrium_residual < thresholds.residual,
    }
}

/// Certificates for both signs of the `p̂₂` law on the same configuration.
#[derive(Debug, Clone)]
pub struct SignAdjudication {
    pub derived: Certificate,
    pub literal: Certificate,
    /// The sign whose run satisfies the Lyapunov checks (monotone `V` and
    /// the `V̇` identity); `Positive` when both or neither do.
    pub preferred: Sign,
}

impl SignAdjudication {
    fn lyapunov_ok(c: &Certificate) -> bool {
        c.completed && c.lyapunov_monotone.passed && c.vdot_identity_passed
    }

    pub fn to_report(&self) -> String {
        let pf = |b: bool| if b { "pass" } else { "fail" };
        let mut s = String::new();
        for (name, sign, c) in [("derived", Sign::Positive, &self.derived), ("literal", Sign::Negative, &self.literal)] {
            let _ = writeln!(s, "adjudication.{name}.p2_law_sign = {sign}");
            let _ = writeln!(s, "adjudication.{name}.completed = {}", c.completed);
            let _ = writeln!(s, "adjudication.{name}.lyapunov_monotone = {}", pf(c.lyapunov_monotone.passed));
            let _ = writeln!(
                s,
                "adjudication.{name}.worst_increment = {:.6e}",
                c.lyapunov_monotone.worst_increment
            );
            let _ = writeln!(s, "adjudication.{name}.vdot_identity = {}", pf(c.vdot_identity_passed));
            let _ = writeln!(s, "adjudication.{name}.vdot_sup_error = {:.6e}", c.vdot_identity_error);
            let _ = writeln!(s, "adjudication.{name}.safe_invariance = {}", pf(c.safe_invariance.passed));
            let _ = writeln!(s, "adjudication.{name}.tracking_error_final = {:.6e}", c.tracking_error_final);
        }
        let _ = writeln!(s, "adjudication.preferred_p2_law_sign = {}", self.preferred);
        s
    }
}

/// Run `cfg` with `p2_law_sign = +1` and `−1` and pick the sign for which the
/// Lyapunov identity holds.
pub fn adjudicate_p2_sign(cfg: &SimConfig, thresholds: &Thresholds) -> Result<SignAdjudication> {
    let with_sign = |sign| -> Result<Certificate> {
        let c = SimConfig {
            p2_law_sign: sign,
            ..cfg.clone()
        };
        Ok(certify(&run(&c)?, &c, thresholds))
    };
    let derived = with_sign(Sign::Positive)?;
    let literal = with_sign(Sign::Negative)?;
    let preferred = if !SignAdjudication::lyapunov_ok(&derived) && SignAdjudication::lyapunov_ok(&literal) {
        Sign::Negative
    } else {
        Sign::Positive
    };
    Ok(SignAdjudication {
        derived,
        literal,
        preferred,
    })
}
