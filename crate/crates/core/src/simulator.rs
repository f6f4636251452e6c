//! Fixed-step RK4 integration of the closed loop.
//!
//! The integrated state is `(x₁, x₂, p̂₂, Θ̂₁)`; controller output and
//! estimator rates are re-evaluated at every RK4 stage. Stage states that
//! reach the guard band around the safe-set boundary abort the step.
//! [`run_lifted`] integrates the same loop in `(z₁, z₂, p̂₂, Θ̂₁)` through
//! the lifted vector field and serves as an independent cross-check.

use crate::controller::{Controller, ControllerGains, EstimatorState, Reference};
use crate::error::{Error, Result};
use crate::lifted::lifted_rhs;
use crate::lifting::{CoordinateFrame, Lifting, SafeSet};
use crate::monitor::{lyapunov, vdot_analytic};
use crate::plant::{dc_motor, DcMotorParams, PlantDef, Sign, TrueParams};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub plant: PlantDef,
    pub lifting: Lifting,
    pub gains: ControllerGains,
    pub x1d: f64,
    pub x0: [f64; 2],
    pub est0: EstimatorState,
    pub dt: f64,
    pub t_final: f64,
    /// Record every `log_stride`-th step.
    pub log_stride: usize,
    pub p2_law_sign: Sign,
    /// `false` freezes the estimates at `est0`.
    pub adapt: bool,
}

impl SimConfig {
    /// DC motor (default constants) on `(-2, 2) × (-1, 1)` with the tanh
    /// family, `x(0) = (0, 0.9)`, `x₁d = −1.9`, `k₁ = γ = α = 1`,
    /// `p̂₂(0) = 1`, `Θ̂₁(0) = 0`, `dt = 1 ms`, 30 s.
    pub fn dc_motor_default() -> Self {
        let plant = dc_motor(DcMotorParams::default()).expect("default motor constants are valid");
        let sign = plant.shape().theta2_sign();
        Self {
            plant,
            lifting: Lifting::tanh(SafeSet::new(2.0, 1.0).expect("valid bounds")),
            gains: ControllerGains::new(1.0, 1.0, 1.0, sign).expect("valid gains"),
            x1d: -1.9,
            x0: [0.0, 0.9],
            est0: EstimatorState::default(),
            dt: 1e-3,
            t_final: 30.0,
            log_stride: 1,
            p2_law_sign: Sign::Positive,
            adapt: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return bad(format!("t_final must be at least dt, got {}", self.t_final));
        }
        if self.log_stride == 0 {
            return bad("log_stride must be at least 1".into());
        }
        let safe = self.lifting.safe_set();
        if !self.x0.iter().all(|v| v.is_finite()) || !safe.contains_guarded(self.x0[0], self.x0[1]) {
            return bad(format!(
                "initial state {:?} is not strictly inside the safe set (-{}, {}) x (-{}, {})",
                self.x0,
                safe.xbar1(),
                safe.xbar1(),
                safe.xbar2(),
                safe.xbar2()
            ));
        }
        if !(self.x1d.is_finite() && self.x1d.abs() < safe.xbar1()) {
            return bad(format!("reference x1d = {} must satisfy |x1d| < {}", self.x1d, safe.xbar1()));
        }
        EstimatorState::initial(self.est0.p2_hat, self.est0.theta1_hat).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Controller built from the plant's shape only.
    pub fn controller(&self) -> Result<Controller> {
        let reference = Reference::new(self.x1d, &self.lifting)?;
        Ok(Controller::new(self.plant.shape().clone(), self.lifting.clone(), self.gains, reference)
            .with_p2_law_sign(self.p2_law_sign))
    }
}

/// Integrated state, `(x₁, x₂)` or `(z₁, z₂)` followed by the estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub plant: [f64; 2],
    pub est: EstimatorState,
}

impl AugmentedState {
    fn to_array(self) -> [f64; 4] {
        [self.plant[0], self.plant[1], self.est.p2_hat, self.est.theta1_hat]
    }

    fn from_array(y: [f64; 4]) -> Self {
        Self {
            plant: [y[0], y[1]],
            est: EstimatorState {
                p2_hat: y[2],
                theta1_hat: y[3],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: [f64; 2],
    pub chi: [f64; 2],
    pub z: [f64; 2],
    pub zeta: [f64; 2],
    pub e1: f64,
    pub e2: f64,
    pub u: f64,
    pub p2_hat: f64,
    pub theta1_hat: f64,
    pub v: f64,
    pub vdot_analytic: f64,
    /// Finite-difference derivative of the logged `v`; filled in after the run.
    pub vdot_numeric: f64,
    pub in_safe_set: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Set when integration stopped before `t_final`.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Second-order finite differences of `v` (centered inside, one-sided at
    /// the ends).
    fn fill_vdot_numeric(&mut self) {
        let n = self.samples.len();
        let v: Vec<f64> = self.samples.iter().map(|s| s.v).collect();
        let t: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        for i in 0..n {
            let d = if n < 2 {
                f64::NAN
            } else if n == 2 {
                (v[1] - v[0]) / (t[1] - t[0])
            } else if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (t[2] - t[0])
            } else if i == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (t[n - 1] - t[n - 3])
            } else {
                (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1])
            };
            self.samples[i].vdot_numeric = d;
        }
    }
}

fn rk4(y: [f64; 4], h: f64, mut f: impl FnMut([f64; 4]) -> Result<[f64; 4]>) -> Result<[f64; 4]> {
    let add = |a: [f64; 4], b: [f64; 4], s: f64| std::array::from_fn(|i| a[i] + s * b[i]);
    let k1 = f(y)?;
    let k2 = f(add(y, k1, h / 2.0))?;
    let k3 = f(add(y, k2, h / 2.0))?;
    let k4 = f(add(y, k3, h))?;
    Ok(std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Which coordinates the plant part of the state is integrated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    Original,
    Lifted,
}

pub struct Simulator<'a> {
    cfg: &'a SimConfig,
    controller: Controller,
    params: TrueParams,
    coords: Coordinates,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a SimConfig) -> Result<Self> {
        Self::with_coordinates(cfg, Coordinates::Original)
    }

    pub fn with_coordinates(cfg: &'a SimConfig, coords: Coordinates) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            controller: cfg.controller()?,
            params: cfg.plant.true_params(),
            coords,
        })
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn initial_state(&self) -> Result<AugmentedState> {
        let plant = match self.coords {
            Coordinates::Original => self.cfg.x0,
            Coordinates::Lifted => self.cfg.lifting.lift(self.cfg.x0)?.z,
        };
        Ok(AugmentedState { plant, est: self.cfg.est0 })
    }

    fn frame(&self, plant: [f64; 2]) -> Result<CoordinateFrame> {
        match self.coords {
            Coordinates::Original => self.cfg.lifting.lift(plant),
            Coordinates::Lifted => self.cfg.lifting.unlift(plant),
        }
    }

    /// Right-hand side of the augmented closed loop.
    pub fn rhs(&self, state: &AugmentedState) -> Result<[f64; 4]> {
        let frame = self.frame(state.plant)?;
        let out = self.controller.evaluate(&frame, &state.est)?;
        let plant_dot = match self.coords {
            Coordinates::Original => self.cfg.plant.rhs(state.plant, out.u)?,
            Coordinates::Lifted => lifted_rhs(self.controller.dynamics(), &self.params, state.plant, out.u)?,
        };
        let (dp2, dth1) = if self.cfg.adapt {
            (out.rates.dp2_hat, out.rates.dtheta1_hat)
        } else {
            (0.0, 0.0)
        };
        let d = [plant_dot[0], plant_dot[1], dp2, dth1];
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::NonFiniteInput("closed-loop derivative"))
        }
    }

    /// One RK4 step from time `t`.
    pub fn step(&self, t: f64, state: &AugmentedState) -> Result<AugmentedState> {
        let y = rk4(state.to_array(), self.cfg.dt, |y| self.rhs(&AugmentedState::from_array(y)))
            .and_then(|y| {
                let next = AugmentedState::from_array(y);
                // the end point is checked the same way as the stages
                self.frame(next.plant)?;
                if y.iter().all(|v| v.is_finite()) {
                    Ok(y)
                } else {
                    Err(Error::NonFiniteInput("integrated state"))
                }
            })
            .map_err(|source| Error::StepRejected {
                t,
                source: Box::new(source),
            })?;
        Ok(AugmentedState::from_array(y))
    }

    pub fn sample(&self, t: f64, state: &AugmentedState) -> Result<Sample> {
        let frame = self.frame(state.plant)?;
        let out = self.controller.evaluate(&frame, &state.est)?;
        let v = lyapunov(&self.controller, &frame, &state.est, &self.params)?;
        Ok(Sample {
            t,
            x: frame.x,
            chi: frame.chi,
            z: frame.z,
            zeta: frame.zeta,
            e1: out.e1,
            e2: out.e2,
            u: out.u,
            p2_hat: state.est.p2_hat,
            theta1_hat: state.est.theta1_hat,
            v,
            vdot_analytic: vdot_analytic(out.e1, out.e2, self.controller.gains()),
            vdot_numeric: f64::NAN,
            in_safe_set: self.cfg.lifting.safe_set().contains(frame.x[0], frame.x[1]),
        })
    }

    /// Integrate to `t_final` or the first failure.
    pub fn run(&self) -> Trajectory {
        let mut traj = Trajectory::default();
        let steps = self.cfg.steps();
        let stride = self.cfg.log_stride;
        traj.samples.reserve(steps / stride + 1);

        let mut state = match self.initial_state() {
            Ok(s) => s,
            Err(e) => {
                traj.failure = Some(e);
                return traj;
            }
        };
        let record = |traj: &mut Trajectory, t: f64, state: &AugmentedState| match self.sample(t, state) {
            Ok(s) => {
                traj.samples.push(s);
                true
            }
            Err(source) => {
                traj.failure = Some(Error::StepRejected {
                    t,
                    source: Box::new(source),
                });
                false
            }
        };

        if record(&mut traj, 0.0, &state) {
            for k in 0..steps {
                let t = k as f64 * self.cfg.dt;
                match self.step(t, &state) {
                    Ok(next) => state = next,
                    Err(e) => {
                        traj.failure = Some(e);
                        break;
                    }
                }
                if (k + 1) % stride == 0 && !record(&mut traj, (k + 1) as f64 * self.cfg.dt, &state) {
                    break;
                }
            }
        }
        traj.fill_vdot_numeric();
        traj
    }
}

/// Closed-loop run in the original coordinates. Configuration errors are
/// returned; failures during integration end up in [`Trajectory::failure`].
pub fn run(cfg: &SimConfig) -> Result<Trajectory> {
    Ok(Simulator::new(cfg)?.run())
}

/// Same closed loop integrated in lifted coordinates through the lifted
/// vector field.
pub fn run_lifted(cfg: &SimConfig) -> Result<Trajectory> {
    Ok(Simulator::with_coordinates(cfg, Coordinates::Lifted)?.run())
}
