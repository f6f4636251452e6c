//! Adaptive tracking control for strict-feedback second-order plants under
//! hard box constraints `|x₁| < x̄₁`, `|x₂| < x̄₂`.
//!
//! States are mapped through a bijective lifting `z = x̄ φ(x/x̄)` onto an
//! unconstrained space, an adaptive backstepping controller acts on the
//! lifted error dynamics, and the closed loop is integrated in the original
//! coordinates with a Lyapunov-based runtime certificate.
//!
//! ```
//! use constraint_lifting::{run, SimConfig};
//!
//! let cfg = SimConfig { t_final: 0.1, ..SimConfig::dc_motor_default() };
//! let traj = run(&cfg).unwrap();
//! assert!(traj.completed());
//! assert!(traj.samples.iter().all(|s| s.in_safe_set));
//! ```

pub mod controller;
pub mod error;
pub mod lifted;
pub mod lifting;
pub mod monitor;
pub mod plant;
pub mod simulator;

pub use controller::{ControlOutput, Controller, ControllerGains, EstimatorRates, EstimatorState, Reference};
pub use error::{Error, Result};
pub use lifted::{lifted_rhs, LiftedDynamics};
pub use lifting::{
    make_tanh_family, AlgebraicFamily, CoordinateFrame, FamilyKind, Lifting, LiftingFamily, SafeSet, TanhFamily,
    DOMAIN_GUARD,
};
pub use monitor::{
    adjudicate_p2_sign, certify, lyapunov, theta1_target, vdot_analytic, Certificate, SignAdjudication, Thresholds,
};
pub use plant::{
    check_assumptions, dc_motor, double_integrator, plant_rhs, AssumptionKind, AssumptionReport,
    AssumptionViolation, DcMotorParams, PlantDef, PlantShape, Sign, TrueParams,
};
pub use simulator::{run, run_lifted, AugmentedState, Coordinates, Sample, SimConfig, Simulator, Trajectory};
