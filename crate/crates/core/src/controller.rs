//! Adaptive backstepping law in lifted coordinates.
//!
//! With `e₁ = z₁ − z₁d`, `e₂ = Φ(ζ₁)ψ(ζ₂) + k₁e₁` and `k₂ = 1/k₁`:
//!
//! ```text
//! u     = −x̄₂ 𝒢₂⁻¹ p̂₂ (ℱ₂ Θ̂₁ + Φ k₂ e₂)
//! dp̂₂/dt = s γ σ(Θ₂) ψ(ζ₂) (ℱ₂ Θ̂₁ + Φ k₂ e₂)
//! dΘ̂₁/dt = α ψ(ζ₂) ℱ₂
//! ```
//!
//! where `s` is the configurable law sign (`+1` by default). The controller
//! is built from a [`PlantShape`] and never sees the parameter values.

use crate::error::{ensure_finite, Error, Result};
use crate::lifted::LiftedDynamics;
use crate::lifting::{CoordinateFrame, Lifting};
use crate::plant::{PlantShape, Sign};

/// `k₁`, `γ`, `α` and the assumed `sign(Θ₂)`. `k₂` is always `1/k₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    k1: f64,
    gamma: f64,
    alpha: f64,
    theta2_sign: Sign,
}

impl ControllerGains {
    pub fn new(k1: f64, gamma: f64, alpha: f64, theta2_sign: Sign) -> Result<Self> {
        for (name, v) in [("k1", k1), ("gamma", gamma), ("alpha", alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            k1,
            gamma,
            alpha,
            theta2_sign,
        })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        1.0 / self.k1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta2_sign(&self) -> Sign {
        self.theta2_sign
    }
}

/// `p̂₂` estimates `1/Θ₂`; `Θ̂₁` estimates the drift parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub p2_hat: f64,
    pub theta1_hat: f64,
}

impl EstimatorState {
    /// Initial estimates. `p̂₂(0) = 0` would pin `u` to zero and is rejected.
    pub fn initial(p2_hat: f64, theta1_hat: f64) -> Result<Self> {
        if !p2_hat.is_finite() || !theta1_hat.is_finite() {
            return Err(Error::NonFiniteInput("initial estimate"));
        }
        if p2_hat == 0.0 {
            return Err(Error::InvalidParams(
                "p2_hat(0) cannot be zero: the control law would be identically zero".into(),
            ));
        }
        Ok(Self { p2_hat, theta1_hat })
    }
}

impl Default for EstimatorState {
    fn default() -> Self {
        Self {
            p2_hat: 1.0,
            theta1_hat: 0.0,
        }
    }
}

/// Setpoint for `x₁` and its lifted image `z₁d = x̄₁ φ(x₁d / x̄₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    x1d: f64,
    chi1d: f64,
    z1d: f64,
}

impl Reference {
    pub fn new(x1d: f64, lifting: &Lifting) -> Result<Self> {
        let xbar1 = lifting.safe_set().xbar1();
        if !x1d.is_finite() || x1d.abs() >= xbar1 {
            return Err(Error::InvalidParams(format!("reference x1d = {x1d} must satisfy |x1d| < {xbar1}")));
        }
        let z1d = lifting.lift_component(0, x1d)?;
        Ok(Self {
            x1d,
            chi1d: x1d / xbar1,
            z1d,
        })
    }

    pub fn x1d(&self) -> f64 {
        self.x1d
    }

    pub fn chi1d(&self) -> f64 {
        self.chi1d
    }

    pub fn z1d(&self) -> f64 {
        self.z1d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorRates {
    pub dp2_hat: f64,
    pub dtheta1_hat: f64,
}

/// Everything the control law computes at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub e1: f64,
    pub e2: f64,
    pub u: f64,
    pub rates: EstimatorRates,
}

#[derive(Debug, Clone)]
pub struct Controller {
    dynamics: LiftedDynamics,
    gains: ControllerGains,
    reference: Reference,
    p2_law_sign: Sign,
}

impl Controller {
    pub fn new(shape: PlantShape, lifting: Lifting, gains: ControllerGains, reference: Reference) -> Self {
        Self {
            dynamics: LiftedDynamics::new(shape, lifting),
            gains,
            reference,
            p2_law_sign: Sign::Positive,
        }
    }

    /// Sign in front of `γ` in the `p̂₂` law. `Positive` is the one for which
    /// the Lyapunov derivative collapses to `−(√k₁e₁ − √k₂e₂)²`.
    pub fn with_p2_law_sign(mut self, sign: Sign) -> Self {
        self.p2_law_sign = sign;
        self
    }

    pub fn dynamics(&self) -> &LiftedDynamics {
        &self.dynamics
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn p2_law_sign(&self) -> Sign {
        self.p2_law_sign
    }

    /// `(e₁, e₂)`.
    pub fn errors(&self, frame: &CoordinateFrame) -> Result<(f64, f64)> {
        let e1 = frame.z[0] - self.reference.z1d;
        let phi = self.dynamics.big_phi(frame.zeta[0])?;
        let psi2 = self.dynamics.lifting().family(1).psi(frame.zeta[1]);
        Ok((e1, phi * psi2 + self.gains.k1 * e1))
    }

    pub fn control(&self, frame: &CoordinateFrame, est: &EstimatorState) -> Result<f64> {
        Ok(self.evaluate(frame, est)?.u)
    }

    pub fn estimator_rates(&self, frame: &CoordinateFrame, est: &EstimatorState) -> Result<EstimatorRates> {
        Ok(self.evaluate(frame, est)?.rates)
    }

    pub fn evaluate(&self, frame: &CoordinateFrame, est: &EstimatorState) -> Result<ControlOutput> {
        ensure_finite(est.p2_hat, "p2_hat")?;
        ensure_finite(est.theta1_hat, "theta1_hat")?;
        let d = &self.dynamics;
        let [z1, z2] = frame.z;
        let xbar2 = d.lifting().safe_set().xbar2();
        let k2 = self.gains.k2();

        let phi = d.big_phi(frame.zeta[0])?;
        let psi2 = d.lifting().family(1).psi(frame.zeta[1]);
        let f2 = d.f2_lifted(z1, z2)?;
        let g2 = d.g2_lifted(z1, z2)?;

        let e1 = z1 - self.reference.z1d;
        let e2 = phi * psi2 + self.gains.k1 * e1;
        let drive = f2 * est.theta1_hat + phi * k2 * e2;

        let u = -xbar2 / g2 * est.p2_hat * drive;
        let dp2_hat = self.p2_law_sign.as_f64() * self.gains.gamma * self.gains.theta2_sign.as_f64() * psi2 * drive;
        let dtheta1_hat = self.gains.alpha * psi2 * f2;

        Ok(ControlOutput {
            e1,
            e2,
            u: ensure_finite(u, "control output")?,
            rates: EstimatorRates { dp2_hat, dtheta1_hat },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::{SafeSet, TanhFamily, LiftingFamily};
    use crate::plant::{dc_motor, DcMotorParams};
    use approx::assert_relative_eq;

    // mpmath, 30 digits: e1 = ln 39, e2 = 0.9 + ln 39, u = −0.19 e2,
    // dΘ̂₁ = 0.81/0.19, dp̂₂ = 0.9 e2.
    const E1_T0: f64 = 3.663_561_646_129_646_4;
    const E2_T0: f64 = 4.563_561_646_129_646;
    const U_T0: f64 = -0.867_076_712_764_632_8;
    const DTHETA1_T0: f64 = 4.263_157_894_736_842;
    const DP2_T0: f64 = 4.107_205_481_516_682;

    fn setup(k1: f64, x1d: f64) -> (Controller, Lifting) {
        let plant = dc_motor(DcMotorParams::default()).unwrap();
        let lifting = Lifting::tanh(SafeSet::new(2.0, 1.0).unwrap());
        let gains = ControllerGains::new(k1, 1.0, 1.0, plant.shape().theta2_sign()).unwrap();
        let reference = Reference::new(x1d, &lifting).unwrap();
        (Controller::new(plant.shape().clone(), lifting.clone(), gains, reference), lifting)
    }

    #[test]
    fn gains_validate_and_k2_is_reciprocal() {
        assert!(ControllerGains::new(0.0, 1.0, 1.0, Sign::Positive).is_err());
        assert!(ControllerGains::new(1.0, -1.0, 1.0, Sign::Positive).is_err());
        assert!(ControllerGains::new(1.0, 1.0, f64::NAN, Sign::Positive).is_err());
        for k1 in [0.25, 1.0, 3.0] {
            let g = ControllerGains::new(k1, 1.0, 1.0, Sign::Positive).unwrap();
            assert_eq!(g.k2(), 1.0 / k1);
        }
    }

    #[test]
    fn reference_must_be_interior() {
        let l = Lifting::tanh(SafeSet::new(2.0, 1.0).unwrap());
        assert!(Reference::new(2.0, &l).is_err());
        assert!(Reference::new(-2.5, &l).is_err());
        let r = Reference::new(-1.9, &l).unwrap();
        assert_relative_eq!(r.chi1d(), -0.95);
        // 2 artanh(−0.95) = −ln 39
        assert_relative_eq!(r.z1d(), -E1_T0, max_relative = 1e-14);
    }

    #[test]
    fn zero_initial_p2_hat_is_rejected() {
        assert!(matches!(EstimatorState::initial(0.0, 0.0), Err(Error::InvalidParams(_))));
        assert!(EstimatorState::initial(1.0, 0.0).is_ok());
        assert_eq!(EstimatorState::default(), EstimatorState::initial(1.0, 0.0).unwrap());
    }

    #[test]
    fn errors_at_equilibrium_vanish() {
        let (c, l) = setup(1.0, 0.7);
        let f = l.lift([0.7, 0.0]).unwrap();
        assert_eq!(c.errors(&f).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn errors_at_initial_condition() {
        let (c, l) = setup(1.0, -1.9);
        let f = l.lift([0.0, 0.9]).unwrap();
        let (e1, e2) = c.errors(&f).unwrap();
        assert_relative_eq!(e1, E1_T0, max_relative = 1e-14);
        assert_relative_eq!(e2, E2_T0, max_relative = 1e-14);
    }

    #[test]
    fn e2_vanishes_when_kinematics_cancel_tracking_error() {
        let (c, l) = setup(1.0, 0.0);
        // x1 = 1 ⇒ e1 = 2 artanh(0.5); need Φ(ζ₁) ψ(ζ₂) = −e1 with Φ = 4/3.
        let e1 = l.lift_component(0, 1.0).unwrap();
        let x2 = -e1 * 0.75;
        let f = l.lift([1.0, x2]).unwrap();
        let (_, e2) = c.errors(&f).unwrap();
        assert!(e2.abs() < 1e-14, "{e2}");
    }

    #[test]
    fn control_at_initial_condition() {
        let (c, l) = setup(1.0, -1.9);
        let f = l.lift([0.0, 0.9]).unwrap();
        let out = c.evaluate(&f, &EstimatorState::default()).unwrap();
        assert_relative_eq!(out.u, U_T0, max_relative = 1e-13);
        assert_relative_eq!(out.rates.dtheta1_hat, DTHETA1_T0, max_relative = 1e-13);
        assert_relative_eq!(out.rates.dp2_hat, DP2_T0, max_relative = 1e-13);
    }

    #[test]
    fn literal_sign_flips_only_the_p2_rate() {
        let (c, l) = setup(1.0, -1.9);
        let flipped = c.clone().with_p2_law_sign(Sign::Negative);
        let f = l.lift([0.0, 0.9]).unwrap();
        let est = EstimatorState::default();
        let a = c.evaluate(&f, &est).unwrap();
        let b = flipped.evaluate(&f, &est).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.rates.dtheta1_hat, b.rates.dtheta1_hat);
        assert_eq!(a.rates.dp2_hat, -b.rates.dp2_hat);
    }

    #[test]
    fn zero_p2_hat_gives_zero_control() {
        let (c, l) = setup(1.0, -1.9);
        for x in [[0.0, 0.9], [1.2, -0.4], [-1.0, 0.0]] {
            let f = l.lift(x).unwrap();
            let est = EstimatorState { p2_hat: 0.0, theta1_hat: 3.0 };
            assert_eq!(c.control(&f, &est).unwrap(), 0.0);
        }
    }

    #[test]
    fn equilibrium_gives_zero_control_and_rates() {
        let (c, l) = setup(2.0, -1.2);
        let f = l.lift([-1.2, 0.0]).unwrap();
        let est = EstimatorState { p2_hat: 0.3, theta1_hat: -4.0 };
        let out = c.evaluate(&f, &est).unwrap();
        assert_eq!(out.u, 0.0);
        assert_eq!(out.rates.dp2_hat, 0.0);
        assert_eq!(out.rates.dtheta1_hat, 0.0);
    }

    #[test]
    fn rates_vanish_at_rest() {
        let (c, l) = setup(1.0, 0.5);
        let f = l.lift([-0.3, 0.0]).unwrap();
        let r = c.estimator_rates(&f, &EstimatorState::default()).unwrap();
        assert_eq!((r.dp2_hat, r.dtheta1_hat), (0.0, 0.0));
    }

    #[test]
    fn non_finite_estimate_is_rejected() {
        let (c, l) = setup(1.0, 0.5);
        let f = l.lift([0.1, 0.1]).unwrap();
        let est = EstimatorState { p2_hat: f64::NAN, theta1_hat: 0.0 };
        assert!(matches!(c.evaluate(&f, &est), Err(Error::NonFiniteInput(_))));
    }

    /// The tanh-specific closed form with `x̄₂ = 1`:
    /// `u = −sech²ζ₂ p̂₂ (cosh²ζ₂ tanh ζ₂ Θ̂₁ + cosh²ζ₁ e₂ / k₁)`.
    #[test]
    fn matches_tanh_closed_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let k1 = rng.gen_range(0.3..3.0);
            let x1d = rng.gen_range(-1.9..1.9);
            let (c, l) = setup(k1, x1d);
            let x = [rng.gen_range(-1.95..1.95), rng.gen_range(-0.95..0.95)];
            let est = EstimatorState {
                p2_hat: rng.gen_range(-3.0..3.0),
                theta1_hat: rng.gen_range(-10.0..10.0),
            };
            let f = l.lift(x).unwrap();
            let (zeta1, zeta2) = (f.zeta[0], f.zeta[1]);
            let (c1, c2) = (zeta1.cosh().powi(2), zeta2.cosh().powi(2));
            let e1 = f.z[0] - c.reference().z1d();
            let e2 = c1 * zeta2.tanh() + k1 * e1;
            let closed = -(1.0 / c2) * est.p2_hat * (c2 * zeta2.tanh() * est.theta1_hat + c1 * e2 / k1);
            let u = c.control(&f, &est).unwrap();
            assert!((u - closed).abs() <= 1e-10 * closed.abs().max(1.0), "{u} vs {closed}");
            let dth = TanhFamily.psi(zeta2).powi(2) * c2;
            let rates = c.estimator_rates(&f, &est).unwrap();
            assert!((rates.dtheta1_hat - dth).abs() <= 1e-10 * dth.max(1.0));
        }
    }
}
