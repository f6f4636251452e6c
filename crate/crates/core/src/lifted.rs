//! Plant vector fields expressed in lifted coordinates:
//!
//! ```text
//! ż₁ = 𝒢₁(z₁,z₂)
//! ż₂ = ℱ₂(z₁,z₂) Θ₁ + 𝒢₂(z₁,z₂) u Θ₂
//! ```

use crate::error::{ensure_finite, Error, Result};
use crate::lifting::Lifting;
use crate::plant::{PlantShape, TrueParams};

#[derive(Debug, Clone)]
pub struct LiftedDynamics {
    shape: PlantShape,
    lifting: Lifting,
}

fn nonsingular(value: f64, what: &'static str) -> Result<f64> {
    if value == 0.0 || !value.is_finite() {
        Err(Error::SingularityDetected { what, value })
    } else {
        Ok(value)
    }
}

impl LiftedDynamics {
    pub fn new(shape: PlantShape, lifting: Lifting) -> Self {
        Self { shape, lifting }
    }

    pub fn shape(&self) -> &PlantShape {
        &self.shape
    }

    pub fn lifting(&self) -> &Lifting {
        &self.lifting
    }

    /// Back to `(x₁, x₂) = (x̄₁ψ(ζ₁), x̄₂ψ(ζ₂))` together with `(ψ(ζ₁), ψ(ζ₂))`.
    fn unlifted(&self, z1: f64, z2: f64) -> Result<([f64; 2], [f64; 2])> {
        ensure_finite(z1, "z1")?;
        ensure_finite(z2, "z2")?;
        let [xbar1, xbar2] = self.lifting.safe_set().bounds();
        let psi = [
            self.lifting.family(0).psi(z1 / xbar1),
            self.lifting.family(1).psi(z2 / xbar2),
        ];
        Ok(([xbar1 * psi[0], xbar2 * psi[1]], psi))
    }

    /// `∂φ/∂χ` at `χ₂ = ψ(ζ₂)`.
    fn dphi2(&self, psi2: f64) -> f64 {
        self.lifting.family(1).dphi(psi2)
    }

    /// `Φ(ζ₁) = [∂φ/∂χ₁](ψ(ζ₁)) · g₁(x̄₁ψ(ζ₁)) · x̄₂`.
    pub fn big_phi(&self, zeta1: f64) -> Result<f64> {
        ensure_finite(zeta1, "zeta1")?;
        let [xbar1, xbar2] = self.lifting.safe_set().bounds();
        let fam = self.lifting.family(0);
        let chi1 = fam.psi(zeta1);
        nonsingular(fam.dphi(chi1) * self.shape.g1(xbar1 * chi1) * xbar2, "Phi")
    }

    /// `𝒢₁ = Φ(ζ₁) ψ(ζ₂)`.
    pub fn g1_lifted(&self, z1: f64, z2: f64) -> Result<f64> {
        let (_, psi) = self.unlifted(z1, z2)?;
        let phi = self.big_phi(z1 / self.lifting.safe_set().xbar1())?;
        Ok(phi * psi[1])
    }

    /// `ℱ₂ = [∂φ/∂χ₂](ψ(ζ₂)) · f₂(x₁, x₂)`.
    pub fn f2_lifted(&self, z1: f64, z2: f64) -> Result<f64> {
        let (x, psi) = self.unlifted(z1, z2)?;
        let value = self.dphi2(psi[1]) * self.shape.f2(x[0], x[1]);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::SingularityDetected { what: "F2", value })
        }
    }

    /// `𝒢₂ = [∂φ/∂χ₂](ψ(ζ₂)) · g₂(x₁, x₂)`, never zero.
    pub fn g2_lifted(&self, z1: f64, z2: f64) -> Result<f64> {
        let (x, psi) = self.unlifted(z1, z2)?;
        nonsingular(self.dphi2(psi[1]) * self.shape.g2(x[0], x[1]), "G2")
    }
}

/// Lifted plant vector field driven by the true parameters.
pub fn lifted_rhs(d: &LiftedDynamics, params: &TrueParams, z: [f64; 2], u: f64) -> Result<[f64; 2]> {
    ensure_finite(u, "control input")?;
    let g1 = d.g1_lifted(z[0], z[1])?;
    let f2 = d.f2_lifted(z[0], z[1])?;
    let g2 = d.g2_lifted(z[0], z[1])?;
    Ok([g1, f2 * params.theta1 + g2 * u * params.theta2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::{FamilyKind, LiftingFamily, SafeSet, TanhFamily};
    use crate::plant::{dc_motor, DcMotorParams, PlantDef};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn motor() -> (LiftedDynamics, TrueParams) {
        let p = dc_motor(DcMotorParams::default()).unwrap();
        let l = Lifting::tanh(SafeSet::new(2.0, 1.0).unwrap());
        (LiftedDynamics::new(p.shape().clone(), l), p.true_params())
    }

    const ATANH_09: f64 = 1.472_219_489_583_220_2;

    #[test]
    fn big_phi_examples() {
        let (d, _) = motor();
        assert_eq!(d.big_phi(0.0).unwrap(), 1.0);
        assert_relative_eq!(d.big_phi(0.5f64.atanh()).unwrap(), 4.0 / 3.0, max_relative = 1e-14);
        for zeta in [-3.0, -0.2, 0.0, 1.0, 4.0] {
            assert!(d.big_phi(zeta).unwrap() > 0.0);
        }
    }

    #[test]
    fn big_phi_uses_both_bounds() {
        let p = dc_motor(DcMotorParams::default()).unwrap();
        let d = LiftedDynamics::new(p.shape().clone(), Lifting::tanh(SafeSet::new(2.0, 3.0).unwrap()));
        assert_eq!(d.big_phi(0.0).unwrap(), 3.0);
    }

    #[test]
    fn dphi_at_lifted_point_is_cosh_squared() {
        for zeta in [-4.0, -1.3, 0.0, 0.4, 2.5, 6.0] {
            let c = f64::cosh(zeta);
            assert_relative_eq!(TanhFamily.dphi(TanhFamily.psi(zeta)), c * c, max_relative = 1e-9);
        }
    }

    #[test]
    fn g1_lifted_examples() {
        let (d, _) = motor();
        for z1 in [-3.0, 0.0, 2.2] {
            assert_eq!(d.g1_lifted(z1, 0.0).unwrap(), 0.0);
        }
        assert_relative_eq!(d.g1_lifted(0.0, ATANH_09).unwrap(), 0.9, max_relative = 1e-14);
        assert!(d.g1_lifted(0.7, -0.3).unwrap() < 0.0);
    }

    #[test]
    fn f2_lifted_examples() {
        let (d, _) = motor();
        assert_eq!(d.f2_lifted(1.3, 0.0).unwrap(), 0.0);
        // 0.9 / 0.19
        assert_relative_eq!(d.f2_lifted(0.0, ATANH_09).unwrap(), 4.736_842_105_263_158, max_relative = 1e-12);
        for z2 in [-2.0, -0.1, 0.1, 2.0] {
            assert_eq!(d.f2_lifted(0.5, z2).unwrap().signum(), f64::signum(z2));
        }
    }

    #[test]
    fn g2_lifted_examples() {
        let (d, _) = motor();
        assert_eq!(d.g2_lifted(0.0, 0.0).unwrap(), 1.0);
        // 1 / 0.19
        assert_relative_eq!(d.g2_lifted(0.0, ATANH_09).unwrap(), 5.263_157_894_736_842, max_relative = 1e-12);
    }

    #[test]
    fn lifted_rhs_examples() {
        let (d, params) = motor();
        assert_eq!(lifted_rhs(&d, &params, [-3.66, 0.0], 0.0).unwrap(), [0.0, 0.0]);
        let r = lifted_rhs(&d, &params, [0.0, ATANH_09], 0.0).unwrap();
        assert_relative_eq!(r[0], 0.9, max_relative = 1e-14);
        // (0.9 / 0.19) · (−9.99)
        assert_relative_eq!(r[1], -47.321_052_631_578_95, max_relative = 1e-12);
    }

    #[test]
    fn singular_input_gain_is_detected() {
        let p = PlantDef::new(
            "g2_zero_at_origin",
            Arc::new(|_| 1.0),
            Arc::new(|_, x2| x2),
            Arc::new(|x1, _| x1),
            -1.0,
            1.0,
        )
        .unwrap();
        let d = LiftedDynamics::new(p.shape().clone(), Lifting::tanh(SafeSet::new(1.0, 1.0).unwrap()));
        assert!(matches!(d.g2_lifted(0.0, 0.3), Err(Error::SingularityDetected { what: "G2", .. })));
        assert!(lifted_rhs(&d, &p.true_params(), [0.0, 0.3], 1.0).is_err());
    }

    #[test]
    fn saturated_lift_is_singular() {
        let (d, _) = motor();
        assert!(matches!(d.big_phi(1e3), Err(Error::SingularityDetected { .. })));
    }

    /// Lifted field against the chain-rule pushforward of the x-space field,
    /// with the Jacobian of `x ↦ z` taken by central differences.
    #[test]
    fn lifted_rhs_matches_pushforward() {
        let p = dc_motor(DcMotorParams::default()).unwrap();
        for kind in [FamilyKind::Tanh, FamilyKind::Algebraic] {
            let l = Lifting::new(SafeSet::new(2.0, 1.0).unwrap(), kind.build());
            let d = LiftedDynamics::new(p.shape().clone(), l.clone());
            for (x, u) in [([0.3, -0.4], 0.8), ([-1.5, 0.85], -2.0), ([1.9, 0.1], 0.0)] {
                let xdot = p.rhs(x, u).unwrap();
                let h = 1e-6;
                let mut pushed = [0.0; 2];
                for i in 0..2 {
                    let dz = (l.lift_component(i, x[i] + h).unwrap() - l.lift_component(i, x[i] - h).unwrap()) / (2.0 * h);
                    pushed[i] = dz * xdot[i];
                }
                let f = l.lift(x).unwrap();
                let zdot = lifted_rhs(&d, &p.true_params(), f.z, u).unwrap();
                for i in 0..2 {
                    assert!(
                        (zdot[i] - pushed[i]).abs() < 1e-6 * pushed[i].abs().max(1.0),
                        "{kind:?} x={x:?}: {zdot:?} vs {pushed:?}"
                    );
                }
            }
        }
    }
}
