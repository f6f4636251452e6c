//! Constraint-lifting coordinate chain.
//!
//! A state `x` inside the box `(-x̄₁, x̄₁) × (-x̄₂, x̄₂)` is normalized to
//! `χ = x / x̄ ∈ (-1, 1)`, lifted to `z = x̄ φ(χ) ∈ ℝ`, and rescaled to
//! `ζ = z / x̄`. The way back is `x = x̄ ψ(ζ)`, which lands strictly inside
//! the box for every finite `ζ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Relative width of the band next to the constraint boundary where lifting
/// is refused (`φ` diverges as `|χ| → 1`).
pub const DOMAIN_GUARD: f64 = 1e-9;

/// Origin-symmetric open box `(-x̄₁, x̄₁) × (-x̄₂, x̄₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeSet {
    xbar1: f64,
    xbar2: f64,
}

impl SafeSet {
    pub fn new(xbar1: f64, xbar2: f64) -> Result<Self> {
        for (name, v) in [("xbar1", xbar1), ("xbar2", xbar2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { xbar1, xbar2 })
    }

    pub fn xbar1(&self) -> f64 {
        self.xbar1
    }

    pub fn xbar2(&self) -> f64 {
        self.xbar2
    }

    pub fn bounds(&self) -> [f64; 2] {
        [self.xbar1, self.xbar2]
    }

    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        x1.abs() < self.xbar1 && x2.abs() < self.xbar2
    }

    /// `contains`, excluding the guard band next to the boundary.
    pub fn contains_guarded(&self, x1: f64, x2: f64) -> bool {
        (x1 / self.xbar1).abs() < 1.0 - DOMAIN_GUARD && (x2 / self.xbar2).abs() < 1.0 - DOMAIN_GUARD
    }
}

/// A sigmoid pair `(φ, ψ)` with the analytic derivative of `φ` and the
/// sigmoid integral `𝒱(ζ) = ∫₀^ζ ψ(s) ds`.
///
/// Implementations must be pure, odd, strictly increasing, and satisfy
/// `ψ(φ(χ)) = χ` on `(-1, 1)`.
pub trait LiftingFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Lift `(-1, 1) → ℝ`.
    fn phi(&self, chi: f64) -> f64;

    /// Inverse of `phi`, `ℝ → (-1, 1)`.
    fn psi(&self, zeta: f64) -> f64;

    /// `∂φ/∂χ`, supplied in closed form.
    fn dphi(&self, chi: f64) -> f64;

    /// Sigmoid integral, nonnegative with `vcal(0) = 0` and `vcal' = psi`.
    fn vcal(&self, zeta: f64) -> f64;
}

/// `φ = artanh`, `ψ = tanh`, `𝒱 = log cosh`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TanhFamily;

impl LiftingFamily for TanhFamily {
    fn name(&self) -> &'static str {
        "tanh"
    }

    fn phi(&self, chi: f64) -> f64 {
        chi.abs().atanh().copysign(chi)
    }

    fn psi(&self, zeta: f64) -> f64 {
        zeta.tanh()
    }

    fn dphi(&self, chi: f64) -> f64 {
        1.0 / ((1.0 - chi) * (1.0 + chi))
    }

    fn vcal(&self, zeta: f64) -> f64 {
        let a = zeta.abs();
        if a < 1.0 {
            // cosh ζ − 1 = 2 sinh²(ζ/2), no cancellation near 0
            let s = (0.5 * a).sinh();
            (2.0 * s * s).ln_1p()
        } else {
            // |ζ| + log1p(e^{-2|ζ|}) − log 2, overflow-free
            a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
        }
    }
}

/// Algebraic sigmoid: `ψ(ζ) = ζ / √(1 + ζ²)`, `φ(χ) = χ / √(1 − χ²)`,
/// `𝒱(ζ) = √(1 + ζ²) − 1`.
///
/// Grows polynomially rather than logarithmically near the boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlgebraicFamily;

impl LiftingFamily for AlgebraicFamily {
    fn name(&self) -> &'static str {
        "algebraic"
    }

    fn phi(&self, chi: f64) -> f64 {
        chi / ((1.0 - chi) * (1.0 + chi)).sqrt()
    }

    fn psi(&self, zeta: f64) -> f64 {
        zeta / zeta.hypot(1.0)
    }

    fn dphi(&self, chi: f64) -> f64 {
        ((1.0 - chi) * (1.0 + chi)).powf(-1.5)
    }

    fn vcal(&self, zeta: f64) -> f64 {
        // √(1+ζ²) − 1 without cancellation at small ζ
        let h = zeta.hypot(1.0);
        zeta * zeta / (h + 1.0)
    }
}

/// Built-in families, selectable by name from configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    #[default]
    Tanh,
    Algebraic,
}

impl FamilyKind {
    pub fn build(self) -> Arc<dyn LiftingFamily> {
        match self {
            FamilyKind::Tanh => Arc::new(TanhFamily),
            FamilyKind::Algebraic => Arc::new(AlgebraicFamily),
        }
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(FamilyKind::Tanh),
            "algebraic" => Ok(FamilyKind::Algebraic),
            other => Err(Error::InvalidConfig(format!("unknown lifting family `{other}`"))),
        }
    }
}

pub fn make_tanh_family() -> Arc<dyn LiftingFamily> {
    Arc::new(TanhFamily)
}

/// One state expressed in all four coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateFrame {
    pub x: [f64; 2],
    pub chi: [f64; 2],
    pub z: [f64; 2],
    pub zeta: [f64; 2],
}

/// Safe set together with the lifting family of each state.
#[derive(Debug, Clone)]
pub struct Lifting {
    safe: SafeSet,
    families: [Arc<dyn LiftingFamily>; 2],
}

impl Lifting {
    /// Same family for both states.
    pub fn new(safe: SafeSet, family: Arc<dyn LiftingFamily>) -> Self {
        Self {
            safe,
            families: [family.clone(), family],
        }
    }

    pub fn per_state(safe: SafeSet, families: [Arc<dyn LiftingFamily>; 2]) -> Self {
        Self { safe, families }
    }

    pub fn tanh(safe: SafeSet) -> Self {
        Self::new(safe, make_tanh_family())
    }

    pub fn safe_set(&self) -> &SafeSet {
        &self.safe
    }

    pub fn family(&self, index: usize) -> &dyn LiftingFamily {
        self.families[index].as_ref()
    }

    /// `z = x̄ φ(x / x̄)` for a single component.
    pub fn lift_component(&self, index: usize, x: f64) -> Result<f64> {
        ensure_finite(x, "state")?;
        let xbar = self.safe.bounds()[index];
        let chi = x / xbar;
        if chi.abs() >= 1.0 - DOMAIN_GUARD {
            return Err(Error::DomainViolation {
                index,
                value: x,
                limit: xbar,
            });
        }
        Ok(xbar * self.families[index].phi(chi))
    }

    /// `x = x̄ ψ(z / x̄)` for a single component, always strictly inside
    /// `(-x̄, x̄)`.
    pub fn unlift_component(&self, index: usize, z: f64) -> Result<f64> {
        ensure_finite(z, "lifted state")?;
        let xbar = self.safe.bounds()[index];
        let x = xbar * self.families[index].psi(z / xbar);
        // ψ saturates to ±1 in f64 for large |ζ|; keep the result representable
        // and strictly interior.
        if x.abs() >= xbar {
            Ok(xbar.next_down().copysign(x))
        } else {
            Ok(x)
        }
    }

    pub fn lift(&self, x: [f64; 2]) -> Result<CoordinateFrame> {
        let bounds = self.safe.bounds();
        let mut frame = CoordinateFrame {
            x,
            chi: [0.0; 2],
            z: [0.0; 2],
            zeta: [0.0; 2],
        };
        for i in 0..2 {
            frame.z[i] = self.lift_component(i, x[i])?;
            frame.chi[i] = x[i] / bounds[i];
            frame.zeta[i] = frame.z[i] / bounds[i];
        }
        Ok(frame)
    }

    pub fn unlift(&self, z: [f64; 2]) -> Result<CoordinateFrame> {
        let bounds = self.safe.bounds();
        let mut frame = CoordinateFrame {
            x: [0.0; 2],
            chi: [0.0; 2],
            z,
            zeta: [0.0; 2],
        };
        for i in 0..2 {
            frame.x[i] = self.unlift_component(i, z[i])?;
            frame.zeta[i] = z[i] / bounds[i];
            frame.chi[i] = frame.x[i] / bounds[i];
        }
        Ok(frame)
    }
}
