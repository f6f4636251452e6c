//! Strict-feedback plants `ẋ₁ = g₁(x₁) x₂`, `ẋ₂ = f₂(x₁,x₂) Θ₁ + g₂(x₁,x₂) u Θ₂`.
//!
//! The structural functions and the sign of `Θ₂` live in [`PlantShape`],
//! which is all a controller ever sees. The parameter values themselves are
//! kept in [`TrueParams`] and only reach the simulator and the monitor.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::lifting::SafeSet;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    /// `None` for zero or NaN.
    pub fn of(value: f64) -> Option<Sign> {
        if value > 0.0 {
            Some(Sign::Positive)
        } else if value < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl TryFrom<i64> for Sign {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(Error::InvalidConfig(format!("sign must be +1 or -1, got {other}"))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+1",
            Sign::Negative => "-1",
        })
    }
}

/// Controller-visible description of a plant: `g₁`, `f₂`, `g₂` and `sign(Θ₂)`.
///
/// The callables must be pure.
#[derive(Clone)]
pub struct PlantShape {
    name: String,
    g1: ScalarFn,
    f2: ScalarFn2,
    g2: ScalarFn2,
    theta2_sign: Sign,
}

impl PlantShape {
    pub fn new(name: impl Into<String>, g1: ScalarFn, f2: ScalarFn2, g2: ScalarFn2, theta2_sign: Sign) -> Self {
        Self {
            name: name.into(),
            g1,
            f2,
            g2,
            theta2_sign,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g1(&self, x1: f64) -> f64 {
        (self.g1)(x1)
    }

    pub fn f2(&self, x1: f64, x2: f64) -> f64 {
        (self.f2)(x1, x2)
    }

    pub fn g2(&self, x1: f64, x2: f64) -> f64 {
        (self.g2)(x1, x2)
    }

    pub fn theta2_sign(&self) -> Sign {
        self.theta2_sign
    }

    /// Same structure with a different assumed `sign(Θ₂)`.
    pub fn with_theta2_sign(mut self, sign: Sign) -> Self {
        self.theta2_sign = sign;
        self
    }
}

impl fmt::Debug for PlantShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantShape")
            .field("name", &self.name)
            .field("theta2_sign", &self.theta2_sign)
            .finish_non_exhaustive()
    }
}

/// The unknown parameters. Simulation and diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl TrueParams {
    /// `p₂ = Θ₂⁻¹`.
    pub fn p2(&self) -> f64 {
        1.0 / self.theta2
    }
}

#[derive(Debug, Clone)]
pub struct PlantDef {
    shape: PlantShape,
    params: TrueParams,
}

impl PlantDef {
    pub fn new(name: impl Into<String>, g1: ScalarFn, f2: ScalarFn2, g2: ScalarFn2, theta1: f64, theta2: f64) -> Result<Self> {
        if !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::InvalidParams("plant parameters must be finite".into()));
        }
        let sign = Sign::of(theta2).ok_or_else(|| Error::InvalidParams("theta2 must be nonzero".into()))?;
        Ok(Self {
            shape: PlantShape::new(name, g1, f2, g2, sign),
            params: TrueParams { theta1, theta2 },
        })
    }

    pub fn shape(&self) -> &PlantShape {
        &self.shape
    }

    pub fn true_params(&self) -> TrueParams {
        self.params
    }

    pub fn rhs(&self, x: [f64; 2], u: f64) -> Result<[f64; 2]> {
        plant_rhs(self, x, u)
    }
}

/// `(g₁(x₁) x₂, f₂(x₁,x₂) Θ₁ + g₂(x₁,x₂) u Θ₂)`.
pub fn plant_rhs(p: &PlantDef, x: [f64; 2], u: f64) -> Result<[f64; 2]> {
    ensure_finite(x[0], "x1")?;
    ensure_finite(x[1], "x2")?;
    ensure_finite(u, "control input")?;
    let s = &p.shape;
    let TrueParams { theta1, theta2 } = p.params;
    Ok([s.g1(x[0]) * x[1], s.f2(x[0], x[1]) * theta1 + s.g2(x[0], x[1]) * u * theta2])
}

/// Armature-controlled DC motor constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcMotorParams {
    /// Rotor inertia.
    #[serde(rename = "J")]
    pub j: f64,
    /// Viscous damping.
    pub b: f64,
    /// Armature resistance.
    #[serde(rename = "R")]
    pub r: f64,
    /// Torque constant.
    #[serde(rename = "Kt")]
    pub kt: f64,
    /// Back-EMF constant.
    #[serde(rename = "Kb")]
    pub kb: f64,
}

impl Default for DcMotorParams {
    fn default() -> Self {
        Self {
            j: 0.01,
            b: 0.1,
            r: 1.0,
            kt: 0.01,
            kb: 0.01,
        }
    }
}

impl DcMotorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("J", self.j), ("b", self.b), ("R", self.r), ("Kt", self.kt), ("Kb", self.kb)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("DC motor {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `Θ₁ = −(bR − K_b K_t) / (JR)`.
    pub fn theta1(&self) -> f64 {
        -(self.b * self.r - self.kb * self.kt) / (self.j * self.r)
    }

    /// `Θ₂ = K_t / (JR)`.
    pub fn theta2(&self) -> f64 {
        self.kt / (self.j * self.r)
    }
}

/// `x₁ = θ`, `x₂ = ω`, `u = V`; `g₁ = 1`, `f₂ = ω`, `g₂ = 1`.
pub fn dc_motor(params: DcMotorParams) -> Result<PlantDef> {
    params.validate()?;
    PlantDef::new(
        "dc_motor",
        Arc::new(|_| 1.0),
        Arc::new(|_, x2| x2),
        Arc::new(|_, _| 1.0),
        params.theta1(),
        params.theta2(),
    )
}

/// `ẋ₁ = x₂`, `ẋ₂ = u Θ`. Drift term `f₂ = x₂` carried with `Θ₁ = 0`.
pub fn double_integrator(theta: f64) -> Result<PlantDef> {
    if theta == 0.0 {
        return Err(Error::InvalidParams("double integrator gain must be nonzero".into()));
    }
    PlantDef::new(
        "double_integrator",
        Arc::new(|_| 1.0),
        Arc::new(|_, x2| x2),
        Arc::new(|_, _| 1.0),
        0.0,
        theta,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionKind {
    /// `f₂(x₁, 0) ≠ 0`.
    DriftNonzeroAtRest,
    /// `f₂(x₁, x₂) = 0` with `x₂ ≠ 0`.
    DriftVanishesInMotion,
    G1Singular,
    G2Singular,
}

impl fmt::Display for AssumptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssumptionKind::DriftNonzeroAtRest => "f2(x1, 0) != 0",
            AssumptionKind::DriftVanishesInMotion => "f2(x1, x2) = 0 with x2 != 0",
            AssumptionKind::G1Singular => "g1(x1) = 0",
            AssumptionKind::G2Singular => "g2(x1, x2) = 0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionViolation {
    pub kind: AssumptionKind,
    pub x1: f64,
    pub x2: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    pub violations: Vec<AssumptionViolation>,
    /// Informational findings that do not break either assumption.
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Interior grid points `−x̄ + 2x̄ k/(n+1)`, `k = 1..=n`; contains 0 for odd `n`.
fn interior_grid(xbar: f64, n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |k| -xbar + 2.0 * xbar * k as f64 / (n as f64 + 1.0))
}

/// Sample both plant assumptions on a `grid_n × grid_n` grid over the safe set.
pub fn check_assumptions(shape: &PlantShape, safe: &SafeSet, grid_n: usize) -> Result<AssumptionReport> {
    if grid_n < 2 {
        return Err(Error::InvalidParams(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let mut report = AssumptionReport::default();
    let push = |report: &mut AssumptionReport, kind, x1, x2, value| {
        report.violations.push(AssumptionViolation { kind, x1, x2, value });
    };

    let mut sign_pos = [false, false]; // f2 > 0 seen, f2 < 0 seen, for x2 > 0
    let mut sign_neg = [false, false]; // same, for x2 < 0

    for x1 in interior_grid(safe.xbar1(), grid_n) {
        let g1 = shape.g1(x1);
        report.samples += 1;
        if g1 == 0.0 || !g1.is_finite() {
            push(&mut report, AssumptionKind::G1Singular, x1, f64::NAN, g1);
        }
        let at_rest = shape.f2(x1, 0.0);
        if at_rest != 0.0 {
            push(&mut report, AssumptionKind::DriftNonzeroAtRest, x1, 0.0, at_rest);
        }
        for x2 in interior_grid(safe.xbar2(), grid_n) {
            report.samples += 1;
            let g2 = shape.g2(x1, x2);
            if g2 == 0.0 || !g2.is_finite() {
                push(&mut report, AssumptionKind::G2Singular, x1, x2, g2);
            }
            if x2 != 0.0 {
                let f2 = shape.f2(x1, x2);
                if f2 == 0.0 {
                    push(&mut report, AssumptionKind::DriftVanishesInMotion, x1, x2, f2);
                }
                let seen = if x2 > 0.0 { &mut sign_pos } else { &mut sign_neg };
                seen[0] |= f2 > 0.0;
                seen[1] |= f2 < 0.0;
            }
        }
    }

    let one_signed = |s: [bool; 2]| s[0] ^ s[1];
    if one_signed(sign_pos) && one_signed(sign_neg) && sign_pos == sign_neg {
        let sign = if sign_pos[0] { ">= 0" } else { "<= 0" };
        report
            .notes
            .push(format!("f2 {sign} on both sides of x2 = 0 (does not change sign with x2)"));
    }
    Ok(report)
}
