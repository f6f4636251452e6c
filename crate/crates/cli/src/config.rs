//! Experiment configuration files.
//!
//! TOML with one table per concern. Every table and key is optional; missing
//! values fall back to the DC-motor reference experiment.
//!
//! ```toml
//! [simulation]
//! dt = 1e-3
//! t_final = 30.0
//! log_stride = 1
//!
//! [plant]
//! kind = "dc_motor"        # or "double_integrator" (with `theta`)
//! J = 0.01
//! b = 0.1
//! R = 1.0
//! Kt = 0.01
//! Kb = 0.01
//!
//! [safe_set]
//! xbar1 = 2.0
//! xbar2 = 1.0
//!
//! [lifting]
//! family = "tanh"          # or "algebraic"; `family_x2` overrides the second state
//!
//! [controller]
//! k1 = 1.0
//! gamma = 1.0
//! alpha = 1.0
//! p2_law_sign = 1          # -1 selects the flipped p2_hat law
//! # theta2_sign = 1        # overrides the sign taken from the plant
//! adapt = true
//! adjudicate_sign = true   # also run the opposite p2 law sign and report both
//!
//! [estimates]
//! p2_hat = 1.0
//! theta1_hat = 0.0
//!
//! [reference]
//! x1d = -1.9
//!
//! [initial]
//! x1 = 0.0
//! x2 = 0.9
//!
//! [thresholds]             # certificate tolerances
//! tracking = 0.02
//!
//! [output]
//! dir = "out"
//! svg = true
//!
//! [sweep]                  # cartesian product over the listed axes
//! k1 = [0.5, 1.0, 2.0]
//! ```

use std::path::{Path, PathBuf};

use constraint_lifting::{
    dc_motor, double_integrator, ControllerGains, DcMotorParams, EstimatorState, FamilyKind, Lifting, PlantDef,
    SafeSet, Sign, SimConfig, Thresholds,
};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulation: SimulationSection,
    pub plant: PlantSection,
    pub safe_set: SafeSetSection,
    pub lifting: LiftingSection,
    pub controller: ControllerSection,
    pub estimates: EstimatesSection,
    pub reference: ReferenceSection,
    pub initial: InitialSection,
    pub thresholds: ThresholdsSection,
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt: f64,
    pub t_final: f64,
    pub log_stride: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 30.0,
            log_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    #[default]
    DcMotor,
    DoubleIntegrator,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub kind: PlantKind,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "Kt")]
    pub kt: Option<f64>,
    #[serde(rename = "Kb")]
    pub kb: Option<f64>,
    /// Input gain of the double integrator.
    pub theta: Option<f64>,
}

impl PlantSection {
    pub fn build(&self) -> Result<PlantDef, ConfigError> {
        let motor_keys = [self.j, self.b, self.r, self.kt, self.kb];
        let plant = match self.kind {
            PlantKind::DcMotor => {
                if self.theta.is_some() {
                    return invalid("plant.theta only applies to kind = \"double_integrator\"");
                }
                let d = DcMotorParams::default();
                dc_motor(DcMotorParams {
                    j: self.j.unwrap_or(d.j),
                    b: self.b.unwrap_or(d.b),
                    r: self.r.unwrap_or(d.r),
                    kt: self.kt.unwrap_or(d.kt),
                    kb: self.kb.unwrap_or(d.kb),
                })
            }
            PlantKind::DoubleIntegrator => {
                if motor_keys.iter().any(Option::is_some) {
                    return invalid("motor constants only apply to kind = \"dc_motor\"");
                }
                double_integrator(self.theta.unwrap_or(1.0))
            }
        };
        plant.map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeSetSection {
    pub xbar1: f64,
    pub xbar2: f64,
}

impl Default for SafeSetSection {
    fn default() -> Self {
        Self { xbar1: 2.0, xbar2: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftingSection {
    pub family: FamilyKind,
    pub family_x2: Option<FamilyKind>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub k1: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub p2_law_sign: i64,
    pub theta2_sign: Option<i64>,
    pub adapt: bool,
    pub adjudicate_sign: bool,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            k1: 1.0,
            gamma: 1.0,
            alpha: 1.0,
            p2_law_sign: 1,
            theta2_sign: None,
            adapt: true,
            adjudicate_sign: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatesSection {
    pub p2_hat: f64,
    pub theta1_hat: f64,
}

impl Default for EstimatesSection {
    fn default() -> Self {
        Self {
            p2_hat: 1.0,
            theta1_hat: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub x1d: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self { x1d: -1.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub x1: f64,
    pub x2: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { x1: 0.0, x2: 0.9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsSection {
    pub monotone_rel: Option<f64>,
    pub vdot_identity: Option<f64>,
    pub estimate_bound_factor: Option<f64>,
    pub tracking: Option<f64>,
    pub residual: Option<f64>,
}

impl ThresholdsSection {
    pub fn build(&self) -> Result<Thresholds, ConfigError> {
        let d = Thresholds::default();
        let t = Thresholds {
            monotone_rel: self.monotone_rel.unwrap_or(d.monotone_rel),
            vdot_identity: self.vdot_identity.unwrap_or(d.vdot_identity),
            estimate_bound_factor: self.estimate_bound_factor.unwrap_or(d.estimate_bound_factor),
            tracking: self.tracking.unwrap_or(d.tracking),
            residual: self.residual.unwrap_or(d.residual),
        };
        for (name, v) in [
            ("monotone_rel", t.monotone_rel),
            ("vdot_identity", t.vdot_identity),
            ("estimate_bound_factor", t.estimate_bound_factor),
            ("tracking", t.tracking),
            ("residual", t.residual),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("thresholds.{name} must be positive, got {v}"));
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Relative paths resolve against the working directory.
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

/// Axes of a parameter sweep. Absent axes keep the base value; a present but
/// empty axis makes the sweep empty.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k1: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub x1d: Option<Vec<f64>>,
    pub x1_0: Option<Vec<f64>>,
    pub x2_0: Option<Vec<f64>>,
}

/// One combination of sweep values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub k1: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub x1d: f64,
    pub x1_0: f64,
    pub x2_0: f64,
}

fn parse_sign(key: &str, v: i64) -> Result<Sign, ConfigError> {
    Sign::try_from(v).map_err(|_| ConfigError::Invalid(format!("{key} must be 1 or -1, got {v}")))
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn safe_set(&self) -> Result<SafeSet, ConfigError> {
        SafeSet::new(self.safe_set.xbar1, self.safe_set.xbar2).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Fully validated simulation settings.
    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let plant = self.plant.build()?;
        let safe = self.safe_set()?;
        let lifting = match self.lifting.family_x2 {
            None => Lifting::new(safe, self.lifting.family.build()),
            Some(f2) => Lifting::per_state(safe, [self.lifting.family.build(), f2.build()]),
        };
        let c = &self.controller;
        let theta2_sign = match c.theta2_sign {
            Some(v) => parse_sign("controller.theta2_sign", v)?,
            None => plant.shape().theta2_sign(),
        };
        let gains = ControllerGains::new(c.k1, c.gamma, c.alpha, theta2_sign)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let p2_law_sign = parse_sign("controller.p2_law_sign", c.p2_law_sign)?;
        let est0 = EstimatorState::initial(self.estimates.p2_hat, self.estimates.theta1_hat)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg = SimConfig {
            plant,
            lifting,
            gains,
            x1d: self.reference.x1d,
            x0: [self.initial.x1, self.initial.x2],
            est0,
            dt: self.simulation.dt,
            t_final: self.simulation.t_final,
            log_stride: self.simulation.log_stride,
            p2_law_sign,
            adapt: c.adapt,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn base_point(&self) -> SweepPoint {
        SweepPoint {
            k1: self.controller.k1,
            gamma: self.controller.gamma,
            alpha: self.controller.alpha,
            x1d: self.reference.x1d,
            x1_0: self.initial.x1,
            x2_0: self.initial.x2,
        }
    }

    pub fn with_point(&self, p: &SweepPoint) -> Self {
        let mut c = self.clone();
        c.controller.k1 = p.k1;
        c.controller.gamma = p.gamma;
        c.controller.alpha = p.alpha;
        c.reference.x1d = p.x1d;
        c.initial.x1 = p.x1_0;
        c.initial.x2 = p.x2_0;
        c
    }

    /// Cartesian product of the sweep axes, last axis varying fastest.
    /// Empty when there is no `[sweep]` table, no axis, or an empty axis.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let Some(sw) = &self.sweep else {
            return Vec::new();
        };
        let base = self.base_point();
        let axes = [&sw.k1, &sw.gamma, &sw.alpha, &sw.x1d, &sw.x1_0, &sw.x2_0];
        if axes.iter().all(|a| a.is_none()) {
            return Vec::new();
        }
        let defaults = [base.k1, base.gamma, base.alpha, base.x1d, base.x1_0, base.x2_0];
        let lists: Vec<Vec<f64>> = axes
            .iter()
            .zip(defaults)
            .map(|(a, d)| (*a).clone().unwrap_or_else(|| vec![d]))
            .collect();
        let mut points = vec![[0.0f64; 6]];
        for (i, list) in lists.iter().enumerate() {
            points = points
                .iter()
                .flat_map(|p| {
                    list.iter().map(move |&v| {
                        let mut q = *p;
                        q[i] = v;
                        q
                    })
                })
                .collect();
        }
        points
            .into_iter()
            .map(|v| SweepPoint {
                k1: v[0],
                gamma: v[1],
                alpha: v[2],
                x1d: v[3],
                x1_0: v[4],
                x2_0: v[5],
            })
            .collect()
    }
}
