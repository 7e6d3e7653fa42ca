//! Scenario configurations: a JSON-serializable description of an operator
//! (drift, diffusion, jump kernel), the decomposition to use, solver and
//! simulation parameters, and expected-quality assertions for the CLI exit
//! status. Five built-in scenarios cover the analytically tractable cases.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, ScalarFunction};
use crate::levy::{
    default_decomposition, ActivityClass, DecompKind, Decomposition, LevyKernel,
    LevyMeasureSpec, Measure1D,
};
use crate::operator::CharTriplet;
use crate::sde::{JumpSize, Jumps, SdeSpec};
use crate::vfie::SolveOptions;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Config types

/// Measure description: atoms plus an optional density with support and
/// optional closed-form one-sided tails. `null` support bounds mean ±∞.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub support: (Option<f64>, Option<f64>),
    #[serde(default = "default_class")]
    pub class: ActivityClass,
    #[serde(default)]
    pub tail_pos: Option<String>,
    #[serde(default)]
    pub tail_neg: Option<String>,
}

fn default_class() -> ActivityClass {
    ActivityClass::Finite
}

impl MeasureConfig {
    pub fn build(&self) -> Result<LevyMeasureSpec, String> {
        let mut m = LevyMeasureSpec::from_atoms(self.atoms.clone());
        m.class = self.class;
        if let Some(d) = &self.density {
            m.density = Some(ScalarFunction::parse(d).map_err(err)?);
            m.support = (
                self.support.0.unwrap_or(f64::NEG_INFINITY),
                self.support.1.unwrap_or(f64::INFINITY),
            );
        }
        if let Some(t) = &self.tail_pos {
            m.tail_pos = Some(ScalarFunction::parse(t).map_err(err)?);
        }
        if let Some(t) = &self.tail_neg {
            m.tail_neg = Some(ScalarFunction::parse(t).map_err(err)?);
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Zero,
    Constant { measure: MeasureConfig },
    Pushforward { base: MeasureConfig, phi: String },
    General { density: String, class: ActivityClass },
}

impl KernelConfig {
    pub fn build(&self) -> Result<LevyKernel, String> {
        Ok(match self {
            KernelConfig::Zero => LevyKernel::Zero,
            KernelConfig::Constant { measure } => LevyKernel::Constant(measure.build()?),
            KernelConfig::Pushforward { base, phi } => LevyKernel::Pushforward {
                base: base.build()?,
                phi: ScalarFunction::parse(phi).map_err(err)?,
            },
            KernelConfig::General { density, class } => LevyKernel::General {
                density: Arc::new(Expr::parse_xy(density).map_err(err)?),
                class: *class,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfieConfig {
    pub r: f64,
    pub n: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub pin_c1: Option<f64>,
    #[serde(default)]
    pub pin_c2: Option<f64>,
    #[serde(default = "default_true")]
    pub nonneg: bool,
}

fn default_true() -> bool {
    true
}

impl VfieConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            normalize: self.normalize,
            pin_c1: self.pin_c1,
            pin_c2: self.pin_c2,
            nonneg: self.nonneg,
        }
    }
}

/// Residual check parameters: bump family over [−window, window].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub window: f64,
    pub tolerance: f64,
}

/// Reference measure for `check` when the scenario is not solved.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaConfig {
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub domain: (Option<f64>, Option<f64>),
}

impl EtaConfig {
    pub fn build(&self) -> Result<Measure1D, String> {
        let mut m = Measure1D::from_atoms(self.atoms.clone());
        if let Some(d) = &self.density {
            let f = ScalarFunction::parse(d).map_err(err)?;
            let domain = (
                self.domain.0.unwrap_or(f64::NEG_INFINITY),
                self.domain.1.unwrap_or(f64::INFINITY),
            );
            m = Measure1D::from_density(f, domain);
            m.atoms = self.atoms.clone();
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpsConfig {
    None,
    Compound {
        rate: f64,
        #[serde(default)]
        atoms: Vec<(f64, f64)>,
        #[serde(default)]
        exponential_mean: Option<f64>,
        #[serde(default)]
        phi: Option<String>,
    },
    StablePos {
        alpha: f64,
        c: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    /// Pathwise (uncompensated) drift.
    pub drift: String,
    pub sigma: String,
    pub jumps: JumpsConfig,
    pub x0: f64,
    pub n_paths: usize,
    pub t_final: f64,
    pub dt: f64,
}

impl SdeConfig {
    pub fn build(&self) -> Result<SdeSpec, String> {
        let jumps = match &self.jumps {
            JumpsConfig::None => Jumps::None,
            JumpsConfig::Compound {
                rate,
                atoms,
                exponential_mean,
                phi,
            } => {
                let size = match exponential_mean {
                    Some(m) => JumpSize::Exponential { mean: *m },
                    None => JumpSize::Atoms(atoms.clone()),
                };
                Jumps::Compound {
                    rate: *rate,
                    size,
                    phi: phi
                        .as_ref()
                        .map(|p| ScalarFunction::parse(p).map_err(err))
                        .transpose()?,
                }
            }
            JumpsConfig::StablePos { alpha, c } => Jumps::StablePos {
                alpha: *alpha,
                c: *c,
            },
        };
        Ok(SdeSpec {
            drift: ScalarFunction::parse(&self.drift).map_err(err)?,
            sigma: ScalarFunction::parse(&self.sigma).map_err(err)?,
            jumps,
            x0: self.x0,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionalConfig {
    pub alpha: f64,
    /// Coefficient of η(x) in the fractional identity (the negated drift).
    pub phi: String,
}

/// Quality assertions; the CLI exits nonzero when a produced metric exceeds
/// its bound.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expected {
    pub residual_max: Option<f64>,
    pub residual_norm_max: Option<f64>,
    pub c1_abs_max: Option<f64>,
    pub mass_leak_max: Option<f64>,
    pub non_normalizable: Option<bool>,
    pub l1_max: Option<f64>,
    pub ks_max: Option<f64>,
    pub fractional_rms_rel_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub a: String,
    pub b: String,
    pub kernel: KernelConfig,
    pub decomposition: DecompKind,
    #[serde(default)]
    pub vfie: Option<VfieConfig>,
    #[serde(default)]
    pub check: Option<CheckConfig>,
    #[serde(default)]
    pub eta: Option<EtaConfig>,
    #[serde(default)]
    pub sde: Option<SdeConfig>,
    #[serde(default)]
    pub fractional: Option<FractionalConfig>,
    #[serde(default)]
    pub expected: Expected,
}

impl ScenarioConfig {
    pub fn from_json(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map_err(err)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    pub fn triplet(&self) -> Result<CharTriplet, String> {
        Ok(CharTriplet {
            a: ScalarFunction::parse(&self.a).map_err(err)?,
            b: ScalarFunction::parse(&self.b).map_err(err)?,
            kernel: self.kernel.build()?,
        })
    }

    pub fn decomposition(&self) -> Result<Decomposition, String> {
        let class = self.kernel.build()?.class();
        default_decomposition(self.decomposition, class).map_err(err)
    }

    /// Parses every expression and validates measure specs.
    pub fn validate(&self) -> Result<(), String> {
        self.triplet()?;
        self.decomposition()?;
        if let Some(e) = &self.eta {
            e.build()?;
        }
        if let Some(s) = &self.sde {
            s.build()?;
        }
        if let Some(f) = &self.fractional {
            ScalarFunction::parse(&f.phi).map_err(err)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Built-in scenarios

/// Ornstein-Uhlenbeck: a = −x, b = 1, no jumps; the invariant law is the
/// centered Gaussian with variance ½.
pub fn ou() -> ScenarioConfig {
    ScenarioConfig {
        name: "ou".into(),
        a: "0 - x".into(),
        b: "1".into(),
        kernel: KernelConfig::Zero,
        decomposition: DecompKind::NoMedium,
        vfie: Some(VfieConfig {
            r: 6.0,
            n: 256,
            normalize: true,
            pin_c1: None,
            pin_c2: None,
            nonneg: true,
        }),
        check: Some(CheckConfig {
            window: 3.0,
            tolerance: 1e-6,
        }),
        eta: None,
        sde: Some(SdeConfig {
            drift: "0 - x".into(),
            sigma: "1".into(),
            jumps: JumpsConfig::None,
            x0: 0.0,
            n_paths: 100_000,
            t_final: 10.0,
            dt: 0.01,
        }),
        fractional: None,
        expected: Expected {
            residual_norm_max: Some(1e-6),
            c1_abs_max: Some(1e-6),
            mass_leak_max: Some(1e-6),
            l1_max: Some(0.05),
            ks_max: Some(0.02),
            ..Default::default()
        },
    }
}

/// Compound Poisson with unit-mean exponential jumps and the drift that
/// makes the compensated coefficient a = 1 − 2/e; Lebesgue measure is
/// invariant (constant flux), checked by residuals only.
pub fn cp_exponential_lebesgue() -> ScenarioConfig {
    ScenarioConfig {
        name: "cp_exponential_lebesgue".into(),
        a: "1 - 2 * exp(0 - 1)".into(),
        b: "0".into(),
        kernel: KernelConfig::Constant {
            measure: MeasureConfig {
                atoms: vec![],
                density: Some("exp(0 - x)".into()),
                support: (Some(0.0), None),
                class: ActivityClass::Finite,
                tail_pos: Some("exp(0 - x)".into()),
                tail_neg: None,
            },
        },
        decomposition: DecompKind::AllLarge,
        vfie: None,
        check: Some(CheckConfig {
            window: 3.0,
            tolerance: 1e-6,
        }),
        eta: Some(EtaConfig {
            atoms: vec![],
            density: Some("1".into()),
            domain: (None, None),
        }),
        sde: None,
        fractional: None,
        expected: Expected {
            residual_max: Some(1e-6),
            ..Default::default()
        },
    }
}

/// Pure jump flip: jumps of −2·sgn(x) at rate 1; η = ½(δ₋₁ + δ₁) is
/// invariant with residuals that vanish exactly in floating point.
pub fn jump_flip() -> ScenarioConfig {
    ScenarioConfig {
        name: "jump_flip".into(),
        a: "0".into(),
        b: "0".into(),
        kernel: KernelConfig::Pushforward {
            base: MeasureConfig {
                atoms: vec![(1.0, 1.0)],
                density: None,
                support: (None, None),
                class: ActivityClass::Finite,
                tail_pos: None,
                tail_neg: None,
            },
            phi: "-2 * sgn(x)".into(),
        },
        decomposition: DecompKind::AllLarge,
        vfie: None,
        check: Some(CheckConfig {
            window: 3.0,
            tolerance: 1e-14,
        }),
        eta: Some(EtaConfig {
            atoms: vec![(-1.0, 0.5), (1.0, 0.5)],
            density: None,
            domain: (None, None),
        }),
        sde: Some(SdeConfig {
            drift: "0".into(),
            sigma: "0".into(),
            jumps: JumpsConfig::Compound {
                rate: 1.0,
                atoms: vec![(1.0, 1.0)],
                exponential_mean: None,
                phi: Some("-2 * sgn(x)".into()),
            },
            x0: 1.0,
            n_paths: 20_000,
            t_final: 12.0,
            dt: 0.05,
        }),
        fractional: None,
        expected: Expected {
            residual_max: Some(1e-14),
            ..Default::default()
        },
    }
}

/// The smooth bump ψ(x) = exp(1 − 1/(1−x²)) on (−1,1) as an expression.
pub const BUMP_EXPR: &str = "exp(1 - 1 / (1 - min(x^2, 1)))";

/// Superlinear diffusion φ₁ = 1 + x⁴ with bump-amplitude unit jumps
/// φ₂ = ψ; the drift makes a + a_π = 0, so the density behaves like
/// C/φ₁² far out.
pub fn superlinear() -> ScenarioConfig {
    ScenarioConfig {
        name: "superlinear".into(),
        // φ₂·1_{φ₂<1}: the amplitude compensated inside the unit ball
        // (φ₂(0) = 1 sits on the boundary and counts as large)
        a: format!("{BUMP_EXPR} * abs(sgn(x))"),
        b: "(1 + x^4)^2".into(),
        kernel: KernelConfig::Pushforward {
            base: MeasureConfig {
                atoms: vec![(1.0, 1.0)],
                density: None,
                support: (None, None),
                class: ActivityClass::Finite,
                tail_pos: None,
                tail_neg: None,
            },
            phi: BUMP_EXPR.into(),
        },
        decomposition: DecompKind::AllLarge,
        vfie: Some(VfieConfig {
            r: 6.0,
            n: 384,
            normalize: true,
            pin_c1: Some(0.0),
            pin_c2: None,
            nonneg: true,
        }),
        check: None,
        eta: None,
        sde: Some(SdeConfig {
            drift: "0".into(),
            sigma: "1 + x^4".into(),
            jumps: JumpsConfig::Compound {
                rate: 1.0,
                atoms: vec![(1.0, 1.0)],
                exponential_mean: None,
                phi: Some(BUMP_EXPR.into()),
            },
            x0: 0.0,
            n_paths: 100_000,
            t_final: 16.0,
            dt: 0.005,
        }),
        fractional: None,
        expected: Expected {
            residual_norm_max: Some(1e-6),
            mass_leak_max: Some(1e-4),
            l1_max: Some(0.05),
            ..Default::default()
        },
    }
}

/// One-sided ½-stable jumps (density y^{−3/2} on y > 0) with linear drift;
/// the pathwise drift is −x and the invariant density satisfies the
/// fractional identity x·η(x) = 2∫₀ˣ η(y)(x−y)^{−½} dy.
pub fn stable_drift() -> ScenarioConfig {
    ScenarioConfig {
        name: "stable_drift".into(),
        // compensated coefficient: −x + ∫_{0<y<1} y·y^{−3/2} dy = 2 − x
        a: "2 - x".into(),
        b: "0".into(),
        kernel: KernelConfig::Constant {
            measure: MeasureConfig {
                atoms: vec![],
                density: Some("1 / x^1.5".into()),
                support: (Some(0.0), None),
                class: ActivityClass::IntegrableJumps,
                tail_pos: Some("2 / x^0.5".into()),
                tail_neg: None,
            },
        },
        decomposition: DecompKind::AllMedium,
        vfie: Some(VfieConfig {
            r: 60.0,
            n: 600,
            normalize: true,
            pin_c1: Some(0.0),
            pin_c2: Some(0.0),
            nonneg: true,
        }),
        check: None,
        eta: None,
        sde: Some(SdeConfig {
            drift: "0 - x".into(),
            sigma: "0".into(),
            jumps: JumpsConfig::StablePos { alpha: 0.5, c: 1.0 },
            x0: 1.0,
            n_paths: 20_000,
            t_final: 8.0,
            dt: 0.01,
        }),
        fractional: Some(FractionalConfig {
            alpha: 0.5,
            phi: "x".into(),
        }),
        expected: Expected {
            fractional_rms_rel_max: Some(1e-3),
            ..Default::default()
        },
    }
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "ou" => Some(ou()),
        "cp_exponential_lebesgue" => Some(cp_exponential_lebesgue()),
        "jump_flip" => Some(jump_flip()),
        "superlinear" => Some(superlinear()),
        "stable_drift" => Some(stable_drift()),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "ou",
        "cp_exponential_lebesgue",
        "jump_flip",
        "superlinear",
        "stable_drift",
    ]
}
