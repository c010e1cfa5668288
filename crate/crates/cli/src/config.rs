//! Experiment files: TOML, unknown keys rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use shockwalk::exact::{BasisPolicy, EngineConfig, DEFAULT_ENUMERATION_CAP};
use shockwalk::measures::{Orientation, Truncation};
use shockwalk::models::{BcrwRates, Model};
use shockwalk::simulator::{GapInit, SimConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Simulate,
    Hydro,
    RatesCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Asep {
        p: f64,
        q: f64,
    },
    Gzrp {
        beta: f64,
    },
    Blp {
        beta: f64,
    },
    Bcrw {
        p: f64,
        q: f64,
        b_l: f64,
        b_r: f64,
        c_l: f64,
        c_r: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model, CliError> {
        let m = match *self {
            ModelConfig::Asep { p, q } => Model::asep(p, q),
            ModelConfig::Gzrp { beta } => Model::gzrp(beta),
            ModelConfig::Blp { beta } => Model::blp(beta),
            ModelConfig::Bcrw {
                p,
                q,
                b_l,
                b_r,
                c_l,
                c_r,
            } => BcrwRates::new(p, q, b_l, b_r, c_l, c_r).and_then(Model::bcrw),
        };
        m.map_err(|e| CliError::Config(format!("model: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Multiplies one site parameter (ASEP: its density) by `factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub site: Option<i32>,
    pub side: Option<Side>,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    /// ASEP takes `rho`, `lambda`; the exponential models `theta`, `sigma`.
    Shock {
        rho: Option<f64>,
        lambda: Option<f64>,
        theta: Option<f64>,
        sigma: Option<f64>,
        #[serde(default)]
        j: i32,
        /// Skip the density/fugacity condition (negative controls).
        #[serde(default)]
        unchecked: bool,
    },
    /// One entry in `particles` per second class particle.
    MultiShock {
        particles: Vec<i32>,
        /// ASEP: `rho_0, ..., rho_n` from left to right.
        densities: Option<Vec<f64>>,
        sigma_right: Option<f64>,
        sigma_left: Option<f64>,
        #[serde(default)]
        perturb: Vec<Perturbation>,
    },
    /// The mirror orientation also reflects the rates.
    BcrwShock {
        #[serde(default)]
        j: i32,
        #[serde(default = "right")]
        orientation: OrientationConfig,
    },
    /// Product stationary measure: `theta`, or `rho` (ASEP, BCRW). A list
    /// verifies each value; simulations take a single one.
    Stationary { theta: Option<Values>, rho: Option<Values> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Values::One(v) => vec![*v],
            Values::Many(v) => v.clone(),
        }
    }
}

fn right() -> OrientationConfig {
    OrientationConfig::Right
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationConfig {
    Right,
    Mirror,
}

impl From<OrientationConfig> for Orientation {
    fn from(o: OrientationConfig) -> Self {
        match o {
            OrientationConfig::Right => Orientation::Right,
            OrientationConfig::Mirror => Orientation::Mirror,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// The random-walk identity (or stationarity for `stationary` measures).
    Identity,
    ProofTerms,
    Mixture,
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Pass,
    /// Negative control: the residual must exceed `fail_threshold`.
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisConfig {
    Named(BasisName),
    Band { band: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisName {
    Auto,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactConfig {
    pub check: Check,
    pub window: (i32, i32),
    /// `K`, the truncation half-width of unbounded marginals.
    pub truncation: i32,
    pub truncation_tolerance: f64,
    pub basis: BasisConfig,
    pub cap: u64,
    /// Overrides the model default (1e-12 bounded, 1e-8 truncated).
    pub tolerance: Option<f64>,
    pub expect: Expect,
    pub fail_threshold: f64,
    /// Parameters for the shift identities.
    pub thetas: Vec<f64>,
    /// Probe half-width of the proof-term decomposition.
    pub probe_half_width: Option<i32>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            check: Check::Identity,
            window: (-3, 3),
            truncation: 12,
            truncation_tolerance: 1e-12,
            basis: BasisConfig::Named(BasisName::Auto),
            cap: DEFAULT_ENUMERATION_CAP,
            tolerance: None,
            expect: Expect::Pass,
            fail_threshold: 1e-3,
            thetas: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            probe_half_width: None,
        }
    }
}

impl ExactConfig {
    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            cap: self.cap,
            basis: match self.basis {
                BasisConfig::Named(BasisName::Auto) => BasisPolicy::Auto,
                BasisConfig::Named(BasisName::Full) => BasisPolicy::Full,
                BasisConfig::Band { band } => BasisPolicy::Band(band),
            },
            ..EngineConfig::default()
        }
    }

    pub fn trunc(&self) -> Result<Truncation, CliError> {
        Truncation::new(self.truncation, self.truncation_tolerance).map_err(|e| CliError::Config(format!("exact: {e}")))
    }
}

/// Acceptance bands of a simulation. Unset optional bands are not checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bands {
    pub mean_se: f64,
    pub variance_se: Option<f64>,
    pub tv: Option<f64>,
    /// Target for the velocity instead of the predicted walk mean.
    pub velocity: Option<f64>,
    pub velocity_se: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            mean_se: 3.0,
            variance_se: None,
            tv: None,
            velocity: None,
            velocity_se: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationBlock {
    pub run: SimConfig,
    pub gap_init: GapInit,
    pub bands: Bands,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            run: SimConfig::default(),
            gap_init: GapInit::Spec,
            bands: Bands::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxGrid {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydroConfig {
    /// ASEP ladder `rho_0, ..., rho_n` whose bound-state velocity is evaluated.
    pub ladder: Option<Vec<f64>>,
    pub expected_velocity: Option<f64>,
    pub velocity_tolerance: f64,
    /// Number of random ladders for the current/closed-form comparison.
    pub random_ladders: usize,
    pub seed: u64,
    pub relative_tolerance: f64,
    /// Compare the shock drift `P - Q` with the Rankine-Hugoniot velocity
    /// (needs a `shock` measure).
    pub drift: bool,
    pub drift_tolerance: f64,
    /// Flux table over the density (ASEP) or parameter `theta`.
    pub flux: Option<FluxGrid>,
}

impl Default for HydroConfig {
    fn default() -> Self {
        Self {
            ladder: None,
            expected_velocity: None,
            velocity_tolerance: 1e-6,
            random_ladders: 0,
            seed: 0,
            relative_tolerance: 1e-10,
            drift: false,
            drift_tolerance: 1e-10,
            flux: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for `report.json`, the CSV tables and a copy of the config.
    pub dir: Option<PathBuf>,
    /// Write per-replica trajectories (can be large).
    pub trajectories: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub measure: Option<MeasureConfig>,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub hydro: HydroConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn require(v: Option<f64>, field: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("measure: missing field `{field}`")))
}

fn positive(v: f64, field: &str) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{}-{}",
                serde_json::to_value(self.command)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                self.model.build().map(|m| m.name().to_lowercase()).unwrap_or_default()
            )
        })
    }

    /// Checks that the blocks the command needs are present and consistent.
    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model.build()?;
        let e = &self.exact;
        if e.window.0 > e.window.1 {
            return Err(CliError::Config(format!("exact.window: empty window {:?}", e.window)));
        }
        positive(e.truncation_tolerance, "exact.truncation_tolerance")?;
        positive(e.fail_threshold, "exact.fail_threshold")?;
        if let Some(t) = e.tolerance {
            positive(t, "exact.tolerance")?;
        }
        positive(self.hydro.velocity_tolerance, "hydro.velocity_tolerance")?;
        positive(self.hydro.relative_tolerance, "hydro.relative_tolerance")?;
        positive(self.hydro.drift_tolerance, "hydro.drift_tolerance")?;
        let b = &self.simulation.bands;
        positive(b.mean_se, "simulation.bands.mean_se")?;
        positive(b.velocity_se, "simulation.bands.velocity_se")?;
        for (v, f) in [
            (b.variance_se, "simulation.bands.variance_se"),
            (b.tv, "simulation.bands.tv"),
        ] {
            if let Some(v) = v {
                positive(v, f)?;
            }
        }
        if let Some(m) = &self.measure {
            self.validate_measure(&model, m)?;
        }
        match self.command {
            Command::Verify => {
                let needs_measure = !matches!(e.check, Check::Shift);
                if needs_measure && self.measure.is_none() {
                    return Err(CliError::Config("verify needs a [measure] block".into()));
                }
            }
            Command::Simulate => {
                self.simulation
                    .run
                    .validate()
                    .map_err(|e| CliError::Config(format!("simulation.run: {e}")))?;
                if self.measure.is_none() {
                    return Err(CliError::Config("simulate needs a [measure] block".into()));
                }
            }
            Command::Hydro => {
                if self.hydro.drift && !matches!(self.measure, Some(MeasureConfig::Shock { .. })) {
                    return Err(CliError::Config("hydro.drift needs a shock [measure] block".into()));
                }
                if let Some(g) = &self.hydro.flux {
                    if g.points < 2 || !(g.from < g.to) {
                        return Err(CliError::Config("hydro.flux: need from < to and points >= 2".into()));
                    }
                }
            }
            Command::RatesCheck => {}
        }
        Ok(())
    }

    fn validate_measure(&self, model: &Model, m: &MeasureConfig) -> Result<(), CliError> {
        let asep = matches!(model, Model::Asep { .. });
        match m {
            MeasureConfig::Shock {
                rho,
                lambda,
                theta,
                sigma,
                ..
            } => {
                if asep && theta.is_none() {
                    require(*rho, "rho")?;
                    require(*lambda, "lambda")?;
                } else {
                    require(*theta, "theta")?;
                    require(*sigma, "sigma")?;
                }
            }
            MeasureConfig::MultiShock {
                particles,
                densities,
                sigma_right,
                sigma_left,
                perturb,
            } => {
                if particles.is_empty() {
                    return Err(CliError::Config("measure.particles: need at least one".into()));
                }
                let given = densities.is_some() as u8 + sigma_right.is_some() as u8 + sigma_left.is_some() as u8;
                if given != 1 {
                    return Err(CliError::Config(
                        "measure: give exactly one of `densities`, `sigma_right`, `sigma_left`".into(),
                    ));
                }
                if let Some(d) = densities {
                    if !asep {
                        return Err(CliError::Config("measure.densities: only for ASEP".into()));
                    }
                    if d.len() != particles.len() + 1 {
                        return Err(CliError::Config(format!(
                            "measure.densities: need {} values for {} particles, got {}",
                            particles.len() + 1,
                            particles.len(),
                            d.len()
                        )));
                    }
                }
                for p in perturb {
                    if p.site.is_some() == p.side.is_some() {
                        return Err(CliError::Config(
                            "measure.perturb: give exactly one of `site`, `side`".into(),
                        ));
                    }
                    positive(p.factor, "measure.perturb.factor")?;
                }
            }
            MeasureConfig::BcrwShock { .. } => {
                if !matches!(model, Model::Bcrw(_)) {
                    return Err(CliError::Config("measure kind bcrw-shock needs a bcrw model".into()));
                }
            }
            MeasureConfig::Stationary { theta, rho } => {
                if theta.is_some() == rho.is_some() {
                    return Err(CliError::Config("measure: give exactly one of `theta`, `rho`".into()));
                }
                if theta.iter().chain(rho).any(|v| v.to_vec().is_empty()) {
                    return Err(CliError::Config("measure: empty parameter list".into()));
                }
                if theta.is_some() && matches!(model, Model::Bcrw(_)) {
                    return Err(CliError::Config(
                        "measure: the BCRW stationary measure takes `rho`".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "verify"
[model]
kind = "asep"
p = 0.7
q = 0.3
[measure]
kind = "shock"
rho = 0.3
lambda = 0.5
"#;

    #[test]
    fn minimal_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.exact.window, (-3, 3));
        assert_eq!(c.exact.check, Check::Identity);
        assert_eq!(c.exact.tolerance, None);
        assert_eq!(c.simulation.run.replicas, 10_000);
    }

    #[test]
    fn typo_is_rejected() {
        let err = parse_config(&MINIMAL.replace("lambda", "lamda"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("lamda"), "{err}");
    }

    #[test]
    fn missing_beta_is_named() {
        let text =
            "command = \"verify\"\n[model]\nkind = \"gzrp\"\n[measure]\nkind = \"shock\"\ntheta = 0.5\nsigma = -0.5\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let err = parse_config("command = \"verify\"\n[model]\nkind = \"asep\"\np = \n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4") || err.contains(":4:"), "{err}");
    }

    #[test]
    fn band_basis() {
        let c = parse_config(&format!("{MINIMAL}\n[exact]\nbasis = {{ band = 2 }}\n")).unwrap();
        assert_eq!(c.exact.engine().basis, BasisPolicy::Band(2));
    }
}
