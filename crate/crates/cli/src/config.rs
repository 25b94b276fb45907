//! Run configuration shared by every subcommand. Flags override an optional
//! JSON file given with `--config`; both map onto the same kebab-case keys.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use lindramp::ode::Controls;
use lindramp::{InitialState, Kind, ModeParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Full,
    Nojump,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Full => Kind::FullLindblad,
            KindArg::Nojump => Kind::NoJump,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CaseArg {
    Gapped,
    Gapless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialArg {
    Ground,
    Dressed,
}

impl From<InitialArg> for InitialState {
    fn from(i: InitialArg) -> Self {
        match i {
            InitialArg::Ground => InitialState::Ground,
            InitialArg::Dressed => InitialState::Dressed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Json,
}

/// Every option any subcommand reads. Unset options are omitted when the
/// configuration is serialised, so a flag only overrides the file when given.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with defaults for any of these options.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    /// γ₀/Δ; sets gamma0 from delta when gamma0 is not given.
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_list: Option<Vec<f64>>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<KindArg>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseArg>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialArg>,

    /// Fixed-step RK4 with this many steps (deterministic mode).
    #[arg(long, global = true, conflicts_with = "tol")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Relative tolerance of the adaptive integrator.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// Output samples of a trajectory.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Upper end of the momentum grid, in units of Δ (or γ₀).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_points: Option<usize>,
    /// Quadrature node budget.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    /// Collapse exponent a in (Δτ)^a.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub collapse: bool,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_list: Option<Vec<f64>>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Where density-sweep writes its fit summary (stderr when unset).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatArg>,
}

impl RunConfig {
    /// Flags layered over the `--config` file, if any.
    pub fn resolve(self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let mut merged = read_config(&path)?;
        let Value::Object(flags) = serde_json::to_value(&self).expect("config serialises") else {
            unreachable!()
        };
        merged.extend(flags);
        let mut out: RunConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        out.config = Some(path);
        Ok(out)
    }

    /// `#` header lines recording the resolved configuration.
    pub fn header(&self, command: &str) -> Vec<String> {
        vec![
            format!("lindramp {command} {}", env!("CARGO_PKG_VERSION")),
            format!("config {}", serde_json::to_string(self).expect("config serialises")),
        ]
    }

    pub fn controls(&self) -> Result<Controls, CliError> {
        let c = match (self.steps, self.tol) {
            (Some(n), _) => Controls::fixed(n),
            (None, Some(t)) => Controls::adaptive(t, 1e-20),
            (None, None) => Controls::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn kind(&self) -> Kind {
        self.kind.unwrap_or(KindArg::Full).into()
    }

    pub fn initial(&self) -> InitialState {
        self.initial.map(Into::into).unwrap_or_default()
    }

    /// Mode parameters with the given τ. Δ and γ₀ come from --delta and
    /// --gamma0 or --epsilon; --case checks the result.
    pub fn mode(&self, tau: f64) -> Result<ModeParams, CliError> {
        let delta = self.delta.unwrap_or(match self.case {
            Some(CaseArg::Gapless) => 0.0,
            _ => 1.0,
        });
        let gamma0 = match (self.gamma0, self.epsilon) {
            (Some(g), _) => g,
            (None, Some(e)) if delta > 0.0 => e * delta,
            (None, Some(_)) => return Err(CliError::usage("--epsilon needs --delta > 0".into())),
            (None, None) => 1.0,
        };
        let m = ModeParams::new(self.p.unwrap_or(0.0), delta, gamma0, tau)?;
        m.case()?;
        match self.case {
            Some(CaseArg::Gapped) if delta == 0.0 => Err(CliError::usage("gapped case needs --delta > 0".into())),
            Some(CaseArg::Gapless) if delta != 0.0 => Err(CliError::usage("gapless case needs --delta 0".into())),
            _ => Ok(m),
        }
    }

    pub fn require_tau(&self) -> Result<f64, CliError> {
        self.tau.ok_or_else(|| CliError::usage("missing --tau".into()))
    }

    /// τ values from --tau-list, falling back to --tau.
    pub fn taus(&self) -> Result<Vec<f64>, CliError> {
        match (&self.tau_list, self.tau) {
            (Some(l), _) if !l.is_empty() => Ok(l.clone()),
            (_, Some(t)) => Ok(vec![t]),
            _ => Err(CliError::usage("missing --tau or --tau-list".into())),
        }
    }
}

fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::usage(format!("config {} is not a JSON object", path.display()))),
        Err(e) => Err(CliError::usage(format!("config {}: {e}", path.display()))),
    }
}
