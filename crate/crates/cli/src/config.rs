//! Experiment configuration: strict TOML schema with dotted-key overrides.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use nlwave_core::{Grid, HomogeneousTerm, PolyKind, PolyNonlinearity, Potential};

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: String,
    pub domain: DomainConfig,
    pub time: TimeConfig,
    pub operator: OperatorConfig,
    pub model: ModelConfig,
    pub controls: ControlsConfig,
    pub solve: SolveConfig,
    pub runge: RungeConfig,
    pub inversion: InversionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub n_int: usize,
    pub m_collar: usize,
    pub w1: [usize; 2],
    pub w2: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_t: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Potential,
    Nonlinear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub potential: PotentialConfig,
    pub nonlinear: NonlinearConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Constant,
    Sine,
    Bump,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub profile: Profile,
    pub offset: f64,
    pub amplitude: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Serial,
    Asymptotic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConfig {
    pub kind: SeriesKind,
    pub exponents: Vec<f64>,
    pub coeff_offset: Vec<f64>,
    pub coeff_slope: Vec<f64>,
    pub r_infty: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsConfig {
    pub n_freq: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    Csv,
    Bin,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub u0_modes: Vec<f64>,
    pub u1_modes: Vec<f64>,
    pub source_amplitude: f64,
    pub source_freq: f64,
    pub format: TrajectoryFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    Hs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RungeConfig {
    pub norm: NormKind,
    pub target_bumps: usize,
    pub target_index: usize,
    pub alphas: Vec<f64>,
    pub basis_alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    pub potential: PotentialInversionConfig,
    pub expansion: ExpansionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialInversionConfig {
    pub profiles: usize,
    pub runge_alpha: f64,
    pub ls_reg: f64,
    pub max_refinements: usize,
    pub update_tol: f64,
    pub noise_snr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Candidate exponents `r₁ < r₂ < …` of the expansion to recover.
    pub exponents: Vec<f64>,
    pub eps_ladder: Vec<f64>,
    pub controls: Vec<[usize; 2]>,
}

/// Set `key.path = value` in `table`, parsing `value` as a TOML value and
/// falling back to a bare string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().ok_or_else(|| anyhow!("empty override key"))?;
    let mut cur = table;
    for p in parents {
        cur = cur
            .get_mut(*p)
            .and_then(Value::as_table_mut)
            .ok_or_else(|| anyhow!("unknown config section `{p}` in `{key}`"))?;
    }
    if !cur.contains_key(*last) {
        bail!("unknown config key `{key}`");
    }
    cur.insert((*last).to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parse `text` (or the built-in default), apply overrides, and validate.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table: Table = toml::from_str(DEFAULT_CONFIG).context("built-in default config")?;
        if let Some(text) = text {
            let user: Table = toml::from_str(text).context("parsing config file")?;
            merge(&mut table, user, "")?;
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = Value::Table(table).try_into().context("config schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.potential(&grid)?.validate_exponent(self.operator.s)?;
        let nl = &self.model.nonlinear;
        if nl.coeff_offset.len() != nl.exponents.len() || nl.coeff_slope.len() != nl.exponents.len() {
            bail!("model.nonlinear: exponents, coeff_offset and coeff_slope must have equal length");
        }
        if self.runge.target_index >= self.runge.target_bumps {
            bail!("runge.target_index must be below runge.target_bumps");
        }
        self.nonlinearity(&grid).context("model.nonlinear")?;
        let ex = &self.inversion.expansion;
        if ex.exponents.is_empty() || ex.exponents[0] <= 0.0 || ex.exponents.windows(2).any(|w| w[1] <= w[0]) {
            bail!("inversion.expansion.exponents must be positive and strictly increasing");
        }
        let w1 = grid.window_nodes(nlwave_core::Window::W1).len();
        if let Some([node, _]) = ex.controls.iter().find(|[node, freq]| *node >= w1 || *freq == 0) {
            bail!("inversion.expansion.controls: node {node} or frequency out of range (W1 has {w1} nodes)");
        }
        if ex.eps_ladder.len() < 2 {
            bail!("inversion.expansion.eps_ladder needs at least two values");
        }
        if self.controls.n_freq == 0 {
            bail!("controls.n_freq must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = &self.domain;
        Ok(Grid::new(
            d.xmin,
            d.xmax,
            d.n_int,
            d.m_collar,
            d.w1[0]..d.w1[1],
            d.w2[0]..d.w2[1],
            self.time.t_final,
            self.time.n_t,
        )?)
    }

    pub fn potential(&self, grid: &Grid) -> Result<Potential> {
        let p = &self.model.potential;
        let (a, b) = (grid.x_min(), grid.x_max());
        let shape = |x: f64| {
            let y = (x - a) / (b - a);
            match p.profile {
                Profile::Constant => 1.0,
                Profile::Sine => (std::f64::consts::PI * y).sin(),
                Profile::Bump => {
                    let d = 4.0 * (y - 0.5);
                    if d.abs() < 1.0 {
                        (0.5 * std::f64::consts::PI * d).cos().powi(2)
                    } else {
                        0.0
                    }
                }
            }
        };
        let q = grid.interior_coords().map(|x| p.offset + p.amplitude * shape(x));
        Ok(Potential::new(q, p.p)?)
    }

    pub fn nonlinearity(&self, grid: &Grid) -> Result<PolyNonlinearity> {
        let nl = &self.model.nonlinear;
        let x = grid.interior_coords();
        let terms = nl
            .exponents
            .iter()
            .zip(nl.coeff_offset.iter().zip(&nl.coeff_slope))
            .map(|(&r, (&a, &b))| HomogeneousTerm::new(r, x.map(|x| a + b * x)))
            .collect();
        let kind = match nl.kind {
            SeriesKind::Serial => PolyKind::Serial,
            SeriesKind::Asymptotic => PolyKind::Asymptotic,
        };
        Ok(PolyNonlinearity::new(kind, terms, nl.r_infty, self.operator.s)?)
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Overlay `src` onto `dst`, rejecting keys the default does not define.
fn merge(dst: &mut Table, src: Table, prefix: &str) -> Result<()> {
    for (k, v) in src {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (dst.get_mut(&k), v) {
            (None, _) => bail!("unknown config key `{path}`"),
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s, &path)?,
            (Some(slot), v) => *slot = v,
        }
    }
    Ok(())
}
