//! Run configuration files.
//!
//! A config is a TOML document with one optional table per block. Anything
//! left out falls back to the reference experiment setup, so an empty file
//! is a valid `ce` run over the excitation box.

use std::path::Path;

use anyhow::{bail, Context};
use harvest_opt::{
    CEConfig, DesignSpace, GridSpec, HarvesterParams, InitialState, ParamField, PenaltyConfig, SimConfig, Test01Config,
};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Classify,
    Grid,
    Ce,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Classify => "classify",
            Mode::Grid => "grid",
            Mode::Ce => "ce",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the subcommand when given.
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub noise_ratio: Option<f64>,
    pub out: Option<String>,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    pub design: Option<DesignBlock>,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub test01: Test01Block,
    #[serde(default)]
    pub penalty: PenaltyBlock,
    #[serde(default)]
    pub ce: CeBlock,
    pub grid: Option<GridBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsBlock {
    pub xi: f64,
    pub chi: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub f: f64,
    pub omega: f64,
}

impl Default for ParamsBlock {
    fn default() -> Self {
        let p = HarvesterParams::<f64>::baseline(0.0999, 0.7786);
        Self { xi: p.xi, chi: p.chi, lambda: p.lambda, kappa: p.kappa, f: p.f, omega: p.omega }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub x0: f64,
    pub xdot0: f64,
    pub v0: f64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self { x0: 1.0, xdot0: 0.0, v0: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    pub vars: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub power_window: [f64; 2],
    pub observable_stride: usize,
}

impl Default for SimBlock {
    fn default() -> Self {
        let s = SimConfig::<f64>::default();
        Self {
            t_start: s.t_start,
            t_end: s.t_end,
            dt: s.dt,
            power_window: [s.power_window.0, s.power_window.1],
            observable_stride: s.observable_stride,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Test01Block {
    pub n_c: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub n_cut_fraction: f64,
}

impl Default for Test01Block {
    fn default() -> Self {
        let t = Test01Config::<f64>::default();
        Self { n_c: t.n_c, c_min: t.c_min, c_max: t.c_max, n_cut_fraction: t.n_cut_fraction }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyBlock {
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for PenaltyBlock {
    fn default() -> Self {
        let p = PenaltyConfig::<f64>::default();
        Self { alpha: p.alpha, epsilon: p.epsilon }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeBlock {
    pub n_samples: usize,
    /// Defaults to `round(n_samples / 10)`.
    pub n_elite: Option<usize>,
    pub max_levels: usize,
    pub tol: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

impl Default for CeBlock {
    fn default() -> Self {
        let c = CEConfig::<f64>::default();
        Self {
            n_samples: c.n_samples,
            n_elite: None,
            max_levels: c.max_levels,
            tol: c.tol,
            alpha: c.smooth_alpha,
            beta: c.smooth_beta,
            q: c.smooth_q,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub resolution: Vec<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn check_mode(&self, mode: Mode) -> anyhow::Result<()> {
        match self.mode {
            Some(m) if m != mode => bail!("config is for `{}` but `{}` was requested", m.name(), mode.name()),
            _ => Ok(()),
        }
    }

    pub fn params(&self) -> anyhow::Result<HarvesterParams<f64>> {
        let b = &self.params;
        let p = HarvesterParams { xi: b.xi, chi: b.chi, lambda: b.lambda, kappa: b.kappa, f: b.f, omega: b.omega };
        p.validate()?;
        Ok(p)
    }

    pub fn initial(&self) -> anyhow::Result<InitialState<f64>> {
        let ic = InitialState::new(self.initial.x0, self.initial.xdot0, self.initial.v0);
        ic.validate()?;
        Ok(ic)
    }

    pub fn design_space(&self) -> anyhow::Result<DesignSpace<f64>> {
        let base = self.params()?;
        match &self.design {
            None => {
                let d = DesignSpace::<f64>::excitation();
                Ok(DesignSpace::new(d.vars().to_vec(), d.lower().to_vec(), d.upper().to_vec(), base)?)
            }
            Some(d) => {
                let vars = d.vars.iter().map(|v| v.parse::<ParamField>()).collect::<Result<Vec<_>, _>>()?;
                Ok(DesignSpace::new(vars, d.lower.clone(), d.upper.clone(), base)?)
            }
        }
    }

    pub fn sim(&self) -> anyhow::Result<SimConfig<f64>> {
        let b = &self.sim;
        let s = SimConfig {
            t_start: b.t_start,
            t_end: b.t_end,
            dt: b.dt,
            power_window: (b.power_window[0], b.power_window[1]),
            observable_stride: b.observable_stride,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn test01(&self) -> anyhow::Result<Test01Config<f64>> {
        let b = &self.test01;
        let t = Test01Config { n_c: b.n_c, c_min: b.c_min, c_max: b.c_max, n_cut_fraction: b.n_cut_fraction };
        t.validate()?;
        Ok(t)
    }

    pub fn penalty(&self) -> anyhow::Result<PenaltyConfig<f64>> {
        let p = PenaltyConfig { alpha: self.penalty.alpha, epsilon: self.penalty.epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn ce(&self, seed: u64) -> anyhow::Result<CEConfig<f64>> {
        let b = &self.ce;
        let mut c = CEConfig::with_samples(b.n_samples);
        if let Some(n) = b.n_elite {
            c.n_elite = n;
        }
        c.max_levels = b.max_levels;
        c.tol = b.tol;
        c.smooth_alpha = b.alpha;
        c.smooth_beta = b.beta;
        c.smooth_q = b.q;
        c.seed = seed;
        c.validate()?;
        Ok(c)
    }

    /// Grid block, defaulting to 64 nodes per design variable.
    pub fn grid(&self, dim: usize) -> anyhow::Result<GridSpec> {
        let spec = match &self.grid {
            Some(g) => GridSpec::new(g.resolution.clone()),
            None => GridSpec::uniform(64, dim),
        };
        spec.validate(dim)?;
        Ok(spec)
    }

    pub fn noise_ratio(&self) -> anyhow::Result<f64> {
        let r = self.noise_ratio.unwrap_or(0.0);
        if !(r >= 0.0 && r.is_finite()) {
            bail!("noise_ratio must be a finite value >= 0, got {r}");
        }
        Ok(r)
    }

    /// Validates every block the mode needs.
    pub fn validate_for(&self, mode: Mode) -> anyhow::Result<()> {
        self.check_mode(mode)?;
        self.noise_ratio()?;
        self.test01()?;
        match mode {
            Mode::Classify => {}
            Mode::Simulate => {
                self.params()?;
                self.initial()?;
                self.sim()?;
            }
            Mode::Grid | Mode::Ce => {
                let space = self.design_space()?;
                self.initial()?;
                self.sim()?;
                self.penalty()?;
                if mode == Mode::Grid {
                    self.grid(space.dim())?;
                } else {
                    self.ce(0)?;
                }
            }
        }
        Ok(())
    }
}
