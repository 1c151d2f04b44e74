//! Design points, the chaos-penalized power objective and its bookkeeping.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::chaos01::{classify, Test01Config};
use crate::dynamics::{add_noise, integrate_rk4, mean_power, HarvesterParams, InitialState, SimConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Power assigned to samples whose integration blew up.
pub const DIVERGED_POWER: f64 = -1.0e6;

/// A field of [`HarvesterParams`] that a design variable can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamField {
    Xi,
    Chi,
    Lambda,
    Kappa,
    F,
    Omega,
}

impl ParamField {
    pub const ALL: [ParamField; 6] = [Self::Xi, Self::Chi, Self::Lambda, Self::Kappa, Self::F, Self::Omega];

    pub fn name(self) -> &'static str {
        match self {
            Self::Xi => "xi",
            Self::Chi => "chi",
            Self::Lambda => "lambda",
            Self::Kappa => "kappa",
            Self::F => "f",
            Self::Omega => "omega",
        }
    }

    pub fn get<T: Copy>(self, p: &HarvesterParams<T>) -> T {
        match self {
            Self::Xi => p.xi,
            Self::Chi => p.chi,
            Self::Lambda => p.lambda,
            Self::Kappa => p.kappa,
            Self::F => p.f,
            Self::Omega => p.omega,
        }
    }

    pub fn set<T>(self, p: &mut HarvesterParams<T>, value: T) {
        match self {
            Self::Xi => p.xi = value,
            Self::Chi => p.chi = value,
            Self::Lambda => p.lambda = value,
            Self::Kappa => p.kappa = value,
            Self::F => p.f = value,
            Self::Omega => p.omega = value,
        }
    }
}

impl fmt::Display for ParamField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|field| field.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown design variable `{s}`")))
    }
}

/// Box-bounded design variables bound onto a base parameter set.
///
/// Fields not listed in `vars` keep their value from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace<T> {
    vars: Vec<ParamField>,
    lower: Vec<T>,
    upper: Vec<T>,
    base: HarvesterParams<T>,
}

impl<T: Scalar> DesignSpace<T> {
    pub fn new(vars: Vec<ParamField>, lower: Vec<T>, upper: Vec<T>, base: HarvesterParams<T>) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::InvalidConfig("design space needs at least one variable".into()));
        }
        if lower.len() != vars.len() || upper.len() != vars.len() {
            return Err(Error::InvalidConfig(format!(
                "{} variables but {} lower and {} upper bounds",
                vars.len(),
                lower.len(),
                upper.len()
            )));
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(Error::InvalidConfig(format!("design variable `{v}` bound twice")));
            }
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::InvalidConfig(format!(
                    "bounds for `{v}` must satisfy lower < upper, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { vars, lower, upper, base })
    }

    /// Excitation amplitude and frequency over `[0.08, 0.1] x [0.75, 0.85]`
    /// with the baseline device.
    pub fn excitation() -> Self {
        Self::new(
            vec![ParamField::F, ParamField::Omega],
            vec![T::lit(0.08), T::lit(0.75)],
            vec![T::lit(0.1), T::lit(0.85)],
            HarvesterParams::baseline(T::lit(0.1), T::lit(0.8)),
        )
        .expect("static bounds are valid")
    }

    /// Device coefficients `(xi, chi, lambda, kappa)` under the fixed
    /// excitation `f = 0.115`, `omega = 0.8`.
    pub fn device() -> Self {
        Self::new(
            vec![ParamField::Xi, ParamField::Chi, ParamField::Lambda, ParamField::Kappa],
            vec![T::lit(0.01), T::lit(0.05), T::lit(0.05), T::lit(0.5)],
            vec![T::lit(0.05), T::lit(0.2), T::lit(0.2), T::lit(1.5)],
            HarvesterParams::baseline(T::lit(0.115), T::lit(0.8)),
        )
        .expect("static bounds are valid")
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[ParamField] {
        &self.vars
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.vars.iter().map(|v| v.name()).collect()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn base(&self) -> &HarvesterParams<T> {
        &self.base
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| T::half() * (l + u)).collect()
    }

    pub fn widths(&self) -> Vec<T> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| u - l).collect()
    }

    pub fn contains(&self, design: &[T]) -> bool {
        design.len() == self.dim()
            && design.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&x, (&l, &u))| l <= x && x <= u)
    }

    pub fn bind(&self, design: &[T]) -> HarvesterParams<T> {
        debug_assert_eq!(design.len(), self.dim());
        let mut p = self.base;
        for (field, &value) in self.vars.iter().zip(design) {
            field.set(&mut p, value);
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig<T> {
    pub alpha: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for PenaltyConfig<T> {
    fn default() -> Self {
        Self { alpha: T::lit(10.0), epsilon: T::lit(0.1) }
    }
}

impl<T: Scalar> PenaltyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(Error::InvalidConfig(format!("penalty alpha must be > 0, got {}", self.alpha)));
        }
        if !(T::zero() < self.epsilon && self.epsilon < T::one()) {
            return Err(Error::InvalidConfig(format!("penalty epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn is_feasible(&self, k: T) -> bool {
        k <= self.epsilon
    }
}

/// `P - alpha * max(0, K - epsilon)`.
pub fn penalize<T: Scalar>(power: T, k: T, cfg: &PenaltyConfig<T>) -> T {
    power - cfg.alpha * (k - cfg.epsilon).max(T::zero())
}

/// One scored design point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub design: Vec<T>,
    pub power: T,
    pub k: T,
    pub penalized: T,
    pub feasible: bool,
    /// The integration left the finite range; `power` and `k` are sentinels.
    pub diverged: bool,
}

impl<T: Scalar> Evaluation<T> {
    pub fn new(design: Vec<T>, power: T, k: T, penalty: &PenaltyConfig<T>) -> Self {
        let penalized = penalize(power, k, penalty);
        Self { design, power, k, penalized, feasible: penalty.is_feasible(k), diverged: false }
    }

    pub fn diverged(design: Vec<T>, penalty: &PenaltyConfig<T>) -> Self {
        let mut e = Self::new(design, T::lit(DIVERGED_POWER), T::one(), penalty);
        e.diverged = true;
        e
    }

    /// Ranking used for best-so-far tracking: feasible beats infeasible,
    /// then higher penalized score wins.
    pub fn outranks(&self, other: &Self) -> bool {
        match (self.feasible, other.feasible) {
            (true, false) => true,
            (false, true) => false,
            _ => self.penalized > other.penalized,
        }
    }
}

/// Something that scores design vectors. Implementations must tolerate
/// concurrent calls; each call gets its own random stream.
pub trait Objective<T: Scalar>: Sync {
    fn evaluate<R: Rng + ?Sized>(&self, design: &[T], rng: &mut R) -> Evaluation<T>;

    /// Number of evaluations performed so far.
    fn evaluations(&self) -> u64;
}

/// Power and chaos indicator of one simulated design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawScore<T> {
    pub power: T,
    pub k: T,
    pub diverged: bool,
}

/// The harvester objective: simulate, optionally add measurement noise,
/// then score mean power and the 0-1 test on the steady-state window.
#[derive(Debug)]
pub struct HarvesterObjective<T> {
    pub space: DesignSpace<T>,
    pub sim: SimConfig<T>,
    pub ic: InitialState<T>,
    pub test01: Test01Config<T>,
    pub penalty: PenaltyConfig<T>,
    pub noise_ratio: T,
    counter: AtomicU64,
}

impl<T: Scalar> HarvesterObjective<T> {
    pub fn new(
        space: DesignSpace<T>,
        sim: SimConfig<T>,
        ic: InitialState<T>,
        test01: Test01Config<T>,
        penalty: PenaltyConfig<T>,
        noise_ratio: T,
    ) -> Result<Self> {
        sim.validate()?;
        ic.validate()?;
        test01.validate()?;
        penalty.validate()?;
        if !(noise_ratio >= T::zero() && noise_ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise ratio must be >= 0, got {noise_ratio}")));
        }
        Ok(Self { space, sim, ic, test01, penalty, noise_ratio, counter: AtomicU64::new(0) })
    }

    /// Defaults of the reference experiments on the given design space.
    pub fn with_defaults(space: DesignSpace<T>) -> Self {
        Self::new(
            space,
            SimConfig::default(),
            InitialState::default(),
            Test01Config::default(),
            PenaltyConfig::default(),
            T::zero(),
        )
        .expect("defaults are valid")
    }

    pub fn with_noise(mut self, ratio: T) -> Self {
        self.noise_ratio = ratio;
        self
    }

    /// `(P, K)` for one design. A blown-up integration yields the sentinel
    /// pair `(DIVERGED_POWER, 1)` rather than an error.
    pub fn evaluate_raw<R: Rng + ?Sized>(&self, design: &[T], rng: &mut R) -> Result<RawScore<T>> {
        if design.len() != self.space.dim() {
            return Err(Error::InvalidConfig(format!(
                "design has {} components, space has {}",
                design.len(),
                self.space.dim()
            )));
        }
        let params = self.space.bind(design);
        let series = match integrate_rk4(&params, &self.ic, &self.sim) {
            Ok(s) => s,
            Err(Error::NonFiniteState { .. }) | Err(Error::InvalidParams(_)) => {
                return Ok(RawScore { power: T::lit(DIVERGED_POWER), k: T::one(), diverged: true })
            }
            Err(e) => return Err(e),
        };
        let series = if self.noise_ratio > T::zero() { add_noise(&series, self.noise_ratio, rng) } else { series };
        let (t0, tf) = self.sim.power_window;
        let power = mean_power(&series, t0, tf, params.lambda)?;
        let observable = series.voltage_window(t0, tf, self.sim.observable_stride)?;
        let k = classify(&observable, &self.test01, rng)?.k;
        Ok(RawScore { power, k, diverged: false })
    }
}

impl<T: Scalar> Objective<T> for HarvesterObjective<T> {
    fn evaluate<R: Rng + ?Sized>(&self, design: &[T], rng: &mut R) -> Evaluation<T> {
        self.counter.fetch_add(1, Ordering::Relaxed);
        match self.evaluate_raw(design, rng) {
            Ok(raw) if !raw.diverged => Evaluation::new(design.to_vec(), raw.power, raw.k, &self.penalty),
            _ => Evaluation::diverged(design.to_vec(), &self.penalty),
        }
    }

    fn evaluations(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }
}

/// Wraps a plain scoring closure; every point is feasible (`K = 0`).
pub struct FnObjective<F> {
    score: F,
    counter: AtomicU64,
}

impl<F> FnObjective<F> {
    pub fn new(score: F) -> Self {
        Self { score, counter: AtomicU64::new(0) }
    }
}

impl<T: Scalar, F: Fn(&[T]) -> T + Sync> Objective<T> for FnObjective<F> {
    fn evaluate<R: Rng + ?Sized>(&self, design: &[T], _rng: &mut R) -> Evaluation<T> {
        self.counter.fetch_add(1, Ordering::Relaxed);
        let power = (self.score)(design);
        Evaluation::new(design.to_vec(), power, T::zero(), &PenaltyConfig::default())
    }

    fn evaluations(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }
}
