//! Cross-entropy optimizer with truncated Gaussian sampling.
//!
//! Each level draws `n_samples` points from independent truncated Gaussians
//! over the design box, keeps the `n_elite` best by penalized score, refits
//! mean and standard deviation by maximum likelihood, and blends the refit
//! with the previous level's parameters. The run stops once every
//! component's standard deviation is below `tol`, or at `max_levels`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::objective::{DesignSpace, Evaluation, Objective};
use crate::scalar::Scalar;

/// Below this acceptance probability rejection sampling is abandoned for
/// inverse-CDF sampling.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CEConfig<T> {
    pub n_samples: usize,
    pub n_elite: usize,
    pub max_levels: usize,
    /// Stop once `max(sigma) < tol`.
    pub tol: T,
    /// Mean smoothing weight.
    pub smooth_alpha: T,
    /// Base of the level-dependent deviation smoothing weight.
    pub smooth_beta: T,
    pub smooth_q: T,
    pub seed: u64,
}

impl<T: Scalar> Default for CEConfig<T> {
    fn default() -> Self {
        Self::with_samples(50)
    }
}

impl<T: Scalar> CEConfig<T> {
    /// Defaults with `n_elite = round(n_samples / 10)` (at least one).
    pub fn with_samples(n_samples: usize) -> Self {
        let n_elite = ((n_samples as f64 / 10.0).round() as usize).max(1);
        Self {
            n_samples,
            n_elite,
            max_levels: 100,
            tol: T::lit(1e-3),
            smooth_alpha: T::lit(0.7),
            smooth_beta: T::lit(0.8),
            smooth_q: T::lit(5.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.n_elite && self.n_elite < self.n_samples) {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n_elite < n_samples, got {} and {}",
                self.n_elite, self.n_samples
            )));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be >= 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(T::zero() < self.smooth_alpha && self.smooth_alpha <= T::one()) {
            return Err(Error::InvalidConfig(format!("smooth_alpha must lie in (0, 1], got {}", self.smooth_alpha)));
        }
        if !(T::lit(0.8) <= self.smooth_beta && self.smooth_beta <= T::lit(0.99)) {
            return Err(Error::InvalidConfig(format!("smooth_beta must lie in [0.8, 0.99], got {}", self.smooth_beta)));
        }
        if !(T::lit(5.0) <= self.smooth_q && self.smooth_q <= T::lit(10.0)) {
            return Err(Error::InvalidConfig(format!("smooth_q must lie in [5, 10], got {}", self.smooth_q)));
        }
        Ok(())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord<T> {
    pub level: usize,
    /// Power of the level's best sample.
    pub power: T,
    /// Chaos indicator of the level's best sample.
    pub k: T,
    pub penalized: T,
    /// Worst elite score.
    pub gamma_hat: T,
    /// Smoothed parameters after the update.
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
}

/// Sampling distribution and history between levels.
#[derive(Debug, Clone)]
pub struct CEState<T> {
    pub level: usize,
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
    pub gamma_hat: T,
    pub best: Option<Evaluation<T>>,
    pub trace: Vec<LevelRecord<T>>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> CEState<T> {
    /// Mean at the box centre, deviation equal to the box width.
    pub fn new(space: &DesignSpace<T>, seed: u64) -> Self {
        Self {
            level: 0,
            mu: space.midpoint(),
            sigma: space.widths(),
            gamma_hat: T::neg_infinity(),
            best: None,
            trace: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn max_sigma(&self) -> T {
        self.sigma.iter().fold(T::zero(), |m, &s| m.max(s))
    }

    /// Sample, score, select and update once.
    pub fn step<O: Objective<T>>(&mut self, objective: &O, space: &DesignSpace<T>, cfg: &CEConfig<T>) {
        self.level += 1;
        let samples = sample_truncated_gaussian(
            &self.mu,
            &self.sigma,
            space.lower(),
            space.upper(),
            cfg.n_samples,
            &mut self.rng,
        );
        let seeds: Vec<u64> = (0..cfg.n_samples).map(|_| self.rng.next_u64()).collect();

        let evals: Vec<Evaluation<T>> = samples
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(x, &seed)| objective.evaluate(x, &mut ChaCha8Rng::seed_from_u64(seed)))
            .collect();

        let scores: Vec<T> = evals.iter().map(|e| e.penalized).collect();
        let (elite, gamma_hat) = select_elite(&scores, cfg.n_elite);
        let elite_points: Vec<Vec<T>> = elite.iter().map(|&i| samples[i].clone()).collect();
        let refit = mle_update(&elite_points);
        let (mu, sigma) = smooth_update(refit, (self.mu.clone(), self.sigma.clone()), self.level, cfg);
        self.mu = mu;
        self.sigma = sigma;
        self.gamma_hat = gamma_hat;

        let level_best = &evals[elite[0]];
        for e in &evals {
            if self.best.as_ref().is_none_or(|b| e.outranks(b)) {
                self.best = Some(e.clone());
            }
        }
        self.trace.push(LevelRecord {
            level: self.level,
            power: level_best.power,
            k: level_best.k,
            penalized: level_best.penalized,
            gamma_hat,
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    pub x_star: Vec<T>,
    /// Penalized objective at the optimum.
    pub s_star: T,
    pub k_star: T,
    pub power_star: T,
    pub feasible: bool,
    pub levels_used: usize,
    pub evaluations_used: usize,
    /// The deviation criterion fired before `max_levels`.
    pub converged: bool,
    pub final_mu: Vec<T>,
    pub final_sigma: Vec<T>,
    pub trace: Vec<LevelRecord<T>>,
}

impl<T: Scalar> OptimizationResult<T> {
    pub fn from_best(best: &Evaluation<T>, levels_used: usize, evaluations_used: usize) -> Self {
        Self {
            x_star: best.design.clone(),
            s_star: best.penalized,
            k_star: best.k,
            power_star: best.power,
            feasible: best.feasible,
            levels_used,
            evaluations_used,
            converged: true,
            final_mu: best.design.clone(),
            final_sigma: vec![T::zero(); best.design.len()],
            trace: Vec::new(),
        }
    }

    /// Trace as CSV: `level,P,K,mu_1..mu_d,sigma_1..sigma_d`.
    pub fn write_trace_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.x_star.len();
        let mut header = vec!["level".to_string(), "P".into(), "K".into()];
        header.extend((1..=d).map(|i| format!("mu_{i}")));
        header.extend((1..=d).map(|i| format!("sigma_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for rec in &self.trace {
            let mut row = vec![rec.level.to_string(), fmt_num(rec.power), fmt_num(rec.k)];
            row.extend(rec.mu.iter().map(|&v| fmt_num(v)));
            row.extend(rec.sigma.iter().map(|&v| fmt_num(v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_num<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
fn phi_inv(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Standard normal restricted to `[a, b]` by inverting the CDF; works in the
/// lower tail so that far-tail intervals keep their precision.
fn truncated_standard_inverse<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a > 0.0 {
        return -truncated_standard_inverse(-b, -a, rng);
    }
    if b < -TAIL_START {
        return -upper_tail(-b, -a, rng);
    }
    let (pa, pb) = (phi(a), phi(b));
    let u: f64 = rng.random();
    phi_inv(pa + u * (pb - pa)).clamp(a, b)
}

/// Beyond this many deviations the CDF is too coarse to invert.
const TAIL_START: f64 = 8.0;

/// Standard normal on `[a, b]` with `a > 0`, by rejection from a shifted
/// exponential (Robert, 1995).
fn upper_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    if rate * (b - a) < 1e-3 {
        // density is flat to within 0.1% over the interval
        return a + rng.random::<f64>() * (b - a);
    }
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / rate;
        if z > b {
            continue;
        }
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate) * (z - rate)).exp() {
            return z;
        }
    }
}

fn truncated_component<R: Rng + ?Sized>(mu: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    if !(sigma > 0.0) {
        return mu.clamp(lo, hi);
    }
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let mass = if a > 0.0 { phi(-a) - phi(-b) } else { phi(b) - phi(a) };
    if mass >= MIN_ACCEPTANCE {
        // expected tries 1/mass; give up well past that
        let budget = ((20.0 / mass).ceil() as u64).min(100_000_000);
        for _ in 0..budget {
            let z: f64 = rng.sample(StandardNormal);
            if (a..=b).contains(&z) {
                return mu + sigma * z;
            }
        }
    }
    (mu + sigma * truncated_standard_inverse(a, b, rng)).clamp(lo, hi)
}

/// `n` independent draws, component `i` from a Gaussian `(mu_i, sigma_i)`
/// conditioned on `[lower_i, upper_i]`. Zero deviation yields the clamped mean.
pub fn sample_truncated_gaussian<T: Scalar, R: Rng + ?Sized>(
    mu: &[T],
    sigma: &[T],
    lower: &[T],
    upper: &[T],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<T>> {
    (0..n)
        .map(|_| {
            (0..mu.len())
                .map(|i| {
                    T::lit(truncated_component(
                        mu[i].to_f64_lossy(),
                        sigma[i].to_f64_lossy(),
                        lower[i].to_f64_lossy(),
                        upper[i].to_f64_lossy(),
                        rng,
                    ))
                })
                .collect()
        })
        .collect()
}

/// Indices of the `n_elite` largest scores (ties to the lower index) and the
/// smallest elite score. NaN scores rank last.
pub fn select_elite<T: Scalar>(scores: &[T], n_elite: usize) -> (Vec<usize>, T) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let key = |i: usize| if scores[i].is_nan() { T::neg_infinity() } else { scores[i] };
    order.sort_by(|&i, &j| key(j).partial_cmp(&key(i)).unwrap_or(std::cmp::Ordering::Equal));
    order.truncate(n_elite.min(scores.len()));
    let gamma = order.last().map_or(T::nan(), |&i| scores[i]);
    (order, gamma)
}

/// Componentwise elite mean and (divide-by-count) standard deviation.
pub fn mle_update<T: Scalar>(elite: &[Vec<T>]) -> (Vec<T>, Vec<T>) {
    assert!(!elite.is_empty(), "elite set must not be empty");
    let d = elite[0].len();
    let count = T::count(elite.len());
    let mu: Vec<T> = (0..d).map(|i| elite.iter().fold(T::zero(), |a, x| a + x[i]) / count).collect();
    let sigma = (0..d)
        .map(|i| {
            let ss = elite.iter().fold(T::zero(), |a, x| a + (x[i] - mu[i]) * (x[i] - mu[i]));
            (ss / count).sqrt()
        })
        .collect();
    (mu, sigma)
}

/// `beta - beta (1 - 1/t)^q`.
pub fn smoothing_beta<T: Scalar>(beta: T, q: T, t: usize) -> T {
    let t = T::count(t.max(1));
    beta - beta * (T::one() - T::one() / t).powf(q)
}

/// Blends the refit `(mu, sigma)` with the previous level's parameters.
pub fn smooth_update<T: Scalar>(
    new: (Vec<T>, Vec<T>),
    prev: (Vec<T>, Vec<T>),
    t: usize,
    cfg: &CEConfig<T>,
) -> (Vec<T>, Vec<T>) {
    let alpha = cfg.smooth_alpha;
    let beta_t = smoothing_beta(cfg.smooth_beta, cfg.smooth_q, t);
    let mu = new.0.iter().zip(&prev.0).map(|(&n, &p)| alpha * n + (T::one() - alpha) * p).collect();
    let sigma = new.1.iter().zip(&prev.1).map(|(&n, &p)| beta_t * n + (T::one() - beta_t) * p).collect();
    (mu, sigma)
}

/// Runs levels until the deviation criterion or `max_levels`, returning the
/// best point seen (feasible points preferred).
pub fn optimize<T: Scalar, O: Objective<T>>(
    objective: &O,
    space: &DesignSpace<T>,
    cfg: &CEConfig<T>,
) -> Result<OptimizationResult<T>> {
    cfg.validate()?;
    let mut state = CEState::new(space, cfg.seed);
    let mut converged = false;
    while state.level < cfg.max_levels {
        state.step(objective, space, cfg);
        if state.max_sigma() < cfg.tol {
            converged = true;
            break;
        }
    }
    let best = state.best.expect("at least one level ran");
    Ok(OptimizationResult {
        x_star: best.design.clone(),
        s_star: best.penalized,
        k_star: best.k,
        power_star: best.power,
        feasible: best.feasible,
        levels_used: state.level,
        evaluations_used: state.level * cfg.n_samples,
        converged,
        final_mu: state.mu,
        final_sigma: state.sigma,
        trace: state.trace,
    })
}
