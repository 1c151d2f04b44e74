//! Electromechanical model of the bistable piezo-magneto-elastic beam.
//!
//! The beam tip displacement `x` obeys a forced Duffing-type equation with a
//! double-well potential (stable equilibria at `x = ±1`), and the voltage `v`
//! over the resistive load obeys a first-order equation driven by the tip
//! velocity:
//!
//! ```text
//! x'' + 2 xi x' - x (1 - x^2) / 2 - chi v = f cos(omega t)
//! v'  + lambda v + kappa x'             = 0
//! ```
//!
//! Everything here is dimensionless.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Physical coefficients and harmonic excitation of the harvester.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvesterParams<T> {
    /// Damping ratio.
    pub xi: T,
    /// Piezoelectric coupling in the mechanical equation.
    pub chi: T,
    /// Reciprocal time constant of the electrical circuit.
    pub lambda: T,
    /// Piezoelectric coupling in the electrical equation.
    pub kappa: T,
    /// Excitation amplitude.
    pub f: T,
    /// Excitation frequency.
    pub omega: T,
}

impl<T: Scalar> HarvesterParams<T> {
    /// Device coefficients used throughout the reference experiments
    /// (`xi = 0.01`, `chi = 0.05`, `lambda = 0.05`, `kappa = 0.5`) with the
    /// given excitation.
    pub fn baseline(f: T, omega: T) -> Self {
        Self { xi: T::lit(0.01), chi: T::lit(0.05), lambda: T::lit(0.05), kappa: T::lit(0.5), f, omega }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.xi, self.chi, self.lambda, self.kappa, self.f, self.omega];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coefficient in {self:?}")));
        }
        if self.lambda <= T::zero() {
            return Err(Error::InvalidParams(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.omega <= T::zero() {
            return Err(Error::InvalidParams(format!("omega must be > 0, got {}", self.omega)));
        }
        Ok(())
    }
}

/// Initial tip position, tip velocity and load voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState<T> {
    pub x0: T,
    pub xdot0: T,
    pub v0: T,
}

impl<T: Scalar> Default for InitialState<T> {
    /// Beam resting in the right-hand well, `(1, 0, 0)`.
    fn default() -> Self {
        Self { x0: T::one(), xdot0: T::zero(), v0: T::zero() }
    }
}

impl<T: Scalar> InitialState<T> {
    pub fn new(x0: T, xdot0: T, v0: T) -> Self {
        Self { x0, xdot0, v0 }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.x0, self.xdot0, self.v0].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("non-finite initial state {self:?}")))
        }
    }
}

/// Integration horizon, step and post-processing windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub t_start: T,
    pub t_end: T,
    pub dt: T,
    /// `(T0, Tf)`: steady-state window for the mean power and the chaos test.
    pub power_window: (T, T),
    /// Downsampling factor applied to the voltage before the 0-1 test.
    pub observable_stride: usize,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            t_start: T::zero(),
            t_end: T::lit(2500.0),
            dt: T::lit(0.01),
            power_window: (T::lit(1250.0), T::lit(2500.0)),
            observable_stride: 100,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (t0, tf) = self.power_window;
        let finite = [self.t_start, self.t_end, self.dt, t0, tf].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite simulation setting".into()));
        }
        if self.dt <= T::zero() {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_start < t0 && t0 < tf && tf <= self.t_end) {
            return Err(Error::InvalidConfig(format!(
                "need t_start < T0 < Tf <= t_end, got {} < {} < {} <= {}",
                self.t_start, t0, tf, self.t_end
            )));
        }
        if self.observable_stride == 0 {
            return Err(Error::InvalidConfig("observable_stride must be >= 1".into()));
        }
        let steps = (self.t_end - self.t_start) / self.dt;
        if (steps - steps.round()).abs() > T::lit(1e-6) * steps.max(T::one()) {
            return Err(Error::InvalidConfig(format!("(t_end - t_start) / dt = {steps} is not an integer")));
        }
        Ok(())
    }

    /// Number of RK4 steps between `t_start` and `t_end`.
    pub fn n_steps(&self) -> usize {
        let steps = ((self.t_end - self.t_start) / self.dt + T::lit(1e-9)).floor();
        steps.to_usize().unwrap_or(0)
    }
}

/// Uniformly sampled trajectory of `(x, x', v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub t0: T,
    pub dt: T,
    pub x: Vec<T>,
    pub xdot: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> TimeSeries<T> {
    /// Series with only the voltage channel populated (`x` and `x'` zero).
    pub fn from_voltage(t0: T, dt: T, v: Vec<T>) -> Self {
        let n = v.len();
        Self { t0, dt, x: vec![T::zero(); n], xdot: vec![T::zero(); n], v }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + T::count(i) * self.dt
    }

    pub fn t_end(&self) -> T {
        self.time(self.len().saturating_sub(1))
    }

    fn check_window(&self, t0: T, tf: T) -> Result<(T, T)> {
        let n = self.len();
        let start = self.t0;
        let end = self.t_end();
        let err = || Error::WindowOutOfRange {
            t0: t0.to_f64_lossy(),
            tf: tf.to_f64_lossy(),
            start: start.to_f64_lossy(),
            end: end.to_f64_lossy(),
        };
        if n < 2 || !(t0 < tf) {
            return Err(err());
        }
        let last = T::count(n - 1);
        let tol = T::lit(1e-9) * last.max(T::one());
        let mut a = (t0 - self.t0) / self.dt;
        let mut b = (tf - self.t0) / self.dt;
        if a < -tol || b > last + tol {
            return Err(err());
        }
        // snap window ends that sit on grid nodes up to rounding
        if (a - a.round()).abs() <= tol {
            a = a.round();
        }
        if (b - b.round()).abs() <= tol {
            b = b.round();
        }
        Ok((a.max(T::zero()), b.min(last)))
    }

    /// Voltage samples inside `[t0, tf]`, keeping every `stride`-th one.
    pub fn voltage_window(&self, t0: T, tf: T, stride: usize) -> Result<Vec<T>> {
        let (a, b) = self.check_window(t0, tf)?;
        let first = a.ceil().to_usize().unwrap_or(0);
        let last = b.floor().to_usize().unwrap_or(0);
        Ok(self.v[first..=last].iter().step_by(stride.max(1)).copied().collect())
    }

    /// CSV with header `t,x,xdot,v` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,xdot,v")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.time(i).to_f64_lossy(),
                self.x[i].to_f64_lossy(),
                self.xdot[i].to_f64_lossy(),
                self.v[i].to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// Right-hand side of the first-order system for `(x, x', v)`.
#[inline]
pub fn rhs<T: Scalar>(state: [T; 3], params: &HarvesterParams<T>, t: T) -> [T; 3] {
    rhs_forced(state, params, params.f * (params.omega * t).cos())
}

/// Right-hand side with the forcing term `f cos(omega t)` already evaluated.
#[inline(always)]
fn rhs_forced<T: Scalar>(state: [T; 3], params: &HarvesterParams<T>, forcing: T) -> [T; 3] {
    let [x, xdot, v] = state;
    let xddot = -T::two() * params.xi * xdot + T::half() * x * (T::one() - x * x) + params.chi * v + forcing;
    let vdot = -params.lambda * v - params.kappa * xdot;
    [xdot, xddot, vdot]
}

/// Classic fixed-step fourth order Runge-Kutta over `[t_start, t_end]`.
///
/// The returned series holds `n_steps + 1` samples, the first one being `ic`.
/// Fails with [`Error::NonFiniteState`] as soon as a state component
/// overflows.
pub fn integrate_rk4<T: Scalar>(
    params: &HarvesterParams<T>,
    ic: &InitialState<T>,
    cfg: &SimConfig<T>,
) -> Result<TimeSeries<T>> {
    params.validate()?;
    ic.validate()?;
    if cfg.dt <= T::zero() || !(cfg.t_start < cfg.t_end) {
        return Err(Error::InvalidConfig(format!(
            "bad integration horizon [{}, {}] with dt = {}",
            cfg.t_start, cfg.t_end, cfg.dt
        )));
    }
    let n = cfg.n_steps();
    let dt = cfg.dt;
    let half_dt = dt * T::half();
    let sixth = T::one() / T::lit(6.0);
    let forcing = |t: T| params.f * (params.omega * t).cos();

    let mut xs = Vec::with_capacity(n + 1);
    let mut xdots = Vec::with_capacity(n + 1);
    let mut vs = Vec::with_capacity(n + 1);
    let mut y = [ic.x0, ic.xdot0, ic.v0];
    xs.push(y[0]);
    xdots.push(y[1]);
    vs.push(y[2]);

    let axpy = |y: &[T; 3], k: &[T; 3], h: T| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]];

    // the end-of-step forcing is the next step's start value
    let mut f_start = forcing(cfg.t_start);
    for i in 0..n {
        let t = cfg.t_start + T::count(i) * dt;
        let f_mid = forcing(t + half_dt);
        let f_end = forcing(cfg.t_start + T::count(i + 1) * dt);
        let k1 = rhs_forced(y, params, f_start);
        let k2 = rhs_forced(axpy(&y, &k1, half_dt), params, f_mid);
        let k3 = rhs_forced(axpy(&y, &k2, half_dt), params, f_mid);
        let k4 = rhs_forced(axpy(&y, &k3, dt), params, f_end);
        for c in 0..3 {
            y[c] += dt * sixth * (k1[c] + T::two() * (k2[c] + k3[c]) + k4[c]);
        }
        if !(y[0].is_finite() && y[1].is_finite() && y[2].is_finite()) {
            return Err(Error::NonFiniteState { t: (t + dt).to_f64_lossy() });
        }
        xs.push(y[0]);
        xdots.push(y[1]);
        vs.push(y[2]);
        f_start = f_end;
    }

    Ok(TimeSeries { t0: cfg.t_start, dt, x: xs, xdot: xdots, v: vs })
}

/// Time average of the instantaneous power `lambda v^2` over `[t0, tf]`.
///
/// Trapezoidal rule on the sampling grid; window ends falling between nodes
/// use the linear interpolant of the integrand.
pub fn mean_power<T: Scalar>(series: &TimeSeries<T>, t0: T, tf: T, lambda: T) -> Result<T> {
    let (a, b) = series.check_window(t0, tf)?;
    let g = |i: usize| lambda * series.v[i] * series.v[i];
    let last = series.len() - 1;
    let interp = |s: T| {
        let k = s.floor().to_usize().unwrap_or(0).min(last - 1);
        let frac = s - T::count(k);
        g(k) + frac * (g(k + 1) - g(k))
    };

    let ia = a.ceil();
    let ib = b.floor();
    let integral = if ia > ib {
        T::half() * (interp(a) + interp(b)) * (b - a)
    } else {
        let lo = ia.to_usize().unwrap_or(0);
        let hi = ib.to_usize().unwrap_or(0);
        let mut sum = T::half() * (interp(a) + g(lo)) * (ia - a);
        sum += T::half() * (g(hi) + interp(b)) * (b - ib);
        if hi > lo {
            let inner: T = (lo + 1..hi).fold(T::zero(), |acc, i| acc + g(i));
            sum += inner + T::half() * (g(lo) + g(hi));
        }
        sum
    };
    Ok(integral / (b - a))
}

/// Adds zero-mean Gaussian measurement noise to the voltage channel.
///
/// The standard deviation is `ratio * max|v|`; the mechanical channels are
/// copied unchanged.
pub fn add_noise<T: Scalar, R: Rng + ?Sized>(series: &TimeSeries<T>, ratio: T, rng: &mut R) -> TimeSeries<T> {
    let mut out = series.clone();
    if ratio <= T::zero() {
        return out;
    }
    let peak = series.v.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let sd = ratio * peak;
    for v in out.v.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sd * T::lit(z);
    }
    out
}
