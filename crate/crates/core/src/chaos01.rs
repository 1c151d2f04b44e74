//! The 0-1 test for chaos.
//!
//! An observable `phi_j` drives a planar walk `(p_n, q_n)` at frequency `c`.
//! Regular dynamics keep the walk bounded, chaotic dynamics make it diffuse.
//! The growth rate of the mean square displacement `M_n` is measured through
//! its correlation with the lag `n`, giving `K_c` close to 0 (regular) or 1
//! (chaotic). The median over many random `c` rejects resonant frequencies.

use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shortest observable the classifier accepts.
pub const MIN_SERIES_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Test01Config<T> {
    /// Number of random frequencies `c`.
    pub n_c: usize,
    pub c_min: T,
    pub c_max: T,
    /// Largest lag as a fraction of the series length, `n_max = floor(N * frac)`.
    pub n_cut_fraction: T,
}

impl<T: Scalar> Default for Test01Config<T> {
    fn default() -> Self {
        Self {
            n_c: 100,
            c_min: T::PI() / T::lit(5.0),
            c_max: T::lit(4.0) * T::PI() / T::lit(5.0),
            n_cut_fraction: T::lit(0.1),
        }
    }
}

impl<T: Scalar> Test01Config<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 {
            return Err(Error::InvalidConfig("n_c must be >= 1".into()));
        }
        if !(T::zero() < self.c_min && self.c_min < self.c_max && self.c_max < T::TAU()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < c_min < c_max < 2pi, got ({}, {})",
                self.c_min, self.c_max
            )));
        }
        if !(T::zero() < self.n_cut_fraction && self.n_cut_fraction <= T::half()) {
            return Err(Error::InvalidConfig(format!(
                "n_cut_fraction must lie in (0, 0.5], got {}",
                self.n_cut_fraction
            )));
        }
        Ok(())
    }

    pub fn n_max(&self, len: usize) -> usize {
        (T::count(len) * self.n_cut_fraction).floor().to_usize().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Test01Result<T> {
    /// Median of `k_c_values`.
    pub k: T,
    pub k_c_values: Vec<T>,
    pub c_values: Vec<T>,
    /// How many `K_c` fell back to 0 because `M_n` had no variance.
    pub degenerate: usize,
}

/// Pearson correlation, with the zero-variance fallback made explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation<T> {
    pub value: T,
    pub degenerate: bool,
}

/// Cumulative `cos`/`sin` weighted sums of the observable.
pub fn translation_vars<T: Scalar>(phi: &[T], c: T) -> (Vec<T>, Vec<T>) {
    let z = translation_walk(phi, c);
    z.into_iter().map(|w| (w.re, w.im)).unzip()
}

/// `p_n + i q_n` for `n = 1..=N`.
///
/// The phasor `e^{ijc}` is advanced by complex multiplication and re-anchored
/// on the exact value every 1024 steps.
fn translation_walk<T: Scalar>(phi: &[T], c: T) -> Vec<Complex<T>> {
    let step = Complex::new(c.cos(), c.sin());
    let mut phasor = step;
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut out = Vec::with_capacity(phi.len());
    for (idx, &value) in phi.iter().enumerate() {
        let j = idx + 1;
        if j % 1024 == 0 {
            let angle = T::count(j) * c;
            phasor = Complex::new(angle.cos(), angle.sin());
        }
        acc += phasor * value;
        out.push(acc);
        phasor *= step;
    }
    out
}

/// Time-averaged mean square displacement for lags `1..=n_max`, by direct
/// summation over all available lag pairs.
pub fn msd<T: Scalar>(p: &[T], q: &[T], n_max: usize) -> Result<Vec<T>> {
    let len = p.len();
    if q.len() != len {
        return Err(Error::InvalidConfig(format!("p has {len} samples but q has {}", q.len())));
    }
    if n_max >= len {
        return Err(Error::InsufficientLength { n_max, len });
    }
    Ok((1..=n_max)
        .map(|n| {
            let sum = (0..len - n).fold(T::zero(), |acc, j| {
                let dp = p[j + n] - p[j];
                let dq = q[j + n] - q[j];
                acc + dp * dp + dq * dq
            });
            sum / T::count(len - n)
        })
        .collect())
}

/// Same quantity as [`msd`] in `O(N log N)`: the cross terms
/// `sum_j p_{j+n} p_j + q_{j+n} q_j` are read off one FFT autocorrelation of
/// `p + i q`, the square terms off prefix sums.
pub fn msd_fast<T: Scalar>(p: &[T], q: &[T], n_max: usize) -> Result<Vec<T>> {
    if q.len() != p.len() {
        return Err(Error::InvalidConfig(format!("p has {} samples but q has {}", p.len(), q.len())));
    }
    let z: Vec<Complex<T>> = p.iter().zip(q).map(|(&a, &b)| Complex::new(a, b)).collect();
    let mut engine = MsdEngine::new(z.len(), n_max)?;
    Ok(engine.msd(&z))
}

/// Reusable FFT plans and buffers for repeated MSD evaluations at one length.
struct MsdEngine<T: Scalar> {
    len: usize,
    n_max: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    prefix: Vec<T>,
}

impl<T: Scalar> MsdEngine<T> {
    fn new(len: usize, n_max: usize) -> Result<Self> {
        if n_max >= len {
            return Err(Error::InsufficientLength { n_max, len });
        }
        let fft_len = smooth_size(len + n_max);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Ok(Self {
            len,
            n_max,
            forward,
            inverse,
            buf: vec![Complex::new(T::zero(), T::zero()); fft_len],
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
            prefix: vec![T::zero(); len + 1],
        })
    }

    fn msd(&mut self, z: &[Complex<T>]) -> Vec<T> {
        debug_assert_eq!(z.len(), self.len);
        let zero = Complex::new(T::zero(), T::zero());
        self.buf[..self.len].copy_from_slice(z);
        self.buf[self.len..].fill(zero);
        for (k, w) in z.iter().enumerate() {
            self.prefix[k + 1] = self.prefix[k] + w.norm_sqr();
        }

        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        for w in self.buf.iter_mut() {
            *w = Complex::new(w.norm_sqr(), T::zero());
        }
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = T::one() / T::count(self.buf.len());

        let total = self.prefix[self.len];
        (1..=self.n_max)
            .map(|n| {
                let count = self.len - n;
                let tail = total - self.prefix[n];
                let head = self.prefix[count];
                let cross = self.buf[n].re * scale;
                ((tail + head - T::two() * cross) / T::count(count)).max(T::zero())
            })
            .collect()
    }
}

/// Smallest `2^a 3^b 5^c` not below `n`.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for f in [2, 3, 5] {
            while r.is_multiple_of(f) {
                r /= f;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Correlation of `M_n` against the lag mesh; zero variance in either
/// argument yields `K_c = 0` flagged as degenerate.
pub fn correlation_k<T: Scalar>(t_mesh: &[T], m: &[T]) -> Correlation<T> {
    let n = t_mesh.len().min(m.len());
    let degenerate = Correlation { value: T::zero(), degenerate: true };
    if n < 2 {
        return degenerate;
    }
    let nn = T::count(n);
    let mean_t = t_mesh[..n].iter().fold(T::zero(), |a, &b| a + b) / nn;
    let mean_m = m[..n].iter().fold(T::zero(), |a, &b| a + b) / nn;
    let (mut cov, mut var_t, mut var_m) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let dt = t_mesh[i] - mean_t;
        let dm = m[i] - mean_m;
        cov += dt * dm;
        var_t += dt * dt;
        var_m += dm * dm;
    }
    // spread below 1e-12 of the magnitude is round-off, not growth
    let scale_m = m[..n].iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let floor_m = (T::lit(1e-12) * scale_m).powi(2) * nn;
    if var_t <= T::zero() || var_m <= floor_m {
        return degenerate;
    }
    let r = cov / (var_t * var_m).sqrt();
    Correlation { value: r.max(-T::one()).min(T::one()), degenerate: false }
}

pub fn median<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        T::half() * (v[mid - 1] + v[mid])
    }
}

/// Runs the full test: `n_c` random frequencies drawn up front from
/// `(c_min, c_max)`, one `K_c` each, median as the classifier.
///
/// The observable is centred first, so a constant signal walks nowhere and
/// classifies as regular through the degenerate-variance rule.
pub fn classify<T: Scalar, R: Rng + ?Sized>(phi: &[T], cfg: &Test01Config<T>, rng: &mut R) -> Result<Test01Result<T>> {
    cfg.validate()?;
    let len = phi.len();
    if len < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len, min: MIN_SERIES_LEN });
    }
    let n_max = cfg.n_max(len);
    if n_max < 2 {
        return Err(Error::InsufficientLength { n_max, len });
    }

    let (lo, hi) = (cfg.c_min.to_f64_lossy(), cfg.c_max.to_f64_lossy());
    let c_values: Vec<T> = (0..cfg.n_c).map(|_| T::lit(rng.random_range(lo..hi))).collect();

    let mean = phi.iter().fold(T::zero(), |a, &b| a + b) / T::count(len);
    let mut centred: Vec<T> = phi.iter().map(|&x| x - mean).collect();
    let spread = centred.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if spread <= T::lit(1e-12) * mean.abs() {
        centred.fill(T::zero());
    }
    let lags: Vec<T> = (1..=n_max).map(T::count).collect();

    let mut engine = MsdEngine::new(len, n_max)?;
    let mut degenerate = 0;
    let k_c_values: Vec<T> = c_values
        .iter()
        .map(|&c| {
            let z = translation_walk(&centred, c);
            let m = engine.msd(&z);
            let corr = correlation_k(&lags, &m);
            if corr.degenerate {
                degenerate += 1;
            }
            corr.value
        })
        .collect();

    Ok(Test01Result { k: median(&k_c_values), k_c_values, c_values, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_observable_gives_zero_walk() {
        let (p, q) = translation_vars(&[0.0f64; 50], 1.3);
        assert!(p.iter().chain(&q).all(|&v| v == 0.0));
    }

    #[test]
    fn walk_at_pi_alternates() {
        let (p, q) = translation_vars(&[1.0f64; 3000], std::f64::consts::PI);
        for (n, (&pn, &qn)) in p.iter().zip(&q).enumerate() {
            let expected = if n % 2 == 0 { -1.0 } else { 0.0 };
            assert_abs_diff_eq!(pn, expected, epsilon = 1e-10);
            assert_abs_diff_eq!(qn, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn walk_matches_direct_trig() {
        let phi: Vec<f64> = (0..5000).map(|j| (0.37 * j as f64).sin() + 0.2).collect();
        let c = 1.1;
        let (p, q) = translation_vars(&phi, c);
        let (mut sp, mut sq) = (0.0, 0.0);
        for (j, &x) in phi.iter().enumerate() {
            let a = (j + 1) as f64 * c;
            sp += x * a.cos();
            sq += x * a.sin();
            assert_abs_diff_eq!(p[j], sp, epsilon = 1e-9);
            assert_abs_diff_eq!(q[j], sq, epsilon = 1e-9);
        }
    }

    #[test]
    fn msd_of_zero_walk() {
        let z = vec![0.0f64; 40];
        assert!(msd(&z, &z, 10).unwrap().iter().all(|&m| m == 0.0));
        assert!(msd_fast(&z, &z, 10).unwrap().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn msd_of_linear_drift_is_square_lag() {
        let p: Vec<f64> = (1..=200).map(|j| j as f64).collect();
        let q = vec![0.0; 200];
        let direct = msd(&p, &q, 20).unwrap();
        let fast = msd_fast(&p, &q, 20).unwrap();
        for n in 1..=20 {
            assert_eq!(direct[n - 1], (n * n) as f64);
            assert!((fast[n - 1] - (n * n) as f64).abs() < 1e-8 * (n * n) as f64);
        }
    }

    #[test]
    fn msd_rejects_too_many_lags() {
        let p = vec![1.0f64; 10];
        assert_eq!(msd(&p, &p, 10), Err(Error::InsufficientLength { n_max: 10, len: 10 }));
        assert!(msd_fast(&p, &p, 12).is_err());
        assert!(msd(&p, &p[..9], 3).is_err());
    }

    #[test]
    fn correlation_of_line_is_one() {
        let t: Vec<f64> = (1..=50).map(|n| n as f64).collect();
        let m: Vec<f64> = t.iter().map(|n| 3.0 * n + 2.0).collect();
        let c = correlation_k(&t, &m);
        assert!(!c.degenerate);
        assert_abs_diff_eq!(c.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_of_constant_is_degenerate_zero() {
        let t: Vec<f64> = (1..=50).map(|n| n as f64).collect();
        let c = correlation_k(&t, &[4.2; 50]);
        assert_eq!(c, Correlation { value: 0.0, degenerate: true });
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(13750), 13824);
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(1), 1);
    }

    #[test]
    fn short_series_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = classify(&[1.0f64; 99], &Test01Config::default(), &mut rng).unwrap_err();
        assert_eq!(err, Error::SeriesTooShort { len: 99, min: 100 });
    }

    #[test]
    fn constant_series_is_regular() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = classify(&[0.7f64; 1000], &Test01Config::default(), &mut rng).unwrap();
        assert_eq!(r.k, 0.0);
        assert_eq!(r.degenerate, 100);
    }

    #[test]
    fn config_validation() {
        let mut cfg = Test01Config::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.c_max = 7.0;
        assert!(cfg.validate().is_err());
        let mut cfg = Test01Config::<f64>::default();
        cfg.n_cut_fraction = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = Test01Config::<f64>::default();
        cfg.n_c = 0;
        assert!(cfg.validate().is_err());
    }
}
