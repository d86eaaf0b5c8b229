//! Figures of merit extracted from traces, and the analytic prethermal
//! predictions they are compared with.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::Axis;
use crate::propagator::{SampleKind, TimeTrace};
use crate::scalar::Real;
use crate::sequence::AcDrive;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("trace has no {0} samples")]
    Empty(&'static str),
    #[error("samples are not uniformly spaced (spacing {min} to {max})")]
    NonUniform { min: f64, max: f64 },
    #[error("invalid argument `{key}`: {reason}")]
    InvalidArgument { key: &'static str, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct FidelityResult<T> {
    pub f: T,
    pub n_samples: usize,
    pub t_first: T,
    pub t_last: T,
    /// Largest `|<I^c>|` among the samples used.
    pub max_abs: T,
}

/// Parity-weighted average `(1/N') sum_i <I^c(t_i)> (-1)^{parity_i}` over
/// the post-kick samples.
pub fn fidelity<T: Real>(trace: &TimeTrace<T>, axis: Axis) -> Result<FidelityResult<T>, AnalysisError> {
    let mut n = 0usize;
    let mut acc = T::zero();
    let mut max_abs = T::zero();
    let (mut t_first, mut t_last) = (T::zero(), T::zero());
    for s in trace.kicks() {
        let v = s.component(axis);
        if n == 0 {
            t_first = s.time;
        }
        t_last = s.time;
        acc += v * s.toggle();
        max_abs = max_abs.max(v.abs());
        n += 1;
    }
    if n == 0 {
        return Err(AnalysisError::Empty("post-kick"));
    }
    Ok(FidelityResult {
        f: acc / T::from_usize_lossy(n),
        n_samples: n,
        t_first,
        t_last,
        max_abs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LifetimeFit<T> {
    /// Time from the first sample to the `1/e` crossing, or the covered
    /// window when censored.
    pub lifetime: T,
    /// Kicks applied before the crossing.
    pub flips: usize,
    /// No crossing inside the trace: `lifetime` is only a lower bound.
    pub censored: bool,
    pub method: String,
}

fn median_of<T: Real>(v: &mut [T]) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
    }
}

/// Sliding median with window `2 * half + 1`, clipped at the ends.
pub fn sliding_median<T: Real>(values: &[T], half: usize) -> Vec<T> {
    let n = values.len();
    let mut buf = Vec::with_capacity(2 * half + 1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            buf.clear();
            buf.extend_from_slice(&values[lo..hi]);
            median_of(&mut buf)
        })
        .collect()
}

/// `1/e` lifetime of the envelope `|<I^c>|` at the post-kick samples.
///
/// The envelope is smoothed by a sliding median of `2 * smooth_half + 1`
/// kicks (pass the number of kicks per super-period) and compared with the
/// magnitude of the first sample. The crossing time is linearly
/// interpolated.
pub fn lifetime_1e<T: Real>(
    trace: &TimeTrace<T>,
    axis: Axis,
    smooth_half: usize,
) -> Result<LifetimeFit<T>, AnalysisError> {
    let first = trace.initial().ok_or(AnalysisError::Empty("any"))?;
    let t0 = first.time;
    let reference = first.component(axis).abs();
    let kicks: Vec<_> = trace.kicks().collect();
    if kicks.is_empty() {
        return Err(AnalysisError::Empty("post-kick"));
    }
    let raw: Vec<T> = kicks.iter().map(|s| s.component(axis).abs()).collect();
    let env = sliding_median(&raw, smooth_half);
    let level = reference * (-T::one()).exp();
    let method = format!("1/e crossing, median over {} kicks", 2 * smooth_half + 1);
    let (mut t_prev, mut e_prev) = (t0, reference);
    for (i, (s, e)) in kicks.iter().zip(&env).enumerate() {
        if *e < level {
            let t = if e_prev == *e {
                s.time
            } else {
                t_prev + (s.time - t_prev) * (e_prev - level) / (e_prev - *e)
            };
            return Ok(LifetimeFit {
                lifetime: t - t0,
                flips: if t < s.time { i } else { i + 1 },
                censored: false,
                method,
            });
        }
        t_prev = s.time;
        e_prev = *e;
    }
    let last = kicks.last().map_or(t0, |s| s.time);
    Ok(LifetimeFit {
        lifetime: last - t0,
        flips: kicks.len(),
        censored: true,
        method,
    })
}

/// Effective `x` rotation per kick produced by the AC field during a kick of
/// width `tau_y`: `sin(phase) * amplitude * tau_y / gamma_y`.
pub fn effective_field<T: Real>(drive: &AcDrive<T>, tau_y: T, gamma_y: T) -> Result<T, AnalysisError> {
    if !(gamma_y > T::zero()) {
        return Err(AnalysisError::InvalidArgument {
            key: "gamma_y",
            reason: format!("must be positive, got {gamma_y}"),
        });
    }
    Ok(drive.phase.sin() * drive.amplitude * tau_y / gamma_y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PrethermalPrediction<T> {
    pub b_eff: T,
    pub j_spinlock: T,
    pub mu: T,
    /// `1/temperature` of the prethermal ensemble.
    pub inverse_temperature: T,
    /// Magnetisation per spin along the field.
    pub m_plateau: T,
}

/// High-temperature prediction for a state with polarisation `mu` along a
/// field `b_eff`, relaxing under a spin-lock Hamiltonian of scale
/// `j_spinlock`.
pub fn prethermal_oracle<T: Real>(b_eff: T, j_spinlock: T, mu: T) -> Result<PrethermalPrediction<T>, AnalysisError> {
    if !(j_spinlock > T::zero()) {
        return Err(AnalysisError::InvalidArgument {
            key: "j_spinlock",
            reason: format!("must be positive, got {j_spinlock}"),
        });
    }
    let denom = b_eff * b_eff + j_spinlock * j_spinlock;
    Ok(PrethermalPrediction {
        b_eff,
        j_spinlock,
        mu,
        inverse_temperature: -mu * b_eff / denom,
        m_plateau: mu * b_eff * b_eff / denom,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct BeatEstimate<T> {
    /// `None` when fewer than two envelope sign changes were found.
    pub frequency: Option<T>,
    pub crossings: usize,
}

impl<T: Real> BeatEstimate<T> {
    pub fn is_censored(&self) -> bool {
        self.frequency.is_none()
    }
}

/// Beat frequency from the sign changes of the parity-demodulated post-kick
/// signal. A sign change only counts once the signal has moved past
/// `hysteresis * max|signal|` on the other side, which suppresses noise
/// near zero.
pub fn beat_frequency<T: Real>(trace: &TimeTrace<T>, axis: Axis, hysteresis: T) -> BeatEstimate<T> {
    let pts: Vec<(T, T)> = trace
        .kicks()
        .map(|s| (s.time, s.component(axis) * s.toggle()))
        .collect();
    let amp = pts.iter().fold(T::zero(), |m, (_, v)| m.max(v.abs()));
    let h = amp * hysteresis;
    let mut state = 0i8;
    let mut last_zero: Option<T> = None;
    let mut crossings = Vec::new();
    for (i, (t, v)) in pts.iter().enumerate() {
        if i > 0 {
            let (tp, vp) = pts[i - 1];
            if (vp <= T::zero() && *v > T::zero()) || (vp >= T::zero() && *v < T::zero()) {
                last_zero = Some(tp + (*t - tp) * vp / (vp - *v));
            }
        }
        let now = if *v > h {
            1
        } else if *v < -h {
            -1
        } else {
            0
        };
        if now != 0 && now != state {
            if state != 0 {
                crossings.push(last_zero.unwrap_or(*t));
            }
            state = now;
        }
    }
    let n = crossings.len();
    let frequency = if n >= 2 {
        let span = crossings[n - 1] - crossings[0];
        Some(T::from_usize_lossy(n - 1) / (T::lit(2.0) * span))
    } else {
        None
    };
    BeatEstimate { frequency, crossings: n }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    /// Single-sided amplitude: a sinusoid of amplitude `A` on a bin gives `A`.
    pub magnitudes: Vec<f64>,
    pub band: (f64, f64),
    pub band_mean: f64,
}

impl Spectrum {
    /// Frequency of the largest non-DC component.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.frequencies
            .iter()
            .zip(&self.magnitudes)
            .skip(1)
            .fold(None, |best: Option<(f64, f64)>, (f, m)| match best {
                Some((_, bm)) if bm >= *m => best,
                _ => Some((*f, *m)),
            })
    }
}

fn unwrap_phase(phi: &[f64]) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(phi.len());
    let mut offset = 0.0;
    for (i, p) in phi.iter().enumerate() {
        if i > 0 {
            let d = p - phi[i - 1];
            if d > std::f64::consts::PI {
                offset -= two_pi;
            } else if d < -std::f64::consts::PI {
                offset += two_pi;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Amplitude spectrum of the unwrapped transverse phase `phi(t)` over the
/// post-pulse samples, with the mean magnitude inside `band`.
pub fn phase_dft<T: Real>(trace: &TimeTrace<T>, band: (f64, f64)) -> Result<Spectrum, AnalysisError> {
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|s| s.kind != SampleKind::Initial)
        .map(|s| (s.time.as_f64(), s.phi().as_f64()))
        .collect();
    if pts.len() < 2 {
        return Err(AnalysisError::Empty("post-pulse"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for w in pts.windows(2) {
        let d = w[1].0 - w[0].0;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > 0.0) || (hi - lo) > 1e-9 * hi.max(1.0) {
        return Err(AnalysisError::NonUniform { min: lo, max: hi });
    }
    let dt = (pts[pts.len() - 1].0 - pts[0].0) / (pts.len() - 1) as f64;
    let phi: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let un = unwrap_phase(&phi);
    let mean = un.iter().sum::<f64>() / un.len() as f64;
    let n = un.len();
    let mut buf: Vec<Complex<f64>> = un.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 / (n as f64 * dt)).collect();
    let magnitudes: Vec<f64> = (0..=half)
        .map(|k| {
            let scale = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
            buf[k].norm() * scale / n as f64
        })
        .collect();
    let in_band: Vec<f64> = frequencies
        .iter()
        .zip(&magnitudes)
        .filter(|(f, _)| **f >= band.0 && **f <= band.1)
        .map(|(_, m)| *m)
        .collect();
    let band_mean = if in_band.is_empty() {
        0.0
    } else {
        in_band.iter().sum::<f64>() / in_band.len() as f64
    };
    Ok(Spectrum {
        frequencies,
        magnitudes,
        band,
        band_mean,
    })
}

/// Mean and sample standard deviation; the deviation is `None` for a single
/// value.
pub fn mean_std(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    Some((mean, std))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit { slope, intercept, r2 })
}

/// Slope of `log y` against `log x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Fit `a sin^2(phi) + b`; returns `(a, b, r2)`.
pub fn fit_sin2(phi: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let s: Vec<f64> = phi.iter().map(|p| p.sin().powi(2)).collect();
    linear_fit(&s, y).map(|f| (f.slope, f.intercept, f.r2))
}
