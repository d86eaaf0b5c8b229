//! Drive protocols as ordered segments of free evolution and rectangular
//! pulses.
//!
//! Time convention: absolute time `t = 0` is the centre of the first `y`
//! pulse. The AC field is `B(t) = A sin(2 pi f t + phase)`, so `phase = pi/2`
//! puts field extrema on the `y` pulse centres. Schedules built without any
//! `y` pulse start at `t = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("invalid schedule parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> SequenceError {
    SequenceError::InvalidParameter {
        key,
        reason: reason.into(),
    }
}

/// Sinusoidal field along `z`, in angular-frequency units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct AcDrive<T> {
    pub amplitude: T,
    /// Cycles per unit time.
    pub frequency: T,
    pub phase: T,
}

impl<T: Real> AcDrive<T> {
    pub fn new(amplitude: T, frequency: T, phase: T) -> Result<Self, SequenceError> {
        if !(amplitude >= T::zero()) {
            return Err(invalid("amplitude", format!("must be >= 0, got {amplitude}")));
        }
        if !(frequency >= T::zero()) {
            return Err(invalid("frequency", format!("must be >= 0, got {frequency}")));
        }
        Ok(Self {
            amplitude,
            frequency,
            phase,
        })
    }

    pub fn off() -> Self {
        Self {
            amplitude: T::zero(),
            frequency: T::zero(),
            phase: T::zero(),
        }
    }

    pub fn is_off(&self) -> bool {
        self.amplitude == T::zero()
    }

    pub fn field(&self, t: T) -> T {
        self.amplitude * (T::two_pi() * self.frequency * t + self.phase).sin()
    }
}

/// `sin(x) / x` with the removable singularity filled in.
fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// Exact phase accumulated from the AC field between `t_start` and `t_end`.
pub fn ac_integral<T: Real>(drive: &AcDrive<T>, t_start: T, t_end: T) -> T {
    if drive.is_off() || t_end == t_start {
        return T::zero();
    }
    let omega = T::two_pi() * drive.frequency;
    let dt = t_end - t_start;
    let mid = (t_start + t_end) * T::lit(0.5);
    drive.amplitude * dt * (omega * mid + drive.phase).sin() * sinc(omega * dt * T::lit(0.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Free,
    XPulse,
    YPulse,
}

/// One piece of a schedule. `t0` is absolute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Segment<T> {
    pub kind: SegmentKind,
    pub t0: T,
    pub duration: T,
    /// Nominal rotation angle; zero for free evolution.
    pub angle: T,
    /// Emit a sample after this segment.
    pub readout: bool,
}

impl<T: Real> Segment<T> {
    pub fn t_end(&self) -> T {
        self.t0 + self.duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    SingleTone,
    TwoTone,
    ThreeTone,
    SpinLock,
}

/// One super-period of segments repeated `cycles` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PulseSchedule<T> {
    kind: ScheduleKind,
    /// Template with `t0` relative to the super-period start.
    template: Vec<Segment<T>>,
    super_period: T,
    cycles: usize,
    origin: T,
    /// Realized kick periods, one per kick block.
    kick_periods: Vec<T>,
    /// Number of `x` pulses per kick block.
    blocks: Vec<usize>,
}

impl<T: Real> PulseSchedule<T> {
    fn new(
        kind: ScheduleKind,
        template: Vec<Segment<T>>,
        cycles: usize,
        origin: T,
        kick_periods: Vec<T>,
        blocks: Vec<usize>,
    ) -> Self {
        let super_period = template.iter().fold(T::zero(), |a, s| a + s.duration);
        Self {
            kind,
            template,
            super_period,
            cycles,
            origin,
            kick_periods,
            blocks,
        }
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn template(&self) -> &[Segment<T>] {
        &self.template
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// Length of one repetition of the template.
    pub fn super_period(&self) -> T {
        self.super_period
    }

    /// Absolute start time.
    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn duration(&self) -> T {
        self.super_period * T::from_usize_lossy(self.cycles)
    }

    pub fn t_end(&self) -> T {
        self.origin + self.duration()
    }

    /// Realized kick period of each block (a single entry except for
    /// three-tone schedules, none for spin-lock trains).
    pub fn kick_periods(&self) -> &[T] {
        &self.kick_periods
    }

    /// Period `T` of the first kick block.
    pub fn period(&self) -> Option<T> {
        self.kick_periods.first().copied()
    }

    /// Resonance `1 / (2T)` of each kick block.
    pub fn resonances(&self) -> Vec<T> {
        self.kick_periods
            .iter()
            .map(|p| T::one() / (T::lit(2.0) * *p))
            .collect()
    }

    pub fn f_res(&self) -> Option<T> {
        self.resonances().first().copied()
    }

    /// Number of `x` pulses in each kick block.
    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn n_segments(&self) -> usize {
        self.template.len() * self.cycles
    }

    pub fn kicks_per_cycle(&self) -> usize {
        self.template
            .iter()
            .filter(|s| s.kind == SegmentKind::YPulse)
            .count()
    }

    pub fn n_kicks(&self) -> usize {
        self.kicks_per_cycle() * self.cycles
    }

    pub fn with_cycles(&self, cycles: usize) -> Self {
        let mut s = self.clone();
        s.cycles = cycles;
        s
    }

    /// All segments in time order with absolute start times.
    pub fn segments(&self) -> impl Iterator<Item = Segment<T>> + '_ {
        (0..self.cycles).flat_map(move |c| {
            let base = self.origin + self.super_period * T::from_usize_lossy(c);
            self.template.iter().map(move |s| Segment {
                t0: base + s.t0,
                ..*s
            })
        })
    }
}

struct TemplateBuilder<T> {
    segs: Vec<Segment<T>>,
    t: T,
}

impl<T: Real> TemplateBuilder<T> {
    fn new() -> Self {
        Self {
            segs: Vec::new(),
            t: T::zero(),
        }
    }

    fn push(&mut self, kind: SegmentKind, duration: T, angle: T, readout: bool) {
        self.segs.push(Segment {
            kind,
            t0: self.t,
            duration,
            angle,
            readout,
        });
        self.t += duration;
    }

    /// `n` repetitions of free `tau` followed by an `x` pulse, then a final
    /// free `tau` and one `y` pulse. Returns the block length.
    fn kick_block(&mut self, n: usize, tau: T, tau_x: T, theta: T, tau_y: T, gamma: T) -> T {
        let start = self.t;
        for _ in 0..n {
            self.push(SegmentKind::Free, tau, T::zero(), false);
            self.push(SegmentKind::XPulse, tau_x, theta, true);
        }
        self.push(SegmentKind::Free, tau, T::zero(), false);
        self.push(SegmentKind::YPulse, tau_y, gamma, true);
        self.t - start
    }
}

fn positive<T: Real>(key: &'static str, v: T) -> Result<(), SequenceError> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite<T: Real>(key: &'static str, v: T) -> Result<(), SequenceError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite, got {v}")))
    }
}

/// Two-tone drive: per period, `n` spin-lock pulses (each preceded by a free
/// gap `tau`), a final gap `tau` and one `y` kick.
///
/// `tau` is the free time between pulse edges, so the realized period is
/// `T = (n + 1) tau + n tau_x + tau_y`. Samples follow every pulse.
pub fn build_two_tone<T: Real>(
    n: usize,
    tau: T,
    tau_x: T,
    tau_y: T,
    theta_x: T,
    gamma_y: T,
    cycles: usize,
) -> Result<PulseSchedule<T>, SequenceError> {
    positive("tau", tau)?;
    positive("tau_x", tau_x)?;
    positive("tau_y", tau_y)?;
    finite("theta_x", theta_x)?;
    finite("gamma_y", gamma_y)?;
    let mut b = TemplateBuilder::new();
    let period = b.kick_block(n, tau, tau_x, theta_x, tau_y, gamma_y);
    let origin = -(period - tau_y * T::lit(0.5));
    Ok(PulseSchedule::new(
        ScheduleKind::TwoTone,
        b.segs,
        cycles,
        origin,
        vec![period],
        vec![n],
    ))
}

/// Kicks only: free evolution for `tau - tau_y`, then a `y` pulse of width
/// `tau_y`. `tau_y = 0` gives instantaneous kicks.
pub fn build_single_tone<T: Real>(
    tau: T,
    tau_y: T,
    gamma_y: T,
    cycles: usize,
) -> Result<PulseSchedule<T>, SequenceError> {
    positive("tau", tau)?;
    if !(tau_y >= T::zero()) || !(tau_y < tau) {
        return Err(invalid("tau_y", format!("need 0 <= tau_y < tau, got {tau_y}")));
    }
    finite("gamma_y", gamma_y)?;
    let mut b = TemplateBuilder::new();
    b.push(SegmentKind::Free, tau - tau_y, T::zero(), false);
    b.push(SegmentKind::YPulse, tau_y, gamma_y, true);
    let origin = -(tau - tau_y * T::lit(0.5));
    Ok(PulseSchedule::new(
        ScheduleKind::SingleTone,
        b.segs,
        cycles,
        origin,
        vec![tau],
        vec![0],
    ))
}

/// Two interleaved kick blocks of `n1` and `n2` spin-lock pulses, each
/// closed by a `y` pulse. Each block has its own resonance `1 / (2 T_i)`.
#[allow(clippy::too_many_arguments)]
pub fn build_three_tone<T: Real>(
    n1: usize,
    n2: usize,
    tau: T,
    tau_x: T,
    tau_y: T,
    theta_x: T,
    gamma_y: T,
    cycles: usize,
) -> Result<PulseSchedule<T>, SequenceError> {
    if n1 == n2 {
        return Err(invalid("n2", format!("block sizes must differ, both are {n1}")));
    }
    positive("tau", tau)?;
    positive("tau_x", tau_x)?;
    positive("tau_y", tau_y)?;
    finite("theta_x", theta_x)?;
    finite("gamma_y", gamma_y)?;
    let mut b = TemplateBuilder::new();
    let p1 = b.kick_block(n1, tau, tau_x, theta_x, tau_y, gamma_y);
    let p2 = b.kick_block(n2, tau, tau_x, theta_x, tau_y, gamma_y);
    let origin = -(p1 - tau_y * T::lit(0.5));
    Ok(PulseSchedule::new(
        ScheduleKind::ThreeTone,
        b.segs,
        cycles,
        origin,
        vec![p1, p2],
        vec![n1, n2],
    ))
}

/// Spin-lock train without kicks: `n_pulses` repetitions of a free gap `tau`
/// followed by an `x` pulse, sampled uniformly after every pulse.
pub fn build_spin_lock<T: Real>(
    tau: T,
    tau_x: T,
    theta_x: T,
    n_pulses: usize,
) -> Result<PulseSchedule<T>, SequenceError> {
    positive("tau", tau)?;
    positive("tau_x", tau_x)?;
    finite("theta_x", theta_x)?;
    let mut b = TemplateBuilder::new();
    b.push(SegmentKind::Free, tau, T::zero(), false);
    b.push(SegmentKind::XPulse, tau_x, theta_x, true);
    Ok(PulseSchedule::new(
        ScheduleKind::SpinLock,
        b.segs,
        n_pulses,
        T::zero(),
        Vec::new(),
        Vec::new(),
    ))
}

/// Static per-site errors: `x` angle rates `chi`, `y` angle rates `eta` and
/// `z` offsets `zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct DisorderRealization<T> {
    pub sigma: T,
    pub seed: u64,
    pub chi: Vec<T>,
    pub eta: Vec<T>,
    pub zeta: Vec<T>,
}

impl<T: Real> DisorderRealization<T> {
    pub fn none(n_spins: usize) -> Self {
        Self {
            sigma: T::zero(),
            seed: 0,
            chi: vec![T::zero(); n_spins],
            eta: vec![T::zero(); n_spins],
            zeta: vec![T::zero(); n_spins],
        }
    }

    pub fn n_spins(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_zero(&self) -> bool {
        self.chi
            .iter()
            .chain(&self.eta)
            .chain(&self.zeta)
            .all(|x| *x == T::zero())
    }
}

/// Draw every entry uniformly from `[-sigma/2, sigma/2]`.
pub fn sample_disorder<T: Real>(
    sigma: T,
    n_spins: usize,
    seed: u64,
) -> Result<DisorderRealization<T>, SequenceError> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(invalid("sigma", format!("must be >= 0, got {sigma}")));
    }
    if sigma == T::zero() {
        return Ok(DisorderRealization {
            seed,
            ..DisorderRealization::none(n_spins)
        });
    }
    let half = sigma.as_f64() * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<T> {
        (0..n).map(|_| T::lit(rng.gen_range(-half..=half))).collect()
    };
    let chi = draw(n_spins);
    let eta = draw(n_spins);
    let zeta = draw(n_spins);
    Ok(DisorderRealization {
        sigma,
        seed,
        chi,
        eta,
        zeta,
    })
}

/// Everything needed to replay a trajectory's drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ScheduleRecord<T> {
    pub schedule: PulseSchedule<T>,
    pub drive: AcDrive<T>,
    pub disorder_sigma: T,
    pub disorder_seed: Option<u64>,
    pub period: Option<T>,
    pub f_res: Vec<T>,
}

impl<T: Real + Serialize> ScheduleRecord<T> {
    pub fn new(
        schedule: &PulseSchedule<T>,
        drive: &AcDrive<T>,
        disorder: Option<&DisorderRealization<T>>,
    ) -> Self {
        Self {
            schedule: schedule.clone(),
            drive: *drive,
            disorder_sigma: disorder.map_or(T::zero(), |d| d.sigma),
            disorder_seed: disorder.map(|d| d.seed),
            period: schedule.period(),
            f_res: schedule.resonances(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule records always serialize")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_vec(self).expect("schedule records always serialize");
        let digest = Sha256::digest(&compact);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
