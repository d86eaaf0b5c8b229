//! Exact state-vector propagation through pulse schedules.
//!
//! Each segment acts as `exp(-i G)` with a time-independent generator: the
//! AC field enters only through its integral over the segment window
//! (quasi-static approximation). A fine-step reference integrator that
//! samples the field inside each segment is provided for validation.

mod checks;
mod generator;
pub mod krylov;
mod state;
mod trace;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checks::{factorized_y_distance, single_particle_check, y_pulse_first_order};
pub use krylov::{Krylov, KrylovError};
pub use state::{initial_state, QuantumState};
pub use trace::{Sample, SampleKind, TimeTrace, TraceIoError, CSV_COLUMNS};

use crate::linalg::{hermitian_expm, matvec, CMatrix};
use crate::operators::{Axis, DipolarHamiltonian, OperatorError, OperatorSet, DENSE_MAX_SPINS};
use crate::scalar::{norm_sqr, Real, C};
use crate::sequence::{ac_integral, AcDrive, DisorderRealization, PulseSchedule, Segment, SegmentKind};
use generator::{apply_site_rotations, apply_z_phase, Generator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Lanczos action of the exponential; memory `O(2^L)`.
    Krylov,
    /// Dense eigendecomposition per distinct generator, memoised.
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorOptions {
    pub engine: Engine,
    /// Per-segment error target of the Krylov engine.
    pub krylov_tol: f64,
    pub krylov_dim: usize,
    /// Largest tolerated `| |psi| - 1 |`.
    pub norm_tol: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            engine: Engine::Krylov,
            krylov_tol: 1e-10,
            krylov_dim: 60,
            norm_tol: 1e-9,
        }
    }
}

impl PropagatorOptions {
    pub fn dense() -> Self {
        Self {
            engine: Engine::Dense,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("norm drifted by {drift:e} at t = {time}")]
    NormDrift { time: f64, drift: f64 },
    #[error("state is at t = {state} but the segment starts at t = {segment}")]
    TimeMismatch { state: f64, segment: f64 },
    #[error("disorder realization does not match the Hamiltonian: {0}")]
    DisorderMismatch(String),
    #[error("dense engine supports at most {max} spins, got {n_spins}")]
    DenseTooLarge { n_spins: usize, max: usize },
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

struct DenseCache<T: Real> {
    h: CMatrix<T>,
    sx: Vec<CMatrix<T>>,
    sy: Vec<CMatrix<T>>,
    iz: CMatrix<T>,
    memo: HashMap<(Vec<u64>, i64), CMatrix<T>>,
}

impl<T: Real> DenseCache<T> {
    fn new(ops: &OperatorSet, hdd: &DipolarHamiltonian<T>) -> Result<Self, OperatorError> {
        let n = ops.n_spins();
        Ok(Self {
            h: hdd.dense()?,
            sx: (0..n).map(|k| ops.dense_site(Axis::X, k)).collect::<Result<_, _>>()?,
            sy: (0..n).map(|k| ops.dense_site(Axis::Y, k)).collect::<Result<_, _>>()?,
            iz: ops.dense_collective(Axis::Z)?,
            memo: HashMap::new(),
        })
    }

    /// `exp(-i G)`, keyed on the generator with `z` bucketed at 1e-12.
    fn unitary(&mut self, g: &Generator<T>) -> &CMatrix<T> {
        let mut bits = vec![g.h_scale.as_f64().to_bits()];
        bits.extend(g.x.iter().map(|v| v.as_f64().to_bits()));
        bits.push(u64::MAX);
        bits.extend(g.y.iter().map(|v| v.as_f64().to_bits()));
        let zq = (g.z.as_f64() / 1e-12).round() as i64;
        let key = (bits, zq);
        if !self.memo.contains_key(&key) {
            let mut m = &self.h * C::new(g.h_scale, T::zero()) + &self.iz * C::new(g.z, T::zero());
            for (l, v) in g.x.iter().enumerate() {
                m += &self.sx[l] * C::new(*v, T::zero());
            }
            for (l, v) in g.y.iter().enumerate() {
                m += &self.sy[l] * C::new(*v, T::zero());
            }
            let u = hermitian_expm(&m, T::one());
            self.memo.insert(key.clone(), u);
        }
        &self.memo[&key]
    }
}

/// Propagates states under one Hamiltonian and disorder realization.
pub struct Propagator<'a, T: Real> {
    ops: &'a OperatorSet,
    hdd: &'a DipolarHamiltonian<T>,
    chi: Vec<T>,
    eta: Vec<T>,
    opts: PropagatorOptions,
    krylov: Krylov<T>,
    dense: Option<DenseCache<T>>,
}

impl<'a, T: Real> Propagator<'a, T> {
    /// `hdd` must already carry the disorder's `z` offsets (see
    /// [`crate::operators::build_hdd`]); the pulse errors are taken from
    /// `disorder`.
    pub fn new(
        ops: &'a OperatorSet,
        hdd: &'a DipolarHamiltonian<T>,
        disorder: Option<&DisorderRealization<T>>,
        opts: PropagatorOptions,
    ) -> Result<Self, PropagatorError> {
        let n = ops.n_spins();
        if hdd.n_spins() != n {
            return Err(OperatorError::SizeMismatch {
                graph: hdd.n_spins(),
                ops: n,
            }
            .into());
        }
        let (chi, eta) = match disorder {
            Some(d) => {
                if d.n_spins() != n || d.chi.len() != n || d.eta.len() != n {
                    return Err(PropagatorError::DisorderMismatch(format!(
                        "realization has {} sites, cluster has {n}",
                        d.n_spins()
                    )));
                }
                let zeta_zero = d.zeta.iter().all(|z| *z == T::zero());
                let matches = match hdd.z_offsets() {
                    Some(z) => z == d.zeta.as_slice(),
                    None => zeta_zero,
                };
                if !matches {
                    return Err(PropagatorError::DisorderMismatch(
                        "z offsets differ from those built into the Hamiltonian".into(),
                    ));
                }
                (d.chi.clone(), d.eta.clone())
            }
            None => (vec![T::zero(); n], vec![T::zero(); n]),
        };
        let dense = match opts.engine {
            Engine::Dense => {
                if n > DENSE_MAX_SPINS {
                    return Err(PropagatorError::DenseTooLarge {
                        n_spins: n,
                        max: DENSE_MAX_SPINS,
                    });
                }
                Some(DenseCache::new(ops, hdd)?)
            }
            Engine::Krylov => None,
        };
        Ok(Self {
            ops,
            hdd,
            chi,
            eta,
            krylov: Krylov::new(ops.dim(), opts.krylov_dim, T::tol_floor(opts.krylov_tol)),
            opts,
            dense,
        })
    }

    pub fn options(&self) -> &PropagatorOptions {
        &self.opts
    }

    /// Lanczos matrix-vector products so far.
    pub fn matvecs(&self) -> u64 {
        self.krylov.matvecs
    }

    fn generator(&self, seg: &Segment<T>, theta: T, frac: T) -> Generator<T> {
        let dur = seg.duration * frac;
        let angle = seg.angle * frac;
        let per_site = |errs: &[T]| errs.iter().map(|e| angle + dur * *e).collect();
        match seg.kind {
            SegmentKind::Free => Generator {
                h_scale: dur,
                x: Vec::new(),
                y: Vec::new(),
                z: theta,
            },
            SegmentKind::XPulse => Generator {
                h_scale: dur,
                x: per_site(&self.chi),
                y: Vec::new(),
                z: theta,
            },
            SegmentKind::YPulse => Generator {
                h_scale: dur,
                x: Vec::new(),
                y: per_site(&self.eta),
                z: theta,
            },
        }
    }

    fn apply_generator(&mut self, g: &Generator<T>, psi: &mut [C<T>]) -> Result<(), PropagatorError> {
        let n = self.ops.n_spins();
        if !g.has_sites() {
            // tau H and theta I^z commute: exact factorisation.
            if g.h_scale != T::zero() {
                let h_only = Generator {
                    z: T::zero(),
                    ..g.clone()
                };
                self.apply_coupled(&h_only, psi)?;
            }
            apply_z_phase(g.z, n, psi);
            return Ok(());
        }
        if g.h_scale == T::zero() {
            apply_site_rotations(g, n, psi);
            return Ok(());
        }
        self.apply_coupled(g, psi)
    }

    fn apply_coupled(&mut self, g: &Generator<T>, psi: &mut [C<T>]) -> Result<(), PropagatorError> {
        match self.dense.as_mut() {
            Some(cache) => {
                let u = cache.unitary(g);
                let out = matvec(u, psi);
                psi.copy_from_slice(&out);
                Ok(())
            }
            None => {
                let h = self.hdd.matrix();
                let n = self.ops.n_spins();
                self.krylov.expm(|v, o| g.apply(h, n, v, o), psi, T::one())?;
                Ok(())
            }
        }
    }

    fn check_norm(&self, state: &QuantumState<T>) -> Result<(), PropagatorError> {
        let drift = (norm_sqr(&state.amps).sqrt() - T::one()).abs().as_f64();
        if drift > self.opts.norm_tol {
            return Err(PropagatorError::NormDrift {
                time: state.time.as_f64(),
                drift,
            });
        }
        Ok(())
    }

    fn check_time(&self, state: &QuantumState<T>, seg: &Segment<T>) -> Result<(), PropagatorError> {
        let scale = T::one().max(seg.t0.abs()).max(seg.duration.abs());
        if (state.time - seg.t0).abs() > T::tol_floor(1e-9) * scale {
            return Err(PropagatorError::TimeMismatch {
                state: state.time.as_f64(),
                segment: seg.t0.as_f64(),
            });
        }
        Ok(())
    }

    /// Apply one segment in the quasi-static approximation.
    pub fn apply_segment(
        &mut self,
        state: &mut QuantumState<T>,
        seg: &Segment<T>,
        drive: &AcDrive<T>,
    ) -> Result<(), PropagatorError> {
        self.check_time(state, seg)?;
        let theta = ac_integral(drive, seg.t0, seg.t_end());
        let g = self.generator(seg, theta, T::one());
        self.apply_generator(&g, &mut state.amps)?;
        state.time = seg.t_end();
        self.check_norm(state)
    }

    /// Apply one segment by `substeps` piecewise-constant slices with the
    /// field sampled at each slice midpoint.
    pub fn apply_segment_fine(
        &mut self,
        state: &mut QuantumState<T>,
        seg: &Segment<T>,
        drive: &AcDrive<T>,
        substeps: usize,
    ) -> Result<(), PropagatorError> {
        self.check_time(state, seg)?;
        let substeps = if seg.duration == T::zero() { 1 } else { substeps.max(1) };
        let frac = T::one() / T::from_usize_lossy(substeps);
        let h = seg.duration * frac;
        for k in 0..substeps {
            let mid = seg.t0 + h * (T::from_usize_lossy(k) + T::lit(0.5));
            let g = self.generator(seg, drive.field(mid) * h, frac);
            self.apply_generator(&g, &mut state.amps)?;
        }
        state.time = seg.t_end();
        self.check_norm(state)
    }

    fn sample(&self, state: &QuantumState<T>, parity: u32, kind: SampleKind) -> Sample<T> {
        Sample {
            time: state.time,
            parity,
            kind,
            ix: state.polarization(self.ops, Axis::X),
            iy: state.polarization(self.ops, Axis::Y),
            iz: state.polarization(self.ops, Axis::Z),
        }
    }

    fn run<F, O>(
        &mut self,
        state: &mut QuantumState<T>,
        schedule: &PulseSchedule<T>,
        mut step: F,
        mut observe: O,
    ) -> Result<TimeTrace<T>, PropagatorError>
    where
        F: FnMut(&mut Self, &mut QuantumState<T>, &Segment<T>) -> Result<(), PropagatorError>,
        O: FnMut(&Sample<T>, &QuantumState<T>),
    {
        state.time = schedule.origin();
        let mut trace = TimeTrace::new(self.ops.n_spins());
        let first = self.sample(state, 0, SampleKind::Initial);
        observe(&first, state);
        trace.samples.push(first);
        let mut parity = 0u32;
        for seg in schedule.segments() {
            step(self, state, &seg)?;
            if seg.kind == SegmentKind::YPulse {
                parity += 1;
            }
            if seg.readout {
                let kind = match seg.kind {
                    SegmentKind::YPulse => SampleKind::PostKick,
                    _ => SampleKind::PostX,
                };
                let s = self.sample(state, parity, kind);
                observe(&s, state);
                trace.samples.push(s);
            }
        }
        Ok(trace)
    }

    /// Propagate through the whole schedule, starting from `state` placed at
    /// the schedule origin.
    pub fn evolve(
        &mut self,
        state: &mut QuantumState<T>,
        schedule: &PulseSchedule<T>,
        drive: &AcDrive<T>,
    ) -> Result<TimeTrace<T>, PropagatorError> {
        self.evolve_observed(state, schedule, drive, |_, _| {})
    }

    /// As [`Propagator::evolve`], calling `observe` at every readout with
    /// the current state.
    pub fn evolve_observed<O>(
        &mut self,
        state: &mut QuantumState<T>,
        schedule: &PulseSchedule<T>,
        drive: &AcDrive<T>,
        observe: O,
    ) -> Result<TimeTrace<T>, PropagatorError>
    where
        O: FnMut(&Sample<T>, &QuantumState<T>),
    {
        self.run(state, schedule, |p, st, seg| p.apply_segment(st, seg, drive), observe)
    }

    /// Reference propagation with `substeps` field samples per segment.
    pub fn evolve_reference(
        &mut self,
        state: &mut QuantumState<T>,
        schedule: &PulseSchedule<T>,
        drive: &AcDrive<T>,
        substeps: usize,
    ) -> Result<TimeTrace<T>, PropagatorError> {
        self.run(
            state,
            schedule,
            |p, st, seg| p.apply_segment_fine(st, seg, drive, substeps),
            |_, _| {},
        )
    }

    /// Undo [`Propagator::evolve`]: segments in reverse order with negated
    /// generators. `state` must sit at the schedule end.
    pub fn evolve_inverse(
        &mut self,
        state: &mut QuantumState<T>,
        schedule: &PulseSchedule<T>,
        drive: &AcDrive<T>,
    ) -> Result<(), PropagatorError> {
        let segs: Vec<Segment<T>> = schedule.segments().collect();
        for seg in segs.iter().rev() {
            let scale = T::one().max(seg.t0.abs());
            if (state.time - seg.t_end()).abs() > T::tol_floor(1e-9) * scale {
                return Err(PropagatorError::TimeMismatch {
                    state: state.time.as_f64(),
                    segment: seg.t_end().as_f64(),
                });
            }
            let theta = ac_integral(drive, seg.t0, seg.t_end());
            let g = self.generator(seg, theta, T::one()).scaled(-T::one());
            self.apply_generator(&g, &mut state.amps)?;
            state.time = seg.t0;
            self.check_norm(state)?;
        }
        Ok(())
    }
}

/// Apply a single segment with default options.
pub fn segment_unitary_apply<T: Real>(
    state: &mut QuantumState<T>,
    segment: &Segment<T>,
    ops: &OperatorSet,
    hdd: &DipolarHamiltonian<T>,
    drive: &AcDrive<T>,
    disorder: Option<&DisorderRealization<T>>,
) -> Result<(), PropagatorError> {
    Propagator::new(ops, hdd, disorder, PropagatorOptions::default())?.apply_segment(state, segment, drive)
}

/// Propagate through a schedule with the given options.
pub fn evolve<T: Real>(
    state: &mut QuantumState<T>,
    schedule: &PulseSchedule<T>,
    ops: &OperatorSet,
    hdd: &DipolarHamiltonian<T>,
    drive: &AcDrive<T>,
    disorder: Option<&DisorderRealization<T>>,
    opts: PropagatorOptions,
) -> Result<TimeTrace<T>, PropagatorError> {
    Propagator::new(ops, hdd, disorder, opts)?.evolve(state, schedule, drive)
}
