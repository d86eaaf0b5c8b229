//! Heating rate of the single-tone drive at infinite temperature.
//!
//! The order-parameter autocorrelation
//! `C(l) = (-1)^l Re <r| U^-l I^z U^l I^z |r> / <r| I^z I^z |r>`
//! is estimated from one random state `r` (typicality), which stands in for
//! the infinite-temperature trace without exact diagonalisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::linear_fit;
use crate::lattice::SpinGraph;
use crate::operators::{build_hdd, build_operators, Axis, OperatorSet};
use crate::propagator::{Propagator, PropagatorError, PropagatorOptions, QuantumState, SampleKind};
use crate::scalar::C;
use crate::sequence::{build_single_tone, AcDrive};

fn random_state(ops: &OperatorSet, seed: u64) -> Vec<C<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C<f64>> = (0..ops.dim())
        .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    normalized(v)
}

fn normalized(v: Vec<C<f64>>) -> Vec<C<f64>> {
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// `C(l)` for `l = 0..=kicks` under instantaneous kicks of angle `pi + eps`
/// separated by `tau`. `C(0) = 1`.
pub fn kick_autocorrelation(
    graph: &SpinGraph<f64>,
    tau: f64,
    eps: f64,
    kicks: usize,
    seed: u64,
    opts: PropagatorOptions,
) -> Result<Vec<f64>, PropagatorError> {
    let n = graph.n_spins();
    let ops = build_operators(n)?;
    let hdd = build_hdd(graph, &ops, None)?;
    let schedule = build_single_tone(tau, 0.0, std::f64::consts::PI + eps, kicks)
        .expect("positive tau and finite angle");
    let drive = AcDrive::off();
    let r = random_state(&ops, seed);
    let mut izr = vec![C::new(0.0, 0.0); ops.dim()];
    ops.apply_collective(Axis::Z, &r, &mut izr);
    let izr = normalized(izr);

    let mut prop = Propagator::new(&ops, &hdd, None, opts)?;
    let mut left = Vec::with_capacity(kicks + 1);
    let mut a = QuantumState::from_amplitudes(n, r, 0.0);
    prop.evolve_observed(&mut a, &schedule, &drive, |s, st| {
        if s.kind != SampleKind::PostX {
            let mut o = vec![C::new(0.0, 0.0); st.dim()];
            ops.apply_collective(Axis::Z, st.amplitudes(), &mut o);
            left.push((s.toggle(), o));
        }
    })?;
    let mut c = Vec::with_capacity(kicks + 1);
    let mut b = QuantumState::from_amplitudes(n, izr, 0.0);
    prop.evolve_observed(&mut b, &schedule, &drive, |s, st| {
        if s.kind != SampleKind::PostX {
            let (sign, o) = &left[c.len()];
            let v: C<f64> = o.iter().zip(st.amplitudes()).map(|(x, y)| x.conj() * y).sum();
            c.push(v.re * sign);
        }
    })?;
    let c0 = c[0];
    Ok(c.into_iter().map(|v| v / c0).collect())
}

/// Initial decay rate: slope of `-ln C` against time over the leading
/// samples with `C >= floor`. `None` if fewer than three qualify.
pub fn early_decay_rate(times: &[f64], c: &[f64], floor: f64) -> Option<f64> {
    let k = c.iter().position(|v| *v < floor).unwrap_or(c.len());
    if k < 3 {
        return None;
    }
    let ys: Vec<f64> = c[..k].iter().map(|v| v.ln()).collect();
    linear_fit(&times[..k], &ys).map(|f| -f.slope)
}
