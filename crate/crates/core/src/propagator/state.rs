use crate::operators::{Axis, OperatorSet};
use crate::scalar::{cplx, norm_sqr, Real, C};

/// Pure state of the cluster at an absolute time.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T> {
    pub(crate) amps: Vec<C<T>>,
    pub(crate) time: T,
    n_spins: usize,
}

impl<T: Real> QuantumState<T> {
    /// Wrap an amplitude vector. Panics if the length is not `2^n_spins`.
    pub fn from_amplitudes(n_spins: usize, amps: Vec<C<T>>, time: T) -> Self {
        assert_eq!(amps.len(), 1usize << n_spins, "amplitude vector has wrong length");
        Self {
            amps,
            time,
            n_spins,
        }
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn set_time(&mut self, t: T) {
        self.time = t;
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> T {
        norm_sqr(&self.amps).sqrt()
    }

    /// `<I^a> / (L/2)`, so a fully polarised state gives 1.
    pub fn polarization(&self, ops: &OperatorSet, axis: Axis) -> T {
        ops.expectation(axis, &self.amps) / (T::from_usize_lossy(self.n_spins) * T::lit(0.5))
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &Self) -> T {
        crate::scalar::inner(&self.amps, &other.amps).norm_sqr().sqrt()
    }
}

/// Product state with every spin along `+axis`. Only `x` and `z` are
/// meaningful initial conditions here; `y` is accepted for completeness.
pub fn initial_state<T: Real>(ops: &OperatorSet, axis: Axis) -> QuantumState<T> {
    let dim = ops.dim();
    let n = ops.n_spins();
    let amps = match axis {
        Axis::Z => {
            let mut v = vec![cplx(T::zero(), T::zero()); dim];
            v[0] = cplx(T::one(), T::zero());
            v
        }
        Axis::X => {
            let a = T::one() / T::from_usize_lossy(dim).sqrt();
            vec![cplx(a, T::zero()); dim]
        }
        Axis::Y => {
            // (|up> + i|down>)/sqrt(2) on each site
            let a = T::one() / T::from_usize_lossy(dim).sqrt();
            (0..dim)
                .map(|s| match s.count_ones() % 4 {
                    0 => cplx(a, T::zero()),
                    1 => cplx(T::zero(), a),
                    2 => cplx(-a, T::zero()),
                    _ => cplx(T::zero(), -a),
                })
                .collect()
        }
    };
    QuantumState {
        amps,
        time: T::zero(),
        n_spins: n,
    }
}
