//! Single-spin identities used to validate the drive construction.

use crate::linalg::{frobenius, hermitian_expm, identity, CMatrix};
use crate::operators::{build_operators, Axis};
use crate::scalar::{cplx, Real};
use crate::sequence::{ac_integral, AcDrive};

fn spin_ops<T: Real>() -> (CMatrix<T>, CMatrix<T>, CMatrix<T>) {
    let ops = build_operators(1).expect("one spin is always supported");
    (
        ops.dense_collective(Axis::X).expect("dense 2x2"),
        ops.dense_collective(Axis::Y).expect("dense 2x2"),
        ops.dense_collective(Axis::Z).expect("dense 2x2"),
    )
}

fn rc<T: Real>(x: T) -> crate::scalar::C<T> {
    cplx(x, T::zero())
}

/// Non-interacting two-period unitary of the two-tone drive on one spin,
/// returned as `| U^2 + 1 |_F`.
///
/// Spin-lock pulses are instantaneous rotations by `theta` separated by free
/// intervals `tau` in which only the AC field acts; the `y` kick has width
/// `tau_y` (zero for the ideal limit) and is centred on `t = 0` and `t = T`
/// with `T = (n + 1) tau + tau_y`. The AC field is on resonance,
/// `f = 1 / (2T)`.
pub fn single_particle_check<T: Real>(
    n: usize,
    tau: T,
    tau_y: T,
    theta: T,
    gamma: T,
    amplitude: T,
    phase: T,
) -> T {
    let (ix, iy, iz) = spin_ops::<T>();
    let period = tau * T::from_usize_lossy(n + 1) + tau_y;
    let drive = AcDrive {
        amplitude,
        frequency: T::one() / (T::lit(2.0) * period),
        phase,
    };
    let rx = hermitian_expm(&ix, theta);
    let half = T::lit(0.5);
    let mut u = identity::<T>(2);
    for p in 0..2 {
        let mut t = period * T::from_usize_lossy(p) - period + tau_y * half;
        for k in 0..=n {
            let vt = ac_integral(&drive, t, t + tau);
            u = hermitian_expm(&iz, vt) * u;
            t += tau;
            if k < n {
                u = &rx * u;
            }
        }
        let vy = ac_integral(&drive, t, t + tau_y);
        let gy = &iy * rc(gamma) + &iz * rc(vy);
        u = hermitian_expm(&gy, T::one()) * u;
    }
    frobenius(&(u + identity::<T>(2)))
}

/// First-order factorisation of a `y` rotation with a simultaneous `z`
/// field: `exp(-i(g I^y + a I^z)) ~ exp(-i g I^y) exp(-i a [s I^z - c I^x])`
/// with `s = sin(g)/g` and `c = (1 - cos g)/g`.
pub fn y_pulse_first_order<T: Real>(alpha: T, gamma: T) -> CMatrix<T> {
    let (ix, iy, iz) = spin_ops::<T>();
    let s = gamma.sin() / gamma;
    let c = (T::one() - gamma.cos()) / gamma;
    let tail = &iz * rc(alpha * s) - &ix * rc(alpha * c);
    hermitian_expm(&iy, gamma) * hermitian_expm(&tail, T::one())
}

/// Frobenius distance between the exact pulse and its first-order
/// factorisation.
pub fn factorized_y_distance<T: Real>(alpha: T, gamma: T) -> T {
    let (_, iy, iz) = spin_ops::<T>();
    let exact = hermitian_expm(&(&iy * rc(gamma) + &iz * rc(alpha)), T::one());
    frobenius(&(exact - y_pulse_first_order(alpha, gamma)))
}
