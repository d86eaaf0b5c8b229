//! Segment generators `G` such that the segment unitary is `exp(-i G)`.

use crate::operators::{half_sign, magnetization, SparseReal};
use crate::scalar::{cplx, Real, C};

/// `G = h_scale * H + sum_l (x_l I^x_l + y_l I^y_l) + z I^z`.
///
/// Empty `x` / `y` mean no transverse term.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Generator<T> {
    pub h_scale: T,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: T,
}

impl<T: Real> Generator<T> {
    pub fn has_sites(&self) -> bool {
        !self.x.is_empty() || !self.y.is_empty()
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            h_scale: self.h_scale * a,
            x: self.x.iter().map(|v| *v * a).collect(),
            y: self.y.iter().map(|v| *v * a).collect(),
            z: self.z * a,
        }
    }

    /// `out = G psi`.
    pub fn apply(&self, h: &SparseReal<T>, n_spins: usize, psi: &[C<T>], out: &mut [C<T>]) {
        let zero = cplx(T::zero(), T::zero());
        out.iter_mut().for_each(|o| *o = zero);
        if self.h_scale != T::zero() {
            h.apply_scaled_add(self.h_scale, psi, out);
        }
        if self.z != T::zero() {
            for (s, (o, a)) in out.iter_mut().zip(psi).enumerate() {
                *o += *a * (self.z * magnetization::<T>(s, n_spins));
            }
        }
        if self.has_sites() {
            let half = T::lit(0.5);
            for s in 0..psi.len() {
                let mut acc = zero;
                for l in 0..n_spins {
                    let b = psi[s ^ (1 << l)];
                    if let Some(xl) = self.x.get(l) {
                        acc += b * (*xl * half);
                    }
                    if let Some(yl) = self.y.get(l) {
                        // -i y_l m_l(s) b
                        let c = *yl * half_sign::<T>(s, l);
                        acc += cplx(b.im * c, -b.re * c);
                    }
                }
                out[s] += acc;
            }
        }
    }
}

/// `psi <- exp(-i sum_l a_l . sigma_l / 2) psi` for generators without an
/// interaction term, which factorise into single-site rotations.
pub(crate) fn apply_site_rotations<T: Real>(g: &Generator<T>, n_spins: usize, psi: &mut [C<T>]) {
    debug_assert!(g.h_scale == T::zero());
    let half = T::lit(0.5);
    for l in 0..n_spins {
        let ax = g.x.get(l).copied().unwrap_or_else(T::zero);
        let ay = g.y.get(l).copied().unwrap_or_else(T::zero);
        let az = g.z;
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        if norm == T::zero() {
            continue;
        }
        let (nx, ny, nz) = (ax / norm, ay / norm, az / norm);
        let c = (norm * half).cos();
        let s = (norm * half).sin();
        // cos(phi/2) - i sin(phi/2) n.sigma, basis (up, down)
        let uu = cplx(c, -s * nz);
        let dd = cplx(c, s * nz);
        let ud = cplx(-s * ny, -s * nx);
        let du = cplx(s * ny, -s * nx);
        let m = 1usize << l;
        for i in 0..psi.len() {
            if i & m != 0 {
                continue;
            }
            let up = psi[i];
            let dn = psi[i | m];
            psi[i] = uu * up + ud * dn;
            psi[i | m] = du * up + dd * dn;
        }
    }
}

/// Multiply by `exp(-i theta I^z)`.
pub(crate) fn apply_z_phase<T: Real>(theta: T, n_spins: usize, psi: &mut [C<T>]) {
    if theta == T::zero() {
        return;
    }
    // Phases only depend on the number of down spins.
    let phases: Vec<C<T>> = (0..=n_spins)
        .map(|down| {
            let m = T::lit(n_spins as f64 * 0.5 - down as f64);
            crate::scalar::expmi(theta * m)
        })
        .collect();
    for (s, a) in psi.iter_mut().enumerate() {
        *a *= phases[s.count_ones() as usize];
    }
}
