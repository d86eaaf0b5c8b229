//! Spin-1/2 operators on the `2^L` dimensional many-body space.
//!
//! Basis index `s` encodes spin `k` in bit `k`: a clear bit is spin up
//! (`I^z_k = +1/2`), a set bit is spin down. Spin operators are
//! `I^a = sigma^a / 2`.
//!
//! Everything acts matrix-free on amplitude slices. Dense matrices are only
//! built for small clusters and serve as the correctness oracle.

use thiserror::Error;

use crate::lattice::SpinGraph;
use crate::linalg::{hermitian_expm, CMatrix};
use crate::scalar::{cplx, Real, C};

/// Largest cluster the matrix-free kernels accept.
pub const MAX_SPINS: usize = 22;
/// Largest cluster for which dense matrices may be materialised.
pub const DENSE_MAX_SPINS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("{n_spins} spins is outside the supported range 1..={max}")]
    DimensionOverflow { n_spins: usize, max: usize },
    #[error("graph has {graph} spins but operators were built for {ops}")]
    SizeMismatch { graph: usize, ops: usize },
    #[error("disorder has {got} site offsets, expected {expected}")]
    DisorderLength { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `+1/2` for spin up, `-1/2` for spin down.
#[inline]
pub(crate) fn half_sign<T: Real>(s: usize, k: usize) -> T {
    if (s >> k) & 1 == 0 {
        T::lit(0.5)
    } else {
        T::lit(-0.5)
    }
}

/// Collective and single-site spin operators for `n_spins` sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorSet {
    n_spins: usize,
    dim: usize,
}

pub fn build_operators(n_spins: usize) -> Result<OperatorSet, OperatorError> {
    if n_spins == 0 || n_spins > MAX_SPINS {
        return Err(OperatorError::DimensionOverflow {
            n_spins,
            max: MAX_SPINS,
        });
    }
    Ok(OperatorSet {
        n_spins,
        dim: 1 << n_spins,
    })
}

impl OperatorSet {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dense(&self) -> Result<(), OperatorError> {
        if self.n_spins > DENSE_MAX_SPINS {
            return Err(OperatorError::DimensionOverflow {
                n_spins: self.n_spins,
                max: DENSE_MAX_SPINS,
            });
        }
        Ok(())
    }

    /// `out = I^a_k psi`.
    pub fn apply_site<T: Real>(&self, axis: Axis, k: usize, psi: &[C<T>], out: &mut [C<T>]) {
        let m = 1usize << k;
        match axis {
            Axis::Z => {
                for (s, (o, a)) in out.iter_mut().zip(psi).enumerate() {
                    *o = *a * half_sign::<T>(s, k);
                }
            }
            Axis::X => {
                let h = T::lit(0.5);
                for s in 0..self.dim {
                    out[s ^ m] = psi[s] * h;
                }
            }
            Axis::Y => {
                // I^y |up> = (i/2)|down>, I^y |down> = -(i/2)|up>
                for s in 0..self.dim {
                    let a = psi[s];
                    let sign = half_sign::<T>(s, k);
                    out[s ^ m] = cplx(-a.im * sign, a.re * sign);
                }
            }
        }
    }

    /// `out = I^a psi` with `I^a = sum_k I^a_k`.
    pub fn apply_collective<T: Real>(&self, axis: Axis, psi: &[C<T>], out: &mut [C<T>]) {
        out.iter_mut().for_each(|o| *o = cplx(T::zero(), T::zero()));
        for s in 0..self.dim {
            let a = psi[s];
            match axis {
                Axis::Z => {
                    let mz = magnetization::<T>(s, self.n_spins);
                    out[s] += a * mz;
                }
                Axis::X => {
                    let h = T::lit(0.5);
                    for k in 0..self.n_spins {
                        out[s ^ (1 << k)] += a * h;
                    }
                }
                Axis::Y => {
                    for k in 0..self.n_spins {
                        let sign = half_sign::<T>(s, k);
                        out[s ^ (1 << k)] += cplx(-a.im * sign, a.re * sign);
                    }
                }
            }
        }
    }

    /// `<psi| I^a |psi>` without allocating.
    pub fn expectation<T: Real>(&self, axis: Axis, psi: &[C<T>]) -> T {
        let mut acc = T::zero();
        match axis {
            Axis::Z => {
                for (s, a) in psi.iter().enumerate() {
                    acc += a.norm_sqr() * magnetization::<T>(s, self.n_spins);
                }
            }
            Axis::X | Axis::Y => {
                for s in 0..self.dim {
                    let a = psi[s];
                    for k in 0..self.n_spins {
                        let m = 1 << k;
                        // Visit each (s, s^m) pair once, from the spin-up side.
                        if s & m != 0 {
                            continue;
                        }
                        let b = psi[s ^ m];
                        // <s|I^a_k|s^m> conj(psi_s) psi_{s^m} + c.c.
                        let z = a.conj() * b;
                        acc += match axis {
                            Axis::X => z.re,
                            // <up|I^y|down> = -i/2
                            _ => z.im,
                        };
                    }
                }
            }
        }
        acc
    }

    pub fn dense_site<T: Real>(&self, axis: Axis, k: usize) -> Result<CMatrix<T>, OperatorError> {
        self.check_dense()?;
        let mut m = CMatrix::<T>::zeros(self.dim, self.dim);
        let mask = 1usize << k;
        for s in 0..self.dim {
            let sign = half_sign::<T>(s, k);
            match axis {
                Axis::Z => m[(s, s)] = cplx(sign, T::zero()),
                Axis::X => m[(s ^ mask, s)] = cplx(T::lit(0.5), T::zero()),
                Axis::Y => m[(s ^ mask, s)] = cplx(T::zero(), sign),
            }
        }
        Ok(m)
    }

    pub fn dense_collective<T: Real>(&self, axis: Axis) -> Result<CMatrix<T>, OperatorError> {
        let mut m = CMatrix::<T>::zeros(self.dim, self.dim);
        for k in 0..self.n_spins {
            m += self.dense_site::<T>(axis, k)?;
        }
        Ok(m)
    }

    /// `exp(-i angle I^a)` as a dense matrix.
    pub fn dense_rotation<T: Real>(&self, axis: Axis, angle: T) -> Result<CMatrix<T>, OperatorError> {
        let g = self.dense_collective::<T>(axis)?;
        Ok(hermitian_expm(&g, angle))
    }
}

/// Total `I^z` eigenvalue of basis state `s`.
#[inline]
pub(crate) fn magnetization<T: Real>(s: usize, n_spins: usize) -> T {
    let down = (s & ((1usize << n_spins) - 1)).count_ones() as usize;
    T::lit(n_spins as f64 * 0.5 - down as f64)
}

/// Real symmetric sparse matrix: a diagonal plus CSR off-diagonal part.
#[derive(Clone, Debug)]
pub struct SparseReal<T> {
    diag: Vec<T>,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Real> SparseReal<T> {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    pub fn nnz(&self) -> usize {
        self.diag.len() + self.vals.len()
    }

    /// `out += scale * M psi`.
    #[inline]
    pub fn apply_scaled_add(&self, scale: T, psi: &[C<T>], out: &mut [C<T>]) {
        for s in 0..self.diag.len() {
            let mut acc = psi[s] * self.diag[s];
            let lo = self.row_ptr[s] as usize;
            let hi = self.row_ptr[s + 1] as usize;
            for idx in lo..hi {
                acc += psi[self.cols[idx] as usize] * self.vals[idx];
            }
            out[s] += acc * scale;
        }
    }

    /// `out = M psi`.
    pub fn apply(&self, psi: &[C<T>], out: &mut [C<T>]) {
        out.iter_mut().for_each(|o| *o = cplx(T::zero(), T::zero()));
        self.apply_scaled_add(T::one(), psi, out);
    }

    /// `Tr(M^2)`, i.e. the squared Frobenius norm.
    pub fn frobenius_sqr(&self) -> T {
        let d = self.diag.iter().fold(T::zero(), |a, x| a + *x * *x);
        let o = self.vals.iter().fold(T::zero(), |a, x| a + *x * *x);
        d + o
    }

    pub fn trace(&self) -> T {
        self.diag.iter().fold(T::zero(), |a, x| a + *x)
    }

    /// `<psi|M|psi>` (real because `M` is symmetric).
    pub fn expectation(&self, psi: &[C<T>]) -> T {
        let mut acc = T::zero();
        for s in 0..self.diag.len() {
            let a = psi[s];
            let mut row = a * self.diag[s];
            let lo = self.row_ptr[s] as usize;
            let hi = self.row_ptr[s + 1] as usize;
            for idx in lo..hi {
                row += psi[self.cols[idx] as usize] * self.vals[idx];
            }
            acc += (a.conj() * row).re;
        }
        acc
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let n = self.dim();
        let mut m = CMatrix::<T>::zeros(n, n);
        for s in 0..n {
            m[(s, s)] = cplx(self.diag[s], T::zero());
            let lo = self.row_ptr[s] as usize;
            let hi = self.row_ptr[s + 1] as usize;
            for idx in lo..hi {
                m[(s, self.cols[idx] as usize)] += cplx(self.vals[idx], T::zero());
            }
        }
        m
    }
}

/// Build a pair Hamiltonian `sum_{k<l} J_kl h_kl` where each pair term is
/// fixed by its diagonal and spin-exchange elements for aligned and
/// anti-aligned configurations.
fn pair_sparse<T: Real>(
    n_spins: usize,
    pairs: &[(usize, usize, T)],
    diag_aligned: T,
    diag_anti: T,
    flip_aligned: T,
    flip_anti: T,
    site_z: Option<&[T]>,
) -> SparseReal<T> {
    let dim = 1usize << n_spins;
    let mut diag = vec![T::zero(); dim];
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0u32);
    for s in 0..dim {
        let mut d = T::zero();
        for &(k, l, j) in pairs {
            let aligned = ((s >> k) & 1) == ((s >> l) & 1);
            let (dv, fv) = if aligned {
                (diag_aligned, flip_aligned)
            } else {
                (diag_anti, flip_anti)
            };
            d += j * dv;
            let f = j * fv;
            if f != T::zero() {
                cols.push((s ^ ((1 << k) | (1 << l))) as u32);
                vals.push(f);
            }
        }
        if let Some(z) = site_z {
            for (k, zk) in z.iter().enumerate() {
                d += *zk * half_sign::<T>(s, k);
            }
        }
        diag[s] = d;
        row_ptr.push(cols.len() as u32);
    }
    SparseReal {
        diag,
        row_ptr,
        cols,
        vals,
    }
}

fn graph_pairs<T: Real>(graph: &SpinGraph<T>) -> Vec<(usize, usize, T)> {
    graph.pairs().filter(|&(_, _, j)| j != T::zero()).collect()
}

/// Secular dipolar Hamiltonian `sum_{k<l} J_kl (3 I^z_k I^z_l - I_k . I_l)`
/// plus optional on-site `z` offsets `sum_l zeta_l I^z_l`.
#[derive(Clone, Debug)]
pub struct DipolarHamiltonian<T> {
    n_spins: usize,
    z_offsets: Option<Vec<T>>,
    matrix: SparseReal<T>,
}

pub fn build_hdd<T: Real>(
    graph: &SpinGraph<T>,
    ops: &OperatorSet,
    z_disorder: Option<&[T]>,
) -> Result<DipolarHamiltonian<T>, OperatorError> {
    let n = graph.n_spins();
    if n != ops.n_spins() {
        return Err(OperatorError::SizeMismatch {
            graph: n,
            ops: ops.n_spins(),
        });
    }
    if let Some(z) = z_disorder {
        if z.len() != n {
            return Err(OperatorError::DisorderLength {
                got: z.len(),
                expected: n,
            });
        }
    }
    // 3 zz - I.I = 2 zz - (xx + yy): diag +-1/2, exchange -1/2 between
    // anti-aligned spins.
    let half = T::lit(0.5);
    let matrix = pair_sparse(
        n,
        &graph_pairs(graph),
        half,
        -half,
        T::zero(),
        -half,
        z_disorder,
    );
    Ok(DipolarHamiltonian {
        n_spins: n,
        z_offsets: z_disorder.map(|z| z.to_vec()),
        matrix,
    })
}

impl<T: Real> DipolarHamiltonian<T> {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn z_offsets(&self) -> Option<&[T]> {
        self.z_offsets.as_deref()
    }

    pub fn matrix(&self) -> &SparseReal<T> {
        &self.matrix
    }

    pub fn apply(&self, psi: &[C<T>], out: &mut [C<T>]) {
        self.matrix.apply(psi, out)
    }

    pub fn expectation(&self, psi: &[C<T>]) -> T {
        self.matrix.expectation(psi)
    }

    pub fn dense(&self) -> Result<CMatrix<T>, OperatorError> {
        if self.n_spins > DENSE_MAX_SPINS {
            return Err(OperatorError::DimensionOverflow {
                n_spins: self.n_spins,
                max: DENSE_MAX_SPINS,
            });
        }
        Ok(self.matrix.to_dense())
    }
}

/// Spin-lock Hamiltonian `-(1/2) sum_{k<l} J_kl (3 I^x_k I^x_l - I_k . I_l)`,
/// the average of the dipolar Hamiltonian over the four toggling frames of a
/// `pi/2` pulse train. It conserves `I^x`.
#[derive(Clone, Debug)]
pub struct SpinLockHamiltonian<T> {
    n_spins: usize,
    matrix: SparseReal<T>,
    j_spinlock: T,
}

pub fn build_hsl<T: Real>(
    graph: &SpinGraph<T>,
    ops: &OperatorSet,
) -> Result<SpinLockHamiltonian<T>, OperatorError> {
    let n = graph.n_spins();
    if n != ops.n_spins() {
        return Err(OperatorError::SizeMismatch {
            graph: n,
            ops: ops.n_spins(),
        });
    }
    // 3 xx - I.I = 2 xx - yy - zz. In the z basis: diagonal -s s'/4, double
    // flip (1/2 + s s'/4), with s s' = +1 for aligned spins. Prefactor -1/2.
    let e = T::lit(0.125);
    let matrix = pair_sparse(
        n,
        &graph_pairs(graph),
        e,
        -e,
        T::lit(-0.375),
        -e,
        None,
    );
    let dim = T::from_usize_lossy(1usize << n);
    let j_spinlock = (matrix.frobenius_sqr() / (dim * T::from_usize_lossy(n))).sqrt();
    Ok(SpinLockHamiltonian {
        n_spins: n,
        matrix,
        j_spinlock,
    })
}

impl<T: Real> SpinLockHamiltonian<T> {
    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Infinite-temperature RMS energy per spin, `sqrt(Tr(H^2) / (2^L L))`.
    pub fn j_spinlock(&self) -> T {
        self.j_spinlock
    }

    pub fn matrix(&self) -> &SparseReal<T> {
        &self.matrix
    }

    pub fn apply(&self, psi: &[C<T>], out: &mut [C<T>]) {
        self.matrix.apply(psi, out)
    }

    pub fn expectation(&self, psi: &[C<T>]) -> T {
        self.matrix.expectation(psi)
    }

    pub fn dense(&self) -> Result<CMatrix<T>, OperatorError> {
        if self.n_spins > DENSE_MAX_SPINS {
            return Err(OperatorError::DimensionOverflow {
                n_spins: self.n_spins,
                max: DENSE_MAX_SPINS,
            });
        }
        Ok(self.matrix.to_dense())
    }
}

/// Zeroth-order toggling-frame average of `H_dd` under a train of `n` pulses
/// of angle `theta` about `x`:
/// `(1/(n+1)) sum_{l=0..n} R_x(-l theta) H_dd R_x(l theta)` with
/// `R_x(a) = exp(-i a I^x)`.
pub fn toggling_average<T: Real>(
    hdd: &DipolarHamiltonian<T>,
    ops: &OperatorSet,
    n: usize,
    theta: T,
) -> Result<CMatrix<T>, OperatorError> {
    let h = hdd.dense()?;
    let ix = ops.dense_collective::<T>(Axis::X)?;
    let step = hermitian_expm(&ix, theta);
    let mut rot = CMatrix::<T>::identity(ops.dim(), ops.dim());
    let mut acc = CMatrix::<T>::zeros(ops.dim(), ops.dim());
    for _ in 0..=n {
        acc += rot.adjoint() * &h * &rot;
        rot = &step * rot;
    }
    Ok(acc / cplx(T::from_usize_lossy(n + 1), T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{orient_graph, sample_graph};
    use crate::linalg::{commutator, frobenius, hermiticity_defect};
    use nalgebra::SymmetricEigen;

    fn pair_graph(j: f64) -> SpinGraph<f64> {
        // theta = 0, r = 1 gives J = 2c.
        SpinGraph::from_positions(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]], [0.0, 0.0, 1.0], j / 2.0)
    }

    fn sorted_eigs(m: &CMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn single_spin_iz_spectrum() {
        let ops = build_operators(1).unwrap();
        let z = ops.dense_collective::<f64>(Axis::Z).unwrap();
        assert_eq!(sorted_eigs(&z), vec![-0.5, 0.5]);
    }

    #[test]
    fn three_spin_iz_spectrum() {
        let ops = build_operators(3).unwrap();
        let e = sorted_eigs(&ops.dense_collective::<f64>(Axis::Z).unwrap());
        assert!((e[0] + 1.5).abs() < 1e-14 && (e[7] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn spin_algebra_six_sites() {
        let ops = build_operators(6).unwrap();
        let x = ops.dense_collective::<f64>(Axis::X).unwrap();
        let y = ops.dense_collective::<f64>(Axis::Y).unwrap();
        let z = ops.dense_collective::<f64>(Axis::Z).unwrap();
        let i = C::new(0.0, 1.0);
        assert!(frobenius(&(commutator(&x, &y) - &z * i)) < 1e-12);
        assert!(frobenius(&(commutator(&y, &z) - &x * i)) < 1e-12);
        assert!(frobenius(&(commutator(&z, &x) - &y * i)) < 1e-12);
        for m in [&x, &y, &z] {
            assert!(hermiticity_defect(m) < 1e-15);
        }
    }

    #[test]
    fn too_many_spins_rejected() {
        assert!(build_operators(0).is_err());
        assert!(build_operators(MAX_SPINS + 1).is_err());
        let big = build_operators(DENSE_MAX_SPINS + 1).unwrap();
        assert!(big.dense_collective::<f64>(Axis::Z).is_err());
    }

    #[test]
    fn two_spin_dipolar_spectrum() {
        let j = 0.7;
        let g = pair_graph(j);
        let ops = build_operators(2).unwrap();
        let h = build_hdd(&g, &ops, None).unwrap().dense().unwrap();
        let e = sorted_eigs(&h);
        let want = [-j, 0.0, j / 2.0, j / 2.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{e:?}");
        }
    }

    #[test]
    fn dipolar_conserves_iz_and_is_traceless() {
        let g = orient_graph(&sample_graph::<f64>(5, 0.9, 1.1, 3).unwrap()).unwrap();
        let ops = build_operators(5).unwrap();
        let hdd = build_hdd(&g, &ops, None).unwrap();
        let h = hdd.dense().unwrap();
        let z = ops.dense_collective::<f64>(Axis::Z).unwrap();
        assert!(frobenius(&commutator(&h, &z)) < 1e-12);
        assert!(hermiticity_defect(&h) < 1e-14);
        assert!(hdd.matrix().trace().abs() < 1e-12);
    }

    #[test]
    fn disorder_keeps_u1_symmetry() {
        let g = orient_graph(&sample_graph::<f64>(4, 0.9, 1.1, 8).unwrap()).unwrap();
        let ops = build_operators(4).unwrap();
        let zeta = [0.3, -0.45, 0.1, 0.49];
        let h = build_hdd(&g, &ops, Some(&zeta)).unwrap().dense().unwrap();
        let z = ops.dense_collective::<f64>(Axis::Z).unwrap();
        assert!(hermiticity_defect(&h) < 1e-14);
        assert!(frobenius(&commutator(&h, &z)) < 1e-12);
        assert!(build_hdd(&g, &ops, Some(&zeta[..3])).is_err());
    }

    #[test]
    fn spin_lock_conserves_ix() {
        let g = pair_graph(1.0);
        let ops = build_operators(2).unwrap();
        let hsl = build_hsl(&g, &ops).unwrap().dense().unwrap();
        let x = ops.dense_collective::<f64>(Axis::X).unwrap();
        assert!(frobenius(&commutator(&hsl, &x)) < 1e-14);
    }

    #[test]
    fn spin_lock_norm_two_spins() {
        // Tr(H_SL^2) / (4 * 2) = 3 J^2 / 64 for a single pair.
        let j = 1.3;
        let g = pair_graph(j);
        let ops = build_operators(2).unwrap();
        let hsl = build_hsl(&g, &ops).unwrap();
        let dense = hsl.dense().unwrap();
        let direct = (frobenius(&dense).powi(2) / 8.0).sqrt();
        assert!((hsl.j_spinlock() - direct).abs() < 1e-14);
        assert!((hsl.j_spinlock() - j * 3f64.sqrt() / 8.0).abs() < 1e-14);
    }

    #[test]
    fn toggling_single_term_is_hdd() {
        let g = orient_graph(&sample_graph::<f64>(4, 0.9, 1.1, 2).unwrap()).unwrap();
        let ops = build_operators(4).unwrap();
        let hdd = build_hdd(&g, &ops, None).unwrap();
        let avg = toggling_average(&hdd, &ops, 0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(frobenius(&(avg - hdd.dense().unwrap())) < 1e-13);
    }

    #[test]
    fn expectation_matches_dense() {
        let ops = build_operators(4).unwrap();
        let psi: Vec<C<f64>> = (0..16)
            .map(|i| C::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let nrm = crate::scalar::norm_sqr(&psi).sqrt();
        let psi: Vec<C<f64>> = psi.iter().map(|a| a / nrm).collect();
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let m = ops.dense_collective::<f64>(axis).unwrap();
            let mv = crate::linalg::matvec(&m, &psi);
            let want = crate::scalar::inner(&psi, &mv).re;
            assert!((ops.expectation(axis, &psi) - want).abs() < 1e-14, "{axis:?}");
        }
    }
}
