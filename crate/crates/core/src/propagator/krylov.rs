//! Lanczos approximation of `exp(-i t G) psi` for Hermitian `G`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::scalar::{cplx, inner, norm_sqr, Real, C};

/// Check the error estimate every this many Lanczos steps.
const CHECK_EVERY: usize = 4;
/// Give up after this many step halvings.
const MAX_HALVINGS: usize = 40;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("Krylov exponential did not converge (subspace {m_max}, {halvings} step halvings)")]
pub struct KrylovError {
    pub m_max: usize,
    pub halvings: usize,
}

/// Reusable Lanczos workspace.
#[derive(Clone, Debug)]
pub struct Krylov<T> {
    m_max: usize,
    tol: T,
    basis: Vec<Vec<C<T>>>,
    w: Vec<C<T>>,
    alpha: Vec<T>,
    beta: Vec<T>,
    /// Matrix-vector products performed so far.
    pub matvecs: u64,
}

impl<T: Real> Krylov<T> {
    pub fn new(dim: usize, m_max: usize, tol: T) -> Self {
        let m_max = m_max.max(2);
        Self {
            m_max,
            tol,
            basis: (0..=m_max).map(|_| vec![cplx(T::zero(), T::zero()); dim]).collect(),
            w: vec![cplx(T::zero(), T::zero()); dim],
            alpha: Vec::with_capacity(m_max),
            beta: Vec::with_capacity(m_max),
            matvecs: 0,
        }
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    /// `exp(-i t T_k) e_1` for the current tridiagonal of size `k`.
    fn small_expm(&self, k: usize, t: T) -> Vec<C<T>> {
        let mut tri = DMatrix::<T>::zeros(k, k);
        for i in 0..k {
            tri[(i, i)] = self.alpha[i];
            if i + 1 < k {
                tri[(i, i + 1)] = self.beta[i];
                tri[(i + 1, i)] = self.beta[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let q = &eig.eigenvectors;
        (0..k)
            .map(|i| {
                let mut acc = cplx(T::zero(), T::zero());
                for j in 0..k {
                    acc += crate::scalar::expmi(eig.eigenvalues[j] * t) * (q[(i, j)] * q[(0, j)]);
                }
                acc
            })
            .collect()
    }

    /// One attempt at `psi <- exp(-i t G) psi`; `false` if the subspace was
    /// too small for the requested accuracy.
    fn try_step<F>(&mut self, g: &F, psi: &mut [C<T>], t: T, tol: T) -> bool
    where
        F: Fn(&[C<T>], &mut [C<T>]),
    {
        let beta0 = norm_sqr(psi).sqrt();
        if beta0 == T::zero() {
            return true;
        }
        self.alpha.clear();
        self.beta.clear();
        for (b, p) in self.basis[0].iter_mut().zip(psi.iter()) {
            *b = *p / beta0;
        }
        let breakdown = T::default_epsilon() * T::lit(16.0);
        for j in 0..self.m_max {
            g(&self.basis[j], &mut self.w);
            self.matvecs += 1;
            let a = inner(&self.basis[j], &self.w).re;
            self.alpha.push(a);
            let vj = &self.basis[j];
            if j > 0 {
                let (vp, bp) = (&self.basis[j - 1], self.beta[j - 1]);
                for ((wi, v), u) in self.w.iter_mut().zip(vj).zip(vp) {
                    *wi -= *v * a + *u * bp;
                }
            } else {
                for (wi, v) in self.w.iter_mut().zip(vj) {
                    *wi -= *v * a;
                }
            }
            let b = norm_sqr(&self.w).sqrt();
            self.beta.push(b);
            let k = j + 1;
            let exhausted = b <= breakdown;
            if exhausted || k % CHECK_EVERY == 0 || k == self.m_max {
                let y = self.small_expm(k, t);
                let err = beta0 * b * y[k - 1].norm_sqr().sqrt();
                if exhausted || err <= tol {
                    for p in psi.iter_mut() {
                        *p = cplx(T::zero(), T::zero());
                    }
                    for (i, yi) in y.iter().enumerate() {
                        let c = *yi * beta0;
                        for (p, v) in psi.iter_mut().zip(&self.basis[i]) {
                            *p += *v * c;
                        }
                    }
                    return true;
                }
            }
            for (v, wi) in self.basis[j + 1].iter_mut().zip(&self.w) {
                *v = *wi / b;
            }
        }
        false
    }

    /// `psi <- exp(-i t G) psi`, splitting `t` into smaller steps when the
    /// subspace limit is hit. `g` writes `G v` into its second argument.
    pub fn expm<F>(&mut self, g: F, psi: &mut [C<T>], t: T) -> Result<(), KrylovError>
    where
        F: Fn(&[C<T>], &mut [C<T>]),
    {
        if t == T::zero() {
            return Ok(());
        }
        let mut done = T::zero();
        let mut frac = T::one();
        let mut halvings = 0;
        let mut scratch = psi.to_vec();
        while done < T::one() {
            if done + frac > T::one() {
                frac = T::one() - done;
            }
            scratch.copy_from_slice(psi);
            // Error budget proportional to the covered fraction.
            if self.try_step(&g, &mut scratch, t * frac, self.tol * frac) {
                psi.copy_from_slice(&scratch);
                done += frac;
            } else {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(KrylovError {
                        m_max: self.m_max,
                        halvings,
                    });
                }
                frac *= T::lit(0.5);
            }
        }
        Ok(())
    }
}
