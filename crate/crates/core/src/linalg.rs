//! Dense complex linear algebra used by the oracle paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cplx, expmi, Real, C};

pub type CMatrix<T> = DMatrix<C<T>>;

/// `exp(-i * scale * h)` for Hermitian `h`, via eigendecomposition.
pub fn hermitian_expm<T: Real>(h: &CMatrix<T>, scale: T) -> CMatrix<T> {
    let eig = SymmetricEigen::new(h.clone());
    let phases: DVector<C<T>> = eig.eigenvalues.map(|lam| expmi(lam * scale));
    let v = &eig.eigenvectors;
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    vd * v.adjoint()
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

pub fn frobenius<T: Real>(a: &CMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Largest element-wise deviation from Hermiticity.
pub fn hermiticity_defect<T: Real>(a: &CMatrix<T>) -> T {
    frobenius(&(a - a.adjoint()))
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::<T>::identity(n, n)
}

/// Kronecker product.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn matvec<T: Real>(m: &CMatrix<T>, v: &[C<T>]) -> Vec<C<T>> {
    let n = m.nrows();
    let mut out = vec![cplx(T::zero(), T::zero()); n];
    // Column-major storage: accumulate column by column.
    for (j, col) in m.column_iter().enumerate() {
        let x = v[j];
        if x.re == T::zero() && x.im == T::zero() {
            continue;
        }
        for (o, a) in out.iter_mut().zip(col.iter()) {
            *o += *a * x;
        }
    }
    out
}
