//! Small dense helpers shared by the modules.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eig, Eigh, Inverse, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

/// Pauli matrices in the order I, X, Y, Z.
pub fn paulis() -> [Array2<C64>; 4] {
    [
        identity(2),
        Array2::from_shape_vec((2, 2), vec![ZERO, ONE, ONE, ZERO]).unwrap(),
        Array2::from_shape_vec((2, 2), vec![ZERO, -I, I, ZERO]).unwrap(),
        Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, -ONE]).unwrap(),
    ]
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let x = a[[i, j]];
            if x == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = x * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn fro_norm(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Frobenius norm of `a - b`.
pub fn diff_norm(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    fro_norm((a - b).view())
}

/// Frobenius norm of `[a, b]`.
pub fn commutator_norm(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    diff_norm(&a.dot(b), &b.dot(a))
}

/// `‖U†U − 1‖_F`.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    diff_norm(&dagger(u).dot(u), &identity(u.nrows()))
}

/// `exp(i·h)` for Hermitian `h`, via its eigendecomposition.
pub fn expi_hermitian(h: &Array2<C64>) -> Result<Array2<C64>> {
    let (w, v) = eigh(h)?;
    let mut vd = v.clone();
    for (j, &lam) in w.iter().enumerate() {
        let ph = C64::from_polar(1.0, lam);
        vd.column_mut(j).mapv_inplace(|z| z * ph);
    }
    Ok(vd.dot(&dagger(&v)))
}

/// Eigenvalues of a general complex matrix.
pub fn eigvals(a: &Array2<C64>) -> Result<Array1<C64>> {
    let (w, _) = a.eig()?;
    Ok(w)
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn eig(a: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    Ok(a.eig()?)
}

/// Inverse of a square complex matrix.
pub fn inverse(a: &Array2<C64>) -> Result<Array2<C64>> {
    Ok(a.inv()?)
}

/// Hermitian eigendecomposition (ascending eigenvalues, eigenvectors in columns).
///
/// The input is copied to column-major order first: for complex row-major input the
/// LAPACK wrapper hands back conjugated eigenvectors.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let mut f = Array2::<C64>::zeros(a.dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Upper)?)
}

pub fn eigvalsh(a: &Array2<C64>) -> Result<Array1<f64>> {
    Ok(eigh(a)?.0)
}

/// Monic characteristic polynomial `x^n + p[1] x^{n-1} + … + p[n]` (returns `p`, `p[0] = 1`),
/// by the Faddeev–LeVerrier recursion; adequate for the 2×2 and 4×4 blocks used here.
pub fn charpoly(a: &Array2<C64>) -> Vec<C64> {
    let n = a.nrows();
    let mut p = vec![ONE; n + 1];
    let id = identity(n);
    let mut m = Array2::<C64>::zeros((n, n));
    for k in 1..=n {
        m = a.dot(&m) + &id * p[k - 1];
        let am = a.dot(&m);
        let tr: C64 = am.diag().sum();
        p[k] = -tr / (k as f64);
    }
    p
}

/// Determinant of a 2×2 complex matrix.
pub fn det2(a: ArrayView2<C64>) -> C64 {
    a[[0, 0]] * a[[1, 1]] - a[[0, 1]] * a[[1, 0]]
}

/// Roots of a complex polynomial (coefficients from the leading term down) via the
/// companion matrix.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[0];
    let mut comp = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        comp[[0, j]] = -coeffs[j + 1] / lead;
    }
    for i in 1..n {
        comp[[i, i - 1]] = ONE;
    }
    Ok(eigvals(&comp)?.to_vec())
}

/// Minimal matching distance between two multisets of unit-circle points, computed
/// greedily on sorted phases with a cyclic-shift search (exact for well-separated clusters).
pub fn unit_circle_multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pa: Vec<f64> = a.iter().map(|z| z.arg()).collect();
    let mut pb: Vec<f64> = b.iter().map(|z| z.arg()).collect();
    pa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = pa.len();
    let mut best = f64::INFINITY;
    // Points near ±π may wrap, so try small cyclic offsets.
    let shifts: Vec<isize> = (-4..=4).collect();
    for &s in &shifts {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let j = ((i as isize + s).rem_euclid(n as isize)) as usize;
            let d = (C64::from_polar(1.0, pa[i]) - C64::from_polar(1.0, pb[j])).norm();
            worst = worst.max(d);
        }
        best = best.min(worst);
    }
    best
}
