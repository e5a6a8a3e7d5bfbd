//! Free-fermion (Gaussian) tools in the Majorana basis.
//!
//! Majoranas are m_{2j−1} = X̂_j = cⱼ + cⱼ† and m_{2j} = Ŷ_j = i(cⱼ† − cⱼ) (0-based indices
//! 2j−2, 2j−1 in arrays). A quadratic operator is (i/4)·mᵀκm + c with κ real antisymmetric;
//! its BdG form is ½Ψ†BΨ with Ψ = (c₁…c_L, c₁†…c_L†).

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{c, dagger, kron, paulis, I, ZERO};

/// Local Majoranas of a graded two-site gate: X⊗1, Y⊗1, Z⊗X, Z⊗Y.
pub fn local_majoranas() -> [Array2<C64>; 4] {
    let [id, x, y, z] = paulis();
    [kron(&x, &id), kron(&y, &id), kron(&z, &x), kron(&z, &y)]
}

/// Heisenberg rotation of a Gaussian unitary: U† m_a U = Σ_b R_ab m_b.
///
/// Works for any 2^n-dimensional `u` given its `n`-mode Majoranas `ms`.
pub fn majorana_rotation(u: &Array2<C64>, ms: &[Array2<C64>]) -> Result<Array2<f64>> {
    let d = u.nrows() as f64;
    let n = ms.len();
    let ud = dagger(u);
    let mut r = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        let heis = ud.dot(&ms[a]).dot(u);
        for b in 0..n {
            r[[a, b]] = heis.dot(&ms[b]).diag().sum().re / d;
        }
    }
    let defect = (r.dot(&r.t()) - Array2::<f64>::eye(n)).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if defect > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "unitary is not Gaussian: rotation defect {defect:.3e}"
        )));
    }
    Ok(r)
}

/// Rotation of a graded two-site gate on its four local Majoranas.
pub fn gate_rotation(g: &Array2<C64>) -> Result<Array2<f64>> {
    majorana_rotation(g, &local_majoranas())
}

/// Rotation of an even one-site operator on (X, Y).
pub fn site_rotation(k: &Array2<C64>) -> Result<Array2<f64>> {
    let [_, x, y, _] = paulis();
    majorana_rotation(k, &[x, y])
}

/// Write a Hermitian quadratic operator on `ms` as (i/4)mᵀκm + c·1. Returns (κ, c) and the
/// norm of whatever is not of that form.
pub fn quadratic_kappa(op: &Array2<C64>, ms: &[Array2<C64>]) -> (Array2<f64>, f64, f64) {
    let d = op.nrows() as f64;
    let n = ms.len();
    let mut kappa = Array2::<f64>::zeros((n, n));
    for mu in 0..n {
        for nu in 0..n {
            if mu != nu {
                let tr: C64 = op.dot(&ms[nu]).dot(&ms[mu]).diag().sum();
                kappa[[mu, nu]] = (-2.0 * I * tr / d).re;
            }
        }
    }
    let constant = op.diag().sum().re / d;
    let mut rebuilt = Array2::<C64>::eye(op.nrows()) * c(constant, 0.0);
    for mu in 0..n {
        for nu in 0..n {
            if mu != nu {
                rebuilt = rebuilt + ms[mu].dot(&ms[nu]) * (I * kappa[[mu, nu]] / 4.0);
            }
        }
    }
    let rest = crate::linalg::diff_norm(&rebuilt, op);
    (kappa, constant, rest)
}

/// Ω with Ψ = Ωm: c_j = (m_{2j−1} + i m_{2j})/2.
fn omega(l: usize) -> Array2<C64> {
    let mut o = Array2::from_elem((2 * l, 2 * l), ZERO);
    for j in 0..l {
        o[[j, 2 * j]] = c(0.5, 0.0);
        o[[j, 2 * j + 1]] = c(0.0, 0.5);
        o[[l + j, 2 * j]] = c(0.5, 0.0);
        o[[l + j, 2 * j + 1]] = c(0.0, -0.5);
    }
    o
}

/// BdG matrix B with ½Ψ†BΨ = (i/4)mᵀκm.
pub fn kappa_to_bdg(kappa: &Array2<f64>) -> Array2<C64> {
    let l = kappa.nrows() / 2;
    let o = omega(l);
    let k = kappa.mapv(|x| c(x, 0.0));
    o.dot(&k).dot(&dagger(&o)) * c(0.0, 2.0)
}

/// Inverse of [`kappa_to_bdg`].
pub fn bdg_to_kappa(bdg: &Array2<C64>) -> Array2<f64> {
    let l = bdg.nrows() / 2;
    let o = omega(l);
    (dagger(&o).dot(bdg).dot(&o) * c(0.0, -2.0)).mapv(|z| z.re)
}

/// Add a local 4×4 (or 2×2) block into a global matrix at the given indices.
pub fn scatter_add(global: &mut Array2<f64>, local: &Array2<f64>, idx: &[usize]) {
    for (a, &ga) in idx.iter().enumerate() {
        for (b, &gb) in idx.iter().enumerate() {
            global[[ga, gb]] += local[[a, b]];
        }
    }
}

/// Majorana indices of the graded pair (a, b) of 1-based sites.
pub fn pair_indices(a: usize, b: usize) -> [usize; 4] {
    [2 * a - 2, 2 * a - 1, 2 * b - 2, 2 * b - 1]
}

/// Left-multiply the rows `idx` of `m` by the local rotation `r` (m ← R_full·m).
pub fn rotate_rows(m: &mut Array2<f64>, r: &Array2<f64>, idx: &[usize]) {
    let rows: Vec<ndarray::Array1<f64>> = idx.iter().map(|&i| m.row(i).to_owned()).collect();
    for (a, &ia) in idx.iter().enumerate() {
        let mut acc = ndarray::Array1::<f64>::zeros(m.ncols());
        for (b, row) in rows.iter().enumerate() {
            let w = r[[a, b]];
            if w != 0.0 {
                acc.scaled_add(w, row);
            }
        }
        m.row_mut(ia).assign(&acc);
    }
}

/// Right-multiply the columns `idx` of `m` by Rᵀ (m ← m·R_fullᵀ).
pub fn rotate_cols(m: &mut Array2<f64>, r: &Array2<f64>, idx: &[usize]) {
    let cols: Vec<ndarray::Array1<f64>> = idx.iter().map(|&i| m.column(i).to_owned()).collect();
    for (a, &ia) in idx.iter().enumerate() {
        let mut acc = ndarray::Array1::<f64>::zeros(m.nrows());
        for (b, col) in cols.iter().enumerate() {
            let w = r[[a, b]];
            if w != 0.0 {
                acc.scaled_add(w, col);
            }
        }
        m.column_mut(ia).assign(&acc);
    }
}

/// The particle-particle block h and pairing block Δ of a BdG matrix.
pub fn bdg_blocks(bdg: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let l = bdg.nrows() / 2;
    (bdg.slice(s![..l, ..l]).to_owned(), bdg.slice(s![..l, l..]).to_owned())
}
