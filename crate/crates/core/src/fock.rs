//! Jordan–Wigner fermions on a register of qubits.
//!
//! Sites are 1-based and site 1 is the most significant bit of a basis index. A set bit is
//! an occupied mode (σᶻ = −1); cⱼ = (∏_{l<j} Zₗ)·|0⟩⟨1|ⱼ.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::linalg::{c, ZERO};

/// Bit mask of `site` in an `n`-site register.
#[inline]
pub fn site_mask(site: usize, n: usize) -> usize {
    1usize << (n - site)
}

#[inline]
pub fn occupied(b: usize, site: usize, n: usize) -> bool {
    b & site_mask(site, n) != 0
}

/// (−1)^(number of occupied sites strictly left of `site`).
#[inline]
pub fn string_sign(b: usize, site: usize, n: usize) -> f64 {
    let left = !((site_mask(site, n) << 1) - 1) & ((1usize << n) - 1);
    if (b & left).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// cⱼ|b⟩ (or cⱼ†|b⟩ when `dagger`) as `(index, sign)`, `None` if it vanishes.
#[inline]
pub fn mode_act(site: usize, dagger: bool, b: usize, n: usize) -> Option<(usize, f64)> {
    let occ = occupied(b, site, n);
    if occ == dagger {
        return None;
    }
    Some((b ^ site_mask(site, n), string_sign(b, site, n)))
}

/// Pauli `p` ∈ {0: I, 1: X, 2: Y, 3: Z} on `site`, optionally with the Z-string on the sites
/// to its left, applied to |b⟩.
#[inline]
pub fn pauli_act(p: usize, site: usize, string: bool, b: usize, n: usize) -> (usize, C64) {
    let s = if string { string_sign(b, site, n) } else { 1.0 };
    let m = site_mask(site, n);
    let occ = b & m != 0;
    match p {
        0 => (b, c(s, 0.0)),
        1 => (b ^ m, c(s, 0.0)),
        // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
        2 => (b ^ m, c(0.0, if occ { -s } else { s })),
        3 => (b, c(if occ { -s } else { s }, 0.0)),
        _ => unreachable!("Pauli index out of range"),
    }
}

/// Dense annihilator of mode `site` on an `n`-mode Fock space.
pub fn annihilator(site: usize, n: usize) -> Array2<C64> {
    let dim = 1usize << n;
    let mut m = Array2::from_elem((dim, dim), ZERO);
    for b in 0..dim {
        if let Some((t, s)) = mode_act(site, false, b, n) {
            m[[t, b]] = c(s, 0.0);
        }
    }
    m
}

/// All annihilators c₁…cₙ.
pub fn annihilators(n: usize) -> Vec<Array2<C64>> {
    (1..=n).map(|j| annihilator(j, n)).collect()
}

/// Basis index of the Fock state with the listed (1-based) modes occupied.
pub fn state_index(occupied_modes: &[usize], n: usize) -> usize {
    occupied_modes.iter().fold(0, |acc, &j| acc | site_mask(j, n))
}

/// Fermion parity (0 even, 1 odd) of a basis index.
#[inline]
pub fn parity(b: usize) -> u8 {
    (b.count_ones() % 2) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, diff_norm, identity, max_abs};

    #[test]
    fn canonical_anticommutation() {
        let n = 4;
        let cs = annihilators(n);
        for i in 0..n {
            for j in 0..n {
                let ac = cs[i].dot(&dagger(&cs[j])) + dagger(&cs[j]).dot(&cs[i]);
                let want = if i == j { identity(1 << n) } else { Array2::zeros((16, 16)) };
                assert!(diff_norm(&ac, &want) < 1e-14);
                let aa = cs[i].dot(&cs[j]) + cs[j].dot(&cs[i]);
                assert!(max_abs(aa.view()) < 1e-14);
            }
        }
    }

    #[test]
    fn majoranas_are_string_paulis() {
        // c + c† = (string)·X and i(c† − c) = (string)·Y
        let n = 3;
        for site in 1..=n {
            let cm = annihilator(site, n);
            let cd = dagger(&cm);
            for b in 0..(1 << n) {
                let (t, ph) = pauli_act(1, site, true, b, n);
                assert!(((&cm + &cd)[[t, b]] - ph).norm() < 1e-15);
                let (t, ph) = pauli_act(2, site, true, b, n);
                let y = (&cd - &cm).mapv(|z| z * c(0.0, 1.0));
                assert!((y[[t, b]] - ph).norm() < 1e-15);
            }
        }
    }
}
