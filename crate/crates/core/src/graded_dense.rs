//! Exact dense operators on 2^L-dimensional registers with graded (fermionic) tensor
//! products: the Floquet operator U_F, supercharges, and the transfer matrix.
//!
//! A local operator is split into Pauli words; odd Paulis (X, Y) carry a σᶻ-string on every
//! site to their left. Two-site operators are written as Σ c_mn (P_m Z^{p(n)}) ⊗ P_n so that
//! the graded product P_m ⊗_g P_n reproduces them on adjacent sites, and the same words
//! embed correctly for the wrap-around pair (L, 1).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, pauli_act};
use crate::gate_core::{
    build_boundary_k, build_smatrix, graded_permutation, smatrix_complex, GateParams,
};
use crate::linalg::{
    self, c, commutator_norm, dagger, diff_norm, eigvals, eigvalsh, kron, paulis, ONE, ZERO,
};

/// Largest register built densely.
pub const MAX_DENSE_SITES: usize = 14;
/// Largest chain for the transfer matrix (which adds an auxiliary qubit).
pub const MAX_TRANSFER_SITES: usize = 10;

const PAULI_PARITY: [u8; 4] = [0, 1, 1, 0];
const DECOMP_TOL: f64 = 1e-15;
const PARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Boundary {
    Pbc,
    Obc,
    ObcExtended,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pbc" => Ok(Boundary::Pbc),
            "obc" => Ok(Boundary::Obc),
            "obc_extended" => Ok(Boundary::ObcExtended),
            other => Err(Error::InvalidArgument(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Dense operator on an L-site register together with its fermion parity.
#[derive(Debug, Clone)]
pub struct GradedOperator {
    pub entries: Array2<C64>,
    pub l: usize,
    pub parity: u8,
}

impl GradedOperator {
    pub fn identity(l: usize) -> Self {
        Self { entries: linalg::identity(1 << l), l, parity: 0 }
    }

    /// Largest entry violating the stated parity (zero for a well-formed operator).
    pub fn parity_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((r, col), z) in self.entries.indexed_iter() {
            if fock::parity(r) ^ fock::parity(col) != self.parity {
                worst = worst.max(z.norm());
            }
        }
        worst
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Hermitian supercharges Q^L (σˣ terms) and Q^R (σʸ terms).
#[derive(Debug, Clone)]
pub struct SuperchargePair {
    pub q_l: GradedOperator,
    pub q_r: GradedOperator,
}

/// Super-traced transfer matrix t(u) on the physical chain.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub entries: Array2<C64>,
    pub u: C64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Pauli word with coefficient: `factors` lists (site, pauli index) pairs, applied from the
/// last to the first.
#[derive(Debug, Clone)]
struct Word {
    coef: C64,
    factors: Vec<(usize, usize)>,
}

/// A local operator as a sum of string-dressed Pauli words.
#[derive(Debug, Clone)]
pub struct LocalTerms {
    words: Vec<Word>,
}

impl LocalTerms {
    fn act(word: &Word, b: usize, n: usize) -> (usize, C64) {
        let mut idx = b;
        let mut ph = ONE;
        for &(site, p) in word.factors.iter().rev() {
            let (t, z) = pauli_act(p, site, PAULI_PARITY[p] == 1, idx, n);
            idx = t;
            ph *= z;
        }
        (idx, ph)
    }

    /// Bits flipped by a word (each Pauli word is a signed permutation of the basis).
    fn flip_mask(word: &Word, n: usize) -> usize {
        word.factors
            .iter()
            .filter(|(_, p)| *p == 1 || *p == 2)
            .fold(0, |m, &(site, _)| m ^ fock::site_mask(site, n))
    }

    /// `op · mat` where `op` is this operator embedded in an `n`-site register.
    pub fn apply_left(&self, mat: &Array2<C64>, n: usize) -> Array2<C64> {
        let cols = mat.ncols();
        let masks: Vec<usize> = self.words.iter().map(|w| Self::flip_mask(w, n)).collect();
        let mut out = Array2::<C64>::zeros((mat.nrows(), cols));
        let slice = out.as_slice_mut().expect("freshly allocated arrays are contiguous");
        slice.par_chunks_mut(cols.max(1)).enumerate().for_each(|(r2, row)| {
            for (w, &mask) in self.words.iter().zip(&masks) {
                let r = r2 ^ mask;
                let (t, ph) = Self::act(w, r, n);
                debug_assert_eq!(t, r2);
                let k = w.coef * ph;
                for (o, &x) in row.iter_mut().zip(mat.row(r).iter()) {
                    *o += k * x;
                }
            }
        });
        out
    }

    /// Same as [`apply_left`](Self::apply_left) for a state vector.
    pub fn apply_vec(&self, psi: &Array1<C64>, n: usize) -> Array1<C64> {
        let mut out = Array1::<C64>::zeros(psi.len());
        for w in &self.words {
            let mask = Self::flip_mask(w, n);
            for (r2, o) in out.iter_mut().enumerate() {
                let r = r2 ^ mask;
                let (_, ph) = Self::act(w, r, n);
                *o += w.coef * ph * psi[r];
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize) -> Array2<C64> {
        self.apply_left(&linalg::identity(1 << n), n)
    }

}

fn local_parity(op: &Array2<C64>) -> Option<u8> {
    let mut seen: Option<u8> = None;
    for ((r, col), z) in op.indexed_iter() {
        if z.norm() > PARITY_TOL {
            let p = fock::parity(r) ^ fock::parity(col);
            match seen {
                None => seen = Some(p),
                Some(q) if q != p => return None,
                _ => {}
            }
        }
    }
    Some(seen.unwrap_or(0))
}

/// Pauli words of a one-site operator.
pub fn one_site_terms(op: &Array2<C64>, site: usize) -> LocalTerms {
    let ps = paulis();
    let mut words = Vec::new();
    for (m, pm) in ps.iter().enumerate() {
        let coef = dagger(pm).dot(op).diag().sum() / 2.0;
        if coef.norm() > DECOMP_TOL {
            let factors = if m == 0 { vec![] } else { vec![(site, m)] };
            words.push(Word { coef, factors });
        }
    }
    LocalTerms { words }
}

/// Pauli words of a two-site operator acting on (`site_a`, `site_b`), `site_a` being the
/// first tensor factor.
pub fn two_site_terms(op: &Array2<C64>, site_a: usize, site_b: usize) -> LocalTerms {
    let ps = paulis();
    let z = &ps[3];
    let mut words = Vec::new();
    for m in 0..4 {
        for n in 0..4 {
            let left = if PAULI_PARITY[n] == 1 { ps[m].dot(z) } else { ps[m].clone() };
            let basis = kron(&left, &ps[n]);
            let coef = dagger(&basis).dot(op).diag().sum() / 4.0;
            if coef.norm() <= DECOMP_TOL {
                continue;
            }
            let mut factors = Vec::with_capacity(2);
            if m != 0 {
                factors.push((site_a, m));
            }
            if n != 0 {
                factors.push((site_b, n));
            }
            words.push(Word { coef, factors });
        }
    }
    LocalTerms { words }
}

fn check_size(l: usize, max: usize) -> Result<()> {
    if l > max {
        return Err(Error::Resource(format!(
            "dense construction limited to {max} sites, requested {l}"
        )));
    }
    Ok(())
}

/// Embed a one-site (2×2) or adjacent two-site (4×4, on `site`, `site`+1) operator of the
/// stated parity into an L-site register.
pub fn embed_local_graded(
    op: &Array2<C64>,
    site: usize,
    l: usize,
    op_parity: u8,
) -> Result<GradedOperator> {
    check_size(l, MAX_DENSE_SITES)?;
    if site == 0 || site > l {
        return Err(Error::InvalidArgument(format!("site {site} outside 1..={l}")));
    }
    if op_parity > 1 {
        return Err(Error::InvalidArgument(format!("parity must be 0 or 1, got {op_parity}")));
    }
    let terms = match op.dim() {
        (2, 2) => one_site_terms(op, site),
        (4, 4) => {
            if site + 1 > l {
                return Err(Error::InvalidArgument(format!(
                    "two-site operator at site {site} overruns L = {l}"
                )));
            }
            two_site_terms(op, site, site + 1)
        }
        d => {
            return Err(Error::InvalidArgument(format!(
                "local operator must be 2x2 or 4x4, got {d:?}"
            )))
        }
    };
    match local_parity(op) {
        Some(p) if p == op_parity => {}
        Some(p) => {
            return Err(Error::InvalidArgument(format!(
                "operator has parity {p}, flagged as {op_parity}"
            )))
        }
        None => {
            return Err(Error::InvalidArgument(
                "operator mixes even and odd blocks; it has no definite parity".into(),
            ))
        }
    }
    Ok(GradedOperator { entries: terms.to_dense(l), l, parity: op_parity })
}

fn check_chain(l: usize, boundary: Boundary) -> Result<()> {
    if l % 2 != 0 || l == 0 {
        return Err(Error::InvalidArgument(format!("L must be even and positive, got {l}")));
    }
    if boundary != Boundary::Pbc && l < 4 {
        return Err(Error::InvalidArgument(format!("open chains need L >= 4, got {l}")));
    }
    Ok(())
}

fn gate_terms(p: &GateParams, a: usize, b: usize) -> Result<LocalTerms> {
    Ok(two_site_terms(&build_smatrix(p)?.entries, a, b))
}

fn k_terms(theta: f64, site: usize) -> LocalTerms {
    one_site_terms(&build_boundary_k(theta).entries, site)
}

/// Gates of one brickwork layer in application order, with separate γ for the even
/// (bonds (1,2), (3,4), …) and odd (bonds (2,3), …) sublayers.
fn open_layer(
    p: &GateParams,
    gamma_even: &[f64],
    gamma_odd: &[f64],
    l: usize,
) -> Result<Vec<LocalTerms>> {
    let mut seq = Vec::with_capacity(l + 2);
    for (i, &g) in gamma_even.iter().enumerate() {
        seq.push(gate_terms(&p.with_gamma(g), 2 * i + 1, 2 * i + 2)?);
    }
    for (i, &g) in gamma_odd.iter().enumerate() {
        seq.push(gate_terms(&p.with_gamma(g), 2 * i + 2, 2 * i + 3)?);
    }
    seq.push(k_terms(p.theta / 2.0, l));
    seq.push(k_terms(-p.theta / 2.0, 1));
    Ok(seq)
}

/// Ordered gate list (first applied first) for one Floquet period.
///
/// PBC and OBC give a single layer; OBC_EXTENDED gives L layers in which each gate takes γ
/// from the log-masses of the lines it joins and then exchanges them.
pub fn layer_sequence(p: &GateParams, l: usize, boundary: Boundary) -> Result<Vec<LocalTerms>> {
    check_chain(l, boundary)?;
    let half = l / 2;
    match boundary {
        Boundary::Pbc => {
            let mut seq = Vec::with_capacity(l);
            for i in 0..half {
                seq.push(gate_terms(p, 2 * i + 1, 2 * i + 2)?);
            }
            for i in 0..half {
                let a = 2 * i + 2;
                let b = if a == l { 1 } else { a + 1 };
                seq.push(gate_terms(p, a, b)?);
            }
            Ok(seq)
        }
        Boundary::Obc => open_layer(p, &vec![p.gamma; half], &vec![p.gamma; half - 1], l),
        Boundary::ObcExtended => {
            let mut lm: Vec<f64> =
                (0..l).map(|i| if i % 2 == 0 { p.gamma / 2.0 } else { -p.gamma / 2.0 }).collect();
            let mut seq = Vec::new();
            for _ in 0..l {
                let ge: Vec<f64> = (0..half).map(|i| lm[2 * i] - lm[2 * i + 1]).collect();
                for i in 0..half {
                    lm.swap(2 * i, 2 * i + 1);
                }
                let go: Vec<f64> = (0..half - 1).map(|i| lm[2 * i + 1] - lm[2 * i + 2]).collect();
                for i in 0..half - 1 {
                    lm.swap(2 * i + 1, 2 * i + 2);
                }
                seq.extend(open_layer(p, &ge, &go, l)?);
            }
            Ok(seq)
        }
    }
}

/// Full Floquet operator U_F = U_odd · U_even (PBC/OBC) or the L-layer product
/// (OBC_EXTENDED).
pub fn build_ubw(p: &GateParams, l: usize, boundary: Boundary) -> Result<GradedOperator> {
    check_chain(l, boundary)?;
    check_size(l, MAX_DENSE_SITES)?;
    let mut u = linalg::identity(1 << l);
    for g in layer_sequence(p, l, boundary)? {
        u = g.apply_left(&u, l);
    }
    Ok(GradedOperator { entries: u, l, parity: 0 })
}

/// Q^L = Σ e^{(γ+θ)/4} X̂_odd + e^{−(γ+θ)/4} X̂_even and
/// Q^R = Σ e^{(γ−θ)/4} Ŷ_odd + e^{−(γ−θ)/4} Ŷ_even, hats denoting σᶻ-strings.
pub fn build_supercharges(p: &GateParams, l: usize) -> Result<SuperchargePair> {
    check_chain(l, Boundary::Pbc)?;
    check_size(l, MAX_DENSE_SITES)?;
    let charge = |pauli: usize, w: f64| {
        let words = (1..=l)
            .map(|site| {
                let e = if site % 2 == 1 { w } else { -w };
                Word { coef: c(e.exp(), 0.0), factors: vec![(site, pauli)] }
            })
            .collect();
        GradedOperator { entries: LocalTerms { words }.to_dense(l), l, parity: 1 }
    };
    Ok(SuperchargePair {
        q_l: charge(1, (p.gamma + p.theta) / 4.0),
        q_r: charge(2, (p.gamma - p.theta) / 4.0),
    })
}

/// Gate between two lines with log-masses `mu_a`, `mu_b` and rapidities `th_a`, `th_b`.
fn line_gate(alpha: f64, mu_a: f64, mu_b: f64, th: C64) -> Array2<C64> {
    smatrix_complex(alpha * ((mu_a + mu_b) / 2.0).exp(), mu_a - mu_b, th)
}

/// Yang–Baxter residual for three lines with general log-masses and rapidities:
/// ‖Š₁₂(b,c)Š₂₃(a,c)Š₁₂(a,b) − Š₂₃(a,b)Š₁₂(a,c)Š₂₃(b,c)‖_F.
pub fn yang_baxter_residual(alpha: f64, masses: [f64; 3], rapidities: [f64; 3]) -> f64 {
    let [ma, mb, mc] = masses;
    let [ta, tb, tc] = rapidities;
    let id = linalg::identity(2);
    let l12 = |g: Array2<C64>| kron(&g, &id);
    let l23 = |g: Array2<C64>| kron(&id, &g);
    let s = |m1, m2, t1: f64, t2: f64| line_gate(alpha, m1, m2, c(t1 - t2, 0.0));
    let lhs = l12(s(mb, mc, tb, tc)).dot(&l23(s(ma, mc, ta, tc))).dot(&l12(s(ma, mb, ta, tb)));
    let rhs = l23(s(ma, mb, ta, tb)).dot(&l12(s(ma, mc, ta, tc))).dot(&l23(s(mb, mc, tb, tc)));
    diff_norm(&lhs, &rhs)
}

/// Yang–Baxter residual with alternating line masses (γ/2, −γ/2, γ/2).
pub fn verify_yang_baxter(p: &GateParams, theta_a: f64, theta_b: f64, theta_c: f64) -> f64 {
    let h = p.gamma / 2.0;
    yang_baxter_residual(p.alpha, [h, -h, h], [theta_a, theta_b, theta_c])
}

/// t(u) = Str_aux[Ř_{aL}(u − θ_L) ⋯ Ř_{a1}(u − θ_1)] with Ř = Π·Š and the auxiliary line
/// carrying log-mass γ/2.
pub fn build_transfer_matrix(u: C64, p: &GateParams, l: usize) -> Result<TransferMatrix> {
    check_chain(l, Boundary::Pbc)?;
    check_size(l, MAX_TRANSFER_SITES)?;
    let n = l + 1;
    let mu_aux = p.gamma / 2.0;
    let pi = graded_permutation();
    let mut t = linalg::identity(1 << n);
    for i in 1..=l {
        let odd = i % 2 == 1;
        let mu = if odd { p.gamma / 2.0 } else { -p.gamma / 2.0 };
        let th = p.line_rapidity(odd);
        let r = pi.dot(&line_gate(p.alpha, mu_aux, mu, u - th));
        t = two_site_terms(&r, 1, i + 1).apply_left(&t, n);
    }
    let d = 1 << l;
    let top = t.slice(ndarray::s![..d, ..d]).to_owned();
    let bottom = t.slice(ndarray::s![d.., d..]).to_owned();
    Ok(TransferMatrix {
        entries: top - bottom,
        u,
        theta1: p.theta / 2.0,
        theta2: -p.theta / 2.0,
    })
}

/// Fermionic translation by one site, Π₁₂Π₂₃⋯Π_{L−1,L}, built from graded swaps.
pub fn graded_translation(l: usize) -> Result<GradedOperator> {
    check_size(l, MAX_DENSE_SITES)?;
    let pi = graded_permutation();
    let mut t = linalg::identity(1 << l);
    for a in (1..l).rev() {
        t = two_site_terms(&pi, a, a + 1).apply_left(&t, l);
    }
    Ok(GradedOperator { entries: t, l, parity: 0 })
}

pub fn graded_translation_squared(l: usize) -> Result<GradedOperator> {
    let t = graded_translation(l)?;
    Ok(GradedOperator { entries: t.entries.dot(&t.entries), l, parity: 0 })
}

/// How an operator's spectrum is to be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Unitary,
    Hermitian,
}

const KIND_TOL: f64 = 1e-8;
const MODULUS_TOL: f64 = 1e-10;

/// Full spectrum of a unitary or Hermitian operator.
pub fn dense_spectrum(op: &Array2<C64>, kind: OperatorKind) -> Result<Vec<C64>> {
    let n = op.nrows();
    let scale = linalg::fro_norm(op.view()).max(1.0);
    match kind {
        OperatorKind::Unitary => {
            let defect = linalg::unitarity_defect(op);
            if defect > KIND_TOL * (n as f64).sqrt() {
                return Err(Error::InvalidArgument(format!(
                    "operator flagged unitary has ‖U†U − 1‖ = {defect:.3e}"
                )));
            }
            let w = eigvals(op)?;
            if let Some(z) = w.iter().find(|z| (z.norm() - 1.0).abs() > MODULUS_TOL) {
                return Err(Error::Consistency(format!(
                    "unitary eigenvalue off the unit circle: |λ| = {}",
                    z.norm()
                )));
            }
            Ok(w.to_vec())
        }
        OperatorKind::Hermitian => {
            let defect = diff_norm(op, &dagger(op));
            if defect > KIND_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "operator flagged Hermitian has ‖H − H†‖ = {defect:.3e}"
                )));
            }
            Ok(eigvalsh(op)?.iter().map(|&x| c(x, 0.0)).collect())
        }
    }
}

/// ‖AA† − A†A‖_F, zero for normal operators.
pub fn normality_defect(op: &Array2<C64>) -> f64 {
    commutator_norm(op, &dagger(op))
}

/// Evolve a state vector through `layers` Floquet periods, recording ⟨σᶻ_j⟩ after each
/// period (row 0 is the initial state).
pub fn evolve_state_sz(
    p: &GateParams,
    l: usize,
    boundary: Boundary,
    psi0: &Array1<C64>,
    layers: usize,
) -> Result<Array2<f64>> {
    check_size(l, MAX_DENSE_SITES)?;
    let seq = layer_sequence(p, l, boundary)?;
    let mut psi = psi0.clone();
    let mut out = Array2::<f64>::zeros((layers + 1, l));
    let record = |psi: &Array1<C64>, row: &mut ndarray::ArrayViewMut1<f64>| {
        for (b, z) in psi.iter().enumerate() {
            let w = z.norm_sqr();
            for j in 1..=l {
                row[j - 1] += if fock::occupied(b, j, l) { -w } else { w };
            }
        }
    };
    record(&psi, &mut out.row_mut(0));
    for t in 1..=layers {
        for g in &seq {
            psi = g.apply_vec(&psi, l);
        }
        record(&psi, &mut out.row_mut(t));
    }
    Ok(out)
}

/// Computational basis state with the given bits (`true` = σᶻ = −1) as a vector.
pub fn basis_state(bits: &[bool]) -> Array1<C64> {
    let l = bits.len();
    let idx = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0, |acc, (j, _)| acc | fock::site_mask(j + 1, l));
    let mut v = Array1::from_elem(1 << l, ZERO);
    v[idx] = ONE;
    v
}
