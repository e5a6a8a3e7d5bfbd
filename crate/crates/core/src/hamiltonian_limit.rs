//! The hamiltonian limit H_γ = −i U_F(θ=0)† ∂_θ U_F|_{θ=0}: a staggered Kitaev chain.
//!
//! Real-space form on sublattices A (odd sites) and B (even sites), its BdG blocks Λ_k on
//! the folded zone with Nambu spinor (c_k, c_{k−π}, c_{−k}†, c_{π−k}†), the single-particle
//! dispersions, and the k = 0 zero mode carried by the supercharges.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, mode_act};
use crate::gate_core::{smatrix_complex, GateParams};
use crate::gaussian::{
    gate_rotation, kappa_to_bdg, local_majoranas, pair_indices, quadratic_kappa, rotate_cols,
    rotate_rows, scatter_add,
};
use crate::graded_dense::{build_ubw, Boundary, MAX_DENSE_SITES};
use crate::linalg::{c, dagger, diff_norm, eigvalsh, I, ZERO};

/// Largest chain for the circuit route and for dense many-body representations.
pub const MAX_CIRCUIT_SITES: usize = 12;

/// Finite-difference steps for θ-derivatives (Richardson-extrapolated central differences).
pub const FD_STEPS: [f64; 2] = [1e-3, 5e-4];

const RADICAND_CLIP: f64 = 1e-10;

/// Coefficients of the real-space H_γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HGammaCoefficients {
    pub n_a: f64,
    pub n_b: f64,
    pub j_ab: f64,
    pub j_ba: f64,
    pub j_aa: f64,
    pub j_abl: f64,
    pub s_ab: f64,
    pub s_ba: f64,
    pub s_aa: f64,
    pub s_abl: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive and finite, got {alpha}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be finite, got {gamma}")));
    }
    Ok(())
}

impl HGammaCoefficients {
    /// With s = sech(γ/2), T = tanh(γ/2):
    /// N_A = s(1 − T³)/α, N_B = s(1 + T³)/α, J_AB = (3T²s² + s⁴)/(2α), J_BA = s⁴/(2α),
    /// J_AA = Ts³/(2α), J^L_AB = −T²s²/(2α), S_AB = s/2, S_BA = s³/2, S_AA = Ts²/2,
    /// S^L_AB = −T²s/2.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_gamma(gamma)?;
        let s = 1.0 / (gamma / 2.0).cosh();
        let t = (gamma / 2.0).tanh();
        let a = alpha;
        Ok(Self {
            n_a: (s - t.powi(3) * s) / a,
            n_b: (s + t.powi(3) * s) / a,
            j_ab: (3.0 * t * t * s * s + s.powi(4)) / (2.0 * a),
            j_ba: s.powi(4) / (2.0 * a),
            j_aa: t * s.powi(3) / (2.0 * a),
            j_abl: -t * t * s * s / (2.0 * a),
            s_ab: s / 2.0,
            s_ba: s.powi(3) / 2.0,
            s_aa: t * s * s / 2.0,
            s_abl: -t * t * s / 2.0,
        })
    }

    /// Symmetry-breaking perturbation: δ added to J^L_AB, ε₁ to N_A, ε₂ to N_B.
    pub fn perturbed(&self, delta: f64, eps1: f64, eps2: f64) -> Self {
        Self { j_abl: self.j_abl + delta, n_a: self.n_a + eps1, n_b: self.n_b + eps2, ..*self }
    }

    /// Constant making the many-body operator traceless: L(N_A + N_B)/4.
    pub fn constant(&self, l: usize) -> f64 {
        l as f64 * (self.n_a + self.n_b) / 4.0
    }
}

/// Quadratic fermion operator
/// Σ h_ij cᵢ†c_j + ½Σ (Δ_ij cᵢ†c_j† + h.c.) + constant = ½Ψ†·bdg·Ψ + ½ tr h + constant.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    /// [[h, Δ], [Δ†, −hᵀ]]
    pub bdg: Array2<C64>,
    pub constant: f64,
    pub l: usize,
}

impl HamiltonianMatrix {
    pub fn h(&self) -> Array2<C64> {
        self.bdg.slice(s![..self.l, ..self.l]).to_owned()
    }

    pub fn delta(&self) -> Array2<C64> {
        self.bdg.slice(s![..self.l, self.l..]).to_owned()
    }

    /// ‖B − B†‖ plus the violation of the BdG block structure.
    pub fn structure_defect(&self) -> f64 {
        let l = self.l;
        let h = self.h();
        let d = self.delta();
        let lower_left = self.bdg.slice(s![l.., ..l]).to_owned();
        let lower_right = self.bdg.slice(s![l.., l..]).to_owned();
        diff_norm(&self.bdg, &dagger(&self.bdg))
            + diff_norm(&lower_left, &dagger(&d))
            + diff_norm(&lower_right, &h.t().mapv(|z| -z))
            + diff_norm(&d, &d.t().mapv(|z| -z))
    }

    /// BdG eigenvalues (ascending, ± pairs).
    pub fn bdg_spectrum(&self) -> Result<Vec<f64>> {
        Ok(eigvalsh(&self.bdg)?.to_vec())
    }

    /// Non-negative single-particle energies (the upper half of the BdG spectrum).
    pub fn single_particle_energies(&self) -> Result<Vec<f64>> {
        let w = self.bdg_spectrum()?;
        Ok(w[self.l..].to_vec())
    }

    /// Many-body ground-state energy: constant + ½tr h − ½Σε.
    pub fn ground_energy(&self) -> Result<f64> {
        let tr: f64 = self.h().diag().iter().map(|z| z.re).sum();
        let eps: f64 = self.single_particle_energies()?.iter().sum();
        Ok(self.constant + 0.5 * tr - 0.5 * eps)
    }

    /// Dense 2^L × 2^L many-body operator (sites map to Jordan–Wigner modes 1…L).
    pub fn to_dense(&self) -> Result<Array2<C64>> {
        let l = self.l;
        if l > MAX_CIRCUIT_SITES {
            return Err(Error::Resource(format!(
                "dense many-body form limited to {MAX_CIRCUIT_SITES} sites, requested {l}"
            )));
        }
        let dim = 1usize << l;
        let h = self.h();
        let d = self.delta();
        let mut out = Array2::<C64>::eye(dim) * c(self.constant, 0.0);
        for b in 0..dim {
            for i in 0..l {
                for j in 0..l {
                    let hij = h[[i, j]];
                    if hij != ZERO {
                        if let Some((t1, s1)) = mode_act(j + 1, false, b, l) {
                            if let Some((t2, s2)) = mode_act(i + 1, true, t1, l) {
                                out[[t2, b]] += hij * (s1 * s2);
                            }
                        }
                    }
                    if i < j && d[[i, j]] != ZERO {
                        // Δ_ij cᵢ†c_j† and its adjoint conj(Δ_ij) c_j cᵢ
                        if let Some((t1, s1)) = mode_act(j + 1, true, b, l) {
                            if let Some((t2, s2)) = mode_act(i + 1, true, t1, l) {
                                out[[t2, b]] += d[[i, j]] * (s1 * s2);
                            }
                        }
                        if let Some((t1, s1)) = mode_act(i + 1, false, b, l) {
                            if let Some((t2, s2)) = mode_act(j + 1, false, t1, l) {
                                out[[t2, b]] += d[[i, j]].conj() * (s1 * s2);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Tr(A·H) where A = op_a op_b (each a mode operator) acts as a signed permutation.
fn trace_with(
    h: &Array2<C64>,
    l: usize,
    first: (usize, bool),
    second: (usize, bool),
) -> C64 {
    // A = op1 · op2 with op2 applied first; Tr(A H) = Σ_r A_{s(r), r} H_{r, s(r)}
    let dim = 1usize << l;
    let mut acc = ZERO;
    for r in 0..dim {
        if let Some((t1, s1)) = mode_act(second.0, second.1, r, l) {
            if let Some((t2, s2)) = mode_act(first.0, first.1, t1, l) {
                acc += h[[r, t2]] * (s1 * s2);
            }
        }
    }
    acc
}

/// Extract the quadratic part of a dense many-body operator; also returns the norm of the
/// remainder (zero iff the operator is quadratic).
pub fn quadratic_part(dense: &Array2<C64>, l: usize) -> Result<(HamiltonianMatrix, f64)> {
    if dense.nrows() != 1 << l {
        return Err(Error::InvalidArgument("dense operator does not match L".into()));
    }
    let norm = 2f64.powi(l as i32 - 2);
    let mut h = Array2::<C64>::zeros((l, l));
    let mut d = Array2::<C64>::zeros((l, l));
    for i in 1..=l {
        for j in 1..=l {
            if i == j {
                let n_tr = trace_with(dense, l, (i, true), (i, false));
                let id_tr: C64 = dense.diag().sum();
                h[[i - 1, i - 1]] = (n_tr - id_tr * 0.5) / norm;
            } else {
                // Tr(c_j† cᵢ H)
                h[[i - 1, j - 1]] = trace_with(dense, l, (j, true), (i, false)) / norm;
            }
            if i < j {
                // Tr(c_j cᵢ H)
                let v = trace_with(dense, l, (j, false), (i, false)) / norm;
                d[[i - 1, j - 1]] = v;
                d[[j - 1, i - 1]] = -v;
            }
        }
    }
    let tr: C64 = dense.diag().sum();
    let constant = tr.re / (1u64 << l) as f64 - h.diag().iter().map(|z| z.re).sum::<f64>() / 2.0;
    let hm = HamiltonianMatrix { bdg: assemble_bdg(&h, &d), constant, l };
    let rest = diff_norm(&hm.to_dense()?, dense);
    Ok((hm, rest))
}

fn assemble_bdg(h: &Array2<C64>, d: &Array2<C64>) -> Array2<C64> {
    let l = h.nrows();
    let mut b = Array2::<C64>::zeros((2 * l, 2 * l));
    b.slice_mut(s![..l, ..l]).assign(h);
    b.slice_mut(s![..l, l..]).assign(d);
    b.slice_mut(s![l.., ..l]).assign(&dagger(d));
    b.slice_mut(s![l.., l..]).assign(&h.t().mapv(|z| -z));
    b
}

fn check_chain(l: usize, boundary: Boundary) -> Result<()> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidArgument(format!("L must be even and >= 2, got {l}")));
    }
    if boundary == Boundary::ObcExtended {
        return Err(Error::InvalidArgument(
            "the hamiltonian limit is defined for PBC or OBC".into(),
        ));
    }
    Ok(())
}

/// Real-space quadratic operator from the ten coefficients. Site indices 0-based: A = 2m,
/// B = 2m + 1. With OBC, bonds that would wrap are dropped.
pub fn bdg_from_coefficients(
    co: &HGammaCoefficients,
    l: usize,
    boundary: Boundary,
) -> Result<HamiltonianMatrix> {
    check_chain(l, boundary)?;
    let periodic = boundary == Boundary::Pbc;
    let mut h = Array2::<C64>::zeros((l, l));
    let mut d = Array2::<C64>::zeros((l, l));
    let wrap = |i: usize| if i < l { Some(i) } else if periodic { Some(i % l) } else { None };
    let hop = |h: &mut Array2<C64>, i: usize, j: usize, v: f64| {
        if let (Some(i), Some(j)) = (wrap(i), wrap(j)) {
            h[[i, j]] += v;
            h[[j, i]] += v;
        }
    };
    let pair = |d: &mut Array2<C64>, i: usize, j: usize, v: C64| {
        if let (Some(i), Some(j)) = (wrap(i), wrap(j)) {
            d[[i, j]] += v;
            d[[j, i]] -= v;
        }
    };
    for m in 0..l / 2 {
        let a = 2 * m;
        let b = 2 * m + 1;
        h[[a, a]] -= co.n_a;
        h[[b, b]] -= co.n_b;
        hop(&mut h, a, b, co.j_ab);
        hop(&mut h, b, b + 1, co.j_ba);
        hop(&mut h, a, b + 2, co.j_abl);
        hop(&mut h, a, a + 2, co.j_aa);
        hop(&mut h, b, b + 2, -co.j_aa);
        pair(&mut d, a, b, I * co.s_ab);
        pair(&mut d, b, b + 1, I * co.s_ba);
        pair(&mut d, a, a + 2, I * co.s_aa);
        pair(&mut d, b, b + 2, -I * co.s_aa);
        pair(&mut d, a, b + 2, I * co.s_abl);
    }
    Ok(HamiltonianMatrix { bdg: assemble_bdg(&h, &d), constant: co.constant(l), l })
}

/// The critical Kitaev chain H₀(α): chemical potential 1/α, hopping 1/(2α), pairing i/2.
pub fn build_h0(alpha: f64, l: usize, boundary: Boundary) -> Result<HamiltonianMatrix> {
    bdg_from_coefficients(&HGammaCoefficients::new(alpha, 0.0)?, l, boundary)
}

/// Kitaev chain with the chemical potential set by hand (μ = 1/α is the circuit value):
/// −μ Σ n + t Σ (c†c' + h.c.) + (i/2)Σ (c†c'† + h.c.) with t = 1/(2α).
pub fn build_kitaev(alpha: f64, mu: f64, l: usize, boundary: Boundary) -> Result<HamiltonianMatrix> {
    let base = HGammaCoefficients::new(alpha, 0.0)?;
    let co = HGammaCoefficients { n_a: mu, n_b: mu, ..base };
    bdg_from_coefficients(&co, l, boundary)
}

/// H₀ in the spin basis:
/// (1/2α)Σσᶻ + (1/4α)Σ(σˣσˣ + σʸσʸ) + (1/4)Σ(σˣσʸ + σʸσˣ), graded across the boundary.
pub fn build_h0_spin(alpha: f64, l: usize, boundary: Boundary) -> Result<Array2<C64>> {
    check_alpha(alpha)?;
    check_chain(l, boundary)?;
    if l > MAX_CIRCUIT_SITES {
        return Err(Error::Resource(format!("spin form limited to {MAX_CIRCUIT_SITES} sites")));
    }
    let [_, x, y, z] = crate::linalg::paulis();
    let k = crate::linalg::kron;
    let bond = (k(&x, &x) + k(&y, &y)) * c(1.0 / (4.0 * alpha), 0.0)
        + (k(&x, &y) + k(&y, &x)) * c(0.25, 0.0);
    let site = &z * c(1.0 / (2.0 * alpha), 0.0);
    let dim = 1usize << l;
    let mut out = Array2::<C64>::zeros((dim, dim));
    let eye = Array2::<C64>::eye(dim);
    for i in 1..=l {
        out = out + crate::graded_dense::one_site_terms(&site, i).apply_left(&eye, l);
        let j = if i == l { 1 } else { i + 1 };
        if i < l || boundary == Boundary::Pbc {
            out = out + crate::graded_dense::two_site_terms(&bond, i, j).apply_left(&eye, l);
        }
    }
    Ok(out)
}

/// Source for H_γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HSource {
    Analytic,
    Circuit,
}

/// H_γ on a periodic chain.
pub fn build_hgamma(alpha: f64, gamma: f64, l: usize, source: HSource) -> Result<HamiltonianMatrix> {
    match source {
        HSource::Analytic => {
            bdg_from_coefficients(&HGammaCoefficients::new(alpha, gamma)?, l, Boundary::Pbc)
        }
        HSource::Circuit => circuit_hgamma(alpha, gamma, l),
    }
}

/// Richardson-extrapolated central difference of a matrix-valued function at 0.
fn derivative_at_zero<F>(f: F) -> Array2<C64>
where
    F: Fn(f64) -> Array2<C64>,
{
    let central = |h: f64| (f(h) - f(-h)) * c(1.0 / (2.0 * h), 0.0);
    let [h1, h2] = FD_STEPS;
    let ratio = (h1 / h2).powi(2);
    (central(h2) * c(ratio, 0.0) - central(h1)) * c(1.0 / (ratio - 1.0), 0.0)
}

/// H_γ from the gate expansion Š(θ) = Š⁽⁰⁾ + θŠ⁽¹⁾ + …:
/// H_γ = Σ_even G + U_e⁽⁰⁾† (Σ_odd G) U_e⁽⁰⁾ with G = −i Š⁽⁰⁾†Š⁽¹⁾ on each bond. Everything
/// is Gaussian, so the sum is carried out on Majorana coefficient matrices.
fn circuit_hgamma(alpha: f64, gamma: f64, l: usize) -> Result<HamiltonianMatrix> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    check_chain(l, Boundary::Pbc)?;
    if l > MAX_CIRCUIT_SITES {
        return Err(Error::Resource(format!(
            "circuit route limited to {MAX_CIRCUIT_SITES} sites, requested {l}"
        )));
    }
    let s0 = smatrix_complex(alpha, gamma, ZERO);
    let s1 = derivative_at_zero(|t| smatrix_complex(alpha, gamma, c(t, 0.0)));
    let g = dagger(&s0).dot(&s1) * (-I);
    let (kappa_loc, const_loc, rest) = quadratic_kappa(&g, &local_majoranas());
    if rest > 1e-8 {
        return Err(Error::Consistency(format!("gate generator is not quadratic ({rest:.3e})")));
    }
    let r_even = gate_rotation(&s0)?;
    let n = 2 * l;
    let mut k_even = Array2::<f64>::zeros((n, n));
    let mut k_odd = Array2::<f64>::zeros((n, n));
    for i in 0..l / 2 {
        scatter_add(&mut k_even, &kappa_loc, &pair_indices(2 * i + 1, 2 * i + 2));
        let a = 2 * i + 2;
        let b = if a == l { 1 } else { a + 1 };
        scatter_add(&mut k_odd, &kappa_loc, &pair_indices(a, b));
    }
    // U_e† (i/4 mᵀκm) U_e = i/4 mᵀ (Rᵀ κ R) m
    let mut conj = k_odd;
    for i in 0..l / 2 {
        let idx = pair_indices(2 * i + 1, 2 * i + 2);
        let rt = r_even.t().to_owned();
        rotate_rows(&mut conj, &rt, &idx);
        rotate_cols(&mut conj, &rt, &idx);
    }
    let kappa = k_even + conj;
    let bdg = kappa_to_bdg(&kappa);
    let tr_h: f64 = (0..l).map(|i| bdg[[i, i]].re).sum();
    let constant = const_loc * l as f64 - 0.5 * tr_h;
    Ok(HamiltonianMatrix { bdg, constant, l })
}

/// Dense oracle: −i U_F(0)† ∂_θ U_F(θ)|₀ from finite differences of the full Floquet operator.
pub fn circuit_generator_dense(alpha: f64, gamma: f64, l: usize) -> Result<Array2<C64>> {
    if l > MAX_CIRCUIT_SITES.min(MAX_DENSE_SITES) {
        return Err(Error::Resource(format!(
            "dense generator limited to {MAX_CIRCUIT_SITES} sites, requested {l}"
        )));
    }
    let u = |t: f64| -> Result<Array2<C64>> {
        Ok(build_ubw(&GateParams::new(alpha, gamma, t)?, l, Boundary::Pbc)?.entries)
    };
    let u0 = u(0.0)?;
    let mut vals = Vec::new();
    for h in FD_STEPS {
        vals.push((u(h)? - u(-h)?) * c(1.0 / (2.0 * h), 0.0));
    }
    let ratio = (FD_STEPS[0] / FD_STEPS[1]).powi(2);
    let du = (&vals[1] * c(ratio, 0.0) - &vals[0]) * c(1.0 / (ratio - 1.0), 0.0);
    Ok(dagger(&u0).dot(&du) * (-I))
}

/// 4×4 BdG block Λ_k on (c_k, c_{k−π}, c_{−k}†, c_{π−k}†):
/// [[N₁, H, S₁, S₂], [H*, N₂, S₂*, −S₁], [S₁, S₂, −N₁, −H], [S₂*, −S₁, −H*, −N₂]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdGBlock {
    pub n1: f64,
    pub n2: f64,
    pub h: C64,
    pub s1: f64,
    pub s2: C64,
    pub k: f64,
}

impl BdGBlock {
    pub fn matrix(&self) -> Array2<C64> {
        let (n1, n2, h, s1, s2) = (c(self.n1, 0.0), c(self.n2, 0.0), self.h, c(self.s1, 0.0), self.s2);
        ndarray::array![
            [n1, h, s1, s2],
            [h.conj(), n2, s2.conj(), -s1],
            [s1, s2, -n1, -h],
            [s2.conj(), -s1, -h.conj(), -n2]
        ]
    }
}

/// Closed-form Λ_k for the unperturbed H_γ (s = sech(γ/2), sh = sinh(γ/2), ch = cosh(γ/2)):
/// N₁,₂ = s⁴(−4ch³ ± (3cosh γ + 1)cos k ∓ 2sh² cos 3k)/(4α),
/// H = −T s³(sh² − 2i sh sin³k + cos 2k)/α, S₁ = −s³ sin k (1 − sh² cos 2k),
/// S₂ = 2 sh s³ sin k cos k (1 + i sh sin k).
pub fn bdg_block(alpha: f64, gamma: f64, k: f64) -> Result<BdGBlock> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    let s = 1.0 / (gamma / 2.0).cosh();
    let sh = (gamma / 2.0).sinh();
    let ch = (gamma / 2.0).cosh();
    let t = (gamma / 2.0).tanh();
    let lin = (3.0 * gamma.cosh() + 1.0) * k.cos() - 2.0 * sh * sh * (3.0 * k).cos();
    let base = -4.0 * ch.powi(3);
    Ok(BdGBlock {
        n1: s.powi(4) * (base + lin) / (4.0 * alpha),
        n2: s.powi(4) * (base - lin) / (4.0 * alpha),
        h: c(sh * sh + (2.0 * k).cos(), -2.0 * sh * k.sin().powi(3)) * (-t * s.powi(3) / alpha),
        s1: -s.powi(3) * k.sin() * (1.0 - sh * sh * (2.0 * k).cos()),
        s2: c(1.0, sh * k.sin()) * (2.0 * sh * s.powi(3) * k.sin() * k.cos()),
        k,
    })
}

/// Bloch form of a two-site-cell quadratic operator: Λ_k for arbitrary coefficients
/// (used for perturbed chains), obtained by projecting the real-space BdG matrix onto the
/// Nambu spinor of one unit cell.
#[derive(Debug, Clone)]
pub struct BlochHamiltonian {
    /// (cell site 0|1, hole row, hole column, displacement, value)
    entries: Vec<(usize, bool, bool, isize, C64)>,
}

const BLOCH_RING: usize = 16;

impl BlochHamiltonian {
    pub fn from_coefficients(co: &HGammaCoefficients) -> Result<Self> {
        let lr = BLOCH_RING;
        let m = bdg_from_coefficients(co, lr, Boundary::Pbc)?.bdg;
        let i0 = lr / 2;
        let mut entries = Vec::new();
        for (cell, i) in [i0, i0 + 1].into_iter().enumerate() {
            for row_hole in [false, true] {
                for col_hole in [false, true] {
                    for jj in 0..lr {
                        let v = m[[i + lr * row_hole as usize, jj + lr * col_hole as usize]];
                        if v != ZERO {
                            let d = (jj as isize - i as isize + (lr / 2) as isize)
                                .rem_euclid(lr as isize)
                                - (lr / 2) as isize;
                            entries.push((cell, row_hole, col_hole, d, v));
                        }
                    }
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn unperturbed(alpha: f64, gamma: f64) -> Result<Self> {
        Self::from_coefficients(&HGammaCoefficients::new(alpha, gamma)?)
    }

    /// Λ_k[p][q] = ½ Σ_{i∈cell} Σ_j φ_p(i) M_ij conj(φ_q(j)), φ the plane waves of the
    /// Nambu components.
    pub fn lambda(&self, k: f64) -> Array2<C64> {
        use std::f64::consts::PI;
        // (momentum sign convention, is hole)
        let comps: [(f64, bool); 4] = [(k, false), (k - PI, false), (k, true), (-(PI - k), true)];
        let phase = |p: usize, site: f64| C64::from_polar(1.0, -comps[p].0 * site);
        let mut out = Array2::<C64>::zeros((4, 4));
        for &(cell, rh, ch, d, v) in &self.entries {
            let site = (cell + 1) as f64;
            for p in (0..4).filter(|&p| comps[p].1 == rh) {
                let fp = phase(p, site);
                for q in (0..4).filter(|&q| comps[q].1 == ch) {
                    out[[p, q]] += fp * v * phase(q, site + d as f64).conj();
                }
            }
        }
        out.mapv_inplace(|z| z * 0.5);
        out
    }
}

/// Coefficients of the closed-form dispersion
/// ε₁,₂ = (1/√2)√(ν₀ + ν₁cos 2k ∓ √(Σⱼ μⱼ cos 2jk)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionCoefficients {
    pub nu0: f64,
    pub nu1: f64,
    pub mu: [f64; 7],
}

impl DispersionCoefficients {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_gamma(gamma)?;
        let s = 1.0 / (gamma / 2.0).cosh();
        let t = (gamma / 2.0).tanh();
        let a2 = alpha * alpha;
        let a4 = a2 * a2;
        let ch = |n: f64| (n * gamma).cosh();
        Ok(Self {
            nu0: s.powi(4) / a2 * (1.0 + 2.0 * ch(1.0)) + s * s,
            nu1: s.powi(4) / a2 - s * s,
            mu: [
                s.powi(6) / a4 * 8.0 * ch(1.0)
                    + t * t * s.powi(12) / (32.0 * a2)
                        * (300.0 - 193.0 * ch(1.0) + 162.0 * ch(2.0) - 15.0 * ch(3.0)
                            + 2.0 * ch(4.0)),
                8.0 * s.powi(6) / a4
                    - t * t * s.powi(12) / (16.0 * a2)
                        * (163.0 - 120.0 * ch(1.0) + 92.0 * ch(2.0) - 8.0 * ch(3.0) + ch(4.0)),
                t.powi(4) * s.powi(10) / (16.0 * a2) * (93.0 + 4.0 * ch(1.0) + 31.0 * ch(2.0)),
                -t.powi(4) * s.powi(10) / (2.0 * a2) * (21.0 - 12.0 * ch(1.0) + 7.0 * ch(2.0)),
                t.powi(4) * s.powi(10) / (8.0 * a2) * (45.0 - 44.0 * ch(1.0) + 15.0 * ch(2.0)),
                -4.0 * t.powi(8) * s.powi(6) / a2,
                t.powi(8) * s.powi(6) / (2.0 * a2),
            ],
        })
    }

    /// (ν₀ + ν₁)² − Σμⱼ and Σμⱼ − 16/(α⁴cosh⁴(γ/2)).
    pub fn gapless_residuals(&self, alpha: f64, gamma: f64) -> (f64, f64) {
        let sum: f64 = self.mu.iter().sum();
        let target = 16.0 / (alpha.powi(4) * (gamma / 2.0).cosh().powi(4));
        ((self.nu0 + self.nu1).powi(2) - sum, sum - target)
    }

    /// Branches from the closed form at momentum k.
    pub fn branches(&self, k: f64) -> Result<(f64, f64)> {
        let inner: f64 =
            self.mu.iter().enumerate().map(|(j, m)| m * (2.0 * j as f64 * k).cos()).sum();
        nested_roots(self.nu0 + self.nu1 * (2.0 * k).cos(), inner)
    }
}

fn clip(x: f64, what: &str) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -RADICAND_CLIP {
        Ok(0.0)
    } else {
        Err(Error::Consistency(format!("negative {what} radicand {x:.3e}")))
    }
}

/// (1/√2)√(ν ∓ √r): the minus branch first.
fn nested_roots(nu: f64, r: f64) -> Result<(f64, f64)> {
    let root = clip(r, "inner")?.sqrt();
    let lo = clip(nu - root, "outer")?;
    let hi = clip(nu + root, "outer")?;
    Ok(((lo / 2.0).sqrt(), (hi / 2.0).sqrt()))
}

/// Non-negative BdG energies (ε₁ ≤ ε₂) of a 4×4 particle-hole symmetric Hermitian block,
/// whose spectrum is {±ε₁, ±ε₂}. Taken from a Hermitian eigensolve rather than
/// ε² = (ν ∓ √(ν² − 4 det Λ))/2, which loses half the digits of ε₁ near a zero mode.
pub fn block_energies(lambda: &Array2<C64>) -> Result<(f64, f64)> {
    let mut e: Vec<f64> = crate::linalg::eigvalsh(lambda)?.iter().map(|x| x.abs()).collect();
    e.sort_by(f64::total_cmp);
    Ok(((e[0] + e[1]) / 2.0, (e[2] + e[3]) / 2.0))
}

/// Dispersion (ε₁, ε₂) of H_γ at k ∈ [0, π/2]; ε₁ is the branch vanishing at k = 0.
pub fn dispersion_hgamma(alpha: f64, gamma: f64, k: f64) -> Result<(f64, f64)> {
    block_energies(&bdg_block(alpha, gamma, k)?.matrix())
}

/// Details of the k = 0 zero-mode check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeReport {
    pub n1: f64,
    pub n2: f64,
    pub h0: f64,
    /// Largest deviation of the M and N block spectra from ±(N₁⁰ + N₂⁰)/2.
    pub block_deviation: f64,
    /// ‖Λ₀ v‖ for v the normalized (Q^L − iQ^R) coefficient vector.
    pub annihilation: f64,
    /// Distance between the displayed zero-mode vector (with √(−N₁⁰) taken with the sign of
    /// sinh(γ/4)) and the supercharge combination, up to adjoint.
    pub vector_deviation: f64,
    /// Same distance with the unsigned root, as displayed; differs from zero for γ < 0.
    pub unsigned_vector_deviation: f64,
    /// Ratio of the correct normalization 1/(2√L √cosh(γ/2)) to 1/(2√L cosh(γ/2)).
    pub prefactor_ratio: f64,
}

impl ZeroModeReport {
    pub fn residual(&self) -> f64 {
        self.block_deviation.max(self.annihilation).max(self.vector_deviation)
    }
}

/// k = 0 blocks and zero mode; see [`ZeroModeReport`].
pub fn zero_mode_report(alpha: f64, gamma: f64) -> Result<ZeroModeReport> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    let ch2 = (gamma / 2.0).cosh();
    let n1 = -2.0 / alpha * (gamma / 4.0).sinh().powi(2) / (ch2 * ch2);
    let n2 = -2.0 / alpha * (gamma / 4.0).cosh().powi(2) / (ch2 * ch2);
    let h0 = (n1 * n2).sqrt();
    let lam = bdg_block(alpha, gamma, 0.0)?.matrix();

    // ½Ψ†Λ₀Ψ on the two modes (c₀, c_π)
    let cs = fock::annihilators(2);
    let psi = [cs[0].clone(), cs[1].clone(), dagger(&cs[0]), dagger(&cs[1])];
    let mut op = Array2::<C64>::zeros((4, 4));
    for p in 0..4 {
        for q in 0..4 {
            op = op + dagger(&psi[p]).dot(&psi[q]) * (lam[[p, q]] * 0.5);
        }
    }
    let expect = ((n1 + n2) / 2.0).abs();
    let mut block_deviation: f64 = 0.0;
    for idx in [[0usize, 3], [2, 1]] {
        let mut blk = Array2::<C64>::zeros((2, 2));
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                blk[[a, b]] = op[[ia, ib]];
            }
        }
        let w = eigvalsh(&blk)?;
        block_deviation = block_deviation.max((w[0] + expect).abs()).max((w[1] - expect).abs());
    }
    // displayed blocks: M diagonal ∓(N₁⁰+N₂⁰)/2, N with diagonal ±(N₁⁰−N₂⁰)/2, |off| = H⁰
    block_deviation = block_deviation
        .max((op[[0, 0]].re + (n1 + n2) / 2.0).abs())
        .max((op[[2, 2]].re - (n1 - n2) / 2.0).abs())
        .max((op[[2, 1]].norm() - h0).abs());

    // (Q^L − iQ^R) ∝ cosh(γ/4) c₀† − sinh(γ/4) c_π†, normalized by √cosh(γ/2)
    let norm = ch2.sqrt();
    let q = [(gamma / 4.0).cosh() / norm, -(gamma / 4.0).sinh() / norm];
    // an operator Σ v_p Ψ_p commutes with ½Ψ†ΛΨ iff Λᵀv = 0
    let v = ndarray::array![ZERO, ZERO, c(q[0], 0.0), c(q[1], 0.0)];
    let annihilation = lam.t().dot(&v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let nn = (-(n1 + n2)).sqrt();
    let signed = [(-n2).sqrt() / nn, -(gamma / 4.0).sinh().signum() * (-n1).sqrt() / nn];
    let unsigned = [(-n2).sqrt() / nn, -(-n1).sqrt() / nn];
    let dist = |u: [f64; 2]| {
        let plus = ((u[0] - q[0]).powi(2) + (u[1] - q[1]).powi(2)).sqrt();
        let minus = ((u[0] + q[0]).powi(2) + (u[1] + q[1]).powi(2)).sqrt();
        plus.min(minus)
    };
    Ok(ZeroModeReport {
        n1,
        n2,
        h0,
        block_deviation,
        annihilation,
        vector_deviation: dist(signed),
        unsigned_vector_deviation: dist(unsigned),
        prefactor_ratio: ch2 / ch2.sqrt(),
    })
}

/// Maximum deviation of the k = 0 zero-mode structure (see [`zero_mode_report`]).
pub fn zero_mode_check(alpha: f64, gamma: f64) -> Result<f64> {
    Ok(zero_mode_report(alpha, gamma)?.residual())
}

/// Band of the uniform Kitaev chain (one-site cell) at momentum q ∈ [−π, π]:
/// √((μ − 2t cos q)² + (2Δ sin q)²) with μ = 1/α, t = 1/(2α), Δ = 1/2.
pub fn kitaev_band(alpha: f64, q: f64) -> f64 {
    let mu = 1.0 / alpha;
    let t = 1.0 / (2.0 * alpha);
    ((mu - 2.0 * t * q.cos()).powi(2) + q.sin().powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_dense::{build_supercharges, dense_spectrum, OperatorKind};
    use crate::linalg::{commutator_norm, max_abs};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn kitaev_reduction() {
        let co = HGammaCoefficients::new(1.7, 0.0).unwrap();
        let a = 1.7;
        assert!((co.n_a - 1.0 / a).abs() < 1e-15 && (co.n_b - 1.0 / a).abs() < 1e-15);
        assert!((co.j_ab - 0.5 / a).abs() < 1e-15 && (co.j_ba - 0.5 / a).abs() < 1e-15);
        assert!(co.j_aa == 0.0 && co.j_abl == 0.0 && co.s_aa == 0.0 && co.s_abl == 0.0);
        assert!((co.s_ab - 0.5).abs() < 1e-15 && (co.s_ba - 0.5).abs() < 1e-15);
    }

    #[test]
    fn h0_is_critical() {
        let h = build_h0(1.0, 8, Boundary::Pbc).unwrap();
        assert!(h.structure_defect() < 1e-14);
        let e = h.single_particle_energies().unwrap();
        assert!(e[0] < 1e-10);
    }

    #[test]
    fn spin_and_fermion_forms_agree() {
        for boundary in [Boundary::Pbc, Boundary::Obc] {
            let l = 6;
            let spin = build_h0_spin(1.3, l, boundary).unwrap();
            let ferm = build_h0(1.3, l, boundary).unwrap().to_dense().unwrap();
            assert!(diff_norm(&spin, &ferm) < 1e-12);
            let a = dense_spectrum(&spin, OperatorKind::Hermitian).unwrap();
            let b = dense_spectrum(&ferm, OperatorKind::Hermitian).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn open_kitaev_point_has_edge_modes() {
        let h = build_kitaev(1.0, 0.0, 12, Boundary::Obc).unwrap();
        let e = h.single_particle_energies().unwrap();
        assert!(e[0] < 1e-10);
        // one fermionic zero mode = two unpaired Majoranas; the rest are gapped
        assert!(e[1] > 0.1);
        let crit = build_h0(1.0, 12, Boundary::Obc).unwrap().single_particle_energies().unwrap();
        assert!(crit[0] > 1e-3);
    }

    #[test]
    fn hgamma_reduces_to_h0() {
        let a = build_hgamma(0.9, 0.0, 8, HSource::Analytic).unwrap();
        let b = build_h0(0.9, 8, Boundary::Pbc).unwrap();
        assert!(max_abs((&a.bdg - &b.bdg).view()) < 1e-12);
    }

    #[test]
    fn circuit_matches_analytic() {
        for (a, g) in [(1.0, 1.0), (0.6, -1.3), (2.0, 0.4)] {
            let an = build_hgamma(a, g, 8, HSource::Analytic).unwrap();
            let ci = build_hgamma(a, g, 8, HSource::Circuit).unwrap();
            assert!(max_abs((&an.bdg - &ci.bdg).view()) < 1e-9, "{a} {g}");
            assert!((an.constant - ci.constant).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_generator_is_the_same_operator() {
        let (a, g, l) = (1.0, 1.0, 8);
        let dense = circuit_generator_dense(a, g, l).unwrap();
        let (quad, rest) = quadratic_part(&dense, l).unwrap();
        assert!(rest < 1e-8);
        let an = build_hgamma(a, g, l, HSource::Analytic).unwrap();
        assert!(max_abs((&quad.bdg - &an.bdg).view()) < 1e-9);
        assert!(diff_norm(&an.to_dense().unwrap(), &dense) < 1e-8);
    }

    #[test]
    fn supercharges_commute_with_hgamma() {
        let (a, g, l) = (1.2, 0.8, 8);
        let h = build_hgamma(a, g, l, HSource::Analytic).unwrap().to_dense().unwrap();
        let q = build_supercharges(&GateParams::new(a, g, 0.0).unwrap(), l).unwrap();
        assert!(commutator_norm(&h, &q.q_l.entries) < 1e-9);
        assert!(commutator_norm(&h, &q.q_r.entries) < 1e-9);
    }

    #[test]
    fn spectrum_symmetric_about_shift() {
        let h = build_hgamma(1.0, 0.7, 8, HSource::Analytic).unwrap();
        let shift = HGammaCoefficients::new(1.0, 0.7).unwrap().constant(8);
        assert!((h.constant - shift).abs() < 1e-15);
        let dense = h.to_dense().unwrap();
        let mut w: Vec<f64> = crate::linalg::eigvalsh(&dense).unwrap().to_vec();
        let tr: f64 = w.iter().sum();
        assert!(tr.abs() < 1e-9);
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = w.len();
        for i in 0..n {
            assert!((w[i] + w[n - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_block_matches_bloch_projection() {
        for (a, g) in [(1.0, 0.0), (1.0, 1.0), (0.6, -1.3), (2.5, 2.0)] {
            let bloch = BlochHamiltonian::unperturbed(a, g).unwrap();
            for k in [0.0, 0.2, 0.7, 1.1, PI / 2.0] {
                let m = bdg_block(a, g, k).unwrap().matrix();
                assert!(max_abs((&m - &bloch.lambda(k)).view()) < 1e-13, "{a} {g} {k}");
            }
        }
    }

    #[test]
    fn momentum_blocks_reproduce_real_space_spectrum() {
        let (a, g, l) = (0.8, 1.1, 24);
        let mut real = build_hgamma(a, g, l, HSource::Analytic)
            .unwrap()
            .single_particle_energies()
            .unwrap();
        let mut mom = Vec::new();
        for j in 0..l {
            let mut k = 2.0 * PI * j as f64 / l as f64;
            if k > PI + 1e-12 {
                k -= 2.0 * PI;
            }
            if k <= -PI / 2.0 + 1e-12 || k > PI / 2.0 + 1e-12 {
                continue;
            }
            let w = eigvalsh(&bdg_block(a, g, k).unwrap().matrix()).unwrap();
            mom.extend([w[2], w[3]]);
        }
        real.sort_by(|x, y| x.partial_cmp(y).unwrap());
        mom.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(real.len(), mom.len());
        for (x, y) in real.iter().zip(&mom) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dispersion_at_zero_momentum() {
        for (a, g) in [(1.0, 0.0), (1.0, 1.0), (0.5, -2.0)] {
            let (e1, e2) = dispersion_hgamma(a, g, 0.0).unwrap();
            assert!(e1 < 1e-7);
            assert!((e2 - 2.0 / (a * (g / 2.0).cosh())).abs() < 1e-12);
        }
    }

    #[test]
    fn dispersion_matches_kitaev_chain_at_grid_point() {
        let h = build_h0(1.0, 8, Boundary::Pbc).unwrap();
        let w = h.single_particle_energies().unwrap();
        let (e1, e2) = dispersion_hgamma(1.0, 0.0, PI / 4.0).unwrap();
        for e in [e1, e2] {
            assert!(w.iter().any(|x| (x - e).abs() < 1e-12));
        }
    }

    #[test]
    fn zone_folding_at_zero_gamma() {
        let a = 1.4;
        for i in 0..=20 {
            let k = -PI / 2.0 + PI * i as f64 / 20.0;
            let (e1, e2) = dispersion_hgamma(a, 0.0, k.abs()).unwrap();
            let mut folded = [kitaev_band(a, k), kitaev_band(a, k - PI)];
            folded.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert!((e1 - folded[0]).abs() < 1e-10 && (e2 - folded[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_mode_examples() {
        let r = zero_mode_report(1.0, 0.0).unwrap();
        assert!(r.n1.abs() < 1e-15 && (r.n2 + 2.0).abs() < 1e-15 && r.h0.abs() < 1e-15);
        assert!(r.residual() < 1e-12);
        let r = zero_mode_report(1.0, 2.0).unwrap();
        assert!((r.h0 - (r.n1 * r.n2).sqrt()).abs() < 1e-12);
        assert!(r.residual() < 1e-12);
        let r = zero_mode_report(0.7, -1.5).unwrap();
        assert!(r.residual() < 1e-12);
        assert!(r.unsigned_vector_deviation > 0.1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(HGammaCoefficients::new(0.0, 1.0).is_err());
        assert!(build_hgamma(1.0, 0.0, 7, HSource::Analytic).is_err());
        assert!(matches!(
            build_hgamma(1.0, 0.0, 14, HSource::Circuit),
            Err(Error::Resource(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn gapless_identity(a in 0.2f64..4.0, g in -3.0f64..3.0) {
            let d = DispersionCoefficients::new(a, g).unwrap();
            let (r1, r2) = d.gapless_residuals(a, g);
            let scale = 16.0 / (a.powi(4) * (g / 2.0).cosh().powi(4));
            prop_assert!(r1.abs() < 1e-10 * scale.max(1.0));
            prop_assert!(r2.abs() < 1e-10 * scale.max(1.0));
        }

        #[test]
        fn zero_mode_random(a in 0.2f64..4.0, g in -3.0f64..3.0) {
            prop_assert!(zero_mode_check(a, g).unwrap() < 1e-10);
        }

        #[test]
        fn block_is_hermitian_and_particle_hole(a in 0.2f64..4.0, g in -3.0f64..3.0,
                                                k in 0.0f64..1.5707) {
            let m = bdg_block(a, g, k).unwrap().matrix();
            prop_assert!(max_abs((&m - &dagger(&m)).view()) < 1e-14);
            let up = crate::linalg::kron(&crate::linalg::paulis()[1], &crate::linalg::identity(2));
            let mm = bdg_block(a, g, -k).unwrap().matrix();
            let lhs = up.dot(&m.mapv(|z| z.conj())).dot(&dagger(&up));
            prop_assert!(max_abs((&lhs + &mm).view()) < 1e-12);
        }

        #[test]
        fn dispersion_is_nonnegative_and_ordered(a in 0.2f64..4.0, g in -3.0f64..3.0,
                                                 k in 0.0f64..1.5707) {
            let (e1, e2) = dispersion_hgamma(a, g, k).unwrap();
            prop_assert!(e1 >= 0.0 && e2 >= e1);
            let w = eigvalsh(&bdg_block(a, g, k).unwrap().matrix()).unwrap();
            prop_assert!((w[2] - e1).abs() < 1e-7 && (w[3] - e2).abs() < 1e-9);
        }
    }
}
