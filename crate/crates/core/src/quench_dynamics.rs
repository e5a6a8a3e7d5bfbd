//! Exact quench dynamics of U_F from product states.
//!
//! Product computational states are Gaussian and U_F is a Gaussian unitary, so the state is
//! carried by its Majorana covariance Γ_ab = (i/2)⟨[m_a, m_b]⟩ and each gate acts as an
//! orthogonal 4×4 rotation, Γ → RΓRᵀ. With this convention ⟨σᶻ_j⟩ = −Γ_{2j−1,2j}.
//! For the all-0 state at L ≡ 2 (mod 4) the momentum sectors give an independent route and
//! the generalized Gibbs ensemble (GGE) of the conserved mode occupations.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock;
use crate::gate_core::{build_boundary_k, build_smatrix, GateParams};
use crate::gaussian::{gate_rotation, pair_indices, rotate_cols, rotate_rows, site_rotation};
use crate::graded_dense::Boundary;
use crate::linalg::{self, c, dagger, ZERO};
use crate::spectral_ubw::{self, SymmetryBreaking, M6, N4, N4_PRIME};

/// Eigenvalue pairs closer than this to a common phase are treated as degenerate (not
/// dephased) in the GGE.
const DEPHASE_TOL: f64 = 1e-9;
/// Fraction of the peak deviation that defines the edge of a ballistic front.
const FRONT_THRESHOLD: f64 = 0.1;
/// Smallest deviation regarded as signal in a seeded run.
const SIGNAL_FLOOR: f64 = 1e-6;

/// Majorana covariance of a Gaussian state of L sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceState {
    pub gamma_matrix: Array2<f64>,
    pub l: usize,
    pub layer_count: usize,
}

impl CovarianceState {
    /// Product state; `bits[j]` true means site j+1 is occupied (σᶻ = −1).
    pub fn from_bits(bits: &[bool]) -> Self {
        let l = bits.len();
        let mut g = Array2::<f64>::zeros((2 * l, 2 * l));
        for (j, &b) in bits.iter().enumerate() {
            let sz = if b { -1.0 } else { 1.0 };
            g[[2 * j, 2 * j + 1]] = -sz;
            g[[2 * j + 1, 2 * j]] = sz;
        }
        Self { gamma_matrix: g, l, layer_count: 0 }
    }

    /// ⟨σᶻ_j⟩ for every site.
    pub fn sz(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.l, |j| -self.gamma_matrix[[2 * j, 2 * j + 1]])
    }

    /// ‖Γ + Γᵀ‖_max.
    pub fn antisymmetry_residual(&self) -> f64 {
        let g = &self.gamma_matrix;
        (g + &g.t()).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// ‖Γ² + 1‖_max; zero for pure Gaussian states.
    pub fn purity_residual(&self) -> f64 {
        let g = &self.gamma_matrix;
        (g.dot(g) + Array2::<f64>::eye(2 * self.l)).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Pf(Γ): ±1 for a pure state, the sign fixed by the fermion parity.
    pub fn parity(&self) -> f64 {
        pfaffian(&self.gamma_matrix)
    }

    fn rotate(&mut self, r: &Array2<f64>, idx: &[usize]) {
        rotate_rows(&mut self.gamma_matrix, r, idx);
        rotate_cols(&mut self.gamma_matrix, r, idx);
    }
}

/// Pfaffian of a real antisymmetric matrix by pivoted block elimination.
fn pfaffian(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let (mut piv, mut best) = (k + 1, m[[k, k + 1]].abs());
        for j in (k + 2)..n {
            if m[[k, j]].abs() > best {
                best = m[[k, j]].abs();
                piv = j;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != k + 1 {
            swap_sym(&mut m, k + 1, piv);
            pf = -pf;
        }
        let akk1 = m[[k, k + 1]];
        pf *= akk1;
        for i in (k + 2)..n {
            let f = m[[k, i]] / akk1;
            let g = m[[k + 1, i]] / akk1;
            for j in (k + 2)..n {
                let v = m[[i, j]] - f * m[[k + 1, j]] + g * m[[k, j]];
                m[[i, j]] = v;
            }
        }
        k += 2;
    }
    pf
}

fn swap_sym(m: &mut Array2<f64>, a: usize, b: usize) {
    let n = m.nrows();
    for j in 0..n {
        m.swap([a, j], [b, j]);
    }
    for i in 0..n {
        m.swap([i, a], [i, b]);
    }
}

/// ⟨σᶻ_j⟩ per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationTrace {
    /// Rows are layers (row 0 = initial state), columns are sites.
    pub sz: Array2<f64>,
    pub params: GateParams,
    pub l: usize,
    pub boundary: Boundary,
    pub initial: String,
}

impl MagnetizationTrace {
    pub fn layers(&self) -> usize {
        self.sz.nrows() - 1
    }
}

fn bits_descriptor(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Local rotations of one Floquet period, applied in order.
fn layer_rotations(p: &GateParams, l: usize, boundary: Boundary) -> Result<Vec<(Array2<f64>, Vec<usize>)>> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::InvalidArgument(format!("L must be even and ≥ 2, got {l}")));
    }
    let r = gate_rotation(&build_smatrix(p)?.entries)?;
    let half = l / 2;
    let mut seq = Vec::with_capacity(l + 2);
    for i in 0..half {
        seq.push((r.clone(), pair_indices(2 * i + 1, 2 * i + 2).to_vec()));
    }
    match boundary {
        Boundary::Pbc => {
            if l < 4 {
                return Err(Error::InvalidArgument("PBC needs L ≥ 4".into()));
            }
            for i in 0..half {
                let a = 2 * i + 2;
                let b = if a == l { 1 } else { a + 1 };
                seq.push((r.clone(), pair_indices(a, b).to_vec()));
            }
        }
        Boundary::Obc => {
            for i in 0..half - 1 {
                seq.push((r.clone(), pair_indices(2 * i + 2, 2 * i + 3).to_vec()));
            }
            let kl = site_rotation(&build_boundary_k(p.theta / 2.0).entries)?;
            let k1 = site_rotation(&build_boundary_k(-p.theta / 2.0).entries)?;
            seq.push((kl, vec![2 * l - 2, 2 * l - 1]));
            seq.push((k1, vec![0, 1]));
        }
        Boundary::ObcExtended => {
            return Err(Error::InvalidArgument(
                "covariance evolution supports PBC and OBC; use the dense oracle for OBC_EXTENDED".into(),
            ))
        }
    }
    Ok(seq)
}

/// Exact Gaussian evolution of a product state; returns the state after `layers` periods
/// together with the magnetization trace.
pub fn covariance_run(
    p: &GateParams,
    bits: &[bool],
    layers: usize,
    boundary: Boundary,
) -> Result<(CovarianceState, MagnetizationTrace)> {
    let l = bits.len();
    let seq = layer_rotations(p, l, boundary)?;
    let mut state = CovarianceState::from_bits(bits);
    let mut sz = Array2::<f64>::zeros((layers + 1, l));
    sz.row_mut(0).assign(&state.sz());
    for t in 1..=layers {
        for (r, idx) in &seq {
            state.rotate(r, idx);
        }
        state.layer_count += 1;
        sz.row_mut(t).assign(&state.sz());
    }
    let trace = MagnetizationTrace { sz, params: *p, l, boundary, initial: bits_descriptor(bits) };
    Ok((state, trace))
}

/// ⟨σᶻ_j⟩ per layer from exact covariance evolution.
pub fn covariance_evolve(
    p: &GateParams,
    bits: &[bool],
    layers: usize,
    boundary: Boundary,
) -> Result<MagnetizationTrace> {
    Ok(covariance_run(p, bits, layers, boundary)?.1)
}

/// The all-0 state with a single occupied seed at 1-based `site`.
pub fn seeded_bits(l: usize, site: usize) -> Result<Vec<bool>> {
    if site == 0 || site > l {
        return Err(Error::InvalidArgument(format!("seed site {site} outside 1..={l}")));
    }
    let mut bits = vec![false; l];
    bits[site - 1] = true;
    Ok(bits)
}

/// Sublattice magnetizations per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublatticeTrace {
    pub sz_even: Vec<f64>,
    pub sz_odd: Vec<f64>,
}

/// Vacuum-sector amplitudes on M₆ = (∅, |k,−k⟩, |k,π−k⟩, |−k,k−π⟩, |k−π,π−k⟩, |k,−k,k−π,π−k⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct SixBlockState {
    pub k: f64,
    pub v6: Array1<C64>,
}

impl SixBlockState {
    pub fn vacuum(k: f64) -> Self {
        let mut v6 = Array1::from_elem(6, ZERO);
        v6[0] = c(1.0, 0.0);
        Self { k, v6 }
    }

    pub fn norm_defect(&self) -> f64 {
        (self.v6.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs()
    }
}

/// Kernel K of Σ_pairs (c_a ± c_b)†(c_a ± c_b)/2 = Σ_ab K_ab c_a†c_b.
fn pair_kernel(n: usize, pairs: &[(usize, usize)], sign: f64) -> Array2<f64> {
    let mut k = Array2::<f64>::zeros((n, n));
    for &(a, b) in pairs {
        k[[a, a]] += 0.5;
        k[[b, b]] += 0.5;
        k[[a, b]] += 0.5 * sign;
        k[[b, a]] += 0.5 * sign;
    }
    k
}

/// Σ_ab K_ab c_a†c_b on the Fock space of `cs`.
fn kernel_operator(cs: &[Array2<C64>], k: &Array2<f64>) -> Array2<C64> {
    let dim = cs[0].nrows();
    let mut o = Array2::from_elem((dim, dim), ZERO);
    for a in 0..cs.len() {
        for b in 0..cs.len() {
            if k[[a, b]] != 0.0 {
                o = o + dagger(&cs[a]).dot(&cs[b]) * c(k[[a, b]], 0.0);
            }
        }
    }
    o
}

/// Sublattice density operators of a generic sector: (even, odd) on the 16-dim space.
fn generic_kernels() -> (Array2<f64>, Array2<f64>) {
    // modes: 0 = k, 1 = −k, 2 = k−π, 3 = π−k
    let pairs = [(0, 2), (1, 3)];
    (pair_kernel(4, &pairs, 1.0), pair_kernel(4, &pairs, -1.0))
}

fn generic_densities() -> (Array2<C64>, Array2<C64>) {
    let cs = fock::annihilators(4);
    let (ke, ko) = generic_kernels();
    (kernel_operator(&cs, &ke), kernel_operator(&cs, &ko))
}

/// The (even, odd) density matrices D restricted to M₆.
pub fn density_blocks() -> (Array2<C64>, Array2<C64>) {
    let (e, o) = generic_densities();
    let restrict = |m: &Array2<C64>| Array2::from_shape_fn((6, 6), |(i, j)| m[[M6[i], M6[j]]]);
    (restrict(&e), restrict(&o))
}

fn zero_sector_kernels() -> (Array2<f64>, Array2<f64>) {
    (pair_kernel(2, &[(0, 1)], 1.0), pair_kernel(2, &[(0, 1)], -1.0))
}

fn zero_sector_densities() -> (Array2<C64>, Array2<C64>) {
    let cs = fock::annihilators(2);
    let (ke, ko) = zero_sector_kernels();
    (kernel_operator(&cs, &ke), kernel_operator(&cs, &ko))
}

fn check_4l2(l: usize) -> Result<()> {
    if l < 6 || l % 4 != 2 {
        return Err(Error::InvalidArgument(format!("momentum grouping needs L = 4l+2 ≥ 6, got {l}")));
    }
    Ok(())
}

fn generic_momenta(l: usize) -> Vec<f64> {
    (1..=(l - 2) / 4).map(|j| 2.0 * std::f64::consts::PI * j as f64 / l as f64).collect()
}

fn expectation(psi: &Array1<C64>, op: &Array2<C64>) -> f64 {
    psi.iter().zip(op.dot(psi).iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Sublattice magnetizations of the all-0 quench from the momentum sectors: the vacuum of
/// each generic sector is evolved inside M₆ and contracted with the density blocks.
pub fn momentum_block_evolve_allzero(p: &GateParams, l: usize, layers: usize) -> Result<SublatticeTrace> {
    check_4l2(l)?;
    let sym = SymmetryBreaking::symmetric();
    let (de, dod) = density_blocks();
    let per_sector: Vec<(Vec<f64>, Vec<f64>)> = generic_momenta(l)
        .par_iter()
        .map(|&k| -> Result<(Vec<f64>, Vec<f64>)> {
            let u = spectral_ubw::sector_exponents(p, sym, k)?.unitary()?;
            let u6 = Array2::from_shape_fn((6, 6), |(i, j)| u[[M6[i], M6[j]]]);
            let mut st = SixBlockState::vacuum(k);
            let (mut ne, mut no) = (Vec::with_capacity(layers + 1), Vec::with_capacity(layers + 1));
            for _ in 0..=layers {
                ne.push(expectation(&st.v6, &de));
                no.push(expectation(&st.v6, &dod));
                st.v6 = u6.dot(&st.v6);
            }
            Ok((ne, no))
        })
        .collect::<Result<_>>()?;
    let u0 = spectral_ubw::special_unitary(p, sym, false)?;
    let (d0e, d0o) = zero_sector_densities();
    let mut psi = Array1::from_elem(4, ZERO);
    psi[0] = c(1.0, 0.0);
    let mut out = SublatticeTrace { sz_even: Vec::with_capacity(layers + 1), sz_odd: Vec::with_capacity(layers + 1) };
    for t in 0..=layers {
        let mut ne = expectation(&psi, &d0e);
        let mut no = expectation(&psi, &d0o);
        for (se, so) in &per_sector {
            ne += se[t];
            no += so[t];
        }
        out.sz_even.push(1.0 - 4.0 * ne / l as f64);
        out.sz_odd.push(1.0 - 4.0 * no / l as f64);
        psi = u0.dot(&psi);
    }
    Ok(out)
}

/// GGE data of one momentum sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorGGE {
    pub k: f64,
    /// Occupations ⟨B_i†B_i⟩ of the normalized Heisenberg eigen-operators B_i (U†B_iU = λ_iB_i),
    /// covering both the η and η† of every mode.
    pub nbar: Vec<f64>,
    /// Phases arg λ_i matching `nbar`.
    pub phases: Vec<f64>,
}

/// Conserved occupations and mode matrices of the all-0 quench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GGEData {
    pub sectors: Vec<SectorGGE>,
    /// Real orthogonal eigenvectors V^k (rows) of U_F^{k|N₄} for every generic k.
    pub eigvecs: Vec<(f64, Array2<f64>)>,
}

struct SectorAlgebra {
    /// c₁…c_n, c₁†…c_n†
    ops: Vec<Array2<C64>>,
    dim: usize,
}

impl SectorAlgebra {
    fn new(n: usize) -> Self {
        let cs = fock::annihilators(n);
        let mut ops = cs.clone();
        ops.extend(cs.iter().map(dagger));
        Self { ops, dim: 1 << n }
    }

    /// Hilbert–Schmidt coordinates w_p = Tr(A_p† X)/(dim/2) of a linear combination X.
    fn coordinates(&self, x: &Array2<C64>) -> Array1<C64> {
        let h = self.dim as f64 / 2.0;
        Array1::from_shape_fn(self.ops.len(), |q| {
            dagger(&self.ops[q]).dot(x).diag().sum() / h
        })
    }

    /// W with U†A_pU = Σ_q W_pq A_q.
    fn heisenberg(&self, u: &Array2<C64>) -> Array2<C64> {
        let ud = dagger(u);
        let m = self.ops.len();
        let mut w = Array2::from_elem((m, m), ZERO);
        for p in 0..m {
            let row = self.coordinates(&ud.dot(&self.ops[p]).dot(u));
            w.row_mut(p).assign(&row);
        }
        w
    }

    /// G_pq = ⟨A_p†A_q⟩.
    fn correlations(&self, psi: &Array1<C64>) -> Array2<C64> {
        let m = self.ops.len();
        let applied: Vec<Array1<C64>> = self.ops.iter().map(|a| a.dot(psi)).collect();
        Array2::from_shape_fn((m, m), |(p, q)| {
            applied[p].iter().zip(applied[q].iter()).map(|(a, b)| a.conj() * b).sum()
        })
    }
}

/// Eigen-operators B_i = Σ_p L_ip A_p of the Heisenberg map, rows normalized to unit
/// Hilbert–Schmidt norm, with eigenvalues.
fn eigen_operators(w: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    // U†B U = λ B with B = Σ_p l_p A_p requires lᵀW = λ lᵀ: left eigenvectors of W.
    let (lam, vr) = linalg::eig(&w.t().to_owned())?;
    let mut left = vr.t().to_owned();
    for mut row in left.rows_mut() {
        let n = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        row.mapv_inplace(|z| z / n);
    }
    Ok((lam, left))
}

fn dephased_average(
    alg: &SectorAlgebra,
    u: &Array2<C64>,
    psi: &Array1<C64>,
    kernels: &[&Array2<f64>],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let w = alg.heisenberg(u);
    let (lam, left) = eigen_operators(&w)?;
    let g = alg.correlations(psi);
    // ⟨B_i†B_j⟩ = Σ conj(L_ip) L_jq G_pq
    let gb = left.mapv(|z| z.conj()).dot(&g).dot(&left.t());
    let m = lam.len();
    let mut gd = gb.clone();
    for i in 0..m {
        for j in 0..m {
            if (lam[i].conj() * lam[j] - c(1.0, 0.0)).norm() > DEPHASE_TOL {
                gd[[i, j]] = ZERO;
            }
        }
    }
    let linv = linalg::inverse(&left)?;
    // back to A-coordinates: G̃ = L^{-*} Gd L^{-T}
    let g2 = linv.mapv(|z| z.conj()).dot(&gd).dot(&linv.t());
    let n = alg.ops.len() / 2;
    // ⟨Σ K_ab c_a†c_b⟩ = Σ K_ab G̃_ab since A_a = c_a
    let values = kernels
        .iter()
        .map(|k| (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| k[[a, b]] * g2[[a, b]].re).sum())
        .collect();
    let nbar = (0..m).map(|i| gb[[i, i]].re).collect();
    let phases = lam.iter().map(|z| z.arg()).collect();
    Ok((values, nbar, phases))
}

/// Real orthogonal eigenvectors (rows) of a complex-symmetric unitary block with distinct
/// eigenvalues, and the eigenvalues.
pub fn real_eigenvectors(block: &Array2<C64>) -> Result<(Array1<C64>, Array2<f64>)> {
    let (lam, v) = linalg::eig(block)?;
    let n = block.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let col = v.column(i);
        let (jmax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bj, bv), (j, z)| if z.norm() > bv { (j, z.norm()) } else { (bj, bv) });
        let ph = C64::from_polar(1.0, -col[jmax].arg());
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for j in 0..n {
            let z = col[j] * ph / norm;
            if z.im.abs() > 1e-8 {
                return Err(Error::Consistency(format!(
                    "eigenvector not real up to phase (imaginary part {:.3e})",
                    z.im
                )));
            }
            out[[i, j]] = z.re;
        }
    }
    Ok((lam, out))
}

/// Signed permutation P with U^{k|N₄′} = P·conj(U^{k|N₄})·Pᵀ in our basis.
pub fn partner_map() -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((4, 4));
    m[[0, 3]] = 1.0;
    m[[1, 2]] = 1.0;
    m[[2, 1]] = -1.0;
    m[[3, 0]] = -1.0;
    m
}

/// N₄ and N₄′ blocks of U_F^k.
pub fn n4_blocks(p: &GateParams, k: f64) -> Result<(Array2<C64>, Array2<C64>)> {
    let u = spectral_ubw::sector_exponents(p, SymmetryBreaking::symmetric(), k)?.unitary()?;
    Ok((
        Array2::from_shape_fn((4, 4), |(i, j)| u[[N4[i], N4[j]]]),
        Array2::from_shape_fn((4, 4), |(i, j)| u[[N4_PRIME[i], N4_PRIME[j]]]),
    ))
}

/// Equilibrium sublattice magnetizations of the all-0 quench: the time average of every
/// quadratic expectation with all coherences between non-degenerate eigen-operators removed.
pub fn gge_equilibrium(p: &GateParams, l: usize) -> Result<((f64, f64), GGEData)> {
    gge_after(p, l, 0)
}

/// As [`gge_equilibrium`] but built from the state after `layers` periods (the conserved
/// occupations must not depend on it).
pub fn gge_after(p: &GateParams, l: usize, layers: usize) -> Result<((f64, f64), GGEData)> {
    check_4l2(l)?;
    let sym = SymmetryBreaking::symmetric();
    let mut ks = vec![0.0];
    ks.extend(generic_momenta(l));
    let results: Vec<(f64, f64, SectorGGE, Option<(f64, Array2<f64>)>)> = ks
        .par_iter()
        .map(|&k| -> Result<_> {
            let (u, alg, (ke, ko)) = if k == 0.0 {
                (spectral_ubw::special_unitary(p, sym, false)?, SectorAlgebra::new(2), zero_sector_kernels())
            } else {
                (spectral_ubw::sector_exponents(p, sym, k)?.unitary()?, SectorAlgebra::new(4), generic_kernels())
            };
            let mut psi = Array1::from_elem(alg.dim, ZERO);
            psi[0] = c(1.0, 0.0);
            for _ in 0..layers {
                psi = u.dot(&psi);
            }
            let (vals, nbar, phases) = dephased_average(&alg, &u, &psi, &[&ke, &ko])?;
            let vecs = if k == 0.0 {
                None
            } else {
                let block = Array2::from_shape_fn((4, 4), |(i, j)| u[[N4[i], N4[j]]]);
                Some((k, real_eigenvectors(&block)?.1))
            };
            Ok((vals[0], vals[1], SectorGGE { k, nbar, phases }, vecs))
        })
        .collect::<Result<_>>()?;
    let (mut ne, mut no) = (0.0, 0.0);
    let mut data = GGEData { sectors: Vec::new(), eigvecs: Vec::new() };
    for (e, o, s, v) in results {
        ne += e;
        no += o;
        data.sectors.push(s);
        if let Some(v) = v {
            data.eigvecs.push(v);
        }
    }
    let lf = l as f64;
    Ok(((1.0 - 4.0 * ne / lf, 1.0 - 4.0 * no / lf), data))
}

/// Background against which a seeded run is compared.
#[derive(Debug, Clone, Copy)]
pub enum Background<'a> {
    /// A uniform value (e.g. a GGE magnetization).
    Constant(f64),
    /// The unseeded run, layer by layer.
    Trace(&'a MagnetizationTrace),
}

impl Background<'_> {
    fn at(&self, t: usize, j: usize) -> f64 {
        match self {
            Background::Constant(v) => *v,
            Background::Trace(tr) => tr.sz[[t, j]],
        }
    }
}

/// Outcome of the ballistic-front fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    /// Mean of the two front-edge speeds, in sites per layer.
    pub v_d: f64,
    pub left_edge_speed: f64,
    pub right_edge_speed: f64,
    /// Speed of the site of maximal deviation (reported, not used for v_d).
    pub peak_speed: f64,
    /// RMS residual of the edge fits, in sites.
    pub residual: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Signed offset j − j₀ (0-based sites), wrapped into (−L/2, L/2] for PBC.
fn offset(j: usize, j0: usize, l: usize, periodic: bool) -> f64 {
    let d = j as i64 - j0 as i64;
    if !periodic {
        return d as f64;
    }
    let l = l as i64;
    let mut w = d.rem_euclid(l);
    if w > l / 2 {
        w -= l;
    }
    w as f64
}

/// Drift velocity of a single seed at 1-based `seed`. For every layer in [0.2T, 0.8T] the
/// front is the set of sites whose deviation from the background exceeds 10% of that layer's
/// maximum; v_d is the mean of the fitted speeds of its left and right edges.
pub fn drift_velocity(trace: &MagnetizationTrace, background: Background, seed: usize) -> Result<DriftEstimate> {
    let t_total = trace.layers();
    if t_total < 40 {
        return Err(Error::InvalidArgument(format!("drift fit needs ≥ 40 layers, got {t_total}")));
    }
    if seed == 0 || seed > trace.l {
        return Err(Error::InvalidArgument(format!("seed site {seed} outside 1..={}", trace.l)));
    }
    let j0 = seed - 1;
    let periodic = trace.boundary == Boundary::Pbc;
    let (t0, t1) = ((0.2 * t_total as f64).ceil() as usize, (0.8 * t_total as f64).floor() as usize);
    let (mut ts, mut lo, mut hi, mut pk) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in t0..=t1 {
        let dev: Vec<f64> = (0..trace.l).map(|j| (trace.sz[[t, j]] - background.at(t, j)).abs()).collect();
        let (jmax, dmax) = dev.iter().enumerate().fold((0, 0.0), |(bj, bv), (j, &v)| if v > bv { (j, v) } else { (bj, bv) });
        if dmax < SIGNAL_FLOOR {
            continue;
        }
        let front: Vec<f64> = dev
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > FRONT_THRESHOLD * dmax)
            .map(|(j, _)| offset(j, j0, trace.l, periodic))
            .collect();
        ts.push(t as f64);
        lo.push(front.iter().cloned().fold(f64::INFINITY, f64::min));
        hi.push(front.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        pk.push(offset(jmax, j0, trace.l, periodic));
    }
    if ts.len() < 5 {
        return Err(Error::InvalidArgument("no discernible front: seeded run does not depart from the background".into()));
    }
    let (vl, _, rl) = linear_fit(&ts, &lo);
    let (vr, _, rr) = linear_fit(&ts, &hi);
    let (vp, _, _) = linear_fit(&ts, &pk);
    let residual = rl.max(rr);
    if residual > 3.0 {
        return Err(Error::InvalidArgument(format!("no discernible front: edge-fit residual {residual:.2} sites")));
    }
    Ok(DriftEstimate { v_d: 0.5 * (vl + vr), left_edge_speed: vl, right_edge_speed: vr, peak_speed: vp, residual })
}

/// Largest deviation from the background outside the cone |j − j₀| ≤ 2t + buffer.
pub fn light_cone_violation(trace: &MagnetizationTrace, background: Background, seed: usize, buffer: usize) -> f64 {
    let j0 = seed - 1;
    let periodic = trace.boundary == Boundary::Pbc;
    let mut worst = 0.0f64;
    for t in 0..=trace.layers() {
        let reach = (2 * t + buffer) as f64;
        for j in 0..trace.l {
            if offset(j, j0, trace.l, periodic).abs() > reach {
                worst = worst.max((trace.sz[[t, j]] - background.at(t, j)).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_dense::{basis_state, evolve_state_sz};
    use proptest::prelude::*;

    fn p(a: f64, g: f64, t: f64) -> GateParams {
        GateParams::new(a, g, t).unwrap()
    }

    fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn layer_zero_is_initial_state() {
        let bits = [true, false, false, true, true, false];
        let tr = covariance_evolve(&p(1.0, 0.3, 0.7), &bits, 0, Boundary::Pbc).unwrap();
        for (j, &b) in bits.iter().enumerate() {
            assert_eq!(tr.sz[[0, j]], if b { -1.0 } else { 1.0 });
        }
    }

    #[test]
    fn covariance_matches_dense() {
        for &(a, g, t) in &[(1.0, 0.0, 0.5), (1.0, 1.0, 0.5), (0.7, -0.8, 1.3)] {
            for bits in [vec![false; 10], {
                let mut b = vec![false; 10];
                b[3] = true;
                b[6] = true;
                b
            }] {
                for bc in [Boundary::Pbc, Boundary::Obc] {
                    let pp = p(a, g, t);
                    let cov = covariance_evolve(&pp, &bits, 20, bc).unwrap();
                    let dense = evolve_state_sz(&pp, 10, bc, &basis_state(&bits), 20).unwrap();
                    assert!(max_diff(&cov.sz, &dense) < 1e-9, "{bc:?} ({a},{g},{t})");
                }
            }
        }
    }

    #[test]
    fn momentum_route_matches() {
        for &(a, g, t) in &[(1.0, 0.0, 0.5), (1.0, 1.0, 0.5), (0.7, -0.8, 1.3)] {
            let pp = p(a, g, t);
            let mom = momentum_block_evolve_allzero(&pp, 10, 20).unwrap();
            let cov = covariance_evolve(&pp, &[false; 10], 20, Boundary::Pbc).unwrap();
            for tt in 0..=20 {
                assert!((mom.sz_even[tt] - cov.sz[[tt, 1]]).abs() < 1e-9);
                assert!((mom.sz_odd[tt] - cov.sz[[tt, 0]]).abs() < 1e-9);
            }
            if g == 0.0 {
                for tt in 0..=20 {
                    assert!((mom.sz_even[tt] - mom.sz_odd[tt]).abs() < 1e-12);
                }
            }
            assert_eq!(mom.sz_even[0], 1.0);
        }
        assert!(momentum_block_evolve_allzero(&p(1.0, 0.0, 0.5), 8, 1).is_err());
    }

    #[test]
    fn density_block_structure() {
        let (de, dod) = density_blocks();
        let diag = [0.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        for i in 0..6 {
            assert!((de[[i, i]].re - diag[i]).abs() < 1e-14);
            assert!((dod[[i, i]].re - diag[i]).abs() < 1e-14);
            for j in 0..6 {
                if i != j {
                    assert!((de[[i, j]] + dod[[i, j]]).norm() < 1e-14);
                    assert!(de[[i, j]].norm() == 0.0 || (de[[i, j]].norm() - 0.5).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn trivial_gge() {
        let ((e, o), _) = gge_equilibrium(&p(1.0, 0.0, 0.0), 10).unwrap();
        assert!((e - 1.0).abs() < 1e-12 && (o - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupations_conserved() {
        let pp = p(1.0, 1.0, 0.5);
        let (_, d0) = gge_after(&pp, 14, 0).unwrap();
        let (_, d7) = gge_after(&pp, 14, 7).unwrap();
        for (a, b) in d0.sectors.iter().zip(&d7.sectors) {
            for (x, y) in a.nbar.iter().zip(&b.nbar) {
                assert!((x - y).abs() < 1e-10);
                assert!(*x > -1e-12 && *x < 1.0 + 1e-12);
            }
        }
        for (_, v) in &d0.eigvecs {
            let vtv = v.t().dot(v);
            assert!((vtv - Array2::<f64>::eye(4)).iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn mode_matrices() {
        let pp = p(0.9, 0.6, 0.8);
        let (a, b) = n4_blocks(&pp, 0.5).unwrap();
        assert!(linalg::diff_norm(&a, &a.t().to_owned()) < 1e-13);
        let (lam, v) = real_eigenvectors(&a).unwrap();
        // Vᵀ Λ V reproduces the block
        let vc = v.mapv(|x| c(x, 0.0));
        let mut l = Array2::from_elem((4, 4), ZERO);
        for i in 0..4 {
            l[[i, i]] = lam[i];
        }
        assert!(linalg::diff_norm(&vc.t().dot(&l).dot(&vc), &a) < 1e-10);
        let pm = partner_map().mapv(|x| c(x, 0.0));
        assert!(linalg::diff_norm(&pm.dot(&a.mapv(|z| z.conj())).dot(&pm.t()), &b) < 1e-12);
    }

    #[test]
    fn gge_parity_dependence() {
        let ((e, o), _) = gge_equilibrium(&p(1.0, 1.0, 0.5), 22).unwrap();
        assert!((e - o).abs() > 1e-3);
        let ((e, o), _) = gge_equilibrium(&p(1.0, 0.0, 0.5), 22).unwrap();
        assert!((e - o).abs() < 1e-12);
    }

    #[test]
    fn purity_over_many_layers() {
        let mut bits = vec![false; 12];
        bits[4] = true;
        let (st, tr) = covariance_run(&p(0.8, 0.7, 1.1), &bits, 1000, Boundary::Pbc).unwrap();
        assert!(st.purity_residual() < 1e-8 && st.antisymmetry_residual() < 1e-8);
        assert!(tr.sz.iter().all(|x| x.abs() <= 1.0 + 1e-10));
        let (st, _) = covariance_run(&p(0.8, 0.7, 1.1), &bits, 1000, Boundary::Obc).unwrap();
        assert!(st.purity_residual() < 1e-8);
    }

    #[test]
    fn parity_is_conserved() {
        let bits = [true, false, true, true, false, false, false, true];
        let st0 = CovarianceState::from_bits(&bits);
        let (st, _) = covariance_run(&p(1.2, 0.4, 0.9), &bits, 37, Boundary::Pbc).unwrap();
        assert!((st0.parity() - st.parity()).abs() < 1e-10);
        assert!((st0.parity().abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_front_short_chain() {
        let pp = p(1.0, 10.0, 1.0);
        let l = 160;
        let bg = covariance_evolve(&pp, &vec![false; l], 40, Boundary::Pbc).unwrap();
        let tr = covariance_evolve(&pp, &seeded_bits(l, 80).unwrap(), 40, Boundary::Pbc).unwrap();
        let v = drift_velocity(&tr, Background::Trace(&bg), 80).unwrap();
        assert!((v.v_d.abs() - 2.0).abs() < 0.1, "{v:?}");
        assert!(light_cone_violation(&tr, Background::Trace(&bg), 80, 4) < 1e-8);
        assert!(drift_velocity(&bg, Background::Trace(&bg), 80).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn covariance_stays_physical(a in 0.3f64..2.0, g in -2.0f64..2.0, t in -2.0f64..2.0,
                                     mask in 0u32..(1 << 8), layers in 0usize..30) {
            let bits: Vec<bool> = (0..8).map(|j| mask & (1 << j) != 0).collect();
            let (st, tr) = covariance_run(&p(a, g, t), &bits, layers, Boundary::Pbc).unwrap();
            prop_assert!(st.antisymmetry_residual() < 1e-12);
            prop_assert!(st.purity_residual() < 1e-10);
            prop_assert!(tr.sz.iter().all(|x| x.abs() <= 1.0 + 1e-10));
        }
    }
}
