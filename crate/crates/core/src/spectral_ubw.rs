//! Momentum-sector spectrum of the periodic brick-wall unitary U_F = U_o·U_e.
//!
//! The two-site unit cell folds the Brillouin zone to (−π/2, π/2]. A generic momentum
//! 0 < k < π/2 couples the modes (k, −k, k−π, π−k) — mode 1 is the most significant bit of
//! a 16-dimensional Fock index — and each layer acts there as exp(iE^k_{o,e}). The sectors
//! k = 0 (modes 0, π) and k = π/2 (modes π/2, −π/2) are four-dimensional.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock;
use crate::gate_core::{exponent_coefficients, ExponentCoefficients, GateParams};
use crate::linalg::{self, c, dagger, expi_hermitian, ONE, ZERO};

/// One-particle block N₄ (odd parity): |k⟩, |k−π⟩, |k,−k,k−π⟩, |k,k−π,π−k⟩.
pub const N4: [usize; 4] = [8, 2, 14, 11];
/// Partner block N₄′: |−k⟩, |π−k⟩, |k,−k,π−k⟩, |−k,k−π,π−k⟩.
pub const N4_PRIME: [usize; 4] = [4, 1, 13, 7];
/// Even block M₆ containing the vacuum.
pub const M6: [usize; 6] = [0, 12, 9, 6, 3, 15];
/// Inert states |k, k−π⟩ and |−k, π−k⟩.
pub const M1: usize = 10;
pub const M1_PRIME: usize = 5;

const ROOT_TOL: f64 = 1e-10;
const RECONSTRUCT_TOL: f64 = 1e-8;

/// Scale t_a on a₁₂; 1 is the fermionic-symmetric point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryBreaking {
    pub t_a: f64,
}

impl SymmetryBreaking {
    pub fn new(t_a: f64) -> Result<Self> {
        if !(t_a.is_finite() && t_a > 0.0) {
            return Err(Error::Domain(format!("t_a must be positive and finite, got {t_a}")));
        }
        Ok(Self { t_a })
    }

    pub fn symmetric() -> Self {
        Self { t_a: 1.0 }
    }

    pub fn is_symmetric(&self) -> bool {
        self.t_a == 1.0
    }
}

impl Default for SymmetryBreaking {
    fn default() -> Self {
        Self::symmetric()
    }
}

fn coefficients(p: &GateParams, t_a: SymmetryBreaking) -> ExponentCoefficients {
    let co = exponent_coefficients(p);
    if t_a.is_symmetric() {
        co
    } else {
        co.with_a12_scale(t_a.t_a)
    }
}

fn check_generic(k: f64) -> Result<()> {
    if !(k > 0.0 && k < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "generic sector needs 0 < k < π/2, got {k}; use the special sectors at 0 and π/2"
        )));
    }
    Ok(())
}

/// The odd- and even-layer exponents of a generic sector.
#[derive(Debug, Clone)]
pub struct SectorExponents {
    pub k: f64,
    pub e_odd: Array2<C64>,
    pub e_even: Array2<C64>,
}

impl SectorExponents {
    /// Block labels with their Fock indices.
    pub fn blocks() -> [(&'static str, Vec<usize>); 5] {
        [
            ("M1", vec![M1]),
            ("M1'", vec![M1_PRIME]),
            ("M6", M6.to_vec()),
            ("N4", N4.to_vec()),
            ("N4'", N4_PRIME.to_vec()),
        ]
    }

    /// Largest coupling between different blocks in either exponent.
    pub fn block_residual(&self) -> f64 {
        let mut label = [0usize; 16];
        for (b, (_, idx)) in Self::blocks().iter().enumerate() {
            for &i in idx {
                label[i] = b;
            }
        }
        let mut worst = 0.0f64;
        for e in [&self.e_odd, &self.e_even] {
            for i in 0..16 {
                for j in 0..16 {
                    if label[i] != label[j] {
                        worst = worst.max(e[[i, j]].norm());
                    }
                }
            }
        }
        worst
    }

    /// U_F^k = exp(iE_o)·exp(iE_e).
    pub fn unitary(&self) -> Result<Array2<C64>> {
        Ok(expi_hermitian(&self.e_odd)?.dot(&expi_hermitian(&self.e_even)?))
    }
}

fn number(cm: &Array2<C64>) -> Array2<C64> {
    dagger(cm).dot(cm)
}

/// E^k for one layer; `odd` selects the sign pattern of the odd layer.
fn generic_exponent(co: &ExponentCoefficients, k: f64, odd: bool) -> Array2<C64> {
    let s = if odd { 1.0 } else { -1.0 };
    let cs = fock::annihilators(4);
    let (ck, cmk, ckp, cpk) = (&cs[0], &cs[1], &cs[2], &cs[3]);
    let d = dagger;
    let re = |x: f64| c(x, 0.0);
    let im = |x: f64| c(0.0, x);
    let (a11, a12, phi, b12) = (co.a11, co.a12, co.phi, co.b12);

    let total = number(ck) + number(cmk) + number(ckp) + number(cpk);
    let mut e = (total - Array2::<C64>::eye(16) * re(2.0)) * re(-a11);
    e = e + (number(ck) - number(ckp)) * re(a12 * (k - phi).cos());
    e = e + (number(cmk) - number(cpk)) * re(a12 * (k + phi).cos());
    e = e + (d(ck).dot(ckp) - d(ckp).dot(ck)) * im(s * a12 * (k - phi).sin());
    e = e + (d(cpk).dot(cmk) - d(cmk).dot(cpk)) * im(s * a12 * (k + phi).sin());
    let pair_cos = d(ck).dot(&d(cpk)) - cpk.dot(ck) + d(cmk).dot(&d(ckp)) - ckp.dot(cmk);
    e = e + pair_cos * im(-s * b12 * k.cos());
    let pair_sin = d(ck).dot(&d(cmk)) + cmk.dot(ck) + d(cpk).dot(&d(ckp)) + ckp.dot(cpk);
    e + pair_sin * re(b12 * k.sin())
}

/// Both exponents of the sector with momentum k ∈ (0, π/2).
pub fn sector_exponents(p: &GateParams, t_a: SymmetryBreaking, k: f64) -> Result<SectorExponents> {
    check_generic(k)?;
    let co = coefficients(p, t_a);
    Ok(SectorExponents {
        k,
        e_odd: generic_exponent(&co, k, true),
        e_even: generic_exponent(&co, k, false),
    })
}

/// The four-dimensional sectors and their even (M) / odd (N) halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecialSector {
    K0M,
    K0N,
    Kpi2M,
    Kpi2N,
}

impl std::str::FromStr for SpecialSector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "K0_M" | "K0M" => Ok(Self::K0M),
            "K0_N" | "K0N" => Ok(Self::K0N),
            "KPI2_M" | "KPI2M" => Ok(Self::Kpi2M),
            "KPI2_N" | "KPI2N" => Ok(Self::Kpi2N),
            _ => Err(Error::InvalidArgument(format!("unknown special sector '{s}'"))),
        }
    }
}

impl SpecialSector {
    pub fn is_half_pi(self) -> bool {
        matches!(self, Self::Kpi2M | Self::Kpi2N)
    }

    /// Fock indices of the two-dimensional block (mode 1 = 0 or π/2 is the high bit).
    pub fn indices(self) -> [usize; 2] {
        match self {
            Self::K0M | Self::Kpi2M => [0, 3],
            Self::K0N => [1, 2],
            Self::Kpi2N => [2, 1],
        }
    }
}

/// Exponents (odd, even) of the k = 0 sector on modes (0, π), or of the k = π/2 sector on
/// modes (π/2, −π/2).
pub fn special_exponents(
    p: &GateParams,
    t_a: SymmetryBreaking,
    half_pi: bool,
) -> (Array2<C64>, Array2<C64>) {
    let co = coefficients(p, t_a);
    let layer = |odd: bool| {
        let s = if odd { 1.0 } else { -1.0 };
        if half_pi {
            let mut e = Array2::from_elem((4, 4), ZERO);
            for (i, &a) in [0usize, 3].iter().enumerate() {
                for (j, &b) in [0usize, 3].iter().enumerate() {
                    e[[a, b]] = c([[co.a11, co.b12], [co.b12, -co.a11]][i][j], 0.0);
                }
            }
            // |π/2⟩ = index 2, |−π/2⟩ = index 1
            e[[2, 2]] = c(co.a12 * co.phi.sin(), 0.0);
            e[[1, 1]] = c(-co.a12 * co.phi.sin(), 0.0);
            e[[2, 1]] = c(0.0, s * co.a12 * co.phi.cos());
            e[[1, 2]] = c(0.0, -s * co.a12 * co.phi.cos());
            e
        } else {
            let cs = fock::annihilators(2);
            let (c0, cp) = (&cs[0], &cs[1]);
            let d = dagger;
            let n = number(c0) + number(cp) - Array2::<C64>::eye(4);
            n * c(-co.a11, 0.0)
                + (d(c0).dot(&d(cp)) - cp.dot(c0)) * c(0.0, s * co.b12)
                + (number(c0) - number(cp)) * c(co.a12 * co.phi.cos(), 0.0)
                + (d(c0).dot(cp) - d(cp).dot(c0)) * c(0.0, -s * co.a12 * co.phi.sin())
        }
    };
    (layer(true), layer(false))
}

/// U_F restricted to the k = 0 or k = π/2 sector.
pub fn special_unitary(p: &GateParams, t_a: SymmetryBreaking, half_pi: bool) -> Result<Array2<C64>> {
    let (eo, ee) = special_exponents(p, t_a, half_pi);
    Ok(expi_hermitian(&eo)?.dot(&expi_hermitian(&ee)?))
}

fn big_d(p: &GateParams) -> f64 {
    let (a, g, t) = (p.alpha, p.gamma, p.theta);
    2.0 * a * a * (g.cosh() + t.cosh()) + t.sinh().powi(2)
}

/// Linear coefficient τ of the special-sector polynomial x² − τx + 1 (τ = 2cos(ε/2)).
pub fn charpoly_special(p: &GateParams, sector: SpecialSector) -> f64 {
    let (a, g, t) = (p.alpha, p.gamma, p.theta);
    let d = big_d(p);
    let a2 = a * a;
    match sector {
        SpecialSector::K0M | SpecialSector::K0N => {
            2.0 * (2.0 * a2 * (g.cosh() + t.cosh()) - t.sinh().powi(2)) / d
        }
        SpecialSector::Kpi2N => 2.0 - 8.0 * a2 * (g.cosh() - 1.0) / d,
        SpecialSector::Kpi2M => -2.0 + 8.0 * a2 * (g.cosh() + 1.0) / d,
    }
}

/// Numerically assembled trace of a special block (any t_a).
pub fn special_trace(p: &GateParams, t_a: SymmetryBreaking, sector: SpecialSector) -> Result<C64> {
    let u = special_unitary(p, t_a, sector.is_half_pi())?;
    let [i, j] = sector.indices();
    Ok(u[[i, i]] + u[[j, j]])
}

/// Phase ε ≥ 0 of a special block from τ = 2cos(ε/2).
pub fn special_quasi_energy(tau: f64) -> f64 {
    2.0 * (tau / 2.0).clamp(-1.0, 1.0).acos()
}

/// The two one-particle energies (ε₁ ≤ ε₂) of the k = 0 or k = π/2 sector. The M block
/// carries e^{±i(ε₁+ε₂)/2} and the N block e^{±i(ε₁−ε₂)/2}.
pub fn special_one_particle(p: &GateParams, t_a: SymmetryBreaking, half_pi: bool) -> Result<[f64; 2]> {
    let (m, n) = if half_pi {
        (SpecialSector::Kpi2M, SpecialSector::Kpi2N)
    } else {
        (SpecialSector::K0M, SpecialSector::K0N)
    };
    let s = special_quasi_energy(special_trace(p, t_a, m)?.re);
    let d = special_quasi_energy(special_trace(p, t_a, n)?.re);
    let (e1, e2) = ((s - d).abs() / 2.0, (s + d) / 2.0);
    Ok([e1.min(e2), e1.max(e2)])
}

/// Coefficients of the N₄ polynomial x⁴ − a₄x³ + b₄x² − a₄*x + 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharPolyCoeffs {
    pub a4: C64,
    pub b4: f64,
    pub k: f64,
}

impl CharPolyCoeffs {
    /// Coefficients from the leading term down.
    pub fn polynomial(&self) -> [C64; 5] {
        [ONE, -self.a4, c(self.b4, 0.0), -self.a4.conj(), ONE]
    }

    /// The N₄′ polynomial (conjugate coefficients).
    pub fn conjugate(&self) -> Self {
        Self { a4: self.a4.conj(), ..*self }
    }

    pub fn roots(&self) -> Result<Vec<C64>> {
        linalg::poly_roots(&self.polynomial())
    }

    /// P(1) = 2 − 2Re a₄ + b₄ = 16 ∏ sin(εᵢ/2); it vanishes where a branch crosses zero.
    pub fn value_at_one(&self) -> f64 {
        2.0 - 2.0 * self.a4.re + self.b4
    }
}

/// Closed-form a₄, b₄ for generic parameters.
pub fn charpoly_closed_form(p: &GateParams, k: f64) -> CharPolyCoeffs {
    let (a, g, t) = (p.alpha, p.gamma, p.theta);
    let (a2, a4) = (a * a, a.powi(4));
    let (chg, cht, shg, sht) = (g.cosh(), t.cosh(), g.sinh(), t.sinh());
    let sh2 = sht * sht;
    let d = big_d(p);
    let den = 2.0 * d * d;
    let a4_re = 8.0 * a2 * (8.0 * a2 * chg * cht + 8.0 * a2 + cht - (3.0 * t).cosh())
        + (16.0 * a4 * ((2.0 * g).cosh() + (2.0 * t).cosh()) - 32.0 * a4 - 32.0 * a2 * chg * sh2
            - 4.0 * (2.0 * t).cosh()
            + (4.0 * t).cosh()
            + 3.0)
            * (2.0 * k).cos();
    let a4_im = -64.0 * a2 * shg * sh2 * (2.0 * k).sin();
    let b4 = 16.0 * a4 * ((2.0 * g).cosh() + (2.0 * t).cosh()) + 160.0 * a4 - 96.0 * a2 * chg * sh2
        - 4.0 * (2.0 * t).cosh()
        + (4.0 * t).cosh()
        + 3.0
        + 64.0 * a2 * (-2.0 * a2 + cht * (2.0 * a2 * chg - sh2)) * (2.0 * k).cos()
        + (4.0 * a2 * (chg - cht) + 2.0 * sh2).powi(2) * (4.0 * k).cos();
    CharPolyCoeffs { a4: c(a4_re / den, a4_im / den), b4: b4 / den, k }
}

/// Equal-mass (γ = 0) reduction; a₄ is real.
pub fn charpoly_equal_mass(alpha: f64, theta: f64, k: f64) -> CharPolyCoeffs {
    let (a2, a4) = (alpha * alpha, alpha.powi(4));
    let t = theta;
    let (cht, ch2t, ch4t) = (t.cosh(), (2.0 * t).cosh(), (4.0 * t).cosh());
    let chh = (t / 2.0).cosh();
    let th2 = (t / 2.0).tanh().powi(2);
    let den = (-1.0 + 2.0 * a2 + cht).powi(2);
    let a4c = -(4.0 * a2 / (chh * chh) * (1.0 - 4.0 * a2 - 2.0 * cht + ch2t)
        - 2.0 * th2 * (-1.0 - 8.0 * a2 + 8.0 * a4 + ch2t) * (2.0 * k).cos())
        / den;
    let b4 = (1.0 / (8.0 * chh.powi(4))
        * (3.0 + 48.0 * a2 + 176.0 * a4 + 4.0 * (-1.0 + 4.0 * a2 * (-3.0 + a2)) * ch2t + ch4t)
        - 8.0 * a2 * (t / 2.0).sinh().powi(2) / chh.powi(4)
            * (1.0 - 4.0 * a2 + 2.0 * cht + ch2t)
            * (2.0 * k).cos()
        + 2.0 * th2 * th2 * (1.0 - 2.0 * a2 + cht).powi(2) * (4.0 * k).cos())
        / den;
    CharPolyCoeffs { a4: c(a4c, 0.0), b4, k }
}

/// The γ = θ reduction.
pub fn charpoly_gamma_eq_theta(alpha: f64, theta: f64, k: f64) -> CharPolyCoeffs {
    let (a2, a4) = (alpha * alpha, alpha.powi(4));
    let t = theta;
    let (cht, sht) = (t.cosh(), t.sinh());
    let (ch2t, ch3t, ch4t) = ((2.0 * t).cosh(), (3.0 * t).cosh(), (4.0 * t).cosh());
    let den = (4.0 * a2 * cht + sht * sht).powi(2);
    let re = 4.0 * a2 * (cht + 4.0 * a2 * (3.0 + ch2t) - ch3t)
        + 2.0 * sht * sht * (-1.0 + 16.0 * a4 - 8.0 * a2 * cht + ch2t) * (2.0 * k).cos();
    let im = -32.0 * a2 * sht.powi(3) * (2.0 * k).sin();
    let b4 = 0.5
        * (3.0 + 160.0 * a4 - 4.0 * ch2t + 8.0 * a2 * (3.0 * cht + 4.0 * a2 * ch2t - 3.0 * ch3t)
            + ch4t
            - 64.0 * a2 * (-2.0 * a2 + cht) * sht * sht * (2.0 * k).cos()
            + 4.0 * sht.powi(4) * (4.0 * k).cos())
        / den;
    CharPolyCoeffs { a4: c(re / den, im / den), b4, k }
}

/// a₄, b₄ from the N₄ block of the assembled U_F^k.
pub fn charpoly_numeric(p: &GateParams, t_a: SymmetryBreaking, k: f64) -> Result<CharPolyCoeffs> {
    let u = sector_exponents(p, t_a, k)?.unitary()?;
    let block = Array2::from_shape_fn((4, 4), |(i, j)| u[[N4[i], N4[j]]]);
    let q = linalg::charpoly(&block);
    let defect = (q[3] - q[1].conj()).norm().max((q[4] - ONE).norm()).max(q[2].im.abs());
    if defect > 1e-9 {
        return Err(Error::Consistency(format!(
            "N4 polynomial is not self-inversive (defect {defect:.3e})"
        )));
    }
    Ok(CharPolyCoeffs { a4: -q[1], b4: q[2].re, k })
}

/// a₄, b₄ at momentum k: closed forms at the symmetric point, the N₄ block otherwise.
pub fn charpoly_general(p: &GateParams, t_a: SymmetryBreaking, k: f64) -> Result<CharPolyCoeffs> {
    check_generic(k)?;
    if !t_a.is_symmetric() {
        return charpoly_numeric(p, t_a, k);
    }
    if p.gamma == 0.0 {
        Ok(charpoly_equal_mass(p.alpha, p.theta, k))
    } else if p.gamma == p.theta {
        Ok(charpoly_gamma_eq_theta(p.alpha, p.theta, k))
    } else {
        Ok(charpoly_closed_form(p, k))
    }
}

/// The four one-particle quasi-energies of a generic sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiEnergies {
    pub k: f64,
    /// ε₁…ε₄ in (−π, π], with e^{iεᵢ} the N₄ eigenvalues and Σεᵢ ≡ 0 (mod 2π).
    pub eps: [f64; 4],
    /// Roots of the resolvent cubic: cos(ε₁+ε₂), cos(ε₁+ε₃), cos(ε₂+ε₃).
    pub cij: [f64; 3],
    /// True when the cubic route was inconsistent and the quartic roots were used directly.
    pub fallback: bool,
}

impl QuasiEnergies {
    /// Elementary symmetric functions of (c₁₂, c₁₃, c₂₃).
    pub fn cij_symmetric(&self) -> [f64; 3] {
        let [x, y, z] = self.cij;
        [x + y + z, x * y + x * z + y * z, x * y * z]
    }

    /// min |εᵢ|.
    pub fn gap(&self) -> f64 {
        self.eps.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()))
    }
}

/// Targets of [`QuasiEnergies::cij_symmetric`]: (b₄/2, (|a₄|²−4)/4, (a₄²+a₄*²−4b₄)/8).
pub fn resolvent_targets(cp: &CharPolyCoeffs) -> [f64; 3] {
    let a = cp.a4;
    [
        cp.b4 / 2.0,
        (a.norm_sqr() - 4.0) / 4.0,
        ((a * a + a.conj() * a.conj()).re - 4.0 * cp.b4) / 8.0,
    ]
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

fn resolvent_roots(cp: &CharPolyCoeffs) -> Result<[f64; 3]> {
    let [e1, e2, e3] = resolvent_targets(cp);
    let r = linalg::poly_roots(&[ONE, c(-e1, 0.0), c(e2, 0.0), c(-e3, 0.0)])?;
    Ok([r[0].re, r[1].re, r[2].re])
}

/// Rebuild (ε₁, ε₂, ε₃, ε₄) from the pair cosines, choosing labels and signs so that e^{iεᵢ}
/// reproduces the quartic roots.
fn reconstruct(cij: &[f64; 3], roots: &[C64]) -> Option<([f64; 4], f64)> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut best: Option<([f64; 4], f64)> = None;
    for perm in PERMS {
        let base = [
            cij[perm[0]].clamp(-1.0, 1.0).acos(),
            cij[perm[1]].clamp(-1.0, 1.0).acos(),
            cij[perm[2]].clamp(-1.0, 1.0).acos(),
        ];
        for signs in 0..8u32 {
            let sg = |i: u32| if signs & (1 << i) != 0 { -1.0 } else { 1.0 };
            let (s12, s13, s23) = (sg(0) * base[0], sg(1) * base[1], sg(2) * base[2]);
            let e1 = (s12 + s13 - s23) / 2.0;
            let e2 = (s12 - s13 + s23) / 2.0;
            let e3 = (-s12 + s13 + s23) / 2.0;
            for shift in [0.0, PI] {
                let eps = [wrap(e1 + shift), wrap(e2 + shift), wrap(e3 + shift), wrap(-e1 - e2 - e3 - 3.0 * shift)];
                let z: Vec<C64> = eps.iter().map(|&e| C64::from_polar(1.0, e)).collect();
                let dist = linalg::unit_circle_multiset_distance(&z, roots);
                if best.map_or(true, |(_, b)| dist < b) {
                    best = Some((eps, dist));
                }
            }
        }
    }
    best
}

fn sort_by_magnitude(eps: &mut [f64; 4]) {
    eps.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap().then(a.partial_cmp(b).unwrap()));
}

/// Quasi-energies at momentum k ∈ (0, π/2), ordered by |ε|.
pub fn quasi_energies(p: &GateParams, t_a: SymmetryBreaking, k: f64) -> Result<QuasiEnergies> {
    let cp = charpoly_general(p, t_a, k)?;
    let off_circle = |roots: &[C64]| roots.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0f64, f64::max);
    let mut roots = cp.roots()?;
    // Near-degenerate roots (e.g. θ = 0) lose half their digits in the companion matrix;
    // the eigenvalues of the unitary block itself stay accurate.
    if off_circle(&roots) > ROOT_TOL {
        roots = n4_eigenvalues(p, t_a, k)?;
        let d = off_circle(&roots);
        if d > ROOT_TOL {
            return Err(Error::Consistency(format!("sector eigenvalue off the unit circle by {d:.3e}")));
        }
    }
    let direct = || {
        let mut eps = [0.0; 4];
        for (e, z) in eps.iter_mut().zip(&roots) {
            *e = z.arg();
        }
        eps
    };
    let (mut eps, cij, fallback) = match resolvent_roots(&cp) {
        Ok(cij) => match reconstruct(&cij, &roots) {
            Some((eps, d)) if d < RECONSTRUCT_TOL => (eps, cij, false),
            _ => (direct(), pair_cosines(&direct()), true),
        },
        Err(_) => (direct(), pair_cosines(&direct()), true),
    };
    sort_by_magnitude(&mut eps);
    Ok(QuasiEnergies { k, eps, cij, fallback })
}

/// Eigenvalues of U_F^k restricted to N₄.
fn n4_eigenvalues(p: &GateParams, t_a: SymmetryBreaking, k: f64) -> Result<Vec<C64>> {
    let u = sector_exponents(p, t_a, k)?.unitary()?;
    let block = Array2::from_shape_fn((4, 4), |(i, j)| u[[N4[i], N4[j]]]);
    Ok(linalg::eigvals(&block)?.to_vec())
}

fn pair_cosines(eps: &[f64; 4]) -> [f64; 3] {
    [(eps[0] + eps[1]).cos(), (eps[0] + eps[2]).cos(), (eps[1] + eps[2]).cos()]
}

/// Quasi-energies along a k-scan with branches labelled by continuity: each step is matched
/// to the linear extrapolation of the previous two points. The first point is ordered by |ε|.
pub fn quasi_energy_scan(p: &GateParams, t_a: SymmetryBreaking, ks: &[f64]) -> Result<Vec<QuasiEnergies>> {
    let raw: Vec<QuasiEnergies> =
        ks.par_iter().map(|&k| quasi_energies(p, t_a, k)).collect::<Result<_>>()?;
    let mut out: Vec<QuasiEnergies> = Vec::with_capacity(raw.len());
    for (n, q) in raw.into_iter().enumerate() {
        if n == 0 {
            out.push(q);
            continue;
        }
        let prev = out[n - 1].eps;
        let guess: [f64; 4] = if n >= 2 {
            let pp = out[n - 2].eps;
            let h0 = out[n - 1].k - out[n - 2].k;
            let h1 = q.k - out[n - 1].k;
            let r = if h0 != 0.0 { h1 / h0 } else { 0.0 };
            std::array::from_fn(|i| prev[i] + r * wrap(prev[i] - pp[i]))
        } else {
            prev
        };
        let mut best = (f64::INFINITY, [0usize, 1, 2, 3]);
        for perm in permutations4() {
            let cost: f64 = (0..4).map(|i| wrap(q.eps[perm[i]] - guess[i]).powi(2)).sum();
            if cost < best.0 {
                best = (cost, perm);
            }
        }
        let eps = std::array::from_fn(|i| q.eps[best.1[i]]);
        out.push(QuasiEnergies { eps, ..q });
    }
    Ok(out)
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut v = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if a != b && a != c && a != d && b != c && b != d && c != d {
                        v.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    v
}

/// Momenta in (0, π/2) where a quasi-energy crosses zero, located as sign changes of
/// P(1) on an `n`-point grid refined by bisection.
pub fn zero_crossings(p: &GateParams, t_a: SymmetryBreaking, n: usize) -> Result<Vec<f64>> {
    let f = |k: f64| -> Result<f64> { Ok(charpoly_general(p, t_a, k)?.value_at_one()) };
    let h = FRAC_PI_2 / (n as f64 + 1.0);
    let ks: Vec<f64> = (1..=n).map(|j| j as f64 * h).collect();
    let vals: Vec<f64> = ks.iter().map(|&k| f(k)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for j in 1..n {
        if vals[j - 1] == 0.0 {
            out.push(ks[j - 1]);
        } else if vals[j - 1] * vals[j] < 0.0 {
            let (mut lo, mut hi, mut flo) = (ks[j - 1], ks[j], vals[j - 1]);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
    }
    Ok(out)
}

/// Positive root of 2α²(cosh γ − cosh θ) = sinh²θ, where the k = π/2 sectors become
/// degenerate. The root lies in (0, |γ|); none exists for γ = 0.
pub fn theta_critical(alpha: f64, gamma: f64) -> Option<f64> {
    let f = |t: f64| 2.0 * alpha * alpha * (gamma.cosh() - t.cosh()) - t.sinh().powi(2);
    let g = gamma.abs();
    if !(g > 0.0) || !(f(0.0) > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, g);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Velocities of the four critical branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityReport {
    pub v_plus: f64,
    pub v_minus: f64,
    pub v0: f64,
    pub v1: f64,
}

impl VelocityReport {
    /// Largest |v|; the light-cone speed.
    pub fn v_max(&self) -> f64 {
        [self.v_plus, self.v_minus, self.v0, self.v1].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn group_velocities(p: &GateParams) -> VelocityReport {
    let (a, g, t) = (p.alpha, p.gamma, p.theta);
    let a2 = a * a;
    VelocityReport {
        v_plus: 2.0 * ((g + t) / 2.0).tanh(),
        v_minus: 2.0 * ((g - t) / 2.0).tanh(),
        v0: 2.0 * g.sinh() / (g.cosh() + t.cosh()),
        v1: 2.0 * t.sinh() / ((-1.0 + 2.0 * a2 + t.cosh()).sqrt() * (1.0 + 2.0 * a2 + t.cosh()).sqrt()),
    }
}

/// Momenta labelling the sectors of a PBC chain of even length L: 0, the generic 2πj/L
/// below π/2, and π/2 when 4 | L.
pub fn sector_momenta(l: usize) -> Result<Vec<f64>> {
    if l < 4 || l % 2 != 0 {
        return Err(Error::InvalidArgument(format!("sector decomposition needs even L ≥ 4, got {l}")));
    }
    let mut ks = vec![0.0];
    for j in 1..=l / 4 {
        if 4 * j < l {
            ks.push(2.0 * PI * j as f64 / l as f64);
        }
    }
    if l % 4 == 0 {
        ks.push(FRAC_PI_2);
    }
    Ok(ks)
}

/// Many-body spectrum of the periodic U_F assembled from the momentum sectors.
pub fn predicted_spectrum(p: &GateParams, t_a: SymmetryBreaking, l: usize) -> Result<Vec<C64>> {
    if l > crate::graded_dense::MAX_DENSE_SITES {
        return Err(Error::Resource(format!("assembled spectrum has 2^{l} entries; L ≤ 14 supported")));
    }
    let mut total = vec![ONE];
    for k in sector_momenta(l)? {
        let u = if k == 0.0 || k == FRAC_PI_2 {
            special_unitary(p, t_a, k == FRAC_PI_2)?
        } else {
            sector_exponents(p, t_a, k)?.unitary()?
        };
        let w = linalg::eigvals(&u)?;
        total = total.iter().flat_map(|&a| w.iter().map(move |&b| a * b)).collect();
    }
    Ok(total)
}

/// One-particle quasi-energies of every sector of an L-site chain: four per generic sector
/// (signed, from the N₄ eigenphases) and two non-negative ones per special sector.
pub fn one_particle_energies(p: &GateParams, t_a: SymmetryBreaking, l: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for k in sector_momenta(l)? {
        if k == 0.0 || k == FRAC_PI_2 {
            for e in special_one_particle(p, t_a, k == FRAC_PI_2)? {
                out.push((k, e));
            }
        } else {
            let q = quasi_energies(p, t_a, k)?;
            out.extend(q.eps.iter().map(|&e| (k, e)));
        }
    }
    Ok(out)
}
