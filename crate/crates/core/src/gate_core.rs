//! The supersymmetric two-qubit matchgate Š(α, γ, θ), its boundary gate K(θ), and the
//! free-fermion exponent E with Š = exp(iE).
//!
//! Basis ordering is {|bb⟩, |bf⟩, |fb⟩, |ff⟩} ↔ {00, 01, 10, 11}; the left factor is the
//! most significant bit.

use ndarray::{array, s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, dagger, diff_norm, expi_hermitian, kron, paulis, I, ONE, ZERO};

/// Gate parameters: interaction strength α, log mass ratio γ = log(m₁/m₂), rapidity
/// difference θ (odd lines carry θ/2, even lines −θ/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl GateParams {
    pub fn new(alpha: f64, gamma: f64, theta: f64) -> Result<Self> {
        if !(alpha.is_finite() && gamma.is_finite() && theta.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite gate parameter (alpha={alpha}, gamma={gamma}, theta={theta})"
            )));
        }
        if alpha <= 0.0 {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { alpha, gamma, theta })
    }

    /// Masses (m₁, m₂) with m₁m₂ = 1.
    pub fn masses(&self) -> (f64, f64) {
        ((self.gamma / 2.0).exp(), (-self.gamma / 2.0).exp())
    }

    /// Rapidity carried by odd (`true`) or even lines.
    pub fn line_rapidity(&self, odd: bool) -> f64 {
        if odd {
            self.theta / 2.0
        } else {
            -self.theta / 2.0
        }
    }

    /// Drift velocity 2(m₁ − m₂)/(m₁ + m₂) = 2 tanh(γ/2).
    pub fn drift_velocity(&self) -> f64 {
        2.0 * (self.gamma / 2.0).tanh()
    }

    /// Copy with γ replaced (used when masses cycle between layers).
    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }
}

/// Scalars the gate is assembled from.
#[derive(Debug, Clone, Copy)]
pub struct SMatrixIngredients {
    pub t: f64,
    pub t_tilde: f64,
    pub f: C64,
    pub g: C64,
}

/// 4×4 gate in the {bb, bf, fb, ff} basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitGate {
    pub entries: Array2<C64>,
}

/// Outer block A (corners) and inner block B of a matchgate.
#[derive(Debug, Clone)]
pub struct MatchgateDecomposition {
    pub a: Array2<C64>,
    pub b: Array2<C64>,
    /// |det A − det B|
    pub det_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct BoundaryGate {
    pub entries: Array2<C64>,
}

/// Coefficients of the quadratic exponent E with Š = exp(iE).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentCoefficients {
    pub a11: f64,
    pub a12: f64,
    pub phi: f64,
    pub b12: f64,
}

/// The graded permutation Π: swap with a −1 on |ff⟩.
pub fn graded_permutation() -> Array2<C64> {
    array![
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ZERO, ONE, ZERO],
        [ZERO, ONE, ZERO, ZERO],
        [ZERO, ZERO, ZERO, -ONE]
    ]
}

/// The α → 0 limit i·Π.
pub fn permutation_limit() -> TwoQubitGate {
    TwoQubitGate { entries: graded_permutation().mapv(|z| z * I) }
}

fn normalization(alpha: f64, gamma: f64, theta: C64) -> C64 {
    theta.sinh().powi(2) + 2.0 * alpha * alpha * (theta.cosh() + gamma.cosh())
}

/// The scalars t, t̃, f, g for real parameters.
///
/// g = i sinh θ/√D and f = α(cosh(θ/2) + cosh(γ/2))/√D with D = sinh²θ + 2α²(cosh θ + cosh γ);
/// this choice makes the gate unitary and continuous through θ = 0.
pub fn smatrix_ingredients(p: &GateParams) -> SMatrixIngredients {
    let th = c(p.theta, 0.0);
    let sd = normalization(p.alpha, p.gamma, th).sqrt();
    SMatrixIngredients {
        t: ((p.theta + p.gamma) / 4.0).tanh(),
        t_tilde: ((p.theta - p.gamma) / 4.0).tanh(),
        f: p.alpha * ((p.theta / 2.0).cosh() + (p.gamma / 2.0).cosh()) / sd,
        g: I * p.theta.sinh() / sd,
    }
}

/// The θ → 0 gate. The outer block is the identity; the inner block is a real rotation
/// with cos = sech(γ/2), sin = tanh(γ/2).
fn smatrix_theta_zero(gamma: f64) -> Array2<C64> {
    let ch = (gamma / 2.0).cosh();
    let th = (gamma / 2.0).tanh();
    let sc = 1.0 / ch;
    array![
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, c(sc, 0.0), c(th, 0.0), ZERO],
        [ZERO, c(-th, 0.0), c(sc, 0.0), ZERO],
        [ZERO, ZERO, ZERO, ONE]
    ]
}

/// Gate for a complex rapidity difference (the transfer matrix uses complex spectral
/// parameters). `alpha` may carry mass factors and need not be the bare α.
pub fn smatrix_complex(alpha: f64, gamma: f64, theta: C64) -> Array2<C64> {
    if theta == ZERO {
        return smatrix_theta_zero(gamma);
    }
    let sd = normalization(alpha, gamma, theta).sqrt();
    let f = alpha * ((theta / 2.0).cosh() + (gamma / 2.0).cosh()) / sd;
    let g = I * theta.sinh() / sd;
    let t = ((theta + gamma) / 4.0).tanh();
    let tt = ((theta - gamma) / 4.0).tanh();
    let m = array![
        [ONE - t * tt, ZERO, ZERO, t + tt],
        [ZERO, ONE + t * tt, t - tt, ZERO],
        [ZERO, -t + tt, ONE + t * tt, ZERO],
        [-t - tt, ZERO, ZERO, ONE - t * tt]
    ];
    m * f + graded_permutation() * g
}

pub fn build_smatrix(p: &GateParams) -> Result<TwoQubitGate> {
    if !(p.alpha.is_finite() && p.gamma.is_finite() && p.theta.is_finite()) {
        return Err(Error::Domain("non-finite gate parameter".into()));
    }
    if p.alpha <= 0.0 {
        return Err(Error::Domain(format!(
            "alpha must be positive (use permutation_limit for alpha = 0), got {}",
            p.alpha
        )));
    }
    Ok(TwoQubitGate { entries: smatrix_complex(p.alpha, p.gamma, c(p.theta, 0.0)) })
}

const OUTER: [usize; 2] = [0, 3];
const INNER: [usize; 2] = [1, 2];
const MATCHGATE_TOL: f64 = 1e-12;

pub fn matchgate_decompose(gate: &TwoQubitGate) -> Result<MatchgateDecomposition> {
    let e = &gate.entries;
    if e.dim() != (4, 4) {
        return Err(Error::InvalidArgument(format!("expected a 4x4 gate, got {:?}", e.dim())));
    }
    for r in 0..4 {
        for col in 0..4 {
            let same = OUTER.contains(&r) == OUTER.contains(&col);
            let mag = e[[r, col]].norm();
            if !same && mag > MATCHGATE_TOL {
                return Err(Error::NotMatchgate { row: r, col, magnitude: mag });
            }
        }
    }
    let pick = |idx: [usize; 2]| {
        let mut m = Array2::<C64>::zeros((2, 2));
        for (i, &r) in idx.iter().enumerate() {
            for (j, &q) in idx.iter().enumerate() {
                m[[i, j]] = e[[r, q]];
            }
        }
        m
    };
    let a = pick(OUTER);
    let b = pick(INNER);
    let det_mismatch = (linalg::det2(a.view()) - linalg::det2(b.view())).norm();
    Ok(MatchgateDecomposition { a, b, det_mismatch })
}

/// K(θ) = √(2/cosh θ)·diag(cosh(θ/2 − iπ/4), cosh(θ/2 + iπ/4)).
pub fn build_boundary_k(theta: f64) -> BoundaryGate {
    let pre = (2.0 / theta.cosh()).sqrt();
    let q = std::f64::consts::FRAC_PI_4;
    let d0 = c(theta / 2.0, -q).cosh() * pre;
    let d1 = c(theta / 2.0, q).cosh() * pre;
    BoundaryGate { entries: array![[d0, ZERO], [ZERO, d1]] }
}

/// One-site supercharge e^{θ/2}σˣ + e^{−θ/2}σʸ.
pub fn single_site_charge(theta: f64) -> Array2<C64> {
    let [_, x, y, _] = paulis();
    x * c((theta / 2.0).exp(), 0.0) + y * c((-theta / 2.0).exp(), 0.0)
}

/// ‖K(θ) Q̃(θ) − Q̃(−θ) K(θ)‖: the boundary gate reflects the one-site charge.
pub fn boundary_intertwining_residual(theta: f64) -> f64 {
    let k = build_boundary_k(theta).entries;
    let lhs = k.dot(&single_site_charge(theta));
    let rhs = single_site_charge(-theta).dot(&k);
    diff_norm(&lhs, &rhs)
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn acos_clamped(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

/// Exponent coefficients (a₁₁, a₁₂, φ, b₁₂).
///
/// The arccos magnitudes are taken on the principal branch; a₁₁, a₁₂, b₁₂ carry sgn θ and
/// φ carries sgn(γθ), which is what makes exp(iE) reproduce Š for negative θ or γ.
/// At θ = 0 the gate is a pure inner-block rotation: a₁₁ = b₁₂ = 0,
/// a₁₂ = arccos(sech(γ/2)), φ = sgn(γ)·π/2.
pub fn exponent_coefficients(p: &GateParams) -> ExponentCoefficients {
    let (a, g, t) = (p.alpha, p.gamma, p.theta);
    if t == 0.0 {
        return ExponentCoefficients {
            a11: 0.0,
            a12: acos_clamped(1.0 / (g / 2.0).cosh()),
            phi: sign0(g) * std::f64::consts::FRAC_PI_2,
            b12: 0.0,
        };
    }
    let d = t.sinh().powi(2) + 2.0 * a * a * (t.cosh() + g.cosh());
    let sd = d.sqrt();
    let ang = acos_clamped(2.0 * a * (g / 2.0).cosh() / sd);
    let r = (2.0 * a * a + t.cosh() + 1.0).sqrt();
    let a11 = std::f64::consts::SQRT_2 * (t / 2.0).cosh() / r * ang;
    let b12 = std::f64::consts::SQRT_2 * a / r * ang;
    let a12 = acos_clamped(2.0 * a * (t / 2.0).cosh() / sd);
    let s2 = 4.0 * a * a * (g / 2.0).sinh().powi(2);
    let den = t.sinh().powi(2) + s2;
    let phi = if den > 0.0 { 0.5 * acos_clamped((t.sinh().powi(2) - s2) / den) } else { 0.0 };
    let st = sign0(t);
    ExponentCoefficients { a11: st * a11, a12: st * a12, phi: sign0(g * t) * phi, b12: st * b12 }
}

impl ExponentCoefficients {
    /// a₁₂ scaled by t_a (explicit breaking of the fermionic symmetry).
    pub fn with_a12_scale(&self, t_a: f64) -> Self {
        Self { a12: self.a12 * t_a, ..*self }
    }
}

/// E in the two-site spin basis:
/// a₁₁/2 (ZI + IZ) + a₁₂/2 cos φ (XX + YY) − a₁₂/2 sin φ (XY − YX) + b₁₂/2 (XY + YX).
pub fn exponent_matrix(co: &ExponentCoefficients) -> Array2<C64> {
    let [id, x, y, z] = paulis();
    let k = |a: &Array2<C64>, b: &Array2<C64>| kron(a, b);
    let h = |v: f64| c(v / 2.0, 0.0);
    (k(&z, &id) + k(&id, &z)) * h(co.a11)
        + (k(&x, &x) + k(&y, &y)) * h(co.a12 * co.phi.cos())
        - (k(&x, &y) - k(&y, &x)) * h(co.a12 * co.phi.sin())
        + (k(&x, &y) + k(&y, &x)) * h(co.b12)
}

/// ‖exp(iE) − Š‖_F.
pub fn verify_gate_exponential(p: &GateParams) -> Result<f64> {
    let gate = build_smatrix(p)?;
    let e = exponent_matrix(&exponent_coefficients(p));
    Ok(diff_norm(&expi_hermitian(&e)?, &gate.entries))
}

/// The inner 2×2 block of a gate (|bf⟩, |fb⟩ subspace).
pub fn inner_block(g: &Array2<C64>) -> Array2<C64> {
    g.slice(s![1..3, 1..3]).to_owned()
}

pub fn unitarity_defect(g: &TwoQubitGate) -> f64 {
    diff_norm(&dagger(&g.entries).dot(&g.entries), &linalg::identity(4))
}
