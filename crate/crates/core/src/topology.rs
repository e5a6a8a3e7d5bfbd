//! BDI-class symmetries of the BdG blocks, chiral off-diagonalization and the winding
//! number of (perturbed) H_γ.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian_limit::{BlochHamiltonian, HGammaCoefficients};
use crate::linalg::{c, dagger, det2, eigvalsh, identity, kron, max_abs, paulis, ZERO};

/// Smallest accepted k-grid.
pub const MIN_GRID: usize = 256;
/// |det V(k)| below this marks the spectrum as gapless.
pub const GAP_THRESHOLD: f64 = 1e-8;
/// Tolerance on the accumulated phase being an integer multiple of 2π.
pub const INTEGER_TOL: f64 = 1e-6;

/// Symmetry-breaking shifts of the H_γ coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Shift of J^L_AB.
    pub delta: f64,
    /// Shift of N_A.
    pub eps1: f64,
    /// Shift of N_B.
    pub eps2: f64,
}

impl Perturbation {
    pub fn new(delta: f64, eps1: f64, eps2: f64) -> Self {
        Self { delta, eps1, eps2 }
    }

    pub fn apply(&self, co: &HGammaCoefficients) -> HGammaCoefficients {
        co.perturbed(self.delta, self.eps1, self.eps2)
    }

    pub fn is_zero(&self) -> bool {
        self.delta == 0.0 && self.eps1 == 0.0 && self.eps2 == 0.0
    }
}

/// Max residuals of the particle-hole, time-reversal and chiral relations over a k-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub particle_hole: f64,
    pub time_reversal: f64,
    pub chiral: f64,
    /// ‖P² − 1‖, ‖T² − 1‖, ‖C² − 1‖ with P = U_P K, T = U_T K, C = U_C.
    pub squares: f64,
}

impl SymmetryReport {
    pub fn max(&self) -> f64 {
        self.particle_hole.max(self.time_reversal).max(self.chiral).max(self.squares)
    }
}

/// U_P = σˣ⊗1, U_T = iσᶻ⊗1, U_C = U_P U_T.
pub fn symmetry_operators() -> [Array2<C64>; 3] {
    let [id, x, _, z] = paulis();
    let up = kron(&x, &id);
    let ut = kron(&z, &id) * c(0.0, 1.0);
    let uc = up.dot(&ut);
    [up, ut, uc]
}

/// U_M: brings U_C to diag(1, 1, −1, −1) so that U_M Λ U_M† is block off-diagonal.
pub fn chiral_basis() -> Array2<C64> {
    let p = c(0.5, 0.5);
    let m = c(0.5, -0.5);
    ndarray::array![
        [p, ZERO, m, ZERO],
        [ZERO, p, ZERO, m],
        [p, ZERO, -m, ZERO],
        [ZERO, p, ZERO, -m]
    ]
}

fn conj(a: &Array2<C64>) -> Array2<C64> {
    a.mapv(|z| z.conj())
}

fn bloch(alpha: f64, gamma: f64, pert: &Perturbation) -> Result<BlochHamiltonian> {
    BlochHamiltonian::from_coefficients(&pert.apply(&HGammaCoefficients::new(alpha, gamma)?))
}

pub fn symmetry_relations_check(
    alpha: f64,
    gamma: f64,
    pert: &Perturbation,
) -> Result<SymmetryReport> {
    let b = bloch(alpha, gamma, pert)?;
    let [up, ut, uc] = symmetry_operators();
    let mut rep = SymmetryReport { particle_hole: 0.0, time_reversal: 0.0, chiral: 0.0, squares: 0.0 };
    let n = 64;
    for i in 0..=n {
        let k = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / n as f64;
        let lk = b.lambda(k);
        let lm = b.lambda(-k);
        let p = up.dot(&conj(&lk)).dot(&dagger(&up)) + &lm;
        let t = ut.dot(&conj(&lk)).dot(&dagger(&ut)) - &lm;
        let ch = uc.dot(&lk).dot(&dagger(&uc)) + &lk;
        rep.particle_hole = rep.particle_hole.max(max_abs(p.view()));
        rep.time_reversal = rep.time_reversal.max(max_abs(t.view()));
        rep.chiral = rep.chiral.max(max_abs(ch.view()));
    }
    // antiunitary squares: (U K)² = U U*
    let id = identity(4);
    let sq = [up.dot(&conj(&up)), ut.dot(&conj(&ut)), uc.dot(&uc)];
    rep.squares = sq.iter().map(|m| max_abs((m - &id).view()).min(max_abs((m + &id).view()))).fold(0.0, f64::max);
    Ok(rep)
}

/// Outcome of a winding-number evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    /// `None` when the gap closes on the grid.
    pub w: Option<i32>,
    /// min_k |det V(k)|.
    pub min_det: f64,
    /// Smallest |eigenvalue| of Λ_k over the grid.
    pub min_gap: f64,
    /// Largest diagonal-block entry of U_M Λ_k U_M† (chiral symmetry check).
    pub offdiag_defect: f64,
    /// Unwrapped arg z(k) along the grid.
    pub phase_trace: Vec<f64>,
}

impl WindingResult {
    pub fn is_gapless(&self) -> bool {
        self.w.is_none()
    }
}

/// V(k): the upper-right block of U_M Λ_k U_M†, plus the size of the diagonal blocks.
pub fn chiral_block(lambda: &Array2<C64>) -> (Array2<C64>, f64) {
    let um = chiral_basis();
    let r = um.dot(lambda).dot(&dagger(&um));
    let diag = max_abs(r.slice(s![..2, ..2])).max(max_abs(r.slice(s![2.., 2..])));
    (r.slice(s![..2, 2..]).to_owned(), diag)
}

/// W = (1/2π) ∮ d arg det V(k) over k ∈ [−π/2, π/2].
pub fn winding_number(
    alpha: f64,
    gamma: f64,
    pert: &Perturbation,
    grid: usize,
) -> Result<WindingResult> {
    if grid < MIN_GRID {
        return Err(Error::InvalidArgument(format!("grid must be at least {MIN_GRID}, got {grid}")));
    }
    if ![pert.delta, pert.eps1, pert.eps2].iter().all(|x| x.is_finite()) {
        return Err(Error::Domain("perturbation must be finite".into()));
    }
    let b = bloch(alpha, gamma, pert)?;
    let mut min_det = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    let mut offdiag_defect: f64 = 0.0;
    let mut phase_trace = Vec::with_capacity(grid + 1);
    let mut prev: Option<f64> = None;
    for i in 0..=grid {
        let k = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / grid as f64;
        let lam = b.lambda(k);
        let (v, diag) = chiral_block(&lam);
        offdiag_defect = offdiag_defect.max(diag);
        let z = det2(v.view());
        min_det = min_det.min(z.norm());
        let w = eigvalsh(&lam)?;
        min_gap = min_gap.min(w.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())));
        let arg = z.arg();
        let unwrapped = match prev {
            None => arg,
            Some(p) => {
                let mut d = arg - p.rem_euclid(2.0 * std::f64::consts::PI);
                d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                    - std::f64::consts::PI;
                p + d
            }
        };
        phase_trace.push(unwrapped);
        prev = Some(unwrapped);
    }
    let w = if min_det < GAP_THRESHOLD {
        None
    } else {
        let turns = (phase_trace[grid] - phase_trace[0]) / (2.0 * std::f64::consts::PI);
        let rounded = turns.round();
        if (turns - rounded).abs() > INTEGER_TOL {
            return Err(Error::Consistency(format!(
                "accumulated phase {turns:.6} turns is not an integer; refine the grid"
            )));
        }
        Some(rounded as i32)
    };
    Ok(WindingResult { w, min_det, min_gap, offdiag_defect, phase_trace })
}

/// Winding numbers just off a gapless point along a probe direction: (W(−η·dir), W(+η·dir)).
pub fn winding_limits(
    alpha: f64,
    gamma: f64,
    direction: &Perturbation,
    eta: f64,
    grid: usize,
) -> Result<(Option<i32>, Option<i32>)> {
    let at = |s: f64| {
        let p = Perturbation::new(s * direction.delta, s * direction.eps1, s * direction.eps2);
        winding_number(alpha, gamma, &p, grid).map(|r| r.w)
    };
    Ok((at(-eta)?, at(eta)?))
}

/// How ε is shared between the two sublattices in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsMode {
    /// ε₁ = ε₂ = ε
    Equal,
    /// ε₁ = −ε₂ = ε
    Opposite,
}

impl std::str::FromStr for EpsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "equal" | "eps_equal" => Ok(EpsMode::Equal),
            "opposite" | "eps_opposite" => Ok(EpsMode::Opposite),
            other => Err(Error::InvalidArgument(format!("unknown eps mode '{other}'"))),
        }
    }
}

/// Inclusive linear range with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Range {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || n == 0 {
            return Err(Error::InvalidArgument(format!("invalid range [{min}, {max}] x {n}")));
        }
        Ok(Self { min, max, n })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        (0..self.n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub w: Option<i32>,
    pub min_gap: f64,
}

/// Winding number over a (δ, ε) grid, cells evaluated in parallel.
pub fn phase_scan(
    alpha: f64,
    gamma: f64,
    delta_range: &Range,
    eps_range: &Range,
    mode: EpsMode,
    grid: usize,
) -> Result<Vec<PhaseCell>> {
    let deltas = delta_range.values();
    let epss = eps_range.values();
    let cells: Vec<(f64, f64)> =
        deltas.iter().flat_map(|&d| epss.iter().map(move |&e| (d, e))).collect();
    cells
        .par_iter()
        .map(|&(delta, eps)| {
            let (eps1, eps2) = match mode {
                EpsMode::Equal => (eps, eps),
                EpsMode::Opposite => (eps, -eps),
            };
            let r = winding_number(alpha, gamma, &Perturbation::new(delta, eps1, eps2), grid)?;
            let min_gap = if r.w.is_none() { 0.0 } else { r.min_det };
            Ok(PhaseCell { delta, eps1, eps2, w: r.w, min_gap })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_perturbation_is_identity() {
        let co = HGammaCoefficients::new(1.3, 0.4).unwrap();
        assert_eq!(Perturbation::default().apply(&co), co);
    }

    #[test]
    fn symmetries_hold() {
        let r = symmetry_relations_check(1.0, 1.0, &Perturbation::default()).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
        let r = symmetry_relations_check(1.0, 1.0, &Perturbation::new(0.1, -0.2, -0.2)).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
    }

    #[test]
    fn unperturbed_is_gapless() {
        for (a, g) in [(1.0, 0.0), (1.0, 1.0), (0.5, 0.7), (2.0, -1.5)] {
            let r = winding_number(a, g, &Perturbation::default(), 256).unwrap();
            assert!(r.is_gapless(), "{a} {g} {}", r.min_det);
        }
    }

    #[test]
    fn kitaev_phases() {
        let r = winding_number(1.0, 0.0, &Perturbation::new(0.0, -0.5, -0.5), 256).unwrap();
        assert_eq!(r.w.map(i32::abs), Some(1));
        let r = winding_number(1.0, 0.0, &Perturbation::new(0.0, 0.5, 0.5), 256).unwrap();
        assert_eq!(r.w, Some(0));
    }

    #[test]
    fn limits_around_critical_surface() {
        let (lo, hi) =
            winding_limits(1.0, 0.0, &Perturbation::new(0.0, 1.0, 1.0), 0.05, 256).unwrap();
        assert_eq!(lo.map(i32::abs), Some(1));
        assert_eq!(hi, Some(0));
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(winding_number(1.0, 0.0, &Perturbation::default(), 100).is_err());
    }

    #[test]
    fn scan_values_are_quantized() {
        let d = Range::new(-0.5, 0.5, 3).unwrap();
        let e = Range::new(-1.0, 1.0, 5).unwrap();
        let cells = phase_scan(1.0, 0.5, &d, &e, EpsMode::Equal, 256).unwrap();
        assert_eq!(cells.len(), 15);
        for c in &cells {
            if let Some(w) = c.w {
                assert!((-1..=1).contains(&w));
            } else {
                assert_eq!(c.min_gap, 0.0);
            }
        }
    }

    #[test]
    fn trivial_corner() {
        let r = winding_number(1.0, 1.0, &Perturbation::new(0.0, 5.0, 5.0), 256).unwrap();
        assert_eq!(r.w, Some(0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn chiral_offdiagonal(a in 0.3f64..3.0, g in -2.0f64..2.0, d in -1.0f64..1.0,
                              e1 in -1.0f64..1.0, e2 in -1.0f64..1.0, k in -1.57f64..1.57) {
            let b = bloch(a, g, &Perturbation::new(d, e1, e2)).unwrap();
            let (_, diag) = chiral_block(&b.lambda(k));
            prop_assert!(diag < 1e-12);
        }

        #[test]
        fn grid_refinement_invariance(a in 0.3f64..3.0, g in -2.0f64..2.0, d in -1.0f64..1.0,
                                      e1 in -1.0f64..1.0, e2 in -1.0f64..1.0) {
            let p = Perturbation::new(d, e1, e2);
            let coarse = winding_number(a, g, &p, 256).unwrap();
            if coarse.min_det > 1e-2 {
                let fine = winding_number(a, g, &p, 1024).unwrap();
                prop_assert_eq!(coarse.w, fine.w);
            }
        }

        #[test]
        fn perturbed_symmetries(a in 0.3f64..3.0, g in -2.0f64..2.0, d in -1.0f64..1.0,
                                e1 in -1.0f64..1.0, e2 in -1.0f64..1.0) {
            let r = symmetry_relations_check(a, g, &Perturbation::new(d, e1, e2)).unwrap();
            prop_assert!(r.max() < 1e-12);
        }
    }
}
