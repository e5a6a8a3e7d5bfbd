//! Seeded oracle suite: every module's invariants on random parameters, at a chosen dense size.

use fermibrick::gate_core::{build_smatrix, matchgate_decompose, unitarity_defect, verify_gate_exponential};
use fermibrick::graded_dense::{
    self, build_supercharges, build_transfer_matrix, build_ubw, dense_spectrum, verify_yang_baxter, Boundary,
    OperatorKind, MAX_DENSE_SITES,
};
use fermibrick::hamiltonian_limit::{dispersion_hgamma, zero_mode_report, DispersionCoefficients};
use fermibrick::linalg::{commutator_norm, unit_circle_multiset_distance};
use fermibrick::quench_dynamics::{covariance_evolve, momentum_block_evolve_allzero, seeded_bits};
use fermibrick::spectral_ubw::{predicted_spectrum, theta_critical, SymmetryBreaking};
use fermibrick::topology::{winding_number, Perturbation};
use fermibrick::{GateParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Quick,
    Full,
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
}

fn random_params(r: &mut ChaCha8Rng) -> Result<GateParams, CliError> {
    Ok(GateParams::new(r.gen_range(0.3..2.5), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0))?)
}

fn max_over(n: usize, mut f: impl FnMut() -> Result<f64, CliError>) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        worst = worst.max(f()?);
    }
    Ok(worst)
}

fn run_checks(level: Level, l: usize, r: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let draws = if level == Level::Full { 20 } else { 4 };
    let mut out = Vec::new();
    let mut push = |name, value, tolerance| out.push(Check { name, value, tolerance });

    push("theta_critical_reference", (theta_critical(1.0, 1.0).unwrap_or(f64::NAN) - 0.700109).abs(), 1e-4);
    push(
        "gate_exponential",
        max_over(draws, || Ok(verify_gate_exponential(&random_params(r)?)?))?,
        1e-9,
    );
    push(
        "gate_unitarity_matchgate",
        max_over(draws, || {
            let g = build_smatrix(&random_params(r)?)?;
            Ok(unitarity_defect(&g).max(matchgate_decompose(&g)?.det_mismatch))
        })?,
        1e-10,
    );
    push(
        "gapless_identity",
        max_over(draws, || {
            let (a, g) = (r.gen_range(0.1..10.0), r.gen_range(-4.0..4.0));
            let (r1, r2) = DispersionCoefficients::new(a, g)?.gapless_residuals(a, g);
            let scale = (16.0 / (a.powi(4) * (g / 2.0).cosh().powi(4))).max(1.0);
            Ok(r1.abs().max(r2.abs()) / scale)
        })?,
        1e-10,
    );
    push(
        "k0_energies_zero_mode",
        max_over(draws, || {
            let (a, g) = (r.gen_range(0.2..4.0), r.gen_range(-3.0..3.0));
            let (e1, e2) = dispersion_hgamma(a, g, 0.0)?;
            let de = e1.abs().max((e2 - 2.0 / (a * (g / 2.0).cosh())).abs());
            Ok(de.max(zero_mode_report(a, g)?.residual()))
        })?,
        1e-10,
    );
    push(
        "unperturbed_gapless",
        max_over(draws, || {
            let (a, g) = (r.gen_range(0.3..3.0), r.gen_range(-2.0..2.0));
            Ok(if winding_number(a, g, &Perturbation::default(), 256)?.is_gapless() { 0.0 } else { 1.0 })
        })?,
        0.5,
    );
    push(
        "yang_baxter",
        max_over(draws, || {
            let p = GateParams::new(r.gen_range(0.3..2.5), r.gen_range(-2.0..2.0), 0.0)?;
            Ok(verify_yang_baxter(&p, r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)))
        })?,
        1e-10,
    );
    let dense_draws = if level == Level::Full { 3 } else { 1 };
    push(
        "supercharge_commutators",
        max_over(dense_draws, || {
            let p = random_params(r)?;
            let u = build_ubw(&p, l, Boundary::Pbc)?.entries;
            let q = build_supercharges(&p, l)?;
            Ok(commutator_norm(&u, &q.q_l.entries).max(commutator_norm(&u, &q.q_r.entries)))
        })?,
        1e-10,
    );
    push(
        "quench_covariance_vs_dense",
        max_over(dense_draws, || {
            let p = random_params(r)?;
            let boundary = if r.gen_bool(0.5) { Boundary::Pbc } else { Boundary::Obc };
            let bits = seeded_bits(l, r.gen_range(1..=l))?;
            let cov = covariance_evolve(&p, &bits, 10, boundary)?;
            let dense = graded_dense::evolve_state_sz(&p, l, boundary, &graded_dense::basis_state(&bits), 10)?;
            Ok((&cov.sz - &dense).iter().fold(0.0f64, |m, x| m.max(x.abs())))
        })?,
        1e-9,
    );
    if l % 4 == 2 && l >= 6 {
        push(
            "quench_momentum_vs_dense",
            max_over(dense_draws, || {
                let p = random_params(r)?;
                let bits = vec![false; l];
                let dense = graded_dense::evolve_state_sz(&p, l, Boundary::Pbc, &graded_dense::basis_state(&bits), 10)?;
                let mom = momentum_block_evolve_allzero(&p, l, 10)?;
                let mut worst: f64 = 0.0;
                for t in 0..=10 {
                    for j in 0..l {
                        let m = if j % 2 == 1 { mom.sz_even[t] } else { mom.sz_odd[t] };
                        worst = worst.max((m - dense[[t, j]]).abs());
                    }
                }
                Ok(worst)
            })?,
            1e-9,
        );
    }
    if level == Level::Full {
        push(
            "obc_extended_commutator",
            max_over(dense_draws, || {
                let p = random_params(r)?;
                let u = build_ubw(&p, 4, Boundary::ObcExtended)?.entries;
                let q = build_supercharges(&p, 4)?;
                Ok(commutator_norm(&u, &(&q.q_l.entries + &q.q_r.entries)))
            })?,
            1e-9,
        );
        push(
            "transfer_matrix_commutators",
            max_over(dense_draws, || {
                let p = random_params(r)?;
                let u = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-0.5..0.5));
                let v = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-0.5..0.5));
                let tu = build_transfer_matrix(u, &p, 4)?.entries;
                let tv = build_transfer_matrix(v, &p, 4)?.entries;
                let uf = build_ubw(&p, 4, Boundary::Pbc)?.entries;
                Ok(commutator_norm(&tu, &uf).max(commutator_norm(&tu, &tv)))
            })?,
            1e-9,
        );
        push(
            "spectral_oracle",
            max_over(dense_draws, || {
                let p = random_params(r)?;
                let dense = dense_spectrum(&build_ubw(&p, l, Boundary::Pbc)?.entries, OperatorKind::Unitary)?;
                let pred = predicted_spectrum(&p, SymmetryBreaking::symmetric(), l)?;
                Ok(unit_circle_multiset_distance(&pred, &dense))
            })?,
            1e-8,
        );
    }
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<Table, CliError> {
    let level = match cfg.verify.level.as_deref().unwrap_or("quick") {
        "quick" => Level::Quick,
        "full" => Level::Full,
        other => return Err(CliError::Usage(format!("unknown level '{other}' (quick or full)"))),
    };
    let l = cfg.lattice.l.unwrap_or(8);
    if l < 4 || l % 2 != 0 || l > MAX_DENSE_SITES {
        return Err(CliError::Usage(format!("verify needs an even L in 4..={MAX_DENSE_SITES}, got {l}")));
    }
    let seed = cfg.verify.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = run_checks(level, l, &mut rng)?;
    let mut t = Table::new(["check", "value", "tolerance", "status"]);
    let mut failed = Vec::new();
    for c in &checks {
        let ok = c.value < c.tolerance;
        if !ok {
            failed.push(c.name);
        }
        t.push(vec![
            Cell::S(c.name.into()),
            Cell::F(c.value),
            Cell::F(c.tolerance),
            Cell::S(if ok { "pass" } else { "fail" }.into()),
        ]);
    }
    t.meta("L", l);
    t.meta("seed", seed);
    t.meta("level", if level == Level::Full { "full" } else { "quick" });
    t.meta("failed", &failed);
    Ok(t)
}
