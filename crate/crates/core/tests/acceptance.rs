//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with its measured
//! figure of merit and runtime; the test fails if any criterion fails.

use std::time::{Duration, Instant};

use fermibrick::gate_core::{verify_gate_exponential, GateParams};
use fermibrick::graded_dense::{
    build_supercharges, build_transfer_matrix, build_ubw, dense_spectrum, verify_yang_baxter, Boundary,
    OperatorKind,
};
use fermibrick::hamiltonian_limit::{dispersion_hgamma, zero_mode_report, DispersionCoefficients};
use fermibrick::linalg::{commutator_norm, unit_circle_multiset_distance};
use fermibrick::quench_dynamics::{
    covariance_evolve, drift_velocity, gge_equilibrium, light_cone_violation, momentum_block_evolve_allzero,
    seeded_bits, Background,
};
use fermibrick::spectral_ubw::{predicted_spectrum, quasi_energy_scan, theta_critical, SymmetryBreaking};
use fermibrick::topology::{phase_scan, winding_number, EpsMode, Perturbation, Range};
use fermibrick::{graded_dense, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn params(a: f64, g: f64, t: f64) -> GateParams {
    GateParams::new(a, g, t).unwrap()
}

fn random_params(r: &mut ChaCha8Rng) -> GateParams {
    params(r.gen_range(0.3..2.5), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0))
}

fn c1_theta_critical() -> Outcome {
    let tc = theta_critical(1.0, 1.0).unwrap();
    outcome((tc - 0.700109).abs() < 1e-4, format!("θ_c(1,1) = {tc:.9}"))
}

fn c2_gapless_identity() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, g) = (r.gen_range(0.1..10.0), r.gen_range(-4.0..4.0));
        let d = DispersionCoefficients::new(a, g).unwrap();
        let (r1, r2) = d.gapless_residuals(a, g);
        let scale = 16.0 / (a.powi(4) * (g / 2.0).cosh().powi(4));
        worst = worst.max(r1.abs() / scale.max(1.0)).max(r2.abs() / scale.max(1.0));
    }
    outcome(worst < 1e-10, format!("max residual {worst:.2e}"))
}

fn c3_gate_exponential() -> Outcome {
    let mut r = rng(3);
    let worst = (0..100)
        .map(|_| verify_gate_exponential(&random_params(&mut r)).unwrap())
        .fold(0.0f64, f64::max);
    outcome(worst < 1e-9, format!("max ‖exp(iE) − Š‖ {worst:.2e}"))
}

fn c4_supercharges() -> Outcome {
    let mut r = rng(4);
    let mut worst_pbc: f64 = 0.0;
    for l in [4, 6, 8] {
        for _ in 0..10 {
            let p = random_params(&mut r);
            let u = build_ubw(&p, l, Boundary::Pbc).unwrap().entries;
            let q = build_supercharges(&p, l).unwrap();
            worst_pbc = worst_pbc.max(commutator_norm(&u, &q.q_l.entries)).max(commutator_norm(&u, &q.q_r.entries));
        }
    }
    let mut worst_ext: f64 = 0.0;
    for _ in 0..10 {
        let p = random_params(&mut r);
        let u = build_ubw(&p, 4, Boundary::ObcExtended).unwrap().entries;
        let q = build_supercharges(&p, 4).unwrap();
        worst_ext = worst_ext.max(commutator_norm(&u, &(&q.q_l.entries + &q.q_r.entries)));
    }
    outcome(
        worst_pbc < 1e-10 && worst_ext < 1e-9,
        format!("PBC {worst_pbc:.2e}, OBC_EXTENDED {worst_ext:.2e}"),
    )
}

fn c5_yang_baxter() -> Outcome {
    let mut r = rng(5);
    let mut yb: f64 = 0.0;
    for _ in 0..50 {
        let p = params(r.gen_range(0.3..2.5), r.gen_range(-2.0..2.0), 0.0);
        let (a, b, c) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        yb = yb.max(verify_yang_baxter(&p, a, b, c));
    }
    let mut comm: f64 = 0.0;
    for _ in 0..10 {
        let p = random_params(&mut r);
        let u = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-0.5..0.5));
        let v = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-0.5..0.5));
        let tu = build_transfer_matrix(u, &p, 4).unwrap().entries;
        let tv = build_transfer_matrix(v, &p, 4).unwrap().entries;
        let uf = build_ubw(&p, 4, Boundary::Pbc).unwrap().entries;
        comm = comm.max(commutator_norm(&tu, &uf)).max(commutator_norm(&tu, &tv));
    }
    outcome(yb < 1e-10 && comm < 1e-9, format!("YB {yb:.2e}, commutators {comm:.2e}"))
}

fn c6_spectral_oracle() -> Outcome {
    let mut r = rng(6);
    let mut sets: Vec<GateParams> = (0..4).map(|_| random_params(&mut r)).collect();
    sets.push(params(0.9, 0.8, 0.8));
    let mut worst: f64 = 0.0;
    for p in &sets {
        let dense = dense_spectrum(&build_ubw(p, 10, Boundary::Pbc).unwrap().entries, OperatorKind::Unitary).unwrap();
        let pred = predicted_spectrum(p, SymmetryBreaking::symmetric(), 10).unwrap();
        worst = worst.max(unit_circle_multiset_distance(&pred, &dense));
    }
    outcome(worst < 1e-8, format!("max multiset distance {worst:.2e} over 5 sets (one with γ = θ)"))
}

/// Least-squares fit y = c₁k + c₃k³.
fn fit_odd_cubic(ks: &[f64], ys: &[f64]) -> (f64, f64) {
    let (mut s11, mut s13, mut s33, mut y1, mut y3) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&k, &y) in ks.iter().zip(ys) {
        s11 += k * k;
        s13 += k.powi(4);
        s33 += k.powi(6);
        y1 += k * y;
        y3 += k.powi(3) * y;
    }
    let det = s11 * s33 - s13 * s13;
    ((y1 * s33 - y3 * s13) / det, (s11 * y3 - s13 * y1) / det)
}

fn c7_cubic_point() -> Outcome {
    let p = params(1.0, 1.0, 1.0);
    let ks: Vec<f64> = (0..9).map(|j| 0.01 + 0.005 * j as f64).collect();
    let scan = quasi_energy_scan(&p, SymmetryBreaking::symmetric(), &ks).unwrap();
    let slope_target = 2.0 * 1f64.tanh();
    let cubic_target = 1f64.sinh() / 8.0;
    let (mut slope_err, mut cubic_err) = (f64::INFINITY, f64::INFINITY);
    for b in 0..4 {
        let ys: Vec<f64> = scan.iter().map(|q| q.eps[b]).collect();
        let (c1, c3) = fit_odd_cubic(&ks, &ys);
        slope_err = slope_err.min((c1 + slope_target).abs().min((c1 - slope_target).abs()) / slope_target);
        if c1.abs() < 1e-3 {
            cubic_err = cubic_err.min((c3.abs() - cubic_target).abs() / cubic_target);
        }
    }
    outcome(
        slope_err < 0.02 && cubic_err < 0.05,
        format!("slope rel. err {slope_err:.2e}, cubic rel. err {cubic_err:.2e}"),
    )
}

fn c8_zero_mode() -> Outcome {
    let mut r = rng(8);
    let (mut e_err, mut v_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let (a, g) = (r.gen_range(0.2..4.0), r.gen_range(-3.0..3.0));
        let (e1, e2) = dispersion_hgamma(a, g, 0.0).unwrap();
        e_err = e_err.max(e1.abs()).max((e2 - 2.0 / (a * (g / 2.0).cosh())).abs());
        v_err = v_err.max(zero_mode_report(a, g).unwrap().residual());
    }
    outcome(e_err < 1e-10 && v_err < 1e-10, format!("energies {e_err:.2e}, zero-mode vector {v_err:.2e}"))
}

fn c9_topology() -> Outcome {
    let mut r = rng(9);
    let gapless = (0..20).all(|_| {
        let (a, g) = (r.gen_range(0.3..3.0), r.gen_range(-2.0..2.0));
        winding_number(a, g, &Perturbation::default(), 256).unwrap().is_gapless()
    });
    let w = |e: f64, grid: usize| winding_number(1.0, 0.0, &Perturbation::new(0.0, e, e), grid).unwrap().w;
    let kitaev = w(-0.5, 256).map(i32::abs) == Some(1) && w(0.5, 256) == Some(0);
    let refined = w(-0.5, 256) == w(-0.5, 1024) && w(0.5, 256) == w(0.5, 1024);
    let d = Range::new(-1.0, 1.0, 40).unwrap();
    let e = Range::new(-1.0, 1.0, 40).unwrap();
    let scan = phase_scan(1.0, 0.0, &d, &e, EpsMode::Equal, 256);
    let quantized = scan.as_ref().map(|cells| cells.iter().all(|c| c.w.map_or(true, |w| (-1..=1).contains(&w))));
    let quantized = matches!(quantized, Ok(true));
    outcome(
        gapless && kitaev && refined && quantized,
        format!("gapless {gapless}, |W| at ε=∓0.5 {kitaev}, refinement {refined}, 40×40 quantized {quantized}"),
    )
}

fn c10_quench_triple() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in [params(1.0, 0.0, 0.5), params(1.0, 1.0, 0.5), params(0.7, -0.8, 1.3)] {
        let bits = vec![false; 10];
        let cov = covariance_evolve(&p, &bits, 20, Boundary::Pbc).unwrap();
        let dense =
            graded_dense::evolve_state_sz(&p, 10, Boundary::Pbc, &graded_dense::basis_state(&bits), 20).unwrap();
        let mom = momentum_block_evolve_allzero(&p, 10, 20).unwrap();
        for t in 0..=20 {
            for j in 0..10 {
                worst = worst.max((cov.sz[[t, j]] - dense[[t, j]]).abs());
                let m = if j % 2 == 1 { mom.sz_even[t] } else { mom.sz_odd[t] };
                worst = worst.max((m - dense[[t, j]]).abs());
            }
        }
    }
    outcome(worst < 1e-9, format!("max disagreement {worst:.2e}"))
}

fn c11_gge() -> Outcome {
    let window_mean = |v: &[f64]| v[100..=200].iter().sum::<f64>() / 101.0;
    let p0 = params(1.0, 0.0, 0.5);
    let tr = momentum_block_evolve_allzero(&p0, 102, 200).unwrap();
    let ((ge, go), _) = gge_equilibrium(&p0, 102).unwrap();
    let d0 = (window_mean(&tr.sz_even) - ge).abs().max((window_mean(&tr.sz_odd) - go).abs());
    let p1 = params(1.0, 1.0, 0.5);
    let tr = momentum_block_evolve_allzero(&p1, 102, 200).unwrap();
    let ((ge1, go1), _) = gge_equilibrium(&p1, 102).unwrap();
    let d1e = (window_mean(&tr.sz_even) - ge1).abs();
    let d1o = (window_mean(&tr.sz_odd) - go1).abs();
    let split = (ge1 - go1).abs();
    outcome(
        d0 < 1e-2 && d1e < 1e-2 && d1o < 1e-2 && split > 1e-2,
        format!("γ=0 dev {d0:.2e}; γ=1 dev even {d1e:.2e} odd {d1o:.2e}, even−odd split {split:.3}"),
    )
}

fn c12_drift() -> Outcome {
    let (l, t) = (200, 45);
    let run = |p: &GateParams, seed: usize| {
        let bg = covariance_evolve(p, &vec![false; l], t, Boundary::Pbc).unwrap();
        let tr = covariance_evolve(p, &seeded_bits(l, seed).unwrap(), t, Boundary::Pbc).unwrap();
        let v = drift_velocity(&tr, Background::Trace(&bg), seed).unwrap();
        let cone = light_cone_violation(&tr, Background::Trace(&bg), seed, 4);
        (v.v_d, cone)
    };
    let fast = params(1.0, 10.0, 1.0);
    let (v_odd, cone1) = run(&fast, 101);
    let (v_even, cone2) = run(&fast, 102);
    let (v_sym, cone3) = run(&params(1.0, 0.0, 1.0), 101);
    let cone = cone1.max(cone2).max(cone3);
    let pass = (v_odd.abs() - 2.0).abs() < 0.1
        && (v_even.abs() - 2.0).abs() < 0.1
        && v_odd * v_even < 0.0
        && v_sym.abs() < 0.1
        && cone < 1e-8;
    outcome(
        pass,
        format!("v_d(γ=10) odd seed {v_odd:.4}, even seed {v_even:.4}; v_d(γ=0) {v_sym:.4}; cone leak {cone:.1e}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, Duration); 12] = [
        ("1  theta_c reproduction", c1_theta_critical, Duration::from_secs(1)),
        ("2  gaplessness identity", c2_gapless_identity, Duration::from_secs(1)),
        ("3  gate exponential", c3_gate_exponential, Duration::from_secs(5)),
        ("4  supercharge commutators", c4_supercharges, Duration::from_secs(30)),
        ("5  Yang-Baxter and transfer matrices", c5_yang_baxter, Duration::from_secs(60)),
        ("6  spectral oracle equivalence", c6_spectral_oracle, Duration::from_secs(120)),
        ("7  cubic multicritical point", c7_cubic_point, Duration::from_secs(5)),
        ("8  k=0 energies and zero mode", c8_zero_mode, Duration::from_secs(1)),
        ("9  topology", c9_topology, Duration::from_secs(60)),
        ("10 quench triple agreement", c10_quench_triple, Duration::from_secs(30)),
        ("11 GGE equilibrium", c11_gge, Duration::from_secs(60)),
        ("12 drift velocity and light cone", c12_drift, Duration::from_secs(120)),
    ];
    let mut failed = Vec::new();
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let dt = start.elapsed();
        let ok = o.pass && dt <= budget;
        println!(
            "criterion {name}: {} — {} [{:.2}s / budget {}s]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            dt.as_secs_f64(),
            budget.as_secs()
        );
        if !ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
