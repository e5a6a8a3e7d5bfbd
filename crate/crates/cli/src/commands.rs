//! Subcommand implementations: resolve the merged configuration, run the analysis and
//! return a table.

use std::f64::consts::FRAC_PI_2;

use fermibrick::gate_core::{
    boundary_intertwining_residual, build_smatrix, matchgate_decompose, unitarity_defect, verify_gate_exponential,
};
use fermibrick::graded_dense::Boundary;
use fermibrick::hamiltonian_limit::{
    block_energies, dispersion_hgamma, kitaev_band, BlochHamiltonian, HGammaCoefficients,
};
use fermibrick::quench_dynamics::{
    covariance_evolve, drift_velocity, gge_equilibrium, light_cone_violation, momentum_block_evolve_allzero,
    seeded_bits, Background, SublatticeTrace,
};
use fermibrick::spectral_ubw::{quasi_energy_scan, theta_critical, SymmetryBreaking};
use fermibrick::topology::{phase_scan, EpsMode, Range};
use fermibrick::GateParams;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};

fn require<T: Copy>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing parameter '{name}'")))
}

fn gate_params(cfg: &RunConfig) -> Result<GateParams, CliError> {
    let p = &cfg.params;
    Ok(GateParams::new(require(p.alpha, "alpha")?, require(p.gamma, "gamma")?, require(p.theta, "theta")?)?)
}

fn symmetry_breaking(cfg: &RunConfig) -> Result<SymmetryBreaking, CliError> {
    Ok(SymmetryBreaking::new(cfg.params.t_a.unwrap_or(1.0))?)
}

fn at_least(v: usize, min: usize, name: &str) -> Result<usize, CliError> {
    if v < min {
        return Err(CliError::Usage(format!("'{name}' must be at least {min}, got {v}")));
    }
    Ok(v)
}

/// Unitarity, matchgate structure, free-fermion exponent and boundary reflection of one gate.
pub fn gate_check(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = gate_params(cfg)?;
    let gate = build_smatrix(&p)?;
    let checks = [
        ("unitarity_defect", unitarity_defect(&gate), 1e-12),
        ("matchgate_det_mismatch", matchgate_decompose(&gate)?.det_mismatch, 1e-12),
        ("exponential_residual", verify_gate_exponential(&p)?, 1e-9),
        ("boundary_intertwining", boundary_intertwining_residual(p.theta), 1e-12),
    ];
    let mut t = Table::new(["check", "value", "tolerance", "status"]);
    t.meta("params", p);
    let mut failed = Vec::new();
    for (name, v, tol) in checks {
        let ok = v < tol;
        if !ok {
            failed.push(name);
        }
        t.push(vec![Cell::S(name.into()), Cell::F(v), Cell::F(tol), Cell::S(if ok { "pass" } else { "fail" }.into())]);
    }
    t.meta("failed", &failed);
    Ok(t)
}

fn k_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// H_γ branches (ε₁, ε₂) over [k_min, k_max], optionally perturbed; or the unfolded
/// one-site Kitaev band.
pub fn dispersion_h(cfg: &RunConfig) -> Result<Table, CliError> {
    let (alpha, gamma) = (require(cfg.params.alpha, "alpha")?, require(cfg.params.gamma, "gamma")?);
    let n = at_least(cfg.grid.points.unwrap_or(200), 1, "points")?;
    let unfolded = cfg.grid.unfolded.unwrap_or(false);
    let (lo_default, hi_default) = if unfolded { (-std::f64::consts::PI, std::f64::consts::PI) } else { (0.0, FRAC_PI_2) };
    let (lo, hi) = (cfg.grid.k_min.unwrap_or(lo_default), cfg.grid.k_max.unwrap_or(hi_default));
    if !(lo < hi) && n > 1 {
        return Err(CliError::Usage(format!("need k_min < k_max, got [{lo}, {hi}]")));
    }
    let ks = k_grid(n, lo, hi);
    let (delta, eps1, eps2) =
        (cfg.params.delta.unwrap_or(0.0), cfg.params.eps1.unwrap_or(0.0), cfg.params.eps2.unwrap_or(0.0));
    let mut t = if unfolded { Table::new(["k", "eps"]) } else { Table::new(["k", "eps1", "eps2"]) };
    t.meta("alpha", alpha);
    t.meta("gamma", gamma);
    if unfolded {
        if gamma != 0.0 {
            return Err(CliError::Usage("the unfolded band exists only at gamma = 0".into()));
        }
        for k in ks {
            t.push(vec![Cell::F(k), Cell::F(kitaev_band(alpha, k))]);
        }
        return Ok(t);
    }
    let perturbed = delta != 0.0 || eps1 != 0.0 || eps2 != 0.0;
    t.meta("perturbation", [delta, eps1, eps2]);
    let bloch = if perturbed {
        Some(BlochHamiltonian::from_coefficients(&HGammaCoefficients::new(alpha, gamma)?.perturbed(delta, eps1, eps2))?)
    } else {
        None
    };
    for k in ks {
        let (e1, e2) = match &bloch {
            Some(b) => block_energies(&b.lambda(k))?,
            None => dispersion_hgamma(alpha, gamma, k)?,
        };
        t.push(vec![Cell::F(k), Cell::F(e1), Cell::F(e2)]);
    }
    Ok(t)
}

/// Floquet one-particle quasi-energies ε₁…ε₄ on an open grid of (0, π/2).
pub fn dispersion_u(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = gate_params(cfg)?;
    let ta = symmetry_breaking(cfg)?;
    let n = at_least(cfg.grid.points.unwrap_or(200), 1, "points")?;
    let ks: Vec<f64> = (0..n).map(|i| FRAC_PI_2 * (i + 1) as f64 / (n + 1) as f64).collect();
    let scan = quasi_energy_scan(&p, ta, &ks)?;
    let mut t = Table::new(["k", "eps1", "eps2", "eps3", "eps4"]);
    t.meta("params", p);
    t.meta("t_a", ta.t_a);
    t.meta("theta_critical", theta_critical(p.alpha, p.gamma));
    t.meta("fallback_points", scan.iter().filter(|q| q.fallback).count());
    for q in scan {
        t.push(vec![Cell::F(q.k), Cell::F(q.eps[0]), Cell::F(q.eps[1]), Cell::F(q.eps[2]), Cell::F(q.eps[3])]);
    }
    Ok(t)
}

/// Winding number and gap over a (δ, ε) grid.
pub fn phase_diagram(cfg: &RunConfig) -> Result<Table, CliError> {
    let (alpha, gamma) = (require(cfg.params.alpha, "alpha")?, require(cfg.params.gamma, "gamma")?);
    let g = &cfg.grid;
    let d = Range::new(g.delta_min.unwrap_or(-1.0), g.delta_max.unwrap_or(1.0), g.delta_n.unwrap_or(40))?;
    let e = Range::new(g.eps_min.unwrap_or(-1.0), g.eps_max.unwrap_or(1.0), g.eps_n.unwrap_or(40))?;
    let mode: EpsMode = g.eps_mode.as_deref().unwrap_or("equal").parse()?;
    let grid = at_least(g.zone_grid.unwrap_or(256), 8, "zone_grid")?;
    let cells = phase_scan(alpha, gamma, &d, &e, mode, grid)?;
    let mut t = Table::new(["delta", "eps1", "eps2", "W", "min_gap"]);
    t.meta("alpha", alpha);
    t.meta("gamma", gamma);
    t.meta("eps_mode", mode);
    t.meta("zone_grid", grid);
    for c in cells {
        let w = c.w.map_or(Cell::Empty, |w| Cell::I(w as i64));
        t.push(vec![Cell::F(c.delta), Cell::F(c.eps1), Cell::F(c.eps2), w, Cell::F(c.min_gap)]);
    }
    Ok(t)
}

pub fn theta_crit(cfg: &RunConfig) -> Result<(f64, Table), CliError> {
    let (alpha, gamma) = (require(cfg.params.alpha, "alpha")?, require(cfg.params.gamma, "gamma")?);
    if !(alpha > 0.0 && alpha.is_finite() && gamma.is_finite()) {
        return Err(CliError::Usage(format!("invalid (alpha, gamma) = ({alpha}, {gamma})")));
    }
    let tc = theta_critical(alpha, gamma)
        .ok_or_else(|| CliError::Usage(format!("no critical angle for gamma = {gamma}")))?;
    let mut t = Table::new(["alpha", "gamma", "theta_c"]);
    t.push(vec![Cell::F(alpha), Cell::F(gamma), Cell::F(tc)]);
    Ok((tc, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Covariance,
    Momentum,
}

fn sublattice_averages(row: &[f64]) -> (f64, f64) {
    let (mut even, mut odd) = ((0.0, 0usize), (0.0, 0usize));
    for (j, v) in row.iter().enumerate() {
        // sites are 1-based: index j is site j + 1
        if j % 2 == 1 {
            even = (even.0 + v, even.1 + 1);
        } else {
            odd = (odd.0 + v, odd.1 + 1);
        }
    }
    (even.0 / even.1 as f64, odd.0 / odd.1 as f64)
}

/// Magnetization dynamics from a product state: heatmap (layer × site) or sublattice trace.
pub fn quench(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = gate_params(cfg)?;
    let lat = &cfg.lattice;
    let l = require(lat.l, "L")?;
    let layers = require(lat.layers, "layers")?;
    let boundary: Boundary = lat.boundary.as_deref().unwrap_or("pbc").parse()?;
    let method = match lat.method.as_deref().unwrap_or("covariance") {
        "covariance" => Method::Covariance,
        "momentum" => Method::Momentum,
        other => return Err(CliError::Usage(format!("unknown method '{other}' (covariance or momentum)"))),
    };
    let kind = cfg.output.kind.as_deref().unwrap_or("heatmap");
    if kind != "heatmap" && kind != "trace" {
        return Err(CliError::Usage(format!("unknown output kind '{kind}' (heatmap or trace)")));
    }
    let mut t;
    if method == Method::Momentum {
        if boundary != Boundary::Pbc || lat.seed_site.is_some() || kind != "trace" {
            return Err(CliError::Usage(
                "the momentum method covers the all-0 state with PBC and emits a trace only".into(),
            ));
        }
        let SublatticeTrace { sz_even, sz_odd } = momentum_block_evolve_allzero(&p, l, layers)?;
        t = Table::new(["layer", "sz_even", "sz_odd"]);
        for (i, (e, o)) in sz_even.iter().zip(&sz_odd).enumerate() {
            t.push(vec![Cell::I(i as i64), Cell::F(*e), Cell::F(*o)]);
        }
    } else {
        let bits = match lat.seed_site {
            Some(s) => seeded_bits(l, s)?,
            None => vec![false; l],
        };
        let trace = covariance_evolve(&p, &bits, layers, boundary)?;
        if kind == "trace" {
            t = Table::new(["layer", "sz_even", "sz_odd"]);
            for (i, row) in trace.sz.outer_iter().enumerate() {
                let v = row.to_vec();
                let (e, o) = sublattice_averages(&v);
                t.push(vec![Cell::I(i as i64), Cell::F(e), Cell::F(o)]);
            }
        } else {
            t = Table::new(std::iter::once("layer".to_string()).chain((1..=l).map(|j| format!("site{j}"))));
            for (i, row) in trace.sz.outer_iter().enumerate() {
                t.push(std::iter::once(Cell::I(i as i64)).chain(row.iter().map(|&v| Cell::F(v))).collect());
            }
        }
        if let Some(seed) = lat.seed_site {
            let background = covariance_evolve(&p, &vec![false; l], layers, boundary)?;
            t.meta("light_cone_violation", light_cone_violation(&trace, Background::Trace(&background), seed, 4));
            match drift_velocity(&trace, Background::Trace(&background), seed) {
                Ok(d) => t.meta("drift", d),
                Err(e) => t.meta("drift_unavailable", e.to_string()),
            }
        }
    }
    t.meta("params", p);
    t.meta("L", l);
    t.meta("layers", layers);
    t.meta("boundary", boundary);
    t.meta("seed_site", lat.seed_site);
    t.meta("method", if method == Method::Momentum { "momentum" } else { "covariance" });
    Ok(t)
}

/// GGE sublattice equilibria of the all-0 quench, compared with the time average of the
/// exact evolution over [window_start, layers].
pub fn gge(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = gate_params(cfg)?;
    let l = require(cfg.lattice.l, "L")?;
    let layers = cfg.lattice.layers.unwrap_or(200);
    let start = cfg.lattice.window_start.unwrap_or(layers / 2);
    if layers > 0 && start > layers {
        return Err(CliError::Usage(format!("window_start {start} exceeds layers {layers}")));
    }
    let ((ge, go), data) = gge_equilibrium(&p, l)?;
    let mut t = Table::new(["L", "layers", "window_start", "gge_even", "gge_odd", "avg_even", "avg_odd"]);
    let (avg_e, avg_o) = if layers == 0 {
        (Cell::Empty, Cell::Empty)
    } else {
        let tr = momentum_block_evolve_allzero(&p, l, layers)?;
        let n = (layers - start + 1) as f64;
        let mean = |v: &[f64]| v[start..=layers].iter().sum::<f64>() / n;
        (Cell::F(mean(&tr.sz_even)), Cell::F(mean(&tr.sz_odd)))
    };
    t.push(vec![
        Cell::I(l as i64),
        Cell::I(layers as i64),
        Cell::I(start as i64),
        Cell::F(ge),
        Cell::F(go),
        avg_e,
        avg_o,
    ]);
    t.meta("params", p);
    t.meta("sectors", &data.sectors);
    Ok(t)
}
