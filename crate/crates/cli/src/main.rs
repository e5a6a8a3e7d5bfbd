//! `fermibrick`: reproducible, config-driven runs of the brick-wall circuit analyses.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 internal-consistency failure.

mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{set, RunConfig};
use error::CliError;
use output::{write_atomic, Format, Table};

#[derive(Debug, Parser)]
#[command(name = "fermibrick", version, about = "Free-fermion brick-wall circuit analyses")]
struct Cli {
    /// Run configuration (key = value lines with [section] headers); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for scans (default: all cores).
    #[arg(long, global = true, env = "FERMIBRICK_THREADS")]
    threads: Option<usize>,

    /// Output file (written atomically); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// csv | json
    #[arg(long, global = true)]
    format: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Unitarity, matchgate structure and free-fermion exponent of one gate.
    GateCheck(GateArgs),
    /// Dispersion of the θ → 0 Hamiltonian H_γ (optionally perturbed).
    DispersionH(DispersionHArgs),
    /// One-particle quasi-energies of the circuit unitary.
    DispersionU(DispersionUArgs),
    /// Winding-number phase diagram over (δ, ε).
    PhaseDiagram(PhaseArgs),
    /// Critical angle where a zero crossing reaches k = π/2.
    ThetaCritical(PlaneArgs),
    /// Magnetization dynamics after a product-state quench.
    Quench(QuenchArgs),
    /// GGE equilibrium of the all-0 quench against the exact time average.
    Gge(GgeArgs),
    /// Seeded oracle suite.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GateCheck(_) => "gate-check",
            Command::DispersionH(_) => "dispersion-h",
            Command::DispersionU(_) => "dispersion-u",
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::ThetaCritical(_) => "theta-critical",
            Command::Quench(_) => "quench",
            Command::Gge(_) => "gge",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args)]
struct PlaneArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
}

impl PlaneArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.params.alpha, self.alpha);
        set(&mut c.params.gamma, self.gamma);
    }
}

#[derive(Debug, Args)]
struct GateArgs {
    #[command(flatten)]
    plane: PlaneArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

impl GateArgs {
    fn apply(self, c: &mut RunConfig) {
        self.plane.apply(c);
        set(&mut c.params.theta, self.theta);
    }
}

#[derive(Debug, Args)]
struct DispersionHArgs {
    #[command(flatten)]
    plane: PlaneArgs,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps2: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    k_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k_max: Option<f64>,
    /// Emit the unfolded one-site Kitaev band over [−π, π] (γ = 0 only).
    #[arg(long)]
    unfolded: bool,
}

impl DispersionHArgs {
    fn apply(self, c: &mut RunConfig) {
        self.plane.apply(c);
        set(&mut c.params.delta, self.delta);
        set(&mut c.params.eps1, self.eps1);
        set(&mut c.params.eps2, self.eps2);
        set(&mut c.grid.points, self.points);
        set(&mut c.grid.k_min, self.k_min);
        set(&mut c.grid.k_max, self.k_max);
        if self.unfolded {
            c.grid.unfolded = Some(true);
        }
    }
}

#[derive(Debug, Args)]
struct DispersionUArgs {
    #[command(flatten)]
    gate: GateArgs,
    /// Scale of the a₁₂ amplitude (1 keeps the fermionic symmetry).
    #[arg(long)]
    t_a: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

impl DispersionUArgs {
    fn apply(self, c: &mut RunConfig) {
        self.gate.apply(c);
        set(&mut c.params.t_a, self.t_a);
        set(&mut c.grid.points, self.points);
    }
}

#[derive(Debug, Args)]
struct PhaseArgs {
    #[command(flatten)]
    plane: PlaneArgs,
    #[arg(long, allow_hyphen_values = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_max: Option<f64>,
    #[arg(long)]
    delta_n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    eps_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps_max: Option<f64>,
    #[arg(long)]
    eps_n: Option<usize>,
    /// equal (ε₁ = ε₂) | opposite (ε₁ = −ε₂)
    #[arg(long)]
    eps_mode: Option<String>,
    /// Brillouin-zone sampling points.
    #[arg(long)]
    zone_grid: Option<usize>,
}

impl PhaseArgs {
    fn apply(self, c: &mut RunConfig) {
        self.plane.apply(c);
        let g = &mut c.grid;
        set(&mut g.delta_min, self.delta_min);
        set(&mut g.delta_max, self.delta_max);
        set(&mut g.delta_n, self.delta_n);
        set(&mut g.eps_min, self.eps_min);
        set(&mut g.eps_max, self.eps_max);
        set(&mut g.eps_n, self.eps_n);
        set(&mut g.eps_mode, self.eps_mode);
        set(&mut g.zone_grid, self.zone_grid);
    }
}

#[derive(Debug, Args)]
struct QuenchArgs {
    #[command(flatten)]
    gate: GateArgs,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// pbc | obc
    #[arg(long)]
    boundary: Option<String>,
    /// 1-based site of a single occupied seed.
    #[arg(long)]
    seed_site: Option<usize>,
    /// covariance | momentum
    #[arg(long)]
    method: Option<String>,
    /// heatmap | trace
    #[arg(long)]
    kind: Option<String>,
}

impl QuenchArgs {
    fn apply(self, c: &mut RunConfig) {
        self.gate.apply(c);
        set(&mut c.lattice.l, self.l);
        set(&mut c.lattice.layers, self.layers);
        set(&mut c.lattice.boundary, self.boundary);
        set(&mut c.lattice.seed_site, self.seed_site);
        set(&mut c.lattice.method, self.method);
        set(&mut c.output.kind, self.kind);
    }
}

#[derive(Debug, Args)]
struct GgeArgs {
    #[command(flatten)]
    gate: GateArgs,
    #[arg(long = "L")]
    l: Option<usize>,
    /// Layers of exact evolution to average (0 skips the comparison).
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    window_start: Option<usize>,
}

impl GgeArgs {
    fn apply(self, c: &mut RunConfig) {
        self.gate.apply(c);
        set(&mut c.lattice.l, self.l);
        set(&mut c.lattice.layers, self.layers);
        set(&mut c.lattice.window_start, self.window_start);
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// quick | full
    #[arg(long)]
    level: Option<String>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl VerifyArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.verify.level, self.level);
        set(&mut c.lattice.l, self.l);
        set(&mut c.verify.seed, self.seed);
    }
}

fn apply(cmd: Command, c: &mut RunConfig) {
    match cmd {
        Command::GateCheck(a) => a.apply(c),
        Command::DispersionH(a) => a.apply(c),
        Command::DispersionU(a) => a.apply(c),
        Command::PhaseDiagram(a) => a.apply(c),
        Command::ThetaCritical(a) => a.apply(c),
        Command::Quench(a) => a.apply(c),
        Command::Gge(a) => a.apply(c),
        Command::Verify(a) => a.apply(c),
    }
}

fn emit(table: &Table, cfg: &RunConfig, format: Format) -> Result<(), CliError> {
    let text = table.render(format);
    match &cfg.output.path {
        Some(path) => {
            write_atomic(path, &text)?;
            // CSV carries data only; the run metadata goes to a JSON sidecar.
            if format == Format::Csv && !table.meta.is_empty() {
                let mut meta_path = path.clone().into_os_string();
                meta_path.push(".meta.json");
                let meta = serde_json::to_string_pretty(&table.meta).expect("json serializes") + "\n";
                write_atomic(std::path::Path::new(&meta_path), &meta)?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.output.path, cli.out);
    set(&mut cfg.output.format, cli.format);
    if let Some(cmd) = cli.command {
        cfg.command = Some(cmd.name().to_string());
        apply(cmd, &mut cfg);
    }
    let format: Format = cfg.output.format.as_deref().unwrap_or("csv").parse()?;

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }

    let command = cfg
        .command
        .clone()
        .ok_or_else(|| CliError::Usage("no subcommand given (on the command line or as `command` in --config)".into()))?;
    let table = match command.as_str() {
        "gate-check" => commands::gate_check(&cfg)?,
        "dispersion-h" => commands::dispersion_h(&cfg)?,
        "dispersion-u" => commands::dispersion_u(&cfg)?,
        "phase-diagram" => commands::phase_diagram(&cfg)?,
        "theta-critical" => {
            let (tc, table) = commands::theta_crit(&cfg)?;
            if cfg.output.path.is_none() && format == Format::Csv {
                println!("{tc}");
                return Ok(());
            }
            table
        }
        "quench" => commands::quench(&cfg)?,
        "gge" => commands::gge(&cfg)?,
        "verify" => verify::verify(&cfg)?,
        other => return Err(CliError::Usage(format!("unknown command '{other}'"))),
    };
    emit(&table, &cfg, format)?;
    match table.meta.get("failed").and_then(|v| v.as_array()) {
        Some(failed) if !failed.is_empty() => Err(CliError::Check(
            failed.iter().filter_map(|v| v.as_str()).collect::<Vec<_>>().join(", "),
        )),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
