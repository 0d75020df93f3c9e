use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dheac::netgen::{generate_network, NetworkConfig, Request};
use dheac_cli::config::{Chi, Mode, SweepSpec};
use dheac_cli::fairness::FairnessOptions;
use dheac_cli::verify::VerifyOptions;
use dheac_cli::{breakeven, fairness, mc, sweep, verify, write_outputs, CliError, OutputFile, Result};

const FIGURE_MAP: &str = "\
Data behind each plot:
  latency vs m, latency-ratio heatmaps     dheac sweep [--mode both] [--svg]
  throughput break-even map over (m, q)    dheac breakeven [--svg]
  Jain index vs skew / vs demand           dheac fairness   -> jain_vs_skew.csv, jain_vs_demand.csv
  Jain heatmap over (m, s) at demand 0.4   dheac fairness --svg -> fairness_heatmap.csv
  per-node win-probability ECDF            dheac fairness   -> ecdf_m16_d0.4_s*.csv
  quantum encoding check                   dheac verify-quantum --caps 3,3,3,3 --k-req 4
  raw Monte-Carlo trials                   dheac mc --m 8 --skew 1 --demand 0.4 --q 0.05

Exit codes: 0 ok, 2 usage, 3 resource shortage, 4 verification failure, 5 I/O error.";

#[derive(Parser)]
#[command(name = "dheac", version, about = "Two-layer entanglement access control simulator", after_help = FIGURE_MAP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and Monte-Carlo metrics at every grid point.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// What to compute at each point.
        #[arg(long, value_enum)]
        mode: Option<SweepMode>,
    },
    /// Jain-index tables, the (m, s) heatmap and node-probability ECDFs.
    Fairness {
        #[command(flatten)]
        grid: GridArgs,
        /// Network size for the skew and demand curves.
        #[arg(long, default_value_t = 16)]
        curve_m: usize,
        #[arg(long, default_value_t = 0.40)]
        heatmap_demand: f64,
        #[arg(long, default_value_t = 16)]
        ecdf_m: usize,
        #[arg(long, default_value_t = 0.40)]
        ecdf_demand: f64,
    },
    /// THR_B2 / THR_D over the (m, q) plane for one (skew, demand) slice.
    Breakeven {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1.0)]
        at_skew: f64,
        #[arg(long, default_value_t = 0.40)]
        at_demand: f64,
    },
    /// Builds the embedded winner/quota state and tests its measurement statistics.
    VerifyQuantum {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.10)]
        beta: f64,
        #[arg(long, default_value_t = 0.01)]
        significance: f64,
        /// Also write the report to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Per-trial Monte-Carlo dump for one network point.
    Mc {
        #[command(flatten)]
        point: PointArgs,
        /// Loss probability per delivery attempt.
        #[arg(long, default_value_t = 0.05)]
        q: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ChiArg::Both)]
        chi: ChiArg,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Analytic,
    Mc,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChiArg {
    Optimistic,
    Conservative,
    Both,
}

impl ChiArg {
    fn modes(self) -> Vec<Chi> {
        match self {
            ChiArg::Optimistic => vec![Chi::Optimistic],
            ChiArg::Conservative => vec![Chi::Conservative],
            ChiArg::Both => vec![Chi::Optimistic, Chi::Conservative],
        }
    }
}

#[derive(Args)]
struct ParamArgs {
    /// Delivery attempts per qubit before giving up (M).
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long)]
    t_gen: Option<f64>,
    #[arg(long)]
    t_dist: Option<f64>,
    #[arg(long)]
    t_meas: Option<f64>,
    /// Classical control latency per message.
    #[arg(long)]
    t_ctl: Option<f64>,
    /// Classical control rounds per QLAN for B2 (r).
    #[arg(long)]
    rounds: Option<f64>,
    /// Coverage margin for winner-count selection.
    #[arg(long)]
    beta: Option<f64>,
}

impl ParamArgs {
    fn apply(&self, spec: &mut SweepSpec) {
        let p = &mut spec.params;
        if let Some(v) = self.max_attempts {
            p.max_attempts = v;
        }
        for (dst, src) in [
            (&mut p.t_gen, self.t_gen),
            (&mut p.t_dist, self.t_dist),
            (&mut p.t_meas, self.t_meas),
            (&mut p.t_ctl, self.t_ctl),
            (&mut p.rounds, self.rounds),
            (&mut p.beta, self.beta),
        ] {
            if let Some(v) = src {
                *dst = v;
            }
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// TOML file with any SweepSpec fields; flags override it.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    demand: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    skew: Option<Vec<f64>>,
    /// Average QLAN size; total capacity is this times m.
    #[arg(long)]
    capacity_per_qlan: Option<usize>,
    /// Fixed total capacity for every m.
    #[arg(long)]
    total_capacity: Option<usize>,
    #[arg(long, value_enum)]
    chi: Option<ChiArg>,
    #[command(flatten)]
    params: ParamArgs,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also render SVG heatmaps.
    #[arg(long)]
    svg: bool,
}

impl GridArgs {
    fn resolve(&self) -> Result<SweepSpec> {
        let mut spec = match &self.grid {
            Some(path) => SweepSpec::load(path)?,
            None => SweepSpec::default(),
        };
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = &self.m {
            spec.m_values = v.clone();
        }
        if let Some(v) = &self.q {
            spec.q_values = v.clone();
        }
        if let Some(v) = &self.demand {
            spec.demand_values = v.clone();
        }
        if let Some(v) = &self.skew {
            spec.skew_values = v.clone();
        }
        if let Some(v) = self.capacity_per_qlan {
            spec.capacity_per_qlan = v;
        }
        if self.total_capacity.is_some() {
            spec.total_capacity = self.total_capacity;
        }
        if let Some(c) = self.chi {
            spec.chi = c.modes();
        }
        self.params.apply(&mut spec);
        Ok(spec)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(CliError::Usage("--workers must be >= 1".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
    }
}

/// A single network point: explicit capacities, or generated from (m, skew, total).
#[derive(Args)]
struct PointArgs {
    /// Explicit QLAN capacities, e.g. 3,3,3,3.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["m", "skew"])]
    caps: Option<Vec<usize>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    skew: f64,
    /// Total capacity for generated networks (default 10 m).
    #[arg(long)]
    total: Option<usize>,
    /// Requested node count.
    #[arg(long, conflicts_with = "demand")]
    k_req: Option<usize>,
    /// Requested fraction of all nodes.
    #[arg(long)]
    demand: Option<f64>,
}

impl PointArgs {
    fn resolve(&self) -> Result<(NetworkConfig, Request)> {
        let net = match (&self.caps, self.m) {
            (Some(caps), _) => NetworkConfig::from_caps(caps.clone(), 0.0)?,
            (None, Some(m)) => generate_network(m, self.skew, self.total.unwrap_or(10 * m))?,
            (None, None) => return Err(CliError::Usage("give --caps or --m".into())),
        };
        let req = match (self.k_req, self.demand) {
            (Some(k), _) => Request::new(k)?,
            (None, Some(d)) => Request::from_demand(d, net.total())?,
            (None, None) => return Err(CliError::Usage("give --k-req or --demand".into())),
        };
        Ok((net, req))
    }
}

fn emit(dir: &std::path::Path, files: &[OutputFile]) -> Result<()> {
    for path in write_outputs(dir, files)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { grid, mode } => {
            let mut spec = grid.resolve()?;
            if let Some(mode) = mode {
                spec.modes = match mode {
                    SweepMode::Analytic => vec![Mode::Analytic],
                    SweepMode::Mc => vec![Mode::Mc],
                    SweepMode::Both => vec![Mode::Analytic, Mode::Mc],
                };
            }
            let files = grid.pool()?.install(|| sweep::run(&spec, grid.svg))?;
            emit(&grid.out, &files)
        }
        Command::Fairness {
            grid,
            curve_m,
            heatmap_demand,
            ecdf_m,
            ecdf_demand,
        } => {
            let mut spec = grid.resolve()?;
            spec.modes = vec![Mode::Fairness];
            let opts = FairnessOptions {
                curve_m,
                heatmap_demand,
                ecdf_m,
                ecdf_demand,
            };
            let result = grid.pool()?.install(|| fairness::run(&spec, &opts, grid.svg))?;
            for w in &result.warnings {
                eprintln!("{w}");
            }
            emit(&grid.out, &result.files)
        }
        Command::Breakeven {
            grid,
            at_skew,
            at_demand,
        } => {
            let spec = grid.resolve()?;
            let result = grid
                .pool()?
                .install(|| breakeven::run(&spec, at_skew, at_demand, grid.svg))?;
            emit(&grid.out, &result.files)
        }
        Command::VerifyQuantum {
            point,
            draws,
            seed,
            beta,
            significance,
            out,
            corrupt,
        } => {
            let (net, req) = point.resolve()?;
            let opts = VerifyOptions {
                draws,
                seed,
                beta,
                significance,
                corrupt,
            };
            let report = verify::run(&net, &req, &opts)?;
            let text = report.render();
            print!("{text}");
            if let Some(dir) = out {
                emit(&dir, &[OutputFile::new("verify_report.txt", text)])?;
            }
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Verification(report.failures().join(", ")))
            }
        }
        Command::Mc {
            point,
            q,
            trials,
            seed,
            chi,
            params,
            out,
        } => {
            let (net, req) = point.resolve()?;
            if trials == 0 {
                return Err(CliError::Usage("trials must be >= 1".into()));
            }
            let mut spec = SweepSpec::default();
            params.apply(&mut spec);
            let model = spec.params.model(q);
            model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let result = mc::run(&net, &req, &model, &chi.modes(), trials, seed)?;
            for (c, s) in &result.summaries {
                eprintln!(
                    "{}: success {:.6} +- {:.6}, latency {:.4} ms",
                    dheac::analytics::Accounting::from(*c).name(),
                    s.success_rate,
                    s.success_se,
                    s.mean_latency
                );
            }
            emit(&out, &[result.file])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
