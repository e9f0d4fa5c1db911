use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use primal_hybrid::driver::{run_convergence, run_properties, CaseSpec, RunConfig, DEFAULT_EPS, DEFAULT_MU1};
use primal_hybrid::global::SolverKind;
use primal_hybrid::mesh::Domain;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DomainArg {
    Square,
    Lshape,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Cg,
    Direct,
}

#[derive(Debug, Parser)]
#[command(name = "primal-hybrid", about = "Hybrid finite elements for the 2D vector Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence table as CSV (stdout, or --out)
    Converge(Options),
    /// Structural property suites; exit code 1 on any failure
    Properties(Options),
}

#[derive(Debug, clap::Args)]
struct Options {
    #[arg(long, value_enum, default_value = "square")]
    domain: DomainArg,
    /// smooth | harmonic:<q> | curlpow:<q>; q may be a fraction or n+eps
    #[arg(long, default_value = "smooth")]
    case: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    k: Vec<usize>,
    #[arg(long = "N", value_delimiter = ',', default_value = "4,8,16,32")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MU1)]
    mu1: f64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, value_enum, default_value = "direct")]
    solver: SolverArg,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Assembly quadrature degree (default 4k+2)
    #[arg(long)]
    quad_degree: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Options {
    fn config(&self) -> Result<RunConfig, primal_hybrid::Error> {
        Ok(RunConfig {
            domain: match self.domain {
                DomainArg::Square => Domain::Square,
                DomainArg::Lshape => Domain::LShape,
            },
            case: self.case.parse::<CaseSpec>()?,
            ks: self.k.clone(),
            ns: self.n.clone(),
            alpha: self.alpha,
            mu1: self.mu1,
            eps: self.eps,
            solver: match self.solver {
                SolverArg::Cg => SolverKind::Cg,
                SolverArg::Direct => SolverKind::Direct,
            },
            tol: self.tol,
            quad_degree: self.quad_degree,
            out: self.out.clone(),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let (opts, properties) = match &cli.command {
        Command::Converge(o) => (o, false),
        Command::Properties(o) => (o, true),
    };
    let config = match opts.config().and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if properties {
        match run_properties(&config) {
            Ok(rep) => {
                print!("{}", rep.render());
                if rep.all_passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        }
    } else {
        match run_convergence(&config) {
            Ok(table) => {
                if config.out.is_none() {
                    print!("{}", table.to_csv());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        }
    }
}
