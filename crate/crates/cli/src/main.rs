use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergoshift::estimators::{CoordinatePermutation, Method};
use ergoshift::transport::{FreePathLaw, PAPER_LAMBDAS};
use ergoshift_cli::commands::{self, IntegrateArgs, RuinArgs, TransportArgs};
use ergoshift_cli::{CliError, Common, Format, Output};

#[derive(Parser, Debug)]
#[command(name = "ergoshift", version, about = "Shift, Monte Carlo and quasi-Monte Carlo estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate mean splittings and right-side exits of the branching particle.
    Transport {
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Shift)]
        method: MethodArg,
        #[command(flatten)]
        tree: TreeOpts,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// MC versus shift comparison over a λ grid.
    Table {
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',', default_values_t = PAPER_LAMBDAS.to_vec())]
        lambda: Vec<f64>,
        #[arg(long = "lambda-as", value_enum, default_value_t = LawArg::Mean)]
        law: LawArg,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Duration and hit-top probability of the gambler's-ruin walk.
    MarkovRuin {
        #[arg(long = "states", default_value_t = 4)]
        n_states: u64,
        #[arg(long, default_value_t = 2)]
        start: u64,
        #[arg(long = "p-up", default_value_t = 0.5)]
        p_up: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Shift)]
        method: MethodArg,
        #[arg(long, default_value_t = ergoshift::markov::DEFAULT_CAP)]
        cap: u64,
        #[arg(long = "max-truncated-fraction", default_value_t = 0.01)]
        max_truncated_fraction: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Integrate a built-in function over the unit cube.
    Integrate {
        #[arg(long)]
        function: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_enum, default_value_t = MethodArg::Shift)]
        method: MethodArg,
        /// Coordinate permutation as comma-separated 1-based indices.
        #[arg(long, value_parser = parse_perm)]
        perm: Option<CoordinatePermutation>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Print the first uniforms of a seed, 17 significant digits per line.
    RngTest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
    },
}

#[derive(Args, Debug)]
struct CommonOpts {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 500_000)]
    samples: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    memo: Switch,
    /// Batch length for the batch-means variance (default ⌈√samples⌉).
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct TreeOpts {
    #[arg(long = "lambda-as", value_enum, default_value_t = LawArg::Mean)]
    law: LawArg,
    #[arg(long = "max-depth", default_value_t = 64)]
    max_depth: u32,
    #[arg(long = "max-particles", default_value_t = 1_000_000)]
    max_particles: u64,
    #[arg(long = "max-truncated-fraction", default_value_t = 0.01)]
    max_truncated_fraction: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Mc,
    Shift,
    Qmc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LawArg {
    Mean,
    Rate,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mc => Method::Mc,
            MethodArg::Shift => Method::Shift,
            MethodArg::Qmc => Method::Qmc,
        }
    }
}

impl From<LawArg> for FreePathLaw {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Mean => FreePathLaw::Mean,
            LawArg::Rate => FreePathLaw::Rate,
        }
    }
}

impl From<CommonOpts> for Common {
    fn from(c: CommonOpts) -> Self {
        Common {
            seed: c.seed,
            samples: c.samples,
            format: match c.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            },
            memo: matches!(c.memo, Switch::On),
            batch_size: c.batch_size,
        }
    }
}

fn parse_perm(s: &str) -> Result<CoordinatePermutation, String> {
    s.parse().map_err(|e: ergoshift::EstimateError| e.to_string())
}

fn run(command: Command) -> Result<Output, CliError> {
    match command {
        Command::Transport {
            lambda,
            method,
            tree,
            common,
        } => {
            let args = TransportArgs {
                lambda,
                law: tree.law.into(),
                method: method.into(),
                max_depth: tree.max_depth,
                max_particles: tree.max_particles,
                max_truncated_fraction: tree.max_truncated_fraction,
            };
            commands::cmd_transport(&args, &common.into())
        }
        Command::Table { lambda, law, common } => commands::cmd_table(&lambda, law.into(), &common.into()),
        Command::MarkovRuin {
            n_states,
            start,
            p_up,
            method,
            cap,
            max_truncated_fraction,
            common,
        } => {
            let args = RuinArgs {
                n_states,
                start,
                p_up,
                method: method.into(),
                cap,
                max_truncated_fraction,
            };
            commands::cmd_markov_ruin(&args, &common.into())
        }
        Command::Integrate {
            function,
            dim,
            method,
            perm,
            common,
        } => {
            let args = IntegrateArgs {
                function,
                dim,
                method: method.into(),
                perm,
            };
            commands::cmd_integrate(&args, &common.into())
        }
        Command::RngTest { seed, count } => commands::cmd_rng_test(seed, count),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(out.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
