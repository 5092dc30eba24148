//! Command-line surface. Every subcommand's arguments serialize into the
//! `params` block of the run record.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "sglab", version, about = "Mean-field spin-glass numerics")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (SGLAB_WORKERS takes precedence).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Write the output here instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// JSON object of default flag values; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Include wall time in the record (breaks byte-for-byte reproducibility).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// The Parisi functional and its minimization.
    #[command(subcommand)]
    Parisi(ParisiCmd),
    /// Finite-N SK systems.
    #[command(subcommand)]
    Sk(SkCmd),
    /// Ruelle probability cascades.
    #[command(subcommand)]
    Rpc(RpcCmd),
    /// Random-link matching and TSP.
    #[command(subcommand)]
    Cavity(CavityCmd),
    /// Run the acceptance criteria.
    Acceptance {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub h: f64,
    /// Coefficients of the 1-, 2-, 3-, ... spin terms (default `0,1`: SK).
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub mixture: Vec<f64>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParisiCmd {
    /// Evaluate the functional at a step order parameter.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Atoms `q_0 < ... < q_r`.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        qs: Vec<f64>,
        /// CDF values on `[q_p, q_{p+1})`; the last must be 1.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        cdf: Vec<f64>,
        /// Grid spacing (default chosen from the model).
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Minimize over r-step order parameters.
    Minimize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// Replica-symmetric value at q, or its minimum over q.
    Rs {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        q: Option<f64>,
    },
    /// de Almeida-Thouless condition at the RS fixed point.
    Dat {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Bracket for the ground-state energy density.
    GroundState {
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SizeArgs {
    /// Spins.
    #[arg(long)]
    pub n: usize,
    /// Disorder samples.
    #[arg(long, default_value_t = 100)]
    pub m: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct McmcArgs {
    /// Use Metropolis chains instead of exact enumeration.
    #[arg(long)]
    pub mcmc: bool,
    #[arg(long, default_value_t = 8)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
    /// Replica-exchange temperatures.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Vec<f64>,
    #[arg(long, default_value_t = 1.1)]
    pub rhat_max: f64,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkCmd {
    /// `E log Z_N / N`.
    FreeEnergy {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        size: SizeArgs,
    },
    /// `E max H_N / (N sqrt 2)`.
    GroundState {
        #[command(flatten)]
        size: SizeArgs,
    },
    /// Overlap histogram (CSV with --format csv).
    Overlap {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        mcmc: McmcArgs,
    },
    /// Ghirlanda-Guerra residual.
    Gg {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        size: SizeArgs,
        /// Test function, e.g. `R12^2` or `I(R12>=0.4)*R13`.
        #[arg(long, default_value = "R12^2")]
        f: String,
        /// Replicas `f` depends on.
        #[arg(long, default_value_t = 2)]
        replicas: usize,
        #[arg(long, default_value_t = 2)]
        p: u32,
        /// Perturbation exponent (omit for no perturbation).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 4)]
        p_max: usize,
        /// Replica draws per disorder when `f` reads several overlaps.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Ultrametricity violation rate.
    Ultra {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        triples: usize,
        /// Use |R| instead of R.
        #[arg(long)]
        abs: bool,
    },
    /// Cavity increments `E log Z_{k+1} - E log Z_k` up to N.
    Cavity {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        size: SizeArgs,
    },
    /// Dean's problem: best split against a random one.
    Dean {
        #[command(flatten)]
        size: SizeArgs,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CascadeArgs {
    /// `zeta_0 < ... < zeta_{r-1}` in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7")]
    pub zetas: Vec<f64>,
    /// `q_0 < ... < q_r`.
    #[arg(long, value_delimiter = ',', default_value = "0,0.4,1")]
    pub qs: Vec<f64>,
    /// Children kept per node.
    #[arg(long, default_value_t = 256)]
    pub k: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RpcCmd {
    /// Build one cascade and report its weights.
    Build {
        #[command(flatten)]
        cascade: CascadeArgs,
        /// Largest leaf weights to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Overlap matrix of sampled leaves from one cascade.
    Sample {
        #[command(flatten)]
        cascade: CascadeArgs,
        #[arg(long, default_value_t = 4)]
        replicas: usize,
    },
    /// Monte Carlo cascade side of the Guerra bound.
    Guerra {
        #[command(flatten)]
        cascade: CascadeArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 4000)]
        m: usize,
    },
    /// Ghirlanda-Guerra residual on cascades.
    Gg {
        #[command(flatten)]
        cascade: CascadeArgs,
        #[arg(long, default_value = "R12^2")]
        f: String,
        #[arg(long, default_value_t = 2)]
        replicas: usize,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 5000)]
        m: usize,
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// Both sides of the invariance identity.
    Invariance {
        #[command(flatten)]
        cascade: CascadeArgs,
        #[arg(long, default_value = "I(R12=0)")]
        phi: String,
        /// `f_1;...;f_n` as functions of `x`.
        #[arg(long, value_delimiter = ';', default_value = "0.5*I(x>=0.4);0")]
        fs: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 5000)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        tuples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Matching,
    Tsp,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CavityCmd {
    /// Solve the integral equation (grid as CSV with --format csv).
    Solve {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long, default_value_t = 0.005)]
        spacing: f64,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
    },
    /// The limiting length constant.
    Constant {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
    },
    /// Monte Carlo means of exact optima.
    Empirical {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        m: usize,
    },
    /// Exact optimum of one random instance.
    Exact {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
    },
}
