//! `ellhol`: checkers and tables for theta functions, level-one characters, holonomies and
//! determinants.

mod commands;
mod cplx;
mod report;
mod selftest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ellhol::affine::LevelOneRep;
use ellhol::elliptic::Pairing;
use num_complex::Complex64 as C64;

use crate::cplx::{parse_c64, parse_cvec, parse_rvec};
use crate::report::Format;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_CONTRACT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "ellhol", version, about = "Theta functions, level-one characters, holonomies and determinants")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// seed for randomized commands
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// run the built-in property suite and exit nonzero on any violation
    #[arg(long)]
    pub selftest: bool,
    #[command(subcommand)]
    pub cmd: Option<Cmd>,
}

/// A comma-separated complex vector as one argument value.
#[derive(Clone, Debug)]
pub struct CVec(pub Vec<C64>);

fn cvec_arg(s: &str) -> Result<CVec, String> {
    parse_cvec(s).map(CVec)
}

#[derive(Clone, Debug)]
pub struct RVec(pub Vec<f64>);

fn rvec_arg(s: &str) -> Result<RVec, String> {
    parse_rvec(s).map(RVec)
}

fn rep_arg(s: &str) -> Result<LevelOneRep, String> {
    s.parse().map_err(|e: ellhol::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Transform {
    #[value(name = "T", alias = "t")]
    T,
    #[value(name = "S", alias = "s")]
    S,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EisCheck {
    Quasimodular,
    Modular,
    Periodic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PairingArg {
    Flipped,
    Unflipped,
    /// flipped pairing plus the unflipped negative control
    Check,
}

impl PairingArg {
    pub fn primary(self) -> Pairing {
        match self {
            Self::Unflipped => Pairing::Unflipped,
            _ => Pairing::Flipped,
        }
    }
}

#[derive(Args, Debug)]
pub struct ThetaArgs {
    /// characteristic bits, e.g. 11
    #[arg(long)]
    pub ij: String,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub z: C64,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: C64,
}

#[derive(Args, Debug)]
pub struct EtaArgs {
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: C64,
    #[arg(long, value_enum)]
    pub check_transform: Option<Transform>,
}

#[derive(Args, Debug)]
pub struct EisensteinArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: C64,
    #[arg(long, value_enum)]
    pub check: Option<EisCheck>,
    /// use the non-holomorphic completion (k = 2 only)
    #[arg(long)]
    pub hat: bool,
}

#[derive(Args, Debug)]
pub struct CharArgs {
    #[arg(long, value_parser = rep_arg)]
    pub rep: LevelOneRep,
    #[arg(long)]
    pub l: usize,
    /// Cartan coordinates, comma-separated; defaults to 0
    #[arg(long, value_parser = cvec_arg, allow_hyphen_values = true)]
    pub z: Option<CVec>,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: Option<C64>,
    /// q-expansion rows up to this truncation order
    #[arg(long)]
    pub qexpand: Option<i64>,
    /// compare the anomaly-shifted expansion with the free-fermion dimensions
    #[arg(long, requires = "qexpand")]
    pub against_fock: bool,
    /// print the modular anomaly only
    #[arg(long)]
    pub anomaly: bool,
}

#[derive(Args, Debug)]
pub struct AwArgs {
    /// LoopConnection JSON file
    #[arg(long = "loop")]
    pub loop_file: String,
    /// number of random gauge-equivalent variants (needs --seed)
    #[arg(long)]
    pub gauge_orbit: Option<usize>,
    /// amplitude of the random gauge profiles
    #[arg(long, default_value_t = 0.25)]
    pub gauge_scale: f64,
}

#[derive(Args, Debug)]
pub struct EawArgs {
    #[arg(long, value_parser = rep_arg)]
    pub rep: LevelOneRep,
    #[arg(long)]
    pub l: usize,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: C64,
    /// explicit Cartan points (repeatable); otherwise --samples random points from --seed
    #[arg(long, value_parser = cvec_arg, allow_hyphen_values = true)]
    pub z: Vec<CVec>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = PairingArg::Flipped)]
    pub spin_pairing: PairingArg,
}

#[derive(Args, Debug)]
pub struct ZetadetArgs {
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub z: C64,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: C64,
    /// spin structure bits, e.g. 11
    #[arg(long)]
    pub spin: String,
}

#[derive(Args, Debug)]
pub struct EholArgs {
    /// TorusField JSON file
    #[arg(long)]
    pub field: String,
    #[arg(long, value_parser = rep_arg)]
    pub rep: LevelOneRep,
}

#[derive(Args, Debug)]
pub struct DegenerateArgs {
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub z: C64,
    /// largest Im tau; rows at Im tau = 1, 2, 4, ... up to this value
    #[arg(long, default_value_t = 8.0)]
    pub tmax: f64,
}

#[derive(Args, Debug)]
pub struct BchArgs {
    /// BChInput JSON file
    #[arg(long)]
    pub input: String,
    /// diagonal grading entries (+1/-1), comma-separated
    #[arg(long, value_parser = rvec_arg, allow_hyphen_values = true)]
    pub grading: Option<RVec>,
}

#[derive(Args, Debug)]
pub struct WittenArgs {
    #[arg(long)]
    pub l: usize,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub tau: C64,
    /// degree cap of the formal series
    #[arg(long = "D", default_value_t = 6)]
    pub degree: usize,
    /// power of eta in the denominator; defaults to 2l
    #[arg(long)]
    pub eta_power: Option<i32>,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// theta_ij(z, tau) by its sum form, cross-checked against the product form
    Theta(ThetaArgs),
    /// Dedekind eta, optionally with a modular transformation check
    Eta(EtaArgs),
    /// normalized Eisenstein series G_k
    Eisenstein(EisensteinArgs),
    /// level-one characters, q-expansions and modular anomalies
    Char(CharArgs),
    /// circle Atiyah-Witten identity for a loop in so(2n)
    Aw(AwArgs),
    /// elliptic Atiyah-Witten ratio over Cartan points
    Eaw(EawArgs),
    /// torus determinant: closed form and Epstein zeta side
    Zetadet(ZetadetArgs),
    /// elliptic holonomy of an abelian torus field
    Ehol(EholArgs),
    /// q -> 0 degeneration of q^{-1/12} theta_11 / eta
    Degenerate(DegenerateArgs),
    /// Bismut-Chern character of a loop with curvature and B-field
    Bch(BchArgs),
    /// Witten-genus localization identity
    Witten(WittenArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = if cli.selftest {
        if cli.cmd.is_some() {
            Err(commands::Failure::usage("--selftest takes no subcommand"))
        } else {
            selftest::run(cli.format)
        }
    } else {
        match cli.cmd {
            Some(cmd) => commands::dispatch(cmd, cli.format, cli.seed),
            None => Err(commands::Failure::usage("no subcommand given")),
        }
    };
    match outcome {
        Ok(rep) => {
            let mut out = std::io::stdout().lock();
            if let Err(e) = rep.write(&mut out) {
                eprintln!("error: writing output: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
            if rep.ok() {
                ExitCode::SUCCESS
            } else {
                for c in rep.contracts.iter().filter(|c| !c.ok) {
                    eprintln!("contract violated: {} = {:e} (bound {:e})", c.name, c.value, c.bound);
                }
                ExitCode::from(EXIT_CONTRACT)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
