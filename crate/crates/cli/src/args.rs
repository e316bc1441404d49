use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::CliError;

/// Single-excitation quantum optics of emitters in flat-band lattices.
///
/// Every flag may also be given in a JSON file passed with `--config`; keys
/// are the long flag names (e.g. "scan-delta"), and a nested "lattice"
/// object in the lattice-spec format is accepted too. Flags on the command
/// line override the file. The worker count for scans is read from
/// FLATQED_WORKERS (default: all cores).
#[derive(Debug, Parser)]
#[command(name = "flatqed", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bloch bands on the lattice's k-grid: k_1[,k_2],band_index,energy.
    Bands(BandsArgs),
    /// Bound state of one emitter: cell_index[,cell_index_2],sublattice,re,im,abs.
    Boundstate(BoundstateArgs),
    /// Localization length of the bound state over a detuning scan.
    Loclen(LoclenArgs),
    /// Flat-band weight function ξ(Δn), or λ(α) with --lambda.
    Xi(XiArgs),
    /// Photon-mediated interaction matrix K, or spin dynamics with --t-max.
    Interactions(InteractionsArgs),
    /// Giant atoms coupled to compact localized states.
    Giants(GiantsArgs),
    /// Exact single-excitation dynamics: t,atom_index,population.
    Dynamics(DynamicsArgs),
    /// Flat-band fate under disorder, one row per seed.
    Disorder(DisorderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pole {
    Bare,
    Exact,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with flag values (command-line flags take precedence).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file; standard output if omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// sawtooth | stub | doublecomb | kagome1d | checkerboard | chain | cavity
    #[arg(long)]
    pub model: String,
    /// Unit cells: N, or Nx,Ny for checkerboard.
    #[arg(long = "N", value_name = "N", default_value = "100")]
    pub n: String,
    /// Hopping energy J.
    #[arg(long = "J", value_name = "J", default_value_t = 1.0, allow_negative_numbers = true)]
    pub j: f64,
    /// Stub a–b hopping ratio Δ (required for stub).
    #[arg(long = "Delta", value_name = "DELTA")]
    pub delta_param: Option<f64>,
    /// Double-comb tooth hopping t (default J).
    #[arg(long = "t", value_name = "T")]
    pub t: Option<f64>,
    /// Tooth / cavity frequency ω_c (default 0).
    #[arg(long = "omega-c", allow_negative_numbers = true)]
    pub omega_c: Option<f64>,
    /// diagonal | off-diagonal
    #[arg(long)]
    pub disorder_kind: Option<String>,
    /// Disorder strength W (uniform on [−W, W]).
    #[arg(long, alias = "disorder")]
    pub disorder_strength: Option<f64>,
    /// Disorder seed (first seed for `disorder`).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EmitterArgs {
    /// Emitter site "sublattice:cell", e.g. a:50 or a:3,4; repeatable.
    #[arg(long)]
    pub site: Vec<String>,
    /// Coupling strength g.
    #[arg(long, default_value_t = 1e-3)]
    pub g: f64,
    /// Bare emitter frequency ω₀.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "delta")]
    pub omega0: Option<f64>,
    /// Detuning from the reference energy: the flat band, the chain's upper
    /// band edge 2|J|, or the cavity frequency.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Emitters JSON file (alternative to --site).
    #[arg(long, value_name = "FILE")]
    pub emitters: Option<PathBuf>,
    /// Inline emitters JSON (set from a config file's "emitters" array).
    #[arg(long, hide = true)]
    pub emitters_inline: Option<String>,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BoundstateArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub emitter: EmitterArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct LoclenArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub emitter: EmitterArgs,
    /// Detuning scan "start:stop:lin|log:count".
    #[arg(long)]
    pub scan_delta: Option<String>,
    #[arg(long, value_enum, default_value_t = Axis::X)]
    pub axis: Axis,
    /// Smallest fitted distance in cells.
    #[arg(long, default_value_t = 2)]
    pub d_min: usize,
    /// Largest fitted distance in cells (default N/4).
    #[arg(long)]
    pub d_max: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct XiArgs {
    /// CLS overlap α.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Scan of α "start:stop:lin|log:count".
    #[arg(long)]
    pub scan_alpha: Option<String>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: u8,
    /// Largest |Δn| (along x in 2D).
    #[arg(long, default_value_t = 10)]
    pub max_dist: usize,
    /// Add the closed form and the absolute difference.
    #[arg(long)]
    pub compare: bool,
    /// Emit λ_1D, λ_2D, λ′_2D per α instead of ξ.
    #[arg(long)]
    pub lambda: bool,
    /// Brillouin-zone points per axis (default 16384 in 1D, 1024 in 2D).
    #[arg(long)]
    pub nk: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SpinArgs {
    /// Evolve the spin model up to this time instead of printing K.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of time steps after t = 0.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Initially excited emitter.
    #[arg(long, default_value_t = 0)]
    pub initial: usize,
}

#[derive(Debug, Args)]
pub struct InteractionsArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub emitter: EmitterArgs,
    #[arg(long, value_enum, default_value_t = Pole::Bare)]
    pub pole: Pole,
    #[command(flatten)]
    pub spin: SpinArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct GiantsArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// CLS cell of a giant, e.g. 10 or 3,4; repeatable.
    #[arg(long)]
    pub cell: Vec<String>,
    /// One giant on every cell.
    #[arg(long, conflicts_with = "cell")]
    pub all_cells: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub g: f64,
    /// Detuning from the flat band.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.05)]
    pub delta: f64,
    #[command(flatten)]
    pub spin: SpinArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[command(flatten)]
    pub emitter: EmitterArgs,
    #[arg(long, default_value_t = 1000.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Initially excited emitter.
    #[arg(long, default_value_t = 0)]
    pub initial: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DisorderArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

const SUBCOMMANDS: [&str; 8] = ["bands", "boundstate", "loclen", "xi", "interactions", "giants", "dynamics", "disorder"];

/// Splices the flags of a `--config` file into `argv` right after the
/// subcommand, so that later command-line occurrences override them.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let path = argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_owned)
        }
    });
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("reading {path}: {e}")))?;
    let json: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let Value::Object(map) = json else {
        return Err(CliError::Config(format!("{path}: expected a JSON object")));
    };
    let mut tokens = Vec::new();
    let mut subcommand = None;
    for (key, value) in map {
        match key.as_str() {
            "subcommand" => subcommand = Some(scalar(&key, &value)?),
            "lattice" => lattice_tokens(&value, &mut tokens)?,
            "emitters" => {
                tokens.push("--emitters-inline".into());
                tokens.push(value.to_string());
            }
            _ => push_flag(&key, &value, &mut tokens)?,
        }
    }
    let mut out = argv;
    let pos = out.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.as_str())).map(|p| p + 1);
    let pos = match (pos, subcommand) {
        (Some(p), _) => p,
        (None, Some(s)) => {
            out.insert(1, s);
            1
        }
        (None, None) => return Ok(out),
    };
    out.splice(pos + 1..pos + 1, tokens);
    Ok(out)
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => Ok(items.iter().map(|x| scalar(key, x)).collect::<Result<Vec<_>, _>>()?.join(",")),
        _ => Err(CliError::Config(format!("config key {key:?}: unsupported value {v}"))),
    }
}

fn push_flag(key: &str, v: &Value, tokens: &mut Vec<String>) -> Result<(), CliError> {
    match v {
        Value::Bool(true) => tokens.push(format!("--{key}")),
        Value::Bool(false) | Value::Null => {}
        // repeatable flags such as "site": ["a:1", "a:2"]
        Value::Array(items) if items.iter().all(|x| x.is_string()) => {
            for x in items {
                tokens.push(format!("--{key}"));
                tokens.push(scalar(key, x)?);
            }
        }
        _ => {
            tokens.push(format!("--{key}"));
            tokens.push(scalar(key, v)?);
        }
    }
    Ok(())
}

fn lattice_tokens(v: &Value, tokens: &mut Vec<String>) -> Result<(), CliError> {
    let Value::Object(map) = v else {
        return Err(CliError::Config("config \"lattice\" must be an object".into()));
    };
    for (key, value) in map {
        match key.as_str() {
            "model" | "N" | "J" => push_flag(key, value, tokens)?,
            "params" => {
                let Value::Object(p) = value else {
                    return Err(CliError::Config("lattice params must be an object".into()));
                };
                for (pk, pv) in p {
                    let flag = if pk == "omega_c" { "omega-c" } else { pk.as_str() };
                    push_flag(flag, pv, tokens)?;
                }
            }
            "disorder" => {
                let Value::Object(d) = value else {
                    return Err(CliError::Config("lattice disorder must be an object".into()));
                };
                for (dk, dv) in d {
                    let flag = match dk.as_str() {
                        "kind" => "disorder-kind",
                        "strength" => "disorder-strength",
                        other => other,
                    };
                    push_flag(flag, dv, tokens)?;
                }
            }
            other => return Err(CliError::Config(format!("unknown lattice key {other:?}"))),
        }
    }
    Ok(())
}
