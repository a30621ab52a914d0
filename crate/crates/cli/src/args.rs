//! Command-line grammar.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use ecap_core::C64;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ecap", version, about = "Fundamental solutions, L-oscillations, localization and capacity estimates for planar elliptic operators")]
pub struct Cli {
    /// Worker threads (overrides ECAP_THREADS).
    #[arg(long, global = true, value_parser = parse_threads)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Characteristic roots, root case and k₁ of an operator.
    Roots(OpArgs),
    /// Fundamental solution, its characteristic gradient and kernels at a point.
    Phi(PhiArgs),
    /// L-oscillation of a grid function over a disc.
    Osc(OscArgs),
    /// Curvature energy of a point measure.
    Curv(MeasureArgs),
    /// Curvature lower bound for the capacity of a point measure.
    Cap(MeasureArgs),
    /// Localized pieces on a δ-partition and their Laurent coefficients.
    Localize(LocalizeArgs),
    /// Oscillation/capacity ratio scan over a disc family.
    Scan(ScanArgs),
    /// Seeded Swiss-cheese mask.
    Cheese(CheeseArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OpArgs {
    /// Coefficients "c11,c12,c22" as complex literals, e.g. "1,0,1".
    #[arg(long, value_parser = parse_op)]
    pub op: [C64; 3],
}

#[derive(Debug, Args, Serialize)]
pub struct PhiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub op: OpArgs,
    /// Evaluation point, e.g. "0.25+0.25i".
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub z: C64,
}

#[derive(Debug, Args, Serialize)]
pub struct OscArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub op: OpArgs,
    /// Grid function JSON.
    #[arg(long = "f")]
    pub f: PathBuf,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub center: C64,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = ecap_core::oscillation::DEFAULT_N_BOUNDARY)]
    pub n_boundary: usize,
    #[arg(long, default_value_t = ecap_core::oscillation::DEFAULT_N_RADIAL)]
    pub n_radial: usize,
    /// Also evaluate the ψ-weighted form ∬ψ𝓛f.
    #[arg(long)]
    pub psi: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureArgs {
    /// Point-measure CSV with header "x,y,w".
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LocalizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub op: OpArgs,
    #[arg(long = "f")]
    pub f: PathBuf,
    #[arg(long)]
    pub delta: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = ecap_core::localization::DEFAULT_M_MAX)]
    pub m_max: usize,
    /// Also write every nonzero piece as a grid function.
    #[arg(long)]
    pub write_pieces: bool,
    /// Report the reconstruction error ‖Σf_j − f‖∞ / ‖f‖∞.
    #[arg(long)]
    pub check: bool,
    /// Mask PGM of X; adds capacity-normalized coefficient ratios per cell.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// G_j = B(a_j, (k+2)δ) \ X.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Far-field annuli start at k4 times the support radius.
    #[arg(long, default_value_t = ecap_core::localization::DEFAULT_K4)]
    pub k4: f64,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("center_source").required(true).args(["centers", "center_step"])))]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub op: OpArgs,
    #[arg(long = "f")]
    pub f: PathBuf,
    /// Mask PGM (its JSON sidecar must sit next to it).
    #[arg(long)]
    pub mask: PathBuf,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', required = true)]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Explicit centers separated by ';', e.g. "0+0i;0.1-0.2i".
    #[arg(long, value_delimiter = ';', value_parser = parse_complex, allow_hyphen_values = true, conflicts_with = "center_step")]
    pub centers: Vec<C64>,
    /// Lattice step for centers taken inside the set.
    #[arg(long)]
    pub center_step: Option<f64>,
    /// Keep only lattice centers with B(a, k·max r) inside the set.
    #[arg(long, requires = "center_step")]
    pub deep: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub zero_tol: f64,
    /// A in ω(r) = A·ω(∇f, r).
    #[arg(long, default_value_t = 1.0)]
    pub omega_scale: f64,
    /// Label recorded in the report (default: input file stem).
    #[arg(long)]
    pub function_id: Option<String>,
    /// Output directory for report.json and heatmap.svg.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CheeseArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub holes: usize,
    #[arg(long, default_value_t = 0.1)]
    pub hole_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, value_parser = parse_complex, default_value = "0", allow_hyphen_values = true)]
    pub center: C64,
    #[arg(long, default_value_t = 1.0 / 256.0)]
    pub spacing: f64,
    /// Output PGM; the sidecar is written with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_threads(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("thread count must be an integer ≥ 1, got {s:?}")),
    }
}

/// Splits a decimal `digits[.digits]` prefix off `s`.
fn decimal(s: &str) -> Option<(&str, &str)> {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i == 0 {
        return None;
    }
    if i < b.len() && b[i] == b'.' {
        let j = i + 1;
        i = j;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == j {
            return None;
        }
    }
    Some(s.split_at(i))
}

/// Complex literal: optional sign, decimal real part, optional signed
/// decimal imaginary part suffixed `i` (or a lone imaginary part); no whitespace.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let bad = || format!("invalid complex literal {s:?} (expected e.g. \"0.25+0.25i\")");
    let (neg, rest) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (re_txt, rest) = decimal(rest).ok_or_else(bad)?;
    let mut re: f64 = re_txt.parse().map_err(|_| bad())?;
    if neg {
        re = -re;
    }
    match rest {
        "" => return Ok(C64::new(re, 0.0)),
        "i" => return Ok(C64::new(0.0, re)),
        _ => {}
    }
    let (sign, rest) = match rest.as_bytes()[0] {
        b'+' => (1.0, &rest[1..]),
        b'-' => (-1.0, &rest[1..]),
        _ => return Err(bad()),
    };
    let (im_txt, tail) = decimal(rest).ok_or_else(bad)?;
    if tail != "i" {
        return Err(bad());
    }
    Ok(C64::new(re, sign * im_txt.parse::<f64>().map_err(|_| bad())?))
}

pub fn parse_op(s: &str) -> Result<[C64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("operator needs three coefficients \"c11,c12,c22\", got {s:?}"));
    }
    Ok([parse_complex(parts[0])?, parse_complex(parts[1])?, parse_complex(parts[2])?])
}
