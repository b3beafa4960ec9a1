//! Command-line driver for the unit-sphere convergence benchmark.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use surface_stokes::levelset::{Geometry, LevelSet};
use surface_stokes::study::{run_study, write_tsv, Preset, RhoSpec, StudyConfig};

/// Trace FEM solver for the surface Stokes problem in stream-function
/// formulation: convergence studies on the unit sphere.
#[derive(Parser, Debug)]
#[command(name = "surface-stokes", version)]
struct Args {
    /// Experiment preset: standard, rho_sweep, normal_compare, kp2.
    #[arg(long, default_value = "standard")]
    preset: Preset,

    /// Refinement level range "A..B" (inclusive); mesh size h = 0.6 * 2^-L.
    #[arg(long, default_value = "0..4", value_parser = parse_levels)]
    levels: (usize, usize),

    /// Stream-function/vorticity degree (1 or 2).
    #[arg(long)]
    k: Option<usize>,

    /// Velocity component degree.
    #[arg(long)]
    ku: Option<usize>,

    /// Pressure degree.
    #[arg(long)]
    kp: Option<usize>,

    /// Normal degree in the velocity right-hand side (2 improved, 1 facet).
    #[arg(long)]
    kg: Option<usize>,

    /// Stream stabilization: "0", "h", "1", "1/h", or a literal real.
    #[arg(long)]
    rho: Option<RhoSpec>,

    /// Velocity stabilization, same grammar as --rho.
    #[arg(long = "rho-u")]
    rho_u: Option<RhoSpec>,

    /// Pressure stabilization, same grammar as --rho.
    #[arg(long = "rho-p")]
    rho_p: Option<RhoSpec>,

    /// Output TSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Dump the discrete surface at the finest level as OBJ.
    #[arg(long = "dump-surface")]
    dump_surface: Option<PathBuf>,

    /// Relative residual tolerance of the linear solves.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn parse_levels(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected 'A..B', got '{s}'"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("invalid level '{a}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("invalid level '{b}'"))?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok((a, b))
}

fn build_config(args: &Args) -> StudyConfig {
    let mut config = StudyConfig::preset(args.preset, args.levels.0, args.levels.1);
    config.tol = args.tol;
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(rho) = args.rho {
        config.rho = rho;
    }
    for v in &mut config.variants {
        if let Some(ku) = args.ku {
            v.ku = ku;
        }
        if let Some(kp) = args.kp {
            v.kp = kp;
        }
        if let Some(kg) = args.kg {
            v.kg = kg;
        }
        if let Some(rho_u) = args.rho_u {
            v.rho_u = rho_u;
        }
        if let Some(rho_p) = args.rho_p {
            v.rho_p = rho_p;
        }
    }
    config
}

fn main() -> Result<()> {
    let args = Args::parse();
    if let Some(k) = args.k {
        if !(1..=2).contains(&k) {
            bail!("--k must be 1 or 2");
        }
    }
    for (name, v) in [("--ku", args.ku), ("--kp", args.kp), ("--kg", args.kg)] {
        if let Some(v) = v {
            if !(1..=2).contains(&v) {
                bail!("{name} must be 1 or 2");
            }
        }
    }

    if let Some(path) = &args.dump_surface {
        let geom = Geometry::build(&LevelSet::sphere(), args.levels.1)
            .context("surface extraction failed")?;
        let mut out = BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        geom.dump_obj(&mut out).context("OBJ dump failed")?;
    }

    let config = build_config(&args);
    let rows = run_study(&config)?;

    match &args.out {
        Some(path) => {
            let mut out = BufWriter::new(
                File::create(path)
                    .with_context(|| format!("cannot create {}", path.display()))?,
            );
            write_tsv(&rows, &mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write_tsv(&rows, &mut out)?;
        }
    }
    Ok(())
}
