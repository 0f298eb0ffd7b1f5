//! Command-line surface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::checks::invariant_checks;
use crate::config::RunConfig;
use crate::csvio;
use crate::error::{Error, Result};
use crate::generators::{build_exposures, gen_er_network, interbank_weight};
use crate::model::{asset_losses, ExposureSystem, LossVector};
use crate::montecarlo::{find_d_opt, sweep};
use crate::partition::{all_boundary_segments, census, find_all_fail_witness, ClipRect};
use crate::rng::{derive_stream, StreamRole};

#[derive(Debug, Parser)]
#[command(
    name = "contagion",
    version,
    about = "Interbank contagion and systemic-cost simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected-cost sweep over the connectivity and diversification grids.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured worker count.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Solve the cascade for one system and loss vector.
    Cascade {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        l: PathBuf,
        #[arg(long)]
        v: PathBuf,
    },
    /// Region census and boundary lines for a small system.
    Partition {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Holdings matrix; a random system is generated when omitted.
        #[arg(long, requires = "l")]
        x: Option<PathBuf>,
        #[arg(long, requires = "x")]
        l: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        d: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a random exposure system.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite; exits non-zero on any failure.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RunConfig::parse(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        }
    }
}

/// Files written by a command; removed again if the command fails.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn discard(self) {
        for path in self.written {
            let _ = fs::remove_file(path);
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn generate_system(cfg: &RunConfig, p: f64, d: f64, seed: u64) -> Result<ExposureSystem> {
    let params = &cfg.params;
    if params.n_assets != params.n_banks {
        return Err(Error::param(
            "n_assets",
            "portfolio generation needs n_assets = n_banks",
        ));
    }
    let mut net_rng = derive_stream(seed, 0, 0, 0, StreamRole::Network);
    let graph = gen_er_network(params.n_banks, p, &mut net_rng)?;
    let w = interbank_weight(p, params.w_max, params.weight_shape)?;
    let mut port_rng = derive_stream(seed, 0, 0, 0, StreamRole::Portfolio);
    let weights = cfg
        .portfolio_generator()?
        .generate(params.n_assets, d, &mut port_rng)?;
    build_exposures(&graph, w, params.eta, &weights)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(f64::to_string).collect();
    format!("({})", parts.join(","))
}

fn run_sweep(
    cfg: &RunConfig,
    out_dir: &Path,
    outputs: &mut Outputs,
    out: &mut dyn Write,
) -> Result<()> {
    let sweep_cfg = cfg.sweep_config()?;
    let table = sweep(&sweep_cfg)?;
    ensure_dir(out_dir)?;
    outputs.write(out_dir.join("sweep.csv"), &csvio::format_sweep_csv(&table))?;
    for &s in &cfg.params.s_list {
        outputs.write(
            out_dir.join(csvio::heatmap_file_name(s)),
            &csvio::format_heatmap_csv(&table, s),
        )?;
    }
    for &p in &cfg.p_grid {
        let d_opts: Vec<String> = cfg
            .params
            .s_list
            .iter()
            .map(|&s| find_d_opt(&table, p, s).map(|d| format!("S={s}: {d}")))
            .collect::<Result<_>>()?;
        writeln!(out, "p = {p}: D_opt {}", d_opts.join(", ")).ok();
    }
    writeln!(
        out,
        "wrote {} rows to {}",
        table.rows.len(),
        out_dir.display()
    )
    .ok();
    Ok(())
}

fn run_cascade(cfg: &RunConfig, x: &Path, l: &Path, v: &Path, out: &mut dyn Write) -> Result<()> {
    let sys = ExposureSystem::new(csvio::read_matrix(x)?, csvio::read_matrix(l)?)?;
    if sys.n_assets() != cfg.params.n_assets || sys.n_banks() != cfg.params.n_banks {
        writeln!(
            out,
            "note: system is {}×{}, config says {}×{}",
            sys.n_banks(),
            sys.n_assets(),
            cfg.params.n_banks,
            cfg.params.n_assets
        )
        .ok();
    }
    let v_mat = csvio::read_matrix(v)?;
    let v_raw: Vec<f64> = v_mat.iter_rows().flatten().copied().collect();
    let v = LossVector::new(v_raw)?;
    let lfp = crate::model::cascade_lfp(&sys, &v)?;
    let gfp = crate::model::cascade_gfp(&sys, &v)?;
    let y = asset_losses(&sys, &v, &lfp)?;
    writeln!(out, "Y = {}", fmt_vec(&y)).ok();
    writeln!(out, "lfp = {lfp}").ok();
    writeln!(out, "gfp = {gfp}").ok();
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_partition(
    cfg: &RunConfig,
    out_dir: &Path,
    x: Option<&Path>,
    l: Option<&Path>,
    p: f64,
    d: f64,
    seed: u64,
    outputs: &mut Outputs,
    out: &mut dyn Write,
) -> Result<()> {
    let sys = match (x, l) {
        (Some(x), Some(l)) => ExposureSystem::new(csvio::read_matrix(x)?, csvio::read_matrix(l)?)?,
        _ => generate_system(cfg, p, d, seed)?,
    };
    let grid = crate::partition::GridSpec::uniform(
        sys.n_assets(),
        cfg.census_lo,
        cfg.census_hi,
        cfg.census_resolution,
    );
    let c = census(&sys, &grid, cfg.census_budget)?;
    ensure_dir(out_dir)?;
    outputs.write(out_dir.join("census.csv"), &csvio::format_census_csv(&c))?;
    if sys.n_assets() == 2 {
        let rect = ClipRect::square(cfg.census_lo, cfg.census_hi);
        let segs = all_boundary_segments(&sys, &rect)?;
        outputs.write(
            out_dir.join("boundaries.csv"),
            &csvio::format_boundary_csv(&segs),
        )?;
    } else {
        writeln!(out, "boundary export skipped: needs exactly two assets").ok();
    }
    writeln!(
        out,
        "signatures = {}, multi-behavior = {}",
        c.n_signatures(),
        c.n_multi
    )
    .ok();
    match find_all_fail_witness(&sys, &cfg.witness_search()) {
        Some(v) => writeln!(out, "all-fail witness: v = {}", fmt_vec(v.as_slice())).ok(),
        None => writeln!(out, "all-fail witness: none found").ok(),
    };
    Ok(())
}

fn run_gen(
    cfg: &RunConfig,
    p: f64,
    d: f64,
    seed: u64,
    out_dir: &Path,
    outputs: &mut Outputs,
    out: &mut dyn Write,
) -> Result<()> {
    let sys = generate_system(cfg, p, d, seed)?;
    ensure_dir(out_dir)?;
    outputs.write(out_dir.join("X.txt"), &csvio::format_matrix(sys.holdings()))?;
    outputs.write(out_dir.join("L.txt"), &csvio::format_matrix(sys.loans()))?;
    writeln!(out, "wrote X.txt and L.txt to {}", out_dir.display()).ok();
    Ok(())
}

fn run_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let mut all_ok = true;
    for (name, check) in invariant_checks().iter() {
        match check(cfg) {
            Ok(msg) => writeln!(out, "PASS {name}: {msg}").ok(),
            Err(msg) => {
                all_ok = false;
                writeln!(out, "FAIL {name}: {msg}").ok()
            }
        };
    }
    Ok(all_ok)
}

/// Runs one invocation, writing reports to `out` and errors to `err`.
/// Returns the process exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            if code == 0 {
                write!(out, "{rendered}").ok();
            } else {
                write!(err, "{rendered}").ok();
            }
            return code;
        }
    };
    let mut outputs = Outputs::default();
    let result = dispatch(cli.command, &mut outputs, out);
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            outputs.discard();
            writeln!(err, "error: {e}").ok();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                writeln!(err, "  caused by: {s}").ok();
                source = s.source();
            }
            1
        }
    }
}

fn dispatch(command: Command, outputs: &mut Outputs, out: &mut dyn Write) -> Result<bool> {
    match command {
        Command::Sweep {
            config,
            out: dir,
            threads,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let dir = dir.unwrap_or_else(|| cfg.out_dir.clone());
            run_sweep(&cfg, &dir, outputs, out)?;
        }
        Command::Cascade { config, x, l, v } => {
            let cfg = load_config(config.as_deref())?;
            run_cascade(&cfg, &x, &l, &v, out)?;
        }
        Command::Partition {
            config,
            out: dir,
            x,
            l,
            p,
            d,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            let dir = dir.unwrap_or_else(|| cfg.out_dir.clone());
            let seed = seed.unwrap_or(cfg.master_seed);
            run_partition(
                &cfg,
                &dir,
                x.as_deref(),
                l.as_deref(),
                p,
                d,
                seed,
                outputs,
                out,
            )?;
        }
        Command::Gen {
            config,
            d,
            seed,
            p,
            out: dir,
        } => {
            let cfg = load_config(config.as_deref())?;
            let dir = dir.unwrap_or_else(|| cfg.out_dir.clone());
            run_gen(&cfg, p, d, seed, &dir, outputs, out)?;
        }
        Command::Validate { config } => {
            let cfg = load_config(config.as_deref())?;
            return run_validate(&cfg, out);
        }
    }
    Ok(true)
}

/// Entry point for the binary: parses `argv` and reports to stdout/stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}
