use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photonlab::rate_theory::PlanckConvention;
use photonlab::HistogramMode;
use photonlab_cli::commands::{self, simulate::DETECTED_FILE};
use photonlab_cli::{CliError, PipelineConfig};

// stdout may be a closed pipe (`photonlab ... | head`); that is not an error
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "photonlab", version, about = "Photon-statistics experiments: simulate, correlate, fit")]
struct Cli {
    /// Pipeline configuration (JSON); defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script next to each plot-ready CSV.
    #[arg(long, global = true)]
    gnuplot_stub: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the emitter and detection chain and write both streams.
    Simulate {
        #[arg(long)]
        duration_s: Option<f64>,
    },
    /// Coincidence histogram, g² normalization and dip fit of a stream.
    G2 {
        /// Two-channel stream CSV (default: detected stream in the output directory).
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        hist: HistogramArgs,
    },
    /// Simulated pump-intensity sweep and saturation fit.
    Saturation,
    /// Six-setting polarization tomography from `setting,intensity` CSV.
    Tomo {
        #[arg(long)]
        input: PathBuf,
    },
    /// Linear-analyzer scan fit from `theta_deg,intensity` CSV.
    PolarScan {
        #[arg(long)]
        input: PathBuf,
    },
    /// Rate-equation saturation power and reference comparisons.
    Theory {
        #[arg(long)]
        planck: Option<PlanckConvention>,
        /// Geometry preset: appendix or geometric.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Print the resolved configuration.
    Config,
}

#[derive(Debug, Args)]
struct HistogramArgs {
    /// Pair counting: all-pairs or start-stop.
    #[arg(long)]
    mode: Option<HistogramMode>,
    /// Bin width in ps.
    #[arg(long)]
    bin_ps: Option<u64>,
    /// Largest delay in ps.
    #[arg(long)]
    tau_max_ps: Option<i64>,
    /// Histogram negative delays too.
    #[arg(long)]
    signed: bool,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match &cli.command {
        Command::Simulate { duration_s: Some(d) } => cfg.duration_s = *d,
        Command::G2 { hist, .. } => {
            if let Some(m) = hist.mode {
                cfg.histogram.mode = m;
            }
            if let Some(b) = hist.bin_ps {
                cfg.histogram.bin_width_ps = b;
            }
            if let Some(t) = hist.tau_max_ps {
                cfg.histogram.tau_max_ps = t;
            }
            cfg.histogram.signed |= hist.signed;
        }
        Command::Theory { planck, preset } => {
            if let Some(p) = planck {
                cfg.theory.planck_convention = *p;
            }
            if let Some(p) = preset {
                cfg.theory.geometry_preset = p.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list(files: &[PathBuf]) {
    for f in files {
        say!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    let out = cfg.output_dir.clone();
    let stub = cli.gnuplot_stub;
    match cli.command {
        Command::Simulate { .. } => {
            let w = commands::cmd_simulate(&cfg, &out)?;
            list(&w.files);
            let r = &w.results;
            say!(
                "emitted {} photons ({:.4e}/s, expected {:.4e}/s); detected {} + {}",
                r.emitted_photons, r.emission_rate_per_s, r.expected_emission_rate_per_s, r.detected_counts[0], r.detected_counts[1]
            );
        }
        Command::G2 { input, .. } => {
            let input = input.unwrap_or_else(|| out.join(DETECTED_FILE));
            let w = commands::cmd_g2(&cfg, &input, &out, stub)?;
            list(&w.files);
            let f = &w.results.fit;
            say!("g2(0) = {:.4} +/- {:.4}", f.fit.g2_0.value, f.fit.g2_0.std_error);
            if let Some(d) = f.dip_width_ns {
                say!("dip width 2/k = {:.4} +/- {:.4} ns", d.value, d.std_error);
            }
            say!("{}", f.verdict);
        }
        Command::Saturation => {
            let w = commands::cmd_saturation(&cfg, &out, stub)?;
            list(&w.files);
            let r = &w.results;
            say!(
                "I_sat = {:.4e} +/- {:.2e} W/m^2 (generated {:.4e}); P_sat = {:.4e} W{}",
                r.fit.i_sat.value,
                r.fit.i_sat.std_error,
                r.truth.i_sat_w_per_m2,
                r.saturation_power_w.value,
                if r.fit.no_knee { " [knee not resolved]" } else { "" }
            );
        }
        Command::Tomo { input } => {
            let w = commands::cmd_tomo(&cfg, &input, &out)?;
            list(&w.files);
            let r = &w.results;
            say!(
                "s = ({:.4}, {:.4}, {:.4}), |s| = {:.4}, fidelity to mixed = {:.5}",
                r.stokes.s1, r.stokes.s2, r.stokes.s3, r.degree_of_polarization, r.fidelity_to_maximally_mixed
            );
        }
        Command::PolarScan { input } => {
            let w = commands::cmd_polar_scan(&cfg, &input, &out, stub)?;
            list(&w.files);
            let r = &w.results;
            say!(
                "s1 = {:.5}, s2 = {:.5}, modulation depth = {:.5}, maximum at {:.2} deg",
                r.fit.s1.value, r.fit.s2.value, r.fit.modulation_depth.value, r.max_angle_deg
            );
        }
        Command::Theory { .. } => {
            let w = commands::cmd_theory(&cfg, &out)?;
            list(&w.files);
            let r = &w.results;
            say!("P_sat = {:.4e} W ({:?} convention)", r.p_sat_w, r.planck_convention);
            say!("{}", r.discrepancy_note);
            say!(
                "geometric power at {:.3e} W/m^2 = {:.4e} W ({:.4} x reference)",
                r.intensity_w_per_m2, r.geometric_power_w, r.geometric_over_reference_measured
            );
        }
        Command::Config => {
            say!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
