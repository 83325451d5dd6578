use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kernel_flow::complexity::{empirical_mendelson, population_mendelson};
use kernel_flow::entropy::{certify_lower_bound, DEFAULT_C2};
use kernel_flow::error::{Error, Result};
use kernel_flow::harness::emit::{self, Format};
use kernel_flow::harness::{eigen_gap_check, run_experiment, ExperimentConfig};
use kernel_flow::kernels::{gram, KernelProfile, TaylorSeries};
use kernel_flow::rates::{gamma_grid, rate_table, RateFamily};
use kernel_flow::regression::{diagnostics, eigendecompose, fit_flow, predict, FlowTime};
use kernel_flow::seed::derive_seed;
use kernel_flow::spectrum::{build_spectrum, DEFAULT_TAIL_TOL};
use kernel_flow::sphere::{generate_dataset, make_target, sample_sphere};

#[derive(Parser)]
#[command(name = "kernel-flow", version, about = "Spectra, complexities and rate experiments for gradient-flow kernel regression on spheres")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write results into this directory instead of stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Output format (each command has its own default).
    #[arg(long, global = true)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Ntk2,
    Rbf,
    Taylor,
}

#[derive(Args)]
struct KernelOpts {
    #[arg(long, value_enum, default_value = "ntk2")]
    kernel: KernelArg,
    /// TOML or JSON file with `coeffs = [...]` (and optional `tail_bound`)
    /// for the taylor kernel.
    #[arg(long)]
    taylor_config: Option<PathBuf>,
}

impl KernelOpts {
    fn profile(&self) -> Result<KernelProfile> {
        match self.kernel {
            KernelArg::Ntk2 => Ok(KernelProfile::Ntk2),
            KernelArg::Rbf => Ok(KernelProfile::RbfSphere),
            KernelArg::Taylor => {
                let path = self
                    .taylor_config
                    .as_deref()
                    .ok_or_else(|| Error::InvalidArgument("--kernel taylor needs --taylor-config".into()))?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.to_path_buf(),
                    source: e,
                })?;
                let series: TaylorSeries = if path.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
                } else {
                    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
                };
                // re-validate through the checked constructor
                Ok(KernelProfile::Taylor(TaylorSeries::with_tail_bound(
                    series.coeffs().to_vec(),
                    series.tail_bound(),
                )?))
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mercer eigenvalues and multiplicities (CSV).
    Spectrum {
        #[command(flatten)]
        kernel: KernelOpts,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
        tail_tol: f64,
    },
    /// Population or empirical Mendelson fixed point (JSON).
    Complexity {
        #[command(flatten)]
        kernel: KernelOpts,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Use the eigenvalues of a sampled Gram matrix.
        #[arg(long)]
        empirical: bool,
    },
    /// Theoretical rate exponents over a grid of gamma (CSV or SVG).
    Rates {
        /// inner, ntk, interpolation or all.
        #[arg(long, default_value = "all")]
        family: String,
        #[arg(long, default_value_t = 0.1)]
        gamma_min: f64,
        #[arg(long, default_value_t = 8.0)]
        gamma_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Fit the gradient flow on one synthetic dataset (JSON).
    Fit {
        #[command(flatten)]
        kernel: KernelOpts,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// A flow time, `auto` (empirical Mendelson stopping time) or `inf`.
        #[arg(long, default_value = "auto")]
        t: String,
        #[arg(long, default_value_t = 1.0)]
        noise_sd: f64,
        #[arg(long, default_value_t = 3)]
        n_anchors: usize,
        #[arg(long, default_value_t = 1000)]
        test_size: usize,
    },
    /// Run a rate experiment from a TOML config (CSV table, JSON summary, SVG plot).
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical eigen-gap chain at n = round(d^gamma) (JSON).
    Gapcheck {
        #[command(flatten)]
        kernel: KernelOpts,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: usize,
        /// Number of seeds, derived from --seed.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Evaluate the entropy lower-bound condition (JSON).
    Certify {
        #[command(flatten)]
        kernel: KernelOpts,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_C2)]
        c2: f64,
    },
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn emit(&self, name: &str, format: Format, contents: &str) -> Result<()> {
        match &self.dir {
            Some(dir) => {
                let path = dir.join(format!("{name}.{}", format.extension()));
                emit::write_file(&path, contents)?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
            None => {
                let mut out = std::io::stdout().lock();
                let tail = if contents.ends_with('\n') { "" } else { "\n" };
                match out.write_all(contents.as_bytes()).and_then(|_| out.write_all(tail.as_bytes())) {
                    // a closed pipe (`| head`) is not an error
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
                        path: "<stdout>".into(),
                        source: e,
                    }),
                    _ => Ok(()),
                }
            }
        }
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.emit(name, Format::Json, &emit::to_json(value)?)
    }
}

fn only(format: Format, allowed: &[Format], command: &str) -> Result<Format> {
    if allowed.contains(&format) {
        Ok(format)
    } else {
        Err(Error::InvalidArgument(format!(
            "{command} does not produce {} output",
            format.extension()
        )))
    }
}

#[derive(Serialize)]
struct FitReport {
    /// A number, or "inf" for interpolation.
    t_used: serde_json::Value,
    train_residual: f64,
    excess_risk: f64,
    bias_sq: f64,
    variance: f64,
    ill_conditioned: bool,
}

fn run(cli: Cli) -> Result<()> {
    let out = Output { dir: cli.out_dir };
    let format = cli.format.map(Format::from);
    let seed = cli.seed;
    match cli.command {
        Command::Spectrum { kernel, d, tail_tol } => {
            only(format.unwrap_or(Format::Csv), &[Format::Csv], "spectrum")?;
            let s = build_spectrum(&kernel.profile()?, d, tail_tol)?;
            out.emit("spectrum", Format::Csv, &emit::spectrum_csv(&s))
        }
        Command::Complexity { kernel, d, n, sigma, empirical } => {
            only(format.unwrap_or(Format::Json), &[Format::Json], "complexity")?;
            let profile = kernel.profile()?;
            let sol = if empirical {
                let sample = sample_sphere(d, n, derive_seed(seed, &[d as u64, n as u64]))?;
                empirical_mendelson(&eigendecompose(&gram(&profile, &sample, true))?, sigma)?
            } else {
                population_mendelson(&build_spectrum(&profile, d, DEFAULT_TAIL_TOL)?, n, sigma)?
            };
            out.json("complexity", &sol)
        }
        Command::Rates { family, gamma_min, gamma_max, step } => {
            let fmt = only(format.unwrap_or(Format::Csv), &[Format::Csv, Format::Svg], "rates")?;
            let families: Vec<RateFamily> = if family == "all" {
                RateFamily::ALL.to_vec()
            } else {
                vec![family.parse()?]
            };
            let table = rate_table(&gamma_grid(gamma_min, gamma_max, step)?, &families);
            // one line per family: the interpolation curve alone skips every gamma <= 1
            for f in &families {
                let skipped: Vec<f64> = table.errors.iter().filter(|e| e.1 == *f).map(|e| e.0).collect();
                if let (Some(first), Some(last)) = (skipped.first(), skipped.last()) {
                    let reason = &table.errors.iter().find(|e| e.1 == *f).unwrap().2;
                    eprintln!(
                        "skipped {} gamma values in [{first}, {last}] for {}: {reason}",
                        skipped.len(),
                        f.as_str()
                    );
                }
            }
            match fmt {
                Format::Svg => out.emit("rates", fmt, &emit::rates_svg(&table.points)),
                _ => out.emit("rates", fmt, &emit::rate_table_csv(&table.points)),
            }
        }
        Command::Fit { kernel, d, n, t, noise_sd, n_anchors, test_size } => {
            only(format.unwrap_or(Format::Json), &[Format::Json], "fit")?;
            let profile = kernel.profile()?;
            let train = sample_sphere(d, n, derive_seed(seed, &[0]))?;
            let target = make_target(profile.clone(), d, n_anchors, derive_seed(seed, &[1]))?;
            let data = generate_dataset(&target, train, noise_sd, derive_seed(seed, &[2]))?;
            let eigen = eigendecompose(&gram(&profile, &data.sample, true))?;
            let time = if t == "auto" {
                FlowTime::Finite(empirical_mendelson(&eigen, noise_sd)?.stopping_time)
            } else {
                t.parse()?
            };
            let fit = fit_flow(&eigen, &data.responses, time)?;
            let diag = diagnostics(&eigen, &data.responses, &data.f_star, time)?;
            let test = sample_sphere(d, test_size, derive_seed(seed, &[3]))?;
            let pred = predict(&fit, &profile, &data.sample, &test)?;
            let report = FitReport {
                t_used: match time {
                    FlowTime::Finite(t) => t.into(),
                    FlowTime::Infinite => "inf".into(),
                },
                train_residual: fit
                    .train_predictions
                    .iter()
                    .zip(&data.responses)
                    .map(|(p, y)| (p - y).powi(2))
                    .sum::<f64>()
                    / n as f64,
                excess_risk: kernel_flow::regression::excess_risk(&pred, &target, &test)?,
                bias_sq: diag.bias_sq,
                variance: diag.variance,
                ill_conditioned: fit.ill_conditioned,
            };
            out.json("fit", &report)
        }
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let table = run_experiment(&cfg)?;
            let csv = emit::risk_table_csv(&table)?;
            let summary = emit::summary(&table);
            match (&out.dir, format) {
                (Some(_), None) => {
                    out.emit("risk_table", Format::Csv, &csv)?;
                    out.json("summary", &summary)?;
                    out.emit("risk", Format::Svg, &emit::risk_svg(&table))
                }
                (_, Some(Format::Csv)) => out.emit("risk_table", Format::Csv, &csv),
                (_, Some(Format::Svg)) => out.emit("risk", Format::Svg, &emit::risk_svg(&table)),
                _ => out.json("summary", &summary),
            }
        }
        Command::Gapcheck { kernel, gamma, d, p, seeds } => {
            only(format.unwrap_or(Format::Json), &[Format::Json], "gapcheck")?;
            let seeds: Vec<u64> = (0..seeds).map(|i| derive_seed(seed, &[i])).collect();
            out.json("gapcheck", &eigen_gap_check(&kernel.profile()?, gamma, d, p, &seeds)?)
        }
        Command::Certify { kernel, d, n, sigma, c2 } => {
            only(format.unwrap_or(Format::Json), &[Format::Json], "certify")?;
            let spectrum = build_spectrum(&kernel.profile()?, d, DEFAULT_TAIL_TOL)?;
            out.json("certify", &certify_lower_bound(&spectrum.weighted(), n, sigma, c2)?)
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
