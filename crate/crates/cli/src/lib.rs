//! The `onebit` command line: argument parsing, validation, dispatch and
//! output files. [`run`] returns the process exit code.

pub mod format;

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use onebit::channel::{mc_estimate, output_probabilities, ChannelParams, Quantizer, MIN_TRIALS};
use onebit::cue::{
    cue_coherent_radial, cue_noncoherent_radial, cue_percomponent_coherent, cue_percomponent_noncoherent,
    cue_symmetric_coherent, cue_symmetric_noncoherent, div_coherent_radial, div_noncoherent_radial,
    div_percomponent_coherent, div_percomponent_noncoherent, exp_bound, symmetric_coherent_ratio,
    unquantized_kl_bound, CueCase, CueResult,
};
use onebit::optimize::{log_grid, SweepSpec};
use onebit::quadrature::QuadratureSpec;
use onebit::verify::{self, mc_scenarios, scenario_seed, VerifyOptions};

use format::{sig12, Table};

/// Stable exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ASSERTION: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const USAGE: u8 = 64;
    pub const IO: u8 = 73;
}

const DEFAULT_MU: [f64; 5] = [0.5, 0.8, 0.9, 0.95, 0.99];
/// Relative size of the Marcum error injected by the self-test flag.
const SELF_TEST_PERTURBATION: f64 = 1e-3;
const MAX_AXIS_POINTS: usize = 10_000;

#[derive(Parser, Debug)]
#[command(name = "onebit", version, about = "Capacity per unit-energy with one-bit quantized outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximize divergence per unit energy for one channel/quantizer case.
    Cue(RunArgs),
    /// Tabulate the divergence over a grid of probe energies and thresholds.
    Sweep(RunArgs),
    /// Run the acceptance checks and print a pass/fail table.
    Verify(VerifyArgs),
    /// Compare analytic output probabilities with simulation.
    Mc(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// coherent-radial, noncoherent-radial, percomponent-coherent,
    /// percomponent-noncoherent, symmetric-coherent or symmetric-noncoherent.
    #[arg(long, value_parser = parse_case)]
    case: Option<CueCase>,
    /// Noise variance; grid defaults scale with it.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sigma_sq: f64,
    #[arg(long, allow_negative_numbers = true)]
    xi2_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xi2_max: Option<f64>,
    #[arg(long)]
    xi2_points: Option<usize>,
    /// Threshold axis: tau = T^2 for radial cases, T for per-component ones.
    #[arg(long, allow_negative_numbers = true)]
    tau_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau_max: Option<f64>,
    #[arg(long)]
    tau_points: Option<usize>,
    /// Threshold fractions for the cases with fading knowledge, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json for `cue`, text for `verify` and csv otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, hide = true)]
    self_test_perturb_marcum: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn parse_case(s: &str) -> Result<CueCase, String> {
    s.parse::<CueCase>().map_err(|e| e.to_string())
}

/// A failed run: exit code and message for standard error.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }
}

impl From<onebit::Error> for Failure {
    fn from(e: onebit::Error) -> Self {
        let code = match e {
            onebit::Error::Numerical(_) => exit::NUMERICAL,
            onebit::Error::Domain(_) | onebit::Error::Usage(_) => exit::USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Subcmd {
    Cue,
    Sweep,
    Verify,
    Mc,
}

/// Validated settings for one run.
#[derive(Debug)]
struct RunConfig {
    subcommand: Subcmd,
    case: Option<CueCase>,
    sigma_sq: f64,
    sweep: SweepSpec,
    quad: QuadratureSpec,
    mu: Vec<f64>,
    trials: u64,
    seed: u64,
    format: Option<Format>,
    perturb_marcum: bool,
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    fn new(subcommand: Subcmd, args: &RunArgs, perturb_marcum: bool) -> Result<Self, Failure> {
        positive("sigma-sq", args.sigma_sq)?;
        let base = SweepSpec::default().scaled(args.sigma_sq);
        let sweep = SweepSpec {
            xi2_min: args.xi2_min.unwrap_or(base.xi2_min),
            xi2_max: args.xi2_max.unwrap_or(base.xi2_max),
            xi2_points: args.xi2_points.unwrap_or(base.xi2_points),
            tau_min: args.tau_min.unwrap_or(base.tau_min),
            tau_max: args.tau_max.unwrap_or(base.tau_max),
            tau_points: args.tau_points.unwrap_or(base.tau_points),
            ..base
        };
        match subcommand {
            Subcmd::Cue => {
                sweep.validated()?;
            }
            Subcmd::Sweep => {
                sweep_axis("xi2", sweep.xi2_min, sweep.xi2_max, sweep.xi2_points, false)?;
                sweep_axis("tau", sweep.tau_min, sweep.tau_max, sweep.tau_points, true)?;
            }
            Subcmd::Verify | Subcmd::Mc => {}
        }
        let mu = if args.mu.is_empty() { DEFAULT_MU.to_vec() } else { args.mu.clone() };
        for &m in &mu {
            if !(m > 0.0 && m < 1.0) {
                return Err(Failure::usage(format!("--mu values must lie in (0, 1), got {m}")));
            }
        }
        if args.trials < MIN_TRIALS {
            return Err(Failure::usage(format!("--trials must be at least {MIN_TRIALS}, got {}", args.trials)));
        }
        let case = match (subcommand, args.case) {
            (Subcmd::Cue, None) => return Err(Failure::usage("cue needs --case")),
            (Subcmd::Sweep, None) => Some(CueCase::NoncoherentRadial),
            (_, c) => c,
        };
        Ok(Self {
            subcommand,
            case,
            sigma_sq: args.sigma_sq,
            sweep,
            quad: QuadratureSpec::default(),
            mu,
            trials: args.trials,
            seed: args.seed,
            format: args.format,
            perturb_marcum,
        })
    }

    fn metadata(&self) -> Vec<(&'static str, String)> {
        let mut m = vec![("sigma_sq", sig12(self.sigma_sq)), ("seed", self.seed.to_string())];
        if let Some(c) = self.case {
            m.insert(0, ("case", c.name().to_string()));
        }
        let s = &self.sweep;
        match self.subcommand {
            Subcmd::Cue | Subcmd::Sweep => {
                m.push(("xi2", format!("{}:{}:{}", sig12(s.xi2_min), sig12(s.xi2_max), s.xi2_points)));
                m.push(("tau", format!("{}:{}:{}", sig12(s.tau_min), sig12(s.tau_max), s.tau_points)));
                let mu: Vec<String> = self.mu.iter().map(|&v| sig12(v)).collect();
                m.push(("mu", mu.join(" ")));
            }
            Subcmd::Mc => m.push(("trials", self.trials.to_string())),
            Subcmd::Verify => {}
        }
        m
    }
}

/// One sweep axis: a single point when `points == 1` (then `min == max`,
/// and zero is allowed where `allow_zero`), else a log grid on `0 < min < max`.
fn sweep_axis(name: &str, lo: f64, hi: f64, points: usize, allow_zero: bool) -> Result<Vec<f64>, Failure> {
    if points == 0 || points > MAX_AXIS_POINTS {
        return Err(Failure::usage(format!(
            "--{name}-points must be between 1 and {MAX_AXIS_POINTS}, got {points}"
        )));
    }
    if points == 1 {
        let ok_value = lo.is_finite() && (lo > 0.0 || (allow_zero && lo == 0.0));
        if lo != hi || !ok_value {
            return Err(Failure::usage(format!(
                "a one-point --{name} axis needs --{name}-min = --{name}-max{}, got [{lo}, {hi}]",
                if allow_zero { " >= 0" } else { " > 0" }
            )));
        }
        return Ok(vec![lo]);
    }
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Failure::usage(format!(
            "--{name} grid bounds must satisfy 0 < min < max, got [{lo}, {hi}]"
        )));
    }
    Ok(log_grid(lo, hi, points))
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Results go to `--out` or `stdout`; messages go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    exit::OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    exit::USAGE
                }
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "onebit: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<u8, Failure> {
    let (config, out) = match cli.command {
        Command::Cue(a) => (RunConfig::new(Subcmd::Cue, &a, false)?, a.out),
        Command::Sweep(a) => (RunConfig::new(Subcmd::Sweep, &a, false)?, a.out),
        Command::Mc(a) => (RunConfig::new(Subcmd::Mc, &a, false)?, a.out),
        Command::Verify(v) => (RunConfig::new(Subcmd::Verify, &v.run, v.self_test_perturb_marcum)?, v.run.out),
    };
    // Open the output before computing so a bad path fails fast.
    let mut file = match &out {
        Some(path) => Some(File::create(path).map_err(|e| Failure {
            code: exit::IO,
            message: format!("cannot write {}: {e}", path.display()),
        })?),
        None => None,
    };
    let (text, code) = match config.subcommand {
        Subcmd::Cue => cmd_cue(&config)?,
        Subcmd::Sweep => cmd_sweep(&config)?,
        Subcmd::Verify => cmd_verify(&config)?,
        Subcmd::Mc => cmd_mc(&config)?,
    };
    let sink: &mut dyn Write = match file.as_mut() {
        Some(f) => f,
        None => stdout,
    };
    sink.write_all(text.as_bytes()).and_then(|_| sink.flush()).map_err(|e| Failure {
        code: exit::IO,
        message: format!("write failed: {e}"),
    })?;
    Ok(code)
}

#[derive(Serialize)]
struct WithMetadata<'a, T: Serialize> {
    #[serde(flatten)]
    result: &'a T,
    metadata: serde_json::Map<String, serde_json::Value>,
}

fn json<T: Serialize>(value: &T, config: &RunConfig) -> String {
    let metadata = std::iter::once(("version".to_string(), env!("CARGO_PKG_VERSION").into()))
        .chain(config.metadata().into_iter().map(|(k, v)| (k.to_string(), v.into())))
        .collect();
    let mut s = serde_json::to_string_pretty(&WithMetadata { result: value, metadata }).expect("serializable");
    s.push('\n');
    s
}

fn run_cue(config: &RunConfig) -> onebit::Result<CueResult> {
    let (s2, sweep, quad, mu) = (config.sigma_sq, &config.sweep, &config.quad, &config.mu[..]);
    match config.case.expect("validated") {
        CueCase::CoherentRadial => cue_coherent_radial(s2, mu, sweep, quad),
        CueCase::NoncoherentRadial => cue_noncoherent_radial(s2, sweep),
        CueCase::PercomponentCoherent => cue_percomponent_coherent(s2, mu, sweep, quad),
        CueCase::PercomponentNoncoherent => cue_percomponent_noncoherent(s2, sweep, false),
        CueCase::SymmetricCoherent => cue_symmetric_coherent(s2, quad),
        CueCase::SymmetricNoncoherent => cue_symmetric_noncoherent(s2, sweep),
    }
}

fn threshold_fields(r: &CueResult) -> [String; 3] {
    use onebit::cue::Threshold;
    match r.threshold {
        Threshold::Tau { tau } => ["tau".into(), sig12(tau), String::new()],
        Threshold::Pair { t_re, t_im } => ["pair".into(), sig12(t_re), sig12(t_im)],
        Threshold::Fraction { mu } => ["fraction".into(), sig12(mu), String::new()],
        Threshold::Zero => ["zero".into(), String::new(), String::new()],
    }
}

fn cmd_cue(config: &RunConfig) -> Result<(String, u8), Failure> {
    let r = run_cue(config)?;
    let code = if r.bounds_hold() { exit::OK } else { exit::ASSERTION };
    let text = match config.format.unwrap_or(Format::Json) {
        Format::Json => json(&r, config),
        Format::Csv => {
            let mut t = Table::new(
                &config.metadata(),
                &[
                    "case",
                    "sigma_sq",
                    "value",
                    "probe_energy",
                    "threshold_kind",
                    "threshold_1",
                    "threshold_2",
                    "supremum_at_infinity",
                    "largest_probe_energy",
                    "max_evaluated",
                    "evaluations",
                    "bounds_hold",
                ],
            );
            let [kind, t1, t2] = threshold_fields(&r);
            t.row([
                r.case.name().to_string(),
                sig12(r.sigma_sq),
                sig12(r.value),
                sig12(r.probe_energy),
                kind,
                t1,
                t2,
                r.supremum_at_infinity.to_string(),
                sig12(r.largest_probe_energy),
                sig12(r.max_evaluated),
                r.evaluations.to_string(),
                r.bounds_hold().to_string(),
            ]);
            t.finish()
        }
    };
    Ok((text, code))
}

#[derive(Clone, Copy, Debug, Serialize)]
struct SweepRow {
    xi2: f64,
    threshold: f64,
    divergence: f64,
    divergence_per_energy: f64,
    /// Divergence of the unquantized output under the same receiver knowledge.
    unquantized_bound: f64,
    /// Only defined without fading knowledge.
    exp_bound: Option<f64>,
}

fn sweep_point(case: CueCase, xi2: f64, threshold: f64, config: &RunConfig) -> onebit::Result<SweepRow> {
    let (s2, quad) = (config.sigma_sq, &config.quad);
    let divergence = match case {
        CueCase::NoncoherentRadial => div_noncoherent_radial(xi2, threshold, s2)?,
        CueCase::CoherentRadial => div_coherent_radial(xi2, threshold, s2, quad)?,
        CueCase::PercomponentNoncoherent => div_percomponent_noncoherent(xi2, threshold, threshold, s2)?,
        CueCase::PercomponentCoherent => div_percomponent_coherent(Complex64::new(xi2.sqrt(), 0.0), threshold, s2, quad)?,
        CueCase::SymmetricNoncoherent => div_percomponent_noncoherent(xi2, 0.0, 0.0, s2)?,
        CueCase::SymmetricCoherent => symmetric_coherent_ratio(xi2, s2, quad)? * xi2,
    };
    let coherent = matches!(
        case,
        CueCase::CoherentRadial | CueCase::PercomponentCoherent | CueCase::SymmetricCoherent
    );
    let (unquantized_bound, exp_bound) = if coherent {
        (xi2 / s2, None)
    } else {
        (unquantized_kl_bound(xi2, s2)?, Some(exp_bound(xi2, s2)?))
    };
    Ok(SweepRow {
        xi2,
        threshold,
        divergence,
        divergence_per_energy: divergence / xi2,
        unquantized_bound,
        exp_bound,
    })
}

/// Threshold column per case: `tau = T^2` (radial), `T` (per-component),
/// `mu` (with fading knowledge) or 0 (sign quantizers).
fn sweep_thresholds(case: CueCase, config: &RunConfig) -> Result<(Vec<f64>, &'static str), Failure> {
    let s = &config.sweep;
    Ok(match case {
        CueCase::NoncoherentRadial => (sweep_axis("tau", s.tau_min, s.tau_max, s.tau_points, true)?, "tau"),
        CueCase::PercomponentNoncoherent => (sweep_axis("tau", s.tau_min, s.tau_max, s.tau_points, true)?, "T"),
        CueCase::CoherentRadial | CueCase::PercomponentCoherent => (config.mu.clone(), "mu"),
        CueCase::SymmetricCoherent | CueCase::SymmetricNoncoherent => (vec![0.0], "none"),
    })
}

fn cmd_sweep(config: &RunConfig) -> Result<(String, u8), Failure> {
    let case = config.case.expect("validated");
    let s = &config.sweep;
    let xs = sweep_axis("xi2", s.xi2_min, s.xi2_max, s.xi2_points, false)?;
    let (thresholds, kind) = sweep_thresholds(case, config)?;
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| thresholds.iter().map(move |&t| (x, t))).collect();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(x, t)| sweep_point(case, x, t, config))
        .collect::<onebit::Result<_>>()?;
    let text = match config.format.unwrap_or(Format::Csv) {
        Format::Json => json(&serde_json::json!({ "threshold_kind": kind, "rows": rows }), config),
        Format::Csv => {
            let mut meta = config.metadata();
            meta.push(("threshold", kind.to_string()));
            let mut t = Table::new(
                &meta,
                &["xi2", "threshold", "divergence", "divergence_per_energy", "unquantized_bound", "exp_bound"],
            );
            for r in &rows {
                let mut fields = [r.xi2, r.threshold, r.divergence, r.divergence_per_energy, r.unquantized_bound]
                    .map(sig12)
                    .to_vec();
                fields.push(r.exp_bound.map(sig12).unwrap_or_default());
                t.row(fields);
            }
            t.finish()
        }
    };
    Ok((text, exit::OK))
}

fn cmd_verify(config: &RunConfig) -> Result<(String, u8), Failure> {
    let opts = VerifyOptions {
        seed: config.seed,
        quad: config.quad,
        marcum_perturbation: if config.perturb_marcum { SELF_TEST_PERTURBATION } else { 0.0 },
    };
    let report = verify::run(&opts)?;
    let code = if report.all_passed() { exit::OK } else { exit::ASSERTION };
    let text = match config.format {
        None => report.render(),
        Some(Format::Json) => json(&report, config),
        Some(Format::Csv) => {
            let mut t = Table::new(&config.metadata(), &["id", "name", "passed", "summary"]);
            for o in &report.outcomes {
                t.row([o.id.to_string(), o.name.clone(), o.passed.to_string(), o.summary.clone()]);
            }
            t.finish()
        }
    };
    Ok((text, code))
}

#[derive(Debug, Serialize)]
struct McRow {
    scenario: usize,
    label: &'static str,
    case: &'static str,
    quantizer: Quantizer,
    input_re: f64,
    input_im: f64,
    seed: u64,
    bit: usize,
    analytic: f64,
    empirical: f64,
    std_error: f64,
    z_score: f64,
}

fn quantizer_name(q: &Quantizer) -> &'static str {
    match q {
        Quantizer::Radial { .. } => "radial",
        Quantizer::PerComponent { .. } => "per-component",
        Quantizer::SymmetricPerComponent => "sign",
        Quantizer::LikelihoodRegion { .. } => "likelihood-region",
    }
}

fn cmd_mc(config: &RunConfig) -> Result<(String, u8), Failure> {
    let params = ChannelParams::new(config.sigma_sq)?;
    let mut rows = Vec::new();
    for (k, s) in mc_scenarios(config.sigma_sq)?.into_iter().enumerate() {
        if config.case.is_some_and(|c| c != s.case) {
            continue;
        }
        let seed = scenario_seed(config.seed, k as u64);
        let analytic = output_probabilities(&s.quantizer, s.input, s.coherent, &params)?;
        let mc = mc_estimate(&s.quantizer, s.input, s.coherent, config.trials, seed, &params)?;
        for (bit, (b, p)) in mc.bits.iter().zip(&analytic).enumerate() {
            rows.push(McRow {
                scenario: k + 1,
                label: s.label,
                case: s.case.name(),
                quantizer: s.quantizer,
                input_re: s.input.re,
                input_im: s.input.im,
                seed,
                bit,
                analytic: p.value(),
                empirical: b.estimate.value(),
                std_error: b.std_error,
                z_score: b.z_score(p.value()),
            });
        }
    }
    let text = match config.format.unwrap_or(Format::Csv) {
        Format::Json => json(&serde_json::json!({ "rows": rows }), config),
        Format::Csv => {
            let mut t = Table::new(
                &config.metadata(),
                &[
                    "scenario", "label", "case", "quantizer", "input_re", "input_im", "seed", "bit", "analytic",
                    "empirical", "std_error", "z_score",
                ],
            );
            for r in &rows {
                t.row([
                    r.scenario.to_string(),
                    r.label.to_string(),
                    r.case.to_string(),
                    quantizer_name(&r.quantizer).to_string(),
                    sig12(r.input_re),
                    sig12(r.input_im),
                    r.seed.to_string(),
                    r.bit.to_string(),
                    sig12(r.analytic),
                    sig12(r.empirical),
                    sig12(r.std_error),
                    sig12(r.z_score),
                ]);
            }
            t.finish()
        }
    };
    Ok((text, exit::OK))
}
