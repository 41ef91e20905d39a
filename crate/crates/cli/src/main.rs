//! `projinv`: projective jet invariants from the command line.
//!
//! Reports go to stdout as JSON, diagnostics to stderr. Exit codes: 0 when all
//! requested checks pass, 1 on a failed check or computation, 2 on usage
//! errors, 3 when an input or output file cannot be read, parsed or written.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use projinv::cochain::{random_family, verify_contraction, COCHAIN_POINTS};
use projinv::descriptor::{mc_descriptor, warp, GrayImage};
use projinv::invariants::{generating_set_unchecked, iota_coordinates, relation_residuals, tau_prime};
use projinv::jet::DEFAULT_EPS_GP;
use projinv::relative::{builtin, check_relative, relative_invariants, Weight, BUILTIN_NAMES};
use projinv::suite::{run_suite, SuiteParams, RELATIONS_TOL, SUITE_NAMES};
use projinv::verify::independence_rank;
use projinv::frame::normalize_with;
use projinv::{Error, Execution, Homography, JetConfiguration, Tolerances, TrialConfig};

const SAMPLE_CONFIG: &str = include_str!("../data/sample.json");

#[derive(Parser)]
#[command(name = "projinv", version, about = "Projective differential invariants of point configurations with gradients")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trial count override.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Homography perturbation size override.
    #[arg(long, global = true, value_parser = non_negative)]
    spread: Option<f64>,
    /// General-position threshold.
    #[arg(long, global = true, default_value_t = DEFAULT_EPS_GP, value_parser = positive)]
    eps_gp: f64,
    /// Normalization residual threshold.
    #[arg(long, global = true, default_value_t = 1e-9, value_parser = positive)]
    eps_res: f64,
    /// Spaces per JSON indentation level; 0 prints compact JSON.
    #[arg(long, global = true, default_value_t = 2)]
    json_indent: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the moving frame and normalize a configuration.
    Frame { config: PathBuf },
    /// Evaluate the generating set of absolute invariants.
    Invariants {
        config: PathBuf,
        /// Also report the coordinate relations.
        #[arg(long)]
        relations: bool,
    },
    /// Relative invariants of a configuration, or a randomized weight check.
    Relative {
        config: Option<PathBuf>,
        /// Weight to check, e.g. -1 or 1/3.
        #[arg(long, allow_hyphen_values = true)]
        check: Option<Weight>,
        /// Function to check.
        #[arg(long, default_value = "c", value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_NAMES))]
        function: String,
        /// Points per random configuration.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(3..))]
        n: u64,
    },
    /// Run verification suites (and checks on a configuration, the bundled sample by default).
    Verify {
        config: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Numerical rank of the generating set's Jacobian.
    Rank {
        #[arg(long, value_parser = clap::value_parser!(u64).range(3..))]
        n: u64,
    },
    /// Contraction identity of the cochain homotopy on random cochains.
    CochainCheck {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=3))]
        m: u64,
    },
    /// Experimental Monte Carlo weight integrand over an image.
    Descriptor {
        image: PathBuf,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(3..))]
        n: u64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
    },
    /// Warp an image by a homography given in pixel coordinates.
    Warp {
        image: PathBuf,
        #[arg(long)]
        homography: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16, value_parser = bit_depth)]
        bits: u8,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn bit_depth(s: &str) -> Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("expected 8 or 16, got {s:?}")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s:?}")),
    }
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse(_) => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

fn load_config(path: Option<&Path>) -> Result<JetConfiguration, Failure> {
    let text = match path {
        Some(p) => read_input(p)?,
        None => SAMPLE_CONFIG.to_owned(),
    };
    JetConfiguration::from_json(&text).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.map_or("bundled sample".into(), |p| p.display().to_string())),
    })
}

fn load_image(path: &Path) -> Result<GrayImage, Failure> {
    GrayImage::read_pgm(path).map_err(|e| Failure {
        code: if matches!(e, Error::Io(_) | Error::Parse(_)) { 3 } else { 1 },
        message: format!("{}: {e}", path.display()),
    })
}

/// A report and whether its checks passed.
struct Outcome {
    report: Value,
    passes: bool,
}

fn ok(report: Value) -> Outcome {
    Outcome { report, passes: true }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

struct Ctx {
    seed: u64,
    trials: Option<usize>,
    spread: Option<f64>,
    tol: Tolerances,
}

impl Ctx {
    fn trial_config(&self, default_trials: usize, default_spread: f64) -> TrialConfig {
        TrialConfig::new(self.trials.unwrap_or(default_trials), self.seed, self.spread.unwrap_or(default_spread))
    }
}

fn frame(ctx: &Ctx, path: &Path) -> Result<Outcome, Failure> {
    let cfg = load_config(Some(path))?;
    let n = normalize_with(&cfg, &ctx.tol)?;
    Ok(ok(json!({
        "frame": n.frame,
        "element": n.frame.element,
        "normalized": n.cfg,
        "free_coordinates": n.free_coordinates(),
        "pinned_deviation": n.pinned_deviation(),
    })))
}

fn invariants(ctx: &Ctx, path: &Path, relations: bool) -> Result<Outcome, Failure> {
    let cfg = load_config(Some(path))?;
    cfg.require_general_position(ctx.tol.eps_gp)?;
    let set = generating_set_unchecked(&cfg)?;
    let mut report = json!({
        "n": cfg.len(),
        "generating_set": set,
        "values": set.values(),
        "iota": iota_coordinates(&cfg)?,
    });
    let mut passes = true;
    if relations {
        let r = relation_residuals(&cfg)?;
        passes = r.max() <= RELATIONS_TOL;
        report["relations"] = json!({
            "residuals": r,
            "tau_prime": tau_prime(&cfg),
            "tolerance": RELATIONS_TOL,
            "passes": passes,
        });
    }
    Ok(Outcome { report, passes })
}

fn relative(ctx: &Ctx, path: Option<&Path>, check: Option<Weight>, function: &str, n: usize) -> Result<Outcome, Failure> {
    if path.is_none() && check.is_none() {
        return Err(usage("relative needs a configuration file, --check, or both".into()));
    }
    let mut report = json!({});
    let mut passes = true;
    if let Some(p) = path {
        let cfg = load_config(Some(p))?;
        cfg.require_general_position(ctx.tol.eps_gp)?;
        report["value"] = to_value(&relative_invariants(&cfg)?);
    }
    if let Some(w) = check {
        let f = builtin(function).ok_or_else(|| usage(format!("unknown function {function:?}")))?;
        let tc = ctx.trial_config(1000, 0.2);
        let r = check_relative(f, w, n, &tc, projinv::suite::RELATIVE_TOL);
        passes = r.passes();
        report["check"] = json!({ "function": function, "weight": w, "n": n, "report": r, "passes": passes });
    }
    Ok(Outcome { report, passes })
}

fn verify(ctx: &Ctx, path: Option<&Path>, suite: &str) -> Result<Outcome, Failure> {
    let names: Vec<&str> = if suite == "all" {
        SUITE_NAMES.to_vec()
    } else if SUITE_NAMES.contains(&suite) {
        vec![suite]
    } else {
        return Err(usage(format!("unknown suite {suite:?}; expected all or one of {}", SUITE_NAMES.join(", "))));
    };
    let cfg = load_config(path)?;
    let gp = cfg.general_position(ctx.tol.eps_gp);
    let mut config_passes = gp.passes;
    let mut config = json!({ "n": cfg.len(), "general_position": gp });
    if gp.passes {
        let frame = normalize_with(&cfg, &ctx.tol)?;
        let rel = relation_residuals(&cfg)?;
        config_passes &= rel.max() <= RELATIONS_TOL;
        config["frame_residual"] = json!(frame.frame.max_residual);
        config["relation_residual"] = json!(rel.max());
    }
    config["passes"] = json!(config_passes);

    let params = SuiteParams {
        seed: ctx.seed,
        trials: ctx.trials,
        spread: ctx.spread,
        tol: ctx.tol,
        exec: Execution::default(),
    };
    let mut suites = Vec::new();
    let mut passes = config_passes;
    for name in names {
        let r = run_suite(name, &params)?;
        if !r.passes {
            eprintln!("suite {name} failed");
        }
        passes &= r.passes;
        suites.push(r);
    }
    Ok(Outcome {
        report: json!({ "seed": ctx.seed, "config": config, "suites": suites, "passes": passes }),
        passes,
    })
}

fn rank(ctx: &Ctx, n: usize) -> Result<Outcome, Failure> {
    let r = independence_rank(n, ctx.trials.unwrap_or(10), ctx.seed)?;
    Ok(Outcome {
        passes: r.passes,
        report: to_value(&r),
    })
}

fn cochain_check(ctx: &Ctx, m: usize) -> Result<Outcome, Failure> {
    let tc = ctx.trial_config(100, 0.1);
    let r = verify_contraction(m, COCHAIN_POINTS, &tc, projinv::suite::CONTRACTION_TOL, random_family)?;
    Ok(Outcome {
        passes: r.passes(),
        report: to_value(&r),
    })
}

fn descriptor(ctx: &Ctx, path: &Path, n: usize, samples: usize) -> Result<Outcome, Failure> {
    let img = load_image(path)?;
    let r = mc_descriptor(&img, n, samples, ctx.seed, Execution::default())?;
    Ok(ok(json!({
        "image": { "width": img.width(), "height": img.height() },
        "estimate": r,
    })))
}

fn warp_image(path: &Path, h_path: &Path, out: &Path, bits: u8) -> Result<Outcome, Failure> {
    let img = load_image(path)?;
    let h: Homography = serde_json::from_str(&read_input(h_path)?).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", h_path.display()),
    })?;
    let warped = warp(&img, &h)?;
    warped.write_pgm(out, bits).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", out.display()),
    })?;
    Ok(ok(json!({
        "width": warped.width(),
        "height": warped.height(),
        "bits": bits,
        "homography": h,
        "output": out.display().to_string(),
    })))
}

fn render(v: &Value, indent: usize) -> String {
    if indent == 0 {
        return serde_json::to_string(v).expect("json values serialize");
    }
    let pad = " ".repeat(indent);
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(pad.as_bytes());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    v.serialize(&mut ser).expect("json values serialize");
    String::from_utf8(buf).expect("json is utf-8")
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("PROJINV_THREADS") else {
        return Ok(());
    };
    let threads = raw
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("PROJINV_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(format!("cannot configure threads: {e}")))
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    configure_threads()?;
    let ctx = Ctx {
        seed: cli.seed,
        trials: cli.trials,
        spread: cli.spread,
        tol: Tolerances {
            eps_gp: cli.eps_gp,
            eps_res: cli.eps_res,
        },
    };
    match cli.command {
        Command::Frame { config } => frame(&ctx, &config),
        Command::Invariants { config, relations } => invariants(&ctx, &config, relations),
        Command::Relative {
            config,
            check,
            function,
            n,
        } => relative(&ctx, config.as_deref(), check, &function, n as usize),
        Command::Verify { config, suite } => verify(&ctx, config.as_deref(), &suite),
        Command::Rank { n } => rank(&ctx, n as usize),
        Command::CochainCheck { m } => cochain_check(&ctx, m as usize),
        Command::Descriptor { image, n, samples } => descriptor(&ctx, &image, n as usize, samples as usize),
        Command::Warp {
            image,
            homography,
            out,
            bits,
        } => warp_image(&image, &homography, &out, bits),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let indent = cli.json_indent;
    match run(cli) {
        Ok(outcome) => {
            // a closed stdout (e.g. piped into `head`) is not an error of ours
            let _ = writeln!(std::io::stdout().lock(), "{}", render(&outcome.report, indent));
            if outcome.passes {
                ExitCode::SUCCESS
            } else {
                eprintln!("checks failed");
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
