//! Command-line front end. `run` is the whole program minus process exit,
//! so tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 bad input (arguments, files, shapes, config),
//! 2 a verification suite failed or the program hit an internal error.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::complexity::report_fusion_config;
use crate::error::{Error, Result};
use crate::fusion::{pyramid_fuse, FeaturePyramid, FusionConfig, FusionParams, Layers, Modality};
use crate::io::{
    encode_tensor, load_params, read_config, read_image, read_pyramid, render_config, save_params, write_pyramid,
    ReportDoc,
};
use crate::rng::{fnv1a64, Seed};
use crate::verify::{gradcheck_suite, selftest_suite, GRAD_STEP, GRAD_TOL};
use crate::wavelet::analyze_pair;

#[derive(Debug, Parser)]
#[command(name = "ic-fusion", version, about = "RGB/thermal feature fusion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse RGB and IR feature pyramids stored as level{3,4,5}.icft files.
    Fuse {
        #[arg(long)]
        rgb: PathBuf,
        #[arg(long)]
        ir: PathBuf,
        /// Directory for the fused level files.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parameter directory written by init-params; defaults to fresh
        /// parameters from --seed.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Haar sub-band energies of an RGB/IR image pair (PGM or PPM).
    Wavelet {
        rgb: PathBuf,
        ir: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter and MAC counts of the fusion module.
    Count {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every block's input gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Property checks across all modules.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write seeded parameters for every level as tensor files.
    InitParams {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write random RGB and IR pyramids (out/rgb, out/ir) for a config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Outcome {
    Ok(ReportDoc),
    /// The report is still emitted, but the run counts as failed.
    Failed(ReportDoc),
}

fn load_config(path: &Option<PathBuf>) -> Result<FusionConfig> {
    match path {
        Some(p) => read_config(p),
        None => Ok(FusionConfig::default()),
    }
}

fn checksum(t: &crate::tensor::Tensor<f32>) -> String {
    format!("{:016x}", fnv1a64(&encode_tensor(t)))
}

fn fuse(
    rgb: &Path,
    ir: &Path,
    out: &Path,
    config: &Option<PathBuf>,
    params: &Option<PathBuf>,
    seed: u64,
) -> Result<ReportDoc> {
    let cfg = load_config(config)?;
    cfg.validate()?;
    let p = match params {
        Some(dir) => load_params(dir, &cfg)?,
        None => FusionParams::init(&cfg, Seed(seed))?,
    };
    let rgb = read_pyramid(rgb, Modality::Rgb, &cfg)?;
    let ir = read_pyramid(ir, Modality::Ir, &cfg)?;
    let fused = pyramid_fuse(&rgb, &ir, &p)?;
    write_pyramid(out, &fused)?;

    let mut d = ReportDoc::new("fuse");
    d.config(&cfg);
    match params {
        Some(_) => d.push("params", "loaded"),
        None => d.push("params", format!("seed {seed}")),
    };
    for (id, t) in fused.levels() {
        let dims = t.dims();
        d.push(
            format!("level{id}.dims"),
            format!("{}x{}x{}x{}", dims.n, dims.c, dims.h, dims.w),
        );
        d.push_f64(format!("level{id}.sum"), t.sum_f64());
        d.push(format!("level{id}.fnv1a64"), checksum(t));
    }
    Ok(d)
}

fn execute(cmd: &Command) -> Result<Outcome> {
    Ok(match cmd {
        Command::Fuse {
            rgb,
            ir,
            out,
            config,
            params,
            seed,
        } => Outcome::Ok(fuse(rgb, ir, out, config, params, *seed)?),
        Command::Wavelet { rgb, ir, levels, .. } => {
            let (a, b) = (read_image(rgb)?, read_image(ir)?);
            Outcome::Ok(ReportDoc::from_pair(&analyze_pair(&a, &b, *levels)?))
        }
        Command::Count { config, .. } => {
            Outcome::Ok(ReportDoc::from_costs(&report_fusion_config(&load_config(config)?)?))
        }
        Command::Gradcheck { seed, .. } => {
            let checks = gradcheck_suite(Seed(*seed))?;
            let mut d = ReportDoc::new("gradcheck");
            d.push("seed", seed).push_f64("step", GRAD_STEP);
            d.gradchecks(&checks, GRAD_TOL);
            let ok = checks.iter().all(|c| c.passes(GRAD_TOL));
            d.push("result", if ok { "pass" } else { "FAIL" });
            if ok {
                Outcome::Ok(d)
            } else {
                Outcome::Failed(d)
            }
        }
        Command::Selftest { seed, .. } => {
            let results = selftest_suite(Seed(*seed))?;
            let mut d = ReportDoc::new("selftest");
            d.push("seed", seed);
            for r in &results {
                d.push(
                    r.name,
                    format!("{} ({})", if r.passed { "pass" } else { "FAIL" }, r.detail),
                );
            }
            let ok = results.iter().all(|r| r.passed);
            d.push("result", if ok { "pass" } else { "FAIL" });
            if ok {
                Outcome::Ok(d)
            } else {
                Outcome::Failed(d)
            }
        }
        Command::InitParams { out, config, seed } => {
            let cfg = load_config(config)?;
            let p = FusionParams::<f32>::init(&cfg, Seed(*seed))?;
            let files = save_params(out, &p)?;
            let path = out.join("config.txt");
            std::fs::write(&path, render_config(&cfg)).map_err(|e| Error::io(&path, e))?;
            let mut d = ReportDoc::new("init-params");
            d.config(&cfg).push("seed", seed).push("files", files.len());
            for (id, lp) in &p.levels {
                d.push(format!("level{id}.params"), lp.param_count());
            }
            Outcome::Ok(d)
        }
        Command::Synth { out, config, seed } => {
            let cfg = load_config(config)?;
            cfg.validate()?;
            let mut d = ReportDoc::new("synth");
            d.config(&cfg).push("seed", seed);
            for (m, sub) in [(Modality::Rgb, "rgb"), (Modality::Ir, "ir")] {
                let pyr = FeaturePyramid::<f32>::random(&cfg, m, Seed(*seed))?;
                write_pyramid(out.join(sub), &pyr)?;
                for (id, t) in pyr.levels() {
                    d.push(format!("{sub}.level{id}.fnv1a64"), checksum(t));
                }
            }
            Outcome::Ok(d)
        }
    })
}

fn report_target(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Wavelet { out, .. }
        | Command::Count { out, .. }
        | Command::Gradcheck { out, .. }
        | Command::Selftest { out, .. } => out.as_deref(),
        _ => None,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to `out` (or the `--out` file), diagnostics to `err`.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| execute(&cli.command)));
    let (doc, code) = match result {
        Ok(Ok(Outcome::Ok(d))) => (d, 0),
        Ok(Ok(Outcome::Failed(d))) => (d, 2),
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
        Err(_) => {
            let _ = writeln!(err, "error: internal failure");
            return 2;
        }
    };
    match report_target(&cli.command) {
        Some(path) => {
            if let Err(e) = doc.write(path) {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
        }
        None => {
            let _ = write!(out, "{doc}");
        }
    }
    if code != 0 {
        let _ = writeln!(err, "error: verification failed");
    }
    code
}
