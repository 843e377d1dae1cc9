//! Command-line frontend: subcommand dispatch, config/flag merging, and
//! CSV/JSON report emission.
//!
//! Exit codes: 0 success (verdict Multiscale for `analyze`/`all`),
//! 2 configuration error, 3 verdict NotMultiscale, 4 verdict Inconclusive,
//! 1 any other failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::analysis::{
    algorithm1_or_inconclusive, algorithm2a, algorithm2b, MultiscaleReport, PipelineContext,
    TimescaleReport, Verdict,
};
use crate::bench;
use crate::config::{Method, RunConfig};
use crate::error::{GenspecError, Result};
use crate::fibre::Fibre;
use crate::reduction::{
    demoura_solve, homogenized_reference, restrict_to_section, ReducedModel, SectionEigenpair,
};

#[derive(Debug, Parser)]
#[command(
    name = "genspec",
    about = "Multiscale structure detection for SDEs via generator spectra",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multiscale test (Algorithm 1): fibre extraction, local flattening,
    /// tangential/normal averages, verdict.
    Analyze(CommonArgs),
    /// Timescale separation (Algorithms 2A/2B): fibre operator spectra,
    /// ratios, and relative errors.
    Timescale(CommonArgs),
    /// Reduced slow SDE on the y = 0 section by spectral inversion.
    Reduce(CommonArgs),
    /// Leading eigenvalues of the full generator.
    Spectrum(CommonArgs),
    /// Traced fast fibre through the seed point.
    Fibre(CommonArgs),
    /// Full pipeline sharing one spectral solve: analyze, timescale
    /// (both methods), reduce, spectrum.
    All(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Analyze(a)
            | Command::Timescale(a)
            | Command::Reduce(a)
            | Command::Spectrum(a)
            | Command::Fibre(a)
            | Command::All(a) => a,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in system name or system-definition file.
    #[arg(long)]
    pub system: Option<String>,
    /// Timescale separation parameter.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Grid sizes as NX,NY.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    /// Half-width of the non-periodic axis.
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Fibre seed point as X,Y.
    #[arg(long, value_parser = parse_point)]
    pub seed_point: Option<[f64; 2]>,
    /// Fibre resampling spacing.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Ratio threshold for the multiscale verdict.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Rotation angles in degrees, comma-separated.
    #[arg(long, value_parser = parse_list)]
    pub theta: Option<Vec<f64>>,
    /// Timescale method (default: both).
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Graph,
    Arclength,
}

fn parse_grid(s: &str) -> std::result::Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected NX,NY".into());
    }
    let nx = parts[0].trim().parse().map_err(|e| format!("NX: {e}"))?;
    let ny = parts[1].trim().parse().map_err(|e| format!("NY: {e}"))?;
    Ok([nx, ny])
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected X,Y".into());
    }
    let x = parts[0].trim().parse().map_err(|e| format!("X: {e}"))?;
    let y = parts[1].trim().parse().map_err(|e| format!("Y: {e}"))?;
    Ok([x, y])
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

/// Merge the config file (if any) with flag overrides; flags win.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.system {
        cfg.system = v.clone();
    }
    if let Some(v) = args.eps {
        cfg.eps = v;
    }
    if let Some(v) = args.grid {
        cfg.grid = v;
    }
    if let Some(v) = args.l {
        cfg.l = v;
    }
    if let Some(v) = args.seed_point {
        cfg.seed_point = v;
    }
    if let Some(v) = args.spacing {
        cfg.spacing = v;
    }
    if let Some(v) = args.threshold {
        cfg.threshold = v;
    }
    if let Some(v) = &args.theta {
        cfg.theta = v.clone();
    }
    if let Some(v) = args.method {
        cfg.method = Some(match v {
            MethodArg::Graph => Method::Graph,
            MethodArg::Arclength => Method::Arclength,
        });
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e @ GenspecError::Config(_)) | Err(e @ GenspecError::Expr(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    let cfg = match resolve_config(command.args()) {
        Ok(cfg) => cfg,
        Err(e) => {
            return match e {
                GenspecError::Io(_) => Err(GenspecError::Config(format!("config file: {e}"))),
                other => Err(other),
            }
        }
    };
    std::fs::create_dir_all(&cfg.out)?;
    let start = Instant::now();
    let sys = cfg.build_system()?;
    let ctx = PipelineContext::new(sys, cfg.analysis_config())?;
    let code = match command {
        Command::Analyze(_) => run_analyze(&ctx, &cfg)?,
        Command::Timescale(_) => {
            run_timescale(&ctx, &cfg)?;
            0
        }
        Command::Reduce(_) => {
            run_reduce(&ctx, &cfg)?;
            0
        }
        Command::Spectrum(_) => {
            write_spectrum_csv(&ctx, &cfg.out)?;
            0
        }
        Command::Fibre(_) => {
            let fibre = ctx.extract_fibre(&cfg.seed_point)?;
            write_fibre_csv(&fibre, &cfg.out)?;
            0
        }
        Command::All(_) => {
            let code = run_analyze(&ctx, &cfg)?;
            run_timescale(&ctx, &cfg)?;
            run_reduce(&ctx, &cfg)?;
            write_spectrum_csv(&ctx, &cfg.out)?;
            println!("total wall time: {:.1} s", start.elapsed().as_secs_f64());
            code
        }
    };
    Ok(code)
}

fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Multiscale => 0,
        Verdict::NotMultiscale => 3,
        Verdict::Inconclusive => 4,
    }
}

fn run_analyze(ctx: &PipelineContext, cfg: &RunConfig) -> Result<i32> {
    let report = algorithm1_or_inconclusive(ctx, &cfg.seed_point)?;
    write_json(&cfg.out.join("multiscale_report.json"), &report)?;
    write_local_dynamics_csv(&report, &cfg.out)?;
    if report.fibre_points > 0 {
        let fibre = ctx.extract_fibre(&cfg.seed_point)?;
        write_fibre_csv(&fibre, &cfg.out)?;
    }
    println!(
        "verdict: {:?} (mu ratio {:.4}, D ratio {:.4}, threshold {})",
        report.verdict, report.ratio_mu, report.ratio_d, report.threshold
    );
    Ok(verdict_exit_code(report.verdict))
}

/// Analytic fibre eigenvalue reference, available for the built-in
/// benchmark systems only.
fn fibre_reference(cfg: &RunConfig) -> Option<Vec<f64>> {
    if cfg.system.starts_with("crommelin_") {
        Some(
            (1..cfg.k_max)
                .map(|k| bench::fibre_reference_eigenvalue(k, cfg.eps))
                .collect(),
        )
    } else {
        None
    }
}

fn run_timescale(ctx: &PipelineContext, cfg: &RunConfig) -> Result<()> {
    let reference = fibre_reference(cfg);
    let refs = reference.as_deref();
    let mut rows = String::from(
        "method,theta_degrees,k,lambda_re,lambda_im,lambda_hat_re,lambda_hat_im,ratio,err\n",
    );
    let run_graph = cfg.method != Some(Method::Arclength);
    let run_arc = cfg.method != Some(Method::Graph);
    if run_arc {
        let report = algorithm2b(ctx, &cfg.seed_point, refs)?;
        append_timescale_rows(&mut rows, "arclength", None, &report);
        write_json(&cfg.out.join("timescale_arclength.json"), &report)?;
    }
    if run_graph {
        let mut last = None;
        for &theta in &cfg.theta {
            let report = algorithm2a(ctx, &cfg.seed_point, theta, refs)?;
            append_timescale_rows(&mut rows, "graph", Some(theta), &report);
            last = Some(report);
        }
        if let Some(report) = last {
            write_json(&cfg.out.join("timescale_graph.json"), &report)?;
        }
    }
    std::fs::write(cfg.out.join("table1.csv"), rows)?;
    Ok(())
}

fn append_timescale_rows(
    rows: &mut String,
    method: &str,
    theta: Option<f64>,
    report: &TimescaleReport,
) {
    let theta_s = theta.map(fmt_f64).unwrap_or_default();
    for (k, (slow, fibre)) in report
        .slow_eigs
        .iter()
        .zip(report.fibre_eigs.iter())
        .enumerate()
    {
        let ratio = if k >= 1 {
            report.ratios.get(k - 1).map(|v| fmt_f64(*v))
        } else {
            None
        };
        let err = if k >= 1 {
            report.err.get(k - 1).map(|v| fmt_f64(*v))
        } else {
            None
        };
        let _ = writeln!(
            rows,
            "{method},{theta_s},{k},{},{},{},{},{},{}",
            fmt_f64(slow[0]),
            fmt_f64(slow[1]),
            fmt_f64(fibre[0]),
            fmt_f64(fibre[1]),
            ratio.unwrap_or_default(),
            err.unwrap_or_default(),
        );
    }
}

fn run_reduce(ctx: &PipelineContext, cfg: &RunConfig) -> Result<ReducedModel> {
    // The leading non-trivial conjugate pair carries the inversion; index 2
    // is its conjugate (or the next pair for real spectra).
    let (section, v1) = restrict_to_section(&ctx.spectrum.eigenfunction(1), 0.0)?;
    let (_, v2) = restrict_to_section(&ctx.spectrum.eigenfunction(2), 0.0)?;
    let p1 = SectionEigenpair::new(1, ctx.spectrum.eigenvalues[1], &section, v1)?;
    let p2 = SectionEigenpair::new(2, ctx.spectrum.eigenvalues[2], &section, v2)?;
    let model = demoura_solve(&section, &p1, &p2)?;

    let mut csv =
        String::from("x,mu_tilde,d_tilde,mu_homog,noise_coef_homog,noise_coef_sq_homog,cond\n");
    let mut rms_num = 0.0;
    let mut rms_den = 0.0;
    for (i, &x) in model.x.iter().enumerate() {
        let (mu_h, coef_h) = homogenized_reference(x);
        if model.mu_tilde[i].is_finite() {
            rms_num += (model.mu_tilde[i] - mu_h).powi(2);
            rms_den += mu_h.powi(2);
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_f64(x),
            fmt_f64(model.mu_tilde[i]),
            fmt_f64(model.d_tilde[i]),
            fmt_f64(mu_h),
            fmt_f64(coef_h),
            fmt_f64(coef_h * coef_h),
            fmt_f64(model.condition[i]),
        );
    }
    std::fs::write(cfg.out.join("reduced.csv"), csv)?;
    write_json(&cfg.out.join("reduced_model.json"), &model)?;
    if rms_den > 0.0 {
        println!(
            "RMS(mu_tilde - mu_homog) / RMS(mu_homog) = {:.4}",
            (rms_num / rms_den).sqrt()
        );
    }
    if !model.gaps.is_empty() {
        println!(
            "warning: {} ill-conditioned section points left as gaps",
            model.gaps.len()
        );
    }
    Ok(model)
}

fn write_spectrum_csv(ctx: &PipelineContext, out: &Path) -> Result<()> {
    let mut csv = String::from("k,lambda_re,lambda_im\n");
    for (k, lam) in ctx.spectrum.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{k},{},{}", fmt_f64(lam.re), fmt_f64(lam.im));
    }
    std::fs::write(out.join("spectrum.csv"), csv)?;
    Ok(())
}

fn write_fibre_csv(fibre: &Fibre, out: &Path) -> Result<()> {
    let arcs = fibre.arc_lengths();
    let mut csv = String::from("index,arc_length,x,y,weight\n");
    for (i, p) in fibre.points.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{}",
            fmt_f64(arcs[i]),
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(fibre.weights[i]),
        );
    }
    std::fs::write(out.join("fibre.csv"), csv)?;
    Ok(())
}

fn write_local_dynamics_csv(report: &MultiscaleReport, out: &Path) -> Result<()> {
    let mut csv = String::from("index,arc_length,x,y,weight,mu_tan,mu_nor,d_tan,d_nor\n");
    for p in &report.per_point {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            p.index,
            fmt_f64(p.arc_length),
            fmt_f64(p.point[0]),
            fmt_f64(p.point[1]),
            fmt_f64(p.weight),
            fmt_f64(p.dynamics.mu_tan),
            fmt_f64(p.dynamics.mu_nor),
            fmt_f64(p.dynamics.d_tan),
            fmt_f64(p.dynamics.d_nor),
        );
    }
    std::fs::write(out.join("local_dynamics.csv"), csv)?;
    Ok(())
}

/// 17 significant digits: round-trip exact for f64, deterministic.
fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    format!("{v:.16e}")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| GenspecError::Config(format!("json serialization: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Complex eigenvalue formatted for human-readable logs.
pub fn fmt_complex(c: Complex64) -> String {
    format!("{:+.6}{:+.6}i", c.re, c.im)
}
