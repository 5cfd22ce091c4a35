use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use varred_nls::config::{BasisMode, RunConfig};
use varred_nls::reports::{
    basis_diagnostics, build_basis, config_hash, ground_state_stage, modes_stage,
    reduction_certificates, reduction_study, run_pipeline, scan_stage, spectrum_stage,
    uniqueness_stage, validate_stage, write_ground_state, write_json, write_scan_csv, Certificate,
};
use varred_nls::{Error, Result};

#[derive(Parser)]
#[command(
    name = "varred-nls",
    version,
    about = "Ground states and semiclassical solutions of a nonlinear Schrodinger equation by variational reduction"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Eigen,
    Mollified,
    #[value(name = "appendixA")]
    AppendixA,
}

#[derive(Subcommand)]
enum Command {
    /// Check the hypotheses on the nonlinearity and the potential.
    Validate,
    /// Compute the ground state of the limit problem.
    GroundState,
    /// Lowest eigenpairs of the linearization and the kernel split.
    Spectrum,
    /// Galerkin basis diagnostics, correction study and inverse bounds.
    Reduce {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Semiclassical solution at one scaling parameter.
    Solve {
        #[arg(long)]
        eps: f64,
    },
    /// Full pipeline over the configured scan with certificates.
    ScanEpsilon,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn load(cli: &Cli) -> Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Ctx {
        cfg,
        out,
        quiet: cli.quiet,
    })
}

fn certificate_outcome(ctx: &Ctx, certs: &[Certificate]) -> Result<()> {
    for c in certs {
        ctx.say(format!(
            "{} {} = {:e} {} {:e} [{}]",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold,
            c.unit
        ));
    }
    let failed: Vec<&str> = certs
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Certificate(failed.join(", ")))
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut ctx = load(&cli)?;
    match cli.command {
        Command::Validate => {
            let (_, report) = match validate_stage(&ctx.cfg) {
                Ok(v) => v,
                Err(e) => {
                    if let Ok(model) = ctx.cfg.energy_model() {
                        ensure_dir(&ctx.out)?;
                        let r = varred_nls::model::validate_hypotheses(&model, &ctx.cfg.scan.eps);
                        write_json(&r, &ctx.out.join("hypotheses.json"))?;
                    }
                    return Err(e);
                }
            };
            ensure_dir(&ctx.out)?;
            write_json(&report, &ctx.out.join("hypotheses.json"))?;
            for c in &report.checks {
                ctx.say(format!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                ));
            }
        }
        Command::GroundState => {
            let (model, _) = validate_stage(&ctx.cfg)?;
            let gs = ground_state_stage(&model, &ctx.cfg)?;
            write_ground_state(&gs, &ctx.out)?;
            let uniq = uniqueness_stage(&model, &gs, &ctx.cfg)?;
            write_json(&uniq, &ctx.out.join("uniqueness.json"))?;
            ctx.say(format!(
                "energy {:e}, |omega|^2_H1 {:e}, |omega|^2_L2 {:e}, residual {:e}, decay rate {:.4}, iterations {}",
                gs.energy, gs.h1_norm_sq, gs.l2_norm_sq, gs.gradient_residual, gs.decay.rate, gs.iterations
            ));
            let spread = uniq.distances.iter().copied().fold(0.0, f64::max);
            certificate_outcome(
                &ctx,
                &[Certificate::at_most(
                    "ground_state.uniqueness_spread",
                    spread,
                    ctx.cfg.tolerances.uniqueness,
                    "relative H1 norm",
                )],
            )?;
        }
        Command::Spectrum => {
            let (model, _) = validate_stage(&ctx.cfg)?;
            let gs = ground_state_stage(&model, &ctx.cfg)?;
            let spec = spectrum_stage(&model, &gs, &ctx.cfg)?;
            ensure_dir(&ctx.out)?;
            write_json(&spec, &ctx.out.join("spectrum.json"))?;
            let mut w = csv::Writer::from_path(ctx.out.join("eigenvalues.csv"))
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            w.write_record(["index", "eigenvalue", "residual"])
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            for (i, (l, r)) in spec.eigenvalues.iter().zip(&spec.residuals).enumerate() {
                w.write_record([i.to_string(), format!("{l:e}"), format!("{r:e}")])
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            }
            w.flush()?;
            ctx.say(format!(
                "eigenvalues {:?}\nkernel {} (radial {}), Morse index {}",
                spec.eigenvalues, spec.kernel_dim_full, spec.kernel_dim_radial, spec.morse_index
            ));
        }
        Command::Reduce { k, mode } => {
            if let Some(k) = k {
                ctx.cfg.reduction.k = k;
            }
            if let Some(m) = mode {
                ctx.cfg.reduction.mode = match m {
                    ModeArg::Eigen => BasisMode::Eigen,
                    ModeArg::Mollified | ModeArg::AppendixA => BasisMode::Mollified,
                };
            }
            let (model, _) = validate_stage(&ctx.cfg)?;
            let gs = ground_state_stage(&model, &ctx.cfg)?;
            let spec = spectrum_stage(&model, &gs, &ctx.cfg)?;
            let k = ctx.cfg.reduction.k;
            let (modes, pencil) = modes_stage(&gs, &ctx.cfg, k.max(16))?;
            let basis = build_basis(&modes, &spec, k, ctx.cfg.reduction.mode)?;
            let diag = basis_diagnostics(&basis, &pencil);
            let ks: Vec<usize> = [4, 8, 16].into_iter().filter(|&j| j <= k.max(16)).collect();
            let study = reduction_study(&model, &gs, &spec, &modes, &ctx.cfg, &ks)?;
            ensure_dir(&ctx.out)?;
            write_json(
                &serde_json::json!({ "config_hash": config_hash(&ctx.cfg)?, "basis": diag, "study": study }),
                &ctx.out.join("reduction.json"),
            )?;
            let certs = reduction_certificates(&study, *ks.last().unwrap());
            certificate_outcome(&ctx, &certs)?;
        }
        Command::Solve { eps } => {
            let (model, _) = validate_stage(&ctx.cfg)?;
            let gs = ground_state_stage(&model, &ctx.cfg)?;
            let spec = spectrum_stage(&model, &gs, &ctx.cfg)?;
            let k = ctx.cfg.reduction.k;
            let (modes, _) = modes_stage(&gs, &ctx.cfg, k)?;
            let basis = build_basis(&modes, &spec, k, ctx.cfg.reduction.mode)?;
            let (rows, sols) = scan_stage(&model, &gs, &basis, &ctx.cfg, &[eps])?;
            ensure_dir(&ctx.out)?;
            let hash = config_hash(&ctx.cfg)?;
            write_json(
                &serde_json::json!({ "config_hash": hash, "row": rows[0] }),
                &ctx.out.join("solution.json"),
            )?;
            write_scan_csv(&rows, &hash, &ctx.out.join("solution.csv"))?;
            varred_nls::field::write_field(&sols[0].eval.lift, &ctx.out.join("solution.bin"))?;
            let r = &rows[0];
            ctx.say(format!(
                "eps {eps}: residual {:e}, Psi {:e}, eta {:e}, Lambda {:e}, distance {:e}, y {:?}",
                r.residual, r.psi, r.eta, r.lambda, r.distance, r.y
            ));
        }
        Command::ScanEpsilon => {
            let report = run_pipeline(&ctx.cfg, Some(&ctx.out))?;
            for r in &report.scan {
                ctx.say(format!(
                    "eps {:<6} residual {:.2e} eta {:+.3e} Lambda {:.3e} distance {:.3e} orbit {:.3e}",
                    r.eps, r.residual, r.eta, r.lambda, r.distance, r.orbit_distance
                ));
            }
            if let Some(e) = report.largest_certified_eps {
                ctx.say(format!("largest certified eps {e}"));
            }
            certificate_outcome(&ctx, &report.certificates)?;
        }
    }
    Ok(())
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
