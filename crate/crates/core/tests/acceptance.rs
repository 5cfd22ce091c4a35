//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Criteria 4, 7, 8 and 9 read the artifacts of two `scan-epsilon` runs of the CLI on the
//! default configuration; the others are checked in process.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::ShootingProfile;
use varred_nls::config::RunConfig;
use varred_nls::eigen::LobpcgOptions;
use varred_nls::field::{gradient, translate, Field, GridSpec};
use varred_nls::galerkin::{
    projected_hessian_inverse_bound, selected_complement, solve_pi_k, Selector,
};
use varred_nls::ground_state::{solve_ground_state, GroundState, GroundStateOptions};
use varred_nls::linearization::{analyze_operator, lowest_eigenpairs, symmetry_check};
use varred_nls::model::{EnergyModel, Nonlinearity, Polynomial, Potential};
use varred_nls::perturbation::{gamma_extremum, localization, Reducer};
use varred_nls::projection::hessian_apply;
use varred_nls::reports::{
    build_basis, ground_state_stage, modes_stage, reduction_settings, spectrum_stage,
};

const C1_RUNTIME: Duration = Duration::from_secs(5);
const C2_RUNTIME: Duration = Duration::from_secs(60);
const C7_RUNTIME: Duration = Duration::from_secs(15 * 60);

/// Outcome of one criterion: pass flag and a one-line summary of the measured values.
struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(checks: &[(&str, bool)], detail: String) -> Self {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        let detail = if failed.is_empty() {
            detail
        } else {
            format!("{detail}; failed: {}", failed.join(", "))
        };
        Verdict {
            passed: failed.is_empty(),
            detail,
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Verdict {
            passed: false,
            detail: format!("error: {e}"),
        }
    }
}

type Outcome = Result<Verdict, Box<dyn std::error::Error>>;

fn lobpcg() -> LobpcgOptions {
    LobpcgOptions {
        tol: 1e-9,
        max_iter: 2000,
    }
}

fn closed_form_limit() -> Outcome {
    let start = Instant::now();
    let grid = GridSpec::new(1, 16.0, 256)?;
    let model = EnergyModel::new(Nonlinearity::cubic(), Potential::isotropic(1, 2)?, grid)?;
    let gs = solve_ground_state(&model, None, &GroundStateOptions::default())?;
    let spec = lowest_eigenpairs(&model, &gs.omega, 4, &lobpcg(), 1)?;
    let elapsed = start.elapsed();
    let d = &gradient(&gs.omega)[0];
    let overlap = spec.eigenfields[1].dot(d).abs() / (spec.eigenfields[1].l2_norm() * d.l2_norm());
    let (c, n2, l0, l1) = (
        gs.energy,
        gs.h1_norm_sq,
        spec.eigenvalues[0],
        spec.eigenvalues[1],
    );
    Ok(Verdict::new(
        &[
            ("level", (c - 4.0 / 3.0).abs() <= 1e-6),
            ("h1 norm", (n2 - 16.0 / 3.0).abs() <= 1e-6),
            ("lowest eigenvalue", (l0 + 3.0).abs() <= 1e-4),
            ("kernel eigenvalue", l1.abs() <= 1e-6),
            ("kernel overlap", overlap >= 0.999),
            ("runtime", elapsed <= C1_RUNTIME),
        ],
        format!(
            "c = {c:.10}, |omega|^2 = {n2:.10}, lambda0 = {l0:.8}, lambda1 = {l1:.2e}, \
             overlap = {overlap:.8}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn ground_state_certification(gs: &GroundState, elapsed: Duration) -> Outcome {
    let oracle = ShootingProfile::cubic(2);
    let mass = gs.omega.mul(&gs.omega).integral();
    let mass_ref = oracle.l2_norm_sq();
    let rel = (mass - mass_ref).abs() / mass_ref;
    let vals = gs.omega.values();
    let sign_constant = vals.iter().all(|v| *v >= -1e-12) || vals.iter().all(|v| *v <= 1e-12);
    Ok(Verdict::new(
        &[
            ("gradient residual", gs.gradient_residual <= 1e-8),
            ("sign", sign_constant),
            ("nehari identity", gs.nehari_residual <= 1e-8),
            ("shooting mass", rel <= 1e-3),
            ("decay rate", (gs.decay.rate - 1.0).abs() <= 0.05),
            ("runtime", elapsed <= C2_RUNTIME),
        ],
        format!(
            "residual = {:.2e}, nehari = {:.2e}, mass = {mass:.8} vs shooting {mass_ref:.8} \
             (rel {rel:.2e}), decay = {:.4}, {:.1} s",
            gs.gradient_residual,
            gs.nehari_residual,
            gs.decay.rate,
            elapsed.as_secs_f64()
        ),
    ))
}

fn kernel_structure(model: &EnergyModel, gs: &GroundState) -> Outcome {
    let spec = lowest_eigenpairs(model, &gs.omega, 6, &lobpcg(), 5)?;
    // -Laplacian + 1 - omega^2 annihilates omega, a radial kernel direction besides translations.
    let u = gs.omega.mul(&gs.omega);
    let degenerate = analyze_operator(&u, &gs.omega, 6, &lobpcg(), 6)?;
    let mut worst: f64 = 0.0;
    for v in &degenerate.y_basis {
        let rep = symmetry_check(v, &u, &degenerate, 1e-4)?;
        worst = worst.max(rep.remainder_angular_fraction.unwrap_or(0.0));
    }
    let n = model.grid.dim;
    Ok(Verdict::new(
        &[
            ("full kernel", spec.kernel_dim_full == n),
            ("radial kernel", spec.kernel_dim_radial == 0),
            (
                "degenerate radial kernel",
                degenerate.kernel_dim_radial == 1,
            ),
            ("angular fraction", worst <= 1e-4),
        ],
        format!(
            "cubic kernel {} (radial {}), degenerate operator kernel {} (radial {}), \
             angular fraction {worst:.2e}",
            spec.kernel_dim_full,
            spec.kernel_dim_radial,
            degenerate.kernel_dim_full,
            degenerate.kernel_dim_radial
        ),
    ))
}

/// Smooth random field: Gaussians with random centers, widths and amplitudes.
fn random_field(grid: GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let bumps: Vec<(f64, Vec<f64>, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                (0..grid.dim).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                rng.gen_range(1.0..2.5),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(a, c, s)| {
                let r2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi - ci).powi(2)).sum();
                a * (-r2 / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

fn zero_eps_identities(model: &EnergyModel, gs: &GroundState, cfg: &RunConfig) -> Outcome {
    let k = 16;
    let spec = spectrum_stage(model, gs, cfg)?;
    let (modes, _) = modes_stage(gs, cfg, k)?;
    let basis = build_basis(&modes, &spec, k, cfg.reduction.mode)?;
    let mut s = reduction_settings(cfg, &gs.omega);
    s.tol_fix = 1e-12;
    s.krylov.tol = 1e-12;
    let r = Reducer::new(model, &basis, &gs.omega, s)?;
    let u = basis.project(&gs.omega).scaled(1.01);
    let c = basis.coeffs(&u);
    let pi = solve_pi_k(model, &basis, &u, None, &s)?;
    let psi0 = r.eval_psi(&c, &[0.0, 0.0], 0.0, None)?.value;
    let (mut w_gap, mut psi_gap): (f64, f64) = (0.0, 0.0);
    for y in [[0.0, 0.0], [0.8, -0.3], [-0.5, 1.1]] {
        let ev = r.eval_psi(&c, &y, 0.0, None)?;
        w_gap = w_gap.max(ev.correction.w.sub(&translate(&pi.pi, &y)).h1_norm());
        psi_gap = psi_gap.max((ev.value - psi0).abs());
    }
    let comp = selected_complement(&basis, &gradient(&gs.omega), Selector::EPerp)?;
    let frame = r.frame(&[0.0, 0.0])?;
    let weight = model.fprime_field(&u);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(11));
    let mut op_gap: f64 = 0.0;
    for _ in 0..4 {
        let w = frame.project_perp(&random_field(model.grid, &mut rng));
        let a = r.apply_l(&frame, 0.0, &u, &w)?;
        let b = hessian_apply(&comp, &weight, &comp.lift(&w)).field;
        op_gap = op_gap.max(a.sub(&b).h1_norm() / w.h1_norm());
    }
    let l0 = r.inverse_bound_l(&frame, 0.0, &u)?;
    let e = projected_hessian_inverse_bound(
        model,
        &basis,
        &gradient(&gs.omega),
        &u,
        Selector::EPerp,
        cfg.seed,
    )?;
    Ok(Verdict::new(
        &[
            ("correction", w_gap <= 1e-9),
            ("reduced energy", psi_gap <= 1e-10),
            ("frozen operator", op_gap <= 1e-8),
        ],
        format!(
            "|w - pi(.-y)| = {w_gap:.2e}, Psi spread = {psi_gap:.2e}, operator gap = {op_gap:.2e}, \
             sigma_min {:.6} vs {:.6}",
            l0.sigma_min, e.sigma_min
        ),
    ))
}

fn localization_formula(gs: &GroundState) -> Outcome {
    let mut checks = Vec::new();
    let mut detail = Vec::new();
    let shifted = translate(&gs.omega, &[0.6, -0.4]);
    for deg in [2, 4] {
        let q = Polynomial::isotropic(2, deg)?;
        let loc = localization(&q, &gs.omega)?;
        let base = gamma_extremum(&q, &shifted, 1.0, &[0.0, 0.0], 1e-12)?;
        let mut drift: f64 = 0.0;
        for lam in [0.1, 10.0] {
            let y = gamma_extremum(&q.scaled(lam), &shifted, 1.0, &[0.0, 0.0], 1e-12)?;
            drift = drift.max((y[0] - base[0]).abs().max((y[1] - base[1]).abs()));
        }
        checks.push((
            deg,
            loc.agreement <= 1e-4,
            loc.sigma > 0.0 && loc.a_k > 0.0,
            drift <= 1e-8,
        ));
        detail.push(format!(
            "|x|^{deg}: agreement {:.2e}, A = {:.4}, argmin drift {drift:.1e}",
            loc.agreement, loc.a_k
        ));
    }
    let named: Vec<(&str, bool)> = checks
        .iter()
        .flat_map(|&(_, a, b, c)| {
            [
                ("form agreement", a),
                ("definite", b),
                ("scale invariance", c),
            ]
        })
        .collect();
    Ok(Verdict::new(&named, detail.join("; ")))
}

/// Certificate rows of a pipeline report whose names start with one of `prefixes`.
fn certificate_rows(report: &Value, prefixes: &[&str]) -> Vec<(String, bool, String)> {
    report["certificates"]
        .as_array()
        .map(|rows| {
            rows.iter()
                .filter_map(|c| {
                    let name = c["name"].as_str()?.to_string();
                    if !prefixes.iter().any(|p| name.starts_with(p)) {
                        return None;
                    }
                    let passed = c["passed"].as_bool().unwrap_or(false);
                    let summary = format!(
                        "{name} = {} {} {}",
                        c["value"],
                        c["relation"].as_str().unwrap_or("?"),
                        c["threshold"]
                    );
                    Some((name, passed, summary))
                })
                .collect()
        })
        .unwrap_or_default()
}

fn report_verdict(
    report: &Value,
    prefixes: &[&str],
    extra: &[(&str, bool)],
    note: &str,
) -> Verdict {
    let rows = certificate_rows(report, prefixes);
    let mut checks: Vec<(&str, bool)> = rows.iter().map(|r| (r.0.as_str(), r.1)).collect();
    checks.extend_from_slice(extra);
    if rows.is_empty() {
        checks.push(("certificate rows present", false));
    }
    let mut detail: Vec<String> = rows.iter().map(|r| r.2.clone()).collect();
    if !note.is_empty() {
        detail.push(note.to_string());
    }
    Verdict::new(&checks, detail.join("; "))
}

struct CliRun {
    report: Value,
    csv: Vec<u8>,
    elapsed: Duration,
    status: Option<i32>,
}

fn run_scan(dir: &Path) -> Result<CliRun, Box<dyn std::error::Error>> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_varred-nls"))
        .args(["--quiet", "--out"])
        .arg(dir)
        .arg("scan-epsilon")
        .output()?;
    let elapsed = start.elapsed();
    if !out.stderr.is_empty() {
        eprint!("{}", String::from_utf8_lossy(&out.stderr));
    }
    let report = serde_json::from_slice(&std::fs::read(dir.join("report.json"))?)?;
    Ok(CliRun {
        report,
        csv: std::fs::read(dir.join("scan.csv"))?,
        elapsed,
        status: out.status.code(),
    })
}

fn outcome(r: Outcome) -> Verdict {
    r.unwrap_or_else(Verdict::error)
}

fn main() -> ExitCode {
    let mut results = BTreeMap::new();
    results.insert(1, outcome(closed_form_limit()));

    let cfg = RunConfig::default();
    let model = cfg
        .energy_model()
        .expect("default configuration builds a model");
    let start = Instant::now();
    let gs = ground_state_stage(&model, &cfg);
    let gs_time = start.elapsed();
    match gs {
        Ok(gs) => {
            results.insert(2, outcome(ground_state_certification(&gs, gs_time)));
            results.insert(3, outcome(kernel_structure(&model, &gs)));
            results.insert(5, outcome(zero_eps_identities(&model, &gs, &cfg)));
            results.insert(6, outcome(localization_formula(&gs)));
        }
        Err(e) => {
            for n in [2, 3, 5, 6] {
                results.insert(n, Verdict::error(&e));
            }
        }
    }

    let dirs = (tempfile::tempdir(), tempfile::tempdir());
    let runs = match dirs {
        (Ok(a), Ok(b)) => (run_scan(a.path()), run_scan(b.path())),
        (Err(e), _) | (_, Err(e)) => {
            let msg = e.to_string();
            (Err(msg.clone().into()), Err(msg.into()))
        }
    };
    match &runs.0 {
        Ok(run) => {
            let exit_ok = run.status == Some(0);
            results.insert(4, report_verdict(&run.report, &["reduce."], &[], ""));
            results.insert(
                7,
                report_verdict(
                    &run.report,
                    &[
                        "scan.max_residual",
                        "scan.lambda_",
                        "scan.eta_",
                        "scan.distance_",
                    ],
                    &[
                        ("runtime", run.elapsed <= C7_RUNTIME),
                        ("exit status", exit_ok),
                    ],
                    &format!("full scan {:.1} s", run.elapsed.as_secs_f64()),
                ),
            );
            results.insert(
                8,
                report_verdict(&run.report, &["scan.orbit_distance"], &[], ""),
            );
        }
        Err(e) => {
            for n in [4, 7, 8] {
                results.insert(n, Verdict::error(e));
            }
        }
    }
    results.insert(
        9,
        match (&runs.0, &runs.1) {
            (Ok(a), Ok(b)) => Verdict::new(
                &[("identical scan.csv", a.csv == b.csv && !a.csv.is_empty())],
                format!("{} and {} bytes", a.csv.len(), b.csv.len()),
            ),
            (Err(e), _) | (_, Err(e)) => Verdict::error(e),
        },
    );

    let mut all = true;
    for (n, v) in &results {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {n}: {tag} {}", v.detail);
        all &= v.passed;
    }
    if all && results.len() == 9 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
