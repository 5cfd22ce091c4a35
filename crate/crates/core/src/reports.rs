//! Pipeline orchestration, certificate tables, scaling fits and deterministic report files.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::config::{BasisMode, RunConfig};
use crate::eigen::LobpcgOptions;
use crate::error::{Error, Result};
use crate::field::{radial_extract, write_field, write_profile_csv, Field};
use crate::galerkin::{
    cloud_gap, eigen_basis, mollified_basis, mu_cap, projected_hessian_inverse_bound,
    sample_contraction_quotients, solve_pi_k, test_cloud, weighted_modes, CloudGap, GalerkinBasis,
    ReductionSettings, Selector,
};
use crate::ground_state::{
    check_uniqueness, solve_ground_state, GroundState, GroundStateOptions, UniquenessReport,
};
use crate::linearization::{lowest_eigenpairs, SpectralData};
use crate::model::{validate_hypotheses, EnergyModel, HypothesisReport};
use crate::perturbation::{localization, Reducer, ScanRow, SemiclassicalSolution};

/// One named inequality with its measured value.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub threshold: f64,
    pub unit: &'static str,
    pub passed: bool,
}

impl Certificate {
    pub fn at_most(name: &str, value: f64, threshold: f64, unit: &'static str) -> Self {
        Certificate {
            name: name.into(),
            value,
            relation: "<=",
            threshold,
            unit,
            passed: value <= threshold,
        }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64, unit: &'static str) -> Self {
        Certificate {
            name: name.into(),
            value,
            relation: ">=",
            threshold,
            unit,
            passed: value >= threshold,
        }
    }

    pub fn equals(name: &str, value: f64, threshold: f64, unit: &'static str) -> Self {
        Certificate {
            name: name.into(),
            value,
            relation: "==",
            threshold,
            unit,
            passed: value == threshold,
        }
    }
}

/// Least-squares line through `(log eps, log value)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// False when `r2 < 0.9`: no clean power law.
    pub clean: bool,
    pub points: usize,
}

pub fn fit_scaling(series: &[(f64, f64)]) -> Result<ScalingFit> {
    if series.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs at least 3 points, got {}",
            series.len()
        )));
    }
    if let Some(p) = series.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs positive data, got {p:?}"
        )));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput(
            "scaling fit needs distinct eps values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // A constant series is fitted exactly by a flat line.
    let r2 = if syy <= 1e-300 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r2,
        clean: r2 >= 0.9,
        points: series.len(),
    })
}

/// Hex SHA-256 of the canonical TOML form of the configuration.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let digest = Sha256::digest(cfg.to_toml_string()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn reduction_settings(cfg: &RunConfig, omega: &Field) -> ReductionSettings {
    let n = omega.h1_norm();
    let t = &cfg.tolerances;
    ReductionSettings {
        delta: cfg.reduction.delta_rel * n,
        tau: cfg.reduction.tau_rel * n,
        rho: cfg.reduction.rho_rel * n,
        tol_fix: t.fix,
        fix_max_iter: t.fix_max_iter,
        tol_crit: t.crit,
        crit_max_iter: t.crit_max_iter.min(100),
        krylov: t.krylov(),
    }
}

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

/// Build the model and check the hypotheses; failures stop the pipeline.
pub fn validate_stage(cfg: &RunConfig) -> Result<(EnergyModel, HypothesisReport)> {
    staged(
        "validate",
        (|| {
            cfg.validate()?;
            let model = cfg.energy_model()?;
            let report = validate_hypotheses(&model, &cfg.scan.eps);
            if !report.all_passed() {
                let names: Vec<String> = report
                    .failures()
                    .iter()
                    .map(|c| format!("{}: {}", c.name, c.detail))
                    .collect();
                return Err(Error::Hypothesis(names.join("; ")));
            }
            Ok((model, report))
        })(),
    )
}

pub fn ground_state_stage(model: &EnergyModel, cfg: &RunConfig) -> Result<GroundState> {
    let t = &cfg.tolerances;
    let opts = GroundStateOptions {
        tol: t.crit,
        max_iter: t.crit_max_iter,
        ..Default::default()
    };
    staged("ground-state", solve_ground_state(model, None, &opts))
}

/// Re-solve from three random seeds; a spread above the tolerance flags several critical orbits.
pub fn uniqueness_stage(
    model: &EnergyModel,
    gs: &GroundState,
    cfg: &RunConfig,
) -> Result<UniquenessReport> {
    let t = &cfg.tolerances;
    let opts = GroundStateOptions {
        tol: t.crit,
        max_iter: t.crit_max_iter,
        ..Default::default()
    };
    staged(
        "ground-state",
        check_uniqueness(model, gs, 3, cfg.seed.wrapping_add(5), &opts, t.uniqueness),
    )
}

pub fn spectrum_stage(
    model: &EnergyModel,
    gs: &GroundState,
    cfg: &RunConfig,
) -> Result<SpectralData> {
    let t = &cfg.tolerances;
    let opts = LobpcgOptions {
        tol: t.eig,
        max_iter: t.eig_max_iter,
    };
    staged(
        "spectrum",
        lowest_eigenpairs(model, &gs.omega, cfg.spectrum.eigenpairs, &opts, cfg.seed),
    )
}

/// Weighted modes shared by every Galerkin dimension up to `count`.
pub fn modes_stage(
    gs: &GroundState,
    cfg: &RunConfig,
    count: usize,
) -> Result<(Vec<Field>, Vec<f64>)> {
    let t = &cfg.tolerances;
    let opts = LobpcgOptions {
        tol: t.eig,
        max_iter: t.eig_max_iter,
    };
    staged(
        "modes",
        weighted_modes(&gs.omega, count, &opts, cfg.seed.wrapping_add(1)),
    )
}

pub fn build_basis(
    modes: &[Field],
    spec: &SpectralData,
    k: usize,
    mode: BasisMode,
) -> Result<GalerkinBasis> {
    match mode {
        BasisMode::Eigen => eigen_basis(modes, &spec.y_basis, k),
        BasisMode::Mollified => mollified_basis(modes, &spec.y_basis, k, 0.9),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisDiagnostics {
    pub k: usize,
    pub mode: BasisMode,
    pub degeneracy_dim: usize,
    pub orthonormality_error: f64,
    pub degeneracy_overlap: f64,
    pub mu_k: Option<f64>,
    pub mu_cap: f64,
    pub gram_offdiag: Option<f64>,
    pub decay_rates: Vec<f64>,
    pub pencil_values: Vec<f64>,
}

pub fn basis_diagnostics(b: &GalerkinBasis, pencil: &[f64]) -> BasisDiagnostics {
    BasisDiagnostics {
        k: b.k,
        mode: b.mode,
        degeneracy_dim: b.degeneracy_dim,
        orthonormality_error: b.orthonormality_error(),
        degeneracy_overlap: b.degeneracy_overlap(),
        mu_k: b.mu_k,
        mu_cap: mu_cap(b.k),
        gram_offdiag: b.gram_offdiag,
        decay_rates: b.decay_rates.clone(),
        pencil_values: pencil[..b.k.min(pencil.len())].to_vec(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PiStudyRow {
    pub k: usize,
    /// `|pi_k(P_k omega)|`.
    pub pi_norm: f64,
    /// `|P_k^perp omega|`.
    pub complement_norm: f64,
    pub iterations: usize,
    pub max_quotient: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseBoundRow {
    pub k: usize,
    pub selector: Selector,
    pub sigma_min: f64,
    pub bound: f64,
    pub lanczos_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionStudy {
    pub settings: ReductionSettings,
    pub pi_study: Vec<PiStudyRow>,
    pub inverse_bounds: Vec<InverseBoundRow>,
    pub mollified_k8: Option<BasisDiagnostics>,
    pub contraction_quotients: Vec<f64>,
    /// Gaps between `I_k` and `I` on a cloud around `omega`, per `k`.
    pub cloud_gaps: Vec<(usize, CloudGap)>,
}

/// Certificate study of the limit reduction at the dimensions in `ks` (each at most `modes.len()`).
pub fn reduction_study(
    model: &EnergyModel,
    gs: &GroundState,
    spec: &SpectralData,
    modes: &[Field],
    cfg: &RunConfig,
    ks: &[usize],
) -> Result<ReductionStudy> {
    staged(
        "reduce",
        (|| {
            let s = reduction_settings(cfg, &gs.omega);
            let kmax = *ks.iter().max().unwrap_or(&0);
            let mut pi_study = Vec::new();
            let mut inverse_bounds = Vec::new();
            let mut cloud_gaps = Vec::new();
            let cloud = test_cloud(
                &gs.omega,
                10,
                0.05 * gs.omega.h1_norm(),
                cfg.seed.wrapping_add(2),
            );
            for &k in ks {
                let b = build_basis(modes, spec, k, cfg.reduction.mode)?;
                let v = b.project(&gs.omega);
                let pi = solve_pi_k(model, &b, &v, None, &s)?;
                pi_study.push(PiStudyRow {
                    k,
                    pi_norm: pi.norm,
                    complement_norm: b.project_perp(&gs.omega).h1_norm(),
                    iterations: pi.iterations,
                    max_quotient: pi.quotients.iter().copied().fold(0.0, f64::max),
                });
                cloud_gaps.push((k, cloud_gap(model, &b, &cloud, &s)?));
            }
            for (k, sels) in [
                (0, vec![Selector::XkPerp]),
                (
                    kmax,
                    vec![Selector::XkPerp, Selector::WPerp, Selector::EPerp],
                ),
            ] {
                let b = build_basis(modes, spec, k, cfg.reduction.mode)?;
                let v = if k == 0 {
                    gs.omega.clone()
                } else {
                    b.project(&gs.omega)
                };
                for sel in sels {
                    let ib = projected_hessian_inverse_bound(
                        model,
                        &b,
                        &spec.z_basis,
                        &v,
                        sel,
                        cfg.seed.wrapping_add(3),
                    )?;
                    inverse_bounds.push(InverseBoundRow {
                        k,
                        selector: sel,
                        sigma_min: ib.sigma_min,
                        bound: ib.bound,
                        lanczos_steps: ib.steps,
                    });
                }
            }
            let mollified_k8 = if modes.len() >= 8 {
                let b = mollified_basis(modes, &spec.y_basis, 8, 0.9)?;
                Some(basis_diagnostics(&b, &[]))
            } else {
                None
            };
            let b = build_basis(modes, spec, kmax, cfg.reduction.mode)?;
            let contraction_quotients = sample_contraction_quotients(
                model,
                &b,
                &gs.omega,
                &s,
                20,
                cfg.seed.wrapping_add(4),
            )?;
            Ok(ReductionStudy {
                settings: s,
                pi_study,
                inverse_bounds,
                mollified_k8,
                contraction_quotients,
                cloud_gaps,
            })
        })(),
    )
}

/// Semiclassical solutions along the scan, continuing each from the previous one.
pub fn scan_stage(
    model: &EnergyModel,
    gs: &GroundState,
    basis: &GalerkinBasis,
    cfg: &RunConfig,
    eps_list: &[f64],
) -> Result<(Vec<ScanRow>, Vec<SemiclassicalSolution>)> {
    let s = reduction_settings(cfg, &gs.omega);
    let reducer = staged("scan", Reducer::new(model, basis, &gs.omega, s))?;
    let mut rows = Vec::new();
    let mut sols: Vec<SemiclassicalSolution> = Vec::new();
    for &eps in eps_list {
        let seed = sols.last().map(|p| (p.c.as_slice(), p.y.as_slice()));
        let sol = staged(
            &format!("scan eps={eps}"),
            reducer.solve_semiclassical(eps, seed, cfg.tolerances.final_residual),
        )?;
        rows.push(staged(
            &format!("scan eps={eps}"),
            reducer.report_row(&sol),
        )?);
        sols.push(sol);
    }
    Ok((rows, sols))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanFits {
    pub lambda: Option<ScalingFit>,
    pub eta: Option<ScalingFit>,
    pub distance: Option<ScalingFit>,
}

pub fn scan_fits(rows: &[ScanRow]) -> ScanFits {
    let series = |f: &dyn Fn(&ScanRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.eps > 0.0)
            .map(|r| (r.eps, f(r).abs()))
            .collect();
        fit_scaling(&pts).ok()
    };
    ScanFits {
        lambda: series(&|r| r.lambda),
        eta: series(&|r| r.eta),
        distance: series(&|r| r.distance),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub seed: u64,
    /// Solutions of the original problem are `u(x) = v(x / eps)`; everything here is in `v`.
    pub rescaling: &'static str,
    pub hypotheses: HypothesisReport,
    pub ground_state: GroundState,
    pub uniqueness: UniquenessReport,
    pub spectrum: SpectralData,
    pub basis: BasisDiagnostics,
    pub reduction: ReductionStudy,
    pub localization: Option<crate::perturbation::LocalizationData>,
    pub scan: Vec<ScanRow>,
    /// Largest scanned `eps` whose row meets the residual and contraction bounds.
    pub largest_certified_eps: Option<f64>,
    pub fits: ScanFits,
    pub certificates: Vec<Certificate>,
}

impl PipelineReport {
    pub fn all_passed(&self) -> bool {
        self.certificates.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Certificate> {
        self.certificates.iter().filter(|c| !c.passed).collect()
    }
}

fn monotone_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Certificates for the ground state, spectrum and basis.
pub fn early_certificates(
    model: &EnergyModel,
    gs: &GroundState,
    spec: &SpectralData,
    basis: &BasisDiagnostics,
    cfg: &RunConfig,
) -> Vec<Certificate> {
    let t = &cfg.tolerances;
    let mut c = vec![
        Certificate::at_most(
            "ground_state.gradient_residual",
            gs.gradient_residual,
            t.crit,
            "H1 norm",
        ),
        Certificate::at_most(
            "ground_state.nehari_residual",
            gs.nehari_residual,
            t.crit,
            "relative",
        ),
        Certificate::at_most(
            "ground_state.decay_rate_error",
            (gs.decay.rate - 1.0).abs(),
            0.05,
            "1/length",
        ),
        Certificate::equals(
            "spectrum.kernel_dim_full",
            spec.kernel_dim_full as f64,
            model.grid.dim as f64,
            "count",
        ),
        Certificate::at_most(
            "basis.orthonormality_error",
            basis.orthonormality_error,
            1e-10,
            "H1 inner product",
        ),
        Certificate::at_most(
            "basis.degeneracy_overlap",
            basis.degeneracy_overlap,
            1e-10,
            "H1 inner product",
        ),
    ];
    if basis.mode == BasisMode::Eigen {
        let min_rate = basis
            .decay_rates
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        c.push(Certificate::at_least(
            "basis.min_decay_rate",
            min_rate,
            0.5,
            "1/length",
        ));
    }
    c
}

pub fn reduction_certificates(study: &ReductionStudy, kmax: usize) -> Vec<Certificate> {
    let mut c = Vec::new();
    if let Some(m) = &study.mollified_k8 {
        let mu = m.mu_k.unwrap_or(f64::NAN);
        c.push(Certificate::at_most(
            "reduce.mollified_gram_offdiag_k8",
            m.gram_offdiag.unwrap_or(f64::NAN),
            2.0 * mu + mu * mu,
            "H1 inner product",
        ));
        c.push(Certificate::at_most(
            "reduce.mollified_mu_k8",
            mu,
            m.mu_cap,
            "H1 norm",
        ));
    }
    let qmax = study
        .contraction_quotients
        .iter()
        .copied()
        .fold(0.0, f64::max);
    c.push(Certificate::at_most(
        "reduce.contraction_quotient_max",
        qmax,
        0.55,
        "ratio",
    ));
    if let Some(r) = study
        .inverse_bounds
        .iter()
        .find(|r| r.k == kmax && r.selector == Selector::XkPerp)
    {
        c.push(Certificate::at_most(
            "reduce.inverse_bound_xk_perp",
            r.bound,
            2.2,
            "operator norm",
        ));
    }
    let norms: Vec<f64> = study.pi_study.iter().map(|r| r.pi_norm).collect();
    c.push(Certificate::equals(
        "reduce.pi_norm_decreasing",
        monotone_decreasing(&norms) as u8 as f64,
        1.0,
        "flag",
    ));
    let gap = |k: usize| {
        study
            .cloud_gaps
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, g)| *g)
    };
    if let (Some(a), Some(b)) = (gap(8), gap(16)) {
        c.push(Certificate::at_most(
            "reduce.cloud_value_gap_ratio_16_8",
            b.value_gap / a.value_gap,
            0.5,
            "ratio",
        ));
        c.push(Certificate::at_most(
            "reduce.cloud_grad_gap_ratio_16_8",
            b.grad_gap / a.grad_gap,
            0.5,
            "ratio",
        ));
    }
    let sup_pi = study
        .cloud_gaps
        .iter()
        .map(|(_, g)| g.sup_pi)
        .fold(0.0, f64::max);
    c.push(Certificate::at_most(
        "reduce.sup_pi_over_cloud",
        sup_pi,
        study.settings.tau,
        "H1 norm",
    ));
    c
}

pub fn scan_certificates(
    rows: &[ScanRow],
    fits: &ScanFits,
    nstar: f64,
    omega_norm: f64,
    cfg: &RunConfig,
) -> Vec<Certificate> {
    let pos: Vec<&ScanRow> = rows.iter().filter(|r| r.eps > 0.0).collect();
    let mut c = vec![Certificate::at_most(
        "scan.max_residual",
        rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        cfg.tolerances.final_residual,
        "H1 norm",
    )];
    let nan = f64::NAN;
    let lam = fits.lambda;
    c.push(Certificate::at_least(
        "scan.lambda_slope",
        lam.map_or(nan, |f| f.slope),
        nstar - 0.2,
        "log-log slope",
    ));
    c.push(Certificate::at_least(
        "scan.lambda_r2",
        lam.map_or(nan, |f| f.r2),
        0.95,
        "coefficient of determination",
    ));
    let lam_ratios: Vec<f64> = pos.iter().map(|r| r.lambda_ratio).collect();
    let spread = lam_ratios.iter().copied().fold(0.0, f64::max)
        / lam_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    c.push(Certificate::at_most(
        "scan.lambda_ratio_spread",
        if lam_ratios.is_empty() { nan } else { spread },
        3.0,
        "ratio",
    ));
    let ratios: Vec<f64> = pos.iter().map(|r| r.eta_ratio.abs()).collect();
    c.push(Certificate::equals(
        "scan.eta_ratio_decreasing",
        monotone_decreasing(&ratios) as u8 as f64,
        1.0,
        "flag",
    ));
    let last_first = if ratios.len() >= 2 {
        ratios[ratios.len() - 1] / ratios[0]
    } else {
        nan
    };
    c.push(Certificate::at_most(
        "scan.eta_ratio_last_over_first",
        last_first,
        0.5,
        "ratio",
    ));
    c.push(Certificate::at_least(
        "scan.distance_slope",
        fits.distance.map_or(nan, |f| f.slope),
        nstar - 0.3,
        "log-log slope",
    ));
    let orbit: Vec<f64> = pos.iter().map(|r| r.orbit_distance).collect();
    c.push(Certificate::equals(
        "scan.orbit_distance_decreasing",
        monotone_decreasing(&orbit) as u8 as f64,
        1.0,
        "flag",
    ));
    c.push(Certificate::at_most(
        "scan.orbit_distance_smallest_eps",
        orbit.last().copied().unwrap_or(nan),
        0.02 * omega_norm,
        "H1 norm",
    ));
    c
}

/// Every stage in order; certificate failures are recorded rather than raised.
pub fn run_pipeline(cfg: &RunConfig, out: Option<&Path>) -> Result<PipelineReport> {
    let config_hash = config_hash(cfg)?;
    let (model, hypotheses) = validate_stage(cfg)?;
    let gs = ground_state_stage(&model, cfg)?;
    let uniqueness = uniqueness_stage(&model, &gs, cfg)?;
    let spec = spectrum_stage(&model, &gs, cfg)?;
    let k = cfg.reduction.k;
    let count = k.max(16);
    let (modes, pencil) = modes_stage(&gs, cfg, count)?;
    let basis = staged("basis", build_basis(&modes, &spec, k, cfg.reduction.mode))?;
    let diag = basis_diagnostics(&basis, &pencil);
    let ks: Vec<usize> = [4, 8, 16].into_iter().filter(|&j| j <= count).collect();
    let study = reduction_study(&model, &gs, &spec, &modes, cfg, &ks)?;
    let (scan, sols) = scan_stage(&model, &gs, &basis, cfg, &cfg.scan.eps)?;
    let localization = match sols.iter().find(|s| s.eps > 0.0) {
        Some(sol) => {
            let u = basis.space.combine(&sol.c);
            let s = reduction_settings(cfg, &gs.omega);
            let pi = staged("localization", solve_pi_k(&model, &basis, &u, None, &s))?;
            Some(staged(
                "localization",
                localization(model.potential.leading(), &u.add(&pi.pi)),
            )?)
        }
        None => None,
    };
    let fits = scan_fits(&scan);
    let largest_certified_eps = scan
        .iter()
        .filter(|r| r.residual <= cfg.tolerances.final_residual && r.max_quotient <= 0.55)
        .map(|r| r.eps)
        .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))));
    let mut certificates = early_certificates(&model, &gs, &spec, &diag, cfg);
    certificates.push(Certificate::at_most(
        "ground_state.uniqueness_spread",
        uniqueness.distances.iter().copied().fold(0.0, f64::max),
        cfg.tolerances.uniqueness,
        "relative H1 norm",
    ));
    certificates.extend(reduction_certificates(&study, *ks.last().unwrap_or(&k)));
    certificates.extend(scan_certificates(
        &scan,
        &fits,
        model.potential.degree() as f64,
        gs.omega.h1_norm(),
        cfg,
    ));
    if let Some(loc) = &localization {
        let sign = if loc.sigma > 0.0 {
            loc.a_k
        } else {
            -loc.largest_eigenvalue
        };
        certificates.push(Certificate::at_least(
            "localization.definite_hessian",
            sign,
            f64::MIN_POSITIVE,
            "length^(n*)",
        ));
        certificates.push(Certificate::at_most(
            "localization.hessian_form_agreement",
            loc.agreement,
            1e-4,
            "relative",
        ));
    }
    let report = PipelineReport {
        config_hash,
        seed: cfg.seed,
        rescaling: "u(x) = v(x / eps)",
        hypotheses,
        ground_state: gs,
        uniqueness,
        spectrum: spec,
        basis: diag,
        reduction: study,
        localization,
        scan,
        largest_certified_eps,
        fits,
        certificates,
    };
    if let Some(dir) = out {
        write_pipeline(&report, &sols, dir)?;
    }
    Ok(report)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Scan rows as CSV; every row carries the configuration hash.
pub fn write_scan_csv(rows: &[ScanRow], config_hash: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let dim = rows.first().map_or(0, |r| r.y.len());
    let mut header: Vec<String> = [
        "config_hash",
        "eps",
        "psi",
        "limit_energy",
        "gamma",
        "eta",
        "eta_ratio",
        "lambda",
        "lambda_ratio",
        "lambda_on_solution",
        "residual",
        "correction_residual",
        "max_quotient",
        "frozen_sigma_min",
        "distance",
        "orbit_distance",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dim).map(|a| format!("y{a}")));
    header.push("newton_iterations".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![config_hash.to_string()];
        for v in [
            r.eps,
            r.psi,
            r.limit_energy,
            r.gamma,
            r.eta,
            r.eta_ratio,
            r.lambda,
            r.lambda_ratio,
            r.lambda_on_solution,
            r.residual,
            r.correction_residual,
            r.max_quotient,
            r.frozen_sigma_min,
            r.distance,
            r.orbit_distance,
        ] {
            rec.push(format!("{v:e}"));
        }
        rec.extend(r.y.iter().map(|v| format!("{v:e}")));
        rec.push(r.newton_iterations.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ground_state(gs: &GroundState, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(gs, &dir.join("ground_state.json"))?;
    write_profile_csv(&radial_extract(&gs.omega), &dir.join("profile.csv"))?;
    write_field(&gs.omega, &dir.join("omega.bin"))
}

fn write_pipeline(
    report: &PipelineReport,
    sols: &[SemiclassicalSolution],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(report, &dir.join("report.json"))?;
    write_scan_csv(&report.scan, &report.config_hash, &dir.join("scan.csv"))?;
    write_profile_csv(
        &radial_extract(&report.ground_state.omega),
        &dir.join("profile.csv"),
    )?;
    write_field(&report.ground_state.omega, &dir.join("omega.bin"))?;
    for (i, s) in sols.iter().enumerate() {
        write_field(&s.eval.lift, &dir.join(format!("solution_{i}.bin")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_power_has_exact_slope() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e| (e, e * e))
            .collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.clean);
    }

    #[test]
    fn first_order_correction_bends_slope_up() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e| (e, e * e * (1.0 + e)))
            .collect();
        let f = fit_scaling(&pts).unwrap();
        assert!(f.slope > 2.0 && f.slope < 2.3, "{}", f.slope);
    }

    #[test]
    fn constant_series_is_flat() {
        let f = fit_scaling(&[(0.2, 3.0), (0.1, 3.0), (0.05, 3.0)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn bad_series_rejected() {
        assert!(fit_scaling(&[(0.2, 1.0), (0.1, 2.0)]).is_err());
        assert!(fit_scaling(&[(0.2, 1.0), (0.1, 0.0), (0.05, 1.0)]).is_err());
    }

    #[test]
    fn noisy_series_flagged() {
        let f = fit_scaling(&[(0.2, 1.0), (0.1, 5.0), (0.05, 0.2), (0.025, 3.0)]).unwrap();
        assert!(!f.clean);
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.seed = 1;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }

    #[test]
    fn superlinear_nonlinearity_of_order_two_fails_validation() {
        let mut cfg = RunConfig::default();
        cfg.nonlinearity.terms[0].exponent = 2.0;
        let err = validate_stage(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
        assert!(err.to_string().contains("[validate]"));
    }
}
