//! Pipelines. Each stage that fails records a failed check and stops the
//! pipeline; nothing here panics on bad input.

use std::fmt::Display;

use ando_core::ando::{
    ando_dilation, battery_bipolys, battery_hermitian, default_level_cap, natural_variety, purity_horizon, run_battery,
    verify_hermitian_inequality, verify_inequality, BatteryConfig, CommutingPair, Tolerances,
};
use ando_core::bipoly::PolyMatrix;
use ando_core::colligation::{colligation_of, series_oracle, verify_colligation, IntertwiningTriple};
use ando_core::domain::{apply_phi_power, domain_membership};
use ando_core::linalg;
use ando_core::poisson::{poisson_kernel, verify_kernel_identities};
use ando_core::report::VerificationReport;
use ando_core::transfer::{dilation_identity_check, eval_transfer, verify_transfer};
use ando_core::variety::{
    build_variety, commutator_ideal, constrained_poisson, minimal_polynomial, minimal_polynomial_ideal,
    verify_constrained_kernel, NcPolynomial,
};
use ando_core::{Polynomial, Tuple, DEFAULT_TOL};

use crate::config::{ExperimentConfig, MatrixSource, Pipeline, VarietySpec};
use crate::error::Result;
use crate::matrix_io::read_matrix;

/// Largest word length used by the constrained-kernel intertwining check.
const CONSTRAINED_CHECK_LEN: usize = 3;
/// Depth of the two-path colligation series check.
const SERIES_DEPTH: usize = 3;
/// Fourier levels compared in the transfer check.
const FOURIER_LEVELS: usize = 4;
/// Relative tolerance for minimal polynomials computed from data.
const MINPOLY_TOL: f64 = 1e-10;

fn stage<T, E: Display>(rep: &mut VerificationReport, name: &str, tol: f64, r: Result<T, E>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            rep.set_env(&format!("{name}.error"), e.to_string().replace('\n', " "));
            rep.failure(name, tol);
            None
        }
    }
}

fn load_tuple(cfg: &ExperimentConfig, sources: &[MatrixSource], what: &str) -> Result<Tuple> {
    if sources.is_empty() {
        return Err(crate::CliError::Usage(format!("the config gives no matrices for {what}")));
    }
    let mats = sources
        .iter()
        .map(|s| match s {
            MatrixSource::Inline(m) => Ok(m.clone()),
            MatrixSource::File(p) => read_matrix(&cfg.base_dir.join(p)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tuple::new(mats)?)
}

fn level_for(cfg: &ExperimentConfig, f: &Polynomial, t: &Tuple) -> ando_core::Result<usize> {
    match cfg.level {
        Some(l) => Ok(l),
        None => purity_horizon(f, t, default_level_cap(f.n())).map(|(l, _)| l.max(1)),
    }
}

fn generators(spec: &VarietySpec, f: &Polynomial, t: &Tuple) -> ando_core::Result<Vec<NcPolynomial<f64>>> {
    Ok(match spec {
        VarietySpec::None => Vec::new(),
        VarietySpec::Commutator => commutator_ideal(f.n()),
        VarietySpec::Minpoly(Some(c)) => vec![minimal_polynomial_ideal(c)],
        VarietySpec::Minpoly(None) => vec![minimal_polynomial_ideal(&minimal_polynomial(t.get(0), MINPOLY_TOL)?)],
        VarietySpec::Custom(g) => g.clone(),
    })
}

fn variety_name(spec: Option<&VarietySpec>) -> &'static str {
    match spec {
        None => "natural",
        Some(VarietySpec::None) => "none",
        Some(VarietySpec::Commutator) => "commutator",
        Some(VarietySpec::Minpoly(_)) => "minpoly",
        Some(VarietySpec::Custom(_)) => "custom",
    }
}

/// `‖Φ^m(I)‖` with `m = ⌊N/k⌋ + 1`, the truncation tail at level `N`.
fn tail(f: &Polynomial, t: &Tuple, level: usize) -> ando_core::Result<f64> {
    let id = linalg::identity::<f64>(t.dim());
    Ok(linalg::op_norm(&apply_phi_power(f, t, &id, level / f.k() + 1)?))
}

fn kernel(cfg: &ExperimentConfig, tol: f64, rep: &mut VerificationReport) -> Option<()> {
    let f = &cfg.f;
    let t1 = stage(rep, "input.t1", tol, load_tuple(cfg, &cfg.t1, "t1"))?;
    rep.set_env("model.n", f.n());
    rep.set_env("model.dim", t1.dim());
    let m = stage(rep, "model.membership", tol, domain_membership(f, &t1, tol))?;
    rep.slack("model.membership", m.min_eig, tol);
    let level = stage(rep, "model.level", tol, level_for(cfg, f, &t1))?;
    rep.set_env("level", level);
    let k = stage(rep, "kernel", tol, poisson_kernel(f, &t1, level, tol))?;
    let checks = stage(rep, "kernel", tol, verify_kernel_identities(f, &t1, &k, tol))?;
    rep.absorb("", &checks);
    let spec = cfg.variety.as_ref()?;
    if matches!(spec, VarietySpec::None) {
        return Some(());
    }
    rep.set_env("variety.kind", variety_name(Some(spec)));
    let gens = stage(rep, "variety", tol, generators(spec, f, &t1))?;
    let v = stage(rep, "variety", tol, build_variety(f, level, gens))?;
    rep.set_env("variety.dim", v.dim());
    rep.set_env("variety.invariance_defect", format!("{:.6e}", v.invariance_defect()));
    let vr = stage(rep, "variety", tol, v.verify(tol))?;
    rep.absorb("", &vr);
    let kj = stage(rep, "constrained_kernel", tol, constrained_poisson(f, &v, &t1, tol))?;
    let gap = stage(rep, "constrained_kernel", tol, tail(f, &t1, level))?;
    let len = CONSTRAINED_CHECK_LEN.min(level);
    let kr = stage(rep, "constrained_kernel", tol, verify_constrained_kernel(&v, &t1, &kj, len, tol + gap))?;
    rep.absorb("", &kr);
    Some(())
}

fn dilation(cfg: &ExperimentConfig, tol: f64, rep: &mut VerificationReport) -> Option<()> {
    let (f, g) = (&cfg.f, &cfg.g);
    let t1 = stage(rep, "input.t1", tol, load_tuple(cfg, &cfg.t1, "t1"))?;
    let t2 = stage(rep, "input.t2", tol, load_tuple(cfg, &cfg.t2, "t2"))?;
    let t1p = if cfg.t1p.is_empty() { t1.clone() } else { stage(rep, "input.t1p", tol, load_tuple(cfg, &cfg.t1p, "t1p"))? };
    let triple = stage(rep, "triple", tol, IntertwiningTriple::new(f.clone(), g.clone(), t1.clone(), t1p.clone(), t2, tol))?;
    rep.residual("triple.intertwining", triple.intertwining_residual(), tol);
    let (iso, col) = stage(rep, "colligation", tol, colligation_of(&triple, tol))?;
    rep.absorb("", &verify_colligation(&iso, &col, tol));
    let series = stage(rep, "series", tol, series_oracle(&triple, &iso, &col, SERIES_DEPTH, tol))?;
    rep.absorb("", &series);
    let level = match cfg.level {
        Some(l) => l,
        None => {
            let a = stage(rep, "model.level", tol, level_for(cfg, f, &t1))?;
            let b = stage(rep, "model.level", tol, level_for(cfg, f, &t1p))?;
            a.max(b)
        }
    };
    rep.set_env("level", level);
    let tf = stage(rep, "transfer", tol, eval_transfer(&col, f, level))?;
    let tr = stage(rep, "transfer", tol, verify_transfer(&tf, FOURIER_LEVELS.min(level), tol))?;
    rep.absorb("", &tr);
    let k1 = stage(rep, "kernel1", tol, poisson_kernel(f, &t1, level, tol))?;
    let k1p = stage(rep, "kernel1p", tol, poisson_kernel(f, &t1p, level, tol))?;
    let gap = stage(rep, "dilation", tol, tail(f, &t1, level))?.max(stage(rep, "dilation", tol, tail(f, &t1p, level))?);
    rep.set_env("dilation.tail", format!("{gap:.6e}"));
    let dr = stage(rep, "dilation", tol, dilation_identity_check(&triple, &tf, &k1, &k1p, tol + gap.sqrt()))?;
    rep.absorb("", &dr);
    Some(())
}

fn verify(cfg: &ExperimentConfig, tol: Tolerances, rep: &mut VerificationReport) -> Option<()> {
    let (f, g) = (&cfg.f, &cfg.g);
    let it = tol.identity;
    let t1 = stage(rep, "input.t1", it, load_tuple(cfg, &cfg.t1, "t1"))?;
    let t2 = stage(rep, "input.t2", it, load_tuple(cfg, &cfg.t2, "t2"))?;
    let pair = stage(rep, "pair", it, CommutingPair::new(f.clone(), g.clone(), t1, t2, it))?;
    rep.residual("pair.cross_commutation", pair.cross_commutation_residual(), it);
    let cap = default_level_cap(f.n());
    let level = stage(rep, "model.level", it, level_for(cfg, f, pair.t1()))?;
    rep.set_env("level", level);
    rep.set_env("variety.kind", variety_name(cfg.variety.as_ref()));
    let v = match &cfg.variety {
        None => natural_variety(f, pair.t1(), level, cap, MINPOLY_TOL),
        Some(spec) => generators(spec, f, pair.t1()).and_then(|gens| build_variety(f, level, gens)),
    };
    let v = stage(rep, "dil.primary", it, v)?;
    let primary = stage(rep, "dil.primary", it, ando_dilation(&pair, &v, it))?;
    rep.absorb("dil.primary", primary.report());

    let swapped = pair.swapped();
    let cap2 = default_level_cap(g.n());
    let secondary = purity_horizon(g, swapped.t1(), cap2)
        .and_then(|(l, _)| natural_variety(g, swapped.t1(), l.max(1), cap2, MINPOLY_TOL))
        .and_then(|v| ando_dilation(&swapped, &v, it));
    let secondary = stage(rep, "dil.swapped", it, secondary);
    let mut dils = vec![&primary];
    if let Some(s) = &secondary {
        rep.absorb("dil.swapped", s.report());
        dils.push(s);
    }

    let (n1, n2) = (f.n(), g.n());
    let sel = &cfg.polynomials;
    let mut bipolys = if sel.standard { battery_bipolys(n1, n2) } else { Vec::new() };
    bipolys.extend(sel.bipolys.iter().map(|(name, p)| (name.clone(), PolyMatrix::scalar(p.clone()))));
    let mut hermitian = if sel.standard { battery_hermitian(n1, n2) } else { Vec::new() };
    hermitian.extend(sel.hermitian.iter().map(|(name, p)| (name.clone(), PolyMatrix::scalar(p.clone()))));
    rep.absorb("ando", &verify_inequality(&pair, &dils, &bipolys, tol));
    rep.absorb("hermitian", &verify_hermitian_inequality(&pair, &dils, &hermitian, tol));
    Some(())
}

fn battery(cfg: &ExperimentConfig, tol: Tolerances, rep: &mut VerificationReport) {
    let d = BatteryConfig::default();
    let b = &cfg.battery;
    let bc = BatteryConfig {
        seed: b.seed.unwrap_or(d.seed),
        count: b.count.unwrap_or(d.count),
        min_dim: b.min_dim.unwrap_or(d.min_dim),
        max_dim: b.max_dim.unwrap_or(d.max_dim),
        kinds: b.kinds.clone().unwrap_or(d.kinds),
        grid_resolution: b.grid_resolution.unwrap_or(d.grid_resolution),
        grid_allowance: b.grid_allowance.unwrap_or(d.grid_allowance),
        free_level_cap: b.free_level_cap.unwrap_or(d.free_level_cap),
        tol,
    };
    if let Some(out) = stage(rep, "battery", tol.identity, run_battery(&bc)) {
        rep.absorb("", &out.report);
    }
}

/// Runs the selected pipeline. Failures of any stage appear as failed
/// checks in the returned report.
pub fn run(cfg: &ExperimentConfig) -> VerificationReport {
    let pipeline = cfg.selected_pipeline();
    let defaults = Tolerances::default();
    let mut rep = VerificationReport::with_choices();
    rep.set_env("pipeline", pipeline.name());
    match pipeline {
        Pipeline::Kernel | Pipeline::Dilation => {
            let tol = cfg.identity_tol.unwrap_or(DEFAULT_TOL);
            rep.set_env("tol.identity", format!("{tol:e}"));
            if pipeline == Pipeline::Kernel {
                kernel(cfg, tol, &mut rep);
            } else {
                dilation(cfg, tol, &mut rep);
            }
        }
        Pipeline::Verify | Pipeline::Battery => {
            let tol = Tolerances {
                identity: cfg.identity_tol.unwrap_or(defaults.identity),
                slack: cfg.slack_tol.unwrap_or(defaults.slack),
            };
            rep.set_env("tol.identity", format!("{:e}", tol.identity));
            rep.set_env("tol.slack", format!("{:e}", tol.slack));
            if pipeline == Pipeline::Verify {
                verify(cfg, tol, &mut rep);
            } else {
                battery(cfg, tol, &mut rep);
            }
        }
    }
    rep
}
