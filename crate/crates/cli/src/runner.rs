//! One function per experiment. Each returns an [`Outcome`]: a JSON summary, fixed-column
//! tables and acceptance gates.

use clap::ValueEnum;
use magstark::c64;
use magstark::grid::{position_diag, Axis, GridSpec};
use magstark::hamiltonian::{assemble_h, assemble_h0, assemble_q, FieldParams};
use magstark::mourre::{embedded_eigenvalue_scan, lap_probe, lap_sup_norm, lemma7_norm_unchecked, mourre_gap_bound};
use magstark::potentials::{eval_potential, sup_dx, PotentialSpec};
use magstark::spectral::{clusters, eigendecompose, eigenvalues, localized_spectrum, BumpFunction};
use magstark::ssf::{
    check_support_clear, first_landau_gap, fit_loglog, integrate_against, linspace, localized_q_spectrum,
    resolved_window, scaling_sample, scaling_setup, sigma_q_gap_window, theorem1_check, truncation_convergence,
    xi_prime_mollified, TruncationSpec, DEFAULT_WINDOW_MARGIN,
};
use magstark::traces::{appendix_norms, prop2_tracebound, prop4_norm, ProbeSpec};
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::envelope::{Cell, Gate, Outcome, Table};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Experiment {
    #[value(name = "verify-theorem1")]
    VerifyTheorem1,
    #[value(name = "scaling")]
    Scaling,
    #[value(name = "mourre")]
    Mourre,
    #[value(name = "lap-probe")]
    LapProbe,
    #[value(name = "lemma7")]
    Lemma7,
    #[value(name = "prop2")]
    Prop2,
    #[value(name = "prop4")]
    Prop4,
    #[value(name = "appendix-norms")]
    AppendixNorms,
    #[value(name = "spectrum")]
    Spectrum,
    #[value(name = "truncation")]
    Truncation,
    #[value(name = "expansion-check")]
    ExpansionCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::VerifyTheorem1 => "verify-theorem1",
            Self::Scaling => "scaling",
            Self::Mourre => "mourre",
            Self::LapProbe => "lap-probe",
            Self::Lemma7 => "lemma7",
            Self::Prop2 => "prop2",
            Self::Prop4 => "prop4",
            Self::AppendixNorms => "appendix-norms",
            Self::Spectrum => "spectrum",
            Self::Truncation => "truncation",
            Self::ExpansionCheck => "expansion-check",
        }
    }
}

/// Runs `exp` on a pool of `experiment.threads` workers with faer kept sequential.
///
/// Parallelism lives only in sweeps whose results are collected in input order, so the
/// thread count changes timings and nothing else.
pub fn execute(exp: Experiment, cfg: &ExperimentConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| run(exp, cfg))
}

/// Runs `exp` on the current thread pool.
pub fn run(exp: Experiment, cfg: &ExperimentConfig) -> CliResult<Outcome> {
    match exp {
        Experiment::VerifyTheorem1 => verify_theorem1(cfg),
        Experiment::Scaling => scaling(cfg),
        Experiment::Mourre => mourre(cfg),
        Experiment::LapProbe => lap(cfg),
        Experiment::Lemma7 => lemma7(cfg),
        Experiment::Prop2 => prop2(cfg),
        Experiment::Prop4 => prop4(cfg),
        Experiment::AppendixNorms => appendix(cfg),
        Experiment::Spectrum => spectrum(cfg),
        Experiment::Truncation => truncation(cfg),
        Experiment::ExpansionCheck => expansion(cfg),
    }
}

struct Setup {
    grid: GridSpec,
    fields: FieldParams,
    spec: PotentialSpec,
}

fn setup(cfg: &ExperimentConfig) -> CliResult<Setup> {
    let grid = cfg.grid()?;
    Ok(Setup {
        fields: cfg.fields()?,
        spec: cfg.potential(&grid)?,
        grid,
    })
}

/// `f` from the config, or rebuilt on the gap window of `Q` when `function.gap_window` is set.
fn test_function(cfg: &ExperimentConfig, s: &Setup) -> CliResult<(BumpFunction, Option<(f64, f64)>)> {
    if !cfg.function.gap_window {
        return Ok((cfg.function()?, None));
    }
    let q = assemble_q(&s.grid, &FieldParams::new(s.fields.b(), 0.0)?, &s.spec)?;
    let dec_q = eigendecompose(&q)?;
    let (lo, hi) = sigma_q_gap_window(
        &dec_q,
        &s.grid,
        cfg.experiment.gap_margin,
        first_landau_gap(s.fields.b()),
    )?;
    // Pull the ends in slightly so the support check does not hinge on rounding.
    let pad = 1e-9 * (1.0 + hi.abs());
    let f = cfg.function_on(lo + pad, hi - pad)?;
    Ok((f, Some((lo, hi))))
}

fn outcome(results: serde_json::Value, tables: Vec<Table>, gates: Vec<Gate>) -> Outcome {
    Outcome {
        results,
        tables,
        gates,
        warnings: Vec::new(),
    }
}

fn slope_gates(cfg: &ExperimentConfig, slope: Option<f64>, r2: Option<f64>, predicted: f64, half: f64) -> Vec<Gate> {
    let [lo, hi] = cfg
        .experiment
        .slope_range
        .unwrap_or([predicted - half, predicted + half]);
    let note = "fit not available (underflow or degenerate samples)";
    let mut g = vec![Gate::within("slope", slope.unwrap_or(f64::NAN), lo, hi)];
    if slope.is_none() {
        g[0] = g[0].clone().with_note(note);
    }
    g.push(Gate::at_least("r2", r2.unwrap_or(f64::NAN), cfg.experiment.min_r2));
    g
}

fn verify_theorem1(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let (f, _) = test_function(cfg, &s)?;
    let r = theorem1_check(&s.grid, &s.fields, &s.spec, &f)?;
    let n = s.grid.dim();
    let mut t = Table::new(
        "verify-theorem1",
        &[
            "nx",
            "ny",
            "h",
            "lhs",
            "rhs",
            "residual",
            "relative_residual",
            "averaging",
            "potential",
            "wall",
            "commutator_trace",
            "support_count",
        ],
    );
    t.push(vec![
        s.grid.nx().into(),
        s.grid.ny().into(),
        r.h.into(),
        r.lhs.into(),
        r.rhs.into(),
        r.residual.into(),
        r.relative_residual().into(),
        r.breakdown.averaging.into(),
        r.breakdown.potential.into(),
        r.breakdown.wall.into(),
        r.commutator_trace.into(),
        r.support_count.into(),
    ]);
    let mut gates = vec![Gate::at_most(
        "commutator_trace",
        r.commutator_trace,
        magstark::ssf::commutator_trace_tolerance(n, r.h_norm),
    )];
    if s.spec.is_zero() {
        gates.push(Gate::at_most("zero_sides", r.lhs.abs().max(r.rhs.abs()), 0.0));
        gates.push(Gate::at_most("zero_residual", r.residual.abs(), 1e-12 * n as f64));
    } else {
        gates.push(Gate::at_most(
            "relative_residual",
            r.relative_residual(),
            cfg.experiment.rel_tol,
        ));
    }
    let mut out = outcome(
        json!({
            "lhs": r.lhs,
            "rhs": r.rhs,
            "residual": r.residual,
            "relative_residual": r.relative_residual(),
            "h": r.h,
            "dim": n,
            "window": [r.window.0, r.window.1],
            "breakdown": {
                "averaging": r.breakdown.averaging,
                "potential": r.breakdown.potential,
                "wall": r.breakdown.wall,
            },
            "commutator_trace": r.commutator_trace,
            "h_norm": r.h_norm,
            "support_count": r.support_count,
        }),
        vec![t],
        gates,
    );
    if r.support_count == 0 {
        out.warnings.push("no eigenvalue of H lies in the support of f".into());
    }
    Ok(out)
}

fn scaling(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let (f, window) = test_function(cfg, &s)?;
    let b = s.fields.b();
    let eps_list = &cfg.experiment.eps_list;
    let v = scaling_setup(&s.grid, b, &s.spec, &f, eps_list, cfg.experiment.gap_margin)?;
    let samples = eps_list
        .par_iter()
        .map(|&eps| Ok((eps, scaling_sample(&s.grid, b, eps, &v, &f)?)))
        .collect::<magstark::Result<Vec<_>>>()?;
    let predicted = s.spec.decay_n() as f64 - 2.0;
    let fit = fit_loglog(&samples, predicted);
    let mut t = Table::new("scaling", &["eps", "abs_xi_f"]);
    for &(e, val) in &samples {
        t.push(vec![e.into(), val.into()]);
    }
    let mut gates = slope_gates(cfg, fit.slope, fit.r2, predicted, 0.5);
    if fit.underflow {
        gates.push(Gate::new("no_underflow", 0.0, "no sample below 1e-13".into(), false));
    }
    Ok(outcome(
        json!({
            "predicted": predicted,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r2,
            "underflow": fit.underflow,
            "support": [f.support().0, f.support().1],
            "gap_window": window.map(|w| [w.0, w.1]),
        }),
        vec![t],
        gates,
    ))
}

fn check_in_resolved(s: &Setup, a: f64, b: f64) -> CliResult<(f64, f64)> {
    let e0 = eigenvalues(&assemble_h0(&s.grid, &s.fields))?;
    let (lo, hi) = resolved_window(&e0, &s.grid, DEFAULT_WINDOW_MARGIN);
    if a < lo || b > hi {
        return Err(magstark::Error::Window {
            lo: a,
            hi: b,
            a: lo,
            b: hi,
        }
        .into());
    }
    Ok((lo, hi))
}

fn mourre(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let (f, _) = test_function(cfg, &s)?;
    let [a, b] = cfg.experiment.window.unwrap_or([f.support().0, f.support().1]);
    let resolved = check_in_resolved(&s, a, b)?;
    let h = assemble_h(&s.grid, &s.fields, &s.spec)?;
    let dec_h = eigendecompose(&h)?;
    let bound = mourre_gap_bound(&dec_h, &h, a, b)?;
    let eps = s.fields.eps();
    let tol = cfg.experiment.mourre_rel_tol * eps;
    let sup = sup_dx(&s.spec, &s.grid);

    let mut gates = Vec::new();
    let mut warnings = Vec::new();
    if bound.empty {
        warnings.push(format!("no eigenvalue of H in ({a}, {b}]; bound is +inf"));
    }
    let regime = if s.spec.is_zero() {
        gates.push(Gate::at_most(
            "free_bound_deviation",
            (bound.min_eigenvalue - eps).abs(),
            tol,
        ));
        "free"
    } else if sup <= eps / 2.0 {
        gates.push(Gate::at_least("bound", bound.min_eigenvalue, eps / 2.0 - tol));
        "corollary"
    } else {
        "unconstrained"
    };

    let dec_q = eigendecompose(&assemble_q(&s.grid, &FieldParams::new(s.fields.b(), 0.0)?, &s.spec)?)?;
    let scan = embedded_eigenvalue_scan(&dec_h, &dec_q, &s.grid, (a, b), cfg.experiment.localization_margin)?;
    let mut t = Table::new("mourre", &["a", "b", "eps", "rank", "min_eigenvalue", "max_eigenvalue"]);
    t.push(vec![
        a.into(),
        b.into(),
        eps.into(),
        bound.rank.into(),
        bound.min_eigenvalue.into(),
        bound.max_eigenvalue.into(),
    ]);
    let mut st = Table::new("scan", &["eigenvalue", "score", "nearest_q", "distance"]);
    for r in &scan.rows {
        st.push(vec![
            r.eigenvalue.into(),
            r.score.into(),
            r.nearest_q.map_or(Cell::S(String::new()), Cell::F),
            r.distance.into(),
        ]);
    }
    Ok(Outcome {
        results: json!({
            "window": [a, b],
            "resolved_window": [resolved.0, resolved.1],
            "rank": bound.rank,
            "empty": bound.empty,
            "min_eigenvalue": finite_or_null(bound.min_eigenvalue),
            "max_eigenvalue": finite_or_null(bound.max_eigenvalue),
            "sup_dxv": sup,
            "regime": regime,
            "localized_h_in_window": scan.rows.len(),
            "max_distance_to_q": scan.max_distance,
        }),
        tables: vec![t, st],
        gates,
        warnings,
    })
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn lap(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let (f, window) = test_function(cfg, &s)?;
    let w = cfg.weight()?;
    let lambda = cfg.experiment.lambda.unwrap_or(f.center());
    let deltas = &cfg.experiment.delta_list;
    let h = assemble_h(&s.grid, &s.fields, &s.spec)?;
    let dec_h = eigendecompose(&h)?;
    let main = lap_probe(&dec_h, &s.grid, lambda, &w, deltas)?;

    let mut t = Table::new("lap-probe", &["probe", "lambda", "delta", "norm"]);
    for (d, n) in main.params.iter().zip(&main.norms) {
        t.push(vec!["gap".into(), lambda.into(), (*d).into(), (*n).into()]);
    }
    let mut gates = vec![Gate::at_most(
        "plateau_ratio",
        main.plateau_ratio,
        cfg.experiment.plateau_max,
    )];

    let states = localized_spectrum(&dec_h, &s.grid, cfg.experiment.localization_margin)?;
    let control_lambda = states
        .iter()
        .filter(|st| st.localized)
        .map(|st| st.eigenvalue)
        .min_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()));
    let control = match control_lambda {
        Some(l) => {
            let c = lap_probe(&dec_h, &s.grid, l, &w, deltas)?;
            for (d, n) in c.params.iter().zip(&c.norms) {
                t.push(vec!["control".into(), l.into(), (*d).into(), (*n).into()]);
            }
            let last = c.growth.last().copied().unwrap_or(f64::NAN);
            gates.push(Gate::at_least("control_growth", last, cfg.experiment.growth_min));
            Some(c)
        }
        None => {
            gates.push(
                Gate::new(
                    "control_growth",
                    f64::NAN,
                    format!(">= {:?}", cfg.experiment.growth_min),
                    false,
                )
                .with_note("H has no localized eigenvalue to probe"),
            );
            None
        }
    };

    let mut tables = vec![t];
    let mut law = serde_json::Value::Null;
    if cfg.experiment.eps_law {
        let (lo, hi) = f.support();
        let lambdas = linspace(lo, hi, 9);
        let delta = *deltas.last().expect("validated non-empty");
        let rows = cfg
            .experiment
            .eps_law_list
            .par_iter()
            .map(|&eps| {
                let fe = s.fields.with_eps(eps)?;
                let dec = eigendecompose(&assemble_h(&s.grid, &fe, &s.spec)?)?;
                Ok((eps, lap_sup_norm(&dec, &s.grid, &lambdas, &w, delta)?))
            })
            .collect::<magstark::Result<Vec<_>>>()?;
        let mut lt = Table::new("eps_law", &["eps", "sup_norm", "eps_times_sup"]);
        for &(e, n) in &rows {
            lt.push(vec![e.into(), n.into(), (e * n).into()]);
        }
        let ratio = max_min_ratio(rows.iter().map(|&(e, n)| e * n));
        gates.push(Gate::at_most("eps_law_ratio", ratio, cfg.experiment.eps_law_factor));
        law = json!({ "delta": delta, "ratio": ratio });
        tables.push(lt);
    }

    Ok(outcome(
        json!({
            "lambda": lambda,
            "gap_window": window.map(|w| [w.0, w.1]),
            "plateau_ratio": main.plateau_ratio,
            "slope": main.slope,
            "control_lambda": control_lambda,
            "control_growth": control.map(|c| c.growth),
            "eps_law": law,
        }),
        tables,
        gates,
    ))
}

fn max_min_ratio(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

fn lemma7(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let (chi, window) = test_function(cfg, &s)?;
    let b = s.fields.b();
    let loc = localized_q_spectrum(&s.grid, b, &s.spec)?;
    check_support_clear(&loc, chi.support(), cfg.experiment.q_margin)?;
    let v = eval_potential(&s.spec, &s.grid)?.v;
    let samples = cfg
        .experiment
        .eps_list
        .par_iter()
        .map(|&eps| {
            let fe = s.fields.with_eps(eps)?;
            fe.require_electric()?;
            let dec = eigendecompose(&magstark::hamiltonian::assemble_h_from_diag(&s.grid, &fe, &v))?;
            Ok((eps, lemma7_norm_unchecked(&dec, &s.grid, &chi)?))
        })
        .collect::<magstark::Result<Vec<_>>>()?;
    let fit = fit_loglog(&samples, 2.0);
    let mut t = Table::new("lemma7", &["eps", "norm"]);
    for &(e, n) in &samples {
        t.push(vec![e.into(), n.into()]);
    }
    Ok(outcome(
        json!({
            "predicted": 2.0,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r2,
            "support": [chi.support().0, chi.support().1],
            "gap_window": window.map(|w| [w.0, w.1]),
        }),
        vec![t],
        vec![slope_gates(cfg, fit.slope, fit.r2, 2.0, 0.4).remove(0)],
    ))
}

fn prop2(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let e = &cfg.experiment;
    let probe = ProbeSpec::new(e.re_z, e.re_z_prime, e.im_list.clone()).map_err(CliError::invalid("experiment"))?;
    let h = assemble_h(&s.grid, &s.fields, &s.spec)?;
    let v = eval_potential(&s.spec, &s.grid)?.v;
    let r = prop2_tracebound(&h, &v, &probe)?;
    let mut t = Table::new("prop2", &["im", "re_z", "re_z_prime", "nuclear", "product"]);
    for p in &r.points {
        t.push(vec![
            p.im.into(),
            p.z.re.into(),
            p.z_prime.re.into(),
            p.nuclear.into(),
            p.product.into(),
        ]);
    }
    Ok(outcome(
        json!({ "ratio": r.ratio }),
        vec![t],
        vec![Gate::at_most("ratio", r.ratio, e.ratio_max)],
    ))
}

fn prop4(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let w = cfg.weight()?;
    let q = assemble_q(&s.grid, &FieldParams::new(s.fields.b(), 0.0)?, &s.spec)?;
    let dxv = eval_potential(&s.spec, &s.grid)?.dx;
    let z = c64::new(cfg.experiment.re_z, cfg.experiment.im_z);
    let norm = prop4_norm(&q, &dxv, cfg.experiment.order, &w, z)?;
    let mut t = Table::new("prop4", &["nx", "ny", "h", "norm"]);
    t.push(vec![
        s.grid.nx().into(),
        s.grid.ny().into(),
        s.grid.h_max().into(),
        norm.into(),
    ]);
    Ok(outcome(
        json!({ "norm": norm, "h": s.grid.h_max(), "z": [z.re, z.im], "n": cfg.experiment.order, "s": w.s }),
        vec![t],
        vec![Gate::new("finite", norm, "finite".into(), norm.is_finite())],
    ))
}

fn appendix(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let w = cfg.weight()?;
    let h0 = assemble_h0(&s.grid, &s.fields);
    let n = appendix_norms(&h0, &w, &s.grid)?;
    let mut t = Table::new("appendix-norms", &["nx", "ny", "h", "hs1", "tr2"]);
    t.push(vec![
        s.grid.nx().into(),
        s.grid.ny().into(),
        s.grid.h_max().into(),
        n.hs1.into(),
        n.tr2.into(),
    ]);
    Ok(outcome(
        json!({ "hs1": n.hs1, "tr2": n.tr2, "h": s.grid.h_max(), "delta": w.delta }),
        vec![t],
        vec![Gate::new(
            "finite",
            n.hs1 + n.tr2,
            "finite".into(),
            (n.hs1 + n.tr2).is_finite(),
        )],
    ))
}

fn spectrum(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let b = s.fields.b();
    let h = assemble_h(&s.grid, &s.fields, &s.spec)?;
    let dec = eigendecompose(&h)?;
    let states = localized_spectrum(&dec, &s.grid, cfg.experiment.localization_margin)?;
    let loc: Vec<f64> = states
        .iter()
        .filter(|st| st.localized)
        .map(|st| st.eigenvalue)
        .collect();
    let cl = clusters(&loc, b / 2.0);

    let mut t = Table::new("spectrum", &["index", "eigenvalue", "score", "localized"]);
    for st in &states {
        t.push(vec![
            st.index.into(),
            st.eigenvalue.into(),
            st.score.into(),
            st.localized.into(),
        ]);
    }
    let mut ct = Table::new("clusters", &["lo", "hi", "mean", "count"]);
    for c in &cl {
        ct.push(vec![c.lo.into(), c.hi.into(), c.mean.into(), c.count.into()]);
    }
    let mut tables = vec![t, ct];

    let mut gates = Vec::new();
    if s.spec.is_zero() && s.fields.eps() == 0.0 {
        let [t0, t1] = cfg.experiment.landau_tol;
        for (k, tol) in [(0usize, t0), (1, t1)] {
            let level = (2 * k + 1) as f64 * b;
            let name = format!("landau_level_{k}");
            gates.push(match cl.get(k) {
                Some(c) => Gate::at_most(&name, (c.mean - level).abs(), tol),
                None => Gate::new(&name, f64::NAN, format!("<= {tol:?}"), false).with_note("cluster missing"),
            });
        }
    }

    let mut xi = serde_json::Value::Null;
    if let (Some(eta), true) = (cfg.experiment.eta, s.fields.eps() > 0.0) {
        let e0 = eigenvalues(&assemble_h0(&s.grid, &s.fields))?;
        let (lo, hi) = resolved_window(&e0, &s.grid, DEFAULT_WINDOW_MARGIN);
        let curve = xi_prime_mollified(dec.eigenvalues(), &e0, &linspace(lo, hi, 801), eta)?;
        let mut xt = Table::new("xi_prime", &["lambda", "value"]);
        for &(l, v) in &curve {
            xt.push(vec![l.into(), v.into()]);
        }
        let f = cfg.function()?;
        xi = json!({ "eta": eta, "pairing_with_f": integrate_against(&curve, |t| f.eval(t)) });
        tables.push(xt);
    }

    Ok(outcome(
        json!({
            "dim": s.grid.dim(),
            "localized": loc.len(),
            "clusters": cl.iter().map(|c| json!({"lo": c.lo, "hi": c.hi, "mean": c.mean, "count": c.count})).collect::<Vec<_>>(),
            "xi_prime": xi,
        }),
        tables,
        gates,
    ))
}

fn truncation(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let (f, _) = test_function(cfg, &s)?;
    let limit = s.grid.lx().min(s.grid.ly());
    let radii = cfg
        .experiment
        .radii
        .clone()
        .unwrap_or_else(|| vec![0.25 * limit, 0.375 * limit, 0.5 * limit]);
    let spec = TruncationSpec::new(radii).map_err(CliError::invalid("experiment"))?;
    let table = truncation_convergence(&s.grid, &s.fields, &s.spec, &f, &spec)?;
    let mut t = Table::new("truncation", &["radius", "trace_gap", "rhs_gap"]);
    for r in &table.rows {
        t.push(vec![r.radius.into(), r.trace_gap.into(), r.rhs_gap.into()]);
    }
    let monotone = table.monotone();
    Ok(outcome(
        json!({ "monotone": monotone }),
        vec![t],
        vec![Gate::new(
            "monotone",
            monotone as u8 as f64,
            "both gaps decrease with R".into(),
            monotone,
        )],
    ))
}

fn expansion(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let q = assemble_q(&s.grid, &FieldParams::new(s.fields.b(), 0.0)?, &s.spec)?;
    let h = assemble_h(&s.grid, &s.fields, &s.spec)?;
    let x = position_diag(&s.grid, Axis::X, 1);
    let z = c64::new(cfg.experiment.re_z, cfg.experiment.im_z);
    let mut t = Table::new("expansion-check", &["n", "residual"]);
    let mut gates = Vec::new();
    let mut worst = 0.0f64;
    for &n in &cfg.experiment.orders {
        let r = magstark::ssf::resolvent_expansion_check(&q, &x, &h, s.fields.eps(), z, n)?;
        worst = worst.max(r);
        t.push(vec![n.into(), r.into()]);
        gates.push(Gate::at_most(&format!("order_{n}"), r, cfg.experiment.expansion_tol));
    }
    Ok(outcome(
        json!({ "max_residual": worst, "z": [z.re, z.im] }),
        vec![t],
        gates,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml_str("[grid]\nlx = 4.0\nly = 4.0\nnx = 11\nny = 11\n").unwrap();
        c.experiment.threads = 1;
        c
    }

    #[test]
    fn names_match_value_enum() {
        for e in Experiment::value_variants() {
            let pv = e.to_possible_value().unwrap();
            assert_eq!(pv.get_name(), e.name());
        }
    }

    #[test]
    fn zero_potential_theorem1_passes() {
        let mut c = small();
        c.potential.family = crate::config::FamilyName::Zero;
        let o = execute(Experiment::VerifyTheorem1, &c).unwrap();
        assert!(o.pass(), "{:?}", o.gates);
        assert_eq!(o.results["lhs"], 0.0);
    }

    #[test]
    fn expansion_and_truncation_pass() {
        let c = small();
        assert!(execute(Experiment::ExpansionCheck, &c).unwrap().pass());
        let mut c = small();
        c.potential.family = crate::config::FamilyName::CompactBump;
        c.grid.lx = 8.0;
        c.grid.ly = 8.0;
        c.grid.nx = 15;
        c.grid.ny = 15;
        let o = execute(Experiment::Truncation, &c).unwrap();
        assert!(o.pass(), "{:?}", o.tables);
    }

    #[test]
    fn every_experiment_runs_on_a_small_grid() {
        let mut c = small();
        c.potential.amplitude = -0.3;
        c.function.plateau = true;
        c.function.center = 2.0;
        c.function.halfwidth = 0.6;
        c.function.core = 0.3;
        c.experiment.q_margin = 0.0;
        c.experiment.gap_margin = 0.0;
        c.experiment.eps_list = vec![0.4, 0.2];
        c.experiment.eta = Some(0.3);
        c.experiment.eps_law = true;
        c.experiment.window = Some([1.4, 2.6]);
        for e in Experiment::value_variants() {
            match execute(*e, &c) {
                Ok(o) => assert!(!o.tables.is_empty(), "{}", e.name()),
                // Small grids may legitimately trip a support precondition.
                Err(CliError::Lib(magstark::Error::SupportOverlap { .. })) => {}
                Err(err) => panic!("{}: {err}", e.name()),
            }
        }
    }
}
