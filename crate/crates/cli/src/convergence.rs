//! Multi-grid runs of one experiment with observed orders and refinement gates.

use magstark::spectral::DEFAULT_DENSE_LIMIT;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::envelope::{Cell, Gate, Outcome, Table};
use crate::error::{CliError, CliResult};
use crate::runner::{run, Experiment};

/// How a quantity is judged across levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Should tend to zero; order from successive ratios.
    Error,
    /// Should settle; order from successive differences, gated on the last relative change.
    Value,
    /// Identity that holds at every level up to round-off; gated by the per-level gate.
    Exact { gate_prefix: &'static str },
}

#[derive(Debug, Clone, Copy)]
pub struct Quantity {
    pub key: &'static str,
    pub kind: Kind,
}

pub fn quantities(exp: Experiment) -> CliResult<Vec<Quantity>> {
    let q = |key, kind| Quantity { key, kind };
    Ok(match exp {
        Experiment::VerifyTheorem1 => vec![
            q("residual", Kind::Error),
            q(
                "commutator_trace",
                Kind::Exact {
                    gate_prefix: "commutator_trace",
                },
            ),
        ],
        Experiment::AppendixNorms => vec![q("hs1", Kind::Value), q("tr2", Kind::Value)],
        Experiment::Prop4 => vec![q("norm", Kind::Value)],
        Experiment::ExpansionCheck => vec![q("max_residual", Kind::Exact { gate_prefix: "order_" })],
        other => {
            return Err(CliError::Usage(format!(
                "convergence is not defined for `{}`; use verify-theorem1, appendix-norms, prop4 or expansion-check",
                other.name()
            )))
        }
    })
}

/// Default relative change allowed between the two finest levels.
pub fn default_change_tol(exp: Experiment) -> f64 {
    match exp {
        Experiment::Prop4 => 0.10,
        _ => 0.05,
    }
}

/// `ln(a/b) / ln(ha/hb)`.
pub fn observed_order(a: f64, b: f64, ha: f64, hb: f64) -> f64 {
    (a.abs() / b.abs()).ln() / (ha / hb).ln()
}

/// Orders for an error-like sequence; entry `k` compares levels `k` and `k+1`.
pub fn error_orders(values: &[f64], hs: &[f64]) -> Vec<f64> {
    (0..values.len().saturating_sub(1))
        .map(|k| observed_order(values[k], values[k + 1], hs[k], hs[k + 1]))
        .collect()
}

/// Orders from successive differences; entry `k` uses levels `k`, `k+1`, `k+2`.
pub fn value_orders(values: &[f64], hs: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    (0..d.len().saturating_sub(1))
        .map(|k| observed_order(d[k], d[k + 1], hs[k], hs[k + 1]))
        .collect()
}

/// Runs `exp` at `nx = ny = n` for each level.
pub fn convergence(exp: Experiment, cfg: &ExperimentConfig, levels: &[usize]) -> CliResult<Outcome> {
    if levels.len() < 3 {
        return Err(CliError::Usage(format!(
            "convergence needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("levels must be strictly increasing".into()));
    }
    let qs = quantities(exp)?;
    let finest = *levels.last().expect("checked length");
    if finest * finest > DEFAULT_DENSE_LIMIT {
        return Err(magstark::Error::Capacity {
            dim: finest * finest,
            limit: DEFAULT_DENSE_LIMIT,
        }
        .into());
    }
    let configs: Vec<ExperimentConfig> = levels.iter().map(|&n| cfg.with_resolution(n)).collect();
    let hs = configs
        .iter()
        .map(|c| Ok(c.grid()?.h_max()))
        .collect::<CliResult<Vec<f64>>>()?;
    let outcomes = configs
        .par_iter()
        .map(|c| run(exp, c))
        .collect::<CliResult<Vec<Outcome>>>()?;

    let label = format!("convergence-{}", exp.name());
    let mut table = Table::new(&label, &["n", "h", "quantity", "value", "order"]);
    let mut gates = Vec::new();
    let mut summary = serde_json::Map::new();
    for q in &qs {
        let values: Vec<f64> = outcomes
            .iter()
            .map(|o| o.results[q.key].as_f64().unwrap_or(f64::NAN))
            .collect();
        let (orders, offset) = match q.kind {
            Kind::Error => (error_orders(&values, &hs), 1),
            Kind::Value => (value_orders(&values, &hs), 2),
            Kind::Exact { .. } => (Vec::new(), 0),
        };
        for (k, (&n, &v)) in levels.iter().zip(&values).enumerate() {
            let order = match q.kind {
                Kind::Exact { .. } => Cell::S("exact".into()),
                _ if k >= offset => Cell::F(orders[k - offset]),
                _ => Cell::S(String::new()),
            };
            table.push(vec![n.into(), hs[k].into(), q.key.into(), v.into(), order]);
        }
        match q.kind {
            Kind::Error => {
                let last = orders.last().copied().unwrap_or(f64::NAN);
                gates.push(Gate::at_least(
                    &format!("{}_order", q.key),
                    last,
                    cfg.experiment.min_order,
                ));
            }
            Kind::Value => {
                let n = values.len();
                let change = ((values[n - 1] - values[n - 2]) / values[n - 1]).abs();
                let tol = cfg.experiment.change_tol.unwrap_or_else(|| default_change_tol(exp));
                gates.push(Gate::at_most(&format!("{}_change", q.key), change, tol));
            }
            Kind::Exact { gate_prefix } => {
                let worst = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let pass = outcomes.iter().all(|o| {
                    o.gates
                        .iter()
                        .filter(|g| g.name.starts_with(gate_prefix))
                        .all(|g| g.pass)
                });
                gates.push(Gate::new(q.key, worst, "round-off at every level".into(), pass));
            }
        }
        summary.insert(
            q.key.to_string(),
            json!({
                "values": values,
                "orders": match q.kind { Kind::Exact { .. } => json!("exact"), _ => json!(orders) },
            }),
        );
    }
    // Gates judged on the finest grid only.
    if let Some(g) = outcomes.last().and_then(|o| o.gate("relative_residual")) {
        gates.push(g.clone());
    }
    let warnings = outcomes
        .iter()
        .zip(levels)
        .flat_map(|(o, n)| o.warnings.iter().map(move |w| format!("n = {n}: {w}")))
        .collect();
    Ok(Outcome {
        results: json!({ "experiment": exp.name(), "levels": levels, "h": hs, "quantities": summary }),
        tables: vec![table],
        gates,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_exact_power_laws() {
        let hs = [0.4, 0.2, 0.1];
        let e: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        for p in error_orders(&e, &hs) {
            assert!((p - 2.0).abs() < 1e-12);
        }
        let v: Vec<f64> = hs.iter().map(|h| 1.0 + 0.5 * h * h).collect();
        let o = value_orders(&v, &hs);
        assert_eq!(o.len(), 1);
        assert!((o[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn level_count_and_support() {
        let c = ExperimentConfig::default();
        assert!(matches!(
            convergence(Experiment::VerifyTheorem1, &c, &[21, 31]),
            Err(CliError::Usage(_))
        ));
        assert!(convergence(Experiment::Scaling, &c, &[21, 31, 41]).is_err());
        assert!(matches!(
            convergence(Experiment::Prop4, &c, &[21, 31, 91]),
            Err(CliError::Lib(magstark::Error::Capacity { .. }))
        ));
    }

    #[test]
    fn exact_identity_reports_exact() {
        let mut c = ExperimentConfig::default();
        c.grid.lx = 3.0;
        c.grid.ly = 3.0;
        let o = convergence(Experiment::ExpansionCheck, &c, &[8, 9, 10]).unwrap();
        assert!(o.pass(), "{:?}", o.gates);
        assert!(o.tables[0].rows.iter().all(|r| r[4] == Cell::S("exact".into())));
    }
}
