use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use super::{ExperimentKind, NamedEstimate, OutputFormat, Outcome, RunRecord};
use crate::dynamics::MixingTime;
use crate::error::{Error, Result};
use crate::stats::TailEstimate;

fn f(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), f)
}

fn t_mix_json(t: &Option<MixingTime>) -> Value {
    match t {
        Some(MixingTime::Finite(s)) => json!(s),
        Some(MixingTime::NonErgodic) => json!("non_ergodic"),
        None => Value::Null,
    }
}

fn tail_json(estimator: &str, t: &TailEstimate, seed: u64) -> Value {
    json!({
        "estimator": estimator,
        "threshold": t.threshold,
        "mean": t.mean,
        "stderr": t.stderr,
        "wilson95": t.wilson95,
        "hits": t.hits,
        "n": t.n,
        "seed": seed,
    })
}

fn named_json(e: &NamedEstimate, seed: u64) -> Value {
    let mut v = json!({
        "estimator": e.estimator,
        "mean": e.estimate.mean,
        "stderr": e.estimate.stderr,
        "n": e.estimate.n,
        "seed": seed,
    });
    if let Some(m) = e.exact_mean {
        v["exact_mean"] = json!(m);
    }
    v
}

impl RunRecord {
    /// The run's output file contents. Timing is left out so that reruns
    /// are byte-identical.
    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.json()?).expect("json values serialize");
                s.push('\n');
                Ok(s)
            }
            OutputFormat::Csv => Ok(self.csv()),
        }
    }

    fn json(&self) -> Result<Value> {
        let cfg = &self.config;
        let seed = cfg.seed;
        Ok(match &self.aggregate {
            Outcome::Marginal { weights, backend } => json!({ "weights": weights, "backend": backend }),
            Outcome::Leaves { lines } => json!({ "seed": seed, "n": lines.len(), "leaves": lines }),
            Outcome::LeafHistogram { counts } => json!({
                "seed": seed,
                "n": cfg.samples,
                "root_color": cfg.root_color,
                "leaf_color_counts": counts,
            }),
            Outcome::Tail { estimator, tail } if estimator == "q_hat" => json!({
                "q_hat": tail.mean,
                "stderr": tail.stderr,
                "wilson95": tail.wilson95,
                "n": tail.n,
                "seed": seed,
                "epsilon": super::unbiasing_params(cfg)?.epsilon(),
                "highly": cfg.highly,
            }),
            Outcome::Tail { estimator, tail } => tail_json(estimator, tail, seed),
            Outcome::Estimates { rows } if rows.len() == 1 => named_json(&rows[0], seed),
            Outcome::Estimates { rows } => Value::Array(rows.iter().map(|r| named_json(r, seed)).collect()),
            Outcome::Bias { rows } => json!({
                "seed": seed,
                "color": cfg.color,
                "rows": rows.iter().map(|(l, e)| json!({
                    "ell": l, "alpha_hat": e.mean, "stderr": e.stderr, "n": e.n,
                })).collect::<Vec<_>>(),
            }),
            Outcome::Reduction {
                delta,
                coupling_tail,
                concentration_tail,
                bound,
                holds,
            } => json!({
                "delta": delta,
                "coupling_tail": tail_json("coupling_tv_tail", coupling_tail, seed),
                "concentration_tail": tail_json("concentration_tail", concentration_tail, seed),
                "bound": bound,
                "holds": holds,
                "seed": seed,
            }),
            Outcome::DynamicsExact(r) => json!({
                "states": r.states,
                "gap": r.gap,
                "t_mix": t_mix_json(&r.t_mix),
                "symmetric": r.symmetric,
                "rows_sum_to_one": r.rows_sum_to_one,
                "uniform_stationary": r.uniform_stationary,
            }),
            Outcome::DynamicsRuns { runs } => json!({
                "seed": seed,
                "block_depth": cfg.block_depth,
                "steps": cfg.steps,
                "runs": runs,
            }),
        })
    }

    fn csv(&self) -> String {
        let cfg = &self.config;
        let seed = cfg.seed;
        let mut out = String::new();
        match &self.aggregate {
            Outcome::Marginal { weights, .. } => {
                out.push_str("color,weight\n");
                for (i, w) in weights.as_array().into_iter().flatten().enumerate() {
                    let w = w.as_str().map_or_else(|| w.to_string(), str::to_string);
                    let _ = writeln!(out, "{},{w}", i + 1);
                }
            }
            Outcome::Leaves { lines } => {
                for l in lines {
                    out.push_str(l);
                    out.push('\n');
                }
            }
            Outcome::LeafHistogram { counts } => {
                out.push_str("leaf,color,count\n");
                for (i, row) in counts.iter().enumerate() {
                    for (c, n) in row.iter().enumerate() {
                        let _ = writeln!(out, "{i},{},{n}", c + 1);
                    }
                }
            }
            Outcome::Tail { estimator, tail } if estimator == "q_hat" => {
                out.push_str("q_hat,stderr,wilson_lo,wilson_hi,n,seed\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{seed}",
                    f(tail.mean),
                    f(tail.stderr),
                    f(tail.wilson95[0]),
                    f(tail.wilson95[1]),
                    tail.n
                );
            }
            Outcome::Tail { estimator, tail } => {
                out.push_str("estimator,threshold,mean,stderr,wilson_lo,wilson_hi,n,seed\n");
                let _ = writeln!(
                    out,
                    "{estimator},{},{},{},{},{},{},{seed}",
                    opt(tail.threshold),
                    f(tail.mean),
                    f(tail.stderr),
                    f(tail.wilson95[0]),
                    f(tail.wilson95[1]),
                    tail.n
                );
            }
            Outcome::Estimates { rows } => {
                out.push_str("estimator,mean,stderr,n,seed\n");
                for r in rows {
                    let e = &r.estimate;
                    let _ = writeln!(out, "{},{},{},{},{seed}", r.estimator, f(e.mean), f(e.stderr), e.n);
                }
            }
            Outcome::Bias { rows } => {
                out.push_str("ell,alpha_hat,stderr,n\n");
                for (l, e) in rows {
                    let _ = writeln!(out, "{l},{},{},{}", f(e.mean), f(e.stderr), e.n);
                }
            }
            Outcome::Reduction {
                delta,
                coupling_tail: a,
                concentration_tail: t,
                bound,
                holds,
            } => {
                out.push_str("delta,a_hat,a_stderr,tail_hat,tail_stderr,n,bound,holds,seed\n");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{holds},{seed}",
                    f(*delta),
                    f(a.mean),
                    f(a.stderr),
                    f(t.mean),
                    f(t.stderr),
                    t.n,
                    f(*bound)
                );
            }
            Outcome::DynamicsExact(r) => {
                out.push_str("states,gap,t_mix,symmetric\n");
                let t = match t_mix_json(&r.t_mix) {
                    Value::String(s) => s,
                    v => v.to_string(),
                };
                let _ = writeln!(out, "{},{},{t},{}", r.states, f(r.gap), r.symmetric);
            }
            Outcome::DynamicsRuns { runs } => {
                let k = runs.first().map_or(0, |r| r.root_color_freq.len());
                out.push_str("replica,steps,proper");
                for c in 1..=k {
                    let _ = write!(out, ",root_freq_{c}");
                }
                out.push('\n');
                for (i, r) in runs.iter().enumerate() {
                    let _ = write!(out, "{i},{},{}", r.steps, r.proper);
                    for p in &r.root_color_freq {
                        let _ = write!(out, ",{}", f(*p));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub ell: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
    /// `ln(estimate)`, `None` for a zero estimate.
    pub log_estimate: Option<f64>,
}

/// Plot-ready estimates against depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub estimator: String,
    pub seed: u64,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log_estimate` against `ell`, over the rows
    /// that have a log. Descriptive only.
    pub slope: Option<f64>,
}

impl DecayCurve {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("curve serializes");
                s.push('\n');
                s
            }
            OutputFormat::Csv => {
                let mut out = format!(
                    "# estimator={} seed={} slope={}\nell,estimate,stderr,n,log_estimate\n",
                    self.estimator,
                    self.seed,
                    opt(self.slope)
                );
                for r in &self.rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        r.ell,
                        f(r.estimate),
                        f(r.stderr),
                        r.n,
                        opt(r.log_estimate)
                    );
                }
                out
            }
        }
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Collects the records' estimates into one curve over depth. The records
/// must agree on everything except the depth.
pub fn emit_decay_curve(records: &[RunRecord]) -> Result<DecayCurve> {
    let first = records
        .first()
        .ok_or_else(|| Error::Validation("no records to plot".into()))?;
    let key = |r: &RunRecord| {
        let c = &r.config;
        let mut c = c.clone();
        c.depth = 0;
        c.depth_range = None;
        c.out = None;
        c.format = None;
        c
    };
    let reference = key(first);
    let mut rows = Vec::new();
    let mut estimator = None;
    for r in records {
        if key(r) != reference {
            return Err(Error::Validation(
                "records differ in more than the depth; a curve needs one (Δ, k, color) setting".into(),
            ));
        }
        for (ell, name, e) in r.points()? {
            if estimator.get_or_insert_with(|| name.clone()) != &name {
                return Err(Error::Validation(format!("records mix estimators {name} and others")));
            }
            rows.push(DecayRow {
                ell,
                estimate: e.mean,
                stderr: e.stderr,
                n: e.n,
                log_estimate: (e.mean > 0.0).then(|| e.mean.ln()),
            });
        }
    }
    rows.sort_by_key(|r| r.ell);
    if rows.windows(2).any(|w| w[0].ell == w[1].ell) {
        return Err(Error::Validation("two records share a depth".into()));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.log_estimate.map(|l| (r.ell as f64, l)))
        .collect();
    if first.config.kind == ExperimentKind::Dynamics {
        return Err(Error::Validation("dynamics records carry no decay estimate".into()));
    }
    Ok(DecayCurve {
        estimator: estimator.unwrap_or_default(),
        seed: first.config.seed,
        rows,
        slope: least_squares_slope(&pts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ExperimentConfig, VERSION};
    use crate::stats::Estimate;
    use std::time::Duration;

    fn record(depth: usize, mean: f64) -> RunRecord {
        let mut config = ExperimentConfig::new(ExperimentKind::Couple);
        config.depth = depth;
        let agg = Outcome::Estimates {
            rows: vec![NamedEstimate {
                estimator: "mean_hamming_downward".into(),
                estimate: Estimate {
                    mean,
                    stderr: 0.1,
                    n: 10,
                },
                exact_mean: None,
            }],
        };
        RunRecord {
            config,
            replicas: vec![agg.clone()],
            aggregate: agg,
            duration: Duration::ZERO,
            version: VERSION,
        }
    }

    #[test]
    fn single_record_has_null_slope() {
        let c = emit_decay_curve(&[record(2, 0.5)]).unwrap();
        assert_eq!(c.rows.len(), 1);
        assert_eq!(c.slope, None);
        assert!(c.render(OutputFormat::Csv).starts_with("# estimator=mean_hamming_downward seed=0 slope=null\n"));
    }

    #[test]
    fn two_records_slope_is_log_ratio() {
        let c = emit_decay_curve(&[record(3, 0.2), record(2, 0.5)]).unwrap();
        assert_eq!(c.rows[0].ell, 2);
        assert!((c.slope.unwrap() - (0.2f64 / 0.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_estimate_keeps_its_row() {
        let c = emit_decay_curve(&[record(1, 0.5), record(2, 0.0), record(3, 0.125)]).unwrap();
        assert_eq!(c.rows.len(), 3);
        assert_eq!(c.rows[1].log_estimate, None);
        assert!((c.slope.unwrap() - (0.25f64).ln() / 2.0).abs() < 1e-12);
        let csv = c.render(OutputFormat::Csv);
        assert!(csv.contains("\n2,0,0.1,10,null\n"));
    }

    #[test]
    fn inconsistent_records_are_rejected() {
        let mut other = record(3, 0.1);
        other.config.k = 4;
        assert!(matches!(emit_decay_curve(&[record(2, 0.5), other]), Err(Error::Validation(_))));
        assert!(emit_decay_curve(&[record(2, 0.5), record(2, 0.4)]).is_err());
        assert!(emit_decay_curve(&[]).is_err());
    }
}
