//! Experiment orchestration: one config in, one reproducible record out.
//!
//! Replica `r` draws from `RandomSource::new(seed).split(r)` and gets an even
//! share of the samples. Replicas run in parallel; their results are folded
//! in replica order, so the aggregate depends only on the config.

mod config;
mod render;

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{CoupleMode, ExperimentConfig, ExperimentKind, OutputFormat};
pub use render::{emit_decay_curve, DecayCurve, DecayRow};

use crate::broadcast::LeafSampler;
use crate::coupling::{
    concentration_reduction_bound, concentration_tail, coupling_tv_tail, downward_couple, estimate_alpha,
    estimate_beta_tv, hamming_tail, simulate_disagreement_process,
};
use crate::dynamics::{
    build_transition_matrix, mixing_time_exact, run_chain, stationary_and_gap, DynamicsState, MixingTime, RunSummary,
};
use crate::error::{Error, Result};
use crate::exact::{root_marginal, Backend};
use crate::rng::{par_blocks, RandomSource};
use crate::stats::{Estimate, Summary, TailEstimate};
use crate::tree::{LeafColoring, TreeShape};
use crate::unbiasing::{epsilon_from, estimate_q, UnbiasingParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedEstimate {
    pub estimator: String,
    #[serde(flatten)]
    pub estimate: Estimate,
    /// The exact expectation, when one is known in closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsExactReport {
    pub states: usize,
    pub gap: f64,
    /// `None` when the state space is too large for exact matrix powers.
    pub t_mix: Option<MixingTime>,
    pub symmetric: bool,
    pub rows_sum_to_one: bool,
    pub uniform_stationary: bool,
}

/// The result of one replica, or of the fold over all replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Marginal {
        weights: serde_json::Value,
        backend: Backend,
    },
    Leaves {
        lines: Vec<String>,
    },
    /// `counts[i][c − 1]`: how often leaf `i` got color `c`.
    LeafHistogram {
        counts: Vec<Vec<u64>>,
    },
    Tail {
        estimator: String,
        tail: TailEstimate,
    },
    Estimates {
        rows: Vec<NamedEstimate>,
    },
    Bias {
        rows: Vec<(usize, Estimate)>,
    },
    Reduction {
        delta: f64,
        coupling_tail: TailEstimate,
        concentration_tail: TailEstimate,
        bound: f64,
        holds: bool,
    },
    DynamicsExact(DynamicsExactReport),
    DynamicsRuns {
        runs: Vec<RunSummary>,
    },
}

impl Outcome {
    fn merge(self, other: Outcome) -> Result<Outcome> {
        use Outcome::*;
        Ok(match (self, other) {
            (Leaves { mut lines }, Leaves { lines: more }) => {
                lines.extend(more);
                Leaves { lines }
            }
            (LeafHistogram { mut counts }, LeafHistogram { counts: more }) => {
                for (a, b) in counts.iter_mut().zip(more) {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                }
                LeafHistogram { counts }
            }
            (Tail { estimator, tail }, Tail { tail: t2, .. }) => Tail {
                estimator,
                tail: merge_tails(&tail, &t2)?,
            },
            (Estimates { rows }, Estimates { rows: more }) => Estimates {
                rows: rows
                    .into_iter()
                    .zip(more)
                    .map(|(a, b)| NamedEstimate {
                        estimate: merge_estimates(&a.estimate, &b.estimate),
                        ..a
                    })
                    .collect(),
            },
            (Bias { rows }, Bias { rows: more }) => Bias {
                rows: rows
                    .into_iter()
                    .zip(more)
                    .map(|((l, a), (_, b))| (l, merge_estimates(&a, &b)))
                    .collect(),
            },
            (
                Reduction {
                    delta,
                    coupling_tail,
                    concentration_tail,
                    ..
                },
                Reduction {
                    coupling_tail: a2,
                    concentration_tail: c2,
                    ..
                },
            ) => reduction(delta, merge_tails(&coupling_tail, &a2)?, merge_tails(&concentration_tail, &c2)?),
            (DynamicsRuns { mut runs }, DynamicsRuns { runs: more }) => {
                runs.extend(more);
                DynamicsRuns { runs }
            }
            (a, _) => return Err(Error::Validation(format!("cannot merge replica results of type {}", a.type_name()))),
        })
    }

    fn type_name(&self) -> &'static str {
        match self {
            Outcome::Marginal { .. } => "marginal",
            Outcome::Leaves { .. } => "leaves",
            Outcome::LeafHistogram { .. } => "leaf_histogram",
            Outcome::Tail { .. } => "tail",
            Outcome::Estimates { .. } => "estimates",
            Outcome::Bias { .. } => "bias",
            Outcome::Reduction { .. } => "reduction",
            Outcome::DynamicsExact(_) => "dynamics_exact",
            Outcome::DynamicsRuns { .. } => "dynamics_runs",
        }
    }
}

fn merge_estimates(a: &Estimate, b: &Estimate) -> Estimate {
    let mut s = Summary::from_estimate(a);
    s.merge(&Summary::from_estimate(b));
    s.estimate()
}

fn merge_tails(a: &TailEstimate, b: &TailEstimate) -> Result<TailEstimate> {
    let t = TailEstimate::from_counts(a.hits + b.hits, a.n + b.n)?;
    Ok(match a.threshold {
        Some(th) => t.with_threshold(th),
        None => t,
    })
}

fn reduction(delta: f64, coupling_tail: TailEstimate, concentration_tail: TailEstimate) -> Outcome {
    let bound = concentration_reduction_bound(coupling_tail.mean, delta);
    Outcome::Reduction {
        delta,
        coupling_tail,
        concentration_tail,
        bound,
        holds: concentration_tail.mean <= bound,
    }
}

/// Config snapshot, per-replica results and their fold.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub replicas: Vec<Outcome>,
    pub aggregate: Outcome,
    #[serde(skip)]
    pub duration: Duration,
    pub version: &'static str,
}

impl RunRecord {
    /// The estimate(s) a decay curve plots, one per depth.
    pub fn points(&self) -> Result<Vec<(usize, String, Estimate)>> {
        let depth = self.config.depth;
        Ok(match &self.aggregate {
            Outcome::Bias { rows } => rows.iter().map(|(l, e)| (*l, "alpha_hat".to_string(), *e)).collect(),
            Outcome::Tail { estimator, tail } => vec![(depth, estimator.clone(), tail.estimate())],
            Outcome::Estimates { rows } => {
                let row = rows.iter().find(|r| r.estimator == DOWN_UP_COUPLING).unwrap_or(&rows[0]);
                vec![(depth, row.estimator.clone(), row.estimate)]
            }
            Outcome::Reduction { concentration_tail, .. } => {
                vec![(depth, "concentration_tail".to_string(), concentration_tail.estimate())]
            }
            other => {
                return Err(Error::Validation(format!(
                    "a {} record carries no estimate to plot",
                    other.type_name()
                )))
            }
        })
    }
}

const DOWN_UP_PLUG_IN: &str = "down_up_tv_plug_in";
const DOWN_UP_COUPLING: &str = "down_up_tv_coupling_bound";

/// Runs one experiment. Capacity and infeasibility errors from the library
/// propagate unchanged.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let deterministic = matches!(config.kind, ExperimentKind::Marginal)
        || (config.kind == ExperimentKind::Dynamics && config.exact);
    let replicas = if deterministic { 1 } else { config.replicas };
    let base = RandomSource::new(config.seed);
    let results: Vec<Result<Outcome>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let share = config.samples / replicas + u64::from(r < config.samples % replicas);
            let mut rng = base.split(r);
            run_replica(config, share, &mut rng)
        })
        .collect();
    let replicas: Vec<Outcome> = results.into_iter().collect::<Result<_>>()?;
    let mut it = replicas.iter().cloned();
    let mut aggregate = it.next().expect("at least one replica");
    for next in it {
        aggregate = aggregate.merge(next)?;
    }
    Ok(RunRecord {
        config: config.clone(),
        replicas,
        aggregate,
        duration: start.elapsed(),
        version: VERSION,
    })
}

/// Runs the configured experiment once per depth of `depth_range` and fits
/// the decay curve.
pub fn run_sweep(config: &ExperimentConfig) -> Result<(Vec<RunRecord>, DecayCurve)> {
    if matches!(
        config.kind,
        ExperimentKind::Marginal | ExperimentKind::Broadcast | ExperimentKind::Dynamics
    ) {
        return Err(Error::Config(format!(
            "kind: a sweep needs an estimator, not '{}'",
            config.kind
        )));
    }
    let records = config
        .depths()
        .into_iter()
        .map(|l| {
            let mut c = config.clone();
            c.depth = l;
            c.depth_range = None;
            run_experiment(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = emit_decay_curve(&records)?;
    Ok((records, curve))
}

fn shape(config: &ExperimentConfig, depth: usize) -> Result<TreeShape> {
    TreeShape::new(config.delta, depth)
}

/// The unbiasing parameters in force: the given ε, else the default for
/// `(k, Δ)`.
pub fn unbiasing_params(config: &ExperimentConfig) -> Result<UnbiasingParams> {
    match config.epsilon {
        Some(e) => UnbiasingParams::new(e).map_err(|e| Error::Config(format!("epsilon: {e}"))),
        None => epsilon_from(config.k, config.delta),
    }
}

/// Reads the leaf coloring from a file if `leaves` names one, else parses it
/// as the coloring itself.
fn read_leaves(config: &ExperimentConfig) -> Result<LeafColoring> {
    let text = config.leaves.as_deref().unwrap_or_default();
    let path = Path::new(text);
    let body = if !text.contains(',') && path.is_file() {
        std::fs::read_to_string(path)?
    } else {
        text.to_string()
    };
    LeafColoring::parse(body.trim(), config.k)
}

fn run_replica(config: &ExperimentConfig, samples: u64, rng: &mut RandomSource) -> Result<Outcome> {
    let (k, depth) = (config.k, config.depth);
    match config.kind {
        ExperimentKind::Marginal => {
            let backend = if config.exact { Backend::Rational } else { config.backend };
            let x = read_leaves(config)?;
            let dist = root_marginal(&shape(config, depth)?, k, &x, config.forbidden_root, backend)?;
            Ok(Outcome::Marginal {
                weights: dist.to_json_weights(),
                backend,
            })
        }
        ExperimentKind::Broadcast => {
            let s = shape(config, depth)?;
            let mut sampler = LeafSampler::new(&s, k)?;
            if config.summary {
                let mut counts = vec![vec![0u64; k]; s.leaf_count()];
                for _ in 0..samples {
                    for (row, &c) in counts.iter_mut().zip(sampler.sample(rng, config.root_color)?) {
                        row[c as usize - 1] += 1;
                    }
                }
                Ok(Outcome::LeafHistogram { counts })
            } else {
                let mut lines = Vec::with_capacity(samples as usize);
                for _ in 0..samples {
                    let leaves = sampler.sample(rng, config.root_color)?;
                    lines.push(leaves.iter().map(u8::to_string).collect::<Vec<_>>().join(","));
                }
                Ok(Outcome::Leaves { lines })
            }
        }
        ExperimentKind::Unbiasing => {
            let params = unbiasing_params(config)?;
            let tail = estimate_q(&shape(config, depth)?, k, &params, samples, config.highly, rng)?;
            Ok(Outcome::Tail {
                estimator: "q_hat".into(),
                tail,
            })
        }
        ExperimentKind::Couple => couple(config, samples, rng),
        ExperimentKind::Bias => {
            let mut rows = Vec::new();
            for l in config.depths() {
                rows.push((l, estimate_alpha(&shape(config, l)?, k, config.color, samples, rng)?));
            }
            Ok(Outcome::Bias { rows })
        }
        ExperimentKind::Concentration => {
            let s = shape(config, depth)?;
            if let Some(delta) = config.reduction_delta {
                if !(delta > 0.0 && delta <= 0.1) {
                    return Err(Error::Config(format!("reduction_delta: {delta} is outside (0, 1/10]")));
                }
                let a = coupling_tv_tail(&s, k, config.c1, config.c2, delta.powi(3), samples, rng)?;
                let t = concentration_tail(&s, k, config.color, 2.0 * delta, samples, rng)?;
                return Ok(reduction(delta, a, t));
            }
            let threshold = config
                .threshold
                .ok_or_else(|| Error::Config("threshold: concentration needs a threshold".into()))?;
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::Config(format!("threshold: {threshold} is outside (0, 1)")));
            }
            Ok(Outcome::Tail {
                estimator: "concentration_tail".into(),
                tail: concentration_tail(&s, k, config.color, threshold, samples, rng)?,
            })
        }
        ExperimentKind::Dynamics => {
            let s = shape(config, config.n)?;
            if config.exact {
                let m = build_transition_matrix(&s, k, config.block_depth)?;
                if let Some(path) = &config.matrix_out {
                    m.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
                }
                let gap = stationary_and_gap(&m);
                let t_mix = match mixing_time_exact(&m) {
                    Ok(t) => Some(t),
                    Err(Error::Capacity(_)) => None,
                    Err(e) => return Err(e),
                };
                return Ok(Outcome::DynamicsExact(DynamicsExactReport {
                    states: m.len(),
                    gap: gap.spectral_gap,
                    t_mix,
                    symmetric: m.is_symmetric(),
                    rows_sum_to_one: m.rows_sum_to_one(),
                    uniform_stationary: m.uniform_is_stationary(),
                }));
            }
            let mut state = DynamicsState::random(&s, k, rng)?;
            let run = run_chain(&mut state, config.block_depth, config.steps, rng)?;
            Ok(Outcome::DynamicsRuns { runs: vec![run] })
        }
    }
}

fn couple(config: &ExperimentConfig, samples: u64, rng: &mut RandomSource) -> Result<Outcome> {
    let (k, depth, c1, c2) = (config.k, config.depth, config.c1, config.c2);
    let s = shape(config, depth)?;
    let ratio = (config.delta as f64 / (k - 1) as f64).powi(depth as i32);
    let exact_mean = (c1 != c2).then_some(ratio).or(Some(0.0));
    let named = |name: &str, estimate: Estimate, exact_mean: Option<f64>| NamedEstimate {
        estimator: name.to_string(),
        estimate,
        exact_mean,
    };
    let tail = |name: &str, tail: TailEstimate| Outcome::Tail {
        estimator: name.to_string(),
        tail,
    };
    Ok(match (config.mode, config.threshold) {
        (CoupleMode::Down, None) => {
            let parts = par_blocks(rng, samples, |r, n| -> Result<Summary> {
                let mut acc = Summary::new();
                for _ in 0..n {
                    acc.push(downward_couple(&s, k, c1, c2, r)?.hamming() as f64);
                }
                Ok(acc)
            });
            let mut acc = Summary::new();
            for p in parts {
                acc.merge(&p?);
            }
            Outcome::Estimates {
                rows: vec![named("mean_hamming_downward", acc.estimate(), exact_mean)],
            }
        }
        (CoupleMode::Down, Some(t)) => {
            let parts = par_blocks(rng, samples, |r, n| -> Result<u64> {
                let mut hits = 0;
                for _ in 0..n {
                    hits += u64::from(downward_couple(&s, k, c1, c2, r)?.hamming() as f64 > t);
                }
                Ok(hits)
            });
            let mut hits = 0;
            for p in parts {
                hits += p?;
            }
            tail("hamming_tail_downward", TailEstimate::from_counts(hits, samples)?.with_threshold(t))
        }
        (CoupleMode::Branching, None) => {
            if c1 == c2 {
                return Err(Error::Config("c2: the branching process starts from one disagreement".into()));
            }
            let parts = par_blocks(rng, samples, |r, n| -> Result<Summary> {
                let mut acc = Summary::new();
                for _ in 0..n {
                    acc.push(simulate_disagreement_process(config.delta, k, depth, r)? as f64);
                }
                Ok(acc)
            });
            let mut acc = Summary::new();
            for p in parts {
                acc.merge(&p?);
            }
            Outcome::Estimates {
                rows: vec![named("mean_disagreements_branching", acc.estimate(), Some(ratio))],
            }
        }
        (CoupleMode::Branching, Some(t)) => {
            tail("hamming_tail_branching", hamming_tail(config.delta, k, depth, t, samples, rng)?)
        }
        (CoupleMode::Downup, None) => {
            let b = estimate_beta_tv(&s, k, c1, c2, samples, rng)?;
            Outcome::Estimates {
                rows: vec![
                    named(DOWN_UP_PLUG_IN, b.plug_in, None),
                    named(DOWN_UP_COUPLING, b.coupling_bound, None),
                ],
            }
        }
        (CoupleMode::Downup, Some(t)) => tail("coupling_tv_tail", coupling_tv_tail(&s, k, c1, c2, t, samples, rng)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig::new(kind)
    }

    #[test]
    fn aggregate_is_the_fold_of_replicas() {
        let mut c = cfg(ExperimentKind::Couple);
        c.samples = 3000;
        c.replicas = 3;
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.replicas.len(), 3);
        let Outcome::Estimates { rows } = &r.aggregate else { panic!() };
        assert_eq!(rows[0].estimate.n, 3000);
        let means: Vec<f64> = r
            .replicas
            .iter()
            .map(|o| match o {
                Outcome::Estimates { rows } => rows[0].estimate.mean,
                _ => unreachable!(),
            })
            .collect();
        let avg = means.iter().sum::<f64>() / 3.0;
        assert!((avg - rows[0].estimate.mean).abs() < 1e-12);
    }

    #[test]
    fn uneven_sample_split() {
        let mut c = cfg(ExperimentKind::Unbiasing);
        c.delta = 4;
        c.depth = 1;
        c.epsilon = Some(1.0 / 3.0);
        c.samples = 1001;
        c.replicas = 4;
        let r = run_experiment(&c).unwrap();
        let Outcome::Tail { tail, .. } = &r.aggregate else { panic!() };
        assert_eq!(tail.n, 1001);
    }

    #[test]
    fn bias_over_a_range_has_one_row_per_depth() {
        let mut c = cfg(ExperimentKind::Bias);
        c.depth_range = Some((1, 6));
        c.samples = 200;
        let r = run_experiment(&c).unwrap();
        let Outcome::Bias { rows } = &r.aggregate else { panic!() };
        assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn marginal_replicas_collapse_to_one() {
        let mut c = cfg(ExperimentKind::Marginal);
        c.depth = 1;
        c.leaves = Some("1,2".into());
        c.replicas = 5;
        c.exact = true;
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.replicas.len(), 1);
        assert_eq!(
            r.aggregate,
            Outcome::Marginal {
                weights: serde_json::json!(["0", "0", "1"]),
                backend: Backend::Rational
            }
        );
    }

    #[test]
    fn sweep_rejects_kinds_without_estimates() {
        let c = cfg(ExperimentKind::Broadcast);
        assert!(matches!(run_sweep(&c), Err(Error::Config(_))));
    }

    #[test]
    fn concentration_needs_a_threshold() {
        let c = cfg(ExperimentKind::Concentration);
        let e = run_experiment(&c).unwrap_err();
        assert!(e.to_string().contains("threshold"));
    }
}
