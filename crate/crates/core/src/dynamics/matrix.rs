//! Exact transition matrices of the block dynamics on tiny trees.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::block_vertices;
use crate::error::{Error, Result};
use crate::exact::{ratio_to_f64, total_colorings};
use crate::tree::{check_colors, TreeShape};

/// Largest `|Ω|` for which states are enumerated.
pub const MATRIX_STATE_LIMIT: usize = 10_000;
/// Largest `|Ω|` for exact matrix powers.
pub const MIXING_STATE_LIMIT: usize = 500;
/// Largest number of stored nonzero matrix entries.
const NONZERO_LIMIT: usize = 20_000_000;

/// All proper colorings of a tree in lexicographic level order, with the
/// partition of the states by their coloring outside each block.
#[derive(Debug, Clone)]
pub struct StateSpace {
    shape: TreeShape,
    k: usize,
    block_depth: usize,
    states: Vec<Vec<u8>>,
    /// `groups[v]`: classes of states agreeing outside `B_v`.
    groups: Vec<Vec<Vec<usize>>>,
    /// `group_of[v][x]`: index into `groups[v]` of the class of state `x`.
    group_of: Vec<Vec<usize>>,
}

impl StateSpace {
    pub fn new(shape: &TreeShape, k: usize, block_depth: usize) -> Result<Self> {
        check_colors(k)?;
        let size = total_colorings(shape, k);
        if size > BigUint::from(MATRIX_STATE_LIMIT) {
            return Err(Error::Capacity(format!(
                "{size} proper colorings exceed the state limit {MATRIX_STATE_LIMIT}"
            )));
        }
        let n = shape.vertex_count();
        let mut states = Vec::new();
        let mut cur = vec![0u8; n];
        enumerate(shape.branching(), k as u8, 0, &mut cur, &mut states);

        let mut groups = Vec::with_capacity(n);
        let mut group_of = Vec::with_capacity(n);
        for v in 0..n {
            let block = block_vertices(shape, v, block_depth)?;
            let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
            let mut gs: Vec<Vec<usize>> = Vec::new();
            let mut of = Vec::with_capacity(states.len());
            for (x, s) in states.iter().enumerate() {
                let mut key = s.clone();
                for &u in &block {
                    key[u] = 0;
                }
                let g = *index.entry(key).or_insert_with(|| {
                    gs.push(Vec::new());
                    gs.len() - 1
                });
                gs[g].push(x);
                of.push(g);
            }
            groups.push(gs);
            group_of.push(of);
        }
        Ok(Self {
            shape: shape.clone(),
            k,
            block_depth,
            states,
            groups,
            group_of,
        })
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block_depth(&self) -> usize {
        self.block_depth
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn index_of(&self, coloring: &[u8]) -> Option<usize> {
        self.states.binary_search_by(|s| s.as_slice().cmp(coloring)).ok()
    }

    /// Classes of states that agree outside `B_v`.
    pub fn groups(&self, v: usize) -> &[Vec<usize>] {
        &self.groups[v]
    }

    pub fn group_of(&self, v: usize, x: usize) -> &[usize] {
        &self.groups[v][self.group_of[v][x]]
    }
}

fn enumerate(b: usize, k: u8, v: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if v == cur.len() {
        out.push(cur.clone());
        return;
    }
    let parent = if v == 0 { 0 } else { cur[(v - 1) / b] };
    for c in 1..=k {
        if c != parent {
            cur[v] = c;
            enumerate(b, k, v + 1, cur, out);
        }
    }
}

/// `P = (1/N) Σ_v P_v` with exact entries. Every entry is stored as an
/// integer numerator over one common denominator.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    space: StateSpace,
    denominator: u64,
    /// Sparse rows: `(column, numerator)` sorted by column.
    rows: Vec<Vec<(usize, u64)>>,
}

pub fn build_transition_matrix(shape: &TreeShape, k: usize, block_depth: usize) -> Result<TransitionMatrix> {
    let space = StateSpace::new(shape, k, block_depth)?;
    TransitionMatrix::from_space(space)
}

impl TransitionMatrix {
    /// `P = (1/N) Σ_v P_v`: the block dynamics with a uniformly chosen `v`.
    pub fn from_space(space: StateSpace) -> Result<Self> {
        let n = space.shape.vertex_count();
        Self::assemble(space, (0..n).collect())
    }

    /// `P_v` alone: the heat-bath update of the single block `B_v`.
    pub fn block_kernel(space: StateSpace, v: usize) -> Result<Self> {
        if v >= space.shape.vertex_count() {
            return Err(Error::Index(format!("vertex {v} out of range")));
        }
        Self::assemble(space, vec![v])
    }

    /// Average of `P_v` over `blocks`.
    fn assemble(space: StateSpace, blocks: Vec<usize>) -> Result<Self> {
        let n = blocks.len() as u64;
        let overflow = || Error::Capacity("common denominator exceeds 64 bits".into());
        let mut lcm = 1u64;
        let mut nonzeros = 0usize;
        for &v in &blocks {
            for g in &space.groups[v] {
                lcm = lcm.lcm(&(g.len() as u64));
                nonzeros = nonzeros.saturating_add(g.len() * g.len());
            }
        }
        if nonzeros > NONZERO_LIMIT {
            return Err(Error::Capacity(format!(
                "transition matrix would store {nonzeros} entries (limit {NONZERO_LIMIT})"
            )));
        }
        let denominator = lcm.checked_mul(n).ok_or_else(overflow)?;
        let rows = (0..space.len())
            .into_par_iter()
            .map(|x| {
                let mut row: BTreeMap<usize, u64> = BTreeMap::new();
                for &v in &blocks {
                    let g = space.group_of(v, x);
                    let w = lcm / g.len() as u64;
                    for &y in g {
                        *row.entry(y).or_insert(0) += w;
                    }
                }
                row.into_iter().collect()
            })
            .collect();
        Ok(Self {
            space,
            denominator,
            rows,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn row(&self, x: usize) -> &[(usize, u64)] {
        &self.rows[x]
    }

    /// Exact entry `P(x, y)`.
    pub fn entry(&self, x: usize, y: usize) -> BigRational {
        let num = self.rows[x]
            .binary_search_by_key(&y, |&(c, _)| c)
            .map(|i| self.rows[x][i].1)
            .unwrap_or(0);
        BigRational::new(BigInt::from(num), BigInt::from(self.denominator))
    }

    pub fn rows_sum_to_one(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().map(|&(_, v)| v as u128).sum::<u128>() == self.denominator as u128)
    }

    /// Column sums equal one, i.e. `πP = π` for uniform `π`.
    pub fn uniform_is_stationary(&self) -> bool {
        let mut cols = vec![0u128; self.len()];
        for r in &self.rows {
            for &(y, v) in r {
                cols[y] += v as u128;
            }
        }
        cols.iter().all(|&c| c == self.denominator as u128)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows.iter().enumerate().all(|(x, r)| {
            r.iter().all(|&(y, v)| {
                self.rows[y]
                    .binary_search_by_key(&x, |&(c, _)| c)
                    .map(|i| self.rows[y][i].1 == v)
                    .unwrap_or(false)
            })
        })
    }

    /// Every row equals the uniform distribution.
    pub fn is_rank_one_uniform(&self) -> bool {
        let m = self.len() as u128;
        self.rows
            .iter()
            .all(|r| r.len() == self.len() && r.iter().all(|&(_, v)| v as u128 * m == self.denominator as u128))
    }

    /// Applies `P` to a function on states: `(Pf)(x) = Σ_y P(x, y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let d = self.denominator as f64;
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(y, v)| v as f64 * f[y]).sum::<f64>() / d)
            .collect()
    }

    /// Writes `row_state,col_state,numerator,denominator` for every nonzero
    /// entry, in lowest terms. States are written as their level-order
    /// colorings, quoted because they contain commas.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row_state,col_state,numerator,denominator")?;
        let label = |x: usize| {
            self.space.states[x]
                .iter()
                .map(u8::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        for (x, r) in self.rows.iter().enumerate() {
            for &(y, v) in r {
                let g = v.gcd(&self.denominator);
                writeln!(w, "\"{}\",\"{}\",{},{}", label(x), label(y), v / g, self.denominator / g)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub is_uniform_stationary: bool,
    pub spectral_gap: f64,
}

/// Exact stationarity of the uniform law and `1 − λ₂` by power iteration.
///
/// Iterates the lazy matrix `(P + I)/2`, whose spectrum is `(λ + 1)/2 ≥ 0`,
/// on vectors orthogonal to the constants, until the Rayleigh quotient
/// settles to 1e−13.
pub fn stationary_and_gap(matrix: &TransitionMatrix) -> GapReport {
    let is_uniform_stationary = matrix.uniform_is_stationary();
    let m = matrix.len();
    if m < 2 {
        return GapReport {
            is_uniform_stationary,
            spectral_gap: 1.0,
        };
    }
    let deflate = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / m as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        norm
    };
    // Deterministic start with components along every eigenvector.
    let mut v: Vec<f64> = (0..m).map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5).collect();
    deflate(&mut v);
    let mut rho = f64::NAN;
    let mut stable = 0;
    for _ in 0..1_000_000 {
        let pv = matrix.apply(&v);
        let mut w: Vec<f64> = pv.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if deflate(&mut w) == 0.0 {
            rho = 0.0;
            break;
        }
        v = w;
        if (next - rho).abs() < 1e-13 {
            stable += 1;
            if stable >= 50 {
                rho = next;
                break;
            }
        } else {
            stable = 0;
        }
        rho = next;
    }
    let lambda2 = 2.0 * rho - 1.0;
    GapReport {
        is_uniform_stationary,
        spectral_gap: (1.0 - lambda2).clamp(0.0, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "steps", rename_all = "snake_case")]
pub enum MixingTime {
    Finite(u64),
    NonErgodic,
}

/// Smallest `t` with `max_x ‖P^t(x, ·) − π‖_TV ≤ 1/(2e)`, from exact powers.
/// Irreducibility is checked first by graph search; heat-bath kernels have
/// positive diagonals, so irreducible means ergodic.
pub fn mixing_time_exact(matrix: &TransitionMatrix) -> Result<MixingTime> {
    const MAX_STEPS: u64 = 100_000;
    let m = matrix.len();
    if m > MIXING_STATE_LIMIT {
        return Err(Error::Capacity(format!(
            "{m} states exceed the exact mixing-time limit {MIXING_STATE_LIMIT}"
        )));
    }
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        for &(y, _) in matrix.row(x) {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Ok(MixingTime::NonErgodic);
    }
    let target = 1.0 / (2.0 * std::f64::consts::E);
    let d = BigUint::from(matrix.denominator());
    let mm = BigUint::from(m);
    // dist[x] = D^t · P^t(x, ·); entries are exact integers.
    let mut dist: Vec<Vec<BigUint>> = (0..m)
        .map(|x| (0..m).map(|y| if x == y { BigUint::one() } else { BigUint::zero() }).collect())
        .collect();
    let mut scale = BigUint::one();
    for t in 1..=MAX_STEPS {
        dist = dist
            .par_iter()
            .map(|row| {
                let mut next = vec![BigUint::zero(); m];
                for (z, mass) in row.iter().enumerate() {
                    if mass.is_zero() {
                        continue;
                    }
                    for &(y, v) in matrix.row(z) {
                        next[y] += mass * v;
                    }
                }
                next
            })
            .collect();
        scale *= &d;
        // TV = Σ_y |m·dist − scale| / (2 m scale)
        let worst = dist
            .iter()
            .map(|row| {
                let sum: BigInt = row
                    .iter()
                    .map(|p| (BigInt::from(p * &mm) - BigInt::from(scale.clone())).abs())
                    .sum();
                sum
            })
            .max()
            .unwrap_or_default();
        let tv = BigRational::new(worst, BigInt::from(&scale * &mm * 2u32));
        if ratio_to_f64(&tv) <= target {
            return Ok(MixingTime::Finite(t));
        }
    }
    Err(Error::Capacity(format!("no mixing within {MAX_STEPS} steps")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glauber_on_a_cherry() {
        let s = TreeShape::new(2, 1).unwrap();
        let p = build_transition_matrix(&s, 4, 0).unwrap();
        assert_eq!(p.len(), 36);
        assert!(p.rows_sum_to_one());
        assert!(p.is_symmetric());
        assert!(p.uniform_is_stationary());
        let g = stationary_and_gap(&p);
        assert!(g.is_uniform_stationary && g.spectral_gap > 0.0 && g.spectral_gap <= 1.0);
        assert!(matches!(mixing_time_exact(&p).unwrap(), MixingTime::Finite(_)));
        // Moving the root from state (1,2,2) to (3,2,2): 1/3 · 1/3.
        let (x, y) = (p.space().index_of(&[1, 2, 2]).unwrap(), p.space().index_of(&[3, 2, 2]).unwrap());
        assert_eq!(p.entry(x, y), BigRational::new(1.into(), 9.into()));
    }

    #[test]
    fn whole_tree_block() {
        let s = TreeShape::new(2, 1).unwrap();
        let space = StateSpace::new(&s, 3, 1).unwrap();
        let root = TransitionMatrix::block_kernel(space.clone(), 0).unwrap();
        assert!(root.is_rank_one_uniform());
        assert!((stationary_and_gap(&root).spectral_gap - 1.0).abs() < 1e-10);
        assert_eq!(mixing_time_exact(&root).unwrap(), MixingTime::Finite(1));
        // The chain still picks leaves, whose blocks are single sites.
        let p = TransitionMatrix::from_space(space).unwrap();
        assert!(!p.is_rank_one_uniform());
        assert!(p.rows_sum_to_one() && p.is_symmetric() && p.uniform_is_stationary());
    }

    #[test]
    fn frozen_single_site_chain() {
        // k = 3 on a star with 2 leaves: leaves colored (1, 2) freeze the
        // root at 3, but leaves can still move when the root allows it, so
        // the chain is connected; the search must terminate either way.
        let s = TreeShape::new(2, 1).unwrap();
        let p = build_transition_matrix(&s, 3, 0).unwrap();
        assert!(p.rows_sum_to_one() && p.is_symmetric());
        let r = mixing_time_exact(&p).unwrap();
        assert!(matches!(r, MixingTime::Finite(_) | MixingTime::NonErgodic));
    }

    #[test]
    fn guards() {
        let s = TreeShape::new(3, 2).unwrap();
        assert!(matches!(build_transition_matrix(&s, 4, 0), Err(Error::Capacity(_))));
    }

    #[test]
    fn csv_export() {
        let s = TreeShape::new(2, 1).unwrap();
        let p = build_transition_matrix(&s, 3, 0).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("row_state,col_state,numerator,denominator"));
        // From (1,2,2) each of the three sites has two choices, one of
        // which keeps it in place.
        assert_eq!(lines.next(), Some("\"1,2,2\",\"1,2,2\",1,2"));
        let nonzeros: usize = (0..p.len()).map(|x| p.row(x).len()).sum();
        assert_eq!(text.lines().count(), 1 + nonzeros);
    }
}
