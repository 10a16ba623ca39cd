//! Cut norm, cut distance and cut decompositions.
//!
//! Arrays and step kernels share one representation here: per-cell values
//! plus one mass per index (the same masses on every axis). For an array the
//! masses are 1 and the cut norm is the unnormalized box sum; for a kernel
//! the masses are the step masses, which makes the box maximum over unions
//! of steps the exact kernel cut norm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrays::{checked_pow, decode, RArray};
use crate::error::{ensure, Error, Result};
use crate::par;
use crate::rng::{derive_seed, stream_rng};
use crate::sampling::{sample_h, StepKernel};
use crate::stats::Summary;

/// Largest number of enumerated indicator bits, `(r - 1) * n`.
pub const EXACT_BITS_LIMIT: usize = 24;

/// An array or a step kernel.
#[derive(Debug, Clone, Copy)]
pub enum CutSource<'a> {
    Array(&'a RArray),
    Kernel(&'a StepKernel),
}

impl<'a> From<&'a RArray> for CutSource<'a> {
    fn from(a: &'a RArray) -> Self {
        CutSource::Array(a)
    }
}

impl<'a> From<&'a StepKernel> for CutSource<'a> {
    fn from(w: &'a StepKernel) -> Self {
        CutSource::Kernel(w)
    }
}

#[derive(Debug, Clone)]
struct Weighted {
    r: usize,
    n: usize,
    masses: Vec<f64>,
    /// Raw cell values.
    values: Vec<f64>,
    /// Cell values times the product of the cell's index masses.
    weighted: Vec<f64>,
}

impl Weighted {
    fn new(r: usize, masses: Vec<f64>, values: Vec<f64>) -> Self {
        let n = masses.len();
        let mut idx = vec![0; r];
        let weighted = values
            .iter()
            .enumerate()
            .map(|(flat, v)| {
                decode(flat, n, r, &mut idx);
                v * idx.iter().map(|&i| masses[i]).product::<f64>()
            })
            .collect();
        Weighted { r, n, masses, values, weighted }
    }

    fn from_source(src: CutSource<'_>) -> Self {
        match src {
            CutSource::Array(a) => Weighted::new(a.r(), vec![1.0; a.k()], a.values().to_vec()),
            CutSource::Kernel(w) => Weighted::new(w.r(), w.masses().to_vec(), w.values().to_vec()),
        }
    }

    fn l2(&self) -> f64 {
        self.values.iter().zip(&self.weighted).map(|(v, w)| v * w).sum::<f64>().sqrt()
    }

    /// Weighted sum over the box `sets[0] x ... x sets[r-1]`.
    fn box_sum(&self, sets: &[Vec<bool>]) -> f64 {
        let mut idx = vec![0; self.r];
        let mut s = 0.0;
        for (flat, w) in self.weighted.iter().enumerate() {
            decode(flat, self.n, self.r, &mut idx);
            if idx.iter().enumerate().all(|(a, &i)| sets[a][i]) {
                s += w;
            }
        }
        s
    }

    /// For each index `i` on `axis`, the weighted sum over the other axes'
    /// sets. Sets on `axis` itself are ignored.
    fn marginal(&self, axis: usize, sets: &[Vec<bool>]) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        let mut idx = vec![0; self.r];
        for (flat, w) in self.weighted.iter().enumerate() {
            decode(flat, self.n, self.r, &mut idx);
            if idx.iter().enumerate().all(|(a, &i)| a == axis || sets[a][i]) {
                m[idx[axis]] += w;
            }
        }
        m
    }

    /// Contribution to the axis-0 marginal of index `j` on `axis`, restricted
    /// to the current sets of the remaining axes.
    fn slice_marginal(&self, axis: usize, j: usize, sets: &[Vec<bool>], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let others: Vec<usize> = (1..self.r).filter(|&a| a != axis).collect();
        let len = checked_pow(self.n, others.len()).unwrap();
        let mut oi = vec![0; others.len()];
        let mut idx = vec![0; self.r];
        for t in 0..len {
            decode(t, self.n, others.len(), &mut oi);
            if !others.iter().zip(&oi).all(|(&a, &i)| sets[a][i]) {
                continue;
            }
            for (&a, &i) in others.iter().zip(&oi) {
                idx[a] = i;
            }
            idx[axis] = j;
            for (i0, o) in out.iter_mut().enumerate() {
                idx[0] = i0;
                *o += self.weighted[crate::arrays::encode(&idx, self.n)];
            }
        }
    }
}

/// A box attaining (or bounding) the cut norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutWitness {
    /// `|box sum|`, recomputed directly on the witness.
    pub value: f64,
    /// Signed box sum.
    pub signed_sum: f64,
    /// One sorted index set per axis.
    pub sets: Vec<Vec<usize>>,
}

fn sets_from_bools(sets: &[Vec<bool>]) -> Vec<Vec<usize>> {
    sets.iter().map(|s| s.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()).collect()
}

fn bools_from_sets(sets: &[Vec<usize>], n: usize) -> Vec<Vec<bool>> {
    sets.iter()
        .map(|s| {
            let mut b = vec![false; n];
            s.iter().for_each(|&i| b[i] = true);
            b
        })
        .collect()
}

/// Candidate ordering: larger value first, then smaller mask, then positive sign.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    mask: u64,
    positive: bool,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        if self.value != other.value {
            return self.value > other.value;
        }
        if self.mask != other.mask {
            return self.mask < other.mask;
        }
        self.positive && !other.positive
    }
}

fn sets_for_mask(mask: u64, n: usize, r: usize) -> Vec<Vec<bool>> {
    let mut sets = vec![vec![true; n]; r];
    for (a, set) in sets.iter_mut().enumerate().skip(1) {
        for (i, x) in set.iter_mut().enumerate() {
            *x = mask >> ((a - 1) * n + i) & 1 == 1;
        }
    }
    sets
}

fn consider(m: &[f64], mask: u64, best: &mut Option<Candidate>) {
    let pos: f64 = m.iter().filter(|&&v| v > 0.0).sum();
    let neg: f64 = -m.iter().filter(|&&v| v < 0.0).sum::<f64>();
    for c in [Candidate { value: pos, mask, positive: true }, Candidate { value: neg, mask, positive: false }] {
        if best.as_ref().is_none_or(|b| c.beats(b)) {
            *best = Some(c);
        }
    }
}

fn exact_weighted(w: &Weighted) -> Result<CutWitness> {
    let (n, r) = (w.n, w.r);
    let bits = (r - 1) * n;
    ensure!(
        bits <= EXACT_BITS_LIMIT,
        Capacity,
        "exact cut norm enumerates 2^{bits} subsets; limit is (r-1)*n <= {EXACT_BITS_LIMIT}, use the heuristic"
    );
    let high = bits.min(6);
    let low = bits - high;
    let chunks = 1u64 << high;
    let results = par::map_range(chunks as usize, |c| {
        let mut mask = (c as u64) << low;
        let mut sets = sets_for_mask(mask, n, r);
        let mut m = w.marginal(0, &sets);
        let mut delta = vec![0.0; n];
        let mut best = None;
        consider(&m, mask, &mut best);
        for t in 1u64..(1u64 << low) {
            let b = t.trailing_zeros() as usize;
            let (axis, j) = (1 + b / n, b % n);
            let adding = !sets[axis][j];
            w.slice_marginal(axis, j, &sets, &mut delta);
            let sign = if adding { 1.0 } else { -1.0 };
            m.iter_mut().zip(&delta).for_each(|(mi, d)| *mi += sign * d);
            sets[axis][j] = adding;
            mask ^= 1u64 << b;
            consider(&m, mask, &mut best);
        }
        best.expect("at least one candidate per chunk")
    });
    let mut best = results[0];
    for c in &results[1..] {
        if c.beats(&best) {
            best = *c;
        }
    }
    let mut sets = sets_for_mask(best.mask, n, r);
    let m = w.marginal(0, &sets);
    sets[0] = m.iter().map(|&v| if best.positive { v > 0.0 } else { v < 0.0 }).collect();
    Ok(witness_of(w, &sets))
}

fn witness_of(w: &Weighted, sets: &[Vec<bool>]) -> CutWitness {
    let s = w.box_sum(sets);
    CutWitness { value: s.abs(), signed_sum: s, sets: sets_from_bools(sets) }
}

fn heuristic_weighted(w: &Weighted, restarts: usize, seed: u64) -> CutWitness {
    let (n, r) = (w.n, w.r);
    let restarts = restarts.max(1);
    let runs = par::map_range(restarts, |run| {
        let mut rng = stream_rng(derive_seed(seed, "cutnorm-heuristic", run as u64));
        let init: Vec<Vec<bool>> = (0..r).map(|_| (0..n).map(|_| run == 0 || rng.random_bool(0.5)).collect()).collect();
        let mut best: Option<CutWitness> = None;
        for positive in [true, false] {
            let mut sets = init.clone();
            for _ in 0..100 {
                let mut changed = false;
                for axis in 0..r {
                    let m = w.marginal(axis, &sets);
                    let new: Vec<bool> = m.iter().map(|&v| if positive { v > 0.0 } else { v < 0.0 }).collect();
                    if new != sets[axis] {
                        sets[axis] = new;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            let cand = witness_of(w, &sets);
            if best.as_ref().is_none_or(|b| cand.value > b.value) {
                best = Some(cand);
            }
        }
        best.unwrap()
    });
    runs.into_iter()
        .fold(None::<CutWitness>, |acc, c| match acc {
            Some(b) if b.value >= c.value => Some(b),
            _ => Some(c),
        })
        .unwrap()
}

/// Exact cut norm by enumeration over the index sets of the last `r - 1`
/// axes; the first axis is chosen in closed form from the sign of its
/// marginal. Ties go to the lexicographically smallest encoding.
pub fn cut_norm_exact<'a>(a: impl Into<CutSource<'a>>) -> Result<CutWitness> {
    exact_weighted(&Weighted::from_source(a.into()))
}

/// Lower bound on the cut norm by alternating sign-optimal updates, one axis
/// at a time. Restart 0 starts from the full sets.
pub fn cut_norm_heuristic<'a>(a: impl Into<CutSource<'a>>, restarts: usize, seed: u64) -> CutWitness {
    heuristic_weighted(&Weighted::from_source(a.into()), restarts, seed)
}

/// `n^{-r} ||F - G||_cut`.
pub fn cut_distance(f: &RArray, g: &RArray) -> Result<f64> {
    let diff = f.sub(g)?;
    let norm = (f.k() as f64).powi(f.r() as i32);
    Ok(cut_norm_exact(&diff)?.value / norm)
}

/// Witness finder used while decomposing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutOracle {
    Exact,
    Heuristic { restarts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// Remainder cut norm computed exactly.
    Exact,
    /// Only a heuristic lower bound backs the remainder bound.
    LowerBound,
}

/// One weighted box `d * 1_{S_1 x ... x S_r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutTerm {
    pub coefficient: f64,
    pub sets: Vec<Vec<usize>>,
    /// Product of the set masses.
    pub box_mass: f64,
    /// Decrease of the squared L2 norm caused by this term, `d^2 * box_mass`.
    pub l2_sq_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutRemainder {
    Array(RArray),
    Kernel(StepKernel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutDecomposition {
    pub eps: f64,
    /// L2 norm of the decomposed object (mass-weighted; `k^{-r}` for arrays).
    pub l2_norm: f64,
    pub terms: Vec<CutTerm>,
    pub remainder: CutRemainder,
    /// Normalized cut norm of the remainder, per `certificate`.
    pub remainder_cut_norm: f64,
    pub certificate: Certificate,
    /// L2 norm of the remainder after each step, starting with the input.
    pub l2_history: Vec<f64>,
}

impl CutDecomposition {
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// `ceil(1 / eps^2)`.
    pub fn term_bound(&self) -> usize {
        (1.0 / (self.eps * self.eps)).ceil() as usize
    }
}

/// Greedy cut decomposition: while the remainder has a box with normalized
/// sum at least `eps * ||W||_2`, subtract the remainder's average on that box.
pub fn cut_decompose<'a>(
    source: impl Into<CutSource<'a>>,
    eps: f64,
    oracle: CutOracle,
    seed: u64,
) -> Result<CutDecomposition> {
    ensure!(eps > 0.0 && eps.is_finite(), Argument, "eps must be positive, got {eps}");
    let source = source.into();
    let mut rem = match source {
        CutSource::Array(a) => Weighted::new(a.r(), vec![1.0 / a.k() as f64; a.k()], a.values().to_vec()),
        CutSource::Kernel(w) => Weighted::new(w.r(), w.masses().to_vec(), w.values().to_vec()),
    };
    if let CutOracle::Exact = oracle {
        ensure!(
            (rem.r - 1) * rem.n <= EXACT_BITS_LIMIT,
            Capacity,
            "exact oracle needs (r-1)*n <= {EXACT_BITS_LIMIT}, got {}",
            (rem.r - 1) * rem.n
        );
    }
    let l2 = rem.l2();
    let threshold = eps * l2;
    let max_terms = (1.0 / (eps * eps)).ceil() as usize;
    let mut terms = Vec::new();
    let mut history = vec![l2];

    let find = |w: &Weighted, step: usize| -> Result<CutWitness> {
        match oracle {
            CutOracle::Exact => exact_weighted(w),
            CutOracle::Heuristic { restarts } => {
                Ok(heuristic_weighted(w, restarts, derive_seed(seed, "cutdecomp", step as u64)))
            }
        }
    };

    let mut witness = find(&rem, 0)?;
    while l2 > 0.0 && witness.value >= threshold && terms.len() < max_terms {
        let box_mass: f64 = witness.sets.iter().map(|s| s.iter().map(|&i| rem.masses[i]).sum::<f64>()).product();
        if box_mass <= 0.0 {
            break;
        }
        let d = witness.signed_sum / box_mass;
        let sets = bools_from_sets(&witness.sets, rem.n);
        let mut idx = vec![0; rem.r];
        for flat in 0..rem.values.len() {
            decode(flat, rem.n, rem.r, &mut idx);
            if idx.iter().enumerate().all(|(a, &i)| sets[a][i]) {
                rem.values[flat] -= d;
            }
        }
        rem = Weighted::new(rem.r, rem.masses.clone(), rem.values);
        history.push(rem.l2());
        terms.push(CutTerm { coefficient: d, sets: witness.sets.clone(), box_mass, l2_sq_drop: d * d * box_mass });
        witness = find(&rem, terms.len())?;
    }

    let remainder = match source {
        CutSource::Array(a) => CutRemainder::Array(RArray::new(a.r(), a.k(), rem.values.clone())?),
        CutSource::Kernel(w) => CutRemainder::Kernel(StepKernel::new(w.r(), w.masses().to_vec(), rem.values.clone())?),
    };
    let certificate = match oracle {
        CutOracle::Exact => Certificate::Exact,
        CutOracle::Heuristic { .. } => Certificate::LowerBound,
    };
    Ok(CutDecomposition {
        eps,
        l2_norm: l2,
        terms,
        remainder,
        remainder_cut_norm: witness.value,
        certificate,
        l2_history: history,
    })
}

/// Normalized cut norm `k^{-r} ||A||_cut` of an array.
pub fn normalized_cut_norm(a: &RArray, oracle: CutOracle, seed: u64) -> Result<f64> {
    let norm = (a.k() as f64).powi(a.r() as i32);
    let w = match oracle {
        CutOracle::Exact => cut_norm_exact(a)?,
        CutOracle::Heuristic { restarts } => cut_norm_heuristic(a, restarts, seed),
    };
    Ok(w.value / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSamplingReport {
    pub kernel_cut_norm: f64,
    pub k: usize,
    pub deviations: Vec<f64>,
    pub summary: Summary,
}

/// Per-trial `| k^{-r} ||H(k,W)||_cut - ||W||_cut |`. Falls back to the
/// heuristic on samples too large for enumeration when `allow_heuristic`.
pub fn cutnorm_sampling_experiment(
    w: &StepKernel,
    k: usize,
    trials: usize,
    seed: u64,
    allow_heuristic: bool,
) -> Result<CutSamplingReport> {
    let kernel = cut_norm_exact(w)?.value;
    let exact_ok = (w.r() - 1) * k <= EXACT_BITS_LIMIT;
    if !exact_ok && !allow_heuristic {
        return Err(Error::Capacity(format!(
            "samples of size {k} exceed the exact cut-norm limit; enable the heuristic"
        )));
    }
    let oracle = if exact_ok { CutOracle::Exact } else { CutOracle::Heuristic { restarts: 16 } };
    let deviations = par::map_range(trials, |t| -> Result<f64> {
        let s = derive_seed(seed, "cutnorm-sampling", t as u64);
        let h = sample_h(w, k, s)?;
        Ok((normalized_cut_norm(&h.array, oracle, s)? - kernel).abs())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CutSamplingReport { kernel_cut_norm: kernel, k, summary: Summary::of(&deviations), deviations })
}
