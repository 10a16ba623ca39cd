//! Ground-state energies: exact enumeration, local search, fractional
//! coordinate ascent, rounding of fractional partitions and the
//! microcanonical (fixed class mass) variants.
//!
//! Every solver works on a [`GseProblem`], the canonical coefficient tensor
//! `T[z][n] = k^{-r} sum_e J^e_z(W^e_n)`, so that the energy of `x` is
//! `sum_z sum_n T[z][n] prod_j x[n_j][z_j]`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrays::{
    checked_pow, contract, decode, FractionalPartition, IntegerPartition, InteractionArray, LayeredInteraction,
    LayeredRArray, RArray, StateDistribution,
};
use crate::error::{ensure, Error, Result};
use crate::par;
use crate::rng::{derive_seed, stream_rng};
use crate::sampling::StepKernel;

/// Largest `q^k` the exact solver enumerates.
pub const EXACT_LIMIT: usize = 20_000_000;
/// Sweep cap for coordinate ascent.
pub const MAX_SWEEPS: usize = 1000;
/// Ascent stops once a sweep gains less than this.
pub const SWEEP_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-10;
const ENTRY_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-9;

/// Canonical coefficient tensor of a layered instance.
#[derive(Debug, Clone)]
pub struct GseProblem {
    k: usize,
    q: usize,
    r: usize,
    /// `tensor[z * k^r + n]`.
    tensor: Vec<f64>,
    /// `coords[n * r + j]` is axis `j` of tuple `n`.
    coords: Vec<u32>,
    /// Tuples containing each vertex, each listed once.
    incident: Vec<Vec<u32>>,
}

impl GseProblem {
    pub fn new(w: &LayeredRArray, j: &LayeredInteraction) -> Result<Self> {
        ensure!(w.labels() == j.labels(), Dimension, "layer sets differ: {:?} vs {:?}", w.labels(), j.labels());
        ensure!(w.r() == j.r(), Dimension, "array arity {} differs from interaction arity {}", w.r(), j.r());
        let (k, r) = (w.k(), w.r());
        let scale = (k as f64).powi(r as i32);
        let layers: Vec<(&[f64], &InteractionArray)> = w.layers().iter().map(|g| g.values()).zip(j.layers()).collect();
        Self::build(k, j.q(), r, &layers, |_| 1.0 / scale)
    }

    pub fn single(g: &RArray, j: &InteractionArray) -> Result<Self> {
        Self::new(&LayeredRArray::single(g.clone()), &LayeredInteraction::single(j.clone()))
    }

    /// Problem over the steps of a kernel: rows are steps and each tuple is
    /// weighted by the product of its step masses, so a fractional partition
    /// `y` gives the kernel energy when step `c` is split according to `y[c]`.
    pub fn from_kernel(w: &StepKernel, j: &InteractionArray) -> Result<Self> {
        ensure!(w.r() == j.r(), Dimension, "kernel arity {} differs from interaction arity {}", w.r(), j.r());
        let masses = w.masses().to_vec();
        let r = w.r();
        let mut idx = vec![0; r];
        let m = w.steps();
        Self::build(m, j.q(), r, &[(w.values(), j)], |n| {
            decode(n, m, r, &mut idx);
            idx.iter().map(|&i| masses[i]).product()
        })
    }

    fn build(
        k: usize,
        q: usize,
        r: usize,
        layers: &[(&[f64], &InteractionArray)],
        mut weight: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        ensure!(k >= 1, Argument, "instance needs at least one vertex");
        let kr = checked_pow(k, r).ok_or_else(|| Error::Capacity("k^r overflow".into()))?;
        let cells = checked_pow(q, r).ok_or_else(|| Error::Capacity("q^r overflow".into()))?;
        ensure!(
            cells.checked_mul(kr).is_some_and(|c| c <= 1 << 28),
            Capacity,
            "coefficient tensor of q^r * k^r = {cells} * {kr} entries is too large"
        );
        let mut tensor = vec![0.0; cells * kr];
        for n in 0..kr {
            let wt = weight(n);
            for (values, jj) in layers {
                for z in 0..cells {
                    tensor[z * kr + n] += jj.apply(z, values[n])? * wt;
                }
            }
        }
        let mut coords = vec![0u32; kr * r];
        let mut incident = vec![Vec::new(); k];
        let mut idx = vec![0; r];
        for n in 0..kr {
            decode(n, k, r, &mut idx);
            for (j, &i) in idx.iter().enumerate() {
                coords[n * r + j] = i as u32;
                if !idx[..j].contains(&i) {
                    incident[i].push(n as u32);
                }
            }
        }
        Ok(GseProblem { k, q, r, tensor, coords, incident })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    fn kr(&self) -> usize {
        self.coords.len() / self.r
    }

    #[inline]
    fn tuple(&self, n: usize) -> &[u32] {
        &self.coords[n * self.r..(n + 1) * self.r]
    }

    #[inline]
    fn cell_of(&self, n: usize, assignment: &[usize]) -> usize {
        self.tuple(n).iter().fold(0, |acc, &i| acc * self.q + assignment[i as usize])
    }

    /// Same problem with every tuple that repeats a vertex removed.
    pub fn zero_diagonal(&self) -> GseProblem {
        let mut out = self.clone();
        let kr = self.kr();
        for n in 0..kr {
            let t = self.tuple(n);
            if (1..t.len()).any(|j| t[..j].contains(&t[j])) {
                for z in 0..self.q.pow(self.r as u32) {
                    out.tensor[z * kr + n] = 0.0;
                }
            }
        }
        out
    }

    fn check_partition(&self, k: usize, q: usize) -> Result<()> {
        ensure!(k == self.k, Dimension, "partition has {k} rows, instance has {} vertices", self.k);
        ensure!(q == self.q, Dimension, "partition has {q} states, interaction has {}", self.q);
        Ok(())
    }

    /// Energy of a fractional partition.
    pub fn energy(&self, x: &FractionalPartition) -> Result<f64> {
        self.check_partition(x.k(), x.q())?;
        let columns: Vec<Vec<f64>> = (0..self.q).map(|m| x.column(m)).collect();
        let kr = self.kr();
        let mut z = vec![0; self.r];
        let mut total = 0.0;
        for cell in 0..self.q.pow(self.r as u32) {
            decode(cell, self.q, self.r, &mut z);
            let cols: Vec<&[f64]> = z.iter().map(|&s| columns[s].as_slice()).collect();
            total += contract(&self.tensor[cell * kr..(cell + 1) * kr], self.k, self.r, &cols);
        }
        Ok(total)
    }

    /// Energy of an integer partition given as a state per vertex.
    pub fn integer_energy(&self, assignment: &[usize]) -> f64 {
        let kr = self.kr();
        (0..kr).map(|n| self.tensor[self.cell_of(n, assignment) * kr + n]).sum()
    }

    /// Contribution of the tuples containing `v` under an integer assignment.
    fn vertex_contribution(&self, v: usize, assignment: &[usize]) -> f64 {
        let kr = self.kr();
        self.incident[v].iter().map(|&n| self.tensor[self.cell_of(n as usize, assignment) * kr + n as usize]).sum()
    }

    /// Contribution of the tuples containing `v` under a fractional partition
    /// whose row `v` is replaced by `row`.
    fn row_contribution(&self, x: &FractionalPartition, v: usize, row: &[f64]) -> f64 {
        let kr = self.kr();
        let cells = self.q.pow(self.r as u32);
        let mut z = vec![0; self.r];
        let mut total = 0.0;
        for &n in &self.incident[v] {
            let t = self.tuple(n as usize);
            for cell in 0..cells {
                let c = self.tensor[cell * kr + n as usize];
                if c == 0.0 {
                    continue;
                }
                decode(cell, self.q, self.r, &mut z);
                let mut prod = c;
                for (&i, &s) in t.iter().zip(&z) {
                    prod *= if i as usize == v { row[s] } else { x.get(i as usize, s) };
                }
                total += prod;
            }
        }
        total
    }

    /// `dE/dx[v][i]` for every state `i`.
    fn row_gradient(&self, x: &FractionalPartition, v: usize) -> Vec<f64> {
        let kr = self.kr();
        let cells = self.q.pow(self.r as u32);
        let mut z = vec![0; self.r];
        let mut grad = vec![0.0; self.q];
        for &n in &self.incident[v] {
            let t = self.tuple(n as usize);
            for cell in 0..cells {
                let c = self.tensor[cell * kr + n as usize];
                if c == 0.0 {
                    continue;
                }
                decode(cell, self.q, self.r, &mut z);
                for j in 0..self.r {
                    if t[j] as usize != v {
                        continue;
                    }
                    let mut prod = c;
                    for l in (0..self.r).filter(|&l| l != j) {
                        prod *= x.get(t[l] as usize, z[l]);
                    }
                    grad[z[j]] += prod;
                }
            }
        }
        grad
    }
}

/// Class-count window `[lo_i, hi_i]` of the relaxed microcanonical set:
/// `|c_i / k - a_i| <= 1 / k`.
pub fn micro_bounds(k: usize, a: &StateDistribution) -> (Vec<usize>, Vec<usize>) {
    let kf = k as f64;
    a.masses()
        .iter()
        .map(|&ai| {
            let lo = (kf * ai - 1.0 - MASS_TOL).ceil().max(0.0) as usize;
            let hi = ((kf * ai + 1.0 + MASS_TOL).floor() as usize).min(k);
            (lo, hi)
        })
        .unzip()
}

/// Whether class counts lie in the relaxed microcanonical set.
pub fn in_omega_hat(counts: &[usize], k: usize, a: &StateDistribution) -> bool {
    let (lo, hi) = micro_bounds(k, a);
    counts.len() == lo.len() && counts.iter().zip(lo.iter().zip(&hi)).all(|(c, (l, h))| l <= c && c <= h)
}

/// Class counts `floor(k a_i)`, completed by largest remainder; ties go to the
/// lower class index.
pub fn micro_targets(k: usize, a: &StateDistribution) -> Vec<usize> {
    let kf = k as f64;
    let mut counts: Vec<usize> = a.masses().iter().map(|&ai| (kf * ai + MASS_TOL).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let rem = |i: usize| kf * a.masses()[i] - counts[i] as f64;
    let rems: Vec<f64> = (0..counts.len()).map(rem).collect();
    order.sort_by(|&x, &y| rems[y].total_cmp(&rems[x]).then(x.cmp(&y)));
    for &i in order.iter().take(k.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Exact,
    Local,
    Ascent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GseCertificate {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Argmax {
    Integer(IntegerPartition),
    Fractional(FractionalPartition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GseResult {
    pub value: f64,
    pub argmax: Argmax,
    pub solver: Solver,
    pub restarts: usize,
    pub certificate: GseCertificate,
}

impl GseResult {
    pub fn fractional_argmax(&self) -> FractionalPartition {
        match &self.argmax {
            Argmax::Integer(p) => p.to_fractional(),
            Argmax::Fractional(x) => x.clone(),
        }
    }
}

struct Search<'a> {
    p: &'a GseProblem,
    /// Tuples grouped by their largest vertex.
    by_max: &'a [Vec<u32>],
    bounds: Option<&'a (Vec<usize>, Vec<usize>)>,
    /// `suffix[v]`: sum over tuples with largest vertex `>= v` of their best coefficient.
    suffix: &'a [f64],
    /// Value some admissible partition is known to reach.
    floor: f64,
    assignment: Vec<usize>,
    counts: Vec<usize>,
    best: f64,
    best_assignment: Option<Vec<usize>>,
}

impl Search<'_> {
    fn admissible(&self, v: usize) -> bool {
        let Some((lo, hi)) = self.bounds else { return true };
        if self.counts.iter().zip(hi).any(|(c, h)| c > h) {
            return false;
        }
        let missing: usize = self.counts.iter().zip(lo).map(|(&c, &l)| l.saturating_sub(c)).sum();
        missing < self.p.k - v
    }

    fn gain(&self, v: usize) -> f64 {
        let kr = self.p.kr();
        self.by_max[v]
            .iter()
            .map(|&n| self.p.tensor[self.p.cell_of(n as usize, &self.assignment) * kr + n as usize])
            .sum()
    }

    /// True when no completion can reach the best value seen. The slack
    /// keeps rounding from ever pruning an optimal leaf.
    fn hopeless(&self, upper: f64) -> bool {
        let best = if self.best_assignment.is_some() { self.best.max(self.floor) } else { self.floor };
        upper < best - 1e-9 * (1.0 + best.abs())
    }

    fn descend(&mut self, v: usize, acc: f64) {
        if v == self.p.k {
            if self.best_assignment.is_none() || acc > self.best {
                self.best = acc;
                self.best_assignment = Some(self.assignment.clone());
            }
            return;
        }
        for m in 0..self.p.q {
            self.assignment[v] = m;
            self.counts[m] += 1;
            if self.admissible(v) {
                let g = self.gain(v);
                if !self.hopeless(acc + g + self.suffix[v + 1]) {
                    self.descend(v + 1, acc + g);
                }
            }
            self.counts[m] -= 1;
        }
    }
}

impl GseProblem {
    fn check_micro(&self, micro: Option<&StateDistribution>) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
        let Some(a) = micro else { return Ok(None) };
        ensure!(a.q() == self.q, Dimension, "mass vector has {} states, interaction has {}", a.q(), self.q);
        let (lo, hi) = micro_bounds(self.k, a);
        ensure!(
            lo.iter().sum::<usize>() <= self.k && hi.iter().sum::<usize>() >= self.k,
            Infeasible,
            "no integer partition of {} vertices has class masses within 1/k of {:?}",
            self.k,
            a.masses()
        );
        Ok(Some((lo, hi)))
    }

    /// Exact maximum over integer partitions (within the relaxed
    /// microcanonical set when `micro` is given). Ties go to the
    /// lexicographically first assignment.
    pub fn exact(&self, micro: Option<&StateDistribution>) -> Result<GseResult> {
        let total = checked_pow(self.q, self.k).filter(|&t| t <= EXACT_LIMIT);
        ensure!(
            total.is_some(),
            Capacity,
            "exact GSE enumerates q^k = {}^{} partitions; limit is {EXACT_LIMIT}",
            self.q,
            self.k
        );
        let bounds = self.check_micro(micro)?;
        let mut by_max = vec![Vec::new(); self.k];
        for n in 0..self.kr() {
            let m = *self.tuple(n).iter().max().unwrap() as usize;
            by_max[m].push(n as u32);
        }
        let kr = self.kr();
        let mut suffix = vec![0.0; self.k + 1];
        for v in (0..self.k).rev() {
            let best: f64 = by_max[v]
                .iter()
                .map(|&n| {
                    (0..self.q.pow(self.r as u32))
                        .map(|z| self.tensor[z * kr + n as usize])
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            suffix[v] = suffix[v + 1] + best;
        }
        // A quick local search supplies the pruning floor; ties and the
        // returned argmax are those of the plain enumeration.
        let floor = if self.k > 8 || micro.is_some() {
            self.local(4, 0, micro).map_or(f64::NEG_INFINITY, |r| r.value)
        } else {
            f64::NEG_INFINITY
        };
        let mut depth = 0;
        while depth < self.k && self.q.pow(depth as u32) < 256 {
            depth += 1;
        }
        let prefixes = self.q.pow(depth as u32);
        let results = par::map_range(prefixes, |prefix| {
            let mut s = Search {
                p: self,
                by_max: &by_max,
                bounds: bounds.as_ref(),
                suffix: &suffix,
                floor,
                assignment: vec![0; self.k],
                counts: vec![0; self.q],
                best: f64::NEG_INFINITY,
                best_assignment: None,
            };
            decode(prefix, self.q, depth, &mut s.assignment[..depth]);
            let mut acc = 0.0;
            for v in 0..depth {
                s.counts[s.assignment[v]] += 1;
                if !s.admissible(v) {
                    return None;
                }
                acc += s.gain(v);
            }
            s.descend(depth, acc);
            s.best_assignment.map(|a| (s.best, a))
        });
        let mut best: Option<(f64, Vec<usize>)> = None;
        for (v, a) in results.into_iter().flatten() {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, a));
            }
        }
        let (_, assignment) = best.ok_or_else(|| Error::Infeasible("no admissible partition".into()))?;
        Ok(GseResult {
            value: self.integer_energy(&assignment),
            argmax: Argmax::Integer(IntegerPartition::new(self.q, assignment)?),
            solver: Solver::Exact,
            restarts: 1,
            certificate: GseCertificate::Exact,
        })
    }

    fn climb(&self, assignment: &mut [usize], bounds: Option<&(Vec<usize>, Vec<usize>)>) {
        let mut counts = vec![0; self.q];
        assignment.iter().for_each(|&m| counts[m] += 1);
        let fits = |counts: &[usize]| {
            bounds.is_none_or(|(lo, hi)| counts.iter().zip(lo.iter().zip(hi)).all(|(c, (l, h))| l <= c && c <= h))
        };
        for _ in 0..10_000 {
            let mut improved = false;
            for v in 0..self.k {
                let cur_state = assignment[v];
                let cur = self.vertex_contribution(v, assignment);
                let (mut best_m, mut best_gain) = (cur_state, SWEEP_TOL);
                for m in (0..self.q).filter(|&m| m != cur_state) {
                    counts[cur_state] -= 1;
                    counts[m] += 1;
                    let ok = fits(&counts);
                    counts[m] -= 1;
                    counts[cur_state] += 1;
                    if !ok {
                        continue;
                    }
                    assignment[v] = m;
                    let gain = self.vertex_contribution(v, assignment) - cur;
                    assignment[v] = cur_state;
                    if gain > best_gain {
                        best_gain = gain;
                        best_m = m;
                    }
                }
                if best_m != cur_state {
                    assignment[v] = best_m;
                    counts[cur_state] -= 1;
                    counts[best_m] += 1;
                    improved = true;
                }
            }
            if !improved && bounds.is_some() {
                improved = self.try_swap(assignment);
            }
            if !improved {
                return;
            }
        }
    }

    /// First improving exchange of the states of two vertices.
    fn try_swap(&self, assignment: &mut [usize]) -> bool {
        for u in 0..self.k {
            for v in u + 1..self.k {
                let (a, b) = (assignment[u], assignment[v]);
                if a == b {
                    continue;
                }
                let before = self.vertex_contribution(u, assignment);
                assignment[u] = b;
                let d1 = self.vertex_contribution(u, assignment) - before;
                let before_v = self.vertex_contribution(v, assignment);
                assignment[v] = a;
                let d2 = self.vertex_contribution(v, assignment) - before_v;
                if d1 + d2 > SWEEP_TOL {
                    return true;
                }
                assignment[u] = a;
                assignment[v] = b;
            }
        }
        false
    }

    /// Multi-restart best-move hill climbing. With `micro`, moves stay in the
    /// relaxed microcanonical set and pairwise swaps are also tried.
    pub fn local(&self, restarts: usize, seed: u64, micro: Option<&StateDistribution>) -> Result<GseResult> {
        let bounds = self.check_micro(micro)?;
        let targets = micro.map(|a| micro_targets(self.k, a));
        let restarts = restarts.max(1);
        let runs = par::map_range(restarts, |i| {
            let mut rng = stream_rng(derive_seed(seed, "gse-local", i as u64));
            let mut assignment: Vec<usize> = match &targets {
                Some(t) => {
                    let mut a: Vec<usize> =
                        t.iter().enumerate().flat_map(|(m, &c)| std::iter::repeat_n(m, c)).collect();
                    a.shuffle(&mut rng);
                    a
                }
                None => (0..self.k).map(|_| rng.random_range(0..self.q)).collect(),
            };
            self.climb(&mut assignment, bounds.as_ref());
            (self.integer_energy(&assignment), assignment)
        });
        let (value, assignment) = best_in_order(runs);
        Ok(GseResult {
            value,
            argmax: Argmax::Integer(IntegerPartition::new(self.q, assignment)?),
            solver: Solver::Local,
            restarts,
            certificate: GseCertificate::Heuristic,
        })
    }

    /// Row-wise coordinate ascent from `x`: each row is replaced by its best
    /// pure state whenever that does not lower the energy. Returns the final
    /// partition and the number of sweeps.
    pub fn ascend(&self, x: &FractionalPartition) -> Result<(FractionalPartition, usize)> {
        self.check_partition(x.k(), x.q())?;
        let mut x = x.clone();
        let mut pure = vec![0.0; self.q];
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut gained = 0.0;
            for v in 0..self.k {
                let row = x.row(v).to_vec();
                let cur = self.row_contribution(&x, v, &row);
                let (mut best_m, mut best_val) = (0, f64::NEG_INFINITY);
                for m in 0..self.q {
                    pure.iter_mut().enumerate().for_each(|(i, p)| *p = if i == m { 1.0 } else { 0.0 });
                    let val = self.row_contribution(&x, v, &pure);
                    if val > best_val {
                        best_val = val;
                        best_m = m;
                    }
                }
                let is_pure = row.iter().any(|&w| w >= 1.0 - ENTRY_TOL);
                let accept = if is_pure {
                    row[best_m] < 1.0 - ENTRY_TOL && best_val > cur + SWEEP_TOL
                } else {
                    best_val >= cur - SWEEP_TOL
                };
                if accept {
                    x.row_mut(v).iter_mut().enumerate().for_each(|(i, w)| *w = if i == best_m { 1.0 } else { 0.0 });
                    gained += best_val - cur;
                }
            }
            if gained < SWEEP_TOL {
                break;
            }
        }
        Ok((x, sweeps))
    }

    /// Multi-start fractional ascent; start 0 is the uniform partition.
    pub fn fractional_ascent(&self, restarts: usize, seed: u64) -> Result<GseResult> {
        let restarts = restarts.max(1);
        let runs = par::map_range(restarts, |i| -> Result<(f64, FractionalPartition)> {
            let start = if i == 0 {
                FractionalPartition::uniform(self.k, self.q)
            } else {
                random_partition(self.k, self.q, derive_seed(seed, "gse-ascent", i as u64))
            };
            let (x, _) = self.ascend(&start)?;
            Ok((self.energy(&x)?, x))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (value, x) = best_in_order(runs);
        Ok(GseResult {
            value,
            argmax: Argmax::Fractional(x),
            solver: Solver::Ascent,
            restarts,
            certificate: GseCertificate::Heuristic,
        })
    }

    /// Rounds each fractional row to its best pure state for the
    /// zero-diagonal part of the instance, in vertex order. Rows that are
    /// already pure are kept.
    pub fn round_to_integer(&self, x: &FractionalPartition) -> Result<IntegerPartition> {
        self.check_partition(x.k(), x.q())?;
        let zd = self.zero_diagonal();
        let mut x = x.clone();
        let mut pure = vec![0.0; self.q];
        for v in 0..self.k {
            if x.row(v).iter().any(|&w| w >= 1.0 - ENTRY_TOL) {
                continue;
            }
            let (mut best_m, mut best_val) = (0, f64::NEG_INFINITY);
            for m in 0..self.q {
                pure.iter_mut().enumerate().for_each(|(i, p)| *p = if i == m { 1.0 } else { 0.0 });
                let val = zd.row_contribution(&x, v, &pure);
                if val > best_val {
                    best_val = val;
                    best_m = m;
                }
            }
            x.row_mut(v).iter_mut().enumerate().for_each(|(i, w)| *w = if i == best_m { 1.0 } else { 0.0 });
        }
        Ok(argmax_rows(&x))
    }

    /// Rounds a fractional partition with class masses `a` into the relaxed
    /// microcanonical set.
    pub fn round_microcanonical(&self, x: &FractionalPartition, a: &StateDistribution) -> Result<IntegerPartition> {
        self.round_microcanonical_traced(x, a).map(|(p, _)| p)
    }

    /// As [`GseProblem::round_microcanonical`], also returning the number of
    /// fractional entries before and after each elimination step.
    pub fn round_microcanonical_traced(
        &self,
        x: &FractionalPartition,
        a: &StateDistribution,
    ) -> Result<(IntegerPartition, Vec<usize>)> {
        self.check_partition(x.k(), x.q())?;
        ensure!(a.q() == self.q, Dimension, "mass vector has {} states, partition has {}", a.q(), self.q);
        let means = x.column_means();
        ensure!(
            means.iter().zip(a.masses()).all(|(m, ai)| (m - ai).abs() <= MASS_TOL),
            Argument,
            "column means {:?} differ from class masses {:?}",
            means,
            a.masses()
        );
        let q = self.q;
        let mut x = x.clone();
        snap(&mut x);
        let mut trace = vec![x.fractional_entries()];
        loop {
            let bad = bad_rows(&x);
            if bad.len() < q + 1 {
                break;
            }
            let rows = &bad[..q + 1];
            let vars: Vec<(usize, usize)> = rows
                .iter()
                .flat_map(|&v| {
                    let row = x.row(v);
                    (0..q).filter(|&i| is_fractional(row[i])).map(move |i| (v, i)).collect::<Vec<_>>()
                })
                .collect();
            let beta = null_direction(rows, q, &vars)
                .ok_or_else(|| Error::Infeasible("elimination step found no null-space direction".into()))?;
            let grads: Vec<Vec<f64>> = rows.iter().map(|&v| self.row_gradient(&x, v)).collect();
            let c1: f64 = vars
                .iter()
                .zip(&beta)
                .map(|(&(v, i), b)| grads[rows.iter().position(|&u| u == v).unwrap()][i] * b)
                .sum();
            // Step limits along +beta (t2) and -beta (t1), with the entry that binds.
            let limit = |sign: f64| {
                let mut best = (f64::INFINITY, 0usize, 0.0);
                for (e, (&(v, i), &b)) in vars.iter().zip(&beta).enumerate() {
                    let d = sign * b;
                    if d.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let w = x.get(v, i);
                    let (t, bound) = if d > 0.0 { ((1.0 - w) / d, 1.0) } else { (w / -d, 0.0) };
                    if t < best.0 {
                        best = (t, e, bound);
                    }
                }
                best
            };
            let (t, e, bound, sign) = if c1 >= 0.0 {
                let (t, e, b) = limit(1.0);
                (t, e, b, 1.0)
            } else {
                let (t, e, b) = limit(-1.0);
                (t, e, b, -1.0)
            };
            for (&(v, i), &b) in vars.iter().zip(&beta) {
                x.row_mut(v)[i] += sign * t * b;
            }
            let (v, i) = vars[e];
            x.row_mut(v)[i] = bound;
            snap(&mut x);
            let count = x.fractional_entries();
            if count >= *trace.last().unwrap() {
                return Err(Error::Infeasible("elimination step did not reduce fractional entries".into()));
            }
            trace.push(count);
        }
        let result = self.final_rounding(&x, a)?;
        Ok((result, trace))
    }

    /// Assigns the remaining (at most `q`) fractional rows so that each class
    /// receives `floor` or `ceil` of its residual mass, maximizing energy.
    fn final_rounding(&self, x: &FractionalPartition, a: &StateDistribution) -> Result<IntegerPartition> {
        let q = self.q;
        let bad = bad_rows(x);
        let mut assignment: Vec<usize> =
            (0..self.k).map(|v| x.row(v).iter().position(|&w| w >= 1.0 - ENTRY_TOL).unwrap_or(0)).collect();
        if bad.is_empty() {
            return IntegerPartition::new(q, assignment);
        }
        let mut fixed = vec![0usize; q];
        for v in (0..self.k).filter(|v| !bad.contains(v)) {
            fixed[assignment[v]] += 1;
        }
        let residual: Vec<f64> = (0..q).map(|i| self.k as f64 * a.masses()[i] - fixed[i] as f64).collect();
        let window: Vec<(usize, usize)> = residual
            .iter()
            .map(|&r| {
                let near = r.round();
                if (r - near).abs() <= MASS_TOL {
                    (near.max(0.0) as usize, near.max(0.0) as usize)
                } else {
                    (r.floor().max(0.0) as usize, r.ceil().max(0.0) as usize)
                }
            })
            .collect();
        let total = checked_pow(q, bad.len()).unwrap();
        let mut choice = vec![0; bad.len()];
        let mut best: Option<(f64, Vec<usize>)> = None;
        for code in 0..total {
            decode(code, q, bad.len(), &mut choice);
            let mut counts = vec![0usize; q];
            choice.iter().for_each(|&m| counts[m] += 1);
            if !counts.iter().zip(&window).all(|(c, (lo, hi))| lo <= c && c <= hi) {
                continue;
            }
            for (&v, &m) in bad.iter().zip(&choice) {
                assignment[v] = m;
            }
            let e = self.integer_energy(&assignment);
            if best.as_ref().is_none_or(|(b, _)| e > *b) {
                best = Some((e, choice.clone()));
            }
        }
        let (_, choice) =
            best.ok_or_else(|| Error::Infeasible("no rounding of the remaining rows fits the class masses".into()))?;
        for (&v, &m) in bad.iter().zip(&choice) {
            assignment[v] = m;
        }
        IntegerPartition::new(q, assignment)
    }

    /// Continuum ground-state energy reference for step-kernel problems built
    /// with [`GseProblem::from_kernel`]: coordinate ascent of each step's
    /// state split over successively refined simplex grids, from the pure
    /// starts, the uniform start and `starts` random ones.
    pub fn simplex_ascent(&self, starts: usize, seed: u64) -> Result<GseResult> {
        let q = self.q;
        let mut inits: Vec<FractionalPartition> = (0..q)
            .map(|m| {
                FractionalPartition::from_raw(
                    self.k,
                    q,
                    (0..self.k * q).map(|e| if e % q == m { 1.0 } else { 0.0 }).collect(),
                )
            })
            .collect();
        inits.push(FractionalPartition::uniform(self.k, q));
        inits.extend((0..starts).map(|i| random_partition(self.k, q, derive_seed(seed, "simplex-ascent", i as u64))));
        let total = inits.len();
        let runs = par::map(&inits, |x0| -> Result<(f64, FractionalPartition)> {
            let mut x = x0.clone();
            let mut prev_res: Option<usize> = None;
            for res in [4usize, 16, 64, 256, 1024, 4096] {
                let radius = prev_res.map(|p| (2 * res).div_ceil(p));
                for _ in 0..MAX_SWEEPS {
                    let mut gained = 0.0;
                    for v in 0..self.k {
                        let row = x.row(v).to_vec();
                        let cur = self.row_contribution(&x, v, &row);
                        let (mut best_row, mut best_val) = (row.clone(), cur);
                        for cand in grid_candidates(&row, res, radius) {
                            let val = self.row_contribution(&x, v, &cand);
                            if val > best_val + SWEEP_TOL {
                                best_val = val;
                                best_row = cand;
                            }
                        }
                        x.row_mut(v).copy_from_slice(&best_row);
                        gained += best_val - cur;
                    }
                    if gained < SWEEP_TOL {
                        break;
                    }
                }
                prev_res = Some(res);
            }
            Ok((self.energy(&x)?, x))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (value, x) = best_in_order(runs);
        Ok(GseResult {
            value,
            argmax: Argmax::Fractional(x),
            solver: Solver::Ascent,
            restarts: total,
            certificate: GseCertificate::Heuristic,
        })
    }
}

/// Points of the simplex grid with spacing `1/res`; within `radius` grid
/// steps (per coordinate) of `row` when a radius is given.
fn grid_candidates(row: &[f64], res: usize, radius: Option<usize>) -> Vec<Vec<f64>> {
    let q = row.len();
    let center: Vec<i64> = row.iter().map(|&w| (w * res as f64).round() as i64).collect();
    let ranges: Vec<(i64, i64)> = (0..q.saturating_sub(1))
        .map(|i| match radius {
            Some(d) => ((center[i] - d as i64).max(0), (center[i] + d as i64).min(res as i64)),
            None => (0, res as i64),
        })
        .collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; q];
    fn rec(i: usize, ranges: &[(i64, i64)], res: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<f64>>) {
        let q = cur.len();
        if i + 1 == q {
            let used: i64 = cur[..i].iter().sum();
            if used <= res {
                cur[i] = res - used;
                out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            }
            return;
        }
        for c in ranges[i].0..=ranges[i].1 {
            cur[i] = c;
            if cur[..=i].iter().sum::<i64>() > res {
                break;
            }
            rec(i + 1, ranges, res, cur, out);
        }
    }
    rec(0, &ranges, res as i64, &mut cur, &mut out);
    out
}

fn best_in_order<T>(runs: Vec<(f64, T)>) -> (f64, T) {
    let mut best: Option<(f64, T)> = None;
    for (v, t) in runs {
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, t));
        }
    }
    best.expect("at least one run")
}

fn random_partition(k: usize, q: usize, seed: u64) -> FractionalPartition {
    let mut rng = stream_rng(seed);
    let raw: Vec<f64> = (0..k * q).map(|_| rng.random::<f64>() + 1e-3).collect();
    FractionalPartition::normalized(k, q, raw).expect("positive rows")
}

fn argmax_rows(x: &FractionalPartition) -> IntegerPartition {
    let assignment = (0..x.k())
        .map(|v| {
            let row = x.row(v);
            (0..x.q()).fold(0, |b, i| if row[i] > row[b] { i } else { b })
        })
        .collect();
    IntegerPartition::new(x.q(), assignment).expect("valid states")
}

fn is_fractional(w: f64) -> bool {
    w > ENTRY_TOL && w < 1.0 - ENTRY_TOL
}

fn snap(x: &mut FractionalPartition) {
    for v in 0..x.k() {
        for w in x.row_mut(v) {
            if *w <= ENTRY_TOL {
                *w = 0.0;
            } else if *w >= 1.0 - ENTRY_TOL {
                *w = 1.0;
            }
        }
    }
}

fn bad_rows(x: &FractionalPartition) -> Vec<usize> {
    (0..x.k()).filter(|&v| x.row(v).iter().any(|&w| is_fractional(w))).collect()
}

/// A nonzero vector in the null space of the constraints fixing each row sum
/// of `rows` and each column sum over `rows`, on the variables `vars`.
/// Reduced row echelon form with partial pivoting; the first free variable
/// is set to 1.
fn null_direction(rows: &[usize], q: usize, vars: &[(usize, usize)]) -> Option<Vec<f64>> {
    let nv = vars.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|&v| vars.iter().map(|&(u, _)| if u == v { 1.0 } else { 0.0 }).collect())
        .chain((0..q).map(|i| vars.iter().map(|&(_, s)| if s == i { 1.0 } else { 0.0 }).collect()))
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..nv {
        if row == m.len() {
            break;
        }
        let p = (row..m.len()).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        if m[p][col].abs() <= PIVOT_TOL {
            continue;
        }
        m.swap(row, p);
        let piv = m[row][col];
        m[row].iter_mut().for_each(|v| *v /= piv);
        for other in 0..m.len() {
            if other != row && m[other][col] != 0.0 {
                let f = m[other][col];
                let src = m[row].clone();
                m[other].iter_mut().zip(&src).for_each(|(a, b)| *a -= f * b);
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..nv).find(|c| !pivots.contains(c))?;
    let mut beta = vec![0.0; nv];
    beta[free] = 1.0;
    for (r, &pc) in pivots.iter().enumerate() {
        beta[pc] = -m[r][free];
    }
    Some(beta)
}

/// Moves class mass from `a` to `b`: surplus classes are scaled down
/// proportionally and each row's freed mass goes to the deficit classes in
/// proportion to their deficits.
pub fn transport_partition(
    x: &FractionalPartition,
    a: &StateDistribution,
    b: &StateDistribution,
) -> Result<FractionalPartition> {
    ensure!(a.q() == x.q() && b.q() == x.q(), Dimension, "mass vectors must have {} states", x.q());
    let means = x.column_means();
    ensure!(
        means.iter().zip(a.masses()).all(|(m, ai)| (m - ai).abs() <= MASS_TOL),
        Argument,
        "column means {:?} differ from class masses {:?}",
        means,
        a.masses()
    );
    let (am, bm) = (a.masses(), b.masses());
    let deficit: Vec<f64> = am.iter().zip(bm).map(|(a, b)| (b - a).max(0.0)).collect();
    let total: f64 = deficit.iter().sum();
    let mut out = x.clone();
    if total <= 0.0 {
        return Ok(out);
    }
    for v in 0..x.k() {
        let row = out.row_mut(v);
        let mut freed = 0.0;
        for i in 0..row.len() {
            if am[i] > bm[i] {
                let keep = row[i] * bm[i] / am[i];
                freed += row[i] - keep;
                row[i] = keep;
            }
        }
        for i in 0..row.len() {
            row[i] += freed * deficit[i] / total;
        }
    }
    Ok(out)
}

pub fn gse_integer_exact(
    g: &LayeredRArray,
    j: &LayeredInteraction,
    micro: Option<&StateDistribution>,
) -> Result<GseResult> {
    GseProblem::new(g, j)?.exact(micro)
}

pub fn gse_integer_local(
    g: &LayeredRArray,
    j: &LayeredInteraction,
    restarts: usize,
    seed: u64,
    micro: Option<&StateDistribution>,
) -> Result<GseResult> {
    GseProblem::new(g, j)?.local(restarts, seed, micro)
}

pub fn gse_fractional_ascent(
    g: &LayeredRArray,
    j: &LayeredInteraction,
    restarts: usize,
    seed: u64,
) -> Result<GseResult> {
    GseProblem::new(g, j)?.fractional_ascent(restarts, seed)
}

pub fn round_to_integer(
    g: &LayeredRArray,
    j: &LayeredInteraction,
    x: &FractionalPartition,
) -> Result<IntegerPartition> {
    GseProblem::new(g, j)?.round_to_integer(x)
}

pub fn round_microcanonical(
    g: &LayeredRArray,
    j: &LayeredInteraction,
    x: &FractionalPartition,
    a: &StateDistribution,
) -> Result<IntegerPartition> {
    GseProblem::new(g, j)?.round_microcanonical(x, a)
}

/// Ground-state energy of a step kernel over fractional splits of its steps
/// (the continuum reference value).
pub fn kernel_gse(w: &StepKernel, j: &InteractionArray, starts: usize, seed: u64) -> Result<GseResult> {
    GseProblem::from_kernel(w, j)?.simplex_ascent(starts, seed)
}
