//! Constraint satisfaction formulas, their evaluation representation and
//! MAX-rCSP by exact search or by sampling induced subformulas.

use serde::{Deserialize, Serialize};

use crate::arrays::{cell_label, checked_pow, decode, InteractionArray, LayeredInteraction, LayeredRArray, RArray};
use crate::error::{ensure, Error, Result};
use crate::gse::EXACT_LIMIT;
use crate::par;
use crate::rng::derive_seed;
use crate::sampling::sample_vertices;
use crate::stats::Summary;

/// A constraint: a table over `[q]^r` (row-major) applied to an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub table: Vec<f64>,
    pub edge: Vec<usize>,
}

impl Constraint {
    /// The same constraint with its variables listed in the order
    /// `edge[perm[0]], ..., edge[perm[r-1]]`, the table permuted to match.
    pub fn permuted(&self, perm: &[usize], q: usize) -> Constraint {
        let r = self.edge.len();
        let edge = perm.iter().map(|&p| self.edge[p]).collect();
        let mut z = vec![0; r];
        let mut orig = vec![0; r];
        let table = (0..self.table.len())
            .map(|cell| {
                decode(cell, q, r, &mut z);
                for (j, &p) in perm.iter().enumerate() {
                    orig[p] = z[j];
                }
                self.table[crate::arrays::encode(&orig, q)]
            })
            .collect();
        Constraint { table, edge }
    }
}

/// A multiset of constraints on `n` variables with `q` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formula {
    n: usize,
    r: usize,
    q: usize,
    d: f64,
    constraints: Vec<Constraint>,
}

impl Formula {
    pub fn new(n: usize, r: usize, q: usize, d: f64, constraints: Vec<Constraint>) -> Result<Self> {
        let f = Formula { n, r, q, d, constraints };
        f.validate()?;
        Ok(f)
    }

    pub fn empty(n: usize, r: usize, q: usize, d: f64) -> Self {
        Formula { n, r, q, d, constraints: Vec::new() }
    }

    /// Checks shapes and the evaluation bound.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.r >= 1 && self.q >= 1, Argument, "r and q must be positive");
        ensure!(self.d >= 0.0 && self.d.is_finite(), Argument, "bound d must be finite and nonnegative");
        let cells = checked_pow(self.q, self.r).ok_or_else(|| Error::Capacity("q^r overflow".into()))?;
        for (i, c) in self.constraints.iter().enumerate() {
            ensure!(
                c.table.len() == cells,
                Dimension,
                "constraint {i} table has {} entries, expected {cells}",
                c.table.len()
            );
            ensure!(
                c.edge.len() == self.r,
                Dimension,
                "constraint {i} has {} variables, expected {}",
                c.edge.len(),
                self.r
            );
            ensure!(
                c.edge.iter().all(|&v| v < self.n),
                Dimension,
                "constraint {i} uses a variable outside 0..{}",
                self.n
            );
            ensure!(
                c.table.iter().all(|v| v.is_finite() && v.abs() <= self.d),
                Domain,
                "constraint {i} table leaves [-d, d] with d = {}",
                self.d
            );
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn push(&mut self, c: Constraint) -> Result<()> {
        self.constraints.push(c);
        if let Err(e) = self.validate() {
            self.constraints.pop();
            return Err(e);
        }
        Ok(())
    }

    /// Total value of the satisfied constraints under `sigma`.
    pub fn count(&self, sigma: &[usize]) -> f64 {
        self.constraints.iter().map(|c| c.table[c.edge.iter().fold(0, |acc, &v| acc * self.q + sigma[v])]).sum()
    }
}

/// Layer `z` at edge `e` holds the summed value at `z` of the constraints on `e`.
pub fn eval_rep(f: &Formula) -> Result<LayeredRArray> {
    f.validate()?;
    let cells = f.q.pow(f.r as u32);
    let kr = checked_pow(f.n, f.r).ok_or_else(|| Error::Capacity("n^r overflow".into()))?;
    let mut layers = vec![vec![0.0; kr]; cells];
    for c in &f.constraints {
        let e = crate::arrays::encode(&c.edge, f.n);
        for (layer, v) in layers.iter_mut().zip(&c.table) {
            layer[e] += v;
        }
    }
    for layer in &layers {
        ensure!(layer.iter().all(|v| v.abs() <= f.d), Domain, "evaluation exceeds the bound d = {}", f.d);
    }
    let mut z = vec![0; f.r];
    let labels = (0..cells)
        .map(|cell| {
            decode(cell, f.q, f.r, &mut z);
            cell_label(&z)
        })
        .collect();
    let layers = layers.into_iter().map(|v| RArray::new(f.r, f.n, v)).collect::<Result<Vec<_>>>()?;
    LayeredRArray::new(labels, layers)
}

/// Evaluation representation with the matching indicator interactions, so
/// that the layered energy of an integer partition is its MAX-rCSP density.
pub fn csp_gse_instance(f: &Formula) -> Result<(LayeredRArray, LayeredInteraction)> {
    let w = eval_rep(f)?;
    let cells = f.q.pow(f.r as u32);
    let j = (0..cells).map(|cell| InteractionArray::indicator(f.q, f.r, cell)).collect();
    let j = LayeredInteraction::new(w.labels().to_vec(), j)?;
    Ok((w, j))
}

/// Optimal satisfied value over all assignments, divided by `n^r`.
pub fn max_csp_exact(f: &Formula) -> Result<f64> {
    f.validate()?;
    let total = checked_pow(f.q, f.n).filter(|&t| t <= EXACT_LIMIT);
    ensure!(
        total.is_some(),
        Capacity,
        "exact MAX-CSP enumerates q^n = {}^{} assignments; limit is {EXACT_LIMIT}",
        f.q,
        f.n
    );
    let total = total.unwrap();
    let chunk = 4096;
    let best = par::map_range(total.div_ceil(chunk), |c| {
        let mut sigma = vec![0; f.n];
        let mut best = f64::NEG_INFINITY;
        for code in c * chunk..((c + 1) * chunk).min(total) {
            decode(code, f.q, f.n, &mut sigma);
            best = best.max(f.count(&sigma));
        }
        best
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    Ok(best / (f.n as f64).powi(f.r as i32))
}

/// Induced subformula on a uniform `k`-subset of the variables, relabeled
/// to `0..k` in increasing order.
pub fn sample_formula(f: &Formula, k: usize, seed: u64) -> Result<Formula> {
    ensure!(k <= f.n, Argument, "sample size {k} exceeds {} variables", f.n);
    let mut s = sample_vertices(f.n, k, seed)?;
    s.sort_unstable();
    let mut map = vec![usize::MAX; f.n];
    for (i, &v) in s.iter().enumerate() {
        map[v] = i;
    }
    let constraints = f
        .constraints
        .iter()
        .filter(|c| c.edge.iter().all(|&v| map[v] != usize::MAX))
        .map(|c| Constraint { table: c.table.clone(), edge: c.edge.iter().map(|&v| map[v]).collect() })
        .collect();
    Ok(Formula { n: k, r: f.r, q: f.q, d: f.d, constraints })
}

/// Largest number of maps enumerated by [`tilde_density`].
pub const DENSITY_LIMIT: usize = 10_000_000;

/// Density of the monomial template of `h` in `g`: the average over all maps
/// `phi: V(h) -> V(g)` of `prod_e prod_z eval(g)^z(phi(e))^{eval(h)^z(e)}`.
/// Exponents are the entries of `eval(h)`, which must be nonnegative integers.
pub fn tilde_density(h: &Formula, g: &Formula) -> Result<f64> {
    ensure!(
        h.q == g.q && h.r == g.r,
        Dimension,
        "formulas use different state sets or arities: (q={}, r={}) vs (q={}, r={})",
        h.q,
        h.r,
        g.q,
        g.r
    );
    let eh = eval_rep(h)?;
    let eg = eval_rep(g)?;
    let r = h.r;
    let cells = h.q.pow(r as u32);
    // Edges of h with a nonzero exponent vector.
    type Term = (Vec<usize>, Vec<(usize, i32)>);
    let mut terms: Vec<Term> = Vec::new();
    let mut e = vec![0; r];
    for flat in 0..checked_pow(h.n, r).unwrap() {
        let exps: Vec<(usize, i32)> = (0..cells)
            .filter_map(|z| {
                let x = eh.layers()[z].values()[flat];
                (x != 0.0).then_some((z, x))
            })
            .map(|(z, x)| {
                ensure!(
                    x > 0.0 && x.fract() == 0.0,
                    Domain,
                    "template exponents must be nonnegative integers, got {x}"
                );
                Ok((z, x as i32))
            })
            .collect::<Result<_>>()?;
        if !exps.is_empty() {
            decode(flat, h.n, r, &mut e);
            terms.push((e.clone(), exps));
        }
    }
    let maps = checked_pow(g.n, h.n).filter(|&m| m <= DENSITY_LIMIT);
    ensure!(
        maps.is_some(),
        Capacity,
        "density enumerates |V(G)|^|V(H)| = {}^{} maps; limit is {DENSITY_LIMIT}",
        g.n,
        h.n
    );
    let maps = maps.unwrap();
    let chunk = 4096;
    let total: f64 = par::map_range(maps.div_ceil(chunk), |c| {
        let mut phi = vec![0; h.n];
        let mut image = vec![0; r];
        let mut acc = 0.0;
        for code in c * chunk..((c + 1) * chunk).min(maps) {
            decode(code, g.n, h.n, &mut phi);
            let mut prod = 1.0;
            for (edge, exps) in &terms {
                for (slot, &v) in image.iter_mut().zip(edge) {
                    *slot = phi[v];
                }
                let at = crate::arrays::encode(&image, g.n);
                for &(z, p) in exps {
                    prod *= eg.layers()[z].values()[at].powi(p);
                }
                if prod == 0.0 {
                    break;
                }
            }
            acc += prod;
        }
        acc
    })
    .into_iter()
    .sum();
    Ok(total / maps as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspEstimate {
    pub k: usize,
    pub estimates: Vec<f64>,
    pub summary: Summary,
}

/// Exact MAX-rCSP density of `trials` independent induced subformulas.
pub fn estimate_max_csp(f: &Formula, k: usize, trials: usize, seed: u64) -> Result<CspEstimate> {
    ensure!(k <= f.n, Argument, "sample size {k} exceeds {} variables", f.n);
    let estimates =
        par::map_range(trials, |t| max_csp_exact(&sample_formula(f, k, derive_seed(seed, "max-csp", t as u64))?))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
    Ok(CspEstimate { k, summary: Summary::of(&estimates), estimates })
}
