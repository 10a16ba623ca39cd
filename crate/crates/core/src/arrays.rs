//! Dense r-arrays, interaction arrays, partitions and the energy of a
//! partition.
//!
//! Storage is row-major: the flat index of `(n_1, ..., n_r)` is
//! `((n_1 * k + n_2) * k + ...) * k + n_r`. Interaction cells over `[q]^r`
//! use the same layout with base `q`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Tolerance on row sums of stochastic matrices and on probability vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

#[inline]
pub(crate) fn decode(mut flat: usize, base: usize, r: usize, out: &mut [usize]) {
    for j in (0..r).rev() {
        out[j] = flat % base;
        flat /= base;
    }
}

#[inline]
pub(crate) fn encode(idx: &[usize], base: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * base + i)
}

/// A real `k^r` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RArray {
    r: usize,
    k: usize,
    values: Vec<f64>,
}

impl RArray {
    pub fn new(r: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(r >= 1, Argument, "arity r must be at least 1");
        let len = checked_pow(k, r).ok_or_else(|| Error::Capacity(format!("{k}^{r} entries do not fit in memory")))?;
        ensure!(values.len() == len, Dimension, "r-array with k={k}, r={r} needs {len} values, got {}", values.len());
        ensure!(values.iter().all(|v| v.is_finite()), Domain, "r-array entries must be finite");
        Ok(RArray { r, k, values })
    }

    pub fn zeros(r: usize, k: usize) -> Self {
        let len = checked_pow(k, r).expect("array size overflow");
        RArray { r, k, values: vec![0.0; len] }
    }

    pub fn constant(r: usize, k: usize, c: f64) -> Self {
        let mut a = Self::zeros(r, k);
        a.values.iter_mut().for_each(|v| *v = c);
        a
    }

    pub fn from_fn(r: usize, k: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut a = Self::zeros(r, k);
        let mut idx = vec![0; r];
        for flat in 0..a.values.len() {
            decode(flat, k, r, &mut idx);
            a.values[flat] = f(&idx);
        }
        a
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[encode(idx, self.k)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let flat = encode(idx, self.k);
        self.values[flat] = v;
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.r];
        decode(flat, self.k, self.r, &mut idx);
        idx
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(k^{-r} * sum A^2)^{1/2}`, the L2 norm of the step-function embedding.
    pub fn l2_norm(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn same_shape(&self, other: &RArray) -> bool {
        self.r == other.r && self.k == other.k
    }

    pub fn sub(&self, other: &RArray) -> Result<RArray> {
        ensure!(
            self.same_shape(other),
            Dimension,
            "shapes (r={}, k={}) and (r={}, k={}) differ",
            self.r,
            self.k,
            other.r,
            other.k
        );
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(RArray { r: self.r, k: self.k, values })
    }

    pub fn scaled(&self, c: f64) -> RArray {
        RArray { r: self.r, k: self.k, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// The array seen through a vertex relabeling: `out[n] = self[perm(n)]`.
    pub fn relabeled(&self, perm: &[usize]) -> RArray {
        assert_eq!(perm.len(), self.k);
        let mut mapped = vec![0; self.r];
        RArray::from_fn(self.r, self.k, |idx| {
            for (m, &i) in mapped.iter_mut().zip(idx) {
                *m = perm[i];
            }
            self.get(&mapped)
        })
    }

    pub(crate) fn has_repeat(idx: &[usize]) -> bool {
        (0..idx.len()).any(|a| (a + 1..idx.len()).any(|b| idx[a] == idx[b]))
    }
}

/// Zeroes every entry whose index tuple repeats a vertex.
pub fn zero_diagonal(g: &RArray) -> RArray {
    let mut out = g.clone();
    let mut idx = vec![0; g.r];
    for flat in 0..out.values.len() {
        decode(flat, g.k, g.r, &mut idx);
        if RArray::has_repeat(&idx) {
            out.values[flat] = 0.0;
        }
    }
    out
}

/// Arrays sharing `(r, k)`, indexed by an ordered layer set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredRArray {
    labels: Vec<String>,
    layers: Vec<RArray>,
}

impl LayeredRArray {
    pub fn new(labels: Vec<String>, layers: Vec<RArray>) -> Result<Self> {
        ensure!(!layers.is_empty(), Argument, "layer set must be nonempty");
        ensure!(labels.len() == layers.len(), Dimension, "{} labels for {} layers", labels.len(), layers.len());
        let first = &layers[0];
        ensure!(layers.iter().all(|l| l.same_shape(first)), Dimension, "all layers must share r and k");
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        ensure!(sorted.len() == labels.len(), Argument, "layer labels must be distinct");
        Ok(LayeredRArray { labels, layers })
    }

    pub fn single(layer: RArray) -> Self {
        LayeredRArray { labels: vec!["0".to_string()], layers: vec![layer] }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layers(&self) -> &[RArray] {
        &self.layers
    }

    pub fn r(&self) -> usize {
        self.layers[0].r
    }

    pub fn k(&self) -> usize {
        self.layers[0].k
    }

    pub fn inf_norm(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| m.max(l.inf_norm()))
    }

    pub fn relabeled(&self, perm: &[usize]) -> LayeredRArray {
        LayeredRArray { labels: self.labels.clone(), layers: self.layers.iter().map(|l| l.relabeled(perm)).collect() }
    }
}

/// Coefficients of an interaction array: real numbers, or one lookup table
/// per cell over a finite color set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    Real(Vec<f64>),
    /// `values[cell * colors.len() + c]` is the value of cell `cell` at color `colors[c]`.
    Table {
        colors: Vec<f64>,
        values: Vec<f64>,
    },
}

/// A `q^r` interaction array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionArray {
    q: usize,
    r: usize,
    coeffs: Coefficients,
}

impl InteractionArray {
    pub fn real(q: usize, r: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(q >= 1 && r >= 1, Argument, "q and r must be positive");
        let cells = checked_pow(q, r).ok_or_else(|| Error::Capacity("q^r overflow".into()))?;
        ensure!(
            values.len() == cells,
            Dimension,
            "interaction array with q={q}, r={r} needs {cells} cells, got {}",
            values.len()
        );
        ensure!(values.iter().all(|v| v.is_finite()), Domain, "interaction entries must be finite");
        Ok(InteractionArray { q, r, coeffs: Coefficients::Real(values) })
    }

    pub fn color_table(q: usize, r: usize, colors: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        ensure!(q >= 1 && r >= 1, Argument, "q and r must be positive");
        ensure!(!colors.is_empty(), Argument, "color set must be nonempty");
        let cells = checked_pow(q, r).ok_or_else(|| Error::Capacity("q^r overflow".into()))?;
        ensure!(
            values.len() == cells * colors.len(),
            Dimension,
            "color table needs {} values ({} cells x {} colors), got {}",
            cells * colors.len(),
            cells,
            colors.len(),
            values.len()
        );
        let mut sorted = colors.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        ensure!(sorted.len() == colors.len(), Argument, "colors must be distinct");
        ensure!(values.iter().all(|v| v.is_finite()), Domain, "table entries must be finite");
        Ok(InteractionArray { q, r, coeffs: Coefficients::Table { colors, values } })
    }

    pub fn from_fn(q: usize, r: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let cells = checked_pow(q, r).expect("q^r overflow");
        let mut idx = vec![0; r];
        let values = (0..cells)
            .map(|c| {
                decode(c, q, r, &mut idx);
                f(&idx)
            })
            .collect();
        InteractionArray { q, r, coeffs: Coefficients::Real(values) }
    }

    pub fn zeros(q: usize, r: usize) -> Self {
        Self::from_fn(q, r, |_| 0.0)
    }

    /// Coefficient 1 at `cell`, 0 elsewhere.
    pub fn indicator(q: usize, r: usize, cell: usize) -> Self {
        let mut idx = 0;
        Self::from_fn(q, r, |_| {
            let v = if idx == cell { 1.0 } else { 0.0 };
            idx += 1;
            v
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn cells(&self) -> usize {
        checked_pow(self.q, self.r).unwrap()
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        matches!(self.coeffs, Coefficients::Real(_))
    }

    pub fn real_values(&self) -> Option<&[f64]> {
        match &self.coeffs {
            Coefficients::Real(v) => Some(v),
            Coefficients::Table { .. } => None,
        }
    }

    /// `J_z(g)`: the real coefficient times `g`, or a table lookup.
    pub fn apply(&self, cell: usize, g: f64) -> Result<f64> {
        match &self.coeffs {
            Coefficients::Real(v) => Ok(v[cell] * g),
            Coefficients::Table { colors, values } => {
                let c = colors
                    .iter()
                    .position(|&c| c == g)
                    .ok_or_else(|| Error::Domain(format!("color {g} has no table entry")))?;
                Ok(values[cell * colors.len() + c])
            }
        }
    }

    pub fn inf_norm(&self) -> f64 {
        let v = match &self.coeffs {
            Coefficients::Real(v) => v,
            Coefficients::Table { values, .. } => values,
        };
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Same interaction with states renamed: `out[z] = self[perm(z)]`.
    pub fn relabeled_states(&self, perm: &[usize]) -> InteractionArray {
        let v = self.real_values().expect("relabeling implemented for real arrays");
        let mut mapped = vec![0; self.r];
        InteractionArray::from_fn(self.q, self.r, |z| {
            for (m, &s) in mapped.iter_mut().zip(z) {
                *m = perm[s];
            }
            v[encode(&mapped, self.q)]
        })
    }
}

/// Interaction arrays indexed by the same layer set as a [`LayeredRArray`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredInteraction {
    labels: Vec<String>,
    layers: Vec<InteractionArray>,
}

impl LayeredInteraction {
    pub fn new(labels: Vec<String>, layers: Vec<InteractionArray>) -> Result<Self> {
        ensure!(!layers.is_empty(), Argument, "layer set must be nonempty");
        ensure!(labels.len() == layers.len(), Dimension, "{} labels for {} layers", labels.len(), layers.len());
        let (q, r) = (layers[0].q, layers[0].r);
        ensure!(layers.iter().all(|j| j.q == q && j.r == r), Dimension, "all interaction layers must share q and r");
        Ok(LayeredInteraction { labels, layers })
    }

    pub fn single(j: InteractionArray) -> Self {
        LayeredInteraction { labels: vec!["0".to_string()], layers: vec![j] }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layers(&self) -> &[InteractionArray] {
        &self.layers
    }

    pub fn q(&self) -> usize {
        self.layers[0].q
    }

    pub fn r(&self) -> usize {
        self.layers[0].r
    }

    pub fn inf_norm(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, j| m.max(j.inf_norm()))
    }
}

/// A `k x q` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalPartition {
    k: usize,
    q: usize,
    weights: Vec<f64>,
}

impl FractionalPartition {
    pub fn new(k: usize, q: usize, weights: Vec<f64>) -> Result<Self> {
        ensure!(q >= 1, Argument, "q must be positive");
        ensure!(weights.len() == k * q, Dimension, "expected {}x{} weights, got {}", k, q, weights.len());
        ensure!(
            weights.iter().all(|w| w.is_finite() && (0.0..=1.0).contains(w)),
            Domain,
            "fractional partition entries must lie in [0,1]"
        );
        for n in 0..k {
            let s: f64 = weights[n * q..(n + 1) * q].iter().sum();
            ensure!(
                (s - 1.0).abs() <= STOCHASTIC_TOL,
                Domain,
                "row {n} sums to {s}, not 1 (tolerance {STOCHASTIC_TOL})"
            );
        }
        Ok(FractionalPartition { k, q, weights })
    }

    /// Rescales each row to sum to one. Rows must be nonnegative with a positive sum.
    pub fn normalized(k: usize, q: usize, mut weights: Vec<f64>) -> Result<Self> {
        ensure!(weights.len() == k * q, Dimension, "expected {}x{} weights, got {}", k, q, weights.len());
        for row in weights.chunks_mut(q) {
            ensure!(row.iter().all(|w| w.is_finite() && *w >= 0.0), Domain, "weights must be nonnegative");
            let s: f64 = row.iter().sum();
            ensure!(s > 0.0, Domain, "row with zero mass cannot be normalized");
            row.iter_mut().for_each(|w| *w /= s);
        }
        Self::new(k, q, weights)
    }

    pub fn uniform(k: usize, q: usize) -> Self {
        FractionalPartition { k, q, weights: vec![1.0 / q as f64; k * q] }
    }

    pub(crate) fn from_raw(k: usize, q: usize, weights: Vec<f64>) -> Self {
        FractionalPartition { k, q, weights }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.weights[n * self.q..(n + 1) * self.q]
    }

    pub(crate) fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.weights[n * self.q..(n + 1) * self.q]
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.weights[n * self.q + m]
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        (0..self.k).map(|n| self.get(n, m)).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.q).map(|m| (0..self.k).map(|n| self.get(n, m)).sum::<f64>() / self.k as f64).collect()
    }

    pub fn is_integer(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    pub fn fractional_entries(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0 && w < 1.0).count()
    }

    /// The 0/1 partition, if every row is a unit vector.
    pub fn to_integer(&self) -> Option<IntegerPartition> {
        if !self.is_integer() {
            return None;
        }
        let assignment = (0..self.k).map(|n| self.row(n).iter().position(|&w| w == 1.0)).collect::<Option<Vec<_>>>()?;
        Some(IntegerPartition { q: self.q, assignment })
    }

    pub fn relabeled_states(&self, perm: &[usize]) -> FractionalPartition {
        let mut w = vec![0.0; self.weights.len()];
        for n in 0..self.k {
            for m in 0..self.q {
                w[n * self.q + m] = self.get(n, perm[m]);
            }
        }
        FractionalPartition { k: self.k, q: self.q, weights: w }
    }
}

/// A map `[k] -> [q]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntegerPartition {
    q: usize,
    assignment: Vec<usize>,
}

impl IntegerPartition {
    pub fn new(q: usize, assignment: Vec<usize>) -> Result<Self> {
        ensure!(q >= 1, Argument, "q must be positive");
        ensure!(assignment.iter().all(|&s| s < q), Domain, "state out of range 0..{q}");
        Ok(IntegerPartition { q, assignment })
    }

    pub fn k(&self) -> usize {
        self.assignment.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.q];
        for &s in &self.assignment {
            c[s] += 1;
        }
        c
    }

    pub fn to_fractional(&self) -> FractionalPartition {
        let k = self.assignment.len();
        let mut w = vec![0.0; k * self.q];
        for (n, &s) in self.assignment.iter().enumerate() {
            w[n * self.q + s] = 1.0;
        }
        FractionalPartition { k, q: self.q, weights: w }
    }
}

/// A probability vector over `q` states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    masses: Vec<f64>,
}

impl StateDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        ensure!(!masses.is_empty(), Argument, "distribution needs at least one state");
        ensure!(masses.iter().all(|a| a.is_finite() && *a >= 0.0), Domain, "masses must be nonnegative");
        let s: f64 = masses.iter().sum();
        ensure!((s - 1.0).abs() <= STOCHASTIC_TOL, Domain, "masses sum to {s}, not 1");
        Ok(StateDistribution { masses })
    }

    /// Divides by the total; used where masses come from counts.
    pub fn normalized(masses: Vec<f64>) -> Result<Self> {
        let s: f64 = masses.iter().sum();
        ensure!(s > 0.0 && s.is_finite(), Domain, "masses must have a positive finite total");
        Self::new(masses.into_iter().map(|a| a / s).collect())
    }

    pub fn q(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn l1_distance(&self, other: &StateDistribution) -> f64 {
        self.masses.iter().zip(&other.masses).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Sequential contraction of `values` (a `k^r` array) with one vector per axis,
/// last axis first.
pub(crate) fn contract(values: &[f64], k: usize, r: usize, cols: &[&[f64]]) -> f64 {
    debug_assert_eq!(cols.len(), r);
    let mut buf: Vec<f64> = values.to_vec();
    for axis in (0..r).rev() {
        let col = cols[axis];
        let next: Vec<f64> = buf.chunks(k).map(|chunk| chunk.iter().zip(col).map(|(a, b)| a * b).sum()).collect();
        buf = next;
    }
    buf[0]
}

fn check_shapes(g: &RArray, j: &InteractionArray, x: &FractionalPartition) -> Result<()> {
    ensure!(g.r == j.r, Dimension, "array arity {} differs from interaction arity {}", g.r, j.r);
    ensure!(g.k == x.k, Dimension, "array has {} vertices, partition has {}", g.k, x.k);
    ensure!(j.q == x.q, Dimension, "interaction has {} states, partition has {}", j.q, x.q);
    Ok(())
}

/// Energy of the partition `x`:
/// `k^{-r} sum_z sum_n J_z(G_n) prod_j x[n_j][z_j]`.
///
/// Summation is z-major; for each cell the array is contracted against the
/// state columns axis by axis (last axis first).
pub fn energy(g: &RArray, j: &InteractionArray, x: &FractionalPartition) -> Result<f64> {
    check_shapes(g, j, x)?;
    let (k, r, q) = (g.k, g.r, j.q);
    let columns: Vec<Vec<f64>> = (0..q).map(|m| x.column(m)).collect();
    let mut z = vec![0; r];
    let mut total = 0.0;
    match &j.coeffs {
        Coefficients::Real(coef) => {
            for (cell, &c) in coef.iter().enumerate() {
                decode(cell, q, r, &mut z);
                let cols: Vec<&[f64]> = z.iter().map(|&s| columns[s].as_slice()).collect();
                total += c * contract(&g.values, k, r, &cols);
            }
        }
        Coefficients::Table { .. } => {
            let mut mapped = vec![0.0; g.values.len()];
            for cell in 0..j.cells() {
                decode(cell, q, r, &mut z);
                for (m, &v) in mapped.iter_mut().zip(&g.values) {
                    *m = j.apply(cell, v)?;
                }
                let cols: Vec<&[f64]> = z.iter().map(|&s| columns[s].as_slice()).collect();
                total += contract(&mapped, k, r, &cols);
            }
        }
    }
    Ok(total / (k as f64).powi(r as i32))
}

fn check_layers(w: &LayeredRArray, j: &LayeredInteraction) -> Result<()> {
    ensure!(w.labels == j.labels, Dimension, "layer sets differ: {:?} vs {:?}", w.labels, j.labels);
    Ok(())
}

/// Sum of per-layer energies.
pub fn layered_energy(w: &LayeredRArray, j: &LayeredInteraction, x: &FractionalPartition) -> Result<f64> {
    check_layers(w, j)?;
    w.layers.iter().zip(&j.layers).map(|(g, jj)| energy(g, jj, x)).sum()
}

/// Canonical form: layer `z` of the output holds `sum_e J^e_z(W^e_n)`, and the
/// returned interaction has coefficient 1 at cell `z` of layer `z`.
pub fn canonical_form(w: &LayeredRArray, j: &LayeredInteraction) -> Result<(LayeredRArray, LayeredInteraction)> {
    check_layers(w, j)?;
    ensure!(w.r() == j.r(), Dimension, "array arity {} differs from interaction arity {}", w.r(), j.r());
    let (q, r, k) = (j.q(), j.r(), w.k());
    let cells = checked_pow(q, r).unwrap();
    let mut labels = Vec::with_capacity(cells);
    let mut layers = Vec::with_capacity(cells);
    let mut inter = Vec::with_capacity(cells);
    let mut z = vec![0; r];
    for cell in 0..cells {
        decode(cell, q, r, &mut z);
        let mut values = vec![0.0; w.layers[0].values.len()];
        for (g, jj) in w.layers.iter().zip(&j.layers) {
            for (out, &v) in values.iter_mut().zip(&g.values) {
                *out += jj.apply(cell, v)?;
            }
        }
        labels.push(cell_label(&z));
        layers.push(RArray { r, k, values });
        inter.push(InteractionArray::indicator(q, r, cell));
    }
    Ok((LayeredRArray { labels: labels.clone(), layers }, LayeredInteraction { labels, layers: inter }))
}

pub(crate) fn cell_label(z: &[usize]) -> String {
    let parts: Vec<String> = z.iter().map(|s| s.to_string()).collect();
    format!("z={}", parts.join(","))
}
