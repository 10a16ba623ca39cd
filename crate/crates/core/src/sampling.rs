//! Step-function graphons and vertex sampling.
//!
//! Two graphon forms are supported. A [`StepKernel`] is the naive form: a step
//! function on `[0,1]^r` with arbitrary step masses, depending only on the
//! singleton coordinates. A [`FullStepGraphon`] has one coordinate per
//! nonempty subset of `[r]` (optionally also the empty set), each cut into a
//! uniform grid.
//!
//! For an edge `e = (i_1, ..., i_r)` the coordinate of subset `S` is fed the
//! uniform `U_T` with `T = {i_j : j in S}`. Edges with repeated vertices follow
//! the same rule, so a pair coordinate on the edge `(v, v)` sees `U_{v}`.

use serde::{Deserialize, Serialize};

use crate::arrays::{checked_pow, decode, encode, RArray, STOCHASTIC_TOL};
use crate::error::{ensure, Error, Result};
use crate::par;
use crate::rng::{stream_rng, UniformField};

/// Anything that assigns a uniform to a vertex subset.
pub trait UniformSource: Sync {
    fn uniform(&self, vertices: &[usize]) -> f64;
}

impl UniformSource for UniformField {
    fn uniform(&self, vertices: &[usize]) -> f64 {
        UniformField::uniform(self, vertices)
    }
}

/// Naive step kernel on `[0,1]^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepKernel {
    r: usize,
    masses: Vec<f64>,
    values: Vec<f64>,
}

impl StepKernel {
    pub fn new(r: usize, masses: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        ensure!(r >= 1, Argument, "arity must be at least 1");
        ensure!(!masses.is_empty(), Argument, "kernel needs at least one step");
        ensure!(masses.iter().all(|&m| m.is_finite() && m > 0.0), Domain, "step masses must be positive");
        let s: f64 = masses.iter().sum();
        ensure!((s - 1.0).abs() <= STOCHASTIC_TOL, Domain, "step masses sum to {s}, not 1");
        let len = checked_pow(masses.len(), r).ok_or_else(|| Error::Capacity("m^r overflow".into()))?;
        ensure!(
            values.len() == len,
            Dimension,
            "kernel with {} steps needs {len} values, got {}",
            masses.len(),
            values.len()
        );
        ensure!(values.iter().all(|v| v.is_finite()), Domain, "kernel values must be finite");
        Ok(StepKernel { r, masses, values })
    }

    pub fn uniform_steps(r: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(r, vec![1.0 / m as f64; m], values)
    }

    pub fn constant(r: usize, c: f64) -> Self {
        StepKernel { r, masses: vec![1.0], values: vec![c] }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn steps(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cells: &[usize]) -> f64 {
        self.values[encode(cells, self.masses.len())]
    }

    /// Product of step masses of the cell tuple.
    pub fn cell_mass(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&c| self.masses[c]).product()
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mass-weighted L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let m = self.masses.len();
        let mut idx = vec![0; self.r];
        let mut s = 0.0;
        for (flat, v) in self.values.iter().enumerate() {
            decode(flat, m, self.r, &mut idx);
            s += self.cell_mass(&idx) * v * v;
        }
        s.sqrt()
    }

    /// Step containing the point `u` of `[0,1)`.
    pub fn cell_of(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &m) in self.masses.iter().enumerate() {
            acc += m;
            if u < acc {
                return i;
            }
        }
        self.masses.len() - 1
    }
}

/// One coordinate of a full step graphon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coordinate {
    /// Sorted subset of `0..r`.
    pub subset: Vec<usize>,
    /// Number of equal cells the coordinate is cut into.
    pub grid: usize,
}

/// Step graphon with one coordinate per subset of `[r]`.
///
/// Coordinates are stored in canonical order: by subset size, then
/// lexicographically, with the empty set (if present) first. `values` is
/// row-major over the coordinate grids in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullStepGraphon {
    r: usize,
    coords: Vec<Coordinate>,
    values: Vec<f64>,
}

fn canonical_subsets(r: usize, with_empty: bool) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (0u32..(1u32 << r))
        .filter(|&mask| with_empty || mask != 0)
        .map(|mask| (0..r).filter(|&j| mask & (1 << j) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

impl FullStepGraphon {
    pub fn new(r: usize, coords: Vec<Coordinate>, values: Vec<f64>) -> Result<Self> {
        ensure!((1..=6).contains(&r), Argument, "full graphons support 1 <= r <= 6");
        let with_empty = coords.first().is_some_and(|c| c.subset.is_empty());
        let expected = canonical_subsets(r, with_empty);
        let given: Vec<Vec<usize>> = coords.iter().map(|c| c.subset.clone()).collect();
        ensure!(
            given == expected,
            Argument,
            "coordinates must list every nonempty subset of [r] once, in canonical order (expected {expected:?})"
        );
        ensure!(coords.iter().all(|c| c.grid >= 1), Argument, "grid sizes must be positive");
        let len = coords
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.grid))
            .ok_or_else(|| Error::Capacity("value table too large".into()))?;
        ensure!(values.len() == len, Dimension, "value table needs {len} entries, got {}", values.len());
        ensure!(values.iter().all(|v| v.is_finite()), Domain, "graphon values must be finite");
        Ok(FullStepGraphon { r, coords, values })
    }

    /// Builds the table from a function of the per-coordinate cell indices.
    pub fn from_fn(r: usize, grids: &[(Vec<usize>, usize)], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let coords: Vec<Coordinate> = grids.iter().map(|(s, g)| Coordinate { subset: s.clone(), grid: *g }).collect();
        let sizes: Vec<usize> = coords.iter().map(|c| c.grid).collect();
        let len: usize = sizes.iter().product();
        let mut cells = vec![0; sizes.len()];
        let values = (0..len)
            .map(|flat| {
                mixed_decode(flat, &sizes, &mut cells);
                f(&cells)
            })
            .collect();
        Self::new(r, coords, values)
    }

    /// Subsets of `[r]` in canonical order, optionally with the empty set.
    pub fn subsets(r: usize, with_empty: bool) -> Vec<Vec<usize>> {
        canonical_subsets(r, with_empty)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_empty_coordinate(&self) -> bool {
        self.coords[0].subset.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn image(&self, coord: &Coordinate, edge: &[usize], buf: &mut Vec<usize>) {
        buf.clear();
        buf.extend(coord.subset.iter().map(|&j| edge[j]));
        buf.sort_unstable();
        buf.dedup();
    }
}

fn mixed_decode(mut flat: usize, sizes: &[usize], out: &mut [usize]) {
    for j in (0..sizes.len()).rev() {
        out[j] = flat % sizes[j];
        flat /= sizes[j];
    }
}

#[inline]
fn grid_cell(u: f64, grid: usize) -> usize {
    ((u * grid as f64) as usize).min(grid - 1)
}

/// A graphon that can be sampled.
pub trait Graphon: Sync {
    fn arity(&self) -> usize;

    fn sup_norm(&self) -> f64;

    /// Edge weight of `G(k, W)` at `edge`.
    fn edge_value(&self, edge: &[usize], u: &dyn UniformSource) -> f64;

    /// Edge weight of `H(k, W)`: the average over every coordinate whose
    /// image is not a single vertex, singleton coordinates held fixed.
    fn averaged_edge_value(&self, edge: &[usize], u: &dyn UniformSource) -> f64;
}

impl Graphon for StepKernel {
    fn arity(&self) -> usize {
        self.r
    }

    fn sup_norm(&self) -> f64 {
        self.inf_norm()
    }

    fn edge_value(&self, edge: &[usize], u: &dyn UniformSource) -> f64 {
        let cells: Vec<usize> = edge.iter().map(|&v| self.cell_of(u.uniform(&[v]))).collect();
        self.get(&cells)
    }

    fn averaged_edge_value(&self, edge: &[usize], u: &dyn UniformSource) -> f64 {
        self.edge_value(edge, u)
    }
}

impl Graphon for FullStepGraphon {
    fn arity(&self) -> usize {
        self.r
    }

    fn sup_norm(&self) -> f64 {
        self.inf_norm()
    }

    fn edge_value(&self, edge: &[usize], u: &dyn UniformSource) -> f64 {
        let mut buf = Vec::with_capacity(self.r);
        let mut flat = 0;
        for c in &self.coords {
            self.image(c, edge, &mut buf);
            flat = flat * c.grid + grid_cell(u.uniform(&buf), c.grid);
        }
        self.values[flat]
    }

    fn averaged_edge_value(&self, edge: &[usize], u: &dyn UniformSource) -> f64 {
        let mut buf = Vec::with_capacity(self.r);
        // fixed cell per coordinate, or None when averaged out
        let fixed: Vec<Option<usize>> = self
            .coords
            .iter()
            .map(|c| {
                self.image(c, edge, &mut buf);
                (buf.len() == 1).then(|| grid_cell(u.uniform(&buf), c.grid))
            })
            .collect();
        let free: Vec<usize> = (0..self.coords.len()).filter(|&i| fixed[i].is_none()).collect();
        let free_sizes: Vec<usize> = free.iter().map(|&i| self.coords[i].grid).collect();
        let total: usize = free_sizes.iter().product();
        let mut cells: Vec<usize> = fixed.iter().map(|c| c.unwrap_or(0)).collect();
        let mut free_cells = vec![0; free.len()];
        let mut sum = 0.0;
        for t in 0..total {
            mixed_decode(t, &free_sizes, &mut free_cells);
            for (slot, &i) in free.iter().enumerate() {
                cells[i] = free_cells[slot];
            }
            let flat = cells.iter().zip(&self.coords).fold(0, |acc, (&c, co)| acc * co.grid + c);
            sum += self.values[flat];
        }
        sum / total as f64
    }
}

/// A sampled r-array together with the uniform family that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledGraph {
    pub array: RArray,
    pub field: UniformField,
}

impl SampledGraph {
    /// `U_S` as used when the sample was drawn.
    pub fn uniform(&self, vertices: &[usize]) -> f64 {
        self.field.uniform(vertices)
    }

    pub fn singleton_uniforms(&self) -> Vec<f64> {
        (0..self.array.k()).map(|v| self.field.uniform(&[v])).collect()
    }
}

fn build(r: usize, k: usize, f: impl Fn(&[usize]) -> f64 + Sync + Send) -> RArray {
    let len = checked_pow(k, r).expect("sample too large");
    let values = par::map_range(len, |flat| {
        let mut idx = vec![0; r];
        decode(flat, k, r, &mut idx);
        f(&idx)
    });
    RArray::new(r, k, values).expect("sampled values are finite")
}

pub(crate) fn sample_g_with(w: &dyn Graphon, k: usize, u: &dyn UniformSource) -> RArray {
    build(w.arity(), k, |e| w.edge_value(e, u))
}

pub(crate) fn sample_h_with(w: &dyn Graphon, k: usize, u: &dyn UniformSource) -> RArray {
    build(w.arity(), k, |e| w.averaged_edge_value(e, u))
}

/// `G(k, W)` drawn from the uniform family `field`.
pub fn sample_g_field(w: &dyn Graphon, k: usize, field: UniformField) -> Result<SampledGraph> {
    ensure!(k >= w.arity(), Argument, "sample size k={k} is below the arity r={}", w.arity());
    Ok(SampledGraph { array: sample_g_with(w, k, &field), field })
}

/// `G(k, W)`: edge weights of `W` at the uniforms of the edge's vertex subsets.
pub fn sample_g(w: &dyn Graphon, k: usize, seed: u64) -> Result<SampledGraph> {
    sample_g_field(w, k, UniformField::new(seed))
}

/// `H(k, W)`: conditional expectation of `G(k, W)` given the singleton uniforms.
pub fn sample_h(w: &dyn Graphon, k: usize, seed: u64) -> Result<SampledGraph> {
    ensure!(k >= w.arity(), Argument, "sample size k={k} is below the arity r={}", w.arity());
    let field = UniformField::new(seed);
    Ok(SampledGraph { array: sample_h_with(w, k, &field), field })
}

/// `G(k, W)` and `H(k, W)` built from one shared uniform family.
pub fn coupled_samples(w: &dyn Graphon, k: usize, seed: u64) -> Result<(SampledGraph, SampledGraph)> {
    Ok((sample_g(w, k, seed)?, sample_h(w, k, seed)?))
}

/// An `n^r` draw from the exchangeable law induced by `f`, including the
/// shared empty-set coordinate.
pub fn samp_exchangeable(f: &FullStepGraphon, n: usize, seed: u64) -> Result<RArray> {
    ensure!(f.has_empty_coordinate(), Argument, "exchangeable sampling needs the empty-set coordinate");
    ensure!(n >= 1, Argument, "array size must be positive");
    Ok(sample_g_with(f, n, &UniformField::new(seed)))
}

/// Step kernel of a finite r-graph: `k` equal steps, values copied, entries
/// with a repeated index set to 0.
pub fn graphon_of_graph(g: &RArray) -> StepKernel {
    let k = g.k();
    let mut idx = vec![0; g.r()];
    let values = g
        .values()
        .iter()
        .enumerate()
        .map(|(flat, &v)| {
            decode(flat, k, g.r(), &mut idx);
            if RArray::has_repeat(&idx) {
                0.0
            } else {
                v
            }
        })
        .collect();
    StepKernel { r: g.r(), masses: vec![1.0 / k as f64; k], values }
}

/// Uniform random `k`-subset of `0..n` in random order (partial Fisher-Yates).
pub fn sample_vertices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    use rand::Rng;
    ensure!(k <= n, Argument, "cannot draw {k} vertices from {n}");
    let mut rng = stream_rng(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    Ok(pool)
}

/// `G(k, G)`: induced sub-array on a uniform `k`-subset, sampled without
/// replacement. Returns the array and the chosen vertices.
pub fn sample_subgraph(g: &RArray, k: usize, seed: u64) -> Result<(RArray, Vec<usize>)> {
    let chosen = sample_vertices(g.k(), k, seed)?;
    let mut mapped = vec![0; g.r()];
    let sub = RArray::from_fn(g.r(), k, |idx| {
        for (m, &i) in mapped.iter_mut().zip(idx) {
            *m = chosen[i];
        }
        g.get(&mapped)
    });
    Ok((sub, chosen))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_pm_one() -> FullStepGraphon {
        // constant on the singletons, +1/-1 on the two halves of the pair coordinate
        FullStepGraphon::from_fn(
            2,
            &[(vec![0], 1), (vec![1], 1), (vec![0, 1], 2)],
            |c| {
                if c[2] == 0 {
                    1.0
                } else {
                    -1.0
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn constant_kernel_samples_constant() {
        let w = StepKernel::constant(2, 0.7);
        for seed in 0..5 {
            let g = sample_g(&w, 5, seed).unwrap();
            assert!(g.array.values().iter().all(|&v| v == 0.7));
            let h = sample_h(&w, 5, seed).unwrap();
            assert!(h.array.values().iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let w = pair_pm_one();
        assert_eq!(sample_g(&w, 6, 42).unwrap(), sample_g(&w, 6, 42).unwrap());
        assert_ne!(sample_g(&w, 6, 42).unwrap().array, sample_g(&w, 6, 43).unwrap().array);
    }

    #[test]
    fn k_below_r_is_rejected() {
        let w = StepKernel::constant(3, 1.0);
        assert!(matches!(sample_g(&w, 2, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn averaging_kills_balanced_pair_coordinate() {
        let w = pair_pm_one();
        let h = sample_h(&w, 6, 3).unwrap();
        for (flat, &v) in h.array.values().iter().enumerate() {
            let idx = h.array.coords(flat);
            if idx[0] != idx[1] {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn naive_kernel_h_equals_g() {
        let w = StepKernel::uniform_steps(2, 3, (0..9).map(|v| v as f64).collect()).unwrap();
        for seed in 0..10 {
            let (g, h) = coupled_samples(&w, 7, seed).unwrap();
            assert_eq!(g.array, h.array);
            assert_eq!(g.singleton_uniforms(), h.singleton_uniforms());
        }
    }

    #[test]
    fn graphon_of_graph_zeroes_the_diagonal() {
        let g = RArray::new(2, 2, vec![5.0, 1.0, 2.0, 7.0]).unwrap();
        let w = graphon_of_graph(&g);
        assert_eq!(w.masses(), &[0.5, 0.5]);
        assert_eq!(w.values(), &[0.0, 1.0, 2.0, 0.0]);
        assert_eq!(graphon_of_graph(&RArray::zeros(2, 3)).inf_norm(), 0.0);
    }

    #[test]
    fn graphon_of_graph_inf_norm_is_off_diagonal_max() {
        use rand::Rng;
        let mut rng = stream_rng(8);
        let g = RArray::from_fn(2, 4, |_| rng.random_range(-3.0..3.0));
        let direct = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| g.get(&[i, j]).abs())
            .fold(0.0, f64::max);
        assert_eq!(graphon_of_graph(&g).inf_norm(), direct);
    }

    #[test]
    fn sampled_entries_follow_cell_masses() {
        // 0/1 graph on 3 vertices; entry (0,1) of G(3, W_G) is G[c0][c1] with
        // independent uniform cells, so P(entry = 1) = #ones off-diagonal / 9
        let g = RArray::new(2, 3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let w = graphon_of_graph(&g);
        let p = 5.0 / 9.0;
        let trials = 10_000;
        let hits = (0..trials).filter(|&s| sample_g(&w, 3, s).unwrap().array.get(&[0, 1]) == 1.0).count();
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        assert!((freq - p).abs() < 3.0 * sd, "freq {freq} vs {p}");
    }

    struct Spliced {
        singletons: UniformField,
        rest: UniformField,
    }

    impl UniformSource for Spliced {
        fn uniform(&self, v: &[usize]) -> f64 {
            let mut s = v.to_vec();
            s.sort_unstable();
            s.dedup();
            if s.len() == 1 {
                self.singletons.uniform(&s)
            } else {
                self.rest.uniform(&s)
            }
        }
    }

    fn mixed_r2() -> FullStepGraphon {
        FullStepGraphon::from_fn(2, &[(vec![0], 3), (vec![1], 2), (vec![0, 1], 4)], |c| {
            (c[0] as f64) - 0.5 * c[1] as f64 + 0.25 * (c[2] as f64).powi(2)
        })
        .unwrap()
    }

    #[test]
    fn averaged_sample_ignores_higher_uniforms() {
        let w = mixed_r2();
        let base = sample_h_with(&w, 5, &Spliced { singletons: UniformField::new(1), rest: UniformField::new(2) });
        for other in 3..8 {
            let alt =
                sample_h_with(&w, 5, &Spliced { singletons: UniformField::new(1), rest: UniformField::new(other) });
            assert_eq!(base, alt);
        }
    }

    #[test]
    fn averaged_sample_is_conditional_mean_of_g() {
        // re-draw the pair uniforms with singletons fixed and average G
        let w = mixed_r2();
        let k = 4;
        let h = sample_h_with(&w, k, &Spliced { singletons: UniformField::new(10), rest: UniformField::new(0) });
        let draws = 10_000;
        let mut mean = vec![0.0; k * k];
        let mut sq = vec![0.0; k * k];
        for d in 0..draws {
            let g =
                sample_g_with(&w, k, &Spliced { singletons: UniformField::new(10), rest: UniformField::new(1000 + d) });
            for (i, &v) in g.values().iter().enumerate() {
                mean[i] += v;
                sq[i] += v * v;
            }
        }
        for i in 0..k * k {
            let m = mean[i] / draws as f64;
            let var = (sq[i] / draws as f64 - m * m).max(0.0);
            let sd = (var / draws as f64).sqrt();
            assert!((m - h.values()[i]).abs() <= 3.0 * sd + 1e-12, "entry {i}: {m} vs {}", h.values()[i]);
        }
    }

    #[test]
    fn exchangeable_constant_and_shared_randomness() {
        let c =
            FullStepGraphon::from_fn(2, &[(vec![], 1), (vec![0], 1), (vec![1], 1), (vec![0, 1], 1)], |_| 3.0).unwrap();
        assert!(samp_exchangeable(&c, 4, 1).unwrap().values().iter().all(|&v| v == 3.0));

        let shared =
            FullStepGraphon::from_fn(2, &[(vec![], 2), (vec![0], 3), (vec![1], 3), (vec![0, 1], 2)], |cells| {
                if cells[0] == 0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .unwrap();
        for seed in 0..20 {
            let a = samp_exchangeable(&shared, 5, seed).unwrap();
            let first = a.values()[0];
            assert!(a.values().iter().all(|&v| v == first));
        }
    }

    #[test]
    fn exchangeable_needs_empty_coordinate() {
        let w = mixed_r2();
        assert!(matches!(samp_exchangeable(&w, 3, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn exchangeable_order_indicator_is_balanced() {
        let g = 1000;
        let f = FullStepGraphon::from_fn(2, &[(vec![], 1), (vec![0], g), (vec![1], g), (vec![0, 1], 1)], |c| {
            if c[1] < c[2] {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let trials = 10_000;
        let hits = (0..trials).filter(|&s| samp_exchangeable(&f, 2, s).unwrap().get(&[0, 1]) == 1.0).count();
        let freq = hits as f64 / trials as f64;
        // ties inside a grid cell shift the mean by 1/(2g)
        let p = (g as f64 - 1.0) / (2.0 * g as f64);
        let sd = (0.25 / trials as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * sd, "freq {freq}");
    }

    #[test]
    fn coordinate_order_is_validated() {
        let bad = FullStepGraphon::from_fn(2, &[(vec![1], 1), (vec![0], 1), (vec![0, 1], 1)], |_| 0.0);
        assert!(bad.is_err());
        let missing = FullStepGraphon::from_fn(2, &[(vec![0], 1), (vec![1], 1)], |_| 0.0);
        assert!(missing.is_err());
    }

    #[test]
    fn subgraph_sampling_vs_kernel_sampling() {
        // coupling through the singleton cells: the with-replacement sample
        // differs from an induced subgraph only when two vertices share a cell
        let k0 = 50;
        let k = 5;
        let w = StepKernel::uniform_steps(2, k0, vec![0.0; k0 * k0]).unwrap();
        let trials = 10_000u64;
        let collisions = (0..trials)
            .filter(|&s| {
                let f = UniformField::new(s);
                let mut cells: Vec<usize> = (0..k).map(|v| w.cell_of(f.uniform(&[v]))).collect();
                cells.sort_unstable();
                cells.windows(2).any(|p| p[0] == p[1])
            })
            .count();
        let freq = collisions as f64 / trials as f64;
        let bound = (k * (k - 1) / 2) as f64 / k0 as f64;
        assert!(freq <= bound, "collision frequency {freq} above {bound}");
    }

    #[test]
    fn subgraph_is_induced() {
        let g = RArray::from_fn(2, 6, |i| (i[0] * 10 + i[1]) as f64);
        let (sub, chosen) = sample_subgraph(&g, 3, 9).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(sub.get(&[a, b]), g.get(&[chosen[a], chosen[b]]));
            }
        }
        let mut c = chosen.clone();
        c.sort_unstable();
        c.dedup();
        assert_eq!(c.len(), 3);
    }
}
