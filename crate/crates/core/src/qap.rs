//! Quadratic assignment and maximum acyclic subgraph: exact solvers,
//! step-function fits of the cost function and the sampling estimate through
//! a microcanonical ground-state energy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrays::{decode, encode, InteractionArray, RArray, StateDistribution};
use crate::error::{ensure, Error, Result};
use crate::gse::GseProblem;
use crate::par;
use crate::rng::{derive_seed, stream_rng};
use crate::sampling::{sample_g, Graphon, StepKernel};
use crate::stats::Summary;

/// Largest `n` for permutation enumeration.
pub const QAP_LIMIT: usize = 9;
/// Largest `n` for the ordering DP.
pub const AC_LIMIT: usize = 20;

/// `n^{-r} max_rho sum_i J_i G_{rho(i_1), ..., rho(i_r)}` over permutations.
pub fn qap_exact(g: &RArray, j: &RArray) -> Result<f64> {
    ensure!(g.same_shape(j), Dimension, "G is ({}, {}) but J is ({}, {})", g.r(), g.k(), j.r(), j.k());
    let (n, r) = (g.k(), g.r());
    ensure!(n <= QAP_LIMIT, Capacity, "exact QAP enumerates n! permutations; limit is n <= {QAP_LIMIT}, got {n}");
    let kr = g.len();
    let mut idx = vec![0; r];
    let tuples: Vec<Vec<usize>> = (0..kr)
        .filter(|&t| j.values()[t] != 0.0)
        .map(|t| {
            decode(t, n, r, &mut idx);
            idx.clone()
        })
        .collect();
    let weights: Vec<f64> = (0..kr).map(|t| j.values()[t]).filter(|&v| v != 0.0).collect();
    let eval = |rho: &[usize]| -> f64 {
        let mut img = vec![0; r];
        tuples
            .iter()
            .zip(&weights)
            .map(|(t, w)| {
                for (s, &i) in img.iter_mut().zip(t) {
                    *s = rho[i];
                }
                w * g.values()[encode(&img, n)]
            })
            .sum()
    };
    // One chunk per image of vertex 0.
    let best = par::map_range(n.max(1), |first| {
        if n == 0 {
            return 0.0;
        }
        let mut rest: Vec<usize> = (0..n).filter(|&v| v != first).collect();
        let mut best = f64::NEG_INFINITY;
        let mut rho = vec![first; n];
        loop {
            rho[1..].copy_from_slice(&rest);
            best = best.max(eval(&rho));
            if !next_permutation(&mut rest) {
                break;
            }
        }
        best
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    Ok(best / (n as f64).powi(r as i32))
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// `n^{-2} max_rho sum_{i,j} G_ij 1{rho(j) >= rho(i)}`; the diagonal always
/// counts. Dynamic programming over the set of vertices placed first.
pub fn ac_exact(g: &RArray) -> Result<f64> {
    ensure!(g.r() == 2, Dimension, "acyclic subgraph needs a 2-array, got r = {}", g.r());
    let n = g.k();
    ensure!(n <= AC_LIMIT, Capacity, "ordering DP has 2^n states; limit is n <= {AC_LIMIT}, got {n}");
    let diag: f64 = (0..n).map(|i| g.get(&[i, i])).sum();
    let full = 1usize << n;
    let mut best = vec![f64::NEG_INFINITY; full];
    best[0] = 0.0;
    for set in 0..full {
        let base = best[set];
        if base == f64::NEG_INFINITY {
            continue;
        }
        for v in (0..n).filter(|&v| set >> v & 1 == 0) {
            let mut gain = 0.0;
            let mut rest = set;
            while rest != 0 {
                let u = rest.trailing_zeros() as usize;
                gain += g.get(&[u, v]);
                rest &= rest - 1;
            }
            let next = set | 1 << v;
            if base + gain > best[next] {
                best[next] = base + gain;
            }
        }
    }
    Ok((best[full - 1] + diag) / (n * n) as f64)
}

/// `l_p` norm used by geometric costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::LInf => diffs.fold(0.0, f64::max),
        }
    }

    /// `d^{1/p}`, the diameter of the unit cube.
    pub fn cube_diameter(self, d: usize) -> f64 {
        match self {
            Norm::L1 => d as f64,
            Norm::L2 => (d as f64).sqrt(),
            Norm::LInf => 1.0,
        }
    }
}

/// A cost function on `[0,1]^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFunction {
    /// A step function.
    Step(StepKernel),
    /// `J(x, y) = 1{y >= x}`, the ordering cost of acyclic subgraphs.
    Triangular,
    /// Equal-mass points in `[0,1]^d`; `J(x, y)` is the distance of the
    /// points owning `x` and `y`.
    Geometric { points: Vec<Vec<f64>>, norm: Norm },
}

impl CostFunction {
    pub fn r(&self) -> usize {
        match self {
            CostFunction::Step(w) => w.r(),
            _ => 2,
        }
    }

    /// Step-kernel form, when the cost is one.
    pub fn as_step_kernel(&self) -> Result<StepKernel> {
        match self {
            CostFunction::Step(w) => Ok(w.clone()),
            CostFunction::Geometric { points, norm } => {
                validate_points(points)?;
                let n = points.len();
                let values = (0..n * n).map(|t| norm.distance(&points[t / n], &points[t % n])).collect();
                StepKernel::uniform_steps(2, n, values)
            }
            CostFunction::Triangular => Err(Error::Config("the triangular cost is not a step function".into())),
        }
    }

    pub fn inf_norm(&self) -> Result<f64> {
        Ok(match self {
            CostFunction::Triangular => 1.0,
            other => other.as_step_kernel()?.inf_norm(),
        })
    }
}

fn validate_points(points: &[Vec<f64>]) -> Result<()> {
    ensure!(!points.is_empty(), Argument, "geometric cost needs at least one point");
    let d = points[0].len();
    ensure!(d >= 1, Argument, "points need at least one coordinate");
    for p in points {
        ensure!(p.len() == d, Dimension, "points have mixed dimensions {} and {}", d, p.len());
        ensure!(p.iter().all(|x| (0.0..=1.0).contains(x)), Domain, "point {p:?} leaves the unit cube");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Grid cells of side `1 / ceil(2 d^{1/p} / eps)` on the point embedding.
    GeometricGrid,
    /// `ceil(2 / eps)` equal intervals with the strict upper-triangular pattern.
    Triangular,
    /// Greedy merging of steps, cheapest L1 increase first, down to `max_steps`.
    Generic { max_steps: usize },
}

/// How a uniform point of `[0,1]` is mapped to a fit class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// `q` equal intervals.
    Intervals(usize),
    /// Through the steps of the original cost.
    Steps { masses: Vec<f64>, classes: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    pub method: FitMethod,
    pub eps: f64,
    /// The fitted step function `J'`; its step masses are the class masses.
    pub kernel: StepKernel,
    pub membership: Membership,
    /// Exact `||J - J'||_1`.
    pub certified_error: f64,
    /// Error the method promises: `eps` for the grid and triangular fits
    /// (costs bounded by 1), `eps * ||J||_inf` for generic merging.
    pub target: f64,
}

impl ClusterFit {
    pub fn q(&self) -> usize {
        self.kernel.steps()
    }

    pub fn masses(&self) -> &[f64] {
        self.kernel.masses()
    }

    pub fn certified(&self) -> bool {
        self.certified_error <= self.target
    }

    /// Class of the point `u` of `[0,1]`.
    pub fn class_of(&self, u: f64) -> usize {
        match &self.membership {
            Membership::Intervals(q) => ((u * *q as f64) as usize).min(q - 1),
            Membership::Steps { masses, classes } => {
                let mut acc = 0.0;
                for (i, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        return classes[i];
                    }
                }
                classes[masses.len() - 1]
            }
        }
    }
}

/// Exact L1 distance between a step kernel and its class averages.
fn class_average(w: &StepKernel, classes: &[usize], q: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let r = w.r();
    let m = w.steps();
    let mut class_mass = vec![0.0; q];
    for (s, &c) in classes.iter().enumerate() {
        class_mass[c] += w.masses()[s];
    }
    let cells = q.pow(r as u32);
    let mut sum = vec![0.0; cells];
    let mut mass = vec![0.0; cells];
    let mut idx = vec![0; r];
    let mut cidx = vec![0; r];
    for t in 0..w.values().len() {
        decode(t, m, r, &mut idx);
        for (c, &i) in cidx.iter_mut().zip(&idx) {
            *c = classes[i];
        }
        let cm = w.cell_mass(&idx);
        let cell = encode(&cidx, q);
        sum[cell] += cm * w.values()[t];
        mass[cell] += cm;
    }
    let avg: Vec<f64> = sum.iter().zip(&mass).map(|(s, m)| if *m > 0.0 { s / m } else { 0.0 }).collect();
    let mut err = 0.0;
    for t in 0..w.values().len() {
        decode(t, m, r, &mut idx);
        for (c, &i) in cidx.iter_mut().zip(&idx) {
            *c = classes[i];
        }
        err += w.cell_mass(&idx) * (w.values()[t] - avg[encode(&cidx, q)]).abs();
    }
    (class_mass, avg, err)
}

/// Step-function approximation of a cost function with an exactly computed
/// L1 error.
pub fn cluster_fit(cost: &CostFunction, eps: f64, method: FitMethod) -> Result<ClusterFit> {
    ensure!(eps > 0.0 && eps.is_finite(), Argument, "eps must be positive, got {eps}");
    match (method, cost) {
        (FitMethod::Triangular, CostFunction::Triangular) => {
            let q = (2.0 / eps).ceil() as usize;
            let values = (0..q * q).map(|t| if t / q < t % q { 1.0 } else { 0.0 }).collect();
            let kernel = StepKernel::uniform_steps(2, q, values)?;
            // Only the diagonal cells differ: half of each has y >= x.
            let cell = 1.0 / (q * q) as f64;
            let certified_error = (0..q).map(|_| 0.5 * cell).sum();
            Ok(ClusterFit { method, eps, kernel, membership: Membership::Intervals(q), certified_error, target: eps })
        }
        (FitMethod::GeometricGrid, CostFunction::Geometric { points, norm }) => {
            validate_points(points)?;
            let d = points[0].len();
            let beta = (2.0 * norm.cube_diameter(d) / eps).ceil() as usize;
            let codes: Vec<usize> = points
                .iter()
                .map(|p| {
                    let cell: Vec<usize> = p.iter().map(|&x| ((x * beta as f64) as usize).min(beta - 1)).collect();
                    encode(&cell, beta)
                })
                .collect();
            let mut distinct = codes.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let classes: Vec<usize> = codes.iter().map(|c| distinct.binary_search(c).unwrap()).collect();
            let w = cost.as_step_kernel()?;
            let q = distinct.len();
            let (class_mass, avg, err) = class_average(&w, &classes, q);
            Ok(ClusterFit {
                method,
                eps,
                kernel: StepKernel::new(2, class_mass, avg)?,
                membership: Membership::Steps { masses: w.masses().to_vec(), classes },
                certified_error: err,
                target: eps,
            })
        }
        (FitMethod::Generic { max_steps }, CostFunction::Step(_) | CostFunction::Geometric { .. }) => {
            ensure!(max_steps >= 1, Argument, "step budget must be positive");
            let w = cost.as_step_kernel()?;
            let m = w.steps();
            let mut classes: Vec<usize> = (0..m).collect();
            let mut q = m;
            while q > max_steps {
                let mut best: Option<(f64, usize, usize)> = None;
                for a in 0..q {
                    for b in a + 1..q {
                        let merged = merge(&classes, a, b);
                        let (_, _, err) = class_average(&w, &merged, q - 1);
                        if best.is_none_or(|(e, _, _)| err < e) {
                            best = Some((err, a, b));
                        }
                    }
                }
                let (_, a, b) = best.unwrap();
                classes = merge(&classes, a, b);
                q -= 1;
            }
            let (class_mass, avg, err) = class_average(&w, &classes, q);
            let target = eps * w.inf_norm();
            ensure!(
                err <= target,
                Certification,
                "merging down to {max_steps} steps leaves L1 error {err}, above eps * ||J||_inf = {target}"
            );
            Ok(ClusterFit {
                method,
                eps,
                kernel: StepKernel::new(w.r(), class_mass, avg)?,
                membership: Membership::Steps { masses: w.masses().to_vec(), classes },
                certified_error: err,
                target,
            })
        }
        (method, _) => Err(Error::Config(format!("fit method {method:?} does not apply to this cost function"))),
    }
}

/// Relabels classes after merging `b` into `a` (`a < b`), keeping labels dense.
fn merge(classes: &[usize], a: usize, b: usize) -> Vec<usize> {
    classes
        .iter()
        .map(|&c| match c.cmp(&b) {
            std::cmp::Ordering::Equal => a,
            std::cmp::Ordering::Greater => c - 1,
            std::cmp::Ordering::Less => c,
        })
        .collect()
}

/// The fitted step values as a `q`-state interaction on `w`, with the class
/// masses: the microcanonical energy at those masses is the QAP value
/// against the fit.
pub fn qap_to_micro(w: &RArray, fit: &ClusterFit) -> Result<(GseProblem, StateDistribution)> {
    let j = InteractionArray::real(fit.q(), fit.kernel.r(), fit.kernel.values().to_vec())?;
    let a = StateDistribution::normalized(fit.masses().to_vec())?;
    Ok((GseProblem::single(w, &j)?, a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QapEstimate {
    pub k: usize,
    pub fit: ClusterFit,
    pub estimates: Vec<f64>,
    pub summary: Summary,
}

/// Per trial: sample `G(k, W)`, draw `k` independent uniforms for the cost
/// side, set `b` to their class frequencies, and solve the exact
/// microcanonical ground-state energy of the sample at `b`.
pub fn estimate_qap(
    w: &StepKernel,
    cost: &CostFunction,
    method: FitMethod,
    k: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<QapEstimate> {
    ensure!(w.r() == cost.r(), Dimension, "kernel arity {} differs from cost arity {}", w.r(), cost.r());
    let fit = cluster_fit(cost, eps, method)?;
    let j = InteractionArray::real(fit.q(), fit.kernel.r(), fit.kernel.values().to_vec())?;
    let estimates = par::map_range(trials, |t| -> Result<f64> {
        let sample = sample_g(w as &dyn Graphon, k, derive_seed(seed, "qap-w", t as u64))?;
        let mut rng = stream_rng(derive_seed(seed, "qap-j", t as u64));
        let mut b = vec![0.0; fit.q()];
        for _ in 0..k {
            b[fit.class_of(rng.random::<f64>())] += 1.0 / k as f64;
        }
        let b = StateDistribution::normalized(b)?;
        Ok(GseProblem::single(&sample.array, &j)?.exact(Some(&b))?.value)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(QapEstimate { k, fit, summary: Summary::of(&estimates), estimates })
}

/// Exact QAP value of `g` against the blow-up of a fit whose class masses are
/// multiples of `1/n`: vertex `i` gets the class covering `(i + 1/2)/n`.
pub fn blow_up(fit: &ClusterFit, n: usize) -> RArray {
    let classes: Vec<usize> = (0..n).map(|i| fit.class_of((i as f64 + 0.5) / n as f64)).collect();
    let q = fit.q();
    RArray::from_fn(fit.kernel.r(), n, |idx| {
        let cell: Vec<usize> = idx.iter().map(|&i| classes[i]).collect();
        fit.kernel.values()[encode(&cell, q)]
    })
}

/// Kernel of the acyclic-subgraph cost restricted to `n` equal steps, with
/// the diagonal included.
pub fn triangular_array(n: usize) -> RArray {
    RArray::from_fn(2, n, |i| if i[1] >= i[0] { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::graphon_of_graph;

    // Independent oracle: Heap's algorithm over all permutations.
    fn brute_qap(g: &RArray, j: &RArray) -> f64 {
        let n = g.k();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut c = vec![0; n];
        let value = |p: &[usize]| -> f64 {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += j.get(&[a, b]) * g.get(&[p[a], p[b]]);
                }
            }
            s
        };
        let mut best = value(&perm);
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                best = best.max(value(&perm));
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best / (n * n) as f64
    }

    fn random_array(seed: u64, n: usize, nonneg: bool) -> RArray {
        let mut rng = stream_rng(seed);
        RArray::from_fn(2, n, |_| if nonneg { rng.random::<f64>() } else { rng.random_range(-1.0..1.0) })
    }

    #[test]
    fn qap_examples() {
        let g = RArray::new(2, 2, vec![0.0, 2.0, 0.0, 0.0]).unwrap();
        let j = RArray::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(qap_exact(&g, &j).unwrap(), 0.5);
        assert_eq!(qap_exact(&g, &RArray::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(qap_exact(&RArray::constant(2, 3, 1.0), &RArray::constant(2, 3, 1.0)).unwrap(), 1.0);
        assert!(matches!(qap_exact(&RArray::zeros(2, 10), &RArray::zeros(2, 10)), Err(Error::Capacity(_))));
        assert!(qap_exact(&RArray::zeros(2, 3), &RArray::zeros(2, 4)).is_err());
    }

    #[test]
    fn qap_matches_heap_enumeration_and_identity_bound() {
        for seed in 0..20 {
            let n = 2 + seed as usize % 5;
            let g = random_array(seed, n, false);
            let j = random_array(seed + 100, n, false);
            let v = qap_exact(&g, &j).unwrap();
            assert!((v - brute_qap(&g, &j)).abs() < 1e-12);
            let identity: f64 = g.values().iter().zip(j.values()).map(|(a, b)| a * b).sum::<f64>() / (n * n) as f64;
            assert!(v >= identity - 1e-12);
        }
    }

    #[test]
    fn qap_r3() {
        let mut rng = stream_rng(3);
        let g = RArray::from_fn(3, 4, |_| rng.random::<f64>());
        let j = RArray::from_fn(3, 4, |i| if i[0] < i[1] && i[1] < i[2] { 1.0 } else { 0.0 });
        let identity: f64 = g.values().iter().zip(j.values()).map(|(a, b)| a * b).sum::<f64>() / 64.0;
        assert!(qap_exact(&g, &j).unwrap() >= identity);
    }

    #[test]
    fn ac_examples() {
        let mut g = RArray::zeros(2, 2);
        g.set(&[0, 1], 1.0);
        assert_eq!(ac_exact(&g).unwrap(), 0.25);
        let cycle = RArray::from_fn(2, 3, |i| if (i[0] + 1) % 3 == i[1] { 1.0 } else { 0.0 });
        assert!((ac_exact(&cycle).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(ac_exact(&RArray::zeros(2, 4)).unwrap(), 0.0);
        assert!(matches!(ac_exact(&RArray::zeros(2, 21)), Err(Error::Capacity(_))));
    }

    #[test]
    fn ac_is_qap_with_triangular_cost() {
        for seed in 0..15 {
            let n = 2 + seed as usize % 6;
            let g = random_array(seed, n, seed % 2 == 0);
            let v = ac_exact(&g).unwrap();
            assert!((v - brute_qap(&g, &triangular_array(n))).abs() < 1e-12);
            if seed % 2 == 0 {
                let off: f64 = (0..n * n).filter(|t| t / n != t % n).map(|t| g.values()[t]).sum();
                let diag: f64 = (0..n).map(|i| g.get(&[i, i])).sum();
                assert!(v * (n * n) as f64 >= off / 2.0 + diag - 1e-12);
            }
        }
    }

    #[test]
    fn triangular_fit() {
        let fit = cluster_fit(&CostFunction::Triangular, 0.5, FitMethod::Triangular).unwrap();
        assert_eq!(fit.q(), 4);
        assert!((fit.certified_error - 0.125).abs() < 1e-15);
        assert!(fit.certified());
        let fit = cluster_fit(&CostFunction::Triangular, 0.25, FitMethod::Triangular).unwrap();
        // Closed form 1/(2q).
        assert!((fit.certified_error - 1.0 / 16.0).abs() < 1e-12);
        assert_eq!(fit.class_of(0.99), 7);
        assert_eq!(fit.class_of(1.0), 7);
    }

    #[test]
    fn geometric_fit() {
        let n = 16;
        let points: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let cost = CostFunction::Geometric { points: points.clone(), norm: Norm::L1 };
        let fit = cluster_fit(&cost, 0.5, FitMethod::GeometricGrid).unwrap();
        assert_eq!(fit.q(), 4);
        assert!(fit.certified_error <= 0.5);
        // Recompute the L1 error by a direct double loop.
        let Membership::Steps { classes, .. } = &fit.membership else { panic!() };
        let mut err = 0.0;
        for a in 0..n {
            for b in 0..n {
                let j = (points[a][0] - points[b][0]).abs();
                err += (j - fit.kernel.get(&[classes[a], classes[b]])).abs() / (n * n) as f64;
            }
        }
        assert!((err - fit.certified_error).abs() < 1e-12);
        let two_d: Vec<Vec<f64>> = (0..9).map(|i| vec![(i % 3) as f64 / 2.0, (i / 3) as f64 / 2.0]).collect();
        for norm in [Norm::L1, Norm::L2, Norm::LInf] {
            let fit =
                cluster_fit(&CostFunction::Geometric { points: two_d.clone(), norm }, 0.3, FitMethod::GeometricGrid)
                    .unwrap();
            assert!(fit.certified());
        }
        assert!(matches!(cluster_fit(&cost, 0.5, FitMethod::Triangular), Err(Error::Config(_))));
    }

    #[test]
    fn generic_fit() {
        let w = StepKernel::new(2, vec![0.5, 0.5], vec![0.1, 0.9, 0.4, 0.2]).unwrap();
        let fit = cluster_fit(&CostFunction::Step(w.clone()), 0.3, FitMethod::Generic { max_steps: 2 }).unwrap();
        assert_eq!(fit.kernel, w);
        assert_eq!(fit.certified_error, 0.0);
        // Two identical halves merge at no cost.
        let dup = StepKernel::uniform_steps(
            2,
            4,
            vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let fit = cluster_fit(&CostFunction::Step(dup), 0.1, FitMethod::Generic { max_steps: 2 }).unwrap();
        assert!(fit.certified_error.abs() < 1e-15);
        assert_eq!(fit.masses(), &[0.5, 0.5]);
        let noisy = StepKernel::uniform_steps(2, 3, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            cluster_fit(&CostFunction::Step(noisy), 0.01, FitMethod::Generic { max_steps: 1 }),
            Err(Error::Certification(_))
        ));
    }

    #[test]
    fn micro_reduction_against_blow_up() {
        for seed in 0..10 {
            let n = 4;
            let g = random_array(seed, n, true);
            let cost = StepKernel::uniform_steps(2, 4, random_array(seed + 7, 4, true).into_values()).unwrap();
            let fit = cluster_fit(&CostFunction::Step(cost), 10.0, FitMethod::Generic { max_steps: 2 }).unwrap();
            let (p, a) = qap_to_micro(&g, &fit).unwrap();
            let micro = p.exact(Some(&a)).unwrap().value;
            let qap = qap_exact(&g, &blow_up(&fit, n)).unwrap();
            let bound = fit.q() as f64 * 2.0 * fit.kernel.inf_norm() * g.inf_norm() / n as f64;
            assert!(micro >= qap - 1e-12);
            assert!(micro - qap <= bound + 1e-12);
        }
    }

    #[test]
    fn micro_reduction_single_class_and_zero() {
        let g = random_array(1, 4, true);
        let flat = StepKernel::uniform_steps(2, 2, vec![0.5; 4]).unwrap();
        let fit = cluster_fit(&CostFunction::Step(flat), 1.0, FitMethod::Generic { max_steps: 1 }).unwrap();
        let (p, a) = qap_to_micro(&g, &fit).unwrap();
        let mean = g.values().iter().sum::<f64>() / 16.0;
        assert!((p.exact(Some(&a)).unwrap().value - 0.5 * mean).abs() < 1e-12);
        assert!((qap_exact(&g, &blow_up(&fit, 4)).unwrap() - 0.5 * mean).abs() < 1e-12);
        let zero = StepKernel::uniform_steps(2, 2, vec![0.0; 4]).unwrap();
        let fit = cluster_fit(&CostFunction::Step(zero), 1.0, FitMethod::Generic { max_steps: 2 }).unwrap();
        let (p, a) = qap_to_micro(&g, &fit).unwrap();
        assert_eq!(p.exact(Some(&a)).unwrap().value, 0.0);
    }

    #[test]
    fn estimate_trivial_cases() {
        let w = StepKernel::constant(2, 1.0);
        let zero = CostFunction::Step(StepKernel::constant(2, 0.0));
        let rep = estimate_qap(&w, &zero, FitMethod::Generic { max_steps: 1 }, 5, 0.5, 10, 1).unwrap();
        assert!(rep.estimates.iter().all(|&e| e == 0.0));
        let one = CostFunction::Step(StepKernel::constant(2, 1.0));
        let rep = estimate_qap(&w, &one, FitMethod::Generic { max_steps: 1 }, 5, 0.5, 10, 1).unwrap();
        assert!(rep.estimates.iter().all(|&e| (e - 1.0).abs() < 1e-12));
        assert_eq!(rep, estimate_qap(&w, &one, FitMethod::Generic { max_steps: 1 }, 5, 0.5, 10, 1).unwrap());
    }

    #[test]
    fn ac_estimate_small() {
        let g =
            RArray::from_fn(2, 6, |i| if i[0] < i[1] || (i[0] > i[1] && (i[0] + i[1]) % 3 == 0) { 1.0 } else { 0.0 });
        let exact = ac_exact(&g).unwrap();
        let w = graphon_of_graph(&g);
        let rep = estimate_qap(&w, &CostFunction::Triangular, FitMethod::Triangular, 6, 0.5, 20, 3).unwrap();
        let close = rep.estimates.iter().filter(|e| (*e - exact).abs() <= 0.25).count();
        assert!(close >= 15, "{close}");
    }
}
