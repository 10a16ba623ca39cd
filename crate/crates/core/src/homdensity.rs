//! Homomorphism and injective densities of decorated templates, the Möbius
//! relation between them, and sampling estimates of densities.

use serde::{Deserialize, Serialize};

use crate::arrays::{checked_pow, decode, RArray};
use crate::error::{ensure, Error, Result};
use crate::par;
use crate::rng::derive_seed;
use crate::sampling::{graphon_of_graph, sample_g, Graphon, StepKernel};
use crate::stats::Summary;

/// Largest number of vertex maps enumerated by a density computation.
pub const MAP_LIMIT: usize = 20_000_000;
/// Largest template handled by the partition sums.
pub const MOBIUS_LIMIT: usize = 4;

/// A function applied to the host value on an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoration {
    Constant(f64),
    /// Lookup over a finite color set; other colors are an error.
    Table {
        colors: Vec<f64>,
        values: Vec<f64>,
    },
    /// The host value itself.
    Identity,
    /// `sum_i coeffs[i] * g^i`.
    Polynomial(Vec<f64>),
    Product(Vec<Decoration>),
}

impl Decoration {
    pub fn eval(&self, g: f64) -> Result<f64> {
        Ok(match self {
            Decoration::Constant(c) => *c,
            Decoration::Table { colors, values } => {
                let i = colors
                    .iter()
                    .position(|&c| c == g)
                    .ok_or_else(|| Error::Domain(format!("decoration has no value for color {g}")))?;
                values[i]
            }
            Decoration::Identity => g,
            Decoration::Polynomial(c) => c.iter().rev().fold(0.0, |acc, a| acc * g + a),
            Decoration::Product(ds) => {
                let mut p = 1.0;
                for d in ds {
                    p *= d.eval(g)?;
                }
                p
            }
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Decoration::Table { colors, values } => {
                ensure!(
                    colors.len() == values.len(),
                    Dimension,
                    "decoration table has {} colors and {} values",
                    colors.len(),
                    values.len()
                );
            }
            Decoration::Product(ds) => ds.iter().try_for_each(|d| d.validate())?,
            _ => {}
        }
        Ok(())
    }

    /// Largest absolute value over the given host values.
    pub fn sup_on(&self, values: &[f64]) -> Result<f64> {
        values.iter().try_fold(0.0f64, |m, &g| Ok(m.max(self.eval(g)?.abs())))
    }
}

/// One decorated edge of a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEdge {
    pub edge: Vec<usize>,
    pub decoration: Decoration,
}

/// An `r`-uniform template on `k` vertices. Tuples without a listed edge
/// carry the constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoratedTemplate {
    k: usize,
    r: usize,
    edges: Vec<TemplateEdge>,
}

impl DecoratedTemplate {
    pub fn new(k: usize, r: usize, edges: Vec<TemplateEdge>) -> Result<Self> {
        let t = DecoratedTemplate { k, r, edges };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.k >= 1 && self.r >= 1, Argument, "template needs k, r >= 1");
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            ensure!(
                e.edge.len() == self.r,
                Dimension,
                "template edge {:?} has arity {}, expected {}",
                e.edge,
                e.edge.len(),
                self.r
            );
            ensure!(e.edge.iter().all(|&v| v < self.k), Dimension, "template edge {:?} leaves 0..{}", e.edge, self.k);
            ensure!(seen.insert(e.edge.clone()), Argument, "template edge {:?} listed twice", e.edge);
            e.decoration.validate()?;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn edges(&self) -> &[TemplateEdge] {
        &self.edges
    }

    /// Template on `k` vertices with a single decorated edge.
    pub fn single_edge(k: usize, edge: Vec<usize>, decoration: Decoration) -> Result<Self> {
        let r = edge.len();
        Self::new(k, r, vec![TemplateEdge { edge, decoration }])
    }

    /// Vertices of `other` are shifted past those of `self`.
    pub fn disjoint_union(&self, other: &DecoratedTemplate) -> Result<Self> {
        ensure!(self.r == other.r, Dimension, "templates have arities {} and {}", self.r, other.r);
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|e| TemplateEdge {
            edge: e.edge.iter().map(|v| v + self.k).collect(),
            decoration: e.decoration.clone(),
        }));
        Self::new(self.k + other.k, self.r, edges)
    }

    /// Quotient by the partition with block labels `blocks` (a restricted
    /// growth string): edges landing on the same tuple multiply.
    pub fn quotient(&self, blocks: &[usize]) -> DecoratedTemplate {
        let k = blocks.iter().max().map_or(0, |m| m + 1);
        let mut edges: Vec<TemplateEdge> = Vec::new();
        for e in &self.edges {
            let image: Vec<usize> = e.edge.iter().map(|&v| blocks[v]).collect();
            match edges.iter_mut().find(|t| t.edge == image) {
                Some(t) => {
                    let prev = std::mem::replace(&mut t.decoration, Decoration::Constant(1.0));
                    t.decoration = match prev {
                        Decoration::Product(mut ds) => {
                            ds.push(e.decoration.clone());
                            Decoration::Product(ds)
                        }
                        d => Decoration::Product(vec![d, e.decoration.clone()]),
                    };
                }
                None => edges.push(TemplateEdge { edge: image, decoration: e.decoration.clone() }),
            }
        }
        DecoratedTemplate { k, r: self.r, edges }
    }

    /// `max` of the decorations' sup over `values`, counting the implicit
    /// constant 1 when some tuple is undecorated.
    pub fn sup_norm_on(&self, values: &[f64]) -> Result<f64> {
        let mut m: f64 = if self.edges.len() < self.k.pow(self.r as u32) { 1.0 } else { 0.0 };
        for e in &self.edges {
            m = m.max(e.decoration.sup_on(values)?);
        }
        Ok(m)
    }
}

fn map_count(n: usize, k: usize) -> Result<usize> {
    checked_pow(n, k).filter(|&m| m <= MAP_LIMIT).ok_or_else(|| {
        Error::Capacity(format!("density enumerates |V(G)|^|V(F)| = {n}^{k} maps; limit is {MAP_LIMIT}"))
    })
}

/// Sum over maps `phi: [k] -> [n]` of `weight(phi) * prod_e F_e(G(phi(e)))`,
/// optionally restricted to injective maps.
fn map_sum(
    f: &DecoratedTemplate,
    n: usize,
    injective: bool,
    value: impl Fn(&[usize]) -> f64 + Sync,
    weight: impl Fn(&[usize]) -> f64 + Sync,
) -> Result<f64> {
    let maps = map_count(n, f.k)?;
    let chunk = 4096;
    let parts = par::map_range(maps.div_ceil(chunk), |c| -> Result<f64> {
        let mut phi = vec![0; f.k];
        let mut image = vec![0; f.r];
        let mut acc = 0.0;
        for code in c * chunk..((c + 1) * chunk).min(maps) {
            decode(code, n, f.k, &mut phi);
            if injective && (1..f.k).any(|i| phi[..i].contains(&phi[i])) {
                continue;
            }
            let mut prod = weight(&phi);
            for e in &f.edges {
                for (slot, &v) in image.iter_mut().zip(&e.edge) {
                    *slot = phi[v];
                }
                prod *= e.decoration.eval(value(&image))?;
                if prod == 0.0 {
                    break;
                }
            }
            acc += prod;
        }
        Ok(acc)
    });
    parts.into_iter().sum()
}

fn check_host(f: &DecoratedTemplate, g: &RArray) -> Result<()> {
    ensure!(f.r == g.r(), Dimension, "template arity {} differs from host arity {}", f.r, g.r());
    Ok(())
}

/// Number-weighted homomorphism sum `hom(F, G)`.
pub fn hom(f: &DecoratedTemplate, g: &RArray) -> Result<f64> {
    check_host(f, g)?;
    map_sum(f, g.k(), false, |idx| g.get(idx), |_| 1.0)
}

/// Injective homomorphism sum `inj(F, G)`.
pub fn inj(f: &DecoratedTemplate, g: &RArray) -> Result<f64> {
    check_host(f, g)?;
    map_sum(f, g.k(), true, |idx| g.get(idx), |_| 1.0)
}

/// `hom(F, G) / |V(G)|^|V(F)|`.
pub fn t_hom(f: &DecoratedTemplate, g: &RArray) -> Result<f64> {
    Ok(hom(f, g)? / (g.k() as f64).powi(f.k as i32))
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// `inj(F, G)` divided by the number of injective maps.
pub fn t_inj(f: &DecoratedTemplate, g: &RArray) -> Result<f64> {
    ensure!(f.k <= g.k(), Argument, "template has {} vertices, host only {}", f.k, g.k());
    Ok(inj(f, g)? / falling(g.k(), f.k))
}

/// Exact density in a step kernel: maps go to steps, weighted by step masses.
pub fn t_hom_kernel(f: &DecoratedTemplate, w: &StepKernel) -> Result<f64> {
    ensure!(f.r == w.r(), Dimension, "template arity {} differs from kernel arity {}", f.r, w.r());
    let masses = w.masses();
    map_sum(f, w.steps(), false, |idx| w.get(idx), |phi| phi.iter().map(|&c| masses[c]).product())
}

/// All set partitions of `0..k` as restricted growth strings, in
/// lexicographic order.
pub fn set_partitions(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut a = vec![0; k];
    fn rec(i: usize, max: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == a.len() {
            out.push(a.clone());
            return;
        }
        for b in 0..=max + 1 {
            a[i] = b;
            rec(i + 1, max.max(b), a, out);
        }
    }
    rec(1, 0, &mut a, &mut out);
    out
}

fn block_sizes(blocks: &[usize]) -> Vec<usize> {
    let n = blocks.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0; n];
    blocks.iter().for_each(|&b| sizes[b] += 1);
    sizes
}

fn check_mobius(f: &DecoratedTemplate) -> Result<()> {
    ensure!(
        f.k <= MOBIUS_LIMIT,
        Capacity,
        "partition sums enumerate Bell({}) partitions; limit is |V(F)| <= {MOBIUS_LIMIT}",
        f.k
    );
    Ok(())
}

/// `inj(F, G) = sum_P prod_{S in P} (-1)^{|S|-1} (|S|-1)! * hom(F/P, G)`.
pub fn mobius_inj(f: &DecoratedTemplate, g: &RArray) -> Result<f64> {
    check_mobius(f)?;
    let mut total = 0.0;
    for p in set_partitions(f.k) {
        let coef: f64 = block_sizes(&p)
            .iter()
            .map(|&s| {
                let fact: f64 = (1..s).map(|i| i as f64).product();
                if s % 2 == 1 {
                    fact
                } else {
                    -fact
                }
            })
            .product();
        total += coef * hom(&f.quotient(&p), g)?;
    }
    Ok(total)
}

/// `hom(F, G) = sum_P inj(F/P, G)`: every map factors uniquely through the
/// partition of `V(F)` into its fibres.
pub fn partition_hom(f: &DecoratedTemplate, g: &RArray) -> Result<f64> {
    check_mobius(f)?;
    let mut total = 0.0;
    for p in set_partitions(f.k) {
        let q = f.quotient(&p);
        if q.k <= g.k() {
            total += inj(&q, g)?;
        }
    }
    Ok(total)
}

/// Host of a density estimate.
#[derive(Debug, Clone, Copy)]
pub enum DensitySource<'a> {
    Graph(&'a RArray),
    Kernel(&'a StepKernel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub k: usize,
    pub truth: f64,
    pub estimates: Vec<f64>,
    pub deviations: Summary,
}

impl DensityReport {
    /// Tail bound `2 exp(-eps^2 k / (4 |V(F)|^2))`.
    pub fn envelope(eps: f64, k: usize, template_vertices: usize) -> f64 {
        2.0 * (-eps * eps * k as f64 / (4.0 * (template_vertices * template_vertices) as f64)).exp()
    }

    /// Fraction of trials with `|estimate - truth| <= eps`.
    pub fn fraction_within(&self, eps: f64) -> f64 {
        let inside = self.estimates.iter().filter(|e| (*e - self.truth).abs() <= eps).count();
        inside as f64 / self.estimates.len().max(1) as f64
    }
}

/// `t(F, G(k, .))` for `trials` independent samples. Graphs are sampled
/// through their step graphon, i.e. `k` vertices drawn with replacement.
pub fn density_estimate(
    f: &DecoratedTemplate,
    source: DensitySource<'_>,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<DensityReport> {
    ensure!(k >= f.k, Argument, "sample size {k} is below the template size {}", f.k);
    let kernel;
    let (w, truth): (&StepKernel, f64) = match source {
        DensitySource::Graph(g) => {
            kernel = graphon_of_graph(g);
            (&kernel, t_hom(f, g)?)
        }
        DensitySource::Kernel(w) => (w, t_hom_kernel(f, w)?),
    };
    let estimates = par::map_range(trials, |t| -> Result<f64> {
        let s = sample_g(w as &dyn Graphon, k, derive_seed(seed, "density", t as u64))?;
        t_hom(f, &s.array)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let devs: Vec<f64> = estimates.iter().map(|e| (e - truth).abs()).collect();
    Ok(DensityReport { k, truth, deviations: Summary::of(&devs), estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn cycle3() -> RArray {
        RArray::from_fn(2, 3, |i| if (i[0] + 1) % 3 == i[1] { 1.0 } else { 0.0 })
    }

    fn identity_edge() -> DecoratedTemplate {
        DecoratedTemplate::single_edge(
            2,
            vec![0, 1],
            Decoration::Table { colors: vec![0.0, 1.0], values: vec![0.0, 1.0] },
        )
        .unwrap()
    }

    // Independent oracle: explicit nested loops for templates on <= 3 vertices.
    fn brute(f: &DecoratedTemplate, g: &RArray, injective: bool) -> f64 {
        let n = g.k();
        let k = f.k();
        let mut total = 0.0;
        let mut count = 0usize;
        for a in 0..n {
            for b in 0..if k > 1 { n } else { 1 } {
                for c in 0..if k > 2 { n } else { 1 } {
                    let phi = [a, b, c];
                    if injective && (1..k).any(|i| phi[..i].contains(&phi[i])) {
                        continue;
                    }
                    count += 1;
                    let mut p = 1.0;
                    for e in f.edges() {
                        let image: Vec<usize> = e.edge.iter().map(|&v| phi[v]).collect();
                        p *= e.decoration.eval(g.get(&image)).unwrap();
                    }
                    total += p;
                }
            }
        }
        total / count as f64
    }

    fn random_template(rng: &mut impl Rng, k: usize) -> DecoratedTemplate {
        let mut edges = Vec::new();
        for a in 0..k {
            for b in 0..k {
                if rng.random_bool(0.5) {
                    let decoration = match rng.random_range(0..4) {
                        0 => Decoration::Constant(rng.random_range(-1.0..1.0)),
                        1 => Decoration::Table {
                            colors: vec![0.0, 1.0, 2.0],
                            values: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                        },
                        2 => Decoration::Polynomial(vec![rng.random_range(-0.5..0.5), rng.random_range(-0.25..0.25)]),
                        _ => Decoration::Identity,
                    };
                    edges.push(TemplateEdge { edge: vec![a, b], decoration });
                }
            }
        }
        DecoratedTemplate::new(k, 2, edges).unwrap()
    }

    fn random_host(rng: &mut impl Rng, n: usize) -> RArray {
        // Colors in {0, 1, 2}, scaled by 1/2 for identity decorations to stay in [-1, 1].
        RArray::from_fn(2, n, |_| rng.random_range(0..3) as f64)
    }

    #[test]
    fn examples() {
        let loop1 = DecoratedTemplate::single_edge(1, vec![0, 0], Decoration::Constant(1.0)).unwrap();
        assert_eq!(t_hom(&loop1, &cycle3()).unwrap(), 1.0);
        assert_eq!(t_inj(&loop1, &cycle3()).unwrap(), 1.0);
        assert!((t_hom(&identity_edge(), &cycle3()).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((t_inj(&identity_edge(), &cycle3()).unwrap() - 0.5).abs() < 1e-15);
        let bad =
            DecoratedTemplate::single_edge(2, vec![0, 1], Decoration::Table { colors: vec![5.0], values: vec![1.0] })
                .unwrap();
        assert!(matches!(t_hom(&bad, &cycle3()), Err(Error::Domain(_))));
        let big = DecoratedTemplate::new(4, 2, vec![]).unwrap();
        assert!(matches!(t_inj(&big, &cycle3()), Err(Error::Argument(_))));
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = stream_rng(1);
        for _ in 0..30 {
            let k = rng.random_range(1..=3);
            let f = random_template(&mut rng, k);
            let n = rng.random_range(3..=5);
            let g = random_host(&mut rng, n);
            assert!((t_hom(&f, &g).unwrap() - brute(&f, &g, false)).abs() < 1e-12);
            assert!((t_inj(&f, &g).unwrap() - brute(&f, &g, true)).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule() {
        let mut rng = stream_rng(2);
        for _ in 0..20 {
            let f1 = random_template(&mut rng, 2);
            let k2 = rng.random_range(1..=2);
            let f2 = random_template(&mut rng, k2);
            let g = random_host(&mut rng, 4);
            let joint = t_hom(&f1.disjoint_union(&f2).unwrap(), &g).unwrap();
            assert!((joint - t_hom(&f1, &g).unwrap() * t_hom(&f2, &g).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn set_partition_counts() {
        let bell = [1, 1, 2, 5, 15, 52];
        for (k, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(k).len(), b);
        }
        assert_eq!(set_partitions(2), vec![vec![0, 0], vec![0, 1]]);
    }

    #[test]
    fn mobius_small_cases() {
        let mut rng = stream_rng(3);
        let g = random_host(&mut rng, 4);
        let one = random_template(&mut rng, 1);
        assert!((mobius_inj(&one, &g).unwrap() - hom(&one, &g).unwrap()).abs() < 1e-12);
        let two = random_template(&mut rng, 2);
        let merged = two.quotient(&[0, 0]);
        assert!((mobius_inj(&two, &g).unwrap() - (hom(&two, &g).unwrap() - hom(&merged, &g).unwrap())).abs() < 1e-12);
        assert!(matches!(mobius_inj(&DecoratedTemplate::new(5, 2, vec![]).unwrap(), &g), Err(Error::Capacity(_))));
    }

    #[test]
    fn mobius_and_partition_identities() {
        let mut rng = stream_rng(4);
        for _ in 0..40 {
            let k = rng.random_range(1..=3);
            let f = random_template(&mut rng, k);
            let n = rng.random_range(3..=5);
            let g = random_host(&mut rng, n);
            let direct = inj(&f, &g).unwrap();
            let scale = direct.abs().max(1.0);
            assert!((mobius_inj(&f, &g).unwrap() - direct).abs() <= 1e-9 * scale);
            let h = hom(&f, &g).unwrap();
            assert!((partition_hom(&f, &g).unwrap() - h).abs() <= 1e-9 * h.abs().max(1.0));
        }
    }

    #[test]
    fn swapped_partition_identity_fails() {
        // inj(F, G) != sum_P hom(F/P, G): for one edge on two vertices the
        // right side counts the diagonal twice.
        let g = RArray::constant(2, 3, 1.0);
        let f = DecoratedTemplate::single_edge(2, vec![0, 1], Decoration::Identity).unwrap();
        let swapped: f64 = set_partitions(2).iter().map(|p| hom(&f.quotient(p), &g).unwrap()).sum();
        assert_eq!(inj(&f, &g).unwrap(), 6.0);
        assert_eq!(swapped, 12.0);
    }

    #[test]
    fn injectivity_gap() {
        let mut rng = stream_rng(5);
        for _ in 0..50 {
            let k = rng.random_range(1..=3);
            let f = random_template(&mut rng, k);
            let n = rng.random_range(3..=6);
            let g = RArray::from_fn(2, n, |_| rng.random_range(0..3) as f64 / 2.0);
            let f = DecoratedTemplate::new(
                f.k(),
                2,
                f.edges()
                    .iter()
                    .map(|e| TemplateEdge {
                        edge: e.edge.clone(),
                        decoration: match &e.decoration {
                            Decoration::Table { values, .. } => {
                                Decoration::Table { colors: vec![0.0, 0.5, 1.0], values: values.clone() }
                            }
                            d => d.clone(),
                        },
                    })
                    .collect(),
            )
            .unwrap();
            let norm = f.sup_norm_on(g.values()).unwrap();
            let gap = (t_inj(&f, &g).unwrap() - t_hom(&f, &g).unwrap()).abs();
            assert!(gap <= 2.0 * k as f64 * norm / n as f64 + 1e-12);
        }
    }

    #[test]
    fn kernel_density_matches_blown_up_graph() {
        // A uniform-step kernel is the step graphon of its value matrix.
        let mut rng = stream_rng(6);
        let g = random_host(&mut rng, 3);
        let w = graphon_of_graph(&g);
        let f = random_template(&mut rng, 3);
        assert!((t_hom_kernel(&f, &w).unwrap() - t_hom(&f, &g).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn estimate_trivial_cases() {
        let g = RArray::from_fn(2, 6, |i| ((i[0] + i[1]) % 2) as f64);
        let one = DecoratedTemplate::single_edge(2, vec![0, 1], Decoration::Constant(1.0)).unwrap();
        let rep = density_estimate(&one, DensitySource::Graph(&g), 4, 20, 1).unwrap();
        assert!(rep.estimates.iter().all(|&e| e == 1.0));
        let zero = RArray::zeros(2, 6);
        let pos = DecoratedTemplate::single_edge(
            2,
            vec![0, 1],
            Decoration::Table { colors: vec![0.0, 1.0], values: vec![0.0, 1.0] },
        )
        .unwrap();
        let rep = density_estimate(&pos, DensitySource::Graph(&zero), 4, 20, 1).unwrap();
        assert!(rep.estimates.iter().all(|&e| e == 0.0));
        assert!(density_estimate(&pos, DensitySource::Graph(&zero), 1, 1, 1).is_err());
    }

    #[test]
    fn estimate_is_unbiased_and_deterministic() {
        let w = StepKernel::new(2, vec![0.3, 0.7], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let f = DecoratedTemplate::single_edge(2, vec![0, 1], Decoration::Identity).unwrap();
        let rep = density_estimate(&f, DensitySource::Kernel(&w), 10, 400, 9).unwrap();
        assert!((rep.truth - 0.42).abs() < 1e-12);
        // Diagonal tuples see W(U, U) = 0 here, so the mean is (1 - 1/k) * t.
        let mean = rep.estimates.iter().sum::<f64>() / 400.0;
        assert!((mean - 0.9 * 0.42).abs() < 0.02, "{mean}");
        assert_eq!(rep, density_estimate(&f, DensitySource::Kernel(&w), 10, 400, 9).unwrap());
    }

    #[test]
    fn relabeling_invariance() {
        use rand::seq::SliceRandom;
        let mut rng = stream_rng(7);
        for _ in 0..10 {
            let f = random_template(&mut rng, 3);
            let g = random_host(&mut rng, 5);
            let mut perm: Vec<usize> = (0..5).collect();
            perm.shuffle(&mut rng);
            assert!((t_hom(&f, &g).unwrap() - t_hom(&f, &g.relabeled(&perm)).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_interval_tables_give_unit_interval_densities() {
        let mut rng = stream_rng(8);
        for _ in 0..20 {
            let k = rng.random_range(1..=3);
            let edges = (0..k)
                .flat_map(|a| (0..k).map(move |b| vec![a, b]))
                .map(|edge| TemplateEdge {
                    edge,
                    decoration: Decoration::Table { colors: vec![0.0, 1.0, 2.0], values: vec![0.2, 1.0, 0.0] },
                })
                .collect();
            let f = DecoratedTemplate::new(k, 2, edges).unwrap();
            let t = t_hom(&f, &random_host(&mut rng, 4)).unwrap();
            assert!((0.0..=1.0).contains(&t));
        }
    }

    #[test]
    fn polynomial_and_product_decorations() {
        let p = Decoration::Polynomial(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0).unwrap(), 1.0 - 4.0 + 12.0);
        let prod = Decoration::Product(vec![p, Decoration::Identity, Decoration::Constant(0.5)]);
        assert_eq!(prod.eval(2.0).unwrap(), 9.0 * 2.0 * 0.5);
    }
}
