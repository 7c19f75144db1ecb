//! Random d-regular graphs and the structural audits the dynamics rely on:
//! local tree-likeness of balls, spectral expansion, and the degree-counting
//! expansion properties of small vertex sets.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default restart cap for the pairing sampler.
pub const DEFAULT_RESTART_CAP: usize = 10_000;

/// Immutable simple graph stored in compressed adjacency form.
///
/// Graphs produced by [`generate_random_regular`] or parsed from the text
/// format are `d`-regular. [`Graph::from_adjacency`] builds arbitrary small
/// graphs (trees, cycles, Petersen) for oracle work; `d` is then the maximum
/// degree and `regular` reports whether every degree equals `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    d: usize,
    seed: u64,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    simple: bool,
    regular: bool,
}

impl Graph {
    /// Builds a graph from explicit neighbor lists. Adjacency must be symmetric
    /// and free of self-loops and repeated neighbors.
    pub fn from_adjacency(adjacency: Vec<Vec<u32>>, seed: u64) -> Result<Self> {
        let n = adjacency.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for (v, nbrs) in adjacency.iter().enumerate() {
            let mut seen = HashSet::with_capacity(nbrs.len());
            for &u in nbrs {
                if u as usize >= n {
                    return Err(Error::OutOfRange { index: u as usize, max: n.saturating_sub(1) });
                }
                if u as usize == v || !seen.insert(u) {
                    return Err(Error::InvalidParameter(format!("vertex {v}: self-loop or repeated neighbor {u}")));
                }
                if !adjacency[u as usize].contains(&(v as u32)) {
                    return Err(Error::InvalidParameter(format!("asymmetric edge {v}->{u}")));
                }
            }
            targets.extend_from_slice(nbrs);
            offsets.push(targets.len());
        }
        let d = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        let regular = adjacency.iter().all(|a| a.len() == d);
        Ok(Graph { n, d, seed, offsets, targets, simple: true, regular })
    }

    /// Builds a graph from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::OutOfRange { index: u.max(v) as usize, max: n.saturating_sub(1) });
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        Graph::from_adjacency(adj, 0)
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n as u32)
            .map(|v| (0..n as u32).filter(|&u| u != v).collect())
            .collect();
        Graph::from_adjacency(adj, 0).expect("complete graph is simple")
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n as u32).map(|i| (i, ((i as usize + 1) % n) as u32)).collect();
        Graph::from_edges(n, &edges).expect("cycle is simple for n >= 3")
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5u32 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Graph::from_edges(10, &edges).expect("petersen graph is simple")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_simple(&self) -> bool {
        self.simple
    }

    pub fn is_regular(&self) -> bool {
        self.regular
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).contains(&(v as u32))
    }

    /// Iterates each undirected edge once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| (u as u32) < v)
                .map(move |&v| (u as u32, v))
        })
    }

    /// Checks the regular-graph invariants: exact degree `d`, no loops,
    /// distinct neighbors, symmetric adjacency, even `n*d`.
    pub fn validate_regular(&self) -> Result<()> {
        if (self.n * self.d) % 2 != 0 {
            return Err(Error::InvalidParity { n: self.n, d: self.d });
        }
        for v in 0..self.n {
            let nb = self.neighbors(v);
            if nb.len() != self.d {
                return Err(Error::InvalidParameter(format!("vertex {v} has degree {}", nb.len())));
            }
            let mut sorted = nb.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != nb.len() || sorted.contains(&(v as u32)) {
                return Err(Error::InvalidParameter(format!("vertex {v} is not simple")));
            }
            if nb.iter().any(|&u| !self.has_edge(u as usize, v)) {
                return Err(Error::InvalidParameter(format!("vertex {v} has an asymmetric edge")));
            }
        }
        Ok(())
    }

    /// Serializes to the plain-text format: `n d seed`, then one line of
    /// neighbors per vertex.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.d, self.seed);
        for v in 0..self.n {
            let mut first = true;
            for u in self.neighbors(v) {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{u}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
        let fields: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|e| Error::Parse(format!("header: {e}"))))
            .collect::<Result<_>>()?;
        let [n, d, seed] = fields[..] else {
            return Err(Error::Parse("header must be `n d seed`".into()));
        };
        let (n, d) = (n as usize, d as usize);
        let mut adj = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let row: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2))))
                .collect::<Result<_>>()?;
            adj.push(row);
        }
        if adj.len() != n {
            return Err(Error::Parse(format!("expected {n} adjacency lines, found {}", adj.len())));
        }
        let mut g = Graph::from_adjacency(adj, seed)?;
        if g.d != d || !g.regular {
            return Err(Error::Parse(format!("graph is not {d}-regular")));
        }
        g.validate_regular()?;
        g.seed = seed;
        Ok(g)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Graph::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Samples a simple random `d`-regular graph on `n` vertices.
///
/// Half-edges are paired uniformly at random; pairs that would create a
/// self-loop or a repeated edge are returned to the pool and re-paired with a
/// fresh shuffle. The attempt restarts from scratch only when the leftover
/// half-edges admit no valid pair.
pub fn generate_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    generate_random_regular_with_cap(n, d, seed, DEFAULT_RESTART_CAP)
}

pub fn generate_random_regular_with_cap(n: usize, d: usize, seed: u64, cap: usize) -> Result<Graph> {
    if (n * d) % 2 != 0 {
        return Err(Error::InvalidParity { n, d });
    }
    if n <= d || d < 3 {
        return Err(Error::Degenerate { n, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..=cap {
        if let Some(edges) = try_pairing(n, d, &mut rng) {
            let mut adj = vec![Vec::with_capacity(d); n];
            for (u, v) in edges {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
            let g = Graph::from_adjacency(adj, seed)?;
            g.validate_regular()?;
            return Ok(g);
        }
    }
    Err(Error::RestartBudgetExceeded { restarts: cap })
}

fn try_pairing(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(u32, u32)>> {
    let mut edges: HashSet<(u32, u32)> = HashSet::with_capacity(n * d / 2);
    let mut ordered = Vec::with_capacity(n * d / 2);
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    while !stubs.is_empty() {
        let mut leftover: BTreeMap<u32, usize> = BTreeMap::new();
        stubs.shuffle(rng);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a != b && edges.insert((a, b)) {
                ordered.push((a, b));
            } else {
                *leftover.entry(a).or_default() += 1;
                *leftover.entry(b).or_default() += 1;
            }
        }
        if !leftover.is_empty() && !has_valid_pair(&leftover, &edges) {
            return None;
        }
        stubs = leftover
            .iter()
            .flat_map(|(&v, &c)| std::iter::repeat_n(v, c))
            .collect();
    }
    Some(ordered)
}

fn has_valid_pair(leftover: &BTreeMap<u32, usize>, edges: &HashSet<(u32, u32)>) -> bool {
    let verts: Vec<u32> = leftover.keys().copied().collect();
    verts.iter().enumerate().any(|(i, &a)| {
        verts[i + 1..].iter().any(|&b| !edges.contains(&(a.min(b), a.max(b))))
    })
}

/// Radius-`r` ball around a vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallReport {
    pub center: u32,
    pub radius: usize,
    /// Sorted vertex ids at distance at most `radius`.
    pub vertices: Vec<u32>,
    /// `|E| - |V| + components` of the induced subgraph.
    pub tree_excess: usize,
}

/// Vertices within distance `r` of `v`, in BFS order, paired with distances.
pub(crate) fn bfs_ball(g: &Graph, v: usize, r: usize) -> Vec<(u32, usize)> {
    let mut dist: BTreeMap<u32, usize> = BTreeMap::new();
    let mut order = vec![(v as u32, 0)];
    dist.insert(v as u32, 0);
    let mut queue = VecDeque::from([v as u32]);
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        if du == r {
            continue;
        }
        for &w in g.neighbors(u as usize) {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(du + 1);
                order.push((w, du + 1));
                queue.push_back(w);
            }
        }
    }
    order
}

/// Induced-subgraph components on `vertices`, returned as component labels
/// aligned with the input slice.
pub(crate) fn induced_components(g: &Graph, vertices: &[u32]) -> (Vec<usize>, usize) {
    let index: std::collections::HashMap<u32, usize> =
        vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut label = vec![usize::MAX; vertices.len()];
    let mut count = 0;
    for start in 0..vertices.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for w in g.neighbors(vertices[i] as usize) {
                if let Some(&j) = index.get(w) {
                    if label[j] == usize::MAX {
                        label[j] = count;
                        stack.push(j);
                    }
                }
            }
        }
        count += 1;
    }
    (label, count)
}

pub fn ball(g: &Graph, v: usize, r: usize) -> BallReport {
    let members = bfs_ball(g, v, r);
    let mut vertices: Vec<u32> = members.iter().map(|&(u, _)| u).collect();
    vertices.sort_unstable();
    let set: HashSet<u32> = vertices.iter().copied().collect();
    let edges = vertices
        .iter()
        .map(|&u| g.neighbors(u as usize).iter().filter(|w| set.contains(w)).count())
        .sum::<usize>()
        / 2;
    let (_, components) = induced_components(g, &vertices);
    BallReport {
        center: v as u32,
        radius: r,
        tree_excess: edges + components - vertices.len(),
        vertices,
    }
}

/// Ball radius `max(1, floor(ln n / (4 ln d)))`.
pub fn treelike_radius(n: usize, d: usize) -> usize {
    if n < 2 || d < 2 {
        return 1;
    }
    (((n as f64).ln() / (4.0 * (d as f64).ln())).floor() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreelikeReport {
    pub radius: usize,
    pub treelike: bool,
    pub violating_centers: Vec<u32>,
}

/// True iff every radius-`radius` ball has at most one cycle.
pub fn is_one_locally_treelike(g: &Graph, radius: usize) -> TreelikeReport {
    let violating_centers: Vec<u32> = (0..g.n())
        .filter(|&v| ball(g, v, radius).tree_excess > 1)
        .map(|v| v as u32)
        .collect();
    TreelikeReport { radius, treelike: violating_centers.is_empty(), violating_centers }
}

/// Count-vs-bound outcome of an expansion check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub count: usize,
    pub bound: f64,
    pub pass: bool,
}

fn degrees_into(g: &Graph, set: &[u32]) -> Vec<usize> {
    let mut deg = vec![0usize; g.n()];
    for &s in set {
        for &u in g.neighbors(s as usize) {
            deg[u as usize] += 1;
        }
    }
    deg
}

fn dedup_set(g: &Graph, set: &[u32]) -> Result<Vec<u32>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&last) = s.last() {
        if last as usize >= g.n() {
            return Err(Error::OutOfRange { index: last as usize, max: g.n() - 1 });
        }
    }
    Ok(s)
}

/// `|{u : deg_S(u) >= eta*d}| <= 4|S| / (d (eta-delta)^2)` for `|S| <= delta*n`.
pub fn check_degree_expansion(g: &Graph, set: &[u32], delta: f64, eta: f64) -> Result<ExpansionReport> {
    if !(0.0 < delta && delta < 0.5 && delta < eta && eta < 0.5) {
        return Err(Error::InvalidParameter(format!("need 0 < delta < eta < 1/2 (delta={delta}, eta={eta})")));
    }
    let s = dedup_set(g, set)?;
    let limit = (delta * g.n() as f64 + 1e-9).floor() as usize;
    if s.len() > limit {
        return Err(Error::SizeViolation { size: s.len(), limit });
    }
    let d = g.d() as f64;
    let threshold = eta * d;
    let count = degrees_into(g, &s).iter().filter(|&&k| k as f64 >= threshold).count();
    let bound = 4.0 * s.len() as f64 / (d * (eta - delta).powi(2));
    Ok(ExpansionReport { count, bound, pass: count as f64 <= bound })
}

/// `|{v : deg_S(v) > 3d/7}| <= |S|/3` for `|S| <= 10*gamma0*n`.
pub fn check_majority_expansion(g: &Graph, set: &[u32], gamma0: f64) -> Result<ExpansionReport> {
    let s = dedup_set(g, set)?;
    let limit = (10.0 * gamma0 * g.n() as f64 + 1e-9).floor() as usize;
    if s.len() > limit {
        return Err(Error::SizeViolation { size: s.len(), limit });
    }
    // deg > 3d/7  <=>  7*deg > 3d
    let d = g.d();
    let count = degrees_into(g, &s).iter().filter(|&&k| 7 * k > 3 * d).count();
    let bound = s.len() as f64 / 3.0;
    Ok(ExpansionReport { count, bound, pass: count as f64 <= bound })
}

/// q-part expansion: vertices whose majority towards `parts[0]` is thin.
///
/// Counts `v` with `deg_{S1}(v) <= max_{k>=2} deg_{Sk}(v) + eta*d`; the bound
/// is `8(q-1)|S1| / (d (delta-eta)^2)`.
pub fn check_partition_expansion(g: &Graph, parts: &[Vec<u32>], eta: f64, delta: f64) -> Result<ExpansionReport> {
    if !(0.0 < eta && eta < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < eta < delta < 1 (eta={eta}, delta={delta})")));
    }
    if parts.len() < 2 {
        return Err(Error::NotAPartition);
    }
    let n = g.n();
    let mut owner = vec![usize::MAX; n];
    for (k, part) in parts.iter().enumerate() {
        for &v in part {
            let v = v as usize;
            if v >= n || owner[v] != usize::MAX {
                return Err(Error::NotAPartition);
            }
            owner[v] = k;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::NotAPartition);
    }
    let s1 = parts[0].len();
    let other = parts[1..].iter().map(Vec::len).max().unwrap_or(0);
    if (s1 as f64) < other as f64 + delta * n as f64 {
        return Err(Error::MarginViolation { s1, other, margin: delta * n as f64 });
    }
    let q = parts.len();
    let d = g.d() as f64;
    let mut counts = vec![0usize; q];
    let mut bad = 0;
    for v in 0..n {
        counts.iter_mut().for_each(|c| *c = 0);
        for &u in g.neighbors(v) {
            counts[owner[u as usize]] += 1;
        }
        let best_other = counts[1..].iter().copied().max().unwrap_or(0);
        if counts[0] as f64 <= best_other as f64 + eta * d {
            bad += 1;
        }
    }
    let bound = 8.0 * (q - 1) as f64 * s1 as f64 / (d * (delta - eta).powi(2));
    Ok(ExpansionReport { count: bad, bound, pass: bad as f64 <= bound })
}

/// Result of an exhaustive expansion sweep over small vertex sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustiveReport {
    pub checked: usize,
    pub failures: usize,
    pub first_failure: Option<Vec<u32>>,
}

/// Largest `n` for which exhaustive subset sweeps are allowed.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Runs the majority expansion check over every `S` with `|S| <= max_size`.
pub fn exhaustive_majority(g: &Graph, max_size: usize, gamma0: f64) -> Result<ExhaustiveReport> {
    if g.n() > EXHAUSTIVE_LIMIT {
        return Err(Error::SizeViolation { size: g.n(), limit: EXHAUSTIVE_LIMIT });
    }
    let mut report = ExhaustiveReport { checked: 0, failures: 0, first_failure: None };
    for mask in 0u32..(1 << g.n()) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let set: Vec<u32> = (0..g.n() as u32).filter(|&i| mask >> i & 1 == 1).collect();
        let r = check_majority_expansion(g, &set, gamma0)?;
        report.checked += 1;
        if !r.pass {
            report.failures += 1;
            report.first_failure.get_or_insert(set);
        }
    }
    Ok(report)
}

/// Runs the two-part partition check over every bipartition meeting the margin.
pub fn exhaustive_bipartitions(g: &Graph, eta: f64, delta: f64) -> Result<ExhaustiveReport> {
    if g.n() > EXHAUSTIVE_LIMIT {
        return Err(Error::SizeViolation { size: g.n(), limit: EXHAUSTIVE_LIMIT });
    }
    let n = g.n();
    let mut report = ExhaustiveReport { checked: 0, failures: 0, first_failure: None };
    for mask in 0u32..(1 << n) {
        let s1: Vec<u32> = (0..n as u32).filter(|&i| mask >> i & 1 == 1).collect();
        let s2: Vec<u32> = (0..n as u32).filter(|&i| mask >> i & 1 == 0).collect();
        if (s1.len() as f64) < s2.len() as f64 + delta * n as f64 {
            continue;
        }
        let r = check_partition_expansion(g, &[s1.clone(), s2], eta, delta)?;
        report.checked += 1;
        if !r.pass {
            report.failures += 1;
            report.first_failure.get_or_insert(s1);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda2Estimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest-magnitude eigenvalue of `A - (d/n) 11^T` by power iteration on the
/// complement of the all-ones vector. The start vector is a fixed function of
/// the graph seed.
pub fn estimate_lambda2(g: &Graph, iters: usize, tol: f64) -> Lambda2Estimate {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed() ^ 0x5eed_1a2b_3c4d_5e6f);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let project = |x: &mut [f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|xi| *xi -= mean);
        let norm = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|xi| *xi /= norm);
        }
        norm
    };
    project(&mut x);
    let mut y = vec![0.0; n];
    let mut prev = f64::NAN;
    let iters = iters.max(1);
    for it in 1..=iters {
        for (v, yv) in y.iter_mut().enumerate() {
            *yv = g.neighbors(v).iter().map(|&u| x[u as usize]).sum();
        }
        let value = project(&mut y);
        std::mem::swap(&mut x, &mut y);
        if (value - prev).abs() <= tol * value.max(1.0) {
            return Lambda2Estimate { value, iterations: it, converged: true };
        }
        prev = value;
    }
    Lambda2Estimate { value: prev, iterations: iters, converged: false }
}

/// Uniformly random subset of `size` vertices.
pub fn random_subset<R: Rng>(g: &Graph, size: usize, rng: &mut R) -> Vec<u32> {
    let mut s: Vec<u32> = rand::seq::index::sample(rng, g.n(), size.min(g.n()))
        .into_iter()
        .map(|i| i as u32)
        .collect();
    s.sort_unstable();
    s
}

/// One sampled set and the outcome of an expansion check on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionAudit {
    pub check: &'static str,
    pub shape: &'static str,
    pub size: usize,
    pub report: ExpansionReport,
}

/// First `size` vertices reached by breadth-first search from `root`.
fn bfs_prefix(g: &Graph, root: usize, size: usize) -> Vec<u32> {
    let mut seen = HashSet::from([root as u32]);
    let mut queue = VecDeque::from([root as u32]);
    let mut out = Vec::with_capacity(size);
    while let Some(v) = queue.pop_front() {
        out.push(v);
        if out.len() == size {
            break;
        }
        for &w in g.neighbors(v as usize) {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Degree, majority and 3-partition expansion on `samples` random sets and
/// `samples` breadth-first balls of each admissible size class.
///
/// Degree uses `delta = 0.1, eta = 0.3`; majority uses `gamma0 = 0.01`;
/// partitions put 60% of the vertices in the first part and use
/// `eta = 0.05, delta = 0.3`.
pub fn sampled_expansion_audit(g: &Graph, samples: usize, seed: u64) -> Result<Vec<ExpansionAudit>> {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let degree_max = (0.1 * n as f64 + 1e-9).floor() as usize;
    let majority_max = (10.0 * 0.01 * n as f64 + 1e-9).floor() as usize;
    for _ in 0..samples {
        for (check, max) in [("degree", degree_max), ("majority", majority_max)] {
            if max == 0 {
                continue;
            }
            let size = rng.random_range(1..=max);
            let random = random_subset(g, size, &mut rng);
            let ball = bfs_prefix(g, rng.random_range(0..n), size);
            for (shape, set) in [("random", random), ("ball", ball)] {
                let report = match check {
                    "degree" => check_degree_expansion(g, &set, 0.1, 0.3)?,
                    _ => check_majority_expansion(g, &set, 0.01)?,
                };
                out.push(ExpansionAudit { check, shape, size: set.len(), report });
            }
        }
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut rng);
        let first = (0.6 * n as f64).ceil() as usize;
        let second = first + (n - first) / 2;
        let parts = vec![perm[..first].to_vec(), perm[first..second].to_vec(), perm[second..].to_vec()];
        let report = check_partition_expansion(g, &parts, 0.05, 0.3)?;
        out.push(ExpansionAudit { check: "partition", shape: "random", size: first, report });
    }
    Ok(out)
}

/// Random recursive tree: vertex `i` attaches to a uniform earlier vertex.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Graph {
    let edges: Vec<(u32, u32)> = (1..n as u32).map(|i| (rng.random_range(0..i), i)).collect();
    Graph::from_edges(n, &edges).expect("tree edges are in range")
}

/// Connected vertex set grown from a uniform root by adding uniform boundary
/// vertices until it has `size` members or cannot grow.
pub fn random_connected_subset<R: Rng>(g: &Graph, size: usize, rng: &mut R) -> Vec<u32> {
    if g.n() == 0 || size == 0 {
        return Vec::new();
    }
    let root = rng.random_range(0..g.n()) as u32;
    let mut inside: HashSet<u32> = HashSet::from([root]);
    let mut boundary: Vec<u32> = g.neighbors(root as usize).to_vec();
    while inside.len() < size && !boundary.is_empty() {
        let v = boundary.swap_remove(rng.random_range(0..boundary.len()));
        if inside.insert(v) {
            boundary.extend(g.neighbors(v as usize).iter().filter(|w| !inside.contains(w)));
        }
    }
    let mut out: Vec<u32> = inside.into_iter().collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n4_d3_is_k4() {
        for seed in 0..5 {
            let g = generate_random_regular(4, 3, seed).unwrap();
            assert_eq!(g.edge_count(), 6);
            for v in 0..4 {
                let mut nb = g.neighbors(v).to_vec();
                nb.sort();
                let expect: Vec<u32> = (0..4).filter(|&u| u != v as u32).collect();
                assert_eq!(nb, expect);
            }
        }
    }

    #[test]
    fn parity_and_degenerate_errors() {
        assert_eq!(generate_random_regular(5, 3, 1), Err(Error::InvalidParity { n: 5, d: 3 }));
        assert_eq!(generate_random_regular(4, 4, 1), Err(Error::Degenerate { n: 4, d: 4 }));
        assert_eq!(generate_random_regular(2, 3, 1), Err(Error::Degenerate { n: 2, d: 3 }));
    }

    #[test]
    fn degree_histogram_n1000_d7() {
        let g = generate_random_regular(1000, 7, 1).unwrap();
        let mut hist = BTreeMap::new();
        for v in 0..g.n() {
            *hist.entry(g.neighbors(v).len()).or_insert(0) += 1;
        }
        assert_eq!(hist, BTreeMap::from([(7, 1000)]));
        g.validate_regular().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_regular(200, 5, 42).unwrap();
        let b = generate_random_regular(200, 5, 42).unwrap();
        let c = generate_random_regular(200, 5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn text_roundtrip() {
        let g = generate_random_regular(30, 3, 9).unwrap();
        let h = Graph::from_text(&g.to_text()).unwrap();
        assert_eq!(g, h);
        assert!(Graph::from_text("3 2 0\n1 2\n0\n0 1\n").is_err());
    }

    #[test]
    fn ball_examples() {
        let k4 = Graph::complete(4);
        let b = ball(&k4, 0, 1);
        assert_eq!(b.vertices, vec![0, 1, 2, 3]);
        assert_eq!(b.tree_excess, 3);
        let b0 = ball(&k4, 2, 0);
        assert_eq!(b0.vertices, vec![2]);
        assert_eq!(b0.tree_excess, 0);
        let c6 = Graph::cycle(6);
        let b = ball(&c6, 0, 2);
        assert_eq!(b.vertices, vec![0, 1, 2, 4, 5]);
        assert_eq!(b.tree_excess, 0);
        assert_eq!(ball(&c6, 0, 3).tree_excess, 1);
    }

    #[test]
    fn treelike_examples() {
        let k4 = Graph::complete(4);
        let r = is_one_locally_treelike(&k4, 1);
        assert!(!r.treelike);
        assert_eq!(r.violating_centers, vec![0, 1, 2, 3]);
        let path = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (2, 4)]).unwrap();
        for radius in 0..5 {
            assert!(is_one_locally_treelike(&path, radius).treelike);
        }
    }

    #[test]
    fn radius_formula() {
        assert_eq!(treelike_radius(1000, 7), 1);
        assert_eq!(treelike_radius(10_000, 3), 2);
        assert_eq!(treelike_radius(7usize.pow(8), 7), 2);
    }

    #[test]
    fn expansion_examples() {
        let k4 = Graph::complete(4);
        let r = check_degree_expansion(&k4, &[], 0.25, 0.4).unwrap();
        assert_eq!((r.count, r.pass), (0, true));
        let r = check_degree_expansion(&k4, &[0], 0.25, 0.4).unwrap();
        assert_eq!((r.count, r.pass), (0, true));
        assert!(matches!(
            check_degree_expansion(&k4, &[0, 1], 0.25, 0.4),
            Err(Error::SizeViolation { .. })
        ));
        let g = generate_random_regular(100, 7, 3).unwrap();
        let r = check_majority_expansion(&g, &[], 0.01).unwrap();
        assert_eq!((r.count, r.pass), (0, true));
        let big: Vec<u32> = (0..11).collect();
        assert!(check_majority_expansion(&g, &big, 0.01).is_err());
        assert!(check_majority_expansion(&g, &big[..10], 0.01).is_ok());
    }

    #[test]
    fn partition_examples() {
        let g = generate_random_regular(50, 4, 2).unwrap();
        let all: Vec<u32> = (0..50).collect();
        let r = check_partition_expansion(&g, &[all.clone(), vec![]], 0.1, 0.5).unwrap();
        assert_eq!((r.count, r.pass), (0, true));
        assert_eq!(
            check_partition_expansion(&g, &[all[..10].to_vec(), all[5..].to_vec()], 0.1, 0.5),
            Err(Error::NotAPartition)
        );
        assert!(matches!(
            check_partition_expansion(&g, &[all[..25].to_vec(), all[25..].to_vec()], 0.1, 0.5),
            Err(Error::MarginViolation { .. })
        ));
    }

    fn exact_abs_spectrum_cycle(n: usize) -> f64 {
        (1..n)
            .map(|k| (2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn lambda2_small_spectra() {
        for d in 3..7 {
            let g = Graph::complete(d + 1);
            let est = estimate_lambda2(&g, 2000, 1e-12);
            assert!((est.value - 1.0).abs() < 1e-6, "K_{}: {}", d + 1, est.value);
        }
        for n in [7, 8, 9, 11] {
            let est = estimate_lambda2(&Graph::cycle(n), 20_000, 1e-14);
            let exact = exact_abs_spectrum_cycle(n);
            assert!((est.value - exact).abs() < 1e-6, "C_{n}: {} vs {exact}", est.value);
        }
        assert!((exact_abs_spectrum_cycle(9) - 2.0 * (std::f64::consts::PI / 9.0).cos()).abs() < 1e-12);
    }
}
