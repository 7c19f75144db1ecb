//! Minus spacetime clusters of a single trajectory.
//!
//! Each live cluster keeps its present slice (the minus *region*), its vertex
//! projection (every vertex that has ever belonged to it) and a legacy flag
//! marking descent from the initial minus set. Flips drive the store: a
//! plus-to-minus flip merges every region adjacent to the flipped vertex, a
//! minus-to-plus flip shrinks one region and may kill its cluster.

use std::collections::HashSet;

use serde::Serialize;

use crate::dynamics::{Spin, TwoSpinConfig, MINUS};
use crate::error::{Error, Result};
use crate::graph::{bfs_ball, Graph};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    /// Present slice; order is insertion order with swap-removal.
    pub region: Vec<u32>,
    pub projection: HashSet<u32>,
    pub legacy: bool,
    pub birth_time: f64,
    pub death_time: Option<f64>,
    /// Largest region size reached so far.
    pub peak_region: usize,
}

/// Archived row for a cluster whose region emptied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub id: u32,
    pub legacy: bool,
    pub birth_time: f64,
    pub death_time: f64,
    pub peak_region: usize,
    pub projection_size: usize,
}

/// One observer row: `t, n_minus, n_clusters, legacy_size, legacy_alive, max_region, max_projection`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreSnapshot {
    pub t: f64,
    pub n_minus: usize,
    pub n_clusters: usize,
    pub legacy_size: usize,
    pub legacy_alive: usize,
    pub max_region: usize,
    pub max_projection: usize,
}

impl StoreSnapshot {
    pub const CSV_HEADER: &'static str = "t,n_minus,n_clusters,legacy_size,legacy_alive,max_region,max_projection";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t, self.n_minus, self.n_clusters, self.legacy_size, self.legacy_alive, self.max_region, self.max_projection
        )
    }
}

/// Violation counters from a full consistency scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScanViolations {
    pub partition: u64,
    pub distance: u64,
    pub projection: u64,
    pub counters: u64,
}

impl ScanViolations {
    pub fn total(&self) -> u64 {
        self.partition + self.distance + self.projection + self.counters
    }

    pub fn add(&mut self, other: ScanViolations) {
        self.partition += other.partition;
        self.distance += other.distance;
        self.projection += other.projection;
        self.counters += other.counters;
    }
}

#[derive(Debug, Clone)]
pub struct ClusterStore {
    cluster_of: Vec<u32>,
    pos: Vec<u32>,
    clusters: Vec<Option<ClusterRecord>>,
    dead: Vec<ClusterSummary>,
    live: usize,
    legacy_alive: usize,
    legacy_size: usize,
    minus_count: usize,
    max_projection_ever: usize,
    max_region_ever: usize,
}

impl ClusterStore {
    /// Empty store for an all-plus configuration.
    pub fn new(n: usize) -> Self {
        ClusterStore {
            cluster_of: vec![NONE; n],
            pos: vec![0; n],
            clusters: Vec::new(),
            dead: Vec::new(),
            live: 0,
            legacy_alive: 0,
            legacy_size: 0,
            minus_count: 0,
            max_projection_ever: 0,
            max_region_ever: 0,
        }
    }

    /// Store for an initial configuration: every connected component of the
    /// minus set becomes one legacy cluster born at time 0.
    pub fn init(g: &Graph, x0: &TwoSpinConfig) -> Self {
        let mut store = ClusterStore::new(g.n());
        for v in 0..g.n() {
            if x0.get(v) != MINUS || store.cluster_of[v] != NONE {
                continue;
            }
            let id = store.clusters.len() as u32;
            let mut region = Vec::new();
            let mut stack = vec![v as u32];
            store.cluster_of[v] = id;
            while let Some(u) = stack.pop() {
                store.pos[u as usize] = region.len() as u32;
                region.push(u);
                for &w in g.neighbors(u as usize) {
                    if x0.get(w as usize) == MINUS && store.cluster_of[w as usize] == NONE {
                        store.cluster_of[w as usize] = id;
                        stack.push(w);
                    }
                }
            }
            let size = region.len();
            store.clusters.push(Some(ClusterRecord {
                projection: region.iter().copied().collect(),
                region,
                legacy: true,
                birth_time: 0.0,
                death_time: None,
                peak_region: size,
            }));
            store.live += 1;
            store.legacy_alive += 1;
            store.legacy_size += size;
            store.minus_count += size;
            store.max_projection_ever = store.max_projection_ever.max(size);
            store.max_region_ever = store.max_region_ever.max(size);
        }
        store
    }

    pub fn n(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn cluster_id(&self, v: usize) -> Option<u32> {
        match self.cluster_of[v] {
            NONE => None,
            id => Some(id),
        }
    }

    pub fn is_minus(&self, v: usize) -> bool {
        self.cluster_of[v] != NONE
    }

    pub fn record(&self, id: u32) -> Option<&ClusterRecord> {
        self.clusters.get(id as usize).and_then(Option::as_ref)
    }

    /// Region containing `v`; empty when `v` is plus.
    pub fn region_of(&self, v: usize) -> &[u32] {
        self.cluster_id(v)
            .and_then(|id| self.record(id))
            .map(|r| r.region.as_slice())
            .unwrap_or(&[])
    }

    pub fn live_clusters(&self) -> impl Iterator<Item = (u32, &ClusterRecord)> {
        self.clusters
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i as u32, c)))
    }

    pub fn dead_clusters(&self) -> &[ClusterSummary] {
        &self.dead
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn minus_count(&self) -> usize {
        self.minus_count
    }

    pub fn legacy_alive(&self) -> usize {
        self.legacy_alive
    }

    pub fn legacy_size(&self) -> usize {
        self.legacy_size
    }

    pub fn legacy_extinct(&self) -> bool {
        self.legacy_alive == 0
    }

    /// `v` belongs to a region of a legacy cluster.
    pub fn in_legacy(&self, v: usize) -> bool {
        self.cluster_id(v)
            .and_then(|id| self.record(id))
            .is_some_and(|r| r.legacy)
    }

    /// Union of legacy regions, sorted.
    pub fn legacy_region(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .live_clusters()
            .filter(|(_, c)| c.legacy)
            .flat_map(|(_, c)| c.region.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Largest projection among live clusters.
    pub fn max_projection_size(&self) -> usize {
        self.live_clusters().map(|(_, c)| c.projection.len()).max().unwrap_or(0)
    }

    /// Largest projection any cluster has reached, live or dead.
    pub fn max_projection_ever(&self) -> usize {
        self.max_projection_ever
    }

    pub fn max_region_ever(&self) -> usize {
        self.max_region_ever
    }

    pub fn max_region_size(&self) -> usize {
        self.live_clusters().map(|(_, c)| c.region.len()).max().unwrap_or(0)
    }

    /// Some projection has reached size `radius`. Projections only grow
    /// while their cluster lives, so the running maximum decides this.
    pub fn tau_r_reached(&self, radius: usize) -> bool {
        self.max_projection_ever >= radius
    }

    pub fn snapshot(&self, t: f64) -> StoreSnapshot {
        StoreSnapshot {
            t,
            n_minus: self.minus_count,
            n_clusters: self.live,
            legacy_size: self.legacy_size,
            legacy_alive: self.legacy_alive,
            max_region: self.max_region_size(),
            max_projection: self.max_projection_size(),
        }
    }

    /// Records `v` turning minus at time `t`; returns the id of the cluster
    /// now holding `v`.
    pub fn on_flip_to_minus(&mut self, g: &Graph, v: usize, t: f64) -> Result<u32> {
        if self.cluster_of[v] != NONE {
            return Err(Error::DoubleMinus(v as u32));
        }
        let mut ids: Vec<u32> = g
            .neighbors(v)
            .iter()
            .map(|&w| self.cluster_of[w as usize])
            .filter(|&id| id != NONE)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        self.minus_count += 1;

        if ids.is_empty() {
            let id = self.clusters.len() as u32;
            let legacy = t == 0.0;
            self.clusters.push(Some(ClusterRecord {
                region: vec![v as u32],
                projection: HashSet::from([v as u32]),
                legacy,
                birth_time: t,
                death_time: None,
                peak_region: 1,
            }));
            self.cluster_of[v] = id;
            self.pos[v] = 0;
            self.live += 1;
            if legacy {
                self.legacy_alive += 1;
                self.legacy_size += 1;
            }
            self.max_projection_ever = self.max_projection_ever.max(1);
            self.max_region_ever = self.max_region_ever.max(1);
            return Ok(id);
        }

        // Largest region absorbs the rest; ties go to the smallest id.
        let target = *ids
            .iter()
            .max_by(|&&a, &&b| {
                let (ra, rb) = (self.record(a).unwrap().region.len(), self.record(b).unwrap().region.len());
                ra.cmp(&rb).then(b.cmp(&a))
            })
            .unwrap();
        let mut merged = self.clusters[target as usize].take().unwrap();
        let mut legacy_before = merged.legacy as usize;
        let mut legacy_mass_before = if merged.legacy { merged.region.len() } else { 0 };
        for &id in ids.iter().filter(|&&id| id != target) {
            let mut other = self.clusters[id as usize].take().unwrap();
            if other.legacy {
                legacy_before += 1;
                legacy_mass_before += other.region.len();
            }
            for &u in &other.region {
                self.cluster_of[u as usize] = target;
                self.pos[u as usize] = merged.region.len() as u32;
                merged.region.push(u);
            }
            if other.projection.len() > merged.projection.len() {
                std::mem::swap(&mut other.projection, &mut merged.projection);
            }
            merged.projection.extend(other.projection.drain());
            merged.legacy |= other.legacy;
            merged.birth_time = merged.birth_time.min(other.birth_time);
            merged.peak_region = merged.peak_region.max(other.peak_region);
            self.live -= 1;
        }
        self.cluster_of[v] = target;
        self.pos[v] = merged.region.len() as u32;
        merged.region.push(v as u32);
        merged.projection.insert(v as u32);
        merged.peak_region = merged.peak_region.max(merged.region.len());

        self.legacy_alive -= legacy_before;
        self.legacy_size -= legacy_mass_before;
        if merged.legacy {
            self.legacy_alive += 1;
            self.legacy_size += merged.region.len();
        }
        self.max_projection_ever = self.max_projection_ever.max(merged.projection.len());
        self.max_region_ever = self.max_region_ever.max(merged.region.len());
        self.clusters[target as usize] = Some(merged);
        Ok(target)
    }

    /// Records `v` turning plus at time `t`.
    pub fn on_flip_to_plus(&mut self, v: usize, t: f64) -> Result<()> {
        let id = self.cluster_of[v];
        if id == NONE {
            return Err(Error::DoublePlus(v as u32));
        }
        let rec = self.clusters[id as usize].as_mut().expect("live cluster");
        let p = self.pos[v] as usize;
        rec.region.swap_remove(p);
        if let Some(&moved) = rec.region.get(p) {
            self.pos[moved as usize] = p as u32;
        }
        self.cluster_of[v] = NONE;
        self.minus_count -= 1;
        if rec.legacy {
            self.legacy_size -= 1;
        }
        if rec.region.is_empty() {
            rec.death_time = Some(t);
            let rec = self.clusters[id as usize].take().unwrap();
            self.live -= 1;
            if rec.legacy {
                self.legacy_alive -= 1;
            }
            self.dead.push(ClusterSummary {
                id,
                legacy: rec.legacy,
                birth_time: rec.birth_time,
                death_time: t,
                peak_region: rec.peak_region,
                projection_size: rec.projection.len(),
            });
        }
        Ok(())
    }

    /// Applies a spin change at `v` to the store.
    pub fn apply_flip(&mut self, g: &Graph, v: usize, old: Spin, new: Spin, t: f64) -> Result<()> {
        match (old, new) {
            (a, b) if a == b => Ok(()),
            (_, MINUS) => self.on_flip_to_minus(g, v, t).map(|_| ()),
            _ => self.on_flip_to_plus(v, t),
        }
    }

    /// `v` is a trifurcation point of its own region at ball radius `radius`.
    pub fn is_trifurcation(&self, g: &Graph, v: usize, radius: usize, scratch: &mut BallScratch) -> bool {
        let id = self.cluster_of[v];
        if id == NONE {
            return false;
        }
        scratch.branches_hitting(g, v, radius, 3, |u| self.cluster_of[u as usize] == id) >= 3
    }

    /// Full consistency scan against the chain's configuration.
    pub fn scan(&self, g: &Graph, cfg: &TwoSpinConfig) -> ScanViolations {
        let mut out = ScanViolations::default();
        let mut minus = 0;
        for v in 0..g.n() {
            let is_minus = cfg.get(v) == MINUS;
            minus += is_minus as usize;
            if is_minus != (self.cluster_of[v] != NONE) {
                out.partition += 1;
            }
        }
        let mut region_total = 0;
        let mut legacy_alive = 0;
        let mut legacy_size = 0;
        for (id, rec) in self.live_clusters() {
            region_total += rec.region.len();
            if rec.region.is_empty() || rec.death_time.is_some() {
                out.partition += 1;
            }
            if rec.legacy {
                legacy_alive += 1;
                legacy_size += rec.region.len();
            }
            for (i, &u) in rec.region.iter().enumerate() {
                if self.cluster_of[u as usize] != id || self.pos[u as usize] as usize != i {
                    out.partition += 1;
                }
                if !rec.projection.contains(&u) {
                    out.projection += 1;
                }
            }
            if !projection_connected(g, &rec.projection) {
                out.projection += 1;
            }
        }
        if region_total != minus || self.minus_count != minus || self.live != self.live_clusters().count() {
            out.counters += 1;
        }
        if legacy_alive != self.legacy_alive || legacy_size != self.legacy_size {
            out.counters += 1;
        }
        for (u, w) in g.edges() {
            let (a, b) = (self.cluster_of[u as usize], self.cluster_of[w as usize]);
            if a != NONE && b != NONE && a != b {
                out.distance += 1;
            }
        }
        out
    }
}

fn projection_connected(g: &Graph, set: &HashSet<u32>) -> bool {
    let Some(&start) = set.iter().next() else {
        return true;
    };
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &w in g.neighbors(u as usize) {
            if set.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == set.len()
}

/// Reusable marks for bounded ball searches.
#[derive(Debug, Clone)]
pub struct BallScratch {
    stamp: Vec<u32>,
    label: Vec<u32>,
    epoch: u32,
    members: Vec<u32>,
    stack: Vec<u32>,
}

impl BallScratch {
    pub fn new(n: usize) -> Self {
        BallScratch { stamp: vec![0; n], label: vec![0; n], epoch: 0, members: Vec::new(), stack: Vec::new() }
    }

    fn bump(&mut self) -> u32 {
        if self.epoch == u32::MAX {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.epoch
    }

    /// Number of connected components of `B_radius(v) \ {v}` containing a
    /// vertex accepted by `in_set`, counted up to `stop_at`.
    pub fn branches_hitting<F: Fn(u32) -> bool>(
        &mut self,
        g: &Graph,
        v: usize,
        radius: usize,
        stop_at: usize,
        in_set: F,
    ) -> usize {
        if radius == 0 {
            return 0;
        }
        // Ball membership by BFS layers.
        let ball = self.bump();
        self.members.clear();
        self.stamp[v] = ball;
        self.members.push(v as u32);
        let mut frontier_start = 0;
        for _ in 0..radius {
            let frontier_end = self.members.len();
            for i in frontier_start..frontier_end {
                let u = self.members[i];
                for &w in g.neighbors(u as usize) {
                    if self.stamp[w as usize] != ball {
                        self.stamp[w as usize] = ball;
                        self.members.push(w);
                    }
                }
            }
            frontier_start = frontier_end;
        }
        // Components of the ball minus the center; each one meets a neighbor.
        let mut hits = 0;
        let mut next_label = 1u32;
        for i in 0..g.degree(v) {
            let root = g.neighbors(v)[i];
            if self.label_of(root, ball) != 0 {
                continue;
            }
            let mut touches = false;
            self.stack.clear();
            self.stack.push(root);
            self.set_label(root, next_label);
            while let Some(u) = self.stack.pop() {
                touches |= in_set(u);
                for &w in g.neighbors(u as usize) {
                    if w as usize != v && self.stamp[w as usize] == ball && self.label[w as usize] == 0 {
                        self.set_label(w, next_label);
                        self.stack.push(w);
                    }
                }
            }
            next_label += 1;
            if touches {
                hits += 1;
                if hits >= stop_at {
                    break;
                }
            }
        }
        // Clear labels for the next call.
        for &u in &self.members {
            self.label[u as usize] = 0;
        }
        hits
    }

    fn label_of(&self, u: u32, ball: u32) -> u32 {
        debug_assert_eq!(self.stamp[u as usize], ball);
        self.label[u as usize]
    }

    fn set_label(&mut self, u: u32, l: u32) {
        self.label[u as usize] = l;
    }
}

/// Trifurcation points of an arbitrary vertex set, straight from the
/// definition: `v` in `set` with at least three components of
/// `B_radius(v) \ {v}` meeting `set`.
pub fn trifurcation_points(g: &Graph, set: &[u32], radius: usize) -> Vec<u32> {
    let members: HashSet<u32> = set.iter().copied().collect();
    let mut out: Vec<u32> = members
        .iter()
        .copied()
        .filter(|&v| {
            let ball: Vec<u32> = bfs_ball(g, v as usize, radius)
                .into_iter()
                .map(|(u, _)| u)
                .filter(|&u| u != v)
                .collect();
            let (label, count) = crate::graph::induced_components(g, &ball);
            let mut hit = vec![false; count];
            for (i, &u) in ball.iter().enumerate() {
                if members.contains(&u) {
                    hit[label[i]] = true;
                }
            }
            hit.iter().filter(|&&h| h).count() >= 3
        })
        .collect();
    out.sort_unstable();
    out
}

/// Counters for the two local structure laws of the rigid chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StructureViolations {
    /// Minus non-trifurcation vertex with four or more minus neighbors.
    pub minus_nontri: u64,
    /// Plus vertex with four or more neighbors in one small-projection region.
    pub plus_adjacent: u64,
}

impl StructureViolations {
    pub fn total(&self) -> u64 {
        self.minus_nontri + self.plus_adjacent
    }
}

/// Scans the rigid chain for the local structure laws. Vertices whose own
/// ball has more than one cycle (`local_ok[v] == false`) are skipped; the plus
/// law is only asserted for regions whose projection has at most `radius`
/// vertices.
pub fn rigid_structure_violations(
    store: &ClusterStore,
    g: &Graph,
    radius: usize,
    local_ok: &[bool],
    scratch: &mut BallScratch,
) -> StructureViolations {
    let mut out = StructureViolations::default();
    let mut plus_seen: HashSet<u32> = HashSet::new();
    for (_, rec) in store.live_clusters() {
        for &v in &rec.region {
            let vu = v as usize;
            if local_ok[vu] {
                let minus_nbrs = g.neighbors(vu).iter().filter(|&&w| store.is_minus(w as usize)).count();
                if minus_nbrs > 3 && !store.is_trifurcation(g, vu, radius, scratch) {
                    out.minus_nontri += 1;
                }
            }
            for &w in g.neighbors(vu) {
                if !store.is_minus(w as usize) {
                    plus_seen.insert(w);
                }
            }
        }
    }
    let mut plus: Vec<u32> = plus_seen.into_iter().collect();
    plus.sort_unstable();
    for v in plus {
        if !local_ok[v as usize] {
            continue;
        }
        let mut per_cluster: Vec<(u32, usize)> = Vec::new();
        for &w in g.neighbors(v as usize) {
            if let Some(id) = store.cluster_id(w as usize) {
                match per_cluster.iter_mut().find(|(c, _)| *c == id) {
                    Some((_, k)) => *k += 1,
                    None => per_cluster.push((id, 1)),
                }
            }
        }
        for (id, k) in per_cluster {
            let small = store.record(id).is_some_and(|r| r.projection.len() <= radius);
            if small && k > 3 {
                out.plus_adjacent += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{TwoSpinConfig, PLUS};

    fn cfg_with_minus(n: usize, minus: &[usize]) -> TwoSpinConfig {
        let mut c = TwoSpinConfig::all_plus(n);
        for &v in minus {
            c.set(v, MINUS);
        }
        c
    }

    #[test]
    fn init_examples() {
        let g = Graph::cycle(8);
        let s = ClusterStore::init(&g, &TwoSpinConfig::all_plus(8));
        assert_eq!((s.live_count(), s.legacy_alive()), (0, 0));
        assert!(s.legacy_extinct());

        let s = ClusterStore::init(&g, &cfg_with_minus(8, &[3]));
        assert_eq!(s.live_count(), 1);
        let id = s.cluster_id(3).unwrap();
        let rec = s.record(id).unwrap();
        assert_eq!(rec.region, vec![3]);
        assert_eq!(rec.projection, HashSet::from([3]));
        assert!(rec.legacy);

        let s = ClusterStore::init(&g, &cfg_with_minus(8, &[1, 2]));
        assert_eq!(s.live_count(), 1);
        let s = ClusterStore::init(&g, &cfg_with_minus(8, &[1, 3]));
        assert_eq!(s.live_count(), 2);
    }

    #[test]
    fn flip_to_minus_cases() {
        let g = Graph::cycle(10);
        let mut s = ClusterStore::new(10);
        let a = s.on_flip_to_minus(&g, 2, 0.5).unwrap();
        assert!(!s.record(a).unwrap().legacy);
        assert_eq!(s.on_flip_to_minus(&g, 2, 0.6), Err(Error::DoubleMinus(2)));

        // Legacy cluster at 4 and fresh cluster at 2, joined through 3.
        let mut s = ClusterStore::init(&g, &cfg_with_minus(10, &[4]));
        s.on_flip_to_minus(&g, 2, 1.0).unwrap();
        assert_eq!(s.live_count(), 2);
        let id = s.on_flip_to_minus(&g, 3, 2.0).unwrap();
        assert_eq!(s.live_count(), 1);
        let rec = s.record(id).unwrap();
        assert!(rec.legacy);
        let mut region = rec.region.clone();
        region.sort();
        assert_eq!(region, vec![2, 3, 4]);
        assert_eq!(rec.birth_time, 0.0);
        assert_eq!(s.legacy_size(), 3);
        assert_eq!(s.legacy_alive(), 1);
    }

    #[test]
    fn same_cluster_neighbors_merge_once() {
        // Triangle 0-1-2: 0 and 1 minus (one cluster), then 2 flips.
        let g = Graph::complete(3);
        let mut s = ClusterStore::init(&g, &cfg_with_minus(3, &[0, 1]));
        let id = s.on_flip_to_minus(&g, 2, 1.0).unwrap();
        assert_eq!(s.live_count(), 1);
        assert_eq!(s.record(id).unwrap().region.len(), 3);
        assert_eq!(s.max_projection_ever(), 3);
    }

    #[test]
    fn flip_to_plus_cases() {
        let g = Graph::cycle(6);
        let mut s = ClusterStore::init(&g, &cfg_with_minus(6, &[0]));
        assert_eq!(s.on_flip_to_plus(1, 0.1), Err(Error::DoublePlus(1)));
        s.on_flip_to_plus(0, 0.7).unwrap();
        assert_eq!(s.live_count(), 0);
        assert_eq!(s.legacy_alive(), 0);
        assert!(s.legacy_extinct());
        assert_eq!(s.dead_clusters()[0].death_time, 0.7);

        let mut s = ClusterStore::init(&g, &cfg_with_minus(6, &[0, 1]));
        s.on_flip_to_plus(0, 0.2).unwrap();
        let id = s.cluster_id(1).unwrap();
        let rec = s.record(id).unwrap();
        assert_eq!(rec.region, vec![1]);
        assert_eq!(rec.projection.len(), 2);
        assert_eq!(s.legacy_size(), 1);
    }

    #[test]
    fn scripted_legacy_extinction() {
        // One initial minus flips plus before any neighbor turns minus.
        let g = Graph::cycle(5);
        let mut s = ClusterStore::init(&g, &cfg_with_minus(5, &[2]));
        assert!(!s.legacy_extinct());
        s.on_flip_to_minus(&g, 0, 0.3).unwrap();
        assert!(!s.legacy_extinct());
        s.on_flip_to_plus(2, 0.4).unwrap();
        assert!(s.legacy_extinct());
        assert_eq!(s.legacy_region(), Vec::<u32>::new());
        assert_eq!(s.live_count(), 1);
    }

    #[test]
    fn projection_union_sizes() {
        // Path 0-1-2-3-4-5-6; projections {0,1} and {3,4,5} join via 2.
        let edges: Vec<(u32, u32)> = (0..6).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(7, &edges).unwrap();
        let mut s = ClusterStore::new(7);
        s.on_flip_to_minus(&g, 0, 0.1).unwrap();
        s.on_flip_to_minus(&g, 1, 0.2).unwrap();
        s.on_flip_to_minus(&g, 3, 0.3).unwrap();
        s.on_flip_to_minus(&g, 4, 0.4).unwrap();
        s.on_flip_to_minus(&g, 5, 0.5).unwrap();
        s.on_flip_to_plus(5, 0.6).unwrap();
        assert_eq!(s.max_projection_size(), 3);
        let id = s.on_flip_to_minus(&g, 2, 0.7).unwrap();
        assert_eq!(s.record(id).unwrap().projection.len(), 2 + 3 + 1);
        assert!(s.tau_r_reached(6));
        assert!(!s.tau_r_reached(7));
        let empty = ClusterStore::new(3);
        assert_eq!(empty.max_projection_size(), 0);
        assert!(!empty.tau_r_reached(1));
    }

    #[test]
    fn trifurcation_examples() {
        // Star: center 0 with leaves 1,2,3.
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut scratch = BallScratch::new(4);
        let s = ClusterStore::init(&g, &cfg_with_minus(4, &[0, 1, 2, 3]));
        assert!(s.is_trifurcation(&g, 0, 1, &mut scratch));
        assert!(!s.is_trifurcation(&g, 1, 1, &mut scratch));
        let s = ClusterStore::init(&g, &cfg_with_minus(4, &[0, 1, 2]));
        assert!(!s.is_trifurcation(&g, 0, 1, &mut scratch));

        // Interior vertex of a minus path only touches two branches.
        let edges: Vec<(u32, u32)> = (0..6).map(|i| (i, i + 1)).collect();
        let path = Graph::from_edges(7, &edges).unwrap();
        let s = ClusterStore::init(&path, &cfg_with_minus(7, &[1, 2, 3, 4, 5]));
        let mut scratch = BallScratch::new(7);
        assert!(!s.is_trifurcation(&path, 3, 3, &mut scratch));
        assert!(trifurcation_points(&path, &[1, 2, 3, 4, 5], 3).is_empty());
        // Plus vertex and isolated minus are never trifurcations.
        assert!(!s.is_trifurcation(&path, 0, 3, &mut scratch));
        let iso = ClusterStore::init(&path, &cfg_with_minus(7, &[0]));
        assert!(!iso.is_trifurcation(&path, 0, 2, &mut scratch));
        let _ = PLUS;
    }

    #[test]
    fn scratch_agrees_with_definition() {
        let g = crate::graph::generate_random_regular(60, 3, 4).unwrap();
        let set: Vec<u32> = (0..60).filter(|v| v % 3 != 0).collect();
        let mut cfg = TwoSpinConfig::all_plus(60);
        for &v in &set {
            cfg.set(v as usize, MINUS);
        }
        let store = ClusterStore::init(&g, &cfg);
        let mut scratch = BallScratch::new(60);
        for radius in 1..4 {
            for v in 0..60usize {
                if !store.is_minus(v) {
                    continue;
                }
                let region = store.region_of(v).to_vec();
                let by_def = trifurcation_points(&g, &region, radius).contains(&(v as u32));
                assert_eq!(store.is_trifurcation(&g, v, radius, &mut scratch), by_def, "v={v} r={radius}");
            }
        }
    }
}
