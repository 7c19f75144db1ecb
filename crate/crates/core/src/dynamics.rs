//! Update rules and coupled trajectory engines.
//!
//! All engines consume a shared [`EventStream`] strictly in time order. A
//! two-spin update sets the spin to −1 iff `uniform <= 1 - p_plus` of the
//! pre-update neighborhood, so chains with ordered starts stay ordered.

use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{EventStream, UpdateEvent};
use crate::error::{Error, Result};
use crate::graph::{ball, Graph};
use crate::spacetime::{rigid_structure_violations, BallScratch, ClusterStore, ScanViolations, StructureViolations};

pub type Spin = i8;
pub const PLUS: Spin = 1;
pub const MINUS: Spin = -1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwoSpinConfig {
    spins: Vec<Spin>,
}

impl TwoSpinConfig {
    pub fn all_plus(n: usize) -> Self {
        TwoSpinConfig { spins: vec![PLUS; n] }
    }

    pub fn all_minus(n: usize) -> Self {
        TwoSpinConfig { spins: vec![MINUS; n] }
    }

    pub fn from_spins(spins: Vec<Spin>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != PLUS && s != MINUS) {
            return Err(Error::InvalidParameter(format!("spin value {bad} is not ±1")));
        }
        Ok(TwoSpinConfig { spins })
    }

    /// Exactly `ceil((1+eps)·n/2)` plus spins at uniformly chosen vertices.
    pub fn biased(n: usize, eps: f64, seed: u64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("bias {eps} outside [-1, 1]")));
        }
        let plus = (((1.0 + eps) * n as f64 / 2.0).ceil() as usize).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = TwoSpinConfig::all_minus(n);
        for v in sample(&mut rng, n, plus) {
            cfg.spins[v] = PLUS;
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    #[inline]
    pub fn get(&self, v: usize) -> Spin {
        self.spins[v]
    }

    #[inline]
    pub fn set(&mut self, v: usize, s: Spin) {
        self.spins[v] = s;
    }

    pub fn as_slice(&self) -> &[Spin] {
        &self.spins
    }

    pub fn minus_count(&self) -> usize {
        self.spins.iter().filter(|&&s| s == MINUS).count()
    }

    pub fn minus_set(&self) -> Vec<u32> {
        (0..self.n()).filter(|&v| self.spins[v] == MINUS).map(|v| v as u32).collect()
    }

    /// Pointwise `self <= other`.
    pub fn leq(&self, other: &TwoSpinConfig) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a <= b)
    }

    /// Bit `v` set iff spin `v` is plus; only for `n <= 64`.
    pub fn code(&self) -> u64 {
        assert!(self.n() <= 64);
        self.spins
            .iter()
            .enumerate()
            .fold(0u64, |acc, (v, &s)| if s == PLUS { acc | (1 << v) } else { acc })
    }

    pub fn from_code(n: usize, code: u64) -> Self {
        TwoSpinConfig { spins: (0..n).map(|v| if code >> v & 1 == 1 { PLUS } else { MINUS }).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PottsConfig {
    states: Vec<u8>,
    q: u8,
}

impl PottsConfig {
    pub fn constant(n: usize, q: u8, state: u8) -> Result<Self> {
        PottsConfig::from_states(vec![state; n], q)
    }

    pub fn from_states(states: Vec<u8>, q: u8) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!("q = {q} must be at least 2")));
        }
        if let Some(bad) = states.iter().find(|&&s| s == 0 || s > q) {
            return Err(Error::InvalidParameter(format!("state {bad} outside 1..={q}")));
        }
        Ok(PottsConfig { states, q })
    }

    /// `ceil(eps·n)` vertices forced to state 1, the rest uniform over `1..=q`.
    pub fn biased(n: usize, q: u8, eps: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("bias {eps} outside [0, 1]")));
        }
        let forced = ((eps * n as f64).ceil() as usize).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states: Vec<u8> = (0..n).map(|_| rng.random_range(1..=q)).collect();
        for v in sample(&mut rng, n, forced) {
            states[v] = 1;
        }
        PottsConfig::from_states(states, q)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    #[inline]
    pub fn get(&self, v: usize) -> u8 {
        self.states[v]
    }

    #[inline]
    pub fn set(&mut self, v: usize, s: u8) {
        self.states[v] = s;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.states
    }

    /// Two-spin image: +1 exactly where the state is 1.
    pub fn to_two_spin(&self) -> TwoSpinConfig {
        TwoSpinConfig { spins: self.states.iter().map(|&s| if s == 1 { PLUS } else { MINUS }).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateRule {
    Ising { beta: f64 },
    /// Threshold rule dominated by the `q`-state Potts chain on a degree-`d` graph.
    PottsDominating { beta_p: f64, q: u32, d: u32 },
    NoisyMajority { p: f64 },
    PottsGlauber { beta_p: f64, q: u32 },
}

impl UpdateRule {
    pub fn ising(beta: f64) -> Result<Self> {
        let r = UpdateRule::Ising { beta };
        r.validate()?;
        Ok(r)
    }

    pub fn potts_dominating(beta_p: f64, q: u32, d: u32) -> Result<Self> {
        let r = UpdateRule::PottsDominating { beta_p, q, d };
        r.validate()?;
        Ok(r)
    }

    pub fn noisy_majority(p: f64) -> Result<Self> {
        let r = UpdateRule::NoisyMajority { p };
        r.validate()?;
        Ok(r)
    }

    pub fn potts_glauber(beta_p: f64, q: u32) -> Result<Self> {
        let r = UpdateRule::PottsGlauber { beta_p, q };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UpdateRule::Ising { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                Err(Error::InvalidParameter(format!("beta = {beta}")))
            }
            UpdateRule::NoisyMajority { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidParameter(format!("p = {p}")))
            }
            UpdateRule::PottsGlauber { beta_p, q } if !(beta_p >= 0.0 && beta_p.is_finite()) || q < 2 => {
                Err(Error::InvalidParameter(format!("beta_p = {beta_p}, q = {q}")))
            }
            UpdateRule::PottsDominating { beta_p, q, d } => {
                if q < 2 || d == 0 || !beta_p.is_finite() {
                    return Err(Error::InvalidParameter(format!("beta_p = {beta_p}, q = {q}, d = {d}")));
                }
                dominating_beta(beta_p, q, d as usize).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn is_two_spin(&self) -> bool {
        !matches!(self, UpdateRule::PottsGlauber { .. })
    }

    /// Two-spin inverse temperature: `beta` for Ising, the derived one for the
    /// dominating rule.
    pub fn effective_beta(&self) -> Option<f64> {
        match *self {
            UpdateRule::Ising { beta } => Some(beta),
            UpdateRule::PottsDominating { beta_p, q, d } => dominating_beta(beta_p, q, d as usize).ok(),
            _ => None,
        }
    }

    /// `p_plus` for a vertex of degree `degree` with `plus` plus neighbors.
    pub fn p_plus_counts(&self, plus: usize, degree: usize) -> Result<f64> {
        let sum = 2 * plus as i64 - degree as i64;
        match *self {
            UpdateRule::Ising { beta } => Ok(ising_from_sum(beta, sum)),
            UpdateRule::PottsDominating { beta_p, q, d } => {
                let beta = dominating_beta(beta_p, q, d as usize)?;
                Ok(dominating_from_counts(beta, plus, degree))
            }
            UpdateRule::NoisyMajority { p } => Ok(noisy_from_sum(p, sum)),
            UpdateRule::PottsGlauber { .. } => Err(Error::InvalidParameter("Potts Glauber is not a two-spin rule".into())),
        }
    }
}

/// Derived two-spin β for the dominating rule: `(β_p − 7 ln(q−1)/d)/2`, required positive.
pub fn dominating_beta(beta_p: f64, q: u32, d: usize) -> Result<f64> {
    let beta = (beta_p - 7.0 * ((q as f64) - 1.0).ln() / d as f64) / 2.0;
    if beta > 0.0 {
        Ok(beta)
    } else {
        Err(Error::ParameterTooSmall { beta })
    }
}

fn ising_from_sum(beta: f64, sum: i64) -> f64 {
    1.0 / (1.0 + (-2.0 * beta * sum as f64).exp())
}

fn dominating_from_counts(beta: f64, plus: usize, degree: usize) -> f64 {
    if 7 * plus >= 4 * degree {
        1.0 / (1.0 + (-2.0 * beta * degree as f64 / 7.0).exp())
    } else {
        0.0
    }
}

fn noisy_from_sum(p: f64, sum: i64) -> f64 {
    match sum.signum() {
        1 => 1.0 - p,
        -1 => p,
        _ => 0.5,
    }
}

fn count_plus(spins: &[Spin]) -> usize {
    spins.iter().filter(|&&s| s == PLUS).count()
}

pub fn p_plus_ising(beta: f64, neighbor_spins: &[Spin]) -> f64 {
    ising_from_sum(beta, neighbor_spins.iter().map(|&s| s as i64).sum())
}

pub fn p_plus_potts_dominating(beta_p: f64, q: u32, neighbor_spins: &[Spin]) -> Result<f64> {
    let d = neighbor_spins.len();
    let beta = dominating_beta(beta_p, q, d)?;
    Ok(dominating_from_counts(beta, count_plus(neighbor_spins), d))
}

pub fn p_plus_noisy_majority(p: f64, neighbor_spins: &[Spin]) -> f64 {
    noisy_from_sum(p, neighbor_spins.iter().map(|&s| s as i64).sum())
}

/// Conditional law of a Potts spin given neighbor states in `1..=q`.
pub fn potts_conditional(beta_p: f64, q: u32, neighbor_states: &[u8]) -> Vec<f64> {
    let mut counts = vec![0usize; q as usize];
    for &s in neighbor_states {
        counts[s as usize - 1] += 1;
    }
    potts_conditional_counts(beta_p, &counts)
}

/// `p_k ∝ exp(β_p · counts[k])`, max-subtracted.
pub fn potts_conditional_counts(beta_p: f64, counts: &[usize]) -> Vec<f64> {
    let top = counts.iter().copied().max().unwrap_or(0) as f64;
    let w: Vec<f64> = counts.iter().map(|&c| (beta_p * (c as f64 - top)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Precomputed `p_plus[degree][plus]` for a two-spin rule.
#[derive(Debug, Clone)]
pub struct PlusTable {
    rows: Vec<Vec<f64>>,
}

impl PlusTable {
    pub fn new(rule: &UpdateRule, max_degree: usize) -> Result<Self> {
        rule.validate()?;
        let rows = (0..=max_degree)
            .map(|deg| (0..=deg).map(|k| rule.p_plus_counts(k, deg)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(PlusTable { rows })
    }

    #[inline]
    pub fn get(&self, plus: usize, degree: usize) -> f64 {
        self.rows[degree][plus]
    }
}

#[inline]
fn plus_neighbors(g: &Graph, cfg: &TwoSpinConfig, v: usize) -> usize {
    g.neighbors(v).iter().filter(|&&w| cfg.get(w as usize) == PLUS).count()
}

#[inline]
fn coupled_spin(table: &PlusTable, g: &Graph, cfg: &TwoSpinConfig, v: usize, uniform: f64) -> Spin {
    let p = table.get(plus_neighbors(g, cfg, v), g.degree(v));
    if uniform <= 1.0 - p {
        MINUS
    } else {
        PLUS
    }
}

/// One grand-coupled update of `cfg` at `ev.vertex`. A minus-to-plus move for
/// which `reject` returns true is discarded. Returns `(old, new)` spins.
pub fn apply_two_spin(
    cfg: &mut TwoSpinConfig,
    table: &PlusTable,
    ev: &UpdateEvent,
    g: &Graph,
    reject: Option<&mut dyn FnMut(usize) -> bool>,
) -> (Spin, Spin) {
    let v = ev.vertex as usize;
    let old = cfg.get(v);
    let mut new = coupled_spin(table, g, cfg, v, ev.uniform);
    if old == MINUS && new == PLUS {
        if let Some(reject) = reject {
            if reject(v) {
                new = MINUS;
            }
        }
    }
    cfg.set(v, new);
    (old, new)
}

/// Called after every event with `(chain, event, old spin, new spin, chain state)`.
pub trait Observer {
    fn observe(&mut self, chain: usize, ev: &UpdateEvent, old: Spin, new: Spin, cfg: &TwoSpinConfig);
}

/// Observer that ignores everything.
pub struct Silent;

impl Observer for Silent {
    fn observe(&mut self, _: usize, _: &UpdateEvent, _: Spin, _: Spin, _: &TwoSpinConfig) {}
}

impl<F: FnMut(usize, &UpdateEvent, Spin, Spin, &TwoSpinConfig)> Observer for F {
    fn observe(&mut self, chain: usize, ev: &UpdateEvent, old: Spin, new: Spin, cfg: &TwoSpinConfig) {
        self(chain, ev, old, new, cfg)
    }
}

/// How often full consistency scans run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Normal,
    Paranoid,
}

impl CheckMode {
    pub const NORMAL_CADENCE: u64 = 1000;

    pub fn every(&self) -> u64 {
        match self {
            CheckMode::Normal => Self::NORMAL_CADENCE,
            CheckMode::Paranoid => 1,
        }
    }
}

/// Several two-spin chains driven by one stream.
pub struct GrandCoupling<'g> {
    g: &'g Graph,
    table: PlusTable,
    chains: Vec<TwoSpinConfig>,
    stores: Vec<ClusterStore>,
    ordered: Vec<(usize, usize)>,
    stream: EventStream,
    pending: UpdateEvent,
    time: f64,
    events: u64,
    order_violations: u64,
    scan: ScanViolations,
    check: CheckMode,
}

impl<'g> GrandCoupling<'g> {
    pub fn new(g: &'g Graph, rule: &UpdateRule, inits: Vec<TwoSpinConfig>, mut stream: EventStream) -> Result<Self> {
        if let Some(bad) = inits.iter().find(|c| c.n() != g.n()) {
            return Err(Error::ShapeMismatch(bad.n(), g.n()));
        }
        if stream.n() != g.n() {
            return Err(Error::ShapeMismatch(stream.n(), g.n()));
        }
        let table = PlusTable::new(rule, g.d())?;
        let mut ordered = Vec::new();
        for i in 0..inits.len() {
            for j in 0..inits.len() {
                if i != j && inits[i].leq(&inits[j]) {
                    ordered.push((i, j));
                }
            }
        }
        let pending = stream.next_event();
        Ok(GrandCoupling {
            g,
            table,
            chains: inits,
            stores: Vec::new(),
            ordered,
            stream,
            pending,
            time: 0.0,
            events: 0,
            order_violations: 0,
            scan: ScanViolations::default(),
            check: CheckMode::Normal,
        })
    }

    /// Track minus clusters for every chain.
    pub fn with_clusters(mut self, check: CheckMode) -> Self {
        self.stores = self.chains.iter().map(|c| ClusterStore::init(self.g, c)).collect();
        self.check = check;
        self
    }

    pub fn chains(&self) -> &[TwoSpinConfig] {
        &self.chains
    }

    pub fn store(&self, chain: usize) -> Option<&ClusterStore> {
        self.stores.get(chain)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn order_violations(&self) -> u64 {
        self.order_violations
    }

    pub fn scan_violations(&self) -> ScanViolations {
        self.scan
    }

    /// Applies every event with time `<= t_end`.
    pub fn advance_to<O: Observer>(&mut self, t_end: f64, obs: &mut O) -> Result<()> {
        self.advance_until(t_end, obs, |_| false).map(|_| ())
    }

    /// Like [`advance_to`](Self::advance_to) but returns early, with `true`,
    /// as soon as `stop` holds (checked before the first event and after each one).
    pub fn advance_until<O: Observer>(
        &mut self,
        t_end: f64,
        obs: &mut O,
        mut stop: impl FnMut(&Self) -> bool,
    ) -> Result<bool> {
        if stop(self) {
            return Ok(true);
        }
        while self.pending.time <= t_end {
            let ev = self.pending;
            self.pending = self.stream.next_event();
            self.step(&ev, obs)?;
            if stop(self) {
                return Ok(true);
            }
        }
        self.time = self.time.max(t_end);
        Ok(false)
    }

    fn step<O: Observer>(&mut self, ev: &UpdateEvent, obs: &mut O) -> Result<()> {
        let v = ev.vertex as usize;
        self.time = ev.time;
        self.events += 1;
        for (i, cfg) in self.chains.iter_mut().enumerate() {
            let (old, new) = apply_two_spin(cfg, &self.table, ev, self.g, None);
            if let Some(store) = self.stores.get_mut(i) {
                store.apply_flip(self.g, v, old, new, ev.time)?;
            }
            obs.observe(i, ev, old, new, cfg);
        }
        for &(lo, hi) in &self.ordered {
            if self.chains[lo].get(v) > self.chains[hi].get(v) {
                self.order_violations += 1;
            }
        }
        if !self.stores.is_empty() && self.events % self.check.every() == 0 {
            for (store, cfg) in self.stores.iter().zip(&self.chains) {
                self.scan.add(store.scan(self.g, cfg));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GrandRun {
    pub finals: Vec<TwoSpinConfig>,
    pub events: u64,
    pub order_violations: u64,
}

pub fn run_grand_coupled<O: Observer>(
    g: &Graph,
    rule: &UpdateRule,
    inits: Vec<TwoSpinConfig>,
    stream: EventStream,
    horizon: f64,
    obs: &mut O,
) -> Result<GrandRun> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon}")));
    }
    let mut gc = GrandCoupling::new(g, rule, inits, stream)?;
    gc.advance_to(horizon, obs)?;
    Ok(GrandRun { events: gc.events, order_violations: gc.order_violations, finals: gc.chains })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidOptions {
    pub radius: usize,
    /// When false the rigid chain never rejects and must equal the standard one.
    pub reject_trifurcations: bool,
    pub check_structure: bool,
    pub check: CheckMode,
    pub abort_on_violation: bool,
}

impl RigidOptions {
    pub fn new(radius: usize) -> Self {
        RigidOptions {
            radius,
            reject_trifurcations: true,
            check_structure: true,
            check: CheckMode::Normal,
            abort_on_violation: false,
        }
    }
}

/// Standard all-plus chain (index 0) and rigid chain (index 1) on one stream.
pub struct RigidPair<'g> {
    g: &'g Graph,
    table: PlusTable,
    opts: RigidOptions,
    plus: TwoSpinConfig,
    rigid: TwoSpinConfig,
    store: ClusterStore,
    scratch: BallScratch,
    local_ok: Vec<bool>,
    stream: EventStream,
    pending: UpdateEvent,
    time: f64,
    events: u64,
    rejected: u64,
    domination_violations: u64,
    structure: StructureViolations,
    scan: ScanViolations,
    tau_r: Option<f64>,
}

impl<'g> RigidPair<'g> {
    pub fn new(g: &'g Graph, rule: &UpdateRule, mut stream: EventStream, opts: RigidOptions) -> Result<Self> {
        if !rule.is_two_spin() {
            return Err(Error::InvalidParameter("rigid dynamics needs a two-spin rule".into()));
        }
        if stream.n() != g.n() {
            return Err(Error::ShapeMismatch(stream.n(), g.n()));
        }
        let local_ok = if opts.check_structure {
            (0..g.n()).map(|v| ball(g, v, opts.radius).tree_excess <= 1).collect()
        } else {
            vec![false; g.n()]
        };
        let pending = stream.next_event();
        Ok(RigidPair {
            g,
            table: PlusTable::new(rule, g.d())?,
            opts,
            plus: TwoSpinConfig::all_plus(g.n()),
            rigid: TwoSpinConfig::all_plus(g.n()),
            store: ClusterStore::new(g.n()),
            scratch: BallScratch::new(g.n()),
            local_ok,
            stream,
            pending,
            time: 0.0,
            events: 0,
            rejected: 0,
            domination_violations: 0,
            structure: StructureViolations::default(),
            scan: ScanViolations::default(),
            tau_r: None,
        })
    }

    pub fn advance_to<O: Observer>(&mut self, t_end: f64, obs: &mut O) -> Result<()> {
        while self.pending.time <= t_end {
            let ev = self.pending;
            self.pending = self.stream.next_event();
            self.step(&ev, obs)?;
        }
        self.time = self.time.max(t_end);
        Ok(())
    }

    fn step<O: Observer>(&mut self, ev: &UpdateEvent, obs: &mut O) -> Result<()> {
        let g = self.g;
        let v = ev.vertex as usize;
        self.time = ev.time;
        self.events += 1;

        let (old, new) = apply_two_spin(&mut self.plus, &self.table, ev, g, None);
        obs.observe(0, ev, old, new, &self.plus);

        let old = self.rigid.get(v);
        let mut new = coupled_spin(&self.table, g, &self.rigid, v, ev.uniform);
        if old == MINUS
            && new == PLUS
            && self.opts.reject_trifurcations
            && self.store.is_trifurcation(g, v, self.opts.radius, &mut self.scratch)
        {
            new = MINUS;
            self.rejected += 1;
        }
        self.rigid.set(v, new);
        self.store.apply_flip(g, v, old, new, ev.time)?;
        obs.observe(1, ev, old, new, &self.rigid);

        if self.rigid.get(v) > self.plus.get(v) {
            self.domination_violations += 1;
            if self.opts.abort_on_violation {
                return Err(Error::DominationViolation { time: ev.time, vertex: v as u32 });
            }
        }
        if self.events % self.opts.check.every() == 0 {
            if self.opts.check_structure && self.tau_r.is_none() && !self.store.tau_r_reached(self.opts.radius) {
                let found = rigid_structure_violations(&self.store, g, self.opts.radius, &self.local_ok, &mut self.scratch);
                self.structure.minus_nontri += found.minus_nontri;
                self.structure.plus_adjacent += found.plus_adjacent;
            }
            self.scan.add(self.store.scan(g, &self.rigid));
        }
        if self.tau_r.is_none() && self.store.tau_r_reached(self.opts.radius) {
            self.tau_r = Some(ev.time);
        }
        Ok(())
    }

    pub fn standard(&self) -> &TwoSpinConfig {
        &self.plus
    }

    pub fn rigid(&self) -> &TwoSpinConfig {
        &self.rigid
    }

    pub fn store(&self) -> &ClusterStore {
        &self.store
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn summary(&self) -> RigidRun {
        RigidRun {
            standard: self.plus.clone(),
            rigid: self.rigid.clone(),
            events: self.events,
            rejected: self.rejected,
            domination_violations: self.domination_violations,
            structure: self.structure,
            scan: self.scan,
            max_projection_ever: self.store.max_projection_ever(),
            tau_r: self.tau_r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RigidRun {
    pub standard: TwoSpinConfig,
    pub rigid: TwoSpinConfig,
    pub events: u64,
    pub rejected: u64,
    pub domination_violations: u64,
    pub structure: StructureViolations,
    pub scan: ScanViolations,
    pub max_projection_ever: usize,
    pub tau_r: Option<f64>,
}

pub fn run_rigid_pair<O: Observer>(
    g: &Graph,
    rule: &UpdateRule,
    stream: EventStream,
    horizon: f64,
    opts: RigidOptions,
    obs: &mut O,
) -> Result<RigidRun> {
    let mut pair = RigidPair::new(g, rule, stream, opts)?;
    pair.advance_to(horizon, obs)?;
    Ok(pair.summary())
}

/// Potts chains from `y0` and from all-1, plus the dominating two-spin chain
/// started from the two-spin image of `y0`, all reading one uniform per ring.
pub struct PottsTriple<'g> {
    g: &'g Graph,
    beta_p: f64,
    x_table: PlusTable,
    y: PottsConfig,
    y1: PottsConfig,
    x: TwoSpinConfig,
    store: ClusterStore,
    disagreements: usize,
    check: CheckMode,
    abort_on_violation: bool,
    stream: EventStream,
    pending: UpdateEvent,
    time: f64,
    events: u64,
    legacy_violations: u64,
    minus_violations: u64,
    extinction_time: Option<f64>,
    post_extinction_disagreements: u64,
    counts_y: Vec<usize>,
    counts_y1: Vec<usize>,
}

impl<'g> PottsTriple<'g> {
    pub fn new(g: &'g Graph, y0: PottsConfig, beta_p: f64, mut stream: EventStream, check: CheckMode) -> Result<Self> {
        if y0.n() != g.n() {
            return Err(Error::ShapeMismatch(y0.n(), g.n()));
        }
        if stream.n() != g.n() {
            return Err(Error::ShapeMismatch(stream.n(), g.n()));
        }
        let q = y0.q();
        let rule = UpdateRule::potts_dominating(beta_p, q as u32, g.d() as u32)?;
        let x = y0.to_two_spin();
        let store = ClusterStore::init(g, &x);
        let y1 = PottsConfig::constant(g.n(), q, 1)?;
        let disagreements = (0..g.n()).filter(|&v| y0.get(v) != 1).count();
        let extinction_time = store.legacy_extinct().then_some(0.0);
        let pending = stream.next_event();
        Ok(PottsTriple {
            g,
            beta_p,
            x_table: PlusTable::new(&rule, g.d())?,
            y: y0,
            y1,
            x,
            store,
            disagreements,
            check,
            abort_on_violation: false,
            stream,
            pending,
            time: 0.0,
            events: 0,
            legacy_violations: 0,
            minus_violations: 0,
            extinction_time,
            post_extinction_disagreements: 0,
            counts_y: vec![0; q as usize],
            counts_y1: vec![0; q as usize],
        })
    }

    pub fn abort_on_violation(mut self, yes: bool) -> Self {
        self.abort_on_violation = yes;
        self
    }

    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.pending.time <= t_end {
            let ev = self.pending;
            self.pending = self.stream.next_event();
            self.step(&ev)?;
        }
        self.time = self.time.max(t_end);
        Ok(())
    }

    fn pick(probs: &[f64], u: f64) -> u8 {
        let mut acc = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k as u8 + 1;
            }
        }
        probs.len() as u8
    }

    fn step(&mut self, ev: &UpdateEvent) -> Result<()> {
        let g = self.g;
        let v = ev.vertex as usize;
        self.time = ev.time;
        self.events += 1;

        self.counts_y.iter_mut().for_each(|c| *c = 0);
        self.counts_y1.iter_mut().for_each(|c| *c = 0);
        let mut plus = 0;
        for &w in g.neighbors(v) {
            let w = w as usize;
            self.counts_y[self.y.get(w) as usize - 1] += 1;
            self.counts_y1[self.y1.get(w) as usize - 1] += 1;
            plus += (self.x.get(w) == PLUS) as usize;
        }
        let was_disagreeing = self.y.get(v) != self.y1.get(v);
        let new_y = Self::pick(&potts_conditional_counts(self.beta_p, &self.counts_y), ev.uniform);
        let new_y1 = Self::pick(&potts_conditional_counts(self.beta_p, &self.counts_y1), ev.uniform);
        let p_plus = self.x_table.get(plus, g.degree(v));
        let new_x = if ev.uniform < p_plus { PLUS } else { MINUS };
        self.y.set(v, new_y);
        self.y1.set(v, new_y1);
        let old_x = self.x.get(v);
        self.x.set(v, new_x);
        self.store.apply_flip(g, v, old_x, new_x, ev.time)?;

        let disagreeing = new_y != new_y1;
        match (was_disagreeing, disagreeing) {
            (false, true) => self.disagreements += 1,
            (true, false) => self.disagreements -= 1,
            _ => {}
        }

        // The legacy region only loses vertices at v, so checking v keeps
        // both inclusions exact between full scans.
        if disagreeing && !self.store.in_legacy(v) {
            self.legacy_violations += 1;
            if self.abort_on_violation {
                return Err(Error::InclusionViolation { which: "disagreement-in-legacy", time: ev.time, vertex: v as u32 });
            }
        }
        if (new_y != 1 || new_y1 != 1) && new_x != MINUS {
            self.minus_violations += 1;
            if self.abort_on_violation {
                return Err(Error::InclusionViolation { which: "nonunit-in-minus", time: ev.time, vertex: v as u32 });
            }
        }
        if self.events % self.check.every() == 0 {
            let (a, b) = self.full_scan();
            self.legacy_violations += a;
            self.minus_violations += b;
        }
        if self.extinction_time.is_none() && self.store.legacy_extinct() {
            self.extinction_time = Some(ev.time);
        }
        if self.extinction_time.is_some() && self.disagreements > 0 {
            self.post_extinction_disagreements += 1;
        }
        Ok(())
    }

    /// Counts vertices breaking either inclusion right now.
    pub fn full_scan(&self) -> (u64, u64) {
        let mut legacy = 0;
        let mut minus = 0;
        for v in 0..self.g.n() {
            let (a, b) = (self.y.get(v), self.y1.get(v));
            if a != b && !self.store.in_legacy(v) {
                legacy += 1;
            }
            if (a != 1 || b != 1) && self.x.get(v) != MINUS {
                minus += 1;
            }
        }
        (legacy, minus)
    }

    pub fn y(&self) -> &PottsConfig {
        &self.y
    }

    pub fn y_one(&self) -> &PottsConfig {
        &self.y1
    }

    pub fn x(&self) -> &TwoSpinConfig {
        &self.x
    }

    pub fn store(&self) -> &ClusterStore {
        &self.store
    }

    pub fn disagreements(&self) -> usize {
        self.disagreements
    }

    pub fn summary(&self) -> TripleRun {
        TripleRun {
            y: self.y.clone(),
            y_one: self.y1.clone(),
            x: self.x.clone(),
            events: self.events,
            legacy_violations: self.legacy_violations,
            minus_violations: self.minus_violations,
            extinction_time: self.extinction_time,
            post_extinction_disagreements: self.post_extinction_disagreements,
            final_disagreements: self.disagreements,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TripleRun {
    pub y: PottsConfig,
    pub y_one: PottsConfig,
    pub x: TwoSpinConfig,
    pub events: u64,
    /// Events or scan hits where a disagreement sat outside the legacy region.
    pub legacy_violations: u64,
    /// Events or scan hits where a non-1 Potts spin sat on a plus two-spin site.
    pub minus_violations: u64,
    pub extinction_time: Option<f64>,
    /// Events after legacy extinction at which the Potts chains disagreed.
    pub post_extinction_disagreements: u64,
    pub final_disagreements: usize,
}

pub fn run_potts_triple(
    g: &Graph,
    y0: PottsConfig,
    beta_p: f64,
    stream: EventStream,
    horizon: f64,
    check: CheckMode,
) -> Result<TripleRun> {
    let mut triple = PottsTriple::new(g, y0, beta_p, stream, check)?;
    triple.advance_to(horizon)?;
    Ok(triple.summary())
}

pub fn magnetization_ising(cfg: &TwoSpinConfig) -> f64 {
    cfg.as_slice().iter().map(|&s| s as f64).sum::<f64>() / cfg.n() as f64
}

/// `(#state 1 − max over other states)/n`.
pub fn magnetization_potts(cfg: &PottsConfig) -> f64 {
    let mut counts = vec![0usize; cfg.q() as usize + 1];
    for &s in cfg.as_slice() {
        counts[s as usize] += 1;
    }
    let rest = counts[2..].iter().copied().max().unwrap_or(0);
    (counts[1] as f64 - rest as f64) / cfg.n() as f64
}

/// Initial-condition spec: `all_plus`, `all_minus`, `biased:EPS`, `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    AllPlus,
    AllMinus,
    Biased(f64),
    File(PathBuf),
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_plus" => Ok(InitSpec::AllPlus),
            "all_minus" => Ok(InitSpec::AllMinus),
            _ => {
                if let Some(eps) = s.strip_prefix("biased:") {
                    let eps: f64 = eps.parse().map_err(|_| Error::Parse(format!("bad bias in {s:?}")))?;
                    Ok(InitSpec::Biased(eps))
                } else if let Some(path) = s.strip_prefix("file:") {
                    Ok(InitSpec::File(PathBuf::from(path)))
                } else {
                    Err(Error::Parse(format!("unknown init spec {s:?}")))
                }
            }
        }
    }
}

impl std::fmt::Display for InitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitSpec::AllPlus => write!(f, "all_plus"),
            InitSpec::AllMinus => write!(f, "all_minus"),
            InitSpec::Biased(e) => write!(f, "biased:{e}"),
            InitSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

fn read_tokens(path: &PathBuf) -> Result<Vec<i64>> {
    let text = std::fs::read_to_string(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "+" => Ok(1),
            "-" => Ok(-1),
            _ => t.parse::<i64>().map_err(|_| Error::Parse(format!("bad token {t:?} in {}", path.display()))),
        })
        .collect()
}

impl InitSpec {
    pub fn two_spin(&self, n: usize, seed: u64) -> Result<TwoSpinConfig> {
        match self {
            InitSpec::AllPlus => Ok(TwoSpinConfig::all_plus(n)),
            InitSpec::AllMinus => Ok(TwoSpinConfig::all_minus(n)),
            InitSpec::Biased(eps) => TwoSpinConfig::biased(n, *eps, seed),
            InitSpec::File(path) => {
                let tokens = read_tokens(path)?;
                if tokens.len() != n {
                    return Err(Error::ShapeMismatch(tokens.len(), n));
                }
                let spins = tokens
                    .into_iter()
                    .map(|t| Spin::try_from(t).map_err(|_| Error::Parse(format!("bad spin {t}"))))
                    .collect::<Result<Vec<Spin>>>()?;
                TwoSpinConfig::from_spins(spins)
            }
        }
    }

    /// Potts reading: `all_plus` is all state 1, `all_minus` all state 2.
    pub fn potts(&self, n: usize, q: u8, seed: u64) -> Result<PottsConfig> {
        match self {
            InitSpec::AllPlus => PottsConfig::constant(n, q, 1),
            InitSpec::AllMinus => PottsConfig::constant(n, q, 2),
            InitSpec::Biased(eps) => PottsConfig::biased(n, q, *eps, seed),
            InitSpec::File(path) => {
                let tokens = read_tokens(path)?;
                if tokens.len() != n {
                    return Err(Error::ShapeMismatch(tokens.len(), n));
                }
                let states = tokens
                    .into_iter()
                    .map(|t| u8::try_from(t).map_err(|_| Error::Parse(format!("bad state {t}"))))
                    .collect::<Result<Vec<u8>>>()?;
                PottsConfig::from_states(states, q)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins(plus: usize, minus: usize) -> Vec<Spin> {
        let mut v = vec![PLUS; plus];
        v.extend(std::iter::repeat_n(MINUS, minus));
        v
    }

    #[test]
    fn ising_examples() {
        assert_eq!(p_plus_ising(0.0, &spins(5, 2)), 0.5);
        let beta = 0.7;
        let expect = 1.0 / (1.0 + (-2.0 * beta * 7.0f64).exp());
        assert!((p_plus_ising(beta, &spins(7, 0)) - expect).abs() < 1e-15);
        assert_eq!(p_plus_ising(3.0, &spins(3, 3)), 0.5);
        // Large β stays finite.
        assert!(p_plus_ising(50.0, &spins(0, 7)) < 1e-300);
        assert_eq!(p_plus_ising(50.0, &spins(7, 0)), 1.0);
    }

    #[test]
    fn dominating_examples() {
        let beta_p = 1.0;
        let q = 3;
        let beta = (beta_p - 7.0 * 2f64.ln() / 7.0) / 2.0;
        let got = p_plus_potts_dominating(beta_p, q, &spins(4, 3)).unwrap();
        assert!((got - 1.0 / (1.0 + (-2.0 * beta).exp())).abs() < 1e-15);
        assert_eq!(p_plus_potts_dominating(beta_p, q, &spins(3, 4)).unwrap(), 0.0);
        assert_eq!(dominating_beta(1.3, 2, 7).unwrap(), 0.65);
        assert!(matches!(p_plus_potts_dominating(0.5, 3, &spins(7, 0)), Err(Error::ParameterTooSmall { .. })));
        assert!(UpdateRule::potts_dominating(0.5, 3, 7).is_err());
    }

    #[test]
    fn noisy_examples() {
        assert!((p_plus_noisy_majority(0.1, &spins(4, 3)) - 0.9).abs() < 1e-15);
        assert_eq!(p_plus_noisy_majority(0.1, &spins(3, 4)), 0.1);
        assert_eq!(p_plus_noisy_majority(0.1, &spins(4, 4)), 0.5);
        assert_eq!(p_plus_noisy_majority(0.5, &spins(6, 1)), 0.5);
    }

    #[test]
    fn potts_conditional_examples() {
        let p = potts_conditional(0.0, 4, &[1, 2, 2, 3]);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let beta_p = 0.8;
        let d = 7;
        let p = potts_conditional(beta_p, 3, &[1; 7]);
        let e = (beta_p * d as f64).exp();
        assert!((p[0] - e / (e + 2.0)).abs() < 1e-14);
        let p = potts_conditional(2.0, 3, &[1, 2, 3, 1, 2, 3]);
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = potts_conditional(50.0, 3, &[2; 12]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_examples() {
        let g = Graph::complete(4);
        let table = PlusTable::new(&UpdateRule::Ising { beta: 1.0 }, 3).unwrap();
        let mut cfg = TwoSpinConfig::all_plus(4);
        let ev = UpdateEvent { time: 0.1, vertex: 2, uniform: 0.0 };
        assert_eq!(apply_two_spin(&mut cfg, &table, &ev, &g, None), (PLUS, MINUS));
        let sure = PlusTable::new(&UpdateRule::NoisyMajority { p: 0.0 }, 3).unwrap();
        let mut cfg = TwoSpinConfig::all_plus(4);
        let ev = UpdateEvent { time: 0.1, vertex: 0, uniform: 0.5 };
        assert_eq!(apply_two_spin(&mut cfg, &sure, &ev, &g, None), (PLUS, PLUS));

        let mut cfg = TwoSpinConfig::all_plus(4);
        cfg.set(1, MINUS);
        let ev = UpdateEvent { time: 0.2, vertex: 1, uniform: 0.99 };
        let mut always = |_: usize| true;
        assert_eq!(apply_two_spin(&mut cfg, &table, &ev, &g, Some(&mut always)), (MINUS, MINUS));
        assert_eq!(cfg.get(1), MINUS);
    }

    #[test]
    fn magnetization_examples() {
        assert_eq!(magnetization_ising(&TwoSpinConfig::all_plus(5)), 1.0);
        assert_eq!(magnetization_ising(&TwoSpinConfig::all_minus(5)), -1.0);
        assert_eq!(magnetization_ising(&TwoSpinConfig::from_spins(spins(3, 3)).unwrap()), 0.0);
        assert_eq!(magnetization_potts(&PottsConfig::constant(6, 3, 1).unwrap()), 1.0);
        assert_eq!(magnetization_potts(&PottsConfig::from_states(vec![1, 1, 2, 3], 3).unwrap()), 0.25);
        assert_eq!(magnetization_potts(&PottsConfig::from_states(vec![1, 2, 3, 3, 1, 2], 3).unwrap()), 0.0);
    }

    #[test]
    fn biased_counts() {
        let cfg = TwoSpinConfig::biased(1000, 0.98, 3).unwrap();
        assert_eq!(cfg.n() - cfg.minus_count(), 990);
        let cfg = TwoSpinConfig::biased(501, 0.5, 3).unwrap();
        assert_eq!(cfg.n() - cfg.minus_count(), 376);
        let y = PottsConfig::biased(1000, 3, 0.98, 9).unwrap();
        assert!(y.as_slice().iter().filter(|&&s| s == 1).count() >= 980);
        assert_eq!(TwoSpinConfig::biased(100, 0.3, 1), TwoSpinConfig::biased(100, 0.3, 1));
    }

    #[test]
    fn init_spec_parse() {
        assert_eq!("all_plus".parse::<InitSpec>().unwrap(), InitSpec::AllPlus);
        assert_eq!("biased:0.25".parse::<InitSpec>().unwrap(), InitSpec::Biased(0.25));
        assert!("biased:x".parse::<InitSpec>().is_err());
        assert!("warm".parse::<InitSpec>().is_err());
        for s in ["all_plus", "all_minus", "biased:0.5", "file:/tmp/x"] {
            assert_eq!(s.parse::<InitSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn init_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x0.txt");
        std::fs::write(&path, "1 -1 +\n- 1\n").unwrap();
        let spec = InitSpec::File(path.clone());
        let cfg = spec.two_spin(5, 0).unwrap();
        assert_eq!(cfg.as_slice(), &[1, -1, 1, -1, 1]);
        assert!(spec.two_spin(4, 0).is_err());
        std::fs::write(&path, "1 2 3 1").unwrap();
        assert_eq!(spec.potts(4, 3, 0).unwrap().as_slice(), &[1, 2, 3, 1]);
        assert!(spec.potts(4, 2, 0).is_err());
    }

    #[test]
    fn grand_coupling_keeps_order() {
        let g = crate::graph::generate_random_regular(200, 7, 1).unwrap();
        let rule = UpdateRule::Ising { beta: 0.3 };
        let inits = vec![
            TwoSpinConfig::all_minus(200),
            TwoSpinConfig::biased(200, 0.0, 5).unwrap(),
            TwoSpinConfig::all_plus(200),
        ];
        let run = run_grand_coupled(&g, &rule, inits, EventStream::new(4, 200), 5.0, &mut Silent).unwrap();
        assert_eq!(run.order_violations, 0);
        assert!(run.finals[0].leq(&run.finals[1]) && run.finals[1].leq(&run.finals[2]));
        assert!(run.events > 0);
    }

    #[test]
    fn identical_inits_identical_paths() {
        let g = Graph::petersen();
        let rule = UpdateRule::Ising { beta: 0.4 };
        let x = TwoSpinConfig::biased(10, 0.2, 8).unwrap();
        let mut diverged = false;
        let mut last: Vec<Spin> = Vec::new();
        let mut obs = |chain: usize, _: &UpdateEvent, _: Spin, new: Spin, _: &TwoSpinConfig| {
            if chain == 0 {
                last = vec![new];
            } else if last[0] != new {
                diverged = true;
            }
        };
        let run = run_grand_coupled(&g, &rule, vec![x.clone(), x], EventStream::new(2, 10), 50.0, &mut obs).unwrap();
        assert!(!diverged);
        assert_eq!(run.finals[0], run.finals[1]);
    }

    #[test]
    fn rigid_pair_basics() {
        let g = crate::graph::generate_random_regular(100, 3, 2).unwrap();
        let rule = UpdateRule::Ising { beta: 0.2 };
        let run = run_rigid_pair(&g, &rule, EventStream::new(1, 100), 0.0, RigidOptions::new(2), &mut Silent).unwrap();
        assert_eq!(run.standard, TwoSpinConfig::all_plus(100));
        assert_eq!(run.rigid, TwoSpinConfig::all_plus(100));

        let mut opts = RigidOptions::new(2);
        opts.check = CheckMode::Paranoid;
        let run = run_rigid_pair(&g, &rule, EventStream::new(1, 100), 10.0, opts, &mut Silent).unwrap();
        assert_eq!(run.domination_violations, 0);
        assert_eq!(run.scan.total(), 0);
        assert!(run.rigid.leq(&run.standard));

        opts.reject_trifurcations = false;
        let run = run_rigid_pair(&g, &rule, EventStream::new(1, 100), 10.0, opts, &mut Silent).unwrap();
        assert_eq!(run.rigid, run.standard);
        assert_eq!(run.rejected, 0);
    }

    #[test]
    fn triple_from_all_one_never_disagrees() {
        let g = crate::graph::generate_random_regular(60, 7, 3).unwrap();
        let y0 = PottsConfig::constant(60, 3, 1).unwrap();
        let run = run_potts_triple(&g, y0, 2.0, EventStream::new(5, 60), 5.0, CheckMode::Paranoid).unwrap();
        assert_eq!(run.final_disagreements, 0);
        assert_eq!(run.legacy_violations + run.minus_violations, 0);
        assert_eq!(run.extinction_time, Some(0.0));
    }

    #[test]
    fn triple_inclusions_hold() {
        let g = crate::graph::generate_random_regular(200, 7, 3).unwrap();
        for seed in 0..5 {
            let y0 = PottsConfig::biased(200, 3, 0.7, seed).unwrap();
            let run = run_potts_triple(&g, y0, 1.2, EventStream::new(seed, 200), 10.0, CheckMode::Paranoid).unwrap();
            assert_eq!(run.legacy_violations, 0);
            assert_eq!(run.minus_violations, 0);
            assert_eq!(run.post_extinction_disagreements, 0);
        }
    }
}
