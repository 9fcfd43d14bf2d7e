//! Growth processes: edge DLA from a finite seed and the intermediate
//! process grown from D_m with walkers absorbed on D_N \ D_m.
//!
//! The embedded jump chain is primary; continuous time is carried as
//! exponential stamps (rate 1 for EDLA, whose edge intensities sum to one;
//! rate N for the intermediate process).

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{EmptyRegion, PointCloud, Region, SegmentGapRegion};
use crate::lattice::{DirectedEdge, EnvelopeSpec, SegmentSpec, Site, WindowSpec};
use crate::rng::RngStream;
use crate::walk::{
    run_to_absorption, AccelerationPolicy, LaunchDistribution, LaunchSampler, LaunchSpec,
    Reinsertion, WalkOutcomeKind, DEFAULT_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedSpec {
    Segment(u64),
    Explicit(BTreeSet<Site>),
}

impl SeedSpec {
    pub fn sites(&self) -> BTreeSet<Site> {
        match self {
            SeedSpec::Segment(n) => SegmentSpec::new(*n).sites().into_iter().collect(),
            SeedSpec::Explicit(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessKind {
    Edla { seed: SeedSpec },
    Intermediate { m: u64, n: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub kind: ProcessKind,
    pub launch_distribution: LaunchDistribution,
    /// Minimum EDLA launch radius (the growing-radius rule floor).
    pub min_launch_radius: i64,
    pub policy: AccelerationPolicy,
    /// Step horizon; Intermediate defaults to 2N when unset.
    pub horizon_steps: Option<u64>,
    pub horizon_time: Option<f64>,
    pub snapshot_steps: Vec<u64>,
    pub budget: u64,
    pub reinsert: bool,
    /// Envelope whose first exit step is recorded (the truncation-time
    /// surrogate).
    pub envelope: Option<EnvelopeSpec>,
}

impl ProcessConfig {
    pub fn edla(seed: SeedSpec) -> Self {
        ProcessConfig {
            kind: ProcessKind::Edla { seed },
            launch_distribution: LaunchDistribution::UniformOnRing,
            min_launch_radius: 64,
            policy: AccelerationPolicy::default_jump(),
            horizon_steps: None,
            horizon_time: None,
            snapshot_steps: Vec::new(),
            budget: DEFAULT_BUDGET,
            reinsert: true,
            envelope: None,
        }
    }

    pub fn intermediate(m: u64, n: u64) -> Self {
        ProcessConfig {
            kind: ProcessKind::Intermediate { m, n },
            launch_distribution: LaunchDistribution::UniformOnRing,
            min_launch_radius: 64,
            policy: AccelerationPolicy::default_jump(),
            horizon_steps: None,
            horizon_time: None,
            snapshot_steps: Vec::new(),
            budget: DEFAULT_BUDGET,
            reinsert: true,
            envelope: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeBirth {
    pub edge: DirectedEdge,
    pub birth_index: u64,
    pub birth_time: f64,
}

/// A growing directed aggregate: vertex cloud with spatial index, ordered
/// edge births, step counter, and continuous-time stamp.
#[derive(Clone)]
pub struct AggregateState {
    pub seed: BTreeSet<Site>,
    pub cloud: PointCloud,
    pub edges: Vec<EdgeBirth>,
    edge_set: BTreeSet<DirectedEdge>,
    pub step_count: u64,
    pub time: f64,
}

impl AggregateState {
    pub fn from_seed(seed: BTreeSet<Site>) -> Self {
        let cloud = PointCloud::from_sites(seed.iter().copied());
        AggregateState { seed, cloud, edges: Vec::new(), edge_set: BTreeSet::new(), step_count: 0, time: 0.0 }
    }

    pub fn contains_vertex(&self, s: Site) -> bool {
        self.cloud.contains(s)
    }

    pub fn contains_edge(&self, e: &DirectedEdge) -> bool {
        self.edge_set.contains(e)
    }

    pub fn radius(&self) -> f64 {
        self.cloud.max_norm()
    }

    /// Append a growth edge; the head must already be a vertex and the tail
    /// must be new.
    pub fn add_edge(&mut self, e: DirectedEdge, time: f64) {
        assert!(self.cloud.contains(e.to), "edge head must be in the aggregate");
        assert!(!self.cloud.contains(e.from), "edge tail must be outside the aggregate");
        self.cloud.insert(e.from);
        let inserted = self.edge_set.insert(e);
        assert!(inserted, "duplicate growth edge");
        self.edges.push(EdgeBirth { edge: e, birth_index: self.step_count, birth_time: time });
    }

    pub fn vertices_sorted(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.cloud.iter().copied().collect();
        v.sort();
        v
    }

    pub fn edges_sorted(&self) -> Vec<DirectedEdge> {
        self.edge_set.iter().copied().collect()
    }

    /// vertices = seed ∪ {e.from}; checked after every step in debug and on
    /// demand by the verifier.
    pub fn vertex_identity_holds(&self) -> bool {
        let mut expect = self.seed.clone();
        expect.extend(self.edges.iter().map(|b| b.edge.from));
        expect.len() == self.cloud.len() && expect.iter().all(|&s| self.cloud.contains(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventOutcome {
    Added(DirectedEdge),
    Lazy(Site),
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub step_index: u64,
    pub walker_steps: u64,
    pub outcome: EventOutcome,
    pub timestamp: f64,
}

fn exp_variate(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen(); // in [0, 1)
    -(1.0 - u).ln() / rate
}

/// A process instance: configuration, state, and launch-sampler cache.
pub struct Process {
    pub config: ProcessConfig,
    pub state: AggregateState,
    samplers: HashMap<i64, Arc<LaunchSampler>>,
}

///// init: vertices = seed, no edges, step 0.
pub fn init_process(config: ProcessConfig) -> Result<Process> {
    let seed = match &config.kind {
        ProcessKind::Edla { seed } => {
            let s = seed.sites();
            if s.is_empty() {
                return Err(Error::InvalidConfig("empty seed".into()));
            }
            s
        }
        ProcessKind::Intermediate { m, n } => {
            if m > n {
                return Err(Error::InvalidConfig(format!("m={m} must be <= N={n}")));
            }
            SeedSpec::Segment(*m).sites()
        }
    };
    Ok(Process { config, state: AggregateState::from_seed(seed), samplers: HashMap::new() })
}

impl Process {
    fn sampler(&mut self, radius: i64) -> Result<Arc<LaunchSampler>> {
        if let Some(s) = self.samplers.get(&radius) {
            return Ok(s.clone());
        }
        let spec = LaunchSpec { radius, distribution: self.config.launch_distribution };
        let s = Arc::new(LaunchSampler::new(spec)?);
        self.samplers.insert(radius, s.clone());
        Ok(s)
    }

    pub fn launch_radius(&self) -> i64 {
        match self.config.kind {
            ProcessKind::Edla { .. } => {
                (4 * self.state.radius().ceil() as i64).max(self.config.min_launch_radius)
            }
            ProcessKind::Intermediate { n, .. } => 4 * n as i64,
        }
    }

    /// One clock ring: launch, absorb, update. Returns the event record.
    pub fn step(&mut self, rng: &mut ChaCha12Rng) -> Result<EventRecord> {
        let radius = self.launch_radius();
        if self.state.cloud.linf_extent() >= radius {
            return Err(Error::InvalidConfig(format!(
                "aggregate extent {} reached the launch ring at radius {radius}; \
                 the horizon is too large for this N",
                self.state.cloud.linf_extent()
            )));
        }
        let sampler = self.sampler(radius)?;
        let reins = Reinsertion { escape_radius: 2 * radius, sampler: &sampler };
        let reinsertion = if self.config.reinsert { Some(&reins) } else { None };
        let (rate, absorber): (f64, Box<dyn Region>) = match self.config.kind {
            ProcessKind::Edla { .. } => (1.0, Box::new(EmptyRegion)),
            ProcessKind::Intermediate { m, n } => {
                (n as f64, Box::new(SegmentGapRegion { outer: n as i64, inner: m as i64 }))
            }
        };
        let start = sampler.sample(rng);
        let out = run_to_absorption(
            start,
            &self.state.cloud,
            absorber.as_ref(),
            self.config.policy,
            self.config.budget,
            rng,
            reinsertion,
        );
        let dt = exp_variate(rng, rate);
        self.state.time += dt;
        self.state.step_count += 1;
        let outcome = match out.kind {
            WalkOutcomeKind::HitTarget(e) => {
                let time = self.state.time;
                self.state.add_edge(e, time);
                EventOutcome::Added(e)
            }
            WalkOutcomeKind::HitAbsorber(s) => {
                debug_assert!(matches!(self.config.kind, ProcessKind::Intermediate { .. }));
                EventOutcome::Lazy(s)
            }
            WalkOutcomeKind::BudgetExhausted => EventOutcome::Dropped,
        };
        debug_assert!(self.state.vertex_identity_holds());
        Ok(EventRecord {
            step_index: self.state.step_count,
            walker_steps: out.steps,
            outcome,
            timestamp: self.state.time,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub time: f64,
    pub vertices: Vec<Site>,
    pub edges: Vec<DirectedEdge>,
}

#[derive(Clone)]
pub struct Trajectory {
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: AggregateState,
    /// First step index whose added edge left the configured envelope.
    pub first_envelope_exit: Option<u64>,
    pub dropped: u64,
}

fn take_snapshot(state: &AggregateState) -> Snapshot {
    Snapshot {
        step: state.step_count,
        time: state.time,
        vertices: state.vertices_sorted(),
        edges: state.edges_sorted(),
    }
}

/// Run a full trajectory from a fresh state.
pub fn run_process(config: ProcessConfig, stream: RngStream) -> Result<Trajectory> {
    let horizon = match (config.horizon_steps, &config.kind) {
        (Some(h), _) => h,
        (None, ProcessKind::Intermediate { n, .. }) => 2 * n,
        (None, ProcessKind::Edla { .. }) => {
            return Err(Error::InvalidConfig("EDLA requires an explicit horizon".into()))
        }
    };
    let mut process = init_process(config)?;
    let mut rng = stream.rng();
    let mut events = Vec::new();
    let mut snapshots = vec![take_snapshot(&process.state)];
    let mut first_envelope_exit = None;
    let mut dropped = 0u64;
    let snap_at: BTreeSet<u64> = process.config.snapshot_steps.iter().copied().collect();
    for _ in 0..horizon {
        if let Some(t_max) = process.config.horizon_time {
            if process.state.time >= t_max {
                break;
            }
        }
        let ev = process.step(&mut rng)?;
        if let EventOutcome::Dropped = ev.outcome {
            dropped += 1;
        }
        if first_envelope_exit.is_none() {
            if let (Some(env), EventOutcome::Added(e)) = (&process.config.envelope, &ev.outcome) {
                if !env.contains_edge(*e) {
                    first_envelope_exit = Some(ev.step_index);
                }
            }
        }
        if snap_at.contains(&ev.step_index) {
            snapshots.push(take_snapshot(&process.state));
        }
        events.push(ev);
    }
    Ok(Trajectory { events, snapshots, final_state: process.state, first_envelope_exit, dropped })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subgraph {
    pub vertices: BTreeSet<Site>,
    pub edges: BTreeSet<DirectedEdge>,
}

/// The induced intersection of the aggregate with a finite window.
pub fn restrict_to_window(state: &AggregateState, k: &WindowSpec) -> Subgraph {
    let vertices: BTreeSet<Site> =
        k.sites.iter().copied().filter(|&s| state.contains_vertex(s)).collect();
    let edges: BTreeSet<DirectedEdge> =
        k.edges.iter().filter(|e| state.contains_edge(e)).copied().collect();
    Subgraph { vertices, edges }
}

/// Post-hoc structural validation of a trajectory (the always-on analogue
/// of the per-step debug assertions).
pub fn validate_trajectory(traj: &Trajectory) -> Result<()> {
    let st = &traj.final_state;
    if !st.vertex_identity_holds() {
        return Err(Error::InvalidConfig("vertex identity violated".into()));
    }
    let added = traj
        .events
        .iter()
        .filter(|e| matches!(e.outcome, EventOutcome::Added(_)))
        .count();
    let lazy = traj.events.iter().filter(|e| matches!(e.outcome, EventOutcome::Lazy(_))).count();
    let dropped = traj.events.iter().filter(|e| matches!(e.outcome, EventOutcome::Dropped)).count();
    if added + lazy + dropped != traj.events.len() || st.edges.len() != added {
        return Err(Error::InvalidConfig("event/edge accounting mismatch".into()));
    }
    let mut last_t = 0.0;
    for ev in &traj.events {
        if ev.timestamp <= last_t {
            return Err(Error::InvalidConfig("timestamps not strictly increasing".into()));
        }
        last_t = ev.timestamp;
    }
    let mut seen = BTreeSet::new();
    for b in &st.edges {
        if !seen.insert(b.edge) {
            return Err(Error::InvalidConfig("duplicate edge".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_counts() {
        let p = init_process(ProcessConfig::edla(SeedSpec::Segment(4))).unwrap();
        assert_eq!(p.state.cloud.len(), 9);
        assert!(p.state.edges.is_empty());
        let p = init_process(ProcessConfig::intermediate(2, 8)).unwrap();
        assert_eq!(p.state.cloud.len(), 5);
        assert!(init_process(ProcessConfig::intermediate(9, 8)).is_err());
    }

    #[test]
    fn edla_single_site_first_step_uniform() {
        let mut counts: HashMap<DirectedEdge, u64> = HashMap::new();
        let n = 20_000;
        for i in 0..n {
            let mut cfg =
                ProcessConfig::edla(SeedSpec::Explicit([Site::new(0, 0)].into_iter().collect()));
            cfg.min_launch_radius = 16;
            cfg.launch_distribution = LaunchDistribution::ExactHarmonicFromInfinity;
            let mut p = init_process(cfg).unwrap();
            let mut rng = RngStream::new(50, i).rng();
            let ev = p.step(&mut rng).unwrap();
            match ev.outcome {
                EventOutcome::Added(e) => *counts.entry(e).or_insert(0) += 1,
                _ => panic!("EDLA step must add"),
            }
        }
        assert_eq!(counts.len(), 4);
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for &c in counts.values() {
            assert!((c as f64 / n as f64 - 0.25).abs() < 4.5 * sigma);
        }
    }

    #[test]
    fn intermediate_fresh_step_law() {
        use crate::harmonic::{exact_edge_harmonic};
        use crate::solver::SolverConfig;
        let a: BTreeSet<Site> = SegmentSpec::new(2).sites().into_iter().collect();
        let d8: BTreeSet<Site> = SegmentSpec::new(8).sites().into_iter().collect();
        let absorber: BTreeSet<Site> = d8.difference(&a).copied().collect();
        let cfg_s = SolverConfig { inner_radius: 40, outer_radius: 80, tolerance: 1e-12, max_unknowns: 2_000_000 };
        let exact = exact_edge_harmonic(&a, &absorber, &cfg_s).unwrap();
        let n = 50_000u64;
        let mut added: HashMap<DirectedEdge, u64> = HashMap::new();
        let mut lazy = 0u64;
        for i in 0..n {
            let mut cfg = ProcessConfig::intermediate(2, 8);
            cfg.launch_distribution = LaunchDistribution::ExactHarmonicFromInfinity;
            let mut p = init_process(cfg).unwrap();
            let mut rng = RngStream::new(51, i).rng();
            match p.step(&mut rng).unwrap().outcome {
                EventOutcome::Added(e) => *added.entry(e).or_insert(0) += 1,
                EventOutcome::Lazy(s) => {
                    assert!(s.y == 0 && s.x.abs() > 2 && s.x.abs() <= 8);
                    lazy += 1;
                }
                EventOutcome::Dropped => panic!("no drops expected"),
            }
        }
        let fl = lazy as f64 / n as f64;
        let sl = (exact.lazy_mass * (1.0 - exact.lazy_mass) / n as f64).sqrt();
        assert!((fl - exact.lazy_mass).abs() < 4.5 * sl, "lazy {fl} vs {}", exact.lazy_mass);
        for (e, &(v, _)) in &exact.entries {
            let f = added.get(e).copied().unwrap_or(0) as f64 / n as f64;
            let sigma = (v * (1.0 - v) / n as f64).sqrt();
            if v * n as f64 >= 10.0 {
                assert!((f - v).abs() < 4.5 * sigma, "{e:?}: {f} vs {v}");
            }
        }
    }

    #[test]
    fn run_horizon_zero_only_initial_snapshot() {
        let mut cfg = ProcessConfig::intermediate(2, 8);
        cfg.horizon_steps = Some(0);
        let t = run_process(cfg, RngStream::new(52, 0)).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.snapshots.len(), 1);
        assert_eq!(t.snapshots[0].vertices.len(), 5);
    }

    #[test]
    fn trajectory_determinism_and_validation() {
        let mut cfg = ProcessConfig::intermediate(2, 16);
        cfg.snapshot_steps = vec![8, 16, 32];
        let a = run_process(cfg.clone(), RngStream::new(53, 7)).unwrap();
        let b = run_process(cfg, RngStream::new(53, 7)).unwrap();
        assert_eq!(serde_json::to_string(&a.events).unwrap(), serde_json::to_string(&b.events).unwrap());
        assert_eq!(
            serde_json::to_string(&a.snapshots).unwrap(),
            serde_json::to_string(&b.snapshots).unwrap()
        );
        validate_trajectory(&a).unwrap();
        assert_eq!(a.events.len(), 32);
    }

    #[test]
    fn intermediate_gap_mean_near_rate() {
        let mut cfg = ProcessConfig::intermediate(4, 32);
        cfg.horizon_steps = Some(2000);
        let t = run_process(cfg, RngStream::new(54, 0)).unwrap();
        let mut last = 0.0;
        let mut gaps = Vec::new();
        for e in &t.events {
            gaps.push(e.timestamp - last);
            last = e.timestamp;
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        // mean exponential gap at rate N=32 is 1/32, stderr = mean/sqrt(k)
        let se = mean / (gaps.len() as f64).sqrt();
        assert!((mean - 1.0 / 32.0).abs() < 4.5 * se, "mean gap {mean}");
    }

    #[test]
    fn envelope_exit_recorded() {
        // tiny envelope forces an exit quickly; the horizon stays small so
        // the aggregate cannot outgrow the fixed launch ring at 4N
        let mut cfg = ProcessConfig::intermediate(2, 4);
        cfg.horizon_steps = Some(40);
        cfg.envelope = Some(EnvelopeSpec::DevastatingBox { m: 2, alpha: 0.1 });
        let t = run_process(cfg, RngStream::new(55, 0)).unwrap();
        if let Some(step) = t.first_envelope_exit {
            assert!(step >= 1 && step <= 40);
        }
        validate_trajectory(&t).unwrap();
    }

    #[test]
    fn window_restriction() {
        let mut cfg = ProcessConfig::intermediate(2, 8);
        cfg.horizon_steps = Some(40);
        let t = run_process(cfg, RngStream::new(56, 1)).unwrap();
        let k = WindowSpec::from_rect(crate::lattice::Rect { x_min: -2, x_max: 2, y_min: 0, y_max: 2 });
        let sub = restrict_to_window(&t.final_state, &k);
        for s in &sub.vertices {
            assert!(k.contains_site(*s) && t.final_state.contains_vertex(*s));
        }
        for e in &sub.edges {
            assert!(sub.vertices.contains(&e.from) || !k.sites.contains(&e.from));
        }
        // window covering everything returns the full graph
        let big = WindowSpec::from_rect(crate::lattice::Rect { x_min: -60, x_max: 60, y_min: -60, y_max: 60 });
        let all = restrict_to_window(&t.final_state, &big);
        assert_eq!(all.vertices.len(), t.final_state.cloud.len());
        assert_eq!(all.edges.len(), t.final_state.edges.len());
        // disjoint window is empty
        let far = WindowSpec::from_rect(crate::lattice::Rect { x_min: 500, x_max: 505, y_min: 0, y_max: 5 });
        let none = restrict_to_window(&t.final_state, &far);
        assert!(none.vertices.is_empty() && none.edges.is_empty());
    }
}
