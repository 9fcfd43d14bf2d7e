//! Simple random walk with absorption, ring launches, and exact square-jump
//! acceleration.
//!
//! Acceleration never changes the hitting law: when the closed square of
//! half-width h around the walker contains no target or absorber site (which
//! the capped ℓ∞ distance query certifies), the walker's exit position from
//! that square has the exact law computed in `squares`, so replacing the
//! intervening steps by one draw from that law is a measure-preserving
//! shortcut.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::index::Region;
use crate::lattice::{DirectedEdge, Site, NEIGHBOR_OFFSETS};
use crate::rng::RngStream;
use crate::solver::{harmonic_ring_weights, ring_sites, SolverConfig};
use crate::squares::{cached_law, MAX_HALFWIDTH_LOG2};

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// Largest ring radius for which the exact launch weights are computed.
pub const MAX_EXACT_LAUNCH_RADIUS: i64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LaunchDistribution {
    UniformOnRing,
    ExactHarmonicFromInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LaunchSpec {
    pub radius: i64,
    pub distribution: LaunchDistribution,
}

impl LaunchSpec {
    pub fn uniform(radius: i64) -> Self {
        LaunchSpec { radius, distribution: LaunchDistribution::UniformOnRing }
    }

    pub fn exact(radius: i64) -> Self {
        LaunchSpec { radius, distribution: LaunchDistribution::ExactHarmonicFromInfinity }
    }
}

/// Precomputed launch table for one ring: the site list and, for the exact
/// distribution, a cumulative table of harmonic-from-infinity head weights.
pub struct LaunchSampler {
    pub spec: LaunchSpec,
    sites: Vec<Site>,
    cdf: Option<Vec<f64>>,
}

/// The exact ring weights need a solver run; memoize the cumulative table
/// per radius so per-replica sampler construction stays cheap.
fn cached_exact_cdf(radius: i64) -> Result<Vec<f64>> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<i64, Vec<f64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(cdf) = cache.lock().unwrap().get(&radius) {
        return Ok(cdf.clone());
    }
    let cfg = SolverConfig {
        inner_radius: 4 * radius,
        outer_radius: 8 * radius,
        tolerance: 1e-12,
        max_unknowns: 40_000_000,
    };
    let w = harmonic_ring_weights(radius, &cfg)?;
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut cdf = Vec::with_capacity(w.len());
    for v in w {
        acc += v / total;
        cdf.push(acc);
    }
    if let Some(l) = cdf.last_mut() {
        *l = 1.0;
    }
    cache.lock().unwrap().insert(radius, cdf.clone());
    Ok(cdf)
}

impl LaunchSampler {
    pub fn new(spec: LaunchSpec) -> Result<Self> {
        if spec.radius < 1 {
            return Err(Error::InvalidConfig("launch radius must be >= 1".into()));
        }
        let sites = ring_sites(spec.radius);
        let cdf = match spec.distribution {
            LaunchDistribution::UniformOnRing => None,
            LaunchDistribution::ExactHarmonicFromInfinity => {
                if spec.radius > MAX_EXACT_LAUNCH_RADIUS {
                    return Err(Error::InvalidConfig(format!(
                        "exact launch unsupported beyond radius {MAX_EXACT_LAUNCH_RADIUS} \
                         (requested {})",
                        spec.radius
                    )));
                }
                Some(cached_exact_cdf(spec.radius)?)
            }
        };
        Ok(LaunchSampler { spec, sites, cdf })
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Site {
        match &self.cdf {
            None => self.sites[rng.gen_range(0..self.sites.len())],
            Some(cdf) => {
                let u: f64 = rng.gen();
                let i = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                self.sites[i]
            }
        }
    }
}

/// One-shot launch; engines that launch repeatedly should hold a sampler.
pub fn launch(spec: LaunchSpec, stream: RngStream) -> Result<Site> {
    let sampler = LaunchSampler::new(spec)?;
    let mut rng = stream.rng();
    Ok(sampler.sample(&mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AccelerationPolicy {
    None,
    SquareJump { min_halfwidth_log2: u32, max_halfwidth_log2: u32 },
}

impl AccelerationPolicy {
    pub fn default_jump() -> Self {
        AccelerationPolicy::SquareJump { min_halfwidth_log2: 1, max_halfwidth_log2: MAX_HALFWIDTH_LOG2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkerState {
    pub position: Site,
    pub previous: Option<Site>,
    pub steps_taken: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WalkOutcomeKind {
    HitTarget(DirectedEdge),
    HitAbsorber(Site),
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOutcome {
    pub kind: WalkOutcomeKind,
    pub steps: u64,
}

/// Relaunch rule: a walker drifting past `escape_radius` is replaced by a
/// fresh draw from the launch ring.
pub struct Reinsertion<'a> {
    pub escape_radius: i64,
    pub sampler: &'a LaunchSampler,
}

/// Buffered 2-bit direction draws; one ChaCha word feeds 16 steps.
struct DirSource {
    bits: u32,
    remaining: u32,
}

impl DirSource {
    fn new() -> Self {
        DirSource { bits: 0, remaining: 0 }
    }

    #[inline]
    fn next(&mut self, rng: &mut ChaCha12Rng) -> usize {
        if self.remaining == 0 {
            self.bits = rng.gen();
            self.remaining = 16;
        }
        let d = (self.bits & 3) as usize;
        self.bits >>= 2;
        self.remaining -= 1;
        d
    }
}

/// Run a walker to absorption on `target` (reported as the traversed edge)
/// or `absorber` (reported as the site). Exact SRW law of the pair
/// (first-hit set, last edge) regardless of the acceleration policy.
pub fn run_to_absorption(
    start: Site,
    target: &dyn Region,
    absorber: &dyn Region,
    policy: AccelerationPolicy,
    budget: u64,
    rng: &mut ChaCha12Rng,
    reinsertion: Option<&Reinsertion>,
) -> WalkOutcome {
    debug_assert!(!target.contains(start) && !absorber.contains(start));
    debug_assert!(!target.is_empty() || !absorber.is_empty());
    let mut pos = start;
    let mut steps: u64 = 0;
    let mut dirs = DirSource::new();
    let (jump_min, jump_max) = match policy {
        AccelerationPolicy::None => (0u32, 0u32),
        AccelerationPolicy::SquareJump { min_halfwidth_log2, max_halfwidth_log2 } => {
            assert!(max_halfwidth_log2 <= MAX_HALFWIDTH_LOG2);
            (min_halfwidth_log2, max_halfwidth_log2)
        }
    };
    loop {
        if steps >= budget {
            return WalkOutcome { kind: WalkOutcomeKind::BudgetExhausted, steps };
        }
        if let Some(re) = reinsertion {
            if pos.x.abs().max(pos.y.abs()) > re.escape_radius {
                pos = re.sampler.sample(rng);
                steps += 1;
                continue;
            }
        }
        if jump_max > 0 {
            // Exact capped distance to the nearest obstacle; a closed square
            // of half-width h fits iff every obstacle is at distance >= h+1,
            // so the largest admissible half-width is d-1.
            let cap = (1i64 << jump_max) + 2;
            let d_t = target.linf_dist(pos, cap);
            let d = d_t.min(absorber.linf_dist(pos, d_t));
            let room = d - 1;
            if room >= (1 << jump_min) {
                let log2h = (63 - (room as u64).leading_zeros()).min(jump_max);
                debug_assert!(d > (1i64 << log2h));
                let off = cached_law(log2h).sample(rng);
                pos = Site::new(pos.x + off.x, pos.y + off.y);
                debug_assert!(!target.contains(pos) && !absorber.contains(pos));
                steps += 1;
                continue;
            }
        }
        let (dx, dy) = NEIGHBOR_OFFSETS[dirs.next(rng)];
        let next = Site::new(pos.x + dx, pos.y + dy);
        steps += 1;
        if target.contains(next) {
            let edge = DirectedEdge::new(pos, next);
            debug_assert!(!target.contains(edge.from) && !absorber.contains(edge.from));
            return WalkOutcome { kind: WalkOutcomeKind::HitTarget(edge), steps };
        }
        if absorber.contains(next) {
            return WalkOutcome { kind: WalkOutcomeKind::HitAbsorber(next), steps };
        }
        pos = next;
    }
}
