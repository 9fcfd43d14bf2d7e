//! Obstacle site sets for the walk engine: constant-time membership plus
//! exact (capped) ℓ∞ distance queries used to size square jumps.
//!
//! Segments are handled analytically; growing aggregates go through a
//! sparse cell index so distance probes stay cheap as the set grows.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::lattice::Site;

/// FxHash-style multiplicative hasher; SipHash is measurably slower for the
/// per-step membership probes in the hot walk loop.
#[derive(Default, Clone)]
pub struct FxHasher {
    hash: u64,
}

const FX_SEED: u64 = 0x51_7c_c1_b7_27_22_0a_95;

impl Hasher for FxHasher {
    fn finish(&self) -> u64 {
        self.hash
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(b as u64);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.hash = (self.hash.rotate_left(5) ^ v).wrapping_mul(FX_SEED);
    }

    fn write_i64(&mut self, v: i64) {
        self.write_u64(v as u64);
    }

    fn write_u8(&mut self, v: u8) {
        self.write_u64(v as u64);
    }

    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }
}

pub type FxBuild = BuildHasherDefault<FxHasher>;
pub type SiteSet = std::collections::HashSet<Site, FxBuild>;

/// A set of sites a walker can be absorbed on.
pub trait Region {
    fn contains(&self, s: Site) -> bool;

    /// Exact ℓ∞ distance from `s` to the nearest region site, capped:
    /// any return value ≥ `cap` means "nothing within cap".
    fn linf_dist(&self, s: Site, cap: i64) -> i64;

    fn is_empty(&self) -> bool;
}

/// Empty absorber.
pub struct EmptyRegion;

impl Region for EmptyRegion {
    fn contains(&self, _s: Site) -> bool {
        false
    }

    fn linf_dist(&self, _s: Site, cap: i64) -> i64 {
        cap
    }

    fn is_empty(&self) -> bool {
        true
    }
}

/// The segment D_n.
pub struct SegmentRegion {
    pub half_len: i64,
}

impl Region for SegmentRegion {
    fn contains(&self, s: Site) -> bool {
        s.y == 0 && s.x.abs() <= self.half_len
    }

    fn linf_dist(&self, s: Site, _cap: i64) -> i64 {
        let dx = (s.x.abs() - self.half_len).max(0);
        dx.max(s.y.abs())
    }

    fn is_empty(&self) -> bool {
        false
    }
}

/// D_outer \ D_inner, the absorbing portion of the boundary segment in the
/// intermediate process.
pub struct SegmentGapRegion {
    pub outer: i64,
    pub inner: i64,
}

impl Region for SegmentGapRegion {
    fn contains(&self, s: Site) -> bool {
        s.y == 0 && s.x.abs() > self.inner && s.x.abs() <= self.outer
    }

    fn linf_dist(&self, s: Site, _cap: i64) -> i64 {
        let ax = s.x.abs();
        let dx = if ax > self.outer {
            ax - self.outer
        } else if ax <= self.inner {
            self.inner + 1 - ax
        } else {
            0
        };
        dx.max(s.y.abs())
    }

    fn is_empty(&self) -> bool {
        self.outer <= self.inner
    }
}

const CELL_BITS: u32 = 5;
const CELL: i64 = 1 << CELL_BITS;

fn cell_of(s: Site) -> (i64, i64) {
    (s.x >> CELL_BITS, s.y >> CELL_BITS)
}

/// A growing explicit site set with a coarse cell index.
#[derive(Default, Clone)]
pub struct PointCloud {
    set: SiteSet,
    cells: HashMap<(i64, i64), Vec<Site>, FxBuild>,
    max_norm: f64,
    linf_extent: i64,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_sites<I: IntoIterator<Item = Site>>(sites: I) -> Self {
        let mut c = Self::new();
        for s in sites {
            c.insert(s);
        }
        c
    }

    pub fn insert(&mut self, s: Site) -> bool {
        if self.set.insert(s) {
            self.cells.entry(cell_of(s)).or_default().push(s);
            self.max_norm = self.max_norm.max(s.norm2());
            self.linf_extent = self.linf_extent.max(s.x.abs().max(s.y.abs()));
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Largest L2 norm over members (the radius, when 0 is a member).
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// Largest l-inf norm over members.
    pub fn linf_extent(&self) -> i64 {
        self.linf_extent
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> {
        self.set.iter()
    }
}

impl Region for PointCloud {
    fn contains(&self, s: Site) -> bool {
        self.set.contains(&s)
    }

    fn linf_dist(&self, s: Site, cap: i64) -> i64 {
        if self.set.is_empty() {
            return cap;
        }
        // Every member is within linf_extent of the origin, so the distance
        // is at least ||s||_inf - extent; skip straight past empty rings.
        let lb0 = (s.x.abs().max(s.y.abs()) - self.linf_extent).max(0);
        if lb0 >= cap {
            return cap;
        }
        let (cx, cy) = cell_of(s);
        let mut best = cap;
        let mut ring = ((lb0 >> CELL_BITS) - 1).max(0);
        loop {
            // Sites in a cell at cell-ring r are at least (r-1)*CELL + 1 away.
            let lb = if ring == 0 { 0 } else { (ring - 1) * CELL + 1 };
            if lb >= best {
                return best;
            }
            if ring == 0 {
                if let Some(v) = self.cells.get(&(cx, cy)) {
                    for &t in v {
                        best = best.min(s.linf_dist(t));
                    }
                }
            } else {
                for dx in -ring..=ring {
                    for &dy in &[-ring, ring] {
                        if let Some(v) = self.cells.get(&(cx + dx, cy + dy)) {
                            for &t in v {
                                best = best.min(s.linf_dist(t));
                            }
                        }
                    }
                }
                for dy in (-ring + 1)..ring {
                    for &dx in &[-ring, ring] {
                        if let Some(v) = self.cells.get(&(cx + dx, cy + dy)) {
                            for &t in v {
                                best = best.min(s.linf_dist(t));
                            }
                        }
                    }
                }
            }
            ring += 1;
        }
    }

    fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}

/// Union view over a target and an optional absorber.
pub struct UnionRegion<'a> {
    pub parts: Vec<&'a dyn Region>,
}

impl Region for UnionRegion<'_> {
    fn contains(&self, s: Site) -> bool {
        self.parts.iter().any(|r| r.contains(s))
    }

    fn linf_dist(&self, s: Site, cap: i64) -> i64 {
        // Shrinking the cap lets cheap analytic parts bound the expensive
        // probes; list analytic regions first when building the union.
        let mut best = cap;
        for r in &self.parts {
            best = best.min(r.linf_dist(s, best));
        }
        best
    }

    fn is_empty(&self) -> bool {
        self.parts.iter().all(|r| r.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_exact() {
        let seg = SegmentRegion { half_len: 4 };
        assert_eq!(seg.linf_dist(Site::new(0, 3), 100), 3);
        assert_eq!(seg.linf_dist(Site::new(7, 1), 100), 3);
        assert_eq!(seg.linf_dist(Site::new(-6, -5), 100), 5);
        assert!(seg.contains(Site::new(-4, 0)));
        assert!(!seg.contains(Site::new(5, 0)));
    }

    #[test]
    fn gap_distance_exact() {
        let gap = SegmentGapRegion { outer: 8, inner: 2 };
        assert!(gap.contains(Site::new(3, 0)));
        assert!(gap.contains(Site::new(-8, 0)));
        assert!(!gap.contains(Site::new(2, 0)));
        assert!(!gap.contains(Site::new(9, 0)));
        assert_eq!(gap.linf_dist(Site::new(0, 0), 100), 3);
        assert_eq!(gap.linf_dist(Site::new(0, 5), 100), 5);
        assert_eq!(gap.linf_dist(Site::new(12, 2), 100), 4);
    }

    #[test]
    fn cloud_distance_matches_brute_force() {
        let pts = [
            Site::new(0, 0),
            Site::new(10, 3),
            Site::new(-40, 2),
            Site::new(33, 33),
            Site::new(100, -5),
        ];
        let cloud = PointCloud::from_sites(pts);
        for probe in [
            Site::new(0, 0),
            Site::new(5, 5),
            Site::new(-35, 0),
            Site::new(60, 10),
            Site::new(200, 200),
        ] {
            let brute = pts.iter().map(|&p| probe.linf_dist(p)).min().unwrap();
            let cap = 1_000;
            assert_eq!(cloud.linf_dist(probe, cap), brute.min(cap));
        }
        assert_eq!(cloud.linf_dist(Site::new(500, 500), 16), 16);
    }
}
