//! Vertex and edge harmonic measures: exact tables from the Dirichlet
//! solver, Monte Carlo tables from the walk engine, the scaling constant c,
//! and the rescaled stationary-measure estimate.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::PointCloud;
use crate::lattice::{inner_boundary, outer_boundary, DirectedEdge, SegmentSpec, Site};
use crate::rng::RngStream;
use crate::solver::{edge_table_from_infinity, edge_table_from_site, SolverConfig};
use crate::walk::{
    run_to_absorption, AccelerationPolicy, LaunchSampler, LaunchSpec, Reinsertion, WalkOutcomeKind,
    DEFAULT_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Exact { inner_radius: i64, outer_radius: i64 },
    MonteCarlo { walkers: u64 },
}

/// Map from directed boundary edges of `base_set` to (value, stderr), with
/// absorber hits folded into a single lazy-mass entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicTable {
    pub entries: BTreeMap<DirectedEdge, (f64, f64)>,
    pub base_set: BTreeSet<Site>,
    pub absorber: BTreeSet<Site>,
    pub lazy_mass: f64,
    pub lazy_stderr: f64,
    pub dropped: u64,
    pub method: Method,
}

impl HarmonicTable {
    pub fn total_mass(&self) -> f64 {
        self.entries.values().map(|&(v, _)| v).sum::<f64>() + self.lazy_mass
    }

    pub fn value(&self, e: DirectedEdge) -> Result<f64> {
        self.entries
            .get(&e)
            .map(|&(v, _)| v)
            .ok_or(Error::EdgeNotInTable { edge: (e.from.x, e.from.y, e.to.x, e.to.y) })
    }
}

/// Exact edge harmonic measure of A (with an optional absorber folded into
/// the target set; its edges are reported only as aggregate lazy mass).
pub fn exact_edge_harmonic(
    a: &BTreeSet<Site>,
    absorber: &BTreeSet<Site>,
    cfg: &SolverConfig,
) -> Result<HarmonicTable> {
    let target: BTreeSet<Site> = a.union(absorber).copied().collect();
    let raw = edge_table_from_infinity(&target, cfg)?;
    Ok(split_entries(raw, a, absorber, cfg))
}

/// Finite-start variant: first-hit law from `start`.
pub fn exact_edge_harmonic_from(
    start: Site,
    a: &BTreeSet<Site>,
    absorber: &BTreeSet<Site>,
    cfg: &SolverConfig,
) -> Result<HarmonicTable> {
    let target: BTreeSet<Site> = a.union(absorber).copied().collect();
    let raw = edge_table_from_site(start, &target, cfg)?;
    Ok(split_entries(raw, a, absorber, cfg))
}

fn split_entries(
    raw: Vec<(DirectedEdge, f64, f64)>,
    a: &BTreeSet<Site>,
    absorber: &BTreeSet<Site>,
    cfg: &SolverConfig,
) -> HarmonicTable {
    let mut entries = BTreeMap::new();
    let mut lazy_mass = 0.0;
    let mut lazy_stderr = 0.0;
    for (e, v, gap) in raw {
        if a.contains(&e.to) {
            entries.insert(e, (v, gap));
        } else {
            lazy_mass += v;
            lazy_stderr += gap;
        }
    }
    HarmonicTable {
        entries,
        base_set: a.clone(),
        absorber: absorber.clone(),
        lazy_mass,
        lazy_stderr,
        dropped: 0,
        method: Method::Exact { inner_radius: cfg.inner_radius, outer_radius: cfg.outer_radius },
    }
}

/// Monte Carlo edge table: walkers launched per `launch`, absorbed on
/// A (per-edge counts) or on the absorber (lazy mass).
pub fn mc_edge_harmonic(
    a: &BTreeSet<Site>,
    absorber: &BTreeSet<Site>,
    walkers: u64,
    launch: LaunchSpec,
    policy: AccelerationPolicy,
    reinsert: bool,
    stream: RngStream,
) -> Result<HarmonicTable> {
    if walkers == 0 {
        return Err(Error::InvalidConfig("walkers must be >= 1".into()));
    }
    let max_norm = a.iter().chain(absorber.iter()).map(|s| s.norm2()).fold(0.0f64, f64::max);
    if (launch.radius as f64) <= max_norm {
        return Err(Error::LaunchInsideTarget { radius: launch.radius, target_norm: max_norm });
    }
    let sampler = LaunchSampler::new(launch)?;
    let cloud_a = PointCloud::from_sites(a.iter().copied());
    let cloud_b = PointCloud::from_sites(absorber.iter().copied());
    let reinsertion =
        if reinsert { Some(Reinsertion { escape_radius: 2 * launch.radius, sampler: &sampler }) } else { None };
    let chunk = 4096u64;
    let n_chunks = walkers.div_ceil(chunk);
    let partials: Vec<(BTreeMap<DirectedEdge, u64>, u64, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts: BTreeMap<DirectedEdge, u64> = BTreeMap::new();
            let mut lazy = 0u64;
            let mut dropped = 0u64;
            for i in (c * chunk)..((c + 1) * chunk).min(walkers) {
                let mut rng = stream.child(i).rng();
                let start = sampler.sample(&mut rng);
                let out = run_to_absorption(
                    start,
                    &cloud_a,
                    &cloud_b,
                    policy,
                    DEFAULT_BUDGET,
                    &mut rng,
                    reinsertion.as_ref(),
                );
                match out.kind {
                    WalkOutcomeKind::HitTarget(e) => *counts.entry(e).or_insert(0) += 1,
                    WalkOutcomeKind::HitAbsorber(_) => lazy += 1,
                    WalkOutcomeKind::BudgetExhausted => dropped += 1,
                }
            }
            (counts, lazy, dropped)
        })
        .collect();
    let mut entries: BTreeMap<DirectedEdge, (f64, f64)> = BTreeMap::new();
    let mut lazy = 0u64;
    let mut dropped = 0u64;
    let mut merged: BTreeMap<DirectedEdge, u64> = BTreeMap::new();
    for (counts, l, d) in partials {
        lazy += l;
        dropped += d;
        for (e, c) in counts {
            *merged.entry(e).or_insert(0) += c;
        }
    }
    let n = walkers as f64;
    for (e, c) in merged {
        let p = c as f64 / n;
        entries.insert(e, (p, (p * (1.0 - p) / n).sqrt()));
    }
    let pl = lazy as f64 / n;
    Ok(HarmonicTable {
        entries,
        base_set: a.clone(),
        absorber: absorber.clone(),
        lazy_mass: pl,
        lazy_stderr: (pl * (1.0 - pl) / n).sqrt(),
        dropped,
        method: Method::MonteCarlo { walkers },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexSide {
    /// Head sum Σ_{e.to = x}: the vertex harmonic measure H_A(x).
    InnerVertex,
    /// Tail sum Σ_{e.from = x}: the edge harmonic measure H^e_A(x) of an
    /// outer-boundary vertex.
    OuterVertex,
}

pub fn vertex_harmonic(table: &HarmonicTable, x: Site, side: VertexSide) -> Result<f64> {
    let ok = match side {
        VertexSide::InnerVertex => inner_boundary(&table.base_set).contains(&x),
        VertexSide::OuterVertex => {
            let union: BTreeSet<Site> =
                table.base_set.union(&table.absorber).copied().collect();
            outer_boundary(&union).contains(&x)
        }
    };
    if !ok {
        return Err(Error::SiteNotOnBoundary { site: (x.x, x.y) });
    }
    Ok(table
        .entries
        .iter()
        .filter(|(e, _)| match side {
            VertexSide::InnerVertex => e.to == x,
            VertexSide::OuterVertex => e.from == x,
        })
        .map(|(_, &(v, _))| v)
        .sum())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingEstimate {
    /// (n, a_n) with a_n = n · (head-sum edge-harmonic mass of the origin in D_n).
    pub samples: Vec<(u64, f64)>,
    /// The alternative reading: n · H^e at the outer vertex (0,1) of D_n.
    pub outer_samples: Vec<(u64, f64)>,
    pub extrapolated_limit: f64,
    pub extrapolated_c: f64,
    pub cauchy_gaps: Vec<f64>,
    pub convergence_warning: bool,
}

/// Aitken Δ² acceleration of the last three terms.
pub fn aitken(x0: f64, x1: f64, x2: f64) -> f64 {
    let d = (x2 - x1) - (x1 - x0);
    if d.abs() < 1e-300 {
        x2
    } else {
        x2 - (x2 - x1) * (x2 - x1) / d
    }
}

/// The scaling constant from the sequence a_n = n·H^e_{D_n}(0); c = limit/2.
pub fn estimate_scaling_constant(n_list: &[u64]) -> Result<ScalingEstimate> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("n_list must be nonempty and increasing".into()));
    }
    let mut samples = Vec::new();
    let mut outer_samples = Vec::new();
    for &n in n_list {
        let target: BTreeSet<Site> = SegmentSpec::new(n).sites().into_iter().collect();
        let cfg = SolverConfig {
            inner_radius: 4 * n as i64,
            outer_radius: 8 * n as i64,
            tolerance: 1e-12,
            max_unknowns: 40_000_000,
        };
        let table = exact_edge_harmonic(&target, &BTreeSet::new(), &cfg)?;
        let head = vertex_harmonic(&table, Site::new(0, 0), VertexSide::InnerVertex)?;
        let outer = vertex_harmonic(&table, Site::new(0, 1), VertexSide::OuterVertex)?;
        samples.push((n, n as f64 * head));
        outer_samples.push((n, n as f64 * outer));
    }
    let vals: Vec<f64> = samples.iter().map(|&(_, a)| a).collect();
    let cauchy_gaps: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut warning = cauchy_gaps.windows(2).any(|w| w[1] >= w[0]);
    let extrapolated_limit = match vals.len() {
        0 => unreachable!(),
        1 | 2 => {
            warning = true;
            *vals.last().unwrap()
        }
        k => aitken(vals[k - 3], vals[k - 2], vals[k - 1]),
    };
    Ok(ScalingEstimate {
        samples,
        outer_samples,
        extrapolated_limit,
        extrapolated_c: extrapolated_limit / 2.0,
        cauchy_gaps,
        convergence_warning: warning,
    })
}

/// Stationary harmonic measure estimate (1/c)·N·H^e_{A∪D_N}(e).
pub fn stationary_harmonic_estimate(
    a: &BTreeSet<Site>,
    e: DirectedEdge,
    n: u64,
    c_est: f64,
    cfg: Option<SolverConfig>,
) -> Result<f64> {
    let mut target: BTreeSet<Site> = SegmentSpec::new(n).sites().into_iter().collect();
    target.extend(a.iter().copied());
    let cfg = cfg.unwrap_or_else(|| SolverConfig::for_target(&target));
    let table = edge_table_from_infinity(&target, &cfg)?;
    let v = table
        .iter()
        .find(|&&(te, _, _)| te == e)
        .map(|&(_, v, _)| v)
        .ok_or(Error::EdgeNotInTable { edge: (e.from.x, e.from.y, e.to.x, e.to.y) })?;
    Ok(n as f64 * v / c_est)
}

/// Same estimate at two segment lengths; returns (estimate at the larger N,
/// convergence gap between the two).
pub fn stationary_harmonic_pair(
    a: &BTreeSet<Site>,
    e: DirectedEdge,
    n1: u64,
    n2: u64,
    c_est: f64,
) -> Result<(f64, f64)> {
    let v1 = stationary_harmonic_estimate(a, e, n1, c_est, None)?;
    let v2 = stationary_harmonic_estimate(a, e, n2, c_est, None)?;
    Ok((v2, (v2 - v1).abs()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeightBoundReport {
    /// Per site: (site, N·H^e(x), ratio to sqrt(|y| ∨ 1)).
    pub rows: Vec<(Site, f64, f64)>,
    /// Smallest constant C with N·H^e(x) ≤ C·sqrt(|y| ∨ 1) on the list.
    pub fitted_c: f64,
    pub worst: Option<(Site, f64)>,
}

/// Empirical height bound: N·H^e at each listed outer site of A∪D_N.
pub fn height_bound_check(
    a: &BTreeSet<Site>,
    n: u64,
    sites: &[Site],
) -> Result<HeightBoundReport> {
    if sites.is_empty() {
        return Ok(HeightBoundReport { rows: Vec::new(), fitted_c: 0.0, worst: None });
    }
    let mut target: BTreeSet<Site> = SegmentSpec::new(n).sites().into_iter().collect();
    target.extend(a.iter().copied());
    let cfg = SolverConfig::for_target(&target);
    let table = edge_table_from_infinity(&target, &cfg)?;
    let mut tail_sum: BTreeMap<Site, f64> = BTreeMap::new();
    for &(e, v, _) in &table {
        *tail_sum.entry(e.from).or_insert(0.0) += v;
    }
    let mut rows = Vec::new();
    let mut fitted_c = 0.0f64;
    let mut worst = None;
    for &s in sites {
        let he = n as f64 * tail_sum.get(&s).copied().unwrap_or(0.0);
        let ratio = he / ((s.y.abs().max(1)) as f64).sqrt();
        if ratio > fitted_c {
            fitted_c = ratio;
            worst = Some((s, ratio));
        }
        rows.push((s, he, ratio));
    }
    Ok(HeightBoundReport { rows, fitted_c, worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site_set(sites: &[(i64, i64)]) -> BTreeSet<Site> {
        sites.iter().map(|&(x, y)| Site::new(x, y)).collect()
    }

    fn quick_cfg() -> SolverConfig {
        SolverConfig { inner_radius: 32, outer_radius: 64, tolerance: 1e-12, max_unknowns: 2_000_000 }
    }

    #[test]
    fn single_site_quarter_per_edge() {
        let a = site_set(&[(0, 0)]);
        let t = exact_edge_harmonic(&a, &BTreeSet::new(), &quick_cfg()).unwrap();
        assert_eq!(t.entries.len(), 4);
        for &(v, _) in t.entries.values() {
            assert!((v - 0.25).abs() < 1e-9);
        }
        assert!((t.total_mass() - 1.0).abs() < 1e-9);
        assert_eq!(t.lazy_mass, 0.0);
    }

    #[test]
    fn d1_endpoints_beat_center() {
        let a = site_set(&[(-1, 0), (0, 0), (1, 0)]);
        let t = exact_edge_harmonic(&a, &BTreeSet::new(), &quick_cfg()).unwrap();
        assert!((t.total_mass() - 1.0).abs() < 1e-9);
        let end = vertex_harmonic(&t, Site::new(1, 0), VertexSide::InnerVertex).unwrap();
        let center = vertex_harmonic(&t, Site::new(0, 0), VertexSide::InnerVertex).unwrap();
        assert!(end > center, "endpoint {end} vs center {center}");
        // H^e at an outer vertex genuinely differs from H at the inner
        // vertex below it; the two measures must not be conflated.
        let outer = vertex_harmonic(&t, Site::new(0, 1), VertexSide::OuterVertex).unwrap();
        assert!((outer - center).abs() > 1e-6);
    }

    #[test]
    fn vertex_harmonic_errors_off_boundary() {
        let a = site_set(&[(0, 0)]);
        let t = exact_edge_harmonic(&a, &BTreeSet::new(), &quick_cfg()).unwrap();
        assert!(vertex_harmonic(&t, Site::new(5, 5), VertexSide::InnerVertex).is_err());
        assert!(vertex_harmonic(&t, Site::new(0, 0), VertexSide::OuterVertex).is_err());
        // single-site target: all mass enters the one inner vertex
        let head = vertex_harmonic(&t, Site::new(0, 0), VertexSide::InnerVertex).unwrap();
        assert!((head - 1.0).abs() < 1e-9);
    }

    #[test]
    fn head_sums_partition_total_mass() {
        let a = site_set(&[(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1), (2, 0)]);
        let t = exact_edge_harmonic(&a, &BTreeSet::new(), &quick_cfg()).unwrap();
        let total: f64 = inner_boundary(&a)
            .iter()
            .map(|&x| vertex_harmonic(&t, x, VertexSide::InnerVertex).unwrap())
            .sum();
        assert!((total - t.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn intermediate_geometry_lazy_mass() {
        // A = D_2 with absorber D_8 \ D_2
        let a: BTreeSet<Site> = SegmentSpec::new(2).sites().into_iter().collect();
        let d8: BTreeSet<Site> = SegmentSpec::new(8).sites().into_iter().collect();
        let absorber: BTreeSet<Site> = d8.difference(&a).copied().collect();
        let cfg = SolverConfig { inner_radius: 40, outer_radius: 80, tolerance: 1e-12, max_unknowns: 2_000_000 };
        let t = exact_edge_harmonic(&a, &absorber, &cfg).unwrap();
        assert!((t.total_mass() - 1.0).abs() < 1e-9);
        assert!(t.lazy_mass > 0.5, "most walkers land on the long absorber");
        let edge_mass: f64 = t.entries.values().map(|&(v, _)| v).sum();
        assert!((edge_mass + t.lazy_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mc_agrees_with_exact_single_site() {
        let a = site_set(&[(0, 0)]);
        let t = mc_edge_harmonic(
            &a,
            &BTreeSet::new(),
            100_000,
            LaunchSpec::exact(16),
            AccelerationPolicy::default_jump(),
            true,
            RngStream::new(41, 0),
        )
        .unwrap();
        for &(v, se) in t.entries.values() {
            assert!((v - 0.25).abs() < 4.0 * se);
        }
        assert_eq!(t.dropped, 0);
    }

    #[test]
    fn mc_agrees_with_exact_d1() {
        let a = site_set(&[(-1, 0), (0, 0), (1, 0)]);
        let exact = exact_edge_harmonic(&a, &BTreeSet::new(), &quick_cfg()).unwrap();
        let mc = mc_edge_harmonic(
            &a,
            &BTreeSet::new(),
            200_000,
            LaunchSpec::exact(16),
            AccelerationPolicy::default_jump(),
            true,
            RngStream::new(42, 0),
        )
        .unwrap();
        for (e, &(v, _)) in &exact.entries {
            let (f, se) = mc.entries.get(e).copied().unwrap_or((0.0, 0.0));
            let sigma = se.max((v * (1.0 - v) / 200_000.0).sqrt());
            assert!((f - v).abs() < 4.5 * sigma, "{e:?}: mc {f} exact {v}");
        }
    }

    #[test]
    fn mc_lazy_mass_matches_exact() {
        let a: BTreeSet<Site> = SegmentSpec::new(2).sites().into_iter().collect();
        let d8: BTreeSet<Site> = SegmentSpec::new(8).sites().into_iter().collect();
        let absorber: BTreeSet<Site> = d8.difference(&a).copied().collect();
        let cfg = SolverConfig { inner_radius: 40, outer_radius: 80, tolerance: 1e-12, max_unknowns: 2_000_000 };
        let exact = exact_edge_harmonic(&a, &absorber, &cfg).unwrap();
        let mc = mc_edge_harmonic(
            &a,
            &absorber,
            200_000,
            LaunchSpec::exact(32),
            AccelerationPolicy::default_jump(),
            true,
            RngStream::new(43, 0),
        )
        .unwrap();
        let sigma = mc.lazy_stderr;
        assert!((mc.lazy_mass - exact.lazy_mass).abs() < 4.0 * sigma);
    }

    #[test]
    fn launch_inside_target_rejected() {
        let a: BTreeSet<Site> = SegmentSpec::new(8).sites().into_iter().collect();
        let err = mc_edge_harmonic(
            &a,
            &BTreeSet::new(),
            10,
            LaunchSpec::uniform(4),
            AccelerationPolicy::None,
            true,
            RngStream::new(1, 0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn scaling_estimate_structure() {
        let est = estimate_scaling_constant(&[4, 8, 16]).unwrap();
        assert_eq!(est.samples.len(), 3);
        assert_eq!(est.cauchy_gaps.len(), 2);
        assert!((est.extrapolated_c - est.extrapolated_limit / 2.0).abs() < 1e-15);
        assert!(est.extrapolated_c > 0.0);
        // degenerate single-n input: warning set, no extrapolation
        let single = estimate_scaling_constant(&[4]).unwrap();
        assert!(single.convergence_warning);
        assert_eq!(single.extrapolated_limit, single.samples[0].1);
        assert!(estimate_scaling_constant(&[8, 8]).is_err());
    }

    #[test]
    fn stationary_estimate_translation_invariance() {
        let c = 0.5; // any positive constant; invariance is what is tested
        let e0 = DirectedEdge::new(Site::new(0, 1), Site::new(0, 0));
        let e1 = DirectedEdge::new(Site::new(1, 1), Site::new(1, 0));
        let a = BTreeSet::new();
        let v0 = stationary_harmonic_estimate(&a, e0, 64, c, None).unwrap();
        let v1 = stationary_harmonic_estimate(&a, e1, 64, c, None).unwrap();
        assert!((v0 - v1).abs() / v0 < 1e-3, "{v0} vs {v1}");
        let (v2, gap) = stationary_harmonic_pair(&a, e0, 32, 64, c).unwrap();
        assert!(v2 > 0.0 && gap < 0.1 * v2);
    }

    #[test]
    fn height_bound_report() {
        let a = BTreeSet::new();
        let empty = height_bound_check(&a, 16, &[]).unwrap();
        assert!(empty.rows.is_empty() && empty.worst.is_none());
        let rep = height_bound_check(&a, 16, &[Site::new(0, 1), Site::new(3, 1)]).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows.iter().all(|&(_, he, _)| he > 0.0));
        assert!(rep.fitted_c > 0.0);
        for &(_, he, ratio) in &rep.rows {
            assert!(he <= rep.fitted_c * ratio.max(1.0) + 1e-12 || ratio <= rep.fitted_c + 1e-12);
        }
    }
}
