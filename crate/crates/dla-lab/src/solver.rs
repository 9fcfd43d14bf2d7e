//! Exact Dirichlet solves on the square lattice.
//!
//! The central object is the edge harmonic measure of a finite set T: the
//! probability that a walker from far away first meets T along a given
//! directed edge. By reversibility this is proportional to the escape
//! probability of the edge tail,
//!
//!   value(u→v) = esc_R(u) / Z_R,   Z_R = Σ_{edges u'→v'} esc_R(u'),
//!
//! where esc_R(u) is the probability that a walk from u reaches the ring at
//! Euclidean radius R before hitting T. Each radius requires one sparse
//! symmetric positive-definite solve (conjugate gradient); the ratio
//! converges at rate 1/R, so two radii and one Richardson step give the
//! limit with error on the order of the squared gap.
//!
//! Finite-start measures are obtained from the Green's function of the same
//! domain: (I - P)ψ = δ_x gives the expected visits ψ, the first-hit mass
//! along u→v is ψ(u)/4, and the mass that escapes to the ring is folded
//! back through the from-infinity table (the walk re-enters from far away),
//! which removes the slow logarithmic truncation bias.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::Error;
use crate::lattice::{neighbors, DirectedEdge, Site, NEIGHBOR_OFFSETS};

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub inner_radius: i64,
    pub outer_radius: i64,
    /// Relative residual target for the conjugate-gradient iteration.
    pub tolerance: f64,
    pub max_unknowns: usize,
}

impl SolverConfig {
    /// Radii scaled to the target set: inner at max(32, 4·r_T), outer at
    /// twice that.
    pub fn for_target(target: &BTreeSet<Site>) -> Self {
        let r_t = target
            .iter()
            .map(|s| s.norm2())
            .fold(0.0f64, f64::max)
            .ceil() as i64;
        let inner = (4 * (r_t + 1)).max(32);
        SolverConfig {
            inner_radius: inner,
            outer_radius: 2 * inner,
            tolerance: 1e-12,
            max_unknowns: 40_000_000,
        }
    }
}

/// Sparse structure of the ball-minus-target domain. Site indices are
/// assigned in scan order, so everything downstream is deterministic.
pub struct Domain {
    pub radius: i64,
    pub sites: Vec<Site>,
    /// For each domain site, indices of its 4 neighbors (-1 when the
    /// neighbor is outside the domain: in T or beyond the ring).
    pub neigh: Vec<[i32; 4]>,
    /// Number of neighbors beyond the ring (escape moves), per site.
    pub escape_degree: Vec<u8>,
    grid: Vec<i32>,
    grid_radius: i64,
}

impl Domain {
    pub fn build(target: &BTreeSet<Site>, radius: i64, max_unknowns: usize) -> Result<Domain, Error> {
        let r2 = radius * radius;
        let span = (2 * radius + 1) as usize;
        if span * span > 4 * max_unknowns + 8 {
            return Err(Error::SystemTooLarge { unknowns: span * span, limit: max_unknowns });
        }
        let mut grid = vec![-1i32; span * span];
        let mut sites = Vec::new();
        for x in -radius..=radius {
            for y in -radius..=radius {
                if x * x + y * y < r2 {
                    let s = Site::new(x, y);
                    if !target.contains(&s) {
                        if sites.len() >= max_unknowns {
                            return Err(Error::SystemTooLarge {
                                unknowns: sites.len() + 1,
                                limit: max_unknowns,
                            });
                        }
                        grid[((x + radius) as usize) * span + (y + radius) as usize] =
                            sites.len() as i32;
                        sites.push(s);
                    }
                }
            }
        }
        if sites.is_empty() {
            return Err(Error::EmptyDomain { radius });
        }
        let lookup = |s: Site| -> i32 {
            if s.x.abs() > radius || s.y.abs() > radius {
                return -1;
            }
            grid[((s.x + radius) as usize) * span + (s.y + radius) as usize]
        };
        let mut neigh = vec![[-1i32; 4]; sites.len()];
        let mut escape_degree = vec![0u8; sites.len()];
        for (i, &s) in sites.iter().enumerate() {
            for (k, &(dx, dy)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                let t = Site::new(s.x + dx, s.y + dy);
                if t.norm2_sq() >= r2 {
                    escape_degree[i] += 1;
                } else {
                    neigh[i][k] = lookup(t);
                }
            }
        }
        Ok(Domain { radius, sites, neigh, escape_degree, grid, grid_radius: radius })
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        if s.x.abs() > self.grid_radius || s.y.abs() > self.grid_radius {
            return None;
        }
        let span = (2 * self.grid_radius + 1) as usize;
        let i = self.grid
            [((s.x + self.grid_radius) as usize) * span + (s.y + self.grid_radius) as usize];
        if i < 0 { None } else { Some(i as usize) }
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let par = x.len() > 50_000;
        let body = |i: usize, yi: &mut f64| {
            let mut acc = 0.0;
            for &j in &self.neigh[i] {
                if j >= 0 {
                    acc += x[j as usize];
                }
            }
            *yi = x[i] - 0.25 * acc;
        };
        if par {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| body(i, yi));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                body(i, yi);
            }
        }
    }

    /// Conjugate gradient for (I - P) x = b. The operator is symmetric
    /// positive definite because P is the substochastic kernel of a walk
    /// killed on T and on the ring.
    pub fn solve(&self, b: &[f64], x0: Vec<f64>, tol: f64) -> Result<Vec<f64>, Error> {
        let n = b.len();
        let mut x = x0;
        let mut r = vec![0.0; n];
        self.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let bnorm: f64 = dot(b, b).sqrt().max(1e-300);
        let mut p = r.clone();
        let mut rs = dot(&r, &r);
        let mut ap = vec![0.0; n];
        let max_iter = 80 * (self.radius as usize + 16);
        for _ in 0..max_iter {
            if rs.sqrt() <= tol * bnorm {
                return Ok(x);
            }
            self.matvec(&p, &mut ap);
            let alpha = rs / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        if rs.sqrt() <= tol * bnorm * 100.0 {
            return Ok(x); // close enough relative to the requested target
        }
        Err(Error::SolverDiverged { residual: rs.sqrt() / bnorm })
    }

    /// Escape probabilities: h(x) = P_x(reach the ring before hitting T).
    pub fn escape_probabilities(&self, tol: f64) -> Result<Vec<f64>, Error> {
        let n = self.sites.len();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = 0.25 * self.escape_degree[i] as f64;
        }
        // radial-log initial guess, the continuum solution for a disc
        let r_f = self.radius as f64;
        let x0: Vec<f64> = self
            .sites
            .iter()
            .map(|s| {
                let r = s.norm2().max(1.0);
                ((r / 1.0).ln() / r_f.ln()).clamp(0.0, 1.0)
            })
            .collect();
        self.solve(&b, x0, tol)
    }

    /// Green's function column: ψ = expected visits to each domain site by
    /// a walk from `start`, killed on T and on the ring. (I - P)ψ = δ.
    pub fn green_column(&self, start: Site, tol: f64) -> Result<Vec<f64>, Error> {
        let i = self
            .index_of(start)
            .ok_or(Error::SiteOutsideDomain { site: (start.x, start.y) })?;
        let n = self.sites.len();
        let mut b = vec![0.0; n];
        b[i] = 1.0;
        self.solve(&b, vec![0.0; n], tol)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() > 50_000 {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y).sum()
    } else {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }
}

/// Directed edges pointing into `target` from outside, in deterministic
/// order.
pub fn boundary_edges(target: &BTreeSet<Site>) -> Vec<DirectedEdge> {
    let mut out = Vec::new();
    let mut tails = BTreeSet::new();
    for &v in target {
        for u in neighbors(v) {
            if !target.contains(&u) {
                tails.insert((u, v));
            }
        }
    }
    for (u, v) in tails {
        out.push(DirectedEdge::new(u, v));
    }
    out
}

/// Single-radius edge table: value(u→v) = esc(u)/Z over all boundary edges.
pub fn edge_table_at_radius(
    target: &BTreeSet<Site>,
    radius: i64,
    tol: f64,
    max_unknowns: usize,
) -> Result<Vec<(DirectedEdge, f64)>, Error> {
    let domain = Domain::build(target, radius, max_unknowns)?;
    let esc = domain.escape_probabilities(tol)?;
    let edges = boundary_edges(target);
    let mut z = 0.0;
    let mut raw = Vec::with_capacity(edges.len());
    for &e in &edges {
        let v = match domain.index_of(e.from) {
            Some(i) => esc[i],
            None => 0.0, // tail outside the ball: treat as unreachable
        };
        z += v;
        raw.push(v);
    }
    if z <= 0.0 {
        return Err(Error::EmptyDomain { radius });
    }
    Ok(edges.into_iter().zip(raw).map(|(e, v)| (e, v / z)).collect())
}

/// Richardson extrapolation in 1/R of two single-radius tables. Both tables
/// sum to one exactly, and the extrapolation is linear, so the result sums
/// to one as well. Returns (value, gap) per edge, the gap being the
/// distance between the two single-radius readings.
pub fn extrapolate_tables(
    inner: &[(DirectedEdge, f64)],
    outer: &[(DirectedEdge, f64)],
    r_inner: i64,
    r_outer: i64,
) -> Vec<(DirectedEdge, f64, f64)> {
    assert_eq!(inner.len(), outer.len());
    let xi = 1.0 / r_inner as f64;
    let xo = 1.0 / r_outer as f64;
    let lambda = xo / (xi - xo);
    inner
        .iter()
        .zip(outer.iter())
        .map(|(&(e1, vi), &(e2, vo))| {
            debug_assert_eq!(e1, e2);
            let v = vo + (vo - vi) * lambda;
            (e1, v, (vo - vi).abs())
        })
        .collect()
}

/// From-infinity edge table with Richardson extrapolation at the two
/// configured radii.
pub fn edge_table_from_infinity(
    target: &BTreeSet<Site>,
    cfg: &SolverConfig,
) -> Result<Vec<(DirectedEdge, f64, f64)>, Error> {
    let inner = edge_table_at_radius(target, cfg.inner_radius, cfg.tolerance, cfg.max_unknowns)?;
    let outer = edge_table_at_radius(target, cfg.outer_radius, cfg.tolerance, cfg.max_unknowns)?;
    Ok(extrapolate_tables(&inner, &outer, cfg.inner_radius, cfg.outer_radius))
}

/// Finite-start edge table: first-hit distribution on the boundary edges of
/// `target` for a walk started at `start`. The ring leak is folded back
/// through the from-infinity table.
pub fn edge_table_from_site(
    start: Site,
    target: &BTreeSet<Site>,
    cfg: &SolverConfig,
) -> Result<Vec<(DirectedEdge, f64, f64)>, Error> {
    let infinity = edge_table_from_infinity(target, cfg)?;
    let edges = boundary_edges(target);
    let one_radius = |radius: i64| -> Result<Vec<(DirectedEdge, f64)>, Error> {
        let domain = Domain::build(target, radius, cfg.max_unknowns)?;
        let psi = domain.green_column(start, cfg.tolerance)?;
        let mut vals = Vec::with_capacity(edges.len());
        let mut hit_mass = 0.0;
        for &e in &edges {
            let v = match domain.index_of(e.from) {
                Some(i) => 0.25 * psi[i],
                None => 0.0,
            };
            hit_mass += v;
            vals.push(v);
        }
        let leak = (1.0 - hit_mass).max(0.0);
        Ok(edges
            .iter()
            .zip(vals)
            .zip(infinity.iter())
            .map(|((&e, v), &(ei, vi, _))| {
                debug_assert_eq!(e, ei);
                (e, v + leak * vi)
            })
            .collect())
    };
    let inner = one_radius(cfg.inner_radius)?;
    let outer = one_radius(cfg.outer_radius)?;
    Ok(extrapolate_tables(&inner, &outer, cfg.inner_radius, cfg.outer_radius))
}

/// Outer vertex ring of the open Euclidean ball of the given radius: sites
/// at norm ≥ radius adjacent to a site at norm < radius. Sorted.
pub fn ring_sites(radius: i64) -> Vec<Site> {
    assert!(radius >= 1);
    let r2 = radius * radius;
    let interior_top = |x: i64| -> i64 {
        // largest y ≥ 0 with x² + y² < r², or -1 when the column is empty
        let t = r2 - x * x - 1;
        if t < 0 {
            -1
        } else {
            let mut y = (t as f64).sqrt() as i64;
            while (y + 1) * (y + 1) <= t {
                y += 1;
            }
            while y * y > t {
                y -= 1;
            }
            y
        }
    };
    let mut out = BTreeSet::new();
    for x in -radius..=radius {
        let yt = interior_top(x);
        if yt >= 0 {
            out.insert(Site::new(x, yt + 1));
            out.insert(Site::new(x, -yt - 1));
        }
        // horizontal exposure between adjacent columns
        for &nx in &[x - 1, x + 1] {
            let ynb = interior_top(nx);
            for y in (ynb + 1)..=yt {
                out.insert(Site::new(nx, y));
                out.insert(Site::new(nx, -y));
            }
        }
    }
    out.into_iter().collect()
}

/// Head-sum weights over ring sites for launching a walker with the exact
/// from-infinity first-hit law of the ring. Aligned with `ring_sites`.
pub fn harmonic_ring_weights(radius: i64, cfg: &SolverConfig) -> Result<Vec<f64>, Error> {
    let ring: BTreeSet<Site> = ring_sites(radius).into_iter().collect();
    let table = edge_table_from_infinity(&ring, cfg)?;
    let order = ring_sites(radius);
    let mut weights = vec![0.0; order.len()];
    let index: std::collections::HashMap<Site, usize> =
        order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    for (e, v, _) in table {
        if let Some(&i) = index.get(&e.to) {
            weights[i] += v;
        }
    }
    Ok(weights)
}
