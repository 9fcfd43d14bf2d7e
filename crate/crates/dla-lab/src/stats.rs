//! Statistical comparators: chi-square goodness of fit, Wilson intervals,
//! envelope/scarcity summaries, canonical window-law encoding with total
//! variation distance, and box-mass dimension.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::coupling::{ClassKind, DiscrepancyLedger};
use crate::error::{Error, Result};
use crate::growth::{AggregateState, Subgraph};
use crate::lattice::WindowSpec;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pooled_cells: usize,
}

/// Pearson chi-square against expected *counts*; cells with expectation
/// below `min_expected` are pooled into one.
pub fn chi_square_gof(observed: &[f64], expected: &[f64], min_expected: f64) -> Result<GofResult> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::EmptySample("chi_square_gof needs matching nonempty cells".into()));
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pool_obs = 0.0;
    let mut pool_exp = 0.0;
    let mut pooled = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e < min_expected {
            pool_obs += o;
            pool_exp += e;
            pooled += 1;
        } else {
            stat += (o - e) * (o - e) / e;
            cells += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::EmptySample("chi_square_gof needs at least two usable cells".into()));
    }
    let dof = cells - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidConfig(format!("chi-square dof: {e}")))?;
    Ok(GofResult { statistic: stat, dof, p_value: 1.0 - dist.cdf(stat), pooled_cells: pooled })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnvelopeFraction {
    pub inside: u64,
    pub total: u64,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Fraction of replicas that stayed inside the envelope, with a 95% Wilson
/// interval.
pub fn envelope_fraction(stayed_inside: &[bool]) -> Result<EnvelopeFraction> {
    if stayed_inside.is_empty() {
        return Err(Error::EmptySample("envelope_fraction needs replicas".into()));
    }
    let inside = stayed_inside.iter().filter(|&&b| b).count() as u64;
    let total = stayed_inside.len() as u64;
    let (lo, hi) = wilson_interval(inside, total, 1.959964);
    Ok(EnvelopeFraction {
        inside,
        total,
        fraction: inside as f64 / total as f64,
        wilson_low: lo,
        wilson_high: hi,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscrepancyScarcity {
    pub replicas: u64,
    pub delta_counts: Vec<u64>,
    pub mean_deltas: f64,
    pub threshold: f64,
    pub exceed_threshold: u64,
    pub p_exceed: f64,
    pub p_exceed_wilson: (f64, f64),
    pub good: u64,
    pub bad: u64,
    pub devastating: u64,
}

/// Distribution of |T_Δ| across replicas and the empirical probability of
/// exceeding m^α discrepancies, plus good/bad/devastating totals.
pub fn discrepancy_scarcity(
    ledgers: &[&DiscrepancyLedger],
    m: u64,
    alpha: f64,
) -> Result<DiscrepancyScarcity> {
    if ledgers.is_empty() {
        return Err(Error::EmptySample("discrepancy_scarcity needs replicas".into()));
    }
    let threshold = (m as f64).powf(alpha);
    let delta_counts: Vec<u64> = ledgers.iter().map(|l| l.deltas.len() as u64).collect();
    let exceed = delta_counts.iter().filter(|&&c| c as f64 > threshold).count() as u64;
    let replicas = ledgers.len() as u64;
    let (mut good, mut bad, mut dev) = (0u64, 0u64, 0u64);
    for l in ledgers {
        for d in &l.deltas {
            match d.class.kind {
                ClassKind::Good => good += 1,
                ClassKind::Bad => bad += 1,
                ClassKind::Devastating => dev += 1,
            }
        }
    }
    let mean = delta_counts.iter().sum::<u64>() as f64 / replicas as f64;
    Ok(DiscrepancyScarcity {
        replicas,
        mean_deltas: mean,
        delta_counts,
        threshold,
        exceed_threshold: exceed,
        p_exceed: exceed as f64 / replicas as f64,
        p_exceed_wilson: wilson_interval(exceed, replicas, 1.959964),
        good,
        bad,
        devastating: dev,
    })
}

/// Canonical textual encoding of a window restriction. Vertices and edges
/// are emitted in their (lexicographic) set order, so two subgraphs encode
/// equally iff they are equal.
pub fn encode_subgraph(sub: &Subgraph) -> String {
    let mut s = String::from("V");
    for v in &sub.vertices {
        s.push_str(&format!(";{},{}", v.x, v.y));
    }
    s.push_str("|E");
    for e in &sub.edges {
        s.push_str(&format!(";{},{}>{},{}", e.from.x, e.from.y, e.to.x, e.to.y));
    }
    s
}

fn window_signature(window: &WindowSpec) -> String {
    let mut s = String::from("W");
    for v in &window.sites {
        s.push_str(&format!(";{},{}", v.x, v.y));
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowLaw {
    pub window_sig: String,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

/// Empirical law of the window restriction over sampled subgraphs.
pub fn window_law_estimate<I>(samples: I, window: &WindowSpec) -> Result<WindowLaw>
where
    I: IntoIterator<Item = Subgraph>,
{
    let mut counts = BTreeMap::new();
    let mut total = 0u64;
    for sub in samples {
        *counts.entry(encode_subgraph(&sub)).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptySample("window_law_estimate needs samples".into()));
    }
    Ok(WindowLaw { window_sig: window_signature(window), counts, total })
}

/// Total variation distance between two empirical window laws over the
/// same window.
pub fn tv_distance(a: &WindowLaw, b: &WindowLaw) -> Result<f64> {
    if a.window_sig != b.window_sig {
        return Err(Error::WindowMismatch);
    }
    let mut keys: std::collections::BTreeSet<&String> = a.counts.keys().collect();
    keys.extend(b.counts.keys());
    let (na, nb) = (a.total as f64, b.total as f64);
    let mut tv = 0.0;
    for k in keys {
        let pa = *a.counts.get(k).unwrap_or(&0) as f64 / na;
        let pb = *b.counts.get(k).unwrap_or(&0) as f64 / nb;
        tv += (pa - pb).abs();
    }
    Ok(tv / 2.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassDimension {
    pub slope: f64,
    pub box_counts: Vec<(i64, u64)>,
}

/// Least-squares slope of log cumulative vertex count in [-h,h]^2 against
/// log h. A filled box reads near 2, a bare column near 1.
pub fn mass_dimension(state: &AggregateState) -> Result<MassDimension> {
    if state.edges.len() < 100 {
        return Err(Error::EmptySample(format!(
            "mass_dimension needs at least 100 growth edges, have {}",
            state.edges.len()
        )));
    }
    let radii: Vec<i64> = state
        .cloud
        .iter()
        .map(|s| s.x.abs().max(s.y.abs()))
        .collect();
    let hmax = radii.iter().copied().max().unwrap_or(0).max(1);
    let mut counts = vec![0u64; hmax as usize + 1];
    for r in radii {
        counts[r as usize] += 1;
    }
    let mut box_counts = Vec::with_capacity(hmax as usize);
    let mut cum = counts[0];
    for h in 1..=hmax {
        cum += counts[h as usize];
        box_counts.push((h, cum));
    }
    let pts: Vec<(f64, f64)> = box_counts
        .iter()
        .filter(|&&(_, c)| c > 0)
        .map(|&(h, c)| ((h as f64).ln(), (c as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptySample("mass_dimension needs spatial extent".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    Ok(MassDimension { slope: sxy / sxx, box_counts })
}

/// One-sample Kolmogorov–Smirnov check against Exp(rate); passes at the
/// asymptotic 1% level.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<(f64, bool)> {
    if samples.is_empty() {
        return Err(Error::EmptySample("ks_exponential needs samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    // K-S critical value at alpha = 0.01
    let crit = 1.628 / n.sqrt();
    Ok((d, d < crit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::SeedSpec;
    use crate::lattice::{DirectedEdge, Rect, Site};
    use rand::Rng;

    #[test]
    fn chi_square_matches_hand_computation() {
        // die rolls: observed (10,8,12,9,11,10), expected 10 each
        let obs = [10.0, 8.0, 12.0, 9.0, 11.0, 10.0];
        let exp = [10.0; 6];
        let r = chi_square_gof(&obs, &exp, 1.0).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert_eq!(r.dof, 5);
        assert!(r.p_value > 0.96 && r.p_value < 0.97);
    }

    #[test]
    fn chi_square_pools_small_cells() {
        let obs = [50.0, 48.0, 1.0, 1.0];
        let exp = [49.0, 49.0, 1.0, 1.0];
        let r = chi_square_gof(&obs, &exp, 5.0).unwrap();
        assert_eq!(r.pooled_cells, 2);
        assert_eq!(r.dof, 2);
        assert!(chi_square_gof(&obs[..1], &exp[..1], 5.0).is_err());
    }

    #[test]
    fn wilson_known_value() {
        let (lo, hi) = wilson_interval(50, 100, 1.959964);
        assert!((lo - 0.4038).abs() < 5e-4, "{lo}");
        assert!((hi - 0.5962).abs() < 5e-4, "{hi}");
        let (lo0, _) = wilson_interval(0, 10, 1.959964);
        assert_eq!(lo0, 0.0);
    }

    #[test]
    fn envelope_fraction_summary() {
        let mut flags = vec![true; 95];
        flags.extend(vec![false; 5]);
        let f = envelope_fraction(&flags).unwrap();
        assert_eq!(f.inside, 95);
        assert!((f.fraction - 0.95).abs() < 1e-12);
        assert!(f.wilson_low < 0.95 && f.wilson_high > 0.95);
        assert!(envelope_fraction(&[]).is_err());
    }

    #[test]
    fn subgraph_encoding_injective_on_small_window() {
        // enumerate all subsets of a 3-vertex, 2-edge path and check
        // distinct subgraphs encode distinctly
        let a = Site::new(0, 0);
        let b = Site::new(0, 1);
        let c = Site::new(0, 2);
        let e1 = DirectedEdge::new(b, a);
        let e2 = DirectedEdge::new(c, b);
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0;
        for vmask in 0..8u32 {
            for emask in 0..4u32 {
                let mut sub = Subgraph::default();
                for (i, v) in [a, b, c].iter().enumerate() {
                    if vmask >> i & 1 == 1 {
                        sub.vertices.insert(*v);
                    }
                }
                if emask & 1 == 1 {
                    sub.edges.insert(e1);
                }
                if emask & 2 == 2 {
                    sub.edges.insert(e2);
                }
                seen.insert(encode_subgraph(&sub));
                total += 1;
            }
        }
        assert_eq!(seen.len(), total);
    }

    #[test]
    fn tv_distance_basics() {
        let w = crate::lattice::WindowSpec::from_rect(Rect {
            x_min: 0,
            x_max: 0,
            y_min: 0,
            y_max: 2,
        });
        let sub_a = Subgraph::default();
        let mut sub_b = Subgraph::default();
        sub_b.vertices.insert(Site::new(0, 0));
        let law1 = window_law_estimate(vec![sub_a.clone(), sub_a.clone()], &w).unwrap();
        let law2 = window_law_estimate(vec![sub_a.clone(), sub_b.clone()], &w).unwrap();
        assert_eq!(tv_distance(&law1, &law1).unwrap(), 0.0);
        assert!((tv_distance(&law1, &law2).unwrap() - 0.5).abs() < 1e-12);
        let w2 = crate::lattice::WindowSpec::from_rect(Rect {
            x_min: 1,
            x_max: 1,
            y_min: 0,
            y_max: 2,
        });
        let law3 = window_law_estimate(vec![sub_a], &w2).unwrap();
        assert!(matches!(tv_distance(&law1, &law3), Err(Error::WindowMismatch)));
    }

    fn filled_box(h: i64) -> AggregateState {
        let mut st = AggregateState::from_seed(SeedSpec::Segment(h as u64).sites());
        for y in 1..=h {
            for x in -h..=h {
                st.add_edge(DirectedEdge::new(Site::new(x, y), Site::new(x, y - 1)), y as f64);
            }
        }
        for y in 1..=h {
            for x in -h..=h {
                st.add_edge(DirectedEdge::new(Site::new(x, -y), Site::new(x, -y + 1)), y as f64);
            }
        }
        st
    }

    fn bare_column(h: i64) -> AggregateState {
        let mut st = AggregateState::from_seed([Site::new(0, 0)].into_iter().collect());
        for y in 1..=h {
            st.add_edge(DirectedEdge::new(Site::new(0, y), Site::new(0, y - 1)), y as f64);
        }
        st
    }

    #[test]
    fn mass_dimension_reads_box_and_column() {
        let box_dim = mass_dimension(&filled_box(40)).unwrap();
        assert!((box_dim.slope - 2.0).abs() < 0.15, "box slope {}", box_dim.slope);
        let col_dim = mass_dimension(&bare_column(200)).unwrap();
        assert!((col_dim.slope - 1.0).abs() < 0.1, "column slope {}", col_dim.slope);
        assert!(mass_dimension(&bare_column(10)).is_err());
    }

    #[test]
    fn ks_accepts_exponential_rejects_uniform() {
        let mut rng = crate::rng::RngStream::new(77, 0).rng();
        let exp_samp: Vec<f64> =
            (0..4000).map(|_| -(1.0 - rng.gen::<f64>()).ln() / 3.0).collect();
        let (_, ok) = ks_exponential(&exp_samp, 3.0).unwrap();
        assert!(ok);
        let uni: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>()).collect();
        let (_, bad) = ks_exponential(&uni, 3.0).unwrap();
        assert!(!bad);
    }
}
