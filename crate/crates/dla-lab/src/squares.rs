//! Exact exit law of the simple random walk from the center of a square.
//!
//! The walk starts at the center of the (2h+1)×(2h+1) square and stops on
//! the ℓ∞-ring at distance h. The exit distribution is the solution of the
//! discrete Dirichlet problem on the square, obtained here in closed form
//! by separation of variables: for the square [0,L]² (L = 2h) with a unit
//! boundary load at bottom site (k,0),
//!
//!   P(exit at (k,0)) = (1/L) Σ_{j odd} (-1)^{(j-1)/2} sin(jπk/L) / cosh(θ_j L/2),
//!
//! where cosh θ_j = 2 − cos(jπ/L). Terms decay like exp(-πj/2), so a few
//! dozen modes give machine precision at any half-width. The four sides are
//! identical and each side is mirror symmetric; the table is built from one
//! half side and reflected, so the 8 square symmetries hold exactly.

use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::lattice::Site;

/// Largest supported half-width, as a power-of-two exponent (2^14).
pub const MAX_HALFWIDTH_LOG2: u32 = 14;

#[derive(Debug, Clone)]
pub struct SquareExitLaw {
    pub halfwidth: i64,
    /// Exit probabilities on the bottom side, index k-1 for k in 1..=L-1.
    side: Vec<f64>,
    /// Cumulative distribution over the side, normalized to 1.
    side_cdf: Vec<f64>,
}

impl SquareExitLaw {
    pub fn compute(halfwidth: i64) -> Self {
        assert!(halfwidth >= 1);
        let l = 2 * halfwidth;
        let lf = l as f64;
        let half = l as usize / 2;
        let mut side = vec![0.0f64; l as usize - 1];
        // Modes beyond ~90 contribute < exp(-45π/2) ~ 1e-31.
        let max_mode = (l - 1).min(91);
        // Precompute 1/cosh(θ_j L/2) in log space to avoid overflow.
        let mut inv_cosh = Vec::new();
        let mut j = 1i64;
        while j <= max_mode {
            let c = 2.0 - (std::f64::consts::PI * j as f64 / lf).cos();
            let theta = (c + (c * c - 1.0).sqrt()).ln();
            let t = theta * halfwidth as f64;
            // 1/cosh(t) = 2 e^{-t} / (1 + e^{-2t})
            let inv = 2.0 * (-t).exp() / (1.0 + (-2.0 * t).exp());
            inv_cosh.push(inv);
            j += 2;
        }
        for k in 1..=half as i64 {
            let mut sum = 0.0;
            let mut comp = 0.0; // Kahan compensation
            let mut sign = 1.0f64;
            for (idx, inv) in inv_cosh.iter().enumerate() {
                let j = (2 * idx + 1) as f64;
                let term = sign * (std::f64::consts::PI * j * k as f64 / lf).sin() * inv;
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
                sign = -sign;
            }
            let p = sum / lf;
            side[(k - 1) as usize] = p;
            side[(l - k - 1) as usize] = p; // mirror half
        }
        let total: f64 = side.iter().sum();
        let mut side_cdf = Vec::with_capacity(side.len());
        let mut acc = 0.0;
        for &p in &side {
            acc += p / total;
            side_cdf.push(acc);
        }
        if let Some(last) = side_cdf.last_mut() {
            *last = 1.0;
        }
        SquareExitLaw { halfwidth, side, side_cdf }
    }

    /// All ring sites with their exit probabilities, as offsets from the
    /// square's center. Corners carry zero mass and are omitted.
    pub fn probabilities(&self) -> Vec<(Site, f64)> {
        let h = self.halfwidth;
        let mut out = Vec::with_capacity(4 * self.side.len());
        for (i, &p) in self.side.iter().enumerate() {
            let d = i as i64 + 1 - h; // position along the side in -h+1..=h-1
            out.push((Site::new(d, -h), p));
            out.push((Site::new(d, h), p));
            out.push((Site::new(-h, d), p));
            out.push((Site::new(h, d), p));
        }
        out
    }

    /// Sample an exit offset. Sides are exactly equiprobable by symmetry.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Site {
        let side = rng.gen_range(0..4u8);
        let u: f64 = rng.gen();
        let i = self.side_cdf.partition_point(|&c| c < u).min(self.side_cdf.len() - 1);
        let d = i as i64 + 1 - self.halfwidth;
        let h = self.halfwidth;
        match side {
            0 => Site::new(d, -h),
            1 => Site::new(d, h),
            2 => Site::new(-h, d),
            _ => Site::new(h, d),
        }
    }
}

static LAW_CACHE: OnceLock<Vec<OnceLock<Arc<SquareExitLaw>>>> = OnceLock::new();

/// Cached exit law for half-width 2^log2h.
pub fn cached_law(log2h: u32) -> Arc<SquareExitLaw> {
    assert!(log2h <= MAX_HALFWIDTH_LOG2);
    let cache = LAW_CACHE.get_or_init(|| {
        (0..=MAX_HALFWIDTH_LOG2 as usize).map(|_| OnceLock::new()).collect()
    });
    cache[log2h as usize]
        .get_or_init(|| Arc::new(SquareExitLaw::compute(1 << log2h)))
        .clone()
}
