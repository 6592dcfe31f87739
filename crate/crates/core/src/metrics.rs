//! Per-user MSE, MMSE-based sum rate, and a symbol-level simulator used as an
//! independent check on the closed-form expressions.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::scattering::EffectiveChannel;
use crate::system::{Precoder, SystemParams};

/// Per-user MMSE values are floored here before taking logs.
pub const MMSE_FLOOR: f64 = 1e-15;

const SYMBOL_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub per_user_mmse: Vec<f64>,
    pub total_mse: f64,
    pub sum_rate_bits: f64,
    /// Set when some user's MSE hit [`MMSE_FLOOR`].
    pub saturated: bool,
}

/// `Σ_k log2(1 / mmse_k)`.
pub fn sum_rate_from_mmse(per_user_mmse: &[f64]) -> f64 {
    per_user_mmse.iter().map(|m| -m.log2()).sum()
}

/// `ρ·H̃ᴴ·F` (K×K).
fn equalized(h: &EffectiveChannel, sol: &Precoder) -> CMatrix {
    (&h.matrix * &sol.matrix) * C64::new(sol.rx_scale, 0.0)
}

/// `‖ρH̃ᴴF − I‖_F² + Kρ²σ²`.
pub fn mse_objective(h: &EffectiveChannel, sol: &Precoder, noise_variance: f64) -> f64 {
    let k = h.n_users();
    let e = equalized(h, sol) - CMatrix::identity(k, k);
    linalg::frobenius_sq(&e) + k as f64 * sol.rx_scale * sol.rx_scale * noise_variance
}

pub fn analytic_metrics(h: &EffectiveChannel, sol: &Precoder, p: &SystemParams) -> UserMetrics {
    let k = h.n_users();
    let t = equalized(h, sol);
    let noise = sol.rx_scale * sol.rx_scale * p.noise_variance;
    let mut saturated = false;
    let per_user_mmse: Vec<f64> = (0..k)
        .map(|u| {
            let row: f64 = (0..k)
                .map(|j| {
                    let target = if j == u { 1.0 } else { 0.0 };
                    (t[(u, j)] - target).norm_sqr()
                })
                .sum();
            let mmse = row + noise;
            if mmse < MMSE_FLOOR {
                saturated = true;
                MMSE_FLOOR
            } else {
                mmse
            }
        })
        .collect();
    if saturated {
        log::debug!("per-user MSE floored at {MMSE_FLOOR:e}; rate is saturated");
    }
    let total_mse = per_user_mmse.iter().sum();
    let sum_rate_bits = sum_rate_from_mmse(&per_user_mmse);
    UserMetrics {
        per_user_mmse,
        total_mse,
        sum_rate_bits,
        saturated,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedMse {
    /// Empirical mean of `|y_k − s_k|²` per user.
    pub mean: Vec<f64>,
    /// Standard error of each mean.
    pub std_err: Vec<f64>,
}

/// Draws `s ~ CN(0, I)`, `w ~ CN(0, σ²I)`, forms `y = ρH̃ᴴFs + ρw`, and
/// averages `|y_k − s_k|²`. Blocks of symbols use independent sub-streams and
/// are reduced in block order, so the result depends only on `seed`.
pub fn simulate_symbol_mse(
    h: &EffectiveChannel,
    sol: &Precoder,
    p: &SystemParams,
    n_symbols: usize,
    seed: u64,
) -> Result<SimulatedMse> {
    if n_symbols == 0 {
        return Err(Error::InvalidArgument("n_symbols must be at least 1".into()));
    }
    let k = h.n_users();
    let t = equalized(h, sol);
    let noise_amp = sol.rx_scale * p.noise_variance.sqrt();
    let n_blocks = n_symbols.div_ceil(SYMBOL_BLOCK);

    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = SYMBOL_BLOCK.min(n_symbols - b * SYMBOL_BLOCK);
            let mut sum = vec![0.0; k];
            let mut sum_sq = vec![0.0; k];
            let mut s = vec![C64::new(0.0, 0.0); k];
            for _ in 0..count {
                for z in s.iter_mut() {
                    *z = cn(&mut rng);
                }
                for u in 0..k {
                    let mut y = cn(&mut rng) * noise_amp;
                    for (j, sj) in s.iter().enumerate() {
                        y += t[(u, j)] * sj;
                    }
                    let e = (y - s[u]).norm_sqr();
                    sum[u] += e;
                    sum_sq[u] += e * e;
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    for (s, q) in &partials {
        for u in 0..k {
            sum[u] += s[u];
            sum_sq[u] += q[u];
        }
    }
    let n = n_symbols as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = (0..k)
        .map(|u| {
            if n_symbols < 2 {
                return 0.0;
            }
            let var = ((sum_sq[u] - n * mean[u] * mean[u]) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(SimulatedMse { mean, std_err })
}

fn cn(rng: &mut ChaCha20Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}
