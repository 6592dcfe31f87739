//! Test-side oracles built directly on nalgebra, independent of the crate's
//! own assembly code.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_mc::inner::{solve_inner_with, InnerSolution, InnerSolverConfig};
use ris_mc::linalg::{CMatrix, C64};
use ris_mc::scattering::ScatteringMatrices;
use ris_mc::{ChannelSample, RisPhaseConfig, ScatteringDesign, SystemParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries CN(0, 1) via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    DMatrix::from_fn(r, c, |_, _| {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        let rad = (-u1.ln()).sqrt();
        let ang = std::f64::consts::TAU * u2;
        C64::new(rad * ang.cos(), rad * ang.sin())
    })
}

pub fn random_channel(rng: &mut ChaCha8Rng, n: usize, k: usize, m: usize) -> ChannelSample {
    ChannelSample::new_unchecked(gaussian(rng, m, n), gaussian(rng, m, k))
}

pub fn random_phases(rng: &mut ChaCha8Rng, m: usize) -> RisPhaseConfig {
    RisPhaseConfig::new((0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect())
}

/// Mirror-symmetric feasible design with `|σ_αα| ≤ bound`.
pub fn random_design(rng: &mut ChaCha8Rng, m: usize, bound: f64) -> ScatteringDesign {
    let mut aa = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let v = bound * (2.0 * rng.random::<f64>() - 1.0);
        aa[i] = v;
        aa[m - 1 - i] = v;
    }
    let ab = aa.iter().map(|a| (1.0 - a * a).sqrt()).collect();
    ScatteringDesign::new(aa, ab).unwrap()
}

/// Unitary 2-D DFT `D ⊗ D`, written out entrywise.
pub fn dft2(m: usize) -> CMatrix {
    let n = (m as f64).sqrt().round() as usize;
    assert_eq!(n * n, m);
    DMatrix::from_fn(m, m, |r, c| {
        let (r1, r2) = (r / n, r % n);
        let (c1, c2) = (c / n, c % n);
        let ang = -std::f64::consts::TAU * ((r1 * c1 + r2 * c2) % n) as f64 / n as f64;
        C64::from_polar(1.0 / n as f64, ang)
    })
}

pub fn blocks(aa: &[f64], ab: &[f64]) -> (CMatrix, CMatrix) {
    let u = dft2(aa.len());
    let d = |v: &[f64]| CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))));
    (&u * d(aa) * u.adjoint(), &u * d(ab) * u.adjoint())
}

/// `H_r-uᴴ S_αβᵀ (Υ⁻¹ − S_αα)⁻¹ S_αβ H_b-r`.
pub fn effective(s_aa: &CMatrix, s_ab: &CMatrix, phases: &RisPhaseConfig, ch: &ChannelSample) -> CMatrix {
    let m = s_aa.nrows();
    let ups_inv = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            C64::from_polar(1.0, -phases.phases()[r])
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let phi = (ups_inv - s_aa).try_inverse().expect("resolvent exists");
    ch.h_ris_users().adjoint() * s_ab.transpose() * phi * s_ab * ch.h_bs_ris()
}

pub fn mse(h: &CMatrix, f: &CMatrix, rho: f64, sigma2: f64) -> f64 {
    let k = h.nrows();
    let e = h * f * C64::new(rho, 0.0) - CMatrix::identity(k, k);
    e.iter().map(|z| z.norm_sqr()).sum::<f64>() + k as f64 * rho * rho * sigma2
}

/// Sum-MSE as a function of the raw diagonals, online variables fixed.
pub fn objective(aa: &[f64], ab: &[f64], ch: &ChannelSample, sol: &InnerSolution, sigma2: f64) -> f64 {
    let (s_aa, s_ab) = blocks(aa, ab);
    let h = effective(&s_aa, &s_ab, &sol.ris_config, ch);
    mse(&h, &sol.precoder.matrix, sol.precoder.rx_scale, sigma2)
}

pub fn quick_inner() -> InnerSolverConfig {
    InnerSolverConfig {
        max_outer_alternations: 5,
        ..InnerSolverConfig::default()
    }
}

pub fn solve(design: &ScatteringDesign, ch: &ChannelSample, p: &SystemParams, stream: u64) -> InnerSolution {
    let cfg = quick_inner();
    let s = ris_mc::scattering::assemble_scattering(design);
    solve_inner_with(&s, ch, p, &cfg, cfg.initial_phases(design.m(), stream)).unwrap()
}

pub fn solve_blocks(s: &ScatteringMatrices, ch: &ChannelSample, p: &SystemParams, stream: u64) -> InnerSolution {
    let cfg = quick_inner();
    solve_inner_with(s, ch, p, &cfg, cfg.initial_phases(s.m(), stream)).unwrap()
}

pub fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// Nonlinear conjugate gradient (Polak-Ribière+) with a three-point
/// parabolic line search. Works on any smooth `f` with gradient `g`.
pub fn conjugate_gradient<F, G>(f: F, g: G, x0: Vec<f64>, iters: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0;
    let mut grad = g(&x);
    let mut dir: Vec<f64> = grad.iter().map(|v| -v).collect();
    for _ in 0..iters {
        let gn = dot(&grad, &grad);
        if gn < 1e-30 {
            break;
        }
        let at = |t: f64| -> f64 {
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            f(&y)
        };
        let scale = 1.0 / dot(&dir, &dir).sqrt();
        let (f0, f1, f2) = (at(0.0), at(scale), at(2.0 * scale));
        let curv = f2 - 2.0 * f1 + f0;
        let t = if curv > 0.0 {
            scale * (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * curv)
        } else {
            scale
        };
        for (a, d) in x.iter_mut().zip(&dir) {
            *a += t * d;
        }
        let new_grad = g(&x);
        let beta = (dot(&new_grad, &new_grad) - dot(&new_grad, &grad)) / gn;
        let beta = beta.max(0.0);
        dir = dir.iter().zip(&new_grad).map(|(d, gv)| -gv + beta * d).collect();
        grad = new_grad;
    }
    x
}
