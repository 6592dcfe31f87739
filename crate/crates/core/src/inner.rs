//! Online design for one channel realization with the coupling held fixed:
//! alternate the closed-form sum-MSE precoder with backtracking gradient steps
//! on the RIS phase angles.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::metrics::{analytic_metrics, mse_objective};
use crate::scattering::{assemble_scattering, CoupledChannel, EffectiveChannel, ScatteringMatrices};
use crate::system::{ChannelSample, Precoder, RisPhaseConfig, ScatteringDesign, SystemParams};

/// Step-size halvings tried before a phase step is abandoned.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhaseInit {
    Zeros,
    UniformRandom { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSolverConfig {
    pub max_outer_alternations: usize,
    pub ris_gradient_steps_per_alternation: usize,
    /// Initial phase step; adapted by halving/doubling.
    pub ris_step_size: f64,
    pub rel_tolerance: f64,
    pub phase_init: PhaseInit,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        InnerSolverConfig {
            max_outer_alternations: 50,
            ris_gradient_steps_per_alternation: 5,
            ris_step_size: 1.0,
            rel_tolerance: 1e-6,
            phase_init: PhaseInit::UniformRandom { seed: 0 },
        }
    }
}

impl InnerSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ris_step_size > 0.0) || !(self.rel_tolerance > 0.0) {
            return Err(Error::Config(
                "inner step size and tolerance must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// Starting phases for the solve identified by `stream` (sample index).
    pub fn initial_phases(&self, m: usize, stream: u64) -> RisPhaseConfig {
        match self.phase_init {
            PhaseInit::Zeros => RisPhaseConfig::zeros(m),
            PhaseInit::UniformRandom { seed } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                RisPhaseConfig::new((0..m).map(|_| rng.random_range(0.0..TAU)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub precoder: Precoder,
    pub ris_config: RisPhaseConfig,
    /// Sum-MSE objective at the returned point.
    pub mse: f64,
    pub per_user_mmse: Vec<f64>,
    pub sum_rate_bits: f64,
    /// Alternations executed.
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the initial precoder and after every alternation.
    pub mse_trace: Vec<f64>,
}

/// Closed-form sum-MSE transmit filter with common receive scaling.
///
/// `G = H̃(H̃ᴴH̃ + (Kσ²/P)I_K)⁻¹` with `H̃ = h_effᴴ`, which is the push-through
/// form of `(H̃H̃ᴴ + (Kσ²/P)I_N)⁻¹H̃`; then `ρ = ‖G‖_F/√P` and `F = G/ρ`.
pub fn optimal_precoder_given_ris(h_eff: &EffectiveChannel, p: &SystemParams) -> Result<Precoder> {
    let h = &h_eff.matrix;
    let k = h.nrows();
    if linalg::frobenius_sq(h) == 0.0 {
        return Err(Error::DegenerateChannel("effective channel is identically zero".into()));
    }
    let p_lin = p.p_lin();
    let reg = k as f64 * p.noise_variance / p_lin;
    let gram = h * h.adjoint() + CMatrix::identity(k, k) * C64::new(reg, 0.0);
    let inv = gram
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateChannel("effective channel Gram matrix is singular".into()))?;
    let g = h.adjoint() * inv;
    let g_norm = linalg::frobenius_sq(&g).sqrt();
    if !(g_norm > 0.0 && g_norm.is_finite()) {
        return Err(Error::DegenerateChannel(format!("transmit filter norm {g_norm}")));
    }
    let rx_scale = g_norm / p_lin.sqrt();
    let matrix = g * C64::new(1.0 / rx_scale, 0.0);
    Ok(Precoder { matrix, rx_scale })
}

/// Sum-MSE as a function of the phases for a fixed precoder.
pub fn phase_objective(
    cc: &CoupledChannel<'_>,
    phases: &RisPhaseConfig,
    f: &Precoder,
    p: &SystemParams,
) -> Result<f64> {
    let (h, _) = cc.effective(phases)?;
    Ok(mse_objective(&h, f, p.noise_variance))
}

/// `∂f/∂θ_m = −2·Im{ρ·υ_m⁻¹·[ΦBFEᴴAΦ]_mm}` with `E = ρAΦBF − I`.
pub fn ris_phase_gradient_cc(
    cc: &CoupledChannel<'_>,
    phases: &RisPhaseConfig,
    f: &Precoder,
) -> Result<Vec<f64>> {
    let (h, phi) = cc.effective(phases)?;
    let k = h.n_users();
    let rho = f.rx_scale;
    let e = (&h.matrix * &f.matrix) * C64::new(rho, 0.0) - CMatrix::identity(k, k);
    let x = &phi * (&cc.b * &f.matrix); // M×K
    let y = &cc.a * &phi; // K×M
    let xe = x * e.adjoint(); // M×K
    let ups = phases.upsilon();
    Ok((0..phases.len())
        .map(|m| {
            let mut d = C64::new(0.0, 0.0);
            for j in 0..k {
                d += xe[(m, j)] * y[(j, m)];
            }
            -2.0 * (ups[m].conj() * d * rho).im
        })
        .collect())
}

pub fn ris_phase_gradient(
    d: &ScatteringDesign,
    phases: &RisPhaseConfig,
    ch: &ChannelSample,
    f: &Precoder,
) -> Result<Vec<f64>> {
    let s = assemble_scattering(d);
    let cc = CoupledChannel::new(&s, ch)?;
    ris_phase_gradient_cc(&cc, phases, f)
}

pub fn solve_inner(
    d: &ScatteringDesign,
    ch: &ChannelSample,
    p: &SystemParams,
    cfg: &InnerSolverConfig,
) -> Result<InnerSolution> {
    let s = assemble_scattering(d);
    let init = cfg.initial_phases(d.m(), 0);
    solve_inner_with(&s, ch, p, cfg, init)
}

/// Runs the alternation from explicit starting phases on pre-assembled blocks.
pub fn solve_inner_with(
    s: &ScatteringMatrices,
    ch: &ChannelSample,
    p: &SystemParams,
    cfg: &InnerSolverConfig,
    init: RisPhaseConfig,
) -> Result<InnerSolution> {
    cfg.validate()?;
    let cc = CoupledChannel::new(s, ch)?;
    let sigma2 = p.noise_variance;

    let mut phases = init;
    let (h, _) = cc.effective(&phases)?;
    let mut prec = optimal_precoder_given_ris(&h, p)?;
    let mut h_cur = h;
    let mut mse = mse_objective(&h_cur, &prec, sigma2);
    let mut trace = vec![mse];
    let mut step = cfg.ris_step_size;
    let mut converged = false;
    let mut iterations = 0;

    for alt in 0..cfg.max_outer_alternations {
        iterations = alt + 1;
        let mut f_cur = mse;
        let mut trial_phases = phases.clone();
        for s_idx in 0..cfg.ris_gradient_steps_per_alternation {
            let grad = ris_phase_gradient_cc(&cc, &trial_phases, &prec)?;
            let g_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if g_norm <= 1e-12 * (1.0 + f_cur) {
                break;
            }
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let cand = RisPhaseConfig::new(
                    trial_phases
                        .phases()
                        .iter()
                        .zip(&grad)
                        .map(|(t, g)| t - step * g)
                        .collect(),
                );
                // a resonant candidate counts as a failed trial
                let f_new = phase_objective(&cc, &cand, &prec, p).unwrap_or(f64::INFINITY);
                if f_new < f_cur {
                    trial_phases = cand;
                    f_cur = f_new;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                step = cfg.ris_step_size;
                if alt == 0 && s_idx == 0 {
                    return Err(Error::NoProgress(format!(
                        "no decrease after {MAX_HALVINGS} halvings (gradient norm {g_norm:.3e})"
                    )));
                }
                break;
            }
        }

        let (h_new, _) = cc.effective(&trial_phases)?;
        let prec_new = optimal_precoder_given_ris(&h_new, p)?;
        let mse_new = mse_objective(&h_new, &prec_new, sigma2);
        if mse_new > mse {
            // roundoff-level regression; keep the previous point
            trace.push(mse);
            converged = true;
            break;
        }
        let improvement = if mse > 0.0 { (mse - mse_new) / mse } else { 0.0 };
        phases = trial_phases;
        prec = prec_new;
        h_cur = h_new;
        mse = mse_new;
        trace.push(mse);
        if improvement < cfg.rel_tolerance {
            converged = true;
            break;
        }
    }

    let metrics = analytic_metrics(&h_cur, &prec, p);
    Ok(InnerSolution {
        precoder: prec,
        ris_config: phases,
        mse,
        per_user_mmse: metrics.per_user_mmse,
        sum_rate_bits: metrics.sum_rate_bits,
        iterations,
        converged,
        mse_trace: trace,
    })
}
