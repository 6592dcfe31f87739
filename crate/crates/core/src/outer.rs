//! Offline coupling design: Monte-Carlo-averaged projected gradient descent
//! on the diagonals of `Σ_αα` and `Σ_αβ`.
//!
//! Each iteration solves the online problem for every training channel, forms
//! the per-sample gradients of the sum-MSE with `(ρ_q, F_q, Υ_q)` held fixed,
//! averages them in sample order, takes a fixed step along the real part,
//! mirror-averages the diagonals and normalizes each index back onto the unit
//! circle.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{draw_sample, ChannelEnsemble, Split};
use crate::error::{Error, Result};
use crate::inner::{solve_inner_with, InnerSolution, InnerSolverConfig};
use crate::linalg::{self, CMatrix, C64};
use crate::metrics::mse_objective;
use crate::scattering::{assemble_scattering, CoupledChannel, ScatteringMatrices};
use crate::system::{
    circle_residual, mirror_residual, ChannelSample, ScatteringDesign, SystemParams,
};

/// Consecutive objective increases that trigger a divergence warning.
const DIVERGENCE_WARN_STREAK: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterSolverConfig {
    /// `I_max`.
    pub max_iterations: usize,
    /// Fixed step `μ`.
    pub step_size: f64,
    /// Expected training-set size; 0 accepts whatever the ensemble holds.
    pub q_samples: usize,
    pub init_sigma_aa: f64,
    /// Compare the analytic gradients against central differences every iteration.
    pub fd_check: bool,
    pub seed: u64,
    /// Start each inner solve from the previous iteration's phases.
    pub warm_start: bool,
    /// Draw a fresh training set every iteration (experimental).
    pub resample_each_iteration: bool,
}

impl Default for OuterSolverConfig {
    fn default() -> Self {
        OuterSolverConfig {
            max_iterations: 30,
            step_size: 0.05,
            q_samples: 0,
            init_sigma_aa: 0.0,
            fd_check: false,
            seed: 0,
            warm_start: false,
            resample_each_iteration: false,
        }
    }
}

impl OuterSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.init_sigma_aa) {
            return Err(Error::Config(format!(
                "init_sigma_aa must lie in [0, 1), got {}",
                self.init_sigma_aa
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("outer step size must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn initial_design(&self, m: usize) -> Result<ScatteringDesign> {
        ScatteringDesign::uniform(m, self.init_sigma_aa)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterIteration {
    pub iteration: usize,
    /// Training-average sum-MSE at the iterate entering this iteration.
    pub objective_mean: f64,
    pub objective_std: f64,
    /// Circle residual of the iterate leaving this iteration.
    pub circle_residual: f64,
    /// `‖S_αα − S_ααᵀ‖_F` of the iterate leaving this iteration.
    pub symmetry_residual: f64,
    /// Mirror residual of the diagonals leaving this iteration (always 0).
    pub mirror_residual: f64,
    pub sample_mse: Vec<f64>,
    /// Max relative gradient error, when `fd_check` is set.
    pub fd_rel_error: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterTrace {
    pub iterations: Vec<OuterIteration>,
    /// Objective of the returned design with fresh inner solves.
    pub final_objective_mean: f64,
    pub final_objective_std: f64,
    pub final_symmetry_residual: f64,
    /// `(ρ, F, Υ)` per training sample at the returned design.
    pub final_solutions: Vec<InnerSolution>,
}

impl OuterTrace {
    pub fn initial_objective(&self) -> f64 {
        self.iterations
            .first()
            .map(|r| r.objective_mean)
            .unwrap_or(self.final_objective_mean)
    }
}

/// `S_αα`, `S_αβ` from raw diagonals without any feasibility requirement.
pub fn matrices_from_sigmas(u: &CMatrix, sigma_aa: &[f64], sigma_ab: &[f64]) -> ScatteringMatrices {
    let v_h = u.adjoint();
    let s_aa = u * linalg::diag_real(sigma_aa) * &v_h;
    let s_ab = u * linalg::diag_real(sigma_ab) * &v_h;
    let s_ba = s_ab.transpose();
    ScatteringMatrices { s_aa, s_ab, s_ba }
}

/// Per-sample sum-MSE with the online variables held fixed.
pub fn sample_objective(
    s: &ScatteringMatrices,
    ch: &ChannelSample,
    inner: &InnerSolution,
    p: &SystemParams,
) -> Result<f64> {
    let cc = CoupledChannel::new(s, ch)?;
    let (h, _) = cc.effective(&inner.ris_config)?;
    Ok(mse_objective(&h, &inner.precoder, p.noise_variance))
}

struct GradientParts {
    /// `Φ = (Υ⁻¹ − S_αα)⁻¹`
    phi: CMatrix,
    /// `E = ρH̃ᴴF − I`
    err: CMatrix,
}

fn gradient_parts(s: &ScatteringMatrices, ch: &ChannelSample, inner: &InnerSolution) -> Result<GradientParts> {
    let cc = CoupledChannel::new(s, ch)?;
    let (h, phi) = cc.effective(&inner.ris_config)?;
    let k = h.n_users();
    let err = (&h.matrix * &inner.precoder.matrix) * C64::new(inner.precoder.rx_scale, 0.0)
        - CMatrix::identity(k, k);
    Ok(GradientParts { phi, err })
}

/// The sample gradient in the `S_αα` domain, written term by term:
/// `2·Ψ⁻ᵀ (ρH_r-uᴴS_αβᵀ)ᵀ E* (S_αβH_b-rF)ᵀ Ψ⁻ᵀ` with `Ψ = Υ⁻¹ − S_αα`.
///
/// For every complex direction `Δ`, `df = Re tr(Gᵀ Δ)`.
pub fn grad_s_aa_sample(s: &ScatteringMatrices, ch: &ChannelSample, inner: &InnerSolution) -> Result<CMatrix> {
    let GradientParts { phi, err } = gradient_parts(s, ch, inner)?;
    let rho = C64::new(inner.precoder.rx_scale, 0.0);
    let psi_inv_t = phi.transpose();
    let left = (ch.h_ris_users().adjoint() * s.s_ab.transpose() * rho).transpose();
    let right = (&s.s_ab * ch.h_bs_ris() * &inner.precoder.matrix).transpose();
    Ok((&psi_inv_t * left * err.conjugate() * right * &psi_inv_t) * C64::new(2.0, 0.0))
}

/// Sample gradient with respect to `Σ_αα`: the `S_αα`-domain gradient carried
/// through `S_αα = UΣ_ααVᴴ`, i.e. `Uᵀ·G_S·V*`. The real part of its diagonal
/// is `∂f/∂σ_αα,ii`.
pub fn grad_sigma_aa_sample(
    d_u: &CMatrix,
    s: &ScatteringMatrices,
    ch: &ChannelSample,
    inner: &InnerSolution,
) -> Result<CMatrix> {
    let g = grad_s_aa_sample(s, ch, inner)?;
    Ok(d_u.transpose() * g * d_u.conjugate())
}

/// Sample gradient with respect to `Σ_αβ`; two chain-rule terms because
/// `Σ_αβ` enters `H̃ᴴ` on both sides of `Φ`:
///
/// ```text
/// 2(ρH_r-uᴴ(Vᴴ)ᵀ)ᵀ E* (VᴴH_b-rF)ᵀ Σ_αβᵀ (UᵀΦU)ᵀ
///   + 2(UᵀΦU)ᵀ Σ_αβᵀ (ρH_r-uᴴ(Vᴴ)ᵀ)ᵀ E* (VᴴH_b-rF)ᵀ
/// ```
pub fn grad_sigma_ab_sample(
    d_u: &CMatrix,
    sigma_ab: &[f64],
    s: &ScatteringMatrices,
    ch: &ChannelSample,
    inner: &InnerSolution,
) -> Result<CMatrix> {
    let GradientParts { phi, err } = gradient_parts(s, ch, inner)?;
    let rho = C64::new(inner.precoder.rx_scale, 0.0);
    let v_h = d_u.adjoint();
    let sigma_t = linalg::diag_real(sigma_ab).transpose();
    let p_t = (ch.h_ris_users().adjoint() * v_h.transpose() * rho).transpose();
    let r_t = (&v_h * ch.h_bs_ris() * &inner.precoder.matrix).transpose();
    let w_t = (d_u.transpose() * &phi * d_u).transpose();
    let core = &p_t * err.conjugate() * &r_t;
    let first = &core * &sigma_t * &w_t;
    let second = &w_t * &sigma_t * &core;
    Ok((first + second) * C64::new(2.0, 0.0))
}

/// Mean of per-sample gradients, summed in ascending sample index.
pub fn average_gradients(samples: &[(usize, CMatrix)]) -> Result<CMatrix> {
    let first = samples.first().ok_or(Error::EmptyBatch)?;
    let shape = first.1.shape();
    if samples.iter().any(|(_, g)| g.shape() != shape) {
        return Err(Error::Dimension("gradient shapes differ within a batch".into()));
    }
    let mut order: Vec<&(usize, CMatrix)> = samples.iter().collect();
    order.sort_by_key(|(i, _)| *i);
    let mut acc = CMatrix::zeros(shape.0, shape.1);
    for (_, g) in order {
        acc += g;
    }
    Ok(acc * C64::new(1.0 / samples.len() as f64, 0.0))
}

/// `σ − μ·Re{diag(G)}`.
pub fn gradient_step(sigma: &[f64], g: &CMatrix, mu: f64) -> Vec<f64> {
    sigma
        .iter()
        .enumerate()
        .map(|(i, s)| s - mu * g[(i, i)].re)
        .collect()
}

/// Simultaneous average of each index with its mirror `M−1−i`.
pub fn symmetrize(sigma: &[f64]) -> Vec<f64> {
    let m = sigma.len();
    (0..m)
        .map(|i| {
            let j = m - 1 - i;
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            (sigma[lo] + sigma[hi]) / 2.0
        })
        .collect()
}

/// Closest unit-circle point to `(a, b)`; `(0, 0)` maps to `(0, 1)`.
/// The flag reports the degenerate case.
pub fn project_pair(a: f64, b: f64) -> (f64, f64, bool) {
    let r = a.hypot(b);
    if r == 0.0 {
        (0.0, 1.0, true)
    } else {
        (a / r, b / r, false)
    }
}

/// Per-index normalization onto `σ_αα² + σ_αβ² = 1`.
pub fn project_to_circle(s_aa: &[f64], s_ab: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if s_aa.len() != s_ab.len() {
        return Err(Error::Dimension("projection inputs differ in length".into()));
    }
    let mut aa = Vec::with_capacity(s_aa.len());
    let mut ab = Vec::with_capacity(s_ab.len());
    for (i, (&a, &b)) in s_aa.iter().zip(s_ab).enumerate() {
        let (x, y, degenerate) = project_pair(a, b);
        if degenerate {
            log::warn!("degenerate projection at index {i}; mapped to (0, 1)");
        }
        aa.push(x);
        ab.push(y);
    }
    Ok((aa, ab))
}

/// Central-difference check of both diagonal gradients for one sample.
///
/// Returns `max_i |g_i − fd_i| / max_i |fd_i|`, taken over `σ_αα` and `σ_αβ`
/// separately and maximized.
pub fn finite_difference_error(
    design: &ScatteringDesign,
    ch: &ChannelSample,
    inner: &InnerSolution,
    p: &SystemParams,
    h: f64,
) -> Result<f64> {
    let u = design.dft_factor();
    let s = assemble_scattering(design);
    let g_aa = grad_sigma_aa_sample(u, &s, ch, inner)?;
    let g_ab = grad_sigma_ab_sample(u, design.sigma_ab(), &s, ch, inner)?;
    let f_at = |aa: &[f64], ab: &[f64]| sample_objective(&matrices_from_sigmas(u, aa, ab), ch, inner, p);
    let mut worst = 0.0f64;
    for which in 0..2 {
        let g = if which == 0 { &g_aa } else { &g_ab };
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..design.m() {
            let mut plus = [design.sigma_aa().to_vec(), design.sigma_ab().to_vec()];
            let mut minus = plus.clone();
            plus[which][i] += h;
            minus[which][i] -= h;
            let fd = (f_at(&plus[0], &plus[1])? - f_at(&minus[0], &minus[1])?) / (2.0 * h);
            num = num.max((g[(i, i)].re - fd).abs());
            den = den.max(fd.abs());
        }
        if den > 0.0 {
            worst = worst.max(num / den);
        } else {
            worst = worst.max(num);
        }
    }
    Ok(worst)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Solves the online problem for every sample at a fixed coupling design.
pub fn solve_samples(
    s: &ScatteringMatrices,
    samples: &[ChannelSample],
    p: &SystemParams,
    icfg: &InnerSolverConfig,
    warm: Option<&[InnerSolution]>,
    stream_base: u64,
) -> Result<Vec<InnerSolution>> {
    let m = s.m();
    samples
        .par_iter()
        .enumerate()
        .map(|(q, ch)| {
            let init = match warm {
                Some(prev) => prev[q].ris_config.clone(),
                None => icfg.initial_phases(m, stream_base + q as u64),
            };
            solve_inner_with(s, ch, p, icfg, init).map_err(|e| e.at_sample(q))
        })
        .collect()
}

/// Runs the offline coupling design on `ensemble.training`.
pub fn run_algorithm1(
    ensemble: &ChannelEnsemble,
    p: &SystemParams,
    ocfg: &OuterSolverConfig,
    icfg: &InnerSolverConfig,
) -> Result<(ScatteringDesign, OuterTrace)> {
    ocfg.validate()?;
    icfg.validate()?;
    let ep = &ensemble.params;
    if (ep.n_bs_antennas, ep.n_users, ep.n_ris_elements)
        != (p.n_bs_antennas, p.n_users, p.n_ris_elements)
    {
        return Err(Error::Dimension(
            "ensemble dimensions do not match the system parameters".into(),
        ));
    }
    let q = ensemble.q();
    if q == 0 {
        return Err(Error::EmptyBatch);
    }
    if ocfg.q_samples != 0 && ocfg.q_samples != q {
        return Err(Error::InvalidArgument(format!(
            "configured Q={} but the ensemble holds {q} training samples",
            ocfg.q_samples
        )));
    }
    let m = p.n_ris_elements;

    let mut design = ocfg.initial_design(m)?;
    let mut records = Vec::with_capacity(ocfg.max_iterations);
    let mut previous: Option<Vec<InnerSolution>> = None;
    let mut increase_streak = 0usize;
    let mut last_objective = f64::INFINITY;

    for k in 0..ocfg.max_iterations {
        let started = Instant::now();
        let resampled;
        let samples: &[ChannelSample] = if ocfg.resample_each_iteration {
            let seed = ocfg.seed.wrapping_add(k as u64 + 1);
            resampled = (0..q)
                .into_par_iter()
                .map(|i| draw_sample(p, ensemble.model, seed, Split::Training, i))
                .collect::<Result<Vec<_>>>()?;
            &resampled
        } else {
            &ensemble.training
        };

        let s = assemble_scattering(&design);
        let warm = if ocfg.warm_start { previous.as_deref() } else { None };
        let sols = solve_samples(&s, samples, p, icfg, warm, 0)?;

        let u = design.dft_factor();
        let grads: Vec<(usize, CMatrix, CMatrix)> = samples
            .par_iter()
            .zip(sols.par_iter())
            .enumerate()
            .map(|(i, (ch, sol))| {
                let g_aa = grad_sigma_aa_sample(u, &s, ch, sol).map_err(|e| e.at_sample(i))?;
                let g_ab = grad_sigma_ab_sample(u, design.sigma_ab(), &s, ch, sol)
                    .map_err(|e| e.at_sample(i))?;
                Ok((i, g_aa, g_ab))
            })
            .collect::<Result<Vec<_>>>()?;
        let g_aa = average_gradients(&grads.iter().map(|(i, g, _)| (*i, g.clone())).collect::<Vec<_>>())?;
        let g_ab = average_gradients(&grads.iter().map(|(i, _, g)| (*i, g.clone())).collect::<Vec<_>>())?;

        let sample_mse: Vec<f64> = sols.iter().map(|s| s.mse).collect();
        let (objective_mean, objective_std) = mean_std(&sample_mse);

        let fd_rel_error = if ocfg.fd_check {
            let e = finite_difference_error(&design, &samples[0], &sols[0], p, 1e-5)?;
            if e > 1e-5 {
                log::warn!("iteration {k}: gradient finite-difference mismatch {e:.3e}");
            }
            Some(e)
        } else {
            None
        };

        let aa = symmetrize(&gradient_step(design.sigma_aa(), &g_aa, ocfg.step_size));
        let ab = symmetrize(&gradient_step(design.sigma_ab(), &g_ab, ocfg.step_size));
        let (aa, ab) = project_to_circle(&aa, &ab)?;
        design = ScatteringDesign::new(aa, ab)?;

        if objective_mean > last_objective {
            increase_streak += 1;
            if increase_streak >= DIVERGENCE_WARN_STREAK {
                log::warn!(
                    "training objective increased for {increase_streak} consecutive iterations \
                     (μ = {}); the fixed step may be too large",
                    ocfg.step_size
                );
            }
        } else {
            increase_streak = 0;
        }
        last_objective = objective_mean;

        let s_new = assemble_scattering(&design);
        records.push(OuterIteration {
            iteration: k,
            objective_mean,
            objective_std,
            circle_residual: design.circle_residual(),
            symmetry_residual: s_new.symmetry_residual(),
            mirror_residual: design.mirror_residual(),
            sample_mse,
            fd_rel_error,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        previous = Some(sols);
    }

    let s = assemble_scattering(&design);
    let warm = if ocfg.warm_start { previous.as_deref() } else { None };
    let final_solutions = solve_samples(&s, &ensemble.training, p, icfg, warm, 0)?;
    let final_mse: Vec<f64> = final_solutions.iter().map(|s| s.mse).collect();
    let (final_objective_mean, final_objective_std) = mean_std(&final_mse);
    Ok((
        design,
        OuterTrace {
            iterations: records,
            final_objective_mean,
            final_objective_std,
            final_symmetry_residual: s.symmetry_residual(),
            final_solutions,
        },
    ))
}

/// Evaluates a design on `samples` with fresh inner solves.
pub fn evaluate_design(
    s: &ScatteringMatrices,
    samples: &[ChannelSample],
    p: &SystemParams,
    icfg: &InnerSolverConfig,
) -> Result<Vec<InnerSolution>> {
    solve_samples(s, samples, p, icfg, None, 0)
}

/// Trace CSV: one row per iteration plus a final row for the returned design.
/// With `include_timing = false` the `wall_ms` column is written as 0 so that
/// repeated runs produce identical bytes.
pub fn write_trace_csv(trace: &OuterTrace, path: impl AsRef<Path>, include_timing: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("iteration,objective_mean,objective_std,circle_residual,symmetry_residual,wall_ms\n");
    for r in &trace.iterations {
        let wall = if include_timing { r.wall_ms } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.3}",
            r.iteration, r.objective_mean, r.objective_std, r.circle_residual, r.symmetry_residual, wall
        );
    }
    let last_circle = trace.iterations.last().map(|r| r.circle_residual).unwrap_or(0.0);
    let _ = writeln!(
        out,
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.3}",
        trace.iterations.len(),
        trace.final_objective_mean,
        trace.final_objective_std,
        last_circle,
        trace.final_symmetry_residual,
        0.0
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reloadable text form of a trained coupling design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignArtifact {
    pub design: ScatteringDesign,
    pub seed: u64,
    pub config_hash: String,
}

const DESIGN_VERSION: u32 = 1;

impl DesignArtifact {
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        format!(
            "version = {DESIGN_VERSION}\nm = {}\nseed = {}\nconfig_hash = {}\nsigma_aa = {}\nsigma_ab = {}\n",
            self.design.m(),
            self.seed,
            self.config_hash,
            join(self.design.sigma_aa()),
            join(self.design.sigma_ab()),
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected key = value, got {line:?}")))?;
            let k = k.trim();
            if !matches!(k, "version" | "m" | "seed" | "config_hash" | "sigma_aa" | "sigma_ab") {
                return Err(Error::Format(format!("unknown design key {k:?}")));
            }
            fields.insert(k.to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Format(format!("missing design key {k:?}")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|e| Error::Format(format!("{k}: {e}")))
        };
        let vec = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("{k}: {e}"))))
                .collect()
        };
        let version = num("version")?;
        if version != DESIGN_VERSION as u64 {
            return Err(Error::Format(format!("unsupported design version {version}")));
        }
        let m = num("m")? as usize;
        let (aa, ab) = (vec("sigma_aa")?, vec("sigma_ab")?);
        if aa.len() != m || ab.len() != m {
            return Err(Error::Format(format!("declared m={m} but vectors hold {}/{}", aa.len(), ab.len())));
        }
        if circle_residual(&aa, &ab) >= crate::system::CIRCLE_TOLERANCE
            || mirror_residual(&aa) != 0.0
            || mirror_residual(&ab) != 0.0
        {
            return Err(Error::Format("stored design is not feasible".into()));
        }
        Ok(DesignArtifact {
            design: ScatteringDesign::new(aa, ab)?,
            seed: num("seed")?,
            config_hash: get("config_hash")?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{generate_ensemble, ChannelModel};

    fn diag(v: &[f64]) -> CMatrix {
        linalg::diag_real(v)
    }

    #[test]
    fn averaging_single_sample_is_identity() {
        let g = diag(&[1.0, -2.0, 3.5]);
        assert_eq!(average_gradients(&[(0, g.clone())]).unwrap(), g);
    }

    #[test]
    fn averaging_opposites_cancels() {
        let g = diag(&[1.0, -2.0, 3.5]);
        let avg = average_gradients(&[(0, g.clone()), (1, -g)]).unwrap();
        assert_eq!(avg, CMatrix::zeros(3, 3));
    }

    #[test]
    fn averaging_is_order_independent() {
        let gs: Vec<(usize, CMatrix)> = (0..5).map(|i| (i, diag(&[0.1 * i as f64, 1.0 / (i + 1) as f64]))).collect();
        let mut shuffled = gs.clone();
        shuffled.reverse();
        shuffled.swap(0, 2);
        assert_eq!(average_gradients(&gs).unwrap(), average_gradients(&shuffled).unwrap());
    }

    #[test]
    fn averaging_rejects_empty_and_mismatched() {
        assert!(matches!(average_gradients(&[]), Err(Error::EmptyBatch)));
        let r = average_gradients(&[(0, diag(&[1.0])), (1, diag(&[1.0, 2.0]))]);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn gradient_step_uses_real_diagonal() {
        let mut g = diag(&[0.2]);
        g[(0, 0)].im = 7.0;
        let out = gradient_step(&[0.5], &g, 0.1);
        assert!((out[0] - 0.48).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_examples() {
        assert_eq!(symmetrize(&[1.0, 3.0]), vec![2.0, 2.0]);
        assert_eq!(symmetrize(&[1.0, 5.0, 3.0]), vec![2.0, 5.0, 2.0]);
        let once = symmetrize(&[0.3, -1.0, 2.0, 7.0]);
        assert_eq!(symmetrize(&once), once);
    }

    #[test]
    fn projection_examples() {
        let (x, y, d) = project_pair(3.0, 4.0);
        assert!((x - 0.6).abs() < 1e-15 && (y - 0.8).abs() < 1e-15 && !d);
        let (x, y, _) = project_pair(0.6, 0.8);
        let (x2, y2, _) = project_pair(x, y);
        assert!((x2 - x).abs() < 1e-16 && (y2 - y).abs() < 1e-16);
        assert_eq!(project_pair(0.0, 0.0), (0.0, 1.0, true));
        assert!(matches!(project_to_circle(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    fn small_ensemble() -> (SystemParams, ChannelEnsemble) {
        let p = SystemParams::new(4, 2, 16, 20.0).with_noise(1e-2);
        let ens = generate_ensemble(&p, 2, 1, ChannelModel::IidRayleigh, 3).unwrap();
        (p, ens)
    }

    fn quick_inner() -> InnerSolverConfig {
        InnerSolverConfig {
            max_outer_alternations: 5,
            ..InnerSolverConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_initial_design() {
        let (p, ens) = small_ensemble();
        let ocfg = OuterSolverConfig {
            max_iterations: 0,
            init_sigma_aa: 0.3,
            ..OuterSolverConfig::default()
        };
        let (design, trace) = run_algorithm1(&ens, &p, &ocfg, &quick_inner()).unwrap();
        assert_eq!(design, ScatteringDesign::uniform(16, 0.3).unwrap());
        assert!(trace.iterations.is_empty());
        assert_eq!(trace.final_solutions.len(), 2);
    }

    #[test]
    fn iterates_stay_feasible() {
        let (p, ens) = small_ensemble();
        let ocfg = OuterSolverConfig {
            max_iterations: 3,
            step_size: 5.0,
            fd_check: true,
            ..OuterSolverConfig::default()
        };
        let (design, trace) = run_algorithm1(&ens, &p, &ocfg, &quick_inner()).unwrap();
        assert!(design.circle_residual() < 1e-12);
        for r in &trace.iterations {
            assert!(r.circle_residual < 1e-12);
            assert_eq!(r.mirror_residual, 0.0);
            assert!(r.fd_rel_error.unwrap() < 1e-4, "{:?}", r.fd_rel_error);
        }
    }

    #[test]
    fn q_mismatch_is_rejected() {
        let (p, ens) = small_ensemble();
        let ocfg = OuterSolverConfig {
            q_samples: 3,
            ..OuterSolverConfig::default()
        };
        assert!(matches!(
            run_algorithm1(&ens, &p, &ocfg, &quick_inner()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn design_artifact_round_trip() {
        let aa = vec![0.1, -0.3, -0.3, 0.1];
        let ab: Vec<f64> = aa.iter().map(|a: &f64| (1.0 - a * a).sqrt()).collect();
        let art = DesignArtifact {
            design: ScatteringDesign::new(aa, ab).unwrap(),
            seed: 42,
            config_hash: "00ff".into(),
        };
        assert_eq!(DesignArtifact::from_text(&art.to_text()).unwrap(), art);
        let bad = art.to_text().replace("m = 4", "m = 9");
        assert!(matches!(DesignArtifact::from_text(&bad), Err(Error::Format(_))));
    }
}
