//! Domain types shared by every layer: system dimensions, RIS phase state,
//! precoder, channel samples and the coupling design.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::scattering::build_dft_kronecker;

/// Threshold on the per-index circle residual `|σ_aa² + σ_ab² − 1|`.
pub const CIRCLE_TOLERANCE: f64 = 1e-12;

/// Relative singular-value floor for the rank-K check on the BS-RIS channel.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Integer square root of `m` if `m` is a perfect square.
pub fn perfect_sqrt(m: usize) -> Option<usize> {
    let r = (m as f64).sqrt().round() as usize;
    (r * r == m).then_some(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// BS antennas, N.
    pub n_bs_antennas: usize,
    /// Single-antenna users, K.
    pub n_users: usize,
    /// RIS elements, M. Must be a perfect square.
    pub n_ris_elements: usize,
    pub tx_power_dbm: f64,
    /// Linear noise power per user.
    pub noise_variance: f64,
    pub rng_seed: u64,
}

impl SystemParams {
    pub fn new(n: usize, k: usize, m: usize, tx_power_dbm: f64) -> Self {
        SystemParams {
            n_bs_antennas: n,
            n_users: k,
            n_ris_elements: m,
            tx_power_dbm,
            noise_variance: 1.0,
            rng_seed: 0,
        }
    }

    pub fn with_noise(mut self, noise_variance: f64) -> Self {
        self.noise_variance = noise_variance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_power_dbm(mut self, p_dbm: f64) -> Self {
        self.tx_power_dbm = p_dbm;
        self
    }

    pub fn p_lin(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn validate(self) -> Result<Self> {
        validate_params(self)
    }
}

/// Checks every `SystemParams` invariant and hands the value back unchanged.
pub fn validate_params(p: SystemParams) -> Result<SystemParams> {
    let (n, k, m) = (p.n_bs_antennas, p.n_users, p.n_ris_elements);
    if k == 0 || n == 0 || m == 0 {
        return Err(Error::Dimension(format!(
            "dimensions must be positive (N={n}, K={k}, M={m})"
        )));
    }
    if k >= n {
        return Err(Error::Dimension(format!("K<N violated (K={k}, N={n})")));
    }
    if m <= k {
        return Err(Error::Dimension(format!("M>K violated (M={m}, K={k})")));
    }
    if perfect_sqrt(m).is_none() {
        return Err(Error::Dimension(format!("M={m} is not a perfect square")));
    }
    if !p.tx_power_dbm.is_finite() || !(p.p_lin() > 0.0) {
        return Err(Error::Dimension(format!(
            "transmit power {} dBm has no positive linear value",
            p.tx_power_dbm
        )));
    }
    if !(p.noise_variance > 0.0 && p.noise_variance.is_finite()) {
        return Err(Error::Dimension(format!(
            "noise variance must be positive and finite, got {}",
            p.noise_variance
        )));
    }
    Ok(p)
}

/// RIS port terminations stored as angles, so `|υ_m| = 1` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhaseConfig {
    phases: Vec<f64>,
}

impl RisPhaseConfig {
    /// Angles are wrapped into `[0, 2π)`.
    pub fn new(phases: Vec<f64>) -> Self {
        let phases = phases
            .into_iter()
            .map(|t| {
                let w = t.rem_euclid(TAU);
                if w >= TAU {
                    0.0
                } else {
                    w
                }
            })
            .collect();
        RisPhaseConfig { phases }
    }

    pub fn zeros(m: usize) -> Self {
        RisPhaseConfig {
            phases: vec![0.0; m],
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal entries `υ_m = exp(jθ_m)`.
    pub fn upsilon(&self) -> Vec<C64> {
        self.phases.iter().map(|&t| C64::from_polar(1.0, t)).collect()
    }

    /// `Υ = diag(υ)`.
    pub fn matrix(&self) -> CMatrix {
        linalg::diag_complex(&self.upsilon())
    }

    /// `Υ⁻¹ = diag(conj(υ))`.
    pub fn inverse_matrix(&self) -> CMatrix {
        let inv: Vec<C64> = self.upsilon().iter().map(|u| u.conj()).collect();
        linalg::diag_complex(&inv)
    }
}

/// Transmit precoder `F` (N×K) with the common receive scaling `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub matrix: CMatrix,
    pub rx_scale: f64,
}

impl Precoder {
    pub fn power(&self) -> f64 {
        linalg::frobenius_sq(&self.matrix)
    }

    /// `|‖F‖² − p| / p`.
    pub fn power_residual(&self, p_lin: f64) -> f64 {
        (self.power() - p_lin).abs() / p_lin
    }
}

/// One realization of the BS-RIS (M×N) and RIS-users (M×K) channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    h_bs_ris: CMatrix,
    h_ris_users: CMatrix,
}

impl ChannelSample {
    pub fn new(h_bs_ris: CMatrix, h_ris_users: CMatrix, params: &SystemParams) -> Result<Self> {
        let (n, k, m) = (params.n_bs_antennas, params.n_users, params.n_ris_elements);
        if h_bs_ris.shape() != (m, n) || h_ris_users.shape() != (m, k) {
            return Err(Error::Dimension(format!(
                "channel shapes {:?}/{:?} do not match M×N={m}×{n}, M×K={m}×{k}",
                h_bs_ris.shape(),
                h_ris_users.shape()
            )));
        }
        if !linalg::all_finite(&h_bs_ris) || !linalg::all_finite(&h_ris_users) {
            return Err(Error::InvalidArgument("channel has non-finite entries".into()));
        }
        if !has_rank_at_least(&h_bs_ris, k) {
            return Err(Error::DegenerateChannel(format!(
                "rank(H_b-r) < K={k}"
            )));
        }
        Ok(ChannelSample {
            h_bs_ris,
            h_ris_users,
        })
    }

    /// Skips the rank check. Used for zero-channel diagnostics.
    pub fn new_unchecked(h_bs_ris: CMatrix, h_ris_users: CMatrix) -> Self {
        ChannelSample {
            h_bs_ris,
            h_ris_users,
        }
    }

    pub fn h_bs_ris(&self) -> &CMatrix {
        &self.h_bs_ris
    }

    pub fn h_ris_users(&self) -> &CMatrix {
        &self.h_ris_users
    }

    pub fn n_users(&self) -> usize {
        self.h_ris_users.ncols()
    }
}

/// The K-th largest singular value must exceed `RANK_TOLERANCE` times the largest.
pub fn has_rank_at_least(m: &CMatrix, k: usize) -> bool {
    let sv = linalg::singular_values(m);
    if sv.len() < k || k == 0 {
        return k == 0;
    }
    sv[0] > 0.0 && sv[k - 1] > RANK_TOLERANCE * sv[0]
}

/// The RIS coupling state: diagonals of `Σ_αα`, `Σ_αβ` and the fixed `U = V = D⊗D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringDesign {
    sigma_aa: Vec<f64>,
    sigma_ab: Vec<f64>,
    dft_factor: CMatrix,
}

impl ScatteringDesign {
    /// Requires both vectors on the unit circle per index and mirror-symmetric.
    pub fn new(sigma_aa: Vec<f64>, sigma_ab: Vec<f64>) -> Result<Self> {
        let m = sigma_aa.len();
        if sigma_ab.len() != m {
            return Err(Error::Dimension(format!(
                "sigma lengths differ ({m} vs {})",
                sigma_ab.len()
            )));
        }
        let dft_factor = build_dft_kronecker(m)?;
        let design = ScatteringDesign {
            sigma_aa,
            sigma_ab,
            dft_factor,
        };
        let r = design.circle_residual();
        if !(r < CIRCLE_TOLERANCE) {
            return Err(Error::InfeasibleDesign(format!(
                "circle residual {r:.3e} exceeds {CIRCLE_TOLERANCE:e}"
            )));
        }
        let s = design.mirror_residual();
        if s != 0.0 {
            return Err(Error::InfeasibleDesign(format!(
                "diagonals are not mirror-symmetric (residual {s:.3e})"
            )));
        }
        Ok(design)
    }

    /// `Σ_αα = c·I`, `Σ_αβ = √(1−c²)·I`.
    pub fn uniform(m: usize, c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c.abs()) {
            return Err(Error::InvalidArgument(format!("|c| must be at most 1, got {c}")));
        }
        let t = (1.0 - c * c).sqrt();
        Self::new(vec![c; m], vec![t; m])
    }

    /// No mutual coupling: `Σ_αα = 0`, `Σ_αβ = I`.
    pub fn conventional(m: usize) -> Result<Self> {
        Self::uniform(m, 0.0)
    }

    pub fn m(&self) -> usize {
        self.sigma_aa.len()
    }

    pub fn sigma_aa(&self) -> &[f64] {
        &self.sigma_aa
    }

    pub fn sigma_ab(&self) -> &[f64] {
        &self.sigma_ab
    }

    pub fn dft_factor(&self) -> &CMatrix {
        &self.dft_factor
    }

    /// `max_i |σ_aa[i]² + σ_ab[i]² − 1|`.
    pub fn circle_residual(&self) -> f64 {
        circle_residual(&self.sigma_aa, &self.sigma_ab)
    }

    /// `max_i` over both vectors of `|σ[i] − σ[M−1−i]|`.
    pub fn mirror_residual(&self) -> f64 {
        mirror_residual(&self.sigma_aa).max(mirror_residual(&self.sigma_ab))
    }
}

pub fn circle_residual(aa: &[f64], ab: &[f64]) -> f64 {
    aa.iter()
        .zip(ab)
        .map(|(a, b)| (a * a + b * b - 1.0).abs())
        .fold(0.0, f64::max)
}

pub fn mirror_residual(v: &[f64]) -> f64 {
    let m = v.len();
    (0..m)
        .map(|i| (v[i] - v[m - 1 - i]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_operating_point_is_valid() {
        let p = SystemParams::new(32, 6, 64, 50.0);
        assert_eq!(validate_params(p.clone()).unwrap(), p);
    }

    #[test]
    fn k_not_below_n_is_rejected() {
        let e = validate_params(SystemParams::new(4, 4, 16, 30.0)).unwrap_err();
        assert!(matches!(e, Error::Dimension(ref s) if s.contains("K<N")));
    }

    #[test]
    fn non_square_m_is_rejected() {
        let e = validate_params(SystemParams::new(8, 3, 15, 30.0)).unwrap_err();
        assert!(matches!(e, Error::Dimension(ref s) if s.contains("perfect square")));
    }

    #[test]
    fn m_not_above_k_is_rejected() {
        assert!(validate_params(SystemParams::new(8, 4, 4, 30.0)).is_err());
    }

    #[test]
    fn nonpositive_noise_is_rejected() {
        assert!(validate_params(SystemParams::new(8, 3, 16, 30.0).with_noise(0.0)).is_err());
    }

    #[test]
    fn dbm_conversion() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert!((dbm_to_watts(0.0) - 0.001).abs() < 1e-18);
        // 50 dBm: 10^((50-30)/10) = 10^2
        let table = [(-10.0, 1e-4), (20.0, 0.1), (40.0, 10.0), (50.0, 100.0)];
        for (dbm, w) in table {
            assert!((dbm_to_watts(dbm) - w).abs() <= 1e-12 * w, "{dbm} dBm");
        }
    }

    #[test]
    fn phases_wrap_into_range() {
        let cfg = RisPhaseConfig::new(vec![-0.5, TAU + 0.25, 3.0]);
        assert!((cfg.phases()[0] - (TAU - 0.5)).abs() < 1e-15);
        assert!((cfg.phases()[1] - 0.25).abs() < 1e-12);
        for u in cfg.upsilon() {
            assert!((u.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn design_rejects_off_circle() {
        assert!(matches!(
            ScatteringDesign::new(vec![0.5; 4], vec![0.5; 4]),
            Err(Error::InfeasibleDesign(_))
        ));
    }

    #[test]
    fn design_rejects_asymmetric() {
        let a = [0.6, 0.0, 0.0, 0.8];
        let b: Vec<f64> = a.iter().map(|x: &f64| (1.0 - x * x).sqrt()).collect();
        assert!(ScatteringDesign::new(a.to_vec(), b).is_err());
    }

    #[test]
    fn uniform_design_is_feasible() {
        let d = ScatteringDesign::uniform(16, 0.5).unwrap();
        assert!(d.circle_residual() < 1e-15);
        assert_eq!(d.mirror_residual(), 0.0);
    }
}
