//! S-parameter algebra for the coupled RIS.
//!
//! The surface is described by `S_αα = UΣ_ααVᴴ` (port-to-port) and
//! `S_αβ = UΣ_αβVᴴ` (space-to-port), with `S_βα = S_αβᵀ` by reciprocity and
//! `U = V = D⊗D` built from the unitary √M-point DFT. For a diagonal load
//! `Υ`, the surface acts on the incident field through the non-diagonal
//! reflection operator `Φ = (Υ⁻¹ − S_αα)⁻¹`, and the users see
//!
//! ```text
//! H̃ᴴ = H_r-uᴴ S_αβᵀ Φ S_αβ H_b-r        (K × N)
//! ```
//!
//! `Φ` is always obtained by a dense factorization; the Neumann expansion
//! `Σ_l (ΥS_αα)^l Υ` is provided as a diagnostic only.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::system::{perfect_sqrt, ChannelSample, RisPhaseConfig, ScatteringDesign};

/// `D⊗D` with `D` the unitary √M-point DFT, `D[k,l] = exp(−j2πkl/√M)/M^{1/4}`.
pub fn build_dft_kronecker(m: usize) -> Result<CMatrix> {
    let n = perfect_sqrt(m)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Dimension(format!("M={m} is not a positive perfect square")))?;
    let scale = 1.0 / (n as f64).sqrt();
    let d = CMatrix::from_fn(n, n, |k, l| {
        // reduce kl mod n before scaling so large products stay exact
        let kl = (k * l) % n;
        C64::from_polar(scale, -2.0 * PI * kl as f64 / n as f64)
    });
    Ok(d.kronecker(&d))
}

/// Assembled scattering blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrices {
    pub s_aa: CMatrix,
    pub s_ab: CMatrix,
    pub s_ba: CMatrix,
}

impl ScatteringMatrices {
    /// Wraps raw blocks without any feasibility check; `S_βα = S_αβᵀ`.
    ///
    /// Used for the literal fixed-coupling baseline with `S_αβ = I`, which is
    /// not lossless unless `S_αα = 0`.
    pub fn from_raw(s_aa: CMatrix, s_ab: CMatrix) -> Result<Self> {
        let m = s_aa.nrows();
        if s_aa.shape() != (m, m) || s_ab.shape() != (m, m) {
            return Err(Error::Dimension("scattering blocks must be square and equal-sized".into()));
        }
        let s_ba = s_ab.transpose();
        Ok(ScatteringMatrices { s_aa, s_ab, s_ba })
    }

    pub fn m(&self) -> usize {
        self.s_aa.nrows()
    }

    /// `‖S_ααS_ααᴴ + S_αβS_αβᴴ − I‖_F`.
    pub fn losslessness_residual(&self) -> f64 {
        let m = self.m();
        let g = &self.s_aa * self.s_aa.adjoint() + &self.s_ab * self.s_ab.adjoint()
            - CMatrix::identity(m, m);
        linalg::frobenius_sq(&g).sqrt()
    }

    /// `‖S_αα − S_ααᵀ‖_F`.
    pub fn symmetry_residual(&self) -> f64 {
        linalg::frobenius_sq(&(&self.s_aa - self.s_aa.transpose())).sqrt()
    }
}

/// `S_αα = UΣ_ααVᴴ`, `S_αβ = UΣ_αβVᴴ`, `S_βα = S_αβᵀ`, with `U = V`.
pub fn assemble_scattering(d: &ScatteringDesign) -> ScatteringMatrices {
    let u = d.dft_factor();
    let v_h = u.adjoint();
    let s_aa = u * linalg::diag_real(d.sigma_aa()) * &v_h;
    let s_ab = u * linalg::diag_real(d.sigma_ab()) * &v_h;
    let s_ba = s_ab.transpose();
    ScatteringMatrices { s_aa, s_ab, s_ba }
}

/// `(Υ⁻¹ − S_αα)`.
pub fn resolvent_argument(s_aa: &CMatrix, phases: &RisPhaseConfig) -> CMatrix {
    let mut r = -s_aa.clone();
    for (i, u) in phases.upsilon().into_iter().enumerate() {
        r[(i, i)] += u.conj();
    }
    r
}

/// `Φ = (Υ⁻¹ − S_αα)⁻¹`, rejected when the condition estimate exceeds 1e12.
pub fn reflection_operator(s_aa: &CMatrix, phases: &RisPhaseConfig) -> Result<CMatrix> {
    check_len(s_aa.nrows(), phases)?;
    linalg::inverse_checked(&resolvent_argument(s_aa, phases)).map(|(phi, _)| phi)
}

pub fn effective_reflection(d: &ScatteringDesign, phases: &RisPhaseConfig) -> Result<CMatrix> {
    reflection_operator(&assemble_scattering(d).s_aa, phases)
}

/// `Σ_{l=0}^{L} (ΥS_αα)^l Υ`.
pub fn neumann_partial_sum(d: &ScatteringDesign, phases: &RisPhaseConfig, order: usize) -> CMatrix {
    neumann_from_blocks(&assemble_scattering(d).s_aa, phases, order)
}

pub fn neumann_from_blocks(s_aa: &CMatrix, phases: &RisPhaseConfig, order: usize) -> CMatrix {
    let ups = phases.matrix();
    let step = &ups * s_aa;
    let mut term = ups.clone();
    let mut acc = ups;
    for _ in 0..order {
        term = &step * term;
        acc += &term;
    }
    acc
}

/// Spectral radius of `ΥS_αα`, the geometric rate of the Neumann expansion.
pub fn neumann_rate(d: &ScatteringDesign, phases: &RisPhaseConfig) -> f64 {
    let s = assemble_scattering(d);
    linalg::spectral_radius(&(phases.matrix() * s.s_aa))
}

/// End-to-end `H̃ᴴ` (K×N).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub matrix: CMatrix,
}

impl EffectiveChannel {
    pub fn n_users(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Evaluates `H_r-uᴴ (UΣ_αβVᴴ)ᵀ (Υ⁻¹ − UΣ_ααVᴴ)⁻¹ (UΣ_αβVᴴ) H_b-r` as written.
pub fn effective_channel(
    d: &ScatteringDesign,
    phases: &RisPhaseConfig,
    ch: &ChannelSample,
) -> Result<EffectiveChannel> {
    let s = assemble_scattering(d);
    CoupledChannel::new(&s, ch)?.effective(phases).map(|(h, _)| h)
}

/// Per-(design, channel) factors that stay fixed while the phases move:
/// `A = H_r-uᴴ S_βα` (K×M) and `B = S_αβ H_b-r` (M×N).
#[derive(Debug, Clone)]
pub struct CoupledChannel<'a> {
    pub s_aa: &'a CMatrix,
    pub a: CMatrix,
    pub b: CMatrix,
}

impl<'a> CoupledChannel<'a> {
    pub fn new(s: &'a ScatteringMatrices, ch: &ChannelSample) -> Result<Self> {
        let m = s.m();
        if ch.h_bs_ris().nrows() != m || ch.h_ris_users().nrows() != m {
            return Err(Error::Dimension(format!(
                "channel has {} RIS rows, scattering blocks are {m}×{m}",
                ch.h_bs_ris().nrows()
            )));
        }
        let a = ch.h_ris_users().adjoint() * &s.s_ba;
        let b = &s.s_ab * ch.h_bs_ris();
        Ok(CoupledChannel { s_aa: &s.s_aa, a, b })
    }

    /// `(H̃ᴴ, Φ)` for the given phases.
    pub fn effective(&self, phases: &RisPhaseConfig) -> Result<(EffectiveChannel, CMatrix)> {
        let phi = reflection_operator(self.s_aa, phases)?;
        let h = &self.a * (&phi * &self.b);
        if !linalg::all_finite(&h) {
            return Err(Error::SingularResolvent {
                condition: f64::INFINITY,
            });
        }
        Ok((EffectiveChannel { matrix: h }, phi))
    }
}

fn check_len(m: usize, phases: &RisPhaseConfig) -> Result<()> {
    if phases.len() != m {
        return Err(Error::Dimension(format!(
            "{} phases for an M={m} surface",
            phases.len()
        )));
    }
    Ok(())
}
