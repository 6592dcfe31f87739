//! Baseline comparisons and parameter sweeps.
//!
//! Three schemes are compared on identical channel ensembles:
//!
//! * `proposed_mc_optimized`: offline coupling design on the training set,
//!   then frozen-design evaluation with fresh online solves;
//! * `fixed_mc_baseline`: online solves under a fixed, non-optimized coupling;
//! * `conventional_no_mc`: online solves with `Σ_αα = 0`, `Σ_αβ = I`.

mod csv_io;
mod plot;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub use csv_io::{emit_csv, read_csv, CSV_HEADER};
pub use plot::emit_plot;

use crate::channels::{generate_ensemble, ChannelEnsemble};
use crate::config::{config_hash, BaselineConfig, ExperimentConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::inner::{InnerSolution, InnerSolverConfig};
use crate::linalg::CMatrix;
use crate::outer::{run_algorithm1, solve_samples, OuterSolverConfig, OuterTrace};
use crate::scattering::{assemble_scattering, ScatteringMatrices};
use crate::system::{perfect_sqrt, validate_params, ChannelSample, ScatteringDesign, SystemParams};

/// Phase-initialization streams for evaluation solves start here so they
/// never coincide with the training-sample streams.
const EVAL_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeTag {
    ProposedMcOptimized,
    FixedMcBaseline,
    ConventionalNoMc,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 3] = [
        SchemeTag::ProposedMcOptimized,
        SchemeTag::FixedMcBaseline,
        SchemeTag::ConventionalNoMc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::ProposedMcOptimized => "proposed_mc_optimized",
            SchemeTag::FixedMcBaseline => "fixed_mc_baseline",
            SchemeTag::ConventionalNoMc => "conventional_no_mc",
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub scheme: SchemeTag,
    pub p_dbm: f64,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub q: usize,
    pub mean_sum_rate_bits: f64,
    pub std_err: f64,
    pub n_eval_channels: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// Which channel set a scheme is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSet {
    Training,
    Evaluation,
}

/// Everything a scheme run produced, beyond the summary record.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub record: ExperimentRecord,
    /// Trained design (proposed scheme only).
    pub design: Option<ScatteringDesign>,
    pub trace: Option<OuterTrace>,
    pub solutions: Vec<InnerSolution>,
}

/// Scattering blocks for the fixed-coupling baseline.
///
/// The feasible variant is `Σ_αα = c·I`, `Σ_αβ = √(1−c²)·I`. The infeasible
/// variant keeps `S_αβ = I` next to `S_αα = c·I`, which violates
/// losslessness for any `c ≠ 0`.
pub fn fixed_baseline_matrices(m: usize, b: &BaselineConfig) -> Result<ScatteringMatrices> {
    if b.infeasible {
        let u = ScatteringDesign::uniform(m, b.fixed_c)?;
        let s_aa = assemble_scattering(&u).s_aa;
        ScatteringMatrices::from_raw(s_aa, CMatrix::identity(m, m))
    } else {
        Ok(assemble_scattering(&ScatteringDesign::uniform(m, b.fixed_c)?))
    }
}

pub fn conventional_matrices(m: usize) -> Result<ScatteringMatrices> {
    Ok(assemble_scattering(&ScatteringDesign::conventional(m)?))
}

/// Mean sum rate and its standard error.
pub fn summarize(solutions: &[InnerSolution]) -> (f64, f64) {
    let n = solutions.len() as f64;
    let mean = solutions.iter().map(|s| s.sum_rate_bits).sum::<f64>() / n;
    if solutions.len() < 2 {
        return (mean, 0.0);
    }
    let var = solutions
        .iter()
        .map(|s| (s.sum_rate_bits - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Online solves for `samples` under fixed scattering blocks.
pub fn evaluate_matrices(
    s: &ScatteringMatrices,
    samples: &[ChannelSample],
    p: &SystemParams,
    icfg: &InnerSolverConfig,
    set: EvalSet,
) -> Result<Vec<InnerSolution>> {
    let base = match set {
        EvalSet::Training => 0,
        EvalSet::Evaluation => EVAL_STREAM_BASE,
    };
    solve_samples(s, samples, p, icfg, None, base)
}

#[derive(Serialize)]
struct HashInput<'a> {
    scheme: SchemeTag,
    params: &'a SystemParams,
    model: &'a crate::channels::ChannelModel,
    ensemble_seed: u64,
    q: usize,
    e: usize,
    outer: &'a OuterSolverConfig,
    inner: &'a InnerSolverConfig,
    baseline: &'a BaselineConfig,
}

/// Runs one scheme and scores it on `set`.
pub fn run_scheme_detailed(
    scheme: SchemeTag,
    ensemble: &ChannelEnsemble,
    p: &SystemParams,
    ocfg: &OuterSolverConfig,
    icfg: &InnerSolverConfig,
    baseline: &BaselineConfig,
    set: EvalSet,
) -> Result<SchemeOutcome> {
    let tag = |e: Error| Error::Scheme {
        scheme: scheme.as_str().to_string(),
        source: Box::new(e),
    };
    let p = validate_params(p.clone()).map_err(tag)?;
    let m = p.n_ris_elements;
    let samples = match set {
        EvalSet::Training => &ensemble.training,
        EvalSet::Evaluation => &ensemble.evaluation,
    };
    if samples.is_empty() {
        return Err(tag(Error::InvalidArgument("no channels to evaluate on".into())));
    }

    let (matrices, design, trace) = match scheme {
        SchemeTag::ProposedMcOptimized => {
            let (design, trace) = run_algorithm1(ensemble, &p, ocfg, icfg).map_err(tag)?;
            (assemble_scattering(&design), Some(design), Some(trace))
        }
        SchemeTag::FixedMcBaseline => (fixed_baseline_matrices(m, baseline).map_err(tag)?, None, None),
        SchemeTag::ConventionalNoMc => (conventional_matrices(m).map_err(tag)?, None, None),
    };
    let solutions = evaluate_matrices(&matrices, samples, &p, icfg, set).map_err(tag)?;
    let (mean, std_err) = summarize(&solutions);

    let hash = config_hash(&HashInput {
        scheme,
        params: &p,
        model: &ensemble.model,
        ensemble_seed: ensemble.seed,
        q: ensemble.q(),
        e: ensemble.e(),
        outer: ocfg,
        inner: icfg,
        baseline,
    });
    let record = ExperimentRecord {
        scheme,
        p_dbm: p.tx_power_dbm,
        m,
        k: p.n_users,
        n: p.n_bs_antennas,
        q: ensemble.q(),
        mean_sum_rate_bits: mean,
        std_err,
        n_eval_channels: solutions.len(),
        seed: ensemble.seed,
        config_hash: hash,
    };
    Ok(SchemeOutcome {
        record,
        design,
        trace,
        solutions,
    })
}

/// Runs one scheme and scores it on the held-out evaluation channels.
pub fn run_scheme(
    scheme: SchemeTag,
    ensemble: &ChannelEnsemble,
    p: &SystemParams,
    ocfg: &OuterSolverConfig,
    icfg: &InnerSolverConfig,
    baseline: &BaselineConfig,
) -> Result<ExperimentRecord> {
    run_scheme_detailed(scheme, ensemble, p, ocfg, icfg, baseline, EvalSet::Evaluation).map(|o| o.record)
}

/// SplitMix64 finalizer over `(base, value bits)`.
pub fn derive_seed(base: u64, value: f64) -> u64 {
    let mut z = base ^ value.to_bits().rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Parameters and ensemble seed for one sweep point.
pub fn sweep_point(axis: SweepAxis, value: f64, base: &ExperimentConfig) -> Result<(SystemParams, u64)> {
    let mut p = base.system.clone();
    let seed = match axis {
        SweepAxis::PowerDbm => {
            if !value.is_finite() {
                return Err(Error::Dimension(format!("power grid value {value} is not finite")));
            }
            p.tx_power_dbm = value;
            base.channels.seed
        }
        SweepAxis::NRisElements => {
            if value.fract() != 0.0 || value < 1.0 || perfect_sqrt(value as usize).is_none() {
                return Err(Error::Dimension(format!("M={value} is not a perfect square")));
            }
            p.n_ris_elements = value as usize;
            derive_seed(base.channels.seed, value)
        }
    };
    Ok((validate_params(p)?, seed))
}

/// One record per (grid point, scheme), in grid order then [`SchemeTag::ALL`] order.
///
/// Every scheme at a grid point consumes the same ensemble. On the power axis
/// the channels are shared across the grid; on the M axis each point draws
/// its own ensemble with a seed derived from the base seed and M.
pub fn sweep(axis: SweepAxis, grid: &[f64], base: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let points = grid
        .iter()
        .map(|&v| sweep_point(axis, v, base))
        .collect::<Result<Vec<_>>>()?;
    let per_point: Vec<Vec<ExperimentRecord>> = points
        .par_iter()
        .map(|(p, seed)| {
            let ens = generate_ensemble(p, base.channels.q_train, base.channels.e_eval, base.channels.model, *seed)?;
            SchemeTag::ALL
                .iter()
                .map(|&s| run_scheme(s, &ens, p, &base.outer, &base.inner, &base.baseline))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}
