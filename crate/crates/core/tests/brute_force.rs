mod common;

use common::*;
use ris_mc::inner::{solve_inner, InnerSolverConfig, PhaseInit};
use ris_mc::{RisPhaseConfig, ScatteringDesign, SystemParams};

/// Optimal single-user sum-MSE at fixed phases: `c / (‖h‖² + c)`, `c = σ²/P`.
fn single_user_mse(h: &ris_mc::linalg::CMatrix, p: &SystemParams) -> f64 {
    let c = p.noise_variance / p.p_lin();
    c / (h.norm_squared() + c)
}

#[test]
fn solver_is_near_exhaustive_grid_optimum() {
    const LEVELS: usize = 16;
    let p = SystemParams::new(2, 1, 4, 10.0).with_noise(1.0);
    let cfg = InnerSolverConfig {
        max_outer_alternations: 200,
        phase_init: PhaseInit::UniformRandom { seed: 5 },
        ..InnerSolverConfig::default()
    };
    let mut r = rng(21);
    for trial in 0..4 {
        let design = if trial % 2 == 0 {
            ScatteringDesign::conventional(4).unwrap()
        } else {
            random_design(&mut r, 4, 0.6)
        };
        let ch = random_channel(&mut r, 2, 1, 4);
        let (aa, ab) = blocks(design.sigma_aa(), design.sigma_ab());
        let mut best = f64::INFINITY;
        for idx in 0..LEVELS.pow(4) {
            let th: Vec<f64> = (0..4)
                .map(|m| ((idx / LEVELS.pow(m as u32)) % LEVELS) as f64 * std::f64::consts::TAU / LEVELS as f64)
                .collect();
            let h = effective(&aa, &ab, &RisPhaseConfig::new(th), &ch);
            best = best.min(single_user_mse(&h, &p));
        }
        let sol = solve_inner(&design, &ch, &p, &cfg).unwrap();
        let oracle = single_user_mse(&effective(&aa, &ab, &sol.ris_config, &ch), &p);
        assert!((sol.mse - oracle).abs() < 1e-12 * oracle.max(1.0));
        assert!(sol.mse <= 1.02 * best, "trial {trial}: solver {} vs grid {best}", sol.mse);
    }
}
