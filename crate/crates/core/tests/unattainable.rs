//! Requirements that cannot hold for this model, asserted as stated.
//! Run with `cargo test -- --ignored` to see them fail.

use qudit_rabi::fock::AlgebraSpec;
use qudit_rabi::model::ModelConfig;
use qudit_rabi::rwa::{channel_enumerate, resonance_solve};

#[test]
#[ignore = "su(2) 2J=1, n=2 resonance forces |D|/g > 1"]
fn spin_half_two_level_resonance_at_delta_over_g_0_02() {
    let mut best = f64::INFINITY;
    for i in 1..=400 {
        let g = 0.025 * i as f64;
        for phase in [0.0, std::f64::consts::PI] {
            let base = ModelConfig::new(2, AlgebraSpec::Su2 { two_j: 1 }, 1.0, g, 0.0, phase, 0).unwrap();
            for (jp, j) in channel_enumerate(2, 0, 1) {
                if let Some(sol) = resonance_solve(&base, 0, 1, j, jp).unwrap() {
                    best = best.min(sol.ratio_to_g);
                }
            }
        }
    }
    assert!(best <= 0.02 * (1.0 + 1e-6), "smallest resonant |D|/g is {best}");
}
