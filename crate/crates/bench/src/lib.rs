//! Fixtures shared by the benchmarks.

use dtl_core::{binary_to_normal, BinaryEndpointSpec, EffectConfig, NormalEffectSpec, TrialDesign};

/// Effects of the worked binary example (12% control rate).
pub fn endpoint() -> NormalEffectSpec {
    binary_to_normal(&BinaryEndpointSpec {
        p_control: 0.12,
        rd_relevant: 0.05,
        rd_uninteresting: 0.01,
    })
    .expect("fixture endpoint is valid")
}

/// Three-arm design with the boundaries and sample size of the worked example.
pub fn three_arm_design() -> TrialDesign {
    TrialDesign::new(3, 206, vec![3.47, 2.45, 2.0], 0.025, endpoint().sigma()).expect("fixture design is valid")
}

pub fn least_favorable() -> EffectConfig {
    let ep = endpoint();
    EffectConfig::least_favorable(3, 1, ep.theta_prime, ep.theta_zero)
}
