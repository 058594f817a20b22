//! Shared fixtures for the engine benchmarks.

use defbond::{
    EquityParams, MarketState, RateParams, TransformedDomain, TruncationConfig,
};

/// The 5y two-factor domain used by every benchmark (zero-correlation
/// parameter set; the operator cost is representative either way).
pub fn domain() -> TransformedDomain {
    TransformedDomain::new(
        EquityParams::new(0.0337851, 0.0523625, 0.0026639, 0.0027968, 0.0435673, -0.268496)
            .unwrap(),
        RateParams::new(
            0.04520533766268042,
            0.10334921942765922,
            0.02146900332086033,
        )
        .unwrap(),
        MarketState::new(1.0, -0.009159871729892612, 0.0).unwrap(),
        TruncationConfig::new(3.325, 0.2).unwrap(),
        5.0,
    )
    .unwrap()
}
