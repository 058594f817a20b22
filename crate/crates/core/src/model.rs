//! Model parameters and closed-form scalar functions.
//!
//! The equity leg follows a jump-to-default CEV specification: the stock has
//! local volatility `σ(t,S) = a(t)·S^β` with `β < 0`, and defaults at the
//! first jump of a counting process whose intensity is affine in the
//! instantaneous variance,
//!
//! ```text
//! λ(t,S) = b(t) + c·σ(t,S)² = b(t) + c·a(t)²·S^{2β},
//! ```
//!
//! with time-linear coefficients `a(t) = a1·t + a2` and `b(t) = b1·t + b2`.
//! The short rate follows a Vasicek (Ornstein–Uhlenbeck) process
//! `dr = κ(θ − r)dt + δ dW¹`, which admits negative rates.
//!
//! Everything in this module is a pure function of immutable value types;
//! all time arithmetic is in year fractions (no calendar logic).

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Parameter types
// ---------------------------------------------------------------------------

/// Vasicek short-rate parameters: `dr = κ(θ − r)dt + δ dW¹`.
///
/// `κ = 0` or `δ = 0` are accepted so oracle/degenerate test modes can be
/// expressed (deterministic rates, no mean reversion); the full pricing model
/// expects both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    /// Mean-reversion speed κ (1/years), ≥ 0.
    pub kappa: f64,
    /// Long-term mean rate θ (1/year).
    pub theta: f64,
    /// Rate volatility δ (1/year^{1/2}), ≥ 0.
    pub delta: f64,
}

impl RateParams {
    /// Validates and builds rate parameters.
    pub fn new(kappa: f64, theta: f64, delta: f64) -> Result<Self> {
        if !(kappa.is_finite() && theta.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidParameter(
                "rate parameters must be finite".into(),
            ));
        }
        if kappa < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rate.kappa must be ≥ 0 (got {kappa})"
            )));
        }
        if delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rate.delta must be ≥ 0 (got {delta})"
            )));
        }
        Ok(Self {
            kappa,
            theta,
            delta,
        })
    }
}

/// Equity/credit parameters of the defaultable stock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquityParams {
    /// Slope of the volatility scale `a(t) = a1·t + a2`.
    pub a1: f64,
    /// Intercept of the volatility scale, ≥ 0 (`a2 = 0` only in degenerate
    /// diffusion-free test modes).
    pub a2: f64,
    /// Slope of the hazard base `b(t) = b1·t + b2`.
    pub b1: f64,
    /// Intercept of the hazard base, ≥ 0.
    pub b2: f64,
    /// Hazard sensitivity to instantaneous variance, ≥ 0.
    pub c: f64,
    /// CEV elasticity β, strictly negative.
    pub beta: f64,
}

impl EquityParams {
    /// Validates and builds equity parameters.
    ///
    /// `a(t) > 0` and `b(t) ≥ 0` over a pricing horizon depend on the horizon
    /// and are checked separately by [`EquityParams::validate_horizon`].
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64, c: f64, beta: f64) -> Result<Self> {
        for (name, v) in [
            ("a1", a1),
            ("a2", a2),
            ("b1", b1),
            ("b2", b2),
            ("c", c),
            ("beta", beta),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "equity.{name} must be finite (got {v})"
                )));
            }
        }
        if a2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "equity.a2 must be ≥ 0 (got {a2})"
            )));
        }
        if b2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "equity.b2 must be ≥ 0 (got {b2})"
            )));
        }
        if c < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "equity.c must be ≥ 0 (got {c})"
            )));
        }
        if !(beta < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "equity.beta must be < 0 (got {beta})"
            )));
        }
        Ok(Self {
            a1,
            a2,
            b1,
            b2,
            c,
            beta,
        })
    }

    /// Checks `a(t) ≥ 0` and `b(t) ≥ 0` for every `t ∈ [0, horizon]`.
    ///
    /// Both are linear in `t`, so checking the endpoints suffices. A zero
    /// volatility scale is tolerated (degenerate test modes); negative values
    /// are not.
    pub fn validate_horizon(&self, horizon: f64) -> Result<()> {
        if !(horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be ≥ 0 (got {horizon})"
            )));
        }
        for t in [0.0, horizon] {
            if self.vol_scale(t) < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "equity: a(t) = a1·t + a2 is negative at t = {t}"
                )));
            }
            if self.hazard_base(t) < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "equity: b(t) = b1·t + b2 is negative at t = {t}"
                )));
            }
        }
        Ok(())
    }

    /// Volatility scale `a(t) = a1·t + a2`.
    #[inline]
    pub fn vol_scale(&self, t: f64) -> f64 {
        self.a1 * t + self.a2
    }

    /// Hazard base `b(t) = b1·t + b2`.
    #[inline]
    pub fn hazard_base(&self, t: f64) -> f64 {
        self.b1 * t + self.b2
    }
}

/// Observed market state: spot stock price, spot short rate, and the
/// correlation between the rate and stock Wiener processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    /// Spot stock price S₀ > 0.
    pub s0: f64,
    /// Spot short rate r₀ (may be negative).
    pub r0: f64,
    /// Wiener correlation ρ, |ρ| < 1.
    pub rho: f64,
}

impl MarketState {
    /// Validates and builds the market state.
    pub fn new(s0: f64, r0: f64, rho: f64) -> Result<Self> {
        if !(s0.is_finite() && r0.is_finite() && rho.is_finite()) {
            return Err(Error::InvalidParameter(
                "market state must be finite".into(),
            ));
        }
        if !(s0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "market.s0 must be > 0 (got {s0})"
            )));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "market.rho must satisfy |rho| < 1 (got {rho})"
            )));
        }
        Ok(Self { s0, r0, rho })
    }
}

/// Contract terms of a non-callable defaultable coupon bond.
#[derive(Debug, Clone, PartialEq)]
pub struct BondSpec {
    /// Face value FV > 0, paid at maturity.
    pub face_value: f64,
    /// Coupon dates `t₁ < … < t_M = T` in years; the last one is maturity.
    pub coupon_dates: Vec<f64>,
    /// Coupon amounts as fractions of face value, aligned with
    /// `coupon_dates`. Stored as fractions (0.0125, not "1.25 basis
    /// points"): the quoted bond prices near par are only consistent with
    /// percentage coupon rates, so "basis points" in the source data is read
    /// as "percent".
    pub coupon_amounts: Vec<f64>,
    /// Recovery rate η ∈ [0, 1], received on the face value at default.
    pub recovery: f64,
}

impl BondSpec {
    /// Validates and builds a bond specification.
    pub fn new(
        face_value: f64,
        coupon_dates: Vec<f64>,
        coupon_amounts: Vec<f64>,
        recovery: f64,
    ) -> Result<Self> {
        if !(face_value.is_finite() && face_value > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bond.face_value must be > 0 (got {face_value})"
            )));
        }
        if coupon_dates.is_empty() {
            return Err(Error::InvalidParameter(
                "bond.coupon_dates must be non-empty (the last date is the maturity)".into(),
            ));
        }
        if coupon_dates.len() != coupon_amounts.len() {
            return Err(Error::InvalidParameter(format!(
                "bond.coupon_amounts length ({}) must match bond.coupon_dates length ({})",
                coupon_amounts.len(),
                coupon_dates.len()
            )));
        }
        let mut prev = 0.0;
        for &t in &coupon_dates {
            if !(t.is_finite() && t > prev) {
                return Err(Error::InvalidParameter(format!(
                    "bond.coupon_dates must be strictly increasing and positive (offending date {t})"
                )));
            }
            prev = t;
        }
        for &cp in &coupon_amounts {
            if !cp.is_finite() {
                return Err(Error::InvalidParameter(
                    "bond.coupon_amounts must be finite".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&recovery) {
            return Err(Error::InvalidParameter(format!(
                "bond.recovery must lie in [0, 1] (got {recovery})"
            )));
        }
        Ok(Self {
            face_value,
            coupon_dates,
            coupon_amounts,
            recovery,
        })
    }

    /// Maturity T = last coupon date.
    #[inline]
    pub fn maturity(&self) -> f64 {
        *self.coupon_dates.last().expect("validated non-empty")
    }

    /// Number of coupons M (also the trapezoid interval count).
    #[inline]
    pub fn coupon_count(&self) -> usize {
        self.coupon_dates.len()
    }
}

// ---------------------------------------------------------------------------
// Closed-form scalar functions
// ---------------------------------------------------------------------------

/// Local volatility `σ(t,S) = a(t)·S^β`, strictly positive for `a(t) > 0`.
///
/// # Panics
/// Panics if `S ≤ 0` (the CEV power law is undefined there; mesh and path
/// construction keep prices strictly positive).
#[inline]
pub fn volatility(t: f64, s: f64, p: &EquityParams) -> f64 {
    assert!(s > 0.0, "volatility: S must be > 0 (got {s})");
    p.vol_scale(t) * s.powf(p.beta)
}

/// Default intensity `λ(t,S) = b(t) + c·a(t)²·S^{2β} ≥ b(t)`.
///
/// # Panics
/// Panics if `S ≤ 0`.
#[inline]
pub fn hazard(t: f64, s: f64, p: &EquityParams) -> f64 {
    assert!(s > 0.0, "hazard: S must be > 0 (got {s})");
    let a = p.vol_scale(t);
    p.hazard_base(t) + p.c * a * a * s.powf(2.0 * p.beta)
}

/// Time integral of the hazard at frozen stock level,
/// `∫_{t1}^{t2} λ(u, S) du`, via the exact polynomial antiderivative.
///
/// `b(u)` is linear and `c·a(u)²` quadratic in `u`, so
///
/// ```text
/// ∫ λ = b1·(t2²−t1²)/2 + b2·(t2−t1)
///     + c·S^{2β}·[ a1²·(t2³−t1³)/3 + a1·a2·(t2²−t1²) + a2²·(t2−t1) ].
/// ```
///
/// # Panics
/// Panics if `t2 < t1` or `S ≤ 0`.
#[inline]
pub fn integrated_hazard(t1: f64, t2: f64, s: f64, p: &EquityParams) -> f64 {
    assert!(t2 >= t1, "integrated_hazard: t2 must be ≥ t1 ({t2} < {t1})");
    assert!(s > 0.0, "integrated_hazard: S must be > 0 (got {s})");
    let d1 = t2 - t1;
    let d2 = t2 * t2 - t1 * t1;
    let d3 = t2 * t2 * t2 - t1 * t1 * t1;
    let base = p.b1 * d2 / 2.0 + p.b2 * d1;
    let var = p.a1 * p.a1 * d3 / 3.0 + p.a1 * p.a2 * d2 + p.a2 * p.a2 * d1;
    base + p.c * s.powf(2.0 * p.beta) * var
}

/// Analytic Vasicek zero-coupon bond price `P(r, τ) = exp(A(τ) − B(τ)·r)`
/// with
///
/// ```text
/// B(τ) = (1 − e^{−κτ})/κ,
/// A(τ) = (θ − δ²/(2κ²))·(B(τ) − τ) − δ²·B(τ)²/(4κ).
/// ```
///
/// Used as the analytic validation oracle for the rates-only problem.
///
/// # Panics
/// Panics if `τ < 0` or `κ ≤ 0` (the affine formula above assumes mean
/// reversion; degenerate κ = 0 cases are handled by their own closed forms in
/// tests).
#[inline]
pub fn vasicek_zcb(r: f64, tau: f64, p: &RateParams) -> f64 {
    assert!(tau >= 0.0, "vasicek_zcb: tau must be ≥ 0 (got {tau})");
    assert!(p.kappa > 0.0, "vasicek_zcb: kappa must be > 0 (got {})", p.kappa);
    let k = p.kappa;
    let b = (-(-k * tau).exp_m1()) / k;
    let a = (p.theta - p.delta * p.delta / (2.0 * k * k)) * (b - tau)
        - p.delta * p.delta * b * b / (4.0 * k);
    (a - b * r).exp()
}
