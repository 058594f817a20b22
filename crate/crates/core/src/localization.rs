//! Domain localization and IBVP coefficient functions.
//!
//! The pricing expectations solve a Cauchy problem in `(t, S, r)`. This
//! module implements the transformation chain that turns it into an
//! initial-boundary value problem on a fixed rectangle:
//!
//! 1. `y = r·e^{κt}` removes the drift of the short rate;
//! 2. truncation to `(1/s̃₁^∞, s̃₁^∞) × (−ỹ₂^∞, ỹ₂^∞)` in `(S, y)`;
//! 3. shifts `x₁ = S − 1/s̃₁^∞`, `x₂ = y + ỹ₂^∞` move the domain to
//!    `Ω = (0, x₁^∞) × (0, x₂^∞)`;
//! 4. time reversal `τ = T₁ − t` turns the terminal condition into an
//!    initial one.
//!
//! The resulting problem reads
//!
//! ```text
//! ∂_τ u − Div(A ∇u) + v·∇u + l·u = 0   in (0,T₁) × Ω,
//! u(0,·) = g                            in Ω,
//! u = f                                 on Γ₁⁻ ∪ Γ₂⁻ ∪ Γ₂⁺,
//! ∂u/∂x₁ = 0                           on Γ₁⁺,
//! ```
//!
//! and this module provides `A`, `v`, `l`, `g`, `f`, the analytic
//! derivatives of `v` needed by the characteristics corrections, and the
//! Fichera first-boundary-value classification that justifies where data is
//! imposed.

use crate::error::{Error, Result};
use crate::model::{hazard, integrated_hazard, EquityParams, MarketState, RateParams};

/// 3-point Gauss–Legendre rule on [−1, 1] (points, weights); exact through
/// degree 5, which makes the Q2 mass matrix exact on affine elements.
pub const GAUSS3: [(f64, f64); 3] = [
    (-0.7745966692414834, 0.5555555555555556),
    (0.0, 0.8888888888888888),
    (0.7745966692414834, 0.5555555555555556),
];

// ---------------------------------------------------------------------------
// Truncation and the transformed domain
// ---------------------------------------------------------------------------

/// Size of the truncated financial domain: prices in `(1/s_max, s_max)`,
/// drift-free rates `y = r·e^{κt}` in `(−y_half, y_half)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    /// Upper price truncation s̃₁^∞ (> 1); the lower truncation is its
    /// reciprocal.
    pub s_max: f64,
    /// Half-width ỹ₂^∞ of the y-domain (> 0).
    pub y_half: f64,
}

impl TruncationConfig {
    /// Validates and builds a truncation configuration.
    pub fn new(s_max: f64, y_half: f64) -> Result<Self> {
        if !(s_max.is_finite() && s_max > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation.s_max must be > 1 (got {s_max})"
            )));
        }
        if !(y_half.is_finite() && y_half > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation.y_half must be > 0 (got {y_half})"
            )));
        }
        Ok(Self { s_max, y_half })
    }

    /// Default truncation sized so the solution near `(S₀, r₀)` does not feel
    /// the artificial boundary over the given horizon:
    ///
    /// ```text
    /// s_max  = 10·max(1, S₀),
    /// y_half = (|r₀| + |θ| + 6·δ/√(2κ)) · e^{κT},
    /// ```
    ///
    /// i.e. the stationary-rate scale plus six stationary standard
    /// deviations, inflated by the y-map growth `e^{κT}`. For `κ = 0` the
    /// stationary deviation is replaced by its horizon limit `δ·√T`.
    pub fn default_for(market: &MarketState, rate: &RateParams, horizon: f64) -> Self {
        let s_max = 10.0 * market.s0.max(1.0);
        let spread = if rate.kappa > 0.0 {
            rate.delta / (2.0 * rate.kappa).sqrt()
        } else {
            rate.delta * horizon.sqrt()
        };
        let y_half =
            (market.r0.abs() + rate.theta.abs() + 6.0 * spread) * (rate.kappa * horizon).exp();
        Self { s_max, y_half }
    }

    /// Tighter window sized from the exact distribution of `y = r·e^{κt}`
    /// over `[0, T]`:
    ///
    /// ```text
    /// y_half = |r₀|·e^{κT} + |θ|·(e^{κT} − 1) + 6·δ·√((e^{2κT} − 1)/(2κ)),
    /// ```
    ///
    /// i.e. the terminal mean scale plus six terminal standard deviations of
    /// `y` (for `κ = 0` the deviation degenerates to `δ·√T`). Compared to
    /// [`TruncationConfig::default_for`] this avoids inflating the
    /// stationary terms by `e^{κT}`, roughly halving the window at long
    /// horizons — and with it the mesh width — while keeping the boundary
    /// ≥ 6σ away from the spot. Used where resolution matters more than
    /// headroom, e.g. the zero-coupon validation curve.
    pub fn containment_for(market: &MarketState, rate: &RateParams, horizon: f64) -> Self {
        let s_max = 10.0 * market.s0.max(1.0);
        let growth = (rate.kappa * horizon).exp();
        let spread = if rate.kappa > 0.0 {
            rate.delta * ((growth * growth - 1.0) / (2.0 * rate.kappa)).sqrt()
        } else {
            rate.delta * horizon.sqrt()
        };
        let y_half = market.r0.abs() * growth + rate.theta.abs() * (growth - 1.0) + 6.0 * spread;
        Self { s_max, y_half }
    }
}

/// Which Cauchy problem is being localized: `u₁ = E[e^{−∫(r+λ)}]`
/// (terminal payoff `h ≡ 1`) or `u₂ = E[e^{−∫(r+λ)}·r]` (terminal payoff
/// `h = r_{T₁} = e^{−κT₁}·y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Survival-discount factor; initial datum `g ≡ 1`.
    U1,
    /// Rate-weighted discount factor; initial datum `g = e^{−κT₁}(x₂ − ỹ₂^∞)`.
    U2,
}

/// The truncated computational rectangle for one maturity, bundling the
/// model parameters with the coordinate maps and every IBVP coefficient.
///
/// Reversed time `τ ∈ [0, T₁]` corresponds to physical time `t = T₁ − τ`.
#[derive(Debug, Clone, Copy)]
pub struct TransformedDomain {
    /// Equity/credit parameters (enter diffusion, velocity, reaction).
    pub equity: EquityParams,
    /// Short-rate parameters.
    pub rate: RateParams,
    /// Market state (used for validation and point evaluation).
    pub market: MarketState,
    /// Domain truncation.
    pub trunc: TruncationConfig,
    /// Maturity T₁ of the localized problem (years).
    pub t1: f64,
    /// Width of the price axis: `x₁^∞ = s_max − 1/s_max`.
    pub x1_max: f64,
    /// Width of the rate axis: `x₂^∞ = 2·y_half`.
    pub x2_max: f64,
}

impl TransformedDomain {
    /// Builds the domain, checking that the spot state stays strictly inside
    /// the truncated rectangle for every `t ∈ [0, T₁]`.
    pub fn new(
        equity: EquityParams,
        rate: RateParams,
        market: MarketState,
        trunc: TruncationConfig,
        t1: f64,
    ) -> Result<Self> {
        if !(t1.is_finite() && t1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maturity T1 must be > 0 (got {t1})"
            )));
        }
        equity.validate_horizon(t1)?;
        if !(trunc.s_max > market.s0.max(1.0)) {
            return Err(Error::InvalidParameter(format!(
                "truncation.s_max must exceed max(1, S0) (got {} with S0 = {})",
                trunc.s_max, market.s0
            )));
        }
        if market.s0 <= 1.0 / trunc.s_max {
            return Err(Error::InvalidParameter(format!(
                "S0 = {} does not exceed the lower truncation 1/s_max = {}",
                market.s0,
                1.0 / trunc.s_max
            )));
        }
        // |r₀·e^{κt}| grows monotonically in t, so the endpoint check covers
        // the whole horizon.
        let y_image = market.r0.abs() * (rate.kappa * t1).exp();
        if y_image >= trunc.y_half {
            return Err(Error::InvalidParameter(format!(
                "image of r0 under the y-map leaves (−y_half, y_half): |r0|·e^{{κT1}} = {y_image} ≥ {}",
                trunc.y_half
            )));
        }
        Ok(Self {
            equity,
            rate,
            market,
            trunc,
            t1,
            x1_max: trunc.s_max - 1.0 / trunc.s_max,
            x2_max: 2.0 * trunc.y_half,
        })
    }

    // -- coordinate maps ----------------------------------------------------

    /// Stock price `S = x₁ + 1/s_max` for a computational abscissa.
    #[inline]
    pub fn price_of(&self, x1: f64) -> f64 {
        x1 + 1.0 / self.trunc.s_max
    }

    /// Short rate `r = (x₂ − y_half)·e^{−κt}` at physical time `t`.
    #[inline]
    pub fn rate_of(&self, x2: f64, t: f64) -> f64 {
        (x2 - self.trunc.y_half) * (-self.rate.kappa * t).exp()
    }

    /// Maps financial coordinates `(S, r)` at physical time `t` into the
    /// computational rectangle; errors if the image leaves the closed
    /// rectangle.
    pub fn to_computational(&self, s: f64, r: f64, t: f64) -> Result<[f64; 2]> {
        let x1 = s - 1.0 / self.trunc.s_max;
        let x2 = r * (self.rate.kappa * t).exp() + self.trunc.y_half;
        let tol = 1e-12 * self.x1_max.max(self.x2_max).max(1.0);
        if x1 < -tol || x1 > self.x1_max + tol || x2 < -tol || x2 > self.x2_max + tol {
            return Err(Error::OutOfDomain(format!(
                "(S, r, t) = ({s}, {r}, {t}) maps to ({x1}, {x2}) outside [0, {}] × [0, {}]",
                self.x1_max, self.x2_max
            )));
        }
        Ok([x1.clamp(0.0, self.x1_max), x2.clamp(0.0, self.x2_max)])
    }

    /// Inverse of [`TransformedDomain::to_computational`].
    #[inline]
    pub fn from_computational(&self, x1: f64, x2: f64, t: f64) -> (f64, f64) {
        (self.price_of(x1), self.rate_of(x2, t))
    }

    // -- IBVP coefficients (reversed time τ = T₁ − t) -------------------------

    /// Diffusion matrix `A(τ, x₁)`:
    ///
    /// ```text
    /// A₁₁ = ½·a(t)²·s^{2β+2},   A₁₂ = ½·ρδ·a(t)·s^{β+1}·e^{κt},
    /// A₂₂ = ½·δ²·e^{2κt},        with t = T₁ − τ, s = x₁ + 1/s_max.
    /// ```
    ///
    /// Symmetric positive semi-definite; strictly definite when |ρ| < 1 and
    /// `a(t), δ > 0`.
    #[inline]
    pub fn diffusion(&self, tau: f64, x1: f64) -> SymMatrix2 {
        let t = self.t1 - tau;
        let s = self.price_of(x1);
        let a = self.equity.vol_scale(t);
        let ekt = (self.rate.kappa * t).exp();
        let d = self.rate.delta;
        SymMatrix2 {
            a11: 0.5 * a * a * s.powf(2.0 * self.equity.beta + 2.0),
            a12: 0.5 * self.market.rho * d * a * s.powf(self.equity.beta + 1.0) * ekt,
            a22: 0.5 * d * d * ekt * ekt,
        }
    }

    /// Divergence-form velocity field `v(τ, x)`:
    ///
    /// ```text
    /// v₁ = ½a²(2β+2)s^{2β+1} − (e^{−κt}(x₂ − y_half) + λ(t,s))·s,
    /// v₂ = ½ρδa(β+1)s^β e^{κt} − κθ e^{κt}.
    /// ```
    #[inline]
    pub fn velocity(&self, tau: f64, x1: f64, x2: f64) -> [f64; 2] {
        let t = self.t1 - tau;
        let s = self.price_of(x1);
        let a = self.equity.vol_scale(t);
        let beta = self.equity.beta;
        let ekt = (self.rate.kappa * t).exp();
        let rate_term = (x2 - self.trunc.y_half) / ekt;
        let v1 = 0.5 * a * a * (2.0 * beta + 2.0) * s.powf(2.0 * beta + 1.0)
            - (rate_term + hazard(t, s, &self.equity)) * s;
        let v2 = 0.5 * self.market.rho * self.rate.delta * a * (beta + 1.0) * s.powf(beta) * ekt
            - self.rate.kappa * self.rate.theta * ekt;
        [v1, v2]
    }

    /// Analytic Jacobian `L = ∇v` with `L[i][j] = ∂vᵢ/∂xⱼ`:
    ///
    /// ```text
    /// ∂v₁/∂x₁ = ½a²(2β+2)(2β+1)s^{2β} − e^{−κt}(x₂−y_half) − λ(t,s) − 2βc·a²·s^{2β},
    /// ∂v₁/∂x₂ = −e^{−κt}·s,
    /// ∂v₂/∂x₁ = ½ρδa(β+1)β·s^{β−1}·e^{κt},
    /// ∂v₂/∂x₂ = 0.
    /// ```
    #[inline]
    pub fn velocity_jacobian(&self, tau: f64, x1: f64, x2: f64) -> [[f64; 2]; 2] {
        let t = self.t1 - tau;
        let s = self.price_of(x1);
        let a = self.equity.vol_scale(t);
        let beta = self.equity.beta;
        let emkt = (-self.rate.kappa * t).exp();
        let s2b = s.powf(2.0 * beta);
        let dv1_dx1 = 0.5 * a * a * (2.0 * beta + 2.0) * (2.0 * beta + 1.0) * s2b
            - emkt * (x2 - self.trunc.y_half)
            - hazard(t, s, &self.equity)
            - 2.0 * beta * self.equity.c * a * a * s2b;
        let dv1_dx2 = -emkt * s;
        let dv2_dx1 = 0.5
            * self.market.rho
            * self.rate.delta
            * a
            * (beta + 1.0)
            * beta
            * s.powf(beta - 1.0)
            / emkt;
        [[dv1_dx1, dv1_dx2], [dv2_dx1, 0.0]]
    }

    /// Analytic gradient of the velocity divergence, `∇(Div v)`:
    ///
    /// ```text
    /// ∂₁(Div v) = 2β(2β+1)(β+1−c)·a²·s^{2β−1},
    /// ∂₂(Div v) = −e^{−κt}.
    /// ```
    ///
    /// (`Div v = ∂₁v₁` since `v₂` does not depend on `x`.)
    #[inline]
    pub fn grad_div_velocity(&self, tau: f64, x1: f64, _x2: f64) -> [f64; 2] {
        let t = self.t1 - tau;
        let s = self.price_of(x1);
        let a = self.equity.vol_scale(t);
        let beta = self.equity.beta;
        let g1 = 2.0
            * beta
            * (2.0 * beta + 1.0)
            * (beta + 1.0 - self.equity.c)
            * a
            * a
            * s.powf(2.0 * beta - 1.0);
        [g1, -(-self.rate.kappa * t).exp()]
    }

    /// Reaction coefficient `l(τ, x) = e^{−κt}(x₂ − y_half) + λ(t, s)`,
    /// i.e. the short rate plus the default intensity.
    #[inline]
    pub fn reaction(&self, tau: f64, x1: f64, x2: f64) -> f64 {
        let t = self.t1 - tau;
        let s = self.price_of(x1);
        (x2 - self.trunc.y_half) * (-self.rate.kappa * t).exp() + hazard(t, s, &self.equity)
    }

    /// Initial datum `g` at τ = 0 (physical maturity): `1` for `u₁`,
    /// the terminal rate `e^{−κT₁}(x₂ − y_half)` for `u₂`.
    #[inline]
    pub fn initial_data(&self, kind: ProblemKind, _x1: f64, x2: f64) -> f64 {
        match kind {
            ProblemKind::U1 => 1.0,
            ProblemKind::U2 => {
                (-self.rate.kappa * self.t1).exp() * (x2 - self.trunc.y_half)
            }
        }
    }

    /// Dirichlet datum on `Γ₁⁻ ∪ Γ₂⁻ ∪ Γ₂⁺`: the frozen-coefficient
    /// semigroup applied to `g`,
    ///
    /// ```text
    /// f(τ, x) = exp(−[(x₂ − y_half)·∫_t^{T₁} e^{−κu} du
    ///               + ∫_t^{T₁} λ(u, s) du])·g(x),   t = T₁ − τ,
    /// ```
    ///
    /// with both integrals in closed form (series fallback for κ < 1e-8
    /// keeps the rate integral well-defined through κ = 0).
    #[inline]
    pub fn dirichlet_data(&self, kind: ProblemKind, tau: f64, x1: f64, x2: f64) -> f64 {
        let t = self.t1 - tau;
        let s = self.price_of(x1);
        let rate_integral = (x2 - self.trunc.y_half) * decay_integral(self.rate.kappa, t, self.t1);
        let haz = integrated_hazard(t, self.t1, s, &self.equity);
        (-(rate_integral + haz)).exp() * self.initial_data(kind, x1, x2)
    }

    /// Fichera classification of the six faces of the space-time box; see
    /// [`fichera_classify`].
    pub fn fichera_classify(&self, t: f64) -> Result<FicheraClassification> {
        fichera_classify(self, t)
    }
}

/// `∫_t^{t1} e^{−κu} du`, closed form `(e^{−κt} − e^{−κt1})/κ` with a series
/// fallback `Δ·e^{−κt}·(1 − κΔ/2 + (κΔ)²/6)` for |κ| < 1e-8 (Δ = t1 − t).
#[inline]
pub fn decay_integral(kappa: f64, t: f64, t1: f64) -> f64 {
    let d = t1 - t;
    if kappa.abs() < 1e-8 {
        let kd = kappa * d;
        d * (-kappa * t).exp() * (1.0 - kd / 2.0 + kd * kd / 6.0)
    } else {
        ((-kappa * t).exp() - (-kappa * t1).exp()) / kappa
    }
}

/// Symmetric 2×2 matrix stored by its three distinct entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix2 {
    /// Upper-left entry.
    pub a11: f64,
    /// Off-diagonal entry (A₁₂ = A₂₁).
    pub a12: f64,
    /// Lower-right entry.
    pub a22: f64,
}

impl SymMatrix2 {
    /// Matrix-vector product.
    #[inline]
    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a12 * v[0] + self.a22 * v[1],
        ]
    }

    /// Determinant (≥ 0 exactly when the matrix is PSD, given a11 ≥ 0).
    #[inline]
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }
}

// ---------------------------------------------------------------------------
// Fichera boundary classification
// ---------------------------------------------------------------------------

/// The six faces of the space-time box `(0,T₁) × (0,x₁^∞) × (0,x₂^∞)` in the
/// original (non-reversed) time variable `x₀ = t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    /// `t = 0`.
    T0Minus,
    /// `t = T₁` (the terminal face; data required here becomes the initial
    /// condition after time reversal).
    T0Plus,
    /// `x₁ = 0` (price at the lower truncation `1/s_max`).
    X1Minus,
    /// `x₁ = x₁^∞` (price at the upper truncation).
    X1Plus,
    /// `x₂ = 0` (drift-free rate at `−y_half`).
    X2Minus,
    /// `x₂ = x₂^∞` (drift-free rate at `+y_half`).
    X2Plus,
}

impl Face {
    /// All six faces in a fixed reporting order.
    pub const ALL: [Face; 6] = [
        Face::T0Minus,
        Face::T0Plus,
        Face::X1Minus,
        Face::X1Plus,
        Face::X2Minus,
        Face::X2Plus,
    ];

    /// Human-readable face label.
    pub fn label(&self) -> &'static str {
        match self {
            Face::T0Minus => "Γ̃₀⁻",
            Face::T0Plus => "Γ̃₀⁺",
            Face::X1Minus => "Γ̃₁⁻",
            Face::X1Plus => "Γ̃₁⁺",
            Face::X2Minus => "Γ̃₂⁻",
            Face::X2Plus => "Γ̃₂⁺",
        }
    }

    /// Inward-pointing unit normal `m = (m₀, m₁, m₂)`.
    fn inward_normal(&self) -> [f64; 3] {
        match self {
            Face::T0Minus => [1.0, 0.0, 0.0],
            Face::T0Plus => [-1.0, 0.0, 0.0],
            Face::X1Minus => [0.0, 1.0, 0.0],
            Face::X1Plus => [0.0, -1.0, 0.0],
            Face::X2Minus => [0.0, 0.0, 1.0],
            Face::X2Plus => [0.0, 0.0, -1.0],
        }
    }
}

/// Classification report for a single face.
#[derive(Debug, Clone, Copy)]
pub struct FaceReport {
    /// Which face.
    pub face: Face,
    /// True when the normal-normal diffusion `mᵀBm` is positive on the face
    /// (face belongs to Σ¹ = Γ̃ ∖ Σ⁰).
    pub in_sigma1: bool,
    /// True when the face is degenerate (Σ⁰) and the Fichera sum
    /// `Σᵢ(bᵢ − Σⱼ∂ⱼb_ij)mᵢ` is negative (face belongs to Σ²).
    pub in_sigma2: bool,
    /// Boundary data must be supplied exactly on Σ¹ ∪ Σ².
    pub needs_data: bool,
    /// Largest sampled `mᵀBm` (diagnostic).
    pub normal_diffusion_max: f64,
    /// Sampled range of the Fichera sum (diagnostic).
    pub fichera_min: f64,
    /// See [`FaceReport::fichera_min`].
    pub fichera_max: f64,
}

/// Full classification of the six faces.
#[derive(Debug, Clone)]
pub struct FicheraClassification {
    /// Reports in the order of [`Face::ALL`].
    pub faces: [FaceReport; 6],
}

impl FicheraClassification {
    /// Faces in Σ¹ (non-degenerate normal diffusion).
    pub fn sigma1(&self) -> Vec<Face> {
        self.faces
            .iter()
            .filter(|f| f.in_sigma1)
            .map(|f| f.face)
            .collect()
    }

    /// Faces in Σ² (degenerate with negative Fichera sum).
    pub fn sigma2(&self) -> Vec<Face> {
        self.faces
            .iter()
            .filter(|f| f.in_sigma2)
            .map(|f| f.face)
            .collect()
    }

    /// Whether the given face requires boundary data (Σ¹ ∪ Σ²).
    pub fn needs_data(&self, face: Face) -> bool {
        self.faces
            .iter()
            .find(|f| f.face == face)
            .map(|f| f.needs_data)
            .unwrap_or(false)
    }
}

/// Absolute tolerance for the `mᵀBm = 0` degeneracy test and for calling a
/// Fichera sum "zero".
const FICHERA_TOL: f64 = 1e-12;

/// Classifies the six faces of the space-time box into Σ⁰/Σ¹/Σ², sampling
/// each face at 3-point Gauss abscissae of its spatial coordinate(s) with
/// side-face coefficients frozen at physical time `t` (probe several `t` to
/// scan the whole cylinder; for this operator the result is t-independent
/// unless the model is degenerate in a sign-changing way).
///
/// The classification is computed generically from the second-order
/// coefficient matrix `B` and the first-order coefficients `b` of the
/// operator in original time — not hard-coded — so sign errors in the
/// coefficient functions surface here.
///
/// Errors with [`Error::InconclusiveFichera`] when the degeneracy or sign
/// pattern changes across a single face.
pub fn fichera_classify(d: &TransformedDomain, t: f64) -> Result<FicheraClassification> {
    if !(0.0..=d.t1).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "fichera_classify: t = {t} outside [0, {}]",
            d.t1
        )));
    }

    let mut reports = Vec::with_capacity(6);
    for face in Face::ALL {
        let m = face.inward_normal();
        // Sample points on the face: Gauss abscissae per free spatial axis;
        // time faces use their own time, side faces the probe time.
        let mut samples: Vec<(f64, f64, f64)> = Vec::new(); // (t, x1, x2)
        let map = |g: f64, len: f64| 0.5 * (g + 1.0) * len;
        match face {
            Face::T0Minus | Face::T0Plus => {
                let tf = if face == Face::T0Minus { 0.0 } else { d.t1 };
                for (gx, _) in GAUSS3 {
                    for (gy, _) in GAUSS3 {
                        samples.push((tf, map(gx, d.x1_max), map(gy, d.x2_max)));
                    }
                }
            }
            Face::X1Minus | Face::X1Plus => {
                let x1 = if face == Face::X1Minus { 0.0 } else { d.x1_max };
                for (gy, _) in GAUSS3 {
                    samples.push((t, x1, map(gy, d.x2_max)));
                }
            }
            Face::X2Minus | Face::X2Plus => {
                let x2 = if face == Face::X2Minus { 0.0 } else { d.x2_max };
                for (gx, _) in GAUSS3 {
                    samples.push((t, map(gx, d.x1_max), x2));
                }
            }
        }

        let mut diff_min = f64::INFINITY;
        let mut diff_max = f64::NEG_INFINITY;
        let mut fich_min = f64::INFINITY;
        let mut fich_max = f64::NEG_INFINITY;
        for &(ts, x1, x2) in &samples {
            let tau = d.t1 - ts;
            // Spatial block of B in original time equals the reversed-time
            // diffusion matrix evaluated at τ = T₁ − t; the first row/column
            // of B vanish identically.
            let a = d.diffusion(tau, x1);
            let mt_b_m = a.a11 * m[1] * m[1]
                + 2.0 * a.a12 * m[1] * m[2]
                + a.a22 * m[2] * m[2];
            // Fichera sum Σᵢ(bᵢ − Σⱼ∂ⱼb_ij)mᵢ. In original time the
            // corrected first-order coefficients are (1, −v₁, −v₂) with v
            // evaluated at τ = T₁ − t, because v = Div(A) − b.
            let v = d.velocity(tau, x1, x2);
            let fichera = m[0] - v[0] * m[1] - v[1] * m[2];
            diff_min = diff_min.min(mt_b_m);
            diff_max = diff_max.max(mt_b_m);
            fich_min = fich_min.min(fichera);
            fich_max = fich_max.max(fichera);
        }

        let degenerate_all = diff_max.abs() <= FICHERA_TOL;
        let nondegenerate_all = diff_min > FICHERA_TOL;
        if !degenerate_all && !nondegenerate_all {
            return Err(Error::InconclusiveFichera {
                face: face.label(),
                min: diff_min,
                max: diff_max,
            });
        }
        let in_sigma1 = nondegenerate_all;
        let in_sigma2 = if degenerate_all {
            if fich_max < -FICHERA_TOL {
                true
            } else if fich_min > -FICHERA_TOL {
                false
            } else {
                return Err(Error::InconclusiveFichera {
                    face: face.label(),
                    min: fich_min,
                    max: fich_max,
                });
            }
        } else {
            false
        };
        reports.push(FaceReport {
            face,
            in_sigma1,
            in_sigma2,
            needs_data: in_sigma1 || in_sigma2,
            normal_diffusion_max: diff_max,
            fichera_min: fich_min,
            fichera_max: fich_max,
        });
    }

    Ok(FicheraClassification {
        faces: reports.try_into().expect("six faces"),
    })
}
