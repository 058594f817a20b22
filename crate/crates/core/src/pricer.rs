//! Bond-price orchestration: per-date PDE solves, the composite trapezoidal
//! rule, and the final bond-value formula.
//!
//! The price of a non-callable defaultable coupon bond is
//!
//! ```text
//! V(0,S₀,r₀;T) = FV·[ Σᵢ cpᵢ·u₁(0,S₀,r₀;tᵢ) + u₁(0,S₀,r₀;T)
//!                     + η·(1 − u₁(0,S₀,r₀;T) − ∫₀ᵀ u₂(0,S₀,r₀;τ₁)dτ₁) ],
//! ```
//!
//! which requires one `u₁` solve per coupon date and one `u₂` solve per
//! interior point of the trapezoid grid `kⱼ = j·T/M` (with `u₂(·;0) = r₀`
//! free of charge) — 2M independent initial-boundary value problems that are
//! dispatched concurrently.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{FemMesh, FieldVector, LinearSolver};
use crate::localization::{ProblemKind, TransformedDomain, TruncationConfig};
use crate::model::{vasicek_zcb, BondSpec, EquityParams, MarketState, RateParams};
use crate::semilag::{solve_ibvp, Solution, TimeGrid};

/// Everything a PDE price needs besides the instrument: model, market, and
/// discretization choices.
#[derive(Debug, Clone)]
pub struct PricerConfig {
    /// Equity/credit parameters.
    pub equity: EquityParams,
    /// Short-rate parameters.
    pub rate: RateParams,
    /// Market state.
    pub market: MarketState,
    /// Elements per axis ("Mesh n" = n×n elements).
    pub mesh: usize,
    /// Time-step density (steps per year of reversed time).
    pub steps_per_year: u32,
    /// Linear solver for the implicit systems.
    pub solver: LinearSolver,
    /// Domain truncation; `None` picks [`TruncationConfig::default_for`]
    /// with the horizon of the problem being solved (a bond uses its
    /// maturity for every sub-solve so all fields share one domain).
    pub trunc: Option<TruncationConfig>,
}

impl PricerConfig {
    /// Resolves the truncation for a given horizon.
    pub fn trunc_for(&self, horizon: f64) -> TruncationConfig {
        self.trunc
            .unwrap_or_else(|| TruncationConfig::default_for(&self.market, &self.rate, horizon))
    }

    /// Builds the localized domain for one sub-problem.
    fn domain(&self, t1: f64, trunc: TruncationConfig) -> Result<TransformedDomain> {
        TransformedDomain::new(self.equity, self.rate, self.market, trunc, t1)
    }
}

/// Runs one expectation solve to its final field.
fn solve_expectation(kind: ProblemKind, t1: f64, cfg: &PricerConfig) -> Result<Solution> {
    let d = cfg.domain(t1, cfg.trunc_for(t1))?;
    let mesh = FemMesh::build(cfg.mesh, cfg.mesh, &d)?;
    let grid = TimeGrid::per_year(t1, cfg.steps_per_year)?;
    solve_ibvp(kind, &d, mesh, &grid, &cfg.solver)
}

/// `u₁(0, S₀, r₀; T₁)`: the survival-discount factor to maturity `t1`.
pub fn price_u1(t1: f64, cfg: &PricerConfig) -> Result<f64> {
    solve_expectation(ProblemKind::U1, t1, cfg)?.value_at_spot()
}

/// `u₂(0, S₀, r₀; τ₁)`: the rate-weighted discount factor; `τ₁ = 0` returns
/// `r₀` directly without a solve.
pub fn price_u2(tau1: f64, cfg: &PricerConfig) -> Result<f64> {
    if tau1 == 0.0 {
        return Ok(cfg.market.r0);
    }
    solve_expectation(ProblemKind::U2, tau1, cfg)?.value_at_spot()
}

/// Composite trapezoidal rule over `M+1` equally spaced values:
/// `(h/2)·[v₀ + 2·Σ_{j=1}^{M−1} vⱼ + v_M]`.
pub fn trapezoid_integral(values: &[f64], h: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Size(format!(
            "trapezoid rule needs at least 2 points (got {})",
            values.len()
        )));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "trapezoid spacing must be > 0 (got {h})"
        )));
    }
    let m = values.len() - 1;
    let interior: f64 = values[1..m].iter().sum();
    Ok(0.5 * h * (values[0] + 2.0 * interior + values[m]))
}

/// Looks up a date-keyed value with an absolute tolerance of `1e-9` years
/// (≪ one second); dates come from the same arithmetic on both sides, so
/// the tolerance only absorbs rounding.
fn lookup_date(values: &[(f64, f64)], date: f64) -> Result<f64> {
    values
        .iter()
        .find(|(d, _)| (d - date).abs() <= 1e-9)
        .map(|&(_, v)| v)
        .ok_or(Error::MissingDate(date))
}

/// Assembles the bond value from solved ingredients:
///
/// ```text
/// V = FV·[ Σᵢ cpᵢ·u₁(tᵢ) + u₁(T) + η·(1 − u₁(T) − integral) ].
/// ```
///
/// `u1` maps dates to `u₁` values and must cover every coupon date
/// (maturity is the last coupon date); `integral` is `∫₀ᵀ u₂ dτ₁`.
pub fn bond_value(spec: &BondSpec, u1: &[(f64, f64)], integral: f64) -> Result<f64> {
    if !integral.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bond integral term must be finite (got {integral})"
        )));
    }
    let u1_maturity = lookup_date(u1, spec.maturity())?;
    let mut coupon_leg = 0.0;
    for (date, cp) in spec.coupon_dates.iter().zip(&spec.coupon_amounts) {
        coupon_leg += cp * lookup_date(u1, *date)?;
    }
    Ok(spec.face_value
        * (coupon_leg + u1_maturity + spec.recovery * (1.0 - u1_maturity - integral)))
}

/// Aggregate statistics across one bond's PDE solves.
#[derive(Debug, Clone, Copy)]
pub struct PricingDiagnostics {
    /// Elements per axis.
    pub mesh: usize,
    /// Time-step density.
    pub steps_per_year: u32,
    /// Truncation shared by all sub-solves.
    pub trunc: TruncationConfig,
    /// Number of IBVP solves performed.
    pub solves: usize,
    /// Interior characteristic feet traced across all solves.
    pub total_feet: usize,
    /// Interior feet clamped back onto the rectangle (domain-size monitor).
    pub clamped_feet: usize,
    /// Γ₁⁺ edge feet clamped (structural outflow, tallied separately).
    pub clamped_edge_feet: usize,
    /// Worst conjugate-gradient iteration count (0 under the direct solver).
    pub max_cg_iterations: usize,
}

/// A priced bond with its ingredients and solve statistics.
#[derive(Debug, Clone)]
pub struct PricingResult {
    /// The bond value `V(0, S₀, r₀; T)`.
    pub bond_value: f64,
    /// `(tᵢ, u₁(0,S₀,r₀;tᵢ))` per coupon date (the last is maturity).
    pub u1_values: Vec<(f64, f64)>,
    /// `(kⱼ, u₂(0,S₀,r₀;kⱼ))` on the trapezoid grid, starting with `(0, r₀)`.
    pub u2_values: Vec<(f64, f64)>,
    /// `∫₀ᵀ u₂ dτ₁`, exactly the trapezoid rule over `u2_values`.
    pub integral_term: f64,
    /// Solve statistics.
    pub diagnostics: PricingDiagnostics,
}

/// The solved fields behind one bond price, kept on their shared mesh.
struct BondSolves {
    cfg: PricerConfig,
    trunc: TruncationConfig,
    trapezoid_step: f64,
    u1: Vec<(f64, Solution)>,
    u2: Vec<(f64, Solution)>,
}

/// Solves the 2M expectations of one bond concurrently on a shared domain
/// (truncation sized by the bond maturity so every field lives on the same
/// rectangle).
fn solve_bond(spec: &BondSpec, cfg: &PricerConfig) -> Result<BondSolves> {
    let t = spec.maturity();
    let m = spec.coupon_count();
    let trunc = cfg.trunc_for(t);
    let shared = PricerConfig {
        trunc: Some(trunc),
        ..cfg.clone()
    };
    let h = t / m as f64;
    let u2_dates: Vec<f64> = (1..=m)
        .map(|j| if j == m { t } else { j as f64 * h })
        .collect();
    let jobs: Vec<(ProblemKind, f64)> = spec
        .coupon_dates
        .iter()
        .map(|&d| (ProblemKind::U1, d))
        .chain(u2_dates.iter().map(|&d| (ProblemKind::U2, d)))
        .collect();
    let solutions: Vec<(f64, Solution)> = jobs
        .par_iter()
        .map(|&(kind, t1)| Ok((t1, solve_expectation(kind, t1, &shared)?)))
        .collect::<Result<_>>()?;
    let mut u1 = Vec::with_capacity(m);
    let mut u2 = Vec::with_capacity(m);
    for (date, sol) in solutions {
        match sol.kind {
            ProblemKind::U1 => u1.push((date, sol)),
            ProblemKind::U2 => u2.push((date, sol)),
        }
    }
    Ok(BondSolves {
        cfg: shared,
        trunc,
        trapezoid_step: h,
        u1,
        u2,
    })
}

impl BondSolves {
    /// Spot values of the solved fields, the integral term, and the price.
    fn result(&self, spec: &BondSpec) -> Result<PricingResult> {
        let mut u1_values = Vec::with_capacity(self.u1.len());
        for (date, sol) in &self.u1 {
            u1_values.push((*date, sol.value_at_spot()?));
        }
        let mut u2_values = vec![(0.0, self.cfg.market.r0)];
        for (date, sol) in &self.u2 {
            u2_values.push((*date, sol.value_at_spot()?));
        }
        let series: Vec<f64> = u2_values.iter().map(|&(_, v)| v).collect();
        let integral_term = trapezoid_integral(&series, self.trapezoid_step)?;
        let value = bond_value(spec, &u1_values, integral_term)?;

        let mut diagnostics = PricingDiagnostics {
            mesh: self.cfg.mesh,
            steps_per_year: self.cfg.steps_per_year,
            trunc: self.trunc,
            solves: self.u1.len() + self.u2.len(),
            total_feet: 0,
            clamped_feet: 0,
            clamped_edge_feet: 0,
            max_cg_iterations: 0,
        };
        for (_, sol) in self.u1.iter().chain(&self.u2) {
            diagnostics.total_feet += sol.diagnostics.total_feet;
            diagnostics.clamped_feet += sol.diagnostics.clamped_feet;
            diagnostics.clamped_edge_feet += sol.diagnostics.clamped_edge_feet;
            diagnostics.max_cg_iterations = diagnostics
                .max_cg_iterations
                .max(sol.diagnostics.max_cg_iterations);
        }
        Ok(PricingResult {
            bond_value: value,
            u1_values,
            u2_values,
            integral_term,
            diagnostics,
        })
    }
}

/// Prices a bond: 2M concurrent PDE solves, the trapezoid rule, and the
/// bond-value formula, with aggregate diagnostics.
pub fn price(spec: &BondSpec, cfg: &PricerConfig) -> Result<PricingResult> {
    solve_bond(spec, cfg)?.result(spec)
}

/// The bond value as a nodal field over the shared mesh (valuation date
/// t = 0), for surface export.
#[derive(Debug, Clone)]
pub struct BondSurface {
    /// Localized domain shared by all fields.
    pub domain: TransformedDomain,
    /// Mesh carrying the surface.
    pub mesh: FemMesh,
    /// Bond value per node.
    pub values: FieldVector,
    /// Spot pricing from the same solves.
    pub result: PricingResult,
}

impl BondSurface {
    /// `(S, r, value)` per node, in node order (price index fastest).
    pub fn node_records(&self) -> Vec<(f64, f64, f64)> {
        (0..self.mesh.n_nodes())
            .map(|n| {
                let [x1, x2] = self.mesh.node_coords(n);
                let (s, r) = self.domain.from_computational(x1, x2, 0.0);
                (s, r, self.values[n])
            })
            .collect()
    }

    /// Interpolated bond value at financial coordinates.
    pub fn eval(&self, s: f64, r: f64) -> Result<f64> {
        let x = self.domain.to_computational(s, r, 0.0)?;
        self.mesh.interpolate(&self.values, x)
    }
}

/// Prices a bond and assembles the whole value surface `V(0, S, r; T)` by
/// combining the nodal `u₁`/`u₂` fields pointwise through the bond-value
/// formula (`u₂(·;0)` contributes the nodal short rate itself).
pub fn price_surface(spec: &BondSpec, cfg: &PricerConfig) -> Result<BondSurface> {
    let solves = solve_bond(spec, cfg)?;
    let result = solves.result(spec)?;
    let first = &solves.u1.first().expect("bond has at least one coupon date").1;
    let domain = first.domain;
    let mesh = first.mesh.clone();
    let n = mesh.n_nodes();
    let h = solves.trapezoid_step;

    let mut values = vec![0.0f64; n];
    for node in 0..n {
        let [_, x2] = mesh.node_coords(node);
        // Trapezoid over the u₂ fields; the j = 0 term is the rate at the
        // node (physical time 0).
        let mut integral = 0.5 * h * domain.rate_of(x2, 0.0);
        for (idx, (_, sol)) in solves.u2.iter().enumerate() {
            let weight = if idx + 1 == solves.u2.len() { 0.5 } else { 1.0 };
            integral += h * weight * sol.values[node];
        }
        let u1_maturity = solves.u1.last().expect("non-empty").1.values[node];
        let mut coupon_leg = 0.0;
        for ((_, sol), cp) in solves.u1.iter().zip(&spec.coupon_amounts) {
            coupon_leg += cp * sol.values[node];
        }
        values[node] = spec.face_value
            * (coupon_leg + u1_maturity + spec.recovery * (1.0 - u1_maturity - integral));
    }

    Ok(BondSurface {
        domain,
        mesh,
        values,
        result,
    })
}

/// One maturity of the zero-coupon validation curve.
#[derive(Debug, Clone, Copy)]
pub struct ZcbPoint {
    /// Maturity (years).
    pub maturity: f64,
    /// PDE value: the hazard-free (`b ≡ 0`, `c = 0`) two-factor solve of
    /// `u₁`, which prices `E[e^{−∫r}]`.
    pub pde: f64,
    /// Analytic Vasicek price at the same maturity.
    pub analytic: f64,
}

/// Computes the zero-coupon bond curve both ways: the hazard-free PDE solve
/// and the closed-form Vasicek price. With `cfg.trunc = None` each maturity
/// sizes its own [`TruncationConfig::containment_for`] window — the pure
/// discount has no coupon table to match, so the tighter variance-exact
/// window buys resolution where the long-maturity `e^{−B(τ)r}` profile
/// steepens.
pub fn zcb_curve(maturities: &[f64], cfg: &PricerConfig) -> Result<Vec<ZcbPoint>> {
    let equity = EquityParams::new(
        cfg.equity.a1,
        cfg.equity.a2,
        0.0,
        0.0,
        0.0,
        cfg.equity.beta,
    )?;
    let hazard_free = PricerConfig {
        equity,
        ..cfg.clone()
    };
    maturities
        .par_iter()
        .map(|&t1| {
            if !(t1.is_finite() && t1 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "zcb maturity must be > 0 (got {t1})"
                )));
            }
            let per_maturity = PricerConfig {
                trunc: Some(hazard_free.trunc.unwrap_or_else(|| {
                    TruncationConfig::containment_for(&cfg.market, &cfg.rate, t1)
                })),
                ..hazard_free.clone()
            };
            Ok(ZcbPoint {
                maturity: t1,
                pde: price_u1(t1, &per_maturity)?,
                analytic: vasicek_zcb(cfg.market.r0, t1, &cfg.rate),
            })
        })
        .collect()
}
