//! Problem data, the fundamental exponents of the Euler ODE, the closed-form
//! payoff family and the resolvent `R_h`.
//!
//! The running payoff is restricted to
//!
//! ```text
//! h(x) = Σ c_i x^θ_i + c_0 + Σ j_k 1{x ≥ a_k},    c_i ≥ 0, θ_i ∈ (0, n), j_k ≥ 0
//! ```
//!
//! so that every weighted integral `∫ s^{-k-1} [h(s) + L] ds` (k = m or n)
//! has an exact antiderivative. All free-boundary equations are built from
//! these integrals, which removes quadrature error from the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwitchError};

/// Drift, volatility scale and discount rate of `dX = bX dt + √2 σ X dW`.
///
/// Only σ² enters the problem, so that is what is stored. JSON input may give
/// either `sigma` or `sigma2`; output always carries `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketJson")]
pub struct MarketParams {
    pub b: f64,
    pub sigma2: f64,
    pub r: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketJson {
    b: f64,
    sigma: Option<f64>,
    sigma2: Option<f64>,
    r: f64,
}

impl TryFrom<MarketJson> for MarketParams {
    type Error = String;

    fn try_from(m: MarketJson) -> std::result::Result<Self, String> {
        let sigma2 = match (m.sigma, m.sigma2) {
            (Some(s), None) => s * s,
            (None, Some(s2)) => s2,
            (Some(_), Some(_)) => return Err("give either `sigma` or `sigma2`, not both".into()),
            (None, None) => return Err("missing field `sigma2` (or `sigma`)".into()),
        };
        Ok(Self {
            b: m.b,
            sigma2,
            r: m.r,
        })
    }
}

impl MarketParams {
    pub fn new(b: f64, sigma2: f64, r: f64) -> Result<Self> {
        let market = Self { b, sigma2, r };
        market.validate()?;
        Ok(market)
    }

    /// From the volatility scale σ rather than σ².
    pub fn from_sigma(b: f64, sigma: f64, r: f64) -> Result<Self> {
        Self::new(b, sigma * sigma, r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.sigma2.is_finite() && self.r.is_finite()) {
            return Err(SwitchError::invalid("market parameters must be finite"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(SwitchError::invalid("sigma2 must be positive"));
        }
        if self.r <= 0.0 {
            return Err(SwitchError::invalid("discount rate r must be positive"));
        }
        Ok(())
    }

    /// σ², the coefficient of `x² w''` in the generator.
    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// σ taken nonnegative.
    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// The exponents `m < 0 < n` of the homogeneous solutions `x^m`, `x^n` of
/// `σ² x² w'' + b x w' − r w = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalRoots {
    pub m: f64,
    pub n: f64,
}

/// Roots of the characteristic quadratic `σ² k (k − 1) + b k − r = 0`.
///
/// The smaller root is evaluated through Vieta's relation `m n = −r/σ²` so
/// that neither root suffers from cancellation.
pub fn compute_roots(market: &MarketParams) -> FundamentalRoots {
    let s2 = market.sigma2();
    let a = s2 - market.b;
    let disc = (a * a + 4.0 * s2 * market.r).sqrt();
    let n = if a >= 0.0 {
        (a + disc) / (2.0 * s2)
    } else {
        // a + disc suffers cancellation; use n = 2r / (disc − a).
        2.0 * market.r / (disc - a)
    };
    let m = -market.r / (s2 * n);
    FundamentalRoots { m, n }
}

/// `c · x^θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct PowerTerm {
    pub weight: f64,
    pub exponent: f64,
}

impl From<(f64, f64)> for PowerTerm {
    fn from((weight, exponent): (f64, f64)) -> Self {
        Self { weight, exponent }
    }
}

impl From<PowerTerm> for (f64, f64) {
    fn from(t: PowerTerm) -> Self {
        (t.weight, t.exponent)
    }
}

/// `j · 1{x ≥ a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct StepTerm {
    pub jump: f64,
    pub at: f64,
}

impl From<(f64, f64)> for StepTerm {
    fn from((jump, at): (f64, f64)) -> Self {
        Self { jump, at }
    }
}

impl From<StepTerm> for (f64, f64) {
    fn from(t: StepTerm) -> Self {
        (t.jump, t.at)
    }
}

/// Running payoff `h` of the open project.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PayoffSpec {
    #[serde(rename = "powers", default)]
    pub power_terms: Vec<PowerTerm>,
    #[serde(default)]
    pub constant: f64,
    #[serde(rename = "steps", default)]
    pub step_terms: Vec<StepTerm>,
}

/// Selects the weight `s^{-m-1}` (M) or `s^{-n-1}` (N).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    M,
    N,
}

impl PayoffSpec {
    /// `h(x) = c·x^θ` for a single power term.
    pub fn power(weight: f64, exponent: f64) -> Self {
        Self {
            power_terms: vec![PowerTerm { weight, exponent }],
            ..Self::default()
        }
    }

    /// `h(x) = x + c_0`.
    pub fn linear(constant: f64) -> Self {
        Self {
            power_terms: vec![PowerTerm {
                weight: 1.0,
                exponent: 1.0,
            }],
            constant,
            step_terms: Vec::new(),
        }
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn with_power(mut self, weight: f64, exponent: f64) -> Self {
        self.power_terms.push(PowerTerm { weight, exponent });
        self
    }

    pub fn with_step(mut self, jump: f64, at: f64) -> Self {
        self.step_terms.push(StepTerm { jump, at });
        self
    }

    fn active_powers(&self) -> impl Iterator<Item = &PowerTerm> {
        self.power_terms.iter().filter(|t| t.weight != 0.0)
    }

    fn active_steps(&self) -> impl Iterator<Item = &StepTerm> {
        self.step_terms.iter().filter(|t| t.jump != 0.0)
    }

    /// Shape checks that do not depend on the market.
    pub fn validate_shape(&self) -> Result<()> {
        if !self.constant.is_finite() {
            return Err(SwitchError::invalid("payoff constant must be finite"));
        }
        let mut unbounded = false;
        for t in &self.power_terms {
            if !(t.weight.is_finite() && t.exponent.is_finite()) {
                return Err(SwitchError::invalid("power terms must be finite"));
            }
            if t.weight < 0.0 {
                return Err(SwitchError::invalid(format!(
                    "power weight {} is negative; h must be increasing",
                    t.weight
                )));
            }
            if t.weight > 0.0 && t.exponent <= 0.0 {
                return Err(SwitchError::invalid(format!(
                    "power exponent {} ≤ 0 with positive weight makes h non-increasing or unbounded at 0",
                    t.exponent
                )));
            }
            if t.weight > 0.0 {
                unbounded = true;
            }
        }
        if !unbounded {
            return Err(SwitchError::invalid(
                "h must contain a power term with positive weight and exponent so that h(x) → ∞",
            ));
        }
        for s in &self.step_terms {
            if !(s.jump.is_finite() && s.at.is_finite()) {
                return Err(SwitchError::invalid("step terms must be finite"));
            }
            if s.jump < 0.0 {
                return Err(SwitchError::invalid("step jumps must be nonnegative"));
            }
            if s.at <= 0.0 {
                return Err(SwitchError::invalid("step locations must be positive"));
            }
        }
        Ok(())
    }

    /// Integrability gate: every active exponent must lie strictly inside `(m, n)`.
    pub fn validate_against(&self, roots: &FundamentalRoots) -> Result<()> {
        self.validate_shape()?;
        for t in self.active_powers() {
            if !(t.exponent > roots.m && t.exponent < roots.n) {
                return Err(SwitchError::invalid(format!(
                    "power exponent {} outside the integrability window ({}, {})",
                    t.exponent, roots.m, roots.n
                )));
            }
        }
        Ok(())
    }

    /// `h(x)`, right-continuous at step locations.
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for t in self.active_powers() {
            v += t.weight * pow(x, t.exponent);
        }
        for s in self.active_steps() {
            if x >= s.at {
                v += s.jump;
            }
        }
        v
    }

    /// `h(0+) = c_0`.
    #[inline]
    pub fn h0(&self) -> f64 {
        self.constant
    }

    /// Step locations with nonzero jump, sorted.
    pub fn jump_points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.active_steps().map(|s| s.at).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// `inf { x > 0 : h(x) + shift ≥ 0 }`, or 0 when `h(0) + shift ≥ 0`.
    ///
    /// `h` is strictly increasing on the admissible family, so this is also
    /// the point where `h + shift` changes sign.
    pub fn level_crossing(&self, shift: f64) -> f64 {
        if self.h0() + shift >= 0.0 {
            return 0.0;
        }
        let g = |x: f64| self.eval(x) + shift;
        let mut hi = 1.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut lo = hi / 2.0;
        while g(lo) >= 0.0 {
            hi = lo;
            lo /= 2.0;
        }
        // g(lo) < 0 ≤ g(hi)
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `∫_lo^hi s^{-k-1} [h(s) + shift] ds` with `k = m` or `k = n`, in closed
    /// form. `hi` may be `+∞` for the N weight and `lo` may be `0` for the M
    /// weight; the opposite endpoints diverge and are rejected.
    pub fn weighted_integral(
        &self,
        kind: Weight,
        roots: &FundamentalRoots,
        lo: f64,
        hi: f64,
        shift: f64,
    ) -> Result<f64> {
        self.weighted_integral_terms(kind, roots, lo, hi, shift)
            .map(|(v, _)| v)
    }

    /// Like [`weighted_integral`](Self::weighted_integral) but also returns
    /// the largest absolute contribution of a single term (used as a residual
    /// scale).
    pub fn weighted_integral_terms(
        &self,
        kind: Weight,
        roots: &FundamentalRoots,
        lo: f64,
        hi: f64,
        shift: f64,
    ) -> Result<(f64, f64)> {
        if lo == hi {
            return Ok((0.0, 0.0));
        }
        if lo > hi {
            return self
                .weighted_integral_terms(kind, roots, hi, lo, shift)
                .map(|(v, s)| (-v, s));
        }
        if lo < 0.0 || lo.is_nan() || hi.is_nan() {
            return Err(SwitchError::DivergentIntegral(format!(
                "invalid integration limits [{lo}, {hi}]"
            )));
        }
        let k = match kind {
            Weight::M => roots.m,
            Weight::N => roots.n,
        };
        let mut total = 0.0;
        let mut scale = 0.0f64;
        let mut add = |v: f64| {
            total += v;
            scale = scale.max(v.abs());
        };
        for t in self.active_powers() {
            add(t.weight * antiderivative_diff(t.exponent - k, lo, hi, kind, "power term")?);
        }
        if self.constant != 0.0 {
            add(self.constant * antiderivative_diff(-k, lo, hi, kind, "constant term")?);
        }
        if shift != 0.0 {
            add(shift * antiderivative_diff(-k, lo, hi, kind, "shift")?);
        }
        for s in self.active_steps() {
            let start = lo.max(s.at);
            if hi > start {
                add(s.jump * antiderivative_diff(-k, start, hi, kind, "step term")?);
            }
        }
        Ok((total, scale))
    }
}

/// `[s^p / p]_lo^hi` with limits at 0 and ∞ taken analytically.
fn antiderivative_diff(p: f64, lo: f64, hi: f64, kind: Weight, what: &str) -> Result<f64> {
    debug_assert!(p != 0.0);
    let at = |s: f64| -> Result<f64> {
        if s == 0.0 {
            if p > 0.0 {
                Ok(0.0)
            } else {
                Err(SwitchError::DivergentIntegral(format!(
                    "{what} not integrable at 0 under the {kind:?} weight"
                )))
            }
        } else if s.is_infinite() {
            if p < 0.0 {
                Ok(0.0)
            } else {
                Err(SwitchError::DivergentIntegral(format!(
                    "{what} not integrable at ∞ under the {kind:?} weight"
                )))
            }
        } else {
            Ok(pow(s, p) / p)
        }
    };
    Ok(at(hi)? - at(lo)?)
}

#[inline]
pub(crate) fn pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if p == -1.0 {
        1.0 / x
    } else {
        x.powf(p)
    }
}

/// Switching costs and the abandonment cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost of switching from closed to open (`K_1 > 0`).
    #[serde(rename = "K1")]
    pub open_cost: f64,
    /// Cost of switching from open to closed (`K_0 > 0`).
    #[serde(rename = "K0")]
    pub close_cost: f64,
    /// Sunk cost of permanent abandonment; negative values are salvage.
    #[serde(rename = "K")]
    pub abandon_cost: f64,
}

impl CostParams {
    pub fn new(open_cost: f64, close_cost: f64, abandon_cost: f64) -> Result<Self> {
        let c = Self {
            open_cost,
            close_cost,
            abandon_cost,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.open_cost.is_finite()
            && self.close_cost.is_finite()
            && self.abandon_cost.is_finite())
        {
            return Err(SwitchError::invalid("costs must be finite"));
        }
        if self.open_cost <= 0.0 || self.close_cost <= 0.0 {
            return Err(SwitchError::invalid(
                "switching costs K1 and K0 must be positive",
            ));
        }
        Ok(())
    }
}

/// A full problem instance, as read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemData {
    pub market: MarketParams,
    pub costs: CostParams,
    pub payoff: PayoffSpec,
}

impl ProblemData {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SwitchError::invalid(format!("malformed JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem data is always serialisable")
    }
}

/// Validated problem data together with its fundamental roots. Every solver
/// works on this type; it is cheap to clone and immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    data: ProblemData,
    roots: FundamentalRoots,
}

impl Problem {
    pub fn new(data: ProblemData) -> Result<Self> {
        data.market.validate()?;
        data.costs.validate()?;
        let roots = compute_roots(&data.market);
        data.payoff.validate_against(&roots)?;
        Ok(Self { data, roots })
    }

    pub fn from_parts(market: MarketParams, costs: CostParams, payoff: PayoffSpec) -> Result<Self> {
        Self::new(ProblemData {
            market,
            costs,
            payoff,
        })
    }

    #[inline]
    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    #[inline]
    pub fn roots(&self) -> FundamentalRoots {
        self.roots
    }

    #[inline]
    pub fn market(&self) -> &MarketParams {
        &self.data.market
    }

    #[inline]
    pub fn costs(&self) -> &CostParams {
        &self.data.costs
    }

    #[inline]
    pub fn payoff(&self) -> &PayoffSpec {
        &self.data.payoff
    }

    /// Copy of this problem with different costs.
    pub fn with_costs(&self, costs: CostParams) -> Result<Self> {
        costs.validate()?;
        Ok(Self {
            data: ProblemData {
                costs,
                ..self.data.clone()
            },
            roots: self.roots,
        })
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.data.market.r
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        self.data.payoff.eval(x)
    }

    #[inline]
    pub fn h0(&self) -> f64 {
        self.data.payoff.h0()
    }

    /// `1 / (σ² (n − m))`, the normalisation shared by every coefficient formula.
    #[inline]
    pub fn kappa(&self) -> f64 {
        1.0 / (self.data.market.sigma2() * (self.roots.n - self.roots.m))
    }

    /// `∫_lo^hi s^{-m-1} [h(s) + shift] ds`.
    pub fn int_m(&self, lo: f64, hi: f64, shift: f64) -> Result<f64> {
        self.data
            .payoff
            .weighted_integral(Weight::M, &self.roots, lo, hi, shift)
    }

    /// `∫_lo^hi s^{-n-1} [h(s) + shift] ds`.
    pub fn int_n(&self, lo: f64, hi: f64, shift: f64) -> Result<f64> {
        self.data
            .payoff
            .weighted_integral(Weight::N, &self.roots, lo, hi, shift)
    }

    /// [`int_m`](Self::int_m) with its largest single-term magnitude.
    pub fn int_m_terms(&self, lo: f64, hi: f64, shift: f64) -> Result<(f64, f64)> {
        self.data
            .payoff
            .weighted_integral_terms(Weight::M, &self.roots, lo, hi, shift)
    }

    /// [`int_n`](Self::int_n) with its largest single-term magnitude.
    pub fn int_n_terms(&self, lo: f64, hi: f64, shift: f64) -> Result<(f64, f64)> {
        self.data
            .payoff
            .weighted_integral_terms(Weight::N, &self.roots, lo, hi, shift)
    }

    /// `x^m`.
    #[inline]
    pub fn xm(&self, x: f64) -> f64 {
        pow(x, self.roots.m)
    }

    /// `x^n`.
    #[inline]
    pub fn xn(&self, x: f64) -> f64 {
        pow(x, self.roots.n)
    }

    /// The resolvent `R_h(x) = E ∫_0^∞ e^{-rt} h(X_t) dt` and its first two
    /// derivatives (`order` ∈ {0, 1, 2}). The second derivative is taken on
    /// the right at payoff jumps.
    pub fn resolvent(&self, x: f64, order: u8) -> f64 {
        let FundamentalRoots { m, n } = self.roots;
        let lower = self
            .int_m(0.0, x, 0.0)
            .expect("M-weight integral from 0 always converges");
        let upper = self
            .int_n(x, f64::INFINITY, 0.0)
            .expect("N-weight integral to ∞ always converges");
        let k = self.kappa();
        match order {
            0 => k * (pow(x, m) * lower + pow(x, n) * upper),
            1 => k * (m * pow(x, m - 1.0) * lower + n * pow(x, n - 1.0) * upper),
            2 => {
                k * (m * (m - 1.0) * pow(x, m - 2.0) * lower
                    + n * (n - 1.0) * pow(x, n - 2.0) * upper
                    + (m - n) * self.h(x) / (x * x))
            }
            _ => panic!("resolvent derivative order must be 0, 1 or 2"),
        }
    }

    /// `R_h′`.
    #[inline]
    pub fn resolvent_deriv(&self, x: f64) -> f64 {
        self.resolvent(x, 1)
    }

    /// Direct evaluation of `R_h` for payoffs without step terms:
    /// `c x^θ / (r − bθ − σ²θ(θ−1))` per power term and `c_0 / r` for the
    /// constant. Returns `None` when the payoff has steps.
    pub fn resolvent_direct(&self, x: f64, order: u8) -> Option<f64> {
        let payoff = &self.data.payoff;
        if payoff.active_steps().next().is_some() {
            return None;
        }
        let MarketParams { b, r, .. } = self.data.market;
        let s2 = self.data.market.sigma2();
        let mut v = match order {
            0 => payoff.constant / r,
            _ => 0.0,
        };
        for t in payoff.active_powers() {
            let th = t.exponent;
            let denom = r - b * th - s2 * th * (th - 1.0);
            let d = match order {
                0 => pow(x, th),
                1 => th * pow(x, th - 1.0),
                2 => th * (th - 1.0) * pow(x, th - 2.0),
                _ => panic!("resolvent derivative order must be 0, 1 or 2"),
            };
            v += t.weight * d / denom;
        }
        Some(v)
    }

    /// `σ² x² w'' + b x w' − r w` for given derivatives.
    #[inline]
    pub fn generator(&self, x: f64, w: f64, dw: f64, d2w: f64) -> f64 {
        let MarketParams { b, r, .. } = self.data.market;
        self.data.market.sigma2() * x * x * d2w + b * x * dw - r * w
    }
}
