//! Selection of the solution regime and the critical cost levels that
//! separate the regimes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwitchError};
use crate::model::{CostParams, Problem};
use crate::rootfind::{expand_down, expand_up, find_root_positive};
use crate::solver::Ctx;

/// The eight solution regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    I1,
    I2,
    I3,
    II1,
    II2,
    II3,
    III1,
    III2,
}

impl CaseId {
    pub const ALL: [CaseId; 8] = [
        CaseId::I1,
        CaseId::I2,
        CaseId::I3,
        CaseId::II1,
        CaseId::II2,
        CaseId::II3,
        CaseId::III1,
        CaseId::III2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::I1 => "I1",
            CaseId::I2 => "I2",
            CaseId::I3 => "I3",
            CaseId::II1 => "II1",
            CaseId::II2 => "II2",
            CaseId::II3 => "II3",
            CaseId::III1 => "III1",
            CaseId::III2 => "III2",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Subsidiary quantities computed while classifying. Only those the decision
/// path needed are present.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_dagger: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_hat: Option<f64>,
    #[serde(rename = "K0_star", default, skip_serializing_if = "Option::is_none")]
    pub k0_star: Option<f64>,
    #[serde(rename = "K1_dagger", default, skip_serializing_if = "Option::is_none")]
    pub k1_dagger: Option<f64>,
    #[serde(rename = "K0_dagger", default, skip_serializing_if = "Option::is_none")]
    pub k0_dagger: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub case: CaseId,
    pub thresholds: Thresholds,
}

/// Maximiser and maximum over `(δ†, α)` of the switch-out gain
/// `g(x) = (a0 − A) x^m + b0 x^n − R_h(x)`, i.e. `w₀ − w₁` when the closed
/// mode is `a0 x^m + b0 x^n` and the open mode is `A x^m + R_h`.
fn switch_out_gain_max(cx: &Ctx, dd: f64, a_diff: f64, b0: f64) -> Result<(f64, f64)> {
    let p = cx.p;
    let (m, n) = (cx.m, cx.n);
    let slope = |x: f64| Ok(m * a_diff * p.xm(x) / x + n * b0 * p.xn(x) / x - p.resolvent(x, 1));
    let xa = cx.zero_of(-cx.r * cx.k1);
    if !(xa > dd) {
        return Err(SwitchError::RootNotBracketed {
            equation: "switch-out gain maximiser (x_hat)",
            lo: dd,
            hi: xa,
        });
    }
    // The gain's slope at δ† is w₀′(δ†) > 0 since w₁′(δ†) = 0. When that is
    // below rounding the maximum is at δ† itself.
    let x_hat = if slope(dd)? <= 0.0 {
        dd
    } else {
        find_root_positive(slope, dd, xa, "switch-out gain maximiser (x_hat)")?
    };
    let gain = a_diff * p.xm(x_hat) + b0 * p.xn(x_hat) - p.resolvent(x_hat, 0);
    Ok((x_hat, gain))
}

/// Abandonment threshold of the open mode, if `h(0) + rK < 0`.
pub fn solve_delta_dagger(p: &Problem) -> Result<Option<f64>> {
    Ctx::new(p).delta_dagger()
}

/// `(x̂, K₀*)`: the largest K₀ for which switching out of production is never
/// optimal when `K ≥ 0` and `h(0) + rK < 0`. Independent of K₀.
pub fn compute_k0_star(p: &Problem) -> Result<(f64, f64)> {
    let cx = Ctx::new(p);
    if cx.k < 0.0 {
        return Err(SwitchError::precondition("K0* is defined for K ≥ 0"));
    }
    let dd = cx
        .delta_dagger()?
        .ok_or_else(|| SwitchError::precondition("K0* needs h(0) + rK < 0"))?;
    let alpha = cx.ii2_alpha(dd)?;
    let a = -cx.c * p.int_m(0.0, dd, cx.r * cx.k)?;
    let b = cx.c * p.int_n(alpha, f64::INFINITY, -cx.r * cx.k1)?;
    switch_out_gain_max(&cx, dd, -a, b)
}

/// K₁†: the opening cost at which the closed-mode abandonment threshold
/// meets the open-mode one. Independent of K₀.
pub fn compute_k1_dagger(p: &Problem) -> Result<f64> {
    let cx = Ctx::new(p);
    if cx.k >= 0.0 {
        return Err(SwitchError::precondition("K1† is defined for K < 0"));
    }
    let dd = cx
        .delta_dagger()?
        .ok_or_else(|| SwitchError::precondition("K1† needs h(0) + rK < 0"))?;
    if p.h(dd) >= 0.0 {
        return Err(SwitchError::precondition("K1† needs h(δ†) < 0"));
    }
    let costs = *p.costs();
    let phi = |k1: f64| -> Result<f64> {
        let q = p.with_costs(CostParams {
            open_cost: k1,
            ..costs
        })?;
        Ctx::new(&q).pinned_g2(dd)
    };
    let start = cx.k.abs();
    let s0 = phi(start)?;
    let (lo, hi) = if s0 > 0.0 {
        (
            start,
            expand_up(phi, 1.0, 2.0 * start, "abandonment coincidence (K1_dagger)")?,
        )
    } else {
        (
            expand_down(
                phi,
                -1.0,
                0.5 * start,
                "abandonment coincidence (K1_dagger)",
            )?,
            start,
        )
    };
    find_root_positive(phi, lo, hi, "abandonment coincidence (K1_dagger)")
}

/// `(x̂, K₀†)`: the largest K₀ for which switching out of production is never
/// optimal when `K < 0` and `K₁ < K₁†`. Independent of K₀.
pub fn compute_k0_dagger(p: &Problem) -> Result<(f64, f64)> {
    let cx = Ctx::new(p);
    if cx.k >= 0.0 {
        return Err(SwitchError::precondition("K0† is defined for K < 0"));
    }
    let dd = cx
        .delta_dagger()?
        .ok_or_else(|| SwitchError::precondition("K0† needs h(0) + rK < 0"))?;
    let (zeta, _alpha) = cx.iii1_boundaries(dd)?;
    if zeta >= dd {
        return Err(SwitchError::precondition(
            "K0† needs the closed-mode abandonment threshold below δ† (K1 < K1†)",
        ));
    }
    let a = -cx.c * p.int_m(0.0, dd, cx.r * cx.k)?;
    let rk = cx.r * cx.k;
    let d1 = cx.c * rk / (cx.m * p.xm(zeta));
    let d2 = -cx.c * rk / (cx.n * p.xn(zeta));
    switch_out_gain_max(&cx, dd, d1 - a, d2)
}

/// Decides the regime from the sign conditions on `h(0)`, `K`, `K₀`, `K₁`.
/// Ties go exactly as the inequalities below are written.
pub fn classify(p: &Problem) -> Result<Classification> {
    let h0 = p.h0();
    let costs = p.costs();
    let (r, k1, k0, k) = (p.r(), costs.open_cost, costs.close_cost, costs.abandon_cost);
    let mut th = Thresholds::default();
    let case = if k >= 0.0 {
        if h0 >= r * k1 {
            CaseId::I1
        } else if h0 >= (-r * k0).max(-r * k) {
            CaseId::I2
        } else if h0 < -r * k0 {
            if k0 <= k {
                CaseId::II1
            } else {
                th.delta_dagger = solve_delta_dagger(p)?;
                let (x_hat, k0_star) = compute_k0_star(p)?;
                th.x_hat = Some(x_hat);
                th.k0_star = Some(k0_star);
                if k0_star <= k0 {
                    CaseId::II2
                } else {
                    CaseId::II3
                }
            }
        } else {
            th.delta_dagger = solve_delta_dagger(p)?;
            CaseId::II2
        }
    } else if h0 >= r * k1 - r * k {
        CaseId::I1
    } else if h0 >= -r * k {
        CaseId::I3
    } else {
        let dd = solve_delta_dagger(p)?;
        th.delta_dagger = dd;
        if h0 >= -r * k0 {
            CaseId::III1
        } else {
            let dd = dd.expect("h(0) < −rK implies δ† exists");
            if p.h(dd) >= 0.0 {
                CaseId::III1
            } else {
                let at_or_above = match compute_k1_dagger(p) {
                    Ok(v) => {
                        th.k1_dagger = Some(v);
                        k1 >= v
                    }
                    // K₁† beyond floating-point range (payoff growth close to
                    // x^n). G₂(δ†, δ†, α(K₁)) is decreasing in K₁ and vanishes
                    // at K₁†, so its sign at the actual K₁ decides.
                    Err(SwitchError::RootNotBracketed { .. }) => Ctx::new(p).pinned_g2(dd)? <= 0.0,
                    Err(e) => return Err(e),
                };
                if at_or_above {
                    CaseId::III1
                } else {
                    let (x_hat, k0_dagger) = compute_k0_dagger(p)?;
                    th.x_hat = Some(x_hat);
                    th.k0_dagger = Some(k0_dagger);
                    if k0 >= k0_dagger {
                        CaseId::III1
                    } else {
                        CaseId::III2
                    }
                }
            }
        }
    };
    Ok(Classification {
        case,
        thresholds: th,
    })
}
