//! Free-boundary systems of the eight cases and their nested monotone solves.
//!
//! Each two- or three-unknown system is reduced to a chain of scalar
//! equations: an inner map `ℓ(·)` obtained from one equation, then an outer
//! scalar root of the other equation along that map. The monotonicity of
//! every reduced map gives a sign change on a bracket built from the zeros of
//! `h + L` for the relevant shifts `L`.

use serde::{Deserialize, Serialize};

use crate::classify::CaseId;
use crate::error::{Result, SwitchError};
use crate::model::Problem;
use crate::rootfind::{expand_down, expand_up, find_root_positive};

/// Free boundaries of a solved case; absent entries do not occur in that case.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FreeBoundaries {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl FreeBoundaries {
    /// Present boundaries as `(name, value)` pairs.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        [
            ("zeta", self.zeta),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("alpha", self.alpha),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// Mutable access by name, for perturbation probes.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut Option<f64>> {
        match name {
            "zeta" => Some(&mut self.zeta),
            "delta" => Some(&mut self.delta),
            "gamma" => Some(&mut self.gamma),
            "beta" => Some(&mut self.beta),
            "alpha" => Some(&mut self.alpha),
            _ => None,
        }
    }

    /// Checks the strict ordering required by `case`.
    pub fn check_ordering(&self, case: CaseId) -> Result<()> {
        let need = |v: Option<f64>, name: &str| {
            v.filter(|x| x.is_finite() && *x > 0.0).ok_or_else(|| {
                SwitchError::precondition(format!(
                    "case {case} requires a positive boundary {name}"
                ))
            })
        };
        let chain: Vec<f64> = match case {
            CaseId::I1 => vec![],
            CaseId::I2 => vec![need(self.alpha, "alpha")?],
            CaseId::I3 => vec![need(self.zeta, "zeta")?, need(self.alpha, "alpha")?],
            CaseId::II1 => vec![need(self.beta, "beta")?, need(self.alpha, "alpha")?],
            CaseId::II2 => vec![need(self.delta, "delta")?, need(self.alpha, "alpha")?],
            CaseId::II3 => vec![
                need(self.delta, "delta")?,
                need(self.gamma, "gamma")?,
                need(self.beta, "beta")?,
                need(self.alpha, "alpha")?,
            ],
            CaseId::III1 => {
                let d = need(self.delta, "delta")?;
                let z = need(self.zeta, "zeta")?;
                vec![d.max(z), need(self.alpha, "alpha")?]
            }
            CaseId::III2 => vec![
                need(self.zeta, "zeta")?,
                need(self.delta, "delta")?,
                need(self.gamma, "gamma")?,
                need(self.beta, "beta")?,
                need(self.alpha, "alpha")?,
            ],
        };
        if chain.windows(2).all(|w| w[0] < w[1]) {
            Ok(())
        } else {
            Err(SwitchError::precondition(format!(
                "boundaries {:?} violate the ordering of case {case}",
                self.named()
            )))
        }
    }
}

/// Coefficients of the homogeneous parts of the value functions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coefficients {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "Gamma1", default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(rename = "Gamma2", default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(rename = "Delta1", default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(rename = "Delta2", default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
}

impl Coefficients {
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        [
            ("A", self.a),
            ("B", self.b),
            ("Gamma1", self.gamma1),
            ("Gamma2", self.gamma2),
            ("Delta1", self.delta1),
            ("Delta2", self.delta2),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }
}

/// Value of one defining equation at the returned boundaries, with the
/// largest absolute additive term as its scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub equation: &'static str,
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    /// `|value| / scale` (0 when both vanish).
    pub fn relative(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value.abs() / self.scale
        }
    }
}

/// Output of a case solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSolve {
    pub boundaries: FreeBoundaries,
    pub coefficients: Coefficients,
    pub residuals: Vec<Residual>,
}

impl CaseSolve {
    pub fn max_relative_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(Residual::relative)
            .fold(0.0, f64::max)
    }
}

/// Running sum of signed terms with the largest magnitude as scale.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    value: f64,
    scale: f64,
}

impl Sum {
    fn term(mut self, v: f64) -> Self {
        self.value += v;
        self.scale = self.scale.max(v.abs());
        self
    }

    fn integral(mut self, factor: f64, (v, s): (f64, f64)) -> Self {
        self.value += factor * v;
        self.scale = self.scale.max((factor * s).abs()).max((factor * v).abs());
        self
    }

    fn residual(self, equation: &'static str) -> Residual {
        Residual {
            equation,
            value: self.value,
            scale: self.scale,
        }
    }
}

/// Problem constants in the notation of the equations below.
#[derive(Clone, Copy)]
pub(crate) struct Ctx<'a> {
    pub p: &'a Problem,
    pub r: f64,
    pub k1: f64,
    pub k0: f64,
    pub k: f64,
    pub m: f64,
    pub n: f64,
    pub c: f64,
}

impl<'a> Ctx<'a> {
    pub fn new(p: &'a Problem) -> Self {
        let costs = p.costs();
        let roots = p.roots();
        Self {
            p,
            r: p.r(),
            k1: costs.open_cost,
            k0: costs.close_cost,
            k: costs.abandon_cost,
            m: roots.m,
            n: roots.n,
            c: p.kappa(),
        }
    }

    fn im(&self, lo: f64, hi: f64, l: f64) -> Result<(f64, f64)> {
        self.p.int_m_terms(lo, hi, l)
    }

    fn in_(&self, lo: f64, hi: f64, l: f64) -> Result<(f64, f64)> {
        self.p.int_n_terms(lo, hi, l)
    }

    fn xm(&self, x: f64) -> f64 {
        self.p.xm(x)
    }

    fn xn(&self, x: f64) -> f64 {
        self.p.xn(x)
    }

    /// Zero of `h + shift` (0 if `h(0) + shift ≥ 0`).
    pub fn zero_of(&self, shift: f64) -> f64 {
        self.p.payoff().level_crossing(shift)
    }

    // ---- defining equations ----

    /// `∫_0^α s^{-m-1}[h − rK₁] ds`.
    fn eq_i2(&self, alpha: f64) -> Result<Sum> {
        Ok(Sum::default().integral(1.0, self.im(0.0, alpha, -self.r * self.k1)?))
    }

    /// `m ∫_0^α s^{-m-1}[h − rK₁] ds − rK ζ^{-m}`.
    fn eq_f1(&self, zeta: f64, alpha: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.m, self.im(0.0, alpha, -self.r * self.k1)?)
            .term(-self.r * self.k * self.xm(zeta).recip()))
    }

    /// `n ∫_α^∞ s^{-n-1}[h − rK₁] ds + rK ζ^{-n}`.
    fn eq_f2(&self, zeta: f64, alpha: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.n, self.in_(alpha, f64::INFINITY, -self.r * self.k1)?)
            .term(self.r * self.k * self.xn(zeta).recip()))
    }

    /// `m ∫_β^α s^{-m-1} h ds + rK₀ β^{-m} + rK₁ α^{-m}`.
    fn eq_e1(&self, beta: f64, alpha: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.m, self.im(beta, alpha, 0.0)?)
            .term(self.r * self.k0 / self.xm(beta))
            .term(self.r * self.k1 / self.xm(alpha)))
    }

    /// `n ∫_β^α s^{-n-1} h ds + rK₀ β^{-n} + rK₁ α^{-n}`.
    fn eq_e2(&self, beta: f64, alpha: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.n, self.in_(beta, alpha, 0.0)?)
            .term(self.r * self.k0 / self.xn(beta))
            .term(self.r * self.k1 / self.xn(alpha)))
    }

    /// `∫_δ^∞ s^{-n-1}[h + rK] ds`.
    fn eq_dagger(&self, delta: f64) -> Result<Sum> {
        Ok(Sum::default().integral(1.0, self.in_(delta, f64::INFINITY, self.r * self.k)?))
    }

    /// `m ∫_δ^α s^{-m-1}[h − rK₁] ds + r(K₁ + K) δ^{-m}`, with the K₁ part
    /// integrated out: `m ∫_δ^α s^{-m-1} h ds + rK₁ α^{-m} + rK δ^{-m}`.
    fn eq_ii2(&self, delta: f64, alpha: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.m, self.im(delta, alpha, 0.0)?)
            .term(self.r * self.k1 / self.xm(alpha))
            .term(self.r * self.k / self.xm(delta)))
    }

    /// `m ∫_δ^γ s^{-m-1}[h + rK₀] ds + r(K − K₀) δ^{-m}`, evaluated as
    /// `m ∫_δ^γ s^{-m-1} h ds − rK₀ γ^{-m} + rK δ^{-m}`.
    fn eq_big_f1(&self, delta: f64, gamma: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.m, self.im(delta, gamma, 0.0)?)
            .term(-self.r * self.k0 / self.xm(gamma))
            .term(self.r * self.k / self.xm(delta)))
    }

    /// `n ∫_δ^γ s^{-n-1}[h + rK₀] ds + r(K − K₀) δ^{-n} + n ∫_β^∞ s^{-n-1}[h + rK₀] ds`,
    /// with the first K₀ part integrated out.
    fn eq_big_f2(&self, delta: f64, gamma: f64, beta: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.n, self.in_(delta, gamma, 0.0)?)
            .term(-self.r * self.k0 / self.xn(gamma))
            .term(self.r * self.k / self.xn(delta))
            .integral(self.n, self.in_(beta, f64::INFINITY, self.r * self.k0)?))
    }

    /// `m ∫_δ^α s^{-m-1}[h − rK₁] ds + r(K₁ + K) δ^{-m} − rK ζ^{-m}`.
    fn eq_g1(&self, delta: f64, zeta: f64, alpha: f64) -> Result<Sum> {
        Ok(self
            .eq_ii2(delta, alpha)?
            .term(-self.r * self.k / self.xm(zeta)))
    }

    /// `−n ∫_δ^α s^{-n-1}[h − rK₁] ds − r(K₁ + K) δ^{-n} + rK ζ^{-n}`.
    fn eq_g2(&self, delta: f64, zeta: f64, alpha: f64) -> Result<Sum> {
        Ok(self
            .g2_head(delta, alpha)?
            .term(self.r * self.k / self.xn(zeta)))
    }

    /// The ζ-free part of G₂ with the K₁ part integrated out:
    /// `−n ∫_δ^α s^{-n-1} h ds − rK₁ α^{-n} − rK δ^{-n}`.
    fn g2_head(&self, delta: f64, alpha: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(-self.n, self.in_(delta, alpha, 0.0)?)
            .term(-self.r * self.k1 / self.xn(alpha))
            .term(-self.r * self.k / self.xn(delta)))
    }

    /// [`g2_head`](Self::g2_head) at δ = δ†, rewritten with the δ† equation
    /// as the tail `n ∫_α^∞ s^{-n-1}[h − rK₁ + L] ds`. The direct form loses
    /// everything to cancellation once α^{-n} ≪ δ†^{-n}.
    fn g2_tail(&self, alpha: f64, l: f64) -> Result<Sum> {
        Ok(Sum::default().integral(
            self.n,
            self.in_(alpha, f64::INFINITY, l - self.r * self.k1)?,
        ))
    }

    /// `n ∫_δ^∞ s^{-n-1}[h + rK] ds − n ∫_γ^β s^{-n-1}[h + rK₀] ds`.
    fn eq_g3(&self, delta: f64, gamma: f64, beta: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.n, self.in_(delta, f64::INFINITY, self.r * self.k)?)
            .integral(-self.n, self.in_(gamma, beta, self.r * self.k0)?))
    }

    /// `rK ζ^{-n} + n ∫_β^∞ s^{-n-1}[h + rK₀] ds`.
    fn eq_g4(&self, zeta: f64, beta: f64) -> Result<Sum> {
        Ok(Sum::default()
            .term(self.r * self.k / self.xn(zeta))
            .integral(self.n, self.in_(beta, f64::INFINITY, self.r * self.k0)?))
    }

    /// `m ∫_0^γ s^{-m-1}[h + rK₀] ds − m ∫_0^δ s^{-m-1}[h + rK] ds − rK ζ^{-m}`.
    fn eq_g5(&self, zeta: f64, delta: f64, gamma: f64) -> Result<Sum> {
        Ok(Sum::default()
            .integral(self.m, self.im(0.0, gamma, self.r * self.k0)?)
            .integral(-self.m, self.im(0.0, delta, self.r * self.k)?)
            .term(-self.r * self.k / self.xm(zeta)))
    }

    // ---- coefficient formulas ----

    /// `κ ∫_α^∞ s^{-n-1}[h − rK₁] ds`.
    fn coef_b(&self, alpha: f64) -> Result<f64> {
        Ok(self.c * self.p.int_n(alpha, f64::INFINITY, -self.r * self.k1)?)
    }

    /// `−κ ∫_0^x s^{-m-1}[h + shift] ds`.
    fn coef_a_lower(&self, x: f64, shift: f64) -> Result<f64> {
        Ok(-self.c * self.p.int_m(0.0, x, shift)?)
    }

    /// `(Δ₁, Δ₂)` making `Δ₁x^m + Δ₂x^n` paste C¹ onto the constant `−K` at ζ.
    fn deltas(&self, zeta: f64) -> (f64, f64) {
        let rk = self.r * self.k;
        (
            self.c * rk / (self.m * self.xm(zeta)),
            -self.c * rk / (self.n * self.xn(zeta)),
        )
    }

    // ---- nested solves ----

    /// Upper end ζ̂ of the I.3 ζ-range.
    pub fn i3_zeta_hat(&self) -> Result<f64> {
        let shift = self.r * self.k - self.r * self.k1;
        let zeta_bar = self.zero_of(shift);
        let g = |z: f64| Ok(self.im(0.0, z, shift)?.0);
        let hi = expand_up(
            g,
            -1.0,
            2.0 * zeta_bar,
            "switch-in pasting limit (zeta_hat)",
        )?;
        find_root_positive(g, zeta_bar, hi, "switch-in pasting limit (zeta_hat)")
    }

    /// I.3: α solving `f₁(ζ, α) = 0` for `ζ < ζ̂`.
    pub fn i3_ell(&self, z: f64, zeta_hat: f64) -> Result<f64> {
        if z >= zeta_hat {
            return Ok(zeta_hat);
        }
        let xa = self.zero_of(-self.r * self.k1);
        let lo = z.max(xa).min(zeta_hat);
        find_root_positive(
            |a| self.eq_f1(z, a).map(|s| s.value),
            lo,
            zeta_hat,
            "closed-mode value matching (alpha)",
        )
    }

    /// II.3: δ solving `F₁(δ, γ) = 0`.
    pub fn ii3_ell(&self, g: f64) -> Result<f64> {
        let f = |d: f64| self.eq_big_f1(d, g).map(|s| s.value);
        let lo = expand_down(f, -1.0, 0.5 * g, "open-mode abandonment value (delta)")?;
        find_root_positive(f, lo, g, "open-mode abandonment value (delta)")
    }

    /// III.1: ζ solving `G₂(δ†, ζ, α) = 0`, in closed form.
    pub fn iii1_ell(&self, a: f64) -> Result<f64> {
        let q = -self.g2_tail(a, 0.0)?.value;
        let ratio = q / (self.r * self.k);
        if !(ratio > 0.0) {
            return Err(SwitchError::RootNotBracketed {
                equation: "closed-mode abandonment (zeta)",
                lo: a,
                hi: a,
            });
        }
        Ok(ratio.powf(-1.0 / self.n))
    }

    /// III.2: δ solving `G₃(δ, γ, β) = 0` for `γ > γ̂`.
    pub fn iii2_ell(&self, g: f64, beta: f64, gamma_hat: f64) -> Result<f64> {
        if g <= gamma_hat {
            return Ok(g);
        }
        let f = |d: f64| self.eq_g3(d, g, beta).map(|s| s.value);
        // Just above γ̂ the root sits at δ = γ and G₃(γ, γ, β) is rounding
        // noise of either sign.
        if f(g)? <= 0.0 {
            return Ok(g);
        }
        let lo = expand_down(f, 1.0, 0.5 * g, "open-mode abandonment slope (delta)")?;
        find_root_positive(f, lo, g, "open-mode abandonment slope (delta)")
    }

    /// `(β, α)` of the II.1 system.
    pub fn ii1_boundaries(&self) -> Result<(f64, f64)> {
        if self.p.h0() >= -self.r * self.k0 {
            return Err(SwitchError::precondition(
                "the switch-out system needs h(0) < −rK0",
            ));
        }
        let xb = self.zero_of(self.r * self.k0);
        let xa = self.zero_of(-self.r * self.k1);
        let lambda = |beta: f64| -> Result<f64> {
            let lo = beta.max(xa);
            let f = |a: f64| self.eq_e1(beta, a).map(|s| s.value);
            let hi = expand_up(f, 1.0, 2.0 * lo, "switch-out value matching (alpha)")?;
            find_root_positive(f, lo, hi, "switch-out value matching (alpha)")
        };
        let outer = |beta: f64| -> Result<f64> { Ok(self.eq_e2(beta, lambda(beta)?)?.value) };
        let lo = expand_down(outer, 1.0, 0.5 * xb, "switch-out slope matching (beta)")?;
        let beta = find_root_positive(outer, lo, xb, "switch-out slope matching (beta)")?;
        Ok((beta, lambda(beta)?))
    }

    /// Abandonment threshold of the open mode that does not depend on K₀.
    pub fn delta_dagger(&self) -> Result<Option<f64>> {
        if self.p.h0() + self.r * self.k >= 0.0 {
            return Ok(None);
        }
        let xk = self.zero_of(self.r * self.k);
        let f = |d: f64| self.eq_dagger(d).map(|s| s.value);
        let lo = expand_down(f, 1.0, 0.5 * xk, "open-mode abandonment (delta_dagger)")?;
        find_root_positive(f, lo, xk, "open-mode abandonment (delta_dagger)").map(Some)
    }

    fn require_delta_dagger(&self) -> Result<f64> {
        self.delta_dagger()?
            .ok_or_else(|| SwitchError::precondition("open-mode abandonment needs h(0) + rK < 0"))
    }

    /// α of the II.2 system given δ†.
    pub fn ii2_alpha(&self, dd: f64) -> Result<f64> {
        if self.k1 + self.k <= 0.0 {
            return Err(SwitchError::precondition("case II.2 needs K1 + K > 0"));
        }
        let xa = self.zero_of(-self.r * self.k1);
        let lo = dd.max(xa);
        let f = |a: f64| self.eq_ii2(dd, a).map(|s| s.value);
        let hi = expand_up(f, 1.0, 2.0 * lo, "switch-in with open abandonment (alpha)")?;
        find_root_positive(f, lo, hi, "switch-in with open abandonment (alpha)")
    }

    /// α of the III.1 system with ζ pinned to δ† (used for K₁†).
    pub fn pinned_alpha(&self, dd: f64) -> Result<f64> {
        let xa = self.zero_of(-self.r * self.k1);
        let lo = dd.max(xa);
        let f = |a: f64| self.eq_g1(dd, dd, a).map(|s| s.value);
        let hi = expand_up(f, 1.0, 2.0 * lo, "pinned switch-in (alpha)")?;
        find_root_positive(f, lo, hi, "pinned switch-in (alpha)")
    }

    /// `G₂(δ†, δ†, α)` at the pinned α; decreasing in K₁ and zero at K₁†.
    pub fn pinned_g2(&self, dd: f64) -> Result<f64> {
        let alpha = self.pinned_alpha(dd)?;
        Ok(self.eq_g2(dd, dd, alpha)?.value)
    }

    /// Lower end α̂ of the III.1 α-range, where `ℓ(α̂) = α̂`.
    pub fn iii1_alpha_hat(&self, dd: f64) -> Result<f64> {
        let zeta_bar = self.zero_of(self.r * self.k - self.r * self.k1);
        // G₂(δ†, α, α)
        let h1 = |a: f64| self.g2_tail(a, self.r * self.k).map(|s| s.value);
        find_root_positive(h1, dd, zeta_bar, "closed-mode pasting limit (alpha_hat)")
    }

    /// `(ζ, α)` of the III.1 system given δ†.
    pub fn iii1_boundaries(&self, dd: f64) -> Result<(f64, f64)> {
        if self.k >= 0.0 {
            return Err(SwitchError::precondition("case III.1 needs K < 0"));
        }
        let xa = self.zero_of(-self.r * self.k1);
        let alpha_hat = self.iii1_alpha_hat(dd)?;
        let ell = |a: f64| self.iii1_ell(a);
        let outer = |a: f64| -> Result<f64> { Ok(self.eq_g1(dd, ell(a)?, a)?.value) };
        let lo = alpha_hat.max(xa);
        let s_lo = outer(lo)?;
        let hi = expand_up(outer, s_lo, 2.0 * lo, "closed-mode switch-in (alpha)")?;
        let alpha = find_root_positive(outer, lo, hi, "closed-mode switch-in (alpha)")?;
        Ok((ell(alpha)?, alpha))
    }
}

pub fn solve_case_i1(_p: &Problem) -> Result<CaseSolve> {
    Ok(CaseSolve {
        boundaries: FreeBoundaries::default(),
        coefficients: Coefficients::default(),
        residuals: Vec::new(),
    })
}

pub fn solve_case_i2(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    if p.h0() >= cx.r * cx.k1 {
        return Err(SwitchError::precondition("case I.2 needs h(0) < rK1"));
    }
    let xa = cx.zero_of(-cx.r * cx.k1);
    let f = |a: f64| cx.eq_i2(a).map(|s| s.value);
    let hi = expand_up(f, -1.0, 2.0 * xa, "switch-in (alpha)")?;
    let alpha = find_root_positive(f, xa, hi, "switch-in (alpha)")?;
    let boundaries = FreeBoundaries {
        alpha: Some(alpha),
        ..Default::default()
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            b: Some(cx.coef_b(alpha)?),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::I2, &boundaries)?,
    })
}

pub fn solve_case_i3(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    let (r, k, k1) = (cx.r, cx.k, cx.k1);
    if !(k < 0.0 && p.h0() >= -r * k && p.h0() < r * k1 - r * k) {
        return Err(SwitchError::precondition(
            "case I.3 needs K < 0 and −rK ≤ h(0) < rK1 − rK",
        ));
    }
    let zeta_hat = cx.i3_zeta_hat()?;
    let ell = |z: f64| cx.i3_ell(z, zeta_hat);
    let outer = |z: f64| -> Result<f64> { Ok(cx.eq_f2(z, ell(z)?)?.value) };
    let s_hi = outer(zeta_hat)?;
    let lo = expand_down(
        outer,
        s_hi,
        0.5 * zeta_hat,
        "closed-mode slope matching (zeta)",
    )?;
    let zeta = find_root_positive(outer, lo, zeta_hat, "closed-mode slope matching (zeta)")?;
    let alpha = ell(zeta)?;
    let (d1, d2) = cx.deltas(zeta);
    let boundaries = FreeBoundaries {
        zeta: Some(zeta),
        alpha: Some(alpha),
        ..Default::default()
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            delta1: Some(d1),
            delta2: Some(d2),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::I3, &boundaries)?,
    })
}

pub fn solve_case_ii1(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    let (beta, alpha) = cx.ii1_boundaries()?;
    let boundaries = FreeBoundaries {
        beta: Some(beta),
        alpha: Some(alpha),
        ..Default::default()
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            a: Some(cx.coef_a_lower(beta, cx.r * cx.k0)?),
            b: Some(cx.coef_b(alpha)?),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::II1, &boundaries)?,
    })
}

pub fn solve_case_ii2(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    let dd = cx.require_delta_dagger()?;
    let alpha = cx.ii2_alpha(dd)?;
    let boundaries = FreeBoundaries {
        delta: Some(dd),
        alpha: Some(alpha),
        ..Default::default()
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            a: Some(cx.coef_a_lower(dd, cx.r * cx.k)?),
            b: Some(cx.coef_b(alpha)?),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::II2, &boundaries)?,
    })
}

pub fn solve_case_ii3(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    if cx.k >= cx.k0 {
        return Err(SwitchError::precondition("case II.3 needs K < K0"));
    }
    let (beta, alpha) = cx.ii1_boundaries()?;
    let ell = |g: f64| cx.ii3_ell(g);
    let outer = |g: f64| -> Result<f64> { Ok(cx.eq_big_f2(ell(g)?, g, beta)?.value) };
    let s_hi = outer(beta)?;
    if !(s_hi > 0.0) {
        return Err(SwitchError::precondition(
            "case II.3 needs K0 below the switch-out threshold K0*",
        ));
    }
    let lo = expand_down(
        outer,
        s_hi,
        0.5 * beta,
        "open-mode switch-out entry (gamma)",
    )?;
    let gamma = find_root_positive(outer, lo, beta, "open-mode switch-out entry (gamma)")?;
    let delta = ell(gamma)?;
    let rk0 = cx.r * cx.k0;
    let boundaries = FreeBoundaries {
        delta: Some(delta),
        gamma: Some(gamma),
        beta: Some(beta),
        alpha: Some(alpha),
        ..Default::default()
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            a: Some(cx.coef_a_lower(beta, rk0)?),
            b: Some(cx.coef_b(alpha)?),
            gamma1: Some(cx.coef_a_lower(gamma, rk0)?),
            gamma2: Some(-cx.c * p.int_n(gamma, beta, rk0)?),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::II3, &boundaries)?,
    })
}

pub fn solve_case_iii1(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    let dd = cx.require_delta_dagger()?;
    let (zeta, alpha) = cx.iii1_boundaries(dd)?;
    let (d1, d2) = cx.deltas(zeta);
    let boundaries = FreeBoundaries {
        zeta: Some(zeta),
        delta: Some(dd),
        alpha: Some(alpha),
        ..Default::default()
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            a: Some(cx.coef_a_lower(dd, cx.r * cx.k)?),
            delta1: Some(d1),
            delta2: Some(d2),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::III1, &boundaries)?,
    })
}

pub fn solve_case_iii2(p: &Problem) -> Result<CaseSolve> {
    let cx = Ctx::new(p);
    let (r, k, k0) = (cx.r, cx.k, cx.k0);
    if k >= 0.0 {
        return Err(SwitchError::precondition("case III.2 needs K < 0"));
    }
    let (beta, alpha) = cx.ii1_boundaries()?;
    let tail_k0 = p.int_n(beta, f64::INFINITY, r * k0)?;
    let zeta_ratio = -cx.n * tail_k0 / (r * k);
    let gamma_ratio =
        (cx.n * p.int_n(beta, f64::INFINITY, r * k)? + r * (k0 - k) / cx.xn(beta)) / (r * (k0 - k));
    if !(zeta_ratio > 0.0 && gamma_ratio > 0.0) {
        return Err(SwitchError::precondition(
            "case III.2 landmarks are undefined for these data",
        ));
    }
    let zeta = zeta_ratio.powf(-1.0 / cx.n);
    let gamma_hat = gamma_ratio.powf(-1.0 / cx.n);
    let ell = |g: f64| cx.iii2_ell(g, beta, gamma_hat);
    let outer = |g: f64| -> Result<f64> { Ok(cx.eq_g5(zeta, ell(g)?, g)?.value) };
    let gamma = find_root_positive(outer, gamma_hat, beta, "open-mode switch-out entry (gamma)")?;
    let delta = ell(gamma)?;
    let (d1, d2) = cx.deltas(zeta);
    let rk = r * k;
    let boundaries = FreeBoundaries {
        zeta: Some(zeta),
        delta: Some(delta),
        gamma: Some(gamma),
        beta: Some(beta),
        alpha: Some(alpha),
    };
    Ok(CaseSolve {
        boundaries,
        coefficients: Coefficients {
            // Equal to Δ₁ − κ∫_0^α s^{-m-1}[h − rK₁] on the E₁ curve, without
            // the cancellation when α is large.
            a: Some(d1 + cx.coef_a_lower(beta, r * k0)?),
            gamma1: Some(cx.coef_a_lower(delta, rk)?),
            gamma2: Some(-cx.c * p.int_n(delta, f64::INFINITY, rk)?),
            delta1: Some(d1),
            delta2: Some(d2),
            ..Default::default()
        },
        residuals: residuals(p, CaseId::III2, &boundaries)?,
    })
}

/// Dispatches to the solver of `case`.
pub fn solve_case(p: &Problem, case: CaseId) -> Result<CaseSolve> {
    match case {
        CaseId::I1 => solve_case_i1(p),
        CaseId::I2 => solve_case_i2(p),
        CaseId::I3 => solve_case_i3(p),
        CaseId::II1 => solve_case_ii1(p),
        CaseId::II2 => solve_case_ii2(p),
        CaseId::II3 => solve_case_ii3(p),
        CaseId::III1 => solve_case_iii1(p),
        CaseId::III2 => solve_case_iii2(p),
    }
}

/// Defining equations of `case` evaluated at `b`.
pub fn residuals(p: &Problem, case: CaseId, b: &FreeBoundaries) -> Result<Vec<Residual>> {
    let cx = Ctx::new(p);
    let get = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| SwitchError::precondition(format!("case {case} needs boundary {name}")))
    };
    let mut out = Vec::new();
    match case {
        CaseId::I1 => {}
        CaseId::I2 => {
            let a = get(b.alpha, "alpha")?;
            out.push(cx.eq_i2(a)?.residual("switch-in"));
        }
        CaseId::I3 => {
            let (z, a) = (get(b.zeta, "zeta")?, get(b.alpha, "alpha")?);
            out.push(cx.eq_f1(z, a)?.residual("closed-mode value matching"));
            out.push(cx.eq_f2(z, a)?.residual("closed-mode slope matching"));
        }
        CaseId::II1 | CaseId::II3 | CaseId::III2 => {
            let (be, a) = (get(b.beta, "beta")?, get(b.alpha, "alpha")?);
            out.push(cx.eq_e1(be, a)?.residual("switch-out value matching"));
            out.push(cx.eq_e2(be, a)?.residual("switch-out slope matching"));
            if case == CaseId::II3 {
                let (d, g) = (get(b.delta, "delta")?, get(b.gamma, "gamma")?);
                out.push(cx.eq_big_f1(d, g)?.residual("open-mode abandonment value"));
                out.push(
                    cx.eq_big_f2(d, g, be)?
                        .residual("open-mode abandonment slope"),
                );
            }
            if case == CaseId::III2 {
                let (z, d, g) = (
                    get(b.zeta, "zeta")?,
                    get(b.delta, "delta")?,
                    get(b.gamma, "gamma")?,
                );
                out.push(cx.eq_g4(z, be)?.residual("closed-mode abandonment"));
                out.push(cx.eq_g3(d, g, be)?.residual("open-mode abandonment slope"));
                out.push(cx.eq_g5(z, d, g)?.residual("open-mode abandonment value"));
            }
        }
        CaseId::II2 => {
            let (d, a) = (get(b.delta, "delta")?, get(b.alpha, "alpha")?);
            out.push(cx.eq_dagger(d)?.residual("open-mode abandonment"));
            out.push(cx.eq_ii2(d, a)?.residual("switch-in with open abandonment"));
        }
        CaseId::III1 => {
            let (z, d, a) = (
                get(b.zeta, "zeta")?,
                get(b.delta, "delta")?,
                get(b.alpha, "alpha")?,
            );
            out.push(cx.eq_dagger(d)?.residual("open-mode abandonment"));
            out.push(cx.eq_g1(d, z, a)?.residual("closed-mode value matching"));
            out.push(cx.eq_g2(d, z, a)?.residual("closed-mode slope matching"));
        }
    }
    Ok(out)
}
