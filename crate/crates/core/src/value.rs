//! Piecewise closed-form value functions, region map and optimal action.

use serde::{Deserialize, Serialize};

use crate::classify::{classify, CaseId, Thresholds};
use crate::error::{Result, SwitchError};
use crate::model::{pow, Problem, ProblemData};
use crate::solver::{solve_case, Coefficients, FreeBoundaries};

/// `+∞` is written as JSON `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A sub-interval of `(0, ∞)` with explicit endpoint closedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(with = "inf_as_null")]
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    /// `(lo, hi)`.
    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    /// `(lo, hi]`.
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: true,
        }
    }

    /// `[lo, hi)`.
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    /// `[lo, hi]`.
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    /// `(0, ∞)`.
    pub fn all() -> Self {
        Self::open(0.0, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }
}

/// Closed form of one piece of a value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum PieceForm {
    /// The abandonment value `−K`.
    Constant { value: f64 },
    /// `a x^m + b x^n + offset`.
    PowerPair { a: f64, b: f64, offset: f64 },
    /// `a x^m + b x^n + R_h(x) + offset`.
    ResolventPlus { a: f64, b: f64, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub interval: Interval,
    #[serde(flatten)]
    pub form: PieceForm,
}

impl Piece {
    fn new(interval: Interval, form: PieceForm) -> Self {
        Self { interval, form }
    }

    /// Value (`order` 0) or derivative of the closed form at `x`, regardless
    /// of whether `x` lies in the piece's interval.
    pub fn eval_form(&self, p: &Problem, x: f64, order: u8) -> f64 {
        let roots = p.roots();
        let (m, n) = (roots.m, roots.n);
        let homog = |a: f64, b: f64| match order {
            0 => a * pow(x, m) + b * pow(x, n),
            1 => a * m * pow(x, m - 1.0) + b * n * pow(x, n - 1.0),
            _ => a * m * (m - 1.0) * pow(x, m - 2.0) + b * n * (n - 1.0) * pow(x, n - 2.0),
        };
        let off = |v: f64| if order == 0 { v } else { 0.0 };
        match self.form {
            PieceForm::Constant { value } => off(value),
            PieceForm::PowerPair { a, b, offset } => homog(a, b) + off(offset),
            PieceForm::ResolventPlus { a, b, offset } => {
                homog(a, b) + p.resolvent(x, order) + off(offset)
            }
        }
    }
}

/// The five action regions for both modes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionMap {
    /// Production: open and keep running.
    #[serde(rename = "P")]
    pub production: Vec<Interval>,
    /// Waiting: closed and stay closed.
    #[serde(rename = "W")]
    pub waiting: Vec<Interval>,
    #[serde(rename = "S_out")]
    pub switch_out: Vec<Interval>,
    #[serde(rename = "S_in")]
    pub switch_in: Vec<Interval>,
    #[serde(rename = "A0")]
    pub abandon_closed: Vec<Interval>,
    #[serde(rename = "A1")]
    pub abandon_open: Vec<Interval>,
}

fn need(v: Option<f64>, name: &str, case: CaseId) -> Result<f64> {
    v.ok_or_else(|| SwitchError::precondition(format!("case {case} needs boundary {name}")))
}

impl RegionMap {
    /// Regions of `case` for the given thresholds.
    pub fn for_case(case: CaseId, b: &FreeBoundaries) -> Result<Self> {
        let inf = f64::INFINITY;
        let mut rm = RegionMap::default();
        // Open mode.
        match case {
            CaseId::I1 | CaseId::I2 | CaseId::I3 => rm.production.push(Interval::all()),
            CaseId::II1 => {
                let beta = need(b.beta, "beta", case)?;
                rm.switch_out.push(Interval::open_closed(0.0, beta));
                rm.production.push(Interval::open(beta, inf));
            }
            CaseId::II2 | CaseId::III1 => {
                let d = need(b.delta, "delta", case)?;
                rm.abandon_open.push(Interval::open_closed(0.0, d));
                rm.production.push(Interval::open(d, inf));
            }
            CaseId::II3 | CaseId::III2 => {
                let d = need(b.delta, "delta", case)?;
                let g = need(b.gamma, "gamma", case)?;
                let beta = need(b.beta, "beta", case)?;
                rm.abandon_open.push(Interval::open_closed(0.0, d));
                rm.production.push(Interval::open(d, g));
                rm.switch_out.push(Interval::closed(g, beta));
                rm.production.push(Interval::open(beta, inf));
            }
        }
        // Closed mode.
        match case {
            CaseId::I1 => rm.switch_in.push(Interval::all()),
            CaseId::I2 | CaseId::II1 | CaseId::II2 | CaseId::II3 => {
                let a = need(b.alpha, "alpha", case)?;
                rm.waiting.push(Interval::open(0.0, a));
                rm.switch_in.push(Interval::closed_open(a, inf));
            }
            CaseId::I3 | CaseId::III1 | CaseId::III2 => {
                let z = need(b.zeta, "zeta", case)?;
                let a = need(b.alpha, "alpha", case)?;
                rm.abandon_closed.push(Interval::open_closed(0.0, z));
                rm.waiting.push(Interval::open(z, a));
                rm.switch_in.push(Interval::closed_open(a, inf));
            }
        }
        Ok(rm)
    }

    fn in_any(list: &[Interval], x: f64) -> bool {
        list.iter().any(|i| i.contains(x))
    }

    /// Short name (`P`, `S_out`, `A1`, `W`, `S_in`, `A0`) of the region
    /// holding `(z, x)`.
    pub fn label(&self, z: u8, x: f64) -> &'static str {
        match (z, optimal_action_in(self, z, x)) {
            (1, Action::Abandon) => "A1",
            (1, Action::SwitchTo(_)) => "S_out",
            (1, Action::Continue) => "P",
            (_, Action::Abandon) => "A0",
            (_, Action::SwitchTo(_)) => "S_in",
            (_, Action::Continue) => "W",
        }
    }
}

/// What the optimal policy does in mode `z` at state `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Continue,
    SwitchTo(u8),
    Abandon,
}

/// A solved instance: classification, boundaries, coefficients, the two
/// value functions as closed-form pieces and the region map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub data: ProblemData,
    pub case: CaseId,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub boundaries: FreeBoundaries,
    pub coefficients: Coefficients,
    pub w1: Vec<Piece>,
    pub w0: Vec<Piece>,
    pub regions: RegionMap,
    #[serde(skip)]
    problem: Option<Problem>,
}

/// Classify, solve and assemble.
pub fn build_solution(data: &ProblemData) -> Result<Solution> {
    let p = Problem::new(data.clone())?;
    let cls = classify(&p)?;
    let solved = solve_case(&p, cls.case)?;
    Solution::assemble(
        &p,
        cls.case,
        cls.thresholds,
        solved.boundaries,
        solved.coefficients,
    )
}

/// Solve `p` as if it belonged to `case`, without classifying. The result is
/// generally not the value function; it is used for negative controls.
pub fn build_solution_forced(p: &Problem, case: CaseId) -> Result<Solution> {
    let solved = solve_case(p, case)?;
    Solution::assemble(
        p,
        case,
        Thresholds::default(),
        solved.boundaries,
        solved.coefficients,
    )
}

impl Solution {
    /// Builds the pieces of `w₁`, `w₀` from boundaries and coefficients.
    pub fn assemble(
        p: &Problem,
        case: CaseId,
        thresholds: Thresholds,
        b: FreeBoundaries,
        c: Coefficients,
    ) -> Result<Self> {
        let inf = f64::INFINITY;
        let costs = p.costs();
        let (k1, k0, k) = (costs.open_cost, costs.close_cost, costs.abandon_cost);
        let coef = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                SwitchError::precondition(format!("case {case} needs coefficient {name}"))
            })
        };
        let res = |a: f64, b: f64, offset: f64| PieceForm::ResolventPlus { a, b, offset };
        let pow2 = |a: f64, b: f64, offset: f64| PieceForm::PowerPair { a, b, offset };
        let abandon = PieceForm::Constant { value: -k };

        let w1 = match case {
            CaseId::I1 | CaseId::I2 | CaseId::I3 => {
                vec![Piece::new(Interval::all(), res(0.0, 0.0, 0.0))]
            }
            CaseId::II1 => {
                let beta = need(b.beta, "beta", case)?;
                vec![
                    Piece::new(
                        Interval::open_closed(0.0, beta),
                        pow2(0.0, coef(c.b, "B")?, -k0),
                    ),
                    Piece::new(Interval::open(beta, inf), res(coef(c.a, "A")?, 0.0, 0.0)),
                ]
            }
            CaseId::II2 | CaseId::III1 => {
                let d = need(b.delta, "delta", case)?;
                vec![
                    Piece::new(Interval::open_closed(0.0, d), abandon),
                    Piece::new(Interval::open(d, inf), res(coef(c.a, "A")?, 0.0, 0.0)),
                ]
            }
            CaseId::II3 | CaseId::III2 => {
                let d = need(b.delta, "delta", case)?;
                let g = need(b.gamma, "gamma", case)?;
                let beta = need(b.beta, "beta", case)?;
                let out = if case == CaseId::II3 {
                    pow2(0.0, coef(c.b, "B")?, -k0)
                } else {
                    pow2(coef(c.delta1, "Delta1")?, coef(c.delta2, "Delta2")?, -k0)
                };
                vec![
                    Piece::new(Interval::open_closed(0.0, d), abandon),
                    Piece::new(
                        Interval::open(d, g),
                        res(coef(c.gamma1, "Gamma1")?, coef(c.gamma2, "Gamma2")?, 0.0),
                    ),
                    Piece::new(Interval::closed(g, beta), out),
                    Piece::new(Interval::open(beta, inf), res(coef(c.a, "A")?, 0.0, 0.0)),
                ]
            }
        };

        let w0 = match case {
            CaseId::I1 => vec![Piece::new(Interval::all(), res(0.0, 0.0, -k1))],
            CaseId::I2 => {
                let a = need(b.alpha, "alpha", case)?;
                vec![
                    Piece::new(Interval::open(0.0, a), pow2(0.0, coef(c.b, "B")?, 0.0)),
                    Piece::new(Interval::closed_open(a, inf), res(0.0, 0.0, -k1)),
                ]
            }
            CaseId::II1 | CaseId::II2 | CaseId::II3 => {
                let a = need(b.alpha, "alpha", case)?;
                vec![
                    Piece::new(Interval::open(0.0, a), pow2(0.0, coef(c.b, "B")?, 0.0)),
                    Piece::new(
                        Interval::closed_open(a, inf),
                        res(coef(c.a, "A")?, 0.0, -k1),
                    ),
                ]
            }
            CaseId::I3 | CaseId::III1 | CaseId::III2 => {
                let z = need(b.zeta, "zeta", case)?;
                let a = need(b.alpha, "alpha", case)?;
                let a_coef = if case == CaseId::I3 {
                    0.0
                } else {
                    coef(c.a, "A")?
                };
                vec![
                    Piece::new(Interval::open_closed(0.0, z), abandon),
                    Piece::new(
                        Interval::open(z, a),
                        pow2(coef(c.delta1, "Delta1")?, coef(c.delta2, "Delta2")?, 0.0),
                    ),
                    Piece::new(Interval::closed_open(a, inf), res(a_coef, 0.0, -k1)),
                ]
            }
        };

        Ok(Self {
            data: p.data().clone(),
            case,
            thresholds,
            boundaries: b,
            coefficients: c,
            w1,
            w0,
            regions: RegionMap::for_case(case, &b)?,
            problem: Some(p.clone()),
        })
    }

    /// Parses a solution previously written by [`to_json`](Self::to_json).
    pub fn from_json(text: &str) -> Result<Self> {
        let mut sol: Solution = serde_json::from_str(text)
            .map_err(|e| SwitchError::invalid(format!("malformed solution JSON: {e}")))?;
        sol.problem = Some(Problem::new(sol.data.clone())?);
        Ok(sol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution is always serialisable")
    }

    /// The validated problem this solution belongs to.
    pub fn problem(&self) -> &Problem {
        self.problem
            .as_ref()
            .expect("solutions are constructed with their problem")
    }

    pub fn pieces(&self, z: u8) -> &[Piece] {
        if z == 1 {
            &self.w1
        } else {
            &self.w0
        }
    }

    /// Interior piece endpoints of `w_z`.
    pub fn breakpoints(&self, z: u8) -> Vec<f64> {
        let pieces = self.pieces(z);
        pieces.iter().skip(1).map(|p| p.interval.lo).collect()
    }

    fn piece_at(&self, z: u8, x: f64) -> &Piece {
        let pieces = self.pieces(z);
        pieces
            .iter()
            .find(|p| p.interval.contains(x))
            .unwrap_or(&pieces[pieces.len() - 1])
    }

    /// `w_z(x)` (`order` 0), `w_z′(x)` (1) or `w_z″(x)` (2).
    pub fn eval(&self, z: u8, x: f64, order: u8) -> Result<f64> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(SwitchError::invalid(format!(
                "state {x} must be positive and finite"
            )));
        }
        if order > 2 {
            return Err(SwitchError::invalid("derivative order must be 0, 1 or 2"));
        }
        let piece = self.piece_at(z, x);
        if order == 2 {
            if self.breakpoints(z).contains(&x) {
                return Err(SwitchError::UndefinedSecondDerivative(x));
            }
            if matches!(piece.form, PieceForm::ResolventPlus { .. })
                && self.data.payoff.jump_points().contains(&x)
            {
                return Err(SwitchError::UndefinedSecondDerivative(x));
            }
        }
        Ok(piece.eval_form(self.problem(), x, order))
    }

    /// Optimal action in mode `z` at state `x`.
    pub fn optimal_action(&self, z: u8, x: f64) -> Action {
        optimal_action_in(&self.regions, z, x)
    }
}

/// Optimal action for an arbitrary region map (used with perturbed boundaries).
pub fn optimal_action_in(regions: &RegionMap, z: u8, x: f64) -> Action {
    if z == 1 {
        if RegionMap::in_any(&regions.abandon_open, x) {
            Action::Abandon
        } else if RegionMap::in_any(&regions.switch_out, x) {
            Action::SwitchTo(0)
        } else {
            Action::Continue
        }
    } else if RegionMap::in_any(&regions.abandon_closed, x) {
        Action::Abandon
    } else if RegionMap::in_any(&regions.switch_in, x) {
        Action::SwitchTo(1)
    } else {
        Action::Continue
    }
}
