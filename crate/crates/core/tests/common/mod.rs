//! Shared test support: case-targeted instance generation and independent
//! numerical oracles (quadrature instead of closed-form antiderivatives).
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchopt::classify::{
    compute_k0_dagger, compute_k0_star, compute_k1_dagger, solve_delta_dagger,
};
use switchopt::{CaseId, CostParams, MarketParams, PayoffSpec, Problem, ProblemData};

pub fn market(b: f64, sigma2: f64, r: f64) -> MarketParams {
    MarketParams::new(b, sigma2, r).unwrap()
}

pub fn data(market: MarketParams, payoff: PayoffSpec, k1: f64, k0: f64, k: f64) -> ProblemData {
    ProblemData {
        market,
        costs: CostParams::new(k1, k0, k).unwrap(),
        payoff,
    }
}

pub fn problem(d: &ProblemData) -> Problem {
    Problem::new(d.clone()).unwrap()
}

/// `b = 0, σ² = 1/2, r = 1`, so `m = −1`, `n = 2`.
pub fn unit_market() -> MarketParams {
    market(0.0, 0.5, 1.0)
}

pub fn canonical_i2() -> ProblemData {
    data(unit_market(), PayoffSpec::linear(0.0), 1.0, 1.0, 0.0)
}

/// Hand-picked instance of every case on the unit market with `h(x) = x + c₀`.
pub fn representative(case: CaseId) -> ProblemData {
    let lin = PayoffSpec::linear;
    let mk = |c0: f64, k1: f64, k0: f64, k: f64| data(unit_market(), lin(c0), k1, k0, k);
    match case {
        CaseId::I1 => mk(2.0, 1.0, 1.0, 0.0),
        CaseId::I2 => mk(0.0, 1.0, 1.0, 0.0),
        CaseId::I3 => mk(0.5, 1.0, 1.0, -0.5),
        CaseId::II1 => mk(-3.0, 0.25, 0.25, 1.0),
        CaseId::II2 => mk(-3.0, 0.25, 2.0, 0.0),
        CaseId::II3 => mk(-3.0, 0.25, 0.2, 0.0),
        CaseId::III1 => mk(-2.0, 1.0, 0.5, -1.0),
        CaseId::III2 => mk(-3.0, 0.1, 0.05, -0.5),
    }
}

/// Rescales time by `lambda`: rates and the payoff are multiplied, values
/// and free boundaries are unchanged.
pub fn rescale_time(mut d: ProblemData, lambda: f64) -> ProblemData {
    d.market.b *= lambda;
    d.market.sigma2 *= lambda;
    d.market.r *= lambda;
    for t in d.payoff.power_terms.iter_mut() {
        t.weight *= lambda;
    }
    for s in d.payoff.step_terms.iter_mut() {
        s.jump *= lambda;
    }
    d.payoff.constant *= lambda;
    d
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_market(rng: &mut ChaCha8Rng) -> MarketParams {
    let r = uniform(rng, 0.05, 0.5);
    let s2 = uniform(rng, 0.02, 0.5);
    let b = uniform(rng, -0.5, 0.6) * r;
    market(b, s2, r)
}

/// Increasing payoff with zero constant: one or two power terms and an
/// optional step.
fn random_shape(rng: &mut ChaCha8Rng, n: f64) -> PayoffSpec {
    let cap = n.min(2.0);
    let mut h = PayoffSpec::power(uniform(rng, 0.5, 2.0), uniform(rng, 0.3, 0.9) * cap);
    if rng.random::<f64>() < 0.3 {
        h = h.with_power(uniform(rng, 0.1, 1.0), uniform(rng, 0.2, 0.95) * cap);
    }
    if rng.random::<f64>() < 0.3 {
        h = h.with_step(uniform(rng, 0.05, 0.5), uniform(rng, 0.3, 3.0));
    }
    h
}

fn build(
    m: MarketParams,
    h: &PayoffSpec,
    c0: f64,
    k1: f64,
    k0: f64,
    k: f64,
) -> Option<ProblemData> {
    let d = ProblemData {
        market: m,
        costs: CostParams::new(k1, k0, k).ok()?,
        payoff: h.clone().with_constant(c0),
    };
    Problem::new(d.clone()).ok().map(|_| d)
}

/// A random valid instance aimed at `target`. Returns `None` when the draw
/// cannot reach the target (the caller redraws).
pub fn try_instance(target: CaseId, rng: &mut ChaCha8Rng) -> Option<ProblemData> {
    let m = random_market(rng);
    let n = switchopt::compute_roots(&m).n;
    let r = m.r;
    let h = random_shape(rng, n);
    let k1 = uniform(rng, 0.1, 2.0);
    match target {
        CaseId::I1 => {
            let k = uniform(rng, -1.0, 1.0);
            let k0 = uniform(rng, 0.1, 2.0);
            let base = if k >= 0.0 { r * k1 } else { r * k1 - r * k };
            build(m, &h, base + r * uniform(rng, 0.0, 1.0), k1, k0, k)
        }
        CaseId::I2 => {
            let k = uniform(rng, 0.0, 1.0);
            let k0 = uniform(rng, 0.1, 2.0);
            let lo = (-r * k0).max(-r * k);
            build(m, &h, uniform(rng, lo, r * k1), k1, k0, k)
        }
        CaseId::I3 => {
            let k = uniform(rng, -1.0, -0.05);
            let k0 = uniform(rng, 0.1, 2.0);
            build(m, &h, uniform(rng, -r * k, r * k1 - r * k), k1, k0, k)
        }
        CaseId::II1 => {
            let k = uniform(rng, 0.5, 2.0);
            let k0 = uniform(rng, 0.05, 1.0) * k;
            build(m, &h, -r * k0 - r * uniform(rng, 0.1, 2.0), k1, k0, k)
        }
        CaseId::II2 | CaseId::II3 => {
            let k = uniform(rng, 0.0, 1.0);
            if target == CaseId::II2 && rng.random::<f64>() < 0.3 {
                // −rK₀ ≤ h(0) < −rK
                let k0 = k + uniform(rng, 0.05, 2.0);
                return build(m, &h, uniform(rng, -r * k0, -r * k), k1, k0, k);
            }
            let c0 = -r * (k + uniform(rng, 0.5, 3.0));
            let probe = build(m, &h, c0, k1, k + 0.01, k)?;
            let (_, k0_star) = compute_k0_star(&problem(&probe)).expect("K0* on a valid branch");
            let top = -c0 / r;
            let k0 = if target == CaseId::II3 {
                k + uniform(rng, 0.05, 0.95) * (k0_star - k)
            } else {
                k0_star + uniform(rng, 0.0, 0.95) * (top - k0_star)
            };
            build(m, &h, c0, k1, k0, k)
        }
        CaseId::III1 | CaseId::III2 => {
            let k = uniform(rng, -1.0, -0.05);
            if target == CaseId::III1 && rng.random::<f64>() < 0.3 {
                // −rK₀ ≤ h(0) < −rK
                let k0 = uniform(rng, 0.1, 2.0);
                return build(m, &h, uniform(rng, -r * k0, -r * k), k1, k0, k);
            }
            let c0 = -r * uniform(rng, 0.5, 3.0);
            let top = -c0 / r;
            let probe = build(m, &h, c0, k1, 0.5 * top, k)?;
            let p = problem(&probe);
            let dd = solve_delta_dagger(&p).expect("delta_dagger")?;
            if p.h(dd) >= 0.0 {
                return if target == CaseId::III1 {
                    Some(probe)
                } else {
                    None
                };
            }
            let k1_dagger = compute_k1_dagger(&p).expect("K1† on a valid branch");
            let k1 = if target == CaseId::III1 && rng.random::<f64>() < 0.5 {
                k1_dagger * uniform(rng, 1.05, 3.0)
            } else {
                k1_dagger * uniform(rng, 0.1, 0.9)
            };
            let probe = build(m, &h, c0, k1, 0.5 * top, k)?;
            if k1 >= k1_dagger {
                return Some(probe);
            }
            let (_, k0_dagger) =
                compute_k0_dagger(&problem(&probe)).expect("K0† on a valid branch");
            let k0 = if target == CaseId::III2 {
                k0_dagger.min(top) * uniform(rng, 0.1, 0.95)
            } else {
                if k0_dagger >= top {
                    return None;
                }
                k0_dagger + uniform(rng, 0.0, 0.95) * (top - k0_dagger)
            };
            build(m, &h, c0, k1, k0, k)
        }
    }
}

/// A valid instance aimed at `target`, redrawing until one is produced.
pub fn instance(target: CaseId, rng: &mut ChaCha8Rng) -> ProblemData {
    for _ in 0..1000 {
        if let Some(d) = try_instance(target, rng) {
            if in_domain(&d) {
                return d;
            }
        }
    }
    panic!("could not generate an instance for {target}");
}

/// Keeps the fuzz domain to instances whose free boundaries lie in
/// `[1e-6, 1e6]`. Instances the solver rejects are kept so failures surface.
fn in_domain(d: &ProblemData) -> bool {
    match switchopt::build_solution(d) {
        Ok(sol) => sol
            .boundaries
            .named()
            .iter()
            .all(|(_, v)| (1e-6..=1e6).contains(v)),
        Err(_) => true,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Quadrature oracles.

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `∫_a^b f(u) du` by composite 5-point Gauss–Legendre.
pub fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * w;
        for (t, wt) in GL5 {
            s += wt * f(mid + 0.5 * w * t);
        }
    }
    0.5 * w * s
}

/// `∫_lo^hi s^{-k-1}[h(s) + shift] ds` by quadrature in `u = ln s`, split at
/// payoff jumps. `lo = 0` and `hi = ∞` are truncated where the integrand is
/// below double precision.
pub fn quad_weighted(h: &PayoffSpec, k: f64, lo: f64, hi: f64, shift: f64) -> f64 {
    let f = |u: f64| (-k * u).exp() * (h.eval(u.exp()) + shift);
    // Slowest exponential decay of the integrand at the truncated end.
    let theta_max = h
        .power_terms
        .iter()
        .filter(|t| t.weight != 0.0)
        .fold(0.0f64, |a, t| a.max(t.exponent));
    let u_lo = if lo == 0.0 {
        hi.min(1.0).ln() - 40.0 / (-k)
    } else {
        lo.ln()
    };
    let u_hi = if hi.is_infinite() {
        lo.max(1.0).ln() + 40.0 / (k - theta_max)
    } else {
        hi.ln()
    };
    let mut cuts = vec![u_lo];
    for a in h.jump_points() {
        let ua = a.ln();
        if ua > u_lo && ua < u_hi {
            cuts.push(ua);
        }
    }
    cuts.push(u_hi);
    cuts.windows(2).map(|w| gauss(&f, w[0], w[1], 4000)).sum()
}

/// `R_h` from its definition `κ[x^m ∫_0^x … + x^n ∫_x^∞ …]` with quadrature.
pub fn quad_resolvent(p: &Problem, x: f64) -> f64 {
    let roots = p.roots();
    let h = p.payoff();
    p.kappa()
        * (x.powf(roots.m) * quad_weighted(h, roots.m, 0.0, x, 0.0)
            + x.powf(roots.n) * quad_weighted(h, roots.n, x, f64::INFINITY, 0.0))
}

/// Plain bisection on a sign change.
pub fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(
        flo * f(hi) <= 0.0,
        "oracle bracket [{lo}, {hi}] has no sign change"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Log-spaced points.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
