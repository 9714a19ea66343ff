use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwitchError};
use crate::model::Problem;
use crate::value::{optimal_action_in, Action, RegionMap, Solution};

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Also run a `2·dt` simulation on the same normals to estimate the
    /// time-discretisation bias.
    #[serde(default = "default_true")]
    pub discretization_probe: bool,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub threads: usize,
}

fn default_true() -> bool {
    true
}

impl McConfig {
    /// 10⁵ antithetic paths, `dt = 1e-3`, horizon `40/r`.
    pub fn for_rate(r: f64) -> Self {
        Self {
            paths: 100_000,
            dt: 1e-3,
            horizon: 40.0 / r,
            seed: 0,
            antithetic: true,
            discretization_probe: true,
            threads: threads_from_env(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(SwitchError::InvalidConfig(
                "paths must be at least 1".into(),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SwitchError::InvalidConfig("dt must be positive".into()));
        }
        if !(self.horizon >= 100.0 * self.dt && self.horizon.is_finite()) {
            return Err(SwitchError::InvalidConfig(
                "horizon must be finite and at least 100·dt".into(),
            ));
        }
        Ok(())
    }
}

/// Worker cap from `SWITCHOPT_THREADS` (0 or unset = automatic).
pub fn threads_from_env() -> usize {
    std::env::var("SWITCHOPT_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub mean: f64,
    pub stderr: f64,
    pub switch_count_mean: f64,
    pub abandon_fraction: f64,
    pub truncation_fraction: f64,
    /// Mean bound on the value lost by stopping paths at the horizon.
    pub truncation_bias: f64,
    /// Estimated time-discretisation bias (0 without the probe).
    pub discretization_bias: f64,
    /// `truncation_bias + discretization_bias`.
    pub bias_budget: f64,
    pub paths: usize,
}

/// Which boundary to move and by how much (relative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub boundary: String,
    pub relative: f64,
}

struct Sim<'a> {
    p: &'a Problem,
    regions: &'a RegionMap,
    drift: f64,
    vol: f64,
    r: f64,
    k1: f64,
    k0: f64,
    k: f64,
    horizon: f64,
}

#[derive(Clone, Copy)]
struct PathState {
    x: f64,
    h: f64,
    z: u8,
    disc: f64,
    t: f64,
    value: f64,
    switches: u32,
    alive: bool,
    abandoned: bool,
    truncated: bool,
    tail_bound: f64,
}

impl PathState {
    fn start(sim: &Sim, z: u8, x: f64) -> Self {
        let mut s = Self {
            x,
            h: 0.0,
            z,
            disc: 1.0,
            t: 0.0,
            value: 0.0,
            switches: 0,
            alive: true,
            abandoned: false,
            truncated: false,
            tail_bound: 0.0,
        };
        s.act(sim);
        if s.z == 1 {
            s.h = sim.p.h(x);
        }
        s
    }

    fn act(&mut self, sim: &Sim) {
        match optimal_action_in(sim.regions, self.z, self.x) {
            Action::Continue => {}
            Action::Abandon => {
                self.value -= self.disc * sim.k;
                self.alive = false;
                self.abandoned = true;
            }
            Action::SwitchTo(u) => {
                self.value -= self.disc * if u == 1 { sim.k1 } else { sim.k0 };
                self.z = u;
                if u == 1 {
                    self.h = sim.p.h(self.x);
                }
                self.switches += 1;
            }
        }
    }

    /// Advance by `dt` with log-increment `drift·dt + σ√(2dt)·ξ`.
    fn step(&mut self, sim: &Sim, k: &StepConsts, xi: f64, last: bool) {
        if !self.alive {
            return;
        }
        let x_new = self.x * (k.drift + k.vol * xi).exp();
        let disc_new = self.disc * k.decay;
        if self.z == 1 {
            let h_new = sim.p.h(x_new);
            self.value += 0.5 * k.dt * (self.disc * self.h + disc_new * h_new);
            self.h = h_new;
        }
        self.x = x_new;
        self.disc = disc_new;
        self.t += k.dt;
        self.act(sim);
        if last && self.alive {
            self.alive = false;
            self.truncated = true;
            let carry = sim.p.resolvent(self.x, 0).abs().max(sim.k.abs()) + sim.k1.max(sim.k0);
            self.tail_bound = self.disc * carry;
        }
    }
}

/// Per-step constants for one step size.
struct StepConsts {
    dt: f64,
    drift: f64,
    vol: f64,
    decay: f64,
}

impl StepConsts {
    fn new(sim: &Sim, dt: f64) -> Self {
        Self {
            dt,
            drift: sim.drift * dt,
            vol: sim.vol * (2.0 * dt).sqrt(),
            decay: (-sim.r * dt).exp(),
        }
    }
}

#[derive(Clone, Copy, Default)]
struct UnitOut {
    value: f64,
    coarse: f64,
    switches: f64,
    abandoned: f64,
    truncated: f64,
    tail: f64,
    weight: f64,
}

fn run_unit(sim: &Sim, cfg: &McConfig, z: u8, x0: f64, index: u64) -> UnitOut {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let steps = {
        let s = (sim.horizon / cfg.dt).ceil() as usize;
        s + s % 2
    };
    let fine_k = StepConsts::new(sim, cfg.dt);
    let coarse_k = StepConsts::new(sim, 2.0 * cfg.dt);
    let mut fine: Vec<PathState> = signs.iter().map(|_| PathState::start(sim, z, x0)).collect();
    let mut coarse: Vec<PathState> = if cfg.discretization_probe {
        fine.clone()
    } else {
        Vec::new()
    };
    let mut pending = 0.0;
    for i in 0..steps {
        if fine.iter().all(|s| !s.alive) && coarse.iter().all(|s| !s.alive) {
            break;
        }
        let xi: f64 = StandardNormal.sample(&mut rng);
        let last = i + 1 == steps;
        for (s, sign) in fine.iter_mut().zip(signs) {
            s.step(sim, &fine_k, sign * xi, last);
        }
        if cfg.discretization_probe {
            if i % 2 == 0 {
                pending = xi;
            } else {
                let xi2 = (pending + xi) / std::f64::consts::SQRT_2;
                for (s, sign) in coarse.iter_mut().zip(signs) {
                    s.step(sim, &coarse_k, sign * xi2, last);
                }
            }
        }
    }
    let k = fine.len() as f64;
    let avg = |f: &dyn Fn(&PathState) -> f64, v: &[PathState]| v.iter().map(f).sum::<f64>() / k;
    UnitOut {
        value: avg(&|s| s.value, &fine),
        coarse: if cfg.discretization_probe {
            avg(&|s| s.value, &coarse)
        } else {
            0.0
        },
        switches: avg(&|s| s.switches as f64, &fine),
        abandoned: avg(&|s| s.abandoned as u8 as f64, &fine),
        truncated: avg(&|s| s.truncated as u8 as f64, &fine),
        tail: avg(&|s| s.tail_bound, &fine),
        weight: k,
    }
}

/// Order-fixed pairwise summation.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn simulate_with(
    sol: &Solution,
    regions: &RegionMap,
    z: u8,
    x: f64,
    cfg: &McConfig,
) -> Result<McResult> {
    cfg.validate()?;
    if z > 1 {
        return Err(SwitchError::InvalidConfig("mode must be 0 or 1".into()));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(SwitchError::InvalidConfig(
            "initial state must be positive".into(),
        ));
    }
    let p = sol.problem();
    let market = p.market();
    let costs = p.costs();
    let sim = Sim {
        p,
        regions,
        drift: market.b - market.sigma2(),
        vol: market.sigma(),
        r: market.r,
        k1: costs.open_cost,
        k0: costs.close_cost,
        k: costs.abandon_cost,
        horizon: cfg.horizon,
    };
    let units = if cfg.antithetic {
        cfg.paths.div_ceil(2)
    } else {
        cfg.paths
    };
    let work = || -> Vec<UnitOut> {
        (0..units as u64)
            .into_par_iter()
            .map(|i| run_unit(&sim, cfg, z, x, i))
            .collect()
    };
    let outs = if cfg.threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| SwitchError::InvalidConfig(format!("thread pool: {e}")))?
            .install(work)
    };
    let col = |f: fn(&UnitOut) -> f64| outs.iter().map(f).collect::<Vec<f64>>();
    let (mean, stderr) = mean_and_stderr(&col(|u| u.value));
    let plain_mean = |f: fn(&UnitOut) -> f64| pairwise_sum(&col(f)) / units as f64;
    let truncation_bias = plain_mean(|u| u.tail);
    let discretization_bias = if cfg.discretization_probe {
        // Discrete monitoring error scales like √dt, so
        // bias(dt) ≈ (√2 + 1)·(mean(dt) − mean(2dt)).
        let (d, se) = mean_and_stderr(&col(|u| u.value - u.coarse));
        (std::f64::consts::SQRT_2 + 1.0) * (d.abs() + 3.0 * se)
    } else {
        0.0
    };
    Ok(McResult {
        mean,
        stderr,
        switch_count_mean: plain_mean(|u| u.switches),
        abandon_fraction: plain_mean(|u| u.abandoned),
        truncation_fraction: plain_mean(|u| u.truncated),
        truncation_bias,
        discretization_bias,
        bias_budget: truncation_bias + discretization_bias,
        paths: units * outs.first().map_or(1.0, |u| u.weight) as usize,
    })
}

/// Monte Carlo estimate of the performance of the optimal threshold policy
/// started in mode `z` at state `x`.
pub fn simulate_value(sol: &Solution, z: u8, x: f64, cfg: &McConfig) -> Result<McResult> {
    simulate_with(sol, &sol.regions, z, x, cfg)
}

/// Same as [`simulate_value`] with one free boundary moved by a relative amount.
pub fn simulate_perturbed(
    sol: &Solution,
    z: u8,
    x: f64,
    cfg: &McConfig,
    perturbation: &Perturbation,
) -> Result<McResult> {
    let mut b = sol.boundaries;
    let slot = b.get_mut(&perturbation.boundary).ok_or_else(|| {
        SwitchError::InvalidPerturbation(format!("unknown boundary `{}`", perturbation.boundary))
    })?;
    let v = slot.ok_or_else(|| {
        SwitchError::InvalidPerturbation(format!(
            "case {} has no boundary `{}`",
            sol.case, perturbation.boundary
        ))
    })?;
    if !(perturbation.relative > -1.0 && perturbation.relative.is_finite()) {
        return Err(SwitchError::InvalidPerturbation(
            "relative shift must exceed −1".into(),
        ));
    }
    *slot = Some(v * (1.0 + perturbation.relative));
    b.check_ordering(sol.case)
        .map_err(|e| SwitchError::InvalidPerturbation(e.to_string()))?;
    let regions = RegionMap::for_case(sol.case, &b)?;
    simulate_with(sol, &regions, z, x, cfg)
}
