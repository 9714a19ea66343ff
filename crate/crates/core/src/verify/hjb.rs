use serde::Serialize;

use crate::value::Solution;

/// Names of the six clauses, open mode first.
pub const CLAUSES: [&str; 6] = [
    "open_generator",
    "open_switch_out_gain",
    "open_abandon_gain",
    "closed_generator",
    "closed_switch_in_gain",
    "closed_abandon_gain",
];

/// Log-spaced sample points, optionally pushed off a set of points to avoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub log: bool,
}

impl GridSpec {
    /// `[min boundary / 10, max boundary · 10]` with 1000 log-spaced points.
    pub fn around(sol: &Solution) -> Self {
        let named = sol.boundaries.named();
        let (lo, hi) = if named.is_empty() {
            (1.0, 1.0)
        } else {
            named
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, v)| {
                    (lo.min(*v), hi.max(*v))
                })
        };
        Self {
            x_min: lo / 10.0,
            x_max: hi * 10.0,
            points: 1000,
            log: true,
        }
    }

    pub fn sample(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == 0 {
                    self.x_min
                } else if i == n - 1 {
                    self.x_max
                } else if self.log {
                    (self.x_min.ln() + t * (self.x_max / self.x_min).ln()).exp()
                } else {
                    self.x_min + t * (self.x_max - self.x_min)
                }
            })
            .collect()
    }

    /// [`sample`](Self::sample) with every point within `1e-9` relative of a
    /// point in `avoid` moved off it by that amount.
    pub fn sample_avoiding(&self, avoid: &[f64]) -> Vec<f64> {
        self.sample()
            .into_iter()
            .map(
                |x| match avoid.iter().find(|&&a| (x - a).abs() <= 1e-9 * a) {
                    Some(&a) => a * (1.0 + 1e-9),
                    None => x,
                },
            )
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbRow {
    pub x: f64,
    /// Clause values in the order of [`CLAUSES`].
    pub clauses: [f64; 6],
    /// `1 + |w_z| + |h|` for the mode each clause belongs to.
    pub scale: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbReport {
    pub grid: Vec<f64>,
    pub clause_names: [&'static str; 6],
    /// Largest raw value of each clause over the grid.
    pub clause_max: [f64; 6],
    /// Largest value of each clause divided by its scale.
    pub clause_max_scaled: [f64; 6],
    /// Smallest (over the grid) max-of-clauses per mode, divided by scale.
    pub pointwise_max_min_scaled: [f64; 2],
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<HjbRow>,
}

impl HjbReport {
    /// One CSV row per grid point: `x` followed by the six clause values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for c in CLAUSES {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{}", row.x));
            for v in row.clauses {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Tolerance factor applied to `1 + |w| + |h|`.
pub const HJB_TOL: f64 = 1e-8;

/// Evaluates both quasi-variational inequalities on the grid.
pub fn check_hjb(sol: &Solution, grid: &GridSpec) -> HjbReport {
    let p = sol.problem();
    let costs = p.costs();
    let (k1, k0, k) = (costs.open_cost, costs.close_cost, costs.abandon_cost);
    let mut avoid = sol.breakpoints(0);
    avoid.extend(sol.breakpoints(1));
    avoid.extend(p.payoff().jump_points());
    let xs = grid.sample_avoiding(&avoid);

    let mut clause_max = [f64::NEG_INFINITY; 6];
    let mut clause_max_scaled = [f64::NEG_INFINITY; 6];
    let mut pointwise_min = [f64::INFINITY; 2];
    let mut pass = true;
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let h = p.h(x);
        let eval = |z: u8, order: u8| sol.eval(z, x, order).unwrap_or(f64::NAN);
        let (w1, d1, dd1) = (eval(1, 0), eval(1, 1), eval(1, 2));
        let (w0, d0, dd0) = (eval(0, 0), eval(0, 1), eval(0, 2));
        let clauses = [
            p.generator(x, w1, d1, dd1) + h,
            w0 - w1 - k0,
            -w1 - k,
            p.generator(x, w0, d0, dd0),
            w1 - w0 - k1,
            -w0 - k,
        ];
        let scale = [1.0 + w1.abs() + h.abs(), 1.0 + w0.abs() + h.abs()];
        for (i, &c) in clauses.iter().enumerate() {
            let s = scale[i / 3];
            clause_max[i] = clause_max[i].max(c);
            clause_max_scaled[i] = clause_max_scaled[i].max(c / s);
            if !(c <= HJB_TOL * s) {
                pass = false;
            }
        }
        for mode in 0..2 {
            let top = clauses[3 * mode..3 * mode + 3]
                .iter()
                .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            pointwise_min[mode] = pointwise_min[mode].min(top / scale[mode]);
            if !(top >= -HJB_TOL * scale[mode]) {
                pass = false;
            }
        }
        rows.push(HjbRow { x, clauses, scale });
    }
    HjbReport {
        grid: xs,
        clause_names: CLAUSES,
        clause_max,
        clause_max_scaled,
        pointwise_max_min_scaled: pointwise_min,
        tolerance: HJB_TOL,
        pass,
        rows,
    }
}

/// Value and slope mismatch of `w_z` at one piece boundary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PastingGap {
    pub mode: u8,
    pub boundary: f64,
    pub value_gap: f64,
    pub slope_gap: f64,
    /// `1 + |w_z(boundary)|`.
    pub scale: f64,
}

impl PastingGap {
    pub fn passes(&self) -> bool {
        self.value_gap <= C1_TOL * self.scale && self.slope_gap <= C1_TOL * self.scale
    }
}

pub const C1_TOL: f64 = 1e-8;

/// Gaps between the adjoining closed forms at every interior boundary of
/// `w₁` and `w₀`.
pub fn check_c1(sol: &Solution) -> Vec<PastingGap> {
    let p = sol.problem();
    let mut out = Vec::new();
    for z in [1u8, 0] {
        for pair in sol.pieces(z).windows(2) {
            let x = pair[1].interval.lo;
            let left = pair[0].eval_form(p, x, 0);
            let right = pair[1].eval_form(p, x, 0);
            out.push(PastingGap {
                mode: z,
                boundary: x,
                value_gap: (left - right).abs(),
                slope_gap: (pair[0].eval_form(p, x, 1) - pair[1].eval_form(p, x, 1)).abs(),
                scale: 1.0 + left.abs().max(right.abs()),
            });
        }
    }
    out
}
