//! Bistable nonlinearities and the constants derived from them.
//!
//! Outside `[0, 1]` every reaction is continued linearly with slope `f'(0)`
//! below zero and `f'(1)` above one, so comparison arguments never see the
//! polynomial blow up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactionError {
    #[error("invalid reaction: {0}")]
    Invalid(String),
    #[error("no admissible delta down to 1e-6 (degenerate reaction near a stable zero)")]
    ConstraintUnsatisfiable,
}

/// Scenario-file form of a reaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReactionSpec {
    Cubic { theta: f64 },
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Kind {
    Cubic { theta: f64 },
    Table(HermiteTable),
}

#[derive(Debug, Clone)]
pub struct Reaction {
    kind: Kind,
    pub theta1: f64,
    pub theta2: f64,
    pub fprime0: f64,
    pub fprime1: f64,
    /// max |f'| over [0, 1].
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallConstants {
    pub delta: f64,
    pub mu: f64,
}

/// Samples on Chebyshev-Lobatto nodes `x_j = (1 - cos(j pi / (n-1))) / 2`,
/// joined by C¹ cubic Hermite pieces. Node slopes come from local
/// five-point Lagrange differentiation, which is exact for quartics.
#[derive(Debug, Clone)]
struct HermiteTable {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

pub fn chebyshev_lobatto(n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    let mut x: Vec<f64> = (0..n)
        .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / m).cos()))
        .collect();
    x[0] = 0.0;
    x[n - 1] = 1.0;
    x
}

impl HermiteTable {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let x = chebyshev_lobatto(n);
        let width = 5.min(n);
        let d = (0..n)
            .map(|m| {
                let lo = m.saturating_sub(width / 2).min(n - width);
                let z = &x[lo..lo + width];
                let k0 = m - lo;
                let mut s = 0.0;
                for k in 0..width {
                    let w = if k == k0 {
                        (0..width).filter(|&l| l != k0).map(|l| 1.0 / (z[k0] - z[l])).sum()
                    } else {
                        let mut num = 1.0;
                        let mut den = 1.0;
                        for l in 0..width {
                            if l != k {
                                den *= z[k] - z[l];
                                if l != k0 {
                                    num *= z[k0] - z[l];
                                }
                            }
                        }
                        num / den
                    };
                    s += w * values[lo + k];
                }
                s
            })
            .collect();
        Self { x, y: values.to_vec(), d }
    }

    fn locate(&self, u: f64) -> (usize, f64, f64) {
        let n = self.x.len();
        let j = match self.x.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let w = self.x[j + 1] - self.x[j];
        (j, w, (u - self.x[j]) / w)
    }

    fn eval(&self, u: f64) -> f64 {
        let (j, w, t) = self.locate(u);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[j] + h10 * w * self.d[j] + h01 * self.y[j + 1] + h11 * w * self.d[j + 1]
    }

    fn eval_prime(&self, u: f64) -> f64 {
        let (j, w, t) = self.locate(u);
        let t2 = t * t;
        let g00 = 6.0 * t2 - 6.0 * t;
        let g10 = 3.0 * t2 - 4.0 * t + 1.0;
        let g01 = -6.0 * t2 + 6.0 * t;
        let g11 = 3.0 * t2 - 2.0 * t;
        (g00 * self.y[j] + g01 * self.y[j + 1]) / w + g10 * self.d[j] + g11 * self.d[j + 1]
    }
}

impl Reaction {
    /// `f(u) = u (1 - u) (u - theta)`, admissible for `theta` in `(0, 1/2)`.
    pub fn cubic(theta: f64) -> Result<Self, ReactionError> {
        if !(theta > 0.0 && theta < 0.5) {
            return Err(ReactionError::Invalid(format!(
                "cubic theta must lie in (0, 1/2), got {theta}"
            )));
        }
        Ok(Self::cubic_unchecked(theta))
    }

    fn cubic_unchecked(theta: f64) -> Self {
        let vertex = (1.0 - theta + theta * theta) / 3.0;
        Self {
            kind: Kind::Cubic { theta },
            theta1: theta,
            theta2: theta,
            fprime0: -theta,
            fprime1: -(1.0 - theta),
            lipschitz: theta.max(1.0 - theta).max(vertex),
        }
    }

    /// Values of f at `values.len()` Chebyshev-Lobatto nodes on [0, 1].
    pub fn table(values: Vec<f64>) -> Result<Self, ReactionError> {
        if values.len() < 5 {
            return Err(ReactionError::Invalid("table needs at least 5 values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ReactionError::Invalid("table values must be finite".into()));
        }
        let (a, b) = (values[0], values[values.len() - 1]);
        if a.abs() > 1e-12 || b.abs() > 1e-12 {
            return Err(ReactionError::Invalid(format!(
                "table must vanish at 0 and 1 (got {a:e}, {b:e})"
            )));
        }
        let table = HermiteTable::new(&values);
        let fprime0 = table.eval_prime(0.0);
        let fprime1 = table.eval_prime(1.0);
        let lipschitz = (0..=2000)
            .map(|i| table.eval_prime(i as f64 / 2000.0).abs())
            .fold(0.0, f64::max);
        let mut r = Self {
            kind: Kind::Table(table),
            theta1: f64::NAN,
            theta2: f64::NAN,
            fprime0,
            fprime1,
            lipschitz,
        };
        let (t1, t2) = r.interior_zeros().ok_or_else(|| {
            ReactionError::Invalid("table has no interior zero in (0, 1)".into())
        })?;
        r.theta1 = t1;
        r.theta2 = t2;
        Ok(r)
    }

    pub fn from_spec(spec: &ReactionSpec) -> Result<Self, ReactionError> {
        match spec {
            ReactionSpec::Cubic { theta } => Self::cubic(*theta),
            ReactionSpec::Table { values } => Self::table(values.clone()),
        }
    }

    /// The reaction `-f(1 - s)`, which swaps the roles of the two stable
    /// states. Its front runs with the opposite sign of speed, so the mirror
    /// of an admissible reaction is itself not admissible for `solve_profile`.
    pub fn mirror(&self) -> Self {
        match &self.kind {
            Kind::Cubic { theta } => Self::cubic_unchecked(1.0 - theta),
            Kind::Table(t) => {
                let values: Vec<f64> = t.y.iter().rev().map(|v| -v).collect();
                let table = HermiteTable::new(&values);
                Self {
                    kind: Kind::Table(table),
                    theta1: 1.0 - self.theta2,
                    theta2: 1.0 - self.theta1,
                    fprime0: self.fprime1,
                    fprime1: self.fprime0,
                    lipschitz: self.lipschitz,
                }
            }
        }
    }

    pub fn cubic_theta(&self) -> Option<f64> {
        match self.kind {
            Kind::Cubic { theta } => Some(theta),
            Kind::Table(_) => None,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u < 0.0 {
            return self.fprime0 * u;
        }
        if u > 1.0 {
            return self.fprime1 * (u - 1.0);
        }
        match &self.kind {
            Kind::Cubic { theta } => u * (1.0 - u) * (u - theta),
            Kind::Table(t) => t.eval(u),
        }
    }

    pub fn eval_prime(&self, u: f64) -> f64 {
        if u < 0.0 {
            return self.fprime0;
        }
        if u > 1.0 {
            return self.fprime1;
        }
        match &self.kind {
            Kind::Cubic { theta } => -3.0 * u * u + 2.0 * (1.0 + theta) * u - theta,
            Kind::Table(t) => t.eval_prime(u),
        }
    }

    /// Global Lipschitz constant of `eval` on the whole line.
    pub fn global_lipschitz(&self) -> f64 {
        self.lipschitz.max(self.fprime0.abs()).max(self.fprime1.abs())
    }

    /// ∫_a^b f(s) ds.
    pub fn integral_f(&self, a: f64, b: f64) -> f64 {
        assert!(a <= b, "integral_f needs a <= b");
        if a == b {
            return 0.0;
        }
        // Split at the kinks of the extension so each piece is smooth.
        let mut cuts = vec![a];
        for k in [0.0, 1.0] {
            if a < k && k < b {
                cuts.push(k);
            }
        }
        cuts.push(b);
        cuts.windows(2)
            .map(|w| adaptive_simpson(&|s| self.eval(s), w[0], w[1], 1e-12))
            .sum()
    }

    /// Largest admissible delta (maximised, then halved) and mu at 0.9 of its bound.
    pub fn small_constants(&self) -> Result<SmallConstants, ReactionError> {
        let (f0, f1) = (self.fprime0, self.fprime1);
        if !(f0 < 0.0 && f1 < 0.0) {
            return Err(ReactionError::ConstraintUnsatisfiable);
        }
        let bound = (self.theta1 / 4.0)
            .min((1.0 - self.theta2) / 4.0)
            .min(f0.abs() / 2.0)
            .min(f1.abs() / 2.0);
        let admissible = |d: f64| {
            const M: usize = 1000;
            (0..=M).all(|i| {
                let s = 4.0 * d * i as f64 / M as f64;
                self.eval_prime(s) <= f0 / 2.0 && self.eval_prime(1.0 - s) <= f1 / 2.0
            })
        };
        // Largest d below the bound with the slope conditions on [0, 4d].
        let top = bound * (1.0 - 1e-9);
        let star = if admissible(top) {
            top
        } else {
            let (mut lo, mut hi) = (0.0, top);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if admissible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if star < 1e-6 {
            return Err(ReactionError::ConstraintUnsatisfiable);
        }
        let mu = 0.9 * (f0.abs() / 2.0).min(f1.abs() / 2.0).sqrt();
        Ok(SmallConstants { delta: star / 2.0, mu })
    }

    /// Invariant violations, empty when the reaction is admissible.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.eval(0.0).abs() > 1e-12 || self.eval(1.0).abs() > 1e-12 {
            out.push("f(0) or f(1) is not zero".into());
        }
        if !(self.fprime0 < 0.0) {
            out.push(format!("f'(0) = {} is not negative", self.fprime0));
        }
        if !(self.fprime1 < 0.0) {
            out.push(format!("f'(1) = {} is not negative", self.fprime1));
        }
        if !(0.0 < self.theta1 && self.theta1 <= self.theta2 && self.theta2 < 1.0) {
            out.push("interior zeros out of order".into());
        }
        for i in 0..10 {
            let eta = i as f64 / 10.0;
            if self.integral_f(eta, 1.0) <= 0.0 {
                out.push(format!("integral of f over [{eta}, 1] is not positive"));
            }
        }
        out
    }

    fn interior_zeros(&self) -> Option<(f64, f64)> {
        const M: usize = 4000;
        let grid: Vec<f64> = (0..=M).map(|i| i as f64 / M as f64).collect();
        let mut first = None;
        for w in grid[1..M].windows(2) {
            if self.eval(w[0]) < 0.0 && self.eval(w[1]) >= 0.0 {
                first = Some(self.bisect_zero(w[0], w[1]));
                break;
            }
        }
        let mut last = None;
        for w in grid[1..M].windows(2).rev() {
            if self.eval(w[0]) <= 0.0 && self.eval(w[1]) > 0.0 {
                last = Some(self.bisect_zero(w[0], w[1]));
                break;
            }
        }
        Some((first?, last?))
    }

    fn bisect_zero(&self, mut lo: f64, mut hi: f64) -> f64 {
        let slo = self.eval(lo).signum();
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) == 0.0 {
                return mid;
            }
            if self.eval(mid).signum() == slo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}
