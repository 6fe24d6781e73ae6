//! Scalar superpotentials `j` with closed-form value, Clarke subdifferential
//! (a closed interval) and generalized directional derivative
//! `j⁰(r; s) = max { ζ s : ζ ∈ ∂j(r) }`, plus sampling checks of the
//! hypotheses the existence, comparison and convergence results rely on.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("unknown potential '{id}'; available: {}", .available.join(", "))]
    Unknown { id: String, available: Vec<&'static str> },
    #[error("potential '{id}' has no parameter '{name}'; known: {}", .known.join(", "))]
    UnknownParameter { id: &'static str, name: String, known: Vec<&'static str> },
    #[error("invalid parameters for '{id}': {reason}")]
    InvalidParameter { id: &'static str, reason: String },
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from `x` to the interval; zero inside.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Closest point of the interval to `x`.
    pub fn project(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `max(|lo|, |hi|)`, the norm of the set.
    pub fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Support function `max { ζ s : ζ ∈ [lo, hi] }`.
    pub fn support(&self, s: f64) -> f64 {
        (self.lo * s).max(self.hi * s)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            write!(f, "{{{}}}", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The built-in superpotentials. All except `Tresca`, `QuinticRamp` and
/// `PowerRamp` are anchored at the boundary datum `b` of the owning spec.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    /// `(r-b)²` for `r < b`, `1 - e^{-(r-b)}` for `r ≥ b`. Nonconvex.
    ExpQuadratic,
    /// `min(k1/2 (r-b)² + e1, k2/2 (r-b)² + e2)`; nonconvex when the two parabolas cross.
    MinQuadratics { k1: f64, e1: f64, k2: f64, e2: f64 },
    /// `½ (r-b)²`, the linear Robin law.
    Quadratic,
    /// `½ (r-b)²` on `[b-r0, b+r0]`, continued by lines of slope `m1` and `m2`.
    TruncatedQuadratic { m1: f64, m2: f64, r0: f64 },
    /// `|r-b|`.
    Abs,
    /// `|r|` (Tresca friction law).
    Tresca,
    /// `β (r-c)⁵` for `r ≥ c`, zero otherwise (radiation law).
    QuinticRamp { beta: f64, c: f64 },
    /// `β r^{9/4}` for `r ≥ 0`, zero otherwise (natural convection).
    PowerRamp { beta: f64 },
    /// `j ≡ 0`; satisfies the sign condition but not the strict one.
    Zero,
    /// `-½ (r-b)²`; violates the sign condition.
    ConcaveQuadratic,
}

/// The five potentials with full hypothesis guarantees.
pub const BUILTIN_IDS: [&str; 5] = ["exp_quadratic", "min_quadratics", "quadratic", "truncated_quadratic", "abs"];
/// Further potentials, without hypothesis guarantees.
pub const EXTRA_IDS: [&str; 5] = ["tresca", "quintic_ramp", "power_ramp", "zero", "concave_quadratic"];

pub fn available_ids() -> Vec<&'static str> {
    BUILTIN_IDS.iter().chain(EXTRA_IDS.iter()).copied().collect()
}

/// `|∂j(r)| ≤ c0 + c1 |r|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthBound {
    pub c0: f64,
    pub c1: f64,
}

/// A potential together with its anchor `b` and declared hypothesis constants.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub potential: Potential,
    pub b: f64,
    /// Declared growth constants; `None` for superlinear growth.
    pub growth: Option<GrowthBound>,
    /// Declared relaxed-monotonicity constant; `None` when unknown or infinite.
    pub m_j: Option<f64>,
    pub convex: bool,
}

impl PotentialSpec {
    pub fn exp_quadratic(b: f64) -> Self {
        PotentialSpec {
            potential: Potential::ExpQuadratic,
            b,
            growth: Some(GrowthBound { c0: 1.0 + 2.0 * b.abs(), c1: 2.0 }),
            m_j: Some(1.0),
            convex: false,
        }
    }

    pub fn min_quadratics(b: f64, k1: f64, e1: f64, k2: f64, e2: f64) -> Result<Self, PotentialError> {
        let id = "min_quadratics";
        if !(k1 > 0.0 && k2 > 0.0) || ![k1, e1, k2, e2].iter().all(|v| v.is_finite()) {
            return Err(PotentialError::InvalidParameter { id, reason: "k1, k2 must be positive and all parameters finite".into() });
        }
        let potential = Potential::MinQuadratics { k1, e1, k2, e2 };
        let convex = min_quadratics_crossing(k1, e1, k2, e2).is_none();
        let k = k1.max(k2);
        Ok(PotentialSpec {
            potential,
            b,
            growth: Some(GrowthBound { c0: k * b.abs(), c1: k }),
            m_j: if convex { Some(0.0) } else { None },
            convex,
        })
    }

    pub fn quadratic(b: f64) -> Self {
        PotentialSpec {
            potential: Potential::Quadratic,
            b,
            growth: Some(GrowthBound { c0: b.abs(), c1: 1.0 }),
            m_j: Some(0.0),
            convex: true,
        }
    }

    pub fn truncated_quadratic(b: f64, m1: f64, m2: f64, r0: f64) -> Result<Self, PotentialError> {
        if !(m1 <= -r0 && -r0 < 0.0 && r0 <= m2) || ![m1, m2, r0].iter().all(|v| v.is_finite()) {
            return Err(PotentialError::InvalidParameter {
                id: "truncated_quadratic",
                reason: format!("need m1 ≤ -r0 < 0 < r0 ≤ m2, got m1={m1}, m2={m2}, r0={r0}"),
            });
        }
        Ok(PotentialSpec {
            potential: Potential::TruncatedQuadratic { m1, m2, r0 },
            b,
            growth: Some(GrowthBound { c0: m1.abs().max(m2), c1: 0.0 }),
            m_j: Some(0.0),
            convex: true,
        })
    }

    pub fn abs(b: f64) -> Self {
        PotentialSpec {
            potential: Potential::Abs,
            b,
            growth: Some(GrowthBound { c0: 1.0, c1: 0.0 }),
            m_j: Some(0.0),
            convex: true,
        }
    }

    pub fn tresca(b: f64) -> Self {
        PotentialSpec { potential: Potential::Tresca, ..Self::abs(b) }
    }

    pub fn quintic_ramp(b: f64, beta: f64, c: f64) -> Result<Self, PotentialError> {
        if !(beta > 0.0) || !c.is_finite() || !beta.is_finite() {
            return Err(PotentialError::InvalidParameter { id: "quintic_ramp", reason: "beta must be positive".into() });
        }
        Ok(PotentialSpec { potential: Potential::QuinticRamp { beta, c }, b, growth: None, m_j: Some(0.0), convex: true })
    }

    pub fn power_ramp(b: f64, beta: f64) -> Result<Self, PotentialError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(PotentialError::InvalidParameter { id: "power_ramp", reason: "beta must be positive".into() });
        }
        Ok(PotentialSpec { potential: Potential::PowerRamp { beta }, b, growth: None, m_j: Some(0.0), convex: true })
    }

    pub fn zero(b: f64) -> Self {
        PotentialSpec {
            potential: Potential::Zero,
            b,
            growth: Some(GrowthBound { c0: 0.0, c1: 0.0 }),
            m_j: Some(0.0),
            convex: true,
        }
    }

    pub fn concave_quadratic(b: f64) -> Self {
        PotentialSpec {
            potential: Potential::ConcaveQuadratic,
            b,
            growth: Some(GrowthBound { c0: b.abs(), c1: 1.0 }),
            m_j: Some(1.0),
            convex: false,
        }
    }

    /// Looks up a potential by id; missing parameters take their defaults.
    pub fn from_id(id: &str, b: f64, params: &BTreeMap<String, f64>) -> Result<Self, PotentialError> {
        let Some(sid) = available_ids().into_iter().find(|k| *k == id) else {
            return Err(PotentialError::Unknown { id: id.to_string(), available: available_ids() });
        };
        let known = default_params(sid);
        for name in params.keys() {
            if !known.iter().any(|(k, _)| k == name) {
                return Err(PotentialError::UnknownParameter {
                    id: sid,
                    name: name.clone(),
                    known: known.iter().map(|(k, _)| *k).collect(),
                });
            }
        }
        let get = |name: &str| params.get(name).copied().unwrap_or_else(|| known.iter().find(|(k, _)| *k == name).unwrap().1);
        match sid {
            "exp_quadratic" => Ok(Self::exp_quadratic(b)),
            "min_quadratics" => Self::min_quadratics(b, get("k1"), get("e1"), get("k2"), get("e2")),
            "quadratic" => Ok(Self::quadratic(b)),
            "truncated_quadratic" => Self::truncated_quadratic(b, get("m1"), get("m2"), get("r0")),
            "abs" => Ok(Self::abs(b)),
            "tresca" => Ok(Self::tresca(b)),
            "quintic_ramp" => Self::quintic_ramp(b, get("beta"), get("c")),
            "power_ramp" => Self::power_ramp(b, get("beta")),
            "zero" => Ok(Self::zero(b)),
            "concave_quadratic" => Ok(Self::concave_quadratic(b)),
            _ => unreachable!(),
        }
    }

    pub fn id(&self) -> &'static str {
        match self.potential {
            Potential::ExpQuadratic => "exp_quadratic",
            Potential::MinQuadratics { .. } => "min_quadratics",
            Potential::Quadratic => "quadratic",
            Potential::TruncatedQuadratic { .. } => "truncated_quadratic",
            Potential::Abs => "abs",
            Potential::Tresca => "tresca",
            Potential::QuinticRamp { .. } => "quintic_ramp",
            Potential::PowerRamp { .. } => "power_ramp",
            Potential::Zero => "zero",
            Potential::ConcaveQuadratic => "concave_quadratic",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match self.potential {
            Potential::MinQuadratics { k1, e1, k2, e2 } => vec![("k1", k1), ("e1", e1), ("k2", k2), ("e2", e2)],
            Potential::TruncatedQuadratic { m1, m2, r0 } => vec![("m1", m1), ("m2", m2), ("r0", r0)],
            Potential::QuinticRamp { beta, c } => vec![("beta", beta), ("c", c)],
            Potential::PowerRamp { beta } => vec![("beta", beta)],
            _ => vec![],
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let b = self.b;
        let d = r - b;
        match self.potential {
            Potential::ExpQuadratic => {
                if r < b {
                    d * d
                } else {
                    1.0 - (-d).exp()
                }
            }
            Potential::MinQuadratics { k1, e1, k2, e2 } => (0.5 * k1 * d * d + e1).min(0.5 * k2 * d * d + e2),
            Potential::Quadratic => 0.5 * d * d,
            Potential::TruncatedQuadratic { m1, m2, r0 } => {
                if r < b - r0 {
                    0.5 * r0 * r0 + m1 * (r - (b - r0))
                } else if r > b + r0 {
                    0.5 * r0 * r0 + m2 * (r - (b + r0))
                } else {
                    0.5 * d * d
                }
            }
            Potential::Abs => d.abs(),
            Potential::Tresca => r.abs(),
            Potential::QuinticRamp { beta, c } => {
                if r >= c {
                    beta * (r - c).powi(5)
                } else {
                    0.0
                }
            }
            Potential::PowerRamp { beta } => {
                if r >= 0.0 {
                    beta * r.powf(2.25)
                } else {
                    0.0
                }
            }
            Potential::Zero => 0.0,
            Potential::ConcaveQuadratic => -0.5 * d * d,
        }
    }

    /// Points where the piecewise formula switches, increasing.
    pub fn breakpoints(&self) -> Vec<f64> {
        let b = self.b;
        match self.potential {
            Potential::ExpQuadratic | Potential::Abs => vec![b],
            Potential::MinQuadratics { k1, e1, k2, e2 } => match min_quadratics_crossing(k1, e1, k2, e2) {
                Some(dc) => vec![b - dc, b + dc],
                None => vec![],
            },
            Potential::TruncatedQuadratic { r0, .. } => vec![b - r0, b + r0],
            Potential::Tresca | Potential::PowerRamp { .. } => vec![0.0],
            Potential::QuinticRamp { c, .. } => vec![c],
            Potential::Quadratic | Potential::Zero | Potential::ConcaveQuadratic => vec![],
        }
    }

    /// Breakpoints at which `∂j` is a nondegenerate interval.
    pub fn kinks(&self) -> Vec<f64> {
        self.breakpoints().into_iter().filter(|&p| !self.subdiff(p).is_point()).collect()
    }

    /// Clarke subdifferential `∂j(r)`.
    pub fn subdiff(&self, r: f64) -> Interval {
        let b = self.b;
        let d = r - b;
        match self.potential {
            Potential::ExpQuadratic => {
                if r < b {
                    Interval::point(2.0 * d)
                } else if r == b {
                    Interval::new(0.0, 1.0)
                } else {
                    Interval::point((-d).exp())
                }
            }
            Potential::MinQuadratics { k1, e1, k2, e2 } => {
                let (inner, outer) = min_quadratics_slopes(k1, e1, k2, e2);
                match min_quadratics_crossing(k1, e1, k2, e2) {
                    Some(dc) if r == b - dc || r == b + dc => {
                        let (x, y) = (inner * d, outer * d);
                        Interval::new(x.min(y), x.max(y))
                    }
                    Some(dc) if (r - b).abs() > dc => Interval::point(outer * d),
                    _ => Interval::point(inner * d),
                }
            }
            Potential::Quadratic => Interval::point(d),
            Potential::TruncatedQuadratic { m1, m2, r0 } => {
                if r < b - r0 {
                    Interval::point(m1)
                } else if r == b - r0 {
                    Interval::new(m1, -r0)
                } else if r < b + r0 {
                    Interval::point(d)
                } else if r == b + r0 {
                    Interval::new(r0, m2)
                } else {
                    Interval::point(m2)
                }
            }
            Potential::Abs => sign_subdiff(d),
            Potential::Tresca => sign_subdiff(r),
            Potential::QuinticRamp { beta, c } => Interval::point(if r > c { 5.0 * beta * (r - c).powi(4) } else { 0.0 }),
            Potential::PowerRamp { beta } => Interval::point(if r > 0.0 { 2.25 * beta * r.powf(1.25) } else { 0.0 }),
            Potential::Zero => Interval::point(0.0),
            Potential::ConcaveQuadratic => Interval::point(-d),
        }
    }

    /// `j⁰(r; s)` through the max formula over `∂j(r)`.
    pub fn j0(&self, r: f64, s: f64) -> f64 {
        self.subdiff(r).support(s)
    }

    /// One-sided branch of the graph of `∂j` at `r`: the limit of `∂j` from
    /// `side` and its derivative along that branch. Away from breakpoints the
    /// side is irrelevant.
    pub fn branch(&self, r: f64, side: Side) -> (f64, f64) {
        let b = self.b;
        let d = r - b;
        let right = side == Side::Right;
        match self.potential {
            Potential::ExpQuadratic => {
                if r > b || (r == b && right) {
                    let e = (-d).exp();
                    (e, -e)
                } else {
                    (2.0 * d, 2.0)
                }
            }
            Potential::MinQuadratics { k1, e1, k2, e2 } => {
                let (inner, outer) = min_quadratics_slopes(k1, e1, k2, e2);
                let k = match min_quadratics_crossing(k1, e1, k2, e2) {
                    None => inner,
                    Some(dc) => {
                        let outside = if r == b + dc {
                            right
                        } else if r == b - dc {
                            !right
                        } else {
                            d.abs() > dc
                        };
                        if outside {
                            outer
                        } else {
                            inner
                        }
                    }
                };
                (k * d, k)
            }
            Potential::Quadratic => (d, 1.0),
            Potential::TruncatedQuadratic { m1, m2, r0 } => {
                let (lo, hi) = (b - r0, b + r0);
                if r < lo || (r == lo && !right) {
                    (m1, 0.0)
                } else if r > hi || (r == hi && right) {
                    (m2, 0.0)
                } else {
                    (d, 1.0)
                }
            }
            Potential::Abs | Potential::Tresca => {
                let x = if matches!(self.potential, Potential::Abs) { d } else { r };
                if x > 0.0 || (x == 0.0 && right) {
                    (1.0, 0.0)
                } else {
                    (-1.0, 0.0)
                }
            }
            Potential::QuinticRamp { beta, c } => {
                if r > c {
                    (5.0 * beta * (r - c).powi(4), 20.0 * beta * (r - c).powi(3))
                } else {
                    (0.0, 0.0)
                }
            }
            Potential::PowerRamp { beta } => {
                if r > 0.0 {
                    (2.25 * beta * r.powf(1.25), 2.8125 * beta * r.powf(0.25))
                } else {
                    (0.0, 0.0)
                }
            }
            Potential::Zero => (0.0, 0.0),
            Potential::ConcaveQuadratic => (-d, -1.0),
        }
    }

    /// `argmin_x ½(x - z)² + τ j(x)` for convex potentials; `None` otherwise.
    pub fn prox(&self, tau: f64, z: f64) -> Option<f64> {
        if !self.convex || !(tau >= 0.0) {
            return None;
        }
        let b = self.b;
        let x = match self.potential {
            Potential::Quadratic => (z + tau * b) / (1.0 + tau),
            Potential::MinQuadratics { k1, e1, k2, e2 } => {
                let (k, _) = min_quadratics_slopes(k1, e1, k2, e2);
                (z + tau * k * b) / (1.0 + tau * k)
            }
            Potential::Abs => soft_threshold(z, b, tau),
            Potential::Tresca => soft_threshold(z, 0.0, tau),
            Potential::TruncatedQuadratic { m1, m2, r0 } => {
                let (lo, hi) = (b - r0, b + r0);
                if z > hi + tau * m2 {
                    z - tau * m2
                } else if z >= hi + tau * r0 {
                    hi
                } else if z < lo + tau * m1 {
                    z - tau * m1
                } else if z <= lo - tau * r0 {
                    lo
                } else {
                    (z + tau * b) / (1.0 + tau)
                }
            }
            Potential::Zero => z,
            Potential::QuinticRamp { c, .. } => self.prox_by_bisection(tau, z, z.min(c), z),
            Potential::PowerRamp { .. } => self.prox_by_bisection(tau, z, z.min(0.0), z),
            Potential::ExpQuadratic | Potential::ConcaveQuadratic => return None,
        };
        Some(x)
    }

    /// Root of the increasing map `x ↦ x - z + τ ζ(x)` bracketed by `[lo, hi]`.
    fn prox_by_bisection(&self, tau: f64, z: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let sd = self.subdiff(mid);
            if mid - z + tau * sd.lo > 0.0 {
                hi = mid;
            } else if mid - z + tau * sd.hi < 0.0 {
                lo = mid;
            } else {
                return mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn sign_subdiff(x: f64) -> Interval {
    if x < 0.0 {
        Interval::point(-1.0)
    } else if x == 0.0 {
        Interval::new(-1.0, 1.0)
    } else {
        Interval::point(1.0)
    }
}

fn soft_threshold(z: f64, center: f64, tau: f64) -> f64 {
    let d = z - center;
    if d > tau {
        z - tau
    } else if d < -tau {
        z + tau
    } else {
        center
    }
}

/// Half-distance `|r - b|` at which the two parabolas meet, when they cross.
fn min_quadratics_crossing(k1: f64, e1: f64, k2: f64, e2: f64) -> Option<f64> {
    if k1 == k2 {
        return None;
    }
    let t = 2.0 * (e2 - e1) / (k1 - k2);
    if t > 0.0 {
        Some(t.sqrt())
    } else {
        None
    }
}

/// Curvatures `(inner, outer)` of the active parabola near `b` and far from it.
fn min_quadratics_slopes(k1: f64, e1: f64, k2: f64, e2: f64) -> (f64, f64) {
    let inner = if e1 < e2 || (e1 == e2 && k1 <= k2) { k1 } else { k2 };
    let outer = if min_quadratics_crossing(k1, e1, k2, e2).is_some() {
        if inner == k1 {
            k2
        } else {
            k1
        }
    } else {
        inner
    };
    (inner, outer)
}

pub fn default_params(id: &str) -> Vec<(&'static str, f64)> {
    match id {
        "min_quadratics" => vec![("k1", 1.0), ("e1", 0.0), ("k2", 3.0), ("e2", -1.0)],
        "truncated_quadratic" => vec![("m1", -2.0), ("m2", 2.0), ("r0", 1.0)],
        "quintic_ramp" => vec![("beta", 1.0), ("c", 0.0)],
        "power_ramp" => vec![("beta", 1.0)],
        _ => vec![],
    }
}

/// Sample points for the hypothesis checks.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    points: Vec<f64>,
}

pub const BREAKPOINT_OFFSET: f64 = 1e-9;

impl SampleGrid {
    /// Sorted, deduplicated points.
    pub fn from_points(mut points: Vec<f64>) -> Self {
        points.retain(|p| p.is_finite());
        points.sort_by(f64::total_cmp);
        points.dedup();
        SampleGrid { points }
    }

    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        let pts = match n {
            0 => vec![],
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        };
        Self::from_points(pts)
    }

    /// 2001 uniform points on `[b-10, b+10]` plus every breakpoint and its
    /// neighbours at distance 1e-9.
    pub fn default_for(p: &PotentialSpec) -> Self {
        Self::uniform(p.b - 10.0, p.b + 10.0, 2001).with_breakpoints(p)
    }

    pub fn with_breakpoints(self, p: &PotentialSpec) -> Self {
        let mut pts = self.points;
        for q in p.breakpoints() {
            pts.extend([q - BREAKPOINT_OFFSET, q, q + BREAKPOINT_OFFSET]);
        }
        Self::from_points(pts)
    }

    /// Keeps the points with `r ≤ bound`.
    pub fn at_most(&self, bound: f64) -> Self {
        SampleGrid { points: self.points.iter().copied().filter(|&r| r <= bound).collect() }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Outcome of a sampled hypothesis check. `worst_margin` is the smallest
/// slack found (negative when violated) and `worst_at` where it occurred.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub worst_at: Vec<f64>,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        CheckReport { name, passed: true, samples: 0, violations: 0, worst_margin: f64::INFINITY, worst_at: vec![] }
    }

    fn record(&mut self, margin: f64, at: &[f64]) {
        self.samples += 1;
        if margin < 0.0 {
            self.violations += 1;
            self.passed = false;
        }
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_at = at.to_vec();
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({} samples, {} violations, worst margin {:e} at {:?})",
            self.name,
            if self.passed { "pass" } else { "FAIL" },
            self.samples,
            self.violations,
            self.worst_margin,
            self.worst_at
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub check: CheckReport,
    pub bound: GrowthBound,
    /// Constants that bound `|∂j|` on the grid with the asymptotic slope fitted
    /// from the outer half of the grid.
    pub fitted: GrowthBound,
}

/// Checks `max(|lo|, |hi|) ≤ c0 + c1 |r|` on the grid. Uses the spec's
/// declared constants unless `bound` is given.
pub fn check_growth(p: &PotentialSpec, grid: &SampleGrid, bound: Option<GrowthBound>) -> GrowthReport {
    let bound = bound.or(p.growth).unwrap_or(GrowthBound { c0: 0.0, c1: 0.0 });
    let mut check = CheckReport::new("growth");
    let norms: Vec<(f64, f64)> = grid.points().iter().map(|&r| (r, p.subdiff(r).abs_max())).collect();
    for &(r, n) in &norms {
        let allowed = bound.c0 + bound.c1 * r.abs();
        check.record(allowed - n + 1e-14 * allowed.max(1.0), &[r]);
    }
    let rmax = norms.iter().fold(0.0_f64, |m, (r, _)| m.max(r.abs()));
    let c1 = norms
        .iter()
        .filter(|(r, _)| r.abs() >= 0.5 * rmax && *r != 0.0)
        .fold(0.0_f64, |m, (r, n)| m.max(n / r.abs()));
    let c0 = norms.iter().fold(0.0_f64, |m, (r, n)| m.max(n - c1 * r.abs()));
    GrowthReport { check, bound, fitted: GrowthBound { c0, c1 } }
}

pub const SIGN_SLACK: f64 = 1e-14;

/// `j⁰(r; b - r) ≤ 0` at every grid point.
pub fn check_sign_condition(p: &PotentialSpec, grid: &SampleGrid) -> CheckReport {
    let mut check = CheckReport::new("sign condition j0(r; b-r) <= 0");
    for &r in grid.points() {
        check.record(SIGN_SLACK - p.j0(r, p.b - r), &[r]);
    }
    check
}

/// `j⁰(r; b - r) < 0` at every grid point other than `b`.
pub fn check_strict_condition(p: &PotentialSpec, grid: &SampleGrid) -> CheckReport {
    let mut check = CheckReport::new("strict condition j0(r; b-r) < 0 for r != b");
    for &r in grid.points().iter().filter(|&&r| r != p.b) {
        let v = p.j0(r, p.b - r);
        // strictness: zero counts as a violation
        check.record(if v < 0.0 { -v } else { -v.abs().max(f64::MIN_POSITIVE) }, &[r]);
    }
    check
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedMonotonicity {
    /// `sup (j⁰(r; s-r) + j⁰(s; r-s)) / |r-s|²` over grid pairs, clamped at 0.
    pub m_j: f64,
    pub at: Option<(f64, f64)>,
}

pub fn estimate_relaxed_monotonicity(p: &PotentialSpec, grid: &SampleGrid) -> RelaxedMonotonicity {
    let pts = grid.points();
    let sub: Vec<Interval> = pts.iter().map(|&r| p.subdiff(r)).collect();
    let mut best = RelaxedMonotonicity { m_j: 0.0, at: None };
    for i in 0..pts.len() {
        for k in (i + 1)..pts.len() {
            let (r, s) = (pts[i], pts[k]);
            let d = s - r;
            let v = (sub[i].support(d) + sub[k].support(-d)) / (d * d);
            if v > best.m_j {
                best = RelaxedMonotonicity { m_j: v, at: Some((r, s)) };
            }
        }
    }
    best
}

pub const DEFAULT_C_GRID: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 100.0];

/// Literal check of `j⁰(r; -(r-s)⁺) + c j⁰(s; (r-s)⁺) ≤ 0` over all ordered
/// grid pairs and every `c` in `c_grid` (each `c ≥ 1`).
pub fn check_hhh(p: &PotentialSpec, grid: &SampleGrid, c_grid: &[f64]) -> CheckReport {
    assert!(c_grid.iter().all(|&c| c >= 1.0), "c_grid entries must be at least 1");
    let pts = grid.points();
    let sub: Vec<Interval> = pts.iter().map(|&r| p.subdiff(r)).collect();
    let mut check = CheckReport::new("HHH");
    for (i, &r) in pts.iter().enumerate() {
        for (k, &s) in pts.iter().enumerate() {
            let d = (r - s).max(0.0);
            for &c in c_grid {
                if d == 0.0 {
                    check.samples += 1;
                    continue;
                }
                let first = sub[i].support(-d);
                let second = sub[k].support(d);
                let v = first + c * second;
                let slack = 1e-12 * (first.abs() + (c * second).abs()).max(f64::MIN_POSITIVE);
                check.record(slack - v, &[r, s, c]);
            }
        }
    }
    check
}

/// Admission test for the α-monotonicity experiment: the `c = 1` instance on
/// the full grid (convexity of `j`) together with the literal condition for all
/// `c` restricted to `r, s ≤ b`, the range where comparison confines solutions.
#[derive(Clone, Debug, PartialEq)]
pub struct HhhGate {
    pub convexity: CheckReport,
    pub comparison_range: CheckReport,
}

impl HhhGate {
    pub fn passed(&self) -> bool {
        self.convexity.passed && self.comparison_range.passed
    }
}

pub fn hhh_gate(p: &PotentialSpec, grid: &SampleGrid, c_grid: &[f64]) -> HhhGate {
    let mut convexity = check_hhh(p, grid, &[1.0]);
    convexity.name = "HHH (c = 1, full grid)";
    let mut comparison_range = check_hhh(p, &grid.at_most(p.b), c_grid);
    comparison_range.name = "HHH (all c, r,s <= b)";
    HhhGate { convexity, comparison_range }
}

/// Coarser grid for the quadratic-cost pair scans.
pub fn pair_grid(p: &PotentialSpec) -> SampleGrid {
    SampleGrid::uniform(p.b - 10.0, p.b + 10.0, 401).with_breakpoints(p)
}
