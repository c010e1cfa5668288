//! The model family: single-site state spaces, rate functions and the
//! structural conditions (attractivity, rate consistency) they must satisfy.

use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One side of the single-site state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Finite(i32),
    Infinite,
}

/// `I = { z : omega_min <= z <= omega_max }`, with either side possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateBounds {
    pub omega_min: Bound,
    pub omega_max: Bound,
}

impl StateBounds {
    pub fn new(omega_min: Bound, omega_max: Bound) -> Result<Self> {
        if let Bound::Finite(lo) = omega_min {
            if lo > 0 {
                return Err(Error::param("omega_min", format!("{lo} > 0")));
            }
        }
        if let Bound::Finite(hi) = omega_max {
            if hi < 1 {
                return Err(Error::param("omega_max", format!("{hi} < 1")));
            }
        }
        Ok(Self { omega_min, omega_max })
    }

    pub const fn exclusion() -> Self {
        Self {
            omega_min: Bound::Finite(0),
            omega_max: Bound::Finite(1),
        }
    }

    pub const fn unbounded() -> Self {
        Self {
            omega_min: Bound::Infinite,
            omega_max: Bound::Infinite,
        }
    }

    pub fn contains(&self, z: i32) -> bool {
        let above = match self.omega_min {
            Bound::Finite(lo) => z >= lo,
            Bound::Infinite => true,
        };
        let below = match self.omega_max {
            Bound::Finite(hi) => z <= hi,
            Bound::Infinite => true,
        };
        above && below
    }

    /// The whole state space when both sides are finite.
    pub fn finite_range(&self) -> Option<RangeInclusive<i32>> {
        match (self.omega_min, self.omega_max) {
            (Bound::Finite(lo), Bound::Finite(hi)) => Some(lo..=hi),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.finite_range().is_some()
    }

    /// Intersects `range` with `I`.
    pub fn clip(&self, range: RangeInclusive<i32>) -> RangeInclusive<i32> {
        let lo = match self.omega_min {
            Bound::Finite(m) => (*range.start()).max(m),
            Bound::Infinite => *range.start(),
        };
        let hi = match self.omega_max {
            Bound::Finite(m) => (*range.end()).min(m),
            Bound::Infinite => *range.end(),
        };
        lo..=hi
    }

    pub fn check(&self, z: i32) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::Domain(format!("site value {z} outside {self}")))
        }
    }
}

impl fmt::Display for StateBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.omega_min {
            Bound::Finite(lo) => write!(f, "[{lo}, ")?,
            Bound::Infinite => write!(f, "(-inf, ")?,
        }
        match self.omega_max {
            Bound::Finite(hi) => write!(f, "{hi}]"),
            Bound::Infinite => write!(f, "+inf)"),
        }
    }
}

/// Brick addition/removal rates of a conserving nearest-neighbour model.
///
/// `p(y, z)` and `q(y, z)` are evaluated on the pair `(omega_i, omega_{i+1})`;
/// callers guarantee both arguments lie in [`RateFunctions::bounds`].
pub trait RateFunctions: Send + Sync {
    fn bounds(&self) -> StateBounds;
    fn p(&self, y: i32, z: i32) -> f64;
    fn q(&self, y: i32, z: i32) -> f64;
    /// The common factor `f` of the rate factorization.
    fn f(&self, z: i32) -> f64;

    /// `ln f(z)!` with `f(0)! = 1`.
    fn ln_f_factorial(&self, z: i32) -> f64 {
        match z.cmp(&0) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => (1..=z).map(|y| self.f(y).ln()).sum(),
            std::cmp::Ordering::Less => -((z + 1)..=0).map(|y| self.f(y).ln()).sum::<f64>(),
        }
    }

    /// Rate `p` that is zero whenever an argument leaves `I`.
    fn p_or_zero(&self, y: i32, z: i32) -> f64 {
        let b = self.bounds();
        if b.contains(y) && b.contains(z) {
            self.p(y, z)
        } else {
            0.0
        }
    }

    fn q_or_zero(&self, y: i32, z: i32) -> f64 {
        let b = self.bounds();
        if b.contains(y) && b.contains(z) {
            self.q(y, z)
        } else {
            0.0
        }
    }
}

/// Branching coalescing random walk rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcrwRates {
    pub p: f64,
    pub q: f64,
    pub b_l: f64,
    pub b_r: f64,
    pub c_l: f64,
    pub c_r: f64,
}

impl BcrwRates {
    pub fn new(p: f64, q: f64, b_l: f64, b_r: f64, c_l: f64, c_r: f64) -> Result<Self> {
        let r = Self {
            p,
            q,
            b_l,
            b_r,
            c_l,
            c_r,
        };
        for (name, v) in r.named() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("rate must be positive, got {v}")));
            }
        }
        Ok(r)
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("p", self.p),
            ("q", self.q),
            ("b_l", self.b_l),
            ("b_r", self.b_r),
            ("c_l", self.c_l),
            ("c_r", self.c_r),
        ]
    }

    /// Total branching rate `B = b_l + b_r`.
    pub fn branching(&self) -> f64 {
        self.b_l + self.b_r
    }

    /// Total coalescence rate `C = c_l + c_r`.
    pub fn coalescence(&self) -> f64 {
        self.c_l + self.c_r
    }

    /// Density of the non-trivial stationary Bernoulli product, `B/(B+C)`.
    pub fn stationary_density(&self) -> f64 {
        let b = self.branching();
        b / (b + self.coalescence())
    }

    /// Space reflection: left and right rates exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
            b_l: self.b_r,
            b_r: self.b_l,
            c_l: self.c_r,
            c_r: self.c_l,
        }
    }
}

/// Event families of the BCRW on an edge `(i, i+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcrwEvent {
    JumpRight,
    JumpLeft,
    CoalesceRight,
    CoalesceLeft,
    BranchRight,
    BranchLeft,
}

impl BcrwEvent {
    pub const ALL: [BcrwEvent; 6] = [
        BcrwEvent::JumpRight,
        BcrwEvent::JumpLeft,
        BcrwEvent::CoalesceRight,
        BcrwEvent::CoalesceLeft,
        BcrwEvent::BranchRight,
        BcrwEvent::BranchLeft,
    ];

    /// Occupancies of `(i, i+1)` after the event.
    pub fn apply(self, left: u8, right: u8) -> (u8, u8) {
        match self {
            BcrwEvent::JumpRight => (left - 1, right + 1),
            BcrwEvent::JumpLeft => (left + 1, right - 1),
            // c_r removes the particle at i, c_l the one at i+1
            BcrwEvent::CoalesceRight => (left - 1, right),
            BcrwEvent::CoalesceLeft => (left, right - 1),
            BcrwEvent::BranchRight => (left, right + 1),
            BcrwEvent::BranchLeft => (left + 1, right),
        }
    }
}

/// Rates of the six BCRW event families on an edge with the given occupancies.
pub fn bcrw_event_rates(rates: &BcrwRates, left: u8, right: u8) -> Result<[(BcrwEvent, f64); 6]> {
    if left > 1 || right > 1 {
        return Err(Error::Domain(format!(
            "BCRW occupancies must be 0 or 1, got ({left}, {right})"
        )));
    }
    let (l, r) = (left as f64, right as f64);
    Ok([
        (BcrwEvent::JumpRight, rates.p * l * (1.0 - r)),
        (BcrwEvent::JumpLeft, rates.q * (1.0 - l) * r),
        (BcrwEvent::CoalesceRight, rates.c_r * l * r),
        (BcrwEvent::CoalesceLeft, rates.c_l * l * r),
        (BcrwEvent::BranchRight, rates.b_r * l * (1.0 - r)),
        (BcrwEvent::BranchLeft, rates.b_l * (1.0 - l) * r),
    ])
}

/// A fully parameterized model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Asep { p: f64, q: f64 },
    Gzrp { beta: f64 },
    Blp { beta: f64 },
    Bcrw(BcrwRates),
}

impl Model {
    pub fn asep(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) || q < 0.0 || p <= q {
            return Err(Error::param("p", format!("need p > q >= 0, got p={p}, q={q}")));
        }
        if (p + q - 1.0).abs() > 1e-12 {
            return Err(Error::param("q", format!("need p + q = 1, got {}", p + q)));
        }
        Ok(Model::Asep { p, q })
    }

    pub fn gzrp(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Model::Gzrp { beta })
    }

    pub fn blp(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Model::Blp { beta })
    }

    pub fn bcrw(rates: BcrwRates) -> Result<Self> {
        BcrwRates::new(rates.p, rates.q, rates.b_l, rates.b_r, rates.c_l, rates.c_r).map(Model::Bcrw)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Asep { .. } => "ASEP",
            Model::Gzrp { .. } => "GZRP",
            Model::Blp { .. } => "BLP",
            Model::Bcrw(_) => "BCRW",
        }
    }

    pub fn bounds(&self) -> StateBounds {
        match self {
            Model::Asep { .. } | Model::Bcrw(_) => StateBounds::exclusion(),
            Model::Gzrp { .. } | Model::Blp { .. } => StateBounds::unbounded(),
        }
    }

    /// Exponential rate parameter of GZRP/BLP.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Model::Gzrp { beta } | Model::Blp { beta } => Some(*beta),
            _ => None,
        }
    }

    /// The conserving rate functions, or an error for the BCRW.
    pub fn growth(&self) -> Result<GrowthModel> {
        match self {
            Model::Bcrw(_) => Err(self.unsupported("rate functions p, q, f")),
            m => Ok(GrowthModel(*m)),
        }
    }

    pub fn bcrw_rates(&self) -> Result<&BcrwRates> {
        match self {
            Model::Bcrw(r) => Ok(r),
            _ => Err(Error::Unsupported {
                model: self.name().into(),
                what: "BCRW event rates".into(),
            }),
        }
    }

    pub(crate) fn unsupported(&self, what: &str) -> Error {
        Error::Unsupported {
            model: self.name().into(),
            what: what.into(),
        }
    }

    pub fn rate_p(&self, y: i32, z: i32) -> Result<f64> {
        let g = self.growth()?;
        g.check_pair(y, z)?;
        Ok(g.p(y, z))
    }

    pub fn rate_q(&self, y: i32, z: i32) -> Result<f64> {
        let g = self.growth()?;
        g.check_pair(y, z)?;
        Ok(g.q(y, z))
    }

    pub fn f_factorial(&self, z: i32) -> Result<f64> {
        let g = self.growth()?;
        self.bounds().check(z)?;
        // direct products, so that f(z)! f(z+1) = f(z+1)! up to one rounding
        Ok(if z >= 0 {
            (1..=z).fold(1.0, |acc, y| acc * g.f(y))
        } else {
            1.0 / (z + 1..=0).rev().fold(1.0, |acc, y| acc * g.f(y))
        })
    }

    /// Default probe range for the structural checks: all of `I` when it
    /// is finite, otherwise `[-12, 12]`.
    pub fn default_probe_range(&self) -> RangeInclusive<i32> {
        self.bounds()
            .finite_range()
            .unwrap_or(-DEFAULT_PROBE_HALF_WIDTH..=DEFAULT_PROBE_HALF_WIDTH)
    }
}

pub const DEFAULT_PROBE_HALF_WIDTH: i32 = 12;

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::param("beta", format!("must be positive, got {beta}")))
    }
}

/// A [`Model`] known to belong to the conserving family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthModel(Model);

impl GrowthModel {
    pub fn model(&self) -> &Model {
        &self.0
    }

    fn check_pair(&self, y: i32, z: i32) -> Result<()> {
        let b = self.bounds();
        b.check(y)?;
        b.check(z)
    }
}

#[inline]
fn exp_f(beta: f64, z: i32) -> f64 {
    (beta * (z as f64 - 0.5)).exp()
}

impl RateFunctions for GrowthModel {
    fn bounds(&self) -> StateBounds {
        self.0.bounds()
    }

    #[inline]
    fn p(&self, y: i32, z: i32) -> f64 {
        match self.0 {
            Model::Asep { p, .. } => {
                if y == 1 && z == 0 {
                    p
                } else {
                    0.0
                }
            }
            Model::Gzrp { beta } => exp_f(beta, y),
            Model::Blp { beta } => exp_f(beta, y) + exp_f(beta, -z),
            Model::Bcrw(_) => unreachable!("GrowthModel never wraps a BCRW"),
        }
    }

    #[inline]
    fn q(&self, y: i32, z: i32) -> f64 {
        match self.0 {
            Model::Asep { q, .. } => {
                if y == 0 && z == 1 {
                    q
                } else {
                    0.0
                }
            }
            Model::Gzrp { .. } | Model::Blp { .. } => 0.0,
            Model::Bcrw(_) => unreachable!("GrowthModel never wraps a BCRW"),
        }
    }

    #[inline]
    fn f(&self, z: i32) -> f64 {
        match self.0 {
            Model::Asep { .. } => {
                if z == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Model::Gzrp { beta } | Model::Blp { beta } => exp_f(beta, z),
            Model::Bcrw(_) => unreachable!("GrowthModel never wraps a BCRW"),
        }
    }

    fn ln_f_factorial(&self, z: i32) -> f64 {
        match self.0 {
            // f(1)! = f(1) = 1 and f(0)! = 1
            Model::Asep { .. } => 0.0,
            // sum_{y=1}^{z} beta (y - 1/2) = beta z^2 / 2, and the same for z < 0
            Model::Gzrp { beta } | Model::Blp { beta } => 0.5 * beta * (z as f64) * (z as f64),
            Model::Bcrw(_) => unreachable!("GrowthModel never wraps a BCRW"),
        }
    }
}

/// One failed monotonicity inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractivityViolation {
    pub inequality: &'static str,
    pub y: i32,
    pub z: i32,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractivityReport {
    pub probe: (i32, i32),
    pub pairs_checked: usize,
    pub violations: Vec<AttractivityViolation>,
}

impl AttractivityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the four monotonicity inequalities of attractivity for all
/// `(y, z, z+1)` with values in `probe ∩ I`.
pub fn check_attractivity<R: RateFunctions + ?Sized>(rates: &R, probe: RangeInclusive<i32>) -> AttractivityReport {
    let probe = rates.bounds().clip(probe);
    let mut violations = Vec::new();
    let mut pairs = 0;
    for y in probe.clone() {
        for z in *probe.start()..*probe.end() {
            pairs += 1;
            let checks = [
                ("p(z+1,y) >= p(z,y)", rates.p(z + 1, y), rates.p(z, y), true),
                ("p(y,z+1) <= p(y,z)", rates.p(y, z + 1), rates.p(y, z), false),
                ("q(z+1,y) <= q(z,y)", rates.q(z + 1, y), rates.q(z, y), false),
                ("q(y,z+1) >= q(y,z)", rates.q(y, z + 1), rates.q(y, z), true),
            ];
            for (inequality, lhs, rhs, ge) in checks {
                let ok = if ge { lhs >= rhs } else { lhs <= rhs };
                if !ok {
                    violations.push(AttractivityViolation {
                        inequality,
                        y,
                        z,
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    AttractivityReport {
        probe: (*probe.start(), *probe.end()),
        pairs_checked: pairs,
        violations,
    }
}

/// Result of checking the cyclic rate identity and the `s_p`, `s_q`
/// factorization on a probe range.
///
/// Defects are scaled by `max(1, largest rate involved)` so that wide probe
/// ranges of exponential models measure relative rounding, not magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub probe: (i32, i32),
    pub triples_checked: usize,
    pub max_cyclic_defect: f64,
    pub max_abs_cyclic_defect: f64,
    pub max_symmetry_defect: f64,
    pub boundary_violations: Vec<String>,
    pub tolerance: f64,
}

impl ConsistencyReport {
    pub fn max_defect(&self) -> f64 {
        self.max_cyclic_defect.max(self.max_symmetry_defect)
    }

    pub fn pass(&self) -> bool {
        self.max_defect() <= self.tolerance && self.boundary_violations.is_empty()
    }
}

pub const CONSISTENCY_TOLERANCE: f64 = 1e-12;

pub fn check_rate_consistency<R: RateFunctions + ?Sized>(rates: &R, probe: RangeInclusive<i32>) -> ConsistencyReport {
    let bounds = rates.bounds();
    let probe = bounds.clip(probe);
    let vals: Vec<i32> = probe.clone().collect();
    let (p, q) = (|a, b| rates.p(a, b), |a, b| rates.q(a, b));

    let mut triples = 0;
    let mut max_cyclic = 0.0f64;
    let mut max_abs = 0.0f64;
    for &x in &vals {
        for &y in &vals {
            for &z in &vals {
                triples += 1;
                let lhs_terms = [p(x, y), p(y, z), p(z, x), q(x, y), q(y, z), q(z, x)];
                let rhs_terms = [p(x, z), p(z, y), p(y, x), q(x, z), q(z, y), q(y, x)];
                let lhs: f64 = lhs_terms.iter().sum();
                let rhs: f64 = rhs_terms.iter().sum();
                let scale = lhs_terms
                    .iter()
                    .chain(rhs_terms.iter())
                    .fold(1.0f64, |m, v| m.max(v.abs()));
                let d = (lhs - rhs).abs();
                max_abs = max_abs.max(d);
                max_cyclic = max_cyclic.max(d / scale);
            }
        }
    }

    // s_p(a, b) = p(a, b-1) / f(a), s_q(a, b) = q(a-1, b) / f(b)
    let s_p = |a: i32, b: i32| {
        let fa = rates.f(a);
        (fa > 0.0 && bounds.contains(b - 1)).then(|| rates.p(a, b - 1) / fa)
    };
    let s_q = |a: i32, b: i32| {
        let fb = rates.f(b);
        (fb > 0.0 && bounds.contains(a - 1)).then(|| rates.q(a - 1, b) / fb)
    };
    let mut max_sym = 0.0f64;
    for &a in &vals {
        for &b in &vals {
            for s in [&s_p as &dyn Fn(i32, i32) -> Option<f64>, &s_q] {
                if let (Some(u), Some(v)) = (s(a, b), s(b, a)) {
                    max_sym = max_sym.max((u - v).abs() / u.abs().max(v.abs()).max(1.0));
                }
            }
        }
    }

    let mut boundary_violations = Vec::new();
    if let Bound::Finite(lo) = bounds.omega_min {
        if rates.f(lo) != 0.0 {
            boundary_violations.push(format!("f(omega_min) = {} != 0", rates.f(lo)));
        }
        for &v in &vals {
            if rates.p(lo, v) != 0.0 {
                boundary_violations.push(format!("p({lo}, {v}) != 0"));
            }
            if rates.q(v, lo) != 0.0 {
                boundary_violations.push(format!("q({v}, {lo}) != 0"));
            }
        }
    }
    if let Bound::Finite(hi) = bounds.omega_max {
        for &v in &vals {
            if rates.p(v, hi) != 0.0 {
                boundary_violations.push(format!("p({v}, {hi}) != 0"));
            }
            if rates.q(hi, v) != 0.0 {
                boundary_violations.push(format!("q({hi}, {v}) != 0"));
            }
        }
    }

    ConsistencyReport {
        probe: (*probe.start(), *probe.end()),
        triples_checked: triples,
        max_cyclic_defect: max_cyclic,
        max_abs_cyclic_defect: max_abs,
        max_symmetry_defect: max_sym,
        boundary_violations,
        tolerance: CONSISTENCY_TOLERANCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn asep() -> Model {
        Model::asep(0.7, 0.3).unwrap()
    }

    #[test]
    fn asep_rates() {
        let m = asep();
        assert_eq!(m.rate_p(1, 0).unwrap(), 0.7);
        assert_eq!(m.rate_p(0, 0).unwrap(), 0.0);
        assert_eq!(m.rate_q(0, 1).unwrap(), 0.3);
        assert!(matches!(m.rate_p(2, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn exponential_rates() {
        let g = Model::gzrp(1.0).unwrap();
        assert_relative_eq!(g.rate_p(2, 17).unwrap(), 4.481_689_070_338_065, max_relative = 1e-14);
        for y in -4..4 {
            for z in -4..4 {
                assert_eq!(g.rate_q(y, z).unwrap(), 0.0);
            }
        }
        let b = Model::blp(1.0).unwrap();
        assert_eq!(b.rate_q(3, -2).unwrap(), 0.0);
        assert_relative_eq!(
            b.rate_p(1, 2).unwrap(),
            (0.5f64).exp() + (-2.5f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn factorials() {
        for m in [asep(), Model::gzrp(1.0).unwrap(), Model::blp(0.7).unwrap()] {
            assert_eq!(m.f_factorial(0).unwrap(), 1.0);
        }
        let g = Model::gzrp(1.0).unwrap();
        assert_relative_eq!(g.f_factorial(2).unwrap(), 7.389_056_098_930_65, max_relative = 1e-14);
        assert_relative_eq!(g.f_factorial(-1).unwrap(), 1.648_721_270_700_128, max_relative = 1e-14);
        let bcrw = Model::bcrw(BcrwRates::new(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(bcrw.f_factorial(0), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn closed_form_factorial_matches_product() {
        struct Generic(GrowthModel);
        impl RateFunctions for Generic {
            fn bounds(&self) -> StateBounds {
                self.0.bounds()
            }
            fn p(&self, y: i32, z: i32) -> f64 {
                self.0.p(y, z)
            }
            fn q(&self, y: i32, z: i32) -> f64 {
                self.0.q(y, z)
            }
            fn f(&self, z: i32) -> f64 {
                self.0.f(z)
            }
        }
        let g = Model::blp(0.8).unwrap().growth().unwrap();
        let generic = Generic(g);
        for z in -12..=12 {
            assert_relative_eq!(
                g.ln_f_factorial(z),
                generic.ln_f_factorial(z),
                epsilon = 1e-12,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(Model::asep(0.3, 0.7).is_err());
        assert!(Model::asep(0.7, 0.2).is_err());
        assert!(Model::gzrp(0.0).is_err());
        assert!(Model::blp(-1.0).is_err());
        assert!(BcrwRates::new(1.0, 0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(StateBounds::new(Bound::Finite(1), Bound::Infinite).is_err());
        assert!(StateBounds::new(Bound::Infinite, Bound::Finite(0)).is_err());
    }

    #[test]
    fn attractivity_of_shipped_models() {
        let r = check_attractivity(&asep().growth().unwrap(), 0..=1);
        assert!(r.pass());
        let g = Model::gzrp(1.0).unwrap().growth().unwrap();
        assert!(check_attractivity(&g, -10..=10).pass());
        let b = Model::blp(1.0).unwrap().growth().unwrap();
        assert!(check_attractivity(&b, -10..=10).pass());
    }

    #[test]
    fn attractivity_detects_decreasing_f() {
        struct Decreasing;
        impl RateFunctions for Decreasing {
            fn bounds(&self) -> StateBounds {
                StateBounds::unbounded()
            }
            fn p(&self, y: i32, _z: i32) -> f64 {
                self.f(y)
            }
            fn q(&self, _y: i32, _z: i32) -> f64 {
                0.0
            }
            fn f(&self, z: i32) -> f64 {
                (-(z as f64)).exp()
            }
        }
        let r = check_attractivity(&Decreasing, -3..=3);
        assert!(!r.pass());
        assert!(r.violations.iter().all(|v| v.inequality == "p(z+1,y) >= p(z,y)"));
        assert_eq!(r.violations.len(), 7 * 6);
    }

    #[test]
    fn rate_consistency() {
        let r = check_rate_consistency(&asep().growth().unwrap(), 0..=1);
        assert_eq!(r.triples_checked, 8);
        assert_eq!(r.max_defect(), 0.0);
        assert!(r.pass());
        let b = Model::blp(1.0).unwrap().growth().unwrap();
        let r = check_rate_consistency(&b, -5..=5);
        assert!(r.max_abs_cyclic_defect < 1e-12, "{r:?}");
        assert!(r.pass());
        let g = Model::gzrp(1.0).unwrap().growth().unwrap();
        let r = check_rate_consistency(&g, -5..=5);
        assert!(r.max_cyclic_defect < 1e-15, "{r:?}");
        assert!(r.pass());
    }

    #[test]
    fn blp_reflection_identity() {
        let b = Model::blp(1.0).unwrap().growth().unwrap();
        for z in -12..=12 {
            assert_relative_eq!(b.f(z) * b.f(1 - z), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn bcrw_event_rate_table() {
        let r = BcrwRates::new(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let t = bcrw_event_rates(&r, 1, 0).unwrap();
        let positive: Vec<_> = t.iter().filter(|(_, v)| *v > 0.0).collect();
        assert_eq!(
            positive,
            vec![&(BcrwEvent::JumpRight, 1.0), &(BcrwEvent::BranchRight, 1.0)]
        );
        assert!(bcrw_event_rates(&r, 0, 0).unwrap().iter().all(|(_, v)| *v == 0.0));
        let t = bcrw_event_rates(&r, 1, 1).unwrap();
        let positive: Vec<_> = t.iter().filter(|(_, v)| *v > 0.0).map(|(e, _)| *e).collect();
        assert_eq!(positive, vec![BcrwEvent::CoalesceRight, BcrwEvent::CoalesceLeft]);
        assert!(bcrw_event_rates(&r, 2, 0).is_err());
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_string(&asep()).unwrap();
        assert_eq!(json, r#"{"kind":"asep","p":0.7,"q":0.3}"#);
        let m: Model = serde_json::from_str(r#"{"kind":"gzrp","beta":1.0}"#).unwrap();
        assert_eq!(m, Model::gzrp(1.0).unwrap());
    }
}
