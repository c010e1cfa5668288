//! Random-walk rates of the shock identities and their verification over the
//! full indicator basis of a window.

use std::collections::BTreeMap;

use serde::Serialize;

use super::engine::{solve_identity, EngineConfig, IdentityProblem, IdentitySolution, Residual};
use crate::dynamics::{Bcrw, Coupled, EdgeDynamics, Single};
use crate::error::{Error, Result};
use crate::measures::{
    marginal, BcrwShockSpec, Bernoulli, MultiShockSpec, Orientation, ProductFamily, ShockSpec, Stationary, Truncation,
    CONDITION_TOLERANCE,
};
use crate::models::{BcrwRates, Model};

/// Residual tolerance for finitely supported models.
pub const TOLERANCE_BOUNDED: f64 = 1e-12;
/// Residual tolerance for truncated unbounded models.
pub const TOLERANCE_TRUNCATED: f64 = 1e-8;

fn tolerance_for(model: &Model) -> f64 {
    if model.bounds().is_bounded() {
        TOLERANCE_BOUNDED
    } else {
        TOLERANCE_TRUNCATED
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub window: (i32, i32),
    pub basis_size: u64,
    /// Band half-width if the basis was restricted around the mode.
    pub band: Option<i32>,
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    pub argmax: Option<Residual>,
    pub truncation_budget: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl VerificationReport {
    fn new(theorem: &str, model: &Model, window: (i32, i32), sol: IdentitySolution) -> Self {
        let tolerance = tolerance_for(model);
        Self {
            theorem: theorem.into(),
            model: model.name().into(),
            params: model_params(model),
            window,
            basis_size: sol.basis_size,
            band: sol.band,
            pass: sol.max_residual <= tolerance + sol.truncation_budget,
            residuals: sol.residuals,
            max_residual: sol.max_residual,
            argmax: sol.argmax,
            truncation_budget: sol.truncation_budget,
            tolerance,
            diagnostics: BTreeMap::new(),
        }
    }

    fn param(mut self, k: &str, v: f64) -> Self {
        self.params.insert(k.into(), v);
        self
    }

    fn diag(mut self, k: &str, v: f64) -> Self {
        self.diagnostics.insert(k.into(), v);
        self
    }
}

fn model_params(model: &Model) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    match *model {
        Model::Asep { p, q } => {
            m.insert("p".into(), p);
            m.insert("q".into(), q);
        }
        Model::Gzrp { beta } | Model::Blp { beta } => {
            m.insert("beta".into(), beta);
        }
        Model::Bcrw(r) => {
            for (k, v) in [
                ("p", r.p),
                ("q", r.q),
                ("b_l", r.b_l),
                ("b_r", r.b_r),
                ("c_l", r.c_l),
                ("c_r", r.c_r),
            ] {
                m.insert(k.into(), v);
            }
        }
    }
    m
}

fn check_margins(window: (i32, i32), lo: i32, hi: i32) -> Result<()> {
    if window.0 > lo - 2 || window.1 < hi + 2 {
        return Err(Error::param(
            "window",
            format!(
                "[{}, {}] must reach two sites beyond the second class particles at [{lo}, {hi}]",
                window.0, window.1
            ),
        ));
    }
    Ok(())
}

/// The three expressions for `P` and two for `Q` in the ASEP single shock.
///
/// `P = (1-lambda)p + lambda q = (1-lambda)p/(1-rho) = lambda q/rho`,
/// `Q = (1-rho)q + rho p = q(1-rho)/(1-lambda)`; they agree exactly when the
/// densities satisfy the shock condition.
pub fn asep_single_rate_forms(p: f64, q: f64, rho: f64, lambda: f64) -> ([f64; 3], [f64; 2]) {
    (
        [
            (1.0 - lambda) * p + lambda * q,
            (1.0 - lambda) * p / (1.0 - rho),
            lambda * q / rho,
        ],
        [(1.0 - rho) * q + rho * p, q * (1.0 - rho) / (1.0 - lambda)],
    )
}

/// `(P, Q)` of the single shock without checking its condition.
pub fn single_shock_rates_unchecked(spec: &ShockSpec) -> Result<(f64, f64)> {
    match spec.model {
        Model::Asep { p, q } => {
            let (rho, lambda) = spec.densities();
            let (pf, qf) = asep_single_rate_forms(p, q, rho, lambda);
            Ok((pf[0], qf[0]))
        }
        Model::Gzrp { .. } => Ok((spec.theta.exp() - spec.sigma.exp(), 0.0)),
        Model::Blp { .. } => Ok((
            spec.theta.exp() - spec.sigma.exp(),
            (-spec.sigma).exp() - (-spec.theta).exp(),
        )),
        Model::Bcrw(_) => Err(spec.model.unsupported("coupled single shock")),
    }
}

/// `(P, Q)` of the single shock, after re-checking its condition.
pub fn single_shock_rates(spec: &ShockSpec) -> Result<(f64, f64)> {
    spec.check_condition()?;
    single_shock_rates_unchecked(spec)
}

/// `(P_i, Q_i)`: rates at which a second class particle crosses edge
/// `(i, i+1)` to the right and to the left.
pub fn multi_shock_edge_rates(spec: &MultiShockSpec, i: i32) -> Result<(f64, f64)> {
    let (mi, mj) = (spec.m.get(i) as f64, spec.m.get(i + 1) as f64);
    match spec.model {
        Model::Asep { p, q } => {
            let (ri, rj) = (spec.density(i), spec.density(i + 1));
            Ok((
                mi * (1.0 - mj) * ((1.0 - rj) * p + rj * q),
                (1.0 - mi) * mj * ((1.0 - ri) * q + ri * p),
            ))
        }
        Model::Gzrp { beta } | Model::Blp { beta } => {
            let si = spec.sigma.get(i);
            let sj = spec.sigma.get(i + 1);
            let right = (si + beta * mi).exp() - si.exp();
            let left = match spec.model {
                Model::Blp { .. } => (-sj).exp() - (-sj - beta * mj).exp(),
                _ => 0.0,
            };
            Ok((right, left))
        }
        Model::Bcrw(_) => Err(spec.model.unsupported("coupled multi shock")),
    }
}

fn bcrw_condition_defect(r: &BcrwRates, orientation: Orientation) -> f64 {
    let (b, c) = (r.branching(), r.coalescence());
    match orientation {
        Orientation::Right => (r.p - r.b_r * c / b).abs(),
        Orientation::Mirror => (r.q - r.b_l * c / b).abs(),
    }
}

fn bcrw_rates_unchecked(r: &BcrwRates, orientation: Orientation) -> (f64, f64) {
    let (b, c) = (r.branching(), r.coalescence());
    match orientation {
        Orientation::Right => (r.p * (c + b) / c, r.q * c / (c + b) + r.c_l * b / (c + b)),
        Orientation::Mirror => (r.p * c / (c + b) + r.c_r * b / (c + b), r.q * (c + b) / c),
    }
}

/// Rates `(to the right, to the left)` of the BCRW shock position.
///
/// With the empty side on the right these are `P = p(C+B)/C` and
/// `Q = qC/(C+B) + c_l B/(C+B)`; the mirror case swaps the roles.
pub fn bcrw_theorem_rates(rates: &BcrwRates, orientation: Orientation) -> Result<(f64, f64)> {
    let defect = bcrw_condition_defect(rates, orientation);
    if !(defect <= CONDITION_TOLERANCE) {
        return Err(Error::Condition {
            condition: match orientation {
                Orientation::Right => "p = b_r C/B".into(),
                Orientation::Mirror => "q = b_l C/B".into(),
            },
            site: None,
            defect,
        });
    }
    Ok(bcrw_rates_unchecked(rates, orientation))
}

/// Single shock identity
/// `E_{nu_j}(L phi) = P[E_{nu_{j+1}} phi - E_{nu_j} phi] + Q[E_{nu_{j-1}} phi - E_{nu_j} phi]`.
///
/// Uses the rates at face value so that force-built specs act as negative controls.
pub fn verify_theorem_3_1(spec: &ShockSpec, window: (i32, i32), cfg: &EngineConfig) -> Result<VerificationReport> {
    check_margins(window, spec.j, spec.j)?;
    let (p_rate, q_rate) = single_shock_rates_unchecked(spec)?;
    let (a, b) = window;
    let mut rhs = Vec::new();
    if p_rate != 0.0 {
        rhs.push((p_rate, spec.at(spec.j + 1).product(a, b)?));
    }
    if q_rate != 0.0 {
        rhs.push((q_rate, spec.at(spec.j - 1).product(a, b)?));
    }
    let prob = IdentityProblem {
        window,
        lhs: spec.product(a - 1, b + 1)?,
        rhs,
    };
    let sol = solve_identity(&Coupled(spec.model.growth()?), &prob, cfg)?;
    let mut rep = VerificationReport::new("single_shock", &spec.model, window, sol)
        .param("theta", spec.theta)
        .param("sigma", spec.sigma)
        .param("j", spec.j as f64)
        .diag("P", p_rate)
        .diag("Q", q_rate);
    if let Model::Asep { .. } = spec.model {
        let (rho, lambda) = spec.densities();
        rep = rep.param("rho", rho).param("lambda", lambda);
    }
    Ok(rep)
}

/// Multi shock identity: the sum over edges of the jump terms, restricted to
/// edges touching the window.
pub fn verify_theorem_3_3(spec: &MultiShockSpec, window: (i32, i32), cfg: &EngineConfig) -> Result<VerificationReport> {
    let pos = spec.positions();
    let (lo, hi) = match (pos.first(), pos.last()) {
        (Some(&l), Some(&h)) => (l, h),
        _ => (window.0 + 2, window.1 - 2),
    };
    check_margins(window, lo, hi)?;
    let (a, b) = window;
    let mut rhs = Vec::new();
    let mut diag = BTreeMap::new();
    for i in a - 1..=b {
        let (pr, qr) = multi_shock_edge_rates(spec, i)?;
        if pr != 0.0 && spec.m.get(i) > 0 {
            rhs.push((pr, spec.jump_right(i)?.product(a, b)?));
            diag.insert(format!("P_{i}"), pr);
        }
        if qr != 0.0 && spec.m.get(i + 1) > 0 {
            rhs.push((qr, spec.jump_left(i)?.product(a, b)?));
            diag.insert(format!("Q_{i}"), qr);
        }
    }
    let prob = IdentityProblem {
        window,
        lhs: spec.product(a - 1, b + 1)?,
        rhs,
    };
    let sol = solve_identity(&Coupled(spec.model.growth()?), &prob, cfg)?;
    let mut rep = VerificationReport::new("multi_shock", &spec.model, window, sol);
    for i in a - 1..=b + 1 {
        let m = spec.m.get(i);
        if m > 0 {
            rep = rep.param(&format!("m_{i}"), m as f64);
        }
        let s = spec.sigma.get(i);
        rep = match spec.model {
            Model::Asep { .. } => rep.param(&format!("rho_{i}"), spec.density(i)),
            _ => rep.param(&format!("sigma_{i}"), s),
        };
    }
    rep.diagnostics.extend(diag);
    Ok(rep)
}

/// BCRW identity `E_{mu_j}(L phi) = P[mu_{j+1} phi - mu_j phi] + Q[mu_{j-1} phi - mu_j phi]`
/// (for the mirror case the roles of the two directions swap).
pub fn verify_theorem_5_1(spec: &BcrwShockSpec, window: (i32, i32), cfg: &EngineConfig) -> Result<VerificationReport> {
    check_margins(window, spec.j, spec.j)?;
    let (a, b) = window;
    let (right, left) = bcrw_rates_unchecked(&spec.rates, spec.orientation);
    let prob = IdentityProblem {
        window,
        lhs: spec.product(a - 1, b + 1)?,
        rhs: vec![
            (right, spec.at(spec.j + 1).product(a, b)?),
            (left, spec.at(spec.j - 1).product(a, b)?),
        ],
    };
    let sol = solve_identity(&Bcrw(spec.rates), &prob, cfg)?;
    let model = Model::Bcrw(spec.rates);
    let orientation = match spec.orientation {
        Orientation::Right => 0.0,
        Orientation::Mirror => 1.0,
    };
    Ok(VerificationReport::new("bcrw_shock", &model, window, sol)
        .param("j", spec.j as f64)
        .param("mirror", orientation)
        .param("rho_star", spec.rho_star)
        .diag("rate_right", right)
        .diag("rate_left", left)
        .diag("condition_defect", bcrw_condition_defect(&spec.rates, spec.orientation)))
}

fn stationary_report<D: EdgeDynamics>(
    d: &D,
    lhs: crate::measures::ProductMeasure<D::State>,
    model: &Model,
    window: (i32, i32),
    cfg: &EngineConfig,
) -> Result<VerificationReport> {
    let prob = IdentityProblem {
        window,
        lhs,
        rhs: Vec::new(),
    };
    let sol = solve_identity(d, &prob, cfg)?;
    Ok(VerificationReport::new("stationarity", model, window, sol))
}

/// `E_{mu^theta}(L phi) = 0` for every indicator on the window.
pub fn verify_stationary(
    model: &Model,
    theta: f64,
    window: (i32, i32),
    trunc: &Truncation,
    cfg: &EngineConfig,
) -> Result<VerificationReport> {
    let mg = marginal(model, theta, trunc)?;
    let rho = mg.mean();
    let lhs = Stationary(mg).product(window.0 - 1, window.1 + 1)?;
    Ok(stationary_report(&Single(model.growth()?), lhs, model, window, cfg)?
        .param("theta", theta)
        .param("rho", rho))
}

/// BCRW stationarity of the Bernoulli product with density `rho`
/// (holds for `rho*` and for the empty lattice).
pub fn verify_bcrw_stationary(
    model: &Model,
    rho: f64,
    window: (i32, i32),
    cfg: &EngineConfig,
) -> Result<VerificationReport> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("must be in [0, 1], got {rho}")));
    }
    let rates = model.bcrw_rates()?;
    let lhs = Bernoulli(rho).product(window.0 - 1, window.1 + 1)?;
    Ok(stationary_report(&Bcrw(*rates), lhs, model, window, cfg)?.param("rho", rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn asep_rate_forms_agree() {
        let (pf, qf) = asep_single_rate_forms(0.7, 0.3, 0.3, 0.5);
        for v in pf {
            assert_relative_eq!(v, 0.5, epsilon = 1e-15);
        }
        for v in qf {
            assert_relative_eq!(v, 0.42, epsilon = 1e-15);
        }
    }

    #[test]
    fn exponential_rates() {
        let t = Truncation::default();
        let g = ShockSpec::build(&Model::gzrp(1.0).unwrap(), 0.5, -0.5, 0, &t).unwrap();
        let (p, q) = single_shock_rates(&g).unwrap();
        assert_relative_eq!(p, 1.042190, epsilon = 1e-6);
        assert_eq!(q, 0.0);
        let b = ShockSpec::build(&Model::blp(1.0).unwrap(), 1.0, 0.0, 0, &t).unwrap();
        let (p, q) = single_shock_rates(&b).unwrap();
        assert_relative_eq!(p, 1.718282, epsilon = 1e-6);
        assert_relative_eq!(q, 0.632121, epsilon = 1e-6);
    }

    #[test]
    fn broken_condition_is_reported() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let s = ShockSpec::asep_from_densities_unchecked(&m, 0.3, 0.55, 0).unwrap();
        assert!(matches!(single_shock_rates(&s), Err(Error::Condition { .. })));
    }

    #[test]
    fn bcrw_rates_and_condition() {
        let r = BcrwRates::new(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (p, q) = bcrw_theorem_rates(&r, Orientation::Right).unwrap();
        assert_relative_eq!(p, 2.0);
        assert_relative_eq!(q, 0.75);
        let bad = BcrwRates::new(1.1, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(bcrw_theorem_rates(&bad, Orientation::Right).is_err());
        let mirror = BcrwRates::new(0.5, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (right, left) = bcrw_theorem_rates(&mirror, Orientation::Mirror).unwrap();
        assert_relative_eq!(left, 2.0);
        assert_relative_eq!(right, 0.75);
    }

    #[test]
    fn asep_single_shock_small_window() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let s = ShockSpec::asep_from_densities(&m, 0.3, 0.5, 0).unwrap();
        let r = verify_theorem_3_1(&s, (-2, 2), &EngineConfig::default()).unwrap();
        assert!(r.pass, "{}", r.max_residual);
        assert!(r.max_residual < 1e-13);
    }

    #[test]
    fn window_margins_enforced() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let s = ShockSpec::asep_from_densities(&m, 0.3, 0.5, 0).unwrap();
        assert!(verify_theorem_3_1(&s, (-1, 3), &EngineConfig::default()).is_err());
    }
}
