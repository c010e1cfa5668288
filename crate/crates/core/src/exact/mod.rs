//! Generators applied to cylinder functions, exact expectations under
//! product measures, and the shock identities as numerical checks.

mod engine;
mod proof_terms;
mod theorems;

pub use engine::{
    expect_generator, solve_identity, BasisPolicy, EngineConfig, IdentityProblem, IdentitySolution, Residual,
    DEFAULT_ENUMERATION_CAP,
};
pub use proof_terms::{proof_term_decomposition, ProofTermReport, TermSummary, DEFAULT_PROBE_HALF_WIDTH};
pub use theorems::{
    asep_single_rate_forms, bcrw_theorem_rates, multi_shock_edge_rates, single_shock_rates,
    single_shock_rates_unchecked, verify_bcrw_stationary, verify_stationary, verify_theorem_3_1, verify_theorem_3_3,
    verify_theorem_5_1, VerificationReport, TOLERANCE_BOUNDED, TOLERANCE_TRUNCATED,
};

use crate::dynamics::{Bcrw, Coupled, EdgeDynamics, Move, Pair, Single, SiteState};
use crate::error::{Error, Result};
use crate::models::{Model, RateFunctions};

type Eval<S> = Box<dyn Fn(&[S]) -> f64 + Send + Sync>;

/// Real function of the states on the sites `window.0 ..= window.1`.
pub struct CylinderFunction<S> {
    pub window: (i32, i32),
    eval: Eval<S>,
}

impl<S: SiteState + 'static> CylinderFunction<S> {
    pub fn new(window: (i32, i32), eval: impl Fn(&[S]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            window,
            eval: Box::new(eval),
        }
    }

    pub fn constant(window: (i32, i32), c: f64) -> Self {
        Self::new(window, move |_| c)
    }

    /// Indicator of one window configuration.
    pub fn indicator(window: (i32, i32), config: Vec<S>) -> Self {
        Self::new(window, move |w| (w == config.as_slice()) as u8 as f64)
    }

    /// Function of the state at a single site.
    pub fn site(i: i32, f: impl Fn(S) -> f64 + Send + Sync + 'static) -> Self {
        Self::new((i, i), move |w| f(w[0]))
    }

    pub fn eval(&self, window_values: &[S]) -> f64 {
        (self.eval)(window_values)
    }

    pub fn eval_on(&self, config: &Configuration<S>) -> f64 {
        let (a, b) = self.window;
        let lo = (a - config.lo) as usize;
        let hi = (b - config.lo) as usize;
        (self.eval)(&config.values[lo..=hi])
    }
}

/// States on consecutive sites starting at `lo`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration<S> {
    pub lo: i32,
    pub values: Vec<S>,
}

impl<S: SiteState> Configuration<S> {
    pub fn new(lo: i32, values: Vec<S>) -> Self {
        Self { lo, values }
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.values.len() as i32 - 1
    }

    pub fn get(&self, i: i32) -> S {
        self.values[(i - self.lo) as usize]
    }

    pub fn with_edge(&self, i: i32, left: S, right: S) -> Self {
        let mut out = self.clone();
        let k = (i - self.lo) as usize;
        out.values[k] = left;
        out.values[k + 1] = right;
        out
    }

    fn covers(&self, window: (i32, i32)) -> Result<()> {
        if self.lo < window.0 && self.hi() > window.1 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "configuration on [{}, {}] must cover [{}, {}]",
                self.lo,
                self.hi(),
                window.0 - 1,
                window.1 + 1
            )))
        }
    }
}

/// `sum_{i=a-1}^{b} sum_moves rate * [phi(after) - phi(before)]` for any edge dynamics.
pub fn apply_edges<D: EdgeDynamics>(
    dynamics: &D,
    phi: &CylinderFunction<D::State>,
    config: &Configuration<D::State>,
) -> Result<f64>
where
    D::State: 'static,
{
    config.covers(phi.window)?;
    let base = phi.eval_on(config);
    let mut moves: Vec<Move<D::State>> = Vec::with_capacity(6);
    let mut total = 0.0;
    for i in phi.window.0 - 1..=phi.window.1 {
        moves.clear();
        dynamics.edge_moves(config.get(i), config.get(i + 1), &mut moves);
        for m in &moves {
            total += m.rate * (phi.eval_on(&config.with_edge(i, m.left, m.right)) - base);
        }
    }
    Ok(total)
}

fn check_in_bounds(model: &Model, values: impl Iterator<Item = i32>) -> Result<()> {
    let b = model.bounds();
    for v in values {
        b.check(v)?;
    }
    Ok(())
}

/// Single-process generator applied to `phi` at `config`.
pub fn apply_generator_single(model: &Model, phi: &CylinderFunction<i32>, config: &Configuration<i32>) -> Result<f64> {
    let g = model.growth()?;
    check_in_bounds(model, config.values.iter().copied())?;
    apply_edges(&Single(g), phi, config)
}

/// Coupled generator of an ordered pair, all six rate terms per edge.
pub fn apply_generator_coupled_general(
    model: &Model,
    phi: &CylinderFunction<Pair>,
    config: &Configuration<Pair>,
) -> Result<f64> {
    let g = model.growth()?;
    check_in_bounds(model, config.values.iter().flat_map(|p| [p.omega, p.zeta]))?;
    if let Some((k, p)) = config.values.iter().enumerate().find(|(_, p)| p.omega > p.zeta) {
        return Err(Error::Domain(format!(
            "order violated at site {}: omega {} > zeta {}",
            config.lo + k as i32,
            p.omega,
            p.zeta
        )));
    }
    apply_edges(&Coupled(g), phi, config)
}

/// Coupled generator for `zeta = omega + delta^j`, written out line by line
/// for the edges touching the second class particle.
pub fn apply_generator_coupled_single_shock(
    model: &Model,
    phi: &CylinderFunction<Pair>,
    config: &Configuration<Pair>,
) -> Result<f64> {
    let g = model.growth()?;
    check_in_bounds(model, config.values.iter().flat_map(|p| [p.omega, p.zeta]))?;
    config.covers(phi.window)?;
    let disc: Vec<i32> = config
        .values
        .iter()
        .enumerate()
        .filter(|(_, p)| p.zeta != p.omega)
        .map(|(k, _)| config.lo + k as i32)
        .collect();
    let j = match disc.as_slice() {
        [j] if config.get(*j).discrepancy() == 1 => *j,
        _ => {
            return Err(Error::Domain(
                "pair must differ by exactly one second class particle".into(),
            ))
        }
    };
    let w = |i: i32| config.get(i).omega;
    let p = |y: i32, z: i32| g.p_or_zero(y, z);
    let q = |y: i32, z: i32| g.q_or_zero(y, z);
    let base = phi.eval_on(config);
    let diff = |c: Configuration<Pair>| phi.eval_on(&c) - base;

    // (omega', zeta') after moving a unit from `from` to `to` in the chosen copies
    let moved = |from: i32, to: i32, om: bool, ze: bool| {
        let mut c = config.clone();
        let kf = (from - c.lo) as usize;
        let kt = (to - c.lo) as usize;
        if om {
            c.values[kf].omega -= 1;
            c.values[kt].omega += 1;
        }
        if ze {
            c.values[kf].zeta -= 1;
            c.values[kt].zeta += 1;
        }
        c
    };

    let mut total = 0.0;
    let mut add = |rate: f64, c: &dyn Fn() -> Configuration<Pair>| {
        if rate != 0.0 {
            total += rate * diff(c());
        }
    };
    for i in phi.window.0 - 1..=phi.window.1 {
        if i == j - 1 {
            add(p(w(j - 1), w(j) + 1), &|| moved(j - 1, j, true, true));
            add(p(w(j - 1), w(j)) - p(w(j - 1), w(j) + 1), &|| {
                moved(j - 1, j, true, false)
            });
            add(q(w(j - 1), w(j)), &|| moved(j, j - 1, true, true));
            add(q(w(j - 1), w(j) + 1) - q(w(j - 1), w(j)), &|| {
                moved(j, j - 1, false, true)
            });
        } else if i == j {
            add(p(w(j), w(j + 1)), &|| moved(j, j + 1, true, true));
            add(p(w(j) + 1, w(j + 1)) - p(w(j), w(j + 1)), &|| {
                moved(j, j + 1, false, true)
            });
            add(q(w(j) + 1, w(j + 1)), &|| moved(j + 1, j, true, true));
            add(q(w(j), w(j + 1)) - q(w(j) + 1, w(j + 1)), &|| {
                moved(j + 1, j, true, false)
            });
        } else {
            add(p(w(i), w(i + 1)), &|| moved(i, i + 1, true, true));
            add(q(w(i), w(i + 1)), &|| moved(i + 1, i, true, true));
        }
    }
    Ok(total)
}

/// BCRW generator applied to `phi` at `config`.
pub fn apply_generator_bcrw(model: &Model, phi: &CylinderFunction<u8>, config: &Configuration<u8>) -> Result<f64> {
    let rates = model.bcrw_rates()?;
    if let Some(v) = config.values.iter().find(|&&v| v > 1) {
        return Err(Error::Domain(format!("BCRW occupancy must be 0 or 1, got {v}")));
    }
    apply_edges(&Bcrw(*rates), phi, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BcrwRates;

    #[test]
    fn constants_are_killed() {
        let m = Model::gzrp(1.0).unwrap();
        let phi = CylinderFunction::constant((-1, 1), 3.0);
        let c = Configuration::new(-2, vec![0, 3, -1, 2, 5]);
        assert_eq!(apply_generator_single(&m, &phi, &c).unwrap(), 0.0);
    }

    #[test]
    fn asep_single_site_occupation() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let phi = CylinderFunction::site(0, |v: i32| v as f64);
        // sites -2..=2: 0 1 1 0 0, particle at 0 can hop right (p) or stay
        let c = Configuration::new(-2, vec![0, 1, 1, 0, 0]);
        let v = apply_generator_single(&m, &phi, &c).unwrap();
        assert!((v - (-0.7)).abs() < 1e-15);
    }

    #[test]
    fn gzrp_gradient() {
        let m = Model::gzrp(1.0).unwrap();
        let g = m.growth().unwrap();
        let phi = CylinderFunction::site(0, |v: i32| v as f64);
        let c = Configuration::new(-1, vec![2, -1, 4]);
        let v = apply_generator_single(&m, &phi, &c).unwrap();
        assert!((v - (g.f(2) - g.f(-1))).abs() < 1e-14);
    }

    #[test]
    fn single_shock_literal_matches_general() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let phi = CylinderFunction::new((-1, 1), |w: &[Pair]| {
            w.iter()
                .enumerate()
                .map(|(k, p)| (k + 1) as f64 * (p.zeta + 2 * p.omega) as f64)
                .sum()
        });
        for code in 0..32u32 {
            let mut vals: Vec<Pair> = (0..5).map(|k| Pair::diagonal(((code >> k) & 1) as i32)).collect();
            if vals[2].omega == 1 {
                continue;
            }
            vals[2].zeta = 1;
            let c = Configuration::new(-2, vals);
            let a = apply_generator_coupled_single_shock(&m, &phi, &c).unwrap();
            let b = apply_generator_coupled_general(&m, &phi, &c).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shock_pair_form_is_validated() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let phi = CylinderFunction::constant((-1, 1), 1.0);
        let c = Configuration::new(-2, vec![Pair::diagonal(0); 5]);
        assert!(apply_generator_coupled_single_shock(&m, &phi, &c).is_err());
        let mut v = vec![Pair::diagonal(0); 5];
        v[1] = Pair::new(1, 0);
        assert!(apply_generator_coupled_general(&m, &phi, &Configuration::new(-2, v)).is_err());
    }

    #[test]
    fn bcrw_examples() {
        let r = BcrwRates::new(1.0, 0.5, 1.0, 1.5, 1.0, 1.0).unwrap();
        let m = Model::bcrw(r).unwrap();
        let phi = CylinderFunction::site(1, |v: u8| v as f64);
        let c = Configuration::new(-1, vec![0, 1, 0, 0]);
        let v = apply_generator_bcrw(&m, &phi, &c).unwrap();
        assert!((v - (r.p + r.b_r)).abs() < 1e-15);
        let empty = Configuration::new(-1, vec![0u8; 4]);
        let phi = CylinderFunction::new((0, 1), |w: &[u8]| (w[0] + 2 * w[1]) as f64);
        assert_eq!(apply_generator_bcrw(&m, &phi, &empty).unwrap(), 0.0);
    }
}
