//! Stationary marginals, coupled shock measures and their product laws.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Pair, SiteState};
use crate::error::{Error, Result};
use crate::models::{BcrwRates, Model, RateFunctions};

/// How unbounded marginals are cut to a finite table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// `K`: the support is `[c - K, c + K]` around `c = round(theta / beta)`.
    pub half_width: i32,
    /// Largest acceptable omitted probability mass.
    pub tolerance: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            half_width: 12,
            tolerance: 1e-12,
        }
    }
}

impl Truncation {
    pub fn new(half_width: i32, tolerance: f64) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::param("K", format!("must be >= 1, got {half_width}")));
        }
        if !(tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        Ok(Self { half_width, tolerance })
    }
}

/// Law of one site of a product measure: finitely many atoms plus bounds on
/// the mass (and the rate-weighted mass) that was cut away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteLaw<S> {
    pub atoms: Vec<(S, f64)>,
    pub tail_bound: f64,
    pub weighted_tail_bound: f64,
}

impl<S: SiteState> SiteLaw<S> {
    pub fn point(s: S) -> Self {
        Self {
            atoms: vec![(s, 1.0)],
            tail_bound: 0.0,
            weighted_tail_bound: 0.0,
        }
    }

    pub fn prob(&self, s: S) -> f64 {
        self.atoms.iter().find(|(t, _)| *t == s).map_or(0.0, |(_, w)| *w)
    }

    pub fn map<T: SiteState>(&self, f: impl Fn(S) -> T) -> SiteLaw<T> {
        SiteLaw {
            atoms: self.atoms.iter().map(|&(s, w)| (f(s), w)).collect(),
            tail_bound: self.tail_bound,
            weighted_tail_bound: self.weighted_tail_bound,
        }
    }

    /// Inverse-CDF draw from the atoms.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> S {
        let total: f64 = self.atoms.iter().map(|a| a.1).sum();
        let mut u = rng.gen::<f64>() * total;
        for &(s, w) in &self.atoms {
            if u < w {
                return s;
            }
            u -= w;
        }
        // rounding left u just above the last cumulative sum
        self.atoms
            .iter()
            .rev()
            .find(|a| a.1 > 0.0)
            .expect("law has positive mass")
            .0
    }

    /// Most likely atom.
    pub fn mode(&self) -> S {
        self.atoms
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("law has atoms")
            .0
    }
}

/// Product measure restricted to the sites `lo ..= lo + sites.len() - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure<S> {
    pub lo: i32,
    pub sites: Vec<SiteLaw<S>>,
}

impl<S: SiteState> ProductMeasure<S> {
    pub fn hi(&self) -> i32 {
        self.lo + self.sites.len() as i32 - 1
    }

    pub fn law(&self, i: i32) -> &SiteLaw<S> {
        &self.sites[(i - self.lo) as usize]
    }

    /// Probability of the cylinder set `{eta_i = config[i - lo]}`.
    pub fn prob(&self, lo: i32, config: &[S]) -> f64 {
        config
            .iter()
            .enumerate()
            .map(|(k, &s)| self.law(lo + k as i32).prob(s))
            .product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        self.sites.iter().map(|l| l.sample(rng)).collect()
    }
}

/// A measure that is a product over all of `Z`.
pub trait ProductFamily: Sync {
    type State: SiteState;

    fn site_law(&self, i: i32) -> Result<SiteLaw<Self::State>>;

    fn product(&self, lo: i32, hi: i32) -> Result<ProductMeasure<Self::State>> {
        let sites = (lo..=hi).map(|i| self.site_law(i)).collect::<Result<_>>()?;
        Ok(ProductMeasure { lo, sites })
    }
}

/// The stationary marginal `mu^theta(z) ∝ e^{theta z} / f(z)!` on a finite table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub model: Model,
    pub theta: f64,
    pub support: (i32, i32),
    pub pmf: Vec<f64>,
    pub tail_bound: f64,
    /// Omitted mass weighted by the site rate envelope, see [`rate_envelope`].
    pub weighted_tail_bound: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub ln_z: f64,
}

impl Marginal {
    /// Table value, zero off the support.
    pub fn prob(&self, y: i32) -> f64 {
        if y < self.support.0 || y > self.support.1 {
            0.0
        } else {
            self.pmf[(y - self.support.0) as usize]
        }
    }

    /// Closed-form value `exp(theta y - ln f(y)! - ln Z)`, defined on all of `I`.
    pub fn density(&self, y: i32) -> f64 {
        if !self.model.bounds().contains(y) {
            return 0.0;
        }
        match self.model {
            Model::Asep { .. } => self.prob(y),
            _ => {
                let g = self.model.growth().expect("marginals exist only for conserving models");
                (self.theta * y as f64 - g.ln_f_factorial(y) - self.ln_z).exp()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        (self.support.0..=self.support.1)
            .zip(&self.pmf)
            .map(|(y, w)| y as f64 * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.support.0..=self.support.1)
            .zip(&self.pmf)
            .map(|(y, w)| (y as f64 - m).powi(2) * w)
            .sum()
    }

    pub fn site_law(&self) -> SiteLaw<i32> {
        SiteLaw {
            atoms: (self.support.0..=self.support.1)
                .zip(self.pmf.iter().copied())
                .collect(),
            tail_bound: self.tail_bound,
            weighted_tail_bound: self.weighted_tail_bound,
        }
    }
}

/// Upper bound on every single-copy edge rate involving a site whose value
/// is within one of `z`. Used to weight truncated tails.
pub fn rate_envelope(model: &Model, z: i32) -> f64 {
    match model {
        Model::Asep { p, q } => p.max(*q),
        Model::Gzrp { beta } | Model::Blp { beta } => 2.0 * (beta * (z.abs() as f64 + 1.5)).exp(),
        Model::Bcrw(r) => r.p + r.q + r.b_l + r.b_r + r.c_l + r.c_r,
    }
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln` of a geometric tail `sum_{k>=0} t0 r^k` with `ln t0` given, or +inf.
fn ln_geometric(ln_t0: f64, ratio: f64) -> f64 {
    if ratio < 1.0 {
        ln_t0 - (1.0 - ratio).ln()
    } else {
        f64::INFINITY
    }
}

pub fn marginal(model: &Model, theta: f64, trunc: &Truncation) -> Result<Marginal> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be finite, got {theta}")));
    }
    match *model {
        Model::Asep { .. } => {
            let rho = 1.0 / (1.0 + (-theta).exp());
            let ln_z = theta.max(0.0) + (-(theta.abs())).exp().ln_1p();
            Ok(Marginal {
                model: *model,
                theta,
                support: (0, 1),
                pmf: vec![1.0 - rho, rho],
                tail_bound: 0.0,
                weighted_tail_bound: 0.0,
                z: ln_z.exp(),
                ln_z,
            })
        }
        Model::Gzrp { beta } | Model::Blp { beta } => {
            let g = model.growth()?;
            let c = (theta / beta + 0.5).floor() as i32;
            let (lo, hi) = (c - trunc.half_width, c + trunc.half_width);
            let lw = |z: i32| theta * z as f64 - g.ln_f_factorial(z);
            let logs: Vec<f64> = (lo..=hi).map(lw).collect();
            let ln_z = logsumexp(&logs);
            let pmf: Vec<f64> = logs.iter().map(|l| (l - ln_z).exp()).collect();

            // successive term ratios e^theta / f(z+1) upward and e^-theta f(z) downward
            // only shrink further out, so the first omitted ratio bounds the tail
            let up_ratio = theta.exp() / g.f(hi + 2);
            let down_ratio = (-theta).exp() * g.f(lo - 1);
            let ln_up = ln_geometric(lw(hi + 1), up_ratio);
            let ln_down = ln_geometric(lw(lo - 1), down_ratio);
            let tail_bound = (logsumexp(&[ln_up, ln_down]) - ln_z).exp();
            let eb = beta.exp();
            let ln_up_w = ln_geometric(lw(hi + 1) + rate_envelope(model, hi + 1).ln(), up_ratio * eb);
            let ln_down_w = ln_geometric(lw(lo - 1) + rate_envelope(model, lo - 1).ln(), down_ratio * eb);
            let weighted_tail_bound = (logsumexp(&[ln_up_w, ln_down_w]) - ln_z).exp();
            if !(tail_bound <= trunc.tolerance) {
                return Err(Error::Truncation {
                    tail_bound,
                    tolerance: trunc.tolerance,
                });
            }
            Ok(Marginal {
                model: *model,
                theta,
                support: (lo, hi),
                pmf,
                tail_bound,
                weighted_tail_bound,
                z: ln_z.exp(),
                ln_z,
            })
        }
        Model::Bcrw(_) => Err(model.unsupported("stationary marginal mu^theta")),
    }
}

/// Partition sum over the truncated support and the certified omitted mass.
pub fn partition_z(model: &Model, theta: f64, trunc: &Truncation) -> Result<(f64, f64)> {
    let m = marginal(model, theta, trunc)?;
    Ok((m.z, m.tail_bound))
}

/// Density `rho(theta)`, the mean of `mu^theta`.
pub fn density_rho(model: &Model, theta: f64, trunc: &Truncation) -> Result<f64> {
    Ok(marginal(model, theta, trunc)?.mean())
}

/// Defects of the exponential-model shift identities
/// `Z(theta - beta) = e^{beta/2 - theta} Z(theta)`, `rho(theta - beta) = rho(theta) - 1`
/// and `mu^{theta - beta}(y) = mu^theta(y + 1)`, with their budgets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub theta: f64,
    /// Relative defect of the partition sum.
    pub z_defect: f64,
    pub rho_defect: f64,
    pub pmf_defect: f64,
    /// 10x the certified tails plus a rounding floor.
    pub budget: f64,
    /// `budget` scaled by the largest support value, for the density.
    pub rho_budget: f64,
    pub pass: bool,
}

pub fn shift_identities(model: &Model, theta: f64, trunc: &Truncation) -> Result<ShiftReport> {
    let beta = match model {
        Model::Gzrp { beta } | Model::Blp { beta } => *beta,
        _ => return Err(model.unsupported("exponential shift identities")),
    };
    let hi = marginal(model, theta, trunc)?;
    let lo = marginal(model, theta - beta, trunc)?;
    let budget = 10.0 * (hi.tail_bound + lo.tail_bound) + 64.0 * f64::EPSILON;
    let z_defect = (lo.z / ((beta / 2.0 - theta).exp() * hi.z) - 1.0).abs();
    let rho_defect = (lo.mean() - (hi.mean() - 1.0)).abs();
    let pmf_defect = (hi.support.0 - 1..=hi.support.1 + 1)
        .map(|y| (lo.prob(y) - hi.prob(y + 1)).abs())
        .fold(0.0, f64::max);
    let rho_budget = budget * (hi.support.1.abs().max(hi.support.0.abs()) + 2) as f64;
    Ok(ShiftReport {
        theta,
        z_defect,
        rho_defect,
        pmf_defect,
        budget,
        rho_budget,
        pass: z_defect <= budget && rho_defect <= rho_budget && pmf_defect <= budget,
    })
}

pub fn asep_theta(rho: f64) -> Result<f64> {
    if rho > 0.0 && rho < 1.0 {
        Ok((rho / (1.0 - rho)).ln())
    } else {
        Err(Error::Domain(format!("ASEP density must lie in (0, 1), got {rho}")))
    }
}

/// Inverse of [`density_rho`].
///
/// ASEP inverts the logistic density in closed form; the unbounded models
/// bracket and bisect, using that `rho` is strictly increasing in `theta`.
pub fn theta_of_rho(model: &Model, rho: f64, trunc: &Truncation) -> Result<f64> {
    match *model {
        Model::Asep { .. } => asep_theta(rho),
        Model::Gzrp { beta } | Model::Blp { beta } => {
            if !rho.is_finite() {
                return Err(Error::Domain(format!("density must be finite, got {rho}")));
            }
            let f = |t: f64| density_rho(model, t, trunc).map(|r| r - rho);
            // rho(theta) is within 1/2 of theta/beta
            let mut lo = beta * (rho - 1.0);
            let mut hi = beta * (rho + 1.0);
            while f(lo)? > 0.0 {
                lo -= beta;
            }
            while f(hi)? < 0.0 {
                hi += beta;
            }
            while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
                let mid = 0.5 * (lo + hi);
                if f(mid)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        Model::Bcrw(_) => Err(model.unsupported("density parametrization")),
    }
}

pub fn sample_site<R: Rng + ?Sized>(marginal: &Marginal, rng: &mut R) -> i32 {
    let mut u = rng.gen::<f64>();
    for (k, &w) in marginal.pmf.iter().enumerate() {
        if u < w {
            return marginal.support.0 + k as i32;
        }
        u -= w;
    }
    let last = marginal.pmf.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    marginal.support.0 + last as i32
}

/// `mu^theta` on every site, one copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary(pub Marginal);

impl ProductFamily for Stationary {
    type State = i32;
    fn site_law(&self, _i: i32) -> Result<SiteLaw<i32>> {
        Ok(self.0.site_law())
    }
}

/// `mu^theta` on every site of a coupled pair with `zeta = omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPair(pub Marginal);

impl ProductFamily for StationaryPair {
    type State = Pair;
    fn site_law(&self, _i: i32) -> Result<SiteLaw<Pair>> {
        Ok(self.0.site_law().map(Pair::diagonal))
    }
}

/// Bernoulli product with a fixed density, for the BCRW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bernoulli(pub f64);

fn bernoulli_law(rho: f64) -> SiteLaw<u8> {
    let mut atoms = Vec::with_capacity(2);
    if rho < 1.0 {
        atoms.push((0u8, 1.0 - rho));
    }
    if rho > 0.0 {
        atoms.push((1u8, rho));
    }
    SiteLaw {
        atoms,
        tail_bound: 0.0,
        weighted_tail_bound: 0.0,
    }
}

impl ProductFamily for Bernoulli {
    type State = u8;
    fn site_law(&self, _i: i32) -> Result<SiteLaw<u8>> {
        Ok(bernoulli_law(self.0))
    }
}

/// The coupled single shock measure: `mu^theta` left of `j`, `hat_mu` for
/// `omega_j` with `zeta_j = omega_j + 1`, `mu^sigma` right of `j`, and
/// `zeta = omega` off `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    pub model: Model,
    pub theta: f64,
    pub sigma: f64,
    pub j: i32,
    pub hat_mu: SiteLaw<i32>,
    pub left: Marginal,
    pub right: Marginal,
}

pub const CONDITION_TOLERANCE: f64 = 1e-12;

/// Relative defect of the ASEP density/asymmetry relation, `e^{sigma-theta}` against `p/q`.
fn asep_single_defect(p: f64, q: f64, theta: f64, sigma: f64) -> f64 {
    let ratio = (sigma - theta).exp();
    if q == 0.0 {
        return f64::INFINITY;
    }
    (ratio * q / p - 1.0).abs()
}

fn check_single_condition(model: &Model, theta: f64, sigma: f64, j: i32) -> Result<()> {
    let defect = match *model {
        Model::Asep { p, q } => asep_single_defect(p, q, theta, sigma),
        Model::Gzrp { beta } | Model::Blp { beta } => (theta - sigma - beta).abs(),
        Model::Bcrw(_) => return Err(model.unsupported("coupled shock measure")),
    };
    if !(defect <= CONDITION_TOLERANCE) {
        return Err(Error::Condition {
            condition: match model {
                Model::Asep { .. } => "lambda(1-rho)/(rho(1-lambda)) = p/q".into(),
                _ => "theta - sigma = beta".into(),
            },
            site: Some(j as i64),
            defect,
        });
    }
    Ok(())
}

impl ShockSpec {
    /// Builds the shock measure with the standard `hat_mu` for the model,
    /// checking the consistency relation.
    pub fn build(model: &Model, theta: f64, sigma: f64, j: i32, trunc: &Truncation) -> Result<Self> {
        check_single_condition(model, theta, sigma, j)?;
        Self::new_unchecked(model, theta, sigma, j, trunc)
    }

    /// Re-checks the consistency relation on the stored parameters.
    pub fn check_condition(&self) -> Result<()> {
        check_single_condition(&self.model, self.theta, self.sigma, self.j)
    }

    /// Same measure without the condition check, for negative controls.
    pub fn new_unchecked(model: &Model, theta: f64, sigma: f64, j: i32, trunc: &Truncation) -> Result<Self> {
        let right = marginal(model, sigma, trunc)?;
        let hat_mu = match model {
            Model::Asep { .. } => SiteLaw::point(0),
            _ => right.site_law(),
        };
        Self::with_hat_mu(model, theta, sigma, j, hat_mu, trunc)
    }

    /// Shock measure with an arbitrary law for `omega_j`.
    pub fn with_hat_mu(
        model: &Model,
        theta: f64,
        sigma: f64,
        j: i32,
        hat_mu: SiteLaw<i32>,
        trunc: &Truncation,
    ) -> Result<Self> {
        let bounds = model.bounds();
        for &(y, w) in &hat_mu.atoms {
            if w > 0.0 && !(bounds.contains(y) && bounds.contains(y + 1)) {
                return Err(Error::Domain(format!(
                    "hat_mu charges {y}, but {y} + 1 must also lie in {bounds}"
                )));
            }
        }
        Ok(Self {
            model: *model,
            theta,
            sigma,
            j,
            hat_mu,
            left: marginal(model, theta, trunc)?,
            right: marginal(model, sigma, trunc)?,
        })
    }

    /// ASEP shock from left and right densities.
    pub fn asep_from_densities(model: &Model, rho: f64, lambda: f64, j: i32) -> Result<Self> {
        Self::build(model, asep_theta(rho)?, asep_theta(lambda)?, j, &Truncation::default())
    }

    pub fn asep_from_densities_unchecked(model: &Model, rho: f64, lambda: f64, j: i32) -> Result<Self> {
        Self::new_unchecked(model, asep_theta(rho)?, asep_theta(lambda)?, j, &Truncation::default())
    }

    /// Same measure with the second class particle at `j`.
    pub fn at(&self, j: i32) -> Self {
        Self { j, ..self.clone() }
    }

    /// Left and right densities `(rho(theta), rho(sigma))`.
    pub fn densities(&self) -> (f64, f64) {
        (self.left.mean(), self.right.mean())
    }

    /// Step-profile mixture check of `lambda * law(zeta) + (1 - lambda) * law(omega)`.
    pub fn mixture_check(&self, window: (i32, i32)) -> Result<MixtureReport> {
        if !matches!(self.model, Model::Asep { .. }) {
            return Err(self.model.unsupported("single shock mixture identity"));
        }
        let (rho, lambda) = self.densities();
        mixture_check_asep(rho, lambda, self.j, window)
    }
}

impl ProductFamily for ShockSpec {
    type State = Pair;
    fn site_law(&self, i: i32) -> Result<SiteLaw<Pair>> {
        Ok(match i.cmp(&self.j) {
            std::cmp::Ordering::Less => self.left.site_law().map(Pair::diagonal),
            std::cmp::Ordering::Equal => self.hat_mu.map(|y| Pair::new(y, y + 1)),
            std::cmp::Ordering::Greater => self.right.site_law().map(Pair::diagonal),
        })
    }
}

/// Solves the ASEP shock condition for the right density.
pub fn asep_partner_density(p: f64, q: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("density must lie in (0, 1), got {rho}")));
    }
    if q <= 0.0 {
        return Err(Error::Degenerate("q = 0 admits no interior shock densities".into()));
    }
    let odds = p / q * rho / (1.0 - rho);
    Ok(odds / (1.0 + odds))
}

/// Deviation between two window measures, maximized over configurations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureReport {
    pub window: (i32, i32),
    pub configurations: usize,
    pub max_deviation: f64,
    pub total_weight: f64,
}

fn for_each_binary(len: usize, mut f: impl FnMut(&[u8])) {
    let mut c = vec![0u8; len];
    for code in 0u64..(1u64 << len) {
        for (k, v) in c.iter_mut().enumerate() {
            *v = ((code >> k) & 1) as u8;
        }
        f(&c);
    }
}

fn bern(rho: f64, v: u8) -> f64 {
    if v == 1 {
        rho
    } else {
        1.0 - rho
    }
}

const MAX_MIXTURE_WIDTH: i32 = 20;

fn check_window(window: (i32, i32)) -> Result<usize> {
    let len = window.1 - window.0 + 1;
    if !(1..=MAX_MIXTURE_WIDTH).contains(&len) {
        return Err(Error::param(
            "window",
            format!("width must be in 1..={MAX_MIXTURE_WIDTH}, got {len}"),
        ));
    }
    Ok(len as usize)
}

/// Mixes the two marginals of the ASEP single shock with a `lambda`-coin.
///
/// Off `j` both marginals agree, so the mixture is again a product: density
/// `rho` left of `j` and `lambda` from `j` on.
pub fn mixture_check_asep(rho: f64, lambda: f64, j: i32, window: (i32, i32)) -> Result<MixtureReport> {
    let len = check_window(window)?;
    for (name, v) in [("rho", rho), ("lambda", lambda)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("must be in [0, 1], got {v}")));
        }
    }
    let off_j = |i: i32| if i < j { rho } else { lambda };
    let mut max_dev = 0.0f64;
    let mut total = 0.0;
    for_each_binary(len, |c| {
        let mut upper = 1.0;
        let mut lower = 1.0;
        let mut step = 1.0;
        for (k, &v) in c.iter().enumerate() {
            let i = window.0 + k as i32;
            if i == j {
                upper *= (v == 1) as u8 as f64;
                lower *= (v == 0) as u8 as f64;
            } else {
                upper *= bern(off_j(i), v);
                lower *= bern(off_j(i), v);
            }
            step *= bern(if i < j { rho } else { lambda }, v);
        }
        let mix = lambda * upper + (1.0 - lambda) * lower;
        total += mix;
        max_dev = max_dev.max((mix - step).abs());
    });
    Ok(MixtureReport {
        window,
        configurations: 1 << len,
        max_deviation: max_dev,
        total_weight: total,
    })
}

/// Which side of the BCRW shock is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Density `rho*` left of `j`, empty right of `j`.
    Right,
    /// Empty left of `j`, density `rho*` right of `j`.
    Mirror,
}

/// BCRW shock: an occupied site `j` separating `rho*` from the empty lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcrwShockSpec {
    pub rates: BcrwRates,
    pub j: i32,
    pub orientation: Orientation,
    pub rho_star: f64,
}

impl BcrwShockSpec {
    pub fn new(model: &Model, j: i32, orientation: Orientation) -> Result<Self> {
        let rates = *model.bcrw_rates()?;
        Ok(Self {
            rates,
            j,
            orientation,
            rho_star: rates.stationary_density(),
        })
    }

    pub fn at(&self, j: i32) -> Self {
        Self { j, ..*self }
    }
}

impl ProductFamily for BcrwShockSpec {
    type State = u8;
    fn site_law(&self, i: i32) -> Result<SiteLaw<u8>> {
        use std::cmp::Ordering::*;
        Ok(match (i.cmp(&self.j), self.orientation) {
            (Equal, _) => SiteLaw::point(1),
            (Less, Orientation::Right) | (Greater, Orientation::Mirror) => bernoulli_law(self.rho_star),
            _ => SiteLaw::point(0),
        })
    }
}

/// Checks that geometric mixing of BCRW shocks over the rightmost particle
/// position reproduces the step measure (`rho*` up to `j`, empty beyond).
pub fn bcrw_mixture_check(rates: &BcrwRates, j: i32, window: (i32, i32)) -> Result<MixtureReport> {
    let len = check_window(window)?;
    let rs = rates.stationary_density();
    let (a, b) = window;
    let mut max_dev = 0.0f64;
    let mut total = 0.0;
    // all mixture terms with rightmost particle left of the window leave it empty
    let below = if a <= j { (1.0 - rs).powi(j - a + 1) } else { 1.0 };
    for_each_binary(len, |c| {
        let at = |i: i32| c[(i - a) as usize];
        let mut mix = if c.iter().all(|&v| v == 0) { below } else { 0.0 };
        for k in a..=j.min(b) {
            let w = (1.0 - rs).powi(j - k) * rs;
            let mut pk = 1.0;
            for i in a..=b {
                let v = at(i);
                pk *= match i.cmp(&k) {
                    std::cmp::Ordering::Less => bern(rs, v),
                    std::cmp::Ordering::Equal => (v == 1) as u8 as f64,
                    std::cmp::Ordering::Greater => (v == 0) as u8 as f64,
                };
            }
            mix += w * pk;
        }
        let step: f64 = (a..=b)
            .map(|i| {
                if i <= j {
                    bern(rs, at(i))
                } else {
                    (at(i) == 0) as u8 as f64
                }
            })
            .product();
        total += mix;
        max_dev = max_dev.max((mix - step).abs());
    });
    Ok(MixtureReport {
        window,
        configurations: 1 << len,
        max_deviation: max_dev,
        total_weight: total,
    })
}

/// Values on a finite stretch of sites, constant to the left and right of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteField<T> {
    pub start: i32,
    pub values: Vec<T>,
    pub left: T,
    pub right: T,
}

impl<T: Copy> SiteField<T> {
    pub fn constant(v: T) -> Self {
        Self {
            start: 0,
            values: Vec::new(),
            left: v,
            right: v,
        }
    }

    pub fn end(&self) -> i32 {
        self.start + self.values.len() as i32
    }

    pub fn get(&self, i: i32) -> T {
        if i < self.start {
            self.left
        } else if i >= self.end() {
            self.right
        } else {
            self.values[(i - self.start) as usize]
        }
    }

    /// Sets site `i`, growing the explicit stretch as needed.
    pub fn set(&mut self, i: i32, v: T) {
        if self.values.is_empty() {
            self.start = i;
            self.values.push(v);
            return;
        }
        while i < self.start {
            self.values.insert(0, self.left);
            self.start -= 1;
        }
        while i >= self.end() {
            self.values.push(self.right);
        }
        self.values[(i - self.start) as usize] = v;
    }
}

/// Coupled product measure with `m_i` second class particles at site `i` and
/// site parameter `sigma_i` (a fugacity; ASEP densities go through the logit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiShockSpec {
    pub model: Model,
    pub sigma: SiteField<f64>,
    pub m: SiteField<u32>,
    pub trunc: Truncation,
}

fn m_field(m: &BTreeMap<i32, i64>) -> Result<SiteField<u32>> {
    let mut field = SiteField::constant(0u32);
    for (&i, &v) in m {
        if v < 0 {
            return Err(Error::param("m", format!("negative entry {v} at site {i}")));
        }
        if v > 0 {
            field.set(i, v as u32);
        }
    }
    if field.values.is_empty() {
        field.start = 0;
    }
    Ok(field)
}

impl MultiShockSpec {
    /// Validated multi-shock measure.
    pub fn build(model: &Model, sigma: SiteField<f64>, m: &BTreeMap<i32, i64>, trunc: &Truncation) -> Result<Self> {
        let spec = Self::new_unchecked(model, sigma, m, trunc)?;
        spec.check_conditions()?;
        Ok(spec)
    }

    pub fn new_unchecked(
        model: &Model,
        sigma: SiteField<f64>,
        m: &BTreeMap<i32, i64>,
        trunc: &Truncation,
    ) -> Result<Self> {
        if matches!(model, Model::Bcrw(_)) {
            return Err(model.unsupported("coupled shock measure"));
        }
        let m = m_field(m)?;
        if let Model::Asep { .. } = model {
            if let Some(v) = m.values.iter().find(|&&v| v > 1) {
                return Err(Error::param(
                    "m",
                    format!("ASEP allows at most one second class particle per site, got {v}"),
                ));
            }
        }
        Ok(Self {
            model: *model,
            sigma,
            m,
            trunc: *trunc,
        })
    }

    /// ASEP measure from a density profile.
    pub fn asep_from_densities(model: &Model, rho: &SiteField<f64>, m: &BTreeMap<i32, i64>) -> Result<Self> {
        let conv = SiteField {
            start: rho.start,
            values: rho.values.iter().map(|&r| asep_theta(r)).collect::<Result<_>>()?,
            left: asep_theta(rho.left)?,
            right: asep_theta(rho.right)?,
        };
        Self::build(model, conv, m, &Truncation::default())
    }

    /// Fills in the site parameters from the rightmost one using the
    /// condition at every site.
    pub fn from_right_parameter(
        model: &Model,
        sigma_right: f64,
        m: &BTreeMap<i32, i64>,
        trunc: &Truncation,
    ) -> Result<Self> {
        let mf = m_field(m)?;
        let step = Self::condition_step(model)?;
        let (lo, hi) = (mf.start, mf.end());
        let mut values = vec![0.0; (hi - lo + 1) as usize];
        // values cover lo-1 ..= hi-1; sigma_{i-1} = sigma_i + step m_i
        let mut s = sigma_right;
        for i in (lo..hi).rev() {
            values[(i - lo + 1) as usize] = s;
            s += step * mf.get(i) as f64;
        }
        values[0] = s;
        let sigma = SiteField {
            start: lo - 1,
            values,
            left: s,
            right: sigma_right,
        };
        Self::build(model, sigma, m, trunc)
    }

    pub fn from_left_parameter(
        model: &Model,
        sigma_left: f64,
        m: &BTreeMap<i32, i64>,
        trunc: &Truncation,
    ) -> Result<Self> {
        let mf = m_field(m)?;
        let step = Self::condition_step(model)?;
        let total: f64 = mf.values.iter().map(|&v| v as f64).sum();
        Self::from_right_parameter(model, sigma_left - step * total, m, trunc)
    }

    /// Parameter drop `sigma_{i-1} - sigma_i` across one second class
    /// particle: `beta`, or `-ln(p/q)` for the ASEP whose density rises.
    fn condition_step(model: &Model) -> Result<f64> {
        match *model {
            Model::Asep { p, q } => {
                if q > 0.0 {
                    Ok(-(p / q).ln())
                } else {
                    Err(Error::Degenerate("q = 0 admits no interior shock densities".into()))
                }
            }
            Model::Gzrp { beta } | Model::Blp { beta } => Ok(beta),
            Model::Bcrw(_) => Err(model.unsupported("coupled shock measure")),
        }
    }

    /// Sites that can carry a nontrivial condition.
    fn active_range(&self) -> (i32, i32) {
        let lo = self.sigma.start.min(self.m.start) - 1;
        let hi = self.sigma.end().max(self.m.end()) + 1;
        (lo, hi)
    }

    /// Checks `sigma_{i-1} - sigma_i = step * m_i` (the ASEP version is the
    /// odds-ratio relation in logit form) at every site.
    pub fn check_conditions(&self) -> Result<()> {
        let step = Self::condition_step(&self.model)?;
        let (lo, hi) = self.active_range();
        for i in lo..=hi {
            let want = step * self.m.get(i) as f64;
            let got = self.sigma.get(i - 1) - self.sigma.get(i);
            let defect = match self.model {
                // odds ratio (e^got) against (p/q)^m_i, relative
                Model::Asep { .. } => ((got - want).exp() - 1.0).abs(),
                _ => (got - want).abs(),
            };
            if !(defect <= CONDITION_TOLERANCE) {
                return Err(Error::Condition {
                    condition: match self.model {
                        Model::Asep { .. } => "rho_{i}(1-rho_{i-1})/(rho_{i-1}(1-rho_i)) = (p/q)^{m_i}".into(),
                        _ => "sigma_{i-1} - sigma_i = beta m_i".into(),
                    },
                    site: Some(i as i64),
                    defect,
                });
            }
        }
        if let Model::Asep { .. } = self.model {
            if let Some(i) = (lo..=hi).find(|&i| self.m.get(i) > 1) {
                return Err(Error::Condition {
                    condition: "m_i in {0, 1}".into(),
                    site: Some(i as i64),
                    defect: self.m.get(i) as f64 - 1.0,
                });
            }
        }
        Ok(())
    }

    pub fn total_particles(&self) -> u32 {
        self.m.values.iter().sum()
    }

    /// Positions of the second class particles, with multiplicity.
    pub fn positions(&self) -> Vec<i32> {
        let mut out = Vec::new();
        for (k, &v) in self.m.values.iter().enumerate() {
            for _ in 0..v {
                out.push(self.m.start + k as i32);
            }
        }
        out
    }

    /// ASEP density `rho_i`.
    pub fn density(&self, i: i32) -> f64 {
        1.0 / (1.0 + (-self.sigma.get(i)).exp())
    }

    /// The measure after one particle jumped from `i` to `i + 1`.
    pub fn jump_right(&self, i: i32) -> Result<Self> {
        if self.m.get(i) == 0 {
            return Err(Error::Domain(format!("no second class particle at {i}")));
        }
        let mut out = self.clone();
        out.m.set(i, self.m.get(i) - 1);
        out.m.set(i + 1, self.m.get(i + 1) + 1);
        let new_sigma = match self.model {
            Model::Asep { .. } => self.sigma.get(i - 1),
            _ => self.sigma.get(i) + Self::condition_step(&self.model)?,
        };
        out.sigma.set(i, new_sigma);
        Ok(out)
    }

    /// The measure after one particle jumped from `i + 1` to `i`.
    pub fn jump_left(&self, i: i32) -> Result<Self> {
        if self.m.get(i + 1) == 0 {
            return Err(Error::Domain(format!("no second class particle at {}", i + 1)));
        }
        let mut out = self.clone();
        out.m.set(i + 1, self.m.get(i + 1) - 1);
        out.m.set(i, self.m.get(i) + 1);
        let new_sigma = match self.model {
            Model::Asep { .. } => self.sigma.get(i + 1),
            _ => self.sigma.get(i) - Self::condition_step(&self.model)?,
        };
        out.sigma.set(i, new_sigma);
        Ok(out)
    }
}

impl ProductFamily for MultiShockSpec {
    type State = Pair;
    fn site_law(&self, i: i32) -> Result<SiteLaw<Pair>> {
        let m = self.m.get(i) as i32;
        if m == 0 {
            return Ok(marginal(&self.model, self.sigma.get(i), &self.trunc)?
                .site_law()
                .map(Pair::diagonal));
        }
        match self.model {
            // a second class particle in the ASEP sits on an empty omega site
            Model::Asep { .. } => Ok(SiteLaw::point(Pair::new(0, 1))),
            _ => Ok(marginal(&self.model, self.sigma.get(i), &self.trunc)?
                .site_law()
                .map(|y| Pair::new(y, y + m))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t() -> Truncation {
        Truncation::default()
    }

    #[test]
    fn asep_partition_and_density() {
        let m = Model::asep(0.7, 0.3).unwrap();
        let (z, tail) = partition_z(&m, 0.0, &t()).unwrap();
        assert_relative_eq!(z, 2.0, max_relative = 1e-15);
        assert_eq!(tail, 0.0);
        let mg = marginal(&m, 0.0, &t()).unwrap();
        assert_eq!(mg.prob(1), 0.5);
        assert_eq!(density_rho(&m, 0.0, &t()).unwrap(), 0.5);
        assert_relative_eq!(
            theta_of_rho(&m, 0.3, &t()).unwrap(),
            (3.0f64 / 7.0).ln(),
            max_relative = 1e-14
        );
        assert_eq!(theta_of_rho(&m, 0.5, &t()).unwrap(), 0.0);
        assert!(theta_of_rho(&m, 1.0, &t()).is_err());
    }

    #[test]
    fn gzrp_partition_sum() {
        let m = Model::gzrp(1.0).unwrap();
        let (z, tail) = partition_z(&m, 0.0, &t()).unwrap();
        let direct: f64 = (-12..=12).map(|k: i32| (-(k * k) as f64 / 2.0).exp()).sum();
        assert_relative_eq!(z, direct, max_relative = 1e-14);
        assert!((z - 2.506_628).abs() < 1e-6);
        assert!(tail < 1e-30);
        let mg = marginal(&m, 0.0, &t()).unwrap();
        for y in 0..=12 {
            assert_relative_eq!(mg.prob(y), mg.prob(-y), max_relative = 1e-14);
        }
        assert!(mg.mean().abs() < 1e-15);
        assert!(theta_of_rho(&m, 0.0, &t()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn truncation_error_when_k_too_small() {
        let m = Model::gzrp(0.1).unwrap();
        let e = marginal(&m, 0.0, &Truncation::new(2, 1e-12).unwrap()).unwrap_err();
        assert!(matches!(e, Error::Truncation { .. }));
    }

    #[test]
    fn tail_bound_dominates_true_tail() {
        let m = Model::blp(0.5).unwrap();
        for theta in [-1.3, 0.0, 0.7, 2.2] {
            let small = marginal(&m, theta, &Truncation::new(6, 1.0).unwrap()).unwrap();
            let big = marginal(&m, theta, &Truncation::new(40, 1.0).unwrap()).unwrap();
            let omitted: f64 = (big.support.0..=big.support.1)
                .filter(|&y| y < small.support.0 || y > small.support.1)
                .map(|y| big.prob(y))
                .sum();
            assert!(omitted <= small.tail_bound, "{omitted} > {}", small.tail_bound);
            assert!(small.tail_bound < 100.0 * omitted + 1e-300);
        }
    }

    #[test]
    fn shift_identities() {
        let m = Model::gzrp(1.0).unwrap();
        let z0 = marginal(&m, 0.0, &t()).unwrap();
        let z1 = marginal(&m, 1.0, &t()).unwrap();
        let zm = marginal(&m, -1.0, &t()).unwrap();
        assert_relative_eq!(zm.z / z0.z, 0.5f64.exp(), max_relative = 1e-12);
        for y in -10..10 {
            assert_relative_eq!(z0.density(y), z1.density(y + 1), max_relative = 1e-12);
        }
        assert!((z0.mean() - zm.mean() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn theta_round_trip() {
        for m in [Model::gzrp(1.0).unwrap(), Model::blp(0.6).unwrap()] {
            for rho in [-3.3, -0.2, 0.0, 0.45, 2.0] {
                let th = theta_of_rho(&m, rho, &t()).unwrap();
                assert!((density_rho(&m, th, &t()).unwrap() - rho).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampling_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = marginal(&Model::asep(0.7, 0.3).unwrap(), 0.0, &t()).unwrap();
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_site(&a, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002);
        let g = marginal(&Model::gzrp(1.0).unwrap(), 0.0, &t()).unwrap();
        let mean = (0..n).map(|_| sample_site(&g, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.004);
        let pt = SiteLaw::point(3i32);
        assert!((0..100).all(|_| pt.sample(&mut rng) == 3));
    }

    #[test]
    fn single_shock_conditions() {
        let asep = Model::asep(0.7, 0.3).unwrap();
        assert_relative_eq!(asep_partner_density(0.7, 0.3, 0.3).unwrap(), 0.5, max_relative = 1e-15);
        let s = ShockSpec::asep_from_densities(&asep, 0.3, 0.5, 0).unwrap();
        assert_eq!(s.hat_mu, SiteLaw::point(0));
        let e = ShockSpec::asep_from_densities(&asep, 0.3, 0.55, 0).unwrap_err();
        assert!(matches!(e, Error::Condition { .. }));
        assert!(ShockSpec::asep_from_densities_unchecked(&asep, 0.3, 0.55, 0).is_ok());

        let g = Model::gzrp(1.0).unwrap();
        let s = ShockSpec::build(&g, 0.5, -0.5, 0, &t()).unwrap();
        assert_eq!(s.hat_mu, marginal(&g, -0.5, &t()).unwrap().site_law());
        assert!(ShockSpec::build(&g, 0.5, -0.4, 0, &t()).is_err());
    }

    #[test]
    fn shock_site_laws() {
        let asep = Model::asep(0.7, 0.3).unwrap();
        let s = ShockSpec::asep_from_densities(&asep, 0.3, 0.5, 2).unwrap();
        assert_eq!(s.site_law(2).unwrap(), SiteLaw::point(Pair::new(0, 1)));
        assert_relative_eq!(s.site_law(1).unwrap().prob(Pair::new(1, 1)), 0.3, max_relative = 1e-14);
        assert_relative_eq!(s.site_law(3).unwrap().prob(Pair::new(1, 1)), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn multi_shock_asep_ladder() {
        let asep = Model::asep(0.8, 0.2).unwrap();
        let m = BTreeMap::from([(0, 1), (1, 1)]);
        let rho = SiteField {
            start: 0,
            values: vec![0.5],
            left: 0.2,
            right: 0.8,
        };
        let spec = MultiShockSpec::asep_from_densities(&asep, &rho, &m).unwrap();
        assert_eq!(spec.positions(), vec![0, 1]);
        let bad = SiteField {
            start: 0,
            values: vec![0.3],
            left: 0.2,
            right: 0.8,
        };
        let e = MultiShockSpec::asep_from_densities(&asep, &bad, &m).unwrap_err();
        assert!(matches!(e, Error::Condition { site: Some(0), .. }));

        let r = spec.jump_left(-1).unwrap();
        assert_eq!(r.positions(), vec![-1, 1]);
        assert!(r.check_conditions().is_ok());
        assert_relative_eq!(r.density(-1), 0.5, max_relative = 1e-14);
        assert!(spec.jump_right(1).unwrap().check_conditions().is_ok());
    }

    #[test]
    fn multi_shock_gzrp_double() {
        let g = Model::gzrp(1.0).unwrap();
        let m = BTreeMap::from([(0, 2)]);
        let spec = MultiShockSpec::from_right_parameter(&g, -1.0, &m, &t()).unwrap();
        for i in 0..4 {
            assert_eq!(spec.sigma.get(i), -1.0);
        }
        for i in -4..0 {
            assert_eq!(spec.sigma.get(i), 1.0);
        }
        let l = spec.site_law(0).unwrap();
        assert!(l.atoms.iter().all(|(p, _)| p.discrepancy() == 2));
        let e = MultiShockSpec::build(&g, SiteField::constant(0.0), &BTreeMap::from([(0, -1)]), &t()).unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { .. }));
        let s2 = spec.jump_right(0).unwrap();
        assert!(s2.check_conditions().is_ok());
        assert_eq!(s2.sigma.get(0), 0.0);
        let s3 = spec.jump_left(-1).unwrap();
        assert!(s3.check_conditions().is_ok());
        assert_eq!(s3.positions(), vec![-1, 0]);
    }

    #[test]
    fn asep_mixture() {
        let r = mixture_check_asep(0.3, 0.5, 0, (-3, 3)).unwrap();
        assert!(r.max_deviation < 1e-14);
        assert!((r.total_weight - 1.0).abs() < 1e-14);
        let r = mixture_check_asep(0.4, 0.4, 0, (-3, 3)).unwrap();
        assert!(r.max_deviation < 1e-14);
        let r = mixture_check_asep(0.3, 1.0, 1, (-3, 3)).unwrap();
        assert!(r.max_deviation < 1e-14);
    }

    #[test]
    fn bcrw_mixture() {
        let rates = BcrwRates::new(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = bcrw_mixture_check(&rates, 0, (-4, 2)).unwrap();
        assert!(r.max_deviation < 1e-14, "{r:?}");
        assert!((r.total_weight - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bcrw_shock_laws() {
        let m = Model::bcrw(BcrwRates::new(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        let s = BcrwShockSpec::new(&m, 0, Orientation::Right).unwrap();
        assert_eq!(s.site_law(0).unwrap(), SiteLaw::point(1));
        assert_eq!(s.site_law(3).unwrap(), SiteLaw::point(0));
        assert_eq!(s.site_law(-1).unwrap().prob(1), 0.5);
        let mirror = BcrwShockSpec::new(&m, 0, Orientation::Mirror).unwrap();
        assert_eq!(mirror.site_law(-3).unwrap(), SiteLaw::point(0));
    }

    #[test]
    fn site_field_set_grows() {
        let mut f = SiteField::constant(0u32);
        f.set(3, 1);
        f.set(1, 2);
        assert_eq!((f.start, f.values.clone()), (1, vec![2, 0, 1]));
        assert_eq!(f.get(0), 0);
        assert_eq!(f.get(5), 0);
    }

    #[test]
    fn marginal_serializes_with_capital_z() {
        let m = marginal(&Model::asep(0.7, 0.3).unwrap(), 0.0, &t()).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["Z"], 2.0);
        assert_eq!(v["pmf"][1], 0.5);
    }
}
