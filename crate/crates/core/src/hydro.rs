//! Flux functions, Rankine-Hugoniot velocities and the current of a bound
//! state of several ASEP second class particles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{density_rho, theta_of_rho, Truncation};
use crate::models::Model;

/// Relative tolerance of the ladder ratio condition and of rate cross-checks.
pub const LADDER_TOLERANCE: f64 = 1e-12;

/// `LADDER_TOLERANCE`, or the rounding error of `r/(1-r)` for densities
/// close to 0 or 1 if that is larger.
fn ladder_tolerance(a: f64, b: f64) -> f64 {
    let kappa: f64 = [a, b].iter().map(|r| 1.0 / r + 1.0 / (1.0 - r)).sum();
    LADDER_TOLERANCE.max(16.0 * f64::EPSILON * kappa)
}

fn check_asep_density(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain(format!("ASEP density must lie in [0, 1], got {rho}")))
    }
}

/// Flux at parameter `theta` of the stationary marginal (not defined for ASEP at 0/1 densities).
pub fn flux_of_theta(model: &Model, theta: f64) -> Result<f64> {
    match *model {
        Model::Asep { p, q } => {
            let rho = 1.0 / (1.0 + (-theta).exp());
            Ok((p - q) * rho * (1.0 - rho))
        }
        Model::Gzrp { .. } => Ok(theta.exp()),
        Model::Blp { .. } => Ok(theta.exp() + (-theta).exp()),
        Model::Bcrw(_) => Err(model.unsupported("flux function")),
    }
}

/// Stationary current `H(rho)`.
pub fn flux(model: &Model, rho: f64, trunc: &Truncation) -> Result<f64> {
    match *model {
        Model::Asep { p, q } => {
            check_asep_density(rho)?;
            Ok((p - q) * rho * (1.0 - rho))
        }
        Model::Gzrp { .. } | Model::Blp { .. } => flux_of_theta(model, theta_of_rho(model, rho, trunc)?),
        Model::Bcrw(_) => Err(model.unsupported("flux function")),
    }
}

/// `(H(lambda) - H(rho)) / (lambda - rho)`.
pub fn rh_velocity(model: &Model, rho_left: f64, rho_right: f64, trunc: &Truncation) -> Result<f64> {
    if rho_left == rho_right {
        return Err(Error::Degenerate(format!("equal densities {rho_left} on both sides")));
    }
    Ok((flux(model, rho_right, trunc)? - flux(model, rho_left, trunc)?) / (rho_right - rho_left))
}

/// Same velocity, parametrized by the two marginal parameters.
pub fn rh_velocity_of_theta(model: &Model, theta_left: f64, theta_right: f64, trunc: &Truncation) -> Result<f64> {
    let (rl, rr) = (
        density_rho(model, theta_left, trunc)?,
        density_rho(model, theta_right, trunc)?,
    );
    if rl == rr {
        return Err(Error::Degenerate("equal densities on both sides".into()));
    }
    Ok((flux_of_theta(model, theta_right)? - flux_of_theta(model, theta_left)?) / (rr - rl))
}

/// Gap sizes `x_{k+1} - x_k - 1` between consecutive particles.
pub fn map_exclusion_to_zrp(positions: &[i32]) -> Result<Vec<u32>> {
    positions
        .windows(2)
        .map(|w| {
            if w[1] > w[0] {
                Ok((w[1] - w[0] - 1) as u32)
            } else {
                Err(Error::Domain(format!(
                    "positions must increase strictly, got {} then {}",
                    w[0], w[1]
                )))
            }
        })
        .collect()
}

/// Positions with the leftmost particle at `anchor`.
pub fn map_zrp_to_exclusion(anchor: i32, gaps: &[u32]) -> Vec<i32> {
    let mut out = Vec::with_capacity(gaps.len() + 1);
    let mut x = anchor;
    out.push(x);
    for &g in gaps {
        x += g as i32 + 1;
        out.push(x);
    }
    out
}

fn ln_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Stationary current of the open zero range process built from the jump
/// rates `P_(k)`, `Q_(k)` of `n` exclusion particles:
/// `(prod P - prod Q) / sum_k prod_{l<k} P_l prod_{l>k} Q_l`.
pub fn zrp_current(p_rates: &[f64], q_rates: &[f64]) -> Result<f64> {
    let n = p_rates.len();
    if n == 0 || q_rates.len() != n {
        return Err(Error::param(
            "rates",
            format!("need n >= 1 rates of each kind, got {} and {}", n, q_rates.len()),
        ));
    }
    if let Some(r) = p_rates.iter().chain(q_rates).find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::param(
            "rates",
            format!("must be finite and nonnegative, got {r}"),
        ));
    }
    if n > 20 {
        let lp: Vec<f64> = p_rates.iter().map(|r| r.ln()).collect();
        let lq: Vec<f64> = q_rates.iter().map(|r| r.ln()).collect();
        let terms: Vec<f64> = (0..n)
            .map(|k| lp[..k].iter().sum::<f64>() + lq[k + 1..].iter().sum::<f64>())
            .collect();
        let ld = ln_sum_exp(&terms);
        if ld == f64::NEG_INFINITY {
            return Err(Error::Degenerate("zero denominator".into()));
        }
        let a: f64 = lp.iter().sum();
        let b: f64 = lq.iter().sum();
        return Ok((a - ld).exp() - (b - ld).exp());
    }
    let num = p_rates.iter().product::<f64>() - q_rates.iter().product::<f64>();
    let den: f64 = (0..n)
        .map(|k| p_rates[..k].iter().product::<f64>() * q_rates[k + 1..].iter().product::<f64>())
        .sum();
    if den == 0.0 {
        return Err(Error::Degenerate("zero denominator".into()));
    }
    Ok(num / den)
}

/// Bound-state velocity `(p - q)(rho_n(1 - rho_n) - rho_0(1 - rho_0)) / (rho_n - rho_0)`.
pub fn multi_shock_velocity(p: f64, q: f64, rho_0: f64, rho_n: f64) -> Result<f64> {
    for r in [rho_0, rho_n] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("densities must lie in (0, 1), got {r}")));
        }
    }
    if rho_0 == rho_n {
        return Err(Error::Degenerate("equal outer densities".into()));
    }
    Ok((p - q) * (rho_n * (1.0 - rho_n) - rho_0 * (1.0 - rho_0)) / (rho_n - rho_0))
}

/// Densities `rho_(0), ..., rho_(n)` between consecutive ASEP second class
/// particles, numbered left to right.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DensityLadder {
    pub rho: Vec<f64>,
}

fn odds(r: f64) -> f64 {
    r / (1.0 - r)
}

impl DensityLadder {
    /// Checks every consecutive odds ratio against `p/q`.
    pub fn new(p: f64, q: f64, rho: Vec<f64>) -> Result<Self> {
        if rho.len() < 2 {
            return Err(Error::param("ladder", "needs at least two densities"));
        }
        if !(p > q && q > 0.0) {
            return Err(Error::param("p, q", format!("need p > q > 0, got {p}, {q}")));
        }
        for (k, &r) in rho.iter().enumerate() {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Domain(format!("ladder density {k} must lie in (0, 1), got {r}")));
            }
        }
        for k in 1..rho.len() {
            let defect = (odds(rho[k]) / odds(rho[k - 1]) / (p / q) - 1.0).abs();
            if !(defect <= ladder_tolerance(rho[k], rho[k - 1])) {
                return Err(Error::Condition {
                    condition: "rho_(k)(1-rho_(k-1)) / (rho_(k-1)(1-rho_(k))) = p/q".into(),
                    site: Some(k as i64),
                    defect,
                });
            }
        }
        Ok(Self { rho })
    }

    /// Iterates the odds ratio from `rho_0` for `n` particles.
    pub fn generate(p: f64, q: f64, rho_0: f64, n: usize) -> Result<Self> {
        let mut rho = vec![rho_0];
        let mut o = odds(rho_0);
        for _ in 0..n {
            o *= p / q;
            rho.push(o / (1.0 + o));
        }
        Self::new(p, q, rho)
    }

    pub fn particles(&self) -> usize {
        self.rho.len() - 1
    }
}

/// `P_(k) = (1 - rho_(k))/(1 - rho_(k-1)) p = rho_(k)/rho_(k-1) q` and
/// `Q_(k) = (1 - rho_(k-1))/(1 - rho_(k)) q = rho_(k-1)/rho_(k) p`, both forms checked.
pub fn ladder_rates(p: f64, q: f64, ladder: &DensityLadder) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = &ladder.rho;
    let mut ps = Vec::with_capacity(r.len() - 1);
    let mut qs = Vec::with_capacity(r.len() - 1);
    for k in 1..r.len() {
        let p1 = (1.0 - r[k]) / (1.0 - r[k - 1]) * p;
        let p2 = r[k] / r[k - 1] * q;
        let q1 = (1.0 - r[k - 1]) / (1.0 - r[k]) * q;
        let q2 = r[k - 1] / r[k] * p;
        let defect = ((p1 - p2) / p1).abs().max(((q1 - q2) / q1).abs());
        if !(defect <= ladder_tolerance(r[k], r[k - 1])) {
            return Err(Error::Condition {
                condition: "both rate expressions agree".into(),
                site: Some(k as i64),
                defect,
            });
        }
        ps.push(p1);
        qs.push(q1);
    }
    Ok((ps, qs))
}

/// Fugacities `z_k` of the geometric stationary gap law `P(g_k = g) = (1 - z_k) z_k^g`.
///
/// Gap `k` sits between particles `k` and `k+1`; it empties at rate
/// `P_(k) + Q_(k+1)` (towards gap `k-1` and `k+1` respectively) and is fed
/// by its neighbours and, at the ends, by `Q_(1)` and `P_(n)`.
pub fn stationary_gap_fugacities(p_rates: &[f64], q_rates: &[f64]) -> Result<Vec<f64>> {
    let n = p_rates.len();
    if q_rates.len() != n {
        return Err(Error::param("rates", "P and Q lists differ in length"));
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    let m = n - 1;
    // z_k (P_k + Q_{k+1}) - z_{k-1} Q_k - z_{k+1} P_{k+1} = inject_k, indices from 0
    let diag: Vec<f64> = (0..m).map(|k| p_rates[k] + q_rates[k + 1]).collect();
    let lower: Vec<f64> = (0..m).map(|k| -q_rates[k]).collect();
    let upper: Vec<f64> = (0..m).map(|k| -p_rates[k + 1]).collect();
    let mut rhs = vec![0.0; m];
    rhs[0] += q_rates[0];
    rhs[m - 1] += p_rates[n - 1];
    // Thomas algorithm
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for k in 0..m {
        let l = if k > 0 { lower[k] } else { 0.0 };
        let den = diag[k] - if k > 0 { l * c[k - 1] } else { 0.0 };
        if den == 0.0 {
            return Err(Error::Degenerate("singular traffic equations".into()));
        }
        c[k] = upper[k] / den;
        d[k] = (rhs[k] - if k > 0 { l * d[k - 1] } else { 0.0 }) / den;
    }
    let mut z = vec![0.0; m];
    for k in (0..m).rev() {
        z[k] = d[k] - if k + 1 < m { c[k] * z[k + 1] } else { 0.0 };
    }
    if let Some((k, v)) = z.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v < 1.0)) {
        return Err(Error::Degenerate(format!(
            "gap {} has fugacity {v}; no stationary bound state",
            k + 1
        )));
    }
    Ok(z)
}

/// Worst disagreement between the bound-state current and the closed-form
/// velocity over random ladders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderAgreement {
    pub ladders: usize,
    /// Ladders drawn but discarded because a density left `(0, 1 - 1e-9]`.
    pub skipped: usize,
    pub max_relative_difference: f64,
}

/// Draws `count` valid ladders with `p` uniform in `(0.55, 0.95)`, `q = 1 - p`,
/// `rho_0` uniform in `(0.05, 0.95)` and `1 <= n <= 6`, and compares
/// [`zrp_current`] of their rates with [`multi_shock_velocity`].
pub fn random_ladder_agreement(count: usize, seed: u64) -> Result<LadderAgreement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ladders, mut skipped) = (0, 0);
    let mut worst = 0.0f64;
    while ladders < count {
        let p = rng.gen_range(0.55..0.95);
        let q = 1.0 - p;
        let n = rng.gen_range(1..=6);
        let rho0 = rng.gen_range(0.05..0.95);
        let ladder = match DensityLadder::generate(p, q, rho0, n) {
            Ok(l) if l.rho[n] <= 1.0 - 1e-9 => l,
            _ => {
                skipped += 1;
                continue;
            }
        };
        ladders += 1;
        let (ps, qs) = ladder_rates(p, q, &ladder)?;
        let current = zrp_current(&ps, &qs)?;
        let closed = multi_shock_velocity(p, q, ladder.rho[0], ladder.rho[n])?;
        worst = worst.max(((current - closed) / closed).abs());
    }
    Ok(LadderAgreement {
        ladders,
        skipped,
        max_relative_difference: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn t() -> Truncation {
        Truncation::default()
    }

    #[test]
    fn flux_examples() {
        assert_relative_eq!(
            flux(&Model::asep(0.7, 0.3).unwrap(), 0.5, &t()).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            flux(&Model::gzrp(1.0).unwrap(), 0.0, &t()).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            flux(&Model::blp(1.0).unwrap(), 0.0, &t()).unwrap(),
            2.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn rh_examples() {
        let a = Model::asep(0.7, 0.3).unwrap();
        assert_relative_eq!(rh_velocity(&a, 0.3, 0.5, &t()).unwrap(), 0.08, epsilon = 1e-14);
        assert!(rh_velocity(&a, 0.3, 0.3, &t()).is_err());
        let g = Model::gzrp(1.0).unwrap();
        let v = rh_velocity_of_theta(&g, 0.5, -0.5, &t()).unwrap();
        assert_relative_eq!(v, 0.5f64.exp() - (-0.5f64).exp(), epsilon = 1e-12);
        let b = Model::blp(1.0).unwrap();
        assert!(rh_velocity_of_theta(&b, 0.5, -0.5, &t()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gaps() {
        assert_eq!(map_exclusion_to_zrp(&[0, 1, 5]).unwrap(), vec![0, 3]);
        assert!(map_exclusion_to_zrp(&[0, 0]).is_err());
        assert_eq!(map_zrp_to_exclusion(0, &[0, 3]), vec![0, 1, 5]);
    }

    #[test]
    fn current_examples() {
        assert_relative_eq!(zrp_current(&[0.7], &[0.2]).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(zrp_current(&[0.9, 0.9], &[0.4, 0.4]).unwrap(), 0.5, epsilon = 1e-15);
        let l = DensityLadder::new(0.8, 0.2, vec![0.3, 12.0 / 19.0, 48.0 / 55.0]).unwrap();
        let (ps, qs) = ladder_rates(0.8, 0.2, &l).unwrap();
        let a2 = zrp_current(&ps, &qs).unwrap();
        let a4 = multi_shock_velocity(0.8, 0.2, 0.3, 48.0 / 55.0).unwrap();
        assert_relative_eq!(a2, a4, max_relative = 1e-12);
        assert!((a4 + 0.103637).abs() < 1e-6);
    }

    #[test]
    fn log_space_matches_direct() {
        let ps: Vec<f64> = (0..25).map(|k| 0.5 + 0.01 * k as f64).collect();
        let qs: Vec<f64> = (0..25).map(|k| 0.3 + 0.005 * k as f64).collect();
        let direct = {
            let num = ps.iter().product::<f64>() - qs.iter().product::<f64>();
            let den: f64 = (0..25)
                .map(|k| ps[..k].iter().product::<f64>() * qs[k + 1..].iter().product::<f64>())
                .sum();
            num / den
        };
        assert_relative_eq!(zrp_current(&ps, &qs).unwrap(), direct, max_relative = 1e-10);
    }

    #[test]
    fn ladder_validation() {
        assert!(DensityLadder::new(0.8, 0.2, vec![0.2, 0.3]).is_err());
        let l = DensityLadder::new(0.8, 0.2, vec![0.2, 0.5, 0.8]).unwrap();
        let (ps, _) = ladder_rates(0.8, 0.2, &l).unwrap();
        assert_relative_eq!(ps[0], 0.5, epsilon = 1e-15);
        let one = DensityLadder::new(0.7, 0.3, vec![0.3, 0.5]).unwrap();
        let (ps, qs) = ladder_rates(0.7, 0.3, &one).unwrap();
        assert_relative_eq!(ps[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(qs[0], 0.42, epsilon = 1e-15);
    }

    #[test]
    fn gap_fugacities_two_particles() {
        let l = DensityLadder::new(0.8, 0.2, vec![0.3, 12.0 / 19.0, 48.0 / 55.0]).unwrap();
        let (ps, qs) = ladder_rates(0.8, 0.2, &l).unwrap();
        let z = stationary_gap_fugacities(&ps, &qs).unwrap();
        assert_relative_eq!(z[0], (qs[0] + ps[1]) / (ps[0] + qs[1]), epsilon = 1e-15);
    }
}
