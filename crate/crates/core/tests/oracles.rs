//! Independent reference computations checked against the library.

use std::collections::HashMap;

use approx::assert_relative_eq;
use shockwalk::dynamics::{Coupled, Pair};
use shockwalk::exact::{expect_generator, verify_theorem_3_1, BasisPolicy, EngineConfig};
use shockwalk::hydro::{flux, ladder_rates, multi_shock_velocity, stationary_gap_fugacities, DensityLadder};
use shockwalk::measures::{density_rho, marginal, ProductFamily, ShockSpec, Truncation};
use shockwalk::models::Model;
use shockwalk::simulator::stats::poisson_difference_pmf;

/// Coupled ASEP written as first and second class particles: a first class
/// particle treats the second class one as a hole; the second class particle
/// hops onto holes.
fn second_class_moves(p: f64, q: f64, x: &[u8], i: usize) -> Vec<(f64, Vec<u8>)> {
    // 0 hole, 1 first class, 2 second class
    let (a, b) = (x[i], x[i + 1]);
    let mut out = Vec::new();
    let mut swap = |rate: f64| {
        let mut y = x.to_vec();
        y.swap(i, i + 1);
        out.push((rate, y));
    };
    match (a, b) {
        (1, 0) | (1, 2) | (2, 0) => swap(p),
        (0, 1) | (2, 1) | (0, 2) => swap(q),
        _ => {}
    }
    out
}

fn window_key(x: &[u8], from: usize, len: usize) -> Vec<u8> {
    x[from..from + len].to_vec()
}

/// Law of the window `[-3, 3]` under the ASEP shock with the second class
/// particle at `j`, density `rho` left and `lambda` right, as a table.
fn shock_window_law(rho: f64, lambda: f64, j: i32) -> HashMap<Vec<u8>, f64> {
    let mut law = HashMap::new();
    let sites: Vec<i32> = (-3..=3).collect();
    let free: Vec<i32> = sites.iter().copied().filter(|&i| i != j).collect();
    for code in 0u32..(1 << free.len()) {
        let mut x = vec![0u8; 7];
        let mut w = 1.0;
        for (k, &i) in free.iter().enumerate() {
            let occ = (code >> k & 1) as u8;
            let d = if i < j { rho } else { lambda };
            w *= if occ == 1 { d } else { 1.0 - d };
            x[(i + 3) as usize] = occ;
        }
        if (-3..=3).contains(&j) {
            x[(j + 3) as usize] = 2;
        }
        *law.entry(x).or_insert(0.0) += w;
    }
    law
}

#[test]
fn asep_single_shock_brute_force() {
    let (p, q, rho, lambda) = (0.7, 0.3, 0.3, 0.5);
    // P = (1 - lambda) p + lambda q, Q = (1 - rho) q + rho p
    let (big_p, big_q) = (0.5 * 0.7 + 0.5 * 0.3, 0.7 * 0.3 + 0.3 * 0.7);

    // E_{nu_0}(L 1{window = c}) for every c by summing over [-4, 4]
    let mut lhs: HashMap<Vec<u8>, f64> = HashMap::new();
    for code in 0u32..(1 << 8) {
        let mut x = vec![0u8; 9];
        let mut w = 1.0;
        let mut k = 0;
        for (idx, slot) in x.iter_mut().enumerate() {
            let i = idx as i32 - 4;
            if i == 0 {
                *slot = 2;
                continue;
            }
            let occ = (code >> k & 1) as u8;
            k += 1;
            let d = if i < 0 { rho } else { lambda };
            w *= if occ == 1 { d } else { 1.0 - d };
            *slot = occ;
        }
        for e in 0..8 {
            for (rate, y) in second_class_moves(p, q, &x, e) {
                *lhs.entry(window_key(&y, 1, 7)).or_insert(0.0) += rate * w;
                *lhs.entry(window_key(&x, 1, 7)).or_insert(0.0) -= rate * w;
            }
        }
    }
    let (l0, lr, ll) = (
        shock_window_law(rho, lambda, 0),
        shock_window_law(rho, lambda, 1),
        shock_window_law(rho, lambda, -1),
    );
    let keys: std::collections::HashSet<_> = lhs.keys().chain(l0.keys()).chain(lr.keys()).chain(ll.keys()).collect();
    let get = |m: &HashMap<Vec<u8>, f64>, k: &Vec<u8>| m.get(k).copied().unwrap_or(0.0);
    let mut worst = 0.0f64;
    for k in &keys {
        let rhs = big_p * (get(&lr, k) - get(&l0, k)) + big_q * (get(&ll, k) - get(&l0, k));
        worst = worst.max((get(&lhs, k) - rhs).abs());
    }
    assert!(worst < 1e-15, "brute force residual {worst}");

    // the library's value of the same expectations
    let model = Model::asep(p, q).unwrap();
    let spec = ShockSpec::asep_from_densities(&model, rho, lambda, 0).unwrap();
    let measure = spec.product(-4, 4).unwrap();
    let cfg = EngineConfig::default();
    let d = Coupled(model.growth().unwrap());
    let code = |s: &Pair| match (s.omega, s.zeta) {
        (0, 0) => 0u8,
        (1, 1) => 1,
        _ => 2,
    };
    for k in keys.iter().take(40) {
        let target = (*k).clone();
        let (v, budget) = expect_generator(
            &d,
            &measure,
            (-3, 3),
            move |s: &[Pair]| (s.iter().map(code).collect::<Vec<_>>() == target) as u8 as f64,
            &cfg,
        )
        .unwrap();
        assert_eq!(budget, 0.0);
        assert!((v - get(&lhs, k)).abs() < 1e-15, "{k:?}: {v} vs {}", get(&lhs, k));
    }

    let rep = verify_theorem_3_1(
        &spec,
        (-3, 3),
        &EngineConfig {
            basis: BasisPolicy::Full,
            ..cfg
        },
    )
    .unwrap();
    assert!(rep.max_residual < 1e-15);
    assert_relative_eq!(rep.diagnostics["P"], big_p, epsilon = 1e-15);
    assert_relative_eq!(rep.diagnostics["Q"], big_q, epsilon = 1e-15);
}

/// `ln f(z)! = beta z^2 / 2` for `f(z) = e^{beta(z - 1/2)}`, so `mu^theta`
/// is a discrete Gaussian.
fn discrete_gaussian(beta: f64, theta: f64) -> (Vec<f64>, i32) {
    let lo = -80;
    let w: Vec<f64> = (lo..=80)
        .map(|z| (theta * z as f64 - beta * (z * z) as f64 / 2.0).exp())
        .collect();
    let s: f64 = w.iter().sum();
    (w.iter().map(|x| x / s).collect(), lo)
}

#[test]
fn exponential_marginals_are_discrete_gaussians() {
    let t = Truncation::default();
    for beta in [0.7, 1.0, 1.3] {
        for theta in [-2.0, -0.4, 0.0, 0.5, 1.7] {
            let (pmf, lo) = discrete_gaussian(beta, theta);
            let mean: f64 = pmf.iter().enumerate().map(|(k, w)| (lo + k as i32) as f64 * w).sum();
            for model in [Model::gzrp(beta).unwrap(), Model::blp(beta).unwrap()] {
                let m = marginal(&model, theta, &t).unwrap();
                for y in m.support.0..=m.support.1 {
                    let want = pmf[(y - lo) as usize];
                    assert!(
                        (m.prob(y) - want).abs() < 1e-12,
                        "{} beta {beta} theta {theta} y {y}",
                        model.name()
                    );
                }
                assert!((density_rho(&model, theta, &t).unwrap() - mean).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn exponential_flux_is_mean_rate() {
    let t = Truncation::default();
    let beta = 1.0;
    let f = |z: i32| (beta * (z as f64 - 0.5)).exp();
    for theta in [-1.0, 0.0, 0.8] {
        let (pmf, lo) = discrete_gaussian(beta, theta);
        let at = |g: &dyn Fn(i32) -> f64| -> f64 { pmf.iter().enumerate().map(|(k, w)| w * g(lo + k as i32)).sum() };
        let rho: f64 = at(&|z| z as f64);
        // GZRP: E f(omega_i); BLP: E f(omega_i) + E f(-omega_{i+1})
        let gz = at(&f);
        let bl = gz + at(&|z| f(-z));
        assert_relative_eq!(
            flux(&Model::gzrp(beta).unwrap(), rho, &t).unwrap(),
            gz,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            flux(&Model::blp(beta).unwrap(), rho, &t).unwrap(),
            bl,
            max_relative = 1e-9
        );
    }
}

/// Skellam law `e^{-(a+b)} (a/b)^{k/2} I_k(2 sqrt(ab))` with the Bessel
/// function from its power series.
fn skellam(a: f64, b: f64, k: i64) -> f64 {
    let x = 2.0 * (a * b).sqrt();
    let n = k.unsigned_abs() as f64;
    let ln_half = (x / 2.0).ln();
    let mut terms = Vec::new();
    for m in 0..400 {
        let mf = m as f64;
        terms.push((2.0 * mf + n) * ln_half - ln_gamma(mf + 1.0) - ln_gamma(mf + n + 1.0));
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_i = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    (-(a + b) + k as f64 / 2.0 * (a / b).ln() + ln_i).exp()
}

fn ln_gamma(x: f64) -> f64 {
    // x is a positive integer here
    (1..x as u64).map(|k| (k as f64).ln()).sum()
}

#[test]
fn poisson_difference_matches_bessel_form() {
    for (a, b) in [(25.0, 21.0), (40.0, 15.0), (3.0, 0.5)] {
        let pmf = poisson_difference_pmf(a, b, -60, 80).unwrap();
        for (k, &v) in (-60..=80).zip(&pmf) {
            let want = skellam(a, b, k);
            assert!((v - want).abs() < 1e-13, "({a}, {b}) at {k}: {v} vs {want}");
        }
    }
    let pmf = poisson_difference_pmf(25.0, 21.0, -200, 200).unwrap();
    let mean: f64 = (-200..=200).zip(&pmf).map(|(k, w)| k as f64 * w).sum();
    let var: f64 = (-200..=200).zip(&pmf).map(|(k, w)| (k as f64 - mean).powi(2) * w).sum();
    assert_relative_eq!(mean, 4.0, epsilon = 1e-10);
    assert_relative_eq!(var, 46.0, epsilon = 1e-9);
}

#[test]
fn two_particle_bound_state_as_birth_death_chain() {
    // gap g between the two particles: +1 at rate Q_1 + P_2, -1 at rate
    // P_1 + Q_2 when g > 0, so pi(g) is geometric with ratio
    // z = (Q_1 + P_2)/(P_1 + Q_2)
    let (p, q) = (0.8, 0.2);
    let r = [0.3, 12.0 / 19.0, 48.0 / 55.0];
    let big_p = |k: usize| (1.0 - r[k]) / (1.0 - r[k - 1]) * p;
    let big_q = |k: usize| (1.0 - r[k - 1]) / (1.0 - r[k]) * q;
    let z = (big_q(1) + big_p(2)) / (big_p(1) + big_q(2));
    let busy = z; // P(g > 0)
    let v = 0.5 * ((big_p(1) * busy - big_q(1)) + (big_p(2) - big_q(2) * busy));

    let ladder = DensityLadder::new(p, q, r.to_vec()).unwrap();
    let (ps, qs) = ladder_rates(p, q, &ladder).unwrap();
    let zs = stationary_gap_fugacities(&ps, &qs).unwrap();
    assert_relative_eq!(zs[0], z, epsilon = 1e-14);
    assert_relative_eq!(v, -0.103636363636, epsilon = 1e-9);
    assert_relative_eq!(multi_shock_velocity(p, q, r[0], r[2]).unwrap(), v, epsilon = 1e-14);
}
