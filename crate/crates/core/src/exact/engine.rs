//! Exact `E_nu(L phi)` for every indicator `phi` of a window configuration.
//!
//! Under a product measure the contribution of edge `(i, i+1)` to
//! `E_nu(L 1{eta|_W = c})` factorizes as the product of the marginal
//! probabilities of `c` away from the edge times a two-site table
//! `G[c_i][c_{i+1}]` (inflow minus outflow). One pass of prefix/suffix
//! products therefore evaluates the left-hand side for each `c` in `O(|W|)`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dynamics::{EdgeDynamics, Move, SiteState};
use crate::error::{Error, Result};
use crate::measures::ProductMeasure;
use crate::par::{map_chunks, Exec};

/// Largest number of window configurations enumerated per identity.
pub const DEFAULT_ENUMERATION_CAP: u64 = 20_000_000;

/// Which window configurations are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisPolicy {
    /// Every state reachable from the measures involved.
    Full,
    /// Only states whose level is within `r` of the left-hand-side mode at each site.
    Band(i32),
    /// `Full` if it fits the cap, otherwise the widest band that does.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub cap: u64,
    pub basis: BasisPolicy,
    pub exec: Exec,
    /// Keep every residual when the basis is at most this large.
    pub keep_all: u64,
    /// Otherwise keep this many of the largest.
    pub keep_top: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ENUMERATION_CAP,
            basis: BasisPolicy::Auto,
            exec: Exec::Parallel,
            keep_all: 10_000,
            keep_top: 32,
        }
    }
}

/// `E_lhs(L phi) = sum_k coef_k [E_{rhs_k} phi - E_lhs phi]` for indicators `phi` on `window`.
pub struct IdentityProblem<S> {
    pub window: (i32, i32),
    /// Measure on `[a-1, b+1]` under which the generator is averaged.
    pub lhs: ProductMeasure<S>,
    /// Measures on (at least) `[a, b]` with their rates.
    pub rhs: Vec<(f64, ProductMeasure<S>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    /// Position in the canonical (mixed-radix, leftmost site slowest) order.
    pub index: u64,
    pub config: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySolution {
    pub basis_size: u64,
    pub band: Option<i32>,
    pub max_residual: f64,
    pub argmax: Option<Residual>,
    /// Residuals in canonical order (all of them, or the largest few).
    pub residuals: Vec<Residual>,
    pub truncation_budget: f64,
}

struct Site<S> {
    alphabet: Vec<S>,
    lhs_prob: Vec<f64>,
    rhs_prob: Vec<Vec<f64>>,
}

struct Tables<S> {
    sites: Vec<Site<S>>,
    /// `G` for interior edges, row-major `[u * |A_{k+1}| + v]`.
    interior: Vec<Vec<f64>>,
    left_boundary: Vec<f64>,
    right_boundary: Vec<f64>,
    coefs: Vec<f64>,
}

fn index_of<S: SiteState>(alphabet: &[S], s: S) -> Option<usize> {
    alphabet.binary_search(&s).ok()
}

fn moves_of<D: EdgeDynamics>(d: &D, l: D::State, r: D::State) -> Vec<Move<D::State>> {
    let mut v = Vec::with_capacity(6);
    d.edge_moves(l, r, &mut v);
    v
}

/// Per-site candidate states: anything charged by a measure, plus one-step targets.
fn alphabets<D: EdgeDynamics>(d: &D, prob: &IdentityProblem<D::State>) -> Vec<BTreeSet<D::State>> {
    let (a, b) = prob.window;
    let mut sets: Vec<BTreeSet<D::State>> = (a..=b)
        .map(|i| {
            let mut s: BTreeSet<_> = prob.lhs.law(i).atoms.iter().map(|x| x.0).collect();
            for (_, m) in &prob.rhs {
                s.extend(m.law(i).atoms.iter().filter(|x| x.1 > 0.0).map(|x| x.0));
            }
            s
        })
        .collect();
    for i in a - 1..=b {
        let (ll, lr) = (prob.lhs.law(i), prob.lhs.law(i + 1));
        for &(s, _) in &ll.atoms {
            for &(t, _) in &lr.atoms {
                for m in moves_of(d, s, t) {
                    if i >= a {
                        sets[(i - a) as usize].insert(m.left);
                    }
                    if i < b {
                        sets[(i + 1 - a) as usize].insert(m.right);
                    }
                }
            }
        }
    }
    sets
}

fn basis_size(sets: &[Vec<impl Sized>]) -> u128 {
    sets.iter().map(|s| s.len() as u128).product()
}

fn band_filter<S: SiteState>(sets: &[BTreeSet<S>], centers: &[i32], r: Option<i32>) -> Vec<Vec<S>> {
    sets.iter()
        .zip(centers)
        .map(|(s, &c)| {
            s.iter()
                .copied()
                .filter(|x| r.is_none_or(|r| (x.level() - c).abs() <= r))
                .collect()
        })
        .collect()
}

fn choose_basis<S: SiteState>(
    sets: &[BTreeSet<S>],
    centers: &[i32],
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<S>>, Option<i32>)> {
    let full = band_filter(sets, centers, None);
    let full_size = basis_size(&full);
    match cfg.basis {
        BasisPolicy::Full => {
            if full_size > cfg.cap as u128 {
                return Err(Error::Budget {
                    required: full_size,
                    cap: cfg.cap,
                });
            }
            Ok((full, None))
        }
        BasisPolicy::Band(r) => {
            let v = band_filter(sets, centers, Some(r));
            let size = basis_size(&v);
            if size > cfg.cap as u128 {
                return Err(Error::Budget {
                    required: size,
                    cap: cfg.cap,
                });
            }
            Ok((v, Some(r)))
        }
        BasisPolicy::Auto => {
            if full_size <= cfg.cap as u128 {
                return Ok((full, None));
            }
            let widest = sets
                .iter()
                .zip(centers)
                .flat_map(|(s, &c)| s.iter().map(move |x| (x.level() - c).abs()))
                .max()
                .unwrap_or(0);
            for r in (2..=widest).rev() {
                let v = band_filter(sets, centers, Some(r));
                if basis_size(&v) <= cfg.cap as u128 {
                    return Ok((v, Some(r)));
                }
            }
            Err(Error::Budget {
                required: basis_size(&band_filter(sets, centers, Some(2))),
                cap: cfg.cap,
            })
        }
    }
}

fn build_tables<D: EdgeDynamics>(
    d: &D,
    prob: &IdentityProblem<D::State>,
    alph: Vec<Vec<D::State>>,
) -> Tables<D::State> {
    let (a, b) = prob.window;
    let n = (b - a + 1) as usize;
    let sites: Vec<Site<D::State>> = alph
        .into_iter()
        .enumerate()
        .map(|(k, alphabet)| {
            let i = a + k as i32;
            let lhs_prob = alphabet.iter().map(|&s| prob.lhs.law(i).prob(s)).collect();
            let rhs_prob = prob
                .rhs
                .iter()
                .map(|(_, m)| alphabet.iter().map(|&s| m.law(i).prob(s)).collect())
                .collect();
            Site {
                alphabet,
                lhs_prob,
                rhs_prob,
            }
        })
        .collect();

    let mut interior = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let i = a + k as i32;
        let (al, ar) = (&sites[k].alphabet, &sites[k + 1].alphabet);
        let mut g = vec![0.0; al.len() * ar.len()];
        for &(s, ws) in &prob.lhs.law(i).atoms {
            for &(t, wt) in &prob.lhs.law(i + 1).atoms {
                let w = ws * wt;
                let mv = moves_of(d, s, t);
                let out: f64 = mv.iter().map(|m| m.rate).sum();
                if let (Some(u), Some(v)) = (index_of(al, s), index_of(ar, t)) {
                    g[u * ar.len() + v] -= w * out;
                }
                for m in &mv {
                    if let (Some(u), Some(v)) = (index_of(al, m.left), index_of(ar, m.right)) {
                        g[u * ar.len() + v] += w * m.rate;
                    }
                }
            }
        }
        interior.push(g);
    }

    let boundary = |i: i32, inside_right: bool, alphabet: &[D::State]| {
        let mut h = vec![0.0; alphabet.len()];
        for &(s, ws) in &prob.lhs.law(i).atoms {
            for &(t, wt) in &prob.lhs.law(i + 1).atoms {
                let w = ws * wt;
                let before = if inside_right { t } else { s };
                for m in moves_of(d, s, t) {
                    let after = if inside_right { m.right } else { m.left };
                    if let Some(v) = index_of(alphabet, after) {
                        h[v] += w * m.rate;
                    }
                    if let Some(v) = index_of(alphabet, before) {
                        h[v] -= w * m.rate;
                    }
                }
            }
        }
        h
    };
    let left_boundary = boundary(a - 1, true, &sites[0].alphabet);
    let right_boundary = boundary(b, false, &sites[n - 1].alphabet);
    Tables {
        sites,
        interior,
        left_boundary,
        right_boundary,
        coefs: prob.rhs.iter().map(|(c, _)| *c).collect(),
    }
}

/// Certified bound on what the truncated tails can change in any residual.
fn truncation_budget<D: EdgeDynamics>(d: &D, prob: &IdentityProblem<D::State>) -> f64 {
    let (a, b) = prob.window;
    let lhs = &prob.lhs;
    let tau = |i: i32| lhs.law(i).tail_bound;
    let wtau = |i: i32| lhs.law(i).weighted_tail_bound;
    if (a - 1..=b + 1).all(|i| tau(i) == 0.0 && wtau(i) == 0.0)
        && prob
            .rhs
            .iter()
            .all(|(_, m)| (a..=b).all(|i| m.law(i).tail_bound == 0.0))
    {
        return 0.0;
    }
    let mut max_rate_sum = 0.0;
    let mut budget = 0.0;
    for i in a - 1..=b {
        let mut rmax = 0.0f64;
        for &(s, _) in &lhs.law(i).atoms {
            for &(t, _) in &lhs.law(i + 1).atoms {
                rmax = rmax.max(d.total_rate(s, t));
            }
        }
        max_rate_sum += rmax;
        // coupled edge rates are at most twice a single-copy envelope
        budget += 4.0 * (wtau(i) + wtau(i + 1)) + 2.0 * (tau(i) + tau(i + 1)) * rmax;
    }
    let tau_total: f64 = (a - 1..=b + 1).map(tau).sum();
    budget += 2.0 * tau_total * max_rate_sum;
    for (c, m) in &prob.rhs {
        let t: f64 = (a..=b).map(|i| m.law(i).tail_bound + tau(i)).sum();
        budget += 2.0 * c.abs() * t;
    }
    budget
}

fn render<S: SiteState>(sites: &[Site<S>], digits: &[u32]) -> String {
    let parts: Vec<String> = digits
        .iter()
        .zip(sites)
        .map(|(&dg, s)| format!("{:?}", s.alphabet[dg as usize]))
        .collect();
    parts.join(" ")
}

/// Visits every basis configuration with its left- and right-hand side.
fn scan<S, T, F, M>(t: &Tables<S>, exec: Exec, init: impl Fn() -> T + Sync + Send, visit: F, merge: M) -> T
where
    S: SiteState,
    T: Send,
    F: Fn(&mut T, u64, &[u32], f64, f64) + Sync + Send,
    M: Fn(T, T) -> T,
{
    let n = t.sites.len();
    let radix: Vec<u64> = t.sites.iter().map(|s| s.alphabet.len() as u64).collect();
    let total: u64 = radix.iter().product();
    let chunk = (total / 256).clamp(1024, 1 << 16);
    let parts = map_chunks(exec, total, chunk, |start, end| {
        let mut acc = init();
        let mut digits = vec![0u32; n];
        let mut rem = start;
        for k in (0..n).rev() {
            digits[k] = (rem % radix[k]) as u32;
            rem /= radix[k];
        }
        let mut pre = vec![1.0; n + 1];
        let mut suf = vec![1.0; n + 1];
        let n_rhs = t.coefs.len();
        for flat in start..end {
            for k in 0..n {
                pre[k + 1] = pre[k] * t.sites[k].lhs_prob[digits[k] as usize];
            }
            for k in (0..n).rev() {
                suf[k] = t.sites[k].lhs_prob[digits[k] as usize] * suf[k + 1];
            }
            let mut lhs = t.left_boundary[digits[0] as usize] * suf[1];
            for k in 0..n - 1 {
                let w = t.sites[k + 1].alphabet.len();
                let g = t.interior[k][digits[k] as usize * w + digits[k + 1] as usize];
                if g != 0.0 {
                    lhs += pre[k] * g * suf[k + 2];
                }
            }
            lhs += pre[n - 1] * t.right_boundary[digits[n - 1] as usize];
            let nu = pre[n];
            let mut rhs = 0.0;
            for r in 0..n_rhs {
                let mut pr = 1.0;
                for (site, &d) in t.sites.iter().zip(&digits[..n]) {
                    pr *= site.rhs_prob[r][d as usize];
                    if pr == 0.0 {
                        break;
                    }
                }
                rhs += t.coefs[r] * (pr - nu);
            }
            visit(&mut acc, flat, &digits, lhs, rhs);
            // odometer, rightmost site fastest
            for k in (0..n).rev() {
                digits[k] += 1;
                if (digits[k] as u64) < radix[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        acc
    });
    parts.into_iter().fold(init(), merge)
}

struct Acc {
    max: f64,
    argmax: Option<(u64, Vec<u32>, f64, f64)>,
    kept: Vec<(u64, Vec<u32>, f64, f64)>,
}

fn prepare<D: EdgeDynamics>(
    d: &D,
    prob: &IdentityProblem<D::State>,
    cfg: &EngineConfig,
) -> Result<(Tables<D::State>, Option<i32>)> {
    let (a, b) = prob.window;
    if a > b {
        return Err(Error::param("window", format!("empty window [{a}, {b}]")));
    }
    if prob.lhs.lo > a - 1 || prob.lhs.hi() < b + 1 {
        return Err(Error::Domain("left-hand measure must cover [a-1, b+1]".into()));
    }
    for (_, m) in &prob.rhs {
        if m.lo > a || m.hi() < b {
            return Err(Error::Domain("right-hand measures must cover [a, b]".into()));
        }
    }
    let sets = alphabets(d, prob);
    let centers: Vec<i32> = (a..=b).map(|i| prob.lhs.law(i).mode().level()).collect();
    let (alph, band) = choose_basis(&sets, &centers, cfg)?;
    if alph.iter().any(|s| s.is_empty()) {
        return Err(Error::Degenerate("band excludes every state at some site".into()));
    }
    Ok((build_tables(d, prob, alph), band))
}

/// Residuals `LHS(c) - RHS(c)` for every basis indicator.
pub fn solve_identity<D: EdgeDynamics>(
    d: &D,
    prob: &IdentityProblem<D::State>,
    cfg: &EngineConfig,
) -> Result<IdentitySolution> {
    let (t, band) = prepare(d, prob, cfg)?;
    let size: u64 = t.sites.iter().map(|s| s.alphabet.len() as u64).product();
    let keep_all = size <= cfg.keep_all;
    let top = cfg.keep_top;
    let acc = scan(
        &t,
        cfg.exec,
        || Acc {
            max: -1.0,
            argmax: None,
            kept: Vec::new(),
        },
        |acc, flat, digits, lhs, rhs| {
            let r = (lhs - rhs).abs();
            if r > acc.max {
                acc.max = r;
                acc.argmax = Some((flat, digits.to_vec(), lhs, rhs));
            }
            if keep_all {
                acc.kept.push((flat, digits.to_vec(), lhs, rhs));
            } else if top > 0 {
                let smallest = acc.kept.len() >= top;
                if !smallest || r > (acc.kept[top - 1].2 - acc.kept[top - 1].3).abs() {
                    acc.kept.push((flat, digits.to_vec(), lhs, rhs));
                    acc.kept
                        .sort_by(|x, y| (y.2 - y.3).abs().total_cmp(&(x.2 - x.3).abs()).then(x.0.cmp(&y.0)));
                    acc.kept.truncate(top);
                }
            }
        },
        |mut x, y| {
            // chunks arrive in index order, so ties keep the earliest index
            if y.max > x.max {
                x.max = y.max;
                x.argmax = y.argmax;
            }
            x.kept.extend(y.kept);
            if !keep_all {
                x.kept
                    .sort_by(|p, q| (q.2 - q.3).abs().total_cmp(&(p.2 - p.3).abs()).then(p.0.cmp(&q.0)));
                x.kept.truncate(top);
            }
            x
        },
    );
    let to_res = |(index, digits, lhs, rhs): (u64, Vec<u32>, f64, f64)| Residual {
        index,
        config: render(&t.sites, &digits),
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    };
    let mut kept: Vec<Residual> = acc.kept.into_iter().map(to_res).collect();
    kept.sort_by_key(|r| r.index);
    Ok(IdentitySolution {
        basis_size: size,
        band,
        max_residual: acc.max.max(0.0),
        argmax: acc.argmax.map(to_res),
        residuals: kept,
        truncation_budget: truncation_budget(d, prob),
    })
}

/// `E_lhs(L phi)` for an arbitrary `phi` on the window, together with the
/// truncation budget per unit of `sup |phi|`.
pub fn expect_generator<D: EdgeDynamics>(
    d: &D,
    lhs: &ProductMeasure<D::State>,
    window: (i32, i32),
    phi: impl Fn(&[D::State]) -> f64 + Sync + Send,
    cfg: &EngineConfig,
) -> Result<(f64, f64)> {
    let prob = IdentityProblem {
        window,
        lhs: lhs.clone(),
        rhs: Vec::new(),
    };
    let cfg = EngineConfig {
        basis: BasisPolicy::Full,
        ..*cfg
    };
    let (t, _) = prepare(d, &prob, &cfg)?;
    let value = scan(
        &t,
        cfg.exec,
        || (0.0f64, Vec::<D::State>::new()),
        |acc, _flat, digits, lhs, _| {
            if lhs != 0.0 {
                acc.1.clear();
                acc.1
                    .extend(digits.iter().zip(&t.sites).map(|(&dg, s)| s.alphabet[dg as usize]));
                acc.0 += phi(&acc.1) * lhs;
            }
        },
        |x, y| (x.0 + y.0, x.1),
    );
    Ok((value.0, truncation_budget(d, &prob)))
}
