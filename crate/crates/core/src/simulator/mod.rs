//! Event-driven coupled simulation on `[-M, M]` with frozen boundary edges.
//!
//! Each replica owns its lattice and a ChaCha8 stream selected by
//! `(seed, replica)`, so results do not depend on scheduling. The two
//! outermost edges on each side never fire. A replica is flagged when the
//! tracked objects come within two sites of the region that the frozen
//! boundary can have influenced (a light cone grown by actual events at its
//! front and, for bounded rates, by independent clocks at the largest edge
//! rate).

mod fenwick;
mod run;
pub mod stats;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Bcrw, Coupled, EdgeDynamics, Pair, Single};
use crate::error::{Error, Result};
use crate::exact::{bcrw_theorem_rates, single_shock_rates};
use crate::hydro::{ladder_rates, rh_velocity_of_theta, stationary_gap_fugacities, DensityLadder};
use crate::measures::{
    marginal, BcrwShockSpec, MultiShockSpec, Orientation, ProductFamily, ShockSpec, Stationary, Truncation,
};
use crate::models::Model;
use crate::par::{map_indices, Exec};
use run::{run_replica, Raw, ReplicaSpec, Status, Track};
use stats::{chi_square, moments, poisson_difference_pmf, tv_distance, ChiSquare, Moments};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Lattice `[-M, M]`.
    pub half_width: i32,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Largest `|omega|` allowed before a replica is aborted.
    pub value_cap: i32,
    /// Number of sample times after `t = 0`, evenly spaced up to the horizon.
    pub samples: usize,
    pub exec: Exec,
    /// Half-width of the density profile around the tracked site, if wanted.
    pub profile_half_width: Option<i32>,
    pub max_flagged_fraction: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            half_width: 400,
            horizon: 50.0,
            replicas: 10_000,
            seed: 0,
            value_cap: 40,
            samples: 10,
            exec: Exec::Parallel,
            profile_half_width: None,
            max_flagged_fraction: 0.01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_width < 4 {
            return Err(Error::param(
                "half_width",
                format!("need M >= 4, got {}", self.half_width),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::param("horizon", format!("need T >= 0, got {}", self.horizon)));
        }
        if self.replicas == 0 {
            return Err(Error::param("replicas", "need N >= 1"));
        }
        if self.value_cap < 1 {
            return Err(Error::param(
                "value_cap",
                format!("must be positive, got {}", self.value_cap),
            ));
        }
        if self.samples == 0 {
            return Err(Error::param("samples", "need at least one sample time"));
        }
        if let Some(w) = self.profile_half_width {
            if w < 0 {
                return Err(Error::param(
                    "profile_half_width",
                    format!("must be nonnegative, got {w}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return Err(Error::param(
                "max_flagged_fraction",
                format!("must lie in [0, 1], got {}", self.max_flagged_fraction),
            ));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.samples.max(1);
        (0..=n).map(|k| self.horizon * k as f64 / n as f64).collect()
    }

    fn rng(&self, replica: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replica as u64);
        rng
    }
}

/// Law of a continuous-time walk with right rate `right_rate` and left rate
/// `left_rate` at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkPrediction {
    pub right_rate: f64,
    pub left_rate: f64,
    pub mean: f64,
    pub variance: f64,
}

impl WalkPrediction {
    fn new(right_rate: f64, left_rate: f64, horizon: f64) -> Self {
        Self {
            right_rate,
            left_rate,
            mean: (right_rate - left_rate) * horizon,
            variance: (right_rate + left_rate) * horizon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmfRow {
    pub position: i64,
    pub count: u64,
    pub empirical: f64,
    pub predicted_probability: f64,
}

/// Distance between consecutive tracked particles at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub distance: i32,
    pub count: u64,
    pub fraction: f64,
    /// Stationary bound-state law, averaged over gaps (ASEP only).
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub offset: i32,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerResult {
    pub sample_times: Vec<f64>,
    pub replicas: usize,
    /// Indices of the replicas that entered the statistics.
    pub replica_ids: Vec<usize>,
    /// Tracked position at each sample time, per included replica.
    pub trajectories: Vec<Vec<f64>>,
    /// Displacement of the tracked position over `[0, T]`.
    pub displacement: Moments,
    pub prediction: Option<WalkPrediction>,
    pub predicted_velocity: f64,
    pub velocity: Moments,
    pub pmf: Vec<PmfRow>,
    pub tv_distance: Option<f64>,
    pub chi_square: Option<ChiSquare>,
    pub gaps: Vec<GapRow>,
    pub profile: Vec<ProfileRow>,
    pub flagged: usize,
    pub capped: usize,
    pub absorbed: usize,
    pub events: u64,
}

impl TrackerResult {
    pub fn flagged_fraction(&self) -> f64 {
        self.flagged as f64 / self.replicas as f64
    }
}

fn max_edge_rate<D: EdgeDynamics>(d: &D, states: &[D::State]) -> f64 {
    let mut best = 0.0f64;
    for &l in states {
        for &r in states {
            best = best.max(d.total_rate(l, r));
        }
    }
    best
}

fn pair_states(model: &Model) -> Option<Vec<Pair>> {
    match model {
        Model::Asep { .. } => Some(vec![Pair::new(0, 0), Pair::new(0, 1), Pair::new(1, 1)]),
        _ => None,
    }
}

fn simulate<D: EdgeDynamics>(spec: &ReplicaSpec<'_, D>, cfg: &SimConfig) -> Result<Vec<Raw>> {
    cfg.validate()?;
    let raws = map_indices(cfg.exec, cfg.replicas, |r| run_replica(spec, cfg, &mut cfg.rng(r)));
    let raws = raws.into_iter().collect::<Result<Vec<_>>>()?;
    let flagged = raws.iter().filter(|r| r.flagged).count();
    if flagged as f64 > cfg.max_flagged_fraction * cfg.replicas as f64 {
        return Err(Error::Inconclusive {
            flagged,
            total: cfg.replicas,
        });
    }
    Ok(raws)
}

fn included(raws: &[Raw], allow_absorbed: bool) -> Vec<usize> {
    (0..raws.len())
        .filter(|&r| match raws[r].status {
            Status::Completed => true,
            Status::Absorbed => allow_absorbed,
            Status::Capped(_) => false,
        })
        .collect()
}

fn profile_rows(raws: &[Raw], ids: &[usize], half_width: Option<i32>) -> Vec<ProfileRow> {
    let Some(w) = half_width else {
        return Vec::new();
    };
    (-w..=w)
        .enumerate()
        .map(|(k, offset)| {
            let xs: Vec<f64> = ids
                .iter()
                .map(|&r| raws[r].profile[k])
                .filter(|v| v.is_finite())
                .collect();
            let m = moments(&xs);
            ProfileRow {
                offset,
                mean: m.mean,
                se: m.se_mean,
            }
        })
        .collect()
}

fn assemble(
    raws: Vec<Raw>,
    ids: Vec<usize>,
    cfg: &SimConfig,
    prediction: Option<WalkPrediction>,
    predicted_velocity: f64,
) -> Result<TrackerResult> {
    if ids.is_empty() {
        return Err(Error::Degenerate("no replica completed".into()));
    }
    let trajectories: Vec<Vec<f64>> = ids.iter().map(|&r| raws[r].samples.clone()).collect();
    let disp: Vec<f64> = trajectories.iter().map(|s| s[s.len() - 1] - s[0]).collect();
    let displacement = moments(&disp);
    let velocity = if cfg.horizon > 0.0 {
        moments(&disp.iter().map(|d| d / cfg.horizon).collect::<Vec<_>>())
    } else {
        moments(&[])
    };

    let (mut pmf, mut tv, mut chi) = (Vec::new(), None, None);
    if let Some(pred) = prediction {
        let ints: Vec<i64> = disp.iter().map(|d| d.round() as i64).collect();
        let sd = pred.variance.sqrt();
        let lo = ints
            .iter()
            .copied()
            .min()
            .unwrap_or(0)
            .min((pred.mean - 12.0 * sd).floor() as i64);
        let hi = ints
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max((pred.mean + 12.0 * sd).ceil() as i64);
        let law = poisson_difference_pmf(pred.right_rate * cfg.horizon, pred.left_rate * cfg.horizon, lo, hi)?;
        let mut counts = vec![0u64; law.len()];
        for &x in &ints {
            counts[(x - lo) as usize] += 1;
        }
        let n = ints.len() as f64;
        pmf = (lo..=hi)
            .zip(counts.iter().zip(&law))
            .filter(|(_, (&c, &p))| c > 0 || p > 1e-12)
            .map(|(position, (&count, &p))| PmfRow {
                position,
                count,
                empirical: count as f64 / n,
                predicted_probability: p,
            })
            .collect();
        tv = Some(tv_distance(&ints, &law, lo));
        chi = chi_square(&ints, &law, lo).ok();
    }

    let mut gap_counts: BTreeMap<i32, u64> = BTreeMap::new();
    for &r in &ids {
        for w in raws[r].final_sites.windows(2) {
            *gap_counts.entry(w[1] - w[0]).or_default() += 1;
        }
    }
    let total_gaps: u64 = gap_counts.values().sum();
    let gaps = gap_counts
        .into_iter()
        .map(|(distance, count)| GapRow {
            distance,
            count,
            fraction: count as f64 / total_gaps as f64,
            predicted: None,
        })
        .collect();

    Ok(TrackerResult {
        sample_times: cfg.sample_times(),
        replicas: cfg.replicas,
        flagged: raws.iter().filter(|r| r.flagged).count(),
        capped: raws.iter().filter(|r| matches!(r.status, Status::Capped(_))).count(),
        absorbed: raws.iter().filter(|r| r.status == Status::Absorbed).count(),
        events: raws.iter().map(|r| r.events).sum(),
        profile: profile_rows(&raws, &ids, cfg.profile_half_width),
        replica_ids: ids,
        trajectories,
        displacement,
        prediction,
        predicted_velocity,
        velocity,
        pmf,
        tv_distance: tv,
        chi_square: chi,
        gaps,
    })
}

fn discrepancy(s: Pair) -> u32 {
    s.discrepancy().max(0) as u32
}

fn omega_value(s: Pair) -> f64 {
    s.omega as f64
}

/// Second class particle of a single shock, compared with the rate-`(P, Q)`
/// walk law.
pub fn run_shock_tracking(spec: &ShockSpec, cfg: &SimConfig) -> Result<TrackerResult> {
    let (p_rate, q_rate) = single_shock_rates(spec)?;
    let d = Coupled(spec.model.growth()?);
    let m = cfg.half_width;
    let init = |rng: &mut ChaCha8Rng| Ok(spec.product(-m, m)?.sample(rng));
    let rs = ReplicaSpec {
        dynamics: &d,
        count: &discrepancy,
        value: &omega_value,
        track: Track::Center,
        front_rate: pair_states(&spec.model).map(|s| max_edge_rate(&d, &s)),
        init: &init,
    };
    let raws = simulate(&rs, cfg)?;
    let ids = included(&raws, false);
    assemble(
        raws,
        ids,
        cfg,
        Some(WalkPrediction::new(p_rate, q_rate, cfg.horizon)),
        p_rate - q_rate,
    )
}

/// Rightmost (or, mirrored, leftmost) particle of the BCRW shock.
pub fn run_bcrw_tracking(spec: &BcrwShockSpec, cfg: &SimConfig) -> Result<TrackerResult> {
    let (right, left) = bcrw_theorem_rates(&spec.rates, spec.orientation)?;
    let d = Bcrw(spec.rates);
    let m = cfg.half_width;
    let init = |rng: &mut ChaCha8Rng| Ok(spec.product(-m, m)?.sample(rng));
    let count = |s: u8| s as u32;
    let value = |s: u8| s as f64;
    let rs = ReplicaSpec {
        dynamics: &d,
        count: &count,
        value: &value,
        track: match spec.orientation {
            Orientation::Right => Track::Rightmost,
            Orientation::Mirror => Track::Leftmost,
        },
        front_rate: Some(max_edge_rate(&d, &[0, 1])),
        init: &init,
    };
    let raws = simulate(&rs, cfg)?;
    let ids = included(&raws, false);
    assemble(
        raws,
        ids,
        cfg,
        Some(WalkPrediction::new(right, left, cfg.horizon)),
        right - left,
    )
}

/// Initial placement of the second class particles in a multi-shock run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapInit {
    /// Exactly the positions of the measure.
    #[default]
    Spec,
    /// ASEP only: the leftmost particle at its given position, the gaps drawn
    /// from the stationary bound-state law, densities in between from the
    /// same ladder.
    Stationary,
}

/// Ladder, rates and gap fugacities of an ASEP multi-shock.
fn asep_bound_state(spec: &MultiShockSpec) -> Result<(DensityLadder, Vec<f64>)> {
    let Model::Asep { p, q } = spec.model else {
        return Err(spec.model.unsupported("stationary gap law"));
    };
    let pos = spec.positions();
    let mut rho = vec![spec.density(pos[0] - 1)];
    rho.extend(pos.iter().map(|&x| spec.density(x)));
    let ladder = DensityLadder::new(p, q, rho)?;
    let (ps, qs) = ladder_rates(p, q, &ladder)?;
    let z = stationary_gap_fugacities(&ps, &qs)?;
    Ok((ladder, z))
}

/// Centre of mass of the second class particles of a multi-shock, its
/// velocity against the Rankine-Hugoniot value of the outer parameters, and
/// the distances between neighbours at the horizon.
pub fn run_multi_shock(spec: &MultiShockSpec, cfg: &SimConfig, gaps: GapInit) -> Result<TrackerResult> {
    spec.check_conditions()?;
    let n = spec.total_particles();
    if n < 1 {
        return Err(Error::param("m", "needs at least one second class particle"));
    }
    let velocity = rh_velocity_of_theta(&spec.model, spec.sigma.left, spec.sigma.right, &spec.trunc)?;
    let d = Coupled(spec.model.growth()?);
    let m = cfg.half_width;
    let bound = if n >= 2 && matches!(spec.model, Model::Asep { .. }) {
        Some(asep_bound_state(spec)?)
    } else {
        None
    };
    if gaps == GapInit::Stationary && bound.is_none() && n >= 2 {
        return Err(spec.model.unsupported("stationary gap law"));
    }
    let first = spec.positions()[0];
    let init = |rng: &mut ChaCha8Rng| -> Result<Vec<Pair>> {
        match (gaps, &bound) {
            (GapInit::Stationary, Some((_, z))) => {
                let mut x = first;
                let mut mm = BTreeMap::from([(x, 1i64)]);
                for &zk in z {
                    // geometric on {0, 1, ...} with P(g) = (1 - z) z^g
                    let u: f64 = rand::Rng::gen(rng);
                    let g = ((1.0 - u).ln() / zk.ln()).floor() as i32;
                    x += g + 1;
                    mm.insert(x, 1);
                }
                let placed = MultiShockSpec::from_right_parameter(&spec.model, spec.sigma.right, &mm, &spec.trunc)?;
                Ok(placed.product(-m, m)?.sample(rng))
            }
            _ => Ok(spec.product(-m, m)?.sample(rng)),
        }
    };
    let rs = ReplicaSpec {
        dynamics: &d,
        count: &discrepancy,
        value: &omega_value,
        track: Track::Center,
        front_rate: pair_states(&spec.model).map(|s| max_edge_rate(&d, &s)),
        init: &init,
    };
    let raws = simulate(&rs, cfg)?;
    let ids = included(&raws, false);
    let single = if n == 1 {
        let (pr, qr) = crate::exact::multi_shock_edge_rates(spec, first)
            .and_then(|(pr, _)| crate::exact::multi_shock_edge_rates(spec, first - 1).map(|(_, ql)| (pr, ql)))?;
        Some(WalkPrediction::new(pr, qr, cfg.horizon))
    } else {
        None
    };
    let mut out = assemble(raws, ids, cfg, single, velocity)?;
    if let Some((_, z)) = &bound {
        // a gap of g empty sites is a distance g + 1
        for row in &mut out.gaps {
            let g = row.distance - 1;
            let mean = z
                .iter()
                .map(|&zk| if g >= 0 { (1.0 - zk) * zk.powi(g) } else { 0.0 })
                .sum::<f64>()
                / z.len() as f64;
            row.predicted = Some(mean);
        }
    }
    Ok(out)
}

/// One copy of a conserving model started from `mu^theta`; only the profile
/// (around the origin) and event counts are meaningful.
pub fn run_stationary_profile(model: &Model, theta: f64, trunc: &Truncation, cfg: &SimConfig) -> Result<TrackerResult> {
    let mg = marginal(model, theta, trunc)?;
    let fam = Stationary(mg);
    let d = Single(model.growth()?);
    let m = cfg.half_width;
    let init = |rng: &mut ChaCha8Rng| Ok(fam.product(-m, m)?.sample(rng));
    let count = |_: i32| 0u32;
    let value = |s: i32| s as f64;
    let rs = ReplicaSpec {
        dynamics: &d,
        count: &count,
        value: &value,
        track: Track::Nothing,
        front_rate: None,
        init: &init,
    };
    let raws = simulate(&rs, cfg)?;
    let ids = included(&raws, true);
    assemble(raws, ids, cfg, None, 0.0)
}

/// A single ASEP particle on an otherwise empty lattice, started at 0.
pub fn run_single_particle(model: &Model, cfg: &SimConfig) -> Result<TrackerResult> {
    let Model::Asep { p, q } = *model else {
        return Err(model.unsupported("single tagged particle"));
    };
    let d = Single(model.growth()?);
    let m = cfg.half_width;
    let init = |_: &mut ChaCha8Rng| {
        let mut v = vec![0i32; (2 * m + 1) as usize];
        v[m as usize] = 1;
        Ok(v)
    };
    let count = |s: i32| s as u32;
    let value = |s: i32| s as f64;
    let rs = ReplicaSpec {
        dynamics: &d,
        count: &count,
        value: &value,
        track: Track::Center,
        front_rate: Some(max_edge_rate(&d, &[0, 1])),
        init: &init,
    };
    let raws = simulate(&rs, cfg)?;
    let ids = included(&raws, false);
    assemble(raws, ids, cfg, Some(WalkPrediction::new(p, q, cfg.horizon)), p - q)
}
