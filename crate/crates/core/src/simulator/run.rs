//! One replica of the event-driven dynamics on `[-M, M]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::fenwick::Fenwick;
use super::SimConfig;
use crate::dynamics::{EdgeDynamics, Move, SiteState};
use crate::error::{Error, Result};

/// What is followed over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Track {
    /// Mean position of all tracked objects (with multiplicity).
    Center,
    Rightmost,
    Leftmost,
    Nothing,
}

pub(crate) struct ReplicaSpec<'a, D: EdgeDynamics> {
    pub dynamics: &'a D,
    /// Number of tracked objects at a site.
    pub count: &'a (dyn Fn(D::State) -> u32 + Sync),
    /// Site value reported in density profiles.
    pub value: &'a (dyn Fn(D::State) -> f64 + Sync),
    pub track: Track,
    /// Rate of the virtual clocks that move the boundary light cone inwards
    /// (the largest edge rate for bounded models).
    pub front_rate: Option<f64>,
    pub init: &'a (dyn Fn(&mut ChaCha8Rng) -> Result<Vec<D::State>> + Sync),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Status {
    Completed,
    Capped(i32),
    Absorbed,
}

#[derive(Debug, Clone)]
pub(crate) struct Raw {
    pub status: Status,
    pub flagged: bool,
    pub events: u64,
    /// Observable at each sample time.
    pub samples: Vec<f64>,
    /// Tracked sites, with multiplicity, at the horizon.
    pub final_sites: Vec<i32>,
    /// Profile values at `anchor + offset` at the horizon.
    pub profile: Vec<f64>,
}

/// Sum of the move rates, reusing `buf`.
fn edge_rate<D: EdgeDynamics>(d: &D, l: D::State, r: D::State, buf: &mut Vec<Move<D::State>>) -> f64 {
    buf.clear();
    d.edge_moves(l, r, buf);
    buf.iter().map(|m| m.rate).sum()
}

fn exp_time<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

struct Lattice<'a, D: EdgeDynamics> {
    spec: &'a ReplicaSpec<'a, D>,
    sites: Vec<D::State>,
    rates: Fenwick,
    half_width: i32,
}

impl<D: EdgeDynamics> Lattice<'_, D> {
    fn n_edges(&self) -> usize {
        self.sites.len() - 1
    }

    fn frozen(&self, e: usize) -> bool {
        e < 2 || e + 2 >= self.n_edges()
    }

    fn refresh(&mut self, e: usize, buf: &mut Vec<Move<D::State>>) {
        let r = if self.frozen(e) {
            0.0
        } else {
            edge_rate(self.spec.dynamics, self.sites[e], self.sites[e + 1], buf)
        };
        self.rates.set(e, r);
    }

    fn global(&self, k: usize) -> i32 {
        k as i32 - self.half_width
    }

    fn tracked(&self, k: usize) -> bool {
        (self.spec.count)(self.sites[k]) > 0
    }

    /// Leftmost tracked site at or after `from`.
    fn scan_right(&self, from: usize) -> Option<usize> {
        (from..self.sites.len()).find(|&k| self.tracked(k))
    }

    fn scan_left(&self, from: usize) -> Option<usize> {
        (0..=from.min(self.sites.len() - 1)).rev().find(|&k| self.tracked(k))
    }

    fn observe(&self, left: usize, right: usize) -> f64 {
        match self.spec.track {
            Track::Rightmost => self.global(right) as f64,
            Track::Leftmost => self.global(left) as f64,
            Track::Center => {
                let (mut s, mut n) = (0.0, 0.0);
                for k in left..=right {
                    let c = (self.spec.count)(self.sites[k]) as f64;
                    s += c * self.global(k) as f64;
                    n += c;
                }
                s / n
            }
            Track::Nothing => 0.0,
        }
    }
}

pub(crate) fn run_replica<D: EdgeDynamics>(
    spec: &ReplicaSpec<'_, D>,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Raw> {
    let sites = (spec.init)(rng)?;
    let len = (2 * cfg.half_width + 1) as usize;
    if sites.len() != len {
        return Err(Error::Domain(format!(
            "initial state has {} sites, expected {len}",
            sites.len()
        )));
    }
    let mut buf = Vec::with_capacity(8);
    let mut lat = Lattice {
        spec,
        sites,
        rates: Fenwick::new(vec![0.0; len - 1]),
        half_width: cfg.half_width,
    };
    for e in 0..lat.n_edges() {
        lat.refresh(e, &mut buf);
    }
    let initial_cap = lat.sites.iter().map(|s| s.magnitude()).find(|&m| m > cfg.value_cap);
    let tracking = spec.track != Track::Nothing;
    let mut left = lat.scan_right(0);
    let mut right = left.and_then(|_| lat.scan_left(len - 1));
    let times = cfg.sample_times();
    let mut samples = Vec::with_capacity(times.len());
    let mut next_sample = 0;

    // sites [0, lf] and [rf, len) may already feel the frozen edges
    let mut lf = 2usize;
    let mut rf = len - 3;
    let mut flagged = false;
    let (mut next_lf, mut next_rf) = match spec.front_rate {
        Some(r) if r > 0.0 => (exp_time(rng, r), exp_time(rng, r)),
        _ => (f64::INFINITY, f64::INFINITY),
    };

    let mut t = 0.0;
    let mut events = 0u64;
    let mut status = match initial_cap {
        Some(v) => Status::Capped(v),
        None => Status::Completed,
    };
    let near_front = |lf: usize, rf: usize, left: Option<usize>, right: Option<usize>| match (left, right) {
        (Some(l), Some(r)) => {
            let (lo, hi) = match spec.track {
                Track::Rightmost => (r, r),
                Track::Leftmost => (l, l),
                _ => (l, r),
            };
            lf + 2 >= lo || hi + 2 >= rf
        }
        _ => false,
    };
    while status == Status::Completed {
        if tracking && left.is_none() {
            status = Status::Absorbed;
            break;
        }
        let total = lat.rates.total();
        let dt = if total > 0.0 {
            exp_time(rng, total)
        } else {
            f64::INFINITY
        };
        let t_next = t + dt;
        while next_sample < times.len() && times[next_sample] < t_next {
            samples.push(match (left, right) {
                (Some(l), Some(r)) => lat.observe(l, r),
                _ => f64::NAN,
            });
            next_sample += 1;
        }
        while next_lf <= t_next.min(cfg.horizon) {
            lf += 1;
            next_lf += exp_time(rng, spec.front_rate.unwrap_or(1.0));
        }
        while next_rf <= t_next.min(cfg.horizon) {
            rf = rf.saturating_sub(1);
            next_rf += exp_time(rng, spec.front_rate.unwrap_or(1.0));
        }
        flagged |= tracking && near_front(lf, rf, left, right);
        if t_next > cfg.horizon {
            break;
        }
        t = t_next;

        let e = lat.rates.find(rng.gen::<f64>() * total);
        buf.clear();
        spec.dynamics.edge_moves(lat.sites[e], lat.sites[e + 1], &mut buf);
        let edge_total: f64 = buf.iter().map(|m| m.rate).sum();
        let mut u = rng.gen::<f64>() * edge_total;
        let mut chosen = buf[buf.len() - 1];
        for m in &buf {
            if u < m.rate {
                chosen = *m;
                break;
            }
            u -= m.rate;
        }
        lat.sites[e] = chosen.left;
        lat.sites[e + 1] = chosen.right;
        events += 1;
        for k in e.saturating_sub(1)..=(e + 1).min(lat.n_edges() - 1) {
            lat.refresh(k, &mut buf);
        }
        let m = chosen.left.magnitude().max(chosen.right.magnitude());
        if m > cfg.value_cap {
            status = Status::Capped(m);
            break;
        }
        if e == lf {
            lf += 1;
        }
        if e + 1 == rf {
            rf -= 1;
        }
        if tracking {
            left = left.and_then(|l| lat.scan_right(l.saturating_sub(1)));
            right = right.and_then(|r| lat.scan_left(r + 1));
            flagged |= near_front(lf, rf, left, right);
        }
    }
    while samples.len() < times.len() && status == Status::Completed {
        samples.push(match (left, right) {
            (Some(l), Some(r)) => lat.observe(l, r),
            _ => f64::NAN,
        });
    }

    let mut final_sites = Vec::new();
    if let (Some(l), Some(r)) = (left, right) {
        for k in l..=r {
            for _ in 0..(spec.count)(lat.sites[k]) {
                final_sites.push(lat.global(k));
            }
        }
    }
    let mut profile = Vec::new();
    if let Some(w) = cfg.profile_half_width {
        let anchor = match (spec.track, left, right) {
            (Track::Rightmost, _, Some(r)) => r as i32,
            (Track::Leftmost | Track::Center, Some(l), _) => l as i32,
            _ => cfg.half_width,
        };
        for off in -w..=w {
            let k = anchor + off;
            profile.push(if k >= 0 && (k as usize) < len {
                (spec.value)(lat.sites[k as usize])
            } else {
                f64::NAN
            });
        }
    }
    Ok(Raw {
        status,
        flagged,
        events,
        samples,
        final_sites,
        profile,
    })
}
