//! Edge-local transition rules shared by the exact engine and the simulator.
//!
//! All dynamics here are nearest-neighbour: a transition changes the states
//! of an edge `(i, i+1)` only, at a rate depending only on those two states.

use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::models::{BcrwEvent, BcrwRates, RateFunctions};

/// Per-site state of some dynamics.
pub trait SiteState: Copy + Eq + Ord + Hash + Debug + Send + Sync {
    /// Height of the (lower) configuration, used to centre enumeration bands.
    fn level(&self) -> i32;

    /// Largest absolute value carried, compared against value caps.
    fn magnitude(&self) -> i32 {
        self.level().abs()
    }
}

impl SiteState for i32 {
    fn level(&self) -> i32 {
        *self
    }
}

impl SiteState for u8 {
    fn level(&self) -> i32 {
        *self as i32
    }
}

/// A site of a coupled pair `(omega, zeta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub omega: i32,
    pub zeta: i32,
}

impl Pair {
    pub const fn new(omega: i32, zeta: i32) -> Self {
        Self { omega, zeta }
    }

    pub const fn diagonal(v: i32) -> Self {
        Self { omega: v, zeta: v }
    }

    /// Number of second class particles at this site.
    pub const fn discrepancy(&self) -> i32 {
        self.zeta - self.omega
    }
}

impl SiteState for Pair {
    fn level(&self) -> i32 {
        self.omega
    }

    fn magnitude(&self) -> i32 {
        self.omega.abs().max(self.zeta.abs())
    }
}

/// New states of the edge after a transition, and its rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move<S> {
    pub rate: f64,
    pub left: S,
    pub right: S,
}

pub trait EdgeDynamics: Sync {
    type State: SiteState;

    /// Appends every transition of edge `(l, r)` with positive rate.
    fn edge_moves(&self, l: Self::State, r: Self::State, out: &mut Vec<Move<Self::State>>);

    fn total_rate(&self, l: Self::State, r: Self::State) -> f64 {
        let mut v = Vec::with_capacity(6);
        self.edge_moves(l, r, &mut v);
        v.iter().map(|m| m.rate).sum()
    }
}

/// One copy of a conserving model.
#[derive(Debug, Clone, Copy)]
pub struct Single<R>(pub R);

impl<R: RateFunctions> EdgeDynamics for Single<R> {
    type State = i32;

    fn edge_moves(&self, y: i32, z: i32, out: &mut Vec<Move<i32>>) {
        let p = self.0.p(y, z);
        if p > 0.0 {
            out.push(Move {
                rate: p,
                left: y - 1,
                right: z + 1,
            });
        }
        let q = self.0.q(y, z);
        if q > 0.0 {
            out.push(Move {
                rate: q,
                left: y + 1,
                right: z - 1,
            });
        }
    }
}

/// Basic coupling of two ordered copies `omega <= zeta`.
#[derive(Debug, Clone, Copy)]
pub struct Coupled<R>(pub R);

/// Labels of [`coupled_rate_terms`], in order.
pub const COUPLED_TERMS: [&str; 6] = [
    "joint right",
    "omega right",
    "zeta right",
    "joint left",
    "zeta left",
    "omega left",
];

/// The six rates of the basic coupling on an edge, before dropping zeros.
///
/// Attractivity makes the four difference terms nonnegative; they are
/// returned raw so that this can be checked.
pub fn coupled_rate_terms<R: RateFunctions + ?Sized>(rates: &R, l: Pair, r: Pair) -> [f64; 6] {
    let joint_p = rates.p(l.omega, r.zeta);
    let joint_q = rates.q(l.zeta, r.omega);
    [
        joint_p,
        rates.p(l.omega, r.omega) - joint_p,
        rates.p(l.zeta, r.zeta) - joint_p,
        joint_q,
        rates.q(l.zeta, r.zeta) - joint_q,
        rates.q(l.omega, r.omega) - joint_q,
    ]
}

impl<R: RateFunctions> EdgeDynamics for Coupled<R> {
    type State = Pair;

    fn edge_moves(&self, l: Pair, r: Pair, out: &mut Vec<Move<Pair>>) {
        let t = coupled_rate_terms(&self.0, l, r);
        let targets = [
            (Pair::new(l.omega - 1, l.zeta - 1), Pair::new(r.omega + 1, r.zeta + 1)),
            (Pair::new(l.omega - 1, l.zeta), Pair::new(r.omega + 1, r.zeta)),
            (Pair::new(l.omega, l.zeta - 1), Pair::new(r.omega, r.zeta + 1)),
            (Pair::new(l.omega + 1, l.zeta + 1), Pair::new(r.omega - 1, r.zeta - 1)),
            (Pair::new(l.omega, l.zeta + 1), Pair::new(r.omega, r.zeta - 1)),
            (Pair::new(l.omega + 1, l.zeta), Pair::new(r.omega - 1, r.zeta)),
        ];
        for (rate, (left, right)) in t.into_iter().zip(targets) {
            if rate > 0.0 {
                out.push(Move { rate, left, right });
            }
        }
    }
}

/// Branching coalescing random walk on occupancies `0/1`.
#[derive(Debug, Clone, Copy)]
pub struct Bcrw(pub BcrwRates);

impl EdgeDynamics for Bcrw {
    type State = u8;

    fn edge_moves(&self, l: u8, r: u8, out: &mut Vec<Move<u8>>) {
        let Ok(table) = crate::models::bcrw_event_rates(&self.0, l, r) else {
            return;
        };
        for (event, rate) in table {
            if rate > 0.0 {
                let (left, right) = BcrwEvent::apply(event, l, r);
                out.push(Move { rate, left, right });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Model;

    #[test]
    fn single_asep_moves() {
        let d = Single(Model::asep(0.7, 0.3).unwrap().growth().unwrap());
        let mut v = Vec::new();
        d.edge_moves(1, 0, &mut v);
        assert_eq!(
            v,
            vec![Move {
                rate: 0.7,
                left: 0,
                right: 1
            }]
        );
        v.clear();
        d.edge_moves(1, 1, &mut v);
        assert!(v.is_empty());
    }

    #[test]
    fn coupled_diagonal_is_single() {
        let g = Model::blp(1.0).unwrap().growth().unwrap();
        let c = Coupled(g);
        let s = Single(g);
        for y in -3..=3 {
            for z in -3..=3 {
                let mut a = Vec::new();
                c.edge_moves(Pair::diagonal(y), Pair::diagonal(z), &mut a);
                let mut b = Vec::new();
                s.edge_moves(y, z, &mut b);
                assert_eq!(a.len(), b.len());
                for (m, n) in a.iter().zip(&b) {
                    assert_eq!(m.rate, n.rate);
                    assert_eq!(m.left, Pair::diagonal(n.left));
                    assert_eq!(m.right, Pair::diagonal(n.right));
                }
            }
        }
    }

    #[test]
    fn coupled_asep_second_class_hops() {
        let c = Coupled(Model::asep(0.7, 0.3).unwrap().growth().unwrap());
        let mut v = Vec::new();
        // second class particle at i, hole at i+1: only zeta moves right
        c.edge_moves(Pair::new(0, 1), Pair::new(0, 0), &mut v);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rate, 0.7);
        assert_eq!((v[0].left, v[0].right), (Pair::new(0, 0), Pair::new(0, 1)));
        v.clear();
        // first class particle at i, second class at i+1: only the omega-only right move exchanges them
        c.edge_moves(Pair::new(1, 1), Pair::new(0, 1), &mut v);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rate, 0.7);
        assert_eq!((v[0].left, v[0].right), (Pair::new(0, 1), Pair::new(1, 1)));
    }

    #[test]
    fn bcrw_moves() {
        let r = BcrwRates::new(1.0, 0.5, 1.0, 2.0, 3.0, 4.0).unwrap();
        let d = Bcrw(r);
        assert_eq!(d.total_rate(0, 0), 0.0);
        assert_eq!(d.total_rate(1, 0), 3.0);
        assert_eq!(d.total_rate(0, 1), 1.5);
        assert_eq!(d.total_rate(1, 1), 7.0);
    }
}
