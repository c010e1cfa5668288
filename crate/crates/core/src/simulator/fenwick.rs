//! Binary indexed tree over nonnegative edge rates.

#[derive(Debug, Clone)]
pub(crate) struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
    updates: u32,
}

/// Rebuild from `values` after this many point updates to shed rounding drift.
const REBUILD_EVERY: u32 = 1 << 16;

impl Fenwick {
    pub fn new(values: Vec<f64>) -> Self {
        let mut f = Self {
            tree: vec![0.0; values.len() + 1],
            values,
            updates: 0,
        };
        f.rebuild();
        f
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        self.tree.iter_mut().for_each(|t| *t = 0.0);
        for i in 0..n {
            let k = i + 1;
            self.tree[k] += self.values[i];
            let parent = k + (k & k.wrapping_neg());
            if parent <= n {
                let v = self.tree[k];
                self.tree[parent] += v;
            }
        }
        self.updates = 0;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let delta = v - self.values[i];
        if delta == 0.0 {
            return;
        }
        self.values[i] = v;
        self.updates += 1;
        if self.updates >= REBUILD_EVERY {
            self.rebuild();
            return;
        }
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        let mut k = self.values.len();
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k -= k & k.wrapping_neg();
        }
        s
    }

    /// Index `i` with `prefix(i) <= u < prefix(i + 1)`, skipping zero entries.
    pub fn find(&self, mut u: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        // rounding can land on a zero-rate entry or past the end
        let mut i = pos.min(n - 1);
        while self.values[i] == 0.0 && i > 0 {
            i -= 1;
        }
        if self.values[i] == 0.0 {
            i = self.values.iter().position(|&v| v > 0.0).unwrap_or(0);
        }
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_search() {
        let mut f = Fenwick::new(vec![1.0, 0.0, 2.0, 0.5, 0.0]);
        assert_eq!(f.total(), 3.5);
        assert_eq!(f.find(0.0), 0);
        assert_eq!(f.find(0.99), 0);
        assert_eq!(f.find(1.0), 2);
        assert_eq!(f.find(2.99), 2);
        assert_eq!(f.find(3.2), 3);
        assert_eq!(f.find(3.5), 3);
        f.set(1, 4.0);
        assert_eq!(f.total(), 7.5);
        assert_eq!(f.find(1.5), 1);
        assert_eq!(f.get(1), 4.0);
    }

    #[test]
    fn rebuild_keeps_sums() {
        let mut f = Fenwick::new(vec![0.1; 7]);
        for k in 0..(REBUILD_EVERY as usize + 10) {
            f.set(k % 7, 0.1 + (k % 3) as f64 * 0.01);
        }
        let direct: f64 = (0..7).map(|i| f.get(i)).sum();
        assert!((f.total() - direct).abs() < 1e-12);
    }
}
