//! Count vectors: multisets of chain-vertex indices.
//!
//! A jump sequence `J ∈ {0,…,m}^h` enters the upper price only through how
//! often each vertex occurs, so the `(m+1)^h` sequences collapse to the
//! `C(h+m, m)` weak compositions of `h` into `m+1` parts.

use alloc::vec;
use alloc::vec::Vec;

/// A weak composition `(n_0,…,n_m)` of `total` with its multinomial weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CountVector {
    pub counts: Vec<usize>,
    pub total: usize,
    /// Number of sequences with exactly these occurrence counts.
    pub weight: f64,
    /// `tail[i-1] = Σ_{j≥i} n_j` for `i = 1..m`: how many steps asset `i`
    /// (sorted order) jumps up.
    pub tail: Vec<usize>,
}

impl CountVector {
    fn from_counts(counts: &[usize], total: usize) -> Self {
        let m = counts.len() - 1;
        let mut tail = vec![0; m];
        let mut acc = 0;
        for i in (1..=m).rev() {
            acc += counts[i];
            tail[i - 1] = acc;
        }
        Self {
            counts: counts.to_vec(),
            total,
            weight: multinomial(counts),
            tail,
        }
    }
}

/// `C(n, k)` as a float; exact while the result fits in 53 bits.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 1..=k {
        acc = acc * (n - k + i) as f64 / i as f64;
    }
    acc
}

/// `(Σ n_j)! / Π n_j!` as a product of binomials.
pub fn multinomial(counts: &[usize]) -> f64 {
    let mut running = 0;
    let mut acc = 1.0;
    for &c in counts {
        running += c;
        acc *= binomial(running, c);
    }
    acc
}

/// Iterator over all weak compositions of `steps` into `m + 1` parts in
/// reverse-lexicographic order, starting at `(steps, 0, …, 0)`.
#[derive(Debug, Clone)]
pub struct CountVectors {
    counts: Vec<usize>,
    total: usize,
    done: bool,
}

/// All count vectors for `steps` remaining steps and `m` risky assets.
pub fn enumerate_count_vectors(steps: usize, m: usize) -> CountVectors {
    let mut counts = vec![0; m + 1];
    counts[0] = steps;
    CountVectors {
        counts,
        total: steps,
        done: false,
    }
}

impl CountVectors {
    /// `C(steps + m, m)`.
    pub fn len_exact(&self) -> f64 {
        let m = self.counts.len() - 1;
        binomial(self.total + m, m)
    }

    fn step(&mut self) {
        let m = self.counts.len() - 1;
        let Some(i) = (0..m).rev().find(|&i| self.counts[i] > 0) else {
            self.done = true;
            return;
        };
        let rest: usize = self.counts[i + 1..].iter().sum();
        self.counts[i] -= 1;
        self.counts[i + 1] = rest + 1;
        for c in &mut self.counts[i + 2..] {
            *c = 0;
        }
    }
}

impl Iterator for CountVectors {
    type Item = CountVector;

    fn next(&mut self) -> Option<CountVector> {
        if self.done {
            return None;
        }
        let item = CountVector::from_counts(&self.counts, self.total);
        self.step();
        Some(item)
    }
}
