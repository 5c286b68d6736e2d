//! Boolean matrices and transitive closure by repeated squaring.

use std::fmt;

/// Square boolean matrix with bit-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BoolMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BoolMatrix {
    pub fn zeros(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        BoolMatrix {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), rows.len(), "matrix must be square");
            for (c, &v) in row.iter().enumerate() {
                if v {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.words + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.bits[r * self.words + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words..(r + 1) * self.words]
    }

    /// Boolean product, i.e. `min(A·B, 1)`.
    pub fn mul(&self, other: &BoolMatrix) -> BoolMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BoolMatrix::zeros(self.n);
        for r in 0..self.n {
            let dst = r * out.words;
            for k in 0..self.n {
                if self.get(r, k) {
                    for (w, src) in other.row(k).iter().enumerate() {
                        out.bits[dst + w] |= src;
                    }
                }
            }
        }
        out
    }

    /// Boolean sum, i.e. `min(A + B, 1)`.
    pub fn or(&self, other: &BoolMatrix) -> BoolMatrix {
        assert_eq!(self.n, other.n);
        BoolMatrix {
            n: self.n,
            words: self.words,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

impl fmt::Debug for BoolMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            let line: String = (0..self.n).map(|c| if self.get(r, c) { '1' } else { '0' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Entry `(k, l)` of the result is set iff there is a directed path of length ≥ 1 from `k` to `l`.
///
/// Doubling scheme: with `B = N = M`, repeat `⌈log₂ n⌉` times `N = min(B·N + N, 1)`,
/// `B = min(B·B, 1)`. After `s` rounds `N` covers all path lengths `1..=2^s`.
pub fn reachability_closure(adj: &BoolMatrix) -> BoolMatrix {
    let n = adj.size();
    let rounds = if n <= 1 { 0 } else { usize::BITS - (n - 1).leading_zeros() };
    let mut b = adj.clone();
    let mut reach = adj.clone();
    for _ in 0..rounds {
        reach = b.mul(&reach).or(&reach);
        b = b.mul(&b);
    }
    reach
}
