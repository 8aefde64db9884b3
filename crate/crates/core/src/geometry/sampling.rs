//! Deterministic low-discrepancy sampling (scrambled-free Halton sequence).

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points in `[0, 1)^dim`, skipping the origin.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
        Halton { dim, index: 1 }
    }

    /// Maps the next point into the box `[lo, hi]`.
    pub fn next_in(&mut self, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        let p = self.next().expect("infinite sequence");
        p.iter().enumerate().map(|(k, u)| lo[k] + (hi[k] - lo[k]) * u).collect()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some((0..self.dim).map(|k| radical_inverse(i, PRIMES[k])).collect())
    }
}
