//! Fixed-shape pairwise summation.
//!
//! The tree depends only on the input length, so serial and parallel
//! evaluation give bit-identical results.

const LEAF: usize = 128;
const PAR_MIN: usize = 1 << 15;

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = split(values.len());
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Same tree as [`pairwise_sum`], upper levels evaluated with rayon.
pub fn par_pairwise_sum(values: &[f64]) -> f64 {
    if values.len() < PAR_MIN {
        return pairwise_sum(values);
    }
    let mid = split(values.len());
    let (a, b) = rayon::join(|| par_pairwise_sum(&values[..mid]), || par_pairwise_sum(&values[mid..]));
    a + b
}

fn split(n: usize) -> usize {
    // left half rounded up to a multiple of LEAF keeps leaves full
    (n / 2).div_ceil(LEAF) * LEAF
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
