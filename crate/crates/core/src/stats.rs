//! Bernoulli estimates with Wilson score intervals and compensated sums.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Wilson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub samples: u64,
    pub successes: u64,
    pub method: CiMethod,
}

impl EstimateWithCI {
    /// Wilson 95% interval for `successes` out of `samples`; `None` when
    /// there are no samples (the estimate is undefined).
    pub fn wilson(successes: u64, samples: u64) -> Option<Self> {
        if samples == 0 {
            return None;
        }
        let nf = samples as f64;
        let p = successes as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Some(EstimateWithCI {
            point: p,
            lo: (center - half).max(0.0).min(p),
            hi: (center + half).min(1.0).max(p),
            samples,
            successes,
            method: CiMethod::Wilson,
        })
    }

    /// Plug-in standard error `sqrt(p(1-p)/N)`.
    pub fn std_err(&self) -> f64 {
        (self.point * (1.0 - self.point) / self.samples as f64).sqrt()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlaps(&self, other: &EstimateWithCI) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = KahanSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}
