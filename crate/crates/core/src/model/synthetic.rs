//! Seeded synthetic data in the style of the classic skyline benchmark generator.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Item};
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticMode {
    Independent,
    Correlated,
    AntiCorrelated,
}

impl FromStr for SyntheticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" | "indep" => Ok(Self::Independent),
            "correlated" | "corr" => Ok(Self::Correlated),
            "anti_correlated" | "anti-correlated" | "anti" => Ok(Self::AntiCorrelated),
            other => Err(Error::InvalidArgument(format!("unknown synthetic mode `{other}`"))),
        }
    }
}

fn random_peak(rng: &mut RngStream, lo: f64, hi: f64, dim: usize) -> f64 {
    let sum: f64 = (0..dim).map(|_| rng.uniform()).sum();
    lo + (hi - lo) * sum / dim as f64
}

fn random_normal(rng: &mut RngStream, med: f64, var: f64) -> f64 {
    random_peak(rng, med - var, med + var, 12)
}

fn in_unit_cube(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

fn correlated(rng: &mut RngStream, x: &mut [f64]) {
    let dim = x.len();
    loop {
        let v = random_peak(rng, 0.0, 1.0, dim);
        let l = v.min(1.0 - v);
        x.fill(v);
        for d in 0..dim {
            let h = random_normal(rng, 0.0, l);
            x[d] += h;
            x[(d + 1) % dim] -= h;
        }
        if in_unit_cube(x) {
            return;
        }
    }
}

fn anti_correlated(rng: &mut RngStream, x: &mut [f64]) {
    let dim = x.len();
    loop {
        let v = random_normal(rng, 0.5, 0.25);
        let l = v.min(1.0 - v);
        x.fill(v);
        for d in 0..dim {
            let h = rng.uniform_in(-l, l);
            x[d] += h;
            x[(d + 1) % dim] -= h;
        }
        if in_unit_cube(x) {
            return;
        }
    }
}

/// `n` items over `d` attributes in `[0, 1]`, ids `t1..tn` zero padded.
pub fn generate_synthetic<T: Scalar>(n: usize, d: usize, mode: SyntheticMode, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if d < 2 {
        return Err(Error::InvalidArgument("d must be at least 2".into()));
    }
    let mut rng = RngStream::new(seed);
    let width = n.to_string().len();
    let mut x = vec![0.0; d];
    let items = (0..n)
        .map(|i| {
            match mode {
                SyntheticMode::Independent => x.iter_mut().for_each(|v| *v = rng.uniform()),
                SyntheticMode::Correlated => correlated(&mut rng, &mut x),
                SyntheticMode::AntiCorrelated => anti_correlated(&mut rng, &mut x),
            }
            Item::new(format!("t{:0width$}", i + 1), x.iter().map(|&v| T::lit(v)).collect())
        })
        .collect();
    Dataset::from_items(items)
}
