//! Uniform sampling of scoring functions over the positive quadrant, over
//! spherical caps, and over general regions of interest.

use crate::error::{Error, Result};
use crate::geometry::{bounding_cap, polar_angles, quadrant_cap, rotate_in_place, to_polar};
use crate::model::{AngleVector, RegionOfInterest, RoiKind, WeightVector};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Default number of partitions of a cap CDF table.
pub const DEFAULT_GAMMA: usize = 10_000;

/// Default cap on draws per accepted sample.
pub const DEFAULT_MAX_TRIALS: u64 = 1_000_000;

/// Uniform direction on the positive quadrant of the unit sphere.
pub fn sample_u<T: Scalar>(d: usize, rng: &mut RngStream) -> WeightVector<T> {
    let mut w = vec![T::zero(); d];
    fill_u(&mut w, rng);
    WeightVector::from_unchecked(w)
}

pub(crate) fn fill_u<T: Scalar>(w: &mut [T], rng: &mut RngStream) {
    loop {
        let mut n2 = 0.0;
        for v in w.iter_mut() {
            let x = rng.normal().abs();
            n2 += x * x;
            *v = T::lit(x);
        }
        if n2 > 0.0 {
            let n = T::lit(n2.sqrt());
            w.iter_mut().for_each(|v| *v = *v / n);
            return;
        }
    }
}

/// Discretized CDF of the polar angle of a uniform point on a `d`-spherical cap.
#[derive(Clone, Debug)]
pub struct CapCdfTable {
    d: usize,
    theta: f64,
    eps: f64,
    /// `l[i]` is the normalized integral of `sin^(d-2)` over `[0, i * eps]`.
    l: Vec<f64>,
    integral: f64,
}

impl CapCdfTable {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn gamma(&self) -> usize {
        self.l.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.l
    }

    /// Riemann estimate of the unnormalized integral of `sin^(d-2)` over `[0, theta]`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Polar angle for the CDF value `y`, spread uniformly inside its cell by `v`.
    pub fn invert(&self, y: f64, v: f64) -> f64 {
        let i = self.l[1..].partition_point(|&li| li < y) + 1;
        let i = i.min(self.gamma());
        ((i - 1) as f64 + v) * self.eps
    }
}

/// Right-endpoint Riemann sums of `sin^(d-2)` over `gamma` partitions of `[0, theta]`.
pub fn build_cap_cdf(d: usize, theta: f64, gamma: usize) -> Result<CapCdfTable> {
    if d < 2 {
        return Err(Error::InvalidArgument("d must be at least 2".into()));
    }
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::InvalidArgument(format!("cap angle must be in (0, pi/2], got {theta}")));
    }
    if gamma == 0 {
        return Err(Error::InvalidArgument("gamma must be at least 1".into()));
    }
    let eps = theta / gamma as f64;
    let p = (d - 2) as i32;
    let mut l = Vec::with_capacity(gamma + 1);
    l.push(0.0);
    let mut acc = 0.0;
    for i in 1..=gamma {
        acc += (i as f64 * eps).sin().powi(p);
        l.push(acc);
    }
    for v in l.iter_mut() {
        *v /= acc;
    }
    l[gamma] = 1.0;
    Ok(CapCdfTable { d, theta, eps, l, integral: acc * eps })
}

/// Closed-form inverse CDF of the polar angle on a 3-spherical cap.
pub fn inverse_cdf_3d(y: f64, theta: f64) -> f64 {
    (1.0 - (1.0 - theta.cos()) * y).acos()
}

/// Closed-form CDF on a 3-spherical cap.
pub fn cdf_3d(x: f64, theta: f64) -> f64 {
    (1.0 - x.cos()) / (1.0 - theta.cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapMethod {
    InverseCdf,
    Rejection,
}

/// Pick between inverse-CDF cap sampling and rejection from the whole quadrant.
///
/// Rejection wins when `ln(gamma)` exceeds the reciprocal of the integral of
/// `sin^(d-2)` over the cap; the closed form for `d <= 3` is always preferred.
pub fn choose_method(d: usize, theta: f64, gamma: usize) -> Result<CapMethod> {
    if d <= 3 {
        return Ok(CapMethod::InverseCdf);
    }
    Ok(choose_with_table(&build_cap_cdf(d, theta, gamma)?))
}

fn choose_with_table(table: &CapCdfTable) -> CapMethod {
    if table.d <= 3 {
        return CapMethod::InverseCdf;
    }
    if (table.gamma() as f64).ln() > 1.0 / table.integral() {
        CapMethod::Rejection
    } else {
        CapMethod::InverseCdf
    }
}

/// Polar angles of the pre-rotation cap point: the angles of the direction
/// `u` on the `(d-1)`-sphere followed by the polar angle `x` from the last axis.
pub fn cap_polar_angles(u: &[f64], x: f64) -> Vec<f64> {
    let mut out = if u.len() >= 2 { polar_angles(u) } else { Vec::new() };
    out.push(x);
    out
}

/// Unit point at polar angle `x` from the last axis, in direction `u`.
pub fn cap_point(u: &[f64], x: f64) -> Vec<f64> {
    let (s, c) = x.sin_cos();
    let mut p: Vec<f64> = u.iter().map(|v| v * s).collect();
    p.push(c);
    p
}

/// Polar angle from the cap axis for the CDF draw `y` and in-cell jitter `v`.
fn cap_draw(d: usize, theta: f64, table: Option<&CapCdfTable>, y: f64, v: f64) -> Result<f64> {
    Ok(match (d, table) {
        (2, _) => y * theta,
        (_, Some(t)) => t.invert(y, v),
        (3, None) => inverse_cdf_3d(y, theta),
        _ => return Err(Error::InvalidArgument(format!("cap sampling in {d} dimensions needs a CDF table"))),
    })
}

/// Uniform sample from the part of a cap lying in the positive quadrant.
pub fn sample_cap<T: Scalar>(
    rho: &AngleVector<T>,
    theta: T,
    rng: &mut RngStream,
    table: Option<&CapCdfTable>,
) -> Result<WeightVector<T>> {
    let rho: Vec<f64> = rho.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
    let mut w = vec![T::zero(); rho.len() + 1];
    let trials = sample_cap_into(&mut w, &rho, theta.to_f64_lossy(), rng, table, DEFAULT_MAX_TRIALS)?;
    debug_assert!(trials >= 1);
    Ok(WeightVector::from_unchecked(w))
}

/// Draw one cap sample into `out`; returns the number of draws used.
fn sample_cap_into<T: Scalar>(
    out: &mut [T],
    rho: &[f64],
    theta: f64,
    rng: &mut RngStream,
    table: Option<&CapCdfTable>,
    max_trials: u64,
) -> Result<u64> {
    let d = rho.len() + 1;
    let mut u = vec![0.0; d - 1];
    for trial in 1..=max_trials {
        let y = rng.uniform();
        let v = if table.is_some() { rng.uniform() } else { 0.0 };
        let n2 = loop {
            let mut n2 = 0.0;
            for c in u.iter_mut() {
                *c = rng.normal();
                n2 += *c * *c;
            }
            if n2 > 0.0 {
                break n2;
            }
        };
        let n = n2.sqrt();
        u.iter_mut().for_each(|c| *c /= n);
        let x = cap_draw(d, theta, table, y, v)?;
        // In 2D the sign of the single deviate picks the side of the ray.
        let x = if d == 2 { x * u[0].signum() } else { x };
        let mut p = if d == 2 { vec![x.sin(), x.cos()] } else { cap_point(&u, x) };
        rotate_in_place(&mut p, rho);
        if p.iter().all(|&c| c >= 0.0) {
            for (o, c) in out.iter_mut().zip(&p) {
                *o = T::lit(*c);
            }
            return Ok(trial);
        }
    }
    Err(Error::SamplerExhausted { trials: max_trials })
}

/// Uniform sample from `roi` by drawing from the quadrant and rejecting.
pub fn sample_rejection<T: Scalar>(roi: &RegionOfInterest<T>, rng: &mut RngStream) -> Result<WeightVector<T>> {
    sample_rejection_counted(roi, rng, DEFAULT_MAX_TRIALS).map(|(w, _)| w)
}

/// Like [`sample_rejection`] but also reports how many draws were needed.
pub fn sample_rejection_counted<T: Scalar>(
    roi: &RegionOfInterest<T>,
    rng: &mut RngStream,
    max_trials: u64,
) -> Result<(WeightVector<T>, u64)> {
    let mut w = vec![T::zero(); roi.dim()];
    for trial in 1..=max_trials {
        fill_u(&mut w, rng);
        if roi.contains(&w) {
            return Ok((WeightVector::from_unchecked(w), trial));
        }
    }
    Err(Error::SamplerExhausted { trials: max_trials })
}

#[derive(Clone, Debug)]
enum Strategy {
    Quadrant,
    Reject,
    Cap {
        rho: Vec<f64>,
        theta: f64,
        table: Option<CapCdfTable>,
        /// Also test region membership, for caps that bound a constraint region.
        filter: bool,
    },
}

/// Uniform sampler over a region of interest, choosing the cheapest method.
#[derive(Clone, Debug)]
pub struct RoiSampler<T> {
    roi: RegionOfInterest<T>,
    strategy: Strategy,
    max_trials: u64,
}

impl<T: Scalar> RoiSampler<T> {
    pub fn new(roi: RegionOfInterest<T>) -> Result<Self> {
        Self::with_gamma(roi, DEFAULT_GAMMA)
    }

    pub fn with_gamma(roi: RegionOfInterest<T>, gamma: usize) -> Result<Self> {
        let d = roi.dim();
        let strategy = match roi.kind() {
            RoiKind::Full => Strategy::Quadrant,
            RoiKind::Cone(cone) => {
                let theta = cone.angle.to_f64_lossy();
                let table = if d > 3 { Some(build_cap_cdf(d, theta, gamma)?) } else { None };
                match table.as_ref().map(choose_with_table) {
                    Some(CapMethod::Rejection) => Strategy::Reject,
                    _ => Strategy::Cap {
                        rho: to_polar(cone.ray.as_slice())?.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
                        theta,
                        table,
                        filter: false,
                    },
                }
            }
            RoiKind::Constraints(_) => {
                let cap = bounding_cap(&roi)?;
                let quadrant = quadrant_cap::<T>(d);
                if cap.angle >= quadrant.angle - T::lit(1e-6) {
                    Strategy::Reject
                } else {
                    let theta = cap.angle.to_f64_lossy();
                    Strategy::Cap {
                        rho: to_polar(cap.ray.as_slice())?.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
                        theta,
                        table: if d > 3 { Some(build_cap_cdf(d, theta, gamma)?) } else { None },
                        filter: true,
                    }
                }
            }
        };
        Ok(Self { roi, strategy, max_trials: DEFAULT_MAX_TRIALS })
    }

    pub fn with_max_trials(mut self, max_trials: u64) -> Self {
        self.max_trials = max_trials.max(1);
        self
    }

    pub fn roi(&self) -> &RegionOfInterest<T> {
        &self.roi
    }

    pub fn dim(&self) -> usize {
        self.roi.dim()
    }

    /// Whether the sampler draws from a cap via the inverse CDF.
    pub fn method(&self) -> CapMethod {
        match self.strategy {
            Strategy::Cap { .. } => CapMethod::InverseCdf,
            _ => CapMethod::Rejection,
        }
    }

    /// Draw a unit vector into `out`.
    pub fn sample_into(&self, out: &mut [T], rng: &mut RngStream) -> Result<()> {
        match &self.strategy {
            Strategy::Quadrant => {
                fill_u(out, rng);
                Ok(())
            }
            Strategy::Reject => {
                for _ in 0..self.max_trials {
                    fill_u(out, rng);
                    if self.roi.contains(out) {
                        return Ok(());
                    }
                }
                Err(Error::SamplerExhausted { trials: self.max_trials })
            }
            Strategy::Cap { rho, theta, table, filter } => {
                let mut used = 0;
                while used < self.max_trials {
                    used += sample_cap_into(out, rho, *theta, rng, table.as_ref(), self.max_trials - used)?;
                    if !*filter || self.roi.contains(out) {
                        return Ok(());
                    }
                }
                Err(Error::SamplerExhausted { trials: self.max_trials })
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<WeightVector<T>> {
        let mut w = vec![T::zero(); self.dim()];
        self.sample_into(&mut w, rng)?;
        Ok(WeightVector::from_unchecked(w))
    }
}
