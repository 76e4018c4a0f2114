//! Dual-space constructions: dominance, ordering exchanges, polar coordinates,
//! rotations and region-of-interest bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AngleVector, Dataset, RegionOfInterest, RoiKind, WeightVector};
use crate::scalar::{angle_between, dot, norm, Scalar};

/// `t` dominates `u` when it is at least as good everywhere and better somewhere.
pub fn dominates<T: Scalar>(t: &[T], u: &[T]) -> bool {
    debug_assert_eq!(t.len(), u.len());
    let mut strict = false;
    for (&a, &b) in t.iter().zip(u) {
        if a < b {
            return false;
        }
        strict |= a > b;
    }
    strict
}

/// Angle in `(0, pi/2)` at which two 2D items score equally, if any.
pub fn exchange_angle_2d<T: Scalar>(t: &[T], u: &[T]) -> Option<T> {
    debug_assert_eq!(t.len(), 2);
    if dominates(t, u) || dominates(u, t) || t == u {
        return None;
    }
    Some(((u[0] - t[0]) / (t[1] - u[1])).atan())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Pos,
    #[serde(rename = "-")]
    Neg,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Sign::Pos => v,
            Sign::Neg => -v,
        }
    }
}

/// The set `coeffs · x = 0` where items `pair.0` and `pair.1` score equally.
///
/// `pair` holds dataset indices ordered so that the first id sorts first;
/// `coeffs` is the first item minus the second.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane<T> {
    pub coeffs: Vec<T>,
    pub pair: (usize, usize),
}

impl<T: Scalar> Hyperplane<T> {
    #[inline]
    pub fn eval(&self, w: &[T]) -> T {
        dot(&self.coeffs, w)
    }

    pub fn pair_ids<'a>(&self, dataset: &'a Dataset<T>) -> (&'a str, &'a str) {
        (dataset.id(self.pair.0), dataset.id(self.pair.1))
    }
}

/// Ordering-exchange hyperplane of items `i` and `j`, or `None` when one
/// dominates the other or they are equal.
pub fn exchange_hyperplane<T: Scalar>(dataset: &Dataset<T>, i: usize, j: usize) -> Option<Hyperplane<T>> {
    let (i, j) = if dataset.id_rank(i) <= dataset.id_rank(j) { (i, j) } else { (j, i) };
    let (a, b) = (dataset.attrs(i), dataset.attrs(j));
    if a == b || dominates(a, b) || dominates(b, a) {
        return None;
    }
    Some(Hyperplane { coeffs: a.iter().zip(b).map(|(&x, &y)| x - y).collect(), pair: (i, j) })
}

/// One side of a hyperplane. With `Pos`, `pair.0` outranks `pair.1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace<T> {
    pub plane: Hyperplane<T>,
    pub sign: Sign,
}

impl<T: Scalar> HalfSpace<T> {
    pub fn contains(&self, w: &[T]) -> bool {
        self.sign.apply(self.plane.eval(w)) > T::zero()
    }

    /// Ids as `(winner, loser)` inside this half-space.
    pub fn winner_loser<'a>(&self, dataset: &'a Dataset<T>) -> (&'a str, &'a str) {
        let (a, b) = self.plane.pair_ids(dataset);
        match self.sign {
            Sign::Pos => (a, b),
            Sign::Neg => (b, a),
        }
    }

    /// Coefficients `g` with the half-space reading `g · w > 0`.
    pub fn normal(&self) -> Vec<T> {
        self.plane.coeffs.iter().map(|&c| self.sign.apply(c)).collect()
    }
}

/// Closed angle range `[lo, hi]` inside `[0, pi/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> AngleInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        let slack = T::geom_eps();
        if !(lo.is_finite() && hi.is_finite()) || lo < -slack || hi > T::FRAC_PI_2() + slack || lo > hi {
            return Err(Error::InvalidArgument(format!("angle interval [{lo}, {hi}] is not inside [0, pi/2]")));
        }
        Ok(Self { lo: lo.max(T::zero()), hi: hi.min(T::FRAC_PI_2()) })
    }

    pub fn quadrant() -> Self {
        Self { lo: T::zero(), hi: T::FRAC_PI_2() }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn mid(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }

    /// Half-open membership: lower bound closed, upper bound open.
    pub fn contains(&self, angle: T) -> bool {
        angle >= self.lo && angle < self.hi
    }
}

/// Weight vectors within `angle` of `ray`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone<T> {
    pub ray: WeightVector<T>,
    pub angle: T,
}

impl<T: Scalar> Cone<T> {
    pub fn contains(&self, w: &[T]) -> bool {
        angle_between(self.ray.as_slice(), w) <= self.angle
    }
}

/// Polar angles of a non-negative nonzero vector.
///
/// `theta_i = atan2(x_{i+1}, |(x_1..x_i)|)`, so in 2D the single angle is
/// measured from the first axis.
pub fn to_polar<T: Scalar>(w: &[T]) -> Result<AngleVector<T>> {
    if w.len() < 2 {
        return Err(Error::InvalidArgument("need at least two components".into()));
    }
    if w.iter().any(|v| *v < T::zero()) || w.iter().all(|v| v.is_zero()) {
        return Err(Error::InvalidArgument("polar angles need a non-negative nonzero vector".into()));
    }
    AngleVector::new(polar_angles(w))
}

/// Polar angles without range checks; the first angle covers the full circle.
pub(crate) fn polar_angles<T: Scalar>(w: &[T]) -> Vec<T> {
    let mut acc = w[0] * w[0];
    let mut out = Vec::with_capacity(w.len() - 1);
    for (i, &x) in w[1..].iter().enumerate() {
        out.push(if i == 0 { x.atan2(w[0]) } else { x.atan2(acc.sqrt()) });
        acc = acc + x * x;
    }
    out
}

/// Point at radius `r` with the given polar angles.
pub fn to_cartesian<T: Scalar>(r: T, angles: &[T]) -> Vec<T> {
    let d = angles.len() + 1;
    let mut x = vec![T::zero(); d];
    let mut c = r;
    for i in (0..d - 1).rev() {
        x[i + 1] = c * angles[i].sin();
        c = c * angles[i].cos();
    }
    x[0] = c;
    x
}

/// Apply the counterclockwise rotation by `angle` in the `x_1`-`x_{i+1}` plane.
#[inline]
fn givens<T: Scalar>(w: &mut [T], i: usize, angle: T) {
    let (s, c) = angle.sin_cos();
    let (a, b) = (w[0], w[i]);
    w[0] = c * a - s * b;
    w[i] = s * a + c * b;
}

/// Dense `d x d` matrix of the elementary rotation in the `x_1`-`x_{i+1}` plane.
pub fn rotation_factor<T: Scalar>(d: usize, i: usize, angle: T) -> Vec<Vec<T>> {
    assert!(i >= 1 && i < d);
    let mut m = identity(d);
    let (s, c) = angle.sin_cos();
    m[0][0] = c;
    m[0][i] = -s;
    m[i][0] = s;
    m[i][i] = c;
    m
}

fn identity<T: Scalar>(d: usize) -> Vec<Vec<T>> {
    (0..d).map(|r| (0..d).map(|c| if r == c { T::one() } else { T::zero() }).collect()).collect()
}

fn matmul<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let d = a.len();
    (0..d).map(|r| (0..d).map(|c| (0..d).map(|k| a[r][k] * b[k][c]).sum()).collect()).collect()
}

fn factor_angles<T: Scalar>(rho: &[T]) -> impl Iterator<Item = (usize, T)> + '_ {
    let last = rho.len();
    rho.iter().enumerate().map(move |(k, &r)| {
        let i = k + 1;
        (i, if i == last { r - T::FRAC_PI_2() } else { r })
    })
}

/// The product `M_1(rho_1) ... M_{d-2}(rho_{d-2}) M_{d-1}(rho_{d-1} - pi/2)`,
/// which maps the last axis onto the ray with polar angles `rho`.
pub fn rotation_matrix<T: Scalar>(rho: &[T]) -> Vec<Vec<T>> {
    let d = rho.len() + 1;
    factor_angles(rho).fold(identity(d), |acc, (i, a)| matmul(&acc, &rotation_factor(d, i, a)))
}

/// Rotate `w` so that the last axis lands on the ray with polar angles `rho`.
pub fn rotate<T: Scalar>(w: &[T], rho: &AngleVector<T>) -> Result<Vec<T>> {
    if w.len() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: w.len() });
    }
    let mut out = w.to_vec();
    rotate_in_place(&mut out, rho.as_slice());
    Ok(out)
}

pub(crate) fn rotate_in_place<T: Scalar>(w: &mut [T], rho: &[T]) {
    let factors: Vec<(usize, T)> = factor_angles(rho).collect();
    for &(i, a) in factors.iter().rev() {
        givens(w, i, a);
    }
}

/// Angle range of a 2D region of interest.
pub fn roi_to_angle_interval_2d<T: Scalar>(roi: &RegionOfInterest<T>) -> Result<AngleInterval<T>> {
    if roi.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: roi.dim() });
    }
    let (zero, half_pi) = (T::zero(), T::FRAC_PI_2());
    let (lo, hi) = match roi.kind() {
        RoiKind::Full => (zero, half_pi),
        RoiKind::Cone(cone) => {
            let w = cone.ray.as_slice();
            let center = w[1].atan2(w[0]);
            ((center - cone.angle).max(zero), (center + cone.angle).min(half_pi))
        }
        RoiKind::Constraints(cs) => {
            let mut lo = zero;
            let mut hi = half_pi;
            for c in cs {
                let g = c.as_geq();
                let (c1, c2) = (g[0], g[1]);
                if c1 >= zero && c2 >= zero {
                    continue;
                }
                if c1 < zero && c2 < zero {
                    return Err(Error::EmptyRegion(format!("constraint {c} excludes the quadrant")));
                }
                if c1 >= zero {
                    hi = hi.min(c1.atan2(-c2));
                } else {
                    lo = lo.max((-c1).atan2(c2));
                }
            }
            (lo, hi)
        }
    };
    if hi - lo <= T::geom_eps() {
        return Err(Error::EmptyRegion(format!("angle range [{lo}, {hi}] is empty")));
    }
    AngleInterval::new(lo, hi)
}

/// Most combinations of tight constraints examined before giving up on exact
/// vertex enumeration and returning the whole-quadrant cap.
const MAX_VERTEX_COMBINATIONS: u64 = 200_000;

/// A cone containing the region of interest.
///
/// For constraint regions, the extreme rays of the region are enumerated and
/// enclosed with an approximate minimum enclosing ball of their directions.
pub fn bounding_cap<T: Scalar>(roi: &RegionOfInterest<T>) -> Result<Cone<T>> {
    let d = roi.dim();
    match roi.kind() {
        RoiKind::Cone(c) => Ok(c.clone()),
        RoiKind::Full => Ok(quadrant_cap(d)),
        RoiKind::Constraints(cs) => {
            let gs: Vec<Vec<f64>> = cs.iter().map(|c| c.as_geq().iter().map(|v| v.to_f64_lossy()).collect()).collect();
            match extreme_rays(d, &gs) {
                None => Ok(quadrant_cap(d)),
                Some(v) if v.is_empty() => Err(Error::EmptyRegion("constraints leave no feasible direction".into())),
                Some(v) => {
                    let (center, angle) = enclosing_cap(&v);
                    let ray = WeightVector::new(center.iter().map(|&c| T::lit(c)).collect())?;
                    // Widen by a hair so that vertices on the rim stay inside.
                    let angle = T::lit((angle + 1e-9).min(std::f64::consts::FRAC_PI_2));
                    Ok(Cone { ray, angle })
                }
            }
        }
    }
}

pub(crate) fn quadrant_cap<T: Scalar>(d: usize) -> Cone<T> {
    let ray = WeightVector::from_unchecked(vec![T::one(); d]).normalized();
    let angle = T::lit((1.0 / (d as f64).sqrt()).acos() + 1e-9);
    Cone { ray, angle }
}

/// Vertices of `{x >= 0, sum x = 1, g_i . x >= 0}`, as unit vectors.
///
/// `None` when there are too many candidate vertex combinations.
fn extreme_rays(d: usize, gs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> =
        (0..d).map(|k| (0..d).map(|j| if j == k { 1.0 } else { 0.0 }).collect()).chain(gs.iter().cloned()).collect();
    let m = rows.len();
    let pick = d - 1;
    if binomial(m as u64, pick as u64) > MAX_VERTEX_COMBINATIONS {
        return None;
    }
    let tol = 1e-9;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut combo: Vec<usize> = (0..pick).collect();
    loop {
        let mut a: Vec<Vec<f64>> = combo.iter().map(|&r| rows[r].clone()).collect();
        a.push(vec![1.0; d]);
        let mut b = vec![0.0; d];
        b[d - 1] = 1.0;
        if let Some(x) = solve_linear(a, b) {
            let feasible = rows.iter().all(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() >= -tol);
            if feasible {
                let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let u: Vec<f64> = x.iter().map(|v| v.max(0.0) / n).collect();
                if !out.iter().any(|o| o.iter().zip(&u).all(|(p, q)| (p - q).abs() < 1e-9)) {
                    out.push(u);
                }
            }
        }
        // Next combination in lexicographic order.
        let mut i = pick;
        loop {
            if i == 0 {
                return Some(out);
            }
            i -= 1;
            if combo[i] < m - pick + i {
                break;
            }
        }
        combo[i] += 1;
        for j in i + 1..pick {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Gaussian elimination with partial pivoting; `None` for singular systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / pivot[col];
            if f != 0.0 {
                for (x, p) in a[r][col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Center direction and angular radius of a cap around unit vectors.
fn enclosing_cap(points: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut c = points[0].clone();
    let dist = |c: &[f64], p: &[f64]| c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    for step in 1..10_000 {
        let far = points.iter().max_by(|p, q| dist(&c, p).total_cmp(&dist(&c, q))).expect("nonempty");
        let f = 1.0 / (step as f64 + 1.0);
        for (ci, pi) in c.iter_mut().zip(far) {
            *ci += (pi - *ci) * f;
        }
    }
    let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= n);
    let angle = points
        .iter()
        .map(|p| {
            let cos: f64 = c.iter().zip(p).map(|(a, b)| a * b).sum();
            cos.clamp(-1.0, 1.0).acos()
        })
        .fold(0.0, f64::max);
    (c, angle)
}

/// Unit vector of a weight vector as `f64`, used by the LP helpers.
pub(crate) fn unit_f64<T: Scalar>(w: &[T]) -> Vec<f64> {
    let n = norm(w).to_f64_lossy();
    w.iter().map(|v| v.to_f64_lossy() / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::toy;
    use crate::model::{rank, Constraint};
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn dominance() {
        assert!(dominates(&[0.9, 0.9], &[0.1, 0.1]));
        assert!(!dominates(&[0.83, 0.65], &[0.7, 0.68]));
        assert!(!dominates(&[0.7, 0.68], &[0.83, 0.65]));
        assert!(!dominates(&[0.5, 0.5], &[0.5, 0.5]));
        assert!(dominates(&[0.5, 0.6], &[0.5, 0.5]));
    }

    #[test]
    fn exchange_angle_of_t1_t4() {
        let a = exchange_angle_2d(&[0.63, 0.71], &[0.7, 0.68]).unwrap();
        assert!((a - (0.07f64 / 0.03).atan()).abs() < 1e-12);
        assert!((a - 1.1659).abs() < 1e-4);
        assert_eq!(exchange_angle_2d(&[0.9, 0.9], &[0.1, 0.1]), None);
        assert_eq!(exchange_angle_2d(&[0.3, 0.3], &[0.3, 0.3]), None);
        let b = exchange_angle_2d(&[0.7, 0.68], &[0.63, 0.71]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn order_swaps_across_exchange_angle() {
        let ds = toy::<f64>();
        let a = exchange_angle_2d(ds.attrs(0), ds.attrs(3)).unwrap();
        let at = |phi: f64| {
            let r = rank(&ds, &WeightVector::from_f64(&[phi.cos(), phi.sin()]).unwrap()).unwrap();
            let p1 = r.order.iter().position(|x| x == "t1").unwrap();
            let p4 = r.order.iter().position(|x| x == "t4").unwrap();
            p1 < p4
        };
        assert_ne!(at(a - 1e-6), at(a + 1e-6));
        assert_ne!(at(1.16), at(1.17));
    }

    #[test]
    fn exchange_hyperplanes() {
        let ds = toy::<f64>();
        let h = exchange_hyperplane(&ds, 1, 3).unwrap();
        assert!((h.coeffs[0] - 0.13).abs() < 1e-12 && (h.coeffs[1] + 0.03).abs() < 1e-12);
        assert_eq!(h.pair_ids(&ds), ("t2", "t4"));
        // Pair order follows ids regardless of argument order.
        assert_eq!(exchange_hyperplane(&ds, 3, 1).unwrap(), h);

        let ds3 = Dataset::<f64>::from_rows(&[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0])]).unwrap();
        let h = exchange_hyperplane(&ds3, 0, 1).unwrap();
        assert_eq!(h.coeffs, vec![1.0, -1.0, 0.0]);
        let w = [1.0, 1.0, 5.0];
        assert_eq!(h.eval(&w), 0.0);
        assert_eq!(ds3.score(0, &w), ds3.score(1, &w));
        let r = rank(&ds3, &WeightVector::from_f64(&w).unwrap()).unwrap();
        assert_eq!(r.order, ["a", "b"]);

        let dom = Dataset::<f64>::from_rows(&[("a", &[0.9, 0.9]), ("b", &[0.1, 0.1])]).unwrap();
        assert!(exchange_hyperplane(&dom, 0, 1).is_none());
    }

    #[test]
    fn half_space_semantics() {
        let ds = toy::<f64>();
        let mut rng = RngStream::new(5);
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                let Some(plane) = exchange_hyperplane(&ds, i, j) else { continue };
                let hs = HalfSpace { plane, sign: Sign::Pos };
                for _ in 0..50 {
                    let w = [rng.uniform() + 1e-6, rng.uniform() + 1e-6];
                    if hs.contains(&w) {
                        let r = ds.rank_indices(&w);
                        let p = |x| r.iter().position(|&y| y == x).unwrap();
                        assert!(p(hs.plane.pair.0) < p(hs.plane.pair.1));
                    }
                }
            }
        }
    }

    #[test]
    fn polar_examples() {
        let p = to_polar(&[1.0, 1.0]).unwrap();
        assert!((p.as_slice()[0] - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(to_polar(&[1.0, 0.0]).unwrap().as_slice(), &[0.0]);
        let x = to_cartesian(1.0, &[PI / 6.0, PI / 4.0]);
        assert!((norm(&x) - 1.0).abs() < 1e-15);
        assert!(to_polar(&[0.0, 0.0]).is_err());
        assert!(to_polar(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn rotation_hits_target_ray() {
        let mut rng = RngStream::new(11);
        for d in 2..7 {
            let rho: Vec<f64> = (0..d - 1).map(|_| rng.uniform() * FRAC_PI_2).collect();
            let rho = AngleVector::new(rho).unwrap();
            let mut e = vec![0.0; d];
            e[d - 1] = 1.0;
            let got = rotate(&e, &rho).unwrap();
            let want = to_cartesian(1.0, rho.as_slice());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            let m = rotation_matrix(rho.as_slice());
            let via: Vec<f64> = (0..d).map(|r| m[r][d - 1]).collect();
            for (a, b) in via.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(rotate(&[1.0, 0.0, 0.0], &AngleVector::new(vec![0.1]).unwrap()).is_err());
    }

    #[test]
    fn roi_intervals() {
        let roi = RegionOfInterest::<f64>::constraints(
            2,
            vec![
                Constraint::new(vec![1.0, -1.0], crate::Relation::Le),
                Constraint::new(vec![2.0, -1.0], crate::Relation::Ge),
            ],
        )
        .unwrap();
        let i = roi_to_angle_interval_2d(&roi).unwrap();
        assert!((i.lo - FRAC_PI_4).abs() < 1e-12);
        assert!((i.hi - 2f64.atan()).abs() < 1e-12);

        let cone = RegionOfInterest::cone(WeightVector::from_f64(&[1.0, 1.0]).unwrap(), PI / 10.0).unwrap();
        let i = roi_to_angle_interval_2d(&cone).unwrap();
        assert!((i.lo - 3.0 * PI / 20.0).abs() < 1e-12);
        assert!((i.hi - 7.0 * PI / 20.0).abs() < 1e-12);
        assert!((i.width() - PI / 5.0).abs() < 1e-12);

        let i = roi_to_angle_interval_2d(&RegionOfInterest::<f64>::full(2)).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, FRAC_PI_2));

        let edge = RegionOfInterest::cone(WeightVector::from_f64(&[1.0, 0.0]).unwrap(), 0.2).unwrap();
        let i = roi_to_angle_interval_2d(&edge).unwrap();
        assert_eq!(i.lo, 0.0);
        assert!((i.hi - 0.2f64).abs() < 1e-12);
    }

    #[test]
    fn bounding_cap_matches_2d_interval() {
        let roi = RegionOfInterest::<f64>::constraints(2, vec!["-1,1>=0".parse().unwrap(), "2,-1>=0".parse().unwrap()])
            .unwrap();
        let cap = bounding_cap(&roi).unwrap();
        let center = to_polar(cap.ray.as_slice()).unwrap().as_slice()[0];
        let i = roi_to_angle_interval_2d(&roi).unwrap();
        assert!(center - cap.angle <= i.lo + 1e-12 && center + cap.angle >= i.hi - 1e-12);
        assert!((center - cap.angle - i.lo).abs() < 1e-3);
        assert!((center + cap.angle - i.hi).abs() < 1e-3);
    }

    #[test]
    fn bounding_cap_of_vacuous_constraint_is_quadrant() {
        for d in 2..5 {
            let mut c = vec![0.0; d];
            c[0] = 1.0;
            let roi = RegionOfInterest::<f64>::constraints(d, vec![Constraint::new(c, crate::Relation::Ge)]).unwrap();
            let cap = bounding_cap(&roi).unwrap();
            let q = quadrant_cap::<f64>(d);
            assert!(angle_between(cap.ray.as_slice(), q.ray.as_slice()) < 1e-3);
            assert!((cap.angle - q.angle).abs() < 1e-3);
        }
    }

    #[test]
    fn bounding_cap_contains_region_3d() {
        let roi =
            RegionOfInterest::<f64>::constraints(3, vec!["1,-1,0>=0".parse().unwrap(), "0,1,-1>=0".parse().unwrap()])
                .unwrap();
        let cap = bounding_cap(&roi).unwrap();
        let mut rng = RngStream::new(3);
        let mut inside = 0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..3).map(|_| rng.normal().abs()).collect();
            if roi.contains(&w) {
                inside += 1;
                assert!(cap.contains(&w));
            }
        }
        assert!(inside > 1000);
    }

    proptest! {
        #[test]
        fn rotation_is_orthogonal(d in 2usize..7, seed in 0u64..1000) {
            let mut rng = RngStream::new(seed);
            let rho: Vec<f64> = (0..d - 1).map(|_| rng.uniform() * FRAC_PI_2).collect();
            let m = rotation_matrix(&rho);
            for r in 0..d {
                for c in 0..d {
                    let v: f64 = (0..d).map(|k| m[k][r] * m[k][c]).sum();
                    let want = if r == c { 1.0 } else { 0.0 };
                    prop_assert!((v - want).abs() < 1e-10);
                }
            }
            let w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let rho = AngleVector::new(rho).unwrap();
            let rw = rotate(&w, &rho).unwrap();
            let rv = rotate(&v, &rho).unwrap();
            prop_assert!((norm(&rw) - norm(&w)).abs() < 1e-12);
            prop_assert!((angle_between(&rw, &rv) - angle_between(&w, &v)).abs() < 1e-7);
        }

        #[test]
        fn polar_round_trip(raw in proptest::collection::vec(0.0f64..1.0, 2..7)) {
            prop_assume!(raw.iter().any(|&v| v > 1e-6));
            let n = norm(&raw);
            let unit: Vec<f64> = raw.iter().map(|v| v / n).collect();
            let back = to_cartesian(1.0, to_polar(&unit).unwrap().as_slice());
            for (a, b) in unit.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cone_interval_width(center in 0.3f64..1.27, theta in 0.01f64..0.3) {
            let ray = WeightVector::from_f64(&[center.cos(), center.sin()]).unwrap();
            let roi = RegionOfInterest::cone(ray, theta).unwrap();
            let i = roi_to_angle_interval_2d(&roi).unwrap();
            prop_assert!((i.width() - 2.0 * theta).abs() < 1e-9);
        }
    }
}
