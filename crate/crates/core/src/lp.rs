//! Linear feasibility checks with a maximized slack, solved with `minilp`.
//!
//! Every query has the same shape: find `x` in the region of interest that
//! satisfies a set of strict homogeneous inequalities `g . x > 0`, optionally
//! restricted to a hyperplane `h . x = 0`. We maximize a uniform slack `s`
//! with `g . x >= s |g|`; the constraints have a common interior point iff
//! the optimum is positive.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use crate::error::{Error, Result};
use crate::geometry::unit_f64;
use crate::model::{RegionOfInterest, RoiKind};
use crate::scalar::Scalar;

/// Slack above which a point counts as strictly interior.
pub(crate) const INTERIOR_TOL: f64 = 1e-9;

const MAX_CUTS: usize = 200;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solver_err(e: minilp::Error) -> Error {
    Error::Solver(e.to_string())
}

/// Point maximizing the slack of `strict` (each `g . x > 0`) inside `roi`,
/// optionally on `equality`. Returns `None` when even the closed system is
/// infeasible; otherwise the point and its slack.
pub(crate) fn interior_point<T: Scalar>(
    roi: &RegionOfInterest<T>,
    strict: &[Vec<f64>],
    equality: Option<&[f64]>,
) -> Result<Option<(Vec<f64>, f64)>> {
    let d = roi.dim();
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let s = p.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    let mut ball: Option<(Vec<f64>, f64)> = None;

    let mut rows: Vec<Vec<f64>> = strict.to_vec();
    let xs: Vec<Variable>;
    match roi.kind() {
        RoiKind::Cone(cone) if d >= 3 && cone.angle.to_f64_lossy() < std::f64::consts::FRAC_PI_2 - 1e-12 => {
            let axis = unit_f64(cone.ray.as_slice());
            let r = cone.angle.to_f64_lossy().tan();
            xs = axis.iter().map(|&a| p.add_var(0.0, ((a - r).max(0.0), a + r))).collect();
            let expr: Vec<(Variable, f64)> = xs.iter().copied().zip(axis.iter().copied()).collect();
            p.add_constraint(&expr[..], ComparisonOp::Eq, 1.0);
            ball = Some((axis, r));
        }
        kind => {
            xs = (0..d).map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
            let expr: Vec<(Variable, f64)> = xs.iter().map(|&v| (v, 1.0)).collect();
            p.add_constraint(&expr[..], ComparisonOp::Eq, 1.0);
            match kind {
                RoiKind::Cone(cone) if d == 2 => {
                    let w = cone.ray.as_slice();
                    let center = w[1].atan2(w[0]).to_f64_lossy();
                    let a = cone.angle.to_f64_lossy();
                    let lo = (center - a).max(0.0);
                    let hi = (center + a).min(std::f64::consts::FRAC_PI_2);
                    rows.push(vec![-lo.sin(), lo.cos()]);
                    rows.push(vec![hi.sin(), -hi.cos()]);
                }
                RoiKind::Constraints(cs) => {
                    rows.extend(cs.iter().map(|c| c.as_geq().iter().map(|v| v.to_f64_lossy()).collect()));
                }
                _ => {}
            }
        }
    }

    // Strict positivity of every coordinate.
    for &x in &xs {
        p.add_constraint(&[(x, 1.0), (s, -1.0)][..], ComparisonOp::Ge, 0.0);
    }
    for g in &rows {
        let n = norm(g);
        if n == 0.0 {
            continue;
        }
        let mut expr: Vec<(Variable, f64)> = xs.iter().copied().zip(g.iter().copied()).collect();
        expr.push((s, -n));
        p.add_constraint(&expr[..], ComparisonOp::Ge, 0.0);
    }
    if let Some(h) = equality {
        let expr: Vec<(Variable, f64)> = xs.iter().copied().zip(h.iter().copied()).collect();
        p.add_constraint(&expr[..], ComparisonOp::Eq, 0.0);
    }

    let mut sol: Solution = match p.solve() {
        Ok(sol) => sol,
        Err(minilp::Error::Infeasible) => return Ok(None),
        Err(e) => return Err(solver_err(e)),
    };

    let Some((axis, r)) = ball else {
        let x = xs.iter().map(|&v| sol[v]).collect();
        return Ok(Some((x, sol[s])));
    };
    // Outer-approximate the circular cone with tangent cuts.
    for _ in 0..MAX_CUTS {
        let x: Vec<f64> = xs.iter().map(|&v| sol[v]).collect();
        let diff: Vec<f64> = x.iter().zip(&axis).map(|(a, b)| a - b).collect();
        let dist = norm(&diff);
        let slack = sol[s];
        if dist + slack <= r + 1e-12 || dist == 0.0 {
            return Ok(Some((x, slack.min(r - dist))));
        }
        let u: Vec<f64> = diff.iter().map(|v| v / dist).collect();
        let rhs = r + u.iter().zip(&axis).map(|(a, b)| a * b).sum::<f64>();
        let mut expr: Vec<(Variable, f64)> = xs.iter().copied().zip(u.iter().copied()).collect();
        expr.push((s, 1.0));
        sol = match sol.add_constraint(&expr[..], ComparisonOp::Le, rhs) {
            Ok(sol) => sol,
            Err(minilp::Error::Infeasible) => return Ok(None),
            Err(e) => return Err(solver_err(e)),
        };
    }
    let x: Vec<f64> = xs.iter().map(|&v| sol[v]).collect();
    let dist = norm(&x.iter().zip(&axis).map(|(a, b)| a - b).collect::<Vec<_>>());
    let slack = sol[s].min(r - dist);
    Ok(Some((x, slack)))
}

/// Whether `strict` (plus the region of interest) has a nonempty interior,
/// optionally relative to the hyperplane `equality`.
pub(crate) fn has_interior<T: Scalar>(
    roi: &RegionOfInterest<T>,
    strict: &[Vec<f64>],
    equality: Option<&[f64]>,
) -> Result<bool> {
    Ok(matches!(interior_point(roi, strict, equality)?, Some((_, s)) if s > INTERIOR_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightVector;

    #[test]
    fn full_quadrant_interior() {
        let roi = RegionOfInterest::<f64>::full(3);
        let (x, s) = interior_point(&roi, &[], None).unwrap().unwrap();
        assert!(s > 0.3);
        assert!(x.iter().all(|&v| v > 0.0));
        assert!(has_interior(&roi, &[vec![1.0, -1.0, 0.0]], None).unwrap());
        assert!(!has_interior(&roi, &[vec![1.0, -1.0, 0.0], vec![-1.0, 1.0, 0.0]], None).unwrap());
    }

    #[test]
    fn hyperplane_intersection() {
        let roi = RegionOfInterest::<f64>::full(2);
        // x1 = x2 passes through the quadrant interior.
        assert!(has_interior(&roi, &[], Some(&[1.0, -1.0])).unwrap());
        // x1 + x2 = 0 only touches the origin.
        assert!(!has_interior(&roi, &[], Some(&[1.0, 1.0])).unwrap());
        // x1 = x2 misses the region x1 > 2 x2.
        assert!(!has_interior(&roi, &[vec![1.0, -2.0]], Some(&[1.0, -1.0])).unwrap());
    }

    #[test]
    fn cone_cuts() {
        let ray = WeightVector::from_f64(&[1.0, 1.0, 1.0]).unwrap();
        let roi = RegionOfInterest::cone(ray, 0.1).unwrap();
        // The diagonal plane x1 = x2 runs through the cone axis.
        assert!(has_interior(&roi, &[], Some(&[1.0, -1.0, 0.0])).unwrap());
        // x1 = 2 x2 is about 0.26 rad away from the axis.
        assert!(!has_interior(&roi, &[], Some(&[1.0, -2.0, 0.0])).unwrap());
        let wide = RegionOfInterest::cone(WeightVector::from_f64(&[1.0, 1.0, 1.0]).unwrap(), 0.5).unwrap();
        assert!(has_interior(&wide, &[], Some(&[1.0, -2.0, 0.0])).unwrap());
    }

    #[test]
    fn cone_2d() {
        let roi = RegionOfInterest::cone(WeightVector::<f64>::from_f64(&[1.0, 1.0]).unwrap(), 0.1).unwrap();
        assert!(has_interior(&roi, &[], Some(&[1.0, -1.0])).unwrap());
        assert!(!has_interior(&roi, &[], Some(&[1.0, -2.0])).unwrap());
    }
}
