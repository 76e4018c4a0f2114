use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cone;
use crate::model::WeightVector;
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Relation {
    fn as_str(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "<=" | "≤" => Ok(Relation::Le),
            "<" => Ok(Relation::Lt),
            ">=" | "≥" => Ok(Relation::Ge),
            ">" => Ok(Relation::Gt),
            other => Err(Error::InvalidArgument(format!("unknown relation `{other}`"))),
        }
    }
}

/// Homogeneous linear constraint `coeffs · w (relation) 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(coeffs: Vec<T>, relation: Relation) -> Self {
        Self { coeffs, relation }
    }

    /// Coefficients `g` such that the constraint reads `g · w >= 0` (or `> 0`).
    pub fn as_geq(&self) -> Vec<T> {
        match self.relation {
            Relation::Ge | Relation::Gt => self.coeffs.clone(),
            Relation::Le | Relation::Lt => self.coeffs.iter().map(|&c| -c).collect(),
        }
    }

    pub fn is_satisfied(&self, w: &[T]) -> bool {
        let v = dot(&self.coeffs, w);
        match self.relation {
            Relation::Le => v <= T::zero(),
            Relation::Lt => v < T::zero(),
            Relation::Ge => v >= T::zero(),
            Relation::Gt => v > T::zero(),
        }
    }
}

impl<T: Scalar> FromStr for Constraint<T> {
    type Err = Error;

    /// Parses `c1,c2,...,cd <op> 0`, e.g. `-1,1>=0` for `w2 >= w1`.
    fn from_str(s: &str) -> Result<Self> {
        let pos = s
            .find(['<', '>', '≤', '≥'])
            .ok_or_else(|| Error::InvalidArgument(format!("constraint `{s}` has no relation")))?;
        let (lhs, rest) = s.split_at(pos);
        let first = rest.chars().next().map_or(0, char::len_utf8);
        let op_len = if rest[first..].starts_with('=') { first + 1 } else { first };
        let relation: Relation = rest[..op_len].parse()?;
        let rhs = rest[op_len..].trim();
        if !rhs.is_empty() && rhs.parse::<f64>().ok() != Some(0.0) {
            return Err(Error::InvalidArgument(format!(
                "constraints are homogeneous; right-hand side must be 0, got `{rhs}`"
            )));
        }
        let coeffs = lhs
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::InvalidArgument(format!("bad coefficient `{c}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(Self { coeffs, relation })
    }
}

impl<T: Scalar> fmt::Display for Constraint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "{}{}0", parts.join(","), self.relation.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RoiKind<T> {
    Full,
    Cone(Cone<T>),
    Constraints(Vec<Constraint<T>>),
}

/// The acceptable part of the function space, always inside the positive quadrant.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionOfInterest<T> {
    dim: usize,
    kind: RoiKind<T>,
}

impl<T: Scalar> RegionOfInterest<T> {
    pub fn full(dim: usize) -> Self {
        Self { dim, kind: RoiKind::Full }
    }

    /// All weight vectors within `max_angle` of `ray`.
    pub fn cone(ray: WeightVector<T>, max_angle: T) -> Result<Self> {
        if !(max_angle > T::zero() && max_angle <= T::FRAC_PI_2() + T::geom_eps()) {
            return Err(Error::InvalidArgument(format!("cone angle must be in (0, pi/2], got {max_angle}")));
        }
        let dim = ray.dim();
        if dim < 2 {
            return Err(Error::InvalidArgument("cone ray needs at least two components".into()));
        }
        Ok(Self { dim, kind: RoiKind::Cone(Cone { ray: ray.normalized(), angle: max_angle.min(T::FRAC_PI_2()) }) })
    }

    /// Two-attribute region `lo <= theta <= hi`, stored as the cone around the mid angle.
    pub fn angle_range(lo: T, hi: T) -> Result<Self> {
        if !(T::zero() <= lo && lo < hi && hi <= T::FRAC_PI_2()) {
            return Err(Error::InvalidArgument(format!(
                "angle range must satisfy 0 <= lo < hi <= pi/2, got [{lo}, {hi}]"
            )));
        }
        let half = T::lit(0.5);
        let mid = half * (lo + hi);
        Self::cone(WeightVector::new(vec![mid.cos(), mid.sin()])?, half * (hi - lo))
    }

    /// Intersection of the positive quadrant with homogeneous constraints.
    ///
    /// Fails when the intersection has an empty interior.
    pub fn constraints(dim: usize, constraints: Vec<Constraint<T>>) -> Result<Self> {
        if let Some(c) = constraints.iter().find(|c| c.coeffs.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: c.coeffs.len() });
        }
        if constraints.iter().any(|c| c.coeffs.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("constraint coefficients must be finite".into()));
        }
        let roi = Self { dim, kind: RoiKind::Constraints(constraints) };
        match crate::lp::interior_point(&roi, &[], None)? {
            Some((_, slack)) if slack > crate::lp::INTERIOR_TOL => Ok(roi),
            _ => Err(Error::EmptyRegion("constraints leave no interior inside the positive quadrant".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &RoiKind<T> {
        &self.kind
    }

    pub fn is_full(&self) -> bool {
        matches!(self.kind, RoiKind::Full)
    }

    /// Membership of a weight vector, including the non-negativity requirement.
    pub fn contains(&self, w: &[T]) -> bool {
        if w.len() != self.dim || w.iter().any(|&v| v < T::zero()) {
            return false;
        }
        match &self.kind {
            RoiKind::Full => w.iter().any(|v| !v.is_zero()),
            RoiKind::Cone(cone) => cone.contains(w),
            RoiKind::Constraints(cs) => cs.iter().all(|c| c.is_satisfied(w)),
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::DimensionMismatch { expected: d, actual: self.dim });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_range_membership() {
        let roi = RegionOfInterest::<f64>::angle_range(0.7, 0.9).unwrap();
        let at = |a: f64| [a.cos(), a.sin()];
        assert!(roi.contains(&at(0.75)) && roi.contains(&at(0.89)));
        assert!(!roi.contains(&at(0.65)) && !roi.contains(&at(0.95)));
        assert!(RegionOfInterest::<f64>::angle_range(0.9, 0.7).is_err());
        assert!(RegionOfInterest::<f64>::angle_range(0.0, 2.0).is_err());
    }

    #[test]
    fn parse_constraints() {
        let c: Constraint<f64> = "-1, 1 >= 0".parse().unwrap();
        assert_eq!(c.coeffs, vec![-1.0, 1.0]);
        assert_eq!(c.relation, Relation::Ge);
        let c: Constraint<f64> = "2,-1>0".parse().unwrap();
        assert_eq!(c.relation, Relation::Gt);
        let c: Constraint<f64> = "1,0,-3<=".parse().unwrap();
        assert_eq!(c.relation, Relation::Le);
        assert_eq!(c.to_string().parse::<Constraint<f64>>().unwrap(), c);
        assert!("1,2".parse::<Constraint<f64>>().is_err());
        assert!("1,2>=1".parse::<Constraint<f64>>().is_err());
        assert!("1,x>=0".parse::<Constraint<f64>>().is_err());
    }

    #[test]
    fn membership() {
        let roi = RegionOfInterest::<f64>::constraints(2, vec!["-1,1>=0".parse().unwrap(), "2,-1>=0".parse().unwrap()])
            .unwrap();
        assert!(roi.contains(&[1.0, 1.5]));
        assert!(!roi.contains(&[1.0, 2.5]));
        assert!(!roi.contains(&[1.0, 0.5]));
        assert!(!roi.contains(&[-1.0, -1.5]));
    }

    #[test]
    fn empty_constraints_rejected() {
        let err = RegionOfInterest::<f64>::constraints(2, vec!["1,-1>0".parse().unwrap(), "-1,1>0".parse().unwrap()])
            .unwrap_err();
        assert!(matches!(err, Error::EmptyRegion(_)));
        let err = RegionOfInterest::<f64>::constraints(2, vec!["-1,-1>=0".parse().unwrap()]);
        assert!(err.is_err());
        let err = RegionOfInterest::<f64>::constraints(2, vec!["1,1,1>=0".parse().unwrap()]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cone_validation() {
        let ray = WeightVector::<f64>::from_f64(&[1.0, 1.0]).unwrap();
        assert!(RegionOfInterest::cone(ray.clone(), 0.0).is_err());
        assert!(RegionOfInterest::cone(ray.clone(), 2.0).is_err());
        let roi = RegionOfInterest::cone(ray, 0.1).unwrap();
        assert!(roi.contains(&[1.0, 1.1]));
        assert!(!roi.contains(&[1.0, 0.0]));
    }
}
