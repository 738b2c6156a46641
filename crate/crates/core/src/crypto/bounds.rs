//! Efficiency bounds for converting copies of a source pair into copies of a
//! target pair: the axis-intercept bound and the region-inclusion bound.
//!
//! Convention: if `n_s` source copies yield `n_t` target copies then
//! `n_s R(source) ⊆ n_t R(target)`, so every source point `p` and every
//! valid target constraint `w·r >= h` give `n_t / n_s <= w·p / h`.

use serde::{Deserialize, Serialize};

use crate::common::{corner_rate_1, corner_rate_2, residual_info_zero, Certification, ScalarReport};
use crate::error::{Error, Result};
use crate::optimize::{CoordTag, OptimizerConfig};
use crate::pmf::JointPmf;
use crate::regions::RegionApprox;

/// Coordinates within this distance of zero count as on a face.
pub const FACE_TOLERANCE: f64 = 1e-9;

/// Positive right-hand sides at or below this are treated as zero.
const ZERO_RHS: f64 = 1e-12;

/// An outer inequality `w·r >= h` for the target ACI region, holding for
/// every region point whose `face` coordinates are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetConstraint {
    pub weights: [f64; 3],
    pub rhs: f64,
    #[serde(default)]
    pub face: [bool; 3],
    #[serde(default)]
    pub origin: String,
}

impl TargetConstraint {
    /// `r_axis >= rhs` on the axis itself.
    pub fn axis(axis: usize, rhs: f64, origin: impl Into<String>) -> Self {
        let mut weights = [0.0; 3];
        weights[axis] = 1.0;
        let mut face = [true; 3];
        face[axis] = false;
        TargetConstraint {
            weights,
            rhs,
            face,
            origin: origin.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !self.rhs.is_finite() {
            return Err(Error::InvalidWeights(format!(
                "constraint weights {:?} must be finite and nonnegative",
                self.weights
            )));
        }
        if self.weights.iter().zip(self.face).all(|(w, f)| f || *w == 0.0) {
            return Err(Error::InvalidWeights("constraint has no weight off its face".into()));
        }
        Ok(())
    }

    pub fn applies_to(&self, point: &[f64; 3]) -> bool {
        point.iter().zip(self.face).all(|(v, f)| !f || v.abs() <= FACE_TOLERANCE)
    }

    fn ratio(&self, point: &[f64; 3]) -> f64 {
        self.weights.iter().zip(point).map(|(w, p)| w * p).sum::<f64>() / self.rhs
    }
}

/// Parse a JSON list of target constraints.
pub fn parse_constraints(text: &str) -> Result<Vec<TargetConstraint>> {
    let list: Vec<TargetConstraint> = serde_json::from_str(text)?;
    for c in &list {
        c.validate()?;
    }
    Ok(list)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    Intercept,
    RegionInclusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub source_label: String,
    pub source_point: [f64; 3],
    pub constraint: TargetConstraint,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBound {
    /// Upper bound on target copies per source copy.
    pub bound: f64,
    pub method: BoundMethod,
    pub certificates: Vec<Certificate>,
    pub certified: bool,
}

/// `(R_{1-0}, R_{2-0}, R_RD-0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intercepts {
    pub r1: ScalarReport,
    pub r2: ScalarReport,
    pub rd: ScalarReport,
}

impl Intercepts {
    pub fn values(&self) -> [f64; 3] {
        [self.r1.value, self.r2.value, self.rd.value]
    }

    fn reports(&self) -> [&ScalarReport; 3] {
        [&self.r1, &self.r2, &self.rd]
    }
}

/// Axis intercepts of the ACI region. `R_RD-0` is exact; the corners come
/// from `corner_override` when given (exact) and from search otherwise.
pub fn axis_intercepts(
    pmf: &JointPmf,
    config: &OptimizerConfig,
    corner_override: Option<[f64; 2]>,
) -> Result<Intercepts> {
    let rd = residual_info_zero(pmf)?;
    let (r1, r2) = match corner_override {
        Some([a, b]) => (ScalarReport::exact(a), ScalarReport::exact(b)),
        None => (corner_rate_1(pmf, config)?, corner_rate_2(pmf, config)?),
    };
    Ok(Intercepts { r1, r2, rd })
}

const AXIS_NAMES: [&str; 3] = ["R1-0", "R2-0", "RD-0"];

/// `min_i source_i / target_i` over the three axes.
pub fn ww_bound(source: &Intercepts, target: &Intercepts) -> Result<EfficiencyBound> {
    let t = target.values();
    if let Some(axis) = t.iter().position(|v| *v <= ZERO_RHS) {
        return Err(Error::ZeroTargetIntercept(axis));
    }
    let s = source.values();
    let certificates: Vec<Certificate> = (0..3)
        .map(|axis| {
            let mut point = [0.0; 3];
            point[axis] = s[axis];
            let constraint = TargetConstraint::axis(axis, t[axis], format!("target {}", AXIS_NAMES[axis]));
            Certificate {
                source_label: format!("source {}", AXIS_NAMES[axis]),
                source_point: point,
                ratio: constraint.ratio(&point),
                constraint,
            }
        })
        .collect();
    let bound = certificates.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    Ok(EfficiencyBound {
        bound,
        method: BoundMethod::Intercept,
        certificates,
        certified: target.reports().iter().all(|r| r.certified == Certification::Exact),
    })
}

/// `min (w·p)/h` over source points `p` and target constraints whose face
/// contains `p`. Records the attaining pair for each applicable constraint.
pub fn aci_efficiency_bound(source: &RegionApprox, constraints: &[TargetConstraint]) -> Result<EfficiencyBound> {
    if source.tag != CoordTag::Aci {
        return Err(Error::TagMismatch {
            expected: CoordTag::Aci.to_string(),
            found: source.tag.to_string(),
        });
    }
    let mut certificates = Vec::new();
    for c in constraints {
        c.validate()?;
        if c.rhs <= ZERO_RHS {
            continue;
        }
        let best = source
            .points
            .iter()
            .filter(|p| c.applies_to(&p.point.r))
            .map(|p| (c.ratio(&p.point.r), p))
            .fold(None, |best: Option<(f64, _)>, cur| match best {
                Some(b) if b.0 <= cur.0 => Some(b),
                _ => Some(cur),
            });
        if let Some((ratio, p)) = best {
            certificates.push(Certificate {
                source_label: p.label.clone(),
                source_point: p.point.r,
                constraint: c.clone(),
                ratio,
            });
        }
    }
    if certificates.is_empty() {
        return Err(Error::NoPositiveConstraint);
    }
    let bound = certificates.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    Ok(EfficiencyBound {
        bound,
        method: BoundMethod::RegionInclusion,
        certificates,
        certified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::RateTriple;
    use crate::regions::SourceEntropies;

    fn exact3(v: [f64; 3]) -> Intercepts {
        Intercepts {
            r1: ScalarReport::exact(v[0]),
            r2: ScalarReport::exact(v[1]),
            rd: ScalarReport::exact(v[2]),
        }
    }

    fn region(points: &[[f64; 3]]) -> RegionApprox {
        let h = SourceEntropies { h_x: 1.0, h_y: 1.0, h_xy: 1.0 };
        let mut r = RegionApprox::empty(CoordTag::Aci, h);
        for (i, p) in points.iter().enumerate() {
            r.add_point(RateTriple::new(CoordTag::Aci, *p), format!("p{i}")).unwrap();
        }
        r
    }

    #[test]
    fn ww_examples() {
        let pair = exact3([2.0, 2.0, 2.0]);
        assert_eq!(ww_bound(&exact3([3.0, 3.0, 4.0]), &pair).unwrap().bound, 1.5);
        assert_eq!(ww_bound(&exact3([2.0, 2.0, 2.0]), &pair).unwrap().bound, 1.0);
        let err = ww_bound(&pair, &exact3([1.0, 0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::ZeroTargetIntercept(1)));
    }

    #[test]
    fn face_restricted_min_sum() {
        let min_sum = TargetConstraint {
            weights: [1.0, 1.0, 0.0],
            rhs: 2.0,
            face: [false, false, true],
            origin: "min-sum".into(),
        };
        let src = region(&[[1.0, 1.0, 0.0], [0.0, 0.0, 0.5]]);
        let b = aci_efficiency_bound(&src, &[min_sum.clone()]).unwrap();
        assert_eq!(b.bound, 1.0);
        assert_eq!(b.certificates.len(), 1);
        assert_eq!(b.certificates[0].source_point, [1.0, 1.0, 0.0]);
        // no source point on the face
        let off = region(&[[0.0, 0.0, 0.5]]);
        assert!(matches!(aci_efficiency_bound(&off, &[min_sum]), Err(Error::NoPositiveConstraint)));
    }

    #[test]
    fn axis_case_reproduces_ww() {
        let s = [3.0, 2.5, 4.0];
        let t = [2.0, 1.0, 2.0];
        let ww = ww_bound(&exact3(s), &exact3(t)).unwrap();
        let src = region(&[[s[0], 0.0, 0.0], [0.0, s[1], 0.0], [0.0, 0.0, s[2]]]);
        let constraints: Vec<_> = (0..3).map(|i| TargetConstraint::axis(i, t[i], "axis")).collect();
        let aci = aci_efficiency_bound(&src, &constraints).unwrap();
        assert_eq!(ww.bound, aci.bound);
    }

    #[test]
    fn equal_regions_bound_at_least_one() {
        let pts = [[1.0, 1.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        let src = region(&pts);
        let constraints = vec![
            TargetConstraint { weights: [1.0, 1.0, 0.0], rhs: 2.0, face: [false, false, true], origin: String::new() },
            TargetConstraint::axis(0, 2.0, ""),
            TargetConstraint::axis(1, 2.0, ""),
            TargetConstraint::axis(2, 2.0, ""),
        ];
        assert!(aci_efficiency_bound(&src, &constraints).unwrap().bound >= 1.0);
    }

    #[test]
    fn constraint_json() {
        let text = r#"[{"weights":[1,1,0],"rhs":2,"face":[false,false,true]}]"#;
        let c = parse_constraints(text).unwrap();
        assert_eq!(c[0].face, [false, false, true]);
        assert!(parse_constraints(r#"[{"weights":[-1,0,0],"rhs":1}]"#).is_err());
        assert!(parse_constraints(r#"[{"weights":[0,0,1],"rhs":1,"face":[false,false,true]}]"#).is_err());
    }
}
