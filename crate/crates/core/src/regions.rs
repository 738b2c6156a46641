//! Inner approximations of the Gray-Wyner and assisted residual information
//! regions, the affine map between them, and the lower-bound region L_GW.
//!
//! A [`RegionApprox`] stands for the increasing hull of its point cloud. A
//! point that dominates a stored point is certified to lie in the region;
//! failing that test says nothing about membership.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{
    coordinates, scalarized_search, AuxChannel, CoordTag, OptimizerConfig, RateTriple, Weights3,
};
use crate::pmf::{JointPmf, VarSet};

/// Componentwise slack used by membership tests.
pub const SLACK: f64 = 1e-9;

pub const CSV_HEADER: &str = "tag,w1,w2,w3,c1,c2,c3,value";

/// `(H(X), H(Y), H(X,Y))` of the source pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceEntropies {
    pub h_x: f64,
    pub h_y: f64,
    pub h_xy: f64,
}

impl SourceEntropies {
    pub fn of(pmf: &JointPmf) -> Self {
        let (x, y) = (VarSet::single(0), VarSet::single(1));
        SourceEntropies {
            h_x: pmf.entropy(x),
            h_y: pmf.entropy(y),
            h_xy: pmf.entropy(x.union(y)),
        }
    }
}

fn expect_tag(triple: &RateTriple, tag: CoordTag) -> Result<()> {
    if triple.tag != tag {
        return Err(Error::TagMismatch {
            expected: tag.to_string(),
            found: triple.tag.to_string(),
        });
    }
    Ok(())
}

/// `(R_A + R_C - H(X), R_B + R_C - H(Y), R_A + R_B + R_C - H(X,Y))`.
pub fn affine_map_f(h: &SourceEntropies, gw: &RateTriple) -> Result<RateTriple> {
    expect_tag(gw, CoordTag::Gw)?;
    let [a, b, c] = gw.r;
    Ok(RateTriple::new(
        CoordTag::Aci,
        [a + c - h.h_x, b + c - h.h_y, a + b + c - h.h_xy],
    ))
}

/// Membership in `R_A + R_C >= H(X)`, `R_B + R_C >= H(Y)`, `R_A + R_B + R_C >= H(X,Y)`.
pub fn lgw_membership(gw: &RateTriple, h: &SourceEntropies) -> Result<bool> {
    expect_tag(gw, CoordTag::Gw)?;
    let [a, b, c] = gw.r;
    Ok(a + c >= h.h_x - SLACK && b + c >= h.h_y - SLACK && a + b + c >= h.h_xy - SLACK)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub point: RateTriple,
    pub label: String,
    /// Absent for points that are not attained by a single-letter channel
    /// (scaled regions).
    pub witness: Option<AuxChannel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalarization {
    pub weights: Weights3,
    /// Minimum of `w . p` over the stored cloud.
    pub value: f64,
    /// Index of the attaining point.
    pub point: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionApprox {
    pub tag: CoordTag,
    pub points: Vec<RegionPoint>,
    pub scalarizations: Vec<Scalarization>,
    pub entropies: SourceEntropies,
}

impl RegionApprox {
    pub fn empty(tag: CoordTag, entropies: SourceEntropies) -> Self {
        RegionApprox {
            tag,
            points: Vec::new(),
            scalarizations: Vec::new(),
            entropies,
        }
    }

    /// A region holding the points of the given channels.
    pub fn from_channels(pmf: &JointPmf, tag: CoordTag, channels: Vec<(String, AuxChannel)>) -> Result<Self> {
        let mut region = RegionApprox::empty(tag, SourceEntropies::of(pmf));
        for (label, channel) in channels {
            region.add_channel(pmf, label, channel)?;
        }
        Ok(region)
    }

    pub fn add_channel(&mut self, pmf: &JointPmf, label: impl Into<String>, channel: AuxChannel) -> Result<()> {
        let point = coordinates(pmf, &channel, self.tag)?;
        self.points.push(RegionPoint {
            point,
            label: label.into(),
            witness: Some(channel),
        });
        Ok(())
    }

    /// Add a point without a witness channel.
    pub fn add_point(&mut self, point: RateTriple, label: impl Into<String>) -> Result<()> {
        expect_tag(&point, self.tag)?;
        self.points.push(RegionPoint {
            point,
            label: label.into(),
            witness: None,
        });
        Ok(())
    }

    /// Record the cloud minimum of `w . p`; ties go to the earliest point.
    pub fn record_scalarization(&mut self, weights: Weights3) -> Result<&Scalarization> {
        let w = weights.get();
        let (point, value) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.point.dot(&w)))
            .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
                Some((_, bv)) if bv <= v => best,
                _ => Some((i, v)),
            })
            .ok_or_else(|| Error::InvalidWeights("region has no points".into()))?;
        self.scalarizations.push(Scalarization {
            weights,
            value,
            point,
        });
        Ok(self.scalarizations.last().expect("just pushed"))
    }

    /// Certified membership of the increasing hull of the cloud.
    pub fn contains_certified(&self, triple: &RateTriple) -> Result<bool> {
        expect_tag(triple, self.tag)?;
        Ok(self
            .points
            .iter()
            .any(|p| triple.r.iter().zip(p.point.r).all(|(a, b)| *a >= b - SLACK)))
    }

    /// Largest `|f(GW) - ACI|` over points with witnesses, both recomputed
    /// from the witness channel.
    pub fn affine_deviations(&self, pmf: &JointPmf) -> Result<Vec<Option<f64>>> {
        self.points
            .iter()
            .map(|p| {
                p.witness
                    .as_ref()
                    .map(|w| -> Result<f64> {
                        let gw = coordinates(pmf, w, CoordTag::Gw)?;
                        let aci = coordinates(pmf, w, CoordTag::Aci)?;
                        let mapped = affine_map_f(&self.entropies, &gw)?;
                        Ok(mapped
                            .r
                            .iter()
                            .zip(aci.r)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max))
                    })
                    .transpose()
            })
            .collect()
    }

    /// One row per scalarization: tag, weights, attaining point, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.scalarizations {
            self.csv_row(&mut out, s);
            out.push('\n');
        }
        out
    }

    /// As [`to_csv`](Self::to_csv) with an extra `affine_dev` column holding
    /// the affine-map deviation of each row's witness. Returns the CSV and the
    /// largest deviation.
    pub fn to_csv_with_check(&self, pmf: &JointPmf) -> Result<(String, f64)> {
        let devs = self.affine_deviations(pmf)?;
        let mut out = format!("{CSV_HEADER},affine_dev\n");
        let mut max_dev: f64 = 0.0;
        for s in &self.scalarizations {
            self.csv_row(&mut out, s);
            match devs[s.point] {
                Some(d) => {
                    max_dev = max_dev.max(d);
                    let _ = writeln!(out, ",{d:e}");
                }
                None => out.push_str(",\n"),
            }
        }
        Ok((out, max_dev))
    }

    fn csv_row(&self, out: &mut String, s: &Scalarization) {
        let w = s.weights.get();
        let c = self.points[s.point].point.r;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.tag, w[0], w[1], w[2], c[0], c[1], c[2], s.value
        );
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("region serializes")
    }
}

/// A parsed row of a region CSV export.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub tag: CoordTag,
    pub weights: [f64; 3],
    pub point: [f64; 3],
    pub value: f64,
}

/// Parse a region CSV (with or without the `affine_dev` column).
pub fn parse_region_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    if !header.starts_with(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 8 {
                return Err(Error::Parse(format!("short row {line:?}")));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{:?}: {e}", fields[i])))
            };
            Ok(CsvRow {
                tag: fields[0].parse()?,
                weights: [num(1)?, num(2)?, num(3)?],
                point: [num(4)?, num(5)?, num(6)?],
                value: num(7)?,
            })
        })
        .collect()
}

/// Weights `(i, j, k) / resolution` with `i + j + k = resolution`; includes the axes.
pub fn default_weight_grid(resolution: usize) -> Vec<Weights3> {
    let n = resolution.max(1);
    let mut out = Vec::new();
    for i in (0..=n).rev() {
        for j in (0..=n - i).rev() {
            let k = n - i - j;
            out.push(Weights3::new([i as f64, j as f64, k as f64]).expect("nonzero weights"));
        }
    }
    out
}

/// Trace an inner approximation by scalarized search over `weights`.
///
/// The constant channel and `U = (X, Y)` are always stored first, followed
/// by `injected` channels and then one searched point per weight.
pub fn trace_region(
    pmf: &JointPmf,
    tag: CoordTag,
    weights: &[Weights3],
    config: &OptimizerConfig,
    injected: Vec<(String, AuxChannel)>,
) -> Result<RegionApprox> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("empty weight grid".into()));
    }
    let mut channels = vec![
        ("constant".to_string(), AuxChannel::constant(pmf)?),
        ("full-pair".to_string(), AuxChannel::full_pair(pmf)?),
    ];
    channels.extend(injected);
    let mut region = RegionApprox::from_channels(pmf, tag, channels)?;
    let found: Vec<_> = weights
        .par_iter()
        .map(|w| scalarized_search(pmf, w, tag, config))
        .collect::<Result<Vec<_>>>()?;
    for (w, r) in weights.iter().zip(found) {
        let w = w.get();
        region.add_channel(pmf, format!("search w=({},{},{})", w[0], w[1], w[2]), r.channel)?;
    }
    for w in weights {
        region.record_scalarization(*w)?;
    }
    Ok(region)
}

/// True iff `triple` dominates some stored point (certified membership).
pub fn point_in_region_inner(triple: &RateTriple, region: &RegionApprox) -> Result<bool> {
    region.contains_certified(triple)
}

/// Multiply every point and scalarization value by `factor`. Scaled points
/// carry no single-letter witness.
pub fn scale_region(region: &RegionApprox, factor: f64) -> Result<RegionApprox> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidConfig(format!("scale factor {factor} must be positive")));
    }
    if factor == 1.0 {
        return Ok(region.clone());
    }
    Ok(RegionApprox {
        tag: region.tag,
        points: region
            .points
            .iter()
            .map(|p| RegionPoint {
                point: RateTriple::new(p.point.tag, p.point.r.map(|v| v * factor)),
                label: format!("{} x{factor}", p.label),
                witness: None,
            })
            .collect(),
        scalarizations: region
            .scalarizations
            .iter()
            .map(|s| Scalarization {
                weights: s.weights,
                value: s.value * factor,
                point: s.point,
            })
            .collect(),
        entropies: SourceEntropies {
            h_x: region.entropies.h_x * factor,
            h_y: region.entropies.h_y * factor,
            h_xy: region.entropies.h_xy * factor,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 4,
            ..OptimizerConfig::default()
        }
    }

    fn dsbs() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap()
    }

    fn equal_bit() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    fn independent() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.06, 0.14], vec![0.24, 0.56]]).unwrap()
    }

    fn gw(r: [f64; 3]) -> RateTriple {
        RateTriple::new(CoordTag::Gw, r)
    }

    fn aci(r: [f64; 3]) -> RateTriple {
        RateTriple::new(CoordTag::Aci, r)
    }

    #[test]
    fn affine_map_examples() {
        let pmf = dsbs();
        let h = SourceEntropies::of(&pmf);
        let mi = h.h_x + h.h_y - h.h_xy;
        let m = affine_map_f(&h, &gw([h.h_x, h.h_y, 0.0])).unwrap();
        assert!(m.r[0].abs() < 1e-12 && m.r[1].abs() < 1e-12 && (m.r[2] - mi).abs() < 1e-12);
        let m = affine_map_f(&h, &gw([0.0, 0.0, h.h_xy])).unwrap();
        assert!((m.r[0] - (h.h_xy - h.h_x)).abs() < 1e-12);
        assert!((m.r[1] - (h.h_xy - h.h_y)).abs() < 1e-12);
        assert!(m.r[2].abs() < 1e-12);
        assert!(affine_map_f(&h, &aci([0.0; 3])).is_err());
    }

    #[test]
    fn lgw_examples() {
        let pmf = dsbs();
        let h = SourceEntropies::of(&pmf);
        assert!(lgw_membership(&gw([h.h_x, h.h_y, 0.0]), &h).unwrap());
        assert!(!lgw_membership(&gw([0.0, 0.0, 0.0]), &h).unwrap());
        let c = AuxChannel::new(
            2,
            vec![
                ([0, 0], vec![0.9, 0.1]),
                ([0, 1], vec![0.4, 0.6]),
                ([1, 0], vec![0.3, 0.7]),
                ([1, 1], vec![0.2, 0.8]),
            ],
        )
        .unwrap();
        assert!(lgw_membership(&coordinates(&pmf, &c, CoordTag::Gw).unwrap(), &h).unwrap());
    }

    #[test]
    fn traced_clouds_contain_origin_for_trivial_pairs() {
        let weights = default_weight_grid(2);
        for pmf in [independent(), equal_bit()] {
            let injected = vec![("copy-x".to_string(), AuxChannel::copy_x(&pmf).unwrap())];
            let r = trace_region(&pmf, CoordTag::Aci, &weights, &quick(), injected).unwrap();
            assert!(r.contains_certified(&aci([0.0, 0.0, 0.0])).unwrap());
        }
    }

    #[test]
    fn membership_examples() {
        let pmf = dsbs();
        let r = trace_region(&pmf, CoordTag::Aci, &default_weight_grid(2), &quick(), vec![]).unwrap();
        let mi = pmf.mutual_information(VarSet::single(0), VarSet::single(1)).unwrap();
        assert!(point_in_region_inner(&aci([0.0, 0.0, mi]), &r).unwrap());
        assert!(!point_in_region_inner(&aci([0.0, 0.0, 0.0]), &r).unwrap());
        assert!(matches!(
            point_in_region_inner(&gw([9.0, 9.0, 9.0]), &r),
            Err(Error::TagMismatch { .. })
        ));
    }

    #[test]
    fn scalarization_records_attain_cloud_minimum() {
        let pmf = dsbs();
        let r = trace_region(&pmf, CoordTag::Gw, &default_weight_grid(3), &quick(), vec![]).unwrap();
        for s in &r.scalarizations {
            let w = s.weights.get();
            let min = r.points.iter().map(|p| p.point.dot(&w)).fold(f64::INFINITY, f64::min);
            assert!((s.value - min).abs() < 1e-9);
        }
        for p in &r.points {
            assert!(lgw_membership(&p.point, &r.entropies).unwrap());
        }
    }

    #[test]
    fn scaling() {
        let mut r = RegionApprox::empty(CoordTag::Aci, SourceEntropies::of(&dsbs()));
        r.add_point(aci([1.0, 1.0, 0.0]), "p").unwrap();
        assert_eq!(scale_region(&r, 1.0).unwrap(), r);
        let s = scale_region(&r, 2.0).unwrap();
        assert_eq!(s.points[0].point.r, [2.0, 2.0, 0.0]);
        assert!(scale_region(&r, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let pmf = dsbs();
        let r = trace_region(&pmf, CoordTag::Aci, &default_weight_grid(2), &quick(), vec![]).unwrap();
        let rows = parse_region_csv(&r.to_csv()).unwrap();
        assert_eq!(rows.len(), r.scalarizations.len());
        for (row, s) in rows.iter().zip(&r.scalarizations) {
            assert_eq!(row.value, s.value);
            let dot: f64 = row.weights.iter().zip(row.point).map(|(a, b)| a * b).sum();
            assert!((dot - row.value).abs() < 1e-9);
        }
        let (checked, max_dev) = r.to_csv_with_check(&pmf).unwrap();
        assert!(checked.starts_with("tag,w1,w2,w3,c1,c2,c3,value,affine_dev\n"));
        assert!(max_dev <= 1e-9);
        assert_eq!(parse_region_csv(&checked).unwrap(), rows);
    }

    #[test]
    fn weight_grid_contains_axes() {
        let g = default_weight_grid(8);
        assert_eq!(g.len(), 45);
        for axis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            assert!(g.iter().any(|w| w.get() == axis));
        }
    }
}
