//! Auxiliary channels `p(u|x,y)` and the optimizer that searches over them.
//!
//! A channel has one row per support pair of the source pmf, in the pmf's
//! entry order. Off-support cells have no row. Rows are stored sparsely so
//! that deterministic channels over large supports stay cheap.

mod engine;
mod grid;
mod search;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pmf::{Alphabet, JointPmf, VarSet};

pub use grid::{brute_force_grid, GridResult, GRID_BUDGET};
pub use search::{penalized_search, penalized_search_weighted, scalarized_search, SearchResult};

const ROW_TOLERANCE: f64 = 1e-12;

/// A conditional distribution of an auxiliary variable given a support pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxChannel {
    u_size: usize,
    rows: Vec<ChannelRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRow {
    pub idx: [usize; 2],
    /// Nonzero `(letter, probability)` pairs, letters increasing.
    pub probs: Vec<(u32, f64)>,
}

impl AuxChannel {
    /// Dense rows, one per support pair.
    pub fn new(u_size: usize, rows: Vec<([usize; 2], Vec<f64>)>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|(idx, p)| {
                if p.len() != u_size {
                    return Err(Error::InvalidChannel(format!(
                        "row {idx:?} has {} entries, u_size is {u_size}",
                        p.len()
                    )));
                }
                Ok(ChannelRow {
                    idx,
                    probs: p
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, v)| v != 0.0)
                        .map(|(u, v)| (u as u32, v))
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let channel = AuxChannel { u_size, rows };
        channel.check()?;
        Ok(channel)
    }

    pub(crate) fn from_dense(pmf_support: &[[usize; 2]], u_size: usize, flat: &[f64]) -> Self {
        let rows = pmf_support
            .iter()
            .enumerate()
            .map(|(i, &idx)| ChannelRow {
                idx,
                probs: flat[i * u_size..(i + 1) * u_size]
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| v > 0.0)
                    .map(|(u, &v)| (u as u32, v))
                    .collect(),
            })
            .collect();
        AuxChannel { u_size, rows }
    }

    /// `U = label(x, y)` with certainty.
    pub fn deterministic<F>(pmf: &JointPmf, u_size: usize, label: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> usize,
    {
        let rows = support_pairs(pmf)?
            .into_iter()
            .map(|idx| {
                let u = label(idx[0], idx[1]);
                if u >= u_size {
                    return Err(Error::InvalidChannel(format!(
                        "label {u} out of range for u_size {u_size}"
                    )));
                }
                Ok(ChannelRow {
                    idx,
                    probs: vec![(u as u32, 1.0)],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AuxChannel { u_size, rows })
    }

    /// `U` constant.
    pub fn constant(pmf: &JointPmf) -> Result<Self> {
        AuxChannel::deterministic(pmf, 1, |_, _| 0)
    }

    /// `U = (X, Y)`: a distinct letter per support pair.
    pub fn full_pair(pmf: &JointPmf) -> Result<Self> {
        let pairs = support_pairs(pmf)?;
        let rows = pairs
            .into_iter()
            .enumerate()
            .map(|(i, idx)| ChannelRow {
                idx,
                probs: vec![(i as u32, 1.0)],
            })
            .collect::<Vec<_>>();
        Ok(AuxChannel {
            u_size: rows.len(),
            rows,
        })
    }

    /// `U = X`.
    pub fn copy_x(pmf: &JointPmf) -> Result<Self> {
        AuxChannel::deterministic(pmf, pmf.alphabet(0).len(), |x, _| x)
    }

    /// `U = Y`.
    pub fn copy_y(pmf: &JointPmf) -> Result<Self> {
        AuxChannel::deterministic(pmf, pmf.alphabet(1).len(), |_, y| y)
    }

    pub fn u_size(&self) -> usize {
        self.u_size
    }

    pub fn rows(&self) -> &[ChannelRow] {
        &self.rows
    }

    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.u_size];
        for &(u, p) in &self.rows[i].probs {
            out[u as usize] = p;
        }
        out
    }

    /// Relabel letters: old letter `u` becomes `perm[u]`.
    pub fn permute_letters(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.u_size {
            return Err(Error::InvalidChannel("letter permutation has wrong length".into()));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut probs: Vec<(u32, f64)> =
                    r.probs.iter().map(|&(u, p)| (perm[u as usize] as u32, p)).collect();
                probs.sort_by_key(|e| e.0);
                ChannelRow { idx: r.idx, probs }
            })
            .collect();
        let channel = AuxChannel {
            u_size: self.u_size,
            rows,
        };
        channel.check()?;
        Ok(channel)
    }

    /// Every row is a distribution over `0..u_size` (sums within 1e-12).
    pub fn check(&self) -> Result<()> {
        if self.u_size == 0 {
            return Err(Error::InvalidChannel("u_size must be positive".into()));
        }
        for r in &self.rows {
            let mut sum = 0.0;
            let mut last = None;
            for &(u, p) in &r.probs {
                if u as usize >= self.u_size || !(0.0..=1.0 + ROW_TOLERANCE).contains(&p) {
                    return Err(Error::InvalidChannel(format!("row {:?} has entry ({u}, {p})", r.idx)));
                }
                if last.is_some_and(|l| l >= u) {
                    return Err(Error::InvalidChannel(format!("row {:?} letters out of order", r.idx)));
                }
                last = Some(u);
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidChannel(format!("row {:?} sums to {sum}", r.idx)));
            }
        }
        Ok(())
    }

    /// Rows must cover exactly the support of `pmf`, in its entry order.
    pub fn check_support(&self, pmf: &JointPmf) -> Result<()> {
        let pairs = support_pairs(pmf)?;
        if pairs.len() != self.rows.len() {
            return Err(Error::SupportMismatch(format!(
                "pmf has {} support pairs, channel has {} rows",
                pairs.len(),
                self.rows.len()
            )));
        }
        if let Some((p, r)) = pairs.iter().zip(&self.rows).find(|(p, r)| **p != r.idx) {
            return Err(Error::SupportMismatch(format!(
                "support pair {p:?} does not match channel row {:?}",
                r.idx
            )));
        }
        Ok(())
    }

    /// The joint law of `(X, Y, U)` induced by `pmf` and this channel.
    pub fn induced_joint(&self, pmf: &JointPmf) -> Result<JointPmf> {
        self.check_support(pmf)?;
        let mut alphabets = pmf.alphabets().to_vec();
        alphabets.push(Alphabet::indexed("U", self.u_size));
        let mut entries = Vec::new();
        for ((idx, p), row) in pmf.entries().iter().zip(&self.rows) {
            for &(u, q) in &row.probs {
                let mass = p * q;
                if mass > 0.0 {
                    let mut full = *idx;
                    full[2] = u;
                    entries.push((full, mass));
                }
            }
        }
        Ok(JointPmf::from_parts(alphabets, entries))
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            u_size: self.u_size,
            rows: (0..self.rows.len())
                .map(|i| ChannelFileRow {
                    idx: self.rows[i].idx,
                    p: self.row_dense(i),
                })
                .collect(),
        }
    }
}

impl Serialize for AuxChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AuxChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = ChannelFile::deserialize(d)?;
        AuxChannel::new(file.u_size, file.rows.into_iter().map(|r| (r.idx, r.p)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// `{"u_size":k,"rows":[{"idx":[i,j],"p":[...]}]}`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFile {
    pub u_size: usize,
    pub rows: Vec<ChannelFileRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFileRow {
    pub idx: [usize; 2],
    pub p: Vec<f64>,
}

pub(crate) fn support_pairs(pmf: &JointPmf) -> Result<Vec<[usize; 2]>> {
    if pmf.arity() != 2 {
        return Err(Error::InvalidVariables(format!(
            "expected a two-variable pmf, got {} variables",
            pmf.arity()
        )));
    }
    Ok(pmf
        .entries()
        .iter()
        .map(|(idx, _)| [idx[0] as usize, idx[1] as usize])
        .collect())
}

/// Which rate space a triple lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordTag {
    /// (I(Y;U|X), I(X;U|Y), I(X;Y|U))
    Aci,
    /// (H(X|U), H(Y|U), I(X,Y;U))
    Gw,
}

impl CoordTag {
    pub fn coords(self) -> [Coord; 3] {
        match self {
            CoordTag::Aci => [Coord::R1, Coord::R2, Coord::Rd],
            CoordTag::Gw => [Coord::Ra, Coord::Rb, Coord::Rc],
        }
    }
}

impl fmt::Display for CoordTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoordTag::Aci => "aci",
            CoordTag::Gw => "gw",
        })
    }
}

impl std::str::FromStr for CoordTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aci" => Ok(CoordTag::Aci),
            "gw" => Ok(CoordTag::Gw),
            other => Err(Error::Parse(format!("unknown coordinate tag {other:?}"))),
        }
    }
}

/// A single rate coordinate as a function of the induced `(X, Y, U)` law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coord {
    /// I(Y;U|X)
    R1,
    /// I(X;U|Y)
    R2,
    /// I(X;Y|U)
    Rd,
    /// H(X|U)
    Ra,
    /// H(Y|U)
    Rb,
    /// I(X,Y;U)
    Rc,
}

impl Coord {
    pub const ALL: [Coord; 6] = [Coord::R1, Coord::R2, Coord::Rd, Coord::Ra, Coord::Rb, Coord::Rc];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Evaluate on a joint pmf over `(X, Y, U)`.
    pub fn evaluate(self, joint: &JointPmf) -> Result<f64> {
        let (x, y, u) = (VarSet::single(0), VarSet::single(1), VarSet::single(2));
        match self {
            Coord::R1 => joint.conditional_mutual_information(y, u, x),
            Coord::R2 => joint.conditional_mutual_information(x, u, y),
            Coord::Rd => joint.conditional_mutual_information(x, y, u),
            Coord::Ra => joint.conditional_entropy(x, u),
            Coord::Rb => joint.conditional_entropy(y, u),
            Coord::Rc => joint.mutual_information(x.union(y), u),
        }
    }
}

/// A point in three-dimensional rate space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTriple {
    pub tag: CoordTag,
    pub r: [f64; 3],
}

impl RateTriple {
    pub fn new(tag: CoordTag, r: [f64; 3]) -> Self {
        let r = match tag {
            CoordTag::Aci => r.map(|v| if (-1e-9..0.0).contains(&v) { 0.0 } else { v }),
            CoordTag::Gw => r,
        };
        RateTriple { tag, r }
    }

    pub fn dot(&self, w: &[f64; 3]) -> f64 {
        self.r.iter().zip(w).map(|(a, b)| a * b).sum()
    }
}

/// `(I(Y;U|X), I(X;U|Y), I(X;Y|U))` of the law induced by `channel`.
pub fn aci_coordinates(pmf: &JointPmf, channel: &AuxChannel) -> Result<RateTriple> {
    coordinates(pmf, channel, CoordTag::Aci)
}

/// `(H(X|U), H(Y|U), I(X,Y;U))` of the law induced by `channel`.
pub fn gw_coordinates(pmf: &JointPmf, channel: &AuxChannel) -> Result<RateTriple> {
    coordinates(pmf, channel, CoordTag::Gw)
}

pub fn coordinates(pmf: &JointPmf, channel: &AuxChannel, tag: CoordTag) -> Result<RateTriple> {
    let joint = channel.induced_joint(pmf)?;
    let [a, b, c] = tag.coords();
    Ok(RateTriple::new(
        tag,
        [a.evaluate(&joint)?, b.evaluate(&joint)?, c.evaluate(&joint)?],
    ))
}

/// Nonnegative scalarization weights, normalized to unit 1-norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights3 {
    w: [f64; 3],
}

impl Weights3 {
    pub fn new(w: [f64; 3]) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(format!("{w:?} has a negative component")));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        Ok(Weights3 {
            w: w.map(|v| v / total),
        })
    }

    pub fn get(&self) -> [f64; 3] {
        self.w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    LocalSearch,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Initial multiplicative step; halved on rejection, grown on acceptance.
    pub initial_step: f64,
    /// Stop a descent once three consecutive improvements fall below this.
    pub tolerance: f64,
    pub seed: u64,
    pub mode: SearchMode,
    /// Auxiliary alphabet size; `None` means `|X||Y| + 2`.
    pub u_size: Option<usize>,
    /// Step of the simplex grid used in grid mode.
    pub grid_step: f64,
    /// Penalty weights applied in turn by constrained searches.
    pub penalty_schedule: Vec<f64>,
    /// Every constraint must end below this.
    pub feasibility_tol: f64,
    /// Also start from the constant, copy and full-pair channels.
    pub analytic_starts: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 32,
            max_iters: 2000,
            initial_step: 1.0,
            tolerance: 1e-9,
            seed: 0,
            mode: SearchMode::LocalSearch,
            u_size: None,
            grid_step: 0.05,
            penalty_schedule: vec![1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
            feasibility_tol: 1e-6,
            analytic_starts: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) || !(self.feasibility_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidConfig("initial step must be positive".into()));
        }
        if self.u_size == Some(0) {
            return Err(Error::InvalidConfig("u_size must be positive".into()));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::InvalidConfig("grid step must lie in (0, 1]".into()));
        }
        if self.penalty_schedule.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidConfig("penalty weights must be positive".into()));
        }
        Ok(())
    }

    /// The auxiliary alphabet size used for `pmf`.
    pub fn u_size_for(&self, pmf: &JointPmf) -> usize {
        self.u_size
            .unwrap_or_else(|| default_u_size(pmf))
    }

    /// Short stable digest of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Cardinality bound `|X||Y| + 2`.
pub fn default_u_size(pmf: &JointPmf) -> usize {
    pmf.alphabet(0).len() * pmf.alphabet(1).len() + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dsbs() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap()
    }

    fn equal_bit() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    #[test]
    fn constant_channel_coordinates() {
        let pmf = dsbs();
        let c = AuxChannel::constant(&pmf).unwrap();
        let mi = pmf.mutual_information(VarSet::single(0), VarSet::single(1)).unwrap();
        let aci = aci_coordinates(&pmf, &c).unwrap();
        assert_abs_diff_eq!(aci.r[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(aci.r[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(aci.r[2], mi, epsilon = 1e-12);
        let gw = gw_coordinates(&pmf, &c).unwrap();
        assert_abs_diff_eq!(gw.r[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gw.r[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gw.r[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_pair_channel_coordinates() {
        let pmf = JointPmf::from_matrix(&[vec![0.3, 0.0, 0.2], vec![0.1, 0.4, 0.0]]).unwrap();
        let (x, y) = (VarSet::single(0), VarSet::single(1));
        let c = AuxChannel::full_pair(&pmf).unwrap();
        assert_eq!(c.u_size(), 4);
        let aci = aci_coordinates(&pmf, &c).unwrap();
        assert_abs_diff_eq!(aci.r[0], pmf.conditional_entropy(y, x).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(aci.r[1], pmf.conditional_entropy(x, y).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(aci.r[2], 0.0, epsilon = 1e-12);
        let gw = gw_coordinates(&pmf, &c).unwrap();
        assert_abs_diff_eq!(gw.r[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gw.r[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gw.r[2], pmf.entropy(x.union(y)), epsilon = 1e-12);
    }

    #[test]
    fn copy_channel_on_equal_bits() {
        let pmf = equal_bit();
        let gw = gw_coordinates(&pmf, &AuxChannel::copy_x(&pmf).unwrap()).unwrap();
        assert_eq!(gw.r, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn support_mismatch_is_reported() {
        let c = AuxChannel::constant(&dsbs()).unwrap();
        assert!(matches!(aci_coordinates(&equal_bit(), &c), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn channel_validation_and_json() {
        assert!(AuxChannel::new(2, vec![([0, 0], vec![0.5, 0.6])]).is_err());
        assert!(AuxChannel::new(2, vec![([0, 0], vec![0.5])]).is_err());
        let c = AuxChannel::new(2, vec![([0, 0], vec![0.25, 0.75]), ([1, 1], vec![1.0, 0.0])]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"u_size":2,"rows":[{"idx":[0,0],"p":[0.25,0.75]},{"idx":[1,1],"p":[1.0,0.0]}]}"#);
        let back: AuxChannel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn weights_normalize() {
        assert_eq!(Weights3::new([1.0, 1.0, 2.0]).unwrap().get(), [0.25, 0.25, 0.5]);
        assert!(Weights3::new([0.0, 0.0, 0.0]).is_err());
        assert!(Weights3::new([1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = OptimizerConfig::default();
        let b = OptimizerConfig { seed: 1, ..OptimizerConfig::default() };
        assert_eq!(a.hash(), OptimizerConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
