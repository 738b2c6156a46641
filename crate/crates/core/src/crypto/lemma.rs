//! The sup term for a single bit OT: the largest `H(B|Q,A) + H(A|Q,B)` over
//! channels with `I(A;B|Q) = 0`.
//!
//! After merging same-class letters, Q has eight letters `q_1..q_8`. Letters
//! `q_1..q_4` are stars at `A = 00, 01, 11, 10` and `q_5..q_8` are stars at
//! `B = 10, 21, 11, 20`, each covering the two support edges at its vertex.
//! Every support edge carries two letters, so one parameter per edge fixes
//! the channel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common::ScalarReport;
use crate::error::{Error, Result};
use crate::optimize::AuxChannel;
use crate::pmf::{binary_entropy, JointPmf, VarSet};

use super::ot::make_bit_ot;

/// Support edge `(a, b)` of the bit OT, the letter receiving parameter
/// `p[param]`, and the letter receiving the complement.
struct Edge {
    a: usize,
    b: usize,
    param: usize,
    other: usize,
}

const EDGES: [Edge; 8] = [
    Edge { a: 0, b: 0, param: 0, other: 4 }, // (00,10): q1 | q5
    Edge { a: 1, b: 0, param: 4, other: 1 }, // (01,10): q5 | q2
    Edge { a: 1, b: 3, param: 1, other: 5 }, // (01,21): q2 | q6
    Edge { a: 3, b: 3, param: 5, other: 2 }, // (11,21): q6 | q3
    Edge { a: 3, b: 1, param: 2, other: 6 }, // (11,11): q3 | q7
    Edge { a: 2, b: 1, param: 6, other: 3 }, // (10,11): q7 | q4
    Edge { a: 2, b: 2, param: 3, other: 7 }, // (10,20): q4 | q8
    Edge { a: 0, b: 2, param: 7, other: 0 }, // (00,20): q8 | q1
];

/// Parameters in cycle order: consecutive entries share a letter term, and
/// the term between positions `k` and `k+1` is `term(p[k], 1 - p[k+1])`.
const CYCLE: [usize; 8] = [0, 7, 3, 6, 2, 5, 1, 4];

/// Contribution of one letter holding edge masses `a/8` and `b/8`.
fn term(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s <= 0.0 {
        0.0
    } else {
        s / 8.0 * binary_entropy(a / s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitOtClassParams {
    pub p: [f64; 8],
}

impl BitOtClassParams {
    pub fn new(p: [f64; 8]) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidChannel(format!("class parameter {v} outside [0,1]")));
        }
        Ok(BitOtClassParams { p })
    }

    /// `H(B|Q,A)` from the letters `q_1..q_4`.
    pub fn h_b_given_qa(&self) -> f64 {
        let p = &self.p;
        term(p[0], 1.0 - p[7]) + term(p[1], 1.0 - p[4]) + term(p[2], 1.0 - p[5]) + term(p[3], 1.0 - p[6])
    }

    /// `H(A|Q,B)` from the letters `q_5..q_8`.
    pub fn h_a_given_qb(&self) -> f64 {
        let p = &self.p;
        term(p[4], 1.0 - p[0]) + term(p[5], 1.0 - p[1]) + term(p[6], 1.0 - p[2]) + term(p[7], 1.0 - p[3])
    }

    pub fn objective(&self) -> f64 {
        self.h_b_given_qa() + self.h_a_given_qb()
    }

    /// Masses of `q_1..q_4` and of `q_5..q_8`; each bounds its direction's
    /// conditional entropy since a binary entropy is at most 1.
    pub fn mass_bounds(&self) -> (f64, f64) {
        let first: f64 = self.p[..4].iter().sum();
        let second: f64 = self.p[4..].iter().sum();
        ((4.0 + first - second) / 8.0, (4.0 + second - first) / 8.0)
    }

    /// The channel `p(q|a,b)` on the bit-OT pmf.
    pub fn channel(&self, pmf: &JointPmf) -> Result<AuxChannel> {
        if pmf.arity() != 2 || pmf.alphabet(0).len() != 4 || pmf.alphabet(1).len() != 4 {
            return Err(Error::SupportMismatch("expected a bit-OT pmf".into()));
        }
        let mut rows: Vec<([usize; 2], Vec<f64>)> = EDGES
            .iter()
            .map(|e| {
                let mut row = vec![0.0; 8];
                row[e.param] = self.p[e.param];
                row[e.other] = 1.0 - self.p[e.param];
                ([e.a, e.b], row)
            })
            .collect();
        rows.sort_by_key(|r| r.0);
        let channel = AuxChannel::new(8, rows)?;
        channel.check_support(pmf)?;
        Ok(channel)
    }
}

/// `H(B|Q,A) + H(A|Q,B)` computed from the joint pmf of `(A, B, Q)`.
pub fn objective_via_pmf(pmf: &JointPmf, channel: &AuxChannel) -> Result<f64> {
    let joint = channel.induced_joint(pmf)?;
    let (a, b, q) = (VarSet::single(0), VarSet::single(1), VarSet::single(2));
    Ok(joint.conditional_entropy(b, q.union(a))? + joint.conditional_entropy(a, q.union(b))?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupOracleResult {
    pub value: f64,
    pub params: BitOtClassParams,
    pub grid_step: f64,
    pub refine_step: f64,
    /// Value of the coarse grid stage.
    pub coarse_value: f64,
}

fn grid_values(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * step).min(1.0)).collect();
    if hi - v[n] > 1e-12 {
        v.push(hi);
    }
    v
}

fn better(a: &(f64, [f64; 8]), b: &(f64, [f64; 8])) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Exact maximum over the product grid `values[param]` by max-plus dynamic
/// programming around the cycle, parallel over the first cycle position.
fn cycle_max(values: &[Vec<f64>; 8]) -> (f64, [f64; 8]) {
    let first = &values[CYCLE[0]];
    let results: Vec<(f64, [f64; 8])> = (0..first.len())
        .into_par_iter()
        .map(|s0| {
            let v0 = first[s0];
            let mut best: Vec<f64> = values[CYCLE[1]].iter().map(|&v| term(v0, 1.0 - v)).collect();
            let mut back: Vec<Vec<usize>> = Vec::with_capacity(7);
            for k in 2..8 {
                let (prev, cur) = (&values[CYCLE[k - 1]], &values[CYCLE[k]]);
                let mut next = vec![f64::NEG_INFINITY; cur.len()];
                let mut arg = vec![0usize; cur.len()];
                for (j, &vj) in cur.iter().enumerate() {
                    for (i, &vi) in prev.iter().enumerate() {
                        let cand = best[i] + term(vi, 1.0 - vj);
                        if cand > next[j] {
                            next[j] = cand;
                            arg[j] = i;
                        }
                    }
                }
                back.push(arg);
                best = next;
            }
            let last = &values[CYCLE[7]];
            let (mut value, mut end) = (f64::NEG_INFINITY, 0);
            for (i, &vi) in last.iter().enumerate() {
                let cand = best[i] + term(vi, 1.0 - v0);
                if cand > value {
                    value = cand;
                    end = i;
                }
            }
            let mut p = [0.0; 8];
            p[CYCLE[0]] = v0;
            let mut idx = end;
            for k in (1..8).rev() {
                p[CYCLE[k]] = values[CYCLE[k]][idx];
                if k >= 2 {
                    idx = back[k - 2][idx];
                }
            }
            (value, p)
        })
        .collect();
    results
        .into_iter()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .expect("nonempty grid")
}

/// Grid maximum of `H(A|Q,B) + H(B|Q,A)` at `grid_step`, followed by a
/// second grid at `refine_step` on the box of half-width `grid_step` around
/// the coarse maximizer.
pub fn bit_ot_sup_oracle(grid_step: f64, refine_step: f64) -> Result<SupOracleResult> {
    if !(grid_step > 0.0 && grid_step <= 0.25) {
        return Err(Error::InvalidConfig(format!("grid step {grid_step} outside (0, 0.25]")));
    }
    if !(refine_step > 0.0 && refine_step <= grid_step) {
        return Err(Error::InvalidConfig(format!(
            "refine step {refine_step} outside (0, {grid_step}]"
        )));
    }
    let coarse_axis = grid_values(0.0, 1.0, grid_step);
    let coarse = cycle_max(&std::array::from_fn(|_| coarse_axis.clone()));
    let local: [Vec<f64>; 8] = std::array::from_fn(|i| {
        let c = coarse.1[i];
        grid_values((c - grid_step).max(0.0), (c + grid_step).min(1.0), refine_step)
    });
    let refined = cycle_max(&local);
    let best = if better(&refined, &coarse) { refined } else { coarse };
    Ok(SupOracleResult {
        value: best.0,
        params: BitOtClassParams::new(best.1)?,
        grid_step,
        refine_step,
        coarse_value: coarse.0,
    })
}

/// Largest distance of the oracle value from 1 accepted as confirmation.
pub const SUP_CONFIRM_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSumDerivation {
    pub report: ScalarReport,
    /// `H(A|B) + H(B|A)` of one bit OT.
    pub conditional_entropy_sum: f64,
    /// The sup term, 1, as confirmed by the oracle.
    pub sup_term: f64,
    pub oracle_value: f64,
    /// `conditional_entropy_sum - sup_term`.
    pub per_copy: f64,
    pub copies: u32,
}

fn min_sum_zero(oracle: Option<&SupOracleResult>, copies: u32) -> Result<MinSumDerivation> {
    let oracle = oracle.ok_or(Error::OracleNotRun(None))?;
    if (oracle.value - 1.0).abs() > SUP_CONFIRM_TOLERANCE {
        return Err(Error::OracleNotRun(Some(oracle.value)));
    }
    let pmf = make_bit_ot();
    let (a, b) = (VarSet::single(0), VarSet::single(1));
    let sum = pmf.conditional_entropy(a, b)? + pmf.conditional_entropy(b, a)?;
    let per_copy = sum - 1.0;
    Ok(MinSumDerivation {
        report: ScalarReport::exact(per_copy * copies as f64),
        conditional_entropy_sum: sum,
        sup_term: 1.0,
        oracle_value: oracle.value,
        per_copy,
        copies,
    })
}

/// `inf {R_1 + R_2 : (R_1, R_2, 0)}` for one bit OT, which is 1.
pub fn bit_ot_min_sum_zero(oracle: Option<&SupOracleResult>) -> Result<MinSumDerivation> {
    min_sum_zero(oracle, 1)
}

/// The same infimum for the pair of bit OTs: regions of independent pairs
/// add, giving 2.
pub fn bit_ot_pair_min_sum_zero(oracle: Option<&SupOracleResult>) -> Result<MinSumDerivation> {
    min_sum_zero(oracle, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_parameters_give_one() {
        let p = BitOtClassParams::new([0.5; 8]).unwrap();
        assert_eq!(p.h_b_given_qa(), 0.5);
        assert_eq!(p.h_a_given_qb(), 0.5);
        assert_eq!(p.objective(), 1.0);
    }

    #[test]
    fn deterministic_parameters() {
        // all zeros or all ones: every letter holds one edge, so Q determines (A, B)
        let pmf = make_bit_ot();
        for v in [0.0, 1.0] {
            let p = BitOtClassParams::new([v; 8]).unwrap();
            assert_eq!(p.objective(), 0.0);
            assert!(objective_via_pmf(&pmf, &p.channel(&pmf).unwrap()).unwrap().abs() < 1e-12);
        }
        // other vertices: each letter holding both its edges contributes 1/4
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p: [f64; 8] = std::array::from_fn(|_| rng.gen_range(0..2) as f64);
            let doubled = (0..8)
                .filter(|&k| p[CYCLE[k]] == 1.0 && p[CYCLE[(k + 1) % 8]] == 0.0)
                .count();
            assert_eq!(BitOtClassParams::new(p).unwrap().objective(), doubled as f64 * 0.25);
        }
    }

    #[test]
    fn closed_form_matches_pmf_route() {
        let pmf = make_bit_ot();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = BitOtClassParams::new(std::array::from_fn(|_| rng.gen_range(0..=20) as f64 * 0.05)).unwrap();
            let c = p.channel(&pmf).unwrap();
            assert!((p.objective() - objective_via_pmf(&pmf, &c).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_order_covers_every_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p: [f64; 8] = std::array::from_fn(|_| rng.gen());
            let along: f64 = (0..8).map(|k| term(p[CYCLE[k]], 1.0 - p[CYCLE[(k + 1) % 8]])).sum();
            let direct = BitOtClassParams::new(p).unwrap().objective();
            assert!((along - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn dynamic_program_matches_enumeration() {
        // exhaustive check on a 3-point grid (6561 points)
        let axis = vec![0.0, 0.3, 1.0];
        let (value, p) = cycle_max(&std::array::from_fn(|_| axis.clone()));
        let mut best = f64::NEG_INFINITY;
        for code in 0..3usize.pow(8) {
            let mut c = code;
            let q: [f64; 8] = std::array::from_fn(|_| {
                let v = axis[c % 3];
                c /= 3;
                v
            });
            best = best.max(BitOtClassParams::new(q).unwrap().objective());
        }
        assert!((value - best).abs() < 1e-12);
        assert!((BitOtClassParams::new(p).unwrap().objective() - value).abs() < 1e-12);
    }

    #[test]
    fn oracle_finds_one() {
        let r = bit_ot_sup_oracle(0.25, 0.05).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3);
        assert!(bit_ot_sup_oracle(0.3, 0.01).is_err());
    }

    #[test]
    fn min_sum_requires_oracle() {
        assert!(matches!(bit_ot_pair_min_sum_zero(None), Err(Error::OracleNotRun(None))));
        let mut fake = bit_ot_sup_oracle(0.25, 0.25).unwrap();
        fake.value = 0.9;
        assert!(matches!(bit_ot_pair_min_sum_zero(Some(&fake)), Err(Error::OracleNotRun(Some(_)))));
        let oracle = bit_ot_sup_oracle(0.25, 0.05).unwrap();
        assert_eq!(bit_ot_pair_min_sum_zero(Some(&oracle)).unwrap().report.value, 2.0);
        assert_eq!(bit_ot_min_sum_zero(Some(&oracle)).unwrap().report.value, 1.0);
    }
}
