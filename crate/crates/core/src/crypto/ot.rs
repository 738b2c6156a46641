//! Oblivious-transfer distributions and their analytic channels.
//!
//! Bit layout of the string-OT pair (C encoded as 0 for choice 1 and 1 for
//! choice 2, strings of `L` bits):
//!
//! ```text
//! x = C_A·2^{3L} + S_{A,1}·2^{2L} + S_{A,2}·2^{L} + S_{B,C_A}
//! y = C_B·2^{3L} + S_{B,1}·2^{2L} + S_{B,2}·2^{L} + S_{A,C_B}
//! u = C_A·2^{2L+1} + C_B·2^{2L} + S_{A,C_B}·2^{L} + S_{B,C_A}
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::AuxChannel;
use crate::pmf::{Alphabet, JointPmf};

use super::lemma::BitOtClassParams;

/// Largest allowed `4L + 2`, the log2 of the pair's support size.
pub const SUPPORT_BITS_LIMIT: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtSpec {
    pub string_length: u32,
}

impl OtSpec {
    pub fn new(string_length: u32) -> Result<Self> {
        if string_length == 0 {
            return Err(Error::InvalidConfig("string length must be at least 1".into()));
        }
        if 4 * string_length as u64 + 2 > SUPPORT_BITS_LIMIT as u64 {
            return Err(Error::SizeGuard(string_length));
        }
        Ok(OtSpec { string_length })
    }

    pub fn support_size(&self) -> usize {
        1 << (4 * self.string_length + 2)
    }
}

fn bits(v: usize, width: u32) -> String {
    format!("{v:0w$b}", w = width as usize)
}

fn pair_symbol(l: u32, v: usize) -> String {
    let mask = (1 << l) - 1;
    format!(
        "{}:{}:{}:{}",
        (v >> (3 * l)) + 1,
        bits((v >> (2 * l)) & mask, l),
        bits((v >> l) & mask, l),
        bits(v & mask, l)
    )
}

/// Two independent string OTs in opposite directions, uniform over the
/// `2^{4L+2}` consistent pairs.
pub fn make_string_ot_pair(string_length: u32) -> Result<JointPmf> {
    let spec = OtSpec::new(string_length)?;
    let l = spec.string_length;
    let n = 1usize << l;
    let p = 1.0 / spec.support_size() as f64;
    let mut raw = Vec::with_capacity(spec.support_size());
    for c_a in 0..2 {
        for c_b in 0..2 {
            for sa1 in 0..n {
                for sa2 in 0..n {
                    let sa = [sa1, sa2];
                    for sb1 in 0..n {
                        for sb2 in 0..n {
                            let sb = [sb1, sb2];
                            let x = c_a << (3 * l) | sa1 << (2 * l) | sa2 << l | sb[c_a];
                            let y = c_b << (3 * l) | sb1 << (2 * l) | sb2 << l | sa[c_b];
                            raw.push((vec![x, y], p));
                        }
                    }
                }
            }
        }
    }
    let side = 1usize << (3 * l + 1);
    let alphabet = |name: &str| {
        Alphabet::new(name, (0..side).map(|v| pair_symbol(l, v)).collect())
    };
    JointPmf::new(vec![alphabet("X")?, alphabet("Y")?], raw)
}

/// One string OT: `X = (S_1, S_2)` for the sender, `Y = (C, S_C)` for the receiver.
pub fn make_string_ot(string_length: u32) -> Result<JointPmf> {
    let l = OtSpec::new(string_length)?.string_length;
    let n = 1usize << l;
    let p = 1.0 / (2 * n * n) as f64;
    let mut raw = Vec::with_capacity(2 * n * n);
    for s1 in 0..n {
        for s2 in 0..n {
            let s = [s1, s2];
            for c in 0..2 {
                raw.push((vec![s1 * n + s2, c * n + s[c]], p));
            }
        }
    }
    let x = Alphabet::new(
        "X",
        (0..n * n).map(|v| format!("{}:{}", bits(v / n, l), bits(v % n, l))).collect(),
    )?;
    let y = Alphabet::new(
        "Y",
        (0..2 * n).map(|v| format!("{}:{}", v / n + 1, bits(v % n, l))).collect(),
    )?;
    JointPmf::new(vec![x, y], raw)
}

/// A single bit OT: `A = S_1 S_2` (index `2 S_1 + S_2`), `B = C S_C`
/// (index `2 (C - 1) + S_C`). The support is an 8-cycle.
pub fn make_bit_ot() -> JointPmf {
    let mut raw = Vec::with_capacity(8);
    for a in 0..4usize {
        let s = [a >> 1, a & 1];
        for c in 0..2 {
            raw.push((vec![a, 2 * c + s[c]], 0.125));
        }
    }
    let a = Alphabet::new("A", ["00", "01", "10", "11"].map(String::from).to_vec());
    let b = Alphabet::new("B", ["10", "11", "20", "21"].map(String::from).to_vec());
    JointPmf::new(vec![a.expect("static"), b.expect("static")], raw).expect("static bit OT")
}

/// The pair of bit OTs in opposite directions.
pub fn make_bit_ot_pair() -> JointPmf {
    make_string_ot_pair(1).expect("L = 1 is within the size guard")
}

/// `U = (C_A, C_B, S_{A,C_B}, S_{B,C_A})` on a string-OT pair pmf.
pub fn ot_channel(pmf: &JointPmf, string_length: u32) -> Result<AuxChannel> {
    let l = OtSpec::new(string_length)?.string_length;
    let side = 1usize << (3 * l + 1);
    if pmf.arity() != 2 || pmf.alphabet(0).len() != side || pmf.alphabet(1).len() != side {
        return Err(Error::SupportMismatch(format!(
            "expected a string-OT pair with L = {l}"
        )));
    }
    let mask = (1usize << l) - 1;
    AuxChannel::deterministic(pmf, 1 << (2 * l + 2), |x, y| {
        let (c_a, c_b) = (x >> (3 * l), y >> (3 * l));
        c_a << (2 * l + 1) | c_b << (2 * l) | (y & mask) << l | (x & mask)
    })
}

/// Builtin distributions accepted wherever a pmf path is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    StringOtPair(u32),
    BitOt,
    BitOtPair,
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bitot" => Ok(Builtin::BitOt),
            "bitot-pair" => Ok(Builtin::BitOtPair),
            _ => {
                let l = s
                    .strip_prefix("ot:")
                    .ok_or_else(|| Error::Parse(format!("unknown builtin {s:?}")))?;
                let l: u32 = l
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad string length in {s:?}")))?;
                OtSpec::new(l)?;
                Ok(Builtin::StringOtPair(l))
            }
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::StringOtPair(l) => write!(f, "ot:{l}"),
            Builtin::BitOt => f.write_str("bitot"),
            Builtin::BitOtPair => f.write_str("bitot-pair"),
        }
    }
}

impl Builtin {
    pub fn pmf(&self) -> Result<JointPmf> {
        match *self {
            Builtin::StringOtPair(l) => make_string_ot_pair(l),
            Builtin::BitOt => Ok(make_bit_ot()),
            Builtin::BitOtPair => Ok(make_bit_ot_pair()),
        }
    }

    fn string_length(&self) -> Option<u32> {
        match *self {
            Builtin::StringOtPair(l) => Some(l),
            Builtin::BitOtPair => Some(1),
            Builtin::BitOt => None,
        }
    }

    /// Channels with known coordinates: the OT-specific channel first, then
    /// constant, `(X, Y)`, `X` and `Y`.
    pub fn analytic_channels(&self, pmf: &JointPmf) -> Result<Vec<(String, AuxChannel)>> {
        let mut out = vec![match self.string_length() {
            Some(l) => ("ot-channel".to_string(), ot_channel(pmf, l)?),
            None => (
                "class-channel".to_string(),
                BitOtClassParams::new([0.5; 8])?.channel(pmf)?,
            ),
        }];
        out.extend([
            ("constant".to_string(), AuxChannel::constant(pmf)?),
            ("full-pair".to_string(), AuxChannel::full_pair(pmf)?),
            ("copy-x".to_string(), AuxChannel::copy_x(pmf)?),
            ("copy-y".to_string(), AuxChannel::copy_y(pmf)?),
        ]);
        Ok(out)
    }

    /// Closed-form corner rates `(R_{1-0}, R_{2-0}) = (1 + L, 1 + L)`; a bit
    /// OT is half of the `L = 1` pair.
    pub fn corner_rates(&self) -> [f64; 2] {
        match self.string_length() {
            Some(l) => [1.0 + l as f64; 2],
            None => [1.0; 2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common::gk_decomposition;
    use crate::optimize::aci_coordinates;
    use crate::pmf::VarSet;
    use std::collections::HashMap;

    #[test]
    fn pair_support_and_marginals() {
        let pmf = make_string_ot_pair(1).unwrap();
        assert_eq!(pmf.support_len(), 64);
        assert!(pmf.entries().iter().all(|e| e.1 == 1.0 / 64.0));
        assert_eq!(pmf.entropy(VarSet::single(0)), 4.0);
        assert_eq!(pmf.entropy(VarSet::single(1)), 4.0);
        let mi = pmf.mutual_information(VarSet::single(0), VarSet::single(1)).unwrap();
        assert_eq!(mi, 2.0);
    }

    #[test]
    fn pair_is_join_of_opposite_single_ots() {
        for l in 1..=2u32 {
            let pair = make_string_ot_pair(l).unwrap();
            let forward = make_string_ot(l).unwrap();
            let join = forward.independent_join(&forward.transpose().unwrap()).unwrap();
            // join indices: x = strings·2^{L+1} + (C_A, S_{B,C_A}),
            // y = (C_B, S_{A,C_B})·2^{2L} + strings
            let n = 1usize << l;
            let layout = |strings: usize, recv: usize| (recv / n) << (3 * l) | strings << l | (recv % n);
            let expected: HashMap<(usize, usize), f64> = join
                .entries()
                .iter()
                .map(|(i, p)| {
                    let (x, y) = (i[0] as usize, i[1] as usize);
                    let key = (layout(x / (2 * n), x % (2 * n)), layout(y % (n * n), y / (n * n)));
                    (key, *p)
                })
                .collect();
            assert_eq!(expected.len(), pair.support_len());
            for (i, p) in pair.entries() {
                assert_eq!(expected[&(i[0] as usize, i[1] as usize)], *p);
            }
        }
    }

    #[test]
    fn bit_ot_examples() {
        let pmf = make_bit_ot();
        assert_eq!(pmf.support_len(), 8);
        assert!(pmf.entries().iter().all(|e| e.1 == 0.125));
        let (a, b) = (VarSet::single(0), VarSet::single(1));
        let sum = pmf.conditional_entropy(a, b).unwrap() + pmf.conditional_entropy(b, a).unwrap();
        assert_eq!(sum, 2.0);
        assert_eq!(gk_decomposition(&pmf).unwrap().components(), 1);
    }

    #[test]
    fn ot_channel_point() {
        for l in 1..=2u32 {
            let pmf = make_string_ot_pair(l).unwrap();
            let c = ot_channel(&pmf, l).unwrap();
            let r = aci_coordinates(&pmf, &c).unwrap().r;
            assert!((r[0] - 1.0).abs() < 1e-9 && (r[1] - 1.0).abs() < 1e-9 && r[2].abs() < 1e-9);
        }
    }

    #[test]
    fn size_guard_and_parsing() {
        assert!(matches!(make_string_ot_pair(6), Err(Error::SizeGuard(6))));
        assert!(make_string_ot_pair(0).is_err());
        assert_eq!("ot:3".parse::<Builtin>().unwrap(), Builtin::StringOtPair(3));
        assert_eq!("bitot-pair".parse::<Builtin>().unwrap(), Builtin::BitOtPair);
        assert!("ot:9".parse::<Builtin>().is_err());
        assert!("ot".parse::<Builtin>().is_err());
        assert_eq!(Builtin::StringOtPair(2).to_string(), "ot:2");
    }
}
