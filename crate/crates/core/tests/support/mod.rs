//! Independent reference computations for integration tests.
//!
//! Everything here works from raw masses with textbook definitions and
//! shares no code with the library beyond reading pmf entries.

#![allow(dead_code)]

use std::collections::HashMap;

use ciregions::optimize::AuxChannel;
use ciregions::pmf::JointPmf;

pub fn entropy_bits<I: IntoIterator<Item = f64>>(masses: I) -> f64 {
    masses
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Joint masses of `(x, y, u)` for a channel on a two-variable pmf.
pub fn joint_xyu(pmf: &JointPmf, channel: &AuxChannel) -> Vec<([usize; 3], f64)> {
    let mut by_pair: HashMap<[usize; 2], f64> = HashMap::new();
    for (idx, p) in pmf.entries() {
        by_pair.insert([idx[0] as usize, idx[1] as usize], *p);
    }
    let mut out = Vec::new();
    for row in channel.rows() {
        let p = by_pair[&row.idx];
        for &(u, c) in &row.probs {
            out.push(([row.idx[0], row.idx[1], u as usize], p * c));
        }
    }
    out
}

/// Entropy of the coordinates selected by `mask` (bit i keeps coordinate i).
pub fn h_sub(joint: &[([usize; 3], f64)], mask: u8) -> f64 {
    let mut m: HashMap<[usize; 3], f64> = HashMap::new();
    for (idx, p) in joint {
        let mut key = [usize::MAX; 3];
        for i in 0..3 {
            if mask & (1 << i) != 0 {
                key[i] = idx[i];
            }
        }
        *m.entry(key).or_default() += p;
    }
    entropy_bits(m.into_values())
}

/// `I(A;B|C)` with each argument a coordinate mask.
pub fn cmi(joint: &[([usize; 3], f64)], a: u8, b: u8, c: u8) -> f64 {
    h_sub(joint, a | c) + h_sub(joint, b | c) - h_sub(joint, c) - h_sub(joint, a | b | c)
}

pub const X: u8 = 1;
pub const Y: u8 = 2;
pub const U: u8 = 4;

/// `(I(Y;U|X), I(X;U|Y), I(X;Y|U))`.
pub fn aci_direct(joint: &[([usize; 3], f64)]) -> [f64; 3] {
    [cmi(joint, Y, U, X), cmi(joint, X, U, Y), cmi(joint, X, Y, U)]
}

/// `(H(X|U), H(Y|U), I(X,Y;U))`.
pub fn gw_direct(joint: &[([usize; 3], f64)]) -> [f64; 3] {
    [
        h_sub(joint, X | U) - h_sub(joint, U),
        h_sub(joint, Y | U) - h_sub(joint, U),
        cmi(joint, X | Y, U, 0),
    ]
}

pub fn mutual_information_xy(pmf: &JointPmf) -> f64 {
    let mut px: HashMap<u32, f64> = HashMap::new();
    let mut py: HashMap<u32, f64> = HashMap::new();
    for (idx, p) in pmf.entries() {
        *px.entry(idx[0]).or_default() += p;
        *py.entry(idx[1]).or_default() += p;
    }
    pmf.entries()
        .iter()
        .map(|(idx, p)| p * (p / (px[&idx[0]] * py[&idx[1]])).log2())
        .sum()
}

/// Largest `H(g(X))` over labelings `g` of X for which some `h` has
/// `g(x) = h(y)` on every support pair, by enumerating all `g`.
pub fn gk_brute_force(pmf: &JointPmf) -> f64 {
    let nx = pmf.alphabet(0).len();
    let ny = pmf.alphabet(1).len();
    let support: Vec<(usize, usize, f64)> = pmf
        .entries()
        .iter()
        .map(|(i, p)| (i[0] as usize, i[1] as usize, *p))
        .collect();
    let total = nx.pow(nx as u32);
    let mut best: f64 = 0.0;
    let mut g = vec![0usize; nx];
    for code in 0..total {
        let mut rest = code;
        for v in g.iter_mut() {
            *v = rest % nx;
            rest /= nx;
        }
        let mut h: Vec<Option<usize>> = vec![None; ny];
        let consistent = support.iter().all(|&(x, y, _)| match h[y] {
            Some(l) => l == g[x],
            None => {
                h[y] = Some(g[x]);
                true
            }
        });
        if !consistent {
            continue;
        }
        let mut masses = vec![0.0; nx];
        for &(x, _, p) in &support {
            masses[g[x]] += p;
        }
        best = best.max(entropy_bits(masses));
    }
    best
}
