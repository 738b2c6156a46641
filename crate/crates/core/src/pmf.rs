//! Finite joint distributions and Shannon information measures.
//!
//! A [`JointPmf`] stores only the positive-mass cells of the product space,
//! keyed by symbol-index tuples. All measures are in bits. Information
//! quantities computed as entropy differences are clamped to zero when they
//! fall in `[-1e-9, 0)`; anything more negative is reported as
//! [`Error::NegativeInformation`].

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Maximum number of jointly represented variables.
pub const MAX_VARS: usize = 6;

/// Tolerance on the total mass of raw input entries.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Rounding slack below zero that information quantities are clamped from.
pub const INFO_CLAMP: f64 = 1e-9;

/// Symbol-index tuple. Only the first `arity` slots are meaningful; the rest are zero.
pub type Index = [u32; MAX_VARS];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    pub name: String,
    #[serde(deserialize_with = "symbols_from_json")]
    pub symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, symbols: Vec<String>) -> Result<Self> {
        let alphabet = Alphabet {
            name: name.into(),
            symbols,
        };
        alphabet.check()?;
        Ok(alphabet)
    }

    /// Alphabet whose symbols are the decimal labels `0..len`.
    pub fn indexed(name: impl Into<String>, len: usize) -> Self {
        Alphabet {
            name: name.into(),
            symbols: (0..len).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    fn check(&self) -> Result<()> {
        if self.symbols.is_empty() {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet {} has no symbols",
                self.name
            )));
        }
        if self.symbols.len() > u32::MAX as usize {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet {} is too large",
                self.name
            )));
        }
        let mut sorted: Vec<&String> = self.symbols.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet {} repeats symbol {:?}",
                self.name, w[0]
            )));
        }
        Ok(())
    }
}

fn symbols_from_json<'de, D>(de: D) -> std::result::Result<Vec<String>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Symbol {
        Text(String),
        Int(i64),
        Real(f64),
    }
    let raw = Vec::<Symbol>::deserialize(de)?;
    Ok(raw
        .into_iter()
        .map(|s| match s {
            Symbol::Text(t) => t,
            Symbol::Int(i) => i.to_string(),
            Symbol::Real(r) => r.to_string(),
        })
        .collect())
}

/// A set of variable positions, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VarSet(u8);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn of(vars: &[usize]) -> VarSet {
        vars.iter().fold(VarSet(0), |acc, &v| acc.with(v))
    }

    pub fn single(var: usize) -> VarSet {
        VarSet(0).with(var)
    }

    /// All variables `0..arity`.
    pub fn all(arity: usize) -> VarSet {
        VarSet(((1u16 << arity) - 1) as u8)
    }

    pub fn with(self, var: usize) -> VarSet {
        assert!(var < MAX_VARS, "variable position {var} out of range");
        VarSet(self.0 | (1 << var))
    }

    pub fn contains(self, var: usize) -> bool {
        var < MAX_VARS && self.0 & (1 << var) != 0
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn is_disjoint(self, other: VarSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_VARS).filter(move |&v| self.contains(v))
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Clamp an information quantity computed from entropy differences.
pub fn clamp_info(value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -INFO_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeInformation(value))
    }
}

/// Shannon entropy in bits of a list of masses (zeros ignored).
pub fn entropy_of_masses<I: IntoIterator<Item = f64>>(masses: I) -> f64 {
    masses
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of_masses([p, 1.0 - p])
}

/// Sparse finite joint distribution over 1..=6 named variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    alphabets: Vec<Alphabet>,
    // sorted by index, strictly positive
    entries: Vec<(Index, f64)>,
}

impl JointPmf {
    /// Validate raw entries against the alphabets. Explicit zeros are dropped
    /// and the remaining masses are rescaled to sum to one.
    pub fn new(alphabets: Vec<Alphabet>, raw: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if alphabets.is_empty() || alphabets.len() > MAX_VARS {
            return Err(Error::InvalidVariables(format!(
                "{} variables given, expected 1..={MAX_VARS}",
                alphabets.len()
            )));
        }
        for a in &alphabets {
            a.check()?;
        }
        let arity = alphabets.len();
        let mut entries = Vec::with_capacity(raw.len());
        let mut seen: Vec<Index> = Vec::with_capacity(raw.len());
        let mut total = 0.0;
        for (idx, p) in raw {
            if idx.len() != arity || idx.iter().zip(&alphabets).any(|(&i, a)| i >= a.len()) {
                return Err(Error::IndexOutOfRange { index: idx });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NegativeProbability { index: idx, p });
            }
            total += p;
            seen.push(pack(&idx));
            if p > 0.0 {
                entries.push((pack(&idx), p));
            }
        }
        // duplicates are rejected even when one of them is zero
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEntry(w[0][..arity].iter().map(|&i| i as usize).collect()));
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassNotOne(total));
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        if total != 1.0 {
            for e in &mut entries {
                e.1 /= total;
            }
        }
        Ok(JointPmf { alphabets, entries })
    }

    /// Two-variable pmf from a dense matrix `rows[x][y]` with variables named X and Y.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ny) {
            return Err(Error::InvalidVariables("ragged matrix".into()));
        }
        let raw = rows
            .iter()
            .enumerate()
            .flat_map(|(x, r)| r.iter().enumerate().map(move |(y, &p)| (vec![x, y], p)))
            .collect();
        JointPmf::new(vec![Alphabet::indexed("X", nx), Alphabet::indexed("Y", ny)], raw)
    }

    /// Build from already-valid positive entries without renormalizing.
    /// Used by internal constructors that produce exact masses.
    pub(crate) fn from_parts(alphabets: Vec<Alphabet>, mut entries: Vec<(Index, f64)>) -> Self {
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        debug_assert!(entries.windows(2).all(|w| w[0].0 != w[1].0));
        JointPmf { alphabets, entries }
    }

    pub fn arity(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn alphabet(&self, var: usize) -> &Alphabet {
        &self.alphabets[var]
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Positive-mass cells in index order.
    pub fn entries(&self) -> &[(Index, f64)] {
        &self.entries
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        if idx.len() != self.arity() {
            return 0.0;
        }
        let key = pack(idx);
        self.entries
            .binary_search_by(|e| e.0.cmp(&key))
            .map_or(0.0, |i| self.entries[i].1)
    }

    fn check_vars(&self, vars: VarSet) -> Result<()> {
        if vars.iter().any(|v| v >= self.arity()) {
            return Err(Error::InvalidVariables(format!(
                "{vars:?} not within {} variables",
                self.arity()
            )));
        }
        Ok(())
    }

    /// Marginal masses over `vars`, sorted by projected index.
    pub fn marginal_masses(&self, vars: VarSet) -> Vec<(Index, f64)> {
        if vars == VarSet::all(self.arity()) {
            return self.entries.clone();
        }
        let mut projected: Vec<(Index, f64)> = self
            .entries
            .iter()
            .map(|(idx, p)| (project(idx, vars), *p))
            .collect();
        projected.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Index, f64)> = Vec::new();
        for (idx, p) in projected {
            match merged.last_mut() {
                Some(last) if last.0 == idx => last.1 += p,
                _ => merged.push((idx, p)),
            }
        }
        merged
    }

    /// H(vars). The empty set has entropy zero.
    pub fn entropy(&self, vars: VarSet) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        if vars == VarSet::all(self.arity()) {
            return entropy_of_masses(self.entries.iter().map(|e| e.1));
        }
        entropy_of_masses(self.marginal_masses(vars).into_iter().map(|e| e.1))
    }

    /// H(target | given) = H(target, given) - H(given).
    pub fn conditional_entropy(&self, target: VarSet, given: VarSet) -> Result<f64> {
        self.check_vars(target.union(given))?;
        if !target.is_disjoint(given) {
            return Err(Error::InvalidVariables("target and given overlap".into()));
        }
        clamp_info(self.entropy(target.union(given)) - self.entropy(given))
    }

    pub fn mutual_information(&self, a: VarSet, b: VarSet) -> Result<f64> {
        self.conditional_mutual_information(a, b, VarSet::EMPTY)
    }

    /// I(a; b | given) = H(a,G) + H(b,G) - H(a,b,G) - H(G).
    pub fn conditional_mutual_information(&self, a: VarSet, b: VarSet, given: VarSet) -> Result<f64> {
        self.check_vars(a.union(b).union(given))?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidVariables("empty variable group".into()));
        }
        if !a.is_disjoint(b) || !a.is_disjoint(given) || !b.is_disjoint(given) {
            return Err(Error::InvalidVariables("variable groups overlap".into()));
        }
        let value = self.entropy(a.union(given)) + self.entropy(b.union(given))
            - self.entropy(a.union(b).union(given))
            - self.entropy(given);
        clamp_info(value)
    }

    /// Marginal distribution of `keep`, variables in increasing position order.
    pub fn marginalize(&self, keep: VarSet) -> Result<JointPmf> {
        self.check_vars(keep)?;
        if keep.is_empty() {
            return Err(Error::InvalidVariables("nothing to keep".into()));
        }
        let positions: Vec<usize> = keep.iter().collect();
        let alphabets = positions.iter().map(|&v| self.alphabets[v].clone()).collect();
        let entries = self
            .marginal_masses(keep)
            .into_iter()
            .map(|(idx, p)| (compact(&idx, &positions), p))
            .collect();
        Ok(JointPmf::from_parts(alphabets, entries))
    }

    /// Distribution of the remaining variables given `var = symbol`.
    pub fn condition(&self, var: usize, symbol: usize) -> Result<JointPmf> {
        if var >= self.arity() || self.arity() < 2 {
            return Err(Error::InvalidVariables(format!(
                "cannot condition on variable {var} of a {}-variable pmf",
                self.arity()
            )));
        }
        let mass: f64 = self
            .entries
            .iter()
            .filter(|e| e.0[var] as usize == symbol)
            .map(|e| e.1)
            .sum();
        if mass <= 0.0 {
            return Err(Error::ZeroMassConditioning { var, symbol });
        }
        let positions: Vec<usize> = (0..self.arity()).filter(|&v| v != var).collect();
        let alphabets = positions.iter().map(|&v| self.alphabets[v].clone()).collect();
        let entries = self
            .entries
            .iter()
            .filter(|e| e.0[var] as usize == symbol)
            .map(|(idx, p)| (compact(idx, &positions), p / mass))
            .collect();
        Ok(JointPmf::from_parts(alphabets, entries))
    }

    /// Product distribution of two independent pmfs of the same arity; variable
    /// `i` of the result is the pair (self_i, other_i) with index
    /// `self_i * |other_i| + other_i`.
    pub fn independent_join(&self, other: &JointPmf) -> Result<JointPmf> {
        if self.arity() != other.arity() {
            return Err(Error::InvalidVariables(format!(
                "cannot join {}-variable and {}-variable pmfs",
                self.arity(),
                other.arity()
            )));
        }
        let alphabets: Vec<Alphabet> = self
            .alphabets
            .iter()
            .zip(&other.alphabets)
            .map(|(a, b)| Alphabet {
                name: format!("({},{})", a.name, b.name),
                symbols: a
                    .symbols
                    .iter()
                    .flat_map(|s| b.symbols.iter().map(move |t| format!("({s},{t})")))
                    .collect(),
            })
            .collect();
        let widths: Vec<u32> = other.alphabets.iter().map(|a| a.len() as u32).collect();
        let mut entries = Vec::with_capacity(self.entries.len() * other.entries.len());
        for (ia, pa) in &self.entries {
            for (ib, pb) in &other.entries {
                let mut idx = [0u32; MAX_VARS];
                for v in 0..self.arity() {
                    idx[v] = ia[v] * widths[v] + ib[v];
                }
                entries.push((idx, pa * pb));
            }
        }
        Ok(JointPmf::from_parts(alphabets, entries))
    }

    /// Reorder variables: variable `i` of the result is variable `order[i]` of `self`.
    pub fn permute_variables(&self, order: &[usize]) -> Result<JointPmf> {
        let mut check: Vec<usize> = order.to_vec();
        check.sort_unstable();
        if check != (0..self.arity()).collect::<Vec<_>>() {
            return Err(Error::InvalidVariables(format!("{order:?} is not a permutation")));
        }
        let alphabets = order.iter().map(|&v| self.alphabets[v].clone()).collect();
        let entries = self
            .entries
            .iter()
            .map(|(idx, p)| (compact(idx, order), *p))
            .collect();
        Ok(JointPmf::from_parts(alphabets, entries))
    }

    /// Swap the two variables of a two-variable pmf.
    pub fn transpose(&self) -> Result<JointPmf> {
        if self.arity() != 2 {
            return Err(Error::InvalidVariables("transpose needs exactly two variables".into()));
        }
        self.permute_variables(&[1, 0])
    }

    /// Rename the symbols of `var`: old symbol `s` moves to position `perm[s]`.
    pub fn relabel(&self, var: usize, perm: &[usize]) -> Result<JointPmf> {
        if var >= self.arity() {
            return Err(Error::InvalidVariables(format!("no variable {var}")));
        }
        let n = self.alphabets[var].len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidVariables(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let mut alphabets = self.alphabets.clone();
        let mut symbols = vec![String::new(); n];
        for (old, &new) in perm.iter().enumerate() {
            symbols[new] = self.alphabets[var].symbols[old].clone();
        }
        alphabets[var].symbols = symbols;
        let entries = self
            .entries
            .iter()
            .map(|(idx, p)| {
                let mut idx = *idx;
                idx[var] = perm[idx[var] as usize] as u32;
                (idx, *p)
            })
            .collect();
        Ok(JointPmf::from_parts(alphabets, entries))
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn to_file(&self) -> PmfFile {
        PmfFile {
            variables: self.alphabets.clone(),
            entries: self
                .entries
                .iter()
                .map(|(idx, p)| PmfFileEntry {
                    idx: idx[..self.arity()].iter().map(|&i| i as usize).collect(),
                    p: Probability::Real(*p),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<JointPmf> {
        let file: PmfFile = serde_json::from_str(text)?;
        file.into_pmf()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("pmf serializes")
    }
}

pub(crate) fn pack(idx: &[usize]) -> Index {
    let mut out = [0u32; MAX_VARS];
    for (o, &i) in out.iter_mut().zip(idx) {
        *o = i as u32;
    }
    out
}

fn project(idx: &Index, vars: VarSet) -> Index {
    let mut out = [0u32; MAX_VARS];
    for v in vars.iter() {
        out[v] = idx[v];
    }
    out
}

fn compact(idx: &Index, positions: &[usize]) -> Index {
    let mut out = [0u32; MAX_VARS];
    for (o, &v) in out.iter_mut().zip(positions) {
        *o = idx[v];
    }
    out
}

/// On-disk pmf: `{"variables":[{"name":..,"symbols":[..]}],"entries":[{"idx":[..],"p":..}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PmfFile {
    pub variables: Vec<Alphabet>,
    pub entries: Vec<PmfFileEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PmfFileEntry {
    pub idx: Vec<usize>,
    pub p: Probability,
}

/// A probability given either as a real or as an exact rational `{"num":1,"den":8}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probability {
    Real(f64),
    Rational { num: u64, den: u64 },
}

impl Probability {
    pub fn value(self) -> Result<f64> {
        match self {
            Probability::Real(p) => Ok(p),
            Probability::Rational { den: 0, .. } => Err(Error::Parse("zero denominator".into())),
            Probability::Rational { num, den } => Ok(num as f64 / den as f64),
        }
    }
}

impl PmfFile {
    /// Files carry two or three variables.
    pub fn into_pmf(self) -> Result<JointPmf> {
        if !(2..=3).contains(&self.variables.len()) {
            return Err(Error::InvalidVariables(format!(
                "pmf files carry 2 or 3 variables, found {}",
                self.variables.len()
            )));
        }
        let raw = self
            .entries
            .into_iter()
            .map(|e| Ok((e.idx, e.p.value()?)))
            .collect::<Result<Vec<_>>>()?;
        JointPmf::new(self.variables, raw)
    }
}
