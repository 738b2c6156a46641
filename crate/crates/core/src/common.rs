//! Common parts and the scalar quantities derived from them.
//!
//! The Gács–Körner common part is read off the connected components of the
//! bipartite support graph and is exact. Wyner common information and the
//! corner rates are found by penalized search and are reported as upper
//! estimates.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimize::{penalized_search, AuxChannel, Coord, OptimizerConfig};
use crate::pmf::{entropy_of_masses, JointPmf, VarSet};

/// How far a reported value can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    Exact,
    /// Attained by the witness; the true infimum may be lower.
    HeuristicUpper,
    Heuristic,
}

impl std::fmt::Display for Certification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Certification::Exact => "exact",
            Certification::HeuristicUpper => "heuristic-upper",
            Certification::Heuristic => "heuristic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarReport {
    pub value: f64,
    pub certified: Certification,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub witness: Option<AuxChannel>,
}

impl ScalarReport {
    pub fn exact(value: f64) -> Self {
        ScalarReport {
            value,
            certified: Certification::Exact,
            seed: None,
            config_hash: None,
            witness: None,
        }
    }

    fn searched(value: f64, witness: AuxChannel, config: &OptimizerConfig) -> Self {
        ScalarReport {
            value,
            certified: Certification::HeuristicUpper,
            seed: Some(config.seed),
            config_hash: Some(config.hash()),
            witness: Some(witness),
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(len: usize) -> Self {
        DisjointSet {
            parent: (0..len).collect(),
            rank: vec![0; len],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
    }
}

/// Connected components of the bipartite support graph of a two-variable pmf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkDecomposition {
    /// Component of each x symbol; `None` for symbols of zero marginal mass.
    pub component_of_x: Vec<Option<usize>>,
    pub component_of_y: Vec<Option<usize>>,
    pub component_mass: Vec<f64>,
}

impl GkDecomposition {
    pub fn components(&self) -> usize {
        self.component_mass.len()
    }

    /// Entropy of the component label.
    pub fn entropy(&self) -> f64 {
        if self.component_mass.len() <= 1 {
            return 0.0;
        }
        entropy_of_masses(self.component_mass.iter().copied()).max(0.0)
    }
}

/// Components are numbered in order of their smallest x symbol.
pub fn gk_decomposition(pmf: &JointPmf) -> Result<GkDecomposition> {
    crate::optimize::support_pairs(pmf)?;
    let nx = pmf.alphabet(0).len();
    let ny = pmf.alphabet(1).len();
    let mut sets = DisjointSet::new(nx + ny);
    let mut used_x = vec![false; nx];
    let mut used_y = vec![false; ny];
    for (idx, _) in pmf.entries() {
        let (x, y) = (idx[0] as usize, idx[1] as usize);
        used_x[x] = true;
        used_y[y] = true;
        sets.union(x, nx + y);
    }
    let mut id_of_root = vec![usize::MAX; nx + ny];
    let mut next = 0;
    let mut component_of_x = vec![None; nx];
    for x in 0..nx {
        if used_x[x] {
            let root = sets.find(x);
            if id_of_root[root] == usize::MAX {
                id_of_root[root] = next;
                next += 1;
            }
            component_of_x[x] = Some(id_of_root[root]);
        }
    }
    let component_of_y = (0..ny)
        .map(|y| used_y[y].then(|| id_of_root[sets.find(nx + y)]))
        .collect();
    let mut component_mass = vec![0.0; next];
    for (idx, p) in pmf.entries() {
        component_mass[component_of_x[idx[0] as usize].expect("support symbol")] += p;
    }
    Ok(GkDecomposition {
        component_of_x,
        component_of_y,
        component_mass,
    })
}

/// Gács–Körner common information: the entropy of the common part.
pub fn gk_common_information(pmf: &JointPmf) -> Result<ScalarReport> {
    Ok(ScalarReport::exact(gk_decomposition(pmf)?.entropy()))
}

/// Residual information at zero genie rates, `I(X;Y) - C_GK`.
pub fn residual_info_zero(pmf: &JointPmf) -> Result<ScalarReport> {
    let mi = pmf.mutual_information(VarSet::single(0), VarSet::single(1))?;
    let gk = gk_decomposition(pmf)?.entropy();
    Ok(ScalarReport::exact(crate::pmf::clamp_info(mi - gk)?))
}

/// Smallest `I(X,Y;U)` found over channels with `X - U - Y`.
pub fn wyner_common_information(pmf: &JointPmf, config: &OptimizerConfig) -> Result<ScalarReport> {
    let r = penalized_search(pmf, Coord::Rc, &[Coord::Rd], config)?;
    Ok(ScalarReport::searched(r.value, r.channel, config))
}

/// `R_{1-0}`: smallest `I(Y;U|X)` with `I(X;U|Y) = I(X;Y|U) = 0`.
pub fn corner_rate_1(pmf: &JointPmf, config: &OptimizerConfig) -> Result<ScalarReport> {
    let r = penalized_search(pmf, Coord::R1, &[Coord::R2, Coord::Rd], config)?;
    Ok(ScalarReport::searched(r.value, r.channel, config))
}

/// `R_{2-0}`: smallest `I(X;U|Y)` with `I(Y;U|X) = I(X;Y|U) = 0`.
pub fn corner_rate_2(pmf: &JointPmf, config: &OptimizerConfig) -> Result<ScalarReport> {
    let r = penalized_search(pmf, Coord::R2, &[Coord::R1, Coord::Rd], config)?;
    Ok(ScalarReport::searched(r.value, r.channel, config))
}

/// `(G(Y->X), G(X->Y)) = (I(X;Y) + R_{1-0}, I(X;Y) + R_{2-0})`.
pub fn g_rates(pmf: &JointPmf, config: &OptimizerConfig) -> Result<(ScalarReport, ScalarReport)> {
    let c1 = corner_rate_1(pmf, config)?;
    let c2 = corner_rate_2(pmf, config)?;
    g_rates_from_corners(pmf, c1, c2)
}

/// Shift already computed corner rates by `I(X;Y)`.
pub fn g_rates_from_corners(
    pmf: &JointPmf,
    corner1: ScalarReport,
    corner2: ScalarReport,
) -> Result<(ScalarReport, ScalarReport)> {
    let mi = pmf.mutual_information(VarSet::single(0), VarSet::single(1))?;
    let shift = |mut r: ScalarReport| {
        r.value += mi;
        r
    };
    Ok((shift(corner1), shift(corner2)))
}
