//! Multi-restart searches over auxiliary channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pmf::JointPmf;

use super::engine::{EntropyForm, Problem, Workspace};
use super::{brute_force_grid, AuxChannel, Coord, CoordTag, OptimizerConfig, SearchMode, Weights3};

/// Best channel found by a search.
#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Objective value of `channel` (the weighted sum, or the constrained objective).
    pub value: f64,
    pub channel: AuxChannel,
    /// All descents that produced the winner stopped on the tolerance rule.
    pub converged: bool,
    /// Largest constraint value at the winner (zero for unconstrained searches).
    pub residual: f64,
    /// Index of the winning start; analytic starts come first.
    pub start: usize,
}

struct Candidate {
    value: f64,
    residual: f64,
    converged: bool,
    start: usize,
    c: Vec<f64>,
}

fn analytic_starts(prob: &Problem) -> Vec<Vec<f64>> {
    let k = prob.k;
    let n = prob.rows();
    let det = |label: &dyn Fn(usize, [usize; 2]) -> usize| {
        let mut c = vec![0.0; n * k];
        for (i, &pair) in prob.pairs.iter().enumerate() {
            c[i * k + label(i, pair)] = 1.0;
        }
        c
    };
    let mut starts = vec![det(&|_, _| 0)];
    if prob.nx <= k {
        starts.push(det(&|_, [x, _]| x));
    }
    if prob.ny <= k {
        starts.push(det(&|_, [_, y]| y));
    }
    if n <= k {
        starts.push(det(&|i, _| i));
    }
    starts
}

fn random_start(prob: &Problem, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let k = prob.k;
    let mut c = Vec::with_capacity(prob.rows() * k);
    for _ in 0..prob.rows() {
        // symmetric Dirichlet(1) via normalized exponentials
        let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = raw.iter().sum();
        c.extend(raw.into_iter().map(|v| v / total));
    }
    c
}

fn starts(prob: &Problem, config: &OptimizerConfig) -> Vec<Vec<f64>> {
    let mut all = if config.analytic_starts {
        analytic_starts(prob)
    } else {
        Vec::new()
    };
    all.extend((0..config.restarts).map(|r| random_start(prob, config.seed, r)));
    all
}

fn best(candidates: Vec<Candidate>) -> Candidate {
    candidates
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.start.cmp(&b.start)))
        .expect("at least one start")
}

fn run_descent(
    prob: &Problem,
    form: &EntropyForm,
    c: &mut Vec<f64>,
    step: &mut f64,
    config: &OptimizerConfig,
    ws: &mut Workspace,
) -> bool {
    let first = prob.descend(form, c, step, config.max_iters, config.tolerance, ws);
    prob.polish(form, c, ws);
    let second = prob.descend(form, c, step, config.max_iters, config.tolerance, ws);
    first.converged && second.converged
}

/// Minimize `w . coords` over channels with the configured alphabet size.
pub fn scalarized_search(
    pmf: &JointPmf,
    weights: &Weights3,
    tag: CoordTag,
    config: &OptimizerConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let terms: Vec<(Coord, f64)> = tag.coords().into_iter().zip(weights.get()).collect();
    let k = config.u_size_for(pmf);
    if config.mode == SearchMode::Grid {
        let g = brute_force_grid(pmf, k, config.grid_step, &terms, &[])?;
        return Ok(SearchResult {
            value: g.value,
            channel: g.channel,
            converged: true,
            residual: 0.0,
            start: 0,
        });
    }
    let prob = Problem::new(pmf, k)?;
    let form = prob.weighted(&terms);
    let candidates: Vec<Candidate> = starts(&prob, config)
        .into_par_iter()
        .enumerate()
        .map(|(start, mut c)| {
            let mut ws = prob.workspace();
            let mut step = config.initial_step;
            let converged = run_descent(&prob, &form, &mut c, &mut step, config, &mut ws);
            Candidate {
                value: prob.value(&form, &c, &mut ws),
                residual: 0.0,
                converged,
                start,
                c,
            }
        })
        .collect();
    let win = best(candidates);
    let channel = AuxChannel::from_dense(&prob.pairs, k, &win.c);
    channel.check()?;
    Ok(SearchResult {
        value: win.value,
        channel,
        converged: win.converged,
        residual: 0.0,
        start: win.start,
    })
}

/// Minimize `objective` subject to every coordinate in `constraints` being
/// zero, by penalty continuation over `config.penalty_schedule`.
///
/// Fails with [`Error::OptimizerDidNotConverge`] when no start ends with all
/// constraints below `config.feasibility_tol`.
pub fn penalized_search(
    pmf: &JointPmf,
    objective: Coord,
    constraints: &[Coord],
    config: &OptimizerConfig,
) -> Result<SearchResult> {
    penalized_search_weighted(pmf, &[(objective, 1.0)], constraints, config)
}

/// [`penalized_search`] with a weighted sum of coordinates as objective.
pub fn penalized_search_weighted(
    pmf: &JointPmf,
    objective: &[(Coord, f64)],
    constraints: &[Coord],
    config: &OptimizerConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let k = config.u_size_for(pmf);
    let prob = Problem::new(pmf, k)?;
    let base = prob.weighted(objective);
    let penalty = prob.weighted(&constraints.iter().map(|&c| (c, 1.0)).collect::<Vec<_>>());
    let candidates: Vec<Candidate> = starts(&prob, config)
        .into_par_iter()
        .enumerate()
        .map(|(start, mut c)| {
            let mut ws = prob.workspace();
            let mut step = config.initial_step;
            let mut converged = true;
            // odd starts skip the first weight: a weak opening penalty can
            // pull every start into the constant channel when I(X;Y) is small
            let skip = if config.penalty_schedule.len() > 1 { start % 2 } else { 0 };
            for &mu in config.penalty_schedule.iter().skip(skip) {
                let form = base.plus(penalty, mu);
                converged &= run_descent(&prob, &form, &mut c, &mut step, config, &mut ws);
                step /= 10.0;
            }
            let residual = constraints
                .iter()
                .map(|&con| prob.coord_value(con, &c, &mut ws).max(0.0))
                .fold(0.0, f64::max);
            Candidate {
                value: prob.value(&base, &c, &mut ws),
                residual,
                converged,
                start,
                c,
            }
        })
        .collect();
    let (feasible, infeasible): (Vec<_>, Vec<_>) = candidates
        .into_iter()
        .partition(|c| c.residual <= config.feasibility_tol);
    if feasible.is_empty() {
        let residual = infeasible.iter().map(|c| c.residual).fold(f64::INFINITY, f64::min);
        return Err(Error::OptimizerDidNotConverge {
            residual,
            tolerance: config.feasibility_tol,
        });
    }
    let win = best(feasible);
    let channel = AuxChannel::from_dense(&prob.pairs, k, &win.c);
    channel.check()?;
    Ok(SearchResult {
        value: win.value,
        channel,
        converged: win.converged,
        residual: win.residual,
        start: win.start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::coordinates;
    use crate::pmf::VarSet;

    fn dsbs() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap()
    }

    fn equal_bit() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    fn independent() -> JointPmf {
        JointPmf::from_matrix(&[vec![0.06, 0.14], vec![0.24, 0.56]]).unwrap()
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 8,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn rd_weight_on_equal_bits_reaches_zero() {
        let w = Weights3::new([0.0, 0.0, 1.0]).unwrap();
        let r = scalarized_search(&equal_bit(), &w, CoordTag::Aci, &quick()).unwrap();
        assert!(r.value.abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn all_ones_on_independent_pair_reaches_zero() {
        let w = Weights3::new([1.0, 1.0, 1.0]).unwrap();
        let r = scalarized_search(&independent(), &w, CoordTag::Aci, &quick()).unwrap();
        assert!(r.value.abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn witness_reproduces_value() {
        let w = Weights3::new([0.2, 0.5, 0.3]).unwrap();
        let pmf = dsbs();
        let r = scalarized_search(&pmf, &w, CoordTag::Gw, &quick()).unwrap();
        let t = coordinates(&pmf, &r.channel, CoordTag::Gw).unwrap();
        assert!((t.dot(&w.get()) - r.value).abs() < 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let w = Weights3::new([0.3, 0.3, 0.4]).unwrap();
        let a = scalarized_search(&dsbs(), &w, CoordTag::Aci, &quick()).unwrap();
        let b = scalarized_search(&dsbs(), &w, CoordTag::Aci, &quick()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.channel, b.channel);
    }

    #[test]
    fn penalized_trivial_cases() {
        let r = penalized_search(&independent(), Coord::Rc, &[Coord::Rd], &quick()).unwrap();
        assert!(r.value < 1e-6 && r.residual <= 1e-6);
        let r = penalized_search(&equal_bit(), Coord::R1, &[Coord::R2, Coord::Rd], &quick()).unwrap();
        assert!(r.value < 1e-6 && r.residual <= 1e-6);
    }

    #[test]
    fn penalized_wyner_on_dsbs_matches_closed_form() {
        // binary symmetric source with crossover 0.2: 1 + h(0.2) - 2 h(a),
        // a = (1 - sqrt(0.6)) / 2
        let h = crate::pmf::binary_entropy;
        let a = (1.0 - 0.6f64.sqrt()) / 2.0;
        let exact = 1.0 + h(0.2) - 2.0 * h(a);
        let r = penalized_search(&dsbs(), Coord::Rc, &[Coord::Rd], &OptimizerConfig::default()).unwrap();
        assert!((r.value - exact).abs() < 1e-3, "{} vs {exact}", r.value);
        let mi = dsbs().mutual_information(VarSet::single(0), VarSet::single(1)).unwrap();
        assert!(r.value >= mi);
    }

    #[test]
    fn rows_stay_stochastic_under_underflow() {
        // a 64-pair support where some masses collapse towards zero
        let pmf = crate::crypto::make_string_ot_pair(1).unwrap();
        let config = OptimizerConfig {
            restarts: 2,
            u_size: Some(8),
            ..OptimizerConfig::default()
        };
        let w = Weights3::new([0.0, 0.0, 1.0]).unwrap();
        let r = scalarized_search(&pmf, &w, CoordTag::Aci, &config).unwrap();
        r.channel.check().unwrap();
        let t = crate::optimize::coordinates(&pmf, &r.channel, CoordTag::Aci).unwrap();
        assert!((t.r[2] - r.value).abs() < 1e-9);
    }

    #[test]
    fn infeasible_is_reported() {
        let config = OptimizerConfig {
            restarts: 2,
            u_size: Some(1),
            analytic_starts: false,
            ..OptimizerConfig::default()
        };
        // a constant U cannot make dependent X and Y conditionally independent
        let err = penalized_search(&dsbs(), Coord::Rc, &[Coord::Rd], &config).unwrap_err();
        assert!(matches!(err, Error::OptimizerDidNotConverge { .. }));
    }
}
