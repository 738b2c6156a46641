//! Exhaustive grid oracle over channels.
//!
//! Each row's simplex is enumerated at a fixed step and every combination of
//! rows is evaluated. Coordinates are computed straight from their
//! definitions as expectations of log-ratios, independently of the entropy
//! forms used by the descent engine.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pmf::JointPmf;

use super::{support_pairs, AuxChannel, Coord};

/// Maximum number of grid evaluations.
pub const GRID_BUDGET: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct GridResult {
    pub value: f64,
    pub channel: AuxChannel,
    pub evaluated: u64,
    pub feasible: u64,
}

/// All compositions of `m` into `k` nonnegative parts, lexicographic.
fn compositions(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in (0..=m).rev() {
        for mut rest in compositions(m - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

struct Direct<'a> {
    pairs: &'a [[usize; 2]],
    ps: &'a [f64],
    px: Vec<f64>,
    py: Vec<f64>,
    k: usize,
    pu: Vec<f64>,
    pxu: Vec<f64>,
    pyu: Vec<f64>,
}

impl<'a> Direct<'a> {
    fn new(pairs: &'a [[usize; 2]], ps: &'a [f64], nx: usize, ny: usize, k: usize) -> Self {
        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; ny];
        for (&[x, y], &p) in pairs.iter().zip(ps) {
            px[x] += p;
            py[y] += p;
        }
        Direct {
            pairs,
            ps,
            px,
            py,
            k,
            pu: vec![0.0; k],
            pxu: vec![0.0; nx * k],
            pyu: vec![0.0; ny * k],
        }
    }

    /// All six coordinates in [`Coord::ALL`] order for the rows `rows[i]`.
    fn evaluate(&mut self, rows: &[&[f64]]) -> [f64; 6] {
        let k = self.k;
        self.pu.iter_mut().for_each(|v| *v = 0.0);
        self.pxu.iter_mut().for_each(|v| *v = 0.0);
        self.pyu.iter_mut().for_each(|v| *v = 0.0);
        for (i, (&[x, y], &p)) in self.pairs.iter().zip(self.ps).enumerate() {
            for (u, &c) in rows[i].iter().enumerate() {
                let m = p * c;
                self.pu[u] += m;
                self.pxu[x * k + u] += m;
                self.pyu[y * k + u] += m;
            }
        }
        let (mut r1, mut r2, mut rd, mut rc) = (0.0, 0.0, 0.0, 0.0);
        for (i, (&[x, y], &p)) in self.pairs.iter().zip(self.ps).enumerate() {
            for (u, &c) in rows[i].iter().enumerate() {
                if c <= 0.0 {
                    continue;
                }
                let j = p * c;
                let (pu, pxu, pyu) = (self.pu[u], self.pxu[x * k + u], self.pyu[y * k + u]);
                r1 += j * (c * self.px[x] / pxu).log2();
                r2 += j * (c * self.py[y] / pyu).log2();
                rd += j * (j * pu / (pxu * pyu)).log2();
                rc += j * (c / pu).log2();
            }
        }
        let cond = |joint: &[f64]| -> f64 {
            joint
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0.0)
                .map(|(idx, &m)| m * (self.pu[idx % k] / m).log2())
                .sum()
        };
        let ra = cond(&self.pxu);
        let rb = cond(&self.pyu);
        [r1, r2, rd, ra, rb, rc]
    }
}

/// Exact minimum of `sum w * coord` over the channel grid with step
/// `grid_step`, restricted to points where every `(coord, max)` in
/// `filter` holds.
pub fn brute_force_grid(
    pmf: &JointPmf,
    u_size: usize,
    grid_step: f64,
    objective: &[(Coord, f64)],
    filter: &[(Coord, f64)],
) -> Result<GridResult> {
    let pairs = support_pairs(pmf)?;
    if u_size == 0 {
        return Err(Error::InvalidConfig("u_size must be positive".into()));
    }
    let m = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || m < 1.0 || (m * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "grid step {grid_step} must be 1/m for a positive integer m"
        )));
    }
    let m = m as usize;
    let simplex: Vec<Vec<f64>> = compositions(m, u_size)
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / m as f64).collect())
        .collect();
    let needed = (simplex.len() as f64).powi(pairs.len() as i32);
    if needed > GRID_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: GRID_BUDGET,
        });
    }
    let ps: Vec<f64> = pmf.entries().iter().map(|e| e.1).collect();
    let (nx, ny) = (pmf.alphabet(0).len(), pmf.alphabet(1).len());
    let n = pairs.len();
    let s = simplex.len();

    // chunk on the first row's choice; each chunk runs an odometer over the rest
    let chunks: Vec<(Option<(f64, Vec<usize>)>, u64, u64)> = (0..s)
        .into_par_iter()
        .map(|first| {
            let mut direct = Direct::new(&pairs, &ps, nx, ny, u_size);
            let mut choice = vec![0usize; n];
            choice[0] = first;
            let mut best: Option<(f64, Vec<usize>)> = None;
            let (mut evaluated, mut feasible) = (0u64, 0u64);
            loop {
                let rows: Vec<&[f64]> = choice.iter().map(|&c| simplex[c].as_slice()).collect();
                let coords = direct.evaluate(&rows);
                evaluated += 1;
                if filter.iter().all(|&(c, max)| coords[c.index()] <= max) {
                    feasible += 1;
                    let v: f64 = objective.iter().map(|&(c, w)| w * coords[c.index()]).sum();
                    if best.as_ref().map_or(true, |b| v < b.0) {
                        best = Some((v, choice.clone()));
                    }
                }
                // advance rows 1..n
                let mut pos = n;
                loop {
                    pos -= 1;
                    if pos == 0 {
                        return (best, evaluated, feasible);
                    }
                    choice[pos] += 1;
                    if choice[pos] < s {
                        break;
                    }
                    choice[pos] = 0;
                }
            }
        })
        .collect();

    let evaluated = chunks.iter().map(|c| c.1).sum();
    let feasible = chunks.iter().map(|c| c.2).sum();
    // chunks are in first-row order, so a strict comparison keeps the
    // lexicographically smallest minimizer
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (b, _, _) in chunks.into_iter() {
        if let Some((v, choice)) = b {
            if best.as_ref().map_or(true, |cur| v < cur.0) {
                best = Some((v, choice));
            }
        }
    }
    let (value, choice) = best.ok_or_else(|| {
        Error::InvalidConfig("no grid point satisfies the feasibility filter".into())
    })?;
    let flat: Vec<f64> = choice.iter().flat_map(|&c| simplex[c].iter().copied()).collect();
    Ok(GridResult {
        value,
        channel: AuxChannel::from_dense(&pairs, u_size, &flat),
        evaluated,
        feasible,
    })
}
