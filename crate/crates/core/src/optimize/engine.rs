//! Dense evaluation and descent over channels of a fixed support.
//!
//! Every rate coordinate is an affine function of the four entropies
//! H(U), H(X,U), H(Y,U), H(X,Y,U) of the induced law, so objectives are
//! carried as an [`EntropyForm`] and share one gradient routine.

use crate::error::Result;
use crate::pmf::{JointPmf, VarSet};

use super::{support_pairs, Coord};

const MIN_STEP: f64 = 1e-18;
const MAX_STEP: f64 = 1e3;
/// Channel entries below this are set to zero by the descent step.
const MASS_FLOOR: f64 = 1e-200;

/// `coef . [H(U), H(X,U), H(Y,U), H(X,Y,U)] + constant`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct EntropyForm {
    pub coef: [f64; 4],
    pub constant: f64,
}

impl EntropyForm {
    pub const ZERO: EntropyForm = EntropyForm {
        coef: [0.0; 4],
        constant: 0.0,
    };

    pub fn plus(self, other: EntropyForm, scale: f64) -> EntropyForm {
        let mut coef = self.coef;
        for (c, o) in coef.iter_mut().zip(other.coef) {
            *c += scale * o;
        }
        EntropyForm {
            coef,
            constant: self.constant + scale * other.constant,
        }
    }

    pub fn apply(&self, h: &[f64; 4]) -> f64 {
        self.coef.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + self.constant
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Problem {
    pub pairs: Vec<[usize; 2]>,
    pub ps: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub k: usize,
    pub h_x: f64,
    pub h_y: f64,
    pub h_xy: f64,
}

pub(crate) struct Workspace {
    pu: Vec<f64>,
    pxu: Vec<f64>,
    pyu: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Descent {
    pub converged: bool,
}

impl Problem {
    pub fn new(pmf: &JointPmf, k: usize) -> Result<Self> {
        let pairs = support_pairs(pmf)?;
        let (x, y) = (VarSet::single(0), VarSet::single(1));
        Ok(Problem {
            ps: pmf.entries().iter().map(|e| e.1).collect(),
            pairs,
            nx: pmf.alphabet(0).len(),
            ny: pmf.alphabet(1).len(),
            k,
            h_x: pmf.entropy(x),
            h_y: pmf.entropy(y),
            h_xy: pmf.entropy(x.union(y)),
        })
    }

    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            pu: vec![0.0; self.k],
            pxu: vec![0.0; self.nx * self.k],
            pyu: vec![0.0; self.ny * self.k],
        }
    }

    pub fn form(&self, coord: Coord) -> EntropyForm {
        let (coef, constant) = match coord {
            Coord::R1 => ([0.0, 1.0, 0.0, -1.0], self.h_xy - self.h_x),
            Coord::R2 => ([0.0, 0.0, 1.0, -1.0], self.h_xy - self.h_y),
            Coord::Rd => ([-1.0, 1.0, 1.0, -1.0], 0.0),
            Coord::Ra => ([-1.0, 1.0, 0.0, 0.0], 0.0),
            Coord::Rb => ([-1.0, 0.0, 1.0, 0.0], 0.0),
            Coord::Rc => ([1.0, 0.0, 0.0, -1.0], self.h_xy),
        };
        EntropyForm { coef, constant }
    }

    pub fn weighted(&self, terms: &[(Coord, f64)]) -> EntropyForm {
        terms
            .iter()
            .fold(EntropyForm::ZERO, |acc, &(c, w)| acc.plus(self.form(c), w))
    }

    /// Fills the marginals in `ws` and returns the four entropies.
    pub fn entropies(&self, c: &[f64], ws: &mut Workspace) -> [f64; 4] {
        let k = self.k;
        ws.pu.iter_mut().for_each(|v| *v = 0.0);
        ws.pxu.iter_mut().for_each(|v| *v = 0.0);
        ws.pyu.iter_mut().for_each(|v| *v = 0.0);
        let mut h_xyu = 0.0;
        for (i, (&[x, y], &p)) in self.pairs.iter().zip(&self.ps).enumerate() {
            for u in 0..k {
                let m = p * c[i * k + u];
                if m > 0.0 {
                    ws.pu[u] += m;
                    ws.pxu[x * k + u] += m;
                    ws.pyu[y * k + u] += m;
                    h_xyu -= m * m.log2();
                }
            }
        }
        let h = |v: &[f64]| -> f64 { v.iter().filter(|&&m| m > 0.0).map(|&m| -m * m.log2()).sum() };
        [h(&ws.pu), h(&ws.pxu), h(&ws.pyu), h_xyu]
    }

    pub fn value(&self, form: &EntropyForm, c: &[f64], ws: &mut Workspace) -> f64 {
        form.apply(&self.entropies(c, ws))
    }

    pub fn coord_value(&self, coord: Coord, c: &[f64], ws: &mut Workspace) -> f64 {
        self.value(&self.form(coord), c, ws)
    }

    /// Gradient divided by the row mass, without the per-row constant.
    /// `ws` must hold the marginals of `c`.
    fn gradient(&self, form: &EntropyForm, c: &[f64], ws: &Workspace, grad: &mut [f64]) {
        let k = self.k;
        let [a_u, a_xu, a_yu, a_xyu] = form.coef;
        for (i, (&[x, y], &p)) in self.pairs.iter().zip(&self.ps).enumerate() {
            for u in 0..k {
                let cu = c[i * k + u];
                grad[i * k + u] = if cu > 0.0 {
                    -(a_u * ws.pu[u].log2()
                        + a_xu * ws.pxu[x * k + u].log2()
                        + a_yu * ws.pyu[y * k + u].log2()
                        + a_xyu * (p * cu).log2())
                } else {
                    0.0
                };
            }
        }
    }

    /// Exponentiated-gradient step on every row.
    fn step(&self, c: &[f64], grad: &[f64], eta: f64, out: &mut [f64]) {
        let k = self.k;
        for i in 0..self.rows() {
            let row = &c[i * k..(i + 1) * k];
            let g = &grad[i * k..(i + 1) * k];
            let gmin = row
                .iter()
                .zip(g)
                .filter(|(&cu, _)| cu > 0.0)
                .map(|(_, &gu)| gu)
                .fold(f64::INFINITY, f64::min);
            let mut total = 0.0;
            for u in 0..k {
                let v = if row[u] > 0.0 {
                    row[u] * (-eta * (g[u] - gmin)).exp()
                } else {
                    0.0
                };
                // masses this small would underflow p * c and poison the logs
                let v = if v < MASS_FLOOR { 0.0 } else { v };
                out[i * k + u] = v;
                total += v;
            }
            if total > 0.0 && total.is_finite() {
                for v in &mut out[i * k..(i + 1) * k] {
                    *v /= total;
                }
            } else {
                out[i * k..(i + 1) * k].copy_from_slice(row);
            }
        }
    }

    /// Multiplicative descent on `form` from `c`. `step` carries the
    /// adapted step size across calls.
    pub fn descend(
        &self,
        form: &EntropyForm,
        c: &mut Vec<f64>,
        step: &mut f64,
        max_iters: usize,
        tol: f64,
        ws: &mut Workspace,
    ) -> Descent {
        let mut grad = vec![0.0; c.len()];
        let mut trial = vec![0.0; c.len()];
        let mut value = self.value(form, c, ws);
        let mut small = 0;
        for _ in 0..max_iters {
            self.gradient(form, c, ws, &mut grad);
            let mut accepted = None;
            while *step > MIN_STEP {
                self.step(c, &grad, *step, &mut trial);
                let v = self.value(form, &trial, ws);
                if v < value {
                    accepted = Some(value - v);
                    value = v;
                    std::mem::swap(c, &mut trial);
                    *step = (*step * 1.5).min(MAX_STEP);
                    break;
                }
                *step *= 0.5;
            }
            match accepted {
                None => {
                    return Descent { converged: true }
                }
                Some(gain) if gain < tol => {
                    small += 1;
                    if small >= 3 {
                        return Descent { converged: true };
                    }
                }
                Some(_) => small = 0,
            }
            // ws holds the marginals of the accepted point
        }
        Descent { converged: false }
    }

    /// Zero out small entries row by row, keeping changes that do not
    /// worsen `form`.
    pub fn polish(&self, form: &EntropyForm, c: &mut [f64], ws: &mut Workspace) -> f64 {
        let k = self.k;
        let mut value = self.value(form, c, ws);
        for threshold in [1e-3, 1e-5, 1e-7, 1e-9] {
            let mut trial = c.to_vec();
            let mut changed = false;
            for i in 0..self.rows() {
                let row = &mut trial[i * k..(i + 1) * k];
                let max = row.iter().cloned().fold(0.0, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    if *v > 0.0 && *v < threshold && *v < max {
                        *v = 0.0;
                        changed = true;
                    }
                    total += *v;
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
            if changed {
                let v = self.value(form, &trial, ws);
                if v <= value {
                    value = v;
                    c.copy_from_slice(&trial);
                }
            }
        }
        value
    }
}
