//! Exact solutions for small instances.
//!
//! Every local maximizer of a quadratic over a box is stationary in the
//! variables that sit strictly inside their bounds. [`solve_exact`] therefore
//! enumerates all `3^N` assignments of each variable to its lower bound, its
//! upper bound or the free set, solves the stationarity system on the free
//! set and keeps the best feasible candidate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BoxQpInstance, SolutionVector};

pub const DEFAULT_N_LIMIT: usize = 12;
pub const GRID_N_LIMIT: usize = 4;

const PIVOT_RTOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoundStatus {
    AtLower,
    AtUpper,
    Free,
}

/// One assignment of every variable to a bound or the free set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActiveSetAssignment {
    pub status: Vec<BoundStatus>,
}

impl ActiveSetAssignment {
    /// Decodes `index` in base 3, first variable most significant, so that
    /// index order matches lexicographic order of the status vectors.
    pub fn from_index(index: u64, n: usize) -> Self {
        let mut status = vec![BoundStatus::AtLower; n];
        let mut rest = index;
        for slot in status.iter_mut().rev() {
            *slot = match rest % 3 {
                0 => BoundStatus::AtLower,
                1 => BoundStatus::AtUpper,
                _ => BoundStatus::Free,
            };
            rest /= 3;
        }
        Self { status }
    }

    pub fn count(n: usize) -> u64 {
        3u64.pow(n as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub solution: SolutionVector,
    pub assignment: ActiveSetAssignment,
    /// The free block was singular and the minimum-norm stationary point was used.
    pub degenerate: bool,
}

struct Candidate {
    x: Vec<f64>,
    objective: f64,
    degenerate: bool,
}

/// Solves `a·x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `false` when a pivot falls below `PIVOT_RTOL` times the max-norm of `a`.
fn lu_solve(a: &mut [f64], b: &mut [f64], m: usize) -> bool {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    let threshold = PIVOT_RTOL * scale;
    for col in 0..m {
        let (pivot_row, pivot_abs) =
            (col..m)
                .map(|r| (r, a[r * m + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_abs < threshold {
            return false;
        }
        if pivot_row != col {
            for k in 0..m {
                a.swap(col * m + k, pivot_row * m + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * m + col];
        for r in (col + 1)..m {
            let factor = a[r * m + col] / pivot;
            if factor != 0.0 {
                for k in col..m {
                    a[r * m + k] -= factor * a[col * m + k];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    for r in (0..m).rev() {
        let mut acc = b[r];
        for k in (r + 1)..m {
            acc -= a[r * m + k] * b[k];
        }
        b[r] = acc / a[r * m + r];
    }
    true
}

/// Minimum-norm solution of a singular symmetric system, if it is consistent.
fn min_norm_solve(a: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let mat = DMatrix::from_row_slice(m, m, a);
    let rhs = DVector::from_column_slice(b);
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let svd = mat.clone().svd(true, true);
    let x = svd.solve(&rhs, PIVOT_RTOL * scale).ok()?;
    let residual = (&mat * &x - &rhs).amax();
    let tol = 1e-9 * (rhs.amax() + scale * x.amax()).max(1.0);
    (residual <= tol).then(|| x.iter().copied().collect())
}

fn candidate(inst: &BoxQpInstance, assignment: &ActiveSetAssignment) -> Option<Candidate> {
    let n = inst.n();
    let (lower, upper) = (inst.lower(), inst.upper());
    let mut x = vec![0.0; n];
    let mut free = Vec::with_capacity(n);
    for (i, st) in assignment.status.iter().enumerate() {
        match st {
            BoundStatus::AtLower => x[i] = lower[i],
            BoundStatus::AtUpper => x[i] = upper[i],
            BoundStatus::Free => free.push(i),
        }
    }
    let mut degenerate = false;
    if !free.is_empty() {
        let m = free.len();
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        for (r, &i) in free.iter().enumerate() {
            for (k, &j) in free.iter().enumerate() {
                a[r * m + k] = inst.q_at(i, j);
            }
            let mut rhs = -inst.v()[i];
            for (j, st) in assignment.status.iter().enumerate() {
                if *st != BoundStatus::Free {
                    rhs -= inst.q_at(i, j) * x[j];
                }
            }
            b[r] = rhs;
        }
        let a_copy = a.clone();
        let b_copy = b.clone();
        let solved = if lu_solve(&mut a, &mut b, m) {
            b
        } else {
            degenerate = true;
            min_norm_solve(&a_copy, &b_copy, m)?
        };
        for (r, &i) in free.iter().enumerate() {
            let width = upper[i] - lower[i];
            let slack = 1e-9 * width;
            let xi = solved[r];
            if !(xi >= lower[i] - slack && xi <= upper[i] + slack) {
                return None;
            }
            x[i] = xi.clamp(lower[i], upper[i]);
        }
    }
    let objective = inst.objective_unchecked(&x);
    Some(Candidate {
        x,
        objective,
        degenerate,
    })
}

/// Global maximum by active-set enumeration; requires `inst.n() <= n_limit`.
///
/// Among assignments whose objectives tie within `1e-12`, the one with the
/// lexicographically smallest status vector wins.
pub fn solve_exact(inst: &BoxQpInstance, n_limit: usize) -> Result<ExactSolution> {
    let n = inst.n();
    if n > n_limit {
        return Err(Error::Capacity { n, limit: n_limit });
    }
    let total = ActiveSetAssignment::count(n);
    let feasible: Vec<(u64, f64)> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let a = ActiveSetAssignment::from_index(idx, n);
            candidate(inst, &a).map(|c| (idx, c.objective))
        })
        .collect();
    // the all-at-bounds assignments are always feasible
    let best = feasible
        .iter()
        .map(|&(_, f)| f)
        .fold(f64::NEG_INFINITY, f64::max);
    let (idx, _) = feasible
        .iter()
        .find(|&&(_, f)| f >= best - TIE_TOL)
        .copied()
        .expect("vertex assignments are always feasible");
    let assignment = ActiveSetAssignment::from_index(idx, n);
    let c = candidate(inst, &assignment).expect("candidate was feasible");
    Ok(ExactSolution {
        solution: SolutionVector {
            x: c.x,
            objective: c.objective,
        },
        assignment,
        degenerate: c.degenerate,
    })
}

/// Grid points of one coordinate: `m + 1` equally spaced values including both bounds.
fn axis(lo: f64, hi: f64, resolution: f64) -> (f64, usize) {
    let m = ((hi - lo) / resolution - 1e-9).ceil().max(1.0) as usize;
    ((hi - lo) / m as f64, m)
}

fn grid_value(lo: f64, step: f64, m: usize, k: usize) -> f64 {
    if k == m {
        lo + step * m as f64
    } else {
        lo + step * k as f64
    }
}

/// Best point of the regular grid with spacing at most `resolution`.
///
/// The leading `N − 1` coordinates are enumerated in lexicographic order;
/// along the last one the objective is a 1-D quadratic whose best grid point
/// is found in closed form (nearest grid points to the vertex when concave,
/// an endpoint otherwise), so the result is the exact grid maximum. Ties keep
/// the first point in enumeration order.
pub fn grid_search(inst: &BoxQpInstance, resolution: f64) -> Result<SolutionVector> {
    let n = inst.n();
    if n > GRID_N_LIMIT {
        return Err(Error::Capacity {
            n,
            limit: GRID_N_LIMIT,
        });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let grid = Grid::new(inst, resolution);
    let last = n - 1;
    let best = if n == 1 {
        let (k, value) = grid.best_last(inst.v()[0]);
        Best { value, ks: vec![k] }
    } else {
        // Split on the first coordinate; chunks are reduced in order.
        (0..=grid.axes[0].1)
            .into_par_iter()
            .map(|k0| {
                let mut search = Search::new(&grid);
                let t = grid.value(0, k0);
                search.ks[0] = k0;
                let mut lin = inst.v().to_vec();
                for (j, l) in lin.iter_mut().enumerate().skip(1) {
                    *l += inst.q_at(j, 0) * t;
                }
                let partial = (inst.v()[0] + 0.5 * inst.q_at(0, 0) * t) * t;
                search.descend(1, partial, &lin);
                search.best
            })
            .reduce(Best::none, |x, y| if y.value > x.value { y } else { x })
    };
    let x: Vec<f64> = (0..n)
        .map(|i| {
            if i == last {
                grid.last_value(best.ks[i])
            } else {
                grid.value(i, best.ks[i])
            }
        })
        .collect();
    inst.solution(x)
}

struct Grid<'a> {
    inst: &'a BoxQpInstance,
    /// `(step, m)` per coordinate; the axis has points `0..=m`.
    axes: Vec<(f64, usize)>,
    /// Range of `Σ_{i>j} Q_ji·x_i` over the box, per `j`.
    coupling: Vec<(f64, f64)>,
    /// No grid point does better than this.
    floor: f64,
}

#[derive(Clone)]
struct Best {
    value: f64,
    ks: Vec<usize>,
}

impl Best {
    fn none() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            ks: Vec::new(),
        }
    }
}

impl<'a> Grid<'a> {
    fn new(inst: &'a BoxQpInstance, resolution: f64) -> Self {
        let n = inst.n();
        let axes = (0..n)
            .map(|i| axis(inst.lower()[i], inst.upper()[i], resolution))
            .collect();
        let coupling = (0..n)
            .map(|j| {
                ((j + 1)..n).fold((0.0, 0.0), |(lo, hi), i| {
                    let (a, b) = (
                        inst.q_at(j, i) * inst.lower()[i],
                        inst.q_at(j, i) * inst.upper()[i],
                    );
                    (lo + a.min(b), hi + a.max(b))
                })
            })
            .collect();
        // every vertex is a grid point
        let floor = (0..1usize << n)
            .map(|mask| {
                let x: Vec<f64> = (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            inst.upper()[i]
                        } else {
                            inst.lower()[i]
                        }
                    })
                    .collect();
                inst.evaluate_objective(&x).unwrap_or(f64::NEG_INFINITY)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            inst,
            axes,
            coupling,
            floor,
        }
    }

    /// Upper bound on the objective contributed by coordinates `≥ d` over
    /// the continuous box, given the linear terms `lin`: each cross term is
    /// charged to its lower index and bounded by interval arithmetic.
    fn tail_bound(&self, d: usize, lin: &[f64]) -> f64 {
        let inst = self.inst;
        (d..inst.n())
            .map(|j| {
                let (lo, hi, a) = (inst.lower()[j], inst.upper()[j], inst.q_at(j, j));
                let (cmin, cmax) = self.coupling[j];
                // linear in the coupling term, so its extremes suffice
                [lin[j] + cmin, lin[j] + cmax]
                    .into_iter()
                    .map(|b| {
                        let h = |t: f64| (0.5 * a * t + b) * t;
                        let mut v = h(lo).max(h(hi));
                        if a < 0.0 {
                            v = v.max(h((-b / a).clamp(lo, hi)));
                        }
                        v
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum()
    }

    fn value(&self, i: usize, k: usize) -> f64 {
        let (step, m) = self.axes[i];
        grid_value(self.inst.lower()[i], step, m, k)
    }

    fn last_value(&self, k: usize) -> f64 {
        self.value(self.inst.n() - 1, k)
    }

    /// Best grid index along the last axis of `½·a·t² + b·t`, and its value.
    #[inline]
    fn best_last(&self, b: f64) -> (usize, f64) {
        let last = self.inst.n() - 1;
        let (lo, hi) = (self.inst.lower()[last], self.inst.upper()[last]);
        let (step, m) = self.axes[last];
        let a = self.inst.q_at(last, last);
        let eval = |k: usize| {
            let t = grid_value(lo, step, m, k);
            (0.5 * a * t + b) * t
        };
        let mut best = (0, eval(0));
        let mut consider = |k: usize| {
            let v = eval(k);
            if v > best.1 || (v == best.1 && k < best.0) {
                best = (k, v);
            }
        };
        consider(m);
        if a < 0.0 {
            let vertex = (-b / a).clamp(lo, hi);
            let k = (((vertex - lo) / step).floor() as usize).min(m);
            consider(k);
            consider((k + 1).min(m));
        }
        best
    }
}

struct Search<'g, 'a> {
    grid: &'g Grid<'a>,
    ks: Vec<usize>,
    best: Best,
}

impl<'g, 'a> Search<'g, 'a> {
    fn new(grid: &'g Grid<'a>) -> Self {
        Self {
            grid,
            ks: vec![0; grid.inst.n()],
            best: Best::none(),
        }
    }

    /// Coordinates `< d` are fixed; `partial` is their objective and
    /// `lin[j] = V_j + Σ_{i<d} Q_ji·x_i`.
    fn descend(&mut self, d: usize, partial: f64, lin: &[f64]) {
        let inst = self.grid.inst;
        let last = inst.n() - 1;
        if d == last {
            let (kl, tail) = self.grid.best_last(lin[last]);
            if partial + tail > self.best.value {
                self.ks[last] = kl;
                self.best = Best {
                    value: partial + tail,
                    ks: self.ks.clone(),
                };
            }
            return;
        }
        // Pruned nodes fall strictly below a value some grid point attains,
        // so neither the maximum nor a tie for it is skipped.
        let target = self.best.value.max(self.grid.floor);
        let bound = partial + self.grid.tail_bound(d, lin);
        if bound + 1e-9 * (1.0 + bound.abs() + target.abs()) < target {
            return;
        }
        let qdd = inst.q_at(d, d);
        let m = self.grid.axes[d].1;
        if d + 1 == last {
            let qld = inst.q_at(last, d);
            for k in 0..=m {
                let t = self.grid.value(d, k);
                let (kl, tail) = self.grid.best_last(lin[last] + qld * t);
                let value = partial + (lin[d] + 0.5 * qdd * t) * t + tail;
                if value > self.best.value {
                    self.ks[d] = k;
                    self.ks[last] = kl;
                    self.best = Best {
                        value,
                        ks: self.ks.clone(),
                    };
                }
            }
            return;
        }
        let mut next = lin.to_vec();
        for k in 0..=m {
            let t = self.grid.value(d, k);
            for (j, l) in next.iter_mut().enumerate().skip(d + 1) {
                *l = lin[j] + inst.q_at(j, d) * t;
            }
            self.ks[d] = k;
            self.descend(d + 1, partial + (lin[d] + 0.5 * qdd * t) * t, &next);
        }
    }
}

/// First-order conditions for a local maximizer over the box.
pub fn verify_kkt(inst: &BoxQpInstance, x: &[f64], tol: f64) -> bool {
    let Ok(grad) = inst.gradient(x) else {
        return false;
    };
    x.iter().enumerate().all(|(i, &xi)| {
        let (lo, hi) = (inst.lower()[i], inst.upper()[i]);
        let g = grad[i];
        if xi < lo || xi > hi {
            false
        } else if xi == lo {
            g <= tol
        } else if xi == hi {
            g >= -tol
        } else {
            g.abs() <= tol
        }
    })
}
