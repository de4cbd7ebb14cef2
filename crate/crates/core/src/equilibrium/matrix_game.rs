//! Zero-sum matrix games solved as a linear program.
//!
//! The payoff is shifted to be strictly positive and the column player's
//! program `max Σ y  s.t.  A y ≤ 1, y ≥ 0` is solved with a dense tableau
//! simplex. The slack basis is feasible at `y = 0`, so no phase one is
//! needed, and the row strategy is read off the final reduced costs.

use crate::error::{Error, Result};
use crate::game::ActionDistribution;

use super::argmax_first;

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 10_000;
/// Reduced-cost tolerance for the check against a fresh factorization.
const FRESH_EPS: f64 = 1e-14;
const MAX_REFACTORS: usize = 8;

/// Payoff matrix for the maximizing row player.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    payoff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_strategy: ActionDistribution,
    pub col_strategy: ActionDistribution,
    /// `max_i (M q)_i - min_j (pᵀ M)_j` for the returned strategies.
    pub duality_gap: f64,
}

impl MatrixGame {
    /// `payoff` is row-major.
    pub fn new(rows: usize, cols: usize, payoff: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || payoff.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix game with {} entries",
                payoff.len()
            )));
        }
        if let Some(x) = payoff.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("matrix game payoff ({x})")));
        }
        Ok(Self { rows, cols, payoff })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged payoff matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols + j]
    }

    /// `(min_j (pᵀ M)_j, max_i (M q)_i)`: what each strategy guarantees.
    pub fn guarantees(&self, p: &ActionDistribution, q: &ActionDistribution) -> (f64, f64) {
        let lower = (0..self.cols)
            .map(|j| (0..self.rows).map(|i| p.get(i) * self.at(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let upper = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * q.get(j)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        (lower, upper)
    }

    pub fn solve(&self, tol: f64) -> Result<MatrixGameSolution> {
        let (value, p, q) = if self.cols == 1 {
            let col: Vec<f64> = (0..self.rows).map(|i| self.at(i, 0)).collect();
            let i = argmax_first(&col);
            (col[i], ActionDistribution::dirac(self.rows, i), ActionDistribution::dirac(1, 0))
        } else if self.rows == 1 {
            let neg: Vec<f64> = (0..self.cols).map(|j| -self.at(0, j)).collect();
            let j = argmax_first(&neg);
            (-neg[j], ActionDistribution::dirac(1, 0), ActionDistribution::dirac(self.cols, j))
        } else {
            let (value, mut p, q) = self.simplex()?;
            let (lower, upper) = self.guarantees(&p, &q);
            if !(upper - lower <= 2.0 * tol) {
                // Reduced costs lose accuracy on nearly tied columns; take the
                // row strategy as the primal solution of the transposed game.
                p = self.transposed_negated().simplex()?.2;
            }
            (value, p, q)
        };
        let (lower, upper) = self.guarantees(&p, &q);
        let gap = upper - lower;
        if !(gap <= 2.0 * tol) {
            return Err(Error::MatrixGame(format!(
                "duality gap {gap:e} exceeds 2*tol for a {}x{} game",
                self.rows, self.cols
            )));
        }
        Ok(MatrixGameSolution {
            value: value.clamp(lower, upper.max(lower)),
            row_strategy: p,
            col_strategy: q,
            duality_gap: gap.max(0.0),
        })
    }

    /// `-Mᵀ`: the same game with the roles of the players swapped.
    fn transposed_negated(&self) -> Self {
        let payoff = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| (i, j)))
            .map(|(i, j)| -self.at(i, j))
            .collect();
        Self { rows: self.cols, cols: self.rows, payoff }
    }

    /// Column player's LP `max Σy s.t. (M + shift) y ≤ 1, y ≥ 0`. The row
    /// strategy is read from the duals of the final basis.
    fn simplex(&self) -> Result<(f64, ActionDistribution, ActionDistribution)> {
        let (m, n) = (self.rows, self.cols);
        let min = self.payoff.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = 1.0 - min;
        // column k of [A | I]
        let column = |k: usize, i: usize| {
            if k < n {
                self.at(i, k) + shift
            } else if k - n == i {
                1.0
            } else {
                0.0
            }
        };
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut pivots = 0;
        for _ in 0..MAX_REFACTORS {
            let mut tab = Tableau::from_basis(m, n, &basis, column)
                .ok_or_else(|| Error::MatrixGame("singular basis".into()))?;
            pivots += tab.run(&mut basis)?;
            if pivots > MAX_PIVOTS {
                return Err(Error::MatrixGame("pivot limit reached".into()));
            }
            // The tableau accumulates rounding over the pivots; re-check
            // optimality against a fresh factorization and resume if needed.
            let (_, dual) = basis_solution(m, n, &basis, column)
                .ok_or_else(|| Error::MatrixGame("singular basis".into()))?;
            let improvable = (0..n).any(|j| (0..m).map(|i| dual[i] * column(j, i)).sum::<f64>() - 1.0 < -FRESH_EPS)
                || dual.iter().any(|&w| w < -FRESH_EPS);
            if !improvable {
                break;
            }
        }
        let (primal, x) =
            basis_solution(m, n, &basis, column).ok_or_else(|| Error::MatrixGame("singular basis".into()))?;
        let mut y = vec![0.0; n];
        for (i, &k) in basis.iter().enumerate() {
            if k < n {
                y[k] = primal[i].max(0.0);
            }
        }
        let z: f64 = y.iter().sum();
        if !(z > 0.0) {
            return Err(Error::MatrixGame(format!("degenerate optimum {z}")));
        }
        let value = 1.0 / z - shift;
        Ok((value, ActionDistribution::from_solver(x), ActionDistribution::from_solver(y)))
    }
}

/// Primal basic values (`B x = 1`) and duals (`Bᵀ w = c_B`) of a basis;
/// structural columns are those below `n`.
fn basis_solution(m: usize, n: usize, basis: &[usize], column: impl Fn(usize, usize) -> f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let b: Vec<f64> = (0..m).flat_map(|i| basis.iter().map(|&k| column(k, i)).collect::<Vec<_>>()).collect();
    let costs: Vec<f64> = basis.iter().map(|&k| if k < n { 1.0 } else { 0.0 }).collect();
    Some((lu_solve(&b, m, false, &vec![1.0; m])?, lu_solve(&b, m, true, &costs)?))
}

/// Dense tableau `[B⁻¹A | B⁻¹ | B⁻¹1]` with the reduced-cost row.
struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    tab: Vec<f64>,
    obj: Vec<f64>,
}

impl Tableau {
    fn from_basis(m: usize, n: usize, basis: &[usize], column: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let width = n + m + 1;
        let b: Vec<f64> = (0..m).flat_map(|i| basis.iter().map(|&k| column(k, i)).collect::<Vec<_>>()).collect();
        let mut tab = vec![0.0; m * width];
        for k in 0..width {
            let col: Vec<f64> = (0..m).map(|i| if k == n + m { 1.0 } else { column(k, i) }).collect();
            let solved = if basis.iter().all(|&j| j >= n) && basis.iter().enumerate().all(|(i, &j)| j == n + i) {
                col
            } else {
                lu_solve(&b, m, false, &col)?
            };
            for i in 0..m {
                tab[i * width + k] = solved[i];
            }
        }
        let mut obj = vec![0.0; width];
        for k in 0..width {
            let cb: f64 = basis.iter().enumerate().filter(|&(_, &j)| j < n).map(|(i, _)| tab[i * width + k]).sum();
            obj[k] = cb - if k < n { 1.0 } else { 0.0 };
        }
        for &j in basis {
            obj[j] = 0.0;
        }
        Some(Self { m, n, width, tab, obj })
    }

    /// Pivots with Bland's rule until no reduced cost is negative.
    fn run(&mut self, basis: &mut [usize]) -> Result<usize> {
        let (m, width) = (self.m, self.width);
        let rhs = width - 1;
        let mut pivots = 0;
        loop {
            let Some(enter) = (0..self.n + m).find(|&j| self.obj[j] < -PIVOT_EPS) else { break };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.tab[i * width + enter];
                if a > PIVOT_EPS {
                    let ratio = self.tab[i * width + rhs] / a;
                    leave = match leave {
                        Some((k, best)) if !(ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[k])) => {
                            Some((k, best))
                        }
                        _ => Some((i, ratio)),
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::MatrixGame("unbounded program".into()));
            };
            let piv = self.tab[r * width + enter];
            for x in &mut self.tab[r * width..(r + 1) * width] {
                *x /= piv;
            }
            let (before, rest) = self.tab.split_at_mut(r * width);
            let (prow, after) = rest.split_at_mut(width);
            for row in before.chunks_exact_mut(width).chain(after.chunks_exact_mut(width)) {
                let f = row[enter];
                if f != 0.0 {
                    for (x, &p) in row.iter_mut().zip(prow.iter()) {
                        *x -= f * p;
                    }
                }
            }
            let f = self.obj[enter];
            for (x, &p) in self.obj.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            basis[r] = enter;
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(Error::MatrixGame("pivot limit reached".into()));
            }
        }
        Ok(pivots)
    }
}

/// Solves `B v = rhs` (or `Bᵀ v = rhs`) for a row-major `n × n` matrix by
/// Gaussian elimination with partial pivoting. `None` when singular.
fn lu_solve(b: &[f64], n: usize, transpose: bool, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut a: Vec<f64> = if transpose {
        (0..n).flat_map(|i| (0..n).map(move |j| b[j * n + i])).collect()
    } else {
        b.to_vec()
    };
    let mut v = rhs.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-14 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            v.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[i * n + k] -= f * a[col * n + k];
                }
                v[i] -= f * v[col];
            }
        }
    }
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|k| a[i * n + k] * v[k]).sum();
        v[i] = (v[i] - tail) / a[i * n + i];
    }
    Some(v)
}

/// Solves `m` and checks the returned strategies certify the value within
/// `tol` on each side.
pub fn solve_matrix_game(m: &MatrixGame, tol: f64) -> Result<MatrixGameSolution> {
    m.solve(tol)
}
