//! Dense primal–dual interior point solver for small block SDPs.
//!
//! Primal: maximize `Σ_b tr[C_b X_b]` subject to `Σ_b tr[A_{i,b} X_b] = b_i`, `X ⪰ 0`.
//! Dual: minimize `bᵀy` subject to `Z = Σ_i y_i A_i − C ⪰ 0`.
//!
//! Complex Hermitian blocks are mapped to real symmetric blocks of twice the
//! size via `H ↦ [[Re H, −Im H], [Im H, Re H]]/2`, so `tr[A X]` is preserved.
//! Newton directions use the HKM scaling with a Mehrotra predictor–corrector.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{PurifyError, Result};
use crate::tensor::{ComplexMatrix, SubsystemShape, C64};

/// Largest complex block dimension accepted by the solver.
pub const MAX_BLOCK_DIM: usize = 128;

/// Residual bound an `Optimal` solution must meet.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Relative duality gap an `Optimal` solution must meet.
pub const GAP_TOL: f64 = 1e-7;

/// One nonzero entry of a block-diagonal Hermitian matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

/// `Σ_b tr[A_b X_b] = rhs`, with `A` stored as a sparse list of entries
/// covering both triangles.
#[derive(Clone, Debug, Default)]
pub struct LinearConstraint {
    pub entries: Vec<BlockEntry>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(rhs: f64) -> Self {
        Self {
            entries: Vec::new(),
            rhs,
        }
    }

    pub fn push(&mut self, block: usize, row: usize, col: usize, value: C64) {
        self.entries.push(BlockEntry {
            block,
            row,
            col,
            value,
        });
    }

    /// Appends every nonzero entry of a dense block.
    pub fn add_dense(&mut self, block: usize, m: &DMatrix<C64>) {
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.norm_sqr() > 0.0 {
                    self.push(block, r, c, v);
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    cost: Vec<DMatrix<C64>>,
    constraints: Vec<LinearConstraint>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(PurifyError::InvalidParameter(
                "an SDP needs at least one block".into(),
            ));
        }
        for &n in &block_dims {
            if n == 0 || n > MAX_BLOCK_DIM {
                return Err(PurifyError::BudgetExceeded(format!(
                    "block dimension {n} outside 1..={MAX_BLOCK_DIM}"
                )));
            }
        }
        let cost = block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        Ok(Self {
            block_dims,
            cost,
            constraints: Vec::new(),
        })
    }

    pub fn set_cost(&mut self, block: usize, c: DMatrix<C64>) -> Result<()> {
        let n = *self
            .block_dims
            .get(block)
            .ok_or(PurifyError::SubsystemOutOfRange {
                index: block,
                count: self.block_dims.len(),
            })?;
        if c.nrows() != n || c.ncols() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: c.nrows(),
            });
        }
        let deviation = (&c - c.adjoint()).norm();
        if deviation > 1e-10 * (1.0 + c.norm()) {
            return Err(PurifyError::NotHermitian { deviation });
        }
        self.cost[block] = c;
        Ok(())
    }

    /// Validates block indices and Hermiticity; duplicate entries are summed.
    pub fn add_constraint(&mut self, constraint: LinearConstraint) -> Result<()> {
        let mut merged: HashMap<(usize, usize, usize), C64> = HashMap::new();
        for e in &constraint.entries {
            let n = *self
                .block_dims
                .get(e.block)
                .ok_or(PurifyError::SubsystemOutOfRange {
                    index: e.block,
                    count: self.block_dims.len(),
                })?;
            if e.row >= n || e.col >= n {
                return Err(PurifyError::DimensionMismatch {
                    expected: n,
                    found: e.row.max(e.col) + 1,
                });
            }
            *merged.entry((e.block, e.row, e.col)).or_default() += e.value;
        }
        let mut deviation: f64 = 0.0;
        for (&(b, r, c), v) in &merged {
            let mirror = merged.get(&(b, c, r)).copied().unwrap_or_default();
            deviation = deviation.max((v - mirror.conj()).norm());
        }
        if deviation > 1e-10 {
            return Err(PurifyError::NotHermitian { deviation });
        }
        let mut entries: Vec<BlockEntry> = merged
            .into_iter()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|((block, row, col), value)| BlockEntry {
                block,
                row,
                col,
                value,
            })
            .collect();
        entries.sort_by_key(|e| (e.block, e.col, e.row));
        self.constraints.push(LinearConstraint {
            entries,
            rhs: constraint.rhs,
        });
        Ok(())
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn cost(&self) -> &[DMatrix<C64>] {
        &self.cost
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    /// `Σ_b tr[C_b X_b]`.
    pub fn objective(&self, x: &[DMatrix<C64>]) -> f64 {
        self.cost
            .iter()
            .zip(x)
            .map(|(c, x)| c.component_mul(&x.transpose()).sum().re)
            .sum()
    }

    /// `Σ_b tr[A_{i,b} X_b]`.
    pub fn constraint_value(&self, i: usize, x: &[DMatrix<C64>]) -> f64 {
        self.constraints[i]
            .entries
            .iter()
            .map(|e| (e.value * x[e.block][(e.col, e.row)]).re)
            .sum()
    }

    /// `Σ_i y_i A_i − C`, block by block.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<DMatrix<C64>> {
        let mut z: Vec<DMatrix<C64>> = self.cost.iter().map(|c| -c).collect();
        for (con, &yi) in self.constraints.iter().zip(y) {
            for e in &con.entries {
                z[e.block][(e.row, e.col)] += e.value * yi;
            }
        }
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::MaxIterations => "max_iter",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<DMatrix<C64>>,
    pub y: Vec<f64>,
    /// `Σ y_i A_i − C` evaluated exactly from `y`.
    pub z: Vec<DMatrix<C64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal − dual| / (1 + |primal| + |dual|)`.
    pub gap: f64,
    /// Largest absolute equality residual.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Block `b` of the primal solution as a matrix on the given shape.
    pub fn primal_block(&self, b: usize, shape: SubsystemShape) -> Result<ComplexMatrix> {
        ComplexMatrix::new(shape, self.x[b].clone())
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Internal stopping target for residuals and relative gap.
    pub target: f64,
    /// Step fraction to the boundary of the cone.
    pub step_fraction: f64,
    /// Iterate norm beyond which the problem is declared infeasible.
    pub divergence: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 120,
            target: 1e-9,
            step_fraction: 0.95,
            divergence: 1e10,
        }
    }
}

type Triplets = Vec<(usize, usize, f64)>;

/// Real-embedded problem data.
struct RealProblem {
    dims: Vec<usize>,
    c: Vec<DMatrix<f64>>,
    a: Vec<Vec<Triplets>>,
    b: DVector<f64>,
}

impl RealProblem {
    fn embed(p: &SdpProblem) -> Self {
        let dims: Vec<usize> = p.block_dims.iter().map(|n| 2 * n).collect();
        let c = p
            .cost
            .iter()
            .map(|m| {
                let n = m.nrows();
                DMatrix::from_fn(2 * n, 2 * n, |r, s| {
                    0.5 * embedded(m[(r % n, s % n)], r / n, s / n)
                })
            })
            .collect();
        let a = p
            .constraints
            .iter()
            .map(|con| {
                let mut blocks: Vec<Triplets> = vec![Vec::new(); dims.len()];
                for e in &con.entries {
                    let n = p.block_dims[e.block];
                    for (qr, qc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let v = 0.5 * embedded(e.value, qr, qc);
                        if v != 0.0 {
                            blocks[e.block].push((e.row + qr * n, e.col + qc * n, v));
                        }
                    }
                }
                blocks
            })
            .collect();
        let b = DVector::from_iterator(p.constraints.len(), p.constraints.iter().map(|c| c.rhs));
        Self { dims, c, a, b }
    }

    fn m(&self) -> usize {
        self.a.len()
    }

    fn apply_a(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a.iter().map(|blocks| {
                blocks
                    .iter()
                    .zip(x)
                    .map(|(t, xb)| t.iter().map(|&(r, c, v)| v * xb[(r, c)]).sum::<f64>())
                    .sum()
            }),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (blocks, &yi) in self.a.iter().zip(y.iter()) {
            for (t, ob) in blocks.iter().zip(out.iter_mut()) {
                for &(r, c, v) in t {
                    ob[(r, c)] += v * yi;
                }
            }
        }
        out
    }

    /// `M_ij = tr[A_i X A_j Z⁻¹]`.
    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.m();
        let mut schur = DMatrix::zeros(m, m);
        for j in 0..m {
            for (b, t) in self.a[j].iter().enumerate() {
                if t.is_empty() {
                    continue;
                }
                let n = self.dims[b];
                // G = X A_j Z⁻¹, built from rank-one terms when A_j is sparse.
                let g = if t.len() < n {
                    let mut g = DMatrix::zeros(n, n);
                    for &(p, q, v) in t {
                        g.ger(v, &x[b].column(p), &zinv[b].row(q).transpose(), 1.0);
                    }
                    g
                } else {
                    let mut dense = DMatrix::zeros(n, n);
                    for &(p, q, v) in t {
                        dense[(p, q)] += v;
                    }
                    &x[b] * dense * &zinv[b]
                };
                for i in 0..m {
                    let s: f64 = self.a[i][b].iter().map(|&(k, l, v)| v * g[(l, k)]).sum();
                    schur[(i, j)] += s;
                }
            }
        }
        schur.fill_lower_triangle_with_upper_triangle();
        schur
    }

    fn gram(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut by_position: HashMap<(usize, usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for (i, blocks) in self.a.iter().enumerate() {
            for (b, t) in blocks.iter().enumerate() {
                for &(r, c, v) in t {
                    by_position.entry((b, r, c)).or_default().push((i, v));
                }
            }
        }
        let mut g = DMatrix::zeros(m, m);
        for list in by_position.values() {
            for &(i, vi) in list {
                for &(j, vj) in list {
                    g[(i, j)] += vi * vj;
                }
            }
        }
        g
    }
}

/// Entry of the real embedding in quadrant `(qr, qc)`.
fn embedded(z: C64, qr: usize, qc: usize) -> f64 {
    match (qr, qc) {
        (0, 0) | (1, 1) => z.re,
        (0, 1) => -z.im,
        _ => z.im,
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    inner(a, a).sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest `α ≤ 1` keeping `X + α dX ⪰ 0`, or `None` when `X` is not positive definite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(x.clone())?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let w = &linv * dx * linv.transpose();
    let lmin = SymmetricEigen::new(w).eigenvalues.min();
    Some(if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    })
}

fn step_length(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    x.iter()
        .zip(dx)
        .map(|(xb, db)| max_step(xb, db).unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Relative duality gap `|p − d| / (1 + |p| + |d|)`.
fn relative_gap(p: f64, d: f64) -> f64 {
    (p - d).abs() / (1.0 + p.abs() + d.abs())
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
}

pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    let rp_data = RealProblem::embed(problem);
    let m = rp_data.m();
    if m > 0 {
        let gram = rp_data.gram();
        let eig = SymmetricEigen::new(gram).eigenvalues;
        if eig.min() <= 1e-10 * eig.max().max(1e-300) {
            return Err(PurifyError::RankDeficient);
        }
    }
    let real = rp_data;
    let big_n: usize = real.dims.iter().sum();
    let nf = big_n as f64;

    let a_norms: Vec<f64> = real
        .a
        .iter()
        .map(|blocks| {
            blocks
                .iter()
                .flatten()
                .map(|t| t.2 * t.2)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let c_norm = frob(&real.c);
    let b_norm = real.b.norm();
    let mut xi = 10f64.max(nf.sqrt());
    let mut eta = 10f64.max(nf.sqrt()).max(c_norm);
    for (i, &an) in a_norms.iter().enumerate() {
        xi = xi.max(nf * (1.0 + real.b[i].abs()) / (1.0 + an));
        eta = eta.max(an);
    }
    let mut x: Vec<DMatrix<f64>> = real
        .dims
        .iter()
        .map(|&n| DMatrix::identity(n, n) * xi)
        .collect();
    let mut z: Vec<DMatrix<f64>> = real
        .dims
        .iter()
        .map(|&n| DMatrix::identity(n, n) * eta)
        .collect();
    let mut y = DVector::zeros(m);

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut stalls = 0;
    for iter in 0..=options.max_iterations {
        iterations = iter;
        let rp = &real.b - real.apply_a(&x);
        let aty = real.apply_at(&y);
        let rd: Vec<DMatrix<f64>> = aty
            .iter()
            .zip(&z)
            .zip(&real.c)
            .map(|((a, z), c)| a - z - c)
            .collect();
        let pobj = inner(&real.c, &x);
        let dobj = real.b.dot(&y);
        let mu = inner(&x, &z) / nf;
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = frob(&rd) / (1.0 + c_norm);
        let gap = relative_gap(pobj, dobj).max(mu * nf / (1.0 + pobj.abs() + dobj.abs()));
        if pinf <= options.target && dinf <= options.target && gap <= options.target {
            status = SdpStatus::Optimal;
            break;
        }
        if frob(&x) > options.divergence
            || y.norm() > options.divergence
            || frob(&z) > options.divergence
        {
            status = SdpStatus::Infeasible;
            break;
        }
        if iter == options.max_iterations || stalls >= 5 {
            break;
        }

        let zinv: Vec<DMatrix<f64>> = match z
            .iter()
            .map(|zb| Cholesky::new(zb.clone()).map(|c| c.inverse()))
            .collect()
        {
            Some(v) => v,
            None => break,
        };
        let schur = real.schur(&x, &zinv);
        let factor = Cholesky::new(schur.clone());
        let lu = factor.is_none().then(|| schur.clone().lu());
        let solve_m = |rhs: DVector<f64>| -> Option<DVector<f64>> {
            match (&factor, &lu) {
                (Some(c), _) => Some(c.solve(&rhs)),
                (None, Some(lu)) => lu.solve(&rhs),
                _ => None,
            }
        };

        let direction = |target: f64, corr: Option<&[DMatrix<f64>]>| -> Option<Direction> {
            let base: Vec<DMatrix<f64>> = (0..x.len())
                .map(|b| {
                    let mut v = &zinv[b] * target - &x[b] - &x[b] * &rd[b] * &zinv[b];
                    if let Some(c) = corr {
                        v -= &c[b];
                    }
                    v
                })
                .collect();
            let rhs = real.apply_a(&base) - &rp;
            let dy = solve_m(rhs)?;
            let atdy = real.apply_at(&dy);
            let dz: Vec<DMatrix<f64>> = atdy.iter().zip(&rd).map(|(a, r)| a + r).collect();
            let dx = (0..x.len())
                .map(|b| {
                    let mut d = &base[b] - &x[b] * &atdy[b] * &zinv[b];
                    symmetrize(&mut d);
                    d
                })
                .collect();
            Some(Direction { dx, dy, dz })
        };

        let Some(pred) = direction(0.0, None) else {
            break;
        };
        let ap = step_length(&x, &pred.dx).min(1.0);
        let ad = step_length(&z, &pred.dz).min(1.0);
        let x_aff: Vec<DMatrix<f64>> = x.iter().zip(&pred.dx).map(|(a, d)| a + d * ap).collect();
        let z_aff: Vec<DMatrix<f64>> = z.iter().zip(&pred.dz).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&x_aff, &z_aff) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let corr: Vec<DMatrix<f64>> = (0..x.len())
            .map(|b| &pred.dx[b] * &pred.dz[b] * &zinv[b])
            .collect();
        let Some(dir) = direction(sigma * mu, Some(&corr)) else {
            break;
        };
        let ap = (options.step_fraction * step_length(&x, &dir.dx)).min(1.0);
        let ad = (options.step_fraction * step_length(&z, &dir.dz)).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        for b in 0..x.len() {
            x[b] += &dir.dx[b] * ap;
            z[b] += &dir.dz[b] * ad;
            symmetrize(&mut z[b]);
        }
        y += &dir.dy * ad;
    }

    let x_complex: Vec<DMatrix<C64>> = x
        .iter()
        .zip(&problem.block_dims)
        .map(|(xb, &n)| {
            DMatrix::from_fn(n, n, |r, c| {
                C64::new(
                    0.5 * (xb[(r, c)] + xb[(r + n, c + n)]),
                    0.5 * (xb[(r + n, c)] - xb[(r, c + n)]),
                )
            })
        })
        .collect();
    let y_vec: Vec<f64> = y.iter().copied().collect();
    let z_complex = problem.dual_slack(&y_vec);
    let primal_objective = problem.objective(&x_complex);
    let dual_objective: f64 = problem
        .constraints
        .iter()
        .zip(&y_vec)
        .map(|(c, yi)| c.rhs * yi)
        .sum();
    let primal_residual = (0..problem.constraints.len())
        .map(|i| (problem.constraint_value(i, &x_complex) - problem.constraints[i].rhs).abs())
        .fold(0.0, f64::max);
    let final_rd = {
        let aty = real.apply_at(&y);
        let rd: Vec<DMatrix<f64>> = aty
            .iter()
            .zip(&z)
            .zip(&real.c)
            .map(|((a, z), c)| a - z - c)
            .collect();
        frob(&rd) / (1.0 + c_norm)
    };
    let gap = relative_gap(primal_objective, dual_objective);
    if status == SdpStatus::MaxIterations
        && primal_residual <= FEASIBILITY_TOL
        && final_rd <= FEASIBILITY_TOL
        && gap <= GAP_TOL
    {
        status = SdpStatus::Optimal;
    }
    Ok(SdpSolution {
        x: x_complex,
        y: y_vec,
        z: z_complex,
        primal_objective,
        dual_objective,
        gap,
        primal_residual,
        dual_residual: final_rd,
        status,
        iterations,
    })
}
