//! Fidelity and probability SDPs over Choi operators of CPTN purification maps.
//!
//! Variable blocks are the protocol Choi operator `J` on `Aⁿ ⊗ A` (input first)
//! and a slack `S` on `Aⁿ` encoding `tr_A J ⪯ I` as `tr_A J + S = I`.

use rayon::prelude::*;

use crate::channels::{moment_operators, ChoiOperator, MomentOperators, NoiseChannel};
use crate::error::{PurifyError, Result};
use crate::tensor::{kron, max_eigenvalue, ComplexMatrix, SubsystemShape, C64};

use super::solver::{solve, LinearConstraint, SdpProblem, SdpSolution, SdpStatus, SolverOptions};

/// Largest `d^{n+1}` for which the purification SDPs are built.
pub const SDP_BUDGET: usize = 81;

/// Eigenvalue slack allowed when checking dual feasibility.
pub const DUAL_TOL: f64 = 1e-9;

/// The "sufficiently large" multiplier used for the probability-SDP dual.
pub const LARGE_MULTIPLIER: f64 = 1e6;

const J_BLOCK: usize = 0;
const S_BLOCK: usize = 1;

fn check_budget(d: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(PurifyError::InvalidParameter("n must be ≥ 1".into()));
    }
    match d.checked_pow(n as u32 + 1) {
        Some(x) if x <= SDP_BUDGET => Ok(()),
        _ => Err(PurifyError::BudgetExceeded(format!(
            "d^(n+1) = {d}^{} exceeds {SDP_BUDGET}",
            n + 1
        ))),
    }
}

/// Appends `tr[(E_k ⊗ I_d) J] + tr[E_k S] = tr[E_k]` for an orthonormal
/// Hermitian basis `{E_k}` of operators on `Aⁿ`.
fn add_cptn_constraints(problem: &mut SdpProblem, din: usize, d: usize) -> Result<()> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut push_pair = |entries: &[(usize, usize, C64)], rhs: f64| -> Result<()> {
        let mut con = LinearConstraint::new(rhs);
        for &(k, l, v) in entries {
            for a in 0..d {
                con.push(J_BLOCK, k * d + a, l * d + a, v);
            }
            con.push(S_BLOCK, k, l, v);
        }
        problem.add_constraint(con)
    };
    for k in 0..din {
        push_pair(&[(k, k, C64::new(1.0, 0.0))], 1.0)?;
    }
    for k in 0..din {
        for l in k + 1..din {
            push_pair(&[(k, l, C64::new(h, 0.0)), (l, k, C64::new(h, 0.0))], 0.0)?;
            push_pair(&[(k, l, C64::new(0.0, h)), (l, k, C64::new(0.0, -h))], 0.0)?;
        }
    }
    Ok(())
}

fn base_problem(d: usize, n: usize) -> Result<SdpProblem> {
    let din = d.pow(n as u32);
    SdpProblem::new(vec![din * d, din])
}

/// Maximize `tr[J Q^{T_{Aⁿ}}]/p` subject to `tr[J R^{T_{Aⁿ}}] = p` and CPTN constraints.
pub fn build_fidelity_sdp(ch: &NoiseChannel, n: usize, p: f64) -> Result<SdpProblem> {
    check_budget(ch.dim(), n)?;
    let moments = moment_operators(ch, n)?;
    fidelity_sdp_from_moments(&moments, p)
}

fn fidelity_sdp_from_moments(moments: &MomentOperators, p: f64) -> Result<SdpProblem> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(PurifyError::InvalidParameter(format!(
            "success probability {p} outside (0, 1]"
        )));
    }
    let (d, n) = (moments.d, moments.n);
    let mut problem = base_problem(d, n)?;
    problem.set_cost(J_BLOCK, moments.q_transposed().data() / C64::new(p, 0.0))?;
    let mut prob = LinearConstraint::new(p);
    prob.add_dense(J_BLOCK, moments.r_transposed().data());
    problem.add_constraint(prob)?;
    add_cptn_constraints(&mut problem, d.pow(n as u32), d)?;
    Ok(problem)
}

/// Maximize `tr[J R^{T_{Aⁿ}}]` subject to `tr[J (Q^{T_{Aⁿ}} − f R^{T_{Aⁿ}})] = 0` and CPTN constraints.
pub fn build_probability_sdp(ch: &NoiseChannel, n: usize, f: f64) -> Result<SdpProblem> {
    check_budget(ch.dim(), n)?;
    let moments = moment_operators(ch, n)?;
    probability_sdp_from_moments(&moments, f)
}

fn probability_sdp_from_moments(moments: &MomentOperators, f: f64) -> Result<SdpProblem> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(PurifyError::InvalidParameter(format!(
            "fidelity {f} outside (0, 1]"
        )));
    }
    let (d, n) = (moments.d, moments.n);
    let rt = moments.r_transposed();
    let mut problem = base_problem(d, n)?;
    problem.set_cost(J_BLOCK, rt.data().clone())?;
    let mut level = LinearConstraint::new(0.0);
    level.add_dense(J_BLOCK, (&moments.q_transposed() - &rt.scale(f)).data());
    problem.add_constraint(level)?;
    add_cptn_constraints(&mut problem, d.pow(n as u32), d)?;
    Ok(problem)
}

/// Dual variables `(x, Y)` in the form used by the optimality proofs.
#[derive(Clone, Debug)]
pub struct DualCertificate {
    pub x: f64,
    pub y_matrix: ComplexMatrix,
    pub objective: f64,
}

/// Outcome of checking a dual certificate by eigenvalues.
#[derive(Clone, Debug)]
pub struct DualReport {
    /// Largest eigenvalue of the operator that must be `⪯ 0`.
    pub constraint_max_eig: f64,
    /// Largest eigenvalue of `Y`.
    pub y_max_eig: f64,
    pub objective: f64,
    pub feasible: bool,
}

/// Solved purification SDP with the primal Choi operator and the dual certificate.
#[derive(Clone, Debug)]
pub struct PurificationSdpResult {
    pub value: f64,
    pub choi: ChoiOperator,
    pub certificate: DualCertificate,
    pub solution: SdpSolution,
}

impl PurificationSdpResult {
    fn assemble(solution: SdpSolution, d: usize, n: usize, x: f64, y_scale: f64) -> Result<Self> {
        let choi_shape = SubsystemShape::uniform(d, n + 1)?;
        let choi = ChoiOperator {
            matrix: ComplexMatrix::new(choi_shape, solution.x[J_BLOCK].clone())?.hermitian_part(),
            input_dim: d.pow(n as u32),
            output_dim: d,
        };
        let y_matrix =
            ComplexMatrix::new(SubsystemShape::uniform(d, n)?, solution.z[S_BLOCK].clone())?
                .scale(y_scale)
                .hermitian_part();
        let certificate = DualCertificate {
            x,
            y_matrix,
            objective: solution.dual_objective,
        };
        Ok(Self {
            value: solution.primal_objective,
            choi,
            certificate,
            solution,
        })
    }
}

/// Optimal universal fidelity at success probability `p`.
pub fn solve_fidelity(ch: &NoiseChannel, n: usize, p: f64) -> Result<PurificationSdpResult> {
    let problem = build_fidelity_sdp(ch, n, p)?;
    let solution = solve(&problem, &SolverOptions::default())?;
    // Solver dual: y₀ on the probability row, W = Z_S on the slack block.
    // The proof-form dual is x = −p·y₀, Y = −p·W.
    let x = -p * solution.y[0];
    PurificationSdpResult::assemble(solution, ch.dim(), n, x, -p)
}

/// Optimal universal success probability at fidelity `f`.
pub fn solve_probability(ch: &NoiseChannel, n: usize, f: f64) -> Result<PurificationSdpResult> {
    let problem = build_probability_sdp(ch, n, f)?;
    let solution = solve(&problem, &SolverOptions::default())?;
    let x = -solution.y[0];
    PurificationSdpResult::assemble(solution, ch.dim(), n, x, -1.0)
}

fn lift(y: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    Ok(kron(
        y,
        &ComplexMatrix::identity(SubsystemShape::uniform(d, 1)?),
    ))
}

fn report(constraint: &ComplexMatrix, y: &ComplexMatrix, objective: f64) -> Result<DualReport> {
    let constraint_max_eig = max_eigenvalue(&constraint.hermitian_part())?;
    let y_max_eig = max_eigenvalue(&y.hermitian_part())?;
    Ok(DualReport {
        constraint_max_eig,
        y_max_eig,
        objective,
        feasible: constraint_max_eig <= DUAL_TOL && y_max_eig <= DUAL_TOL,
    })
}

/// Checks `Qᵀ + x Rᵀ + Y ⊗ I ⪯ 0`, `Y ⪯ 0`; the objective is `−x − tr[Y]/p`.
pub fn check_fidelity_dual(
    ch: &NoiseChannel,
    n: usize,
    p: f64,
    cert: &DualCertificate,
) -> Result<DualReport> {
    check_budget(ch.dim(), n)?;
    let m = moment_operators(ch, n)?;
    let op = &(&m.q_transposed() + &m.r_transposed().scale(cert.x)) + &lift(&cert.y_matrix, m.d)?;
    report(&op, &cert.y_matrix, -cert.x - cert.y_matrix.trace().re / p)
}

/// Checks `(1 − x f) Rᵀ + x Qᵀ + Y ⊗ I ⪯ 0`, `Y ⪯ 0`; the objective is `−tr[Y]`.
pub fn check_probability_dual(
    ch: &NoiseChannel,
    n: usize,
    f: f64,
    cert: &DualCertificate,
) -> Result<DualReport> {
    check_budget(ch.dim(), n)?;
    let m = moment_operators(ch, n)?;
    let op = &(&m.r_transposed().scale(1.0 - cert.x * f) + &m.q_transposed().scale(cert.x))
        + &lift(&cert.y_matrix, m.d)?;
    report(&op, &cert.y_matrix, -cert.y_matrix.trace().re)
}

/// One point of a fidelity–probability tradeoff curve.
#[derive(Clone, Debug)]
pub struct TradeoffPoint {
    pub p: f64,
    pub fidelity: Option<f64>,
    pub status: Option<SdpStatus>,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

/// Solves the fidelity SDP at every grid probability; failures are recorded per point.
pub fn sweep_tradeoff(ch: &NoiseChannel, n: usize, p_grid: &[f64]) -> Result<Vec<TradeoffPoint>> {
    check_budget(ch.dim(), n)?;
    let moments = moment_operators(ch, n)?;
    let mut points: Vec<TradeoffPoint> = p_grid
        .par_iter()
        .map(|&p| {
            let outcome = fidelity_sdp_from_moments(&moments, p)
                .and_then(|prob| solve(&prob, &SolverOptions::default()));
            match outcome {
                Ok(sol) => TradeoffPoint {
                    p,
                    fidelity: Some(sol.primal_objective),
                    status: Some(sol.status),
                    gap: Some(sol.gap),
                    error: None,
                },
                Err(e) => TradeoffPoint {
                    p,
                    fidelity: None,
                    status: None,
                    gap: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    points.sort_by(|a, b| a.p.total_cmp(&b.p));
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{golden_point, EigenSpectrum, PurificationPoint};
    use crate::symgroup::{sym_dim, symmetric_projector};

    fn golden(d: usize, delta: f64) -> PurificationPoint {
        golden_point(&EigenSpectrum::depolarizing(d, delta).unwrap())
    }

    #[test]
    fn fidelity_at_golden_point() {
        let ch = NoiseChannel::depolarizing(2, 0.2).unwrap();
        let g = golden(2, 0.2);
        let res = solve_fidelity(&ch, 2, g.p).unwrap();
        assert!(res.solution.is_optimal(), "{:?}", res.solution.status);
        assert!((res.value - 0.939560).abs() < 1e-5, "{}", res.value);
        let rep = check_fidelity_dual(&ch, 2, g.p, &res.certificate).unwrap();
        assert!(rep.feasible, "{rep:?}");
        assert!((rep.objective - res.value).abs() < 1e-6);
        assert!(res.choi.min_eigenvalue().unwrap() > -1e-8);
    }

    #[test]
    fn fidelity_examples() {
        let res = solve_fidelity(&NoiseChannel::identity(2).unwrap(), 2, 1.0).unwrap();
        assert!((res.value - 1.0).abs() < 1e-6);
        let g = golden(2, 0.5);
        let res = solve_fidelity(&NoiseChannel::depolarizing(2, 0.5).unwrap(), 2, g.p).unwrap();
        assert!((res.value - (0.75 + 0.5625) / (2.0 * 0.8125)).abs() < 1e-5);
    }

    #[test]
    fn probability_at_golden_point() {
        let ch = NoiseChannel::depolarizing(2, 0.2).unwrap();
        let g = golden(2, 0.2);
        let res = solve_probability(&ch, 2, g.f).unwrap();
        assert!(
            (res.value - 0.91).abs() < 1e-5,
            "{} {:?}",
            res.value,
            res.solution.status
        );
        let rep = check_probability_dual(&ch, 2, g.f, &res.certificate).unwrap();
        assert!((rep.objective - res.value).abs() < 1e-5);
    }

    #[test]
    fn probability_at_trivial_fidelity() {
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        let res = solve_probability(&ch, 2, 0.5).unwrap();
        assert!(res.value >= 1.0 - 1e-6, "{}", res.value);
    }

    #[test]
    fn probability_above_golden_fidelity_vanishes() {
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        let g = golden(2, 0.3);
        let res = solve_probability(&ch, 2, g.f + 0.01).unwrap();
        assert!(
            res.solution.status != SdpStatus::Optimal || res.value < 1e-4,
            "{}",
            res.value
        );
    }

    #[test]
    fn explicit_dual_points() {
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        let g = golden(2, 0.3);
        let zero = ComplexMatrix::zeros(SubsystemShape::uniform(2, 2).unwrap());
        let cert = DualCertificate {
            x: -g.f,
            y_matrix: zero.clone(),
            objective: g.f,
        };
        let rep = check_fidelity_dual(&ch, 2, g.p, &cert).unwrap();
        assert!(
            rep.feasible && (rep.objective - g.f).abs() < 1e-12,
            "{rep:?}"
        );

        let cert = DualCertificate {
            x: 0.0,
            y_matrix: zero,
            objective: 0.0,
        };
        assert!(!check_fidelity_dual(&ch, 2, g.p, &cert).unwrap().feasible);

        let y = symmetric_projector(2, 2)
            .unwrap()
            .scale(-g.p / sym_dim(2, 2) as f64);
        let cert = DualCertificate {
            x: LARGE_MULTIPLIER,
            y_matrix: y,
            objective: g.p,
        };
        let rep = check_probability_dual(&ch, 2, g.f, &cert).unwrap();
        assert!(rep.feasible, "{rep:?}");
        assert!((rep.objective - g.p).abs() < 1e-12);
    }

    #[test]
    fn flat_region_below_golden_probability() {
        let ch = NoiseChannel::depolarizing(3, 0.3).unwrap();
        let g = golden(3, 0.3);
        let at = solve_fidelity(&ch, 2, g.p).unwrap().value;
        let below = solve_fidelity(&ch, 2, 0.5 * g.p).unwrap().value;
        assert!(
            (at - g.f).abs() < 1e-5 && (below - g.f).abs() < 1e-5,
            "{at} {below}"
        );
    }

    #[test]
    fn budget_enforced() {
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        assert!(matches!(
            build_fidelity_sdp(&ch, 6, 0.5),
            Err(PurifyError::BudgetExceeded(_))
        ));
        assert!(build_fidelity_sdp(&ch, 2, 0.0).is_err());
    }

    #[test]
    fn sweep_is_sorted_and_monotone() {
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        let g = golden(2, 0.3);
        let pts = sweep_tradeoff(&ch, 2, &[0.95, 0.3, g.p, 0.6]).unwrap();
        let ps: Vec<f64> = pts.iter().map(|t| t.p).collect();
        assert_eq!(ps, vec![0.3, 0.6, g.p, 0.95]);
        let fs: Vec<f64> = pts.iter().map(|t| t.fidelity.unwrap()).collect();
        for w in fs.windows(2) {
            assert!(w[1] <= w[0] + 1e-6);
        }
        assert!((fs[2] - g.f).abs() < 1e-5);
    }
}
