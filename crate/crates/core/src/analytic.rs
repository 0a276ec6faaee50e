//! Closed-form and recursive quantities for the symmetric-projection protocol.
//!
//! The recursions are evaluated on a rescaled sequence `qₙ = pₙ/λ₀ⁿ` so that
//! thousands of copies can be handled without underflow.

use nalgebra::DMatrix;

use crate::channels::{moment_operators, ChoiOperator, NoiseChannel, MOMENT_BUDGET};
use crate::error::{PurifyError, Result};
use crate::symgroup::{factorial, symmetric_projector, Permutation, GROUP_SUM_BUDGET};
use crate::tensor::{eig_hermitian, ComplexMatrix, SubsystemShape, C64};

/// Default cap on the number of copies searched by [`sample_complexity`].
pub const SAMPLE_COMPLEXITY_CAP: usize = 10_000;

/// Largest `dⁿ` accepted by the dense oracles and the recursive simulation.
pub const DENSE_STATE_BUDGET: usize = 4096;

/// Deepest recursion accepted by [`recursive_protocol`].
pub const MAX_DEPTH: usize = 10;

/// Post-selection probabilities below this are treated as impossible.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-14;

/// Eigenvalues of a noisy state, sorted in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSpectrum {
    lambdas: Vec<f64>,
    delta: Option<f64>,
}

impl EigenSpectrum {
    /// Spectrum of a depolarized pure state: `λ₀ = 1 − (d−1)δ/d`, `λⱼ = δ/d`.
    pub fn depolarizing(d: usize, delta: f64) -> Result<Self> {
        if d < 2 {
            return Err(PurifyError::InvalidParameter(format!("d = {d} < 2")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(PurifyError::NoiseOutOfRange(delta));
        }
        let rest = delta / d as f64;
        let mut lambdas = vec![rest; d];
        lambdas[0] = 1.0 - (d - 1) as f64 * rest;
        Ok(Self {
            lambdas,
            delta: Some(delta),
        })
    }

    /// Arbitrary probability vector; sorted descending on construction.
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 2 {
            return Err(PurifyError::InvalidParameter(
                "spectrum needs at least two entries".into(),
            ));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if lambdas.iter().any(|&l| !(l >= -1e-12)) {
            return Err(PurifyError::InvalidParameter(
                "spectrum has negative entries".into(),
            ));
        }
        let total: f64 = lambdas.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(PurifyError::InvalidParameter(format!(
                "spectrum sums to {total}, not 1"
            )));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            lambdas,
            delta: None,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// Largest eigenvalue, which is also the single-copy fidelity.
    pub fn top(&self) -> f64 {
        self.lambdas[0]
    }

    /// `tr[Λʲ]`.
    pub fn power_trace(&self, j: u32) -> f64 {
        self.lambdas.iter().map(|l| l.powi(j as i32)).sum()
    }
}

/// One operating point `(n, pₙ, fₙ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurificationPoint {
    pub n: usize,
    pub p: f64,
    pub f: f64,
}

impl PurificationPoint {
    /// Expected number of noisy copies consumed per success, `n/p`.
    pub fn expected_copies(&self) -> f64 {
        self.n as f64 / self.p
    }
}

/// Incremental evaluation of the `pₙ, fₙ` recursion.
///
/// Tracks `qₙ = pₙ/λ₀ⁿ` and `tⱼ = tr[Λʲ]/λ₀ʲ`; then
/// `qₙ = (1/n) Σⱼ q_{n−j} tⱼ` and `fₙ = Σⱼ q_{n−j} / (n qₙ)`.
struct Recursion {
    ratios: Vec<f64>,
    log_top: f64,
    q: Vec<f64>,
    t: Vec<f64>,
    q_prefix: f64,
}

impl Recursion {
    fn new(spec: &EigenSpectrum) -> Self {
        let top = spec.top();
        Self {
            ratios: spec.lambdas.iter().map(|l| l / top).collect(),
            log_top: top.ln(),
            q: vec![1.0],
            t: vec![f64::NAN],
            q_prefix: 1.0,
        }
    }

    /// Advances to the next `n` and returns `(n, qₙ, fₙ)`.
    fn step(&mut self) -> (usize, f64, f64) {
        let n = self.q.len();
        let j = n as i32;
        self.t.push(self.ratios.iter().map(|r| r.powi(j)).sum());
        let acc: f64 = (1..=n).map(|j| self.q[n - j] * self.t[j]).sum();
        let qn = acc / n as f64;
        let f = self.q_prefix / (n as f64 * qn);
        self.q.push(qn);
        self.q_prefix += qn;
        (n, qn, f)
    }

    fn point(&self, n: usize, qn: f64, f: f64) -> PurificationPoint {
        PurificationPoint {
            n,
            p: qn * (n as f64 * self.log_top).exp(),
            f,
        }
    }
}

/// `pₙ, fₙ` for `n = 1..=n_max` from the Newton-identity recursion.
pub fn recursion_pn_fn(spec: &EigenSpectrum, n_max: usize) -> Vec<PurificationPoint> {
    let mut rec = Recursion::new(spec);
    (0..n_max)
        .map(|_| {
            let (n, qn, f) = rec.step();
            rec.point(n, qn, f)
        })
        .collect()
}

/// The two-copy operating point `p₂ = (1 + tr Λ²)/2`, `f₂ = (λ₀ + λ₀²)/(2p₂)`.
pub fn golden_point(spec: &EigenSpectrum) -> PurificationPoint {
    let l0 = spec.top();
    let p = 0.5 * (1.0 + spec.power_trace(2));
    PurificationPoint {
        n: 2,
        p,
        f: (l0 + l0 * l0) / (2.0 * p),
    }
}

/// Qubit three-copy output: success probability, residual depolarizing noise, fidelity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeCopyPoint {
    pub p: f64,
    pub delta_prime: f64,
    pub f: f64,
}

pub fn three_copy_closed_form(d: usize, delta: f64) -> Result<ThreeCopyPoint> {
    if d != 2 {
        return Err(PurifyError::InvalidParameter(format!(
            "three-copy closed form is for qubits, got d = {d}"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(PurifyError::NoiseOutOfRange(delta));
    }
    let p = 1.0 - delta + 0.5 * delta * delta;
    let delta_prime = (2.0 * delta + delta.powi(3)) / (6.0 * p);
    Ok(ThreeCopyPoint {
        p,
        delta_prime,
        f: 1.0 - 0.5 * delta_prime,
    })
}

/// Literal evaluation of `pₙ = tr[Πₙ Λ^{⊗n}]` and
/// `fₙ = ⟨0|tr_{2..n}[Πₙ Λ^{⊗n} Πₙ]|0⟩ / pₙ` from the entries of `Πₙ`.
///
/// Each entry `Π_{ik} = #{c : P(c)|k⟩ = |i⟩}/n!` is obtained by explicitly
/// applying every permutation, so no part of the recursion is reused.
pub fn brute_force_pn_fn(spec: &EigenSpectrum, n: usize) -> Result<PurificationPoint> {
    let d = spec.d();
    let dim = checked_power(d, n)
        .filter(|&x| x <= DENSE_STATE_BUDGET)
        .ok_or_else(|| {
            PurifyError::BudgetExceeded(format!("d^n = {d}^{n} exceeds {DENSE_STATE_BUDGET}"))
        })?;
    let group = factorial(n);
    if group * dim as u128 > GROUP_SUM_BUDGET {
        return Err(PurifyError::BudgetExceeded(format!(
            "n!·d^n = {} exceeds {GROUP_SUM_BUDGET}",
            group * dim as u128
        )));
    }
    let maps: Vec<Vec<usize>> = Permutation::all(n).iter().map(|c| c.basis_map(d)).collect();
    let inv_group = 1.0 / group as f64;
    let leading_block = dim / d;
    let weight = |k: usize| -> f64 {
        let mut w = 1.0;
        let mut rest = k;
        for _ in 0..n {
            w *= spec.lambdas[rest % d];
            rest /= d;
        }
        w
    };

    let mut counts = vec![0u32; dim];
    let mut touched = Vec::with_capacity(maps.len());
    let mut p = 0.0;
    let mut numerator = 0.0;
    for k in 0..dim {
        for map in &maps {
            let i = map[k];
            if counts[i] == 0 {
                touched.push(i);
            }
            counts[i] += 1;
        }
        let lk = weight(k);
        p += counts[k] as f64 * inv_group * lk;
        for &i in &touched {
            if i < leading_block {
                let pik = counts[i] as f64 * inv_group;
                numerator += pik * pik * lk;
            }
            counts[i] = 0;
        }
        touched.clear();
    }
    Ok(PurificationPoint {
        n,
        p,
        f: numerator / p,
    })
}

fn checked_power(d: usize, n: usize) -> Option<usize> {
    d.checked_pow(u32::try_from(n).ok()?)
}

/// Choi operator of `X ↦ tr_{2..n}[Πₙ X Πₙ]` on `(ℂ^d)^{⊗n} → ℂ^d`.
pub fn symmetric_protocol_choi(n: usize, d: usize) -> Result<ChoiOperator> {
    let total = checked_power(d, n + 1)
        .filter(|&x| x <= MOMENT_BUDGET)
        .ok_or_else(|| PurifyError::BudgetExceeded(format!("d^(n+1) exceeds {MOMENT_BUDGET}")))?;
    let pi = symmetric_projector(n, d)?;
    let din = total / d;
    let rest = din / d;
    // J = M M† with M[(i, a), r] = Π[(a, r), i].
    let m = DMatrix::<C64>::from_fn(total, rest, |row, r| {
        let (i, a) = (row / d, row % d);
        pi.get(a * rest + r, i)
    });
    let shape = SubsystemShape::uniform(d, n + 1)?;
    let matrix = ComplexMatrix::new(shape, &m * m.adjoint())?;
    Ok(ChoiOperator {
        matrix,
        input_dim: din,
        output_dim: d,
    })
}

/// Universal success probability and fidelity of the symmetric protocol under
/// an arbitrary channel, evaluated through the Haar-averaged moment operators.
pub fn evaluate_protocol(ch: &NoiseChannel, n: usize) -> Result<PurificationPoint> {
    let choi = symmetric_protocol_choi(n, ch.dim())?;
    evaluate_choi(&choi, ch, n)
}

/// `p = tr[J Rᵀ]`, `f = tr[J Qᵀ]/p` for any protocol Choi operator `J`.
pub fn evaluate_choi(
    choi: &ChoiOperator,
    ch: &NoiseChannel,
    n: usize,
) -> Result<PurificationPoint> {
    let moments = moment_operators(ch, n)?;
    let p = choi.matrix.trace_product(&moments.r_transposed()).re;
    if p < MIN_SUCCESS_PROBABILITY {
        return Err(PurifyError::ZeroSuccessProbability(p));
    }
    let f = choi.matrix.trace_product(&moments.q_transposed()).re / p;
    Ok(PurificationPoint { n, p, f })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleComplexityResult {
    pub n: usize,
    pub expected_copies: f64,
    pub achieved_f: f64,
}

/// Smallest `n` whose fidelity reaches `f_goal`, with its expected copy count `n/pₙ`.
pub fn sample_complexity(delta: f64, d: usize, f_goal: f64) -> Result<SampleComplexityResult> {
    sample_complexity_with_cap(delta, d, f_goal, SAMPLE_COMPLEXITY_CAP)
}

pub fn sample_complexity_with_cap(
    delta: f64,
    d: usize,
    f_goal: f64,
    cap: usize,
) -> Result<SampleComplexityResult> {
    let spec = EigenSpectrum::depolarizing(d, delta)?;
    let l0 = spec.top();
    if !(f_goal > l0 && f_goal < 1.0) {
        return Err(PurifyError::InvalidParameter(format!(
            "goal fidelity {f_goal} must lie strictly between the single-copy fidelity {l0} and 1"
        )));
    }
    let mut rec = Recursion::new(&spec);
    let mut best = l0;
    for _ in 0..cap {
        let (n, qn, f) = rec.step();
        best = best.max(f);
        if f >= f_goal {
            let log_expected = (n as f64).ln() - qn.ln() - n as f64 * rec.log_top;
            return Ok(SampleComplexityResult {
                n,
                expected_copies: log_expected.exp(),
                achieved_f: f,
            });
        }
    }
    Err(PurifyError::UnreachableGoal {
        goal: f_goal,
        cap,
        best,
    })
}

/// Per-level record of the recursive protocol.
#[derive(Clone, Debug)]
pub struct RecursiveTrace {
    pub n: usize,
    pub depth: usize,
    /// `σ_{n,0} … σ_{n,m}`.
    pub states: Vec<ComplexMatrix>,
    /// Post-selection probability of levels `1..=m`.
    pub success_probabilities: Vec<f64>,
    /// Fidelity of each state with the ideal pure state, levels `0..=m`.
    pub fidelities: Vec<f64>,
}

/// Recursive purification of `𝒩(|0⟩⟨0|)`.
pub fn recursive_protocol(ch: &NoiseChannel, n: usize, depth: usize) -> Result<RecursiveTrace> {
    let d = ch.dim();
    let mut diag = vec![0.0; d];
    diag[0] = 1.0;
    let ideal = ComplexMatrix::from_real_diagonal(SubsystemShape::uniform(d, 1)?, &diag)?;
    recursive_protocol_from_state(&ch.apply(&ideal)?, n, depth)
}

/// Recursive purification of an arbitrary input state.
///
/// Every level outputs `σₖ = tr_{2..n}[Πₙ σ_{k−1}^{⊗n} Πₙ]/tr[Πₙ σ_{k−1}^{⊗n}]`.
/// Because `Πₙ` commutes with `U^{⊗n}`, all levels share the eigenbasis of the
/// input and only the spectrum has to be propagated.
pub fn recursive_protocol_from_state(
    rho: &ComplexMatrix,
    n: usize,
    depth: usize,
) -> Result<RecursiveTrace> {
    let d = rho.dim();
    if n == 0 {
        return Err(PurifyError::InvalidParameter("n must be ≥ 1".into()));
    }
    if depth > MAX_DEPTH {
        return Err(PurifyError::InvalidParameter(format!(
            "depth {depth} exceeds {MAX_DEPTH}"
        )));
    }
    if checked_power(d, n).is_none_or(|x| x > DENSE_STATE_BUDGET) {
        return Err(PurifyError::BudgetExceeded(format!(
            "d^n = {d}^{n} exceeds {DENSE_STATE_BUDGET}"
        )));
    }
    let eig = eig_hermitian(rho)?;
    let top = d - 1;
    if eig.eigenvalues[top] - eig.eigenvalues[top - 1] < 1e-12 {
        return Err(PurifyError::DegenerateSpectrum);
    }
    let u = &eig.eigenvectors;
    let rebuild = |mu: &[f64]| -> Result<ComplexMatrix> {
        let scaled = DMatrix::from_fn(d, d, |i, j| u[(i, j)] * mu[j]);
        ComplexMatrix::new(rho.shape().clone(), scaled * u.adjoint())
    };

    let mut mu: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    let mut states = vec![rho.clone()];
    let mut success_probabilities = Vec::with_capacity(depth);
    let mut fidelities = vec![mu[top] / mu.iter().sum::<f64>()];
    for _ in 0..depth {
        let out = symmetric_reduced_diagonal(&mu, n);
        let p: f64 = out.iter().sum();
        if p < MIN_SUCCESS_PROBABILITY {
            return Err(PurifyError::ZeroSuccessProbability(p));
        }
        mu = out.iter().map(|o| o / p).collect();
        success_probabilities.push(p);
        fidelities.push(mu[top]);
        states.push(rebuild(&mu)?);
    }
    Ok(RecursiveTrace {
        n,
        depth,
        states,
        success_probabilities,
        fidelities,
    })
}

/// Diagonal of `tr_{2..n}[Πₙ diag(μ)^{⊗n} Πₙ]`.
///
/// Summing `Π_{(i,r),k}² μ^k` over strings grouped by occupation numbers `m`
/// of the trailing `n−1` factors leaves `oᵢ = Σ_m μᵢ μ^m (mᵢ + 1)/n`.
fn symmetric_reduced_diagonal(mu: &[f64], n: usize) -> Vec<f64> {
    let d = mu.len();
    let mut out = vec![0.0; d];
    let mut occupation = vec![0usize; d];
    fn visit(
        slot: usize,
        left: usize,
        weight: f64,
        mu: &[f64],
        occupation: &mut [usize],
        out: &mut [f64],
        n: usize,
    ) {
        if slot + 1 == mu.len() {
            occupation[slot] = left;
            let w = weight * mu[slot].powi(left as i32);
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * mu[i] * (occupation[i] + 1) as f64 / n as f64;
            }
            return;
        }
        let mut w = weight;
        for k in 0..=left {
            occupation[slot] = k;
            visit(slot + 1, left - k, w, mu, occupation, out, n);
            w *= mu[slot];
        }
    }
    visit(0, n - 1, 1.0, mu, &mut occupation, &mut out, n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spectrum_validation() {
        let s = EigenSpectrum::depolarizing(3, 0.3).unwrap();
        assert!(close(s.lambdas()[0], 0.8, 1e-15) && close(s.lambdas()[2], 0.1, 1e-15));
        assert!(EigenSpectrum::depolarizing(2, 1.2).is_err());
        assert!(EigenSpectrum::new(vec![0.5, 0.6]).is_err());
        assert_eq!(
            EigenSpectrum::new(vec![0.2, 0.8]).unwrap().lambdas(),
            &[0.8, 0.2]
        );
    }

    #[test]
    fn recursion_examples() {
        let pts = recursion_pn_fn(&EigenSpectrum::depolarizing(2, 0.3).unwrap(), 3);
        assert!(close(pts[0].p, 1.0, 1e-14) && close(pts[0].f, 0.85, 1e-14));
        assert!(close(pts[1].p, 0.8725, 1e-12));
        assert!(close(pts[1].f, 1.5725 / 1.745, 1e-12));
        assert!(close(pts[2].p, 0.745, 1e-12));

        for d in 2..=4 {
            for pt in recursion_pn_fn(&EigenSpectrum::depolarizing(d, 0.0).unwrap(), 6) {
                assert!(close(pt.p, 1.0, 1e-12) && close(pt.f, 1.0, 1e-12));
            }
        }
    }

    #[test]
    fn golden_point_examples() {
        let g = golden_point(&EigenSpectrum::depolarizing(2, 0.2).unwrap());
        assert!(close(g.p, 0.91, 1e-14) && close(g.f, 1.71 / 1.82, 1e-14));
        let g = golden_point(&EigenSpectrum::depolarizing(3, 0.3).unwrap());
        assert!(close(g.p, 0.83, 1e-14) && close(g.f, 1.44 / 1.66, 1e-14));
        let g = golden_point(&EigenSpectrum::depolarizing(5, 0.0).unwrap());
        assert_eq!((g.n, g.p, g.f), (2, 1.0, 1.0));
        for d in 2..=5 {
            let s = EigenSpectrum::depolarizing(d, 0.37).unwrap();
            let r = recursion_pn_fn(&s, 2)[1];
            let g = golden_point(&s);
            assert!(close(r.p, g.p, 1e-15) && close(r.f, g.f, 1e-15));
        }
    }

    #[test]
    fn three_copy_examples() {
        let t = three_copy_closed_form(2, 0.3).unwrap();
        assert!(close(t.p, 0.745, 1e-15));
        assert!(close(t.delta_prime, 0.627 / 4.47, 1e-15));
        assert!(close(t.f, 0.929866, 1e-6));
        let r = recursion_pn_fn(&EigenSpectrum::depolarizing(2, 0.3).unwrap(), 3)[2];
        assert!(close(r.f, t.f, 1e-12));
        assert_eq!(
            three_copy_closed_form(2, 0.0).unwrap(),
            ThreeCopyPoint {
                p: 1.0,
                delta_prime: 0.0,
                f: 1.0
            }
        );
        assert!(three_copy_closed_form(3, 0.3).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let s = EigenSpectrum::depolarizing(2, 0.3).unwrap();
        let b = brute_force_pn_fn(&s, 1).unwrap();
        assert!(close(b.p, 1.0, 1e-15) && close(b.f, 0.85, 1e-15));
        let b = brute_force_pn_fn(&EigenSpectrum::depolarizing(3, 0.3).unwrap(), 2).unwrap();
        assert!(close(b.p, 0.83, 1e-14));
        assert!(brute_force_pn_fn(&EigenSpectrum::depolarizing(2, 0.3).unwrap(), 13).is_err());
    }

    #[test]
    fn brute_force_matches_recursion_on_skewed_spectrum() {
        let s = EigenSpectrum::new(vec![0.55, 0.25, 0.15, 0.05]).unwrap();
        let rec = recursion_pn_fn(&s, 4);
        for n in 1..=4 {
            let b = brute_force_pn_fn(&s, n).unwrap();
            assert!(
                close(b.p, rec[n - 1].p, 1e-12) && close(b.f, rec[n - 1].f, 1e-12),
                "n = {n}"
            );
        }
    }

    #[test]
    fn recursion_survives_many_copies() {
        let s = EigenSpectrum::depolarizing(3, 0.3).unwrap();
        let pts = recursion_pn_fn(&s, 3000);
        let last = pts.last().unwrap();
        assert!(last.f.is_finite() && last.f > 0.99 && last.f <= 1.0);
        assert!(last.p >= 0.0);
    }

    #[test]
    fn protocol_evaluation_matches_closed_forms() {
        let pt = evaluate_protocol(&NoiseChannel::depolarizing(2, 0.3).unwrap(), 2).unwrap();
        assert!(close(pt.p, 0.8725, 1e-12) && close(pt.f, 1.5725 / 1.745, 1e-12));
        let pt = evaluate_protocol(&NoiseChannel::identity(2).unwrap(), 2).unwrap();
        assert!(close(pt.p, 1.0, 1e-12) && close(pt.f, 1.0, 1e-12));
        let pt = evaluate_protocol(&NoiseChannel::depolarizing(3, 0.4).unwrap(), 3).unwrap();
        let r = recursion_pn_fn(&EigenSpectrum::depolarizing(3, 0.4).unwrap(), 3)[2];
        assert!(close(pt.p, r.p, 1e-10) && close(pt.f, r.f, 1e-10));
    }

    #[test]
    fn protocol_choi_is_a_cptn_map() {
        let j = symmetric_protocol_choi(3, 2).unwrap();
        assert!(j.min_eigenvalue().unwrap() > -1e-12);
        let marginal = j.input_marginal().unwrap();
        let pi = symmetric_projector(3, 2).unwrap();
        // tr_out J equals Πᵀ = Π because the map is X ↦ tr_{2..n}[ΠXΠ].
        assert!(marginal.distance(&pi) < 1e-12);
    }

    #[test]
    fn moment_operator_pairings_give_probability_and_fidelity() {
        // tr[(Π₂⊗I) q] = p₂ and tr[(Π₂⊗I) F₁₃ (Π₂⊗I) q] = p₂ f₂.
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        let m = moment_operators(&ch, 2).unwrap();
        let pi = symmetric_projector(2, 2).unwrap();
        let lifted = crate::tensor::kron(
            &pi,
            &ComplexMatrix::identity(SubsystemShape::uniform(2, 1).unwrap()),
        );
        let swap13 = crate::symgroup::permutation_operator(
            &Permutation::parse_cycles(3, "(13)").unwrap(),
            2,
        );
        let pt = evaluate_protocol(&ch, 2).unwrap();
        assert!(close(lifted.trace_product(&m.q).re, pt.p, 1e-12));
        let sandwich = &(&lifted * &swap13) * &lifted;
        assert!(close(sandwich.trace_product(&m.q).re, pt.p * pt.f, 1e-12));
    }

    #[test]
    fn sample_complexity_examples() {
        let r = sample_complexity(0.3, 2, 0.92).unwrap();
        assert_eq!(r.n, 3);
        assert!(close(r.expected_copies, 3.0 / 0.745, 1e-10));
        assert!(close(r.achieved_f, 0.929866, 1e-6));
        assert_eq!(sample_complexity(0.3, 2, 0.85 + 1e-9).unwrap().n, 2);
        assert!(sample_complexity(0.3, 2, 0.8).is_err());
        assert!(matches!(
            sample_complexity_with_cap(0.3, 2, 0.999, 5),
            Err(PurifyError::UnreachableGoal { cap: 5, .. })
        ));
    }

    #[test]
    fn recursive_examples() {
        let ch = NoiseChannel::depolarizing(2, 0.3).unwrap();
        let t0 = recursive_protocol(&ch, 3, 0).unwrap();
        assert_eq!(t0.states.len(), 1);
        assert!(close(t0.fidelities[0], 0.85, 1e-12));

        let t1 = recursive_protocol(&ch, 2, 1).unwrap();
        assert!(close(t1.fidelities[1], 1.5725 / 1.745, 1e-12));
        assert!(close(t1.success_probabilities[0], 0.8725, 1e-12));
        assert!(close(t1.states[1].trace().re, 1.0, 1e-12));

        assert!(matches!(
            recursive_protocol(&NoiseChannel::depolarizing(2, 1.0).unwrap(), 2, 1),
            Err(PurifyError::DegenerateSpectrum)
        ));
        assert!(recursive_protocol(&ch, 2, 11).is_err());
    }

    #[test]
    fn swap_cascade_matches_iterated_golden_point() {
        let ch = NoiseChannel::depolarizing(3, 0.3).unwrap();
        let trace = recursive_protocol(&ch, 2, 5).unwrap();
        let mut spec = EigenSpectrum::depolarizing(3, 0.3).unwrap();
        for k in 1..=5 {
            let g = golden_point(&spec);
            assert!(close(trace.fidelities[k], g.f, 1e-10), "level {k}");
            assert!(close(trace.success_probabilities[k - 1], g.p, 1e-10));
            let rest = (1.0 - g.f) / 2.0;
            spec = EigenSpectrum::new(vec![g.f, rest, rest]).unwrap();
        }
    }

    #[test]
    fn reduced_diagonal_matches_recursion_for_depolarizing() {
        for (d, n) in [(2, 4), (3, 3), (4, 2)] {
            let s = EigenSpectrum::depolarizing(d, 0.45).unwrap();
            let out = symmetric_reduced_diagonal(s.lambdas(), n);
            let p: f64 = out.iter().sum();
            let r = recursion_pn_fn(&s, n)[n - 1];
            assert!(close(p, r.p, 1e-13) && close(out[0] / p, r.f, 1e-13));
        }
    }
}
