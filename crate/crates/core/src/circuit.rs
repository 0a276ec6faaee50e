//! Exact simulation of block-encoded purification circuits.
//!
//! A circuit acts on an ancilla register of dimension `A` followed by `n` data
//! qudits of dimension `d`. The ancilla is the most significant factor, so the
//! block `(⟨0|⊗I) U (|0⟩⊗I)` is the leading `dⁿ × dⁿ` corner of `U`.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::MIN_SUCCESS_PROBABILITY;
use crate::error::{PurifyError, Result};
use crate::optimize::{nelder_mead_polished, NelderMeadOptions};
use crate::symgroup::{factorial, symmetric_projector, weighted_permutation_sum, Permutation};
use crate::tensor::{partial_trace, ComplexMatrix, SubsystemShape, C64};

/// Largest `ancilla_dim · dⁿ` that [`compile_to_unitary`] accepts.
pub const CIRCUIT_BUDGET: usize = 4096;

/// Tolerance on `‖U†U − I‖_F` for prepared ancilla unitaries and compiled circuits.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Residual below which four-copy training counts as successful.
pub const TRAINING_TOL: f64 = 1e-6;

/// Number of controlled permutations in the four-copy ansatz.
pub const FOUR_COPY_GATES: usize = 5;

/// Default controlled-permutation ordering of the four-copy ansatz.
///
/// This is the best ordering found by exhaustive search over five gates from
/// the 4-cycle and double-transposition classes (first gate fixed up to
/// relabelling). No ordering of this length reaches `Π₄` exactly.
pub const FOUR_COPY_ORDERING: [&str; FOUR_COPY_GATES] =
    ["(1234)", "(1423)", "(1342)", "(1423)", "(1342)"];

/// A reference angle set for the four-copy ansatz, evaluated for comparison.
pub const REFERENCE_FOUR_COPY_ANGLES: [f64; FOUR_COPY_GATES + 1] = [
    1.8447 + std::f64::consts::PI,
    3.6535,
    4.3632,
    std::f64::consts::PI,
    2.4319,
    1.8447,
];

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// `Ry(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]` on one ancilla qubit
    /// (qubit 0 is the most significant).
    Ry { qubit: usize, theta: f64 },
    /// Applies `sign · P(perm)` to the data when the ancilla is in basis state `control`.
    ControlledPermutation {
        control: usize,
        perm: Permutation,
        sign: i8,
    },
    /// Arbitrary unitary on the whole ancilla register.
    Prepare {
        unitary: DMatrix<C64>,
        label: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumCircuit {
    ancilla_dim: usize,
    d: usize,
    n: usize,
    gates: Vec<Gate>,
}

impl QuantumCircuit {
    pub fn new(ancilla_dim: usize, d: usize, n: usize) -> Result<Self> {
        if ancilla_dim < 2 || d < 2 || n == 0 {
            return Err(PurifyError::InvalidParameter(format!(
                "need ancilla_dim ≥ 2, d ≥ 2, n ≥ 1 (got {ancilla_dim}, {d}, {n})"
            )));
        }
        Ok(Self {
            ancilla_dim,
            d,
            n,
            gates: Vec::new(),
        })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Appends a gate after validating it against the register layout.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        match &gate {
            Gate::Ry { qubit, theta } => {
                if !self.ancilla_dim.is_power_of_two() {
                    return Err(PurifyError::InvalidParameter(format!(
                        "Ry needs a qubit ancilla register, got dimension {}",
                        self.ancilla_dim
                    )));
                }
                let qubits = self.ancilla_dim.trailing_zeros() as usize;
                if *qubit >= qubits {
                    return Err(PurifyError::InvalidParameter(format!(
                        "ancilla qubit {qubit} of {qubits}"
                    )));
                }
                if !theta.is_finite() {
                    return Err(PurifyError::InvalidParameter(
                        "non-finite rotation angle".into(),
                    ));
                }
            }
            Gate::ControlledPermutation {
                control,
                perm,
                sign,
            } => {
                if *control >= self.ancilla_dim {
                    return Err(PurifyError::InvalidParameter(format!(
                        "control level {control} outside ancilla dimension {}",
                        self.ancilla_dim
                    )));
                }
                if perm.degree() != self.n {
                    return Err(PurifyError::DimensionMismatch {
                        expected: self.n,
                        found: perm.degree(),
                    });
                }
                if sign.abs() != 1 {
                    return Err(PurifyError::InvalidParameter(format!(
                        "sign must be ±1, got {sign}"
                    )));
                }
            }
            Gate::Prepare { unitary, .. } => {
                if unitary.nrows() != self.ancilla_dim || unitary.ncols() != self.ancilla_dim {
                    return Err(PurifyError::DimensionMismatch {
                        expected: self.ancilla_dim,
                        found: unitary.nrows(),
                    });
                }
                let defect = (unitary.adjoint() * unitary
                    - DMatrix::<C64>::identity(self.ancilla_dim, self.ancilla_dim))
                .norm();
                if defect > UNITARITY_TOL {
                    return Err(PurifyError::InvalidParameter(format!(
                        "prepared operator is not unitary (defect {defect:.3e})"
                    )));
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    fn data_dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// One gate per line: `RY <theta> anc`, `CPERM <sign> <cycles> anc=<level> q1 … qn`,
    /// `PREP <label> anc`.
    pub fn to_netlist(&self) -> String {
        let single = self.ancilla_dim == 2;
        let data: Vec<String> = (1..=self.n).map(|k| format!("q{k}")).collect();
        let data = data.join(" ");
        let mut out = String::new();
        for gate in &self.gates {
            let _ = match gate {
                Gate::Ry { theta, .. } if single => writeln!(out, "RY {theta:.12} anc"),
                Gate::Ry { qubit, theta } => writeln!(out, "RY {theta:.12} anc{qubit}"),
                Gate::ControlledPermutation {
                    control,
                    perm,
                    sign,
                } => {
                    let s = if *sign > 0 { "+1" } else { "-1" };
                    writeln!(out, "CPERM {s} {perm} anc={control} {data}")
                }
                Gate::Prepare { label, .. } => writeln!(out, "PREP {label} anc"),
            };
        }
        out
    }
}

/// Left-multiplies `u` by one gate, acting on rows.
fn apply_gate(u: &mut DMatrix<C64>, gate: &Gate, ancilla_dim: usize, data_dim: usize, d: usize) {
    let cols = u.ncols();
    match gate {
        Gate::Ry { qubit, theta } => {
            let qubits = ancilla_dim.trailing_zeros() as usize;
            let bit = 1usize << (qubits - 1 - qubit);
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            for a in (0..ancilla_dim).filter(|a| a & bit == 0) {
                let b = a | bit;
                for x in 0..data_dim {
                    let (r0, r1) = (a * data_dim + x, b * data_dim + x);
                    for col in 0..cols {
                        let (v0, v1) = (u[(r0, col)], u[(r1, col)]);
                        u[(r0, col)] = v0 * c - v1 * s;
                        u[(r1, col)] = v0 * s + v1 * c;
                    }
                }
            }
        }
        Gate::ControlledPermutation {
            control,
            perm,
            sign,
        } => {
            let map = perm.basis_map(d);
            let offset = control * data_dim;
            let old = u.rows(offset, data_dim).into_owned();
            let s = f64::from(*sign);
            for (x, &target) in map.iter().enumerate() {
                for col in 0..cols {
                    u[(offset + target, col)] = old[(x, col)] * s;
                }
            }
        }
        Gate::Prepare { unitary, .. } => {
            let mut next = DMatrix::<C64>::zeros(u.nrows(), cols);
            for a in 0..ancilla_dim {
                for b in 0..ancilla_dim {
                    let v = unitary[(a, b)];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for x in 0..data_dim {
                        for col in 0..cols {
                            next[(a * data_dim + x, col)] += v * u[(b * data_dim + x, col)];
                        }
                    }
                }
            }
            *u = next;
        }
    }
}

/// Product of the gate matrices in circuit order, on `ancilla ⊗ (ℂ^d)^{⊗n}`.
pub fn compile_to_unitary(c: &QuantumCircuit) -> Result<ComplexMatrix> {
    let data_dim =
        c.d.checked_pow(c.n as u32)
            .filter(|&x| x.saturating_mul(c.ancilla_dim) <= CIRCUIT_BUDGET)
            .ok_or_else(|| {
                PurifyError::BudgetExceeded(format!(
                    "ancilla_dim·dⁿ exceeds {CIRCUIT_BUDGET} ({}·{}^{})",
                    c.ancilla_dim, c.d, c.n
                ))
            })?;
    let total = c.ancilla_dim * data_dim;
    let mut u = DMatrix::<C64>::identity(total, total);
    for gate in &c.gates {
        apply_gate(&mut u, gate, c.ancilla_dim, data_dim, c.d);
    }
    let mut dims = vec![c.ancilla_dim];
    dims.extend(std::iter::repeat_n(c.d, c.n));
    ComplexMatrix::new(SubsystemShape::new(dims)?, u)
}

/// A circuit together with its compiled block and distance to the intended operator.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    pub circuit: QuantumCircuit,
    pub block: ComplexMatrix,
    /// `‖block − target‖_F`.
    pub residual_to_target: f64,
}

impl BlockEncoding {
    /// Compiles `circuit` and measures its block against `target`.
    pub fn new(circuit: QuantumCircuit, target: &ComplexMatrix) -> Result<Self> {
        let block = extract_block(&circuit)?;
        if target.dim() != block.dim() {
            return Err(PurifyError::DimensionMismatch {
                expected: block.dim(),
                found: target.dim(),
            });
        }
        let residual_to_target = block.distance(target);
        Ok(Self {
            circuit,
            block,
            residual_to_target,
        })
    }

    /// Encoding whose target is the symmetric projector `Πₙ`.
    pub fn against_symmetric_projector(circuit: QuantumCircuit) -> Result<Self> {
        let target = symmetric_projector(circuit.n, circuit.d)?;
        Self::new(circuit, &target)
    }
}

fn extract_block(circuit: &QuantumCircuit) -> Result<ComplexMatrix> {
    let u = compile_to_unitary(circuit)?;
    let data_dim = circuit.data_dim();
    let corner = u.data().view((0, 0), (data_dim, data_dim)).into_owned();
    ComplexMatrix::new(SubsystemShape::uniform(circuit.d, circuit.n)?, corner)
}

/// Real orthogonal matrix whose first column is `amplitudes` (normalized),
/// completed by Gram–Schmidt against the standard basis.
fn preparation_unitary(amplitudes: &[f64]) -> Result<DMatrix<C64>> {
    let dim = amplitudes.len();
    let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(PurifyError::InvalidParameter(
            "preparation amplitudes vanish".into(),
        ));
    }
    let mut columns: Vec<Vec<f64>> = vec![amplitudes.iter().map(|a| a / norm).collect()];
    for k in 0..dim {
        if columns.len() == dim {
            break;
        }
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        for _ in 0..2 {
            for c in &columns {
                let overlap: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= overlap * y);
            }
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            columns.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        C64::new(columns[j][i], 0.0)
    }))
}

/// `(V† ⊗ I) W (V ⊗ I)` encoding `Σ_k c_k P(π_k) / Σ_k |c_k|`.
///
/// `V|0⟩ = Σ_k √(|c_k|/Σ|c|) |k⟩` on a qubit register of `⌈log₂ K⌉` qubits and
/// `W` applies `sign(c_k) P(π_k)` controlled on level `k`. Unused levels act
/// as identity. Returns the encoding, with the normalized sum as its target,
/// together with the normalization `Σ|c|`.
pub fn lcu_from_terms(terms: &[(f64, Permutation)], d: usize) -> Result<(BlockEncoding, f64)> {
    let n = terms
        .first()
        .map(|(_, c)| c.degree())
        .ok_or_else(|| PurifyError::InvalidParameter("no LCU terms".into()))?;
    let qubits = (usize::BITS - (terms.len() - 1).leading_zeros()).max(1);
    let ancilla_dim = 1usize << qubits;
    let total: f64 = terms.iter().map(|(c, _)| c.abs()).sum();
    if total == 0.0 || !total.is_finite() {
        return Err(PurifyError::InvalidParameter(
            "LCU coefficients must be finite and not all zero".into(),
        ));
    }
    let mut amplitudes = vec![0.0; ancilla_dim];
    for (a, (c, _)) in amplitudes.iter_mut().zip(terms) {
        *a = (c.abs() / total).sqrt();
    }
    let v = preparation_unitary(&amplitudes)?;
    let mut circuit = QuantumCircuit::new(ancilla_dim, d, n)?;
    circuit.push(Gate::Prepare {
        unitary: v.clone(),
        label: "V".into(),
    })?;
    for (k, (c, perm)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { -1 } else { 1 };
        circuit.push(Gate::ControlledPermutation {
            control: k,
            perm: perm.clone(),
            sign,
        })?;
    }
    circuit.push(Gate::Prepare {
        unitary: v.adjoint(),
        label: "V†".into(),
    })?;
    let normalized: Vec<(f64, Permutation)> =
        terms.iter().map(|(c, p)| (c / total, p.clone())).collect();
    let target = weighted_permutation_sum(&normalized, d)?;
    Ok((BlockEncoding::new(circuit, &target)?, total))
}

/// LCU block encoding of `Πₙ` with uniform weights over all of `Sₙ`.
pub fn lcu_purifier(n: usize, d: usize) -> Result<BlockEncoding> {
    let count = factorial(n);
    let ancilla = count.next_power_of_two() as usize;
    let data_dim = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if ancilla.saturating_mul(data_dim) > CIRCUIT_BUDGET {
        return Err(PurifyError::BudgetExceeded(format!(
            "LCU register {ancilla}·{d}^{n} exceeds {CIRCUIT_BUDGET}"
        )));
    }
    let terms: Vec<(f64, Permutation)> =
        Permutation::all(n).into_iter().map(|c| (1.0, c)).collect();
    let (encoding, _) = lcu_from_terms(&terms, d)?;
    let target = symmetric_projector(n, d)?;
    let residual_to_target = encoding.block.distance(&target);
    Ok(BlockEncoding {
        residual_to_target,
        ..encoding
    })
}

/// Single-ancilla circuit `Ry(a₀) · C-P(g₁) · Ry(a₁) · … · C-P(g_m) · Ry(a_m)`,
/// listed in application order, with every control on `|1⟩`.
pub fn single_ancilla_circuit(
    d: usize,
    ordering: &[Permutation],
    angles: &[f64],
) -> Result<QuantumCircuit> {
    if angles.len() != ordering.len() + 1 {
        return Err(PurifyError::InvalidParameter(format!(
            "{} controlled permutations need {} angles, got {}",
            ordering.len(),
            ordering.len() + 1,
            angles.len()
        )));
    }
    let n = ordering.first().map_or(1, Permutation::degree);
    let mut circuit = QuantumCircuit::new(2, d, n)?;
    circuit.push(Gate::Ry {
        qubit: 0,
        theta: angles[0],
    })?;
    for (perm, &theta) in ordering.iter().zip(&angles[1..]) {
        circuit.push(Gate::ControlledPermutation {
            control: 1,
            perm: perm.clone(),
            sign: 1,
        })?;
        circuit.push(Gate::Ry { qubit: 0, theta })?;
    }
    Ok(circuit)
}

/// Angles `(α, β, γ)` of the three-copy circuit.
pub fn three_copy_angles() -> [f64; 3] {
    let alpha = -(2f64.sqrt()).atan();
    [alpha, (-1.0f64 / 3.0).acos(), alpha]
}

/// `Ry(γ) · C-P((132)) · Ry(β) · C-P((123)) · Ry(α)` on one ancilla qubit and three qubits.
pub fn three_copy_circuit() -> Result<BlockEncoding> {
    let ordering = [
        Permutation::parse_cycles(3, "(123)")?,
        Permutation::parse_cycles(3, "(132)")?,
    ];
    let circuit = single_ancilla_circuit(2, &ordering, &three_copy_angles())?;
    BlockEncoding::against_symmetric_projector(circuit)
}

pub fn four_copy_ordering() -> Vec<Permutation> {
    FOUR_COPY_ORDERING
        .iter()
        .map(|s| Permutation::parse_cycles(4, s).expect("valid cycle notation"))
        .collect()
}

/// The four-copy ansatz on the default ordering.
pub fn four_copy_ansatz(angles: &[f64]) -> Result<BlockEncoding> {
    four_copy_ansatz_with(&four_copy_ordering(), angles)
}

/// The four-copy ansatz for an explicit ordering of five controlled
/// permutations drawn from the 4-cycle and double-transposition classes.
pub fn four_copy_ansatz_with(ordering: &[Permutation], angles: &[f64]) -> Result<BlockEncoding> {
    check_four_copy_ordering(ordering)?;
    let circuit = single_ancilla_circuit(2, ordering, angles)?;
    BlockEncoding::against_symmetric_projector(circuit)
}

fn check_four_copy_ordering(ordering: &[Permutation]) -> Result<()> {
    if ordering.len() != FOUR_COPY_GATES {
        return Err(PurifyError::InvalidParameter(format!(
            "four-copy ansatz uses {FOUR_COPY_GATES} controlled permutations, got {}",
            ordering.len()
        )));
    }
    for p in ordering {
        let mut lengths: Vec<usize> = p.cycles().iter().map(Vec::len).collect();
        lengths.sort_unstable();
        if p.degree() != 4 || !(lengths == [4] || lengths == [2, 2]) {
            return Err(PurifyError::InvalidPermutation(format!(
                "{p} is neither a 4-cycle nor a double transposition"
            )));
        }
    }
    Ok(())
}

/// One ancilla path through a single-ancilla circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchTerm {
    /// Ancilla value while each controlled permutation acts.
    pub controls: Vec<bool>,
    /// `g_m^{b_m} ∘ … ∘ g₁^{b₁}`.
    pub element: Permutation,
    /// Product of the `Ry` matrix elements along the path.
    pub weight: f64,
}

/// Expands the block of [`single_ancilla_circuit`] as `Σ weight · P(element)`.
pub fn branch_terms(ordering: &[Permutation], angles: &[f64]) -> Result<Vec<BranchTerm>> {
    let m = ordering.len();
    if angles.len() != m + 1 {
        return Err(PurifyError::InvalidParameter(format!(
            "{m} controlled permutations need {} angles",
            m + 1
        )));
    }
    if m >= 24 {
        return Err(PurifyError::BudgetExceeded(format!("2^{m} ancilla paths")));
    }
    let n = ordering.first().map_or(1, Permutation::degree);
    let mut out = Vec::with_capacity(1 << m);
    for path in 0..(1usize << m) {
        let controls: Vec<bool> = (0..m).map(|k| (path >> k) & 1 == 1).collect();
        let mut element = Permutation::identity(n);
        let mut weight = 1.0;
        let mut prev = false;
        for k in 0..=m {
            let next = k < m && controls[k];
            weight *= ry_entry(angles[k], next, prev);
            if next {
                element = ordering[k].compose(&element);
            }
            prev = next;
        }
        out.push(BranchTerm {
            controls,
            element,
            weight,
        });
    }
    Ok(out)
}

fn ry_entry(theta: f64, row: bool, col: bool) -> f64 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match (row, col) {
        (false, false) | (true, true) => c,
        (true, false) => s,
        (false, true) => -s,
    }
}

/// Fast residual `‖block − Πₙ‖_F` for single-ancilla circuits, computed in the
/// group algebra: with `v_g` the block coefficient of `P(g)` minus `1/n!`,
/// `‖Σ v_g P(g)‖²_F = Σ_{g,h} v_g v_h d^{cyc(g⁻¹h)}`.
struct GroupAlgebraResidual {
    group_size: usize,
    /// `step[k][j]` = index of `g_k ∘ element_j`.
    step: Vec<Vec<usize>>,
    gram: Vec<f64>,
    identity: usize,
}

impl GroupAlgebraResidual {
    fn new(ordering: &[Permutation], d: usize) -> Self {
        let n = ordering[0].degree();
        let group = Permutation::all(n);
        let index: HashMap<&Permutation, usize> =
            group.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let step = ordering
            .iter()
            .map(|g| group.iter().map(|h| index[&g.compose(h)]).collect())
            .collect();
        let size = group.len();
        let mut gram = vec![0.0; size * size];
        for (i, a) in group.iter().enumerate() {
            let inv = a.inverse();
            for (j, b) in group.iter().enumerate() {
                gram[i * size + j] = (d as f64).powi(inv.compose(b).cycle_count() as i32);
            }
        }
        let identity = index[&Permutation::identity(n)];
        Self {
            group_size: size,
            step,
            gram,
            identity,
        }
    }

    fn squared(&self, angles: &[f64]) -> f64 {
        let m = self.step.len();
        let halves: Vec<(f64, f64)> = angles
            .iter()
            .map(|t| ((t / 2.0).cos(), (t / 2.0).sin()))
            .collect();
        let mut coef = vec![-1.0 / self.group_size as f64; self.group_size];
        for path in 0..(1usize << m) {
            let (mut w, mut g, mut prev) = (1.0, self.identity, false);
            for (k, &(c, s)) in halves.iter().enumerate() {
                let next = k < m && (path >> k) & 1 == 1;
                w *= match (next, prev) {
                    (false, false) | (true, true) => c,
                    (true, false) => s,
                    (false, true) => -s,
                };
                if next {
                    g = self.step[k][g];
                }
                prev = next;
            }
            coef[g] += w;
        }
        let size = self.group_size;
        let mut total = 0.0;
        for i in 0..size {
            let row = &self.gram[i * size..(i + 1) * size];
            total += coef[i] * row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
        }
        total.max(0.0)
    }
}

/// Outcome of the four-copy training loop, successful or not.
#[derive(Clone, Debug)]
pub struct TrainingReport {
    pub angles: Vec<f64>,
    pub residual: f64,
    /// Seed of the winning restart.
    pub restart_seed: u64,
    pub restarts: usize,
    pub encoding: BlockEncoding,
}

/// Trains the ansatz on `ordering` with `restarts` independent Nelder–Mead
/// runs. Restart `r` uses seed `seed + r`; the winner has the lowest residual,
/// ties broken by the lower seed, so the result does not depend on scheduling.
pub fn train_four_copy_report(
    seed: u64,
    restarts: usize,
    ordering: &[Permutation],
) -> Result<TrainingReport> {
    check_four_copy_ordering(ordering)?;
    if restarts == 0 {
        return Err(PurifyError::InvalidParameter(
            "need at least one restart".into(),
        ));
    }
    let objective = GroupAlgebraResidual::new(ordering, 2);
    let opts = NelderMeadOptions {
        max_evaluations: 4000,
        ..NelderMeadOptions::default()
    };
    let (value, restart_seed, angles) = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let s = seed.wrapping_add(r);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let x0: Vec<f64> = (0..=FOUR_COPY_GATES)
                .map(|_| rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI))
                .collect();
            let best = nelder_mead_polished(|a| objective.squared(a), &x0, &opts, 4);
            (best.value, s, best.x)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one restart");
    let encoding = four_copy_ansatz_with(ordering, &angles)?;
    debug_assert!((encoding.residual_to_target - value.sqrt()).abs() < 1e-8);
    Ok(TrainingReport {
        residual: encoding.residual_to_target,
        angles,
        restart_seed,
        restarts,
        encoding,
    })
}

/// Trains the default four-copy ansatz; fails unless the residual reaches [`TRAINING_TOL`].
pub fn train_four_copy(seed: u64, max_restarts: usize) -> Result<(Vec<f64>, BlockEncoding)> {
    let report = train_four_copy_report(seed, max_restarts, &four_copy_ordering())?;
    if report.residual > TRAINING_TOL {
        return Err(PurifyError::TrainingFailed {
            best_residual: report.residual,
        });
    }
    Ok((report.angles, report.encoding))
}

/// Post-selects on the ancilla returning `|0⟩`: returns `tr[BρB†]` and the
/// first-copy marginal of `BρB†` normalized by it.
pub fn apply_purifier(be: &BlockEncoding, rho_in: &ComplexMatrix) -> Result<(f64, ComplexMatrix)> {
    let b = &be.block;
    if rho_in.dim() != b.dim() {
        return Err(PurifyError::DimensionMismatch {
            expected: b.dim(),
            found: rho_in.dim(),
        });
    }
    let rho = ComplexMatrix::new(b.shape().clone(), rho_in.data().clone())?;
    let out = &(b * &rho) * &b.adjoint();
    let p = out.trace().re;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(p >= MIN_SUCCESS_PROBABILITY) {
        return Err(PurifyError::ZeroSuccessProbability(p));
    }
    let sigma = partial_trace(&out, &[1])?.scale(1.0 / p);
    Ok((p, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::three_copy_closed_form;
    use crate::channels::NoiseChannel;
    use crate::tensor::{kron_all, random_density_matrix};

    fn depolarized_copies(d: usize, n: usize, delta: f64) -> (ComplexMatrix, ComplexMatrix) {
        let ch = NoiseChannel::depolarizing(d, delta).unwrap();
        let mut diag = vec![0.0; d];
        diag[0] = 1.0;
        let one = ch
            .apply(
                &ComplexMatrix::from_real_diagonal(SubsystemShape::uniform(d, 1).unwrap(), &diag)
                    .unwrap(),
            )
            .unwrap();
        (one.clone(), kron_all(&vec![one; n]))
    }

    fn unitarity_defect(u: &ComplexMatrix) -> f64 {
        let n = u.dim();
        (u.data().adjoint() * u.data() - DMatrix::<C64>::identity(n, n)).norm()
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = QuantumCircuit::new(2, 2, 2).unwrap();
        let u = compile_to_unitary(&c).unwrap();
        assert_eq!(u.data(), &DMatrix::<C64>::identity(8, 8));
    }

    #[test]
    fn ry_pi_flips_ancilla_with_sign() {
        let mut c = QuantumCircuit::new(2, 2, 1).unwrap();
        c.push(Gate::Ry {
            qubit: 0,
            theta: std::f64::consts::PI,
        })
        .unwrap();
        let u = compile_to_unitary(&c).unwrap();
        for x in 0..2 {
            assert!((u.get(2 + x, x).re - 1.0).abs() < 1e-15);
            assert!((u.get(x, 2 + x).re + 1.0).abs() < 1e-15);
            assert!(u.get(x, x).norm() < 1e-15);
        }
    }

    #[test]
    fn budget_and_validation() {
        let c = QuantumCircuit::new(2, 2, 12).unwrap();
        assert!(matches!(
            compile_to_unitary(&c),
            Err(PurifyError::BudgetExceeded(_))
        ));
        let mut c = QuantumCircuit::new(3, 2, 2).unwrap();
        assert!(c
            .push(Gate::Ry {
                qubit: 0,
                theta: 0.1
            })
            .is_err());
        let perm = Permutation::parse_cycles(3, "(12)").unwrap();
        assert!(c
            .push(Gate::ControlledPermutation {
                control: 1,
                perm,
                sign: 1
            })
            .is_err());
        let bad = DMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        assert!(c
            .push(Gate::Prepare {
                unitary: bad,
                label: "X".into()
            })
            .is_err());
        assert!(lcu_purifier(5, 3).is_err());
    }

    #[test]
    fn swap_test_gadget() {
        let be = lcu_purifier(2, 2).unwrap();
        assert!(be.residual_to_target < 1e-12);
        assert_eq!(be.circuit.ancilla_dim(), 2);
        let (rho, input) = depolarized_copies(2, 2, 0.3);
        let (p, sigma) = apply_purifier(&be, &input).unwrap();
        assert!((p - 0.8725).abs() < 1e-12);
        assert!(rho.distance(&sigma) > 0.0);
        assert!((sigma.get(0, 0).re - 0.901146131805).abs() < 1e-9);
    }

    #[test]
    fn lcu_reaches_symmetric_projector() {
        for (n, d) in [(3, 2), (3, 3), (4, 2)] {
            let be = lcu_purifier(n, d).unwrap();
            assert!(
                be.residual_to_target < 1e-10,
                "n={n} d={d}: {}",
                be.residual_to_target
            );
            assert!(unitarity_defect(&compile_to_unitary(&be.circuit).unwrap()) < UNITARITY_TOL);
            assert!(be.block.operator_norm() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn signed_class_sum_encodes_four_copy_projector() {
        let mut terms = vec![(3.0 / 12.0, Permutation::identity(4))];
        for p in Permutation::all(4) {
            let mut lengths: Vec<usize> = p.cycles().iter().map(Vec::len).collect();
            lengths.sort_unstable();
            if lengths == [4] {
                terms.push((2.0 / 12.0, p));
            } else if lengths == [2, 2] {
                terms.push((-1.0 / 12.0, p));
            }
        }
        let (be, norm) = lcu_from_terms(&terms, 2).unwrap();
        assert!((norm - 1.5).abs() < 1e-12);
        let pi4 = symmetric_projector(4, 2).unwrap();
        assert!(be.block.distance(&pi4.scale(1.0 / norm)) < 1e-10);
        assert!(be.residual_to_target < 1e-10);
    }

    #[test]
    fn three_copy_block_is_projector() {
        let be = three_copy_circuit().unwrap();
        assert!(be.residual_to_target < 1e-12, "{}", be.residual_to_target);
        assert!((be.block.trace().re - 4.0).abs() < 1e-12);
        let u = compile_to_unitary(&be.circuit).unwrap();
        assert_eq!(u.dim(), 16);
        assert!(unitarity_defect(&u) < UNITARITY_TOL);
    }

    #[test]
    fn three_copy_branch_coefficients() {
        let ordering = [
            Permutation::parse_cycles(3, "(123)").unwrap(),
            Permutation::parse_cycles(3, "(132)").unwrap(),
        ];
        let terms = branch_terms(&ordering, &three_copy_angles()).unwrap();
        // Paths (0,0), (1,0), (0,1), (1,1); the last multiplies out to the identity.
        let w: Vec<f64> = terms.iter().map(|t| t.weight).collect();
        let sqrt3 = 3f64.sqrt();
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-12 && (w[2] - 1.0 / 3.0).abs() < 1e-12);
        assert!((w[0] - (sqrt3 + 1.0) / 6.0).abs() < 1e-12);
        assert!((w[3] - (1.0 - sqrt3) / 6.0).abs() < 1e-12);
        // For qubits the block is (I + P((123)) + P((132)))/3.
        assert!(terms[3].element.is_identity());
        assert!((w[0] + w[3] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(terms[1].element, ordering[0]);
        assert_eq!(terms[2].element, ordering[1]);
    }

    #[test]
    fn three_copy_output_matches_closed_form() {
        let be = three_copy_circuit().unwrap();
        let (_, input) = depolarized_copies(2, 3, 0.3);
        let (p, sigma) = apply_purifier(&be, &input).unwrap();
        let cf = three_copy_closed_form(2, 0.3).unwrap();
        assert!((p - 0.745).abs() < 1e-12);
        assert!((p - cf.p).abs() < 1e-12);
        assert!((sigma.get(0, 0).re - cf.f).abs() < 1e-12);
        assert!((sigma.get(0, 0).re - 0.929865771812).abs() < 1e-9);
    }

    #[test]
    fn symmetric_pure_input_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = crate::tensor::random_pure_state(2, &mut rng);
        let one = ComplexMatrix::outer(SubsystemShape::uniform(2, 1).unwrap(), &psi).unwrap();
        let input = kron_all(&[one.clone(), one.clone(), one.clone()]);
        let (p, sigma) = apply_purifier(&three_copy_circuit().unwrap(), &input).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(sigma.distance(&one) < 1e-12);
    }

    #[test]
    fn lcu_matches_projected_channel_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, d) in [(2, 2), (3, 2), (2, 3)] {
            let be = lcu_purifier(n, d).unwrap();
            let pi = symmetric_projector(n, d).unwrap();
            for _ in 0..3 {
                let rho = random_density_matrix(&SubsystemShape::uniform(d, 1).unwrap(), &mut rng);
                let input = kron_all(&vec![rho; n]);
                let direct = &(&pi * &input) * &pi;
                let p_direct = direct.trace().re;
                let sigma_direct = partial_trace(&direct, &[1]).unwrap().scale(1.0 / p_direct);
                let (p, sigma) = apply_purifier(&be, &input).unwrap();
                assert!((p - p_direct).abs() < 1e-10);
                assert!(sigma.distance(&sigma_direct) < 1e-10);
            }
        }
    }

    #[test]
    fn zero_success_probability_is_rejected() {
        let be = lcu_purifier(2, 2).unwrap();
        // The singlet is annihilated by the symmetric projector.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
            C64::new(-s, 0.0),
            C64::new(0.0, 0.0),
        ];
        let singlet = ComplexMatrix::outer(SubsystemShape::uniform(2, 2).unwrap(), &v).unwrap();
        assert!(matches!(
            apply_purifier(&be, &singlet),
            Err(PurifyError::ZeroSuccessProbability(_))
        ));
    }

    #[test]
    fn zero_angles_give_identity_block() {
        let be = four_copy_ansatz(&[0.0; 6]).unwrap();
        let identity = ComplexMatrix::identity(SubsystemShape::uniform(2, 4).unwrap());
        assert!(be.block.distance(&identity) < 1e-14);
        // ‖I − Π₄‖_F² = 16 − 5.
        assert!((be.residual_to_target - 11f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn group_algebra_residual_matches_compiled_block() {
        let ordering = four_copy_ordering();
        let objective = GroupAlgebraResidual::new(&ordering, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let angles: Vec<f64> = (0..6).map(|_| rng.random_range(-6.0..6.0)).collect();
            let be = four_copy_ansatz(&angles).unwrap();
            assert!((objective.squared(&angles).sqrt() - be.residual_to_target).abs() < 1e-10);
            let terms = branch_terms(&ordering, &angles).unwrap();
            let sum: Vec<(f64, Permutation)> =
                terms.into_iter().map(|t| (t.weight, t.element)).collect();
            assert!(
                weighted_permutation_sum(&sum, 2)
                    .unwrap()
                    .distance(&be.block)
                    < 1e-12
            );
        }
    }

    #[test]
    fn ansatz_rejects_other_classes() {
        let mut ordering = four_copy_ordering();
        ordering[2] = Permutation::parse_cycles(4, "(123)").unwrap();
        assert!(matches!(
            four_copy_ansatz_with(&ordering, &[0.0; 6]),
            Err(PurifyError::InvalidPermutation(_))
        ));
        assert!(four_copy_ansatz(&[0.0; 5]).is_err());
    }

    #[test]
    fn training_is_deterministic_and_bounded_by_start() {
        let ordering = four_copy_ordering();
        let a = train_four_copy_report(7, 4, &ordering).unwrap();
        let b = train_four_copy_report(7, 4, &ordering).unwrap();
        assert_eq!(a.angles, b.angles);
        assert_eq!(a.restart_seed, b.restart_seed);
        assert!(a.residual < 11f64.sqrt());
        assert!(a.encoding.block.operator_norm() <= 1.0 + 1e-10);
    }

    #[test]
    fn trained_success_probability_tracks_block() {
        let report = train_four_copy_report(1, 2, &four_copy_ordering()).unwrap();
        let (_, input) = depolarized_copies(2, 4, 0.3);
        let (p, sigma) = apply_purifier(&report.encoding, &input).unwrap();
        assert!(p > 0.0 && p <= 1.0 + 1e-12);
        assert!((sigma.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn netlist_lists_every_gate() {
        let be = three_copy_circuit().unwrap();
        let text = be.circuit.to_netlist();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("RY -0.955316618"));
        assert_eq!(lines[1], "CPERM +1 (123) anc=1 q1 q2 q3");
        let lcu = lcu_purifier(2, 2).unwrap().circuit.to_netlist();
        assert!(lcu.starts_with("PREP V anc\n") && lcu.ends_with("PREP V† anc\n"));
    }
}
