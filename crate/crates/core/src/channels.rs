//! Noise channels in Kraus form, their Choi operators, and the Haar-averaged
//! moment operators `Qₙ`, `Rₙ` that enter the purification SDPs.
//!
//! Haar integrals are never sampled: `∫ψ^{⊗k}dψ = Π_k / D(k, d)` is used
//! directly, so every quantity here is exact up to floating point.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{PurifyError, Result};
use crate::symgroup::{sym_dim, symmetric_projector};
use crate::tensor::{
    kron, min_eigenvalue, partial_trace, partial_transpose, ComplexMatrix, SubsystemShape, C64,
};

/// Tolerance for `Σ K†K = I`.
pub const TRACE_PRESERVING_TOL: f64 = 1e-10;

/// Largest `d^{n+1}` for which moment operators are built densely.
pub const MOMENT_BUDGET: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Depolarizing,
    Pauli,
    AmplitudeDamping,
    Custom,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::Pauli => "pauli",
            ChannelKind::AmplitudeDamping => "amplitude_damping",
            ChannelKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A trace-preserving channel `ℂ^d → ℂ^d` given by Kraus operators.
#[derive(Clone, Debug)]
pub struct NoiseChannel {
    kraus: Vec<ComplexMatrix>,
    kind: ChannelKind,
    delta: Option<f64>,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
        return Err(PurifyError::NoiseOutOfRange(delta));
    }
    Ok(())
}

fn qudit(d: usize) -> SubsystemShape {
    SubsystemShape::uniform(d, 1).expect("d ≥ 2")
}

fn pauli_matrices() -> [ComplexMatrix; 4] {
    let s = qudit(2);
    let z0 = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let from = |e: [C64; 4]| ComplexMatrix::from_fn(s.clone(), |r, c| e[2 * r + c]);
    [
        from([one, z0, z0, one]),
        from([z0, one, one, z0]),
        from([z0, -i, i, z0]),
        from([one, z0, z0, -one]),
    ]
}

/// Weights of the single-qubit Pauli preset `(I, X, Y, Z)`.
fn pauli_weights(delta: f64) -> [f64; 4] {
    [1.0 - 0.75 * delta, 0.1 * delta, 0.2 * delta, 0.45 * delta]
}

impl NoiseChannel {
    /// Validates trace preservation; zero Kraus operators are dropped.
    pub fn custom(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::build(kraus, ChannelKind::Custom, None)
    }

    fn build(kraus: Vec<ComplexMatrix>, kind: ChannelKind, delta: Option<f64>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| {
            PurifyError::InvalidParameter("channel needs a Kraus operator".into())
        })?;
        let d = first.dim();
        let mut sum = DMatrix::<C64>::zeros(d, d);
        for k in &kraus {
            if k.dim() != d {
                return Err(PurifyError::DimensionMismatch {
                    expected: d,
                    found: k.dim(),
                });
            }
            sum += k.data().adjoint() * k.data();
        }
        let defect = (sum - DMatrix::<C64>::identity(d, d)).norm();
        if defect > TRACE_PRESERVING_TOL {
            return Err(PurifyError::InvalidParameter(format!(
                "Kraus set is not trace preserving (defect {defect:.3e})"
            )));
        }
        let kraus: Vec<ComplexMatrix> = kraus
            .into_iter()
            .filter(|k| k.frobenius_norm() > 0.0)
            .collect();
        Ok(Self { kraus, kind, delta })
    }

    pub fn identity(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(PurifyError::InvalidParameter(format!("d = {d} < 2")));
        }
        Self::build(
            vec![ComplexMatrix::identity(qudit(d))],
            ChannelKind::Custom,
            None,
        )
    }

    /// `ρ ↦ (1−δ)ρ + δ·I/d`, realized with the shift/clock (Weyl) operators.
    pub fn depolarizing(d: usize, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if d < 2 {
            return Err(PurifyError::InvalidParameter(format!("d = {d} < 2")));
        }
        let dd = (d * d) as f64;
        let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / d as f64);
        let mut kraus = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let weight = if a == 0 && b == 0 {
                    1.0 - delta + delta / dd
                } else {
                    delta / dd
                };
                if weight == 0.0 {
                    continue;
                }
                let amp = weight.sqrt();
                // X^a Z^b |k⟩ = ω^{bk} |k + a⟩
                let w = ComplexMatrix::from_fn(qudit(d), |r, c| {
                    if r == (c + a) % d {
                        omega.powu((b * c) as u32) * amp
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                kraus.push(w);
            }
        }
        Self::build(kraus, ChannelKind::Depolarizing, Some(delta))
    }

    /// Qubit Pauli channel with weights `(1 − 0.75δ, 0.1δ, 0.2δ, 0.45δ)` on `(I, X, Y, Z)`.
    pub fn pauli_preset(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let paulis = pauli_matrices();
        let kraus = pauli_weights(delta)
            .iter()
            .zip(paulis.iter())
            .map(|(w, p)| p.scale(w.sqrt()))
            .collect();
        Self::build(kraus, ChannelKind::Pauli, Some(delta))
    }

    /// Two-qubit (`d = 4`) version of the Pauli preset: Kraus set `{K_j ⊗ K_k}`.
    pub fn pauli_preset_qudit(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let single: Vec<ComplexMatrix> = pauli_weights(delta)
            .iter()
            .zip(pauli_matrices().iter())
            .map(|(w, p)| p.scale(w.sqrt()))
            .collect();
        let mut kraus = Vec::with_capacity(16);
        for kj in &single {
            for kk in &single {
                let prod = kron(kj, kk);
                kraus.push(prod.reshaped(qudit(4))?);
            }
        }
        Self::build(kraus, ChannelKind::Pauli, Some(delta))
    }

    /// `K₀ = |0⟩⟨0| + √(1−δ)|1⟩⟨1|`, `K₁ = √δ|0⟩⟨1|`.
    pub fn amplitude_damping(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let k0 = ComplexMatrix::from_real_rows(qudit(2), &[1.0, 0.0, 0.0, (1.0 - delta).sqrt()])?;
        let k1 = ComplexMatrix::from_real_rows(qudit(2), &[0.0, delta.sqrt(), 0.0, 0.0])?;
        Self::build(vec![k0, k1], ChannelKind::AmplitudeDamping, Some(delta))
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].dim()
    }

    /// `Σ_k K ρ K†` for `ρ` on a single system.
    pub fn apply(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        if m.dim() != self.dim() {
            return Err(PurifyError::DimensionMismatch {
                expected: self.dim(),
                found: m.dim(),
            });
        }
        let mut out = DMatrix::<C64>::zeros(m.dim(), m.dim());
        for k in &self.kraus {
            out += k.data() * m.data() * k.data().adjoint();
        }
        ComplexMatrix::new(m.shape().clone(), out)
    }

    /// Applies the channel independently on each listed subsystem (1-based).
    pub fn apply_on(&self, m: &ComplexMatrix, subsystems: &[usize]) -> Result<ComplexMatrix> {
        let dims = m.shape().dims().to_vec();
        let mut current = m.data().clone();
        for &s in subsystems {
            if s == 0 || s > dims.len() {
                return Err(PurifyError::SubsystemOutOfRange {
                    index: s,
                    count: dims.len(),
                });
            }
            if dims[s - 1] != self.dim() {
                return Err(PurifyError::DimensionMismatch {
                    expected: self.dim(),
                    found: dims[s - 1],
                });
            }
            if let (ChannelKind::Depolarizing, Some(delta)) = (self.kind, self.delta) {
                current = depolarize_local(&current, delta, &dims, s - 1);
                continue;
            }
            let mut next = DMatrix::<C64>::zeros(current.nrows(), current.ncols());
            for k in &self.kraus {
                let left = apply_local_left(&current, k.data(), &dims, s - 1);
                // (L K†_s) = (K_s L†)†
                let both = apply_local_left(&left.adjoint(), k.data(), &dims, s - 1).adjoint();
                next += both;
            }
            current = next;
        }
        ComplexMatrix::new(m.shape().clone(), current)
    }

    /// `𝒩^{⊗n}` applied to an operator on `(ℂ^d)^{⊗n}`.
    pub fn apply_tensor_power(&self, n: usize, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        if m.shape().len() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: m.shape().len(),
            });
        }
        let all: Vec<usize> = (1..=n).collect();
        self.apply_on(m, &all)
    }
}

/// `(1−δ) m + δ · tr_s(m) ⊗_s I/d` on subsystem `s` (0-based).
fn depolarize_local(m: &DMatrix<C64>, delta: f64, dims: &[usize], s: usize) -> DMatrix<C64> {
    let d = dims[s];
    let inner: usize = dims[s + 1..].iter().product();
    let strip = |idx: usize| (idx / (d * inner), (idx / inner) % d, idx % inner);
    let mut out = m * C64::new(1.0 - delta, 0.0);
    let w = delta / d as f64;
    for col in 0..m.ncols() {
        let (ca, cx, cb) = strip(col);
        for row in 0..m.nrows() {
            let (ra, rx, rb) = strip(row);
            if rx != cx {
                continue;
            }
            let mut acc = C64::new(0.0, 0.0);
            for u in 0..d {
                acc += m[((ra * d + u) * inner + rb, (ca * d + u) * inner + cb)];
            }
            out[(row, col)] += acc * w;
        }
    }
    out
}

/// `(I ⊗ op ⊗ I) · m` with `op` acting on subsystem `s` (0-based).
fn apply_local_left(m: &DMatrix<C64>, op: &DMatrix<C64>, dims: &[usize], s: usize) -> DMatrix<C64> {
    let d = dims[s];
    let inner: usize = dims[s + 1..].iter().product();
    let outer: usize = dims[..s].iter().product();
    let ncols = m.ncols();
    let mut out = DMatrix::<C64>::zeros(m.nrows(), ncols);
    for col in 0..ncols {
        for a in 0..outer {
            for b in 0..inner {
                let base = a * d * inner + b;
                for x in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for u in 0..d {
                        let kxu = op[(x, u)];
                        if kxu.re != 0.0 || kxu.im != 0.0 {
                            acc += kxu * m[(base + u * inner, col)];
                        }
                    }
                    out[(base + x * inner, col)] = acc;
                }
            }
        }
    }
    out
}

/// Choi operator `J = Σ_{ij} |i⟩⟨j| ⊗ 𝒩(|i⟩⟨j|)`, input system first.
#[derive(Clone, Debug)]
pub struct ChoiOperator {
    pub matrix: ComplexMatrix,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl ChoiOperator {
    /// Choi operator of an arbitrary linear map given as a closure on basis operators.
    pub fn of_map(
        input: &SubsystemShape,
        output: &SubsystemShape,
        map: impl Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
    ) -> Result<Self> {
        let din = input.total_dim();
        let dout = output.total_dim();
        let shape = input.concat(output);
        let mut data = DMatrix::<C64>::zeros(din * dout, din * dout);
        for i in 0..din {
            for j in 0..din {
                let unit = ComplexMatrix::from_fn(input.clone(), |r, c| {
                    if r == i && c == j {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
                let image = map(&unit)?;
                if image.dim() != dout {
                    return Err(PurifyError::DimensionMismatch {
                        expected: dout,
                        found: image.dim(),
                    });
                }
                for r in 0..dout {
                    for c in 0..dout {
                        data[(i * dout + r, j * dout + c)] = image.get(r, c);
                    }
                }
            }
        }
        Ok(Self {
            matrix: ComplexMatrix::new(shape, data)?,
            input_dim: din,
            output_dim: dout,
        })
    }

    /// `𝒩(ρ) = tr_in[(ρᵀ ⊗ I) J]`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.dim() != self.input_dim {
            return Err(PurifyError::DimensionMismatch {
                expected: self.input_dim,
                found: rho.dim(),
            });
        }
        let dout = self.output_dim;
        let j = self.matrix.data();
        let out = DMatrix::from_fn(dout, dout, |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..self.input_dim {
                for b in 0..self.input_dim {
                    // (ρᵀ)_{ab} = ρ_{ba}
                    acc += rho.get(b, a) * j[(b * dout + r, a * dout + c)];
                }
            }
            acc
        });
        ComplexMatrix::new(qudit_or_flat(dout), out)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.matrix)
    }

    /// `tr_out J`, which equals `I_in` for trace-preserving maps.
    pub fn input_marginal(&self) -> Result<ComplexMatrix> {
        let n_in = self.matrix.shape().len() - output_subsystems(self).len();
        let keep: Vec<usize> = (1..=n_in).collect();
        partial_trace(&self.matrix, &keep)
    }
}

fn output_subsystems(choi: &ChoiOperator) -> Vec<usize> {
    // The output occupies the trailing subsystems whose dimensions multiply to output_dim.
    let dims = choi.matrix.shape().dims();
    let mut prod = 1;
    let mut k = dims.len();
    while prod < choi.output_dim {
        k -= 1;
        prod *= dims[k];
    }
    (k + 1..=dims.len()).collect()
}

fn qudit_or_flat(d: usize) -> SubsystemShape {
    qudit(d.max(2))
}

pub fn choi(ch: &NoiseChannel) -> ChoiOperator {
    let s = qudit(ch.dim());
    ChoiOperator::of_map(&s, &s, |m| ch.apply(m)).expect("channel maps d×d to d×d")
}

/// Haar-averaged operators on `(ℂ^d)^{⊗(n+1)}` (last factor is the reference copy):
/// `q = (𝒩^{⊗n} ⊗ id)(Π_{n+1})/D(n+1, d)` and `r = 𝒩^{⊗n}(Πₙ)/D(n, d) ⊗ I_d`.
#[derive(Clone, Debug)]
pub struct MomentOperators {
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
    pub n: usize,
    pub d: usize,
}

impl MomentOperators {
    /// `q` with the first `n` factors transposed.
    pub fn q_transposed(&self) -> ComplexMatrix {
        partial_transpose(&self.q, &(1..=self.n).collect::<Vec<_>>()).expect("valid subsystems")
    }

    /// `r` with the first `n` factors transposed.
    pub fn r_transposed(&self) -> ComplexMatrix {
        partial_transpose(&self.r, &(1..=self.n).collect::<Vec<_>>()).expect("valid subsystems")
    }
}

pub fn moment_operators(ch: &NoiseChannel, n: usize) -> Result<MomentOperators> {
    moment_operators_within(ch, n, MOMENT_BUDGET)
}

pub(crate) fn moment_operators_within(
    ch: &NoiseChannel,
    n: usize,
    budget: usize,
) -> Result<MomentOperators> {
    let d = ch.dim();
    if n == 0 {
        return Err(PurifyError::InvalidParameter("n must be ≥ 1".into()));
    }
    let full = d.checked_pow(n as u32 + 1).unwrap_or(usize::MAX);
    if full > budget {
        return Err(PurifyError::BudgetExceeded(format!(
            "d^(n+1) = {full} > {budget}"
        )));
    }
    let noisy: Vec<usize> = (1..=n).collect();
    let pi_next = symmetric_projector(n + 1, d)?.scale(1.0 / sym_dim(n + 1, d) as f64);
    let q = ch.apply_on(&pi_next, &noisy)?;
    let pi_n = symmetric_projector(n, d)?.scale(1.0 / sym_dim(n, d) as f64);
    let r = kron(
        &ch.apply_on(&pi_n, &noisy)?,
        &ComplexMatrix::identity(qudit(d)),
    );
    Ok(MomentOperators { q, r, n, d })
}
