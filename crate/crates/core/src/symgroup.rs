//! Symmetric-group combinatorics and the permutation operators they induce on
//! `(ℂ^d)^{⊗n}`.
//!
//! Operator convention: `P(c)|i₁…iₙ⟩ = |i_{c⁻¹(1)} … i_{c⁻¹(n)}⟩`, i.e. the
//! factor sitting at position `j` moves to position `c(j)`. With this choice
//! `P(c₁ ∘ c₂) = P(c₁) P(c₂)`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{PurifyError, Result};
use crate::tensor::{ComplexMatrix, SubsystemShape};

/// Upper bound on `n! · dⁿ` for operators built by summing over the whole group.
pub const GROUP_SUM_BUDGET: u128 = 1 << 24;

/// Largest degree accepted by [`conjugacy_classes`].
pub const MAX_CLASS_DEGREE: usize = 12;

/// A bijection of `{1..n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    // images[j] = c(j + 1) - 1
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    /// Builds from 1-based one-line notation `[c(1), …, c(n)]`.
    pub fn from_one_line(one_line: &[usize]) -> Result<Self> {
        let n = one_line.len();
        let mut seen = vec![false; n];
        let mut images = Vec::with_capacity(n);
        for &v in one_line {
            if v == 0 || v > n || seen[v - 1] {
                return Err(PurifyError::InvalidPermutation(format!(
                    "{one_line:?} is not a bijection of 1..{n}"
                )));
            }
            seen[v - 1] = true;
            images.push(v - 1);
        }
        Ok(Self { images })
    }

    /// Builds a degree-`n` permutation from disjoint 1-based cycles, e.g. `[[1, 2, 3]]` for `(123)`.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cycle in cycles {
            for (k, &a) in cycle.iter().enumerate() {
                if a == 0 || a > n || touched[a - 1] {
                    return Err(PurifyError::InvalidPermutation(format!(
                        "bad cycle list {cycles:?} for degree {n}"
                    )));
                }
                touched[a - 1] = true;
                let b = cycle[(k + 1) % cycle.len()];
                if b == 0 || b > n {
                    return Err(PurifyError::InvalidPermutation(format!(
                        "bad cycle list {cycles:?} for degree {n}"
                    )));
                }
                images[a - 1] = b - 1;
            }
        }
        Ok(Self { images })
    }

    /// Parses cycle notation such as `(123)(45)`, `(1 2)(3 4)`, `(1,10)` or `(1)`.
    pub fn parse_cycles(n: usize, text: &str) -> Result<Self> {
        let bad =
            || PurifyError::InvalidPermutation(format!("cannot parse cycle notation {text:?}"));
        let mut cycles = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let body_end = rest.find(')').ok_or_else(bad)?;
            if !rest.starts_with('(') {
                return Err(bad());
            }
            let body = &rest[1..body_end];
            let labels: Vec<usize> = if body.contains(',') || body.contains(' ') {
                body.split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            } else {
                body.chars()
                    .map(|ch| ch.to_digit(10).map(|v| v as usize).ok_or_else(bad))
                    .collect::<Result<_>>()?
            };
            if labels.is_empty() {
                return Err(bad());
            }
            cycles.push(labels);
            rest = rest[body_end + 1..].trim_start();
        }
        Self::from_cycles(n, &cycles)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    /// `c(j)` for a 1-based point `j`.
    pub fn image(&self, j: usize) -> usize {
        self.images[j - 1] + 1
    }

    /// 1-based one-line notation.
    pub fn one_line(&self) -> Vec<usize> {
        self.images.iter().map(|&v| v + 1).collect()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(
            self.degree(),
            other.degree(),
            "composing permutations of different degree"
        );
        Permutation {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.degree()];
        for (j, &cj) in self.images.iter().enumerate() {
            images[cj] = j;
        }
        Permutation { images }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(j, &c)| j == c)
    }

    /// Disjoint cycles (1-based), including fixed points, each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                cycle.push(j + 1);
                j = self.images[j];
            }
            out.push(cycle);
        }
        out
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    pub fn cycle_type(&self) -> CycleType {
        let mut mult = vec![0; self.degree()];
        for c in self.cycles() {
            mult[c.len() - 1] += 1;
        }
        CycleType {
            multiplicities: mult,
        }
    }

    pub fn sign(&self) -> i32 {
        let transpositions: usize = self.cycles().iter().map(|c| c.len() - 1).sum();
        if transpositions.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Every element of `Sₙ` in lexicographic one-line order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut current: Vec<usize> = (0..n).collect();
        let mut out = vec![Permutation {
            images: current.clone(),
        }];
        // Standard next-permutation walk.
        while let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) {
            let j = (i..n)
                .rev()
                .find(|&j| current[j] > current[i - 1])
                .expect("pivot exists");
            current.swap(i - 1, j);
            current[i..].reverse();
            out.push(Permutation {
                images: current.clone(),
            });
        }
        out
    }

    /// Basis-index map of `P(c)` on `(ℂ^d)^{⊗n}`: `P(c)|k⟩ = |map[k]⟩`.
    pub fn basis_map(&self, d: usize) -> Vec<usize> {
        let n = self.degree();
        let total = d.pow(n as u32);
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * d;
        }
        let mut out = vec![0; total];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut target = 0;
            for (j, &stride) in strides.iter().enumerate() {
                let digit = (k / stride) % d;
                target += digit * strides[self.images[j]];
            }
            *slot = target;
        }
        out
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nontrivial: Vec<Vec<usize>> =
            self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if nontrivial.is_empty() {
            return write!(f, "(1)");
        }
        let wide = self.degree() >= 10;
        for c in nontrivial {
            let labels: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            write!(f, "({})", labels.join(if wide { "," } else { "" }))?;
        }
        Ok(())
    }
}

/// Cycle multiplicities `v₁ … vₙ` with `Σ j·v_j = n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CycleType {
    pub multiplicities: Vec<usize>,
}

impl CycleType {
    pub fn degree(&self) -> usize {
        self.multiplicities
            .iter()
            .enumerate()
            .map(|(j, v)| (j + 1) * v)
            .sum()
    }

    /// Cycle lengths in non-increasing order, e.g. `[2, 2]`.
    pub fn partition(&self) -> Vec<usize> {
        let mut parts = Vec::new();
        for (j, &v) in self.multiplicities.iter().enumerate().rev() {
            parts.extend(std::iter::repeat_n(j + 1, v));
        }
        parts
    }

    /// `n! / ∏_j (j^{v_j} v_j!)`.
    pub fn class_size(&self) -> u64 {
        let n = self.degree();
        let mut denom: u128 = 1;
        for (j, &v) in self.multiplicities.iter().enumerate() {
            denom *= ((j + 1) as u128).pow(v as u32) * factorial(v);
        }
        (factorial(n) / denom) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugacyClass {
    pub cycle_type: CycleType,
    pub size: u64,
    pub representative: Permutation,
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Dimension of the symmetric subspace of `(ℂ^d)^{⊗n}`: `binom(n+d−1, n)`.
pub fn sym_dim(n: usize, d: usize) -> u64 {
    let mut acc: u128 = 1;
    // binom(n + d - 1, d - 1), built incrementally so every step is an integer
    for k in 1..d {
        acc = acc * (n + k) as u128 / k as u128;
    }
    acc as u64
}

fn check_group_sum_budget(n: usize, d: usize) -> Result<()> {
    if n == 0 || d < 2 {
        return Err(PurifyError::InvalidParameter(format!(
            "need n ≥ 1 and d ≥ 2 (got n={n}, d={d})"
        )));
    }
    let work = factorial(n).saturating_mul((d as u128).saturating_pow(n as u32));
    if work > GROUP_SUM_BUDGET {
        return Err(PurifyError::BudgetExceeded(format!(
            "n!·dⁿ = {work} for n={n}, d={d}"
        )));
    }
    Ok(())
}

pub fn permutation_operator(c: &Permutation, d: usize) -> ComplexMatrix {
    weighted_permutation_sum(&[(1.0, c.clone())], d).expect("d ≥ 2 and n ≥ 1")
}

/// Accumulates `Σ_c weight(c) · P(c)` over a list of permutations.
pub fn weighted_permutation_sum(terms: &[(f64, Permutation)], d: usize) -> Result<ComplexMatrix> {
    let n = terms
        .first()
        .map(|(_, c)| c.degree())
        .ok_or_else(|| PurifyError::InvalidParameter("empty sum".into()))?;
    let shape = SubsystemShape::uniform(d, n)?;
    let total = shape.total_dim();
    let mut data = nalgebra::DMatrix::<Complex64>::zeros(total, total);
    for (w, c) in terms {
        if c.degree() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: c.degree(),
            });
        }
        for (k, target) in c.basis_map(d).into_iter().enumerate() {
            data[(target, k)] += Complex64::new(*w, 0.0);
        }
    }
    ComplexMatrix::new(shape, data)
}

/// `Πₙ = (1/n!) Σ_{c∈Sₙ} P(c)`.
pub fn symmetric_projector(n: usize, d: usize) -> Result<ComplexMatrix> {
    check_group_sum_budget(n, d)?;
    let w = 1.0 / factorial(n) as f64;
    let terms: Vec<(f64, Permutation)> = Permutation::all(n).into_iter().map(|c| (w, c)).collect();
    weighted_permutation_sum(&terms, d)
}

/// Integer partitions of `n` in reverse-lexicographic order (`[n]` last).
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(prefix.clone());
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out.reverse();
    out
}

/// Conjugacy classes of `Sₙ`, one per integer partition, identity class first.
///
/// The representative fills the points `1..n` consecutively with the longest
/// cycles first, so `[2, 1]` gives `(12)` and `[2, 2]` gives `(12)(34)`.
pub fn conjugacy_classes(n: usize) -> Result<Vec<ConjugacyClass>> {
    if n == 0 || n > MAX_CLASS_DEGREE {
        return Err(PurifyError::InvalidParameter(format!(
            "conjugacy classes need 1 ≤ n ≤ {MAX_CLASS_DEGREE}, got {n}"
        )));
    }
    let mut classes = Vec::new();
    for parts in partitions(n) {
        let mut multiplicities = vec![0; n];
        let mut cycles = Vec::new();
        let mut next = 1;
        for &len in &parts {
            multiplicities[len - 1] += 1;
            cycles.push((next..next + len).collect::<Vec<_>>());
            next += len;
        }
        let cycle_type = CycleType { multiplicities };
        classes.push(ConjugacyClass {
            size: cycle_type.class_size(),
            representative: Permutation::from_cycles(n, &cycles)?,
            cycle_type,
        });
    }
    Ok(classes)
}

/// `Π̃ₙ = (1/n!) Σ_i |C_i| P(c_i)` with one representative per conjugacy class.
pub fn class_representative_projector(n: usize, d: usize) -> Result<ComplexMatrix> {
    check_group_sum_budget(n, d)?;
    let nf = factorial(n) as f64;
    let terms: Vec<(f64, Permutation)> = conjugacy_classes(n)?
        .into_iter()
        .map(|cls| (cls.size as f64 / nf, cls.representative))
        .collect();
    weighted_permutation_sum(&terms, d)
}

/// Elements of the conjugacy class with the given cycle lengths, e.g. `[4]` or `[2, 2]`.
pub fn class_elements(n: usize, partition: &[usize]) -> Vec<Permutation> {
    let mut want = partition.to_vec();
    want.sort_unstable_by(|a, b| b.cmp(a));
    Permutation::all(n)
        .into_iter()
        .filter(|c| c.cycle_type().partition() == want)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{eigenvalues_hermitian, partial_trace};

    #[test]
    fn one_line_validation() {
        assert!(Permutation::from_one_line(&[2, 3, 1]).is_ok());
        assert!(Permutation::from_one_line(&[1, 1, 2]).is_err());
        assert!(Permutation::from_one_line(&[0, 1]).is_err());
    }

    #[test]
    fn cycle_parsing_and_display() {
        let c = Permutation::parse_cycles(3, "(123)").unwrap();
        assert_eq!(c.one_line(), vec![2, 3, 1]);
        assert_eq!(c.to_string(), "(123)");
        let c = Permutation::parse_cycles(4, "(1 2)(3 4)").unwrap();
        assert_eq!(c.to_string(), "(12)(34)");
        assert_eq!(Permutation::identity(3).to_string(), "(1)");
        assert_eq!(
            Permutation::parse_cycles(3, "(1)").unwrap(),
            Permutation::identity(3)
        );
        assert!(Permutation::parse_cycles(3, "(12").is_err());
        assert!(Permutation::parse_cycles(3, "(14)").is_err());
        let wide = Permutation::parse_cycles(10, "(1,10)").unwrap();
        assert_eq!(wide.to_string(), "(1,10)");
    }

    #[test]
    fn transposition_is_swap() {
        let swap = permutation_operator(&Permutation::parse_cycles(2, "(12)").unwrap(), 2);
        #[rustfmt::skip]
        let rows = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        let expected =
            ComplexMatrix::from_real_rows(SubsystemShape::uniform(2, 2).unwrap(), &rows).unwrap();
        assert_eq!(swap, expected);
    }

    #[test]
    fn three_cycles_multiply_to_identity() {
        let a = permutation_operator(&Permutation::parse_cycles(3, "(123)").unwrap(), 2);
        let b = permutation_operator(&Permutation::parse_cycles(3, "(132)").unwrap(), 2);
        let id = ComplexMatrix::identity(SubsystemShape::uniform(2, 3).unwrap());
        assert!((&a * &b).distance(&id) < 1e-15);
        assert!((a.trace().re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn convention_moves_factor_j_to_position_cj() {
        // (12) on |0⟩|1⟩|0⟩ (d = 2) gives |1⟩|0⟩|0⟩; (123) sends slot 1 → 2, 2 → 3, 3 → 1.
        let c = Permutation::parse_cycles(3, "(123)").unwrap();
        let map = c.basis_map(2);
        // |100⟩ = 4: the 1 in slot 1 moves to slot 2 → |010⟩ = 2
        assert_eq!(map[4], 2);
        assert_eq!(map[1], 4);
    }

    #[test]
    fn sym_dim_values() {
        assert_eq!(sym_dim(2, 2), 3);
        assert_eq!(sym_dim(3, 2), 4);
        assert_eq!(sym_dim(2, 4), 10);
        assert_eq!(sym_dim(3, 3), 10);
        assert_eq!(sym_dim(8, 10), 24310);
    }

    #[test]
    fn projector_small_cases() {
        let pi2 = symmetric_projector(2, 2).unwrap();
        let swap = permutation_operator(&Permutation::parse_cycles(2, "(12)").unwrap(), 2);
        let expected = (&ComplexMatrix::identity(swap.shape().clone()) + &swap).scale(0.5);
        assert!(pi2.distance(&expected) < 1e-15);
        assert!((pi2.trace().re - 3.0).abs() < 1e-14);

        let pi3 = symmetric_projector(3, 2).unwrap();
        assert!((pi3.trace().re - 4.0).abs() < 1e-14);
        let terms: Vec<(f64, Permutation)> = ["(1)", "(123)", "(132)"]
            .iter()
            .map(|s| (1.0 / 3.0, Permutation::parse_cycles(3, s).unwrap()))
            .collect();
        assert!(pi3.distance(&weighted_permutation_sum(&terms, 2).unwrap()) < 1e-14);
    }

    #[test]
    fn projector_budget() {
        assert!(symmetric_projector(8, 2).is_ok());
        assert!(matches!(
            symmetric_projector(9, 3),
            Err(PurifyError::BudgetExceeded(_))
        ));
        assert!(symmetric_projector(0, 2).is_err());
    }

    #[test]
    fn class_enumeration() {
        let c3 = conjugacy_classes(3).unwrap();
        assert_eq!(c3.len(), 3);
        assert_eq!(c3.iter().map(|c| c.size).collect::<Vec<_>>(), vec![1, 3, 2]);
        assert_eq!(c3[1].representative.to_string(), "(12)");
        assert_eq!(c3[2].representative.to_string(), "(123)");

        let c4 = conjugacy_classes(4).unwrap();
        let size_of = |p: &[usize]| {
            c4.iter()
                .find(|c| c.cycle_type.partition() == p)
                .unwrap()
                .size
        };
        assert_eq!(size_of(&[2, 2]), 3);
        assert_eq!(size_of(&[4]), 6);
        assert_eq!(class_elements(4, &[4]).len(), 6);
        assert_eq!(class_elements(4, &[2, 2]).len(), 3);

        let c1 = conjugacy_classes(1).unwrap();
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0].size, 1);

        // partition counts p(n)
        let counts: Vec<usize> = (1..=12)
            .map(|n| conjugacy_classes(n).unwrap().len())
            .collect();
        assert_eq!(counts, vec![1, 2, 3, 5, 7, 11, 15, 22, 30, 42, 56, 77]);
        for n in 1..=12 {
            let total: u128 = conjugacy_classes(n)
                .unwrap()
                .iter()
                .map(|c| c.size as u128)
                .sum();
            assert_eq!(total, factorial(n));
        }
        assert!(conjugacy_classes(13).is_err());
    }

    #[test]
    fn class_projector_n3_and_n2() {
        let tilde = class_representative_projector(3, 2).unwrap();
        let terms = vec![
            (1.0 / 6.0, Permutation::identity(3)),
            (3.0 / 6.0, Permutation::parse_cycles(3, "(12)").unwrap()),
            (2.0 / 6.0, Permutation::parse_cycles(3, "(123)").unwrap()),
        ];
        assert!(tilde.distance(&weighted_permutation_sum(&terms, 2).unwrap()) < 1e-15);
        let pi2 = symmetric_projector(2, 3).unwrap();
        assert!(class_representative_projector(2, 3).unwrap().distance(&pi2) < 1e-15);
    }

    #[test]
    fn projector_is_orthogonal_with_integer_trace() {
        for n in 1..=5 {
            for d in 2..=3 {
                let pi = symmetric_projector(n, d).unwrap();
                assert!((&pi * &pi).distance(&pi) < 1e-12, "n={n} d={d}");
                assert!(pi.hermiticity_defect() < 1e-12);
                assert!((pi.trace().re - sym_dim(n, d) as f64).abs() < 1e-10);
            }
        }
        let evals = eigenvalues_hermitian(&symmetric_projector(3, 3).unwrap()).unwrap();
        assert_eq!(
            evals.iter().filter(|v| (*v - 1.0).abs() < 1e-10).count(),
            10
        );
    }

    #[test]
    fn four_copy_class_identity_for_qubits() {
        let mut terms = vec![(3.0 / 12.0, Permutation::identity(4))];
        terms.extend(class_elements(4, &[4]).into_iter().map(|c| (2.0 / 12.0, c)));
        terms.extend(
            class_elements(4, &[2, 2])
                .into_iter()
                .map(|c| (-1.0 / 12.0, c)),
        );
        let combo = weighted_permutation_sum(&terms, 2).unwrap();
        assert!(combo.distance(&symmetric_projector(4, 2).unwrap()) < 1e-12);
    }

    #[test]
    fn reduced_symmetric_projector() {
        let pi = symmetric_projector(2, 2).unwrap();
        let r = partial_trace(&pi, &[1]).unwrap();
        assert!((r.get(0, 0).re - 1.5).abs() < 1e-15);
    }
}
