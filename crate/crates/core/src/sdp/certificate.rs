//! Positivity certificate for the two-copy golden point.
//!
//! `ω = (f₂R₂ − Q₂^{T₃})/t₂` with `t₂ = f₂d − 1` is expanded in the six-element
//! basis spanned by `V = P((12))` and `X = P((23))^{T₃}`. Its coefficients are
//! computed twice: by Hilbert–Schmidt pairing and from closed forms in `(d, δ)`.

use crate::analytic::{golden_point, EigenSpectrum};
use crate::channels::{moment_operators_within, NoiseChannel};
use crate::error::{PurifyError, Result};
use crate::symgroup::{permutation_operator, Permutation};
use crate::tensor::{min_eigenvalue, partial_transpose, ComplexMatrix, SubsystemShape, C64};

/// Largest local dimension accepted by [`golden_certificate`].
pub const MAX_CERTIFICATE_DIM: usize = 8;

/// Eigenvalue floor below which the certificate counts as violated.
pub const CERTIFICATE_EIG_FLOOR: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SValues {
    pub s_plus: f64,
    pub s_minus: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl SValues {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.s_plus,
            self.s_minus,
            self.s0,
            self.s1,
            self.s2,
            self.s3,
        ]
    }

    /// Largest componentwise difference.
    pub fn max_difference(&self, other: &SValues) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub d: usize,
    pub delta: f64,
    pub omega: ComplexMatrix,
    pub t2: f64,
    /// Coefficients `tr[ω S]` from the constructed basis.
    pub pairing: SValues,
    pub closed_form: SValues,
    /// Smallest eigenvalue of the un-normalized `f₂R₂ − Q₂^{T₃}`.
    pub min_eig: f64,
}

impl CertificateReport {
    /// Positivity, agreement of both s-value routes, and the normalization identity.
    pub fn passes(&self, tol: f64) -> bool {
        let s = &self.pairing;
        self.min_eig >= CERTIFICATE_EIG_FLOOR
            && self.pairing.max_difference(&self.closed_form) <= tol
            && (s.s_plus + s.s_minus + s.s0 - 1.0).abs() <= tol
    }
}

/// Closed-form s-values for the depolarizing channel.
pub fn closed_form_s_values(d: usize, delta: f64) -> SValues {
    let df = d as f64;
    let den = df * (df - 1.0) * (df * (delta - 2.0) - 2.0 * delta);
    SValues {
        s_plus: (df * (2.0 - 2.0 * delta + delta * delta) + (2.0 - delta) * delta) / (2.0 * df),
        s_minus: -(df - 2.0) * delta * (df * (2.0 - delta) + delta).powi(2) / (2.0 * den),
        s0: 2.0 * delta * (df * delta - df - delta) / den,
        s1: 2.0 * delta * (df + delta - df * delta) / den,
        s2: 0.0,
        s3: 0.0,
    }
}

/// The six basis operators `(S₊, S₋, S₀, S₁, S₂, S₃)` on `(ℂ^d)^{⊗3}`.
pub fn s_basis(d: usize) -> Result<[ComplexMatrix; 6]> {
    let identity = ComplexMatrix::identity(SubsystemShape::uniform(d, 3)?);
    let v = permutation_operator(&Permutation::parse_cycles(3, "(12)")?, d);
    let x = partial_transpose(
        &permutation_operator(&Permutation::parse_cycles(3, "(23)")?, d),
        &[3],
    )?;
    let df = d as f64;
    let sym = (&identity + &v).scale(0.5);
    let anti = (&identity - &v).scale(0.5);
    let s_plus = &(&sym * &(&identity - &x.scale(2.0 / (df + 1.0)))) * &sym;
    let s_minus = &(&anti * &(&identity - &x.scale(2.0 / (df - 1.0)))) * &anti;
    let xv = &x * &v;
    let vx = &v * &x;
    let vxv = &vx * &v;
    let norm = df * df - 1.0;
    let s0 = (&(&x + &vxv).scale(df) - &(&xv + &vx)).scale(1.0 / norm);
    let s1 = (&(&xv + &vx).scale(df) - &(&x + &vxv)).scale(1.0 / norm);
    let s2 = (&x - &vxv).scale(1.0 / norm.sqrt());
    let s3 = (&xv - &vx).scale_complex(C64::new(0.0, 1.0 / norm.sqrt()));
    Ok([s_plus, s_minus, s0, s1, s2, s3])
}

pub fn golden_certificate(d: usize, delta: f64) -> Result<CertificateReport> {
    if !(2..=MAX_CERTIFICATE_DIM).contains(&d) {
        return Err(PurifyError::InvalidParameter(format!(
            "d = {d} outside 2..={MAX_CERTIFICATE_DIM}"
        )));
    }
    let ch = NoiseChannel::depolarizing(d, delta)?;
    let g = golden_point(&EigenSpectrum::depolarizing(d, delta)?);
    let m = moment_operators_within(&ch, 2, MAX_CERTIFICATE_DIM.pow(3))?;
    let w = &m.r.scale(g.f) - &partial_transpose(&m.q, &[3])?;
    let t2 = w.trace().re;
    let omega = w.scale(1.0 / t2);
    let basis = s_basis(d)?;
    let pair = |k: usize| omega.trace_product(&basis[k]).re;
    let pairing = SValues {
        s_plus: pair(0),
        s_minus: pair(1),
        s0: pair(2),
        s1: pair(3),
        s2: pair(4),
        s3: pair(5),
    };
    Ok(CertificateReport {
        d,
        delta,
        t2,
        pairing,
        closed_form: closed_form_s_values(d, delta),
        min_eig: min_eigenvalue(&w)?,
        omega,
    })
}
