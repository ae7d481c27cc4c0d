//! Small dense complex linear algebra: 2×2 operators, operators up to 16×16
//! and labelled pure states of at most four qubits.
//!
//! Amplitude indices follow the register label order: the first label is the
//! most significant bit.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);
pub const I: Complex = Complex::new(0.0, 1.0);

/// Largest operator / state dimension handled here (four qubits).
pub const MAX_DIM: usize = 16;

/// Eigenvalues down to this (negative) value are treated as rounding noise.
pub const PSD_CLAMP: f64 = 1e-12;
/// Eigenvalues below this are a genuine positivity violation.
pub const PSD_REJECT: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;

/// Qubits taking part in the protocol.
///
/// `a` and `A` live with Alice, `b` and `B` with Bob. The resource pair is
/// `(a, b)`, the targets of the gate are `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    /// Alice's half of the resource pair (`a`).
    AliceAncilla,
    /// Alice's target qubit (`A`).
    AliceTarget,
    /// Bob's target qubit (`B`).
    BobTarget,
    /// Bob's half of the resource pair (`b`).
    BobAncilla,
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Qubit::AliceAncilla => "a",
            Qubit::AliceTarget => "A",
            Qubit::BobTarget => "B",
            Qubit::BobAncilla => "b",
        };
        f.write_str(s)
    }
}

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex; 2]; 2]);

impl Mat2 {
    pub const fn new(m: [[Complex; 2]; 2]) -> Self {
        Mat2(m)
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2([
            [Complex::from(m[0][0]), Complex::from(m[0][1])],
            [Complex::from(m[1][0]), Complex::from(m[1][1])],
        ])
    }

    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn zero() -> Self {
        Mat2([[ZERO; 2]; 2])
    }

    pub fn pauli_x() -> Self {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Mat2::diag(1.0, -1.0)
    }

    pub fn diag(d0: f64, d1: f64) -> Self {
        Mat2::from_real([[d0, 0.0], [0.0, d1]])
    }

    /// `weight · v vᵀ` for a real (not necessarily normalized) vector `v`.
    pub fn real_outer(v: [f64; 2], weight: f64) -> Self {
        Mat2::from_real([
            [weight * v[0] * v[0], weight * v[0] * v[1]],
            [weight * v[1] * v[0], weight * v[1] * v[1]],
        ])
    }

    /// `v w†`
    pub fn outer(v: [Complex; 2], w: [Complex; 2]) -> Self {
        Mat2([
            [v[0] * w[0].conj(), v[0] * w[1].conj()],
            [v[1] * w[0].conj(), v[1] * w[1].conj()],
        ])
    }

    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.0[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: Complex) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn apply(&self, v: [Complex; 2]) -> [Complex; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// Deviation from Hermiticity, `max |m - m†|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().flatten().all(|z| z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

/// Dense square complex matrix of dimension 2, 4, 8 or 16.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex>,
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&dim) && dim.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::BadDimension(dim))
    }
}

impl ComplexMatrix {
    pub fn from_rows(dim: usize, data: Vec<Complex>) -> Result<Self> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut data = vec![ZERO; dim * dim];
        for k in 0..dim {
            data[k * dim + k] = ONE;
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits the operator acts on.
    pub fn qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.data[row * self.dim + col]
    }

    pub fn diagonal(&self) -> Vec<Complex> {
        (0..self.dim).map(|k| self.get(k, k)).collect()
    }

    pub fn scale(&self, s: Complex) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        Ok(ComplexMatrix { dim: n, data })
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        Ok(ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl From<Mat2> for ComplexMatrix {
    fn from(m: Mat2) -> Self {
        ComplexMatrix {
            dim: 2,
            data: m.0.iter().flatten().copied().collect(),
        }
    }
}

impl From<&Mat2> for ComplexMatrix {
    fn from(m: &Mat2) -> Self {
        ComplexMatrix::from(*m)
    }
}

/// Tensor product `a ⊗ b`; `a` carries the more significant qubits.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = a.dim * b.dim;
    check_dim(dim)?;
    let mut data = vec![ZERO; dim * dim];
    for ar in 0..a.dim {
        for ac in 0..a.dim {
            let s = a.get(ar, ac);
            for br in 0..b.dim {
                for bc in 0..b.dim {
                    data[(ar * b.dim + br) * dim + ac * b.dim + bc] = s * b.get(br, bc);
                }
            }
        }
    }
    Ok(ComplexMatrix { dim, data })
}

/// Spectral decomposition of a Hermitian 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    /// Ascending.
    pub values: [f64; 2],
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: [[Complex; 2]; 2],
}

impl Eigen2 {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// `Σ f(λ_k) v_k v_k†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat2 {
        let mut out = Mat2::zero();
        for k in 0..2 {
            let v = self.vectors[k];
            out = out + Mat2::outer(v, v).scale(Complex::from(f(self.values[k])));
        }
        out
    }
}

fn normalize2(v: [Complex; 2]) -> [Complex; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

pub fn hermitian_eig2(m: &Mat2) -> Result<Eigen2> {
    if !m.is_finite() {
        return Err(Error::NotHermitian(f64::NAN));
    }
    let scale = m.0.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    // average the off-diagonal pair so tiny asymmetries do not bias the result
    let b = (m.0[0][1] + m.0[1][0].conj()) * 0.5;

    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let radius = half_gap.hypot(b.norm());
    let lo = mean - radius;
    let hi = mean + radius;

    if b.norm() <= f64::EPSILON * scale * 1e-3 {
        let e0 = [ONE, ZERO];
        let e1 = [ZERO, ONE];
        return Ok(if a <= d {
            Eigen2 { values: [a, d], vectors: [e0, e1] }
        } else {
            Eigen2 { values: [d, a], vectors: [e1, e0] }
        });
    }

    // two algebraically equivalent kernels of (m - lo·I); keep the better conditioned one
    let u = [b, Complex::from(lo - a)];
    let w = [Complex::from(lo - d), b.conj()];
    let nu = u[0].norm_sqr() + u[1].norm_sqr();
    let nw = w[0].norm_sqr() + w[1].norm_sqr();
    let v_lo = normalize2(if nu >= nw { u } else { w });
    let v_hi = [-v_lo[1].conj(), v_lo[0].conj()];
    Ok(Eigen2 {
        values: [lo, hi],
        vectors: [v_lo, v_hi],
    })
}

/// Hermitian PSD square root.
pub fn psd_sqrt2(m: &Mat2) -> Result<Mat2> {
    let eig = hermitian_eig2(m)?;
    if eig.min() < -PSD_REJECT {
        return Err(Error::NegativeEigenvalue(eig.min()));
    }
    let root = eig.reconstruct_with(|l| l.max(0.0).sqrt());
    Ok((root + root.adjoint()).scale(Complex::from(0.5)))
}

/// Pure state on a labelled register of 1 to 4 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<Qubit>,
    amps: Vec<Complex>,
}

impl StateVector {
    pub fn new(labels: Vec<Qubit>, amps: Vec<Complex>) -> Result<Self> {
        if labels.is_empty() || labels.len() > 4 {
            return Err(Error::BadDimension(1 << labels.len().min(8)));
        }
        for (k, q) in labels.iter().enumerate() {
            if labels[..k].contains(q) {
                return Err(Error::DuplicateQubit(*q));
            }
        }
        let dim = 1 << labels.len();
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amps.len(),
            });
        }
        Ok(StateVector { labels, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(labels: Vec<Qubit>, index: usize) -> Result<Self> {
        let dim = 1usize << labels.len().min(8);
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {} qubits",
                labels.len()
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        StateVector::new(labels, amps)
    }

    pub fn labels(&self) -> &[Qubit] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n.is_nan() || n <= 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        for z in &mut self.amps {
            *z /= n;
        }
        Ok(self)
    }

    pub fn scaled(mut self, s: Complex) -> Self {
        for z in &mut self.amps {
            *z *= s;
        }
        self
    }

    /// Bit position (within an amplitude index) of `q`.
    fn bit_of(&self, q: Qubit) -> Result<usize> {
        let pos = self
            .labels
            .iter()
            .position(|&l| l == q)
            .ok_or(Error::UnknownQubit(q))?;
        Ok(self.labels.len() - 1 - pos)
    }

    /// `self ⊗ other`, with `self` on the more significant qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector::new(labels, amps)
    }

    /// Apply `gate` to `targets`; `targets[0]` is the gate's most significant qubit.
    /// The gate need not be unitary.
    pub fn apply(&self, gate: &ComplexMatrix, targets: &[Qubit]) -> Result<Self> {
        if gate.qubits() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << targets.len(),
                found: gate.dim(),
            });
        }
        let mut bits = Vec::with_capacity(targets.len());
        for (k, &t) in targets.iter().enumerate() {
            if targets[..k].contains(&t) {
                return Err(Error::DuplicateQubit(t));
            }
            bits.push(self.bit_of(t)?);
        }
        let k = targets.len();
        let sub = 1usize << k;
        let mask: usize = bits.iter().map(|b| 1usize << b).sum();
        let spread = |s: usize| -> usize {
            (0..k)
                .filter(|t| s & (1 << (k - 1 - t)) != 0)
                .map(|t| 1usize << bits[t])
                .sum()
        };
        let offsets: Vec<usize> = (0..sub).map(spread).collect();

        let mut out = self.amps.clone();
        let mut buf = vec![ZERO; sub];
        for base in (0..self.dim()).filter(|i| i & mask == 0) {
            for (s, slot) in buf.iter_mut().enumerate() {
                *slot = self.amps[base | offsets[s]];
            }
            for r in 0..sub {
                let mut acc = ZERO;
                for (c, v) in buf.iter().enumerate() {
                    acc += gate.get(r, c) * v;
                }
                out[base | offsets[r]] = acc;
            }
        }
        Ok(StateVector {
            labels: self.labels.clone(),
            amps: out,
        })
    }

    pub fn apply_single(&self, gate: &Mat2, target: Qubit) -> Result<Self> {
        self.apply(&ComplexMatrix::from(gate), &[target])
    }

    /// Contract qubit `q` with `⟨bra|` and drop it from the register.
    /// The result is not renormalized.
    pub fn contract(&self, q: Qubit, bra: [Complex; 2]) -> Result<Self> {
        if self.labels.len() == 1 {
            return Err(Error::BadDimension(1));
        }
        let bit = self.bit_of(q)?;
        let labels: Vec<Qubit> = self.labels.iter().copied().filter(|&l| l != q).collect();
        let low = (1usize << bit) - 1;
        let amps = (0..self.dim() / 2)
            .map(|j| {
                let i0 = ((j & !low) << 1) | (j & low);
                let i1 = i0 | (1 << bit);
                bra[0].conj() * self.amps[i0] + bra[1].conj() * self.amps[i1]
            })
            .collect();
        StateVector::new(labels, amps)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<Complex> {
        if self.labels != other.labels {
            return Err(Error::LabelMismatch(self.labels.clone(), other.labels.clone()));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

pub fn apply_gate(state: &StateVector, gate: &ComplexMatrix, targets: &[Qubit]) -> Result<StateVector> {
    state.apply(gate, targets)
}

/// `|⟨u|v⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(u: &StateVector, v: &StateVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(u.inner(v)?.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Qubit::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn z4() -> ComplexMatrix {
        let z = ComplexMatrix::from(Mat2::pauli_z());
        kron(&z, &z).unwrap()
    }

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::from(Mat2::identity());
        assert_eq!(kron(&i2, &i2).unwrap(), ComplexMatrix::identity(4).unwrap());
        let d: Vec<f64> = z4().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![1.0, -1.0, -1.0, 1.0]);

        let zi = kron(&ComplexMatrix::from(Mat2::pauli_z()), &i2).unwrap();
        let s = StateVector::basis(vec![AliceTarget, BobTarget], 0b10).unwrap();
        let out = s.apply(&zi, &[AliceTarget, BobTarget]).unwrap();
        assert_eq!(out.amplitudes()[0b10], -ONE);
    }

    #[test]
    fn kron_rejects_overflow() {
        let i16 = ComplexMatrix::identity(16).unwrap();
        let i2 = ComplexMatrix::identity(2).unwrap();
        assert_eq!(kron(&i16, &i2), Err(Error::BadDimension(32)));
        assert!(ComplexMatrix::identity(6).is_err());
    }

    #[test]
    fn eig_examples() {
        let e = hermitian_eig2(&Mat2::pauli_z()).unwrap();
        assert_eq!(e.values, [-1.0, 1.0]);
        let e = hermitian_eig2(&Mat2::identity()).unwrap();
        assert_eq!(e.values, [1.0, 1.0]);
        let e = hermitian_eig2(&Mat2::diag(0.25, 0.75)).unwrap();
        assert_eq!(e.values, [0.25, 0.75]);
        let e = hermitian_eig2(&Mat2::pauli_x()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = Mat2::new([[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(hermitian_eig2(&m), Err(Error::NotHermitian(_))));
        let m = Mat2::new([[I, ZERO], [ZERO, ONE]]);
        assert!(matches!(hermitian_eig2(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(psd_sqrt2(&Mat2::diag(4.0, 1.0)).unwrap(), Mat2::diag(2.0, 1.0));
        assert_eq!(psd_sqrt2(&Mat2::zero()).unwrap(), Mat2::zero());
        // clamp window
        let r = psd_sqrt2(&Mat2::diag(-1e-13, 1.0)).unwrap();
        assert!(r.max_abs_diff(&Mat2::diag(0.0, 1.0)) < 1e-15);
        assert!(matches!(
            psd_sqrt2(&Mat2::diag(-1e-6, 1.0)),
            Err(Error::NegativeEigenvalue(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let s = StateVector::new(vec![AliceTarget, BobTarget], vec![c(0.5, 0.1), c(0.2, -0.3), c(0.1, 0.6), c(-0.4, 0.0)])
            .unwrap()
            .normalized()
            .unwrap();
        let id = s.apply_single(&Mat2::identity(), BobTarget).unwrap();
        assert_eq!(id, s);

        let zero = StateVector::basis(vec![AliceTarget], 0).unwrap();
        let flipped = zero.apply_single(&Mat2::pauli_x(), AliceTarget).unwrap();
        assert_eq!(flipped, StateVector::basis(vec![AliceTarget], 1).unwrap());

        let twice = s
            .apply(&z4(), &[AliceTarget, BobTarget])
            .unwrap()
            .apply(&z4(), &[AliceTarget, BobTarget])
            .unwrap();
        assert!(fidelity(&twice, &s).unwrap() > 1.0 - 1e-15);
        assert_eq!(twice, s);
    }

    #[test]
    fn apply_respects_target_order() {
        // CNOT with A as control
        let cnot = ComplexMatrix::from_rows(
            4,
            vec![
                ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ONE, ZERO,
            ],
        )
        .unwrap();
        let s = StateVector::basis(vec![AliceTarget, BobTarget, BobAncilla], 0b100).unwrap();
        let out = s.apply(&cnot, &[AliceTarget, BobAncilla]).unwrap();
        assert_eq!(out, StateVector::basis(vec![AliceTarget, BobTarget, BobAncilla], 0b101).unwrap());
        let out = s.apply(&cnot, &[BobAncilla, AliceTarget]).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn apply_unknown_qubit() {
        let s = StateVector::basis(vec![AliceTarget], 0).unwrap();
        assert_eq!(
            s.apply_single(&Mat2::pauli_x(), BobTarget),
            Err(Error::UnknownQubit(BobTarget))
        );
    }

    #[test]
    fn contract_drops_qubit() {
        let s = StateVector::basis(vec![AliceTarget, BobAncilla, BobTarget], 0b011).unwrap();
        let r = s.contract(BobAncilla, [ZERO, ONE]).unwrap();
        assert_eq!(r, StateVector::basis(vec![AliceTarget, BobTarget], 0b01).unwrap());
        let r = s.contract(BobAncilla, [ONE, ZERO]).unwrap();
        assert_eq!(r.norm_sqr(), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let s = StateVector::new(vec![AliceTarget], vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!((fidelity(&s, &s).unwrap() - 1.0).abs() < 1e-15);
        let zero = StateVector::basis(vec![AliceTarget], 0).unwrap();
        let one = StateVector::basis(vec![AliceTarget], 1).unwrap();
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        let phased = s.clone().scaled(Complex::from_polar(1.0, 1.234));
        assert!((fidelity(&s, &phased).unwrap() - 1.0).abs() < 1e-15);
        let two = StateVector::basis(vec![AliceTarget, BobTarget], 0).unwrap();
        assert!(matches!(fidelity(&s, &two), Err(Error::DimensionMismatch { .. })));
    }

    fn hermitian() -> impl Strategy<Value = Mat2> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(a, d, br, bi)| Mat2::new([[c(a, 0.0), c(br, bi)], [c(br, -bi), c(d, 0.0)]]))
    }

    fn psd() -> impl Strategy<Value = Mat2> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, cr, ci)| {
            let g = Mat2::new([[c(a, 0.0), c(cr, ci)], [c(b, -ci), c(cr * b, a)]]);
            g * g.adjoint()
        })
    }

    fn state4() -> impl Strategy<Value = StateVector> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16).prop_filter_map("nonzero", |v| {
            StateVector::new(
                vec![AliceAncilla, AliceTarget, BobTarget, BobAncilla],
                v.into_iter().map(|(r, i)| c(r, i)).collect(),
            )
            .unwrap()
            .normalized()
            .ok()
        })
    }

    proptest! {
        #[test]
        fn eig_reconstructs(m in hermitian()) {
            let e = hermitian_eig2(&m).unwrap();
            prop_assert!(e.values[0] <= e.values[1]);
            prop_assert!(e.reconstruct_with(|l| l).max_abs_diff(&m) < 1e-10);
            let v = e.vectors;
            let ip = v[0][0].conj() * v[1][0] + v[0][1].conj() * v[1][1];
            prop_assert!(ip.norm() < 1e-12);
            for (vk, lk) in v.iter().zip(e.values) {
                let mv = m.apply(*vk);
                let n = vk[0].norm_sqr() + vk[1].norm_sqr();
                prop_assert!((n - 1.0).abs() < 1e-12);
                prop_assert!((mv[0] - vk[0] * lk).norm() < 1e-10);
                prop_assert!((mv[1] - vk[1] * lk).norm() < 1e-10);
            }
        }

        #[test]
        fn sqrt_squares_back(m in psd()) {
            let r = psd_sqrt2(&m).unwrap();
            prop_assert!(r.is_hermitian(1e-15));
            prop_assert!(hermitian_eig2(&r).unwrap().min() >= -1e-12);
            prop_assert!((r * r).max_abs_diff(&m) < 1e-10);
        }

        #[test]
        fn unitary_preserves_norm(s in state4(), t in 0.0..6.3f64) {
            let (ct, st) = (t.cos(), t.sin());
            let u = Mat2::new([[c(ct, 0.0), c(0.0, st)], [c(0.0, st), c(ct, 0.0)]]);
            let out = s.apply_single(&u, BobTarget).unwrap().apply(&z4(), &[BobAncilla, AliceAncilla]).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn kron_associates(a in hermitian(), b in hermitian(), d in hermitian()) {
            let (a, b, d) = (ComplexMatrix::from(a), ComplexMatrix::from(b), ComplexMatrix::from(d));
            let left = kron(&kron(&a, &b).unwrap(), &d).unwrap();
            let right = kron(&a, &kron(&b, &d).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }
    }
}
