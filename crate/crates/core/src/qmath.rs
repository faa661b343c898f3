//! Dense complex linear algebra for small multi-qubit systems.
//!
//! Matrices are stored row-major. For an `n`-qubit operator, qubit `0` is the
//! most significant bit of the row/column index, so `|0_A 1_B⟩` is index `1`
//! and `|1_A 0_B⟩` is index `2`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for exact-algebra identities (Hermiticity, unit trace).
pub const EXACT_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Largest imaginary residue discarded from a quantity that must be real.
pub const REAL_TOL: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Bit mask of qubit `q` in an `n`-qubit basis index.
#[inline]
pub(crate) fn qubit_mask(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Number of qubits of a `dim`-dimensional space, if `dim` is a power of two.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    dim.is_power_of_two().then(|| dim.trailing_zeros() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl TryFrom<RawMatrix> for ComplexMatrix {
    type Error = String;

    fn try_from(raw: RawMatrix) -> std::result::Result<Self, String> {
        if raw.entries.len() != raw.dim * raw.dim {
            return Err(format!(
                "{} entries for a {}x{} matrix",
                raw.entries.len(),
                raw.dim,
                raw.dim
            ));
        }
        Ok(ComplexMatrix {
            dim: raw.dim,
            data: raw.entries,
        })
    }
}

impl From<ComplexMatrix> for RawMatrix {
    fn from(m: ComplexMatrix) -> Self {
        RawMatrix {
            dim: m.dim,
            entries: m.data,
        }
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let data = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        ComplexMatrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(ComplexMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// `|ψ⟩⟨φ|`.
    pub fn outer(psi: &[Complex64], phi: &[Complex64]) -> Result<Self> {
        if psi.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                found: phi.len(),
            });
        }
        Ok(Self::from_fn(psi.len(), |i, j| psi[i] * phi[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> Option<usize> {
        qubits_for_dim(self.dim)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Kronecker product; `self` occupies the more significant index bits.
    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let (da, db) = (self.dim, other.dim);
        let dim = da * db;
        let mut out = ComplexMatrix::zeros(dim);
        for i in 0..da {
            for j in 0..da {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        out[(i * db + k, j * db + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    /// Largest entry of `|M − M†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> ComplexMatrix {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(
            self.dim, other.dim,
            "frobenius_distance: dimension mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff: dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "mul_vec: dimension mismatch");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Spectral decomposition of the Hermitian part: ascending eigenvalues
    /// and the matching eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, ComplexMatrix) {
        let (values, vectors) = jacobi_eigh(self.hermitian_part());
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted = order.iter().map(|&k| values[k]).collect();
        let vectors = Self::from_fn(self.dim, |i, j| vectors[(i, order[j])]);
        (sorted, vectors)
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        self.eigh().0
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product: dimension mismatch");
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum: dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference: dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies
/// the real symmetric Jacobi rotation that zeroes it.
fn jacobi_eigh(mut a: ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    const MAX_SWEEPS: usize = 64;
    let d = a.dim;
    let mut v = ComplexMatrix::identity(d);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|p| (p + 1..d).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= f64::EPSILON * 1e-3 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE * 1e8 {
                    continue;
                }
                let phase = apq / r;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let (u_pp, u_pq) = (Complex64::from(c), Complex64::from(s));
                let (u_qp, u_qq) = (-phase.conj() * s, phase.conj() * c);
                for k in 0..d {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::from(a[(p, p)].re);
                a[(q, q)] = Complex64::from(a[(q, q)].re);
                for k in 0..d {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }
    ((0..d).map(|i| a[(i, i)].re).collect(), v)
}

/// Kronecker product of a sequence of matrices, leftmost most significant.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1), |acc, f| acc.kron(f))
}

/// A pure state vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ket(Vec<Complex64>);

impl Ket {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Ket(amplitudes)
    }

    /// Computational basis state `|index⟩` on `n` qubits.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Ket(amps)
    }

    /// `(|0…0⟩ + e^{iφ}|1…1⟩)/√2`.
    pub fn ghz(n: usize, phase: f64) -> Self {
        let dim = 1 << n;
        let mut amps = vec![ZERO; dim];
        amps[0] = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        amps[dim - 1] = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phase);
        Ket(amps)
    }

    /// Single-qubit `(|0⟩ + e^{iφ}|1⟩)/√2`.
    pub fn equator(phase: f64) -> Self {
        Ket(vec![
            Complex64::from(std::f64::consts::FRAC_1_SQRT_2),
            Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phase),
        ])
    }

    pub fn plus() -> Self {
        Self::equator(0.0)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn kron(&self, other: &Ket) -> Ket {
        Ket(self
            .0
            .iter()
            .flat_map(|a| other.0.iter().map(move |b| a * b))
            .collect())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let n2 = self.norm_sqr();
        if (n2 - 1.0).abs() > EXACT_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(())
    }
}

/// Trace-one, Hermitian, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityMatrix(ComplexMatrix);

impl TryFrom<ComplexMatrix> for DensityMatrix {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        DensityMatrix::new(m)
    }
}

impl From<DensityMatrix> for ComplexMatrix {
    fn from(rho: DensityMatrix) -> Self {
        rho.0
    }
}

impl DensityMatrix {
    /// Validates `m` against every density-matrix invariant.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.num_qubits().is_none() {
            return Err(Error::InvalidState(format!(
                "dimension {} is not a power of two",
                m.dim()
            )));
        }
        let asym = m.hermitian_deviation();
        if asym > EXACT_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |ρ − ρ†| = {asym:e})"
            )));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > EXACT_TOL {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let min_eig = m.eigenvalues_hermitian()[0];
        // Written so that a NaN spectrum is rejected too.
        if min_eig.is_nan() || min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn from_pure(psi: &Ket) -> Result<Self> {
        psi.check_normalized()?;
        if qubits_for_dim(psi.dim()).is_none() {
            return Err(Error::InvalidState(format!(
                "dimension {} is not a power of two",
                psi.dim()
            )));
        }
        let m = ComplexMatrix::outer(psi.amplitudes(), psi.amplitudes())?;
        Ok(DensityMatrix(m.hermitian_part()))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1 << n;
        DensityMatrix(ComplexMatrix::identity(dim).scale(Complex64::from(1.0 / dim as f64)))
    }

    /// Convex mixture `Σ wᵢ ρᵢ`; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, r)| r.dim())
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut acc = ComplexMatrix::zeros(dim);
        for (w, r) in parts {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.dim(),
                });
            }
            acc = &acc + &r.0.scale(Complex64::from(*w));
        }
        DensityMatrix::new(acc)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn num_qubits(&self) -> usize {
        self.0.dim().trailing_zeros() as usize
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.eigenvalues_hermitian()[0]
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kron(&other.0))
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        self.0.frobenius_distance(&other.0)
    }
}

impl Index<(usize, usize)> for DensityMatrix {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        let rows = match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        };
        ComplexMatrix::from_fn(2, |i, j| rows[i][j])
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Tensor product of single-qubit Paulis, qubit 0 leftmost.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(symbols: Vec<Pauli>) -> Self {
        PauliString(symbols)
    }

    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    pub fn symbols(&self) -> &[Pauli] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// All `4^n` strings in lexicographic `I < X < Y < Z` order.
    pub fn all(n: usize) -> Vec<PauliString> {
        const SYMS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        (0..4usize.pow(n as u32))
            .map(|mut k| {
                let mut s = vec![Pauli::I; n];
                for q in (0..n).rev() {
                    s[q] = SYMS[k % 4];
                    k /= 4;
                }
                PauliString(s)
            })
            .collect()
    }

    /// Dense operator matrix.
    pub fn matrix(&self) -> ComplexMatrix {
        let factors: Vec<ComplexMatrix> = self.0.iter().map(|p| p.matrix()).collect();
        kron_all(&factors)
    }

    /// The single nonzero entry of row `row`: `(column, value)`.
    ///
    /// Every Pauli string is a signed permutation matrix, which keeps
    /// expectations and reconstructions at `O(4^n · 2^n)`.
    #[inline]
    pub fn row_entry(&self, row: usize) -> (usize, Complex64) {
        let n = self.0.len();
        let mut col = row;
        let mut value = ONE;
        for (q, p) in self.0.iter().enumerate() {
            let m = qubit_mask(n, q);
            let bit = row & m != 0;
            match p {
                Pauli::I => {}
                Pauli::X => col ^= m,
                Pauli::Y => {
                    col ^= m;
                    value *= if bit { I } else { -I };
                }
                Pauli::Z => {
                    if bit {
                        value = -value;
                    }
                }
            }
        }
        (col, value)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                Pauli::from_symbol(c).ok_or_else(|| Error::Parse {
                    input: s.to_string(),
                    reason: format!("`{c}` is not one of I, X, Y, Z"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

/// Dense matrix of a Pauli string.
pub fn pauli_matrix(s: &PauliString) -> ComplexMatrix {
    s.matrix()
}

/// Real part of `Tr(ρ P)`.
pub fn expectation(rho: &DensityMatrix, s: &PauliString) -> Result<f64> {
    let dim = 1usize << s.len();
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: dim,
        });
    }
    // Tr(ρP) = Σ_j ρ[col(j), j] · P[j, col(j)]
    let m = rho.as_matrix();
    let tr: Complex64 = (0..dim)
        .map(|j| {
            let (col, v) = s.row_entry(j);
            m[(col, j)] * v
        })
        .sum();
    debug_assert!(
        tr.im.abs() <= REAL_TOL,
        "Tr(ρP) has imaginary part {}",
        tr.im
    );
    Ok(tr.re)
}

fn validate_qubits(n: usize, qubits: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = qubits.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != qubits.len() {
        return Err(Error::InvalidQubits(format!(
            "duplicate index in {qubits:?}"
        )));
    }
    if let Some(&q) = sorted.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidQubits(format!(
            "qubit {q} out of range for {n} qubits"
        )));
    }
    Ok(sorted)
}

/// Scatters the bits of `sub` (over `positions`, most significant first)
/// into an `n`-qubit index.
#[inline]
fn scatter(n: usize, positions: &[usize], sub: usize) -> usize {
    let k = positions.len();
    positions
        .iter()
        .enumerate()
        .filter(|&(i, _)| sub & (1 << (k - 1 - i)) != 0)
        .fold(0, |acc, (_, &q)| acc | qubit_mask(n, q))
}

/// Reduced state on `keep`, ordered by ascending qubit index.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    if keep.is_empty() {
        return Err(Error::InvalidQubits("nothing to keep".into()));
    }
    let kept = validate_qubits(n, keep)?;
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let (dk, dt) = (1 << kept.len(), 1 << traced.len());
    let m = rho.as_matrix();
    let reduced = ComplexMatrix::from_fn(dk, |a, b| {
        let (ra, rb) = (scatter(n, &kept, a), scatter(n, &kept, b));
        (0..dt)
            .map(|t| {
                let off = scatter(n, &traced, t);
                m[(ra | off, rb | off)]
            })
            .sum()
    });
    DensityMatrix::new(reduced.hermitian_part())
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &Ket) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: psi.dim(),
        });
    }
    psi.check_normalized()?;
    let rho_psi = rho.as_matrix().mul_vec(psi.amplitudes());
    let f = psi
        .amplitudes()
        .iter()
        .zip(&rho_psi)
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>();
    debug_assert!(f.im.abs() <= REAL_TOL);
    Ok(f.re.clamp(0.0, 1.0))
}

/// Projects `qubit` onto `direction` and returns the renormalized state of
/// the remaining qubits together with the outcome probability.
pub fn project_qubit(
    rho: &DensityMatrix,
    qubit: usize,
    direction: &Ket,
) -> Result<(DensityMatrix, f64)> {
    let n = rho.num_qubits();
    if n < 2 {
        return Err(Error::InvalidQubits(
            "projection needs at least two qubits".into(),
        ));
    }
    if qubit >= n {
        return Err(Error::InvalidQubits(format!(
            "qubit {qubit} out of range for {n} qubits"
        )));
    }
    if direction.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: direction.dim(),
        });
    }
    direction.check_normalized()?;
    let rest: Vec<usize> = (0..n).filter(|&q| q != qubit).collect();
    let mask = qubit_mask(n, qubit);
    let d = direction.amplitudes();
    let m = rho.as_matrix();
    let cond = ComplexMatrix::from_fn(1 << (n - 1), |a, b| {
        let (ra, rb) = (scatter(n, &rest, a), scatter(n, &rest, b));
        let mut acc = ZERO;
        for (x, dx) in d.iter().enumerate() {
            for (y, dy) in d.iter().enumerate() {
                let i = if x == 1 { ra | mask } else { ra };
                let j = if y == 1 { rb | mask } else { rb };
                acc += dx.conj() * m[(i, j)] * dy;
            }
        }
        acc
    });
    let prob = cond.trace().re;
    if prob < EXACT_TOL {
        return Err(Error::ImpossibleOutcome(prob));
    }
    let normalized = cond.scale(Complex64::from(1.0 / prob)).hermitian_part();
    Ok((DensityMatrix::new(normalized)?, prob.min(1.0)))
}
