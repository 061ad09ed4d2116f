//! Dense statevector engine.
//!
//! Basis index `k` stores qubit 0 in its most significant bit, so the bit of
//! qubit `i` is `(k >> (n - 1 - i)) & 1`. All rotations follow
//! `R_a(theta) = exp(-i theta sigma_a / 2)`.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance used when validating Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Tolerance on `|<psi|psi> - 1|` accepted when building a state from raw amplitudes.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// 2x2 matrix of `exp(-i angle sigma_axis / 2)`, row-major.
pub fn rotation_matrix(axis: Axis, angle: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (angle / 2.0).sin_cos();
    match axis {
        Axis::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Axis::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Axis::Z => [[Complex64::new(c, -s), C0], [C0, Complex64::new(c, s)]],
    }
}

/// Bit of qubit `qubit` in basis index `k` for an `n`-qubit register.
#[inline]
pub fn qubit_bit(n: usize, k: usize, qubit: usize) -> usize {
    (k >> (n - 1 - qubit)) & 1
}

/// Renders basis index `k` as a bit string, qubit 0 first.
pub fn basis_label(n: usize, k: usize) -> String {
    (0..n)
        .map(|i| if qubit_bit(n, k, i) == 1 { '1' } else { '0' })
        .collect()
}

/// Normalized pure state over the `2^n` computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|k>` on `n` qubits.
    pub fn basis(n_qubits: usize, k: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, limit: dim });
        }
        let mut amps = vec![C0; dim];
        amps[k] = C1;
        Ok(Self { n_qubits, amps })
    }

    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0).expect("index 0 is always valid")
    }

    /// `|+>^n`, prepared as a global `R_y(pi/2)` on `|0...0>`.
    pub fn plus(n_qubits: usize) -> Self {
        let mut s = Self::zero(n_qubits);
        s.apply_global_rotation(Axis::Y, std::f64::consts::FRAC_PI_2);
        s
    }

    /// `(|0...0> + |1...1>)/sqrt(2)`.
    pub fn ghz(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut amps = vec![C0; dim];
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = a;
        amps[dim - 1] += a;
        Self { n_qubits, amps }
    }

    /// Wraps already-normalized amplitudes.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = log2_exact(amps.len())?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = log2_exact(amps.len())?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized(norm * norm));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|c_k|^2` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                limit: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies an arbitrary 2x2 matrix to one qubit.
    pub fn apply_single_qubit(&mut self, qubit: usize, u: &[[Complex64; 2]; 2]) -> Result<()> {
        self.check_qubit(qubit)?;
        apply_1q(&mut self.amps, self.n_qubits, qubit, u);
        Ok(())
    }

    /// `R_axis(angle)` on one qubit.
    pub fn apply_rotation(&mut self, qubit: usize, axis: Axis, angle: f64) -> Result<()> {
        self.apply_single_qubit(qubit, &rotation_matrix(axis, angle))
    }

    /// The same rotation on every qubit.
    pub fn apply_global_rotation(&mut self, axis: Axis, angle: f64) {
        let u = rotation_matrix(axis, angle);
        for q in 0..self.n_qubits {
            apply_1q(&mut self.amps, self.n_qubits, q, &u);
        }
    }

    /// Multiplies `c_k` by `exp(-i sum_i phi_i (1 - 2 b_i) / 2)`, i.e. applies
    /// `R_z(phi_i)` on every qubit at once.
    pub fn apply_diagonal_phases(&mut self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                actual: phases.len(),
            });
        }
        let n = self.n_qubits;
        for (k, a) in self.amps.iter_mut().enumerate() {
            let mut theta = 0.0;
            for (i, phi) in phases.iter().enumerate() {
                if qubit_bit(n, k, i) == 0 {
                    theta += phi;
                } else {
                    theta -= phi;
                }
            }
            *a *= Complex64::from_polar(1.0, -0.5 * theta);
        }
        Ok(())
    }

    /// Applies a 4x4 matrix to the ordered qubit pair `(a, b)`; `a` is the
    /// more significant index of the local basis `|b_a b_b>`.
    pub fn apply_two_qubit(&mut self, a: usize, b: usize, u: &Matrix4<Complex64>) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::InvalidConfig(format!(
                "two-qubit gate needs distinct qubits, got ({a}, {b})"
            )));
        }
        apply_2q(&mut self.amps, self.n_qubits, a, b, u);
        Ok(())
    }

    /// Applies a dense matrix of matching dimension.
    pub fn apply_dense(&mut self, u: &DMatrix<Complex64>) -> Result<()> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: u.nrows(),
            });
        }
        let v = DVector::from_column_slice(&self.amps);
        let out = u * v;
        self.amps.copy_from_slice(out.as_slice());
        Ok(())
    }
}

fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

fn apply_1q(amps: &mut [Complex64], n: usize, qubit: usize, u: &[[Complex64; 2]; 2]) {
    let stride = 1usize << (n - 1 - qubit);
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for k in base..base + stride {
            let a0 = amps[k];
            let a1 = amps[k + stride];
            amps[k] = u[0][0] * a0 + u[0][1] * a1;
            amps[k + stride] = u[1][0] * a0 + u[1][1] * a1;
        }
        base += 2 * stride;
    }
}

fn apply_2q(amps: &mut [Complex64], n: usize, a: usize, b: usize, u: &Matrix4<Complex64>) {
    let sa = 1usize << (n - 1 - a);
    let sb = 1usize << (n - 1 - b);
    let mask = sa | sb;
    for k in 0..amps.len() {
        if k & mask != 0 {
            continue;
        }
        let idx = [k, k | sb, k | sa, k | sa | sb];
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = u[(r, 0)] * v[0] + u[(r, 1)] * v[1] + u[(r, 2)] * v[2] + u[(r, 3)] * v[3];
        }
    }
}

fn hermitian_deviation<D: nalgebra::Dim, S>(m: &nalgebra::Matrix<Complex64, D, D, S>) -> f64
where
    S: nalgebra::RawStorage<Complex64, D, D>,
{
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Dense Hermitian matrix over `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    n_qubits: usize,
    matrix: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let n_qubits = log2_exact(matrix.nrows())?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { n_qubits, matrix })
    }

    /// Diagonal operator with the given real entries.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(entries.len(), entries.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(DMatrix::from_diagonal(&d))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Frobenius norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianOperator) -> f64 {
        (&self.matrix * &other.matrix - &other.matrix * &self.matrix).norm()
    }

    pub fn eigen(&self) -> SpectralPropagator {
        SpectralPropagator::new(self)
    }
}

/// Eigendecomposition `H = V diag(w) V^dagger`, reused for `exp(-i t H)` at many `t`.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
    vectors_adj: DMatrix<Complex64>,
}

impl SpectralPropagator {
    pub fn new(h: &HermitianOperator) -> Self {
        let eig = h.matrix.clone().symmetric_eigen();
        let vectors = eig.eigenvectors;
        let vectors_adj = vectors.adjoint();
        Self {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            vectors,
            vectors_adj,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Max-abs entry of `V diag(w) V^dagger - H`.
    pub fn reconstruction_error(&self, h: &HermitianOperator) -> f64 {
        let w = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let r = &self.vectors * w * &self.vectors_adj - h.matrix();
        r.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// `psi <- exp(-i t H) psi`.
    pub fn evolve(&self, psi: &mut StateVector, t: f64) -> Result<()> {
        if psi.dim() != self.eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: self.eigenvalues.len(),
                actual: psi.dim(),
            });
        }
        let v = DVector::from_column_slice(&psi.amps);
        let mut coeffs = &self.vectors_adj * v;
        for (c, &w) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *c *= Complex64::from_polar(1.0, -w * t);
        }
        let out = &self.vectors * coeffs;
        psi.amps.copy_from_slice(out.as_slice());
        Ok(())
    }

    /// Dense `exp(-i t H)`.
    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let phases = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&w| Complex64::from_polar(1.0, -w * t)),
        ));
        &self.vectors * phases * &self.vectors_adj
    }
}

/// `psi <- exp(-i t H) psi` by eigendecomposition.
pub fn evolve_exact(psi: &mut StateVector, h: &HermitianOperator, t: f64) -> Result<()> {
    SpectralPropagator::new(h).evolve(psi, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrotterConfig {
    pub steps: usize,
}

impl Default for TrotterConfig {
    fn default() -> Self {
        Self { steps: 400 }
    }
}

impl TrotterConfig {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroTrotterSteps);
        }
        Ok(Self { steps })
    }
}

/// Hermitian summand acting on an ordered qubit pair, stored as its local 4x4 block.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTerm {
    pub qubits: (usize, usize),
    pub local: Matrix4<Complex64>,
}

impl PairTerm {
    pub fn new(qubits: (usize, usize), local: Matrix4<Complex64>) -> Result<Self> {
        if qubits.0 == qubits.1 {
            return Err(Error::InvalidConfig("pair term on a single qubit".into()));
        }
        let dev = hermitian_deviation(&local);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { qubits, local })
    }

    /// `exp(-i tau h)` of the local block.
    pub fn local_unitary(&self, tau: f64) -> Matrix4<Complex64> {
        let eig = self.local.symmetric_eigen();
        let v = eig.eigenvectors;
        let mut d = Matrix4::<Complex64>::zeros();
        for i in 0..4 {
            d[(i, i)] = Complex64::from_polar(1.0, -eig.eigenvalues[i] * tau);
        }
        let mut u = v * d * v.adjoint();
        // Newton-Schulz steps towards the nearest unitary; the eigenvector
        // round-off otherwise drifts the norm over thousands of steps
        let three = Matrix4::<Complex64>::identity() * Complex64::new(3.0, 0.0);
        for _ in 0..2 {
            u = u * (three - u.adjoint() * u) * Complex64::new(0.5, 0.0);
        }
        u
    }

    /// Embeds the term into the full `2^n` space.
    pub fn to_operator(&self, n_qubits: usize) -> Result<HermitianOperator> {
        let (a, b) = self.qubits;
        if a >= n_qubits || b >= n_qubits {
            return Err(Error::IndexOutOfRange {
                index: a.max(b),
                limit: n_qubits,
            });
        }
        let dim = 1usize << n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for col in 0..dim {
            let mut e = vec![C0; dim];
            e[col] = C1;
            apply_2q(&mut e, n_qubits, a, b, &self.local);
            for (row, z) in e.into_iter().enumerate() {
                m[(row, col)] = z;
            }
        }
        HermitianOperator::new(m)
    }
}

/// First-order Trotter evolution `(prod_j exp(-i t H_j / m))^m`, applying the
/// summands in slice order within every step.
pub fn evolve_trotter(psi: &mut StateVector, terms: &[PairTerm], t: f64, cfg: TrotterConfig) -> Result<()> {
    if cfg.steps == 0 {
        return Err(Error::ZeroTrotterSteps);
    }
    for term in terms {
        psi.check_qubit(term.qubits.0)?;
        psi.check_qubit(term.qubits.1)?;
    }
    let tau = t / cfg.steps as f64;
    let gates: Vec<_> = terms
        .iter()
        .map(|term| (term.qubits, term.local_unitary(tau)))
        .collect();
    let n = psi.n_qubits;
    for _ in 0..cfg.steps {
        for ((a, b), u) in &gates {
            apply_2q(&mut psi.amps, n, *a, *b, u);
        }
    }
    Ok(())
}
