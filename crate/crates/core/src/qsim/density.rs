use num_complex::Complex64;

use super::gates::Unitary;
use super::state::{apply_to_amplitudes, check_qubits, check_targets, StateVector, UNITARY_TOL};
use crate::error::{Error, Result};

/// Mixed state of `n` qubits stored row-major as a `2^n x 2^n` matrix.
///
/// Entry `(r, c)` lives at `r * 2^n + c`, so the matrix is also a `2n`-qubit
/// vector whose high `n` bits index rows and low `n` bits index columns.
/// `U rho U^dagger` is then `U` on the row qubits and `conj(U)` on the
/// column qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        let d = a.len();
        let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                rho[r * d + c] = a[r] * a[c].conj();
            }
        }
        DensityMatrix { n: state.num_qubits(), rho }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let d = 1 << n;
        let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            rho[i * d + i] = Complex64::new(1.0 / d as f64, 0.0);
        }
        Ok(DensityMatrix { n, rho })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.rho[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|rho - rho^dagger|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn apply_unitary(&mut self, u: &Unitary, targets: &[usize]) -> Result<()> {
        check_targets(self.n, u, targets)?;
        if !u.is_unitary(UNITARY_TOL) {
            return Err(Error::InvalidArgument("gate is not unitary".into()));
        }
        self.apply_unchecked(u, targets);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, u: &Unitary, targets: &[usize]) {
        let rows: Vec<usize> = targets.iter().map(|t| t + self.n).collect();
        apply_to_amplitudes(&mut self.rho, u, &rows);
        apply_to_amplitudes(&mut self.rho, &u.conj(), targets);
    }

    /// Global depolarizing channel `rho -> (1 - p) rho + p I / 2^n`.
    pub fn depolarize(&mut self, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("depolarizing rate {p} outside [0, 1]")));
        }
        let d = self.dim();
        let mix = p / d as f64;
        self.rho.iter_mut().for_each(|v| *v *= 1.0 - p);
        for i in 0..d {
            self.rho[i * d + i] += mix;
        }
        Ok(())
    }

    pub fn expectation_z(&self, qubit: usize) -> f64 {
        let mask = 1 << qubit;
        (0..self.dim()).map(|i| if i & mask == 0 { self.get(i, i).re } else { -self.get(i, i).re }).sum()
    }

    pub fn prob_zero(&self, qubit: usize) -> f64 {
        let mask = 1 << qubit;
        (0..self.dim()).filter(|i| i & mask == 0).map(|i| self.get(i, i).re).sum()
    }
}

/// Functional form of [`DensityMatrix::depolarize`].
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    out.depolarize(p)?;
    Ok(out)
}
