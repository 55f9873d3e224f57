//! Dense unitaries, Pauli rotations and the 15-parameter two-qubit template.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix acting on `log2(dim)` qubits, row-major.
///
/// Local basis index bit `i` belongs to `targets[i]` when applied, so the
/// first target is the least significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    dim: usize,
    data: Vec<Complex64>,
}

impl Unitary {
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if !dim.is_power_of_two() || data.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries do not form a 2^k square matrix of side {dim}", data.len())));
        }
        Ok(Unitary { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Unitary { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &Unitary) -> Unitary {
        assert_eq!(self.dim, rhs.dim, "unitary dimension mismatch");
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    out[r * d + c] += a * rhs.data[k * d + c];
                }
            }
        }
        Unitary { dim: d, data: out }
    }

    /// Kronecker product `high ⊗ low`: `low` acts on the least significant qubits.
    pub fn kron(high: &Unitary, low: &Unitary) -> Unitary {
        let d = high.dim * low.dim;
        let mut data = vec![ZERO; d * d];
        for hr in 0..high.dim {
            for hc in 0..high.dim {
                let a = high.get(hr, hc);
                for lr in 0..low.dim {
                    for lc in 0..low.dim {
                        data[(hr * low.dim + lr) * d + hc * low.dim + lc] = a * low.get(lr, lc);
                    }
                }
            }
        }
        Unitary { dim: d, data }
    }

    pub fn dagger(&self) -> Unitary {
        let d = self.dim;
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        Unitary { dim: d, data }
    }

    pub fn conj(&self) -> Unitary {
        Unitary { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// Largest entry of `|U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.dagger().mul(self);
        let d = self.dim;
        (0..d * d)
            .map(|i| {
                let target = if i / d == i % d { ONE } else { ZERO };
                (prod.data[i] - target).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Unitary {
        let data = match self {
            Pauli::I => vec![ONE, ZERO, ZERO, ONE],
            Pauli::X => vec![ZERO, ONE, ONE, ZERO],
            Pauli::Y => vec![ZERO, -I, I, ZERO],
            Pauli::Z => vec![ONE, ZERO, ZERO, -ONE],
        };
        Unitary { dim: 2, data }
    }
}

/// Dense matrix of a Pauli word; `word[i]` acts on local qubit i.
pub fn pauli_word(word: &[Pauli]) -> Unitary {
    word.iter().fold(Unitary::identity(1), |acc, p| Unitary::kron(&p.matrix(), &acc))
}

/// `exp(-i theta/2 P) = cos(theta/2) I - i sin(theta/2) P`.
pub fn pauli_rotation(word: &[Pauli], theta: f64) -> Unitary {
    let p = pauli_word(word);
    let (s, c) = (theta / 2.0).sin_cos();
    let data = p
        .data
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let diag = if idx / p.dim == idx % p.dim { c } else { 0.0 };
            Complex64::new(diag, 0.0) - I * s * v
        })
        .collect();
    Unitary { dim: p.dim, data }
}

pub fn ry(theta: f64) -> Unitary {
    pauli_rotation(&[Pauli::Y], theta)
}

pub fn rz(theta: f64) -> Unitary {
    pauli_rotation(&[Pauli::Z], theta)
}

/// General single-qubit rotation `Rz(c) Ry(b) Rz(a)`.
pub fn euler_zyz(a: f64, b: f64, c: f64) -> Unitary {
    rz(c).mul(&ry(b)).mul(&rz(a))
}

/// Number of angles in the two-qubit convolution template.
pub const PQC15_LEN: usize = 15;

/// Angles of the two-qubit convolution template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pqc15Params(pub [f64; PQC15_LEN]);

impl Pqc15Params {
    pub fn zeros() -> Self {
        Pqc15Params([0.0; PQC15_LEN])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; PQC15_LEN] = values
            .try_into()
            .map_err(|_| Error::Dimension(format!("expected {PQC15_LEN} angles, got {}", values.len())))?;
        if arr.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("PQC angles must be finite".into()));
        }
        Ok(Pqc15Params(arr))
    }

    /// Copy with angle `index` moved by `delta`.
    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut out = *self;
        out.0[index] += delta;
        out
    }
}

/// The 15-angle two-qubit unitary.
///
/// Applied in order: Euler ZYZ rotations `theta[0..3]` on the first target
/// and `theta[3..6]` on the second; the entangler
/// `exp(-i (theta[12] XX + theta[13] YY + theta[14] ZZ) / 2)`; then Euler
/// rotations `theta[6..9]` and `theta[9..12]`. Every angle is a single
/// Pauli-word rotation, so the two-term shift rule is exact for each.
pub fn pqc15(theta: &Pqc15Params) -> Unitary {
    let t = &theta.0;
    let first = Unitary::kron(&euler_zyz(t[3], t[4], t[5]), &euler_zyz(t[0], t[1], t[2]));
    let entangler = pauli_rotation(&[Pauli::X, Pauli::X], t[12])
        .mul(&pauli_rotation(&[Pauli::Y, Pauli::Y], t[13]))
        .mul(&pauli_rotation(&[Pauli::Z, Pauli::Z], t[14]));
    let last = Unitary::kron(&euler_zyz(t[9], t[10], t[11]), &euler_zyz(t[6], t[7], t[8]));
    last.mul(&entangler).mul(&first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn max_diff(a: &Unitary, b: &Unitary) -> f64 {
        a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_angles_give_identity() {
        assert!(max_diff(&pqc15(&Pqc15Params::zeros()), &Unitary::identity(4)) < 1e-12);
    }

    #[test]
    fn random_template_is_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut t = [0.0; 15];
            t.iter_mut().for_each(|v| *v = rng.random_range(-7.0..7.0));
            assert!(pqc15(&Pqc15Params(t)).unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn entangler_commutes_as_product() {
        // XX, YY and ZZ commute, so the product equals the joint exponential
        let (a, b, c) = (0.3, -1.1, 2.4);
        let joint = {
            let xx = pauli_word(&[Pauli::X, Pauli::X]);
            let yy = pauli_word(&[Pauli::Y, Pauli::Y]);
            let zz = pauli_word(&[Pauli::Z, Pauli::Z]);
            // eigen-decomposition is diagonal in the Bell basis; compare via series
            let h: Vec<Complex64> = (0..16).map(|i| (xx.data[i] * a + yy.data[i] * b + zz.data[i] * c) * -0.5 * I).collect();
            let mut term = Unitary::identity(4);
            let mut sum = Unitary::identity(4);
            let hm = Unitary { dim: 4, data: h };
            for n in 1..60 {
                term = term.mul(&hm);
                term.data.iter_mut().for_each(|v| *v /= n as f64);
                sum.data.iter_mut().zip(&term.data).for_each(|(s, t)| *s += t);
            }
            sum
        };
        let product = pauli_rotation(&[Pauli::X, Pauli::X], a)
            .mul(&pauli_rotation(&[Pauli::Y, Pauli::Y], b))
            .mul(&pauli_rotation(&[Pauli::Z, Pauli::Z], c));
        assert!(max_diff(&joint, &product) < 1e-12);
    }

    #[test]
    fn kron_places_low_factor_on_first_target() {
        let x_low = Unitary::kron(&Unitary::identity(2), &Pauli::X.matrix());
        // |00> -> |01> means local index 0 -> 1
        assert_eq!(x_low.get(1, 0), ONE);
        assert_eq!(pauli_word(&[Pauli::X, Pauli::I]), x_low);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Unitary::from_rows(3, vec![ONE; 9]).is_err());
        assert!(Unitary::from_rows(2, vec![ONE; 3]).is_err());
        assert!(Pqc15Params::from_slice(&[0.0; 14]).is_err());
        assert!(Pqc15Params::from_slice(&[f64::NAN; 15]).is_err());
    }
}
