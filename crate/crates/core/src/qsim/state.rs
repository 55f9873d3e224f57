use num_complex::Complex64;

use super::gates::{ry, Unitary};
use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// Tolerance used when checking that a gate is unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// Pure state of `n` qubits; qubit 0 is the least significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Dimension(format!("{} amplitudes is not a power of two", amps.len())));
        }
        let n = amps.len().trailing_zeros() as usize;
        check_qubits(n)?;
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Checks the gate and applies it to `targets`.
    pub fn apply_unitary(&mut self, u: &Unitary, targets: &[usize]) -> Result<()> {
        check_targets(self.n, u, targets)?;
        if !u.is_unitary(UNITARY_TOL) {
            return Err(Error::InvalidArgument(format!("gate is not unitary (error {:.3e})", u.unitarity_error())));
        }
        self.apply_unchecked(u, targets);
        Ok(())
    }

    /// Applies a gate already known to be a valid unitary on distinct in-range targets.
    pub(crate) fn apply_unchecked(&mut self, u: &Unitary, targets: &[usize]) {
        apply_to_amplitudes(&mut self.amps, u, targets);
    }

    /// `<Z>` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> f64 {
        let mask = 1 << qubit;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// Probability of reading `|0>` on `qubit`.
    pub fn prob_zero(&self, qubit: usize) -> f64 {
        let mask = 1 << qubit;
        self.amps.iter().enumerate().filter(|(i, _)| i & mask == 0).map(|(_, a)| a.norm_sqr()).sum()
    }
}

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
    }
    Ok(())
}

pub(crate) fn check_targets(n: usize, u: &Unitary, targets: &[usize]) -> Result<()> {
    if u.num_qubits() != targets.len() {
        return Err(Error::Dimension(format!("{}-qubit gate given {} targets", u.num_qubits(), targets.len())));
    }
    for (i, t) in targets.iter().enumerate() {
        if *t >= n {
            return Err(Error::Dimension(format!("target {t} outside a {n}-qubit register")));
        }
        if targets[..i].contains(t) {
            return Err(Error::Dimension(format!("target {t} repeated")));
        }
    }
    Ok(())
}

/// In-place `amps <- U amps` on the given targets of a `2^n` register.
pub(crate) fn apply_to_amplitudes(amps: &mut [Complex64], u: &Unitary, targets: &[usize]) {
    match targets {
        [q] => apply_1q(amps, u, *q),
        [a, b] => apply_2q(amps, u, *a, *b),
        _ => apply_kq(amps, u, targets),
    }
}

fn apply_1q(amps: &mut [Complex64], u: &Unitary, q: usize) {
    let m = u.data();
    let (m00, m01, m10, m11) = (m[0], m[1], m[2], m[3]);
    let stride = 1 << q;
    for base in (0..amps.len()).step_by(stride << 1) {
        for i in base..base + stride {
            let (x0, x1) = (amps[i], amps[i + stride]);
            amps[i] = m00 * x0 + m01 * x1;
            amps[i + stride] = m10 * x0 + m11 * x1;
        }
    }
}

fn apply_2q(amps: &mut [Complex64], u: &Unitary, a: usize, b: usize) {
    let m = u.data();
    let (ma, mb) = (1usize << a, 1usize << b);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let quarter = amps.len() >> 2;
    for r in 0..quarter {
        // insert zero bits at positions lo and hi
        let low_part = r & ((1 << lo) - 1);
        let rest = r >> lo;
        let mid = rest & ((1 << (hi - lo - 1)) - 1);
        let top = rest >> (hi - lo - 1);
        let i0 = low_part | (mid << (lo + 1)) | (top << (hi + 1));
        let idx = [i0, i0 | ma, i0 | mb, i0 | ma | mb];
        let x = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (row, &target) in idx.iter().enumerate() {
            let r4 = row * 4;
            amps[target] = m[r4] * x[0] + m[r4 + 1] * x[1] + m[r4 + 2] * x[2] + m[r4 + 3] * x[3];
        }
    }
}

fn apply_kq(amps: &mut [Complex64], u: &Unitary, targets: &[usize]) {
    let d = u.dim();
    let mask: usize = targets.iter().map(|t| 1 << t).sum();
    let offsets: Vec<usize> = (0..d)
        .map(|local| targets.iter().enumerate().filter(|(bit, _)| local >> bit & 1 == 1).map(|(_, t)| 1 << t).sum())
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (slot, off) in buf.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        for (row, off) in offsets.iter().enumerate() {
            amps[base | off] = (0..d).map(|c| u.get(row, c) * buf[c]).sum();
        }
    }
}

/// `|0...0>` on `n` qubits.
pub fn init_state(n: usize) -> Result<StateVector> {
    StateVector::zero(n)
}

/// Product state `⊗_i (cos h_i |0> + sin h_i |1>)`, i.e. `RY(2 h_i)` on each qubit.
pub fn angle_embedding(h: &[f64]) -> Result<StateVector> {
    let mut state = StateVector::zero(h.len())?;
    for (q, &angle) in h.iter().enumerate() {
        state.apply_unchecked(&ry(2.0 * angle), &[q]);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::super::gates::{pauli_rotation, pqc15, Pauli, Pqc15Params};
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> =
            (0..1 << n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn random_pqc(rng: &mut impl Rng) -> Unitary {
        let mut t = [0.0; 15];
        t.iter_mut().for_each(|v| *v = rng.random_range(-3.2..3.2));
        pqc15(&Pqc15Params(t))
    }

    #[test]
    fn init_state_shapes() {
        let s = init_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = init_state(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert!(init_state(0).is_err());
        assert!(init_state(13).is_err());
    }

    #[test]
    fn pauli_x_flips_and_identity_is_noop() {
        let mut s = init_state(2).unwrap();
        let before = s.clone();
        s.apply_unitary(&Unitary::identity(2), &[1]).unwrap();
        assert_eq!(s, before);
        s.apply_unitary(&Pauli::X.matrix(), &[1]).unwrap();
        assert!((s.amplitudes()[2].re - 1.0).abs() < 1e-15);
        assert!((s.expectation_z(1) + 1.0).abs() < 1e-15);
        assert!((s.expectation_z(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_unitary_and_bad_targets() {
        let mut s = init_state(2).unwrap();
        let bad = Unitary::from_rows(2, vec![Complex64::new(2.0, 0.0); 4]).unwrap();
        assert!(s.apply_unitary(&bad, &[0]).is_err());
        assert!(s.apply_unitary(&Pauli::X.matrix(), &[2]).is_err());
        assert!(s.apply_unitary(&Unitary::identity(4), &[1, 1]).is_err());
        assert!(s.apply_unitary(&Unitary::identity(4), &[0]).is_err());
    }

    #[test]
    fn gate_then_inverse_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let original = random_state(5, 1);
        let mut s = original.clone();
        for (a, b) in [(0, 3), (4, 1), (2, 0)] {
            let u = random_pqc(&mut rng);
            s.apply_unitary(&u, &[a, b]).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
            s.apply_unitary(&u.dagger(), &[a, b]).unwrap();
        }
        for (x, y) in s.amplitudes().iter().zip(original.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn specialized_kernels_agree_with_generic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let base = random_state(4, 2);
        for (a, b) in [(0, 1), (1, 0), (3, 1), (0, 3), (2, 3)] {
            let u = random_pqc(&mut rng);
            let mut fast = base.clone();
            fast.apply_unchecked(&u, &[a, b]);
            let mut slow = base.amplitudes().to_vec();
            apply_kq(&mut slow, &u, &[a, b]);
            for (x, y) in fast.amplitudes().iter().zip(&slow) {
                assert!((x - y).norm() < 1e-14);
            }
        }
        let u = pauli_rotation(&[Pauli::Y], 0.7);
        let mut fast = base.clone();
        fast.apply_unchecked(&u, &[2]);
        let mut slow = base.amplitudes().to_vec();
        apply_kq(&mut slow, &u, &[2]);
        for (x, y) in fast.amplitudes().iter().zip(&slow) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn two_qubit_gate_matches_dense_kron() {
        // on a 2-qubit register targets [0, 1] is the matrix itself, [1, 0] swaps the factors
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = random_pqc(&mut rng);
        let s = random_state(2, 8);
        let mut applied = s.clone();
        applied.apply_unchecked(&u, &[0, 1]);
        for row in 0..4 {
            let expected: Complex64 = (0..4).map(|c| u.get(row, c) * s.amplitudes()[c]).sum();
            assert!((applied.amplitudes()[row] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn angle_embedding_expectations() {
        let s = angle_embedding(&[0.0; 4]).unwrap();
        assert!((0..4).all(|q| (s.expectation_z(q) - 1.0).abs() < 1e-15));
        let s = angle_embedding(&[FRAC_PI_4, FRAC_PI_2, 0.3]).unwrap();
        assert!(s.expectation_z(0).abs() < 1e-15);
        assert!((s.expectation_z(1) + 1.0).abs() < 1e-15);
        assert!((s.expectation_z(2) - 0.6f64.cos()).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}
