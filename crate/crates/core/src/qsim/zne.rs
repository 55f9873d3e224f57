//! Zero-noise extrapolation and finite-shot readout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Richardson extrapolation of `(scale, value)` pairs to scale zero.
pub fn richardson(scales: &[f64], values: &[f64]) -> Result<f64> {
    if scales.len() < 2 {
        return Err(Error::InvalidArgument("extrapolation needs at least two noise scales".into()));
    }
    if scales.len() != values.len() {
        return Err(Error::Dimension(format!("{} scales, {} values", scales.len(), values.len())));
    }
    for (i, a) in scales.iter().enumerate() {
        if !a.is_finite() || *a <= 0.0 {
            return Err(Error::InvalidArgument(format!("noise scale {a} must be positive")));
        }
        if scales[..i].iter().any(|b| (a - b).abs() < 1e-12) {
            return Err(Error::InvalidArgument(format!("noise scale {a} repeated")));
        }
    }
    let mut out = 0.0;
    for (i, (&si, &vi)) in scales.iter().zip(values).enumerate() {
        let weight: f64 = scales
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &sj)| sj / (sj - si))
            .product();
        out += weight * vi;
    }
    Ok(out)
}

/// Evaluates `noisy(scale)` at each scale and extrapolates every output to zero noise.
pub fn zne_expectation(scales: &[f64], mut noisy: impl FnMut(f64) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    if scales.len() < 2 {
        return Err(Error::InvalidArgument("extrapolation needs at least two noise scales".into()));
    }
    let runs = scales.iter().map(|&s| noisy(s)).collect::<Result<Vec<_>>>()?;
    let width = runs[0].len();
    if runs.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("noisy runs returned different output counts".into()));
    }
    (0..width)
        .map(|o| {
            let column: Vec<f64> = runs.iter().map(|r| r[o]).collect();
            richardson(scales, &column)
        })
        .collect()
}

/// Estimates `<Z>` from `shots` single-qubit measurements with outcome-0 probability `prob_zero`.
pub fn sample_z(prob_zero: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    let p = prob_zero.clamp(0.0, 1.0);
    let zeros = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidArgument(format!("bad outcome probability {p}: {e}")))?
        .sample(rng);
    Ok((2.0 * zeros as f64 - shots as f64) / shots as f64)
}

/// Shot-noise estimate of every `<Z>` given the outcome-0 probabilities.
pub fn sample_shots(prob_zero: &[f64], shots: u64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    prob_zero.iter().map(|&p| sample_z(p, shots, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_is_exact_on_polynomials() {
        let f = |x: f64| 0.3 - 1.2 * x + 0.5 * x * x;
        let scales = [1.0, 2.0, 3.0];
        let vals: Vec<f64> = scales.iter().map(|&s| f(s)).collect();
        assert!((richardson(&scales, &vals).unwrap() - 0.3).abs() < 1e-12);
        let lin = [f64::from(1) * 2.0 + 1.0, 2.0 * 2.0 + 1.0];
        assert!((richardson(&[1.0, 2.0], &lin).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_rejects_bad_input() {
        assert!(richardson(&[1.0], &[0.5]).is_err());
        assert!(richardson(&[1.0, 1.0], &[0.5, 0.4]).is_err());
        assert!(richardson(&[1.0, -2.0], &[0.5, 0.4]).is_err());
        assert!(zne_expectation(&[1.0], |_| Ok(vec![0.0])).is_err());
    }

    #[test]
    fn zne_moves_toward_noiseless_for_exponential_decay() {
        let clean = 0.8;
        let out = zne_expectation(&[1.0, 2.0, 3.0], |s| Ok(vec![clean * 0.9f64.powf(6.0 * s)])).unwrap();
        let noisy = clean * 0.9f64.powi(6);
        assert!((out[0] - clean).abs() < (noisy - clean).abs());
    }

    #[test]
    fn shots_are_unbiased_and_seeded() {
        let p = [0.9, 0.25];
        let a = sample_shots(&p, 200_000, 7).unwrap();
        assert_eq!(a, sample_shots(&p, 200_000, 7).unwrap());
        assert!((a[0] - 0.8).abs() < 0.01);
        assert!((a[1] + 0.5).abs() < 0.01);
        assert_eq!(sample_shots(&[1.0], 10, 1).unwrap(), vec![1.0]);
        assert!(sample_shots(&[0.5], 0, 1).is_err());
    }
}
