//! Homodyne detection: exact Gaussian conditioning and outcome sampling.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

const MIN_MEASURED_VARIANCE: f64 = 1e-12;

/// Reduces an LO phase to `[0, π)`. Returns the reduced phase and the sign
/// the quadrature reading picks up (a shift by π flips the quadrature).
pub fn normalize_phase(phase: f64) -> (f64, f64) {
    let k = (phase / PI).floor();
    let mut reduced = phase - k * PI;
    let mut flips = k as i64;
    if reduced >= PI {
        reduced -= PI;
        flips += 1;
    }
    if reduced < 0.0 {
        reduced = 0.0;
    }
    let sign = if flips.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    (reduced, sign)
}

/// One homodyne reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneOutcome {
    pub mode: usize,
    /// LO phase in `[0, π)`; 0 reads X, π/2 reads P.
    pub lo_phase: f64,
    pub value: f64,
}

impl HomodyneOutcome {
    pub fn new(mode: usize, lo_phase: f64, value: f64) -> Result<Self> {
        if !value.is_finite() || !lo_phase.is_finite() {
            return Err(Error::NonFinite("homodyne outcome"));
        }
        let (lo_phase, sign) = normalize_phase(lo_phase);
        Ok(Self {
            mode,
            lo_phase,
            value: sign * value,
        })
    }
}

/// Per-shot random stream keyed on `(seed, shot_index)`.
pub fn shot_rng(seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot_index);
    rng
}

/// Conditions the remaining modes on reading `outcome` for quadrature
/// `X cos θ + P sin θ` of `mode`. The measured mode is removed.
pub fn homodyne_condition(
    state: &GaussianState,
    mode: usize,
    lo_phase: f64,
    outcome: f64,
) -> Result<GaussianState> {
    let n = state.n_modes();
    if mode >= n {
        return Err(Error::ModeOutOfRange { mode, n_modes: n });
    }
    if n < 2 {
        return Err(Error::NothingLeft);
    }
    if !outcome.is_finite() {
        return Err(Error::NonFinite("homodyne outcome"));
    }
    // Rotating by −θ puts the measured quadrature on X.
    let rotated = state.rotate(mode, -lo_phase)?;
    let a = 2 * mode;
    let var_a = rotated.cov()[(a, a)];
    if var_a <= MIN_MEASURED_VARIANCE {
        return Err(Error::DegenerateQuadrature(var_a));
    }
    let rest: Vec<usize> = (0..2 * n).filter(|&i| i != a && i != a + 1).collect();
    let mu = rotated.mean();
    let cov = rotated.cov();
    let cross = DVector::from_iterator(rest.len(), rest.iter().map(|&i| cov[(i, a)]));
    let gain = &cross / var_a;
    let mean =
        DVector::from_iterator(rest.len(), rest.iter().map(|&i| mu[i])) + &gain * (outcome - mu[a]);
    let cov_b = DMatrix::from_fn(rest.len(), rest.len(), |r, c| cov[(rest[r], rest[c])]);
    let cov = cov_b - &cross * cross.transpose() / var_a;
    Ok(GaussianState::from_raw(mean, cov))
}

/// Draws a reading from the exact marginal `N(μ_θ, V_θ)` without touching
/// the state.
pub fn sample_quadrature<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    lo_phase: f64,
    rng: &mut R,
) -> Result<HomodyneOutcome> {
    let (mu, var) = state.quadrature_moments(mode, lo_phase)?;
    if var <= MIN_MEASURED_VARIANCE {
        return Err(Error::DegenerateQuadrature(var));
    }
    let z: f64 = rng.sample(StandardNormal);
    HomodyneOutcome::new(mode, lo_phase, mu + var.sqrt() * z)
}

/// Samples a reading and returns it with the conditioned post-state.
pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    lo_phase: f64,
    rng: &mut R,
) -> Result<(HomodyneOutcome, GaussianState)> {
    if state.n_modes() < 2 {
        return Err(Error::NothingLeft);
    }
    let outcome = sample_quadrature(state, mode, lo_phase, rng)?;
    let post = homodyne_condition(state, mode, lo_phase, sign_back(lo_phase, outcome.value))?;
    Ok((outcome, post))
}

// Undo the sign flip that `HomodyneOutcome::new` applied for phases ≥ π.
fn sign_back(lo_phase: f64, value: f64) -> f64 {
    value * normalize_phase(lo_phase).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn phase_normalization() {
        assert_eq!(normalize_phase(0.0), (0.0, 1.0));
        let (p, s) = normalize_phase(PI + 0.25);
        assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        assert_eq!(s, -1.0);
        let (p, s) = normalize_phase(-FRAC_PI_2);
        assert_abs_diff_eq!(p, FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(s, -1.0);
        let (p, s) = normalize_phase(2.0 * PI + 0.1);
        assert_abs_diff_eq!(p, 0.1, epsilon = 1e-14);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn product_state_untouched() {
        let v = GaussianState::vacuum(2).unwrap();
        for x in [-3.0, 0.0, 1.7] {
            let post = homodyne_condition(&v, 0, 0.0, x).unwrap();
            assert_eq!(post, GaussianState::vacuum(1).unwrap());
        }
    }

    #[test]
    fn epr_conditional_variance() {
        let e = GaussianState::epr_pair(12.0).unwrap();
        let post = homodyne_condition(&e, 0, 0.0, 0.0).unwrap();
        let two_r = 2.0 * crate::gaussian::db_to_r(12.0);
        assert_abs_diff_eq!(
            post.cov()[(0, 0)],
            1.0 / (2.0 * two_r.cosh()),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(post.cov()[(0, 0)], 0.0628455, epsilon = 1e-7);

        let z = GaussianState::epr_pair(0.0).unwrap();
        let post = homodyne_condition(&z, 0, 0.0, 0.4).unwrap();
        assert_abs_diff_eq!(post.cov()[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_quadrature_rejected() {
        let mean = DVector::zeros(4);
        let mut cov = DMatrix::identity(4, 4) * 0.5;
        cov[(0, 0)] = 0.0;
        let st = GaussianState::from_raw(mean, cov);
        assert!(matches!(
            homodyne_condition(&st, 0, 0.0, 0.0),
            Err(Error::DegenerateQuadrature(_))
        ));
        assert_eq!(
            homodyne_condition(&GaussianState::vacuum(1).unwrap(), 0, 0.0, 0.0),
            Err(Error::NothingLeft)
        );
    }

    #[test]
    fn post_covariance_independent_of_outcome() {
        let st = GaussianState::epr_pair(7.0)
            .unwrap()
            .squeeze(1, 0.3, 0.4)
            .unwrap()
            .displace(0, 0.2, -0.7)
            .unwrap();
        let reference = homodyne_condition(&st, 0, 0.6, 0.0).unwrap();
        for x in [-2.5, -0.1, 0.9, 3.3, 12.0] {
            let post = homodyne_condition(&st, 0, 0.6, x).unwrap();
            assert_eq!(post.cov(), reference.cov());
        }
    }

    #[test]
    fn conditioning_matches_sampled_regression() {
        // Brute force: regress X₂ on X₁ over correlated samples.
        let e = GaussianState::epr_pair(12.0).unwrap();
        let n = 200_000u64;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        let l = e.cov().clone().cholesky().unwrap().l();
        for i in 0..n {
            let mut rng = shot_rng(9, i);
            let z = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = &l * z;
            sxx += s[0] * s[0];
            sxy += s[0] * s[2];
            syy += s[2] * s[2];
        }
        let (sxx, sxy, syy) = (sxx / n as f64, sxy / n as f64, syy / n as f64);
        let resid = syy - sxy * sxy / sxx;
        let post = homodyne_condition(&e, 0, 0.0, 0.0).unwrap();
        assert!((resid - post.cov()[(0, 0)]).abs() < 3e-3, "{resid}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let st = GaussianState::epr_pair(5.0).unwrap();
        let run = || {
            (0..50)
                .map(|i| {
                    let mut rng = shot_rng(42, i);
                    homodyne_sample(&st, 0, 0.3, &mut rng).unwrap().0.value
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sampled_post_state_uses_raw_reading() {
        // A phase of π + θ reads the negated quadrature; the post-state must
        // agree with conditioning at θ on the normalized outcome.
        let st = GaussianState::epr_pair(6.0).unwrap();
        let mut rng = shot_rng(3, 0);
        let (out, post) = homodyne_sample(&st, 0, PI + 0.2, &mut rng).unwrap();
        let direct = homodyne_condition(&st, 0, out.lo_phase, out.value).unwrap();
        assert_abs_diff_eq!((post.mean() - direct.mean()).amax(), 0.0, epsilon = 1e-12);
    }
}
