//! The feed-forward squeezing gate.
//!
//! The input mode meets one arm of an EPR pair on a beam splitter of
//! reflectivity `R`. One output port is read in X, the other in P, and the
//! scaled readings displace the second EPR arm. With the gains from
//! [`optimal_gains`] the output quadratures are
//!
//! ```text
//! X_out = √(R/(1−R))·X_in + (X_E1 + X_E2)
//! P_out = √((1−R)/R)·P_in + (P_E2 − P_E1)
//! ```
//!
//! so `R < 1/2` squeezes X, `R > 1/2` squeezes P and `R = 1/2` is plain
//! unity-gain teleportation.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{db_to_noise, GaussianState};
use crate::measurement::{homodyne_sample, sample_quadrature, shot_rng};
use crate::tomography::{HomodyneDataset, HomodyneShot, Provenance};

/// Reflectivities closer than this to 0 or 1 are rejected.
pub const REFLECTIVITY_GUARD: f64 = 1e-6;

/// Which quadrature the gate squeezes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    Amplitude,
    Phase,
}

/// Beam-splitter reflectivity that realizes `target_db` of squeezing on `axis`.
pub fn reflectivity_for_target(target_db: f64, axis: Axis) -> Result<f64> {
    if !(target_db >= 0.0) || !target_db.is_finite() {
        return Err(Error::NegativeTarget(target_db));
    }
    let s2 = db_to_noise(target_db);
    let r = match axis {
        Axis::Amplitude => s2 / (1.0 + s2),
        Axis::Phase => 1.0 / (1.0 + s2),
    };
    check_reflectivity(r)?;
    Ok(r)
}

fn check_reflectivity(r: f64) -> Result<()> {
    if !(REFLECTIVITY_GUARD..=1.0 - REFLECTIVITY_GUARD).contains(&r) {
        return Err(Error::Reflectivity(r));
    }
    Ok(())
}

/// Feed-forward gains `(g_X, g_P) = (1/√(1−R), 1/√R)`.
pub fn optimal_gains(reflectivity: f64) -> Result<(f64, f64)> {
    check_reflectivity(reflectivity)?;
    Ok((1.0 / (1.0 - reflectivity).sqrt(), 1.0 / reflectivity.sqrt()))
}

fn one() -> f64 {
    1.0
}

/// Every knob of the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub reflectivity: f64,
    /// Override for the X feed-forward gain; `None` uses [`optimal_gains`].
    #[serde(default)]
    pub gain_x: Option<f64>,
    #[serde(default)]
    pub gain_p: Option<f64>,
    /// EPR quality: `⟨Δ(X₁+X₂)²⟩ = 10^{-epr_db/10}`. Infinity means a
    /// perfect ancilla and is only accepted by the analytic path.
    pub epr_db: f64,
    /// Transmission of the EPR arm through the displacement coupler.
    /// 1 is an ideal displacement; the bench uses 0.99.
    #[serde(default = "one")]
    pub coupler_rd: f64,
    #[serde(default = "one")]
    pub detection_eta: f64,
}

impl GateConfig {
    pub fn new(reflectivity: f64, epr_db: f64) -> Self {
        Self {
            reflectivity,
            gain_x: None,
            gain_p: None,
            epr_db,
            coupler_rd: 1.0,
            detection_eta: 1.0,
        }
    }

    pub fn for_target(target_db: f64, axis: Axis, epr_db: f64) -> Result<Self> {
        Ok(Self::new(reflectivity_for_target(target_db, axis)?, epr_db))
    }

    pub fn with_coupler(mut self, coupler_rd: f64) -> Self {
        self.coupler_rd = coupler_rd;
        self
    }

    pub fn with_detection(mut self, eta: f64) -> Self {
        self.detection_eta = eta;
        self
    }

    pub fn with_gains(mut self, gain_x: f64, gain_p: f64) -> Self {
        self.gain_x = Some(gain_x);
        self.gain_p = Some(gain_p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_reflectivity(self.reflectivity)?;
        for (name, g) in [("gain_x", self.gain_x), ("gain_p", self.gain_p)] {
            if let Some(value) = g {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::InvalidGain { name, value });
                }
            }
        }
        if !(self.epr_db >= 0.0) {
            return Err(Error::NegativeEntanglement(self.epr_db));
        }
        if !(self.coupler_rd > 0.0 && self.coupler_rd <= 1.0) {
            return Err(Error::Coupler(self.coupler_rd));
        }
        if !(self.detection_eta > 0.0 && self.detection_eta <= 1.0) {
            return Err(Error::DetectionEfficiency(self.detection_eta));
        }
        Ok(())
    }

    /// Gains in effect, filling in the optimal values where not overridden.
    pub fn gains(&self) -> Result<(f64, f64)> {
        let (gx, gp) = optimal_gains(self.reflectivity)?;
        Ok((self.gain_x.unwrap_or(gx), self.gain_p.unwrap_or(gp)))
    }

    /// The same config with gains made explicit.
    pub fn resolved(&self) -> Result<Self> {
        let (gx, gp) = self.gains()?;
        Ok(self.with_gains(gx, gp))
    }

    /// Amplitude gain `√(R/(1−R))` of the ideal map.
    pub fn squeeze_factor(&self) -> f64 {
        (self.reflectivity / (1.0 - self.reflectivity)).sqrt()
    }

    /// Target squeezing in dB (positive for either axis).
    pub fn target_db(&self) -> f64 {
        (20.0 * self.squeeze_factor().log10()).abs()
    }

    fn is_ideal_feed_forward(&self) -> bool {
        self.gain_x.is_none()
            && self.gain_p.is_none()
            && self.coupler_rd == 1.0
            && self.detection_eta == 1.0
    }
}

/// Outcome of one gate evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GateResult {
    pub output: GaussianState,
    /// Ideal noise-free map applied to the same input.
    pub target: GaussianState,
    pub config: GateConfig,
}

/// Mode layout of the linear feed-forward model.
pub mod layout {
    pub const INPUT: usize = 0;
    pub const EPR1: usize = 1;
    pub const EPR2: usize = 2;
    /// Vacuum admitted by detector inefficiency at the X homodyne.
    pub const DET_X: usize = 3;
    /// Vacuum admitted by detector inefficiency at the P homodyne.
    pub const DET_P: usize = 4;
    /// Vacuum port of the displacement coupler.
    pub const COUPLER: usize = 5;
    pub const MODES: usize = 6;
}

/// Output quadratures as linear combinations of every mode entering the
/// gate, averaged over the feed-forward outcomes. Row 0 is `X_out`, row 1
/// is `P_out`; columns follow [`layout`] as `(X₀, P₀, X₁, P₁, …)`.
pub fn feed_forward_map(config: &GateConfig) -> Result<DMatrix<f64>> {
    use layout::*;
    config.validate()?;
    let r = config.reflectivity;
    let (gx, gp) = config.gains()?;
    let eta = config.detection_eta;
    let (te, le) = (eta.sqrt(), (1.0 - eta).sqrt());
    let (tc, lc) = (config.coupler_rd.sqrt(), (1.0 - config.coupler_rd).sqrt());

    let mut m = DMatrix::zeros(2, 2 * MODES);
    // HOM1 reads X of √R·in + √(1−R)·E1, HOM2 reads P of √(1−R)·in − √R·E1.
    m[(0, 2 * INPUT)] = gx * te * r.sqrt();
    m[(0, 2 * EPR1)] = gx * te * (1.0 - r).sqrt();
    m[(0, 2 * DET_X)] = gx * le;
    m[(1, 2 * INPUT + 1)] = gp * te * (1.0 - r).sqrt();
    m[(1, 2 * EPR1 + 1)] = -gp * te * r.sqrt();
    m[(1, 2 * DET_P + 1)] = gp * le;
    // E2 through the coupler, which also admits its vacuum port.
    m[(0, 2 * EPR2)] = tc;
    m[(1, 2 * EPR2 + 1)] = tc;
    m[(0, 2 * COUPLER)] = lc;
    m[(1, 2 * COUPLER + 1)] = lc;
    Ok(m)
}

fn check_single_mode(state: &GaussianState) -> Result<()> {
    if state.n_modes() != 1 {
        return Err(Error::WrongModeCount {
            expected: 1,
            got: state.n_modes(),
        });
    }
    Ok(())
}

/// Ideal squeezing map `diag(s, 1/s)` applied to `input`.
pub fn ideal_output(config: &GateConfig, input: &GaussianState) -> Result<GaussianState> {
    check_single_mode(input)?;
    let s = config.squeeze_factor();
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![s, 1.0 / s]));
    Ok(GaussianState::from_raw(
        &d * input.mean(),
        &d * input.cov() * &d,
    ))
}

/// Moments of the gate output, propagated through [`feed_forward_map`].
pub fn run_gate_analytic(config: &GateConfig, input: &GaussianState) -> Result<GateResult> {
    config.validate()?;
    check_single_mode(input)?;
    let target = ideal_output(config, input)?;
    let resolved = config.resolved()?;
    if config.epr_db.is_infinite() {
        // A perfect ancilla only cancels when the feed-forward is ideal.
        if !config.is_ideal_feed_forward() {
            return Err(Error::NonFinite("epr_db with non-ideal feed-forward"));
        }
        return Ok(GateResult {
            output: target.clone(),
            target,
            config: resolved,
        });
    }
    let joint = input
        .tensor(&GaussianState::epr_pair(config.epr_db)?)?
        .tensor(&GaussianState::vacuum(3)?)?;
    let map = feed_forward_map(config)?;
    let mean = &map * joint.mean();
    let cov = &map * joint.cov() * map.transpose();
    Ok(GateResult {
        output: GaussianState::from_raw(mean, cov),
        target,
        config: resolved,
    })
}

/// Shot-by-shot simulation of the full optical chain.
///
/// Each shot samples both feed-forward homodynes with exact conditioning,
/// displaces the second EPR arm and then reads the output at one LO phase,
/// cycling through `output_lo_phases`. Shot `i` draws from the stream
/// `(seed, i)`, so results do not depend on thread scheduling.
pub fn run_gate_shots(
    config: &GateConfig,
    input: &GaussianState,
    n_shots: usize,
    output_lo_phases: &[f64],
    seed: u64,
) -> Result<HomodyneDataset> {
    config.validate()?;
    check_single_mode(input)?;
    if n_shots == 0 {
        return Err(Error::NoShots);
    }
    if output_lo_phases.is_empty() {
        return Err(Error::NoPhases);
    }
    if !config.epr_db.is_finite() {
        return Err(Error::NonFinite("epr_db"));
    }
    let (gx, gp) = config.gains()?;
    let coupled = config.coupler_rd < 1.0;

    // modes: input, E1, E2[, coupler auxiliary]
    let mut prepared = input.tensor(&GaussianState::epr_pair(config.epr_db)?)?;
    if coupled {
        prepared = prepared.tensor(&GaussianState::vacuum(1)?)?;
    }
    prepared = prepared.beamsplitter(0, 1, config.reflectivity)?;
    if config.detection_eta < 1.0 {
        prepared = prepared
            .loss(0, config.detection_eta)?
            .loss(1, config.detection_eta)?;
    }
    let aux_scale = if coupled {
        1.0 / (1.0 - config.coupler_rd).sqrt()
    } else {
        1.0
    };

    let shots = (0..n_shots)
        .into_par_iter()
        .map(|i| -> Result<HomodyneShot> {
            let mut rng = shot_rng(seed, i as u64);
            let (x, after_x) = homodyne_sample(&prepared, 0, 0.0, &mut rng)?;
            let (p, after_p) = homodyne_sample(&after_x, 0, FRAC_PI_2, &mut rng)?;
            let (dx, dp) = (gx * x.value, gp * p.value);
            let out = if coupled {
                // Bright auxiliary beam carries the displacement into E2.
                after_p
                    .displace(1, dx * aux_scale, dp * aux_scale)?
                    .beamsplitter(0, 1, config.coupler_rd)?
                    .reduce(&[0])?
            } else {
                after_p.displace(0, dx, dp)?
            };
            let phase = output_lo_phases[i % output_lo_phases.len()];
            let reading = sample_quadrature(&out, 0, phase, &mut rng)?;
            Ok(HomodyneShot {
                lo_phase: reading.lo_phase,
                value: reading.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(HomodyneDataset::new(
        shots,
        Provenance {
            config: Some(config.resolved()?),
            seed: Some(seed),
            input_mean: Some(input.mean().iter().copied().collect()),
            input_cov: Some(input.cov().iter().copied().collect()),
            label: None,
        },
    ))
}

/// Config for the Fourier-then-squeeze operation: the gate squeezes the
/// quadrature that carries the signal once the input has been rotated by π/2.
pub fn complex_config(target_db: f64, epr_db: f64, input: &GaussianState) -> Result<GateConfig> {
    check_single_mode(input)?;
    let rotated = input.rotate(0, FRAC_PI_2)?;
    let power = |k: usize| rotated.cov()[(k, k)] + rotated.mean()[k].powi(2);
    let axis = if power(0) >= power(1) {
        Axis::Amplitude
    } else {
        Axis::Phase
    };
    GateConfig::for_target(target_db, axis, epr_db)
}

/// Fourier gate followed by the squeezing gate. The target is the ideal
/// composite map applied to `input`.
pub fn run_complex(config: &GateConfig, input: &GaussianState) -> Result<GateResult> {
    check_single_mode(input)?;
    run_gate_analytic(config, &input.rotate(0, FRAC_PI_2)?)
}

/// Shot-level version of [`run_complex`].
pub fn run_complex_shots(
    config: &GateConfig,
    input: &GaussianState,
    n_shots: usize,
    output_lo_phases: &[f64],
    seed: u64,
) -> Result<HomodyneDataset> {
    check_single_mode(input)?;
    run_gate_shots(
        config,
        &input.rotate(0, FRAC_PI_2)?,
        n_shots,
        output_lo_phases,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::SymplecticTransform;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reflectivity_examples() {
        assert_abs_diff_eq!(
            reflectivity_for_target(10.0, Axis::Amplitude).unwrap(),
            1.0 / 11.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            reflectivity_for_target(10.0, Axis::Phase).unwrap(),
            10.0 / 11.0,
            epsilon = 1e-15
        );
        for axis in [Axis::Amplitude, Axis::Phase] {
            assert_eq!(reflectivity_for_target(0.0, axis).unwrap(), 0.5);
        }
        assert_eq!(
            reflectivity_for_target(-3.0, Axis::Amplitude),
            Err(Error::NegativeTarget(-3.0))
        );
    }

    #[test]
    fn gains_examples() {
        let (gx, gp) = optimal_gains(0.5).unwrap();
        assert_abs_diff_eq!(gx, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(gp, 2f64.sqrt(), epsilon = 1e-15);
        let (gx, gp) = optimal_gains(1.0 / 11.0).unwrap();
        assert_abs_diff_eq!(gx, 1.048809, epsilon = 1e-6);
        assert_abs_diff_eq!(gp, 3.316625, epsilon = 1e-6);
        assert!(optimal_gains(1e-7).is_err());
        assert!(optimal_gains(1.0 - 1e-7).is_err());
        assert!(optimal_gains(1e-6).is_ok());
    }

    // Independent route: read HOM rows straight off the beam-splitter matrix.
    fn coefficients_from_beamsplitter(r: f64) -> [f64; 6] {
        let bs = SymplecticTransform::beamsplitter(3, 0, 1, r).unwrap();
        let m = bs.matrix();
        let (gx, gp) = optimal_gains(r).unwrap();
        // rows: X of port 0 (index 0), P of port 1 (index 3)
        [
            gx * m[(0, 0)],
            gx * m[(0, 2)],
            1.0,
            gp * m[(3, 1)],
            gp * m[(3, 3)],
            1.0,
        ]
    }

    #[test]
    fn linear_model_reproduces_squeezing_map() {
        for r in [0.01, 1.0 / 11.0, 0.3, 0.5, 0.77, 0.99] {
            let c = coefficients_from_beamsplitter(r);
            let expect = [
                (r / (1.0 - r)).sqrt(),
                1.0,
                1.0,
                ((1.0 - r) / r).sqrt(),
                -1.0,
                1.0,
            ];
            for (a, b) in c.iter().zip(expect) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
            let m = feed_forward_map(&GateConfig::new(r, 12.0)).unwrap();
            let got = [
                m[(0, 0)],
                m[(0, 2)],
                m[(0, 4)],
                m[(1, 1)],
                m[(1, 3)],
                m[(1, 5)],
            ];
            for (a, b) in got.iter().zip(expect) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn headline_output_covariance() {
        let cfg = GateConfig::for_target(10.0, Axis::Amplitude, 12.0).unwrap();
        let res = run_gate_analytic(&cfg, &GaussianState::vacuum(1).unwrap()).unwrap();
        let ea = 10f64.powf(-1.2);
        assert_abs_diff_eq!(res.output.cov()[(0, 0)], 0.05 + ea, epsilon = 1e-12);
        assert_abs_diff_eq!(res.output.cov()[(1, 1)], 5.0 + ea, epsilon = 1e-11);
        assert_abs_diff_eq!(res.output.cov()[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.output.cov()[(0, 0)], 0.113096, epsilon = 1e-6);
        assert_abs_diff_eq!(res.output.cov()[(1, 1)], 5.063096, epsilon = 1e-6);
        assert!(res.target.is_pure(1e-9));
    }

    #[test]
    fn unity_gate_limits() {
        let input = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, 0.3, 0.5)
            .unwrap()
            .displace(0, 1.0, -0.5)
            .unwrap();
        let ideal = run_gate_analytic(&GateConfig::new(0.5, f64::INFINITY), &input).unwrap();
        assert_eq!(ideal.output, input);

        let classical = run_gate_analytic(
            &GateConfig::new(0.5, 0.0),
            &GaussianState::vacuum(1).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(classical.output.cov()[(0, 0)], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(classical.output.cov()[(1, 1)], 1.5, epsilon = 1e-12);

        let mistuned = GateConfig::new(0.5, f64::INFINITY).with_gains(1.0, 1.0);
        assert!(run_gate_analytic(&mistuned, &input).is_err());
    }

    #[test]
    fn coupler_shifts_output_variance() {
        let vac = GaussianState::vacuum(1).unwrap();
        let cfg = GateConfig::for_target(10.0, Axis::Amplitude, 12.0).unwrap();
        let ideal = run_gate_analytic(&cfg, &vac).unwrap();
        let lossy = run_gate_analytic(&cfg.with_coupler(0.99), &vac).unwrap();
        // Oracle: Var(X_E1 + √0.99·X_E2) + 0.01·½ on top of 0.1·½.
        let r = crate::gaussian::db_to_r(12.0);
        let (v, c) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        let t = 0.99f64.sqrt();
        let noise = v + 0.99 * v - 2.0 * t * c + 0.005;
        assert_abs_diff_eq!(lossy.output.cov()[(0, 0)], 0.05 + noise, epsilon = 1e-12);
        let shift = lossy.output.cov()[(0, 0)] - ideal.output.cov()[(0, 0)];
        assert_abs_diff_eq!(shift, 0.0047837, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_configs() {
        let vac = GaussianState::vacuum(1).unwrap();
        let mut cfg = GateConfig::new(0.3, 12.0);
        cfg.coupler_rd = 0.0;
        assert_eq!(
            run_gate_analytic(&cfg, &vac).unwrap_err(),
            Error::Coupler(0.0)
        );
        let cfg = GateConfig::new(0.3, 12.0).with_gains(-1.0, 1.0);
        assert!(matches!(cfg.validate(), Err(Error::InvalidGain { .. })));
        let cfg = GateConfig::new(0.3, -2.0);
        assert_eq!(cfg.validate(), Err(Error::NegativeEntanglement(-2.0)));
        let two = GaussianState::vacuum(2).unwrap();
        assert!(matches!(
            run_gate_analytic(&GateConfig::new(0.3, 12.0), &two),
            Err(Error::WrongModeCount { .. })
        ));
        assert_eq!(
            run_gate_shots(&GateConfig::new(0.3, 12.0), &vac, 0, &[0.0], 1).unwrap_err(),
            Error::NoShots
        );
        assert_eq!(
            run_gate_shots(&GateConfig::new(0.3, 12.0), &vac, 5, &[], 1).unwrap_err(),
            Error::NoPhases
        );
    }

    #[test]
    fn complex_picks_signal_axis() {
        let p_input = GaussianState::vacuum(1)
            .unwrap()
            .displace(0, 0.0, 2.0)
            .unwrap();
        let cfg = complex_config(10.0, 12.0, &p_input).unwrap();
        assert!(cfg.reflectivity < 0.5);
        let x_input = GaussianState::vacuum(1)
            .unwrap()
            .displace(0, 2.0, 0.0)
            .unwrap();
        let cfg = complex_config(10.0, 12.0, &x_input).unwrap();
        assert!(cfg.reflectivity > 0.5);
    }

    #[test]
    fn shots_are_reproducible() {
        let cfg = GateConfig::for_target(4.1, Axis::Phase, 12.0)
            .unwrap()
            .with_coupler(0.99)
            .with_detection(0.95);
        let input = GaussianState::vacuum(1)
            .unwrap()
            .displace(0, 1.0, 1.0)
            .unwrap();
        let a = run_gate_shots(&cfg, &input, 200, &[0.0, 1.0], 5).unwrap();
        let b = run_gate_shots(&cfg, &input, 200, &[0.0, 1.0], 5).unwrap();
        assert_eq!(a, b);
        let c = run_gate_shots(&cfg, &input, 200, &[0.0, 1.0], 6).unwrap();
        assert_ne!(a, c);
    }
}
