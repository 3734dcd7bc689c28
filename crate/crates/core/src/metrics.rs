//! Fidelity, squeezing levels, Wigner functions and EPR quality.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{variance_db, GaussianState, VACUUM_VARIANCE};

const PURITY_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-3;

/// Pure-target overlap `⟨ψ|ρ|ψ⟩`, split into its two factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    /// `1/√det(V₁+V₂)`
    pub covariance_factor: f64,
    /// `exp(−½ δᵀ(V₁+V₂)⁻¹δ)`
    pub mean_factor: f64,
}

fn require_single_mode(state: &GaussianState) -> Result<()> {
    if state.n_modes() != 1 {
        return Err(Error::WrongModeCount {
            expected: 1,
            got: state.n_modes(),
        });
    }
    Ok(())
}

/// Overlap of a pure single-mode Gaussian target with an arbitrary
/// single-mode Gaussian state.
pub fn fidelity(target: &GaussianState, actual: &GaussianState) -> Result<FidelityReport> {
    require_single_mode(target)?;
    require_single_mode(actual)?;
    let nu = target.symplectic_eigenvalues()[0];
    if (nu - VACUUM_VARIANCE).abs() > PURITY_TOL {
        return Err(Error::NotPure(nu));
    }
    let sigma = target.cov() + actual.cov();
    let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
    assert!(det > 0.0, "physical states give a positive-definite sum");
    let d = actual.mean() - target.mean();
    // δᵀ Σ⁻¹ δ with the 2×2 adjugate
    let q = (sigma[(1, 1)] * d[0] * d[0] - 2.0 * sigma[(0, 1)] * d[0] * d[1]
        + sigma[(0, 0)] * d[1] * d[1])
        / det;
    let covariance_factor = 1.0 / det.sqrt();
    let mean_factor = (-0.5 * q).exp();
    Ok(FidelityReport {
        fidelity: covariance_factor * mean_factor,
        covariance_factor,
        mean_factor,
    })
}

/// Eigen-structure of a 2×2 covariance block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes {
    pub min: f64,
    pub max: f64,
    /// Orientation of the minor axis in `[0, π)`; 0 for isotropic blocks.
    pub minor_angle: f64,
}

pub fn principal_axes(cov: &DMatrix<f64>) -> PrincipalAxes {
    let (a, b, c) = (cov[(0, 0)], cov[(1, 1)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]));
    let mid = 0.5 * (a + b);
    let rad = (0.5 * (a - b)).hypot(c);
    let minor_angle = if rad <= 1e-14 * mid.abs().max(1.0) {
        0.0
    } else {
        let major = 0.5 * (2.0 * c).atan2(a - b);
        (major + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI)
    };
    PrincipalAxes {
        min: mid - rad,
        max: mid + rad,
        minor_angle,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub min_variance_db: f64,
    pub max_variance_db: f64,
    pub principal_angle: f64,
}

/// Squeezing and anti-squeezing of a single mode relative to the vacuum.
pub fn squeezing_db(state: &GaussianState) -> Result<SqueezingReport> {
    require_single_mode(state)?;
    let axes = principal_axes(state.cov());
    Ok(SqueezingReport {
        min_variance_db: variance_db(axes.min),
        max_variance_db: variance_db(axes.max),
        principal_angle: axes.minor_angle,
    })
}

/// Rectangular phase-space grid; both axes include their end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(8.0, 0.05)
    }
}

impl GridSpec {
    pub fn square(half_width: f64, step: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            step,
        }
    }

    /// Smallest grid on the given step that covers each state's quadrature
    /// marginals to `n_sigma`.
    pub fn covering(states: &[&GaussianState], n_sigma: f64, step: f64) -> Self {
        let (mut x_min, mut x_max, mut p_min, mut p_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for s in states {
            let (mx, mp) = (s.mean()[0], s.mean()[1]);
            let (sx, sp) = (s.cov()[(0, 0)].sqrt(), s.cov()[(1, 1)].sqrt());
            x_min = x_min.min(mx - n_sigma * sx);
            x_max = x_max.max(mx + n_sigma * sx);
            p_min = p_min.min(mp - n_sigma * sp);
            p_max = p_max.max(mp + n_sigma * sp);
        }
        let snap_down = |v: f64| (v / step).floor() * step;
        let snap_up = |v: f64| (v / step).ceil() * step;
        Self {
            x_min: snap_down(x_min),
            x_max: snap_up(x_max),
            p_min: snap_down(p_min),
            p_max: snap_up(p_max),
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && self.step.is_finite()
            && self.x_max > self.x_min
            && self.p_max > self.p_min
            && [self.x_min, self.x_max, self.p_min, self.p_max]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidGrid(format!("{self:?}")));
        }
        if self.nx() * self.np() > 50_000_000 {
            return Err(Error::InvalidGrid("more than 5e7 points".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.step).round() as usize + 1
    }

    pub fn np(&self) -> usize {
        ((self.p_max - self.p_min) / self.step).round() as usize + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.step
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.step
    }

    /// True when every state's marginals fit inside the grid to `n_sigma`.
    pub fn covers(&self, state: &GaussianState, n_sigma: f64) -> bool {
        let (mx, mp) = (state.mean()[0], state.mean()[1]);
        let (sx, sp) = (state.cov()[(0, 0)].sqrt(), state.cov()[(1, 1)].sqrt());
        let slack = 1e-9;
        mx - n_sigma * sx >= self.x_min - slack
            && mx + n_sigma * sx <= self.x_max + slack
            && mp - n_sigma * sp >= self.p_min - slack
            && mp + n_sigma * sp <= self.p_max + slack
    }
}

/// Wigner function sampled on a grid. `values[j * nx + i]` holds
/// `W(x_i, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Riemann sum `Σ W·step²`.
    pub integral: f64,
    /// Set when the integral misses 1 by more than 1e−3.
    pub coverage_warning: bool,
}

impl WignerField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx() + i]
    }

    /// Numerical X-marginal `∫ W dp` at each grid column.
    pub fn x_marginal(&self) -> Vec<f64> {
        let (nx, np) = (self.grid.nx(), self.grid.np());
        (0..nx)
            .map(|i| (0..np).map(|j| self.at(i, j)).sum::<f64>() * self.grid.step)
            .collect()
    }
}

/// `W(z) = exp(−½(z−μ)ᵀV⁻¹(z−μ)) / (2π√det V)` on every grid point.
pub fn wigner(state: &GaussianState, grid: &GridSpec) -> Result<WignerField> {
    require_single_mode(state)?;
    grid.validate()?;
    let v = state.cov();
    let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
    let (ixx, ipp, ixp) = (v[(1, 1)] / det, v[(0, 0)] / det, -v[(0, 1)] / det);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let (mx, mp) = (state.mean()[0], state.mean()[1]);
    let (nx, np) = (grid.nx(), grid.np());
    let rows: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|j| {
            let dp = grid.p(j) - mp;
            (0..nx)
                .map(|i| {
                    let dx = grid.x(i) - mx;
                    let q = ixx * dx * dx + 2.0 * ixp * dx * dp + ipp * dp * dp;
                    norm * (-0.5 * q).exp()
                })
                .collect()
        })
        .collect();
    let integral = rows.iter().map(|r| r.iter().sum::<f64>()).sum::<f64>() * grid.step * grid.step;
    Ok(WignerField {
        grid: *grid,
        values: rows.into_iter().flatten().collect(),
        integral,
        coverage_warning: (integral - 1.0).abs() > NORMALIZATION_TOL,
    })
}

/// `10·log10` of `⟨Δ(X₁+X₂)²⟩` and `⟨Δ(P₁−P₂)²⟩` against the two-vacuum level 1.
pub fn epr_quality(state: &GaussianState) -> Result<(f64, f64)> {
    if state.n_modes() != 2 {
        return Err(Error::WrongModeCount {
            expected: 2,
            got: state.n_modes(),
        });
    }
    let c = state.cov();
    let sum = c[(0, 0)] + c[(2, 2)] + 2.0 * c[(0, 2)];
    let diff = c[(1, 1)] + c[(3, 3)] - 2.0 * c[(1, 3)];
    Ok((10.0 * sum.log10(), 10.0 * diff.log10()))
}
