//! Gaussian states of bosonic modes and the symplectic maps acting on them.
//!
//! Quadratures are ordered `(X₁, P₁, …, X_N, P_N)` with `[X, P] = i` and
//! ħ = 1, so the vacuum has variance 1/2 in every quadrature.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Vacuum variance of a single quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Largest mode count any state may carry.
pub const MAX_MODES: usize = 8;

const SYMMETRY_TOL: f64 = 1e-10;
const PHYSICAL_TOL: f64 = 1e-8;

/// Squeezing parameter `r` for which `e^{-2r} = 10^{-db/10}`.
pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

/// Linear power ratio for a dB value, `10^{-db/10}`.
pub fn db_to_noise(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Single-quadrature variance in dB relative to the shot noise level.
pub fn variance_db(variance: f64) -> f64 {
    10.0 * (variance / VACUUM_VARIANCE).log10()
}

/// Block-diagonal symplectic form Ω for `n` modes.
pub fn omega(n_modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn rotation_block(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Affine phase-space map `z ↦ M z + d` representing a Gaussian unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    matrix: DMatrix<f64>,
    displacement: DVector<f64>,
}

impl SymplecticTransform {
    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            displacement: DVector::zeros(2 * n_modes),
        }
    }

    /// Wraps a raw matrix and displacement. The symplectic condition is not
    /// enforced here; see [`SymplecticTransform::is_symplectic`].
    pub fn new(matrix: DMatrix<f64>, displacement: DVector<f64>) -> Result<Self> {
        let dim = displacement.len();
        if matrix.nrows() != dim || matrix.ncols() != dim || !dim.is_multiple_of(2) || dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        Ok(Self {
            matrix,
            displacement,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.displacement.len() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn displacement(&self) -> &DVector<f64> {
        &self.displacement
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            });
        }
        Ok(())
    }

    fn local(n_modes: usize, mode: usize, block: [[f64; 2]; 2]) -> Result<Self> {
        let mut t = Self::identity(n_modes);
        t.check_mode(mode)?;
        let k = 2 * mode;
        for (a, row) in block.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                t.matrix[(k + a, k + b)] = *v;
            }
        }
        Ok(t)
    }

    /// Single-mode squeezer: the quadrature at angle `phi` is scaled by
    /// `e^{-r}` and its conjugate by `e^{r}`.
    pub fn squeezer(n_modes: usize, mode: usize, r: f64, phi: f64) -> Result<Self> {
        let rot = rotation_block(phi);
        let (c, s) = (rot[0][0], rot[1][0]);
        let (a, b) = ((-r).exp(), r.exp());
        // Rot(phi) · diag(a, b) · Rot(-phi)
        let block = [
            [a * c * c + b * s * s, (a - b) * c * s],
            [(a - b) * c * s, a * s * s + b * c * c],
        ];
        Self::local(n_modes, mode, block)
    }

    /// Counterclockwise phase-space rotation of one mode.
    pub fn rotation(n_modes: usize, mode: usize, theta: f64) -> Result<Self> {
        Self::local(n_modes, mode, rotation_block(theta))
    }

    /// Beam splitter of reflectivity `r` mixing modes `i` and `j`.
    ///
    /// Port `i` receives `√R·a_i + √(1−R)·a_j` and port `j` receives
    /// `√(1−R)·a_i − √R·a_j`, identically for X and P.
    pub fn beamsplitter(n_modes: usize, i: usize, j: usize, reflectivity: f64) -> Result<Self> {
        let mut t = Self::identity(n_modes);
        t.check_mode(i)?;
        t.check_mode(j)?;
        if i == j {
            return Err(Error::SameMode(i));
        }
        if !(reflectivity > 0.0 && reflectivity < 1.0) {
            return Err(Error::Reflectivity(reflectivity));
        }
        let (r, s) = (reflectivity.sqrt(), (1.0 - reflectivity).sqrt());
        for q in 0..2 {
            let (a, b) = (2 * i + q, 2 * j + q);
            t.matrix[(a, a)] = r;
            t.matrix[(a, b)] = s;
            t.matrix[(b, a)] = s;
            t.matrix[(b, b)] = -r;
        }
        Ok(t)
    }

    pub fn displacement_op(n_modes: usize, mode: usize, dx: f64, dp: f64) -> Result<Self> {
        let mut t = Self::identity(n_modes);
        t.check_mode(mode)?;
        t.displacement[2 * mode] = dx;
        t.displacement[2 * mode + 1] = dp;
        Ok(t)
    }

    /// The map that applies `self` first and then `next`.
    pub fn then(&self, next: &SymplecticTransform) -> Result<Self> {
        if self.n_modes() != next.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                got: next.n_modes(),
            });
        }
        Ok(Self {
            matrix: &next.matrix * &self.matrix,
            displacement: &next.matrix * &self.displacement + &next.displacement,
        })
    }

    /// Checks `M Ω Mᵀ = Ω` entrywise within `tol`.
    pub fn is_symplectic(&self, tol: f64) -> bool {
        let w = omega(self.n_modes());
        let lhs = &self.matrix * &w * self.matrix.transpose();
        (lhs - w).amax() <= tol
    }
}

/// Mean vector and covariance matrix of an N-mode Gaussian state.
///
/// States are immutable values; every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_MODES {
            return Err(Error::InvalidModeCount(n_modes));
        }
        let dim = 2 * n_modes;
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * VACUUM_VARIANCE,
        })
    }

    /// Single-mode thermal state with mean photon number `nbar`.
    pub fn thermal(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::NonFinite("nbar"));
        }
        Ok(Self {
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2) * (VACUUM_VARIANCE + nbar),
        })
    }

    /// Builds a state from raw moments, rejecting asymmetric or unphysical
    /// covariances.
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) || dim / 2 > MAX_MODES {
            return Err(Error::InvalidModeCount(dim / 2));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state moments"));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * cov.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let mut cov = cov;
        symmetrize(&mut cov);
        let state = Self { mean, cov };
        let nu = state.min_symplectic_eigenvalue();
        if nu < VACUUM_VARIANCE - PHYSICAL_TOL {
            return Err(Error::Unphysical(nu));
        }
        Ok(state)
    }

    /// Two-mode state with `⟨Δ(X₁+X₂)²⟩ = ⟨Δ(P₁−P₂)²⟩ = 10^{-db/10}`, built
    /// from an X-squeezed and a P-squeezed vacuum on a 50/50 beam splitter.
    pub fn epr_pair(entanglement_db: f64) -> Result<Self> {
        if entanglement_db < 0.0 || entanglement_db.is_nan() {
            return Err(Error::NegativeEntanglement(entanglement_db));
        }
        if !entanglement_db.is_finite() {
            return Err(Error::NonFinite("entanglement_db"));
        }
        let r = db_to_r(entanglement_db);
        Self::vacuum(2)?
            .squeeze(0, r, 0.0)?
            .squeeze(1, r, std::f64::consts::FRAC_PI_2)?
            .beamsplitter(0, 1, 0.5)
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            });
        }
        Ok(())
    }

    /// Applies an affine symplectic map: `μ ↦ Mμ + d`, `V ↦ M V Mᵀ`.
    pub fn apply(&self, t: &SymplecticTransform) -> Result<Self> {
        if t.n_modes() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                got: t.n_modes(),
            });
        }
        let mean = &t.matrix * &self.mean + &t.displacement;
        let mut cov = &t.matrix * &self.cov * t.matrix.transpose();
        symmetrize(&mut cov);
        Ok(Self { mean, cov })
    }

    pub fn squeeze(&self, mode: usize, r: f64, phi: f64) -> Result<Self> {
        self.apply(&SymplecticTransform::squeezer(
            self.n_modes(),
            mode,
            r,
            phi,
        )?)
    }

    pub fn beamsplitter(&self, i: usize, j: usize, reflectivity: f64) -> Result<Self> {
        self.apply(&SymplecticTransform::beamsplitter(
            self.n_modes(),
            i,
            j,
            reflectivity,
        )?)
    }

    pub fn rotate(&self, mode: usize, theta: f64) -> Result<Self> {
        self.apply(&SymplecticTransform::rotation(self.n_modes(), mode, theta)?)
    }

    pub fn displace(&self, mode: usize, dx: f64, dp: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let mut mean = self.mean.clone();
        mean[2 * mode] += dx;
        mean[2 * mode + 1] += dp;
        Ok(Self {
            mean,
            cov: self.cov.clone(),
        })
    }

    /// Pure-loss channel of transmission `eta` on one mode.
    pub fn loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Transmission(eta));
        }
        let t = eta.sqrt();
        let k = 2 * mode;
        let mut mean = self.mean.clone();
        let mut cov = self.cov.clone();
        for q in k..k + 2 {
            mean[q] *= t;
            for c in 0..cov.ncols() {
                cov[(q, c)] *= t;
            }
            for r in 0..cov.nrows() {
                cov[(r, q)] *= t;
            }
            cov[(q, q)] += (1.0 - eta) * VACUUM_VARIANCE;
        }
        symmetrize(&mut cov);
        Ok(Self { mean, cov })
    }

    /// Product state `self ⊗ other`, with `other`'s modes appended.
    pub fn tensor(&self, other: &GaussianState) -> Result<Self> {
        let n = self.n_modes() + other.n_modes();
        if n > MAX_MODES {
            return Err(Error::InvalidModeCount(n));
        }
        let (a, b) = (self.mean.len(), other.mean.len());
        let mut mean = DVector::zeros(a + b);
        mean.rows_mut(0, a).copy_from(&self.mean);
        mean.rows_mut(a, b).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(a + b, a + b);
        cov.view_mut((0, 0), (a, a)).copy_from(&self.cov);
        cov.view_mut((a, a), (b, b)).copy_from(&other.cov);
        Ok(Self { mean, cov })
    }

    /// Reduced state of the listed modes, in the order given.
    pub fn reduce(&self, modes: &[usize]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidModeCount(0));
        }
        let mut idx = Vec::with_capacity(2 * modes.len());
        for &m in modes {
            self.check_mode(m)?;
            idx.push(2 * m);
            idx.push(2 * m + 1);
        }
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]);
        Ok(Self { mean, cov })
    }

    /// Mean and variance of `X cos θ + P sin θ` on one mode.
    pub fn quadrature_moments(&self, mode: usize, theta: f64) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        let k = 2 * mode;
        let (s, c) = theta.sin_cos();
        let mu = c * self.mean[k] + s * self.mean[k + 1];
        let var = c * c * self.cov[(k, k)]
            + s * s * self.cov[(k + 1, k + 1)]
            + 2.0 * s * c * self.cov[(k, k + 1)];
        Ok((mu, var))
    }

    /// Symplectic eigenvalues in ascending order (one per mode).
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let n = self.n_modes();
        if n == 1 {
            let d = self.cov[(0, 0)] * self.cov[(1, 1)] - self.cov[(0, 1)] * self.cov[(1, 0)];
            return vec![d.max(0.0).sqrt()];
        }
        // ν² are the eigenvalues of V^{1/2} Ωᵀ V Ω V^{1/2}, each twice.
        let eig = SymmetricEigen::new(self.cov.clone());
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return vec![0.0; n];
        }
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let half = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
        let w = omega(n);
        let mut m = &half * w.transpose() * &self.cov * &w * &half;
        symmetrize(&mut m);
        let mut nu2: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        nu2.sort_by(f64::total_cmp);
        nu2.chunks(2)
            .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
            .collect()
    }

    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        self.symplectic_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Uncertainty principle check with tolerance 1e−8.
    pub fn is_physical(&self) -> bool {
        self.min_symplectic_eigenvalue() >= VACUUM_VARIANCE - PHYSICAL_TOL
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.symplectic_eigenvalues()
            .iter()
            .all(|nu| (nu - VACUUM_VARIANCE).abs() <= tol)
    }

    /// Largest asymmetry `|V − Vᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.cov - self.cov.transpose()).amax()
    }

    pub(crate) fn from_raw(mean: DVector<f64>, mut cov: DMatrix<f64>) -> Self {
        symmetrize(&mut cov);
        Self { mean, cov }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.mean().as_slice(), &[0.0, 0.0]);
        assert_eq!(v.cov()[(0, 0)], 0.5);
        assert_eq!(v.cov()[(1, 1)], 0.5);
        assert_eq!(v.cov()[(0, 1)], 0.0);

        let v3 = GaussianState::vacuum(3).unwrap();
        assert_eq!(v3.mean().len(), 6);
        assert_eq!(v3.cov().shape(), (6, 6));
        assert_eq!(GaussianState::vacuum(0), Err(Error::InvalidModeCount(0)));
    }

    #[test]
    fn ten_db_squeeze() {
        let r = db_to_r(10.0);
        assert_abs_diff_eq!((-2.0 * r).exp(), 0.1, epsilon = 1e-15);
        let s = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, r, 0.0)
            .unwrap();
        assert_abs_diff_eq!(s.cov()[(0, 0)], 0.05, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cov()[(1, 1)], 5.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s.cov()[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn source_squeezer_variance() {
        let s = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, db_to_r(13.8), 0.0)
            .unwrap();
        assert_abs_diff_eq!(s.cov()[(0, 0)], 0.5 * 10f64.powf(-1.38), epsilon = 1e-15);
        assert_abs_diff_eq!(s.cov()[(0, 0)], 0.020844, epsilon = 1e-6);
    }

    #[test]
    fn zero_squeeze_is_identity() {
        let st = GaussianState::vacuum(2)
            .unwrap()
            .displace(1, 0.3, -1.2)
            .unwrap()
            .squeeze(0, 0.4, 0.3)
            .unwrap();
        let same = st.squeeze(1, 0.0, 1.1).unwrap();
        assert_abs_diff_eq!((same.cov() - st.cov()).amax(), 0.0, epsilon = 1e-15);
        assert_eq!(same.mean(), st.mean());
    }

    #[test]
    fn squeezer_at_angle_squeezes_that_quadrature() {
        let phi = 0.6;
        let s = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, 0.5, phi)
            .unwrap();
        let (_, v) = s.quadrature_moments(0, phi).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (-1.0f64).exp(), epsilon = 1e-14);
        let (_, w) = s.quadrature_moments(0, phi + FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(w, 0.5 * 1.0f64.exp(), epsilon = 1e-13);
    }

    #[test]
    fn beamsplitter_vacuum_invariance() {
        for r in [0.5, 0.99, 0.1] {
            let out = GaussianState::vacuum(2)
                .unwrap()
                .beamsplitter(0, 1, r)
                .unwrap();
            assert_abs_diff_eq!(
                (out.cov() - DMatrix::identity(4, 4) * 0.5).amax(),
                0.0,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn beamsplitter_splits_displacement() {
        let d = 1.7;
        let out = GaussianState::vacuum(2)
            .unwrap()
            .displace(0, d, 0.0)
            .unwrap()
            .beamsplitter(0, 1, 0.5)
            .unwrap();
        // brute-force 2x2 multiply: [[√R, √(1−R)], [√(1−R), −√R]] · (d, 0)
        let h = 0.5f64.sqrt();
        let expect = [h * d + h * 0.0, h * d - h * 0.0];
        assert_abs_diff_eq!(out.mean()[0], expect[0], epsilon = 1e-15);
        assert_abs_diff_eq!(out.mean()[2], expect[1], epsilon = 1e-15);
        assert_abs_diff_eq!(out.mean()[1], 0.0);
        assert_abs_diff_eq!(out.mean()[3], 0.0);
    }

    #[test]
    fn beamsplitter_rejects_bad_input() {
        let v = GaussianState::vacuum(2).unwrap();
        assert_eq!(v.beamsplitter(0, 1, 0.0), Err(Error::Reflectivity(0.0)));
        assert_eq!(v.beamsplitter(0, 1, 1.0), Err(Error::Reflectivity(1.0)));
        assert_eq!(v.beamsplitter(1, 1, 0.5), Err(Error::SameMode(1)));
        assert!(matches!(
            v.beamsplitter(0, 2, 0.5),
            Err(Error::ModeOutOfRange { mode: 2, .. })
        ));
    }

    #[test]
    fn rotation_examples() {
        let d = 2.0;
        let st = GaussianState::vacuum(1)
            .unwrap()
            .displace(0, 0.0, d)
            .unwrap();
        let f = st.rotate(0, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(f.mean()[0], -d, epsilon = 1e-15);
        assert_abs_diff_eq!(f.mean()[1], 0.0, epsilon = 1e-15);

        let sq = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, db_to_r(10.0), 0.0)
            .unwrap()
            .displace(0, 0.4, 0.9)
            .unwrap();
        let full = sq.rotate(0, 2.0 * PI).unwrap();
        assert_abs_diff_eq!((full.cov() - sq.cov()).amax(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((full.mean() - sq.mean()).amax(), 0.0, epsilon = 1e-12);

        let ex = sq.rotate(0, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(ex.cov()[(0, 0)], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ex.cov()[(1, 1)], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn displacement_examples() {
        let v = GaussianState::vacuum(1).unwrap();
        let c = v.displace(0, 2.1213, 0.0).unwrap();
        assert_eq!(c.cov(), v.cov());
        let back = c.displace(0, -2.1213, 0.0).unwrap();
        assert_eq!(back, v);

        let p = v.displace(0, 0.0, 4.5f64.sqrt()).unwrap();
        let power = p.cov()[(1, 1)] + p.mean()[1].powi(2);
        assert_abs_diff_eq!(power, 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(variance_db(power), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_examples() {
        let sq = GaussianState::vacuum(2)
            .unwrap()
            .squeeze(0, 0.8, 0.0)
            .unwrap()
            .displace(0, 1.0, 2.0)
            .unwrap()
            .beamsplitter(0, 1, 0.3)
            .unwrap();
        assert_eq!(sq.loss(0, 1.0).unwrap(), sq);
        let dead = sq.loss(0, 0.0).unwrap().reduce(&[0]).unwrap();
        assert_eq!(dead, GaussianState::vacuum(1).unwrap());
        assert_eq!(sq.loss(0, 1.5), Err(Error::Transmission(1.5)));

        // η·10^{-1.38} + (1−η) = 10^{-1.2}
        let eta = (1.0 - 10f64.powf(-1.2)) / (1.0 - 10f64.powf(-1.38));
        assert_abs_diff_eq!(eta, 0.9776, epsilon = 1e-4);
        let src = GaussianState::vacuum(1)
            .unwrap()
            .squeeze(0, db_to_r(13.8), 0.0)
            .unwrap()
            .loss(0, eta)
            .unwrap();
        assert_abs_diff_eq!(src.cov()[(0, 0)], 0.5 * 10f64.powf(-1.2), epsilon = 1e-14);
        assert_abs_diff_eq!(src.cov()[(0, 0)], 0.031548, epsilon = 1e-6);
    }

    #[test]
    fn epr_pair_condition() {
        let twelve = 10f64.powf(-1.2);
        let e = GaussianState::epr_pair(12.0).unwrap();
        let c = e.cov();
        let sum = c[(0, 0)] + c[(2, 2)] + 2.0 * c[(0, 2)];
        let diff = c[(1, 1)] + c[(3, 3)] - 2.0 * c[(1, 3)];
        assert_abs_diff_eq!(sum, twelve, epsilon = 1e-12);
        assert_abs_diff_eq!(diff, twelve, epsilon = 1e-12);
        assert_abs_diff_eq!(sum, 0.063096, epsilon = 1e-6);

        let r = db_to_r(12.0);
        assert_abs_diff_eq!(c[(0, 0)], (2.0 * r).cosh() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[(0, 0)], 3.978, epsilon = 1e-3);
        assert_abs_diff_eq!(c[(0, 2)], -(2.0 * r).sinh() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[(1, 3)], (2.0 * r).sinh() / 2.0, epsilon = 1e-12);

        let zero = GaussianState::epr_pair(0.0).unwrap();
        let vac = GaussianState::vacuum(2).unwrap();
        assert_abs_diff_eq!((zero.cov() - vac.cov()).amax(), 0.0, epsilon = 1e-15);
        assert_eq!(
            GaussianState::epr_pair(-1.0),
            Err(Error::NegativeEntanglement(-1.0))
        );
    }

    #[test]
    fn symplectic_eigenvalues_of_known_states() {
        let e = GaussianState::epr_pair(12.0).unwrap();
        for nu in e.symplectic_eigenvalues() {
            assert_abs_diff_eq!(nu, 0.5, epsilon = 1e-9);
        }
        // a single arm of an EPR pair is thermal with ν = cosh(2r)/2
        let arm = e.reduce(&[1]).unwrap();
        assert_abs_diff_eq!(
            arm.symplectic_eigenvalues()[0],
            (2.0 * db_to_r(12.0)).cosh() / 2.0,
            epsilon = 1e-12
        );
        let th = GaussianState::thermal(1.0)
            .unwrap()
            .tensor(&GaussianState::vacuum(1).unwrap())
            .unwrap()
            .beamsplitter(0, 1, 0.3)
            .unwrap();
        let nus = th.symplectic_eigenvalues();
        assert_abs_diff_eq!(nus[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(nus[1], 1.5, epsilon = 1e-9);
    }

    #[test]
    fn from_parts_rejects_unphysical() {
        let mean = DVector::zeros(2);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.5]));
        assert!(matches!(
            GaussianState::from_parts(mean.clone(), cov),
            Err(Error::Unphysical(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(matches!(
            GaussianState::from_parts(mean, asym),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn transform_composition() {
        let n = 2;
        let a = SymplecticTransform::squeezer(n, 0, 0.3, 0.2).unwrap();
        let b = SymplecticTransform::beamsplitter(n, 0, 1, 0.27).unwrap();
        let c = SymplecticTransform::displacement_op(n, 1, 0.5, -0.25).unwrap();
        let abc = a.then(&b).unwrap().then(&c).unwrap();
        assert!(abc.is_symplectic(1e-10));
        let st = GaussianState::vacuum(2)
            .unwrap()
            .displace(0, 1.0, 0.0)
            .unwrap();
        let seq = st.apply(&a).unwrap().apply(&b).unwrap().apply(&c).unwrap();
        let once = st.apply(&abc).unwrap();
        assert_abs_diff_eq!((seq.cov() - once.cov()).amax(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!((seq.mean() - once.mean()).amax(), 0.0, epsilon = 1e-10);
    }
}
