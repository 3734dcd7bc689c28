//! Moment-method reconstruction of a single-mode Gaussian state from
//! homodyne records taken at several LO phases.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, VACUUM_VARIANCE};
use crate::measurement::normalize_phase;
use crate::metrics::principal_axes;
use crate::protocol::GateConfig;

/// Fewest shots accepted at any one phase.
pub const MIN_SHOTS_PER_PHASE: usize = 100;

/// Points on each covariance ellipse.
pub const ELLIPSE_POINTS: usize = 256;

const CSV_HEADER: &str = "shot_index,lo_phase_rad,value";

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneShot {
    pub lo_phase: f64,
    pub value: f64,
}

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default)]
    pub config: Option<GateConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub input_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub input_cov: Option<Vec<f64>>,
    #[serde(default)]
    pub label: Option<String>,
}

/// Per-shot output homodyne records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneDataset {
    pub shots: Vec<HomodyneShot>,
    pub provenance: Provenance,
}

impl HomodyneDataset {
    /// Normalizes every phase to `[0, π)`, flipping readings as needed.
    pub fn new(shots: Vec<HomodyneShot>, provenance: Provenance) -> Self {
        let shots = shots
            .into_iter()
            .map(|s| {
                let (lo_phase, sign) = normalize_phase(s.lo_phase);
                HomodyneShot {
                    lo_phase,
                    value: sign * s.value,
                }
            })
            .collect();
        Self { shots, provenance }
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// Writes `shot_index,lo_phase_rad,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for (i, s) in self.shots.iter().enumerate() {
            writeln!(w, "{},{:.16e},{:.16e}", i, s.lo_phase, s.value)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, provenance: Provenance) -> io::Result<Self> {
        let bad = |line: usize, msg: &str| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
        };
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some(CSV_HEADER) {
            return Err(bad(1, "missing header"));
        }
        let mut shots = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(k + 2, "expected 3 columns"));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(k + 2, &e.to_string()))
            };
            shots.push(HomodyneShot {
                lo_phase: parse(cols[1])?,
                value: parse(cols[2])?,
            });
        }
        Ok(Self::new(shots, provenance))
    }

    /// JSON sidecar path for a dataset CSV: same stem, `.json` extension.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes the CSV and its provenance sidecar.
    pub fn save(&self, csv: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(csv)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let json = serde_json::to_string_pretty(&self.provenance)?;
        std::fs::write(Self::sidecar_path(csv), json + "\n")
    }

    pub fn load(csv: &Path) -> io::Result<Self> {
        let sidecar = Self::sidecar_path(csv);
        let provenance = if sidecar.exists() {
            serde_json::from_str(&std::fs::read_to_string(sidecar)?)?
        } else {
            Provenance::default()
        };
        let f = io::BufReader::new(std::fs::File::open(csv)?);
        Self::read_csv(f, provenance)
    }
}

/// Sample moments at one LO phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMoments {
    pub phase: f64,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_stderr: f64,
    pub variance_stderr: f64,
}

/// Standard errors of the reconstructed covariance entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovStderr {
    pub xx: f64,
    pub pp: f64,
    pub xp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub state: GaussianState,
    pub mean_stderr: [f64; 2],
    pub cov_stderr: CovStderr,
    pub phases: Vec<PhaseMoments>,
    /// Set when a marginal uncertainty violation was clamped to ν = 1/2.
    pub clamped: bool,
}

fn phase_moments(phase: f64, values: &[f64]) -> PhaseMoments {
    let n = values.len() as f64;
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add(v));
    let mean = s.total() / n;
    let mut q = CompensatedSum::default();
    values.iter().for_each(|&v| q.add((v - mean) * (v - mean)));
    let variance = q.total() / (n - 1.0);
    PhaseMoments {
        phase,
        count: values.len(),
        mean,
        variance,
        mean_stderr: (variance / n).sqrt(),
        variance_stderr: variance * (2.0 / n).sqrt(),
    }
}

// Weighted least squares; returns estimates and their covariance.
fn weighted_lsq(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let k = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(weights));
    let y = DVector::from_column_slice(targets);
    let normal = a.transpose() * &w * &a;
    let inv = normal
        .try_inverse()
        .expect("distinct phases give a full-rank design");
    let est = &inv * a.transpose() * &w * y;
    (est, inv)
}

/// Reconstructs mean and covariance from per-phase sample moments.
pub fn reconstruct(dataset: &HomodyneDataset) -> Result<Reconstruction> {
    let mut groups: BTreeMap<i64, (f64, Vec<f64>)> = BTreeMap::new();
    for s in &dataset.shots {
        if !s.value.is_finite() || !s.lo_phase.is_finite() {
            return Err(Error::NonFinite("dataset shot"));
        }
        let (phase, sign) = normalize_phase(s.lo_phase);
        let key = (phase * 1e9).round() as i64;
        groups
            .entry(key)
            .or_insert_with(|| (phase, Vec::new()))
            .1
            .push(sign * s.value);
    }
    if groups.len() < 3 {
        return Err(Error::InsufficientPhases(groups.len()));
    }
    let mut phases = Vec::with_capacity(groups.len());
    for (phase, values) in groups.values() {
        if values.len() < MIN_SHOTS_PER_PHASE {
            return Err(Error::TooFewShots {
                phase: *phase,
                count: values.len(),
                min: MIN_SHOTS_PER_PHASE,
            });
        }
        phases.push(phase_moments(*phase, values));
    }

    let mut mean_rows = Vec::new();
    let mut cov_rows = Vec::new();
    for m in &phases {
        let (s, c) = m.phase.sin_cos();
        mean_rows.push(vec![c, s]);
        cov_rows.push(vec![c * c, s * s, 2.0 * s * c]);
    }
    let (mu, mu_cov) = weighted_lsq(
        &mean_rows,
        &phases.iter().map(|m| m.mean).collect::<Vec<_>>(),
        &phases
            .iter()
            .map(|m| m.mean_stderr.powi(-2))
            .collect::<Vec<_>>(),
    );
    let (v, v_cov) = weighted_lsq(
        &cov_rows,
        &phases.iter().map(|m| m.variance).collect::<Vec<_>>(),
        &phases
            .iter()
            .map(|m| m.variance_stderr.powi(-2))
            .collect::<Vec<_>>(),
    );
    let (a, b, c) = (v[0], v[1], v[2]);
    let cov_stderr = CovStderr {
        xx: v_cov[(0, 0)].sqrt(),
        pp: v_cov[(1, 1)].sqrt(),
        xp: v_cov[(2, 2)].sqrt(),
    };

    let (cov, clamped) = project_physical(a, b, c, &v_cov)?;
    Ok(Reconstruction {
        state: GaussianState::from_raw(DVector::from_vec(vec![mu[0], mu[1]]), cov),
        mean_stderr: [mu_cov[(0, 0)].sqrt(), mu_cov[(1, 1)].sqrt()],
        cov_stderr,
        phases,
        clamped,
    })
}

// Clamps ν to 1/2 when the violation is within 3 standard errors of det V.
// `v_cov` is the covariance of the `(V_XX, V_PP, V_XP)` estimates.
fn project_physical(a: f64, b: f64, c: f64, v_cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let det = a * b - c * c;
    let nu = det.max(0.0).sqrt();
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::UnphysicalReconstruction {
            nu,
            sigmas: f64::INFINITY,
        });
    }
    let floor = VACUUM_VARIANCE * VACUUM_VARIANCE;
    let cov = DMatrix::from_row_slice(2, 2, &[a, c, c, b]);
    if det >= floor {
        return Ok((cov, false));
    }
    // Tested on det V = ν², whose error stays finite as det → 0.
    let g = DVector::from_vec(vec![b, a, -2.0 * c]);
    let se_det = (g.transpose() * v_cov * &g)[(0, 0)].sqrt();
    let sigmas = (floor - det) / se_det;
    if !(sigmas < 3.0) {
        return Err(Error::UnphysicalReconstruction { nu, sigmas });
    }
    let projected = if det > 0.0 {
        // one mode: V = ν·M with det M = 1, so rescaling sets ν to 1/2
        cov * (VACUUM_VARIANCE / nu)
    } else if a * b >= floor {
        let shrunk = (a * b - floor).sqrt().copysign(c);
        DMatrix::from_row_slice(2, 2, &[a, shrunk, shrunk, b])
    } else {
        DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]) * (VACUUM_VARIANCE / (a * b).sqrt())
    };
    Ok((projected, true))
}

/// Covariance ellipse `(z−μ)ᵀV⁻¹(z−μ) = n_sigma²`, sampled at 256 points.
pub fn ellipse(state: &GaussianState, n_sigma: f64) -> Result<Vec<[f64; 2]>> {
    if state.n_modes() != 1 {
        return Err(Error::WrongModeCount {
            expected: 1,
            got: state.n_modes(),
        });
    }
    if !(n_sigma > 0.0 && n_sigma.is_finite()) {
        return Err(Error::NonFinite("n_sigma"));
    }
    let axes = principal_axes(state.cov());
    let (minor, major) = (axes.min.sqrt() * n_sigma, axes.max.sqrt() * n_sigma);
    let (su, cu) = axes.minor_angle.sin_cos();
    let (mx, mp) = (state.mean()[0], state.mean()[1]);
    Ok((0..ELLIPSE_POINTS)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / ELLIPSE_POINTS as f64;
            let (a, b) = (minor * t.cos(), major * t.sin());
            // minor axis along (cos u, sin u), major along (−sin u, cos u)
            [mx + a * cu - b * su, mp + a * su + b * cu]
        })
        .collect())
}
