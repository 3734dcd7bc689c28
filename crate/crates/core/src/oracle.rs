//! Brute-force checks on the closed-form metrics.
//!
//! For a pure state ψ, `⟨ψ|ρ|ψ⟩ = 2π ∬ W_ψ W_ρ dx dp`. The integral is
//! evaluated on a grid with its own Gaussian density code, so it shares
//! nothing with [`crate::metrics::fidelity`] beyond the state moments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{db_to_r, GaussianState};
use crate::metrics::{fidelity, GridSpec};
use crate::protocol::{run_gate_analytic, Axis, GateConfig};

/// Agreement tolerance between closed form and grid integral.
pub const ORACLE_TOLERANCE: f64 = 1e-4;

/// Coverage required of an oracle grid, in standard deviations.
pub const COVERAGE_SIGMA: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub closed_form: f64,
    pub brute_force: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleVerdict {
    pub fn new(closed_form: f64, brute_force: f64, tolerance: f64) -> Self {
        let abs_diff = (closed_form - brute_force).abs();
        Self {
            closed_form,
            brute_force,
            abs_diff,
            tolerance,
            pass: abs_diff <= tolerance,
        }
    }
}

/// Precomputed Gaussian phase-space density.
struct Density {
    mx: f64,
    mp: f64,
    ixx: f64,
    ipp: f64,
    ixp: f64,
    norm: f64,
}

impl Density {
    fn of(state: &GaussianState) -> Self {
        let v = state.cov();
        let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(0, 1)];
        Self {
            mx: state.mean()[0],
            mp: state.mean()[1],
            ixx: v[(1, 1)] / det,
            ipp: v[(0, 0)] / det,
            ixp: -v[(0, 1)] / det,
            norm: 1.0 / (std::f64::consts::TAU * det.sqrt()),
        }
    }

    fn at(&self, x: f64, p: f64) -> f64 {
        let (dx, dp) = (x - self.mx, p - self.mp);
        let q = self.ixx * dx * dx + 2.0 * self.ixp * dx * dp + self.ipp * dp * dp;
        self.norm * (-0.5 * q).exp()
    }
}

fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// `2π ∬ W_a W_b` on `grid`, without any coverage check.
pub fn wigner_overlap(a: &GaussianState, b: &GaussianState, grid: &GridSpec) -> Result<f64> {
    for s in [a, b] {
        if s.n_modes() != 1 {
            return Err(Error::WrongModeCount {
                expected: 1,
                got: s.n_modes(),
            });
        }
    }
    grid.validate()?;
    let (wa, wb) = (Density::of(a), Density::of(b));
    let (nx, np) = (grid.nx(), grid.np());
    let rows: Vec<f64> = (0..np)
        .into_par_iter()
        .map(|j| {
            let p = grid.p(j);
            let row: Vec<f64> = (0..nx)
                .map(|i| {
                    let x = grid.x(i);
                    wa.at(x, p) * wb.at(x, p)
                })
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    Ok(std::f64::consts::TAU * pairwise_sum(&rows) * grid.step * grid.step)
}

/// Compares [`fidelity`] with the grid overlap integral.
pub fn wigner_overlap_fidelity(
    pure: &GaussianState,
    actual: &GaussianState,
    grid: &GridSpec,
) -> Result<OracleVerdict> {
    let closed = fidelity(pure, actual)?.fidelity;
    for s in [pure, actual] {
        if !grid.covers(s, COVERAGE_SIGMA) {
            return Err(Error::CoverageViolation {
                required: COVERAGE_SIGMA,
            });
        }
    }
    let brute = wigner_overlap(pure, actual, grid)?;
    Ok(OracleVerdict::new(closed, brute, ORACLE_TOLERANCE))
}

/// Same as [`wigner_overlap_fidelity`] on a grid sized to cover both states.
pub fn wigner_overlap_fidelity_auto(
    pure: &GaussianState,
    actual: &GaussianState,
    step: f64,
) -> Result<OracleVerdict> {
    let grid = GridSpec::covering(&[pure, actual], COVERAGE_SIGMA + 0.5, step);
    wigner_overlap_fidelity(pure, actual, &grid)
}

/// Overlap of two vacua squeezed along the same axis by `r1` and `r2`:
/// `1/cosh(r2 − r1)`.
pub fn squeezed_vacuum_overlap(r1: f64, r2: f64) -> f64 {
    1.0 / (r2 - r1).cosh()
}

/// Checks both the closed form and the grid integral against the analytic
/// squeezed-vacuum overlap.
pub fn squeezed_vacuum_check(
    r1: f64,
    r2: f64,
    step: f64,
) -> Result<(OracleVerdict, OracleVerdict)> {
    let a = GaussianState::vacuum(1)?.squeeze(0, r1, 0.0)?;
    let b = GaussianState::vacuum(1)?.squeeze(0, r2, 0.0)?;
    let analytic = squeezed_vacuum_overlap(r1, r2);
    let closed = fidelity(&a, &b)?.fidelity;
    let grid = GridSpec::covering(&[&a, &b], COVERAGE_SIGMA + 0.5, step);
    let brute = wigner_overlap(&a, &b, &grid)?;
    Ok((
        OracleVerdict::new(analytic, closed, ORACLE_TOLERANCE),
        OracleVerdict::new(analytic, brute, ORACLE_TOLERANCE),
    ))
}

/// Unity-gain teleportation (R = 1/2) of the vacuum with an EPR source of
/// `epr_db`. With no entanglement the closed form is exactly 1/2.
pub fn classical_bound_check(epr_db: f64) -> Result<OracleVerdict> {
    let res = run_gate_analytic(&GateConfig::new(0.5, epr_db), &GaussianState::vacuum(1)?)?;
    wigner_overlap_fidelity_auto(&res.target, &res.output, 0.05)
}

/// The vacuum-input gate at `target_db` of amplitude squeezing.
pub fn gate_check(target_db: f64, epr_db: f64) -> Result<OracleVerdict> {
    let cfg = GateConfig::for_target(target_db, Axis::Amplitude, epr_db)?;
    let res = run_gate_analytic(&cfg, &GaussianState::vacuum(1)?)?;
    wigner_overlap_fidelity_auto(&res.target, &res.output, 0.05)
}

/// A random pure target and a random mixed state near it: squeezing up to
/// `max_db`, displacement up to `max_disp`, random orientation, thermal
/// noise up to half a photon on the mixed state.
pub fn random_pair<R: Rng>(
    rng: &mut R,
    max_db: f64,
    max_disp: f64,
) -> Result<(GaussianState, GaussianState)> {
    let draw = |rng: &mut R, thermal: bool| -> Result<GaussianState> {
        let base = if thermal {
            GaussianState::thermal(rng.random_range(0.0..0.5))?
        } else {
            GaussianState::vacuum(1)?
        };
        let r = db_to_r(rng.random_range(0.0..max_db));
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let radius = rng.random_range(0.0..max_disp);
        let dir = rng.random_range(0.0..std::f64::consts::TAU);
        base.squeeze(0, r, angle)?
            .displace(0, radius * dir.cos(), radius * dir.sin())
    };
    let pure = draw(rng, false)?;
    let mixed = draw(rng, true)?;
    Ok((pure, mixed))
}

/// Named verdict for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct NamedVerdict {
    pub name: String,
    #[serde(flatten)]
    pub verdict: OracleVerdict,
}

/// Full validation suite: headline gates, squeezed-vacuum overlap, the
/// classical bound, randomized pairs and a grid-refinement check.
pub fn run_suite(seed: u64, random_pairs: usize) -> Result<Vec<NamedVerdict>> {
    let mut out = Vec::new();
    let mut push = |name: String, verdict: OracleVerdict| out.push(NamedVerdict { name, verdict });

    for t in [4.1, 7.2, 10.0] {
        push(format!("gate_{t}db_epr12"), gate_check(t, 12.0)?);
    }
    let (closed, brute) = squeezed_vacuum_check(0.0, db_to_r(10.0), 0.05)?;
    push("squeezed_vacuum_closed_form".into(), closed);
    push("squeezed_vacuum_grid".into(), brute);

    let classical = classical_bound_check(0.0)?;
    push(
        "classical_bound_exact".into(),
        OracleVerdict::new(0.5, classical.closed_form, 1e-12),
    );
    push("classical_bound_grid".into(), classical);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..random_pairs {
        let (pure, mixed) = random_pair(&mut rng, 12.0, 3.0)?;
        push(
            format!("random_pair_{k}"),
            wigner_overlap_fidelity_auto(&pure, &mixed, 0.05)?,
        );
    }

    let cfg = GateConfig::for_target(10.0, Axis::Amplitude, 12.0)?;
    let res = run_gate_analytic(&cfg, &GaussianState::vacuum(1)?)?;
    let grid = GridSpec::covering(&[&res.target, &res.output], COVERAGE_SIGMA + 0.5, 0.05);
    let fine = GridSpec {
        step: 0.025,
        ..grid
    };
    push(
        "grid_refinement".into(),
        OracleVerdict::new(
            wigner_overlap(&res.target, &res.output, &grid)?,
            wigner_overlap(&res.target, &res.output, &fine)?,
            1e-5,
        ),
    );
    Ok(out)
}
