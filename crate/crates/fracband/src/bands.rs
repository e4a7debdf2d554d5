//! Dispersions E_n(k) over the Brillouin zone and the quantities derived from
//! them: effective mass, inversion classification, band gaps, and gap
//! directness.

use crate::error::{Error, Result};
use crate::lattice::BlochMomentum;
use crate::solver::{imaginary_time_solve, BlochState, ProblemSpec, SolverSettings};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The (q, V0, L, W) tuple a band structure was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub q: f64,
    pub v0: f64,
    pub l: f64,
    pub w: f64,
}

impl ProblemSummary {
    pub fn period(&self) -> f64 {
        self.l + self.w
    }

    pub fn same_geometry(&self, other: &ProblemSummary) -> bool {
        (self.v0 - other.v0).abs() < 1e-12
            && (self.l - other.l).abs() < 1e-12
            && (self.w - other.w).abs() < 1e-12
    }
}

/// Per-(k, band) solver diagnostics kept alongside the energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub residual: f64,
}

/// E_n(k) on a symmetric k-grid, bands sorted in energy at every k.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub problem: ProblemSummary,
    pub k_grid: Vec<BlochMomentum>,
    /// energies[band][k index]
    pub energies: Vec<Vec<f64>>,
    pub n_bands: usize,
    pub diagnostics: Vec<Vec<SolveDiagnostics>>,
}

impl BandStructure {
    pub fn zone_edge(&self) -> f64 {
        std::f64::consts::PI / self.problem.period()
    }

    pub fn k_values(&self) -> Vec<f64> {
        self.k_grid.iter().map(|k| k.k()).collect()
    }

    /// The k >= 0 half of one band, as (k, E) pairs.
    pub fn nonnegative_half(&self, band: usize) -> (Vec<f64>, Vec<f64>) {
        let mut ks = Vec::new();
        let mut es = Vec::new();
        for (km, &e) in self.k_grid.iter().zip(&self.energies[band]) {
            if km.k() >= -1e-15 {
                ks.push(km.k().max(0.0));
                es.push(e);
            }
        }
        (ks, es)
    }
}

/// Effective mass from the central difference of E(k) at one grid point.
/// m_star * curvature = 1 by definition; delta_k records the grid spacing the
/// estimate depends on (genuinely so for q < 2, where the band develops a
/// cusp at k = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveMassResult {
    pub k0: f64,
    pub delta_k: f64,
    pub m_star: f64,
    pub curvature: f64,
}

/// Ground-band inversion classification; k_min is reported on [0, pi/a].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InversionClass {
    NotInverted,
    PartiallyInverted,
    FullyInverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionState {
    pub classification: InversionClass,
    pub k_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Directness {
    Direct,
    Indirect,
}

/// Gap data at one fractional order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub direct_gap: f64,
    pub indirect_gap: f64,
    pub directness: Directness,
    /// Location of the ground-band maximum on [0, pi/a].
    pub k_valence_max: f64,
    /// Location of the first-excited-band minimum on [0, pi/a].
    pub k_conduction_min: f64,
}

/// Direct/indirect gaps and directness across a family of fractional orders
/// at fixed geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub q_values: Vec<f64>,
    pub points: Vec<GapPoint>,
}

impl GapCurve {
    pub fn direct_gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.direct_gap).collect()
    }

    pub fn indirect_gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.indirect_gap).collect()
    }
}

/// Solve every (k, band) cell of an `n_k`-point zone grid. Cells are
/// independent; the deflation chain orders bands within one k. Failures are
/// collected per cell rather than aborting the remaining cells.
pub fn compute_band_structure(
    prob: &ProblemSpec,
    n_k: usize,
    n_bands: usize,
    settings: &SolverSettings,
) -> Result<BandStructure> {
    if n_bands == 0 {
        return Err(Error::Config("n_bands must be >= 1".into()));
    }
    let a = prob.potential().period();
    let k_grid = BlochMomentum::zone_grid(a, n_k)?;

    let columns: Vec<std::result::Result<Vec<BlochState>, (usize, usize)>> = k_grid
        .par_iter()
        .map(|k| {
            let mut states: Vec<BlochState> = Vec::with_capacity(n_bands);
            for band in 0..n_bands {
                match imaginary_time_solve(prob, k, band, &states, settings) {
                    Ok(s) => states.push(s),
                    Err(_) => return Err((k.index(), band)),
                }
            }
            Ok(states)
        })
        .collect();

    let mut failures = Vec::new();
    let mut energies = vec![vec![0.0; k_grid.len()]; n_bands];
    let mut diagnostics =
        vec![vec![SolveDiagnostics { iterations: 0, residual: 0.0 }; k_grid.len()]; n_bands];
    for (i, col) in columns.into_iter().enumerate() {
        match col {
            Ok(states) => {
                for (band, s) in states.into_iter().enumerate() {
                    energies[band][i] = s.energy;
                    diagnostics[band][i] = SolveDiagnostics {
                        iterations: s.iterations,
                        residual: s.residual,
                    };
                }
            }
            Err(cell) => failures.push(cell),
        }
    }
    if !failures.is_empty() {
        failures.sort_unstable();
        return Err(Error::CellFailures { cells: failures });
    }

    Ok(BandStructure {
        problem: ProblemSummary {
            q: prob.q(),
            v0: prob.potential().v0(),
            l: prob.potential().l(),
            w: prob.potential().w(),
        },
        k_grid,
        energies,
        n_bands,
        diagnostics,
    })
}

/// Central-difference effective mass at `k0`, which must be an interior grid
/// point. A non-positive curvature means the band is inverted at `k0` and the
/// ground-state mass is undefined there; that case is reported as a domain
/// error carrying the curvature.
pub fn effective_mass(
    band: &[f64],
    k_grid: &[BlochMomentum],
    k0: &BlochMomentum,
) -> Result<EffectiveMassResult> {
    if band.len() != k_grid.len() || band.len() < 3 {
        return Err(Error::Precondition(
            "band and k-grid must agree and hold at least 3 points".into(),
        ));
    }
    let i = k_grid
        .iter()
        .position(|km| (km.k() - k0.k()).abs() < 1e-12)
        .ok_or_else(|| Error::Precondition(format!("k0 = {} is not on the grid", k0.k())))?;
    if i == 0 || i == k_grid.len() - 1 {
        return Err(Error::Precondition(
            "k0 must be an interior grid point (both neighbors needed)".into(),
        ));
    }
    let delta_k = k_grid[1].k() - k_grid[0].k();
    let curvature = (band[i + 1] - 2.0 * band[i] + band[i - 1]) / (delta_k * delta_k);
    if curvature <= 0.0 {
        return Err(Error::Domain(format!(
            "band is inverted at k0 = {}: curvature {curvature:.3e} <= 0",
            k0.k()
        )));
    }
    Ok(EffectiveMassResult {
        k0: k0.k(),
        delta_k,
        m_star: 1.0 / curvature,
        curvature,
    })
}

/// Classify ground-band inversion from the discrete band. Inversion is
/// declared only when some k > 0 lies strictly below E(0) by more than 1e-10;
/// a minimum on the last grid point counts as fully inverted.
pub fn classify_inversion(band: &[f64], k_grid: &[BlochMomentum]) -> Result<InversionState> {
    if band.len() != k_grid.len() {
        return Err(Error::Precondition("band and k-grid lengths differ".into()));
    }
    let period_edge = k_grid
        .iter()
        .map(|km| km.k())
        .fold(f64::NEG_INFINITY, f64::max);
    let zero = k_grid
        .iter()
        .position(|km| km.k().abs() < 1e-12)
        .ok_or_else(|| Error::Precondition("k = 0 missing from the grid".into()))?;
    if !k_grid.iter().any(|km| (km.k() - period_edge).abs() < 1e-12) || period_edge <= 0.0 {
        return Err(Error::Precondition("grid must reach the zone edge".into()));
    }

    let mut best_i = zero;
    let mut best_e = band[zero];
    for (i, km) in k_grid.iter().enumerate() {
        if km.k() > 1e-15 && band[i] < best_e - 1e-10 {
            // strictly lower wins; ties resolve toward smaller |k| because
            // the scan improves only on a strict decrease
            if km.k() < k_grid[best_i].k() || band[i] < best_e - 1e-10 {
                best_i = i;
                best_e = band[i];
            }
        }
    }

    let k_min = k_grid[best_i].k().max(0.0);
    let classification = if best_i == zero {
        InversionClass::NotInverted
    } else if (k_min - period_edge).abs() < 1e-12 {
        InversionClass::FullyInverted
    } else {
        InversionClass::PartiallyInverted
    };
    Ok(InversionState {
        classification,
        k_min: if classification == InversionClass::NotInverted { 0.0 } else { k_min },
    })
}

/// Classification from a continuously refined minimum location (e.g. the GPR
/// search): 0 maps to not inverted, the zone edge to fully inverted.
pub fn classify_from_kmin(k_min: f64, zone_edge: f64) -> InversionState {
    let classification = if k_min <= 0.0 {
        InversionClass::NotInverted
    } else if k_min >= zone_edge {
        InversionClass::FullyInverted
    } else {
        InversionClass::PartiallyInverted
    };
    InversionState {
        classification,
        k_min: k_min.clamp(0.0, zone_edge),
    }
}

/// Direct and indirect gaps plus directness per fractional order. All
/// structures must share the geometry and carry at least two bands; q must
/// increase strictly along the list. Extrema are located on the k >= 0 half
/// (the bands are even in k); extrema aligned within one grid spacing count
/// as direct.
pub fn gap_curve(structures: &[BandStructure]) -> Result<GapCurve> {
    if structures.is_empty() {
        return Err(Error::Precondition("no band structures given".into()));
    }
    let first = &structures[0];
    let mut q_values = Vec::with_capacity(structures.len());
    let mut points = Vec::with_capacity(structures.len());
    for s in structures {
        if s.n_bands < 2 {
            return Err(Error::Precondition(
                "gap curve needs at least two bands per structure".into(),
            ));
        }
        if !s.problem.same_geometry(&first.problem) {
            return Err(Error::Precondition(
                "gap curve requires a single geometry across the q list".into(),
            ));
        }
        if let Some(&prev) = q_values.last() {
            if s.problem.q <= prev {
                return Err(Error::Precondition("q values must increase strictly".into()));
            }
        }
        q_values.push(s.problem.q);

        let (ks, e0) = s.nonnegative_half(0);
        let (_, e1) = s.nonnegative_half(1);
        let spacing = ks[1] - ks[0];

        let mut direct = f64::INFINITY;
        for (a, b) in e0.iter().zip(&e1) {
            direct = direct.min(b - a);
        }
        let (i_vmax, _) = e0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
        let (i_cmin, _) = e1
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
        let indirect = e1[i_cmin] - e0[i_vmax];
        let aligned = (ks[i_vmax] - ks[i_cmin]).abs() <= spacing + 1e-12;
        points.push(GapPoint {
            direct_gap: direct,
            indirect_gap: indirect,
            directness: if aligned { Directness::Direct } else { Directness::Indirect },
            k_valence_max: ks[i_vmax],
            k_conduction_min: ks[i_cmin],
        });
    }
    Ok(GapCurve { q_values, points })
}
