//! Periodic rectangular potentials, real-space grids, and reciprocal-space
//! bookkeeping shared by the solver and everything downstream.
//!
//! Conventions fixed here: hbar = m = C_q = 1, the barrier is centered at
//! x = 0 inside the cell [-a/2, a/2), and the cell period is a = L + W.
//! Centering makes every Fourier coefficient of the potential real and even,
//! so the plane-wave Hamiltonian is real symmetric at any k.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Unit system used throughout: all three constants are exactly 1 and are not
/// configurable. Energies, lengths, and masses below are dimensionless.
pub struct UnitsConvention;

impl UnitsConvention {
    pub const HBAR: f64 = 1.0;
    pub const MASS: f64 = 1.0;
    /// Fractional scaling coefficient C_q of the kinetic term.
    pub const C_Q: f64 = 1.0;
}

/// Periodic rectangular potential: barrier of height `v0` and width `l`
/// centered at x = 0, flanked by wells of width `w`. Period a = l + w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    v0: f64,
    l: f64,
    w: f64,
}

impl PotentialSpec {
    pub fn new(v0: f64, l: f64, w: f64) -> Result<Self> {
        if !v0.is_finite() || v0 < 0.0 {
            return Err(Error::Config(format!("barrier height v0 = {v0} must be >= 0")));
        }
        if !l.is_finite() || l <= 0.0 {
            return Err(Error::Config(format!("barrier width l = {l} must be > 0")));
        }
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Config(format!("well width w = {w} must be > 0")));
        }
        Ok(Self { v0, l, w })
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// Lattice period a = l + w.
    pub fn period(&self) -> f64 {
        self.l + self.w
    }

    /// Potential value at x (x taken modulo the period, barrier centered at 0).
    /// Points exactly on the barrier edge |x| = l/2 take the value v0.
    pub fn value_at(&self, x: f64) -> f64 {
        let a = self.period();
        let mut xr = (x + 0.5 * a).rem_euclid(a) - 0.5 * a;
        // rem_euclid can land on +a/2 through rounding; fold it back
        if xr >= 0.5 * a {
            xr -= a;
        }
        if xr.abs() <= 0.5 * self.l {
            self.v0
        } else {
            0.0
        }
    }
}

/// Uniform grid over one cell, `n_points` samples starting at -a/2.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSpaceGrid {
    n_points: usize,
    spacing: f64,
    period: f64,
    coordinates: Vec<f64>,
}

impl RealSpaceGrid {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.coordinates
    }
}

/// Bloch wavevector restricted to the first Brillouin zone, together with its
/// position in the k-grid it came from (0 for free-standing values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMomentum {
    k: f64,
    index: usize,
}

impl BlochMomentum {
    /// A free-standing momentum; validates |k| <= pi/a + 1e-12.
    pub fn new(k: f64, period: f64) -> Result<Self> {
        let edge = PI / period;
        if !k.is_finite() || k.abs() > edge + 1e-12 {
            return Err(Error::Domain(format!(
                "k = {k} outside the first Brillouin zone [-{edge}, {edge}]"
            )));
        }
        Ok(Self { k, index: 0 })
    }

    /// Uniform symmetric grid of `n_k` momenta spanning [-pi/a, pi/a] inclusive.
    pub fn zone_grid(period: f64, n_k: usize) -> Result<Vec<Self>> {
        if n_k < 3 || n_k % 2 == 0 {
            return Err(Error::Config(format!(
                "n_k = {n_k} must be odd and >= 3 so that k = 0 is on the grid"
            )));
        }
        let edge = PI / period;
        let step = 2.0 * edge / (n_k - 1) as f64;
        Ok((0..n_k)
            .map(|i| Self {
                k: -edge + step * i as f64,
                index: i,
            })
            .collect())
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

/// Symmetric set of reciprocal lattice vectors G_n = 2 pi n / a, n in [-N, N].
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalSet {
    vectors: Vec<f64>,
    half_width: usize,
}

impl ReciprocalSet {
    pub fn new(period: f64, half_width: usize) -> Self {
        let g1 = 2.0 * PI / period;
        let n = half_width as isize;
        Self {
            vectors: (-n..=n).map(|m| g1 * m as f64).collect(),
            half_width,
        }
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Build the uniform real-space grid for one cell of `spec`.
/// `n_points` must be a power of two >= 16 (FFT-friendly, resolves the barrier).
pub fn build_grid(spec: &PotentialSpec, n_points: usize) -> Result<RealSpaceGrid> {
    if n_points < 16 || !n_points.is_power_of_two() {
        return Err(Error::Config(format!(
            "n_points = {n_points} must be a power of two >= 16"
        )));
    }
    let a = spec.period();
    let spacing = a / n_points as f64;
    let coordinates = (0..n_points)
        .map(|i| -0.5 * a + spacing * i as f64)
        .collect();
    Ok(RealSpaceGrid {
        n_points,
        spacing,
        period: a,
        coordinates,
    })
}

/// Sample the exact rectangular potential on the grid: v0 where |x| <= l/2
/// (closed barrier edges), 0 elsewhere.
pub fn sample_potential(spec: &PotentialSpec, grid: &RealSpaceGrid) -> Result<Vec<f64>> {
    check_period(spec, grid)?;
    Ok(grid.coordinates().iter().map(|&x| spec.value_at(x)).collect())
}

/// Analytic Fourier coefficient (1/a) * integral of V(x) e^{-i g x} over one
/// cell, for a reciprocal vector g = 2 pi n / a. Real by the centering
/// convention: v0 l / a at g = 0, else 2 v0 sin(g l / 2) / (a g).
pub fn potential_fourier(spec: &PotentialSpec, g: f64) -> f64 {
    let a = spec.period();
    if g == 0.0 {
        spec.v0 * spec.l / a
    } else {
        2.0 * spec.v0 * (g * spec.l / 2.0).sin() / (a * g)
    }
}

/// Index of the highest retained Fourier mode in the solver's potential
/// representation: a quarter of the grid size. Keeping the potential this far
/// below the Nyquist window means the circulant wrap of the pseudospectral
/// product never couples modes the eigenstates actually occupy, so the grid
/// problem and the plane-wave problem share one spectrum.
pub fn potential_mode_cutoff(n_points: usize) -> usize {
    n_points / 4
}

/// Potential field the solver evolves with: the Fourier series of the
/// rectangle truncated at `potential_mode_cutoff`, evaluated on the grid.
/// Smooth by construction; agrees with `sample_potential` away from the
/// barrier edges up to Gibbs ringing.
pub fn bandlimited_potential(spec: &PotentialSpec, grid: &RealSpaceGrid) -> Result<Vec<f64>> {
    check_period(spec, grid)?;
    let a = grid.period();
    let g1 = 2.0 * PI / a;
    let cutoff = potential_mode_cutoff(grid.n_points());
    let mean = potential_fourier(spec, 0.0);
    let coeffs: Vec<f64> = (1..=cutoff)
        .map(|m| potential_fourier(spec, g1 * m as f64))
        .collect();
    Ok(grid
        .coordinates()
        .iter()
        .map(|&x| {
            let mut v = mean;
            for (m, &c) in coeffs.iter().enumerate() {
                v += 2.0 * c * (g1 * (m + 1) as f64 * x).cos();
            }
            v
        })
        .collect())
}

fn check_period(spec: &PotentialSpec, grid: &RealSpaceGrid) -> Result<()> {
    if (spec.period() - grid.period()).abs() > 1e-12 * spec.period() {
        return Err(Error::Config(format!(
            "grid period {} does not match potential period {}",
            grid.period(),
            spec.period()
        )));
    }
    Ok(())
}
