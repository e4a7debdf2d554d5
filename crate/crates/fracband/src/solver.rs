//! Bloch eigenstates of the fractional Hamiltonian at fixed (q, k).
//!
//! The production path is imaginary-time evolution with symmetric Strang
//! splitting on a per-k twisted cell: the kinetic operator is diagonal in the
//! plane-wave basis with multiplier |k + G|^q / 2, the potential is diagonal
//! in real space. Because the Strang fixed point carries an O(dtau^2) bias
//! that the dtau floor cannot push below the cross-validation tolerance for
//! q > 2, every solve finishes with a short preconditioned Rayleigh-Ritz
//! polish whose fixed points are exact eigenvectors of the discrete
//! Hamiltonian. Excited bands are reached by deflating converged lower states
//! out of the iterate after every step.
//!
//! `planewave_diagonalize` is the independent cross-check: a dense real
//! symmetric eigensolve in the same plane-wave basis.

use crate::error::{Error, Result};
use crate::lattice::{
    bandlimited_potential, potential_fourier, potential_mode_cutoff, BlochMomentum, PotentialSpec,
    RealSpaceGrid, ReciprocalSet,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// One eigenproblem instance: fractional order, potential, and grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    q: f64,
    potential: PotentialSpec,
    grid: RealSpaceGrid,
}

impl ProblemSpec {
    /// `q` must lie in [1, 3], the range the band analysis covers.
    pub fn new(q: f64, potential: PotentialSpec, grid: RealSpaceGrid) -> Result<Self> {
        check_q(q)?;
        if (potential.period() - grid.period()).abs() > 1e-12 * potential.period() {
            return Err(Error::Config(
                "grid was built for a different potential period".into(),
            ));
        }
        Ok(Self { q, potential, grid })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn grid(&self) -> &RealSpaceGrid {
        &self.grid
    }
}

fn check_q(q: f64) -> Result<()> {
    if !q.is_finite() || !(1.0..=3.0).contains(&q) {
        return Err(Error::Domain(format!("fractional order q = {q} outside [1, 3]")));
    }
    Ok(())
}

/// Imaginary-time schedule and stopping thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Initial imaginary-time step.
    pub dtau_initial: f64,
    /// Multiplicative decay applied when a stage stops making progress.
    pub dtau_decay: f64,
    /// Smallest imaginary-time step the schedule descends to.
    pub dtau_floor: f64,
    /// Relative energy-change threshold that ends a stage and, at the floor,
    /// the whole evolution.
    pub energy_tol: f64,
    pub max_iterations: usize,
    /// Orthogonality bound required of supplied lower states.
    pub deflation_tol: f64,
    /// Seed of the fixed pseudorandom perturbation mixed into initial states.
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dtau_initial: 0.1,
            dtau_decay: 0.5,
            dtau_floor: 1e-4,
            energy_tol: 1e-13,
            max_iterations: 200_000,
            deflation_tol: 1e-6,
            seed: 0,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.dtau_initial > 0.0) {
            return Err(Error::Config("dtau_initial must be > 0".into()));
        }
        if !(self.dtau_decay > 0.0 && self.dtau_decay <= 1.0) {
            return Err(Error::Config("dtau_decay must be in (0, 1]".into()));
        }
        if !(self.dtau_floor > 0.0 && self.dtau_floor <= self.dtau_initial) {
            return Err(Error::Config("dtau_floor must be in (0, dtau_initial]".into()));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::Config("energy_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// A converged eigenpair at one (q, k, band) point. The periodic amplitude is
/// unit-normalized: sum |u(x_i)|^2 dx = 1.
#[derive(Debug, Clone)]
pub struct BlochState {
    pub k: BlochMomentum,
    pub band: usize,
    pub energy: f64,
    pub amplitude: Vec<Complex64>,
    /// Relative energy change of the final iteration.
    pub residual: f64,
    pub iterations: usize,
}

/// Kinetic multipliers T_n = |k + G_n|^q / 2 over a reciprocal set
/// (hbar = m = C_q = 1).
pub fn kinetic_multiplier(q: f64, k: &BlochMomentum, gs: &ReciprocalSet) -> Result<Vec<f64>> {
    check_q(q)?;
    Ok(gs
        .vectors()
        .iter()
        .map(|&g| 0.5 * (k.k() + g).abs().powf(q))
        .collect())
}

/// Kinetic multipliers in FFT index order (0..n/2-1, -n/2..-1).
fn fft_multiplier(q: f64, k: f64, period: f64, n: usize) -> Vec<f64> {
    let g1 = 2.0 * PI / period;
    (0..n)
        .map(|i| {
            let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
            0.5 * (k + g1 * m).abs().powf(q)
        })
        .collect()
}

struct Spectral {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    n: usize,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Spectral {
            fwd,
            inv,
            scratch: vec![Complex64::ZERO; len],
            n,
        }
    }

    fn forward(&mut self, src: &[Complex64], dst: &mut Vec<Complex64>) {
        dst.clear();
        dst.extend_from_slice(src);
        self.fwd.process_with_scratch(dst, &mut self.scratch);
    }

    /// In-place inverse transform including the 1/n normalization.
    fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64], dx: f64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc * dx
}

fn norm(a: &[Complex64], dx: f64) -> f64 {
    (a.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt()
}

fn deflate(u: &mut [Complex64], lowers: &[&[Complex64]], dx: f64) {
    for lower in lowers {
        let c = dot(lower, u, dx);
        for (ui, li) in u.iter_mut().zip(lower.iter()) {
            *ui -= c * li;
        }
    }
}

fn normalize(u: &mut [Complex64], dx: f64) {
    let s = 1.0 / norm(u, dx);
    for z in u.iter_mut() {
        *z *= s;
    }
}

/// <u| T(k) + V |u> with the kinetic part evaluated spectrally and the
/// potential part in real space, using the solver's band-limited potential
/// field. The amplitude must be unit-normalized to 1e-6.
pub fn energy_of(prob: &ProblemSpec, amplitude: &[Complex64], k: &BlochMomentum) -> Result<f64> {
    let grid = prob.grid();
    if amplitude.len() != grid.n_points() {
        return Err(Error::Precondition(format!(
            "amplitude has {} samples, grid has {}",
            amplitude.len(),
            grid.n_points()
        )));
    }
    let dx = grid.spacing();
    let nrm = norm(amplitude, dx);
    if (nrm - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "amplitude norm {nrm} deviates from 1 by more than 1e-6"
        )));
    }
    let v = bandlimited_potential(prob.potential(), grid)?;
    let t = fft_multiplier(prob.q(), k.k(), grid.period(), grid.n_points());
    let mut spectral = Spectral::new(grid.n_points());
    let mut tilde = Vec::new();
    spectral.forward(amplitude, &mut tilde);
    Ok(raw_energy(amplitude, &tilde, &t, &v))
}

/// Energy of a (nearly) normalized state given its Fourier transform;
/// normalization factors cancel between numerator and denominator.
fn raw_energy(u: &[Complex64], tilde: &[Complex64], t: &[f64], v: &[f64]) -> f64 {
    let mut kin_num = 0.0;
    let mut kin_den = 0.0;
    for (z, &tm) in tilde.iter().zip(t) {
        let w = z.norm_sqr();
        kin_num += tm * w;
        kin_den += w;
    }
    let mut pot_num = 0.0;
    let mut pot_den = 0.0;
    for (z, &vi) in u.iter().zip(v) {
        let w = z.norm_sqr();
        pot_num += vi * w;
        pot_den += w;
    }
    kin_num / kin_den + pot_num / pot_den
}

/// Iterations a single dtau stage may spend before the schedule treats it as
/// stagnant and decays the step.
const STAGE_CAP: usize = 3000;
/// Iteration budget of the Rayleigh-Ritz polish phase.
const POLISH_CAP: usize = 500;

/// Find the lowest eigenstate orthogonal to `lower_states` at momentum `k`.
///
/// `lower_states` must hold converged states for bands 0..band-1 at the same
/// (q, k), in band order.
pub fn imaginary_time_solve(
    prob: &ProblemSpec,
    k: &BlochMomentum,
    band: usize,
    lower_states: &[BlochState],
    settings: &SolverSettings,
) -> Result<BlochState> {
    solve_impl(prob, k, band, lower_states, settings, None)
}

/// Same as [`imaginary_time_solve`] but records the energy after every
/// normalized step; used to check the monotone-descent property.
pub fn imaginary_time_solve_traced(
    prob: &ProblemSpec,
    k: &BlochMomentum,
    band: usize,
    lower_states: &[BlochState],
    settings: &SolverSettings,
) -> Result<(BlochState, Vec<f64>)> {
    let mut trace = Vec::new();
    let state = solve_impl(prob, k, band, lower_states, settings, Some(&mut trace))?;
    Ok((state, trace))
}

fn solve_impl(
    prob: &ProblemSpec,
    k: &BlochMomentum,
    band: usize,
    lower_states: &[BlochState],
    settings: &SolverSettings,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<BlochState> {
    settings.validate()?;
    let grid = prob.grid();
    let n = grid.n_points();
    let dx = grid.spacing();
    let a = grid.period();

    if lower_states.len() != band {
        return Err(Error::Precondition(format!(
            "band {band} needs {band} converged lower states, got {}",
            lower_states.len()
        )));
    }
    for (i, s) in lower_states.iter().enumerate() {
        if s.band != i || (s.k.k() - k.k()).abs() > 1e-12 || s.amplitude.len() != n {
            return Err(Error::Precondition(format!(
                "lower state {i} does not match the requested (k, band) chain"
            )));
        }
    }
    let lowers: Vec<&[Complex64]> = lower_states.iter().map(|s| s.amplitude.as_slice()).collect();
    for i in 0..lowers.len() {
        if (norm(lowers[i], dx) - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!("lower state {i} is not normalized")));
        }
        for j in 0..i {
            let overlap = dot(lowers[i], lowers[j], dx).norm();
            if overlap > settings.deflation_tol {
                return Err(Error::Precondition(format!(
                    "lower states {j} and {i} overlap by {overlap:.3e} (> deflation_tol)"
                )));
            }
        }
    }

    let v = bandlimited_potential(prob.potential(), grid)?;
    let t = fft_multiplier(prob.q(), k.k(), a, n);
    let mut spectral = Spectral::new(n);

    let mut u = initial_state(grid, band, &lowers, settings, dx);
    deflate(&mut u, &lowers, dx);
    normalize(&mut u, dx);

    let mut tilde = Vec::with_capacity(n);
    spectral.forward(&u, &mut tilde);
    let mut e_prev = raw_energy(&u, &tilde, &t, &v);
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(e_prev);
    }

    let mut dtau = settings.dtau_initial;
    let mut exp_v: Vec<f64> = v.iter().map(|&vi| (-0.5 * dtau * vi).exp()).collect();
    let mut exp_t: Vec<f64> = t.iter().map(|&ti| (-dtau * ti).exp()).collect();

    let mut iterations = 0usize;
    let mut stage_iters = 0usize;
    let mut rel = f64::INFINITY;

    // Phase 1: staged Strang split-step evolution. A stage ends when the
    // relative energy change drops below energy_tol or stops progressing;
    // the step then decays until it reaches the floor.
    while iterations < settings.max_iterations {
        iterations += 1;
        stage_iters += 1;

        for (ui, &e) in u.iter_mut().zip(&exp_v) {
            *ui *= e;
        }
        spectral.forward(&u, &mut tilde);
        for (zi, &e) in tilde.iter_mut().zip(&exp_t) {
            *zi *= e;
        }
        u.copy_from_slice(&tilde);
        spectral.inverse(&mut u);
        for (ui, &e) in u.iter_mut().zip(&exp_v) {
            *ui *= e;
        }
        deflate(&mut u, &lowers, dx);
        normalize(&mut u, dx);

        spectral.forward(&u, &mut tilde);
        let e = raw_energy(&u, &tilde, &t, &v);
        rel = (e - e_prev).abs() / e.abs().max(1.0);
        e_prev = e;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(e);
        }

        if rel < settings.energy_tol || stage_iters >= STAGE_CAP {
            if dtau <= settings.dtau_floor * (1.0 + 1e-9) {
                break;
            }
            dtau = (dtau * settings.dtau_decay).max(settings.dtau_floor);
            for (e, &vi) in exp_v.iter_mut().zip(&v) {
                *e = (-0.5 * dtau * vi).exp();
            }
            for (e, &ti) in exp_t.iter_mut().zip(&t) {
                *e = (-dtau * ti).exp();
            }
            stage_iters = 0;
        }
    }
    if iterations >= settings.max_iterations {
        return Err(Error::NoConvergence {
            iterations,
            residual: rel,
        });
    }

    // Phase 2: preconditioned Rayleigh-Ritz polish. Minimizing the Rayleigh
    // quotient over span{u, preconditioned residual} removes the O(dtau^2)
    // Strang fixed-point bias; the energy stays non-increasing step to step.
    let mut theta = e_prev;
    let mut hu = vec![Complex64::ZERO; n];
    let mut work = Vec::with_capacity(n);
    let mut d = vec![Complex64::ZERO; n];
    let mut polish_iters = 0usize;
    loop {
        if polish_iters >= POLISH_CAP || iterations >= settings.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: rel,
            });
        }
        polish_iters += 1;
        iterations += 1;

        // Hu = ifft(T fft(u)) + V u
        spectral.forward(&u, &mut tilde);
        hu.copy_from_slice(&tilde);
        for (z, &ti) in hu.iter_mut().zip(&t) {
            *z *= ti;
        }
        spectral.inverse(&mut hu);
        for ((z, ui), &vi) in hu.iter_mut().zip(&u).zip(&v) {
            *z += vi * ui;
        }

        // residual, preconditioned by the shifted kinetic symbol
        let shift = 1.0 + theta.abs();
        for ((di, hi), ui) in d.iter_mut().zip(&hu).zip(&u) {
            *di = hi - theta * ui;
        }
        spectral.forward(&d, &mut work);
        for (z, &ti) in work.iter_mut().zip(&t) {
            *z /= ti + shift;
        }
        d.copy_from_slice(&work);
        spectral.inverse(&mut d);

        deflate(&mut d, &lowers, dx);
        let proj = dot(&u, &d, dx);
        for (di, ui) in d.iter_mut().zip(&u) {
            *di -= proj * ui;
        }
        let nd = norm(&d, dx);
        if nd < 1e-13 {
            rel = 0.0;
            break;
        }
        let s = 1.0 / nd;
        for z in d.iter_mut() {
            *z *= s;
        }

        // 2x2 Rayleigh-Ritz in span{u, d}
        let h12 = dot(&d, &hu, dx).re;
        spectral.forward(&d, &mut work);
        let mut h22_kin = 0.0;
        for (z, &ti) in work.iter().zip(&t) {
            h22_kin += ti * z.norm_sqr();
        }
        let den: f64 = work.iter().map(|z| z.norm_sqr()).sum();
        let mut h22 = h22_kin / den;
        let mut pot = 0.0;
        let mut potden = 0.0;
        for (z, &vi) in d.iter().zip(&v) {
            let w = z.norm_sqr();
            pot += vi * w;
            potden += w;
        }
        h22 += pot / potden;

        let tr_m = theta + h22;
        let det = theta * h22 - h12 * h12;
        let lam = 0.5 * (tr_m - (tr_m * tr_m - 4.0 * det).max(0.0).sqrt());
        let (c1, c2) = if (lam - theta).abs() > (lam - h22).abs() {
            (h12, lam - theta)
        } else {
            (lam - h22, h12)
        };
        let nc = (c1 * c1 + c2 * c2).sqrt();
        if nc < 1e-300 {
            rel = 0.0;
            break;
        }
        for (ui, di) in u.iter_mut().zip(&d) {
            *ui = (c1 / nc) * *ui + (c2 / nc) * di;
        }
        deflate(&mut u, &lowers, dx);
        normalize(&mut u, dx);

        spectral.forward(&u, &mut tilde);
        let e = raw_energy(&u, &tilde, &t, &v);
        rel = (e - theta).abs() / e.abs().max(1.0);
        theta = e;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(e);
        }
        if rel < settings.energy_tol {
            break;
        }
    }

    Ok(BlochState {
        k: *k,
        band,
        energy: theta,
        amplitude: u,
        residual: rel,
        iterations,
    })
}

/// Uniform state for the ground band, lowest-|G| plane wave with a usable
/// orthogonal component for excited bands; both take a small fixed-seed
/// pseudorandom perturbation so the start is never exactly orthogonal to the
/// target at special k.
fn initial_state(
    grid: &RealSpaceGrid,
    band: usize,
    lowers: &[&[Complex64]],
    settings: &SolverSettings,
    dx: f64,
) -> Vec<Complex64> {
    let n = grid.n_points();
    let a = grid.period();
    let mut u = if band == 0 {
        vec![Complex64::new(1.0, 0.0); n]
    } else {
        let mut chosen = None;
        for half in 0..=(band as isize + 3) {
            for m in [half, -half] {
                let g = 2.0 * PI * m as f64 / a;
                let cand: Vec<Complex64> = grid
                    .coordinates()
                    .iter()
                    .map(|&x| Complex64::new(0.0, g * x).exp())
                    .collect();
                let mut ortho = cand.clone();
                deflate(&mut ortho, lowers, dx);
                if norm(&ortho, dx) > 0.1 {
                    chosen = Some(cand);
                    break;
                }
                if m == 0 {
                    break;
                }
            }
            if chosen.is_some() {
                break;
            }
        }
        chosen.unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for z in u.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += 1e-3 * Complex64::new(re, im);
    }
    u
}

/// Lowest `n_bands` eigenvalues of the dense plane-wave Hamiltonian
/// H_mn = |k + G_m|^q / 2 delta_mn + V~(G_m - G_n) over the symmetric basis
/// m, n in [-n_g, n_g]. The potential coefficients carry the same Fourier
/// cutoff the grid solver uses, so both methods address one spectrum.
pub fn planewave_diagonalize(
    prob: &ProblemSpec,
    k: &BlochMomentum,
    n_g: usize,
    n_bands: usize,
) -> Result<Vec<f64>> {
    if n_g < 8 {
        return Err(Error::Precondition(format!("n_g = {n_g} must be >= 8")));
    }
    if n_bands == 0 || n_bands > 2 * n_g {
        return Err(Error::Precondition(format!(
            "n_bands = {n_bands} must be in [1, 2 n_g]"
        )));
    }
    let dim = 2 * n_g + 1;
    let a = prob.grid().period();
    let g1 = 2.0 * PI / a;
    let cutoff = potential_mode_cutoff(prob.grid().n_points()) as isize;
    let q = prob.q();
    let kk = k.k();
    let pot = prob.potential();

    // Toeplitz potential block: one coefficient per index difference
    let mut coeff = vec![0.0; 2 * dim];
    for (i, c) in coeff.iter_mut().enumerate() {
        let d = i as isize - dim as isize + 1; // -(dim-1) ..= dim-1
        *c = if d.abs() <= cutoff {
            potential_fourier(pot, g1 * d as f64)
        } else {
            0.0
        };
    }
    let coeff_at = |d: isize| coeff[(d + dim as isize - 1) as usize];

    let h = DMatrix::from_fn(dim, dim, |i, j| {
        let mi = i as isize - n_g as isize;
        let mj = j as isize - n_g as isize;
        let mut val = coeff_at(mi - mj);
        if i == j {
            val += 0.5 * (kk + g1 * mi as f64).abs().powf(q);
        }
        val
    });

    let eigs = h.symmetric_eigenvalues();
    let mut evs: Vec<f64> = eigs.iter().copied().collect();
    if evs.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
    }
    evs.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    evs.truncate(n_bands);
    Ok(evs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;

    fn problem(q: f64, v0: f64, l: f64, w: f64, n: usize) -> ProblemSpec {
        let spec = PotentialSpec::new(v0, l, w).unwrap();
        let grid = build_grid(&spec, n).unwrap();
        ProblemSpec::new(q, spec, grid).unwrap()
    }

    #[test]
    fn multiplier_values() {
        let gs = ReciprocalSet::new(2.0 * PI, 1); // G = -1, 0, 1
        let k = BlochMomentum::new(0.2, 2.0 * PI).unwrap();
        let t = kinetic_multiplier(2.0, &k, &gs).unwrap();
        assert!((t[1] - 0.02).abs() < 1e-15); // k^2/2 at G = 0

        let k0 = BlochMomentum::new(0.0, 2.0 * PI).unwrap();
        let t1 = kinetic_multiplier(1.0, &k0, &gs).unwrap();
        assert!((t1[2] - 0.5).abs() < 1e-15); // |1|/2 at G = 1

        let gs2 = ReciprocalSet::new(PI, 1); // G = -2, 0, 2
        let t3 = kinetic_multiplier(3.0, &k0, &gs2).unwrap();
        assert!((t3[0] - 4.0).abs() < 1e-14); // |-2|^3/2

        assert!(kinetic_multiplier(0.5, &k0, &gs).is_err());
        assert!(kinetic_multiplier(3.5, &k0, &gs).is_err());
    }

    #[test]
    fn free_particle_ground_state() {
        let prob = problem(2.0, 0.0, 1.5, 6.0, 64);
        let k = BlochMomentum::new(0.3, 7.5).unwrap();
        let s = imaginary_time_solve(&prob, &k, 0, &[], &SolverSettings::default()).unwrap();
        assert!((s.energy - 0.045).abs() < 1e-12, "E = {}", s.energy);
        // amplitude is a constant plane wave up to phase
        let mags: Vec<f64> = s.amplitude.iter().map(|z| z.norm()).collect();
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        for m in mags {
            assert!((m - mean).abs() < 1e-8);
        }
    }

    #[test]
    fn free_particle_exact_dispersion_across_q() {
        let spec = PotentialSpec::new(0.0, 1.5, 6.0).unwrap();
        let a = spec.period();
        for &q in &[1.0, 1.7, 2.0, 2.6, 3.0] {
            let grid = build_grid(&spec, 64).unwrap();
            let prob = ProblemSpec::new(q, spec, grid).unwrap();
            for &kf in &[0.0, 0.37, 1.0] {
                let k = BlochMomentum::new(kf * PI / a, a).unwrap();
                let s = imaginary_time_solve(&prob, &k, 0, &[], &SolverSettings::default()).unwrap();
                let exact = 0.5 * k.k().abs().powf(q);
                assert!(
                    (s.energy - exact).abs() <= 1e-10,
                    "q={q} k={}: {} vs {}",
                    k.k(),
                    s.energy,
                    exact
                );
            }
        }
    }

    #[test]
    fn ground_state_matches_kronig_penney_root() {
        // Frozen oracle value: lowest root of
        // cos(ka) = cos(alpha W) cosh(beta L)
        //         + (beta^2 - alpha^2)/(2 alpha beta) sin(alpha W) sinh(beta L)
        // at k = 0 for (V0, L, W) = (0.5, 1.5, 6.0), alpha = sqrt(2E),
        // beta = sqrt(2(V0 - E)), solved by bisection to 1e-14.
        let prob = problem(2.0, 0.5, 1.5, 6.0, 512);
        let k = BlochMomentum::new(0.0, 7.5).unwrap();
        let s = imaginary_time_solve(&prob, &k, 0, &[], &SolverSettings::default()).unwrap();
        let kp_root = 0.058_853_138_357_2;
        assert!(
            (s.energy - kp_root).abs() < 1e-6,
            "E = {} vs KP {}",
            s.energy,
            kp_root
        );
    }

    #[test]
    fn splitstep_agrees_with_diagonalization_fractional() {
        let prob = problem(1.5, 0.5, 1.5, 6.0, 512);
        let a = 7.5;
        let k = BlochMomentum::new(PI / a, a).unwrap();
        let s = imaginary_time_solve(&prob, &k, 0, &[], &SolverSettings::default()).unwrap();
        let diag = planewave_diagonalize(&prob, &k, 255, 2).unwrap();
        assert!(
            (s.energy - diag[0]).abs() <= 1e-8,
            "split {} vs diag {}",
            s.energy,
            diag[0]
        );
    }

    #[test]
    fn deflated_excited_state_is_orthogonal() {
        let prob = problem(2.0, 0.5, 1.5, 6.0, 256);
        let k = BlochMomentum::new(0.1, 7.5).unwrap();
        let settings = SolverSettings::default();
        let s0 = imaginary_time_solve(&prob, &k, 0, &[], &settings).unwrap();
        let s1 =
            imaginary_time_solve(&prob, &k, 1, std::slice::from_ref(&s0), &settings).unwrap();
        assert!(s1.energy > s0.energy);
        let dx = prob.grid().spacing();
        let overlap = dot(&s0.amplitude, &s1.amplitude, dx).norm();
        assert!(overlap <= 1e-8, "overlap {overlap}");
        let diag = planewave_diagonalize(&prob, &k, 127, 2).unwrap();
        assert!((s0.energy - diag[0]).abs() < 1e-8);
        assert!((s1.energy - diag[1]).abs() < 1e-8);
    }

    #[test]
    fn missing_lower_states_is_a_precondition_error() {
        let prob = problem(2.0, 0.5, 1.5, 6.0, 64);
        let k = BlochMomentum::new(0.0, 7.5).unwrap();
        let err = imaginary_time_solve(&prob, &k, 1, &[], &SolverSettings::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn energy_descends_monotonically() {
        let prob = problem(2.0, 0.5, 1.5, 6.0, 256);
        let k = BlochMomentum::new(0.2, 7.5).unwrap();
        let (_, trace) =
            imaginary_time_solve_traced(&prob, &k, 0, &[], &SolverSettings::default()).unwrap();
        for pair in trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "energy rose from {} to {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn energy_of_checks_and_values() {
        let prob = problem(2.0, 0.0, 1.5, 6.0, 64);
        let n = prob.grid().n_points();
        let dx = prob.grid().spacing();
        let c = Complex64::new(1.0 / (dx * n as f64).sqrt(), 0.0);
        let uniform = vec![c; n];
        let k = BlochMomentum::new(0.5 * PI / 7.5, 7.5).unwrap();
        // constant u, V = 0: pure kinetic |k|^q/2
        let e = energy_of(&prob, &uniform, &k).unwrap();
        assert!((e - 0.5 * k.k().powi(2)).abs() < 1e-12);

        // constant u over the barrier potential at k = 0: mean V0 L / a
        let prob2 = problem(1.7, 0.5, 1.5, 6.0, 64);
        let k0 = BlochMomentum::new(0.0, 7.5).unwrap();
        let e2 = energy_of(&prob2, &uniform, &k0).unwrap();
        assert!((e2 - 0.1).abs() < 1e-12, "e2 = {e2}");

        // un-normalized input is rejected
        let bad = vec![Complex64::new(1.0, 0.0); n];
        assert!(matches!(
            energy_of(&prob, &bad, &k0),
            Err(Error::Precondition(_))
        ));

        // converged state reproduces its stored energy
        let s = imaginary_time_solve(&prob2, &k0, 0, &[], &SolverSettings::default()).unwrap();
        let e3 = energy_of(&prob2, &s.amplitude, &k0).unwrap();
        assert!((e3 - s.energy).abs() < 1e-12);
    }

    #[test]
    fn diagonalize_free_particle() {
        let prob = problem(2.0, 0.0, 1.5, 6.0, 64);
        let k = BlochMomentum::new(0.1, 7.5).unwrap();
        let evs = planewave_diagonalize(&prob, &k, 8, 3).unwrap();
        assert!((evs[0] - 0.005).abs() < 1e-12);
        assert!(planewave_diagonalize(&prob, &k, 4, 1).is_err());
        assert!(planewave_diagonalize(&prob, &k, 8, 17).is_err());
    }

    #[test]
    fn time_reversal_symmetry() {
        let prob = problem(2.5, 0.5, 1.5, 6.0, 256);
        let a = 7.5;
        let settings = SolverSettings::default();
        for &kf in &[0.3, 0.8] {
            let kp = BlochMomentum::new(kf * PI / a, a).unwrap();
            let km = BlochMomentum::new(-kf * PI / a, a).unwrap();
            let ep = imaginary_time_solve(&prob, &kp, 0, &[], &settings).unwrap().energy;
            let em = imaginary_time_solve(&prob, &km, 0, &[], &settings).unwrap().energy;
            assert!((ep - em).abs() <= 1e-10, "E(k)={ep} E(-k)={em}");
        }
    }
}
