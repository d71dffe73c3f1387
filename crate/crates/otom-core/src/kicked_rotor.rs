//! Spin-coupled quantum kicked rotor, plus the classical Chirikov map.
//!
//! One period is U = exp[−i ℏ_eff H_F] · exp[−i (k/ℏ_eff) H_K]: the kick acts
//! first, then the free drift. H_F = m²/2 is diagonal in momentum; H_K couples
//! momenta m, m' with |m−m'| ≤ 3 through the 2π-periodic potentials
//! V₀ = cos θ, V_j = v_j sin(jθ) attached to σ₀..σ₃.
//!
//! Momentum labels m ∈ [−N+1, N] live in storage bins n = m mod 2N, and the
//! position grid is θ_j = 2πj/(2N), paired by the unitary Fourier transform
//! from [`crate::tensor`]. Momentum differences are taken mod 2N (circulant
//! banding), which is exactly what the grid Fourier pair diagonalizes.

use crate::error::{Error, Result};
use crate::quantum::PureState;
use crate::tensor::{c, fourier_change_of_basis, ComplexMatrix, FourierDirection, C64};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Physical parameters of one rotor run. `n_trunc` is N; the rotor dimension
/// is 2N and the full spin-rotor dimension 4N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QkrParams {
    pub k: f64,
    pub hbar_eff: f64,
    pub n_trunc: usize,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl Default for QkrParams {
    fn default() -> Self {
        QkrParams {
            k: 1.0,
            hbar_eff: 1.0,
            n_trunc: 128,
            v1: 0.1,
            v2: 0.2,
            v3: 0.3,
        }
    }
}

impl QkrParams {
    pub fn validate(&self) -> Result<()> {
        if 2 * self.n_trunc < 8 {
            return Err(Error::InvalidArg(format!(
                "rotor dimension 2N = {} is below the minimum of 8",
                2 * self.n_trunc
            )));
        }
        if self.hbar_eff <= 0.0 || self.hbar_eff.is_nan() {
            return Err(Error::InvalidArg(format!(
                "hbar_eff must be positive, got {}",
                self.hbar_eff
            )));
        }
        Ok(())
    }

    /// Rotor dimension 2N.
    pub fn dim_rotor(&self) -> usize {
        2 * self.n_trunc
    }

    /// Full spin ⊗ rotor dimension 4N.
    pub fn dim_total(&self) -> usize {
        4 * self.n_trunc
    }
}

/// Signed momentum label of storage bin n: m = n for n ≤ N, else n − 2N.
pub fn momentum_label(bin: usize, n_trunc: usize) -> i64 {
    if bin <= n_trunc {
        bin as i64
    } else {
        bin as i64 - 2 * n_trunc as i64
    }
}

// ---------------------------------------------------------------------------
// Momentum-space Hamiltonian blocks
// ---------------------------------------------------------------------------

/// 2×2 spin block of H_K at signed momentum transfer r = m − m'
/// (row-major [H⁰⁰, H⁰¹, H¹⁰, H¹¹]). Zero for |r| > 3.
fn hk_block(r: i64, v1: f64, v2: f64, v3: f64) -> [C64; 4] {
    let d = |a: i64, b: i64| if a == b { 1.0 } else { 0.0 };
    let h00 = c(0.5 * (d(r, 1) + d(r, -1)), 0.5 * v3 * (d(r, 3) - d(r, -3)));
    let h01 = c(0.5 * v2 * (d(r, 2) - d(r, -2)), 0.5 * v1 * (d(r, 1) - d(r, -1)));
    let h10 = c(-0.5 * v2 * (d(r, 2) - d(r, -2)), 0.5 * v1 * (d(r, 1) - d(r, -1)));
    let h11 = c(0.5 * (d(r, 1) + d(r, -1)), -0.5 * v3 * (d(r, 3) - d(r, -3)));
    [h00, h01, h10, h11]
}

/// Free Hamiltonian on (m, s): real diagonal m²/2, independent of spin.
/// Basis order is rotor-major: composite index = 2·bin + s.
pub fn build_hf(params: &QkrParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let d = params.dim_rotor();
    let mut h = ComplexMatrix::zeros(2 * d, 2 * d);
    for n in 0..d {
        let m = momentum_label(n, params.n_trunc) as f64;
        for s in 0..2 {
            let idx = 2 * n + s;
            h.set(idx, idx, c(0.5 * m * m, 0.0));
        }
    }
    Ok(h)
}

/// Kick Hamiltonian on (m, s): circulant in the momentum difference
/// r = m − m' (mod 2N), bandwidth 3, with the 2×2 spin blocks of
/// [`hk_block`]. Same rotor-major basis order as [`build_hf`].
pub fn build_hk(params: &QkrParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let d = params.dim_rotor();
    let mut h = ComplexMatrix::zeros(2 * d, 2 * d);
    for nr in 0..d {
        for nc in 0..d {
            let rr = (nr + d - nc) % d; // (nr − nc) mod d, in 0..d
            let r = if rr <= 3 {
                rr as i64
            } else if rr >= d - 3 {
                rr as i64 - d as i64
            } else {
                continue;
            };
            if r == 0 {
                continue;
            }
            let block = hk_block(r, params.v1, params.v2, params.v3);
            for sr in 0..2 {
                for sc in 0..2 {
                    h.set(2 * nr + sr, 2 * nc + sc, block[2 * sr + sc]);
                }
            }
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Floquet operator
// ---------------------------------------------------------------------------

/// Upper bound on 4N for the dense validation path.
pub const DENSE_DIM_LIMIT: usize = 256;

/// One-period unitary as a dense 4N×4N matrix in the (m, s) rotor-major
/// basis, built from the exact H_F/H_K blocks by full exponentiation.
/// Validation path only; production propagation uses [`floquet_splitstep`].
pub fn floquet_dense(params: &QkrParams) -> Result<ComplexMatrix> {
    params.validate()?;
    if params.dim_rotor() > DENSE_DIM_LIMIT {
        return Err(Error::InvalidArg(format!(
            "2N = {} exceeds the dense-path limit {DENSE_DIM_LIMIT}; use floquet_splitstep",
            params.dim_rotor()
        )));
    }
    let hf = build_hf(params)?;
    let hk = build_hk(params)?;
    let drift = crate::tensor::unitary_exp(&hf, params.hbar_eff)?;
    let kick = crate::tensor::unitary_exp(&hk, params.k / params.hbar_eff)?;
    Ok(drift.mul(&kick))
}

/// Structured one-period propagator: momentum-diagonal drift phases plus
/// per-θ 2×2 spin kick blocks, applied through the Fourier pair.
#[derive(Clone, Debug)]
pub struct FloquetOperator {
    /// e^{−i ℏ_eff m²/2} per momentum bin.
    pub kinetic_phases: Vec<C64>,
    /// Closed-form exp[−i(k/ℏ)(V₀ 1 + V⃗·σ⃗)](θ_j), row-major 2×2 per grid point.
    pub kick_action: Vec<[C64; 4]>,
}

/// Split-step factorization of the Floquet operator. The kick factor is
/// θ-diagonal with spin blocks exp[−iα(c₀1 + n⃗·σ⃗)] =
/// e^{−iαc₀}(cos(α|n⃗|)1 − i sin(α|n⃗|) n̂·σ⃗), where c₀ = cos θ and
/// n⃗ = −(v₁ sin θ, v₂ sin 2θ, v₃ sin 3θ) reproduces the H_K blocks above.
pub fn floquet_splitstep(params: &QkrParams) -> Result<FloquetOperator> {
    params.validate()?;
    let d = params.dim_rotor();
    let alpha = params.k / params.hbar_eff;
    let kinetic_phases = (0..d)
        .map(|n| {
            let m = momentum_label(n, params.n_trunc) as f64;
            C64::from_polar(1.0, -params.hbar_eff * 0.5 * m * m)
        })
        .collect();
    let mut kick_action = Vec::with_capacity(d);
    for j in 0..d {
        let theta = TWO_PI * j as f64 / d as f64;
        let c0 = theta.cos();
        let nx = -params.v1 * theta.sin();
        let ny = -params.v2 * (2.0 * theta).sin();
        let nz = -params.v3 * (3.0 * theta).sin();
        let nn = (nx * nx + ny * ny + nz * nz).sqrt();
        let scalar = C64::from_polar(1.0, -alpha * c0);
        let block = if nn == 0.0 {
            [scalar, c(0.0, 0.0), c(0.0, 0.0), scalar]
        } else {
            let (cosb, sinb) = ((alpha * nn).cos(), (alpha * nn).sin());
            let (ux, uy, uz) = (nx / nn, ny / nn, nz / nn);
            // cos·1 − i sin·(n̂·σ⃗), all times the scalar phase
            [
                scalar * c(cosb, -sinb * uz),
                scalar * c(-sinb * uy, -sinb * ux),
                scalar * c(sinb * uy, -sinb * ux),
                scalar * c(cosb, sinb * uz),
            ]
        };
        kick_action.push(block);
    }
    Ok(FloquetOperator {
        kinetic_phases,
        kick_action,
    })
}

/// Which way to propagate in [`evolve_kicks`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Apply n periods of the Floquet operator (or its adjoint) to the named
/// rotor and spin subsystems of a state; all other subsystems ride along.
pub fn evolve_kicks(
    state: &mut PureState,
    f: &FloquetOperator,
    n: usize,
    direction: Direction,
    rotor_label: &str,
    spin_label: &str,
) -> Result<()> {
    let rp = state.layout.index_of(rotor_label)?;
    let sp = state.layout.index_of(spin_label)?;
    let dims: Vec<usize> = state.layout.dims().to_vec();
    let d = f.kinetic_phases.len();
    if dims[rp] != d {
        return Err(Error::Dim(format!(
            "rotor subsystem `{rotor_label}` has dim {}, operator expects {d}",
            dims[rp]
        )));
    }
    if dims[sp] != 2 {
        return Err(Error::Dim(format!("spin subsystem `{spin_label}` must have dim 2")));
    }
    let strides = state.layout.strides();
    let (stride_r, stride_s) = (strides[rp], strides[sp]);
    let other_pos: Vec<usize> = (0..dims.len()).filter(|&p| p != rp && p != sp).collect();
    let other_off = crate::tensor::subset_offsets(&state.layout, &other_pos);

    let kick_pass = |amps: &mut [C64], adjoint: bool| {
        for (j, b) in f.kick_action.iter().enumerate() {
            let (k00, k01, k10, k11) = if adjoint {
                (b[0].conj(), b[2].conj(), b[1].conj(), b[3].conj())
            } else {
                (b[0], b[1], b[2], b[3])
            };
            for &base in &other_off {
                let i0 = base + j * stride_r;
                let i1 = i0 + stride_s;
                let (a0, a1) = (amps[i0], amps[i1]);
                amps[i0] = k00 * a0 + k01 * a1;
                amps[i1] = k10 * a0 + k11 * a1;
            }
        }
    };
    let drift_pass = |amps: &mut [C64], adjoint: bool| {
        for (idx, a) in amps.iter_mut().enumerate() {
            let bin = (idx / stride_r) % d;
            let ph = f.kinetic_phases[bin];
            *a *= if adjoint { ph.conj() } else { ph };
        }
    };

    for _ in 0..n {
        match direction {
            Direction::Forward => {
                // kick in position space, then drift in momentum space
                fourier_change_of_basis(&mut state.amps, &dims, rp, FourierDirection::Forward)?;
                kick_pass(&mut state.amps, false);
                fourier_change_of_basis(&mut state.amps, &dims, rp, FourierDirection::Inverse)?;
                drift_pass(&mut state.amps, false);
            }
            Direction::Backward => {
                drift_pass(&mut state.amps, true);
                fourier_change_of_basis(&mut state.amps, &dims, rp, FourierDirection::Forward)?;
                kick_pass(&mut state.amps, true);
                fourier_change_of_basis(&mut state.amps, &dims, rp, FourierDirection::Inverse)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Classical Chirikov map
// ---------------------------------------------------------------------------

/// Point of the classical stroboscopic map; both coordinates in [0, 2π).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChirikovState {
    pub theta: f64,
    pub p: f64,
}

fn wrap_2pi(x: f64) -> f64 {
    let t = x.rem_euclid(TWO_PI);
    if t >= TWO_PI {
        0.0
    } else {
        t
    }
}

/// One step of the standard map: p' = p + k sin θ, θ' = θ + p' (both mod 2π).
pub fn chirikov_step(s: ChirikovState, k: f64) -> ChirikovState {
    let p = wrap_2pi(s.p + k * s.theta.sin());
    let theta = wrap_2pi(s.theta + p);
    ChirikovState { theta, p }
}

/// Iterate every initial condition `iterations` times; orbit vectors hold the
/// points n = 1..iterations (the seed point is not included).
pub fn chirikov_portrait(
    k: f64,
    grid: &[ChirikovState],
    iterations: usize,
) -> Result<Vec<Vec<ChirikovState>>> {
    if iterations < 1 {
        return Err(Error::InvalidArg("iterations must be ≥ 1".into()));
    }
    let mut orbits = Vec::with_capacity(grid.len());
    for &start in grid {
        let mut orbit = Vec::with_capacity(iterations);
        let mut s = start;
        for _ in 0..iterations {
            s = chirikov_step(s, k);
            orbit.push(s);
        }
        orbits.push(orbit);
    }
    Ok(orbits)
}

/// Interior lattice of initial conditions: θ_i = 2π(i+1)/(nθ+1),
/// p_j = 2π(j+1)/(np+1), row-major in (i, j). Avoiding the separatrix-laden
/// torus boundary keeps the regular-regime spread statistics clean.
pub fn interior_grid(n_theta: usize, n_p: usize) -> Vec<ChirikovState> {
    let mut grid = Vec::with_capacity(n_theta * n_p);
    for i in 0..n_theta {
        let theta = TWO_PI * (i + 1) as f64 / (n_theta + 1) as f64;
        for j in 0..n_p {
            let p = TWO_PI * (j + 1) as f64 / (n_p + 1) as f64;
            grid.push(ChirikovState { theta, p });
        }
    }
    grid
}

/// Standard deviation of angles on the circle: signed deviations are taken
/// from the resultant-vector mean direction and wrapped into (−π, π], so a
/// tight cluster straddling 0/2π still reads as tight.
pub fn circular_std(ps: &[f64]) -> f64 {
    if ps.is_empty() {
        return 0.0;
    }
    let (ss, cs) = ps
        .iter()
        .fold((0.0f64, 0.0f64), |(s, c), &p| (s + p.sin(), c + p.cos()));
    let mu = ss.atan2(cs);
    let var = ps
        .iter()
        .map(|&p| {
            let mut d = p - mu;
            while d > PI {
                d -= TWO_PI;
            }
            while d <= -PI {
                d += TWO_PI;
            }
            d * d
        })
        .sum::<f64>()
        / ps.len() as f64;
    var.sqrt()
}

/// How many of `nbins` equal p-bins of [0, 2π) the orbit visits.
pub fn p_bins_visited(orbit: &[ChirikovState], nbins: usize) -> usize {
    let mut seen = vec![false; nbins];
    for s in orbit {
        let mut b = (s.p / TWO_PI * nbins as f64) as usize;
        if b >= nbins {
            b = nbins - 1;
        }
        seen[b] = true;
    }
    seen.iter().filter(|&&x| x).count()
}
