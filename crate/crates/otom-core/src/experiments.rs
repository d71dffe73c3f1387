//! The two headline numerical studies, plus the curve fitting and smoothing
//! they need.
//!
//! Haar scaling: draw a Haar-random joint unitary on probe ⊗ system for a
//! ladder of system dimensions and track how the OTOM's correlation measures
//! scale. Local (wire-pair) mutual information dies off as a power law in
//! the system dimension while the global temporal-cut correlation survives —
//! that separation is the scrambling fingerprint.
//!
//! Kicked rotor: Δ(t) for the spin-coupled rotor across kick strengths,
//! butterflying either the probe spin or one momentum bit. Work grows as
//! O(T²) single-kick applications via the incremental ingredient scan.

use crate::error::{Error, Result};
use crate::infotheory::{correlation_report, delta, delta_from_ingredients};
use crate::kicked_rotor::{floquet_splitstep, QkrParams};
use crate::otom::{
    build_otom_choi, scan_conditional_ingredients, ButterflyTarget, Dynamics, ProcessSpec,
};
use crate::quantum::{derive_seed, haar_unitary, seeded_rng, DensityMatrix, PureState};
use crate::tensor::SubsystemLayout;
use rayon::prelude::*;
use serde::Serialize;

/// Initial system state for the Haar study. Pure |0⟩ is the default: the
/// Haar average washes out the basis choice anyway, and a pure start keeps
/// the wire-pair correlations on their steepest decay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SystemState {
    #[default]
    Pure0,
    MaximallyMixed,
}

impl SystemState {
    fn realize(&self, dim: usize) -> Result<DensityMatrix> {
        let layout = SubsystemLayout::single("s", dim)?;
        Ok(match self {
            SystemState::Pure0 => PureState::basis(layout, 0)?.density(),
            SystemState::MaximallyMixed => DensityMatrix::maximally_mixed(layout),
        })
    }
}

/// Configuration of the Haar-random scaling study.
#[derive(Clone, Debug)]
pub struct HaarScalingConfig {
    /// System dimensions N to sweep, ascending (probe is always a qubit, so
    /// the random unitary acts on dimension 2N).
    pub system_dims: Vec<usize>,
    pub samples_per_dim: usize,
    pub seed: u64,
    pub phi_grid: Vec<f64>,
    pub system_state: SystemState,
}

impl HaarScalingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.system_dims.is_empty() {
            return Err(Error::InvalidArg("system_dims must be non-empty".into()));
        }
        if !self.system_dims.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArg(
                "system_dims must be strictly ascending".into(),
            ));
        }
        if self.system_dims[0] < 1 {
            return Err(Error::InvalidArg("system dims must be ≥ 1".into()));
        }
        if self.samples_per_dim < 1 {
            return Err(Error::InvalidArg("samples_per_dim must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// The six observables recorded per Haar draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Observable {
    IAiBo,
    IBiCo,
    INonmarkov,
    CqmiAiCoGivenB,
    LogNegativity,
    Delta,
}

impl Observable {
    pub const ALL: [Observable; 6] = [
        Observable::IAiBo,
        Observable::IBiCo,
        Observable::INonmarkov,
        Observable::CqmiAiCoGivenB,
        Observable::LogNegativity,
        Observable::Delta,
    ];

    /// Column token used in emitted tables.
    pub fn label(&self) -> &'static str {
        match self {
            Observable::IAiBo => "i_ai_bo",
            Observable::IBiCo => "i_bi_co",
            Observable::INonmarkov => "i_nonmarkov",
            Observable::CqmiAiCoGivenB => "cqmi_ai_co_given_b",
            Observable::LogNegativity => "log_negativity",
            Observable::Delta => "delta",
        }
    }
}

/// One aggregated row of the Haar study: an observable's sample mean and
/// standard error at one system dimension.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HaarScalingRow {
    pub system_dim: usize,
    pub observable: Observable,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-work-item progress sink: receives a short human-readable line as each
/// independent unit of work completes.
pub type Progress<'a> = Option<&'a (dyn Fn(&str) + Sync)>;

/// Sweep system dimensions, drawing `samples_per_dim` Haar unitaries per
/// dimension and recording all six observables. Every sample runs under its
/// own counter-derived RNG and samples are reduced in index order, so the
/// output is identical for any worker count.
pub fn run_haar_scaling(cfg: &HaarScalingConfig) -> Result<Vec<HaarScalingRow>> {
    run_haar_scaling_with_progress(cfg, None)
}

/// [`run_haar_scaling`] with a progress line per completed sample.
pub fn run_haar_scaling_with_progress(
    cfg: &HaarScalingConfig,
    progress: Progress,
) -> Result<Vec<HaarScalingRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (dim_idx, &n) in cfg.system_dims.iter().enumerate() {
        let samples: Vec<[f64; 6]> = (0..cfg.samples_per_dim)
            .into_par_iter()
            .map(|s| -> Result<[f64; 6]> {
                let item = (dim_idx * cfg.samples_per_dim + s) as u64;
                let mut rng = seeded_rng(derive_seed(cfg.seed, item));
                let u = haar_unitary(2 * n, &mut rng);
                let process = ProcessSpec {
                    forward: Dynamics::Unitary(u),
                    rho_s: cfg.system_state.realize(n)?,
                    probe_dim: 2,
                    target: ButterflyTarget::Probe,
                };
                let report = correlation_report(&build_otom_choi(&process)?)?;
                let d = delta(&process, &cfg.phi_grid)?;
                if let Some(p) = progress {
                    p(&format!(
                        "haar N={n} sample {}/{}",
                        s + 1,
                        cfg.samples_per_dim
                    ));
                }
                Ok([
                    report.i_ai_bo,
                    report.i_bi_co,
                    report.i_nonmarkov,
                    report.cqmi_ai_co_given_b,
                    report.log_negativity,
                    d,
                ])
            })
            .collect::<Result<_>>()?;
        for (k, obs) in Observable::ALL.iter().enumerate() {
            let values: Vec<f64> = samples.iter().map(|row| row[k]).collect();
            let (mean, stderr) = mean_stderr(&values);
            rows.push(HaarScalingRow {
                system_dim: n,
                observable: *obs,
                mean,
                stderr,
                samples: cfg.samples_per_dim,
            });
        }
    }
    Ok(rows)
}

/// Configuration of the kicked-rotor Δ(t) study.
#[derive(Clone, Debug)]
pub struct QkrDeltaConfig {
    pub params: QkrParams,
    pub kicks_max: usize,
    pub targets: Vec<ButterflyTarget>,
    pub phi_grid: Vec<f64>,
    /// Moving-average window for the smoothed series; odd, ≥ 1.
    pub smoothing_window: usize,
}

impl QkrDeltaConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.kicks_max < 1 {
            return Err(Error::InvalidArg("kicks_max must be ≥ 1".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidArg("at least one butterfly target".into()));
        }
        if self.smoothing_window.is_multiple_of(2) || self.smoothing_window > self.kicks_max {
            return Err(Error::InvalidArg(format!(
                "smoothing window must be odd and ≤ kicks_max, got {}",
                self.smoothing_window
            )));
        }
        Ok(())
    }
}

/// One (target, kick count) entry of the Δ(t) study.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QkrDeltaRow {
    #[serde(skip)]
    pub target: ButterflyTarget,
    pub kicks: usize,
    pub delta_raw: f64,
    pub delta_smoothed: f64,
}

/// Δ(t) for t = 1..=kicks_max at every configured target, raw and smoothed.
/// The rotor starts in the zero-momentum state; the probe is the spin,
/// purified by the OTOM construction itself.
pub fn run_qkr_delta(cfg: &QkrDeltaConfig) -> Result<Vec<QkrDeltaRow>> {
    run_qkr_delta_with_progress(cfg, None)
}

/// [`run_qkr_delta`] with a progress line per completed kick count.
pub fn run_qkr_delta_with_progress(
    cfg: &QkrDeltaConfig,
    progress: Progress,
) -> Result<Vec<QkrDeltaRow>> {
    cfg.validate()?;
    let floquet = floquet_splitstep(&cfg.params)?;
    let rho_s = {
        let layout = SubsystemLayout::single("s", cfg.params.dim_rotor())?;
        PureState::basis(layout, 0)?.density()
    };
    let per_target: Vec<Vec<QkrDeltaRow>> = cfg
        .targets
        .par_iter()
        .map(|&target| -> Result<Vec<QkrDeltaRow>> {
            let process = ProcessSpec {
                forward: Dynamics::Kicked {
                    floquet: floquet.clone(),
                    kicks: cfg.kicks_max,
                },
                rho_s: rho_s.clone(),
                probe_dim: 2,
                target,
            };
            let mut raw = Vec::with_capacity(cfg.kicks_max);
            scan_conditional_ingredients(&process, |t, ing| {
                raw.push(delta_from_ingredients(ing, &cfg.phi_grid)?);
                if let Some(p) = progress {
                    p(&format!(
                        "qkr k={} target={} t={t}/{}",
                        cfg.params.k,
                        target.label(),
                        cfg.kicks_max
                    ));
                }
                Ok(())
            })?;
            let smoothed = moving_average(&raw, cfg.smoothing_window)?;
            Ok(raw
                .iter()
                .zip(&smoothed)
                .enumerate()
                .map(|(idx, (&r, &s))| QkrDeltaRow {
                    target,
                    kicks: idx + 1,
                    delta_raw: r,
                    delta_smoothed: s,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_target.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Fitting and smoothing
// ---------------------------------------------------------------------------

/// Fitted model with its constants.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "model")]
pub enum FitModel {
    /// y = α x^{−β}
    PowerLaw { alpha: f64, beta: f64 },
    /// y = ξ + δ exp(−γ x^{0.6}), exponent fixed
    PlateauStretchedExp {
        xi: f64,
        delta: f64,
        gamma: f64,
        /// false when δ ≈ 0 leaves γ unconstrained by the data
        gamma_identifiable: bool,
    },
}

/// A fit plus its RMS residual (log space for the power law, linear space
/// for the plateau model).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub model: FitModel,
    pub residual: f64,
}

/// Least squares for y = α x^{−β} on (log x, log y).
pub fn fit_powerlaw(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArg("xs and ys lengths differ".into()));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArg("power-law fit needs ≥ 3 points".into()));
    }
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return Err(Error::InvalidArg(
            "power-law fit needs strictly positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx < 1e-300 {
        return Err(Error::InvalidArg("xs must not be all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    Ok(FitResult {
        model: FitModel::PowerLaw {
            alpha: intercept.exp(),
            beta: -slope,
        },
        residual: (ss / n).sqrt(),
    })
}

/// One Levenberg–Marquardt descent for the plateau model from a given start.
/// Returns the parameters, RMS residual, and whether it converged.
fn lm_plateau(us: &[f64], ys: &[f64], start: [f64; 3]) -> ([f64; 3], f64, bool) {
    let n = us.len();
    let mut p = start;
    p[2] = p[2].max(0.0);
    let cost_of = |p: &[f64; 3]| -> f64 {
        us.iter()
            .zip(ys)
            .map(|(&u, &y)| (p[0] + p[1] * (-p[2] * u).exp() - y).powi(2))
            .sum()
    };
    let mut cost = cost_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..300 {
        // gradient g = Jᵀr and normal matrix H = JᵀJ; rows of J are
        // (1, e^{−γu}, −δ u e^{−γu})
        let mut g = [0.0f64; 3];
        let mut h = [[0.0f64; 3]; 3];
        for (&u, &y) in us.iter().zip(ys) {
            let e = (-p[2] * u).exp();
            let r = p[0] + p[1] * e - y;
            let j = [1.0, e, -p[1] * u * e];
            for a in 0..3 {
                g[a] += j[a] * r;
                for b in 0..3 {
                    h[a][b] += j[a] * j[b];
                }
            }
        }
        let scale = 1.0 + cost;
        if g.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-12 * scale {
            converged = true;
            break;
        }
        // damped 3×3 solve (H + λ diag H) step = −g by Gaussian elimination
        let mut a = h;
        for (d, row) in a.iter_mut().enumerate() {
            row[d] += lambda * h[d][d].max(1e-12);
        }
        let mut b = [-g[0], -g[1], -g[2]];
        let mut singular = false;
        for col in 0..3 {
            let piv = (col..3)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            if a[piv][col].abs() < 1e-300 {
                singular = true;
                break;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for row in (col + 1)..3 {
                let f = a[row][col] / a[col][col];
                for (k, ak) in a[col].into_iter().enumerate().skip(col) {
                    a[row][k] -= f * ak;
                }
                b[row] -= f * b[col];
            }
        }
        if singular {
            lambda = (lambda * 4.0).min(1e12);
            continue;
        }
        let mut step = [0.0f64; 3];
        for row in (0..3).rev() {
            let mut acc = b[row];
            for k in (row + 1)..3 {
                acc -= a[row][k] * step[k];
            }
            step[row] = acc / a[row][row];
        }
        let mut cand = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).max(0.0)];
        let cand_cost = cost_of(&cand);
        if cand_cost < cost {
            let rel_drop = (cost - cand_cost) / scale;
            let step_size = step.iter().map(|v| v.abs()).fold(0.0, f64::max);
            std::mem::swap(&mut p, &mut cand);
            cost = cand_cost;
            lambda = (lambda / 3.0).max(1e-12);
            if rel_drop < 1e-14 && step_size < 1e-10 * (1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e12 {
                // stuck: treat the current point as final
                converged = true;
                break;
            }
        }
    }
    (p, (cost / n as f64).sqrt(), converged)
}

/// Nonlinear least squares for y = ξ + δ exp(−γ x^{0.6}) with γ ≥ 0 and the
/// stretching exponent held fixed. Eight deterministic starts feed a
/// Levenberg–Marquardt loop; the best converged fit wins.
pub fn fit_plateau_stretched_exp(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArg("xs and ys lengths differ".into()));
    }
    if xs.len() < 4 {
        return Err(Error::InvalidArg("plateau fit needs ≥ 4 points".into()));
    }
    if xs.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArg("plateau fit needs xs ≥ 0".into()));
    }
    let us: Vec<f64> = xs.iter().map(|x| x.powf(0.6)).collect();
    let n = ys.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let yscale = ymax.abs().max(ymin.abs()).max(1e-30);
    // flat data: the plateau is the mean and γ is meaningless
    if ymax - ymin <= 1e-12 * yscale {
        let ss: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
        return Ok(FitResult {
            model: FitModel::PlateauStretchedExp {
                xi: mean,
                delta: 0.0,
                gamma: 0.0,
                gamma_identifiable: false,
            },
            residual: (ss / n as f64).sqrt(),
        });
    }
    let tail_len = (n / 4).max(1);
    let tail = ys[n - tail_len..].iter().sum::<f64>() / tail_len as f64;
    let head = ys[0];
    let starts: [[f64; 3]; 8] = [
        [tail, head - tail, 0.005],
        [tail, head - tail, 0.05],
        [tail, head - tail, 0.2],
        [tail, head - tail, 0.5],
        [tail, head - tail, 1.5],
        [tail, head - tail, 5.0],
        [mean, ymax - ymin, 0.3],
        [ymin, ymax - ymin, 0.05],
    ];
    let mut best: Option<([f64; 3], f64)> = None;
    let mut best_any = f64::INFINITY;
    for start in starts {
        let (p, rms, converged) = lm_plateau(&us, ys, start);
        best_any = best_any.min(rms);
        if converged && best.as_ref().is_none_or(|(_, b)| rms < *b) {
            best = Some((p, rms));
        }
    }
    let (p, rms) = best.ok_or_else(|| {
        Error::Numerical(format!(
            "plateau fit failed to converge from any start (best residual {best_any:.3e})"
        ))
    })?;
    let gamma_identifiable = p[1].abs() > 1e-10 * yscale;
    Ok(FitResult {
        model: FitModel::PlateauStretchedExp {
            xi: p[0],
            delta: p[1],
            gamma: p[2],
            gamma_identifiable,
        },
        residual: rms,
    })
}

/// Centered moving average with windows truncated at the boundaries: entry i
/// averages indices max(0, i−h) ..= min(n−1, i+h) for half-width h.
pub fn moving_average(ys: &[f64], window: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::InvalidArg(format!(
            "window must be odd and ≥ 1, got {window}"
        )));
    }
    if window > ys.len() {
        return Err(Error::InvalidArg(format!(
            "window {window} exceeds series length {}",
            ys.len()
        )));
    }
    let h = window / 2;
    let n = ys.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            ys[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}
