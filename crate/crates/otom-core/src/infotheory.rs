//! Entropic diagnostics on multi-wire states: von Neumann entropy, mutual
//! information, its conditional variant, and logarithmic negativity — all in
//! bits (base-2 logs throughout).
//!
//! The headline scrambling statistic is Δ: the ratio of the smallest to the
//! largest conditional mutual information I(a_i : c_o) over a grid of
//! butterfly angles. Δ = 1 means the butterfly angle is invisible to the
//! probe (regular dynamics); Δ → 0 means some angle destroys the correlation
//! that another angle preserves (scrambling).

use crate::error::{Error, Result};
use crate::otom::{
    assemble_conditional, conditional_ingredients, ConditionalIngredients, OtomChoi, ProcessSpec,
};
use crate::quantum::DensityMatrix;
use crate::tensor::{partial_transpose, trace_norm};

/// Eigenvalues this far below zero are treated as numerical noise and
/// clipped; anything lower flags an invalid state.
const EIG_FLOOR: f64 = -1e-9;

/// Eigenvalues at or below this threshold contribute no entropy (λ log λ → 0).
const EIG_ZERO: f64 = 1e-14;

/// Von Neumann entropy S(ρ) = −Σ λ log₂ λ in bits.
pub fn entropy(rho: &DensityMatrix) -> Result<f64> {
    let mut s = 0.0;
    for &l in &rho.eigenvalues()? {
        if l < EIG_FLOOR {
            return Err(Error::Numerical(format!(
                "entropy of a state with eigenvalue {l:.3e}"
            )));
        }
        if l > EIG_ZERO {
            s -= l * l.log2();
        }
    }
    Ok(s)
}

fn entropy_of_marginal(rho: &DensityMatrix, keep: &[&str]) -> Result<f64> {
    entropy(&rho.marginal(keep)?)
}

fn check_disjoint(groups: &[&[&str]]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for group in groups {
        if group.is_empty() {
            return Err(Error::InvalidArg("empty subsystem group".into()));
        }
        for label in *group {
            if !seen.insert(*label) {
                return Err(Error::InvalidArg(format!(
                    "label {label:?} appears in more than one group"
                )));
            }
        }
    }
    Ok(())
}

/// Quantum mutual information I(X:Y) = S(X) + S(Y) − S(XY) between two
/// disjoint groups of wires. The state is first marginalized onto X∪Y, so
/// other wires may be present. Tiny negative results (roundoff) clip to 0.
pub fn qmi(rho: &DensityMatrix, x: &[&str], y: &[&str]) -> Result<f64> {
    check_disjoint(&[x, y])?;
    let xy: Vec<&str> = x.iter().chain(y.iter()).copied().collect();
    let joint = rho.marginal(&xy)?;
    let i = entropy_of_marginal(&joint, x)? + entropy_of_marginal(&joint, y)?
        - entropy(&joint)?;
    if i < EIG_FLOOR {
        return Err(Error::Numerical(format!("mutual information {i:.3e} < 0")));
    }
    Ok(i.max(0.0))
}

/// Conditional mutual information I(X:Y|Z) = S(XZ) + S(YZ) − S(XYZ) − S(Z).
/// Non-negative by strong subadditivity; returned unclipped so tiny
/// roundoff negatives stay visible to invariant tests.
pub fn cqmi(rho: &DensityMatrix, x: &[&str], y: &[&str], z: &[&str]) -> Result<f64> {
    check_disjoint(&[x, y, z])?;
    let xz: Vec<&str> = x.iter().chain(z.iter()).copied().collect();
    let yz: Vec<&str> = y.iter().chain(z.iter()).copied().collect();
    let xyz: Vec<&str> = x.iter().chain(y.iter()).chain(z.iter()).copied().collect();
    Ok(entropy_of_marginal(rho, &xz)? + entropy_of_marginal(rho, &yz)?
        - entropy_of_marginal(rho, &xyz)?
        - entropy_of_marginal(rho, z)?)
}

/// Logarithmic negativity E = log₂ ‖ρ^{T_subset}‖₁ across the cut separating
/// `subset` from the rest, floored at 0 (PPT states have no negativity).
pub fn log_negativity(rho: &DensityMatrix, subset: &[&str]) -> Result<f64> {
    let pt = partial_transpose(rho.matrix(), rho.layout(), subset)?;
    let tn = trace_norm(&pt);
    Ok(tn.log2().max(0.0))
}

/// The correlation structure of one OTOM, wire by wire.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationReport {
    /// I(a_i : b_o) — how much the preparation imprints on the butterfly.
    pub i_ai_bo: f64,
    /// I(b_i : c_o) — how much the butterfly imprints on the measurement.
    pub i_bi_co: f64,
    /// I(a_i b_o : b_i c_o) — total correlation across the temporal cut.
    pub i_nonmarkov: f64,
    /// I(a_i : c_o | b_o b_i) — end-to-end correlation bypassing the slot.
    pub cqmi_ai_co_given_b: f64,
    /// log-negativity across the same temporal cut (entanglement in time).
    pub log_negativity: f64,
}

/// Evaluate the standard correlation measures on an OTOM.
pub fn correlation_report(choi: &OtomChoi) -> Result<CorrelationReport> {
    let rho = choi.state();
    Ok(CorrelationReport {
        i_ai_bo: qmi(rho, &["a_i"], &["b_o"])?,
        i_bi_co: qmi(rho, &["b_i"], &["c_o"])?,
        i_nonmarkov: qmi(rho, &["a_i", "b_o"], &["b_i", "c_o"])?,
        cqmi_ai_co_given_b: cqmi(rho, &["a_i"], &["c_o"], &["b_o", "b_i"])?,
        log_negativity: log_negativity(rho, &["b_i", "c_o"])?,
    })
}

/// The canonical butterfly-angle grid: nine points from 0 to π/2 in steps
/// of π/16.
pub fn standard_phi_grid() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * std::f64::consts::PI / 16.0).collect()
}

fn grid_contains(grid: &[f64], value: f64) -> bool {
    grid.iter().any(|&phi| (phi - value).abs() < 1e-12)
}

/// Probe-to-probe mutual information I(a_i : c_o) of the conditional channel
/// at each butterfly angle of `phi_grid`.
pub fn qmi_profile(process: &ProcessSpec, phi_grid: &[f64]) -> Result<Vec<f64>> {
    let ing = conditional_ingredients(process)?;
    phi_grid
        .iter()
        .map(|&phi| qmi(&assemble_conditional(&ing, phi), &["a_i"], &["c_o"]))
        .collect()
}

/// Δ = min_φ I(a_i:c_o) / max_φ I(a_i:c_o) over the grid, which must include
/// both endpoints φ = 0 and φ = π/2 (the extremes of the butterfly family).
/// If even the largest correlation is negligible (< 1e-9) the ratio is
/// defined as 1: nothing was there to destroy.
pub fn delta(process: &ProcessSpec, phi_grid: &[f64]) -> Result<f64> {
    delta_from_ingredients(&conditional_ingredients(process)?, phi_grid)
}

/// Same statistic from precomputed ingredients; this is the inner loop of
/// the kicked-rotor scan, where one ingredient set serves the whole grid.
pub fn delta_from_ingredients(ing: &ConditionalIngredients, phi_grid: &[f64]) -> Result<f64> {
    if !grid_contains(phi_grid, 0.0) || !grid_contains(phi_grid, std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArg(
            "phi grid must contain both 0 and π/2".into(),
        ));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &phi in phi_grid {
        let i = qmi(&assemble_conditional(ing, phi), &["a_i"], &["c_o"])?;
        min = min.min(i);
        max = max.max(i);
    }
    if max < 1e-9 {
        return Ok(1.0);
    }
    Ok(min / max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otom::{build_otom_choi, ButterflyTarget, Dynamics, ProcessSpec};
    use crate::quantum::{
        bell_state, haar_unitary, random_density, seeded_rng, DensityMatrix, PureState,
    };
    use crate::tensor::{c, kron, ComplexMatrix, SubsystemLayout, C64};

    fn bell_density() -> DensityMatrix {
        bell_state("x", "y", 2).unwrap().density()
    }

    #[test]
    fn pure_state_entropy_is_zero() {
        assert!(entropy(&bell_density()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_entropy_is_log_dim() {
        let layout = SubsystemLayout::new(&[("x", 2), ("y", 3)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(layout);
        assert!((entropy(&rho).unwrap() - 6.0f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn bell_pair_qmi_and_negativity() {
        let rho = bell_density();
        assert!((qmi(&rho, &["x"], &["y"]).unwrap() - 2.0).abs() < 1e-12);
        assert!((log_negativity(&rho, &["y"]).unwrap() - 1.0).abs() < 1e-12);
        // the cut is symmetric
        assert!((log_negativity(&rho, &["x"]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_no_correlations() {
        let mut rng = seeded_rng(31);
        let a = random_density(2, &mut rng).into_matrix();
        let b = random_density(3, &mut rng).into_matrix();
        let layout = SubsystemLayout::new(&[("x", 2), ("y", 3)]).unwrap();
        let rho = DensityMatrix::new(kron(&a, &b), layout).unwrap();
        assert!(qmi(&rho, &["x"], &["y"]).unwrap() < 1e-10);
        assert!(log_negativity(&rho, &["y"]).unwrap() < 1e-10);
    }

    #[test]
    fn werner_state_frozen_values() {
        // ρ = p|ψ⁻⟩⟨ψ⁻| + (1−p)·1/4 at p = 3/4
        let p = 0.75;
        let s = 1.0 / 2.0f64.sqrt();
        let psim = PureState::new(
            vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)],
            SubsystemLayout::new(&[("x", 2), ("y", 2)]).unwrap(),
        )
        .unwrap();
        let mut m = psim.density().into_matrix().scale(c(p, 0.0));
        m.add_assign_scaled(&ComplexMatrix::identity(4), c((1.0 - p) / 4.0, 0.0));
        let rho =
            DensityMatrix::new(m, SubsystemLayout::new(&[("x", 2), ("y", 2)]).unwrap()).unwrap();
        assert!((entropy(&rho).unwrap() - 0.9933927290103628).abs() < 1e-12);
        assert!((qmi(&rho, &["x"], &["y"]).unwrap() - 1.0066072709896372).abs() < 1e-12);
        assert!((log_negativity(&rho, &["y"]).unwrap() - 0.7004397181410917).abs() < 1e-12);
    }

    #[test]
    fn ghz_correlations() {
        let layout = SubsystemLayout::new(&[("x", 2), ("y", 2), ("z", 2)]).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let mut amps = vec![C64::default(); 8];
        amps[0] = c(s, 0.0);
        amps[7] = c(s, 0.0);
        let rho = PureState::new(amps, layout).unwrap().density();
        assert!((qmi(&rho, &["x"], &["y"]).unwrap() - 1.0).abs() < 1e-12);
        // tracing z leaves a classically correlated pair with no
        // entanglement; conditioning on z keeps one bit of correlation
        assert!((cqmi(&rho, &["x"], &["y"], &["z"]).unwrap() - 1.0).abs() < 1e-10);
        assert!(log_negativity(&rho.marginal(&["x", "y"]).unwrap(), &["y"]).unwrap() < 1e-10);
        // against the full cut the state is maximally entangled
        assert!((log_negativity(&rho, &["y", "z"]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_subadditivity_on_random_states() {
        let mut rng = seeded_rng(37);
        for _ in 0..5 {
            let m = random_density(8, &mut rng).into_matrix();
            let layout = SubsystemLayout::new(&[("x", 2), ("y", 2), ("z", 2)]).unwrap();
            let rho = DensityMatrix::new(m, layout).unwrap();
            let v = cqmi(&rho, &["x"], &["y"], &["z"]).unwrap();
            assert!(v >= -1e-9, "SSA violated: {v:.3e}");
        }
    }

    #[test]
    fn disjointness_is_enforced() {
        let rho = bell_density();
        assert!(qmi(&rho, &["x"], &["x"]).is_err());
        let layout = SubsystemLayout::new(&[("x", 2), ("y", 2), ("z", 2)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(layout);
        assert!(cqmi(&rho, &["x"], &["y"], &["x"]).is_err());
        assert!(qmi(&rho, &[], &["y"]).is_err());
    }

    #[test]
    fn trivial_process_report() {
        let layout = SubsystemLayout::single("sys", 2).unwrap();
        let process = ProcessSpec {
            forward: Dynamics::Unitary(ComplexMatrix::identity(4)),
            rho_s: PureState::basis(layout, 0).unwrap().density(),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        let choi = build_otom_choi(&process).unwrap();
        let report = correlation_report(&choi).unwrap();
        // two independent Bell pairs: full marginal correlation, nothing
        // across the temporal cut, perfectly Markovian
        assert!((report.i_ai_bo - 2.0).abs() < 1e-10);
        assert!((report.i_bi_co - 2.0).abs() < 1e-10);
        assert!(report.i_nonmarkov.abs() < 1e-10);
        assert!(report.cqmi_ai_co_given_b.abs() < 1e-10);
        assert!(report.log_negativity.abs() < 1e-10);
    }

    #[test]
    fn interacting_process_is_nonmarkovian() {
        let mut rng = seeded_rng(41);
        let process = ProcessSpec {
            forward: Dynamics::Unitary(haar_unitary(8, &mut rng)),
            rho_s: random_density(4, &mut rng),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        let report = correlation_report(&build_otom_choi(&process).unwrap()).unwrap();
        assert!(report.i_nonmarkov > 0.1);
        assert!(report.log_negativity > 0.01);
    }

    #[test]
    fn delta_grid_needs_endpoints() {
        let layout = SubsystemLayout::single("sys", 2).unwrap();
        let process = ProcessSpec {
            forward: Dynamics::Unitary(ComplexMatrix::identity(4)),
            rho_s: PureState::basis(layout, 0).unwrap().density(),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        assert!(delta(&process, &[0.0, 0.5]).is_err());
        assert!(delta(&process, &[0.5, std::f64::consts::FRAC_PI_2]).is_err());
        assert!(delta(&process, &standard_phi_grid()).is_ok());
    }

    #[test]
    fn delta_limits() {
        let mut rng = seeded_rng(43);
        // non-interacting dynamics: the butterfly never reaches the probe,
        // I(a_i:c_o) = 2 bits at every angle, Δ = 1
        let free = ProcessSpec {
            forward: Dynamics::Unitary(kron(
                &haar_unitary(2, &mut rng),
                &haar_unitary(3, &mut rng),
            )),
            rho_s: random_density(3, &mut rng),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        let grid = standard_phi_grid();
        let profile = qmi_profile(&free, &grid).unwrap();
        for v in &profile {
            assert!((v - 2.0).abs() < 1e-9);
        }
        assert!((delta(&free, &grid).unwrap() - 1.0).abs() < 1e-12);
        // generic interacting dynamics: strictly between 0 and 1
        let chaotic = ProcessSpec {
            forward: Dynamics::Unitary(haar_unitary(6, &mut rng)),
            rho_s: random_density(3, &mut rng),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        let d = delta(&chaotic, &grid).unwrap();
        assert!(d > 0.0 && d < 1.0, "delta = {d}");
    }
}
