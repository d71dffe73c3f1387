//! The out-of-time-order matrix (OTOM): Choi representation of the process
//! that runs system+probe forward, exposes one intermediate slot on a chosen
//! target, runs backward, and hands the probe back.
//!
//! Wire order is fixed everywhere as [a_i, b_o, b_i, c_o]: preparation input,
//! butterfly output, butterfly input, measurement output. The conditional
//! channel for a butterfly B is the contraction of the middle wires with B's
//! Choi matrix, renormalized.
//!
//! Convention notes (each pinned by an equivalence test):
//! * the contraction normalization is defined so that `contract_choi` equals
//!   `compose_direct`, the unambiguous operational composition;
//! * the Heisenberg butterfly generator is Z_t = U_t† (σ_z ⊗ 1) U_t — the
//!   other dagger placement fails the same equivalence (see the calibration
//!   test).

use crate::error::{Error, Result};
use crate::kicked_rotor::{evolve_kicks, Direction, FloquetOperator};
use crate::quantum::{
    apply_unitary, bell_state, instrument_choi, swap_subsystems, DensityMatrix, Instrument,
    PureState,
};
use crate::tensor::{c, kron, reorder_subsystems, ComplexMatrix, SubsystemLayout, C64};

/// The four OTOM wire labels, in storage order.
pub const WIRES: [&str; 4] = ["a_i", "b_o", "b_i", "c_o"];

/// Where the butterfly slot sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ButterflyTarget {
    /// The whole probe (dimension = probe_dim).
    Probe,
    /// One binary digit of the system index (dimension 2); bit 0 is the
    /// least significant digit, so for a rotor it selects momentum parity.
    SystemQubit(usize),
}

/// Forward dynamics of probe ⊗ system (probe index most significant).
#[derive(Clone, Debug)]
pub enum Dynamics {
    /// Explicit unitary matrix.
    Unitary(ComplexMatrix),
    /// `kicks` applications of a structured Floquet operator; the probe is
    /// the rotor spin.
    Kicked {
        floquet: FloquetOperator,
        kicks: usize,
    },
}

impl Dynamics {
    /// Materialize the dense joint unitary (probe-major). For the kicked
    /// variant this costs one propagation per basis column, so it is gated
    /// to small dimensions — it exists for oracles and dumps, not production.
    pub fn dense_matrix(&self, probe_dim: usize, system_dim: usize) -> Result<ComplexMatrix> {
        match self {
            Dynamics::Unitary(u) => Ok(u.clone()),
            Dynamics::Kicked { floquet, kicks } => {
                let n = probe_dim * system_dim;
                if n > 512 {
                    return Err(Error::InvalidArg(format!(
                        "dense materialization of a {n}-dim kicked propagator refused"
                    )));
                }
                let layout = SubsystemLayout::new(&[("p", probe_dim), ("s", system_dim)])?;
                let mut out = ComplexMatrix::zeros(n, n);
                for col in 0..n {
                    let mut st = PureState::basis(layout.clone(), col)?;
                    evolve_kicks(&mut st, floquet, *kicks, Direction::Forward, "s", "p")?;
                    for row in 0..n {
                        out.set(row, col, st.amps[row]);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Everything that defines one out-of-time-order process: the dynamics, the
/// initial system state, the probe dimension, and the butterfly target.
#[derive(Clone, Debug)]
pub struct ProcessSpec {
    pub forward: Dynamics,
    pub rho_s: DensityMatrix,
    pub probe_dim: usize,
    pub target: ButterflyTarget,
}

impl ButterflyTarget {
    /// Stable short token for file names and table columns.
    pub fn label(&self) -> String {
        match self {
            ButterflyTarget::Probe => "probe".into(),
            ButterflyTarget::SystemQubit(b) => format!("sysbit{b}"),
        }
    }
}

impl ProcessSpec {
    pub fn system_dim(&self) -> usize {
        self.rho_s.dim()
    }

    /// Dimension of the butterfly wires b_o/b_i.
    pub fn target_dim(&self) -> usize {
        match self.target {
            ButterflyTarget::Probe => self.probe_dim,
            ButterflyTarget::SystemQubit(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (dp, ds) = (self.probe_dim, self.system_dim());
        if dp < 2 {
            return Err(Error::InvalidArg("probe_dim must be ≥ 2".into()));
        }
        match &self.forward {
            Dynamics::Unitary(u) => {
                if !u.is_square() || u.rows != dp * ds {
                    return Err(Error::Dim(format!(
                        "dynamics on dim {} but probe×system = {}",
                        u.rows,
                        dp * ds
                    )));
                }
                let defect = u.unitarity_defect();
                if defect > 1e-10 {
                    return Err(Error::InvalidArg(format!(
                        "dynamics is not unitary (defect {defect:.3e})"
                    )));
                }
            }
            Dynamics::Kicked { floquet, .. } => {
                if floquet.kinetic_phases.len() != ds {
                    return Err(Error::Dim(format!(
                        "floquet rotor dim {} but rho_s dim {ds}",
                        floquet.kinetic_phases.len()
                    )));
                }
                if dp != 2 {
                    return Err(Error::InvalidArg(
                        "kicked dynamics carries a spin-1/2 probe".into(),
                    ));
                }
            }
        }
        if let ButterflyTarget::SystemQubit(b) = self.target {
            if !ds.is_power_of_two() || (1usize << (b + 1)) > ds {
                return Err(Error::InvalidArg(format!(
                    "system qubit {b} needs a power-of-two system dim > {}, got {ds}",
                    (1usize << (b + 1)) - 1
                )));
            }
        }
        Ok(())
    }

    /// Eigen-ensemble of ρ_S: (weight, amplitude vector) with negligible
    /// weights dropped. Construction by pure states is exact by linearity.
    fn system_ensemble(&self) -> Result<Vec<(f64, Vec<C64>)>> {
        let eig = crate::tensor::herm_eigen(self.rho_s.matrix())?;
        let d = self.system_dim();
        let mut out = Vec::new();
        for (k, &w) in eig.eigenvalues.iter().enumerate() {
            if w <= 1e-14 {
                continue;
            }
            let vec: Vec<C64> = (0..d).map(|r| eig.eigenvectors.at(r, k)).collect();
            out.push((w, vec));
        }
        if out.is_empty() {
            return Err(Error::InvalidDensity("rho_s has no positive weight".into()));
        }
        Ok(out)
    }
}

/// Validated OTOM Choi state on wires [a_i, b_o, b_i, c_o].
#[derive(Clone, Debug)]
pub struct OtomChoi {
    state: DensityMatrix,
    probe_dim: usize,
    target_dim: usize,
}

impl OtomChoi {
    /// Wrap a density matrix whose layout carries exactly the four OTOM
    /// wires with matching paired dimensions.
    pub fn new(state: DensityMatrix) -> Result<Self> {
        let layout = state.layout();
        if layout.labels() != WIRES.to_vec() {
            return Err(Error::InvalidArg(format!(
                "expected wires {WIRES:?}, got {:?}",
                layout.labels()
            )));
        }
        let dims = layout.dims();
        if dims[0] != dims[3] || dims[1] != dims[2] {
            return Err(Error::Dim(format!("unpaired wire dims {dims:?}")));
        }
        Ok(OtomChoi {
            probe_dim: dims[0],
            target_dim: dims[1],
            state,
        })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }
}

// ---------------------------------------------------------------------------
// Operational construction
// ---------------------------------------------------------------------------

/// Run the dynamics (or its adjoint) on the probe/system registers of a
/// working state labelled "p" and "s".
fn apply_dynamics(state: &mut PureState, process: &ProcessSpec, dir: Direction) -> Result<()> {
    match &process.forward {
        Dynamics::Unitary(u) => match dir {
            Direction::Forward => apply_unitary(state, u, &["p", "s"]),
            Direction::Backward => apply_unitary(state, &u.dagger(), &["p", "s"]),
        },
        Dynamics::Kicked { floquet, kicks } => {
            evolve_kicks(state, floquet, *kicks, dir, "s", "p")
        }
    }
}

/// Swap the butterfly target with the register holding wire b_o. For a
/// system-bit target the system factor is split around the chosen binary
/// digit first (a pure relabeling) and merged back after.
fn swap_target(state: &mut PureState, process: &ProcessSpec, reg: &str) -> Result<()> {
    match process.target {
        ButterflyTarget::Probe => swap_subsystems(state, "p", reg),
        ButterflyTarget::SystemQubit(b) => {
            let ds = process.system_dim();
            let (hi, lo) = (ds >> (b + 1), 1usize << b);
            state.split("s", &[("s_hi", hi), ("s_bit", 2), ("s_lo", lo)])?;
            swap_subsystems(state, "s_bit", reg)?;
            state.merge(&["s_hi", "s_bit", "s_lo"], "s")
        }
    }
}

/// Build the OTOM by the operational recipe: Bell-pair the probe with an
/// ancilla, run forward, park the target's state in a fresh Bell pair
/// (swap with R1, so R1 carries b_o and R2 carries b_i), run backward,
/// trace out the system. The ancilla is wire a_i and the probe wire c_o.
pub fn build_otom_choi(process: &ProcessSpec) -> Result<OtomChoi> {
    process.validate()?;
    let dp = process.probe_dim;
    let dt = process.target_dim();
    let n = dp * dt * dt * dp;
    let mut acc = ComplexMatrix::zeros(n, n);
    let mut acc_layout = None;
    for (w, sys_vec) in process.system_ensemble()? {
        let sys = PureState::new(
            sys_vec,
            SubsystemLayout::single("s", process.system_dim())?,
        )?;
        let mut st = bell_state("a", "p", dp)?
            .tensor(&sys)?
            .tensor(&bell_state("r1", "r2", dt)?)?;
        apply_dynamics(&mut st, process, Direction::Forward)?;
        swap_target(&mut st, process, "r1")?;
        apply_dynamics(&mut st, process, Direction::Backward)?;
        let part = crate::quantum::outer_partial(&st, &["a", "p", "r1", "r2"])?;
        acc.add_assign_scaled(part.matrix(), c(w, 0.0));
        acc_layout = Some(part.layout().clone());
    }
    let layout = acc_layout.expect("ensemble is non-empty");
    let (reordered, _) = reorder_subsystems(&acc, &layout, &["a", "r1", "r2", "p"])?;
    let wires = SubsystemLayout::new(&[
        ("a_i", dp),
        ("b_o", dt),
        ("b_i", dt),
        ("c_o", dp),
    ])?;
    OtomChoi::new(DensityMatrix::new(reordered, wires)?)
}

// ---------------------------------------------------------------------------
// Direct composition and contraction
// ---------------------------------------------------------------------------

fn extend_on_probe(x: &ComplexMatrix, ds: usize) -> ComplexMatrix {
    kron(x, &ComplexMatrix::identity(ds))
}

fn extend_on_target(x: &ComplexMatrix, process: &ProcessSpec) -> ComplexMatrix {
    match process.target {
        ButterflyTarget::Probe => extend_on_probe(x, process.system_dim()),
        ButterflyTarget::SystemQubit(b) => {
            let ds = process.system_dim();
            let (hi, lo) = (ds >> (b + 1), 1usize << b);
            let head = ComplexMatrix::identity(process.probe_dim * hi);
            kron(&kron(&head, x), &ComplexMatrix::identity(lo))
        }
    }
}

fn apply_pairs_extended(
    inst: &Instrument,
    extend: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    rho: &ComplexMatrix,
) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.rows, rho.cols);
    for (l, r) in &inst.pairs {
        let le = extend(l);
        let re = extend(r);
        out.add_assign_scaled(&le.mul(rho).mul(&re.dagger()), c(1.0, 0.0));
    }
    out
}

/// tr(C ∘ U_t† ∘ B ∘ U_t ∘ A [ρ_P ⊗ ρ_S]) with ρ_P = 1/probe_dim — the
/// operational multi-time composition, dense all the way. Ground truth for
/// every contraction convention in this module.
pub fn compose_direct(
    process: &ProcessSpec,
    a: &Instrument,
    b: &Instrument,
    c_inst: &Instrument,
) -> Result<C64> {
    let probe = ComplexMatrix::identity(process.probe_dim)
        .scale(c(1.0 / process.probe_dim as f64, 0.0));
    compose_direct_with_probe(process, &probe, a, b, c_inst)
}

/// Same composition with an explicit probe input state.
pub fn compose_direct_with_probe(
    process: &ProcessSpec,
    rho_p: &ComplexMatrix,
    a: &Instrument,
    b: &Instrument,
    c_inst: &Instrument,
) -> Result<C64> {
    process.validate()?;
    let (dp, ds, dt) = (process.probe_dim, process.system_dim(), process.target_dim());
    if a.dim_in != dp || a.dim_out != dp || c_inst.dim_in != dp || c_inst.dim_out != dp {
        return Err(Error::Dim("A and C must act on the probe dimension".into()));
    }
    if b.dim_in != dt || b.dim_out != dt {
        return Err(Error::Dim("B must act on the target dimension".into()));
    }
    if rho_p.rows != dp || rho_p.cols != dp {
        return Err(Error::Dim("probe state dimension mismatch".into()));
    }
    let u = process.forward.dense_matrix(dp, ds)?;
    let mut rho = kron(rho_p, process.rho_s.matrix());
    rho = apply_pairs_extended(a, |x| extend_on_probe(x, ds), &rho);
    rho = u.mul(&rho).mul(&u.dagger());
    rho = apply_pairs_extended(b, |x| extend_on_target(x, process), &rho);
    rho = u.dagger().mul(&rho).mul(&u);
    rho = apply_pairs_extended(c_inst, |x| extend_on_probe(x, ds), &rho);
    Ok(rho.trace())
}

/// The conventional OTOC F(t) = tr[W_t V W_t† V† ρ] with W_t = U†WU; all
/// operators live on the full probe ⊗ system space.
pub fn otoc_direct(
    u: &ComplexMatrix,
    rho: &DensityMatrix,
    v: &ComplexMatrix,
    w: &ComplexMatrix,
) -> Result<C64> {
    let n = rho.dim();
    for m in [u, v, w] {
        if !m.is_square() || m.rows != n {
            return Err(Error::Dim("otoc operators must match the state dimension".into()));
        }
    }
    let wt = u.dagger().mul(w).mul(u);
    Ok(wt
        .mul(v)
        .mul(&wt.dagger())
        .mul(&v.dagger())
        .mul(rho.matrix())
        .trace())
}

/// Instrument Choi reshuffled from (out, in) to (in, out) ordering.
fn reorder_in_out(choi_hat: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut out = ComplexMatrix::zeros(n, n);
    for o in 0..d {
        for j in 0..d {
            for op in 0..d {
                for k in 0..d {
                    out.data[(j * d + o) * n + (k * d + op)] =
                        choi_hat.data[(o * d + j) * n + (op * d + k)];
                }
            }
        }
    }
    out
}

/// The (b_i, b_o)-ordered, transposed butterfly Choi that contracts directly
/// against the OTOM's middle wires.
fn butterfly_contraction_kernel(b: &Instrument) -> ComplexMatrix {
    reorder_in_out(&instrument_choi(b), b.dim_in).transpose()
}

/// Multi-time expectation by wire contraction:
/// d_T · tr[Υ · (M_Aᵀ ⊗ Θ(Υ̂_B) ⊗ M_Cᵀ)], with M_A = tr_in Υ̂_A,
/// M_C = tr_out Υ̂_C, and Θ the (in,out)-reorder followed by a transpose.
/// The reductions of A and C absorb the dropped preparation-input wire and
/// the traced-out measurement wire; the overall factor is fixed by the
/// equivalence with [`compose_direct`].
pub fn contract_choi(
    choi: &OtomChoi,
    a: &Instrument,
    b: &Instrument,
    c_inst: &Instrument,
) -> Result<C64> {
    let (dp, dt) = (choi.probe_dim, choi.target_dim);
    if a.dim_in != dp || a.dim_out != dp || c_inst.dim_in != dp || c_inst.dim_out != dp {
        return Err(Error::Dim("A and C must act on the probe wires".into()));
    }
    if b.dim_in != dt || b.dim_out != dt {
        return Err(Error::Dim("B must act on the butterfly wires".into()));
    }
    let ca = instrument_choi(a);
    let cc = instrument_choi(c_inst);
    // M_A[o,o'] = Σ_j Υ̂_A[(o,j),(o',j)];  M_C[j,k] = Σ_o Υ̂_C[(o,j),(o,k)]
    let mut ma = ComplexMatrix::zeros(dp, dp);
    let mut mc = ComplexMatrix::zeros(dp, dp);
    let n = dp * dp;
    for o in 0..dp {
        for op in 0..dp {
            let mut sa = c(0.0, 0.0);
            for j in 0..dp {
                sa += ca.data[(o * dp + j) * n + (op * dp + j)];
            }
            ma.set(o, op, sa);
        }
    }
    for j in 0..dp {
        for k in 0..dp {
            let mut sc = c(0.0, 0.0);
            for o in 0..dp {
                sc += cc.data[(o * dp + j) * n + (o * dp + k)];
            }
            mc.set(j, k, sc);
        }
    }
    let ob = butterfly_contraction_kernel(b);
    let op = kron(&kron(&ma.transpose(), &ob), &mc.transpose());
    Ok(choi.state.matrix().trace_product(&op) * dt as f64)
}

// ---------------------------------------------------------------------------
// Butterflies and conditional Choi states
// ---------------------------------------------------------------------------

/// Butterfly family parameters: z-rotation angle and target designation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ButterflyParams {
    pub phi: f64,
    pub target: ButterflyTarget,
}

/// e^{−iφσ_z} as a matrix.
pub fn butterfly_unitary(phi: f64) -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(2, 2);
    u.set(0, 0, C64::from_polar(1.0, -phi));
    u.set(1, 1, C64::from_polar(1.0, phi));
    u
}

/// The butterfly channel B[ρ] = e^{−iφσ_z} ρ e^{iφσ_z} as an instrument.
pub fn butterfly_instrument(params: &ButterflyParams) -> Instrument {
    let u = butterfly_unitary(params.phi);
    Instrument {
        pairs: vec![(u.clone(), u)],
        dim_in: 2,
        dim_out: 2,
    }
}

/// Conditional Choi state on wires (a_i, c_o) plus the contraction trace
/// before renormalization (1/d_T for any unitary butterfly).
#[derive(Clone, Debug)]
pub struct ConditionalChoi {
    pub state: DensityMatrix,
    pub raw_trace: f64,
}

/// Contract the middle wires of the OTOM with an instrument's Choi and
/// renormalize. A trace-annihilating instrument is an error.
pub fn conditional_choi(choi: &OtomChoi, b: &Instrument) -> Result<ConditionalChoi> {
    let (dp, dt) = (choi.probe_dim, choi.target_dim);
    if b.dim_in != dt || b.dim_out != dt {
        return Err(Error::Dim("B must act on the butterfly wires".into()));
    }
    let ob = butterfly_contraction_kernel(b);
    let dt2 = dt * dt;
    let n = dp * dt2 * dp;
    let mat = choi.state.matrix();
    let mut cond = ComplexMatrix::zeros(dp * dp, dp * dp);
    for ai in 0..dp {
        for q in 0..dp {
            for aj in 0..dp {
                for qq in 0..dp {
                    let mut acc = c(0.0, 0.0);
                    for x in 0..dt2 {
                        let row = (ai * dt2 + x) * dp + q;
                        for y in 0..dt2 {
                            let col = (aj * dt2 + y) * dp + qq;
                            acc += mat.data[row * n + col] * ob.data[y * dt2 + x];
                        }
                    }
                    cond.data[(ai * dp + q) * (dp * dp) + (aj * dp + qq)] = acc;
                }
            }
        }
    }
    let tr = cond.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Numerical(
            "butterfly contraction annihilated the trace".into(),
        ));
    }
    let normalized = cond.scale(c(1.0, 0.0) / tr);
    let layout = SubsystemLayout::new(&[("a_i", dp), ("c_o", dp)])?;
    Ok(ConditionalChoi {
        state: DensityMatrix::new(normalized, layout)?,
        raw_trace: tr.re,
    })
}

/// φ-independent pieces of the analytic conditional channel, reusable across
/// a butterfly grid: the maximally entangled projector, the conjugated
/// projector R = tr_S|Φ⟩⟨Φ|, and the cross term M = tr_S|Φ⟩⟨Ψ₀|, where
/// |Φ⟩ = (1 ⊗ Z_t)|Ψ₀⟩ and Z_t = U_t†(σ_z on target)U_t.
#[derive(Clone, Debug)]
pub struct ConditionalIngredients {
    psi_plus: ComplexMatrix,
    big_r: ComplexMatrix,
    cross_m: ComplexMatrix,
    probe_dim: usize,
}

/// tr_S |u⟩⟨v| for two states laid out as (a, p, s) with the system last.
fn cross_gram(u: &PureState, v: &PureState, ds: usize) -> ComplexMatrix {
    let dk = u.amps.len() / ds;
    let mut out = ComplexMatrix::zeros(dk, dk);
    for i in 0..dk {
        let ui = &u.amps[i * ds..(i + 1) * ds];
        for j in 0..dk {
            let vj = &v.amps[j * ds..(j + 1) * ds];
            let mut acc = c(0.0, 0.0);
            for (x, y) in ui.iter().zip(vj) {
                acc += x * y.conj();
            }
            out.data[i * dk + j] = acc;
        }
    }
    out
}

/// Apply σ_z on the butterfly target of an (a, p, s) state, as sign flips.
fn apply_sigma_z_target(state: &mut PureState, process: &ProcessSpec) -> Result<()> {
    let ds = process.system_dim();
    let dp = process.probe_dim;
    match process.target {
        ButterflyTarget::Probe => {
            if dp != 2 {
                return Err(Error::InvalidArg(
                    "σ_z butterfly on the probe needs probe_dim = 2".into(),
                ));
            }
            for (idx, amp) in state.amps.iter_mut().enumerate() {
                if (idx / ds) % 2 == 1 {
                    *amp = -*amp;
                }
            }
        }
        ButterflyTarget::SystemQubit(b) => {
            for (idx, amp) in state.amps.iter_mut().enumerate() {
                if (idx % ds) >> b & 1 == 1 {
                    *amp = -*amp;
                }
            }
        }
    }
    Ok(())
}

fn conditional_ingredients_with(
    process: &ProcessSpec,
    heisenberg_dagger_first: bool,
) -> Result<ConditionalIngredients> {
    process.validate()?;
    let dp = process.probe_dim;
    let ds = process.system_dim();
    let dk = dp * dp;
    let bell = bell_state("a", "p", dp)?;
    let psi_plus = {
        let mut m = ComplexMatrix::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                m.data[i * dk + j] = bell.amps[i] * bell.amps[j].conj();
            }
        }
        m
    };
    let mut big_r = ComplexMatrix::zeros(dk, dk);
    let mut cross_m = ComplexMatrix::zeros(dk, dk);
    for (w, sys_vec) in process.system_ensemble()? {
        let sys = PureState::new(sys_vec, SubsystemLayout::single("s", ds)?)?;
        let psi0 = bell.tensor(&sys)?;
        let mut phi_state = psi0.clone();
        if heisenberg_dagger_first {
            // Z_t = U_t† σ_z U_t applied to |Ψ₀⟩
            apply_dynamics(&mut phi_state, process, Direction::Forward)?;
            apply_sigma_z_target(&mut phi_state, process)?;
            apply_dynamics(&mut phi_state, process, Direction::Backward)?;
        } else {
            // the rejected alternative, kept for the calibration test
            apply_dynamics(&mut phi_state, process, Direction::Backward)?;
            apply_sigma_z_target(&mut phi_state, process)?;
            apply_dynamics(&mut phi_state, process, Direction::Forward)?;
        }
        big_r.add_assign_scaled(&cross_gram(&phi_state, &phi_state, ds), c(w, 0.0));
        cross_m.add_assign_scaled(&cross_gram(&phi_state, &psi0, ds), c(w, 0.0));
    }
    Ok(ConditionalIngredients {
        psi_plus,
        big_r,
        cross_m,
        probe_dim: dp,
    })
}

/// Precompute the analytic-path ingredients for one process; assembling a
/// butterfly angle afterwards is O(probe_dim⁴).
pub fn conditional_ingredients(process: &ProcessSpec) -> Result<ConditionalIngredients> {
    conditional_ingredients_with(process, true)
}

/// Υ(φ) = cos²φ·ψ⁺ + sin²φ·R + i·cosφ·sinφ·(M† − M); unit trace because
/// tr R = 1 and tr M is real (Z_t is Hermitian).
pub fn assemble_conditional(ing: &ConditionalIngredients, phi: f64) -> DensityMatrix {
    let (cp, sp) = (phi.cos(), phi.sin());
    let mut m = ing.psi_plus.scale(c(cp * cp, 0.0));
    m.add_assign_scaled(&ing.big_r, c(sp * sp, 0.0));
    m.add_assign_scaled(&ing.cross_m.dagger().sub(&ing.cross_m), c(0.0, cp * sp));
    let layout = SubsystemLayout::new(&[("a_i", ing.probe_dim), ("c_o", ing.probe_dim)])
        .expect("two labelled wires");
    DensityMatrix::new_unchecked(m, layout)
}

/// Conditional channel by the closed-form path; agrees with
/// [`conditional_choi`] ∘ [`build_otom_choi`] — that agreement is what
/// selected the dagger convention baked into the ingredients.
pub fn conditional_choi_analytic(process: &ProcessSpec, phi: f64) -> Result<DensityMatrix> {
    let ing = conditional_ingredients(process)?;
    let assembled = assemble_conditional(&ing, phi);
    let layout = assembled.layout().clone();
    DensityMatrix::new(assembled.into_matrix(), layout)
}

/// Ingredients for every kick count t = 1..=kicks of a kicked process, in
/// O(T²) single-kick applications: the forward state advances incrementally
/// while each Φ_t pays its own t-kick rewind. Entry t−1 of the result equals
/// [`conditional_ingredients`] of the same process with `kicks: t`.
pub fn conditional_ingredients_scan(process: &ProcessSpec) -> Result<Vec<ConditionalIngredients>> {
    let mut out = Vec::new();
    scan_conditional_ingredients(process, |_, ing| {
        out.push(ing.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Streaming form of [`conditional_ingredients_scan`]: `visit(t, ingredients)`
/// fires for each kick count as soon as its ingredients exist, without
/// retaining earlier entries.
pub fn scan_conditional_ingredients<F>(process: &ProcessSpec, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &ConditionalIngredients) -> Result<()>,
{
    process.validate()?;
    let (floquet, kicks_max) = match &process.forward {
        Dynamics::Kicked { floquet, kicks } => (floquet, *kicks),
        Dynamics::Unitary(_) => {
            return Err(Error::InvalidArg(
                "the kick scan needs structured kicked dynamics".into(),
            ))
        }
    };
    let dp = process.probe_dim;
    let ds = process.system_dim();
    let dk = dp * dp;
    let bell = bell_state("a", "p", dp)?;
    let mut psi_plus = ComplexMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            psi_plus.data[i * dk + j] = bell.amps[i] * bell.amps[j].conj();
        }
    }
    struct Track {
        weight: f64,
        psi0: PureState,
        fwd: PureState,
    }
    let mut tracks = Vec::new();
    for (weight, sys_vec) in process.system_ensemble()? {
        let sys = PureState::new(sys_vec, SubsystemLayout::single("s", ds)?)?;
        let psi0 = bell.tensor(&sys)?;
        let fwd = psi0.clone();
        tracks.push(Track { weight, psi0, fwd });
    }
    for t in 1..=kicks_max {
        let mut big_r = ComplexMatrix::zeros(dk, dk);
        let mut cross_m = ComplexMatrix::zeros(dk, dk);
        for track in &mut tracks {
            evolve_kicks(&mut track.fwd, floquet, 1, Direction::Forward, "s", "p")?;
            let mut phi_state = track.fwd.clone();
            apply_sigma_z_target(&mut phi_state, process)?;
            evolve_kicks(&mut phi_state, floquet, t, Direction::Backward, "s", "p")?;
            big_r.add_assign_scaled(&cross_gram(&phi_state, &phi_state, ds), c(track.weight, 0.0));
            cross_m.add_assign_scaled(&cross_gram(&phi_state, &track.psi0, ds), c(track.weight, 0.0));
        }
        let ing = ConditionalIngredients {
            psi_plus: psi_plus.clone(),
            big_r,
            cross_m,
            probe_dim: dp,
        };
        visit(t, &ing)?;
    }
    Ok(())
}
