//! States, channels and sampling on labelled tensor products.
//!
//! Composite indices follow the layout convention from [`crate::tensor`]:
//! the first subsystem is the most significant factor, so for qubits the
//! basis order of (a, b) is |00⟩, |01⟩, |10⟩, |11⟩.

use crate::error::{Error, Result};
use crate::tensor::{
    c, cholesky_psd_witness, herm_eigen, partial_trace, permutation_index_map, ComplexMatrix,
    SubsystemLayout, C64, HERM_TOL,
};
use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

/// Deterministic stream cipher RNG used everywhere randomness is needed.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Fresh RNG for a given seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Stateless per-item seed derivation (splitmix64-style finalizers), so that
/// sample k of a run gets the same stream no matter how work is scheduled.
pub fn derive_seed(master: u64, item: u64) -> u64 {
    let mut z = master ^ item.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for _ in 0..2 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Pauli matrix σ_k for k in 0..=3 (identity first).
pub fn pauli(k: usize) -> ComplexMatrix {
    let rows: [[C64; 2]; 2] = match k {
        0 => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        1 => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        2 => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        3 => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        _ => panic!("pauli index {k} out of range"),
    };
    ComplexMatrix {
        rows: 2,
        cols: 2,
        data: rows.concat(),
    }
}

// ---------------------------------------------------------------------------
// PureState
// ---------------------------------------------------------------------------

/// State vector over a labelled subsystem layout.
#[derive(Clone, Debug)]
pub struct PureState {
    pub amps: Vec<C64>,
    pub layout: SubsystemLayout,
}

impl PureState {
    pub fn new(amps: Vec<C64>, layout: SubsystemLayout) -> Result<Self> {
        if amps.len() != layout.total_dim() {
            return Err(Error::Dim(format!(
                "{} amplitudes for layout of total dim {}",
                amps.len(),
                layout.total_dim()
            )));
        }
        Ok(PureState { amps, layout })
    }

    /// Computational basis state |flat_index⟩.
    pub fn basis(layout: SubsystemLayout, flat_index: usize) -> Result<Self> {
        let n = layout.total_dim();
        if flat_index >= n {
            return Err(Error::InvalidArg(format!("basis index {flat_index} ≥ dim {n}")));
        }
        let mut amps = vec![c(0.0, 0.0); n];
        amps[flat_index] = c(1.0, 0.0);
        Ok(PureState { amps, layout })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    /// Tensor product; labels must not collide.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let mut parts: Vec<(&str, usize)> = Vec::new();
        let l1 = self.layout.labels();
        let l2 = other.layout.labels();
        for (l, d) in l1.iter().zip(self.layout.dims()) {
            parts.push((l, *d));
        }
        for (l, d) in l2.iter().zip(other.layout.dims()) {
            parts.push((l, *d));
        }
        let layout = SubsystemLayout::new(&parts)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { amps, layout })
    }

    /// Relabel one subsystem as several adjacent factors (no data movement).
    pub fn split(&mut self, label: &str, parts: &[(&str, usize)]) -> Result<()> {
        self.layout = self.layout.split(label, parts)?;
        Ok(())
    }

    /// Merge adjacent subsystems back into one (no data movement).
    pub fn merge(&mut self, labels: &[&str], new_label: &str) -> Result<()> {
        self.layout = self.layout.merge(labels, new_label)?;
        Ok(())
    }

    pub fn density(&self) -> DensityMatrix {
        let n = self.amps.len();
        let mut mat = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                mat.data[i * n + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix::new_unchecked(mat, self.layout.clone())
    }
}

/// Maximally entangled pair (1/√d) Σ_i |ii⟩ on two d-dimensional subsystems.
pub fn bell_state(label_a: &str, label_b: &str, d: usize) -> Result<PureState> {
    let layout = SubsystemLayout::new(&[(label_a, d), (label_b, d)])?;
    let mut amps = vec![c(0.0, 0.0); d * d];
    let w = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        amps[i * d + i] = c(w, 0.0);
    }
    Ok(PureState { amps, layout })
}

/// Apply a unitary to the listed subsystems, in the listed order (the first
/// target is the most significant index of `u`). Gather/scatter over the
/// complement, so cost is u-size² × (total/target) products.
pub fn apply_unitary(state: &mut PureState, u: &ComplexMatrix, targets: &[&str]) -> Result<()> {
    if !u.is_square() {
        return Err(Error::Dim("unitary must be square".into()));
    }
    let positions: Vec<usize> = targets
        .iter()
        .map(|l| state.layout.index_of(l))
        .collect::<Result<_>>()?;
    {
        let mut seen = positions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != positions.len() {
            return Err(Error::InvalidArg("repeated target label".into()));
        }
    }
    let m: usize = positions.iter().map(|&p| state.layout.dims()[p]).product();
    if m != u.rows {
        return Err(Error::Dim(format!(
            "unitary is {}x{} but targets span dim {m}",
            u.rows, u.cols
        )));
    }
    let tgt_off = crate::tensor::subset_offsets(&state.layout, &positions);
    let other_pos: Vec<usize> = (0..state.layout.len())
        .filter(|p| !positions.contains(p))
        .collect();
    let other_off = crate::tensor::subset_offsets(&state.layout, &other_pos);
    let mut scratch = vec![c(0.0, 0.0); m];
    let mut out = vec![c(0.0, 0.0); m];
    for &base in &other_off {
        for (t, &off) in tgt_off.iter().enumerate() {
            scratch[t] = state.amps[base + off];
        }
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &u.data[r * m..(r + 1) * m];
            let mut acc = c(0.0, 0.0);
            for (a, x) in row.iter().zip(&scratch) {
                acc += a * x;
            }
            *slot = acc;
        }
        for (t, &off) in tgt_off.iter().enumerate() {
            state.amps[base + off] = out[t];
        }
    }
    Ok(())
}

/// Exchange the contents of two equal-dimension subsystems (labels stay put).
pub fn swap_subsystems(state: &mut PureState, a: &str, b: &str) -> Result<()> {
    let pa = state.layout.index_of(a)?;
    let pb = state.layout.index_of(b)?;
    if pa == pb {
        return Ok(());
    }
    if state.layout.dims()[pa] != state.layout.dims()[pb] {
        return Err(Error::Dim(format!(
            "swap of `{a}` (dim {}) with `{b}` (dim {})",
            state.layout.dims()[pa],
            state.layout.dims()[pb]
        )));
    }
    let mut positions: Vec<usize> = (0..state.layout.len()).collect();
    positions.swap(pa, pb);
    let map = permutation_index_map(&state.layout, &positions);
    let old = state.amps.clone();
    for (i, &src) in map.iter().enumerate() {
        state.amps[i] = old[src];
    }
    Ok(())
}

/// Rearrange subsystems into a new order (amplitudes move, labels follow).
pub fn permute_subsystems(state: &mut PureState, new_order: &[&str]) -> Result<()> {
    if new_order.len() != state.layout.len() {
        return Err(Error::InvalidArg("permutation must mention every subsystem".into()));
    }
    let positions: Vec<usize> = new_order
        .iter()
        .map(|l| state.layout.index_of(l))
        .collect::<Result<_>>()?;
    {
        let mut seen = positions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != positions.len() {
            return Err(Error::InvalidArg("permutation repeats a label".into()));
        }
    }
    let map = permutation_index_map(&state.layout, &positions);
    let old = state.amps.clone();
    for (i, &src) in map.iter().enumerate() {
        state.amps[i] = old[src];
    }
    state.layout = state.layout.select(&positions);
    Ok(())
}

/// Reduced density matrix of `keep` from a pure state, computed as a Gram
/// product of the reshaped vector — never materializes the full projector.
pub fn outer_partial(state: &PureState, keep: &[&str]) -> Result<DensityMatrix> {
    let keep_pos = state.layout.positions_sorted(keep)?;
    if keep_pos.is_empty() {
        return Err(Error::InvalidArg("empty keep set".into()));
    }
    let traced_pos: Vec<usize> = (0..state.layout.len())
        .filter(|p| !keep_pos.contains(p))
        .collect();
    let mut positions = keep_pos.clone();
    positions.extend_from_slice(&traced_pos);
    let map = permutation_index_map(&state.layout, &positions);
    let perm: Vec<C64> = map.iter().map(|&src| state.amps[src]).collect();
    let dk: usize = keep_pos.iter().map(|&p| state.layout.dims()[p]).product();
    let dt = perm.len() / dk;
    let mut mat = ComplexMatrix::zeros(dk, dk);
    for i in 0..dk {
        let vi = &perm[i * dt..(i + 1) * dt];
        for j in 0..dk {
            let vj = &perm[j * dt..(j + 1) * dt];
            let mut acc = c(0.0, 0.0);
            for (a, b) in vi.iter().zip(vj) {
                acc += a * b.conj();
            }
            mat.data[i * dk + j] = acc;
        }
    }
    Ok(DensityMatrix::new_unchecked(
        mat,
        state.layout.select(&keep_pos),
    ))
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Validated density matrix with its subsystem layout.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    layout: SubsystemLayout,
}

/// Validation tolerances for [`DensityMatrix::new`].
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;

impl DensityMatrix {
    /// Validates hermiticity (±1e-10 asymmetry), unit trace (±1e-9) and
    /// positivity (eigenvalues ≥ -1e-9). Positivity goes through a cheap
    /// Cholesky witness first; only rejected matrices pay for the full
    /// eigensolve that produces the precise error.
    pub fn new(mat: ComplexMatrix, layout: SubsystemLayout) -> Result<Self> {
        if !mat.is_square() || mat.rows != layout.total_dim() {
            return Err(Error::Dim(format!(
                "matrix is {}x{}, layout dim {}",
                mat.rows,
                mat.cols,
                layout.total_dim()
            )));
        }
        let asym = mat.asymmetry();
        if asym > HERM_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}")));
        }
        if !cholesky_psd_witness(&mat, PSD_TOL) {
            let eig = herm_eigen(&mat)?;
            if let Some(min) = eig.eigenvalues.first() {
                if *min < -PSD_TOL {
                    return Err(Error::InvalidDensity(format!(
                        "negative eigenvalue {min:.3e}"
                    )));
                }
            }
        }
        Ok(DensityMatrix { mat, layout })
    }

    /// Skip validation; for internal paths where validity holds by
    /// construction (reductions of valid states, convex mixtures, ...).
    pub fn new_unchecked(mat: ComplexMatrix, layout: SubsystemLayout) -> Self {
        DensityMatrix { mat, layout }
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let n = layout.total_dim();
        let mat = ComplexMatrix::identity(n).scale(c(1.0 / n as f64, 0.0));
        DensityMatrix { mat, layout }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn marginal(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let (mat, layout) = partial_trace(&self.mat, &self.layout, keep)?;
        Ok(DensityMatrix { mat, layout })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(herm_eigen(&self.mat)?.eigenvalues)
    }
}

// ---------------------------------------------------------------------------
// Instruments and Choi matrices
// ---------------------------------------------------------------------------

/// Operation X[ρ] = Σ_k L_k ρ R_k†, kept as the list of (L, R) pairs.
/// A unitary channel is the single pair (U, U); the out-of-time-order legs
/// use mismatched pairs like (V†, 1).
#[derive(Clone, Debug)]
pub struct Instrument {
    pub pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
    pub dim_in: usize,
    pub dim_out: usize,
}

impl Instrument {
    pub fn new(pairs: Vec<(ComplexMatrix, ComplexMatrix)>) -> Result<Self> {
        let (l0, r0) = pairs
            .first()
            .ok_or_else(|| Error::InvalidArg("instrument needs at least one pair".into()))?;
        let (dim_out, dim_in) = (l0.rows, l0.cols);
        if (r0.rows, r0.cols) != (dim_out, dim_in) {
            return Err(Error::Dim("L and R shapes differ".into()));
        }
        for (l, r) in &pairs {
            if (l.rows, l.cols) != (dim_out, dim_in) || (r.rows, r.cols) != (dim_out, dim_in) {
                return Err(Error::Dim("inconsistent pair shapes".into()));
            }
        }
        Ok(Instrument {
            pairs,
            dim_in,
            dim_out,
        })
    }

    /// The channel ρ ↦ UρU†.
    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::Dim("unitary must be square".into()));
        }
        Instrument::new(vec![(u.clone(), u.clone())])
    }

    pub fn identity(d: usize) -> Self {
        let i = ComplexMatrix::identity(d);
        Instrument {
            pairs: vec![(i.clone(), i)],
            dim_in: d,
            dim_out: d,
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows != self.dim_in || rho.cols != self.dim_in {
            return Err(Error::Dim("state does not match instrument input".into()));
        }
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for (l, r) in &self.pairs {
            out.add_assign_scaled(&l.mul(rho).mul(&r.dagger()), c(1.0, 0.0));
        }
        Ok(out)
    }

    /// Max entry of |Σ_k R_k† L_k − 1|; zero iff trace preserving.
    pub fn trace_defect(&self) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.dim_in, self.dim_in);
        for (l, r) in &self.pairs {
            acc.add_assign_scaled(&r.dagger().mul(l), c(1.0, 0.0));
        }
        acc.max_abs_diff(&ComplexMatrix::identity(self.dim_in))
    }
}

/// Choi-style matrix of an instrument on (out ⊗ in):
/// Υ̂[(o,j),(o',k)] = Σ_pairs L[o,j] · conj(R[o',k]).
/// For a trace-preserving operation the trace equals dim_in; the identity
/// channel on a qubit gives twice the maximally entangled projector.
pub fn instrument_choi(inst: &Instrument) -> ComplexMatrix {
    let (din, dout) = (inst.dim_in, inst.dim_out);
    let n = din * dout;
    let mut out = ComplexMatrix::zeros(n, n);
    for (l, r) in &inst.pairs {
        for o in 0..dout {
            for j in 0..din {
                let lv = l.at(o, j);
                if lv.norm_sqr() == 0.0 {
                    continue;
                }
                for op in 0..dout {
                    for k in 0..din {
                        out.data[(o * din + j) * n + (op * din + k)] += lv * r.at(op, k).conj();
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Random sampling
// ---------------------------------------------------------------------------

/// Matrix of iid standard complex gaussians.
pub fn ginibre(d: usize, rng: &mut SeededRng) -> ComplexMatrix {
    let mut data = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        data.push(c(re, im));
    }
    ComplexMatrix {
        rows: d,
        cols: d,
        data,
    }
}

/// Haar-distributed unitary: QR of a Ginibre matrix via Householder
/// reflections, with the R-diagonal phases folded back into Q (plain QR is
/// not Haar without this correction).
pub fn haar_unitary(d: usize, rng: &mut SeededRng) -> ComplexMatrix {
    assert!(d >= 1, "haar_unitary needs d >= 1");
    let mut a = ginibre(d, rng);
    // reflectors v_k live in rows k.., stored with leading zeros trimmed
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(d);
    let mut rdiag = Vec::with_capacity(d);
    for k in 0..d {
        let m = d - k;
        let mut v: Vec<C64> = (0..m).map(|i| a.at(k + i, k)).collect();
        let normx = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if normx == 0.0 {
            reflectors.push(Vec::new());
            rdiag.push(a.at(k, k));
            continue;
        }
        let phase = if v[0].norm() > 0.0 { v[0] / v[0].norm() } else { c(1.0, 0.0) };
        let alpha = -phase * normx;
        v[0] -= alpha; // v = x − α e₁, |v₀| = |x₀| + ‖x‖ (no cancellation)
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 > 0.0 {
            // apply H = 1 − 2vv†/‖v‖² to the trailing block of A
            for col in k..d {
                let mut w = c(0.0, 0.0);
                for (i, vi) in v.iter().enumerate() {
                    w += vi.conj() * a.at(k + i, col);
                }
                let f = 2.0 * w / vnorm2;
                for (i, vi) in v.iter().enumerate() {
                    let cur = a.at(k + i, col);
                    a.set(k + i, col, cur - f * vi);
                }
            }
        }
        rdiag.push(a.at(k, k));
        reflectors.push(v);
    }
    // Q = H₀H₁…H_{d−1} · 1, built by applying reflectors in reverse
    let mut q = ComplexMatrix::identity(d);
    for k in (0..d).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in 0..d {
            let mut w = c(0.0, 0.0);
            for (i, vi) in v.iter().enumerate() {
                w += vi.conj() * q.at(k + i, col);
            }
            let f = 2.0 * w / vnorm2;
            for (i, vi) in v.iter().enumerate() {
                let cur = q.at(k + i, col);
                q.set(k + i, col, cur - f * vi);
            }
        }
    }
    // U = Q · diag(r/|r|)
    for (k, r) in rdiag.iter().enumerate() {
        let ph = if r.norm() > 0.0 { r / r.norm() } else { c(1.0, 0.0) };
        for row in 0..d {
            let cur = q.at(row, k);
            q.set(row, k, cur * ph);
        }
    }
    q
}

/// Random full-rank density matrix GG†/tr, for tests.
pub fn random_density(d: usize, rng: &mut SeededRng) -> DensityMatrix {
    let g = ginibre(d, rng);
    let m = g.mul(&g.dagger());
    let tr = m.trace().re;
    let layout = SubsystemLayout::single("q", d).expect("d >= 1");
    DensityMatrix::new_unchecked(m.scale(c(1.0 / tr, 0.0)), layout)
}
