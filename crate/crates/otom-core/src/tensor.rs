//! Dense complex linear algebra with subsystem-aware operations.
//!
//! Everything here is plain `Vec<Complex64>` row-major storage. Subsystem
//! bookkeeping follows the convention that the *first* subsystem in a layout
//! is the most significant factor of the composite index.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Absolute tolerance on max entry asymmetry before a matrix is rejected as
/// non-hermitian.
pub const HERM_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// ---------------------------------------------------------------------------
// ComplexMatrix
// ---------------------------------------------------------------------------

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for col in 0..cols {
                data.push(f(r, col));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Build from rows of (re, im) pairs; handy for small literal matrices.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        ComplexMatrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        // ikj loop order keeps the inner accesses contiguous
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for j in 0..other.cols {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    pub fn apply_to_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = C64::new(0.0, 0.0);
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            *o = acc;
        }
        out
    }

    pub fn dagger(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.at(c, r).conj())
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.at(c, r))
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &ComplexMatrix, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// tr(self · other) in O(n²), without materializing the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> C64 {
        assert!(self.is_square() && other.is_square());
        assert_eq!(self.cols, other.rows, "trace-product dimension mismatch");
        let n = self.rows;
        let mut acc = c(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * other.data[j * n + i];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max entry of |M - M†|; zero for an exactly hermitian matrix.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                let d = (self.at(r, c) - self.at(c, r).conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Max entry of |U†U - I|.
    pub fn unitarity_defect(&self) -> f64 {
        self.dagger().mul(self).max_abs_diff(&ComplexMatrix::identity(self.rows))
    }
}

/// Standard Kronecker product; dims multiply.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let av = a.at(i, j);
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.set(i * b.rows + k, j * b.cols + l, av * b.at(k, l));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// SubsystemLayout
// ---------------------------------------------------------------------------

/// Ordered subsystem dimensions with unique names; first entry is the most
/// significant factor of the composite index.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SubsystemLayout {
    pub fn new(parts: &[(&str, usize)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArg("layout needs at least one subsystem".into()));
        }
        let mut labels = Vec::with_capacity(parts.len());
        let mut dims = Vec::with_capacity(parts.len());
        for (name, d) in parts {
            if *d == 0 {
                return Err(Error::InvalidArg(format!("subsystem `{name}` has dimension 0")));
            }
            if labels.iter().any(|l| l == name) {
                return Err(Error::InvalidArg(format!("duplicate subsystem label `{name}`")));
            }
            labels.push(name.to_string());
            dims.push(*d);
        }
        Ok(SubsystemLayout { dims, labels })
    }

    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new(&[(label, dim)])
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> Vec<&str> {
        self.labels.iter().map(|s| s.as_str()).collect()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.index_of(label)?])
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Positions of the given labels, sorted into layout order.
    pub fn positions_sorted(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut pos: Vec<usize> = labels
            .iter()
            .map(|l| self.index_of(l))
            .collect::<Result<_>>()?;
        pos.sort_unstable();
        pos.dedup();
        if pos.len() != labels.len() {
            return Err(Error::InvalidArg("repeated label in subsystem set".into()));
        }
        Ok(pos)
    }

    /// Row-major strides: stride of the last subsystem is 1.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    pub(crate) fn select(&self, positions: &[usize]) -> SubsystemLayout {
        SubsystemLayout {
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
        }
    }

    /// Replace one subsystem by several adjacent factors whose dimensions
    /// multiply to the original. Row-major storage means this is purely a
    /// relabeling: no amplitude ever moves.
    pub fn split(&self, label: &str, parts: &[(&str, usize)]) -> Result<SubsystemLayout> {
        let pos = self.index_of(label)?;
        let prod: usize = parts.iter().map(|(_, d)| d).product();
        if parts.is_empty() || prod != self.dims[pos] {
            return Err(Error::InvalidArg(format!(
                "split of `{label}` (dim {}) into factors with product {prod}",
                self.dims[pos]
            )));
        }
        let mut dims = Vec::with_capacity(self.len() + parts.len() - 1);
        let mut labels = Vec::with_capacity(dims.capacity());
        for (i, (d, l)) in self.dims.iter().zip(&self.labels).enumerate() {
            if i == pos {
                for (pl, pd) in parts {
                    dims.push(*pd);
                    labels.push(pl.to_string());
                }
            } else {
                dims.push(*d);
                labels.push(l.clone());
            }
        }
        {
            let mut seen = labels.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != labels.len() {
                return Err(Error::InvalidArg("split introduces a duplicate label".into()));
            }
        }
        Ok(SubsystemLayout { dims, labels })
    }

    /// Merge consecutive subsystems into one; inverse of [`split`](Self::split)
    /// and equally data-free. The labels must appear adjacently and in order.
    pub fn merge(&self, labels: &[&str], new_label: &str) -> Result<SubsystemLayout> {
        if labels.is_empty() {
            return Err(Error::InvalidArg("merge needs at least one label".into()));
        }
        let start = self.index_of(labels[0])?;
        for (k, l) in labels.iter().enumerate() {
            if start + k >= self.len() || self.labels[start + k] != *l {
                return Err(Error::InvalidArg(
                    "merge labels must be adjacent and in layout order".into(),
                ));
            }
        }
        let merged_dim: usize = self.dims[start..start + labels.len()].iter().product();
        let mut dims = Vec::new();
        let mut out_labels = Vec::new();
        for i in 0..self.len() {
            if i == start {
                dims.push(merged_dim);
                out_labels.push(new_label.to_string());
            } else if i > start && i < start + labels.len() {
                continue;
            } else {
                dims.push(self.dims[i]);
                out_labels.push(self.labels[i].clone());
            }
        }
        {
            let mut seen = out_labels.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != out_labels.len() {
                return Err(Error::InvalidArg("merge introduces a duplicate label".into()));
            }
        }
        Ok(SubsystemLayout {
            dims,
            labels: out_labels,
        })
    }
}

/// All composite offsets generated by the subsystems at `positions`
/// (first position = most significant digit of the enumeration).
pub(crate) fn subset_offsets(layout: &SubsystemLayout, positions: &[usize]) -> Vec<usize> {
    let strides = layout.strides();
    let dims: Vec<usize> = positions.iter().map(|&p| layout.dims[p]).collect();
    let count: usize = dims.iter().product();
    let mut out = Vec::with_capacity(count);
    for mut idx in 0..count {
        let mut off = 0usize;
        for k in (0..positions.len()).rev() {
            let digit = idx % dims[k];
            idx /= dims[k];
            off += digit * strides[positions[k]];
        }
        out.push(off);
    }
    out
}

/// Trace out every subsystem not in `keep`; returns the reduced matrix and
/// its layout (keep order follows the original layout order).
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &SubsystemLayout,
    keep: &[&str],
) -> Result<(ComplexMatrix, SubsystemLayout)> {
    if !m.is_square() || m.rows != layout.total_dim() {
        return Err(Error::Dim(format!(
            "matrix is {}x{} but layout has total dim {}",
            m.rows,
            m.cols,
            layout.total_dim()
        )));
    }
    if keep.is_empty() {
        return Err(Error::InvalidArg(
            "empty keep set; use trace() for the full trace".into(),
        ));
    }
    let keep_pos = layout.positions_sorted(keep)?;
    let traced_pos: Vec<usize> = (0..layout.len()).filter(|p| !keep_pos.contains(p)).collect();
    let keep_off = subset_offsets(layout, &keep_pos);
    let traced_off = subset_offsets(layout, &traced_pos);
    let dk = keep_off.len();
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (i, &oi) in keep_off.iter().enumerate() {
        for (j, &oj) in keep_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += m.data[(oi + t) * n + (oj + t)];
            }
            out.data[i * dk + j] = acc;
        }
    }
    Ok((out, layout.select(&keep_pos)))
}

/// Transpose the indices of the subsystems in `subset`, leaving the rest.
pub fn partial_transpose(
    m: &ComplexMatrix,
    layout: &SubsystemLayout,
    subset: &[&str],
) -> Result<ComplexMatrix> {
    if !m.is_square() || m.rows != layout.total_dim() {
        return Err(Error::Dim("matrix/layout dimension mismatch".into()));
    }
    let sub_pos = layout.positions_sorted(subset)?;
    if sub_pos.is_empty() || sub_pos.len() == layout.len() {
        return Err(Error::InvalidArg(
            "partial transpose needs a non-empty proper subset".into(),
        ));
    }
    let other_pos: Vec<usize> = (0..layout.len()).filter(|p| !sub_pos.contains(p)).collect();
    let sub_off = subset_offsets(layout, &sub_pos);
    let other_off = subset_offsets(layout, &other_pos);
    let n = m.rows;
    let mut out = ComplexMatrix::zeros(n, n);
    for &sr in &sub_off {
        for &sc in &sub_off {
            for &or in &other_off {
                for &oc in &other_off {
                    // <sr or| M^T_sub |sc oc> = <sc or| M |sr oc>
                    out.data[(sr + or) * n + (sc + oc)] = m.data[(sc + or) * n + (sr + oc)];
                }
            }
        }
    }
    Ok(out)
}

/// Permute subsystems of a square matrix into `new_order` (both indices).
pub fn reorder_subsystems(
    m: &ComplexMatrix,
    layout: &SubsystemLayout,
    new_order: &[&str],
) -> Result<(ComplexMatrix, SubsystemLayout)> {
    if new_order.len() != layout.len() {
        return Err(Error::InvalidArg("reorder must mention every subsystem".into()));
    }
    let positions: Vec<usize> = new_order
        .iter()
        .map(|l| layout.index_of(l))
        .collect::<Result<_>>()?;
    {
        let mut seen = positions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != layout.len() {
            return Err(Error::InvalidArg("reorder contains a repeated label".into()));
        }
    }
    let n = layout.total_dim();
    if !m.is_square() || m.rows != n {
        return Err(Error::Dim("matrix/layout dimension mismatch".into()));
    }
    let new_layout = layout.select(&positions);
    let map = permutation_index_map(layout, &positions);
    let mut out = ComplexMatrix::zeros(n, n);
    for (i, &mi) in map.iter().enumerate() {
        for (j, &mj) in map.iter().enumerate() {
            out.data[i * n + j] = m.data[mi * n + mj];
        }
    }
    Ok((out, new_layout))
}

/// map[new_flat_index] = old_flat_index for the subsystem permutation given by
/// `positions` (new subsystem k = old subsystem positions[k]).
pub(crate) fn permutation_index_map(layout: &SubsystemLayout, positions: &[usize]) -> Vec<usize> {
    let strides = layout.strides();
    let new_dims: Vec<usize> = positions.iter().map(|&p| layout.dims[p]).collect();
    let n = layout.total_dim();
    let mut map = vec![0usize; n];
    for (i, slot) in map.iter_mut().enumerate() {
        let mut idx = i;
        let mut off = 0usize;
        for k in (0..positions.len()).rev() {
            let digit = idx % new_dims[k];
            idx /= new_dims[k];
            off += digit * strides[positions[k]];
        }
        *slot = off;
    }
    map
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver (cyclic complex Jacobi)
// ---------------------------------------------------------------------------

/// Cheap positive-semidefiniteness witness: attempts a Cholesky
/// factorization of M + shift·I and reports whether every pivot stayed
/// positive. Success certifies min eigenvalue ≥ −shift (up to n·ε rounding);
/// failure certifies nothing — callers must adjudicate rejections with a
/// full eigensolve. O(n³/3) versus the O(n³)-per-sweep Jacobi iteration.
pub fn cholesky_psd_witness(m: &ComplexMatrix, shift: f64) -> bool {
    assert!(m.is_square(), "PSD witness needs a square matrix");
    let n = m.rows;
    let mut l = vec![c(0.0, 0.0); n * n]; // lower triangle, row-major
    for j in 0..n {
        let mut d = m.data[j * n + j].re + shift;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if d <= 0.0 || d.is_nan() {
            return false; // non-positive (or NaN) pivot
        }
        let pivot = d.sqrt();
        l[j * n + j] = c(pivot, 0.0);
        for i in (j + 1)..n {
            let mut v = m.data[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = v / pivot;
        }
    }
    true
}

#[derive(Clone, Debug)]
pub struct HermEigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are the matching orthonormal eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

/// Full spectral decomposition of a hermitian matrix by cyclic Jacobi
/// rotations. Input is symmetrized as (M + M†)/2 first; asymmetry beyond
/// `HERM_TOL` is an error.
pub fn herm_eigen(m: &ComplexMatrix) -> Result<HermEigResult> {
    if !m.is_square() {
        return Err(Error::Dim("eigensolve needs a square matrix".into()));
    }
    let asym = m.asymmetry();
    if asym > HERM_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let n = m.rows;
    // symmetrize; keep the diagonal exactly real
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] = 0.5 * (m.at(r, c) + m.at(c, r).conj());
        }
        a[r * n + r] = C64::new(a[r * n + r].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n).data;
    let scale = a.iter().map(|x| x.norm()).fold(f64::MIN_POSITIVE, f64::max);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].norm());
            }
        }
        if off <= scale * 1e-15 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let beta = apq.norm();
                if beta <= scale * 1e-18 {
                    continue;
                }
                let alpha = a[p * n + p].re;
                let gamma = a[q * n + q].re;
                let e_itheta = apq / beta;
                let tau = (gamma - alpha) / (2.0 * beta);
                let sgn = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let sth = t * cth;
                // J[p][p]=c, J[p][q]=s e^{iθ}, J[q][p]=-s e^{-iθ}, J[q][q]=c
                let se = sth * e_itheta;
                let se_conj = sth * e_itheta.conj();
                // columns: A <- A J
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = cth * arp - se_conj * arq;
                    a[r * n + q] = se * arp + cth * arq;
                }
                // rows: A <- J† A
                for cidx in 0..n {
                    let apc = a[p * n + cidx];
                    let aqc = a[q * n + cidx];
                    a[p * n + cidx] = cth * apc - se * aqc;
                    a[q * n + cidx] = se_conj * apc + cth * aqc;
                }
                a[p * n + q] = C64::new(0.0, 0.0);
                a[q * n + p] = C64::new(0.0, 0.0);
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                // accumulate V <- V J
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = cth * vrp - se_conj * vrq;
                    v[r * n + q] = se * vrp + cth * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.data[r * n + new_col] = v[r * n + old_col];
        }
    }
    Ok(HermEigResult {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// exp(-i * scale * h) for hermitian h, via the spectral decomposition.
pub fn unitary_exp(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let eig = herm_eigen(h)?;
    let n = h.rows;
    let v = &eig.eigenvectors;
    // V diag(e^{-i s λ}) V†
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let ph = C64::from_polar(1.0, -scale * eig.eigenvalues[k]);
        for r in 0..n {
            let vr = v.at(r, k) * ph;
            if vr.norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..n {
                out.data[r * n + c] += vr * v.at(c, k).conj();
            }
        }
    }
    Ok(out)
}

/// Sum of singular values. Hermitian inputs take the fast |eigenvalue| path;
/// anything else goes through eig(M†M).
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    assert!(m.is_square(), "trace_norm expects a square matrix");
    if m.asymmetry() <= HERM_TOL {
        let eig = herm_eigen(m).expect("asymmetry already checked");
        eig.eigenvalues.iter().map(|l| l.abs()).sum()
    } else {
        let mtm = m.dagger().mul(m);
        let eig = herm_eigen(&mtm).expect("M†M is hermitian by construction");
        eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum()
    }
}

// ---------------------------------------------------------------------------
// Fourier basis change
// ---------------------------------------------------------------------------

/// `Forward` maps momentum amplitudes to the position grid with kernel
/// e^{+2πi jn/D}/√D, so that |m=1⟩ → e^{iθ_j}/√D with θ_j = 2πj/D.
/// Momentum labels m ∈ [-N+1, N] are stored mod D = 2N (m=0 at bin 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FourierDirection {
    Forward,
    Inverse,
}

fn fft_radix2(buf: &mut [C64], sign: f64) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let half = len / 2;
        // direct twiddles per stage keep round-off flat across the run
        let tw: Vec<C64> = (0..half).map(|k| C64::from_polar(1.0, ang * k as f64)).collect();
        let mut start = 0;
        while start < n {
            for k in 0..half {
                let u = buf[start + k];
                let t = tw[k] * buf[start + k + half];
                buf[start + k] = u + t;
                buf[start + k + half] = u - t;
            }
            start += len;
        }
        len <<= 1;
    }
}

fn dft_direct(v: &[C64], sign: f64) -> Vec<C64> {
    let n = v.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, x) in v.iter().enumerate() {
            // reduce the phase index mod n before multiplying to keep angles small
            let idx = (j * k) % n;
            acc += x * C64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * idx as f64 / n as f64);
        }
        *slot = acc;
    }
    out
}

/// Unitary discrete Fourier transform of a bare vector (any length).
/// Radix-2 for powers of two, direct O(d²) otherwise.
pub fn fourier_vector(v: &[C64], direction: FourierDirection) -> Vec<C64> {
    let n = v.len();
    let sign = match direction {
        FourierDirection::Forward => 1.0,
        FourierDirection::Inverse => -1.0,
    };
    let mut out = if n.is_power_of_two() {
        let mut buf = v.to_vec();
        fft_radix2(&mut buf, sign);
        buf
    } else {
        dft_direct(v, sign)
    };
    let norm = 1.0 / (n as f64).sqrt();
    for x in &mut out {
        *x *= norm;
    }
    out
}

/// Fourier transform along one subsystem of a raw amplitude buffer shaped by
/// `dims` (row-major, first dim most significant). The subsystem dimension
/// must be even (it represents 2N momentum labels m ∈ [-N+1, N]).
pub fn fourier_change_of_basis(
    amps: &mut [C64],
    dims: &[usize],
    axis: usize,
    direction: FourierDirection,
) -> Result<()> {
    if axis >= dims.len() {
        return Err(Error::InvalidArg(format!("axis {axis} out of range")));
    }
    let d = dims[axis];
    if !d.is_multiple_of(2) {
        return Err(Error::InvalidArg(format!(
            "fourier subsystem dimension must be even, got {d}"
        )));
    }
    let total: usize = dims.iter().product();
    if amps.len() != total {
        return Err(Error::Dim("amplitude buffer does not match dims".into()));
    }
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut stripe = vec![C64::new(0.0, 0.0); d];
    for o in 0..outer {
        let base_o = o * d * inner;
        for i in 0..inner {
            for k in 0..d {
                stripe[k] = amps[base_o + k * inner + i];
            }
            let transformed = fourier_vector(&stripe, direction);
            for k in 0..d {
                amps[base_o + k * inner + i] = transformed[k];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0)],
        ])
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ])
    }

    fn rand_complex(seed: u64, n: usize) -> Vec<C64> {
        // tiny deterministic LCG so tensor tests don't pull in the RNG stack
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        (0..n).map(|_| c(next(), next())).collect()
    }

    fn rand_hermitian(seed: u64, n: usize) -> ComplexMatrix {
        let g = ComplexMatrix {
            rows: n,
            cols: n,
            data: rand_complex(seed, n * n),
        };
        g.add(&g.dagger()).scale(c(0.5, 0.0))
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let zz = kron(&pauli_z(), &pauli_z());
        for (i, want) in [1.0, -1.0, -1.0, 1.0].iter().enumerate() {
            assert_eq!(zz.at(i, i), c(*want, 0.0));
        }
    }

    #[test]
    fn kron_matches_index_loop_oracle() {
        let a = ComplexMatrix {
            rows: 2,
            cols: 2,
            data: rand_complex(7, 4),
        };
        let b = ComplexMatrix {
            rows: 3,
            cols: 3,
            data: rand_complex(8, 9),
        };
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        let want = a.at(i, j) * b.at(p, q);
                        assert!((k.at(i * 3 + p, j * 3 + q) - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_bell_marginal() {
        // ψ+ projector on 2x2
        let mut psi = ComplexMatrix::zeros(4, 4);
        for &r in &[0usize, 3] {
            for &cc in &[0usize, 3] {
                psi.set(r, cc, c(0.5, 0.0));
            }
        }
        let layout = SubsystemLayout::new(&[("a", 2), ("b", 2)]).unwrap();
        for keep in [["a"], ["b"]] {
            let (red, _) = partial_trace(&psi, &layout, &keep).unwrap();
            assert!(red.max_abs_diff(&ComplexMatrix::identity(2).scale(c(0.5, 0.0))) < 1e-15);
        }
    }

    #[test]
    fn partial_trace_product_state_factor() {
        let ra = rand_hermitian(3, 2);
        let ra = {
            // make it a legit trace-1 thing for the check tr_B[A⊗B] = A·tr(B)
            let t = ra.mul(&ra.dagger());
            let tr = t.trace().re;
            t.scale(c(1.0 / tr, 0.0))
        };
        let rb = {
            let g = rand_hermitian(4, 3);
            let t = g.mul(&g.dagger());
            let tr = t.trace().re;
            t.scale(c(1.0 / tr, 0.0))
        };
        let prod = kron(&ra, &rb);
        let layout = SubsystemLayout::new(&[("A", 2), ("B", 3)]).unwrap();
        let (red, _) = partial_trace(&prod, &layout, &["A"]).unwrap();
        assert!(red.max_abs_diff(&ra) < 1e-14);
    }

    #[test]
    fn partial_trace_three_subsystem_oracle() {
        let layout = SubsystemLayout::new(&[("x", 2), ("y", 3), ("z", 2)]).unwrap();
        let n = layout.total_dim();
        let g = ComplexMatrix {
            rows: n,
            cols: n,
            data: rand_complex(11, n * n),
        };
        let m = g.add(&g.dagger());
        let (red, rl) = partial_trace(&m, &layout, &["x", "z"]).unwrap();
        assert_eq!(rl.dims(), &[2, 2]);
        // brute-force index contraction
        let mut oracle = ComplexMatrix::zeros(4, 4);
        for x in 0..2 {
            for z in 0..2 {
                for xp in 0..2 {
                    for zp in 0..2 {
                        let mut acc = c(0.0, 0.0);
                        for y in 0..3 {
                            let r = (x * 3 + y) * 2 + z;
                            let cc = (xp * 3 + y) * 2 + zp;
                            acc += m.at(r, cc);
                        }
                        oracle.set(x * 2 + z, xp * 2 + zp, acc);
                    }
                }
            }
        }
        assert!(red.max_abs_diff(&oracle) < 1e-13);
        assert!((red.trace() - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_errors() {
        let layout = SubsystemLayout::new(&[("a", 2), ("b", 2)]).unwrap();
        let m = ComplexMatrix::identity(4);
        assert!(partial_trace(&m, &layout, &["nope"]).is_err());
        assert!(partial_trace(&m, &layout, &[]).is_err());
    }

    #[test]
    fn partial_transpose_product_and_involution() {
        let ra = rand_hermitian(21, 2);
        let rb = rand_hermitian(22, 2);
        let prod = kron(&ra, &rb);
        let layout = SubsystemLayout::new(&[("A", 2), ("B", 2)]).unwrap();
        let pt = partial_transpose(&prod, &layout, &["B"]).unwrap();
        assert!(pt.max_abs_diff(&kron(&ra, &rb.transpose())) < 1e-14);
        let back = partial_transpose(&pt, &layout, &["B"]).unwrap();
        assert!(back.max_abs_diff(&prod) < 1e-14);
    }

    #[test]
    fn partial_transpose_bell_spectrum() {
        let mut psi = ComplexMatrix::zeros(4, 4);
        for &r in &[0usize, 3] {
            for &cc in &[0usize, 3] {
                psi.set(r, cc, c(0.5, 0.0));
            }
        }
        let layout = SubsystemLayout::new(&[("a", 2), ("b", 2)]).unwrap();
        let pt = partial_transpose(&psi, &layout, &["b"]).unwrap();
        let eig = herm_eigen(&pt).unwrap();
        let want = [-0.5, 0.5, 0.5, 0.5];
        for (got, want) in eig.eigenvalues.iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(partial_transpose(&psi, &layout, &["a", "b"]).is_err());
    }

    #[test]
    fn herm_eigen_paulis() {
        let ez = herm_eigen(&pauli_z()).unwrap();
        assert!((ez.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((ez.eigenvalues[1] - 1.0).abs() < 1e-14);
        let ex = herm_eigen(&pauli_x()).unwrap();
        assert!((ex.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((ex.eigenvalues[1] - 1.0).abs() < 1e-14);
        // eigenvectors of σ_x are (|0⟩∓|1⟩)/√2 up to phase
        for k in 0..2 {
            let a0 = ex.eigenvectors.at(0, k).norm();
            let a1 = ex.eigenvectors.at(1, k).norm();
            assert!((a0 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((a1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn herm_eigen_reconstruction_16() {
        let m = rand_hermitian(99, 16);
        let eig = herm_eigen(&m).unwrap();
        let v = &eig.eigenvectors;
        assert!(v.unitarity_defect() < 1e-10);
        let mut rec = ComplexMatrix::zeros(16, 16);
        for k in 0..16 {
            for r in 0..16 {
                for cc in 0..16 {
                    rec.data[r * 16 + cc] +=
                        c(eig.eigenvalues[k], 0.0) * v.at(r, k) * v.at(cc, k).conj();
                }
            }
        }
        assert!(rec.max_abs_diff(&m) < 1e-10);
        let evsum: f64 = eig.eigenvalues.iter().sum();
        assert!((evsum - m.trace().re).abs() < 1e-10);
    }

    #[test]
    fn herm_eigen_rejects_asymmetric() {
        let mut m = pauli_z();
        m.set(0, 1, c(1e-6, 0.0));
        match herm_eigen(&m) {
            Err(Error::NotHermitian(a)) => assert!((a - 1e-6).abs() < 1e-12),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn unitary_exp_cases() {
        let u = unitary_exp(&pauli_z(), std::f64::consts::FRAC_PI_2).unwrap();
        assert!((u.at(0, 0) - c(0.0, -1.0)).norm() < 1e-12);
        assert!((u.at(1, 1) - c(0.0, 1.0)).norm() < 1e-12);
        let id = unitary_exp(&rand_hermitian(5, 4), 0.0).unwrap();
        assert!(id.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        let minus = unitary_exp(&pauli_x(), std::f64::consts::PI).unwrap();
        assert!(minus.max_abs_diff(&ComplexMatrix::identity(2).scale(c(-1.0, 0.0))) < 1e-12);
    }

    #[test]
    fn unitary_exp_matches_power_series() {
        let h = rand_hermitian(31, 4);
        let scale = 0.37;
        let u = unitary_exp(&h, scale).unwrap();
        assert!(u.unitarity_defect() < 1e-10);
        // power series at this small scale converges fast
        let mut series = ComplexMatrix::identity(4);
        let mut term = ComplexMatrix::identity(4);
        for k in 1..30 {
            term = term.mul(&h).scale(c(0.0, -scale / k as f64));
            series = series.add(&term);
        }
        assert!(u.max_abs_diff(&series) < 1e-12);
    }

    #[test]
    fn trace_norm_cases() {
        assert!((trace_norm(&pauli_z()) - 2.0).abs() < 1e-12);
        // density-like matrix: GG†/tr
        let g = ComplexMatrix {
            rows: 3,
            cols: 3,
            data: rand_complex(17, 9),
        };
        let rho = g.mul(&g.dagger());
        let rho = rho.scale(c(1.0 / rho.trace().re, 0.0));
        assert!((trace_norm(&rho) - 1.0).abs() < 1e-12);
        // non-hermitian path: compare against the hermitian dilation trick
        let m = ComplexMatrix {
            rows: 3,
            cols: 3,
            data: rand_complex(23, 9),
        };
        let tn = trace_norm(&m);
        // oracle: singular values from eig of [[0, M],[M†, 0]] are ±σ_i
        let mut dil = ComplexMatrix::zeros(6, 6);
        for r in 0..3 {
            for cc in 0..3 {
                dil.set(r, cc + 3, m.at(r, cc));
                dil.set(r + 3, cc, m.at(cc, r).conj());
            }
        }
        let eig = herm_eigen(&dil).unwrap();
        let oracle: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>() / 2.0;
        assert!((tn - oracle).abs() < 1e-10);
    }

    #[test]
    fn fourier_momentum_eigenstates() {
        let d = 8;
        // |m=0⟩ → uniform 1/√d
        let mut v = vec![c(0.0, 0.0); d];
        v[0] = c(1.0, 0.0);
        let pos = fourier_vector(&v, FourierDirection::Forward);
        for x in &pos {
            assert!((x - c(1.0 / (d as f64).sqrt(), 0.0)).norm() < 1e-14);
        }
        // |m=1⟩ → e^{iθ_j}/√d, against the direct O(d²) oracle
        let mut v1 = vec![c(0.0, 0.0); d];
        v1[1] = c(1.0, 0.0);
        let pos1 = fourier_vector(&v1, FourierDirection::Forward);
        for (j, x) in pos1.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * j as f64 / d as f64;
            let want = C64::from_polar(1.0 / (d as f64).sqrt(), th);
            assert!((x - want).norm() < 1e-13);
        }
        let oracle = dft_direct(&v1, 1.0)
            .into_iter()
            .map(|x| x / (d as f64).sqrt())
            .collect::<Vec<_>>();
        for (a, b) in pos1.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn fourier_round_trip_and_norm() {
        for d in [8usize, 12, 16] {
            let v = rand_complex(d as u64, d);
            let fwd = fourier_vector(&v, FourierDirection::Forward);
            let back = fourier_vector(&fwd, FourierDirection::Inverse);
            for (a, b) in v.iter().zip(&back) {
                assert!((a - b).norm() < 1e-12);
            }
            let n0: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            let n1: f64 = fwd.iter().map(|x| x.norm_sqr()).sum();
            assert!((n0 - n1).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_on_axis_matches_whole_vector() {
        // transform axis 1 of a (2, 4, 3) buffer; compare against manual stripes
        let dims = [2usize, 4, 3];
        let mut amps = rand_complex(77, 24);
        let orig = amps.clone();
        fourier_change_of_basis(&mut amps, &dims, 1, FourierDirection::Forward).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let stripe: Vec<C64> = (0..4).map(|k| orig[(o * 4 + k) * 3 + i]).collect();
                let t = fourier_vector(&stripe, FourierDirection::Forward);
                for k in 0..4 {
                    assert!((amps[(o * 4 + k) * 3 + i] - t[k]).norm() < 1e-13);
                }
            }
        }
        // odd axis dimension is refused
        let mut bad = rand_complex(5, 6);
        assert!(fourier_change_of_basis(&mut bad, &[2, 3], 1, FourierDirection::Forward).is_err());
    }

    #[test]
    fn split_merge_round_trip() {
        let layout = SubsystemLayout::new(&[("p", 2), ("s", 8), ("r", 2)]).unwrap();
        let split = layout.split("s", &[("hi", 2), ("bit", 2), ("lo", 2)]).unwrap();
        assert_eq!(split.dims(), &[2, 2, 2, 2, 2]);
        assert_eq!(split.labels(), vec!["p", "hi", "bit", "lo", "r"]);
        let merged = split.merge(&["hi", "bit", "lo"], "s").unwrap();
        assert_eq!(merged, layout);
        // bad splits
        assert!(layout.split("s", &[("a", 3), ("b", 2)]).is_err());
        assert!(layout.split("s", &[("p", 4), ("b", 2)]).is_err());
        assert!(split.merge(&["bit", "hi"], "s").is_err());
        assert!(split.merge(&["hi", "lo"], "s").is_err());
    }

    #[test]
    fn reorder_subsystems_round_trip() {
        let layout = SubsystemLayout::new(&[("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let n = layout.total_dim();
        let m = ComplexMatrix {
            rows: n,
            cols: n,
            data: rand_complex(42, n * n),
        };
        let (r1, l1) = reorder_subsystems(&m, &layout, &["c", "a", "b"]).unwrap();
        assert_eq!(l1.dims(), &[2, 2, 3]);
        let (r2, _) = reorder_subsystems(&r1, &l1, &["a", "b", "c"]).unwrap();
        assert!(r2.max_abs_diff(&m) < 1e-15);
        // spot-check one entry against index arithmetic
        // new order (c,a,b): new index (c,a,b) → old index (a,b,c)
        let (ci, ai, bi) = (1usize, 0usize, 2usize);
        let new_row = (ci * 2 + ai) * 3 + bi;
        let old_row = (ai * 3 + bi) * 2 + ci;
        assert_eq!(r1.at(new_row, new_row), m.at(old_row, old_row));
    }

    #[test]
    fn trace_product_matches_full_multiplication() {
        let a = ComplexMatrix {
            rows: 6,
            cols: 6,
            data: rand_complex(71, 36),
        };
        let b = ComplexMatrix {
            rows: 6,
            cols: 6,
            data: rand_complex(72, 36),
        };
        let fast = a.trace_product(&b);
        let slow = a.mul(&b).trace();
        assert!((fast - slow).norm() < 1e-12);
    }

    #[test]
    fn cholesky_witness_separates_psd_from_indefinite() {
        // Gram matrices are PSD by construction
        let g = ComplexMatrix {
            rows: 8,
            cols: 8,
            data: rand_complex(73, 64),
        };
        let psd = g.dagger().mul(&g);
        assert!(cholesky_psd_witness(&psd, 1e-9));

        // rank-deficient but PSD: a projector padded with a zero block
        let mut proj = ComplexMatrix::zeros(4, 4);
        proj.set(0, 0, c(1.0, 0.0));
        proj.set(1, 1, c(1.0, 0.0));
        assert!(cholesky_psd_witness(&proj, 1e-9));

        // one slightly negative direction beyond the shift must be rejected
        let mut dented = psd.clone();
        let eig = herm_eigen(&psd).unwrap();
        let shift = -(eig.eigenvalues[0] + 1e-6);
        dented.add_assign_scaled(&ComplexMatrix::identity(8), c(shift, 0.0));
        assert!(!cholesky_psd_witness(&dented, 1e-9));

        // NaN poisoning must not be certified
        let mut bad = proj;
        bad.set(2, 2, c(f64::NAN, 0.0));
        assert!(!cholesky_psd_witness(&bad, 1e-9));
    }
}
