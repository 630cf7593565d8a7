//! Finite-volume Hamiltonians on cubes: assembly with Dirichlet truncation,
//! dense and iterative eigensolvers, resolvent access, the lattice Green's
//! function, and spectral time evolution.

mod csr;
mod green;
mod lanczos;
mod solve;

pub use csr::{CsrBuilder, CsrMatrix};
pub use green::{lattice_green, lattice_green_nd};
pub use lanczos::{extremal_eigs, Which};
pub use solve::{
    dense_resolvent, resolvent_column, resolvent_entry, resolvent_norm,
    spectral_distance_near_bottom, ResolventSolver,
};

use crate::ensembles::Potential;
use crate::error::{CoreError, Result};
use crate::lattice::{Cube, Site};
use nalgebra::{Complex, DMatrix, DVector};
use std::collections::BTreeMap;

/// Default largest dimension handled by the dense eigensolver: a 23^3 cube.
pub const DEFAULT_DENSE_CAP: usize = 12_167;

/// `H = -Delta + V` restricted to a cube with Dirichlet truncation: diagonal
/// `2d + V_n`, off-diagonal `-1` exactly on nearest-neighbor pairs inside the
/// cube, edges leaving the cube dropped.
#[derive(Clone, Debug)]
pub struct HamiltonianInstance {
    cube: Cube,
    potential: Potential,
    matrix: CsrMatrix,
}

/// Assemble from a potential aligned with the cube's canonical site order.
pub fn assemble(cube: &Cube, potential: &Potential) -> Result<HamiltonianInstance> {
    if potential.cube != *cube {
        return Err(CoreError::Domain(
            "potential sampled on a different cube".into(),
        ));
    }
    if potential.values.len() != cube.site_count() {
        return Err(CoreError::Domain("potential missing site values".into()));
    }
    if let Some(v) = potential.values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(CoreError::Domain(format!(
            "potential values must be finite and >= 0, found {v}"
        )));
    }
    let n = cube.site_count();
    let sites = cube.sites();
    let mut b = CsrBuilder::new(n, 7 * n);
    for (i, s) in sites.iter().enumerate() {
        let mut entries: Vec<(usize, f64)> = cube
            .neighbors_in(s)?
            .iter()
            .map(|m| (cube.index_of(m).unwrap(), -1.0))
            .collect();
        entries.push((i, 6.0 + potential.values[i]));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            b.push(c, v);
        }
        b.finish_row();
    }
    Ok(HamiltonianInstance {
        cube: *cube,
        potential: potential.clone(),
        matrix: b.build(),
    })
}

/// Assemble from an explicit site map; every cube site must be present.
pub fn assemble_from_map(cube: &Cube, values: &BTreeMap<Site, f64>) -> Result<HamiltonianInstance> {
    let mut v = Vec::with_capacity(cube.site_count());
    for s in cube.sites() {
        match values.get(&s) {
            Some(&x) => v.push(x),
            None => {
                return Err(CoreError::Domain(format!(
                    "potential missing value at {s:?}"
                )))
            }
        }
    }
    assemble(
        cube,
        &Potential {
            cube: *cube,
            values: v,
        },
    )
}

impl HamiltonianInstance {
    /// Wrap a prebuilt symmetric matrix; used by probes that need operators
    /// outside the lattice family (diagonal hooks, toy models).
    pub fn from_matrix(cube: Cube, potential: Potential, matrix: CsrMatrix) -> Self {
        HamiltonianInstance {
            cube,
            potential,
            matrix,
        }
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    /// y = H x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    /// Upper bound on the spectrum: `4d + max V` (d = 3).
    pub fn spectral_sup(&self) -> f64 {
        12.0 + self.potential.max_value()
    }

    /// Index of the cube's center site.
    pub fn center_index(&self) -> usize {
        self.cube.index_of(&self.cube.center).unwrap()
    }
}

/// Eigendata listed in decreasing order with multiplicity; vectors are the
/// aligned columns.
#[derive(Clone, Debug)]
pub struct EigenData {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenData {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest eigenvalue in the data (the last entry).
    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("nonempty eigendata")
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }
}

/// Full dense decomposition with the default cap.
pub fn eigendecompose(h: &HamiltonianInstance) -> Result<EigenData> {
    eigendecompose_with_cap(h, DEFAULT_DENSE_CAP)
}

/// Full dense decomposition, decreasing order, deterministic tie-breaking:
/// after sorting, within numerically degenerate clusters (gap < 1e-9) each
/// vector is re-orthonormalized against its predecessors and oriented so its
/// first nonzero coordinate in site order is positive.
pub fn eigendecompose_with_cap(h: &HamiltonianInstance, cap: usize) -> Result<EigenData> {
    let n = h.dim();
    if n > cap {
        return Err(CoreError::DenseCap { dim: n, cap });
    }
    let dense = h.to_dense();
    let se = dense.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(i));
    }
    canonicalize_clusters(&values, &mut vectors);
    Ok(EigenData { values, vectors })
}

/// Eigenvalues only (no vectors), decreasing order.
pub fn eigenvalues_only(h: &HamiltonianInstance, cap: usize) -> Result<Vec<f64>> {
    let n = h.dim();
    if n > cap {
        return Err(CoreError::DenseCap { dim: n, cap });
    }
    let mut vals: Vec<f64> = h
        .to_dense()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

fn canonicalize_clusters(values: &[f64], vectors: &mut DMatrix<f64>) {
    let n = values.len();
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && (values[end - 1] - values[end]).abs() < 1e-9 {
            end += 1;
        }
        // re-orthonormalize the cluster block in index order
        for j in k..end {
            let mut col = vectors.column(j).into_owned();
            for prev in k..j {
                let p = vectors.column(prev);
                let overlap = p.dot(&col);
                col -= p * overlap;
            }
            let norm = col.norm();
            if norm > 1e-14 {
                col /= norm;
            }
            vectors.set_column(j, &col);
        }
        for j in k..end {
            orient_column(vectors, j);
        }
        k = end;
    }
}

fn orient_column(vectors: &mut DMatrix<f64>, j: usize) {
    let col = vectors.column(j);
    let max_abs = col.amax();
    let threshold = 1e-8 * max_abs.max(1e-300);
    if let Some(first) = col.iter().find(|v| v.abs() > threshold) {
        if *first < 0.0 {
            let negated = -col.into_owned();
            vectors.set_column(j, &negated);
        }
    }
}

/// Largest residual `|H u - E u|` and Gram deviation across an eigendata set.
pub fn eigendata_quality(h: &HamiltonianInstance, eig: &EigenData) -> (f64, f64) {
    let n = h.dim();
    let mut worst_res = 0.0f64;
    let mut hx = vec![0.0; n];
    for (k, &e) in eig.values.iter().enumerate() {
        let u: Vec<f64> = eig.vectors.column(k).iter().copied().collect();
        h.apply(&u, &mut hx);
        let res = hx
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - e * b) * (a - e * b))
            .sum::<f64>()
            .sqrt();
        worst_res = worst_res.max(res);
    }
    let gram = eig.vectors.transpose() * &eig.vectors;
    let m = eig.len();
    let mut worst_gram = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { 1.0 } else { 0.0 };
            worst_gram = worst_gram.max((gram[(i, j)] - want).abs());
        }
    }
    (worst_res, worst_gram)
}

/// `e^{-itH} psi0` through the provided (complete) eigendata.
pub fn evolve(eig: &EigenData, t: f64, psi0: &DVector<f64>) -> DVector<Complex<f64>> {
    let n = psi0.len();
    let coeffs: Vec<f64> = (0..eig.len())
        .map(|k| eig.vectors.column(k).dot(psi0))
        .collect();
    let mut out = DVector::from_element(n, Complex::new(0.0, 0.0));
    for (k, &e) in eig.values.iter().enumerate() {
        let phase = Complex::new(0.0, -t * e).exp() * coeffs[k];
        for i in 0..n {
            out[i] += phase * eig.vectors[(i, k)];
        }
    }
    out
}

/// Supremum over the time grid of
/// `|| <X>^b e^{-itH} chi_[0,e0](H) delta_center ||^s`, with `<X>` the
/// multiplication by the Euclidean norm of the site coordinate (relative to
/// the lattice origin).
///
/// `eig` must either be complete or contain every eigenvalue `<= e0` (a
/// partial low block whose largest value exceeds `e0`).
pub fn dynloc_moment(
    h: &HamiltonianInstance,
    eig: &EigenData,
    e0: f64,
    b: f64,
    s: f64,
    times: &[f64],
) -> Result<f64> {
    if s <= 0.0 || s > 1.0 {
        return Err(CoreError::Domain(format!("s must lie in (0,1], got {s}")));
    }
    if b < 0.0 {
        return Err(CoreError::Domain(format!("b must be >= 0, got {b}")));
    }
    let n = h.dim();
    if eig.len() < n && (eig.is_empty() || eig.values[0] <= e0) {
        return Err(CoreError::Domain(
            "partial eigendata does not bracket the spectral window".into(),
        ));
    }
    let below: Vec<usize> = (0..eig.len()).filter(|&k| eig.values[k] <= e0).collect();
    if below.is_empty() {
        return Ok(0.0);
    }
    let center = h.center_index();
    let weights: Vec<f64> = h
        .cube()
        .sites()
        .iter()
        .map(|site| site.norm().powf(b))
        .collect();
    let m = below.len();
    let coeff: Vec<f64> = below.iter().map(|&k| eig.vectors[(center, k)]).collect();
    // gram of weighted eigenvectors: g[k][l] = sum_n w_n^2 u_k(n) u_l(n)
    let mut g = vec![vec![0.0; m]; m];
    for (ki, &k) in below.iter().enumerate() {
        for (li, &l) in below.iter().enumerate().skip(ki) {
            let mut acc = 0.0;
            for i in 0..n {
                acc += weights[i] * weights[i] * eig.vectors[(i, k)] * eig.vectors[(i, l)];
            }
            g[ki][li] = acc;
            g[li][ki] = acc;
        }
    }
    let mut sup = 0.0f64;
    for &t in times {
        let mut val = 0.0;
        for ki in 0..m {
            for li in 0..m {
                let de = eig.values[below[ki]] - eig.values[below[li]];
                val += (t * de).cos() * coeff[ki] * coeff[li] * g[ki][li];
            }
        }
        sup = sup.max(val.max(0.0));
    }
    Ok(sup.powf(s / 2.0))
}
