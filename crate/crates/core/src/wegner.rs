//! Event machinery behind the Wegner-type estimate: spectral annulus events
//! and their brute-force classifier, rank-one eigenvalue pushing, eigenvalue
//! paths with the Feynman-Hellmann derivative, eigenfunction mass sets and
//! counts, cone descent, and Monte Carlo resolvent-norm statistics.

use crate::ensembles::{sample_potential, Potential, PotentialField};
use crate::error::{CoreError, Result};
use crate::lattice::{cone_layer, ConeSpec, Cube, Site};
use crate::operators::{
    assemble, eigendecompose_with_cap, resolvent_norm, spectral_distance_near_bottom,
    HamiltonianInstance, ResolventSolver,
};
use crate::rng;
use nalgebra::{DMatrix, DVector};
use std::collections::HashSet;

// ---------------------------------------------------------------------------
// Scales and annulus events
// ---------------------------------------------------------------------------

/// Six decreasing dyadic scales with the sandwich
/// `L_j^{1-2 delta} >= L_{j+1} >= L_j^{1-eps/2}` for j = 0..4, plus the
/// constant entering the annulus radii.
#[derive(Clone, Copy, Debug)]
pub struct WegnerScales {
    pub l: [i64; 6],
    pub epsilon: f64,
    pub delta: f64,
    pub c_shift: f64,
}

impl WegnerScales {
    pub fn new(l: [i64; 6], epsilon: f64, delta: f64, c_shift: f64) -> Result<Self> {
        if !(0.0 < delta && delta < epsilon && epsilon < 1.0) {
            return Err(CoreError::Domain(format!(
                "need 0 < delta < epsilon < 1, got delta={delta} epsilon={epsilon}"
            )));
        }
        for &s in &l {
            if s < 2 || s.count_ones() != 1 {
                return Err(CoreError::Domain(format!("scale {s} not dyadic (>= 2)")));
            }
        }
        for j in 0..5 {
            let (a, b) = (l[j] as f64, l[j + 1] as f64);
            if b >= a {
                return Err(CoreError::Domain("scales must decrease".into()));
            }
            if b > a.powf(1.0 - 2.0 * delta) + 1e-9 {
                return Err(CoreError::Domain(format!(
                    "upper sandwich fails at j={j}: {b} > {a}^(1-2delta)"
                )));
            }
            if b + 1e-9 < a.powf(1.0 - epsilon / 2.0) {
                return Err(CoreError::Domain(format!(
                    "lower sandwich fails at j={j}: {b} < {a}^(1-eps/2)"
                )));
            }
        }
        if (l[2] - l[4]) as f64 + c_shift <= 0.0 {
            return Err(CoreError::Domain(
                "annulus radii need L2 - L4 + C > 0".into(),
            ));
        }
        Ok(WegnerScales {
            l,
            epsilon,
            delta,
            c_shift,
        })
    }

    /// `s_i = exp(-L1 + (L2 - L4 + C) i)`.
    pub fn annulus_radius(&self, i: usize) -> f64 {
        let growth = (self.l[2] - self.l[4]) as f64 + self.c_shift;
        (-(self.l[1] as f64) + growth * i as f64).exp()
    }
}

/// One spectral annulus event: eigenvalues `k1..k2` (1-based, decreasing
/// order) inside the closed band of radius `s_lo` around `ebar`, and the
/// flanking eigenvalues at distance `>= s_hi`.
#[derive(Clone, Copy, Debug)]
pub struct AnnulusEvent {
    pub k1: usize,
    pub k2: usize,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl AnnulusEvent {
    pub fn new(k1: usize, k2: usize, s_lo: f64, s_hi: f64) -> Result<Self> {
        if k1 == 0 || k1 > k2 {
            return Err(CoreError::Domain(format!(
                "need 1 <= k1 <= k2, got ({k1}, {k2})"
            )));
        }
        if !(0.0 < s_lo && s_lo < s_hi) {
            return Err(CoreError::Domain(format!(
                "need 0 < s_lo < s_hi, got ({s_lo}, {s_hi})"
            )));
        }
        Ok(AnnulusEvent { k1, k2, s_lo, s_hi })
    }

    /// From a scale set and a level: `s_lo = s_ell`, `s_hi = s_{ell+1}`.
    pub fn from_scales(scales: &WegnerScales, k1: usize, k2: usize, ell: usize) -> Result<Self> {
        Self::new(
            k1,
            k2,
            scales.annulus_radius(ell),
            scales.annulus_radius(ell + 1),
        )
    }
}

/// Does the event hold for this decreasing eigenvalue list?  Boundary
/// indices use the sentinels `E_0 = +inf`, `E_{n+1} = -inf`.
pub fn annulus_event_holds(eigs: &[f64], ebar: f64, event: &AnnulusEvent) -> Result<bool> {
    let n = eigs.len();
    if event.k2 > n {
        return Err(CoreError::Domain(format!(
            "k2 = {} beyond dimension {n}",
            event.k2
        )));
    }
    debug_assert!(eigs.windows(2).all(|w| w[0] >= w[1]), "eigs must decrease");
    let at = |k: usize| -> f64 {
        if k == 0 {
            f64::INFINITY
        } else if k > n {
            f64::NEG_INFINITY
        } else {
            eigs[k - 1]
        }
    };
    let inner = (at(event.k1) - ebar).abs() <= event.s_lo
        && (at(event.k2) - ebar).abs() <= event.s_lo;
    let outer = (at(event.k1 - 1) - ebar).abs() >= event.s_hi
        && (at(event.k2 + 1) - ebar).abs() >= event.s_hi;
    Ok(inner && outer)
}

/// Union over interior index pairs `1 < k1 <= k2 < n` of the annulus events.
pub fn annulus_union_holds(eigs: &[f64], ebar: f64, s_lo: f64, s_hi: f64) -> bool {
    let n = eigs.len();
    for k1 in 2..n {
        for k2 in k1..n {
            let event = AnnulusEvent {
                k1,
                k2,
                s_lo,
                s_hi,
            };
            if annulus_event_holds(eigs, ebar, &event).unwrap() {
                return true;
            }
        }
    }
    false
}

/// The direct predicate the union is claimed to equal: the open annulus
/// holds no eigenvalue, the closed inner band holds at least one, and both
/// outer components hold at least one.
pub fn annulus_brute_predicate(eigs: &[f64], ebar: f64, s_lo: f64, s_hi: f64) -> bool {
    let empty_ring = !eigs
        .iter()
        .any(|&e| (e - ebar).abs() > s_lo && (e - ebar).abs() < s_hi);
    let inner = eigs.iter().any(|&e| (e - ebar).abs() <= s_lo);
    let above = eigs.iter().any(|&e| e - ebar >= s_hi);
    let below = eigs.iter().any(|&e| ebar - e >= s_hi);
    empty_ring && inner && above && below
}

// ---------------------------------------------------------------------------
// Rank-one eigenvalue pushing
// ---------------------------------------------------------------------------

/// Outcome of the rank-one push check.
#[derive(Clone, Copy, Debug)]
pub struct PushReport {
    /// Count of eigenvalues `>= r1` before and after adding
    /// `eta * e_k (x) e_k`.
    pub count_before: usize,
    pub count_after: usize,
    /// The trace inequality `count_after > count_before`.
    pub pushed: bool,
}

/// Verify hypotheses (1)-(5) of the eigenvalue-variation lemma on a symmetric
/// matrix and, when they hold, check that adding `eta e_k (x) e_k` (eta >= 1)
/// strictly increases the number of eigenvalues at or above `r1`.
///
/// Hypotheses, with eigenvalues `l_1 >= l_2 >= ...` and eigenvectors `v_*`:
///  1. 0 < r1 < r2 < r3 < r4 < r5 < 1
///  2. r1 <= c min(r3 r5, r2 r3 / r4)
///  3. some i, j: 0 < l_j <= l_i < r1 < r2 < l_{i-1}
///  4. |<v_j, e_k>|^2 >= r3 for that j
///  5. sum over r2 < l < r5 of |<v, e_k>|^2 <= r4
///
/// A failed hypothesis is reported by number.
pub fn eigen_push_check(
    a: &DMatrix<f64>,
    radii: [f64; 5],
    k: usize,
    eta: f64,
    c: f64,
) -> Result<PushReport> {
    let [r1, r2, r3, r4, r5] = radii;
    if !(0.0 < r1 && r1 < r2 && r2 < r3 && r3 < r4 && r4 < r5 && r5 < 1.0) {
        return Err(hypothesis(1, "radius ordering"));
    }
    if r1 > c * (r3 * r5).min(r2 * r3 / r4) {
        return Err(hypothesis(2, "r1 too large for c min(r3 r5, r2 r3 / r4)"));
    }
    if eta < 1.0 {
        return Err(CoreError::Domain(format!("eta must be >= 1, got {eta}")));
    }
    let n = a.nrows();
    if k >= n {
        return Err(CoreError::Domain(format!("coordinate {k} out of range")));
    }
    let se = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| se.eigenvalues[y].total_cmp(&se.eigenvalues[x]));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let overlap2: Vec<f64> = order
        .iter()
        .map(|&i| se.eigenvectors[(k, i)].powi(2))
        .collect();

    // no eigenvalue inside [r1, r2]
    if values.iter().any(|&v| (r1..=r2).contains(&v)) {
        return Err(hypothesis(3, "an eigenvalue sits inside [r1, r2]"));
    }
    // i = first index (decreasing) below r1; needs positivity and a gap above
    let i = match values.iter().position(|&v| v < r1) {
        Some(i) => i,
        None => return Err(hypothesis(3, "no eigenvalue below r1")),
    };
    if values[i] <= 0.0 {
        return Err(hypothesis(3, "largest eigenvalue below r1 is not positive"));
    }
    if i > 0 && values[i - 1] <= r2 {
        return Err(hypothesis(3, "no spectral gap reaching past r2"));
    }
    // j >= i with positive eigenvalue and enough mass on e_k
    let j_found = (i..n).any(|j| values[j] > 0.0 && overlap2[j] >= r3);
    if !j_found {
        return Err(hypothesis(4, "no positive eigenvalue below r1 carries r3 mass on e_k"));
    }
    let mid_mass: f64 = (0..n)
        .filter(|&l| values[l] > r2 && values[l] < r5)
        .map(|l| overlap2[l])
        .sum();
    if mid_mass > r4 {
        return Err(hypothesis(5, "mid-band mass exceeds r4"));
    }

    let count_before = values.iter().filter(|&&v| v >= r1).count();
    let mut pushed_m = a.clone();
    pushed_m[(k, k)] += eta;
    let after = pushed_m.symmetric_eigenvalues();
    let count_after = after.iter().filter(|&&v| v >= r1).count();
    Ok(PushReport {
        count_before,
        count_after,
        pushed: count_after > count_before,
    })
}

fn hypothesis(number: u8, detail: &str) -> CoreError {
    CoreError::Domain(format!("hypothesis ({number}) failed: {detail}"))
}

/// Randomized instance designed to satisfy hypotheses (1)-(5): radii drawn
/// with the required slack, a spectrum with a cluster below `r1`, a guarded
/// gap, and an eigenbasis whose `e_k` row mass is allocated per (4)-(5).
pub fn random_push_instance(seed: u64, dim: usize, c: f64) -> (DMatrix<f64>, [f64; 5], usize) {
    let mut rs = rng::Stream::new(seed);
    let dim = dim.max(6);
    // radii with ordering and the c-margin built in
    let r5 = rs.next_range(0.4, 0.9);
    let r4 = r5 * rs.next_range(0.3, 0.7);
    let r3 = r4 * rs.next_range(0.3, 0.8);
    let r2 = r3 * rs.next_range(0.3, 0.8);
    let r1 = (c * (r3 * r5).min(r2 * r3 / r4)).min(r2 * 0.9) * rs.next_range(0.3, 0.95);
    // spectrum: low cluster in (0, r1), mid band in (r2, r5), top at/above r5
    let low_count = 2 + rs.next_below(3);
    let mid_count = 1 + rs.next_below((dim - low_count) / 2);
    let mut values = Vec::with_capacity(dim);
    for _ in 0..low_count {
        values.push(r1 * rs.next_range(0.2, 0.95));
    }
    for _ in 0..mid_count {
        values.push(rs.next_range(r2 * 1.05, r5 * 0.95));
    }
    while values.len() < dim {
        values.push(rs.next_range(r5 * 1.001, 4.0));
    }
    // e_k row mass: big on one low vector, capped on the mid band; the low
    // vector must carry at least r3 (hypothesis 4), the mid band at most r4
    let k = rs.next_below(dim);
    let mut mass = vec![0.0; dim];
    let j = rs.next_below(low_count);
    let mid_total = r4 * rs.next_range(0.05, 0.6);
    mass[j] = (r3 * rs.next_range(1.02, 1.3)).min(1.0 - mid_total - 0.05).max(r3);
    for l in 0..mid_count {
        mass[low_count + l] = mid_total / mid_count as f64;
    }
    let assigned: f64 = mass.iter().sum();
    let rest_indices: Vec<usize> = (0..dim)
        .filter(|&l| mass[l] == 0.0)
        .collect();
    for &l in &rest_indices {
        mass[l] = (1.0 - assigned) / rest_indices.len() as f64;
    }
    let row: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    // orthonormal basis whose k-th row is `row`
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    basis.push(DVector::from_column_slice(&row));
    while basis.len() < dim {
        let mut v = DVector::from_fn(dim, |_, _| rs.next_normal());
        for b in &basis {
            let o = b.dot(&v);
            v -= b * o;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    // rows of the eigenvector matrix: row k = basis[0], others fill in order
    let mut vmat = DMatrix::zeros(dim, dim);
    let mut next = 1;
    for r in 0..dim {
        let b = if r == k {
            &basis[0]
        } else {
            let b = &basis[next];
            next += 1;
            b
        };
        for col in 0..dim {
            vmat[(r, col)] = b[col];
        }
    }
    let a = &vmat * DMatrix::from_diagonal(&DVector::from_column_slice(&values)) * vmat.transpose();
    (a, [r1, r2, r3, r4, r5], k)
}

// ---------------------------------------------------------------------------
// Feynman-Hellmann paths
// ---------------------------------------------------------------------------

/// Report for one diagonal-interpolation eigenvalue path.
#[derive(Clone, Debug)]
pub struct FhPathReport {
    pub s_nodes: Vec<f64>,
    pub energies: Vec<f64>,
    /// Feynman-Hellmann derivative at interior nodes (aligned with
    /// `s_nodes[1..len-1]`).
    pub fh_derivatives: Vec<f64>,
    pub centered_differences: Vec<f64>,
    pub max_relative_error: f64,
}

/// Track the k-th eigenvalue (0-based, decreasing order) of
/// `H(s) = H_start + s (H_end - H_start)` on a uniform grid, comparing the
/// Feynman-Hellmann derivative `<u_k, dH u_k>` against a centered finite
/// difference with a small step at every interior node.
///
/// The operators must differ only on the diagonal; a gap below 1e-9 to a
/// neighboring eigenvalue anywhere on the grid aborts with a crossing error.
pub fn fh_path(
    h_start: &HamiltonianInstance,
    h_end: &HamiltonianInstance,
    k: usize,
    steps: usize,
) -> Result<FhPathReport> {
    if h_start.cube() != h_end.cube() {
        return Err(CoreError::Domain("operators on different cubes".into()));
    }
    if steps < 2 {
        return Err(CoreError::Domain("need at least 2 steps".into()));
    }
    let n = h_start.dim();
    if k >= n {
        return Err(CoreError::Domain(format!("eigenvalue index {k} out of range")));
    }
    let diag_delta = diagonal_difference(h_start, h_end)?;

    // interpolate the matrix diagonal directly so the path also serves
    // prebuilt toy operators
    let eig_at = |s: f64, with_vectors: bool| -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
        let mut csr = h_start.matrix().clone();
        for i in 0..csr.n {
            for idx in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                if csr.col[idx] == i {
                    csr.val[idx] += s * diag_delta[i];
                }
            }
        }
        let h = HamiltonianInstance::from_matrix(
            *h_start.cube(),
            h_start.potential().clone(),
            csr,
        );
        if with_vectors {
            let e = eigendecompose_with_cap(&h, usize::MAX)?;
            Ok((e.values, Some(e.vectors)))
        } else {
            Ok((crate::operators::eigenvalues_only(&h, usize::MAX)?, None))
        }
    };

    let mut s_nodes = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    let mut fh = Vec::new();
    let mut fd = Vec::new();
    let mut max_rel = 0.0f64;
    let h_diff = 1e-3 / steps as f64;
    for node in 0..=steps {
        let s = node as f64 / steps as f64;
        let (values, vectors) = eig_at(s, node != 0 && node != steps)?;
        // crossing guard around index k
        let gap_ok = (k == 0 || values[k - 1] - values[k] > 1e-9)
            && (k + 1 >= n || values[k] - values[k + 1] > 1e-9);
        if !gap_ok {
            return Err(CoreError::PathCrossing {
                s,
                gap: if k == 0 {
                    values[k] - values[k + 1]
                } else {
                    (values[k - 1] - values[k]).min(if k + 1 < n {
                        values[k] - values[k + 1]
                    } else {
                        f64::INFINITY
                    })
                },
            });
        }
        s_nodes.push(s);
        energies.push(values[k]);
        if let Some(vectors) = vectors {
            let u = vectors.column(k);
            let fh_val: f64 = u
                .iter()
                .enumerate()
                .map(|(i, &ui)| diag_delta[i] * ui * ui)
                .sum();
            let (plus, _) = eig_at(s + h_diff, false)?;
            let (minus, _) = eig_at(s - h_diff, false)?;
            let fd_val = (plus[k] - minus[k]) / (2.0 * h_diff);
            let scale = fh_val.abs().max(fd_val.abs());
            let rel = if scale < 1e-12 {
                0.0
            } else {
                (fh_val - fd_val).abs() / scale
            };
            max_rel = max_rel.max(rel);
            fh.push(fh_val);
            fd.push(fd_val);
        }
    }
    Ok(FhPathReport {
        s_nodes,
        energies,
        fh_derivatives: fh,
        centered_differences: fd,
        max_relative_error: max_rel,
    })
}

fn diagonal_difference(
    h_start: &HamiltonianInstance,
    h_end: &HamiltonianInstance,
) -> Result<Vec<f64>> {
    let (a, b) = (h_start.matrix(), h_end.matrix());
    if a.n != b.n || a.row_ptr != b.row_ptr || a.col != b.col {
        return Err(CoreError::Domain("operators differ in structure".into()));
    }
    let mut delta = vec![0.0; a.n];
    for i in 0..a.n {
        for idx in a.row_ptr[i]..a.row_ptr[i + 1] {
            let (va, vb) = (a.val[idx], b.val[idx]);
            if a.col[idx] == i {
                delta[i] = vb - va;
            } else if (va - vb).abs() > 1e-14 {
                return Err(CoreError::Domain(
                    "operators differ off the diagonal".into(),
                ));
            }
        }
    }
    Ok(delta)
}

// ---------------------------------------------------------------------------
// Mass sets, counts, cone descent
// ---------------------------------------------------------------------------

/// `S1 = sites off F' with xi = 1 - i`; `S2 = sites off F' with xi = i and
/// |u| at or above the threshold`.
pub fn mass_sets(
    u: &[f64],
    cube: &Cube,
    xi_on: &HashSet<Site>,
    excluded: &HashSet<Site>,
    i: u8,
    threshold: f64,
) -> (Vec<Site>, Vec<Site>) {
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for (idx, site) in cube.sites().into_iter().enumerate() {
        if excluded.contains(&site) {
            continue;
        }
        let xi = u8::from(xi_on.contains(&site));
        if xi == 1 - i {
            s1.push(site);
        } else if u[idx].abs() >= threshold {
            s2.push(site);
        }
    }
    (s1, s2)
}

/// `|{ n in cube minus excluded : |u(n)| >= threshold_factor ||u||_2 }|`.
pub fn uc_mass_count(
    u: &[f64],
    cube: &Cube,
    threshold_factor: f64,
    excluded: &HashSet<Site>,
) -> usize {
    let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cut = threshold_factor * norm;
    cube.sites()
        .into_iter()
        .enumerate()
        .filter(|(idx, site)| !excluded.contains(site) && u[*idx].abs() >= cut)
        .count()
}

/// Result of a cone-descent search.
#[derive(Clone, Copy, Debug)]
pub struct ConeDescent {
    pub site: Site,
    pub value: f64,
    pub threshold: f64,
    /// `|u(site)| >= (K + 11)^{-k} |u(apex)|`; guaranteed by the cone
    /// inequality, so a false value is a reportable finding.
    pub satisfied: bool,
}

/// Search layers `k` and `k-1` of the cone for a site carrying at least
/// `(K + 11)^{-k}` of the apex mass.
pub fn cone_descent(
    u: &[f64],
    cube: &Cube,
    k_bound: f64,
    apex: &Site,
    axis: usize,
    sign: i64,
    k: i64,
) -> Result<ConeDescent> {
    if k < 1 {
        return Err(CoreError::Domain("layer index must be >= 1".into()));
    }
    let apex_idx = cube
        .index_of(apex)
        .ok_or_else(|| CoreError::Domain(format!("apex {apex:?} outside cube")))?;
    let spec = ConeSpec::new(*apex, axis, sign)?;
    let mut candidates = cone_layer(&spec, k, cube);
    if candidates.is_empty() {
        return Err(CoreError::Domain(format!(
            "layer {k} misses the cube for apex {apex:?}"
        )));
    }
    candidates.extend(cone_layer(&spec, k - 1, cube));
    let mut best: Option<(Site, f64)> = None;
    for site in candidates {
        let v = u[cube.index_of(&site).unwrap()].abs();
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((site, v));
        }
    }
    let (site, value) = best.expect("nonempty candidate list");
    let threshold = (k_bound + 11.0).powi(-(k as i32)) * u[apex_idx].abs();
    Ok(ConeDescent {
        site,
        value,
        threshold,
        satisfied: value + 1e-300 >= threshold,
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo resolvent statistics
// ---------------------------------------------------------------------------

/// One Monte Carlo trial: does `||(H - ebar)^{-1}||` exceed `exp(l1)` for the
/// potential sampled in the trial's substream?  Compared in log space.
pub fn wegner_mc_trial(
    field: &PotentialField,
    cube: &Cube,
    ebar: f64,
    l1: f64,
    seed: u64,
    trial: u64,
) -> Result<bool> {
    let pot = sample_potential(field, cube, rng::substream(seed, trial))?;
    let h = assemble(cube, &pot)?;
    let dist = spectral_distance_near_bottom(&h, ebar, 24)?;
    Ok(-dist.ln() > l1)
}

/// Monte Carlo estimate with a Wilson 95% interval.
#[derive(Clone, Copy, Debug)]
pub struct WegnerMcEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exceed_count: usize,
    pub trials: usize,
}

/// `P[||(H - ebar)^{-1}|| > e^{l1}]` over independent per-trial substreams of
/// `seed`; deterministic in the seed and independent of evaluation order.
pub fn wegner_mc(
    field: &PotentialField,
    cube: &Cube,
    ebar: f64,
    l1: f64,
    trials: usize,
    seed: u64,
) -> Result<WegnerMcEstimate> {
    if trials == 0 {
        return Err(CoreError::Domain("need at least one trial".into()));
    }
    let mut exceed = 0usize;
    for t in 0..trials {
        if wegner_mc_trial(field, cube, ebar, l1, seed, t as u64)? {
            exceed += 1;
        }
    }
    Ok(aggregate_wegner(exceed, trials))
}

/// Wilson-interval aggregation of trial outcomes (associative over counts).
pub fn aggregate_wegner(exceed: usize, trials: usize) -> WegnerMcEstimate {
    let (lo, hi) = wilson_interval(exceed, trials);
    WegnerMcEstimate {
        p_hat: exceed as f64 / trials as f64,
        ci_low: lo,
        ci_high: hi,
        exceed_count: exceed,
        trials,
    }
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

// ---------------------------------------------------------------------------
// Good-cube robustness probe
// ---------------------------------------------------------------------------

/// Report from the robustness probe.
#[derive(Clone, Debug)]
pub struct GoodProbeReport {
    pub good: bool,
    /// Index of the first failing probe (0 = the sampled potential itself).
    pub failing_probe: Option<usize>,
    pub probes_run: usize,
}

/// Desk-scale surrogate for the good-cube predicate: test the sampled
/// potential plus `probes` random redraws off the observed set `O`, requiring
/// `|(H' - ebar)^{-1}(x, y)| <= exp(L^{1-eps} - m |x-y|)` for every entry of
/// every probe.  Entry checks are norm-certified where the certificate
/// dominates, literal otherwise.
pub fn good_robustness_probe(
    field: &PotentialField,
    cube: &Cube,
    ebar: f64,
    observed: &HashSet<Site>,
    probes: usize,
    seed: u64,
    eps: f64,
    m: f64,
) -> Result<GoodProbeReport> {
    let base = sample_potential(field, cube, seed)?;
    let prefactor_exp = (cube.radius as f64).powf(1.0 - eps);
    for probe in 0..=probes {
        let pot = if probe == 0 {
            base.clone()
        } else {
            let redraw = sample_potential(field, cube, rng::substream(seed, probe as u64))?;
            Potential::from_fn(*cube, |s| {
                if observed.contains(s) {
                    base.value_at(s).unwrap()
                } else {
                    redraw.value_at(s).unwrap()
                }
            })
        };
        let h = assemble(cube, &pot)?;
        let violations = entry_bound_violations(&h, ebar, prefactor_exp, m)?;
        if violations > 0 {
            return Ok(GoodProbeReport {
                good: false,
                failing_probe: Some(probe),
                probes_run: probe + 1,
            });
        }
    }
    Ok(GoodProbeReport {
        good: true,
        failing_probe: None,
        probes_run: probes + 1,
    })
}

fn entry_bound_violations(
    h: &HamiltonianInstance,
    ebar: f64,
    prefactor_exp: f64,
    rate: f64,
) -> Result<usize> {
    let cube = h.cube();
    let norm = resolvent_norm(h, ebar, None)?;
    let min_bound = (prefactor_exp - rate * cube.diameter()).exp();
    if norm <= min_bound {
        return Ok(0);
    }
    let sites = cube.sites();
    let n = h.dim();
    let solver = ResolventSolver::new(h, ebar);
    let mut violations = 0;
    for yi in 0..n {
        let col = solver.column(yi)?;
        for xi in 0..n {
            let bound = (prefactor_exp - rate * sites[xi].dist(&sites[yi])).exp();
            if col[xi].abs() > bound + 1e-12 {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// The n-flip on site subsets: toggle membership of one site.
pub fn flip_site(xi: &HashSet<Site>, n: &Site) -> HashSet<Site> {
    let mut out = xi.clone();
    if !out.remove(n) {
        out.insert(*n);
    }
    out
}

/// Bitmask flip re-exported next to the site-level one.
pub use crate::combinatorics::flip as flip_mask;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{FieldRule, SiteDistribution};
    use crate::operators::eigendecompose;
    use crate::rng::Stream;

    fn desk_scales() -> WegnerScales {
        WegnerScales::new([256, 128, 64, 32, 16, 8], 0.5, 0.06, 1.0).unwrap()
    }

    #[test]
    fn scale_sandwich_is_validated() {
        assert!(WegnerScales::new([256, 128, 64, 32, 16, 8], 0.5, 0.06, 1.0).is_ok());
        // halving chain breaks the lower sandwich when epsilon is tiny
        assert!(WegnerScales::new([256, 128, 64, 32, 16, 8], 0.01, 0.001, 1.0).is_err());
        // growth constant must keep the radii increasing
        assert!(WegnerScales::new([256, 128, 64, 32, 16, 8], 0.5, 0.06, -49.0).is_err());
    }

    #[test]
    fn annulus_radii_grow() {
        let s = desk_scales();
        assert!(s.annulus_radius(0) < s.annulus_radius(1));
        assert!((s.annulus_radius(0) - (-(128f64)).exp()).abs() < 1e-300);
    }

    #[test]
    fn constructed_event_holds() {
        let (s_lo, s_hi) = (1e-3, 1e-1);
        let ebar = 5.0;
        let eigs = vec![ebar + 2.0 * s_hi, ebar, ebar - 2.0 * s_hi];
        let event = AnnulusEvent::new(2, 2, s_lo, s_hi).unwrap();
        assert!(annulus_event_holds(&eigs, ebar, &event).unwrap());
    }

    #[test]
    fn far_spectrum_never_triggers() {
        let (s_lo, s_hi) = (1e-3, 1e-1);
        let ebar = 5.0;
        let eigs = vec![ebar + 3.0, ebar + 2.0, ebar - 2.5];
        for k1 in 1..=3usize {
            for k2 in k1..=3 {
                let event = AnnulusEvent::new(k1, k2, s_lo, s_hi).unwrap();
                assert!(!annulus_event_holds(&eigs, ebar, &event).unwrap());
            }
        }
    }

    #[test]
    fn classifier_equals_brute_force_on_random_configurations() {
        let mut rs = Stream::new(321);
        let mut hits = 0;
        for _ in 0..20_000 {
            let n = 3 + rs.next_below(8);
            let ebar = 1.0;
            let s_lo = [1e-3, 1e-2, 0.05][rs.next_below(3)];
            let s_hi = s_lo * [2.0, 5.0, 20.0][rs.next_below(3)];
            let mut eigs: Vec<f64> = (0..n)
                .map(|_| {
                    // mix of band, annulus, and far values to hit all branches
                    match rs.next_below(4) {
                        0 => ebar + (rs.next_unit() - 0.5) * 2.0 * s_lo,
                        1 => ebar + (rs.next_unit() - 0.5) * 2.0 * s_hi,
                        2 => ebar + (0.5 + rs.next_unit()) * 3.0 * s_hi,
                        _ => ebar - (0.5 + rs.next_unit()) * 3.0 * s_hi,
                    }
                })
                .collect();
            eigs.sort_by(|a, b| b.total_cmp(a));
            let union = annulus_union_holds(&eigs, ebar, s_lo, s_hi);
            let brute = annulus_brute_predicate(&eigs, ebar, s_lo, s_hi);
            assert_eq!(union, brute, "eigs {eigs:?} s=({s_lo},{s_hi})");
            hits += usize::from(union);
        }
        assert!(hits > 0, "sampler never produced the event");
    }

    #[test]
    fn push_check_on_diagonal_example() {
        // diagonal matrix, coordinate aligned with the low eigenvalue;
        // c min(r3 r5, r2 r3 / r4) = 1.5625e-4 leaves room for r1 = 1e-4
        let radii = [1e-4, 1e-2, 0.05, 0.2, 0.5];
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[5e-5, 2.0]));
        let rep = eigen_push_check(&a, radii, 0, 1.0, 1.0 / 16.0).unwrap();
        assert!(rep.pushed);
        assert_eq!(rep.count_before + 1, rep.count_after);
    }

    #[test]
    fn push_monotone_in_eta() {
        let (a, radii, k) = {
            let (a, r, k) = random_push_instance(7, 24, 1.0 / 16.0);
            (a, r, k)
        };
        for eta in [1.0, 3.0] {
            let rep = eigen_push_check(&a, radii, k, eta, 1.0 / 16.0).unwrap();
            assert!(rep.pushed, "eta = {eta}");
        }
    }

    #[test]
    fn hypothesis_failures_are_numbered() {
        let radii = [1e-4, 1e-2, 0.05, 0.2, 0.5];
        // (4): no mass on e_k for any low eigenvector
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[5e-5, 2.0]));
        match eigen_push_check(&a, radii, 1, 1.0, 1.0 / 16.0) {
            Err(CoreError::Domain(msg)) => assert!(msg.contains("(4)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        // (1): unordered radii
        match eigen_push_check(&a, [0.2, 0.1, 0.3, 0.4, 0.5], 0, 1.0, 1.0 / 16.0) {
            Err(CoreError::Domain(msg)) => assert!(msg.contains("(1)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        // (2): r1 beyond the c-margin
        match eigen_push_check(&a, [1e-2, 2e-2, 0.05, 0.2, 0.5], 0, 1.0, 1.0 / 16.0) {
            Err(CoreError::Domain(msg)) => assert!(msg.contains("(2)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn randomized_push_instances_always_push() {
        for seed in 0..60 {
            let (a, radii, k) = random_push_instance(seed, 12 + (seed as usize % 38), 1.0 / 16.0);
            let rep = eigen_push_check(&a, radii, k, 1.0, 1.0 / 16.0)
                .unwrap_or_else(|e| panic!("seed {seed}: hypotheses failed: {e}"));
            assert!(rep.pushed, "seed {seed}");
        }
    }

    #[test]
    fn fh_constant_path_has_zero_derivative() {
        // top eigenvalue of the free cube is simple; deeper indices sit in
        // degenerate clusters and would trip the crossing guard
        let cube = Cube::centered(1);
        let h = assemble(&cube, &Potential::constant(cube, 0.4)).unwrap();
        let rep = fh_path(&h, &h, 0, 4).unwrap();
        for d in &rep.fh_derivatives {
            assert_eq!(*d, 0.0);
        }
        assert_eq!(rep.max_relative_error, 0.0);
    }

    #[test]
    fn fh_two_level_closed_form() {
        // 2x2 toy via direct matrices: diagonal path d(s) = d0 + s delta on
        // a fixed symmetric coupling; analytic branch
        // E_±(s) = mean(s) ± sqrt(quarter_gap(s)^2 + c^2).
        use crate::operators::{CsrBuilder, HamiltonianInstance};
        let cube = Cube::centered(0);
        let c = 0.3;
        let build = |d0: f64, d1: f64| {
            let mut b = CsrBuilder::new(2, 4);
            b.push(0, d0);
            b.push(1, c);
            b.finish_row();
            b.push(0, c);
            b.push(1, d1);
            b.finish_row();
            HamiltonianInstance::from_matrix(cube, Potential::constant(cube, 0.0), b.build())
        };
        let start = build(1.0, 0.2);
        let end = build(1.5, 0.2);
        let rep = fh_path(&start, &end, 0, 5).unwrap();
        for (node, &s) in rep.s_nodes.iter().enumerate() {
            let d0 = 1.0 + 0.5 * s;
            let mean = 0.5 * (d0 + 0.2);
            let half = 0.5 * (d0 - 0.2);
            let want = mean + (half * half + c * c).sqrt();
            assert!(
                (rep.energies[node] - want).abs() < 1e-10,
                "s={s}: {} vs {want}",
                rep.energies[node]
            );
        }
        assert!(rep.max_relative_error <= 1e-4, "{}", rep.max_relative_error);
    }

    #[test]
    fn fh_matches_differences_on_random_paths() {
        let cube = Cube::centered(1);
        let mut rs = Stream::new(88);
        for _ in 0..3 {
            let start = Potential::from_fn(cube, |_| rs.next_unit());
            let end = Potential::from_fn(cube, |_| rs.next_unit());
            let hs = assemble(&cube, &start).unwrap();
            let he = assemble(&cube, &end).unwrap();
            match fh_path(&hs, &he, 5, 6) {
                Ok(rep) => assert!(
                    rep.max_relative_error <= 1e-4,
                    "rel err {}",
                    rep.max_relative_error
                ),
                Err(CoreError::PathCrossing { .. }) => {} // legitimate abort
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn fh_single_site_bump_moves_within_range() {
        let cube = Cube::centered(1);
        let base = Potential::constant(cube, 0.3);
        let bump = 0.7;
        let center = cube.index_of(&Site::ORIGIN).unwrap();
        let mut values = base.values.clone();
        values[center] += bump;
        let hs = assemble(&cube, &base).unwrap();
        let he = assemble(&cube, &Potential { cube, values }).unwrap();
        let rep = fh_path(&hs, &he, 26, 4).unwrap(); // ground state: simple
        let delta = rep.energies.last().unwrap() - rep.energies.first().unwrap();
        assert!(delta >= -1e-12 && delta <= bump + 1e-12, "delta {delta}");
    }

    #[test]
    fn mass_sets_partition_without_threshold() {
        let cube = Cube::centered(1);
        let mut rs = Stream::new(3);
        let u: Vec<f64> = (0..27).map(|_| rs.next_unit() - 0.5).collect();
        let xi: HashSet<Site> = cube
            .sites()
            .into_iter()
            .filter(|_| rs.next_unit() < 0.5)
            .collect();
        let excluded: HashSet<Site> = cube
            .sites()
            .into_iter()
            .filter(|_| rs.next_unit() < 0.2)
            .collect();
        let (s1, s2) = mass_sets(&u, &cube, &xi, &excluded, 0, 0.0);
        assert_eq!(s1.len() + s2.len(), 27 - excluded.len());
        // threshold above the max empties S2
        let (_, s2_empty) = mass_sets(&u, &cube, &xi, &excluded, 0, 1.0);
        assert!(s2_empty.is_empty());
    }

    #[test]
    fn delta_function_has_tiny_s2() {
        let cube = Cube::centered(1);
        let mut u = vec![0.0; 27];
        u[13] = 1.0;
        let xi: HashSet<Site> = cube.sites().into_iter().collect();
        let (_, s2) = mass_sets(&u, &cube, &xi, &HashSet::new(), 1, 0.5);
        assert!(s2.len() <= 1);
    }

    #[test]
    fn uc_count_of_flat_vector() {
        let cube = Cube::centered(1);
        let u = vec![1.0; 27];
        let count = uc_mass_count(&u, &cube, 1.0 / 28f64.sqrt(), &HashSet::new());
        assert_eq!(count, 27);
        assert_eq!(uc_mass_count(&u, &cube, 1.1, &HashSet::new()), 0);
    }

    #[test]
    fn ground_state_mass_count_beats_power_law() {
        let cube = Cube::centered(6);
        let h = assemble(&cube, &Potential::constant(cube, 0.0)).unwrap();
        let eig = crate::operators::extremal_eigs(&h, 1, crate::operators::Which::Low).unwrap();
        let u: Vec<f64> = eig.vectors.column(0).iter().copied().collect();
        let count = uc_mass_count(&u, &cube, (-6.0f64).exp(), &HashSet::new());
        let want = (6.0f64 / 2.0).powf(1.5);
        assert!(count as f64 >= want, "count {count} < {want}");
    }

    #[test]
    fn cone_descent_from_max_site_succeeds() {
        let cube = Cube::centered(4);
        let mut rs = Stream::new(15);
        let pot = Potential::from_fn(cube, |_| rs.next_unit());
        let h = assemble(&cube, &pot).unwrap();
        let eig = eigendecompose(&h).unwrap();
        let u: Vec<f64> = eig.vectors.column(eig.len() - 1).iter().copied().collect();
        let apex_idx = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let apex = cube.site_at(apex_idx);
        let k_bound = 12.0 + 1.0;
        for axis in 0..3 {
            for sign in [-1, 1] {
                let spec = ConeSpec::new(apex, axis, sign).unwrap();
                if cone_layer(&spec, 1, &cube).is_empty() {
                    continue;
                }
                let d = cone_descent(&u, &cube, k_bound, &apex, axis, sign, 1).unwrap();
                assert!(d.satisfied, "axis {axis} sign {sign}: {d:?}");
            }
        }
    }

    #[test]
    fn cone_descent_zero_apex_is_vacuous() {
        let cube = Cube::centered(2);
        let mut u = vec![0.0; cube.site_count()];
        u[0] = 1.0; // mass far from the chosen apex
        let apex = Site::ORIGIN;
        let d = cone_descent(&u, &cube, 13.0, &apex, 0, 1, 2).unwrap();
        assert!(d.satisfied, "zero apex mass makes any site qualify");
    }

    #[test]
    fn cone_descent_exhaustive_small_instance() {
        // every apex, axis, sign, k <= 3 for one eigenvector
        let cube = Cube::centered(3);
        let mut rs = Stream::new(99);
        let pot = Potential::from_fn(cube, |_| if rs.next_unit() < 0.5 { 0.0 } else { 1.0 });
        let h = assemble(&cube, &pot).unwrap();
        let eig = eigendecompose(&h).unwrap();
        let u: Vec<f64> = eig.vectors.column(eig.len() - 1).iter().copied().collect();
        let k_bound = 12.0 + 1.0;
        let mut failures = 0;
        for apex in cube.sites() {
            for axis in 0..3 {
                for sign in [-1i64, 1] {
                    for k in 1..=3i64 {
                        let spec = ConeSpec::new(apex, axis, sign).unwrap();
                        if cone_layer(&spec, k, &cube).is_empty() {
                            continue;
                        }
                        let d = cone_descent(&u, &cube, k_bound, &apex, axis, sign, k).unwrap();
                        failures += usize::from(!d.satisfied);
                    }
                }
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn wegner_mc_far_below_spectrum_is_zero() {
        let cube = Cube::centered(2);
        let field = PotentialField::new(
            FieldRule::Iid(SiteDistribution::bernoulli(0.5).unwrap()),
            1.0,
            0.2,
        )
        .unwrap();
        // ebar = -10: ||R|| <= 1/10, threshold e^{0} = 1
        let est = wegner_mc(&field, &cube, -10.0, 0.0, 40, 11).unwrap();
        assert_eq!(est.exceed_count, 0);
        assert!(est.ci_low == 0.0);
    }

    #[test]
    fn wegner_mc_tiny_threshold_catches_everything() {
        let cube = Cube::centered(1);
        let field = PotentialField::new(
            FieldRule::Iid(SiteDistribution::bernoulli(0.5).unwrap()),
            1.0,
            0.2,
        )
        .unwrap();
        // threshold e^{-3} = 0.05 is below 1/dist for ebar near the spectrum
        let est = wegner_mc(&field, &cube, 0.05, -3.0, 20, 5).unwrap();
        assert_eq!(est.exceed_count, 20);
    }

    #[test]
    fn wegner_mc_is_deterministic_and_order_free() {
        let cube = Cube::centered(1);
        let field = PotentialField::new(
            FieldRule::Iid(SiteDistribution::bernoulli(0.5).unwrap()),
            1.0,
            0.2,
        )
        .unwrap();
        let a = wegner_mc(&field, &cube, 0.05, 2.0, 30, 9).unwrap();
        let b = wegner_mc(&field, &cube, 0.05, 2.0, 30, 9).unwrap();
        assert_eq!(a.exceed_count, b.exceed_count);
        // out-of-order trial evaluation gives the same outcomes
        let mut exceed = 0;
        for t in (0..30u64).rev() {
            exceed += usize::from(wegner_mc_trial(&field, &cube, 0.05, 2.0, 9, t).unwrap());
        }
        assert_eq!(exceed, a.exceed_count);
    }

    #[test]
    fn good_probe_trivial_bounds_always_pass() {
        let cube = Cube::centered(1);
        let field = PotentialField::new(
            FieldRule::Iid(SiteDistribution::bernoulli(0.5).unwrap()),
            1.0,
            0.2,
        )
        .unwrap();
        let all: HashSet<Site> = cube.sites().into_iter().collect();
        // m = 0 and a huge prefactor: every instance is good
        let rep =
            good_robustness_probe(&field, &cube, -1.0, &all, 3, 7, -3.0, 0.0).unwrap();
        assert!(rep.good);
    }

    #[test]
    fn good_probe_monotone_in_probes() {
        let cube = Cube::centered(1);
        let field = PotentialField::new(
            FieldRule::Iid(SiteDistribution::uniform01().unwrap()),
            1.0,
            1.0 / 13.0,
        )
        .unwrap();
        let observed: HashSet<Site> = cube
            .sites()
            .into_iter()
            .filter(|s| s.0[0] == 0)
            .collect();
        // moderately demanding bound so that some redraws fail
        for seed in 0..6u64 {
            let zero = good_robustness_probe(&field, &cube, 0.05, &observed, 0, seed, 0.5, 0.8)
                .unwrap()
                .good;
            let many = good_robustness_probe(&field, &cube, 0.05, &observed, 6, seed, 0.5, 0.8)
                .unwrap()
                .good;
            // passing with more probes implies passing with fewer
            if many {
                assert!(zero, "seed {seed}: containment violated");
            }
        }
    }

    #[test]
    fn flip_fragility_on_constructed_instances() {
        // Diagonal toy: potentials act on decoupled sites, so the annulus
        // event and the push hypotheses are fully controlled.  Flipping any
        // site in S2 (band site with xi = 0) must exit the event.
        let iota = 1.0;
        let (s_lo, s_hi) = (1e-6, 1e-4);
        let ebar = 1.0;
        let n = 8usize;
        let mut rs = Stream::new(42);
        for _ in 0..20 {
            // base diagonal: two band values, rest far away on both sides
            let mut diag: Vec<f64> = vec![
                ebar + s_lo * (rs.next_unit() - 0.5),
                ebar + s_lo * (rs.next_unit() - 0.5),
            ];
            for _ in 2..n {
                if rs.next_unit() < 0.5 {
                    diag.push(ebar + s_hi * (2.0 + rs.next_unit()));
                } else {
                    diag.push(ebar - s_hi * (2.0 + rs.next_unit()));
                }
            }
            let mut eigs: Vec<f64> = diag.clone();
            eigs.sort_by(|a, b| b.total_cmp(a));
            let k1 = eigs.iter().position(|&e| (e - ebar).abs() <= s_lo).unwrap() + 1;
            let k2 = eigs.len()
                - eigs
                    .iter()
                    .rev()
                    .position(|&e| (e - ebar).abs() <= s_lo)
                    .unwrap();
            let event = AnnulusEvent::new(k1, k2, s_lo, s_hi).unwrap();
            assert!(annulus_event_holds(&eigs, ebar, &event).unwrap());

            // push hypotheses for the shifted, scaled matrix at a band site
            let band_site = if rs.next_unit() < 0.5 { 0 } else { 1 };
            let shifted: Vec<f64> = diag.iter().map(|d| (d - ebar + s_lo) / iota).collect();
            let a = DMatrix::from_diagonal(&DVector::from_column_slice(&shifted));
            let radii = [2.0 * s_lo / iota, s_hi / iota, 1e-3, 2e-3, 0.5];
            let rep = eigen_push_check(&a, radii, band_site, 1.0, 1.0 / 16.0).unwrap();
            assert!(rep.pushed);

            // the flip itself: raise that diagonal by iota; event must fail
            let mut flipped = diag.clone();
            flipped[band_site] += iota;
            let mut eigs2 = flipped;
            eigs2.sort_by(|a, b| b.total_cmp(a));
            assert!(
                !annulus_event_holds(&eigs2, ebar, &event).unwrap(),
                "event survived the flip"
            );
        }
    }
}
