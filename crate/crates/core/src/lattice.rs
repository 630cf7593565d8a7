//! Geometry of the cubic lattice: cubes with Dirichlet semantics, nearest
//! neighbors, cones and their layers, and dyadic covers.
//!
//! A cube of radius `L` centered at `n` is the sup-ball
//! `{m : max_i |m_i - n_i| <= L}` with side length `2L + 1`.  Site enumeration
//! is lexicographic; that ordering is the canonical index map used by every
//! operator built on a cube.  Graph adjacency is the usual `|.|_1 = 1`
//! relation.

use crate::error::{CoreError, Result};

/// A point of Z^3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub [i64; 3]);

impl Site {
    pub const ORIGIN: Site = Site([0, 0, 0]);

    pub fn new(x: i64, y: i64, z: i64) -> Self {
        Site([x, y, z])
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn add(&self, other: &Site) -> Site {
        Site([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap()
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn l1_dist(&self, other: &Site) -> i64 {
        self.sub(other).l1_norm()
    }

    pub fn linf_dist(&self, other: &Site) -> i64 {
        self.sub(other).linf_norm()
    }

    pub fn dist(&self, other: &Site) -> f64 {
        self.sub(other).norm()
    }
}

/// A sup-ball in Z^3 with Dirichlet restriction semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cube {
    pub center: Site,
    pub radius: i64,
}

impl Cube {
    pub fn new(center: Site, radius: i64) -> Result<Self> {
        if radius < 0 {
            return Err(CoreError::Domain(format!(
                "cube radius must be non-negative, got {radius}"
            )));
        }
        Ok(Cube { center, radius })
    }

    /// Centered at the origin.
    pub fn centered(radius: i64) -> Self {
        Cube::new(Site::ORIGIN, radius).expect("non-negative radius")
    }

    pub fn side(&self) -> i64 {
        2 * self.radius + 1
    }

    /// Number of sites, `(2L+1)^3`.
    pub fn site_count(&self) -> usize {
        let s = self.side() as usize;
        s * s * s
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.linf_dist(&self.center) <= self.radius
    }

    /// Lexicographically ordered enumeration of all sites.  This ordering is
    /// the canonical index map for operators on the cube.
    pub fn sites(&self) -> Vec<Site> {
        let l = self.radius;
        let c = self.center.0;
        let mut out = Vec::with_capacity(self.site_count());
        for x in (c[0] - l)..=(c[0] + l) {
            for y in (c[1] - l)..=(c[1] + l) {
                for z in (c[2] - l)..=(c[2] + l) {
                    out.push(Site([x, y, z]));
                }
            }
        }
        out
    }

    /// Index of `site` in the lexicographic enumeration, if inside.
    pub fn index_of(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let l = self.radius;
        let s = self.side();
        let d = site.sub(&self.center);
        let (ox, oy, oz) = (d.0[0] + l, d.0[1] + l, d.0[2] + l);
        Some(((ox * s + oy) * s + oz) as usize)
    }

    /// Site at position `idx` in the lexicographic enumeration.
    pub fn site_at(&self, idx: usize) -> Site {
        let s = self.side();
        let l = self.radius;
        let i = idx as i64;
        let oz = i % s;
        let oy = (i / s) % s;
        let ox = i / (s * s);
        Site([
            self.center.0[0] + ox - l,
            self.center.0[1] + oy - l,
            self.center.0[2] + oz - l,
        ])
    }

    /// All `m` in the cube with `|m - site|_1 = 1`.
    ///
    /// Dirichlet restriction: edges leaving the cube are dropped, so boundary
    /// sites simply have fewer neighbors.
    pub fn neighbors_in(&self, site: &Site) -> Result<Vec<Site>> {
        if !self.contains(site) {
            return Err(CoreError::Domain(format!(
                "site {site:?} outside cube centered {:?} radius {}",
                self.center, self.radius
            )));
        }
        let mut out = Vec::with_capacity(6);
        for axis in 0..3 {
            for step in [-1i64, 1] {
                let mut m = *site;
                m.0[axis] += step;
                if self.contains(&m) {
                    out.push(m);
                }
            }
        }
        Ok(out)
    }

    /// Largest pairwise Euclidean distance between sites of the cube.
    pub fn diameter(&self) -> f64 {
        let span = (2 * self.radius) as f64;
        span * 3f64.sqrt()
    }
}

/// A cone apex with direction data: axis `tau` in {0,1,2} and sign `iota`.
#[derive(Clone, Copy, Debug)]
pub struct ConeSpec {
    pub apex: Site,
    pub axis: usize,
    pub sign: i64,
}

impl ConeSpec {
    pub fn new(apex: Site, axis: usize, sign: i64) -> Result<Self> {
        if axis >= 3 {
            return Err(CoreError::Domain(format!("cone axis must be 0..3, got {axis}")));
        }
        if sign != 1 && sign != -1 {
            return Err(CoreError::Domain(format!("cone sign must be ±1, got {sign}")));
        }
        Ok(ConeSpec { apex, axis, sign })
    }
}

/// The `k`-th layer of the cone: sites `m` of `cube` with
/// `(apex - m)·e_tau = iota·k` and `|(m - apex)·e_tau| >= sum of the other
/// axis offsets in absolute value`.
///
/// An empty result signals that the layer misses the cube.  `k = 0` is the
/// degenerate layer consisting of the apex alone.
pub fn cone_layer(spec: &ConeSpec, k: i64, cube: &Cube) -> Vec<Site> {
    debug_assert!(k >= 0);
    let mut out = Vec::new();
    // (apex - m)·e_tau = iota k  =>  m_tau = apex_tau - iota k
    let plane = spec.apex.0[spec.axis] - spec.sign * k;
    let (u, v) = other_axes(spec.axis);
    for du in -k..=k {
        let rem = k - du.abs();
        for dv in -rem..=rem {
            let mut m = spec.apex;
            m.0[spec.axis] = plane;
            m.0[u] = spec.apex.0[u] + du;
            m.0[v] = spec.apex.0[v] + dv;
            if cube.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// All dyadic `scale`-cubes of a covering family for `target`.
///
/// Dyadic cubes have dyadic radius and centers that are integral multiples of
/// `scale / 2`.  The family returned here uses the sub-grid of such centers
/// with spacing `scale`, snapped so that a dyadic target covers itself.  It
/// covers the target, every member meets the target, the count is at most
/// `(2 L / scale + 2)^3`, and every target site sits at distance at least
/// `scale / 2 >= scale / 8` from the part of the target outside some member.
pub fn dyadic_cover(target: &Cube, scale: i64) -> Result<Vec<Cube>> {
    if scale < 1 || scale.count_ones() != 1 {
        return Err(CoreError::Domain(format!(
            "cover scale must be a power of two, got {scale}"
        )));
    }
    if target.radius < scale {
        return Err(CoreError::Domain(format!(
            "target radius {} smaller than cover scale {scale}",
            target.radius
        )));
    }
    let half = scale / 2; // >= 1 only for scale >= 2; scale = 1 has half-grid step 1/2,
                          // realized below by snapping to integers directly.
    // Per-axis anchor: the multiple of scale/2 nearest to the target center
    // (for scale = 1 the grid is all of Z and the anchor is the center itself).
    let mut anchors = [0i64; 3];
    for (i, a) in anchors.iter_mut().enumerate() {
        let c = target.center.0[i];
        *a = if half == 0 {
            c
        } else {
            // nearest multiple of `half`, ties toward negative infinity
            let q = c.div_euclid(half);
            let r = c.rem_euclid(half);
            if 2 * r >= half {
                (q + 1) * half
            } else {
                q * half
            }
        };
    }
    let reach = target.radius + half.max(0);
    let mut centers_axis: Vec<Vec<i64>> = Vec::with_capacity(3);
    for i in 0..3 {
        let c = target.center.0[i];
        let mut vals = Vec::new();
        // anchor + scale * j within [c - reach, c + reach]
        let lo = c - reach;
        let hi = c + reach;
        let jmin = (lo - anchors[i]).div_euclid(scale)
            + i64::from((lo - anchors[i]).rem_euclid(scale) != 0);
        let jmax = (hi - anchors[i]).div_euclid(scale);
        for j in jmin..=jmax {
            vals.push(anchors[i] + scale * j);
        }
        centers_axis.push(vals);
    }
    let mut cover = Vec::new();
    for &x in &centers_axis[0] {
        for &y in &centers_axis[1] {
            for &z in &centers_axis[2] {
                cover.push(Cube::new(Site([x, y, z]), scale)?);
            }
        }
    }
    Ok(cover)
}

/// Euclidean distance from `a` to the sites of `target` lying outside
/// `member`; `None` when `member` swallows the whole target.
pub fn dist_to_uncovered(a: &Site, target: &Cube, member: &Cube) -> Option<f64> {
    debug_assert!(target.contains(a) && member.contains(a));
    let mut best: Option<i64> = None;
    for axis in 0..3 {
        for side in [-1i64, 1] {
            // nearest coordinate strictly outside the member along this axis
            let edge = member.center.0[axis] + side * (member.radius + 1);
            // must still be inside the target's slab on this axis
            if (edge - target.center.0[axis]).abs() > target.radius {
                continue;
            }
            let step = (edge - a.0[axis]).abs();
            best = Some(best.map_or(step, |b: i64| b.min(step)));
        }
    }
    best.map(|d| d as f64)
}
