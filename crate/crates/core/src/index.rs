//! Chern indices of band projections: the real-space three-cone formula,
//! a Brillouin-zone oracle on magnetic unit cells, and the half-plane split
//! of projections built from compactly supported orthonormal families.
//!
//! Orientation: sectors A, B, C follow each other counterclockwise, which
//! gives the lowest Landau band index +1. The Bloch oracle uses the same
//! orientation.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{packing_radius, Boundary, PointGeometry};
use crate::operator::measure_propagation;
use crate::spectral::Projection;
use crate::{c64, linalg, Error, Result};

/// Largest allowed ratio of cutoff-disk area to sample area.
pub const MAX_DISK_FRACTION: f64 = 0.5;

/// Three 120° sectors around `center`, restricted to the disk of radius
/// `cutoff_radius`. Sector A starts at angle `rotation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePartition {
    pub center: [f64; 2],
    pub cutoff_radius: f64,
    pub rotation: f64,
}

/// Default sector rotation; `tan` of it is irrational, so no lattice site
/// sits on a sector boundary ray.
pub const DEFAULT_ROTATION: f64 = 1.0 / PI;

/// Default cutoff radius as a fraction of the sample extent.
pub const DEFAULT_CUTOFF_FRACTION: f64 = 0.3;

impl ConePartition {
    /// Partition centered near the middle of the sample, just off the
    /// nearest plaquette center so no site lies at the apex.
    pub fn centered(geometry: &PointGeometry) -> Self {
        let l = geometry.extent();
        let a = if geometry.is_lattice() {
            geometry.spacing()
        } else {
            geometry.cell_area().sqrt()
        };
        let mid = ((0.5 * l / a).floor() + 0.5) * a;
        Self {
            center: [mid + 0.0123 * a, mid + 0.0071 * a],
            cutoff_radius: DEFAULT_CUTOFF_FRACTION * l,
            rotation: DEFAULT_ROTATION,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.cutoff_radius = radius;
        self
    }

    pub fn rotated(mut self, angle: f64) -> Self {
        self.rotation += angle;
        self
    }

    pub fn shifted(mut self, by: [f64; 2]) -> Self {
        self.center = [self.center[0] + by[0], self.center[1] + by[1]];
        self
    }

    fn check(&self, geometry: &PointGeometry) -> Result<()> {
        let fraction = PI * self.cutoff_radius.powi(2) / geometry.volume();
        if fraction > MAX_DISK_FRACTION {
            return Err(Error::CutoffTooLarge { fraction });
        }
        if !(self.cutoff_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "cutoff radius must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Sector (0, 1, 2 for A, B, C) of a point, or `None` outside the disk.
    pub fn sector_of(&self, geometry: &PointGeometry, point: [f64; 2]) -> Option<usize> {
        let d = geometry.displacement_between(self.center, point);
        if d[0].hypot(d[1]) >= self.cutoff_radius {
            return None;
        }
        let angle = (d[1].atan2(d[0]) - self.rotation).rem_euclid(TAU);
        // strictly-less: a point on a ray belongs to the sector it opens
        Some(((angle / (TAU / 3.0)) as usize).min(2))
    }

    /// Site lists of the three sectors.
    pub fn assign(&self, geometry: &PointGeometry) -> Result<[Vec<usize>; 3]> {
        self.check(geometry)?;
        let mut sectors: [Vec<usize>; 3] = Default::default();
        for (i, &p) in geometry.points().iter().enumerate() {
            if let Some(s) = self.sector_of(geometry, p) {
                sectors[s].push(i);
            }
        }
        Ok(sectors)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    RealSpace,
    Berry,
}

impl IndexMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            IndexMethod::RealSpace => "real_space",
            IndexMethod::Berry => "berry",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexResult {
    pub value: f64,
    pub error_estimate: f64,
    pub method: IndexMethod,
    pub parameters: String,
}

impl IndexResult {
    pub fn rounded(&self) -> i64 {
        self.value.round() as i64
    }
}

/// `12πi [Tr(P_AB P_BC P_CA) − Tr(P_AC P_CB P_BA)] = −24π Im Tr(P_AB P_BC P_CA)`
/// for a single partition.
pub fn cone_value(projection: &Projection, partition: &ConePartition) -> Result<f64> {
    let geometry = projection.geometry();
    let sectors = partition.assign(geometry)?;
    let k = projection.components();
    let expand = |sites: &[usize]| -> Vec<usize> {
        sites
            .iter()
            .flat_map(|&s| (0..k).map(move |c| s * k + c))
            .collect()
    };
    let [a, b, c] = [
        expand(&sectors[0]),
        expand(&sectors[1]),
        expand(&sectors[2]),
    ];
    if a.is_empty() || b.is_empty() || c.is_empty() {
        return Ok(0.0);
    }
    let p = projection.matrix();
    let block = |rows: &[usize], cols: &[usize]| {
        Mat::from_fn(rows.len(), cols.len(), |i, j| p[(rows[i], cols[j])])
    };
    let pab = block(&a, &b);
    let pbc = block(&b, &c);
    let pca = block(&c, &a);
    let t = linalg::trace((&(&pab * &pbc) * &pca).as_ref());
    Ok(-24.0 * PI * t.im)
}

/// Real-space Chern number with spread over cutoff radii ×{0.75, 1, 1.25}
/// and three partition rotations. Variants whose disk would exceed the area
/// limit are skipped.
pub fn real_space_chern(projection: &Projection, partition: &ConePartition) -> Result<IndexResult> {
    let value = cone_value(projection, partition)?;
    let geometry = projection.geometry();
    let mut spread = 0.0f64;
    for scale in [0.75, 1.0, 1.25] {
        for rot in [0.0, TAU / 9.0, 2.0 * TAU / 9.0] {
            let variant = partition
                .with_radius(partition.cutoff_radius * scale)
                .rotated(rot);
            if PI * variant.cutoff_radius.powi(2) / geometry.volume() > MAX_DISK_FRACTION {
                continue;
            }
            spread = spread.max((cone_value(projection, &variant)? - value).abs());
        }
    }
    Ok(IndexResult {
        value,
        error_estimate: spread,
        method: IndexMethod::RealSpace,
        parameters: format!(
            "center=({:.4};{:.4}) radius={:.4} rotation={:.4}",
            partition.center[0], partition.center[1], partition.cutoff_radius, partition.rotation
        ),
    })
}

/// Peierls model on a rectangular magnetic unit cell of `qx × qy` sites
/// (unit spacing), Landau-x gauge, flux `p/q` per plaquette with
/// `(p/q)·qx` integral, and optional on-site potentials (x-major, like the
/// lattice geometries).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochModel {
    pub cell: [usize; 2],
    pub flux: (i64, i64),
    pub onsite: Vec<f64>,
}

impl BlochModel {
    /// Minimal `q × 1` cell for flux `p/q`.
    pub fn hofstadter(p: i64, q: i64) -> Self {
        let q_abs = q.unsigned_abs() as usize;
        Self {
            cell: [q_abs, 1],
            flux: (p, q),
            onsite: vec![0.0; q_abs],
        }
    }

    /// Zero flux, `2 × 2` cell with `±delta` on the two checkerboard
    /// sublattices.
    pub fn staggered(delta: f64) -> Self {
        Self {
            cell: [2, 2],
            flux: (0, 1),
            onsite: vec![-delta, delta, delta, -delta],
        }
    }

    pub fn bands(&self) -> usize {
        self.cell[0] * self.cell[1]
    }

    fn validate(&self) -> Result<()> {
        let [qx, qy] = self.cell;
        let (p, q) = self.flux;
        if qx == 0 || qy == 0 || q == 0 {
            return Err(Error::InvalidArgument(
                "empty magnetic cell or zero denominator".into(),
            ));
        }
        if (p * qx as i64) % q != 0 {
            return Err(Error::InvalidArgument(format!(
                "flux {p}/{q} is not periodic over a cell of width {qx}"
            )));
        }
        if self.onsite.len() != qx * qy {
            return Err(Error::InvalidArgument(
                "one on-site value per cell site required".into(),
            ));
        }
        Ok(())
    }

    /// `H(K)` with bonds leaving the cell carrying `e^{∓iK}`; periodic in
    /// `K` with period `2π` in each component.
    pub fn hamiltonian(&self, k: [f64; 2]) -> Mat<c64> {
        let [qx, qy] = self.cell;
        let phi = self.flux.0 as f64 / self.flux.1 as f64;
        let n = qx * qy;
        let idx = |m: usize, l: usize| m * qy + l;
        let mut h = Mat::zeros(n, n);
        for m in 0..qx {
            for l in 0..qy {
                let s = idx(m, l);
                h[(s, s)] += c64::new(4.0 + self.onsite[s], 0.0);
                // x bond, no Peierls phase in this gauge
                let (tm, wrap) = if m + 1 < qx { (m + 1, 0.0) } else { (0, 1.0) };
                let v = -c64::from_polar(1.0, -k[0] * wrap);
                h[(idx(tm, l), s)] += v;
                h[(s, idx(tm, l))] += v.conj();
                // y bond
                let (tl, wrap) = if l + 1 < qy { (l + 1, 0.0) } else { (0, 1.0) };
                let v = -c64::from_polar(1.0, TAU * phi * m as f64 - k[1] * wrap);
                h[(idx(m, tl), s)] += v;
                h[(s, idx(m, tl))] += v.conj();
            }
        }
        h
    }
}

/// Lattice field-strength Chern number of bands `bands` (a contiguous range
/// of band indices counted from the bottom) on an `grid × grid` mesh of the
/// magnetic Brillouin zone. The result is an exact integer; the error
/// estimate is the deviation of the raw sum from it.
pub fn berry_chern(
    model: &BlochModel,
    bands: std::ops::Range<usize>,
    grid: usize,
) -> Result<IndexResult> {
    model.validate()?;
    let nb = model.bands();
    if bands.is_empty() || bands.end > nb {
        return Err(Error::InvalidArgument(format!(
            "band range {bands:?} outside 0..{nb}"
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidArgument(
            "Brillouin-zone grid must be at least 2×2".into(),
        ));
    }
    const CROSSING_TOL: f64 = 1e-6;
    let momentum =
        |i: usize, j: usize| [TAU * i as f64 / grid as f64, TAU * j as f64 / grid as f64];
    let mut frames: Vec<Mat<c64>> = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let k = momentum(i, j);
            let (ev, u) = linalg::hermitian_eigen(model.hamiltonian(k).as_ref())?;
            let below = bands.start.checked_sub(1).map(|b| ev[bands.start] - ev[b]);
            let above = ev.get(bands.end).map(|&x| x - ev[bands.end - 1]);
            for gap in [below, above].into_iter().flatten() {
                if gap < CROSSING_TOL {
                    return Err(Error::BandCrossing {
                        kx: k[0],
                        ky: k[1],
                        gap,
                    });
                }
            }
            frames.push(u.subcols(bands.start, bands.len()).to_owned());
        }
    }
    let frame = |i: usize, j: usize| &frames[(i % grid) * grid + (j % grid)];
    let link = |a: &Mat<c64>, b: &Mat<c64>| -> Result<c64> {
        let m = a.adjoint() * b;
        let d = determinant(&m);
        if d.norm() == 0.0 {
            return Err(Error::EigenFailure);
        }
        Ok(d / d.norm())
    };
    let mut total = 0.0;
    for i in 0..grid {
        for j in 0..grid {
            let u1 = link(frame(i, j), frame(i + 1, j))?;
            let u2 = link(frame(i + 1, j), frame(i + 1, j + 1))?;
            let u3 = link(frame(i + 1, j + 1), frame(i, j + 1))?;
            let u4 = link(frame(i, j + 1), frame(i, j))?;
            total += (u1 * u2 * u3 * u4).arg();
        }
    }
    let raw = total / TAU;
    let value = raw.round();
    Ok(IndexResult {
        value,
        error_estimate: (raw - value).abs(),
        method: IndexMethod::Berry,
        parameters: format!(
            "flux={}/{} cell={}x{} bands={}..{} grid={grid}",
            model.flux.0, model.flux.1, model.cell[0], model.cell[1], bands.start, bands.end
        ),
    })
}

/// Determinant by partial-pivot LU (the link matrices are small).
fn determinant(m: &Mat<c64>) -> c64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = c64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
            .expect("nonempty");
        if a[(pivot, col)].norm() == 0.0 {
            return c64::new(0.0, 0.0);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            det = -det;
        }
        let piv = a[(col, col)];
        det *= piv;
        for i in col + 1..n {
            let f = a[(i, col)] / piv;
            for j in col..n {
                let sub = a[(col, j)] * f;
                a[(i, j)] -= sub;
            }
        }
    }
    det
}

/// Orthonormal family `{w_γ}` with `supp w_γ ⊂ B_r(γ)`, `r` the packing
/// radius of the centers. Columns of `functions` are the `w_γ`.
#[derive(Clone, Debug)]
pub struct CompactBasis {
    geometry: Arc<PointGeometry>,
    centers: Vec<usize>,
    packing_radius: f64,
    functions: Mat<c64>,
}

impl CompactBasis {
    pub fn new(
        geometry: Arc<PointGeometry>,
        centers: Vec<usize>,
        functions: Mat<c64>,
    ) -> Result<Self> {
        if functions.nrows() != geometry.len() || functions.ncols() != centers.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} × {} function matrix, got {} × {}",
                geometry.len(),
                centers.len(),
                functions.nrows(),
                functions.ncols()
            )));
        }
        let r = packing_radius(&geometry, &centers)?;
        for (k, &g) in centers.iter().enumerate() {
            for x in 0..geometry.len() {
                if functions[(x, k)] != c64::new(0.0, 0.0) && !(geometry.distance(x, g) < r) {
                    return Err(Error::SupportViolation {
                        index: k,
                        site: x,
                        radius: r,
                    });
                }
            }
        }
        let gram = functions.adjoint() * &functions;
        for j in 0..gram.ncols() {
            for i in 0..gram.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                let e = gram[(i, j)];
                if (e - c64::new(target, 0.0)).norm() > 1e-10 {
                    return Err(Error::NotOrthonormal {
                        i,
                        j,
                        re: e.re,
                        im: e.im,
                    });
                }
            }
        }
        Ok(Self {
            geometry,
            centers,
            packing_radius: r,
            functions,
        })
    }

    pub fn geometry(&self) -> &Arc<PointGeometry> {
        &self.geometry
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn packing_radius(&self) -> f64 {
        self.packing_radius
    }

    pub fn functions(&self) -> faer::MatRef<'_, c64> {
        self.functions.as_ref()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Projection onto the span of the members selected by `keep`.
    pub fn projection_where(&self, keep: impl Fn(usize) -> bool) -> Result<Projection> {
        let cols: Vec<usize> = (0..self.len()).filter(|&k| keep(k)).collect();
        let m = Mat::from_fn(self.geometry.len(), cols.len(), |i, j| {
            self.functions[(i, cols[j])]
        });
        Projection::from_orthonormal_columns(Arc::clone(&self.geometry), 1, m)
    }

    pub fn projection(&self) -> Result<Projection> {
        self.projection_where(|_| true)
    }

    /// One site delta per site: `p` is the identity.
    pub fn site_deltas(geometry: Arc<PointGeometry>) -> Result<Self> {
        let n = geometry.len();
        let centers = (0..n).collect();
        Self::new(geometry, centers, linalg::identity(n))
    }

    /// Random family: centers are a random maximal subset of sites with
    /// pairwise distance `≥ min_separation`, and each `w_γ` is a random
    /// complex unit vector filling the open ball `B_r(γ)`.
    pub fn random<R: Rng>(
        geometry: Arc<PointGeometry>,
        min_separation: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..geometry.len()).collect();
        order.shuffle(rng);
        let mut centers: Vec<usize> = Vec::new();
        for s in order {
            if centers
                .iter()
                .all(|&c| geometry.distance(s, c) >= min_separation)
            {
                centers.push(s);
            }
        }
        centers.sort_unstable();
        let r = packing_radius(&geometry, &centers)?;
        let mut functions = Mat::zeros(geometry.len(), centers.len());
        for (k, &g) in centers.iter().enumerate() {
            let ball = geometry.ball(g, r);
            let mut norm = 0.0;
            for &x in &ball {
                let v = c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                norm += v.norm_sqr();
                functions[(x, k)] = v;
            }
            let s = 1.0 / norm.sqrt();
            for &x in &ball {
                functions[(x, k)] *= s;
            }
        }
        Self::new(geometry, centers, functions)
    }
}

/// Closed half-plane `{x : (x − point)·normal ≥ 0}` in raw coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneCut {
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

impl HalfPlaneCut {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        (x[0] - self.point[0]) * self.normal[0] + (x[1] - self.point[1]) * self.normal[1] >= 0.0
    }

    /// Horizontal cut through the middle of the sample.
    pub fn horizontal(geometry: &PointGeometry) -> Self {
        Self {
            point: [0.0, 0.5 * geometry.extent()],
            normal: [0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitReport {
    pub centers: usize,
    pub centers_first: usize,
    pub packing_radius: f64,
    /// `max |p − p₁ − p₂|` entrywise.
    pub split_defect: f64,
    /// Exact propagation (`ε = 0`) of `p`.
    pub propagation: f64,
    pub index: IndexResult,
    pub index_first: IndexResult,
    pub index_second: IndexResult,
}

/// Splits the centers by the cut, forms `p`, `p₁`, `p₂` and reports their
/// real-space indices.
pub fn split_index_test(
    basis: &CompactBasis,
    cut: &HalfPlaneCut,
    partition: &ConePartition,
) -> Result<SplitReport> {
    let geometry = basis.geometry();
    let in_first: Vec<bool> = basis
        .centers()
        .iter()
        .map(|&g| cut.contains(geometry.point(g)))
        .collect();
    let p = basis.projection()?;
    let p1 = basis.projection_where(|k| in_first[k])?;
    let p2 = basis.projection_where(|k| !in_first[k])?;
    let sum = p1.matrix() + p2.matrix();
    let split_defect = linalg::max_abs((p.matrix() - &sum).as_ref());
    let propagation = measure_propagation(&p.to_operator(), 0.0)?.propagation;
    Ok(SplitReport {
        centers: basis.len(),
        centers_first: in_first.iter().filter(|&&b| b).count(),
        packing_radius: basis.packing_radius(),
        split_defect,
        propagation,
        index: real_space_chern(&p, partition)?,
        index_first: real_space_chern(&p1, partition)?,
        index_second: real_space_chern(&p2, partition)?,
    })
}

/// `true` for geometries on which the Bloch oracle and the real-space
/// formula describe the same model.
pub fn supports_berry_oracle(geometry: &PointGeometry) -> bool {
    geometry.is_lattice() && geometry.boundary() == Boundary::Periodic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_magnetic_hamiltonian, FieldConfig};
    use crate::spectral::{band_projection, detect_gaps, eigendecompose};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(l: f64) -> Arc<PointGeometry> {
        Arc::new(PointGeometry::lattice(1.0, l, Boundary::Periodic).unwrap())
    }

    fn landau_band(l: f64) -> Projection {
        let g = torus(l);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let data = eigendecompose(&h).unwrap();
        let w = detect_gaps(data.eigenvalues(), 0.3)[0];
        band_projection(&data, &w).unwrap()
    }

    #[test]
    fn sectors_cover_the_disk_once() {
        let g = torus(16.0);
        let part = ConePartition::centered(&g);
        let sectors = part.assign(&g).unwrap();
        let inside = (0..g.len())
            .filter(|&i| g.distance_to(i, part.center) < part.cutoff_radius)
            .count();
        assert_eq!(sectors.iter().map(Vec::len).sum::<usize>(), inside);
        let mut all: Vec<usize> = sectors.concat();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), inside);
        // roughly equal thirds
        for s in &sectors {
            assert!((s.len() as f64 - inside as f64 / 3.0).abs() < 0.15 * inside as f64);
        }
    }

    #[test]
    fn oversized_disk_rejected() {
        let g = torus(16.0);
        let part = ConePartition::centered(&g).with_radius(7.0);
        assert!(matches!(part.assign(&g), Err(Error::CutoffTooLarge { .. })));
    }

    #[test]
    fn trivial_projections_vanish() {
        let g = torus(12.0);
        let part = ConePartition::centered(&g);
        let id = CompactBasis::site_deltas(Arc::clone(&g))
            .unwrap()
            .projection()
            .unwrap();
        assert!(real_space_chern(&id, &part).unwrap().value.abs() < 1e-10);
        let zero = Projection::from_orthonormal_columns(Arc::clone(&g), 1, Mat::zeros(g.len(), 0))
            .unwrap();
        assert_eq!(real_space_chern(&zero, &part).unwrap().value, 0.0);
    }

    #[test]
    fn lowest_landau_band_has_index_one() {
        let p = landau_band(16.0);
        let g = Arc::clone(p.geometry());
        let r = real_space_chern(&p, &ConePartition::centered(&g)).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 0.05);
        assert!(r.error_estimate < 0.05);
        // complement has the opposite index
        let data_cols = p.basis().unwrap().ncols();
        assert_eq!(data_cols, 32);
        let q = {
            let m = linalg::identity(g.len()) - p.matrix();
            let (vals, u) = linalg::hermitian_eigen(m.as_ref()).unwrap();
            let first = vals.partition_point(|&x| x < 0.5);
            Projection::from_orthonormal_columns(
                Arc::clone(&g),
                1,
                u.subcols(first, vals.len() - first).to_owned(),
            )
            .unwrap()
        };
        let rq = real_space_chern(&q, &ConePartition::centered(&g)).unwrap();
        assert_abs_diff_eq!(r.value + rq.value, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn index_stable_under_partition_moves() {
        let p = landau_band(16.0);
        let g = Arc::clone(p.geometry());
        let base = ConePartition::centered(&g);
        let r0 = real_space_chern(&p, &base).unwrap();
        let tol = r0.error_estimate.max(0.05);
        for part in [
            base.rotated(0.7),
            base.shifted([1.3, -0.6]),
            base.shifted([-2.0, 0.0]),
            base.with_radius(base.cutoff_radius * 0.8),
        ] {
            let r = cone_value(&p, &part).unwrap();
            assert!((r - r0.value).abs() <= tol, "{part:?}: {r} vs {}", r0.value);
        }
    }

    #[test]
    fn berry_hofstadter_matches_diophantine() {
        // p·c ≡ 1 (mod q) with |c| ≤ q/2 for the lowest band
        for (p, q, c) in [
            (1, 3, 1.0),
            (1, 4, 1.0),
            (1, 8, 1.0),
            (2, 5, -2.0),
            (3, 7, -2.0),
        ] {
            let model = BlochModel::hofstadter(p, q);
            let r = berry_chern(&model, 0..1, 24).unwrap();
            assert_eq!(r.value, c, "flux {p}/{q}");
            assert_eq!((p * r.value as i64).rem_euclid(q), 1);
            assert!(r.error_estimate < 1e-8);
        }
    }

    #[test]
    fn berry_total_is_zero_and_grid_independent() {
        let model = BlochModel::hofstadter(1, 5);
        assert_eq!(berry_chern(&model, 0..5, 12).unwrap().value, 0.0);
        let a = berry_chern(&model, 0..1, 12).unwrap().value;
        let b = berry_chern(&model, 0..1, 20).unwrap().value;
        assert_eq!(a, b);
        let staggered = BlochModel::staggered(1.0);
        assert_eq!(berry_chern(&staggered, 0..2, 16).unwrap().value, 0.0);
    }

    #[test]
    fn berry_rejects_crossings() {
        // flux 1/4: the two middle bands touch at isolated momenta
        let model = BlochModel::hofstadter(1, 4);
        let err = berry_chern(&model, 1..2, 8).unwrap_err();
        assert!(matches!(err, Error::BandCrossing { .. }), "{err:?}");
    }

    #[test]
    fn berry_agrees_with_real_space_on_larger_cell() {
        let model = BlochModel {
            cell: [8, 2],
            flux: (1, 8),
            onsite: vec![0.0; 16],
        };
        assert_eq!(berry_chern(&model, 0..2, 12).unwrap().value, 1.0);
    }

    #[test]
    fn compact_basis_rejects_overlap_and_nonorthonormal() {
        let g = torus(8.0);
        let mut f = Mat::zeros(64, 2);
        f[(0, 0)] = c64::new(1.0, 0.0);
        f[(10, 1)] = c64::new(0.6, 0.0);
        assert!(matches!(
            CompactBasis::new(Arc::clone(&g), vec![0, 10], f.clone()),
            Err(Error::NotOrthonormal { i: 1, j: 1, .. })
        ));
        f[(10, 1)] = c64::new(1.0, 0.0);
        // r = √5/2, so site 2 (distance 2 from site 0) is outside B_r(0)
        f[(0, 0)] = c64::new(0.0, 0.0);
        f[(2, 0)] = c64::new(1.0, 0.0);
        assert!(matches!(
            CompactBasis::new(Arc::clone(&g), vec![0, 10], f),
            Err(Error::SupportViolation {
                index: 0,
                site: 2,
                ..
            })
        ));
    }

    #[test]
    fn split_of_random_family_is_exact() {
        let g = torus(16.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = CompactBasis::random(Arc::clone(&g), 3.0, &mut rng).unwrap();
        let report = split_index_test(
            &basis,
            &HalfPlaneCut::horizontal(&g),
            &ConePartition::centered(&g),
        )
        .unwrap();
        assert_eq!(report.split_defect, 0.0);
        assert!(report.index.value.abs() < 0.05);
        assert!(report.propagation < 2.0 * report.packing_radius);
    }

    #[test]
    fn determinant_oracle() {
        let m = Mat::from_fn(3, 3, |i, j| {
            c64::new((i * 3 + j) as f64, (i + 2 * j) as f64 * 0.5)
                + if i == j {
                    c64::new(2.0, 0.0)
                } else {
                    c64::new(0.0, 0.0)
                }
        });
        // cofactor expansion
        let e = |i: usize, j: usize| m[(i, j)];
        let cof = e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
            - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
            + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0));
        assert!((determinant(&m) - cof).norm() < 1e-10);
    }
}
