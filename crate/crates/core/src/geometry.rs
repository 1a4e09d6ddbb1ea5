//! Finite metric geometries: square-lattice samples of the plane (open or
//! toroidal), amorphous point clouds, uniformly discrete center sets, and the
//! volume-growth / tail-sum machinery used by the localization estimates.
//!
//! Volumes are counting measure times a cell area (`a²` on lattices, mean
//! cell area on amorphous clouds). Every certified constant is a statement
//! about the finite sample only; reports carry [`FINITE_SAMPLE_NOTE`].

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Attached to every report whose constants were certified on a finite sample.
pub const FINITE_SAMPLE_NOTE: &str =
    "constants certified over the finite sample only (all sampled base points and radii)";

/// Relative slack applied when a constant is defined as an exact maximum and
/// then re-checked in floating point.
pub(crate) const CERTIFY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Torus,
}

/// A finite set of points in the plane with a metric.
///
/// Lattice sites are numbered x-major: `site = ix * side + iy`, with
/// coordinates `(ix·a, iy·a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointGeometry {
    points: Vec<[f64; 2]>,
    spacing: f64,
    extent: f64,
    boundary: Boundary,
    side: usize,
    cell_area: f64,
}

impl PointGeometry {
    /// Regular square grid of `(L/a)²` sites.
    pub fn lattice(spacing: f64, extent: f64, boundary: Boundary) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::NonPositiveSpacing(spacing));
        }
        let ratio = extent / spacing;
        let side = ratio.round();
        if (ratio - side).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::NonIntegerExtent { extent, spacing });
        }
        if side < 4.0 {
            return Err(Error::InvalidArgument(format!(
                "extent {extent} must be at least 4 spacings ({spacing})"
            )));
        }
        let side = side as usize;
        let points = (0..side * side)
            .map(|s| [(s / side) as f64 * spacing, (s % side) as f64 * spacing])
            .collect();
        Ok(Self {
            points,
            spacing,
            extent,
            boundary,
            side,
            cell_area: spacing * spacing,
        })
    }

    /// Arbitrary point cloud inside `[0, L)²`. The cell area is `L²/N`, the
    /// mean Voronoi cell area of a cloud filling the box; a single point gets
    /// unit area.
    pub fn amorphous(points: Vec<[f64; 2]>, extent: f64, boundary: Boundary) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("point cloud is empty".into()));
        }
        if !(extent > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "point cloud has non-finite coordinates".into(),
            ));
        }
        let cell_area = if points.len() == 1 {
            1.0
        } else {
            extent * extent / points.len() as f64
        };
        Ok(Self {
            points,
            spacing: 0.0,
            extent,
            boundary,
            side: 0,
            cell_area,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    /// Lattice spacing; 0 for amorphous clouds.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn metric(&self) -> Metric {
        match self.boundary {
            Boundary::Open => Metric::Euclidean,
            Boundary::Periodic => Metric::Torus,
        }
    }

    /// Sites per lattice row; 0 for amorphous clouds.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn is_lattice(&self) -> bool {
        self.side > 0
    }

    pub fn dimension(&self) -> u32 {
        2
    }

    /// Volume carried by one point.
    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    /// Total volume of the sample.
    pub fn volume(&self) -> f64 {
        self.cell_area * self.len() as f64
    }

    pub fn lattice_coords(&self, site: usize) -> (usize, usize) {
        debug_assert!(self.is_lattice());
        (site / self.side, site % self.side)
    }

    /// Site at integer coordinates, wrapping when periodic. `None` when the
    /// coordinates fall outside an open sample.
    pub fn site_at(&self, ix: isize, iy: isize) -> Option<usize> {
        let n = self.side as isize;
        if n == 0 {
            return None;
        }
        let (x, y) = match self.boundary {
            Boundary::Periodic => (ix.rem_euclid(n), iy.rem_euclid(n)),
            Boundary::Open => {
                if ix < 0 || iy < 0 || ix >= n || iy >= n {
                    return None;
                }
                (ix, iy)
            }
        };
        Some(x as usize * self.side + y as usize)
    }

    /// Minimum-image displacement from `from` to `to`.
    pub fn displacement_between(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        let mut dx = to[0] - from[0];
        let mut dy = to[1] - from[1];
        if self.boundary == Boundary::Periodic {
            let l = self.extent;
            dx -= l * (dx / l).round();
            dy -= l * (dy / l).round();
        }
        [dx, dy]
    }

    pub fn distance_between(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        let [dx, dy] = self.displacement_between(p, q);
        dx.hypot(dy)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance_between(self.points[i], self.points[j])
    }

    pub fn distance_to(&self, i: usize, p: [f64; 2]) -> f64 {
        self.distance_between(self.points[i], p)
    }

    /// Largest pairwise distance. Closed form on lattices, brute force otherwise.
    pub fn diameter(&self) -> f64 {
        if self.is_lattice() {
            let span = match self.boundary {
                Boundary::Open => (self.side - 1) as f64,
                Boundary::Periodic => (self.side / 2) as f64,
            } * self.spacing;
            return span * std::f64::consts::SQRT_2;
        }
        let mut best = 0.0f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }

    /// Sites strictly within `radius` of site `center` (an open ball).
    pub fn ball(&self, center: usize, radius: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.distance(center, j) < radius)
            .collect()
    }

    /// Distances from `x` to every site, sorted ascending.
    pub(crate) fn sorted_distances_from(&self, x: usize) -> Vec<f64> {
        let mut d: Vec<f64> = (0..self.len()).map(|j| self.distance(x, j)).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    /// `(index, x, y)` rows for CSV export.
    pub fn csv_rows(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.points.iter().enumerate().map(|(i, p)| (i, p[0], p[1]))
    }
}

/// Half the minimal pairwise separation of `centers`. A single center gets
/// the geometry extent.
pub fn packing_radius(geometry: &PointGeometry, centers: &[usize]) -> Result<f64> {
    match centers.len() {
        0 => Err(Error::InvalidArgument("center set is empty".into())),
        1 => Ok(geometry.extent()),
        _ => {
            let mut min = f64::INFINITY;
            for (k, &g) in centers.iter().enumerate() {
                for &h in &centers[k + 1..] {
                    let d = geometry.distance(g, h);
                    if d <= 0.0 {
                        return Err(Error::DuplicateCenter(g));
                    }
                    min = min.min(d);
                }
            }
            Ok(0.5 * min)
        }
    }
}

/// Uniformly discrete set of centers with multiplicities `m(γ) ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSet {
    sites: Vec<usize>,
    multiplicity: Vec<usize>,
    packing_radius: f64,
}

impl CenterSet {
    pub fn new(geometry: &PointGeometry, sites: Vec<usize>) -> Result<Self> {
        let m = vec![1; sites.len()];
        Self::with_multiplicity(geometry, sites, m)
    }

    pub fn with_multiplicity(
        geometry: &PointGeometry,
        sites: Vec<usize>,
        multiplicity: Vec<usize>,
    ) -> Result<Self> {
        if sites.len() != multiplicity.len() {
            return Err(Error::InvalidArgument(format!(
                "{} centers but {} multiplicities",
                sites.len(),
                multiplicity.len()
            )));
        }
        if let Some(&s) = sites.iter().find(|&&s| s >= geometry.len()) {
            return Err(Error::InvalidArgument(format!(
                "center site {s} out of range"
            )));
        }
        if multiplicity.contains(&0) {
            return Err(Error::InvalidArgument(
                "multiplicity must be positive".into(),
            ));
        }
        let packing_radius = packing_radius(geometry, &sites)?;
        Ok(Self {
            sites,
            multiplicity,
            packing_radius,
        })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn multiplicity(&self) -> &[usize] {
        &self.multiplicity
    }

    pub fn packing_radius(&self) -> f64 {
        self.packing_radius
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `m_*`, the multiplicity bound.
    pub fn max_multiplicity(&self) -> usize {
        self.multiplicity.iter().copied().max().unwrap_or(0)
    }

    /// Number of centers counted with multiplicity.
    pub fn total_count(&self) -> usize {
        self.multiplicity.iter().sum()
    }
}

/// Polynomial growth constants: `vol(B_R(x)) ≤ A(1+R)^ν` and
/// `vol(B_ρ(x)) ≥ v ρ^d` for `0 < ρ ≤ r₀`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthProfile {
    pub a_const: f64,
    pub nu: f64,
    pub v: f64,
    pub r0: f64,
    pub dimension: u32,
    /// Log-log slope the exponent was read from.
    pub fitted_slope: f64,
    pub certified: bool,
    pub note: &'static str,
}

/// Exponents searched by [`fit_growth_profile`].
pub fn default_nu_grid() -> Vec<f64> {
    (0..=24).map(|k| 0.25 * k as f64).collect()
}

/// Fits `(A, ν, v, r₀)` on the given base points.
///
/// The exponent is the smallest grid value not below the large-radius log-log
/// slope of the mean ball volume (minus half a grid step). `A` is then the
/// exact supremum of `vol(B_R(x))/(1+R)^ν` over all `R ≥ 0`, evaluated at the
/// jump points of the counting function, so the bound holds for every radius
/// and not just the grid.
pub fn fit_growth_profile(
    geometry: &PointGeometry,
    sample_centers: &[usize],
    radius_grid: &[f64],
    nu_grid: &[f64],
) -> Result<GrowthProfile> {
    if sample_centers.is_empty() {
        return Err(Error::InvalidArgument(
            "growth fit needs at least one sample center".into(),
        ));
    }
    if radius_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument(
            "radius grid must be positive".into(),
        ));
    }
    if nu_grid.is_empty() {
        return Err(Error::InvalidArgument("exponent grid is empty".into()));
    }
    let cell = geometry.cell_area();
    let sorted: Vec<Vec<f64>> = sample_centers
        .iter()
        .map(|&x| geometry.sorted_distances_from(x))
        .collect();

    let slope = growth_slope(&sorted, radius_grid, cell);
    let mut grid: Vec<f64> = nu_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let step = if grid.len() > 1 {
        grid[1] - grid[0]
    } else {
        0.0
    };
    let nu = grid
        .iter()
        .copied()
        .find(|&nu| nu >= slope - 0.5 * step)
        .unwrap_or(*grid.last().unwrap());

    let mut a_const = 0.0f64;
    for d in &sorted {
        for (k, &dk) in d.iter().enumerate() {
            // vol(B_R) = cell·#{d ≤ d_k} on (d_k, d_{k+1}]; sup at R → d_k⁺.
            if k + 1 < d.len() && d[k + 1] == dk {
                continue;
            }
            let ratio = cell * (k + 1) as f64 / (1.0 + dk).powf(nu);
            a_const = a_const.max(ratio);
        }
    }
    a_const *= 1.0 + CERTIFY_SLACK;

    let r0 = small_ball_radius(geometry, &sorted);
    let dim = geometry.dimension();
    let mut v = f64::INFINITY;
    for d in &sorted {
        let mut probes: Vec<f64> = d.iter().copied().filter(|&r| r > 0.0 && r <= r0).collect();
        probes.push(r0);
        for rho in probes {
            let count = d.partition_point(|&r| r < rho);
            v = v.min(cell * count as f64 / rho.powi(dim as i32));
        }
    }
    v *= 1.0 - CERTIFY_SLACK;

    let mut profile = GrowthProfile {
        a_const,
        nu,
        v,
        r0,
        dimension: dim,
        fitted_slope: slope,
        certified: false,
        note: FINITE_SAMPLE_NOTE,
    };
    profile.certified = profile.verify(geometry, sample_centers, radius_grid);
    Ok(profile)
}

fn growth_slope(sorted: &[Vec<f64>], radius_grid: &[f64], cell: f64) -> f64 {
    let mut radii: Vec<f64> = radius_grid.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if radii.len() < 2 {
        return 0.0;
    }
    let start = if radii.len() >= 4 { radii.len() / 2 } else { 0 };
    let upper = &radii[start..];
    let pts: Vec<(f64, f64)> = upper
        .iter()
        .map(|&r| {
            let mean = sorted
                .iter()
                .map(|d| cell * d.partition_point(|&x| x < r) as f64)
                .sum::<f64>()
                / sorted.len() as f64;
            (r.ln(), mean.ln())
        })
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        (sxy / sxx).max(0.0)
    }
}

fn small_ball_radius(geometry: &PointGeometry, sorted: &[Vec<f64>]) -> f64 {
    if geometry.is_lattice() {
        return geometry.spacing();
    }
    sorted
        .iter()
        .filter_map(|d| d.iter().copied().find(|&r| r > 0.0))
        .fold(f64::INFINITY, f64::min)
        .min(geometry.extent())
}

impl GrowthProfile {
    /// Brute-force re-check of both growth inequalities by direct ball
    /// counting on the radius grid and at every inter-site distance.
    pub fn verify(&self, geometry: &PointGeometry, centers: &[usize], radius_grid: &[f64]) -> bool {
        let cell = geometry.cell_area();
        let d = self.dimension as i32;
        centers.iter().all(|&x| {
            let mut radii: Vec<f64> = (0..geometry.len())
                .map(|j| geometry.distance(x, j))
                .collect();
            radii.extend_from_slice(radius_grid);
            let upper_ok = radii.iter().all(|&r| {
                // just above r, so the open ball contains every site at distance r
                let count = (0..geometry.len())
                    .filter(|&j| geometry.distance(x, j) <= r)
                    .count();
                cell * count as f64
                    <= self.a_const * (1.0 + r).powf(self.nu) * (1.0 + CERTIFY_SLACK)
            });
            let lower_ok = radii
                .iter()
                .copied()
                .chain([self.r0])
                .filter(|&r| r > 0.0 && r <= self.r0)
                .all(|rho| {
                    let count = geometry.ball(x, rho).len();
                    cell * count as f64 >= self.v * rho.powi(d) * (1.0 - CERTIFY_SLACK)
                });
            upper_ok && lower_ok
        })
    }
}

/// `Σ_{γ: d(x,γ) ≥ R} (1 + d(x,γ))^{-μ}` over the given centers.
pub fn discrete_tail_sum(
    geometry: &PointGeometry,
    centers: &[usize],
    x: usize,
    radius: f64,
    mu: f64,
) -> f64 {
    centers
        .iter()
        .map(|&g| geometry.distance(x, g))
        .filter(|&d| d >= radius)
        .map(|d| (1.0 + d).powf(-mu))
        .sum()
}

/// [`discrete_tail_sum`] with the `μ > ν` applicability check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailSum {
    pub value: f64,
    /// False when `μ ≤ ν`: the polynomial tail bound does not apply.
    pub bound_applicable: bool,
}

pub fn checked_tail_sum(
    geometry: &PointGeometry,
    centers: &[usize],
    x: usize,
    radius: f64,
    mu: f64,
    profile: &GrowthProfile,
) -> TailSum {
    let bound_applicable = mu > profile.nu;
    if !bound_applicable {
        log::warn!(
            "tail exponent μ = {mu} ≤ ν = {}: tail bound inapplicable",
            profile.nu
        );
    }
    TailSum {
        value: discrete_tail_sum(geometry, centers, x, radius, mu),
        bound_applicable,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub mu: f64,
    pub nu: f64,
    pub radii: Vec<f64>,
    /// Worst case over base points of `a^d Σ_{y: d(x,y) ≥ R} (1+d)^{-μ}`.
    pub continuous_lhs: Vec<f64>,
    /// Worst case over base points of the sum over centers.
    pub discrete_lhs: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// `Aν/(μ−ν)`, as in the integration-by-parts step.
    pub c1_closed_form_nu: f64,
    /// `Aμ/(μ−ν)`, the constant as finally stated.
    pub c1_closed_form_mu: f64,
    /// `(1−ε)^{-μ} C₁ (1+ε)^{μ−ν} / (v ε^d)` with the `Aμ/(μ−ν)` form of C₁.
    pub c2_closed_form: f64,
    pub epsilon: f64,
    /// Smallest `C·(1+R)^{ν−μ} − lhs` over the grid, per bound.
    pub margin_continuous: f64,
    pub margin_discrete: f64,
    pub note: &'static str,
}

impl TailBoundReport {
    pub fn margins_nonnegative(&self) -> bool {
        self.margin_continuous >= 0.0 && self.margin_discrete >= 0.0
    }

    pub fn c1_within_nu_form(&self) -> bool {
        self.c1 <= self.c1_closed_form_nu
    }

    pub fn c1_within_mu_form(&self) -> bool {
        self.c1 <= self.c1_closed_form_mu
    }

    pub fn c2_within_closed_form(&self) -> bool {
        self.c2 <= self.c2_closed_form
    }
}

/// Suffix sums of `w(d) = (1+d)^{-μ}` over sorted distances, so a tail sum
/// for any `R` is one binary search.
struct TailTable {
    dist: Vec<f64>,
    suffix: Vec<f64>,
}

impl TailTable {
    fn new(mut dist: Vec<f64>, mu: f64) -> Self {
        dist.sort_by(f64::total_cmp);
        let mut suffix = vec![0.0; dist.len() + 1];
        for k in (0..dist.len()).rev() {
            suffix[k] = suffix[k + 1] + (1.0 + dist[k]).powf(-mu);
        }
        Self { dist, suffix }
    }

    fn tail(&self, radius: f64) -> f64 {
        self.suffix[self.dist.partition_point(|&d| d < radius)]
    }
}

/// Certifies both tail bounds on `radius_grid` for every base point.
///
/// `C₁`, `C₂` are the smallest constants making the bounds hold on the
/// sample; the report also carries the closed-form candidates for comparison.
pub fn certify_tail_bounds(
    geometry: &PointGeometry,
    centers: &[usize],
    mu: f64,
    radius_grid: &[f64],
    base_points: &[usize],
    profile: &GrowthProfile,
) -> Result<TailBoundReport> {
    let nu = profile.nu;
    if !(mu > nu) {
        return Err(Error::InvalidArgument(format!(
            "tail bounds need μ > ν (μ = {mu}, ν = {nu})"
        )));
    }
    if base_points.is_empty() {
        return Err(Error::InvalidArgument("no base points".into()));
    }
    let cell = geometry.cell_area();
    let mut continuous_lhs = vec![0.0f64; radius_grid.len()];
    let mut discrete_lhs = vec![0.0f64; radius_grid.len()];
    for &x in base_points {
        let all = TailTable::new(geometry.sorted_distances_from(x), mu);
        let gam = TailTable::new(
            centers.iter().map(|&g| geometry.distance(x, g)).collect(),
            mu,
        );
        for (k, &r) in radius_grid.iter().enumerate() {
            continuous_lhs[k] = continuous_lhs[k].max(cell * all.tail(r));
            discrete_lhs[k] = discrete_lhs[k].max(gam.tail(r));
        }
    }
    let weight = |r: f64| (1.0 + r).powf(nu - mu);
    let fit = |lhs: &[f64]| {
        radius_grid
            .iter()
            .zip(lhs)
            .map(|(&r, &v)| v / weight(r))
            .fold(0.0f64, f64::max)
            * (1.0 + CERTIFY_SLACK)
    };
    let c1 = fit(&continuous_lhs);
    let c2 = fit(&discrete_lhs);
    let margin = |c: f64, lhs: &[f64]| {
        radius_grid
            .iter()
            .zip(lhs)
            .map(|(&r, &v)| c * weight(r) - v)
            .fold(f64::INFINITY, f64::min)
    };

    let a = profile.a_const;
    let c1_closed_form_nu = a * nu / (mu - nu);
    let c1_closed_form_mu = a * mu / (mu - nu);
    let r_pack = if centers.len() > 1 {
        packing_radius(geometry, centers)?
    } else {
        geometry.extent()
    };
    let epsilon = 0.5 * r_pack.min(1.0).min(profile.r0);
    let d = profile.dimension as i32;
    let c2_closed_form =
        (1.0 - epsilon).powf(-mu) * c1_closed_form_mu * (1.0 + epsilon).powf(mu - nu)
            / (profile.v * epsilon.powi(d));

    Ok(TailBoundReport {
        mu,
        nu,
        radii: radius_grid.to_vec(),
        margin_continuous: margin(c1, &continuous_lhs),
        margin_discrete: margin(c2, &discrete_lhs),
        continuous_lhs,
        discrete_lhs,
        c1,
        c2,
        c1_closed_form_nu,
        c1_closed_form_mu,
        c2_closed_form,
        epsilon,
        note: FINITE_SAMPLE_NOTE,
    })
}
