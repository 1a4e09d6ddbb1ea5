//! Wannierization attempts over uniformly discrete center sets: compact
//! bumps, Löwdin orthogonalization of their band projections, uniform
//! polynomial localization constants, the partial isometry
//! `V = Σ w_γ v_γ*` with its truncations, and the size-ladder experiment.

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    certify_tail_bounds, fit_growth_profile, packing_radius, CenterSet, GrowthProfile,
    PointGeometry, TailBoundReport,
};
use crate::index::{real_space_chern, ConePartition};
use crate::model::ModelSpec;
use crate::spectral::Projection;
use crate::{c64, linalg, Error, Result};

/// Gram singular values below this make Löwdin fail softly.
pub const DEFAULT_GRAM_FLOOR: f64 = 1e-8;

/// Normalized indicator bumps `v_γ` with disjoint supports.
#[derive(Clone, Debug)]
pub struct BumpSet {
    geometry: Arc<PointGeometry>,
    centers: Vec<usize>,
    parent: Vec<usize>,
    functions: Mat<c64>,
    rho: f64,
    c0: f64,
    packing_radius: f64,
}

impl BumpSet {
    pub fn geometry(&self) -> &Arc<PointGeometry> {
        &self.geometry
    }

    /// One site per bump; differs from the input centers when a center with
    /// multiplicity was subdivided.
    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    /// Index into the original center set for each bump.
    pub fn parent(&self) -> &[usize] {
        &self.parent
    }

    /// Columns are the `v_γ`.
    pub fn functions(&self) -> faer::MatRef<'_, c64> {
        self.functions.as_ref()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Packing radius of the bump centers.
    pub fn packing_radius(&self) -> f64 {
        self.packing_radius
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Projection onto `span{v_γ}`.
    pub fn projection(&self) -> Result<Projection> {
        Projection::from_orthonormal_columns(Arc::clone(&self.geometry), 1, self.functions.clone())
    }
}

/// `v_γ = 1_{B_ρ(γ)}/√|B_ρ(γ)|`. A center of multiplicity `m > 1` is
/// replaced by `m` site deltas on the sites of `B_r(γ)` nearest to `γ`.
pub fn build_bump_set(
    geometry: &Arc<PointGeometry>,
    centers: &CenterSet,
    rho: f64,
) -> Result<BumpSet> {
    let r = centers.packing_radius();
    if !(rho > 0.0 && rho < r) {
        return Err(Error::InvalidArgument(format!(
            "bump radius ρ = {rho} must satisfy 0 < ρ < r = {r}"
        )));
    }
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut bump_centers = Vec::new();
    let mut parent = Vec::new();
    for (k, (&g, &m)) in centers
        .sites()
        .iter()
        .zip(centers.multiplicity())
        .enumerate()
    {
        if m == 1 {
            let ball = geometry.ball(g, rho);
            if ball.is_empty() {
                return Err(Error::EmptyBall {
                    center: g,
                    radius: rho,
                });
            }
            supports.push(ball);
            bump_centers.push(g);
            parent.push(k);
        } else {
            let mut near: Vec<(f64, usize)> = geometry
                .ball(g, r)
                .into_iter()
                .map(|x| (geometry.distance(g, x), x))
                .collect();
            if near.len() < m {
                return Err(Error::MultiplicityExceedsSites {
                    center: g,
                    multiplicity: m,
                    available: near.len(),
                });
            }
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, x) in &near[..m] {
                supports.push(vec![x]);
                bump_centers.push(x);
                parent.push(k);
            }
        }
    }
    let n = geometry.len();
    let mut functions = Mat::zeros(n, supports.len());
    let mut c0 = 0.0f64;
    for (j, s) in supports.iter().enumerate() {
        let amp = 1.0 / (s.len() as f64).sqrt();
        c0 = c0.max(amp);
        for &x in s {
            functions[(x, j)] = c64::new(amp, 0.0);
        }
    }
    let packing = if bump_centers.is_empty() {
        r
    } else {
        packing_radius(geometry, &bump_centers)?
    };
    Ok(BumpSet {
        geometry: Arc::clone(geometry),
        centers: bump_centers,
        parent,
        functions,
        rho,
        c0,
        packing_radius: packing,
    })
}

#[derive(Clone, Debug)]
pub struct WannierCandidateSet {
    geometry: Arc<PointGeometry>,
    centers: Vec<usize>,
    functions: Option<Mat<c64>>,
    pub gram_min: f64,
    pub gram_max: f64,
    /// `max |w*w − 1|`.
    pub orthonormality_defect: f64,
    /// `max |(1 − p) w|`.
    pub range_defect: f64,
    pub target_rank: usize,
}

impl WannierCandidateSet {
    /// Wraps given functions (columns) centered at `centers`, with no Gram
    /// history.
    pub fn from_functions(
        geometry: Arc<PointGeometry>,
        centers: Vec<usize>,
        functions: Mat<c64>,
    ) -> Result<Self> {
        if functions.nrows() != geometry.len() || functions.ncols() != centers.len() {
            return Err(Error::InvalidArgument(
                "function matrix shape does not match".into(),
            ));
        }
        let gram = functions.adjoint() * &functions;
        let defect = linalg::max_abs((&gram - linalg::identity(centers.len())).as_ref());
        Ok(Self {
            geometry,
            target_rank: centers.len(),
            centers,
            functions: Some(functions),
            gram_min: f64::NAN,
            gram_max: f64::NAN,
            orthonormality_defect: defect,
            range_defect: f64::NAN,
        })
    }

    pub fn geometry(&self) -> &Arc<PointGeometry> {
        &self.geometry
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn functions(&self) -> Option<faer::MatRef<'_, c64>> {
        self.functions.as_ref().map(|f| f.as_ref())
    }

    pub fn succeeded(&self) -> bool {
        self.functions.is_some()
    }
}

/// `w = (p v)·G^{-1/2}` with `G = (p v)*(p v)`. When the smallest Gram
/// eigenvalue is below `floor` the set comes back without functions, with
/// the Gram diagnostics filled in.
pub fn lowdin_wannierize(
    p: &Projection,
    bumps: &BumpSet,
    floor: f64,
) -> Result<WannierCandidateSet> {
    if p.components() != 1 {
        return Err(Error::InvalidArgument(
            "Wannierization is implemented for single-component bands".into(),
        ));
    }
    if bumps.len() != p.rank() {
        return Err(Error::RankMismatch {
            centers: bumps.len(),
            rank: p.rank(),
        });
    }
    let geometry = Arc::clone(p.geometry());
    let v = bumps.functions();
    let u = match p.basis() {
        Some(b) => b * (b.adjoint() * v),
        None => p.matrix() * v,
    };
    let gram = u.adjoint() * &u;
    let (inv_sqrt, eig) = linalg::inverse_sqrt(gram.as_ref())?;
    let gram_min = eig.first().copied().unwrap_or(f64::NAN);
    let gram_max = eig.last().copied().unwrap_or(f64::NAN);
    let mut set = WannierCandidateSet {
        geometry,
        centers: bumps.centers().to_vec(),
        functions: None,
        gram_min,
        gram_max,
        orthonormality_defect: f64::NAN,
        range_defect: f64::NAN,
        target_rank: p.rank(),
    };
    if !(gram_min >= floor) {
        log::warn!(
            "Gram matrix numerically singular: smallest eigenvalue {gram_min:.3e} < {floor:.1e}"
        );
        return Ok(set);
    }
    let w = &u * &inv_sqrt;
    let ww = w.adjoint() * &w;
    set.orthonormality_defect = linalg::max_abs((&ww - linalg::identity(w.ncols())).as_ref());
    let pw = match p.basis() {
        Some(b) => b * (b.adjoint() * &w),
        None => p.matrix() * &w,
    };
    set.range_defect = linalg::max_abs((&w - &pw).as_ref());
    set.functions = Some(w);
    Ok(set)
}

/// Per-center maximum amplitude in distance bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailProfile {
    pub center: usize,
    /// `(bin distance, max |w_γ(x)|)`, ascending, empty bins omitted.
    pub bins: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub mu: Vec<f64>,
    /// `C_μ = max_{γ,x} |w_γ(x)| (1 + d(x, γ))^μ`, aligned with `mu`.
    pub c_mu: Vec<f64>,
    /// `(bump index, site)` attaining each `C_μ`.
    pub argmax: Vec<(usize, usize)>,
    pub profiles: Vec<TailProfile>,
}

impl LocalizationReport {
    pub fn c_mu_at(&self, mu: f64) -> Option<f64> {
        self.mu.iter().position(|&m| m == mu).map(|k| self.c_mu[k])
    }

    /// Re-checks `|w_γ(x)| ≤ C_μ(1+d)^{−μ}` at every sample.
    pub fn verify(&self, set: &WannierCandidateSet) -> bool {
        let Some(w) = set.functions() else {
            return false;
        };
        let g = set.geometry();
        self.mu.iter().zip(&self.c_mu).all(|(&mu, &c)| {
            set.centers().iter().enumerate().all(|(k, &gamma)| {
                (0..g.len()).all(|x| {
                    w[(x, k)].norm() <= c * (1.0 + g.distance(x, gamma)).powf(-mu) * (1.0 + 1e-12)
                })
            })
        })
    }
}

pub fn localization_fit(set: &WannierCandidateSet, mu_grid: &[f64]) -> Result<LocalizationReport> {
    let w = set
        .functions()
        .ok_or_else(|| Error::InvalidArgument("candidate set has no functions to fit".into()))?;
    let g = set.geometry();
    let width = if g.is_lattice() {
        0.5 * g.spacing()
    } else {
        0.5 * g.cell_area().sqrt()
    };
    let mut c_mu = vec![0.0f64; mu_grid.len()];
    let mut argmax = vec![(0usize, 0usize); mu_grid.len()];
    let mut profiles = Vec::with_capacity(set.centers().len());
    for (k, &gamma) in set.centers().iter().enumerate() {
        let mut bins: std::collections::BTreeMap<u64, f64> = Default::default();
        for x in 0..g.len() {
            let amp = w[(x, k)].norm();
            let d = g.distance(x, gamma);
            for (m, &mu) in mu_grid.iter().enumerate() {
                let val = amp * (1.0 + d).powf(mu);
                if val > c_mu[m] {
                    c_mu[m] = val;
                    argmax[m] = (k, x);
                }
            }
            let slot = bins.entry((d / width).round() as u64).or_insert(0.0);
            *slot = slot.max(amp);
        }
        profiles.push(TailProfile {
            center: k,
            bins: bins
                .into_iter()
                .map(|(b, v)| (b as f64 * width, v))
                .collect(),
        });
    }
    Ok(LocalizationReport {
        mu: mu_grid.to_vec(),
        c_mu,
        argmax,
        profiles,
    })
}

/// `V = Σ_γ w_γ v_γ*` over a shared index set.
pub fn build_v_operator(set: &WannierCandidateSet, bumps: &BumpSet) -> Result<Mat<c64>> {
    let w = set
        .functions()
        .ok_or_else(|| Error::InvalidArgument("candidate set has no functions".into()))?;
    if set.centers() != bumps.centers() {
        return Err(Error::IndexMismatch(format!(
            "{} Wannier centers vs {} bump centers",
            set.centers().len(),
            bumps.centers().len()
        )));
    }
    Ok(w * bumps.functions().adjoint())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartialIsometryCheck {
    /// `‖V*V − P_bumps‖`.
    pub source_defect: f64,
    /// `‖VV* − p‖`.
    pub range_defect: f64,
    /// `max |V − VV*V|`.
    pub identity_defect: f64,
    /// Largest distance of a singular value of `V` from {0, 1}.
    pub singular_value_defect: f64,
}

impl PartialIsometryCheck {
    pub fn within(&self, tol: f64) -> bool {
        self.source_defect <= tol
            && self.range_defect <= tol
            && self.identity_defect <= tol
            && self.singular_value_defect <= tol
    }
}

/// Partial-isometry defects of `V = W Vb*`. Singular values are read from
/// the thin factor: `Vb` has orthonormal columns, so `σ(V) = σ(W) ∪ {0}`.
pub fn check_partial_isometry(
    v: &Mat<c64>,
    set: &WannierCandidateSet,
    bumps: &BumpSet,
    p: &Projection,
) -> Result<PartialIsometryCheck> {
    let w = set
        .functions()
        .ok_or_else(|| Error::InvalidArgument("candidate set has no functions".into()))?;
    let vb = bumps.functions();
    let vb_defect = linalg::max_abs((vb.adjoint() * vb - linalg::identity(vb.ncols())).as_ref());
    if vb_defect > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "bumps not orthonormal ({vb_defect:.1e})"
        )));
    }
    let vsv = v.adjoint() * v;
    let vvs = v * v.adjoint();
    let pb = bumps.projection()?;
    let vvv = &vvs * v;
    let sv = linalg::singular_values(w)?;
    Ok(PartialIsometryCheck {
        source_defect: linalg::hermitian_norm((&vsv - pb.matrix()).as_ref()),
        range_defect: linalg::hermitian_norm((&vvs - p.matrix()).as_ref()),
        identity_defect: linalg::max_abs((v - &vvv).as_ref()),
        singular_value_defect: sv
            .iter()
            .map(|&s| s.abs().min((s - 1.0).abs()))
            .fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationReport {
    pub mu: f64,
    pub nu: f64,
    pub a_const: f64,
    pub c_mu: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub packing_radius: f64,
    pub cell_area: f64,
    pub radii: Vec<f64>,
    /// `‖V − V^R‖`.
    pub actual: Vec<f64>,
    /// Column-sum bound `c₀ C_μ C₁ (1+R)^{ν−μ} / a^d`.
    pub delta1: Vec<f64>,
    /// Row-sum bound `C_μ C₂ (1+R)^{ν−μ} c₀ A (1+r)^ν / a^d`.
    pub delta2: Vec<f64>,
    /// `δ₁δ₂ − actual²`.
    pub margin: Vec<f64>,
    /// `δ₁` without the factor `C_μ`, and the margin it would give.
    pub delta1_without_c_mu: Vec<f64>,
    pub margin_without_c_mu: Vec<f64>,
}

impl TruncationReport {
    pub fn holds(&self) -> bool {
        self.margin.iter().all(|&m| m >= 0.0)
    }

    pub fn actual_nonincreasing(&self) -> bool {
        self.actual.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    }
}

/// Schur-test bound chain for `‖V − V^R‖`, where `w_γ^R` keeps `w_γ` on
/// `B_R(γ)` and vanishes elsewhere. `tails` must be certified for the bump
/// centers with every site as a base point, at the same `μ`, on a radius
/// grid containing `radii`.
pub fn truncation_report(
    set: &WannierCandidateSet,
    bumps: &BumpSet,
    profile: &GrowthProfile,
    tails: &TailBoundReport,
    localization: &LocalizationReport,
    mu: f64,
    radii: &[f64],
) -> Result<TruncationReport> {
    let w = set
        .functions()
        .ok_or_else(|| Error::InvalidArgument("candidate set has no functions".into()))?;
    if set.centers() != bumps.centers() {
        return Err(Error::IndexMismatch(
            "Wannier and bump centers differ".into(),
        ));
    }
    let c_mu = localization
        .c_mu_at(mu)
        .ok_or_else(|| Error::InvalidArgument(format!("C_μ not fitted at μ = {mu}")))?;
    if tails.mu != mu || !(mu > profile.nu) {
        return Err(Error::InvalidArgument(format!(
            "tail constants certified at μ = {} but μ = {mu} requested (ν = {})",
            tails.mu, profile.nu
        )));
    }
    if let Some(&r) = radii.iter().find(|&&r| !tails.radii.contains(&r)) {
        return Err(Error::InvalidArgument(format!(
            "R = {r} not on the certified radius grid"
        )));
    }
    let g = set.geometry();
    let cell = g.cell_area();
    let (nu, c0, a) = (profile.nu, bumps.c0(), profile.a_const);
    let r = bumps.packing_radius();
    let mut report = TruncationReport {
        mu,
        nu,
        a_const: a,
        c_mu,
        c0,
        c1: tails.c1,
        c2: tails.c2,
        packing_radius: r,
        cell_area: cell,
        radii: radii.to_vec(),
        actual: Vec::new(),
        delta1: Vec::new(),
        delta2: Vec::new(),
        margin: Vec::new(),
        delta1_without_c_mu: Vec::new(),
        margin_without_c_mu: Vec::new(),
    };
    for &big_r in radii {
        // V − V^R = (W − W^R) Vb* and Vb has orthonormal columns
        let tail = Mat::from_fn(w.nrows(), w.ncols(), |x, k| {
            if g.distance(x, set.centers()[k]) >= big_r {
                w[(x, k)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let actual = linalg::operator_norm(tail.as_ref());
        let decay = (1.0 + big_r).powf(nu - mu);
        let d1 = c0 * c_mu * tails.c1 * decay / cell;
        let d2 = c_mu * tails.c2 * decay * c0 * a * (1.0 + r).powf(nu) / cell;
        let d1_plain = c0 * tails.c1 * decay / cell;
        report.actual.push(actual);
        report.delta1.push(d1);
        report.delta2.push(d2);
        report.margin.push(d1 * d2 - actual * actual);
        report.delta1_without_c_mu.push(d1_plain);
        report
            .margin_without_c_mu
            .push(d1_plain * d2 - actual * actual);
    }
    Ok(report)
}

/// Everything needed for a truncation report, certified on the given set.
pub fn certify_for_truncation(
    set: &WannierCandidateSet,
    bumps: &BumpSet,
    mu: f64,
    radius_grid: &[f64],
) -> Result<(GrowthProfile, TailBoundReport)> {
    let g = set.geometry();
    let all: Vec<usize> = (0..g.len()).collect();
    // balls wrap around a torus beyond half its side and stop growing
    let limit = match g.boundary() {
        crate::geometry::Boundary::Periodic => 0.5 * g.extent(),
        crate::geometry::Boundary::Open => f64::INFINITY,
    };
    let growth_grid: Vec<f64> = radius_grid
        .iter()
        .copied()
        .filter(|&r| r > 0.0 && r <= limit)
        .collect();
    let profile = fit_growth_profile(g, &all, &growth_grid, &crate::geometry::default_nu_grid())?;
    let tails = certify_tail_bounds(g, bumps.centers(), mu, radius_grid, &all, &profile)?;
    Ok((profile, tails))
}

/// How centers are chosen for a band of given rank.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaPolicy {
    /// Rectangular sublattice with one site per `N/rank` sites when that
    /// tiles the torus; otherwise the densest square sublattice with fewer
    /// sites than the rank, with multiplicities making up the difference.
    #[default]
    Auto,
    Sublattice {
        stride: [usize; 2],
        offset: [usize; 2],
    },
    /// Sites with `(ix + iy) % 2 == parity`.
    Checkerboard {
        parity: usize,
    },
    Explicit {
        sites: Vec<usize>,
    },
}

impl GammaPolicy {
    pub fn centers(&self, geometry: &PointGeometry, rank: usize) -> Result<CenterSet> {
        if rank == 0 {
            return Err(Error::InvalidArgument("empty band".into()));
        }
        let sites: Vec<usize> = match self {
            GammaPolicy::Explicit { sites } => sites.clone(),
            GammaPolicy::Checkerboard { parity } => {
                require_lattice(geometry)?;
                (0..geometry.len())
                    .filter(|&s| {
                        let (ix, iy) = geometry.lattice_coords(s);
                        (ix + iy) % 2 == parity % 2
                    })
                    .collect()
            }
            GammaPolicy::Sublattice { stride, offset } => {
                require_lattice(geometry)?;
                sublattice(geometry, *stride, *offset)?
            }
            GammaPolicy::Auto => {
                require_lattice(geometry)?;
                sublattice(geometry, auto_stride(geometry.side(), rank), [0, 0])?
            }
        };
        if sites.is_empty() || sites.len() > rank {
            return Err(Error::RankMismatch {
                centers: sites.len(),
                rank,
            });
        }
        let base = rank / sites.len();
        let extra = rank % sites.len();
        let multiplicity = (0..sites.len())
            .map(|k| base + usize::from(k < extra))
            .collect();
        CenterSet::with_multiplicity(geometry, sites, multiplicity)
    }
}

fn require_lattice(geometry: &PointGeometry) -> Result<()> {
    if geometry.is_lattice() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "sublattice policies need a lattice geometry".into(),
        ))
    }
}

fn sublattice(
    geometry: &PointGeometry,
    stride: [usize; 2],
    offset: [usize; 2],
) -> Result<Vec<usize>> {
    if stride[0] == 0 || stride[1] == 0 {
        return Err(Error::InvalidArgument(
            "sublattice stride must be positive".into(),
        ));
    }
    let n = geometry.side();
    let (sx, sy) = (stride[0], stride[1]);
    // only whole cells, so spacing stays uniform across the torus seam
    Ok((0..geometry.len())
        .filter(|&s| {
            let (ix, iy) = geometry.lattice_coords(s);
            ix % sx == offset[0] % sx
                && iy % sy == offset[1] % sy
                && ix / sx < n / sx
                && iy / sy < n / sy
        })
        .collect())
}

/// Stride `[sx, sy]` for the Auto policy.
fn auto_stride(side: usize, rank: usize) -> [usize; 2] {
    let n = side * side;
    if n.is_multiple_of(rank) {
        let cell = n / rank;
        let best = (1..=cell)
            .filter(|&sx| cell.is_multiple_of(sx))
            .map(|sx| [sx, cell / sx])
            .filter(|s| s[0] <= s[1] && side.is_multiple_of(s[0]) && side.is_multiple_of(s[1]))
            .min_by_key(|s| s[1] - s[0]);
        if let Some(s) = best {
            return s;
        }
    }
    let s = (1..=side)
        .filter(|&s| side.is_multiple_of(s) && (side / s).pow(2) <= rank)
        .min()
        .unwrap_or(side);
    [s, s]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Degrading,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Degrading => "degrading",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyOptions {
    pub mu_ref: f64,
    /// Degrading if the smallest Gram eigenvalue ends at most this fraction
    /// of its start.
    pub gram_factor: f64,
    /// Degrading if `C_μ` ends at least this multiple of its start.
    pub c_mu_factor: f64,
    pub gram_floor: f64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        Self {
            mu_ref: 4.0,
            gram_factor: 0.5,
            c_mu_factor: 2.0,
            gram_floor: DEFAULT_GRAM_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionRow {
    pub extent: f64,
    pub rank: usize,
    pub centers: usize,
    pub gram_min: f64,
    pub gram_max: f64,
    /// Infinite when Löwdin failed.
    pub c_mu: f64,
    pub orthonormality_defect: f64,
    pub clean_gap: f64,
    pub index: f64,
    pub index_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub options: DichotomyOptions,
    pub rows: Vec<ObstructionRow>,
    pub verdict: Verdict,
}

impl ObstructionReport {
    pub fn gram_ratio(&self) -> f64 {
        ratio(
            self.rows.first().map(|r| r.gram_min),
            self.rows.last().map(|r| r.gram_min),
        )
    }

    pub fn c_mu_ratio(&self) -> f64 {
        ratio(
            self.rows.first().map(|r| r.c_mu),
            self.rows.last().map(|r| r.c_mu),
        )
    }
}

fn ratio(start: Option<f64>, end: Option<f64>) -> f64 {
    match (start, end) {
        (Some(s), Some(e)) if e.is_infinite() && s.is_finite() => f64::INFINITY,
        (Some(s), Some(e)) => e / s,
        _ => f64::NAN,
    }
}

/// `Degrading` iff the smallest Gram eigenvalue strictly decreases along the
/// ladder and ends at most `gram_factor` of its start, or `C_μ` is
/// nondecreasing and ends at least `c_mu_factor` times its start.
pub fn classify(rows: &[ObstructionRow], options: &DichotomyOptions) -> Verdict {
    let gram: Vec<f64> = rows.iter().map(|r| r.gram_min).collect();
    let cmu: Vec<f64> = rows.iter().map(|r| r.c_mu).collect();
    let gram_down = gram.windows(2).all(|w| w[1] < w[0])
        && ratio(gram.first().copied(), gram.last().copied()) <= options.gram_factor;
    let cmu_up = cmu.windows(2).all(|w| w[1] >= w[0])
        && ratio(cmu.first().copied(), cmu.last().copied()) >= options.c_mu_factor;
    if gram_down || cmu_up {
        Verdict::Degrading
    } else {
        Verdict::Stable
    }
}

/// Löwdin attempt and localization fit at each ladder size.
pub fn dichotomy_experiment(
    model: &ModelSpec,
    policy: &GammaPolicy,
    ladder: &[f64],
    options: &DichotomyOptions,
) -> Result<ObstructionReport> {
    if ladder.len() < 3 {
        return Err(Error::InvalidArgument(
            "size ladder needs at least 3 sizes".into(),
        ));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &extent in ladder {
        let built = model.build(extent)?;
        let p = &built.projection;
        let centers = policy.centers(&built.geometry, p.rank())?;
        let rho = 0.5 * centers.packing_radius().min(built.geometry.spacing());
        let bumps = build_bump_set(&built.geometry, &centers, rho)?;
        let set = lowdin_wannierize(p, &bumps, options.gram_floor)?;
        let c_mu = if set.succeeded() {
            localization_fit(&set, &[options.mu_ref])?.c_mu[0]
        } else {
            f64::INFINITY
        };
        let index = real_space_chern(p, &ConePartition::centered(&built.geometry))?;
        log::info!(
            "L = {extent}: rank {}, Gram min {:.4e}, C_{} = {:.4}",
            p.rank(),
            set.gram_min,
            options.mu_ref,
            c_mu
        );
        rows.push(ObstructionRow {
            extent,
            rank: p.rank(),
            centers: bumps.len(),
            gram_min: set.gram_min,
            gram_max: set.gram_max,
            c_mu,
            orthonormality_defect: set.orthonormality_defect,
            clean_gap: built.clean_gap,
            index: index.value,
            index_error: index.error_estimate,
        });
    }
    let verdict = classify(&rows, options);
    Ok(ObstructionReport {
        options: *options,
        rows,
        verdict,
    })
}
