//! Dense eigendecomposition, spectral windows, band projections and gap
//! tracking along linear homotopies.

use std::sync::Arc;

use faer::Mat;
use serde::Serialize;

use crate::geometry::PointGeometry;
use crate::index::{real_space_chern, ConePartition};
use crate::operator::{symmetrize, HermitianOperator, HERMITIAN_TOL};
use crate::{c64, linalg, Error, Result};

/// Eigenvalues closer than this to a window edge, from outside, make the
/// window ambiguous.
pub const WINDOW_SEPARATION: f64 = 1e-8;

/// Full eigendecomposition of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralData {
    geometry: Arc<PointGeometry>,
    components: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<c64>,
}

impl SpectralData {
    pub fn geometry(&self) -> &Arc<PointGeometry> {
        &self.geometry
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are orthonormal eigenvectors, each with its first
    /// non-negligible component real and positive.
    pub fn eigenvectors(&self) -> faer::MatRef<'_, c64> {
        self.eigenvectors.as_ref()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max_k ‖H u_k − λ_k u_k‖`.
    pub fn residual(&self, op: &HermitianOperator) -> f64 {
        let h = op.to_dense();
        let hu = &h * &self.eigenvectors;
        let n = self.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        (hu[(i, k)] - self.eigenvectors[(i, k)] * self.eigenvalues[k]).norm_sqr()
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn check_hermitian(op: &HermitianOperator) -> Result<()> {
    let defect = op.relative_hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

pub fn eigendecompose(op: &HermitianOperator) -> Result<SpectralData> {
    check_hermitian(op)?;
    let h = op.to_dense();
    let (eigenvalues, mut u) = linalg::hermitian_eigen(h.as_ref())?;
    fix_phases(&mut u);
    Ok(SpectralData {
        geometry: Arc::clone(op.geometry()),
        components: op.components(),
        eigenvalues,
        eigenvectors: u,
    })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(op: &HermitianOperator) -> Result<Vec<f64>> {
    check_hermitian(op)?;
    linalg::hermitian_eigenvalues(op.to_dense().as_ref())
}

/// Rotates each column so its first component above `1e-12` in modulus
/// (relative to the column maximum) is real positive.
fn fix_phases(u: &mut Mat<c64>) {
    let n = u.nrows();
    for k in 0..u.ncols() {
        let max = (0..n).map(|i| u[(i, k)].norm()).fold(0.0, f64::max);
        if let Some(i0) = (0..n).find(|&i| u[(i, k)].norm() > 1e-12 * max) {
            let phase = u[(i0, k)].conj() / u[(i0, k)].norm();
            for i in 0..n {
                u[(i, k)] *= phase;
            }
            u[(i0, k)] = c64::new(u[(i0, k)].re, 0.0);
        }
    }
}

/// Eigenvalue cluster separated from the rest of the spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandWindow {
    pub lo: f64,
    pub hi: f64,
    /// Index of the first eigenvalue in the window.
    pub first: usize,
    pub rank: usize,
    /// Distance to the next eigenvalue below; infinite for the bottom window.
    pub gap_below: f64,
    pub gap_above: f64,
}

impl BandWindow {
    pub fn min_gap(&self) -> f64 {
        self.gap_below.min(self.gap_above)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Splits a sorted spectrum at every gap of width at least `threshold`.
pub fn detect_gaps(eigenvalues: &[f64], threshold: f64) -> Vec<BandWindow> {
    let mut windows = Vec::new();
    if eigenvalues.is_empty() {
        return windows;
    }
    let mut start = 0;
    for k in 1..=eigenvalues.len() {
        let split = k == eigenvalues.len() || eigenvalues[k] - eigenvalues[k - 1] >= threshold;
        if split {
            windows.push(BandWindow {
                lo: eigenvalues[start],
                hi: eigenvalues[k - 1],
                first: start,
                rank: k - start,
                gap_below: if start == 0 {
                    f64::INFINITY
                } else {
                    eigenvalues[start] - eigenvalues[start - 1]
                },
                gap_above: if k == eigenvalues.len() {
                    f64::INFINITY
                } else {
                    eigenvalues[k] - eigenvalues[k - 1]
                },
            });
            start = k;
        }
    }
    windows
}

/// Window `[lo, hi]` chosen by hand; rank and gaps are read off the spectrum.
pub fn window_from_bounds(eigenvalues: &[f64], lo: f64, hi: f64) -> Result<BandWindow> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    let first = eigenvalues.partition_point(|&x| x < lo);
    let end = eigenvalues.partition_point(|&x| x <= hi);
    let below = first.checked_sub(1).map(|k| eigenvalues[k]);
    let above = eigenvalues.get(end).copied();
    if let Some(x) = below.filter(|&x| lo - x < WINDOW_SEPARATION) {
        return Err(Error::WindowNotSeparated {
            lo,
            hi,
            eigenvalue: x,
        });
    }
    if let Some(x) = above.filter(|&x| x - hi < WINDOW_SEPARATION) {
        return Err(Error::WindowNotSeparated {
            lo,
            hi,
            eigenvalue: x,
        });
    }
    let inner = &eigenvalues[first..end];
    Ok(BandWindow {
        lo: inner.first().copied().unwrap_or(lo),
        hi: inner.last().copied().unwrap_or(hi),
        first,
        rank: end - first,
        gap_below: below.map_or(f64::INFINITY, |x| inner.first().copied().unwrap_or(lo) - x),
        gap_above: above.map_or(f64::INFINITY, |x| x - inner.last().copied().unwrap_or(hi)),
    })
}

/// Orthogonal projection with the window it was built from (if any).
#[derive(Clone, Debug)]
pub struct Projection {
    geometry: Arc<PointGeometry>,
    components: usize,
    matrix: Mat<c64>,
    rank: usize,
    window: Option<BandWindow>,
    /// Orthonormal basis of the range, when known.
    basis: Option<Mat<c64>>,
}

impl Projection {
    /// `Σ_k u_k u_k*` over orthonormal columns `u`.
    pub fn from_orthonormal_columns(
        geometry: Arc<PointGeometry>,
        components: usize,
        columns: Mat<c64>,
    ) -> Result<Self> {
        if columns.nrows() != geometry.len() * components {
            return Err(Error::InvalidArgument(
                "column length does not match the space".into(),
            ));
        }
        let mut matrix = linalg::outer_sum(columns.as_ref());
        symmetrize(&mut matrix);
        Ok(Self {
            geometry,
            components,
            rank: columns.ncols(),
            matrix,
            window: None,
            basis: Some(columns),
        })
    }

    pub fn geometry(&self) -> &Arc<PointGeometry> {
        &self.geometry
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn matrix(&self) -> faer::MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn window(&self) -> Option<&BandWindow> {
        self.window.as_ref()
    }

    pub fn basis(&self) -> Option<faer::MatRef<'_, c64>> {
        self.basis.as_ref().map(|b| b.as_ref())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn site_of(&self, basis_index: usize) -> usize {
        basis_index / self.components
    }

    /// `‖P² − P‖` (operator norm).
    pub fn idempotency_defect(&self) -> f64 {
        let p2 = &self.matrix * &self.matrix;
        linalg::hermitian_norm((&p2 - &self.matrix).as_ref())
    }

    /// `max |P_ij − conj P_ji|`.
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermitian_defect(self.matrix.as_ref())
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(self.matrix.as_ref()).re
    }

    /// `‖P − Q‖`.
    pub fn distance_to(&self, other: &Projection) -> f64 {
        linalg::hermitian_norm((&self.matrix - &other.matrix).as_ref())
    }

    /// The projection as an operator (infinite declared range).
    pub fn to_operator(&self) -> HermitianOperator {
        HermitianOperator::from_dense_unchecked(
            Arc::clone(&self.geometry),
            self.components,
            self.matrix.clone(),
            f64::INFINITY,
        )
    }
}

/// `Σ_{λ_k ∈ window} u_k u_k*`. An empty window gives the zero projection.
pub fn band_projection(data: &SpectralData, window: &BandWindow) -> Result<Projection> {
    let ev = data.eigenvalues();
    let first = ev.partition_point(|&x| x < window.lo);
    let end = ev.partition_point(|&x| x <= window.hi);
    if let Some(&x) = first.checked_sub(1).and_then(|k| ev.get(k)) {
        if window.lo - x < WINDOW_SEPARATION {
            return Err(Error::WindowNotSeparated {
                lo: window.lo,
                hi: window.hi,
                eigenvalue: x,
            });
        }
    }
    if let Some(&x) = ev.get(end) {
        if x - window.hi < WINDOW_SEPARATION {
            return Err(Error::WindowNotSeparated {
                lo: window.lo,
                hi: window.hi,
                eigenvalue: x,
            });
        }
    }
    let cols = data.eigenvectors().subcols(first, end - first).to_owned();
    let mut p =
        Projection::from_orthonormal_columns(Arc::clone(data.geometry()), data.components(), cols)?;
    p.window = Some(BandWindow {
        first,
        rank: end - first,
        ..*window
    });
    Ok(p)
}

/// One step of a homotopy `H + tV`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub t: f64,
    /// Smaller of the two gaps flanking the tracked window.
    pub min_gap: f64,
    pub rank: usize,
    pub lo: f64,
    pub hi: f64,
    pub index: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomotopyScan {
    pub gap_threshold: f64,
    pub rows: Vec<ScanRow>,
}

impl HomotopyScan {
    /// The path is admissible iff the tracked window keeps a gap above the
    /// threshold at every step.
    pub fn valid(&self) -> bool {
        self.rows.iter().all(|r| r.min_gap > self.gap_threshold)
    }

    pub fn min_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.min_gap)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tracks the band starting in `window_index` (counted from the bottom of
/// `H`'s spectrum split at gaps `≥ gap_threshold`) along `H + tV`,
/// `t = 0, 1/steps, …, 1`. At each step the window of maximal overlap
/// `Tr(P_prev P_t)` is followed; a change of rank means the gap closed and
/// the scan stops with [`Error::GapClosure`].
pub fn homotopy_scan(
    h: &HermitianOperator,
    v: &HermitianOperator,
    steps: usize,
    gap_threshold: f64,
    window_index: usize,
    partition: Option<&ConePartition>,
) -> Result<HomotopyScan> {
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "homotopy needs at least one step".into(),
        ));
    }
    let mut rows = Vec::with_capacity(steps + 1);
    let mut prev_basis: Option<Mat<c64>> = None;
    let mut rank0 = 0;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let ht = h.plus_scaled(v, t)?;
        let data = eigendecompose(&ht)?;
        let windows = detect_gaps(data.eigenvalues(), gap_threshold);
        let chosen = match &prev_basis {
            None => *windows.get(window_index).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "window {window_index} requested but the spectrum has {} windows at threshold {gap_threshold}",
                    windows.len()
                ))
            })?,
            Some(prev) => {
                let overlap = |w: &BandWindow| {
                    let u = data.eigenvectors().subcols(w.first, w.rank);
                    let m = prev.adjoint() * u;
                    (0..m.nrows())
                        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                        .map(|(i, j)| m[(i, j)].norm_sqr())
                        .sum::<f64>()
                };
                *windows
                    .iter()
                    .max_by(|a, b| overlap(a).total_cmp(&overlap(b)))
                    .expect("nonempty spectrum")
            }
        };
        if k == 0 {
            rank0 = chosen.rank;
        } else if chosen.rank != rank0 {
            return Err(Error::GapClosure {
                t,
                rank_before: rank0,
                rank_after: chosen.rank,
            });
        }
        let basis = data
            .eigenvectors()
            .subcols(chosen.first, chosen.rank)
            .to_owned();
        let index = match partition {
            Some(part) => {
                let p = Projection::from_orthonormal_columns(
                    Arc::clone(data.geometry()),
                    data.components(),
                    basis.clone(),
                )?;
                Some(real_space_chern(&p, part)?.value)
            }
            None => None,
        };
        rows.push(ScanRow {
            t,
            min_gap: chosen.min_gap(),
            rank: chosen.rank,
            lo: chosen.lo,
            hi: chosen.hi,
            index,
        });
        prev_basis = Some(basis);
    }
    Ok(HomotopyScan {
        gap_threshold,
        rows,
    })
}

/// Spectrum of a chiral operator `[[0, A], [A*, 0]]` from the singular
/// values of `A`: `±σ_k`, with the `|dim A − rank A|` exact zeros implied
/// by unequal block sizes absent here because the blocks are square.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiralSpectrum {
    /// Singular values of the off-diagonal block, ascending.
    pub singular_values: Vec<f64>,
}

impl ChiralSpectrum {
    /// Full spectrum `{−σ_k} ∪ {+σ_k}`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .singular_values
            .iter()
            .rev()
            .map(|s| -s)
            .chain(self.singular_values.iter().copied())
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Number of singular values `≤ threshold`, i.e. near-zero modes per
    /// chirality.
    pub fn count_below(&self, threshold: f64) -> usize {
        self.singular_values.partition_point(|&s| s <= threshold)
    }
}

pub fn chiral_spectrum(op: &HermitianOperator) -> Result<ChiralSpectrum> {
    check_hermitian(op)?;
    let a = op
        .chiral_block()
        .ok_or_else(|| Error::InvalidArgument("operator is not of chiral block form".into()))?;
    let mut s = linalg::singular_values(a.to_dense().as_ref())?;
    s.reverse();
    Ok(ChiralSpectrum { singular_values: s })
}

/// Eigenvalues of `A A*` and `A* A` for the chiral block, each ascending.
pub fn chiral_square_blocks(op: &HermitianOperator) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = op
        .chiral_block()
        .ok_or_else(|| Error::InvalidArgument("operator is not of chiral block form".into()))?;
    let a_star = a.adjoint();
    Ok((
        linalg::hermitian_eigenvalues(a.matmul(&a_star).to_dense().as_ref())?,
        linalg::hermitian_eigenvalues(a_star.matmul(&a).to_dense().as_ref())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;
    use crate::operator::{
        apply_function_with, build_disorder_potential, build_lattice_dirac,
        build_magnetic_hamiltonian, diagonal_operator, DisorderConfig, FieldConfig, SmoothBump,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom(a: f64, l: f64) -> Arc<PointGeometry> {
        Arc::new(PointGeometry::lattice(a, l, Boundary::Periodic).unwrap())
    }

    #[test]
    fn gap_detection_examples() {
        let w = detect_gaps(&[1.0, 1.0, 1.0, 3.0, 3.0], 1.0);
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].rank, w[1].rank), (3, 2));
        assert_eq!(w[0].gap_above, 2.0);
        assert!(w[0].gap_below.is_infinite());
        let one = detect_gaps(&[1.0, 1.0, 1.0, 3.0, 3.0], 10.0);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].rank, 5);
        assert!(detect_gaps(&[], 1.0).is_empty());
    }

    #[test]
    fn empty_window_is_zero_projection() {
        let g = geom(1.0, 4.0);
        let h = diagonal_operator(&g, &[0.0; 16]).unwrap();
        let data = eigendecompose(&h).unwrap();
        let w = window_from_bounds(data.eigenvalues(), 5.0, 6.0).unwrap();
        assert_eq!(w.rank, 0);
        let p = band_projection(&data, &w).unwrap();
        assert_eq!(p.rank(), 0);
        assert_eq!(linalg::max_abs(p.matrix()), 0.0);
    }

    #[test]
    fn touching_window_rejected() {
        let g = geom(1.0, 4.0);
        let vals: Vec<f64> = (0..16).map(|k| k as f64).collect();
        let h = diagonal_operator(&g, &vals).unwrap();
        let data = eigendecompose(&h).unwrap();
        let bad = BandWindow {
            lo: 0.0,
            hi: 3.0 - 1e-9,
            first: 0,
            rank: 3,
            gap_below: f64::INFINITY,
            gap_above: 1e-9,
        };
        assert!(matches!(
            band_projection(&data, &bad),
            Err(Error::WindowNotSeparated { .. })
        ));
        assert!(window_from_bounds(data.eigenvalues(), 0.0, 3.0 - 1e-9).is_err());
    }

    #[test]
    fn non_hermitian_rejected() {
        let g = geom(1.0, 4.0);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::new(0.0)).unwrap();
        // corrupt through the dense path
        let mut m = h.to_dense();
        m[(0, 1)] += c64::new(0.0, 1e-3);
        let bad = HermitianOperator::from_dense_unchecked(g, 1, m, 1.0);
        assert!(matches!(eigendecompose(&bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn phases_fixed_and_residual_small() {
        let g = geom(1.0, 8.0);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let data = eigendecompose(&h).unwrap();
        assert!(data.residual(&h) < 1e-10);
        let u = data.eigenvectors();
        for k in 0..u.ncols() {
            let first = (0..u.nrows()).find(|&i| u[(i, k)].norm() > 1e-10).unwrap();
            assert!(u[(first, k)].im.abs() < 1e-14 && u[(first, k)].re > 0.0);
        }
    }

    #[test]
    fn projection_matches_functional_calculus() {
        let g = geom(1.0, 8.0);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let data = eigendecompose(&h).unwrap();
        let windows = detect_gaps(data.eigenvalues(), 0.3);
        let w = windows[0];
        assert_eq!(w.rank, 8);
        let p = band_projection(&data, &w).unwrap();
        assert!(p.idempotency_defect() < 1e-10);
        assert!(p.hermiticity_defect() < 1e-12);
        assert_abs_diff_eq!(p.trace(), 8.0, epsilon = 1e-10);
        let bump = SmoothBump::around(w.lo, w.hi, 0.5 * w.gap_above, 0.5 * w.gap_above);
        let f = apply_function_with(&data, &bump);
        assert!(f.is_projection());
        let diff = &f.operator.to_dense() - p.matrix();
        assert!(linalg::max_abs(diff.as_ref()) < 1e-8);
    }

    #[test]
    fn zero_perturbation_homotopy_is_constant() {
        let g = geom(1.0, 8.0);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let v = diagonal_operator(&g, &[0.0; 64]).unwrap();
        let scan = homotopy_scan(&h, &v, 4, 0.3, 0, None).unwrap();
        assert_eq!(scan.rows.len(), 5);
        for r in &scan.rows {
            assert_eq!(r.rank, scan.rows[0].rank);
            assert_eq!(r.min_gap, scan.rows[0].min_gap);
        }
        assert!(scan.valid());
    }

    #[test]
    fn strong_perturbation_closes_the_gap() {
        let g = geom(1.0, 8.0);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let v = build_disorder_potential(
            &g,
            &DisorderConfig {
                strength: 6.0,
                seed: 5,
            },
        )
        .unwrap();
        match homotopy_scan(&h, &v, 10, 0.3, 0, None) {
            Err(Error::GapClosure { t, rank_before, .. }) => {
                assert!(t > 0.0 && t <= 1.0);
                assert_eq!(rank_before, 8);
            }
            other => panic!("expected gap closure, got {other:?}"),
        }
    }

    #[test]
    fn chiral_spectrum_matches_dense() {
        let g = Arc::new(PointGeometry::lattice(0.5, 4.0, Boundary::Periodic).unwrap());
        let d = build_lattice_dirac(&g, &FieldConfig::from_flux_quanta(1.0, 4.0)).unwrap();
        let dense = eigenvalues(&d).unwrap();
        let chiral = chiral_spectrum(&d).unwrap().eigenvalues();
        assert_eq!(dense.len(), chiral.len());
        for (a, b) in dense.iter().zip(&chiral) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn windows_partition_the_spectrum(
            mut vals in proptest::collection::vec(-5.0f64..5.0, 1..40),
            g in 0.01f64..3.0,
        ) {
            vals.sort_by(f64::total_cmp);
            let w = detect_gaps(&vals, g);
            prop_assert_eq!(w.iter().map(|w| w.rank).sum::<usize>(), vals.len());
            for pair in w.windows(2) {
                prop_assert!(pair[1].lo - pair[0].hi >= g);
                prop_assert_eq!(pair[0].first + pair[0].rank, pair[1].first);
            }
            for win in &w {
                let inner = &vals[win.first..win.first + win.rank];
                for pair in inner.windows(2) {
                    prop_assert!(pair[1] - pair[0] < g);
                }
            }
        }

        #[test]
        fn random_band_projection_invariants(seed in 0u64..1000, flux in 1usize..4) {
            let g = geom(1.0, 6.0);
            let field = FieldConfig::from_flux_quanta(flux as f64 * 3.0, 6.0);
            let h = build_magnetic_hamiltonian(&g, &field).unwrap();
            let v = build_disorder_potential(&g, &DisorderConfig { strength: 0.2, seed }).unwrap();
            let hv = h.plus_scaled(&v, 1.0).unwrap();
            let data = eigendecompose(&hv).unwrap();
            for w in detect_gaps(data.eigenvalues(), 0.05) {
                let p = band_projection(&data, &w).unwrap();
                prop_assert!(p.idempotency_defect() < 1e-10);
                prop_assert!(p.hermiticity_defect() < 1e-12);
                prop_assert!((p.trace() - w.rank as f64).abs() < 1e-10);
            }
        }
    }
}
