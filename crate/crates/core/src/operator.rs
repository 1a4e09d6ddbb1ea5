//! Discretized magnetic Schrödinger and Dirac operators on lattice
//! geometries, random potentials, and locality measurements.
//!
//! Hopping convention: a bond from site `s` to a neighbour `t` enters as
//! `H[t][s] = −e^{iθ(t←s)}/a²`, where `θ(t←s)` is the line integral of the
//! vector potential along the bond. In the default Landau gauge
//! `A = (0, b x)`, only y-bonds carry phase (`θ = 2πφ·ix` with
//! `φ = b a²/2π` the flux per plaquette). On the torus, x-bonds crossing the
//! seam carry `−2πφ n·iy` so that every plaquette, seam included, holds
//! flux `φ`; this needs only `φ n²` to be an integer.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Boundary, PointGeometry};
use crate::spectral::{self, SpectralData};
use crate::{c64, linalg, Error, Result};

/// Relative Hermiticity tolerance enforced on every built operator.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    #[default]
    LandauX,
    Symmetric,
}

/// Uniform magnetic field on a lattice geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Field strength (1/length²).
    pub b: f64,
    #[serde(default)]
    pub gauge: Gauge,
    /// Extra phases on bonds crossing the x and y seams of a torus
    /// (fluxes through the two holes). Ignored for open boundaries.
    #[serde(default)]
    pub twist: [f64; 2],
}

impl FieldConfig {
    pub fn new(b: f64) -> Self {
        Self {
            b,
            gauge: Gauge::LandauX,
            twist: [0.0, 0.0],
        }
    }

    /// Field giving flux `phi` (in flux quanta) per plaquette of side `a`.
    pub fn from_flux_per_plaquette(phi: f64, spacing: f64) -> Self {
        Self::new(TAU * phi / (spacing * spacing))
    }

    /// Field giving `quanta` flux quanta through an `L × L` sample.
    pub fn from_flux_quanta(quanta: f64, extent: f64) -> Self {
        Self::new(TAU * quanta / (extent * extent))
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn with_twist(mut self, twist: [f64; 2]) -> Self {
        self.twist = twist;
        self
    }

    pub fn flux_per_plaquette(&self, spacing: f64) -> f64 {
        self.b * spacing * spacing / TAU
    }

    /// `b L² / 2π`.
    pub fn total_flux(&self, geometry: &PointGeometry) -> f64 {
        self.b * geometry.extent() * geometry.extent() / TAU
    }

    /// Magnetic length `1/√b`.
    pub fn magnetic_length(&self) -> f64 {
        1.0 / self.b.sqrt()
    }

    /// Flux quantization check for periodic samples.
    pub fn validate(&self, geometry: &PointGeometry) -> Result<()> {
        if !geometry.is_lattice() {
            return Err(Error::InvalidArgument(
                "magnetic operators need a lattice geometry".into(),
            ));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "field strength {} is not finite",
                self.b
            )));
        }
        if geometry.boundary() == Boundary::Periodic {
            let total = self.total_flux(geometry);
            if (total - total.round()).abs() > 1e-9 * total.abs().max(1.0) {
                let l = geometry.extent();
                return Err(Error::FluxQuantization {
                    total,
                    suggested_b: TAU * total.round() / (l * l),
                });
            }
        }
        Ok(())
    }
}

/// I.i.d. uniform on-site potential on `[−W, W]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderConfig {
    pub strength: f64,
    pub seed: u64,
}

/// Compressed rows, columns sorted, duplicates summed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, c64)>>,
}

impl SparseMatrix {
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, c64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, c64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            rows[i].push((j, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, c64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 != c64::new(0.0, 0.0));
            *row = merged;
        }
        Self { n, rows }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or_default()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        let mut trip = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in &other.rows[k] {
                    trip.push((i, j, a * b));
                }
            }
        }
        SparseMatrix::from_triplets(self.n, trip)
    }

    pub fn adjoint(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.n, self.entries().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scaled_add(&self, other: &SparseMatrix, t: f64) -> SparseMatrix {
        let trip = self
            .entries()
            .chain(other.entries().map(|(i, j, v)| (i, j, v * t)));
        SparseMatrix::from_triplets(self.n, trip)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorMatrix {
    Sparse(SparseMatrix),
    Dense(Mat<c64>),
}

/// Self-adjoint operator on the site basis of a geometry, possibly with
/// several internal components per site (basis index `site·components + c`).
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    geometry: Arc<PointGeometry>,
    components: usize,
    matrix: OperatorMatrix,
    hopping_range: f64,
}

impl HermitianOperator {
    /// Wraps a matrix after checking shape and Hermiticity.
    pub fn new(
        geometry: Arc<PointGeometry>,
        components: usize,
        matrix: OperatorMatrix,
        hopping_range: f64,
    ) -> Result<Self> {
        let dim = geometry.len() * components;
        let n = match &matrix {
            OperatorMatrix::Sparse(s) => s.dim(),
            OperatorMatrix::Dense(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::InvalidArgument(
                        "operator matrix is not square".into(),
                    ));
                }
                m.nrows()
            }
        };
        if n != dim {
            return Err(Error::InvalidArgument(format!(
                "operator dimension {n} does not match {} sites × {components} components",
                geometry.len()
            )));
        }
        let op = Self {
            geometry,
            components,
            matrix,
            hopping_range,
        };
        let defect = op.relative_hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(op)
    }

    pub(crate) fn from_dense_unchecked(
        geometry: Arc<PointGeometry>,
        components: usize,
        matrix: Mat<c64>,
        hopping_range: f64,
    ) -> Self {
        Self {
            geometry,
            components,
            matrix: OperatorMatrix::Dense(matrix),
            hopping_range,
        }
    }

    pub fn geometry(&self) -> &Arc<PointGeometry> {
        &self.geometry
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.geometry.len() * self.components
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    /// Declared hopping range; `f64::INFINITY` for dense functions of operators.
    pub fn hopping_range(&self) -> f64 {
        self.hopping_range
    }

    pub fn site_of(&self, basis_index: usize) -> usize {
        basis_index / self.components
    }

    pub fn to_dense(&self) -> Mat<c64> {
        match &self.matrix {
            OperatorMatrix::Sparse(s) => s.to_dense(),
            OperatorMatrix::Dense(m) => m.clone(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        match &self.matrix {
            OperatorMatrix::Sparse(s) => s.get(i, j),
            OperatorMatrix::Dense(m) => m[(i, j)],
        }
    }

    /// Nonzero entries `(row, col, value)`.
    pub fn entries(&self) -> Box<dyn Iterator<Item = (usize, usize, c64)> + '_> {
        match &self.matrix {
            OperatorMatrix::Sparse(s) => Box::new(s.entries()),
            OperatorMatrix::Dense(m) => {
                let n = m.nrows();
                Box::new(
                    (0..n)
                        .flat_map(move |i| (0..n).map(move |j| (i, j, m[(i, j)])))
                        .filter(|e| e.2 != c64::new(0.0, 0.0)),
                )
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().fold(0.0, |acc, e| acc.max(e.2.norm()))
    }

    /// `max |T_ij − conj T_ji| / max |T|` (0 for the zero operator).
    pub fn relative_hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let defect = match &self.matrix {
            OperatorMatrix::Sparse(s) => s
                .entries()
                .map(|(i, j, v)| (v - s.get(j, i).conj()).norm())
                .fold(0.0, f64::max),
            OperatorMatrix::Dense(m) => linalg::hermitian_defect(m.as_ref()),
        };
        defect / scale
    }

    /// Largest distance between the sites of any nonzero entry.
    pub fn max_entry_distance(&self) -> f64 {
        self.entries()
            .map(|(i, j, _)| self.geometry.distance(self.site_of(i), self.site_of(j)))
            .fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &HermitianOperator) -> Result<()> {
        if self.components != other.components || self.geometry.len() != other.geometry.len() {
            return Err(Error::InvalidArgument(
                "operators live on different spaces".into(),
            ));
        }
        Ok(())
    }

    /// `self + t·other`.
    pub fn plus_scaled(&self, other: &HermitianOperator, t: f64) -> Result<HermitianOperator> {
        self.check_compatible(other)?;
        let matrix = match (&self.matrix, &other.matrix) {
            (OperatorMatrix::Sparse(a), OperatorMatrix::Sparse(b)) => {
                OperatorMatrix::Sparse(a.scaled_add(b, t))
            }
            _ => {
                let b = other.to_dense();
                let a = self.to_dense();
                OperatorMatrix::Dense(Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
                    a[(i, j)] + b[(i, j)] * t
                }))
            }
        };
        Ok(Self {
            geometry: Arc::clone(&self.geometry),
            components: self.components,
            matrix,
            hopping_range: self.hopping_range.max(other.hopping_range),
        })
    }

    /// `self · other` (Hermitian when the factors commute, e.g. `H²`).
    pub fn product(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_compatible(other)?;
        let matrix = match (&self.matrix, &other.matrix) {
            (OperatorMatrix::Sparse(a), OperatorMatrix::Sparse(b)) => {
                OperatorMatrix::Sparse(a.matmul(b))
            }
            _ => OperatorMatrix::Dense(&self.to_dense() * &other.to_dense()),
        };
        HermitianOperator::new(
            Arc::clone(&self.geometry),
            self.components,
            matrix,
            self.hopping_range + other.hopping_range,
        )
    }

    /// Diagonal part (one value per basis index).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// Off-diagonal block `A` of a two-component operator `[[0, A], [A*, 0]]`.
    /// `None` if the operator is not of that chiral form.
    pub fn chiral_block(&self) -> Option<SparseMatrix> {
        if self.components != 2 {
            return None;
        }
        let mut trip = Vec::new();
        for (i, j, v) in self.entries() {
            match (i % 2, j % 2) {
                _ if v == c64::new(0.0, 0.0) => {}
                (0, 1) => trip.push((i / 2, j / 2, v)),
                (1, 0) => {}
                _ => return None,
            }
        }
        Some(SparseMatrix::from_triplets(self.geometry.len(), trip))
    }

    /// `(row, col, re, im)` triplets for export.
    pub fn triplets(&self) -> Vec<(usize, usize, f64, f64)> {
        self.entries().map(|(i, j, v)| (i, j, v.re, v.im)).collect()
    }
}

/// Peierls phase of the bond `t ← s` in the configured gauge.
struct PeierlsPhases {
    phi: f64,
    side: usize,
    periodic: bool,
    gauge: Gauge,
    twist: [f64; 2],
}

impl PeierlsPhases {
    fn new(geometry: &PointGeometry, field: &FieldConfig) -> Self {
        Self {
            phi: field.flux_per_plaquette(geometry.spacing()),
            side: geometry.side(),
            periodic: geometry.boundary() == Boundary::Periodic,
            gauge: field.gauge,
            twist: if geometry.boundary() == Boundary::Periodic {
                field.twist
            } else {
                [0.0, 0.0]
            },
        }
    }

    /// Gauge function taking Landau-x to symmetric gauge: `−πφ·ix·iy`.
    fn chi(&self, ix: usize, iy: usize) -> f64 {
        match self.gauge {
            Gauge::LandauX => 0.0,
            Gauge::Symmetric => -PI * self.phi * (ix as f64) * (iy as f64),
        }
    }

    /// Phase of the +x bond leaving `(ix, iy)`; `None` at an open edge.
    fn x_bond(&self, ix: usize, iy: usize) -> Option<(usize, usize, f64)> {
        let n = self.side;
        let (tx, landau) = if ix + 1 < n {
            (ix + 1, 0.0)
        } else if self.periodic {
            (0, -TAU * self.phi * (n * iy) as f64 + self.twist[0])
        } else {
            return None;
        };
        Some((tx, iy, landau + self.chi(tx, iy) - self.chi(ix, iy)))
    }

    /// Phase of the +y bond leaving `(ix, iy)`.
    fn y_bond(&self, ix: usize, iy: usize) -> Option<(usize, usize, f64)> {
        let n = self.side;
        let base = TAU * self.phi * ix as f64;
        let (ty, landau) = if iy + 1 < n {
            (iy + 1, base)
        } else if self.periodic {
            (0, base + self.twist[1])
        } else {
            return None;
        };
        Some((ix, ty, landau + self.chi(ix, ty) - self.chi(ix, iy)))
    }
}

/// Five-point Peierls stencil: `4/a²` on the diagonal and `−e^{iθ}/a²` on
/// nearest-neighbour bonds, so the continuum limit is the nonnegative
/// magnetic Laplacian with Landau levels near `(2n+1)b`.
pub fn build_magnetic_hamiltonian(
    geometry: &Arc<PointGeometry>,
    field: &FieldConfig,
) -> Result<HermitianOperator> {
    field.validate(geometry)?;
    let a = geometry.spacing();
    let hop = 1.0 / (a * a);
    let phases = PeierlsPhases::new(geometry, field);
    let n = geometry.side();
    let mut trip = Vec::with_capacity(5 * geometry.len());
    for ix in 0..n {
        for iy in 0..n {
            let s = ix * n + iy;
            trip.push((s, s, c64::new(4.0 * hop, 0.0)));
            for bond in [phases.x_bond(ix, iy), phases.y_bond(ix, iy)]
                .into_iter()
                .flatten()
            {
                let (tx, ty, theta) = bond;
                let t = tx * n + ty;
                let v = -c64::from_polar(hop, theta);
                trip.push((t, s, v));
                trip.push((s, t, v.conj()));
            }
        }
    }
    HermitianOperator::new(
        Arc::clone(geometry),
        1,
        OperatorMatrix::Sparse(SparseMatrix::from_triplets(geometry.len(), trip)),
        a,
    )
}

/// Two-component lattice Dirac operator `[[0, A], [A*, 0]]` with
/// `A = −i∇ₓ − ∇_y` built from forward covariant differences
/// `(∇_μ ψ)(s) = (e^{−iθ(s+μ←s)} ψ(s+μ) − ψ(s))/a`.
pub fn build_lattice_dirac(
    geometry: &Arc<PointGeometry>,
    field: &FieldConfig,
) -> Result<HermitianOperator> {
    field.validate(geometry)?;
    let a = geometry.spacing();
    let phases = PeierlsPhases::new(geometry, field);
    let n = geometry.side();
    let i_unit = c64::new(0.0, 1.0);
    let mut block = Vec::with_capacity(3 * geometry.len());
    for ix in 0..n {
        for iy in 0..n {
            let s = ix * n + iy;
            // −i(−1/a) − (−1/a)
            block.push((s, s, c64::new(1.0, 1.0) / a));
            if let Some((tx, ty, theta)) = phases.x_bond(ix, iy) {
                block.push((s, tx * n + ty, -i_unit * c64::from_polar(1.0 / a, -theta)));
            }
            if let Some((tx, ty, theta)) = phases.y_bond(ix, iy) {
                block.push((s, tx * n + ty, -c64::from_polar(1.0 / a, -theta)));
            }
        }
    }
    let mut trip = Vec::with_capacity(2 * block.len());
    for (s, t, v) in block {
        trip.push((2 * s, 2 * t + 1, v));
        trip.push((2 * t + 1, 2 * s, v.conj()));
    }
    HermitianOperator::new(
        Arc::clone(geometry),
        2,
        OperatorMatrix::Sparse(SparseMatrix::from_triplets(2 * geometry.len(), trip)),
        a,
    )
}

/// Diagonal potential with i.i.d. entries uniform on `[−W, W]`, reproducible
/// per seed (ChaCha8).
pub fn build_disorder_potential(
    geometry: &Arc<PointGeometry>,
    disorder: &DisorderConfig,
) -> Result<HermitianOperator> {
    let w = disorder.strength;
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "disorder strength must be ≥ 0, got {w}"
        )));
    }
    let values = disorder_values(geometry.len(), disorder);
    diagonal_operator(geometry, &values)
}

pub(crate) fn disorder_values(n: usize, disorder: &DisorderConfig) -> Vec<f64> {
    let w = disorder.strength;
    if w == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(disorder.seed);
    (0..n).map(|_| rng.gen_range(-w..=w)).collect()
}

/// Single-component diagonal operator.
pub fn diagonal_operator(
    geometry: &Arc<PointGeometry>,
    values: &[f64],
) -> Result<HermitianOperator> {
    if values.len() != geometry.len() {
        return Err(Error::InvalidArgument("one value per site required".into()));
    }
    let trip = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, i, c64::new(v, 0.0)));
    HermitianOperator::new(
        Arc::clone(geometry),
        1,
        OperatorMatrix::Sparse(SparseMatrix::from_triplets(geometry.len(), trip)),
        0.0,
    )
}

/// Kernel decay of an operator, relaxed by a relative threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationReport {
    pub epsilon: f64,
    /// Largest site distance with `|T_ij| > ε·max|T|`.
    pub propagation: f64,
    pub max_entry: f64,
    /// `(distance bin, max |T_ij| in bin)`, ascending.
    pub samples: Vec<(f64, f64)>,
}

impl PropagationReport {
    /// Exponential decay length from a least-squares fit of `ln max|T|`
    /// against distance, over bins above `floor · max|T|`.
    pub fn decay_length(&self, floor: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.1 > floor * self.max_entry && s.1 > 0.0)
            .map(|&(d, v)| (d, v.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (slope < 0.0).then(|| -1.0 / slope)
    }
}

/// `R_ε = max d(i, j)` over entries with `|T_ij| > ε·max|T|`; `ε = 0` gives
/// the exact propagation of the stored kernel.
pub fn measure_propagation(op: &HermitianOperator, epsilon: f64) -> Result<PropagationReport> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "ε must lie in [0, 1), got {epsilon}"
        )));
    }
    let geometry = op.geometry();
    let max_entry = op.max_abs();
    if max_entry == 0.0 {
        return Ok(PropagationReport {
            epsilon,
            propagation: 0.0,
            max_entry,
            samples: Vec::new(),
        });
    }
    let width = if geometry.is_lattice() {
        0.5 * geometry.spacing()
    } else {
        0.5 * geometry.cell_area().sqrt()
    };
    let threshold = epsilon * max_entry;
    let mut propagation = 0.0f64;
    let mut bins: std::collections::BTreeMap<u64, f64> = Default::default();
    for (i, j, v) in op.entries() {
        let m = v.norm();
        let d = geometry.distance(op.site_of(i), op.site_of(j));
        if m > threshold {
            propagation = propagation.max(d);
        }
        let key = (d / width).round() as u64;
        let slot = bins.entry(key).or_insert(0.0);
        *slot = slot.max(m);
    }
    Ok(PropagationReport {
        epsilon,
        propagation,
        max_entry,
        samples: bins
            .into_iter()
            .map(|(k, v)| (k as f64 * width, v))
            .collect(),
    })
}

/// Smooth bump: 1 on the plateau, 0 outside the support, `C^∞` in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothBump {
    pub support: (f64, f64),
    pub plateau: (f64, f64),
}

impl SmoothBump {
    pub fn new(support: (f64, f64), plateau: (f64, f64)) -> Result<Self> {
        let ok = support.0 <= plateau.0 && plateau.0 <= plateau.1 && plateau.1 <= support.1;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "plateau {plateau:?} must lie inside support {support:?}"
            )));
        }
        Ok(Self { support, plateau })
    }

    pub fn one() -> Self {
        Self {
            support: (f64::NEG_INFINITY, f64::INFINITY),
            plateau: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn zero() -> Self {
        Self {
            support: (f64::NAN, f64::NAN),
            plateau: (f64::NAN, f64::NAN),
        }
    }

    /// Bump equal to 1 on `[lo, hi]` and 0 beyond the given margins.
    pub fn around(lo: f64, hi: f64, margin_below: f64, margin_above: f64) -> Self {
        Self {
            support: (lo - margin_below, hi + margin_above),
            plateau: (lo, hi),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (s0, s1) = self.support;
        let (p0, p1) = self.plateau;
        if !(x > s0 && x < s1) {
            // closed plateau endpoints count as inside
            return if x >= p0 && x <= p1 { 1.0 } else { 0.0 };
        }
        if x >= p0 && x <= p1 {
            1.0
        } else if x < p0 {
            smooth_step((x - s0) / (p0 - s0))
        } else {
            smooth_step((s1 - x) / (s1 - p1))
        }
    }

    /// True when `x` lies where the bump is strictly between 0 and 1.
    pub fn in_transition(&self, x: f64) -> bool {
        let v = self.eval(x);
        v > 0.0 && v < 1.0
    }
}

/// `C^∞` step from 0 at `t ≤ 0` to 1 at `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let a = f(t);
    let b = f(1.0 - t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Result of `φ(H) = U φ(Λ) U*`.
#[derive(Clone, Debug)]
pub struct FunctionalCalculus {
    pub operator: HermitianOperator,
    /// Eigenvalues in the bump's transition region; empty iff the result is
    /// a spectral projection.
    pub transition_eigenvalues: Vec<f64>,
}

impl FunctionalCalculus {
    pub fn is_projection(&self) -> bool {
        self.transition_eigenvalues.is_empty()
    }

    pub fn into_projection(self) -> Result<HermitianOperator> {
        if self.is_projection() {
            Ok(self.operator)
        } else {
            Err(Error::NotAProjection(self.transition_eigenvalues))
        }
    }
}

pub fn apply_function(op: &HermitianOperator, bump: &SmoothBump) -> Result<FunctionalCalculus> {
    let data = spectral::eigendecompose(op)?;
    Ok(apply_function_with(&data, bump))
}

/// Functional calculus on an existing decomposition.
pub fn apply_function_with(data: &SpectralData, bump: &SmoothBump) -> FunctionalCalculus {
    let u = data.eigenvectors();
    let n = u.nrows();
    let weights: Vec<f64> = data.eigenvalues().iter().map(|&x| bump.eval(x)).collect();
    let transition_eigenvalues = data
        .eigenvalues()
        .iter()
        .copied()
        .filter(|&x| bump.in_transition(x))
        .collect();
    let mut scaled = u.to_owned();
    for (j, &w) in weights.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    let mut m = &scaled * u.adjoint();
    symmetrize(&mut m);
    FunctionalCalculus {
        operator: HermitianOperator::from_dense_unchecked(
            Arc::clone(data.geometry()),
            data.components(),
            m,
            f64::INFINITY,
        ),
        transition_eigenvalues,
    }
}

/// Replaces `m` by `(m + m*)/2`.
pub(crate) fn symmetrize(m: &mut Mat<c64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = c64::new(m[(j, j)].re, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigenvalues;
    use approx::assert_abs_diff_eq;

    fn lattice(a: f64, l: f64, b: Boundary) -> Arc<PointGeometry> {
        Arc::new(PointGeometry::lattice(a, l, b).unwrap())
    }

    #[test]
    fn free_laplacian_spectrum_in_fourier_range() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let g = lattice(0.5, 6.0, boundary);
            let h = build_magnetic_hamiltonian(&g, &FieldConfig::new(0.0)).unwrap();
            let ev = eigenvalues(&h).unwrap();
            assert!(ev[0] >= -1e-10);
            assert!(*ev.last().unwrap() <= 8.0 / 0.25 + 1e-10);
        }
        // periodic free spectrum: brute-force Fourier oracle
        let g = lattice(1.0, 6.0, Boundary::Periodic);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::new(0.0)).unwrap();
        let ev = eigenvalues(&h).unwrap();
        let mut oracle: Vec<f64> = (0..6)
            .flat_map(|p| (0..6).map(move |q| (p, q)))
            .map(|(p, q)| {
                let (kx, ky) = (TAU * p as f64 / 6.0, TAU * q as f64 / 6.0);
                4.0 - 2.0 * kx.cos() - 2.0 * ky.cos()
            })
            .collect();
        oracle.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn every_plaquette_carries_the_flux() {
        // sum of bond phases around each plaquette, including seams
        let g = lattice(1.0, 6.0, Boundary::Periodic);
        let field = FieldConfig::from_flux_quanta(5.0, 6.0).with_twist([0.3, -0.7]);
        let phi = field.flux_per_plaquette(1.0);
        for gauge in [Gauge::LandauX, Gauge::Symmetric] {
            let h = build_magnetic_hamiltonian(&g, &field.with_gauge(gauge)).unwrap();
            for ix in 0..6isize {
                for iy in 0..6isize {
                    let s = |x, y| g.site_at(x, y).unwrap();
                    // H[t][s] = −e^{iθ(t←s)}
                    let loop_product = -h.get(s(ix + 1, iy), s(ix, iy))
                        * -h.get(s(ix + 1, iy + 1), s(ix + 1, iy))
                        * -h.get(s(ix, iy + 1), s(ix + 1, iy + 1))
                        * -h.get(s(ix, iy), s(ix, iy + 1));
                    assert_abs_diff_eq!(
                        loop_product.arg(),
                        (TAU * phi + PI).rem_euclid(TAU) - PI,
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn flux_quantization_enforced_on_torus() {
        let g = lattice(0.25, 16.0, Boundary::Periodic);
        let err = build_magnetic_hamiltonian(&g, &FieldConfig::new(1.0)).unwrap_err();
        match err {
            Error::FluxQuantization { total, suggested_b } => {
                assert_abs_diff_eq!(total, 256.0 / TAU, epsilon = 1e-9);
                assert_abs_diff_eq!(suggested_b, TAU * 41.0 / 256.0, epsilon = 1e-12);
            }
            e => panic!("unexpected {e:?}"),
        }
        let open = lattice(0.25, 16.0, Boundary::Open);
        assert!(build_magnetic_hamiltonian(&open, &FieldConfig::new(1.0)).is_ok());
    }

    #[test]
    fn gauges_are_unitarily_equivalent() {
        for boundary in [Boundary::Open, Boundary::Periodic] {
            let g = lattice(1.0, 8.0, boundary);
            let field = FieldConfig::from_flux_per_plaquette(1.0 / 8.0, 1.0);
            let hl = build_magnetic_hamiltonian(&g, &field).unwrap();
            let hs = build_magnetic_hamiltonian(&g, &field.with_gauge(Gauge::Symmetric)).unwrap();
            let el = eigenvalues(&hl).unwrap();
            let es = eigenvalues(&hs).unwrap();
            for (a, b) in el.iter().zip(&es) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
            // entrywise: H_sym = G H_landau G*, G = diag(e^{−iπφ ix iy})
            let phi = 1.0 / 8.0;
            for (i, j, v) in hl.entries() {
                let (xi, yi) = g.lattice_coords(i);
                let (xj, yj) = g.lattice_coords(j);
                let chi = |x: usize, y: usize| -PI * phi * (x * y) as f64;
                let expected = v * c64::from_polar(1.0, chi(xi, yi) - chi(xj, yj));
                assert_abs_diff_eq!((hs.get(i, j) - expected).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn disorder_is_bounded_and_reproducible() {
        let g = lattice(1.0, 64.0, Boundary::Periodic);
        let zero = build_disorder_potential(
            &g,
            &DisorderConfig {
                strength: 0.0,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let cfg = DisorderConfig {
            strength: 0.5,
            seed: 11,
        };
        let v1 = build_disorder_potential(&g, &cfg).unwrap().diagonal();
        let v2 = build_disorder_potential(&g, &cfg).unwrap().diagonal();
        assert_eq!(v1, v2);
        assert!(v1.iter().all(|x| x.abs() <= 0.5));
        // law of large numbers: std of the mean is 0.5/√(3·4096) ≈ 0.0045
        let mean = v1.iter().sum::<f64>() / v1.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        let other = build_disorder_potential(
            &g,
            &DisorderConfig {
                strength: 0.5,
                seed: 12,
            },
        )
        .unwrap();
        assert_ne!(v1, other.diagonal());
    }

    #[test]
    fn stencil_propagation_is_one_spacing() {
        let g = lattice(0.5, 4.0, Boundary::Open);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::new(1.0)).unwrap();
        for eps in [0.0, 1e-3, 0.2] {
            assert_abs_diff_eq!(
                measure_propagation(&h, eps).unwrap().propagation,
                0.5,
                epsilon = 1e-12
            );
        }
        let h2 = h.product(&h).unwrap();
        assert_abs_diff_eq!(
            measure_propagation(&h2, 1e-6).unwrap().propagation,
            1.0,
            epsilon = 1e-12
        );
        assert!(h.max_entry_distance() <= h.hopping_range() + 1e-12);
    }

    #[test]
    fn zero_operator_has_no_propagation() {
        let g = lattice(1.0, 4.0, Boundary::Open);
        let z = diagonal_operator(&g, &[0.0; 16]).unwrap();
        let r = measure_propagation(&z, 0.1).unwrap();
        assert_eq!(r.propagation, 0.0);
        assert!(r.samples.is_empty());
        assert!(measure_propagation(&z, 1.0).is_err());
    }

    #[test]
    fn dirac_is_hermitian_and_chiral() {
        let g = lattice(0.5, 4.0, Boundary::Periodic);
        let d = build_lattice_dirac(&g, &FieldConfig::from_flux_quanta(2.0, 4.0)).unwrap();
        assert!(d.relative_hermitian_defect() <= HERMITIAN_TOL);
        assert!(d.chiral_block().is_some());
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::new(0.0)).unwrap();
        assert!(h.chiral_block().is_none());
    }

    #[test]
    fn non_hermitian_matrix_rejected() {
        let g = lattice(1.0, 4.0, Boundary::Open);
        let m = SparseMatrix::from_triplets(16, [(0, 1, c64::new(1.0, 0.0))]);
        assert!(matches!(
            HermitianOperator::new(g, 1, OperatorMatrix::Sparse(m), 1.0),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn constant_functions() {
        let g = lattice(1.0, 4.0, Boundary::Periodic);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_quanta(2.0, 4.0)).unwrap();
        let one = apply_function(&h, &SmoothBump::one()).unwrap();
        assert!(one.is_projection());
        let m = one.operator.to_dense();
        let id = linalg::identity(16);
        assert!(linalg::max_abs((&m - &id).as_ref()) < 1e-10);
        let zero = apply_function(&h, &SmoothBump::zero()).unwrap();
        assert_eq!(zero.operator.max_abs(), 0.0);
    }

    #[test]
    fn bump_in_a_cluster_is_flagged() {
        let g = lattice(1.0, 8.0, Boundary::Periodic);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let ev = eigenvalues(&h).unwrap();
        // the lowest cluster is exactly degenerate, so end the plateau just below it
        let bump =
            SmoothBump::new((ev[0] - 1.0, ev[0] + 0.01), (ev[0] - 0.5, ev[0] - 1e-3)).unwrap();
        let out = apply_function(&h, &bump).unwrap();
        assert!(!out.is_projection());
        assert!(matches!(out.into_projection(), Err(Error::NotAProjection(v)) if !v.is_empty()));
    }

    #[test]
    fn function_commutes_with_operator() {
        let g = lattice(1.0, 8.0, Boundary::Periodic);
        let h = build_magnetic_hamiltonian(&g, &FieldConfig::from_flux_per_plaquette(0.125, 1.0))
            .unwrap();
        let bump = SmoothBump::new((0.0, 2.0), (0.5, 1.0)).unwrap();
        let f = apply_function(&h, &bump).unwrap().operator.to_dense();
        let hd = h.to_dense();
        let comm = &f * &hd - &hd * &f;
        let norm_h = linalg::hermitian_norm(hd.as_ref());
        assert!(linalg::operator_norm(comm.as_ref()) <= 1e-9 * norm_h);
    }

    #[test]
    fn smooth_step_is_monotone_and_bounded() {
        let bump = SmoothBump::new((0.0, 4.0), (1.0, 3.0)).unwrap();
        let mut prev = 0.0;
        for k in 0..=100 {
            let x = k as f64 * 0.01;
            let v = bump.eval(x);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(bump.eval(2.0), 1.0);
        assert_eq!(bump.eval(4.5), 0.0);
        assert!(SmoothBump::new((0.0, 1.0), (0.5, 2.0)).is_err());
    }
}
