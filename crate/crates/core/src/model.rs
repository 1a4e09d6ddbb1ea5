//! Named tight-binding models on square tori, with their lowest gapped band.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{Boundary, PointGeometry};
use crate::operator::{
    build_disorder_potential, build_magnetic_hamiltonian, diagonal_operator, DisorderConfig,
    FieldConfig, Gauge, HermitianOperator,
};
use crate::spectral::{
    band_projection, eigendecompose, eigenvalues, window_from_bounds, BandWindow, Projection,
    SpectralData,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// Peierls Laplacian with flux `phi` per plaquette; the band is the
    /// lowest magnetic subband (rank `phi·N`).
    Landau { flux_per_plaquette: f64 },
    /// Zero field with on-site `−Δ` on even and `+Δ` on odd sites; the band is
    /// the lower half of the spectrum.
    Staggered { delta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec", into = "RawModelSpec")]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub spacing: f64,
    /// Disorder amplitude `W` as a fraction of the clean gap.
    pub disorder_fraction: f64,
    pub seed: u64,
    pub twist: [f64; 2],
    pub gauge: Gauge,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Landau,
    Staggered,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelSpec {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flux_per_plaquette: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default = "unit")]
    spacing: f64,
    #[serde(default)]
    disorder_fraction: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    twist: [f64; 2],
    #[serde(default)]
    gauge: Gauge,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = String;

    fn try_from(raw: RawModelSpec) -> std::result::Result<Self, String> {
        let kind = match (raw.kind, raw.flux_per_plaquette, raw.delta) {
            (KindTag::Landau, Some(phi), None) => ModelKind::Landau {
                flux_per_plaquette: phi,
            },
            (KindTag::Staggered, None, Some(delta)) => ModelKind::Staggered { delta },
            (KindTag::Landau, _, _) => {
                return Err("landau model needs `flux_per_plaquette` and no `delta`".into())
            }
            (KindTag::Staggered, _, _) => {
                return Err("staggered model needs `delta` and no `flux_per_plaquette`".into())
            }
        };
        if !(raw.spacing > 0.0) || !(raw.disorder_fraction >= 0.0) {
            return Err("spacing must be positive and disorder_fraction non-negative".into());
        }
        Ok(Self {
            kind,
            spacing: raw.spacing,
            disorder_fraction: raw.disorder_fraction,
            seed: raw.seed,
            twist: raw.twist,
            gauge: raw.gauge,
        })
    }
}

impl From<ModelSpec> for RawModelSpec {
    fn from(m: ModelSpec) -> Self {
        let (kind, flux_per_plaquette, delta) = match m.kind {
            ModelKind::Landau { flux_per_plaquette } => {
                (KindTag::Landau, Some(flux_per_plaquette), None)
            }
            ModelKind::Staggered { delta } => (KindTag::Staggered, None, Some(delta)),
        };
        Self {
            kind,
            flux_per_plaquette,
            delta,
            spacing: m.spacing,
            disorder_fraction: m.disorder_fraction,
            seed: m.seed,
            twist: m.twist,
            gauge: m.gauge,
        }
    }
}

impl ModelSpec {
    pub fn landau(flux_per_plaquette: f64) -> Self {
        Self {
            kind: ModelKind::Landau { flux_per_plaquette },
            spacing: 1.0,
            disorder_fraction: 0.0,
            seed: 0,
            twist: [0.0, 0.0],
            gauge: Gauge::LandauX,
        }
    }

    pub fn staggered(delta: f64) -> Self {
        Self {
            kind: ModelKind::Staggered { delta },
            ..Self::landau(0.0)
        }
    }

    pub fn with_disorder(mut self, fraction: f64, seed: u64) -> Self {
        self.disorder_fraction = fraction;
        self.seed = seed;
        self
    }

    pub fn with_twist(mut self, twist: [f64; 2]) -> Self {
        self.twist = twist;
        self
    }

    /// Rank of the model's band on `n` sites.
    pub fn band_rank(&self, n: usize) -> Result<usize> {
        let rank = match self.kind {
            ModelKind::Landau { flux_per_plaquette } => flux_per_plaquette * n as f64,
            ModelKind::Staggered { .. } => 0.5 * n as f64,
        };
        if (rank - rank.round()).abs() > 1e-9 || rank < 0.5 {
            return Err(Error::InvalidArgument(format!(
                "band rank {rank} on {n} sites is not a positive integer"
            )));
        }
        Ok(rank.round() as usize)
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    /// Magnetic field of the model (zero for the staggered model).
    pub fn field(&self) -> FieldConfig {
        let phi = match self.kind {
            ModelKind::Landau { flux_per_plaquette } => flux_per_plaquette,
            ModelKind::Staggered { .. } => 0.0,
        };
        FieldConfig::from_flux_per_plaquette(phi, self.spacing)
            .with_gauge(self.gauge)
            .with_twist(self.twist)
    }

    /// Clean Hamiltonian on `geometry`, without disorder.
    pub fn hamiltonian(&self, geometry: &Arc<PointGeometry>) -> Result<HermitianOperator> {
        let h = build_magnetic_hamiltonian(geometry, &self.field())?;
        match self.kind {
            ModelKind::Landau { .. } => Ok(h),
            ModelKind::Staggered { delta } => {
                let onsite: Vec<f64> = (0..geometry.len())
                    .map(|s| {
                        let (ix, iy) = geometry.lattice_coords(s);
                        if (ix + iy) % 2 == 0 {
                            -delta
                        } else {
                            delta
                        }
                    })
                    .collect();
                h.plus_scaled(&diagonal_operator(geometry, &onsite)?, 1.0)
            }
        }
    }

    /// Builds the model on an `L × L` torus and isolates its band.
    pub fn build(&self, extent: f64) -> Result<BuiltModel> {
        let geometry = Arc::new(PointGeometry::lattice(
            self.spacing,
            extent,
            Boundary::Periodic,
        )?);
        let rank = self.band_rank(geometry.len())?;
        let clean = self.hamiltonian(&geometry)?;
        let clean_ev = eigenvalues(&clean)?;
        let clean_gap = clean_ev[rank] - clean_ev[rank - 1];
        if !(clean_gap > 1e-8) {
            return Err(Error::InvalidArgument(format!(
                "no gap above the lowest {rank} states (gap {clean_gap:.3e})"
            )));
        }
        let disorder = DisorderConfig {
            strength: self.disorder_fraction * clean_gap,
            seed: self.seed,
        };
        let hamiltonian = if disorder.strength > 0.0 {
            clean.plus_scaled(&build_disorder_potential(&geometry, &disorder)?, 1.0)?
        } else {
            clean
        };
        let spectral = eigendecompose(&hamiltonian)?;
        let gap_threshold = 0.2 * clean_gap;
        let ev = spectral.eigenvalues();
        let window = window_from_bounds(ev, ev[0], ev[rank - 1])?;
        if window.rank != rank || window.gap_above < gap_threshold {
            return Err(Error::GapClosure {
                t: 1.0,
                rank_before: rank,
                rank_after: window.rank,
            });
        }
        let projection = band_projection(&spectral, &window)?;
        Ok(BuiltModel {
            geometry,
            hamiltonian,
            clean_gap,
            disorder,
            gap_threshold,
            spectral,
            window,
            projection,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub geometry: Arc<PointGeometry>,
    pub hamiltonian: HermitianOperator,
    /// Gap above the band before disorder.
    pub clean_gap: f64,
    pub disorder: DisorderConfig,
    pub gap_threshold: f64,
    pub spectral: SpectralData,
    pub window: BandWindow,
    pub projection: Projection,
}
