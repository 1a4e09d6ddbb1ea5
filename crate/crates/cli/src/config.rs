//! TOML experiment configuration.
//!
//! Every table rejects unknown keys, so a typo fails validation with the key
//! and its line instead of silently falling back to a default.

use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wannier_lab::geometry::{Boundary, PointGeometry};
use wannier_lab::model::{ModelKind, ModelSpec};
use wannier_lab::operator::Gauge;
use wannier_lab::wannier::{GammaPolicy, Verdict, DEFAULT_GRAM_FLOOR};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Spectrum,
    Gaps,
    Index,
    Homotopy,
    Bounds,
    Wannier,
    Dichotomy,
    SplitTest,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Spectrum,
        Scenario::Gaps,
        Scenario::Index,
        Scenario::Homotopy,
        Scenario::Bounds,
        Scenario::Wannier,
        Scenario::Dichotomy,
        Scenario::SplitTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::Gaps => "gaps",
            Scenario::Index => "index",
            Scenario::Homotopy => "homotopy",
            Scenario::Bounds => "bounds",
            Scenario::Wannier => "wannier",
            Scenario::Dichotomy => "dichotomy",
            Scenario::SplitTest => "split_test",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::Spectrum => "eigenvalues of the magnetic Laplacian or lattice Dirac operator; Landau levels, zero modes",
            Scenario::Gaps => "clean vs disordered spectrum; eigenvalue shifts bounded by sup|V|, band rank kept",
            Scenario::Index => "real-space Chern index of the lowest band, Bloch-space oracle, trivial projections",
            Scenario::Homotopy => "gap and index along H + tV for t in [0, 1]",
            Scenario::Bounds => "certified tail-sum constants and the truncation estimate for a Wannier family",
            Scenario::Wannier => "Lowdin Wannier attempt, decay constants, partial isometry check",
            Scenario::Dichotomy => "Wannier attempts across a size ladder with a stable/degrading verdict",
            Scenario::SplitTest => "random compactly supported families: index, half-plane split, propagation",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[default]
    Schrodinger,
    Dirac,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default = "sixteen")]
    pub extent: f64,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            extent: 16.0,
            boundary: Boundary::Periodic,
        }
    }
}

/// Exactly one of `b`, `flux_per_plaquette`, `flux_quanta`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_per_plaquette: Option<f64>,
    /// Total flux through the sample; fixes `b` per system size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_quanta: Option<f64>,
    #[serde(default)]
    pub gauge: Gauge,
    #[serde(default)]
    pub twist: [f64; 2],
}

impl FieldSpec {
    fn flux_per_plaquette_at(&self, spacing: f64, extent: f64) -> Result<f64, String> {
        match (self.b, self.flux_per_plaquette, self.flux_quanta) {
            (Some(b), None, None) => Ok(b * spacing * spacing / TAU),
            (None, Some(phi), None) => Ok(phi),
            (None, None, Some(q)) => {
                let n = extent / spacing;
                Ok(q / (n * n))
            }
            _ => Err("field: give exactly one of `b`, `flux_per_plaquette`, `flux_quanta`".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// On-site `−Δ` on even and `+Δ` on odd sites.
    pub staggered: f64,
}

/// Exactly one of `strength` (absolute `W`) and `relative_to_gap`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_to_gap: Option<f64>,
    /// Defaults to the top-level seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumOptions {
    /// Landau clusters compared with `(2n+1)b`.
    #[serde(default = "three")]
    pub clusters: usize,
    #[serde(default = "default_cluster_tolerance")]
    pub cluster_tolerance: f64,
    #[serde(default = "default_symmetry_tolerance")]
    pub symmetry_tolerance: f64,
    #[serde(default = "three_f")]
    pub zero_mode_tolerance: f64,
    #[serde(default = "default_block_tolerance")]
    pub block_tolerance: f64,
    #[serde(default)]
    pub write_operator: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            clusters: 3,
            cluster_tolerance: default_cluster_tolerance(),
            symmetry_tolerance: default_symmetry_tolerance(),
            zero_mode_tolerance: 3.0,
            block_tolerance: default_block_tolerance(),
            write_operator: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapsOptions {
    #[serde(default = "default_symmetry_tolerance")]
    pub weyl_tolerance: f64,
}

impl Default for GapsOptions {
    fn default() -> Self {
        Self {
            weyl_tolerance: default_symmetry_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerrySpec {
    /// `[p, q]`: flux `p/q` per plaquette.
    pub flux: [i64; 2],
    /// Number of lowest bands summed.
    #[serde(default = "one_usize")]
    pub bands: usize,
    #[serde(default = "default_berry_grid")]
    pub grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<f64>,
    #[serde(default = "default_index_tolerance")]
    pub tolerance: f64,
    /// Identity and zero projections must give 0 within this.
    #[serde(default = "default_symmetry_tolerance")]
    pub trivial_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub berry: Option<BerrySpec>,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            expect: None,
            tolerance: default_index_tolerance(),
            trivial_tolerance: default_symmetry_tolerance(),
            berry: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyOptions {
    #[serde(default = "ten")]
    pub steps: usize,
    #[serde(default = "default_index_tolerance")]
    pub tolerance: f64,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        Self {
            steps: 10,
            tolerance: default_index_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsOptions {
    #[serde(default = "default_bounds_mu")]
    pub mu: Vec<f64>,
    /// Radii for the tail sums.
    #[serde(default = "default_tail_radii")]
    pub radii: Vec<f64>,
    /// Expected growth exponent, checked when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default = "four")]
    pub truncation_mu: f64,
    #[serde(default = "default_truncation_radii")]
    pub truncation_radii: Vec<f64>,
    #[serde(default = "default_gram_floor")]
    pub gram_floor: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            mu: default_bounds_mu(),
            radii: default_tail_radii(),
            nu: None,
            truncation_mu: 4.0,
            truncation_radii: default_truncation_radii(),
            gram_floor: DEFAULT_GRAM_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WannierOptions {
    #[serde(default = "default_wannier_mu")]
    pub mu: Vec<f64>,
    #[serde(default = "default_isometry_tolerance")]
    pub isometry_tolerance: f64,
    #[serde(default = "default_gram_floor")]
    pub gram_floor: f64,
    /// Lowest acceptable smallest Gram eigenvalue, checked when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gram: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_success: Option<bool>,
    #[serde(default = "default_index_tolerance")]
    pub index_tolerance: f64,
    /// Gram eigenvalue from which the family counts as well conditioned
    /// and the band index must vanish.
    #[serde(default = "half")]
    pub localized_gram: f64,
}

impl Default for WannierOptions {
    fn default() -> Self {
        Self {
            mu: default_wannier_mu(),
            isometry_tolerance: default_isometry_tolerance(),
            gram_floor: DEFAULT_GRAM_FLOOR,
            min_gram: None,
            expect_success: None,
            index_tolerance: default_index_tolerance(),
            localized_gram: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomySection {
    #[serde(default = "four")]
    pub mu_ref: f64,
    #[serde(default = "half")]
    pub gram_factor: f64,
    #[serde(default = "two")]
    pub c_mu_factor: f64,
    #[serde(default = "default_gram_floor")]
    pub gram_floor: f64,
}

impl Default for DichotomySection {
    fn default() -> Self {
        Self {
            mu_ref: 4.0,
            gram_factor: 0.5,
            c_mu_factor: 2.0,
            gram_floor: DEFAULT_GRAM_FLOOR,
        }
    }
}

impl DichotomySection {
    pub fn options(&self) -> wannier_lab::wannier::DichotomyOptions {
        wannier_lab::wannier::DichotomyOptions {
            mu_ref: self.mu_ref,
            gram_factor: self.gram_factor,
            c_mu_factor: self.c_mu_factor,
            gram_floor: self.gram_floor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitOptions {
    #[serde(default = "twenty")]
    pub families: usize,
    #[serde(default = "three_f")]
    pub min_separation: f64,
    #[serde(default = "default_index_tolerance")]
    pub tolerance: f64,
    /// Bump radii, as fractions of the packing radius, for the bump-set
    /// propagation check.
    #[serde(default = "default_bump_fractions")]
    pub bump_fractions: Vec<f64>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            families: 20,
            min_separation: 3.0,
            tolerance: default_index_tolerance(),
            bump_fractions: default_bump_fractions(),
        }
    }
}

/// One model in a dichotomy run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSpec>,
    #[serde(default)]
    pub gamma: GammaPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    /// Relative to the output root; defaults to the scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSpec>,
    #[serde(default)]
    pub operator: OperatorKind,
    /// Relative threshold for measured propagation.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub gamma: GammaPolicy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub gaps: GapsOptions,
    #[serde(default)]
    pub index: IndexOptions,
    #[serde(default)]
    pub homotopy: HomotopyOptions,
    #[serde(default)]
    pub bounds: BoundsOptions,
    #[serde(default)]
    pub wannier: WannierOptions,
    #[serde(default)]
    pub dichotomy: DichotomySection,
    #[serde(default)]
    pub split: SplitOptions,
}

/// Validated config plus non-fatal findings.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

/// A lattice model as described by `field` / `potential` / `disorder`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec<'a> {
    pub spacing: f64,
    pub field: Option<&'a FieldSpec>,
    pub potential: Option<&'a PotentialSpec>,
    pub disorder: Option<&'a DisorderSpec>,
    pub seed: u64,
}

impl SystemSpec<'_> {
    /// Model at system size `extent`, without disorder if it is absolute.
    pub fn model(&self, extent: f64) -> Result<ModelSpec, String> {
        let kind = match (self.field, self.potential) {
            (Some(f), None) => ModelKind::Landau {
                flux_per_plaquette: f.flux_per_plaquette_at(self.spacing, extent)?,
            },
            (None, Some(p)) => ModelKind::Staggered { delta: p.staggered },
            (Some(_), Some(_)) => return Err("give either `field` or `potential`, not both".into()),
            (None, None) => return Err("missing `field` or `potential`".into()),
        };
        let (gauge, twist) = self
            .field
            .map_or((Gauge::LandauX, [0.0, 0.0]), |f| (f.gauge, f.twist));
        let fraction = self.disorder.and_then(|d| d.relative_to_gap).unwrap_or(0.0);
        let seed = self.disorder.and_then(|d| d.seed).unwrap_or(self.seed);
        let mut model = match kind {
            ModelKind::Landau { flux_per_plaquette } => ModelSpec::landau(flux_per_plaquette),
            ModelKind::Staggered { delta } => ModelSpec::staggered(delta),
        }
        .with_gauge(gauge)
        .with_twist(twist)
        .with_disorder(fraction, seed);
        model.spacing = self.spacing;
        Ok(model)
    }

    fn check(
        &self,
        extents: &[f64],
        boundary: Boundary,
        needs_relative: bool,
    ) -> Result<(), String> {
        if let Some(d) = self.disorder {
            match (d.strength, d.relative_to_gap) {
                (Some(w), None) if w >= 0.0 && !needs_relative => {}
                (Some(_), None) if needs_relative => {
                    return Err(
                        "disorder: this scenario needs `relative_to_gap`, not `strength`".into(),
                    )
                }
                (None, Some(f)) if f >= 0.0 => {}
                (Some(_), Some(_)) | (None, None) => {
                    return Err(
                        "disorder: give exactly one of `strength`, `relative_to_gap`".into(),
                    )
                }
                _ => return Err("disorder: strength must be non-negative".into()),
            }
        }
        for &extent in extents {
            let geometry = PointGeometry::lattice(self.spacing, extent, boundary)
                .map_err(|e| e.to_string())?;
            let model = self.model(extent)?;
            model
                .field()
                .validate(&geometry)
                .map_err(|e| format!("L = {extent}: {e}"))?;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn system(&self) -> SystemSpec<'_> {
        SystemSpec {
            spacing: self.geometry.spacing,
            field: self.field.as_ref(),
            potential: self.potential.as_ref(),
            disorder: self.disorder.as_ref(),
            seed: self.seed,
        }
    }

    pub fn variant_system<'a>(&'a self, v: &'a Variant) -> SystemSpec<'a> {
        SystemSpec {
            spacing: self.geometry.spacing,
            field: v.field.as_ref(),
            potential: v.potential.as_ref(),
            disorder: v.disorder.as_ref(),
            seed: self.seed,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(self.scenario.name()))
    }

    /// Normalized TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses and validates a config before any computation.
pub fn validate_config(text: &str) -> Result<Validated, CliError> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut warnings = Vec::new();
    let invalid = |msg: String| CliError::Config(msg);
    let g = &config.geometry;
    if config.scenario != Scenario::Dichotomy {
        PointGeometry::lattice(g.spacing, g.extent, g.boundary)
            .map_err(|e| invalid(format!("geometry: {e}")))?;
    }
    if !(config.epsilon >= 0.0 && config.epsilon < 1.0) {
        return Err(invalid(format!(
            "epsilon must lie in [0, 1), got {}",
            config.epsilon
        )));
    }
    let system = config.system();
    let extent = [g.extent];
    match config.scenario {
        Scenario::Spectrum => {
            if config.operator == OperatorKind::Dirac {
                if config.potential.is_some() || config.disorder.is_some() {
                    return Err(invalid("dirac spectrum takes a field only".into()));
                }
                if config.field.is_none() {
                    return Err(invalid("dirac spectrum needs `field`".into()));
                }
            }
            system.check(&extent, g.boundary, false).map_err(invalid)?;
        }
        Scenario::Gaps => {
            if config.disorder.is_none() {
                return Err(invalid("gaps needs a `disorder` table".into()));
            }
            system.check(&extent, g.boundary, false).map_err(invalid)?;
        }
        Scenario::Index | Scenario::Homotopy | Scenario::Bounds | Scenario::Wannier => {
            if g.boundary != Boundary::Periodic {
                return Err(invalid(format!(
                    "{} runs on a periodic geometry",
                    config.scenario
                )));
            }
            system.check(&extent, g.boundary, true).map_err(invalid)?;
            if config.scenario == Scenario::Homotopy && config.disorder.is_none() {
                return Err(invalid("homotopy needs a `disorder` table".into()));
            }
        }
        Scenario::Dichotomy => {
            if config.ladder.len() < 3 {
                return Err(invalid(
                    "dichotomy needs a `ladder` of at least 3 sizes".into(),
                ));
            }
            if config.variants.is_empty() {
                return Err(invalid(
                    "dichotomy needs at least one `[[variants]]` entry".into(),
                ));
            }
            for v in &config.variants {
                if v.field.as_ref().is_some_and(|f| f.flux_quanta.is_some()) {
                    return Err(invalid(format!(
                        "variant {}: `flux_quanta` changes the field along the ladder; use `flux_per_plaquette`",
                        v.name
                    )));
                }
                config
                    .variant_system(v)
                    .check(&config.ladder, Boundary::Periodic, true)
                    .map_err(|e| invalid(format!("variant {}: {e}", v.name)))?;
            }
        }
        Scenario::SplitTest => {
            if !(config.split.min_separation > 0.0) || config.split.families == 0 {
                return Err(invalid(
                    "split: need families ≥ 1 and min_separation > 0".into(),
                ));
            }
            if config
                .split
                .bump_fractions
                .iter()
                .any(|&f| !(f > 0.0 && f < 1.0))
            {
                return Err(invalid("split: bump_fractions must lie in (0, 1)".into()));
            }
        }
    }
    if let Some(w) = homotopy_strength_hint(&config) {
        warnings.push(w);
    }
    Ok(Validated { config, warnings })
}

/// Disorder at or above `b` breaks the hypothesis `sup|V| < b` under which
/// the Landau band is known to stay gapped. Relative disorder is judged
/// against the continuum gap `2b`; the run re-checks with the measured gap.
fn homotopy_strength_hint(config: &ExperimentConfig) -> Option<String> {
    if config.scenario != Scenario::Homotopy {
        return None;
    }
    let field = config.field.as_ref()?;
    let disorder = config.disorder.as_ref()?;
    let phi = field
        .flux_per_plaquette_at(config.geometry.spacing, config.geometry.extent)
        .ok()?;
    let b = TAU * phi / (config.geometry.spacing * config.geometry.spacing);
    let w = disorder
        .strength
        .or(disorder.relative_to_gap.map(|f| 2.0 * b * f))?;
    strength_warning(w, b)
}

pub fn strength_warning(w: f64, b: f64) -> Option<String> {
    (w >= b)
        .then(|| format!("hypothesis sup|V| < b violated (W = {w:.4}, b = {b:.4}); run proceeds"))
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> f64 {
    2.0
}
fn four() -> f64 {
    4.0
}
fn three_f() -> f64 {
    3.0
}
fn sixteen() -> f64 {
    16.0
}
fn one_usize() -> usize {
    1
}
fn three() -> usize {
    3
}
fn ten() -> usize {
    10
}
fn twenty() -> usize {
    20
}
fn periodic() -> Boundary {
    Boundary::Periodic
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_cluster_tolerance() -> f64 {
    0.03
}
fn default_symmetry_tolerance() -> f64 {
    1e-10
}
fn default_block_tolerance() -> f64 {
    0.05
}
fn default_index_tolerance() -> f64 {
    0.05
}
fn default_isometry_tolerance() -> f64 {
    1e-8
}
fn default_gram_floor() -> f64 {
    DEFAULT_GRAM_FLOOR
}
fn default_berry_grid() -> usize {
    24
}
fn default_bounds_mu() -> Vec<f64> {
    vec![3.0, 4.0, 6.0]
}
fn default_tail_radii() -> Vec<f64> {
    (0..=24).map(|k| 0.5 * k as f64).collect()
}
fn default_truncation_radii() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 4.0, 8.0, 12.0]
}
fn default_wannier_mu() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, 6.0]
}
fn default_bump_fractions() -> Vec<f64> {
    vec![0.45, 0.9]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spectrum_config_gets_defaults() {
        let v = validate_config("scenario = \"spectrum\"\n[field]\nflux_per_plaquette = 0.125\n")
            .unwrap();
        assert_eq!(v.config.geometry.boundary, Boundary::Periodic);
        assert_eq!(v.config.epsilon, 1e-6);
        assert_eq!(v.config.output_dir(), PathBuf::from("spectrum"));
        let again = validate_config(&v.config.to_toml()).unwrap();
        assert_eq!(again.config, v.config);
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = validate_config("scenario = \"spectrum\"\n[field]\nfluxx = 0.125\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fluxx"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_scenario_rejected() {
        let err = validate_config("scenario = \"banana\"\n").unwrap_err();
        assert!(err.to_string().contains("banana"));
    }

    #[test]
    fn non_integer_flux_rejected() {
        let err = validate_config(
            "scenario = \"spectrum\"\n[geometry]\nspacing = 0.25\n[field]\nb = 1.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("not an integer"), "{err}");
    }

    #[test]
    fn non_integer_extent_rejected() {
        let err = validate_config(
            "scenario = \"spectrum\"\n[geometry]\nextent = 7.5\n[field]\nb = 0.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("multiple"), "{err}");
    }

    #[test]
    fn strong_homotopy_disorder_warns() {
        let text = "scenario = \"homotopy\"\n[field]\nflux_per_plaquette = 0.125\n[disorder]\nrelative_to_gap = 0.7\n";
        let v = validate_config(text).unwrap();
        assert_eq!(v.warnings.len(), 1);
        assert!(v.warnings[0].contains("sup|V| < b"));
        let weak = text.replace("0.7", "0.3");
        assert!(validate_config(&weak).unwrap().warnings.is_empty());
    }

    #[test]
    fn field_needs_exactly_one_strength() {
        let err = validate_config("scenario = \"spectrum\"\n[field]\nb = 1.0\nflux_quanta = 2.0\n")
            .unwrap_err();
        assert!(err.to_string().contains("exactly one"));
    }

    #[test]
    fn dichotomy_rejects_size_dependent_field() {
        let text = "scenario = \"dichotomy\"\nladder = [8, 12, 16]\n[[variants]]\nname = \"x\"\n[variants.field]\nflux_quanta = 8\n";
        assert!(validate_config(text).is_err());
    }
}
