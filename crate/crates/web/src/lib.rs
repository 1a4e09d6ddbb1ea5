//! WebAssembly bindings for the demo page in `www/`. Every export takes
//! plain numbers and returns either a float array or a JSON string.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use wannier_lab::geometry::{Boundary, PointGeometry};
use wannier_lab::index::{real_space_chern, ConePartition};
use wannier_lab::model::ModelSpec;
use wannier_lab::operator::{build_magnetic_hamiltonian, FieldConfig};
use wannier_lab::spectral::eigenvalues;
use wannier_lab::wannier::{
    build_bump_set, localization_fit, lowdin_wannierize, GammaPolicy, DEFAULT_GRAM_FLOOR,
};

const MAX_SIDE: u32 = 24;

fn check_side(side: u32) -> Result<f64, JsError> {
    if !(4..=MAX_SIDE).contains(&side) {
        return Err(JsError::new(&format!(
            "side must be between 4 and {MAX_SIDE}"
        )));
    }
    Ok(side as f64)
}

fn js(e: wannier_lab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Eigenvalues of the magnetic Laplacian on a `side × side` torus threaded
/// by `flux_quanta` flux quanta, in units where the spacing is 1.
#[wasm_bindgen]
pub fn landau_levels(side: u32, flux_quanta: u32) -> Result<Vec<f64>, JsError> {
    let l = check_side(side)?;
    let g = Arc::new(PointGeometry::lattice(1.0, l, Boundary::Periodic).map_err(js)?);
    let field = FieldConfig::from_flux_quanta(flux_quanta as f64, l);
    let h = build_magnetic_hamiltonian(&g, &field).map_err(js)?;
    eigenvalues(&h).map_err(js)
}

#[derive(Serialize)]
struct IndexSummary {
    index: f64,
    error: f64,
    rank: usize,
    gap: f64,
    disorder: f64,
}

/// Real-space Chern index of the lowest band at flux `1/q` per plaquette,
/// with uniform disorder of amplitude `disorder × clean gap`.
#[wasm_bindgen]
pub fn chern_index(side: u32, q: u32, disorder: f64, seed: u32) -> Result<String, JsError> {
    let l = check_side(side)?;
    if q < 2 {
        return Err(JsError::new("q must be at least 2"));
    }
    let built = ModelSpec::landau(1.0 / q as f64)
        .with_disorder(disorder, seed as u64)
        .build(l)
        .map_err(js)?;
    let r = real_space_chern(&built.projection, &ConePartition::centered(&built.geometry))
        .map_err(js)?;
    let summary = IndexSummary {
        index: r.value,
        error: r.error_estimate,
        rank: built.projection.rank(),
        gap: built.window.gap_above,
        disorder: built.disorder.strength,
    };
    Ok(serde_json::to_string(&summary).expect("plain struct"))
}

#[derive(Serialize)]
struct DecaySummary {
    succeeded: bool,
    gram_min: f64,
    gram_max: f64,
    mu: Vec<f64>,
    c_mu: Vec<f64>,
    /// `(distance, max |w(x)|)` for the first Wannier function.
    profile: Vec<(f64, f64)>,
}

/// Lowdin Wannier attempt for `"staggered"` (trivial band) or `"landau"`
/// (lowest band at flux 1/8) and the decay of the first function.
#[wasm_bindgen]
pub fn wannier_decay(side: u32, model: &str) -> Result<String, JsError> {
    let l = check_side(side)?;
    let (spec, policy) = match model {
        "staggered" => (
            ModelSpec::staggered(1.0),
            GammaPolicy::Checkerboard { parity: 0 },
        ),
        "landau" => (
            ModelSpec::landau(0.125).with_twist([std::f64::consts::PI; 2]),
            GammaPolicy::Auto,
        ),
        other => return Err(JsError::new(&format!("unknown model {other:?}"))),
    };
    let built = spec.build(l).map_err(js)?;
    let centers = policy
        .centers(&built.geometry, built.projection.rank())
        .map_err(js)?;
    let rho = 0.5 * centers.packing_radius().min(built.geometry.spacing());
    let bumps = build_bump_set(&built.geometry, &centers, rho).map_err(js)?;
    let set = lowdin_wannierize(&built.projection, &bumps, DEFAULT_GRAM_FLOOR).map_err(js)?;
    let mu = vec![1.0, 2.0, 3.0, 4.0, 6.0];
    let (c_mu, profile) = if set.succeeded() {
        let loc = localization_fit(&set, &mu).map_err(js)?;
        let profile = loc
            .profiles
            .first()
            .map(|p| p.bins.clone())
            .unwrap_or_default();
        (loc.c_mu, profile)
    } else {
        (Vec::new(), Vec::new())
    };
    let summary = DecaySummary {
        succeeded: set.succeeded(),
        gram_min: set.gram_min,
        gram_max: set.gram_max,
        mu,
        c_mu,
        profile,
    };
    Ok(serde_json::to_string(&summary).expect("plain struct"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_count_sites() {
        let ev = landau_levels(8, 8).unwrap();
        assert_eq!(ev.len(), 64);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn index_json_has_unit_index() {
        let text = chern_index(16, 8, 0.0, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["index"].as_f64().unwrap() - 1.0).abs() < 0.05, "{text}");
        assert_eq!(v["rank"], 32);
    }

    #[test]
    fn trivial_band_decays() {
        let v: serde_json::Value =
            serde_json::from_str(&wannier_decay(8, "staggered").unwrap()).unwrap();
        assert_eq!(v["succeeded"], true);
        assert!(!v["profile"].as_array().unwrap().is_empty());
    }
}
