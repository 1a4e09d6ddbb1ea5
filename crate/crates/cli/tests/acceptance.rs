//! Acceptance suite: runs the shipped scenario configs and prints one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//!
//! Outputs go to a temporary directory unless `WANNIER_LAB_OUTPUT_ROOT` is set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use wannier_lab_cli::{output_root, read_config, run_experiment, RunManifest, OUTPUT_ROOT_VAR};

struct Runner {
    configs: PathBuf,
    root: PathBuf,
    runs: BTreeMap<String, (RunManifest, PathBuf, f64)>,
}

impl Runner {
    fn run_into(&self, name: &str, root: &Path) -> Result<(RunManifest, PathBuf, f64), String> {
        let validated =
            read_config(&self.configs.join(format!("{name}.toml"))).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let manifest = run_experiment(&validated, root).map_err(|e| e.to_string())?;
        let dir = root.join(validated.config.output_dir());
        Ok((manifest, dir, start.elapsed().as_secs_f64()))
    }

    fn run(&mut self, name: &str) -> Result<&(RunManifest, PathBuf, f64), String> {
        if !self.runs.contains_key(name) {
            let out = self.run_into(name, &self.root.clone())?;
            self.runs.insert(name.to_owned(), out);
        }
        Ok(&self.runs[name])
    }
}

struct Criterion {
    passed: bool,
    detail: String,
}

/// All named assertions must be present and pass.
fn require(manifest: &RunManifest, names: &[&str]) -> Criterion {
    let mut passed = manifest.errors.is_empty();
    let mut parts = Vec::new();
    for name in names {
        match manifest.assertion(name) {
            Some(a) => {
                passed &= a.passed;
                parts.push(format!(
                    "{}{}: {}",
                    if a.passed { "" } else { "FAILED " },
                    a.name,
                    a.detail
                ));
            }
            None => {
                passed = false;
                parts.push(format!("missing {name}"));
            }
        }
    }
    for e in &manifest.errors {
        parts.push(format!("error in stage {}: {}", e.stage, e.message));
    }
    Criterion {
        passed,
        detail: parts.join("; "),
    }
}

fn combine(items: Vec<Criterion>) -> Criterion {
    Criterion {
        passed: items.iter().all(|c| c.passed),
        detail: items
            .into_iter()
            .map(|c| c.detail)
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

fn csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    r.records().map(|x| x.map_err(|e| e.to_string())).collect()
}

fn landau_spectrum(r: &mut Runner) -> Result<Criterion, String> {
    let (m, dir, secs) = r.run("spectrum_landau")?;
    let checks = require(
        m,
        &[
            "landau_cluster_0",
            "landau_cluster_1",
            "landau_cluster_2",
            "lowest_cluster_rank",
        ],
    );
    // literal targets 1, 3, 5 as well as (2n+1)b
    let rows = csv_rows(&dir.join("clusters.csv"))?;
    let mut literal = true;
    let mut centers = Vec::new();
    for (n, row) in rows.iter().take(3).enumerate() {
        let c: f64 = row[3].parse().map_err(|_| "bad center")?;
        literal &= ((c - (2 * n + 1) as f64) / (2 * n + 1) as f64).abs() <= 0.03;
        centers.push(format!("{c:.4}"));
    }
    let fast = *secs <= 120.0;
    Ok(Criterion {
        passed: checks.passed && literal && rows.len() >= 3 && fast,
        detail: format!(
            "clusters at [{}], {:.1}s; {}",
            centers.join(", "),
            secs,
            checks.detail
        ),
    })
}

fn determinism(r: &mut Runner, names: &[&str]) -> Result<Criterion, String> {
    let second = r.root.join("second_run");
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for name in names {
        let first_dir = r.run(name)?.1.clone();
        let first_files = r.runs[*name].0.files.clone();
        let (m2, dir2, _) = r.run_into(name, &second)?;
        let csvs: Vec<_> = first_files
            .iter()
            .filter(|f| f.path.ends_with(".csv"))
            .collect();
        if csvs.len() != m2.files.iter().filter(|f| f.path.ends_with(".csv")).count() {
            mismatched.push(format!("{name}: file lists differ"));
        }
        for f in csvs {
            let a = std::fs::read(first_dir.join(&f.path)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dir2.join(&f.path)).map_err(|e| e.to_string())?;
            compared += 1;
            if a != b {
                mismatched.push(format!("{name}/{}", f.path));
            }
        }
    }
    Ok(Criterion {
        passed: mismatched.is_empty() && compared > 0,
        detail: if mismatched.is_empty() {
            format!(
                "{compared} CSVs from {} scenarios identical across two runs",
                names.len()
            )
        } else {
            format!("differ: {}", mismatched.join(", "))
        },
    })
}

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = if std::env::var_os(OUTPUT_ROOT_VAR).is_some() {
        output_root().join("acceptance")
    } else {
        tmp.path().to_owned()
    };
    let mut r = Runner {
        configs: Path::new(env!("CARGO_MANIFEST_DIR")).join("configs"),
        root,
        runs: BTreeMap::new(),
    };

    type Check = fn(&mut Runner) -> Result<Criterion, String>;
    let criteria: [(u32, &str, Check); 11] = [
        (1, "Landau spectrum", landau_spectrum),
        (2, "gap persistence under disorder", |r| {
            Ok(require(
                &r.run("gaps")?.0,
                &["eigenvalue_shift_within_sup_v", "band_rank_unchanged"],
            ))
        }),
        (3, "index correctness", |r| {
            Ok(require(
                &r.run("index")?.0,
                &[
                    "berry_index",
                    "band_index",
                    "identity_projection_index",
                    "zero_projection_index",
                ],
            ))
        }),
        (4, "homotopy constancy", |r| {
            Ok(require(
                &r.run("homotopy")?.0,
                &["rank_constant", "index_constant", "gap_open"],
            ))
        }),
        (5, "compact families have zero index", |r| {
            let (m, dir, _) = r.run("split_test")?;
            let families = csv_rows(&dir.join("split.csv"))?.len();
            let c = require(
                m,
                &["compact_family_index_vanishes", "half_plane_split_exact"],
            );
            Ok(Criterion {
                passed: c.passed && families == 20,
                detail: format!("{families} families; {}", c.detail),
            })
        }),
        (6, "compact-basis propagation within packing radius", |r| {
            let m = &r.run("split_test")?.0;
            let literal = require(m, &["propagation_within_packing_radius"]);
            let twice = require(m, &["propagation_below_twice_packing_radius"]);
            Ok(Criterion {
                passed: literal.passed,
                detail: format!("{}; for reference {}", literal.detail, twice.detail),
            })
        }),
        (7, "tail bounds and truncation chain", |r| {
            Ok(require(
                &r.run("bounds")?.0,
                &[
                    "tail_margins_mu_3",
                    "tail_margins_mu_4",
                    "tail_margins_mu_6",
                    "growth_exponent_mu_3",
                    "truncation_bound",
                    "truncation_converges",
                ],
            ))
        }),
        (8, "localization dichotomy", |r| {
            let (m, _, secs) = r.run("dichotomy")?;
            let c = require(
                m,
                &[
                    "verdict_staggered",
                    "verdict_landau",
                    "verdict_landau_disordered",
                ],
            );
            Ok(Criterion {
                passed: c.passed && *secs <= 900.0,
                detail: format!("{secs:.1}s; {}", c.detail),
            })
        }),
        (9, "partial isometry", |r| {
            let trivial = require(
                &r.run("wannier")?.0,
                &["wannierization_outcome", "partial_isometry"],
            );
            let landau = require(&r.run("wannier_landau")?.0, &["partial_isometry"]);
            Ok(combine(vec![trivial, landau]))
        }),
        (10, "Dirac structure", |r| {
            let free = require(
                &r.run("spectrum_dirac_free")?.0,
                &["dirac_spectrum_symmetric"],
            );
            let field = require(
                &r.run("spectrum_dirac")?.0,
                &[
                    "zero_modes_aa_star",
                    "zero_modes_a_star_a",
                    "block_nonzero_spectra_agree",
                ],
            );
            Ok(combine(vec![free, field]))
        }),
        (11, "determinism", |r| {
            determinism(
                r,
                &[
                    "spectrum_dirac_free",
                    "gaps",
                    "index",
                    "homotopy",
                    "bounds",
                    "wannier",
                    "dichotomy",
                    "split_test",
                ],
            )
        }),
    ];

    let mut failed = 0;
    for (id, title, check) in criteria {
        let start = Instant::now();
        let c = check(&mut r).unwrap_or_else(|e| Criterion {
            passed: false,
            detail: format!("could not run: {e}"),
        });
        if !c.passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {title} ({:.1}s): {}",
            if c.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            c.detail
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
