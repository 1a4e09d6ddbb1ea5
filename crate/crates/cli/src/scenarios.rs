use std::f64::consts::TAU;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wannier_lab::export;
use wannier_lab::geometry::{CenterSet, PointGeometry};
use wannier_lab::index::{
    berry_chern, real_space_chern, split_index_test, supports_berry_oracle, BlochModel,
    CompactBasis, ConePartition, HalfPlaneCut, IndexResult,
};
use wannier_lab::model::{BuiltModel, ModelSpec};
use wannier_lab::operator::{
    build_disorder_potential, build_lattice_dirac, measure_propagation, DisorderConfig,
    HermitianOperator,
};
use wannier_lab::spectral::{
    chiral_square_blocks, detect_gaps, eigenvalues, homotopy_scan, Projection,
};
use wannier_lab::wannier::{
    build_bump_set, build_v_operator, certify_for_truncation, check_partial_isometry,
    dichotomy_experiment, localization_fit, lowdin_wannierize, truncation_report, BumpSet,
    WannierCandidateSet,
};
use wannier_lab::Mat;

use crate::config::{strength_warning, OperatorKind, Scenario};
use crate::{CliError, Run};

pub(crate) fn run(run: &mut Run<'_>) {
    match run.config.scenario {
        Scenario::Spectrum => spectrum(run),
        Scenario::Gaps => gaps(run),
        Scenario::Index => index(run),
        Scenario::Homotopy => homotopy(run),
        Scenario::Bounds => bounds(run),
        Scenario::Wannier => wannier(run),
        Scenario::Dichotomy => dichotomy(run),
        Scenario::SplitTest => split_test(run),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn geometry(run: &Run<'_>) -> Result<Arc<PointGeometry>, CliError> {
    let g = &run.config.geometry;
    Ok(Arc::new(PointGeometry::lattice(
        g.spacing, g.extent, g.boundary,
    )?))
}

fn model(run: &Run<'_>) -> Result<ModelSpec, CliError> {
    run.config
        .system()
        .model(run.config.geometry.extent)
        .map_err(invalid)
}

fn build_model(run: &mut Run<'_>) -> Option<BuiltModel> {
    let spec = run.stage("model", |r| model(r))?;
    let extent = run.config.geometry.extent;
    let built = run.stage("eigensolve", |_| Ok(spec.build(extent)?))?;
    log::info!(
        "band rank {}, window [{:.6}, {:.6}], clean gap {:.6}, W = {:.6}",
        built.window.rank,
        built.window.lo,
        built.window.hi,
        built.clean_gap,
        built.disorder.strength
    );
    Some(built)
}

/// Absolute disorder from the config; `clean_gap` resolves the relative form.
fn disorder(run: &Run<'_>, clean_gap: impl FnOnce() -> f64) -> Option<DisorderConfig> {
    let d = run.config.disorder.as_ref()?;
    let strength = match (d.strength, d.relative_to_gap) {
        (Some(w), _) => w,
        (None, Some(f)) => f * clean_gap(),
        (None, None) => 0.0,
    };
    Some(DisorderConfig {
        strength,
        seed: d.seed.unwrap_or(run.config.seed),
    })
}

fn spectra_csv(out: &mut Vec<u8>, rows: &[(f64, Vec<f64>)]) -> wannier_lab::Result<()> {
    export::write_spectra(out, rows)
}

fn spectrum(run: &mut Run<'_>) {
    let Some(g) = run.stage("geometry", |r| geometry(r)) else {
        return;
    };
    let Some(spec) = run.stage("model", |r| model(r)) else {
        return;
    };
    run.stage("write_geometry", |r| {
        r.write("geometry.csv", |o| export::write_geometry(o, &g))
    });
    match run.config.operator {
        OperatorKind::Schrodinger => schrodinger_spectrum(run, &g, &spec),
        OperatorKind::Dirac => dirac_spectrum(run, &g, &spec),
    }
}

fn schrodinger_spectrum(run: &mut Run<'_>, g: &Arc<PointGeometry>, spec: &ModelSpec) {
    let Some(h) = run.stage("operator", |_| Ok(spec.hamiltonian(g)?)) else {
        return;
    };
    let clean_only = run.config.disorder.is_none();
    let Some(mut ev) = run.stage("eigensolve", |_| Ok(eigenvalues(&h)?)) else {
        return;
    };
    let mut op = h;
    if let Some(d) = disorder(run, || {
        let rank = spec.band_rank(g.len()).unwrap_or(1);
        ev[rank] - ev[rank - 1]
    }) {
        let Some(dirty) = run.stage("disorder", |_| {
            Ok(op.plus_scaled(&build_disorder_potential(g, &d)?, 1.0)?)
        }) else {
            return;
        };
        let Some(dirty_ev) = run.stage("eigensolve_disordered", |_| Ok(eigenvalues(&dirty)?))
        else {
            return;
        };
        op = dirty;
        ev = dirty_ev;
    }
    if run.config.spectrum.write_operator {
        run.stage("write_operator", |r| {
            r.write("operator.csv", |o| export::write_operator(o, &op))
        });
    }
    run.stage("write_spectrum", |r| {
        r.write("spectrum.csv", |o| spectra_csv(o, &[(0.0, ev.clone())]))
    });
    let b = spec.field().b;
    if !(clean_only && run.config.potential.is_none() && b > 0.0) {
        return;
    }
    // Landau clusters sit at (2n+1)b with gaps ≈ 2b; split at gaps ≥ b.
    let windows = detect_gaps(&ev, b);
    let opts = run.config.spectrum.clone();
    let mut rows = Vec::new();
    for (n, w) in windows.iter().take(opts.clusters).enumerate() {
        let center = ev[w.first..w.first + w.rank].iter().sum::<f64>() / w.rank as f64;
        let target = (2 * n + 1) as f64 * b;
        let rel = (center - target).abs() / target;
        run.check(
            &format!("landau_cluster_{n}"),
            rel <= opts.cluster_tolerance,
            format!(
                "center {center:.6} vs (2n+1)b = {target:.6}: relative {rel:.4} (tolerance {})",
                opts.cluster_tolerance
            ),
        );
        rows.push((n, w.lo, w.hi, center, w.rank, target));
    }
    if windows.len() < opts.clusters {
        run.check(
            "landau_cluster_count",
            false,
            format!(
                "{} clusters found, {} requested",
                windows.len(),
                opts.clusters
            ),
        );
    }
    let quanta = b * g.volume() / TAU;
    if let Some(w) = windows.first() {
        run.check(
            "lowest_cluster_rank",
            (quanta - quanta.round()).abs() < 1e-9 && w.rank as f64 == quanta.round(),
            format!("rank {} vs {quanta:.6} flux quanta", w.rank),
        );
    }
    run.stage("write_clusters", |r| {
        r.write("clusters.csv", |o| {
            let mut w = csv::Writer::from_writer(o);
            w.write_record(["cluster", "lo", "hi", "center", "rank", "target"])
                .map_err(csv_err)?;
            for (n, lo, hi, c, rank, t) in &rows {
                w.write_record([
                    n.to_string(),
                    lo.to_string(),
                    hi.to_string(),
                    c.to_string(),
                    rank.to_string(),
                    t.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        })
    });
}

fn csv_err(e: csv::Error) -> wannier_lab::Error {
    wannier_lab::Error::from(e)
}

fn io_err(e: std::io::Error) -> wannier_lab::Error {
    wannier_lab::Error::InvalidArgument(format!("write: {e}"))
}

fn dirac_spectrum(run: &mut Run<'_>, g: &Arc<PointGeometry>, spec: &ModelSpec) {
    let field = spec.field();
    let b = field.b;
    let Some(d) = run.stage("operator", |_| Ok(build_lattice_dirac(g, &field)?)) else {
        return;
    };
    if run.config.spectrum.write_operator {
        run.stage("write_operator", |r| {
            r.write("operator.csv", |o| export::write_operator(o, &d))
        });
    }
    let opts = run.config.spectrum.clone();
    if b == 0.0 {
        let Some(ev) = run.stage("eigensolve", |_| Ok(eigenvalues(&d)?)) else {
            return;
        };
        let n = ev.len();
        let defect = (0..n)
            .map(|k| (ev[k] + ev[n - 1 - k]).abs())
            .fold(0.0, f64::max);
        run.check(
            "dirac_spectrum_symmetric",
            defect <= opts.symmetry_tolerance,
            format!("max |λ_k + λ_(N-1-k)| = {defect:.3e}"),
        );
        run.stage("write_spectrum", |r| {
            r.write("spectrum.csv", |o| spectra_csv(o, &[(0.0, ev.clone())]))
        });
        return;
    }
    let Some((aa, a_a)) = run.stage("eigensolve_blocks", |_| Ok(chiral_square_blocks(&d)?)) else {
        return;
    };
    let threshold = 0.25 * b;
    let expected = b * g.volume() / TAU;
    let zeros_aa = aa.partition_point(|&x| x <= threshold);
    let zeros_a_a = a_a.partition_point(|&x| x <= threshold);
    for (name, count) in [
        ("zero_modes_aa_star", zeros_aa),
        ("zero_modes_a_star_a", zeros_a_a),
    ] {
        run.check(
            name,
            (count as f64 - expected).abs() <= opts.zero_mode_tolerance,
            format!("{count} eigenvalues ≤ b/4 vs bL²/2π = {expected:.3}"),
        );
    }
    let nonzero_aa = &aa[zeros_aa..];
    let nonzero_a_a = &a_a[zeros_a_a..];
    let m = nonzero_aa.len().min(nonzero_a_a.len());
    let rel = (0..m)
        .map(|k| {
            (nonzero_aa[k] - nonzero_a_a[k]).abs() / nonzero_aa[k].abs().max(nonzero_a_a[k].abs())
        })
        .fold(0.0, f64::max);
    run.check(
        "block_nonzero_spectra_agree",
        nonzero_aa.len() == nonzero_a_a.len() && rel <= opts.block_tolerance,
        format!(
            "{} vs {} nonzero eigenvalues, max relative difference {rel:.3e}",
            nonzero_aa.len(),
            nonzero_a_a.len()
        ),
    );
    run.stage("write_blocks", |r| {
        r.write("blocks.csv", |o| {
            let mut w = csv::Writer::from_writer(o);
            w.write_record(["block", "index", "value"])
                .map_err(csv_err)?;
            for (name, values) in [("a_a_star", &aa), ("a_star_a", &a_a)] {
                for (k, v) in values.iter().enumerate() {
                    w.write_record([name.to_string(), k.to_string(), v.to_string()])
                        .map_err(csv_err)?;
                }
            }
            w.flush().map_err(io_err)
        })
    });
}

fn gaps(run: &mut Run<'_>) {
    let Some(g) = run.stage("geometry", |r| geometry(r)) else {
        return;
    };
    let Some(spec) = run.stage("model", |r| model(r)) else {
        return;
    };
    let Some(rank) = run.stage("band_rank", |_| Ok(spec.band_rank(g.len())?)) else {
        return;
    };
    let Some(h) = run.stage("operator", |_| Ok(spec.hamiltonian(&g)?)) else {
        return;
    };
    let Some(clean) = run.stage("eigensolve_clean", |_| Ok(eigenvalues(&h)?)) else {
        return;
    };
    let clean_gap = clean[rank] - clean[rank - 1];
    let d = disorder(run, || clean_gap).unwrap_or(DisorderConfig {
        strength: 0.0,
        seed: 0,
    });
    let Some(v) = run.stage("disorder", |_| Ok(build_disorder_potential(&g, &d)?)) else {
        return;
    };
    let sup_v = v.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let Some(dirty) = run.stage("eigensolve_disordered", |_| {
        Ok(eigenvalues(&h.plus_scaled(&v, 1.0)?)?)
    }) else {
        return;
    };
    let shift = clean
        .iter()
        .zip(&dirty)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let tol = run.config.gaps.weyl_tolerance;
    run.check(
        "eigenvalue_shift_within_sup_v",
        shift <= sup_v + tol,
        format!("max |λ_k(H+V) − λ_k(H)| = {shift:.6e}, sup|V| = {sup_v:.6e}"),
    );
    let cut = 0.5 * (clean[rank - 1] + clean[rank]);
    let dirty_rank = dirty.partition_point(|&x| x < cut);
    let dirty_gap = dirty[rank] - dirty[rank - 1];
    run.check(
        "band_rank_unchanged",
        dirty_rank == rank && dirty_gap > 0.0,
        format!("rank {dirty_rank} (clean {rank}), gap {dirty_gap:.6} (clean {clean_gap:.6}), W = {:.6}", d.strength),
    );
    let b = spec.field().b;
    if b > 0.0 {
        if let Some(w) = strength_warning(d.strength, b) {
            run.warn(w);
        }
    }
    run.stage("write_spectra", |r| {
        r.write("spectra.csv", |o| {
            spectra_csv(o, &[(0.0, clean.clone()), (1.0, dirty.clone())])
        })
    });
}

fn index(run: &mut Run<'_>) {
    let Some(built) = build_model(run) else {
        return;
    };
    let g = Arc::clone(&built.geometry);
    let opts = run.config.index.clone();
    let mut results: Vec<(String, IndexResult)> = Vec::new();
    if let Some(r) = run.stage("real_space_chern", |_| {
        Ok(real_space_chern(
            &built.projection,
            &ConePartition::centered(&g),
        )?)
    }) {
        if let Some(expect) = opts.expect {
            run.check(
                "band_index",
                (r.value - expect).abs() <= opts.tolerance,
                format!("{:.6} ± {:.1e} vs {expect}", r.value, r.error_estimate),
            );
        }
        results.push(("band".into(), r));
    }
    let trivial = run.stage("trivial_projections", |_| {
        let part = ConePartition::centered(&g);
        let identity = CompactBasis::site_deltas(Arc::clone(&g))?.projection()?;
        let zero = Projection::from_orthonormal_columns(Arc::clone(&g), 1, Mat::zeros(g.len(), 0))?;
        Ok([
            ("identity".to_string(), real_space_chern(&identity, &part)?),
            ("zero".to_string(), real_space_chern(&zero, &part)?),
        ])
    });
    for (name, r) in trivial.into_iter().flatten() {
        run.check(
            &format!("{name}_projection_index"),
            r.value.abs() <= opts.trivial_tolerance,
            format!("{:.3e}", r.value),
        );
        results.push((name, r));
    }
    if let Some(berry) = &opts.berry {
        if !supports_berry_oracle(&g) {
            run.warn("Bloch oracle needs a periodic lattice; skipped".into());
        } else if let Some(r) = run.stage("berry_chern", |_| {
            let model = BlochModel::hofstadter(berry.flux[0], berry.flux[1]);
            Ok(berry_chern(&model, 0..berry.bands, berry.grid)?)
        }) {
            if let Some(expect) = berry.expect {
                run.check(
                    "berry_index",
                    r.value == expect as f64,
                    format!(
                        "{} (raw deviation {:.2e}) vs {expect}",
                        r.value, r.error_estimate
                    ),
                );
            }
            results.push(("bloch".into(), r));
        }
    }
    run.stage("write_indices", |r| {
        let rows: Vec<IndexResult> = results
            .iter()
            .map(|(name, res)| IndexResult {
                parameters: format!("target={name};{}", res.parameters),
                ..res.clone()
            })
            .collect();
        r.write("indices.csv", |o| export::write_indices(o, &rows))
    });
}

fn homotopy(run: &mut Run<'_>) {
    let Some(built) = build_model(run) else {
        return;
    };
    let g = Arc::clone(&built.geometry);
    let Some(spec) = run.stage("model", |r| model(r)) else {
        return;
    };
    let b = spec.field().b;
    if let Some(w) = strength_warning(built.disorder.strength, b) {
        run.warn(w);
    }
    let opts = run.config.homotopy.clone();
    let scan = run.stage("scan", |_| {
        let h: HermitianOperator = spec.hamiltonian(&g)?;
        let v = build_disorder_potential(&g, &built.disorder)?;
        Ok(homotopy_scan(
            &h,
            &v,
            opts.steps,
            built.gap_threshold,
            0,
            Some(&ConePartition::centered(&g)),
        )?)
    });
    let Some(scan) = scan else { return };
    let ranks: Vec<usize> = scan.rows.iter().map(|r| r.rank).collect();
    run.check(
        "rank_constant",
        ranks.iter().all(|&k| k == built.window.rank),
        format!("ranks {ranks:?}, band rank {}", built.window.rank),
    );
    let idx: Vec<f64> = scan.rows.iter().filter_map(|r| r.index).collect();
    let (lo, hi) = idx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    run.check(
        "index_constant",
        idx.len() == scan.rows.len() && hi - lo <= opts.tolerance,
        format!("index in [{lo:.6}, {hi:.6}] over {} steps", idx.len()),
    );
    run.check(
        "gap_open",
        scan.valid(),
        format!(
            "min gap {:.6} vs threshold {:.6}",
            scan.min_gap(),
            scan.gap_threshold
        ),
    );
    run.stage("write_scan", |r| {
        r.write("scan.csv", |o| export::write_scan(o, &scan))
    });
}

struct Attempt {
    built: BuiltModel,
    bumps: BumpSet,
    set: WannierCandidateSet,
}

fn attempt(run: &mut Run<'_>, gram_floor: f64) -> Option<Attempt> {
    let built = build_model(run)?;
    let gamma = run.config.gamma.clone();
    let (bumps, set) = run.stage("lowdin", |_| {
        let centers: CenterSet = gamma.centers(&built.geometry, built.projection.rank())?;
        let rho = 0.5 * centers.packing_radius().min(built.geometry.spacing());
        let bumps = build_bump_set(&built.geometry, &centers, rho)?;
        let set = lowdin_wannierize(&built.projection, &bumps, gram_floor)?;
        log::info!(
            "{} centers, packing radius {:.4}, Gram in [{:.4e}, {:.4e}]",
            bumps.len(),
            bumps.packing_radius(),
            set.gram_min,
            set.gram_max
        );
        Ok((bumps, set))
    })?;
    Some(Attempt { built, bumps, set })
}

fn bounds(run: &mut Run<'_>) {
    let opts = run.config.bounds.clone();
    let Some(Attempt { bumps, set, .. }) = attempt(run, opts.gram_floor) else {
        return;
    };
    if !set.succeeded() {
        run.check(
            "wannierization_succeeded",
            false,
            format!("Gram min {:.3e}", set.gram_min),
        );
        return;
    }
    let mut mus = opts.mu.clone();
    mus.push(opts.truncation_mu);
    let Some(loc) = run.stage("localization", |_| Ok(localization_fit(&set, &mus)?)) else {
        return;
    };
    let mut tail_reports = Vec::new();
    let mut constants = Vec::new();
    for &mu in &opts.mu {
        let Some((profile, tails)) = run.stage(&format!("tails_mu_{mu}"), |_| {
            Ok(certify_for_truncation(&set, &bumps, mu, &opts.radii)?)
        }) else {
            continue;
        };
        run.check(
            &format!("tail_margins_mu_{mu}"),
            tails.margins_nonnegative(),
            format!(
                "margins {:.3e} (continuous), {:.3e} (discrete); C1 = {:.4}, C2 = {:.4}",
                tails.margin_continuous, tails.margin_discrete, tails.c1, tails.c2
            ),
        );
        if let Some(nu) = opts.nu {
            run.check(
                &format!("growth_exponent_mu_{mu}"),
                profile.nu == nu,
                format!("ν = {} (expected {nu})", profile.nu),
            );
        }
        constants.push((profile, tails.clone()));
        tail_reports.push(tails);
    }
    let mu = opts.truncation_mu;
    let truncation = run.stage("truncation", |_| {
        let (profile, tails) = certify_for_truncation(&set, &bumps, mu, &opts.radii)?;
        Ok(truncation_report(
            &set,
            &bumps,
            &profile,
            &tails,
            &loc,
            mu,
            &opts.truncation_radii,
        )?)
    });
    if let Some(t) = &truncation {
        run.check(
            "truncation_bound",
            t.holds(),
            format!(
                "min margin δ1δ2 − actual² = {:.3e}",
                t.margin.iter().copied().fold(f64::INFINITY, f64::min)
            ),
        );
        let decreasing = t.actual.windows(2).all(|w| w[1] < w[0]);
        let last = t.actual.last().copied().unwrap_or(f64::NAN);
        let first = t.actual.first().copied().unwrap_or(f64::NAN);
        run.check(
            "truncation_converges",
            decreasing && last <= 0.05 * first,
            format!(
                "actual ‖V − V^R‖ = {:?}",
                t.actual
                    .iter()
                    .map(|x| format!("{x:.3e}"))
                    .collect::<Vec<_>>()
            ),
        );
    }
    run.stage("write", |r| {
        r.write("tail_bounds.csv", |o| {
            export::write_tail_bounds(o, &tail_reports)
        })?;
        r.write("tail_constants.csv", |o| {
            let mut w = csv::Writer::from_writer(o);
            w.write_record([
                "mu",
                "nu",
                "a_const",
                "c1",
                "c1_nu_form",
                "c1_mu_form",
                "c2",
                "c2_closed_form",
            ])
            .map_err(csv_err)?;
            for (p, t) in &constants {
                w.write_record([
                    t.mu.to_string(),
                    t.nu.to_string(),
                    p.a_const.to_string(),
                    t.c1.to_string(),
                    t.c1_closed_form_nu.to_string(),
                    t.c1_closed_form_mu.to_string(),
                    t.c2.to_string(),
                    t.c2_closed_form.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        })?;
        r.write("localization.csv", |o| export::write_localization(o, &loc))?;
        if let Some(t) = &truncation {
            r.write("truncation.csv", |o| export::write_truncation(o, t))?;
        }
        Ok(())
    });
}

fn wannier(run: &mut Run<'_>) {
    let opts = run.config.wannier.clone();
    let Some(Attempt { built, bumps, set }) = attempt(run, opts.gram_floor) else {
        return;
    };
    if let Some(expect) = opts.expect_success {
        run.check(
            "wannierization_outcome",
            set.succeeded() == expect,
            format!(
                "succeeded = {} (Gram min {:.3e})",
                set.succeeded(),
                set.gram_min
            ),
        );
    }
    if let Some(min) = opts.min_gram {
        run.check(
            "gram_min",
            set.gram_min >= min,
            format!("{:.6} (required ≥ {min})", set.gram_min),
        );
    }
    let index = run.stage("index", |_| {
        Ok(real_space_chern(
            &built.projection,
            &ConePartition::centered(&built.geometry),
        )?)
    });
    let summary = |r: &mut Run<'_>, rows: Vec<(&str, String)>| {
        r.write("summary.csv", |o| {
            let mut w = csv::Writer::from_writer(o);
            w.write_record(["key", "value"]).map_err(csv_err)?;
            for (k, v) in rows {
                w.write_record([k, v.as_str()]).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        })
    };
    let mut rows = vec![
        ("rank", built.projection.rank().to_string()),
        ("centers", bumps.len().to_string()),
        ("packing_radius", bumps.packing_radius().to_string()),
        ("rho", bumps.rho().to_string()),
        ("c0", bumps.c0().to_string()),
        ("gram_min", set.gram_min.to_string()),
        ("gram_max", set.gram_max.to_string()),
        ("succeeded", set.succeeded().to_string()),
    ];
    if let Some(i) = &index {
        rows.push(("index", i.value.to_string()));
        rows.push(("index_error", i.error_estimate.to_string()));
    }
    let Some(w) = set.functions() else {
        run.stage("write", |r| summary(r, rows));
        return;
    };
    let w = w.to_owned();
    let Some(loc) = run.stage("localization", |_| Ok(localization_fit(&set, &opts.mu)?)) else {
        return;
    };
    run.check(
        "decay_constants_certified",
        loc.verify(&set),
        "|w(x)| ≤ C_μ(1+d)^−μ re-checked at every site",
    );
    if let Some(i) = index
        .as_ref()
        .filter(|_| set.gram_min >= opts.localized_gram)
    {
        run.check(
            "localized_band_has_zero_index",
            i.value.abs() <= i.error_estimate + opts.index_tolerance,
            format!(
                "index {:.3e} ± {:.1e} for a Wannier family with Gram min {:.3e}",
                i.value, i.error_estimate, set.gram_min
            ),
        );
    }
    let check = run.stage("partial_isometry", |_| {
        let v = build_v_operator(&set, &bumps)?;
        Ok(check_partial_isometry(&v, &set, &bumps, &built.projection)?)
    });
    if let Some(c) = &check {
        run.check(
            "partial_isometry",
            c.within(opts.isometry_tolerance),
            format!(
                "‖V*V − P_bumps‖ = {:.2e}, ‖VV* − p‖ = {:.2e}, ‖VV*V − V‖ = {:.2e}, singular values off {{0,1}} by {:.2e}",
                c.source_defect, c.range_defect, c.identity_defect, c.singular_value_defect
            ),
        );
        rows.push(("source_defect", c.source_defect.to_string()));
        rows.push(("range_defect", c.range_defect.to_string()));
        rows.push(("identity_defect", c.identity_defect.to_string()));
        rows.push(("singular_value_defect", c.singular_value_defect.to_string()));
    }
    run.stage("write", |r| {
        summary(r, rows)?;
        r.write("wannier_functions.csv", |o| {
            export::write_functions(o, w.as_ref())
        })?;
        r.write("tail_profiles.csv", |o| {
            export::write_tail_profiles(o, &loc)
        })?;
        r.write("localization.csv", |o| export::write_localization(o, &loc))
    });
}

fn dichotomy(run: &mut Run<'_>) {
    let ladder = run.config.ladder.clone();
    let options = run.config.dichotomy.options();
    for v in run.config.variants.clone() {
        let spec = run
            .config
            .variant_system(&v)
            .model(ladder[0])
            .map_err(invalid);
        let report = run.stage(&format!("ladder_{}", v.name), |_| {
            Ok(dichotomy_experiment(&spec?, &v.gamma, &ladder, &options)?)
        });
        let Some(report) = report else { continue };
        log::info!(
            "{}: verdict {}, Gram ratio {:.4}, C_μ ratio {:.4}",
            v.name,
            report.verdict.as_str(),
            report.gram_ratio(),
            report.c_mu_ratio()
        );
        if let Some(expect) = v.expect {
            run.check(
                &format!("verdict_{}", v.name),
                report.verdict == expect,
                format!(
                    "{} (expected {}); Gram min ratio {:.4}, C_{} ratio {:.4}",
                    report.verdict.as_str(),
                    expect.as_str(),
                    report.gram_ratio(),
                    options.mu_ref,
                    report.c_mu_ratio()
                ),
            );
        }
        run.stage(&format!("write_{}", v.name), |r| {
            r.write(&format!("obstruction_{}.csv", v.name), |o| {
                export::write_obstruction(o, &report)
            })
        });
    }
}

fn split_test(run: &mut Run<'_>) {
    let Some(g) = run.stage("geometry", |r| geometry(r)) else {
        return;
    };
    let opts = run.config.split.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(run.config.seed);
    let cut = HalfPlaneCut::horizontal(&g);
    let partition = ConePartition::centered(&g);
    let mut split_rows = Vec::new();
    let mut bump_rows = Vec::new();
    for family in 0..opts.families {
        let out = run.stage(&format!("family_{family}"), |_| {
            let basis = CompactBasis::random(Arc::clone(&g), opts.min_separation, &mut rng)?;
            let report = split_index_test(&basis, &cut, &partition)?;
            let centers = CenterSet::new(&g, basis.centers().to_vec())?;
            let mut bumps = Vec::new();
            for &f in &opts.bump_fractions {
                let rho = f * basis.packing_radius();
                let p = build_bump_set(&g, &centers, rho)?.projection()?;
                bumps.push((
                    f,
                    rho,
                    measure_propagation(&p.to_operator(), 0.0)?.propagation,
                ));
            }
            Ok((report, bumps))
        });
        let Some((report, bumps)) = out else { continue };
        split_rows.push((family, report));
        for (f, rho, prop) in bumps {
            bump_rows.push((
                family,
                f,
                rho,
                split_rows.last().unwrap().1.packing_radius,
                prop,
            ));
        }
    }
    let worst_index = split_rows
        .iter()
        .map(|(_, r)| r.index.value.abs())
        .fold(0.0, f64::max);
    run.check(
        "compact_family_index_vanishes",
        worst_index < opts.tolerance,
        format!(
            "max |index| = {worst_index:.3e} over {} families",
            split_rows.len()
        ),
    );
    let worst_split = split_rows
        .iter()
        .map(|(_, r)| r.split_defect)
        .fold(0.0, f64::max);
    run.check(
        "half_plane_split_exact",
        worst_split == 0.0,
        format!("max |p − p1 − p2| = {worst_split:e}"),
    );
    let ratio = |prop: f64, r: f64| prop / r;
    let worst_family = split_rows
        .iter()
        .map(|(_, r)| ratio(r.propagation, r.packing_radius))
        .fold(0.0, f64::max);
    let worst_bump = bump_rows
        .iter()
        .map(|&(_, _, _, r, p)| ratio(p, r))
        .fold(0.0, f64::max);
    let worst = worst_family.max(worst_bump);
    run.check(
        "propagation_within_packing_radius",
        worst <= 1.0,
        format!("max propagation / r = {worst_family:.4} (families), {worst_bump:.4} (bump sets)"),
    );
    run.check(
        "propagation_below_twice_packing_radius",
        worst < 2.0,
        format!("max propagation / r = {worst:.4}"),
    );
    run.stage("write", |r| {
        r.write("split.csv", |o| {
            let mut w = csv::Writer::from_writer(o);
            w.write_record([
                "family",
                "centers",
                "centers_first",
                "packing_radius",
                "propagation",
                "split_defect",
                "index",
                "index_first",
                "index_second",
            ])
            .map_err(csv_err)?;
            for (k, s) in &split_rows {
                w.write_record([
                    k.to_string(),
                    s.centers.to_string(),
                    s.centers_first.to_string(),
                    s.packing_radius.to_string(),
                    s.propagation.to_string(),
                    s.split_defect.to_string(),
                    s.index.value.to_string(),
                    s.index_first.value.to_string(),
                    s.index_second.value.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        })?;
        r.write("bump_propagation.csv", |o| {
            let mut w = csv::Writer::from_writer(o);
            w.write_record(["family", "fraction", "rho", "packing_radius", "propagation"])
                .map_err(csv_err)?;
            for (k, f, rho, r, p) in &bump_rows {
                w.write_record([
                    k.to_string(),
                    f.to_string(),
                    rho.to_string(),
                    r.to_string(),
                    p.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        })
    });
}
