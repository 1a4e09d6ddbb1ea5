//! CSV writers. UTF-8, comma delimiter, header row, complex numbers as
//! paired `re`/`im` columns. Floats use Rust's shortest round-trip format,
//! so identical inputs give byte-identical files.

use std::io::Write;

use faer::MatRef;

use crate::geometry::{PointGeometry, TailBoundReport};
use crate::index::IndexResult;
use crate::operator::HermitianOperator;
use crate::spectral::HomotopyScan;
use crate::wannier::{LocalizationReport, ObstructionReport, TruncationReport};
use crate::{c64, Error, Result};

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidArgument(format!("csv: {e}"))
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out)
}

fn row<W: Write, const N: usize>(w: &mut csv::Writer<W>, fields: [String; N]) -> Result<()> {
    w.write_record(fields)?;
    Ok(())
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv flush: {e}")))?
        .flush()
        .map_err(|e| Error::InvalidArgument(format!("write: {e}")))
}

/// `index,x,y`.
pub fn write_geometry<W: Write>(out: W, geometry: &PointGeometry) -> Result<()> {
    let mut w = writer(out);
    row(&mut w, ["index".into(), "x".into(), "y".into()])?;
    for (i, x, y) in geometry.csv_rows() {
        row(&mut w, [i.to_string(), x.to_string(), y.to_string()])?;
    }
    finish(w)
}

/// Sparse triplets `row,col,re,im`.
pub fn write_operator<W: Write>(out: W, op: &HermitianOperator) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        ["row".into(), "col".into(), "re".into(), "im".into()],
    )?;
    for (i, j, re, im) in op.triplets() {
        row(
            &mut w,
            [i.to_string(), j.to_string(), re.to_string(), im.to_string()],
        )?;
    }
    finish(w)
}

/// `t,index,value`, one row per eigenvalue per parameter value.
pub fn write_spectra<W: Write>(out: W, spectra: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut w = writer(out);
    row(&mut w, ["t".into(), "index".into(), "value".into()])?;
    for (t, values) in spectra {
        for (k, v) in values.iter().enumerate() {
            row(&mut w, [t.to_string(), k.to_string(), v.to_string()])?;
        }
    }
    finish(w)
}

/// `t,gap,rank,index`.
pub fn write_scan<W: Write>(out: W, scan: &HomotopyScan) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        ["t".into(), "gap".into(), "rank".into(), "index".into()],
    )?;
    for r in &scan.rows {
        let index = r.index.map(|x| x.to_string()).unwrap_or_default();
        row(
            &mut w,
            [
                r.t.to_string(),
                r.min_gap.to_string(),
                r.rank.to_string(),
                index,
            ],
        )?;
    }
    finish(w)
}

/// `method,value,error,parameters`.
pub fn write_indices<W: Write>(out: W, results: &[IndexResult]) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        [
            "method".into(),
            "value".into(),
            "error".into(),
            "parameters".into(),
        ],
    )?;
    for r in results {
        row(
            &mut w,
            [
                r.method.as_str().into(),
                r.value.to_string(),
                r.error_estimate.to_string(),
                r.parameters.clone(),
            ],
        )?;
    }
    finish(w)
}

/// `gamma,site,re,im` for the nonzero entries of each column.
pub fn write_functions<W: Write>(out: W, functions: MatRef<'_, c64>) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        ["gamma".into(), "site".into(), "re".into(), "im".into()],
    )?;
    for k in 0..functions.ncols() {
        for x in 0..functions.nrows() {
            let v = functions[(x, k)];
            if v != c64::new(0.0, 0.0) {
                row(
                    &mut w,
                    [
                        k.to_string(),
                        x.to_string(),
                        v.re.to_string(),
                        v.im.to_string(),
                    ],
                )?;
            }
        }
    }
    finish(w)
}

/// `gamma,distance,max_amplitude`.
pub fn write_tail_profiles<W: Write>(out: W, report: &LocalizationReport) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        ["gamma".into(), "distance".into(), "max_amplitude".into()],
    )?;
    for p in &report.profiles {
        for (d, a) in &p.bins {
            row(&mut w, [p.center.to_string(), d.to_string(), a.to_string()])?;
        }
    }
    finish(w)
}

/// `mu,c_mu,gamma,site`.
pub fn write_localization<W: Write>(out: W, report: &LocalizationReport) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        ["mu".into(), "c_mu".into(), "gamma".into(), "site".into()],
    )?;
    for ((mu, c), (k, x)) in report.mu.iter().zip(&report.c_mu).zip(&report.argmax) {
        row(
            &mut w,
            [mu.to_string(), c.to_string(), k.to_string(), x.to_string()],
        )?;
    }
    finish(w)
}

/// `mu,nu,R,continuous_lhs,c1_bound,discrete_lhs,c2_bound`.
pub fn write_tail_bounds<W: Write>(out: W, reports: &[TailBoundReport]) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        [
            "mu".into(),
            "nu".into(),
            "R".into(),
            "continuous_lhs".into(),
            "c1_bound".into(),
            "discrete_lhs".into(),
            "c2_bound".into(),
        ],
    )?;
    for rep in reports {
        for (k, &r) in rep.radii.iter().enumerate() {
            let decay = (1.0 + r).powf(rep.nu - rep.mu);
            row(
                &mut w,
                [
                    rep.mu.to_string(),
                    rep.nu.to_string(),
                    r.to_string(),
                    rep.continuous_lhs[k].to_string(),
                    (rep.c1 * decay).to_string(),
                    rep.discrete_lhs[k].to_string(),
                    (rep.c2 * decay).to_string(),
                ],
            )?;
        }
    }
    finish(w)
}

/// `R,actual,delta1,delta2,margin,delta1_without_c_mu,margin_without_c_mu`.
pub fn write_truncation<W: Write>(out: W, report: &TruncationReport) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        [
            "R".into(),
            "actual".into(),
            "delta1".into(),
            "delta2".into(),
            "margin".into(),
            "delta1_without_c_mu".into(),
            "margin_without_c_mu".into(),
        ],
    )?;
    for k in 0..report.radii.len() {
        row(
            &mut w,
            [
                report.radii[k].to_string(),
                report.actual[k].to_string(),
                report.delta1[k].to_string(),
                report.delta2[k].to_string(),
                report.margin[k].to_string(),
                report.delta1_without_c_mu[k].to_string(),
                report.margin_without_c_mu[k].to_string(),
            ],
        )?;
    }
    finish(w)
}

/// `L,rank,centers,gram_min,gram_max,c_mu,orthonormality_defect,index,index_error,verdict`.
pub fn write_obstruction<W: Write>(out: W, report: &ObstructionReport) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        [
            "L".into(),
            "rank".into(),
            "centers".into(),
            "gram_min".into(),
            "gram_max".into(),
            "c_mu".into(),
            "orthonormality_defect".into(),
            "index".into(),
            "index_error".into(),
            "verdict".into(),
        ],
    )?;
    for r in &report.rows {
        row(
            &mut w,
            [
                r.extent.to_string(),
                r.rank.to_string(),
                r.centers.to_string(),
                r.gram_min.to_string(),
                r.gram_max.to_string(),
                r.c_mu.to_string(),
                r.orthonormality_defect.to_string(),
                r.index.to_string(),
                r.index_error.to_string(),
                report.verdict.as_str().into(),
            ],
        )?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;

    #[test]
    fn geometry_csv_shape() {
        let g = PointGeometry::lattice(0.5, 2.0, Boundary::Open)
            .unwrap_or_else(|_| PointGeometry::lattice(0.5, 4.0, Boundary::Open).unwrap());
        let mut buf = Vec::new();
        write_geometry(&mut buf, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,x,y");
        assert_eq!(lines.len(), g.len() + 1);
        assert_eq!(lines[2], "1,0,0.5");
    }

    #[test]
    fn functions_csv_pairs_re_im() {
        let m = faer::Mat::from_fn(2, 1, |i, _| c64::new(i as f64, -0.25));
        let mut buf = Vec::new();
        write_functions(&mut buf, m.as_ref()).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "gamma,site,re,im\n0,0,0,-0.25\n0,1,1,-0.25\n"
        );
    }
}
