//! Dataset CSV format: header `x0,…,x{d−1},t,y[,mu0,mu1]`, one sample per row.
//! Reals are written with 17 significant digits so files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::dataset::{Dataset, FeatureKind, GroundTruth};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Formats a real with 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<(Dataset, Option<GroundTruth>)> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<(Dataset, Option<GroundTruth>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();

    let t_col = names
        .iter()
        .position(|h| *h == "t")
        .ok_or_else(|| Error::Schema("missing column `t`".into()))?;
    let y_col = names
        .iter()
        .position(|h| *h == "y")
        .ok_or_else(|| Error::Schema("missing column `y`".into()))?;
    let mu_cols = match (
        names.iter().position(|h| *h == "mu0"),
        names.iter().position(|h| *h == "mu1"),
    ) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(Error::Schema("columns mu0 and mu1 must appear together".into())),
    };
    let mut x_cols = Vec::new();
    for (k, h) in names.iter().enumerate() {
        if k == t_col || k == y_col || mu_cols.is_some_and(|(a, b)| k == a || k == b) {
            continue;
        }
        let idx: usize = h
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Schema(format!("unexpected column `{h}`")))?;
        if idx != x_cols.len() {
            return Err(Error::Schema(format!(
                "covariate columns must be x0..x{{d-1}} in order, found `{h}`"
            )));
        }
        x_cols.push(k);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let (mut t, mut y, mut mu0, mut mu1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, record) in rdr.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let field = |c: usize| -> Result<f64> {
            let raw = &record[c];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("column `{}`: `{raw}` is not a finite real", names[c]),
                })
        };
        rows.push(x_cols.iter().map(|&c| field(c)).collect::<Result<_>>()?);
        let tv = match &record[t_col] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("treatment must be 0 or 1, found `{other}`"),
                })
            }
        };
        t.push(tv);
        y.push(field(y_col)?);
        if let Some((a, b)) = mu_cols {
            mu0.push(field(a)?);
            mu1.push(field(b)?);
        }
    }

    let x = if rows.is_empty() {
        Matrix::zeros(0, x_cols.len())
    } else {
        Matrix::from_rows(&rows)?
    };
    let kinds = infer_kinds(&x);
    let dataset = Dataset::new(x, t, y, kinds)?;
    let truth = match mu_cols {
        Some(_) => Some(GroundTruth::new(mu0, mu1)?),
        None => None,
    };
    Ok((dataset, truth))
}

/// Columns whose values are all 0/1 are binary, all other columns continuous.
fn infer_kinds(x: &Matrix) -> Vec<FeatureKind> {
    (0..x.cols())
        .map(|c| {
            let binary = x.rows() > 0 && (0..x.rows()).all(|r| matches!(x.get(r, c), v if v == 0.0 || v == 1.0));
            if binary {
                FeatureKind::Binary
            } else {
                FeatureKind::Continuous
            }
        })
        .collect()
}

pub fn save_csv(path: impl AsRef<Path>, dataset: &Dataset, truth: Option<&GroundTruth>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, dataset, truth)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(w: &mut W, dataset: &Dataset, truth: Option<&GroundTruth>) -> Result<()> {
    if let Some(g) = truth {
        if g.len() != dataset.n() {
            return Err(Error::Shape {
                context: "ground truth rows",
                expected: dataset.n(),
                got: g.len(),
            });
        }
    }
    let mut header: Vec<String> = (0..dataset.d()).map(|j| format!("x{j}")).collect();
    header.push("t".into());
    header.push("y".into());
    if truth.is_some() {
        header.push("mu0".into());
        header.push("mu1".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..dataset.n() {
        let mut fields: Vec<String> = dataset.x().row(i).iter().map(|&v| format_real(v)).collect();
        fields.push(dataset.t()[i].to_string());
        fields.push(format_real(dataset.y()[i]));
        if let Some(g) = truth {
            fields.push(format_real(g.mu0()[i]));
            fields.push(format_real(g.mu1()[i]));
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
