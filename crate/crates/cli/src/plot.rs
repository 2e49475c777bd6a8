//! CSV series for plotting a finished run: loss terms, robust scales and
//! cluster counts per epoch, pretraining losses, and a two-dimensional PCA
//! projection of the final representatives.

use std::fs;
use std::path::{Path, PathBuf};

use dcc_core::dataio::{load_labels, load_matrix, MatrixFormat};
use dcc_core::dccopt::EPOCH_LOG_HEADER;
use dcc_core::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};

use crate::commands::{EMBEDDING_FILE, LABELS_FILE, PRETRAIN_LOG_FILE, RUN_LOG_FILE};

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingLog(path.to_path_buf()))
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{}:{line}", path.display()),
        message: message.into(),
    }
}

/// Table rows of a whitespace-separated log with the expected header.
fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(parse_err(path, 1, format!("expected header '{header}'")));
    }
    let width = header.split_whitespace().count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields: Vec<String> = l.split_whitespace().map(str::to_string).collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(parse_err(path, i + 2, format!("expected {width} fields, found {}", fields.len())))
            }
        })
        .collect()
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Projects the rows of `z` onto its two leading principal axes. Each axis
/// is signed so that its largest-magnitude loading is positive.
pub fn pca_2d(z: &Array2<f64>) -> Array2<f64> {
    let (n, d) = z.dim();
    let mut out = Array2::zeros((n, 2));
    if n == 0 || d == 0 {
        return out;
    }
    let mean = z.mean_axis(Axis(0)).expect("non-empty");
    let centered = z - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    for (slot, &axis) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(axis).iter().copied().collect();
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, row) in centered.rows().into_iter().enumerate() {
            out[[i, slot]] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
    }
    out
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    written.push(path);
    Ok(())
}

/// Writes the CSV files for the run in `run_dir` into `out_dir` and returns
/// their paths.
pub fn export(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let log_path = run_dir.join(RUN_LOG_FILE);
    let records = read_table(&log_path, EPOCH_LOG_HEADER)?;
    let embedding_path = run_dir.join(EMBEDDING_FILE);
    let labels_path = run_dir.join(LABELS_FILE);
    require(&embedding_path)?;
    require(&labels_path)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();

    // Columns: epoch total reconstruction data pairwise mu1 mu2 changed clusters
    let pick = |r: &Vec<String>, cols: &[usize]| cols.iter().map(|&c| r[c].clone()).collect::<Vec<_>>();
    write(
        out_dir.join("loss.csv"),
        &csv("epoch,total,reconstruction,data,pairwise", records.iter().map(|r| pick(r, &[0, 1, 2, 3, 4]))),
        &mut written,
    )?;
    write(
        out_dir.join("mu_schedule.csv"),
        &csv("epoch,mu1,mu2", records.iter().map(|r| pick(r, &[0, 5, 6]))),
        &mut written,
    )?;
    let monitored = records.iter().filter(|r| r[8] != "-").map(|r| {
        let changed = if r[7] == "-" { String::new() } else { r[7].clone() };
        vec![r[0].clone(), r[8].clone(), changed]
    });
    write(
        out_dir.join("clusters.csv"),
        &csv("epoch,clusters,changed_fraction", monitored),
        &mut written,
    )?;

    let pretrain_path = run_dir.join(PRETRAIN_LOG_FILE);
    if pretrain_path.is_file() {
        let rows = read_table(&pretrain_path, "stage epoch loss")?;
        write(out_dir.join("pretrain_loss.csv"), &csv("stage,epoch,loss", rows), &mut written)?;
    }

    // The embedding is stored one dimension per row.
    let z = load_matrix(&embedding_path, MatrixFormat::Binary)?.into_values().reversed_axes();
    let labels = load_labels(&labels_path)?;
    if labels.len() != z.nrows() {
        return Err(Error::LengthMismatch {
            expected: z.nrows(),
            found: labels.len(),
        });
    }
    let proj = pca_2d(&z);
    let rows = proj
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(p, l)| vec![p[0].to_string(), p[1].to_string(), l.to_string()]);
    write(out_dir.join("projection.csv"), &csv("pc1,pc2,label", rows), &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pca_recovers_dominant_axis() {
        let z = array![[-2.0, 0.0, 0.1], [2.0, 0.0, -0.1], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let p = pca_2d(&z);
        assert_eq!(p.dim(), (4, 2));
        for (row, expected) in p.rows().into_iter().zip([-2.0, 2.0, -1.0, 1.0]) {
            assert!((row[0].abs() - f64::abs(expected)).abs() < 0.01);
        }
        // Variance is ordered.
        let var = p.var_axis(Axis(0), 0.0);
        assert!(var[0] >= var[1]);
    }

    #[test]
    fn empty_directory_is_a_missing_log() {
        let dir = tempfile::tempdir().unwrap();
        let err = export(dir.path(), &dir.path().join("plots")).unwrap_err();
        assert_eq!(err.kind(), "missing-log");
    }
}
