//! Synthetic data generators, CSV ingestion, and deterministic splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bnn::Dataset;
use crate::error::{Error, Result};
use crate::rng::{mix, substream};

/// Noisy line: `y = slope·x + intercept + N(0, noise_std²)`, inputs uniform
/// over `x_range`.
pub fn gen_linreg<R: Rng + ?Sized>(
    n_points: usize,
    slope: f64,
    intercept: f64,
    noise_std: f64,
    x_range: (f64, f64),
    rng: &mut R,
) -> Dataset {
    let mut inputs = Vec::with_capacity(n_points);
    let mut targets = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let x = rng.random_range(x_range.0..=x_range.1);
        let noise: f64 = rng.sample(StandardNormal);
        inputs.push(vec![x]);
        targets.push(slope * x + intercept + noise_std * noise);
    }
    Dataset { inputs, targets }
}

/// Two isotropic Gaussian blobs in the plane, labeled 0 and 1.
pub fn gen_binclass<R: Rng + ?Sized>(
    n_per_class: usize,
    centers: ([f64; 2], [f64; 2]),
    spread: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if centers.0 == centers.1 {
        return Err(Error::DegenerateCenters);
    }
    let mut inputs = Vec::with_capacity(2 * n_per_class);
    let mut targets = Vec::with_capacity(2 * n_per_class);
    for (label, center) in [(0.0, centers.0), (1.0, centers.1)] {
        for _ in 0..n_per_class {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            inputs.push(vec![center[0] + spread * dx, center[1] + spread * dy]);
            targets.push(label);
        }
    }
    Ok(Dataset { inputs, targets })
}

/// A parsed numeric CSV (last column is the target) plus the caller's wish to
/// standardize columns, which is applied per split from training statistics.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub data: Dataset,
    pub standardize: bool,
}

/// Load a numeric CSV whose last column is the target. A header row is
/// detected by failing to parse as numbers and skipped; row order is
/// preserved.
pub fn load_csv_dataset<P: AsRef<Path>>(path: P, standardize: bool) -> Result<CsvDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            col: 1,
            message: e.to_string(),
        })?;
        let mut values = Vec::with_capacity(record.len());
        let mut bad_cell = None;
        for (col, cell) in record.iter().enumerate() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    bad_cell = Some(col + 1);
                    break;
                }
            }
        }
        if let Some(col) = bad_cell {
            if row == 1 {
                continue; // header row
            }
            return Err(Error::Parse {
                row,
                col,
                message: format!("cell {:?} is not a finite number", &record[col - 1]),
            });
        }
        if values.len() < 2 {
            return Err(Error::Parse {
                row,
                col: 1,
                message: "need at least one feature column and one target column".into(),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    row,
                    col: values.len(),
                    message: format!("expected {w} columns, got {}", values.len()),
                });
            }
            _ => {}
        }
        let target = values.pop().unwrap();
        inputs.push(values);
        targets.push(target);
    }
    if inputs.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(CsvDataset {
        data: Dataset::new(inputs, targets)?,
        standardize,
    })
}

/// Deterministic shuffled split: `(base_seed, split_index)` fully determines
/// the partition; the two parts are disjoint and cover the dataset.
pub fn split_dataset(
    data: &Dataset,
    train_fraction: f64,
    split_index: u32,
    base_seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewRows {
            rows: n,
            train_fraction,
        });
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = substream(mix(base_seed, split_index as u64), 0);
    indices.shuffle(&mut rng);
    let take = |idx: &[usize]| Dataset {
        inputs: idx.iter().map(|&i| data.inputs[i].clone()).collect(),
        targets: idx.iter().map(|&i| data.targets[i]).collect(),
    };
    Ok((take(&indices[..n_train]), take(&indices[n_train..])))
}

/// Column means and standard deviations (population convention), feature
/// columns first, target last.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standardize every column (features and target) of `train` to zero mean and
/// unit variance using statistics computed on `train` alone, and apply the
/// same affine map to `test`. Constant columns are left unscaled.
pub fn standardize_split(train: &mut Dataset, test: &mut Dataset) -> ColumnStats {
    let dim = train.input_dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim + 1];
    let mut std = vec![0.0; dim + 1];
    for (row, &y) in train.inputs.iter().zip(&train.targets) {
        for (c, &v) in row.iter().enumerate() {
            mean[c] += v;
        }
        mean[dim] += y;
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    for (row, &y) in train.inputs.iter().zip(&train.targets) {
        for (c, &v) in row.iter().enumerate() {
            std[c] += (v - mean[c]).powi(2);
        }
        std[dim] += (y - mean[dim]).powi(2);
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for ds in [train, test] {
        for row in ds.inputs.iter_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[c]) / std[c];
            }
        }
        for y in ds.targets.iter_mut() {
            *y = (*y - mean[dim]) / std[dim];
        }
    }
    ColumnStats { mean, std }
}
