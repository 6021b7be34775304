//! Dataset loading: IDX image files, tabular TSV, and synthetic
//! regression targets generated from their source formulas.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone)]
pub enum Targets {
    /// Integer class labels.
    Labels(Vec<usize>),
    /// Regression targets, shape `[n, d]`.
    Values(Tensor),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.shape()[0],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-column z-score statistics, kept so normalization can be inverted
/// exactly. Regression targets are normalized for training only; the
/// recorded stats map predictions back so NMSE is always reported in
/// the targets' original units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalization {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// `[n, features...]`.
    pub features: Tensor,
    pub targets: Targets,
    pub norm: Option<Normalization>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_shape(&self) -> &[usize] {
        &self.features.shape()[1..]
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let parts: Result<Vec<Tensor>> = indices
            .iter()
            .map(|&i| self.features.index_axis0(i))
            .collect();
        let features = Tensor::stack(&parts?)?;
        let targets = match &self.targets {
            Targets::Labels(l) => {
                let picked: Result<Vec<usize>> = indices
                    .iter()
                    .map(|&i| {
                        l.get(i)
                            .copied()
                            .ok_or_else(|| Error::Data(format!("subset index {i} out of range")))
                    })
                    .collect();
                Targets::Labels(picked?)
            }
            Targets::Values(v) => {
                let rows: Result<Vec<Tensor>> = indices.iter().map(|&i| v.index_axis0(i)).collect();
                Targets::Values(Tensor::stack(&rows?)?)
            }
        };
        Ok(Dataset {
            features,
            targets,
            norm: self.norm.clone(),
        })
    }

    /// Seeded-permutation split into `(first n_train rows, rest)`.
    pub fn split(&self, n_train: usize, rng: &mut impl Rng) -> Result<(Dataset, Dataset)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(Error::Config(format!(
                "split size {n_train} invalid for {} samples",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        Ok((
            self.subset(&order[..n_train])?,
            self.subset(&order[n_train..])?,
        ))
    }

    /// Z-scores every feature column (and, for regression, every target
    /// column) in place, recording the statistics so the transform can be
    /// inverted. Constant columns keep scale 1.
    pub fn zscore_normalize(&mut self) -> Result<()> {
        if self.norm.is_some() {
            return Err(Error::Data("dataset already normalized".into()));
        }
        let n = self.len();
        let width: usize = self.feature_shape().iter().product();
        let (feature_mean, feature_std) = column_stats(self.features.data(), n, width);
        apply_zscore(self.features.data_mut(), &feature_mean, &feature_std);
        let (target_mean, target_std) = match &mut self.targets {
            Targets::Values(t) => {
                let d = t.shape()[1];
                let (m, s) = column_stats(t.data(), n, d);
                apply_zscore(t.data_mut(), &m, &s);
                (m, s)
            }
            Targets::Labels(_) => (Vec::new(), Vec::new()),
        };
        self.norm = Some(Normalization {
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        });
        Ok(())
    }

    /// Inverse of [`Dataset::zscore_normalize`] for one feature tensor.
    pub fn denormalize_features(&self, x: &Tensor) -> Result<Tensor> {
        let norm = match &self.norm {
            Some(n) => n,
            None => return Ok(x.clone()),
        };
        let d = norm.feature_mean.len();
        if !x.numel().is_multiple_of(d) {
            return Err(Error::dim(format!(
                "tensor of {} elements is not row-aligned to {d} features",
                x.numel()
            )));
        }
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let j = i % d;
            *v = *v * norm.feature_std[j] + norm.feature_mean[j];
        }
        Ok(out)
    }

    /// Maps a `[n, out]` tensor of predictions (or normalized targets) back
    /// to the targets' original units. Identity when no normalization was
    /// applied.
    pub fn denormalize_targets(&self, x: &Tensor) -> Result<Tensor> {
        let norm = match &self.norm {
            Some(n) if !n.target_mean.is_empty() => n,
            _ => return Ok(x.clone()),
        };
        let d = norm.target_mean.len();
        if !x.numel().is_multiple_of(d) {
            return Err(Error::dim(format!(
                "tensor of {} elements is not row-aligned to {d} targets",
                x.numel()
            )));
        }
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let j = i % d;
            *v = *v * norm.target_std[j] + norm.target_mean[j];
        }
        Ok(out)
    }

    pub fn labels(&self) -> Result<&[usize]> {
        match &self.targets {
            Targets::Labels(l) => Ok(l),
            Targets::Values(_) => Err(Error::Data(
                "expected class labels, dataset has regression targets".into(),
            )),
        }
    }

    pub fn values(&self) -> Result<&Tensor> {
        match &self.targets {
            Targets::Values(v) => Ok(v),
            Targets::Labels(_) => Err(Error::Data(
                "expected regression targets, dataset has class labels".into(),
            )),
        }
    }
}

fn column_stats(data: &[f64], n: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; width];
    for row in 0..n {
        for c in 0..width {
            mean[c] += data[row * width + c];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = vec![0.0; width];
    for row in 0..n {
        for c in 0..width {
            let d = data[row * width + c] - mean[c];
            std[c] += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (mean, std)
}

fn apply_zscore(data: &mut [f64], mean: &[f64], std: &[f64]) {
    let width = mean.len();
    for (i, v) in data.iter_mut().enumerate() {
        let c = i % width;
        *v = (*v - mean[c]) / std[c];
    }
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Loads an IDX image/label pair (optionally gzipped). Pixels are scaled
/// to `[0,1]`; images come out as `[n, 1, rows, cols]`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = read_maybe_gzip(images_path)?;
    if be_u32(&img, 0)? != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad IDX image magic {:#010x}",
            images_path.display(),
            be_u32(&img, 0)?
        )));
    }
    let n = be_u32(&img, 4)? as usize;
    let rows = be_u32(&img, 8)? as usize;
    let cols = be_u32(&img, 12)? as usize;
    let pixels = img
        .get(16..16 + n * rows * cols)
        .ok_or_else(|| Error::Format(format!("{}: truncated pixel data", images_path.display())))?;
    if img.len() != 16 + n * rows * cols {
        return Err(Error::Format(format!(
            "{}: {} trailing bytes after pixel data",
            images_path.display(),
            img.len() - 16 - n * rows * cols
        )));
    }

    let lab = read_maybe_gzip(labels_path)?;
    if be_u32(&lab, 0)? != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad IDX label magic {:#010x}",
            labels_path.display(),
            be_u32(&lab, 0)?
        )));
    }
    let n_lab = be_u32(&lab, 4)? as usize;
    if n_lab != n {
        return Err(Error::Format(format!("{n} images but {n_lab} labels")));
    }
    let labels_raw = lab
        .get(8..8 + n)
        .ok_or_else(|| Error::Format(format!("{}: truncated label data", labels_path.display())))?;

    let features = Tensor::new(
        vec![n, 1, rows, cols],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;
    Ok(Dataset {
        features,
        targets: Targets::Labels(labels_raw.iter().map(|&l| l as usize).collect()),
        norm: None,
    })
}

/// Loads a tab-separated table (optionally gzipped) with a header row.
/// The column named `target` becomes the regression target; every other
/// column is a feature. No normalization is applied here.
pub fn load_tabular(path: &Path) -> Result<Dataset> {
    let bytes = read_maybe_gzip(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{}: not valid UTF-8", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?
        .split('\t')
        .map(str::trim)
        .collect();
    let target_col = header
        .iter()
        .position(|&c| c == "target")
        .ok_or_else(|| Error::Format(format!("{}: no 'target' column", path.display())))?;
    let width = header.len() - 1;
    if width == 0 {
        return Err(Error::Format(format!(
            "{}: no feature columns",
            path.display()
        )));
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::Format(format!(
                "{}: line {} has {} columns, header has {}",
                path.display(),
                lineno + 2,
                cells.len(),
                header.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Format(format!(
                    "{}: line {}: '{cell}' is not a number",
                    path.display(),
                    lineno + 2
                ))
            })?;
            if col == target_col {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok(Dataset {
        features: Tensor::new(vec![n, width], features)?,
        targets: Targets::Values(Tensor::new(vec![n, 1], targets)?),
        norm: None,
    })
}

/// `y = 1e-5 (5x^2 + 200x)` on `[0,1]`, sampled uniformly.
pub fn synth_quadratic(n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    synth_from(
        n,
        1,
        rng,
        |x| {
            let v = x[0];
            1e-5 * (5.0 * v * v + 200.0 * v)
        },
        &[(0.0, 1.0)],
    )
}

/// Gaussian density `exp(-theta^2/2)/sqrt(2 pi)` with `theta` in `[1,3]`.
pub fn synth_feynman_i_6_2a(n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    synth_from(
        n,
        1,
        rng,
        |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        &[(1.0, 3.0)],
    )
}

/// Gravitation `G m1 m2 / ((x2-x1)^2 + (y2-y1)^2 + (z2-z1)^2)` with
/// `m1, m2, G` in `[1,2]`, `x1, y1, z1` in `[3,4]` and `x2, y2, z2` in
/// `[1,2]`.
pub fn synth_feynman_i_9_18(n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    let ranges = [
        (1.0, 2.0), // m1
        (1.0, 2.0), // m2
        (1.0, 2.0), // G
        (3.0, 4.0), // x1
        (3.0, 4.0), // y1
        (3.0, 4.0), // z1
        (1.0, 2.0), // x2
        (1.0, 2.0), // y2
        (1.0, 2.0), // z2
    ];
    synth_from(
        n,
        9,
        rng,
        |x| {
            let d2 = (x[6] - x[3]).powi(2) + (x[7] - x[4]).powi(2) + (x[8] - x[5]).powi(2);
            x[2] * x[0] * x[1] / d2
        },
        &ranges,
    )
}

fn synth_from(
    n: usize,
    width: usize,
    rng: &mut impl Rng,
    f: impl Fn(&[f64]) -> f64,
    ranges: &[(f64, f64)],
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("cannot generate an empty dataset".into()));
    }
    debug_assert_eq!(ranges.len(), width);
    let mut features = Vec::with_capacity(n * width);
    let mut targets = Vec::with_capacity(n);
    let mut row = vec![0.0; width];
    for _ in 0..n {
        for (c, &(lo, hi)) in ranges.iter().enumerate() {
            row[c] = rng.gen_range(lo..hi);
        }
        features.extend_from_slice(&row);
        targets.push(f(&row));
    }
    Ok(Dataset {
        features: Tensor::new(vec![n, width], features)?,
        targets: Targets::Values(Tensor::new(vec![n, 1], targets)?),
        norm: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn idx_fixture() -> (Vec<u8>, Vec<u8>) {
        // three 2x2 "images" with pixel value = 10*i + position
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&3u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        for i in 0..3u8 {
            for p in 0..4u8 {
                img.push(10 * i + p);
            }
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lab.extend_from_slice(&3u32.to_be_bytes());
        lab.extend_from_slice(&[7, 0, 3]);
        (img, lab)
    }

    #[test]
    fn idx_roundtrip_including_gzip() {
        let (img, lab) = idx_fixture();
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img.idx");
        let lp = dir.path().join("lab.idx.gz");
        std::fs::write(&ip, &img).unwrap();
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&lab).unwrap();
        std::fs::write(&lp, enc.finish().unwrap()).unwrap();

        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.features.shape(), &[3, 1, 2, 2]);
        assert_eq!(ds.labels().unwrap(), &[7, 0, 3]);
        // byte-level check of the second image, first pixel: 10/255
        let second = ds.features.index_axis0(1).unwrap();
        assert!((second.data()[0] - 10.0 / 255.0).abs() < 1e-15);
        assert!((second.data()[3] - 13.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn idx_corrupt_magic_and_truncation() {
        let (mut img, lab) = idx_fixture();
        let dir = tempfile::tempdir().unwrap();
        let lp = dir.path().join("lab.idx");
        std::fs::write(&lp, &lab).unwrap();

        img[3] = 0x99;
        let bad_magic = dir.path().join("bad.idx");
        std::fs::write(&bad_magic, &img).unwrap();
        assert!(matches!(load_idx(&bad_magic, &lp), Err(Error::Format(_))));

        let (img, _) = idx_fixture();
        let short = dir.path().join("short.idx");
        std::fs::write(&short, &img[..img.len() - 2]).unwrap();
        assert!(matches!(load_idx(&short, &lp), Err(Error::Format(_))));
    }

    #[test]
    fn tabular_parsing_and_target_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        std::fs::write(&p, "a\ttarget\tb\n1.0\t5.0\t2.0\n3.0\t6.0\t4.0\n").unwrap();
        let ds = load_tabular(&p).unwrap();
        assert_eq!(ds.features.shape(), &[2, 2]);
        assert_eq!(ds.features.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ds.values().unwrap().data(), &[5.0, 6.0]);

        let bad = dir.path().join("bad.tsv");
        std::fs::write(&bad, "a\tb\n1\t2\n").unwrap();
        assert!(matches!(load_tabular(&bad), Err(Error::Format(_))));
        let ragged = dir.path().join("ragged.tsv");
        std::fs::write(&ragged, "a\ttarget\n1\t2\n3\n").unwrap();
        assert!(load_tabular(&ragged).is_err());
    }

    #[test]
    fn zscore_normalization_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ds = synth_quadratic(500, &mut rng).unwrap();
        let raw_features = ds.features.clone();
        let raw_targets = ds.values().unwrap().clone();
        ds.zscore_normalize().unwrap();
        let norm = ds.norm.as_ref().unwrap();
        assert_eq!(norm.feature_mean.len(), 1);
        let mean: f64 = ds.features.data().iter().sum::<f64>() / ds.len() as f64;
        assert!(mean.abs() < 1e-10);
        let t_mean: f64 = ds.values().unwrap().data().iter().sum::<f64>() / ds.len() as f64;
        assert!(t_mean.abs() < 1e-10);
        // both transforms invert exactly
        let restored = ds.denormalize_features(&ds.features).unwrap();
        for (a, b) in restored.data().iter().zip(raw_features.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let restored_t = ds.denormalize_targets(ds.values().unwrap()).unwrap();
        for (a, b) in restored_t.data().iter().zip(raw_targets.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ds.zscore_normalize().is_err());
    }

    #[test]
    fn constant_column_keeps_unit_scale() {
        let mut ds = Dataset {
            features: Tensor::new(vec![3, 1], vec![2.0, 2.0, 2.0]).unwrap(),
            targets: Targets::Values(Tensor::new(vec![3, 1], vec![1.0, 2.0, 3.0]).unwrap()),
            norm: None,
        };
        ds.zscore_normalize().unwrap();
        assert_eq!(ds.norm.as_ref().unwrap().feature_std, vec![1.0]);
        assert!(ds.features.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn split_partitions_without_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = synth_feynman_i_6_2a(100, &mut rng).unwrap();
        let (train, test) = ds.split(70, &mut rng).unwrap();
        assert_eq!(train.len(), 70);
        assert_eq!(test.len(), 30);
        let mut all: Vec<f64> = train
            .features
            .data()
            .iter()
            .chain(test.features.data())
            .copied()
            .collect();
        let mut orig = ds.features.data().to_vec();
        all.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
    }

    #[test]
    fn synthetic_formulas_match_hand_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = synth_quadratic(10, &mut rng).unwrap();
        for i in 0..10 {
            let x = q.features.data()[i];
            let y = q.values().unwrap().data()[i];
            assert!((y - 1e-5 * (5.0 * x * x + 200.0 * x)).abs() < 1e-15);
            assert!((0.0..1.0).contains(&x));
        }
        let g = synth_feynman_i_6_2a(10, &mut rng).unwrap();
        for i in 0..10 {
            let x = g.features.data()[i];
            assert!((1.0..3.0).contains(&x));
            let y = g.values().unwrap().data()[i];
            let expect = (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((y - expect).abs() < 1e-15);
        }
        let f = synth_feynman_i_9_18(10, &mut rng).unwrap();
        assert_eq!(f.features.shape(), &[10, 9]);
        let x = &f.features.data()[..9];
        let d2 = (x[6] - x[3]).powi(2) + (x[7] - x[4]).powi(2) + (x[8] - x[5]).powi(2);
        let expect = x[2] * x[0] * x[1] / d2;
        assert!((f.values().unwrap().data()[0] - expect).abs() < 1e-12);
    }
}
