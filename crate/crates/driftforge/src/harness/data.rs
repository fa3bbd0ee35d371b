//! Dataset ingestion: IDX (MNIST-format) files, seeded synthetic blobs,
//! and the D0/pool halving. All randomness flows through explicit [`Rng`]
//! values so every load is reproducible.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::drift::Dataset;
use crate::error::{Error, Result};
use crate::numcore::{bilinear_upsample, Image, Rng};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Env var that prefixes relative dataset paths.
pub const DATA_DIR_ENV: &str = "DRIFTFORGE_DATA_DIR";

/// Fraction of an IDX subset held out as the test set when no dedicated
/// test files are configured (matches the 60k/10k MNIST ratio).
const HOLDOUT_DENOM: usize = 6;

/// Where the experiment data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// IDX image/label pairs on disk. When the test pair is omitted, a
    /// 1/6 holdout is carved from the (subsampled) training set instead.
    IdxFiles {
        image_path: PathBuf,
        label_path: PathBuf,
        #[serde(default)]
        test_image_path: Option<PathBuf>,
        #[serde(default)]
        test_label_path: Option<PathBuf>,
        subset_size: usize,
        #[serde(default)]
        test_subset_size: Option<usize>,
    },
    /// Seeded class-conditional blobs: per class a fixed low-frequency
    /// base pattern, per sample additive Gaussian noise, clamped to [0,1].
    Synthetic {
        num_classes: usize,
        samples_per_class: usize,
        image_size: usize,
        #[serde(default = "default_channels")]
        channels: usize,
        noise_std: f64,
        seed: u64,
        /// Test samples per class; 0 means samples_per_class / 5.
        #[serde(default)]
        test_per_class: usize,
    },
}

fn default_channels() -> usize {
    1
}

/// Prefixes relative paths with `DRIFTFORGE_DATA_DIR` when it is set.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

impl DatasetSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSource::IdxFiles {
                image_path,
                label_path,
                test_image_path,
                test_label_path,
                subset_size,
                test_subset_size,
            } => {
                if *subset_size == 0 {
                    return Err(Error::EmptyInput("idx subset_size".into()));
                }
                if let Some(n) = test_subset_size {
                    if *n == 0 {
                        return Err(Error::EmptyInput("idx test_subset_size".into()));
                    }
                }
                if test_image_path.is_some() != test_label_path.is_some() {
                    return Err(Error::Config(
                        "test_image_path and test_label_path must be set together".into(),
                    ));
                }
                let mut paths = vec![image_path, label_path];
                paths.extend(test_image_path.iter());
                paths.extend(test_label_path.iter());
                for p in paths {
                    let resolved = resolve_data_path(p);
                    if !resolved.is_file() {
                        return Err(Error::Config(format!(
                            "dataset file not found: {}",
                            resolved.display()
                        )));
                    }
                }
                Ok(())
            }
            DatasetSource::Synthetic {
                num_classes,
                samples_per_class,
                image_size,
                channels,
                noise_std,
                ..
            } => {
                if *num_classes < 2 {
                    return Err(Error::invalid("synthetic num_classes must be >= 2"));
                }
                if *samples_per_class == 0 {
                    return Err(Error::EmptyInput("synthetic samples_per_class".into()));
                }
                if *image_size < 2 {
                    return Err(Error::invalid("synthetic image_size must be >= 2"));
                }
                if *channels == 0 || *channels > 4 {
                    return Err(Error::invalid("synthetic channels must be in 1..=4"));
                }
                if !noise_std.is_finite() || *noise_std < 0.0 {
                    return Err(Error::invalid("synthetic noise_std must be >= 0"));
                }
                Ok(())
            }
        }
    }

    /// Materializes the (train, test) pair described by this source.
    pub fn load(&self, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSource::IdxFiles {
                image_path,
                label_path,
                test_image_path,
                test_label_path,
                subset_size,
                test_subset_size,
            } => {
                let train = load_idx(
                    &resolve_data_path(image_path),
                    &resolve_data_path(label_path),
                    *subset_size,
                    rng,
                )?;
                match (test_image_path, test_label_path) {
                    (Some(ti), Some(tl)) => {
                        let ti = resolve_data_path(ti);
                        let tl = resolve_data_path(tl);
                        let count = idx_record_count(&ti)?;
                        let take = test_subset_size.unwrap_or(count);
                        let test = load_idx(&ti, &tl, take, rng)?;
                        Ok((train, test))
                    }
                    _ => {
                        let held = (train.len() / HOLDOUT_DENOM).max(1);
                        let mut idxs = rng.sample_indices(train.len(), held);
                        idxs.sort_unstable();
                        let test = train.select(&idxs);
                        let mut keep: Vec<usize> = (0..train.len()).collect();
                        let mut cut = idxs.iter().peekable();
                        keep.retain(|i| {
                            if cut.peek() == Some(&i) {
                                cut.next();
                                false
                            } else {
                                true
                            }
                        });
                        Ok((train.select(&keep), test))
                    }
                }
            }
            DatasetSource::Synthetic { .. } => gen_synthetic_pair(self),
        }
    }
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(Error::IdxTruncated {
                path: path.display().to_string(),
                needed: buf.len() - filled,
            });
        }
        filled += n;
    }
    Ok(())
}

fn read_u32_be(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact_or_truncated(r, &mut buf, path)?;
    Ok(Cursor::new(buf).read_u32::<BigEndian>()?)
}

/// Record count from an IDX image file header, without reading the body.
pub fn idx_record_count(image_path: &Path) -> Result<usize> {
    let bytes = fs::read(image_path)?;
    let mut cur = Cursor::new(bytes.as_slice());
    let magic = read_u32_be(&mut cur, image_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxBadMagic {
            path: image_path.display().to_string(),
            expected: IDX_IMAGES_MAGIC,
            got: magic,
        });
    }
    Ok(read_u32_be(&mut cur, image_path)? as usize)
}

/// Loads an IDX image/label pair, scales pixels to [0,1], and uniformly
/// subsamples to `subset_size` records with the given generator. Labels
/// are assumed dense; num_classes is the max label in the FULL file plus
/// one so subsampling never changes the class count.
pub fn load_idx(
    image_path: &Path,
    label_path: &Path,
    subset_size: usize,
    rng: &mut Rng,
) -> Result<Dataset> {
    if subset_size == 0 {
        return Err(Error::EmptyInput("idx subset_size".into()));
    }

    let img_bytes = fs::read(image_path)?;
    let mut cur = Cursor::new(img_bytes.as_slice());
    let magic = read_u32_be(&mut cur, image_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxBadMagic {
            path: image_path.display().to_string(),
            expected: IDX_IMAGES_MAGIC,
            got: magic,
        });
    }
    let count = read_u32_be(&mut cur, image_path)? as usize;
    let rows = read_u32_be(&mut cur, image_path)? as usize;
    let cols = read_u32_be(&mut cur, image_path)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "{}: zero image dimensions {rows}x{cols}",
            image_path.display()
        )));
    }
    let mut pixels = vec![0u8; count * rows * cols];
    read_exact_or_truncated(&mut cur, &mut pixels, image_path)?;

    let lbl_bytes = fs::read(label_path)?;
    let mut cur = Cursor::new(lbl_bytes.as_slice());
    let magic = read_u32_be(&mut cur, label_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxBadMagic {
            path: label_path.display().to_string(),
            expected: IDX_LABELS_MAGIC,
            got: magic,
        });
    }
    let label_count = read_u32_be(&mut cur, label_path)? as usize;
    if label_count != count {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let mut labels = vec![0u8; count];
    read_exact_or_truncated(&mut cur, &mut labels, label_path)?;

    if subset_size > count {
        return Err(Error::invalid(format!(
            "subset_size {subset_size} exceeds {count} records in {}",
            image_path.display()
        )));
    }
    let num_classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut picks = rng.sample_indices(count, subset_size);
    picks.sort_unstable();

    let mut images = Vec::with_capacity(subset_size);
    let mut lbls = Vec::with_capacity(subset_size);
    for &i in &picks {
        let raw: Vec<f64> = pixels[i * rows * cols..(i + 1) * rows * cols]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        images.push(Image::from_raw(1, rows, cols, raw)?);
        lbls.push(labels[i] as usize);
    }
    Dataset::new(images, lbls, num_classes)
}

/// Writes a dataset as an IDX image/label file pair (pixels quantized to
/// u8 with round-half-up). Companion to [`load_idx`] for `gen-data`.
pub fn write_idx(data: &Dataset, image_path: &Path, label_path: &Path) -> Result<()> {
    let (c, h, w) = data
        .image_dims()
        .ok_or_else(|| Error::EmptyInput("dataset to write".into()))?;
    if c != 1 {
        return Err(Error::invalid(format!(
            "idx files hold single-channel images, got {c} channels"
        )));
    }
    let mut img = Vec::with_capacity(16 + data.len() * h * w);
    img.write_u32::<BigEndian>(IDX_IMAGES_MAGIC)?;
    img.write_u32::<BigEndian>(data.len() as u32)?;
    img.write_u32::<BigEndian>(h as u32)?;
    img.write_u32::<BigEndian>(w as u32)?;
    for im in data.images() {
        for &p in im.flat() {
            img.push((p * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let mut lbl = Vec::with_capacity(8 + data.len());
    lbl.write_u32::<BigEndian>(IDX_LABELS_MAGIC)?;
    lbl.write_u32::<BigEndian>(data.len() as u32)?;
    for &l in data.labels() {
        if l > u8::MAX as usize {
            return Err(Error::invalid(format!("label {l} does not fit in a byte")));
        }
        lbl.push(l as u8);
    }
    fs::File::create(image_path)?.write_all(&img)?;
    fs::File::create(label_path)?.write_all(&lbl)?;
    Ok(())
}

const STREAM_BASE: u64 = 0x4241_5345;
const STREAM_TRAIN: u64 = 0x5452_4149;
const STREAM_TEST: u64 = 0x5445_5354;

fn synthetic_bases(
    seed: u64,
    num_classes: usize,
    channels: usize,
    image_size: usize,
) -> Result<Vec<Image>> {
    // Low-frequency pattern: a coarse random grid upsampled to full size.
    // Mid-range values leave headroom so noise rarely clamps.
    let grid = (image_size / 4).max(2);
    (0..num_classes)
        .map(|c| {
            let mut rng = Rng::derive(seed, &[STREAM_BASE, c as u64]);
            let mut pixels = Vec::with_capacity(channels * image_size * image_size);
            for _ in 0..channels {
                let coarse: Vec<f64> =
                    (0..grid * grid).map(|_| rng.uniform(0.15, 0.85)).collect();
                pixels.extend(bilinear_upsample(&coarse, grid, image_size, image_size));
            }
            Image::from_raw(channels, image_size, image_size, pixels)
        })
        .collect()
}

fn synthetic_split(
    bases: &[Image],
    per_class: usize,
    noise_std: f64,
    seed: u64,
    stream: u64,
) -> Result<Dataset> {
    let k = bases.len();
    let mut images = Vec::with_capacity(k * per_class);
    let mut labels = Vec::with_capacity(k * per_class);
    for j in 0..per_class {
        for (c, base) in bases.iter().enumerate() {
            let mut rng = Rng::derive(seed, &[stream, c as u64, j as u64]);
            let noisy: Vec<f64> = base
                .flat()
                .iter()
                .map(|&p| (p + noise_std * rng.normal()).clamp(0.0, 1.0))
                .collect();
            let (ch, h, w) = (base.channels(), base.height(), base.width());
            images.push(Image::from_raw(ch, h, w, noisy)?);
            labels.push(c);
        }
    }
    Dataset::new(images, labels, k)
}

/// Train set only; see [`gen_synthetic_pair`] for the train/test pair.
pub fn gen_synthetic(source: &DatasetSource) -> Result<Dataset> {
    gen_synthetic_pair(source).map(|(train, _)| train)
}

/// Generates (train, test): both splits share the per-class base patterns
/// but draw noise from disjoint streams, so the test set is fresh data
/// from the same distribution.
pub fn gen_synthetic_pair(source: &DatasetSource) -> Result<(Dataset, Dataset)> {
    let DatasetSource::Synthetic {
        num_classes,
        samples_per_class,
        image_size,
        channels,
        noise_std,
        seed,
        test_per_class,
    } = source
    else {
        return Err(Error::invalid("gen_synthetic requires a synthetic source"));
    };
    source.validate()?;
    let bases = synthetic_bases(*seed, *num_classes, *channels, *image_size)?;
    let test_n = if *test_per_class == 0 {
        (*samples_per_class / 5).max(1)
    } else {
        *test_per_class
    };
    let train = synthetic_split(&bases, *samples_per_class, *noise_std, *seed, STREAM_TRAIN)?;
    let test = synthetic_split(&bases, test_n, *noise_std, *seed, STREAM_TEST)?;
    Ok((train, test))
}

/// Splits a dataset into disjoint uniform halves whose union is the input.
/// Odd sizes put the extra sample in the first half.
pub fn split_halves(data: &Dataset, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let cut = n.div_ceil(2);
    let mut first: Vec<usize> = order[..cut].to_vec();
    let mut second: Vec<usize> = order[cut..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((data.select(&first), data.select(&second)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;
    use tempfile::tempdir;

    fn tiny_synth(noise: f64, seed: u64) -> DatasetSource {
        DatasetSource::Synthetic {
            num_classes: 3,
            samples_per_class: 8,
            image_size: 8,
            channels: 1,
            noise_std: noise,
            seed,
            test_per_class: 4,
        }
    }

    /// Hand-crafted IDX pair: two 2x3 images and two labels.
    fn fixture_idx(dir: &Path) -> (PathBuf, PathBuf) {
        let img = dir.join("imgs.idx3");
        let lbl = dir.join("lbls.idx1");
        let mut bytes = Vec::new();
        bytes.extend(0x0000_0803u32.to_be_bytes());
        bytes.extend(2u32.to_be_bytes());
        bytes.extend(2u32.to_be_bytes());
        bytes.extend(3u32.to_be_bytes());
        bytes.extend([0, 51, 102, 153, 204, 255]);
        bytes.extend([255, 204, 153, 102, 51, 0]);
        fs::write(&img, bytes).unwrap();
        let mut bytes = Vec::new();
        bytes.extend(0x0000_0801u32.to_be_bytes());
        bytes.extend(2u32.to_be_bytes());
        bytes.extend([7u8, 1u8]);
        fs::write(&lbl, bytes).unwrap();
        (img, lbl)
    }

    #[test]
    fn load_idx_reads_big_endian_fixture() {
        let dir = tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        let mut rng = Rng::new(1);
        let data = load_idx(&img, &lbl, 2, &mut rng).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.image_dims(), Some((1, 2, 3)));
        assert_eq!(data.num_classes(), 8);
        let by_label: Vec<usize> = data.labels().to_vec();
        assert!(by_label.contains(&7) && by_label.contains(&1));
        let first = data.images()[data.labels().iter().position(|&l| l == 7).unwrap()].flat();
        assert_eq!(first[0], 0.0);
        assert_eq!(first[5], 1.0);
        assert!((first[1] - 51.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn load_idx_bad_magic_names_observed_bytes() {
        let dir = tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        let mut bytes = fs::read(&img).unwrap();
        bytes[0] = 0xde;
        fs::write(&img, bytes).unwrap();
        let err = load_idx(&img, &lbl, 1, &mut Rng::new(1)).unwrap_err();
        match err {
            Error::IdxBadMagic { expected, got, .. } => {
                assert_eq!(expected, 0x0000_0803);
                assert_eq!(got, 0xde00_0803);
            }
            e => panic!("wrong error: {e}"),
        }
    }

    #[test]
    fn load_idx_truncation_and_count_mismatch() {
        let dir = tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        let bytes = fs::read(&img).unwrap();
        fs::write(&img, &bytes[..bytes.len() - 2]).unwrap();
        match load_idx(&img, &lbl, 1, &mut Rng::new(1)).unwrap_err() {
            Error::IdxTruncated { needed, .. } => assert_eq!(needed, 2),
            e => panic!("wrong error: {e}"),
        }
        fs::write(&img, &bytes).unwrap();
        let mut lbytes = fs::read(&lbl).unwrap();
        lbytes[4..8].copy_from_slice(&3u32.to_be_bytes());
        fs::write(&lbl, lbytes).unwrap();
        match load_idx(&img, &lbl, 1, &mut Rng::new(1)).unwrap_err() {
            Error::IdxCountMismatch { images, labels } => {
                assert_eq!((images, labels), (2, 3));
            }
            e => panic!("wrong error: {e}"),
        }
    }

    #[test]
    fn load_idx_rejects_zero_and_oversized_subsets() {
        let dir = tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        assert!(matches!(
            load_idx(&img, &lbl, 0, &mut Rng::new(1)),
            Err(Error::EmptyInput(_))
        ));
        assert!(load_idx(&img, &lbl, 3, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn idx_round_trip_within_quantization() {
        let dir = tempdir().unwrap();
        let (train, _) = gen_synthetic_pair(&tiny_synth(0.05, 9)).unwrap();
        let img = dir.path().join("t.idx3");
        let lbl = dir.path().join("t.idx1");
        write_idx(&train, &img, &lbl).unwrap();
        let loaded = load_idx(&img, &lbl, train.len(), &mut Rng::new(1)).unwrap();
        assert_eq!(loaded.len(), train.len());
        // Subsampling with k == n preserves content but may reorder; compare
        // as multisets keyed by label + first pixel.
        let mut a: Vec<(usize, u64)> = train
            .labels()
            .iter()
            .zip(train.images().iter())
            .map(|(&l, im)| (l, (im.flat()[0] * 255.0).round() as u64))
            .collect();
        let mut b: Vec<(usize, u64)> = loaded
            .labels()
            .iter()
            .zip(loaded.images().iter())
            .map(|(&l, im)| (l, (im.flat()[0] * 255.0).round() as u64))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        for im in loaded.images() {
            assert!(im.flat().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_noiseless_collapses() {
        let (a, at) = gen_synthetic_pair(&tiny_synth(0.05, 4)).unwrap();
        let (b, bt) = gen_synthetic_pair(&tiny_synth(0.05, 4)).unwrap();
        assert_eq!(a.labels(), b.labels());
        for (x, y) in a.images().iter().zip(b.images().iter()) {
            assert_eq!(x.flat(), y.flat());
        }
        for (x, y) in at.images().iter().zip(bt.images().iter()) {
            assert_eq!(x.flat(), y.flat());
        }
        // Zero noise: all samples of a class equal the base.
        let (z, _) = gen_synthetic_pair(&tiny_synth(0.0, 4)).unwrap();
        let first_of_class0 = z.images()[z.labels().iter().position(|&l| l == 0).unwrap()].flat();
        for (im, &l) in z.images().iter().zip(z.labels().iter()) {
            if l == 0 {
                assert_eq!(im.flat(), first_of_class0);
            }
        }
        // Different seeds give different bases.
        let (w, _) = gen_synthetic_pair(&tiny_synth(0.0, 5)).unwrap();
        assert_ne!(w.images()[0].flat(), z.images()[0].flat());
    }

    #[test]
    fn synthetic_test_split_differs_from_train() {
        let (train, test) = gen_synthetic_pair(&tiny_synth(0.05, 11)).unwrap();
        assert_eq!(test.len(), 3 * 4);
        assert_eq!(test.num_classes(), 3);
        assert_ne!(train.images()[0].flat(), test.images()[0].flat());
    }

    #[test]
    fn split_halves_partitions_and_handles_odd() {
        let (data, _) = gen_synthetic_pair(&tiny_synth(0.1, 2)).unwrap();
        let (d0, pool) = split_halves(&data, &mut Rng::new(3)).unwrap();
        assert_eq!(d0.len(), 12);
        assert_eq!(pool.len(), 12);
        let mut seen: Vec<u64> = d0
            .images()
            .iter()
            .chain(pool.images().iter())
            .map(|im| im.flat().iter().map(|p| p.to_bits()).fold(0, u64::wrapping_add))
            .collect();
        let mut orig: Vec<u64> = data
            .images()
            .iter()
            .map(|im| im.flat().iter().map(|p| p.to_bits()).fold(0, u64::wrapping_add))
            .collect();
        seen.sort_unstable();
        orig.sort_unstable();
        assert_eq!(seen, orig);

        let odd = data.select(&(0..23).collect::<Vec<_>>());
        let (a, b) = split_halves(&odd, &mut Rng::new(3)).unwrap();
        assert_eq!((a.len(), b.len()), (12, 11));
        let tiny = data.select(&[0]);
        assert!(split_halves(&tiny, &mut Rng::new(3)).is_err());
    }

    #[test]
    fn split_halves_roughly_preserves_class_balance() {
        let src = DatasetSource::Synthetic {
            num_classes: 4,
            samples_per_class: 250,
            image_size: 4,
            channels: 1,
            noise_std: 0.0,
            seed: 8,
            test_per_class: 1,
        };
        let (data, _) = gen_synthetic_pair(&src).unwrap();
        let (d0, _) = split_halves(&data, &mut Rng::new(17)).unwrap();
        for c in 0..4 {
            let got = d0.labels().iter().filter(|&&l| l == c).count() as f64;
            assert!(
                (got - 125.0).abs() <= 25.0,
                "class {c}: {got} of 500 expected near 125"
            );
        }
    }

    #[test]
    fn data_dir_resolution() {
        assert_eq!(
            resolve_data_path(Path::new("/abs/file")),
            PathBuf::from("/abs/file")
        );
        // Relative path without the env var set stays as-is; with it set,
        // the prefix applies. Env mutation is process-global, so restore.
        let key = DATA_DIR_ENV;
        let old = std::env::var_os(key);
        std::env::remove_var(key);
        assert_eq!(resolve_data_path(Path::new("f.idx")), PathBuf::from("f.idx"));
        std::env::set_var(key, "/data/root");
        assert_eq!(
            resolve_data_path(Path::new("f.idx")),
            PathBuf::from("/data/root/f.idx")
        );
        match old {
            Some(v) => std::env::set_var(key, v),
            None => std::env::remove_var(key),
        }
    }

    #[test]
    fn synthetic_source_validation() {
        let mut s = tiny_synth(0.05, 1);
        if let DatasetSource::Synthetic { num_classes, .. } = &mut s {
            *num_classes = 1;
        }
        assert!(s.validate().is_err());
        let mut s = tiny_synth(-0.1, 1);
        assert!(s.validate().is_err());
        s = tiny_synth(0.05, 1);
        assert!(s.validate().is_ok());
    }
}
