//! Dataset ingestion and sequence construction.
//!
//! Images are read from IDX files (MNIST, Fashion-MNIST) or CIFAR-10 binary
//! batches, optionally pooled to a lower resolution, and flattened into causal
//! token sequences with intensities in `[0, 1]`.
//!
//! # Parse error offsets
//!
//! Every [`QlamError::Parse`] carries the byte offset of the first byte that
//! could not be accepted, counted in the decompressed stream:
//!
//! | condition                              | offset                          |
//! |----------------------------------------|---------------------------------|
//! | wrong magic number                     | 0                               |
//! | header shorter than its dimension list | file length                     |
//! | zero-sized image dimension             | offset of that dimension field  |
//! | dimension product overflows            | 4                               |
//! | payload shorter than the header claims | file length                     |
//! | bytes after the declared payload       | declared payload end            |
//! | image/label count mismatch             | 4 (the label count field)       |
//! | label byte above 9                     | offset of that byte             |
//! | CIFAR length not a multiple of 3073    | start of the incomplete record  |

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{QlamError, Result};
use crate::rng::{self, Domain};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;
pub const N_CLASSES: usize = 10;
pub const DEFAULT_FOLDS: usize = 10;
pub const DATA_DIR_ENV: &str = "QLAM_DATA_DIR";

/// A batch of equally sized `u8` images, stored per image as
/// (row, column, channel), plus one label per image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageSet {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.image_len();
        &self.pixels[i * len..(i + 1) * len]
    }

    pub fn image_f64(&self, i: usize) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.image(i).iter().map(|&p| p as f64).collect(),
        }
    }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

fn check_magic(bytes: &[u8], magic: u32, source: &str) -> Result<()> {
    if bytes.len() < 4 {
        return Err(QlamError::parse(
            source,
            bytes.len() as u64,
            "file shorter than the magic number",
        ));
    }
    let found = read_be_u32(bytes, 0);
    if found != magic {
        return Err(QlamError::parse(
            source,
            0,
            format!("magic number {found:#010x}, expected {magic:#010x}"),
        ));
    }
    Ok(())
}

fn read_dims(bytes: &[u8], n_dims: usize, source: &str) -> Result<Vec<usize>> {
    let header = 4 + 4 * n_dims;
    if bytes.len() < header {
        return Err(QlamError::parse(
            source,
            bytes.len() as u64,
            format!("header needs {header} bytes"),
        ));
    }
    Ok((0..n_dims)
        .map(|d| read_be_u32(bytes, 4 + 4 * d) as usize)
        .collect())
}

fn check_payload(bytes: &[u8], start: usize, len: usize, source: &str) -> Result<()> {
    let end = start + len;
    if bytes.len() < end {
        return Err(QlamError::parse(
            source,
            bytes.len() as u64,
            format!("truncated payload, expected {end} bytes"),
        ));
    }
    if bytes.len() > end {
        return Err(QlamError::parse(
            source,
            end as u64,
            "trailing bytes after payload",
        ));
    }
    Ok(())
}

/// Parses an IDX image file (`0x00000803`, dims `[count, rows, cols]`).
/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], source: &str) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC, source)?;
    let dims = read_dims(bytes, 3, source)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    for (d, &v) in dims.iter().enumerate().skip(1) {
        if v == 0 {
            return Err(QlamError::parse(
                source,
                4 + 4 * d as u64,
                "zero image dimension",
            ));
        }
    }
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| QlamError::parse(source, 4, "image dimensions overflow"))?;
    check_payload(bytes, 16, len, source)?;
    Ok((count, rows, cols, bytes[16..].to_vec()))
}

/// Parses an IDX label file (`0x00000801`, dims `[count]`).
pub fn parse_idx_labels(bytes: &[u8], source: &str) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, source)?;
    let count = read_dims(bytes, 1, source)?[0];
    check_payload(bytes, 8, count, source)?;
    let labels = bytes[8..].to_vec();
    check_labels(&labels, 8, 1, source)?;
    Ok(labels)
}

fn check_labels(labels: &[u8], base: usize, stride: usize, source: &str) -> Result<()> {
    if let Some(i) = labels.iter().position(|&l| l as usize >= N_CLASSES) {
        return Err(QlamError::parse(
            source,
            (base + i * stride) as u64,
            format!("label {} outside 0..{N_CLASSES}", labels[i]),
        ));
    }
    Ok(())
}

pub fn write_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(
        pixels.len(),
        count * rows * cols,
        "pixel count does not match dims"
    );
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Reads a file, transparently inflating gzip content.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| QlamError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| QlamError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads a pair of IDX files into an [`ImageSet`].
pub fn load_idx(images: &Path, labels: &Path) -> Result<ImageSet> {
    let img_name = images.display().to_string();
    let lbl_name = labels.display().to_string();
    let (count, rows, cols, pixels) = parse_idx_images(&read_maybe_gz(images)?, &img_name)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels)?, &lbl_name)?;
    if labels.len() != count {
        return Err(QlamError::parse(
            lbl_name,
            4,
            format!("{} labels for {count} images", labels.len()),
        ));
    }
    Ok(ImageSet {
        height: rows,
        width: cols,
        channels: 1,
        pixels,
        labels,
    })
}

/// Parses CIFAR-10 binary records: one label byte, then the 1024-byte red,
/// green and blue planes. Pixels are re-ordered to (row, column, channel).
pub fn parse_cifar10(bytes: &[u8], source: &str) -> Result<ImageSet> {
    let rem = bytes.len() % CIFAR_RECORD_LEN;
    if rem != 0 {
        return Err(QlamError::parse(
            source,
            (bytes.len() - rem) as u64,
            format!(
                "length {} is not a multiple of {CIFAR_RECORD_LEN}",
                bytes.len()
            ),
        ));
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut pixels = vec![0u8; n * 3 * plane];
    let mut labels = Vec::with_capacity(n);
    for (r, (record, out)) in bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .zip(pixels.chunks_exact_mut(3 * plane))
        .enumerate()
    {
        labels.push(record[0]);
        check_labels(&record[..1], r * CIFAR_RECORD_LEN, 1, source)?;
        for c in 0..3 {
            let src = &record[1 + c * plane..1 + (c + 1) * plane];
            for (p, &v) in src.iter().enumerate() {
                out[p * 3 + c] = v;
            }
        }
    }
    Ok(ImageSet {
        height: CIFAR_SIDE,
        width: CIFAR_SIDE,
        channels: 3,
        pixels,
        labels,
    })
}

pub fn write_cifar10(set: &ImageSet) -> Result<Vec<u8>> {
    if (set.height, set.width, set.channels) != (CIFAR_SIDE, CIFAR_SIDE, 3) {
        return Err(QlamError::Shape(format!(
            "CIFAR records are 32x32x3, got {}x{}x{}",
            set.height, set.width, set.channels
        )));
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let mut out = Vec::with_capacity(set.len() * CIFAR_RECORD_LEN);
    for i in 0..set.len() {
        out.push(set.labels[i]);
        let img = set.image(i);
        for c in 0..3 {
            out.extend((0..plane).map(|p| img[p * 3 + c]));
        }
    }
    Ok(out)
}

pub fn load_cifar10_bin(path: &Path) -> Result<ImageSet> {
    parse_cifar10(&read_maybe_gz(path)?, &path.display().to_string())
}

/// Real-valued image in (row, column, channel) order, in raw intensity units.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(QlamError::Shape(format!(
                "{} values for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn at(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    /// Central `size × size` window. Odd margins drop the extra row/column at
    /// the bottom/right.
    pub fn center_crop(&self, size: usize) -> Result<Image> {
        if size > self.height || size > self.width {
            return Err(QlamError::Shape(format!(
                "cannot crop {}x{} to {size}",
                self.height, self.width
            )));
        }
        let top = (self.height - size) / 2;
        let left = (self.width - size) / 2;
        let mut data = Vec::with_capacity(size * size * self.channels);
        for r in top..top + size {
            for c in left..left + size {
                for ch in 0..self.channels {
                    data.push(self.at(r, c, ch));
                }
            }
        }
        Image::new(size, size, self.channels, data)
    }

    /// Zero-pads symmetrically to `size × size`.
    pub fn pad(&self, size: usize) -> Result<Image> {
        if size < self.height || size < self.width {
            return Err(QlamError::Shape(format!(
                "cannot pad {}x{} to {size}",
                self.height, self.width
            )));
        }
        let top = (size - self.height) / 2;
        let left = (size - self.width) / 2;
        let mut data = vec![0.0; size * size * self.channels];
        for r in 0..self.height {
            for c in 0..self.width {
                for ch in 0..self.channels {
                    data[((r + top) * size + c + left) * self.channels + ch] = self.at(r, c, ch);
                }
            }
        }
        Image::new(size, size, self.channels, data)
    }
}

/// Non-overlapping `factor × factor` average pooling per channel.
pub fn downsample(image: &Image, factor: usize) -> Result<Image> {
    if factor == 0 || image.height % factor != 0 || image.width % factor != 0 {
        return Err(QlamError::Shape(format!(
            "{}x{} image is not divisible by factor {factor}",
            image.height, image.width
        )));
    }
    let (h, w, ch) = (image.height / factor, image.width / factor, image.channels);
    let area = (factor * factor) as f64;
    let mut data = vec![0.0; h * w * ch];
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let mut sum = 0.0;
                for dr in 0..factor {
                    for dc in 0..factor {
                        sum += image.at(r * factor + dr, c * factor + dc, k);
                    }
                }
                data[(r * w + c) * ch + k] = sum / area;
            }
        }
    }
    Image::new(h, w, ch, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resize {
    /// Native resolution.
    None,
    /// Center crop to 24×24, then 3×3 pooling to 8×8.
    Crop24Pool3,
    /// Zero pad to 32×32, then 2×2 pooling to 16×16.
    Pad32Pool2,
}

impl Resize {
    pub fn apply(self, image: &Image) -> Result<Image> {
        match self {
            Resize::None => Ok(image.clone()),
            Resize::Crop24Pool3 => downsample(&image.center_crop(24)?, 3),
            Resize::Pad32Pool2 => downsample(&image.pad(32)?, 2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Row-major pixels of a single channel.
    GrayscaleRaster,
    /// The whole red plane in raster order, then green, then blue.
    RgbChannelConcat,
}

/// Flattens an image into tokens, dividing intensities by 255.
pub fn to_sequence(image: &Image, layout: Layout) -> Result<Vec<f64>> {
    let plane = image.height * image.width;
    match layout {
        Layout::GrayscaleRaster => {
            if image.channels != 1 {
                return Err(QlamError::Shape(format!(
                    "grayscale layout needs 1 channel, got {}",
                    image.channels
                )));
            }
            Ok(image.data.iter().map(|v| v / 255.0).collect())
        }
        Layout::RgbChannelConcat => {
            if image.channels != 3 {
                return Err(QlamError::Shape(format!(
                    "rgb layout needs 3 channels, got {}",
                    image.channels
                )));
            }
            let mut out = Vec::with_capacity(3 * plane);
            for c in 0..3 {
                out.extend((0..plane).map(|p| image.data[p * 3 + c] / 255.0));
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    pub tokens: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Smnist,
    Sfashion,
    Scifar10,
    Smnist8,
    Smnist16,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::Smnist,
        DatasetKind::Sfashion,
        DatasetKind::Scifar10,
        DatasetKind::Smnist8,
        DatasetKind::Smnist16,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Smnist => "smnist",
            DatasetKind::Sfashion => "sfashion",
            DatasetKind::Scifar10 => "scifar10",
            DatasetKind::Smnist8 => "smnist8",
            DatasetKind::Smnist16 => "smnist16",
        }
    }

    pub fn seq_len(self) -> usize {
        match self {
            DatasetKind::Smnist | DatasetKind::Sfashion => 784,
            DatasetKind::Scifar10 => 3072,
            DatasetKind::Smnist8 => 64,
            DatasetKind::Smnist16 => 256,
        }
    }

    pub fn resize(self) -> Resize {
        match self {
            DatasetKind::Smnist8 => Resize::Crop24Pool3,
            DatasetKind::Smnist16 => Resize::Pad32Pool2,
            _ => Resize::None,
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            DatasetKind::Scifar10 => Layout::RgbChannelConcat,
            _ => Layout::GrayscaleRaster,
        }
    }

    pub fn is_cifar(self) -> bool {
        self == DatasetKind::Scifar10
    }

    /// Sub-directory of the data root holding the raw files.
    pub fn subdir(self) -> &'static str {
        match self {
            DatasetKind::Smnist | DatasetKind::Smnist8 | DatasetKind::Smnist16 => "mnist",
            DatasetKind::Sfashion => "fashion-mnist",
            DatasetKind::Scifar10 => "cifar-10-batches-bin",
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = QlamError;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| QlamError::Config(format!("unknown dataset {s:?}")))
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Data root: explicit path, else `$QLAM_DATA_DIR`, else `./data`.
pub fn data_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("data"),
    }
}

fn find_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(QlamError::io(
        plain,
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "dataset file not found (also tried .gz)",
        ),
    ))
}

/// Loads the raw images of one split.
pub fn load_images(kind: DatasetKind, root: &Path, split: Split) -> Result<ImageSet> {
    let dir = root.join(kind.subdir());
    if kind.is_cifar() {
        let files: Vec<String> = match split {
            Split::Train => (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
            Split::Test => vec!["test_batch.bin".into()],
        };
        let mut all: Option<ImageSet> = None;
        for f in files {
            let part = load_cifar10_bin(&find_file(&dir, &f)?)?;
            match all.as_mut() {
                None => all = Some(part),
                Some(acc) => {
                    acc.pixels.extend_from_slice(&part.pixels);
                    acc.labels.extend_from_slice(&part.labels);
                }
            }
        }
        Ok(all.expect("at least one batch file"))
    } else {
        let prefix = match split {
            Split::Train => "train",
            Split::Test => "t10k",
        };
        load_idx(
            &find_file(&dir, &format!("{prefix}-images-idx3-ubyte"))?,
            &find_file(&dir, &format!("{prefix}-labels-idx1-ubyte"))?,
        )
    }
}

/// Converts selected images of a set into token sequences.
pub fn to_samples(
    kind: DatasetKind,
    set: &ImageSet,
    indices: &[usize],
) -> Result<Vec<SequenceSample>> {
    indices
        .iter()
        .map(|&i| {
            let img = kind.resize().apply(&set.image_f64(i))?;
            let tokens = to_sequence(&img, kind.layout())?;
            if tokens.len() != kind.seq_len() {
                return Err(QlamError::Shape(format!(
                    "{kind} expects {} tokens, image gives {}",
                    kind.seq_len(),
                    tokens.len()
                )));
            }
            Ok(SequenceSample {
                tokens,
                label: set.labels[i] as usize,
            })
        })
        .collect()
}

/// Seeded selection of `count` indices out of `0..n`, in ascending order.
/// `count >= n` keeps everything.
pub fn subsample(n: usize, count: usize, seed: u64, salt: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(Domain::Subsample, seed, salt, 0, 0));
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

/// Held-out test index lists over a seeded permutation; fold `k` tests on the
/// `k`-th contiguous slice and trains on the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub test_folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn test(&self, fold: usize) -> Result<&[usize]> {
        self.test_folds
            .get(fold)
            .map(Vec::as_slice)
            .ok_or_else(|| QlamError::Index(format!("fold {fold} of {}", self.n_folds)))
    }

    pub fn train(&self, fold: usize) -> Result<Vec<usize>> {
        self.test(fold)?;
        let mut out: Vec<usize> = self
            .test_folds
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

pub fn make_folds(n_samples: usize, seed: u64) -> Result<FoldPlan> {
    make_k_folds(n_samples, DEFAULT_FOLDS, seed)
}

/// Sizes differ by at most one; the first `n % k` folds get the extra sample.
pub fn make_k_folds(n_samples: usize, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 || n_folds > n_samples {
        return Err(QlamError::Config(format!(
            "{n_folds} folds over {n_samples} samples"
        )));
    }
    let mut perm: Vec<usize> = (0..n_samples).collect();
    perm.shuffle(&mut rng::stream(
        Domain::Folds,
        seed,
        n_samples as u64,
        n_folds as u64,
        0,
    ));
    let base = n_samples / n_folds;
    let extra = n_samples % n_folds;
    let mut test_folds = Vec::with_capacity(n_folds);
    let mut start = 0;
    for k in 0..n_folds {
        let len = base + usize::from(k < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        test_folds.push(fold);
        start += len;
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        test_folds,
    })
}
