//! Grayscale image ingestion and resizing.
//!
//! PGM (P2 ASCII / P5 binary) is the only supported format so parsing stays
//! bit-exact and dependency-free. Every image entering the pipeline is
//! resized to a fixed canonical square so descriptor cell geometry is
//! uniform across the dataset.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Default canonical side length for ingested images.
pub const DEFAULT_CANONICAL_SIZE: usize = 128;

/// Row-major luminance raster with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pgm parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid image dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("pixel value {value} out of [0,1]")]
    PixelOutOfRange { value: f64 },
    #[error("pixel buffer length {got} does not match {width}x{height}")]
    LengthMismatch { width: usize, height: usize, got: usize },
    #[error("resize target {0}x{1} below minimum 2x2")]
    ResizeTargetTooSmall(usize, usize),
    #[error("dataset root {0} is empty or has no class directories")]
    EmptyRoot(PathBuf),
    #[error("class directory {0} contains no .pgm files")]
    EmptyClass(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("in file {path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<ImageError>,
    },
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::BadDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                got: pixels.len(),
            });
        }
        for &p in &pixels {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(ImageError::PixelOutOfRange { value: p });
            }
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Sample with coordinates clamped to the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

/// Labelled image collection; `samples` hold indices into `classes`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub samples: Vec<(GrayImage, usize)>,
}

impl Dataset {
    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|(_, l)| *l).collect()
    }
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ImageError> {
        Err(ImageError::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_whitespace_and_comments(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u64, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.err(format!("expected {what}"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<u64>()
            .map_err(|_| ImageError::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Parse a PGM file (magic `P2` ASCII or `P5` binary, maxval <= 65535).
/// Pixel value `v` with maxval `m` maps to `v / m` exactly.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut cur = PgmCursor { bytes, pos: 0 };
    if bytes.len() < 2 {
        return cur.err("truncated header, missing magic");
    }
    let binary = match &bytes[0..2] {
        b"P2" => false,
        b"P5" => true,
        _ => return cur.err("malformed magic, expected P2 or P5"),
    };
    cur.pos = 2;
    let width = cur.read_uint("width")? as usize;
    let height = cur.read_uint("height")? as usize;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::BadDimensions { width, height });
    }
    if maxval == 0 || maxval > 65535 {
        return cur.err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from raster data.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return cur.err("expected single whitespace before binary raster");
        }
        cur.pos += 1;
        let bytes_per = if maxval > 255 { 2 } else { 1 };
        let need = count * bytes_per;
        if bytes.len() - cur.pos < need {
            cur.pos = bytes.len();
            return cur.err("pixel count mismatch: raster truncated");
        }
        for i in 0..count {
            let v = if bytes_per == 2 {
                // Big-endian per netpbm.
                let hi = bytes[cur.pos + 2 * i] as u64;
                let lo = bytes[cur.pos + 2 * i + 1] as u64;
                (hi << 8) | lo
            } else {
                bytes[cur.pos + i] as u64
            };
            if v > maxval {
                cur.pos += i * bytes_per;
                return cur.err(format!("pixel value {v} > maxval {maxval}"));
            }
            pixels.push(v as f64 / maxval as f64);
        }
    } else {
        for _ in 0..count {
            cur.skip_whitespace_and_comments();
            if cur.pos >= bytes.len() {
                return cur.err("pixel count mismatch: too few values");
            }
            let at = cur.pos;
            let v = cur.read_uint("pixel value")?;
            if v > maxval {
                cur.pos = at;
                return cur.err(format!("pixel value {v} > maxval {maxval}"));
            }
            pixels.push(v as f64 / maxval as f64);
        }
        cur.skip_whitespace_and_comments();
        if cur.pos < bytes.len() {
            return cur.err("pixel count mismatch: trailing data");
        }
    }
    GrayImage::new(width, height, pixels)
}

/// Write a P2 PGM with maxval 255; values are rounded to the nearest level.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width(), img.height());
    for (i, &p) in img.pixels().iter().enumerate() {
        let v = (p * 255.0).round() as u32;
        out.push_str(&v.to_string());
        if (i + 1) % img.width() == 0 {
            out.push('\n');
        } else {
            out.push(' ');
        }
    }
    out.into_bytes()
}

/// Bilinear resize with pixel-center alignment. Output values stay within
/// the input's [min, max] range.
pub fn resize_bilinear(
    img: &GrayImage,
    target_w: usize,
    target_h: usize,
) -> Result<GrayImage, ImageError> {
    if target_w < 2 || target_h < 2 {
        return Err(ImageError::ResizeTargetTooSmall(target_w, target_h));
    }
    if target_w == img.width() && target_h == img.height() {
        return Ok(img.clone());
    }
    let sx = img.width() as f64 / target_w as f64;
    let sy = img.height() as f64 / target_h as f64;
    let mut pixels = Vec::with_capacity(target_w * target_h);
    for ty in 0..target_h {
        let src_y = ((ty as f64 + 0.5) * sy - 0.5).clamp(0.0, img.height() as f64 - 1.0);
        let y0 = src_y.floor() as usize;
        let y1 = (y0 + 1).min(img.height() - 1);
        let fy = src_y - y0 as f64;
        for tx in 0..target_w {
            let src_x = ((tx as f64 + 0.5) * sx - 0.5).clamp(0.0, img.width() as f64 - 1.0);
            let x0 = src_x.floor() as usize;
            let x1 = (x0 + 1).min(img.width() - 1);
            let fx = src_x - x0 as f64;
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bot = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            let v = top * (1.0 - fy) + bot * fy;
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(target_w, target_h, pixels)
}

/// Load a dataset tree `root/<class_name>/<file>.pgm`.
///
/// Classes are sorted lexicographically and samples by (class, filename), so
/// two runs over the same tree produce identical ordering. Every image is
/// resized to `canonical_size` x `canonical_size`.
pub fn ingest_directory(root: &Path, canonical_size: usize) -> Result<Dataset, ImageError> {
    let read_dir = |p: &Path| {
        fs::read_dir(p).map_err(|e| ImageError::Io {
            path: p.to_path_buf(),
            source: e,
        })
    };
    let mut class_dirs: Vec<PathBuf> = Vec::new();
    for entry in read_dir(root)? {
        let entry = entry.map_err(|e| ImageError::Io {
            path: root.to_path_buf(),
            source: e,
        })?;
        if entry.path().is_dir() {
            class_dirs.push(entry.path());
        }
    }
    if class_dirs.is_empty() {
        return Err(ImageError::EmptyRoot(root.to_path_buf()));
    }
    class_dirs.sort();
    let mut classes = Vec::new();
    let mut samples = Vec::new();
    for (class_idx, dir) in class_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = Vec::new();
        for entry in read_dir(dir)? {
            let entry = entry.map_err(|e| ImageError::Io {
                path: dir.clone(),
                source: e,
            })?;
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "pgm") {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(ImageError::EmptyClass(dir.clone()));
        }
        files.sort();
        for file in files {
            let bytes = fs::read(&file).map_err(|e| ImageError::Io {
                path: file.clone(),
                source: e,
            })?;
            let img = load_pgm(&bytes).map_err(|e| ImageError::InFile {
                path: file.clone(),
                source: Box::new(e),
            })?;
            let img = resize_bilinear(&img, canonical_size, canonical_size)?;
            samples.push((img, class_idx));
        }
        classes.push(name);
    }
    Ok(Dataset { classes, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, px: &[f64]) -> GrayImage {
        GrayImage::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn parse_p2_scales_by_maxval() {
        let g = load_pgm(b"P2\n2 2\n255\n0 255 128 64\n").unwrap();
        assert_eq!(g.width(), 2);
        assert_eq!(g.height(), 2);
        assert_eq!(g.pixels(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn parse_p5_matches_p2() {
        let ascii = load_pgm(b"P2\n2 2\n255\n0 255 128 64\n").unwrap();
        let mut bin = b"P5\n2 2\n255\n".to_vec();
        bin.extend_from_slice(&[0, 255, 128, 64]);
        let binary = load_pgm(&bin).unwrap();
        assert_eq!(ascii, binary);
    }

    #[test]
    fn parse_p5_sixteen_bit() {
        let mut bin = b"P5\n1 2\n65535\n".to_vec();
        bin.extend_from_slice(&[0xFF, 0xFF, 0x00, 0x01]);
        let g = load_pgm(&bin).unwrap();
        assert_eq!(g.pixels(), &[1.0, 1.0 / 65535.0]);
    }

    #[test]
    fn parse_honors_comments() {
        let g = load_pgm(b"P2\n# a comment\n2 1 # inline\n255\n7 9\n").unwrap();
        assert_eq!(g.pixels(), &[7.0 / 255.0, 9.0 / 255.0]);
    }

    #[test]
    fn pixel_count_mismatch_is_an_error() {
        let err = load_pgm(b"P2\n2 2\n255\n0 255 128\n").unwrap_err();
        assert!(err.to_string().contains("pixel count mismatch"), "{err}");
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let err = load_pgm(b"P7\n2 2\n255\n0 0 0 0\n").unwrap_err();
        match err {
            ImageError::Parse { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn value_above_maxval_rejected() {
        let err = load_pgm(b"P2\n1 1\n100\n101\n").unwrap_err();
        assert!(err.to_string().contains("> maxval"), "{err}");
    }

    #[test]
    fn roundtrip_p2_at_format_precision() {
        let px: Vec<f64> = (0..16).map(|i| (i * 17) as f64 / 255.0).collect();
        let original = img(4, 4, &px);
        let reparsed = load_pgm(&write_pgm(&original)).unwrap();
        assert_eq!(original, reparsed);
    }

    #[test]
    fn resize_identity() {
        let g = img(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let r = resize_bilinear(&g, 3, 2).unwrap();
        assert_eq!(g, r);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let g = img(4, 4, &[0.5; 16]);
        let r = resize_bilinear(&g, 7, 3).unwrap();
        for &p in r.pixels() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn resize_two_to_three_pixel_centers() {
        // Height 1 targets are rejected, so run the 2x1 case on two rows.
        let g = img(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let r = resize_bilinear(&g, 3, 2).unwrap();
        assert_eq!(&r.pixels()[0..3], &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn resize_bounds_preserved() {
        let g = img(3, 3, &[0.2, 0.9, 0.4, 0.3, 0.8, 0.5, 0.2, 0.6, 0.7]);
        let r = resize_bilinear(&g, 8, 8).unwrap();
        for &p in r.pixels() {
            assert!((0.2..=0.9).contains(&p));
        }
    }

    #[test]
    fn resize_target_too_small() {
        let g = img(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        assert!(resize_bilinear(&g, 1, 5).is_err());
    }

    fn write_tree(root: &Path) {
        for (class, n) in [("cat", 2), ("dog", 2)] {
            let dir = root.join(class);
            fs::create_dir_all(&dir).unwrap();
            for i in 0..n {
                let val = 40 * i;
                fs::write(
                    dir.join(format!("img{i}.pgm")),
                    format!("P2\n2 2\n255\n{v} {v} {v} {v}\n", v = val),
                )
                .unwrap();
            }
        }
    }

    #[test]
    fn ingest_sorts_classes_and_samples() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path());
        let ds = ingest_directory(tmp.path(), 8).unwrap();
        assert_eq!(ds.classes, vec!["cat", "dog"]);
        assert_eq!(ds.samples.len(), 4);
        assert_eq!(ds.labels(), vec![0, 0, 1, 1]);
        assert_eq!(ds.samples[0].0.width(), 8);
    }

    #[test]
    fn ingest_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        write_tree(tmp.path());
        let a = ingest_directory(tmp.path(), 8).unwrap();
        let b = ingest_directory(tmp.path(), 8).unwrap();
        assert_eq!(a.classes, b.classes);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1, y.1);
        }
    }

    #[test]
    fn ingest_single_class_accepted() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("only");
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("a.pgm"), "P2\n2 2\n255\n1 2 3 4\n").unwrap();
        let ds = ingest_directory(tmp.path(), 4).unwrap();
        assert_eq!(ds.classes.len(), 1);
    }

    #[test]
    fn ingest_corrupt_file_names_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bad");
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("broken.pgm"), "P2\n2 2\n255\n1 2\n").unwrap();
        let err = ingest_directory(tmp.path(), 4).unwrap_err();
        assert!(err.to_string().contains("broken.pgm"), "{err}");
    }

    #[test]
    fn ingest_empty_root_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_directory(tmp.path(), 4),
            Err(ImageError::EmptyRoot(_))
        ));
    }
}
