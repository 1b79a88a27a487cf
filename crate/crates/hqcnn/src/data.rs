//! BreakHis-style dataset ingestion: filename convention, directory scan,
//! image loading and split manifests.
//!
//! Image files are named `SOB_<B|M>_<subtype>-<slide>-<magnification>-<seq>.<ext>`,
//! e.g. `SOB_B_A-14-22549AB-400-002.png`, where the slide id itself contains
//! a dash (`14-22549AB`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hqcnn_core::split::SplitName;
use hqcnn_core::synth::SyntheticSample;
use hqcnn_core::{Class, Tensor};
use image::imageops::{self, FilterType};
use image::DynamicImage;

use crate::error::{Error, Result};

pub const MAGNIFICATIONS: [u32; 4] = [40, 100, 200, 400];
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SampleRecord {
    /// Path relative to the dataset root, with `/` separators.
    pub path: PathBuf,
    pub label: Class,
    pub subtype: String,
    pub slide: String,
    pub magnification: u32,
    pub sequence: u32,
    pub extension: String,
}

impl SampleRecord {
    /// Parses a bare file name. Returns `None` if it does not follow the
    /// convention.
    pub fn parse_file_name(name: &str) -> Option<SampleRecord> {
        let (stem, extension) = name.rsplit_once('.')?;
        if !IMAGE_EXTENSIONS.contains(&extension.to_ascii_lowercase().as_str()) {
            return None;
        }
        let rest = stem.strip_prefix("SOB_")?;
        let (tag, rest) = rest.split_once('_')?;
        let label = match tag {
            "B" => Class::Benign,
            "M" => Class::Malignant,
            _ => return None,
        };
        let mut tail = rest.rsplitn(3, '-');
        let sequence = tail.next()?;
        let magnification = tail.next()?;
        let (subtype, slide) = tail.next()?.split_once('-')?;
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(sequence) || !digits(magnification) || subtype.is_empty() || slide.is_empty() {
            return None;
        }
        if !subtype.bytes().all(|b| b.is_ascii_alphabetic()) {
            return None;
        }
        let magnification: u32 = magnification.parse().ok()?;
        if !MAGNIFICATIONS.contains(&magnification) {
            return None;
        }
        Some(SampleRecord {
            path: PathBuf::from(name),
            label,
            subtype: subtype.to_string(),
            slide: slide.to_string(),
            magnification,
            sequence: sequence.parse().ok()?,
            extension: extension.to_string(),
        })
    }

    /// The conventional file name; sequences are zero-padded to three digits.
    pub fn file_name(&self) -> String {
        let tag = match self.label {
            Class::Benign => 'B',
            Class::Malignant => 'M',
        };
        format!(
            "SOB_{tag}_{}-{}-{}-{:03}.{}",
            self.subtype, self.slide, self.magnification, self.sequence, self.extension
        )
    }

    pub fn id(&self) -> String {
        path_string(&self.path)
    }
}

fn path_string(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, Default)]
pub struct ScanResult {
    /// Matching records, sorted by relative path.
    pub records: Vec<SampleRecord>,
    /// Files that do not follow the naming convention.
    pub rejected: Vec<PathBuf>,
    /// Conforming files skipped by the magnification filter.
    pub other_magnification: usize,
}

impl ScanResult {
    pub fn count(&self, label: Class) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }
}

/// Recursively scans `root` for conforming image files at `magnification`.
pub fn scan_dataset(root: &Path, magnification: u32) -> Result<ScanResult> {
    let mut result = ScanResult::default();
    for entry in walkdir::WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::Io {
                path,
                source: e
                    .into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("directory walk failed")),
            }
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let relative = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .to_path_buf();
        let parsed = entry
            .file_name()
            .to_str()
            .and_then(SampleRecord::parse_file_name);
        match parsed {
            Some(record) if record.magnification == magnification => {
                result.records.push(SampleRecord {
                    path: relative,
                    ..record
                });
            }
            Some(_) => result.other_magnification += 1,
            None => result.rejected.push(relative),
        }
    }
    if result.records.is_empty() {
        return Err(Error::Core(hqcnn_core::Error::EmptyDataset));
    }
    result.records.sort_by_key(|a| a.id());
    result.rejected.sort();
    Ok(result)
}

/// Decodes an 8-bit RGB (or grayscale, replicated) image, resizes it to
/// `size x size` with a bilinear filter and scales values to `[0, 1]`.
pub fn load_image(path: &Path, size: u32) -> Result<Tensor> {
    let fail = |reason: String| Error::Image {
        path: path.to_path_buf(),
        reason,
    };
    let decoded = image::ImageReader::open(path)
        .map_err(Error::io(path))?
        .with_guessed_format()
        .map_err(Error::io(path))?
        .decode()
        .map_err(|e| fail(e.to_string()))?;
    let rgb = match decoded {
        DynamicImage::ImageRgb8(img) => img,
        DynamicImage::ImageLuma8(_) => decoded.to_rgb8(),
        other => {
            return Err(fail(format!(
                "unsupported pixel format {:?}",
                other.color()
            )))
        }
    };
    Ok(rgb_to_tensor(&rgb, size))
}

fn rgb_to_tensor(rgb: &image::RgbImage, size: u32) -> Tensor {
    let float = DynamicImage::ImageRgb8(rgb.clone()).into_rgb32f();
    let resized = if float.dimensions() == (size, size) {
        float
    } else {
        imageops::resize(&float, size, size, FilterType::Triangle)
    };
    let plane = (size * size) as usize;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, px) in resized.pixels().enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px.0[c].clamp(0.0, 1.0);
        }
    }
    Tensor::from_vec(&[3, size as usize, size as usize], data).expect("3 x size x size")
}

/// Quantizes a `3 x H x W` tensor in `[0, 1]` to an 8-bit RGB image.
pub fn tensor_to_rgb(image: &Tensor) -> image::RgbImage {
    let [_, h, w] = image.shape() else {
        panic!("expected a 3 x H x W tensor");
    };
    let (h, w) = (*h, *w);
    let d = image.data();
    image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        image::Rgb(std::array::from_fn(|c| {
            (d[c * h * w + i] * 255.0).round().clamp(0.0, 255.0) as u8
        }))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Class,
    pub split: SplitName,
}

/// Stratified 3:1:1 split of scanned records into manifest entries, in
/// record order.
pub fn split_records(records: &[SampleRecord], seed: u64) -> Result<Vec<ManifestEntry>> {
    let assignment =
        hqcnn_core::split::assign(&records.iter().map(|r| r.label).collect::<Vec<_>>(), seed)?;
    Ok(records
        .iter()
        .zip(assignment)
        .map(|(r, split)| ManifestEntry {
            path: r.id(),
            label: r.label,
            split,
        })
        .collect())
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let _ = writeln!(out, "{}\t{}\t{}", e.path, e.label, e.split);
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || Error::Data(format!("manifest line {}: `{line}`", n + 1));
            let mut f = line.split('\t');
            let (Some(path), Some(label), Some(split), None) =
                (f.next(), f.next(), f.next(), f.next())
            else {
                return Err(bad());
            };
            Ok(ManifestEntry {
                path: path.to_string(),
                label: Class::from_name(label).ok_or_else(bad)?,
                split: SplitName::from_name(split).ok_or_else(bad)?,
            })
        })
        .collect()
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    fs::write(path, render_manifest(entries)).map_err(Error::io(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&fs::read_to_string(path).map_err(Error::io(path))?)
}

/// Writes synthetic samples as PNG files following the naming convention,
/// under `root/benign` and `root/malignant`. Returns the written paths.
pub fn write_synthetic(
    root: &Path,
    samples: &[SyntheticSample],
    seed: u64,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(samples.len());
    let mut sequence = [0u32; 2];
    for sample in samples {
        let dir = root.join(sample.class.name());
        fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        sequence[sample.class.index()] += 1;
        let record = SampleRecord {
            path: PathBuf::new(),
            label: sample.class,
            subtype: "SYN".into(),
            slide: format!("00-{seed}"),
            magnification: 400,
            sequence: sequence[sample.class.index()],
            extension: "png".into(),
        };
        let path = dir.join(record.file_name());
        tensor_to_rgb(&sample.image)
            .save(&path)
            .map_err(|e| Error::Image {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_reference_names() {
        let b = SampleRecord::parse_file_name("SOB_B_A-14-22549AB-400-002.png").unwrap();
        assert_eq!(b.label, Class::Benign);
        assert_eq!(b.magnification, 400);
        assert_eq!(b.sequence, 2);
        assert_eq!(b.subtype, "A");
        assert_eq!(b.slide, "14-22549AB");
        let m = SampleRecord::parse_file_name("SOB_M_DC-14-3909-400-007.png").unwrap();
        assert_eq!(m.label, Class::Malignant);
        assert_eq!(m.subtype, "DC");
    }

    #[test]
    fn file_names_round_trip() {
        for name in [
            "SOB_B_A-14-22549AB-400-002.png",
            "SOB_M_DC-14-3909-400-007.png",
            "SOB_M_MC-14-13418DE-100-012.png",
            "SOB_B_PT-14-21998AB-40-033.png",
        ] {
            assert_eq!(
                SampleRecord::parse_file_name(name).unwrap().file_name(),
                name
            );
        }
    }

    #[test]
    fn rejects_malformed_names() {
        for name in [
            "SOB_X_A-14-22549AB-400-002.png",
            "SOB_B_A-14-22549AB-300-002.png",
            "SOB_B_A-14-22549AB-400-00x.png",
            "SOB_B_A-400-002.png",
            "SOB_B_A-14-22549AB-400-002.txt",
            "IMG_0001.png",
            "SOB_B_A-14-22549AB-400-002",
        ] {
            assert!(SampleRecord::parse_file_name(name).is_none(), "{name}");
        }
    }

    #[test]
    fn manifest_round_trips() {
        let entries = vec![
            ManifestEntry {
                path: "benign/a.png".into(),
                label: Class::Benign,
                split: SplitName::Train,
            },
            ManifestEntry {
                path: "malignant/b.png".into(),
                label: Class::Malignant,
                split: SplitName::Test,
            },
        ];
        let text = render_manifest(&entries);
        assert_eq!(
            text,
            "benign/a.png\tbenign\ttrain\nmalignant/b.png\tmalignant\ttest\n"
        );
        assert_eq!(parse_manifest(&text).unwrap(), entries);
        assert!(parse_manifest("a.png\tbenign").is_err());
        assert!(parse_manifest("a.png\tother\ttrain").is_err());
    }
}
