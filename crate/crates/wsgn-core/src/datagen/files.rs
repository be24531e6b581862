//! Binary feature containers and the plain-text dataset manifest.
//!
//! Feature files hold one matrix each: a six-byte magic, two little-endian
//! u32 dimensions, then the values row-major. The `WSGNF1` container stores
//! single precision and is the interchange format for extracted features; the
//! `WSGNF2` container is identical but double precision, used for score dumps
//! where quantization would break downstream comparisons.
//!
//! A manifest is line-oriented text: a header line with split, fps, and class
//! count, then one whitespace-separated record of key=value tokens per video.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diffcore::Matrix;
use crate::error::{Error, Result};

use super::{Dataset, FeatureSequence, GtSegment, Split};

const MAGIC_F32: &[u8; 6] = b"WSGNF1";
const MAGIC_F64: &[u8; 6] = b"WSGNF2";
const HEADER_LEN: usize = 14;

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn format_error(path: &Path, offset: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path_str(path),
        offset: offset as u64,
        detail: detail.into(),
    }
}

fn encode_features(matrix: &Matrix, magic: &[u8; 6], wide: bool) -> Result<Vec<u8>> {
    let rows = u32::try_from(matrix.rows()).map_err(|_| Error::DimensionMismatch {
        op: "write_features",
        detail: format!("row count {} exceeds the format limit", matrix.rows()),
    })?;
    let cols = u32::try_from(matrix.cols()).map_err(|_| Error::DimensionMismatch {
        op: "write_features",
        detail: format!("column count {} exceeds the format limit", matrix.cols()),
    })?;
    let value_size = if wide { 8 } else { 4 };
    let mut bytes = Vec::with_capacity(HEADER_LEN + matrix.data().len() * value_size);
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&rows.to_le_bytes());
    bytes.extend_from_slice(&cols.to_le_bytes());
    for &v in matrix.data() {
        if wide {
            bytes.extend_from_slice(&v.to_le_bytes());
        } else {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(bytes)
}

fn decode_features(path: &Path, bytes: &[u8], magic: &[u8; 6], wide: bool) -> Result<Matrix> {
    if bytes.len() < 6 || &bytes[..6] != magic {
        return Err(format_error(
            path,
            0,
            format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap()),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(format_error(path, bytes.len(), "file ends inside the header"));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let value_size = if wide { 8 } else { 4 };
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(value_size))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| format_error(path, 6, format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() < payload {
        return Err(format_error(
            path,
            bytes.len(),
            format!("truncated: header declares {payload} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes.len() > payload {
        return Err(format_error(
            path,
            payload,
            format!("{} trailing bytes after the declared payload", bytes.len() - payload),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut offset = HEADER_LEN;
    for _ in 0..rows * cols {
        if wide {
            data.push(f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()));
        } else {
            data.push(f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as f64);
        }
        offset += value_size;
    }
    Matrix::from_vec(rows, cols, data)
}

/// Writes a matrix as a single-precision `WSGNF1` feature file. Values must
/// already be single precision for the round trip to be bit exact; generated
/// features satisfy this by construction.
pub fn write_features(path: impl AsRef<Path>, matrix: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_features(matrix, MAGIC_F32, false)?;
    fs::write(path, bytes).map_err(|e| Error::io(path_str(path), e))
}

/// Reads a `WSGNF1` feature file back into a matrix.
pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    decode_features(path, &bytes, MAGIC_F32, false)
}

/// Writes a matrix as a double-precision `WSGNF2` file; bit exact for any
/// finite or special value including negative zero and subnormals.
pub fn write_features_f64(path: impl AsRef<Path>, matrix: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_features(matrix, MAGIC_F64, true)?;
    fs::write(path, bytes).map_err(|e| Error::io(path_str(path), e))
}

/// Reads a `WSGNF2` file back into a matrix.
pub fn read_features_f64(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path_str(path), e))?;
    decode_features(path, &bytes, MAGIC_F64, true)
}

/// Conventional relative location of a video's feature file next to its
/// manifest.
pub fn feature_file_name(video_id: &str) -> PathBuf {
    PathBuf::from("features").join(format!("{video_id}.wsgnf"))
}

fn render_manifest(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "split={} fps={} classes={}\n",
        dataset.split, dataset.fps, dataset.num_classes
    ));
    for video in &dataset.videos {
        let labels = video.labeled_classes();
        let label_text = if labels.is_empty() {
            "-".to_string()
        } else {
            labels.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",")
        };
        let segment_text = if video.gt_segments.is_empty() {
            "-".to_string()
        } else {
            video
                .gt_segments
                .iter()
                .map(|s| format!("{}:{}:{}", s.class_id, s.start, s.end))
                .collect::<Vec<_>>()
                .join(";")
        };
        out.push_str(&format!(
            "id={} features={} labels={} segments={}\n",
            video.id,
            feature_file_name(&video.id).display(),
            label_text,
            segment_text
        ));
    }
    out
}

/// Writes the manifest text file for a dataset. Feature files are referenced
/// at their conventional relative paths but not written; see `write_dataset`.
pub fn write_manifest(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_manifest(dataset)).map_err(|e| Error::io(path_str(path), e))
}

/// Writes a dataset directory: every video's features under `features/` plus
/// a `manifest.txt` tying them together.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir).map_err(|e| Error::io(path_str(&feature_dir), e))?;
    for video in &dataset.videos {
        write_features(dir.join(feature_file_name(&video.id)), &video.features)?;
    }
    let manifest = dir.join("manifest.txt");
    write_manifest(&manifest, dataset)?;
    Ok(manifest)
}

fn validation_error(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Validation {
        path: path_str(path),
        line,
        detail: detail.into(),
    }
}

fn parse_record<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    required: &[&str],
) -> Result<HashMap<&'a str, &'a str>> {
    let mut fields = HashMap::new();
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| validation_error(path, line_no, format!("token {token:?} is not key=value")))?;
        if fields.insert(key, value).is_some() {
            return Err(validation_error(path, line_no, format!("duplicate key {key:?}")));
        }
    }
    for &key in required {
        if !fields.contains_key(key) {
            return Err(validation_error(path, line_no, format!("missing key {key:?}")));
        }
    }
    Ok(fields)
}

fn parse_number<T: std::str::FromStr>(
    path: &Path,
    line_no: usize,
    key: &str,
    value: &str,
) -> Result<T> {
    value
        .parse()
        .map_err(|_| validation_error(path, line_no, format!("cannot parse {key}={value:?}")))
}

/// Reads a manifest and every feature file it references. Returns the dataset
/// together with warnings for videos whose weak labels have no matching
/// segment even though other segments are listed; such videos are legal (real
/// data often lacks boundaries) but worth surfacing.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<(Dataset, Vec<String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| validation_error(path, 1, "missing header line"))?;
    let fields = parse_record(path, 1, header, &["split", "fps", "classes"])?;
    let split: Split = parse_number(path, 1, "split", fields["split"])?;
    let fps: f64 = parse_number(path, 1, "fps", fields["fps"])?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(validation_error(path, 1, format!("fps must be positive, got {fps}")));
    }
    let num_classes: usize = parse_number(path, 1, "classes", fields["classes"])?;
    if num_classes == 0 {
        return Err(validation_error(path, 1, "classes must be at least 1"));
    }

    let mut videos = Vec::new();
    let mut warnings = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = parse_record(path, line_no, line, &["id", "features", "labels", "segments"])?;
        let id = fields["id"].to_string();

        let mut labels = vec![0.0; num_classes];
        if fields["labels"] != "-" {
            for token in fields["labels"].split(',') {
                let q: usize = parse_number(path, line_no, "labels", token)?;
                if q >= num_classes {
                    return Err(validation_error(
                        path,
                        line_no,
                        format!("label class {q} out of range for {num_classes} classes"),
                    ));
                }
                labels[q] = 1.0;
            }
        }

        let mut gt_segments = Vec::new();
        if fields["segments"] != "-" {
            for token in fields["segments"].split(';') {
                let mut parts = token.split(':');
                let (class_text, start_text, end_text) =
                    match (parts.next(), parts.next(), parts.next(), parts.next()) {
                        (Some(c), Some(s), Some(e), None) => (c, s, e),
                        _ => {
                            return Err(validation_error(
                                path,
                                line_no,
                                format!("segment {token:?} is not class:start:end"),
                            ))
                        }
                    };
                let class_id: usize = parse_number(path, line_no, "segments", class_text)?;
                let start: usize = parse_number(path, line_no, "segments", start_text)?;
                let end: usize = parse_number(path, line_no, "segments", end_text)?;
                if class_id >= num_classes {
                    return Err(validation_error(
                        path,
                        line_no,
                        format!("segment class {class_id} out of range for {num_classes} classes"),
                    ));
                }
                if end <= start {
                    return Err(validation_error(
                        path,
                        line_no,
                        format!("segment {token:?} has end <= start"),
                    ));
                }
                if labels[class_id] == 0.0 {
                    return Err(validation_error(
                        path,
                        line_no,
                        format!("segment of class {class_id} but the video is not labeled with it"),
                    ));
                }
                gt_segments.push(GtSegment { class_id, start, end });
            }
        }

        if !gt_segments.is_empty() {
            for (q, &flag) in labels.iter().enumerate() {
                if flag != 0.0 && !gt_segments.iter().any(|s| s.class_id == q) {
                    warnings.push(format!(
                        "video {id}: class {q} is labeled but has no segment boundaries"
                    ));
                }
            }
        }

        let feature_path = base.join(fields["features"]);
        let features = read_features(&feature_path)?;
        let frames = features.rows();
        if let Some(seg) = gt_segments.iter().find(|s| s.end > frames) {
            return Err(validation_error(
                path,
                line_no,
                format!(
                    "segment {}:{}:{} leaves the {frames}-frame video",
                    seg.class_id, seg.start, seg.end
                ),
            ));
        }

        videos.push(FeatureSequence {
            id,
            features,
            labels,
            gt_segments,
            fps,
        });
    }

    Ok((
        Dataset {
            videos,
            split,
            num_classes,
            fps,
        },
        warnings,
    ))
}
