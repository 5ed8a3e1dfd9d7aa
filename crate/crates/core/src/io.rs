//! PGM images, region documents, label images and key=value config files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{owner_labels, LayeredSegmentation};
use crate::geometry::{ClosedCurve, GeometryError, Point2, Region};
use crate::raster::{Grid, RasterError, RasterImage};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format {0:?} (expected P2 or P5)")]
    UnsupportedFormat(String),
    #[error("PGM parse error at byte {offset}: {message}")]
    Pgm { offset: usize, message: String },
    #[error("{path}: invalid region document: {message}")]
    Document { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Geometry {
        path: PathBuf,
        #[source]
        source: GeometryError,
    },
    #[error("{0}")]
    Raster(#[from] RasterError),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, IoError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(IoError::Pgm { offset: start, message: format!("expected {what}") });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::Pgm { offset: start, message: format!("{what} out of range") })
    }
}

/// Parses P2 or P5 bytes. Returns `(width, height, maxval, samples)`, rows
/// top to bottom as stored.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, Vec<u32>), IoError> {
    if bytes.len() < 2 {
        return Err(IoError::Pgm { offset: 0, message: "missing magic number".into() });
    }
    let magic = String::from_utf8_lossy(&bytes[..2]).to_string();
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        _ => return Err(IoError::UnsupportedFormat(magic)),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    let maxval_at = rd.pos;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::Pgm { offset: maxval_at, message: "zero image dimension".into() });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::Pgm { offset: maxval_at, message: format!("maxval {maxval} not in 1..=65535") });
    }
    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates header and raster
        if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
            return Err(IoError::Pgm { offset: rd.pos, message: "missing whitespace after maxval".into() });
        }
        let start = rd.pos + 1;
        let bps = if maxval > 255 { 2 } else { 1 };
        let need = count * bps;
        if bytes.len() < start + need {
            return Err(IoError::Pgm {
                offset: bytes.len(),
                message: format!("truncated raster: need {need} bytes, have {}", bytes.len() - start),
            });
        }
        let raster = &bytes[start..start + need];
        for (i, chunk) in raster.chunks_exact(bps).enumerate() {
            let v = if bps == 2 { u32::from(chunk[0]) << 8 | u32::from(chunk[1]) } else { u32::from(chunk[0]) };
            if v > maxval {
                return Err(IoError::Pgm { offset: start + i * bps, message: format!("sample {v} exceeds maxval") });
            }
            samples.push(v);
        }
    } else {
        for _ in 0..count {
            let at = rd.pos;
            let v = rd.number("sample").map_err(|e| match e {
                IoError::Pgm { offset, .. } if offset >= bytes.len() => {
                    IoError::Pgm { offset, message: "truncated raster".into() }
                }
                other => other,
            })?;
            if v > maxval {
                return Err(IoError::Pgm { offset: at, message: format!("sample {v} exceeds maxval") });
            }
            samples.push(v);
        }
    }
    Ok((width, height, maxval, samples))
}

/// Reads a PGM file onto a grid with the given pixel size and origin. File row
/// `i` (counted from the top) becomes grid row `i`.
pub fn read_pgm(path: &Path, pixel_size: f64, origin: Point2) -> Result<RasterImage, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (w, h, maxval, samples) = parse_pgm(&bytes)?;
    let grid = Grid::new(w, h, pixel_size, origin)?;
    let m = f64::from(maxval);
    Ok(RasterImage::new(grid, samples.into_iter().map(|v| f64::from(v) / m).collect())?)
}

/// Binary P5 bytes with maxval 255.
pub fn encode_pgm(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

/// Writes the image as P5 with maxval 255 (values rounded).
pub fn write_pgm(img: &RasterImage, path: &Path) -> Result<(), IoError> {
    let g = img.grid();
    let samples: Vec<u8> = img.values().iter().map(|v| (v * 255.0).round() as u8).collect();
    fs::write(path, encode_pgm(g.width, g.height, &samples)).map_err(io_err(path))
}

/// Gray level of visible part `i` (1-based) out of `k` layers.
pub fn label_gray(i: usize, k: usize) -> u8 {
    ((255 * i) / (k + 1)) as u8
}

/// Label image over `frame`: background 0, visible part of layer `i`
/// (1-based) at `floor(255·i/(k+1))`.
pub fn label_image(seg: &LayeredSegmentation, frame: &Grid) -> Vec<u8> {
    let k = seg.len();
    owner_labels(seg, frame)
        .into_iter()
        .map(|l| if l == 0 { 0 } else { label_gray(l as usize, k) })
        .collect()
}

pub fn write_label_image(seg: &LayeredSegmentation, frame: &Grid, path: &Path) -> Result<(), IoError> {
    let samples = label_image(seg, frame);
    fs::write(path, encode_pgm(frame.width, frame.height, &samples)).map_err(io_err(path))
}

/// On-disk shape of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDoc {
    pub outer: Vec<Point2>,
    #[serde(default)]
    pub holes: Vec<Vec<Point2>>,
}

impl From<&Region> for RegionDoc {
    fn from(r: &Region) -> Self {
        RegionDoc {
            outer: r.outer().vertices().to_vec(),
            holes: r.holes().iter().map(|h| h.vertices().to_vec()).collect(),
        }
    }
}

impl RegionDoc {
    /// Builds the region, reorienting curves if needed.
    pub fn to_region(&self) -> Result<Region, GeometryError> {
        let outer = ClosedCurve::new(self.outer.clone())?;
        let holes = self
            .holes
            .iter()
            .map(|h| ClosedCurve::new(h.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Region::oriented(outer, holes)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RegionFile {
    One(RegionDoc),
    Many(Vec<RegionDoc>),
}

/// Parses a region document: a single `{"outer", "holes"}` object or an
/// array of them (a multi-component set or an ordered layer list).
pub fn parse_regions(text: &str) -> Result<Vec<Region>, String> {
    let file: RegionFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let docs = match file {
        RegionFile::One(d) => vec![d],
        RegionFile::Many(v) => v,
    };
    docs.iter()
        .enumerate()
        .map(|(i, d)| d.to_region().map_err(|e| format!("region {i}: {e}")))
        .collect()
}

pub fn read_regions(path: &Path) -> Result<Vec<Region>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_regions(&text).map_err(|message| IoError::Document { path: path.to_path_buf(), message })
}

pub fn region_to_json(region: &Region) -> String {
    serde_json::to_string_pretty(&RegionDoc::from(region)).expect("region serializes")
}

pub fn regions_to_json(regions: &[Region]) -> String {
    let docs: Vec<RegionDoc> = regions.iter().map(RegionDoc::from).collect();
    serde_json::to_string_pretty(&docs).expect("regions serialize")
}

/// Single region as an object, several as an array.
pub fn write_regions(path: &Path, regions: &[Region]) -> Result<(), IoError> {
    let text = match regions {
        [one] => region_to_json(one),
        many => regions_to_json(many),
    };
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Parses `key = value` lines (`#` comments, blank lines ignored). Keys must
/// be in `valid`; unknown keys fail with the list of valid keys.
pub fn parse_config(text: &str, valid: &[&str]) -> Result<Vec<(String, String)>, IoError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Config {
            line: n + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !valid.contains(&k) {
            return Err(IoError::Config {
                line: n + 1,
                message: format!("unknown key {k:?}; valid keys: {}", valid.join(", ")),
            });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path, valid: &[&str]) -> Result<Vec<(String, String)>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn p2_with_comments() {
        let text = b"P2\n# a comment\n2 2\n# another\n255\n0 255\n255 0\n";
        let (w, h, m, s) = parse_pgm(text).unwrap();
        assert_eq!((w, h, m), (2, 2, 255));
        assert_eq!(s, vec![0, 255, 255, 0]);
    }

    #[test]
    fn p5_sixteen_bit() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0x12, 0x34, 0xff, 0xff]);
        let (_, _, m, s) = parse_pgm(&bytes).unwrap();
        assert_eq!(m, 65535);
        assert_eq!(s, vec![0x1234, 65535]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_pgm(b"P6 1 1 255\n\x00\x00\x00"), Err(IoError::UnsupportedFormat(m)) if m == "P6"));
        assert!(matches!(parse_pgm(b"P5 2 2 255\n\x00"), Err(IoError::Pgm { .. })));
        assert!(matches!(parse_pgm(b"P2 2 2 255\n1 2 3"), Err(IoError::Pgm { .. })));
        assert!(matches!(parse_pgm(b"P2 x"), Err(IoError::Pgm { offset: 3, .. })));
        assert!(matches!(parse_pgm(b"P2 1 1 255\n300"), Err(IoError::Pgm { .. })));
    }

    #[test]
    fn region_document_roundtrip() {
        let a = shapes::annulus(Point2::new(0.3, -1.0), 3.0, 1.0, 0.37).unwrap();
        let back = parse_regions(&region_to_json(&a)).unwrap();
        assert_eq!(back, vec![a.clone()]);
        let two = parse_regions(&regions_to_json(&[a.clone(), a.translated(Point2::new(10.0, 0.0))])).unwrap();
        assert_eq!(two.len(), 2);
    }

    #[test]
    fn region_document_reorients() {
        let text = r#"{"outer": [[0,0],[0,1],[1,1],[1,0]]}"#;
        let r = parse_regions(text).unwrap();
        assert!(r[0].outer().is_ccw());
        assert!(parse_regions(r#"{"outer": [[0,0],[1,0]]}"#).is_err());
    }

    #[test]
    fn config_parsing() {
        let kv = parse_config("radius = 2\n# c\n\nseed=4 # trailing\n", &["radius", "seed"]).unwrap();
        assert_eq!(kv, vec![("radius".into(), "2".into()), ("seed".into(), "4".into())]);
        let err = parse_config("radus = 2", &["radius", "seed"]).unwrap_err().to_string();
        assert!(err.contains("radius, seed"), "{err}");
    }

    #[test]
    fn label_gray_levels() {
        assert_eq!(label_gray(1, 1), 127);
        assert_eq!(label_gray(1, 2), 85);
        assert_eq!(label_gray(2, 2), 170);
    }
}
