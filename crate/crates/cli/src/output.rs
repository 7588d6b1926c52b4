//! Artifact encoding. Every artifact is built in memory first so reruns can
//! be compared byte for byte, then written by a single writer.

use std::path::{Path, PathBuf};

use coliseum::{GridSpec, RegionMask, ScalarField};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

fn quantize(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn field_samples(field: &ScalarField) -> Vec<u16> {
    field.values.iter().map(|&v| quantize(v)).collect()
}

fn mask_samples(mask: &RegionMask) -> Vec<u16> {
    mask.bits
        .iter()
        .map(|&b| if b { u16::MAX } else { 0 })
        .collect()
}

/// Binary 16-bit PGM, rows top to bottom, with the config hash as a header comment.
fn pgm(width: usize, height: usize, samples: &[u16], config_hash: &str) -> Vec<u8> {
    let mut out =
        format!("P5\n# config_hash {config_hash}\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

fn png(
    width: usize,
    height: usize,
    samples: &[u16],
    config_hash: &str,
) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        enc.add_text_chunk("config_hash".into(), config_hash.into())
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        let mut writer = enc
            .write_header()
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        let data: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
        writer
            .write_image_data(&data)
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

pub fn field_pgm(name: &str, field: &ScalarField, config_hash: &str) -> Artifact {
    let g = field.grid;
    Artifact {
        name: name.into(),
        bytes: pgm(g.width, g.height, &field_samples(field), config_hash),
    }
}

pub fn field_png(name: &str, field: &ScalarField, config_hash: &str) -> Result<Artifact, CliError> {
    let g = field.grid;
    Ok(Artifact {
        name: name.into(),
        bytes: png(g.width, g.height, &field_samples(field), config_hash)?,
    })
}

pub fn mask_pgm(name: &str, mask: &RegionMask, config_hash: &str) -> Artifact {
    let g = mask.grid;
    Artifact {
        name: name.into(),
        bytes: pgm(g.width, g.height, &mask_samples(mask), config_hash),
    }
}

/// Reads a binary PGM (8- or 16-bit) as a mask on `grid`; nonzero pixels
/// are inside. The image must have the grid's shape.
pub fn read_mask_pgm(bytes: &[u8], grid: GridSpec) -> Result<RegionMask, CliError> {
    let bad = |why: &str| CliError::Config(format!("mask pgm: {why}"));
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes.get(pos) == Some(&b'#') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields
            .push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("expected binary P5"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if (width, height) != (grid.width, grid.height) {
        return Err(bad(&format!(
            "{width}x{height} image on a {}x{} grid",
            grid.width, grid.height
        )));
    }
    let data = &bytes[(pos + 1).min(bytes.len())..];
    let wide = match maxval {
        1..=255 => false,
        256..=65535 => true,
        _ => return Err(bad("maxval out of range")),
    };
    let step = if wide { 2 } else { 1 };
    if data.len() < grid.len() * step {
        return Err(bad("truncated pixel data"));
    }
    Ok(RegionMask {
        grid,
        bits: data
            .chunks(step)
            .take(grid.len())
            .map(|c| c.iter().any(|&b| b != 0))
            .collect(),
    })
}

/// CSV with a leading `# config_hash` comment line.
pub fn csv<R: AsRef<[String]>>(
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
    config_hash: &str,
) -> Artifact {
    let mut text = format!("# config_hash {config_hash}\n{}\n", header.join(","));
    for row in rows {
        text.push_str(&row.as_ref().join(","));
        text.push('\n');
    }
    Artifact {
        name: name.into(),
        bytes: text.into_bytes(),
    }
}

pub fn json<T: Serialize>(name: &str, value: &T) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    Artifact {
        name: name.into(),
        bytes,
    }
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.bytes)?;
            Ok(path)
        })
        .collect()
}

#[derive(Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn manifest(artifacts: &[Artifact]) -> Vec<ArtifactEntry> {
    artifacts
        .iter()
        .map(|a| ArtifactEntry {
            name: a.name.clone(),
            sha256: a.sha256(),
            bytes: a.bytes.len(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use coliseum::GridSpec;
    use num_complex::Complex64;

    #[test]
    fn mask_pgm_round_trip() {
        let grid = GridSpec::square(Complex64::new(0.0, 0.0), 1.0, 5).unwrap();
        let mask = RegionMask::from_fn(grid, |z| z.re > 0.1 && z.im < 0.3);
        let back = read_mask_pgm(&mask_pgm("m.pgm", &mask, "abc").bytes, grid).unwrap();
        assert_eq!(back.bits, mask.bits);
        let narrow = [
            b"P5 5 5\n255\n".to_vec(),
            mask.bits.iter().map(|&b| b as u8).collect(),
        ]
        .concat();
        assert_eq!(read_mask_pgm(&narrow, grid).unwrap().bits, mask.bits);
        let other = GridSpec::square(Complex64::new(0.0, 0.0), 1.0, 4).unwrap();
        assert!(matches!(
            read_mask_pgm(&narrow, other),
            Err(CliError::Config(_))
        ));
        assert!(read_mask_pgm(b"P2 5 5 255\n", grid).is_err());
    }

    #[test]
    fn pgm_layout() {
        let grid = GridSpec::square(Complex64::new(0.0, 0.0), 1.0, 2).unwrap();
        let field = ScalarField::from_fn(grid, |z| if z.re > 0.0 { 1.0 } else { 0.0 });
        let a = field_pgm("t.pgm", &field, "abc");
        let header = b"P5\n# config_hash abc\n2 2\n65535\n";
        assert_eq!(&a.bytes[..header.len()], header);
        assert_eq!(&a.bytes[header.len()..], &[0, 0, 255, 255, 0, 0, 255, 255]);
    }

    #[test]
    fn png_round_trips() {
        let grid = GridSpec::square(Complex64::new(0.0, 0.0), 1.0, 3).unwrap();
        let field = ScalarField::from_fn(grid, |z| 0.5 + 0.4 * z.re);
        let a = field_png("t.png", &field, "abc").unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(a.bytes));
        let reader = decoder.read_info().unwrap();
        let info = reader.info();
        assert_eq!(
            (info.width, info.height, info.bit_depth),
            (3, 3, png::BitDepth::Sixteen)
        );
        assert!(info
            .uncompressed_latin1_text
            .iter()
            .any(|t| t.keyword == "config_hash" && t.text == "abc"));
    }

    #[test]
    fn csv_has_hash_and_header() {
        let a = csv(
            "c.csv",
            &["x", "value"],
            [vec!["0.5".to_string(), "0.5".to_string()]],
            "h",
        );
        assert_eq!(
            String::from_utf8(a.bytes).unwrap(),
            "# config_hash h\nx,value\n0.5,0.5\n"
        );
    }
}
