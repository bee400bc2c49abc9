//! Field checkpoints, run manifests, and serde helpers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;

/// Serialize exponents that may be infinite as a JSON number or `"inf"`.
pub mod exponent_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got \"{t}\""
            ))),
        }
    }
}

const CHECKPOINT_VERSION: u32 = 1;
const BIN_MAGIC: &[u8; 4] = b"WVLB";

/// JSON checkpoint of a field: grid shape plus interleaved re/im
/// coefficients in row-major wavenumber order.
#[derive(Serialize, Deserialize)]
struct CheckpointV1 {
    version: u32,
    dim: usize,
    modes_per_axis: usize,
    oversample: usize,
    coeffs: Vec<f64>,
}

fn interleave(field: &SpectralField) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * field.coeffs().len());
    for c in field.coeffs() {
        out.push(c.re);
        out.push(c.im);
    }
    out
}

fn deinterleave(grid: TorusGrid, raw: &[f64]) -> Result<SpectralField> {
    if raw.len() != 2 * grid.spectral_len() {
        return Err(Error::MalformedCheckpoint(format!(
            "expected {} interleaved values, got {}",
            2 * grid.spectral_len(),
            raw.len()
        )));
    }
    let coeffs: Vec<Complex64> =
        raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    SpectralField::from_coeffs(grid, coeffs)
}

pub fn write_field_json(field: &SpectralField, w: impl Write) -> Result<()> {
    let ck = CheckpointV1 {
        version: CHECKPOINT_VERSION,
        dim: field.grid().dim(),
        modes_per_axis: field.grid().modes_per_axis(),
        oversample: field.grid().oversample(),
        coeffs: interleave(field),
    };
    serde_json::to_writer(w, &ck)?;
    Ok(())
}

pub fn read_field_json(r: impl Read) -> Result<SpectralField> {
    let ck: CheckpointV1 = serde_json::from_reader(r)?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(Error::MalformedCheckpoint(format!(
            "unsupported checkpoint version {}",
            ck.version
        )));
    }
    let grid = TorusGrid::new(ck.dim, ck.modes_per_axis, ck.oversample)?;
    deinterleave(grid, &ck.coeffs)
}

pub fn save_field_json(field: &SpectralField, path: impl AsRef<Path>) -> Result<()> {
    write_field_json(field, std::fs::File::create(path)?)
}

pub fn load_field_json(path: impl AsRef<Path>) -> Result<SpectralField> {
    read_field_json(std::fs::File::open(path)?)
}

/// Compact little-endian binary checkpoint with the same payload as the JSON
/// form.
pub fn write_field_bin(field: &SpectralField, mut w: impl Write) -> Result<()> {
    w.write_all(BIN_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(field.grid().dim() as u32).to_le_bytes())?;
    w.write_all(&(field.grid().modes_per_axis() as u32).to_le_bytes())?;
    w.write_all(&(field.grid().oversample() as u32).to_le_bytes())?;
    for v in interleave(field) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_bin(mut r: impl Read) -> Result<SpectralField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::MalformedCheckpoint("bad magic bytes".into()));
    }
    let mut word = [0u8; 4];
    let mut next_u32 = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::MalformedCheckpoint(format!("unsupported checkpoint version {version}")));
    }
    let dim = next_u32(&mut r)? as usize;
    let n = next_u32(&mut r)? as usize;
    let rho = next_u32(&mut r)? as usize;
    let grid = TorusGrid::new(dim, n, rho)?;
    let mut raw = vec![0f64; 2 * grid.spectral_len()];
    let mut buf = [0u8; 8];
    for slot in &mut raw {
        r.read_exact(&mut buf)?;
        *slot = f64::from_le_bytes(buf);
    }
    deinterleave(grid, &raw)
}

pub fn save_field_bin(field: &SpectralField, path: impl AsRef<Path>) -> Result<()> {
    write_field_bin(field, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_field_bin(path: impl AsRef<Path>) -> Result<SpectralField> {
    read_field_bin(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Manifest of one CLI run: every emitted file with size and content hash.
/// Contains nothing time- or machine-dependent so that identical runs produce
/// byte-identical manifests.
#[derive(Serialize, Deserialize, Debug)]
pub struct Manifest {
    pub version: u32,
    pub mode: String,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl Manifest {
    pub fn new(mode: &str, seed: u64, config_sha256: String) -> Self {
        Self { version: 1, mode: mode.to_string(), seed, config_sha256, files: Vec::new() }
    }

    /// Record a file that lives under `root`, storing its relative path.
    pub fn record(&mut self, root: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.files.push(ManifestEntry {
            path: rel.to_string_lossy().into_owned(),
            bytes: std::fs::metadata(path)?.len(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn save(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        std::fs::write(path, body)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> SpectralField {
        let g = TorusGrid::new(2, 8, 2).unwrap();
        SpectralField::from_mode_fn(g, |m| {
            Complex64::new(1.0 / (1.0 + TorusGrid::norm_sq(m)), 0.25 * m[0] as f64)
        })
    }

    #[test]
    fn json_roundtrip() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_field_json(&f, &mut buf).unwrap();
        let g = read_field_json(buf.as_slice()).unwrap();
        assert_eq!(f.grid(), g.grid());
        assert!(f.sub(&g).unwrap().coeff_linf() == 0.0);
    }

    #[test]
    fn bin_roundtrip() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_field_bin(&f, &mut buf).unwrap();
        let g = read_field_bin(buf.as_slice()).unwrap();
        assert!(f.sub(&g).unwrap().coeff_linf() == 0.0);
    }

    #[test]
    fn bin_rejects_bad_magic_and_truncation() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_field_bin(&f, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field_bin(bad.as_slice()).is_err());
        let short = &buf[..buf.len() / 2];
        assert!(read_field_bin(short).is_err());
    }

    #[test]
    fn json_rejects_future_version() {
        let f = sample_field();
        let mut buf = Vec::new();
        write_field_json(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":9");
        assert!(matches!(
            read_field_json(text.as_bytes()),
            Err(Error::MalformedCheckpoint(_))
        ));
    }

    #[test]
    fn exponent_serde_roundtrip() {
        use crate::lp::NormSpec;
        let spec = NormSpec::new(0.5, f64::INFINITY, 2.0);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"inf\""));
        let back: NormSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.p, f64::INFINITY);
        assert_eq!(back.r, 2.0);
    }
}
