//! Field dumps and trajectory export.
//!
//! Dump layout (little-endian throughout): magic "NLSF", version u32 = 1,
//! dim u8, n_per_axis u64, half_width f64, space tag u8 (0 physical,
//! 1 frequency), then (re, im) f64 pairs row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Space};
use crate::grid::{GridParams, SpectralGrid};
use crate::split::Trajectory;

const MAGIC: &[u8; 4] = b"NLSF";
const VERSION: u32 = 1;

pub fn write_field(path: &Path, field: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[g.dim() as u8])?;
    w.write_all(&(g.n_per_axis() as u64).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&[match field.space() {
        Space::Physical => 0u8,
        Space::Frequency => 1u8,
    }])?;
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ComplexField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Corrupt(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported version {version}")));
    }
    let dim = read_u8(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let half_width = read_f64(&mut r)?;
    let tag = read_u8(&mut r)?;
    let space = match tag {
        0 => Space::Physical,
        1 => Space::Frequency,
        other => return Err(Error::Corrupt(format!("unknown space tag {other}"))),
    };
    let grid = SpectralGrid::new(dim, n, half_width)?;
    let total = grid.total_points();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        values.push(Complex64::new(re, im));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Corrupt("trailing bytes after field data".to_string()));
    }
    ComplexField::new(grid, values, space)
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[derive(Debug, Serialize)]
pub struct TrajectoryManifest<'a> {
    pub label: &'a str,
    pub grid: GridParams,
    pub config: &'a crate::split::SplitConfig,
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    pub snapshot_files: Vec<String>,
    pub oracle_self_gap: Option<f64>,
    pub self_gap_flagged: bool,
    /// Max L2 gap to the analytic plane-wave solution, when one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_oracle_error: Option<f64>,
    pub warnings: &'a [String],
}

/// One dump per snapshot plus a JSON manifest; returns the manifest path.
pub fn export_trajectory(
    dir: &Path,
    traj: &Trajectory,
    label: &str,
    analytic_oracle_error: Option<f64>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (i, (_, field)) in traj.snapshots().iter().enumerate() {
        let name = format!("{label}_snapshot_{i:04}.nlsf");
        write_field(&dir.join(&name), field)?;
        files.push(name);
    }
    let manifest = TrajectoryManifest {
        label,
        grid: traj.grid().params(),
        config: traj.config(),
        times: traj.times(),
        masses: traj.snapshot_masses(),
        snapshot_files: files,
        oracle_self_gap: traj.oracle_self_gap(),
        self_gap_flagged: traj.self_gap_flagged(),
        analytic_oracle_error,
        warnings: traj.warnings(),
    };
    let path = dir.join(format!("{label}_manifest.json"));
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Corrupt(format!("manifest serialization: {e}")))?;
    std::fs::write(&path, json)?;
    Ok(path)
}

/// Best-effort writability probe used for early config validation.
pub fn dir_writable(dir: &Path) -> bool {
    if std::fs::create_dir_all(dir).is_err() {
        return false;
    }
    let probe = dir.join(".nls_write_probe");
    match File::create(&probe) {
        Ok(_) => {
            let _ = std::fs::remove_file(&probe);
            true
        }
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn tmp_dir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!(
            "nls_fio_{tag}_{}",
            std::process::id()
        ));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    fn random_field(seed: u64) -> ComplexField {
        let g = SpectralGrid::new(2, 8, 1.5).unwrap();
        let mut rng = Rng::new(seed);
        let values = (0..g.total_points())
            .map(|_| Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)))
            .collect();
        ComplexField::new(g, values, Space::Frequency).unwrap()
    }

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tmp_dir("rt");
        let f = random_field(3);
        let path = dir.join("f.nlsf");
        write_field(&path, &f).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.space(), Space::Frequency);
        assert!(back.grid().same_layout(f.grid()));
        assert_eq!(back.values(), f.values());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn golden_header_bytes() {
        let dir = tmp_dir("hdr");
        let g = SpectralGrid::new(1, 8, 2.0).unwrap();
        let f = ComplexField::zeros(g, Space::Physical);
        let path = dir.join("h.nlsf");
        write_field(&path, &f).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"NLSF");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(bytes[8], 1); // dim
        assert_eq!(&bytes[9..17], &8u64.to_le_bytes());
        assert_eq!(&bytes[17..25], &2.0f64.to_le_bytes());
        assert_eq!(bytes[25], 0); // physical tag
        assert_eq!(bytes.len(), 26 + 8 * 16);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn corrupt_dumps_rejected() {
        let dir = tmp_dir("bad");
        let f = random_field(5);
        let path = dir.join("f.nlsf");
        write_field(&path, &f).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad_magic = dir.join("bad_magic.nlsf");
        std::fs::write(&bad_magic, &bytes).unwrap();
        assert!(matches!(read_field(&bad_magic), Err(Error::Corrupt(_))));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        let bad_ver = dir.join("bad_ver.nlsf");
        std::fs::write(&bad_ver, &bytes).unwrap();
        assert!(matches!(read_field(&bad_ver), Err(Error::Corrupt(_))));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        let short = dir.join("short.nlsf");
        std::fs::write(&short, &bytes).unwrap();
        assert!(read_field(&short).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn export_writes_manifest_and_snapshots() {
        use crate::data::gaussian;
        use crate::split::{evolve, Scheme, SplitConfig};
        let dir = tmp_dir("exp");
        let g = SpectralGrid::new(1, 32, 8.0).unwrap();
        let phi = gaussian(&g, 1.0, 1.0).unwrap();
        let cfg = SplitConfig::new(Scheme::Strang, 1.0, 2.0, 0.125, 0.5)
            .unwrap()
            .with_snapshot_stride(2)
            .unwrap();
        let traj = evolve(&phi, &cfg).unwrap();
        let manifest = export_trajectory(&dir, &traj, "demo", None).unwrap();
        let text = std::fs::read_to_string(&manifest).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let files = parsed["snapshot_files"].as_array().unwrap();
        assert_eq!(files.len(), traj.snapshots().len());
        for f in files {
            let p = dir.join(f.as_str().unwrap());
            let field = read_field(&p).unwrap();
            assert_eq!(field.space(), Space::Physical);
        }
        assert_eq!(parsed["times"].as_array().unwrap().len(), files.len());
        std::fs::remove_dir_all(&dir).ok();
    }
}
