//! File formats: boundary spectral data (binary plus JSON sidecar), Fourier
//! sample CSVs, and JSON documents with 17-significant-digit floats.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forward::{Bsd, BsdMeta};
use crate::geometry::{Grid, GridSpec};
use crate::reconstruct::{FourierSample, FourierSamples, SampleMethod};
use crate::C64;

const MAGIC: &[u8; 4] = b"BSD1";

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_f64(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hex(&hasher.finalize())
}

pub fn sha256_grid(spec: &GridSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update((spec.dim as u32).to_le_bytes());
    hasher.update((spec.n as u32).to_le_bytes());
    hasher.update(spec.side.to_le_bytes());
    hex(&hasher.finalize())
}

/// Path of the JSON sidecar next to a binary file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_bsd(path: &Path, bsd: &Bsd) -> Result<()> {
    bsd.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(bsd.grid.dim as u32).to_le_bytes())?;
    w.write_all(&(bsd.grid.n as u32).to_le_bytes())?;
    w.write_all(&bsd.grid.side.to_le_bytes())?;
    w.write_all(&(bsd.len() as u32).to_le_bytes())?;
    for l in &bsd.eigenvalues {
        w.write_all(&l.to_le_bytes())?;
    }
    for t in &bsd.traces {
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    write_json(&sidecar_path(path), &bsd.meta)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads the binary file and, when present, its sidecar.
pub fn read_bsd(path: &Path) -> Result<Bsd> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{} is not a BSD1 file", path.display())));
    }
    let dim = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let side = read_f64(&mut r)?;
    let k = read_u32(&mut r)? as usize;
    let grid = GridSpec { dim, side, n };
    let mesh_len = Grid::new(grid)?.boundary().len();
    let eigenvalues = (0..k).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let traces = (0..k)
        .map(|_| (0..mesh_len).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after trace block".into()));
    }
    let side_path = sidecar_path(path);
    let meta = if side_path.exists() {
        serde_json::from_reader(BufReader::new(File::open(&side_path)?))?
    } else {
        BsdMeta {
            potential: None,
            potential_sha256: String::new(),
            grid_sha256: sha256_grid(&grid),
            stencil: Default::default(),
            tool_version: String::new(),
        }
    };
    let bsd = Bsd {
        grid,
        eigenvalues,
        traces,
        meta,
    };
    bsd.validate()?;
    Ok(bsd)
}

struct SigFormatter;

impl serde_json::ser::Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value as f64).as_bytes())
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json_string(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_samples_csv<W: Write>(out: W, samples: &FourierSamples) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=samples.dim).map(|a| format!("xi_{a}")).collect();
    header.extend(["re".into(), "im".into(), "tau".into(), "method".into()]);
    w.write_record(&header)?;
    for s in &samples.samples {
        let mut rec: Vec<String> = s.xi.iter().map(|v| fmt_f64(*v)).collect();
        rec.push(fmt_f64(s.value.re));
        rec.push(fmt_f64(s.value.im));
        rec.push(fmt_f64(s.tau));
        rec.push(samples.method.tag().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<FourierSamples> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let dim = header.iter().filter(|h| h.starts_with("xi_")).count();
    if dim != 2 && dim != 3 || header.len() != dim + 4 {
        return Err(Error::Format("unexpected sample CSV header".into()));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("bad number {s:?}: {e}")))
    };
    let mut samples = Vec::new();
    let mut method = None;
    for rec in r.records() {
        let rec = rec?;
        let xi = (0..dim).map(|a| parse(&rec[a])).collect::<Result<Vec<_>>>()?;
        let value = C64::new(parse(&rec[dim])?, parse(&rec[dim + 1])?);
        let tau = parse(&rec[dim + 2])?;
        let m = SampleMethod::parse(&rec[dim + 3])?;
        if method.is_some_and(|prev| prev != m) {
            return Err(Error::Format("mixed methods in one sample file".into()));
        }
        method = Some(m);
        samples.push(FourierSample { xi, value, tau });
    }
    if samples.is_empty() {
        return Err(Error::Format("sample file has no rows".into()));
    }
    let spacing = samples
        .iter()
        .flat_map(|s| s.xi.iter().map(|v| v.abs()))
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !spacing.is_finite() {
        return Err(Error::InsufficientCoverage("samples contain only ξ = 0".into()));
    }
    let mut out = FourierSamples {
        dim,
        spacing,
        radius: 0.0,
        method: method.unwrap_or(SampleMethod::Series),
        samples,
    };
    out.radius = out.max_radius() + 1e-9 * spacing;
    Ok(out)
}
