//! Binary array files and CSV tables.
//!
//! Array file layout, all little-endian:
//!
//! ```text
//! "ASF1"                      magic
//! u32 flags                   bit 0: complex payload
//! u32 rank
//! u64 size[rank]
//! rank x { u32 len, utf8 name, f64 min, f64 step }
//! u32 n_attr
//! n_attr x { u32 len, utf8 key, f64 value }
//! f64 payload[prod(size)] (x2 interleaved re, im when complex), row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::GridSpec2D;
use crate::tdse::Wavefunction2D;

pub const MAGIC: &[u8; 4] = b"ASF1";
const FLAG_COMPLEX: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisMeta {
    pub name: String,
    pub min: f64,
    pub step: f64,
}

impl AxisMeta {
    pub fn new(name: &str, min: f64, step: f64) -> Self {
        Self { name: name.to_string(), min, step }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub dims: Vec<usize>,
    pub axes: Vec<AxisMeta>,
    pub attributes: Vec<(String, f64)>,
    pub data: ArrayData,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!("truncated at byte {} (need {n} more)", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }
}

impl ArrayFile {
    pub fn real(dims: Vec<usize>, axes: Vec<AxisMeta>, data: Vec<f64>) -> Result<Self> {
        let f = Self { dims, axes, attributes: Vec::new(), data: ArrayData::Real(data) };
        f.check()?;
        Ok(f)
    }

    pub fn complex(dims: Vec<usize>, axes: Vec<AxisMeta>, data: Vec<C64>) -> Result<Self> {
        let f = Self { dims, axes, attributes: Vec::new(), data: ArrayData::Complex(data) };
        f.check()?;
        Ok(f)
    }

    pub fn with_attribute(mut self, key: &str, value: f64) -> Self {
        self.attributes.push((key.to_string(), value));
        self
    }

    pub fn attribute(&self, key: &str) -> Option<f64> {
        self.attributes.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    fn check(&self) -> Result<()> {
        if self.axes.len() != self.dims.len() {
            return Err(Error::Format(format!("{} axes for rank {}", self.axes.len(), self.dims.len())));
        }
        let n: usize = self.dims.iter().product();
        if n != self.data.len() {
            return Err(Error::Format(format!("payload has {} elements, header implies {n}", self.data.len())));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let mut out = Vec::with_capacity(64 + 16 * self.data.len());
        out.extend_from_slice(MAGIC);
        let flags = if matches!(self.data, ArrayData::Complex(_)) { FLAG_COMPLEX } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for a in &self.axes {
            put_str(&mut out, &a.name);
            out.extend_from_slice(&a.min.to_le_bytes());
            out.extend_from_slice(&a.step.to_le_bytes());
        }
        out.extend_from_slice(&(self.attributes.len() as u32).to_le_bytes());
        for (k, v) in &self.attributes {
            put_str(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &self.data {
            ArrayData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::Complex(v) => v.iter().for_each(|x| {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }),
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf, pos: 0 };
        if c.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let flags = c.u32()?;
        if flags & !FLAG_COMPLEX != 0 {
            return Err(Error::Format(format!("unknown flags {flags:#x}")));
        }
        let rank = c.u32()? as usize;
        let dims = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let mut axes = Vec::with_capacity(rank);
        for _ in 0..rank {
            let name = c.string()?;
            let (min, step) = (c.f64()?, c.f64()?);
            axes.push(AxisMeta { name, min, step });
        }
        let n_attr = c.u32()? as usize;
        let mut attributes = Vec::with_capacity(n_attr);
        for _ in 0..n_attr {
            let k = c.string()?;
            attributes.push((k, c.f64()?));
        }
        let n: usize = dims.iter().product();
        let data = if flags & FLAG_COMPLEX != 0 {
            ArrayData::Complex((0..n).map(|_| Ok(C64::new(c.f64()?, c.f64()?))).collect::<Result<_>>()?)
        } else {
            ArrayData::Real((0..n).map(|_| c.f64()).collect::<Result<_>>()?)
        };
        if c.pos != buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", buf.len() - c.pos)));
        }
        Ok(Self { dims, axes, attributes, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_wavefunction(psi: &Wavefunction2D) -> Self {
        let g = &psi.grid;
        Self {
            dims: vec![g.nz(), g.nr()],
            axes: vec![AxisMeta::new("z", g.z_min, g.dz), AxisMeta::new("rho", 0.5 * g.drho, g.drho)],
            attributes: vec![("t".into(), psi.t), ("z_max".into(), g.z_max), ("rho_max".into(), g.rho_max)],
            data: ArrayData::Complex(psi.values.clone()),
        }
    }

    pub fn to_wavefunction(&self) -> Result<Wavefunction2D> {
        let ArrayData::Complex(values) = &self.data else {
            return Err(Error::Format("wavefunction payload must be complex".into()));
        };
        if self.dims.len() != 2 {
            return Err(Error::Format("wavefunction must be rank 2".into()));
        }
        let need = |k: &str| self.attribute(k).ok_or_else(|| Error::Format(format!("missing attribute `{k}`")));
        let grid = GridSpec2D {
            z_min: self.axes[0].min,
            z_max: need("z_max")?,
            dz: self.axes[0].step,
            rho_max: need("rho_max")?,
            drho: self.axes[1].step,
            half_offset: true,
        };
        if grid.nz() != self.dims[0] || grid.nr() != self.dims[1] {
            return Err(Error::GridMismatch(format!("header {:?} vs grid {}x{}", self.dims, grid.nz(), grid.nr())));
        }
        Ok(Wavefunction2D { grid, values: values.clone(), t: need("t")? })
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV with a header row. Numbers use the shortest representation that
/// round-trips.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| format!("{v}")).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Table with one column per slice, all of equal length.
    pub fn from_columns(headers: &[&str], columns: &[&[f64]]) -> Self {
        let mut t = Self::new(headers);
        let n = columns.first().map_or(0, |c| c.len());
        for i in 0..n {
            t.push_numbers(&columns.iter().map(|c| c[i]).collect::<Vec<_>>());
        }
        t
    }

    pub fn to_string(&self) -> String {
        let mut s = self.headers.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let headers: Vec<String> = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?.split(',').map(|s| s.trim().to_string()).collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
        for (k, r) in rows.iter().enumerate() {
            if r.len() != headers.len() {
                return Err(Error::Format(format!("CSV row {} has {} fields, header has {}", k + 2, r.len(), headers.len())));
            }
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| r[idx].parse::<f64>().map_err(|e| Error::Format(format!("row {}: `{}`: {e}", k + 2, r[idx]))))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
