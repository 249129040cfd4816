//! Grid-aligned rasters with explicit no-data, and ESRI ASCII grid I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bev::GridSpec;
use crate::error::{Error, Result};
use crate::fmt::sig;

pub const NODATA_VALUE: f64 = -9999.0;

/// Row-major cells co-registered with a [`GridSpec`]; `None` is no-data.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub spec: GridSpec,
    pub cells: Vec<Option<T>>,
}

impl<T: Copy> Raster<T> {
    pub fn from_cells(spec: GridSpec, cells: Vec<Option<T>>) -> Self {
        assert_eq!(cells.len(), spec.len(), "raster size does not match grid");
        Self { spec, cells }
    }

    pub fn filled(spec: GridSpec, value: Option<T>) -> Self {
        Self {
            spec,
            cells: vec![value; spec.len()],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.cells[self.spec.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<T>) {
        let i = self.spec.index(row, col);
        self.cells[i] = value;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            spec: self.spec,
            cells: self.cells.iter().map(|c| c.map(&f)).collect(),
        }
    }

    pub fn ensure_same_grid<U>(&self, other: &Raster<U>) -> Result<()> {
        let (a, b) = (&self.spec, &other.spec);
        if a.ncols != b.ncols || a.nrows != b.nrows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                a.nrows, a.ncols, b.nrows, b.ncols
            )));
        }
        Ok(())
    }

    pub fn defined(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, c)| c.map(|v| (i, v)))
    }
}

/// Cell value types that can be written to an ESRI ASCII grid.
pub trait GridValue: Copy {
    fn format(&self) -> String;
    fn parse(token: &str) -> Option<Self>;
}

impl GridValue for f64 {
    fn format(&self) -> String {
        sig(*self, 6)
    }

    fn parse(token: &str) -> Option<Self> {
        token.parse().ok()
    }
}

impl GridValue for u32 {
    fn format(&self) -> String {
        self.to_string()
    }

    fn parse(token: &str) -> Option<Self> {
        token.parse::<u32>().ok().or_else(|| {
            token
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 0.0)
                .map(|v| v as u32)
        })
    }
}

/// Serializes as ESRI ASCII grid, northernmost row first.
pub fn to_esri_ascii<T: GridValue>(raster: &Raster<T>) -> String {
    let s = &raster.spec;
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", s.ncols);
    let _ = writeln!(out, "nrows {}", s.nrows);
    let _ = writeln!(out, "xllcorner {}", sig(s.origin_x, 12));
    let _ = writeln!(out, "yllcorner {}", sig(s.origin_y, 12));
    let _ = writeln!(out, "cellsize {}", sig(s.resolution, 12));
    let _ = writeln!(out, "NODATA_value -9999");
    for row in (0..s.nrows).rev() {
        let line: Vec<String> = (0..s.ncols)
            .map(|col| match raster.get(row, col) {
                Some(v) => v.format(),
                None => "-9999".to_string(),
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_esri_ascii<T: GridValue>(text: &str) -> Result<Raster<T>> {
    let mut tokens = text.split_whitespace();
    let mut header = std::collections::BTreeMap::new();
    let keys = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];
    for _ in 0..keys.len() {
        let (Some(k), Some(v)) = (tokens.next(), tokens.next()) else {
            return Err(Error::Malformed("truncated ESRI grid header".into()));
        };
        let k = k.to_ascii_lowercase();
        if !keys.contains(&k.as_str()) {
            return Err(Error::Malformed(format!("unexpected ESRI header key '{k}'")));
        }
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Malformed(format!("bad ESRI header value '{v}'")))?;
        header.insert(k, v);
    }
    if header.len() != keys.len() {
        return Err(Error::Malformed("incomplete ESRI grid header".into()));
    }
    let spec = GridSpec::new(
        header["xllcorner"],
        header["yllcorner"],
        header["cellsize"],
        header["ncols"] as usize,
        header["nrows"] as usize,
    )?;
    let nodata = header["nodata_value"];
    let mut raster = Raster::filled(spec, None);
    for row in (0..spec.nrows).rev() {
        for col in 0..spec.ncols {
            let tok = tokens
                .next()
                .ok_or_else(|| Error::Malformed("ESRI grid has too few values".into()))?;
            let as_f: Option<f64> = tok.parse().ok();
            if as_f == Some(nodata) {
                continue;
            }
            let v = T::parse(tok).ok_or_else(|| Error::Malformed(format!("bad grid value '{tok}'")))?;
            raster.set(row, col, Some(v));
        }
    }
    if tokens.next().is_some() {
        return Err(Error::Malformed("ESRI grid has too many values".into()));
    }
    Ok(raster)
}

pub fn write_esri_ascii<T: GridValue>(path: &Path, raster: &Raster<T>) -> Result<()> {
    fs::write(path, to_esri_ascii(raster))?;
    Ok(())
}

pub fn read_esri_ascii<T: GridValue>(path: &Path) -> Result<Raster<T>> {
    parse_esri_ascii(&fs::read_to_string(path)?)
}
