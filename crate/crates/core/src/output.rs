//! Structured run outputs: CSV monitors, lossless text fields, legacy-VTK
//! structured-points snapshots, and a MANIFEST describing all of them.
//!
//! Every file starts with a header line carrying the artifact version and
//! the sha256 of the resolved configuration, so reruns are attributable;
//! text-format readers skip leading `#` lines.

use crate::domain::Domain;
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub fn config_hash(canonical_json: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_json.as_bytes());
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub struct OutputWriter {
    pub dir: PathBuf,
    pub hash: String,
    files: Vec<(String, String)>,
}

impl OutputWriter {
    pub fn new(dir: &Path, canonical_config: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let hash = config_hash(canonical_config);
        let mut w = OutputWriter {
            dir: dir.to_path_buf(),
            hash,
            files: Vec::new(),
        };
        w.write_raw("config-resolved.json", canonical_config, "resolved configuration")?;
        Ok(w)
    }

    pub fn header(&self) -> String {
        format!(
            "# porous-ch v{} config-sha256={}\n",
            crate::VERSION,
            self.hash
        )
    }

    pub fn write_raw(&mut self, name: &str, content: &str, description: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        self.files.push((name.to_string(), description.to_string()));
        Ok(path)
    }

    pub fn write_with_header(
        &mut self,
        name: &str,
        body: &str,
        description: &str,
    ) -> Result<PathBuf> {
        let mut content = self.header();
        content.push_str(body);
        self.write_raw(name, &content, description)
    }

    /// Time-series CSV: one row per sampled step.
    pub fn write_series(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<f64>],
        description: &str,
    ) -> Result<PathBuf> {
        let mut body = String::new();
        body.push_str(&columns.join(","));
        body.push('\n');
        for row in rows {
            if row.len() != columns.len() {
                return Err(Error::Parameter("CSV row width mismatch".into()));
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        self.write_with_header(name, &body, description)
    }

    /// Lossless text field in the bitmap-style layout: `d n1 [n2 n3]`
    /// header, then one line of values per row (x fastest).
    pub fn write_field(
        &mut self,
        name: &str,
        domain_like: FieldLayout,
        values: &[f64],
        description: &str,
    ) -> Result<PathBuf> {
        let mut body = String::new();
        match domain_like {
            FieldLayout::Cell { d, n } => {
                let _ = writeln!(body, "{d} {n}");
                append_rows(&mut body, d, [n, n, n], values);
            }
            FieldLayout::Box { d, dims } => {
                let _ = write!(body, "{d}");
                for a in 0..d {
                    let _ = write!(body, " {}", dims[a]);
                }
                body.push('\n');
                append_rows(&mut body, d, dims, values);
            }
        }
        self.write_with_header(name, &body, description)
    }

    /// Legacy VTK structured points; cell-centered data written as
    /// POINT_DATA at cell centers.
    pub fn write_vtk(
        &mut self,
        name: &str,
        domain: &Domain,
        field_name: &str,
        values: &[f64],
        description: &str,
    ) -> Result<PathBuf> {
        let d = domain.d;
        let (nx, ny) = (domain.shape.extent(0), domain.shape.extent(1));
        let nz = if d == 3 { domain.shape.extent(2) } else { 1 };
        let mut body = String::new();
        body.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(body, "porous-ch v{} config-sha256={}", crate::VERSION, self.hash);
        body.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
        let _ = writeln!(body, "DIMENSIONS {nx} {ny} {nz}");
        let _ = writeln!(
            body,
            "ORIGIN {} {} {}",
            0.5 * domain.spacing[0],
            0.5 * domain.spacing[1],
            if d == 3 { 0.5 * domain.spacing[2] } else { 0.0 }
        );
        let _ = writeln!(
            body,
            "SPACING {} {} {}",
            domain.spacing[0],
            domain.spacing[1],
            if d == 3 { domain.spacing[2] } else { 1.0 }
        );
        let _ = writeln!(body, "POINT_DATA {}", nx * ny * nz);
        let _ = writeln!(body, "SCALARS {field_name} double 1");
        body.push_str("LOOKUP_TABLE default\n");
        for v in values {
            let _ = writeln!(body, "{v:?}");
        }
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push((name.to_string(), description.to_string()));
        Ok(path)
    }

    /// Write MANIFEST.txt listing every produced file.
    pub fn write_manifest(&mut self, column_docs: &[(&str, &str)]) -> Result<PathBuf> {
        let mut body = String::new();
        body.push_str("files:\n");
        let files = self.files.clone();
        for (name, desc) in &files {
            let _ = writeln!(body, "  {name}: {desc}");
        }
        if !column_docs.is_empty() {
            body.push_str("columns:\n");
            for (name, doc) in column_docs {
                let _ = writeln!(body, "  {name}: {doc}");
            }
        }
        self.write_with_header("MANIFEST.txt", &body, "manifest")
    }

    pub fn produced(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }
}

pub enum FieldLayout {
    Cell { d: usize, n: usize },
    Box { d: usize, dims: [usize; 3] },
}

fn append_rows(body: &mut String, d: usize, dims: [usize; 3], values: &[f64]) {
    let planes = if d == 3 { dims[2] } else { 1 };
    let mut idx = 0usize;
    for _z in 0..planes {
        for _y in 0..dims[1] {
            let mut first = true;
            for _x in 0..dims[0] {
                if !first {
                    body.push(' ');
                }
                let _ = write!(body, "{:?}", values[idx]);
                idx += 1;
                first = false;
            }
            body.push('\n');
        }
    }
}

/// Parse a text field written by `write_field`, skipping `#` headers.
pub fn parse_field(text: &str) -> Result<(usize, Vec<usize>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parameter("empty field file".into()))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter("field header must be integers".into()))?;
    if nums.len() < 2 {
        return Err(Error::Parameter("field header must be `d n1 [n2 n3]`".into()));
    }
    let d = nums[0];
    let dims: Vec<usize> = if nums.len() == 2 {
        vec![nums[1]; d]
    } else {
        nums[1..].to_vec()
    };
    if dims.len() != d {
        return Err(Error::Parameter("field header dimension mismatch".into()));
    }
    let want: usize = dims.iter().product();
    let mut values = Vec::with_capacity(want);
    for line in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parameter(format!("bad field value '{tok}'")))?;
            values.push(v);
        }
    }
    if values.len() != want {
        return Err(Error::Parameter(format!(
            "field has {} values, expected {want}",
            values.len()
        )));
    }
    Ok((d, dims, values))
}
