//! Instance I/O and generation: Matrix Market matrices, raw vectors,
//! seeded random instances and the JSON path format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{PathBreakpoint, SolutionPath};
use crate::linalg::{norm_inf, CscMatrix, DesignMatrix, Storage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DynamicRange {
    Hdr,
    Ldr,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RecoveryTag {
    #[serde(rename = "ERC")]
    Erc,
    #[serde(rename = "extERC")]
    ExtErc,
    #[serde(rename = "noERC")]
    NoErc,
    #[default]
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub name: String,
    pub seed: Option<u64>,
    pub dynamic_range: DynamicRange,
    pub recovery: RecoveryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBundle {
    pub a: DesignMatrix,
    pub b: DVector<f64>,
    /// A known feasible point, not necessarily the BP optimum.
    pub x_ref: Option<DVector<f64>>,
    pub meta: InstanceMeta,
}

impl InstanceBundle {
    pub fn new(a: DesignMatrix, b: DVector<f64>, x_ref: Option<DVector<f64>>, meta: InstanceMeta) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(Error::Validation(format!("b has length {}, expected {}", b.len(), a.nrows())));
        }
        if let Some(x) = &x_ref {
            if x.len() != a.ncols() {
                return Err(Error::Validation(format!("x_ref has length {}, expected {}", x.len(), a.ncols())));
            }
            let resid = norm_inf(&(a.mul(x) - &b));
            if resid > 1e-8 * (1.0 + norm_inf(&b)) {
                return Err(Error::Validation(format!("A x_ref differs from b by {resid:e}")));
            }
        }
        Ok(InstanceBundle { a, b, x_ref, meta })
    }
}

// RNG stream layout for `generate_instance`: ChaCha8 seeded with `seed`,
// stream 0 draws A, stream 1 the support, stream 2 magnitudes and signs.
const STREAM_MATRIX: u64 = 0;
const STREAM_SUPPORT: u64 = 1;
const STREAM_VALUES: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random instance: Gaussian `A` with unit-norm columns, a `k`-sparse
/// reference with log-uniform magnitudes (`[1, 1e5]` for HDR, `[1, 10]` for
/// LDR) and random signs, and `b = A x_ref`.
pub fn generate_instance(m: usize, n: usize, k: usize, seed: u64, range: DynamicRange) -> Result<InstanceBundle> {
    if k > m {
        return Err(Error::invalid(format!("sparsity {k} exceeds m = {m}")));
    }
    if m == 0 || n < m {
        return Err(Error::invalid(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    let decades = match range {
        DynamicRange::Hdr => 5.0,
        DynamicRange::Ldr => 1.0,
        DynamicRange::None => return Err(Error::invalid("generated instances need HDR or LDR")),
    };
    let mut rng = rng_for(seed, STREAM_MATRIX);
    let mut a = DMatrix::<f64>::zeros(m, n);
    for j in 0..n {
        let mut col = a.column_mut(j);
        loop {
            for v in col.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= nrm;
                break;
            }
        }
    }
    let mut support = sample(&mut rng_for(seed, STREAM_SUPPORT), n, k).into_vec();
    support.sort_unstable();
    let mut rng = rng_for(seed, STREAM_VALUES);
    let mut x = DVector::zeros(n);
    for &j in &support {
        let mag = 10f64.powf(rng.random_range(0.0..decades));
        x[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    let a = DesignMatrix::dense(a)?;
    let b = a.mul(&x);
    let tag = match range {
        DynamicRange::Hdr => "hdr",
        _ => "ldr",
    };
    let meta = InstanceMeta {
        name: format!("gen-{m}x{n}-k{k}-{tag}-{seed}"),
        seed: Some(seed),
        dynamic_range: range,
        recovery: RecoveryTag::None,
    };
    InstanceBundle::new(a, b, Some(x), meta)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MmFormat {
    Coordinate,
    Array,
}

struct MmData {
    rows: usize,
    cols: usize,
    format: MmFormat,
    /// Coordinate: zero-based triplets. Array: column-major values as `(i, j, v)`.
    entries: Vec<(usize, usize, f64)>,
}

fn parse_mm<R: BufRead>(reader: R) -> Result<MmData> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, header) = match lines.next() {
        Some((ln, l)) => (ln, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(ln, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match fields[2].as_str() {
        "coordinate" => MmFormat::Coordinate,
        "array" => MmFormat::Array,
        other => return Err(parse_err(ln, format!("unsupported format '{other}'"))),
    };
    match fields[3].as_str() {
        "real" | "integer" | "double" => {}
        "pattern" => return Err(parse_err(ln, "pattern matrices carry no values")),
        other => return Err(parse_err(ln, format!("unsupported field '{other}'"))),
    }
    if fields[4] != "general" {
        return Err(parse_err(ln, format!("unsupported symmetry '{}'", fields[4])));
    }

    let mut body = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        body.push((ln, trimmed.to_string()));
    }
    let mut body = body.into_iter();
    let (ln, size) = body.next().ok_or_else(|| parse_err(ln + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|_| parse_err(ln, format!("bad size entry '{s}'"))))
        .collect::<Result<_>>()?;
    let num = |ln: usize, s: &str| -> Result<f64> {
        let v: f64 = s.parse().map_err(|_| parse_err(ln, format!("bad number '{s}'")))?;
        if !v.is_finite() {
            return Err(parse_err(ln, format!("non-finite value '{s}'")));
        }
        Ok(v)
    };

    match format {
        MmFormat::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(parse_err(ln, "coordinate size line needs 'rows cols nnz'"));
            };
            let mut entries = Vec::with_capacity(nnz);
            for (ln, line) in body.by_ref() {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(parse_err(ln, "expected 'row col value'"));
                }
                let i: usize = parts[0].parse().map_err(|_| parse_err(ln, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| parse_err(ln, "bad column index"))?;
                if i == 0 || i > rows || j == 0 || j > cols {
                    return Err(parse_err(ln, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                entries.push((i - 1, j - 1, num(ln, parts[2])?));
                if entries.len() > nnz {
                    return Err(parse_err(ln, format!("more than the declared {nnz} entries")));
                }
            }
            if entries.len() != nnz {
                return Err(parse_err(ln, format!("declared {nnz} entries, found {}", entries.len())));
            }
            Ok(MmData { rows, cols, format, entries })
        }
        MmFormat::Array => {
            let [rows, cols] = dims[..] else {
                return Err(parse_err(ln, "array size line needs 'rows cols'"));
            };
            let mut entries = Vec::with_capacity(rows * cols);
            for (ln, line) in body.by_ref() {
                for tok in line.split_whitespace() {
                    let k = entries.len();
                    if k == rows * cols {
                        return Err(parse_err(ln, "more values than rows * cols"));
                    }
                    entries.push((k % rows.max(1), k / rows.max(1), num(ln, tok)?));
                }
            }
            if entries.len() != rows * cols {
                return Err(parse_err(ln, format!("expected {} values, found {}", rows * cols, entries.len())));
            }
            Ok(MmData { rows, cols, format, entries })
        }
    }
}

/// Reads a Matrix Market file. Array files give dense storage, coordinate
/// files sparse storage with duplicate entries summed.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DesignMatrix> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<DesignMatrix> {
    let mm = parse_mm(reader)?;
    match mm.format {
        MmFormat::Array => {
            let mut a = DMatrix::zeros(mm.rows, mm.cols);
            for (i, j, v) in mm.entries {
                a[(i, j)] = v;
            }
            DesignMatrix::dense(a)
        }
        MmFormat::Coordinate => DesignMatrix::sparse(CscMatrix::from_triplets(mm.rows, mm.cols, &mm.entries)?),
    }
}

pub fn write_matrix_market<W: Write>(a: &DesignMatrix, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    match a.storage() {
        Storage::Dense(d) => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "{} {}", d.nrows(), d.ncols())?;
            for v in d.iter() {
                writeln!(w, "{v:e}")?;
            }
        }
        Storage::Sparse(s) => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", a.nrows(), a.ncols(), s.nnz())?;
            for j in 0..a.ncols() {
                for k in s.col_ptr()[j]..s.col_ptr()[j + 1] {
                    writeln!(w, "{} {} {:e}", s.row_idx()[k] + 1, j + 1, s.values()[k])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a vector: a single-column Matrix Market file, or otherwise raw
/// little-endian `f64` values.
pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_vector(&bytes)
}

pub fn parse_vector(bytes: &[u8]) -> Result<DVector<f64>> {
    if bytes.starts_with(b"%%MatrixMarket") {
        let mm = parse_mm(bytes)?;
        if mm.cols != 1 {
            return Err(parse_err(2, format!("vector files need one column, found {}", mm.cols)));
        }
        let mut v = DVector::zeros(mm.rows);
        for (i, _, x) in mm.entries {
            v[i] += x;
        }
        return Ok(v);
    }
    if !bytes.len().is_multiple_of(8) {
        return Err(parse_err(0, format!("raw vector size {} is not a multiple of 8 bytes", bytes.len())));
    }
    let v: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(parse_err(0, format!("non-finite value at position {i}")));
    }
    Ok(DVector::from_vec(v))
}

pub fn write_vector_raw<W: Write>(v: &DVector<f64>, mut out: W) -> Result<()> {
    for x in v.iter() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub const PATH_FORMAT_VERSION: u32 = 1;

/// Sparse vector as stored in path files: zero-based indices, increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub n: usize,
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

impl SparseVector {
    pub fn from_dense(x: &DVector<f64>) -> Self {
        let index: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
        let value = index.iter().map(|&j| x[j]).collect();
        SparseVector { n: x.len(), index, value }
    }

    pub fn to_dense(&self) -> Result<DVector<f64>> {
        if self.index.len() != self.value.len() {
            return Err(Error::Validation("sparse vector index/value lengths differ".into()));
        }
        if self.index.windows(2).any(|w| w[0] >= w[1]) || self.index.last().is_some_and(|&j| j >= self.n) {
            return Err(Error::Validation("sparse vector indices must be increasing and below n".into()));
        }
        let mut x = DVector::zeros(self.n);
        for (&j, &v) in self.index.iter().zip(&self.value) {
            x[j] = v;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PathFile {
    version: u32,
    t: Vec<f64>,
    x: Vec<SparseVector>,
    p: Vec<Vec<f64>>,
    #[serde(default)]
    meta: serde_json::Value,
}

/// Writes a path as JSON. Floats use the shortest representation that reads
/// back to the same bits.
pub fn write_path<W: Write>(path: &SolutionPath, meta: &serde_json::Value, out: W) -> Result<()> {
    let file = PathFile {
        version: PATH_FORMAT_VERSION,
        t: path.t_values(),
        x: path.breakpoints().iter().map(|bp| SparseVector::from_dense(&bp.x)).collect(),
        p: path.breakpoints().iter().map(|bp| bp.p.iter().copied().collect()).collect(),
        meta: meta.clone(),
    };
    let mut w = BufWriter::new(out);
    serde_json::to_writer(&mut w, &file)?;
    w.flush()?;
    Ok(())
}

pub fn read_path<R: Read>(input: R) -> Result<(SolutionPath, serde_json::Value)> {
    let file: PathFile = serde_json::from_reader(BufReader::new(input))?;
    if file.version != PATH_FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "path format version {} is not supported (expected {PATH_FORMAT_VERSION})",
            file.version
        )));
    }
    if file.t.len() != file.x.len() || file.t.len() != file.p.len() {
        return Err(Error::Validation("t, x and p must have the same number of breakpoints".into()));
    }
    let breakpoints = file
        .t
        .iter()
        .zip(&file.x)
        .zip(&file.p)
        .map(|((&t, x), p)| Ok(PathBreakpoint { t, x: x.to_dense()?, p: DVector::from_vec(p.clone()) }))
        .collect::<Result<Vec<_>>>()?;
    Ok((SolutionPath::new(breakpoints)?, file.meta))
}
