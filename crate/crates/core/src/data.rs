//! Feature-matrix datasets: CSV and binary I/O plus synthetic domain pairs.
//!
//! CSV layout: a header row naming the feature columns `f0..f{d-1}`, with an
//! optional final integer column `label`.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! "PRDA" | version: u16 | rows: u64 | cols: u64 | has_labels: u8
//!        | rows*cols f64, row-major | rows u32 labels (if has_labels)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PrdaError, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8; 4] = b"PRDA";
const BINARY_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Option<Vec<usize>>,
        name: impl Into<String>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(PrdaError::Shape(format!(
                    "{} labels for {} rows",
                    l.len(),
                    features.rows()
                )));
            }
            let classes = l.iter().copied().max().map_or(0, |m| m + 1);
            let mut seen = vec![false; classes];
            l.iter().for_each(|&c| seen[c] = true);
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(PrdaError::Data(format!(
                    "labels are not contiguous from 0: class {missing} is absent"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Binary,
}

impl DataFormat {
    /// Binary if the file starts with the magic bytes, CSV otherwise.
    pub fn detect(path: &Path) -> Result<Self> {
        let mut head = [0u8; 4];
        let mut f = File::open(path)?;
        let mut read = 0;
        while read < 4 {
            let got = f.read(&mut head[read..])?;
            if got == 0 {
                break;
            }
            read += got;
        }
        Ok(if read == 4 && &head == MAGIC {
            DataFormat::Binary
        } else {
            DataFormat::Csv
        })
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    let name = dataset_name(path);
    match format {
        DataFormat::Csv => read_csv(BufReader::new(File::open(path)?), name),
        DataFormat::Binary => read_binary(&mut BufReader::new(File::open(path)?), name),
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        DataFormat::Csv => write_csv(ds, &mut w)?,
        DataFormat::Binary => write_binary(ds, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn parse_err(line: u64, message: impl Into<String>) -> PrdaError {
    PrdaError::Parse {
        line: line as usize,
        message: message.into(),
    }
}

pub fn read_csv<R: Read>(reader: R, name: String) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let labeled = header.iter().next_back() == Some("label");
    let d = header.len() - usize::from(labeled);
    for (i, h) in header.iter().take(d).enumerate() {
        if h != format!("f{i}") {
            return Err(parse_err(1, format!("expected column 'f{i}', found '{h}'")));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        for (i, field) in record.iter().take(d).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column f{i}: '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(PrdaError::Data(format!(
                    "line {line}, column f{i}: non-finite value '{field}'"
                )));
            }
            data.push(v);
        }
        if labeled {
            let field = &record[d];
            let l: u32 = field.parse().map_err(|_| {
                parse_err(
                    line,
                    format!("label '{field}' is not a non-negative integer"),
                )
            })?;
            labels.push(l as usize);
        }
    }
    let rows = if labeled {
        labels.len()
    } else {
        data.len().checked_div(d).unwrap_or(0)
    };
    let features = Matrix::from_vec(rows, d, data)?;
    Dataset::new(features, labeled.then_some(labels), name)
}

pub fn write_csv<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let d = ds.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    wtr.write_record(&header).map_err(csv_io)?;
    let mut fields: Vec<String> = Vec::with_capacity(d + 1);
    for r in 0..ds.len() {
        fields.clear();
        // `Display` for f64 prints the shortest string that parses back exactly.
        fields.extend(ds.features.row(r).iter().map(|v| v.to_string()));
        if let Some(l) = &ds.labels {
            fields.push(l[r].to_string());
        }
        wtr.write_record(&fields).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> PrdaError {
    PrdaError::Io(std::io::Error::other(e))
}

pub fn write_binary<W: Write>(ds: &Dataset, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    w.write_all(&(ds.dim() as u64).to_le_bytes())?;
    w.write_all(&[u8::from(ds.labels.is_some())])?;
    for v in ds.features.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(labels) = &ds.labels {
        for &l in labels {
            let l = u32::try_from(l)
                .map_err(|_| PrdaError::Data(format!("label {l} does not fit in 32 bits")))?;
            w.write_all(&l.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| PrdaError::Data(format!("truncated binary matrix reading {what}: {e}")))?;
    Ok(buf)
}

pub fn read_binary<R: Read>(r: &mut R, name: String) -> Result<Dataset> {
    let magic: [u8; 4] = read_exact(r, "magic")?;
    if &magic != MAGIC {
        return Err(PrdaError::Data(
            "not a PRDA binary matrix (bad magic)".into(),
        ));
    }
    let version = u16::from_le_bytes(read_exact(r, "version")?);
    if version != BINARY_VERSION {
        return Err(PrdaError::Data(format!(
            "unsupported binary matrix version {version}"
        )));
    }
    let rows = u64::from_le_bytes(read_exact(r, "rows")?) as usize;
    let cols = u64::from_le_bytes(read_exact(r, "cols")?) as usize;
    let has_labels = match read_exact::<1, _>(r, "label flag")?[0] {
        0 => false,
        1 => true,
        other => return Err(PrdaError::Data(format!("bad label flag {other}"))),
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| PrdaError::Data("matrix dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        data.push(f64::from_le_bytes(read_exact(r, "values")?));
    }
    let features = Matrix::from_vec(rows, cols, data)?;
    let labels = if has_labels {
        let mut l = Vec::with_capacity(rows.min(1 << 24));
        for _ in 0..rows {
            l.push(u32::from_le_bytes(read_exact(r, "labels")?) as usize);
        }
        Some(l)
    } else {
        None
    };
    Dataset::new(features, labels, name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftFamily {
    Rotation,
    Translation,
    CovarianceScale,
    Mixed,
}

impl std::str::FromStr for ShiftFamily {
    type Err = PrdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(Self::Rotation),
            "translation" => Ok(Self::Translation),
            "covariance-scale" => Ok(Self::CovarianceScale),
            "mixed" => Ok(Self::Mixed),
            other => Err(PrdaError::Config(format!(
                "unknown shift family '{other}' (expected rotation, translation, covariance-scale or mixed)"
            ))),
        }
    }
}

impl std::fmt::Display for ShiftFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rotation => "rotation",
            Self::Translation => "translation",
            Self::CovarianceScale => "covariance-scale",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub family: ShiftFamily,
    /// Radians for rotation; distance for translation; relative growth for
    /// covariance scaling.
    pub magnitude: f64,
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub seed: u64,
}

/// Shape of the class-conditional Gaussians behind [`synth_domain_pair`].
///
/// Samples live in a random orthonormal frame `q0..q{d-1}`. The class means
/// are spaced `separation` apart along `q0` and share an offset of `offset`
/// along `q{partner}`. Along `q0` only the isotropic `noise` applies; along
/// `qi` (i ≥ 1) the spread is `lead·decay^(i-1)` on top of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobGeometry {
    pub separation: f64,
    pub offset: f64,
    pub noise: f64,
    pub lead: f64,
    pub decay: f64,
    /// Frame axis paired with `q0` to form the plane of rotation.
    pub partner: usize,
}

impl Default for BlobGeometry {
    fn default() -> Self {
        Self {
            separation: 4.0,
            offset: 2.0,
            noise: 0.3,
            lead: 3.0,
            decay: 0.75,
            partner: 2,
        }
    }
}

pub fn synth_domain_pair(spec: &ShiftSpec) -> Result<(Dataset, Dataset)> {
    synth_domain_pair_with(spec, &BlobGeometry::default())
}

/// Source and target drawn i.i.d. from the same blob mixture, with the
/// target then passed through the family's transform at `spec.magnitude`.
pub fn synth_domain_pair_with(spec: &ShiftSpec, geo: &BlobGeometry) -> Result<(Dataset, Dataset)> {
    if spec.dim < 2 {
        return Err(PrdaError::Config(
            "synthetic domains need at least 2 dimensions".into(),
        ));
    }
    if spec.classes < 2 || spec.per_class == 0 {
        return Err(PrdaError::Config(
            "synthetic domains need at least 2 classes and 1 sample per class".into(),
        ));
    }
    if !(spec.magnitude >= 0.0 && spec.magnitude.is_finite()) {
        return Err(PrdaError::Config(format!(
            "shift magnitude must be non-negative, got {}",
            spec.magnitude
        )));
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let frame = random_frame(&mut rng, d);
    let partner = geo.partner.clamp(1, d - 1);

    let spread: Vec<f64> = (0..d)
        .map(|i| {
            let structured = if i == 0 {
                0.0
            } else {
                geo.lead * geo.decay.powi(i as i32 - 1)
            };
            (structured * structured + geo.noise * geo.noise).sqrt()
        })
        .collect();
    let class_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|c| {
            let along = geo.separation * (c as f64 - (spec.classes - 1) as f64 / 2.0);
            (0..d)
                .map(|r| along * frame[0][r] + geo.offset * frame[partner][r])
                .collect()
        })
        .collect();

    let draw = |rng: &mut ChaCha8Rng| -> (Matrix, Vec<usize>) {
        let n = spec.classes * spec.per_class;
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (c, mean) in class_means.iter().enumerate() {
            for _ in 0..spec.per_class {
                let mut x = mean.clone();
                for (axis, s) in frame.iter().zip(&spread) {
                    let z: f64 = StandardNormal.sample(rng);
                    x.iter_mut().zip(axis).for_each(|(xi, a)| *xi += s * z * a);
                }
                data.extend(x);
                labels.push(c);
            }
        }
        (Matrix::from_raw(n, d, data), labels)
    };
    let (xs, ys) = draw(&mut rng);
    let (mut xt, yt) = draw(&mut rng);

    let m = spec.magnitude;
    let (u, v) = (&frame[0], &frame[partner]);
    match spec.family {
        ShiftFamily::Rotation => rotate_in_plane(&mut xt, u, v, m),
        ShiftFamily::Translation => translate(&mut xt, u, v, m),
        ShiftFamily::CovarianceScale => scale_about_mean(&mut xt, 1.0 + m),
        ShiftFamily::Mixed => {
            rotate_in_plane(&mut xt, u, v, m);
            translate(&mut xt, u, v, m);
            scale_about_mean(&mut xt, 1.0 + m);
        }
    }

    Ok((
        Dataset::new(xs, Some(ys), "source")?,
        Dataset::new(xt, Some(yt), "target")?,
    ))
}

/// Orthonormal frame from Gram-Schmidt on Gaussian vectors.
fn random_frame(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        for _ in 0..2 {
            for q in &frame {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, q)| *x -= dot * q);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            frame.push(v);
        }
    }
    frame
}

/// Rotates every row by `angle` in the plane spanned by orthonormal `u`, `v`
/// (about the origin), taking `u` toward `v`.
fn rotate_in_plane(x: &mut Matrix, u: &[f64], v: &[f64], angle: f64) {
    if angle == 0.0 {
        return;
    }
    let (s, c) = angle.sin_cos();
    for r in 0..x.rows() {
        let row = x.row_mut(r);
        let a: f64 = row.iter().zip(u).map(|(x, u)| x * u).sum();
        let b: f64 = row.iter().zip(v).map(|(x, v)| x * v).sum();
        let (na, nb) = (c * a - s * b, s * a + c * b);
        for ((x, ui), vi) in row.iter_mut().zip(u).zip(v) {
            *x += (na - a) * ui + (nb - b) * vi;
        }
    }
}

fn translate(x: &mut Matrix, u: &[f64], v: &[f64], distance: f64) {
    if distance == 0.0 {
        return;
    }
    let dir: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a + b) / std::f64::consts::SQRT_2)
        .collect();
    for r in 0..x.rows() {
        x.row_mut(r)
            .iter_mut()
            .zip(&dir)
            .for_each(|(x, d)| *x += distance * d);
    }
}

fn scale_about_mean(x: &mut Matrix, factor: f64) {
    if factor == 1.0 {
        return;
    }
    let mean = x.column_means();
    for r in 0..x.rows() {
        x.row_mut(r)
            .iter_mut()
            .zip(&mean)
            .for_each(|(x, m)| *x = m + factor * (*x - m));
    }
}
