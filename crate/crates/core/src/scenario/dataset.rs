use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{EquationForm, IntegratorConfig};
use crate::model::SystemSpec;
use crate::observables::{basis_labels, SiteObservables};
use crate::quantum::DensityMatrix;
use crate::scenario::config::ScenarioConfig;
use crate::spin_algebra::{ComplexMatrix, Spin};

pub const REDUCED_FILE: &str = "reduced1.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Quantum,
    Classical,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Quantum => "quantum",
            RunKind::Classical => "classical",
        }
    }

    pub fn csv_file(self) -> String {
        format!("{}.csv", self.name())
    }

    pub fn metadata_file(self) -> String {
        format!("{}.meta.json", self.name())
    }
}

/// Everything needed to reproduce a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: RunKind,
    pub config: ScenarioConfig,
    pub system: SystemSpec,
    pub integrator: IntegratorConfig,
    pub form: EquationForm,
    pub seed: u64,
    pub members: usize,
    /// Largest per-step norm deviation before renormalization (quantum runs).
    pub max_norm_drift: Option<f64>,
    pub version: String,
}

/// Observables at one sampled instant. Ensemble runs store member means.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub sites: Vec<SiteObservables>,
    pub energy: f64,
    pub norm: Option<f64>,
    pub entropy1: Option<f64>,
    pub occupations: Vec<f64>,
    pub classes: Vec<f64>,
    pub reduced1: Option<ComplexMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub metadata: Metadata,
    pub samples: Vec<Sample>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn class_label(twice_m: i32) -> String {
    format!("class_2M{twice_m:+}")
}

impl TrajectoryDataset {
    pub fn kind(&self) -> RunKind {
        self.metadata.kind
    }

    pub fn spin(&self) -> Spin {
        self.metadata.system.spin
    }

    pub fn sites(&self) -> usize {
        self.metadata.system.sites
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn occupation_labels(&self) -> Vec<String> {
        match self.kind() {
            RunKind::Quantum => basis_labels(self.spin(), self.sites())
                .into_iter()
                .map(|l| format!("occ_{l}"))
                .collect(),
            RunKind::Classical => Vec::new(),
        }
    }

    pub fn class_labels(&self) -> Vec<String> {
        match self.kind() {
            RunKind::Quantum => {
                let top = (self.spin().twice() as usize * self.sites()) as i32;
                (0..=top).map(|k| class_label(top - 2 * k)).collect()
            }
            RunKind::Classical => Vec::new(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut header: Vec<String> = ["t", "site", "sx", "sy", "sz", "sx_norm", "sy_norm", "sz_norm", "length"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        match self.kind() {
            RunKind::Quantum => {
                header.extend(["norm", "energy", "entropy1"].map(String::from));
                header.extend(self.occupation_labels());
                header.extend(self.class_labels());
            }
            RunKind::Classical => header.push("energy".into()),
        }
        header
    }

    /// Row-by-row invariant check: increasing finite times, unit norm,
    /// spin lengths bounded by `S` (equal to `S` classically) and
    /// probabilities summing to one.
    pub fn validate(&self) -> Result<()> {
        let s = self.spin().value();
        let fail = |t: f64, what: String| Err(Error::Dataset(format!("t = {t}: {what}")));
        let mut last = f64::NEG_INFINITY;
        for sample in &self.samples {
            let t = sample.t;
            if !(t > last) || !t.is_finite() {
                return fail(t, "times must be finite and strictly increasing".into());
            }
            last = t;
            if sample.sites.len() != self.sites() {
                return fail(t, format!("expected {} sites, got {}", self.sites(), sample.sites.len()));
            }
            let mut values = vec![sample.energy];
            values.extend(sample.norm);
            values.extend(sample.entropy1);
            values.extend(&sample.occupations);
            values.extend(&sample.classes);
            for o in &sample.sites {
                values.extend([o.sx, o.sy, o.sz, o.length, o.entropy]);
            }
            if values.iter().any(|v| !v.is_finite()) {
                return fail(t, "non-finite value".into());
            }
            for o in &sample.sites {
                let ok = match self.kind() {
                    RunKind::Quantum => o.length <= s * (1.0 + 1e-9),
                    RunKind::Classical => (o.length - s).abs() <= 1e-9 * s,
                };
                if !ok {
                    return fail(t, format!("site {} has spin length {}", o.site + 1, o.length));
                }
            }
            if let Some(norm) = sample.norm {
                if (norm - 1.0).abs() > 1e-9 {
                    return fail(t, format!("norm {norm}"));
                }
            }
            for probs in [&sample.occupations, &sample.classes] {
                if !probs.is_empty() {
                    let total: f64 = probs.iter().sum();
                    if (total - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < -1e-12) {
                        return fail(t, format!("probabilities sum to {total}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let s = self.spin().value();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        for sample in &self.samples {
            for o in &sample.sites {
                let mut row = vec![num(sample.t), (o.site + 1).to_string()];
                row.extend([o.sx, o.sy, o.sz, o.sx / s, o.sy / s, o.sz / s, o.length].map(num));
                if self.kind() == RunKind::Quantum {
                    row.push(num(sample.norm.unwrap_or(f64::NAN)));
                    row.push(num(sample.energy));
                    row.push(num(sample.entropy1.unwrap_or(f64::NAN)));
                    row.extend(sample.occupations.iter().map(|&p| num(p)));
                    row.extend(sample.classes.iter().map(|&p| num(p)));
                } else {
                    row.push(num(sample.energy));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Site-1 reduced density matrices, one row per sample, as
    /// `re_a_b, im_a_b` in row-major order.
    pub fn write_reduced_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.spin().dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        for a in 0..d {
            for b in 0..d {
                header.push(format!("re_{a}_{b}"));
                header.push(format!("im_{a}_{b}"));
            }
        }
        w.write_record(&header)?;
        for sample in &self.samples {
            let rho = sample
                .reduced1
                .as_ref()
                .ok_or_else(|| Error::Dataset("sample has no reduced density matrix".into()))?;
            let mut row = vec![num(sample.t)];
            for a in 0..d {
                for b in 0..d {
                    row.push(num(rho[(a, b)].re));
                    row.push(num(rho[(a, b)].im));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the trajectory CSV, the metadata sidecar and, for quantum
    /// runs, the site-1 reduced densities. Returns the files written.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let kind = self.kind();
        let mut written = Vec::new();

        let path = dir.join(kind.csv_file());
        self.write_csv(BufWriter::new(File::create(&path)?))?;
        written.push(path);

        if kind == RunKind::Quantum {
            let path = dir.join(REDUCED_FILE);
            self.write_reduced_csv(BufWriter::new(File::create(&path)?))?;
            written.push(path);
        }

        let path = dir.join(kind.metadata_file());
        let mut file = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut file, &self.metadata)?;
        file.write_all(b"\n")?;
        file.flush()?;
        written.push(path);
        Ok(written)
    }
}

/// One site's sampled spin direction, read back from a trajectory CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteSeries {
    pub times: Vec<f64>,
    /// `<S>/S` or `S_cl/S`.
    pub normalized: Vec<[f64; 3]>,
    pub length: Vec<f64>,
}

/// Spin columns of a trajectory CSV grouped by 1-based site.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpinTable {
    pub sites: BTreeMap<usize, SiteSeries>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Dataset(format!("missing column {name:?}")))
}

fn field(record: &csv::StringRecord, idx: usize, line: usize) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("line {line}: cannot parse {raw:?} as a number")))
}

impl SpinTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let cols: Vec<usize> = ["t", "site", "sx_norm", "sy_norm", "sz_norm", "length"]
            .iter()
            .map(|name| column(&headers, name))
            .collect::<Result<_>>()?;
        let mut table = SpinTable::default();
        for (k, record) in r.records().enumerate() {
            let record = record?;
            let line = k + 2;
            let v: Vec<f64> = cols.iter().map(|&c| field(&record, c, line)).collect::<Result<_>>()?;
            if v[1] < 1.0 || v[1].fract() != 0.0 {
                return Err(Error::Dataset(format!("line {line}: bad site index {}", v[1])));
            }
            let series = table.sites.entry(v[1] as usize).or_default();
            if series.times.last().is_some_and(|&last| v[0] <= last) {
                return Err(Error::Dataset(format!("line {line}: times must increase per site")));
            }
            series.times.push(v[0]);
            series.normalized.push([v[2], v[3], v[4]]);
            series.length.push(v[5]);
        }
        if table.sites.is_empty() {
            return Err(Error::Dataset("no data rows".into()));
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Dataset(format!("cannot open {}: {e}", path.display())))?;
        SpinTable::from_reader(std::io::BufReader::new(file))
    }
}

/// Reads the site-1 reduced densities written by
/// [`TrajectoryDataset::write_reduced_csv`].
pub fn read_reduced<R: Read>(reader: R) -> Result<Vec<(f64, DensityMatrix)>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let entries = headers.len().saturating_sub(1) / 2;
    let d = (entries as f64).sqrt().round() as usize;
    if headers.get(0) != Some("t") || d == 0 || d * d * 2 + 1 != headers.len() {
        return Err(Error::Dataset("reduced density header is malformed".into()));
    }
    let mut out = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let t = field(&record, 0, line)?;
        let mut m = ComplexMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let base = 1 + 2 * (a * d + b);
                m[(a, b)] = Complex64::new(field(&record, base, line)?, field(&record, base + 1, line)?);
            }
        }
        out.push((t, DensityMatrix::from_raw(m)));
    }
    Ok(out)
}
