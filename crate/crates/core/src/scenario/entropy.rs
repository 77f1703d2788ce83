use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::von_neumann_entropy;
use crate::scenario::dataset::{read_reduced, RunKind, SpinTable, TrajectoryDataset, REDUCED_FILE};

pub const ENTROPY_FILE: &str = "entropy.csv";

/// Site-1 entropy over time together with the instants of maximal
/// entanglement and minimal spin length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub times: Vec<f64>,
    /// Bits.
    pub entropy: Vec<f64>,
    pub max_entropy: f64,
    pub argmax_time: f64,
    /// Smallest `|<S_n>|` over all sites and samples.
    pub min_length: f64,
    pub min_length_time: f64,
    /// 1-based site of the minimum.
    pub min_length_site: usize,
}

fn argmax(times: &[f64], values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .zip(times)
        .fold((f64::NEG_INFINITY, f64::NAN), |best, (&v, &t)| if v > best.0 { (v, t) } else { best })
}

fn build(times: Vec<f64>, entropy: Vec<f64>, lengths: impl Iterator<Item = (usize, f64, f64)>) -> Result<EntropyReport> {
    if times.is_empty() {
        return Err(Error::Dataset("no samples".into()));
    }
    let (max_entropy, argmax_time) = argmax(&times, &entropy);
    let (mut min_length, mut min_length_time, mut min_length_site) = (f64::INFINITY, f64::NAN, 0);
    for (site, t, len) in lengths {
        if len < min_length {
            (min_length, min_length_time, min_length_site) = (len, t, site);
        }
    }
    Ok(EntropyReport {
        times,
        entropy,
        max_entropy,
        argmax_time,
        min_length,
        min_length_time,
        min_length_site,
    })
}

/// Recomputes the site-1 entropy from the stored reduced density matrices
/// of a quantum dataset directory.
pub fn entropy_report(dir: &Path) -> Result<EntropyReport> {
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path)
            .map(BufReader::new)
            .map_err(|e| Error::Dataset(format!("cannot open {}: {e}", path.display())))
    };
    let reduced = read_reduced(open(REDUCED_FILE)?)?;
    let table = SpinTable::from_reader(open(&RunKind::Quantum.csv_file())?)?;
    let mut times = Vec::with_capacity(reduced.len());
    let mut entropy = Vec::with_capacity(reduced.len());
    for (t, rho) in &reduced {
        times.push(*t);
        entropy.push(von_neumann_entropy(rho)?);
    }
    let lengths = table
        .sites
        .iter()
        .flat_map(|(&site, s)| s.times.iter().zip(&s.length).map(move |(&t, &l)| (site, t, l)));
    build(times, entropy, lengths)
}

/// Same report straight from an in-memory quantum dataset.
pub fn entropy_report_from_dataset(dataset: &TrajectoryDataset) -> Result<EntropyReport> {
    if dataset.kind() != RunKind::Quantum {
        return Err(Error::Dataset("entropy needs a quantum dataset".into()));
    }
    let mut times = Vec::new();
    let mut entropy = Vec::new();
    for s in &dataset.samples {
        times.push(s.t);
        entropy.push(s.entropy1.unwrap_or(f64::NAN));
    }
    let lengths = dataset
        .samples
        .iter()
        .flat_map(|s| s.sites.iter().map(move |o| (o.site + 1, s.t, o.length)));
    build(times, entropy, lengths)
}

impl EntropyReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "entropy1"])?;
        for (t, s) in self.times.iter().zip(&self.entropy) {
            w.write_record([format!("{t:.16e}"), format!("{s:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}
