use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::dataset::{SiteSeries, SpinTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteComparison {
    /// 1-based site index.
    pub site: usize,
    /// Largest Euclidean distance between the normalized spin vectors.
    pub max_deviation: f64,
    pub time_of_max: f64,
    /// Root-mean-square deviation of the normalized x, y and z components.
    pub rms: [f64; 3],
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sites: Vec<SiteComparison>,
    pub max_deviation: f64,
    pub time_of_max: f64,
    /// Common time range `[start, end]` both files cover.
    pub overlap: [f64; 2],
}

impl ComparisonReport {
    pub fn site(&self, site: usize) -> Option<&SiteComparison> {
        self.sites.iter().find(|s| s.site == site)
    }
}

/// Linear interpolation of `series` at `t`, which must lie inside its range.
fn interpolate(series: &SiteSeries, t: f64) -> [f64; 3] {
    let times = &series.times;
    let i = times.partition_point(|&x| x < t);
    if i < times.len() && times[i] == t {
        return series.normalized[i];
    }
    let (i0, i1) = (i - 1, i);
    let w = (t - times[i0]) / (times[i1] - times[i0]);
    let (a, b) = (series.normalized[i0], series.normalized[i1]);
    [0, 1, 2].map(|k| a[k] + w * (b[k] - a[k]))
}

fn in_range(times: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    times.iter().copied().filter(|&t| t >= lo && t <= hi).collect()
}

fn compare_series(site: usize, a: &SiteSeries, b: &SiteSeries) -> Result<SiteComparison> {
    let lo = a.times[0].max(b.times[0]);
    let hi = a.times[a.times.len() - 1].min(b.times[b.times.len() - 1]);
    if lo > hi {
        return Err(Error::Dataset(format!("site {site}: time ranges do not overlap")));
    }
    let ta = in_range(&a.times, lo, hi);
    let tb = in_range(&b.times, lo, hi);
    let grid = if tb.len() < ta.len() { tb } else { ta };
    let mut max_deviation = 0.0;
    let mut time_of_max = grid[0];
    let mut sq = [0.0; 3];
    for &t in &grid {
        let (va, vb) = (interpolate(a, t), interpolate(b, t));
        let d = [0, 1, 2].map(|k| va[k] - vb[k]);
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if dist > max_deviation {
            max_deviation = dist;
            time_of_max = t;
        }
        for k in 0..3 {
            sq[k] += d[k] * d[k];
        }
    }
    let n = grid.len() as f64;
    Ok(SiteComparison {
        site,
        max_deviation,
        time_of_max,
        rms: sq.map(|s| (s / n).sqrt()),
        samples: grid.len(),
    })
}

/// Compares normalized spin trajectories site by site on the coarser of the
/// two time grids, interpolating the finer one linearly.
pub fn compare(a: &SpinTable, b: &SpinTable) -> Result<ComparisonReport> {
    let mut sites = Vec::new();
    for (site, sa) in &a.sites {
        if let Some(sb) = b.sites.get(site) {
            sites.push(compare_series(*site, sa, sb)?);
        }
    }
    if sites.is_empty() {
        return Err(Error::Dataset("the two datasets share no sites".into()));
    }
    let worst = sites
        .iter()
        .fold(&sites[0], |w, s| if s.max_deviation > w.max_deviation { s } else { w });
    let (max_deviation, time_of_max) = (worst.max_deviation, worst.time_of_max);
    let first = (&a.sites[&sites[0].site], &b.sites[&sites[0].site]);
    let overlap = [
        first.0.times[0].max(first.1.times[0]),
        first.0.times.last().unwrap().min(*first.1.times.last().unwrap()),
    ];
    Ok(ComparisonReport {
        sites,
        max_deviation,
        time_of_max,
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(times: &[f64], f: impl Fn(f64) -> [f64; 3]) -> SiteSeries {
        SiteSeries {
            times: times.to_vec(),
            normalized: times.iter().map(|&t| f(t)).collect(),
            length: vec![1.0; times.len()],
        }
    }

    fn table(s: SiteSeries) -> SpinTable {
        let mut t = SpinTable::default();
        t.sites.insert(1, s);
        t
    }

    fn precession(t: f64) -> [f64; 3] {
        [t.cos(), t.sin(), 0.0]
    }

    #[test]
    fn identical_tables_have_zero_deviation() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let a = table(series(&times, precession));
        let r = compare(&a, &a).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        assert_eq!(r.sites[0].rms, [0.0; 3]);
        assert_eq!(r.sites[0].samples, 50);
    }

    #[test]
    fn constant_offset_is_measured() {
        let times: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let a = table(series(&times, |_| [0.0, 0.0, 1.0]));
        let b = table(series(&times, |t| [0.0, 0.0, if t == 4.0 { 0.5 } else { 0.9 }]));
        let r = compare(&a, &b).unwrap();
        assert!((r.max_deviation - 0.5).abs() < 1e-15);
        assert_eq!(r.time_of_max, 4.0);
        let expect = ((10.0 * 0.01 + 0.25) / 11.0f64).sqrt();
        assert!((r.sites[0].rms[2] - expect).abs() < 1e-15);
        assert_eq!(r.sites[0].rms[0], 0.0);
    }

    #[test]
    fn resamples_onto_coarser_grid() {
        let fine: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.001).collect();
        let coarse: Vec<f64> = (0..=10).map(|k| 0.05 + k as f64 * 0.09).collect();
        let line = |t: f64| [t, 2.0 * t, 0.0];
        let a = table(series(&fine, line));
        let b = table(series(&coarse, line));
        let r = compare(&a, &b).unwrap();
        assert_eq!(r.sites[0].samples, 11);
        assert!(r.max_deviation < 1e-12);
        let r = compare(&b, &a).unwrap();
        assert_eq!(r.sites[0].samples, 11);
        assert!((r.overlap[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn disjoint_ranges_are_an_error() {
        let a = table(series(&[0.0, 1.0], precession));
        let b = table(series(&[2.0, 3.0], precession));
        assert!(compare(&a, &b).is_err());
        let mut c = SpinTable::default();
        c.sites.insert(2, series(&[0.0, 1.0], precession));
        assert!(compare(&a, &c).is_err());
    }
}
