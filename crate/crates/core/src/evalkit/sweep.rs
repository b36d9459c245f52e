use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::mean_std;

/// Deployment method compared in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Both steps: adaptation, then distillation to the target channel.
    Dasein,
    /// Adaptation only, deployed at the target channel as is.
    DaseinS1,
    /// Source model deployed directly.
    TestD,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dasein, Method::DaseinS1, Method::TestD];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dasein => "DASEIN",
            Method::DaseinS1 => "DASEIN-S1",
            Method::TestD => "Test-d",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dasein" => Ok(Method::Dasein),
            "dasein-s1" | "s1" => Ok(Method::DaseinS1),
            "test-d" | "testd" => Ok(Method::TestD),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Snr,
    Cr,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(Axis::Snr),
            "cr" => Ok(Axis::Cr),
            other => Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// Raw outcome of one (axis point, method, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub axis: f64,
    pub method: Method,
    pub seed: u64,
    /// Accuracy per channel-noise draw.
    pub draws: Vec<f64>,
}

impl SweepRecord {
    pub fn accuracy(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.draws.len().max(1) as f64
    }
}

/// Aggregate of one axis point for one method over the seed x draw grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: f64,
    pub method: Method,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub name: String,
    pub kind: Axis,
    pub axis: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.records.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for method in self.methods() {
            for &axis in &self.axis {
                let vals: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|r| r.method == method && r.axis == axis)
                    .flat_map(|r| r.draws.iter().copied())
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&vals);
                out.push(SweepPoint { axis, method, mean, std });
            }
        }
        out
    }

    pub fn point(&self, method: Method, axis: f64) -> Option<SweepPoint> {
        self.points().into_iter().find(|p| p.method == method && p.axis == axis)
    }

    /// True when accuracy never rises by more than `tolerance` as the axis
    /// value decreases.
    pub fn is_monotone(&self, method: Method, tolerance: f64) -> bool {
        let pts: Vec<SweepPoint> = self.points().into_iter().filter(|p| p.method == method).collect();
        pts.windows(2).all(|w| w[0].mean <= w[1].mean + tolerance)
    }

    pub fn csv_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("sweep_{}.csv", self.name))
    }

    /// Per-seed rows `axis,method,seed,accuracy`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["axis", "method", "seed", "accuracy"])
            .map_err(|e| Error::Data(e.to_string()))?;
        for r in &self.records {
            w.write_record([r.axis.to_string(), r.method.to_string(), r.seed.to_string(), r.accuracy().to_string()])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = self.csv_path(dir);
        std::fs::write(&path, self.to_csv()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn check_axis(axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Empty("sweep axis is empty".into()));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sweep axis must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Evaluates every (axis point, method, seed) cell with `cell`, which returns
/// per-draw accuracies. With `jobs > 1` cells run on a dedicated pool; the
/// result is assembled in grid order either way.
pub fn run_sweep<F>(
    name: &str,
    kind: Axis,
    axis: &[f64],
    methods: &[Method],
    seeds: &[u64],
    jobs: usize,
    cell: F,
) -> Result<SweepResult>
where
    F: Fn(Method, f64, u64) -> Result<Vec<f64>> + Sync,
{
    check_axis(axis)?;
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("sweep needs at least one method and one seed".into()));
    }
    let grid: Vec<(f64, Method, u64)> = axis
        .iter()
        .flat_map(|&a| methods.iter().flat_map(move |&m| seeds.iter().map(move |&s| (a, m, s))))
        .collect();
    let run = |&(a, m, s): &(f64, Method, u64)| -> Result<SweepRecord> {
        let draws = cell(m, a, s)?;
        if draws.is_empty() || draws.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange(format!("cell ({a}, {m}, {s}) returned invalid accuracies")));
        }
        Ok(SweepRecord {
            axis: a,
            method: m,
            seed: s,
            draws,
        })
    };
    let records = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        grid.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(SweepResult {
        name: name.to_string(),
        kind,
        axis: axis.to_vec(),
        records,
    })
}

/// Target accuracy against SNR (dB).
pub fn snr_sweep<F>(name: &str, snr_db: &[f64], methods: &[Method], seeds: &[u64], jobs: usize, cell: F) -> Result<SweepResult>
where
    F: Fn(Method, f64, u64) -> Result<Vec<f64>> + Sync,
{
    run_sweep(name, Axis::Snr, snr_db, methods, seeds, jobs, cell)
}

/// Target accuracy against compression rate; `cell` retrains per point.
pub fn cr_sweep<F>(name: &str, crs: &[f64], methods: &[Method], seeds: &[u64], jobs: usize, cell: F) -> Result<SweepResult>
where
    F: Fn(Method, f64, u64) -> Result<Vec<f64>> + Sync,
{
    if crs.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return Err(Error::Config("compression rates must lie in (0, 1]".into()));
    }
    run_sweep(name, Axis::Cr, crs, methods, seeds, jobs, cell)
}

/// `from, from + step, ...` up to and including `to` (with a small slack for
/// rounding).
pub fn axis_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(from <= to) || !from.is_finite() || !to.is_finite() {
        return Err(Error::Config(format!("bad axis range {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}
