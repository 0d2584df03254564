//! Benchmark report files: a deterministic section that is hashed, a
//! provenance section that is not, and plot-ready CSV exports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::metrics::{AggregateCell, Exp2Report, HistogramBin};
use crate::reference::ReferencePolicy;

/// Run metadata excluded from the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub created_at: Option<String>,
    pub host: Option<String>,
    /// SHA-256 of the compact JSON encoding of the deterministic section.
    pub deterministic_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport<T> {
    pub deterministic: T,
    pub provenance: Provenance,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl<T: Serialize> BenchReport<T> {
    pub fn new(deterministic: T, created_at: Option<String>, host: Option<String>) -> Result<Self> {
        let digest = sha256_hex(&serde_json::to_vec(&deterministic)?);
        Ok(Self {
            deterministic,
            provenance: Provenance {
                tool: "credattr".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                created_at,
                host,
                deterministic_sha256: digest,
            },
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// One row per method with entropy and std columns per policy.
pub fn write_table1_csv<W: Write>(cells: &[AggregateCell], writer: W) -> Result<()> {
    let policies = [
        ReferencePolicy::Random,
        ReferencePolicy::Boundary,
        ReferencePolicy::Tight,
    ];
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["method".to_string()];
    for p in policies {
        header.push(format!("{p}_entropy"));
        header.push(format!("{p}_std"));
    }
    wtr.write_record(&header)?;
    let mut methods: Vec<_> = cells.iter().map(|c| c.method).collect();
    methods.dedup();
    for m in methods {
        let mut row = vec![m.to_string()];
        for p in policies {
            for metric in ["entropy", "std"] {
                let v = cells
                    .iter()
                    .find(|c| c.method == m && c.policy == p && c.metric == metric)
                    .map(|c| c.value.to_string())
                    .unwrap_or_default();
                row.push(v);
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["policy", "method", "bin_start", "bin_end", "count"])?;
    for b in bins {
        wtr.write_record([
            b.policy.to_string(),
            b.method.to_string(),
            b.bin_start.to_string(),
            b.bin_end.to_string(),
            b.count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `exp2_report.json`, `exp2_table1.csv` and `exp2_histogram.csv`.
pub fn write_exp2_outputs(
    dir: impl AsRef<Path>,
    report: &Exp2Report,
    created_at: Option<String>,
    host: Option<String>,
) -> Result<BenchReport<&Exp2Report>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let bench = BenchReport::new(report, created_at, host)?;
    bench.write_json(dir.join("exp2_report.json"))?;
    write_table1_csv(&report.aggregate, std::fs::File::create(dir.join("exp2_table1.csv"))?)?;
    write_histogram_csv(
        &report.histogram,
        std::fs::File::create(dir.join("exp2_histogram.csv"))?,
    )?;
    Ok(bench)
}
