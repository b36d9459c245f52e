use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub phase: u8,
    pub epoch: usize,
    pub l_ce: f64,
    pub l_uda: f64,
    pub l_kd: f64,
    pub delta: f64,
    pub eta_sre: f64,
    pub eta_cce: f64,
    pub eta_decoder: f64,
    pub source_acc: Option<f64>,
    pub target_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricLog {
    pub rows: Vec<EpochMetrics>,
}

impl MetricLog {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record([
                "phase", "epoch", "l_ce", "l_uda", "l_kd", "delta", "eta_sre", "eta_cce", "eta_decoder",
                "source_acc", "target_acc",
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.rows.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let mut log = MetricLog::default();
        assert!(log.to_csv().unwrap().starts_with("phase,epoch,l_ce"));
        log.rows.push(EpochMetrics {
            phase: 1,
            epoch: 0,
            l_ce: 1.5,
            l_uda: 0.25,
            l_kd: 0.0,
            delta: 0.0,
            eta_sre: 1e-3,
            eta_cce: 1e-2,
            eta_decoder: 1e-2,
            source_acc: Some(0.5),
            target_acc: None,
        });
        let text = log.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "phase,epoch,l_ce,l_uda,l_kd,delta,eta_sre,eta_cce,eta_decoder,source_acc,target_acc");
        assert_eq!(lines[1], "1,0,1.5,0.25,0.0,0.0,0.001,0.01,0.01,0.5,");
    }
}
