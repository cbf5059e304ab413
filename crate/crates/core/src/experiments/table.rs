//! Result rows and the CSV schema shared by every experiment:
//! `experiment, estimator, <sweep columns>, mse_pos, mse_vel, crlb_pos,
//! crlb_vel, outage_rate, trials, seed`. Missing metrics are empty fields.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRIC_COLUMNS: [&str; 7] = [
    "mse_pos",
    "mse_vel",
    "crlb_pos",
    "crlb_vel",
    "outage_rate",
    "trials",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub estimator: String,
    /// One value per sweep column of the table.
    pub sweep: Vec<String>,
    /// [m²]
    pub mse_pos: Option<f64>,
    /// [m²/s²]
    pub mse_vel: Option<f64>,
    pub crlb_pos: Option<f64>,
    pub crlb_vel: Option<f64>,
    pub outage_rate: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Not written to CSV so that tables stay reproducible.
    pub wall_time: f64,
}

impl ResultRow {
    pub fn new(experiment: &str, estimator: &str, sweep: Vec<String>, trials: usize, seed: u64) -> Self {
        ResultRow {
            experiment: experiment.into(),
            estimator: estimator.into(),
            sweep,
            mse_pos: None,
            mse_vel: None,
            crlb_pos: None,
            crlb_vel: None,
            outage_rate: None,
            trials,
            seed,
            wall_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub sweep_columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

fn field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn new(sweep_columns: &[&str]) -> Self {
        ResultTable {
            sweep_columns: sweep_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["experiment".to_string(), "estimator".to_string()];
        h.extend(self.sweep_columns.iter().cloned());
        h.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
        h
    }

    pub fn push(&mut self, row: ResultRow) -> Result<()> {
        if row.sweep.len() != self.sweep_columns.len() {
            return Err(Error::DimensionMismatch {
                what: "sweep values",
                expected: self.sweep_columns.len(),
                got: row.sweep.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.experiment.clone(), r.estimator.clone()];
            rec.extend(r.sweep.iter().cloned());
            rec.extend([
                field(r.mse_pos),
                field(r.mse_vel),
                field(r.crlb_pos),
                field(r.crlb_vel),
                field(r.outage_rate),
                r.trials.to_string(),
                r.seed.to_string(),
            ]);
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_order_and_empty_metrics() {
        let mut t = ResultTable::new(&["snr_db"]);
        let mut r = ResultRow::new("mse_vs_snr", "mle", vec!["30".into()], 200, 7);
        r.mse_pos = Some(0.5);
        t.push(r).unwrap();
        let s = t.to_csv_string().unwrap();
        let mut lines = s.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,estimator,snr_db,mse_pos,mse_vel,crlb_pos,crlb_vel,outage_rate,trials,seed"
        );
        assert_eq!(lines.next().unwrap(), "mse_vs_snr,mle,30,0.5,,,,,200,7");
    }

    #[test]
    fn sweep_width_is_checked() {
        let mut t = ResultTable::new(&["a", "b"]);
        assert!(t.push(ResultRow::new("x", "y", vec!["1".into()], 1, 0)).is_err());
    }
}
