use std::io::{Read, Write};

use super::{fmt_opt, is_na};
use crate::error::{Error, Result};
use crate::simbench::{StudyRecord, SummaryRow};

const RECORD_HEADER: [&str; 9] = [
    "replication",
    "method",
    "rho",
    "rmse_obs_train",
    "rmse_obs_test",
    "rmse_true_train",
    "rmse_true_test",
    "n_terminal_nodes",
    "sigma_multiplier",
];

pub fn write_records(records: &[StudyRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.replication.to_string(),
            r.method.to_string(),
            r.rho.to_string(),
            r.rmse_obs_train.to_string(),
            r.rmse_obs_test.to_string(),
            r.rmse_true_train.to_string(),
            r.rmse_true_test.to_string(),
            r.n_terminal_nodes.to_string(),
            fmt_opt(r.sigma_multiplier),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(input: impl Read) -> Result<Vec<StudyRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("records table lacks column '{name}'")))
    };
    let cols: Vec<usize> = RECORD_HEADER.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let cell = |k: usize| rec.get(cols[k]).unwrap_or("").trim();
        let bad = |k: usize| Error::Input(format!("records line {line}: bad {} '{}'", RECORD_HEADER[k], cell(k)));
        let float = |k: usize| cell(k).parse::<f64>().map_err(|_| bad(k));
        let count = |k: usize| cell(k).parse::<usize>().map_err(|_| bad(k));
        out.push(StudyRecord {
            replication: count(0)?,
            method: cell(1).parse().map_err(|_| bad(1))?,
            rho: float(2)?,
            rmse_obs_train: float(3)?,
            rmse_obs_test: float(4)?,
            rmse_true_train: float(5)?,
            rmse_true_test: float(6)?,
            n_terminal_nodes: count(7)?,
            sigma_multiplier: if is_na(cell(8)) { None } else { Some(float(8)?) },
        });
    }
    Ok(out)
}

pub fn write_summary(rows: &[SummaryRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "rho", "metric", "n", "min", "q1", "median", "q3", "max"])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.rho.to_string(),
            r.metric.name().to_string(),
            r.n.to_string(),
            r.min.to_string(),
            r.q1.to_string(),
            r.median.to_string(),
            r.q3.to_string(),
            r.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
