//! Result rows and their CSV form.

use std::io::{Read, Write};

pub const HEADER: [&str; 10] = ["experiment", "scenario", "interaction", "N", "t_tot", "omega", "g", "qfi", "gap", "wall_ms"];

/// Marker written in the `qfi` column of rows whose solve failed.
pub const FAILED: &str = "failed";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub scenario: String,
    pub interaction: String,
    pub n: usize,
    pub t_tot: f64,
    pub omega: f64,
    pub g: f64,
    /// `None` marks a failed solve.
    pub qfi: Option<f64>,
    pub gap: Option<f64>,
    pub wall_ms: u64,
}

/// 17 significant digits, enough to round-trip any f64.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.scenario.clone(),
            r.interaction.clone(),
            r.n.to_string(),
            num(r.t_tot),
            num(r.omega),
            num(r.g),
            r.qfi.map_or_else(|| FAILED.to_string(), num),
            r.gap.map_or_else(String::new, num),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Field { line: u64, msg: String },
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<Row>, TableError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(TableError::Field { line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str, v: &str| TableError::Field { line, msg: format!("bad {what} '{v}'") };
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(HEADER[i], &rec[i]));
        rows.push(Row {
            experiment: rec[0].to_string(),
            scenario: rec[1].to_string(),
            interaction: rec[2].to_string(),
            n: rec[3].parse().map_err(|_| bad("N", &rec[3]))?,
            t_tot: f(4)?,
            omega: f(5)?,
            g: f(6)?,
            qfi: if &rec[7] == FAILED { None } else { Some(f(7)?) },
            gap: if rec[8].is_empty() { None } else { Some(f(8)?) },
            wall_ms: rec[9].parse().map_err(|_| bad("wall_ms", &rec[9]))?,
        });
    }
    Ok(rows)
}
