use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{Scenario, ScenarioSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRecord {
    scenario: usize,
    k: usize,
    ell: f64,
    beta: f64,
}

/// Writes `scenario,k,ell,beta` rows; floats use the shortest round-trip form.
pub fn write_scenarios<W: Write>(set: &ScenarioSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, s) in set.scenarios.iter().enumerate() {
        for t in 0..s.k() {
            w.serialize(ScenarioRecord {
                scenario: i,
                k: t + 1,
                ell: s.ell[t],
                beta: s.beta[t],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the scenario CSV back; rows may come in any order but must cover a full grid.
pub fn read_scenarios<R: Read>(input: R) -> Result<ScenarioSet> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for rec in rdr.deserialize() {
        let rec: ScenarioRecord = rec?;
        if rec.k == 0 {
            return Err(Error::Validation("step index k is 1-based".into()));
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Validation("scenario file has no rows".into()));
    }
    let n = records.iter().map(|r| r.scenario).max().unwrap_or(0) + 1;
    let k = records.iter().map(|r| r.k).max().unwrap_or(0);
    let mut ell = vec![vec![f64::NAN; k]; n];
    let mut beta = vec![vec![f64::NAN; k]; n];
    for rec in &records {
        let (i, t) = (rec.scenario, rec.k - 1);
        if !ell[i][t].is_nan() {
            return Err(Error::Validation(format!(
                "duplicate row for scenario {i}, step {}",
                rec.k
            )));
        }
        ell[i][t] = rec.ell;
        beta[i][t] = rec.beta;
    }
    if records.len() != n * k {
        return Err(Error::Validation(format!(
            "expected {} rows for {n} scenarios of length {k}, found {}",
            n * k,
            records.len()
        )));
    }
    let set = ScenarioSet::new(
        ell.into_iter()
            .zip(beta)
            .map(|(l, b)| Scenario::new(l, b))
            .collect(),
    );
    set.validate()?;
    Ok(set)
}

pub fn save_scenarios(set: &ScenarioSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_scenarios(set, std::io::BufWriter::new(file))
}

pub fn load_scenarios(path: &Path) -> Result<ScenarioSet> {
    let file = std::fs::File::open(path)?;
    read_scenarios(std::io::BufReader::new(file))
}
