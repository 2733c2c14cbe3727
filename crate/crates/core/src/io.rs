//! Plain-text exchange formats. CSV files start with a `# schema: 1`
//! comment line; JSON documents carry a `"schema": 1` field.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::StepDistribution;
use crate::model::{Observation, Sample};

pub const SCHEMA_VERSION: u32 = 1;

/// CSV writer positioned after the schema comment.
pub fn csv_writer<W: Write>(mut w: W) -> Result<csv::Writer<W>> {
    writeln!(w, "# schema: {SCHEMA_VERSION}")?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

/// Serializes `rows` as CSV with a header derived from the row type.
pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv_writer(w)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sample_csv<W: Write>(w: W, sample: &Sample) -> Result<()> {
    let mut wtr = csv_writer(w)?;
    let k = sample.k();
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|j| format!("x{j}")));
    header.push("delta".into());
    wtr.write_record(&header)?;
    for o in sample.iter() {
        let mut rec = Vec::with_capacity(k + 2);
        rec.push(o.t.to_string());
        rec.extend(o.x.iter().map(|v| v.to_string()));
        rec.push(if o.delta { "1" } else { "0" }.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse_f64(s: &str, line: u64, col: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: column '{col}' is not a number: '{s}'")))
}

pub fn read_sample_csv<R: Read>(r: R) -> Result<Sample> {
    let mut rdr = csv_reader(r);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "delta" {
        return Err(Error::Parse(format!("expected header t,x1..xk,delta, got {}", cols.join(","))));
    }
    for (j, c) in cols[1..cols.len() - 1].iter().enumerate() {
        if *c != format!("x{}", j + 1) {
            return Err(Error::Parse(format!("unexpected covariate column '{c}'")));
        }
    }
    let k = cols.len() - 2;
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != k + 2 {
            return Err(Error::Parse(format!("line {line}: expected {} fields, got {}", k + 2, rec.len())));
        }
        let t = parse_f64(&rec[0], line, "t")?;
        let x = (1..=k).map(|j| parse_f64(&rec[j], line, cols[j])).collect::<Result<Vec<_>>>()?;
        let delta = match &rec[k + 1] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::Parse(format!("line {line}: delta must be 0 or 1, got '{other}'"))),
        };
        obs.push(Observation::new(t, x, delta));
    }
    if obs.is_empty() {
        return Err(Error::InvalidSample("sample file has no observations".into()));
    }
    Sample::new(obs)
}

#[derive(Serialize, Deserialize)]
struct SampleDoc {
    schema: u32,
    observations: Vec<Observation>,
}

pub fn write_sample_json<W: Write>(w: W, sample: &Sample) -> Result<()> {
    let doc = SampleDoc { schema: SCHEMA_VERSION, observations: sample.observations().to_vec() };
    serde_json::to_writer_pretty(w, &doc)?;
    Ok(())
}

pub fn read_sample_json<R: Read>(r: R) -> Result<Sample> {
    let doc: SampleDoc = serde_json::from_reader(r)?;
    if doc.schema != SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported schema version {}", doc.schema)));
    }
    Sample::new(doc.observations)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a sample; `.json` files use the JSON mirror, everything else CSV.
pub fn read_sample(path: &Path) -> Result<Sample> {
    let f = BufReader::new(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
    if is_json(path) {
        read_sample_json(f)
    } else {
        read_sample_csv(f)
    }
}

pub fn write_sample(path: &Path, sample: &Sample) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
    if is_json(path) {
        write_sample_json(&mut f, sample)?;
    } else {
        write_sample_csv(&mut f, sample)?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StepRow {
    knot: f64,
    value: f64,
}

pub fn write_step_csv<W: Write>(w: W, dist: &StepDistribution) -> Result<()> {
    let rows: Vec<StepRow> =
        dist.knots().iter().zip(dist.values()).map(|(&knot, &value)| StepRow { knot, value }).collect();
    write_rows(w, &rows)
}

pub fn read_step_csv<R: Read>(r: R) -> Result<StepDistribution> {
    let mut rdr = csv_reader(r);
    let mut knots = Vec::new();
    let mut values = Vec::new();
    for row in rdr.deserialize::<StepRow>() {
        let row = row?;
        knots.push(row.knot);
        values.push(row.value);
    }
    StepDistribution::new(knots, values)
}
