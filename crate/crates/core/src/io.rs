//! CSV ingestion, run configuration and result emission.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::TreatmentTransform;
use crate::ranks::{ReferenceGroup, TiePolicy};
use crate::rdd::Kernel;
use crate::sample::{Estimate, PanelSample, Sample};
use crate::simlab::{ConvergenceTable, ReplicationRecord};

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::ParseError {
                row: e.position().map_or(0, |p| p.line() as usize),
                column: String::new(),
                message: e.to_string(),
            },
        }
    }
}

/// Which CSV header names feed which sample fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub y: String,
    pub w: String,
    pub x: Vec<String>,
    pub z: Option<String>,
    pub run: Option<String>,
    pub y_pre: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            y: "y".into(),
            w: "w".into(),
            x: Vec::new(),
            z: None,
            run: None,
            y_pre: None,
        }
    }
}

/// Columns parsed from a CSV body, keyed by header name.
struct Table {
    columns: HashMap<String, Vec<f64>>,
}

impl Table {
    fn take(&mut self, name: &str) -> Result<Vec<f64>> {
        self.columns
            .remove(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// Parses only the mapped columns. Rows are numbered from 1 for the first
/// data row; empty and non-numeric cells are rejected.
fn parse_columns<R: Read>(reader: R, wanted: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = Vec::with_capacity(wanted.len());
    for &name in wanted {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        index.push((name, pos));
    }
    let mut columns: HashMap<String, Vec<f64>> =
        wanted.iter().map(|&n| (n.to_string(), Vec::new())).collect();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 1;
        for &(name, pos) in &index {
            let cell = record.get(pos).unwrap_or("");
            let value = if cell.is_empty() {
                Err("missing value".to_string())
            } else {
                cell.parse::<f64>()
                    .map_err(|_| format!("`{cell}` is not a number"))
                    .and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("`{cell}` is not finite")) })
            };
            let value = value.map_err(|message| Error::ParseError {
                row,
                column: name.to_string(),
                message,
            })?;
            columns.get_mut(name).expect("initialized").push(value);
        }
    }
    Ok(Table { columns })
}

fn check_binary(col: &[f64], name: &str) -> Result<()> {
    match col.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(i) => Err(Error::NonBinaryColumn {
            column: name.to_string(),
            row: i + 1,
            value: col[i],
        }),
        None => Ok(()),
    }
}

/// Reads a cross-sectional sample. With `binary_w` the treatment column must
/// hold only 0 and 1; a mapped instrument always must.
pub fn read_sample<R: Read>(reader: R, map: &ColumnMap, binary_w: bool) -> Result<Sample> {
    let mut wanted: Vec<&str> = vec![&map.y, &map.w];
    wanted.extend(map.x.iter().map(String::as_str));
    wanted.extend(
        [&map.z, &map.run, &map.y_pre]
            .into_iter()
            .flatten()
            .map(String::as_str),
    );
    let mut seen = std::collections::HashSet::new();
    wanted.retain(|c| seen.insert(*c));
    let mut t = parse_columns(reader, &wanted)?;
    let y = t.take(&map.y)?;
    let w = if map.w == map.y { y.clone() } else { t.take(&map.w)? };
    if y.is_empty() {
        return Err(Error::InvalidInput("file has no data rows".into()));
    }
    if binary_w {
        check_binary(&w, &map.w)?;
    }
    let mut s = Sample::new(y, w)?;
    if !map.x.is_empty() {
        let x = map.x.iter().map(|c| t.take(c)).collect::<Result<Vec<_>>>()?;
        s = s.with_covariates(x)?;
    }
    if let Some(z) = &map.z {
        let z = t.take(z)?;
        check_binary(&z, map.z.as_deref().unwrap_or("z"))?;
        s = s.with_instrument(z)?;
    }
    if let Some(r) = &map.run {
        s = s.with_running(t.take(r)?)?;
    }
    if let Some(p) = &map.y_pre {
        s = s.with_pre_period(t.take(p)?)?;
    }
    Ok(s)
}

/// Reads a CSV file into a [`Sample`].
pub fn load_csv(path: &Path, map: &ColumnMap, binary_w: bool) -> Result<Sample> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_sample(file, map, binary_w)
}

/// Reads a two-period panel: `y_pre` is the first period, `y` the second.
pub fn load_panel_csv(path: &Path, map: &ColumnMap) -> Result<PanelSample> {
    if map.y_pre.is_none() {
        return Err(Error::MissingColumn("y_pre".into()));
    }
    let s = load_csv(path, map, true)?;
    PanelSample::try_from(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Ols,
    OlsGeneral,
    Tsls,
    Did,
    Rdd,
    Bounds,
    Simulate,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Ols => "ols",
            Command::OlsGeneral => "ols-general",
            Command::Tsls => "tsls",
            Command::Did => "did",
            Command::Rdd => "rdd",
            Command::Bounds => "bounds",
            Command::Simulate => "simulate",
        }
    }
}

/// Everything a run needs. Loaded from TOML with `--config`; command-line
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub columns: ColumnMap,
    pub reference: ReferenceGroup,
    pub interact: bool,
    pub transform: Option<TreatmentTransform>,
    pub complier: bool,
    pub zeta: Option<f64>,
    pub modified: bool,
    pub cutoff: Option<f64>,
    /// Fixed bandwidth; when absent the rule `multiplier * sd * n^{-1/5}`.
    pub bandwidth: Option<f64>,
    pub bandwidth_multiplier: Option<f64>,
    pub kernel: Option<Kernel>,
    pub tie_policy: TiePolicy,
    pub seed: Option<u64>,
    pub scenario: Option<String>,
    pub ns: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub plotdata: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// An estimate together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord<'a> {
    #[serde(flatten)]
    pub estimate: &'a Estimate,
    pub config: &'a RunConfig,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Formats an estimate. CSV has one header and one data row; diagnostics
/// become extra columns in key order and warnings are joined with `; `.
pub fn format_estimate(e: &Estimate, config: &RunConfig, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let rec = EstimateRecord { estimate: e, config };
            serde_json::to_string_pretty(&rec)
                .map(|s| s + "\n")
                .map_err(|e| Error::Io(e.to_string()))
        }
        OutputFormat::Csv => csv_string(|w| {
            let mut header = vec!["estimator".to_string(), "estimand".into(), "value".into(), "n".into()];
            header.extend(e.diagnostics.keys().cloned());
            header.push("warnings".into());
            w.write_record(&header)?;
            let mut row = vec![e.estimator.clone(), e.estimand.clone(), num(e.value), e.n.to_string()];
            row.extend(e.diagnostics.values().map(|&v| num(v)));
            row.push(e.warnings.join("; "));
            w.write_record(&row)?;
            Ok(())
        }),
    }
}

/// Summary columns of a convergence table, one row per estimator and `n`.
pub const TABLE_COLUMNS: [&str; 10] = [
    "dgp", "estimand", "estimator", "n", "reps", "failures", "mean", "sd", "abs_err", "oracle",
];

pub fn format_tables(tables: &[ConvergenceTable], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => serde_json::to_string_pretty(tables)
            .map(|s| s + "\n")
            .map_err(|e| Error::Io(e.to_string())),
        OutputFormat::Csv => csv_string(|w| {
            w.write_record(TABLE_COLUMNS)?;
            for t in tables {
                for r in &t.rows {
                    w.write_record([
                        t.dgp.clone(),
                        t.estimand.clone(),
                        r.estimator.clone(),
                        r.n.to_string(),
                        r.reps.to_string(),
                        r.failures.to_string(),
                        num(r.mean),
                        num(r.sd),
                        num(r.abs_err),
                        num(r.oracle),
                    ])?;
                }
            }
            Ok(())
        }),
    }
}

/// Writes long-format replication records (`run_id, n, rep, estimate,
/// oracle`). Failed replications leave `estimate` empty in CSV and `null`
/// in JSON. Output depends only on the records.
pub fn emit_plotdata(records: &[ReplicationRecord], out_path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(records)
            .map(|s| s + "\n")
            .map_err(|e| Error::Io(e.to_string()))?,
        OutputFormat::Csv => csv_string(|w| {
            w.write_record(["run_id", "n", "rep", "estimate", "oracle"])?;
            for r in records {
                w.write_record([
                    r.run_id.clone(),
                    r.n.to_string(),
                    r.rep.to_string(),
                    r.estimate.map_or(String::new(), num),
                    num(r.oracle),
                ])?;
            }
            Ok(())
        })?,
    };
    fs::write(out_path, text).map_err(|e| Error::Io(format!("{}: {e}", out_path.display())))
}

/// Reads records written by [`emit_plotdata`].
pub fn read_plotdata(path: &Path, format: OutputFormat) -> Result<Vec<ReplicationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match format {
        OutputFormat::Json => serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string())),
        OutputFormat::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .map(|r| r.map_err(Error::from))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(cols: &[(&str, &str)]) -> ColumnMap {
        let mut m = ColumnMap::default();
        for &(k, v) in cols {
            match k {
                "x" => m.x.push(v.into()),
                "z" => m.z = Some(v.into()),
                "run" => m.run = Some(v.into()),
                "y_pre" => m.y_pre = Some(v.into()),
                _ => unreachable!(),
            }
        }
        m
    }

    #[test]
    fn reads_four_rows() {
        let s = read_sample("y,w\n1,0\n2,1\n3,0\n4,1\n".as_bytes(), &ColumnMap::default(), true).unwrap();
        assert_eq!(s.n(), 4);
        assert_eq!(s.w, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn non_binary_treatment_reports_row() {
        let e = read_sample("y,w\n1,0\n2,2\n".as_bytes(), &ColumnMap::default(), true).unwrap_err();
        assert_eq!(
            e,
            Error::NonBinaryColumn {
                column: "w".into(),
                row: 2,
                value: 2.0
            }
        );
        // a continuous dose is fine when not required to be binary
        assert!(read_sample("y,w\n1,0\n2,2\n".as_bytes(), &ColumnMap::default(), false).is_ok());
    }

    #[test]
    fn covariates_are_columns() {
        let text = "x1,y,x2,w,extra\n0.5,1,3,0,a\n0.1,2,4,1,b\n";
        let s = read_sample(text.as_bytes(), &map(&[("x", "x1"), ("x", "x2")]), true).unwrap();
        assert_eq!(s.n_covariates(), 2);
        assert_eq!(s.x.unwrap()[1], vec![3.0, 4.0]);
    }

    #[test]
    fn parse_and_missing_errors() {
        let e = read_sample("y,w\n1,0\nfoo,1\n".as_bytes(), &ColumnMap::default(), true).unwrap_err();
        assert!(matches!(e, Error::ParseError { row: 2, ref column, .. } if column == "y"));
        let e = read_sample("y,w\n1,0\n,1\n".as_bytes(), &ColumnMap::default(), true).unwrap_err();
        assert!(matches!(e, Error::ParseError { row: 2, .. }));
        let e = read_sample("y,w\n1,0\n".as_bytes(), &map(&[("z", "z")]), true).unwrap_err();
        assert_eq!(e, Error::MissingColumn("z".into()));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let text = r#"
            command = "ols-general"
            input = "data.csv"
            reference = "treated"
            format = "csv"
            seed = 9

            [columns]
            y = "outcome"
            x = ["age"]

            [transform]
            kind = "dichotomize_at"
            threshold = 0.5
            normalize = true
        "#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.command, Some(Command::OlsGeneral));
        assert_eq!(c.columns.y, "outcome");
        assert_eq!(c.columns.w, "w");
        assert!(c.transform.as_ref().unwrap().normalize);
        let back = RunConfig::from_toml_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn estimate_csv_has_diagnostic_columns() {
        let e = Estimate::new(0.5, "rank_ols", "rank-ATE", 4).diag("n1", 2.0).diag("n0", 2.0);
        let text = format_estimate(&e, &RunConfig::default(), OutputFormat::Csv).unwrap();
        assert_eq!(text, "estimator,estimand,value,n,n0,n1,warnings\nrank_ols,rank-ATE,0.5,4,2,2,\n");
        let json = format_estimate(&e, &RunConfig::default(), OutputFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["estimand"], "rank-ATE");
        assert_eq!(v["config"]["columns"]["y"], "y");
    }

    fn records(ns: &[usize], reps: usize) -> Vec<ReplicationRecord> {
        let mut out = Vec::new();
        for &n in ns {
            for rep in 0..reps {
                out.push(ReplicationRecord {
                    run_id: "d:e".into(),
                    n,
                    rep,
                    estimate: if rep == 1 && n == 20 { None } else { Some(0.1 / (n + rep) as f64) },
                    oracle: 0.26024993890652337,
                });
            }
        }
        out
    }

    #[test]
    fn plotdata_round_trip_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let path = dir.path().join("p");
            let recs = records(&[10, 20], 2);
            emit_plotdata(&recs, &path, format).unwrap();
            let first = fs::read(&path).unwrap();
            assert_eq!(read_plotdata(&path, format).unwrap(), recs);
            emit_plotdata(&recs, &path, format).unwrap();
            assert_eq!(fs::read(&path).unwrap(), first);
        }
        let path = dir.path().join("empty.csv");
        emit_plotdata(&[], &path, OutputFormat::Csv).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "run_id,n,rep,estimate,oracle\n");
        assert!(read_plotdata(&path, OutputFormat::Csv).unwrap().is_empty());
    }
}
