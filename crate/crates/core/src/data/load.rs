use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::schema::{CategoricalColumn, Layout, SchemaConfig};
use super::{EvaluationDataset, ParticipantRecord};
use crate::error::{Error, Result};

/// Reads a delimited file with a header row and returns a validated dataset.
///
/// Both layouts are normalized to one record per participant. Evaluator
/// order follows first appearance in the file.
pub fn load_dataset<R: Read>(source: R, schema: &SchemaConfig) -> Result<EvaluationDataset> {
    schema.check()?;
    let mut reader = ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?
        .clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        rows.push(record);
    }

    let columns = Columns::new(&headers);
    let participant_col = columns.require(&schema.participant_id)?;
    let evaluator_col = columns.require(&schema.evaluator_id)?;
    let covariates = CovariateSet::resolve(&schema.covariates, schema, &columns, &rows)?;
    let unit_covariates = CovariateSet::resolve(&schema.unit_covariates, schema, &columns, &rows)?;

    let participants = match schema.layout {
        Layout::Long => {
            let unit_col = columns.require(&schema.unit_index)?;
            let outcome_col = columns.require(&schema.outcome)?;
            read_long(&rows, participant_col, evaluator_col, unit_col, outcome_col, &covariates, &unit_covariates)?
        }
        Layout::Wide => {
            let outcome_cols = wide_outcome_columns(schema, &headers, &columns)?;
            read_wide(&rows, participant_col, evaluator_col, &outcome_cols, &covariates)?
        }
    };
    EvaluationDataset::from_participants(participants, covariates.names(), unit_covariates.names())
}

pub fn load_dataset_from_path(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<EvaluationDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    load_dataset(std::io::BufReader::new(file), schema)
}

/// Writes `dataset` in the long layout read by [`SchemaConfig::long`] with the
/// dataset's covariate names. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_long<W: Write>(dataset: &EvaluationDataset, writer: W) -> Result<()> {
    let mut out = WriterBuilder::new().from_writer(writer);
    let mut header = vec!["participant_id", "evaluator_id", "unit_index", "outcome"];
    header.extend(dataset.covariate_names().iter().map(String::as_str));
    header.extend(dataset.unit_covariate_names().iter().map(String::as_str));
    out.write_record(&header).map_err(csv_io)?;

    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for p in dataset.participants() {
        for (k, (&unit, &y)) in p.unit_index.iter().zip(&p.outcomes).enumerate() {
            fields.clear();
            fields.push(p.id.clone());
            fields.push(p.evaluator.clone());
            fields.push(unit.to_string());
            fields.push(y.to_string());
            fields.extend(p.participant_covariates.iter().map(f64::to_string));
            if let Some(row) = p.unit_covariates.get(k) {
                fields.extend(row.iter().map(f64::to_string));
            }
            out.write_record(&fields).map_err(csv_io)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

struct Columns(HashMap<String, usize>);

impl Columns {
    fn new(headers: &StringRecord) -> Self {
        Columns(headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect())
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }
}

enum Covariate {
    Numeric { name: String, col: usize },
    Categorical { column: String, col: usize, reference: String, levels: Vec<String>, strict: bool },
}

/// Resolved covariate columns, with categoricals expanded in place.
struct CovariateSet(Vec<Covariate>);

impl CovariateSet {
    fn resolve(names: &[String], schema: &SchemaConfig, columns: &Columns, rows: &[StringRecord]) -> Result<Self> {
        let mut set = Vec::with_capacity(names.len());
        for name in names {
            let col = columns.require(name)?;
            match schema.categorical_for(name) {
                None => set.push(Covariate::Numeric { name: name.clone(), col }),
                Some(CategoricalColumn { column, reference, levels }) => {
                    let strict = !levels.is_empty();
                    let mut levels = levels.clone();
                    if !strict {
                        for row in rows {
                            let value = row.get(col).unwrap_or("");
                            if !value.is_empty() && value != reference && !levels.iter().any(|l| l == value) {
                                levels.push(value.to_string());
                            }
                        }
                    }
                    set.push(Covariate::Categorical {
                        column: column.clone(),
                        col,
                        reference: reference.clone(),
                        levels,
                        strict,
                    });
                }
            }
        }
        Ok(CovariateSet(set))
    }

    fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in &self.0 {
            match c {
                Covariate::Numeric { name, .. } => names.push(name.clone()),
                Covariate::Categorical { column, levels, .. } => {
                    names.extend(levels.iter().map(|l| format!("{column}={l}")));
                }
            }
        }
        names
    }

    fn parse(&self, row: &StringRecord, line: u64) -> Result<Vec<f64>> {
        let mut values = Vec::new();
        for c in &self.0 {
            match c {
                Covariate::Numeric { name, col } => values.push(parse_number(row, *col, name, line)?),
                Covariate::Categorical { column, col, reference, levels, strict } => {
                    let value = row.get(*col).unwrap_or("");
                    if value.is_empty() {
                        return Err(Error::Parse {
                            line,
                            message: format!("column `{column}`: empty categorical value"),
                        });
                    }
                    let hit = levels.iter().position(|l| l == value);
                    if hit.is_none() && value != reference && *strict {
                        return Err(Error::Parse {
                            line,
                            message: format!("column `{column}`: undeclared level `{value}`"),
                        });
                    }
                    values.extend((0..levels.len()).map(|k| if hit == Some(k) { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(values)
    }
}

fn parse_number(row: &StringRecord, col: usize, name: &str, line: u64) -> Result<f64> {
    let cell = row.get(col).unwrap_or("");
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("column `{name}`: cannot parse `{cell}` as a finite number"),
        }),
    }
}

fn line_of(row: &StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

fn required_cell<'a>(row: &'a StringRecord, col: usize, what: &str) -> Result<&'a str> {
    match row.get(col) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::Integrity(format!("line {}: empty {what}", line_of(row)))),
    }
}

struct PendingParticipant {
    evaluator: String,
    first_line: u64,
    covariates: Vec<f64>,
    units: Vec<(u32, f64, Vec<f64>)>,
}

fn read_long(
    rows: &[StringRecord],
    participant_col: usize,
    evaluator_col: usize,
    unit_col: usize,
    outcome_col: usize,
    covariates: &CovariateSet,
    unit_covariates: &CovariateSet,
) -> Result<Vec<ParticipantRecord>> {
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, PendingParticipant> = HashMap::new();
    for row in rows {
        let line = line_of(row);
        let pid = required_cell(row, participant_col, "participant id")?;
        let evaluator = required_cell(row, evaluator_col, "evaluator id")?;
        let unit_cell = row.get(unit_col).unwrap_or("");
        let unit: u32 = unit_cell.parse().map_err(|_| Error::Parse {
            line,
            message: format!("unit index `{unit_cell}` is not a non-negative integer"),
        })?;
        let y = parse_number(row, outcome_col, "outcome", line)?;
        let covs = covariates.parse(row, line)?;
        let unit_covs = unit_covariates.parse(row, line)?;

        match pending.get_mut(pid) {
            None => {
                order.push(pid.to_string());
                pending.insert(
                    pid.to_string(),
                    PendingParticipant {
                        evaluator: evaluator.to_string(),
                        first_line: line,
                        covariates: covs,
                        units: vec![(unit, y, unit_covs)],
                    },
                );
            }
            Some(p) => {
                if p.evaluator != evaluator {
                    return Err(Error::Integrity(format!(
                        "participant `{pid}` is assigned to evaluator `{}` (line {}) and `{evaluator}` (line {line})",
                        p.evaluator, p.first_line
                    )));
                }
                if p.covariates != covs {
                    return Err(Error::Integrity(format!(
                        "line {line}: participant-level covariates of `{pid}` differ from line {}",
                        p.first_line
                    )));
                }
                if p.units.iter().any(|u| u.0 == unit) {
                    return Err(Error::Integrity(format!(
                        "line {line}: participant `{pid}` repeats unit index {unit}"
                    )));
                }
                p.units.push((unit, y, unit_covs));
            }
        }
    }

    let has_unit_covs = !unit_covariates.0.is_empty();
    Ok(order
        .into_iter()
        .map(|pid| {
            let mut p = pending.remove(&pid).expect("pending participant");
            p.units.sort_by_key(|u| u.0);
            ParticipantRecord {
                id: pid,
                evaluator: p.evaluator,
                unit_index: p.units.iter().map(|u| u.0).collect(),
                outcomes: p.units.iter().map(|u| u.1).collect(),
                participant_covariates: p.covariates,
                unit_covariates: if has_unit_covs {
                    p.units.into_iter().map(|u| u.2).collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect())
}

fn wide_outcome_columns(schema: &SchemaConfig, headers: &StringRecord, columns: &Columns) -> Result<Vec<usize>> {
    if !schema.outcomes.is_empty() {
        return schema.outcomes.iter().map(|name| columns.require(name)).collect();
    }
    let mut found: Vec<(u32, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("outcome_")?.parse().ok().map(|n| (n, i)))
        .collect();
    if found.is_empty() {
        return Err(Error::Schema("missing column `outcome_1`".into()));
    }
    found.sort_unstable();
    Ok(found.into_iter().map(|(_, i)| i).collect())
}

fn read_wide(
    rows: &[StringRecord],
    participant_col: usize,
    evaluator_col: usize,
    outcome_cols: &[usize],
    covariates: &CovariateSet,
) -> Result<Vec<ParticipantRecord>> {
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut participants = Vec::with_capacity(rows.len());
    for row in rows {
        let line = line_of(row);
        let pid = required_cell(row, participant_col, "participant id")?;
        let evaluator = required_cell(row, evaluator_col, "evaluator id")?;
        if let Some(first) = seen.insert(pid.to_string(), line) {
            return Err(Error::Integrity(format!(
                "participant `{pid}` appears on lines {first} and {line} of a wide file"
            )));
        }
        let mut outcomes = Vec::new();
        let mut unit_index = Vec::new();
        for (k, &col) in outcome_cols.iter().enumerate() {
            if row.get(col).is_some_and(|c| !c.is_empty()) {
                outcomes.push(parse_number(row, col, "outcome", line)?);
                unit_index.push(k as u32 + 1);
            }
        }
        if outcomes.is_empty() {
            return Err(Error::Integrity(format!("line {line}: participant `{pid}` has no outcomes")));
        }
        participants.push(ParticipantRecord {
            id: pid.to_string(),
            evaluator: evaluator.to_string(),
            outcomes,
            unit_index,
            participant_covariates: covariates.parse(row, line)?,
            unit_covariates: Vec::new(),
        });
    }
    Ok(participants)
}
