//! Delimited-file ingestion: comma-separated values with a header row,
//! UTF-8, period decimal separator. Unquoted fields only; an empty
//! outcome cell means the outcome is missing for that unit.

use estimand_core::data::Dataset;

use crate::CliError;

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(text: &str) -> Result<Table, CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::validation("data file is empty"))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(CliError::validation(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                fields.len(),
                header.len()
            )));
        }
        rows.push(fields);
    }
    Ok(Table { header, rows })
}

fn column_index(table: &Table, name: &str) -> Result<usize, CliError> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::validation(format!("column `{name}` not found in the data file")))
}

fn parse_number(value: &str, column: &str, row: usize) -> Result<f64, CliError> {
    value.parse::<f64>().map_err(|_| {
        CliError::validation(format!(
            "column `{column}`, row {row}: `{value}` is not a number"
        ))
    })
}

/// Build a dataset from a parsed table. The outcome column is optional;
/// when `outcome` is None the column is never even looked up, so design
/// stages cannot depend on it.
pub fn dataset_from_table(
    table: &Table,
    treatment: &str,
    outcome: Option<&str>,
    covariates: &[String],
) -> Result<Dataset, CliError> {
    let t_idx = column_index(table, treatment)?;
    let y_idx = outcome.map(|name| column_index(table, name)).transpose()?;
    let cov_idx: Vec<usize> = covariates
        .iter()
        .map(|name| column_index(table, name))
        .collect::<Result<_, _>>()?;

    let mut treatments = Vec::with_capacity(table.rows.len());
    let mut outcomes: Option<Vec<Option<f64>>> = y_idx.map(|_| Vec::with_capacity(table.rows.len()));
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(table.rows.len()); cov_idx.len()];
    for (r, row) in table.rows.iter().enumerate() {
        let t = parse_number(&row[t_idx], treatment, r + 1)?;
        if t != 0.0 && t != 1.0 {
            return Err(CliError::validation(format!(
                "column `{treatment}`, row {}: treatment indicator must be 0 or 1, got `{}`",
                r + 1,
                row[t_idx]
            )));
        }
        treatments.push(t == 1.0);
        if let (Some(idx), Some(out)) = (y_idx, outcomes.as_mut()) {
            if row[idx].is_empty() {
                out.push(None);
            } else {
                out.push(Some(parse_number(&row[idx], outcome.unwrap(), r + 1)?));
            }
        }
        for (c, &idx) in cov_idx.iter().enumerate() {
            columns[c].push(parse_number(&row[idx], &covariates[c], r + 1)?);
        }
    }

    let n = treatments.len();
    let units = (0..n)
        .map(|i| estimand_core::data::Unit {
            id: i,
            covariates: columns.iter().map(|c| c[i]).collect(),
            treated: treatments[i],
            outcome: outcomes.as_ref().and_then(|out| out[i]),
        })
        .collect();
    Ok(Dataset::new(units, covariates.to_vec()))
}

/// Serialize a dataset back to CSV, reproducing numeric fields with
/// shortest round-trip formatting.
#[cfg(test)]
pub fn dataset_to_csv(dataset: &Dataset, include_outcome: bool) -> String {
    let mut out = String::new();
    for name in dataset.covariate_names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("treatment");
    if include_outcome {
        out.push_str(",outcome");
    }
    out.push('\n');
    for unit in dataset.units() {
        for x in &unit.covariates {
            out.push_str(&format!("{x},"));
        }
        out.push_str(if unit.treated { "1" } else { "0" });
        if include_outcome {
            out.push(',');
            if let Some(y) = unit.outcome {
                out.push_str(&format!("{y}"));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use estimand_core::simulation::oracle_cohort;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let (data, _, _) = oracle_cohort();
        let first = dataset_to_csv(&data, true);
        let table = read_table(&first).unwrap();
        let reparsed = dataset_from_table(
            &table,
            "treatment",
            Some("outcome"),
            data.covariate_names(),
        )
        .unwrap();
        let second = dataset_to_csv(&reparsed, true);
        assert_eq!(first, second);
        assert_eq!(data, reparsed);
    }

    #[test]
    fn missing_column_is_named() {
        let table = read_table("a,b\n1,2\n").unwrap();
        let err = dataset_from_table(&table, "t", None, &["a".to_string()]).unwrap_err();
        assert!(err.message.contains("`t`"));
    }

    #[test]
    fn non_binary_treatment_is_rejected() {
        let table = read_table("t,x\n2,0.5\n").unwrap();
        let err = dataset_from_table(&table, "t", None, &["x".to_string()]).unwrap_err();
        assert!(err.message.contains("must be 0 or 1"));
    }

    #[test]
    fn empty_outcome_cells_are_missing() {
        let table = read_table("t,x,y\n1,0.5,\n0,0.2,3.5\n").unwrap();
        let data =
            dataset_from_table(&table, "t", Some("y"), &["x".to_string()]).unwrap();
        assert_eq!(data.units()[0].outcome, None);
        assert_eq!(data.units()[1].outcome, Some(3.5));
    }
}
