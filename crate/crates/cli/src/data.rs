//! CSV ingestion for experiment data and potential-outcome populations.
//!
//! Files must have a header row, use `.` as the decimal separator and
//! contain no missing values; problems are reported with 1-based data row
//! numbers and column names.

use std::collections::HashMap;
use std::path::Path;

use neyman::asymptotics::Population;
use neyman::{Contrast, Matrix, ObservedData};

use crate::error::{CliError, CliResult};

/// A parsed CSV file held as strings until columns are requested.
#[derive(Debug, Clone)]
pub struct CsvTable {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl CsvTable {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file).map_err(|e| match e {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut seen = HashMap::new();
        for (j, h) in headers.iter().enumerate() {
            if h.is_empty() {
                return Err(CliError::Data(format!("column {} has an empty name", j + 1)));
            }
            if seen.insert(h.as_str(), j).is_some() {
                return Err(CliError::Data(format!("duplicate column '{h}'")));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Data(format!("row {}: {e}", i + 1)))?;
            if let Some(j) = rec.iter().position(str::is_empty) {
                return Err(CliError::Data(format!("row {}, column '{}': missing value", i + 1, headers[j])));
            }
            rows.push(rec);
        }
        if rows.is_empty() {
            return Err(CliError::Data("no data rows".into()));
        }
        Ok(Self { headers, rows })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn index(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("no column named '{name}'")))
    }

    pub fn text_column(&self, name: &str) -> CliResult<Vec<String>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[j].to_owned()).collect())
    }

    pub fn numeric_column(&self, name: &str) -> CliResult<Vec<f64>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r[j].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Data(format!(
                    "row {}, column '{name}': '{}' is not a finite number",
                    i + 1,
                    &r[j]
                ))),
            })
            .collect()
    }

    pub fn numeric_matrix(&self, names: &[String]) -> CliResult<Matrix<f64>> {
        let columns = names
            .iter()
            .map(|c| self.numeric_column(c))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Matrix::from_columns(self.len(), &columns)?)
    }
}

/// Observed experiment plus the contrast requested for it.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub data: ObservedData<f64>,
    pub contrast: Contrast,
}

/// Builds observed data from named columns.
///
/// The contrast is `labels[0]` versus `labels[1]` when given; otherwise the
/// two most frequent labels, the more frequent one treated, with ties going
/// to the label that appears first.
pub fn load_experiment(
    table: &CsvTable,
    outcome: &str,
    group: &str,
    covariates: &[String],
    contrast: Option<&[String]>,
) -> CliResult<Experiment> {
    let y = table.numeric_column(outcome)?;
    let labels = table.text_column(group)?;
    let z = table.numeric_matrix(covariates)?;
    let data = ObservedData::from_labels(y, &labels, z)?;
    if data.n_groups() < 2 {
        return Err(CliError::Data(format!("column '{group}' has a single label")));
    }
    let contrast = match contrast {
        Some([t, c]) => {
            let find = |l: &String| {
                data.group_index(l)
                    .ok_or_else(|| CliError::Data(format!("label '{l}' does not occur in column '{group}'")))
            };
            let (t, c) = (find(t)?, find(c)?);
            if t == c {
                return Err(CliError::Usage("contrast needs two different labels".into()));
            }
            Contrast::new(t, c)
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "contrast takes exactly two labels, got {}",
                other.len()
            )))
        }
        None => {
            // Group indices follow first appearance, so a stable sort keeps
            // that order among equally frequent labels.
            let mut order: Vec<usize> = (0..data.n_groups()).collect();
            order.sort_by_key(|&g| std::cmp::Reverse(data.group_size(g)));
            Contrast::new(order[0], order[1])
        }
    };
    Ok(Experiment { data, contrast })
}

/// Reads a population file with columns `a`, `b` and covariates `z1..zK`.
pub fn load_population(path: &Path) -> CliResult<Population<f64>> {
    let table = CsvTable::read(path)?;
    population_from_table(&table).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn population_from_table(table: &CsvTable) -> CliResult<Population<f64>> {
    let mut covariates = Vec::new();
    for h in table.headers() {
        match h.as_str() {
            "a" | "b" => {}
            _ => match h.strip_prefix('z').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if k >= 1 => covariates.push((k, h.clone())),
                _ => {
                    return Err(CliError::Data(format!(
                        "unexpected column '{h}': populations have columns a, b, z1..zK"
                    )))
                }
            },
        }
    }
    covariates.sort();
    for (expected, (k, _)) in (1..).zip(&covariates) {
        if *k != expected {
            return Err(CliError::Data(format!("covariate z{expected} is missing")));
        }
    }
    let names: Vec<String> = covariates.into_iter().map(|(_, h)| h).collect();
    Ok(Population::new(
        table.numeric_column("a")?,
        table.numeric_column("b")?,
        table.numeric_matrix(&names)?,
    )?)
}

/// Writes a population in the layout read by [`load_population`].
pub fn write_population<W: std::io::Write>(pop: &Population<f64>, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["a".to_owned(), "b".to_owned()];
    header.extend((1..=pop.k()).map(|k| format!("z{k}")));
    let csv_err = |e: csv::Error| CliError::Data(format!("cannot write population: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..pop.n() {
        let mut row = vec![pop.a()[i].to_string(), pop.b()[i].to_string()];
        row.extend(pop.covariates().row(i).iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: "<population output>".into(),
        source,
    })?;
    Ok(())
}
