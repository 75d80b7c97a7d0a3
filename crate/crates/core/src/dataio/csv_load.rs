use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::window::SensorSeries;
use crate::error::{Error, Result};

/// Maps CSV header names to the roles a [`SensorSeries`] needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label: String,
    pub channels: Vec<String>,
    #[serde(default)]
    pub subject: Option<String>,
    pub rate_hz: f64,
}

/// Label vocabulary order: numerically when every label is an integer,
/// lexicographically otherwise.
pub fn label_vocabulary<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut unique: Vec<String> = labels
        .into_iter()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let numeric: Option<Vec<i64>> = unique.iter().map(|l| l.trim().parse().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(i64, String)> = values.into_iter().zip(unique).collect();
        paired.sort();
        unique = paired.into_iter().map(|(_, l)| l).collect();
    }
    unique
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_owned(),
        })
}

/// Loads one CSV into per-subject series (a single series when the schema
/// has no subject column). Series keep file order within a subject and are
/// returned in order of each subject's first appearance.
pub fn load_csv_subjects(path: &Path, schema: &CsvSchema) -> Result<Vec<SensorSeries>> {
    if schema.channels.is_empty() {
        return Err(Error::config("channels", "schema needs at least one channel column"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row: 0,
            message: e.to_string(),
        })?;
    let headers = match reader.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].trim().is_empty()) => h.clone(),
        Ok(_) => return Err(Error::EmptyFile(path.to_path_buf())),
        Err(e) => {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                row: 1,
                message: e.to_string(),
            })
        }
    };
    let label_col = column(&headers, &schema.label, path)?;
    let channel_cols = schema
        .channels
        .iter()
        .map(|c| column(&headers, c, path))
        .collect::<Result<Vec<_>>>()?;
    let subject_col = schema.subject.as_deref().map(|s| column(&headers, s, path)).transpose()?;

    let mut groups: Vec<(Option<String>, Vec<f32>, Vec<String>)> = Vec::new();
    let mut group_of: BTreeMap<Option<String>, usize> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let subject = subject_col.map(|c| record[c].trim().to_owned());
        let g = *group_of.entry(subject.clone()).or_insert_with(|| {
            groups.push((subject, Vec::new(), Vec::new()));
            groups.len() - 1
        });
        for (name, &c) in schema.channels.iter().zip(&channel_cols) {
            let raw = record[c].trim();
            let v: f32 = raw.parse().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row,
                column: name.clone(),
                value: raw.to_owned(),
            })?;
            groups[g].1.push(v);
        }
        groups[g].2.push(record[label_col].trim().to_owned());
    }
    if groups.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let vocab = label_vocabulary(groups.iter().flat_map(|g| g.2.iter().map(String::as_str)));
    let id: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let series = groups
        .iter()
        .map(|(subject, samples, labels)| SensorSeries {
            channels: schema.channels.len(),
            rate_hz: schema.rate_hz,
            samples: samples.clone(),
            labels: labels.iter().map(|l| id[l.as_str()]).collect(),
            label_names: vocab.clone(),
            subject: subject.clone(),
        })
        .collect::<Vec<_>>();
    for s in &series {
        s.validate()?;
    }
    Ok(series)
}

/// Loads a CSV as one continuous series, ignoring any subject column.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<SensorSeries> {
    let flat = CsvSchema {
        subject: None,
        ..schema.clone()
    };
    Ok(load_csv_subjects(path, &flat)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema() -> CsvSchema {
        CsvSchema {
            label: "activity".into(),
            channels: vec!["x".into(), "y".into(), "z".into()],
            subject: Some("user".into()),
            rate_hz: 20.0,
        }
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ten_rows_sorted_labels() {
        let mut text = String::from("user,activity,x,y,z\n");
        for i in 0..10 {
            let label = if i % 2 == 0 { "Walking" } else { "Jogging" };
            text.push_str(&format!("1,{label},{i},0.5,-1\n"));
        }
        let f = write(&text);
        let s = load_csv(f.path(), &schema()).unwrap();
        assert_eq!((s.channels, s.len()), (3, 10));
        assert_eq!(s.label_names, vec!["Jogging", "Walking"]);
        assert_eq!(&s.labels[..2], &[1, 0]);
        assert_eq!(&s.samples[3..6], &[1.0, 0.5, -1.0]);
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        assert_eq!(label_vocabulary(["10", "2", "1"]), vec!["1", "2", "10"]);
        assert_eq!(label_vocabulary(["10", "2", "b"]), vec!["10", "2", "b"]);
    }

    #[test]
    fn subjects_split() {
        let f = write("user,activity,x,y,z\n2,a,1,1,1\n1,a,2,2,2\n2,b,3,3,3\n");
        let groups = load_csv_subjects(f.path(), &schema()).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].subject.as_deref(), Some("2"));
        assert_eq!(groups[0].labels, vec![0, 1]);
    }

    #[test]
    fn distinct_errors() {
        let f = write("user,activity,x,y,z\n1,a,1,2,3\n1,a,abc,2,3\n");
        match load_csv(f.path(), &schema()) {
            Err(Error::NonNumeric { row, column, .. }) => assert_eq!((row, column.as_str()), (3, "x")),
            other => panic!("{other:?}"),
        }
        let f = write("user,activity,x,y\n1,a,1,2\n");
        assert!(matches!(load_csv(f.path(), &schema()), Err(Error::MissingColumn { column, .. }) if column == "z"));
        let f = write("");
        assert!(matches!(load_csv(f.path(), &schema()), Err(Error::EmptyFile(_))));
        let f = write("user,activity,x,y,z\n");
        assert!(matches!(load_csv(f.path(), &schema()), Err(Error::EmptyFile(_))));
    }
}
