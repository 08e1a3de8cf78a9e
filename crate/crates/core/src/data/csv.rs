use std::fs;
use std::path::Path;

use crate::data::{Dataset, Example};
use crate::error::{Error, Result};
use crate::float::Float;

/// How to read a dataset CSV: which column holds the label, and (optionally)
/// the closed set of label categories.
///
/// When `label_categories` is `None`, integer labels are taken as-is and
/// string labels are mapped to indices by first appearance; the mapping is
/// stored on the resulting [`Dataset`]. When it is `Some`, every label must
/// be one of the listed categories.
#[derive(Clone, Debug, Default)]
pub struct CsvSchema {
    pub label_column: Option<String>,
    pub label_categories: Option<Vec<String>>,
}

impl CsvSchema {
    fn label_column(&self) -> &str {
        self.label_column.as_deref().unwrap_or("label")
    }
}

/// Load a dataset from CSV. The header row names the feature columns and one
/// label column; every other column is a feature, in header order. Row order
/// becomes id order. Feature parsing is locale-independent (decimal point).
pub fn load_csv<T: Float>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            row: 0,
            msg: "file is empty, expected a header row".into(),
        })?
        .trim_end_matches('\r');
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_col = schema.label_column();
    let label_idx = columns
        .iter()
        .position(|c| *c == label_col)
        .ok_or_else(|| Error::Parse {
            row: 0,
            msg: format!("header has no `{label_col}` column"),
        })?;
    let dim = columns.len() - 1;
    if dim == 0 {
        return Err(Error::Parse {
            row: 0,
            msg: "no feature columns".into(),
        });
    }

    let mut raw_labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1; // 1-based data row
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let mut features = Vec::with_capacity(dim);
        for (j, field) in fields.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric feature `{field}` in column `{}`", columns[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("non-finite feature in column `{}`", columns[j]),
                });
            }
            features.push(T::cast(v));
        }
        raw_labels.push(fields[label_idx].to_string());
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            msg: "no data rows".into(),
        });
    }

    // Integer labels pass through; otherwise categories map by first
    // appearance (or against the schema's closed set when given).
    let all_integer = schema.label_categories.is_none()
        && raw_labels.iter().all(|l| l.parse::<usize>().is_ok());
    let (labels, num_classes, label_names) = if all_integer {
        let labels: Vec<usize> = raw_labels.iter().map(|l| l.parse().unwrap()).collect();
        let k = labels.iter().max().copied().unwrap_or(0) + 1;
        (labels, k.max(2), Vec::new())
    } else {
        let mut names: Vec<String> = schema.label_categories.clone().unwrap_or_default();
        let closed = schema.label_categories.is_some();
        let mut labels = Vec::with_capacity(raw_labels.len());
        for (i, raw) in raw_labels.iter().enumerate() {
            match names.iter().position(|n| n == raw) {
                Some(ix) => labels.push(ix),
                None if closed => {
                    return Err(Error::Parse {
                        row: i + 1,
                        msg: format!("unknown label category `{raw}`"),
                    });
                }
                None => {
                    names.push(raw.clone());
                    labels.push(names.len() - 1);
                }
            }
        }
        let k = names.len().max(2);
        (labels, k, names)
    };

    let examples = rows
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(id, (features, label))| Example {
            id: id as u64,
            features,
            label,
        })
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(name, num_classes, examples, label_names)
}

/// Write a dataset in the interchange format: header `f0..f{d-1},label`,
/// UTF-8, `\n` newlines. Float formatting is shortest-round-trip, so a
/// save/load cycle is bit-exact.
pub fn save_csv<T: Float>(data: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for j in 0..data.feature_dim {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for ex in &data.examples {
        for f in &ex.features {
            out.push_str(&format!("{f},"));
        }
        if data.label_names.is_empty() {
            out.push_str(&format!("{}\n", ex.label));
        } else {
            out.push_str(&format!("{}\n", data.label_names[ex.label]));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(name: &str, contents: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("qrmia-core-{}-{name}", std::process::id()));
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn three_rows_two_features() {
        let p = write_tmp("ok.csv", "f0,f1,label\n0.5,1.5,0\n-1.0,2.0,1\n0.25,0.75,0\n");
        let data: Dataset<f64> = load_csv(&p, &CsvSchema::default()).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.feature_dim, 2);
        assert_eq!(data.examples[1].features, vec![-1.0, 2.0]);
        assert_eq!(data.ids(), vec![0, 1, 2]);
        fs::remove_file(p).ok();
    }

    #[test]
    fn ragged_row_names_the_row() {
        let p = write_tmp("ragged.csv", "f0,f1,label\n0.5,1.5,0\n-1.0,1\n");
        let err = load_csv::<f64>(&p, &CsvSchema::default()).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other}"),
        }
        fs::remove_file(p).ok();
    }

    #[test]
    fn string_labels_map_by_first_appearance() {
        let p = write_tmp("cats.csv", "f0,label\n1.0,a\n2.0,b\n3.0,a\n");
        let data: Dataset<f64> = load_csv(&p, &CsvSchema::default()).unwrap();
        // Hand-written mapping rule: a -> 0, b -> 1, a -> 0.
        assert_eq!(data.labels(), vec![0, 1, 0]);
        assert_eq!(data.label_names, vec!["a", "b"]);
        fs::remove_file(p).ok();
    }

    #[test]
    fn unknown_category_is_rejected_under_closed_schema() {
        let p = write_tmp("closed.csv", "f0,label\n1.0,a\n2.0,c\n");
        let schema = CsvSchema {
            label_column: None,
            label_categories: Some(vec!["a".into(), "b".into()]),
        };
        let err = load_csv::<f64>(&p, &schema).unwrap_err();
        match err {
            Error::Parse { row, msg } => {
                assert_eq!(row, 2);
                assert!(msg.contains("unknown label category"));
            }
            other => panic!("expected parse error, got {other}"),
        }
        fs::remove_file(p).ok();
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let data = crate::data::generate_synthetic::<f64>(&crate::data::SyntheticSpec {
            num_examples: 50,
            num_classes: 3,
            feature_dim: 4,
            class_separation: 1.5,
            noise_scale_heterogeneity: 0.2,
            seed: 21,
        })
        .unwrap();
        let p = std::env::temp_dir().join(format!("qrmia-core-rt-{}.csv", std::process::id()));
        save_csv(&data, &p).unwrap();
        let back: Dataset<f64> = load_csv(&p, &CsvSchema::default()).unwrap();
        for (a, b) in data.examples.iter().zip(&back.examples) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.label, b.label);
        }
        fs::remove_file(p).ok();
    }
}
