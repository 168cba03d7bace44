use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clusterability::HopkinsResult;
use crate::data_io::AnalysisConfig;
use crate::error::{Error, Result};
use crate::solution::{Diagnostics, MccaSolution, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// 1-based component index.
    pub component: usize,
    pub correlation: f64,
    /// One weight vector per feature.
    pub weights: Vec<Vec<f64>>,
    /// `scores[k][l]`: score of unit `k` on feature `l`.
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterabilitySection {
    /// Score columns that formed the point set, as `component:feature`.
    pub columns: Vec<String>,
    pub result: HopkinsResult,
}

/// Everything a `kcca`/`fcca` run produces, in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Method,
    pub epsilon_used: f64,
    pub unit_labels: Vec<String>,
    pub feature_names: Vec<String>,
    pub correlations: Vec<f64>,
    pub components: Vec<ComponentReport>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusterability: Option<ClusterabilitySection>,
}

impl Report {
    pub fn new(
        solution: &MccaSolution,
        unit_labels: &[String],
        feature_names: &[String],
        config: Option<&AnalysisConfig>,
        clusterability: Option<ClusterabilitySection>,
    ) -> Self {
        let components = (0..solution.n_components())
            .map(|c| {
                let s = &solution.scores[c];
                ComponentReport {
                    component: c + 1,
                    correlation: solution.correlations[c],
                    weights: solution.weights[c]
                        .iter()
                        .map(|w| w.iter().copied().collect())
                        .collect(),
                    scores: (0..s.nrows())
                        .map(|k| s.row(k).iter().copied().collect())
                        .collect(),
                }
            })
            .collect();
        Self {
            method: solution.method,
            epsilon_used: solution.epsilon_used,
            unit_labels: unit_labels.to_vec(),
            feature_names: feature_names.to_vec(),
            correlations: solution.correlations.clone(),
            components,
            diagnostics: solution.diagnostics.clone(),
            config: config.cloned(),
            clusterability,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

pub fn write_report(report: &Report, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedReport {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `unit,component,feature,score` rows, component 1-based, at full
/// double precision.
pub fn write_scores_csv(
    solution: &MccaSolution,
    unit_labels: &[String],
    feature_names: &[String],
    path: &Path,
) -> Result<()> {
    let mut out = String::from("unit,component,feature,score\n");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for (c, s) in solution.scores.iter().enumerate() {
        for (k, unit) in unit_labels.iter().enumerate() {
            for (l, feature) in feature_names.iter().enumerate() {
                w.write_record([
                    unit.as_str(),
                    &(c + 1).to_string(),
                    feature.as_str(),
                    &format!("{}", s[(k, l)]),
                ])
                .expect("in-memory write");
            }
        }
    }
    let bytes = w.into_inner().expect("in-memory flush");
    let _ = write!(out, "{}", String::from_utf8(bytes).expect("utf-8"));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A score file pivoted to one column per `(component, feature)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub unit_labels: Vec<String>,
    /// Column names, `component:feature` for long-format input or the
    /// header (or 1-based index) for a plain matrix.
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

impl ScoreTable {
    /// Extracts the named columns as an `n×d` point set.
    pub fn select(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|name| {
                self.columns
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::InvalidValue {
                        key: "columns".into(),
                        value: name.clone(),
                        reason: format!("available: {}", self.columns.join(", ")),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(self.values.select_columns(&idx))
    }
}

fn number(raw: &str, line: usize, column: &str) -> Result<f64> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumericValue {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Reads either the long `unit,component,feature,score` format or a plain
/// comma-separated numeric matrix (optionally with a header row).
pub fn read_score_table(text: &str) -> Result<ScoreTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Csv(e.to_string()))?;
    let Some(first) = rows.first() else {
        return Err(Error::Csv("empty score file".into()));
    };

    if first.iter().collect::<Vec<_>>() == ["unit", "component", "feature", "score"] {
        let mut units: Vec<String> = Vec::new();
        let mut columns: Vec<String> = Vec::new();
        let mut cells = Vec::new();
        for (i, r) in rows.iter().enumerate().skip(1) {
            if r.len() != 4 {
                return Err(Error::Csv(format!("line {}: expected 4 fields", i + 1)));
            }
            let unit = match units.iter().position(|u| u == &r[0]) {
                Some(p) => p,
                None => {
                    units.push(r[0].to_string());
                    units.len() - 1
                }
            };
            let name = format!("{}:{}", &r[1], &r[2]);
            let col = match columns.iter().position(|c| *c == name) {
                Some(p) => p,
                None => {
                    columns.push(name);
                    columns.len() - 1
                }
            };
            cells.push((unit, col, number(&r[3], i + 1, "score")?));
        }
        let mut values = DMatrix::from_element(units.len(), columns.len(), f64::NAN);
        for (u, c, v) in cells {
            values[(u, c)] = v;
        }
        if let Some(pos) = values.iter().position(|v| v.is_nan()) {
            let (u, c) = (pos % units.len(), pos / units.len());
            return Err(Error::Csv(format!(
                "no score for unit '{}' in column {}",
                units[u], columns[c]
            )));
        }
        return Ok(ScoreTable {
            unit_labels: units,
            columns,
            values,
        });
    }

    let header = first.iter().any(|f| f.parse::<f64>().is_err());
    let width = first.len();
    let columns: Vec<String> = if header {
        first.iter().map(str::to_string).collect()
    } else {
        (1..=width).map(|i| i.to_string()).collect()
    };
    let body: Vec<&csv::StringRecord> = rows.iter().skip(usize::from(header)).collect();
    let mut values = DMatrix::zeros(body.len(), width);
    for (k, r) in body.iter().enumerate() {
        let line = k + 1 + usize::from(header);
        if r.len() != width {
            return Err(Error::Csv(format!("line {line}: expected {width} fields")));
        }
        for (j, f) in r.iter().enumerate() {
            values[(k, j)] = number(f, line, &columns[j])?;
        }
    }
    Ok(ScoreTable {
        unit_labels: (1..=body.len()).map(|i| i.to_string()).collect(),
        columns,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn solution(k: usize) -> MccaSolution {
        MccaSolution {
            method: Method::Kernel,
            correlations: (0..k).map(|c| 0.9 / (c + 1) as f64 + 1e-13).collect(),
            weights: (0..k)
                .map(|c| {
                    vec![
                        DVector::from_vec(vec![0.1 * c as f64, 1.0 / 3.0]),
                        DVector::from_vec(vec![2.0, -1.0]),
                    ]
                })
                .collect(),
            scores: (0..k)
                .map(|c| DMatrix::from_fn(3, 2, |i, j| (i + j + c) as f64 / 7.0))
                .collect(),
            epsilon_used: 0.1,
            diagnostics: Diagnostics {
                deflated_rank: 4,
                block_ranks: vec![2, 2],
                degenerate: vec![false; k],
                constraint_residuals: vec![1e-15; k],
                warnings: vec![],
            },
        }
    }

    fn labels() -> (Vec<String>, Vec<String>) {
        (
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into()],
        )
    }

    #[test]
    fn three_components_descending() {
        let (u, f) = labels();
        let r = Report::new(&solution(3), &u, &f, None, None);
        assert_eq!(r.correlations.len(), 3);
        assert!(r.correlations.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(r.components[2].component, 3);
    }

    #[test]
    fn clusterability_omitted_when_absent() {
        let (u, f) = labels();
        let json = Report::new(&solution(1), &u, &f, None, None).to_json();
        assert!(!json.contains("clusterability"));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let (u, f) = labels();
        let cfg = AnalysisConfig::default();
        let r = Report::new(&solution(3), &u, &f, Some(&cfg), None);
        write_report(&r, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn io_error_names_path() {
        let (u, f) = labels();
        let r = Report::new(&solution(1), &u, &f, None, None);
        let err = write_report(&r, Path::new("/nonexistent-dir/report.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/report.json"));
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let (u, f) = labels();
        let sol = solution(2);
        write_scores_csv(&sol, &u, &f, &path).unwrap();
        let table = read_score_table(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(table.columns, ["1:x", "1:y", "2:x", "2:y"]);
        let pts = table
            .select(&["2:y".to_string(), "1:x".to_string()])
            .unwrap();
        for k in 0..3 {
            assert_eq!(pts[(k, 0)], sol.scores[1][(k, 1)]);
            assert_eq!(pts[(k, 1)], sol.scores[0][(k, 0)]);
        }
        assert!(table.select(&["9:x".to_string()]).is_err());
    }

    #[test]
    fn plain_matrix() {
        let t = read_score_table("0.5,1\n2,3\n4,5.5\n").unwrap();
        assert_eq!(t.columns, ["1", "2"]);
        assert_eq!(t.values[(2, 1)], 5.5);
        let t = read_score_table("u1,u2\n0.5,1\n2,3\n").unwrap();
        assert_eq!(t.columns, ["u1", "u2"]);
        assert_eq!(t.values.nrows(), 2);
    }
}
