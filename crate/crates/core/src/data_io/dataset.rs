use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `n` units × `L` features, each observation a `T×p_l` block.
///
/// Blocks are stored feature-major: `blocks[l][k]` is `A_l[k]`, rows are
/// time points and columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedMeasuresDataset {
    unit_labels: Vec<String>,
    group_labels: Option<Vec<String>>,
    feature_names: Vec<String>,
    time_points: usize,
    blocks: Vec<Vec<DMatrix<f64>>>,
}

impl RepeatedMeasuresDataset {
    /// Validates and wraps the blocks.
    ///
    /// Requires `L ≥ 2`, `n ≥ 3`, `T ≥ 1`, `p_l ≥ 1`, a common `T` and `p_l`
    /// within each feature, and finite entries throughout.
    pub fn new(
        unit_labels: Vec<String>,
        group_labels: Option<Vec<String>>,
        feature_names: Vec<String>,
        blocks: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let n = unit_labels.len();
        let l = feature_names.len();
        if l < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 features, got {l}"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidDataset(format!(
                "need at least 3 units, got {n}"
            )));
        }
        if blocks.len() != l {
            return Err(Error::InvalidDataset(format!(
                "{} block sets for {l} features",
                blocks.len()
            )));
        }
        if let Some(groups) = &group_labels {
            if groups.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "{} group labels for {n} units",
                    groups.len()
                )));
            }
        }
        let time_points = blocks[0].first().map_or(0, |b| b.nrows());
        if time_points == 0 {
            return Err(Error::InvalidDataset("need at least 1 time point".into()));
        }
        for (f, per_unit) in blocks.iter().enumerate() {
            if per_unit.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "feature '{}' has {} blocks for {n} units",
                    feature_names[f],
                    per_unit.len()
                )));
            }
            let p = per_unit[0].ncols();
            if p == 0 {
                return Err(Error::InvalidDataset(format!(
                    "feature '{}' has no variables",
                    feature_names[f]
                )));
            }
            for (k, b) in per_unit.iter().enumerate() {
                if b.nrows() != time_points || b.ncols() != p {
                    return Err(Error::InconsistentShape {
                        feature: feature_names[f].clone(),
                        unit: unit_labels[k].clone(),
                    });
                }
                if !b.iter().all(|x| x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "block of unit '{}', feature '{}'",
                        unit_labels[k], feature_names[f]
                    )));
                }
            }
        }
        Ok(Self {
            unit_labels,
            group_labels,
            feature_names,
            time_points,
            blocks,
        })
    }

    pub fn n_units(&self) -> usize {
        self.unit_labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn time_points(&self) -> usize {
        self.time_points
    }

    /// `p_l` for every feature.
    pub fn variables(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b[0].ncols()).collect()
    }

    pub fn unit_labels(&self) -> &[String] {
        &self.unit_labels
    }

    pub fn group_labels(&self) -> Option<&[String]> {
        self.group_labels.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// All `n` blocks of feature `l`.
    pub fn feature_blocks(&self, l: usize) -> &[DMatrix<f64>] {
        &self.blocks[l]
    }

    pub fn block(&self, l: usize, k: usize) -> &DMatrix<f64> {
        &self.blocks[l][k]
    }

    /// Copy with every (feature, variable) column standardized to zero mean
    /// and unit sample variance over all units and time points. Constant
    /// columns are only centered.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        let count = (self.n_units() * self.time_points) as f64;
        for per_unit in out.blocks.iter_mut() {
            let p = per_unit[0].ncols();
            for v in 0..p {
                let mean = per_unit.iter().map(|b| b.column(v).sum()).sum::<f64>() / count;
                let ss: f64 = per_unit
                    .iter()
                    .map(|b| b.column(v).iter().map(|x| (x - mean).powi(2)).sum::<f64>())
                    .sum();
                let sd = if count > 1.0 {
                    (ss / (count - 1.0)).sqrt()
                } else {
                    0.0
                };
                let scale = if sd > 0.0 { sd.recip() } else { 1.0 };
                for b in per_unit.iter_mut() {
                    b.column_mut(v).apply(|x| *x = (*x - mean) * scale);
                }
            }
        }
        out
    }
}

struct Cell {
    unit: usize,
    feature: usize,
    time: usize,
    variable: usize,
    value: f64,
}

fn index_of(map: &mut HashMap<String, usize>, order: &mut Vec<String>, key: &str) -> usize {
    if let Some(&i) = map.get(key) {
        return i;
    }
    let i = order.len();
    map.insert(key.to_string(), i);
    order.push(key.to_string());
    i
}

fn parse_index(raw: &str, column: &str, line: usize) -> Result<usize> {
    match raw.trim().parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::NonNumericValue {
            line,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Parses the long-format CSV `unit,feature,time,variable,value[,group]`.
///
/// Units and features are indexed by first appearance; time and variable
/// indices are 1-based integers and blocks are laid out in ascending order of
/// both. Every (unit, feature, time, variable) combination must be present
/// exactly once.
pub fn parse_dataset(csv_text: &str) -> Result<RepeatedMeasuresDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let has_group = match cols.as_slice() {
        ["unit", "feature", "time", "variable", "value"] => false,
        ["unit", "feature", "time", "variable", "value", "group"] => true,
        _ => {
            return Err(Error::Csv(format!(
                "expected header 'unit,feature,time,variable,value[,group]', got '{}'",
                cols.join(",")
            )))
        }
    };

    let mut units = HashMap::new();
    let mut unit_order = Vec::new();
    let mut features = HashMap::new();
    let mut feature_order = Vec::new();
    let mut unit_groups: Vec<Option<String>> = Vec::new();
    let mut cells = Vec::new();

    for (row, record) in reader.records().enumerate() {
        // header is line 1
        let line = row + 2;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let unit = index_of(&mut units, &mut unit_order, &record[0]);
        let feature = index_of(&mut features, &mut feature_order, &record[1]);
        let time = parse_index(&record[2], "time", line)?;
        let variable = parse_index(&record[3], "variable", line)?;
        let value = match record[4].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(Error::NonNumericValue {
                    line,
                    column: "value".into(),
                    value: record[4].to_string(),
                })
            }
        };
        if has_group {
            if unit_groups.len() <= unit {
                unit_groups.resize(unit + 1, None);
            }
            let g = record[5].to_string();
            match &unit_groups[unit] {
                None => unit_groups[unit] = Some(g),
                Some(prev) if *prev != g => {
                    return Err(Error::InvalidDataset(format!(
                        "line {line}: unit '{}' has groups '{prev}' and '{g}'",
                        &record[0]
                    )))
                }
                _ => {}
            }
        }
        cells.push((
            line,
            Cell {
                unit,
                feature,
                time,
                variable,
                value,
            },
        ));
    }

    let n = unit_order.len();
    let l = feature_order.len();
    if l < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 features, got {l}"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidDataset(format!(
            "need at least 3 units, got {n}"
        )));
    }

    // Variable sets per (feature, unit); must agree across units.
    let mut var_sets: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; l];
    let mut time_max = 0;
    for (_, c) in &cells {
        let set = &mut var_sets[c.feature][c.unit];
        if !set.contains(&c.variable) {
            set.push(c.variable);
        }
        time_max = time_max.max(c.time);
    }
    let mut p = vec![0; l];
    for f in 0..l {
        for set in var_sets[f].iter_mut() {
            set.sort_unstable();
        }
        let reference = var_sets[f]
            .iter()
            .find(|s| !s.is_empty())
            .cloned()
            .unwrap_or_default();
        for (k, set) in var_sets[f].iter().enumerate() {
            if set.is_empty() {
                return Err(Error::MissingCell {
                    unit: unit_order[k].clone(),
                    feature: feature_order[f].clone(),
                    time: 1,
                    variable: reference.first().copied().unwrap_or(1),
                });
            }
            if *set != reference {
                return Err(Error::InconsistentShape {
                    feature: feature_order[f].clone(),
                    unit: unit_order[k].clone(),
                });
            }
        }
        // Variable indices must be 1..=p without gaps.
        if let Some(missing) = (1..=reference.len()).find(|v| !reference.contains(v)) {
            return Err(Error::MissingCell {
                unit: unit_order[0].clone(),
                feature: feature_order[f].clone(),
                time: 1,
                variable: missing,
            });
        }
        p[f] = reference.len();
    }

    let t = time_max;
    let mut seen: Vec<Vec<DMatrix<u8>>> = (0..l)
        .map(|f| (0..n).map(|_| DMatrix::zeros(t, p[f])).collect())
        .collect();
    let mut blocks: Vec<Vec<DMatrix<f64>>> = (0..l)
        .map(|f| (0..n).map(|_| DMatrix::zeros(t, p[f])).collect())
        .collect();
    for (line, c) in &cells {
        let (r, v) = (c.time - 1, c.variable - 1);
        let mark = &mut seen[c.feature][c.unit][(r, v)];
        if *mark != 0 {
            return Err(Error::DuplicateCell {
                line: *line,
                unit: unit_order[c.unit].clone(),
                feature: feature_order[c.feature].clone(),
                time: c.time,
                variable: c.variable,
            });
        }
        *mark = 1;
        blocks[c.feature][c.unit][(r, v)] = c.value;
    }
    for f in 0..l {
        for k in 0..n {
            for r in 0..t {
                for v in 0..p[f] {
                    if seen[f][k][(r, v)] == 0 {
                        return Err(Error::MissingCell {
                            unit: unit_order[k].clone(),
                            feature: feature_order[f].clone(),
                            time: r + 1,
                            variable: v + 1,
                        });
                    }
                }
            }
        }
    }

    let groups = if has_group {
        Some(
            unit_groups
                .into_iter()
                .map(Option::unwrap_or_default)
                .collect(),
        )
    } else {
        None
    };
    RepeatedMeasuresDataset::new(unit_order, groups, feature_order, blocks)
}

/// Long-format CSV in the layout [`parse_dataset`] reads. Values use the
/// shortest representation that round-trips exactly.
pub fn serialize_dataset(dataset: &RepeatedMeasuresDataset) -> String {
    let mut out = String::new();
    out.push_str("unit,feature,time,variable,value");
    if dataset.group_labels.is_some() {
        out.push_str(",group");
    }
    out.push('\n');
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for (k, unit) in dataset.unit_labels.iter().enumerate() {
        for (f, feature) in dataset.feature_names.iter().enumerate() {
            let b = &dataset.blocks[f][k];
            for r in 0..b.nrows() {
                for v in 0..b.ncols() {
                    let mut rec = vec![
                        unit.clone(),
                        feature.clone(),
                        (r + 1).to_string(),
                        (v + 1).to_string(),
                        format!("{}", b[(r, v)]),
                    ];
                    if let Some(groups) = &dataset.group_labels {
                        rec.push(groups[k].clone());
                    }
                    writer.write_record(&rec).expect("in-memory write");
                }
            }
        }
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&bytes).expect("utf-8 input"));
    out
}

pub fn read_dataset(path: &Path) -> Result<RepeatedMeasuresDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn write_dataset(dataset: &RepeatedMeasuresDataset, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_dataset(dataset)).map_err(|e| Error::io(path, e))
}
