use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::scalar::Scalar;

/// Per-row context carried alongside the numeric design matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RowMeta {
    pub anti_organism: String,
    pub organism: String,
    pub antibiotic: String,
    pub unit_admit_year: i32,
    pub culture_taken_year: i32,
}

impl RowMeta {
    /// Recovers organism and antibiotic from an `ao_<antibiotic>_<organism>`
    /// key. Study antibiotic names never contain `_`.
    pub fn from_key(key: &str) -> Self {
        let rest = key.strip_prefix("ao_").unwrap_or(key);
        let (antibiotic, organism) = rest.split_once('_').unwrap_or((rest, ""));
        RowMeta {
            anti_organism: key.to_string(),
            organism: organism.to_string(),
            antibiotic: antibiotic.to_string(),
            ..Default::default()
        }
    }
}

/// Dense row-major design matrix with row keys, labels and stay groups.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    column_names: Vec<String>,
    values: Vec<T>,
    pub row_keys: Vec<String>,
    pub labels: Vec<u8>,
    pub group_ids: Vec<String>,
    pub meta: Vec<RowMeta>,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Builds a matrix; `values` is row-major with `column_names.len()` columns.
    pub fn new(
        column_names: Vec<String>,
        values: Vec<T>,
        row_keys: Vec<String>,
        labels: Vec<u8>,
        group_ids: Vec<String>,
        meta: Vec<RowMeta>,
    ) -> Result<Self, FeatureError> {
        let n = labels.len();
        if row_keys.len() != n || group_ids.len() != n || meta.len() != n {
            return Err(FeatureError::Matrix("row metadata lengths differ".into()));
        }
        if values.len() != n * column_names.len() {
            return Err(FeatureError::Matrix(format!(
                "{} values for {} rows x {} columns",
                values.len(),
                n,
                column_names.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(FeatureError::Matrix("labels must be 0 or 1".into()));
        }
        Ok(Self { column_names, values, row_keys, labels, group_ids, meta })
    }

    /// Convenience constructor for tests and ad-hoc data: row keys and groups
    /// are the row index.
    pub fn from_rows(column_names: Vec<String>, rows: &[Vec<T>], labels: Vec<u8>) -> Result<Self, FeatureError> {
        let d = column_names.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(FeatureError::Matrix("ragged rows".into()));
        }
        let n = rows.len();
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        Self::new(
            column_names,
            rows.iter().flatten().copied().collect(),
            ids.clone(),
            labels,
            ids,
            vec![RowMeta::default(); n],
        )
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let d = self.n_cols();
        self.values[i * d + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().map(|&y| y as usize).sum()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.n_rows()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            column_names: self.column_names.clone(),
            values,
            row_keys: idx.iter().map(|&i| self.row_keys[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            group_ids: idx.iter().map(|&i| self.group_ids[i].clone()).collect(),
            meta: idx.iter().map(|&i| self.meta[i].clone()).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            column_names: self.column_names.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            row_keys: self.row_keys.clone(),
            labels: self.labels.clone(),
            group_ids: self.group_ids.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Writes `test_id, anti_organism, <features...>, label, group_id`.
    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: Option<&str>) -> Result<(), csv::Error> {
        if let Some(c) = header_comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header = vec!["test_id".to_string(), "anti_organism".to_string()];
        header.extend(self.column_names.iter().cloned());
        header.push("label".into());
        header.push("group_id".into());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.row_keys[i].clone(), self.meta[i].anti_organism.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            rec.push(self.labels[i].to_string());
            rec.push(self.group_ids[i].clone());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the layout produced by [`FeatureMatrix::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let headers = rdr
            .headers()
            .map_err(|e| FeatureError::Matrix(e.to_string()))?
            .clone();
        let h: Vec<&str> = headers.iter().collect();
        if h.len() < 4 || h[0] != "test_id" || h[1] != "anti_organism" || h[h.len() - 2] != "label" || h[h.len() - 1] != "group_id" {
            return Err(FeatureError::Matrix(
                "expected header test_id, anti_organism, <features>, label, group_id".into(),
            ));
        }
        let names: Vec<String> = h[2..h.len() - 2].iter().map(|s| s.to_string()).collect();
        let d = names.len();
        let mut values = Vec::new();
        let (mut keys, mut labels, mut groups, mut meta) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FeatureError::Matrix(e.to_string()))?;
            if rec.len() != d + 4 {
                return Err(FeatureError::Matrix(format!("row {}: expected {} fields", i + 1, d + 4)));
            }
            keys.push(rec[0].to_string());
            meta.push(RowMeta::from_key(&rec[1]));
            for j in 0..d {
                let v: f64 = rec[j + 2]
                    .trim()
                    .parse()
                    .map_err(|_| FeatureError::Matrix(format!("row {}: bad value in `{}`", i + 1, names[j])))?;
                values.push(T::of(v));
            }
            let y: u8 = rec[d + 2]
                .trim()
                .parse()
                .map_err(|_| FeatureError::Matrix(format!("row {}: bad label", i + 1)))?;
            labels.push(y);
            groups.push(rec[d + 3].to_string());
        }
        Self::new(names, values, keys, labels, groups, meta)
    }
}
