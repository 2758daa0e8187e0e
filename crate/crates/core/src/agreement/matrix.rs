use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::AgreementError;
use crate::Label;

/// One row of a label file: `annotator_id,post_id,label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub annotator_id: String,
    pub post_id: String,
    pub label: Label,
}

pub const LABEL_HEADER: [&str; 3] = ["annotator_id", "post_id", "label"];

#[derive(Deserialize)]
struct RawLabelRow {
    annotator_id: String,
    post_id: String,
    label: String,
}

/// Parses a label file. A missing judgement is simply an absent row. Row
/// numbers in errors count the header as row 1.
pub fn read_label_file<R: Read>(reader: R) -> Result<Vec<LabelRow>, AgreementError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| AgreementError::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != LABEL_HEADER {
        return Err(AgreementError::Parse {
            row: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                LABEL_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    rdr.deserialize::<RawLabelRow>()
        .enumerate()
        .map(|(i, row)| {
            let row_no = i + 2;
            let row = row.map_err(|e| AgreementError::Parse {
                row: row_no,
                message: e.to_string(),
            })?;
            let label = row.label.parse().map_err(|e| AgreementError::Parse {
                row: row_no,
                message: format!("{e}"),
            })?;
            Ok(LabelRow {
                annotator_id: row.annotator_id,
                post_id: row.post_id,
                label,
            })
        })
        .collect()
}

pub fn write_label_file<W: Write>(writer: W, rows: &[LabelRow]) -> Result<(), AgreementError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LABEL_HEADER)?;
    for r in rows {
        w.write_record([r.annotator_id.as_str(), r.post_id.as_str(), r.label.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Annotators x items grid of optional labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    annotators: Vec<String>,
    items: Vec<String>,
    cells: Vec<Vec<Option<Label>>>,
}

impl LabelMatrix {
    /// Empty grid; ids must be unique.
    pub fn new(annotators: Vec<String>, items: Vec<String>) -> Result<Self, AgreementError> {
        if let Some(d) = first_duplicate(&annotators) {
            return Err(AgreementError::DuplicateId(d));
        }
        if let Some(d) = first_duplicate(&items) {
            return Err(AgreementError::DuplicateId(d));
        }
        let cells = vec![vec![None; items.len()]; annotators.len()];
        Ok(Self {
            annotators,
            items,
            cells,
        })
    }

    /// Builds a grid from label rows. Annotators and items are ordered
    /// lexicographically so that equal row sets always give equal matrices.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a LabelRow>) -> Result<Self, AgreementError> {
        let rows: Vec<&LabelRow> = rows.into_iter().collect();
        let annotators: BTreeSet<&str> = rows.iter().map(|r| r.annotator_id.as_str()).collect();
        let items: BTreeSet<&str> = rows.iter().map(|r| r.post_id.as_str()).collect();
        let mut m = Self::new(
            annotators.into_iter().map(str::to_string).collect(),
            items.into_iter().map(str::to_string).collect(),
        )?;
        let a_idx: HashMap<String, usize> =
            m.annotators.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let i_idx: HashMap<String, usize> =
            m.items.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        for r in rows {
            let cell = &mut m.cells[a_idx[&r.annotator_id]][i_idx[&r.post_id]];
            if cell.is_some() {
                return Err(AgreementError::DuplicateCell {
                    annotator: r.annotator_id.clone(),
                    item: r.post_id.clone(),
                });
            }
            *cell = Some(r.label);
        }
        Ok(m)
    }

    /// Grid from explicit rows of cells, mainly for tests and simulations.
    pub fn from_cells(
        annotators: Vec<String>,
        items: Vec<String>,
        cells: Vec<Vec<Option<Label>>>,
    ) -> Result<Self, AgreementError> {
        let mut m = Self::new(annotators, items)?;
        if cells.len() != m.annotators.len() || cells.iter().any(|r| r.len() != m.items.len()) {
            return Err(AgreementError::Shape);
        }
        m.cells = cells;
        Ok(m)
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_annotators(&self) -> usize {
        self.annotators.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn set(&mut self, annotator: usize, item: usize, label: Option<Label>) {
        self.cells[annotator][item] = label;
    }

    pub fn cell(&self, annotator: usize, item: usize) -> Option<Label> {
        self.cells[annotator][item]
    }

    pub fn row(&self, annotator: usize) -> &[Option<Label>] {
        &self.cells[annotator]
    }

    pub fn annotator_index(&self, id: &str) -> Option<usize> {
        self.annotators.iter().position(|a| a == id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|a| a == id)
    }

    /// Present labels for item `item`, in annotator order.
    pub fn unit(&self, item: usize) -> Vec<Label> {
        self.cells.iter().filter_map(|row| row[item]).collect()
    }

    /// All item columns as lists of present labels.
    pub fn units(&self) -> impl Iterator<Item = Vec<Label>> + '_ {
        (0..self.items.len()).map(|i| self.unit(i))
    }

    /// Keeps only the named annotators, in the order given.
    pub fn restrict_annotators<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self, AgreementError> {
        let mut annotators = Vec::with_capacity(ids.len());
        let mut cells = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let idx = self
                .annotator_index(id)
                .ok_or_else(|| AgreementError::UnknownAnnotator(id.to_string()))?;
            annotators.push(id.to_string());
            cells.push(self.cells[idx].clone());
        }
        Self::from_cells(annotators, self.items.clone(), cells)
    }

    pub fn to_rows(&self) -> Vec<LabelRow> {
        let mut rows = Vec::new();
        for (a, row) in self.annotators.iter().zip(&self.cells) {
            for (item, cell) in self.items.iter().zip(row) {
                if let Some(label) = cell {
                    rows.push(LabelRow {
                        annotator_id: a.clone(),
                        post_id: item.clone(),
                        label: *label,
                    });
                }
            }
        }
        rows
    }
}

fn first_duplicate(ids: &[String]) -> Option<String> {
    let mut seen = BTreeSet::new();
    ids.iter().find(|id| !seen.insert(id.as_str())).cloned()
}
