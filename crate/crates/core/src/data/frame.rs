use std::path::Path;

use crate::error::{Error, Result};

use super::schema::{ColumnRole, ColumnSpec, Schema};

/// Values of one column.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    fn permuted(&self, order: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(order.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(order.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// A typed table ordered by its timestamp column (or by file order when it has none).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    schema: Schema,
    columns: Vec<ColumnData>,
    n: usize,
    dropped_rows: usize,
}

impl SeriesFrame {
    /// Builds a frame from columns in schema order, sorting rows by timestamp.
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Data(format!(
                "{} columns for a schema of {}",
                columns.len(),
                schema.len()
            )));
        }
        let n = columns.first().map_or(0, ColumnData::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "column '{}' has {} rows, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            let cat = spec.role == ColumnRole::Categorical;
            if cat != matches!(col, ColumnData::Categorical(_)) {
                return Err(Error::Data(format!("column '{}' has the wrong value kind", spec.name)));
            }
            if let ColumnData::Numeric(v) = col {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Data(format!("column '{}' holds non-finite values", spec.name)));
                }
            }
        }
        if n == 0 {
            return Err(Error::Data("frame has no rows".into()));
        }
        let mut frame = Self {
            schema,
            columns,
            n,
            dropped_rows: 0,
        };
        frame.sort_by_timestamp();
        Ok(frame)
    }

    fn sort_by_timestamp(&mut self) {
        let Some(ts) = self.schema.timestamp_index() else {
            return;
        };
        let stamps = self.columns[ts].as_numeric().expect("timestamp is numeric");
        if stamps.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| stamps[a].total_cmp(&stamps[b]));
        self.columns = self.columns.iter().map(|c| c.permuted(&order)).collect();
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.schema.index_of(name).map(|i| &self.columns[i])
    }

    pub fn numeric(&self, name: &str) -> Option<&[f64]> {
        self.column(name).and_then(ColumnData::as_numeric)
    }

    pub fn target(&self) -> &[f64] {
        self.columns[self.schema.target_index()]
            .as_numeric()
            .expect("target is numeric")
    }

    /// Copy of the frame restricted to a row range.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n {
            return Err(Error::invalid(format!("row range {range:?} outside 0..{}", self.n)));
        }
        let order: Vec<usize> = range.collect();
        Ok(Self {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.permuted(&order)).collect(),
            n: order.len(),
            dropped_rows: self.dropped_rows,
        })
    }

    pub(crate) fn with_columns(&self, schema: Schema, columns: Vec<ColumnData>) -> Self {
        Self {
            schema,
            columns,
            n: self.n,
            dropped_rows: self.dropped_rows,
        }
    }

    /// Writes the frame as CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(self.schema.columns().iter().map(|c| c.name.as_str()))
            .map_err(csv_err)?;
        for row in 0..self.n {
            let record: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c {
                    ColumnData::Numeric(v) => format!("{:?}", v[row]),
                    ColumnData::Categorical(v) => v[row].clone(),
                })
                .collect();
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a headered CSV whose columns are exactly the schema's (in any order).
///
/// Columns with role `ignore` must appear in the header but are not kept. Rows with an
/// empty, unparseable or out-of-vocabulary cell in a kept column are
/// dropped and counted in [`SeriesFrame::dropped_rows`].
pub fn load_csv(path: &Path, schema: &Schema) -> Result<SeriesFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, schema)
}

/// Lines starting with `#` are comments.
pub fn read_csv<R: std::io::Read>(input: R, schema: &Schema) -> Result<SeriesFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut positions: Vec<usize> = Vec::with_capacity(schema.len());
    for spec in schema.columns() {
        let pos = header
            .iter()
            .position(|h| *h == spec.name)
            .ok_or_else(|| Error::Data(format!("header is missing schema column '{}'", spec.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| schema.index_of(h).is_none()) {
        return Err(Error::Data(format!("header column '{extra}' is not in the schema")));
    }
    if header.len() != schema.len() {
        return Err(Error::Data("header repeats a column".into()));
    }

    // ignored columns are checked against the header but not kept
    let kept: Vec<(&ColumnSpec, usize)> = schema
        .columns()
        .iter()
        .zip(positions)
        .filter(|(spec, _)| spec.role != ColumnRole::Ignore)
        .collect();
    let kept_schema = Schema::new(kept.iter().map(|(s, _)| (*s).clone()).collect())?;
    let mut columns: Vec<ColumnData> = kept
        .iter()
        .map(|(spec, _)| match spec.role {
            ColumnRole::Categorical => ColumnData::Categorical(Vec::new()),
            _ => ColumnData::Numeric(Vec::new()),
        })
        .collect();
    let mut dropped = 0usize;
    let mut cells: Vec<Cell> = Vec::with_capacity(kept.len());
    for record in reader.records() {
        let Ok(record) = record else {
            dropped += 1;
            continue;
        };
        cells.clear();
        if record.len() != header.len() {
            dropped += 1;
            continue;
        }
        for (spec, pos) in &kept {
            match parse_cell(spec, &record[*pos]) {
                Some(c) => cells.push(c),
                None => break,
            }
        }
        if cells.len() != kept.len() {
            dropped += 1;
            continue;
        }
        for (col, cell) in columns.iter_mut().zip(cells.drain(..)) {
            match (col, cell) {
                (ColumnData::Numeric(v), Cell::Num(x)) => v.push(x),
                (ColumnData::Categorical(v), Cell::Cat(s)) => v.push(s),
                _ => unreachable!("cells parse according to their column role"),
            }
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Data(format!("no usable rows ({dropped} dropped)")));
    }
    let mut frame = SeriesFrame::new(kept_schema, columns)?;
    frame.dropped_rows = dropped;
    Ok(frame)
}

enum Cell {
    Num(f64),
    Cat(String),
}

fn parse_cell(spec: &ColumnSpec, raw: &str) -> Option<Cell> {
    if raw.is_empty() {
        return None;
    }
    match spec.role {
        ColumnRole::Categorical => spec
            .categories
            .iter()
            .any(|c| c == raw)
            .then(|| Cell::Cat(raw.to_string())),
        _ => raw.parse::<f64>().ok().filter(|x| x.is_finite()).map(Cell::Num),
    }
}

/// Replaces each categorical column with one indicator column per category, named
/// `column=category`.
pub fn encode_categoricals(frame: &SeriesFrame) -> Result<SeriesFrame> {
    let mut specs = Vec::new();
    let mut cols = Vec::new();
    for (spec, col) in frame.schema().columns().iter().zip(frame.columns()) {
        match col {
            ColumnData::Categorical(values) => {
                let mut blocks = vec![vec![0.0; values.len()]; spec.categories.len()];
                for (row, v) in values.iter().enumerate() {
                    let k = spec
                        .categories
                        .iter()
                        .position(|c| c == v)
                        .ok_or_else(|| Error::Data(format!("unknown category '{v}' in column '{}'", spec.name)))?;
                    blocks[k][row] = 1.0;
                }
                for (cat, block) in spec.categories.iter().zip(blocks) {
                    let mut s = ColumnSpec::new(format!("{}={cat}", spec.name), ColumnRole::Numeric, "");
                    s.one_hot_of = Some(spec.name.clone());
                    specs.push(s);
                    cols.push(ColumnData::Numeric(block));
                }
            }
            ColumnData::Numeric(_) => {
                specs.push(spec.clone());
                cols.push(col.clone());
            }
        }
    }
    Ok(frame.with_columns(Schema::new(specs)?, cols))
}
