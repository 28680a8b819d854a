//! Matrix ingestion, per-row standardization, replicate resampling and the
//! bundled Iris and Wine tables.
//!
//! Tables are always held with features as rows and candidates (items,
//! dictionary functions) as columns.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::loss::DesignMatrix;
use crate::record::format_sig9;
use crate::rng::XorShift64Star;
use crate::{Error, Result};

const IRIS_CSV: &str = include_str!("../data/iris.csv");
const WINE_CSV: &str = include_str!("../data/wine.csv");

/// How the source file lays out features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Each file row is a feature; columns are candidates.
    #[default]
    FeaturesAsRows,
    /// Each file row is a candidate (the usual "one sample per line" table).
    FeaturesAsCols,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    /// `D × P`, features as rows.
    pub values: DMatrix<f64>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Option<Vec<String>>,
    /// Layout of the file the table was read from.
    pub orientation: Orientation,
}

impl RawTable {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("table has non-finite values".into()));
        }
        Ok(Self {
            values,
            row_labels: None,
            col_labels: None,
            orientation: Orientation::FeaturesAsRows,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn candidates(&self) -> usize {
        self.values.ncols()
    }

    pub fn design(&self) -> Result<DesignMatrix> {
        DesignMatrix::new(self.values.clone())
    }
}

/// Parse a comma-separated numeric table.
///
/// Error positions are 1-based file line and field numbers.
pub fn parse_matrix_csv<R: Read>(
    reader: R,
    orientation: Orientation,
    has_header: bool,
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if let Some(expected) = width {
            if record.len() != expected {
                return Err(Error::RaggedRow {
                    line,
                    found: record.len(),
                    expected,
                });
            }
        } else {
            width = Some(record.len());
        }
        if has_header && header.is_none() {
            header = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(i, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::BadCell {
                    line,
                    column: i + 1,
                    value: cell.to_owned(),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let (Some(width), false) = (width, rows.is_empty()) else {
        return Err(Error::EmptyInput);
    };
    let file = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let (values, row_labels, col_labels) = match orientation {
        Orientation::FeaturesAsRows => (file, None, header),
        Orientation::FeaturesAsCols => (file.transpose(), header, None),
    };
    Ok(RawTable {
        values,
        row_labels,
        col_labels,
        orientation,
    })
}

pub fn load_matrix_csv(
    path: impl AsRef<Path>,
    orientation: Orientation,
    has_header: bool,
) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    parse_matrix_csv(std::io::BufReader::new(file), orientation, has_header)
}

/// Write `m` as headerless CSV with 9 significant digits.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_sig9(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Z-score every row: mean 0, sample standard deviation 1 (divisor `P − 1`).
pub fn standardize_rows(table: &RawTable) -> Result<RawTable> {
    let p = table.candidates();
    let mut out = table.clone();
    for (d, mut row) in out.values.row_iter_mut().enumerate() {
        if p < 2 {
            return Err(Error::ConstantRow { row: d });
        }
        let mean = row.sum() / p as f64;
        row.add_scalar_mut(-mean);
        let sd = (row.norm_squared() / (p - 1) as f64).sqrt();
        if sd.is_nan() || sd <= 0.0 || row.iter().all(|&v| v == row[0]) {
            return Err(Error::ConstantRow { row: d });
        }
        row /= sd;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSpec {
    pub seed: u64,
    pub downsample_factor: f64,
    pub standardize: bool,
    pub truncate_rows: Option<usize>,
}

impl Default for ReplicateSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            downsample_factor: 2.0,
            standardize: true,
            truncate_rows: None,
        }
    }
}

/// Keep `floor(P / factor)` columns drawn uniformly without replacement,
/// in ascending order.
pub fn subsample_columns(table: &RawTable, spec: &ReplicateSpec) -> Result<RawTable> {
    let factor = spec.downsample_factor;
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::Domain(format!(
            "downsample factor must be at least 1, got {factor}"
        )));
    }
    let p = table.candidates();
    let keep = (p as f64 / factor).floor() as usize;
    if keep == 0 {
        return Err(Error::Dimension(format!(
            "downsampling {p} columns by {factor} leaves none"
        )));
    }
    let picked = XorShift64Star::new(spec.seed).sample_indices(p, keep);
    Ok(RawTable {
        values: table.values.select_columns(&picked),
        row_labels: table.row_labels.clone(),
        col_labels: table
            .col_labels
            .as_ref()
            .map(|l| picked.iter().map(|&i| l[i].clone()).collect()),
        orientation: table.orientation,
    })
}

/// First `rows` rows.
pub fn truncate_rows(table: &RawTable, rows: usize) -> Result<RawTable> {
    if rows == 0 || rows > table.dim() {
        return Err(Error::Dimension(format!(
            "cannot keep {rows} of {} rows",
            table.dim()
        )));
    }
    Ok(RawTable {
        values: table.values.rows(0, rows).into_owned(),
        row_labels: table.row_labels.as_ref().map(|l| l[..rows].to_vec()),
        col_labels: table.col_labels.clone(),
        orientation: table.orientation,
    })
}

/// Standardize, then subsample, then truncate.
pub fn prepare_replicate(table: &RawTable, spec: &ReplicateSpec) -> Result<RawTable> {
    let base = if spec.standardize {
        standardize_rows(table)?
    } else {
        table.clone()
    };
    let sampled = subsample_columns(&base, spec)?;
    match spec.truncate_rows {
        Some(rows) => truncate_rows(&sampled, rows),
        None => Ok(sampled),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Iris,
    Wine,
}

impl Fixture {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Iris => "iris",
            Self::Wine => "wine",
        }
    }

    /// Default row truncation (Wine keeps its first six features).
    pub fn default_truncation(&self) -> Option<usize> {
        match self {
            Self::Iris => None,
            Self::Wine => Some(6),
        }
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iris" => Ok(Self::Iris),
            "wine" => Ok(Self::Wine),
            _ => Err(Error::UnknownFixture(s.to_owned())),
        }
    }
}

/// Iris is `4 × 150`; Wine is `13 × 178`. Rows carry the feature names.
pub fn load_fixture(fixture: Fixture) -> Result<RawTable> {
    let text = match fixture {
        Fixture::Iris => IRIS_CSV,
        Fixture::Wine => WINE_CSV,
    };
    parse_matrix_csv(text.as_bytes(), Orientation::FeaturesAsCols, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn parse(text: &str, orientation: Orientation, header: bool) -> Result<RawTable> {
        parse_matrix_csv(text.as_bytes(), orientation, header)
    }

    #[test]
    fn parses_plain_csv() {
        let t = parse("1,2,3\n4,5,6\n", Orientation::FeaturesAsRows, false).unwrap();
        assert_eq!((t.dim(), t.candidates()), (2, 3));
        assert_eq!(t.values[(1, 2)], 6.0);
        let t = parse("1,2,3\n4,5,6\n", Orientation::FeaturesAsCols, false).unwrap();
        assert_eq!((t.dim(), t.candidates()), (3, 2));
        assert_eq!(t.values[(2, 1)], 6.0);
    }

    #[test]
    fn header_becomes_labels() {
        let t = parse("a,b\n1,2\n3,4\n", Orientation::FeaturesAsCols, true).unwrap();
        assert_eq!(t.row_labels.unwrap(), vec!["a", "b"]);
        let t = parse("a,b\n1,2\n3,4\n", Orientation::FeaturesAsRows, true).unwrap();
        assert_eq!(t.col_labels.as_ref().unwrap(), &vec!["a", "b"]);
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn tolerates_whitespace_and_blank_lines() {
        let t = parse(" 1 , 2\n\n3,4 \n", Orientation::FeaturesAsRows, false).unwrap();
        assert_eq!(t.values, dmatrix![1.0, 2.0; 3.0, 4.0]);
    }

    #[test]
    fn reports_bad_cell() {
        let err = parse("1,2\n3,abc\n", Orientation::FeaturesAsRows, false).unwrap_err();
        match err {
            Error::BadCell {
                line,
                column,
                value,
            } => {
                assert_eq!((line, column, value.as_str()), (2, 2, "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_is_bad_cell(parse(
            "1,NaN\n",
            Orientation::FeaturesAsRows,
            false
        )));
        assert!(err_is_bad_cell(parse(
            "1,inf\n",
            Orientation::FeaturesAsRows,
            false
        )));
    }

    fn err_is_bad_cell(r: Result<RawTable>) -> bool {
        matches!(r, Err(Error::BadCell { .. }))
    }

    #[test]
    fn reports_ragged_and_empty() {
        assert!(matches!(
            parse("1,2\n3\n", Orientation::FeaturesAsRows, false),
            Err(Error::RaggedRow {
                line: 2,
                found: 1,
                expected: 2
            })
        ));
        assert!(matches!(
            parse("", Orientation::FeaturesAsRows, false),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            parse("a,b\n", Orientation::FeaturesAsRows, true),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn roundtrips_through_writer() {
        let m = dmatrix![1.0, -2.5; 1e-7, 2.468_013_579_246_801];
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "1,-2.5\n1e-7,2.46801358\n");
        let back = parse(&text, Orientation::FeaturesAsRows, false).unwrap();
        assert!((back.values - m).abs().max() < 1e-8);
    }

    #[test]
    fn standardization() {
        let t = RawTable::new(dmatrix![1.0, 2.0, 3.0; 0.0, 4.0, 8.0]).unwrap();
        let s = standardize_rows(&t).unwrap();
        for (got, want) in s.values.row(0).iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let again = standardize_rows(&s).unwrap();
        assert!((again.values - &s.values).abs().max() < 1e-12);

        let flat = RawTable::new(dmatrix![1.0, 2.0, 3.0; 5.0, 5.0, 5.0]).unwrap();
        assert!(matches!(
            standardize_rows(&flat),
            Err(Error::ConstantRow { row: 1 })
        ));
    }

    #[test]
    fn fixture_shapes() {
        let iris = load_fixture(Fixture::Iris).unwrap();
        assert_eq!((iris.dim(), iris.candidates()), (4, 150));
        assert_eq!(iris.row_labels.as_ref().unwrap()[3], "petal_width");
        let wine = load_fixture(Fixture::Wine).unwrap();
        assert_eq!((wine.dim(), wine.candidates()), (13, 178));
        assert_eq!(wine.row_labels.as_ref().unwrap()[0], "alcohol");
        assert!(matches!(
            "Ethanol".parse::<Fixture>(),
            Err(Error::UnknownFixture(_))
        ));
        assert_eq!("WINE".parse::<Fixture>().unwrap(), Fixture::Wine);
    }

    #[test]
    fn subsampling_counts_and_determinism() {
        let iris = load_fixture(Fixture::Iris).unwrap();
        let wine = load_fixture(Fixture::Wine).unwrap();
        let spec = ReplicateSpec {
            seed: 3,
            ..Default::default()
        };
        assert_eq!(subsample_columns(&iris, &spec).unwrap().candidates(), 75);
        assert_eq!(subsample_columns(&wine, &spec).unwrap().candidates(), 89);
        assert_eq!(
            subsample_columns(&iris, &spec).unwrap(),
            subsample_columns(&iris, &spec).unwrap()
        );
        let other = ReplicateSpec {
            seed: 4,
            ..spec.clone()
        };
        assert_ne!(
            subsample_columns(&iris, &spec).unwrap().values,
            subsample_columns(&iris, &other).unwrap().values
        );
        let bad = ReplicateSpec {
            downsample_factor: 0.5,
            ..spec
        };
        assert!(subsample_columns(&iris, &bad).is_err());
    }

    #[test]
    fn truncation() {
        let wine = load_fixture(Fixture::Wine).unwrap();
        let t = truncate_rows(&wine, 6).unwrap();
        assert_eq!(t.dim(), 6);
        assert_eq!(t.values.row(5), wine.values.row(5));
        assert_eq!(t.row_labels.unwrap().len(), 6);
        assert_eq!(truncate_rows(&wine, 13).unwrap(), wine);
        assert!(truncate_rows(&wine, 0).is_err());
        assert!(truncate_rows(&wine, 14).is_err());
    }

    #[test]
    fn pipeline_order() {
        let iris = load_fixture(Fixture::Iris).unwrap();
        let spec = ReplicateSpec {
            seed: 1,
            ..Default::default()
        };
        let rep = prepare_replicate(&iris, &spec).unwrap();
        assert_eq!((rep.dim(), rep.candidates()), (4, 75));
        // standardized on all 150 columns first, so the subsample is a
        // column subset of the standardized table
        let full = standardize_rows(&iris).unwrap();
        let direct = subsample_columns(&full, &spec).unwrap();
        assert_eq!(rep.values, direct.values);
        assert!(rep.design().is_ok());
    }
}
