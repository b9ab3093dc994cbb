//! Reading and writing panels in the FRED-QD file layout, the database's
//! transformation codes, and the mnemonic-to-group mapping.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::Panel;
use crate::policy::SeriesTransform;
use crate::series::{DifferencedSeries, TimeSeries};
use crate::transform::TransformSpec;

/// Transformation code 1 to 7 as published with the database.
///
/// | code | transform                         |
/// |------|-----------------------------------|
/// | 1    | levels                            |
/// | 2    | first difference                  |
/// | 3    | second difference                 |
/// | 4    | log                               |
/// | 5    | first difference of log           |
/// | 6    | second difference of log          |
/// | 7    | first difference of percent change |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TCode(u8);

impl TCode {
    pub fn new(code: u8) -> Result<Self> {
        if (1..=7).contains(&code) {
            Ok(Self(code))
        } else {
            Err(Error::InvalidParameter(format!(
                "transformation code must be 1 to 7, got {code}"
            )))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Power and differencing order implied by the code; code 7 differences
    /// percent changes and has no power.
    pub fn implied(self) -> (Option<f64>, usize) {
        match self.0 {
            1 => (Some(1.0), 0),
            2 => (Some(1.0), 1),
            3 => (Some(1.0), 2),
            4 => (Some(0.0), 0),
            5 => (Some(0.0), 1),
            6 => (Some(0.0), 2),
            _ => (None, 1),
        }
    }

    /// Differences relative to the levels; a percent change counts as one.
    pub fn total_diffs(self) -> usize {
        match self.0 {
            7 => 2,
            _ => self.implied().1,
        }
    }

    pub fn requires_positive(self) -> bool {
        self.0 >= 4
    }

    /// The code's own transformation, using the plain logarithm for codes 4 to 6.
    pub fn benchmark_transform(self) -> SeriesTransform {
        match self.implied() {
            (Some(0.0), n) => SeriesTransform::Power {
                spec: TransformSpec::new(0.0, n, 1.0).expect("unit normalizer is valid"),
            },
            (Some(_), n) => SeriesTransform::Levels { n_diffs: n },
            (None, _) => SeriesTransform::PctChangeDiff,
        }
    }
}

impl TryFrom<u8> for TCode {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        Self::new(code)
    }
}

impl From<TCode> for u8 {
    fn from(t: TCode) -> u8 {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcodeOutput {
    pub series: DifferencedSeries,
    /// The code needs positive data that the series lacks; raw levels with the
    /// same differencing were used instead.
    pub fallback: bool,
}

/// Applies a transformation code to a fully observed series.
pub fn apply_tcode(x: &TimeSeries, t: TCode) -> Result<TcodeOutput> {
    let positive = x.is_strictly_positive();
    let (transform, fallback) = if t.requires_positive() && !positive {
        (
            SeriesTransform::Levels {
                n_diffs: t.total_diffs(),
            },
            true,
        )
    } else {
        (t.benchmark_transform(), false)
    };
    let values = transform.apply(&x.values)?;
    Ok(TcodeOutput {
        series: DifferencedSeries {
            values,
            order: transform.lead(),
            source_len: x.len(),
        },
        fallback,
    })
}

const BUNDLED_GROUPS: &str = include_str!("../data/fredqd_groups.csv");

/// Mnemonic to group number (1 to 14).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupMap(HashMap<String, u8>);

#[derive(Debug, Deserialize)]
struct GroupRow {
    mnemonic: String,
    group: u8,
}

impl GroupMap {
    /// The mapping shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_GROUPS.as_bytes()).expect("bundled group map is valid")
    }

    /// Reads a `mnemonic,group` CSV with a header row.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut map = HashMap::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for (i, row) in rdr.deserialize::<GroupRow>().enumerate() {
            let row = row?;
            if !(1..=14).contains(&row.group) {
                return Err(Error::Parse {
                    row: i + 2,
                    column: 2,
                    message: format!("group must be 1 to 14, got {}", row.group),
                });
            }
            map.insert(row.mnemonic.trim().to_string(), row.group);
        }
        Ok(Self(map))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn get(&self, mnemonic: &str) -> Option<u8> {
        self.0.get(mnemonic).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Display label of a group; series outside the map are reported as "Other".
pub fn group_label(group: Option<u8>) -> String {
    group.map_or_else(|| "Other".to_string(), |g| g.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub panel: Panel,
    /// Mnemonics absent from the group map.
    pub unknown_mnemonics: Vec<String>,
}

const MISSING_TOKENS: [&str; 7] = ["", "na", "nan", "n/a", "#n/a", ".", "null"];

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if MISSING_TOKENS.contains(&cell.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            row,
            column,
            message: format!("'{cell}' is not a number"),
        }),
    }
}

fn parse_tcode(cell: &str, row: usize, column: usize) -> Result<TCode> {
    let err = |message: String| Error::Parse {
        row,
        column,
        message,
    };
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| err(format!("'{}' is not a transformation code", cell.trim())))?;
    if v.fract() != 0.0 || !(1.0..=7.0).contains(&v) {
        return Err(err(format!(
            "transformation code must be 1 to 7, got {}",
            cell.trim()
        )));
    }
    Ok(TCode(v as u8))
}

/// Parses a panel in the FRED-QD layout: a header of mnemonics after a date
/// column, an optional `factors` row, a row of transformation codes (labelled
/// `transform` or simply the first row after the header), then dated rows.
///
/// Row and column numbers in errors are 1-based file positions.
pub fn parse_fredqd(reader: impl Read, groups: &GroupMap) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = records.next().ok_or_else(|| Error::Parse {
        row: 1,
        column: 1,
        message: "empty file".into(),
    })??;
    let ids: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let n = ids.len();
    if n == 0 {
        return Err(Error::Parse {
            row: 1,
            column: 2,
            message: "no series columns".into(),
        });
    }

    let mut tcodes: Option<Vec<TCode>> = None;
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record?;
        let line = i + 2;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let label = record.get(0).unwrap_or("").trim().to_ascii_lowercase();
        if tcodes.is_none() && label.starts_with("factors") {
            continue;
        }
        if record.len() > n + 1 {
            return Err(Error::Parse {
                row: line,
                column: n + 2,
                message: format!(
                    "row has {} cells but the header has {}",
                    record.len(),
                    n + 1
                ),
            });
        }
        if tcodes.is_none() {
            let codes = (0..n)
                .map(|j| parse_tcode(record.get(j + 1).unwrap_or(""), line, j + 2))
                .collect::<Result<Vec<_>>>()?;
            tcodes = Some(codes);
            continue;
        }
        dates.push(record.get(0).unwrap_or("").trim().to_string());
        rows.push(
            (0..n)
                .map(|j| parse_cell(record.get(j + 1).unwrap_or(""), line, j + 2))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let tcodes = tcodes.ok_or_else(|| Error::Parse {
        row: 2,
        column: 1,
        message: "missing transformation-code row".into(),
    })?;

    let data = DMatrix::from_fn(rows.len(), n, |t, j| rows[t][j].unwrap_or(f64::NAN));
    let mut unknown = Vec::new();
    let group_col: Vec<Option<u8>> = ids
        .iter()
        .map(|id| {
            let g = groups.get(id);
            if g.is_none() {
                unknown.push(id.clone());
            }
            g
        })
        .collect();
    let mut panel = Panel::new(data, ids)?
        .with_groups(group_col)
        .with_dates(dates);
    panel.tcodes = tcodes.into_iter().map(Some).collect();
    Ok(Ingested {
        panel,
        unknown_mnemonics: unknown,
    })
}

pub fn parse_fredqd_csv(path: impl AsRef<Path>, groups: &GroupMap) -> Result<Ingested> {
    parse_fredqd(std::fs::File::open(path)?, groups)
}

/// Writes a panel in the layout [`parse_fredqd`] reads; values use the
/// shortest representation that parses back to the same number.
pub fn write_panel(p: &Panel, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sasdate".to_string()];
    header.extend(p.ids.iter().cloned());
    w.write_record(&header)?;
    let mut codes = vec!["transform".to_string()];
    codes.extend(
        p.tcodes
            .iter()
            .map(|t| t.map_or_else(|| "1".to_string(), |t| t.code().to_string())),
    );
    w.write_record(&codes)?;
    for t in 0..p.n_periods() {
        let mut row = vec![p.dates[t].clone()];
        row.extend((0..p.n_series()).map(|j| {
            if p.observed[(t, j)] {
                format!("{}", p.data[(t, j)])
            } else {
                String::new()
            }
        }));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "sasdate,GDPC1,UNRATE,XYZ\n\
factors,1,1,0\n\
transform,5,2,1\n\
3/1/1959,3123.2,5.8,1.5\n\
6/1/1959,3169.8,,1.25\n\
9/1/1959,3165.8,5.3,NA\n";

    #[test]
    fn toy_file_with_a_gap() {
        let r = parse_fredqd(TOY.as_bytes(), &GroupMap::bundled()).unwrap();
        let p = &r.panel;
        assert_eq!(p.ids, vec!["GDPC1", "UNRATE", "XYZ"]);
        assert_eq!(p.n_periods(), 3);
        assert_eq!(p.missing_count(), 2);
        assert!(!p.observed[(1, 1)]);
        assert_eq!(p.groups, vec![Some(1), Some(3), None]);
        assert_eq!(r.unknown_mnemonics, vec!["XYZ"]);
        assert_eq!(p.tcodes[0], Some(TCode::new(5).unwrap()));
        assert_eq!(p.dates[2], "9/1/1959");
    }

    #[test]
    fn bad_cells_report_position() {
        let bad_code = TOY.replace("transform,5,2,1", "transform,5,9,1");
        match parse_fredqd(bad_code.as_bytes(), &GroupMap::default()) {
            Err(Error::Parse {
                row: 3, column: 3, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let bad_value = TOY.replace("5.3", "5,3x");
        assert!(matches!(
            parse_fredqd(bad_value.as_bytes(), &GroupMap::default()),
            Err(Error::Parse { row: 6, .. })
        ));
    }

    #[test]
    fn write_then_parse_round_trip() {
        let groups = GroupMap::bundled();
        let first = parse_fredqd(TOY.as_bytes(), &groups).unwrap().panel;
        let mut buf = Vec::new();
        write_panel(&first, &mut buf).unwrap();
        let second = parse_fredqd(buf.as_slice(), &groups).unwrap().panel;
        assert_eq!(first.observed, second.observed);
        assert_eq!(first.tcodes, second.tcodes);
        assert_eq!(first.dates, second.dates);
        for (a, b) in first.data.iter().zip(second.data.iter()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn tcode_examples() {
        let x = TimeSeries::new(vec![1.0, 4.0, 2.0]);
        let out = apply_tcode(&x, TCode::new(1).unwrap()).unwrap();
        assert_eq!(out.series.values, x.values);
        let e = TimeSeries::new(vec![0.1f64.exp(), 0.2f64.exp(), 0.3f64.exp()]);
        let out = apply_tcode(&e, TCode::new(5).unwrap()).unwrap();
        assert!(out.series.values.iter().all(|v| (v - 0.1).abs() < 1e-12));
        let out = apply_tcode(
            &TimeSeries::new(vec![100.0, 110.0, 121.0]),
            TCode::new(7).unwrap(),
        )
        .unwrap();
        assert_eq!(out.series.values.len(), 1);
        assert!(out.series.values[0].abs() < 1e-15);
        assert!(TCode::new(0).is_err() && TCode::new(8).is_err());
    }

    #[test]
    fn non_positive_log_code_falls_back() {
        let x = TimeSeries::new(vec![1.0, -1.0, 2.0, 3.0]);
        let out = apply_tcode(&x, TCode::new(5).unwrap()).unwrap();
        assert!(out.fallback);
        assert_eq!(out.series.values, vec![-2.0, 3.0, 1.0]);
    }

    #[test]
    fn bundled_map_covers_fourteen_groups() {
        let m = GroupMap::bundled();
        assert!(m.len() > 200);
        assert_eq!(m.get("USPRIV"), Some(3));
        assert_eq!(m.get("S&P 500"), Some(13));
        assert_eq!(group_label(None), "Other");
    }
}
