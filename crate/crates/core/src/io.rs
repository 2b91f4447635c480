//! Plain-text artifacts: field CSV and PGM images, error histories, far-field
//! tables and run manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces the values bit for bit and identical runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::experiments::IterationRecord;
use crate::grid::{Grid, MediumField};
use crate::{CVector, Error, Result, C64};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// One row per `m2` (ascending), `2M` real parts for `m1` ascending followed
/// by the `2M` imaginary parts.
pub fn field_to_csv(field: &MediumField) -> String {
    let side = field.grid().side();
    let mut out = String::new();
    for row in field.values().as_slice().chunks(side) {
        let re = row.iter().map(|v| v.re.to_string());
        let im = row.iter().map(|v| v.im.to_string());
        out.push_str(&re.chain(im).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn field_from_csv(grid: Grid, text: &str) -> Result<MediumField> {
    let side = grid.side();
    let bad = |message: String| Error::Format {
        what: "field CSV",
        message,
    };
    let mut values = Vec::with_capacity(grid.num_cells());
    let mut rows = 0;
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let nums = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", line_no + 1)))?;
        if nums.len() != 2 * side {
            return Err(bad(format!("line {}: expected {} values, found {}", line_no + 1, 2 * side, nums.len())));
        }
        values.extend((0..side).map(|c| C64::new(nums[c], nums[side + c])));
        rows += 1;
    }
    if rows != side {
        return Err(bad(format!("expected {side} rows, found {rows}")));
    }
    MediumField::new(grid, CVector::from_vec(values))
}

/// ASCII PGM (P2) of the real part, linearly mapped from `[min, max]` to
/// `[0, 255]`, top row is the largest `m2`.
pub fn field_to_pgm(field: &MediumField) -> String {
    let side = field.grid().side();
    let re: Vec<f64> = field.values().iter().map(|v| v.re).collect();
    let lo = re.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = re.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P2\n{side} {side}\n255\n");
    for row in re.chunks(side).rev() {
        let pixels: Vec<String> = row
            .iter()
            .map(|v| {
                let level = if span > 0.0 { (v - lo) / span * 255.0 } else { 0.0 };
                (level.round() as u8).to_string()
            })
            .collect();
        out.push_str(&pixels.join(" "));
        out.push('\n');
    }
    out
}

/// `iteration,mse,wall_ms`. Wall time is written as 0 unless requested, so
/// that the file depends only on the inputs.
pub fn mse_csv(records: &[IterationRecord], record_wall_time: bool) -> String {
    let mut out = String::from("iteration,mse,wall_ms\n");
    for r in records {
        let wall = if record_wall_time { r.wall_ms } else { 0.0 };
        let _ = writeln!(out, "{},{},{}", r.iteration, r.mse, wall);
    }
    out
}

/// `iteration,wall_ms,alpha`.
pub fn timing_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,wall_ms,alpha\n");
    for r in records {
        let alpha = r.alpha.map_or(String::new(), |a| a.to_string());
        let _ = writeln!(out, "{},{},{}", r.iteration, r.wall_ms, alpha);
    }
    out
}

/// Parses the `mse` column of an `mse.csv`.
pub fn parse_mse_csv(text: &str) -> Result<Vec<(usize, f64)>> {
    let bad = |message: String| Error::Format {
        what: "mse.csv",
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some("iteration,mse,wall_ms") {
        return Err(bad("missing header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(format!("line {}: expected 3 columns", i + 2)));
            }
            let it = cols[0].parse().map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            let e = cols[1].parse().map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            Ok((it, e))
        })
        .collect()
}

/// Long-format table of complex samples, `header` names the index columns.
pub fn complex_table(header: &str, rows: impl IntoIterator<Item = (String, C64)>) -> String {
    let mut out = format!("{header},re,im\n");
    for (index, v) in rows {
        let _ = writeln!(out, "{index},{},{}", v.re, v.im);
    }
    out
}

/// One row of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub axis_value: f64,
    pub algorithm: String,
    pub final_mse: Option<f64>,
    pub min_mse: Option<f64>,
    pub min_iteration: Option<usize>,
    pub status: String,
}

impl SummaryRow {
    pub fn from_records(axis_value: f64, algorithm: &str, records: &[IterationRecord], status: &str) -> Self {
        let min = records
            .iter()
            .min_by(|a, b| a.mse.total_cmp(&b.mse))
            .map(|r| (r.mse, r.iteration));
        SummaryRow {
            axis_value,
            algorithm: algorithm.to_string(),
            final_mse: records.last().map(|r| r.mse),
            min_mse: min.map(|m| m.0),
            min_iteration: min.map(|m| m.1),
            status: status.to_string(),
        }
    }
}

pub fn sweep_summary_csv(axis: &str, rows: &[SummaryRow]) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut out = format!("{axis},algorithm,final_mse,min_mse,min_iteration,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.axis_value,
            r.algorithm,
            opt(r.final_mse.map(|v| v.to_string())),
            opt(r.min_mse.map(|v| v.to_string())),
            opt(r.min_iteration.map(|v| v.to_string())),
            r.status
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{phantom, PhantomKind};

    #[test]
    fn field_csv_round_trips_exactly() {
        let grid = Grid::new(3.0, 2).unwrap();
        let f = MediumField::from_fn(grid, |[x, y]| C64::new(x.sin() / 3.0, y * 1e-17 - 0.1));
        let text = field_to_csv(&f);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(field_from_csv(grid, &text).unwrap(), f);
        assert!(field_from_csv(Grid::new(3.0, 3).unwrap(), &text).is_err());
        assert!(field_from_csv(grid, "1,2\n").is_err());
    }

    #[test]
    fn csv_layout_puts_m1_along_columns() {
        let grid = Grid::new(1.0, 1).unwrap();
        // cells ordered (m1, m2) = (-1,-1), (0,-1), (-1,0), (0,0)
        let f = MediumField::new(
            grid,
            CVector::from_vec(vec![C64::new(1.0, 5.0), C64::new(2.0, 6.0), C64::new(3.0, 7.0), C64::new(4.0, 8.0)]),
        )
        .unwrap();
        assert_eq!(field_to_csv(&f), "1,2,5,6\n3,4,7,8\n");
    }

    #[test]
    fn pgm_scales_to_full_range() {
        let grid = Grid::new(3.0, 6).unwrap();
        let pgm = field_to_pgm(&phantom(grid, PhantomKind::Disk));
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("12 12"));
        assert_eq!(lines.next(), Some("255"));
        let pixels: Vec<u8> = lines.flat_map(|l| l.split(' ').map(|p| p.parse::<u8>().unwrap())).collect();
        assert_eq!(pixels.len(), 144);
        assert_eq!(pixels.iter().filter(|&&p| p == 255).count(), 12);
        assert_eq!(pixels.iter().filter(|&&p| p == 0).count(), 132);
        // constant field does not divide by zero
        assert!(field_to_pgm(&MediumField::zeros(grid)).contains("0 0 0"));
    }

    #[test]
    fn mse_csv_round_trip() {
        let records = [
            IterationRecord {
                iteration: 0,
                mse: 12.0,
                wall_ms: 0.0,
                alpha: None,
            },
            IterationRecord {
                iteration: 1,
                mse: 0.1 + 0.2,
                wall_ms: 3.5,
                alpha: Some(100.0),
            },
        ];
        let text = mse_csv(&records, false);
        assert_eq!(text, "iteration,mse,wall_ms\n0,12,0\n1,0.30000000000000004,0\n");
        assert_eq!(parse_mse_csv(&text).unwrap(), vec![(0, 12.0), (1, 0.1 + 0.2)]);
        assert!(mse_csv(&records, true).ends_with(",3.5\n"));
        assert!(timing_csv(&records).contains("1,3.5,100"));
        let row = SummaryRow::from_records(0.6, "ekf_init", &records, "ok");
        assert_eq!(row.min_iteration, Some(1));
        assert_eq!(
            sweep_summary_csv("sigma", &[row]),
            "sigma,algorithm,final_mse,min_mse,min_iteration,status\n0.6,ekf_init,0.30000000000000004,0.30000000000000004,1,ok\n"
        );
    }
}
