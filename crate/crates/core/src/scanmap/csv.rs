//! Text formats for maps, raw scans and attack-point reports.
//!
//! Files start with `#` comment lines carrying `key=value` pairs, followed
//! by a column header row and one data row per cell in row-major order.
//! Floats are written in Rust's shortest round-trip form so a file read back
//! reproduces the in-memory map bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{AttackSearch, EfficiencyMap, GridSpec, RawScan};
use crate::error::{Error, Result};
use crate::model::Polarization;

const MAP_COLUMNS: &str = "phi_mrad,theta_mrad,eta_h,eta_v,eta_d,eta_a";
const RAW_COLUMNS: &str = "phi_mrad,theta_mrad,cnt_h,cnt_v,cnt_d,cnt_a";
const REPORT_COLUMNS: &str = "pol,phi_mrad,theta_mrad,eta_h,eta_v,eta_d,eta_a,delta";

fn write_comments<W: Write>(w: &mut W, header: &[String]) -> Result<()> {
    for line in header {
        for part in line.lines() {
            writeln!(w, "# {part}")?;
        }
    }
    Ok(())
}

fn write_grid_header<W: Write>(w: &mut W, g: &GridSpec) -> Result<()> {
    writeln!(
        w,
        "# phi_min_mrad={} phi_max_mrad={} theta_min_mrad={} theta_max_mrad={} n_phi={} n_theta={}",
        g.phi_min, g.phi_max, g.theta_min, g.theta_max, g.n_phi, g.n_theta
    )?;
    Ok(())
}

fn write_rows<W: Write>(w: &mut W, grid: &GridSpec, rows: &[[f64; 4]]) -> Result<()> {
    for (idx, v) in rows.iter().enumerate() {
        let (phi, theta) = grid.angles(idx);
        writeln!(w, "{},{},{},{},{},{}", phi, theta, v[0], v[1], v[2], v[3])?;
    }
    Ok(())
}

/// Writes an efficiency map. `header` lines are emitted as comments first.
pub fn write_map_csv<W: Write>(map: &EfficiencyMap, header: &[String], w: &mut W) -> Result<()> {
    write_comments(w, header)?;
    write_grid_header(w, map.grid())?;
    writeln!(w, "{MAP_COLUMNS}")?;
    write_rows(w, map.grid(), map.cells())
}

pub fn write_raw_csv<W: Write>(raw: &RawScan, header: &[String], w: &mut W) -> Result<()> {
    write_comments(w, header)?;
    write_grid_header(w, &raw.grid)?;
    let b = raw.background;
    writeln!(
        w,
        "# bg_h={} bg_v={} bg_d={} bg_a={} t_int_s={}",
        b[0], b[1], b[2], b[3], raw.t_int_s
    )?;
    writeln!(w, "{RAW_COLUMNS}")?;
    write_rows(w, &raw.grid, &raw.counts)
}

struct Parsed {
    meta: BTreeMap<String, (usize, String)>,
    rows: Vec<(usize, [f64; 6])>,
}

fn parse_table<R: BufRead>(r: R, columns: &str) -> Result<Parsed> {
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some((k, v)) = token.split_once('=') {
                    meta.insert(k.to_string(), (line_no, v.to_string()));
                }
            }
            continue;
        }
        if trimmed == columns {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0.0; 6];
        for (slot, f) in vals.iter_mut().zip(&fields) {
            *slot = f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: `{f}`"),
            })?;
        }
        rows.push((line_no, vals));
    }
    Ok(Parsed { meta, rows })
}

fn meta_value<T: std::str::FromStr>(p: &Parsed, key: &str) -> Result<T> {
    let (line, raw) = p.meta.get(key).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("missing header key `{key}`"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line: *line,
        message: format!("bad value for `{key}`: `{raw}`"),
    })
}

fn grid_from(p: &Parsed) -> Result<GridSpec> {
    let grid = GridSpec {
        phi_min: meta_value(p, "phi_min_mrad")?,
        phi_max: meta_value(p, "phi_max_mrad")?,
        theta_min: meta_value(p, "theta_min_mrad")?,
        theta_max: meta_value(p, "theta_max_mrad")?,
        n_phi: meta_value(p, "n_phi")?,
        n_theta: meta_value(p, "n_theta")?,
    };
    grid.validate()?;
    Ok(grid)
}

/// Checks row count and that each row sits on the expected grid node.
fn cell_values(p: &Parsed, grid: &GridSpec) -> Result<Vec<[f64; 4]>> {
    let tol = 1e-9 * (grid.phi_max - grid.phi_min).abs().max(grid.theta_max - grid.theta_min).max(1.0);
    for (idx, (line, row)) in p.rows.iter().enumerate() {
        if idx >= grid.len() {
            return Err(Error::Parse {
                line: *line,
                message: format!("more rows than the {} grid cells", grid.len()),
            });
        }
        let (phi, theta) = grid.angles(idx);
        if (row[0] - phi).abs() > tol || (row[1] - theta).abs() > tol {
            return Err(Error::Parse {
                line: *line,
                message: format!(
                    "cell {idx} expected at ({phi}, {theta}), found ({}, {})",
                    row[0], row[1]
                ),
            });
        }
    }
    if p.rows.len() != grid.len() {
        let line = p.rows.last().map_or(1, |(l, _)| *l);
        return Err(Error::Parse {
            line,
            message: format!("expected {} rows, found {}", grid.len(), p.rows.len()),
        });
    }
    Ok(p.rows.iter().map(|(_, r)| [r[2], r[3], r[4], r[5]]).collect())
}

pub fn read_map_csv<R: BufRead>(r: R) -> Result<EfficiencyMap> {
    let parsed = parse_table(r, MAP_COLUMNS)?;
    let grid = grid_from(&parsed)?;
    let cells = cell_values(&parsed, &grid)?;
    for (line, row) in &parsed.rows {
        if let Some(v) = row[2..].iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parse {
                line: *line,
                message: format!("efficiency {v} outside [0, 1]"),
            });
        }
    }
    EfficiencyMap::new(grid, cells)
}

pub fn read_raw_csv<R: BufRead>(r: R) -> Result<RawScan> {
    let parsed = parse_table(r, RAW_COLUMNS)?;
    let grid = grid_from(&parsed)?;
    let counts = cell_values(&parsed, &grid)?;
    Ok(RawScan {
        grid,
        counts,
        background: [
            meta_value(&parsed, "bg_h")?,
            meta_value(&parsed, "bg_v")?,
            meta_value(&parsed, "bg_d")?,
            meta_value(&parsed, "bg_a")?,
        ],
        t_int_s: meta_value(&parsed, "t_int_s").unwrap_or(1.0),
    })
}

/// Writes every qualifying cell; the best point per polarization is listed
/// in the comment header.
pub fn write_attack_report<W: Write>(search: &AttackSearch, header: &[String], w: &mut W) -> Result<()> {
    write_comments(w, header)?;
    for pol in Polarization::ALL {
        match search.best_for(pol) {
            Some(b) => writeln!(
                w,
                "# best_{pol}: phi_mrad={} theta_mrad={} eta={} delta={} qualifying={}",
                b.phi_mrad,
                b.theta_mrad,
                b.eff.get(pol),
                b.delta,
                search.candidates[pol.index()].len()
            )?,
            None => writeln!(w, "# best_{pol}: none")?,
        }
    }
    writeln!(w, "{REPORT_COLUMNS}")?;
    for list in &search.candidates {
        for p in list {
            let e = p.eff.as_array();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.polarization, p.phi_mrad, p.theta_mrad, e[0], e[1], e[2], e[3], p.delta
            )?;
        }
    }
    Ok(())
}
