//! Tangent point table and run summaries.

use std::io::{BufRead, Write};

use pws::tangency::make_label;
use pws::{TangentPointRecord, Visibility};

pub const TANGENT_POINTS_SCHEMA: &str = "# schema: tangent_points v1";
const TANGENT_POINTS_HEADER: &str = "x0,m_plus,m_minus,vis_plus,vis_minus,label";

fn vis_cell(v: Option<Visibility>) -> String {
    v.map(|v| v.letter().to_string()).unwrap_or_else(|| "-".to_string())
}

pub fn write_tangent_points_csv<W: Write>(records: &[TangentPointRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TANGENT_POINTS_SCHEMA}")?;
    writeln!(w, "{TANGENT_POINTS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{:e},{},{},{},{},{}",
            r.x0,
            r.m_plus,
            r.m_minus,
            vis_cell(r.vis_plus),
            vis_cell(r.vis_minus),
            make_label(r.vis_plus, r.vis_minus)
        )?;
    }
    Ok(())
}

pub fn read_tangent_points_csv<R: BufRead>(r: R) -> Result<Vec<TangentPointRecord>, String> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == TANGENT_POINTS_HEADER {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 6 {
            return Err(format!("line {}: expected 6 columns, got {}", n + 1, c.len()));
        }
        let x0 = c[0].parse::<f64>().map_err(|_| format!("line {}: bad number `{}`", n + 1, c[0]))?;
        let u = |s: &str| s.parse::<usize>().map_err(|_| format!("line {}: bad integer `{s}`", n + 1));
        let v = |s: &str| -> Result<Option<Visibility>, String> {
            match s {
                "-" => Ok(None),
                _ => {
                    let mut cs = s.chars();
                    match (cs.next().and_then(Visibility::from_letter), cs.next()) {
                        (Some(v), None) => Ok(Some(v)),
                        _ => Err(format!("line {}: bad visibility `{s}`", n + 1)),
                    }
                }
            }
        };
        let rec = TangentPointRecord::new(x0, u(c[1])?, u(c[2])?, v(c[3])?, v(c[4])?);
        if rec.label != c[5] {
            return Err(format!("line {}: label `{}` does not match `{}`", n + 1, c[5], rec.label));
        }
        out.push(rec);
    }
    Ok(out)
}

/// `key=value` lines, one per entry.
pub fn write_summary<W: Write>(entries: &[(String, String)], mut w: W) -> std::io::Result<()> {
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_points_round_trip() {
        let recs = vec![
            TangentPointRecord::new(-0.125, 1, 0, Some(Visibility::V), None),
            TangentPointRecord::new(1.0 / 3.0, 2, 3, Some(Visibility::L), Some(Visibility::I)),
        ];
        let mut buf = Vec::new();
        write_tangent_points_csv(&recs, &mut buf).unwrap();
        let back = read_tangent_points_csv(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn wrong_column_count() {
        assert!(read_tangent_points_csv("0.1,1,0\n".as_bytes()).unwrap_err().contains("line 1"));
    }
}
