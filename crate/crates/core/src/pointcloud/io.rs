// CSV persistence for point clouds.
//
//   # intrinsic_dim=2
//   x1,x2,volume_weight,boundary_flag,area_weight
//   0.0000000000000000e0,0.0000000000000000e0,1.9634954084936207e-3,0,
//
// Reals are written with 17 significant digits, which round-trips f64.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::PointCloud;
use crate::error::{PimError, Result};

/// Formats a real with 17 significant digits.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cloud(cloud, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_cloud(File::open(path)?)
}

pub fn write_cloud<W: Write>(cloud: &PointCloud, w: &mut W) -> Result<()> {
    let d = cloud.dim();
    writeln!(w, "# intrinsic_dim={}", cloud.intrinsic_dim())?;
    let header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},volume_weight,boundary_flag,area_weight", header.join(","))?;
    for (i, p) in cloud.points().enumerate() {
        let coords: Vec<String> = p.iter().map(|&v| fmt_real(v)).collect();
        let v = fmt_real(cloud.volume_weights()[i]);
        match cloud.boundary_slot(i) {
            Some(l) => writeln!(
                w,
                "{},{v},1,{}",
                coords.join(","),
                fmt_real(cloud.area_weights()[l])
            )?,
            None => writeln!(w, "{},{v},0,", coords.join(","))?,
        }
    }
    Ok(())
}

fn parse_real(field: &str, line: usize, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| PimError::Parse {
        line,
        msg: format!("cannot parse {what} '{field}'"),
    })
}

pub(crate) fn csv_error(err: csv::Error) -> PimError {
    let line = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => PimError::Io(e),
        other => PimError::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

/// Scans the leading comment block for `# intrinsic_dim=k`. Returns the
/// value and the line number of the first non-comment line.
fn leading_metadata(text: &str) -> Result<(Option<usize>, usize)> {
    let mut intrinsic_dim = None;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(comment) = trimmed.strip_prefix('#') else {
            return Ok((intrinsic_dim, idx + 1));
        };
        if let Some(value) = comment.trim().strip_prefix("intrinsic_dim=") {
            let k = value.trim().parse::<usize>().map_err(|_| PimError::Parse {
                line: idx + 1,
                msg: format!("bad intrinsic_dim '{}'", value.trim()),
            })?;
            intrinsic_dim = Some(k);
        }
    }
    Ok((intrinsic_dim, 0))
}

pub fn read_cloud<R: Read>(mut reader: R) -> Result<PointCloud> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let (intrinsic_dim, header_line) = leading_metadata(&text)?;
    if header_line == 0 {
        return Err(PimError::Parse {
            line: 0,
            msg: "empty point-cloud file".into(),
        });
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_error)?.clone();
    let n = header.len();
    let expected_tail = ["volume_weight", "boundary_flag", "area_weight"];
    if n < 4 || header.iter().skip(n - 3).ne(expected_tail) {
        return Err(PimError::Parse {
            line: header_line,
            msg: "expected header x1,...,xd,volume_weight,boundary_flag,area_weight".into(),
        });
    }
    let Some(k) = intrinsic_dim else {
        return Err(PimError::Parse {
            line: header_line,
            msg: "missing '# intrinsic_dim=k' line before header".into(),
        });
    };
    let d = n - 3;

    let mut coords = Vec::new();
    let mut volume = Vec::new();
    let mut boundary = Vec::new();
    let mut area = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let lineno = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d + 3 {
            return Err(PimError::Parse {
                line: lineno,
                msg: format!("expected {} fields, found {}", d + 3, record.len()),
            });
        }
        for f in record.iter().take(d) {
            coords.push(parse_real(f, lineno, "coordinate")?);
        }
        let v = parse_real(&record[d], lineno, "volume weight")?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(PimError::NonPositiveWeight {
                line: lineno,
                which: "volume",
                value: v,
            });
        }
        volume.push(v);
        match &record[d + 1] {
            "0" => {}
            "1" => {
                let a_field = &record[d + 2];
                if a_field.is_empty() {
                    return Err(PimError::MissingAreaWeight { line: lineno });
                }
                let a = parse_real(a_field, lineno, "area weight")?;
                if !(a > 0.0 && a.is_finite()) {
                    return Err(PimError::NonPositiveWeight {
                        line: lineno,
                        which: "area",
                        value: a,
                    });
                }
                boundary.push(volume.len() - 1);
                area.push(a);
            }
            other => {
                return Err(PimError::Parse {
                    line: lineno,
                    msg: format!("boundary_flag must be 0 or 1, found '{other}'"),
                })
            }
        }
    }

    if k == 0 || k > d {
        return Err(PimError::InvalidCloud(format!(
            "intrinsic dimension {k} exceeds ambient dimension {d}"
        )));
    }
    PointCloud::new(d, k, coords, boundary, volume, area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{generate, ManifoldSpec};

    fn roundtrip(c: &PointCloud) -> PointCloud {
        let mut buf = Vec::new();
        write_cloud(c, &mut buf).unwrap();
        read_cloud(&buf[..]).unwrap()
    }

    #[test]
    fn interval_roundtrip_is_bit_exact() {
        let c = generate(&ManifoldSpec::interval(0.0, 1.0, 37).with_jitter(0.4, 3)).unwrap();
        let back = roundtrip(&c);
        assert_eq!(back.coords(), c.coords());
        assert_eq!(back.volume_weights(), c.volume_weights());
        assert_eq!(back.boundary_indices(), c.boundary_indices());
        assert_eq!(back.area_weights(), c.area_weights());
    }

    #[test]
    fn hemisphere_keeps_intrinsic_dim() {
        let c = generate(&ManifoldSpec::spherical_cap(0.0, 300)).unwrap();
        let back = roundtrip(&c);
        assert_eq!(back.dim(), 3);
        assert_eq!(back.intrinsic_dim(), 2);
        assert_eq!(back.coords(), c.coords());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        let c = generate(&ManifoldSpec::unit_disk(200)).unwrap();
        save(&c, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.coords(), c.coords());
        assert_eq!(back.area_weights(), c.area_weights());
    }

    #[test]
    fn rejects_zero_volume_weight() {
        let text = "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\n0.0,0.5,1,1\n0.5,0,0,\n";
        assert!(matches!(
            read_cloud(text.as_bytes()),
            Err(PimError::NonPositiveWeight { line: 4, .. })
        ));
    }

    #[test]
    fn rejects_missing_area_weight() {
        let text = "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\n0.0,0.5,1,\n";
        assert!(matches!(
            read_cloud(text.as_bytes()),
            Err(PimError::MissingAreaWeight { line: 3 })
        ));
    }

    #[test]
    fn rejects_malformed_rows() {
        let short = "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\n0.0,0.5\n";
        assert!(matches!(read_cloud(short.as_bytes()), Err(PimError::Parse { line: 3, .. })));
        let junk = "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\nabc,0.5,0,\n";
        assert!(matches!(read_cloud(junk.as_bytes()), Err(PimError::Parse { .. })));
        let flag = "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\n0.1,0.5,2,\n";
        assert!(matches!(read_cloud(flag.as_bytes()), Err(PimError::Parse { .. })));
        let no_k = "x1,volume_weight,boundary_flag,area_weight\n0.1,0.5,0,\n";
        assert!(read_cloud(no_k.as_bytes()).is_err());
    }

    #[test]
    fn rejects_intrinsic_dim_above_ambient() {
        let text = "# intrinsic_dim=3\nx1,x2,volume_weight,boundary_flag,area_weight\n0,0,1,0,\n";
        assert!(matches!(read_cloud(text.as_bytes()), Err(PimError::InvalidCloud(_))));
    }

    #[test]
    fn area_weight_ignored_for_interior_rows() {
        let text = "# intrinsic_dim=1\nx1,volume_weight,boundary_flag,area_weight\n0.0,0.5,0,7\n1.0,0.5,1,1\n";
        let c = read_cloud(text.as_bytes()).unwrap();
        assert_eq!(c.boundary_indices(), &[1]);
        assert_eq!(c.area_weights(), &[1.0]);
    }
}
