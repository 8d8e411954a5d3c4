use super::fields::FieldSet;
use super::run::{CurvePoint, Snapshot};
use super::SolverError;
use crate::grid::Grid;
use std::io::{BufRead, Read, Write};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CFSNAP\0\0";
pub const SNAPSHOT_VERSION: u32 = 1;
const NAME_LEN: usize = 16;

/// Binary snapshot, all little endian:
///
/// ```text
/// magic "CFSNAP\0\0" | u32 version | u32 nx | u32 ny | u32 nfields
/// f64 applied strain | f64 homogenized stress
/// nfields × ( 16-byte NUL-padded name | nx·ny f64, row-major from j = 0 )
/// ```
pub fn write_snapshot(w: &mut impl Write, snap: &Snapshot) -> Result<(), SolverError> {
    let f = &snap.fields;
    w.write_all(SNAPSHOT_MAGIC)?;
    for v in [SNAPSHOT_VERSION, f.nx as u32, f.ny as u32, f.fields.len() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&snap.applied_strain.to_le_bytes())?;
    w.write_all(&snap.stress.to_le_bytes())?;
    for (name, grid) in &f.fields {
        let bytes = name.as_bytes();
        if bytes.len() > NAME_LEN {
            return Err(SolverError::Format(format!("field name {name} longer than {NAME_LEN} bytes")));
        }
        let mut padded = [0u8; NAME_LEN];
        padded[..bytes.len()].copy_from_slice(bytes);
        w.write_all(&padded)?;
        let mut buf = Vec::with_capacity(8 * grid.as_slice().len());
        for v in grid.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]. The curve index is not
/// stored and comes back as 0.
pub fn read_snapshot(r: &mut impl Read) -> Result<Snapshot, SolverError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(SolverError::Format("not a snapshot file".into()));
    }
    let mut u32s = [0u32; 4];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, nx, ny, nfields] = u32s.map(|v| v as usize);
    if version != SNAPSHOT_VERSION as usize {
        return Err(SolverError::Format(format!("unsupported snapshot version {version}")));
    }
    let read_f64 = |r: &mut dyn Read| -> Result<f64, SolverError> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let applied_strain = read_f64(r)?;
    let stress = read_f64(r)?;
    let mut fields = Vec::with_capacity(nfields);
    for _ in 0..nfields {
        let mut name = [0u8; NAME_LEN];
        r.read_exact(&mut name)?;
        let end = name.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
        let name = std::str::from_utf8(&name[..end])
            .map_err(|_| SolverError::Format("field name is not UTF-8".into()))?
            .to_string();
        let mut raw = vec![0u8; 8 * nx * ny];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        fields.push((name, Grid::from_vec(nx, ny, data)));
    }
    Ok(Snapshot {
        index: 0,
        applied_strain,
        stress,
        fields: FieldSet { nx, ny, fields },
    })
}

pub const CURVE_HEADER: &str = "# cfrp-curve v1";

pub fn write_curve(w: &mut impl Write, curve: &[CurvePoint]) -> Result<(), SolverError> {
    writeln!(w, "{CURVE_HEADER}")?;
    writeln!(w, "strain,stress")?;
    for p in curve {
        writeln!(w, "{:.10e},{:.10e}", p.strain, p.stress)?;
    }
    Ok(())
}

/// Reads `(strain, stress)` pairs. Lines starting with `#` and a
/// `strain,stress` header are skipped.
pub fn read_curve(r: impl BufRead) -> Result<Vec<(f64, f64)>, SolverError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t == "strain,stress" {
            continue;
        }
        let bad = || SolverError::Format(format!("line {}: expected strain,stress", n + 1));
        let (a, b) = t.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        if out.last().is_some_and(|&(prev, _)| a <= prev) {
            return Err(SolverError::Format(format!("line {}: strain must increase", n + 1)));
        }
        out.push((a, b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            index: 0,
            applied_strain: 0.0123,
            stress: 45.5,
            fields: FieldSet {
                nx: 3,
                ny: 2,
                fields: vec![
                    ("ux".into(), Grid::from_fn(3, 2, |i, j| i as f64 + 10.0 * j as f64)),
                    ("svm".into(), Grid::from_fn(3, 2, |i, _| if i == 1 { f64::NAN } else { 1.5 })),
                ],
            },
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let snap = sample();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &snap).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 16 + 2 * (16 + 6 * 8));
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back.applied_strain, snap.applied_strain);
        assert_eq!(back.fields.get("ux"), snap.fields.get("ux"));
        let svm = back.fields.get("svm").unwrap();
        assert!(svm.get(1, 0).is_nan() && *svm.get(2, 1) == 1.5);
    }

    #[test]
    fn snapshot_rejects_bad_magic_and_truncation() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(&mut bad.as_slice()), Err(SolverError::Format(_))));
        buf.truncate(buf.len() - 3);
        assert!(read_snapshot(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn curve_round_trip() {
        let curve = vec![
            CurvePoint { strain: 0.001, stress: 3.5, imbalance: 0.0 },
            CurvePoint { strain: 0.002, stress: 7.25, imbalance: 0.0 },
        ];
        let mut buf = Vec::new();
        write_curve(&mut buf, &curve).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# cfrp-curve v1\nstrain,stress\n"));
        let back = read_curve(buf.as_slice()).unwrap();
        assert_eq!(back, vec![(0.001, 3.5), (0.002, 7.25)]);
        assert!(read_curve("0.2,1\n0.1,2\n".as_bytes()).is_err());
    }
}
