//! Self-describing binary container for impedance matrices.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8  b"ZBUNDLE1"
//! version u32
//! m, l, n_ris, n_e   u32 each
//! wavelength         f64
//! section_count      u32
//! section := name_len u16, name bytes (utf-8),
//!            rows u32, cols u32,
//!            rows*cols complex entries, row-major, (re f64, im f64)
//! ```
//!
//! Cross blocks are stored one way; redundant transpose sections (`Z_TR`,
//! `Z_SR`, `Z_TS`, `Z_OR`, `Z_TO`) are accepted and validated against their
//! primaries, so externally produced bundles that carry both orientations are
//! checked for reciprocity instead of silently trusted. Diagonal terminations
//! may be stored as `n x 1` columns (the writer's choice) or as full `n x n`
//! matrices with exact zeros off the diagonal.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;

use super::{ImpedanceSet, RECIPROCITY_TOL};
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"ZBUNDLE1";
const VERSION: u32 = 1;

const PRIMARY_SECTIONS: [&str; 14] = [
    "Z_TT", "Z_RR", "Z_SS", "Z_OO", "Z_RT", "Z_RO", "Z_RS", "Z_SO", "Z_ST", "Z_OT", "Z_OS",
    "Z_G", "Z_L", "Z_US",
];

/// `(section, primary, swap)`: section(i,j) must equal primary(j,i).
const TRANSPOSE_SECTIONS: [(&str, &str); 5] = [
    ("Z_TR", "Z_RT"),
    ("Z_OR", "Z_RO"),
    ("Z_SR", "Z_RS"),
    ("Z_TS", "Z_ST"),
    ("Z_TO", "Z_OT"),
];

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

fn push_section(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, data: &[Complex64]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for z in data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

fn matrix_rows(mat: &CMatrix) -> Vec<Complex64> {
    let mut data = Vec::with_capacity(mat.nrows() * mat.ncols());
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            data.push(mat[(i, j)]);
        }
    }
    data
}

/// Serialize an impedance set into the bundle format.
pub fn save_impedance_set(set: &ImpedanceSet) -> Vec<u8> {
    let (m, l, n, ne) = set.dims();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [m, l, n, ne] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&set.wavelength.to_le_bytes());
    out.extend_from_slice(&(PRIMARY_SECTIONS.len() as u32).to_le_bytes());

    let mats: [(&str, &CMatrix); 11] = [
        ("Z_TT", &set.z_tt),
        ("Z_RR", &set.z_rr),
        ("Z_SS", &set.z_ss),
        ("Z_OO", &set.z_oo),
        ("Z_RT", &set.z_rt),
        ("Z_RO", &set.z_ro),
        ("Z_RS", &set.z_rs),
        ("Z_SO", &set.z_so),
        ("Z_ST", &set.z_st),
        ("Z_OT", &set.z_ot),
        ("Z_OS", &set.z_os),
    ];
    for (name, mat) in mats {
        push_section(&mut out, name, mat.nrows(), mat.ncols(), &matrix_rows(mat));
    }
    for (name, vec) in [("Z_G", &set.z_g), ("Z_L", &set.z_l), ("Z_US", &set.z_us)] {
        push_section(&mut out, name, vec.len(), 1, vec.as_slice());
    }
    out
}

pub fn write_impedance_set(set: &ImpedanceSet, path: &Path) -> Result<()> {
    std::fs::write(path, save_impedance_set(set)).map_err(Error::io(path))
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Bundle {
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(self.err(format!(
                "unexpected end of stream (wanted {n} bytes, {} left)",
                self.data.len() - self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn diag_from(name: &str, mat: &CMatrix, expected: usize, offset: u64) -> Result<CVector> {
    if mat.ncols() == 1 {
        if mat.nrows() != expected {
            return Err(Error::Dimension {
                what: format!("termination {name}"),
                expected: expected.to_string(),
                got: mat.nrows().to_string(),
            });
        }
        return Ok(CVector::from_column_slice(mat.as_slice()));
    }
    if mat.nrows() != expected || mat.ncols() != expected {
        return Err(Error::Dimension {
            what: format!("termination {name}"),
            expected: format!("{expected}x{expected} or {expected}x1"),
            got: format!("{}x{}", mat.nrows(), mat.ncols()),
        });
    }
    for i in 0..expected {
        for j in 0..expected {
            if i != j && mat[(i, j)] != Complex64::new(0.0, 0.0) {
                return Err(Error::Bundle {
                    offset,
                    msg: format!("{name} must be strictly diagonal, found nonzero at ({i},{j})"),
                });
            }
        }
    }
    Ok(mat.diagonal())
}

/// Parse a bundle byte stream into a validated [`ImpedanceSet`].
pub fn load_impedance_set(bytes: &[u8]) -> Result<ImpedanceSet> {
    let mut r = Reader {
        data: bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(Error::Bundle {
            offset: 0,
            msg: "bad magic, not a ZBUNDLE1 stream".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported bundle version {version}")));
    }
    let m = r.u32()? as usize;
    let l = r.u32()? as usize;
    let n = r.u32()? as usize;
    let ne = r.u32()? as usize;
    let wavelength = r.f64()?;
    if !(wavelength > 0.0) {
        return Err(r.err("wavelength must be positive"));
    }
    let section_count = r.u32()? as usize;

    let mut sections: HashMap<String, (CMatrix, u64)> = HashMap::new();
    for _ in 0..section_count {
        let start = r.pos as u64;
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Bundle {
                offset: start,
                msg: "section name is not valid utf-8".into(),
            })?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let known = PRIMARY_SECTIONS.contains(&name.as_str())
            || TRANSPOSE_SECTIONS.iter().any(|(t, _)| *t == name);
        if !known {
            return Err(Error::Bundle {
                offset: start,
                msg: format!("unknown section {name:?}"),
            });
        }
        let mut mat = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let re = r.f64()?;
                let im = r.f64()?;
                mat[(i, j)] = Complex64::new(re, im);
            }
        }
        if sections.insert(name.clone(), (mat, start)).is_some() {
            return Err(Error::Bundle {
                offset: start,
                msg: format!("duplicate section {name:?}"),
            });
        }
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let mut get = |name: &str| -> Result<(CMatrix, u64)> {
        sections.remove(name).ok_or(Error::Bundle {
            offset: bytes.len() as u64,
            msg: format!("missing required section {name:?}"),
        })
    };

    let (z_tt, _) = get("Z_TT")?;
    let (z_rr, _) = get("Z_RR")?;
    let (z_ss, _) = get("Z_SS")?;
    let (z_oo, _) = get("Z_OO")?;
    let (z_rt, _) = get("Z_RT")?;
    let (z_ro, _) = get("Z_RO")?;
    let (z_rs, _) = get("Z_RS")?;
    let (z_so, _) = get("Z_SO")?;
    let (z_st, _) = get("Z_ST")?;
    let (z_ot, _) = get("Z_OT")?;
    let (z_os, _) = get("Z_OS")?;
    let (g_mat, g_off) = get("Z_G")?;
    let (l_mat, l_off) = get("Z_L")?;
    let (us_mat, us_off) = get("Z_US")?;

    let set = ImpedanceSet {
        wavelength,
        z_tt,
        z_rr,
        z_ss,
        z_oo,
        z_rt,
        z_ro,
        z_rs,
        z_so,
        z_st,
        z_ot,
        z_os,
        z_g: diag_from("Z_G", &g_mat, m, g_off)?,
        z_l: diag_from("Z_L", &l_mat, l, l_off)?,
        z_us: diag_from("Z_US", &us_mat, ne, us_off)?,
    };
    let dims = set.dims();
    if dims != (m, l, n, ne) {
        return Err(Error::Dimension {
            what: "bundle blocks vs header".into(),
            expected: format!("{m}x{l}x{n}x{ne}"),
            got: format!("{}x{}x{}x{}", dims.0, dims.1, dims.2, dims.3),
        });
    }

    // Redundant transpose sections are cross-checked, then dropped.
    for (name, primary) in TRANSPOSE_SECTIONS {
        if let Some((mat, _)) = sections.remove(name) {
            let prim = match primary {
                "Z_RT" => &set.z_rt,
                "Z_RO" => &set.z_ro,
                "Z_RS" => &set.z_rs,
                "Z_ST" => &set.z_st,
                "Z_OT" => &set.z_ot,
                _ => unreachable!(),
            };
            check_transposed(name, primary, &mat, prim)?;
        }
    }

    set.validate()?;
    Ok(set)
}

pub fn read_impedance_set(path: &Path) -> Result<ImpedanceSet> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    load_impedance_set(&bytes)
}

fn check_transposed(name: &str, primary: &str, mat: &CMatrix, prim: &CMatrix) -> Result<()> {
    if mat.nrows() != prim.ncols() || mat.ncols() != prim.nrows() {
        return Err(Error::Dimension {
            what: format!("section {name}"),
            expected: format!("{}x{}", prim.ncols(), prim.nrows()),
            got: format!("{}x{}", mat.nrows(), mat.ncols()),
        });
    }
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            let x = mat[(i, j)];
            let y = prim[(j, i)];
            let scale = x.norm().max(y.norm());
            let rel = if scale == 0.0 {
                0.0
            } else {
                (x - y).norm() / scale
            };
            if rel > RECIPROCITY_TOL {
                return Err(Error::Reciprocity {
                    a: name.trim_start_matches("Z_").to_string(),
                    b: primary.trim_start_matches("Z_").to_string(),
                    i,
                    j,
                    rel,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_set(m: usize, l: usize, n: usize, ne: usize) -> ImpedanceSet {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + (m + 10 * l + 100 * n + 1000 * ne) as u64);
        synth::random_impedance_set(&mut rng, m, l, n, ne)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = sample_set(2, 1, 3, 2);
        let bytes = save_impedance_set(&set);
        let loaded = load_impedance_set(&bytes).unwrap();
        assert_eq!(set, loaded);
    }

    #[test]
    fn empty_scatterer_sections_round_trip() {
        let set = sample_set(2, 1, 3, 0);
        let loaded = load_impedance_set(&save_impedance_set(&set)).unwrap();
        assert_eq!(loaded.dims(), (2, 1, 3, 0));
        assert_eq!(loaded.z_oo.nrows(), 0);
    }

    #[test]
    fn transpose_mismatch_names_the_pair() {
        let set = sample_set(2, 2, 2, 0);
        let mut bytes = save_impedance_set(&set);
        // Append a Z_TR section that disagrees with Z_RT by 10% in one entry.
        let mut z_tr = set.z_rt.transpose();
        z_tr[(1, 0)] *= 1.1;
        let mut extra = Vec::new();
        push_section(
            &mut extra,
            "Z_TR",
            z_tr.nrows(),
            z_tr.ncols(),
            &matrix_rows(&z_tr),
        );
        bytes.extend_from_slice(&extra);
        // Patch the section count.
        let count_off = 8 + 4 + 16 + 8;
        let count = u32::from_le_bytes(bytes[count_off..count_off + 4].try_into().unwrap()) + 1;
        bytes[count_off..count_off + 4].copy_from_slice(&count.to_le_bytes());

        match load_impedance_set(&bytes) {
            Err(Error::Reciprocity { a, b, i, j, .. }) => {
                assert_eq!((a.as_str(), b.as_str()), ("TR", "RT"));
                assert_eq!((i, j), (1, 0));
            }
            other => panic!("expected reciprocity rejection, got {other:?}"),
        }
    }

    #[test]
    fn truncation_reports_byte_offset() {
        let set = sample_set(1, 1, 2, 0);
        let bytes = save_impedance_set(&set);
        let err = load_impedance_set(&bytes[..bytes.len() - 5]).unwrap_err();
        match err {
            Error::Bundle { offset, .. } => assert!(offset > 0),
            other => panic!("expected bundle error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_section_is_rejected() {
        let set = sample_set(1, 1, 1, 0);
        let mut bytes = save_impedance_set(&set);
        push_section(&mut bytes, "Z_XX", 0, 0, &[]);
        let count_off = 8 + 4 + 16 + 8;
        let count = u32::from_le_bytes(bytes[count_off..count_off + 4].try_into().unwrap()) + 1;
        bytes[count_off..count_off + 4].copy_from_slice(&count.to_le_bytes());
        let err = load_impedance_set(&bytes).unwrap_err();
        assert!(matches!(err, Error::Bundle { .. }), "{err:?}");
    }

    #[test]
    fn off_diagonal_termination_is_rejected() {
        let set = sample_set(2, 1, 1, 0);
        let bytes = save_impedance_set(&set);
        let loaded = load_impedance_set(&bytes).unwrap();
        assert_eq!(loaded.z_g.len(), 2);

        // Re-encode Z_G as a full 2x2 with an off-diagonal entry.
        let mut bad = Vec::new();
        bad.extend_from_slice(&bytes[..bytes.len() - section_len(2, 1) * 2 - section_len(1, 1)]);
        let full = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(50.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(50.0, 0.0),
            ],
        );
        push_section(&mut bad, "Z_G", 2, 2, &matrix_rows(&full));
        push_section(&mut bad, "Z_L", 1, 1, set.z_l.as_slice());
        push_section(&mut bad, "Z_US", 0, 1, &[]);
        let err = load_impedance_set(&bad).unwrap_err();
        match err {
            Error::Bundle { msg, .. } => assert!(msg.contains("strictly diagonal")),
            other => panic!("expected diagonality rejection, got {other:?}"),
        }
    }

    fn section_len(rows: usize, cols: usize) -> usize {
        2 + 3 + 4 + 4 + rows * cols * 16 // name_len + "Z_G" + rows + cols + data
    }
}
