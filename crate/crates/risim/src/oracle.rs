//! Brute-force and dense-algebra reference implementations.
//!
//! Everything in this module is deliberately simple and slow: explicit
//! Gauss-Jordan inverses, scalar Gaussian elimination, Laplace-expansion
//! determinants, uniform grids. None of it shares numerical kernels with the
//! main path (which lives on `nalgebra` factorizations), so agreement between
//! the two is evidence of correctness rather than a tautology. Sizes are
//! capped to keep the cross-check corpus fast.

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::optimizer::DetCoefficients;
use crate::{Error, ImpedanceSet, Result};

/// Largest receiver count accepted by the naive determinant routines.
pub const MAX_ORACLE_L: usize = 6;

/// Outcome of one oracle cross-check sweep.
#[derive(Debug, Clone)]
pub struct OracleReport {
    /// Worst observed error across the corpus (semantics documented per check).
    pub max_relative_error: f64,
    /// Identifier of the worst-case instance, for reproduction.
    pub worst_case_id: String,
    /// Number of instances checked.
    pub samples: usize,
}

impl OracleReport {
    pub fn new() -> Self {
        OracleReport {
            max_relative_error: 0.0,
            worst_case_id: String::from("none"),
            samples: 0,
        }
    }

    /// Record one sample, keeping the worst case.
    pub fn record(&mut self, err: f64, id: impl FnOnce() -> String) {
        self.samples += 1;
        if err > self.max_relative_error || self.samples == 1 {
            self.max_relative_error = err.max(self.max_relative_error);
            if err >= self.max_relative_error {
                self.worst_case_id = id();
            }
        }
    }
}

impl Default for OracleReport {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Hand-rolled dense complex matrices
// ---------------------------------------------------------------------------

/// Row-major dense complex matrix with naive O(n^3) everything.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_dmatrix(m: &CMatrix) -> Self {
        let mut out = DenseMat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    pub fn from_diag(entries: &[Complex64]) -> Self {
        let mut out = DenseMat::zeros(entries.len(), entries.len());
        for (i, z) in entries.iter().enumerate() {
            out.set(i, i, *z);
        }
        out
    }

    pub fn to_dmatrix(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, rhs: &DenseMat) -> DenseMat {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in oracle multiply");
        let mut out = DenseMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.cols {
                    acc += self.get(i, k) * rhs.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, rhs: &DenseMat) -> DenseMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, rhs: &DenseMat) -> DenseMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        out
    }

    pub fn neg(&self) -> DenseMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = -*a;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> DenseMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn transpose(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn adjoint(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<DenseMat> {
        assert_eq!(self.rows, self.cols, "oracle inverse needs a square matrix");
        let n = self.rows;
        if n == 0 {
            return Ok(DenseMat::zeros(0, 0));
        }
        let mut aug = DenseMat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, Complex64::new(1.0, 0.0));
        }
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = aug.get(col, col).norm_sqr();
            for row in (col + 1)..n {
                let mag = aug.get(row, col).norm_sqr();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = row;
                }
            }
            if pivot_mag < 1e-280 {
                return Err(Error::IllConditioned {
                    name: "oracle Gauss-Jordan pivot".into(),
                    cond: f64::INFINITY,
                });
            }
            if pivot_row != col {
                for j in 0..2 * n {
                    let tmp = aug.get(col, j);
                    aug.set(col, j, aug.get(pivot_row, j));
                    aug.set(pivot_row, j, tmp);
                }
            }
            let inv_pivot = aug.get(col, col).inv();
            for j in 0..2 * n {
                let v = aug.get(col, j) * inv_pivot;
                aug.set(col, j, v);
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = aug.get(row, col);
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..2 * n {
                    let v = aug.get(row, j) - factor * aug.get(col, j);
                    aug.set(row, j, v);
                }
            }
        }
        let mut out = DenseMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, aug.get(i, n + j));
            }
        }
        Ok(out)
    }

    /// Determinant by Laplace expansion along the first row; capped at 8x8.
    pub fn determinant(&self) -> Result<Complex64> {
        assert_eq!(self.rows, self.cols);
        if self.rows > 8 {
            return Err(Error::Unsupported(format!(
                "oracle determinant capped at 8x8, got {}",
                self.rows
            )));
        }
        Ok(laplace_det(self))
    }
}

fn laplace_det(m: &DenseMat) -> Complex64 {
    let n = m.rows();
    match n {
        0 => Complex64::new(1.0, 0.0),
        1 => m.get(0, 0),
        2 => m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0),
        _ => {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut sign = 1.0;
            for j in 0..n {
                let mut minor = DenseMat::zeros(n - 1, n - 1);
                for i in 1..n {
                    let mut cc = 0;
                    for c in 0..n {
                        if c == j {
                            continue;
                        }
                        minor.set(i - 1, cc, m.get(i, c));
                        cc += 1;
                    }
                }
                acc += m.get(0, j) * laplace_det(&minor) * sign;
                sign = -sign;
            }
            acc
        }
    }
}

pub fn rel_frobenius(a: &DenseMat, b: &DenseMat) -> f64 {
    let diff = a.sub(b).frobenius();
    let den = b.frobenius();
    if den == 0.0 {
        diff
    } else {
        diff / den
    }
}

// ---------------------------------------------------------------------------
// Reference channel evaluation
// ---------------------------------------------------------------------------

/// Reduced blocks obtained by a straight-line transcription with explicit
/// inverses (no solves, no factored paths).
pub struct OracleReducedNetwork {
    pub z_rot: DenseMat,
    pub z_ros: DenseMat,
    pub z_sos: DenseMat,
    pub z_sot: DenseMat,
    pub z_rl: DenseMat,
    pub z_tg: DenseMat,
}

/// Eliminate the obstacle rows/columns of the full multiport matrix by
/// scalar Gaussian elimination, one pivot at a time, and read the reduced
/// blocks off the remaining system.
pub fn dense_reduced_blocks(z: &ImpedanceSet) -> Result<OracleReducedNetwork> {
    let (m, l, n, ne) = z.dims();
    let total = m + l + n + ne;
    let t0 = 0;
    let r0 = m;
    let s0 = m + l;
    let o0 = m + l + n;

    // Full multiport matrix over ports [T R S O], transposed blocks filled by
    // reciprocity, scatterer loads added on the O diagonal.
    let mut full = DenseMat::zeros(total, total);
    let place = |full: &mut DenseMat, mat: &CMatrix, ri: usize, ci: usize| {
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                full.set(ri + i, ci + j, mat[(i, j)]);
            }
        }
    };
    let place_t = |full: &mut DenseMat, mat: &CMatrix, ri: usize, ci: usize| {
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                full.set(ri + j, ci + i, mat[(i, j)]);
            }
        }
    };
    place(&mut full, &z.z_tt, t0, t0);
    place(&mut full, &z.z_rr, r0, r0);
    place(&mut full, &z.z_ss, s0, s0);
    place(&mut full, &z.z_oo, o0, o0);
    place(&mut full, &z.z_rt, r0, t0);
    place_t(&mut full, &z.z_rt, t0, r0);
    place(&mut full, &z.z_rs, r0, s0);
    place_t(&mut full, &z.z_rs, s0, r0);
    place(&mut full, &z.z_ro, r0, o0);
    place_t(&mut full, &z.z_ro, o0, r0);
    place(&mut full, &z.z_st, s0, t0);
    place_t(&mut full, &z.z_st, t0, s0);
    place(&mut full, &z.z_so, s0, o0);
    place(&mut full, &z.z_os, o0, s0);
    place(&mut full, &z.z_ot, o0, t0);
    place_t(&mut full, &z.z_ot, t0, o0);
    for i in 0..ne {
        let v = full.get(o0 + i, o0 + i) + z.z_us[i];
        full.set(o0 + i, o0 + i, v);
    }

    // Gaussian elimination of every O pivot, applied to all remaining rows.
    for p in o0..total {
        let pivot = full.get(p, p);
        if pivot.norm_sqr() < 1e-280 {
            return Err(Error::IllConditioned {
                name: "oracle obstacle pivot".into(),
                cond: f64::INFINITY,
            });
        }
        for i in 0..total {
            if i == p {
                continue;
            }
            let factor = full.get(i, p) / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..total {
                if j == p {
                    continue;
                }
                let v = full.get(i, j) - factor * full.get(p, j);
                full.set(i, j, v);
            }
            full.set(i, p, Complex64::new(0.0, 0.0));
        }
    }

    let block = |full: &DenseMat, ri: usize, rn: usize, ci: usize, cn: usize| {
        let mut out = DenseMat::zeros(rn, cn);
        for i in 0..rn {
            for j in 0..cn {
                out.set(i, j, full.get(ri + i, ci + j));
            }
        }
        out
    };
    let red_rt = block(&full, r0, l, t0, m);
    let red_rs = block(&full, r0, l, s0, n);
    let red_ss = block(&full, s0, n, s0, n);
    let red_st = block(&full, s0, n, t0, m);

    let z_rot = red_rt;
    let z_ros = red_rs.neg();
    let z_sos = red_ss.sub(&DenseMat::from_dmatrix(&z.z_ss));
    let z_sot = red_st.neg();

    let z_l_inv: Vec<Complex64> = z.z_l.iter().map(|v| v.inv()).collect();
    let rl_arg = DenseMat::identity(l).add(
        &DenseMat::from_dmatrix(&z.z_rr).mul(&DenseMat::from_diag(&z_l_inv)),
    );
    let z_rl = rl_arg.inverse()?;
    let zg: Vec<Complex64> = z.z_g.iter().cloned().collect();
    let tg_arg = DenseMat::from_dmatrix(&z.z_tt).add(&DenseMat::from_diag(&zg));
    let z_tg = tg_arg.inverse()?;

    Ok(OracleReducedNetwork {
        z_rot,
        z_ros,
        z_sos,
        z_sot,
        z_rl,
        z_tg,
    })
}

/// End-to-end channel by direct transcription with explicit inverses:
/// obstacle elimination through `inv(Z_OO + Z_US)` products, then
/// `Z_RL [Z_ROT - Z_ROS inv(Z_SS + Z_SOS + Z_RIS) Z_SOT] Z_TG`.
pub fn dense_channel(z: &ImpedanceSet, z_ris: &[Complex64]) -> Result<DenseMat> {
    let (m, _l, n, ne) = z.dims();
    if z_ris.len() != n {
        return Err(Error::Dimension {
            what: "RIS load diagonal".into(),
            expected: n.to_string(),
            got: z_ris.len().to_string(),
        });
    }

    let z_rt = DenseMat::from_dmatrix(&z.z_rt);
    let z_rs = DenseMat::from_dmatrix(&z.z_rs);
    let z_st = DenseMat::from_dmatrix(&z.z_st);
    let z_ss = DenseMat::from_dmatrix(&z.z_ss);

    let (z_rot, z_ros, z_sos, z_sot) = if ne > 0 {
        let zus: Vec<Complex64> = z.z_us.iter().cloned().collect();
        let zbar = DenseMat::from_dmatrix(&z.z_oo).add(&DenseMat::from_diag(&zus));
        let zbar_inv = zbar.inverse()?;
        let z_ro = DenseMat::from_dmatrix(&z.z_ro);
        let z_so = DenseMat::from_dmatrix(&z.z_so);
        let z_ot = DenseMat::from_dmatrix(&z.z_ot);
        let z_os = DenseMat::from_dmatrix(&z.z_os);
        (
            z_rt.sub(&z_ro.mul(&zbar_inv).mul(&z_ot)),
            z_ro.mul(&zbar_inv).mul(&z_os).sub(&z_rs),
            z_so.mul(&zbar_inv).mul(&z_os).neg(),
            z_so.mul(&zbar_inv).mul(&z_ot).sub(&z_st),
        )
    } else {
        (z_rt, z_rs.neg(), DenseMat::zeros(n, n), z_st.neg())
    };

    let z_sca = z_ss
        .add(&z_sos)
        .add(&DenseMat::from_diag(z_ris))
        .inverse()?;

    let z_l_inv: Vec<Complex64> = z.z_l.iter().map(|v| v.inv()).collect();
    let z_rl = DenseMat::identity(z.z_rr.nrows())
        .add(&DenseMat::from_dmatrix(&z.z_rr).mul(&DenseMat::from_diag(&z_l_inv)))
        .inverse()?;
    let zg: Vec<Complex64> = z.z_g.iter().cloned().collect();
    let z_tg = DenseMat::from_dmatrix(&z.z_tt)
        .add(&DenseMat::from_diag(&zg))
        .inverse()?;

    let _ = m;
    Ok(z_rl
        .mul(&z_rot.sub(&z_ros.mul(&z_sca).mul(&z_sot)))
        .mul(&z_tg))
}

// ---------------------------------------------------------------------------
// Single-variable objective grid and naive rate
// ---------------------------------------------------------------------------

/// Evaluate the single-element objective
/// `f(X) = 1 + c1/chi + conj(c1)/conj(chi) + c2/|chi|^2`, `chi = 1 + a (R0 + jX)`,
/// written out independently of the optimizer's evaluation path.
pub fn objective_value(c: &DetCoefficients, x: f64) -> f64 {
    let chi = Complex64::new(1.0, 0.0) + c.a * Complex64::new(c.r0, x);
    let denom = chi.norm_sqr();
    if denom < 1e-280 {
        return f64::NEG_INFINITY;
    }
    // c1/chi + conj(c1/chi) = 2 Re(c1 conj(chi)) / |chi|^2
    1.0 + (2.0 * (c.c1 * chi.conj()).re + c.c2) / denom
}

/// Brute-force maximization of the single-element objective over a uniform
/// `n`-point grid including both endpoints. Ties keep the smallest reactance.
pub fn grid_max_f(c: &DetCoefficients, bounds: (f64, f64), n: usize) -> (f64, f64) {
    assert!(n >= 2, "grid needs at least the two endpoints");
    let (lb, ub) = bounds;
    let step = (ub - lb) / (n - 1) as f64;
    let mut best_x = lb;
    let mut best_f = objective_value(c, lb);
    for i in 1..n {
        let x = if i == n - 1 { ub } else { lb + step * i as f64 };
        let f = objective_value(c, x);
        if f > best_f {
            best_f = f;
            best_x = x;
        }
    }
    (best_x, best_f)
}

/// Rate by naive determinant expansion, `log2 det(I + H Q H^H / sigma^2)`.
/// Refuses receivers larger than [`MAX_ORACLE_L`].
pub fn dense_logdet_rate(h: &CMatrix, q: &CMatrix, sigma2: f64) -> Result<f64> {
    let l = h.nrows();
    if l > MAX_ORACLE_L {
        return Err(Error::Unsupported(format!(
            "oracle rate capped at L <= {MAX_ORACLE_L}, got {l}"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Invalid {
            what: "noise power",
            why: "sigma^2 must be positive".into(),
        });
    }
    let hd = DenseMat::from_dmatrix(h);
    let qd = DenseMat::from_dmatrix(q);
    let arg = DenseMat::identity(l).add(
        &hd.mul(&qd)
            .mul(&hd.adjoint())
            .scale(Complex64::new(1.0 / sigma2, 0.0)),
    );
    let det = arg.determinant()?;
    Ok(det.re.max(f64::MIN_POSITIVE).log2())
}

/// The determinant-ratio route to `det(S_k(z))`: with `H(z) = B + u v^H / chi`,
/// returns `det(I + H Q H^H/s2) / det(I + B Q B^H/s2)` through two naive
/// Laplace determinants.
pub fn det_ratio(
    b: &CMatrix,
    u: &CMatrix,
    v: &CMatrix,
    q: &CMatrix,
    sigma2: f64,
    chi: Complex64,
) -> Result<f64> {
    let l = b.nrows();
    if l > MAX_ORACLE_L {
        return Err(Error::Unsupported(format!(
            "oracle determinant ratio capped at L <= {MAX_ORACLE_L}, got {l}"
        )));
    }
    let bd = DenseMat::from_dmatrix(b);
    let ud = DenseMat::from_dmatrix(u);
    let vd = DenseMat::from_dmatrix(v);
    let qd = DenseMat::from_dmatrix(q);
    let c = ud.mul(&vd.adjoint());
    let h = bd.add(&c.scale(chi.inv()));
    let scale = Complex64::new(1.0 / sigma2, 0.0);
    let num = DenseMat::identity(l)
        .add(&h.mul(&qd).mul(&h.adjoint()).scale(scale))
        .determinant()?;
    let den = DenseMat::identity(l)
        .add(&bd.mul(&qd).mul(&bd.adjoint()).scale(scale))
        .determinant()?;
    Ok(num.re / den.re)
}
