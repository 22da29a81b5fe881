//! Seeded random instance generators.
//!
//! Used by the unit and acceptance suites and by the `verify` command to draw
//! reproducible random corpora. All generators are pure functions of the RNG
//! state; identical seeds give identical instances.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ReducedNetwork, RisLoadState};
use crate::em::ImpedanceSet;
use crate::linalg::{CMatrix, CVector};
use crate::optimizer::DetCoefficients;

/// Derive an independent stream seed from a master seed (splitmix64 step).
pub fn stream_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn random_complex<R: Rng>(rng: &mut R, scale: f64) -> Complex64 {
    Complex64::new(
        scale * (2.0 * rng.gen::<f64>() - 1.0),
        scale * (2.0 * rng.gen::<f64>() - 1.0),
    )
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng, scale))
}

/// Complex-symmetric (not Hermitian) random matrix, as reciprocity demands.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let g = random_matrix(rng, n, n, scale);
    (&g + g.transpose()).scale(0.5)
}

/// Random square matrix kept comfortably invertible by a diagonal shift.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let mut m = random_matrix(rng, n, n, 1.0);
    for i in 0..n {
        m[(i, i)] += Complex64::new(3.0 + n as f64 * 0.25, 1.0);
    }
    m
}

/// Hermitian PSD matrix `G G^H`, scaled.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let g = random_matrix(rng, n, n, 1.0);
    (&g * g.adjoint()).scale(scale / n as f64)
}

/// Load state with uniform-random reactances in the feasible interval.
pub fn random_loads<R: Rng>(rng: &mut R, n: usize, bounds: (f64, f64), r0: f64) -> RisLoadState {
    let x = (0..n)
        .map(|_| rng.gen_range(bounds.0..bounds.1))
        .collect();
    RisLoadState::uniform_r0(r0, x, bounds).expect("synth bounds are valid")
}

/// Random impedance set with physically plausible magnitudes: resonant-scale
/// diagonals, weaker off-diagonal coupling, reciprocity exact by construction.
pub fn random_impedance_set<R: Rng>(
    rng: &mut R,
    m: usize,
    l: usize,
    n: usize,
    ne: usize,
) -> ImpedanceSet {
    let mut self_block = |size: usize| {
        let mut b = random_symmetric(rng, size, 5.0);
        for i in 0..size {
            b[(i, i)] = Complex64::new(
                45.0 + 25.0 * rng.gen::<f64>(),
                -20.0 + 40.0 * rng.gen::<f64>(),
            );
        }
        b
    };
    let z_tt = self_block(m);
    let z_rr = self_block(l);
    let z_ss = self_block(n);
    let z_oo = self_block(ne);
    let z_so = random_matrix(rng, n, ne, 3.0);
    let z_os = z_so.transpose();
    ImpedanceSet {
        wavelength: 0.1,
        z_tt,
        z_rr,
        z_ss,
        z_oo,
        z_rt: random_matrix(rng, l, m, 3.0),
        z_ro: random_matrix(rng, l, ne, 3.0),
        z_rs: random_matrix(rng, l, n, 3.0),
        z_so,
        z_st: random_matrix(rng, n, m, 3.0),
        z_ot: random_matrix(rng, ne, m, 3.0),
        z_os,
        z_g: CVector::from_element(m, Complex64::new(50.0, 0.0)),
        z_l: CVector::from_element(l, Complex64::new(50.0, 0.0)),
        z_us: CVector::from_iterator(ne, (0..ne).map(|_| Complex64::new(5.0 * rng.gen::<f64>(), 0.0))),
    }
}

/// Random reduced network, skipping the electromagnetic assembly entirely.
/// The coupling blocks keep the symmetry the port reduction guarantees.
pub fn random_reduced_network<R: Rng>(rng: &mut R, l: usize, m: usize, n: usize) -> ReducedNetwork {
    let mut z_ss = random_symmetric(rng, n, 4.0);
    for i in 0..n {
        z_ss[(i, i)] = Complex64::new(
            40.0 + 20.0 * rng.gen::<f64>(),
            -10.0 + 20.0 * rng.gen::<f64>(),
        );
    }
    ReducedNetwork {
        z_rot: random_matrix(rng, l, m, 1.0),
        z_ros: random_matrix(rng, l, n, 1.0),
        z_sos: random_symmetric(rng, n, 2.0),
        z_sot: random_matrix(rng, n, m, 1.0),
        z_rl: random_matrix(rng, l, l, 0.2) + CMatrix::identity(l, l).scale(0.7),
        z_tg: (random_matrix(rng, m, m, 0.2) + CMatrix::identity(m, m).scale(0.7)).scale(0.01),
        z_ss,
    }
}

/// Which construction a synthetic coefficient tuple targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientClass {
    RealPositive,
    RealNegative,
    RealZero,
    Complex,
}

/// Random single-element objective coefficients plus a feasible interval.
///
/// The `Real*` classes align `c1` with `a` so that `c1 a*` is exactly real
/// and then pick `c2` to force the sign of the stationary-point denominator;
/// `Complex` draws generic tuples. Tuples whose `chi(X)` passes too close to
/// zero inside the interval are rejected and redrawn, mirroring the
/// boundedness the physical problem guarantees.
pub fn random_det_coefficients<R: Rng>(
    rng: &mut R,
    class: CoefficientClass,
) -> (DetCoefficients, (f64, f64)) {
    loop {
        let bounds = if rng.gen_bool(0.4) {
            (-302.50, -19.66)
        } else {
            let a = -400.0 + 800.0 * rng.gen::<f64>();
            let b = -400.0 + 800.0 * rng.gen::<f64>();
            if (a - b).abs() < 1.0 {
                continue;
            }
            (a.min(b), a.max(b))
        };
        let r0 = match rng.gen_range(0..3) {
            0 => 0.0,
            1 => 0.2,
            _ => 5.0 * rng.gen::<f64>(),
        };
        let mag = |rng: &mut R, lo: f64, hi: f64| {
            let t = rng.gen::<f64>();
            lo * (hi / lo).powf(t)
        };
        let a_mag = mag(rng, 1e-3, 1.0);
        let a_phase = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        let a = Complex64::from_polar(a_mag, a_phase);

        let (c1, c2) = match class {
            CoefficientClass::Complex => {
                let c1 = random_complex(rng, mag(rng, 1e-2, 1e3));
                let c2 = (2.0 * rng.gen::<f64>() - 1.0) * mag(rng, 1e-2, 1e3);
                // Reject the measure-zero aligned case; it belongs to Real*.
                let ca = c1 * a.conj();
                if ca.im.abs() <= 1e-9 * ca.norm() {
                    continue;
                }
                (c1, c2)
            }
            _ => {
                // c1 = t a / |a| makes c1 a* = t |a| exactly real.
                let t = (2.0 * rng.gen::<f64>() - 1.0) * mag(rng, 1e-2, 1e3);
                let c1 = a.scale(t / a_mag);
                let ca_re = (c1 * a.conj()).re;
                let partial = 2.0 * (c1.re + r0 * ca_re);
                let delta = mag(rng, 1e-2, 1e2);
                let c2 = match class {
                    CoefficientClass::RealPositive => -partial + delta,
                    CoefficientClass::RealNegative => -partial - delta,
                    CoefficientClass::RealZero => -partial,
                    CoefficientClass::Complex => unreachable!(),
                };
                (c1, c2)
            }
        };

        // Keep chi(X) bounded away from zero over the whole interval.
        let chi0 = Complex64::new(1.0, 0.0) + a.scale(r0);
        let lin = -2.0 * (a * chi0.conj()).im;
        let quad = a.norm_sqr();
        let vertex = (-lin / (2.0 * quad)).clamp(bounds.0, bounds.1);
        let chi_sq = |x: f64| chi0.norm_sqr() + lin * x + quad * x * x;
        let min_chi = chi_sq(vertex).min(chi_sq(bounds.0)).min(chi_sq(bounds.1));
        let scale = 1.0_f64.max(quad * bounds.0.abs().max(bounds.1.abs()).powi(2));
        if min_chi < 1e-6 * scale {
            continue;
        }

        return (
            DetCoefficients {
                c1,
                c2,
                a,
                r0,
                base_rate: 0.0,
            },
            bounds,
        );
    }
}

/// Draw a coefficient class with all five proposition branches reachable.
pub fn random_coefficient_class<R: Rng>(rng: &mut R) -> CoefficientClass {
    match rng.gen_range(0..10) {
        0 | 1 => CoefficientClass::RealPositive,
        2 | 3 => CoefficientClass::RealNegative,
        4 => CoefficientClass::RealZero,
        _ => CoefficientClass::Complex,
    }
}
