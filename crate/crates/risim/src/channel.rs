//! Scatterer-port elimination, end-to-end channel, and achievable rate.
//!
//! The scattering objects are passive terminated ports; eliminating them
//! (a Schur complement against `Z_OO + Z_US`) leaves four reduced coupling
//! blocks between transmitter, receiver and RIS. The end-to-end channel is
//! then a closed-form function of the tunable RIS load matrix. All solves go
//! through LU factorizations with a conditioning guard; explicit inverses are
//! only formed for the two small composite blocks that are reused everywhere.

use num_complex::Complex64;

use crate::linalg::{self, CMatrix, CVector};
use crate::{Error, ImpedanceSet, Result};

/// Obstacle-eliminated network blocks plus the composite end blocks.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    /// Receiver-transmitter coupling with obstacles absorbed, L x M.
    pub z_rot: CMatrix,
    /// Receiver-RIS coupling, L x N.
    pub z_ros: CMatrix,
    /// Obstacle-mediated RIS-RIS correction, N x N.
    pub z_sos: CMatrix,
    /// RIS-transmitter coupling, N x M.
    pub z_sot: CMatrix,
    /// `(I_L + Z_RR Z_L^-1)^-1`, L x L.
    pub z_rl: CMatrix,
    /// `(Z_TT + Z_G)^-1`, M x M.
    pub z_tg: CMatrix,
    /// RIS self/mutual impedances, N x N.
    pub z_ss: CMatrix,
}

impl ReducedNetwork {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.z_rot.ncols(), self.z_rot.nrows(), self.z_ss.nrows())
    }

    pub fn n_ris(&self) -> usize {
        self.z_ss.nrows()
    }

    /// Copy of the network with the off-diagonal RIS coupling discarded.
    /// This is the "coupling-unaware" design model: it optimizes as if the
    /// RIS elements did not interact, and is evaluated on the true network.
    pub fn with_diagonal_ris_coupling(&self) -> ReducedNetwork {
        let mut out = self.clone();
        out.z_ss = CMatrix::from_diagonal(&self.z_ss.diagonal());
        out
    }
}

/// Per-element RIS load state: fixed parasitic resistances and tunable
/// reactances constrained to a feasible interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RisLoadState {
    r0: Vec<f64>,
    x: Vec<f64>,
    bounds: (f64, f64),
}

impl RisLoadState {
    pub fn new(r0: Vec<f64>, x: Vec<f64>, bounds: (f64, f64)) -> Result<Self> {
        if !(bounds.0 < bounds.1) {
            return Err(Error::Invalid {
                what: "load bounds",
                why: format!("lower bound {} must be below upper bound {}", bounds.0, bounds.1),
            });
        }
        if r0.len() != x.len() {
            return Err(Error::Dimension {
                what: "load vectors".into(),
                expected: r0.len().to_string(),
                got: x.len().to_string(),
            });
        }
        if let Some(bad) = r0.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Invalid {
                what: "parasitic resistance",
                why: format!("R_0 must be non-negative, got {bad}"),
            });
        }
        if let Some(bad) = x.iter().find(|v| !(bounds.0 <= **v && **v <= bounds.1)) {
            return Err(Error::Invalid {
                what: "reactance",
                why: format!("X = {bad} outside feasible interval [{}, {}]", bounds.0, bounds.1),
            });
        }
        Ok(RisLoadState { r0, x, bounds })
    }

    /// Uniform parasitic resistance, reactances supplied by the caller.
    pub fn uniform_r0(r0: f64, x: Vec<f64>, bounds: (f64, f64)) -> Result<Self> {
        let n = x.len();
        RisLoadState::new(vec![r0; n], x, bounds)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn r0(&self) -> &[f64] {
        &self.r0
    }

    pub fn reactances(&self) -> &[f64] {
        &self.x
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Set one reactance, clamping it to the feasible interval.
    pub fn set_reactance(&mut self, k: usize, x: f64) {
        self.x[k] = x.clamp(self.bounds.0, self.bounds.1);
    }

    /// Complex load of element `k`, `R_0k + j X_k`.
    pub fn impedance(&self, k: usize) -> Complex64 {
        Complex64::new(self.r0[k], self.x[k])
    }

    /// Diagonal entries of the RIS load matrix.
    pub fn impedances(&self) -> CVector {
        CVector::from_iterator(
            self.len(),
            self.r0
                .iter()
                .zip(&self.x)
                .map(|(&r, &x)| Complex64::new(r, x)),
        )
    }
}

/// The diagonal RIS load matrix `diag(R_0k + j X_k)`.
pub fn ris_impedance_matrix(s: &RisLoadState) -> CMatrix {
    CMatrix::from_diagonal(&s.impedances())
}

/// Eliminate the scatterer ports of an impedance set.
///
/// With no scatterers the reduced blocks collapse to the sign conventions
/// `Z_ROT = Z_RT`, `Z_ROS = -Z_RS`, `Z_SOS = 0`, `Z_SOT = -Z_ST`.
pub fn reduce_network(z: &ImpedanceSet) -> Result<ReducedNetwork> {
    z.validate()?;
    let (m, l, n, ne) = z.dims();

    // Z_OO + Z_US, factored once; both right-hand sides solved against it.
    let (x_ot, x_os) = if ne > 0 {
        let zbar_oo = &z.z_oo + CMatrix::from_diagonal(&z.z_us);
        let cond = linalg::svd_condition(&zbar_oo);
        if !cond.is_finite() || cond > linalg::COND_LIMIT {
            return Err(Error::IllConditioned {
                name: "Z_OO + Z_US".into(),
                cond,
            });
        }
        (
            linalg::solve(&zbar_oo, &z.z_ot, "Z_OO + Z_US")?,
            linalg::solve(&zbar_oo, &z.z_os, "Z_OO + Z_US")?,
        )
    } else {
        (CMatrix::zeros(0, m), CMatrix::zeros(0, n))
    };

    let z_rot = &z.z_rt - &z.z_ro * &x_ot;
    let z_ros = &z.z_ro * &x_os - &z.z_rs;
    let z_sos = -(&z.z_so * &x_os);
    let z_sot = &z.z_so * &x_ot - &z.z_st;

    for (k, v) in z.z_l.iter().enumerate() {
        if v.norm() == 0.0 {
            return Err(Error::IllConditioned {
                name: format!("Z_L ({k},{k}) is zero"),
                cond: f64::INFINITY,
            });
        }
    }
    let z_l_inv = CVector::from_iterator(l, z.z_l.iter().map(|v| v.inv()));
    let rl_arg = CMatrix::identity(l, l) + &z.z_rr * CMatrix::from_diagonal(&z_l_inv);
    let cond_rl = linalg::svd_condition(&rl_arg);
    if !cond_rl.is_finite() || cond_rl > linalg::COND_LIMIT {
        return Err(Error::IllConditioned {
            name: "I_L + Z_RR Z_L^-1".into(),
            cond: cond_rl,
        });
    }
    let z_rl = linalg::inverse(&rl_arg, "I_L + Z_RR Z_L^-1")?;

    let tg_arg = &z.z_tt + CMatrix::from_diagonal(&z.z_g);
    let cond_tg = linalg::svd_condition(&tg_arg);
    if !cond_tg.is_finite() || cond_tg > linalg::COND_LIMIT {
        return Err(Error::IllConditioned {
            name: "Z_TT + Z_G".into(),
            cond: cond_tg,
        });
    }
    let z_tg = linalg::inverse(&tg_arg, "Z_TT + Z_G")?;

    Ok(ReducedNetwork {
        z_rot,
        z_ros,
        z_sos,
        z_sot,
        z_rl,
        z_tg,
        z_ss: z.z_ss.clone(),
    })
}

/// End-to-end channel `Z_RL [Z_ROT - Z_ROS Z_sca Z_SOT] Z_TG` where
/// `Z_sca = (Z_SS + Z_SOS + Z_RIS)^-1`, evaluated by solving against the sum
/// matrix rather than inverting it.
pub fn end_to_end_channel(net: &ReducedNetwork, z_ris: &CVector) -> Result<CMatrix> {
    let n = net.n_ris();
    if z_ris.len() != n {
        return Err(Error::Dimension {
            what: "RIS load diagonal".into(),
            expected: n.to_string(),
            got: z_ris.len().to_string(),
        });
    }
    let a = &net.z_ss + &net.z_sos + CMatrix::from_diagonal(z_ris);
    let y = linalg::solve(&a, &net.z_sot, "Z_SS + Z_SOS + Z_RIS")?;
    Ok(&net.z_rl * (&net.z_rot - &net.z_ros * y) * &net.z_tg)
}

/// Achievable rate `log2 det(I_L + H Q H^H / sigma^2)` in bits/s/Hz.
///
/// `q` must be Hermitian PSD within 1e-10; the log-determinant goes through a
/// Cholesky factorization of the (Hermitian, >= I) argument.
pub fn achievable_rate(h: &CMatrix, q: &CMatrix, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Invalid {
            what: "noise power",
            why: format!("sigma^2 must be positive, got {sigma2}"),
        });
    }
    if q.nrows() != h.ncols() || q.ncols() != h.ncols() {
        return Err(Error::Dimension {
            what: "covariance".into(),
            expected: format!("{0}x{0}", h.ncols()),
            got: format!("{}x{}", q.nrows(), q.ncols()),
        });
    }
    let herm = linalg::hermitian_violation(q);
    if herm > 1e-10 {
        return Err(Error::NotPsd { violation: herm });
    }
    let scale = q.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale > 0.0 {
        let eig = nalgebra::SymmetricEigen::new(linalg::hermitian_part(q));
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * scale {
            return Err(Error::NotPsd {
                violation: -min / scale,
            });
        }
    }
    let l = h.nrows();
    let arg = CMatrix::identity(l, l) + (h * q * h.adjoint()).unscale(sigma2);
    linalg::log2_det_hermitian_pd(&arg, "I_L + H Q H^H / sigma^2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::synth;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn no_scatterers_fixes_the_sign_conventions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = synth::random_impedance_set(&mut rng, 2, 2, 4, 0);
        let net = reduce_network(&z).unwrap();
        assert_eq!(net.z_rot, z.z_rt);
        assert_eq!(net.z_ros, -z.z_rs.clone());
        assert!(net.z_sos.iter().all(|v| *v == c(0.0, 0.0)));
        assert_eq!(net.z_sot, -z.z_st.clone());
    }

    #[test]
    fn open_circuited_scatterers_decouple() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut z = synth::random_impedance_set(&mut rng, 2, 2, 3, 4);
        for v in z.z_us.iter_mut() {
            *v = c(1e12, 0.0);
        }
        let net = reduce_network(&z).unwrap();
        let rel = linalg::rel_frobenius(&net.z_rot, &z.z_rt);
        assert!(rel < 1e-6, "Z_ROT should collapse to Z_RT, rel {rel:.3e}");
    }

    #[test]
    fn reduction_matches_block_elimination_oracle() {
        for seed in 0..10_u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let z = synth::random_impedance_set(&mut rng, 2, 2, 4, 3);
            let net = reduce_network(&z).unwrap();
            let oracle_net = oracle::dense_reduced_blocks(&z).unwrap();
            for (name, a, b) in [
                ("Z_ROT", &net.z_rot, &oracle_net.z_rot),
                ("Z_ROS", &net.z_ros, &oracle_net.z_ros),
                ("Z_SOS", &net.z_sos, &oracle_net.z_sos),
                ("Z_SOT", &net.z_sot, &oracle_net.z_sot),
                ("Z_RL", &net.z_rl, &oracle_net.z_rl),
                ("Z_TG", &net.z_tg, &oracle_net.z_tg),
            ] {
                let rel = linalg::rel_frobenius(a, b);
                assert!(rel < 1e-9, "{name} off by {rel:.3e} (seed {seed})");
            }
        }
    }

    #[test]
    fn ris_matrix_is_strictly_diagonal() {
        let s = RisLoadState::new(vec![0.2, 0.2], vec![-100.0, -50.0], (-302.5, -19.66)).unwrap();
        let m = ris_impedance_matrix(&s);
        assert_eq!(m[(0, 0)], c(0.2, -100.0));
        assert_eq!(m[(1, 1)], c(0.2, -50.0));
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
        assert_eq!(m[(1, 0)], c(0.0, 0.0));

        let zero = RisLoadState::new(vec![0.0], vec![0.0], (-1.0, 1.0)).unwrap();
        assert_eq!(ris_impedance_matrix(&zero)[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn load_state_invariants() {
        assert!(RisLoadState::new(vec![0.1], vec![0.0], (1.0, -1.0)).is_err());
        assert!(RisLoadState::new(vec![-0.1], vec![0.0], (-1.0, 1.0)).is_err());
        assert!(RisLoadState::new(vec![0.1], vec![2.0], (-1.0, 1.0)).is_err());
        let mut s = RisLoadState::new(vec![0.1], vec![0.0], (-1.0, 1.0)).unwrap();
        s.set_reactance(0, 5.0);
        assert_eq!(s.reactances()[0], 1.0);
    }

    #[test]
    fn zero_ris_path_reduces_to_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut net = synth::random_reduced_network(&mut rng, 2, 3, 4);
        net.z_ros = CMatrix::zeros(2, 4);
        let loads = synth::random_loads(&mut rng, 4, (-300.0, -20.0), 0.2);
        let h = end_to_end_channel(&net, &loads.impedances()).unwrap();
        let direct = &net.z_rl * &net.z_rot * &net.z_tg;
        assert!(linalg::rel_frobenius(&h, &direct) < 1e-12);
    }

    #[test]
    fn channel_agrees_with_dense_oracle() {
        for seed in 0..8_u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let z = synth::random_impedance_set(&mut rng, 3, 2, 5, 4);
            let loads = synth::random_loads(&mut rng, 5, (-300.0, -20.0), 0.2);
            let net = reduce_network(&z).unwrap();
            let h = end_to_end_channel(&net, &loads.impedances()).unwrap();
            let dense = oracle::dense_channel(&z, loads.impedances().as_slice()).unwrap();
            let rel = linalg::rel_frobenius(&h, &dense.to_dmatrix());
            assert!(rel < 1e-9, "seed {seed}: rel {rel:.3e}");
        }
    }

    #[test]
    fn rate_of_zero_channel_is_zero() {
        let h = CMatrix::zeros(2, 3);
        let q = CMatrix::identity(3, 3).scale(0.5);
        assert_eq!(achievable_rate(&h, &q, 1e-11).unwrap(), 0.0);
    }

    #[test]
    fn scalar_rate_matches_closed_form() {
        let h = CMatrix::from_row_slice(1, 1, &[c(0.3, -0.4)]);
        let q = CMatrix::from_row_slice(1, 1, &[c(0.125, 0.0)]);
        let sigma2 = 1e-3;
        let expected = (1.0 + 0.25 * 0.125 / sigma2).log2();
        assert_relative_eq!(
            achievable_rate(&h, &q, sigma2).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rate_matches_naive_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let h = synth::random_matrix(&mut rng, 3, 4, 1.0);
            let q = synth::random_psd(&mut rng, 4, 0.1);
            let r = achievable_rate(&h, &q, 1e-2).unwrap();
            let oracle_r = oracle::dense_logdet_rate(&h, &q, 1e-2).unwrap();
            assert_relative_eq!(r, oracle_r, max_relative = 1e-9);
        }
    }

    #[test]
    fn non_psd_covariance_is_rejected() {
        let h = synth::random_matrix(&mut ChaCha8Rng::seed_from_u64(6), 2, 2, 1.0);
        let q = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(
            achievable_rate(&h, &q, 1.0),
            Err(Error::NotPsd { .. })
        ));
        let skew = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.3), c(1.0, 0.0)]);
        assert!(achievable_rate(&h, &skew, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rate_is_nonnegative_and_monotone_in_power(seed in 0u64..1000, alpha in 1.0f64..8.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = synth::random_matrix(&mut rng, 2, 3, 1.0);
            let q = synth::random_psd(&mut rng, 3, 0.05);
            let r = achievable_rate(&h, &q, 1e-2).unwrap();
            prop_assert!(r >= 0.0);
            let r_scaled = achievable_rate(&h, &q.scale(alpha), 1e-2).unwrap();
            prop_assert!(r_scaled >= r - 1e-12);
        }
    }
}
