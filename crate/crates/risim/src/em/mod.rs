//! Thin-wire dipole scenes and their impedance matrices.
//!
//! Every radiating or scattering element (transmit/receive antennas, RIS
//! elements, environmental scatterers) is a cylindrical thin-wire dipole. The
//! self and mutual impedances are computed with the induced-EMF method under
//! the usual sinusoidal current assumption: the exact near field of a
//! sinusoidal filament is integrated along the second wire with adaptive
//! quadrature. The self term evaluates the field on the wire surface (offset
//! by the radius `a`), the standard thin-wire regularization.
//!
//! Externally computed matrices (e.g. from full-wave solvers) can be injected
//! through the binary bundle format in [`bundle`], bypassing this model
//! entirely.

pub mod bundle;
pub(crate) mod quad;

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

/// Free-space wave impedance in ohms.
pub const ETA0: f64 = 376.730313668;

/// Relative tolerance of the impedance quadrature.
pub const QUAD_REL_TOL: f64 = 1e-9;

/// Tolerance for the reciprocity invariant of assembled or loaded matrices.
pub const RECIPROCITY_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Dipole and Scene
// ---------------------------------------------------------------------------

/// A cylindrical thin-wire dipole of perfectly conducting material.
#[derive(Debug, Clone, PartialEq)]
pub struct Dipole {
    /// Center of the wire, meters.
    pub center: Vector3<f64>,
    /// Unit vector along the wire axis.
    pub axis: Vector3<f64>,
    /// Total wire length `l`, meters.
    pub length: f64,
    /// Wire radius `a`, meters; must satisfy `a/l < 0.1`.
    pub radius: f64,
}

impl Dipole {
    pub fn new(center: Vector3<f64>, axis: Vector3<f64>, length: f64, radius: f64) -> Result<Self> {
        let fields = center
            .iter()
            .chain(axis.iter())
            .chain([&length, &radius])
            .all(|v| v.is_finite());
        if !fields {
            return Err(Error::Invalid {
                what: "dipole",
                why: "non-finite field".into(),
            });
        }
        if !(length > 0.0) || !(radius > 0.0) {
            return Err(Error::Invalid {
                what: "dipole",
                why: format!("length and radius must be positive (l={length}, a={radius})"),
            });
        }
        if radius / length >= 0.1 {
            return Err(Error::Invalid {
                what: "dipole",
                why: format!(
                    "thin-wire assumption requires a/l < 0.1, got {}",
                    radius / length
                ),
            });
        }
        if (axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid {
                what: "dipole",
                why: format!("axis must have unit norm, got {}", axis.norm()),
            });
        }
        Ok(Dipole {
            center,
            axis,
            length,
            radius,
        })
    }

    /// Convenience constructor for a z-oriented wire.
    pub fn z_oriented(center: Vector3<f64>, length: f64, radius: f64) -> Result<Self> {
        Dipole::new(center, Vector3::z(), length, radius)
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    fn key(&self) -> [f64; 8] {
        [
            self.center.x,
            self.center.y,
            self.center.z,
            self.axis.x,
            self.axis.y,
            self.axis.z,
            self.length,
            self.radius,
        ]
    }

    fn cmp_key(&self, other: &Dipole) -> Ordering {
        let a = self.key();
        let b = other.key();
        for i in 0..8 {
            match a[i].total_cmp(&b[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

/// Geometric description of all dipoles in a link.
#[derive(Debug, Clone)]
pub struct Scene {
    /// Wavelength, meters.
    pub wavelength: f64,
    pub tx: Vec<Dipole>,
    pub rx: Vec<Dipole>,
    pub ris: Vec<Dipole>,
    /// Scattering objects, flattened across clusters.
    pub scatterers: Vec<Dipole>,
    /// Cluster id of each entry in `scatterers`.
    pub scatterer_cluster: Vec<usize>,
    /// Inter-distance between adjacent RIS elements, meters.
    pub ris_spacing: f64,
}

impl Scene {
    pub fn new(
        wavelength: f64,
        tx: Vec<Dipole>,
        rx: Vec<Dipole>,
        ris: Vec<Dipole>,
        scatterers: Vec<Dipole>,
        scatterer_cluster: Vec<usize>,
        ris_spacing: f64,
    ) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::Invalid {
                what: "scene",
                why: "wavelength must be positive".into(),
            });
        }
        if tx.is_empty() || rx.is_empty() || ris.is_empty() {
            return Err(Error::Invalid {
                what: "scene",
                why: "transmitter, receiver and RIS must each have at least one element".into(),
            });
        }
        if scatterers.len() != scatterer_cluster.len() {
            return Err(Error::Dimension {
                what: "scatterer cluster ids".into(),
                expected: scatterers.len().to_string(),
                got: scatterer_cluster.len().to_string(),
            });
        }
        if ris_spacing > 0.5 * wavelength {
            log::warn!(
                "RIS spacing {:.4} m exceeds half a wavelength ({:.4} m); the array is no longer sub-wavelength",
                ris_spacing,
                0.5 * wavelength
            );
        }
        let scene = Scene {
            wavelength,
            tx,
            rx,
            ris,
            scatterers,
            scatterer_cluster,
            ris_spacing,
        };
        let all: Vec<&Dipole> = scene.all_dipoles().collect();
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                let dist = (all[i].center - all[j].center).norm();
                let parallel = all[i].axis.cross(&all[j].axis).norm() < 1e-12;
                if dist < 1e-12 && parallel {
                    return Err(Error::Invalid {
                        what: "scene",
                        why: format!("dipoles {i} and {j} coincide"),
                    });
                }
            }
        }
        Ok(scene)
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (
            self.tx.len(),
            self.rx.len(),
            self.ris.len(),
            self.scatterers.len(),
        )
    }

    pub fn all_dipoles(&self) -> impl Iterator<Item = &Dipole> {
        self.tx
            .iter()
            .chain(self.rx.iter())
            .chain(self.ris.iter())
            .chain(self.scatterers.iter())
    }

    /// Rigid translation of the whole scene; impedances are invariant under it.
    pub fn translated(&self, offset: Vector3<f64>) -> Scene {
        let shift = |d: &Dipole| Dipole {
            center: d.center + offset,
            ..d.clone()
        };
        Scene {
            wavelength: self.wavelength,
            tx: self.tx.iter().map(shift).collect(),
            rx: self.rx.iter().map(shift).collect(),
            ris: self.ris.iter().map(shift).collect(),
            scatterers: self.scatterers.iter().map(shift).collect(),
            scatterer_cluster: self.scatterer_cluster.clone(),
            ris_spacing: self.ris_spacing,
        }
    }
}

/// Evenly spaced parallel wires along `direction`, centered on `center`.
pub fn linear_array(
    center: Vector3<f64>,
    direction: Vector3<f64>,
    spacing: f64,
    count: usize,
    length: f64,
    radius: f64,
) -> Result<Vec<Dipole>> {
    let dir = direction.normalize();
    (0..count)
        .map(|i| {
            let offset = (i as f64 - 0.5 * (count as f64 - 1.0)) * spacing;
            Dipole::z_oriented(center + dir * offset, length, radius)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Induced-EMF mutual impedance
// ---------------------------------------------------------------------------

/// Exact E-field of a unit-amplitude sinusoidal filament current
/// `I(t) = sin(k (h - |t|))` on a wire of half-length `h` along z.
///
/// Returns the axial and radial components at cylindrical `(rho, z)` in the
/// wire frame. `rho` must be positive (callers clamp to the wire surface).
fn sinusoidal_field(k: f64, h: f64, rho: f64, z: f64) -> (Complex64, Complex64) {
    let g = |r: f64| {
        let (s, c) = (k * r).sin_cos();
        Complex64::new(c, -s) / r
    };
    let r1 = (rho * rho + (z - h) * (z - h)).sqrt();
    let r2 = (rho * rho + (z + h) * (z + h)).sqrt();
    let r0 = (rho * rho + z * z).sqrt();
    let ckh = (k * h).cos();
    let g1 = g(r1);
    let g2 = g(r2);
    let g0 = g(r0);
    let j = Complex64::i();
    let e_par = -j * ETA0 / (4.0 * PI) * (g1 + g2 - g0.scale(2.0 * ckh));
    let e_rad = j * ETA0 / (4.0 * PI * rho)
        * (g1.scale(z - h) + g2.scale(z + h) - g0.scale(2.0 * z * ckh));
    (e_par, e_rad)
}

/// Self or mutual impedance of a pair of thin-wire dipoles in ohms.
///
/// The arguments are symmetrized internally (the pair is evaluated in a
/// canonical order), so `mutual_impedance(a, b) == mutual_impedance(b, a)`
/// bit-for-bit and assembled matrices are reciprocal by construction.
pub fn mutual_impedance(d1: &Dipole, d2: &Dipole, wavelength: f64) -> Result<Complex64> {
    if !(wavelength > 0.0) {
        return Err(Error::Invalid {
            what: "wavelength",
            why: "must be positive".into(),
        });
    }
    let (src, obs) = match d1.cmp_key(d2) {
        Ordering::Greater => (d2, d1),
        _ => (d1, d2),
    };
    let k = 2.0 * PI / wavelength;
    let h1 = src.half_length();
    let h2 = obs.half_length();
    let feed = (k * h1).sin() * (k * h2).sin();
    if feed.abs() < 1e-6 {
        return Err(Error::Invalid {
            what: "dipole length",
            why: "feed current of the sinusoidal distribution vanishes (length near a whole wavelength)".into(),
        });
    }

    let integrand = |s: f64| -> Complex64 {
        let p = obs.center + obs.axis * s;
        let d = p - src.center;
        let z = d.dot(&src.axis);
        let rho_vec = d - src.axis * z;
        let rho = rho_vec.norm();
        // Clamp to the wire surface: regularizes the self term and any
        // observation point that falls inside the source wire.
        let (e_par, e_rad) = sinusoidal_field(k, h1, rho.max(src.radius), z);
        let mut tangential = e_par * src.axis.dot(&obs.axis);
        if rho > 1e-9 * src.radius {
            tangential += e_rad * (rho_vec.dot(&obs.axis) / rho);
        }
        tangential * (k * (h2 - s.abs())).sin()
    };

    // Split at the current kink in the middle of the observation wire.
    let left = quad::integrate(&integrand, -h2, 0.0, QUAD_REL_TOL, quad::DEFAULT_MAX_EVALS)?;
    let right = quad::integrate(&integrand, 0.0, h2, QUAD_REL_TOL, quad::DEFAULT_MAX_EVALS)?;
    Ok(-(left + right) / feed)
}

// ---------------------------------------------------------------------------
// Impedance set
// ---------------------------------------------------------------------------

/// Diagonal termination values attached to the network ports.
#[derive(Debug, Clone)]
pub struct Terminations {
    /// Generator impedances at the transmitter (length M).
    pub z_g: Vec<Complex64>,
    /// Load impedances at the receiver (length L).
    pub z_l: Vec<Complex64>,
    /// Material load impedances of the scattering objects (length N_e).
    pub z_us: Vec<Complex64>,
}

impl Terminations {
    /// All ports terminated with the same real generator/load resistance and
    /// short-circuited scatterers.
    pub fn uniform(m: usize, l: usize, n_e: usize, z_g: Complex64, z_l: Complex64) -> Self {
        Terminations {
            z_g: vec![z_g; m],
            z_l: vec![z_l; l],
            z_us: vec![Complex64::new(0.0, 0.0); n_e],
        }
    }
}

/// The full family of self/mutual impedance blocks plus terminations.
///
/// Cross blocks are stored one way; their transposes are implied by
/// reciprocity. `z_so` and `z_os` are both kept because the port-elimination
/// formulas consume both orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSet {
    pub wavelength: f64,
    pub z_tt: CMatrix,
    pub z_rr: CMatrix,
    pub z_ss: CMatrix,
    pub z_oo: CMatrix,
    pub z_rt: CMatrix,
    pub z_ro: CMatrix,
    pub z_rs: CMatrix,
    pub z_so: CMatrix,
    pub z_st: CMatrix,
    pub z_ot: CMatrix,
    pub z_os: CMatrix,
    pub z_g: CVector,
    pub z_l: CVector,
    pub z_us: CVector,
}

impl ImpedanceSet {
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.z_tt.nrows(),
            self.z_rr.nrows(),
            self.z_ss.nrows(),
            self.z_oo.nrows(),
        )
    }

    /// Validate all dimension, diagonality and reciprocity invariants.
    pub fn validate(&self) -> Result<()> {
        let (m, l, n, ne) = self.dims();
        let expect = |name: &str, mat: &CMatrix, rows: usize, cols: usize| -> Result<()> {
            if mat.nrows() != rows || mat.ncols() != cols {
                return Err(Error::Dimension {
                    what: format!("block {name}"),
                    expected: format!("{rows}x{cols}"),
                    got: format!("{}x{}", mat.nrows(), mat.ncols()),
                });
            }
            Ok(())
        };
        expect("Z_TT", &self.z_tt, m, m)?;
        expect("Z_RR", &self.z_rr, l, l)?;
        expect("Z_SS", &self.z_ss, n, n)?;
        expect("Z_OO", &self.z_oo, ne, ne)?;
        expect("Z_RT", &self.z_rt, l, m)?;
        expect("Z_RO", &self.z_ro, l, ne)?;
        expect("Z_RS", &self.z_rs, l, n)?;
        expect("Z_SO", &self.z_so, n, ne)?;
        expect("Z_ST", &self.z_st, n, m)?;
        expect("Z_OT", &self.z_ot, ne, m)?;
        expect("Z_OS", &self.z_os, ne, n)?;
        for (name, vec, len) in [
            ("Z_G", &self.z_g, m),
            ("Z_L", &self.z_l, l),
            ("Z_US", &self.z_us, ne),
        ] {
            if vec.len() != len {
                return Err(Error::Dimension {
                    what: format!("termination {name}"),
                    expected: len.to_string(),
                    got: vec.len().to_string(),
                });
            }
        }
        for (name, mat) in [
            ("Z_TT", &self.z_tt),
            ("Z_RR", &self.z_rr),
            ("Z_SS", &self.z_ss),
            ("Z_OO", &self.z_oo),
        ] {
            check_reciprocal(name, name, mat, mat)?;
        }
        check_reciprocal("Z_SO", "Z_OS", &self.z_so, &self.z_os)?;
        Ok(())
    }
}

/// Checks `A(i,j) == B(j,i)` within [`RECIPROCITY_TOL`] relative error.
fn check_reciprocal(name_a: &str, name_b: &str, a: &CMatrix, b: &CMatrix) -> Result<()> {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)];
            let y = b[(j, i)];
            let scale = x.norm().max(y.norm());
            let rel = if scale == 0.0 {
                0.0
            } else {
                (x - y).norm() / scale
            };
            if rel > RECIPROCITY_TOL {
                return Err(Error::Reciprocity {
                    a: name_a.to_string(),
                    b: name_b.to_string(),
                    i,
                    j,
                    rel,
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PortKind {
    Tx,
    Rx,
    Ris,
    Obstacle,
}

fn block_name(a: PortKind, b: PortKind) -> &'static str {
    use PortKind::*;
    match (a, b) {
        (Tx, Tx) => "Z_TT",
        (Rx, Rx) => "Z_RR",
        (Ris, Ris) => "Z_SS",
        (Obstacle, Obstacle) => "Z_OO",
        (Rx, Tx) | (Tx, Rx) => "Z_RT",
        (Rx, Obstacle) | (Obstacle, Rx) => "Z_RO",
        (Rx, Ris) | (Ris, Rx) => "Z_RS",
        (Ris, Obstacle) | (Obstacle, Ris) => "Z_SO",
        (Ris, Tx) | (Tx, Ris) => "Z_ST",
        (Obstacle, Tx) | (Tx, Obstacle) => "Z_OT",
    }
}

/// Fill every impedance block of a scene with the induced-EMF model.
///
/// Pairs are evaluated concurrently; each entry is an independent, fully
/// deterministic quadrature written to a fixed position, so the result does
/// not depend on the evaluation order.
pub fn assemble_impedance_set(scene: &Scene, terminations: &Terminations) -> Result<ImpedanceSet> {
    let (m, l, n, ne) = scene.counts();
    for (name, have, want) in [
        ("Z_G", terminations.z_g.len(), m),
        ("Z_L", terminations.z_l.len(), l),
        ("Z_US", terminations.z_us.len(), ne),
    ] {
        if have != want {
            return Err(Error::Dimension {
                what: format!("termination {name}"),
                expected: want.to_string(),
                got: have.to_string(),
            });
        }
    }

    let ports: Vec<(&Dipole, PortKind)> = scene
        .tx
        .iter()
        .map(|d| (d, PortKind::Tx))
        .chain(scene.rx.iter().map(|d| (d, PortKind::Rx)))
        .chain(scene.ris.iter().map(|d| (d, PortKind::Ris)))
        .chain(scene.scatterers.iter().map(|d| (d, PortKind::Obstacle)))
        .collect();
    let total = ports.len();

    let pairs: Vec<(usize, usize)> = (0..total)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .collect();
    let kind_start = |kind: PortKind| match kind {
        PortKind::Tx => 0,
        PortKind::Rx => m,
        PortKind::Ris => m + l,
        PortKind::Obstacle => m + l + n,
    };
    let entries: Vec<Result<Complex64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            mutual_impedance(ports[i].0, ports[j].0, scene.wavelength).map_err(|e| {
                Error::Assembly {
                    block: block_name(ports[i].1, ports[j].1),
                    i: i - kind_start(ports[i].1),
                    j: j - kind_start(ports[j].1),
                    source: Box::new(e),
                }
            })
        })
        .collect();

    let mut full = CMatrix::zeros(total, total);
    for (&(i, j), entry) in pairs.iter().zip(entries) {
        let z = entry?;
        full[(i, j)] = z;
        full[(j, i)] = z;
    }

    let t0 = 0;
    let r0 = m;
    let s0 = m + l;
    let o0 = m + l + n;
    let slice = |ri: usize, rn: usize, ci: usize, cn: usize| full.view((ri, ci), (rn, cn)).into_owned();

    let set = ImpedanceSet {
        wavelength: scene.wavelength,
        z_tt: slice(t0, m, t0, m),
        z_rr: slice(r0, l, r0, l),
        z_ss: slice(s0, n, s0, n),
        z_oo: slice(o0, ne, o0, ne),
        z_rt: slice(r0, l, t0, m),
        z_ro: slice(r0, l, o0, ne),
        z_rs: slice(r0, l, s0, n),
        z_so: slice(s0, n, o0, ne),
        z_st: slice(s0, n, t0, m),
        z_ot: slice(o0, ne, t0, m),
        z_os: slice(o0, ne, s0, n),
        z_g: CVector::from_vec(terminations.z_g.clone()),
        z_l: CVector::from_vec(terminations.z_l.clone()),
        z_us: CVector::from_vec(terminations.z_us.clone()),
    };
    set.validate()?;
    Ok(set)
}

// ---------------------------------------------------------------------------
// Scatterer cluster placement
// ---------------------------------------------------------------------------

/// Placement request for randomly distributed scatterer clusters.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub n_clusters: usize,
    pub per_cluster: usize,
    /// Axis-aligned box the clusters live in, meters.
    pub region_min: Vector3<f64>,
    pub region_max: Vector3<f64>,
    /// Half-extent of the cube each cluster occupies around its center, meters.
    pub cluster_radius: f64,
    /// Minimum center-to-center distance between any two scatterers, meters.
    pub min_separation: f64,
    /// Wire template used for every scattering object.
    pub wire_length: f64,
    pub wire_radius: f64,
}

const PLACEMENT_RETRIES: usize = 10_000;

/// Seeded placement of `n_clusters * per_cluster` scattering dipoles.
///
/// Cluster centers are uniform in the (inset) region; members are uniform in
/// a cube around their center, rejection-sampled against `min_separation`.
/// Identical seeds give identical placements.
pub fn place_clusters(seed: u64, spec: &ClusterSpec) -> Result<(Vec<Dipole>, Vec<usize>)> {
    for (name, v) in [
        ("cluster_radius", spec.cluster_radius),
        ("min_separation", spec.min_separation),
    ] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::Invalid {
                what: "cluster spec",
                why: format!("{name} must be non-negative"),
            });
        }
    }
    for axis in 0..3 {
        if spec.region_max[axis] < spec.region_min[axis] {
            return Err(Error::Invalid {
                what: "cluster spec",
                why: "region_max must dominate region_min".into(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };

    let mut dipoles: Vec<Dipole> = Vec::with_capacity(spec.n_clusters * spec.per_cluster);
    let mut cluster_ids = Vec::with_capacity(spec.n_clusters * spec.per_cluster);
    for cluster in 0..spec.n_clusters {
        let mut center = Vector3::zeros();
        for axis in 0..3 {
            let lo = spec.region_min[axis] + spec.cluster_radius;
            let hi = spec.region_max[axis] - spec.cluster_radius;
            center[axis] = if hi > lo {
                sample(lo, hi, &mut rng)
            } else {
                0.5 * (spec.region_min[axis] + spec.region_max[axis])
            };
        }
        for _ in 0..spec.per_cluster {
            let mut placed = false;
            for _ in 0..PLACEMENT_RETRIES {
                let mut p = Vector3::zeros();
                for axis in 0..3 {
                    let lo = (center[axis] - spec.cluster_radius).max(spec.region_min[axis]);
                    let hi = (center[axis] + spec.cluster_radius).min(spec.region_max[axis]);
                    p[axis] = sample(lo, hi, &mut rng);
                }
                if dipoles
                    .iter()
                    .all(|d| (d.center - p).norm() >= spec.min_separation)
                {
                    dipoles.push(Dipole::z_oriented(p, spec.wire_length, spec.wire_radius)?);
                    cluster_ids.push(cluster);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Placement {
                    constraint: format!(
                        "could not place scatterer {} of cluster {cluster} with min_separation {} m after {PLACEMENT_RETRIES} attempts",
                        cluster_ids.len(),
                        spec.min_separation
                    ),
                });
            }
        }
    }
    Ok((dipoles, cluster_ids))
}

#[cfg(test)]
mod tests;
