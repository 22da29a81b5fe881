//! Text scenario files.
//!
//! Line-oriented `section.key = value` pairs with `#` comments. Geometry is
//! given in wavelength units, loads in ohms, powers in dBm (converted to
//! watts here, at the configuration boundary, and nowhere else). Every field
//! has a default, so an empty file describes the reference setup: a 4-antenna
//! transmitter at the origin, a single-antenna receiver at (9.6, 14.4) lambda,
//! a 32-element RIS row centered at (0, 24) lambda, and 4 scatterer clusters.

use std::path::PathBuf;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::em::{linear_array, ClusterSpec, Scene, Terminations};
use crate::optimizer::{SolveOptions, SolverKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    ClosedForm,
    GridBaseline,
}

/// Whether mutual coupling is honored while optimizing the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Coupling-aware: optimize on the true network.
    Mca,
    /// Coupling-unaware: optimize with off-diagonal RIS coupling zeroed,
    /// evaluate on the true network.
    Mcu,
}

impl CouplingMode {
    pub fn label(&self) -> &'static str {
        match self {
            CouplingMode::Mca => "MCA",
            CouplingMode::Mcu => "MCU",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub wavelength_m: f64,
    pub tx_count: usize,
    /// Transmit array center, (x, y) in wavelengths.
    pub tx_center: (f64, f64),
    /// Transmit element spacing, wavelengths.
    pub tx_spacing: f64,
    pub rx_count: usize,
    pub rx_position: (f64, f64),
    pub rx_spacing: f64,
    pub ris_count: usize,
    pub ris_center: (f64, f64),
    /// RIS inter-element distance `d`, wavelengths.
    pub ris_spacing: f64,
    /// Wire length as a fraction of the wavelength.
    pub wire_length: f64,
    /// Wire radius as a fraction of the wavelength.
    pub wire_radius: f64,
    /// Optional impedance bundle; when set it replaces the analytic model.
    pub bundle: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Loads {
    pub r0_ohm: f64,
    pub x_lb_ohm: f64,
    pub x_ub_ohm: f64,
    pub zg_ohm: Complex64,
    pub zl_ohm: Complex64,
    pub zus_ohm: Complex64,
}

#[derive(Debug, Clone)]
pub struct Signal {
    pub pt_dbm: f64,
    pub sigma2_dbm: f64,
}

impl Signal {
    pub fn pt_watts(&self) -> f64 {
        dbm_to_watts(self.pt_dbm)
    }

    pub fn sigma2_watts(&self) -> f64 {
        dbm_to_watts(self.sigma2_dbm)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone)]
pub struct ScattererCfg {
    pub clusters: usize,
    pub per_cluster: usize,
    /// Axis-aligned box `(x0, y0, z0, x1, y1, z1)` in wavelengths.
    pub region: [f64; 6],
    /// Cluster half-extent, wavelengths.
    pub cluster_radius: f64,
    /// Minimum scatterer separation, wavelengths.
    pub min_separation: f64,
    /// Base seed of the placement streams.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunCfg {
    pub epsilon: f64,
    pub max_outer: usize,
    pub realizations: usize,
    pub solver: SolverChoice,
    pub grid_points: usize,
    pub coupling: CouplingMode,
    /// Master seed of the run (initial reactances and realization streams).
    pub seed: u64,
    /// Hard cap on the RIS size a sweep may request.
    pub ris_cap: usize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: Geometry,
    pub loads: Loads,
    pub signal: Signal,
    pub scatterer: ScattererCfg,
    pub run: RunCfg,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            geometry: Geometry {
                wavelength_m: 0.1,
                tx_count: 4,
                tx_center: (0.0, 0.0),
                tx_spacing: 0.5,
                rx_count: 1,
                rx_position: (9.6, 14.4),
                rx_spacing: 0.5,
                ris_count: 32,
                ris_center: (0.0, 24.0),
                ris_spacing: 0.125,
                wire_length: 0.5,
                wire_radius: 1.0 / 500.0,
                bundle: None,
            },
            loads: Loads {
                r0_ohm: 0.2,
                x_lb_ohm: -302.50,
                x_ub_ohm: -19.66,
                zg_ohm: Complex64::new(50.0, 0.0),
                zl_ohm: Complex64::new(50.0, 0.0),
                zus_ohm: Complex64::new(0.0, 0.0),
            },
            signal: Signal {
                pt_dbm: 21.0,
                sigma2_dbm: -80.0,
            },
            scatterer: ScattererCfg {
                clusters: 4,
                per_cluster: 50,
                region: [-6.0, 4.0, -2.0, 12.0, 20.0, 2.0],
                cluster_radius: 1.0,
                min_separation: 10.0 / 500.0,
                seed: 1,
            },
            run: RunCfg {
                epsilon: 1e-4,
                max_outer: 100,
                realizations: 100,
                solver: SolverChoice::ClosedForm,
                grid_points: 10_001,
                coupling: CouplingMode::Mca,
                seed: 1,
                ris_cap: 256,
            },
        }
    }
}

impl Scenario {
    /// Parse scenario text, filling unspecified fields with the defaults.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut s = Scenario::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `section.key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let (section, field) = key.split_once('.').ok_or_else(|| Error::Parse {
                line,
                msg: format!("key {key:?} is missing its section prefix"),
            })?;
            s.apply(section, field, value, line)?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn parse_file(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Scenario::parse(&text)
    }

    fn apply(&mut self, section: &str, field: &str, value: &str, line: usize) -> Result<()> {
        match (section, field) {
            ("geometry", "wavelength_m") => self.geometry.wavelength_m = f64_value(value, line)?,
            ("geometry", "tx_count") => self.geometry.tx_count = count_value(value, line)?,
            ("geometry", "tx_center") => self.geometry.tx_center = pair_value(value, line)?,
            ("geometry", "tx_spacing") => self.geometry.tx_spacing = f64_value(value, line)?,
            ("geometry", "rx_count") => self.geometry.rx_count = count_value(value, line)?,
            ("geometry", "rx_position") => self.geometry.rx_position = pair_value(value, line)?,
            ("geometry", "rx_spacing") => self.geometry.rx_spacing = f64_value(value, line)?,
            ("geometry", "ris_count") => self.geometry.ris_count = count_value(value, line)?,
            ("geometry", "ris_center") => self.geometry.ris_center = pair_value(value, line)?,
            ("geometry", "ris_spacing") => self.geometry.ris_spacing = f64_value(value, line)?,
            ("geometry", "wire_length") => self.geometry.wire_length = f64_value(value, line)?,
            ("geometry", "wire_radius") => self.geometry.wire_radius = f64_value(value, line)?,
            ("geometry", "bundle") => self.geometry.bundle = Some(PathBuf::from(value)),
            ("loads", "r0_ohm") => self.loads.r0_ohm = f64_value(value, line)?,
            ("loads", "x_lb_ohm") => self.loads.x_lb_ohm = f64_value(value, line)?,
            ("loads", "x_ub_ohm") => self.loads.x_ub_ohm = f64_value(value, line)?,
            ("loads", "zg_ohm") => self.loads.zg_ohm = complex_value(value, line)?,
            ("loads", "zl_ohm") => self.loads.zl_ohm = complex_value(value, line)?,
            ("loads", "zus_ohm") => self.loads.zus_ohm = complex_value(value, line)?,
            ("signal", "pt_dbm") => self.signal.pt_dbm = f64_value(value, line)?,
            ("signal", "sigma2_dbm") => self.signal.sigma2_dbm = f64_value(value, line)?,
            ("scatterer", "clusters") => self.scatterer.clusters = usize_value(value, line)?,
            ("scatterer", "per_cluster") => self.scatterer.per_cluster = usize_value(value, line)?,
            ("scatterer", "region") => self.scatterer.region = region_value(value, line)?,
            ("scatterer", "cluster_radius") => {
                self.scatterer.cluster_radius = f64_value(value, line)?
            }
            ("scatterer", "min_separation") => {
                self.scatterer.min_separation = f64_value(value, line)?
            }
            ("scatterer", "seed") => self.scatterer.seed = u64_value(value, line)?,
            ("run", "epsilon") => self.run.epsilon = f64_value(value, line)?,
            ("run", "max_outer") => self.run.max_outer = count_value(value, line)?,
            ("run", "realizations") => self.run.realizations = count_value(value, line)?,
            ("run", "solver") => self.run.solver = solver_value(value, line)?,
            ("run", "grid_points") => self.run.grid_points = count_value(value, line)?,
            ("run", "coupling") => self.run.coupling = coupling_value(value, line)?,
            ("run", "seed") => self.run.seed = u64_value(value, line)?,
            ("run", "ris_cap") => self.run.ris_cap = count_value(value, line)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key {section}.{field}"),
                })
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.wavelength_m > 0.0) {
            return Err(Error::Invalid {
                what: "scenario",
                why: "wavelength must be positive".into(),
            });
        }
        for (name, v) in [
            ("tx_spacing", g.tx_spacing),
            ("rx_spacing", g.rx_spacing),
            ("ris_spacing", g.ris_spacing),
            ("wire_length", g.wire_length),
            ("wire_radius", g.wire_radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::Invalid {
                    what: "scenario",
                    why: format!("geometry.{name} must be positive"),
                });
            }
        }
        if g.ris_spacing > 0.5 {
            log::warn!(
                "ris_spacing = {} wavelengths exceeds the sub-wavelength regime (d <= lambda/2)",
                g.ris_spacing
            );
        }
        if g.ris_count > self.run.ris_cap {
            return Err(Error::Unsupported(format!(
                "ris_count {} exceeds the configured cap {}; raise run.ris_cap if intentional",
                g.ris_count, self.run.ris_cap
            )));
        }
        if !(self.loads.x_lb_ohm < self.loads.x_ub_ohm) {
            return Err(Error::Invalid {
                what: "scenario",
                why: "loads.x_lb_ohm must be below loads.x_ub_ohm".into(),
            });
        }
        if !(self.loads.r0_ohm >= 0.0) {
            return Err(Error::Invalid {
                what: "scenario",
                why: "loads.r0_ohm must be non-negative".into(),
            });
        }
        if !self.signal.pt_dbm.is_finite() || !self.signal.sigma2_dbm.is_finite() {
            return Err(Error::Invalid {
                what: "scenario",
                why: "signal powers must be finite dBm values".into(),
            });
        }
        if !(self.run.epsilon >= 0.0) {
            return Err(Error::Invalid {
                what: "scenario",
                why: "run.epsilon must be non-negative".into(),
            });
        }
        if self.run.grid_points < 2 {
            return Err(Error::Invalid {
                what: "scenario",
                why: "run.grid_points must be at least 2".into(),
            });
        }
        let r = &self.scatterer.region;
        if r[0] > r[3] || r[1] > r[4] || r[2] > r[5] {
            return Err(Error::Invalid {
                what: "scenario",
                why: "scatterer.region must be ordered (x0,y0,z0) <= (x1,y1,z1)".into(),
            });
        }
        Ok(())
    }

    /// Build the dipole scene for one scatterer placement seed.
    pub fn build_scene(&self, placement_seed: u64) -> Result<Scene> {
        let g = &self.geometry;
        let lambda = g.wavelength_m;
        let wire_l = g.wire_length * lambda;
        let wire_a = g.wire_radius * lambda;
        let at = |p: (f64, f64)| Vector3::new(p.0 * lambda, p.1 * lambda, 0.0);

        let tx = linear_array(
            at(g.tx_center),
            Vector3::x(),
            g.tx_spacing * lambda,
            g.tx_count,
            wire_l,
            wire_a,
        )?;
        let rx = linear_array(
            at(g.rx_position),
            Vector3::x(),
            g.rx_spacing * lambda,
            g.rx_count,
            wire_l,
            wire_a,
        )?;
        let ris = linear_array(
            at(g.ris_center),
            Vector3::x(),
            g.ris_spacing * lambda,
            g.ris_count,
            wire_l,
            wire_a,
        )?;

        let sc = &self.scatterer;
        let (scatterers, cluster_ids) = if sc.clusters * sc.per_cluster > 0 {
            let spec = ClusterSpec {
                n_clusters: sc.clusters,
                per_cluster: sc.per_cluster,
                region_min: Vector3::new(
                    sc.region[0] * lambda,
                    sc.region[1] * lambda,
                    sc.region[2] * lambda,
                ),
                region_max: Vector3::new(
                    sc.region[3] * lambda,
                    sc.region[4] * lambda,
                    sc.region[5] * lambda,
                ),
                cluster_radius: sc.cluster_radius * lambda,
                min_separation: sc.min_separation * lambda,
                wire_length: wire_l,
                wire_radius: wire_a,
            };
            crate::em::place_clusters(placement_seed, &spec)?
        } else {
            (Vec::new(), Vec::new())
        };

        Scene::new(
            lambda,
            tx,
            rx,
            ris,
            scatterers,
            cluster_ids,
            g.ris_spacing * lambda,
        )
    }

    /// Termination values matching the scene dimensions.
    pub fn terminations(&self, ne: usize) -> Terminations {
        Terminations {
            z_g: vec![self.loads.zg_ohm; self.geometry.tx_count],
            z_l: vec![self.loads.zl_ohm; self.geometry.rx_count],
            z_us: vec![self.loads.zus_ohm; ne],
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.loads.x_lb_ohm, self.loads.x_ub_ohm)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            p_t: self.signal.pt_watts(),
            sigma2: self.signal.sigma2_watts(),
            epsilon: self.run.epsilon,
            max_outer: self.run.max_outer,
            solver: match self.run.solver {
                SolverChoice::ClosedForm => SolverKind::ClosedForm,
                SolverChoice::GridBaseline => SolverKind::GridBaseline {
                    points: self.run.grid_points,
                },
            },
        }
    }
}

fn f64_value(value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a number, got {value:?}"),
    })
}

fn usize_value(value: &str, line: usize) -> Result<usize> {
    value.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a non-negative integer, got {value:?}"),
    })
}

fn count_value(value: &str, line: usize) -> Result<usize> {
    let n = usize_value(value, line)?;
    if n == 0 {
        return Err(Error::Parse {
            line,
            msg: "count must be positive".into(),
        });
    }
    Ok(n)
}

fn u64_value(value: &str, line: usize) -> Result<u64> {
    value.parse::<u64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected an unsigned integer, got {value:?}"),
    })
}

fn split_floats(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| f64_value(part.trim(), line))
        .collect()
}

fn pair_value(value: &str, line: usize) -> Result<(f64, f64)> {
    let parts = split_floats(value, line)?;
    if parts.len() != 2 {
        return Err(Error::Parse {
            line,
            msg: format!("expected `x, y`, got {value:?}"),
        });
    }
    Ok((parts[0], parts[1]))
}

/// `re` or `re, im`.
fn complex_value(value: &str, line: usize) -> Result<Complex64> {
    let parts = split_floats(value, line)?;
    match parts.as_slice() {
        [re] => Ok(Complex64::new(*re, 0.0)),
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(Error::Parse {
            line,
            msg: format!("expected `re` or `re, im`, got {value:?}"),
        }),
    }
}

fn region_value(value: &str, line: usize) -> Result<[f64; 6]> {
    let parts = split_floats(value, line)?;
    parts.as_slice().try_into().map_err(|_| Error::Parse {
        line,
        msg: format!("expected `x0, y0, z0, x1, y1, z1`, got {value:?}"),
    })
}

fn solver_value(value: &str, line: usize) -> Result<SolverChoice> {
    match value.to_ascii_lowercase().as_str() {
        "closed_form" => Ok(SolverChoice::ClosedForm),
        "grid_baseline" => Ok(SolverChoice::GridBaseline),
        _ => Err(Error::Parse {
            line,
            msg: format!("unknown solver {value:?} (closed_form | grid_baseline)"),
        }),
    }
}

fn coupling_value(value: &str, line: usize) -> Result<CouplingMode> {
    match value.to_ascii_lowercase().as_str() {
        "mca" => Ok(CouplingMode::Mca),
        "mcu" => Ok(CouplingMode::Mcu),
        _ => Err(Error::Parse {
            line,
            msg: format!("unknown coupling mode {value:?} (MCA | MCU)"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_text_yields_the_reference_defaults() {
        let s = Scenario::parse("").unwrap();
        assert_eq!(s.run.epsilon, 1e-4);
        assert_eq!(s.run.solver, SolverChoice::ClosedForm);
        assert_eq!(s.geometry.tx_count, 4);
        assert_eq!(s.geometry.rx_count, 1);
        assert_eq!(s.loads.x_lb_ohm, -302.50);
        assert_eq!(s.loads.x_ub_ohm, -19.66);
        assert_eq!(s.scatterer.clusters, 4);
        assert_eq!(s.scatterer.per_cluster, 50);
        assert_eq!(s.run.realizations, 100);
    }

    #[test]
    fn dbm_conversion_hits_the_reference_values() {
        let s = Scenario::parse("signal.pt_dbm = 21\nsignal.sigma2_dbm = -80\n").unwrap();
        assert_relative_eq!(s.signal.pt_watts(), 0.1259, max_relative = 1e-3);
        assert_relative_eq!(s.signal.pt_watts(), 10f64.powf(-0.9), max_relative = 1e-15);
        assert_relative_eq!(s.signal.sigma2_watts(), 1e-11, max_relative = 1e-12);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let text = "geometry.tx_count = 4\n\n# comment\n\ngeometry.ris_count = 8\n\nnot a key value\n";
        match Scenario::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        match Scenario::parse("geometry.txcount = 4\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("unknown key"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_numbers_are_rejected_with_line() {
        match Scenario::parse("signal.pt_dbm = twenty\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn complex_values_accept_both_forms() {
        let s =
            Scenario::parse("loads.zg_ohm = 50\nloads.zus_ohm = 3.0, -2.5\n").unwrap();
        assert_eq!(s.loads.zg_ohm, Complex64::new(50.0, 0.0));
        assert_eq!(s.loads.zus_ohm, Complex64::new(3.0, -2.5));
    }

    #[test]
    fn wide_ris_spacing_parses_with_a_warning() {
        let s = Scenario::parse("geometry.ris_spacing = 0.6\n").unwrap();
        assert_eq!(s.geometry.ris_spacing, 0.6);
    }

    #[test]
    fn ris_cap_is_enforced() {
        let err = Scenario::parse("geometry.ris_count = 300\n").unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(Scenario::parse("run.ris_cap = 512\ngeometry.ris_count = 300\n").is_ok());
    }

    #[test]
    fn scene_matches_the_counts() {
        let mut s = Scenario::default();
        s.scatterer.clusters = 2;
        s.scatterer.per_cluster = 3;
        s.geometry.ris_count = 8;
        let scene = s.build_scene(5).unwrap();
        assert_eq!(scene.counts(), (4, 1, 8, 6));
        // RIS is a centered row along x.
        let xs: Vec<f64> = scene.ris.iter().map(|d| d.center.x).collect();
        let spacing = (xs[1] - xs[0]) / s.geometry.wavelength_m;
        assert_relative_eq!(spacing, 0.125, max_relative = 1e-12);
    }
}
