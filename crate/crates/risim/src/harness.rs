//! Scenario-driven experiment harness.
//!
//! Runs seeded Monte-Carlo realizations of a scenario, writes plot-ready
//! artifacts, sweeps the RIS inter-distance, compares coupling-aware and
//! coupling-unaware design, and drives the oracle cross-check corpus.
//!
//! Reproducibility contract: every numerical output is a pure function of
//! (scenario text, master seed). Realization `r` draws its scatterer
//! placement from stream `scatterer.seed + r` and its initial reactances from
//! stream `run.seed + r`, so runs are deterministic regardless of thread
//! scheduling. Wall-clock measurements are kept out of `trace.csv` and the
//! plot data; they live in `timings.csv` and the summary, which are the only
//! non-reproducible artifacts.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{achievable_rate, end_to_end_channel, reduce_network, ReducedNetwork, RisLoadState};
use crate::em::{assemble_impedance_set, bundle};
use crate::linalg;
use crate::optimizer::{
    bcd_sweep, decouple_element, det_coefficients, grid_sweep, objective, optimal_reactance,
    optimize_rate, waterfill, Branch, DetCoefficients, ElementObjective, SolveOptions,
};
use crate::oracle::{self, OracleReport};
use crate::scenario::{CouplingMode, Scenario};
use crate::synth;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Single realizations
// ---------------------------------------------------------------------------

/// Build the reduced network of one realization: either from the scenario's
/// impedance bundle or by assembling the dipole scene for the realization's
/// placement seed.
pub fn realize_network(s: &Scenario, realization: usize) -> Result<ReducedNetwork> {
    if let Some(path) = &s.geometry.bundle {
        let set = bundle::read_impedance_set(path)?;
        return reduce_network(&set);
    }
    let placement_seed = synth::stream_seed(s.scatterer.seed, realization as u64);
    let scene = s.build_scene(placement_seed)?;
    let ne = scene.counts().3;
    let set = assemble_impedance_set(&scene, &s.terminations(ne))?;
    reduce_network(&set)
}

/// Uniform-random initial reactances for one realization, seeded from the
/// run's master seed.
pub fn initial_loads(s: &Scenario, realization: usize) -> RisLoadState {
    let seed = synth::stream_seed(s.run.seed, realization as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth::random_loads(&mut rng, s.geometry.ris_count, s.bounds(), s.loads.r0_ohm)
}

/// Result of one Monte-Carlo realization.
#[derive(Debug, Clone)]
pub struct RealizationOutcome {
    pub index: usize,
    /// Rate after initialization and after each outer iteration (the design
    /// model's rates when coupling is disregarded).
    pub rates: Vec<f64>,
    /// Final rate evaluated on the true coupled network.
    pub final_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final load state (empty when the realization failed).
    pub loads: Option<RisLoadState>,
    /// Wall-clock seconds per outer iteration.
    pub elapsed: Vec<f64>,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub error: Option<String>,
}

fn run_one(s: &Scenario, index: usize) -> RealizationOutcome {
    let mut outcome = RealizationOutcome {
        index,
        rates: Vec::new(),
        final_rate: f64::NAN,
        iterations: 0,
        converged: false,
        loads: None,
        elapsed: Vec::new(),
        assembly_seconds: 0.0,
        solve_seconds: 0.0,
        error: None,
    };
    let started = Instant::now();
    let net = match realize_network(s, index) {
        Ok(net) => net,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    outcome.assembly_seconds = started.elapsed().as_secs_f64();

    let init = initial_loads(s, index);
    let opts = s.solve_options();
    let solve_started = Instant::now();
    let solved = match s.run.coupling {
        CouplingMode::Mca => optimize_rate(&net, &init, &opts).and_then(|sol| {
            let rate = sol.trace.final_rate();
            Ok((sol, rate))
        }),
        CouplingMode::Mcu => {
            let design = net.with_diagonal_ris_coupling();
            optimize_rate(&design, &init, &opts).and_then(|sol| {
                let rate = coupled_rate(&net, &sol.loads, &opts)?;
                Ok((sol, rate))
            })
        }
    };
    outcome.solve_seconds = solve_started.elapsed().as_secs_f64();

    match solved {
        Ok((solution, final_rate)) => {
            outcome.rates = solution.trace.rates.clone();
            outcome.final_rate = final_rate;
            outcome.iterations = solution.trace.iterations();
            outcome.converged = solution.trace.converged;
            outcome.elapsed = solution.trace.outer_seconds.clone();
            outcome.loads = Some(solution.loads);
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

/// Rate that a load configuration actually achieves on the true network,
/// with the covariance re-waterfilled against the true channel.
pub fn coupled_rate(net: &ReducedNetwork, loads: &RisLoadState, opts: &SolveOptions) -> Result<f64> {
    let h = end_to_end_channel(net, &loads.impedances())?;
    let wf = waterfill(&h, opts.p_t, opts.sigma2)?;
    achievable_rate(&h, &wf.q, opts.sigma2)
}

// ---------------------------------------------------------------------------
// Experiment runs
// ---------------------------------------------------------------------------

/// Aggregated outcome of a run. All aggregates are recomputable from the
/// per-realization records.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcomes: Vec<RealizationOutcome>,
    pub mean_rate: f64,
    pub median_rate: f64,
    pub mean_iterations: f64,
    pub converged_count: usize,
    pub failed_count: usize,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

impl RunSummary {
    fn from_outcomes(outcomes: Vec<RealizationOutcome>) -> RunSummary {
        let ok: Vec<&RealizationOutcome> =
            outcomes.iter().filter(|o| o.error.is_none()).collect();
        let mean_rate = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|o| o.final_rate).sum::<f64>() / ok.len() as f64
        };
        let mut rates: Vec<f64> = ok.iter().map(|o| o.final_rate).collect();
        rates.sort_by(f64::total_cmp);
        let median_rate = if rates.is_empty() {
            f64::NAN
        } else if rates.len() % 2 == 1 {
            rates[rates.len() / 2]
        } else {
            0.5 * (rates[rates.len() / 2 - 1] + rates[rates.len() / 2])
        };
        let mean_iterations = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|o| o.iterations as f64).sum::<f64>() / ok.len() as f64
        };
        RunSummary {
            mean_rate,
            median_rate,
            mean_iterations,
            converged_count: ok.iter().filter(|o| o.converged).count(),
            failed_count: outcomes.len() - ok.len(),
            assembly_seconds: outcomes.iter().map(|o| o.assembly_seconds).sum(),
            solve_seconds: outcomes.iter().map(|o| o.solve_seconds).sum(),
            outcomes,
        }
    }

    /// Exit-code contract: 0 all realizations completed, 1 partial failures.
    pub fn exit_code(&self) -> i32 {
        if self.failed_count == 0 {
            0
        } else {
            1
        }
    }
}

/// Run all realizations of a scenario (concurrently; outputs are ordered and
/// deterministic for fixed seeds) and optionally write the artifact files.
pub fn run_experiment(s: &Scenario, out_dir: Option<&Path>) -> Result<RunSummary> {
    let outcomes: Vec<RealizationOutcome> = (0..s.run.realizations)
        .into_par_iter()
        .map(|r| run_one(s, r))
        .collect();
    for o in &outcomes {
        if let Some(err) = &o.error {
            log::warn!("realization {} failed: {err}", o.index);
        }
    }
    let summary = RunSummary::from_outcomes(outcomes);
    if let Some(dir) = out_dir {
        write_artifacts(dir, &summary)?;
    }
    Ok(summary)
}

fn write_artifacts(dir: &Path, summary: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;

    // trace.csv: deterministic content only.
    let mut trace = String::from("realization,iter,rate_bps_hz\n");
    for o in &summary.outcomes {
        for (iter, rate) in o.rates.iter().enumerate() {
            trace.push_str(&format!("{},{},{}\n", o.index, iter, rate));
        }
    }
    let trace_path = dir.join("trace.csv");
    std::fs::write(&trace_path, trace).map_err(Error::io(&trace_path))?;

    // timings.csv: wall clock, intentionally separate from the trace.
    let mut timings = String::from("realization,iter,elapsed_s\n");
    for o in &summary.outcomes {
        for (i, secs) in o.elapsed.iter().enumerate() {
            timings.push_str(&format!("{},{},{}\n", o.index, i + 1, secs));
        }
    }
    let timings_path = dir.join("timings.csv");
    std::fs::write(&timings_path, timings).map_err(Error::io(&timings_path))?;

    let plot_path = dir.join("rate_vs_iter.csv");
    std::fs::write(&plot_path, plot_data(summary)).map_err(Error::io(&plot_path))?;

    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, render_summary(summary)).map_err(Error::io(&summary_path))?;
    Ok(())
}

/// Mean and standard deviation of the rate per outer iteration across the
/// successful realizations; converged realizations hold their final value.
fn plot_data(summary: &RunSummary) -> String {
    let ok: Vec<&RealizationOutcome> = summary
        .outcomes
        .iter()
        .filter(|o| o.error.is_none() && !o.rates.is_empty())
        .collect();
    let mut out = String::from("iter,mean_rate_bps_hz,std_rate_bps_hz,realizations\n");
    if ok.is_empty() {
        return out;
    }
    let max_len = ok.iter().map(|o| o.rates.len()).max().unwrap();
    for iter in 0..max_len {
        let samples: Vec<f64> = ok
            .iter()
            .map(|o| o.rates[iter.min(o.rates.len() - 1)])
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / samples.len() as f64;
        out.push_str(&format!("{},{},{},{}\n", iter, mean, var.sqrt(), samples.len()));
    }
    out
}

fn render_summary(summary: &RunSummary) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!(
        "  \"realizations\": {},\n",
        summary.outcomes.len()
    ));
    out.push_str(&format!("  \"converged\": {},\n", summary.converged_count));
    out.push_str(&format!("  \"failed\": {},\n", summary.failed_count));
    out.push_str(&format!("  \"mean_rate_bps_hz\": {},\n", summary.mean_rate));
    out.push_str(&format!(
        "  \"median_rate_bps_hz\": {},\n",
        summary.median_rate
    ));
    out.push_str(&format!(
        "  \"mean_iterations\": {},\n",
        summary.mean_iterations
    ));
    out.push_str(&format!(
        "  \"assembly_seconds\": {},\n",
        summary.assembly_seconds
    ));
    out.push_str(&format!("  \"solve_seconds\": {},\n", summary.solve_seconds));
    out.push_str("  \"per_realization\": [\n");
    for (i, o) in summary.outcomes.iter().enumerate() {
        let sep = if i + 1 == summary.outcomes.len() { "" } else { "," };
        match &o.error {
            None => out.push_str(&format!(
                "    {{\"index\": {}, \"final_rate_bps_hz\": {}, \"iterations\": {}, \"converged\": {}}}{}\n",
                o.index, o.final_rate, o.iterations, o.converged, sep
            )),
            Some(err) => out.push_str(&format!(
                "    {{\"index\": {}, \"error\": {:?}}}{}\n",
                o.index, err, sep
            )),
        }
    }
    out.push_str("  ]\n}\n");
    out
}

/// Assemble the scenario's impedance set (placement stream 0) and write it as
/// a bundle.
pub fn export_impedances(s: &Scenario, out: &Path) -> Result<()> {
    let placement_seed = synth::stream_seed(s.scatterer.seed, 0);
    let scene = s.build_scene(placement_seed)?;
    let ne = scene.counts().3;
    let set = assemble_impedance_set(&scene, &s.terminations(ne))?;
    bundle::write_impedance_set(&set, out)
}

// ---------------------------------------------------------------------------
// Coupling comparison (MCA warm-started from MCU)
// ---------------------------------------------------------------------------

/// Coupled-channel rates of one realization under both design models.
#[derive(Debug, Clone)]
pub struct CouplingComparison {
    pub realization: usize,
    /// Rate of the coupling-unaware solution, evaluated on the true network.
    pub mcu_rate: f64,
    /// Rate after re-optimizing on the true network, warm-started from the
    /// coupling-unaware solution.
    pub mca_rate: f64,
}

/// For each realization: optimize with the off-diagonal RIS coupling zeroed,
/// evaluate on the true network, then re-optimize on the true network from
/// that warm start. Monotone ascent guarantees `mca_rate >= mcu_rate`.
pub fn compare_coupling(s: &Scenario) -> Result<Vec<CouplingComparison>> {
    (0..s.run.realizations)
        .into_par_iter()
        .map(|r| {
            let net = realize_network(s, r)?;
            let init = initial_loads(s, r);
            let opts = s.solve_options();
            let design = net.with_diagonal_ris_coupling();
            let mcu = optimize_rate(&design, &init, &opts)?;
            let mcu_rate = coupled_rate(&net, &mcu.loads, &opts)?;
            let mca = optimize_rate(&net, &mcu.loads, &opts)?;
            Ok(CouplingComparison {
                realization: r,
                mcu_rate,
                mca_rate: mca.trace.final_rate(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Spacing sweeps
// ---------------------------------------------------------------------------

/// How the RIS reacts to a change of the inter-element distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApertureMode {
    /// Keep the physical aperture: the element count scales inversely with d.
    FixedAperture,
    /// Keep the element count: the aperture shrinks with d.
    FixedCount,
}

impl ApertureMode {
    pub fn label(&self) -> &'static str {
        match self {
            ApertureMode::FixedAperture => "fixed_aperture",
            ApertureMode::FixedCount => "fixed_count",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub d_over_lambda: f64,
    pub n_ris: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub mode: ApertureMode,
    pub coupling: CouplingMode,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("d_over_lambda,n_ris,mode,coupling,mean_rate_bps_hz,std_rate_bps_hz,realizations\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.d_over_lambda,
                row.n_ris,
                self.mode.label(),
                self.coupling.label(),
                row.mean_rate,
                row.std_rate,
                row.realizations
            ));
        }
        out
    }
}

/// Rate at convergence versus the RIS inter-distance.
pub fn sweep_spacing(s: &Scenario, d_values: &[f64], mode: ApertureMode) -> Result<SweepTable> {
    if d_values.is_empty() {
        return Err(Error::Invalid {
            what: "spacing sweep",
            why: "d_values must be non-empty".into(),
        });
    }
    let aperture = s.geometry.ris_count as f64 * s.geometry.ris_spacing;
    let mut rows = Vec::with_capacity(d_values.len());
    for &d in d_values {
        if !(d > 0.0) {
            return Err(Error::Invalid {
                what: "spacing sweep",
                why: format!("d must be positive, got {d}"),
            });
        }
        if d > 0.5 {
            log::warn!("sweep point d = {d} wavelengths is outside the sub-wavelength regime");
        }
        let n_ris = match mode {
            ApertureMode::FixedAperture => (aperture / d).round().max(1.0) as usize,
            ApertureMode::FixedCount => s.geometry.ris_count,
        };
        if n_ris > s.run.ris_cap {
            return Err(Error::Unsupported(format!(
                "fixed-aperture point d = {d} needs {n_ris} RIS elements, above the cap {}; \
                 raise run.ris_cap or drop the smallest spacings",
                s.run.ris_cap
            )));
        }
        let mut point = s.clone();
        point.geometry.ris_count = n_ris;
        point.geometry.ris_spacing = d;
        let summary = run_experiment(&point, None)?;
        let ok: Vec<f64> = summary
            .outcomes
            .iter()
            .filter(|o| o.error.is_none())
            .map(|o| o.final_rate)
            .collect();
        if ok.is_empty() {
            return Err(Error::Unsupported(format!(
                "every realization failed at sweep point d = {d}"
            )));
        }
        let mean = ok.iter().sum::<f64>() / ok.len() as f64;
        let var = ok.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / ok.len() as f64;
        rows.push(SweepRow {
            d_over_lambda: d,
            n_ris,
            mean_rate: mean,
            std_rate: var.sqrt(),
            realizations: ok.len(),
        });
    }
    Ok(SweepTable {
        mode,
        coupling: s.run.coupling,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Update-rule timing (closed form vs grid)
// ---------------------------------------------------------------------------

/// Median seconds per element update for the closed-form rule and for a
/// brute-force grid of `grid_points`, measured on identical decoupled
/// coefficients.
pub fn time_update_rules(
    net: &ReducedNetwork,
    loads: &RisLoadState,
    q: &linalg::CMatrix,
    sigma2: f64,
    grid_points: usize,
    repeats: usize,
) -> Result<(f64, f64)> {
    let mut coeff_set: Vec<DetCoefficients> = Vec::new();
    for k in 0..loads.len() {
        let d = decouple_element(net, loads, k)?;
        if let ElementObjective::Active(c) = det_coefficients(&d, q, sigma2, loads.r0()[k])? {
            coeff_set.push(c);
        }
    }
    if coeff_set.is_empty() {
        return Err(Error::Unsupported(
            "no active elements to time".into(),
        ));
    }
    let bounds = loads.bounds();

    let time_rule = |rule: &dyn Fn(&DetCoefficients) -> f64| -> f64 {
        let mut samples: Vec<f64> = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let started = Instant::now();
            let mut sink = 0.0;
            for c in &coeff_set {
                sink += rule(c);
            }
            let elapsed = started.elapsed().as_secs_f64() / coeff_set.len() as f64;
            std::hint::black_box(sink);
            samples.push(elapsed);
        }
        samples.sort_by(f64::total_cmp);
        samples[samples.len() / 2]
    };

    let closed = time_rule(&|c| optimal_reactance(c, bounds).map(|(x, _)| x).unwrap_or(0.0));
    let grid = time_rule(&|c| oracle::grid_max_f(c, bounds, grid_points).0);
    Ok((closed, grid))
}

// ---------------------------------------------------------------------------
// Oracle verification corpus
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    /// Seconds-scale corpus.
    Quick,
    /// Acceptance-scale corpus.
    Full,
}

/// One named cross-check with its tolerance verdict.
#[derive(Debug, Clone)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub report: OracleReport,
    pub tolerance: f64,
    pub passed: bool,
}

fn finish(name: &'static str, report: OracleReport, tolerance: f64) -> VerifyCheck {
    let passed = report.max_relative_error <= tolerance;
    VerifyCheck {
        name,
        report,
        tolerance,
        passed,
    }
}

/// Run the oracle cross-check corpus. Breaches are reported, not panicked.
pub fn verify(level: VerifyLevel) -> Vec<VerifyCheck> {
    let quick = level == VerifyLevel::Quick;
    let mut checks = Vec::new();

    // Rank-one inversion identity against the dense oracle inverse.
    {
        let samples = if quick { 50 } else { 200 };
        let mut report = OracleReport::new();
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA1, i as u64));
            let n = 2 + (i % 63).min(62);
            let a = synth::random_invertible(&mut rng, n);
            let k = i % n;
            let z = synth::random_complex(&mut rng, 50.0);
            let err = match crate::optimizer::zsca_sherman_morrison(&a, k, z) {
                Ok(fast) => {
                    let mut perturbed = a.clone();
                    perturbed[(k, k)] += z;
                    match oracle::DenseMat::from_dmatrix(&perturbed).inverse() {
                        Ok(dense) => linalg::rel_frobenius(&fast, &dense.to_dmatrix()),
                        Err(_) => f64::INFINITY,
                    }
                }
                Err(_) => f64::INFINITY,
            };
            report.record(err, || format!("sherman_morrison sample {i} (n={n})"));
        }
        checks.push(finish("sherman_morrison", report, 1e-10));
    }

    // Closed-form det(S_k) against the full determinant ratio.
    {
        let (instances, z_samples) = if quick { (30, 20) } else { (200, 50) };
        let mut report = OracleReport::new();
        for i in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA2, i as u64));
            let l = 1 + i % 3;
            let m = 2;
            let n = 3 + i % 4;
            let net = synth::random_reduced_network(&mut rng, l, m, n);
            let loads = synth::random_loads(&mut rng, n, (-302.5, -19.66), 0.2);
            let q = synth::random_psd(&mut rng, m, 0.05);
            let sigma2 = 1e-3;
            let k = i % n;
            let d = match decouple_element(&net, &loads, k) {
                Ok(d) => d,
                Err(_) => {
                    report.record(f64::INFINITY, || format!("det_identity instance {i}"));
                    continue;
                }
            };
            let coeffs = match det_coefficients(&d, &q, sigma2, loads.r0()[k]) {
                Ok(ElementObjective::Active(c)) => c,
                _ => continue,
            };
            let u_mat = linalg::CMatrix::from_column_slice(l, 1, d.u.as_slice());
            let v_mat = linalg::CMatrix::from_column_slice(m, 1, d.v.as_slice());
            for sample in 0..z_samples {
                let x = -302.5 + (302.5 - 19.66) * (sample as f64 / (z_samples - 1) as f64);
                let chi =
                    num_complex::Complex64::new(1.0, 0.0) + coeffs.a * num_complex::Complex64::new(coeffs.r0, x);
                let closed = objective(&coeffs, x);
                let err = match oracle::det_ratio(&d.b, &u_mat, &v_mat, &q, sigma2, chi) {
                    Ok(ratio) => (closed - ratio).abs() / ratio.abs().max(1e-300),
                    Err(_) => f64::INFINITY,
                };
                report.record(err, || format!("det_identity instance {i} sample {sample}"));
            }
        }
        checks.push(finish("det_identity", report, 1e-9));
    }

    // Closed-form maximizer against the dense grid, plus branch coverage.
    {
        let (tuples, grid) = if quick { (200, 20_001) } else { (1000, 100_001) };
        let mut report = OracleReport::new();
        let mut seen = [false; 5];
        for i in 0..tuples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA3, i as u64));
            let class = synth::random_coefficient_class(&mut rng);
            let (coeffs, bounds) = synth::random_det_coefficients(&mut rng, class);
            let err = match optimal_reactance(&coeffs, bounds) {
                Ok((x_star, branch)) => {
                    seen[branch.index()] = true;
                    let f_star = objective(&coeffs, x_star);
                    let (_, f_grid) = oracle::grid_max_f(&coeffs, bounds, grid);
                    (f_grid - f_star).max(0.0)
                }
                Err(_) => f64::INFINITY,
            };
            report.record(err, || format!("prop1 tuple {i} ({class:?})"));
        }
        checks.push(finish("prop1_grid", report, 1e-9));

        let missing: Vec<&str> = Branch::ALL
            .iter()
            .filter(|b| !seen[b.index()])
            .map(|b| b.label())
            .collect();
        let mut coverage = OracleReport::new();
        coverage.record(missing.len() as f64, || {
            if missing.is_empty() {
                "all branches fired".to_string()
            } else {
                format!("missing branches: {}", missing.join(", "))
            }
        });
        checks.push(finish("prop1_branches", coverage, 0.0));
    }

    // Port reduction against scalar Gaussian elimination.
    {
        let samples = if quick { 25 } else { 100 };
        let mut report = OracleReport::new();
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA4, i as u64));
            let m = 1 + i % 4;
            let l = 1 + (i / 2) % 4;
            let n = 2 + i % 15;
            let ne = 1 + i % 8;
            let z = synth::random_impedance_set(&mut rng, m, l, n, ne);
            let err = match (reduce_network(&z), oracle::dense_reduced_blocks(&z)) {
                (Ok(net), Ok(oracle_net)) => [
                    linalg::rel_frobenius(&net.z_rot, &oracle_net.z_rot.to_dmatrix()),
                    linalg::rel_frobenius(&net.z_ros, &oracle_net.z_ros.to_dmatrix()),
                    linalg::rel_frobenius(&net.z_sos, &oracle_net.z_sos.to_dmatrix()),
                    linalg::rel_frobenius(&net.z_sot, &oracle_net.z_sot.to_dmatrix()),
                    linalg::rel_frobenius(&net.z_rl, &oracle_net.z_rl.to_dmatrix()),
                    linalg::rel_frobenius(&net.z_tg, &oracle_net.z_tg.to_dmatrix()),
                ]
                .into_iter()
                .fold(0.0, f64::max),
                _ => f64::INFINITY,
            };
            report.record(err, || format!("reduction sample {i} (m={m} l={l} n={n} ne={ne})"));
        }
        checks.push(finish("reduction", report, 1e-9));
    }

    // Direct channel vs the per-element decoupled reconstruction.
    {
        let samples = if quick { 25 } else { 100 };
        let mut report = OracleReport::new();
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA5, i as u64));
            let l = 1 + i % 3;
            let n = 2 + i % 8;
            let net = synth::random_reduced_network(&mut rng, l, 2, n);
            let loads = synth::random_loads(&mut rng, n, (-302.5, -19.66), 0.2);
            let err = channel_consistency_error(&net, &loads);
            report.record(err, || format!("consistency sample {i} (l={l} n={n})"));
        }
        checks.push(finish("channel_consistency", report, 1e-10));
    }

    // Factored channel vs the explicit-inverse transcription.
    {
        let samples = if quick { 15 } else { 50 };
        let mut report = OracleReport::new();
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA6, i as u64));
            let z = synth::random_impedance_set(&mut rng, 2, 2, 4, 3);
            let loads = synth::random_loads(&mut rng, 4, (-302.5, -19.66), 0.2);
            let err = match reduce_network(&z)
                .and_then(|net| end_to_end_channel(&net, &loads.impedances()))
            {
                Ok(h) => match oracle::dense_channel(&z, loads.impedances().as_slice()) {
                    Ok(dense) => linalg::rel_frobenius(&h, &dense.to_dmatrix()),
                    Err(_) => f64::INFINITY,
                },
                Err(_) => f64::INFINITY,
            };
            report.record(err, || format!("channel sample {i}"));
        }
        checks.push(finish("channel_oracle", report, 1e-9));
    }

    // Cholesky rate vs naive determinant rate.
    {
        let samples = if quick { 25 } else { 100 };
        let mut report = OracleReport::new();
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA7, i as u64));
            let l = 1 + i % 4;
            let m = 1 + (i / 3) % 4;
            let h = synth::random_matrix(&mut rng, l, m, 1.0);
            let q = synth::random_psd(&mut rng, m, 0.1);
            let err = match (
                achievable_rate(&h, &q, 1e-2),
                oracle::dense_logdet_rate(&h, &q, 1e-2),
            ) {
                (Ok(a), Ok(b)) => (a - b).abs() / b.abs().max(1e-300),
                _ => f64::INFINITY,
            };
            report.record(err, || format!("rate sample {i}"));
        }
        checks.push(finish("rate_oracle", report, 1e-9));
    }

    // Water-filling budget and KKT conditions.
    {
        let samples = if quick { 25 } else { 100 };
        let mut report = OracleReport::new();
        for i in 0..samples {
            let mut rng = ChaCha8Rng::seed_from_u64(synth::stream_seed(0xA8, i as u64));
            let l = 1 + i % 4;
            let m = 1 + (i / 2) % 5;
            let h = synth::random_matrix(&mut rng, l, m, 1.0);
            let p_t = 0.1259;
            let sigma2 = 0.01;
            let err = match waterfill(&h, p_t, sigma2) {
                Ok(wf) => {
                    let budget = (wf.q.trace().re - p_t).abs() / p_t;
                    let mut kkt = 0.0_f64;
                    for (p, s) in wf.powers.iter().zip(&wf.singular_values) {
                        let n = sigma2 / (s * s);
                        if *p > 0.0 {
                            kkt = kkt.max(((p + n) - wf.water_level).abs() / wf.water_level);
                        } else if wf.water_level > n {
                            kkt = kkt.max((wf.water_level - n) / wf.water_level);
                        }
                    }
                    budget.max(kkt)
                }
                Err(_) => f64::INFINITY,
            };
            report.record(err, || format!("waterfill sample {i}"));
        }
        checks.push(finish("waterfill", report, 1e-8));
    }

    checks
}

/// Worst relative disagreement between the direct channel and every
/// single-element decoupled reconstruction.
pub fn channel_consistency_error(net: &ReducedNetwork, loads: &RisLoadState) -> f64 {
    let h_direct = match end_to_end_channel(net, &loads.impedances()) {
        Ok(h) => h,
        Err(_) => return f64::INFINITY,
    };
    let mut worst = 0.0_f64;
    for k in 0..loads.len() {
        match decouple_element(net, loads, k) {
            Ok(d) => {
                let chi = num_complex::Complex64::new(1.0, 0.0) + d.a_k * loads.impedance(k);
                let rec = &d.b + (&d.u * d.v.adjoint()).map(|v| v / chi);
                worst = worst.max(linalg::rel_frobenius(&rec, &h_direct));
            }
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

#[cfg(test)]
mod tests;
