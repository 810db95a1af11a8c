//! Dispatch from a validated [`RunConfig`] to the simulation routines.

use std::path::PathBuf;

use serde_json::{json, Map, Value};
use sternpath::analytic::{evolve_packet, samples_csv};
use sternpath::classical::classical_ensemble;
use sternpath::density::{coherence_norm, density_matrix_z, sweep_csv, Variant};
use sternpath::experiments::{
    backtrack_collapse, detect_bimodality, detector_times, recombine, sandwich, LayerStack, SandwichOptions,
};
use sternpath::io::{num, CsvTable};
use sternpath::meanfield::{l1_distance, meanfield_ensemble, meanfield_evolve, EnsembleModel};
use sternpath::model::Branch;
use sternpath::oracle::compare_analytic_oracle;
use sternpath::quad::linspace;
use sternpath::{Apparatus, BinSpec, GaussianPacket, SpinorField, Timing};

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{json_text, write_atomic};

/// Widths kept on each side of the outermost branch on sampled z lines.
const LINE_MARGIN: f64 = 6.0;

/// Files produced by one run and its summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    summary: String,
    results: Value,
    csv: Vec<(String, String)>,
}

fn ser<T: serde::Serialize>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Numeric(format!("cannot encode report: {e}")))
}

/// Validates `config`, runs its experiment and writes `<name>.json` plus
/// any CSV files into `config.out`.
pub fn run(config: &RunConfig) -> CliResult<RunOutcome> {
    config.validate()?;
    let packet = config.build_packet()?;
    let timing = config.timing()?;
    let art = match config.experiment {
        Experiment::Classical => classical(config, &packet, &timing)?,
        Experiment::Evolve => evolve(config, &packet, &timing)?,
        Experiment::Density => density(config, &packet, &timing)?,
        Experiment::Meanfield => meanfield(config, &packet, &timing)?,
        Experiment::OracleCompare => oracle(config, &packet, &timing)?,
        Experiment::Backtrack => backtrack(config, &packet)?,
        Experiment::Recombine => recombination(config, &packet)?,
        Experiment::Sandwich => sandwich_run(config, &packet, &timing)?,
    };
    let name = config.experiment.name();
    let inputs: Map<String, Value> = config
        .pairs()
        .into_iter()
        .filter(|(k, _)| *k != "run.out")
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect();
    let report = json!({
        "experiment": name,
        "inputs": inputs,
        "derived": ser(&timing)?,
        "results": art.results,
    });
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", config.out.display())))?;
    let mut files = Vec::new();
    for (file, text) in &art.csv {
        files.push(write_atomic(&config.out, file, text)?);
    }
    files.push(write_atomic(&config.out, &format!("{name}.json"), &json_text(&report))?);
    Ok(RunOutcome { summary: format!("{name}: {}", art.summary), files })
}

fn classical(c: &RunConfig, p: &GaussianPacket, tm: &Timing) -> CliResult<Artifacts> {
    let bins = BinSpec::symmetric(tm.z_max, c.bins)?;
    let h = classical_ensemble(c.n, c.seed, &c.apparatus, p, &c.units, &bins)?;
    let prob = bins.width() / (2.0 * tm.z_max);
    let se = (prob * (1.0 - prob) / c.n as f64).sqrt();
    let interior = if h.counts.len() > 2 { &h.counts[1..h.counts.len() - 1] } else { &h.counts[..] };
    let worst = interior.iter().map(|&k| (k as f64 / c.n as f64 - prob).abs() / se).fold(0.0, f64::max);
    Ok(Artifacts {
        summary: format!(
            "n = {}, {} bins over +/-{}, worst interior bin {worst:.2} standard errors from flat",
            c.n,
            c.bins,
            num(tm.z_max)
        ),
        results: json!({
            "z_max": tm.z_max,
            "expected_bin_fraction": prob,
            "bin_standard_error": se,
            "worst_interior_deviation_se": worst,
            "n_total": h.n_total,
            "underflow": h.underflow,
            "overflow": h.overflow,
        }),
        csv: vec![("classical_histogram.csv".into(), h.to_csv())],
    })
}

/// Evenly spaced z values covering both branches.
fn z_line(field: &SpinorField, points: usize) -> Vec<f64> {
    let (a, b) = (field.branch_center(Branch::Plus), field.branch_center(Branch::Minus));
    let margin = LINE_MARGIN * field.width();
    linspace(a.min(b) - margin, a.max(b) + margin, points)
}

fn evolve(c: &RunConfig, p: &GaussianPacket, tm: &Timing) -> CliResult<Artifacts> {
    let t = c.eval_time(tm);
    let field = evolve_packet(p, &c.apparatus, &c.units, t)?;
    let zs = z_line(&field, c.points);
    let mut table = CsvTable::new(&["z", "density", "density_plus", "density_minus"]);
    let mut marginal = Vec::with_capacity(zs.len());
    for &z in &zs {
        let part = |b: Branch| (field.z_amplitude(b, z) * p.chi(b)).norm_sqr();
        let total = field.z_density(z);
        marginal.push(total);
        table.row(&[num(z), num(total), num(part(Branch::Plus)), num(part(Branch::Minus))]);
    }
    let peaks = detect_bimodality(&marginal, &zs)?;
    Ok(Artifacts {
        summary: format!(
            "t = {}, {} peak(s) at {:?}, separation {:.3} widths",
            num(t),
            peaks.peaks,
            peaks.positions.iter().map(|&z| num(z)).collect::<Vec<_>>(),
            field.separation()
        ),
        results: json!({
            "t": t,
            "center_plus": field.branch_center(Branch::Plus),
            "center_minus": field.branch_center(Branch::Minus),
            "width": field.width(),
            "separation_widths": field.separation(),
            "peaks": ser(&peaks)?,
        }),
        csv: vec![
            ("evolve_marginal.csv".into(), table.finish()),
            ("evolve_field.csv".into(), samples_csv(&field.sample_z_line(&zs))),
        ],
    })
}

fn density(c: &RunConfig, p: &GaussianPacket, tm: &Timing) -> CliResult<Artifacts> {
    let t = c.eval_time(tm);
    let field = evolve_packet(p, &c.apparatus, &c.units, t)?;
    let zs = z_line(&field, c.points);
    let mut rows = Vec::with_capacity(2 * zs.len());
    let (mut trace_gap, mut min_eig) = (0.0f64, f64::INFINITY);
    for &z in &zs {
        let free = density_matrix_z(&field, z, Variant::CollapseFree);
        let col = density_matrix_z(&field, z, Variant::Collapsed);
        trace_gap = trace_gap.max((free.trace() - col.trace()).abs());
        min_eig = min_eig.min(free.min_eigenvalue());
        rows.push(free);
        rows.push(col);
    }
    let coherence = coherence_norm(&field);
    Ok(Artifacts {
        summary: format!(
            "t = {}, separation {:.3} widths, coherence {}, max trace difference {}",
            num(t),
            field.separation(),
            num(coherence),
            num(trace_gap)
        ),
        results: json!({
            "t": t,
            "separation_widths": field.separation(),
            "coherence_norm": coherence,
            "spin_weight": (p.chi_plus * p.chi_minus).norm(),
            "max_trace_difference": trace_gap,
            "min_eigenvalue": min_eig,
        }),
        csv: vec![("density_sweep.csv".into(), sweep_csv(&rows))],
    })
}

fn meanfield(c: &RunConfig, p: &GaussianPacket, tm: &Timing) -> CliResult<Artifacts> {
    let t = c.eval_time(tm);
    let model = EnsembleModel::new(p, &c.apparatus, &c.units, t)?;
    let reach = model.reach + 4.0 * model.sd;
    let bins = BinSpec::new(model.z_a - reach, model.z_a + reach, c.bins)?;
    let h = meanfield_ensemble(c.n, c.seed, p, &c.apparatus, &c.units, t, &bins)?;
    let probs = model.bin_probabilities(&bins);
    let mut table = CsvTable::new(&["bin_lo", "bin_hi", "count", "expected"]);
    let (mut chi2, mut used) = (0.0, 0usize);
    for (i, (&k, &q)) in h.counts.iter().zip(&probs).enumerate() {
        let expected = q * c.n as f64;
        table.row(&[num(h.edges[i]), num(h.edges[i + 1]), k.to_string(), num(expected)]);
        if expected > 0.0 {
            chi2 += (k as f64 - expected).powi(2) / expected;
            used += 1;
        }
    }
    let single = meanfield_evolve(c.packet.beta, p, &c.apparatus, &c.units, t)?;
    let l1 = l1_distance(p, &c.apparatus, &c.units, t)?;
    Ok(Artifacts {
        summary: format!("t = {}, n = {}, chi2 = {chi2:.2} over {used} bins", num(t), c.n),
        results: json!({
            "t": t,
            "model": ser(&model)?,
            "chi2": chi2,
            "chi2_bins": used,
            "l1_distance_to_entangled": l1,
            "underflow": h.underflow,
            "overflow": h.overflow,
            "single_spin": {
                "beta": c.packet.beta,
                "mean_moment": single.mean_moment(),
                "kick": single.kick(),
                "center": single.center(),
            },
        }),
        csv: vec![("meanfield_histogram.csv".into(), table.finish())],
    })
}

fn oracle(c: &RunConfig, p: &GaussianPacket, tm: &Timing) -> CliResult<Artifacts> {
    let t = c.eval_time(tm);
    let report = compare_analytic_oracle(p, &c.apparatus, &c.units, t, &c.grid)?;
    Ok(Artifacts {
        summary: format!(
            "t = {}, {} points, L2 error plus {:.3e} minus {:.3e}, norm {}",
            num(t),
            report.grid.n_points,
            report.l2_error_plus,
            report.l2_error_minus,
            num(report.norm)
        ),
        results: ser(&report)?,
        csv: Vec::new(),
    })
}

fn backtrack(c: &RunConfig, p: &GaussianPacket) -> CliResult<Artifacts> {
    let times = detector_times(p, &c.apparatus, &c.units, c.detectors)?;
    let r = backtrack_collapse(p, &c.apparatus, &c.units, &times)?;
    let mut table = CsvTable::new(&["t", "centroid_plus", "centroid_minus"]);
    for ((&t, &a), &b) in r.times.iter().zip(&r.centroids_plus).zip(&r.centroids_minus) {
        table.row(&[num(t), num(a), num(b)]);
    }
    Ok(Artifacts {
        summary: format!(
            "y_collapse = {}, field centre {}, residual {:.3e}",
            num(r.y_collapse),
            num(r.y_bar),
            r.residual
        ),
        results: ser(&r)?,
        csv: vec![("backtrack_centroids.csv".into(), table.finish())],
    })
}

/// Stage of the same length right after `a`, with the gradient reversed.
fn reversing_stage(a: &Apparatus) -> CliResult<Apparatus> {
    let dy = a.dy();
    Ok(Apparatus::new(a.y_a, a.y_c, a.y_c + dy, a.y_d, -a.grad_bz)?)
}

fn recombination(c: &RunConfig, p: &GaussianPacket) -> CliResult<Artifacts> {
    let second = if c.second_stage { Some(reversing_stage(&c.apparatus)?) } else { None };
    let r = recombine(p, &c.apparatus, second.as_ref(), &c.units, c.phase_error)?;
    Ok(Artifacts {
        summary: format!(
            "{} stage(s), overlap {}, fidelity {}",
            1 + usize::from(second.is_some()),
            num(r.overlap),
            num(r.fidelity)
        ),
        results: json!({ "report": ser(&r)?, "second_stage": second.as_ref().map(ser).transpose()? }),
        csv: Vec::new(),
    })
}

fn sandwich_run(c: &RunConfig, p: &GaussianPacket, tm: &Timing) -> CliResult<Artifacts> {
    let t = c.eval_time(tm);
    let stack = LayerStack::from_apparatus(&c.apparatus)?;
    let opts = SandwichOptions {
        n_points: c.sandwich_n_points,
        max_dt: c.sandwich_max_dt,
        bins: c.bins,
        samples: c.n,
        seed: c.seed,
    };
    let r = sandwich(p, &stack, &c.units, t, &opts)?;
    let mut table = CsvTable::new(&["z", "density"]);
    for (z, d) in r.grid.points().into_iter().zip(&r.profile) {
        table.row(&[num(z), num(*d)]);
    }
    Ok(Artifacts {
        summary: format!(
            "t = {}, kappa {:?}, {} peak(s), norm {}",
            num(t),
            r.kappas.iter().map(|&k| num(k)).collect::<Vec<_>>(),
            r.peaks.peaks,
            num(r.norm)
        ),
        results: json!({
            "t": t,
            "peaks": ser(&r.peaks)?,
            "kappas": r.kappas,
            "norm": r.norm,
            "grid": ser(&r.grid)?,
        }),
        csv: vec![
            ("sandwich_profile.csv".into(), table.finish()),
            ("sandwich_histogram.csv".into(), r.histogram.to_csv()),
        ],
    })
}
