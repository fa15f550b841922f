use std::path::PathBuf;

use cavity_purify::channel::{channel_spectrum, ghz_preservation_check, ConditionalChannel, TRAPPING_TOL};
use cavity_purify::closed_form::{reference_curve, FormulaVariant, Prediction};
use cavity_purify::protocol::{run_purification, sample_survival, ProtocolResult, StepRecord, Termination};
use cavity_purify::states::{make_named_state, StateLabel};
use cavity_purify::verify::{self, VerifyOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{ProtocolArgs, SpectrumArgs, SweepArgs, VerifyArgs};
use crate::config::{
    parse_count, resolve_format, resolve_physics, resolve_run, resolve_seed, ConfigFile, Format,
    Lookup, Physics, RunSettings, DEFAULT_MAX_POINTS,
};
use crate::error::{CliError, CliResult};
use crate::output::{emit, json, Cell, Csv};

fn lookup(flags: &[(&'static str, Option<&String>)], config: Option<&PathBuf>) -> CliResult<Lookup> {
    let file = config.map(|p| ConfigFile::load(p)).transpose()?;
    Ok(Lookup::new(flags, file))
}

fn output_path(flag: &Option<PathBuf>, l: &Lookup) -> Option<PathBuf> {
    flag.clone().or_else(|| l.output())
}

#[derive(Debug, Clone, Serialize)]
struct ConfigEcho {
    n_emitters: usize,
    kept_photons: usize,
    gamma_tau: f64,
    couplings: Vec<f64>,
    steps: usize,
    initial: String,
    target: String,
    formula_variant: FormulaVariant,
}

#[derive(Debug, Clone, Serialize)]
struct ProtocolRow {
    #[serde(rename = "N")]
    n: usize,
    p_step: f64,
    #[serde(rename = "P_cumulative")]
    p_cumulative: f64,
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "Y_product")]
    y_product: f64,
    #[serde(rename = "Y_survival")]
    y_survival: f64,
    #[serde(rename = "P_closed_form", skip_serializing_if = "Option::is_none")]
    p_closed_form: Option<f64>,
    #[serde(rename = "F_closed_form", skip_serializing_if = "Option::is_none")]
    f_closed_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form_valid: Option<bool>,
    #[serde(rename = "Y_sampled", skip_serializing_if = "Option::is_none")]
    y_sampled: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ProtocolDocument {
    config: ConfigEcho,
    termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling: Option<Sampling>,
    records: Vec<ProtocolRow>,
}

#[derive(Debug, Clone, Serialize)]
struct Sampling {
    seed: u64,
    trajectories: usize,
}

/// Closed forms apply to the default scenario only: first emitter excited,
/// default target, identical couplings.
fn reference_applies(phys: &Physics, run: &RunSettings, k: usize) -> bool {
    run.initial.is_default
        && run.target_is_default
        && phys.identical_couplings()
        && reference_curve(phys.n_emitters, k, run.variant, 1.0, 0).is_some()
}

fn closed_form(phys: &Physics, run: &RunSettings, k: usize, gt: f64, step: usize) -> Option<(Prediction, Prediction)> {
    reference_curve(phys.n_emitters, k, run.variant, gt, u32::try_from(step).ok()?)
}

fn execute(phys: &Physics, run: &RunSettings, k: usize, gt: f64) -> CliResult<ProtocolResult> {
    let channel = ConditionalChannel::with_couplings(&phys.couplings, gt, k)?;
    let target = make_named_state(&run.target, phys.n_emitters)?;
    let mut result = run_purification(&run.initial.rho, &channel, run.steps, &target)?;
    result.echo.initial = run.initial.descriptor.clone();
    Ok(result)
}

fn warn_truncated(result: &ProtocolResult) {
    if let Termination::Truncated { step, probability } = result.termination {
        eprintln!(
            "warning: run stopped at step {step} (k = {}, γτ = {}): success probability {probability:e} is negligible",
            result.echo.kept_photons, result.echo.gamma_tau
        );
    }
}

pub fn protocol(args: &ProtocolArgs) -> CliResult<()> {
    let l = lookup(&args.flags(), args.io.config.as_ref())?;
    let phys = resolve_physics(&l, false)?;
    let run = resolve_run(&l, phys.n_emitters)?;
    let format = resolve_format(&l, false, Format::Csv)?;
    let trajectories = l.get("trajectories", parse_count)?;
    let seed = resolve_seed(&l)?;
    let sampling = match (trajectories, seed) {
        (Some(t), Some(s)) => Some(Sampling { seed: s, trajectories: t }),
        (Some(_), None) => return Err(CliError::Config("--trajectories needs an explicit --seed".into())),
        _ => None,
    };
    let k = phys.kept_photons[0];
    let gt = phys.gamma_tau.points()[0];

    let result = execute(&phys, &run, k, gt)?;
    warn_truncated(&result);
    let with_reference = reference_applies(&phys, &run, k);
    let sampled = sampling
        .as_ref()
        .filter(|s| s.trajectories > 0)
        .map(|s| sample_survival(&result, s.trajectories, s.seed));

    let rows: Vec<ProtocolRow> = result
        .records
        .iter()
        .map(|rec| {
            let cf = with_reference.then(|| closed_form(&phys, &run, k, gt, rec.step)).flatten();
            row(rec, cf, sampled.as_ref().map(|s| s.fraction(rec.step)))
        })
        .collect();

    let out = output_path(&args.io.output, &l);
    let text = match format {
        Format::Json => json(&ProtocolDocument {
            config: ConfigEcho {
                n_emitters: phys.n_emitters,
                kept_photons: k,
                gamma_tau: gt,
                couplings: phys.couplings.clone(),
                steps: run.steps,
                initial: run.initial.descriptor.clone(),
                target: run.target.to_string(),
                formula_variant: run.variant,
            },
            termination: result.termination,
            sampling,
            records: rows,
        })?,
        _ => {
            let mut header = vec!["N", "p_step", "P_cumulative", "F", "Y_product", "Y_survival"];
            if with_reference {
                header.extend(["P_closed_form", "F_closed_form", "closed_form_valid"]);
            }
            if sampled.is_some() {
                header.push("Y_sampled");
            }
            let mut csv = Csv::new(&header);
            for r in &rows {
                let mut cells = vec![
                    Cell::Int(r.n),
                    Cell::Float(r.p_step),
                    Cell::Float(r.p_cumulative),
                    Cell::Float(r.f),
                    Cell::Float(r.y_product),
                    Cell::Float(r.y_survival),
                ];
                if with_reference {
                    cells.push(Cell::Float(r.p_closed_form.unwrap_or(f64::NAN)));
                    cells.push(Cell::Float(r.f_closed_form.unwrap_or(f64::NAN)));
                    cells.push(Cell::Bool(r.closed_form_valid.unwrap_or(false)));
                }
                if let Some(y) = r.y_sampled {
                    cells.push(Cell::Float(y));
                }
                csv.row(&cells);
            }
            csv.into_string()
        }
    };
    emit(out.as_deref(), &text)
}

fn row(rec: &StepRecord, cf: Option<(Prediction, Prediction)>, y_sampled: Option<f64>) -> ProtocolRow {
    ProtocolRow {
        n: rec.step,
        p_step: rec.p_step,
        p_cumulative: rec.p_cumulative,
        f: rec.fidelity,
        y_product: rec.yield_product,
        y_survival: rec.yield_survival(),
        p_closed_form: cf.as_ref().map(|(p, _)| p.value),
        f_closed_form: cf.as_ref().map(|(_, f)| f.value),
        closed_form_valid: cf.as_ref().map(|(p, f)| p.is_valid() && f.is_valid()),
        y_sampled,
    }
}

#[derive(Debug, Clone, Serialize)]
struct Amplitude {
    basis: String,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize)]
struct EigenEntry {
    index: usize,
    group: usize,
    re: f64,
    im: f64,
    magnitude: f64,
    trapping: bool,
    vector: Vec<Amplitude>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ghz_overlap: Option<Amplitude>,
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumDocument {
    n_emitters: usize,
    kept_photons: usize,
    gamma_tau: f64,
    couplings: Vec<f64>,
    decomposition: cavity_purify::channel::Decomposition,
    multiplicities: Vec<usize>,
    eigenpairs: Vec<EigenEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ghz: Option<cavity_purify::channel::GhzReport>,
}

pub fn spectrum(args: &SpectrumArgs) -> CliResult<()> {
    let l = lookup(&args.flags(), args.io.config.as_ref())?;
    let phys = resolve_physics(&l, false)?;
    let format = resolve_format(&l, false, Format::Csv)?;
    let k = phys.kept_photons[0];
    let gt = phys.gamma_tau.points()[0];
    let channel = ConditionalChannel::with_couplings(&phys.couplings, gt, k)?;
    let spec = channel_spectrum(&channel)?;
    let space = channel.emitter_space();
    let ghz_state = if phys.n_emitters == 3 {
        Some(make_named_state(&StateLabel::Ghz, 3)?)
    } else {
        None
    };

    let mut entries = Vec::with_capacity(spec.pairs().len());
    for (i, pair) in spec.pairs().iter().enumerate() {
        let vector = (0..space.dim())
            .map(|b| {
                let z = pair.vector.amplitude(b);
                Amplitude {
                    basis: space.config_label(b),
                    re: z.re,
                    im: z.im,
                }
            })
            .collect();
        let ghz_overlap = match &ghz_state {
            Some(g) => {
                let z = pair.vector.inner(g.state())?;
                Some(Amplitude {
                    basis: "ghz".into(),
                    re: z.re,
                    im: z.im,
                })
            }
            None => None,
        };
        entries.push(EigenEntry {
            index: i,
            group: pair.group,
            re: pair.value.re,
            im: pair.value.im,
            magnitude: pair.magnitude(),
            trapping: spec.is_trapping(i, TRAPPING_TOL),
            vector,
            ghz_overlap,
        });
    }
    let ghz = if phys.n_emitters == 3 {
        let report = ghz_preservation_check(&channel)?;
        eprintln!("ghz: {:?} (max persisting overlap {:e})", report.verdict, report.max_persisting_overlap);
        Some(report)
    } else {
        None
    };
    eprintln!(
        "decomposition: {:?}; {} of {} eigenvalues trapping",
        spec.decomposition(),
        spec.trapping_indices(TRAPPING_TOL).len(),
        entries.len()
    );

    let out = output_path(&args.io.output, &l);
    let text = match format {
        Format::Json => json(&SpectrumDocument {
            n_emitters: phys.n_emitters,
            kept_photons: k,
            gamma_tau: gt,
            couplings: phys.couplings.clone(),
            decomposition: spec.decomposition(),
            multiplicities: spec.multiplicities(),
            eigenpairs: entries,
            ghz,
        })?,
        _ => {
            let mut csv = Csv::new(&["section", "eigen_index", "group", "basis", "re", "im", "magnitude", "trapping"]);
            for e in &entries {
                csv.row(&[
                    Cell::Text("eigenvalue".into()),
                    Cell::Int(e.index),
                    Cell::Int(e.group),
                    Cell::Text(String::new()),
                    Cell::Float(e.re),
                    Cell::Float(e.im),
                    Cell::Float(e.magnitude),
                    Cell::Bool(e.trapping),
                ]);
            }
            for e in &entries {
                for a in e.vector.iter().chain(e.ghz_overlap.iter()) {
                    let section = if a.basis == "ghz" { "ghz_overlap" } else { "eigenvector" };
                    csv.row(&[
                        Cell::Text(section.into()),
                        Cell::Int(e.index),
                        Cell::Int(e.group),
                        Cell::Text(if a.basis == "ghz" { String::new() } else { a.basis.clone() }),
                        Cell::Float(a.re),
                        Cell::Float(a.im),
                        Cell::Float(a.re.hypot(a.im)),
                        Cell::Bool(e.trapping),
                    ]);
                }
            }
            csv.into_string()
        }
    };
    emit(out.as_deref(), &text)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    kept_photons: usize,
    gamma_tau: f64,
    #[serde(flatten)]
    last: ProtocolRow,
    truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SweepDocument {
    n_emitters: usize,
    steps: usize,
    couplings: Vec<f64>,
    initial: String,
    target: String,
    formula_variant: FormulaVariant,
    rows: Vec<SweepRow>,
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let l = lookup(&args.flags(), args.io.config.as_ref())?;
    let phys = resolve_physics(&l, true)?;
    let run = resolve_run(&l, phys.n_emitters)?;
    let format = resolve_format(&l, false, Format::Csv)?;
    let jobs = l.get("jobs", parse_count)?.unwrap_or(0);
    let max_points = l.get("max-points", parse_count)?.unwrap_or(DEFAULT_MAX_POINTS);

    let total = phys.kept_photons.len().saturating_mul(phys.gamma_tau.len());
    if total > max_points {
        return Err(CliError::Config(format!(
            "grid has {total} points, more than the limit of {max_points} (raise --max-points)"
        )));
    }
    let points: Vec<(usize, f64)> = phys
        .kept_photons
        .iter()
        .flat_map(|&k| phys.gamma_tau.points().into_iter().map(move |gt| (k, gt)))
        .collect();
    let with_reference = phys.kept_photons.iter().all(|&k| reference_applies(&phys, &run, k));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<CliResult<SweepRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(k, gt)| {
                let result = execute(&phys, &run, k, gt)?;
                warn_truncated(&result);
                let rec = result.last();
                let cf = with_reference.then(|| closed_form(&phys, &run, k, gt, rec.step)).flatten();
                Ok(SweepRow {
                    kept_photons: k,
                    gamma_tau: gt,
                    last: row(rec, cf, None),
                    truncated: result.is_truncated(),
                })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    let out = output_path(&args.io.output, &l);
    let text = match format {
        Format::Json => json(&SweepDocument {
            n_emitters: phys.n_emitters,
            steps: run.steps,
            couplings: phys.couplings.clone(),
            initial: run.initial.descriptor.clone(),
            target: run.target.to_string(),
            formula_variant: run.variant,
            rows,
        })?,
        _ => {
            let mut header = vec![
                "kept_photons", "gamma_tau", "N", "p_step", "P_cumulative", "F", "Y_product",
                "Y_survival", "truncated",
            ];
            if with_reference {
                header.extend(["P_closed_form", "F_closed_form", "closed_form_valid"]);
            }
            let mut csv = Csv::new(&header);
            for r in &rows {
                let mut cells = vec![
                    Cell::Int(r.kept_photons),
                    Cell::Float(r.gamma_tau),
                    Cell::Int(r.last.n),
                    Cell::Float(r.last.p_step),
                    Cell::Float(r.last.p_cumulative),
                    Cell::Float(r.last.f),
                    Cell::Float(r.last.y_product),
                    Cell::Float(r.last.y_survival),
                    Cell::Bool(r.truncated),
                ];
                if with_reference {
                    cells.push(Cell::Float(r.last.p_closed_form.unwrap_or(f64::NAN)));
                    cells.push(Cell::Float(r.last.f_closed_form.unwrap_or(f64::NAN)));
                    cells.push(Cell::Bool(r.last.closed_form_valid.unwrap_or(false)));
                }
                csv.row(&cells);
            }
            csv.into_string()
        }
    };
    emit(out.as_deref(), &text)
}

#[derive(Debug, Clone, Serialize)]
struct VerifyDocument {
    passed: bool,
    properties: Vec<verify::PropertyReport>,
}

pub fn verify(args: &VerifyArgs) -> CliResult<()> {
    let l = lookup(&args.flags(), args.io.config.as_ref())?;
    let format = resolve_format(&l, true, Format::Text)?;
    let mut opts = VerifyOptions::default();
    if let Some(c) = l.get("couplings", |s| crate::config::parse_list(s, crate::config::parse_real))? {
        opts.couplings = c;
    }
    if let Some(v) = l.get("formula-variant", |s| s.parse::<FormulaVariant>().map_err(|e| e.to_string()))? {
        opts.variant = v;
    }
    if let Some(s) = resolve_seed(&l)? {
        opts.seed = s;
    }
    if opts.couplings.iter().any(|c| !c.is_finite()) {
        return Err(CliError::Config("--couplings: multipliers must be finite".into()));
    }

    let reports = verify::run_all(&opts)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} (residual {:e} > {:e})", r.name, r.residual, r.tolerance))
        .collect();

    let text = match format {
        Format::Json => json(&VerifyDocument {
            passed: failed.is_empty(),
            properties: reports,
        })?,
        Format::Csv => {
            let mut csv = Csv::new(&["property", "passed", "residual", "tolerance", "detail"]);
            for r in &reports {
                csv.row(&[
                    Cell::Text(r.name.into()),
                    Cell::Bool(r.passed),
                    Cell::Float(r.residual),
                    Cell::Float(r.tolerance),
                    Cell::Text(r.detail.clone()),
                ]);
            }
            csv.into_string()
        }
        Format::Text => {
            let mut s = String::new();
            for r in &reports {
                s.push_str(&format!(
                    "{} {:<26} residual {:.3e}  tolerance {:.1e}  {}\n",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.residual,
                    r.tolerance,
                    r.detail
                ));
            }
            s
        }
    };
    emit(output_path(&args.io.output, &l).as_deref(), &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed))
    }
}
