//! Subcommand implementations.

use cfsdim_core::descriptor::{
    cfs_to_json, explicit_p4, four_corner_to_json, load_descriptor, parse_prob_arg, resolve_p, Descriptor, ProbChoice,
};
use cfsdim_core::dimension::{attractor_dimension, gd_dimension, measure_dimension, similarity_dimension, Depth};
use cfsdim_core::entropy::{
    phi_lower_bound, phi_monte_carlo, phi_series, rw_entropy_bruteforce, rw_entropy_closed,
};
use cfsdim_core::estimate::{box_dimension_1d, box_dimension_2d, entropy_slope, FitOptions, ScalingFit};
use cfsdim_core::fourcorner::{
    chis, measure_dimension_4c, natural_p, phi_xy, render_4c, set_dimension_4c, suff_check, validate_4c,
    FourCornerSystem, RenderMode,
};
use cfsdim_core::separation::esc_probe;
use cfsdim_core::{CfsError, CfsSystem, ProbVector};
use serde_json::{json, Value};

use crate::output::Output;
use crate::{Cli, Command, EstimateKind, PhiMethodArg, RenderModeArg, RwMethodArg, SystemArgs};

pub struct Failure {
    pub error: CfsError,
    /// Output worth printing even though the command failed.
    pub partial: Option<Box<Output>>,
}

impl From<CfsError> for Failure {
    fn from(error: CfsError) -> Self {
        Failure { error, partial: None }
    }
}

type Outcome = std::result::Result<Output, Failure>;

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn load(args: &SystemArgs) -> cfsdim_core::Result<(Descriptor, Option<ProbChoice>)> {
    let d = load_descriptor(&args.system)?;
    let from_file = match &d {
        Descriptor::Cfs { probabilities, .. } | Descriptor::FourCorner { probabilities, .. } => probabilities.clone(),
    };
    let choice = match &args.p {
        Some(text) => Some(parse_prob_arg(text)?),
        None => from_file,
    };
    Ok((d, choice))
}

fn expect_cfs(d: Descriptor, command: &str) -> cfsdim_core::Result<CfsSystem> {
    match d {
        Descriptor::Cfs { system, .. } => Ok(system),
        Descriptor::FourCorner { .. } => Err(CfsError::Parse(format!(
            "{command} needs a \"cfs\" system; use the fourcorner subcommand for 4-corner sets"
        ))),
    }
}

fn expect_four_corner(d: Descriptor, command: &str) -> cfsdim_core::Result<FourCornerSystem> {
    match d {
        Descriptor::FourCorner { system, .. } => Ok(system),
        Descriptor::Cfs { .. } => Err(CfsError::Parse(format!("{command} needs a \"four_corner\" system"))),
    }
}

/// Weights for a 4-corner system; the natural measure by default.
fn p4(sys: &FourCornerSystem, choice: Option<&ProbChoice>) -> cfsdim_core::Result<[f64; 4]> {
    match choice {
        None | Some(ProbChoice::Natural) => Ok(natural_p(sys)?.p),
        Some(ProbChoice::Uniform) => Ok([0.25; 4]),
        Some(ProbChoice::Explicit(rows)) => explicit_p4(rows),
    }
}

fn p_json(p: &ProbVector) -> Value {
    to_json(&p.weights())
}

fn fit_table(out: Output, fit: &ScalingFit) -> Output {
    let rows = fit
        .scales
        .iter()
        .zip(&fit.values)
        .map(|(m, v)| vec![json!(m), json!(v)])
        .collect();
    out.with_table(&["m", "value"], rows)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::MeasureDim { sys, tol } => measure_dim(sys, *tol),
        Command::AttractorDim {
            sys,
            tol,
            gd_depth,
            box_count,
            m_min,
            m_max,
        } => attractor_dim(sys, *tol, *gd_depth, *box_count, FitOptions::new(*m_min, *m_max, 2)),
        Command::Phi {
            sys,
            method,
            tol,
            samples,
        } => phi(sys, *method, *tol, *samples, cli.seed),
        Command::RwEntropy {
            sys,
            method,
            depth,
            tol,
            budget,
        } => rw_entropy(sys, *method, *depth, *tol, *budget),
        Command::EscProbe { sys, n_max, budget } => probe(sys, *n_max, *budget),
        Command::Fourcorner { sys, tol } => fourcorner(sys, *tol),
        Command::Render {
            sys,
            mode,
            depth,
            points,
            burn_in,
            size,
            out,
        } => {
            let (d, _) = load(sys)?;
            let system = expect_four_corner(d, "render")?;
            let mode = match mode {
                RenderModeArg::Cylinders => RenderMode::Cylinders { depth: *depth },
                RenderModeArg::Attractor => RenderMode::Attractor {
                    points: *points,
                    seed: cli.seed,
                    burn_in: *burn_in,
                    size: *size,
                },
            };
            render_4c(&system, mode, out)?;
            let summary = match mode {
                RenderMode::Cylinders { depth } => json!({"mode": "cylinders", "depth": depth, "rectangles": 4usize.pow(depth as u32)}),
                RenderMode::Attractor { points, seed, burn_in, size } => {
                    json!({"mode": "attractor", "points": points, "seed": seed, "burn_in": burn_in, "size": size})
                }
            };
            let mut v = summary;
            v["out"] = json!(out.display().to_string());
            Ok(Output::new(v))
        }
        Command::Estimate {
            sys,
            kind,
            m_min,
            m_max,
            trim,
            points,
            budget,
        } => estimate(sys, *kind, FitOptions::new(*m_min, *m_max, *trim), *points, *budget, cli.seed),
    }
}

fn measure_dim(args: &SystemArgs, tol: f64) -> Outcome {
    let (d, choice) = load(args)?;
    match d {
        Descriptor::Cfs { system, .. } => {
            let p = resolve_p(&system, choice.as_ref())?;
            let report = measure_dimension(&system, &p, tol)?;
            let mut v = to_json(&report);
            v["probabilities"] = p_json(&p);
            Ok(Output::new(v))
        }
        Descriptor::FourCorner { system, .. } => {
            let p = p4(&system, choice.as_ref())?;
            let report = measure_dimension_4c(&system, &p, tol)?;
            let mut v = to_json(&report);
            v["probabilities"] = json!(p);
            Ok(Output::new(v))
        }
    }
}

fn attractor_dim(args: &SystemArgs, tol: f64, gd_depth: Option<usize>, box_count: bool, opts: FitOptions) -> Outcome {
    let (d, _) = load(args)?;
    let system = expect_cfs(d, "attractor-dim")?;
    let report = attractor_dimension(&system, tol)?;
    let s0 = report.raw;
    let mut v = json!({
        "attractor": to_json(&report),
        "similarity_dimension": similarity_dimension(&system.all_ratios())?,
    });
    let mut out_rows = Vec::new();
    if let Some(k) = gd_depth {
        let mut seq = Vec::new();
        for n in 1..=k {
            let sn = gd_dimension(&system, Depth::Finite(n), tol)?;
            out_rows.push(vec![json!(n), json!(sn)]);
            seq.push(json!({"n": n, "s_n": sn}));
        }
        let s_inf = gd_dimension(&system, Depth::Infinite, tol)?;
        v["graph_directed"] = json!({
            "sequence": seq,
            "limit": s_inf,
            "last_minus_root": out_rows.last().and_then(|r| r[1].as_f64()).map(|s| s - s0),
            "limit_minus_root": s_inf - s0,
        });
    }
    if box_count {
        let fit = box_dimension_1d(&system, opts, cfsdim_core::estimate::DEFAULT_COVER_BUDGET)?;
        v["box_minus_dimension"] = json!(fit.slope - report.dimension);
        v["box"] = to_json(&fit);
    }
    let out = Output::new(v);
    Ok(if gd_depth.is_some() {
        out.with_table(&["n", "s_n"], out_rows)
    } else {
        out
    })
}

fn phi(args: &SystemArgs, method: PhiMethodArg, tol: f64, samples: usize, seed: u64) -> Outcome {
    let (d, choice) = load(args)?;
    let system = expect_cfs(d, "phi")?;
    let p = resolve_p(&system, choice.as_ref())?;
    let mut v = json!({"probabilities": p_json(&p)});
    if matches!(method, PhiMethodArg::Series | PhiMethodArg::All) {
        v["series"] = to_json(&phi_series(&system, &p, tol)?);
    }
    if matches!(method, PhiMethodArg::MonteCarlo | PhiMethodArg::All) {
        v["monte_carlo"] = to_json(&phi_monte_carlo(&system, &p, samples, seed)?);
        v["seed"] = json!(seed);
    }
    if matches!(method, PhiMethodArg::LowerBound | PhiMethodArg::All) {
        v["lower_bound"] = json!(phi_lower_bound(&p));
    }
    Ok(Output::new(v))
}

fn rw_entropy(args: &SystemArgs, method: RwMethodArg, depth: usize, tol: f64, budget: u128) -> Outcome {
    let (d, choice) = load(args)?;
    let system = expect_cfs(d, "rw-entropy")?;
    let p = resolve_p(&system, choice.as_ref())?;
    let closed = rw_entropy_closed(&system, &p, tol)?;
    match method {
        RwMethodArg::Closed => Ok(Output::new(to_json(&closed))),
        RwMethodArg::BruteForce => {
            let r = rw_entropy_bruteforce(&system, &p, depth, budget)?;
            let rows = r
                .entropies
                .iter()
                .enumerate()
                .map(|(k, h)| vec![json!(k + 1), json!(h), json!(r.increments.get(k))])
                .collect();
            let mut v = to_json(&r);
            v["closed_form"] = json!(closed.value);
            v["last_increment_error"] = json!(r.increments.last().map(|i| i - closed.value));
            Ok(Output::new(v).with_table(&["n", "H_n", "H_n+1 - H_n"], rows))
        }
    }
}

fn probe(args: &SystemArgs, n_max: usize, budget: u128) -> Outcome {
    let (d, _) = load(args)?;
    let system = expect_cfs(d, "esc-probe")?;
    let r = esc_probe(&system, n_max, budget)?;
    let rows = r
        .rows
        .iter()
        .map(|row| {
            vec![
                json!(row.n),
                json!(row.class_count),
                json!(row.min_gap),
                json!(row.implied_b),
                json!(row.exact_zero),
            ]
        })
        .collect();
    let mut v = to_json(&r);
    v["mode"] = to_json(&system.mode());
    Ok(Output::new(v).with_table(&["n", "classes", "min_gap", "implied_b", "exact_zero"], rows))
}

fn fourcorner(args: &SystemArgs, tol: f64) -> Outcome {
    let (d, choice) = load(args)?;
    let system = expect_four_corner(d, "fourcorner")?;
    let cond = validate_4c(&system);
    let mut v = json!({
        "system": four_corner_to_json(&system),
        "conditions": {
            "open_set": cond.ok(),
            "domination": cond.plus_ok(),
            "violations": cond.violations,
            "domination_violations": cond.plus_violations,
        },
    });
    if !cond.ok() {
        return Err(Failure {
            error: CfsError::ConditionsNotMet(cond.violations),
            partial: Some(Box::new(Output::new(v))),
        });
    }
    let p = p4(&system, choice.as_ref())?;
    let (cx, cy) = chis(&system, &p);
    v["probabilities"] = json!(p);
    v["chi_x"] = json!(cx);
    v["chi_y"] = json!(cy);
    v["phi"] = to_json(&phi_xy(&p, tol)?);
    v["measure"] = to_json(&measure_dimension_4c(&system, &p, tol)?);
    v["natural"] = to_json(&natural_p(&system)?);
    v["suff"] = to_json(&suff_check(&system)?);
    v["set_dimension"] = to_json(&set_dimension_4c(&system)?);
    Ok(Output::new(v))
}

fn estimate(args: &SystemArgs, kind: EstimateKind, opts: FitOptions, points: usize, budget: u128, seed: u64) -> Outcome {
    let (d, choice) = load(args)?;
    match (d, kind) {
        (Descriptor::Cfs { system, .. }, EstimateKind::Box) => {
            let fit = box_dimension_1d(&system, opts, budget)?;
            let formula = attractor_dimension(&system, 1e-12)?.dimension;
            let v = json!({"fit": to_json(&fit), "formula": formula, "kind": "box-1d", "system": cfs_to_json(&system, None)});
            Ok(fit_table(Output::new(v), &fit))
        }
        (Descriptor::Cfs { system, .. }, EstimateKind::Entropy) => {
            let p = resolve_p(&system, choice.as_ref())?;
            let fit = entropy_slope(&system, &p, points, opts, seed)?;
            let formula = measure_dimension(&system, &p, 1e-12)?.dimension;
            let v = json!({"fit": to_json(&fit), "formula": formula, "kind": "entropy", "samples": points, "seed": seed, "probabilities": p_json(&p)});
            Ok(fit_table(Output::new(v), &fit))
        }
        (Descriptor::FourCorner { system, .. }, EstimateKind::Box) => {
            let weights = p4(&system, choice.as_ref())?;
            let fit = box_dimension_2d(&system, opts, points, seed, Some(weights))?;
            let formula = natural_p(&system).ok().map(|n| n.s);
            let v = json!({"fit": to_json(&fit), "formula": formula, "kind": "box-2d", "points": points, "seed": seed, "weights": weights});
            Ok(fit_table(Output::new(v), &fit))
        }
        (Descriptor::FourCorner { .. }, EstimateKind::Entropy) => Err(CfsError::Parse(
            "entropy estimates need a \"cfs\" system".into(),
        )
        .into()),
    }
}
