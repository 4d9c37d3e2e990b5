//! Command line front end: scenario files in, deterministic JSON/CSV/SVG
//! artifacts out.
//!
//! Every command reads one scenario, runs one operation from the library,
//! and writes its report into the output directory with the scenario hash
//! and the window/resolution stamp embedded.  Identical scenario and seed
//! give byte-identical artifacts; nothing reads the clock.
//!
//! Exit codes: 0 on success (for `audit`, `noncrit`, and `pipeline run`
//! this means the contract held), 1 when a run completed but its contract
//! failed, 2 for usage, schema, or numeric errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use carleman_core::audit::{count_zeros, default_contours, error_audit, AuditReport};
use carleman_core::fitting::{fit_to_tolerance, sample_set, FitReport, SampledTarget};
use carleman_core::func::AnalyticMap;
use carleman_core::geom::RasterPatch;
use carleman_core::noncrit::{build_noncritical, NonCriticalEntire, NonCriticalWire};
use carleman_core::pipeline::{run_pipeline, PipelineReport};
use carleman_core::topology::{
    build_exhaustion, check_beh, check_condition_g, classify_carleman, decompose_semi_admissible,
    default_probes, holes, hull, is_runge, BehSuiteReport, CarlemanReport, CondGReport,
    DecomposeReport, ExhaustReport, Stamp,
};

pub mod artifact;
pub mod plot;
pub mod scenario;

use artifact::{Meta, OutDir};
use scenario::{Loaded, Scenario};

#[derive(Parser)]
#[command(
    name = "carleman",
    about = "Constructive approximation toolkit for closed sets in the plane",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Topology verdicts about the scenario set
    Topo {
        #[command(subcommand)]
        op: TopoOp,
    },
    /// Plain polynomial fit of the target on the set
    Fit(RunArgs),
    /// Interpolant with nowhere-vanishing derivative for the target
    Noncrit(RunArgs),
    /// Staged approximation runs
    Pipeline {
        #[command(subcommand)]
        op: PipelineOp,
    },
    /// Re-check a stored interpolant against the scenario contract
    Audit(AuditArgs),
    /// Bundle the artifacts in the output directory into one report and plot
    Report(RunArgs),
}

#[derive(Subcommand)]
enum TopoOp {
    /// Bounded complement components of the set
    Holes(RunArgs),
    /// Set with its holes filled
    Hull(RunArgs),
    /// No holes at this resolution
    Runge(RunArgs),
    /// Escape test for the complement near the window border
    Beh(RunArgs),
    /// Joint boundedness of interior components meeting each probe
    Condg(RunArgs),
    /// Split into fat components and a thin rest
    Decompose(RunArgs),
    /// Full classification: semi-admissibility and the approximation verdicts
    Classify(RunArgs),
    /// Nested compacts absorbing the set stage by stage
    Exhaust(RunArgs),
}

#[derive(Subcommand)]
enum PipelineOp {
    /// Run the staged scheme and audit the deliverable
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Output directory for artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the raster spacing, window units
    #[arg(long)]
    resolution: Option<f64>,
    /// Overwrite existing artifacts
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Scenario file; defaults to the scenario stored in the artifact
    scenario: Option<PathBuf>,
    /// Interpolant artifact; defaults to noncrit.json, then
    /// pipeline_deliverable.json, in the output directory
    #[arg(long)]
    artifact: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    force: bool,
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Topo { op } => match op {
            TopoOp::Holes(a) => topo_holes(&a),
            TopoOp::Hull(a) => topo_hull(&a),
            TopoOp::Runge(a) => topo_runge(&a),
            TopoOp::Beh(a) => topo_beh(&a),
            TopoOp::Condg(a) => topo_condg(&a),
            TopoOp::Decompose(a) => topo_decompose(&a),
            TopoOp::Classify(a) => topo_classify(&a),
            TopoOp::Exhaust(a) => topo_exhaust(&a),
        },
        Command::Fit(a) => cmd_fit(&a),
        Command::Noncrit(a) => cmd_noncrit(&a),
        Command::Pipeline { op } => match op {
            PipelineOp::Run(a) => cmd_pipeline(&a),
        },
        Command::Audit(a) => cmd_audit(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn load(args: &RunArgs) -> Result<(Loaded, OutDir)> {
    let loaded = Loaded::from_file(&args.scenario, args.resolution, args.seed)?;
    let out = OutDir::create(&args.out, args.force)?;
    Ok((loaded, out))
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

// ─────────────────────────────────────────────────────────────────────────
// topo
// ─────────────────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct HolesOut {
    meta: Meta,
    count: usize,
    /// Cell count per hole, discovery order.
    cells: Vec<usize>,
}

fn topo_holes(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let hs: Vec<RasterPatch> = holes(&loaded.region).context("holes")?;
    let report = HolesOut {
        meta: Meta::new("topo holes", &loaded),
        count: hs.len(),
        cells: hs.iter().map(|p| p.cell_count()).collect(),
    };
    out.write_json("topo_holes.json", &report)?;
    println!("holes: {}", report.count);
    Ok(0)
}

#[derive(Serialize)]
struct HullOut {
    meta: Meta,
    set_cells: usize,
    hull_cells: usize,
    holes_filled: usize,
}

fn topo_hull(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let hulled = hull(&loaded.region).context("hull")?;
    let report = HullOut {
        meta: Meta::new("topo hull", &loaded),
        set_cells: loaded.region.rasterize()?.true_count(),
        hull_cells: hulled.rasterize()?.true_count(),
        holes_filled: holes(&loaded.region)?.len(),
    };
    out.write_json("topo_hull.json", &report)?;
    println!(
        "hull: {} cells over {} set cells, {} holes filled",
        report.hull_cells, report.set_cells, report.holes_filled
    );
    Ok(0)
}

#[derive(Serialize)]
struct RungeOut {
    meta: Meta,
    runge: bool,
    holes: usize,
}

fn topo_runge(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let report = RungeOut {
        meta: Meta::new("topo runge", &loaded),
        runge: is_runge(&loaded.region).context("runge")?,
        holes: holes(&loaded.region)?.len(),
    };
    out.write_json("topo_runge.json", &report)?;
    println!("runge: {} ({} holes)", report.runge, report.holes);
    Ok(0)
}

#[derive(Serialize)]
struct BehOut {
    meta: Meta,
    report: BehSuiteReport,
}

fn topo_beh(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let probes = default_probes(loaded.window(), loaded.region.resolution)?;
    let report = check_beh(&loaded.region, &probes).context("beh")?;
    println!("beh: {:?} over {} probes", report.verdict, report.probes.len());
    let payload = BehOut {
        meta: Meta::new("topo beh", &loaded),
        report,
    };
    out.write_json("topo_beh.json", &payload)?;
    Ok(0)
}

#[derive(Serialize)]
struct CondgOut {
    meta: Meta,
    reports: Vec<CondGReport>,
}

fn topo_condg(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let probes = default_probes(loaded.window(), loaded.region.resolution)?;
    let mut reports = Vec::with_capacity(probes.len());
    for probe in &probes {
        reports.push(check_condition_g(&loaded.region, probe).context("condg")?.report);
    }
    let verdict = reports
        .iter()
        .fold(carleman_core::topology::Verdict::Pass, |acc, r| {
            acc.and(r.verdict)
        });
    println!("condg: {:?} over {} probes", verdict, reports.len());
    let payload = CondgOut {
        meta: Meta::new("topo condg", &loaded),
        reports,
    };
    out.write_json("topo_condg.json", &payload)?;
    Ok(0)
}

#[derive(Serialize)]
struct DecomposeOut {
    meta: Meta,
    report: DecomposeReport,
}

fn topo_decompose(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let outcome = decompose_semi_admissible(&loaded.region).context("decompose")?;
    let report = outcome.report(Stamp::of(&loaded.region));
    println!(
        "decompose: semi_admissible={} ({} fat components, {} thin cells)",
        report.semi_admissible, report.h_components, report.s_cells
    );
    let payload = DecomposeOut {
        meta: Meta::new("topo decompose", &loaded),
        report,
    };
    out.write_json("topo_decompose.json", &payload)?;
    Ok(0)
}

#[derive(Serialize)]
struct ClassifyOut {
    meta: Meta,
    report: CarlemanReport,
}

fn topo_classify(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let report = classify_carleman(&loaded.region).context("classify")?;
    println!(
        "classify: semi_admissible={} carleman={:?} (holes={})",
        report.semi_admissible, report.carleman, report.holes
    );
    let payload = ClassifyOut {
        meta: Meta::new("topo classify", &loaded),
        report,
    };
    out.write_json("topo_classify.json", &payload)?;
    Ok(0)
}

#[derive(Serialize)]
struct ExhaustOut {
    meta: Meta,
    report: ExhaustReport,
}

fn topo_exhaust(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let stages = loaded.scenario.pipeline.stages.unwrap_or(2) + 2;
    let exhaustion = build_exhaustion(&loaded.region, stages).context("exhaust")?;
    let report = exhaustion.report();
    println!("exhaust: {} stages, radii {:?}", report.stages, report.radii);
    let payload = ExhaustOut {
        meta: Meta::new("topo exhaust", &loaded),
        report,
    };
    out.write_json("topo_exhaust.json", &payload)?;
    Ok(0)
}

// ─────────────────────────────────────────────────────────────────────────
// fit / noncrit / pipeline
// ─────────────────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct FitOut {
    meta: Meta,
    samples: usize,
    report: FitReport,
    /// The model is a polynomial in `w = (z - center) / scale`.
    center: [f64; 2],
    scale: f64,
    coeffs: Vec<[f64; 2]>,
    critical_points: Vec<[f64; 2]>,
}

fn cmd_fit(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let target = loaded.target()?;
    let eps = loaded.epsilon()?;
    let params = loaded.scenario.pipeline.noncrit_params(loaded.scenario.seed);

    let points = sample_set(
        &loaded.region,
        params.density,
        params.boundary_bias,
        params.seed,
    )?;
    let values: Vec<Complex64> = points.iter().map(|z| target.eval(*z)).collect();
    let kinds = vec![carleman_core::fitting::PointKind::Holomorphic; points.len()];
    let weights: Vec<f64> = points.iter().map(|z| eps.at(*z)).collect();
    let sampled = SampledTarget::new(points, values, kinds, weights)?;
    let approx = fit_to_tolerance(&sampled, params.max_degree).context("fit")?;
    let model = approx.to_scaled_poly();
    let critical = if model.degree() >= 2 {
        model.critical_points().context("critical points")?
    } else {
        Vec::new()
    };

    let report = FitOut {
        meta: Meta::new("fit", &loaded),
        samples: sampled.points.len(),
        report: approx.report.clone(),
        center: pair(model.center),
        scale: model.scale,
        coeffs: model.poly.coeffs.iter().map(|c| pair(*c)).collect(),
        critical_points: critical.iter().map(|z| pair(*z)).collect(),
    };
    out.write_json("fit.json", &report)?;
    println!(
        "fit: degree {} residual {:.3e} tolerance_met={} ({} critical points)",
        report.report.degree,
        report.report.max_residual,
        report.report.tolerance_met,
        report.critical_points.len()
    );
    Ok(0)
}

#[derive(Serialize)]
struct NoncritOut {
    meta: Meta,
    /// Effective scenario, overrides applied; `audit` can run from this.
    scenario: Scenario,
    fit: FitReport,
    path_bound: f64,
    deriv_floor: carleman_core::fitting::DerivFloor,
    max_defect: f64,
    exponent_defect: f64,
    certified: bool,
    wire: NonCriticalWire,
}

fn cmd_noncrit(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let target = loaded.target()?;
    let eps = loaded.epsilon()?;
    let params = loaded.scenario.pipeline.noncrit_params(loaded.scenario.seed);

    let build = build_noncritical(&target, &loaded.region, &|z| eps.at(z), &params)
        .context("noncrit")?;
    let report = NoncritOut {
        meta: Meta::new("noncrit", &loaded),
        scenario: loaded.scenario.clone(),
        fit: build.fit.clone(),
        path_bound: build.path_bound,
        deriv_floor: build.deriv_floor,
        max_defect: build.max_defect,
        exponent_defect: build.exponent_defect,
        certified: build.certified,
        wire: build.g.to_wire(),
    };
    out.write_json("noncrit.json", &report)?;
    println!(
        "noncrit: degree {} defect {:.3e} certified={}",
        report.fit.degree, report.max_defect, report.certified
    );
    Ok(if report.certified { 0 } else { 1 })
}

#[derive(Serialize)]
struct PipelineOut {
    meta: Meta,
    report: PipelineReport,
}

#[derive(Serialize)]
struct DeliverableOut {
    meta: Meta,
    scenario: Scenario,
    wire: NonCriticalWire,
}

fn cmd_pipeline(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;
    let target = loaded.target()?;
    let eps = loaded.epsilon()?;
    let params = loaded.scenario.pipeline.params(loaded.scenario.seed);

    let result = run_pipeline(Box::new(target), &loaded.region, &|z| eps.at(z), &params)
        .context("pipeline")?;
    let pass = result.report.audit.pass;
    out.write_json(
        "pipeline.json",
        &PipelineOut {
            meta: Meta::new("pipeline run", &loaded),
            report: result.report.clone(),
        },
    )?;
    out.write_json(
        "pipeline_deliverable.json",
        &DeliverableOut {
            meta: Meta::new("pipeline run", &loaded),
            scenario: loaded.scenario.clone(),
            wire: result.deliverable.to_wire(),
        },
    )?;
    println!(
        "pipeline: {} stages, bound {:.3e}, {} audited samples, pass={}",
        result.report.stages.len(),
        result.report.final_bound,
        result.report.audit_samples,
        pass
    );
    Ok(if pass { 0 } else { 1 })
}

// ─────────────────────────────────────────────────────────────────────────
// audit
// ─────────────────────────────────────────────────────────────────────────

/// The part of a stored interpolant artifact the auditor needs; extra
/// fields in the file are ignored.
#[derive(Deserialize)]
struct StoredInterpolant {
    meta: Meta,
    scenario: Scenario,
    wire: NonCriticalWire,
}

#[derive(Serialize)]
struct AuditOut {
    meta: Meta,
    artifact: String,
    /// False when the artifact was built from a different scenario file
    /// than the one audited against.
    scenario_match: bool,
    samples: usize,
    report: AuditReport,
    /// Zeros of the interpolant derivative over each default contour of
    /// the scenario window; all must be zero.
    derivative_zero_counts: Vec<usize>,
    pass: bool,
}

fn cmd_audit(args: &AuditArgs) -> Result<i32> {
    let out = OutDir::create(&args.out, args.force)?;
    // `artifact_name` goes into the report; default artifacts are named
    // relative to the output directory so reports stay location-free
    let (artifact_path, artifact_name) = match &args.artifact {
        Some(p) => (p.clone(), p.display().to_string()),
        None => {
            let noncrit = out.path("noncrit.json");
            let deliverable = out.path("pipeline_deliverable.json");
            if noncrit.exists() {
                (noncrit, "noncrit.json".to_string())
            } else if deliverable.exists() {
                (deliverable, "pipeline_deliverable.json".to_string())
            } else {
                bail!(
                    "no interpolant artifact found in {}; run noncrit or \
                     pipeline first, or pass --artifact",
                    args.out.display()
                );
            }
        }
    };
    let stored: StoredInterpolant = serde_json::from_slice(
        &fs::read(&artifact_path)
            .with_context(|| format!("reading artifact {}", artifact_path.display()))?,
    )
    .with_context(|| format!("artifact {}", artifact_path.display()))?;

    let loaded = match &args.scenario {
        Some(path) => Loaded::from_file(path, args.resolution, args.seed)?,
        None => Loaded::from_scenario(
            stored.scenario.clone(),
            stored.meta.scenario_sha256.clone(),
            args.resolution,
            args.seed,
        )?,
    };
    let scenario_match = loaded.sha256 == stored.meta.scenario_sha256;
    if !scenario_match {
        eprintln!(
            "note: artifact was built from scenario {} but is audited against {}",
            stored.meta.scenario_sha256, loaded.sha256
        );
    }

    let target = loaded.target()?;
    let eps = loaded.epsilon()?;
    let params = loaded.scenario.pipeline.noncrit_params(loaded.scenario.seed);
    let g = NonCriticalEntire::from_wire(&stored.wire).context("artifact wire")?;

    // fresh samples, denser than any build uses, on a shifted seed stream
    let points = sample_set(
        &loaded.region,
        2.0 * params.density,
        params.boundary_bias,
        params.seed + 9999,
    )?;
    let mut errors = Vec::with_capacity(points.len());
    let mut tolerances = Vec::with_capacity(points.len());
    let mut rows = String::from("re,im,error,tolerance\n");
    for z in &points {
        let tol = eps.at(*z);
        let got = g.eval_to(*z, params.quad_tol).context("evaluating artifact")?;
        let err = (got - target.eval(*z)).norm();
        rows.push_str(&format!("{},{},{},{}\n", z.re, z.im, err, tol));
        errors.push(err);
        tolerances.push(tol);
    }
    let report = error_audit(&errors, &tolerances).context("audit")?;

    let mut zero_counts = Vec::new();
    for contour in default_contours(&loaded.window(), loaded.region.resolution) {
        zero_counts
            .push(count_zeros(&|z| g.derivative_at(z), &contour).context("derivative zeros")?);
    }
    let zero_free = zero_counts.iter().all(|n| *n == 0);
    let pass = report.pass && zero_free;

    let payload = AuditOut {
        meta: Meta::new("audit", &loaded),
        artifact: artifact_name,
        scenario_match,
        samples: points.len(),
        report,
        derivative_zero_counts: zero_counts,
        pass,
    };
    out.write_json("audit.json", &payload)?;
    out.write("audit.csv", rows.as_bytes())?;
    println!(
        "audit: pass={} worst_margin {:.3e} over {} samples, derivative zero-free={}",
        pass, payload.report.worst_margin, payload.samples, zero_free
    );
    Ok(if pass { 0 } else { 1 })
}

// ─────────────────────────────────────────────────────────────────────────
// report
// ─────────────────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct ReportOut {
    meta: Meta,
    /// Parsed copies of every artifact present, keyed by file name.
    artifacts: std::collections::BTreeMap<String, serde_json::Value>,
}

fn read_heat(path: &Path) -> Result<Vec<(Complex64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut heat = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("malformed row {line:?}");
        }
        let v: Vec<f64> = fields
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("malformed row {line:?}"))?;
        heat.push((Complex64::new(v[0], v[1]), v[2] / v[3]));
    }
    Ok(heat)
}

fn cmd_report(args: &RunArgs) -> Result<i32> {
    let (loaded, out) = load(args)?;

    let mut artifacts = std::collections::BTreeMap::new();
    for name in [
        "topo_holes.json",
        "topo_hull.json",
        "topo_runge.json",
        "topo_beh.json",
        "topo_condg.json",
        "topo_decompose.json",
        "topo_classify.json",
        "topo_exhaust.json",
        "fit.json",
        "noncrit.json",
        "pipeline.json",
        "audit.json",
    ] {
        let path = out.path(name);
        if !path.exists() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_slice(&fs::read(&path)?)
            .with_context(|| format!("artifact {}", path.display()))?;
        artifacts.insert(name.to_string(), value);
    }

    let heat = if out.path("audit.csv").exists() {
        read_heat(&out.path("audit.csv")).context("audit.csv")?
    } else {
        Vec::new()
    };
    let critical: Vec<Complex64> = artifacts
        .get("fit.json")
        .and_then(|v| v.get("critical_points"))
        .and_then(|v| v.as_array())
        .map(|points| {
            points
                .iter()
                .filter_map(|p| {
                    let x = p.get(0)?.as_f64()?;
                    let y = p.get(1)?.as_f64()?;
                    Some(Complex64::new(x, y))
                })
                .collect()
        })
        .unwrap_or_default();

    let svg = plot::render(&loaded.region, &heat, &critical)?;
    out.write("plot.svg", svg.as_bytes())?;
    let payload = ReportOut {
        meta: Meta::new("report", &loaded),
        artifacts,
    };
    out.write_json("report.json", &payload)?;
    println!(
        "report: {} artifacts bundled, plot with {} heat samples and {} critical points",
        payload.artifacts.len(),
        heat.len(),
        critical.len()
    );
    Ok(0)
}
