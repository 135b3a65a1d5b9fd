use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use mnar_pcor::estimators::PreparedEstimator;
use mnar_pcor::exec::Execution;
use mnar_pcor::inference::{critical_value, region_from_prepared, TraceRow};
use mnar_pcor::model::{check_gamma, MaskPattern};
use mnar_pcor::simulation::{run_coverage_experiment, simulate_sample, COLUMN_NAMES};
use mnar_pcor::{GammaBox, Mechanism, RegularityReport, SimulationDesign};
use serde::Serialize;

use crate::args::{AnalyzeArgs, Format, GenerateArgs, SimulateArgs};
use crate::failure::{CliResult, Failure};
use crate::ingest::{read_dataset, ColumnRoles};

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let result = match out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| Failure::unreadable(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn check_grid_and_alpha(grid: usize, alpha: f64) -> CliResult<()> {
    if grid < 2 {
        return Err(Failure::usage(format!("--grid must be at least 2, got {grid}")));
    }
    critical_value(alpha).map_err(Failure::from_config)?;
    Ok(())
}

/// γ₂ range: required for mechanism C, rejected otherwise.
fn gamma2_range(
    mechanism: Mechanism,
    min: Option<f64>,
    max: Option<f64>,
    default: Option<(f64, f64)>,
) -> CliResult<(f64, f64)> {
    match (mechanism, min, max) {
        (Mechanism::C, Some(lo), Some(hi)) => Ok((lo, hi)),
        (Mechanism::C, None, None) => {
            default.ok_or_else(|| Failure::usage("mechanism C needs --gamma2-min and --gamma2-max"))
        }
        (Mechanism::C, _, _) => Err(Failure::usage("--gamma2-min and --gamma2-max must be given together")),
        (_, None, None) => Ok((0.0, 0.0)),
        (m, _, _) => Err(Failure::usage(format!("--gamma2-min/--gamma2-max apply only to mechanism C, not {m}"))),
    }
}

#[derive(Serialize)]
struct Columns<'a> {
    target: &'a str,
    partner: &'a str,
    adjusters: &'a [String],
}

#[derive(Serialize)]
struct RegionSummary {
    lower: f64,
    upper: f64,
    argmin: (f64, f64),
    argmax: (f64, f64),
    grid_points: usize,
    failed: usize,
}

#[derive(Serialize)]
struct AnalysisReport<'a> {
    columns: Columns<'a>,
    mechanism: Mechanism,
    mask_pattern: MaskPattern,
    n_rows: usize,
    n_complete: usize,
    n2: Option<usize>,
    alpha: f64,
    gamma_box: GammaBox,
    region: RegionSummary,
    /// Regularity checks at the corners of the γ box.
    regularity: Vec<RegularityReport>,
    trace: Vec<TraceRow>,
}

fn box_corners(b: &GammaBox, mechanism: Mechanism) -> Vec<(f64, f64)> {
    let g2 = if mechanism == Mechanism::C { vec![b.gamma2_min, b.gamma2_max] } else { vec![0.0] };
    let mut corners = Vec::new();
    for g1 in [b.gamma1_min, b.gamma1_max] {
        for &g in &g2 {
            if !corners.contains(&(g1, g)) {
                corners.push((g1, g));
            }
        }
    }
    corners
}

fn trace_csv(trace: &[TraceRow]) -> CliResult<Vec<u8>> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let run = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(["gamma", "gamma2", "rho_hat", "lower", "upper", "status"])?;
        for t in trace {
            w.write_record([
                t.gamma.to_string(),
                t.gamma2.to_string(),
                opt(t.rho_hat),
                opt(t.lower),
                opt(t.upper),
                t.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    run(&mut w).map_err(|e| Failure::unreadable(e.to_string()))?;
    w.into_inner().map_err(|e| Failure::unreadable(e.to_string()))
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<()> {
    let (g2_min, g2_max) = gamma2_range(args.mechanism, args.gamma2_min, args.gamma2_max, None)?;
    let gamma_box = GammaBox::new((args.gamma_min, args.gamma_max), (g2_min, g2_max)).map_err(Failure::from_config)?;
    check_grid_and_alpha(args.grid, args.alpha)?;
    let roles = ColumnRoles {
        target: args.target.clone(),
        partner: args.partner.clone(),
        adjusters: args.adjust.iter().map(|s| s.trim().to_string()).collect(),
    };

    let dataset = read_dataset(&args.input, &roles)?;
    let pattern = dataset.mask_pattern();
    dataset.check_mechanism(args.mechanism).map_err(Failure::from_estimation)?;
    let prepared = PreparedEstimator::new(&dataset, args.mechanism).map_err(Failure::from_estimation)?;
    let region = region_from_prepared(&prepared, &gamma_box, args.alpha, args.grid, Execution::default())
        .map_err(Failure::from_estimation)?;

    let report = AnalysisReport {
        columns: Columns { target: &roles.target, partner: &roles.partner, adjusters: &roles.adjusters },
        mechanism: args.mechanism,
        mask_pattern: pattern,
        n_rows: prepared.n_rows(),
        n_complete: prepared.n_complete(),
        n2: prepared.n2(),
        alpha: args.alpha,
        gamma_box: region.gamma_box,
        region: RegionSummary {
            lower: region.lower,
            upper: region.upper,
            argmin: region.argmin,
            argmax: region.argmax,
            grid_points: region.grid.len(),
            failed: region.failed,
        },
        regularity: box_corners(&region.gamma_box, args.mechanism)
            .into_iter()
            .map(|(a, b)| prepared.regularity(a, b))
            .collect(),
        trace: region.trace(),
    };
    let bytes = match args.format {
        Format::Json => to_json(&report)?,
        Format::Csv => trace_csv(&report.trace)?,
    };
    write_output(args.out.as_deref(), &bytes)?;
    eprintln!(
        "mechanism {} ({} mask), n = {}, complete = {}: region [{}, {}] over {} grid points, {} failed",
        report.mechanism,
        serde_json::to_value(report.mask_pattern).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        report.n_rows,
        report.n_complete,
        report.region.lower,
        report.region.upper,
        report.region.grid_points,
        report.region.failed
    );
    Ok(())
}

fn parse_range(s: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::usage(format!("--ur expects 'lo,hi', got '{s}'"));
    match parts.as_slice() {
        [lo, hi] => Ok((lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn design(mechanism: Mechanism, n: usize, gamma0: f64, gamma20: f64, seed: u64) -> CliResult<SimulationDesign> {
    check_gamma(gamma0).map_err(|e| Failure::usage(format!("--gamma0: {e}")))?;
    check_gamma(gamma20).map_err(|e| Failure::usage(format!("--gamma20: {e}")))?;
    let design = SimulationDesign::new(n, mechanism, gamma0, seed).with_gamma20(gamma20);
    design.validate().map_err(Failure::from_config)?;
    Ok(design)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let design = design(args.mechanism, args.n, args.gamma0, args.gamma20, args.seed)?;
    if args.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let ur = parse_range(&args.ur)?;
    let g2 = gamma2_range(args.mechanism, args.gamma2_min, args.gamma2_max, Some(ur))?;
    let ur_box = GammaBox::new(ur, g2).map_err(Failure::from_config)?;
    check_grid_and_alpha(args.grid, args.alpha)?;

    let report = run_coverage_experiment(&design, args.reps, args.alpha, &ur_box, args.grid)
        .map_err(Failure::from_estimation)?;

    let mut json = Vec::new();
    report.write_json(&mut json).map_err(Failure::from_estimation)?;
    json.push(b'\n');
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(Failure::from_estimation)?;

    let summary = report.summary_lines().join("\n");
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::unreadable(format!("cannot create {}: {e}", dir.display())))?;
            write_output(Some(&dir.join("coverage.json")), &json)?;
            write_output(Some(&dir.join("replicates.csv")), &csv)?;
            println!("{summary}");
        }
        None => {
            let bytes = if args.format == Format::Json { json } else { csv };
            write_output(None, &bytes)?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let design = design(args.mechanism, args.n, args.gamma0, args.gamma20, args.seed)?;
    let s = simulate_sample(&design, 0).map_err(Failure::from_estimation)?;
    let cell = |v: f64, observed: bool| if observed { v.to_string() } else { "NA".to_string() };

    let mut buf = BufWriter::new(Vec::new());
    let mut emit = || -> io::Result<()> {
        writeln!(buf, "{}", COLUMN_NAMES.join(","))?;
        for i in 0..s.target.len() {
            writeln!(
                buf,
                "{},{},{},{}",
                cell(s.target[i], s.target_observed[i]),
                cell(s.partner[i], s.partner_observed[i]),
                s.age[i],
                s.hypertension[i]
            )?;
        }
        buf.flush()
    };
    emit().map_err(|e| Failure::unreadable(e.to_string()))?;
    let bytes = buf.into_inner().map_err(|e| Failure::unreadable(e.to_string()))?;
    match &args.out {
        Some(path) => File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Failure::unreadable(format!("cannot write {}: {e}", path.display()))),
        None => write_output(None, &bytes),
    }
}
