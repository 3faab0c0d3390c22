use std::path::{Path, PathBuf};

use log::info;
use smdd::bench::{run_replication, BenchRow, ReplicationPlan, TestProblem};
use smdd::design::{generate_lhd, optimize_lhd, slhd_with_rng, AnnealOptions, DesignMatrix, LevelStyle};
use smdd::engine::{fit_surrogates, DistanceVariant, SmddConfig, SmddState};
use smdd::metrics::{aid, mpv, test_points, MetricReport};
use smdd::pca::InnerResponseMatrix;
use smdd::rng::rng_from_seed;
use smdd::SmddError;

use crate::config::RunConfigFile;
use crate::error::{CliError, CliResult};
use crate::io::{
    fmt_num, fmt_row, load_state, numbered, parse_row, read_design, read_responses, save_state,
    write_design, write_responses, write_table, write_trace, StateLock,
};

fn level_style(random_in_cell: bool) -> LevelStyle {
    if random_in_cell {
        LevelStyle::RandomInCell
    } else {
        LevelStyle::Midpoint
    }
}

fn emit_design(d: &DesignMatrix, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => write_design(p, d),
        None => {
            println!("{}", numbered("x", d.k()).join(","));
            for r in d.rows() {
                println!("{}", fmt_row(r));
            }
            Ok(())
        }
    }
}

pub struct LhdOptions {
    pub n: usize,
    pub k: usize,
    pub maximin: bool,
    pub q: f64,
    pub budget: Option<usize>,
    pub random_in_cell: bool,
    pub seed: u64,
}

pub fn lhd(o: &LhdOptions, out: Option<&Path>) -> CliResult<()> {
    let style = level_style(o.random_in_cell);
    let design = if o.maximin {
        let mut rng = rng_from_seed(o.seed);
        let start = smdd::design::lhd_with_rng(o.n, o.k, style, &mut rng)?;
        let opts = AnnealOptions {
            q: o.q,
            budget: o.budget.unwrap_or(10_000 * o.k.max(1)),
            ..AnnealOptions::for_dimension(o.k)
        };
        optimize_lhd(start, opts, &mut rng)?
    } else {
        generate_lhd(o.n, o.k, style, o.seed)?
    };
    emit_design(&design.design, out)
}

pub fn slhd(t: usize, m: usize, k: usize, random_in_cell: bool, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let mut rng = rng_from_seed(seed);
    let set = slhd_with_rng(t, m, k, level_style(random_in_cell), AnnealOptions::for_dimension(k), &mut rng)?;
    let mut header = numbered("x", k);
    header.push("slice".into());
    let rows: Vec<Vec<String>> = set
        .slices
        .iter()
        .enumerate()
        .flat_map(|(s, slice)| {
            slice.design.to_rows().into_iter().map(move |r| {
                let mut cells: Vec<String> = r.iter().map(|v| fmt_num(*v)).collect();
                cells.push((s + 1).to_string());
                cells
            })
        })
        .collect();
    match out {
        Some(p) => write_table(p, &header, &rows),
        None => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
            Ok(())
        }
    }
}

fn method_label(config: &SmddConfig) -> &'static str {
    match config.distance {
        DistanceVariant::Stochastic => "smdd",
        DistanceVariant::Deterministic => "smdd-det",
    }
}

/// AID on inputs and on the design's own PC scores, MPV of each component GP.
pub fn design_metrics(
    method: &str,
    config: &SmddConfig,
    x: &DesignMatrix,
    y: &InnerResponseMatrix,
    n_test: usize,
) -> CliResult<MetricReport> {
    let s = fit_surrogates(x, y, &config.surrogate_settings())?;
    let tests = test_points(n_test, x.k(), config.seed)?;
    Ok(MetricReport {
        method: method.to_string(),
        seed: config.seed,
        n: x.n(),
        aid_x: aid(&x.to_rows())?,
        aid_h: aid(&s.scores)?,
        mpv: s.gps.iter().map(|g| mpv(g, &tests)).collect::<smdd::Result<_>>()?,
    })
}

fn metric_cells(r: &MetricReport, width: usize) -> Vec<String> {
    let mut cells = vec![
        r.method.clone(),
        r.seed.to_string(),
        r.n.to_string(),
        fmt_num(r.aid_x),
        fmt_num(r.aid_h),
    ];
    cells.extend((0..width).map(|i| r.mpv.get(i).map(|v| fmt_num(*v)).unwrap_or_default()));
    cells
}

fn metric_header(width: usize) -> Vec<String> {
    let mut h: Vec<String> = ["method", "seed", "N", "aid_x", "aid_h"].map(String::from).to_vec();
    h.extend(numbered("mpv_", width));
    h
}

pub fn write_metrics(path: &Path, reports: &[MetricReport]) -> CliResult<()> {
    let width = reports.iter().map(|r| r.mpv.len()).max().unwrap_or(0);
    let rows: Vec<Vec<String>> = reports.iter().map(|r| metric_cells(r, width)).collect();
    write_table(path, &metric_header(width), &rows)
}

fn export_state(state: &SmddState, dir: &Path) -> CliResult<()> {
    write_design(&dir.join("design.csv"), state.design())?;
    write_responses(&dir.join("responses.csv"), state.responses())?;
    write_trace(&dir.join("trace.csv"), state)
}

pub fn run(config_path: &Path, out_dir: Option<PathBuf>) -> CliResult<()> {
    let file = RunConfigFile::load(config_path)?;
    let config = file.engine_config()?;
    let problem = file
        .problem()?
        .ok_or_else(|| CliError::Usage("run needs a built-in problem; use init/ask/tell for external simulators".into()))?;
    let dir = out_dir.or(file.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let mut state = SmddState::new(config.clone())?;
    state.run(problem.inner)?;
    export_state(&state, &dir)?;
    let report = design_metrics(method_label(&config), &config, state.design(), state.responses(), file.test_points)?;
    write_metrics(&dir.join("metrics.csv"), &[report])?;
    info!("wrote {} points to {}", state.design().n(), dir.display());
    Ok(())
}

pub fn init(
    config_path: &Path,
    state_path: &Path,
    initial_design: Option<&Path>,
    initial_responses: Option<&Path>,
    force: bool,
) -> CliResult<()> {
    let _lock = StateLock::acquire(state_path)?;
    if !force {
        crate::io::ensure_file_absent(state_path)?;
    }
    let config = RunConfigFile::load(config_path)?.engine_config()?;
    let state = match (initial_design, initial_responses) {
        (None, None) => SmddState::new(config)?,
        (Some(d), None) => SmddState::with_initial_design(config, read_design(d)?)?,
        (Some(d), Some(r)) => SmddState::with_initial_data(config, read_design(d)?, read_responses(r)?)?,
        (None, Some(_)) => {
            return Err(CliError::Usage("--initial-responses needs --initial-design".into()));
        }
    };
    save_state(state_path, &state)
}

pub fn ask(state_path: &Path) -> CliResult<()> {
    let _lock = StateLock::acquire(state_path)?;
    let mut state = load_state(state_path)?;
    match state.ask() {
        Ok(point) => {
            save_state(state_path, &state)?;
            println!("{}", fmt_row(&point));
            Ok(())
        }
        Err(SmddError::Finished(n)) => {
            eprintln!("design complete ({n} points)");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn tell(state_path: &Path, point: &str, values: &str) -> CliResult<()> {
    let _lock = StateLock::acquire(state_path)?;
    let mut state = load_state(state_path)?;
    state.tell(&parse_row(point)?, &parse_row(values)?)?;
    save_state(state_path, &state)
}

pub struct MetricsInput<'a> {
    pub state: Option<&'a Path>,
    pub design: Option<&'a Path>,
    pub responses: Option<&'a Path>,
    pub method: &'a str,
    pub seed: u64,
    pub test_points: usize,
}

pub fn metrics(input: &MetricsInput, out_dir: &Path) -> CliResult<()> {
    let (config, x, y, method) = match (input.state, input.design, input.responses) {
        (Some(p), None, None) => {
            let state = load_state(p)?;
            export_state(&state, out_dir)?;
            let c = state.config().clone();
            let label = method_label(&c).to_string();
            (c, state.design().clone(), state.responses().clone(), label)
        }
        (None, Some(d), Some(r)) => {
            let x = read_design(d)?;
            let y = read_responses(r)?;
            if x.n() != y.n() {
                return Err(CliError::Usage("design and responses differ in length".into()));
            }
            let c = SmddConfig::new(x.k(), y.l(), x.n() + 1, input.seed);
            (c, x, y, input.method.to_string())
        }
        _ => {
            return Err(CliError::Usage(
                "give either --state or both --design and --responses".into(),
            ))
        }
    };
    let report = design_metrics(&method, &config, &x, &y, input.test_points)?;
    write_metrics(&out_dir.join("metrics.csv"), &[report])
}

pub fn bench_rows_to_table(rows: &[BenchRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let width = rows.iter().map(|r| r.report.mpv.len()).max().unwrap_or(0);
    let mut header: Vec<String> = ["problem", "method", "initial", "seed", "N", "aid_x", "aid_h"]
        .map(String::from)
        .to_vec();
    header.extend(numbered("mpv_", width));
    let table = rows
        .iter()
        .map(|row| {
            let r = &row.report;
            let mut cells = vec![
                row.problem.clone(),
                r.method.clone(),
                row.initial.label().to_string(),
                r.seed.to_string(),
                r.n.to_string(),
                fmt_num(r.aid_x),
                fmt_num(r.aid_h),
            ];
            cells.extend((0..width).map(|i| r.mpv.get(i).map(|v| fmt_num(*v)).unwrap_or_default()));
            cells
        })
        .collect();
    (header, table)
}

pub fn bench(plan_path: &Path, out_dir: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(plan_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", plan_path.display())))?;
    let plan: ReplicationPlan =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", plan_path.display())))?;
    let problem = TestProblem::by_name(&plan.problem)?;
    let rows = run_replication(&plan, &problem)?;
    let (header, table) = bench_rows_to_table(&rows);
    write_table(&out_dir.join("bench.csv"), &header, &table)
}
