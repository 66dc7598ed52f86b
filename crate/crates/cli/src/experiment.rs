//! Experiment grids: the three published tables plus custom grid files,
//! run cell by cell with a bounded worker pool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use ff_core::data::{Dataset, DatasetName, Split};
use ff_core::eval::evaluate_checkpoint;
use ff_core::schedule::PhaseSchedule;

use crate::config::{ModeArg, Settings, StrategyArg};
use crate::run::{csv_err, execute_training, load_split};
use crate::table::{self, Cell};
use crate::{dataset_root, CliError, ExperimentArgs};

pub const RESULTS_FILE: &str = "results.csv";
pub const TABLE_FILE: &str = "table.md";

const GRID_DATASETS: [DatasetName; 2] = [DatasetName::Mnist, DatasetName::FashionMnist];
const GRID_STRATEGIES: [StrategyArg; 2] = [StrategyArg::WrongLabel, StrategyArg::Masks];

pub struct ExperimentGrid {
    pub name: String,
    pub datasets: Vec<DatasetName>,
    pub strategies: Vec<StrategyArg>,
    pub schedules: Vec<PhaseSchedule>,
    pub column_labels: Vec<String>,
}

/// Equal awake and sleep periods from 1 up to 128 batches.
pub fn table1() -> ExperimentGrid {
    let periods = [1u32, 2, 4, 8, 16, 32, 64, 128];
    ExperimentGrid {
        name: "table1".into(),
        datasets: GRID_DATASETS.to_vec(),
        strategies: GRID_STRATEGIES.to_vec(),
        schedules: periods
            .iter()
            .map(|&p| PhaseSchedule::Alternating {
                awake_period: p,
                sleep_period: p,
            })
            .collect(),
        column_labels: periods.iter().map(|p| p.to_string()).collect(),
    }
}

/// Sleep deprivation: awake period grows while sleep stays at 1 batch.
pub fn table2() -> ExperimentGrid {
    let awake = [1u32, 2, 4, 8, 16];
    ExperimentGrid {
        name: "table2".into(),
        datasets: GRID_DATASETS.to_vec(),
        strategies: GRID_STRATEGIES.to_vec(),
        schedules: awake
            .iter()
            .map(|&a| PhaseSchedule::Alternating {
                awake_period: a,
                sleep_period: 1,
            })
            .collect(),
        column_labels: awake.iter().map(|a| a.to_string()).collect(),
    }
}

/// The baseline: both phases trained in every step.
pub fn table3() -> ExperimentGrid {
    ExperimentGrid {
        name: "table3".into(),
        datasets: GRID_DATASETS.to_vec(),
        strategies: GRID_STRATEGIES.to_vec(),
        schedules: vec![PhaseSchedule::Unseparated],
        column_labels: vec!["Unseparated".into()],
    }
}

fn parse_schedule_token(token: &str) -> Result<(PhaseSchedule, String), CliError> {
    let parts: Vec<&str> = token.split(':').collect();
    let parse_period = |s: &str| -> Result<u32, CliError> {
        s.parse().map_err(|_| {
            CliError::Env(format!("grid error: bad period '{s}' in schedule '{token}'"))
        })
    };
    match parts.as_slice() {
        ["unseparated"] => Ok((PhaseSchedule::Unseparated, "Unseparated".into())),
        ["equal", p] => {
            let p = parse_period(p)?;
            Ok((
                PhaseSchedule::Alternating {
                    awake_period: p,
                    sleep_period: p,
                },
                p.to_string(),
            ))
        }
        ["alternating", a, s] => {
            let (a, s) = (parse_period(a)?, parse_period(s)?);
            Ok((
                PhaseSchedule::Alternating {
                    awake_period: a,
                    sleep_period: s,
                },
                format!("{a}/{s}"),
            ))
        }
        _ => Err(CliError::Env(format!(
            "grid error: unknown schedule '{token}' \
             (expected unseparated, equal:<p>, or alternating:<awake>:<sleep>)"
        ))),
    }
}

/// Keeps `values` in published order, deduplicated, restricted to the
/// requested subset.
fn grid_order<T: PartialEq + Copy>(canonical: &[T], requested: &[T]) -> Vec<T> {
    canonical
        .iter()
        .copied()
        .filter(|c| requested.contains(c))
        .collect()
}

/// Parses a custom grid file: the usual config keys plus the axis lists
/// `datasets`, `strategies`, and `schedules`.
pub fn custom_grid(path: &Path, base: &mut Settings) -> Result<ExperimentGrid, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Env(format!("grid error: cannot read {}: {e}", path.display())))?;
    let mut scalars = String::new();
    let mut datasets: Vec<DatasetName> = Vec::new();
    let mut strategies: Vec<StrategyArg> = Vec::new();
    let mut schedules: Vec<PhaseSchedule> = Vec::new();
    let mut column_labels: Vec<String> = Vec::new();

    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Env(format!(
                "grid error: expected 'key = value', got '{line}'"
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "datasets" => {
                for token in value.split(',') {
                    datasets.push(token.trim().parse().map_err(|e| {
                        CliError::Env(format!("grid error: datasets: {e}"))
                    })?);
                }
            }
            "strategies" => {
                for token in value.split(',') {
                    strategies.push(match token.trim() {
                        "wrong-label" => StrategyArg::WrongLabel,
                        "masks" => StrategyArg::Masks,
                        other => {
                            return Err(CliError::Env(format!(
                                "grid error: strategies: unknown strategy '{other}'"
                            )))
                        }
                    });
                }
            }
            "schedules" => {
                for token in value.split(',') {
                    let (schedule, label) = parse_schedule_token(token.trim())?;
                    schedules.push(schedule);
                    column_labels.push(label);
                }
            }
            _ => {
                scalars.push_str(line);
                scalars.push('\n');
            }
        }
    }
    if datasets.is_empty() || strategies.is_empty() || schedules.is_empty() {
        return Err(CliError::Env(
            "grid error: a custom grid needs datasets, strategies, and schedules".into(),
        ));
    }
    base.apply_text(&scalars)?;

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".into());
    Ok(ExperimentGrid {
        name,
        datasets: grid_order(&GRID_DATASETS, &datasets),
        strategies: grid_order(&GRID_STRATEGIES, &strategies),
        schedules,
        column_labels,
    })
}

/// One cell's outcome as recorded in results.csv.
struct CellOutcome {
    accuracy: Option<f64>,
    final_goodness: Option<f32>,
    no_learning: bool,
    wall_seconds: f64,
    error: Option<String>,
    checkpoint: String,
    log: String,
    config_hash: String,
}

struct CellSpec {
    dataset: DatasetName,
    strategy: StrategyArg,
    schedule_index: usize,
    settings: Settings,
    dir: PathBuf,
    slug: String,
}

fn schedule_slug(s: &PhaseSchedule) -> String {
    match s {
        PhaseSchedule::Unseparated => "unseparated".into(),
        PhaseSchedule::Alternating {
            awake_period,
            sleep_period,
        } => format!("a{awake_period}-s{sleep_period}"),
    }
}

/// Mean positive goodness over each layer's final epoch, averaged
/// across layers; drives the "-" rendering rule.
fn final_goodness(outcome: &crate::run::RunOutcome, batches_per_epoch: usize) -> Option<f32> {
    let layers = outcome.checkpoint.layers.len();
    let mut sum = 0.0f32;
    for layer in 1..=layers {
        sum += outcome.log.final_positive_goodness(layer, batches_per_epoch)?;
    }
    Some(sum / layers as f32)
}

fn run_cell(
    spec: &CellSpec,
    train: &Arc<Dataset>,
    test: &Dataset,
) -> Result<CellOutcome, CliError> {
    let outcome = execute_training(&spec.settings, train, &spec.dir)?;
    let evaluator = spec.settings.evaluator();
    let mut opts = ff_core::eval::EvalOptions::default();
    opts.probe.seed = spec.settings.probe_seed();
    let accuracy = evaluate_checkpoint(
        &outcome.checkpoint,
        Some(train.as_ref()),
        test,
        evaluator,
        &opts,
    )?;

    let batches_per_epoch = train.len().div_ceil(spec.settings.batch_size);
    let goodness = final_goodness(&outcome, batches_per_epoch);
    let no_learning = (accuracy - 0.10).abs() <= 0.02
        && goodness.is_some_and(|g| (g as f64) < spec.settings.hyper.threshold / 10.0);
    Ok(CellOutcome {
        accuracy: Some(accuracy),
        final_goodness: goodness,
        no_learning,
        wall_seconds: outcome.wall_seconds,
        error: None,
        checkpoint: outcome.checkpoint_path.display().to_string(),
        log: outcome.log_path.display().to_string(),
        config_hash: outcome.config_hash,
    })
}

fn results_header() -> [&'static str; 17] {
    [
        "cell",
        "dataset",
        "strategy",
        "mode",
        "awake_period",
        "sleep_period",
        "epochs_per_layer",
        "seed",
        "evaluator",
        "status",
        "accuracy",
        "final_goodness",
        "no_learning",
        "wall_seconds",
        "checkpoint",
        "log",
        "config_hash",
    ]
}

fn record_fields(spec: &CellSpec, outcome: &CellOutcome) -> Vec<String> {
    let s = &spec.settings;
    vec![
        spec.slug.clone(),
        s.dataset.to_string(),
        s.strategy().kind_name().to_string(),
        s.schedule().mode_name().to_string(),
        s.schedule().awake_period().to_string(),
        s.schedule().sleep_period().to_string(),
        s.epochs_per_layer.to_string(),
        s.seed.to_string(),
        s.evaluator().to_string(),
        outcome
            .error
            .as_ref()
            .map_or_else(|| "ok".to_string(), |e| format!("error: {e}")),
        outcome.accuracy.map_or_else(String::new, |a| a.to_string()),
        outcome
            .final_goodness
            .map_or_else(String::new, |g| g.to_string()),
        outcome.no_learning.to_string(),
        format!("{:.3}", outcome.wall_seconds),
        outcome.checkpoint.clone(),
        outcome.log.clone(),
        outcome.config_hash.clone(),
    ]
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get() / 2)
        .unwrap_or(1)
        .max(1)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let o = &args.overrides;
    if o.mode.is_some() || o.awake_period.is_some() || o.sleep_period.is_some() {
        return Err(CliError::Usage(
            "the grid defines its own schedules; --mode, --awake-period, and --sleep-period \
             do not apply to experiment"
                .into(),
        ));
    }

    let mut base = match &o.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let mut grid = match args.grid.as_str() {
        "table1" => table1(),
        "table2" => table2(),
        "table3" => table3(),
        path => custom_grid(Path::new(path), &mut base)?,
    };
    if let Some(seed) = o.seed {
        base.seed = seed;
    }
    if let Some(epochs) = o.epochs_per_layer {
        base.epochs_per_layer = epochs;
    }
    if let Some(dataset) = o.dataset {
        grid.datasets = grid_order(&GRID_DATASETS, &[dataset]);
    }
    if let Some(strategy) = o.strategy {
        grid.strategies = grid_order(&GRID_STRATEGIES, &[strategy]);
    }

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("ff-{}", grid.name)));
    std::fs::create_dir_all(&out)?;

    let root = dataset_root(o.dataset_dir.as_ref());
    let mut data: BTreeMap<&str, (Arc<Dataset>, Arc<Dataset>)> = BTreeMap::new();
    for &dataset in &grid.datasets {
        let train = Arc::new(load_split(&root, dataset, Split::Train)?);
        let test = Arc::new(load_split(&root, dataset, Split::Test)?);
        data.insert(dataset.dir_name(), (train, test));
    }

    let mut cells: Vec<CellSpec> = Vec::new();
    for &dataset in &grid.datasets {
        for &strategy in &grid.strategies {
            for (i, schedule) in grid.schedules.iter().enumerate() {
                let mut settings = base.clone();
                settings.dataset = dataset;
                settings.strategy_kind = strategy;
                match *schedule {
                    PhaseSchedule::Unseparated => settings.mode = ModeArg::Unseparated,
                    PhaseSchedule::Alternating {
                        awake_period,
                        sleep_period,
                    } => {
                        settings.mode = ModeArg::Alternating;
                        settings.awake_period = awake_period;
                        settings.sleep_period = sleep_period;
                    }
                }
                let slug = format!(
                    "{}-{}-{}",
                    dataset.dir_name(),
                    settings.strategy().kind_name(),
                    schedule_slug(schedule)
                );
                cells.push(CellSpec {
                    dataset,
                    strategy,
                    schedule_index: i,
                    dir: out.join("cells").join(&slug),
                    slug,
                    settings,
                });
            }
        }
    }

    let workers = args.workers.unwrap_or_else(default_workers).max(1);
    let total = cells.len();
    println!(
        "grid {}: {} cells, {} workers, epochs_per_layer {}",
        grid.name, total, workers, base.epochs_per_layer
    );

    let results_path = out.join(RESULTS_FILE);
    let writer = csv::Writer::from_path(&results_path)
        .map_err(|e| CliError::Env(format!("cannot create {}: {e}", results_path.display())))?;
    let sink = Mutex::new((writer, 0usize));
    sink.lock()
        .unwrap()
        .0
        .write_record(results_header())
        .map_err(csv_err)?;

    let next = AtomicUsize::new(0);
    let outcomes: Vec<Mutex<Option<CellOutcome>>> =
        (0..total).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers.min(total.max(1)) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= total {
                    return;
                }
                let spec = &cells[index];
                let (train, test) = &data[spec.dataset.dir_name()];
                let outcome = run_cell(spec, train, test).unwrap_or_else(|e| CellOutcome {
                    accuracy: None,
                    final_goodness: None,
                    no_learning: false,
                    wall_seconds: 0.0,
                    error: Some(e.to_string()),
                    checkpoint: String::new(),
                    log: String::new(),
                    config_hash: spec.settings.config_hash(),
                });

                let mut sink = sink.lock().unwrap();
                let _ = sink.0.write_record(record_fields(spec, &outcome));
                let _ = sink.0.flush();
                sink.1 += 1;
                match (&outcome.error, outcome.accuracy) {
                    (Some(e), _) => {
                        println!("[{}/{}] {}: error: {}", sink.1, total, spec.slug, e)
                    }
                    (None, Some(a)) => println!(
                        "[{}/{}] {}: accuracy {:.4} ({:.0}s)",
                        sink.1, total, spec.slug, a, outcome.wall_seconds
                    ),
                    (None, None) => {}
                }
                drop(sink);
                *outcomes[index].lock().unwrap() = Some(outcome);
            });
        }
    });

    let rows: Vec<(DatasetName, StrategyArg)> = grid
        .datasets
        .iter()
        .flat_map(|&d| grid.strategies.iter().map(move |&s| (d, s)))
        .collect();
    let mut table_cells: Vec<Vec<Cell>> =
        vec![vec![Cell::Missing; grid.column_labels.len()]; rows.len()];
    for (spec, outcome) in cells.iter().zip(&outcomes) {
        let row = rows
            .iter()
            .position(|&(d, s)| d == spec.dataset && s == spec.strategy)
            .expect("cell row in table");
        let cell = match &*outcome.lock().unwrap() {
            Some(o) if o.error.is_some() => Cell::Failed,
            Some(o) if o.no_learning => Cell::NoLearning,
            Some(o) => o.accuracy.map_or(Cell::Failed, Cell::Accuracy),
            None => Cell::Missing,
        };
        table_cells[row][spec.schedule_index] = cell;
    }
    let markdown = table::render(&rows, &grid.column_labels, &table_cells);
    std::fs::write(out.join(TABLE_FILE), &markdown)?;
    println!("\n{markdown}");
    println!("results: {}", results_path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_grids_have_canonical_shapes() {
        let t1 = table1();
        assert_eq!(t1.schedules.len(), 8);
        assert_eq!(t1.column_labels.first().map(String::as_str), Some("1"));
        assert_eq!(t1.column_labels.last().map(String::as_str), Some("128"));
        let t2 = table2();
        assert_eq!(t2.schedules.len(), 5);
        assert!(t2.schedules.iter().all(|s| s.sleep_period() == 1));
        let t3 = table3();
        assert_eq!(t3.schedules, vec![PhaseSchedule::Unseparated]);
        for grid in [t1, t2, t3] {
            assert_eq!(grid.datasets, GRID_DATASETS.to_vec());
            assert_eq!(grid.strategies, GRID_STRATEGIES.to_vec());
        }
    }

    #[test]
    fn schedule_tokens_parse() {
        let (s, label) = parse_schedule_token("equal:8").unwrap();
        assert_eq!(
            s,
            PhaseSchedule::Alternating {
                awake_period: 8,
                sleep_period: 8
            }
        );
        assert_eq!(label, "8");
        let (s, label) = parse_schedule_token("alternating:4:1").unwrap();
        assert_eq!(
            s,
            PhaseSchedule::Alternating {
                awake_period: 4,
                sleep_period: 1
            }
        );
        assert_eq!(label, "4/1");
        assert!(parse_schedule_token("weekly").is_err());
    }

    #[test]
    fn grid_order_restricts_and_orders() {
        let got = grid_order(
            &GRID_DATASETS,
            &[DatasetName::FashionMnist, DatasetName::Mnist],
        );
        assert_eq!(got, GRID_DATASETS.to_vec());
        let got = grid_order(&GRID_STRATEGIES, &[StrategyArg::Masks]);
        assert_eq!(got, vec![StrategyArg::Masks]);
    }
}
