//! `podplan`: decompose schedules, plan pod fleets, compare methods and
//! benchmark scaling. Exit status 0 on success, 1 when a schedule cannot be
//! served, 2 on bad input or configuration.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use podplan_core::bench::{run_bench, worker_pool, BenchConfig, Family};
use podplan_core::decompose::decompose_instance;
use podplan_core::gtfs::{self, DemandOptions, FeedFilter, IngestOptions};
use podplan_core::itinerary::{itineraries_to_json, write_itinerary_csv};
use podplan_core::matching::{build_compatibility_dag, chain_summary, max_matching, reconstruct_chains};
use podplan_core::model::{Instance, Seconds, TimeGrid};
use podplan_core::report::{
    comparison_table, loglog_svg, write_comparison_csv, write_fits_csv, write_intervals_csv, write_report_csv,
    write_scaling_csv, write_timings_csv, Series,
};
use podplan_core::scenario::{compare_methods, run_method, Method, RunConfig, Scenario, COMPARE_DTS, HIERARCHICAL_DT};
use podplan_core::synth::{gen_instance, SynthParams};
use podplan_core::tsn::build_integrated_network;
use podplan_core::{PlanError, Result};

#[derive(Parser)]
#[command(name = "podplan", version, about = "Fleet sizing and empty-pod routing for modular transit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split bus runs into pod routes and report the minimum fleet.
    Decompose {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Plan one instance with one method and cost scenario.
    Solve(SolveArgs),
    /// Integrated method at several steps against the hierarchical method.
    Compare(CompareArgs),
    /// Time both methods over generated instances of growing size.
    Bench(BenchArgs),
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Build an instance from a GTFS feed and occupancy snapshots.
    Ingest(IngestArgs),
    /// Print the integrated time-space network, one arc per line.
    DumpNetwork {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 60)]
        dt: Seconds,
        #[arg(long, default_value = "S1")]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "hierarchical")]
    method: Method,
    #[arg(long, default_value_t = 30)]
    dt: Seconds,
    #[arg(long, default_value = "S1")]
    scenario: Scenario,
    /// Node cap per sub-network for hierarchical-capped.
    #[arg(long)]
    cap_nodes: Option<usize>,
    /// Seeds the S5 parking prices.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "S1,S2,S3,S4,S5")]
    scenarios: Vec<Scenario>,
    #[arg(long, value_delimiter = ',', default_values_t = COMPARE_DTS)]
    dts: Vec<Seconds>,
    #[arg(long, default_value_t = HIERARCHICAL_DT)]
    hierarchical_dt: Seconds,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "scaling")]
    family: Family,
    #[arg(long, value_delimiter = ',', default_value = "13,30,59")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "integrated,hierarchical")]
    methods: Vec<Method>,
    #[arg(long)]
    cap_nodes: Option<usize>,
    #[arg(long, default_value = "S1")]
    scenario: Scenario,
    #[arg(long, default_value_t = 60)]
    dt: Seconds,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs per cell; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    stations: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Seconds; a multiple of 60.
    #[arg(long, default_value_t = 4 * 3600)]
    horizon: Seconds,
    #[arg(long, default_value_t = 3)]
    demand_max: u32,
    #[arg(long, default_value_t = 2)]
    stops_min: usize,
    #[arg(long, default_value_t = 6)]
    stops_max: usize,
    /// Side of the square service area in metres.
    #[arg(long, default_value_t = 4000.0)]
    area_m: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory with stops, routes, trips, stop_times and calendar tables.
    #[arg(long)]
    feed: PathBuf,
    #[arg(long)]
    service_id: Option<String>,
    /// Route ids to keep.
    #[arg(long, value_delimiter = ',')]
    routes: Option<Vec<String>>,
    /// One NDJSON file per service day.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<PathBuf>,
    #[arg(long, default_value_t = gtfs::POD_CAPACITY)]
    capacity: u32,
    #[arg(long, default_value_t = gtfs::DEFAULT_SPEED_MPH)]
    speed_mph: f64,
    /// Captures farther than this from their trip are skipped.
    #[arg(long, default_value_t = 250.0)]
    match_radius_m: f64,
    /// JSON travel-time matrix in stops.txt order, used instead of distances.
    #[arg(long)]
    travel_matrix: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    provenance: Option<PathBuf>,
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| PlanError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| PlanError::io(path, e))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PlanError::io(dir, e))
}

fn decompose(instance: &Path) -> Result<()> {
    let inst = Instance::load_valid(instance)?;
    let routes = decompose_instance(&inst);
    let dag = build_compatibility_dag(&routes, &inst.travel)?;
    let chains = reconstruct_chains(&max_matching(&dag), &routes);
    let summary = chain_summary(&chains, &routes);
    let json = serde_json::json!({
        "routes": routes.iter().map(|r| serde_json::json!({
            "label": r.label(),
            "run": r.run_id,
            "visits": r.visits,
        })).collect::<Vec<_>>(),
        "compatibility_edges": dag.edge_count(),
        "matching": summary.matching,
        "fleet": summary.fleet,
        "chains": summary.chains,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn solve(a: &SolveArgs) -> Result<()> {
    let inst = Instance::load_valid(&a.instance)?;
    let cfg = RunConfig { scenario: a.scenario, method: a.method, dt: a.dt, cap_nodes: a.cap_nodes, seed: a.seed };
    let out = run_method(&inst, &instance_id(&a.instance), &cfg)?;
    out_dir(&a.out)?;
    let r = &out.report;
    write_report_csv(std::slice::from_ref(r), create(&a.out.join("report.csv"))?)?;
    write_timings_csv([r], create(&a.out.join("timings.csv"))?)?;
    write_intervals_csv([r], create(&a.out.join("intervals.csv"))?)?;
    write_text(&a.out.join("itineraries.json"), &itineraries_to_json(&out.itineraries)?)?;
    write_itinerary_csv(&out.itineraries, create(&a.out.join("itineraries.csv"))?)?;
    write_text(&a.out.join("run_report.json"), &serde_json::to_string_pretty(r)?)?;
    if !out.intervals.is_empty() {
        podplan_core::hierarchical::write_interval_csv(&out.intervals, create(&a.out.join("interval_costs.csv"))?)?;
    }
    println!(
        "{} {} dt={}s: objective {:.2}, fleet {}, {} routes, {:.1} ms",
        r.method,
        r.scenario,
        r.dt,
        r.objective_micro() / 1e6,
        r.fleet,
        r.routes,
        r.wall_ms
    );
    Ok(())
}

fn compare(a: &CompareArgs) -> Result<()> {
    let inst = Instance::load_valid(&a.instance)?;
    let cmp = compare_methods(&inst, &instance_id(&a.instance), &a.scenarios, &a.dts, a.hierarchical_dt, a.seed)?;
    out_dir(&a.out)?;
    write_comparison_csv(&cmp.rows, create(&a.out.join("report.csv"))?)?;
    write_timings_csv(cmp.rows.iter().map(|r| &r.report), create(&a.out.join("timings.csv"))?)?;
    write_intervals_csv(cmp.rows.iter().map(|r| &r.report), create(&a.out.join("intervals.csv"))?)?;
    let mut text = comparison_table(&cmp.rows);
    for (dt, e) in &cmp.s2_fleet_error {
        text += &format!("S2 integrated dt={dt}s relative fleet error: {:.2}%\n", e * 100.0);
    }
    write_text(&a.out.join("comparison.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        family: a.family,
        sizes: a.sizes.clone(),
        methods: a.methods.clone(),
        scenario: a.scenario,
        dt: a.dt,
        cap_nodes: a.cap_nodes,
        seed: a.seed,
        repeat: a.repeat,
    };
    let pool = worker_pool()?;
    let res = run_bench(&cfg, &pool)?;
    out_dir(&a.out)?;
    write_scaling_csv(&res.rows, create(&a.out.join("scaling.csv"))?)?;
    write_fits_csv(&res.fits, create(&a.out.join("fits.csv"))?)?;
    for (metric, file, label) in
        [("wall_ms", "scaling_time.svg", "wall time (ms)"), ("peak_rss_kb", "scaling_memory.svg", "peak RSS (kB)")]
    {
        let series: Vec<Series> = a
            .methods
            .iter()
            .map(|&m| Series {
                label: m.name(),
                points: res
                    .rows
                    .iter()
                    .filter(|r| r.method == m)
                    .filter_map(|r| {
                        let y = if metric == "wall_ms" { Some(r.wall_ms) } else { r.peak_rss_kb.map(|k| k as f64) };
                        y.map(|y| (r.edges as f64, y))
                    })
                    .collect(),
                fit: res
                    .fits
                    .iter()
                    .find(|f| f.method == m && f.metric == metric)
                    .map(|f| (f.fit.exponent, f.fit.intercept)),
            })
            .collect();
        write_text(&a.out.join(file), &loglog_svg(label, "edges", label, &series))?;
    }
    let stdout = io::stdout();
    let mut o = stdout.lock();
    for f in &res.fits {
        let _ = writeln!(o, "{} {}: exponent {:.3}, R^2 {:.3}", f.method, f.metric, f.fit.exponent, f.fit.r2);
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let p = SynthParams {
        seed: a.seed,
        stations: a.stations,
        runs: a.runs,
        horizon_s: a.horizon,
        demand_max: a.demand_max,
        stops_min: a.stops_min,
        stops_max: a.stops_max,
        area_m: a.area_m,
    };
    gen_instance(&p)?.save(&a.out)
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let opts = IngestOptions {
        feed_dir: a.feed.clone(),
        filter: FeedFilter { service_id: a.service_id.clone(), routes: a.routes.clone() },
        snapshot_days: a.snapshots.clone(),
        demand: DemandOptions { capacity: a.capacity, match_radius_m: a.match_radius_m },
        speed_mph: a.speed_mph,
        travel_override: a.travel_matrix.clone(),
    };
    let out = gtfs::ingest(&opts)?;
    for w in &out.profile.warnings {
        eprintln!("warning: {w}");
    }
    out.instance.save(&a.out)?;
    if let Some(p) = &a.provenance {
        gtfs::write_provenance_csv(&out.feed, &out.profile, create(p)?)?;
    }
    let excluded = out.profile.runs.iter().filter(|r| r.excluded).count();
    println!(
        "{} stations, {} runs ({excluded} excluded without observations), {} nudged stop times",
        out.instance.station_count(),
        out.instance.runs.len(),
        out.feed.nudged
    );
    Ok(())
}

fn dump_network(instance: &Path, dt: Seconds, scenario: Scenario, seed: u64) -> Result<()> {
    let inst = Instance::load_valid(instance)?;
    let routes = decompose_instance(&inst);
    let grid = TimeGrid::for_instance(&inst, dt)?;
    let net = build_integrated_network(&inst, &routes, &grid, &scenario.costs(inst.station_count(), seed)?)?;
    let stdout = io::stdout();
    net.dump(stdout.lock()).map_err(|e| PlanError::io("<stdout>", e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose { instance } => decompose(&instance),
        Command::Solve(a) => solve(&a),
        Command::Compare(a) => compare(&a),
        Command::Bench(a) => bench(&a),
        Command::Generate(a) => generate(&a),
        Command::Ingest(a) => ingest(&a),
        Command::DumpNetwork { instance, dt, scenario, seed } => dump_network(&instance, dt, scenario, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasible() { 1 } else { 2 })
        }
    }
}
