mod config;
mod render;

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use crowdnav::bench::{
    episodes_csv, run_bench, run_bench_with_policy, summary_table, BenchPlan, LocalPlannerConfig, MapGenParams,
    PlannerCombo, RunSettings, TsMode,
};
use crowdnav::engine::replay::{self, CostmapDump, ReplayError, ReplayLog};
use crowdnav::gridmap::{load_map, save_map};
use crowdnav::service::{serve_stdio, serve_tcp, LinePolicy, MapRegistry};
use crowdnav::{CrowdMode, EpisodeConfig, GlobalPlannerKind, LocalPlannerKind, RewardConfig};

use config::{parse_densities, split_list, Layer};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or names: exit 2.
    Usage(String),
    /// Runtime failure or replay divergence: exit 1.
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn fail(e: impl fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "crowdnav", version, about = "Crowd navigation simulator, benchmark and environment server")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a benchmark sweep and write CSV, JSON and summary reports.
    Bench(BenchArgs),
    /// Serve the environment protocol over TCP or stdio.
    Serve(ServeArgs),
    /// Render a replay log or costmap dump to PNG.
    Render(RenderArgs),
    /// Generate an indoor floor plan (PGM plus .meta sidecar).
    Mapgen(MapgenArgs),
    /// Verify a replay log by re-simulation.
    Replay(ReplayArgs),
}

/// Episode settings shared by `bench` and `serve`.
#[derive(Debug, Args)]
struct EpisodeArgs {
    #[arg(long)]
    max_steps: Option<usize>,
    /// Clearance added around walls for planning, in meters.
    #[arg(long)]
    planner_inflation: Option<f64>,
    #[arg(long)]
    goal_radius: Option<f64>,
    /// `full` or `baseline` (no orientation or pedestrian-avoidance terms).
    #[arg(long)]
    reward_terms: Option<String>,
    #[arg(long)]
    respawn_goals: Option<bool>,
}

impl EpisodeArgs {
    fn resolve(self, layer: &mut Layer) -> Result<EpisodeConfig, CliError> {
        let mut c = EpisodeConfig::default();
        c.max_steps = layer.take_or("max-steps", self.max_steps, c.max_steps)?;
        c.planner_inflation = layer.take_or("planner-inflation", self.planner_inflation, c.planner_inflation)?;
        c.goal_radius = layer.take_or("goal-radius", self.goal_radius, c.goal_radius)?;
        c.respawn_goals = layer.take_or("respawn-goals", self.respawn_goals, c.respawn_goals)?;
        match layer.take::<String>("reward-terms", self.reward_terms)?.as_deref() {
            None | Some("full") => {}
            Some("baseline") => c.reward = RewardConfig { enabled: crowdnav::engine::RewardTerms::baseline(), ..c.reward },
            Some(other) => return Err(CliError::Usage(format!("unknown reward terms {other:?}; valid: full, baseline"))),
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated map names: `gen:<seed>`, `empty:<W>x<H>`, a stem in
    /// --map-dir, or a path to a .pgm/.png with a .meta sidecar.
    #[arg(long)]
    maps: Option<String>,
    #[arg(long)]
    map_dir: Option<PathBuf>,
    /// Episodes per map.
    #[arg(long)]
    episodes: Option<usize>,
    /// Comma-separated `global+local` combos, e.g. `ppp+follower,fixed+follower`.
    #[arg(long)]
    combos: Option<String>,
    /// Pedestrian counts, `3-10` or `3,5,7`.
    #[arg(long)]
    densities: Option<String>,
    /// Comma-separated crowd modes.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    psv_distance: Option<f64>,
    /// `successful` or `all`.
    #[arg(long)]
    ts_mode: Option<String>,
    /// Address of an external policy, required by `*+external` combos.
    #[arg(long)]
    policy: Option<String>,
    /// Also write one replay log per episode under `<out>/replays`.
    #[arg(long)]
    replays: bool,
    #[command(flatten)]
    episode: EpisodeArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// TCP listen address.
    #[arg(long, conflicts_with = "stdio")]
    addr: Option<String>,
    /// Serve one session on stdin/stdout instead of TCP.
    #[arg(long)]
    stdio: bool,
    #[arg(long)]
    map_dir: Option<PathBuf>,
    #[command(flatten)]
    episode: EpisodeArgs,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Replay log or costmap dump.
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Pixels per map cell.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=32))]
    scale: u32,
}

#[derive(Debug, Args)]
struct MapgenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output image; the sidecar goes next to it. Default `map_<seed>.pgm`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Width in meters.
    #[arg(long)]
    width: Option<f64>,
    /// Height in meters.
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    /// Fraction of room interiors covered by clutter.
    #[arg(long)]
    clutter: Option<f64>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    log: PathBuf,
    /// After verifying, write the planning costmap as JSON.
    #[arg(long)]
    dump_costmap: Option<PathBuf>,
    /// Step whose costmap to dump; default the last.
    #[arg(long, requires = "dump_costmap")]
    at_step: Option<usize>,
}

const DEFAULT_MAPS: &str = "gen:1,gen:2,gen:3,gen:4,gen:5,gen:6";
const DEFAULT_COMBOS: &str = "ppp+follower,astar+follower,fixed+follower";

fn parse_combos(list: &str) -> Result<Vec<PlannerCombo>, CliError> {
    let combos: Vec<PlannerCombo> = split_list(list)
        .iter()
        .map(|name| {
            PlannerCombo::parse(name).ok_or_else(|| {
                let globals: Vec<&str> = GlobalPlannerKind::ALL.iter().map(|g| g.name()).collect();
                let locals: Vec<&str> = LocalPlannerKind::ALL.iter().map(|l| l.name()).collect();
                CliError::Usage(format!(
                    "unknown planner combo {name:?}; expected <global>+<local> with global one of {} and local one of {}",
                    globals.join(", "),
                    locals.join(", ")
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    if combos.is_empty() {
        return Err(CliError::Usage("no planner combos given".into()));
    }
    Ok(combos)
}

fn parse_modes(list: &str) -> Result<Vec<CrowdMode>, CliError> {
    let modes: Vec<CrowdMode> = split_list(list)
        .iter()
        .map(|m| {
            CrowdMode::parse(m).ok_or_else(|| {
                let valid: Vec<&str> = CrowdMode::ALL.iter().map(|m| m.name()).collect();
                CliError::Usage(format!("unknown crowd mode {m:?}; valid: {}", valid.join(", ")))
            })
        })
        .collect::<Result<_, _>>()?;
    if modes.is_empty() {
        return Err(CliError::Usage("no crowd modes given".into()));
    }
    Ok(modes)
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let mut layer = Layer::load(args.config.as_deref())?;
    let maps = layer.take_or("maps", args.maps, DEFAULT_MAPS.to_string())?;
    let map_dir = layer.take::<PathBuf>("map-dir", args.map_dir)?;
    let episodes = layer.take_or("episodes", args.episodes, 50)?;
    let combos = parse_combos(&layer.take_or("combos", args.combos, DEFAULT_COMBOS.to_string())?)?;
    let densities = parse_densities(&layer.take_or("densities", args.densities, "3-10".to_string())?)
        .map_err(CliError::Usage)?;
    let modes = parse_modes(&layer.take_or("modes", args.modes, "cooperative,uncooperative".to_string())?)?;
    let master_seed = layer.take_or("seed", args.seed, 0)?;
    let out = layer.take_or("out", args.out, PathBuf::from("bench-out"))?;
    let psv_distance = layer.take_or("psv-distance", args.psv_distance, RunSettings::default().psv_distance)?;
    let ts_mode = match layer.take_or("ts-mode", args.ts_mode, "successful".to_string())?.as_str() {
        "successful" => TsMode::Successful,
        "all" => TsMode::All,
        other => return Err(CliError::Usage(format!("unknown ts-mode {other:?}; valid: successful, all"))),
    };
    let policy_addr = layer.take::<String>("policy", args.policy)?;
    let replays = layer.take_or("replays", args.replays.then_some(true), false)?;
    let episode = args.episode.resolve(&mut layer)?;
    layer.finish()?;
    if episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    if !(psv_distance.is_finite() && psv_distance > 0.0) {
        return Err(CliError::Usage("--psv-distance must be positive".into()));
    }
    let external = combos.iter().any(|c| c.local == LocalPlannerKind::ExternalPolicy);
    if external && policy_addr.is_none() {
        return Err(CliError::Usage("combos with the external local planner need --policy <addr>".into()));
    }

    let registry = MapRegistry::new(episode.clone(), MapGenParams::default(), map_dir);
    let mut worlds = Vec::new();
    for name in split_list(&maps) {
        let path = Path::new(&name);
        let world = if matches!(path.extension().and_then(|e| e.to_str()), Some("pgm" | "png")) {
            let grid = load_map(path).map_err(|e| CliError::Usage(format!("map {name:?}: {e}")))?;
            registry.insert(&name, grid)
        } else {
            registry.resolve(&name).map_err(CliError::Usage)?
        };
        worlds.push((name, world));
    }
    if worlds.is_empty() {
        return Err(CliError::Usage("no maps given".into()));
    }

    let plan = BenchPlan {
        maps: worlds,
        combos,
        episodes_per_map: episodes,
        densities,
        modes,
        master_seed,
        settings: RunSettings { episode, local: LocalPlannerConfig::default(), psv_distance, record: replays },
        ts_mode,
    };
    log::info!("running {} tasks x {} combos", plan.tasks().len(), plan.combos.len());
    let output = match policy_addr {
        Some(addr) if external => {
            let stream = TcpStream::connect(&addr).map_err(|e| fail(format!("cannot reach policy at {addr}: {e}")))?;
            let reader = BufReader::new(stream.try_clone().map_err(fail)?);
            let mut policy = LinePolicy::new(reader, stream);
            run_bench_with_policy(&plan, &mut policy).map_err(fail)?
        }
        _ => run_bench(&plan).map_err(fail)?,
    };

    fs::create_dir_all(&out).map_err(|e| fail(format!("cannot create {}: {e}", out.display())))?;
    write(&out.join("episodes.csv"), episodes_csv(&output.records))?;
    let json = serde_json::to_string_pretty(&output.report).map_err(fail)?;
    write(&out.join("report.json"), json + "\n")?;
    let table = summary_table(&output.report);
    write(&out.join("summary.txt"), &table)?;
    if replays {
        let dir = out.join("replays");
        fs::create_dir_all(&dir).map_err(fail)?;
        for (record, text) in output.records.iter().zip(&output.replays) {
            let name = format!("{}_{:04}_{}.log", file_stem(&record.map), record.scenario_index, file_stem(&record.combo.to_string()));
            write(&dir.join(name), text)?;
        }
    }
    print!("{table}");
    if output.report.aborted > 0 {
        eprintln!("{} episode(s) aborted; see report.json", output.report.aborted);
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut layer = Layer::load(args.config.as_deref())?;
    let addr = layer.take_or("addr", args.addr, "127.0.0.1:7878".to_string())?;
    let stdio = layer.take_or("stdio", args.stdio.then_some(true), false)?;
    let map_dir = layer.take::<PathBuf>("map-dir", args.map_dir)?;
    let episode = args.episode.resolve(&mut layer)?;
    layer.finish()?;
    let registry = Arc::new(MapRegistry::new(episode, MapGenParams::default(), map_dir));
    if stdio {
        return serve_stdio(registry).map_err(fail);
    }
    let listener = TcpListener::bind(&addr).map_err(|e| fail(format!("cannot listen on {addr}: {e}")))?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = shutdown.clone();
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)).map_err(fail)?;
    eprintln!("listening on {}", listener.local_addr().map_err(fail)?);
    serve_tcp(listener, registry, shutdown).map_err(fail)?;
    log::info!("shut down");
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))
}

fn render_cmd(args: RenderArgs) -> Result<(), CliError> {
    let png = render::render(&read_text(&args.input)?, args.scale)?;
    write(&args.out, png)
}

fn mapgen(args: MapgenArgs) -> Result<(), CliError> {
    let mut layer = Layer::load(args.config.as_deref())?;
    let seed = layer
        .take::<u64>("seed", args.seed)?
        .ok_or_else(|| CliError::Usage("--seed is required".into()))?;
    let out = layer.take_or("out", args.out, PathBuf::from(format!("map_{seed}.pgm")))?;
    let d = MapGenParams::default();
    let params = MapGenParams {
        width_m: layer.take_or("width", args.width, d.width_m)?,
        height_m: layer.take_or("height", args.height, d.height_m)?,
        resolution: layer.take_or("resolution", args.resolution, d.resolution)?,
        clutter_density: layer.take_or("clutter", args.clutter, d.clutter_density)?,
        ..d
    };
    layer.finish()?;
    if !params.is_valid() {
        return Err(CliError::Usage(format!("invalid map parameters: {params:?}")));
    }
    let grid = crowdnav::bench::generate_indoor_map(seed, &params);
    save_map(&grid, &out).map_err(fail)?;
    println!("{}", out.display());
    Ok(())
}

fn replay_cmd(args: ReplayArgs) -> Result<(), CliError> {
    let text = read_text(&args.log)?;
    let steps = match replay::verify(&text) {
        Ok(n) => n,
        Err(ReplayError::Divergence { step, line }) => {
            return Err(CliError::Failure(format!("replay diverges at step {step} (line {line})")))
        }
        Err(e) => return Err(render::replay_failure(e)),
    };
    println!("ok: {steps} steps verified");
    if let Some(path) = args.dump_costmap {
        let log = ReplayLog::parse(&text).map_err(render::replay_failure)?;
        let k = args.at_step.unwrap_or(log.steps.len());
        if k > log.steps.len() {
            return Err(CliError::Usage(format!("--at-step {k} is past the last step {}", log.steps.len())));
        }
        let episode = replay::episode_at(&log.header, &log.commanded_actions(), k).map_err(fail)?;
        let json = serde_json::to_string(&CostmapDump::from_episode(&episode)).map_err(fail)?;
        write(&path, json + "\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
        Command::Render(a) => render_cmd(a),
        Command::Mapgen(a) => mapgen(a),
        Command::Replay(a) => replay_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
