//! Environment server: one independent episode per session, driven by the
//! newline-delimited JSON protocol over TCP or stdio.

pub mod protocol;

pub use protocol::{decode_request, decode_response, encode, ErrorCode, Request, Response, WireObservation, PROTOCOL_VERSION};

use crate::bench::mapgen::{generate_indoor_map, MapGenParams};
use crate::bench::runner::{ExternalPolicy, PolicyError};
use crate::engine::{Episode, EpisodeConfig, EpisodeError, Observation, StepResult};
use crate::geometry::Vec2;
use crate::gridmap::{load_map, OccupancyGrid};
use crate::kinematics::Action;
use crate::scenario::sample_scenario_seeded;
use crate::world::World;
use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

const POLL_INTERVAL: Duration = Duration::from_millis(50);

/// Resolves map names to shared worlds, building each at most once.
///
/// Names: `empty:<W>x<H>` (walled box, cells), `gen:<seed>` (generated floor
/// plan), or a file stem under the map directory (`<dir>/<name>.pgm`).
#[derive(Debug)]
pub struct MapRegistry {
    config: EpisodeConfig,
    mapgen: MapGenParams,
    map_dir: Option<PathBuf>,
    cache: Mutex<BTreeMap<String, Arc<World>>>,
}

/// A `w x h` grid at 0.1 m with a one-cell wall border.
pub fn walled_box(w: usize, h: usize) -> Result<OccupancyGrid, crate::gridmap::GridError> {
    let occupied = (0..w * h).map(|i| {
        let (x, y) = (i % w, i / w);
        x == 0 || y == 0 || x + 1 == w || y + 1 == h
    });
    OccupancyGrid::from_cells(w, h, 0.1, Vec2::ZERO, occupied.collect())
}

impl MapRegistry {
    pub fn new(config: EpisodeConfig, mapgen: MapGenParams, map_dir: Option<PathBuf>) -> Self {
        Self { config, mapgen, map_dir, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    /// Registers a prebuilt grid under `name`.
    pub fn insert(&self, name: &str, grid: OccupancyGrid) -> Arc<World> {
        let world = Arc::new(self.config.build_world(grid));
        self.cache.lock().unwrap().insert(name.to_string(), world.clone());
        world
    }

    fn build(&self, name: &str) -> Result<OccupancyGrid, String> {
        if let Some(dims) = name.strip_prefix("empty:") {
            let (w, h) = dims.split_once('x').ok_or_else(|| format!("bad map name {name:?}; expected empty:<W>x<H>"))?;
            let parse = |s: &str| s.parse::<usize>().ok().filter(|&n| (3..=2000).contains(&n));
            let (w, h) = parse(w).zip(parse(h)).ok_or_else(|| format!("bad dimensions in {name:?}"))?;
            return walled_box(w, h).map_err(|e| e.to_string());
        }
        if let Some(seed) = name.strip_prefix("gen:") {
            let seed: u64 = seed.parse().map_err(|_| format!("bad seed in {name:?}"))?;
            return Ok(generate_indoor_map(seed, &self.mapgen));
        }
        match &self.map_dir {
            Some(dir) if !name.contains(['/', '\\']) && !name.starts_with('.') => {
                let path = dir.join(format!("{name}.pgm"));
                load_map(&path).map_err(|e| format!("map {name:?}: {e}"))
            }
            _ => Err(format!("unknown map {name:?}")),
        }
    }

    pub fn resolve(&self, name: &str) -> Result<Arc<World>, String> {
        if let Some(w) = self.cache.lock().unwrap().get(name) {
            return Ok(w.clone());
        }
        let grid = self.build(name)?;
        let world = Arc::new(self.config.build_world(grid));
        // Another session may have built it meanwhile; keep the first.
        let mut cache = self.cache.lock().unwrap();
        Ok(cache.entry(name.to_string()).or_insert(world).clone())
    }
}

fn obs_response(obs: &Observation) -> Response {
    Response::Obs { version: PROTOCOL_VERSION, observation: WireObservation::from_observation(obs) }
}

fn step_response(r: &StepResult) -> Response {
    Response::StepResult {
        observation: WireObservation::from_observation(&r.observation),
        reward: r.reward,
        outcome: r.outcome,
        step_index: r.info.step_index,
    }
}

/// Per-connection state.
#[derive(Debug)]
pub struct Session {
    registry: Arc<MapRegistry>,
    episode: Option<Episode>,
}

impl Session {
    pub fn new(registry: Arc<MapRegistry>) -> Self {
        Self { registry, episode: None }
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    /// Handles one request line; the flag is true once the session should close.
    pub fn handle_line(&mut self, line: &str) -> (Response, bool) {
        match decode_request(line) {
            Ok(req) => {
                let close = req == Request::Close;
                (self.handle(req), close)
            }
            Err(e) => (Response::error(ErrorCode::Parse, e.0), false),
        }
    }

    pub fn handle(&mut self, request: Request) -> Response {
        match request {
            Request::Reset { map, seed, n_peds, mode, global_planner } => {
                let world = match self.registry.resolve(&map) {
                    Ok(w) => w,
                    Err(e) => return Response::error(ErrorCode::InvalidRequest, e),
                };
                let scenario = match sample_scenario_seeded(&world, seed, n_peds, mode) {
                    Ok(s) => s,
                    Err(e) => return Response::error(ErrorCode::InvalidRequest, e.to_string()),
                };
                let mut config = self.registry.config().clone();
                config.map = map;
                config.global_planner = global_planner;
                match Episode::reset(world, config, scenario) {
                    Ok((episode, obs)) => {
                        self.episode = Some(episode);
                        obs_response(&obs)
                    }
                    Err(e) => {
                        self.episode = None;
                        Response::error(ErrorCode::InvalidRequest, e.to_string())
                    }
                }
            }
            Request::Step { action } => {
                let Some(episode) = self.episode.as_mut() else {
                    return Response::error(ErrorCode::NoEpisode, "send reset before step");
                };
                if !action.iter().all(|a| a.is_finite() && (-1.0..=1.0).contains(a)) {
                    return Response::error(ErrorCode::InvalidRequest, "action components must lie in [-1, 1]");
                }
                match episode.step(Action::from_normalized(action[0], action[1])) {
                    Ok(r) => step_response(&r),
                    Err(EpisodeError::Terminal(o)) => {
                        Response::error(ErrorCode::EpisodeEnded, format!("episode ended ({}); send reset", o.name()))
                    }
                    Err(e) => Response::error(ErrorCode::InvalidRequest, e.to_string()),
                }
            }
            Request::Close => {
                self.episode = None;
                Response::Closed
            }
        }
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut)
}

/// Serves one session until close, EOF, or shutdown. A request already read
/// is always answered before shutdown takes effect.
pub fn run_session<R: BufRead, W: Write>(
    session: &mut Session,
    mut reader: R,
    mut writer: W,
    shutdown: Option<&AtomicBool>,
) -> io::Result<()> {
    let mut buf = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => return Ok(()),
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {
                if shutdown.is_some_and(|s| s.load(Ordering::SeqCst)) {
                    return Ok(());
                }
                continue;
            }
            Err(e) => return Err(e),
        }
        let line = String::from_utf8_lossy(&buf).into_owned();
        buf.clear();
        if line.trim().is_empty() {
            continue;
        }
        let (response, close) = session.handle_line(&line);
        writer.write_all(encode(&response).as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if close || shutdown.is_some_and(|s| s.load(Ordering::SeqCst)) {
            return Ok(());
        }
    }
}

fn serve_connection(stream: TcpStream, registry: Arc<MapRegistry>, shutdown: Arc<AtomicBool>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL_INTERVAL))?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut session = Session::new(registry);
    run_session(&mut session, reader, stream, Some(&shutdown))
}

/// Accepts connections until `shutdown` is set, then waits for every
/// session to finish its in-flight response.
pub fn serve_tcp(listener: TcpListener, registry: Arc<MapRegistry>, shutdown: Arc<AtomicBool>) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let mut workers = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let (registry, shutdown) = (registry.clone(), shutdown.clone());
                workers.push(thread::spawn(move || serve_connection(stream, registry, shutdown)));
            }
            Err(e) if is_timeout(&e) => thread::sleep(POLL_INTERVAL),
            Err(e) => return Err(e),
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        // Per-session I/O errors only end that session.
        let _ = w.join();
    }
    Ok(())
}

/// Serves a single session over stdin/stdout.
pub fn serve_stdio(registry: Arc<MapRegistry>) -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut session = Session::new(registry);
    run_session(&mut session, stdin.lock(), stdout.lock(), None)
}

/// External policy reached over the same protocol with roles reversed: the
/// simulator sends `obs` / `step_result` messages and reads back `step`
/// requests.
pub struct LinePolicy<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> LinePolicy<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }

    fn exchange(&mut self, message: &Response) -> Result<Action, PolicyError> {
        let io_err = |e: io::Error| PolicyError(e.to_string());
        self.writer.write_all(encode(message).as_bytes()).map_err(io_err)?;
        self.writer.write_all(b"\n").map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        let mut line = String::new();
        if self.reader.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(PolicyError("policy closed the connection".into()));
        }
        match decode_request(&line) {
            Ok(Request::Step { action }) if action.iter().all(|a| a.is_finite()) => {
                Ok(Action::from_normalized(action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)))
            }
            Ok(other) => Err(PolicyError(format!("expected a step message, got {}", encode(&other)))),
            Err(e) => Err(PolicyError(e.0)),
        }
    }
}

impl<R: BufRead, W: Write> ExternalPolicy for LinePolicy<R, W> {
    fn begin(&mut self, observation: &Observation) -> Result<Action, PolicyError> {
        self.exchange(&obs_response(observation))
    }

    fn next(&mut self, result: &StepResult) -> Result<Action, PolicyError> {
        self.exchange(&step_response(result))
    }
}
