//! Instances from a GTFS static feed plus recorded occupancy snapshots.
//!
//! Demand pipeline: each snapshot lower-bounds the load at the stops that
//! bracket the vehicle position; per stop take the max within a day, then
//! the max across days; stops never observed take the larger of the nearest
//! observed stop before and after them; runs without any observation are
//! dropped. Pods per stop are `ceil(passengers / capacity)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};
use crate::model::{default_horizon, BusRun, Instance, Seconds, Station, StationId, Stop, TravelTimeMatrix};

pub const POD_CAPACITY: u32 = 16;
pub const DEFAULT_SPEED_MPH: f64 = 15.0;
const METRES_PER_MILE: f64 = 1609.344;
const EARTH_RADIUS_M: f64 = 6_371_008.8;
/// Service days may run past midnight; captures beyond two days are noise.
const MAX_SERVICE_SECONDS: Seconds = 48 * 3600;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtfsStop {
    pub stop_id: String,
    pub name: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledStop {
    /// Index into `StaticFeed::stops`.
    pub stop: usize,
    pub stop_sequence: u32,
    pub arrival_s: Seconds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledRun {
    pub trip_id: String,
    pub route_id: String,
    pub stops: Vec<ScheduledStop>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticFeed {
    pub stops: Vec<GtfsStop>,
    pub runs: Vec<ScheduledRun>,
    /// Stop times moved forward to keep arrivals strictly increasing.
    pub nudged: usize,
}

#[derive(Clone, Debug, Default)]
pub struct FeedFilter {
    /// Keep only trips of this service id; `None` keeps every trip.
    pub service_id: Option<String>,
    /// Keep only trips of these routes; `None` keeps every route.
    pub routes: Option<Vec<String>>,
}

fn gtfs_err(table: &str, message: impl ToString) -> PlanError {
    PlanError::Gtfs { table: table.to_string(), message: message.to_string() }
}

struct Table {
    name: &'static str,
    headers: csv::StringRecord,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(dir: &Path, name: &'static str) -> Result<Self> {
        let path = dir.join(name);
        let file = File::open(&path).map_err(|e| gtfs_err(name, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(file);
        let headers = rdr.headers().map_err(|e| gtfs_err(name, e))?.clone();
        let rows = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| gtfs_err(name, e))?;
        Ok(Self { name, headers, rows })
    }

    fn col(&self, column: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| gtfs_err(self.name, format!("missing column {column}")))
    }

    fn opt_col(&self, column: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == column)
    }
}

fn field(row: &csv::StringRecord, i: usize) -> &str {
    row.get(i).unwrap_or("")
}

/// `HH:MM:SS` with hours allowed past 23.
pub fn parse_gtfs_time(text: &str) -> Result<Seconds> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    let bad = || gtfs_err("stop_times.txt", format!("bad time {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let n: Vec<Seconds> = parts.iter().map(|p| p.parse::<Seconds>().map_err(|_| bad())).collect::<Result<_>>()?;
    if n.iter().any(|&v| v < 0) || n[1] >= 60 || n[2] >= 60 {
        return Err(bad());
    }
    Ok(n[0] * 3600 + n[1] * 60 + n[2])
}

fn parse_coord(text: &str, table: &str) -> Result<Option<f64>> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse::<f64>()
        .map(Some)
        .map_err(|_| gtfs_err(table, format!("bad coordinate {text:?}")))
}

pub fn parse_static_gtfs(dir: &Path, filter: &FeedFilter) -> Result<StaticFeed> {
    let stops_t = Table::read(dir, "stops.txt")?;
    let routes_t = Table::read(dir, "routes.txt")?;
    let trips_t = Table::read(dir, "trips.txt")?;
    let times_t = Table::read(dir, "stop_times.txt")?;
    let calendar_t = Table::read(dir, "calendar.txt")?;

    let (sid, slat, slon) = (stops_t.col("stop_id")?, stops_t.col("stop_lat")?, stops_t.col("stop_lon")?);
    let sname = stops_t.opt_col("stop_name");
    let mut stops = Vec::with_capacity(stops_t.rows.len());
    let mut stop_index = HashMap::new();
    for row in &stops_t.rows {
        let stop_id = field(row, sid).to_string();
        if stop_index.insert(stop_id.clone(), stops.len()).is_some() {
            return Err(PlanError::Validation(format!("stops.txt: duplicate stop_id {stop_id}")));
        }
        stops.push(GtfsStop {
            name: sname.map(|i| field(row, i).to_string()).unwrap_or_default(),
            lat: parse_coord(field(row, slat), "stops.txt")?,
            lon: parse_coord(field(row, slon), "stops.txt")?,
            stop_id,
        });
    }

    let rid = routes_t.col("route_id")?;
    let known_routes: std::collections::HashSet<&str> = routes_t.rows.iter().map(|r| field(r, rid)).collect();

    let cal = calendar_t.col("service_id")?;
    if let Some(service) = &filter.service_id {
        if !calendar_t.rows.iter().any(|r| field(r, cal) == service) {
            return Err(PlanError::Validation(format!("calendar.txt: unknown service_id {service}")));
        }
    }

    let (t_route, t_service, t_trip) = (trips_t.col("route_id")?, trips_t.col("service_id")?, trips_t.col("trip_id")?);
    let mut runs: Vec<ScheduledRun> = Vec::new();
    let mut trip_index = HashMap::new();
    for row in &trips_t.rows {
        let route_id = field(row, t_route);
        if !known_routes.contains(route_id) {
            return Err(PlanError::Validation(format!(
                "trips.txt: trip {} references unknown route {route_id}",
                field(row, t_trip)
            )));
        }
        if filter.service_id.as_deref().is_some_and(|s| s != field(row, t_service)) {
            continue;
        }
        if filter.routes.as_ref().is_some_and(|allow| !allow.iter().any(|r| r == route_id)) {
            continue;
        }
        let trip_id = field(row, t_trip).to_string();
        trip_index.insert(trip_id.clone(), runs.len());
        runs.push(ScheduledRun { trip_id, route_id: route_id.to_string(), stops: Vec::new() });
    }

    let (st_trip, st_arr, st_stop, st_seq) = (
        times_t.col("trip_id")?,
        times_t.col("arrival_time")?,
        times_t.col("stop_id")?,
        times_t.col("stop_sequence")?,
    );
    let st_dep = times_t.opt_col("departure_time");
    for row in &times_t.rows {
        let Some(&run) = trip_index.get(field(row, st_trip)) else {
            continue;
        };
        let stop_id = field(row, st_stop);
        let stop = *stop_index.get(stop_id).ok_or_else(|| {
            PlanError::Validation(format!("stop_times.txt: trip {} references unknown stop {stop_id}", field(row, st_trip)))
        })?;
        // arrival_time may be blank at untimed stops; fall back to departure
        let mut time = field(row, st_arr);
        if time.is_empty() {
            time = st_dep.map(|i| field(row, i)).unwrap_or("");
        }
        let stop_sequence = field(row, st_seq)
            .parse::<u32>()
            .map_err(|_| gtfs_err("stop_times.txt", format!("bad stop_sequence {:?}", field(row, st_seq))))?;
        runs[run].stops.push(ScheduledStop { stop, stop_sequence, arrival_s: parse_gtfs_time(time)? });
    }

    let mut nudged = 0;
    for run in &mut runs {
        run.stops.sort_by_key(|s| s.stop_sequence);
        for k in 1..run.stops.len() {
            if run.stops[k].arrival_s <= run.stops[k - 1].arrival_s {
                run.stops[k].arrival_s = run.stops[k - 1].arrival_s + 1;
                nudged += 1;
            }
        }
    }
    runs.retain(|r| !r.stops.is_empty());
    Ok(StaticFeed { stops, runs, nudged })
}

/// Seconds since midnight of the service day, as a number or `HH:MM:SS`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaptureTime {
    Seconds(Seconds),
    Clock(String),
}

impl CaptureTime {
    pub fn seconds(&self) -> Result<Seconds> {
        match self {
            CaptureTime::Seconds(s) => Ok(*s),
            CaptureTime::Clock(c) => parse_gtfs_time(c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub captured_at: CaptureTime,
    pub trip_id: String,
    /// GTFS stop_sequence of the vehicle; fractional values lie between stops.
    #[serde(default)]
    pub stop_seq_hint: Option<f64>,
    #[serde(default)]
    pub lat: Option<f64>,
    #[serde(default)]
    pub lon: Option<f64>,
    #[serde(default)]
    pub occupancy: Option<i64>,
}

/// One capture per line; blank lines are skipped.
pub fn read_snapshots(path: &Path) -> Result<Vec<SnapshotRecord>> {
    let file = File::open(path).map_err(|e| PlanError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PlanError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnapshotRecord = serde_json::from_str(&line)
            .map_err(|e| gtfs_err("snapshots", format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Observed,
    NeighborFilled,
    Excluded,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::NeighborFilled => "neighbor-filled",
            Provenance::Excluded => "excluded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StopDemand {
    pub passengers: Option<u32>,
    pub demand_pods: u32,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunDemand {
    pub trip_id: String,
    pub excluded: bool,
    pub stops: Vec<StopDemand>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DemandProfile {
    pub capacity: u32,
    /// Parallel to `StaticFeed::runs`.
    pub runs: Vec<RunDemand>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct DemandOptions {
    pub capacity: u32,
    /// Lat/lon captures farther than this from the trip's stop polyline are
    /// not attributed.
    pub match_radius_m: f64,
}

impl Default for DemandOptions {
    fn default() -> Self {
        Self { capacity: POD_CAPACITY, match_radius_m: 250.0 }
    }
}

pub fn pods_for(passengers: u32, capacity: u32) -> u32 {
    passengers.div_ceil(capacity)
}

/// Unobserved entries take the larger of the nearest observed value before
/// and after them. Entries stay `None` only if nothing is observed.
pub fn fill_neighbors(observed: &[Option<u32>]) -> Vec<Option<u32>> {
    let n = observed.len();
    let mut before = vec![None; n];
    let mut last = None;
    for i in 0..n {
        last = observed[i].or(last);
        before[i] = last;
    }
    let mut out = vec![None; n];
    let mut next = None;
    for i in (0..n).rev() {
        next = observed[i].or(next);
        out[i] = match observed[i] {
            Some(v) => Some(v),
            None => before[i].max(next),
        };
    }
    out
}

fn local_xy(lat: f64, lon: f64, lat0: f64) -> (f64, f64) {
    let x = lon.to_radians() * lat0.to_radians().cos() * EARTH_RADIUS_M;
    let y = lat.to_radians() * EARTH_RADIUS_M;
    (x, y)
}

/// Positions in `run.stops` that a capture lower-bounds, or `None` when the
/// capture cannot be placed on the trip.
fn bracket(rec: &SnapshotRecord, run: &ScheduledRun, stops: &[GtfsStop], radius_m: f64) -> Option<Vec<usize>> {
    if let Some(hint) = rec.stop_seq_hint {
        let seqs: Vec<f64> = run.stops.iter().map(|s| s.stop_sequence as f64).collect();
        if let Some(k) = seqs.iter().position(|&s| s == hint) {
            return Some(vec![k]);
        }
        let after = seqs.iter().position(|&s| s > hint)?;
        return (after > 0).then(|| vec![after - 1, after]);
    }
    let (lat, lon) = (rec.lat?, rec.lon?);
    let coords: Vec<(f64, f64)> = run
        .stops
        .iter()
        .map(|s| Some((stops[s.stop].lat?, stops[s.stop].lon?)))
        .collect::<Option<_>>()?;
    let p = local_xy(lat, lon, lat);
    let pts: Vec<(f64, f64)> = coords.iter().map(|&(a, o)| local_xy(a, o, lat)).collect();
    if pts.len() == 1 {
        let d = ((p.0 - pts[0].0).powi(2) + (p.1 - pts[0].1).powi(2)).sqrt();
        return (d <= radius_m).then(|| vec![0]);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for k in 0..pts.len() - 1 {
        let (a, b) = (pts[k], pts[k + 1]);
        let (vx, vy) = (b.0 - a.0, b.1 - a.1);
        let len2 = vx * vx + vy * vy;
        let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0) };
        let (qx, qy) = (a.0 + t * vx, a.1 + t * vy);
        let d = ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt();
        if best.is_none_or(|(bd, _, _)| d < bd) {
            best = Some((d, k, t));
        }
    }
    let (d, k, t) = best?;
    if d > radius_m {
        return None;
    }
    Some(match t {
        t if t <= 1e-6 => vec![k],
        t if t >= 1.0 - 1e-6 => vec![k + 1],
        _ => vec![k, k + 1],
    })
}

type DayMax = Vec<Vec<Option<u32>>>;

fn day_lower_bounds(
    feed: &StaticFeed,
    trip_index: &HashMap<&str, usize>,
    day: usize,
    records: &[SnapshotRecord],
    radius_m: f64,
) -> (DayMax, Vec<String>) {
    let mut best: DayMax = feed.runs.iter().map(|r| vec![None; r.stops.len()]).collect();
    let mut warnings = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let at = format!("day {} record {}", day + 1, i + 1);
        let Some(&run) = trip_index.get(rec.trip_id.as_str()) else {
            warnings.push(format!("{at}: unknown trip {}, skipped", rec.trip_id));
            continue;
        };
        match rec.captured_at.seconds() {
            Ok(t) if (0..=MAX_SERVICE_SECONDS).contains(&t) => {}
            _ => {
                warnings.push(format!("{at}: capture time outside the service day, skipped"));
                continue;
            }
        }
        let Some(count) = rec.occupancy else {
            continue;
        };
        if count < 0 {
            warnings.push(format!("{at}: negative occupancy, skipped"));
            continue;
        }
        let Some(positions) = bracket(rec, &feed.runs[run], &feed.stops, radius_m) else {
            warnings.push(format!("{at}: position not on trip {}, skipped", rec.trip_id));
            continue;
        };
        let count = count.min(u32::MAX as i64) as u32;
        for k in positions {
            let slot = &mut best[run][k];
            *slot = Some(slot.map_or(count, |v| v.max(count)));
        }
    }
    (best, warnings)
}

pub fn estimate_demand(feed: &StaticFeed, days: &[Vec<SnapshotRecord>], opts: DemandOptions) -> Result<DemandProfile> {
    if opts.capacity == 0 {
        return Err(PlanError::Config("pod capacity must be positive".into()));
    }
    let trip_index: HashMap<&str, usize> = feed.runs.iter().enumerate().map(|(i, r)| (r.trip_id.as_str(), i)).collect();
    let per_day: Vec<(DayMax, Vec<String>)> = days
        .par_iter()
        .enumerate()
        .map(|(d, recs)| day_lower_bounds(feed, &trip_index, d, recs, opts.match_radius_m))
        .collect();

    let mut observed: DayMax = feed.runs.iter().map(|r| vec![None; r.stops.len()]).collect();
    let mut warnings = Vec::new();
    for (day, w) in per_day {
        warnings.extend(w);
        for (acc, d) in observed.iter_mut().zip(day) {
            for (a, v) in acc.iter_mut().zip(d) {
                *a = (*a).max(v);
            }
        }
    }

    let runs = feed
        .runs
        .iter()
        .zip(&observed)
        .map(|(run, obs)| {
            let excluded = obs.iter().all(Option::is_none);
            let filled = fill_neighbors(obs);
            let stops = obs
                .iter()
                .zip(&filled)
                .map(|(o, f)| StopDemand {
                    passengers: *f,
                    demand_pods: f.map_or(0, |p| pods_for(p, opts.capacity)),
                    provenance: match (excluded, o) {
                        (true, _) => Provenance::Excluded,
                        (false, Some(_)) => Provenance::Observed,
                        (false, None) => Provenance::NeighborFilled,
                    },
                })
                .collect();
            RunDemand { trip_id: run.trip_id.clone(), excluded, stops }
        })
        .collect();
    Ok(DemandProfile { capacity: opts.capacity, runs, warnings })
}

pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1, la2, lo2) = (a.0.to_radians(), a.1.to_radians(), b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Great-circle seconds at `speed_mph`, rounded up.
pub fn travel_seconds(a: (f64, f64), b: (f64, f64), speed_mph: f64) -> Seconds {
    let secs = haversine_m(a, b) / (speed_mph * METRES_PER_MILE / 3600.0);
    // absorb float noise so exact distances do not round up a full second
    (secs - 1e-6).ceil().max(0.0) as Seconds
}

/// Distinct stops sharing coordinates get 1 s so the matrix stays valid.
pub fn build_travel_matrix(stops: &[GtfsStop], speed_mph: f64) -> Result<TravelTimeMatrix> {
    if speed_mph <= 0.0 {
        return Err(PlanError::Config("speed must be positive".into()));
    }
    let coords = stops
        .iter()
        .map(|s| match (s.lat, s.lon) {
            (Some(a), Some(o)) => Ok((a, o)),
            _ => Err(gtfs_err("stops.txt", format!("stop {} has no coordinates; supply a travel matrix", s.stop_id))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TravelTimeMatrix(
        coords
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                coords
                    .iter()
                    .enumerate()
                    .map(|(j, &b)| if i == j { 0 } else { travel_seconds(a, b, speed_mph).max(1) })
                    .collect()
            })
            .collect(),
    ))
}

/// JSON array of rows in stops.txt order, used verbatim.
pub fn load_matrix_override(path: &Path, stations: usize) -> Result<TravelTimeMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| PlanError::io(path, e))?;
    let m: TravelTimeMatrix = serde_json::from_str(&text)?;
    if m.len() != stations || m.0.iter().any(|r| r.len() != stations) {
        return Err(PlanError::Validation(format!(
            "{}: travel matrix must be {stations}x{stations}",
            path.display()
        )));
    }
    Ok(m)
}

/// Runs with at least one observation, demands from `profile`.
pub fn to_instance(feed: &StaticFeed, profile: &DemandProfile, travel: TravelTimeMatrix) -> Result<Instance> {
    let runs: Vec<BusRun> = feed
        .runs
        .iter()
        .zip(&profile.runs)
        .filter(|(_, d)| !d.excluded)
        .map(|(run, d)| BusRun {
            id: run.trip_id.clone(),
            stops: run
                .stops
                .iter()
                .zip(&d.stops)
                .map(|(s, sd)| Stop { station: StationId(s.stop), arrival_s: s.arrival_s, demand_pods: sd.demand_pods })
                .collect(),
        })
        .collect();
    let latest = runs.iter().flat_map(|r| r.stops.iter().map(|s| s.arrival_s)).max().unwrap_or(0);
    let inst = Instance {
        stations: feed
            .stops
            .iter()
            .enumerate()
            .map(|(i, s)| Station { id: StationId(i), label: s.stop_id.clone(), lat: s.lat, lon: s.lon })
            .collect(),
        travel,
        runs,
        horizon_s: default_horizon(latest),
    };
    inst.ensure_valid()?;
    Ok(inst)
}

#[derive(Serialize)]
struct ProvenanceRow<'a> {
    trip_id: &'a str,
    stop_sequence: u32,
    stop_id: &'a str,
    passengers: Option<u32>,
    demand_pods: u32,
    provenance: &'static str,
}

pub fn write_provenance_csv<W: Write>(feed: &StaticFeed, profile: &DemandProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (run, d) in feed.runs.iter().zip(&profile.runs) {
        for (s, sd) in run.stops.iter().zip(&d.stops) {
            w.serialize(ProvenanceRow {
                trip_id: &run.trip_id,
                stop_sequence: s.stop_sequence,
                stop_id: &feed.stops[s.stop].stop_id,
                passengers: sd.passengers,
                demand_pods: sd.demand_pods,
                provenance: sd.provenance.as_str(),
            })?;
        }
    }
    w.flush().map_err(|e| PlanError::io("<provenance csv>", e))?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub feed_dir: PathBuf,
    pub filter: FeedFilter,
    /// One NDJSON file per service day.
    pub snapshot_days: Vec<PathBuf>,
    pub demand: DemandOptions,
    pub speed_mph: f64,
    pub travel_override: Option<PathBuf>,
}

pub struct Ingested {
    pub feed: StaticFeed,
    pub profile: DemandProfile,
    pub instance: Instance,
}

pub fn ingest(opts: &IngestOptions) -> Result<Ingested> {
    let feed = parse_static_gtfs(&opts.feed_dir, &opts.filter)?;
    let days = opts
        .snapshot_days
        .iter()
        .map(|p| read_snapshots(p))
        .collect::<Result<Vec<_>>>()?;
    let profile = estimate_demand(&feed, &days, opts.demand)?;
    let travel = match &opts.travel_override {
        Some(p) => load_matrix_override(p, feed.stops.len())?,
        None => build_travel_matrix(&feed.stops, opts.speed_mph)?,
    };
    let instance = to_instance(&feed, &profile, travel)?;
    Ok(Ingested { feed, profile, instance })
}

/// Bundled two-route fixture feed.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("gtfs")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gtfs_times_past_midnight() {
        assert_eq!(parse_gtfs_time("07:03:05").unwrap(), 7 * 3600 + 185);
        assert_eq!(parse_gtfs_time("25:00:00").unwrap(), 90000);
        assert!(parse_gtfs_time("7:61:00").is_err());
        assert!(parse_gtfs_time("noon").is_err());
    }

    #[test]
    fn capacity_ceilings() {
        assert_eq!(pods_for(31, 16), 2);
        assert_eq!(pods_for(0, 16), 0);
        for k in 1..5 {
            assert_eq!(pods_for(16 * k, 16), k);
            assert_eq!(pods_for(16 * k + 1, 16), k + 1);
        }
    }

    #[test]
    fn fill_takes_larger_neighbour() {
        assert_eq!(fill_neighbors(&[Some(5), None, Some(33)]), vec![Some(5), Some(33), Some(33)]);
        assert_eq!(fill_neighbors(&[None, Some(7), None, None]), vec![Some(7); 4]);
        assert_eq!(fill_neighbors(&[None, None]), vec![None, None]);
        // the nearest observation on each side wins, not the farthest
        assert_eq!(fill_neighbors(&[Some(40), Some(2), None, Some(3)]), vec![Some(40), Some(2), Some(3), Some(3)]);
    }

    #[test]
    fn one_mile_is_four_minutes() {
        let a = (40.75, -73.99);
        let b = (40.75 + (METRES_PER_MILE / EARTH_RADIUS_M).to_degrees(), -73.99);
        assert!((haversine_m(a, b) - METRES_PER_MILE).abs() < 1e-6);
        assert_eq!(travel_seconds(a, b, 15.0), 240);
        assert_eq!(travel_seconds(a, a, 15.0), 0);
    }

    #[test]
    fn missing_coordinates_need_override() {
        let stops = vec![GtfsStop { stop_id: "x".into(), name: String::new(), lat: None, lon: Some(1.0) }];
        assert!(matches!(build_travel_matrix(&stops, 15.0), Err(PlanError::Gtfs { .. })));
    }

    proptest::proptest! {
        #[test]
        fn fill_is_idempotent(obs in proptest::collection::vec(proptest::option::of(0u32..100), 0..12)) {
            let once = fill_neighbors(&obs);
            proptest::prop_assert_eq!(fill_neighbors(&once), once.clone());
            for (o, f) in obs.iter().zip(&once) {
                if o.is_some() {
                    proptest::prop_assert_eq!(o, f);
                }
            }
        }
    }
}
