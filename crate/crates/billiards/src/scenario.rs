//! Experiment descriptions: table geometry, disk initial-value distributions,
//! region events, and the built-in parameterizations.
//!
//! A scenario is a complete, validated recipe for one table draw. The four
//! builtins share the same 600x300 table with eleven disks of radius 20: a
//! cue ball whose starting height is uniform on [152, 158] and ten resting
//! target balls, with two test squares watched for ball passages. The
//! `brownian` variant randomizes every position and velocity instead.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Disk, TableGeometry, TableState};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::vec2::Vec2;

/// Scalar initial value: either fixed or uniform on [lo, hi].
///
/// In config files a bare number is a point value and a two-element array is
/// a uniform interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarDistribution {
    Point(f64),
    Uniform(f64, f64),
}

impl ScalarDistribution {
    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        match *self {
            ScalarDistribution::Point(v) => v,
            ScalarDistribution::Uniform(lo, hi) => stream.uniform(lo, hi),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        match *self {
            ScalarDistribution::Point(v) => {
                if !v.is_finite() {
                    return Err(Error::validation(format!("{what}: non-finite value {v}")));
                }
            }
            ScalarDistribution::Uniform(lo, hi) => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::validation(format!("{what}: non-finite bounds")));
                }
                if lo > hi {
                    return Err(Error::validation(format!(
                        "{what}: uniform bounds [{lo}, {hi}] are inverted"
                    )));
                }
            }
        }
        Ok(())
    }

    fn point(&self) -> Option<f64> {
        match *self {
            ScalarDistribution::Point(v) => Some(v),
            ScalarDistribution::Uniform(_, _) => None,
        }
    }
}

/// Initial-value description of one disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSpec {
    pub id: usize,
    pub radius: f64,
    pub x0: ScalarDistribution,
    pub y0: ScalarDistribution,
    pub vx0: ScalarDistribution,
    pub vy0: ScalarDistribution,
}

/// Axis-aligned rectangle given by its upper-left corner (x1, y1) and
/// lower-right corner (x2, y2), y pointing up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect { x1: v[0], y1: v[1], x2: v[2], y2: v[3] }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x1, r.y1, r.x2, r.y2]
    }
}

impl Rect {
    /// Closed-rectangle membership: the boundary counts as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x1 && p.x <= self.x2 && p.y >= self.y2 && p.y <= self.y1
    }
}

/// A dichotomic passage event: did the tracked disk's center enter the region
/// at some instant inside the time window?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEvent {
    pub name: String,
    pub disk_id: usize,
    pub rect: Rect,
    /// Closed time window [t_start, t_end] within the horizon.
    pub window: (f64, f64),
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: TableGeometry,
    pub disks: Vec<DiskSpec>,
    /// At least two; the first two define the correlation pair.
    pub events: Vec<RegionEvent>,
    pub horizon: f64,
    /// Output-sampling grid; kept for trace exports, not used by the dynamics.
    pub sample_tick: f64,
    /// When set, disk positions are drawn by rejection sampling until they
    /// neither overlap nor stick out of the table.
    #[serde(default)]
    pub brownian: bool,
    /// Multiplier applied to the sampled velocity of the first disk (the cue).
    #[serde(default = "default_speed_multiplier")]
    pub speed_multiplier: f64,
}

fn default_speed_multiplier() -> f64 {
    1.0
}

/// The built-in experiments.
///
/// Horizons are 500 and 1000 ticks of length 0.1, i.e. 50 and 100 time
/// units. At the cue speed of 20 this is the regime where the passage events
/// are neither rare nor saturated, which is where their correlation is
/// measurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinScenario {
    /// Eleven disks, cue height uniform on [152, 158], horizon 50.
    Basic,
    /// All positions and velocities randomized.
    Brownian,
    /// Basic with the horizon doubled to 100.
    LongTime,
    /// Basic with the cue launched five times faster.
    FastCue,
}

impl BuiltinScenario {
    pub const ALL: [BuiltinScenario; 4] = [
        BuiltinScenario::Basic,
        BuiltinScenario::Brownian,
        BuiltinScenario::LongTime,
        BuiltinScenario::FastCue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinScenario::Basic => "basic",
            BuiltinScenario::Brownian => "brownian",
            BuiltinScenario::LongTime => "long_time",
            BuiltinScenario::FastCue => "fast_cue",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "basic" => Ok(BuiltinScenario::Basic),
            "brownian" => Ok(BuiltinScenario::Brownian),
            "long_time" => Ok(BuiltinScenario::LongTime),
            "fast_cue" => Ok(BuiltinScenario::FastCue),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }
}

const TABLE_WIDTH: f64 = 600.0;
const TABLE_HEIGHT: f64 = 300.0;
const BALL_RADIUS: f64 = 20.0;
const CUE_SPEED: f64 = 20.0;
const CUE_HEIGHT_SPREAD: f64 = 3.0;
const TICK: f64 = 0.1;
/// Run lengths of the built-in experiments, in ticks.
const BASE_TICKS: f64 = 500.0;
const LONG_TICKS: f64 = 1000.0;

/// Resting target balls: (x, y) centers. The seventh entry is the red ball.
const TARGET_CENTERS: [(f64, f64); 10] = [
    (300.0, 150.0),
    (340.0, 120.0),
    (340.0, 180.0),
    (380.0, 210.0),
    (380.0, 150.0),
    (380.0, 90.0),
    (420.0, 240.0),
    (420.0, 180.0),
    (420.0, 120.0),
    (420.0, 60.0),
];

const RED_BALL_ID: usize = 7;

/// Returns the named built-in scenario, fully populated.
pub fn builtin_scenario(name: BuiltinScenario) -> ScenarioConfig {
    let geometry = TableGeometry { width: TABLE_WIDTH, height: TABLE_HEIGHT };
    let horizon = match name {
        BuiltinScenario::LongTime => LONG_TICKS * TICK,
        _ => BASE_TICKS * TICK,
    };
    let speed_multiplier = match name {
        BuiltinScenario::FastCue => 5.0,
        _ => 1.0,
    };
    let brownian = name == BuiltinScenario::Brownian;

    let mut disks = Vec::with_capacity(11);
    if brownian {
        let pos_x = ScalarDistribution::Uniform(BALL_RADIUS, TABLE_WIDTH - BALL_RADIUS);
        let pos_y = ScalarDistribution::Uniform(BALL_RADIUS, TABLE_HEIGHT - BALL_RADIUS);
        let vel = ScalarDistribution::Uniform(-20.0, 20.0);
        for id in 0..11 {
            disks.push(DiskSpec {
                id,
                radius: BALL_RADIUS,
                x0: pos_x,
                y0: pos_y,
                vx0: vel,
                vy0: vel,
            });
        }
    } else {
        disks.push(DiskSpec {
            id: 0,
            radius: BALL_RADIUS,
            x0: ScalarDistribution::Point(200.0),
            y0: ScalarDistribution::Uniform(155.0 - CUE_HEIGHT_SPREAD, 155.0 + CUE_HEIGHT_SPREAD),
            vx0: ScalarDistribution::Point(CUE_SPEED),
            vy0: ScalarDistribution::Point(0.0),
        });
        for (i, &(x, y)) in TARGET_CENTERS.iter().enumerate() {
            disks.push(DiskSpec {
                id: i + 1,
                radius: BALL_RADIUS,
                x0: ScalarDistribution::Point(x),
                y0: ScalarDistribution::Point(y),
                vx0: ScalarDistribution::Point(0.0),
                vy0: ScalarDistribution::Point(0.0),
            });
        }
    }

    let events = vec![
        RegionEvent {
            name: "green_passage".to_string(),
            disk_id: 0,
            rect: Rect { x1: 150.0, y1: 270.0, x2: 240.0, y2: 180.0 },
            window: (0.0, horizon),
        },
        RegionEvent {
            name: "red_passage".to_string(),
            disk_id: RED_BALL_ID,
            rect: Rect { x1: 430.0, y1: 120.0, x2: 520.0, y2: 30.0 },
            window: (0.0, horizon),
        },
    ];

    ScenarioConfig {
        geometry,
        disks,
        events,
        horizon,
        sample_tick: TICK,
        brownian,
        speed_multiplier,
    }
}

impl ScenarioConfig {
    /// Checks every config invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.width.is_finite() && g.width > 0.0 && g.height.is_finite() && g.height > 0.0) {
            return Err(Error::validation(format!(
                "table dimensions {}x{} must be positive",
                g.width, g.height
            )));
        }
        if self.disks.is_empty() {
            return Err(Error::validation("at least one disk is required".to_string()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::validation(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.sample_tick.is_finite() && self.sample_tick > 0.0) {
            return Err(Error::validation(format!(
                "sample_tick {} must be positive",
                self.sample_tick
            )));
        }
        if !(self.speed_multiplier.is_finite() && self.speed_multiplier > 0.0) {
            return Err(Error::validation(format!(
                "speed_multiplier {} must be positive",
                self.speed_multiplier
            )));
        }

        let mut max_radius: f64 = 0.0;
        for spec in &self.disks {
            if !(spec.radius.is_finite() && spec.radius > 0.0) {
                return Err(Error::validation(format!(
                    "disk {}: radius {} must be positive",
                    spec.id, spec.radius
                )));
            }
            max_radius = max_radius.max(spec.radius);
            for (dist, what) in [
                (&spec.x0, "x0"),
                (&spec.y0, "y0"),
                (&spec.vx0, "vx0"),
                (&spec.vy0, "vy0"),
            ] {
                dist.validate(&format!("disk {} {what}", spec.id))?;
            }
            if self.disks.iter().filter(|d| d.id == spec.id).count() > 1 {
                return Err(Error::validation(format!("duplicate disk id {}", spec.id)));
            }
            // Point placements must fit inside the table.
            if let (Some(x), Some(y)) = (spec.x0.point(), spec.y0.point()) {
                if x < spec.radius
                    || x > g.width - spec.radius
                    || y < spec.radius
                    || y > g.height - spec.radius
                {
                    return Err(Error::validation(format!(
                        "disk {} placed at ({x}, {y}) does not fit inside the table",
                        spec.id
                    )));
                }
            }
        }
        if g.width < 2.0 * max_radius || g.height < 2.0 * max_radius {
            return Err(Error::validation(format!(
                "table {}x{} cannot hold a disk of radius {max_radius}",
                g.width, g.height
            )));
        }

        // Pairwise check over point-placed disks.
        for i in 0..self.disks.len() {
            for j in (i + 1)..self.disks.len() {
                let (a, b) = (&self.disks[i], &self.disks[j]);
                if let (Some(ax), Some(ay), Some(bx), Some(by)) =
                    (a.x0.point(), a.y0.point(), b.x0.point(), b.y0.point())
                {
                    let dist = (Vec2::new(ax, ay) - Vec2::new(bx, by)).norm();
                    if dist < a.radius + b.radius {
                        return Err(Error::validation(format!(
                            "disks {} and {} overlap at their point placements",
                            a.id, b.id
                        )));
                    }
                }
            }
        }

        if self.events.len() < 2 {
            return Err(Error::validation(format!(
                "{} region event(s) declared, need at least 2",
                self.events.len()
            )));
        }
        for ev in &self.events {
            if self.events.iter().filter(|e| e.name == ev.name).count() > 1 {
                return Err(Error::validation(format!("duplicate event name `{}`", ev.name)));
            }
            if !self.disks.iter().any(|d| d.id == ev.disk_id) {
                return Err(Error::validation(format!(
                    "event `{}` tracks unknown disk id {}",
                    ev.name, ev.disk_id
                )));
            }
            let r = &ev.rect;
            if !(r.x1.is_finite() && r.y1.is_finite() && r.x2.is_finite() && r.y2.is_finite()) {
                return Err(Error::validation(format!("event `{}`: non-finite rectangle", ev.name)));
            }
            if !(r.x1 < r.x2 && r.y1 > r.y2) {
                return Err(Error::validation(format!(
                    "event `{}`: corners ({}, {})-({}, {}) are not upper-left/lower-right",
                    ev.name, r.x1, r.y1, r.x2, r.y2
                )));
            }
            if r.x1 < 0.0 || r.x2 > g.width || r.y2 < 0.0 || r.y1 > g.height {
                return Err(Error::validation(format!(
                    "event `{}`: rectangle sticks out of the table",
                    ev.name
                )));
            }
            let (t0, t1) = ev.window;
            if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1 && t1 <= self.horizon) {
                return Err(Error::validation(format!(
                    "event `{}`: window [{t0}, {t1}] is not inside [0, {}]",
                    ev.name, self.horizon
                )));
            }
        }
        Ok(())
    }

    /// Index of the disk tracked by an event, by declared id.
    pub fn disk_index(&self, disk_id: usize) -> Option<usize> {
        self.disks.iter().position(|d| d.id == disk_id)
    }
}

/// Parses and validates a config document (strict JSON: unknown keys rejected).
pub fn load_config(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

const MAX_PLACEMENT_ATTEMPTS: u64 = 1_000_000;

/// Draws one initial table state from the config's distributions.
///
/// Values are consumed from the stream in declaration order, each disk as
/// (x0, y0, vx0, vy0). In brownian mode the position pair of the disk being
/// placed is redrawn until it fits; earlier disks are kept, so the stream
/// consumption stays a pure function of the stream.
pub fn sample_initial_state(config: &ScenarioConfig, stream: &mut RandomStream) -> Result<TableState> {
    let mut disks: Vec<Disk> = Vec::with_capacity(config.disks.len());
    let mut attempts: u64 = 0;
    for spec in &config.disks {
        let center = if config.brownian {
            loop {
                attempts += 1;
                if attempts > MAX_PLACEMENT_ATTEMPTS {
                    return Err(Error::PackingInfeasible { attempts });
                }
                let c = Vec2::new(spec.x0.sample(stream), spec.y0.sample(stream));
                let contained = c.x >= spec.radius
                    && c.x <= config.geometry.width - spec.radius
                    && c.y >= spec.radius
                    && c.y <= config.geometry.height - spec.radius;
                let clear = disks
                    .iter()
                    .all(|d| (d.center - c).norm() >= d.radius + spec.radius);
                if contained && clear {
                    break c;
                }
            }
        } else {
            Vec2::new(spec.x0.sample(stream), spec.y0.sample(stream))
        };
        let velocity = Vec2::new(spec.vx0.sample(stream), spec.vy0.sample(stream));
        disks.push(Disk {
            id: spec.id,
            center,
            velocity,
            radius: spec.radius,
        });
    }
    if let Some(cue) = disks.first_mut() {
        cue.velocity = cue.velocity * config.speed_multiplier;
    }
    let state = TableState::new(disks);
    state.validate(&config.geometry)?;
    Ok(state)
}
