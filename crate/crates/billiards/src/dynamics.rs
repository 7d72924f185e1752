//! Exact event-driven dynamics of equal-mass, non-spinning hard disks in a
//! rectangular box.
//!
//! Between events every disk moves in a straight line; contact times are the
//! roots of quadratics (disk-disk) or linear equations (disk-wall), so the
//! trajectory is advanced analytically from event to event rather than on a
//! fixed integration grid. Disk-disk collisions exchange the velocity
//! components along the line of centers; walls reflect specularly. Both laws
//! conserve kinetic energy exactly up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Geometric tolerance, in table units, for contact and overlap tests.
pub const GEOM_TOL: f64 = 1e-9;

/// Candidate events closer in time than this are treated as simultaneous and
/// ordered by kind (disk-disk first), then by index.
pub const TIE_TOL: f64 = 1e-9;

/// The scheduler still accepts a contact this far in the past: processing one
/// of two near-simultaneous events first can leave the other marginally
/// behind the clock, and it must not be dropped.
const STALE_TOL: f64 = 2e-9;

/// Axis-aligned cushion identifier. The declaration order is the tie-break
/// order for simultaneous wall hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Wall {
    Left,
    Right,
    Bottom,
    Top,
}

impl Wall {
    fn rank(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Wall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Wall::Left => "left",
            Wall::Right => "right",
            Wall::Bottom => "bottom",
            Wall::Top => "top",
        };
        f.write_str(name)
    }
}

/// Rectangular table with the origin at the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableGeometry {
    pub width: f64,
    pub height: f64,
}

/// One hard disk: unit mass, no spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub id: usize,
    pub center: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Collision between disks at list positions `i < j`.
    DiskDisk { i: usize, j: usize },
    /// Specular reflection of one disk off a cushion.
    DiskWall { disk: usize, wall: Wall },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    /// Absolute simulation time of the event.
    pub time: f64,
    pub kind: EventKind,
}

/// Full state of one table at an instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TableState {
    pub time: f64,
    pub disks: Vec<Disk>,
    pub collision_count: u64,
}

impl TableState {
    pub fn new(disks: Vec<Disk>) -> Self {
        TableState {
            time: 0.0,
            disks,
            collision_count: 0,
        }
    }

    /// Sum of squared speeds. Masses are equal and constant, so this is the
    /// conserved kinetic energy up to a fixed factor.
    pub fn kinetic_energy(&self) -> f64 {
        self.disks.iter().map(|d| d.velocity.norm_sq()).sum()
    }

    /// Sum of velocities (unit masses).
    pub fn total_momentum(&self) -> Vec2 {
        self.disks
            .iter()
            .fold(Vec2::ZERO, |acc, d| acc + d.velocity)
    }

    /// Checks every state invariant to `GEOM_TOL`: finite fields, positive
    /// radii, wall containment, and pairwise non-overlap.
    pub fn validate(&self, geom: &TableGeometry) -> Result<()> {
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::validation(format!("non-physical time {}", self.time)));
        }
        for d in &self.disks {
            if !d.center.is_finite() || !d.velocity.is_finite() || !d.radius.is_finite() {
                return Err(Error::validation(format!("disk {} has non-finite fields", d.id)));
            }
            if d.radius <= 0.0 {
                return Err(Error::validation(format!("disk {} has radius {}", d.id, d.radius)));
            }
            let inside = d.center.x >= d.radius - GEOM_TOL
                && d.center.x <= geom.width - d.radius + GEOM_TOL
                && d.center.y >= d.radius - GEOM_TOL
                && d.center.y <= geom.height - d.radius + GEOM_TOL;
            if !inside {
                return Err(Error::validation(format!(
                    "disk {} at ({}, {}) is not contained in the {}x{} table",
                    d.id, d.center.x, d.center.y, geom.width, geom.height
                )));
            }
        }
        for i in 0..self.disks.len() {
            for j in (i + 1)..self.disks.len() {
                let (a, b) = (&self.disks[i], &self.disks[j]);
                let gap = (a.center - b.center).norm() - a.radius - b.radius;
                if gap < -GEOM_TOL {
                    return Err(Error::validation(format!(
                        "disks {} and {} overlap by {:.3e}",
                        a.id, b.id, -gap
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Post-collision velocities of two equal-mass disks in contact.
///
/// The impulse lies along the line of centers; the component of the relative
/// velocity along that line is exchanged and the tangential components are
/// untouched, which conserves momentum and kinetic energy identically.
#[inline]
fn exchange_normal_components(d1: &Disk, d2: &Disk) -> (Vec2, Vec2) {
    let dx = d1.center - d2.center;
    let dv = d1.velocity - d2.velocity;
    let k = dv.dot(dx) / dx.norm_sq();
    (d1.velocity - dx * k, d2.velocity + dx * k)
}

/// Resolves an elastic collision between two disks in contact.
///
/// Preconditions: centers separated by `r1 + r2` within `GEOM_TOL`, and the
/// disks approaching each other. Violations are caller bugs and reported as
/// contract errors naming the pair.
pub fn resolve_disk_collision(d1: &Disk, d2: &Disk) -> Result<(Vec2, Vec2)> {
    let dx = d1.center - d2.center;
    let gap = dx.norm() - d1.radius - d2.radius;
    if gap.abs() > GEOM_TOL {
        return Err(Error::contract(format!(
            "disks {} and {} are not in contact (gap {:.3e})",
            d1.id, d2.id, gap
        )));
    }
    let approach = (d1.velocity - d2.velocity).dot(dx);
    if approach >= 0.0 {
        return Err(Error::contract(format!(
            "disks {} and {} are not approaching (radial rate {:.3e})",
            d1.id, d2.id, approach
        )));
    }
    Ok(exchange_normal_components(d1, d2))
}

/// First contact time of a disk pair, allowing marginally stale contacts.
///
/// Returns the smaller root of |dx + dv t|^2 = (r1+r2)^2 in a form that is
/// stable when the gap is small, or None when the pair is receding or misses.
fn disk_contact_tau(d1: &Disk, d2: &Disk) -> Option<f64> {
    let dx = d1.center - d2.center;
    let dv = d1.velocity - d2.velocity;
    let b = dx.dot(dv);
    if b >= 0.0 {
        return None;
    }
    let a = dv.norm_sq();
    let rsum = d1.radius + d2.radius;
    let c = dx.norm_sq() - rsum * rsum;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    Some(c / (-b + disc.sqrt()))
}

/// Time until two disks first touch, if they are approaching on a collision
/// course. `None` means no future contact.
pub fn time_to_disk_contact(d1: &Disk, d2: &Disk) -> Option<f64> {
    disk_contact_tau(d1, d2).filter(|&tau| tau > 0.0)
}

/// Contact time against one axis: `pos` and `vel` are the center coordinate
/// and velocity along the axis, `extent` the table size along it.
#[inline]
fn axis_wall_tau(pos: f64, vel: f64, radius: f64, extent: f64) -> Option<(f64, bool)> {
    if vel < 0.0 {
        Some(((radius - pos) / vel, false))
    } else if vel > 0.0 {
        Some(((extent - radius - pos) / vel, true))
    } else {
        None
    }
}

fn wall_candidates(d: &Disk, geom: &TableGeometry) -> [Option<(f64, Wall)>; 2] {
    let x = axis_wall_tau(d.center.x, d.velocity.x, d.radius, geom.width)
        .map(|(tau, max)| (tau, if max { Wall::Right } else { Wall::Left }));
    let y = axis_wall_tau(d.center.y, d.velocity.y, d.radius, geom.height)
        .map(|(tau, max)| (tau, if max { Wall::Top } else { Wall::Bottom }));
    [x, y]
}

/// Earliest future cushion contact of a disk, with the wall it hits.
/// An exact corner tie returns the wall that sorts first.
pub fn time_to_wall_contact(d: &Disk, geom: &TableGeometry) -> Option<(f64, Wall)> {
    let mut best: Option<(f64, Wall)> = None;
    for cand in wall_candidates(d, geom).into_iter().flatten() {
        if cand.0 <= 0.0 {
            continue;
        }
        best = match best {
            None => Some(cand),
            Some(cur) => {
                if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1.rank() < cur.1.rank()) {
                    Some(cand)
                } else {
                    Some(cur)
                }
            }
        };
    }
    best
}

/// Specular reflection: the component normal to the wall flips sign, the
/// tangential component is untouched, so the speed is preserved exactly.
pub fn reflect_off_wall(v: Vec2, wall: Wall) -> Vec2 {
    match wall {
        Wall::Left | Wall::Right => Vec2::new(-v.x, v.y),
        Wall::Bottom | Wall::Top => Vec2::new(v.x, -v.y),
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    time: f64,
    kind: EventKind,
}

/// Tie-break key: disk-disk events before wall events, then lowest indices,
/// then wall order.
fn priority(kind: EventKind) -> (u8, usize, usize) {
    match kind {
        EventKind::DiskDisk { i, j } => (0, i, j),
        EventKind::DiskWall { disk, wall } => (1, disk, wall.rank()),
    }
}

/// True when `a` must be processed before `b`.
fn precedes(a: &Candidate, b: &Candidate) -> bool {
    if a.time < b.time - TIE_TOL {
        true
    } else if b.time < a.time - TIE_TOL {
        false
    } else {
        priority(a.kind) < priority(b.kind)
    }
}

fn free_flight(state: &mut TableState, to_time: f64) {
    let dt = to_time - state.time;
    for d in &mut state.disks {
        d.center += d.velocity * dt;
    }
    state.time = to_time;
}

/// Advances the table to its next event, or to `horizon` when nothing happens
/// before then.
///
/// All pairwise and wall contact times are scanned; the earliest candidate is
/// selected (near-ties resolved by `priority`), every disk is moved by free
/// flight to that instant, and the collision law applied. Returns the event,
/// or `None` when the state was advanced to `horizon` event-free. A detected
/// overlap after the update signals a scheduling bug and aborts.
pub fn step_to_next_event(
    state: &mut TableState,
    geom: &TableGeometry,
    horizon: f64,
) -> Result<Option<CollisionEvent>> {
    if state.time > horizon {
        return Err(Error::contract(format!(
            "state time {} is beyond the horizon {}",
            state.time, horizon
        )));
    }

    let n = state.disks.len();
    let mut best: Option<Candidate> = None;
    let mut consider = |cand: Candidate| match best {
        Some(cur) if !precedes(&cand, &cur) => {}
        _ => best = Some(cand),
    };

    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(tau) = disk_contact_tau(&state.disks[i], &state.disks[j]) {
                if tau >= -STALE_TOL {
                    consider(Candidate {
                        time: state.time + tau.max(0.0),
                        kind: EventKind::DiskDisk { i, j },
                    });
                }
            }
        }
    }
    for (i, d) in state.disks.iter().enumerate() {
        for (tau, wall) in wall_candidates(d, geom).into_iter().flatten() {
            if tau >= -STALE_TOL {
                consider(Candidate {
                    time: state.time + tau.max(0.0),
                    kind: EventKind::DiskWall { disk: i, wall },
                });
            }
        }
    }

    let cand = match best {
        Some(c) if c.time <= horizon => c,
        _ => {
            free_flight(state, horizon);
            return Ok(None);
        }
    };

    free_flight(state, cand.time);
    match cand.kind {
        EventKind::DiskDisk { i, j } => {
            let (d1, d2) = (state.disks[i], state.disks[j]);
            let approach = (d1.velocity - d2.velocity).dot(d1.center - d2.center);
            if approach >= 0.0 {
                return Err(Error::internal(format!(
                    "scheduled disk pair ({}, {}) is not approaching at t = {}",
                    d1.id, d2.id, state.time
                )));
            }
            let (v1, v2) = exchange_normal_components(&d1, &d2);
            state.disks[i].velocity = v1;
            state.disks[j].velocity = v2;
        }
        EventKind::DiskWall { disk, wall } => {
            let d = &mut state.disks[disk];
            d.velocity = reflect_off_wall(d.velocity, wall);
            // Snap onto the contact plane; heals the rounding error of the
            // free flight before accumulating.
            match wall {
                Wall::Left => d.center.x = d.radius,
                Wall::Right => d.center.x = geom.width - d.radius,
                Wall::Bottom => d.center.y = d.radius,
                Wall::Top => d.center.y = geom.height - d.radius,
            }
        }
    }
    state.collision_count += 1;

    // A pair left overlapping beyond what a near-tie reorder can explain
    // means an event was missed.
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&state.disks[i], &state.disks[j]);
            let gap = (a.center - b.center).norm() - a.radius - b.radius;
            let allowance = GEOM_TOL + (a.velocity - b.velocity).norm() * STALE_TOL;
            if gap < -allowance {
                return Err(Error::internal(format!(
                    "disks {} and {} overlap by {:.3e} after an event at t = {}",
                    a.id, b.id, -gap, state.time
                )));
            }
        }
    }

    Ok(Some(CollisionEvent {
        time: state.time,
        kind: cand.kind,
    }))
}

/// Runs the event loop until the table reaches `target` time exactly.
pub fn advance_to(state: &mut TableState, geom: &TableGeometry, target: f64) -> Result<()> {
    if target < state.time {
        return Err(Error::contract(format!(
            "cannot advance backwards from {} to {}",
            state.time, target
        )));
    }
    while step_to_next_event(state, geom, target)?.is_some() {}
    Ok(())
}
