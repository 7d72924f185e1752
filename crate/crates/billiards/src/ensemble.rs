//! Runs N independent tables and aggregates region-passage outcomes.
//!
//! Each trial owns the stream `(master_seed, trial_index)`, so the ensemble
//! is a pure function of the config, N and the master seed: results are
//! bit-identical no matter how many worker threads execute the trials or in
//! which order they finish.

use rayon::prelude::*;

use crate::dynamics::step_to_next_event;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scenario::{sample_initial_state, Rect, ScenarioConfig};
use crate::stats::{convergence_trace, ConvergenceTrace};
use crate::vec2::Vec2;

/// Outcome of one simulated table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    /// One latch per declared region event, in declaration order.
    pub flags: Vec<bool>,
    pub collision_count: u64,
    /// Simulation time at the end of the trial (always the horizon).
    pub final_time: f64,
}

/// Aggregated counts over an ensemble, with the raw outcomes retained so the
/// bootstrap can resample tables without re-simulating.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_trials: u64,
    pub event_names: Vec<String>,
    /// Occurrences per event, in declaration order.
    pub counts: Vec<u64>,
    /// Joint occurrences of the first two events.
    pub joint_count: u64,
    pub outcomes: Vec<TrialOutcome>,
    /// Running prefix estimates at the requested checkpoints.
    pub trace: ConvergenceTrace,
}

/// Does the closed segment p0..p1 meet the closed rectangle?
///
/// Slab test: intersect the parameter ranges where x(t) and y(t) lie inside
/// the rectangle with [0, 1]. Covers endpoint containment, edge crossings and
/// full traversals, including degenerate point segments.
pub fn segment_crosses_rect(p0: Vec2, p1: Vec2, rect: &Rect) -> bool {
    let (mut t_lo, mut t_hi) = (0.0f64, 1.0f64);
    for (c0, c1, lo, hi) in [
        (p0.x, p1.x, rect.x1, rect.x2),
        (p0.y, p1.y, rect.y2, rect.y1),
    ] {
        let d = c1 - c0;
        if d == 0.0 {
            if c0 < lo || c0 > hi {
                return false;
            }
            continue;
        }
        let (mut a, mut b) = ((lo - c0) / d, (hi - c0) / d);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t_lo = t_lo.max(a);
        t_hi = t_hi.min(b);
        if t_lo > t_hi {
            return false;
        }
    }
    true
}

/// Per-event latch bookkeeping for one trial.
struct EventWatcher<'a> {
    rect: &'a Rect,
    window: (f64, f64),
    disk: usize,
    hit: bool,
}

impl EventWatcher<'_> {
    /// Tests the tracked disk's flight from (t0, p0) to (t1, p1), clipped to
    /// the event window by linear interpolation.
    fn observe(&mut self, t0: f64, t1: f64, p0: Vec2, p1: Vec2) {
        if self.hit {
            return;
        }
        let (w0, w1) = self.window;
        let a = t0.max(w0);
        let b = t1.min(w1);
        if a > b {
            return;
        }
        let (q0, q1) = if t1 > t0 {
            let inv = 1.0 / (t1 - t0);
            let lerp = |t: f64| p0 + (p1 - p0) * ((t - t0) * inv);
            (lerp(a), lerp(b))
        } else {
            (p0, p1)
        };
        if segment_crosses_rect(q0, q1, self.rect) {
            self.hit = true;
        }
    }
}

/// Simulates one table from its own stream and reports which region events
/// fired. Errors are annotated with the replay coordinates.
pub fn run_trial(config: &ScenarioConfig, trial_index: u64, master_seed: u64) -> Result<TrialOutcome> {
    let annotate = |e: Error| match e {
        Error::Internal(msg) => Error::Internal(format!(
            "{msg} (replay: trial {trial_index}, seed {master_seed})"
        )),
        other => other,
    };

    let mut stream = RandomStream::new(master_seed, trial_index);
    let mut state = sample_initial_state(config, &mut stream)?;

    let mut watchers: Vec<EventWatcher> = Vec::with_capacity(config.events.len());
    for ev in &config.events {
        let disk = config
            .disk_index(ev.disk_id)
            .ok_or_else(|| Error::validation(format!("event `{}` tracks unknown disk", ev.name)))?;
        watchers.push(EventWatcher {
            rect: &ev.rect,
            window: ev.window,
            disk,
            hit: false,
        });
    }

    let mut positions: Vec<Vec2> = state.disks.iter().map(|d| d.center).collect();
    loop {
        let t0 = state.time;
        let event = step_to_next_event(&mut state, &config.geometry, config.horizon)
            .map_err(annotate)?;
        let t1 = state.time;
        for w in &mut watchers {
            let p1 = state.disks[w.disk].center;
            w.observe(t0, t1, positions[w.disk], p1);
        }
        for (p, d) in positions.iter_mut().zip(&state.disks) {
            *p = d.center;
        }
        if event.is_none() {
            break;
        }
    }

    Ok(TrialOutcome {
        trial_index,
        flags: watchers.iter().map(|w| w.hit).collect(),
        collision_count: state.collision_count,
        final_time: state.time,
    })
}

/// Runs trials 0..n in parallel and aggregates them in trial order.
///
/// `checkpoints` must be sorted, strictly increasing, within [1, n]; the
/// running estimates over each prefix are recorded in the result's trace.
pub fn run_ensemble(
    config: &ScenarioConfig,
    n: u64,
    master_seed: u64,
    checkpoints: &[u64],
) -> Result<EnsembleResult> {
    if n < 1 {
        return Err(Error::contract("ensemble size must be at least 1".to_string()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("checkpoints must be strictly increasing".to_string()));
    }
    if checkpoints.iter().any(|&c| c < 1 || c > n) {
        return Err(Error::contract(format!("checkpoints must lie in [1, {n}]")));
    }
    config.validate()?;

    // Indexed parallel map; collect keeps trial order regardless of
    // completion order, and the first failure aborts the ensemble.
    let outcomes: Vec<TrialOutcome> = (0..n)
        .into_par_iter()
        .map(|trial| run_trial(config, trial, master_seed))
        .collect::<Result<Vec<_>>>()?;

    let n_events = config.events.len();
    let mut counts = vec![0u64; n_events];
    let mut joint_count = 0u64;
    for outcome in &outcomes {
        for (count, &flag) in counts.iter_mut().zip(&outcome.flags) {
            *count += flag as u64;
        }
        if outcome.flags[0] && outcome.flags[1] {
            joint_count += 1;
        }
    }

    let trace = convergence_trace(&outcomes, checkpoints)?;

    Ok(EnsembleResult {
        n_trials: n,
        event_names: config.events.iter().map(|e| e.name.clone()).collect(),
        counts,
        joint_count,
        outcomes,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, BuiltinScenario, RegionEvent, ScalarDistribution};

    fn rect(x1: f64, y1: f64, x2: f64, y2: f64) -> Rect {
        Rect { x1, y1, x2, y2 }
    }

    #[test]
    fn endpoint_inside_counts_as_crossing() {
        let r = rect(10.0, 20.0, 30.0, 5.0);
        assert!(segment_crosses_rect(Vec2::new(15.0, 10.0), Vec2::new(100.0, 100.0), &r));
        assert!(segment_crosses_rect(Vec2::new(0.0, 0.0), Vec2::new(15.0, 10.0), &r));
    }

    #[test]
    fn separated_segment_misses() {
        let r = rect(10.0, 20.0, 30.0, 5.0);
        assert!(!segment_crosses_rect(Vec2::new(0.0, 0.0), Vec2::new(5.0, 100.0), &r));
    }

    #[test]
    fn traversal_and_boundary_touch_count() {
        let r = rect(10.0, 20.0, 30.0, 5.0);
        // Straight through, both endpoints outside.
        assert!(segment_crosses_rect(Vec2::new(0.0, 12.0), Vec2::new(50.0, 12.0), &r));
        // Touching one edge only.
        assert!(segment_crosses_rect(Vec2::new(10.0, 0.0), Vec2::new(10.0, 30.0), &r));
        // Point segment on a corner.
        assert!(segment_crosses_rect(Vec2::new(30.0, 20.0), Vec2::new(30.0, 20.0), &r));
        // Point segment outside.
        assert!(!segment_crosses_rect(Vec2::new(31.0, 20.0), Vec2::new(31.0, 20.0), &r));
    }

    /// Dense-sampling oracle: when any of 1e4 interpolated points lies inside
    /// the rectangle, the exact test must agree. The converse can differ only
    /// for crossings shorter than the sampling resolution, where the exact
    /// test is authoritative.
    #[test]
    fn segment_test_agrees_with_dense_sampling() {
        let mut rng = crate::rng::RandomStream::new(0x5E6, 3);
        let r = rect(40.0, 70.0, 90.0, 30.0);
        let mut oracle_hits = 0;
        for case in 0..400 {
            let p0 = Vec2::new(rng.uniform(0.0, 130.0), rng.uniform(0.0, 100.0));
            let p1 = Vec2::new(rng.uniform(0.0, 130.0), rng.uniform(0.0, 100.0));
            let exact = segment_crosses_rect(p0, p1, &r);
            let mut sampled = false;
            for k in 0..=10_000 {
                let t = k as f64 / 10_000.0;
                if r.contains(p0 + (p1 - p0) * t) {
                    sampled = true;
                    break;
                }
            }
            if sampled {
                oracle_hits += 1;
                assert!(exact, "case {case}: sampling found a hit the exact test missed");
            }
        }
        assert!(oracle_hits > 100, "oracle exercised only {oracle_hits} hits");
    }

    fn two_disk_config() -> ScenarioConfig {
        let mut config = builtin_scenario(BuiltinScenario::Basic);
        config.disks.truncate(2);
        config.disks[0].y0 = ScalarDistribution::Point(155.0);
        config.events = vec![
            RegionEvent {
                name: "start".to_string(),
                disk_id: 0,
                rect: rect(190.0, 165.0, 210.0, 145.0),
                window: (0.0, 50.0),
            },
            RegionEvent {
                name: "unvisited_corner".to_string(),
                disk_id: 0,
                rect: rect(20.0, 290.0, 60.0, 260.0),
                window: (0.0, 0.5),
            },
        ];
        config
    }

    #[test]
    fn region_at_the_start_point_latches_immediately() {
        let config = two_disk_config();
        let outcome = run_trial(&config, 0, 0).unwrap();
        assert!(outcome.flags[0], "start region must latch at t = 0");
        assert_eq!(outcome.final_time, 50.0);
    }

    #[test]
    fn unreachable_region_stays_unset() {
        let config = two_disk_config();
        let outcome = run_trial(&config, 0, 0).unwrap();
        assert!(!outcome.flags[1], "corner region cannot be reached in 0.5 time units");
    }

    #[test]
    fn window_clipping_excludes_out_of_window_passages() {
        // A lone disk flying right crosses the region only after t = 10, but
        // the watch window closes at t = 5.
        let mut config = two_disk_config();
        config.disks.truncate(1);
        config.events = vec![
            RegionEvent {
                name: "late".to_string(),
                disk_id: 0,
                rect: rect(440.0, 180.0, 480.0, 130.0),
                window: (0.0, 5.0),
            },
            RegionEvent {
                name: "late_enough".to_string(),
                disk_id: 0,
                rect: rect(440.0, 180.0, 480.0, 130.0),
                window: (0.0, 50.0),
            },
        ];
        let outcome = run_trial(&config, 0, 0).unwrap();
        assert!(!outcome.flags[0], "passage after the window must not latch");
        assert!(outcome.flags[1]);
    }

    #[test]
    fn trial_is_deterministic_across_repeats() {
        let config = builtin_scenario(BuiltinScenario::Basic);
        let a = run_trial(&config, 3, 42).unwrap();
        let b = run_trial(&config, 3, 42).unwrap();
        let c = run_trial(&config, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn single_trial_ensemble_has_consistent_counts() {
        let config = builtin_scenario(BuiltinScenario::Basic);
        let result = run_ensemble(&config, 1, 9, &[1]).unwrap();
        assert_eq!(result.n_trials, 1);
        for &c in &result.counts {
            assert!(c <= 1);
        }
        assert!(result.joint_count <= result.counts[0].min(result.counts[1]));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let config = builtin_scenario(BuiltinScenario::Basic);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_ensemble(&config, 64, 123, &[16, 64]).unwrap())
        };
        let one = run_with(1);
        let four = run_with(4);
        let eight = run_with(8);
        assert_eq!(one, four);
        assert_eq!(four, eight);
    }

    #[test]
    fn counts_obey_inclusion_bounds() {
        let config = builtin_scenario(BuiltinScenario::Brownian);
        let result = run_ensemble(&config, 200, 5, &[50, 100, 200]).unwrap();
        let (c1, c2, c12, n) = (
            result.counts[0],
            result.counts[1],
            result.joint_count,
            result.n_trials,
        );
        assert!(c12 <= c1.min(c2));
        assert!(c1 + c2 - c12 <= n);
        assert!(c1 <= n && c2 <= n);
        assert_eq!(result.outcomes.len(), n as usize);
    }

    #[test]
    fn bad_checkpoints_are_contract_errors() {
        let config = builtin_scenario(BuiltinScenario::Basic);
        assert!(run_ensemble(&config, 10, 0, &[5, 5]).is_err());
        assert!(run_ensemble(&config, 10, 0, &[0]).is_err());
        assert!(run_ensemble(&config, 10, 0, &[11]).is_err());
        assert!(run_ensemble(&config, 0, 0, &[]).is_err());
    }

    /// Once an event fires inside a window it must also fire in any longer
    /// window: the latch never reverts.
    #[test]
    fn latching_is_monotone_in_the_window() {
        let mut config = builtin_scenario(BuiltinScenario::Basic);
        let rect_ = config.events[0].rect;
        config.events = vec![
            RegionEvent {
                name: "short".to_string(),
                disk_id: 0,
                rect: rect_,
                window: (0.0, 45.0),
            },
            RegionEvent {
                name: "long".to_string(),
                disk_id: 0,
                rect: rect_,
                window: (0.0, 50.0),
            },
        ];
        let mut short_hits = 0;
        for trial in 0..200 {
            let outcome = run_trial(&config, trial, 99).unwrap();
            if outcome.flags[0] {
                short_hits += 1;
                assert!(outcome.flags[1], "trial {trial}: latch reverted");
            }
        }
        assert!(short_hits > 0, "the short window never fired; test is vacuous");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            /// Dense point sampling never finds a crossing the exact segment
            /// test misses.
            #[test]
            fn exact_test_dominates_sampling(
                x0 in -20.0..120.0f64,
                y0 in -20.0..120.0f64,
                x1 in -20.0..120.0f64,
                y1 in -20.0..120.0f64,
                rx in 0.0..80.0f64,
                ry in 20.0..100.0f64,
                w in 5.0..40.0f64,
                h in 5.0..40.0f64,
            ) {
                let rect = Rect { x1: rx, y1: ry, x2: rx + w, y2: ry - h };
                let p0 = Vec2::new(x0, y0);
                let p1 = Vec2::new(x1, y1);
                let exact = segment_crosses_rect(p0, p1, &rect);
                for k in 0..=1_000 {
                    let t = k as f64 / 1_000.0;
                    if rect.contains(p0 + (p1 - p0) * t) {
                        prop_assert!(exact, "sampled hit at t={t} missed by the exact test");
                        break;
                    }
                }
            }
        }
    }
}
