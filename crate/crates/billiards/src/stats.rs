//! Estimators over trial outcomes: event probabilities, the correlation
//! magnitude delta = |P(E1,E2) - P(E1)P(E2)|, a table-level bootstrap for its
//! uncertainty, and running convergence traces.

use crate::ensemble::TrialOutcome;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Empirical probability of one event: occurrences over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityEstimate {
    pub name: String,
    pub count: u64,
    pub n: u64,
    pub p_hat: f64,
}

/// Everything needed to judge whether two events look correlated at the
/// achieved precision.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub p1_hat: f64,
    pub p2_hat: f64,
    pub p12_hat: f64,
    /// The independence benchmark p1_hat * p2_hat.
    pub product: f64,
    pub delta: f64,
    pub ci_halfwidth: f64,
    pub ci_level: f64,
    /// True when delta exceeds its confidence half-width.
    pub significant: bool,
}

/// One prefix row of a running-estimate trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: u64,
    pub p1: f64,
    pub p2: f64,
    pub p12: f64,
    pub product: f64,
}

/// Running estimates of the four probability series at increasing prefix
/// sizes, the data behind a stabilization plot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

pub fn estimate_probability(name: impl Into<String>, count: u64, n: u64) -> Result<ProbabilityEstimate> {
    if n == 0 {
        return Err(Error::contract("probability estimate over zero trials".to_string()));
    }
    if count > n {
        return Err(Error::contract(format!("count {count} exceeds trial count {n}")));
    }
    Ok(ProbabilityEstimate {
        name: name.into(),
        count,
        n,
        p_hat: count as f64 / n as f64,
    })
}

/// |p12 - p1*p2|, the correlation magnitude between two events.
pub fn correlation_delta(p12: f64, p1: f64, p2: f64) -> Result<f64> {
    for (v, what) in [(p12, "p12"), (p1, "p1"), (p2, "p2")] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::contract(format!("{what} = {v} is not a probability")));
        }
    }
    if p12 > p1.min(p2) + 1e-12 {
        return Err(Error::contract(format!(
            "joint probability {p12} exceeds a marginal ({p1}, {p2})"
        )));
    }
    Ok((p12 - p1 * p2).abs())
}

fn delta_from_counts(c1: u64, c2: u64, c12: u64, n: u64) -> f64 {
    let n = n as f64;
    (c12 as f64 / n - (c1 as f64 / n) * (c2 as f64 / n)).abs()
}

fn count_first_pair(outcomes: &[TrialOutcome]) -> (u64, u64, u64) {
    let mut c1 = 0u64;
    let mut c2 = 0u64;
    let mut c12 = 0u64;
    for o in outcomes {
        c1 += o.flags[0] as u64;
        c2 += o.flags[1] as u64;
        c12 += (o.flags[0] && o.flags[1]) as u64;
    }
    (c1, c2, c12)
}

/// Interpolated order statistic of a sorted sample at quantile q.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

/// Table-level bootstrap of delta.
///
/// Resamples the outcomes with replacement `b` times from the given stream,
/// recomputes delta per resample, and returns the full-sample point estimate
/// with half the width of the central `level` interval of the bootstrap
/// distribution.
pub fn bootstrap_delta_ci(
    outcomes: &[TrialOutcome],
    b: u32,
    level: f64,
    stream: &mut RandomStream,
) -> Result<(f64, f64)> {
    if outcomes.is_empty() {
        return Err(Error::contract("bootstrap over an empty outcome list".to_string()));
    }
    if b < 100 {
        return Err(Error::contract(format!("bootstrap needs at least 100 resamples, got {b}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::contract(format!("confidence level {level} must be in (0, 1)")));
    }
    if outcomes.iter().any(|o| o.flags.len() < 2) {
        return Err(Error::contract("outcomes must carry at least two event flags".to_string()));
    }

    let n = outcomes.len();
    let (c1, c2, c12) = count_first_pair(outcomes);
    let point = delta_from_counts(c1, c2, c12, n as u64);

    // Tally only the two flag bits; resampling whole outcomes would be
    // equivalent but slower.
    let mut cells: Vec<u8> = Vec::with_capacity(n);
    for o in outcomes {
        cells.push(o.flags[0] as u8 | ((o.flags[1] as u8) << 1));
    }

    let mut deltas = Vec::with_capacity(b as usize);
    for _ in 0..b {
        let (mut r1, mut r2, mut r12) = (0u64, 0u64, 0u64);
        for _ in 0..n {
            let cell = cells[stream.index(n)];
            r1 += (cell & 1) as u64;
            r2 += (cell >> 1) as u64;
            r12 += (cell == 3) as u64;
        }
        deltas.push(delta_from_counts(r1, r2, r12, n as u64));
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let tail = (1.0 - level) / 2.0;
    let lo = quantile_sorted(&deltas, tail);
    let hi = quantile_sorted(&deltas, 1.0 - tail);
    Ok((point, (hi - lo) / 2.0))
}

/// Builds a correlation report for the first two events of an ensemble.
pub fn correlation_report(
    outcomes: &[TrialOutcome],
    b: u32,
    level: f64,
    stream: &mut RandomStream,
) -> Result<CorrelationReport> {
    if outcomes.is_empty() {
        return Err(Error::contract("correlation report over an empty outcome list".to_string()));
    }
    let n = outcomes.len() as u64;
    let (c1, c2, c12) = count_first_pair(outcomes);
    let p1 = estimate_probability("E1", c1, n)?.p_hat;
    let p2 = estimate_probability("E2", c2, n)?.p_hat;
    let p12 = estimate_probability("E1&E2", c12, n)?.p_hat;
    let delta = correlation_delta(p12, p1, p2)?;
    let (point, ci_halfwidth) = bootstrap_delta_ci(outcomes, b, level, stream)?;
    debug_assert_eq!(point, delta);
    Ok(CorrelationReport {
        p1_hat: p1,
        p2_hat: p2,
        p12_hat: p12,
        product: p1 * p2,
        delta,
        ci_halfwidth,
        ci_level: level,
        significant: delta - ci_halfwidth > 0.0,
    })
}

/// Prefix estimates at each checkpoint, in trial order.
pub fn convergence_trace(outcomes: &[TrialOutcome], checkpoints: &[u64]) -> Result<ConvergenceTrace> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("checkpoints must be strictly increasing".to_string()));
    }
    if let Some(&last) = checkpoints.last() {
        if last > outcomes.len() as u64 {
            return Err(Error::contract(format!(
                "checkpoint {last} exceeds the {} available outcomes",
                outcomes.len()
            )));
        }
    }
    if checkpoints.first().is_some_and(|&c| c < 1) {
        return Err(Error::contract("checkpoints start at 1".to_string()));
    }

    let mut rows = Vec::with_capacity(checkpoints.len());
    let (mut c1, mut c2, mut c12) = (0u64, 0u64, 0u64);
    let mut next = checkpoints.iter().copied();
    let mut target = next.next();
    for (k, o) in outcomes.iter().enumerate() {
        c1 += o.flags[0] as u64;
        c2 += o.flags[1] as u64;
        c12 += (o.flags[0] && o.flags[1]) as u64;
        let reached = (k + 1) as u64;
        while target == Some(reached) {
            let n = reached as f64;
            let p1 = c1 as f64 / n;
            let p2 = c2 as f64 / n;
            rows.push(TraceRow {
                n: reached,
                p1,
                p2,
                p12: c12 as f64 / n,
                product: p1 * p2,
            });
            target = next.next();
        }
        if target.is_none() {
            break;
        }
    }
    Ok(ConvergenceTrace { rows })
}

/// Least-squares slope of log |p12(n) - p12(reference)| against log n,
/// ignoring checkpoints whose deviation is below 1e-12.
///
/// For independent trials the deviations shrink like n^(-1/2), so the slope
/// sits near -0.5 once the trace spans enough of a decade.
pub fn fit_fluctuation_slope(trace: &ConvergenceTrace, reference: &TraceRow) -> Result<f64> {
    if trace.rows.len() < 5 {
        return Err(Error::contract(format!(
            "fluctuation fit needs at least 5 checkpoints, got {}",
            trace.rows.len()
        )));
    }
    let min_n = trace.rows.first().unwrap().n;
    let max_n = trace.rows.last().unwrap().n;
    if (max_n as f64) < 10.0 * min_n as f64 {
        return Err(Error::contract(format!(
            "checkpoints span [{min_n}, {max_n}], less than one decade"
        )));
    }

    let points: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter_map(|row| {
            let dev = (row.p12 - reference.p12).abs();
            (dev > 1e-12).then(|| ((row.n as f64).ln(), dev.ln()))
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} checkpoints deviate from the reference",
            points.len()
        )));
    }

    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(i: u64, e1: bool, e2: bool) -> TrialOutcome {
        TrialOutcome {
            trial_index: i,
            flags: vec![e1, e2],
            collision_count: 0,
            final_time: 500.0,
        }
    }

    /// Synthetic outcomes with the given joint cell probabilities.
    fn synthetic(n: u64, p11: f64, p10: f64, p01: f64, stream: &mut RandomStream) -> Vec<TrialOutcome> {
        (0..n)
            .map(|i| {
                let u = stream.next_unit();
                let (e1, e2) = if u < p11 {
                    (true, true)
                } else if u < p11 + p10 {
                    (true, false)
                } else if u < p11 + p10 + p01 {
                    (false, true)
                } else {
                    (false, false)
                };
                outcome(i, e1, e2)
            })
            .collect()
    }

    #[test]
    fn probability_estimates_are_exact_ratios() {
        assert_eq!(estimate_probability("e", 0, 100).unwrap().p_hat, 0.0);
        assert_eq!(estimate_probability("e", 100, 100).unwrap().p_hat, 1.0);
        let est = estimate_probability("e", 437, 5000).unwrap();
        assert_eq!(est.p_hat, 437.0 / 5000.0);
        assert_eq!(est.p_hat, 0.0874);
        assert!(estimate_probability("e", 5, 0).is_err());
        assert!(estimate_probability("e", 6, 5).is_err());
    }

    #[test]
    fn delta_of_independent_marginals_is_zero() {
        assert_eq!(correlation_delta(0.12, 0.3, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn delta_of_perfectly_coupled_events() {
        let p = 0.35;
        let delta = correlation_delta(p, p, p).unwrap();
        assert!((delta - (p - p * p)).abs() < 1e-15);
    }

    #[test]
    fn delta_rejects_non_probabilities_and_impossible_joints() {
        assert!(correlation_delta(-0.1, 0.5, 0.5).is_err());
        assert!(correlation_delta(0.2, 1.5, 0.5).is_err());
        assert!(correlation_delta(0.6, 0.5, 0.9).is_err());
    }

    #[test]
    fn delta_is_symmetric_in_the_marginals() {
        let a = correlation_delta(0.21, 0.4, 0.6).unwrap();
        let b = correlation_delta(0.21, 0.6, 0.4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_outcomes_have_zero_halfwidth() {
        let outcomes: Vec<_> = (0..50).map(|i| outcome(i, true, true)).collect();
        let mut stream = RandomStream::new(0, 0);
        let (point, hw) = bootstrap_delta_ci(&outcomes, 200, 0.95, &mut stream).unwrap();
        assert_eq!(point, 0.0);
        assert_eq!(hw, 0.0);
    }

    #[test]
    fn bootstrap_is_reproducible_per_stream() {
        let mut gen = RandomStream::new(1, 0);
        let outcomes = synthetic(800, 0.2, 0.2, 0.2, &mut gen);
        let a = bootstrap_delta_ci(&outcomes, 300, 0.9, &mut RandomStream::new(2, 7)).unwrap();
        let b = bootstrap_delta_ci(&outcomes, 300, 0.9, &mut RandomStream::new(2, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_rejects_bad_arguments() {
        let outcomes: Vec<_> = (0..10).map(|i| outcome(i, true, false)).collect();
        let mut s = RandomStream::new(0, 0);
        assert!(bootstrap_delta_ci(&[], 200, 0.95, &mut s).is_err());
        assert!(bootstrap_delta_ci(&outcomes, 99, 0.95, &mut s).is_err());
        assert!(bootstrap_delta_ci(&outcomes, 200, 1.0, &mut s).is_err());
    }

    /// Calibration on independent events: the point estimate should fall
    /// inside its own confidence half-width in nearly all regenerations.
    #[test]
    fn bootstrap_covers_zero_for_independent_events() {
        let mut covered = 0;
        for rep in 0..50u64 {
            let mut gen = RandomStream::new(0x4000CA11B, rep);
            // P(E1) = 0.3, P(E2) = 0.4, independent.
            let outcomes = synthetic(5_000, 0.12, 0.18, 0.28, &mut gen);
            let mut boot = RandomStream::new(0x40000B007, rep);
            let (point, hw) = bootstrap_delta_ci(&outcomes, 1_000, 0.95, &mut boot).unwrap();
            if point < hw {
                covered += 1;
            }
        }
        assert!(covered >= 45, "covered only {covered}/50");
    }

    /// Standard-error scaling: halving the sample roughly multiplies the
    /// half-width by sqrt(2).
    #[test]
    fn halfwidth_scales_like_root_n() {
        let mut ratios = Vec::new();
        for rep in 0..20u64 {
            let mut gen = RandomStream::new(0x5CA1E, rep);
            let outcomes = synthetic(5_000, 0.12, 0.18, 0.28, &mut gen);
            let mut b1 = RandomStream::new(0xB1, rep);
            let mut b2 = RandomStream::new(0xB2, rep);
            let (_, hw_full) = bootstrap_delta_ci(&outcomes, 400, 0.95, &mut b1).unwrap();
            let (_, hw_half) = bootstrap_delta_ci(&outcomes[..2_500], 400, 0.95, &mut b2).unwrap();
            ratios.push(hw_half / hw_full);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(
            (1.2..=1.7).contains(&mean),
            "mean half-width ratio {mean} outside [1.2, 1.7]"
        );
    }

    #[test]
    fn trace_with_single_checkpoint_equals_full_sample() {
        let mut gen = RandomStream::new(3, 0);
        let outcomes = synthetic(500, 0.25, 0.25, 0.25, &mut gen);
        let trace = convergence_trace(&outcomes, &[500]).unwrap();
        assert_eq!(trace.rows.len(), 1);
        let (c1, c2, c12) = count_first_pair(&outcomes);
        assert_eq!(trace.rows[0].p1, c1 as f64 / 500.0);
        assert_eq!(trace.rows[0].p2, c2 as f64 / 500.0);
        assert_eq!(trace.rows[0].p12, c12 as f64 / 500.0);
    }

    #[test]
    fn constant_outcomes_give_constant_rows() {
        let outcomes: Vec<_> = (0..100).map(|i| outcome(i, true, false)).collect();
        let trace = convergence_trace(&outcomes, &[10, 50, 100]).unwrap();
        for row in &trace.rows {
            assert_eq!(row.p1, 1.0);
            assert_eq!(row.p2, 0.0);
            assert_eq!(row.p12, 0.0);
            assert_eq!(row.product, 0.0);
        }
    }

    /// Binomial concentration: the n = 5000 row sits within three standard
    /// errors of the truth in essentially every regeneration.
    #[test]
    fn trace_rows_concentrate_around_the_truth() {
        let (p11, p10, p01) = (0.12, 0.18, 0.28);
        let p1 = p11 + p10;
        let p2 = p11 + p01;
        let mut failures = 0;
        for rep in 0..100u64 {
            let mut gen = RandomStream::new(0x10000C04C, rep);
            let outcomes = synthetic(5_000, p11, p10, p01, &mut gen);
            let trace = convergence_trace(&outcomes, &[5_000]).unwrap();
            let row = trace.rows[0];
            let ok = |est: f64, truth: f64| {
                (est - truth).abs() <= 3.0 * (truth * (1.0 - truth) / 5_000.0).sqrt()
            };
            if !(ok(row.p1, p1) && ok(row.p2, p2) && ok(row.p12, p11)) {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures}/100 regenerations out of band");
    }

    #[test]
    fn trace_rejects_malformed_checkpoints() {
        let outcomes: Vec<_> = (0..10).map(|i| outcome(i, true, true)).collect();
        assert!(convergence_trace(&outcomes, &[3, 3]).is_err());
        assert!(convergence_trace(&outcomes, &[0, 5]).is_err());
        assert!(convergence_trace(&outcomes, &[5, 11]).is_err());
    }

    /// Monte Carlo of the estimator itself: iid trials must produce a slope
    /// near -1/2 in most regenerations.
    #[test]
    fn slope_recovers_root_n_decay() {
        let checkpoints: Vec<u64> = (0..60)
            .map(|i| (100.0 * (1000.0f64).powf(i as f64 / 59.0)).round() as u64)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut in_band = 0;
        for rep in 0..30u64 {
            let mut gen = RandomStream::new(0x30000510E, rep);
            let outcomes = synthetic(100_000, 0.12, 0.18, 0.28, &mut gen);
            let trace = convergence_trace(&outcomes, &checkpoints).unwrap();
            let reference = *trace.rows.last().unwrap();
            match fit_fluctuation_slope(&trace, &reference) {
                Ok(slope) if (-0.7..=-0.3).contains(&slope) => in_band += 1,
                Ok(_) | Err(_) => {}
            }
        }
        assert!(in_band >= 24, "slope in band only {in_band}/30 times");
    }

    #[test]
    fn slope_needs_deviating_points() {
        let outcomes: Vec<_> = (0..2000).map(|i| outcome(i, true, true)).collect();
        let trace = convergence_trace(&outcomes, &[100, 200, 500, 1000, 2000]).unwrap();
        let reference = *trace.rows.last().unwrap();
        assert!(matches!(
            fit_fluctuation_slope(&trace, &reference),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn slope_rejects_short_traces() {
        let outcomes: Vec<_> = (0..2000).map(|i| outcome(i, i % 2 == 0, i % 3 == 0)).collect();
        let trace = convergence_trace(&outcomes, &[100, 2000]).unwrap();
        let reference = *trace.rows.last().unwrap();
        assert!(matches!(
            fit_fluctuation_slope(&trace, &reference),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn report_delta_matches_its_own_estimates() {
        let mut gen = RandomStream::new(21, 0);
        let outcomes = synthetic(2_000, 0.2, 0.1, 0.15, &mut gen);
        let mut boot = RandomStream::new(22, 0);
        let report = correlation_report(&outcomes, 200, 0.95, &mut boot).unwrap();
        let recomputed = (report.p12_hat - report.p1_hat * report.p2_hat).abs();
        assert!((report.delta - recomputed).abs() <= 1e-15);
        assert_eq!(report.product, report.p1_hat * report.p2_hat);
        assert_eq!(report.significant, report.delta - report.ci_halfwidth > 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Delta is symmetric in the marginals and stays a probability.
            #[test]
            fn delta_symmetry_and_bounds(
                p1 in 0.0..=1.0f64,
                p2 in 0.0..=1.0f64,
                frac in 0.0..=1.0f64,
            ) {
                let p12 = frac * p1.min(p2);
                let a = correlation_delta(p12, p1, p2).unwrap();
                let b = correlation_delta(p12, p2, p1).unwrap();
                prop_assert_eq!(a, b);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    /// With a known dependence built in, the point estimate converges to it
    /// within three half-widths at large N.
    #[test]
    fn point_estimate_converges_to_known_dependence() {
        // Cells: p11 = 0.25, p10 = 0.15, p01 = 0.15 -> p1 = p2 = 0.4,
        // delta = |0.25 - 0.16| = 0.09.
        let truth = 0.09;
        let mut hits = 0;
        for rep in 0..20u64 {
            let mut gen = RandomStream::new(0xDE9, rep);
            let outcomes = synthetic(50_000, 0.25, 0.15, 0.15, &mut gen);
            let mut boot = RandomStream::new(0xDEA, rep);
            let (point, hw) = bootstrap_delta_ci(&outcomes, 1_000, 0.95, &mut boot).unwrap();
            if (point - truth).abs() < 3.0 * hw {
                hits += 1;
            }
        }
        assert!(hits >= 19, "converged in only {hits}/20 regenerations");
    }
}
