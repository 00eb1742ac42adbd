//! Run summaries, cross-seed bands, and Welch's unequal-variance t-test.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::trace::{TraceEvent, TraceLog, OBSTRUCTED};

/// Headline numbers of one simulation run.
///
/// Vehicles that never park are censored: their time-to-parking is the time
/// between arrival and the end of the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mean_time_to_parking: f64,
    pub mean_obstruction_time: f64,
    pub parked_count: usize,
    pub total_count: usize,
    pub censored_count: usize,
    pub duration_s: f64,
    /// `(time, parked so far)`, starting at `(0, 0)` with one sample per park.
    pub parked_count_timeseries: Vec<(f64, usize)>,
}

#[derive(Debug, Default, Clone, Copy)]
struct VehicleTally {
    arrived: f64,
    parked: Option<f64>,
    obstruction: f64,
    /// Entry time of the current link when it was obstructed.
    open: Option<f64>,
}

/// Per-vehicle `(time-to-parking, obstruction time, parked)` in vehicle order.
pub fn per_vehicle(log: &TraceLog) -> Result<Vec<(f64, f64, bool)>> {
    log.validate()?;
    let mut tallies: BTreeMap<usize, VehicleTally> = BTreeMap::new();
    for r in log.records() {
        match r.event {
            TraceEvent::Arrive => {
                tallies.insert(
                    r.vehicle,
                    VehicleTally {
                        arrived: r.time,
                        ..Default::default()
                    },
                );
            }
            TraceEvent::EnterLink | TraceEvent::Park => {
                let t = tallies.get_mut(&r.vehicle).expect("validated");
                if let Some(since) = t.open.take() {
                    t.obstruction += r.time - since;
                }
                if r.event == TraceEvent::Park {
                    t.parked = Some(r.time);
                } else if r.detail == OBSTRUCTED {
                    t.open = Some(r.time);
                }
            }
            TraceEvent::Reroute | TraceEvent::BlockedSkip => {}
        }
    }
    let end = log.duration_s();
    Ok(tallies
        .into_values()
        .map(|t| {
            let obstruction = t.obstruction + t.open.map_or(0.0, |since| (end - since).max(0.0));
            match t.parked {
                Some(p) => (p - t.arrived, obstruction, true),
                None => ((end - t.arrived).max(0.0), obstruction, false),
            }
        })
        .collect())
}

pub fn summarize(log: &TraceLog) -> Result<RunSummary> {
    let vehicles = per_vehicle(log)?;
    let n = vehicles.len();
    let mean = |f: fn(&(f64, f64, bool)) -> f64| {
        if n == 0 {
            0.0
        } else {
            vehicles.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let parked_count = vehicles.iter().filter(|v| v.2).count();
    let mut series = vec![(0.0, 0)];
    for r in log.records().iter().filter(|r| r.event == TraceEvent::Park) {
        let count = series.last().map_or(0, |s| s.1) + 1;
        series.push((r.time, count));
    }
    Ok(RunSummary {
        mean_time_to_parking: mean(|v| v.0),
        mean_obstruction_time: mean(|v| v.1),
        parked_count,
        total_count: n,
        censored_count: n - parked_count,
        duration_s: log.duration_s(),
        parked_count_timeseries: series,
    })
}

impl RunSummary {
    /// Parked count at `t` by step interpolation.
    pub fn parked_at(&self, t: f64) -> usize {
        let i = self.parked_count_timeseries.partition_point(|&(time, _)| time <= t);
        if i == 0 {
            0
        } else {
            self.parked_count_timeseries[i - 1].1
        }
    }
}

/// Pointwise mean and population standard deviation of parked counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub time: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Bands {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,mean,std\n");
        for i in 0..self.time.len() {
            let _ = writeln!(out, "{:.3},{:.6},{:.6}", self.time[i], self.mean[i], self.std[i]);
        }
        out
    }
}

/// Resamples every run's parked-count series on the union of their sample
/// times (plus the longest run end) and reduces pointwise.
pub fn aggregate(summaries: &[RunSummary]) -> Result<Bands> {
    if summaries.is_empty() {
        return Err(Error::Statistics("nothing to aggregate".into()));
    }
    let mut grid: Vec<f64> = summaries
        .iter()
        .flat_map(|s| s.parked_count_timeseries.iter().map(|p| p.0))
        .chain(summaries.iter().map(|s| s.duration_s))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let n = summaries.len() as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut std = Vec::with_capacity(grid.len());
    for &t in &grid {
        let values: Vec<f64> = summaries.iter().map(|s| s.parked_at(t) as f64).collect();
        let m = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(Bands { time: grid, mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's t-test for a difference in means.
///
/// When both samples have zero variance the statistic is undefined; equal
/// means then give `t = 0, p = 1`, different means give `t = ±inf, p = 0`,
/// and `df` falls back to `n_a + n_b - 2`.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Statistics(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Statistics("samples must be finite".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTestResult {
                t_statistic: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
            }
        } else {
            TTestResult {
                t_statistic: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                degrees_of_freedom: df,
                p_value: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: two_sided_p(t, df),
    })
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// CDF of Student's t distribution with `df > 0` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    let tail = 0.5 * two_sided_p(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x) Γ(1 - x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` via the continued fraction, using the symmetry relation to
/// stay in its fast-converging region.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trace::{TraceRecord, TraceEvent};
    use approx::assert_abs_diff_eq;

    fn push(log: &mut TraceLog, time: f64, vehicle: usize, event: TraceEvent, detail: &str) {
        log.push(TraceRecord {
            time,
            vehicle,
            event,
            link: "x".into(),
            detail: detail.into(),
        });
    }

    #[test]
    fn single_vehicle_summary() {
        let mut log = TraceLog::new(600.0);
        push(&mut log, 0.0, 0, TraceEvent::Arrive, "");
        push(&mut log, 0.0, 0, TraceEvent::EnterLink, "");
        push(&mut log, 120.0, 0, TraceEvent::Park, "");
        let s = summarize(&log).unwrap();
        assert_eq!(s.mean_time_to_parking, 120.0);
        assert_eq!(s.mean_obstruction_time, 0.0);
        assert_eq!((s.parked_count, s.total_count, s.censored_count), (1, 1, 0));
        assert_eq!(s.parked_count_timeseries, vec![(0.0, 0), (120.0, 1)]);
    }

    #[test]
    fn obstruction_and_censoring() {
        let mut log = TraceLog::new(1000.0);
        push(&mut log, 10.0, 0, TraceEvent::Arrive, "");
        push(&mut log, 10.0, 0, TraceEvent::EnterLink, "");
        push(&mut log, 20.0, 0, TraceEvent::EnterLink, OBSTRUCTED);
        push(&mut log, 390.0, 0, TraceEvent::EnterLink, "");
        push(&mut log, 400.0, 0, TraceEvent::Park, "");
        push(&mut log, 50.0, 1, TraceEvent::Arrive, "");
        push(&mut log, 50.0, 1, TraceEvent::EnterLink, OBSTRUCTED);
        let per = per_vehicle(&log).unwrap();
        assert_eq!(per[0], (390.0, 370.0, true));
        assert_eq!(per[1], (950.0, 950.0, false));
        let s = summarize(&log).unwrap();
        assert_eq!(s.censored_count, 1);
        assert_eq!(s.mean_time_to_parking, 670.0);
    }

    #[test]
    fn empty_log_summary() {
        let s = summarize(&TraceLog::new(10.0)).unwrap();
        assert_eq!(s.total_count, 0);
        assert_eq!(s.mean_time_to_parking, 0.0);
    }

    fn summary(series: Vec<(f64, usize)>, duration: f64) -> RunSummary {
        RunSummary {
            mean_time_to_parking: 0.0,
            mean_obstruction_time: 0.0,
            parked_count: series.last().unwrap().1,
            total_count: 2,
            censored_count: 0,
            duration_s: duration,
            parked_count_timeseries: series,
        }
    }

    #[test]
    fn bands() {
        assert!(aggregate(&[]).is_err());
        let a = summary(vec![(0.0, 0), (5.0, 1), (10.0, 2)], 20.0);
        let b = summary(vec![(0.0, 0)], 20.0);
        let bands = aggregate(&[a.clone(), b]).unwrap();
        assert_eq!(bands.time, vec![0.0, 5.0, 10.0, 20.0]);
        assert_eq!(bands.mean, vec![0.0, 0.5, 1.0, 1.0]);
        assert_eq!(bands.std, vec![0.0, 0.5, 1.0, 1.0]);
        let same = aggregate(&[a.clone(), a.clone(), a]).unwrap();
        assert!(same.std.iter().all(|&s| s == 0.0));
        assert!(same.to_csv().starts_with("time,mean,std\n0.000,0.000000,0.000000\n"));
    }

    #[test]
    fn welch_fixture_and_degenerate_cases() {
        let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.t_statistic, -1.0);
        assert_eq!(r.degrees_of_freedom, 8.0);
        assert_abs_diff_eq!(r.p_value, 0.346_593_507_087_334_2, epsilon = 1e-9);

        let same = welch_ttest(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((same.t_statistic, same.p_value), (0.0, 1.0));

        let flat = welch_ttest(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((flat.t_statistic, flat.p_value, flat.degrees_of_freedom), (0.0, 1.0, 3.0));
        let apart = welch_ttest(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!((apart.t_statistic, apart.p_value), (f64::NEG_INFINITY, 0.0));

        assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_ttest(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn special_functions() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(10.0), 362_880f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(regularized_incomplete_beta(0.3, 1.0, 1.0), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(student_t_cdf(0.0, 3.0), 0.5, epsilon = 1e-15);
        // df = 1 is the Cauchy distribution
        assert_abs_diff_eq!(student_t_cdf(1.0, 1.0), 0.75, epsilon = 1e-12);
        assert!(student_t_cdf(1.0, 0.0).is_nan());
    }
}
