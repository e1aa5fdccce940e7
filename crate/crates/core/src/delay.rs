//! Delay schedules and the feedback-arrival buffer.
//!
//! Episodes are numbered from 1. The feedback of episode `j` becomes visible
//! at the end of episode `j + d^j`; anything that would arrive after the last
//! episode is delivered by the final flush.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Per-episode delays `d^1, …, d^K`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySchedule {
    delays: Vec<usize>,
}

impl DelaySchedule {
    pub fn new(delays: Vec<usize>) -> Self {
        Self { delays }
    }

    pub fn zeros(episodes: usize) -> Self {
        Self { delays: vec![0; episodes] }
    }

    pub fn episodes(&self) -> usize {
        self.delays.len()
    }

    /// Delay of 1-based episode `k`.
    pub fn delay(&self, k: usize) -> usize {
        self.delays[k - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.delays
    }

    /// `D = Σ_k d^k`.
    pub fn total(&self) -> u64 {
        self.delays.iter().map(|&d| d as u64).sum()
    }

    /// `d_max`.
    pub fn max(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    /// Arrival episode of `k`, capped at the last episode.
    pub fn arrival(&self, k: usize) -> usize {
        (k + self.delay(k)).min(self.episodes())
    }

    /// `m^k` for every episode, after capping arrivals at `K`.
    pub fn arrival_counts(&self) -> Vec<usize> {
        let mut m = vec![0; self.episodes()];
        for k in 1..=self.episodes() {
            m[self.arrival(k) - 1] += 1;
        }
        m
    }

    /// Read the one-integer-per-line format; exactly `episodes` lines.
    pub fn from_file(path: &Path, episodes: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, episodes)
    }

    pub fn parse(text: &str, episodes: usize) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let lines: &[&str] = match lines.last() {
            Some(last) if last.trim().is_empty() => &lines[..lines.len() - 1],
            _ => &lines,
        };
        if lines.len() != episodes {
            return Err(Error::Config(format!(
                "delay file has {} lines, expected {episodes}",
                lines.len()
            )));
        }
        let delays = lines
            .iter()
            .enumerate()
            .map(|(i, line)| {
                line.trim().parse::<usize>().map_err(|_| {
                    Error::Config(format!("line {}: {line:?} is not a non-negative integer", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { delays })
    }
}

/// Ways to generate a delay schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayKind {
    Constant { delay: i64 },
    /// Uniform integers in `[lo, hi]`.
    Uniform { lo: i64, hi: i64 },
    /// Every `period`-th episode (1, 1 + period, …) has delay `height`; the rest 0.
    Spike { period: i64, height: i64 },
    FromFile { path: String },
}

fn non_negative(value: i64, name: &str) -> Result<usize> {
    usize::try_from(value).map_err(|_| Error::Config(format!("{name} must be non-negative, got {value}")))
}

pub fn make_schedule(kind: &DelayKind, episodes: usize, rng: &mut SimRng) -> Result<DelaySchedule> {
    let delays = match kind {
        DelayKind::Constant { delay } => vec![non_negative(*delay, "delay")?; episodes],
        DelayKind::Uniform { lo, hi } => {
            let lo = non_negative(*lo, "lo")?;
            let hi = non_negative(*hi, "hi")?;
            if lo > hi {
                return Err(Error::Config(format!("uniform delays need lo <= hi ({lo} > {hi})")));
            }
            (0..episodes).map(|_| rng.random_range(lo..=hi)).collect()
        }
        DelayKind::Spike { period, height } => {
            let period = non_negative(*period, "period")?;
            let height = non_negative(*height, "height")?;
            if period == 0 {
                return Err(Error::Config("spike period must be positive".into()));
            }
            (0..episodes).map(|i| if i % period == 0 { height } else { 0 }).collect()
        }
        DelayKind::FromFile { path } => return DelaySchedule::from_file(Path::new(path), episodes),
    };
    Ok(DelaySchedule { delays })
}

/// Pending feedback keyed by arrival episode.
#[derive(Debug)]
pub struct FeedbackBuffer<T> {
    pending: BTreeMap<usize, Vec<(usize, T)>>,
    drained: BTreeSet<usize>,
    last_drained: usize,
    pushed: usize,
    delivered: usize,
}

impl<T> Default for FeedbackBuffer<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> FeedbackBuffer<T> {
    pub fn new() -> Self {
        Self {
            pending: BTreeMap::new(),
            drained: BTreeSet::new(),
            last_drained: 0,
            pushed: 0,
            delivered: 0,
        }
    }

    /// Queue the feedback of episode `j` for the end of episode `j + delay`.
    pub fn push(&mut self, j: usize, delay: usize, payload: T) -> Result<()> {
        let arrival = j + delay;
        if self.drained.contains(&arrival) || arrival <= self.last_drained {
            return Err(Error::Structural(format!(
                "episode {j} would arrive at {arrival}, which is already drained"
            )));
        }
        self.pending.entry(arrival).or_default().push((j, payload));
        self.pushed += 1;
        Ok(())
    }

    /// Everything with `j + d^j = k`, in ascending source order.
    pub fn drain_at(&mut self, k: usize) -> Result<Vec<(usize, T)>> {
        if !self.drained.insert(k) {
            return Err(Error::Structural(format!("episode {k} drained twice")));
        }
        self.last_drained = self.last_drained.max(k);
        let mut out = self.pending.remove(&k).unwrap_or_default();
        out.sort_by_key(|(j, _)| *j);
        self.delivered += out.len();
        Ok(out)
    }

    /// Deliver all remaining feedback (arrivals beyond the horizon).
    pub fn flush(&mut self) -> Vec<(usize, T)> {
        let mut out: Vec<(usize, T)> =
            std::mem::take(&mut self.pending).into_values().flatten().collect();
        out.sort_by_key(|(j, _)| *j);
        self.delivered += out.len();
        out
    }

    /// Drain `k`, and if it is the last episode also flush the remainder.
    pub fn drain_episode(&mut self, k: usize, last: usize) -> Result<Vec<(usize, T)>> {
        let mut out = self.drain_at(k)?;
        if k == last {
            out.extend(self.flush());
            out.sort_by_key(|(j, _)| *j);
        }
        Ok(out)
    }

    pub fn pushed(&self) -> usize {
        self.pushed
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }

    pub fn in_flight(&self) -> usize {
        self.pushed - self.delivered
    }
}

/// `Σ_{k,i} 1{k ≤ i + d^i < k + d^k}`.
pub fn delayed_indicator_sum(schedule: &DelaySchedule) -> u64 {
    let mut arrivals: Vec<usize> =
        (1..=schedule.episodes()).map(|i| i + schedule.delay(i)).collect();
    arrivals.sort_unstable();
    (1..=schedule.episodes())
        .map(|k| {
            let lo = arrivals.partition_point(|&t| t < k);
            let hi = arrivals.partition_point(|&t| t < k + schedule.delay(k));
            (hi - lo) as u64
        })
        .sum()
}

/// `mask[k] = d^k > beta`; masked episodes are played but their feedback is discarded.
pub fn skip_filter(schedule: &DelaySchedule, beta: f64) -> Vec<bool> {
    schedule.as_slice().iter().map(|&d| d as f64 > beta).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn constant_schedules() {
        let mut rng = stream(0, 0);
        let zero = make_schedule(&DelayKind::Constant { delay: 0 }, 5, &mut rng).unwrap();
        assert_eq!(zero.as_slice(), &[0, 0, 0, 0, 0]);
        let seven = make_schedule(&DelayKind::Constant { delay: 7 }, 3, &mut rng).unwrap();
        assert_eq!(seven.total(), 21);
        assert_eq!(seven.max(), 7);
    }

    #[test]
    fn negative_parameters_are_rejected() {
        let mut rng = stream(0, 0);
        assert!(matches!(
            make_schedule(&DelayKind::Constant { delay: -1 }, 3, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(make_schedule(&DelayKind::Uniform { lo: -2, hi: 3 }, 3, &mut rng).is_err());
        assert!(make_schedule(&DelayKind::Spike { period: 0, height: 3 }, 3, &mut rng).is_err());
    }

    #[test]
    fn uniform_is_deterministic_per_seed() {
        let kind = DelayKind::Uniform { lo: 0, hi: 10 };
        let a = make_schedule(&kind, 10_000, &mut stream(3, 2)).unwrap();
        let b = make_schedule(&kind, 10_000, &mut stream(3, 2)).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|&d| d <= 10));
    }

    #[test]
    fn spike_schedule_shape() {
        let s = make_schedule(&DelayKind::Spike { period: 3, height: 4 }, 7, &mut stream(0, 0)).unwrap();
        assert_eq!(s.as_slice(), &[4, 0, 0, 4, 0, 0, 4]);
    }

    #[test]
    fn file_format() {
        assert_eq!(DelaySchedule::parse("1\n0\n3\n", 3).unwrap().as_slice(), &[1, 0, 3]);
        assert!(DelaySchedule::parse("1\n0\n", 3).is_err());
        assert!(DelaySchedule::parse("1\n-1\n3", 3).is_err());
    }

    #[test]
    fn zero_delay_drains_self() {
        let mut buf = FeedbackBuffer::new();
        for k in 1..=4 {
            buf.push(k, 0, k).unwrap();
            let got: Vec<usize> = buf.drain_at(k).unwrap().into_iter().map(|(j, _)| j).collect();
            assert_eq!(got, vec![k]);
        }
    }

    #[test]
    fn drain_collects_all_sources() {
        let mut buf = FeedbackBuffer::new();
        let d = [2, 1, 0];
        let mut seen = Vec::new();
        for k in 1..=3 {
            buf.push(k, d[k - 1], ()).unwrap();
            seen.push(buf.drain_at(k).unwrap().into_iter().map(|(j, _)| j).collect::<Vec<_>>());
        }
        assert_eq!(seen, vec![vec![], vec![], vec![1, 2, 3]]);
    }

    #[test]
    fn double_drain_is_an_error() {
        let mut buf: FeedbackBuffer<()> = FeedbackBuffer::new();
        buf.drain_at(1).unwrap();
        assert!(matches!(buf.drain_at(1), Err(Error::Structural(_))));
    }

    #[test]
    fn pushing_into_the_past_is_rejected() {
        let mut buf = FeedbackBuffer::new();
        buf.drain_at(2).unwrap();
        assert!(buf.push(1, 1, ()).is_err());
    }

    #[test]
    fn final_flush_delivers_late_feedback() {
        let mut buf = FeedbackBuffer::new();
        buf.push(1, 10, 'a').unwrap();
        buf.push(2, 0, 'b').unwrap();
        assert_eq!(buf.drain_episode(2, 2).unwrap(), vec![(1, 'a'), (2, 'b')]);
        assert_eq!(buf.in_flight(), 0);
    }

    #[test]
    fn skip_filter_edges() {
        let s = DelaySchedule::new(vec![3, 1, 4, 1, 5]);
        assert!(skip_filter(&s, s.max() as f64).iter().all(|m| !m));
        let c = DelaySchedule::new(vec![10; 6]);
        assert!(skip_filter(&c, 5.0).iter().all(|m| *m));
    }

    #[test]
    fn indicator_sum_constant_delay() {
        // i + c ∈ [k, k + c) means i ∈ [k - c, k - 1], so episode k counts min(c, k - 1)
        let s = DelaySchedule::new(vec![4; 50]);
        let direct: u64 = (1..=50)
            .map(|k| (1..=50).filter(|&i| k <= i + 4 && i + 4 < k + 4).count() as u64)
            .sum();
        assert_eq!(delayed_indicator_sum(&s), direct);
        assert_eq!(direct, (1..=50u64).map(|k| k.saturating_sub(1).min(4)).sum::<u64>());
        assert!(direct <= 4 * 50 + 50);
        assert_eq!(delayed_indicator_sum(&DelaySchedule::zeros(9)), 0);
    }
}
