//! Piecewise-constant change schedules.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A stationary period covering steps `start..=end` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: usize,
    pub end: usize,
    pub param: usize,
}

impl Period {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

/// Maps each step `t ∈ [1, T]` to the id of the active reward parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSchedule {
    horizon: usize,
    periods: Vec<Period>,
    parameters: BTreeMap<usize, Vec<f64>>,
}

impl ChangeSchedule {
    /// Validates that `periods` partition `[1, horizon]` in order.
    pub fn new(horizon: usize, periods: Vec<Period>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("schedule horizon must be positive"));
        }
        let mut next = 1;
        for p in &periods {
            if p.start != next || p.end < p.start {
                return Err(Error::invalid(format!(
                    "period {}..={} does not continue the partition at step {next}",
                    p.start, p.end
                )));
            }
            next = p.end + 1;
        }
        if next != horizon + 1 {
            return Err(Error::invalid(format!(
                "periods cover 1..={} but the horizon is {horizon}",
                next - 1
            )));
        }
        Ok(Self {
            horizon,
            periods,
            parameters: BTreeMap::new(),
        })
    }

    /// Equal-length periods following `sequence`; the last period absorbs
    /// the remainder.
    pub fn from_sequence(horizon: usize, sequence: &[usize]) -> Result<Self> {
        if sequence.is_empty() || horizon < sequence.len() {
            return Err(Error::invalid("sequence must be non-empty and fit the horizon"));
        }
        let len = horizon / sequence.len();
        let periods = sequence
            .iter()
            .enumerate()
            .map(|(i, &param)| Period {
                start: i * len + 1,
                end: if i + 1 == sequence.len() { horizon } else { (i + 1) * len },
                param,
            })
            .collect();
        Self::new(horizon, periods)
    }

    /// Attaches a parameter table. Every period's id must be present.
    pub fn with_parameters(mut self, parameters: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        for p in &self.periods {
            if !parameters.contains_key(&p.param) {
                return Err(Error::invalid(format!("parameter {} is missing", p.param)));
            }
        }
        self.parameters = parameters;
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn parameters(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.parameters
    }

    /// Distinct parameter ids in first-appearance order.
    pub fn param_ids(&self) -> Vec<usize> {
        let mut ids = Vec::new();
        for p in &self.periods {
            if !ids.contains(&p.param) {
                ids.push(p.param);
            }
        }
        ids
    }

    pub fn period_index_at(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.horizon {
            return Err(Error::invalid(format!(
                "step {t} outside horizon 1..={}",
                self.horizon
            )));
        }
        Ok(self.periods.partition_point(|p| p.end < t))
    }

    pub fn param_at(&self, t: usize) -> Result<usize> {
        Ok(self.periods[self.period_index_at(t)?].param)
    }

    pub fn theta_at(&self, t: usize) -> Result<&[f64]> {
        let id = self.param_at(t)?;
        self.parameters
            .get(&id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("no parameter vector for id {id}")))
    }

    /// First step of every period after the first. Adjacent periods with
    /// the same id are not a change of parameter but still count here.
    pub fn change_points(&self) -> Vec<usize> {
        self.periods.iter().skip(1).map(|p| p.start).collect()
    }

    /// The schedule restricted to `1..=horizon`.
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > self.horizon {
            return Err(Error::invalid(format!(
                "cannot truncate a {}-step schedule to {horizon}",
                self.horizon
            )));
        }
        let periods = self
            .periods
            .iter()
            .filter(|p| p.start <= horizon)
            .map(|p| Period {
                end: p.end.min(horizon),
                ..*p
            })
            .collect();
        let mut out = Self::new(horizon, periods)?;
        out.parameters = self.parameters.clone();
        Ok(out)
    }

    pub fn to_file(&self, pattern: Option<&str>) -> ScheduleFile {
        ScheduleFile {
            version: ScheduleFile::VERSION,
            pattern: pattern.map(str::to_string),
            horizon: self.horizon,
            periods: self.periods.clone(),
            parameters: self
                .parameters
                .iter()
                .map(|(&id, theta)| ParameterEntry {
                    id,
                    theta: theta.clone(),
                })
                .collect(),
        }
    }
}

/// On-disk schedule layout (TOML).
///
/// ```toml
/// version = 1
/// pattern = "extreme"
/// horizon = 1200
///
/// [[periods]]
/// start = 1
/// end = 600
/// param = 0
///
/// [[parameters]]
/// id = 0
/// theta = [1.0, 0.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub horizon: usize,
    pub periods: Vec<Period>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParameterEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub id: usize,
    pub theta: Vec<f64>,
}

impl ScheduleFile {
    pub const VERSION: u32 = 1;

    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| format!("byte {}", s.start))
                .unwrap_or_else(|| "schedule".into());
            Error::format(location, e.message().to_string())
        })?;
        if file.version != Self::VERSION {
            return Err(Error::format(
                "version",
                format!("unsupported schedule version {}", file.version),
            ));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { location, message } => Error::Format {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedule serializes")
    }

    pub fn into_schedule(self) -> Result<ChangeSchedule> {
        let schedule = ChangeSchedule::new(self.horizon, self.periods)?;
        if self.parameters.is_empty() {
            return Ok(schedule);
        }
        let mut table = BTreeMap::new();
        for entry in self.parameters {
            if table.insert(entry.id, entry.theta).is_some() {
                return Err(Error::invalid(format!("parameter {} listed twice", entry.id)));
            }
        }
        schedule.with_parameters(table)
    }
}

/// Change-point pattern classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// Few long equal-length periods cycling through the parameters.
    Regular,
    /// Long baseline periods interrupted by short events.
    Realistic,
    /// Every period at the minimum length.
    Extreme,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Regular, Pattern::Realistic, Pattern::Extreme];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Regular => "regular",
            Pattern::Realistic => "realistic",
            Pattern::Extreme => "extreme",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown pattern '{s}'")))
    }
}

/// Generates a schedule of `pattern` over parameter ids `0..n_params`.
/// Every period is at least `min_segment` steps long and consecutive
/// periods always use different ids.
pub fn make_schedule<R: Rng + ?Sized>(
    pattern: Pattern,
    horizon: usize,
    n_params: usize,
    min_segment: usize,
    rng: &mut R,
) -> Result<ChangeSchedule> {
    if n_params < 2 {
        return Err(Error::invalid("a seasonal schedule needs at least two parameters"));
    }
    if min_segment == 0 {
        return Err(Error::invalid("minimum segment length must be positive"));
    }
    let infeasible = |need: usize| {
        Error::invalid(format!(
            "{pattern} pattern needs a horizon of at least {need}, got {horizon}"
        ))
    };
    let lengths_and_ids: Vec<(usize, usize)> = match pattern {
        Pattern::Regular => {
            let n = 2 * n_params;
            if horizon < n * min_segment {
                return Err(infeasible(n * min_segment));
            }
            let len = horizon / n;
            (0..n)
                .map(|i| {
                    let l = if i + 1 == n { horizon - len * (n - 1) } else { len };
                    (l, i % n_params)
                })
                .collect()
        }
        Pattern::Extreme => {
            let n = horizon / min_segment;
            if n < 2 {
                return Err(infeasible(2 * min_segment));
            }
            let mut out = Vec::with_capacity(n);
            let mut prev = 0;
            for i in 0..n {
                let id = if i == 0 {
                    0
                } else {
                    let k = rng.random_range(0..n_params - 1);
                    if k >= prev {
                        k + 1
                    } else {
                        k
                    }
                };
                let l = if i + 1 == n {
                    horizon - min_segment * (n - 1)
                } else {
                    min_segment
                };
                out.push((l, id));
                prev = id;
            }
            out
        }
        Pattern::Realistic => {
            if horizon < 4 * min_segment {
                return Err(infeasible(4 * min_segment));
            }
            let mut out: Vec<(usize, usize)> = Vec::new();
            let mut used = 0;
            let mut baseline = true;
            while used < horizon {
                let remaining = horizon - used;
                let draw = if baseline {
                    rng.random_range(3 * min_segment..=8 * min_segment)
                } else {
                    rng.random_range(min_segment..=2 * min_segment)
                };
                let id = if baseline {
                    0
                } else {
                    rng.random_range(1..n_params)
                };
                let mut l = draw.min(remaining);
                if out.is_empty() {
                    // Leave room for at least one event.
                    l = l.min(remaining - min_segment);
                }
                if remaining - l < min_segment {
                    l = remaining;
                }
                out.push((l, id));
                used += l;
                baseline = !baseline;
            }
            out
        }
    };
    let mut periods = Vec::with_capacity(lengths_and_ids.len());
    let mut start = 1;
    for (len, param) in lengths_and_ids {
        periods.push(Period {
            start,
            end: start + len - 1,
            param,
        });
        start += len;
    }
    ChangeSchedule::new(horizon, periods)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regular_has_few_long_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = make_schedule(Pattern::Regular, 30_000, 4, 600, &mut rng).unwrap();
        assert!(s.change_points().len() <= 10);
        assert!(s.periods().iter().all(|p| p.len() >= 3000));
    }

    #[test]
    fn extreme_segments_have_the_minimum_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = make_schedule(Pattern::Extreme, 30_000, 4, 600, &mut rng).unwrap();
        assert_eq!(s.periods().len(), 50);
        assert!(s.periods().iter().all(|p| p.len() == 600));
    }

    #[test]
    fn realistic_mixes_short_and_long() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = make_schedule(Pattern::Realistic, 30_000, 4, 600, &mut rng).unwrap();
        let lens: Vec<usize> = s.periods().iter().map(Period::len).collect();
        assert!(lens.iter().all(|&l| l >= 600));
        assert!(lens.iter().any(|&l| l <= 1200));
        assert!(lens.iter().any(|&l| l >= 1800));
    }

    #[test]
    fn infeasible_horizon_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for p in Pattern::ALL {
            assert!(matches!(
                make_schedule(p, 1000, 4, 600, &mut rng),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn lookup_follows_periods() {
        let s = ChangeSchedule::from_sequence(9, &[0, 2, 1]).unwrap();
        assert_eq!(s.param_at(1).unwrap(), 0);
        assert_eq!(s.param_at(3).unwrap(), 0);
        assert_eq!(s.param_at(4).unwrap(), 2);
        assert_eq!(s.param_at(9).unwrap(), 1);
        assert!(s.param_at(0).is_err());
        assert!(s.param_at(10).is_err());
        assert_eq!(s.change_points(), vec![4, 7]);
    }

    #[test]
    fn gaps_and_overlaps_are_rejected() {
        let p = |start, end| Period { start, end, param: 0 };
        assert!(ChangeSchedule::new(10, vec![p(1, 4), p(6, 10)]).is_err());
        assert!(ChangeSchedule::new(10, vec![p(1, 5), p(5, 10)]).is_err());
        assert!(ChangeSchedule::new(10, vec![p(1, 5)]).is_err());
    }

    #[test]
    fn missing_parameter_is_rejected() {
        let s = ChangeSchedule::from_sequence(4, &[0, 1]).unwrap();
        let table = BTreeMap::from([(0, vec![1.0])]);
        assert!(s.with_parameters(table).is_err());
    }

    #[test]
    fn file_round_trip() {
        let s = ChangeSchedule::from_sequence(10, &[0, 1])
            .unwrap()
            .with_parameters(BTreeMap::from([(0, vec![1.0, 0.0]), (1, vec![0.0, -0.5])]))
            .unwrap();
        let text = s.to_file(Some("custom")).to_toml();
        let back = ScheduleFile::parse(&text).unwrap().into_schedule().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_version_is_a_format_error() {
        let text = "version = 9\nhorizon = 2\n[[periods]]\nstart = 1\nend = 2\nparam = 0\n";
        assert!(matches!(ScheduleFile::parse(text), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn generated_schedules_partition_and_recur(
            seed in any::<u64>(),
            pattern in prop::sample::select(Pattern::ALL.to_vec()),
            n_params in 2usize..6,
            horizon in 6000usize..40_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let min = 300;
            let s = match make_schedule(pattern, horizon, n_params, min, &mut rng) {
                Ok(s) => s,
                Err(_) => return Ok(()),
            };
            prop_assert_eq!(s.periods().first().unwrap().start, 1);
            prop_assert_eq!(s.periods().last().unwrap().end, horizon);
            for w in s.periods().windows(2) {
                prop_assert_eq!(w[0].end + 1, w[1].start);
                prop_assert_ne!(w[0].param, w[1].param);
            }
            prop_assert!(s.periods().iter().all(|p| p.len() >= min));
            if s.periods().len() > n_params {
                let distinct = s.param_ids().len();
                prop_assert!(distinct < s.periods().len());
            }
        }
    }
}
