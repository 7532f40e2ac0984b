//! Moving average of rewards, convergence time and cross-run curves.

use serde::{Deserialize, Serialize};

use crate::language::Reward;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("iteration {n} out of range for a series of length {len}")]
    IndexOutOfRange { n: usize, len: usize },
    #[error("window must be at least 1")]
    ZeroWindow,
    #[error("no series to aggregate")]
    EmptyInput,
    #[error("reward must be +1 or -1, got {0}")]
    InvalidReward(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardSeries(Vec<Reward>);

impl RewardSeries {
    pub fn new(rewards: Vec<Reward>) -> Self {
        Self(rewards)
    }

    pub fn from_values(values: &[i64]) -> Result<Self, MetricsError> {
        values
            .iter()
            .map(|&v| Reward::try_from(v).map_err(|_| MetricsError::InvalidReward(v)))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    pub fn rewards(&self) -> &[Reward] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, r: Reward) {
        self.0.push(r);
    }
}

impl FromIterator<Reward> for RewardSeries {
    fn from_iter<I: IntoIterator<Item = Reward>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// MAR at 1-based iteration `n` with window `m`: the mean of all rewards so
/// far while `n < m`, otherwise the mean of the last `m`.
pub fn moving_average_reward(series: &RewardSeries, m: usize, n: usize) -> Result<f64, MetricsError> {
    if m == 0 {
        return Err(MetricsError::ZeroWindow);
    }
    if n == 0 || n > series.len() {
        return Err(MetricsError::IndexOutOfRange { n, len: series.len() });
    }
    let width = if n < m { n } else { m };
    let sum: i64 = series.0[n - width..n].iter().map(|r| r.value()).sum();
    Ok(sum as f64 / width as f64)
}

/// MAR at every iteration `1..=len`.
pub fn mar_curve(series: &RewardSeries, m: usize) -> Result<Vec<f64>, MetricsError> {
    (1..=series.len()).map(|n| moving_average_reward(series, m, n)).collect()
}

/// First iteration whose MAR reaches `mar_threshold`.
pub fn convergence_time(series: &RewardSeries, m: usize, mar_threshold: f64) -> Result<Option<usize>, MetricsError> {
    for n in 1..=series.len() {
        if moving_average_reward(series, m, n)? >= mar_threshold {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Mean and population standard deviation of MAR at one iteration, over the
/// runs that lasted at least that long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveAggregate {
    pub iteration: usize,
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

pub fn aggregate_runs(series_list: &[RewardSeries], m: usize) -> Result<Vec<CurveAggregate>, MetricsError> {
    if series_list.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let curves = series_list
        .iter()
        .map(|s| mar_curve(s, m))
        .collect::<Result<Vec<_>, _>>()?;
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(longest);
    for i in 0..longest {
        let values: Vec<f64> = curves.iter().filter_map(|c| c.get(i).copied()).collect();
        let (mean, sd) = mean_and_population_sd(&values);
        out.push(CurveAggregate {
            iteration: i + 1,
            mean,
            sd,
            count: values.len(),
        });
    }
    Ok(out)
}

pub fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
