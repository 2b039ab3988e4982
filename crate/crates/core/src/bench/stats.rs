use serde::Serialize;
use thiserror::Error;

/// Two-tailed critical values of Student's t for 4 degrees of freedom.
pub const T_CRIT_95_DF4: f64 = 2.776;
pub const T_CRIT_99_DF4: f64 = 4.604;
pub const SAMPLE_RUNS: usize = 3;
pub const WORKING_DAYS_PER_MONTH: f64 = 22.0;
pub const WORKING_DAYS_PER_YEAR: f64 = 264.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("expected exactly {SAMPLE_RUNS} timings, got {0}")]
    SampleSize(usize),
    #[error("timing {0} ms is not a positive finite number")]
    BadTiming(f64),
    #[error("sample sizes must be at least 2 (got {0} and {1})")]
    TooFewSamples(usize, usize),
    #[error("standard deviations must be non-negative")]
    NegativeStd,
    #[error("critical values are only tabulated for 4 degrees of freedom, not {0}")]
    UnsupportedDf(usize),
}

/// Three wall-clock durations of one measured operation, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingSample {
    millis: [f64; SAMPLE_RUNS],
}

impl TimingSample {
    pub fn new(millis: &[f64]) -> Result<Self, StatsError> {
        let millis: [f64; SAMPLE_RUNS] = millis.try_into().map_err(|_| StatsError::SampleSize(millis.len()))?;
        if let Some(bad) = millis.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(StatsError::BadTiming(*bad));
        }
        Ok(Self { millis })
    }

    pub fn millis(&self) -> &[f64; SAMPLE_RUNS] {
        &self.millis
    }

    /// Run-wise sum of two samples, e.g. the two phases of one modality.
    pub fn plus(&self, other: &TimingSample) -> TimingSample {
        let mut millis = self.millis;
        for (m, o) in millis.iter_mut().zip(other.millis) {
            *m += o;
        }
        TimingSample { millis }
    }
}

/// Mean and sample standard deviation (divisor n - 1), in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub mean: f64,
    pub std: f64,
}

impl BenchRow {
    pub fn from_seconds(label: impl Into<String>, seconds: &[f64]) -> Result<Self, StatsError> {
        if seconds.len() != SAMPLE_RUNS {
            return Err(StatsError::SampleSize(seconds.len()));
        }
        let n = seconds.len() as f64;
        let mean = seconds.iter().sum::<f64>() / n;
        let var = seconds.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            label: label.into(),
            mean,
            std: var.sqrt(),
        })
    }
}

pub fn summarize(label: impl Into<String>, sample: &TimingSample) -> BenchRow {
    let seconds: Vec<f64> = sample.millis.iter().map(|m| m / 1000.0).collect();
    BenchRow::from_seconds(label, &seconds).expect("sample has three runs")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub crit95: f64,
    pub crit99: f64,
    pub significant95: bool,
    pub significant99: bool,
}

/// Pooled-variance two-sample t statistic for `mean2 - mean1`.
pub fn pooled_t(mean1: f64, std1: f64, n1: usize, mean2: f64, std2: f64, n2: usize) -> Result<TTestResult, StatsError> {
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::TooFewSamples(n1, n2));
    }
    if std1 < 0.0 || std2 < 0.0 {
        return Err(StatsError::NegativeStd);
    }
    let df = n1 + n2 - 2;
    if df != 4 {
        return Err(StatsError::UnsupportedDf(df));
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let sp2 = ((f1 - 1.0) * std1 * std1 + (f2 - 1.0) * std2 * std2) / df as f64;
    let diff = mean2 - mean1;
    let t = if sp2 == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    } else {
        diff / (sp2.sqrt() * (1.0 / f1 + 1.0 / f2).sqrt())
    };
    Ok(TTestResult {
        t,
        df,
        crit95: T_CRIT_95_DF4,
        crit99: T_CRIT_99_DF4,
        significant95: t.abs() > T_CRIT_95_DF4,
        significant99: t.abs() > T_CRIT_99_DF4,
    })
}

/// Time saved by the cube over the naive workflow. Positive means saved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeBenefit {
    pub per_day_minutes: f64,
    pub per_month_minutes: f64,
    pub per_year_hours: f64,
}

pub fn time_benefit(mean_cube_s: f64, mean_naive_s: f64) -> TimeBenefit {
    let per_day = (mean_naive_s - mean_cube_s) / 60.0;
    TimeBenefit {
        per_day_minutes: per_day,
        per_month_minutes: per_day * WORKING_DAYS_PER_MONTH,
        per_year_hours: per_day * WORKING_DAYS_PER_YEAR / 60.0,
    }
}
