use serde::{Deserialize, Serialize};

use crate::strategies::StrategyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    TokenF1,
    #[serde(rename = "pass@1")]
    PassAt1,
    SolveRate,
    Accuracy,
}

impl MetricName {
    pub fn label(self) -> &'static str {
        match self {
            MetricName::TokenF1 => "F1 Score",
            MetricName::PassAt1 => "pass@1",
            MetricName::SolveRate => "Solve Rate(%)",
            MetricName::Accuracy => "Accuracy(%)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub score: f64,
}

/// Mean and sample standard deviation of the aggregate over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub runs: usize,
    pub mean: f64,
    pub spread: f64,
    pub aggregates: Vec<f64>,
}

impl RepeatStats {
    pub fn from_aggregates(aggregates: Vec<f64>) -> Self {
        let runs = aggregates.len();
        let mean = if runs == 0 { 0.0 } else { aggregates.iter().sum::<f64>() / runs as f64 };
        let spread = if runs < 2 {
            0.0
        } else {
            (aggregates.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
        };
        Self {
            runs,
            mean,
            spread,
            aggregates,
        }
    }
}

/// Scores for one (dataset, strategy, model) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub strategy: StrategyKind,
    pub strategy_label: String,
    pub model_id: String,
    pub metric: MetricName,
    /// Ordered by task id.
    pub per_task: Vec<TaskScore>,
    pub aggregate: f64,
    pub n: usize,
    pub avg_prompt_tokens: f64,
    pub avg_completion_tokens: f64,
    /// "provider", "approx", or "mixed".
    pub token_unit: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<RepeatStats>,
}

impl MetricReport {
    /// Builds a report, sorting `per_task` by id and deriving `aggregate` and `n`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset: impl Into<String>,
        strategy: StrategyKind,
        model_id: impl Into<String>,
        metric: MetricName,
        mut per_task: Vec<TaskScore>,
        total_prompt_tokens: u64,
        total_completion_tokens: u64,
        token_unit: impl Into<String>,
    ) -> Self {
        per_task.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let n = per_task.len();
        let denom = n.max(1) as f64;
        let aggregate = per_task.iter().map(|t| t.score).sum::<f64>() / denom;
        Self {
            dataset: dataset.into(),
            strategy_label: strategy.label(),
            strategy,
            model_id: model_id.into(),
            metric,
            per_task,
            aggregate,
            n,
            avg_prompt_tokens: total_prompt_tokens as f64 / denom,
            avg_completion_tokens: total_completion_tokens as f64 / denom,
            token_unit: token_unit.into(),
            notes: Vec::new(),
            repeats: None,
        }
    }

    pub fn mean_total_tokens(&self) -> f64 {
        self.avg_prompt_tokens + self.avg_completion_tokens
    }

    /// Mean across repeats when present, else this run's aggregate.
    pub fn headline(&self) -> f64 {
        self.repeats.as_ref().map_or(self.aggregate, |r| r.mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn aggregate_is_mean(scores in proptest::collection::vec(0.0f64..=1.0, 1..50)) {
            let per_task = scores
                .iter()
                .enumerate()
                .map(|(i, s)| TaskScore { task_id: format!("t{i:03}"), score: *s })
                .collect();
            let r = MetricReport::new("d", StrategyKind::Io, "m", MetricName::TokenF1, per_task, 10, 5, "approx");
            let mean = r.per_task.iter().map(|t| t.score).sum::<f64>() / r.per_task.len() as f64;
            prop_assert!((r.aggregate - mean).abs() <= 1e-12);
            prop_assert_eq!(r.n, scores.len());
        }
    }

    #[test]
    fn repeat_stats() {
        let s = RepeatStats::from_aggregates(vec![0.5, 0.7]);
        assert!((s.mean - 0.6).abs() < 1e-12);
        assert!((s.spread - (0.02f64).sqrt()).abs() < 1e-12);
    }
}
