use serde::Serialize;

/// One metric value of one trial of one variant at one setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub setting: String,
    pub variant: String,
    pub trial: usize,
    pub metric: String,
    pub value: f64,
}

/// A trial whose fit (or evaluation) failed; the rest of the report stands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub setting: String,
    pub variant: String,
    pub trial: usize,
    pub message: String,
}

/// Quartiles of one metric over the trials of a `(setting, variant)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub setting: String,
    pub variant: String,
    pub metric: String,
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Echo of the configuration that produced the report.
    pub config: serde_json::Value,
    pub trials: usize,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summaries: Vec<MetricSummary>,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ExperimentReport {
    pub(crate) fn new(
        name: &str,
        config: serde_json::Value,
        trials: usize,
        records: Vec<TrialRecord>,
        failures: Vec<TrialFailure>,
    ) -> Self {
        let mut report = ExperimentReport {
            name: name.to_string(),
            config,
            trials,
            records,
            failures,
            summaries: Vec::new(),
        };
        report.summaries = report.summarize();
        report
    }

    /// Recomputes the summaries from the records, in first-appearance order.
    pub fn summarize(&self) -> Vec<MetricSummary> {
        let mut keys: Vec<(&str, &str, &str)> = Vec::new();
        for r in &self.records {
            let key = (r.setting.as_str(), r.variant.as_str(), r.metric.as_str());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(s, v, m)| {
                let mut vals = self.values(s, v, m);
                vals.sort_by(f64::total_cmp);
                MetricSummary {
                    setting: s.to_string(),
                    variant: v.to_string(),
                    metric: m.to_string(),
                    count: vals.len(),
                    q1: quantile(&vals, 0.25),
                    median: quantile(&vals, 0.5),
                    q3: quantile(&vals, 0.75),
                }
            })
            .collect()
    }

    /// Values of a metric in trial order.
    pub fn values(&self, setting: &str, variant: &str, metric: &str) -> Vec<f64> {
        let mut v: Vec<(usize, f64)> = self
            .records
            .iter()
            .filter(|r| r.setting == setting && r.variant == variant && r.metric == metric)
            .map(|r| (r.trial, r.value))
            .collect();
        v.sort_by_key(|&(t, _)| t);
        v.into_iter().map(|(_, x)| x).collect()
    }

    pub fn summary(&self, setting: &str, variant: &str, metric: &str) -> Option<&MetricSummary> {
        self.summaries
            .iter()
            .find(|s| s.setting == setting && s.variant == variant && s.metric == metric)
    }

    pub fn median(&self, setting: &str, variant: &str, metric: &str) -> Option<f64> {
        self.summary(setting, variant, metric).map(|s| s.median)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(trial: usize, value: f64) -> TrialRecord {
        TrialRecord {
            setting: "N=50".into(),
            variant: "untagged".into(),
            trial,
            metric: "e_w".into(),
            value,
        }
    }

    #[test]
    fn quartiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
    }

    #[test]
    fn summaries_recomputable_from_records() {
        let r = ExperimentReport::new(
            "t",
            serde_json::Value::Null,
            3,
            vec![rec(2, 3.0), rec(0, 1.0), rec(1, 10.0)],
            vec![],
        );
        assert_eq!(r.values("N=50", "untagged", "e_w"), vec![1.0, 10.0, 3.0]);
        assert_eq!(r.median("N=50", "untagged", "e_w"), Some(3.0));
        assert_eq!(r.summarize(), r.summaries);
        assert_eq!(r.median("N=50", "tagged", "e_w"), None);
    }
}
