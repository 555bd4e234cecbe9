//! Cash-flow series: ingestion, descriptive statistics, chronological
//! splitting, random subsequence sampling and synthetic generation.
//!
//! A series holds daily net cash flows in canonical money units. All types
//! are immutable after construction and every operation is a pure function
//! of its inputs (including the seed), so values can be shared freely
//! across threads.

use std::io::Read;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered sequence of daily net cash flows, optionally labelled with
/// ISO-8601 dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashFlowSeries {
    flows: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl CashFlowSeries {
    /// Builds an unlabelled series. Fails on empty input or non-finite flows.
    pub fn new(flows: Vec<f64>) -> Result<Self> {
        Self::validate_flows(&flows)?;
        Ok(Self {
            flows,
            labels: None,
        })
    }

    /// Builds a labelled series; labels must be ISO-8601 dates, one per flow,
    /// strictly increasing.
    pub fn with_labels(flows: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        Self::validate_flows(&flows)?;
        if labels.len() != flows.len() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                flows: flows.len(),
            });
        }
        let mut prev: Option<(NaiveDate, &str)> = None;
        for label in &labels {
            let date = NaiveDate::parse_from_str(label, "%Y-%m-%d").map_err(|_| {
                Error::LabelsNotIncreasing {
                    prev: label.clone(),
                    next: "not an ISO-8601 date".into(),
                }
            })?;
            if let Some((prev_date, prev_label)) = prev {
                if date <= prev_date {
                    return Err(Error::LabelsNotIncreasing {
                        prev: prev_label.to_string(),
                        next: label.clone(),
                    });
                }
            }
            prev = Some((date, label));
        }
        Ok(Self {
            flows,
            labels: Some(labels),
        })
    }

    fn validate_flows(flows: &[f64]) -> Result<()> {
        if flows.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (index, &value) in flows.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteFlow { index, value });
            }
        }
        Ok(())
    }

    /// Parses CSV text with a required `flow` or `date,flow` header.
    /// Blank lines are ignored; errors report the offending line number.
    pub fn parse_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);

        let headers = rdr
            .headers()
            .map_err(|e| Error::CsvParse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        let dated = match cols.as_slice() {
            ["flow"] => false,
            ["date", "flow"] => true,
            _ => {
                return Err(Error::CsvHeader {
                    found: cols.join(","),
                })
            }
        };

        let mut flows = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::CsvParse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            let flow_field = if dated { &record[1] } else { &record[0] };
            let flow: f64 = flow_field.trim().parse().map_err(|_| Error::CsvParse {
                line,
                message: format!("non-numeric flow {:?}", flow_field),
            })?;
            if dated {
                labels.push(record[0].trim().to_string());
            }
            flows.push(flow);
        }

        if dated {
            Self::with_labels(flows, labels)
        } else {
            Self::new(flows)
        }
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Mean and sample standard deviation (divisor N-1); needs length >= 2.
    pub fn stats(&self) -> Result<SeriesStats> {
        let count = self.flows.len();
        if count < 2 {
            return Err(Error::StdUndefined { len: count });
        }
        let mean = self.flows.iter().sum::<f64>() / count as f64;
        let ss = self
            .flows
            .iter()
            .map(|f| {
                let d = f - mean;
                d * d
            })
            .sum::<f64>();
        Ok(SeriesStats {
            mean,
            std: (ss / (count as f64 - 1.0)).sqrt(),
            count,
        })
    }

    /// Chronological split: train takes the first `floor(r * N)` flows and
    /// test the remainder. Both parts must be non-empty.
    pub fn split(&self, spec: SplitSpec) -> Result<(CashFlowSeries, CashFlowSeries)> {
        let n = self.flows.len();
        let train_len = (spec.ratio() * n as f64).floor() as usize;
        if train_len == 0 {
            return Err(Error::EmptySplitPart {
                ratio: spec.ratio(),
                len: n,
                part: "train",
            });
        }
        if train_len >= n {
            return Err(Error::EmptySplitPart {
                ratio: spec.ratio(),
                len: n,
                part: "test",
            });
        }
        let take = |range: std::ops::Range<usize>| -> CashFlowSeries {
            CashFlowSeries {
                flows: self.flows[range.clone()].to_vec(),
                labels: self.labels.as_ref().map(|l| l[range].to_vec()),
            }
        };
        Ok((take(0..train_len), take(train_len..n)))
    }

    /// Uniformly samples `n` distinct indices without replacement and returns
    /// the flows at those indices in their original order.
    pub fn sample_subsequence(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<CashFlowSeries> {
        let len = self.flows.len();
        if n == 0 || n > len {
            return Err(Error::InvalidSampleSize { n, len });
        }
        let mut indices = rand::seq::index::sample(rng, len, n).into_vec();
        indices.sort_unstable();
        Ok(CashFlowSeries {
            flows: indices.iter().map(|&i| self.flows[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        })
    }

    /// Writes the series back out in the accepted CSV format.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.labels {
            Some(labels) => {
                writeln!(w, "date,flow")?;
                for (label, flow) in labels.iter().zip(&self.flows) {
                    writeln!(w, "{},{}", label, flow)?;
                }
            }
            None => {
                writeln!(w, "flow")?;
                for flow in &self.flows {
                    writeln!(w, "{}", flow)?;
                }
            }
        }
        Ok(())
    }
}

/// Mean, sample standard deviation and observation count of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Train/test split ratio in (0, 1); train size is `floor(ratio * N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    ratio: f64,
}

impl SplitSpec {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidSplitRatio { ratio });
        }
        Ok(Self { ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

/// Draws `n` i.i.d. Gaussian flows N(mu, sigma^2), deterministic in the seed.
pub fn gen_random_walk(sigma: f64, mu: f64, n: usize, seed: u64) -> Result<CashFlowSeries> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidSigma { sigma });
    }
    if n == 0 {
        return Err(Error::EmptyGeneration);
    }
    let normal = Normal::new(mu, sigma).expect("validated sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flows = (0..n).map(|_| normal.sample(&mut rng)).collect();
    CashFlowSeries::new(flows)
}

/// Seeded RNG used by every sampling operation in this crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_csv_with_dates() {
        let src = "date,flow\n2020-01-02,0.5\n2020-01-03,-0.2";
        let s = CashFlowSeries::parse_csv(src.as_bytes()).unwrap();
        assert_eq!(s.flows(), &[0.5, -0.2]);
        assert_eq!(
            s.labels().unwrap(),
            &["2020-01-02".to_string(), "2020-01-03".to_string()]
        );
    }

    #[test]
    fn parse_csv_flow_only() {
        let src = "flow\n1.0\n2.0\n3.0";
        let s = CashFlowSeries::parse_csv(src.as_bytes()).unwrap();
        assert_eq!(s.flows(), &[1.0, 2.0, 3.0]);
        assert!(s.labels().is_none());
    }

    #[test]
    fn parse_csv_rejects_non_numeric_flow() {
        let src = "date,flow\n2020-01-02,abc";
        match CashFlowSeries::parse_csv(src.as_bytes()) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected CsvParse, got {:?}", other),
        }
    }

    #[test]
    fn parse_csv_rejects_bad_header() {
        let src = "amount\n1.0";
        assert!(matches!(
            CashFlowSeries::parse_csv(src.as_bytes()),
            Err(Error::CsvHeader { .. })
        ));
    }

    #[test]
    fn parse_csv_rejects_non_increasing_dates() {
        let src = "date,flow\n2020-01-03,1.0\n2020-01-03,2.0";
        assert!(matches!(
            CashFlowSeries::parse_csv(src.as_bytes()),
            Err(Error::LabelsNotIncreasing { .. })
        ));
    }

    #[test]
    fn parse_csv_skips_blank_lines() {
        let src = "flow\n1.0\n\n2.0\n";
        let s = CashFlowSeries::parse_csv(src.as_bytes()).unwrap();
        assert_eq!(s.flows(), &[1.0, 2.0]);
    }

    #[test]
    fn parse_csv_rejects_empty_file() {
        assert!(CashFlowSeries::parse_csv("flow\n".as_bytes()).is_err());
    }

    #[test]
    fn stats_constant_series() {
        let s = CashFlowSeries::new(vec![1.0, 1.0, 1.0]).unwrap();
        let st = s.stats().unwrap();
        assert_eq!(st.mean, 1.0);
        assert_eq!(st.std, 0.0);
        assert_eq!(st.count, 3);
    }

    #[test]
    fn stats_two_point_sample_std() {
        let s = CashFlowSeries::new(vec![0.0, 2.0]).unwrap();
        let st = s.stats().unwrap();
        assert_eq!(st.mean, 1.0);
        assert!((st.std - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_hand_checked_sample_formula() {
        let s = CashFlowSeries::new(vec![-1.0, 0.0, 1.0, 0.0]).unwrap();
        let st = s.stats().unwrap();
        assert_eq!(st.mean, 0.0);
        // sum of squares 2, divisor 3
        assert!((st.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((st.std - 0.81650).abs() < 1e-5);
    }

    #[test]
    fn stats_needs_two_points() {
        let s = CashFlowSeries::new(vec![1.0]).unwrap();
        assert!(matches!(s.stats(), Err(Error::StdUndefined { len: 1 })));
    }

    #[test]
    fn split_exact() {
        let s = CashFlowSeries::new((1..=10).map(f64::from).collect()).unwrap();
        let (train, test) = s.split(SplitSpec::new(0.8).unwrap()).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.flows(), &[9.0, 10.0]);
    }

    #[test]
    fn split_floors_train_size() {
        let s = CashFlowSeries::new((1..=5).map(f64::from).collect()).unwrap();
        let (train, test) = s.split(SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!(train.flows(), &[1.0, 2.0]);
        assert_eq!(test.flows(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn split_rejects_degenerate() {
        // N = 1 cannot produce two non-empty parts for any ratio.
        let s = CashFlowSeries::new(vec![1.0]).unwrap();
        assert!(matches!(
            s.split(SplitSpec::new(0.8).unwrap()),
            Err(Error::EmptySplitPart { .. })
        ));
        // A tiny ratio floors the train part to zero.
        let s2 = CashFlowSeries::new((1..=10).map(f64::from).collect()).unwrap();
        assert!(matches!(
            s2.split(SplitSpec::new(0.05).unwrap()),
            Err(Error::EmptySplitPart { part: "train", .. })
        ));
    }

    #[test]
    fn split_concat_reproduces_series() {
        let s = CashFlowSeries::new((0..37).map(|i| (i as f64).sin()).collect()).unwrap();
        let (train, test) = s.split(SplitSpec::new(0.63).unwrap()).unwrap();
        let mut joined = train.flows().to_vec();
        joined.extend_from_slice(test.flows());
        assert_eq!(joined, s.flows());
    }

    #[test]
    fn sample_full_series_is_identity() {
        let s = CashFlowSeries::new(vec![3.0, 1.0, 4.0, 1.5]).unwrap();
        let mut rng = seeded_rng(7);
        let out = s.sample_subsequence(4, &mut rng).unwrap();
        assert_eq!(out.flows(), s.flows());
    }

    #[test]
    fn sample_single_element_is_deterministic() {
        let s = CashFlowSeries::new((0..50).map(f64::from).collect()).unwrap();
        let a = s.sample_subsequence(1, &mut seeded_rng(11)).unwrap();
        let b = s.sample_subsequence(1, &mut seeded_rng(11)).unwrap();
        assert_eq!(a.flows(), b.flows());
    }

    #[test]
    fn sample_two_of_four_is_an_ordered_pair() {
        let s = CashFlowSeries::new(vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let expected: Vec<Vec<f64>> = vec![
            vec![10.0, 20.0],
            vec![10.0, 30.0],
            vec![10.0, 40.0],
            vec![20.0, 30.0],
            vec![20.0, 40.0],
            vec![30.0, 40.0],
        ];
        for seed in 0..32 {
            let out = s.sample_subsequence(2, &mut seeded_rng(seed)).unwrap();
            assert!(expected.contains(&out.flows().to_vec()), "{:?}", out.flows());
        }
    }

    #[test]
    fn sample_rejects_bad_sizes() {
        let s = CashFlowSeries::new(vec![1.0, 2.0]).unwrap();
        assert!(s.sample_subsequence(0, &mut seeded_rng(0)).is_err());
        assert!(s.sample_subsequence(3, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn random_walk_is_deterministic() {
        let a = gen_random_walk(0.097, 0.009, 100, 42).unwrap();
        let b = gen_random_walk(0.097, 0.009, 100, 42).unwrap();
        assert_eq!(a.flows(), b.flows());
    }

    #[test]
    fn random_walk_mean_within_clt_bound() {
        let s = gen_random_walk(1.0, 0.0, 1000, 3).unwrap();
        let mean = s.stats().unwrap().mean;
        assert!(mean.abs() < 4.0 / (1000.0f64).sqrt(), "mean {}", mean);
    }

    #[test]
    fn random_walk_std_concentrates() {
        let s = gen_random_walk(1.0, 0.0, 5000, 9).unwrap();
        let std = s.stats().unwrap().std;
        assert!((0.95..=1.05).contains(&std), "std {}", std);
    }

    #[test]
    fn random_walk_rejects_bad_spec() {
        assert!(gen_random_walk(0.0, 0.0, 10, 1).is_err());
        assert!(gen_random_walk(-1.0, 0.0, 10, 1).is_err());
        assert!(gen_random_walk(1.0, 0.0, 0, 1).is_err());
    }
}
