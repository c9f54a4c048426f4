//! Feature-set comparison metrics and interpretable-neuron counts.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use thiserror::Error;

use crate::othello::{feature_name, parse_feature_name, N_FEATURES};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("feature index {0} out of range")]
    OutOfRange(usize),
    #[error("duplicate feature index {0}")]
    Duplicate(usize),
    #[error("all similarities are equal; standard deviation is zero")]
    ZeroStd,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("non-finite value at feature {0}")]
    NonFinite(usize),
    #[error("reference feature set is empty")]
    EmptyReference,
    #[error("both feature sets are empty")]
    BothEmpty,
    #[error("probe csv row {row}: {msg}")]
    Csv { row: usize, msg: String },
}

/// Distinct feature indices, optionally ranked (most important first).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSet {
    ranked: Vec<usize>,
}

impl FeatureSet {
    pub fn new(ranked: Vec<usize>) -> Result<FeatureSet, MetricsError> {
        let mut seen = BTreeSet::new();
        for &f in &ranked {
            if f >= N_FEATURES {
                return Err(MetricsError::OutOfRange(f));
            }
            if !seen.insert(f) {
                return Err(MetricsError::Duplicate(f));
            }
        }
        Ok(FeatureSet { ranked })
    }

    pub fn ranked(&self) -> &[usize] {
        &self.ranked
    }

    pub fn set(&self) -> BTreeSet<usize> {
        self.ranked.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.ranked.iter().map(|&f| feature_name(f)).collect()
    }
}

impl FromIterator<usize> for FeatureSet {
    /// Keeps the first occurrence of each index; panics on out-of-range.
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut seen = BTreeSet::new();
        let ranked = iter
            .into_iter()
            .inspect(|&f| assert!(f < N_FEATURES, "feature {f} out of range"))
            .filter(|f| seen.insert(*f))
            .collect();
        FeatureSet { ranked }
    }
}

/// Population mean and standard deviation.
pub fn mean_std<T: Scalar>(values: &[T]) -> (T, T) {
    if values.is_empty() {
        return (T::zero(), T::zero());
    }
    let n = T::of_usize(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Features whose similarity deviates from the row mean by more than
/// `k_sigma` standard deviations in either direction, largest deviation
/// first.
pub fn probe_feature_set<T: Scalar>(sims: &[T], k_sigma: T) -> Result<FeatureSet, MetricsError> {
    if sims.len() != N_FEATURES {
        return Err(MetricsError::WrongLength { expected: N_FEATURES, got: sims.len() });
    }
    if let Some(i) = sims.iter().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    if sims.iter().all(|&v| v == sims[0]) {
        return Err(MetricsError::ZeroStd);
    }
    let (mean, std) = mean_std(sims);
    let mut picked: Vec<(usize, T)> = sims
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, (v - mean).abs()))
        .filter(|&(_, d)| d > k_sigma * std)
        .collect();
    picked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
    Ok(FeatureSet { ranked: picked.into_iter().map(|p| p.0).collect() })
}

/// Positive weights at least `k_sigma` standard deviations above the mean
/// over all entries, largest first.
pub fn weight_feature_set(weights: &[f64], k_sigma: f64) -> FeatureSet {
    let (mean, std) = mean_std(weights);
    let cut = mean + k_sigma * std;
    let mut picked: Vec<(usize, f64)> =
        weights.iter().copied().enumerate().filter(|&(_, w)| w > 0.0 && w >= cut).collect();
    picked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    FeatureSet { ranked: picked.into_iter().map(|p| p.0).collect() }
}

/// |method ∩ probe| / |probe|.
pub fn containment(method: &FeatureSet, probe: &FeatureSet) -> Result<f64, MetricsError> {
    if probe.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let inter = method.set().intersection(&probe.set()).count();
    Ok(inter as f64 / probe.len() as f64)
}

/// |a ∩ b| / |a ∪ b|.
pub fn jaccard(a: &FeatureSet, b: &FeatureSet) -> Result<f64, MetricsError> {
    let (sa, sb) = (a.set(), b.set());
    let union = sa.union(&sb).count();
    if union == 0 {
        return Err(MetricsError::BothEmpty);
    }
    Ok(sa.intersection(&sb).count() as f64 / union as f64)
}

/// Per layer, how many neurons score strictly above each cutoff.
/// Neurons without a score (degenerate fits) never count.
pub fn count_interpretable(
    scores: &[(u16, Option<f64>)],
    cutoffs: &[f64],
) -> BTreeMap<u16, Vec<usize>> {
    let mut out: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for &(layer, score) in scores {
        let row = out.entry(layer).or_insert_with(|| vec![0; cutoffs.len()]);
        if let Some(s) = score {
            for (i, &c) in cutoffs.iter().enumerate() {
                if s > c {
                    row[i] += 1;
                }
            }
        }
    }
    out
}

/// One neuron's row of probe cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub neuron_id: u32,
    pub layer: u16,
    pub sims: Vec<f64>,
}

/// Parse a probe-similarity CSV: header `neuron_id,layer,<feature names>`
/// covering all 320 features in any order; values must lie in [-1, 1].
pub fn read_probe_csv<R: Read>(r: R) -> Result<Vec<ProbeRow>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let csv_err = |row: usize, msg: String| MetricsError::Csv { row, msg };
    let headers = rdr.headers().map_err(|e| csv_err(0, e.to_string()))?.clone();
    if headers.len() != N_FEATURES + 2
        || &headers[0] != "neuron_id"
        || &headers[1] != "layer"
    {
        return Err(csv_err(0, format!(
            "header must be neuron_id,layer followed by {N_FEATURES} feature names"
        )));
    }
    let mut columns = Vec::with_capacity(N_FEATURES);
    let mut seen = BTreeSet::new();
    for name in headers.iter().skip(2) {
        let f = parse_feature_name(name)
            .ok_or_else(|| csv_err(0, format!("unknown feature column {name:?}")))?;
        if !seen.insert(f) {
            return Err(csv_err(0, format!("duplicate feature column {name:?}")));
        }
        columns.push(f);
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_err(row, e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let neuron_id = field(0).parse().map_err(|_| csv_err(row, format!("bad neuron_id {:?}", field(0))))?;
        let layer = field(1).parse().map_err(|_| csv_err(row, format!("bad layer {:?}", field(1))))?;
        let mut sims = vec![0.0; N_FEATURES];
        for (j, &f) in columns.iter().enumerate() {
            let v: f64 = field(j + 2)
                .parse()
                .map_err(|_| csv_err(row, format!("bad value {:?} in {}", field(j + 2), feature_name(f))))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(csv_err(row, format!("{} = {v} outside [-1, 1]", feature_name(f))));
            }
            sims[f] = v;
        }
        rows.push(ProbeRow { neuron_id, layer, sims });
    }
    Ok(rows)
}

/// Header line for a probe-similarity CSV in feature-index order.
pub fn probe_csv_header() -> String {
    let mut h = String::from("neuron_id,layer");
    for f in 0..N_FEATURES {
        h.push(',');
        h.push_str(&feature_name(f));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(v: &[usize]) -> FeatureSet {
        FeatureSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn set_metric_fixtures() {
        assert_eq!(containment(&fs(&[0, 1]), &fs(&[1, 2])), Ok(0.5));
        assert_eq!(jaccard(&fs(&[0, 1]), &fs(&[1, 2])), Ok(1.0 / 3.0));
        assert_eq!(containment(&fs(&[0, 1, 2]), &fs(&[1, 2])), Ok(1.0));
        assert_eq!(containment(&fs(&[0]), &fs(&[1])), Ok(0.0));
        assert_eq!(jaccard(&fs(&[4, 5]), &fs(&[5, 4])), Ok(1.0));
        assert_eq!(containment(&fs(&[0]), &fs(&[])), Err(MetricsError::EmptyReference));
        assert_eq!(jaccard(&fs(&[]), &fs(&[])), Err(MetricsError::BothEmpty));
        assert_eq!(FeatureSet::new(vec![1, 1]), Err(MetricsError::Duplicate(1)));
        assert_eq!(FeatureSet::new(vec![320]), Err(MetricsError::OutOfRange(320)));
    }

    #[test]
    fn probe_filter() {
        let mut row = vec![0.0f64; N_FEATURES];
        row[17] = 1.0;
        assert_eq!(probe_feature_set(&row, 2.0).unwrap().ranked(), &[17]);
        row[18] = -1.0;
        assert_eq!(probe_feature_set(&row, 2.0).unwrap().set(), BTreeSet::from([17, 18]));
        let shifted: Vec<f64> = row.iter().map(|v| v + 0.25).collect();
        assert_eq!(probe_feature_set(&shifted, 2.0).unwrap().set(), BTreeSet::from([17, 18]));
        assert_eq!(probe_feature_set(&[0.3f64; N_FEATURES], 2.0), Err(MetricsError::ZeroStd));
        assert!(matches!(probe_feature_set(&[0.3f64; 3], 2.0), Err(MetricsError::WrongLength { .. })));
    }

    #[test]
    fn counting() {
        let s = [(5, Some(0.65)), (5, Some(0.75)), (5, Some(0.95)), (5, None), (1, Some(0.85))];
        let c = count_interpretable(&s, &[0.7, 0.8, 0.9]);
        assert_eq!(c[&5], vec![2, 1, 1]);
        assert_eq!(c[&1], vec![1, 1, 0]);
        assert!(count_interpretable(&[], &[0.7]).is_empty());
    }

    #[test]
    fn probe_csv_round_trip() {
        let mut text = probe_csv_header();
        text.push('\n');
        text.push_str("3,5");
        for f in 0..N_FEATURES {
            text.push_str(&format!(",{}", if f == 9 { "0.5" } else { "0" }));
        }
        text.push('\n');
        let rows = read_probe_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].neuron_id, rows[0].layer), (3, 5));
        assert_eq!(rows[0].sims[9], 0.5);
        let bad = text.replace("0.5", "1.5");
        assert!(matches!(read_probe_csv(bad.as_bytes()), Err(MetricsError::Csv { row: 1, .. })));
        assert!(matches!(read_probe_csv("neuron_id,layer\n".as_bytes()), Err(MetricsError::Csv { row: 0, .. })));
    }
}
