use super::{RveError, RveSpec};

/// Floor applied to empty target bins so the divergence stays finite.
pub const KL_SMOOTHING: f64 = 1e-9;

/// Uniform binning over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinSpec {
    /// 30 bins over `[2r, 6r]`, i.e. center-to-center distances from contact
    /// out to two fiber diameters of clearance.
    pub fn for_radius(radius: f64) -> Self {
        Self {
            lo: 2.0 * radius,
            hi: 6.0 * radius,
            bins: 30,
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins as f64;
        (0..=self.bins)
            .map(|k| if k == self.bins { self.hi } else { self.lo + w * k as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NndHistogram {
    edges: Vec<f64>,
    probabilities: Vec<f64>,
}

impl NndHistogram {
    pub fn new(edges: Vec<f64>, probabilities: Vec<f64>) -> Result<Self, RveError> {
        if edges.len() < 2 || edges.len() != probabilities.len() + 1 {
            return Err(RveError::InvalidHistogram(format!(
                "{} edges for {} bins",
                edges.len(),
                probabilities.len()
            )));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RveError::InvalidHistogram("bin edges must be strictly ascending".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(RveError::InvalidHistogram("negative or non-finite probability".into()));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RveError::InvalidHistogram(format!("probabilities sum to {sum}")));
        }
        Ok(Self {
            edges,
            probabilities,
        })
    }

    /// Like [`NndHistogram::new`] but rescales weights to unit mass first.
    pub fn normalized(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self, RveError> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(RveError::InvalidHistogram("weights have no positive mass".into()));
        }
        let mut probabilities: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        // Push the residual rounding error into the heaviest bin.
        let resid = 1.0 - probabilities.iter().sum::<f64>();
        if let Some(k) = (0..probabilities.len()).max_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b])) {
            probabilities[k] += resid;
        }
        Self::new(edges, probabilities)
    }

    /// Empirical histogram of `values`. Values outside the edges are counted
    /// in the first or last bin.
    pub fn from_values(values: &[f64], edges: &[f64]) -> Result<Self, RveError> {
        if values.is_empty() {
            return Err(RveError::InvalidHistogram("no values".into()));
        }
        let mut counts = vec![0usize; edges.len().saturating_sub(1)];
        if counts.is_empty() {
            return Err(RveError::InvalidHistogram("need at least one bin".into()));
        }
        for &v in values {
            counts[bin_index(edges, v)] += 1;
        }
        let n = values.len() as f64;
        Self::normalized(edges.to_vec(), counts.iter().map(|&c| c as f64 / n).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn bins(&self) -> usize {
        self.probabilities.len()
    }

    /// Cumulative distribution evaluated at the upper edge of each bin.
    pub fn cdf(&self) -> Vec<f64> {
        self.probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }
}

pub(crate) fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    // partition_point gives the number of edges <= v.
    let k = edges.partition_point(|e| *e <= v);
    k.saturating_sub(1).min(bins - 1)
}

/// `Σ pᵢ ln(pᵢ / qᵢ)` over bins with `pᵢ > 0`. Empty bins of `q` are floored
/// at [`KL_SMOOTHING`].
pub fn kl_divergence(p: &NndHistogram, q: &NndHistogram) -> Result<f64, RveError> {
    if p.edges.len() != q.edges.len()
        || p.edges.iter().zip(&q.edges).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(RveError::BinMismatch);
    }
    Ok(kl_raw(&p.probabilities, &q.probabilities))
}

pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi.max(KL_SMOOTHING)).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Built-in reference NND target for densely packed unidirectional CFRP.
///
/// The surface gap `g = NND − 2r` follows a gamma law (shape 2, mean
/// `0.18·r`), a near-contact distribution typical of high fiber-volume
/// micrographs, discretized on [`BinSpec::for_radius`].
pub fn reference_target(spec: &RveSpec) -> NndHistogram {
    let bins = BinSpec::for_radius(spec.fiber_radius);
    let edges = bins.edges();
    let shape = 2.0;
    let scale = 0.18 * spec.fiber_radius / shape;
    let base = 2.0 * spec.fiber_radius;
    // CDF of Gamma(2, θ): 1 − e^{−x/θ}(1 + x/θ).
    let cdf = |x: f64| {
        let t = ((x - base) / scale).max(0.0);
        1.0 - (-t).exp() * (1.0 + t)
    };
    let mut weights: Vec<f64> = edges.windows(2).map(|w| cdf(w[1]) - cdf(w[0])).collect();
    // The last bin collects the upper tail, matching from_values clamping.
    if let Some(last) = weights.last_mut() {
        *last += 1.0 - cdf(bins.hi);
    }
    NndHistogram::normalized(edges, weights).expect("reference target is a valid histogram")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(p: &[f64]) -> NndHistogram {
        let edges = (0..=p.len()).map(|k| k as f64).collect();
        NndHistogram::new(edges, p.to_vec()).unwrap()
    }

    #[test]
    fn kl_identical_is_zero() {
        let p = hist(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_two_bin_value() {
        // 0.5 ln 2 + 0.5 ln(2/3)
        let expected = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        let got = kl_divergence(&hist(&[0.5, 0.5]), &hist(&[0.25, 0.75])).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn kl_single_term() {
        let got = kl_divergence(&hist(&[1.0, 0.0]), &hist(&[0.5, 0.5])).unwrap();
        assert!((got - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_empty_target_bin_is_finite() {
        let got = kl_divergence(&hist(&[0.5, 0.5]), &hist(&[1.0, 0.0])).unwrap();
        assert!(got.is_finite() && got > 5.0);
    }

    #[test]
    fn kl_rejects_mismatched_bins() {
        assert!(matches!(
            kl_divergence(&hist(&[0.5, 0.5]), &hist(&[0.2, 0.3, 0.5])),
            Err(RveError::BinMismatch)
        ));
    }

    #[test]
    fn from_values_clamps_outliers() {
        let h = NndHistogram::from_values(&[-5.0, 0.5, 1.5, 99.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(h.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_histograms() {
        assert!(NndHistogram::new(vec![0.0, 1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(NndHistogram::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(NndHistogram::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn reference_target_is_valid() {
        let t = reference_target(&RveSpec::default());
        assert_eq!(t.bins(), 30);
        assert!((t.probabilities().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(t.edges()[0], 7.0);
        assert_eq!(*t.edges().last().unwrap(), 21.0);
    }

    fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter("mass", |w| w.iter().sum::<f64>() > 1e-3)
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_on_diagonal(a in weights(12), b in weights(12)) {
            let edges: Vec<f64> = (0..=12).map(|k| k as f64).collect();
            let p = NndHistogram::normalized(edges.clone(), a).unwrap();
            let q = NndHistogram::normalized(edges, b).unwrap();
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        }
    }
}
