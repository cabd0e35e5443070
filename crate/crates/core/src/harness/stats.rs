use super::HarnessError;

/// Boxplot statistics of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub stddev: f64,
}

/// Quantile by linear interpolation between closest ranks of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        n,
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[n - 1],
        mean,
        stddev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn odd_count() {
        let s = summarize(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!((s.min, s.max, s.mean), (1.0, 5.0, 3.0));
        assert!((s.stddev - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_values_interpolate() {
        let s = summarize(&[20.0, 10.0]).unwrap();
        assert_eq!(s.median, 15.0);
        assert_eq!(s.q1, 12.5);
        assert_eq!(s.q3, 17.5);
    }

    #[test]
    fn constant_and_single() {
        let s = summarize(&[7.0; 4]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.stddev), (7.0, 7.0, 7.0, 7.0, 7.0, 0.0));
        let s = summarize(&[3.0]).unwrap();
        assert_eq!((s.n, s.q1, s.q3, s.stddev), (1, 3.0, 3.0, 0.0));
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(summarize(&[]), Err(HarnessError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn ordered(v in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.min <= s.mean + 1e-6 && s.mean <= s.max + 1e-6);
        }
    }
}
