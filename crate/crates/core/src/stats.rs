//! Small numeric helpers shared by the metric modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Above this many categories entropy is accumulated with compensation.
pub const COMPENSATED_ENTROPY_THRESHOLD: usize = 10_000;

/// Shannon entropy in bits of the distribution given by `counts`.
///
/// Zero counts contribute nothing (0·log 0 = 0).
pub fn entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let term = |c: u64| {
        if c == 0 {
            0.0
        } else {
            let p = c as f64 / total;
            -p * p.log2()
        }
    };
    let h = if counts.len() > COMPENSATED_ENTROPY_THRESHOLD {
        let mut acc = CompensatedSum::default();
        counts.iter().for_each(|&c| acc.add(term(c)));
        acc.value()
    } else {
        counts.iter().map(|&c| term(c)).sum()
    };
    // A single category yields -1·log2(1) = -0.0.
    h.max(0.0)
}

/// Value at the given fraction of a sorted slice (nearest-rank).
pub fn percentile_sorted(sorted: &[f64], fraction: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (fraction * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Median of arbitrary values; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
