use serde::Serialize;

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Sample mean with its standard error `std / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MCEstimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let v: Vec<f64> = samples.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return MCEstimate {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mut s = CompensatedSum::default();
        v.iter().for_each(|x| s.add(*x));
        let mean = s.value() / n as f64;
        let mut q = CompensatedSum::default();
        v.iter().for_each(|x| q.add((x - mean) * (x - mean)));
        let var = if n > 1 {
            q.value() / (n - 1) as f64
        } else {
            0.0
        };
        MCEstimate {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Frequency of `pred` with binomial standard error.
    pub fn frequency<I: IntoIterator<Item = bool>>(events: I) -> Self {
        Self::from_samples(events.into_iter().map(|b| if b { 1.0 } else { 0.0 }))
    }
}

/// Kolmogorov-Smirnov distance between a sample and the standard exponential.
pub fn ks_exp1(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = if x <= 0.0 { 0.0 } else { -(-x).exp_m1() };
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (hi - f).max(f - lo)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        assert_eq!(s.value(), 1.0 + 1e-15);
    }

    #[test]
    fn estimate_of_constant() {
        let e = MCEstimate::from_samples(vec![2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
        let f = MCEstimate::frequency([true, false, true, false]);
        assert_eq!(f.mean, 0.5);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let s: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        assert!(ks_exp1(&s) <= 0.5 / n as f64 + 1e-12);
        let shifted: Vec<f64> = s.iter().map(|x| x + 0.1).collect();
        assert!(ks_exp1(&shifted) > 0.09);
    }
}
