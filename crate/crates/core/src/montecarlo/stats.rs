/// Running mean and variance (Welford), fed in a fixed order.
///
/// Feeding identical values leaves the mean exactly equal to that value and
/// the variance exactly zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Sample variance with `n - 1` in the denominator; 0 for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass_formulas() {
        let xs = [1.5, 2.0, -0.25, 8.0, 3.0];
        let mut acc = Accumulator::default();
        xs.iter().for_each(|&x| acc.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((acc.mean() - mean).abs() < 1e-14);
        assert!((acc.variance() - var).abs() < 1e-13);
        assert!((acc.std_error() - (var / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn constant_input_is_exact() {
        let mut acc = Accumulator::default();
        for _ in 0..1000 {
            acc.push(0.1);
        }
        assert_eq!(acc.mean(), 0.1);
        assert_eq!(acc.std_error(), 0.0);
    }

    #[test]
    fn degenerate_counts() {
        let mut acc = Accumulator::default();
        assert!(acc.mean().is_nan());
        acc.push(4.0);
        assert_eq!(acc.mean(), 4.0);
        assert_eq!(acc.std_error(), 0.0);
    }
}
