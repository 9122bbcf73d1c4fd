//! Small numeric helpers shared by the solvers.

/// Tolerance for validating user-supplied inputs (simplex sums, feasibility).
pub const INPUT_TOL: f64 = 1e-12;

/// Tolerance for solver self-checks and certification.
pub const SOLVER_TOL: f64 = 1e-9;

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

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

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in values {
        acc.add(x);
    }
    acc.value()
}

/// Compensated prefix sums: `out[k] = values[0] + ... + values[k-1]`, length `len + 1`.
pub fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = KahanSum::new();
    out.push(0.0);
    for &x in values {
        acc.add(x);
        out.push(acc.value());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0e16];
        v.extend(std::iter::repeat_n(1.0, 1000));
        v.push(-1.0e16);
        assert_eq!(sum(v), 1000.0);
    }

    #[test]
    fn prefix_sums_lengths() {
        assert_eq!(prefix_sums(&[]), vec![0.0]);
        assert_eq!(prefix_sums(&[0.5, 0.25]), vec![0.0, 0.5, 0.75]);
    }

    #[test]
    fn sign_of_zero() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(-3.0), -1.0);
    }
}
