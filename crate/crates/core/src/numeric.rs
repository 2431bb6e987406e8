//! Small numerical helpers shared by every solver.

/// Values within this distance of an integer are treated as that integer
/// before rounding, and budgets/sums are compared with the same slack.
pub const SNAP_TOL: f64 = 1e-9;

fn snapped(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= SNAP_TOL).then_some(r)
}

/// Ceiling with integer snapping: `ceil(2.0000000001) == 2`.
pub fn snap_ceil(x: f64) -> i64 {
    snapped(x).unwrap_or_else(|| x.ceil()) as i64
}

/// Floor with integer snapping: `floor(6.9999999999) == 7`.
pub fn snap_floor(x: f64) -> i64 {
    snapped(x).unwrap_or_else(|| x.floor()) as i64
}

/// `a >= b` up to [`SNAP_TOL`].
pub fn ge_tol(a: f64, b: f64) -> bool {
    a >= b - SNAP_TOL
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping_absorbs_representation_noise() {
        assert_eq!(snap_ceil(4.0 / 1.0), 4);
        assert_eq!(snap_ceil(14.0 * 0.1), 2);
        assert_eq!(snap_ceil(2.0 + 1e-12), 2);
        assert_eq!(snap_ceil(2.0 + 1e-6), 3);
        assert_eq!(snap_floor(5.0 * 1.4), 7);
        assert_eq!(snap_floor(7.0 - 1e-12), 7);
        assert_eq!(snap_floor(7.0 - 1e-6), 6);
        assert_eq!(snap_ceil(-0.2), 0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((compensated_sum(xs) - 4e-16).abs() < 1e-30);
    }
}

/// Round to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}
