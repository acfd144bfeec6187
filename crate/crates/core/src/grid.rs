//! The `(n+1)`-grid `{0, 1/(n+1), …, 1}` on which conformal p-values live.

/// A point `ell / (n + 1)` of the grid, kept as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridLevel {
    ell: usize,
    n: usize,
}

impl GridLevel {
    /// Panics if `ell > n + 1`.
    pub fn new(ell: usize, n: usize) -> Self {
        assert!(ell <= n + 1, "grid index {ell} exceeds n + 1 = {}", n + 1);
        Self { ell, n }
    }

    /// Largest grid point `<= t`; `t` is clamped to `[0, 1]`.
    pub fn floor(t: f64, n: usize) -> Self {
        Self::new(grid_floor(t, n), n)
    }

    pub fn index(&self) -> usize {
        self.ell
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self) -> f64 {
        self.ell as f64 / (self.n + 1) as f64
    }
}

/// `max { ell in 0..=n+1 : ell/(n+1) <= t }`, i.e. `floor((n+1) t)`.
///
/// The product `(n+1) * t` is not trusted: the result is corrected so that
/// it agrees with the comparison `ell as f64 / (n+1) as f64 <= t`, which is
/// how grid values written as decimals (`0.29` with `n = 99`) are meant.
pub fn grid_floor(t: f64, n: usize) -> usize {
    let top = n + 1;
    if t.is_nan() || t < 0.0 {
        return 0;
    }
    if t >= 1.0 {
        return top;
    }
    let denom = top as f64;
    let mut ell = libm::floor(t * denom) as usize;
    ell = ell.min(top);
    while ell < top && (ell + 1) as f64 / denom <= t {
        ell += 1;
    }
    while ell > 0 && ell as f64 / denom > t {
        ell -= 1;
    }
    ell
}

/// Discretized identity `I_n(t) = floor((n+1) t) / (n+1)`.
pub fn discretized_identity(t: f64, n: usize) -> f64 {
    grid_floor(t, n) as f64 / (n + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_handles_decimal_grid_points() {
        assert_eq!(grid_floor(0.29, 99), 29);
        assert_eq!(grid_floor(0.7, 9), 7);
        assert_eq!(grid_floor(0.3, 9), 3);
        assert_eq!(grid_floor(0.5, 1), 1);
        assert_eq!(grid_floor(0.49, 1), 0);
    }

    #[test]
    fn floor_clamps() {
        assert_eq!(grid_floor(-0.2, 5), 0);
        assert_eq!(grid_floor(1.0, 5), 6);
        assert_eq!(grid_floor(3.0, 5), 6);
        assert_eq!(grid_floor(f64::NAN, 5), 0);
    }

    #[test]
    fn floor_matches_exact_rational_floor() {
        for n in 1..60usize {
            for num in 0..=200u32 {
                let t = num as f64 / 200.0;
                let expected = (0..=n + 1)
                    .filter(|&l| (l as f64) / ((n + 1) as f64) <= t)
                    .max()
                    .unwrap();
                assert_eq!(grid_floor(t, n), expected, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn discretized_identity_values() {
        assert_eq!(discretized_identity(0.6, 3), 0.5);
        assert_eq!(discretized_identity(0.2, 3), 0.0);
    }
}
