/// Absolute entrywise tolerance used by every identity check.
pub const NUMERIC_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are merged into one spectral group.
pub const GROUP_TOL: f64 = 1e-8;
/// Relative threshold for the consistency conditions.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Numerical thresholds shared by validation, spectral grouping and
/// consistency checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max absolute entry deviation accepted in identity checks.
    pub numeric: f64,
    /// Eigenvalue grouping threshold.
    pub group: f64,
    /// Relative off-diagonal threshold for the chain-ket Gram matrix.
    pub consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            numeric: NUMERIC_TOL,
            group: GROUP_TOL,
            consistency: CONSISTENCY_TOL,
        }
    }
}

impl Tolerances {
    /// Looser bound used for derived quantities such as reconstructions and
    /// probability sums.
    pub fn derived(&self) -> f64 {
        10.0 * self.numeric
    }
}
