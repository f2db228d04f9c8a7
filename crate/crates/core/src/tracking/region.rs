use nalgebra::DMatrix;

use crate::covariance::{cholesky_lower, quadratic_form};
use crate::{Error, Result};

/// Read-only coordinate view of a particle state.
pub trait StateVector {
    fn coords(&self) -> &[f64];
}

impl StateVector for f64 {
    #[inline]
    fn coords(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
}

impl StateVector for Vec<f64> {
    #[inline]
    fn coords(&self) -> &[f64] {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `x <= bound`
    AtMost,
    /// `x >= bound`
    AtLeast,
}

/// Set of acceptable parameter values.
#[derive(Clone, Debug, PartialEq)]
pub enum AcceptableRegion {
    /// Closed interval `[lower, upper]` of a scalar parameter.
    Interval { lower: f64, upper: f64 },
    HalfLine { bound: f64, side: Side },
    /// Coordinatewise closed box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x : (x - center)' inverse (x - center) <= radius^2}`.
    Ellipsoid {
        center: Vec<f64>,
        inverse: DMatrix<f64>,
        radius: f64,
    },
}

impl AcceptableRegion {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::domain(format!("interval bounds out of order: [{lower}, {upper}]")));
        }
        Ok(Self::Interval { lower, upper })
    }

    pub fn half_line(bound: f64, side: Side) -> Result<Self> {
        if bound.is_nan() {
            return Err(Error::domain("half-line bound is NaN"));
        }
        Ok(Self::HalfLine { bound, side })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::domain("box bounds out of order"));
        }
        Ok(Self::Box { lower, upper })
    }

    /// Ellipsoid given the inverse shape matrix, which must be symmetric positive definite.
    pub fn ellipsoid(center: Vec<f64>, inverse: DMatrix<f64>, radius: f64) -> Result<Self> {
        let d = center.len();
        if inverse.nrows() != d || inverse.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: inverse.nrows(),
            });
        }
        if !(radius >= 0.0) {
            return Err(Error::domain(format!("ellipsoid radius must be nonnegative, got {radius}")));
        }
        cholesky_lower(&inverse)?;
        Ok(Self::Ellipsoid {
            center,
            inverse,
            radius,
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Interval { .. } | Self::HalfLine { .. } => 1,
            Self::Box { lower, .. } => lower.len(),
            Self::Ellipsoid { center, .. } => center.len(),
        }
    }

    /// Membership test; `x` must have the region's dimension.
    #[inline]
    pub fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            Self::Interval { lower, upper } => *lower <= x[0] && x[0] <= *upper,
            Self::HalfLine { bound, side } => match side {
                Side::AtMost => x[0] <= *bound,
                Side::AtLeast => x[0] >= *bound,
            },
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u),
            Self::Ellipsoid {
                center,
                inverse,
                radius,
            } => quadratic_form(x, center, inverse) <= radius * radius,
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(self.contains_unchecked(x))
    }
}

pub fn region_contains<S: StateVector + ?Sized>(region: &AcceptableRegion, state: &S) -> Result<bool> {
    region.contains(state.coords())
}
