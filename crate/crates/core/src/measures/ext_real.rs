use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A point of the extended real line `[-inf, +inf]`.
///
/// Backed by an `f64` that is never NaN; `-0.0` is normalized to `0.0` so
/// that equality, hashing and the total order agree.
#[derive(Clone, Copy, Debug)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const NEG_INF: ExtReal = ExtReal(f64::NEG_INFINITY);
    pub const POS_INF: ExtReal = ExtReal(f64::INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() {
            return Err(Error::Domain("NaN is not an extended real".into()));
        }
        Ok(ExtReal(if value == 0.0 { 0.0 } else { value }))
    }

    /// Finite point; panics on NaN or infinities. Intended for literals.
    pub fn finite(value: f64) -> Self {
        assert!(value.is_finite(), "ExtReal::finite({value})");
        ExtReal(if value == 0.0 { 0.0 } else { value })
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for ExtReal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl From<ExtReal> for f64 {
    fn from(x: ExtReal) -> f64 {
        x.0
    }
}

impl TryFrom<f64> for ExtReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        ExtReal::new(value)
    }
}

/// `-inf`, `+inf`, or the shortest decimal that round-trips.
impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else if self.0 == f64::INFINITY {
            f.write_str("+inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for ExtReal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-inf" => Ok(ExtReal::NEG_INF),
            "+inf" | "inf" => Ok(ExtReal::POS_INF),
            t => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::Domain(format!("not an extended real: {s:?}")))?;
                if !v.is_finite() {
                    return Err(Error::Domain(format!("not an extended real: {s:?}")));
                }
                ExtReal::new(v)
            }
        }
    }
}
