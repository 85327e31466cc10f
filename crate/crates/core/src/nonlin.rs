//! Scalar nonlinear maps: continuous strictly-increasing piecewise-affine
//! functions (and their inverses), and the basis-function dictionaries used to
//! parameterize static controller nonlinearities.

use std::fmt;
use std::sync::Arc;

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default end-of-scale constant for the built-in dictionaries.
pub const DEFAULT_SCALE: f64 = 200.0;

/// Default breakpoint spacing for the deadzone dictionary.
pub const DEFAULT_SPACING: f64 = 10.0;

/// A continuous, strictly increasing piecewise-affine map of the real line.
///
/// Stored as breakpoints, per-piece slopes, and the value at x = 0; piece
/// intercepts are derived, so continuity holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineMap {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    anchor: f64,
    // Value of the map at each breakpoint, derived once.
    knot_values: Vec<f64>,
    // Index of the piece containing x = 0; that piece is evaluated from the
    // anchor so the map is exact there (e.g. the identity region stays the
    // identity bit-for-bit).
    zero_piece: usize,
}

impl PiecewiseAffineMap {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Result<Self> {
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidBreakpoints);
        }
        if slopes.len() != breakpoints.len() + 1
            || slopes.iter().any(|s| !s.is_finite() || *s <= 0.0)
            || !anchor.is_finite()
        {
            return Err(Error::InvalidSlopes);
        }

        // Walk outward from x = 0 to fill in the value at every breakpoint.
        let zero_piece = breakpoints.partition_point(|&b| b < 0.0);
        let mut knot_values = vec![0.0; breakpoints.len()];
        let mut value = anchor;
        let mut x = 0.0;
        for i in zero_piece..breakpoints.len() {
            value += slopes[i] * (breakpoints[i] - x);
            x = breakpoints[i];
            knot_values[i] = value;
        }
        value = anchor;
        x = 0.0;
        for i in (0..zero_piece).rev() {
            value -= slopes[i + 1] * (x - breakpoints[i]);
            x = breakpoints[i];
            knot_values[i] = value;
        }

        Ok(Self {
            breakpoints,
            slopes,
            anchor,
            knot_values,
            zero_piece,
        })
    }

    /// The map y = x.
    pub fn identity() -> Self {
        Self::new(Vec::new(), vec![1.0], 0.0).expect("identity map is valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Value of the affine piece containing x.
    pub fn eval(&self, x: f64) -> f64 {
        let piece = self.breakpoints.partition_point(|&b| b < x);
        if piece == self.zero_piece {
            self.anchor + self.slopes[piece] * x
        } else if piece == 0 {
            self.knot_values[0] + self.slopes[0] * (x - self.breakpoints[0])
        } else {
            self.knot_values[piece - 1] + self.slopes[piece] * (x - self.breakpoints[piece - 1])
        }
    }

    /// The inverse map. Strict monotonicity is a construction invariant, so
    /// the inverse always exists and the round trip is exact up to roundoff.
    pub fn invert(&self) -> PiecewiseAffineMap {
        let breakpoints = self.knot_values.clone();
        let slopes: Vec<f64> = self.slopes.iter().map(|s| 1.0 / s).collect();
        // Anchor of the inverse: the x with self.eval(x) = 0.
        let piece = self.knot_values.partition_point(|&v| v < 0.0);
        let anchor = if piece == 0 {
            match self.breakpoints.first() {
                None => -self.anchor / self.slopes[0],
                Some(&b0) => b0 + (0.0 - self.knot_values[0]) / self.slopes[0],
            }
        } else {
            self.breakpoints[piece - 1]
                + (0.0 - self.knot_values[piece - 1]) / self.slopes[piece]
        };
        Self::new(breakpoints, slopes, anchor).expect("inverse of an increasing map is valid")
    }
}

/// The family of basis functions a dictionary draws from.
#[derive(Clone)]
pub enum DictionaryKind {
    /// Odd powers normalized to the end of scale: psi_i(x) = (x/scale)^(2i-1).
    PolynomialOdd,
    /// Deadzones opening at spacing*(i-1), normalized to unit value at the
    /// end of scale.
    Deadzone { spacing: f64 },
    /// Caller-supplied scalar basis functions; no normalization is enforced.
    Custom {
        basis: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    },
}

impl fmt::Debug for DictionaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PolynomialOdd => write!(f, "PolynomialOdd"),
            Self::Deadzone { spacing } => write!(f, "Deadzone {{ spacing: {spacing} }}"),
            Self::Custom { basis } => write!(f, "Custom {{ m: {} }}", basis.len()),
        }
    }
}

/// An ordered list of m scalar basis functions.
#[derive(Debug, Clone)]
pub struct Dictionary {
    kind: DictionaryKind,
    m: usize,
    scale: f64,
}

impl Dictionary {
    /// Odd-power polynomial dictionary with unit magnitude at `scale`.
    pub fn polynomial_odd(m: usize, scale: f64) -> Result<Self> {
        Self::validate_common(m, scale)?;
        Ok(Self {
            kind: DictionaryKind::PolynomialOdd,
            m,
            scale,
        })
    }

    /// Deadzone dictionary: component i opens at spacing*(i-1) and is
    /// normalized by scale - spacing*(i-1).
    pub fn deadzone(m: usize, scale: f64, spacing: f64) -> Result<Self> {
        Self::validate_common(m, scale)?;
        if spacing <= 0.0 || spacing * (m as f64 - 1.0) >= scale {
            return Err(Error::DeadzoneTooWide { spacing, m, scale });
        }
        Ok(Self {
            kind: DictionaryKind::Deadzone { spacing },
            m,
            scale,
        })
    }

    /// Dictionary of caller-supplied basis functions. Not serializable and
    /// not normalized.
    pub fn custom(basis: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>) -> Result<Self> {
        let m = basis.len();
        if m == 0 {
            return Err(Error::EmptyDictionary);
        }
        Ok(Self {
            kind: DictionaryKind::Custom { basis },
            m,
            scale: 0.0,
        })
    }

    fn validate_common(m: usize, scale: f64) -> Result<()> {
        if m == 0 {
            return Err(Error::EmptyDictionary);
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidScale { scale });
        }
        Ok(())
    }

    pub fn kind(&self) -> &DictionaryKind {
        &self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Evaluates all m basis functions at x.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.eval_into(x, &mut out);
        out
    }

    /// Evaluates all m basis functions at x into a caller-provided row.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.m, "output row length must equal m");
        match &self.kind {
            DictionaryKind::PolynomialOdd => {
                let r = x / self.scale;
                let r2 = r * r;
                let mut p = r;
                for slot in out.iter_mut() {
                    *slot = p;
                    p *= r2;
                }
            }
            DictionaryKind::Deadzone { spacing } => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let dead = spacing * i as f64;
                    let norm = self.scale - dead;
                    *slot = if x > dead {
                        (x - dead) / norm
                    } else if x < -dead {
                        (x + dead) / norm
                    } else {
                        0.0
                    };
                }
            }
            DictionaryKind::Custom { basis } => {
                for (slot, f) in out.iter_mut().zip(basis) {
                    *slot = f(x);
                }
            }
        }
    }
}

/// Weighted sum of dictionary basis functions at x: sum_i rho_i psi_i(x).
pub fn static_map(dict: &Dictionary, rho: &[f64], x: f64) -> Result<f64> {
    if rho.len() != dict.m() {
        return Err(Error::ParamLengthMismatch {
            got: rho.len(),
            expected: dict.m(),
        });
    }
    Ok(dict
        .eval(x)
        .iter()
        .zip(rho)
        .map(|(psi, r)| psi * r)
        .sum())
}

#[derive(Serialize, Deserialize)]
struct DictionaryRepr {
    kind: String,
    m: usize,
    #[serde(default = "default_scale")]
    scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing: Option<f64>,
}

fn default_scale() -> f64 {
    DEFAULT_SCALE
}

impl Serialize for Dictionary {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match &self.kind {
            DictionaryKind::PolynomialOdd => DictionaryRepr {
                kind: "polynomial-odd".into(),
                m: self.m,
                scale: self.scale,
                spacing: None,
            },
            DictionaryKind::Deadzone { spacing } => DictionaryRepr {
                kind: "deadzone".into(),
                m: self.m,
                scale: self.scale,
                spacing: Some(*spacing),
            },
            DictionaryKind::Custom { .. } => {
                return Err(S::Error::custom("custom dictionaries are not serializable"))
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dictionary {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DictionaryRepr::deserialize(deserializer)?;
        let dict = match repr.kind.as_str() {
            "polynomial-odd" => Dictionary::polynomial_odd(repr.m, repr.scale),
            "deadzone" => Dictionary::deadzone(
                repr.m,
                repr.scale,
                repr.spacing.unwrap_or(DEFAULT_SPACING),
            ),
            other => {
                return Err(D::Error::custom(format!(
                    "unknown dictionary kind `{other}`; expected `polynomial-odd` or `deadzone`"
                )))
            }
        };
        dict.map_err(D::Error::custom)
    }
}
