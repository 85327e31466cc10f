//! Minimal discrete-time LTI machinery: rational transfer functions in the
//! forward shift operator z, causal filtering by difference equation, and the
//! polynomial surgery (root deflation) needed to build excitation filters.
//!
//! Conventions used throughout the crate:
//! - polynomials are coefficient lists in descending powers of z;
//! - signals are indexed t = 1..N, stored zero-based;
//! - all filtering starts from zero initial conditions.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Default relative tolerance for declaring a value a polynomial root.
pub const DEFLATE_TOL: f64 = 1e-9;

/// Simulation horizon for [`settling_time`].
const SETTLING_HORIZON: usize = 10_000;

/// A finite real-valued signal, indexed t = 1..N.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    /// Wraps a sample vector, rejecting empty input and non-finite samples.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySignal);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Unit impulse at t = 1.
    pub fn impulse(n: usize) -> Result<Self> {
        let mut v = vec![0.0; n];
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        Self::new(v)
    }

    /// Unit step starting at t = 1.
    pub fn step(n: usize) -> Result<Self> {
        Self::constant(1.0, n)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }
}

/// Discrete-time rational transfer function num(z)/den(z), both in descending
/// powers of z. The denominator is normalized to be monic on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let num = trim_leading_zeros(num);
        let den = trim_leading_zeros(den);
        let lead = *den.first().ok_or(Error::ZeroDenominator)?;
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::ZeroDenominator);
        }
        let num = num.into_iter().map(|c| c / lead).collect();
        let den = den.into_iter().map(|c| c / lead).collect();
        Ok(Self { num, den })
    }

    /// The identity system y = u.
    pub fn identity() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// deg(den) - deg(num); negative for improper systems.
    pub fn relative_degree(&self) -> i64 {
        self.den.len() as i64 - self.num.len() as i64
    }

    /// Steady-state gain num(1)/den(1).
    ///
    /// Fails when the denominator vanishes at z = 1 (an undeflated integrator).
    pub fn dc_gain(&self) -> Result<f64> {
        let den_at_one = polyval(&self.den, 1.0);
        let scale: f64 = self.den.iter().map(|c| c.abs()).sum();
        if den_at_one.abs() <= 1e-12 * scale {
            return Err(Error::PoleAtOne);
        }
        Ok(polyval(&self.num, 1.0) / den_at_one)
    }

    /// True when every denominator root lies strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        poles(&self.den).iter().all(|&m| m < 1.0)
    }

    /// Largest pole magnitude, if the system has any poles.
    pub fn spectral_radius(&self) -> Option<f64> {
        poles(&self.den).into_iter().fold(None, |acc, m| {
            Some(acc.map_or(m, |a: f64| a.max(m)))
        })
    }

    /// Series composition: the product self * other.
    pub fn series(&self, other: &TransferFunction) -> TransferFunction {
        TransferFunction {
            num: conv(&self.num, &other.num),
            den: conv(&self.den, &other.den),
        }
    }
}

/// Causal filtering by the difference equation of `tf`, zero initial
/// conditions. Output length equals input length.
pub fn filter(tf: &TransferFunction, input: &Signal) -> Result<Signal> {
    let rd = tf.relative_degree();
    if rd < 0 {
        return Err(Error::ImproperFilter {
            relative_degree: rd,
        });
    }
    let n = tf.den.len() - 1;
    // Pad the numerator with leading zeros so b[k] multiplies u(t - k).
    let mut b = vec![0.0; tf.den.len()];
    b[tf.den.len() - tf.num.len()..].copy_from_slice(&tf.num);
    let a = &tf.den;

    let u = input.as_slice();
    let mut y = vec![0.0; u.len()];
    for t in 0..u.len() {
        let mut acc = 0.0;
        for k in 0..=n.min(t) {
            acc += b[k] * u[t - k];
        }
        for k in 1..=n.min(t) {
            acc -= a[k] * y[t - k];
        }
        y[t] = acc;
    }
    Signal::new(y)
}

/// Smallest t (1-based) after which the unit-step response stays within
/// band * |final value| of the final value. Simulates up to 10,000 samples and
/// reports failure to settle rather than extrapolating.
pub fn settling_time(tf: &TransferFunction, band: f64) -> Result<usize> {
    if !(band > 0.0 && band < 1.0) {
        return Err(Error::InvalidBand { band });
    }
    if let Some(radius) = tf.spectral_radius() {
        if radius >= 1.0 {
            return Err(Error::UnstableFilter { magnitude: radius });
        }
    }
    let final_value = tf.dc_gain()?;
    let tolerance = band * final_value.abs();
    let response = filter(tf, &Signal::step(SETTLING_HORIZON)?)?;
    let last_outside = response
        .as_slice()
        .iter()
        .rposition(|y| (y - final_value).abs() > tolerance);
    match last_outside {
        None => Ok(1),
        Some(i) if i + 1 == SETTLING_HORIZON => Err(Error::NotSettled {
            horizon: SETTLING_HORIZON,
        }),
        // The sample after the last out-of-band one, 1-based.
        Some(i) => Ok(i + 2),
    }
}

/// Divides `poly` by (z - root) via synthetic division.
///
/// The residual |poly(root)| must not exceed `tol` times the coefficient
/// magnitude scale, otherwise the value is not actually a root.
pub fn deflate_root(poly: &[f64], root: f64, tol: f64) -> Result<Vec<f64>> {
    if poly.len() < 2 {
        return Err(Error::DegreeTooLow);
    }
    let mut quotient = Vec::with_capacity(poly.len() - 1);
    let mut carry = poly[0];
    for &c in &poly[1..] {
        quotient.push(carry);
        carry = c + root * carry;
    }
    let scale = poly.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if carry.abs() > tol * scale {
        return Err(Error::NotARoot {
            root,
            residual: carry.abs(),
            tol: tol * scale,
        });
    }
    Ok(quotient)
}

/// Evaluates a descending-power coefficient list at `x` (Horner).
pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Polynomial product.
pub fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Difference a - b after right-aligning the shorter list.
pub fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &c) in a.iter().enumerate() {
        out[n - a.len() + i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[n - b.len() + i] -= c;
    }
    out
}

fn trim_leading_zeros(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        coeffs.remove(0);
    }
    coeffs
}

/// Root magnitudes of a monic-normalizable polynomial via the companion matrix.
fn poles(den: &[f64]) -> Vec<f64> {
    let n = den.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = den[0];
    let companion = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == 0 {
            -den[j + 1] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .collect()
}

/// Step-by-step realization of a proper transfer function, used by the
/// closed-loop simulator. Keeps explicit input/output history so the output
/// at time t can be read before the input at time t is chosen (valid for
/// strictly proper systems, where b0 = 0).
#[derive(Debug, Clone)]
pub(crate) struct TfState {
    b: Vec<f64>,
    a: Vec<f64>,
    u_hist: Vec<f64>,
    y_hist: Vec<f64>,
}

impl TfState {
    pub(crate) fn new(tf: &TransferFunction) -> Result<Self> {
        let rd = tf.relative_degree();
        if rd < 0 {
            return Err(Error::ImproperFilter {
                relative_degree: rd,
            });
        }
        let n = tf.den.len() - 1;
        let mut b = vec![0.0; n + 1];
        b[tf.den.len() - tf.num.len()..].copy_from_slice(&tf.num);
        Ok(Self {
            b,
            a: tf.den.clone(),
            u_hist: vec![0.0; n],
            y_hist: vec![0.0; n],
        })
    }

    /// Output at the current step from history alone (the b0 * u(t) term is
    /// excluded; it vanishes for strictly proper systems).
    pub(crate) fn output_from_history(&self) -> f64 {
        let n = self.a.len() - 1;
        let mut acc = 0.0;
        for k in 1..=n {
            acc += self.b[k] * self.u_hist[k - 1];
            acc -= self.a[k] * self.y_hist[k - 1];
        }
        acc
    }

    /// Applies the input for the current step and records the resulting
    /// output; returns that output.
    pub(crate) fn advance(&mut self, u: f64) -> f64 {
        let y = self.output_from_history() + self.b[0] * u;
        if !self.u_hist.is_empty() {
            self.u_hist.rotate_right(1);
            self.u_hist[0] = u;
            self.y_hist.rotate_right(1);
            self.y_hist[0] = y;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_model() -> TransferFunction {
        TransferFunction::new(vec![0.01], vec![1.0, -1.8, 0.81]).unwrap()
    }

    fn plant1_block() -> TransferFunction {
        TransferFunction::new(vec![0.2], vec![1.0, -0.8]).unwrap()
    }

    #[test]
    fn signal_rejects_empty_and_non_finite() {
        assert!(matches!(Signal::new(vec![]), Err(Error::EmptySignal)));
        assert!(matches!(
            Signal::new(vec![1.0, f64::NAN]),
            Err(Error::NonFiniteSample { index: 1 })
        ));
        assert!(matches!(
            Signal::new(vec![f64::INFINITY]),
            Err(Error::NonFiniteSample { index: 0 })
        ));
    }

    #[test]
    fn denominator_is_normalized_monic() {
        let tf = TransferFunction::new(vec![1.0], vec![2.0, -1.0]).unwrap();
        assert_eq!(tf.den(), &[1.0, -0.5]);
        assert_eq!(tf.num(), &[0.5]);
    }

    #[test]
    fn filter_impulse_through_first_order_lag() {
        // y(t) = 0.8 y(t-1) + 0.2 u(t-1), unrolled by hand.
        let out = filter(&plant1_block(), &Signal::impulse(6).unwrap()).unwrap();
        let expected = [0.0, 0.2, 0.16, 0.128, 0.1024, 0.08192];
        for (got, want) in out.iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-14);
        }
    }

    #[test]
    fn identity_filter_returns_input() {
        let input = Signal::new(vec![3.0, -1.5, 0.25, 9.0]).unwrap();
        let out = filter(&TransferFunction::identity(), &input).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn reference_model_step_converges_to_unity() {
        let out = filter(&reference_model(), &Signal::step(400).unwrap()).unwrap();
        assert_relative_eq!(out.as_slice()[399], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn filter_rejects_improper_systems() {
        let improper = TransferFunction::new(vec![1.0, 0.0, 0.0], vec![1.0, -0.5]).unwrap();
        assert!(matches!(
            filter(&improper, &Signal::step(4).unwrap()),
            Err(Error::ImproperFilter { relative_degree: -1 })
        ));
    }

    #[test]
    fn dc_gains() {
        assert_relative_eq!(reference_model().dc_gain().unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            TransferFunction::identity().dc_gain().unwrap(),
            1.0,
            epsilon = 0.0
        );
        // 0.2 / (1 - 0.8)
        assert_relative_eq!(plant1_block().dc_gain().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dc_gain_rejects_pole_at_one() {
        let integrator = TransferFunction::new(vec![1.0], vec![1.0, -1.0]).unwrap();
        assert!(matches!(integrator.dc_gain(), Err(Error::PoleAtOne)));
    }

    #[test]
    fn deflate_known_quadratic() {
        // (z - 1)(z - 0.8) = z^2 - 1.8 z + 0.8
        let q = deflate_root(&[1.0, -1.8, 0.8], 1.0, DEFLATE_TOL).unwrap();
        assert_eq!(q.len(), 2);
        assert_relative_eq!(q[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(q[1], -0.8, epsilon = 1e-12);
    }

    #[test]
    fn deflate_numerator_of_one_minus_reference_model() {
        // 1 - T_d has numerator den - num = z^2 - 1.8 z + 0.8.
        let td = reference_model();
        let numerator = poly_sub(td.den(), td.num());
        let q = deflate_root(&numerator, 1.0, DEFLATE_TOL).unwrap();
        assert_relative_eq!(q[1] / q[0], -0.8, epsilon = 1e-12);
    }

    #[test]
    fn deflate_rejects_non_root() {
        assert!(matches!(
            deflate_root(&[1.0, -0.5], 1.0, DEFLATE_TOL),
            Err(Error::NotARoot { .. })
        ));
    }

    #[test]
    fn relative_degrees() {
        assert_eq!(reference_model().relative_degree(), 2);
        assert_eq!(TransferFunction::identity().relative_degree(), 0);
        // G2 = 0.04 z / (z - 0.8)^2
        let g2 = TransferFunction::new(vec![0.04, 0.0], vec![1.0, -1.6, 0.64]).unwrap();
        assert_eq!(g2.relative_degree(), 1);
    }

    #[test]
    fn settling_times() {
        // The two-pole reference model settles (2% band) at sample 57; the
        // quoted 37 corresponds to the single-pole rule 0.9^t < 0.02.
        assert_eq!(settling_time(&reference_model(), 0.02).unwrap(), 57);
        assert_eq!(settling_time(&TransferFunction::identity(), 0.02).unwrap(), 1);
        // First-order lag: 1 - y(t) = 0.8^(t-1) <= 0.02 from t = 19 on.
        assert_eq!(settling_time(&plant1_block(), 0.02).unwrap(), 19);
    }

    #[test]
    fn settling_rejects_unstable_and_bad_band() {
        let unstable = TransferFunction::new(vec![1.0], vec![1.0, -1.1]).unwrap();
        assert!(matches!(
            settling_time(&unstable, 0.02),
            Err(Error::UnstableFilter { .. })
        ));
        assert!(matches!(
            settling_time(&plant1_block(), 0.0),
            Err(Error::InvalidBand { .. })
        ));
    }

    #[test]
    fn stability_classification() {
        assert!(reference_model().is_stable());
        assert!(TransferFunction::identity().is_stable());
        let marginal = TransferFunction::new(vec![1.0], vec![1.0, -1.0]).unwrap();
        assert!(!marginal.is_stable());
    }

    #[test]
    fn stepper_matches_batch_filter() {
        let tf = TransferFunction::new(vec![0.04, 0.0], vec![1.0, -1.6, 0.64]).unwrap();
        let input: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let batch = filter(&tf, &Signal::new(input.clone()).unwrap()).unwrap();
        let mut state = TfState::new(&tf).unwrap();
        for (t, &u) in input.iter().enumerate() {
            let peek = state.output_from_history();
            let y = state.advance(u);
            assert_relative_eq!(peek, y, epsilon = 0.0); // strictly proper
            assert_relative_eq!(y, batch.as_slice()[t], max_relative = 1e-13);
        }
    }

    #[test]
    fn deflate_then_multiply_back_round_trip() {
        let poly = [2.0, -3.7, 1.9, -0.2];
        // Find an actual root numerically: use z = 0.1234 after constructing
        // a polynomial that vanishes there.
        let with_root = conv(&poly, &[1.0, -0.1234]);
        let q = deflate_root(&with_root, 0.1234, DEFLATE_TOL).unwrap();
        let back = conv(&q, &[1.0, -0.1234]);
        for (a, b) in back.iter().zip(with_root.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }
}
