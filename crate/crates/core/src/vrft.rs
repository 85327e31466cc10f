//! Turns raw input-output data into the virtual-reference regression: the
//! measured output is passed through the inverse reference model to recover
//! the reference that would have produced it, the virtual tracking error is
//! integrated into the controller's regressor state, and the dictionary
//! expands that state into a regressor matrix whose target is the measured
//! plant input.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{filter, Signal, TransferFunction};
use crate::nonlin::Dictionary;

/// Minimum dataset length; the inverse-model truncation makes anything
/// shorter meaningless.
pub const MIN_DATASET_LEN: usize = 10;

/// An input-output record of equal-length plant input and measured output.
#[derive(Debug, Clone)]
pub struct Dataset {
    u: Signal,
    y: Signal,
}

impl Dataset {
    pub fn new(u: Signal, y: Signal) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::DatasetLengthMismatch {
                input: u.len(),
                output: y.len(),
            });
        }
        if u.len() < MIN_DATASET_LEN {
            return Err(Error::DatasetTooShort {
                n: u.len(),
                min: MIN_DATASET_LEN,
            });
        }
        Ok(Self { u, y })
    }

    pub fn u(&self) -> &Signal {
        &self.u
    }

    pub fn y(&self) -> &Signal {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least MIN_DATASET_LEN samples
    }
}

/// The assembled least-squares data: regressor matrix, target vector, and the
/// integrator state trace kept for diagnostics.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    phi: DMatrix<f64>,
    target: DVector<f64>,
    zbar: Vec<f64>,
    dictionary: Dictionary,
}

impl RegressionProblem {
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn zbar(&self) -> &[f64] {
        &self.zbar
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Rows of phi = samples surviving the truncation.
    pub fn n_eff(&self) -> usize {
        self.phi.nrows()
    }

    /// Columns of phi = dictionary size.
    pub fn m(&self) -> usize {
        self.phi.ncols()
    }

    /// Writes the problem as CSV: t, zbar, target, then one column per basis
    /// function. Intended for external solver cross-checks.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t,zbar,target")?;
        for j in 1..=self.m() {
            write!(w, ",phi_{j}")?;
        }
        writeln!(w)?;
        for t in 0..self.n_eff() {
            write!(w, "{},{},{}", t + 1, self.zbar[t], self.target[t])?;
            for j in 0..self.m() {
                write!(w, ",{}", self.phi[(t, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Recovers the virtual reference from a measured output by applying the
/// inverse reference model.
///
/// The improper inverse is realized as a causal filter plus a d-sample
/// advance, where d is the relative degree of `td`: the output is
/// den(z)/(num(z) z^d) applied to y, shifted forward by d and truncated, so
/// the result has length N - d. This is exact for finite data under zero
/// initial conditions.
pub fn virtual_reference(td: &TransferFunction, y: &Signal) -> Result<Signal> {
    let gain = td.dc_gain()?;
    if (gain - 1.0).abs() > 1e-9 {
        return Err(Error::ReferenceGainNotUnity { gain, tol: 1e-9 });
    }
    if let Some(radius) = td.spectral_radius() {
        if radius >= 1.0 {
            return Err(Error::UnstableFilter { magnitude: radius });
        }
    }
    let d = td.relative_degree();
    if d < 0 {
        return Err(Error::ImproperFilter { relative_degree: d });
    }
    let d = d as usize;
    if y.len() <= d {
        return Err(Error::SignalTooShort {
            n: y.len(),
            relative_degree: d,
        });
    }
    // den / (num * z^d): proper by construction (equal degrees).
    let mut shifted_num = td.num().to_vec();
    shifted_num.extend(std::iter::repeat(0.0).take(d));
    let causal_inverse = TransferFunction::new(td.den().to_vec(), shifted_num)?;
    let advanced = filter(&causal_inverse, y)?;
    Signal::new(advanced.as_slice()[d..].to_vec())
}

/// Builds the regression problem for the integrator-plus-static-map
/// controller class: the virtual error is the virtual reference minus the
/// measured output, the regressor state is its running sum (starting from
/// zero), and each row of phi is the dictionary evaluated at that state.
pub fn build_regression(
    data: &Dataset,
    td: &TransferFunction,
    dict: &Dictionary,
) -> Result<RegressionProblem> {
    let rbar = virtual_reference(td, data.y())?;
    let n_eff = rbar.len();
    let y = data.y().as_slice();
    let u = data.u().as_slice();

    let mut zbar = Vec::with_capacity(n_eff);
    let mut acc = 0.0;
    for t in 0..n_eff {
        zbar.push(acc);
        acc += rbar.as_slice()[t] - y[t];
    }
    if let Some(index) = zbar.iter().position(|z| !z.is_finite()) {
        return Err(Error::NonFiniteRegressorState { index });
    }

    let m = dict.m();
    let mut phi = DMatrix::<f64>::zeros(n_eff, m);
    let mut row = vec![0.0; m];
    for t in 0..n_eff {
        dict.eval_into(zbar[t], &mut row);
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteRegressor { row: t, col: j });
            }
            phi[(t, j)] = v;
        }
    }
    let target = DVector::from_column_slice(&u[..n_eff]);

    Ok(RegressionProblem {
        phi,
        target,
        zbar,
        dictionary: dict.clone(),
    })
}

/// The unregularized regression cost: the squared residual sum over all rows.
pub fn vrft_cost(problem: &RegressionProblem, rho: &[f64]) -> Result<f64> {
    if rho.len() != problem.m() {
        return Err(Error::ParamLengthMismatch {
            got: rho.len(),
            expected: problem.m(),
        });
    }
    let rho = DVector::from_column_slice(rho);
    let residual = problem.target() - problem.phi() * rho;
    Ok(residual.norm_squared())
}
