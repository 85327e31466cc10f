//! Closed-loop simulation of a Hammerstein plant under an
//! integrator-plus-static-map controller, the desired-response reference
//! path, the model-reference cost, and the exact benchmark controllers used
//! as oracles.

use crate::error::{Error, Result};
use crate::lti::{filter, Signal, TfState, TransferFunction};
use crate::nonlin::PiecewiseAffineMap;
use crate::plant::{benchmark_nonlinearity, HammersteinPlant, NoiseSpec};
use crate::solvers::ControllerParams;

/// Absolute bound on |y| or |u| beyond which the loop is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Default evaluation reference step amplitudes.
pub const DEFAULT_EVAL_AMPLITUDES: [f64; 4] = [2.0, 6.0, -2.0, -6.0];

/// Default dwell of each evaluation reference step, in samples.
pub const DEFAULT_EVAL_DWELL: usize = 150;

enum ControllerKind {
    /// u(t) = sum_i rho_i psi_i(z(t)), z(t) the running error sum.
    Dictionary(ControllerParams),
    /// Exact benchmark controller for plant 1: v(t) = v(t-1) + 0.05 e(t-1),
    /// u(t) = phi_inv(v(t)).
    Ideal1 { phi_inv: PiecewiseAffineMap },
    /// Exact benchmark controller for plant 2:
    /// v(t) = v(t-1) + 0.25 e(t-1) - 0.2 e(t-2), u(t) = phi_inv(v(t)).
    Ideal2 { phi_inv: PiecewiseAffineMap },
}

/// A stateful feedback controller of relative degree one: the output at time
/// t depends on errors strictly before t. Instances carry mutable state and
/// must not be shared between concurrent simulations.
pub struct Controller {
    kind: ControllerKind,
    integrator: f64,
    v: f64,
    e_prev: [f64; 2],
}

impl Controller {
    /// Wraps fitted parameters as an integrator-plus-static-map controller.
    pub fn from_params(params: ControllerParams) -> Self {
        Self {
            kind: ControllerKind::Dictionary(params),
            integrator: 0.0,
            v: 0.0,
            e_prev: [0.0; 2],
        }
    }

    /// The disclosed ideal controller for benchmark plant `id`, realized
    /// causally: the error enters with a one-sample delay, consistent with
    /// the controller class whose integrator sums errors up to t - 1.
    pub fn ideal(id: u8) -> Result<Self> {
        let phi_inv = benchmark_nonlinearity().invert();
        let kind = match id {
            1 => ControllerKind::Ideal1 { phi_inv },
            2 => ControllerKind::Ideal2 { phi_inv },
            _ => return Err(Error::UnknownController { id }),
        };
        Ok(Self {
            kind,
            integrator: 0.0,
            v: 0.0,
            e_prev: [0.0; 2],
        })
    }

    /// Fitted parameters, when this is a dictionary controller.
    pub fn params(&self) -> Option<&ControllerParams> {
        match &self.kind {
            ControllerKind::Dictionary(p) => Some(p),
            _ => None,
        }
    }

    pub fn reset(&mut self) {
        self.integrator = 0.0;
        self.v = 0.0;
        self.e_prev = [0.0; 2];
    }

    /// Emits u(t) from the state built out of e(1)..e(t-1), then absorbs
    /// e(t) for the next step.
    pub fn step(&mut self, e: f64) -> f64 {
        let u = match &self.kind {
            ControllerKind::Dictionary(params) => params.static_map(self.integrator),
            ControllerKind::Ideal1 { phi_inv } => {
                self.v += 0.05 * self.e_prev[0];
                phi_inv.eval(self.v)
            }
            ControllerKind::Ideal2 { phi_inv } => {
                self.v += 0.25 * self.e_prev[0] - 0.2 * self.e_prev[1];
                phi_inv.eval(self.v)
            }
        };
        self.integrator += e;
        self.e_prev = [e, self.e_prev[0]];
        u
    }
}

/// Outcome of a closed-loop run. When the divergence bound was hit, `stable`
/// is false, `divergence_index` holds the 1-based time of the first offending
/// sample, and all recorded signals are truncated to just before it.
#[derive(Debug, Clone)]
pub struct ClosedLoopResult {
    r: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    y_d: Vec<f64>,
    j: f64,
    stable: bool,
    divergence_index: Option<usize>,
}

impl ClosedLoopResult {
    pub fn reference(&self) -> &[f64] {
        &self.r
    }

    pub fn output(&self) -> &[f64] {
        &self.y
    }

    pub fn input(&self) -> &[f64] {
        &self.u
    }

    pub fn desired(&self) -> &[f64] {
        &self.y_d
    }

    /// Model-reference cost over the recorded samples.
    pub fn cost(&self) -> f64 {
        self.j
    }

    pub fn stable(&self) -> bool {
        self.stable
    }

    pub fn divergence_index(&self) -> Option<usize> {
        self.divergence_index
    }

    /// Writes the run as CSV with columns t, r, y, y_d, u.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r,y,y_d,u")?;
        for t in 0..self.y.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                t + 1,
                self.r[t],
                self.y[t],
                self.y_d[t],
                self.u[t]
            )?;
        }
        Ok(())
    }
}

/// Runs the loop: at each step the plant output is read (plus measurement
/// noise), the tracking error is formed, the controller emits its input from
/// errors strictly before now, and the plant advances. This ordering is the
/// unique causal one for a strictly proper plant under a relative-degree-one
/// controller.
///
/// Divergence (|y| or |u| beyond 1e6, or a non-finite value) is reported in
/// the result, never as an error.
pub fn simulate_closed_loop(
    plant: &HammersteinPlant,
    controller: &mut Controller,
    r: &Signal,
    noise: &NoiseSpec,
    td: &TransferFunction,
) -> Result<ClosedLoopResult> {
    controller.reset();
    let mut block = TfState::new(plant.linear_block())?;
    let mut noise_stream = noise.sampler();
    let y_d = filter(td, r)?;

    let n = r.len();
    let mut y_rec = Vec::with_capacity(n);
    let mut u_rec = Vec::with_capacity(n);
    let mut divergence_index = None;

    for (t, &r_t) in r.as_slice().iter().enumerate() {
        let y_t = block.output_from_history() + noise_stream.next_sample();
        let e_t = r_t - y_t;
        let u_t = controller.step(e_t);
        if !y_t.is_finite()
            || !u_t.is_finite()
            || y_t.abs() > DIVERGENCE_LIMIT
            || u_t.abs() > DIVERGENCE_LIMIT
        {
            divergence_index = Some(t + 1);
            break;
        }
        y_rec.push(y_t);
        u_rec.push(u_t);
        block.advance(plant.input_nonlinearity().eval(u_t));
    }

    let kept = y_rec.len();
    let j = y_rec
        .iter()
        .zip(&y_d.as_slice()[..kept])
        .map(|(y, yd)| (yd - y) * (yd - y))
        .sum();

    Ok(ClosedLoopResult {
        r: r.as_slice()[..kept].to_vec(),
        y: y_rec,
        u: u_rec,
        y_d: y_d.as_slice()[..kept].to_vec(),
        j,
        stable: divergence_index.is_none(),
        divergence_index,
    })
}

/// The desired closed-loop response: the reference filtered by the reference
/// model from zero initial conditions.
pub fn desired_response(td: &TransferFunction, r: &Signal) -> Result<Signal> {
    filter(td, r)
}

/// Sum of squared deviations between achieved and desired outputs.
pub fn mr_cost(y: &[f64], y_d: &[f64]) -> Result<f64> {
    if y.len() != y_d.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_d.len(),
        });
    }
    Ok(y.iter().zip(y_d).map(|(a, b)| (b - a) * (b - a)).sum())
}

/// Piecewise-constant reference holding each amplitude for `dwell` samples.
pub fn eval_reference(amplitudes: &[f64], dwell: usize) -> Result<Signal> {
    if dwell == 0 {
        return Err(Error::ZeroDwell);
    }
    if amplitudes.is_empty() {
        return Err(Error::EmptyReference);
    }
    let mut values = Vec::with_capacity(amplitudes.len() * dwell);
    for &a in amplitudes {
        values.extend(std::iter::repeat(a).take(dwell));
    }
    Signal::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_model() -> TransferFunction {
        TransferFunction::new(vec![0.01], vec![1.0, -1.8, 0.81]).unwrap()
    }

    fn steps() -> Signal {
        eval_reference(&DEFAULT_EVAL_AMPLITUDES, DEFAULT_EVAL_DWELL).unwrap()
    }

    #[test]
    fn ideal_controller_1_reproduces_reference_model_exactly() {
        let plant = HammersteinPlant::builtin(1).unwrap();
        let mut ctrl = Controller::ideal(1).unwrap();
        let r = steps();
        let out =
            simulate_closed_loop(&plant, &mut ctrl, &r, &NoiseSpec::off(), &reference_model())
                .unwrap();
        assert!(out.stable());
        let worst = out
            .output()
            .iter()
            .zip(out.desired())
            .map(|(y, yd)| (y - yd).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "max deviation {worst}");
    }

    #[test]
    fn ideal_controller_2_reproduces_reference_model_exactly() {
        let plant = HammersteinPlant::builtin(2).unwrap();
        let mut ctrl = Controller::ideal(2).unwrap();
        let r = steps();
        let out =
            simulate_closed_loop(&plant, &mut ctrl, &r, &NoiseSpec::off(), &reference_model())
                .unwrap();
        assert!(out.stable());
        let worst = out
            .output()
            .iter()
            .zip(out.desired())
            .map(|(y, yd)| (y - yd).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "max deviation {worst}");
    }

    #[test]
    fn ideal_controller_1_static_map_matches_derived_coefficients() {
        // The plant-1 ideal controller restricted to the integrator state is
        // phi_inv(0.05 z); the deadzone representation with entries
        // (10, -7.2, 1.2) at indices (1, 3, 13) matches it everywhere.
        let dict = crate::nonlin::Dictionary::deadzone(20, 200.0, 10.0).unwrap();
        let mut rho = vec![0.0; 20];
        rho[0] = 10.0;
        rho[2] = -7.2;
        rho[12] = 1.2;
        let inv = benchmark_nonlinearity().invert();
        for i in 0..500 {
            let z = -250.0 + 500.0 * (i as f64) / 499.0;
            let from_dict = crate::nonlin::static_map(&dict, &rho, z).unwrap();
            assert_relative_eq!(from_dict, inv.eval(0.05 * z), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_reference_stays_at_rest() {
        let plant = HammersteinPlant::builtin(1).unwrap();
        let mut ctrl = Controller::ideal(1).unwrap();
        let r = Signal::zeros(100).unwrap();
        let out =
            simulate_closed_loop(&plant, &mut ctrl, &r, &NoiseSpec::off(), &reference_model())
                .unwrap();
        assert!(out.output().iter().all(|&v| v == 0.0));
        assert!(out.input().iter().all(|&v| v == 0.0));
        assert_eq!(out.cost(), 0.0);
    }

    #[test]
    fn unknown_ideal_controller_is_rejected() {
        assert!(matches!(
            Controller::ideal(3),
            Err(Error::UnknownController { id: 3 })
        ));
    }

    #[test]
    fn desired_response_settles_to_step_amplitude() {
        let td = reference_model();
        let y_d = desired_response(&td, &Signal::step(300).unwrap()).unwrap();
        assert_relative_eq!(y_d.as_slice()[299], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn mr_cost_basics() {
        let y = vec![1.0, 2.0, 3.0];
        assert_eq!(mr_cost(&y, &y).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.5).collect();
        assert_relative_eq!(mr_cost(&y, &shifted).unwrap(), 3.0 * 0.25, epsilon = 1e-12);
        assert!(matches!(
            mr_cost(&y, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mr_cost_is_shift_invariant() {
        let y: Vec<f64> = (0..50).map(|t| (t as f64 * 0.2).sin()).collect();
        let y_d: Vec<f64> = (0..50).map(|t| (t as f64 * 0.21).cos()).collect();
        let direct = mr_cost(&y, &y_d).unwrap();
        let shifted = mr_cost(&y[5..], &y_d[5..]).unwrap()
            + mr_cost(&y[..5], &y_d[..5]).unwrap();
        assert_relative_eq!(direct, shifted, epsilon = 1e-12);
    }

    #[test]
    fn eval_reference_shapes() {
        let r = eval_reference(&[1.0], 10).unwrap();
        assert_eq!(r.as_slice(), &[1.0; 10]);
        let r = eval_reference(&DEFAULT_EVAL_AMPLITUDES, DEFAULT_EVAL_DWELL).unwrap();
        assert_eq!(r.len(), 600);
        assert!(eval_reference(&[], 5).is_err());
        assert!(eval_reference(&[1.0], 0).is_err());
    }

    #[test]
    fn controller_output_is_causal() {
        // Perturbing the reference from index k onward must not change the
        // plant input before k + 1.
        let plant = HammersteinPlant::builtin(1).unwrap();
        let base = steps();
        let mut perturbed_vals = base.as_slice().to_vec();
        let k = 200;
        for v in &mut perturbed_vals[k..] {
            *v += 3.0;
        }
        let perturbed = Signal::new(perturbed_vals).unwrap();

        let mut c1 = Controller::ideal(1).unwrap();
        let a = simulate_closed_loop(&plant, &mut c1, &base, &NoiseSpec::off(), &reference_model())
            .unwrap();
        let mut c2 = Controller::ideal(1).unwrap();
        let b = simulate_closed_loop(
            &plant,
            &mut c2,
            &perturbed,
            &NoiseSpec::off(),
            &reference_model(),
        )
        .unwrap();
        // u(t) depends on e(1..t-1) only, so inputs agree through k + 1
        // samples (0-based index k).
        for t in 0..=k {
            assert_eq!(a.input()[t], b.input()[t], "u diverged at t = {}", t + 1);
        }
        assert_ne!(a.input()[k + 2], b.input()[k + 2]);
    }

    #[test]
    fn divergence_is_detected_and_truncated() {
        // A destabilizing static gain: huge negative feedback through the
        // integrator makes the loop blow up.
        let dict = crate::nonlin::Dictionary::polynomial_odd(1, 1.0).unwrap();
        let params = crate::solvers::ControllerParams::new(
            vec![-50.0],
            dict,
            0.0,
            crate::solvers::SolveDiagnostics {
                iterations: 0,
                converged: true,
                objective: 0.0,
                rank_deficient: false,
                notes: Vec::new(),
                objective_trace: None,
            },
        )
        .unwrap();
        let plant = HammersteinPlant::builtin(1).unwrap();
        let mut ctrl = Controller::from_params(params);
        let r = Signal::step(400).unwrap();
        let out =
            simulate_closed_loop(&plant, &mut ctrl, &r, &NoiseSpec::off(), &reference_model())
                .unwrap();
        assert!(!out.stable());
        let idx = out.divergence_index().unwrap();
        assert!(idx <= 400);
        assert_eq!(out.output().len(), idx - 1);
        assert_eq!(out.input().len(), idx - 1);
        assert!(out
            .output()
            .iter()
            .all(|v| v.abs() <= DIVERGENCE_LIMIT));
    }

    #[test]
    fn dictionary_controller_with_ideal_coefficients_tracks_reference() {
        let dict = crate::nonlin::Dictionary::deadzone(20, 200.0, 10.0).unwrap();
        let mut rho = vec![0.0; 20];
        rho[0] = 10.0;
        rho[2] = -7.2;
        rho[12] = 1.2;
        let params = crate::solvers::ControllerParams::new(
            rho,
            dict,
            0.0,
            crate::solvers::SolveDiagnostics {
                iterations: 0,
                converged: true,
                objective: 0.0,
                rank_deficient: false,
                notes: Vec::new(),
                objective_trace: None,
            },
        )
        .unwrap();
        let plant = HammersteinPlant::builtin(1).unwrap();
        let mut ctrl = Controller::from_params(params);
        let r = steps();
        let out =
            simulate_closed_loop(&plant, &mut ctrl, &r, &NoiseSpec::off(), &reference_model())
                .unwrap();
        assert!(out.stable());
        let worst = out
            .output()
            .iter()
            .zip(out.desired())
            .map(|(y, yd)| (y - yd).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "max deviation {worst}");
    }

    #[test]
    fn result_csv_has_header_and_rows() {
        let plant = HammersteinPlant::builtin(1).unwrap();
        let mut ctrl = Controller::ideal(1).unwrap();
        let r = Signal::step(5).unwrap();
        let out =
            simulate_closed_loop(&plant, &mut ctrl, &r, &NoiseSpec::off(), &reference_model())
                .unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,r,y,y_d,u\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
