//! Hammerstein benchmark plants, measurement noise, and the excitation-input
//! generator: a shaping filter built from the reference model drives either
//! uniform noise or a step pattern into the plant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lti::{conv, deflate_root, filter, poly_sub, polyval, Signal, TransferFunction, DEFLATE_TOL};
use crate::nonlin::PiecewiseAffineMap;

/// Default amplitude of the raw excitation sequence before shaping. Chosen
/// so that the shaped input drives the regressor state across the full
/// dictionary scale (about +/-200 for the benchmark setups).
pub const DEFAULT_INPUT_AMPLITUDE: f64 = 25.0;

/// Default dwell, in samples, of each level of the raw step sequence.
pub const DEFAULT_STEP_DWELL: usize = 100;

/// Static nonlinearity followed by a strictly proper linear block.
#[derive(Debug, Clone)]
pub struct HammersteinPlant {
    input_nonlinearity: PiecewiseAffineMap,
    linear_block: TransferFunction,
    label: String,
}

impl HammersteinPlant {
    pub fn new(
        input_nonlinearity: PiecewiseAffineMap,
        linear_block: TransferFunction,
        label: impl Into<String>,
    ) -> Result<Self> {
        if linear_block.relative_degree() < 1 {
            return Err(Error::NotStrictlyProper);
        }
        Ok(Self {
            input_nonlinearity,
            linear_block,
            label: label.into(),
        })
    }

    /// The two benchmark plants. Both share the same input nonlinearity;
    /// plant 1 has a first-order linear block, plant 2 a second-order one
    /// with a zero at the origin.
    pub fn builtin(id: u8) -> Result<Self> {
        let linear_block = match id {
            1 => TransferFunction::new(vec![0.2], vec![1.0, -0.8])?,
            2 => TransferFunction::new(vec![0.04, 0.0], vec![1.0, -1.6, 0.64])?,
            _ => return Err(Error::UnknownPlant { id }),
        };
        Self::new(benchmark_nonlinearity(), linear_block, format!("plant-{id}"))
    }

    pub fn input_nonlinearity(&self) -> &PiecewiseAffineMap {
        &self.input_nonlinearity
    }

    pub fn linear_block(&self) -> &TransferFunction {
        &self.linear_block
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// The piecewise-affine input nonlinearity shared by both benchmark plants:
/// slope 1 on |x| < 1, slope 5 on 1 < |x| < 2, slope 2 outside.
pub fn benchmark_nonlinearity() -> PiecewiseAffineMap {
    PiecewiseAffineMap::new(vec![-2.0, -1.0, 1.0, 2.0], vec![2.0, 5.0, 1.0, 5.0, 2.0], 0.0)
        .expect("benchmark nonlinearity is valid")
}

/// Zero-mean gaussian measurement noise from a seeded generator (ChaCha8
/// keyed by the seed; samples drawn with the ziggurat method).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::NegativeSigma { sigma });
        }
        Ok(Self { sigma, seed })
    }

    /// No noise at all.
    pub fn off() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws n samples. Identical (sigma, seed, n) always yields the same
    /// sequence.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        if self.sigma == 0.0 {
            return vec![0.0; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated at construction");
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    }

    /// Streaming sampler over the same sequence as [`NoiseSpec::sample`].
    pub fn sampler(&self) -> NoiseSampler {
        NoiseSampler {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            normal: if self.sigma > 0.0 {
                Some(Normal::new(0.0, self.sigma).expect("sigma validated at construction"))
            } else {
                None
            },
        }
    }
}

/// Draws the noise sequence one sample at a time.
pub struct NoiseSampler {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl NoiseSampler {
    pub fn next_sample(&mut self) -> f64 {
        match &self.normal {
            Some(normal) => normal.sample(&mut self.rng),
            None => 0.0,
        }
    }
}

/// Open-loop plant response: the input passes through the static
/// nonlinearity, then the linear block (zero initial conditions), and
/// measurement noise is added to the output.
pub fn simulate_plant(plant: &HammersteinPlant, u: &Signal, noise: &NoiseSpec) -> Result<Signal> {
    let through_nonlinearity = Signal::new(
        u.iter()
            .map(|&x| plant.input_nonlinearity.eval(x))
            .collect(),
    )?;
    let clean = filter(&plant.linear_block, &through_nonlinearity)?;
    let nu = noise.sample(u.len());
    Signal::new(
        clean
            .iter()
            .zip(nu)
            .map(|(y, v)| y + v)
            .collect(),
    )
}

/// Builds the excitation shaping filter F = Td (1 - Td) a / (z - 1), with the
/// (z - 1) factor cancelled exactly against the numerator of 1 - Td and the
/// gain a tuned so that F(1) = 1. Returns the filter and the tuned a.
pub fn excitation_filter(td: &TransferFunction) -> Result<(TransferFunction, f64)> {
    let gain = td.dc_gain()?;
    if (gain - 1.0).abs() > 1e-9 {
        return Err(Error::ReferenceGainNotUnity { gain, tol: 1e-9 });
    }
    // 1 - Td = (den - num) / den; Td(1) = 1 makes z = 1 a root of den - num.
    let one_minus_td_num = poly_sub(td.den(), td.num());
    let cancelled = deflate_root(&one_minus_td_num, 1.0, DEFLATE_TOL)?;
    let num = conv(td.num(), &cancelled);
    let den = conv(td.den(), td.den());
    let unit_gain = polyval(&num, 1.0) / polyval(&den, 1.0);
    let a = 1.0 / unit_gain;
    let f = TransferFunction::new(num.iter().map(|c| c * a).collect(), den)?;
    Ok((f, a))
}

/// Shape of the raw excitation sequence before shaping by F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    /// I.i.d. uniform samples on [-amplitude, amplitude].
    Random,
    /// Piecewise-constant levels cycling through
    /// amplitude * {0.25, -0.25, 0.6, -0.6, 1.0, -1.0}, each held `dwell`
    /// samples.
    Steps { dwell: usize },
}

/// Generates an excitation input of length n: the raw sequence of the given
/// kind, filtered by the excitation filter built from `td`.
pub fn gen_input(
    kind: InputKind,
    n: usize,
    amplitude: f64,
    seed: u64,
    td: &TransferFunction,
) -> Result<Signal> {
    let (shaping, _) = excitation_filter(td)?;
    let raw = match kind {
        InputKind::Random => {
            if amplitude == 0.0 {
                vec![0.0; n]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(-amplitude..=amplitude)).collect()
            }
        }
        InputKind::Steps { dwell } => {
            if dwell == 0 {
                return Err(Error::ZeroDwell);
            }
            let pattern = [0.25, -0.25, 0.6, -0.6, 1.0, -1.0];
            (0..n)
                .map(|t| amplitude * pattern[(t / dwell) % pattern.len()])
                .collect()
        }
    };
    filter(&shaping, &Signal::new(raw)?)
}

/// Derives an independent stream seed from a base seed (splitmix64 over the
/// base combined with the stream index), so concurrent experiment cells can
/// share one configured seed without sharing generator state.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_model() -> TransferFunction {
        TransferFunction::new(vec![0.01], vec![1.0, -1.8, 0.81]).unwrap()
    }

    #[test]
    fn builtin_plants_match_published_blocks() {
        let p1 = HammersteinPlant::builtin(1).unwrap();
        assert_eq!(p1.linear_block().num(), &[0.2]);
        assert_eq!(p1.linear_block().den(), &[1.0, -0.8]);
        let p2 = HammersteinPlant::builtin(2).unwrap();
        assert_eq!(p2.linear_block().num(), &[0.04, 0.0]);
        assert_eq!(p2.linear_block().den(), &[1.0, -1.6, 0.64]);
        assert_eq!(p1.input_nonlinearity(), p2.input_nonlinearity());
        assert!(matches!(
            HammersteinPlant::builtin(3),
            Err(Error::UnknownPlant { id: 3 })
        ));
    }

    #[test]
    fn zero_input_zero_noise_gives_zero_output() {
        let plant = HammersteinPlant::builtin(1).unwrap();
        let y = simulate_plant(&plant, &Signal::zeros(100).unwrap(), &NoiseSpec::off()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_input_settles_at_nonlinearity_times_dc_gain() {
        let p1 = HammersteinPlant::builtin(1).unwrap();
        let y1 = simulate_plant(&p1, &Signal::constant(0.5, 400).unwrap(), &NoiseSpec::off())
            .unwrap();
        assert_relative_eq!(y1.as_slice()[399], 0.5, epsilon = 1e-9);

        let p2 = HammersteinPlant::builtin(2).unwrap();
        let y2 = simulate_plant(&p2, &Signal::constant(3.0, 800).unwrap(), &NoiseSpec::off())
            .unwrap();
        assert_relative_eq!(y2.as_slice()[799], 8.0, epsilon = 1e-6);
    }

    #[test]
    fn identity_nonlinearity_reduces_to_linear_filtering() {
        let block = TransferFunction::new(vec![0.2], vec![1.0, -0.8]).unwrap();
        let plant =
            HammersteinPlant::new(PiecewiseAffineMap::identity(), block.clone(), "linear").unwrap();
        let u = Signal::new((0..200).map(|t| ((t % 17) as f64 - 8.0) / 3.0).collect()).unwrap();
        let direct = filter(&block, &u).unwrap();
        let via_plant = simulate_plant(&plant, &u, &NoiseSpec::off()).unwrap();
        for (a, b) in via_plant.iter().zip(direct.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_region_inputs_bypass_the_nonlinearity() {
        let plant = HammersteinPlant::builtin(1).unwrap();
        let u = Signal::new((0..100).map(|t| 0.9 * ((t as f64) * 0.37).sin()).collect()).unwrap();
        let direct = filter(plant.linear_block(), &u).unwrap();
        let via_plant = simulate_plant(&plant, &u, &NoiseSpec::off()).unwrap();
        for (a, b) in via_plant.iter().zip(direct.iter()) {
            assert_relative_eq!(a, b, epsilon = 0.0);
        }
    }

    #[test]
    fn excitation_filter_for_benchmark_reference_model() {
        let (f, a) = excitation_filter(&reference_model()).unwrap();
        // Evaluating (z - 0.9)^4 at z = 1 cancels down to 1e-4, so a carries
        // a few units of 1e-12 relative error; it still lands within 1e-12
        // absolute of the exact 1/20.
        assert_relative_eq!(a, 0.05, epsilon = 1e-12);
        // F = 0.0005 (z - 0.8) / (z - 0.9)^4
        assert_relative_eq!(f.num()[0], 0.0005, max_relative = 1e-10);
        assert_relative_eq!(f.num()[1], -0.0004, max_relative = 1e-10);
        let den4 = [1.0, -3.6, 4.86, -2.916, 0.6561];
        for (got, want) in f.den().iter().zip(den4) {
            assert_relative_eq!(got, &want, epsilon = 1e-12);
        }
        assert_relative_eq!(f.dc_gain().unwrap(), 1.0, epsilon = 1e-12);
        assert!(f.is_stable());
        assert_eq!(f.relative_degree(), 3);
    }

    #[test]
    fn excitation_filter_rejects_non_unity_reference() {
        let td = TransferFunction::new(vec![0.02], vec![1.0, -1.8, 0.81]).unwrap();
        assert!(matches!(
            excitation_filter(&td),
            Err(Error::ReferenceGainNotUnity { .. })
        ));
    }

    #[test]
    fn gen_input_is_deterministic_and_scales() {
        let td = reference_model();
        let a = gen_input(InputKind::Random, 500, 10.0, 42, &td).unwrap();
        let b = gen_input(InputKind::Random, 500, 10.0, 42, &td).unwrap();
        assert_eq!(a, b);
        let c = gen_input(InputKind::Random, 500, 10.0, 43, &td).unwrap();
        assert_ne!(a, c);
        let zero = gen_input(InputKind::Random, 64, 0.0, 42, &td).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_input_cycles_through_levels() {
        let td = reference_model();
        // Dwell comfortably beyond the shaping filter's settling, so each
        // level is reached before the next switch.
        let s = gen_input(InputKind::Steps { dwell: 150 }, 900, 10.0, 0, &td).unwrap();
        assert_relative_eq!(s.as_slice()[149], 2.5, epsilon = 0.05);
        assert_relative_eq!(s.as_slice()[299], -2.5, epsilon = 0.1);
        assert_relative_eq!(s.as_slice()[449], 6.0, epsilon = 0.2);
        assert_relative_eq!(s.as_slice()[899], -10.0, epsilon = 0.5);
        assert!(matches!(
            gen_input(InputKind::Steps { dwell: 0 }, 10, 1.0, 0, &td),
            Err(Error::ZeroDwell)
        ));
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let spec = NoiseSpec::new(0.05, 7).unwrap();
        let n = 100_000;
        let samples = spec.sample(n);
        let mean: f64 = samples.iter().sum::<f64>() / n as f64;
        let var: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * 0.05 / (n as f64).sqrt());
        assert!((var.sqrt() - 0.05).abs() < 0.02 * 0.05);
        assert_eq!(samples, spec.sample(n));

        let mut streaming = spec.sampler();
        for &v in samples.iter().take(100) {
            assert_eq!(streaming.next_sample(), v);
        }

        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        let s0 = derive_seed(1, 0);
        let s1 = derive_seed(1, 1);
        let t0 = derive_seed(2, 0);
        assert_ne!(s0, s1);
        assert_ne!(s0, t0);
        assert_eq!(s0, derive_seed(1, 0));
    }
}
