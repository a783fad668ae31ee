//! Nonlinear mass-spring-damper ground truth, datasets and transition sets.
//!
//! `m ẍ = F − (K x + K_nl x²) − (c ẋ + c_nl ẋ²) − F_δ`, state `(x, ẋ)`, input `F`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("state became non-finite at step {0}")]
    NonFinite(usize),
    #[error("need at least {0} samples")]
    TooShort(usize),
    #[error("empty sample set")]
    EmptySample,
    #[error("triple dimension mismatch")]
    DimensionMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsdParams {
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub k_nl: f64,
    pub c_nl: f64,
    /// `F_δ` is drawn uniformly from `(−force_bound, force_bound)`.
    pub force_bound: f64,
    /// Range for resampling `(m, K, c)` at each sample instant.
    pub param_range: (f64, f64),
    pub resample: bool,
    pub sample_period: f64,
    pub substeps: usize,
    pub rng_seed: u64,
}

impl Default for MsdParams {
    fn default() -> Self {
        Self {
            mass: 0.5,
            stiffness: 0.5,
            damping: 0.5,
            k_nl: 0.12,
            c_nl: 0.12,
            force_bound: 0.12,
            param_range: (0.44, 0.56),
            resample: true,
            sample_period: 0.1,
            substeps: 10,
            rng_seed: 1,
        }
    }
}

impl MsdParams {
    /// Linear, noise-free, fixed-parameter variant.
    pub fn linear(mass: f64, stiffness: f64, damping: f64) -> Self {
        Self {
            mass,
            stiffness,
            damping,
            k_nl: 0.0,
            c_nl: 0.0,
            force_bound: 0.0,
            resample: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InputPolicy {
    /// Independent uniform draws from `[−bound, bound]`.
    Uniform { bound: f64 },
    Zero,
    Sequence(Vec<f64>),
}

/// One realization of the plant with its own random stream.
#[derive(Clone, Debug)]
pub struct MsdPlant {
    pub params: MsdParams,
    rng: ChaCha8Rng,
}

impl MsdPlant {
    pub fn new(params: MsdParams) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        Self { params, rng }
    }

    fn draw(&mut self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            self.rng.random_range(lo..hi)
        } else {
            lo
        }
    }

    /// Advance one sample period from `x` under the held input `u`.
    pub fn step(&mut self, x: [f64; 2], u: f64) -> [f64; 2] {
        let p = &self.params;
        let (lo, hi) = p.param_range;
        let resample = p.resample;
        let fb = p.force_bound;
        let (mut m, mut k, mut c) = (p.mass, p.stiffness, p.damping);
        if resample {
            m = self.draw(lo, hi);
            k = self.draw(lo, hi);
            c = self.draw(lo, hi);
        }
        let fd = if fb > 0.0 { self.draw(-fb, fb) } else { 0.0 };
        let p = &self.params;
        let (knl, cnl) = (p.k_nl, p.c_nl);
        let f = |s: [f64; 2]| -> [f64; 2] {
            let acc = (u - k * s[0] - knl * s[0] * s[0] - c * s[1] - cnl * s[1] * s[1] - fd) / m;
            [s[1], acc]
        };
        let h = p.sample_period / p.substeps as f64;
        let mut s = x;
        for _ in 0..p.substeps {
            let k1 = f(s);
            let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for i in 0..2 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s
    }

    pub fn input(&mut self, policy: &InputPolicy, t: usize) -> f64 {
        match policy {
            InputPolicy::Uniform { bound } => self.draw(-bound, *bound),
            InputPolicy::Zero => 0.0,
            InputPolicy::Sequence(v) => v.get(t).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Simulate `T` samples starting at `x0`; inputs are clipped to `±u_max`.
pub fn simulate_msd(
    params: &MsdParams,
    T: usize,
    policy: &InputPolicy,
    x0: [f64; 2],
    u_max: f64,
) -> Result<Dataset, PlantError> {
    if T < 2 {
        return Err(PlantError::TooShort(2));
    }
    let mut plant = MsdPlant::new(params.clone());
    let mut states = Vec::with_capacity(T);
    let mut inputs = Vec::with_capacity(T);
    let mut x = x0;
    for t in 0..T {
        let u = plant.input(policy, t).clamp(-u_max, u_max);
        states.push(x.to_vec());
        inputs.push(alloc::vec![u]);
        if t + 1 < T {
            x = plant.step(x, u);
            if !(x[0].is_finite() && x[1].is_finite()) {
                return Err(PlantError::NonFinite(t + 1));
            }
        }
    }
    Ok(Dataset {
        states,
        inputs,
        seed: params.rng_seed,
    })
}

/// Triples `z = (x, u, x₊)` stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    pub nx: usize,
    pub nu: usize,
    pub triples: Vec<Vec<f64>>,
}

impl TransitionSet {
    pub fn new(nx: usize, nu: usize, triples: Vec<Vec<f64>>) -> Result<Self, PlantError> {
        if triples.iter().any(|z| z.len() != 2 * nx + nu) {
            return Err(PlantError::DimensionMismatch);
        }
        Ok(Self { nx, nu, triples })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn x(&self, t: usize) -> &[f64] {
        &self.triples[t][..self.nx]
    }

    pub fn u(&self, t: usize) -> &[f64] {
        &self.triples[t][self.nx..self.nx + self.nu]
    }

    pub fn x_next(&self, t: usize) -> &[f64] {
        &self.triples[t][self.nx + self.nu..]
    }
}

pub fn build_transitions(d: &Dataset) -> Result<TransitionSet, PlantError> {
    if d.len() < 2 {
        return Err(PlantError::TooShort(2));
    }
    let nx = d.states[0].len();
    let nu = d.inputs[0].len();
    let triples = (0..d.len() - 1)
        .map(|t| {
            let mut z = d.states[t].clone();
            z.extend_from_slice(&d.inputs[t]);
            z.extend_from_slice(&d.states[t + 1]);
            z
        })
        .collect();
    TransitionSet::new(nx, nu, triples)
}

/// One-sided Hausdorff distance `max_{z*∈dense} min_{z∈sample} ‖z − z*‖∞`.
pub fn hausdorff_inf(dense: &TransitionSet, sample: &TransitionSet) -> Result<f64, PlantError> {
    if sample.is_empty() {
        return Err(PlantError::EmptySample);
    }
    if dense.nx != sample.nx || dense.nu != sample.nu {
        return Err(PlantError::DimensionMismatch);
    }
    let mut worst: f64 = 0.0;
    for zs in &dense.triples {
        let mut best = f64::INFINITY;
        for z in &sample.triples {
            let mut d: f64 = 0.0;
            for (a, b) in z.iter().zip(zs) {
                d = d.max((a - b).abs());
                if d >= best {
                    break;
                }
            }
            best = best.min(d);
            if best <= worst {
                break;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn equilibrium_stays_at_origin() {
        let p = MsdParams::linear(0.5, 0.5, 0.5);
        let d = simulate_msd(&p, 50, &InputPolicy::Zero, [0.0, 0.0], 2.5).unwrap();
        assert!(d.states.iter().all(|s| s[0] == 0.0 && s[1] == 0.0));
    }

    #[test]
    fn transitions_index_directly() {
        let d = Dataset {
            states: vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]],
            inputs: vec![vec![0.5], vec![0.6], vec![0.7]],
            seed: 0,
        };
        let j = build_transitions(&d).unwrap();
        assert_eq!(j.len(), 2);
        assert_eq!(j.triples[1], vec![2.0, 3.0, 0.6, 4.0, 5.0]);
        assert_eq!(j.x_next(0), j.x(1));
    }

    #[test]
    fn scalar_hausdorff() {
        let dense = TransitionSet {
            nx: 0,
            nu: 1,
            triples: vec![vec![0.0], vec![1.0]],
        };
        let sample = TransitionSet {
            nx: 0,
            nu: 1,
            triples: vec![vec![0.0]],
        };
        assert_eq!(hausdorff_inf(&dense, &sample).unwrap(), 1.0);
        assert_eq!(hausdorff_inf(&dense, &dense).unwrap(), 0.0);
        let empty = TransitionSet {
            nx: 0,
            nu: 1,
            triples: vec![],
        };
        assert_eq!(hausdorff_inf(&dense, &empty), Err(PlantError::EmptySample));
    }

    #[test]
    fn paper_plant_stays_finite_and_bounded() {
        let p = MsdParams::default();
        let d = simulate_msd(&p, 1000, &InputPolicy::Uniform { bound: 2.5 }, [0.0, 0.0], 2.5)
            .unwrap();
        assert_eq!(d.len(), 1000);
        assert!(d.states.iter().all(|s| s[0].abs() < 10.0 && s[1].abs() < 10.0));
        assert!(d.inputs.iter().all(|u| u[0].abs() <= 2.5));
    }

    #[test]
    fn same_seed_reproduces() {
        let p = MsdParams::default();
        let pol = InputPolicy::Uniform { bound: 2.5 };
        let a = simulate_msd(&p, 100, &pol, [0.0, 0.0], 2.5).unwrap();
        let b = simulate_msd(&p, 100, &pol, [0.0, 0.0], 2.5).unwrap();
        assert_eq!(a, b);
    }
}
