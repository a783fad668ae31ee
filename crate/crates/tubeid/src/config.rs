//! Flat TOML configuration. Every key is optional; defaults describe the
//! mass-spring-damper example.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tubeid_core::init::InitConfig;
use tubeid_core::linalg::{Mat, Vector};
use tubeid_core::plant::{InputPolicy, MsdParams};
use tubeid_core::polytope::{uniform_normals, SymPolytope};
use tubeid_core::scp::ScpConfig;
use tubeid_core::setup::{FixedShapes, Weights};

use crate::error::{Failure, Stage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Number of recorded samples `T`.
    pub samples: usize,
    pub sample_period: f64,
    pub substeps: usize,
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub k_nl: f64,
    pub c_nl: f64,
    pub force_bound: f64,
    pub param_min: f64,
    pub param_max: f64,
    pub resample_params: bool,
    /// Training inputs are i.i.d. uniform on `±excitation`, clipped to `U`.
    pub excitation: f64,
    pub x0: [f64; 2],
    /// Held-out data uses `seed + validation_seed_offset`.
    pub validation_seed_offset: u64,
    pub validation_samples: usize,

    pub x_max: f64,
    pub u_max: f64,
    pub m_w: usize,
    pub m_tube: usize,
    pub m_term: usize,
    pub m_eps: usize,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Diagonal of `Q̃`.
    pub q_perf: Vec<f64>,
    /// Diagonal of `R̃`.
    pub r_perf: Vec<f64>,

    pub delta_rpi: f64,
    pub init_sdp_margin: f64,
    pub multiplier_min: f64,
    pub multiplier_max: f64,
    pub gain_r_scales: Vec<f64>,
    pub max_terminal_steps: usize,

    pub max_iters: usize,
    pub rel_decrease_tol: f64,
    pub eps_psd: f64,
    /// Also run the fixed-model comparison in `run`.
    pub compare_fixed: bool,
    /// θ̂ values for the sensitivity table written by `run` (empty: skip).
    pub theta_sweep: Vec<f64>,

    pub horizon: usize,
    pub mpc_runs: usize,
    pub mpc_steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        let init = InitConfig::default();
        let scp = ScpConfig::default();
        Self {
            seed: 1,
            samples: 1000,
            sample_period: 0.1,
            substeps: 10,
            mass: 0.5,
            stiffness: 0.5,
            damping: 0.5,
            k_nl: 0.12,
            c_nl: 0.12,
            force_bound: 0.12,
            param_min: 0.44,
            param_max: 0.56,
            resample_params: true,
            excitation: 2.0,
            x0: [0.0, 0.0],
            validation_seed_offset: 1000,
            validation_samples: 1000,
            x_max: 0.8,
            u_max: 2.5,
            m_w: 10,
            m_tube: 10,
            m_term: 15,
            m_eps: 10,
            theta: 1e-3,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.1,
            q_perf: vec![1.0, 15.0],
            r_perf: vec![1.0],
            delta_rpi: init.delta_rpi,
            init_sdp_margin: init.step5_margin,
            multiplier_min: init.multiplier_bounds.0,
            multiplier_max: init.multiplier_bounds.1,
            gain_r_scales: init.gain_r_scales,
            max_terminal_steps: init.max_terminal_steps,
            max_iters: scp.max_iters,
            rel_decrease_tol: scp.rel_decrease_tol,
            eps_psd: scp.eps_psd,
            compare_fixed: true,
            theta_sweep: Vec::new(),
            horizon: tubeid_core::tube_mpc::DEFAULT_HORIZON,
            mpc_runs: 20,
            mpc_steps: 100,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, Failure> {
        let cfg: Self = toml::from_str(text).map_err(|e| Failure::bad_input(Stage::Config, e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::bad_input(Stage::Config, format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn check(&self) -> Result<(), Failure> {
        let bad = |m: &str| Err(Failure::bad_input(Stage::Config, m.to_string()));
        if self.samples < 2 || self.validation_samples < 2 {
            return bad("need at least two samples");
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return bad("theta must be finite and nonnegative");
        }
        if self.q_perf.len() != 2 || self.r_perf.len() != 1 {
            return bad("q_perf needs 2 entries and r_perf 1");
        }
        if self.q_perf.iter().chain(&self.r_perf).any(|&v| v <= 0.0) {
            return bad("performance weights must be positive");
        }
        if self.x_max <= 0.0 || self.u_max <= 0.0 {
            return bad("constraint bounds must be positive");
        }
        if [self.m_w, self.m_tube, self.m_term, self.m_eps].contains(&0) {
            return bad("normal counts must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        Ok(())
    }

    pub fn plant(&self, seed: u64) -> MsdParams {
        MsdParams {
            mass: self.mass,
            stiffness: self.stiffness,
            damping: self.damping,
            k_nl: self.k_nl,
            c_nl: self.c_nl,
            force_bound: self.force_bound,
            param_range: (self.param_min, self.param_max),
            resample: self.resample_params,
            sample_period: self.sample_period,
            substeps: self.substeps,
            rng_seed: seed,
        }
    }

    pub fn excitation_policy(&self) -> InputPolicy {
        InputPolicy::Uniform { bound: self.excitation }
    }

    pub fn validation_seed(&self) -> u64 {
        self.seed.wrapping_add(self.validation_seed_offset)
    }

    pub fn shapes(&self) -> FixedShapes {
        FixedShapes::new(
            uniform_normals(self.m_tube),
            uniform_normals(self.m_term),
            uniform_normals(self.m_w),
            uniform_normals(self.m_eps),
            &SymPolytope::hypercube(2, self.x_max),
            &SymPolytope::hypercube(1, self.u_max),
            Weights {
                alpha: self.alpha,
                beta: self.beta,
                gamma: self.gamma,
            },
            Mat::from_diagonal(&Vector::from_row_slice(&self.q_perf)),
            Mat::from_diagonal(&Vector::from_row_slice(&self.r_perf)),
        )
        .expect("box constraint sets are well formed")
    }

    pub fn init_config(&self) -> InitConfig {
        InitConfig {
            theta: self.theta,
            delta_rpi: self.delta_rpi,
            step5_margin: self.init_sdp_margin,
            multiplier_bounds: (self.multiplier_min, self.multiplier_max),
            gain_r_scales: self.gain_r_scales.clone(),
            max_terminal_steps: self.max_terminal_steps,
            ..InitConfig::default()
        }
    }

    pub fn scp_config(&self, fix_model: bool) -> ScpConfig {
        ScpConfig {
            max_iters: self.max_iters,
            rel_decrease_tol: self.rel_decrease_tol,
            fix_model,
            eps_psd: self.eps_psd,
            theta: self.theta,
            ..ScpConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn round_trip_and_overrides() {
        let cfg = Config::from_toml("seed = 7\ntheta = 1.2e-3\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.theta, 1.2e-3);
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Config::from_toml("sede = 1").is_err());
        assert!(Config::from_toml("q_perf = [1.0]").is_err());
        assert!(Config::from_toml("theta = -1.0").is_err());
    }

    #[test]
    fn default_shapes_match_the_example_dimensions() {
        let s = Config::default().shapes();
        assert_eq!((s.mw(), s.m_tube(), s.m_term(), s.m_eps()), (10, 10, 15, 10));
        assert_eq!(s.X_vertices.len(), 4);
    }
}
