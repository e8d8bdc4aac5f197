//! Markov chains over allocation maps with stationary distribution
//! `p ∝ exp(-phi / T)`.
//!
//! Three engines share one chain driver:
//!
//! * `metropolis`: a sweep is `rows * cols` single-parcel proposals.
//! * `cluster`: a sweep is a fixed number of cluster updates, chosen so the
//!   clusters cover about `rows * cols` parcels. During burn-in (at least
//!   the first sweep) each sweep instead runs updates until the covered size
//!   reaches `rows * cols`; the mean number of updates that took is then
//!   frozen. Stopping on covered size after burn-in would make the stopping
//!   time depend on the path and bias the states seen at sweep ends.
//! * `hybrid`: one Metropolis sweep followed by one cluster sweep. Both
//!   kernels leave the target distribution invariant, so their composition
//!   does too; on large ordered grids the single flips move domain walls and
//!   the cluster moves relabel whole domains.

mod cluster;
mod metropolis;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cluster::{bond_probability, cluster_step, ClusterOutcome, ClusterWorkspace};
pub use metropolis::{metropolis_sweep, SweepStats};

use crate::error::{Error, Result};
use crate::lattice::{evaluate, AllocationMap, LandUse, ModelParams, ObjectiveValue, SuitabilityField, NUM_USES};
use crate::rng::{rng_from_seed, ModelRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Metropolis,
    Cluster,
    Hybrid,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Metropolis, Engine::Cluster, Engine::Hybrid];

    /// Bumped whenever an engine's trajectory for a given seed changes.
    pub fn version(self) -> &'static str {
        match self {
            Engine::Metropolis => "metropolis-1",
            Engine::Cluster => "cluster-1",
            Engine::Hybrid => "hybrid-1",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Metropolis => "metropolis",
            Engine::Cluster => "cluster",
            Engine::Hybrid => "hybrid",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metropolis" => Ok(Engine::Metropolis),
            "cluster" => Ok(Engine::Cluster),
            "hybrid" => Ok(Engine::Hybrid),
            other => Err(Error::Config(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "map")]
pub enum InitState {
    /// Every parcel drawn uniformly from the three uses.
    RandomUniform,
    /// Start from a given map, stored as a code string.
    Fixed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainConfig {
    pub engine: Engine,
    pub seed: u64,
    pub chain_id: u64,
    pub burn_in_sweeps: u64,
    pub sample_interval_sweeps: u64,
    pub n_samples: u64,
    pub init: InitState,
}

impl ChainConfig {
    pub fn new(engine: Engine, seed: u64) -> Self {
        ChainConfig {
            engine,
            seed,
            chain_id: 0,
            burn_in_sweeps: 1000,
            sample_interval_sweeps: 10,
            n_samples: 100,
            init: InitState::RandomUniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_interval_sweeps == 0 {
            return Err(Error::Validation(
                "sample interval must be at least one sweep".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub map: AllocationMap,
    pub objective: ObjectiveValue,
    pub use_fractions: [f64; NUM_USES],
    pub chain_id: u64,
    /// Sweeps completed (burn-in included) when the sample was taken.
    pub sweep_index: u64,
}

impl SampleRecord {
    pub fn counts(&self) -> [usize; NUM_USES] {
        self.map.counts()
    }
}

/// A running chain: the current map plus incrementally tracked objective
/// components.
pub struct Chain<'a> {
    config: ChainConfig,
    field: &'a SuitabilityField,
    params: ModelParams,
    map: AllocationMap,
    rng: ModelRng,
    workspace: ClusterWorkspace,
    p_bond: f64,
    phi_c: i64,
    phi_s: f64,
    sweeps: u64,
    emitted: u64,
    burned_in: bool,
    /// Cluster updates per sweep once frozen.
    cluster_steps: Option<u64>,
    pilot_steps: u64,
}

impl<'a> Chain<'a> {
    pub fn new(config: ChainConfig, field: &'a SuitabilityField, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        let mut rng = rng_from_seed(config.seed);
        let map = match &config.init {
            InitState::RandomUniform => {
                let cells = (0..field.rows() * field.cols())
                    .map(|_| LandUse::ALL[rng.random_range(0..NUM_USES)])
                    .collect();
                AllocationMap::new(field.rows(), field.cols(), cells)?
            }
            InitState::Fixed(code) => AllocationMap::from_code_string(code)?,
        };
        let start = evaluate(&map, field, &params)?;
        Ok(Chain {
            p_bond: bond_probability(&params),
            workspace: ClusterWorkspace::new(map.len()),
            phi_c: start.phi_c as i64,
            phi_s: start.phi_s,
            config,
            field,
            params,
            map,
            rng,
            sweeps: 0,
            emitted: 0,
            burned_in: false,
            cluster_steps: None,
            pilot_steps: 0,
        })
    }

    pub fn state(&self) -> &AllocationMap {
        &self.map
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// Objective assembled from the incrementally tracked components.
    pub fn tracked_objective(&self) -> ObjectiveValue {
        ObjectiveValue {
            phi: self.params.combine(self.phi_c as u64, self.phi_s),
            phi_c: self.phi_c as u64,
            phi_s: self.phi_s,
        }
    }

    fn metropolis_sweep(&mut self) {
        for _ in 0..self.map.len() {
            if let Some(d) =
                metropolis::metropolis_proposal(&mut self.map, self.field, &self.params, &mut self.rng)
            {
                self.phi_c += d.d_phi_c;
                self.phi_s += d.d_phi_s;
            }
        }
    }

    fn cluster_update(&mut self) -> usize {
        let out = self.workspace.step(
            &mut self.map,
            self.field,
            &self.params,
            self.p_bond,
            &mut self.rng,
        );
        self.phi_c += out.d_phi_c;
        self.phi_s += out.d_phi_s;
        out.size
    }

    fn cluster_sweep(&mut self) {
        match self.cluster_steps {
            Some(n) => {
                for _ in 0..n {
                    self.cluster_update();
                }
            }
            None => {
                let mut covered = 0;
                while covered < self.map.len() {
                    covered += self.cluster_update();
                    self.pilot_steps += 1;
                }
            }
        }
    }

    /// Cluster updates per sweep, once frozen.
    pub fn cluster_steps_per_sweep(&self) -> Option<u64> {
        self.cluster_steps
    }

    /// Advances the chain by one sweep of its engine.
    pub fn sweep(&mut self) {
        match self.config.engine {
            Engine::Metropolis => self.metropolis_sweep(),
            Engine::Cluster => self.cluster_sweep(),
            Engine::Hybrid => {
                self.metropolis_sweep();
                self.cluster_sweep();
            }
        }
        self.sweeps += 1;
        if self.config.engine != Engine::Metropolis
            && self.cluster_steps.is_none()
            && self.sweeps >= self.config.burn_in_sweeps.max(1)
        {
            let mean = (self.pilot_steps as f64 / self.sweeps as f64).round() as u64;
            self.cluster_steps = Some(mean.max(1));
        }
    }

    fn record(&mut self) -> SampleRecord {
        let objective =
            evaluate(&self.map, self.field, &self.params).expect("chain map matches its field");
        debug_assert_eq!(objective.phi_c as i64, self.phi_c);
        debug_assert!((objective.phi_s - self.phi_s).abs() < 1e-6);
        // Resynchronise the running sum so rounding never accumulates.
        self.phi_s = objective.phi_s;
        SampleRecord {
            use_fractions: self.map.use_fractions(),
            map: self.map.clone(),
            objective,
            chain_id: self.config.chain_id,
            sweep_index: self.sweeps,
        }
    }
}

impl Iterator for Chain<'_> {
    type Item = SampleRecord;

    fn next(&mut self) -> Option<SampleRecord> {
        if self.emitted >= self.config.n_samples {
            return None;
        }
        if !self.burned_in {
            for _ in 0..self.config.burn_in_sweeps {
                self.sweep();
            }
            self.burned_in = true;
        }
        for _ in 0..self.config.sample_interval_sweeps {
            self.sweep();
        }
        self.emitted += 1;
        Some(self.record())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.config.n_samples - self.emitted) as usize;
        (left, Some(left))
    }
}

/// Starts a chain; the returned iterator yields `n_samples` records.
pub fn run_chain(
    config: ChainConfig,
    field: &SuitabilityField,
    params: ModelParams,
) -> Result<Chain<'_>> {
    Chain::new(config, field, params)
}
