//! Wolff-style cluster update for the three-state model with a
//! parcel-dependent field.
//!
//! The cluster grows over same-use Moore bonds, each activated with
//! probability `1 - exp(-2 P_C / T)`; breaking one matching pair costs
//! `2 P_C` because `phi_c` counts it from both ends. Growth alone satisfies
//! detailed balance for the compactness term. The suitability term is then
//! handled by a Metropolis test on the whole-cluster relabelling.

use rand::Rng;

use crate::error::Result;
use crate::lattice::{for_each_neighbor, AllocationMap, LandUse, ModelParams, SuitabilityField};

/// Probability of activating a bond between two same-use neighbours.
pub fn bond_probability(params: &ModelParams) -> f64 {
    1.0 - (-2.0 * params.p_compact / params.temperature).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOutcome {
    pub size: usize,
    pub from: LandUse,
    pub to: LandUse,
    pub accepted: bool,
    pub d_phi_c: i64,
    pub d_phi_s: f64,
}

/// Scratch buffers reused across cluster steps.
#[derive(Debug, Clone, Default)]
pub struct ClusterWorkspace {
    in_cluster: Vec<bool>,
    members: Vec<usize>,
}

impl ClusterWorkspace {
    pub fn new(cells: usize) -> Self {
        ClusterWorkspace {
            in_cluster: vec![false; cells],
            members: Vec::with_capacity(cells),
        }
    }

    pub(crate) fn step<R: Rng + ?Sized>(
        &mut self,
        map: &mut AllocationMap,
        field: &SuitabilityField,
        params: &ModelParams,
        p_bond: f64,
        rng: &mut R,
    ) -> ClusterOutcome {
        let (rows, cols) = (map.rows(), map.cols());
        if self.in_cluster.len() != map.len() {
            self.in_cluster = vec![false; map.len()];
        }
        let seed = rng.random_range(0..map.len());
        let from = map.at(seed);
        let to = from.others()[rng.random_range(0..2usize)];

        self.members.clear();
        self.members.push(seed);
        self.in_cluster[seed] = true;
        let mut head = 0;
        while head < self.members.len() {
            let site = self.members[head];
            head += 1;
            for_each_neighbor(rows, cols, site, |nb| {
                if !self.in_cluster[nb] && map.at(nb) == from && rng.random::<f64>() < p_bond {
                    self.in_cluster[nb] = true;
                    self.members.push(nb);
                }
            });
        }

        let d_phi_s: f64 = self
            .members
            .iter()
            .map(|&idx| field.score(idx, to) - field.score(idx, from))
            .sum();
        let d_phi_field = -params.p_suit * d_phi_s;
        let accepted = d_phi_field <= 0.0
            || rng.random::<f64>() < (-d_phi_field / params.temperature).exp();

        let mut d_phi_c = 0i64;
        if accepted {
            for &site in &self.members {
                for_each_neighbor(rows, cols, site, |nb| {
                    if !self.in_cluster[nb] {
                        let u = map.at(nb);
                        d_phi_c += (u == to) as i64 - (u == from) as i64;
                    }
                });
            }
            for &site in &self.members {
                map.put(site, to);
            }
        }
        for &site in &self.members {
            self.in_cluster[site] = false;
        }

        ClusterOutcome {
            size: self.members.len(),
            from,
            to,
            accepted,
            d_phi_c: 2 * d_phi_c,
            d_phi_s: if accepted { d_phi_s } else { 0.0 },
        }
    }
}

/// One cluster update on `map`.
pub fn cluster_step<R: Rng + ?Sized>(
    map: &mut AllocationMap,
    field: &SuitabilityField,
    params: &ModelParams,
    rng: &mut R,
) -> Result<ClusterOutcome> {
    field.check_matches(map)?;
    params.validate()?;
    let mut ws = ClusterWorkspace::new(map.len());
    Ok(ws.step(map, field, params, bond_probability(params), rng))
}
