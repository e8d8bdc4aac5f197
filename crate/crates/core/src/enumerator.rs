//! Exact Boltzmann distribution over every map of a small grid.
//!
//! States are visited by a base-3 counter over parcels in row-major order,
//! parcel 0 being the least significant digit, so state `i` is
//! [`AllocationMap::from_state_index`]`(rows, cols, i)`.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::{
    evaluate, flip_delta, AllocationMap, LandUse, ModelParams, SuitabilityField, NUM_USES,
};

/// 3^16 states.
pub const DEFAULT_STATE_CAP: u64 = 43_046_721;

/// Use counts `[n_agriculture, n_construction, n_conservation]`.
pub type Composition = [usize; NUM_USES];

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub rows: usize,
    pub cols: usize,
    pub params: ModelParams,
    /// Objective of each state, indexed by state index.
    pub phi: Vec<f64>,
    pub probability: Vec<f64>,
    /// `ln Z` with `Z = sum exp(-phi / T)`.
    pub log_partition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactBin {
    pub probability: f64,
    /// `-T ln p`.
    pub free_energy: f64,
}

pub type CompositionLandscape = BTreeMap<Composition, ExactBin>;

fn state_count(cells: usize, cap: u64) -> Result<u64> {
    let required = (NUM_USES as u128).checked_pow(cells as u32).unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::EnumerationCap { required, cap });
    }
    Ok(required as u64)
}

pub fn enumerate_states(
    rows: usize,
    cols: usize,
    field: &SuitabilityField,
    params: &ModelParams,
) -> Result<ExactDistribution> {
    enumerate_states_capped(rows, cols, field, params, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_capped(
    rows: usize,
    cols: usize,
    field: &SuitabilityField,
    params: &ModelParams,
    cap: u64,
) -> Result<ExactDistribution> {
    params.validate()?;
    let mut map = AllocationMap::uniform(rows, cols, LandUse::Agriculture)?;
    field.check_matches(&map)?;
    let n_states = state_count(map.len(), cap)?;

    let mut phi_c = evaluate(&map, field, params)?.phi_c as i64;
    let mut phi = Vec::with_capacity(n_states as usize);
    for state in 0..n_states {
        if state > 0 {
            // Odometer increment; compactness is updated flip by flip so it
            // stays an exact integer.
            for idx in 0..map.len() {
                let next = LandUse::ALL[(map.at(idx).code() + 1) % NUM_USES];
                phi_c += flip_delta(&map, field, idx, next).d_phi_c;
                map.put(idx, next);
                if next != LandUse::Agriculture {
                    break;
                }
            }
        }
        let phi_s: f64 = map
            .cells()
            .iter()
            .enumerate()
            .map(|(idx, &u)| field.score(idx, u))
            .sum();
        phi.push(params.combine(phi_c as u64, phi_s));
    }

    let phi_min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut probability: Vec<f64> = phi
        .iter()
        .map(|&p| (-(p - phi_min) / params.temperature).exp())
        .collect();
    let z: f64 = probability.iter().sum();
    for p in &mut probability {
        *p /= z;
    }
    Ok(ExactDistribution {
        rows,
        cols,
        params: *params,
        phi,
        probability,
        log_partition: -phi_min / params.temperature + z.ln(),
    })
}

impl ExactDistribution {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn state(&self, index: u64) -> AllocationMap {
        AllocationMap::from_state_index(self.rows, self.cols, index).expect("index within table")
    }

    /// Lowest-objective state; ties go to the lowest index.
    pub fn argmin(&self) -> u64 {
        let mut best = 0;
        for (i, &p) in self.phi.iter().enumerate() {
            if p < self.phi[best] {
                best = i;
            }
        }
        best as u64
    }

    /// All states whose objective equals the minimum exactly.
    pub fn minimizers(&self) -> Vec<u64> {
        let min = self.phi[self.argmin() as usize];
        (0..self.phi.len() as u64)
            .filter(|&i| self.phi[i as usize] == min)
            .collect()
    }

    /// Most probable state; ties go to the lowest index.
    pub fn mode(&self) -> u64 {
        let mut best = 0;
        for (i, &p) in self.probability.iter().enumerate() {
            if p > self.probability[best] {
                best = i;
            }
        }
        best as u64
    }

    /// Marginal distribution over use-count triples.
    pub fn composition_landscape(&self) -> CompositionLandscape {
        let mut probs: BTreeMap<Composition, f64> = BTreeMap::new();
        let n = self.rows * self.cols;
        let mut digits = vec![0usize; n];
        let mut counts = [0usize; NUM_USES];
        counts[0] = n;
        for (state, &p) in self.probability.iter().enumerate() {
            if state > 0 {
                for d in digits.iter_mut() {
                    counts[*d] -= 1;
                    *d = (*d + 1) % NUM_USES;
                    counts[*d] += 1;
                    if *d != 0 {
                        break;
                    }
                }
            }
            *probs.entry(counts).or_insert(0.0) += p;
        }
        let t = self.params.temperature;
        probs
            .into_iter()
            .map(|(c, p)| {
                (
                    c,
                    ExactBin {
                        probability: p,
                        free_energy: -t * p.ln(),
                    },
                )
            })
            .collect()
    }

    /// `state,map,phi,probability`, one row per state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "state,map,phi,probability")?;
        for (i, (phi, p)) in self.phi.iter().zip(&self.probability).enumerate() {
            writeln!(out, "{i},{},{phi},{p}", self.state(i as u64))?;
        }
        Ok(())
    }
}

pub fn exact_composition_landscape(
    rows: usize,
    cols: usize,
    field: &SuitabilityField,
    params: &ModelParams,
) -> Result<CompositionLandscape> {
    Ok(enumerate_states(rows, cols, field, params)?.composition_landscape())
}

/// `n0,n1,n2,probability,free_energy`.
pub fn write_landscape_csv<W: Write>(landscape: &CompositionLandscape, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n0,n1,n2,probability,free_energy")?;
    for (c, bin) in landscape {
        writeln!(
            out,
            "{},{},{},{},{}",
            c[0], c[1], c[2], bin.probability, bin.free_energy
        )?;
    }
    Ok(())
}
