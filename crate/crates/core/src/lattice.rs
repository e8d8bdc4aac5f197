//! Grid state, suitability field and the weighted objective
//! `phi = -P_C * phi_c - P_S * phi_s`.
//!
//! Compactness counts, for every parcel, the Moore neighbours that carry the
//! same use, so each matching unordered pair contributes 2. Boundaries are
//! open: neighbours that fall outside the grid contribute nothing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of land uses the model supports.
pub const NUM_USES: usize = 3;

/// Moore neighbourhood offsets `(d_row, d_col)`.
pub const MOORE_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum LandUse {
    Agriculture = 0,
    Construction = 1,
    Conservation = 2,
}

impl LandUse {
    pub const ALL: [LandUse; NUM_USES] = [
        LandUse::Agriculture,
        LandUse::Construction,
        LandUse::Conservation,
    ];

    #[inline]
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<LandUse> {
        LandUse::ALL.get(code).copied()
    }

    /// The two uses different from `self`, in code order.
    #[inline]
    pub fn others(self) -> [LandUse; 2] {
        match self {
            LandUse::Agriculture => [LandUse::Construction, LandUse::Conservation],
            LandUse::Construction => [LandUse::Agriculture, LandUse::Conservation],
            LandUse::Conservation => [LandUse::Agriculture, LandUse::Construction],
        }
    }
}

impl fmt::Display for LandUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LandUse::Agriculture => "agriculture",
            LandUse::Construction => "construction",
            LandUse::Conservation => "conservation",
        };
        f.write_str(name)
    }
}

impl FromStr for LandUse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "agriculture" => Ok(LandUse::Agriculture),
            "1" | "construction" => Ok(LandUse::Construction),
            "2" | "conservation" => Ok(LandUse::Conservation),
            other => Err(Error::Validation(format!("unknown land use '{other}'"))),
        }
    }
}

/// One land use per parcel on a `rows x cols` grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AllocationMap {
    rows: usize,
    cols: usize,
    cells: Vec<LandUse>,
}

impl AllocationMap {
    pub fn new(rows: usize, cols: usize, cells: Vec<LandUse>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "allocation map must have positive area, got {rows}x{cols}"
            )));
        }
        if cells.len() != rows * cols {
            return Err(Error::Validation(format!(
                "{rows}x{cols} map needs {} cells, got {}",
                rows * cols,
                cells.len()
            )));
        }
        Ok(AllocationMap { rows, cols, cells })
    }

    pub fn uniform(rows: usize, cols: usize, land_use: LandUse) -> Result<Self> {
        AllocationMap::new(rows, cols, vec![land_use; rows * cols])
    }

    pub fn from_codes(rows: usize, cols: usize, codes: &[u8]) -> Result<Self> {
        let cells = codes
            .iter()
            .map(|&c| {
                LandUse::from_code(c as usize)
                    .ok_or_else(|| Error::Validation(format!("invalid land-use code {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        AllocationMap::new(rows, cols, cells)
    }

    /// Decodes state `index` of the base-3 counter where cell 0 (row-major)
    /// is the least significant digit.
    pub fn from_state_index(rows: usize, cols: usize, mut index: u64) -> Result<Self> {
        let mut cells = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            cells.push(LandUse::ALL[(index % NUM_USES as u64) as usize]);
            index /= NUM_USES as u64;
        }
        AllocationMap::new(rows, cols, cells)
    }

    /// Inverse of [`AllocationMap::from_state_index`].
    pub fn state_index(&self) -> u64 {
        self.cells
            .iter()
            .rev()
            .fold(0u64, |acc, u| acc * NUM_USES as u64 + u.code() as u64)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn cells(&self) -> &[LandUse] {
        &self.cells
    }

    pub fn check_bounds(&self, row: usize, col: usize) -> Result<usize> {
        if row < self.rows && col < self.cols {
            Ok(row * self.cols + col)
        } else {
            Err(Error::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Result<LandUse> {
        Ok(self.cells[self.check_bounds(row, col)?])
    }

    pub fn set(&mut self, row: usize, col: usize, land_use: LandUse) -> Result<()> {
        let idx = self.check_bounds(row, col)?;
        self.cells[idx] = land_use;
        Ok(())
    }

    #[inline]
    pub(crate) fn at(&self, idx: usize) -> LandUse {
        self.cells[idx]
    }

    #[inline]
    pub(crate) fn put(&mut self, idx: usize, land_use: LandUse) {
        self.cells[idx] = land_use;
    }

    /// One-hot indicator: whether parcel `(row, col)` carries `land_use`.
    pub fn indicator(&self, row: usize, col: usize, land_use: LandUse) -> Result<bool> {
        Ok(self.get(row, col)? == land_use)
    }

    /// Parcel counts per use.
    pub fn counts(&self) -> [usize; NUM_USES] {
        let mut counts = [0; NUM_USES];
        for u in &self.cells {
            counts[u.code()] += 1;
        }
        counts
    }

    pub fn use_fractions(&self) -> [f64; NUM_USES] {
        let n = self.cells.len() as f64;
        self.counts().map(|c| c as f64 / n)
    }

    /// Rows of digits separated by `/`, e.g. `012/120`.
    pub fn to_code_string(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() + self.rows);
        for (r, row) in self.cells.chunks(self.cols).enumerate() {
            if r > 0 {
                s.push('/');
            }
            s.extend(row.iter().map(|u| char::from(b'0' + u.code() as u8)));
        }
        s
    }

    pub fn from_code_string(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.trim().split('/').collect();
        let cols = rows[0].len();
        let mut cells = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::Validation(format!("ragged map string '{s}'")));
            }
            for ch in row.chars() {
                let code = ch
                    .to_digit(10)
                    .and_then(|d| LandUse::from_code(d as usize))
                    .ok_or_else(|| Error::Validation(format!("invalid land-use code '{ch}'")))?;
                cells.push(code);
            }
        }
        AllocationMap::new(rows.len(), cols, cells)
    }

    /// Applies `perm[old_code] = new_use` to every parcel.
    pub fn relabel(&self, perm: [LandUse; NUM_USES]) -> AllocationMap {
        AllocationMap {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells.iter().map(|u| perm[u.code()]).collect(),
        }
    }

    /// Number of in-bounds Moore neighbours of `idx` carrying `land_use`.
    #[inline]
    pub(crate) fn count_neighbors_with(&self, idx: usize, land_use: LandUse) -> u32 {
        let mut n = 0;
        for_each_neighbor(self.rows, self.cols, idx, |nb| {
            if self.cells[nb] == land_use {
                n += 1;
            }
        });
        n
    }
}

impl fmt::Display for AllocationMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_code_string())
    }
}

/// Calls `visit` with the row-major index of every in-bounds Moore neighbour.
#[inline]
pub fn for_each_neighbor(rows: usize, cols: usize, idx: usize, mut visit: impl FnMut(usize)) {
    let (i, j) = (idx / cols, idx % cols);
    for (di, dj) in MOORE_OFFSETS {
        let ni = i as isize + di;
        let nj = j as isize + dj;
        if ni >= 0 && nj >= 0 && (ni as usize) < rows && (nj as usize) < cols {
            visit(ni as usize * cols + nj as usize);
        }
    }
}

/// Per-parcel, per-use suitability scores. Stored plane by plane, each plane
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SuitabilityField {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl SuitabilityField {
    /// `scores` is laid out as `[plane][row][col]`.
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "suitability field must have positive area, got {rows}x{cols}"
            )));
        }
        let plane = rows * cols;
        if scores.len() != plane * NUM_USES {
            return Err(Error::Validation(format!(
                "{rows}x{cols} field needs {} scores, got {}",
                plane * NUM_USES,
                scores.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite() || *s < 0.0) {
            let (k, rest) = (pos / plane, pos % plane);
            return Err(Error::Validation(format!(
                "score at row {}, col {}, plane {k} is {} (must be finite and >= 0)",
                rest / cols,
                rest % cols,
                scores[pos]
            )));
        }
        Ok(SuitabilityField { rows, cols, scores })
    }

    pub fn uniform(rows: usize, cols: usize, per_use: [f64; NUM_USES]) -> Result<Self> {
        let plane = rows * cols;
        let scores = per_use
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, plane))
            .collect();
        SuitabilityField::new(rows, cols, scores)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn plane(&self, land_use: LandUse) -> &[f64] {
        let plane = self.rows * self.cols;
        &self.scores[land_use.code() * plane..(land_use.code() + 1) * plane]
    }

    pub(crate) fn plane_mut(&mut self, land_use: LandUse) -> &mut [f64] {
        let plane = self.rows * self.cols;
        &mut self.scores[land_use.code() * plane..(land_use.code() + 1) * plane]
    }

    pub fn get(&self, row: usize, col: usize, land_use: LandUse) -> Result<f64> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.score(row * self.cols + col, land_use))
    }

    #[inline]
    pub(crate) fn score(&self, idx: usize, land_use: LandUse) -> f64 {
        self.scores[land_use.code() * self.rows * self.cols + idx]
    }

    /// Permutes planes so that plane `perm[k]` of the result equals plane
    /// `k` of `self`.
    pub fn relabel(&self, perm: [LandUse; NUM_USES]) -> SuitabilityField {
        let mut out = self.clone();
        for u in LandUse::ALL {
            out.plane_mut(perm[u.code()]).copy_from_slice(self.plane(u));
        }
        out
    }

    /// Sub-field of `rows x cols` parcels starting at `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::Config(format!(
                "crop {rows}x{cols} at ({row0}, {col0}) does not fit a {}x{} field",
                self.rows, self.cols
            )));
        }
        let mut scores = Vec::with_capacity(rows * cols * NUM_USES);
        for u in LandUse::ALL {
            let plane = self.plane(u);
            for i in row0..row0 + rows {
                scores.extend_from_slice(&plane[i * self.cols + col0..i * self.cols + col0 + cols]);
            }
        }
        SuitabilityField::new(rows, cols, scores)
    }

    pub(crate) fn check_matches(&self, map: &AllocationMap) -> Result<()> {
        if self.rows != map.rows || self.cols != map.cols {
            return Err(Error::Config(format!(
                "map is {}x{} but suitability field is {}x{}",
                map.rows, map.cols, self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// Objective weights and sampling temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p_compact: f64,
    pub p_suit: f64,
    pub temperature: f64,
}

impl ModelParams {
    pub fn new(p_compact: f64, p_suit: f64, temperature: f64) -> Result<Self> {
        let params = ModelParams {
            p_compact,
            p_suit,
            temperature,
        };
        params.validate()?;
        Ok(params)
    }

    /// `P_C = 1`, `T = 1`.
    pub fn with_suitability(p_suit: f64) -> Result<Self> {
        ModelParams::new(1.0, p_suit, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Validation(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if !(self.p_compact.is_finite() && self.p_compact > 0.0) {
            return Err(Error::Validation(format!(
                "P_C must be > 0, got {}",
                self.p_compact
            )));
        }
        if !(self.p_suit.is_finite() && self.p_suit >= 0.0) {
            return Err(Error::Validation(format!(
                "P_S must be >= 0, got {}",
                self.p_suit
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn combine(&self, phi_c: u64, phi_s: f64) -> f64 {
        -self.p_compact * phi_c as f64 - self.p_suit * phi_s
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            p_compact: 1.0,
            p_suit: 1.0,
            temperature: 1.0,
        }
    }
}

/// Total objective and its two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub phi: f64,
    /// Sum of same-use Moore-neighbour counts; always even.
    pub phi_c: u64,
    pub phi_s: f64,
}

/// Matching Moore neighbours of parcel `(row, col)`, in `0..=8`.
pub fn neighbor_match_count(map: &AllocationMap, row: usize, col: usize) -> Result<u32> {
    let idx = map.check_bounds(row, col)?;
    Ok(map.count_neighbors_with(idx, map.at(idx)))
}

pub fn evaluate(
    map: &AllocationMap,
    field: &SuitabilityField,
    params: &ModelParams,
) -> Result<ObjectiveValue> {
    field.check_matches(map)?;
    let mut phi_c = 0u64;
    let mut phi_s = 0.0;
    for (idx, &u) in map.cells.iter().enumerate() {
        phi_c += map.count_neighbors_with(idx, u) as u64;
        phi_s += field.score(idx, u);
    }
    Ok(ObjectiveValue {
        phi: params.combine(phi_c, phi_s),
        phi_c,
        phi_s,
    })
}

/// Component changes caused by relabelling one parcel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FlipDelta {
    pub d_phi_c: i64,
    pub d_phi_s: f64,
}

impl FlipDelta {
    #[inline]
    pub fn phi(&self, params: &ModelParams) -> f64 {
        -params.p_compact * self.d_phi_c as f64 - params.p_suit * self.d_phi_s
    }
}

#[inline]
pub(crate) fn flip_delta(
    map: &AllocationMap,
    field: &SuitabilityField,
    idx: usize,
    new_use: LandUse,
) -> FlipDelta {
    let old = map.at(idx);
    if old == new_use {
        return FlipDelta {
            d_phi_c: 0,
            d_phi_s: 0.0,
        };
    }
    let (mut same_old, mut same_new) = (0i64, 0i64);
    for_each_neighbor(map.rows, map.cols, idx, |nb| {
        let u = map.cells[nb];
        same_old += (u == old) as i64;
        same_new += (u == new_use) as i64;
    });
    FlipDelta {
        // Each affected pair appears once in the parcel's own count and once
        // in the neighbour's.
        d_phi_c: 2 * (same_new - same_old),
        d_phi_s: field.score(idx, new_use) - field.score(idx, old),
    }
}

/// Change in `phi` if parcel `(row, col)` were relabelled to `new_use`.
pub fn delta_phi_single_flip(
    map: &AllocationMap,
    field: &SuitabilityField,
    params: &ModelParams,
    row: usize,
    col: usize,
    new_use: LandUse,
) -> Result<f64> {
    let idx = map.check_bounds(row, col)?;
    field.check_matches(map)?;
    Ok(flip_delta(map, field, idx, new_use).phi(params))
}
