//! Sparse linear programs whose rows and columns carry decodable entity tags.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constraint and variable families. Row families hold the shadow prices of the model;
/// column families identify the decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    // rows
    Balance,
    GenUpper,
    GenLower,
    StoreSoc,
    StoreUpper,
    StoreRatio,
    LineUpper,
    LineLower,
    KvlCycle,
    VreDispatched,
    VreAvailable,
    Co2Cap,
    Potential,
    SupportMirror,
    // columns
    Capacity,
    Dispatch,
    Shed,
    Discharge,
    Charge,
    Level,
    StoreCapacity,
    Flow,
    LineCapacity,
}

const FAMILY_NAMES: [(Family, &str); 23] = [
    (Family::Balance, "balance"),
    (Family::GenUpper, "gen-upper"),
    (Family::GenLower, "gen-lower"),
    (Family::StoreSoc, "store-soc"),
    (Family::StoreUpper, "store-upper"),
    (Family::StoreRatio, "store-ratio"),
    (Family::LineUpper, "line-upper"),
    (Family::LineLower, "line-lower"),
    (Family::KvlCycle, "kvl-cycle"),
    (Family::VreDispatched, "vre-dispatched"),
    (Family::VreAvailable, "vre-available"),
    (Family::Co2Cap, "co2-cap"),
    (Family::Potential, "potential"),
    (Family::SupportMirror, "support-mirror"),
    (Family::Capacity, "cap"),
    (Family::Dispatch, "gen"),
    (Family::Shed, "shed"),
    (Family::Discharge, "dis"),
    (Family::Charge, "sto"),
    (Family::Level, "soc"),
    (Family::StoreCapacity, "store-cap"),
    (Family::Flow, "flow"),
    (Family::LineCapacity, "line-cap"),
];

impl Family {
    pub fn as_str(self) -> &'static str {
        FAMILY_NAMES.iter().find(|(f, _)| *f == self).map(|(_, s)| *s).unwrap()
    }

    /// Whether tags of this family carry a snapshot index.
    pub fn is_temporal(self) -> bool {
        !matches!(
            self,
            Family::VreDispatched
                | Family::VreAvailable
                | Family::Co2Cap
                | Family::Potential
                | Family::SupportMirror
                | Family::StoreRatio
                | Family::Capacity
                | Family::StoreCapacity
                | Family::LineCapacity
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TagError {
    #[error("unknown family `{0}`")]
    Family(String),
    #[error("malformed tag `{0}`")]
    Malformed(String),
}

impl FromStr for Family {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FAMILY_NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(f, _)| *f)
            .ok_or_else(|| TagError::Family(s.to_string()))
    }
}

/// `(family, entity, snapshot)`; rendered as `family.entity.t<idx>` or `family.entity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag {
    pub family: Family,
    pub entity: String,
    pub snapshot: Option<usize>,
}

impl Tag {
    pub fn new(family: Family, entity: impl Into<String>, snapshot: Option<usize>) -> Self {
        let entity = entity.into();
        debug_assert_eq!(family.is_temporal(), snapshot.is_some(), "{family} {entity}");
        Tag {
            family,
            entity,
            snapshot,
        }
    }

    pub fn at(family: Family, entity: impl Into<String>, t: usize) -> Self {
        Tag::new(family, entity, Some(t))
    }

    pub fn fixed(family: Family, entity: impl Into<String>) -> Self {
        Tag::new(family, entity, None)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.snapshot {
            Some(t) => write!(f, "{}.{}.t{}", self.family, self.entity, t),
            None => write!(f, "{}.{}", self.family, self.entity),
        }
    }
}

impl FromStr for Tag {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || TagError::Malformed(s.to_string());
        let (family, rest) = s.split_once('.').ok_or_else(malformed)?;
        let family: Family = family.parse()?;
        let (entity, snapshot) = if family.is_temporal() {
            let (entity, t) = rest.rsplit_once('.').ok_or_else(malformed)?;
            let t = t.strip_prefix('t').ok_or_else(malformed)?;
            (entity, Some(t.parse::<usize>().map_err(|_| malformed())?))
        } else {
            (rest, None)
        };
        if entity.is_empty() || entity.contains('.') || entity.contains(char::is_whitespace) {
            return Err(malformed());
        }
        Ok(Tag {
            family,
            entity: entity.to_string(),
            snapshot,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub tag: Tag,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub tag: Tag,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("duplicate tag `{0}`")]
    DuplicateTag(String),
    #[error("entry references row {row} / column {col} outside the program")]
    DanglingEntry { row: usize, col: usize },
    #[error("column `{0}` has lower bound above upper bound")]
    Bounds(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
}

/// A minimization LP `min cᵀx s.t. rows, lower ≤ x ≤ upper` stored as coefficient triplets.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub name: String,
    columns: Vec<Column>,
    rows: Vec<Row>,
    /// `(row, column, value)` triplets.
    entries: Vec<(usize, usize, f64)>,
    col_index: HashMap<Tag, usize>,
    row_index: HashMap<Tag, usize>,
}

impl LinearProgram {
    pub fn new(name: impl Into<String>) -> Self {
        LinearProgram {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_column(&mut self, tag: Tag, lower: f64, upper: f64, cost: f64) -> Result<usize, LpError> {
        if self.col_index.contains_key(&tag) {
            return Err(LpError::DuplicateTag(tag.to_string()));
        }
        let idx = self.columns.len();
        self.col_index.insert(tag.clone(), idx);
        self.columns.push(Column {
            tag,
            lower,
            upper,
            cost,
        });
        Ok(idx)
    }

    pub fn add_row(&mut self, tag: Tag, sense: Sense, rhs: f64) -> Result<usize, LpError> {
        if self.row_index.contains_key(&tag) {
            return Err(LpError::DuplicateTag(tag.to_string()));
        }
        let idx = self.rows.len();
        self.row_index.insert(tag.clone(), idx);
        self.rows.push(Row { tag, sense, rhs });
        Ok(idx)
    }

    /// Add a coefficient; zero values are dropped.
    pub fn add_entry(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, tag: &Tag) -> Option<usize> {
        self.col_index.get(tag).copied()
    }

    pub fn row_index(&self, tag: &Tag) -> Option<usize> {
        self.row_index.get(tag).copied()
    }

    pub fn find_column(&self, name: &str) -> Option<usize> {
        name.parse::<Tag>().ok().and_then(|t| self.column_index(&t))
    }

    pub fn find_row(&self, name: &str) -> Option<usize> {
        name.parse::<Tag>().ok().and_then(|t| self.row_index(&t))
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.columns[col].cost = cost;
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.columns[col].lower = lower;
        self.columns[col].upper = upper;
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        self.rows[row].rhs = rhs;
    }

    /// Indices of rows in the given family, in insertion order.
    pub fn rows_in(&self, family: Family) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.tag.family == family)
            .map(|(i, _)| i)
    }

    pub fn columns_in(&self, family: Family) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.tag.family == family)
            .map(|(i, _)| i)
    }

    /// `(column, coefficient)` pairs of one row.
    pub fn row_entries(&self, row: usize) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter(|(r, _, _)| *r == row)
            .map(|&(_, c, v)| (c, v))
            .collect()
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows.len()];
        for &(r, c, v) in &self.entries {
            act[r] += v * x[c];
        }
        act
    }

    /// `Aᵀ y` per column.
    pub fn transpose_product(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.len()];
        for &(r, c, v) in &self.entries {
            out[c] += v * y[r];
        }
        out
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    /// Infinity norm of each row's coefficients.
    pub fn row_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.rows.len()];
        for &(r, _, v) in &self.entries {
            out[r] = out[r].max(v.abs());
        }
        out
    }

    /// A copy without the given row; all other rows, columns and entries are unchanged.
    pub fn without_row(&self, row: usize) -> LinearProgram {
        let mut out = LinearProgram::new(self.name.clone());
        for c in &self.columns {
            out.add_column(c.tag.clone(), c.lower, c.upper, c.cost).unwrap();
        }
        let mut remap = vec![usize::MAX; self.rows.len()];
        for (i, r) in self.rows.iter().enumerate() {
            if i != row {
                remap[i] = out.add_row(r.tag.clone(), r.sense, r.rhs).unwrap();
            }
        }
        for &(r, c, v) in &self.entries {
            if r != row {
                out.entries.push((remap[r], c, v));
            }
        }
        out
    }

    /// Structural invariants: entries in range, consistent bounds, finite data.
    pub fn check(&self) -> Result<(), LpError> {
        for c in &self.columns {
            if c.lower > c.upper || c.lower.is_nan() || c.upper.is_nan() {
                return Err(LpError::Bounds(c.tag.to_string()));
            }
            if !c.cost.is_finite() {
                return Err(LpError::NonFinite(c.tag.to_string()));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(LpError::NonFinite(r.tag.to_string()));
            }
        }
        for &(r, c, v) in &self.entries {
            if r >= self.rows.len() || c >= self.columns.len() {
                return Err(LpError::DanglingEntry { row: r, col: c });
            }
            if !v.is_finite() {
                return Err(LpError::NonFinite(self.rows[r].tag.to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_round_trip() {
        for s in ["balance.DE.t3", "co2-cap.system", "store-upper.dis:battery@DE.t0", "cap.solar@DE"] {
            let tag: Tag = s.parse().unwrap();
            assert_eq!(tag.to_string(), s);
        }
    }

    #[test]
    fn malformed_tags() {
        assert!("nonsense.x".parse::<Tag>().is_err());
        assert!("balance.DE".parse::<Tag>().is_err());
        assert!("balance.DE.tx".parse::<Tag>().is_err());
        assert!("co2-cap.".parse::<Tag>().is_err());
    }

    #[test]
    fn duplicate_tags_rejected() {
        let mut lp = LinearProgram::new("t");
        lp.add_column(Tag::fixed(Family::Capacity, "a@n"), 0.0, f64::INFINITY, 1.0).unwrap();
        assert!(lp.add_column(Tag::fixed(Family::Capacity, "a@n"), 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn without_row_keeps_everything_else() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_column(Tag::at(Family::Dispatch, "a@n", 0), 0.0, f64::INFINITY, 1.0).unwrap();
        let r0 = lp.add_row(Tag::at(Family::Balance, "n", 0), Sense::Eq, 1.0).unwrap();
        let r1 = lp.add_row(Tag::fixed(Family::Co2Cap, "system"), Sense::Le, 3.0).unwrap();
        lp.add_entry(r0, x, 1.0);
        lp.add_entry(r1, x, 0.5);
        let out = lp.without_row(r1);
        assert_eq!(out.num_rows(), 1);
        assert_eq!(out.entries(), &[(0, 0, 1.0)]);
        assert_eq!(out.row_index(&Tag::at(Family::Balance, "n", 0)), Some(0));
        assert!(out.check().is_ok());
    }
}
