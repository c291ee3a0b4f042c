//! Time-indexed sequences of fields.

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::Real;

/// Which variable a trajectory stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariableTag {
    U,
    V,
    Z,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    grid: Grid<T>,
    times: Vec<T>,
    fields: Vec<Field<T>>,
    tag: VariableTag,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: &Grid<T>, tag: VariableTag) -> Self {
        Self {
            grid: grid.clone(),
            times: Vec::new(),
            fields: Vec::new(),
            tag,
        }
    }

    /// Builds a trajectory from parallel lists, checking the invariants.
    pub fn from_parts(grid: &Grid<T>, tag: VariableTag, times: Vec<T>, fields: Vec<Field<T>>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(invalid(format!("{} times but {} fields", times.len(), fields.len())));
        }
        let mut out = Self::new(grid, tag);
        for (t, f) in times.into_iter().zip(fields) {
            out.push(t, f)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, t: T, field: Field<T>) -> Result<()> {
        if !field.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(invalid(format!("trajectory times must increase: {t} after {last}")));
            }
        }
        self.times.push(t);
        self.fields.push(field);
        Ok(())
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn tag(&self) -> VariableTag {
        self.tag
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn fields(&self) -> &[Field<T>] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn get(&self, i: usize) -> (T, &Field<T>) {
        (self.times[i], &self.fields[i])
    }

    pub fn last(&self) -> Option<(T, &Field<T>)> {
        self.times.last().map(|&t| (t, self.fields.last().expect("parallel lists")))
    }

    /// Applies `f(t, field)` at every sample.
    pub fn map(&self, tag: VariableTag, f: impl Fn(T, &Field<T>) -> Field<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            fields: self.times.iter().zip(&self.fields).map(|(&t, x)| f(t, x)).collect(),
            tag,
        }
    }

    /// Scalar series `g(t, field)`.
    pub fn series(&self, g: impl Fn(T, &Field<T>) -> T) -> Vec<T> {
        self.times.iter().zip(&self.fields).map(|(&t, x)| g(t, x)).collect()
    }

    pub fn same_times(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid)
            && self.times.len() == other.times.len()
            && self.times.iter().zip(&other.times).all(|(a, b)| a == b)
    }
}
