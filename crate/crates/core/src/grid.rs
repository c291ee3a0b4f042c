//! Periodic box discretization and its dual frequency lattice.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Transforms on buffers at least twice this long are split across threads.
const PARALLEL_CHUNK: usize = 1 << 13;

/// Row tile used by the gather/scatter transposes.
const TILE: usize = 8;

/// Uniform periodic grid on `[-L/2, L/2)^d`, `d ∈ {2, 3}`.
///
/// Grid points are `x_j = j h - L/2` with `h = L/n`; the dual lattice is
/// `ξ_k = 2πk/L`, `k ∈ {-n/2, …, n/2-1}`, stored per axis in FFT order.
/// Cloning is cheap: the tables and FFT plans are shared.
#[derive(Clone)]
pub struct Grid<T: Real> {
    inner: Arc<GridInner<T>>,
}

struct GridInner<T: Real> {
    dim: usize,
    n: usize,
    box_length: T,
    wavenumbers: Vec<T>,
    xi_norm2: Vec<T>,
    shift_sign: Vec<T>,
    mirror: Vec<usize>,
    /// `true` where every axis index satisfies `3|k| ≤ n`.
    dealias_keep: Vec<bool>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Grid<T> {
    /// Builds a grid. `n` must be even and at least 8, `dim` 2 or 3 and
    /// the box length positive.
    pub fn new(dim: usize, n: usize, box_length: T) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n must be even, got {n}")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n must be at least 8, got {n}")));
        }
        if !(box_length > T::zero()) || !box_length.is_finite() {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {box_length}")));
        }

        let step = T::TAU() / box_length;
        let wavenumbers: Vec<T> = (0..n).map(|i| T::lit(signed_index(i, n) as f64) * step).collect();

        let len = n.pow(dim as u32);
        let mut xi_norm2 = Vec::with_capacity(len);
        let mut shift_sign = Vec::with_capacity(len);
        let mut mirror = Vec::with_capacity(len);
        let mut dealias_keep = Vec::with_capacity(len);
        for flat in 0..len {
            let idx = unflatten(flat, n, dim);
            let mut r2 = T::zero();
            let mut parity = 0i64;
            let mut keep = true;
            for &i in &idx[..dim] {
                r2 = r2 + wavenumbers[i] * wavenumbers[i];
                let k = signed_index(i, n);
                parity += k;
                keep &= 3 * k.unsigned_abs() as usize <= n;
            }
            mirror.push(idx[..dim].iter().fold(0usize, |acc, &i| acc * n + (n - i) % n));
            dealias_keep.push(keep);
            xi_norm2.push(r2);
            shift_sign.push(if parity.rem_euclid(2) == 0 { T::one() } else { -T::one() });
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                box_length,
                wavenumbers,
                xi_norm2,
                shift_sign,
                mirror,
                dealias_keep,
                forward,
                inverse,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn box_length(&self) -> T {
        self.inner.box_length
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.inner.xi_norm2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spatial step `h = L/n`.
    pub fn spacing(&self) -> T {
        self.inner.box_length / T::from_usize_lossy(self.inner.n)
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.inner.dim as i32)
    }

    /// `L^d`.
    pub fn volume(&self) -> T {
        self.inner.box_length.powi(self.inner.dim as i32)
    }

    /// Lattice step `2π/L`.
    pub fn frequency_step(&self) -> T {
        T::TAU() / self.inner.box_length
    }

    /// Per-axis wave numbers in FFT order.
    pub fn wavenumbers(&self) -> &[T] {
        &self.inner.wavenumbers
    }

    /// Per-axis wave numbers sorted ascending, `{-n/2, …, n/2-1}·2π/L`.
    pub fn sorted_frequencies(&self) -> Vec<T> {
        let n = self.n() as i64;
        (-n / 2..n / 2).map(|k| T::lit(k as f64) * self.frequency_step()).collect()
    }

    /// `|ξ|²` at every flat index.
    pub fn xi_norm2(&self) -> &[T] {
        &self.inner.xi_norm2
    }

    /// Frequency vector at a flat index; unused components are zero.
    pub fn xi(&self, flat: usize) -> [T; 3] {
        let idx = unflatten(flat, self.n(), self.dim());
        let mut out = [T::zero(); 3];
        for a in 0..self.dim() {
            out[a] = self.inner.wavenumbers[idx[a]];
        }
        out
    }

    /// Signed per-axis lattice indices at a flat index.
    pub fn lattice_index(&self, flat: usize) -> [i64; 3] {
        let idx = unflatten(flat, self.n(), self.dim());
        let mut out = [0i64; 3];
        for a in 0..self.dim() {
            out[a] = signed_index(idx[a], self.n());
        }
        out
    }

    /// Flat index of a signed lattice index (each component taken mod `n`).
    pub fn flat_from_lattice(&self, k: &[i64]) -> usize {
        let n = self.n() as i64;
        k[..self.dim()].iter().fold(0usize, |acc, &ki| acc * self.n() + ki.rem_euclid(n) as usize)
    }

    /// Flat index of `-ξ` for the frequency at `flat`.
    #[inline]
    pub fn mirror(&self, flat: usize) -> usize {
        self.inner.mirror[flat]
    }

    pub(crate) fn dealias_keep(&self) -> &[bool] {
        &self.inner.dealias_keep
    }

    /// Physical coordinate `x` at a flat index; unused components are zero.
    pub fn point(&self, flat: usize) -> [T; 3] {
        let idx = unflatten(flat, self.n(), self.dim());
        let h = self.spacing();
        let half = self.inner.box_length / T::lit(2.0);
        let mut out = [T::zero(); 3];
        for a in 0..self.dim() {
            out[a] = T::from_usize_lossy(idx[a]) * h - half;
        }
        out
    }

    /// Largest absolute signed index per axis among the flat index.
    pub fn max_axis_index(&self, flat: usize) -> usize {
        let k = self.lattice_index(flat);
        k[..self.dim()].iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub(crate) fn shift_sign(&self) -> &[T] {
        &self.inner.shift_sign
    }

    /// Normalized forward transform of raw values (see [`crate::field`]).
    pub(crate) fn forward_in_place(&self, data: &mut [Complex<T>]) {
        self.forward_with(data, &mut Vec::new());
    }

    pub(crate) fn forward_with(&self, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        self.fft_with(data, false, scratch);
        let w = self.cell_volume();
        for (v, s) in data.iter_mut().zip(self.shift_sign()) {
            *v = *v * (w * *s);
        }
    }

    /// Normalized inverse transform of raw values.
    pub(crate) fn inverse_in_place(&self, data: &mut [Complex<T>]) {
        self.inverse_with(data, &mut Vec::new());
    }

    pub(crate) fn inverse_with(&self, data: &mut [Complex<T>], scratch: &mut Vec<Complex<T>>) {
        let w = T::one() / self.volume();
        for (v, s) in data.iter_mut().zip(self.shift_sign()) {
            *v = *v * (w * *s);
        }
        self.fft_with(data, true, scratch);
    }

    /// Unnormalized in-place d-dimensional DFT; `lines` is reusable scratch.
    pub(crate) fn fft_with(&self, data: &mut [Complex<T>], inverse: bool, lines: &mut Vec<Complex<T>>) {
        let plan = if inverse { &self.inner.inverse } else { &self.inner.forward };
        let n = self.n();
        let dim = self.dim();
        let lines_per_chunk = (PARALLEL_CHUNK / n).max(1);
        let run = |buf: &mut [Complex<T>]| {
            if buf.len() >= 2 * PARALLEL_CHUNK {
                buf.par_chunks_mut(lines_per_chunk * n).for_each(|c| plan.process(c));
            } else {
                plan.process(buf);
            }
        };
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                run(data);
                continue;
            }
            // Gather each axis line contiguously, transform, scatter back.
            let outer = n.pow(axis as u32);
            lines.resize(data.len(), Complex::new(T::zero(), T::zero()));
            for o in 0..outer {
                let base = o * n * stride;
                let src = &data[base..base + n * stride];
                let dst = &mut lines[base..base + n * stride];
                for k0 in (0..n).step_by(TILE) {
                    for j in 0..stride {
                        for k in k0..(k0 + TILE).min(n) {
                            dst[j * n + k] = src[k * stride + j];
                        }
                    }
                }
            }
            run(lines);
            for o in 0..outer {
                let base = o * n * stride;
                let src = &lines[base..base + n * stride];
                let dst = &mut data[base..base + n * stride];
                for k0 in (0..n).step_by(TILE) {
                    for j in 0..stride {
                        for k in k0..(k0 + TILE).min(n) {
                            dst[k * stride + j] = src[j * n + k];
                        }
                    }
                }
            }
        }
    }

    /// True if both handles describe the same discretization.
    pub fn same_as(&self, other: &Grid<T>) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim() && self.n() == other.n() && self.box_length() == other.box_length())
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("box_length", &self.box_length())
            .finish()
    }
}

/// `make_grid` in free-function form.
pub fn make_grid<T: Real>(dim: usize, n: usize, box_length: T) -> Result<Grid<T>> {
    Grid::new(dim, n, box_length)
}

pub(crate) fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn unflatten(mut flat: usize, n: usize, dim: usize) -> [usize; 3] {
    let mut out = [0usize; 3];
    for a in (0..dim).rev() {
        out[a] = flat % n;
        flat /= n;
    }
    out
}
