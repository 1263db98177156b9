//! Surface kinetic-energy diagnostic on a uniform doubly periodic grid.
//!
//! Velocities are geostrophic: `u = -(G/F) d(ssh)/dy`, `v = (G/F) d(ssh)/dx`,
//! and the energy of a time slice is half the plain mean of `u^2 + v^2` (the
//! area element cancels on a uniform grid).
//!
//! Two implementations are provided. [`Kernel::Cyclic`] wraps indices on both
//! axes. [`Kernel::Noncyclic`] carries a boundary bug: edge rows and columns use
//! one-sided differences instead of wrapping, and the x-axis edge keeps the
//! centered `2 dx` divisor.
//!
//! # Flat ordering
//!
//! A [`StateVector`] flattens to `T*NY*NX + 4` reals: the ssh block in
//! row-major order (t slowest, x fastest), followed by `dy`, `dx`, `G`, `F`.
//! Relation files index into this ordering, so it must not change.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of scalar parameters appended after the ssh block.
pub const PARAM_COUNT: usize = 4;
pub const DY_OFFSET: usize = 0;
pub const DX_OFFSET: usize = 1;
pub const GRAVITY_OFFSET: usize = 2;
pub const CORIOLIS_OFFSET: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "NY")]
    pub ny: usize,
    #[serde(rename = "NX")]
    pub nx: usize,
}

impl GridDims {
    pub fn new(t: usize, ny: usize, nx: usize) -> Result<Self> {
        let dims = GridDims { t, ny, nx };
        dims.check()?;
        Ok(dims)
    }

    /// Desk-scale grid used for symmetry checks.
    pub const fn desk() -> Self {
        GridDims { t: 3, ny: 16, nx: 16 }
    }

    /// Small grid used for relation discovery.
    pub const fn discovery() -> Self {
        GridDims { t: 2, ny: 4, nx: 4 }
    }

    pub fn check(&self) -> Result<()> {
        if self.t < 1 || self.ny < 3 || self.nx < 3 {
            return Err(Error::Shape(format!(
                "grid {}x{}x{} needs T >= 1, NY >= 3, NX >= 3",
                self.t, self.ny, self.nx
            )));
        }
        Ok(())
    }

    pub fn slice_len(&self) -> usize {
        self.ny * self.nx
    }

    pub fn ssh_len(&self) -> usize {
        self.t * self.ny * self.nx
    }

    /// Flat state-vector length `D`.
    pub fn state_len(&self) -> usize {
        self.ssh_len() + PARAM_COUNT
    }

    #[inline]
    pub fn ssh_index(&self, t: usize, j: usize, i: usize) -> usize {
        (t * self.ny + j) * self.nx + i
    }

    pub fn is_square(&self) -> bool {
        self.ny == self.nx
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.t, self.ny, self.nx)
    }
}

impl std::str::FromStr for GridDims {
    type Err = Error;

    /// Parses `TxNYxNX`, e.g. `3x16x16`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid `{s}` is not of the form TxNYxNX")));
        }
        let mut n = [0usize; 3];
        for (slot, part) in n.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("grid `{s}`: `{part}` is not a count")))?;
        }
        GridDims::new(n[0], n[1], n[2])
    }
}

/// Full input of the diagnostic: sea-surface height plus grid spacings and
/// the two physical constants.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub dims: GridDims,
    /// Sea-surface height, row-major `[T][NY][NX]`.
    pub ssh: Vec<f64>,
    pub dy: f64,
    pub dx: f64,
    pub gravity: f64,
    pub coriolis: f64,
}

impl StateVector {
    pub fn new(
        dims: GridDims,
        ssh: Vec<f64>,
        dy: f64,
        dx: f64,
        gravity: f64,
        coriolis: f64,
    ) -> Result<Self> {
        dims.check()?;
        if ssh.len() != dims.ssh_len() {
            return Err(Error::Dimension {
                expected: dims.ssh_len(),
                actual: ssh.len(),
            });
        }
        Ok(StateVector {
            dims,
            ssh,
            dy,
            dx,
            gravity,
            coriolis,
        })
    }

    /// Zero field with the given parameters.
    pub fn zeros(dims: GridDims, dy: f64, dx: f64, gravity: f64, coriolis: f64) -> Self {
        StateVector {
            dims,
            ssh: vec![0.0; dims.ssh_len()],
            dy,
            dx,
            gravity,
            coriolis,
        }
    }

    #[inline]
    pub fn ssh_at(&self, t: usize, j: usize, i: usize) -> f64 {
        self.ssh[self.dims.ssh_index(t, j, i)]
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims.state_len());
        out.extend_from_slice(&self.ssh);
        out.extend_from_slice(&[self.dy, self.dx, self.gravity, self.coriolis]);
        out
    }

    /// Inverse of [`StateVector::flatten`]. Accepts any finite-or-not values;
    /// kernel preconditions are checked separately by [`StateVector::check_kernel_inputs`].
    pub fn unflatten(vec: &[f64], dims: GridDims) -> Result<Self> {
        dims.check()?;
        if vec.len() != dims.state_len() {
            return Err(Error::Dimension {
                expected: dims.state_len(),
                actual: vec.len(),
            });
        }
        let n = dims.ssh_len();
        let p = &vec[n..];
        Ok(StateVector {
            dims,
            ssh: vec[..n].to_vec(),
            dy: p[DY_OFFSET],
            dx: p[DX_OFFSET],
            gravity: p[GRAVITY_OFFSET],
            coriolis: p[CORIOLIS_OFFSET],
        })
    }

    /// Preconditions shared by both kernels.
    pub fn check_kernel_inputs(&self) -> Result<()> {
        if let Some(index) = self.ssh.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let params = [self.dy, self.dx, self.gravity, self.coriolis];
        if let Some(k) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: self.dims.ssh_len() + k,
            });
        }
        if self.coriolis == 0.0 {
            return Err(Error::Parameter("F must be nonzero".into()));
        }
        if self.dy <= 0.0 || self.dx <= 0.0 {
            return Err(Error::Parameter(format!(
                "grid spacings must be positive (dy = {}, dx = {})",
                self.dy, self.dx
            )));
        }
        Ok(())
    }
}

/// Euclidean norm, accumulated in index order.
pub fn norm(vec: &[f64]) -> Result<f64> {
    if let Some(index) = vec.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(vec.iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub dims: GridDims,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Kinetic energy per time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries(pub Vec<f64>);

impl EnergySeries {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Boundary {
    Wrap,
    OneSided,
}

/// Derivative of `field` along one axis at position `k` of a line of length
/// `n`, sampled through `at`. Returns the raw difference and its divisor
/// multiplier (in units of the spacing).
#[inline]
fn line_difference(n: usize, k: usize, boundary: Boundary, at: impl Fn(usize) -> f64) -> (f64, f64) {
    match boundary {
        Boundary::Wrap => {
            let next = if k + 1 == n { 0 } else { k + 1 };
            let prev = if k == 0 { n - 1 } else { k - 1 };
            (at(next) - at(prev), 2.0)
        }
        Boundary::OneSided => {
            if k == 0 {
                (at(1) - at(0), 1.0)
            } else if k + 1 == n {
                (at(n - 1) - at(n - 2), 1.0)
            } else {
                (at(k + 1) - at(k - 1), 2.0)
            }
        }
    }
}

fn velocities(state: &StateVector, boundary: Boundary) -> Result<VelocityField> {
    state.check_kernel_inputs()?;
    let dims = state.dims;
    let ratio = state.gravity / state.coriolis;
    let mut u = vec![0.0; dims.ssh_len()];
    let mut v = vec![0.0; dims.ssh_len()];
    for t in 0..dims.t {
        let slice = &state.ssh[t * dims.slice_len()..(t + 1) * dims.slice_len()];
        for j in 0..dims.ny {
            for i in 0..dims.nx {
                let (dsy, wy) = line_difference(dims.ny, j, boundary, |jj| slice[jj * dims.nx + i]);
                let (dsx, _) = line_difference(dims.nx, i, boundary, |ii| slice[j * dims.nx + ii]);
                // the buggy x edge keeps the centered divisor
                let wx = 2.0;
                let k = dims.ssh_index(t, j, i);
                u[k] = -ratio * dsy / (wy * state.dy);
                v[k] = ratio * dsx / (wx * state.dx);
            }
        }
    }
    Ok(VelocityField { dims, u, v })
}

fn energy_from(field: &VelocityField) -> EnergySeries {
    let dims = field.dims;
    let n = dims.slice_len();
    let e = (0..dims.t)
        .map(|t| {
            let mut acc = 0.0;
            for k in t * n..(t + 1) * n {
                acc += field.u[k] * field.u[k] + field.v[k] * field.v[k];
            }
            0.5 * (acc / n as f64)
        })
        .collect();
    EnergySeries(e)
}

/// Centered differences with periodic wrap on both axes.
pub fn velocities_cyclic(state: &StateVector) -> Result<VelocityField> {
    velocities(state, Boundary::Wrap)
}

/// Velocities of the boundary-buggy implementation: one-sided differences at
/// the first and last index of each axis, with the x edge still divided by
/// `2 dx`.
pub fn velocities_noncyclic(state: &StateVector) -> Result<VelocityField> {
    velocities(state, Boundary::OneSided)
}

pub fn energy_cyclic(state: &StateVector) -> Result<EnergySeries> {
    Ok(energy_from(&velocities_cyclic(state)?))
}

pub fn energy_noncyclic(state: &StateVector) -> Result<EnergySeries> {
    Ok(energy_from(&velocities_noncyclic(state)?))
}

/// Selects one of the bundled implementations of the diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Cyclic,
    Noncyclic,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Cyclic => "cyclic",
            Kernel::Noncyclic => "noncyclic",
        }
    }

    pub fn energy(&self, state: &StateVector) -> Result<EnergySeries> {
        match self {
            Kernel::Cyclic => energy_cyclic(state),
            Kernel::Noncyclic => energy_noncyclic(state),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(Kernel::Cyclic),
            "noncyclic" => Ok(Kernel::Noncyclic),
            other => Err(Error::Config(format!(
                "unknown kernel `{other}` (expected cyclic or noncyclic)"
            ))),
        }
    }
}

/// The application under test: anything mapping a state to an energy series.
pub trait EnergyModel: Sync {
    fn energy(&self, state: &StateVector) -> Result<EnergySeries>;
}

impl EnergyModel for Kernel {
    fn energy(&self, state: &StateVector) -> Result<EnergySeries> {
        Kernel::energy(self, state)
    }
}

impl<F> EnergyModel for F
where
    F: Fn(&StateVector) -> Result<EnergySeries> + Sync,
{
    fn energy(&self, state: &StateVector) -> Result<EnergySeries> {
        self(state)
    }
}

/// Ranges used to draw random states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    /// ssh entries are uniform in `[-A, A]`.
    pub ssh_amplitude: f64,
    pub spacing_min: f64,
    pub spacing_max: f64,
    pub gravity_min: f64,
    pub gravity_max: f64,
    /// |F| is uniform in `[coriolis_min, coriolis_max]`; the sign is random.
    pub coriolis_min: f64,
    pub coriolis_max: f64,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            ssh_amplitude: 1.0,
            spacing_min: 0.5,
            spacing_max: 2.0,
            gravity_min: 1.0,
            gravity_max: 20.0,
            coriolis_min: 0.5,
            coriolis_max: 2.0,
        }
    }
}

impl SamplingRanges {
    pub fn check(&self) -> Result<()> {
        let all = [
            self.ssh_amplitude,
            self.spacing_min,
            self.spacing_max,
            self.gravity_min,
            self.gravity_max,
            self.coriolis_min,
            self.coriolis_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sampling ranges must be finite".into()));
        }
        if self.ssh_amplitude < 0.0 {
            return Err(Error::Config("ssh amplitude must be nonnegative".into()));
        }
        if self.spacing_min <= 0.0 || self.spacing_min > self.spacing_max {
            return Err(Error::Config(format!(
                "spacing range [{}, {}] must be positive and ordered",
                self.spacing_min, self.spacing_max
            )));
        }
        if self.gravity_min > self.gravity_max {
            return Err(Error::Config("gravity range is not ordered".into()));
        }
        if self.coriolis_min <= 0.0 || self.coriolis_min > self.coriolis_max {
            return Err(Error::Config(format!(
                "|F| range [{}, {}] must exclude zero and be ordered",
                self.coriolis_min, self.coriolis_max
            )));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws a random state. Entries are consumed from `rng` in flat order
/// (ssh, dy, dx, G, |F|, sign of F).
pub fn random_state<R: Rng + ?Sized>(dims: GridDims, ranges: &SamplingRanges, rng: &mut R) -> Result<StateVector> {
    dims.check()?;
    ranges.check()?;
    let a = ranges.ssh_amplitude;
    let ssh = (0..dims.ssh_len()).map(|_| uniform(rng, -a, a)).collect();
    let dy = uniform(rng, ranges.spacing_min, ranges.spacing_max);
    let dx = uniform(rng, ranges.spacing_min, ranges.spacing_max);
    let gravity = uniform(rng, ranges.gravity_min, ranges.gravity_max);
    let magnitude = uniform(rng, ranges.coriolis_min, ranges.coriolis_max);
    let coriolis = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    Ok(StateVector {
        dims,
        ssh,
        dy,
        dx,
        gravity,
        coriolis,
    })
}
