//! Lattice model configuration and the classical single-relaxation-time LBM.
//!
//! The equilibrium is linear in the scalar, `f_eq = w_hat * phi`, with the
//! effective weights `w_hat = w (1 + e.u / c_s^2)`. Boundaries are periodic.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    D1Q3,
    D2Q5,
}

impl Scheme {
    pub fn dims(self) -> usize {
        match self {
            Scheme::D1Q3 => 1,
            Scheme::D2Q5 => 2,
        }
    }

    /// Lattice velocities, in direction order.
    pub fn velocities(self) -> &'static [[i32; 2]] {
        match self {
            Scheme::D1Q3 => &[[0, 0], [1, 0], [-1, 0]],
            Scheme::D2Q5 => &[[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]],
        }
    }

    pub fn directions(self) -> usize {
        self.velocities().len()
    }

    /// Qubits needed to label the directions.
    pub fn q_qubits(self) -> usize {
        match self {
            Scheme::D1Q3 => 2,
            Scheme::D2Q5 => 3,
        }
    }

    pub fn default_weights(self) -> Vec<f64> {
        match self {
            Scheme::D1Q3 => vec![1.0 / 3.0; 3],
            Scheme::D2Q5 => vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0],
        }
    }

    pub fn default_cs2(self) -> f64 {
        match self {
            Scheme::D1Q3 => 1.0,
            Scheme::D2Q5 => 1.0 / 3.0,
        }
    }

    /// Constant dividing the relaxation bracket in the diffusion coefficient.
    /// With the default weights this equals `1 / c_s^2`.
    pub fn dispersion_constant(self) -> f64 {
        match self {
            Scheme::D1Q3 => 1.0,
            Scheme::D2Q5 => 3.0,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::D1Q3 => "D1Q3",
            Scheme::D2Q5 => "D2Q5",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1Q3" => Ok(Scheme::D1Q3),
            "D2Q5" => Ok(Scheme::D2Q5),
            other => Err(Error::InvalidSpec(format!("unknown scheme {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cells", rename_all = "lowercase")]
pub enum Geometry {
    /// `M` cells on a ring.
    Line(usize),
    /// `M x M` torus, stored row-major with index `x * M + y`.
    Square(usize),
}

impl Geometry {
    pub fn for_scheme(scheme: Scheme, cells_per_axis: usize) -> Self {
        match scheme {
            Scheme::D1Q3 => Geometry::Line(cells_per_axis),
            Scheme::D2Q5 => Geometry::Square(cells_per_axis),
        }
    }

    pub fn cells_per_axis(&self) -> usize {
        match *self {
            Geometry::Line(m) | Geometry::Square(m) => m,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Geometry::Line(m) => m,
            Geometry::Square(m) => m * m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        match self {
            Geometry::Line(_) => 1,
            Geometry::Square(_) => 2,
        }
    }

    /// Flat index of the cell reached from `cell` by moving `e`, wrapping.
    pub fn neighbor(&self, cell: usize, e: [i32; 2]) -> usize {
        let wrap = |k: usize, d: i32, m: usize| ((k as i64 + d as i64).rem_euclid(m as i64)) as usize;
        match *self {
            Geometry::Line(m) => wrap(cell, e[0], m),
            Geometry::Square(m) => {
                let (x, y) = (cell / m, cell % m);
                wrap(x, e[0], m) * m + wrap(y, e[1], m)
            }
        }
    }

    /// Flat index from per-axis coordinates.
    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        let m = self.cells_per_axis();
        if coords.len() != self.dims() || coords.iter().any(|&c| c >= m) {
            return Err(Error::GeometryMismatch(format!(
                "cell {coords:?} outside {self:?}"
            )));
        }
        Ok(coords.iter().fold(0, |acc, &c| acc * m + c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub scheme: Scheme,
    pub cells_per_axis: usize,
    /// Advection velocity `(u, v)`; `v` must be zero for D1Q3.
    pub velocity: [f64; 2],
    pub omega: f64,
    pub weights: Vec<f64>,
    pub cs2: f64,
    pub dx: f64,
    pub dt: f64,
}

impl ModelSpec {
    /// Default weights and sound speed, zero velocity, `omega = 1`.
    pub fn new(scheme: Scheme, cells_per_axis: usize) -> Self {
        Self {
            scheme,
            cells_per_axis,
            velocity: [0.0, 0.0],
            omega: 1.0,
            weights: scheme.default_weights(),
            cs2: scheme.default_cs2(),
            dx: 1.0,
            dt: 1.0,
        }
    }

    pub fn with_velocity(mut self, u: f64, v: f64) -> Self {
        self.velocity = [u, v];
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>, cs2: f64) -> Self {
        self.weights = weights;
        self.cs2 = cs2;
        self
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::for_scheme(self.scheme, self.cells_per_axis)
    }

    /// Number of position qubits per axis.
    pub fn axis_qubits(&self) -> usize {
        self.cells_per_axis.trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cells_per_axis;
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::InvalidSpec(format!(
                "cells per axis must be a power of two >= 2, got {m}"
            )));
        }
        let e = self.scheme.velocities();
        if self.weights.len() != e.len() {
            return Err(Error::InvalidSpec(format!(
                "{} needs {} weights, got {}",
                self.scheme,
                e.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpec("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSpec(format!("weights sum to {sum}, not 1")));
        }
        for axis in 0..2 {
            let first: f64 = self
                .weights
                .iter()
                .zip(e)
                .map(|(w, e)| w * e[axis] as f64)
                .sum();
            if first.abs() > SUM_TOL {
                return Err(Error::InvalidSpec(
                    "weights are not symmetric over the velocity set".into(),
                ));
            }
        }
        if self.scheme == Scheme::D1Q3 && self.velocity[1] != 0.0 {
            return Err(Error::InvalidSpec("D1Q3 has no v component".into()));
        }
        if !(self.omega > 0.0 && self.omega <= 2.0) {
            return Err(Error::InvalidSpec(format!(
                "omega must lie in (0, 2], got {}",
                self.omega
            )));
        }
        if !(self.cs2 > 0.0 && self.dx > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidSpec("cs2, dx and dt must be positive".into()));
        }
        effective_weights(self).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionWeights {
    pub w_hat: Vec<f64>,
    pub e: Vec<[i32; 2]>,
}

impl DirectionWeights {
    pub fn l2_norm(&self) -> f64 {
        self.w_hat.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// `w_hat_a = w_a (1 + e_a . u / c_s^2)`.
pub fn effective_weights(spec: &ModelSpec) -> Result<DirectionWeights> {
    let e = spec.scheme.velocities();
    let w_hat: Vec<f64> = spec
        .weights
        .iter()
        .zip(e)
        .map(|(w, e)| {
            let eu = e[0] as f64 * spec.velocity[0] + e[1] as f64 * spec.velocity[1];
            w * (1.0 + eu / spec.cs2)
        })
        .collect();
    if let Some((direction, &value)) = w_hat.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(Error::AdvectionTooStrong { direction, value });
    }
    Ok(DirectionWeights {
        w_hat,
        e: e.to_vec(),
    })
}

/// `chi = dx^2 / (D dt) * (tau / dt - 1/2)` with `tau = dt / omega`.
pub fn diffusion_coefficient(spec: &ModelSpec) -> f64 {
    let tau = spec.dt / spec.omega;
    spec.dx * spec.dx / (spec.scheme.dispersion_constant() * spec.dt) * (tau / spec.dt - 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroField {
    pub phi: Vec<f64>,
    pub geometry: Geometry,
}

impl MacroField {
    pub fn new(phi: Vec<f64>, geometry: Geometry) -> Result<Self> {
        if phi.len() != geometry.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} values for {geometry:?}",
                phi.len()
            )));
        }
        Ok(Self { phi, geometry })
    }

    pub fn uniform(geometry: Geometry, value: f64) -> Self {
        Self {
            phi: vec![value; geometry.len()],
            geometry,
        }
    }

    /// Uniform background with single-cell overrides given by coordinates.
    pub fn with_overrides(
        geometry: Geometry,
        background: f64,
        overrides: &[(Vec<usize>, f64)],
    ) -> Result<Self> {
        let mut field = Self::uniform(geometry, background);
        for (coords, value) in overrides {
            let i = geometry.index(coords)?;
            field.phi[i] = *value;
        }
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.phi.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.phi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn l2_norm(&self) -> f64 {
        self.phi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cyclic translation by `e` cells.
    pub fn translated(&self, e: [i32; 2]) -> Self {
        let mut phi = vec![0.0; self.len()];
        for (i, v) in self.phi.iter().enumerate() {
            phi[self.geometry.neighbor(i, e)] = *v;
        }
        Self {
            phi,
            geometry: self.geometry,
        }
    }

    fn check_against(&self, spec: &ModelSpec) -> Result<()> {
        if self.geometry != spec.geometry() {
            return Err(Error::GeometryMismatch(format!(
                "field is {:?}, model is {:?}",
                self.geometry,
                spec.geometry()
            )));
        }
        if self.phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("field has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Distribution-carrying BGK solver. Distributions start at equilibrium.
#[derive(Debug, Clone)]
pub struct ClassicalLbm {
    geometry: Geometry,
    omega: f64,
    weights: DirectionWeights,
    f: Vec<Vec<f64>>,
}

impl ClassicalLbm {
    pub fn new(field: &MacroField, spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        field.check_against(spec)?;
        let weights = effective_weights(spec)?;
        let f = weights
            .w_hat
            .iter()
            .map(|w| field.phi.iter().map(|p| w * p).collect())
            .collect();
        Ok(Self {
            geometry: field.geometry,
            omega: spec.omega,
            weights,
            f,
        })
    }

    pub fn field(&self) -> MacroField {
        let mut phi = vec![0.0; self.geometry.len()];
        for fa in &self.f {
            for (p, v) in phi.iter_mut().zip(fa) {
                *p += v;
            }
        }
        MacroField {
            phi,
            geometry: self.geometry,
        }
    }

    /// Collide toward `w_hat * phi`, then stream with wrap-around.
    pub fn step(&mut self) {
        let phi = self.field().phi;
        for (a, fa) in self.f.iter_mut().enumerate() {
            let w = self.weights.w_hat[a];
            let e = self.weights.e[a];
            let mut streamed = vec![0.0; fa.len()];
            for (cell, v) in fa.iter().enumerate() {
                let post = (1.0 - self.omega) * v + self.omega * w * phi[cell];
                streamed[self.geometry.neighbor(cell, e)] = post;
            }
            *fa = streamed;
        }
    }
}

/// One LBM cycle starting from equilibrium distributions.
pub fn classical_step(field: &MacroField, spec: &ModelSpec) -> Result<MacroField> {
    let mut lbm = ClassicalLbm::new(field, spec)?;
    lbm.step();
    Ok(lbm.field())
}

/// `steps` LBM cycles, carrying distributions between cycles.
pub fn classical_run(field: &MacroField, spec: &ModelSpec, steps: usize) -> Result<MacroField> {
    let mut lbm = ClassicalLbm::new(field, spec)?;
    for _ in 0..steps {
        lbm.step();
    }
    Ok(lbm.field())
}
