//! 3D Fruchterman–Reingold layout.
//!
//! Each annealing step applies exact all-pairs repulsion `k²/d` and edge attraction
//! `d²/k`, then moves every vertex by its net force clamped to the current temperature.
//! The temperature follows `t(i) = t₀·(1 − i/I)^α` and reaches zero at the last step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::graph::Graph;

/// Distances below this are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("cannot lay out an empty graph")]
    EmptyGraph,
    #[error("invalid layout parameter: {0}")]
    InvalidParams(&'static str),
    #[error("layout already finished after {0} iterations")]
    Finished(usize),
    #[error("layout cancelled after {0} iterations")]
    Cancelled(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub max_iterations: usize,
    pub cooling_exponent: f64,
    /// Starting temperature; `None` means a tenth of `volume_side`.
    pub initial_temperature: Option<f64>,
    /// Side of the cube the initial positions are drawn from.
    pub volume_side: f64,
    pub rng_seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            max_iterations: 2000,
            cooling_exponent: 1.5,
            initial_temperature: None,
            volume_side: 1.0,
            rng_seed: 0,
        }
    }
}

impl LayoutParams {
    pub fn with_seed(seed: u64) -> Self {
        LayoutParams {
            rng_seed: seed,
            ..Default::default()
        }
    }

    pub fn t0(&self) -> f64 {
        self.initial_temperature.unwrap_or(0.1 * self.volume_side)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.max_iterations < 1 {
            return Err(LayoutError::InvalidParams("max_iterations must be at least 1"));
        }
        if !(self.cooling_exponent > 0.0 && self.cooling_exponent.is_finite()) {
            return Err(LayoutError::InvalidParams("cooling_exponent must be positive"));
        }
        if !(self.volume_side > 0.0 && self.volume_side.is_finite()) {
            return Err(LayoutError::InvalidParams("volume_side must be positive"));
        }
        let t0 = self.t0();
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(LayoutError::InvalidParams("initial_temperature must be positive"));
        }
        Ok(())
    }
}

/// Temperature cap on per-step displacement at iteration `iter`.
pub fn temperature_at(iter: usize, p: &LayoutParams) -> f64 {
    let total = p.max_iterations as f64;
    let frac = (1.0 - iter.min(p.max_iterations) as f64 / total).max(0.0);
    p.t0() * frac.powf(p.cooling_exponent)
}

/// Ideal edge length `(V/N)^(1/3)` for a cube of side `side` holding `n` vertices.
pub fn ideal_length(side: f64, n: usize) -> f64 {
    (side.powi(3) / n as f64).cbrt()
}

#[derive(Clone, Debug)]
pub struct LayoutState {
    pub positions: Vec<Vec3>,
    pub iteration: usize,
    pub temperature: f64,
    pub k: f64,
    params: LayoutParams,
    rng: ChaCha8Rng,
}

impl LayoutState {
    pub fn params(&self) -> &LayoutParams {
        &self.params
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.params.max_iterations
    }
}

pub fn init_layout(g: &Graph, p: &LayoutParams) -> Result<LayoutState, LayoutError> {
    p.validate()?;
    let n = g.vertex_count();
    if n == 0 {
        return Err(LayoutError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let side = p.volume_side;
    let positions = (0..n)
        .map(|_| {
            Vec3::new(
                rng.random::<f64>() * side,
                rng.random::<f64>() * side,
                rng.random::<f64>() * side,
            )
        })
        .collect();
    Ok(LayoutState {
        positions,
        iteration: 0,
        temperature: temperature_at(0, p),
        k: ideal_length(side, n),
        params: p.clone(),
        rng,
    })
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n2 = v.norm_squared();
        if n2 > 1e-6 && n2 <= 1.0 {
            return v / n2.sqrt();
        }
    }
}

/// Separation vector `from → to` for force evaluation. Coincident pairs get a seeded random
/// direction at distance [`COINCIDENT_EPS`].
fn separation(from: Vec3, to: Vec3, rng: &mut ChaCha8Rng) -> (Vec3, f64) {
    let delta = to - from;
    let d = delta.norm();
    if d < COINCIDENT_EPS {
        (random_unit(rng) * COINCIDENT_EPS, COINCIDENT_EPS)
    } else {
        (delta, d)
    }
}

/// Net force on every vertex for the current positions.
fn forces(state: &mut LayoutState, g: &Graph) -> Vec<Vec3> {
    let n = state.positions.len();
    let k = state.k;
    let k2 = k * k;
    let pos = &state.positions;
    let mut disp = vec![Vec3::ZERO; n];

    for i in 0..n {
        let pi = pos[i];
        for j in i + 1..n {
            let (delta, d) = separation(pos[j], pi, &mut state.rng);
            // delta points j -> i; repulsion pushes i along it and j against it.
            let f = delta * (k2 / (d * d));
            disp[i] += f;
            disp[j] -= f;
        }
    }
    for &(a, b) in g.edges() {
        let (ia, ib) = (a.index(), b.index());
        let (delta, d) = separation(pos[ib], pos[ia], &mut state.rng);
        // Attraction d²/k along the unit vector.
        let f = delta * (d / k);
        disp[ia] -= f;
        disp[ib] += f;
    }
    disp
}

/// One annealing step.
pub fn layout_step(mut state: LayoutState, g: &Graph) -> Result<LayoutState, LayoutError> {
    if state.is_finished() {
        return Err(LayoutError::Finished(state.iteration));
    }
    let disp = forces(&mut state, g);
    let t = state.temperature;
    for (p, d) in state.positions.iter_mut().zip(disp) {
        let len = d.norm();
        if len > 0.0 && len.is_finite() {
            *p += d * (len.min(t) / len);
        }
    }
    state.iteration += 1;
    state.temperature = temperature_at(state.iteration, &state.params);
    Ok(state)
}

/// Runs the full schedule and returns the final positions.
pub fn run_layout(g: &Graph, p: &LayoutParams) -> Result<Vec<Vec3>, LayoutError> {
    run_layout_with(g, p, |_, _| true)
}

/// [`run_layout`] that calls `progress(done, total)` after every step and stops with
/// [`LayoutError::Cancelled`] as soon as it returns false.
pub fn run_layout_with(
    g: &Graph,
    p: &LayoutParams,
    mut progress: impl FnMut(usize, usize) -> bool,
) -> Result<Vec<Vec3>, LayoutError> {
    let mut state = init_layout(g, p)?;
    while !state.is_finished() {
        state = layout_step(state, g)?;
        if !progress(state.iteration, p.max_iterations) {
            return Err(LayoutError::Cancelled(state.iteration));
        }
    }
    Ok(state.positions)
}
