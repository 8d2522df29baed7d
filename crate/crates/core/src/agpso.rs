//! Annealed-Gaussian particle swarm optimization over `(cx, cy, s)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(cx, cy, s)`.
pub type State = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgpsoParams {
    pub particles: usize,
    pub iterations: usize,
    /// Annealing rate `c`.
    pub anneal: f64,
    /// Standard deviations of the initial disturbance, per state component.
    pub sigma0: [f64; 3],
    /// Stop once the global best is unchanged for this many iterations.
    pub patience: usize,
    /// Keep `s` fixed.
    pub freeze_scale: bool,
    pub min_scale: f64,
}

impl Default for AgpsoParams {
    fn default() -> Self {
        Self {
            particles: 50,
            iterations: 20,
            anneal: 0.3,
            sigma0: [8.0, 8.0, 0.05],
            patience: 3,
            freeze_scale: false,
            min_scale: 0.2,
        }
    }
}

impl AgpsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.iterations == 0 {
            return Err(Error::invalid("agpso needs particles and iterations"));
        }
        if !(self.anneal >= 0.0) || self.sigma0.iter().any(|s| !(*s >= 0.0)) || !(self.min_scale > 0.0) {
            return Err(Error::invalid("agpso anneal, sigma0 and min_scale must be non-negative"));
        }
        Ok(())
    }
}

/// Diagonal disturbance covariance at iteration `n`: `sigma0^2 * e^(-c n)`.
pub fn annealed_covariance(sigma0: [f64; 3], anneal: f64, n: usize) -> [f64; 3] {
    let k = (-anneal * n as f64).exp();
    sigma0.map(|s| s * s * k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub x: State,
    pub v: State,
    pub pbest: State,
    pub pbest_fit: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest: State,
    pub gbest_fit: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl Swarm {
    /// Particles scattered around `center` with the initial disturbance;
    /// `center` itself is the first particle.
    pub fn init(center: State, params: &AgpsoParams, rng: &mut ChaCha8Rng, mut fitness: impl FnMut(&State) -> f64) -> Self {
        let mut particles = Vec::with_capacity(params.particles);
        for i in 0..params.particles {
            let mut x = center;
            if i > 0 {
                for (d, xd) in x.iter_mut().enumerate() {
                    *xd += params.sigma0[d] * normal(rng);
                }
            }
            clamp_state(&mut x, center, params);
            let fit = fitness(&x);
            particles.push(Particle {
                x,
                v: [0.0; 3],
                pbest: x,
                pbest_fit: fit,
            });
        }
        let best = best_particle(&particles);
        Self {
            gbest: particles[best].pbest,
            gbest_fit: particles[best].pbest_fit,
            particles,
        }
    }
}

fn best_particle(p: &[Particle]) -> usize {
    (0..p.len()).fold(0, |b, i| if p[i].pbest_fit > p[b].pbest_fit { i } else { b })
}

fn clamp_state(x: &mut State, reference: State, params: &AgpsoParams) {
    if params.freeze_scale {
        x[2] = reference[2];
    }
    x[2] = x[2].max(params.min_scale);
}

/// Draws of one velocity update, exposed so callers can force them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draws {
    pub r1: State,
    pub r2: State,
    pub eps: State,
    /// Multiplier of the external force.
    pub r3: f64,
}

impl Draws {
    pub fn sample(rng: &mut ChaCha8Rng, cov: [f64; 3]) -> Self {
        let mut d = Draws {
            r1: [0.0; 3],
            r2: [0.0; 3],
            eps: [0.0; 3],
            r3: 0.0,
        };
        for k in 0..3 {
            d.r1[k] = normal(rng);
            d.r2[k] = normal(rng);
            d.eps[k] = cov[k].sqrt() * normal(rng);
        }
        d.r3 = normal(rng);
        d
    }
}

/// `v = |r1|(p - x) + |r2|(g - x) + eps + |r3| F`.
pub fn velocity(p: &Particle, g: &State, d: &Draws, force: &State) -> State {
    let mut v = [0.0; 3];
    for k in 0..3 {
        v[k] = d.r1[k].abs() * (p.pbest[k] - p.x[k]) + d.r2[k].abs() * (g[k] - p.x[k]) + d.eps[k] + d.r3.abs() * force[k];
    }
    v
}

/// One swarm iteration at annealing index `n`; `force` is an optional
/// repulsion added to every particle. Returns whether `gbest` improved.
pub fn step_particles(
    swarm: &mut Swarm,
    n: usize,
    params: &AgpsoParams,
    rng: &mut ChaCha8Rng,
    force: Option<State>,
    mut fitness: impl FnMut(&State) -> f64,
) -> bool {
    let cov = annealed_covariance(params.sigma0, params.anneal, n);
    let force = force.unwrap_or([0.0; 3]);
    let reference = swarm.gbest;
    let mut improved = false;
    for p in swarm.particles.iter_mut() {
        let d = Draws::sample(rng, cov);
        p.v = velocity(p, &swarm.gbest, &d, &force);
        for k in 0..3 {
            p.x[k] += p.v[k];
        }
        clamp_state(&mut p.x, reference, params);
        let fit = fitness(&p.x);
        if fit > p.pbest_fit {
            p.pbest = p.x;
            p.pbest_fit = fit;
        }
        if fit > swarm.gbest_fit {
            swarm.gbest = p.x;
            swarm.gbest_fit = fit;
            improved = true;
        }
    }
    improved
}

/// Runs up to `params.iterations` steps with early stopping; returns the
/// number of iterations performed.
pub fn optimize(swarm: &mut Swarm, params: &AgpsoParams, rng: &mut ChaCha8Rng, mut fitness: impl FnMut(&State) -> f64) -> usize {
    let mut stale = 0;
    for n in 1..=params.iterations {
        if step_particles(swarm, n, params, rng, None, &mut fitness) {
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= params.patience {
            return n;
        }
    }
    params.iterations
}

/// Uniformly random unit vector in the image plane.
pub fn random_direction(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    (a.cos(), a.sin())
}
