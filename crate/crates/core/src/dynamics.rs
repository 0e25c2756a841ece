//! Lorenz 96 dynamics, classic RK4 stepping and chaotic evolution of lifted datasets.
//!
//! A lifted row of length `m_lift` is read as `[g1, g2, g3, x_1, ..., x_K]` with
//! `K = m_lift - 3`. Only `x` evolves; the three leading ghost slots are dependent copies
//! `(x_{K-1}, x_K, x_1)` written after integration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{LiftedDataset, LEADING_RANDOM};

pub const MIN_K: usize = 4;
/// Any state component beyond this magnitude aborts the integration.
pub const BLOWUP_THRESHOLD: f64 = 1e6;
const STEP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    pub forcing: f64,
    pub dt: f64,
    /// Evolution interval `T`, a whole number of steps `dt`.
    pub horizon: f64,
    /// Lorenz 96 state dimension, `m_lift - 3`.
    pub k: usize,
}

impl ChaosConfig {
    /// `F = 8`, `dt = 1e-2`, with `K` derived from the lifted dimension.
    pub fn for_lift(m_lift: usize, horizon: f64) -> Self {
        Self {
            forcing: 8.0,
            dt: 1e-2,
            horizon,
            k: m_lift.saturating_sub(LEADING_RANDOM),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < MIN_K {
            return Err(Error::validation(format!("K must be >= {MIN_K}, got {}", self.k)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::validation(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if !self.forcing.is_finite() {
            return Err(Error::NonFinite("forcing"));
        }
        steps_for(self.horizon, self.dt).map(|_| ())
    }

    /// Number of RK4 steps, `round(T / dt)`.
    pub fn steps(&self) -> Result<usize> {
        steps_for(self.horizon, self.dt)
    }
}

/// `round(interval / dt)`, requiring `interval` to be a multiple of `dt` within 1e-12.
pub fn steps_for(interval: f64, dt: f64) -> Result<usize> {
    let n = (interval / dt).round();
    if (interval - n * dt).abs() > STEP_TOLERANCE {
        return Err(Error::validation(format!(
            "interval {interval} is not a whole number of steps of {dt}"
        )));
    }
    Ok(n as usize)
}

#[inline]
fn rhs_into(x: &[f64], forcing: f64, out: &mut [f64]) {
    let k = x.len();
    // Wrapped boundary terms first, then the branch-free interior.
    let at = |i: isize| x[i.rem_euclid(k as isize) as usize];
    for i in [0, 1, k - 1] {
        let ii = i as isize;
        out[i] = (at(ii + 1) - at(ii - 2)) * at(ii - 1) - x[i] + forcing;
    }
    for i in 2..k - 1 {
        out[i] = (x[i + 1] - x[i - 2]) * x[i - 1] - x[i] + forcing;
    }
}

/// `dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F` with cyclic indices.
pub fn lorenz96_rhs(x: &[f64], forcing: f64) -> Result<Vec<f64>> {
    if x.len() < MIN_K {
        return Err(Error::validation(format!(
            "Lorenz 96 needs K >= {MIN_K}, got {}",
            x.len()
        )));
    }
    let mut out = vec![0.0; x.len()];
    rhs_into(x, forcing, &mut out);
    Ok(out)
}

/// Reusable RK4 stage buffers for one state dimension.
#[derive(Clone, Debug)]
pub struct Rk4 {
    forcing: f64,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(k: usize, forcing: f64) -> Result<Self> {
        if k < MIN_K {
            return Err(Error::validation(format!("Lorenz 96 needs K >= {MIN_K}, got {k}")));
        }
        Ok(Self {
            forcing,
            k1: vec![0.0; k],
            k2: vec![0.0; k],
            k3: vec![0.0; k],
            k4: vec![0.0; k],
            tmp: vec![0.0; k],
        })
    }

    pub fn step(&mut self, x: &mut [f64], dt: f64) {
        let f = self.forcing;
        let half = 0.5 * dt;
        rhs_into(x, f, &mut self.k1);
        for ((t, &xi), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k1) {
            *t = xi + half * k;
        }
        rhs_into(&self.tmp, f, &mut self.k2);
        for ((t, &xi), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k2) {
            *t = xi + half * k;
        }
        rhs_into(&self.tmp, f, &mut self.k3);
        for ((t, &xi), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k3) {
            *t = xi + dt * k;
        }
        rhs_into(&self.tmp, f, &mut self.k4);
        let sixth = dt / 6.0;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    /// Advances `steps` RK4 steps, checking for blowup after each one. On failure the
    /// returned step is 1-based and counted from the start of this call.
    pub fn advance(&mut self, x: &mut [f64], dt: f64, steps: usize) -> Result<(), (usize, f64)> {
        for s in 0..steps {
            self.step(x, dt);
            let worst = x.iter().fold(0.0f64, |acc, v| {
                if v.is_finite() {
                    acc.max(v.abs())
                } else {
                    f64::INFINITY
                }
            });
            if worst > BLOWUP_THRESHOLD || !worst.is_finite() {
                return Err((s + 1, worst));
            }
        }
        Ok(())
    }
}

pub fn rk4_step(x: &[f64], dt: f64, forcing: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    let mut rk = Rk4::new(x.len(), forcing)?;
    let mut out = x.to_vec();
    rk.step(&mut out, dt);
    Ok(out)
}

/// Writes `(x_{K-1}, x_K, x_1)` into the three ghost slots of a lifted row.
pub fn sync_ghosts(row: &mut [f64]) {
    let n = row.len();
    row[0] = row[n - 2];
    row[1] = row[n - 1];
    row[2] = row[LEADING_RANDOM];
}

/// Evolves one lifted row in place for `steps` steps and synchronizes its ghost slots.
pub(crate) fn evolve_row(
    row: &mut [f64],
    rk: &mut Rk4,
    dt: f64,
    steps: usize,
    sample: usize,
) -> Result<()> {
    rk.advance(&mut row[LEADING_RANDOM..], dt, steps)
        .map_err(|(step, magnitude)| Error::NumericalBlowup {
            sample,
            step,
            magnitude,
        })?;
    sync_ghosts(row);
    Ok(())
}

/// Evolves every row of an unevolved lifted dataset for `config.horizon` time units.
///
/// Rows are integrated in parallel; the output does not depend on the thread count.
pub fn evolve_lifted(lifted: &LiftedDataset, config: ChaosConfig) -> Result<LiftedDataset> {
    config.validate()?;
    if lifted.is_evolved() {
        return Err(Error::validation("dataset has already been evolved"));
    }
    let m_lift = lifted.m_lift();
    if config.k + LEADING_RANDOM != m_lift {
        return Err(Error::validation(format!(
            "K = {} does not match m_lift - 3 = {}",
            config.k,
            m_lift as isize - LEADING_RANDOM as isize
        )));
    }
    let steps = config.steps()?;
    let mut samples = lifted.samples.clone();
    samples
        .as_mut_slice()
        .par_chunks_mut(m_lift)
        .enumerate()
        .try_for_each_init(
            || Rk4::new(config.k, config.forcing).expect("K validated"),
            |rk, (i, row)| evolve_row(row, rk, config.dt, steps, i),
        )?;
    Ok(LiftedDataset {
        samples,
        labels: lifted.labels.clone(),
        m: lifted.m,
        config: lifted.config,
        chaos: Some(config),
    })
}
