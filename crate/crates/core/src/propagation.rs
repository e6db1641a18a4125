//! Joint fixed-step RK4 integration of `ρ` and `∂θρ`.
//!
//! The θ-derivative is co-evolved with `d(∂θρ)/dt = ∂θ(Kρ)`, so the mixed
//! partials of `ρ` in `t` and `θ` commute by construction.
//! [`fd_theta_consistency`] measures agreement with an independent central
//! difference over neighbouring θ trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Generator, ModelError, ModelSpec};
use crate::operators::{
    hermitize, validate_density, ComplexMatrix, DensityError, DensityMatrix, ToleranceConfig,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 5.0;
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("density matrix invalid at t = {t}: {source}")]
    Density { t: f64, source: DensityError },
    #[error("d rho/d theta invalid at t = {t}: {reason}")]
    Derivative { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub rho: DensityMatrix,
    pub drho_dtheta: ComplexMatrix,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub method: String,
    pub dt: f64,
    pub steps: usize,
    pub tolerances: ToleranceConfig,
    pub max_trace_drift: f64,
    pub max_drho_trace: f64,
    pub min_eigenvalue: f64,
    /// Largest `max |M − M†|` seen before the post-step hermitization.
    pub max_prehermitize_drift: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: ModelSpec,
    pub theta: f64,
    pub grid: Vec<f64>,
    pub states: Vec<StatePair>,
    pub meta: IntegratorMeta,
}

/// Output of one raw RK4 step before validation.
struct RawStep {
    rho: ComplexMatrix,
    drho: ComplexMatrix,
    prehermitize_drift: f64,
}

fn rk4_raw(
    k_start: &Generator,
    k_mid: &Generator,
    k_end: &Generator,
    rho: &ComplexMatrix,
    drho: &ComplexMatrix,
    dt: f64,
) -> Result<RawStep, ModelError> {
    let deriv = |k: &Generator,
                 r: &ComplexMatrix,
                 d: &ComplexMatrix|
     -> Result<(ComplexMatrix, ComplexMatrix), ModelError> {
        Ok((k.apply(r)?, k.apply_theta_derivative(r, d)?))
    };
    let (k1r, k1d) = deriv(k_start, rho, drho)?;
    let (k2r, k2d) = deriv(
        k_mid,
        &(rho + &k1r.scale(0.5 * dt)),
        &(drho + &k1d.scale(0.5 * dt)),
    )?;
    let (k3r, k3d) = deriv(
        k_mid,
        &(rho + &k2r.scale(0.5 * dt)),
        &(drho + &k2d.scale(0.5 * dt)),
    )?;
    let (k4r, k4d) = deriv(k_end, &(rho + &k3r.scale(dt)), &(drho + &k3d.scale(dt)))?;
    let combine = |y: &ComplexMatrix,
                   a: ComplexMatrix,
                   b: ComplexMatrix,
                   c: ComplexMatrix,
                   d: ComplexMatrix| {
        let mut incr = a;
        incr += &b.scale(2.0);
        incr += &c.scale(2.0);
        incr += &d;
        y + &incr.scale(dt / 6.0)
    };
    let rho_new = combine(rho, k1r, k2r, k3r, k4r);
    let drho_new = combine(drho, k1d, k2d, k3d, k4d);
    let prehermitize_drift = rho_new
        .hermiticity_deviation()
        .max(drho_new.hermiticity_deviation());
    Ok(RawStep {
        rho: hermitize(&rho_new),
        drho: hermitize(&drho_new),
        prehermitize_drift,
    })
}

fn check_derivative(
    drho: &ComplexMatrix,
    t: f64,
    tol: &ToleranceConfig,
) -> Result<(), PropagationError> {
    let dev = drho.hermiticity_deviation();
    if dev > tol.herm {
        return Err(PropagationError::Derivative {
            t,
            reason: format!("not Hermitian ({dev:e})"),
        });
    }
    let tr = drho.trace().norm();
    if tr > tol.trace {
        return Err(PropagationError::Derivative {
            t,
            reason: format!("trace {tr:e}"),
        });
    }
    Ok(())
}

/// One classical RK4 step of the pair `(ρ, ∂θρ)`; both outputs are hermitized.
pub fn step_rk4(
    model: &ModelSpec,
    theta: f64,
    state: &StatePair,
    dt: f64,
    tol: &ToleranceConfig,
) -> Result<StatePair, PropagationError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PropagationError::InvalidArgument("dt > 0".into()));
    }
    let t = state.t;
    let times = [t, t + 0.5 * dt, t + dt];
    model.validate_on_grid(theta, &times, tol)?;
    let raw = rk4_raw(
        &model.generator_at(theta, t)?,
        &model.generator_at(theta, t + 0.5 * dt)?,
        &model.generator_at(theta, t + dt)?,
        state.rho.matrix(),
        &state.drho_dtheta,
        dt,
    )?;
    let t_new = t + dt;
    let rho = validate_density(&raw.rho, tol)
        .map_err(|source| PropagationError::Density { t: t_new, source })?;
    check_derivative(&raw.drho, t_new, tol)?;
    Ok(StatePair {
        rho,
        drho_dtheta: raw.drho,
        t: t_new,
    })
}

/// Uniform grid `t_k = k·dt'` on `[0, t_end]`, with `dt' ≤ dt` chosen so the
/// last point lands on `t_end`.
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<(Vec<f64>, f64), PropagationError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(PropagationError::InvalidArgument("t_end > 0".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PropagationError::InvalidArgument("dt > 0".into()));
    }
    let ratio = t_end / dt;
    if ratio > MAX_STEPS as f64 {
        return Err(PropagationError::InvalidArgument(format!(
            "t_end/dt = {ratio} exceeds {MAX_STEPS}"
        )));
    }
    let steps = ((ratio - 1e-9).ceil() as usize).max(1);
    let h = t_end / steps as f64;
    Ok(((0..=steps).map(|k| k as f64 * h).collect(), h))
}

pub fn propagate(
    model: &ModelSpec,
    theta: f64,
    t_end: f64,
    dt: f64,
    tol: &ToleranceConfig,
) -> Result<Trajectory, PropagationError> {
    let (grid, h) = uniform_grid(t_end, dt)?;
    model.validate(tol)?;
    let mut probe: Vec<f64> = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        probe.push(w[0]);
        probe.push(0.5 * (w[0] + w[1]));
    }
    probe.push(t_end);
    model.validate_on_grid(theta, &probe, tol)?;

    let rho0 = validate_density(&model.rho0_family.rho(theta), tol)
        .map_err(|source| PropagationError::Density { t: 0.0, source })?;
    let drho0 = model.rho0_family.drho_dtheta(theta);
    check_derivative(&drho0, 0.0, tol)?;

    let mut meta = IntegratorMeta {
        method: "rk4".into(),
        dt: h,
        steps: grid.len() - 1,
        tolerances: *tol,
        max_trace_drift: rho0.trace_drift(),
        max_drho_trace: drho0.trace().norm(),
        min_eigenvalue: rho0.min_eigenvalue(),
        max_prehermitize_drift: 0.0,
    };
    let mut states = Vec::with_capacity(grid.len());
    states.push(StatePair {
        rho: rho0,
        drho_dtheta: drho0,
        t: 0.0,
    });
    let mut k_start = model.generator_at(theta, grid[0])?;
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let k_mid = model.generator_at(theta, 0.5 * (t0 + t1))?;
        let k_end = model.generator_at(theta, t1)?;
        let prev = states.last().expect("nonempty");
        let raw = rk4_raw(&k_start, &k_mid, &k_end, prev.rho.matrix(), &prev.drho_dtheta, t1 - t0)?;
        let rho = validate_density(&raw.rho, tol)
            .map_err(|source| PropagationError::Density { t: t1, source })?;
        check_derivative(&raw.drho, t1, tol)?;
        meta.max_trace_drift = meta.max_trace_drift.max(rho.trace_drift());
        meta.max_drho_trace = meta.max_drho_trace.max(raw.drho.trace().norm());
        meta.min_eigenvalue = meta.min_eigenvalue.min(rho.min_eigenvalue());
        meta.max_prehermitize_drift = meta.max_prehermitize_drift.max(raw.prehermitize_drift);
        states.push(StatePair {
            rho,
            drho_dtheta: raw.drho,
            t: t1,
        });
        k_start = k_end;
    }
    Ok(Trajectory {
        model: model.clone(),
        theta,
        grid,
        states,
        meta,
    })
}

/// Max over the grid of the entrywise gap between the co-evolved `∂θρ` and
/// `[ρ(θ+δ) − ρ(θ−δ)]/(2δ)`.
pub fn fd_theta_consistency(
    model: &ModelSpec,
    theta: f64,
    delta_theta: f64,
    t_end: f64,
    dt: f64,
    tol: &ToleranceConfig,
) -> Result<f64, PropagationError> {
    if !(delta_theta > 0.0 && delta_theta.is_finite()) {
        return Err(PropagationError::InvalidArgument("delta_theta > 0".into()));
    }
    let (center, plus, minus) = std::thread::scope(|s| {
        let plus = s.spawn(|| propagate(model, theta + delta_theta, t_end, dt, tol));
        let minus = s.spawn(|| propagate(model, theta - delta_theta, t_end, dt, tol));
        let center = propagate(model, theta, t_end, dt, tol);
        (
            center,
            plus.join().expect("propagation thread panicked"),
            minus.join().expect("propagation thread panicked"),
        )
    });
    let (center, plus, minus) = (center?, plus?, minus?);
    Ok(max_fd_deviation(&center, &plus, &minus, delta_theta))
}

pub fn max_fd_deviation(
    center: &Trajectory,
    plus: &Trajectory,
    minus: &Trajectory,
    delta: f64,
) -> f64 {
    center
        .states
        .iter()
        .zip(plus.states.iter().zip(&minus.states))
        .map(|(c, (p, m))| {
            let fd = (p.rho.matrix() - m.rho.matrix()).scale(0.5 / delta);
            (&fd - &c.drho_dtheta).max_abs()
        })
        .fold(0.0, f64::max)
}
