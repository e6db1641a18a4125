//! Time-local GKSL generators `K(θ;t)` and their θ-derivatives.
//!
//! A model is a Hamiltonian plus a list of dissipative channels, each operator
//! being a sum of `(scalar function of θ, t) × (constant matrix)` terms. The
//! θ-derivatives of every ingredient are carried explicitly alongside it.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{
    anticommutator, commutator, pauli, validate_density, ComplexMatrix, DensityError,
    OperatorError, ToleranceConfig, I,
};

/// `|D(t)|` below this is treated as a pole of the Jaynes–Cummings rate.
pub const POLE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("decay rate has a pole near t = {t}")]
    Pole { t: f64 },
    #[error("unknown built-in model '{0}'")]
    UnknownModel(String),
    #[error("model '{model}' has no parameter '{key}'")]
    UnknownParameter { model: String, key: String },
    #[error("invalid parameter '{key}' = {value}: {reason}")]
    InvalidParameter { key: String, value: f64, reason: String },
    #[error("invalid initial state at theta = {theta}: {source}")]
    InitialState { theta: f64, source: DensityError },
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Real scalar function of `(θ, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeDependentScalar {
    Constant {
        c: f64,
    },
    /// `c0·(1 + a·sin(ωt + φ))`
    Sinusoidal {
        c0: f64,
        a: f64,
        omega: f64,
        #[serde(default)]
        phi: f64,
    },
    /// Exact damped Jaynes–Cummings decay rate for a Lorentzian reservoir.
    JcLorentzian {
        gamma0: f64,
        lambda: f64,
    },
    /// `θ · inner(θ, t)`
    ThetaScaled {
        inner: Box<TimeDependentScalar>,
    },
}

impl TimeDependentScalar {
    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn zero() -> Self {
        Self::Constant { c: 0.0 }
    }

    pub fn theta_scaled(inner: TimeDependentScalar) -> Self {
        Self::ThetaScaled {
            inner: Box::new(inner),
        }
    }

    pub fn eval(&self, theta: f64, t: f64) -> Result<f64, ModelError> {
        match self {
            Self::Constant { c } => Ok(*c),
            Self::Sinusoidal { c0, a, omega, phi } => Ok(c0 * (1.0 + a * (omega * t + phi).sin())),
            Self::JcLorentzian { gamma0, lambda } => {
                let (s, d) = jc_parts(*gamma0, *lambda, t);
                if d.abs() < POLE_THRESHOLD {
                    return Err(ModelError::Pole { t });
                }
                Ok(2.0 * gamma0 * lambda * s / d)
            }
            Self::ThetaScaled { inner } => Ok(theta * inner.eval(theta, t)?),
        }
    }

    /// True when the function is the constant zero.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            Self::Constant { c } => *c == 0.0,
            Self::Sinusoidal { c0, .. } => *c0 == 0.0,
            Self::JcLorentzian { gamma0, lambda } => *gamma0 == 0.0 || *lambda == 0.0,
            Self::ThetaScaled { inner } => inner.is_identically_zero(),
        }
    }

    /// Rejects grids on which a Jaynes–Cummings denominator vanishes or changes
    /// sign between consecutive samples.
    pub fn check_poles(&self, times: &[f64]) -> Result<(), ModelError> {
        match self {
            Self::JcLorentzian { gamma0, lambda } => {
                let mut prev: Option<f64> = None;
                for &t in times {
                    let (_, d) = jc_parts(*gamma0, *lambda, t);
                    if d.abs() < POLE_THRESHOLD || prev.is_some_and(|p| p.signum() != d.signum()) {
                        return Err(ModelError::Pole { t });
                    }
                    prev = Some(d);
                }
                Ok(())
            }
            Self::ThetaScaled { inner } => inner.check_poles(times),
            _ => Ok(()),
        }
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        let bad = |key: &str, value: f64| ModelError::InvalidParameter {
            key: key.into(),
            value,
            reason: "must be finite".into(),
        };
        match self {
            Self::Constant { c } if !c.is_finite() => Err(bad("c", *c)),
            Self::Sinusoidal { c0, a, omega, phi } => {
                for (k, v) in [("c0", c0), ("a", a), ("omega", omega), ("phi", phi)] {
                    if !v.is_finite() {
                        return Err(bad(k, *v));
                    }
                }
                Ok(())
            }
            Self::JcLorentzian { gamma0, lambda } => {
                for (k, v) in [("gamma0", gamma0), ("lambda", lambda)] {
                    if !v.is_finite() {
                        return Err(bad(k, *v));
                    }
                }
                Ok(())
            }
            Self::ThetaScaled { inner } => inner.check_finite(),
            _ => Ok(()),
        }
    }
}

/// Numerator `S(t)` and denominator `D(t)` of `γ(t) = 2γ₀λ·S/D`, rescaled so
/// that `D(0) = 1`. With `d² = λ² − 2γ₀λ < 0` the hyperbolic functions turn
/// trigonometric (`sinh(ix) = i·sin(x)`), and `d = 0` is the common limit.
fn jc_parts(gamma0: f64, lambda: f64, t: f64) -> (f64, f64) {
    let kappa = lambda * lambda - 2.0 * gamma0 * lambda;
    let (s, c) = if kappa > 0.0 {
        let d = kappa.sqrt();
        ((0.5 * d * t).tanh() / d, 1.0)
    } else if kappa < 0.0 {
        let d = (-kappa).sqrt();
        let (sn, cs) = (0.5 * d * t).sin_cos();
        (sn / d, cs)
    } else {
        (0.5 * t, 1.0)
    };
    (s, c + lambda * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorTerm {
    pub base: ComplexMatrix,
    pub modulation: TimeDependentScalar,
}

/// `Σ_k f_k(θ, t)·B_k`. An empty term list is the zero operator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDependentOperator {
    pub terms: Vec<OperatorTerm>,
}

impl TimeDependentOperator {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(base: ComplexMatrix) -> Self {
        Self::modulated(base, TimeDependentScalar::constant(1.0))
    }

    pub fn modulated(base: ComplexMatrix, modulation: TimeDependentScalar) -> Self {
        Self {
            terms: vec![OperatorTerm { base, modulation }],
        }
    }

    pub fn eval(&self, dim: usize, theta: f64, t: f64) -> Result<ComplexMatrix, ModelError> {
        let mut out = ComplexMatrix::zeros(dim);
        for term in &self.terms {
            let f = term.modulation.eval(theta, t)?;
            if f != 0.0 {
                out += &term.base.scale(f);
            }
        }
        Ok(out)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|term| term.base.is_zero() || term.modulation.is_identically_zero())
    }

    fn check(&self, what: &str, dim: usize) -> Result<(), ModelError> {
        for term in &self.terms {
            if term.base.dim() != dim {
                return Err(ModelError::Invalid(format!(
                    "{what}: term of dimension {} in a model of dimension {dim}",
                    term.base.dim()
                )));
            }
            term.modulation.check_finite()?;
        }
        Ok(())
    }

    fn check_poles(&self, times: &[f64]) -> Result<(), ModelError> {
        self.terms
            .iter()
            .try_for_each(|term| term.modulation.check_poles(times))
    }
}

/// One dissipative channel `γ_i(θ;t)·D[A_i(θ;t)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub label: String,
    #[serde(rename = "A")]
    pub a: TimeDependentOperator,
    #[serde(rename = "dA_dtheta")]
    pub da_dtheta: TimeDependentOperator,
    pub gamma: TimeDependentScalar,
    pub dgamma_dtheta: TimeDependentScalar,
}

/// Parametric initial state `ρ₀(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rho0Family {
    /// `R_y(θ)|0⟩⟨0|R_y(θ)†` with `R_y(θ)|0⟩ = cos(θ/2)|0⟩ + sin(θ/2)|1⟩`.
    RyGround,
    Ground,
    Excited,
    Plus,
    /// θ-independent user-supplied state.
    Fixed { matrix: ComplexMatrix },
}

impl Rho0Family {
    fn qubit_only(&self) -> bool {
        !matches!(self, Self::Fixed { .. })
    }

    pub fn rho(&self, theta: f64) -> ComplexMatrix {
        match self {
            Self::RyGround => {
                let (s, c) = (0.5 * theta).sin_cos();
                ComplexMatrix::from_real_rows(&[&[c * c, c * s], &[c * s, s * s]]).expect("2x2")
            }
            Self::Ground => pauli::ground(),
            Self::Excited => pauli::excited(),
            Self::Plus => pauli::plus(),
            Self::Fixed { matrix } => matrix.clone(),
        }
    }

    pub fn drho_dtheta(&self, theta: f64) -> ComplexMatrix {
        match self {
            Self::RyGround => {
                let (s, c) = theta.sin_cos();
                ComplexMatrix::from_real_rows(&[&[-0.5 * s, 0.5 * c], &[0.5 * c, 0.5 * s]])
                    .expect("2x2")
            }
            Self::Fixed { matrix } => ComplexMatrix::zeros(matrix.dim()),
            _ => ComplexMatrix::zeros(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub hamiltonian: TimeDependentOperator,
    #[serde(rename = "dH_dtheta")]
    pub dh_dtheta: TimeDependentOperator,
    #[serde(default)]
    pub channels: Vec<Channel>,
    pub rho0_family: Rho0Family,
    pub theta: f64,
}

impl ModelSpec {
    /// Structural checks that do not depend on the run interval.
    pub fn validate(&self, tol: &ToleranceConfig) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::Invalid("dim must be positive".into()));
        }
        if !self.theta.is_finite() {
            return Err(ModelError::InvalidParameter {
                key: "theta".into(),
                value: self.theta,
                reason: "must be finite".into(),
            });
        }
        self.hamiltonian.check("hamiltonian", self.dim)?;
        self.dh_dtheta.check("dH_dtheta", self.dim)?;
        let mut labels = std::collections::BTreeSet::new();
        for ch in &self.channels {
            if ch.label.is_empty()
                || !ch
                    .label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(ModelError::Invalid(format!(
                    "channel label '{}' must be non-empty [A-Za-z0-9_-]",
                    ch.label
                )));
            }
            if !labels.insert(ch.label.as_str()) {
                return Err(ModelError::Invalid(format!("duplicate channel label '{}'", ch.label)));
            }
            ch.a.check(&format!("channel {} A", ch.label), self.dim)?;
            ch.da_dtheta
                .check(&format!("channel {} dA_dtheta", ch.label), self.dim)?;
            ch.gamma.check_finite()?;
            ch.dgamma_dtheta.check_finite()?;
        }
        if self.rho0_family.qubit_only() && self.dim != 2 {
            return Err(ModelError::Invalid(format!(
                "rho0 family {:?} requires dim 2",
                self.rho0_family
            )));
        }
        if let Rho0Family::Fixed { matrix } = &self.rho0_family {
            if matrix.dim() != self.dim {
                return Err(ModelError::Invalid("rho0 matrix has the wrong dimension".into()));
            }
        }
        // Finite-difference probes use θ ± δ as well.
        for theta in [self.theta, self.theta - 1e-4, self.theta + 1e-4] {
            validate_density(&self.rho0_family.rho(theta), tol)
                .map_err(|source| ModelError::InitialState { theta, source })?;
        }
        Ok(())
    }

    /// Checks Hermiticity of `H` and `∂θH` and absence of rate poles on the
    /// given sample times (which should include half steps for RK4).
    pub fn validate_on_grid(
        &self,
        theta: f64,
        times: &[f64],
        tol: &ToleranceConfig,
    ) -> Result<(), ModelError> {
        self.hamiltonian.check_poles(times)?;
        self.dh_dtheta.check_poles(times)?;
        for ch in &self.channels {
            ch.gamma.check_poles(times)?;
            ch.dgamma_dtheta.check_poles(times)?;
            ch.a.check_poles(times)?;
            ch.da_dtheta.check_poles(times)?;
        }
        let stride = (times.len() / 16).max(1);
        for &t in times.iter().step_by(stride) {
            for (what, op) in [("hamiltonian", &self.hamiltonian), ("dH_dtheta", &self.dh_dtheta)] {
                let dev = op.eval(self.dim, theta, t)?.hermiticity_deviation();
                if dev > tol.herm {
                    return Err(ModelError::Invalid(format!(
                        "{what} not Hermitian at t = {t} (deviation {dev:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether the declared θ-derivatives of `H`, every `γ_i` and every `A_i`
    /// all vanish identically.
    pub fn declares_theta_independence(&self) -> bool {
        self.dh_dtheta.is_identically_zero()
            && self
                .channels
                .iter()
                .all(|c| c.dgamma_dtheta.is_identically_zero() && c.da_dtheta.is_identically_zero())
    }

    /// Evaluates every ingredient of the generator at `(θ, t)`.
    pub fn generator_at(&self, theta: f64, t: f64) -> Result<Generator, ModelError> {
        let n = self.dim;
        let channels = self
            .channels
            .iter()
            .map(|ch| {
                let a = ch.a.eval(n, theta, t)?;
                let da = ch.da_dtheta.eval(n, theta, t)?;
                let a_dag = a.dagger();
                let da_dag = da.dagger();
                let ada = &a_dag * &a;
                let d_ada = &(&da_dag * &a) + &(&a_dag * &da);
                Ok(ChannelAt {
                    gamma: ch.gamma.eval(theta, t)?,
                    dgamma: ch.dgamma_dtheta.eval(theta, t)?,
                    a,
                    a_dag,
                    da,
                    da_dag,
                    ada,
                    d_ada,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Generator {
            h: self.hamiltonian.eval(n, theta, t)?,
            dh: self.dh_dtheta.eval(n, theta, t)?,
            channels,
        })
    }
}

/// Generator ingredients frozen at one `(θ, t)`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub h: ComplexMatrix,
    pub dh: ComplexMatrix,
    pub channels: Vec<ChannelAt>,
}

#[derive(Debug, Clone)]
pub struct ChannelAt {
    pub gamma: f64,
    pub dgamma: f64,
    pub a: ComplexMatrix,
    pub a_dag: ComplexMatrix,
    pub da: ComplexMatrix,
    pub da_dag: ComplexMatrix,
    pub ada: ComplexMatrix,
    pub d_ada: ComplexMatrix,
}

impl ChannelAt {
    /// `A ρ A† − ½{A†A, ρ}`
    fn dissipator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, OperatorError> {
        let jump = &(&self.a * rho) * &self.a_dag;
        Ok(&jump - &anticommutator(&self.ada, rho)?.scale(0.5))
    }
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `Kρ = −i[H, ρ] + Σ γ_i (A_i ρ A_i† − ½{A_i†A_i, ρ})`
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, OperatorError> {
        let mut out = commutator(&self.h, rho)?.scale_c(-I);
        for ch in &self.channels {
            if ch.gamma != 0.0 {
                out += &ch.dissipator(rho)?.scale(ch.gamma);
            }
        }
        Ok(out)
    }

    /// `∂θ(Kρ) = (∂θK)ρ + K(∂θρ)`.
    pub fn apply_theta_derivative(
        &self,
        rho: &ComplexMatrix,
        drho: &ComplexMatrix,
    ) -> Result<ComplexMatrix, OperatorError> {
        if drho.dim() != rho.dim() {
            return Err(OperatorError::DimensionMismatch {
                left: rho.dim(),
                right: drho.dim(),
            });
        }
        let mut out = commutator(&self.dh, rho)?.scale_c(-I);
        out += &commutator(&self.h, drho)?.scale_c(-I);
        for ch in &self.channels {
            if ch.dgamma != 0.0 {
                out += &ch.dissipator(rho)?.scale(ch.dgamma);
            }
            if ch.gamma != 0.0 {
                let mut inner = &(&ch.da * rho) * &ch.a_dag;
                inner += &(&(&ch.a * rho) * &ch.da_dag);
                inner += &(&(&ch.a * drho) * &ch.a_dag);
                inner += &anticommutator(&ch.d_ada, rho)?.scale(-0.5);
                inner += &anticommutator(&ch.ada, drho)?.scale(-0.5);
                out += &inner.scale(ch.gamma);
            }
        }
        Ok(out)
    }
}

fn check_dim(model: &ModelSpec, m: &ComplexMatrix) -> Result<(), ModelError> {
    if m.dim() != model.dim {
        return Err(OperatorError::DimensionMismatch {
            left: model.dim,
            right: m.dim(),
        }
        .into());
    }
    Ok(())
}

pub fn apply_generator(
    model: &ModelSpec,
    theta: f64,
    t: f64,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix, ModelError> {
    check_dim(model, rho)?;
    Ok(model.generator_at(theta, t)?.apply(rho)?)
}

pub fn apply_generator_theta_derivative(
    model: &ModelSpec,
    theta: f64,
    t: f64,
    rho: &ComplexMatrix,
    drho_dtheta: &ComplexMatrix,
) -> Result<ComplexMatrix, ModelError> {
    check_dim(model, rho)?;
    check_dim(model, drho_dtheta)?;
    Ok(model
        .generator_at(theta, t)?
        .apply_theta_derivative(rho, drho_dtheta)?)
}

/// Finite-difference view of one θ-dependent ingredient over sampled times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IngredientCheck {
    /// Whether the model's declared derivative vanishes identically.
    pub declared_zero: bool,
    /// Largest entry of the declared derivative.
    pub declared_max: f64,
    /// Largest entry of the central difference in θ.
    pub fd_max: f64,
    /// Largest entrywise gap between declared and central-difference values.
    pub mismatch: f64,
}

impl IngredientCheck {
    fn absorb(&mut self, declared: f64, fd: f64, gap: f64) {
        self.declared_max = self.declared_max.max(declared);
        self.fd_max = self.fd_max.max(fd);
        self.mismatch = self.mismatch.max(gap);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaDerivativeCheck {
    pub hamiltonian: IngredientCheck,
    pub gamma: IngredientCheck,
    pub lindblad: IngredientCheck,
}

/// Compares the declared `∂θH`, `∂θγ_i`, `∂θA_i` against central differences
/// of `H`, `γ_i`, `A_i` in θ at the given times.
pub fn theta_derivative_check(
    model: &ModelSpec,
    theta: f64,
    times: &[f64],
    delta: f64,
) -> Result<ThetaDerivativeCheck, ModelError> {
    let n = model.dim;
    let mut out = ThetaDerivativeCheck {
        hamiltonian: IngredientCheck {
            declared_zero: model.dh_dtheta.is_identically_zero(),
            ..Default::default()
        },
        gamma: IngredientCheck {
            declared_zero: model
                .channels
                .iter()
                .all(|c| c.dgamma_dtheta.is_identically_zero()),
            ..Default::default()
        },
        lindblad: IngredientCheck {
            declared_zero: model.channels.iter().all(|c| c.da_dtheta.is_identically_zero()),
            ..Default::default()
        },
    };
    let (tp, tm) = (theta + delta, theta - delta);
    let op_fd = |op: &TimeDependentOperator, t: f64| -> Result<ComplexMatrix, ModelError> {
        Ok((&op.eval(n, tp, t)? - &op.eval(n, tm, t)?).scale(0.5 / delta))
    };
    for &t in times {
        let declared = model.dh_dtheta.eval(n, theta, t)?;
        let fd = op_fd(&model.hamiltonian, t)?;
        out.hamiltonian
            .absorb(declared.max_abs(), fd.max_abs(), (&declared - &fd).max_abs());
        for ch in &model.channels {
            let declared = ch.dgamma_dtheta.eval(theta, t)?;
            let fd = (ch.gamma.eval(tp, t)? - ch.gamma.eval(tm, t)?) * 0.5 / delta;
            out.gamma.absorb(declared.abs(), fd.abs(), (declared - fd).abs());
            let declared = ch.da_dtheta.eval(n, theta, t)?;
            let fd = op_fd(&ch.a, t)?;
            out.lindblad
                .absorb(declared.max_abs(), fd.max_abs(), (&declared - &fd).max_abs());
        }
    }
    Ok(out)
}

pub const BUILTIN_MODELS: [&str; 4] = ["ad-nm", "ad-jc", "phase-dephasing", "rate-estimation"];

struct Params<'a> {
    model: &'a str,
    given: &'a BTreeMap<String, f64>,
}

impl Params<'_> {
    fn get(&self, key: &str, default: f64) -> Result<f64, ModelError> {
        let v = self.given.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(ModelError::InvalidParameter {
                key: key.into(),
                value: v,
                reason: "must be finite".into(),
            });
        }
        Ok(v)
    }

    fn only(&self, allowed: &[&str]) -> Result<(), ModelError> {
        match self.given.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(ModelError::UnknownParameter {
                model: self.model.into(),
                key: k.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn amplitude_damping(
    label: &str,
    gamma: TimeDependentScalar,
    dgamma_dtheta: TimeDependentScalar,
) -> Channel {
    Channel {
        label: label.into(),
        a: TimeDependentOperator::constant(pauli::sigma_minus()),
        da_dtheta: TimeDependentOperator::zero(),
        gamma,
        dgamma_dtheta,
    }
}

/// Demonstration models. Parameters not given take the defaults listed in
/// the README; unknown keys are rejected.
pub fn builtin_model(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec, ModelError> {
    let p = Params { model: name, given: params };
    let half_sz = pauli::sigma_z().scale(0.5);
    match name {
        "ad-nm" => {
            p.only(&["gamma0", "a", "omega", "phi", "omega0", "theta"])?;
            let gamma = TimeDependentScalar::Sinusoidal {
                c0: p.get("gamma0", 1.0)?,
                a: p.get("a", 1.5)?,
                omega: p.get("omega", 2.0)?,
                phi: p.get("phi", 0.0)?,
            };
            Ok(ModelSpec {
                dim: 2,
                hamiltonian: TimeDependentOperator::constant(half_sz.scale(p.get("omega0", 1.0)?)),
                dh_dtheta: TimeDependentOperator::zero(),
                channels: vec![amplitude_damping("ad", gamma, TimeDependentScalar::zero())],
                rho0_family: Rho0Family::RyGround,
                theta: p.get("theta", FRAC_PI_4)?,
            })
        }
        "ad-jc" => {
            p.only(&["gamma0", "lambda", "omega0", "theta"])?;
            let gamma = TimeDependentScalar::JcLorentzian {
                gamma0: p.get("gamma0", 1.0)?,
                lambda: p.get("lambda", 3.0)?,
            };
            Ok(ModelSpec {
                dim: 2,
                hamiltonian: TimeDependentOperator::constant(half_sz.scale(p.get("omega0", 1.0)?)),
                dh_dtheta: TimeDependentOperator::zero(),
                channels: vec![amplitude_damping("ad", gamma, TimeDependentScalar::zero())],
                rho0_family: Rho0Family::RyGround,
                theta: p.get("theta", FRAC_PI_4)?,
            })
        }
        "phase-dephasing" => {
            p.only(&["gamma0", "a", "omega", "phi", "theta"])?;
            let gamma0 = p.get("gamma0", 0.2)?;
            let mut channels = Vec::new();
            if gamma0 != 0.0 {
                channels.push(Channel {
                    label: "dz".into(),
                    a: TimeDependentOperator::constant(pauli::sigma_z()),
                    da_dtheta: TimeDependentOperator::zero(),
                    gamma: TimeDependentScalar::Sinusoidal {
                        c0: gamma0,
                        a: p.get("a", 0.5)?,
                        omega: p.get("omega", 2.0)?,
                        phi: p.get("phi", 0.0)?,
                    },
                    dgamma_dtheta: TimeDependentScalar::zero(),
                });
            }
            Ok(ModelSpec {
                dim: 2,
                hamiltonian: TimeDependentOperator::modulated(
                    half_sz.clone(),
                    TimeDependentScalar::theta_scaled(TimeDependentScalar::constant(1.0)),
                ),
                dh_dtheta: TimeDependentOperator::constant(half_sz),
                channels,
                rho0_family: Rho0Family::Plus,
                theta: p.get("theta", 0.3)?,
            })
        }
        "rate-estimation" => {
            p.only(&["g0", "g_a", "g_omega", "omega0", "theta"])?;
            let g = match p.get("g_a", 0.0)? {
                0.0 => TimeDependentScalar::constant(p.get("g0", 1.0)?),
                a => TimeDependentScalar::Sinusoidal {
                    c0: p.get("g0", 1.0)?,
                    a,
                    omega: p.get("g_omega", 1.0)?,
                    phi: 0.0,
                },
            };
            Ok(ModelSpec {
                dim: 2,
                hamiltonian: TimeDependentOperator::constant(half_sz.scale(p.get("omega0", 1.0)?)),
                dh_dtheta: TimeDependentOperator::zero(),
                channels: vec![amplitude_damping(
                    "ad",
                    TimeDependentScalar::theta_scaled(g.clone()),
                    g,
                )],
                rho0_family: Rho0Family::Plus,
                theta: p.get("theta", 1.0)?,
            })
        }
        other => Err(ModelError::UnknownModel(other.into())),
    }
}
