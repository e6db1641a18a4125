//! QFI flow `∂F/∂t`, its per-channel subflows `I_i = γ_i J_i`, the Hamiltonian
//! correction, and the lumped remainder from θ-dependent rates and jump
//! operators.
//!
//! The full flow is evaluated as `Tr{L·[2∂θ(Kρ) − L·Kρ]}`, which splits as
//!
//! ```text
//! full_flow = ham_term + Σ_i γ_i J_i + residual_T
//! ```
//!
//! where `ham_term = −2i·Tr(L[∂θH, ρ])` and `residual_T` collects every term
//! carrying `∂θγ_i` or `∂θA_i`. A central difference of the QFI time series
//! provides an independent check on all of it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{sld, EstimationError};
use crate::model::{ModelError, ModelSpec};
use crate::operators::{commutator, ComplexMatrix, DensityMatrix, OperatorError, C64, I};
use crate::propagation::{StatePair, Trajectory};

/// Sign threshold used when classifying `γ_i < 0` and `I_i > 0`.
pub const INTERVAL_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("at t = {t}: {source}")]
    Estimation { t: f64, source: EstimationError },
    #[error("series of length {0} is too short for a finite difference (need 3)")]
    SeriesTooShort(usize),
    #[error("index {k} outside series of length {len}")]
    IndexOutOfRange { k: usize, len: usize },
    #[error("no flow records")]
    EmptyRecords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subflow {
    pub label: String,
    pub gamma: f64,
    pub j: f64,
    pub i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub t: f64,
    pub qfi: f64,
    pub flow_fd: f64,
    pub subflows: Vec<Subflow>,
    pub ham_term: f64,
    pub full_flow: f64,
    pub residual_t: f64,
    pub thresholded_pairs: usize,
    /// Largest imaginary trace residue seen while computing this record.
    pub imag_residue: f64,
}

impl FlowRecord {
    pub fn subflow_sum(&self) -> f64 {
        self.subflows.iter().map(|s| s.i).sum()
    }
}

/// `J = −Tr{ρ [L,A]† [L,A]}`, nonpositive for any state.
pub fn subflow_j(
    rho: &DensityMatrix,
    l: &ComplexMatrix,
    a: &ComplexMatrix,
) -> Result<f64, FlowError> {
    let m = commutator(l, a)?;
    if m.dim() != rho.dim() {
        return Err(OperatorError::DimensionMismatch {
            left: rho.dim(),
            right: m.dim(),
        }
        .into());
    }
    Ok(-(&m.dagger() * &m).trace_product(rho.matrix()).re)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecomposition {
    pub subflows: Vec<Subflow>,
    pub sum: f64,
}

pub fn channel_decomposition(
    model: &ModelSpec,
    theta: f64,
    t: f64,
    rho: &DensityMatrix,
    l: &ComplexMatrix,
) -> Result<ChannelDecomposition, FlowError> {
    let subflows = model
        .channels
        .iter()
        .map(|ch| {
            let gamma = ch.gamma.eval(theta, t)?;
            let a = ch.a.eval(model.dim, theta, t)?;
            let j = subflow_j(rho, l, &a)?;
            Ok(Subflow {
                label: ch.label.clone(),
                gamma,
                j,
                i: gamma * j,
            })
        })
        .collect::<Result<Vec<_>, FlowError>>()?;
    let sum = subflows.iter().map(|s| s.i).sum();
    Ok(ChannelDecomposition { subflows, sum })
}

/// `−2i·Tr(L[∂θH, ρ])`, real for Hermitian arguments.
pub fn hamiltonian_term(
    model: &ModelSpec,
    theta: f64,
    t: f64,
    rho: &DensityMatrix,
    l: &ComplexMatrix,
) -> Result<f64, FlowError> {
    if model.dh_dtheta.is_identically_zero() {
        return Ok(0.0);
    }
    let dh = model.dh_dtheta.eval(model.dim, theta, t)?;
    Ok(ham_term_value(&dh, rho.matrix(), l)?.re)
}

fn ham_term_value(
    dh: &ComplexMatrix,
    rho: &ComplexMatrix,
    l: &ComplexMatrix,
) -> Result<C64, OperatorError> {
    Ok(l.trace_product(&commutator(dh, rho)?) * (-2.0 * I))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceValue {
    pub value: f64,
    pub imag_residue: f64,
}

/// `Re Tr{L·[2∂θ(Kρ) − L·(Kρ)]}` with `∂θ(Kρ)` taken from the differentiated
/// generator acting on the co-evolved pair.
pub fn full_flow(
    model: &ModelSpec,
    theta: f64,
    t: f64,
    state: &StatePair,
    l: &ComplexMatrix,
) -> Result<TraceValue, FlowError> {
    let gen = model.generator_at(theta, t)?;
    let rho = state.rho.matrix();
    let k_rho = gen.apply(rho)?;
    let dk_rho = gen.apply_theta_derivative(rho, &state.drho_dtheta)?;
    let v = l.trace_product(&dk_rho) * 2.0 - (l * l).trace_product(&k_rho);
    Ok(TraceValue {
        value: v.re,
        imag_residue: v.im,
    })
}

/// Lumped contribution of every term carrying `∂θγ_i` or `∂θA_i`.
pub fn residual_t(full_flow: f64, ham_term: f64, sum_subflows: f64) -> f64 {
    full_flow - ham_term - sum_subflows
}

/// Second-order finite difference of a uniformly sampled series at index `k`:
/// central in the interior, one-sided three-point at either end.
pub fn fd_flow_oracle(series: &[f64], dt: f64, k: usize) -> Result<f64, FlowError> {
    let n = series.len();
    if n < 3 {
        return Err(FlowError::SeriesTooShort(n));
    }
    if k >= n {
        return Err(FlowError::IndexOutOfRange { k, len: n });
    }
    let f = series;
    Ok(if k == 0 {
        (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt)
    } else if k == n - 1 {
        (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt)
    } else {
        (f[k + 1] - f[k - 1]) / (2.0 * dt)
    })
}

/// Evaluates the SLD, QFI and every flow quantity at each grid point.
pub fn flow_records(traj: &Trajectory, eps_rank: f64) -> Result<Vec<FlowRecord>, FlowError> {
    let model = &traj.model;
    let theta = traj.theta;
    let mut records = Vec::with_capacity(traj.states.len());
    for state in &traj.states {
        let t = state.t;
        let s = sld(&state.rho, &state.drho_dtheta, eps_rank)
            .map_err(|source| FlowError::Estimation { t, source })?;
        let dec = channel_decomposition(model, theta, t, &state.rho, &s.l)?;
        let ham = hamiltonian_term(model, theta, t, &state.rho, &s.l)?;
        let full = full_flow(model, theta, t, state, &s.l)?;
        let imag_residue = full.imag_residue.abs().max(s.qfi_imag_residue.abs());
        let scale = s.qfi.abs().max(1.0);
        if imag_residue > 1e-10 * scale {
            log::warn!("imaginary trace residue {imag_residue:e} at t = {t}");
        }
        records.push(FlowRecord {
            t,
            qfi: s.qfi,
            flow_fd: 0.0,
            residual_t: residual_t(full.value, ham, dec.sum),
            subflows: dec.subflows,
            ham_term: ham,
            full_flow: full.value,
            thresholded_pairs: s.thresholded_pairs,
            imag_residue,
        });
    }
    let series: Vec<f64> = records.iter().map(|r| r.qfi).collect();
    if series.len() >= 3 {
        for (k, r) in records.iter_mut().enumerate() {
            r.flow_fd = fd_flow_oracle(&series, traj.meta.dt, k)?;
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub label: String,
    pub negative_rate_intervals: Vec<(f64, f64)>,
    pub positive_subflow_intervals: Vec<(f64, f64)>,
    /// Fraction of negative-rate grid points that also carry a positive
    /// subflow; `None` when the rate is never negative.
    pub overlap_fraction: Option<f64>,
}

fn runs(times: &[f64], flags: &[bool]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (k, &on) in flags.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((times[s], times[k - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((times[s], times[flags.len() - 1]));
    }
    out
}

/// Maximal grid intervals of `γ_i < 0` and of `I_i > 0`, per channel.
pub fn classify_intervals(records: &[FlowRecord]) -> Result<Vec<IntervalReport>, FlowError> {
    let first = records.first().ok_or(FlowError::EmptyRecords)?;
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let reports = first
        .subflows
        .iter()
        .enumerate()
        .map(|(c, sub)| {
            let neg: Vec<bool> = records
                .iter()
                .map(|r| r.subflows[c].gamma < -INTERVAL_THRESHOLD)
                .collect();
            let pos: Vec<bool> = records
                .iter()
                .map(|r| r.subflows[c].i > INTERVAL_THRESHOLD)
                .collect();
            let n_neg = neg.iter().filter(|&&b| b).count();
            let n_both = neg.iter().zip(&pos).filter(|(&a, &b)| a && b).count();
            IntervalReport {
                label: sub.label.clone(),
                negative_rate_intervals: runs(&times, &neg),
                positive_subflow_intervals: runs(&times, &pos),
                overlap_fraction: (n_neg > 0).then(|| n_both as f64 / n_neg as f64),
            }
        })
        .collect();
    Ok(reports)
}

/// Maxima over interior grid points, where the central-difference oracle is
/// second-order accurate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub max_qfi: f64,
    pub max_abs_fd_minus_full_flow: f64,
    pub max_abs_fd_minus_subflow_sum: f64,
    pub max_abs_ham_term: f64,
    pub max_abs_residual_t: f64,
    pub max_imag_residue: f64,
    pub max_thresholded_pairs: usize,
}

impl FlowStats {
    pub fn from_records(records: &[FlowRecord]) -> Self {
        let mut s = FlowStats::default();
        for r in records {
            s.max_qfi = s.max_qfi.max(r.qfi);
            s.max_abs_ham_term = s.max_abs_ham_term.max(r.ham_term.abs());
            s.max_abs_residual_t = s.max_abs_residual_t.max(r.residual_t.abs());
            s.max_imag_residue = s.max_imag_residue.max(r.imag_residue);
            s.max_thresholded_pairs = s.max_thresholded_pairs.max(r.thresholded_pairs);
        }
        if records.len() >= 3 {
            for r in &records[1..records.len() - 1] {
                s.max_abs_fd_minus_full_flow =
                    s.max_abs_fd_minus_full_flow.max((r.flow_fd - r.full_flow).abs());
                s.max_abs_fd_minus_subflow_sum = s
                    .max_abs_fd_minus_subflow_sum
                    .max((r.flow_fd - r.subflow_sum()).abs());
            }
        }
        s
    }

    /// `1e-5·max(1, max_t F)`.
    pub fn oracle_tolerance(&self) -> f64 {
        1e-5 * self.max_qfi.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::DEFAULT_EPS_RANK;
    use crate::model::{builtin_model, Channel, Rho0Family, TimeDependentOperator, TimeDependentScalar};
    use crate::operators::{pauli, validate_density, ToleranceConfig};
    use crate::propagation::propagate;
    use crate::testutil::{random_hermitian, random_matrix, random_mixed_state};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn dm(m: ComplexMatrix) -> DensityMatrix {
        validate_density(&m, &ToleranceConfig::default()).unwrap()
    }

    fn mixed() -> DensityMatrix {
        dm(ComplexMatrix::identity(2).scale(0.5))
    }

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn subflow_j_examples() {
        let z = pauli::sigma_z();
        assert_eq!(subflow_j(&mixed(), &z, &z).unwrap(), 0.0);
        let j = subflow_j(&mixed(), &pauli::sigma_x(), &pauli::sigma_minus()).unwrap();
        assert!((j + 1.0).abs() < 1e-15);
        let j = subflow_j(&mixed(), &pauli::sigma_x(), &pauli::sigma_z()).unwrap();
        assert!((j + 4.0).abs() < 1e-15);
        assert!(subflow_j(&mixed(), &pauli::sigma_x(), &ComplexMatrix::zeros(3)).is_err());
    }

    fn one_channel(gamma: f64) -> ModelSpec {
        ModelSpec {
            dim: 2,
            hamiltonian: TimeDependentOperator::zero(),
            dh_dtheta: TimeDependentOperator::zero(),
            channels: vec![Channel {
                label: "ad".into(),
                a: TimeDependentOperator::constant(pauli::sigma_minus()),
                da_dtheta: TimeDependentOperator::zero(),
                gamma: TimeDependentScalar::constant(gamma),
                dgamma_dtheta: TimeDependentScalar::zero(),
            }],
            rho0_family: Rho0Family::Plus,
            theta: 0.0,
        }
    }

    #[test]
    fn decomposition_examples() {
        let mut m = one_channel(1.0);
        m.channels.clear();
        let d = channel_decomposition(&m, 0.0, 0.0, &mixed(), &pauli::sigma_x()).unwrap();
        assert!(d.subflows.is_empty() && d.sum == 0.0);

        let m = one_channel(-0.5);
        let d = channel_decomposition(&m, 0.0, 0.0, &mixed(), &pauli::sigma_x()).unwrap();
        assert!((d.subflows[0].j + 1.0).abs() < 1e-15);
        assert!((d.subflows[0].i - 0.5).abs() < 1e-15);
        assert!((d.sum - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decomposition_sign_under_positive_rate() {
        let m = builtin_model("ad-nm", &BTreeMap::new()).unwrap();
        let traj = propagate(&m, m.theta, 1.0, 1e-3, &ToleranceConfig::default()).unwrap();
        let st = &traj.states[500];
        assert!(m.channels[0].gamma.eval(m.theta, st.t).unwrap() > 0.0);
        let l = sld(&st.rho, &st.drho_dtheta, DEFAULT_EPS_RANK).unwrap().l;
        let d = channel_decomposition(&m, m.theta, st.t, &st.rho, &l).unwrap();
        assert!(d.subflows[0].i <= 0.0);
    }

    #[test]
    fn hamiltonian_term_examples() {
        let m = one_channel(1.0);
        assert_eq!(hamiltonian_term(&m, 0.0, 0.0, &mixed(), &pauli::sigma_x()).unwrap(), 0.0);

        let mut m = builtin_model("phase-dephasing", &BTreeMap::new()).unwrap();
        m.dh_dtheta = TimeDependentOperator::constant(ComplexMatrix::diag(&[0.3, -0.1]));
        let rho = dm(ComplexMatrix::diag(&[0.7, 0.3]));
        let v = hamiltonian_term(&m, 0.0, 0.0, &rho, &pauli::sigma_y()).unwrap();
        assert_eq!(v, 0.0);

        let m = builtin_model("phase-dephasing", &BTreeMap::new()).unwrap();
        let v = hamiltonian_term(&m, 0.0, 1.0, &dm(pauli::plus()), &pauli::sigma_y()).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn unitary_theta_independent_flow_vanishes() {
        let mut m = one_channel(0.0);
        m.channels.clear();
        m.hamiltonian = TimeDependentOperator::constant(pauli::sigma_x().scale(0.7));
        m.rho0_family = Rho0Family::RyGround;
        let traj = propagate(&m, 0.6, 3.0, 1e-3, &ToleranceConfig::default()).unwrap();
        let recs = flow_records(&traj, DEFAULT_EPS_RANK).unwrap();
        for r in &recs {
            assert!(r.full_flow.abs() < 1e-9, "t = {}: {}", r.t, r.full_flow);
        }
        let f0 = recs[0].qfi;
        assert!(recs.iter().all(|r| (r.qfi - f0).abs() < 1e-6));
    }

    #[test]
    fn phase_estimation_full_flow_is_two_t() {
        let m = builtin_model("phase-dephasing", &params(&[("theta", 0.0), ("gamma0", 0.0)])).unwrap();
        let traj = propagate(&m, 0.0, 2.0, 1e-3, &ToleranceConfig::default()).unwrap();
        let recs = flow_records(&traj, DEFAULT_EPS_RANK).unwrap();
        for r in recs.iter().step_by(100) {
            assert!((r.full_flow - 2.0 * r.t).abs() < 1e-6);
            assert!((r.qfi - r.t * r.t).abs() < 1e-9);
            assert!(r.residual_t.abs() < 1e-9);
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(residual_t(1.0, 0.25, 0.5), 0.25);
        let tol = ToleranceConfig::default();
        let m = builtin_model("rate-estimation", &BTreeMap::new()).unwrap();
        let traj = propagate(&m, m.theta, 2.0, 1e-3, &tol).unwrap();
        let recs = flow_records(&traj, DEFAULT_EPS_RANK).unwrap();
        let stats = FlowStats::from_records(&recs);
        assert!(stats.max_abs_residual_t > 1e-2);
        for r in &recs[1..recs.len() - 1] {
            let oracle_residual = r.flow_fd - r.ham_term - r.subflow_sum();
            assert!((r.residual_t - oracle_residual).abs() <= stats.oracle_tolerance());
        }

        let m = builtin_model("phase-dephasing", &BTreeMap::new()).unwrap();
        let traj = propagate(&m, m.theta, 2.0, 1e-3, &tol).unwrap();
        for r in flow_records(&traj, DEFAULT_EPS_RANK).unwrap() {
            assert!(r.residual_t.abs() <= 1e-6 * r.qfi.abs().max(1.0));
        }
    }

    #[test]
    fn fd_oracle_examples() {
        assert_eq!(fd_flow_oracle(&[0.0, 1.0, 4.0, 9.0], 1.0, 2).unwrap(), 4.0);
        assert_eq!(fd_flow_oracle(&[3.0; 5], 0.1, 2).unwrap(), 0.0);
        // One-sided stencils are exact on quadratics too.
        assert_eq!(fd_flow_oracle(&[0.0, 1.0, 4.0, 9.0], 1.0, 0).unwrap(), 0.0);
        assert_eq!(fd_flow_oracle(&[0.0, 1.0, 4.0, 9.0], 1.0, 3).unwrap(), 6.0);
        let dt = 1e-3;
        let s: Vec<f64> = (0..2000).map(|k| (k as f64 * dt).sin()).collect();
        for k in [1, 500, 1998] {
            assert!((fd_flow_oracle(&s, dt, k).unwrap() - (k as f64 * dt).cos()).abs() < 1e-6);
        }
        assert_eq!(fd_flow_oracle(&[1.0, 2.0], 1.0, 0), Err(FlowError::SeriesTooShort(2)));
        assert!(matches!(
            fd_flow_oracle(&[1.0, 2.0, 3.0], 1.0, 3),
            Err(FlowError::IndexOutOfRange { .. })
        ));
    }

    fn synthetic(gammas: &[f64], js: &[f64]) -> Vec<FlowRecord> {
        gammas
            .iter()
            .zip(js)
            .enumerate()
            .map(|(k, (&g, &j))| FlowRecord {
                t: k as f64 * 0.5,
                qfi: 0.0,
                flow_fd: 0.0,
                subflows: vec![Subflow {
                    label: "c".into(),
                    gamma: g,
                    j,
                    i: g * j,
                }],
                ham_term: 0.0,
                full_flow: 0.0,
                residual_t: 0.0,
                thresholded_pairs: 0,
                imag_residue: 0.0,
            })
            .collect()
    }

    #[test]
    fn interval_examples() {
        let recs = synthetic(&[1.0, 0.5, 2.0], &[-1.0, -1.0, -1.0]);
        let rep = &classify_intervals(&recs).unwrap()[0];
        assert!(rep.negative_rate_intervals.is_empty());
        assert_eq!(rep.overlap_fraction, None);

        let recs = synthetic(&[-1.0; 4], &[-1.0; 4]);
        let rep = &classify_intervals(&recs).unwrap()[0];
        assert_eq!(rep.negative_rate_intervals, vec![(0.0, 1.5)]);
        assert_eq!(rep.positive_subflow_intervals, vec![(0.0, 1.5)]);
        assert_eq!(rep.overlap_fraction, Some(1.0));

        let recs = synthetic(&[1.0, -1.0, -1.0, 1.0, -1.0], &[-1.0, -1.0, 0.0, -1.0, -1.0]);
        let rep = &classify_intervals(&recs).unwrap()[0];
        assert_eq!(rep.negative_rate_intervals, vec![(0.5, 1.0), (2.0, 2.0)]);
        assert_eq!(rep.positive_subflow_intervals, vec![(0.5, 0.5), (2.0, 2.0)]);
        assert!((rep.overlap_fraction.unwrap() - 2.0 / 3.0).abs() < 1e-15);

        assert_eq!(classify_intervals(&[]), Err(FlowError::EmptyRecords));
    }

    #[test]
    fn ad_nm_negative_windows_match_analytic_sign() {
        let m = builtin_model("ad-nm", &BTreeMap::new()).unwrap();
        let traj = propagate(&m, m.theta, 5.0, 1e-3, &ToleranceConfig::default()).unwrap();
        let recs = flow_records(&traj, DEFAULT_EPS_RANK).unwrap();
        let rep = &classify_intervals(&recs).unwrap()[0];
        // γ = 1 + 1.5 sin 2t < 0 ⇔ sin 2t < −2/3.
        let x = (2.0_f64 / 3.0).asin();
        // The next window opens at (3π + x)/2 ≈ 5.08, past the run.
        let windows = [((std::f64::consts::PI + x) / 2.0, (2.0 * std::f64::consts::PI - x) / 2.0)];
        assert_eq!(rep.negative_rate_intervals.len(), 1);
        for ((a, b), (ea, eb)) in rep.negative_rate_intervals.iter().zip(windows) {
            assert!((a - ea).abs() <= 1e-3 && (b - eb).abs() <= 1e-3, "{a} {b} vs {ea} {eb}");
        }
        assert!(rep.overlap_fraction.unwrap() >= 0.99);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn subflow_j_is_nonpositive(seed in any::<u64>(), dim in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = dm(random_mixed_state(&mut rng, dim));
            let l = random_hermitian(&mut rng, dim);
            let a = random_matrix(&mut rng, dim);
            prop_assert!(subflow_j(&rho, &l, &a).unwrap() <= 1e-12);
        }
    }
}
