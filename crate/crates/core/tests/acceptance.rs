//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Stdio};

use qfiflow::cli::{run_simulate, Checks, RunConfig, RunOutcome};
use qfiflow::flow::{subflow_j, FlowRecord};
use qfiflow::model::{builtin_model, Rho0Family, BUILTIN_MODELS};
use qfiflow::operators::{validate_density, ToleranceConfig};
use qfiflow::operators::{hermitize, ComplexMatrix, C64};
use qfiflow::propagation::{fd_theta_consistency, propagate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "common/random.rs"]
mod random;

const T_END: f64 = 5.0;
const DT: f64 = 1e-3;

type Outcome = Result<String, String>;

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn run(name: &str, p: &[(&str, f64)]) -> RunOutcome {
    let mut cfg = RunConfig::from_builtin(name, params(p), T_END, DT).expect("valid config");
    cfg.checks = Checks::none();
    run_simulate(&cfg).expect("run succeeds")
}

fn interior(records: &[FlowRecord]) -> &[FlowRecord] {
    &records[1..records.len() - 1]
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1(runs: &BTreeMap<&str, RunOutcome>) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["ad-nm", "ad-jc"] {
        let s = &runs[name].summary;
        let tol = 1e-5 * s.max_qfi.max(1.0);
        ok &= s.max_abs_flow_fd_minus_subflow_sum <= tol;
        parts.push(format!(
            "{name} max|fd - sum I| = {:.3e} (tol {tol:.1e})",
            s.max_abs_flow_fd_minus_subflow_sum
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_2(runs: &BTreeMap<&str, RunOutcome>) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, o) in runs {
        let s = &o.summary;
        let tol = 1e-5 * s.max_qfi.max(1.0);
        ok &= s.max_abs_flow_fd_minus_full_flow <= tol;
        parts.push(format!("{name} {:.3e}", s.max_abs_flow_fd_minus_full_flow));
    }
    verdict(ok, format!("max|fd - full| per model: {}", parts.join(", ")))
}

fn exit_code(config: &Path, checks: &str) -> Option<i32> {
    let dir = tempfile::tempdir().ok()?;
    Command::new(env!("CARGO_BIN_EXE_qfiflow"))
        .args(["simulate", "--config"])
        .arg(config)
        .arg("--summary")
        .arg(dir.path().join("s.json"))
        .args(["--check", checks])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .ok()?
        .code()
}

fn criterion_3(runs: &BTreeMap<&str, RunOutcome>) -> Outcome {
    let ph = &runs["phase-dephasing"].summary;
    let tol_ph = 1e-6 * ph.max_qfi.max(1.0);
    let ph_ok = ph.max_abs_ham_term > 10.0 * tol_ph && ph.max_abs_residual_t < tol_ph;
    let re = &runs["rate-estimation"].summary;
    let tol_re = 1e-6 * re.max_qfi.max(1.0);
    let re_ok = re.max_abs_residual_t > 10.0 * tol_re;
    let ii_ok = !ph.condition_ii.hamiltonian.holds()
        && ph.condition_ii.gamma.holds()
        && !re.condition_ii.gamma.holds()
        && re.condition_ii.hamiltonian.holds();

    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let codes: Vec<(&str, Option<i32>)> = ["phase-dephasing", "rate-estimation", "ad-nm"]
        .into_iter()
        .map(|m| (m, exit_code(&configs.join(format!("{m}.json")), "decomposition")))
        .collect();
    let exit_ok = codes[0].1 == Some(1) && codes[1].1 == Some(1) && codes[2].1 == Some(0);
    verdict(
        ph_ok && re_ok && ii_ok && exit_ok,
        format!(
            "phase: max|ham| = {:.3e}, max|T| = {:.3e}; rate: max|T| = {:.3e}; \
             decomposition exit codes {:?}",
            ph.max_abs_ham_term, ph.max_abs_residual_t, re.max_abs_residual_t, codes
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let tol = ToleranceConfig::default();
    let n = 10_000;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..n {
        let dim = rng.gen_range(2..=4);
        let rho = if k % 2 == 0 {
            random::random_mixed_state(&mut rng, dim)
        } else {
            random::random_density(&mut rng, dim, false)
        };
        let rho = validate_density(&rho, &tol).map_err(|e| e.to_string())?;
        let l = random::random_hermitian(&mut rng, dim);
        // Every fourth jump operator commutes with L, so J sits at rounding level.
        let a = if k % 4 == 3 {
            &(&l * &l) + &ComplexMatrix::identity(dim).scale_c(C64::new(0.3, -0.7))
        } else {
            random::random_matrix(&mut rng, dim)
        };
        let j = subflow_j(&rho, &l, &a).map_err(|e| e.to_string())?;
        worst = worst.max(j);
    }
    verdict(worst <= 1e-12, format!("{n} random triples, max J = {worst:.3e}"))
}

fn criterion_5() -> Outcome {
    let o = run("phase-dephasing", &[("gamma0", 0.0)]);
    let window: Vec<&FlowRecord> = o.records.iter().filter(|r| r.t >= 0.1 - 1e-12).collect();
    let f_err = window
        .iter()
        .map(|r| (r.qfi - r.t * r.t).abs() / (r.t * r.t))
        .fold(0.0, f64::max);
    let flow_err = window
        .iter()
        .map(|r| (r.full_flow - 2.0 * r.t).abs())
        .fold(0.0, f64::max);
    verdict(
        f_err <= 1e-6 && flow_err <= 1e-6 && o.records[0].subflows.is_empty(),
        format!("max rel|F - t^2| = {f_err:.3e}, max|full - 2t| = {flow_err:.3e} on [0.1, 5]"),
    )
}

fn criterion_6() -> Outcome {
    let o = run("ad-nm", &[("a", 0.5)]);
    let recs = interior(&o.records);
    let min_rate = recs
        .iter()
        .map(|r| r.subflows[0].gamma)
        .fold(f64::INFINITY, f64::min);
    let max_fd = recs.iter().map(|r| r.flow_fd).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        max_fd <= 1e-6 && min_rate >= 0.0,
        format!("a = 0.5: min gamma = {min_rate:.3e}, max flow_fd = {max_fd:.3e}"),
    )
}

fn criterion_7(runs: &BTreeMap<&str, RunOutcome>) -> Outcome {
    let report = &runs["ad-nm"].summary.intervals[0];
    match report.overlap_fraction {
        Some(f) => verdict(
            f >= 0.99,
            format!(
                "a = 1.5: negative-rate windows {:?}, overlap {f:.4}",
                report.negative_rate_intervals
            ),
        ),
        None => Err("a = 1.5: no negative-rate window found".into()),
    }
}

fn criterion_8() -> Outcome {
    let tol = ToleranceConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in BUILTIN_MODELS {
        let model = builtin_model(name, &BTreeMap::new()).map_err(|e| e.to_string())?;
        let dev = fd_theta_consistency(&model, model.theta, 1e-4, T_END, DT, &tol)
            .map_err(|e| e.to_string())?;
        ok &= dev <= 1e-5;
        parts.push(format!("{name} {dev:.3e}"));
    }
    verdict(ok, format!("max|FD_theta rho - drho| per model: {}", parts.join(", ")))
}

fn criterion_9(runs: &BTreeMap<&str, RunOutcome>) -> Outcome {
    let drift = runs.values().map(|o| o.summary.max_trace_drift).fold(0.0, f64::max);
    let min_eig = runs
        .values()
        .map(|o| o.summary.min_rho_eigenvalue)
        .fold(f64::INFINITY, f64::min);

    let mut model = builtin_model("ad-nm", &params(&[("a", 0.0)])).map_err(|e| e.to_string())?;
    model.rho0_family = Rho0Family::Excited;
    let traj = propagate(&model, model.theta, 1.0, DT, &ToleranceConfig::default())
        .map_err(|e| e.to_string())?;
    let last = traj.states.last().expect("nonempty trajectory");
    let excited = last.rho.matrix().get(1, 1).re;
    let decay_err = (excited - (-1.0f64).exp()).abs();

    verdict(
        drift <= 1e-9 && min_eig >= -1e-9 && decay_err <= 1e-8,
        format!(
            "max trace drift {drift:.3e}, min eigenvalue {min_eig:.3e}, |rho_11(1) - 1/e| = {decay_err:.3e}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/ad-nm.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("run{k}.csv"));
        let summary = dir.path().join(format!("run{k}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_qfiflow"))
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&csv)
            .arg("--summary")
            .arg(&summary)
            .args(["--check", "none"])
            .stdout(Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run {k} exited with {status}"));
        }
        let read = |p| std::fs::read(p).map_err(|e: std::io::Error| e.to_string());
        outputs.push((read(&csv)?, read(&summary)?));
    }
    let same = outputs[0] == outputs[1];
    verdict(
        same,
        format!(
            "two runs, CSV {} bytes, summary {} bytes, identical: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn main() {
    let runs: BTreeMap<&str, RunOutcome> = BUILTIN_MODELS
        .into_iter()
        .map(|name| (name, run(name, &[])))
        .collect();

    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "channel decomposition matches flow", criterion_1(&runs)),
        (2, "full flow matches finite differences", criterion_2(&runs)),
        (3, "theta-dependent generators leave remainders", criterion_3(&runs)),
        (4, "subflow kernel is nonpositive", criterion_4()),
        (5, "unitary phase estimation", criterion_5()),
        (6, "nonnegative rates never raise the QFI", criterion_6()),
        (7, "negative rates drive positive subflows", criterion_7(&runs)),
        (8, "co-propagated derivative matches FD in theta", criterion_8()),
        (9, "state validity and decay accuracy", criterion_9(&runs)),
        (10, "deterministic output", criterion_10()),
    ];

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
