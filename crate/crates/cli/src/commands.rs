//! Command implementations; each returns a record plus whether every row succeeded.

use purify_core::analytic::{
    evaluate_protocol, recursion_pn_fn, recursive_protocol, sample_complexity, EigenSpectrum,
};
use purify_core::channels::NoiseChannel;
use purify_core::circuit::{
    apply_purifier, four_copy_ansatz, four_copy_ordering, lcu_purifier, three_copy_circuit,
    train_four_copy_report, BlockEncoding, REFERENCE_FOUR_COPY_ANGLES, TRAINING_TOL,
};
use purify_core::sdp::{
    golden_certificate, solve_fidelity, solve_probability, sweep_tradeoff, SdpStatus,
};
use purify_core::tensor::{kron_all, ComplexMatrix, SubsystemShape};
use purify_core::PurifyError;

use crate::config::{NoiseKind, RunConfig, Target};
use crate::record::{Meta, ResultRecord, Row};
use crate::CliError;

/// Default copy range for `analytic`.
pub const DEFAULT_N_MAX: usize = 10;

/// Default training restarts for `circuit four --train`.
pub const DEFAULT_RESTARTS: usize = 64;

/// Tolerance for the certificate pass/fail column.
pub const CERTIFICATE_TOL: f64 = 1e-10;

pub struct Outcome {
    pub record: ResultRecord,
    /// False when some row did not succeed (e.g. a non-optimal SDP status).
    pub complete: bool,
}

fn finish(cfg: &RunConfig, rows: Vec<Row>, complete: bool) -> Outcome {
    let record = ResultRecord {
        command: cfg.command.clone(),
        params: cfg.params.clone(),
        rows,
        meta: Meta::now(),
    };
    Outcome { record, complete }
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command.as_str() {
        "analytic" => analytic(cfg),
        "sdp fidelity" => sdp_fidelity(cfg),
        "sdp probability" => sdp_probability(cfg),
        "sdp sweep" => sdp_sweep(cfg),
        "certify golden" => certify(cfg),
        "circuit three" | "circuit lcu" | "circuit four" => circuit(cfg),
        "sample-complexity" => sample(cfg),
        "recurse" => recurse(cfg),
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

fn channel(kind: NoiseKind, d: usize, delta: f64) -> Result<NoiseChannel, CliError> {
    let ch = match (kind, d) {
        (NoiseKind::Depolarizing, _) => NoiseChannel::depolarizing(d, delta)?,
        (NoiseKind::Pauli, 2) => NoiseChannel::pauli_preset(delta)?,
        (NoiseKind::Pauli, 4) => NoiseChannel::pauli_preset_qudit(delta)?,
        (NoiseKind::AmplitudeDamping, 2) => NoiseChannel::amplitude_damping(delta)?,
        (NoiseKind::Pauli, _) => {
            return Err(CliError::Usage("pauli noise needs --d 2 or --d 4".into()))
        }
        (NoiseKind::AmplitudeDamping, _) => {
            return Err(CliError::Usage("ad noise needs --d 2".into()))
        }
    };
    Ok(ch)
}

fn require_depolarizing(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.noise != NoiseKind::Depolarizing {
        return Err(CliError::Usage(format!(
            "{} supports depolarizing noise only",
            cfg.command
        )));
    }
    Ok(())
}

fn single_delta(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.deltas()?.as_slice() {
        [d] => Ok(*d),
        _ => Err(CliError::Usage(format!(
            "{} takes a single --delta",
            cfg.command
        ))),
    }
}

fn analytic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    require_depolarizing(cfg)?;
    let d = cfg.require_d()?;
    let n_max = cfg.n_max.unwrap_or(DEFAULT_N_MAX);
    if n_max == 0 {
        return Err(CliError::Usage("--n-max must be ≥ 1".into()));
    }
    let mut rows = Vec::new();
    for delta in cfg.deltas()? {
        let spec = EigenSpectrum::depolarizing(d, delta)?;
        for pt in recursion_pn_fn(&spec, n_max) {
            rows.push(
                Row::new()
                    .num("delta", delta)
                    .int("n", pt.n)
                    .num("p_n", pt.p)
                    .num("f_n", pt.f)
                    .num("n_over_p_n", pt.expected_copies()),
            );
        }
    }
    Ok(finish(cfg, rows, true))
}

fn symmetric_row(ch: &NoiseChannel, n: usize) -> Result<(Row, f64, f64), CliError> {
    let pt = evaluate_protocol(ch, n)?;
    let row = Row::new()
        .text("series", "symmetric")
        .num("p", pt.p)
        .num("f", pt.f);
    Ok((row, pt.p, pt.f))
}

fn resolve(target: Target, golden: f64) -> f64 {
    match target {
        Target::Value(v) => v,
        Target::Golden => golden,
    }
}

fn sdp_fidelity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.expect_selectors(&["p"])?;
    let ch = channel(cfg.noise, cfg.require_d()?, single_delta(cfg)?)?;
    let n = cfg.single_n(Some(2))?;
    let (marker, p_sym, _) = symmetric_row(&ch, n)?;
    let p = resolve(cfg.p.expect("checked by expect_selectors"), p_sym);
    let res = solve_fidelity(&ch, n, p)?;
    let status = res.solution.status;
    let row = Row::new()
        .text("series", "sdp")
        .num("p", p)
        .num("f", res.value)
        .text("status", status.to_string())
        .num("gap", res.solution.gap)
        .int("iterations", res.solution.iterations);
    Ok(finish(cfg, vec![row, marker], status == SdpStatus::Optimal))
}

fn sdp_probability(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.expect_selectors(&["f"])?;
    let ch = channel(cfg.noise, cfg.require_d()?, single_delta(cfg)?)?;
    let n = cfg.single_n(Some(2))?;
    let (marker, _, f_sym) = symmetric_row(&ch, n)?;
    let f = resolve(cfg.f.expect("checked by expect_selectors"), f_sym);
    let res = solve_probability(&ch, n, f)?;
    let status = res.solution.status;
    let row = Row::new()
        .text("series", "sdp")
        .num("p", res.value)
        .num("f", f)
        .text("status", status.to_string())
        .num("gap", res.solution.gap)
        .int("iterations", res.solution.iterations);
    Ok(finish(cfg, vec![row, marker], status == SdpStatus::Optimal))
}

fn sdp_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.expect_selectors(&["p-grid"])?;
    let ch = channel(cfg.noise, cfg.require_d()?, single_delta(cfg)?)?;
    let n = cfg.single_n(Some(2))?;
    let grid = cfg.p_grid.expect("checked by expect_selectors").values();
    let points = sweep_tradeoff(&ch, n, &grid)?;
    let mut complete = true;
    let mut rows = Vec::with_capacity(points.len() + 1);
    for pt in points {
        let mut row = Row::new().text("series", "sdp").num("p", pt.p);
        match (pt.fidelity, pt.status, pt.gap) {
            (Some(f), Some(status), Some(gap)) => {
                complete &= status == SdpStatus::Optimal;
                row = row
                    .num("f", f)
                    .text("status", status.to_string())
                    .num("gap", gap);
            }
            _ => {
                complete = false;
                row = row
                    .text("status", "error")
                    .text("error", pt.error.unwrap_or_default());
            }
        }
        rows.push(row);
    }
    rows.push(symmetric_row(&ch, n)?.0);
    Ok(finish(cfg, rows, complete))
}

fn certify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    require_depolarizing(cfg)?;
    let d = cfg.require_d()?;
    let mut rows = Vec::new();
    for delta in cfg.deltas()? {
        let rep = golden_certificate(d, delta)?;
        let s = rep.pairing;
        rows.push(
            Row::new()
                .int("d", d)
                .num("delta", delta)
                .num("t2", rep.t2)
                .num("s_plus", s.s_plus)
                .num("s_minus", s.s_minus)
                .num("s0", s.s0)
                .num("s1", s.s1)
                .num("min_eig", rep.min_eig)
                .text(
                    "status",
                    if rep.passes(CERTIFICATE_TOL) {
                        "pass"
                    } else {
                        "fail"
                    },
                ),
        );
    }
    Ok(finish(cfg, rows, true))
}

fn depolarized_copies(d: usize, n: usize, delta: f64) -> Result<ComplexMatrix, CliError> {
    let mut diag = vec![0.0; d];
    diag[0] = 1.0;
    let ideal = ComplexMatrix::from_real_diagonal(SubsystemShape::uniform(d, 1)?, &diag)?;
    let rho = NoiseChannel::depolarizing(d, delta)?.apply(&ideal)?;
    Ok(kron_all(&vec![rho; n]))
}

fn circuit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    require_depolarizing(cfg)?;
    let delta = match cfg.deltas() {
        Ok(_) => single_delta(cfg)?,
        Err(_) if cfg.delta.is_none() && cfg.delta_grid.is_none() => 0.3,
        Err(e) => return Err(e),
    };
    let kind = cfg.command.trim_start_matches("circuit ");
    let mut extra = Row::new();
    let be: BlockEncoding = match kind {
        "three" => {
            simplified_only(cfg, 3)?;
            three_copy_circuit()?
        }
        "lcu" => lcu_purifier(cfg.single_n(None)?, cfg.require_d()?)?,
        _ => {
            simplified_only(cfg, 4)?;
            let (angles, be) = if cfg.train {
                let restarts = cfg.restarts.unwrap_or(DEFAULT_RESTARTS);
                let report = train_four_copy_report(cfg.seed, restarts, &four_copy_ordering())?;
                if report.residual > TRAINING_TOL {
                    return Err(PurifyError::TrainingFailed {
                        best_residual: report.residual,
                    }
                    .into());
                }
                extra = extra.int("restart_seed", report.restart_seed as usize);
                (report.angles, report.encoding)
            } else {
                (
                    REFERENCE_FOUR_COPY_ANGLES.to_vec(),
                    four_copy_ansatz(&REFERENCE_FOUR_COPY_ANGLES)?,
                )
            };
            for (j, a) in angles.iter().enumerate() {
                extra = extra.num(&format!("alpha_{j}"), *a);
            }
            be
        }
    };
    let (n, d) = (be.circuit.n(), be.circuit.d());
    let (p, sigma) = apply_purifier(&be, &depolarized_copies(d, n, delta)?)?;
    if let Some(path) = &cfg.netlist {
        std::fs::write(path, be.circuit.to_netlist())
            .map_err(|e| CliError::Io(format!("cannot write netlist {}: {e}", path.display())))?;
    }
    let mut row = Row::new()
        .text("circuit", kind)
        .int("n", n)
        .int("d", d)
        .num("delta", delta)
        .num("residual", be.residual_to_target)
        .num("success_probability", p)
        .num("fidelity", sigma.get(0, 0).re);
    row.0.extend(extra.0);
    Ok(finish(cfg, vec![row], true))
}

fn simplified_only(cfg: &RunConfig, n: usize) -> Result<(), CliError> {
    if cfg.d.is_some_and(|d| d != 2) {
        return Err(CliError::Usage(format!(
            "{} is a qubit circuit (d = 2)",
            cfg.command
        )));
    }
    if cfg.n.iter().any(|&k| k != n) {
        return Err(CliError::Usage(format!(
            "{} acts on exactly {n} copies",
            cfg.command
        )));
    }
    Ok(())
}

fn sample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    require_depolarizing(cfg)?;
    cfg.expect_selectors(&["f-goal"])?;
    let d = cfg.require_d()?;
    let goal = cfg.f_goal.expect("checked by expect_selectors");
    let mut rows = Vec::new();
    for delta in cfg.deltas()? {
        let res = sample_complexity(delta, d, goal)?;
        rows.push(
            Row::new()
                .num("delta", delta)
                .num("f_goal", goal)
                .int("n", res.n)
                .num("expected_copies", res.expected_copies)
                .num("achieved_f", res.achieved_f),
        );
    }
    Ok(finish(cfg, rows, true))
}

fn recurse(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let d = cfg.require_d()?;
    let ch = channel(cfg.noise, d, single_delta(cfg)?)?;
    if cfg.n.is_empty() {
        return Err(CliError::Usage(
            "recurse needs --n (comma-separated list allowed)".into(),
        ));
    }
    let depth = cfg
        .depth
        .ok_or_else(|| CliError::Usage("recurse needs --depth".into()))?;
    let mut rows = Vec::new();
    for &n in &cfg.n {
        let trace = recursive_protocol(&ch, n, depth)?;
        for (level, f) in trace.fidelities.iter().enumerate() {
            // Level 0 is the unprocessed input, reported with probability 1.
            let p = if level == 0 {
                1.0
            } else {
                trace.success_probabilities[level - 1]
            };
            rows.push(
                Row::new()
                    .int("n", n)
                    .int("level", level)
                    .num("success_probability", p)
                    .num("fidelity", *f),
            );
        }
    }
    Ok(finish(cfg, rows, true))
}
