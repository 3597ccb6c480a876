use serde_json::{json, Value};

use vglass::finiten::{free_energy_finite, self_overlap_stats, GibbsMode, GibbsSpec};
use vglass::functional::{cascade_oracle, parisi_functional, OracleSpec};
use vglass::model::Check;
use vglass::symcone::PsdMatrix;
use vglass::varforms::{
    check_equivalence, free_energy_hj, free_energy_pan, free_energy_xistar, grad_parisi, hopf_value, parisi_value,
    parisi_value_constrained, VariationalResult,
};

use crate::config::{self, Config, OBSERVABLES};
use crate::report::{cell, matrix, num, variational, Outcome, Status, Table};
use crate::CliError;

fn check_json(c: &Check<f64>) -> Value {
    json!({
        "passed": c.passed,
        "worst": num(c.worst),
        "counterexample": c.counterexample.as_ref().map(|ms| ms.iter().map(matrix).collect::<Vec<_>>()),
    })
}

pub fn validate(cfg: &Config) -> Result<Outcome, CliError> {
    let block = cfg.validate.clone().unwrap_or_default();
    let model = cfg.model()?;
    cfg.spins(model.dim())?;
    let r = model.validate_hypotheses(block.samples, block.seed.unwrap_or(0));
    let checks = [
        ("nonnegative", &r.nonnegative),
        ("monotone", &r.monotone),
        ("gradient-monotone", &r.gradient_monotone),
        ("convex", &r.convex),
    ];
    let mut table = Table::new(&["check", "passed", "worst"]);
    let mut obj = serde_json::Map::new();
    for (name, c) in checks {
        table.push(vec![name.into(), c.passed.to_string(), cell(c.worst)]);
        obj.insert(name.into(), check_json(c));
    }
    let json = json!({
        "passed": r.passed(),
        "samples": r.samples,
        "odd_terms": r.odd_terms,
        "checks": obj,
    });
    let status = if r.passed() {
        Status::Pass
    } else {
        let failed: Vec<&str> = checks.iter().filter(|(_, c)| !c.passed).map(|(n, _)| *n).collect();
        Status::Fail(format!("hypothesis counterexample found ({})", failed.join(", ")))
    };
    Ok(Outcome { json, table, status })
}

pub fn eval(cfg: &Config) -> Result<Outcome, CliError> {
    let block = cfg.eval.as_ref().ok_or_else(|| CliError::config("eval: block missing"))?;
    let model = cfg.model()?;
    let d = model.dim();
    let spins = cfg.spins(d)?;
    let x = config::matrix(&block.x, d, "eval.x")?;
    let path = config::path(&block.path, d)?;
    let q = block.quadrature.spec()?;
    let r = parisi_functional(&model, &spins, &path, &x, &q)?;
    let mut table = Table::new(&["quantity", "value", "std_error"]);
    table.push(vec!["recursion".into(), cell(r.value), cell(r.std_error)]);
    let mut json = json!({
        "value": num(r.value),
        "std_error": num(r.std_error),
        "level_norms": r.level_norms,
    });
    if let Some(o) = &block.oracle {
        let spec = OracleSpec { atoms: o.atoms, replicas: o.replicas, seed: o.seed.unwrap_or(0) };
        let c = cascade_oracle(&model, &spins, &path, &x, &spec)?;
        let sigma = (r.std_error.powi(2) + c.std_error.powi(2)).sqrt();
        table.push(vec!["oracle".into(), cell(c.value), cell(c.std_error)]);
        table.push(vec!["difference".into(), cell(r.value - c.value), cell(sigma)]);
        json["oracle"] = json!({
            "value": num(c.value),
            "std_error": num(c.std_error),
            "tail_mass": num(c.tail_mass),
            "truncation_flag": c.truncation_flag,
            "difference": num(r.value - c.value),
            "combined_sigma": num(sigma),
        });
    }
    Ok(Outcome { json, table, status: Status::Pass })
}

fn summary_table(rows: &[(&str, &VariationalResult<f64>)]) -> Table {
    let mut t = Table::new(&["quantity", "value", "std_error", "converged", "diverged", "evals"]);
    for (name, r) in rows {
        t.push(vec![
            name.to_string(),
            cell(r.value),
            cell(r.std_error),
            r.converged.to_string(),
            r.diverged.to_string(),
            r.evals.to_string(),
        ]);
    }
    t
}

fn convergence(results: &[&VariationalResult<f64>]) -> Status {
    if results.iter().all(|r| r.converged) {
        Status::Pass
    } else {
        Status::Warn("optimizer did not converge within its budget; best-so-far reported".into())
    }
}

pub fn solve(cfg: &Config) -> Result<Outcome, CliError> {
    let block = cfg.solve.as_ref().ok_or_else(|| CliError::config("solve: block missing"))?;
    let model = cfg.model()?;
    let d = model.dim();
    let spins = cfg.spins(d)?;
    let spec = block.optimizer.spec()?;
    let x = config::matrix(&block.x, d, "solve.x")?;
    let tr = cfg.trace;
    let single = |name: &str, r: VariationalResult<f64>| Outcome {
        json: variational(&r, tr),
        table: summary_table(&[(name, &r)]),
        status: convergence(&[&r]),
    };
    let out = match block.objective.as_str() {
        "parisi" => single("parisi", parisi_value(&model, &spins, &x, &spec)?),
        "parisi-constrained" => {
            let z = block.z.as_ref().ok_or_else(|| CliError::config("solve.z: required for parisi-constrained"))?;
            let z = PsdMatrix::new(config::matrix(&Some(z.clone()), d, "solve.z")?)?;
            single("parisi-constrained", parisi_value_constrained(&model, &spins, &x, &z, &spec)?)
        }
        "grad" => {
            let g = grad_parisi(&model, &spins, &x, &spec, block.fd_step)?;
            let mut json = json!({
                "grad": matrix(&g.grad),
                "std_error": num(g.std_error),
                "flagged": g.flagged,
                "optimum": variational(&g.optimum, tr),
            });
            if let Some(fd) = &g.fd {
                json["fd"] = matrix(fd);
            }
            let mut table = Table::new(&["i", "j", "grad", "std_error"]);
            for i in 0..d {
                for j in i..d {
                    table.push(vec![i.to_string(), j.to_string(), cell(g.grad.get(i, j)), cell(g.std_error)]);
                }
            }
            let status = if g.flagged {
                Status::Warn("envelope gradient and finite differences disagree".into())
            } else {
                convergence(&[&g.optimum])
            };
            Outcome { json, table, status }
        }
        "pan" => single("pan", free_energy_pan(&model, &spins, &spec)?),
        "hj" => single("hj", free_energy_hj(&model, &spins, &spec)?),
        "xistar" => single("xistar", free_energy_xistar(&model, &spins, &spec)?),
        "hopf" => {
            if !(block.t >= 0.0) {
                return Err(CliError::config("solve.t: must be nonnegative"));
            }
            single("hopf", hopf_value(&model, &spins, block.t, &x, block.domain()?, &spec)?)
        }
        "equivalence" => {
            let rep = check_equivalence(&model, &spins, &spec, block.extra_points)?;
            let rows: Vec<Value> = rep
                .rows
                .iter()
                .map(|r| json!({"label": r.label, "a": num(r.a), "b": num(r.b), "diff": num(r.diff), "tol": r.tol, "pass": r.pass}))
                .collect();
            let mut table = Table::new(&["label", "a", "b", "diff", "tol", "pass"]);
            for r in &rep.rows {
                table.push(vec![r.label.clone(), cell(r.a), cell(r.b), cell(r.diff), cell(r.tol), r.pass.to_string()]);
            }
            let json = json!({
                "passed": rep.passed(),
                "rows": rows,
                "pan": variational(&rep.pan, tr),
                "hj": variational(&rep.hj, tr),
                "xistar": variational(&rep.xistar, tr),
                "hopf": variational(&rep.hopf, tr),
            });
            let status = if rep.passed() {
                Status::Pass
            } else {
                Status::Warn("formulas disagree beyond tolerance".into())
            };
            Outcome { json, table, status }
        }
        other => {
            return Err(CliError::config(format!(
                "solve.objective: unknown objective `{other}` (expected parisi, grad, parisi-constrained, pan, hj, xistar, hopf, equivalence)"
            )))
        }
    };
    Ok(out)
}

pub fn simulate(cfg: &Config) -> Result<Outcome, CliError> {
    let block = cfg.simulate.as_ref().ok_or_else(|| CliError::config("simulate: block missing"))?;
    let model = cfg.model()?;
    let d = model.dim();
    let spins = cfg.spins(d)?;
    let x = config::matrix(&block.x, d, "simulate.x")?;
    let mode = match block.mode.as_str() {
        "enumerate" => GibbsMode::Enumerate,
        "metropolis" => GibbsMode::Metropolis,
        other => return Err(CliError::config(format!("simulate.mode: unknown mode `{other}`"))),
    };
    for o in &block.observables {
        if !OBSERVABLES.contains(&o.as_str()) {
            return Err(CliError::config(format!("simulate.observables: unknown observable `{o}`")));
        }
    }
    if block.n.is_empty() || block.n.contains(&0) {
        return Err(CliError::config("simulate.n: give one or more positive sizes"));
    }
    let want = |o: &str| block.observables.iter().any(|b| b == o);
    let seed = block.seed.unwrap_or(0);
    let mut table = Table::new(&["n", "observable", "entry", "value", "std_error"]);
    let mut sweeps = Vec::new();
    for &n in &block.n {
        let spec = GibbsSpec {
            mode,
            n,
            x: x.clone(),
            correction: block.correction,
            sweeps: block.sweeps,
            burn_in: block.burn_in,
            seed,
        };
        let mut entry = json!({ "n": n });
        if want("free-energy") {
            let f = free_energy_finite(&model, &spins, &spec, block.disorder)?;
            table.push(vec![n.to_string(), "free-energy".into(), String::new(), cell(f.value), cell(f.std_error)]);
            entry["free_energy"] = json!({"value": num(f.value), "std_error": num(f.std_error)});
        }
        if want("self-overlap") || want("concentration") {
            let s = self_overlap_stats(&model, &spins, &spec, block.disorder)?;
            if want("self-overlap") {
                for i in 0..d {
                    for j in i..d {
                        table.push(vec![
                            n.to_string(),
                            "self-overlap".into(),
                            format!("{i},{j}"),
                            cell(s.mean.get(i, j)),
                            cell(s.mean_se.get(i, j)),
                        ]);
                    }
                }
                entry["self_overlap"] = json!({"mean": matrix(&s.mean), "std_error": matrix(&s.mean_se)});
            }
            if want("concentration") {
                table.push(vec![
                    n.to_string(),
                    "concentration".into(),
                    String::new(),
                    cell(s.concentration),
                    cell(s.concentration_se),
                ]);
                entry["concentration"] = json!({"value": num(s.concentration), "std_error": num(s.concentration_se)});
            }
            entry["disorder_seeds"] = json!(s.seeds);
        }
        sweeps.push(entry);
    }
    Ok(Outcome { json: json!({ "sweeps": sweeps }), table, status: Status::Pass })
}
