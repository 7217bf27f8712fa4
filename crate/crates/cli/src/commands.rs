use crate::args::*;
use crate::error::{invalid, CliError};
use crate::output::{self, artifact, num, Table};
use ringwave::biot_savart::{SingularCellRule, StreamOperator, SUPPORT_EPS};
use ringwave::evolve::{core_radius, verify_traveling, Evolver, DEFAULT_CFL_MAX};
use ringwave::exec::Exec;
use ringwave::fields::{impulse, load_field, lp_norm, mass, weighted_integral, HalfPlaneGrid, ScalarField, Weight};
use ringwave::functionals::{check_admissible, energy_from_stream, AdmissibleTolerance};
use ringwave::kernel::{eval_F, eval_F_prime, FractionalOrder};
use ringwave::rearrange;
use ringwave::travelwave::{solve_traveling_wave, verify_first_order, SeedProfile, SolverOptions, TravelingWave};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

type Res<T = ()> = Result<T, CliError>;

/// What every subcommand sees: its resolved config and the output switches.
pub struct Ctx {
    pub config: Value,
    pub csv: bool,
}

pub fn run(cmd: &Command, ctx: &Ctx) -> Res {
    match cmd {
        Command::KernelTable(a) => kernel_table(a, ctx),
        Command::Stream(a) => stream(a, ctx),
        Command::Functionals(a) => functionals(a, ctx),
        Command::Rearrange(a) => rearrange_cmd(a, ctx),
        Command::Ring(a) => ring(a, ctx),
        Command::Evolve(a) => evolve(a, ctx),
        Command::Verify(a) => verify(a, ctx),
    }
}

fn order(a: f64, c_a: Option<f64>) -> Res<FractionalOrder> {
    Ok(match c_a {
        Some(c) => FractionalOrder::with_constant(a, c)?,
        None => FractionalOrder::new(a)?,
    })
}

fn positive(name: &str, x: f64) -> Res {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

fn required<'a, T>(name: &str, v: &'a Option<T>) -> Res<&'a T> {
    v.as_ref().ok_or_else(|| invalid(format!("missing required parameter --{name}")))
}

fn rule(r: RuleArg) -> SingularCellRule {
    match r {
        RuleArg::CellAverage => SingularCellRule::CellAverage,
        RuleArg::Subtract => SingularCellRule::Subtract,
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn support_margin(xi: &ScalarField) -> Option<usize> {
    let m = xi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    xi.support_margin_cells(SUPPORT_EPS * m)
}

fn kernel_table(args: &KernelTableArgs, ctx: &Ctx) -> Res {
    let order = order(args.order.a, args.order.c_a)?;
    positive("s-min", args.s_min)?;
    positive("s-max", args.s_max)?;
    if args.s_max <= args.s_min || args.points < 2 {
        return Err(invalid("kernel-table needs s-min < s-max and at least 2 points"));
    }
    let mut t = Table::new(&["a", "s", "F", "F_prime", "abs_err"]);
    let (l0, l1) = (args.s_min.ln(), args.s_max.ln());
    for j in 0..args.points {
        let s = (l0 + (l1 - l0) * j as f64 / (args.points - 1) as f64).exp();
        let f = eval_F(&order, s)?;
        let fp = eval_F_prime(&order, s)?;
        t.push(vec![num(order.a()), num(s), num(f.value), num(fp.value), num(f.abs_error_estimate)]);
    }
    print!("{}", t.csv());
    if let Some(prefix) = &args.out_prefix {
        t.write_csv(&artifact(prefix, ".csv"), "kernel-table", &ctx.config)?;
        let body = json!({ "a": order.a(), "c_a": order.c_a(), "points": args.points, "table_file": file_name(&artifact(prefix, ".csv")) });
        output::write_json(&artifact(prefix, ".json"), &output::summary("kernel-table", &ctx.config, body))?;
    }
    Ok(())
}

fn stream(args: &StreamArgs, ctx: &Ctx) -> Res {
    let order = order(args.order.a, args.order.c_a)?;
    let input = required("input", &args.input)?;
    let (xi, _) = load_field(input)?;
    let op = StreamOperator::build(&order, xi.grid(), rule(args.rule), Exec::default());
    let rep = op.solve(&xi, Exec::default())?;
    let psi_file = artifact(&args.out_prefix, ".psi.axf");
    output::write_field(&psi_file, &rep.psi, &output::field_meta("stream", &ctx.config, Some(order.a())))?;
    let body = json!({
        "rule": rep.singular_cell_rule,
        "est_quadrature_error": rep.est_quadrature_error,
        "max_psi": rep.psi.max(),
        "support_margin_cells": support_margin(&xi),
        "support_near_boundary": rep.support_near_boundary,
        "psi_file": file_name(&psi_file),
    });
    let summary = output::summary("stream", &ctx.config, body);
    println!("{}", serde_json::to_string(&summary)?);
    output::write_json(&artifact(&args.out_prefix, ".json"), &summary)?;
    if ctx.csv {
        let mut t = Table::new(&["rule", "est_quadrature_error", "max_psi", "support_near_boundary"]);
        t.push(vec![
            summary["rule"].as_str().unwrap_or_default().to_string(),
            num(rep.est_quadrature_error),
            num(rep.psi.max()),
            rep.support_near_boundary.to_string(),
        ]);
        t.write_csv(&artifact(&args.out_prefix, ".report.csv"), "stream", &ctx.config)?;
    }
    Ok(())
}

/// E, E₂ and the norms from a single stream solve.
fn field_quantities(order: &FractionalOrder, xi: &ScalarField) -> Res<Vec<(&'static str, f64)>> {
    let op = StreamOperator::shared(order, xi.grid(), SingularCellRule::default());
    let psi = op.apply(xi)?;
    let e = energy_from_stream(&psi, xi, Exec::default())?;
    Ok(vec![
        ("E", e),
        ("E2", e - weighted_integral(xi, Weight::SelfProduct)),
        ("impulse", impulse(xi)),
        ("mass", mass(xi)),
        ("L1", lp_norm(xi, 1.0)?),
        ("L2", lp_norm(xi, 2.0)?),
        ("Linf", lp_norm(xi, f64::INFINITY)?),
    ])
}

fn functionals(args: &FunctionalsArgs, ctx: &Ctx) -> Res {
    let order = order(args.order.a, args.order.c_a)?;
    let input = required("input", &args.input)?;
    if let Some(mu) = args.mu {
        positive("mu", mu)?;
    }
    let (xi, _) = load_field(input)?;
    let q = field_quantities(&order, &xi)?;
    let mut header: Vec<&str> = q.iter().map(|(k, _)| *k).collect();
    let mut row: Vec<String> = q.iter().map(|(_, v)| num(*v)).collect();
    let mut body = serde_json::Map::new();
    for (k, v) in &q {
        body.insert(k.to_string(), json!(v));
    }
    if let Some(mu) = args.mu {
        let rep = check_admissible(&xi, mu, AdmissibleTolerance::default())?;
        header.extend(["mu", "in_K_mu", "in_K_mu_prime"]);
        row.extend([num(mu), rep.in_k_mu.to_string(), rep.in_k_mu_prime.to_string()]);
        body.insert("admissible".into(), serde_json::to_value(rep)?);
    }
    let mut t = Table::new(&header);
    t.push(row);
    print!("{}", t.csv());
    if let Some(prefix) = &args.out_prefix {
        output::write_json(&artifact(prefix, ".json"), &output::summary("functionals", &ctx.config, Value::Object(body)))?;
        if ctx.csv {
            t.write_csv(&artifact(prefix, ".csv"), "functionals", &ctx.config)?;
        }
    }
    Ok(())
}

fn rearrange_cmd(args: &RearrangeArgs, ctx: &Ctx) -> Res {
    let order = order(args.order.a, args.order.c_a)?;
    let input = required("input", &args.input)?;
    let op = *required("op", &args.op)?;
    match op {
        RearrangeOp::Translate => {
            let tau = *required("tau", &args.tau)?;
            if !tau.is_finite() {
                return Err(invalid(format!("tau must be finite, got {tau}")));
            }
        }
        RearrangeOp::ScaleImpulse | RearrangeOp::ScaleEnergy => positive("sigma", *required("sigma", &args.sigma)?)?,
        RearrangeOp::Steiner => {}
    }
    let (xi, meta) = load_field(input)?;
    let out = match op {
        RearrangeOp::Steiner => rearrange::steiner(&xi)?,
        RearrangeOp::Translate => rearrange::translate_off_axis(&xi, args.tau.unwrap_or_default())?,
        RearrangeOp::ScaleImpulse => rearrange::scale_impulse_preserving(&xi, args.sigma.unwrap_or(1.0))?,
        RearrangeOp::ScaleEnergy => rearrange::scale_energy_preserving(&order, &xi, args.sigma.unwrap_or(1.0))?,
    };
    let before = field_quantities(&order, &xi)?;
    let after = field_quantities(&order, &out)?;
    let out_file = artifact(&args.out_prefix, ".axf");
    output::write_field(&out_file, &out, &output::field_meta("rearrange", &ctx.config, meta.a))?;

    let mut t = Table::new(&["quantity", "before", "after"]);
    let mut body = serde_json::Map::new();
    for ((k, b), (_, a)) in before.iter().zip(&after) {
        t.push(vec![k.to_string(), num(*b), num(*a)]);
        body.insert(k.to_string(), json!({ "before": b, "after": a }));
    }
    body.insert("output_file".into(), json!(file_name(&out_file)));
    output::write_json(&artifact(&args.out_prefix, ".json"), &output::summary("rearrange", &ctx.config, Value::Object(body)))?;
    print!("{}", t.aligned());
    if ctx.csv {
        t.write_csv(&artifact(&args.out_prefix, ".table.csv"), "rearrange", &ctx.config)?;
    }
    Ok(())
}

fn ring(args: &RingArgs, ctx: &Ctx) -> Res {
    let order = order(args.order.a, args.order.c_a)?;
    let grid = HalfPlaneGrid::new(args.nr, args.nz, args.rmax, args.zmax)?;
    positive("mu", args.mu)?;
    positive("tol", args.tol)?;
    if !(args.omega > 0.0 && args.omega <= 1.0) {
        return Err(invalid(format!("omega must lie in (0, 1], got {}", args.omega)));
    }
    if args.max_iter == 0 {
        return Err(invalid("max-iter must be at least 1"));
    }
    let opts = SolverOptions {
        tol: args.tol,
        omega: args.omega,
        max_iter: args.max_iter,
        seed: match args.seed_profile {
            SeedArg::Ball => SeedProfile::Ball,
            SeedArg::Gaussian => SeedProfile::Gaussian,
        },
        rule: rule(args.rule),
        ..SolverOptions::default()
    };
    let tw = solve_traveling_wave(&order, args.mu, &grid, &opts)?;
    let report = verify_first_order(&tw)?;

    let wave_file = artifact(&args.out_prefix, ".axf");
    let history_file = artifact(&args.out_prefix, ".history.csv");
    output::write_field(&wave_file, &tw.xi, &output::field_meta("ring", &ctx.config, Some(order.a())))?;
    let mut h = Table::new(&["iteration", "residual", "e2", "w", "gamma", "omega"]);
    for r in &tw.history {
        h.push(vec![r.iteration.to_string(), num(r.residual), num(r.e2), num(r.w), num(r.gamma), num(r.omega)]);
    }
    h.write_csv(&history_file, "ring", &ctx.config)?;

    let quantities = [
        ("W", tw.w),
        ("gamma", tw.gamma),
        ("E2", tw.e2_value),
        ("residual", tw.residual),
        ("iterations", tw.iterations as f64),
        ("impulse", impulse(&tw.xi)),
        ("mass", mass(&tw.xi)),
        ("core_radius", core_radius(&tw.xi)),
        ("first_order_defect", report.interior_defect.max(report.exterior_defect)),
    ];
    let body = json!({
        "wave_file": file_name(&wave_file),
        "history_file": file_name(&history_file),
        "a": order.a(),
        "c_a": order.c_a(),
        "mu": tw.mu,
        "w": tw.w,
        "gamma": tw.gamma,
        "mass_binding": tw.mass_binding,
        "e2": tw.e2_value,
        "residual": tw.residual,
        "iterations": tw.iterations,
        "impulse": impulse(&tw.xi),
        "mass": mass(&tw.xi),
        "core_radius": core_radius(&tw.xi),
        "first_order": report,
    });
    output::write_json(&artifact(&args.out_prefix, ".json"), &output::summary("ring", &ctx.config, body))?;

    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in quantities {
        t.push(vec![k.to_string(), if k == "iterations" { format!("{v}") } else { num(v) }]);
    }
    t.push(vec!["mass_binding".into(), tw.mass_binding.to_string()]);
    print!("{}", t.aligned());
    if ctx.csv {
        t.write_csv(&artifact(&args.out_prefix, ".summary.csv"), "ring", &ctx.config)?;
    }
    Ok(())
}

/// A wave written by `ring`, reloaded from its summary.
struct RingRun {
    summary: Value,
    xi: ScalarField,
    wave_file: PathBuf,
}

fn load_ring(path: &Path) -> Res<RingRun> {
    let summary = output::read_json(path)?;
    if summary["command"] != "ring" {
        return Err(invalid(format!("{} is not a ring summary", path.display())));
    }
    let name = summary["wave_file"]
        .as_str()
        .ok_or_else(|| invalid(format!("{} names no wave_file", path.display())))?;
    let wave_file = path.parent().unwrap_or(Path::new("")).join(name);
    let (xi, _) = load_field(&wave_file)?;
    Ok(RingRun { summary, xi, wave_file })
}

fn summary_f64(s: &Value, key: &str) -> Res<f64> {
    s[key].as_f64().ok_or_else(|| invalid(format!("ring summary lacks numeric {key:?}")))
}

fn evolve(args: &EvolveArgs, ctx: &Ctx) -> Res {
    let (xi, a, c_a, input_file) = match (&args.input, &args.from_ring) {
        (Some(p), None) => {
            let (xi, meta) = load_field(p)?;
            (xi, args.a.or(meta.a), args.c_a, p.clone())
        }
        (None, Some(p)) => {
            let run = load_ring(p)?;
            let a = args.a.or(run.summary["a"].as_f64());
            let c_a = args.c_a.or(run.summary["c_a"].as_f64());
            (run.xi, a, c_a, run.wave_file)
        }
        _ => return Err(invalid("evolve needs exactly one of --input and --from-ring")),
    };
    let a = a.ok_or_else(|| invalid("the input carries no order; pass --a"))?;
    let order = order(a, c_a)?;
    let t_end = *required("T", &args.t_end)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("T must be nonnegative and finite, got {t_end}")));
    }
    if !(args.cfl > 0.0 && args.cfl <= DEFAULT_CFL_MAX) {
        return Err(invalid(format!("cfl must lie in (0, {DEFAULT_CFL_MAX}], got {}", args.cfl)));
    }
    if args.diag_every == 0 {
        return Err(invalid("diag-every must be at least 1"));
    }

    let ev = Evolver::new(&order, xi.grid());
    let prefix = &args.out_prefix;
    let mut steps = 0usize;
    let mut snapshots = Vec::new();
    let run = ev.run_observed(&xi, t_end, args.cfl, args.diag_every, |t, x| {
        steps += 1;
        if args.snapshot_every > 0 && steps % args.snapshot_every == 0 {
            let path = artifact(prefix, &format!(".snap-{steps:06}.axf"));
            let mut meta = output::field_meta("evolve", &ctx.config, Some(order.a()));
            meta.config.push_str(&format!("t={t:e}\nstep={steps}\n"));
            ringwave::fields::save_field(&path, x, &meta)?;
            snapshots.push(file_name(&path));
        }
        Ok(())
    })?;

    let final_file = artifact(prefix, ".final.axf");
    let mut meta = output::field_meta("evolve", &ctx.config, Some(order.a()));
    meta.config.push_str(&format!("t={t_end:e}\nstep={}\n", run.steps));
    output::write_field(&final_file, &run.xi, &meta)?;

    let header = ["t", "step", "l1", "l2", "linf", "impulse", "energy", "x1", "b_over_r", "dr_b", "dz_b", "support_margin"];
    let mut d = Table::new(&header);
    for r in &run.records {
        d.push(vec![
            num(r.t),
            r.step.to_string(),
            num(r.l1),
            num(r.l2),
            num(r.linf),
            num(r.impulse),
            num(r.energy),
            num(r.x1.norm()),
            num(r.x1.b_over_r),
            num(r.x1.dr_b),
            num(r.x1.dz_b),
            num(r.support_margin),
        ]);
    }
    let diag_file = artifact(prefix, ".diagnostics.csv");
    d.write_csv(&diag_file, "evolve", &ctx.config)?;
    let first = run.records.first().copied();
    let last = run.records.last().copied();
    let body = json!({
        "input_file": input_file.display().to_string(),
        "final_file": file_name(&final_file),
        "diagnostics_file": file_name(&diag_file),
        "snapshots": snapshots,
        "a": order.a(),
        "t_end": t_end,
        "steps": run.steps,
        "initial": first,
        "final": last,
    });
    output::write_json(&artifact(prefix, ".json"), &output::summary("evolve", &ctx.config, body))?;

    let mut t = Table::new(&["t", "step", "l2", "impulse", "energy", "x1"]);
    for r in &d.rows {
        t.push(vec![r[0].clone(), r[1].clone(), r[3].clone(), r[5].clone(), r[6].clone(), r[7].clone()]);
    }
    print!("{}", t.aligned());
    Ok(())
}

fn verify(args: &VerifyArgs, ctx: &Ctx) -> Res {
    let path = required("from-ring", &args.from_ring)?;
    positive("distance", args.distance)?;
    if !(args.cfl > 0.0 && args.cfl <= DEFAULT_CFL_MAX) {
        return Err(invalid(format!("cfl must lie in (0, {DEFAULT_CFL_MAX}], got {}", args.cfl)));
    }
    if args.samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    if let Some(t) = args.t_end {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("T must be nonnegative and finite, got {t}")));
        }
    }
    let run = load_ring(path)?;
    let s = &run.summary;
    let order = order(summary_f64(s, "a")?, s["c_a"].as_f64())?;
    let w = summary_f64(s, "w")?;
    positive("wave speed W", w)?;
    let tw = TravelingWave {
        xi: run.xi,
        w,
        gamma: summary_f64(s, "gamma")?,
        mass_binding: s["mass_binding"].as_bool().unwrap_or(false),
        mu: summary_f64(s, "mu")?,
        order,
        residual: summary_f64(s, "residual")?,
        e2_value: summary_f64(s, "e2")?,
        iterations: s["iterations"].as_u64().unwrap_or(0) as usize,
        history: Vec::new(),
    };
    let t_end = args.t_end.unwrap_or(args.distance * core_radius(&tw.xi) / w);
    let points = verify_traveling(&order, &tw, t_end, args.cfl, args.samples)?;
    let mut t = Table::new(&["t", "error", "error_wrong_speed"]);
    for p in &points {
        t.push(vec![num(p.t), num(p.error), num(p.error_wrong_speed)]);
    }
    print!("{}", t.csv());
    if let Some(prefix) = &args.out_prefix {
        t.write_csv(&artifact(prefix, ".csv"), "verify", &ctx.config)?;
        let body = json!({ "w": w, "t_end": t_end, "points": points });
        output::write_json(&artifact(prefix, ".json"), &output::summary("verify", &ctx.config, body))?;
    }
    Ok(())
}
