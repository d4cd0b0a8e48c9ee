use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::Result;
use serde::Serialize;
use smtlab_core::green::{half_disc_robin_constant, select_a0};
use smtlab_core::profiles::{bubble_energy, bubble_k, energy_in_expansion, sharpness_scan};
use smtlab_core::*;

use crate::config::Experiment;
use crate::{csv, num, Ctx};

pub(crate) fn dispatch(ctx: &mut Ctx<'_>, experiment: Experiment) -> Result<()> {
    match experiment {
        Experiment::BubbleCheck => bubble_check(ctx),
        Experiment::Green => {
            let lab = build_lab(ctx)?;
            green(ctx, &lab).map(|_| ())
        }
        Experiment::Sharpness => {
            let lab = build_lab(ctx)?;
            sharpness(ctx, &lab)
        }
        Experiment::SubcriticalSweep => {
            let lab = build_lab(ctx)?;
            sweep(ctx, &lab).map(|_| ())
        }
        Experiment::TestFamily => {
            let lab = build_lab(ctx)?;
            let g = green(ctx, &lab)?;
            test_family(ctx, &lab, &g).map(|_| ())
        }
        Experiment::FullPipeline => full_pipeline(ctx),
    }
}

fn build_lab(ctx: &mut Ctx<'_>) -> Result<Lab> {
    let spec = ctx.cfg.domain.spec()?;
    Ok(ctx.timed("mesh", || Lab::from_spec(&spec))?)
}

fn tag(v: f64) -> String {
    format!("{v}")
}

fn green(ctx: &mut Ctx<'_>, lab: &Lab) -> Result<GreenReport> {
    let g = ctx.timed("green", || solve_green(lab))?;
    let tol = ctx.cfg.tolerances.clone();
    ctx.write("green_field.csv", &g.field.to_csv())?;
    ctx.write_json("green.json", &g.summary("green_field.csv"))?;
    ctx.check("green.residual_norm", g.residual_norm <= tol.constraint_abs, g.residual_norm, format!("<= {:e}", tol.constraint_abs));
    ctx.check("green.mean", g.mean_value.abs() <= tol.constraint_abs, g.mean_value, format!("|mean| <= {:e}", tol.constraint_abs));
    let lc = (g.log_coefficient * PI + 1.0).abs();
    ctx.check(
        "green.log_coefficient",
        lc <= tol.green_log_coefficient_rel,
        g.log_coefficient,
        format!("-1/pi within {}%", 100.0 * tol.green_log_coefficient_rel),
    );
    if let Shape::HalfDisc { radius } = ctx.cfg.domain.spec()?.shape {
        let oracle = half_disc_robin_constant(radius);
        let rel = ((g.a0 - oracle) / oracle).abs();
        ctx.check("green.A0", rel <= tol.green_a0_rel, g.a0, format!("{oracle} within {}%", 100.0 * tol.green_a0_rel));
    }
    Ok(g)
}

#[derive(Serialize)]
struct BubbleSummary {
    beta: f64,
    mass_full_plane: f64,
    mass_half_plane: f64,
    /// Radius of the expansion check.
    check_radius: f64,
    energy_half_plane: f64,
    expansion: f64,
}

/// `max(10³, R)` with `k R^(2-2β) = 10⁴`, where the expansion remainder is below `10⁻⁴`.
fn expansion_check_radius(beta: f64) -> f64 {
    let q = 2.0 - 2.0 * beta;
    (1e4 / bubble_k(beta)).powf(1.0 / q).max(1e3)
}

fn bubble_check(ctx: &mut Ctx<'_>) -> Result<()> {
    let tol = ctx.cfg.tolerances.clone();
    let radii = ctx.cfg.bubble.radii.clone();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for beta in ctx.cfg.betas() {
        let rc = expansion_check_radius(beta);
        let (full, half, ec, xc) = ctx.timed(&format!("bubble beta={beta}"), || -> Result<_> {
            Ok((
                bubble_mass(beta, Normalization::FullPlane)?,
                bubble_mass(beta, Normalization::HalfPlane)?,
                bubble_energy(beta, rc, Normalization::HalfPlane)?,
                energy_in_expansion(beta, rc),
            ))
        })?;
        rows.push(vec![num(beta), "mass".into(), num(full), String::new(), String::new(), "full_plane".into()]);
        rows.push(vec![num(beta), "mass".into(), num(half), String::new(), String::new(), "half_plane".into()]);
        for &r in &radii {
            let e = bubble_energy(beta, r, Normalization::HalfPlane)?;
            let x = energy_in_expansion(beta, r);
            rows.push(vec![num(beta), "R".into(), num(r), num(e), String::new(), format!("half_plane expansion={}", num(x))]);
        }
        let b = tag(beta);
        ctx.check(format!("bubble.mass_full_plane[beta={b}]"), (full - 2.0).abs() <= tol.bubble_mass_abs, full, format!("2 ± {:e}", tol.bubble_mass_abs));
        ctx.check(format!("bubble.mass_half_plane[beta={b}]"), (half - 1.0).abs() <= tol.bubble_mass_abs, half, format!("1 ± {:e}", tol.bubble_mass_abs));
        ctx.check(
            format!("bubble.energy_expansion[beta={b}]"),
            (ec - xc).abs() <= tol.bubble_energy_abs,
            ec,
            format!("{xc} ± {:e} at R = {rc}", tol.bubble_energy_abs),
        );
        summaries.push(BubbleSummary {
            beta,
            mass_full_plane: full,
            mass_half_plane: half,
            check_radius: rc,
            energy_half_plane: ec,
            expansion: xc,
        });
    }
    ctx.write("bubble.csv", &csv("beta,param,value,energy,margin,notes", &rows))?;
    ctx.write_json("bubble.json", &summaries)
}

fn sharpness(ctx: &mut Ctx<'_>, lab: &Lab) -> Result<()> {
    let sc = ctx.cfg.sharpness.clone();
    let tol = ctx.cfg.tolerances.clone();
    let mut ls = sc.ls.clone();
    ls.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for beta in ctx.cfg.betas() {
        let scan = ctx.timed(&format!("sharpness beta={beta}"), || sharpness_scan(lab, beta, sc.delta, &ls, &sc.factors))?;
        for r in &scan {
            rows.push(vec![num(beta), num(r.alpha_factor), num(r.alpha), num(r.l), num(r.functional)]);
        }
        for &f in &sc.factors {
            let js: Vec<f64> = scan.iter().filter(|r| r.alpha_factor == f).map(|r| r.functional).collect();
            let (first, last) = (js[0], js[js.len() - 1]);
            let name = format!("sharpness[beta={},factor={}]", tag(beta), tag(f));
            if f > 1.0 {
                let growth = last / first;
                ctx.check(format!("{name}.growth"), growth >= tol.sharpness_growth, growth, format!(">= {}", tol.sharpness_growth));
            } else if f < 1.0 {
                let hi = js.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = js.iter().copied().fold(f64::INFINITY, f64::min);
                let change = hi / lo;
                ctx.check(format!("{name}.change"), change <= tol.sharpness_flat, change, format!("<= {}", tol.sharpness_flat));
            }
        }
    }
    ctx.write("sharpness.csv", &csv("beta,alpha_factor,alpha,l,J", &rows))
}

fn solver_options(ctx: &Ctx<'_>) -> SolverOptions {
    let s = &ctx.cfg.sweep;
    SolverOptions {
        damping: s.damping,
        max_iterations: s.max_iterations,
        el_tolerance: ctx.cfg.tolerances.el_residual,
        random_restarts: s.random_restarts,
        seed: ctx.cfg.seed,
        ..SolverOptions::default()
    }
}

fn sweep(ctx: &mut Ctx<'_>, lab: &Lab) -> Result<Vec<(f64, Vec<ExtremalReport>)>> {
    let opts = solver_options(ctx);
    let tol = ctx.cfg.tolerances.clone();
    let eps_list = ctx.cfg.sweep.eps_list.clone();
    let window_r = ctx.cfg.sweep.window_r;
    let mut rows = Vec::new();
    let mut bubble_rows = Vec::new();
    let mut out = Vec::new();
    for beta in ctx.cfg.betas() {
        let reports = ctx.timed(&format!("sweep beta={beta}"), || subcritical_sweep(lab, beta, &eps_list, &opts))?;
        for r in &reports {
            let m = &r.summary;
            rows.push(vec![
                num(m.beta),
                num(m.eps),
                num(m.j),
                num(m.c_eps),
                num(m.lambda_eps),
                num(m.r_eps),
                num(m.t_eps),
                num(m.lambda_over_c2),
                num(m.el_residual),
                m.iterations.to_string(),
                m.converged.to_string(),
            ]);
            let stem = format!("beta{}_eps{}", tag(beta), tag(m.eps));
            ctx.write_json(&format!("solve_{stem}.json"), m)?;
            ctx.write(&format!("u_{stem}.csv"), &r.u.to_csv())?;
            let name = format!("sweep[beta={},eps={}]", tag(beta), tag(m.eps));
            ctx.check(
                format!("{name}.el_residual"),
                m.converged && m.el_residual < tol.el_residual,
                m.el_residual,
                format!("< {:e}", tol.el_residual),
            );
            ctx.check(format!("{name}.energy"), (m.energy - 1.0).abs() <= tol.constraint_abs, m.energy, format!("1 ± {:e}", tol.constraint_abs));
            ctx.check(format!("{name}.mean"), m.mean.abs() <= tol.constraint_abs, m.mean, format!("0 ± {:e}", tol.constraint_abs));
            let cmp = compare_bubble(lab, r, beta, window_r)?;
            bubble_rows.push(vec![
                num(beta),
                num(m.eps),
                num(cmp.window_r),
                num(cmp.sup_error),
                num(cmp.fraction_01),
                cmp.samples.to_string(),
                cmp.clipped.to_string(),
            ]);
        }
        let monotone = reports.windows(2).all(|w| w[1].summary.j >= w[0].summary.j);
        let spread = reports.last().map_or(0.0, |r| r.summary.j) - reports.first().map_or(0.0, |r| r.summary.j);
        ctx.check(format!("sweep[beta={}].J_nondecreasing", tag(beta)), monotone, spread, "J non-decreasing as eps decreases");
        out.push((beta, reports));
    }
    ctx.write(
        "sweep.csv",
        &csv("beta,eps,J,c_eps,lambda_eps,r_eps,t_eps,lambda_over_c2,el_residual,iterations,converged", &rows),
    )?;
    ctx.write("bubble_comparison.csv", &csv("beta,eps,window_r,sup_error,fraction_01,samples,clipped", &bubble_rows))?;
    Ok(out)
}

fn test_family(ctx: &mut Ctx<'_>, lab: &Lab, g: &GreenReport) -> Result<Vec<MarginReport>> {
    let tf = ctx.cfg.test_family.clone();
    let tol = ctx.cfg.tolerances.clone();
    let a0 = select_a0(lab, g, tf.a0_source)?;
    let mut eps_list = tf.eps_list.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for beta in ctx.cfg.betas() {
        let ms = ctx.timed(&format!("test_family beta={beta}"), || {
            eps_list.iter().map(|&e| test_family_margin(lab, e, beta, tf.delta, g, a0)).collect::<smtlab_core::Result<Vec<_>>>()
        })?;
        for m in &ms {
            let p = &m.params;
            rows.push(vec![
                num(beta),
                "eps".into(),
                num(p.eps),
                num(p.energy),
                num(m.margin),
                format!("c2={} jump={} J={} threshold={}", num(p.c2), num(p.jump), num(m.functional), num(m.threshold.total)),
            ]);
            ctx.check(
                format!("test_family[beta={},eps={}].energy", tag(beta), tag(p.eps)),
                (p.energy - 1.0).abs() <= tol.test_energy_abs,
                p.energy,
                format!("1 ± {}", tol.test_energy_abs),
            );
        }
        if let Some(m) = ms.last() {
            ctx.check(
                format!("test_family[beta={},eps={}].margin", tag(beta), tag(m.params.eps)),
                m.margin > 0.0,
                m.margin,
                "> 0",
            );
        }
        reports.extend(ms);
    }
    ctx.write("test_family.csv", &csv("beta,param,value,energy,margin,notes", &rows))?;
    ctx.write_json("test_family.json", &reports)?;
    Ok(reports)
}

#[derive(Serialize)]
struct PipelineBeta {
    beta: f64,
    threshold: ThresholdReport,
    /// `J(u_ε)` keyed by ε.
    functional: BTreeMap<String, f64>,
    max_functional: f64,
    test_family_margin: f64,
    test_family_eps: f64,
    test_family_beats_threshold: bool,
}

#[derive(Serialize)]
struct PipelineSummary {
    #[serde(rename = "A0")]
    a0: f64,
    betas: Vec<PipelineBeta>,
}

fn full_pipeline(ctx: &mut Ctx<'_>) -> Result<()> {
    let lab = build_lab(ctx)?;
    let g = green(ctx, &lab)?;
    let a0 = select_a0(&lab, &g, ctx.cfg.test_family.a0_source)?;
    let slack = ctx.cfg.tolerances.threshold_slack;
    let mut thresholds = Vec::new();
    for beta in ctx.cfg.betas() {
        thresholds.push(threshold(&lab, beta, a0)?);
    }
    ctx.write_json("threshold.json", &thresholds)?;
    let sweeps = sweep(ctx, &lab)?;
    let margins = test_family(ctx, &lab, &g)?;
    let mut betas = Vec::new();
    for ((beta, reports), thr) in sweeps.iter().zip(&thresholds) {
        let functional: BTreeMap<String, f64> = reports.iter().map(|r| (tag(r.summary.eps), r.summary.j)).collect();
        let max_functional = reports.iter().map(|r| r.summary.j).fold(f64::NEG_INFINITY, f64::max);
        ctx.check(
            format!("pipeline[beta={}].J_below_threshold", tag(*beta)),
            max_functional <= thr.total * (1.0 + slack),
            max_functional,
            format!("<= {} * (1 + {slack})", thr.total),
        );
        let last = margins.iter().rfind(|m| m.params.beta == *beta).expect("test family ran for every beta");
        betas.push(PipelineBeta {
            beta: *beta,
            threshold: *thr,
            functional,
            max_functional,
            test_family_margin: last.margin,
            test_family_eps: last.params.eps,
            test_family_beats_threshold: last.margin > 0.0,
        });
    }
    ctx.write_json("summary.json", &PipelineSummary { a0, betas })
}
