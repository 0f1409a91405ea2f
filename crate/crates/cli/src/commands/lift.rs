use carnot_lift::{
    box_centers, closed_loop_defect, contact_generator_check, default_fiber_probes, endpoint as integrate,
    fiber_hom_extract, horizontal_lift, line_integral, pansu_matrix, potential_form, read_numeric_csv, CentralExtension,
    Chart, Control, Error, HorizontalCurve, LiftCheck, LiftProblem, MapSource, ProbeKind, Result, SampledMap,
};
use serde_json::json;

use super::Context;
use crate::args::{CheckLiftArgs, EndpointArgs, GeneratorArgs, LiftArgs, LiftCurveArgs, LiftMapArgs, PansuArgs};
use crate::input::{self, join, LoadedMap, Polynomial};
use crate::output::{Artifacts, Outcome, Status};

/// Largest node error of `pi F = f pi` accepted from a constructed lift.
const PROJECTION_TOL: f64 = 1e-6;
/// Fiber homomorphism acceptance: spread over probes and additivity.
const FIBER_DEVIATION_TOL: f64 = 1e-5;
const LINEARITY_TOL: f64 = 1e-8;

pub fn endpoint(a: &EndpointArgs, ctx: Context<'_>) -> Result<Outcome> {
    let g = input::group(&a.group.group, ctx.inputs)?;
    let control = match (&a.control, &a.constant) {
        (Some(path), None) => {
            ctx.inputs.push(path.display().to_string());
            let f = std::fs::File::open(path).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
            let rows = read_numeric_csv(std::io::BufReader::new(f), None)
                .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
            let times = rows.iter().map(|r| r[0]).collect();
            let values = rows.iter().map(|r| r[1..].to_vec()).collect();
            Control::piecewise_linear(times, values)?
        }
        (None, Some(u)) => Control::constant(input::vector(u, "constant")?, a.nodes)?,
        _ => return Err(Error::InvalidArgument("give --control or --constant".into())),
    };
    let start = input::point(a.start.as_deref(), g.dim(), "start")?;
    let curve = integrate(&control, &start, &g)?;
    let defect = curve.horizontality_defect()?;
    ctx.artifacts.write_with("curve.csv", |w| curve.write_csv(w))?;
    let line = format!("endpoint {} after {} segments", join(curve.end()), control.segments());
    let summary = json!({ "end": curve.end(), "segments": control.segments(), "horizontality_defect": defect });
    Ok(Outcome::new(Status::Ok, line, summary))
}

fn circle(segments: usize) -> Vec<Vec<f64>> {
    (0..=segments)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * (k % segments) as f64 / segments as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

pub fn lift_curve(a: &LiftCurveArgs, ctx: Context<'_>) -> Result<Outcome> {
    let ext = input::extension(&a.extension.extension, ctx.inputs)?;
    let base = ext.base().clone();
    let curve = match a.curve.strip_prefix("circle:") {
        Some(n) => {
            let n: usize = n.parse().map_err(|_| Error::InvalidArgument(format!("bad curve spec {:?}", a.curve)))?;
            if base.dim() != 2 || n < 3 {
                return Err(Error::InvalidArgument("circle curves need a planar base and at least 3 segments".into()));
            }
            HorizontalCurve::uniform(base, circle(n))?
        }
        None => {
            ctx.inputs.push(a.curve.clone());
            let f = std::fs::File::open(&a.curve).map_err(|e| Error::Malformed(format!("{}: {e}", a.curve)))?;
            HorizontalCurve::read_csv(base, std::io::BufReader::new(f))
                .map_err(|e| Error::Malformed(format!("{}: {e}", a.curve)))?
        }
    };
    let start = match &a.start {
        Some(s) => input::vector_of_len(s, ext.extended().dim(), "start")?,
        None => ext.join(curve.start(), &vec![0.0; ext.fiber_dim()]),
    };
    let lifted = horizontal_lift(&curve, &start, &ext)?;
    let increment: Vec<f64> =
        ext.fiber_part(lifted.end()).iter().zip(ext.fiber_part(&start)).map(|(e, s)| e - s).collect();
    let integral = match potential_form(&ext) {
        Ok(alpha) => Some(line_integral(&alpha, &curve)?),
        Err(_) => None,
    };
    ctx.artifacts.write_with("lifted_curve.csv", |w| lifted.write_csv(w))?;
    let line = format!("fiber increment {} over {} nodes", join(&increment), curve.points().len());
    let summary = json!({
        "end": lifted.end(),
        "fiber_increment": increment,
        "potential_integral": integral,
        "closed": curve.is_closed(1e-9),
        "nodes": curve.points().len(),
    });
    Ok(Outcome::new(Status::Ok, line, summary))
}

fn extensions(a: &LiftArgs, inputs: &mut Vec<String>) -> Result<(CentralExtension, CentralExtension)> {
    let ext1 = input::extension(a.extension.as_deref().unwrap_or(&a.group), inputs)?;
    let ext2 = match &a.target_extension {
        Some(spec) => input::extension(spec, inputs)?,
        None => ext1.clone(),
    };
    Ok((ext1, ext2))
}

/// A closed base loop whose defect certifies that no lift exists.
struct Witness {
    origin: &'static str,
    vertices: Vec<Vec<f64>>,
    defect: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_square() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]
}

/// Runs the probe family and writes `probes.csv`; on failure also picks
/// the witness loop, preferring the unit square when it certifies.
fn probe(
    ext1: &CentralExtension,
    ext2: &CentralExtension,
    f: &SampledMap,
    basepoint: &[f64],
    tol: f64,
    seed: u64,
    artifacts: &mut Artifacts,
) -> Result<(LiftCheck, Option<Vec<f64>>, Option<Witness>)> {
    let problem = LiftProblem::new(f, ext1, ext2, basepoint)?;
    let report = problem.check(tol, seed)?;
    let rows: Vec<Vec<f64>> = report
        .outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let kind = if o.probe.kind == ProbeKind::Rectangle { 0.0 } else { 1.0 };
            vec![k as f64, kind, o.length, o.norm, o.norm / o.length]
        })
        .collect();
    let header = ["probe", "polygon", "length", "defect", "ratio"].map(String::from);
    artifacts.write_table("probes.csv", &header, &rows)?;

    let square_fits = ext1.base_dim() == 2 && f.chart().contains(&[0.0, 0.0]) && f.chart().contains(&[1.0, 1.0]);
    let square_defect = if square_fits {
        let lp = HorizontalCurve::closed_polygon(ext1.base().clone(), &unit_square())?;
        Some(closed_loop_defect(f, &lp, ext1, ext2)?)
    } else {
        None
    };
    let witness = if report.passed {
        None
    } else {
        match &square_defect {
            Some(d) if norm(d) > 4.0 * tol => Some(Witness { origin: "unit-square", vertices: unit_square(), defect: d.clone() }),
            _ => {
                let w = report.witness_probe();
                Some(Witness { origin: "probe", vertices: w.probe.vertices.clone(), defect: w.defect.clone() })
            }
        }
    };
    if let Some(w) = &witness {
        let lp = HorizontalCurve::closed_polygon(ext1.base().clone(), &w.vertices)?;
        artifacts.write_with("witness_loop.csv", |out| lp.write_csv(out))?;
    }
    Ok((report, square_defect, witness))
}

fn not_liftable(report: &LiftCheck, square: &Option<Vec<f64>>, w: &Witness) -> Outcome {
    let line = format!(
        "not liftable: {} loop defect {} (max ratio {:e} > {:e}), witness in witness_loop.csv",
        w.origin,
        join(&w.defect),
        report.max_ratio,
        report.tol
    );
    let summary = json!({
        "passed": false,
        "max_ratio": report.max_ratio,
        "max_defect": report.max_defect,
        "tol": report.tol,
        "fiber_map": report.fiber_map,
        "probes": report.outcomes.len(),
        "unit_square_defect": square,
        "witness": { "origin": w.origin, "vertices": w.vertices, "defect": w.defect },
    });
    Outcome::new(Status::NotLiftable, line, summary)
}

pub fn check_lift(a: &CheckLiftArgs, ctx: Context<'_>) -> Result<Outcome> {
    let (ext1, ext2) = extensions(&a.lift, ctx.inputs)?;
    let loaded = input::map(&a.lift.map, Some(ext1.base_dim()), ctx.inputs)?;
    let f = &loaded.sampled;
    let basepoint = match &a.basepoint {
        Some(b) => input::vector_of_len(b, ext1.base_dim(), "basepoint")?,
        None => f.chart().center(),
    };
    let (report, square, witness) = probe(&ext1, &ext2, f, &basepoint, a.tol, ctx.seed, ctx.artifacts)?;
    if let Some(w) = witness {
        return Ok(not_liftable(&report, &square, &w));
    }
    let line = format!(
        "liftable: max defect {:e} (ratio {:e}) over {} probes",
        report.max_defect,
        report.max_ratio,
        report.outcomes.len()
    );
    let summary = json!({
        "passed": true,
        "max_ratio": report.max_ratio,
        "max_defect": report.max_defect,
        "tol": report.tol,
        "fiber_map": report.fiber_map,
        "probes": report.outcomes.len(),
        "unit_square_defect": square,
    });
    Ok(Outcome::new(Status::Ok, line, summary))
}

struct Lifted {
    ext1: CentralExtension,
    ext2: CentralExtension,
    loaded: LoadedMap,
    lift: SampledMap,
    check: LiftCheck,
}

/// Probes and, when liftable, constructs the lift; otherwise the
/// not-liftable outcome with its witness on disk.
fn build_lift(a: &LiftMapArgs, ctx: &mut Context<'_>) -> Result<std::result::Result<Lifted, Outcome>> {
    let (ext1, ext2) = extensions(&a.lift, ctx.inputs)?;
    let loaded = input::map(&a.lift.map, Some(ext1.base_dim()), ctx.inputs)?;
    let f = &loaded.sampled;
    let fiber = input::vector_of_len(&a.fiber, 3, "fiber")?;
    let nodes = fiber[2] as usize;
    if fiber[2] != nodes as f64 || nodes < 2 || !(fiber[1] > fiber[0]) {
        return Err(Error::InvalidArgument("fiber must be lo,hi,nodes with lo < hi and at least 2 nodes".into()));
    }
    let fd = ext1.fiber_dim();
    let fiber_chart = Chart::new(vec![fiber[0]; fd], vec![fiber[1]; fd], vec![nodes; fd])?;
    let start = input::point(a.start.as_deref(), ext1.extended().dim(), "start")?;
    let target = match &a.target {
        Some(t) => input::vector_of_len(t, ext2.extended().dim(), "target")?,
        None => ext2.join(&f.eval(&ext1.project(&start))?, &vec![0.0; ext2.fiber_dim()]),
    };
    let basepoint = ext1.project(&start);
    let (report, square, witness) = probe(&ext1, &ext2, f, &basepoint, a.tol, ctx.seed, ctx.artifacts)?;
    if let Some(w) = witness {
        return Ok(Err(not_liftable(&report, &square, &w)));
    }
    let problem = LiftProblem::new(f, &ext1, &ext2, &basepoint)?;
    let (lift, check) = problem.lift(&fiber_chart, &start, &target, a.tol, ctx.seed)?;
    Ok(Ok(Lifted { ext1, ext2, loaded, lift, check }))
}

/// Largest node error of `pi_2 F = f pi_1`.
fn projection_error(l: &Lifted) -> Result<f64> {
    let chart = l.lift.chart();
    let mut worst: f64 = 0.0;
    for flat in 0..chart.node_count() {
        let base = l.ext1.project(&chart.node(flat));
        let want = match &l.loaded.exact {
            Some(exact) => exact.eval(&base)?,
            None => l.loaded.sampled.eval(&base)?,
        };
        let got = l.ext2.project(l.lift.node_value(flat));
        worst = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

pub fn lift_map(a: &LiftMapArgs, mut ctx: Context<'_>) -> Result<Outcome> {
    let lifted = match build_lift(a, &mut ctx)? {
        Ok(l) => l,
        Err(outcome) => return Ok(outcome),
    };
    let err = projection_error(&lifted)?;
    ctx.artifacts.write_json("lift.json", &lifted.lift.to_file(Some(lifted.ext2.extended().algebra().name())))?;
    let line = format!(
        "lift on {} nodes, projection error {err:e}, fiber map {:?}",
        lifted.lift.chart().node_count(),
        lifted.check.fiber_map
    );
    let summary = json!({
        "nodes": lifted.lift.chart().node_count(),
        "projection_error": err,
        "fiber_map": lifted.check.fiber_map,
        "max_ratio": lifted.check.max_ratio,
    });
    Ok(Outcome::new(Status::from_pass(err < PROJECTION_TOL), line, summary))
}

pub fn fiber_hom(a: &LiftMapArgs, mut ctx: Context<'_>) -> Result<Outcome> {
    let lifted = match build_lift(a, &mut ctx)? {
        Ok(l) => l,
        Err(outcome) => return Ok(outcome),
    };
    let (probes, step) = default_fiber_probes(lifted.lift.chart(), &lifted.ext1);
    let hom = fiber_hom_extract(&lifted.lift, &lifted.ext1, &lifted.ext2, &probes, step)?;
    let header: Vec<String> = (1..=lifted.ext1.fiber_dim()).map(|j| format!("v{j}")).collect();
    ctx.artifacts.write_table("phi.csv", &header, &hom.phi)?;
    let pass = hom.deviation < FIBER_DEVIATION_TOL && hom.linearity_residual < LINEARITY_TOL;
    let line = format!(
        "phi = {:?}, deviation {:e}, linearity residual {:e}",
        hom.phi, hom.deviation, hom.linearity_residual
    );
    Ok(Outcome::new(Status::from_pass(pass), line, json!({ "fiber_hom": hom, "probes": probes.len(), "step": step })))
}

pub fn pansu(a: &PansuArgs, mut ctx: Context<'_>) -> Result<Outcome> {
    let lifted = match build_lift(&a.lift, &mut ctx)? {
        Ok(l) => l,
        Err(outcome) => return Ok(outcome),
    };
    let (g1, g2) = (lifted.ext1.extended(), lifted.ext2.extended());
    let at = match &a.at {
        Some(p) => input::vector_of_len(p, g1.dim(), "at")?,
        None => lifted.lift.chart().center(),
    };
    let m = pansu_matrix(&lifted.lift, g1, g2, &at, a.lambda)?;
    ctx.artifacts.write_matrix("pansu.csv", &m)?;
    let (w1, w2) = (g1.weights(), g2.weights());
    let block = |rows: &[usize], cols: &[usize]| -> Vec<Vec<f64>> {
        rows.iter().map(|&i| cols.iter().map(|&j| m[(i, j)]).collect()).collect()
    };
    let horizontal_rows: Vec<usize> = (0..g2.dim()).filter(|&i| w2[i] == 1).collect();
    let horizontal_cols: Vec<usize> = (0..g1.dim()).filter(|&j| w1[j] == 1).collect();
    let mut mixed: f64 = 0.0;
    for i in 0..g2.dim() {
        for j in 0..g1.dim() {
            if w2[i] != w1[j] {
                mixed = mixed.max(m[(i, j)].abs());
            }
        }
    }
    let horizontal = block(&horizontal_rows, &horizontal_cols);
    let fiber = block(lifted.ext2.fiber_index(), lifted.ext1.fiber_index());
    let line = format!("Pansu quotient at lambda {:e}: fiber block {:?}, mixed norm {mixed:e}", a.lambda, fiber);
    let summary = json!({
        "lambda": a.lambda,
        "at": at,
        "horizontal_block": horizontal,
        "fiber_block": fiber,
        "mixed_norm": mixed,
        "matrix": m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(Status::Ok, line, summary))
}

pub fn filiform_generator(a: &GeneratorArgs, _ctx: Context<'_>) -> Result<Outcome> {
    let p4 = Polynomial::parse(&a.p4)?.field();
    let p2 = Polynomial::parse(&a.p2)?.field();
    let centers = box_centers(-1.0, 1.0, a.centers);
    let report = contact_generator_check(&p4, &p2, &centers, a.eps, a.tol)?;
    let refined = contact_generator_check(&p4, &p2, &centers, 0.5 * a.eps, a.tol)?;
    let floor = 1e-12;
    let order = if report.direct_residual > floor && refined.direct_residual > floor {
        Some((report.direct_residual / refined.direct_residual).log2())
    } else {
        None
    };
    let line = if report.passed {
        format!("generator accepted: residual {:e} at h = {}", report.direct_residual, a.eps)
    } else {
        format!("generator rejected: violates {}", report.violations.join(", "))
    };
    let summary = json!({
        "p4": a.p4,
        "p2": a.p2,
        "h": a.eps,
        "centers": centers.len(),
        "report": report,
        "refined_residual": refined.direct_residual,
        "observed_order": order,
    });
    Ok(Outcome::new(Status::from_pass(report.passed), line, summary))
}
