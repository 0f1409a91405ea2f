use carnot_lift::{
    graded_hom_compose, hom_obstruction, homomorphism_defect, lie_differential_d0, potential_form, GradedMapTriple,
    Result,
};
use serde_json::json;

use super::Context;
use crate::args::{DilateArgs, ExtensionArgs, GroupArgs, Law, MulArgs, ObstructionArgs, PairArgs, PointArgs, PotentialArgs};
use crate::input::{self, join};
use crate::output::{Outcome, Status};

/// Potential residuals above this fail the run.
const POTENTIAL_TOL: f64 = 1e-6;

pub fn validate(a: &GroupArgs, ctx: Context<'_>) -> Result<Outcome> {
    let alg = input::algebra(&a.group, ctx.inputs)?;
    let report = alg.validate();
    let line = if report.is_valid() {
        format!("valid: {} with layers {:?}, {} warning(s)", alg.name(), alg.layer_dims(), report.warnings.len())
    } else {
        format!("invalid: {report}")
    };
    let summary = json!({
        "name": alg.name(),
        "layers": alg.layer_dims(),
        "step": alg.step(),
        "report": report,
    });
    Ok(Outcome::new(Status::from_pass(report.is_valid()), line, summary))
}

pub fn mul(a: &MulArgs, ctx: Context<'_>) -> Result<Outcome> {
    let g = input::group(&a.group.group, ctx.inputs)?;
    let p = input::vector_of_len(&a.p, g.dim(), "p")?;
    let q = input::vector_of_len(&a.q, g.dim(), "q")?;
    let pq = match a.law {
        Law::Closed => g.mul(&p, &q),
        Law::Bch => g.mul_bch(&p, &q),
    };
    Ok(Outcome::new(Status::Ok, join(&pq), json!({ "group": g.algebra().name(), "p": p, "q": q, "product": pq })))
}

pub fn quotient(a: &PairArgs, ctx: Context<'_>) -> Result<Outcome> {
    let g = input::group(&a.group.group, ctx.inputs)?;
    let p = input::vector_of_len(&a.p, g.dim(), "p")?;
    let q = input::vector_of_len(&a.q, g.dim(), "q")?;
    let quot = g.left_quotient(&p, &q);
    let summary = json!({
        "group": g.algebra().name(),
        "quotient": quot,
        "inverse_p": g.inv(&p),
        "quasi_distance": g.quasi_metric(&p, &q),
    });
    Ok(Outcome::new(Status::Ok, join(&quot), summary))
}

pub fn dilate(a: &DilateArgs, ctx: Context<'_>) -> Result<Outcome> {
    let g = input::group(&a.group.group, ctx.inputs)?;
    let p = input::vector_of_len(&a.p, g.dim(), "p")?;
    if !(a.lambda > 0.0) {
        return Err(carnot_lift::Error::InvalidArgument("dilation factor must be positive".into()));
    }
    let d = g.dilate(a.lambda, &p);
    Ok(Outcome::new(Status::Ok, join(&d), json!({ "lambda": a.lambda, "p": p, "image": d })))
}

pub fn frame(a: &PointArgs, ctx: Context<'_>) -> Result<Outcome> {
    let g = input::group(&a.group.group, ctx.inputs)?;
    let p = input::vector_of_len(&a.p, g.dim(), "p")?;
    let m = g.frame(&p);
    ctx.artifacts.write_matrix("frame.csv", &m)?;
    let line = format!("frame at ({}) written to frame.csv", join(&p));
    Ok(Outcome::new(Status::Ok, line, json!({ "p": p, "rows": rows(&m) })))
}

pub fn coframe(a: &PointArgs, ctx: Context<'_>) -> Result<Outcome> {
    let g = input::group(&a.group.group, ctx.inputs)?;
    let p = input::vector_of_len(&a.p, g.dim(), "p")?;
    let m = g.coframe(&p)?;
    ctx.artifacts.write_matrix("coframe.csv", &m)?;
    let line = format!("coframe at ({}) written to coframe.csv", join(&p));
    Ok(Outcome::new(Status::Ok, line, json!({ "p": p, "rows": rows(&m) })))
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn build_extension(a: &ExtensionArgs, ctx: Context<'_>) -> Result<Outcome> {
    let ext = input::extension(&a.extension, ctx.inputs)?;
    let d0 = lie_differential_d0(ext.base().algebra(), ext.cocycle())?.max_abs();
    let extended = ext.extended().algebra();
    let report = extended.validate();
    ctx.artifacts.write_json("extended_group.json", &extended.to_def())?;
    let line = format!(
        "extension of {} by fiber layers {:?}: layers {:?}, cocycle residual {d0:e}",
        ext.base().algebra().name(),
        ext.fiber_layers(),
        extended.layer_dims()
    );
    let summary = json!({
        "base": ext.base().algebra().name(),
        "fiber_layers": ext.fiber_layers(),
        "extended_layers": extended.layer_dims(),
        "base_index": ext.base_index(),
        "fiber_index": ext.fiber_index(),
        "cocycle_residual": d0,
        "extended_report": report,
    });
    Ok(Outcome::new(Status::from_pass(report.is_valid()), line, summary))
}

pub fn potential(a: &PotentialArgs, ctx: Context<'_>) -> Result<Outcome> {
    let ext = input::extension(&a.extension.extension, ctx.inputs)?;
    let alpha = potential_form(&ext)?;
    let n = ext.base_dim();
    let points = match &a.at {
        Some(text) => input::points(text, n, "point")?,
        None => (0..9).map(|k| (0..n).map(|j| 0.5 * ((k * (j + 1)) as f64).sin()).collect()).collect(),
    };
    let residual = alpha.exterior_derivative_residual(&points, 1e-4)?;
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    for v in 1..=ext.fiber_dim() {
        header.extend((1..=n).map(|i| format!("a{v}_{i}")));
    }
    let table: Vec<Vec<f64>> = points.iter().map(|p| [p.clone(), alpha.coefficients(p)].concat()).collect();
    ctx.artifacts.write_table("potential.csv", &header, &table)?;
    let pass = residual < POTENTIAL_TOL;
    let line = format!("potential at {} points, |d alpha - rho| = {residual:e}", points.len());
    Ok(Outcome::new(Status::from_pass(pass), line, json!({ "points": points.len(), "residual": residual })))
}

pub fn obstruction(a: &ObstructionArgs, ctx: Context<'_>) -> Result<Outcome> {
    let ext1 = input::extension(&a.extension.extension, ctx.inputs)?;
    let ext2 = match &a.target_extension {
        Some(spec) => input::extension(spec, ctx.inputs)?,
        None => ext1.clone(),
    };
    let l = input::matrix(&a.l, "L", ctx.inputs)?;
    let phi = input::matrix(&a.phi, "phi", ctx.inputs)?;
    let ob = hom_obstruction(&l, &phi, &ext1, &ext2)?;
    let size = ob.obstruction.max_abs();
    let mut summary = json!({
        "obstruction_max": size,
        "coboundary_residual": ob.residual,
        "mu": ob.mu.as_ref().map(rows),
    });
    let Some(mu) = ob.mu else {
        let line = format!("no homomorphism: obstruction {size:e} is not a coboundary (residual {:e})", ob.residual);
        return Ok(Outcome::new(Status::ValidationFailed, line, summary));
    };
    let psi = graded_hom_compose(&ext1, &ext2, &GradedMapTriple { l, phi, mu: Some(mu) })?;
    let defect = homomorphism_defect(&psi, ext1.extended(), ext2.extended());
    ctx.artifacts.write_matrix("psi.csv", &psi)?;
    summary["psi"] = json!(rows(&psi));
    summary["homomorphism_defect"] = json!(defect);
    let pass = defect <= a.tol;
    let line = format!("homomorphism composed, obstruction {size:e}, bracket defect {defect:e}");
    Ok(Outcome::new(Status::from_pass(pass), line, summary))
}
