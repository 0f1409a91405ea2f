use carnot_lift::{
    area_preserving_check, group_convolve, group_convolve_onto, lambda_from_det, moser_correct as correct,
    quaternion_right_matrix, quaternionic_rigidity_check, quaternionic_structure, symplectic_defect,
    top_wedge_coefficient, CarnotGroup, Error, MollifierKernel, MoserOptions, Result, SampledMap,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::Context;
use crate::args::{AreaArgs, MoserArgs, QuaternionicArgs};
use crate::input;
use crate::output::{Outcome, Status};

fn max_node_difference(a: &SampledMap, b: &SampledMap) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn moser_correct(a: &MoserArgs, ctx: Context<'_>) -> Result<Outcome> {
    let loaded = input::map(&a.map, None, ctx.inputs)?;
    let dim = loaded.sampled.chart().dim();
    let input_map = match a.eps {
        Some(eps) => {
            let kernel = MollifierKernel::new(&CarnotGroup::builtin(&format!("abelian:{dim}"))?, eps)?;
            let mollified = match &loaded.exact {
                Some(exact) => group_convolve_onto(exact.as_ref(), &kernel, loaded.sampled.chart())?,
                None => group_convolve(&loaded.sampled, &kernel)?,
            };
            ctx.artifacts.write_json("mollified.json", &mollified.to_file(None))?;
            mollified
        }
        None => loaded.sampled,
    };
    let opts = MoserOptions { steps: a.steps, ..MoserOptions::default() };
    let first = correct(&input_map, &opts)?;
    let second = correct(&first.map, &opts)?;
    let idempotence = max_node_difference(&first.map, &second.map);
    ctx.artifacts.write_json("corrected.json", &first.map.to_file(None))?;
    let (defect, area) = if dim == 2 {
        let report = area_preserving_check(&first.map)?;
        (report.max_det_defect, Some(report))
    } else {
        (first.eta_after, None)
    };
    let pass = defect <= a.tol;
    let line = format!(
        "corrected {} nodes: defect {:e} -> {defect:e}, second pass moves {idempotence:e}",
        first.map.chart().node_count(),
        first.eta_before
    );
    let summary = json!({
        "eps": a.eps,
        "nodes": first.map.chart().node_count(),
        "eta_before": first.eta_before,
        "eta_after": first.eta_after,
        "min_pfaffian": first.min_pfaffian,
        "max_displacement": first.max_displacement,
        "primitive_residual": first.primitive_residual,
        "defect": defect,
        "idempotence": idempotence,
        "area": area,
    });
    Ok(Outcome::new(Status::from_pass(pass), line, summary))
}

pub fn area_check(a: &AreaArgs, ctx: Context<'_>) -> Result<Outcome> {
    let loaded = input::map(&a.map, Some(2), ctx.inputs)?;
    let report = area_preserving_check(&loaded.sampled)?;
    let rows: Vec<Vec<f64>> = report.probe_ratios.iter().enumerate().map(|(k, r)| vec![k as f64, *r]).collect();
    ctx.artifacts.write_table("probe_ratios.csv", &["probe".into(), "ratio".into()], &rows)?;
    let pass = report.max_det_defect <= a.tol;
    let line = format!(
        "max |det Df - 1| = {:e} over {} nodes, max area ratio defect {:e}",
        report.max_det_defect, report.interior_nodes, report.max_ratio_defect
    );
    Ok(Outcome::new(Status::from_pass(pass), line, report))
}

fn unit_quaternion(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return q.map(|v| v / n);
        }
    }
}

pub fn quaternionic_check(a: &QuaternionicArgs, ctx: Context<'_>) -> Result<Outcome> {
    let structure = quaternionic_structure(a.n)?;
    ctx.artifacts.write_with("structure.csv", |w| structure.write_csv(w))?;
    let structure_residual = structure.structure_residual();
    let pfaffians = structure.forms().iter().map(top_wedge_coefficient).collect::<Result<Vec<_>>>()?;
    let samples: Vec<(Option<[f64; 4]>, DMatrix<f64>)> = match &a.matrix {
        Some(spec) => vec![(None, input::matrix(spec, "matrix", ctx.inputs)?)],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            (0..a.count)
                .map(|_| {
                    let q = unit_quaternion(&mut rng);
                    (Some(q), quaternion_right_matrix(q, a.n))
                })
                .collect()
        }
    };
    if samples.is_empty() {
        return Err(Error::InvalidArgument("nothing to check".into()));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let (mut worst_orth, mut worst_lambda, mut failures): (f64, f64, usize) = (0.0, 0.0, 0);
    for (q, m) in &samples {
        let report = quaternionic_rigidity_check(m, a.tol)?;
        let lambda = lambda_from_det(m, 2 * a.n)?;
        let j1 = symplectic_defect(m, &structure.forms()[0], lambda)?;
        if !report.implication_holds || !report.premise {
            failures += 1;
        }
        worst_orth = worst_orth.max(report.orthogonality_residual);
        worst_lambda = worst_lambda.max((lambda - 1.0).abs());
        let mut row = q.map(|q| q.to_vec()).unwrap_or_else(|| vec![f64::NAN; 4]);
        row.extend(report.form_residuals);
        row.extend([report.orthogonality_residual, lambda, j1]);
        rows.push(row);
    }
    let header = ["q0", "q1", "q2", "q3", "r1", "r2", "r3", "orthogonality", "lambda", "conformal_defect"].map(String::from);
    ctx.artifacts.write_table("samples.csv", &header, &rows)?;
    let pass = failures == 0 && worst_orth < a.tol && structure_residual == 0.0;
    let line = format!(
        "{} matrices, {failures} failing, max |AA^T - I| = {worst_orth:e}, J3 = J1 J2 residual {structure_residual:e}",
        samples.len()
    );
    let summary = json!({
        "n": a.n,
        "matrices": samples.len(),
        "failures": failures,
        "max_orthogonality_residual": worst_orth,
        "max_lambda_deviation": worst_lambda,
        "structure_residual": structure_residual,
        "pfaffians": pfaffians,
    });
    Ok(Outcome::new(Status::from_pass(pass), line, summary))
}
