use carnot_lift::{
    decay_slope, dyadic_scales, hoelder_seminorm, pullback_derivative, sample_path, shear_probes,
    weierstrass as partial_sum, weierstrass_tail_bound, young_integral, CarnotGroup, Chart, DecayOptions, Error,
    MapSource, Result, SeminormOptions, ShearLift, ShearProfile, StieltjesRule,
};
use serde_json::json;

use super::Context;
use crate::args::{DecayArgs, MapArgs, Profile, Rule, SeminormArgs, WeierstrassArgs, YoungArgs};
use crate::input;
use crate::output::{Outcome, Status};

/// Half-width of the probe segment in `y`.
const PROBE_HALF_WIDTH: f64 = 0.25;
/// Step of the central differences on the unmollified map.
const RAW_STEP: f64 = 1e-5;

fn eps_grid(text: &str) -> Result<Vec<f64>> {
    if text.contains("..") {
        let (lo, hi) = input::int_range(text, "eps-grid")?;
        Ok(dyadic_scales(lo, hi))
    } else {
        input::vector(text, "eps-grid")
    }
}

pub fn decay_experiment(a: &DecayArgs, ctx: Context<'_>) -> Result<Outcome> {
    let profile = match a.profile {
        Profile::Weierstrass => ShearProfile::Weierstrass(a.terms),
        Profile::Square => ShearProfile::Square,
        Profile::Kink => ShearProfile::Kink,
    };
    let beta = a.beta.unwrap_or_else(|| profile.exponent());
    let f = ShearLift::new(1.0, profile)?;
    let h1 = CarnotGroup::builtin("heisenberg:1")?;
    let eps = eps_grid(&a.eps_grid)?;
    let probes = shear_probes(a.probes, PROBE_HALF_WIDTH);
    let raw = probes
        .iter()
        .map(|p| pullback_derivative(&f, &h1, &h1, a.omega, a.field, p, RAW_STEP).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let opts = DecayOptions { beta: Some(beta), ..DecayOptions::new(probes) };
    let fit = decay_slope(&f, &h1, &h1, a.omega, a.field, &eps, &opts)?;
    ctx.artifacts.write_with("decay.csv", |w| fit.write_csv(w))?;
    let window = match &a.expect {
        Some(text) => Some(input::vector_of_len(text, 2, "expect")?),
        None => None,
    };
    let pass = match (&window, fit.slope) {
        (Some(w), Some(s)) => s >= w[0] && s <= w[1],
        (Some(_), None) => false,
        (None, _) => true,
    };
    let line = match fit.slope {
        Some(s) => format!(
            "slope {s:.4} (expected {:.4}) for omega{} along X{} over {} scales",
            fit.expected_slope.unwrap_or(f64::NAN),
            a.omega + 1,
            a.field + 1,
            eps.len()
        ),
        None => format!("coefficients at the noise floor for omega{} along X{}", a.omega + 1, a.field + 1),
    };
    let summary = json!({
        "profile": a.profile,
        "terms": a.terms,
        "fit": fit,
        "expect": window,
        "raw_coefficient": raw,
    });
    Ok(Outcome::new(Status::from_pass(pass), line, summary))
}

pub fn seminorm(a: &SeminormArgs, ctx: Context<'_>) -> Result<Outcome> {
    let weier;
    let loaded;
    let (f, domain): (&dyn MapSource, Chart) = if a.map == "weierstrass" {
        weier = input::weierstrass_map(a.terms);
        (&weier, Chart::cube(1, 0.0, 1.0, 2)?)
    } else {
        let file = MapArgs { map: a.map.clone(), resolution: None, domain: "-1,1".into(), matrix: None };
        loaded = input::map(&file, None, ctx.inputs)?;
        (&loaded.sampled, loaded.sampled.chart().clone())
    };
    let source = match &a.group {
        Some(spec) => input::group(spec, ctx.inputs)?,
        None => CarnotGroup::builtin(&format!("abelian:{}", f.source_dim()))?,
    };
    let target = CarnotGroup::builtin(&format!("abelian:{}", f.target_dim()))?;
    let opts = SeminormOptions { seed: ctx.seed, max_separation: a.eps, ..SeminormOptions::default() };
    let mut budgets: Vec<usize> = std::iter::successors(Some(16usize), |b| Some(b * 2)).take_while(|&b| b < a.budget).collect();
    budgets.push(a.budget);
    let mut rows = Vec::with_capacity(budgets.len());
    let mut trace = Vec::with_capacity(budgets.len());
    for &b in &budgets {
        let e = hoelder_seminorm(f, &source, &target, &domain, a.beta, b, &opts)?;
        rows.push(vec![b as f64, e.pairs as f64, e.seminorm]);
        trace.push(e);
    }
    ctx.artifacts.write_table("seminorm.csv", &["budget".into(), "pairs".into(), "seminorm".into()], &rows)?;
    let est = trace.pop().expect("budget list is nonempty");
    let line = format!("[f]_{} >= {:.6} over {} pairs", a.beta, est.seminorm, est.pairs);
    Ok(Outcome::new(Status::Ok, line, est))
}

pub fn young(a: &YoungArgs, ctx: Context<'_>) -> Result<Outcome> {
    let (lo, hi) = input::int_range(&a.levels, "levels")?;
    if lo < 0 {
        return Err(Error::InvalidArgument("levels must be nonnegative".into()));
    }
    let default_path = || sample_path(|y| partial_sum(y, a.terms), 0.0, 1.0, hi as u32);
    let f = match &a.f {
        Some(p) => input::path_samples(p, ctx.inputs)?,
        None => default_path(),
    };
    let g = match &a.g {
        Some(p) => input::path_samples(p, ctx.inputs)?,
        None => default_path(),
    };
    let rule = match a.rule {
        Rule::LeftPoint => StieltjesRule::LeftPoint,
        Rule::Trapezoid => StieltjesRule::Trapezoid,
    };
    let r = young_integral(&f, &g, a.alpha, a.beta, lo as u32, rule)?;
    ctx.artifacts.write_with("young.csv", |w| r.write_csv(w))?;
    let last = r.levels.last().and_then(|l| l.delta).unwrap_or(0.0);
    let line = format!("integral {:.15} at level {}, last delta {last:e}", r.value, r.levels.len() as i32 + lo - 1);
    Ok(Outcome::new(Status::Ok, line, r))
}

pub fn weierstrass(a: &WeierstrassArgs, ctx: Context<'_>) -> Result<Outcome> {
    let ys = match &a.y {
        Some(text) => input::vector(text, "y")?,
        None => {
            let n = a.samples.max(2);
            (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
        }
    };
    let rows: Vec<Vec<f64>> = ys.iter().map(|&y| vec![y, partial_sum(y, a.terms)]).collect();
    ctx.artifacts.write_table("weierstrass.csv", &["y".into(), "value".into()], &rows)?;
    let line = if ys.len() == 1 {
        format!("{}", rows[0][1])
    } else {
        format!("{} values of g_{} written to weierstrass.csv", ys.len(), a.terms)
    };
    let summary = json!({
        "terms": a.terms,
        "samples": ys.len(),
        "tail_bound": weierstrass_tail_bound(a.terms),
        "exponent": 2.0 / 3.0,
    });
    Ok(Outcome::new(Status::Ok, line, summary))
}
