use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::path::{distance, HorizontalCurve, OneForm};
use super::sampled::{Chart, MapSource, SampledMap};
use crate::carnot::CarnotGroup;
use crate::error::{Error, Result};
use crate::extension::{CentralExtension, PotentialForm};
use crate::linalg::{gauss_legendre, least_squares};

/// Number of seeded random polygons in the probe family.
pub const RANDOM_PROBES: usize = 100;
/// Default relative tolerance: defect per unit loop length.
pub const DEFAULT_TOL: f64 = 1e-6;

/// A map `f: H1 -> H2` together with the two extensions it should lift
/// through and the fiber map `Phi: V1 -> V2` estimated at a basepoint.
///
/// The base `H1` must be abelian so that straight segments are horizontal.
pub struct LiftProblem<'a> {
    map: &'a SampledMap,
    ext1: CentralExtension,
    ext2: CentralExtension,
    alpha1: PotentialForm,
    alpha2: PotentialForm,
    basepoint: Vec<f64>,
    fiber_map: DMatrix<f64>,
    rule: (Vec<f64>, Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ProbeKind {
    Rectangle,
    Polygon,
}

/// Closed polygon in base coordinates; the first vertex is not repeated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub kind: ProbeKind,
    pub vertices: Vec<Vec<f64>>,
}

impl Probe {
    pub fn length(&self) -> f64 {
        let n = self.vertices.len();
        (0..n).map(|i| distance(&self.vertices[i], &self.vertices[(i + 1) % n])).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeOutcome {
    pub probe: Probe,
    pub length: f64,
    pub defect: Vec<f64>,
    pub norm: f64,
}

/// Result of running the probe family.
#[derive(Clone, Debug, Serialize)]
pub struct LiftCheck {
    pub tol: f64,
    pub fiber_map: Vec<Vec<f64>>,
    pub outcomes: Vec<ProbeOutcome>,
    /// Index of the probe with the largest defect (earliest among ties).
    pub witness: usize,
    pub max_defect: f64,
    /// Largest defect per unit length.
    pub max_ratio: f64,
    pub passed: bool,
}

impl LiftCheck {
    pub fn witness_probe(&self) -> &ProbeOutcome {
        &self.outcomes[self.witness]
    }
}

impl<'a> LiftProblem<'a> {
    pub fn new(map: &'a SampledMap, ext1: &CentralExtension, ext2: &CentralExtension, basepoint: &[f64]) -> Result<Self> {
        if !ext1.base().algebra().is_abelian() {
            return Err(Error::InvalidArgument("lifting probes need an abelian base in the source".into()));
        }
        if map.source_dim() != ext1.base_dim() || map.target_dim() != ext2.base_dim() {
            return Err(Error::Structure(format!(
                "map is {} -> {}, extensions have bases of dimension {} and {}",
                map.source_dim(),
                map.target_dim(),
                ext1.base_dim(),
                ext2.base_dim()
            )));
        }
        map.chart().check_inside(basepoint)?;
        let mut problem = Self {
            map,
            ext1: ext1.clone(),
            ext2: ext2.clone(),
            alpha1: ext1.potential_form()?,
            alpha2: ext2.potential_form()?,
            basepoint: basepoint.to_vec(),
            fiber_map: DMatrix::zeros(ext2.fiber_dim(), ext1.fiber_dim()),
            rule: gauss_legendre(5),
        };
        problem.fiber_map = problem.estimate_fiber_map()?;
        Ok(problem)
    }

    pub fn fiber_map(&self) -> &DMatrix<f64> {
        &self.fiber_map
    }

    pub fn basepoint(&self) -> &[f64] {
        &self.basepoint
    }

    /// Least-squares `Phi` with `oint f^* alpha2 = Phi oint alpha1` over
    /// small squares around the basepoint in every coordinate plane.
    fn estimate_fiber_map(&self) -> Result<DMatrix<f64>> {
        let chart = self.map.chart();
        let d = chart.dim();
        let mut s = (0..d).map(|k| chart.spacing(k)).fold(f64::INFINITY, f64::min) * 0.25;
        for k in 0..d {
            s = s.min(0.5 * (self.basepoint[k] - chart.lo()[k])).min(0.5 * (chart.hi()[k] - self.basepoint[k]));
        }
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("basepoint must lie in the chart interior".into()));
        }
        let (n1, n2) = (self.ext1.fiber_dim(), self.ext2.fiber_dim());
        let mut a_cols = Vec::new();
        let mut b_cols = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let corner = |si: f64, sj: f64| {
                    let mut p = self.basepoint.clone();
                    p[i] += si * s;
                    p[j] += sj * s;
                    p
                };
                let square = vec![corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)];
                let (src, tgt) = self.loop_integrals(&square)?;
                a_cols.push(src);
                b_cols.push(tgt);
            }
        }
        let rows = a_cols.len();
        let a = DMatrix::from_fn(rows, n1, |r, c| a_cols[r][c]);
        let b = DMatrix::from_fn(rows, n2, |r, c| b_cols[r][c]);
        Ok(least_squares(&a, &b)?.transpose())
    }

    /// Gauss rule for `alpha` along the straight segment `a -> b`.
    fn form_segment(&self, alpha: &PotentialForm, a: &[f64], b: &[f64], out: &mut [f64]) {
        let (n, m) = (alpha.dim(), alpha.components());
        let mut coeffs = vec![0.0; n * m];
        let mut x = vec![0.0; n];
        for (t, w) in self.rule.0.iter().zip(&self.rule.1) {
            for k in 0..n {
                x[k] = a[k] + t * (b[k] - a[k]);
            }
            alpha.eval_into(&x, &mut coeffs);
            for (v, o) in out.iter_mut().enumerate() {
                *o += w * (0..n).map(|k| coeffs[v * n + k] * (b[k] - a[k])).sum::<f64>();
            }
        }
    }

    /// `(oint alpha1, oint f^* alpha2)` around a closed polygon.
    fn loop_integrals(&self, vertices: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut src = vec![0.0; self.ext1.fiber_dim()];
        let mut tgt = vec![0.0; self.ext2.fiber_dim()];
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
            self.form_segment(&self.alpha1, a, b, &mut src);
            pullback_segment(self.map, &self.alpha2, &self.rule, a, b, &mut tgt)?;
        }
        Ok((src, tgt))
    }

    /// `oint f^* alpha2 - Phi oint alpha1` around a closed polygon given
    /// without its repeated endpoint.
    pub fn polygon_defect(&self, vertices: &[Vec<f64>]) -> Result<Vec<f64>> {
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument("loops need at least 3 nodes".into()));
        }
        let (src, tgt) = self.loop_integrals(vertices)?;
        Ok((0..tgt.len())
            .map(|v| tgt[v] - (0..src.len()).map(|u| self.fiber_map[(v, u)] * src[u]).sum::<f64>())
            .collect())
    }

    /// Evaluates the probe family and compares each defect with
    /// `tol * length`.
    pub fn check(&self, tol: f64, seed: u64) -> Result<LiftCheck> {
        let probes = probe_family(self.map.chart(), &self.basepoint, seed, RANDOM_PROBES);
        let outcomes: Vec<ProbeOutcome> = probes
            .into_par_iter()
            .map(|probe| {
                let defect = self.polygon_defect(&probe.vertices)?;
                let norm = defect.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok(ProbeOutcome { length: probe.length(), probe, defect, norm })
            })
            .collect::<Result<_>>()?;
        let max_defect = outcomes.iter().fold(0.0f64, |m, o| m.max(o.norm));
        let witness = outcomes.iter().position(|o| o.norm >= max_defect * (1.0 - 1e-9)).unwrap_or(0);
        let max_ratio = outcomes.iter().fold(0.0f64, |m, o| m.max(o.norm / o.length));
        let passed = outcomes.iter().all(|o| o.norm <= tol * o.length);
        let fiber_map = self.fiber_map.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(LiftCheck { tol, fiber_map, outcomes, witness, max_defect, max_ratio, passed })
    }

    /// Staircase integrals `(int alpha1, int f^* alpha2)` from the basepoint
    /// to `x`, moving along one coordinate axis at a time.
    fn staircase(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut src = vec![0.0; self.ext1.fiber_dim()];
        let mut tgt = vec![0.0; self.ext2.fiber_dim()];
        let mut cur = self.basepoint.clone();
        for k in 0..x.len() {
            if x[k] == cur[k] {
                continue;
            }
            let mut next = cur.clone();
            next[k] = x[k];
            self.form_segment(&self.alpha1, &cur, &next, &mut src);
            pullback_segment(self.map, &self.alpha2, &self.rule, &cur, &next, &mut tgt)?;
            cur = next;
        }
        Ok((src, tgt))
    }

    /// Builds `F` on the product of the base chart with a fiber grid from
    /// a compatible pair `F(start) = target`.
    ///
    /// `F(x, c) = (f(x), p + int_stair f^* alpha2 + Phi (c - g - int_stair alpha1))`
    /// where `g`, `p` are the fiber parts of `start`, `target`.
    pub fn lift(&self, fiber: &Chart, start: &[f64], target: &[f64], tol: f64, seed: u64) -> Result<(SampledMap, LiftCheck)> {
        let (ext1, ext2) = (&self.ext1, &self.ext2);
        if fiber.dim() != ext1.fiber_dim() {
            return Err(Error::Structure("fiber grid dimension differs from the source fiber".into()));
        }
        if start.len() != ext1.extended().dim() || target.len() != ext2.extended().dim() {
            return Err(Error::Structure("basepoint pair has the wrong dimensions".into()));
        }
        let base_start = ext1.project(start);
        if distance(&base_start, &self.basepoint) > 1e-9 {
            return Err(Error::InvalidArgument("start does not project to the problem basepoint".into()));
        }
        let image = self.map.eval(&self.basepoint)?;
        let gap = ext2.project(target).iter().zip(&image).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > 1e-9 * (1.0 + image.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Err(Error::InvalidArgument(format!("target does not project to f(basepoint): gap {gap:e}")));
        }

        let report = self.check(tol, seed)?;
        if !report.passed {
            let w = report.witness_probe();
            return Err(Error::NotLiftable { tol, witness: report.witness, defect: w.norm });
        }

        let base_chart = self.map.chart();
        let chart = Chart::new(
            ext1.join(base_chart.lo(), fiber.lo()),
            ext1.join(base_chart.hi(), fiber.hi()),
            join_usize(ext1, base_chart.resolution(), fiber.resolution()),
        )?;
        let table: Vec<(Vec<f64>, Vec<f64>)> = (0..base_chart.node_count())
            .into_par_iter()
            .map(|flat| self.staircase(&base_chart.node(flat)))
            .collect::<Result<_>>()?;

        let g_fiber = ext1.fiber_part(start);
        let p_fiber = ext2.fiber_part(target);
        let t = ext2.extended().dim();
        let mut values = vec![0.0; chart.node_count() * t];
        values.par_chunks_mut(t).enumerate().for_each(|(flat, out)| {
            let mut idx = vec![0; chart.dim()];
            chart.multi_index(flat, &mut idx);
            let bi: Vec<usize> = ext1.base_index().iter().map(|&k| idx[k]).collect();
            let fi: Vec<usize> = ext1.fiber_index().iter().map(|&k| idx[k]).collect();
            let bflat = base_chart.flat_index(&bi);
            let c: Vec<f64> = fi.iter().enumerate().map(|(k, &i)| fiber.coordinate(k, i)).collect();
            let (src, tgt) = &table[bflat];
            let fiber_value: Vec<f64> = (0..p_fiber.len())
                .map(|v| {
                    let shift: f64 =
                        (0..c.len()).map(|u| self.fiber_map[(v, u)] * (c[u] - g_fiber[u] - src[u])).sum();
                    p_fiber[v] + tgt[v] + shift
                })
                .collect();
            out.copy_from_slice(&ext2.join(self.map.node_value(bflat), &fiber_value));
        });
        Ok((SampledMap::new(chart, t, values)?, report))
    }
}

/// Integral of `f^* form` along the segment `a -> b`, split where the
/// segment crosses grid lines so each piece sees one multilinear polynomial;
/// `rule` is a Gauss rule on `[0, 1]`. Adds into `out`.
pub fn pullback_segment(
    map: &SampledMap,
    form: &(impl OneForm + ?Sized),
    rule: &(Vec<f64>, Vec<f64>),
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let chart = map.chart();
    chart.check_inside(a)?;
    chart.check_inside(b)?;
    let d = chart.dim();
    let mut cuts = vec![0.0, 1.0];
    for k in 0..d {
        let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
        if hi - lo <= 0.0 {
            continue;
        }
        let h = chart.spacing(k);
        let first = ((lo - chart.lo()[k]) / h).floor().max(0.0) as usize;
        for i in first..chart.resolution()[k] {
            let c = chart.coordinate(k, i);
            if c >= hi {
                break;
            }
            if c > lo {
                cuts.push((c - a[k]) / (b[k] - a[k]));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);

    let t2 = map.target_dim();
    let m = form.components();
    let dir: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let mut x = vec![0.0; d];
    let mut fx = vec![0.0; t2];
    let mut jac = vec![0.0; t2 * d];
    let mut coeffs = vec![0.0; m * t2];
    let mut df = vec![0.0; t2];
    for w in cuts.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 - s0 <= 0.0 {
            continue;
        }
        let mid = 0.5 * (s0 + s1);
        for k in 0..d {
            x[k] = a[k] + mid * dir[k];
        }
        let cell = map.locate(&x);
        for (t, wt) in rule.0.iter().zip(&rule.1) {
            let s = s0 + t * (s1 - s0);
            for k in 0..d {
                x[k] = a[k] + s * dir[k];
            }
            map.eval_in_cell(&cell, &x, &mut fx, Some(&mut jac));
            for r in 0..t2 {
                df[r] = (0..d).map(|k| jac[r * d + k] * dir[k]).sum();
            }
            form.eval_into(&fx, &mut coeffs);
            for (v, o) in out.iter_mut().enumerate().take(m) {
                *o += wt * (s1 - s0) * (0..t2).map(|r| coeffs[v * t2 + r] * df[r]).sum::<f64>();
            }
        }
    }
    Ok(())
}

/// `oint f^* form` around a closed polygon given without its repeated
/// endpoint.
pub fn pullback_loop(map: &SampledMap, form: &(impl OneForm + ?Sized), vertices: &[Vec<f64>]) -> Result<Vec<f64>> {
    if map.target_dim() != form.dim() {
        return Err(Error::Structure("form does not live on the map's target".into()));
    }
    let rule = gauss_legendre(5);
    let mut out = vec![0.0; form.components()];
    let n = vertices.len();
    for i in 0..n {
        pullback_segment(map, form, &rule, &vertices[i], &vertices[(i + 1) % n], &mut out)?;
    }
    Ok(out)
}

fn join_usize(ext: &CentralExtension, base: &[usize], fiber: &[usize]) -> Vec<usize> {
    let mut out = vec![0; base.len() + fiber.len()];
    for (&k, &v) in ext.base_index().iter().zip(base) {
        out[k] = v;
    }
    for (&k, &v) in ext.fiber_index().iter().zip(fiber) {
        out[k] = v;
    }
    out
}

/// Axis-aligned rectangles at three scales in every coordinate plane
/// through the basepoint, then `random` seeded polygons.
pub fn probe_family(chart: &Chart, basepoint: &[f64], seed: u64, random: usize) -> Vec<Probe> {
    let d = chart.dim();
    let mut probes = Vec::new();
    for level in 1..=3u32 {
        let parts = 1usize << level;
        for i in 0..d {
            for j in (i + 1)..d {
                let (si, sj) = (chart.extent(i) / parts as f64, chart.extent(j) / parts as f64);
                for ai in 0..parts {
                    for aj in 0..parts {
                        let (x0, y0) = (chart.lo()[i] + ai as f64 * si, chart.lo()[j] + aj as f64 * sj);
                        let corner = |x: f64, y: f64| {
                            let mut p = basepoint.to_vec();
                            p[i] = x;
                            p[j] = y;
                            p
                        };
                        let vertices =
                            vec![corner(x0, y0), corner(x0 + si, y0), corner(x0 + si, y0 + sj), corner(x0, y0 + sj)];
                        probes.push(Probe { kind: ProbeKind::Rectangle, vertices });
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let count = rng.random_range(3..=6);
        let mut lo = vec![0.0; d];
        let mut size = vec![0.0; d];
        for k in 0..d {
            size[k] = chart.extent(k) * rng.random_range(0.25..=0.5);
            lo[k] = chart.lo()[k] + rng.random::<f64>() * (chart.extent(k) - size[k]);
        }
        let vertices = (0..count)
            .map(|_| (0..d).map(|k| lo[k] + rng.random::<f64>() * size[k]).collect())
            .collect();
        probes.push(Probe { kind: ProbeKind::Polygon, vertices });
    }
    probes
}

/// Defect of `f` around a closed base loop, with the fiber map estimated at
/// the chart center.
pub fn closed_loop_defect(
    f: &SampledMap,
    curve: &HorizontalCurve,
    ext1: &CentralExtension,
    ext2: &CentralExtension,
) -> Result<Vec<f64>> {
    if curve.points().len() < 3 {
        return Err(Error::InvalidArgument("loops need at least 3 nodes".into()));
    }
    if !curve.is_closed(1e-9) {
        return Err(Error::InvalidArgument("loop is not closed".into()));
    }
    let problem = LiftProblem::new(f, ext1, ext2, &f.chart().center())?;
    let pts = curve.points();
    problem.polygon_defect(&pts[..pts.len() - 1])
}

/// Runs the probe family at `basepoint`.
pub fn check_lift(
    f: &SampledMap,
    ext1: &CentralExtension,
    ext2: &CentralExtension,
    basepoint: &[f64],
    tol: f64,
    seed: u64,
) -> Result<LiftCheck> {
    LiftProblem::new(f, ext1, ext2, basepoint)?.check(tol, seed)
}

/// Constructs the lift through the pair `(start, target)`; refuses when the
/// probe family finds a defect above tolerance.
pub fn lift_map(
    f: &SampledMap,
    ext1: &CentralExtension,
    ext2: &CentralExtension,
    start: &[f64],
    target: &[f64],
    fiber: &Chart,
    tol: f64,
    seed: u64,
) -> Result<(SampledMap, LiftCheck)> {
    let basepoint = ext1.project(start);
    LiftProblem::new(f, ext1, ext2, &basepoint)?.lift(fiber, start, target, tol, seed)
}

/// Fiber homomorphism read off a map between extended groups.
#[derive(Clone, Debug, Serialize)]
pub struct FiberHom {
    /// Average over probes, rows indexed by target fiber.
    pub phi: Vec<Vec<f64>>,
    /// Largest entrywise deviation of a single probe's estimate from the
    /// average.
    pub deviation: f64,
    /// Largest failure of additivity and oddness.
    pub linearity_residual: f64,
    /// Largest base component of `F(g)^{-1} F(g k)`.
    pub base_leakage: f64,
}

/// Probe points at quarter positions of the base axes, fiber at the center,
/// with a fiber step that keeps `g k` for `|k| <= 2 step` inside.
pub fn default_fiber_probes(chart: &Chart, ext: &CentralExtension) -> (Vec<Vec<f64>>, f64) {
    let base_axes = ext.base_index();
    let step = ext.fiber_index().iter().map(|&k| chart.extent(k)).fold(f64::INFINITY, f64::min) * 0.25;
    let mut probes = Vec::new();
    let count = 3usize.pow(base_axes.len() as u32);
    for mut code in 0..count {
        let mut p = chart.center();
        for &k in base_axes {
            let q = (code % 3 + 1) as f64 * 0.25;
            p[k] = chart.lo()[k] + q * chart.extent(k);
            code /= 3;
        }
        probes.push(p);
    }
    (probes, step)
}

pub fn fiber_hom_extract(
    map: &dyn MapSource,
    ext1: &CentralExtension,
    ext2: &CentralExtension,
    probes: &[Vec<f64>],
    step: f64,
) -> Result<FiberHom> {
    if map.source_dim() != ext1.extended().dim() || map.target_dim() != ext2.extended().dim() {
        return Err(Error::Structure("map dimensions do not match the extended groups".into()));
    }
    if probes.is_empty() || !(step > 0.0) {
        return Err(Error::InvalidArgument("need probes and a positive step".into()));
    }
    let (n1, n2) = (ext1.fiber_dim(), ext2.fiber_dim());
    let g2 = ext2.extended();
    let translate = |g: &[f64], k: &[f64]| -> Vec<f64> {
        let mut out = g.to_vec();
        for (&i, v) in ext1.fiber_index().iter().zip(k) {
            out[i] += v;
        }
        out
    };
    let quotient = |fg: &[f64], g: &[f64], k: &[f64]| -> Result<Vec<f64>> {
        let fgk = map.eval(&translate(g, k))?;
        Ok(g2.left_quotient(fg, &fgk))
    };
    let per_probe: Vec<(DMatrix<f64>, f64, f64)> = probes
        .par_iter()
        .map(|g| {
            let fg = map.eval(g)?;
            let mut phi = DMatrix::zeros(n2, n1);
            let mut leak: f64 = 0.0;
            let mut k = vec![0.0; n1];
            for u in 0..n1 {
                k[u] = step;
                let q = quotient(&fg, g, &k)?;
                k[u] = 0.0;
                leak = leak.max(ext2.project(&q).iter().fold(0.0f64, |m, v| m.max(v.abs())) / step);
                for (v, val) in ext2.fiber_part(&q).into_iter().enumerate() {
                    phi[(v, u)] = val / step;
                }
            }
            let mut resid: f64 = 0.0;
            for u in 0..n1 {
                for w in u..n1 {
                    k[u] += step;
                    k[w] += step;
                    let sum = ext2.fiber_part(&quotient(&fg, g, &k)?);
                    k[u] = 0.0;
                    k[w] = 0.0;
                    for v in 0..n2 {
                        resid = resid.max((sum[v] / step - phi[(v, u)] - phi[(v, w)]).abs());
                    }
                }
                k[u] = -step;
                let neg = ext2.fiber_part(&quotient(&fg, g, &k)?);
                k[u] = 0.0;
                for v in 0..n2 {
                    resid = resid.max((neg[v] / step + phi[(v, u)]).abs());
                }
            }
            Ok((phi, resid, leak))
        })
        .collect::<Result<_>>()?;
    let mut mean = DMatrix::zeros(n2, n1);
    for (phi, _, _) in &per_probe {
        mean += phi;
    }
    mean /= per_probe.len() as f64;
    let deviation = per_probe.iter().fold(0.0f64, |m, (phi, _, _)| m.max((phi - &mean).abs().max()));
    let linearity_residual = per_probe.iter().fold(0.0f64, |m, (_, r, _)| m.max(*r));
    let base_leakage = per_probe.iter().fold(0.0f64, |m, (_, _, l)| m.max(*l));
    Ok(FiberHom {
        phi: mean.row_iter().map(|r| r.iter().copied().collect()).collect(),
        deviation,
        linearity_residual,
        base_leakage,
    })
}

/// `delta_{1/lambda}(F(g)^{-1} F(g delta_lambda h))`.
pub fn pansu_quotient(
    map: &dyn MapSource,
    source: &CarnotGroup,
    target: &CarnotGroup,
    g: &[f64],
    h: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    if map.source_dim() != source.dim() || map.target_dim() != target.dim() {
        return Err(Error::Structure("map dimensions do not match the groups".into()));
    }
    let q = source.mul(g, &source.dilate(lambda, h));
    let fg = map.eval(g)?;
    let fq = map.eval(&q)?;
    Ok(target.dilate(1.0 / lambda, &target.left_quotient(&fg, &fq)))
}

/// Matrix of Pansu quotients of the basis vectors, column `j` for `e_j`.
pub fn pansu_matrix(
    map: &dyn MapSource,
    source: &CarnotGroup,
    target: &CarnotGroup,
    g: &[f64],
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(target.dim(), source.dim());
    let mut e = vec![0.0; source.dim()];
    for j in 0..source.dim() {
        e[j] = 1.0;
        let col = pansu_quotient(map, source, target, g, &e, lambda)?;
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::sampled::FnMap;
    use crate::StratifiedAlgebra;

    fn h1_ext() -> CentralExtension {
        CentralExtension::by_top_layer(&CarnotGroup::builtin("heisenberg:1").unwrap()).unwrap()
    }

    fn plane_map(res: usize, f: impl Fn(f64, f64) -> (f64, f64) + Sync) -> SampledMap {
        let chart = Chart::cube(2, -1.0, 1.0, res).unwrap();
        SampledMap::from_fn(chart, 2, |x, out| {
            let (a, b) = f(x[0], x[1]);
            out[0] = a;
            out[1] = b;
        })
        .unwrap()
    }

    fn unit_square() -> HorizontalCurve {
        let plane = CarnotGroup::new(StratifiedAlgebra::new("r2", vec![2], &[]).unwrap()).unwrap();
        let v = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        HorizontalCurve::closed_polygon(plane, &v.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_has_no_defect() {
        let ext = h1_ext();
        let f = plane_map(17, |a, b| (a, b));
        let d = closed_loop_defect(&f, &unit_square(), &ext, &ext).unwrap();
        assert!(d[0].abs() < 1e-14);
        let report = check_lift(&f, &ext, &ext, &[0.0, 0.0], DEFAULT_TOL, 0).unwrap();
        assert!(report.passed);
        assert!((report.fiber_map[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shear_example_lifts_and_square_map_does_not() {
        let ext = h1_ext();
        let shear = plane_map(33, |a, b| (a + b * b, b));
        let d = closed_loop_defect(&shear, &unit_square(), &ext, &ext).unwrap();
        assert!(d[0].abs() < 1e-6, "{d:?}");
        let sq = plane_map(33, |a, b| (a * a, b));
        let d = closed_loop_defect(&sq, &unit_square(), &ext, &ext).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-4, "{d:?}");
        let report = check_lift(&sq, &ext, &ext, &[0.0, 0.0], DEFAULT_TOL, 0).unwrap();
        assert!(!report.passed);
        let w = report.witness_probe();
        assert_eq!(w.probe.kind, ProbeKind::Rectangle);
        assert!((w.norm - 1.0).abs() < 1e-4);
        assert!((w.length - 4.0).abs() < 1e-12);
    }

    #[test]
    fn open_or_short_loops_are_refused() {
        let ext = h1_ext();
        let f = plane_map(9, |a, b| (a, b));
        let plane = ext.base().clone();
        let open = HorizontalCurve::uniform(plane.clone(), vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(closed_loop_defect(&f, &open, &ext, &ext).is_err());
        let outside = HorizontalCurve::closed_polygon(plane, &[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(closed_loop_defect(&f, &outside, &ext, &ext), Err(Error::ChartExit(_))));
    }

    #[test]
    fn probe_family_is_seeded() {
        let chart = Chart::cube(2, -1.0, 1.0, 9).unwrap();
        let a = probe_family(&chart, &[0.0, 0.0], 7, 10);
        let b = probe_family(&chart, &[0.0, 0.0], 7, 10);
        let c = probe_family(&chart, &[0.0, 0.0], 8, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 4 + 16 + 64 + 10);
        assert!(a.iter().all(|p| p.vertices.iter().all(|v| chart.contains(v))));
    }

    #[test]
    fn identity_lifts_to_identity() {
        let ext = h1_ext();
        let f = plane_map(9, |a, b| (a, b));
        let fiber = Chart::new(vec![-1.0], vec![1.0], vec![5]).unwrap();
        let (lift, _) = lift_map(&f, &ext, &ext, &[0.0; 3], &[0.0; 3], &fiber, DEFAULT_TOL, 0).unwrap();
        for flat in 0..lift.chart().node_count() {
            let node = lift.chart().node(flat);
            for (a, b) in lift.node_value(flat).iter().zip(&node) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn square_map_is_refused_with_witness() {
        let ext = h1_ext();
        let f = plane_map(17, |a, b| (a * a, b));
        let fiber = Chart::new(vec![-1.0], vec![1.0], vec![3]).unwrap();
        let err = lift_map(&f, &ext, &ext, &[0.0; 3], &[0.0; 3], &fiber, DEFAULT_TOL, 0).unwrap_err();
        assert!(matches!(err, Error::NotLiftable { .. }));
    }

    #[test]
    fn linear_symplectic_lift_is_linear() {
        let ext = h1_ext();
        let f = plane_map(9, |a, b| (2.0 * a + b, a + b));
        let fiber = Chart::new(vec![-1.0], vec![1.0], vec![5]).unwrap();
        let (lift, _) = lift_map(&f, &ext, &ext, &[0.0; 3], &[0.0; 3], &fiber, DEFAULT_TOL, 0).unwrap();
        let v = lift.eval(&[0.3, -0.2, 0.7]).unwrap();
        let expect = [0.4, 0.1, 0.7];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13, "{v:?}");
        }
        let (probes, step) = default_fiber_probes(lift.chart(), &ext);
        let hom = fiber_hom_extract(&lift, &ext, &ext, &probes, step).unwrap();
        assert!((hom.phi[0][0] - 1.0).abs() < 1e-12);
        assert!(hom.deviation < 1e-12 && hom.linearity_residual < 1e-12);
    }

    #[test]
    fn vertical_scaling_has_scalar_fiber_map() {
        let ext = h1_ext();
        let f = FnMap::new(3, 3, |x: &[f64], out: &mut [f64]| {
            out[0] = x[0];
            out[1] = x[1];
            out[2] = 3.0 * x[2];
        });
        let probes = vec![vec![0.1, 0.2, 0.3], vec![-0.5, 0.4, 0.0]];
        let hom = fiber_hom_extract(&f, &ext, &ext, &probes, 0.1).unwrap();
        assert!((hom.phi[0][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dilation_pansu_quotient_is_scale_free() {
        let g = CarnotGroup::builtin("filiform:3").unwrap();
        let gg = g.clone();
        let f = FnMap::new(4, 4, move |x: &[f64], out: &mut [f64]| out.copy_from_slice(&gg.dilate(2.0, x)));
        let (p, h) = ([0.3, -0.1, 0.5, 0.2], [1.0, 0.5, -0.3, 0.25]);
        for lambda in [1e-1, 1e-2, 1e-3] {
            let q = pansu_quotient(&f, &g, &g, &p, &h, lambda).unwrap();
            for (a, b) in q.iter().zip(g.dilate(2.0, &h)) {
                assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{q:?}");
            }
        }
        assert!(pansu_quotient(&f, &g, &g, &p, &h, 0.0).is_err());
    }
}
