use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::SymplecticStructure;
use crate::curves::{probe_family, pullback_loop, Chart, CoordinateForm, MapSource, SampledMap};
use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, pfaffian, solve_small};

/// Primitive of a sampled 2-form with its quality figures.
#[derive(Clone, Debug)]
pub struct Primitive {
    /// Coordinate coefficients of the 1-form at each node.
    pub alpha: SampledMap,
    /// Max of `|d alpha - eta|` over interior nodes.
    pub residual: f64,
    /// Max of `|d eta|` over nodes.
    pub closedness: f64,
}

fn square_dim(eta: &SampledMap) -> Result<usize> {
    let d = eta.chart().dim();
    if eta.target_dim() != d * d {
        return Err(Error::Structure(format!("2-form on R^{d} needs {} entries per node", d * d)));
    }
    Ok(d)
}

fn interior(chart: &Chart, idx: &[usize]) -> bool {
    idx.iter().zip(chart.resolution()).all(|(&i, &r)| i > 0 && i + 1 < r)
}

/// Radial homotopy primitive about the chart center,
/// `alpha(x) = int_0^1 t eta(c + t(x - c))(x - c, .) dt`,
/// for a 2-form stored as a row-major antisymmetric matrix per node.
pub fn poincare_primitive(eta: &SampledMap, closed_tol: f64) -> Result<Primitive> {
    let d = square_dim(eta)?;
    let chart = eta.chart().clone();
    let closedness = closedness(eta, d);
    if closedness > closed_tol {
        return Err(Error::InvalidArgument(format!("2-form is not closed: |d eta| = {closedness:e}")));
    }
    let center = chart.center();
    let (nodes, weights) = gauss_legendre(16);
    let mut values = vec![0.0; chart.node_count() * d];
    values.par_chunks_mut(d).enumerate().for_each(|(flat, out)| {
        let x = chart.node(flat);
        let rel: Vec<f64> = x.iter().zip(&center).map(|(a, b)| a - b).collect();
        let mut e = vec![0.0; d * d];
        let mut p = vec![0.0; d];
        out.fill(0.0);
        for (t, w) in nodes.iter().zip(&weights) {
            for k in 0..d {
                p[k] = center[k] + t * rel[k];
            }
            let cell = eta.locate(&p);
            eta.eval_in_cell(&cell, &p, &mut e, None);
            for k in 0..d {
                out[k] += w * t * (0..d).map(|i| e[i * d + k] * rel[i]).sum::<f64>();
            }
        }
    });
    let alpha = SampledMap::new(chart.clone(), d, values)?;
    let residual = exterior_residual(&alpha, eta, d);
    Ok(Primitive { alpha, residual, closedness })
}

fn closedness(eta: &SampledMap, d: usize) -> f64 {
    if d < 3 {
        return 0.0;
    }
    let chart = eta.chart();
    (0..chart.node_count())
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0; d];
            chart.multi_index(flat, &mut idx);
            let jac = eta.node_jacobian(&idx);
            let del = |i: usize, j: usize, k: usize| jac[(i * d + j) * d + k];
            let mut worst: f64 = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    for k in (j + 1)..d {
                        worst = worst.max((del(j, k, i) + del(k, i, j) + del(i, j, k)).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

fn exterior_residual(alpha: &SampledMap, eta: &SampledMap, d: usize) -> f64 {
    let chart = alpha.chart();
    (0..chart.node_count())
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0; d];
            chart.multi_index(flat, &mut idx);
            if !interior(chart, &idx) {
                return 0.0;
            }
            let jac = alpha.node_jacobian(&idx);
            let e = eta.node_value(flat);
            let mut worst: f64 = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    let da = jac[j * d + i] - jac[i * d + j];
                    worst = worst.max((da - e[i * d + j]).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct MoserOptions {
    /// Fourth-order steps in the flow parameter.
    pub steps: usize,
    /// Lower bound on the Pfaffian of `J + t eta` over nodes and steps.
    pub pfaffian_floor: f64,
    /// Tolerance on `|d eta|` passed to the primitive.
    pub closed_tol: f64,
    /// How far, relative to the chart extent, the flow may leave the chart.
    pub exit_slack: f64,
}

impl Default for MoserOptions {
    fn default() -> Self {
        Self { steps: 32, pfaffian_floor: 0.1, closed_tol: 1e-6, exit_slack: 1e-9 }
    }
}

#[derive(Clone, Debug)]
pub struct MoserResult {
    pub map: SampledMap,
    /// Max of `|Df^T J Df - J|` over nodes before correction.
    pub eta_before: f64,
    /// Same quantity for the corrected map.
    pub eta_after: f64,
    pub min_pfaffian: f64,
    /// Largest distance a node moved under the flow.
    pub max_displacement: f64,
    pub primitive_residual: f64,
}

/// Pullback error `Df^T J Df - J` at each node, as a row-major matrix.
fn pullback_error(f: &SampledMap, j: &DMatrix<f64>) -> SampledMap {
    let chart = f.chart().clone();
    let d = chart.dim();
    let mut values = vec![0.0; chart.node_count() * d * d];
    values.par_chunks_mut(d * d).enumerate().for_each(|(flat, out)| {
        let mut idx = vec![0; d];
        chart.multi_index(flat, &mut idx);
        let df = DMatrix::from_row_slice(d, d, &f.node_jacobian(&idx));
        let e = df.transpose() * j * &df - j;
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = e[(r, c)];
            }
        }
    });
    SampledMap::new(chart, d * d, values).expect("finite pullback")
}

/// Moser correction `g = f o Psi`, where `Psi` is the time-one flow of
/// `X_t = (J + t eta)^{-1} alpha` and `d alpha = eta = f^* omega - omega`.
pub fn moser_correct(f: &SampledMap, opts: &MoserOptions) -> Result<MoserResult> {
    moser_correct_source(f, f.chart(), opts)
}

/// As [`moser_correct`], with `f` evaluated exactly through `source` and
/// sampled on `chart`.
pub fn moser_correct_source(source: &dyn MapSource, chart: &Chart, opts: &MoserOptions) -> Result<MoserResult> {
    let d = chart.dim();
    if d % 2 == 1 || source.source_dim() != d || source.target_dim() != d {
        return Err(Error::Structure("Moser correction needs a map R^{2n} -> R^{2n}".into()));
    }
    if opts.steps == 0 {
        return Err(Error::InvalidArgument("need at least one flow step".into()));
    }
    let structure = SymplecticStructure::standard(d / 2)?;
    let j = structure.forms()[0].clone();
    let sampled = SampledMap::from_source(chart.clone(), source)?;
    let eta = pullback_error(&sampled, &j);
    let eta_before = eta.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let min_pfaffian = (0..chart.node_count())
        .into_par_iter()
        .map(|flat| {
            let e = DMatrix::from_row_slice(d, d, eta.node_value(flat));
            (0..=opts.steps)
                .map(|k| {
                    let t = k as f64 / opts.steps as f64;
                    pfaffian(&(&j + &e * t)).unwrap_or(f64::NEG_INFINITY)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    if !(min_pfaffian > opts.pfaffian_floor) {
        return Err(Error::Degenerate(format!(
            "Pfaffian of J + t eta drops to {min_pfaffian:.3e}, floor {}",
            opts.pfaffian_floor
        )));
    }

    let primitive = poincare_primitive(&eta, opts.closed_tol)?;
    let alpha = &primitive.alpha;
    let field = |x: &[f64], t: f64| -> Vec<f64> {
        let cell = eta.locate(x);
        let mut m = vec![0.0; d * d];
        eta.eval_in_cell(&cell, x, &mut m, None);
        for r in 0..d {
            for c in 0..d {
                m[r * d + c] = j[(r, c)] + t * m[r * d + c];
            }
        }
        let mut a = vec![0.0; d];
        alpha.eval_in_cell(&cell, x, &mut a, None);
        if solve_small(&mut m, &mut a) {
            a
        } else {
            vec![0.0; d]
        }
    };
    let dt = 1.0 / opts.steps as f64;
    let slack: Vec<f64> = (0..d).map(|k| opts.exit_slack * chart.extent(k)).collect();
    let flowed: Vec<Vec<f64>> = (0..chart.node_count())
        .into_par_iter()
        .map(|flat| {
            let mut x = chart.node(flat);
            for s in 0..opts.steps {
                let t = s as f64 * dt;
                let k1 = field(&x, t);
                let p2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
                let k2 = field(&p2, t + 0.5 * dt);
                let p3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
                let k3 = field(&p3, t + 0.5 * dt);
                let p4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
                let k4 = field(&p4, t + dt);
                for i in 0..d {
                    x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            for k in 0..d {
                if x[k] < chart.lo()[k] - slack[k] || x[k] > chart.hi()[k] + slack[k] {
                    return Err(Error::ChartExit(format!("flow of node {flat} leaves the chart at {x:?}")));
                }
                x[k] = x[k].clamp(chart.lo()[k], chart.hi()[k]);
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; chart.node_count() * d];
    values
        .par_chunks_mut(d)
        .zip(flowed.par_iter())
        .try_for_each(|(out, x)| source.eval_into(x, out))?;
    let max_displacement = flowed
        .iter()
        .enumerate()
        .map(|(flat, x)| crate::curves::path::distance(x, &chart.node(flat)))
        .fold(0.0f64, f64::max);
    let map = SampledMap::new(chart.clone(), d, values)?;
    let eta_after = pullback_error(&map, &j).values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(MoserResult {
        map,
        eta_before,
        eta_after,
        min_pfaffian,
        max_displacement,
        primitive_residual: primitive.residual,
    })
}

/// Jacobian determinants at interior nodes and image areas of probe
/// rectangles for a planar map.
#[derive(Clone, Debug, Serialize)]
pub struct AreaReport {
    /// `max |det Df - 1|` over interior nodes.
    pub max_det_defect: f64,
    pub interior_nodes: usize,
    /// `m(f(D)) / m(D)` for each probe rectangle.
    pub probe_ratios: Vec<f64>,
    /// `max |ratio - 1|`.
    pub max_ratio_defect: f64,
}

pub fn area_preserving_check(f: &SampledMap) -> Result<AreaReport> {
    let chart = f.chart();
    if chart.dim() != 2 || f.target_dim() != 2 {
        return Err(Error::Structure("area check needs a planar map".into()));
    }
    if chart.resolution().iter().any(|&r| r < 3) {
        return Err(Error::InvalidArgument("area check needs interior nodes".into()));
    }
    let dets: Vec<f64> = (0..chart.node_count())
        .into_par_iter()
        .filter_map(|flat| {
            let mut idx = [0; 2];
            chart.multi_index(flat, &mut idx);
            if !interior(chart, &idx) {
                return None;
            }
            let j = f.node_jacobian(&idx);
            Some((j[0] * j[3] - j[1] * j[2] - 1.0).abs())
        })
        .collect();
    let area_form = CoordinateForm::new(2, 1, |x: &[f64], out: &mut [f64]| {
        out[0] = -0.5 * x[1];
        out[1] = 0.5 * x[0];
    });
    let probes = probe_family(chart, &chart.center(), 0, 0);
    let probe_ratios: Vec<f64> = probes
        .par_iter()
        .map(|p| {
            let v = &p.vertices;
            let area = (v[1][0] - v[0][0]) * (v[2][1] - v[1][1]);
            Ok(pullback_loop(f, &area_form, v)?[0] / area)
        })
        .collect::<Result<_>>()?;
    Ok(AreaReport {
        max_det_defect: dets.iter().fold(0.0, |m: f64, v| m.max(*v)),
        interior_nodes: dets.len(),
        max_ratio_defect: probe_ratios.iter().fold(0.0, |m: f64, r| m.max((r - 1.0).abs())),
        probe_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar(res: usize, f: impl Fn(f64, f64) -> (f64, f64) + Sync) -> SampledMap {
        SampledMap::from_fn(Chart::cube(2, -1.0, 1.0, res).unwrap(), 2, |x, out| {
            let (a, b) = f(x[0], x[1]);
            out[0] = a;
            out[1] = b;
        })
        .unwrap()
    }

    fn constant_form(res: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> SampledMap {
        SampledMap::from_fn(Chart::cube(2, -1.0, 1.0, res).unwrap(), 4, |x, out| {
            let v = f(x[0], x[1]);
            out.copy_from_slice(&[0.0, v, -v, 0.0]);
        })
        .unwrap()
    }

    #[test]
    fn primitive_of_area_form() {
        let p = poincare_primitive(&constant_form(17, |_, _| 1.0), 1e-6).unwrap();
        let chart = p.alpha.chart().clone();
        for flat in 0..chart.node_count() {
            let x = chart.node(flat);
            let a = p.alpha.node_value(flat);
            assert!((a[0] + 0.5 * x[1]).abs() < 1e-14 && (a[1] - 0.5 * x[0]).abs() < 1e-14);
        }
        let zero = poincare_primitive(&constant_form(9, |_, _| 0.0), 1e-6).unwrap();
        assert!(zero.alpha.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn primitive_of_linear_density() {
        let p = poincare_primitive(&constant_form(128, |x, _| x), 1e-6).unwrap();
        assert!(p.residual < 1e-6, "{}", p.residual);
    }

    #[test]
    fn primitive_residual_is_second_order() {
        let dens = |x: f64, y: f64| (2.0 * x).sin() * y.cos() + 1.0;
        let coarse = poincare_primitive(&constant_form(33, dens), 1e-6).unwrap().residual;
        let fine = poincare_primitive(&constant_form(65, dens), 1e-6).unwrap().residual;
        assert!(coarse / fine > 3.0, "{coarse} {fine}");
    }

    #[test]
    fn symplectic_map_is_unchanged() {
        let f = planar(33, |a, b| (a + 0.2 * b * b, b));
        let r = moser_correct(&f, &MoserOptions::default()).unwrap();
        assert!(r.eta_before < 1e-13);
        assert!(r.max_displacement < 1e-13);
        assert!(r.map.values().iter().zip(f.values()).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn stretch_is_corrected_to_area_preserving() {
        let delta = 0.01;
        let f = planar(65, |a, b| ((1.0 + delta) * a, b));
        let r = moser_correct(&f, &MoserOptions::default()).unwrap();
        assert!((r.eta_before - delta).abs() < 1e-12);
        assert!(r.eta_after < 1e-5, "{}", r.eta_after);
        let report = area_preserving_check(&r.map).unwrap();
        assert!(report.max_det_defect < 1e-5);
        let again = moser_correct(&r.map, &MoserOptions::default()).unwrap();
        let change = again.map.values().iter().zip(r.map.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(change < 1e-8, "{change}");
    }

    #[test]
    fn degenerate_error_is_refused() {
        let f = planar(9, |a, b| (-0.5 * a, b));
        assert!(matches!(moser_correct(&f, &MoserOptions::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn area_reports() {
        let id = area_preserving_check(&planar(9, |a, b| (a, b))).unwrap();
        assert_eq!(id.max_det_defect, 0.0);
        assert!(id.max_ratio_defect < 1e-14);
        let shear = area_preserving_check(&planar(20, |a, b| (a + b * b, b))).unwrap();
        assert!(shear.max_det_defect < 1e-8);
        let stretch = area_preserving_check(&planar(9, |a, b| (2.0 * a, b))).unwrap();
        assert!((stretch.max_det_defect - 1.0).abs() < 1e-14);
        assert!(stretch.probe_ratios.iter().all(|r| (r - 2.0).abs() < 1e-12));
    }
}
