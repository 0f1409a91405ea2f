use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{KernelInfo, MollifiedMap, MollifierKernel, KERNEL_NODES};
use super::series::{weierstrass, weierstrass_primitive};
use crate::carnot::CarnotGroup;
use crate::curves::MapSource;
use crate::error::{Error, Result};

/// Sup values at or below this are treated as exact zeros.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Profiles `g` for the shear `(x, y) -> (a x + g(y), y / a^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ShearProfile {
    /// Partial Weierstrass sum through `n = N`.
    Weierstrass(usize),
    /// `g(y) = y^2`.
    Square,
    /// `g(y) = |y|`.
    Kink,
}

impl ShearProfile {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            ShearProfile::Weierstrass(n) => weierstrass(y, n),
            ShearProfile::Square => y * y,
            ShearProfile::Kink => y.abs(),
        }
    }

    /// Antiderivative vanishing at zero.
    pub fn primitive(&self, y: f64) -> f64 {
        match *self {
            ShearProfile::Weierstrass(n) => weierstrass_primitive(y, n),
            ShearProfile::Square => y * y * y / 3.0,
            ShearProfile::Kink => 0.5 * y * y.abs(),
        }
    }

    /// Hölder exponent of the profile on bounded sets.
    pub fn exponent(&self) -> f64 {
        match self {
            ShearProfile::Weierstrass(_) => 2.0 / 3.0,
            _ => 1.0,
        }
    }
}

/// Contact lift to the first Heisenberg group of the planar shear,
/// `(x, y, t) -> (a x + g(y), y / a^2, t / a + (G(y) - y g(y) / 2) / a^2)`,
/// which pulls the contact form back to `1/a` times itself.
#[derive(Clone, Copy, Debug)]
pub struct ShearLift {
    pub scale: f64,
    pub profile: ShearProfile,
}

impl ShearLift {
    pub fn new(scale: f64, profile: ShearProfile) -> Result<Self> {
        if !(scale != 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument("shear scale must be finite and nonzero".into()));
        }
        Ok(Self { scale, profile })
    }
}

impl MapSource for ShearLift {
    fn source_dim(&self) -> usize {
        3
    }

    fn target_dim(&self) -> usize {
        3
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (a, y) = (self.scale, x[1]);
        let g = self.profile.value(y);
        out[0] = a * x[0] + g;
        out[1] = y / (a * a);
        out[2] = x[2] / a + (self.profile.primitive(y) - 0.5 * y * g) / (a * a);
        Ok(())
    }
}

/// `(f^* omega_j)(X_i)` at `p` by central differences of step `h` along
/// `p exp(+-h e_i)`.
pub fn pullback_derivative(
    f: &dyn MapSource,
    source: &CarnotGroup,
    target: &CarnotGroup,
    omega: usize,
    field: usize,
    p: &[f64],
    h: f64,
) -> Result<f64> {
    if f.source_dim() != source.dim() || f.target_dim() != target.dim() {
        return Err(Error::Structure("map dimensions do not match the groups".into()));
    }
    if omega >= target.dim() || field >= source.dim() {
        return Err(Error::InvalidArgument(format!("indices ({omega}, {field}) out of range")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("difference step must be positive".into()));
    }
    let mut e = vec![0.0; source.dim()];
    e[field] = h;
    let plus = f.eval(&source.mul(p, &e))?;
    e[field] = -h;
    let minus = f.eval(&source.mul(p, &e))?;
    let at = f.eval(p)?;
    let coframe = target.coframe(&at)?;
    Ok((0..target.dim()).map(|c| coframe[(omega, c)] * (plus[c] - minus[c]) / (2.0 * h)).sum())
}

/// Rate `2 beta - 1`, defined only for `beta` in `(1/2, 1]`.
pub fn certified_rate(beta: f64) -> Result<f64> {
    if !(beta > 0.5 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "no decay rate is certified for beta = {beta}; it must lie in (1/2, 1]"
        )));
    }
    Ok(2.0 * beta - 1.0)
}

#[derive(Clone, Debug)]
pub struct DecayOptions {
    pub probes: Vec<Vec<f64>>,
    pub nodes_per_axis: usize,
    /// Claimed exponent; when given, the expected rate is reported.
    pub beta: Option<f64>,
}

impl DecayOptions {
    pub fn new(probes: Vec<Vec<f64>>) -> Self {
        Self { probes, nodes_per_axis: KERNEL_NODES, beta: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayPoint {
    pub epsilon: f64,
    pub sup_value: f64,
    /// Probe attaining the sup.
    pub argmax: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub omega_index: usize,
    pub x_index: usize,
    pub points: Vec<DecayPoint>,
    /// Half-open range of `points` used in the fit.
    pub window: (usize, usize),
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Root-mean-square residual of the log-log fit.
    pub residual: Option<f64>,
    pub at_noise_floor: bool,
    pub beta: Option<f64>,
    pub expected_slope: Option<f64>,
    pub kernel: KernelInfo,
}

impl DecayFit {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epsilon,sup_value,omega_index,X_index")?;
        for p in &self.points {
            writeln!(out, "{:e},{:e},{},{}", p.epsilon, p.sup_value, self.omega_index, self.x_index)?;
        }
        Ok(())
    }
}

fn check_grid(eps: &[f64]) -> Result<()> {
    if eps.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 scales, got {}", eps.len())));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("scales must be positive".into()));
    }
    let ratio = eps[1] / eps[0];
    if eps.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) || ratio == 1.0 {
        return Err(Error::InvalidArgument("scales must form a geometric sequence".into()));
    }
    let span = (eps[0] / eps[eps.len() - 1]).abs().log2().abs();
    if span < 4.0 - 1e-9 {
        return Err(Error::InvalidArgument(format!("scales span {span:.2} octaves, need at least 4")));
    }
    Ok(())
}

/// Least-squares line through `(x, y)`: slope, intercept, rms residual.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Sup over the probes of `|(f_eps^* omega_j)(X_i)|` for each scale and the
/// log-log slope against `eps`. With 8 or more scales the two largest and
/// two smallest are left out of the fit.
pub fn decay_slope(
    f: &dyn MapSource,
    source: &CarnotGroup,
    target: &CarnotGroup,
    omega: usize,
    field: usize,
    eps_grid: &[f64],
    opts: &DecayOptions,
) -> Result<DecayFit> {
    check_grid(eps_grid)?;
    if opts.probes.is_empty() {
        return Err(Error::InvalidArgument("no probe points".into()));
    }
    if omega >= target.dim() || field >= source.dim() {
        return Err(Error::InvalidArgument(format!("indices ({omega}, {field}) out of range")));
    }
    let expected_slope = opts.beta.map(certified_rate).transpose()?;
    let base = MollifierKernel::with_nodes(source, eps_grid[0], opts.nodes_per_axis)?;
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let mollified = MollifiedMap::new(f, base.rescaled(eps)?)?;
        let values: Vec<f64> = opts
            .probes
            .par_iter()
            .map(|p| mollified.pullback_coefficient(target, omega, field, p).map(f64::abs))
            .collect::<Result<_>>()?;
        let (argmax, sup_value) =
            values.iter().copied().enumerate().fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        points.push(DecayPoint { epsilon: eps, sup_value, argmax });
    }
    let window = if points.len() >= 8 { (2, points.len() - 2) } else { (0, points.len()) };
    let used = &points[window.0..window.1];
    let at_noise_floor = used.iter().any(|p| p.sup_value <= NOISE_FLOOR);
    let (slope, intercept, residual) = if at_noise_floor {
        (None, None, None)
    } else {
        let lx: Vec<f64> = used.iter().map(|p| p.epsilon.ln()).collect();
        let ly: Vec<f64> = used.iter().map(|p| p.sup_value.ln()).collect();
        let (s, i, r) = fit_line(&lx, &ly);
        (Some(s), Some(i), Some(r))
    };
    Ok(DecayFit {
        omega_index: omega,
        x_index: field,
        points,
        window,
        slope,
        intercept,
        residual,
        at_noise_floor,
        beta: opts.beta,
        expected_slope,
        kernel: base.info(),
    })
}

/// `eps = 2^{-k}` for `k` in `lo..=hi`.
pub fn dyadic_scales(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

/// Probe points `(x, y_k, t)` with `y_k` uniform on `[-half, half]`.
pub fn shear_probes(count: usize, half: f64) -> Vec<Vec<f64>> {
    let n = count.max(2);
    (0..n)
        .map(|k| {
            let y = -half + 2.0 * half * k as f64 / (n - 1) as f64;
            vec![0.25, y, -0.1]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::FnMap;

    fn h1() -> CarnotGroup {
        CarnotGroup::builtin("heisenberg:1").unwrap()
    }

    #[test]
    fn shear_lifts_are_contact() {
        let g = h1();
        for profile in [ShearProfile::Square, ShearProfile::Kink, ShearProfile::Weierstrass(3)] {
            for a in [1.0, 2.0] {
                let f = ShearLift::new(a, profile).unwrap();
                let p = [0.3, 0.17, -0.2];
                for field in 0..2 {
                    let v = pullback_derivative(&f, &g, &g, 2, field, &p, 1e-6).unwrap();
                    assert!(v.abs() < 1e-6, "{profile:?} {a} X{field}: {v}");
                }
                let vertical = pullback_derivative(&f, &g, &g, 2, 2, &p, 1e-6).unwrap();
                assert!((vertical - 1.0 / a).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_pullback_is_the_dual_basis() {
        let g = CarnotGroup::builtin("filiform:3").unwrap();
        let id = FnMap::new(4, 4, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x));
        let p = [0.3, -0.4, 0.2, 0.1];
        for omega in 0..4 {
            for field in 0..4 {
                let v = pullback_derivative(&id, &g, &g, omega, field, &p, 1e-4).unwrap();
                let want = if omega == field { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-8, "{omega} {field} {v}");
            }
        }
    }

    #[test]
    fn grid_preconditions() {
        let g = h1();
        let id = FnMap::new(3, 3, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x));
        let opts = DecayOptions::new(vec![vec![0.0; 3]]);
        assert!(decay_slope(&id, &g, &g, 2, 0, &dyadic_scales(2, 4), &opts).is_err());
        assert!(decay_slope(&id, &g, &g, 2, 0, &[0.1, 0.05, 0.02, 0.01, 0.005], &opts).is_err());
        assert!(decay_slope(&id, &g, &g, 2, 0, &dyadic_scales(2, 4).repeat(2), &opts).is_err());
        let low = DecayOptions { beta: Some(0.5), ..opts.clone() };
        assert!(decay_slope(&id, &g, &g, 2, 0, &dyadic_scales(2, 6), &low).is_err());
    }

    #[test]
    fn contact_identity_sits_at_noise_floor() {
        let g = h1();
        let id = FnMap::new(3, 3, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x));
        let fit = decay_slope(&id, &g, &g, 2, 0, &dyadic_scales(2, 6), &DecayOptions::new(shear_probes(5, 0.3))).unwrap();
        assert!(fit.at_noise_floor && fit.slope.is_none(), "{fit:?}");
    }

    #[test]
    fn lipschitz_kink_decays_linearly() {
        let g = h1();
        let f = ShearLift::new(1.0, ShearProfile::Kink).unwrap();
        let opts = DecayOptions { beta: Some(1.0), ..DecayOptions::new(shear_probes(9, 0.2)) };
        let fit = decay_slope(&f, &g, &g, 2, 1, &dyadic_scales(3, 8), &opts).unwrap();
        let s = fit.slope.unwrap();
        assert!((0.7..=1.3).contains(&s), "{fit:?}");
        assert_eq!(fit.expected_slope, Some(1.0));
    }

    #[test]
    fn smooth_shear_decays_quadratically() {
        let g = h1();
        let f = ShearLift::new(1.0, ShearProfile::Square).unwrap();
        let fit =
            decay_slope(&f, &g, &g, 2, 1, &dyadic_scales(3, 8), &DecayOptions::new(shear_probes(5, 0.2))).unwrap();
        let s = fit.slope.unwrap();
        assert!((s - 2.0).abs() < 0.05, "{fit:?}");
        assert!(fit.residual.unwrap() < 0.05);
    }
}
