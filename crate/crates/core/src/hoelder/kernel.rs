use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::carnot::CarnotGroup;
use crate::curves::{Chart, MapSource, SampledMap};
use crate::error::{Error, Result};

/// Default number of midpoint nodes per axis.
pub const KERNEL_NODES: usize = 17;

/// Smooth bump `exp(-1/(1-s))` in the homogeneous polynomial gauge
/// `s = (D N(u))^{2K}`, `N(u)^{2K} = sum u_j^{2K/w_j}`, with `D` the
/// dimension and `K` the least common multiple of the weights. Its support
/// lies in the unit `d_K` ball. Scaled copies are
/// `eta_eps(x) = eps^{-Q} profile(delta_{1/eps} x)`.
#[derive(Clone, Debug)]
pub struct MollifierKernel {
    group: CarnotGroup,
    epsilon: f64,
    unit: Arc<UnitRule>,
}

#[derive(Debug)]
struct UnitRule {
    nodes_per_axis: usize,
    /// Node coordinates at unit scale, one row per node.
    nodes: Vec<f64>,
    /// Normalized profile weights, summing to one.
    weights: Vec<f64>,
    /// `(X_i profile)(u_k)` quadrature weights at unit scale, `[i * count + k]`.
    derivative_weights: Vec<f64>,
    /// Unnormalized midpoint mass of the bump.
    raw_mass: f64,
    gauge_power: u32,
}

/// Description of a kernel written into experiment summaries.
#[derive(Clone, Debug, Serialize)]
pub struct KernelInfo {
    pub profile: &'static str,
    pub group: String,
    pub epsilon: f64,
    pub nodes_per_axis: usize,
    pub support_nodes: usize,
    pub gauge_power: u32,
    pub note: &'static str,
}

fn lcm(a: usize, b: usize) -> usize {
    let gcd = |mut x: usize, mut y: usize| {
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x
    };
    a / gcd(a, b) * b
}

impl UnitRule {
    fn build(group: &CarnotGroup, per_axis: usize) -> Result<Self> {
        let n = group.dim();
        let weights_of = group.weights();
        let k = weights_of.iter().fold(1, |acc, &w| lcm(acc, w)) as u32;
        let scale = n as f64;
        let exps: Vec<i32> = weights_of.iter().map(|&w| (2 * k as usize / w) as i32).collect();
        let half: Vec<f64> = weights_of.iter().map(|&w| scale.powi(-(w as i32))).collect();
        let count = per_axis
            .checked_pow(n as u32)
            .filter(|&c| c <= 2_000_000)
            .ok_or_else(|| Error::InvalidArgument(format!("{per_axis}^{n} quadrature nodes is too many")))?;
        let cell: f64 = half.iter().map(|h| 2.0 * h / per_axis as f64).product();
        let d2k = scale.powi(2 * k as i32);

        let mut nodes = Vec::new();
        let mut profile = Vec::new();
        let mut grads = Vec::new();
        let mut idx = vec![0usize; n];
        let mut u = vec![0.0; n];
        for _ in 0..count {
            for j in 0..n {
                u[j] = half[j] * (-1.0 + (2 * idx[j] + 1) as f64 / per_axis as f64);
            }
            let s = d2k * u.iter().zip(&exps).map(|(v, &e)| v.powi(e)).sum::<f64>();
            if s < 1.0 {
                let psi = (-1.0 / (1.0 - s)).exp();
                let chain = -psi / ((1.0 - s) * (1.0 - s)) * d2k;
                let coord_grad: Vec<f64> =
                    u.iter().zip(&exps).map(|(v, &e)| chain * e as f64 * v.powi(e - 1)).collect();
                let frame = group.frame(&u);
                for i in 0..n {
                    grads.push((0..n).map(|m| frame[(m, i)] * coord_grad[m]).sum::<f64>());
                }
                nodes.extend_from_slice(&u);
                profile.push(psi);
            }
            for j in (0..n).rev() {
                idx[j] += 1;
                if idx[j] < per_axis {
                    break;
                }
                idx[j] = 0;
            }
        }
        let total: f64 = profile.iter().sum();
        if profile.is_empty() || total <= 0.0 {
            return Err(Error::InvalidArgument("quadrature rule misses the kernel support".into()));
        }
        let live = profile.len();
        let mut derivative_weights = vec![0.0; n * live];
        for i in 0..n {
            // X_i of the coordinate function u_i is exactly one at the identity
            let moment: f64 = (0..live).map(|kk| -grads[kk * n + i] * nodes[kk * n + i]).sum();
            for kk in 0..live {
                derivative_weights[i * live + kk] = grads[kk * n + i] / moment;
            }
        }
        Ok(Self {
            nodes_per_axis: per_axis,
            nodes,
            weights: profile.iter().map(|p| p / total).collect(),
            derivative_weights,
            raw_mass: total * cell,
            gauge_power: 2 * k,
        })
    }

    fn count(&self) -> usize {
        self.weights.len()
    }
}

impl MollifierKernel {
    pub fn new(group: &CarnotGroup, epsilon: f64) -> Result<Self> {
        Self::with_nodes(group, epsilon, KERNEL_NODES)
    }

    pub fn with_nodes(group: &CarnotGroup, epsilon: f64, nodes_per_axis: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("mollifier scale must be positive, got {epsilon}")));
        }
        if nodes_per_axis < 2 {
            return Err(Error::InvalidArgument("need at least two quadrature nodes per axis".into()));
        }
        let unit = UnitRule::build(group, nodes_per_axis)?;
        Ok(Self { group: group.clone(), epsilon, unit: Arc::new(unit) })
    }

    /// Same quadrature rule at another scale.
    pub fn rescaled(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("mollifier scale must be positive, got {epsilon}")));
        }
        Ok(Self { group: self.group.clone(), epsilon, unit: Arc::clone(&self.unit) })
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn node_count(&self) -> usize {
        self.unit.count()
    }

    /// Sum of the normalized quadrature weights.
    pub fn mass(&self) -> f64 {
        self.unit.weights.iter().sum()
    }

    /// Integral of the unnormalized bump by the midpoint rule; comparing two
    /// rules bounds the quadrature error of the normalization.
    pub fn raw_mass(&self) -> f64 {
        self.unit.raw_mass
    }

    /// Quadrature nodes `z_k` at the current scale with their weights.
    pub fn nodes(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        let n = self.group.dim();
        self.unit
            .nodes
            .chunks(n)
            .zip(&self.unit.weights)
            .map(move |(u, &w)| (self.group.dilate(self.epsilon, u), w))
    }

    /// Largest `d_K` gauge over the quadrature nodes at the current scale.
    pub fn support_radius(&self) -> f64 {
        self.nodes().map(|(z, _)| self.group.gauge(&z)).fold(0.0, f64::max)
    }

    pub fn info(&self) -> KernelInfo {
        KernelInfo {
            profile: "exp(-1/(1-s)) bump in a homogeneous polynomial gauge",
            group: self.group.algebra().name().to_string(),
            epsilon: self.epsilon,
            nodes_per_axis: self.unit.nodes_per_axis,
            support_nodes: self.node_count(),
            gauge_power: self.unit.gauge_power,
            note: "compactly supported bump with heat-kernel dilation scaling in place of the heat kernel",
        }
    }

    fn translates(&self, p: &[f64]) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
        let n = self.group.dim();
        let p = p.to_vec();
        self.unit.nodes.chunks(n).enumerate().map(move |(k, u)| {
            let z: Vec<f64> = self.group.dilate(self.epsilon, u).into_iter().map(|v| -v).collect();
            (k, self.group.mul(&p, &z))
        })
    }

    /// `f_eps(p) = sum_k w_k f(p z_k^{-1})`.
    pub fn convolve_at(&self, f: &dyn MapSource, p: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        let mut buf = vec![0.0; f.target_dim()];
        for (k, q) in self.translates(p) {
            f.eval_into(&q, &mut buf).map_err(margin_error)?;
            let w = self.unit.weights[k];
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += w * v;
            }
        }
        Ok(())
    }

    /// Value and the left-invariant derivative `X_i f_eps(p)`, computed as
    /// `f * (X_i eta_eps)` so that no derivative of `f` is taken.
    pub fn convolve_with_derivative(
        &self,
        f: &dyn MapSource,
        p: &[f64],
        field: usize,
        value: &mut [f64],
        derivative: &mut [f64],
    ) -> Result<()> {
        let n = self.group.dim();
        if field >= n {
            return Err(Error::InvalidArgument(format!("frame index {field} out of range for dimension {n}")));
        }
        let count = self.unit.count();
        let dw = &self.unit.derivative_weights[field * count..(field + 1) * count];
        let scale = self.epsilon.powi(-(self.group.weights()[field] as i32));
        let mut at_p = vec![0.0; f.target_dim()];
        f.eval_into(p, &mut at_p).map_err(margin_error)?;
        value.fill(0.0);
        derivative.fill(0.0);
        let mut buf = vec![0.0; f.target_dim()];
        for (k, q) in self.translates(p) {
            f.eval_into(&q, &mut buf).map_err(margin_error)?;
            let w = self.unit.weights[k];
            for c in 0..buf.len() {
                value[c] += w * buf[c];
                derivative[c] += dw[k] * (buf[c] - at_p[c]);
            }
        }
        for d in derivative.iter_mut() {
            *d *= scale;
        }
        Ok(())
    }

    /// Largest coordinate displacement `|(p z^{-1})_j - p_j|` over the chart
    /// corners and the kernel nodes.
    pub fn margin(&self, chart: &Chart) -> Vec<f64> {
        let n = chart.dim();
        let mut margin = vec![0.0f64; n];
        for mask in 0..(1usize << n) {
            let corner: Vec<f64> =
                (0..n).map(|j| if mask >> j & 1 == 1 { chart.hi()[j] } else { chart.lo()[j] }).collect();
            for (_, q) in self.translates(&corner) {
                for j in 0..n {
                    margin[j] = margin[j].max((q[j] - corner[j]).abs());
                }
            }
        }
        margin
    }
}

fn margin_error(e: Error) -> Error {
    match e {
        Error::ChartExit(msg) => Error::ChartExit(format!("convolution stencil leaves the map domain: {msg}")),
        other => other,
    }
}

/// Lazily mollified map; every evaluation runs the quadrature.
pub struct MollifiedMap<'a> {
    source: &'a dyn MapSource,
    kernel: MollifierKernel,
}

impl<'a> MollifiedMap<'a> {
    pub fn new(source: &'a dyn MapSource, kernel: MollifierKernel) -> Result<Self> {
        if source.source_dim() != kernel.group().dim() {
            return Err(Error::Structure(format!(
                "map has {} source coordinates, kernel group has {}",
                source.source_dim(),
                kernel.group().dim()
            )));
        }
        Ok(Self { source, kernel })
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }

    /// `(f_eps^* omega_j)(X_i)` at `p`, with the target coframe evaluated at
    /// `f_eps(p)`.
    pub fn pullback_coefficient(&self, target: &CarnotGroup, omega: usize, field: usize, p: &[f64]) -> Result<f64> {
        let m = self.source.target_dim();
        if target.dim() != m || omega >= m {
            return Err(Error::InvalidArgument(format!("coframe index {omega} out of range for the target")));
        }
        let mut value = vec![0.0; m];
        let mut derivative = vec![0.0; m];
        self.kernel.convolve_with_derivative(self.source, p, field, &mut value, &mut derivative)?;
        let coframe = target.coframe(&value)?;
        Ok((0..m).map(|c| coframe[(omega, c)] * derivative[c]).sum())
    }
}

impl MapSource for MollifiedMap<'_> {
    fn source_dim(&self) -> usize {
        self.source.source_dim()
    }

    fn target_dim(&self) -> usize {
        self.source.target_dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.kernel.convolve_at(self.source, x, out)
    }
}

/// Mollifies `f` on its own chart shrunk by the kernel margin, keeping the
/// resolution.
pub fn group_convolve(f: &SampledMap, kernel: &MollifierKernel) -> Result<SampledMap> {
    let chart = f.chart();
    let margin = kernel.margin(chart);
    let mut lo = Vec::with_capacity(chart.dim());
    let mut hi = Vec::with_capacity(chart.dim());
    for j in 0..chart.dim() {
        let pad = margin[j] * (1.0 + 1e-9);
        if 2.0 * pad >= chart.extent(j) {
            return Err(Error::InvalidArgument(format!(
                "mollifier scale {} leaves no interior along axis {j}",
                kernel.epsilon()
            )));
        }
        lo.push(chart.lo()[j] + pad);
        hi.push(chart.hi()[j] - pad);
    }
    let inner = Chart::new(lo, hi, chart.resolution().to_vec())?;
    group_convolve_onto(f, kernel, &inner)
}

/// Mollifies any map at the nodes of `chart`.
pub fn group_convolve_onto(f: &dyn MapSource, kernel: &MollifierKernel, chart: &Chart) -> Result<SampledMap> {
    if chart.dim() != kernel.group().dim() || f.source_dim() != chart.dim() {
        return Err(Error::Structure("map, kernel group and chart disagree on dimension".into()));
    }
    let m = f.target_dim();
    let rows: Vec<Vec<f64>> = (0..chart.node_count())
        .into_par_iter()
        .map(|flat| {
            let mut out = vec![0.0; m];
            kernel.convolve_at(f, &chart.node(flat), &mut out)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    SampledMap::new(chart.clone(), m, rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::FnMap;

    #[test]
    fn normalized_mass_and_support() {
        for name in ["abelian:2", "heisenberg:1", "filiform:3"] {
            let g = CarnotGroup::builtin(name).unwrap();
            let k = MollifierKernel::with_nodes(&g, 0.1, if g.dim() > 3 { 9 } else { 17 }).unwrap();
            assert!((k.mass() - 1.0).abs() < 1e-14);
            for eps in [0.3, 0.05, 1e-3] {
                let k = k.rescaled(eps).unwrap();
                assert!(k.support_radius() < eps, "{name} {eps}");
            }
        }
        let g = CarnotGroup::builtin("heisenberg:1").unwrap();
        let coarse = MollifierKernel::new(&g, 1.0).unwrap().raw_mass();
        let fine = MollifierKernel::with_nodes(&g, 1.0, 33).unwrap().raw_mass();
        assert!((coarse - fine).abs() / fine < 1e-2, "{coarse} {fine}");
    }

    #[test]
    fn constants_and_linear_maps_are_fixed() {
        let g = CarnotGroup::builtin("abelian:2").unwrap();
        let k = MollifierKernel::new(&g, 0.1).unwrap();
        let lin = FnMap::new(2, 2, |x: &[f64], o: &mut [f64]| {
            o[0] = 3.0 * x[0] - x[1] + 0.5;
            o[1] = 2.0;
        });
        let mut out = [0.0; 2];
        k.convolve_at(&lin, &[0.3, -0.7], &mut out).unwrap();
        assert!((out[0] - (0.9 + 0.7 + 0.5)).abs() < 1e-14);
        assert!((out[1] - 2.0).abs() < 1e-14);

        let h = CarnotGroup::builtin("heisenberg:1").unwrap();
        let kh = MollifierKernel::new(&h, 0.2).unwrap();
        let c = FnMap::new(3, 1, |_: &[f64], o: &mut [f64]| o[0] = -4.0);
        let mut v = [0.0];
        let mut d = [0.0];
        kh.convolve_with_derivative(&c, &[0.1, 0.2, 0.3], 1, &mut v, &mut d).unwrap();
        assert!((v[0] + 4.0).abs() < 1e-13 && d[0] == 0.0);
    }

    #[test]
    fn absolute_value_is_lifted_at_the_kink() {
        let g = CarnotGroup::builtin("abelian:1").unwrap();
        let k = MollifierKernel::new(&g, 0.1).unwrap();
        let abs = FnMap::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = x[0].abs());
        let mut out = [0.0];
        k.convolve_at(&abs, &[0.0], &mut out).unwrap();
        assert!(out[0] > 0.0 && out[0] < 0.1);
    }

    #[test]
    fn kernel_derivative_matches_differences() {
        let h = CarnotGroup::builtin("heisenberg:1").unwrap();
        let k = MollifierKernel::new(&h, 0.15).unwrap();
        let f = FnMap::new(3, 2, |x: &[f64], o: &mut [f64]| {
            o[0] = (x[0] + 2.0 * x[1]).sin() + x[2] * x[2];
            o[1] = x[0] * x[2] - x[1].cos();
        });
        let p = [0.2, -0.1, 0.3];
        for field in 0..3 {
            let mut v = [0.0; 2];
            let mut d = [0.0; 2];
            k.convolve_with_derivative(&f, &p, field, &mut v, &mut d).unwrap();
            let step = 1e-4;
            let mut e = [0.0; 3];
            e[field] = step;
            let plus = h.mul(&p, &e);
            e[field] = -step;
            let minus = h.mul(&p, &e);
            let mut a = [0.0; 2];
            let mut b = [0.0; 2];
            k.convolve_at(&f, &plus, &mut a).unwrap();
            k.convolve_at(&f, &minus, &mut b).unwrap();
            for c in 0..2 {
                let fd = (a[c] - b[c]) / (2.0 * step);
                assert!((fd - d[c]).abs() < 1e-4, "field {field} comp {c}: {fd} vs {}", d[c]);
            }
        }
    }

    #[test]
    fn sampled_convolution_shrinks_and_refuses() {
        let g = CarnotGroup::builtin("abelian:2").unwrap();
        let chart = Chart::cube(2, -1.0, 1.0, 21).unwrap();
        let f = SampledMap::from_fn(chart, 1, |x, o| o[0] = x[0] + 2.0 * x[1]).unwrap();
        let k = MollifierKernel::new(&g, 0.2).unwrap();
        let out = group_convolve(&f, &k).unwrap();
        assert!(out.chart().lo()[0] > -1.0 && out.chart().hi()[0] < 1.0);
        let mut v = [0.0];
        out.eval_at(&[0.3, 0.1], &mut v).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
        assert!(group_convolve(&f, &k.rescaled(5.0).unwrap()).is_err());
        let err = group_convolve_onto(&f, &k, &Chart::cube(2, -1.0, 1.0, 5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ChartExit(_)));
    }
}
