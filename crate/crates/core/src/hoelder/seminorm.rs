use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::carnot::CarnotGroup;
use crate::curves::{Chart, MapSource, SampledMap};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SeminormOptions {
    pub seed: u64,
    /// Largest sampled separation; defaults to half the shortest chart side.
    pub max_separation: Option<f64>,
    /// Decades below `max_separation` covered by the log-uniform draw.
    pub decades: f64,
}

impl Default for SeminormOptions {
    fn default() -> Self {
        Self { seed: 0, max_separation: None, decades: 3.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeminormEstimate {
    /// Lower bound on `[f]_beta`.
    pub seminorm: f64,
    pub beta: f64,
    pub pairs: usize,
    pub min_separation: f64,
    pub max_separation: f64,
    /// Pair attaining the estimate.
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
}

/// Maximum of `d_K(f(x), f(y)) / d_K(x, y)^beta` over seeded random pairs in
/// `domain`. Separations are log-uniform, so the estimate is nondecreasing in
/// the pair budget for a fixed seed.
pub fn hoelder_seminorm(
    f: &dyn MapSource,
    source: &CarnotGroup,
    target: &CarnotGroup,
    domain: &Chart,
    beta: f64,
    pair_budget: usize,
    opts: &SeminormOptions,
) -> Result<SeminormEstimate> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("exponent {beta} outside (0, 1]")));
    }
    if f.source_dim() != source.dim() || f.target_dim() != target.dim() || domain.dim() != source.dim() {
        return Err(Error::Structure("map, groups and domain disagree on dimension".into()));
    }
    if opts.decades < 2.0 {
        return Err(Error::InvalidArgument("separations must span at least two decades".into()));
    }
    let n = source.dim();
    let shortest = (0..n).map(|j| domain.extent(j)).fold(f64::INFINITY, f64::min);
    let r_max = opts.max_separation.unwrap_or(0.5 * shortest);
    if !(r_max > 0.0) {
        return Err(Error::InvalidArgument("maximum separation must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut est = SeminormEstimate {
        seminorm: 0.0,
        beta,
        pairs: 0,
        min_separation: f64::INFINITY,
        max_separation: 0.0,
        worst_pair: None,
    };
    let mut attempts = 0usize;
    let limit = 100 * pair_budget.max(1);
    while est.pairs < pair_budget {
        attempts += 1;
        if attempts > limit {
            return Err(Error::InvalidArgument(format!(
                "only {} of {pair_budget} pairs fit in the domain",
                est.pairs
            )));
        }
        let x: Vec<f64> = (0..n).map(|j| rng.random_range(domain.lo()[j]..=domain.hi()[j])).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let r = r_max * 10f64.powf(-opts.decades * rng.random::<f64>());
        let size = source.gauge(&raw);
        if size == 0.0 {
            continue;
        }
        let step = source.dilate(r / size, &raw);
        let y = source.mul(&x, &step);
        if !domain.contains(&y) {
            continue;
        }
        let d = source.quasi_metric(&y, &x);
        if d == 0.0 {
            continue;
        }
        let dist = target.quasi_metric(&f.eval(&y)?, &f.eval(&x)?);
        let ratio = dist / d.powf(beta);
        est.pairs += 1;
        est.min_separation = est.min_separation.min(d);
        est.max_separation = est.max_separation.max(d);
        if ratio > est.seminorm {
            est.seminorm = ratio;
            est.worst_pair = Some((x, y));
        }
    }
    Ok(est)
}

/// A sampled map with a claimed exponent and its estimated seminorm.
#[derive(Clone, Debug)]
pub struct HoelderSample {
    pub map: SampledMap,
    pub beta: f64,
    pub seminorm: f64,
}

impl HoelderSample {
    pub fn estimate(
        map: SampledMap,
        source: &CarnotGroup,
        target: &CarnotGroup,
        beta: f64,
        pair_budget: usize,
        opts: &SeminormOptions,
    ) -> Result<Self> {
        let chart = map.chart().clone();
        let est = hoelder_seminorm(&map, source, target, &chart, beta, pair_budget, opts)?;
        Ok(Self { map, beta, seminorm: est.seminorm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::FnMap;
    use crate::hoelder::series::weierstrass;

    fn line() -> CarnotGroup {
        CarnotGroup::builtin("abelian:1").unwrap()
    }

    #[test]
    fn constant_and_identity() {
        let r = line();
        let dom = Chart::cube(1, 0.0, 1.0, 2).unwrap();
        let c = FnMap::new(1, 1, |_: &[f64], o: &mut [f64]| o[0] = 3.0);
        let est = hoelder_seminorm(&c, &r, &r, &dom, 0.5, 200, &SeminormOptions::default()).unwrap();
        assert_eq!(est.seminorm, 0.0);
        let id = FnMap::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = x[0]);
        let est = hoelder_seminorm(&id, &r, &r, &dom, 1.0, 200, &SeminormOptions::default()).unwrap();
        assert!(est.seminorm <= 1.0 + 1e-12 && est.seminorm > 1.0 - 1e-9);
        assert!(est.max_separation / est.min_separation > 100.0);
        assert!(hoelder_seminorm(&id, &r, &r, &dom, 1.5, 10, &SeminormOptions::default()).is_err());
        assert!(hoelder_seminorm(&id, &r, &r, &dom, 0.0, 10, &SeminormOptions::default()).is_err());
    }

    #[test]
    fn weierstrass_estimate_is_stable() {
        let r = line();
        let dom = Chart::cube(1, 0.0, 1.0, 2).unwrap();
        let g = FnMap::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = weierstrass(x[0], 6));
        let opts = SeminormOptions { decades: 4.0, ..Default::default() };
        let small = hoelder_seminorm(&g, &r, &r, &dom, 2.0 / 3.0, 1000, &opts).unwrap();
        let large = hoelder_seminorm(&g, &r, &r, &dom, 2.0 / 3.0, 10_000, &opts).unwrap();
        assert!(small.seminorm.is_finite() && small.seminorm > 0.0);
        assert!(large.seminorm >= small.seminorm);
        assert!(large.seminorm < 2.0 * small.seminorm, "{} {}", small.seminorm, large.seminorm);
    }

    #[test]
    fn heisenberg_dilation_is_lipschitz() {
        let h = CarnotGroup::builtin("heisenberg:1").unwrap();
        let hc = h.clone();
        let dil = FnMap::new(3, 3, move |x: &[f64], o: &mut [f64]| o.copy_from_slice(&hc.dilate(2.0, x)));
        let dom = Chart::cube(3, -0.5, 0.5, 2).unwrap();
        let est = hoelder_seminorm(&dil, &h, &h, &dom, 1.0, 500, &SeminormOptions::default()).unwrap();
        assert!(est.seminorm <= 2.0 + 1e-9 && est.seminorm > 1.5, "{est:?}");
    }
}
