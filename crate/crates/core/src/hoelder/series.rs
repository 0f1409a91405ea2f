use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// `g_N(y) = sum_{n=0}^{N} 9^{-n} cos(27^n pi y)`.
pub fn weierstrass(y: f64, n: usize) -> f64 {
    let mut amp = 1.0;
    let mut freq = PI;
    let mut s = 0.0;
    for _ in 0..=n {
        s += amp * (freq * y).cos();
        amp /= 9.0;
        freq *= 27.0;
    }
    s
}

/// `int_0^y g_N`.
pub fn weierstrass_primitive(y: f64, n: usize) -> f64 {
    let mut amp = 1.0;
    let mut freq = PI;
    let mut s = 0.0;
    for _ in 0..=n {
        s += amp * (freq * y).sin() / freq;
        amp /= 9.0;
        freq *= 27.0;
    }
    s
}

/// Uniform bound on `|g - g_N|`.
pub fn weierstrass_tail_bound(n: usize) -> f64 {
    9f64.powi(-(n as i32 + 1)) / (1.0 - 1.0 / 9.0)
}

/// Compensated running sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
    abs: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
        self.abs += v.abs();
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Evaluation point of the integrand in each Riemann-Stieltjes term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StieltjesRule {
    /// `f(t_i) (g(t_{i+1}) - g(t_i))`.
    LeftPoint,
    /// `(f(t_i) + f(t_{i+1})) / 2 (g(t_{i+1}) - g(t_i))`.
    Trapezoid,
}

#[derive(Clone, Debug, Serialize)]
pub struct YoungLevel {
    pub level: u32,
    pub value: f64,
    /// Change from the previous level.
    pub delta: Option<f64>,
    /// Bound on the floating-point error of `value`.
    pub rounding_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct YoungIntegral {
    pub value: f64,
    pub rule: StieltjesRule,
    pub levels: Vec<YoungLevel>,
    /// Asymptotic bound `2^{1 - alpha - beta}` on the ratio of successive deltas.
    pub ratio_bound: f64,
}

impl YoungIntegral {
    pub fn deltas(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.delta).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "level,value,delta,rounding_bound")?;
        for l in &self.levels {
            let delta = l.delta.map(|d| format!("{d:e}")).unwrap_or_default();
            writeln!(out, "{},{:.17e},{},{:e}", l.level, l.value, delta, l.rounding_bound)?;
        }
        Ok(())
    }
}

/// `fn` sampled at the `2^level + 1` dyadic points of `[a, b]`.
pub fn sample_path(f: impl Fn(f64) -> f64, a: f64, b: f64, level: u32) -> Vec<f64> {
    let n = 1usize << level;
    (0..=n).map(|i| f(a + (b - a) * i as f64 / n as f64)).collect()
}

/// Riemann-Stieltjes sums of `int f dg` on the dyadic sub-partitions of
/// paths sampled at `2^L + 1` points, for levels `min_level..=L`.
pub fn young_integral(
    f: &[f64],
    g: &[f64],
    alpha: f64,
    beta: f64,
    min_level: u32,
    rule: StieltjesRule,
) -> Result<YoungIntegral> {
    if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument("Hölder exponents must lie in (0, 1]".into()));
    }
    if alpha + beta <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "exponents {alpha} + {beta} do not exceed 1; the Young integral is not defined"
        )));
    }
    if f.len() != g.len() || f.len() < 2 || !(f.len() - 1).is_power_of_two() {
        return Err(Error::InvalidArgument("paths need the same 2^L + 1 samples".into()));
    }
    let max_level = (f.len() - 1).trailing_zeros();
    if min_level > max_level {
        return Err(Error::InvalidArgument(format!("level {min_level} exceeds the sampled level {max_level}")));
    }
    let mut levels: Vec<YoungLevel> = Vec::new();
    for level in min_level..=max_level {
        let stride = 1usize << (max_level - level);
        let mut acc = Neumaier::default();
        let mut i = 0;
        while i + stride < f.len() {
            let dg = g[i + stride] - g[i];
            let weight = match rule {
                StieltjesRule::LeftPoint => f[i],
                StieltjesRule::Trapezoid => 0.5 * (f[i] + f[i + stride]),
            };
            acc.add(weight * dg);
            i += stride;
        }
        let value = acc.value();
        let rounding_bound = 4.0 * f64::EPSILON * acc.abs;
        let delta = levels.last().map(|prev| value - prev.value);
        levels.push(YoungLevel { level, value, delta, rounding_bound });
    }
    Ok(YoungIntegral {
        value: levels.last().map(|l| l.value).unwrap_or(0.0),
        rule,
        levels,
        ratio_bound: 2f64.powf(1.0 - alpha - beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weierstrass_values() {
        assert_eq!(weierstrass(0.3, 0), (PI * 0.3).cos());
        assert!((weierstrass(0.0, 30) - 1.125).abs() < 1e-15);
        for n in 0..6 {
            let bound = 9f64.powi(-(n as i32 + 1));
            for k in 0..50 {
                let y = -1.0 + 0.04 * k as f64;
                assert!((weierstrass(y, n + 1) - weierstrass(y, n)).abs() <= bound + 1e-15);
            }
            assert!((weierstrass(0.0, 40) - weierstrass(0.0, n)).abs() <= weierstrass_tail_bound(n) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn primitive_differentiates_back() {
        for y in [-0.4, 0.1, 0.77] {
            let h = 1e-7;
            let d = (weierstrass_primitive(y + h, 2) - weierstrass_primitive(y - h, 2)) / (2.0 * h);
            assert!((d - weierstrass(y, 2)).abs() < 1e-5);
        }
        assert_eq!(weierstrass_primitive(0.0, 6), 0.0);
    }

    #[test]
    fn closed_forms() {
        let t = sample_path(|t| t, 0.0, 1.0, 10);
        let c = vec![2.5; t.len()];
        let w = sample_path(|y| weierstrass(y, 6), 0.0, 1.0, 10);
        for rule in [StieltjesRule::LeftPoint, StieltjesRule::Trapezoid] {
            let r = young_integral(&c, &w, 1.0, 2.0 / 3.0, 2, rule).unwrap();
            let want = 2.5 * (w[w.len() - 1] - w[0]);
            assert!(r.levels.iter().all(|l| (l.value - want).abs() <= l.rounding_bound.max(1e-15)));
        }
        let r = young_integral(&t, &t, 1.0, 1.0, 0, StieltjesRule::Trapezoid).unwrap();
        assert!(r.levels.iter().all(|l| l.value == 0.5), "{r:?}");
    }

    #[test]
    fn refuses_rough_pairs() {
        let t = sample_path(|t| t, 0.0, 1.0, 4);
        assert!(young_integral(&t, &t, 0.5, 0.5, 0, StieltjesRule::LeftPoint).is_err());
        assert!(young_integral(&t, &t[..9], 1.0, 1.0, 0, StieltjesRule::LeftPoint).is_err());
        assert!(young_integral(&t, &t, 1.0, 1.0, 5, StieltjesRule::LeftPoint).is_err());
    }

    #[test]
    fn weierstrass_left_sums_follow_the_envelope() {
        // quadratic variation at level L scales like 2^{-L/3}
        let w = sample_path(|y| weierstrass(y, 6), 0.0, 1.0, 14);
        let r = young_integral(&w, &w, 2.0 / 3.0, 2.0 / 3.0, 4, StieltjesRule::LeftPoint).unwrap();
        let d: Vec<f64> = r.deltas().iter().map(|v| v.abs()).collect();
        let head = d[..3].iter().sum::<f64>();
        let tail = d[d.len() - 3..].iter().sum::<f64>();
        assert!(tail < 0.5 * head, "{d:?}");
        let trap = young_integral(&w, &w, 2.0 / 3.0, 2.0 / 3.0, 4, StieltjesRule::Trapezoid).unwrap();
        let exact = 0.5 * (w[w.len() - 1].powi(2) - w[0].powi(2));
        assert!(trap.levels.iter().all(|l| (l.value - exact).abs() <= l.rounding_bound));
    }

    #[test]
    fn sums_are_bilinear() {
        let a = sample_path(|t| (3.0 * t).sin(), 0.0, 1.0, 8);
        let b = sample_path(|t| t * t, 0.0, 1.0, 8);
        let g = sample_path(|y| weierstrass(y, 3), 0.0, 1.0, 8);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let run = |f: &[f64]| young_integral(f, &g, 1.0, 2.0 / 3.0, 3, StieltjesRule::Trapezoid).unwrap();
        let (ra, rb, rm) = (run(&a), run(&b), run(&mix));
        for k in 0..rm.levels.len() {
            let lin = 2.0 * ra.levels[k].value - 3.0 * rb.levels[k].value;
            assert!((rm.levels[k].value - lin).abs() < 1e-12);
        }
    }
}
