use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CONSTANT_TOL: f64 = 1e-10;

/// One structure constant `[e_i, e_j] += c e_k`, 1-based as in group files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// Group-definition file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDef {
    pub name: String,
    pub layers: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
}

/// A violated algebra axiom, with 1-based indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Antisymmetry { i: usize, j: usize, k: usize, c_ij: f64, c_ji: f64 },
    Jacobi { i: usize, j: usize, k: usize, l: usize, residual: f64 },
    Grading { i: usize, j: usize, k: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Antisymmetry { i, j, k, c_ij, c_ji } => write!(
                f,
                "antisymmetry violation at ({i},{j},{k}): c_ij = {c_ij}, c_ji = {c_ji}"
            ),
            Violation::Jacobi { i, j, k, l, residual } => {
                write!(f, "Jacobi violation at ({i},{j},{k}) component {l}: {residual:e}")
            }
            Violation::Grading { i, j, k } => {
                write!(f, "grading violation: [e{i},e{j}] has a component on e{k}")
            }
        }
    }
}

/// Result of [`StratifiedAlgebra::validate`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal findings such as a layer not generated by brackets with layer 1.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Graded nilpotent Lie algebra with basis ordered layer by layer.
///
/// Brackets are stored once per unordered pair `(i, j)` with `i < j`;
/// the opposite order is synthesized by sign.
#[derive(Clone, Debug)]
pub struct StratifiedAlgebra {
    name: String,
    layer_dims: Vec<usize>,
    weights: Vec<usize>,
    structure: BTreeMap<(usize, usize), Vec<(usize, f64)>>,
    dense: Vec<f64>,
    input_conflicts: Vec<Violation>,
}

impl PartialEq for StratifiedAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.layer_dims == other.layer_dims && self.dense == other.dense
    }
}

impl StratifiedAlgebra {
    /// Builds an algebra from layer dimensions and 0-based bracket entries.
    ///
    /// Entries may be given in either order; conflicting data for `(i, j)` and
    /// `(j, i)` is kept and reported by [`validate`](Self::validate).
    pub fn new(
        name: impl Into<String>,
        layer_dims: Vec<usize>,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.contains(&0) {
            return Err(Error::Malformed("layer dimensions must be positive".into()));
        }
        let weights: Vec<usize> = layer_dims
            .iter()
            .enumerate()
            .flat_map(|(layer, &d)| std::iter::repeat_n(layer + 1, d))
            .collect();
        let n = weights.len();
        let mut forward: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        let mut backward: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        let mut diagonal = Vec::new();
        for &(i, j, k, c) in entries {
            if i >= n || j >= n || k >= n {
                return Err(Error::Malformed(format!(
                    "bracket index ({}, {}, {}) outside basis of size {n}",
                    i + 1,
                    j + 1,
                    k + 1
                )));
            }
            if c == 0.0 {
                continue;
            }
            if i == j {
                diagonal.push(Violation::Antisymmetry { i: i + 1, j: j + 1, k: k + 1, c_ij: c, c_ji: c });
            } else if i < j {
                *forward.entry((i, j, k)).or_insert(0.0) += c;
            } else {
                *backward.entry((j, i, k)).or_insert(0.0) += c;
            }
        }
        let mut conflicts = diagonal;
        let mut canonical: BTreeMap<(usize, usize, usize), f64> = forward.clone();
        for (&(i, j, k), &c_ji) in &backward {
            match forward.get(&(i, j, k)) {
                Some(&c_ij) => {
                    if (c_ij + c_ji).abs() > CONSTANT_TOL {
                        conflicts.push(Violation::Antisymmetry { i: i + 1, j: j + 1, k: k + 1, c_ij, c_ji });
                    }
                }
                None => {
                    canonical.insert((i, j, k), -c_ji);
                }
            }
        }
        let mut structure: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        let mut dense = vec![0.0; n * n * n];
        for (&(i, j, k), &c) in &canonical {
            structure.entry((i, j)).or_default().push((k, c));
            dense[(i * n + j) * n + k] = c;
            dense[(j * n + i) * n + k] = -c;
        }
        Ok(Self {
            name: name.into(),
            layer_dims,
            weights,
            structure,
            dense,
            input_conflicts: conflicts,
        })
    }

    /// Builds an algebra from a parsed group file (1-based indices).
    pub fn from_def(def: &GroupDef) -> Result<Self> {
        let mut entries = Vec::with_capacity(def.brackets.len());
        for b in &def.brackets {
            if b.i == 0 || b.j == 0 || b.k == 0 {
                return Err(Error::Malformed("bracket indices are 1-based".into()));
            }
            entries.push((b.i - 1, b.j - 1, b.k - 1, b.c));
        }
        Self::new(def.name.clone(), def.layers.clone(), &entries)
    }

    /// Serializable description with canonical `i < j` entries.
    pub fn to_def(&self) -> GroupDef {
        let brackets = self
            .structure
            .iter()
            .flat_map(|(&(i, j), terms)| {
                terms.iter().map(move |&(k, c)| BracketEntry { i: i + 1, j: j + 1, k: k + 1, c })
            })
            .collect();
        GroupDef { name: self.name.clone(), layers: self.layer_dims.clone(), brackets }
    }

    /// Resolves a built-in name: `abelian:n`, `heisenberg:n`, `filiform:3`,
    /// `quaternionic-heisenberg:n`.
    pub fn builtin(spec: &str) -> Result<Self> {
        let (family, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("unknown built-in group `{spec}`")))?;
        let n: usize = arg
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad parameter in `{spec}`")))?;
        match family.trim() {
            "abelian" => Self::abelian(n),
            "heisenberg" => Self::heisenberg(n),
            "filiform" => Self::filiform(n),
            "quaternionic-heisenberg" => Self::quaternionic_heisenberg(n),
            _ => Err(Error::InvalidArgument(format!("unknown built-in group `{spec}`"))),
        }
    }

    /// `R^n` with the zero bracket.
    pub fn abelian(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("abelian needs n >= 1".into()));
        }
        Self::new(format!("abelian:{n}"), vec![n], &[])
    }

    /// `H^n` with basis `x_1..x_n, y_1..y_n, z` and `[x_i, y_i] = z`.
    pub fn heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("heisenberg needs n >= 1".into()));
        }
        let entries: Vec<_> = (0..n).map(|i| (i, n + i, 2 * n, 1.0)).collect();
        Self::new(format!("heisenberg:{n}"), vec![2 * n, 1], &entries)
    }

    /// Model filiform algebra of step `s`: `[X_1, X_k] = X_{k+1}` for `2 <= k <= s`.
    pub fn filiform(step: usize) -> Result<Self> {
        if step < 2 {
            return Err(Error::InvalidArgument("filiform needs step >= 2".into()));
        }
        let mut layers = vec![2];
        layers.extend(std::iter::repeat_n(1, step - 1));
        let entries: Vec<_> = (1..step).map(|k| (0, k, k + 1, 1.0)).collect();
        Self::new(format!("filiform:{step}"), layers, &entries)
    }

    /// Quaternionic Heisenberg algebra on `R^{4n}` (coordinates `x, y, z, w` in
    /// blocks of `n`) with the three symplectic forms as brackets into a
    /// 3-dimensional center.
    pub fn quaternionic_heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quaternionic-heisenberg needs n >= 1".into()));
        }
        let (x, y, z, w) = (0, n, 2 * n, 3 * n);
        let top = 4 * n;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((x + i, y + i, top, 1.0));
            entries.push((z + i, w + i, top, 1.0));
            entries.push((x + i, z + i, top + 1, 1.0));
            entries.push((w + i, y + i, top + 1, 1.0));
            entries.push((x + i, w + i, top + 2, 1.0));
            entries.push((y + i, z + i, top + 2, 1.0));
        }
        Self::new(format!("quaternionic-heisenberg:{n}"), vec![4 * n, 3], &entries)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Layer number (1-based) of each basis index.
    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> usize {
        self.weights[index]
    }

    pub fn total_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    /// Dimension of the horizontal layer.
    pub fn rank(&self) -> usize {
        self.layer_dims[0]
    }

    /// Homogeneous dimension `sum k dim g^[k]`.
    pub fn homogeneous_dim(&self) -> usize {
        self.weights.iter().sum()
    }

    /// Start offset of each layer in the basis.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layer_dims.len() + 1);
        let mut acc = 0;
        for &d in &self.layer_dims {
            offsets.push(acc);
            acc += d;
        }
        offsets.push(acc);
        offsets
    }

    /// Structure constant `c^k_{ij}` (0-based).
    #[inline]
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.total_dim();
        self.dense[(i * n + j) * n + k]
    }

    /// Canonical sparse entries keyed by `(i, j)` with `i < j`.
    pub fn sparse(&self) -> &BTreeMap<(usize, usize), Vec<(usize, f64)>> {
        &self.structure
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.is_empty()
    }

    /// Lie bracket of coordinate vectors.
    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.total_dim()];
        self.bracket_into(u, v, &mut out);
        out
    }

    /// Lie bracket written into `out`.
    pub fn bracket_into(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&(i, j), terms) in &self.structure {
            let coeff = u[i] * v[j] - u[j] * v[i];
            if coeff == 0.0 {
                continue;
            }
            for &(k, c) in terms {
                out[k] += c * coeff;
            }
        }
    }

    /// Checks antisymmetry, the Jacobi identity and grading; warns on
    /// layers not generated by brackets with the first layer.
    pub fn validate(&self) -> ValidationReport {
        let n = self.total_dim();
        let mut report = ValidationReport { violations: self.input_conflicts.clone(), warnings: vec![] };
        for (&(i, j), terms) in &self.structure {
            for &(k, _) in terms {
                if self.weights[k] != self.weights[i] + self.weights[j] {
                    report.violations.push(Violation::Grading { i: i + 1, j: j + 1, k: k + 1 });
                }
            }
        }
        let c = |a: usize, b: usize, d: usize| self.dense[(a * n + b) * n + d];
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        let mut scale: f64 = 0.0;
                        for m in 0..n {
                            let t1 = c(i, j, m) * c(m, k, l);
                            let t2 = c(j, k, m) * c(m, i, l);
                            let t3 = c(k, i, m) * c(m, j, l);
                            s += t1 + t2 + t3;
                            scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
                        }
                        if s.abs() > CONSTANT_TOL * scale.max(1.0) {
                            report.violations.push(Violation::Jacobi {
                                i: i + 1,
                                j: j + 1,
                                k: k + 1,
                                l: l + 1,
                                residual: s,
                            });
                        }
                    }
                }
            }
        }
        if report.violations.is_empty() {
            report.warnings = self.generation_warnings();
        }
        report
    }

    fn generation_warnings(&self) -> Vec<String> {
        let offsets = self.layer_offsets();
        let mut warnings = Vec::new();
        for layer in 1..self.step() {
            let (lo, hi) = (offsets[layer], offsets[layer + 1]);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for a in offsets[0]..offsets[1] {
                for b in offsets[layer - 1]..offsets[layer] {
                    rows.push((lo..hi).map(|k| self.constant(a, b, k)).collect());
                }
            }
            let rank = numeric_rank(&rows, hi - lo);
            if rank < hi - lo {
                warnings.push(format!(
                    "layer {} is not generated: [g1, g{}] spans {} of {} dimensions",
                    layer + 1,
                    layer,
                    rank,
                    hi - lo
                ));
            }
        }
        warnings
    }
}

fn numeric_rank(rows: &[Vec<f64>], cols: usize) -> usize {
    if rows.is_empty() || cols == 0 {
        return 0;
    }
    let m = nalgebra::DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    m.svd(false, false).singular_values.iter().filter(|&&s| s > 1e-9).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_is_valid() {
        let h = StratifiedAlgebra::heisenberg(1).unwrap();
        let report = h.validate();
        assert!(report.is_valid(), "{report}");
        assert!(report.warnings.is_empty());
        assert_eq!(h.weights(), &[1, 1, 2]);
        assert_eq!(h.homogeneous_dim(), 4);
    }

    #[test]
    fn conflicting_orders_are_reported() {
        let a = StratifiedAlgebra::new("bad", vec![2, 1], &[(0, 1, 2, 1.0), (1, 0, 2, 1.0)]).unwrap();
        let report = a.validate();
        assert_eq!(
            report.violations,
            vec![Violation::Antisymmetry { i: 1, j: 2, k: 3, c_ij: 1.0, c_ji: 1.0 }]
        );
    }

    #[test]
    fn reversed_entry_is_synthesized_by_sign() {
        let a = StratifiedAlgebra::new("h", vec![2, 1], &[(1, 0, 2, -1.0)]).unwrap();
        assert_eq!(a.constant(0, 1, 2), 1.0);
        assert_eq!(a.constant(1, 0, 2), -1.0);
        assert!(a.validate().is_valid());
    }

    #[test]
    fn misplaced_layer_is_a_grading_violation() {
        // target of [e1, e2] sits in layer 3
        let a = StratifiedAlgebra::new("g", vec![2, 1, 1], &[(0, 1, 3, 1.0)]).unwrap();
        let report = a.validate();
        assert!(report.violations.contains(&Violation::Grading { i: 1, j: 2, k: 4 }));
    }

    #[test]
    fn jacobi_failure_is_found() {
        // cyclic sum on (e1, e2, e3) leaves -e7
        let a = StratifiedAlgebra::new(
            "bad",
            vec![3, 3, 1],
            &[(0, 1, 3, 1.0), (0, 2, 4, 1.0), (1, 2, 5, 1.0), (0, 5, 6, 1.0)],
        )
        .unwrap();
        let report = a.validate();
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Jacobi { .. })), "{report}");
    }

    #[test]
    fn builtins_validate() {
        for name in ["heisenberg:1", "heisenberg:3", "filiform:3", "filiform:5", "quaternionic-heisenberg:2"] {
            let a = StratifiedAlgebra::builtin(name).unwrap();
            let r = a.validate();
            assert!(r.is_valid(), "{name}: {r}");
            assert!(r.warnings.is_empty(), "{name}: {:?}", r.warnings);
        }
    }

    #[test]
    fn ungenerated_layer_warns() {
        let a = StratifiedAlgebra::new("deg", vec![2, 2], &[(0, 1, 2, 1.0)]).unwrap();
        let r = a.validate();
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn def_roundtrip() {
        let a = StratifiedAlgebra::filiform(3).unwrap();
        let json = serde_json::to_string(&a.to_def()).unwrap();
        let back = StratifiedAlgebra::from_def(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(a, back);
    }
}
