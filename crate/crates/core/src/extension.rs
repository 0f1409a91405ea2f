//! Central extensions `V -> G -> H` defined by a graded 2-cocycle, their
//! potential 1-form, and graded homomorphisms between extension sequences.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::carnot::{lie_differential_d0, CarnotGroup, GroupDef, InvariantForm, StratifiedAlgebra};
use crate::error::{Error, Result};
use crate::linalg;

const COCYCLE_TOL: f64 = 1e-10;
const MU_TOL: f64 = 1e-9;

/// One cocycle entry `rho(e_i, e_j) += c f_v`, 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleEntry {
    pub i: usize,
    pub j: usize,
    pub v: usize,
    pub c: f64,
}

/// Base of an extension file: a built-in name or an inline group definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRef {
    Named(String),
    Inline(GroupDef),
}

/// Extension-definition file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionDef {
    pub base: BaseRef,
    pub fiber_layers: Vec<usize>,
    #[serde(default)]
    pub cocycle: Vec<CocycleEntry>,
}

/// Central extension of a base Carnot group by a graded vector space.
#[derive(Clone, Debug)]
pub struct CentralExtension {
    base: CarnotGroup,
    fiber_layers: Vec<usize>,
    cocycle: InvariantForm,
    extended: CarnotGroup,
    base_index: Vec<usize>,
    fiber_index: Vec<usize>,
}

/// Builds `g = h + V` with bracket `[X, Y]_h + rho(X, Y)` and `V` central.
///
/// Entries are 0-based `(i, j, v, c)`.
pub fn build_extension(
    base: &CarnotGroup,
    fiber_layers: &[usize],
    entries: &[(usize, usize, usize, f64)],
) -> Result<CentralExtension> {
    let alg = base.algebra();
    let n = alg.total_dim();
    if fiber_layers.is_empty() || fiber_layers.contains(&0) {
        return Err(Error::InvalidArgument("fiber layers must be positive".into()));
    }
    let mut canonical = vec![0.0; fiber_layers.len() * n * n];
    for &(i, j, v, c) in entries {
        if i >= n || j >= n || v >= fiber_layers.len() {
            return Err(Error::Malformed(format!("cocycle entry ({}, {}, {}) out of range", i + 1, j + 1, v + 1)));
        }
        if i == j {
            if c != 0.0 {
                return Err(Error::Malformed(format!("cocycle entry on the diagonal ({}, {})", i + 1, j + 1)));
            }
            continue;
        }
        let (a, b, s) = if i < j { (i, j, c) } else { (j, i, -c) };
        canonical[(v * n + a) * n + b] += s;
    }
    let mut cocycle = InvariantForm::zero(2, n, fiber_layers.to_vec(), 0)?;
    for v in 0..fiber_layers.len() {
        for a in 0..n {
            for b in (a + 1)..n {
                let c = canonical[(v * n + a) * n + b];
                if c == 0.0 {
                    continue;
                }
                if alg.weight(a) + alg.weight(b) != fiber_layers[v] {
                    return Err(Error::Grading(a + 1, b + 1, v + 1));
                }
                cocycle.set(v, &[a, b], c);
            }
        }
    }
    let d = lie_differential_d0(alg, &cocycle)?;
    if let Some((triple, residual)) = worst_entry(&d, n) {
        if residual.abs() > COCYCLE_TOL {
            return Err(Error::Cocycle(triple[0] + 1, triple[1] + 1, triple[2] + 1, residual));
        }
    }
    from_cocycle(base, fiber_layers, cocycle)
}

fn worst_entry(form: &InvariantForm, n: usize) -> Option<([usize; 3], f64)> {
    let mut best: Option<([usize; 3], f64)> = None;
    for v in 0..form.components() {
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let val = form.get(v, &[a, b, c]);
                    if best.is_none_or(|(_, r)| val.abs() > r.abs()) {
                        best = Some(([a, b, c], val));
                    }
                }
            }
        }
    }
    best
}

fn from_cocycle(base: &CarnotGroup, fiber_layers: &[usize], cocycle: InvariantForm) -> Result<CentralExtension> {
    let alg = base.algebra();
    let n = alg.total_dim();
    // extended basis: sorted by layer, base vectors first within a layer
    let mut order: Vec<(usize, bool, usize)> = (0..n).map(|i| (alg.weight(i), false, i)).collect();
    order.extend(fiber_layers.iter().enumerate().map(|(v, &l)| (l, true, v)));
    order.sort();
    let mut base_index = vec![0; n];
    let mut fiber_index = vec![0; fiber_layers.len()];
    for (pos, &(_, is_fiber, idx)) in order.iter().enumerate() {
        if is_fiber {
            fiber_index[idx] = pos;
        } else {
            base_index[idx] = pos;
        }
    }
    let top = order.last().map(|o| o.0).unwrap_or(1);
    let mut layers = vec![0usize; top];
    for &(l, _, _) in &order {
        layers[l - 1] += 1;
    }
    if layers.contains(&0) {
        return Err(Error::InvalidArgument("extended algebra would have an empty layer".into()));
    }
    let mut entries = Vec::new();
    for (&(i, j), terms) in alg.sparse() {
        for &(k, c) in terms {
            entries.push((base_index[i], base_index[j], base_index[k], c));
        }
    }
    for v in 0..fiber_layers.len() {
        for a in 0..n {
            for b in (a + 1)..n {
                let c = cocycle.get(v, &[a, b]);
                if c != 0.0 {
                    entries.push((base_index[a], base_index[b], fiber_index[v], c));
                }
            }
        }
    }
    let name = format!("{}+ext", alg.name());
    let extended = CarnotGroup::new(StratifiedAlgebra::new(name, layers, &entries)?)?;
    Ok(CentralExtension {
        base: base.clone(),
        fiber_layers: fiber_layers.to_vec(),
        cocycle,
        extended,
        base_index,
        fiber_index,
    })
}

impl CentralExtension {
    /// Resolves an extension file.
    pub fn from_def(def: &ExtensionDef) -> Result<Self> {
        let base = match &def.base {
            BaseRef::Named(name) => CarnotGroup::builtin(name)?,
            BaseRef::Inline(g) => CarnotGroup::new(StratifiedAlgebra::from_def(g)?)?,
        };
        let mut entries = Vec::with_capacity(def.cocycle.len());
        for e in &def.cocycle {
            if e.i == 0 || e.j == 0 || e.v == 0 {
                return Err(Error::Malformed("cocycle indices are 1-based".into()));
            }
            entries.push((e.i - 1, e.j - 1, e.v - 1, e.c));
        }
        build_extension(&base, &def.fiber_layers, &entries)
    }

    /// Extension of `G / top layer` by the top layer of `G`.
    pub fn by_top_layer(group: &CarnotGroup) -> Result<Self> {
        let alg = group.algebra();
        let s = alg.step();
        if s < 2 {
            return Err(Error::InvalidArgument("an abelian group has no central top-layer extension".into()));
        }
        let offsets = alg.layer_offsets();
        let cut = offsets[s - 1];
        let mut base_entries = Vec::new();
        let mut cocycle = Vec::new();
        for (&(i, j), terms) in alg.sparse() {
            for &(k, c) in terms {
                if k < cut {
                    base_entries.push((i, j, k, c));
                } else {
                    cocycle.push((i, j, k - cut, c));
                }
            }
        }
        let base_alg = StratifiedAlgebra::new(
            format!("{}/top", alg.name()),
            alg.layer_dims()[..s - 1].to_vec(),
            &base_entries,
        )?;
        let base = CarnotGroup::new(base_alg)?;
        build_extension(&base, &vec![s; alg.layer_dims()[s - 1]], &cocycle)
    }

    pub fn base(&self) -> &CarnotGroup {
        &self.base
    }

    pub fn extended(&self) -> &CarnotGroup {
        &self.extended
    }

    pub fn fiber_layers(&self) -> &[usize] {
        &self.fiber_layers
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_layers.len()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn cocycle(&self) -> &InvariantForm {
        &self.cocycle
    }

    /// Position of each base basis vector in the extended basis.
    pub fn base_index(&self) -> &[usize] {
        &self.base_index
    }

    /// Position of each fiber basis vector in the extended basis.
    pub fn fiber_index(&self) -> &[usize] {
        &self.fiber_index
    }

    /// Coordinate projection `pi: G -> H`.
    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        self.base_index.iter().map(|&i| g[i]).collect()
    }

    /// Fiber coordinates of a point of `G`.
    pub fn fiber_part(&self, g: &[f64]) -> Vec<f64> {
        self.fiber_index.iter().map(|&i| g[i]).collect()
    }

    /// Point of `G` with given base and fiber coordinates.
    pub fn join(&self, base: &[f64], fiber: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.extended.dim()];
        for (&i, &x) in self.base_index.iter().zip(base) {
            g[i] = x;
        }
        for (&i, &x) in self.fiber_index.iter().zip(fiber) {
            g[i] = x;
        }
        g
    }

    /// True when no fiber direction is horizontal.
    pub fn same_rank(&self) -> bool {
        self.fiber_layers.iter().all(|&l| l >= 2)
    }

    /// Potential 1-form with `d alpha = rho`.
    pub fn potential_form(&self) -> Result<PotentialForm> {
        potential_form(self)
    }
}

/// Base-coordinate 1-form `alpha` with `d alpha = rho`, read off from the
/// fiber rows `dC - alpha` of the extended coframe.
#[derive(Clone, Debug)]
pub struct PotentialForm {
    ext: CentralExtension,
}

pub fn potential_form(ext: &CentralExtension) -> Result<PotentialForm> {
    if !ext.same_rank() {
        return Err(Error::InvalidArgument("fiber contains horizontal directions".into()));
    }
    Ok(PotentialForm { ext: ext.clone() })
}

impl PotentialForm {
    pub fn extension(&self) -> &CentralExtension {
        &self.ext
    }

    /// Coefficients on base coordinate differentials, `out[v * base_dim + i]`.
    pub fn coefficients_into(&self, x: &[f64], out: &mut [f64]) {
        let ext = &self.ext;
        let g = ext.join(x, &vec![0.0; ext.fiber_dim()]);
        let frame = ext.extended.frame(&g);
        let n = ext.extended.dim();
        let nb = ext.base_dim();
        // row v of the inverse: r F = e_v, solved from the last index down
        let mut r = vec![0.0; n];
        for (v, &fv) in ext.fiber_index.iter().enumerate() {
            for j in (0..n).rev() {
                let mut s = if j == fv { 1.0 } else { 0.0 };
                for k in (j + 1)..n {
                    s -= r[k] * frame[(k, j)];
                }
                r[j] = s;
            }
            for (i, &bi) in ext.base_index.iter().enumerate() {
                out[v * nb + i] = -r[bi];
            }
        }
    }

    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ext.fiber_dim() * self.ext.base_dim()];
        self.coefficients_into(x, &mut out);
        out
    }

    /// Max deviation of the coordinate exterior derivative of `alpha` from
    /// `rho` (written in coordinates through the base coframe) at `points`,
    /// using central differences of step `h`.
    pub fn exterior_derivative_residual(&self, points: &[Vec<f64>], h: f64) -> Result<f64> {
        let ext = &self.ext;
        let nb = ext.base_dim();
        let nv = ext.fiber_dim();
        let mut worst: f64 = 0.0;
        for x in points {
            let mut grads = vec![vec![0.0; nv * nb]; nb];
            for (k, grad) in grads.iter_mut().enumerate() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let (ap, am) = (self.coefficients(&xp), self.coefficients(&xm));
                for (g, (a, b)) in grad.iter_mut().zip(ap.iter().zip(&am)) {
                    *g = (a - b) / (2.0 * h);
                }
            }
            let co = ext.base.coframe(x)?;
            for v in 0..nv {
                for a in 0..nb {
                    for b in (a + 1)..nb {
                        let d_alpha = grads[a][v * nb + b] - grads[b][v * nb + a];
                        let mut rho = 0.0;
                        for i in 0..nb {
                            for j in 0..nb {
                                let c = ext.cocycle.get(v, &[i, j]);
                                if c != 0.0 {
                                    rho += c * co[(i, a)] * co[(j, b)];
                                }
                            }
                        }
                        worst = worst.max((d_alpha - rho).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Graded linear data `(L, phi, mu)` between two extension sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedMapTriple {
    /// `h1 -> h2`, shape `dim h2 x dim h1`.
    pub l: DMatrix<f64>,
    /// `V1 -> V2`, shape `dim V2 x dim V1`.
    pub phi: DMatrix<f64>,
    /// `h1 -> V2`, shape `dim V2 x dim h1`.
    pub mu: Option<DMatrix<f64>>,
}

fn check_graded(m: &DMatrix<f64>, rows: &[usize], cols: &[usize], what: &str) -> Result<()> {
    if m.nrows() != rows.len() || m.ncols() != cols.len() {
        return Err(Error::Structure(format!(
            "{what} has shape {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            rows.len(),
            cols.len()
        )));
    }
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != 0.0 && rows[r] != cols[c] {
                return Err(Error::InvalidArgument(format!(
                    "{what} is not graded: entry ({}, {}) maps layer {} to layer {}",
                    r + 1,
                    c + 1,
                    cols[c],
                    rows[r]
                )));
            }
        }
    }
    Ok(())
}

/// `psi(X + Y) = L(X) + mu(X) + phi(Y)` as a matrix `g1 -> g2`.
pub fn graded_hom_compose(
    ext1: &CentralExtension,
    ext2: &CentralExtension,
    t: &GradedMapTriple,
) -> Result<DMatrix<f64>> {
    let mu = t.mu.as_ref().ok_or_else(|| Error::InvalidArgument("mu is required".into()))?;
    let w1 = ext1.base.weights();
    let w2 = ext2.base.weights();
    check_graded(&t.l, w2, w1, "L")?;
    check_graded(&t.phi, &ext2.fiber_layers, &ext1.fiber_layers, "phi")?;
    check_graded(mu, &ext2.fiber_layers, w1, "mu")?;
    let mut psi = DMatrix::zeros(ext2.extended.dim(), ext1.extended.dim());
    for (c, &gc) in ext1.base_index.iter().enumerate() {
        for (r, &gr) in ext2.base_index.iter().enumerate() {
            psi[(gr, gc)] = t.l[(r, c)];
        }
        for (v, &gv) in ext2.fiber_index.iter().enumerate() {
            psi[(gv, gc)] = mu[(v, c)];
        }
    }
    for (u, &gu) in ext1.fiber_index.iter().enumerate() {
        for (v, &gv) in ext2.fiber_index.iter().enumerate() {
            psi[(gv, gu)] = t.phi[(v, u)];
        }
    }
    Ok(psi)
}

/// Largest `|psi [e_a, e_b] - [psi e_a, psi e_b]|` over basis pairs.
pub fn homomorphism_defect(psi: &DMatrix<f64>, g1: &CarnotGroup, g2: &CarnotGroup) -> f64 {
    let (n1, n2) = (g1.dim(), g2.dim());
    let col = |j: usize| -> Vec<f64> { (0..n2).map(|r| psi[(r, j)]).collect() };
    let mut worst: f64 = 0.0;
    for a in 0..n1 {
        for b in (a + 1)..n1 {
            let lhs: Vec<f64> = (0..n2)
                .map(|r| (0..n1).map(|k| psi[(r, k)] * g1.algebra().constant(a, b, k)).sum())
                .collect();
            let rhs = g2.algebra().bracket(&col(a), &col(b));
            for (x, y) in lhs.iter().zip(&rhs) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

/// Obstruction `phi o rho1 - L^* rho2` and, when it is a coboundary, the
/// least-squares `mu` with `d0 mu` equal to it.
#[derive(Clone, Debug)]
pub struct HomObstruction {
    pub obstruction: InvariantForm,
    pub mu: Option<DMatrix<f64>>,
    pub residual: f64,
}

pub fn hom_obstruction(
    l: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    ext1: &CentralExtension,
    ext2: &CentralExtension,
) -> Result<HomObstruction> {
    let w1 = ext1.base.weights().to_vec();
    check_graded(l, ext2.base.weights(), &w1, "L")?;
    check_graded(phi, &ext2.fiber_layers, &ext1.fiber_layers, "phi")?;
    let n1 = ext1.base_dim();
    let n2 = ext2.base_dim();
    let nv2 = ext2.fiber_dim();
    let mut obstruction = InvariantForm::zero(2, n1, ext2.fiber_layers.clone(), 0)?;
    for v in 0..nv2 {
        for a in 0..n1 {
            for b in (a + 1)..n1 {
                let mut val = 0.0;
                for u in 0..ext1.fiber_dim() {
                    val += phi[(v, u)] * ext1.cocycle.get(u, &[a, b]);
                }
                for c in 0..n2 {
                    for d in 0..n2 {
                        let r = ext2.cocycle.get(v, &[c, d]);
                        if r != 0.0 {
                            val -= r * l[(c, a)] * l[(d, b)];
                        }
                    }
                }
                obstruction.set(v, &[a, b], val);
            }
        }
    }
    // unknowns mu[v][c] restricted to weight-preserving entries
    let unknowns: Vec<(usize, usize)> = (0..nv2)
        .flat_map(|v| (0..n1).map(move |c| (v, c)))
        .filter(|&(v, c)| ext2.fiber_layers[v] == w1[c])
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n1).flat_map(|a| ((a + 1)..n1).map(move |b| (a, b))).collect();
    let rows = nv2 * pairs.len();
    let mut system = DMatrix::zeros(rows, unknowns.len());
    let mut rhs = DMatrix::zeros(rows, 1);
    let alg1 = ext1.base.algebra();
    for v in 0..nv2 {
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let row = v * pairs.len() + p;
            rhs[(row, 0)] = obstruction.get(v, &[a, b]);
            for (u, &(uv, c)) in unknowns.iter().enumerate() {
                if uv == v {
                    system[(row, u)] = -alg1.constant(a, b, c);
                }
            }
        }
    }
    let (mu, residual) = if rows == 0 {
        (DMatrix::zeros(nv2, n1), 0.0)
    } else if unknowns.is_empty() {
        (DMatrix::zeros(nv2, n1), rhs.abs().max())
    } else {
        let sol = linalg::least_squares(&system, &rhs)?;
        let residual = (&system * &sol - &rhs).abs().max();
        let mut mu = DMatrix::zeros(nv2, n1);
        for (u, &(v, c)) in unknowns.iter().enumerate() {
            mu[(v, c)] = sol[(u, 0)];
        }
        (mu, residual)
    };
    Ok(HomObstruction { obstruction, mu: (residual < MU_TOL).then_some(mu), residual })
}

/// Pfaffian of an antisymmetric `2m x 2m` matrix: the coefficient of
/// `omega^m / m!` on the coordinate volume form.
pub fn top_wedge_coefficient(j: &DMatrix<f64>) -> Result<f64> {
    linalg::pfaffian(j)
}
