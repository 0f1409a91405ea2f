use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box with a uniform node grid; flat node indices are
/// row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: Vec<usize>,
}

impl Chart {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != resolution.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("chart bounds and resolution must have one entry per axis".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::InvalidArgument("chart box is empty".into()));
        }
        if lo.len() > 12 {
            return Err(Error::InvalidArgument("charts are limited to 12 axes".into()));
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(Error::InvalidArgument("chart resolution must be at least 2 per axis".into()));
        }
        Ok(Self { lo, hi, resolution })
    }

    /// Same bounds and resolution on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![resolution; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.resolution[axis] - 1) as f64
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn multi_index(&self, mut flat: usize, idx: &mut [usize]) {
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.resolution[k];
            flat /= self.resolution[k];
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.resolution).fold(0, |f, (&i, &r)| f * r + i)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.resolution[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        self.multi_index(flat, &mut idx);
        idx.iter().enumerate().map(|(k, &i)| self.coordinate(k, i)).collect()
    }

    fn slack(&self, axis: usize) -> f64 {
        1e-12 * self.extent(axis).max(1.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(k, &v)| v >= self.lo[k] - self.slack(k) && v <= self.hi[k] + self.slack(k))
    }

    /// Cell containing `x` along `axis`, clamped to the grid.
    pub fn cell_along(&self, axis: usize, v: f64) -> usize {
        let s = ((v - self.lo[axis]) / self.spacing(axis)).floor();
        (s.max(0.0) as usize).min(self.resolution[axis] - 2)
    }

    pub(crate) fn check_inside(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Structure(format!("point has {} coordinates, chart has {}", x.len(), self.dim())));
        }
        if !self.contains(x) {
            return Err(Error::ChartExit(format!("{x:?} outside [{:?}, {:?}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Anything that maps points of one coordinate space to another.
pub trait MapSource: Sync {
    fn source_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.target_dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

/// Closure-backed map.
pub struct FnMap<F> {
    source_dim: usize,
    target_dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnMap<F> {
    pub fn new(source_dim: usize, target_dim: usize, f: F) -> Self {
        Self { source_dim, target_dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> MapSource for FnMap<F> {
    fn source_dim(&self) -> usize {
        self.source_dim
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(x, out);
        Ok(())
    }
}

/// Map known at the nodes of a chart, multilinearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMap {
    chart: Chart,
    target_dim: usize,
    values: Vec<f64>,
}

impl SampledMap {
    pub fn new(chart: Chart, target_dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != chart.node_count() * target_dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} node values, got {}",
                chart.node_count() * target_dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {}", pos / target_dim.max(1))));
        }
        Ok(Self { chart, target_dim, values })
    }

    /// Samples `f` at every node, in parallel.
    pub fn from_fn(chart: Chart, target_dim: usize, f: impl Fn(&[f64], &mut [f64]) + Sync) -> Result<Self> {
        let mut values = vec![0.0; chart.node_count() * target_dim];
        values.par_chunks_mut(target_dim.max(1)).enumerate().for_each(|(flat, out)| {
            f(&chart.node(flat), out);
        });
        Self::new(chart, target_dim, values)
    }

    pub fn from_source(chart: Chart, source: &dyn MapSource) -> Result<Self> {
        if source.source_dim() != chart.dim() {
            return Err(Error::Structure("map source and chart dimensions differ".into()));
        }
        let t = source.target_dim();
        let mut values = vec![0.0; chart.node_count() * t];
        values
            .par_chunks_mut(t)
            .enumerate()
            .try_for_each(|(flat, out)| source.eval_into(&chart.node(flat), out))?;
        Self::new(chart, t, values)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, flat: usize) -> &[f64] {
        &self.values[flat * self.target_dim..(flat + 1) * self.target_dim]
    }

    /// Cell base indices of the cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Vec<usize> {
        (0..self.chart.dim()).map(|k| self.chart.cell_along(k, x[k])).collect()
    }

    /// Evaluates the multilinear polynomial of `cell` at `x` (which may lie
    /// outside the cell), optionally with its Jacobian, row-major
    /// `target x source`.
    pub fn eval_in_cell(&self, cell: &[usize], x: &[f64], out: &mut [f64], mut jac: Option<&mut [f64]>) {
        let d = self.chart.dim();
        let t = self.target_dim;
        out.fill(0.0);
        if let Some(j) = jac.as_deref_mut() {
            j.fill(0.0);
        }
        let mut local = [0.0f64; 16];
        let mut inv_h = [0.0f64; 16];
        for k in 0..d {
            inv_h[k] = 1.0 / self.chart.spacing(k);
            local[k] = (x[k] - self.chart.coordinate(k, cell[k])) * inv_h[k];
        }
        let mut idx = [0usize; 16];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                idx[k] = cell[k] + bit;
                w *= if bit == 1 { local[k] } else { 1.0 - local[k] };
            }
            let flat = self.chart.flat_index(&idx[..d]);
            let val = &self.values[flat * t..(flat + 1) * t];
            for (o, v) in out.iter_mut().zip(val) {
                *o += w * v;
            }
            if let Some(j) = jac.as_deref_mut() {
                for k in 0..d {
                    let mut dw = if (corner >> k) & 1 == 1 { inv_h[k] } else { -inv_h[k] };
                    for m in 0..d {
                        if m != k {
                            dw *= if (corner >> m) & 1 == 1 { local[m] } else { 1.0 - local[m] };
                        }
                    }
                    for (r, v) in val.iter().enumerate() {
                        j[r * d + k] += dw * v;
                    }
                }
            }
        }
    }

    /// Interpolated value at `x`.
    pub fn eval_at(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.chart.check_inside(x)?;
        let cell = self.locate(x);
        self.eval_in_cell(&cell, x, out, None);
        Ok(())
    }

    /// Central-difference Jacobian of the interpolant with step `h` per axis,
    /// row-major `target x source`.
    pub fn jacobian(&self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        let d = self.chart.dim();
        let t = self.target_dim;
        let mut jac = vec![0.0; t * d];
        let mut xp = x.to_vec();
        let (mut fp, mut fm) = (vec![0.0; t], vec![0.0; t]);
        for k in 0..d {
            xp[k] = x[k] + h;
            self.eval_at(&xp, &mut fp)?;
            xp[k] = x[k] - h;
            self.eval_at(&xp, &mut fm)?;
            xp[k] = x[k];
            for r in 0..t {
                jac[r * d + k] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Jacobian at a node from neighbouring node values: central in the
    /// interior, second-order one-sided on the boundary (first-order when an
    /// axis has only two nodes).
    pub fn node_jacobian(&self, idx: &[usize]) -> Vec<f64> {
        let d = self.chart.dim();
        let t = self.target_dim;
        let mut jac = vec![0.0; t * d];
        let mut probe = idx.to_vec();
        let at = |k: usize, i: usize, probe: &mut Vec<usize>| -> Vec<f64> {
            probe[k] = i;
            let v = self.node_value(self.chart.flat_index(probe)).to_vec();
            probe[k] = idx[k];
            v
        };
        for k in 0..d {
            let r = self.chart.resolution[k];
            let h = self.chart.spacing(k);
            let i = idx[k];
            // (offset, weight) stencil
            let stencil: Vec<(usize, f64)> = if r == 2 {
                vec![(0, -1.0), (1, 1.0)]
            } else if i == 0 {
                vec![(0, -1.5), (1, 2.0), (2, -0.5)]
            } else if i + 1 == r {
                vec![(r - 1, 1.5), (r - 2, -2.0), (r - 3, 0.5)]
            } else {
                vec![(i - 1, -0.5), (i + 1, 0.5)]
            };
            for (node, w) in stencil {
                let v = at(k, node, &mut probe);
                for row in 0..t {
                    jac[row * d + k] += w * v[row] / h;
                }
            }
        }
        jac
    }

    /// JSON document with inline values.
    pub fn to_file(&self, group: Option<&str>) -> MapFile {
        MapFile {
            group: group.map(str::to_owned),
            domain: Domain { lo: self.chart.lo.clone(), hi: self.chart.hi.clone() },
            resolution: self.chart.resolution.clone(),
            target_dim: self.target_dim,
            values: Some(self.values.chunks(self.target_dim).map(<[f64]>::to_vec).collect()),
            payload_csv: None,
        }
    }

    pub fn write_json(&self, path: &Path, group: Option<&str>) -> Result<()> {
        let text = serde_json::to_string(&self.to_file(group)).expect("map serializes");
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads a map file, resolving a CSV payload relative to its directory.
    pub fn read_json(path: &Path) -> Result<(Self, MapFile)> {
        let text = std::fs::read_to_string(path)?;
        let file: MapFile = serde_json::from_str(&text)
            .map_err(|e| Error::Malformed(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())))?;
        let map = file.to_map(path.parent().unwrap_or(Path::new(".")))?;
        Ok((map, file))
    }
}

impl MapSource for SampledMap {
    fn source_dim(&self) -> usize {
        self.chart.dim()
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_at(x, out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// On-disk form of a [`SampledMap`]: a JSON header carrying either inline
/// row-major node values or the name of a CSV payload with one node per
/// row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub domain: Domain,
    pub resolution: Vec<usize>,
    pub target_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_csv: Option<String>,
}

impl MapFile {
    pub fn to_map(&self, base_dir: &Path) -> Result<SampledMap> {
        let chart = Chart::new(self.domain.lo.clone(), self.domain.hi.clone(), self.resolution.clone())
            .map_err(|e| Error::Malformed(e.to_string()))?;
        let rows = match (&self.values, &self.payload_csv) {
            (Some(v), None) => v.clone(),
            (None, Some(name)) => {
                let f = std::fs::File::open(base_dir.join(name))?;
                super::path::read_numeric_csv(std::io::BufReader::new(f), Some(self.target_dim))?
            }
            _ => return Err(Error::Malformed("map file needs exactly one of \"values\" and \"payload_csv\"".into())),
        };
        if rows.len() != chart.node_count() {
            return Err(Error::Malformed(format!("expected {} nodes, found {}", chart.node_count(), rows.len())));
        }
        if let Some(k) = rows.iter().position(|r| r.len() != self.target_dim) {
            return Err(Error::Malformed(format!("node {k}: expected {} values", self.target_dim)));
        }
        SampledMap::new(chart, self.target_dim, rows.concat()).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bilinear_map() -> SampledMap {
        let chart = Chart::new(vec![-1.0, 0.0], vec![1.0, 2.0], vec![5, 9]).unwrap();
        SampledMap::from_fn(chart, 2, |x, out| {
            out[0] = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
            out[1] = x[0] * x[0];
        })
        .unwrap()
    }

    #[test]
    fn index_round_trip() {
        let c = Chart::new(vec![0.0; 3], vec![1.0; 3], vec![3, 4, 5]).unwrap();
        let mut idx = [0; 3];
        for flat in 0..c.node_count() {
            c.multi_index(flat, &mut idx);
            assert_eq!(c.flat_index(&idx), flat);
        }
        assert_eq!(c.node(1), vec![0.0, 0.0, 0.25]);
    }

    #[test]
    fn bilinear_functions_are_reproduced() {
        let m = bilinear_map();
        let mut out = [0.0; 2];
        m.eval_at(&[0.3, 1.1], &mut out).unwrap();
        assert!((out[0] - (1.0 + 0.6 - 1.1 + 0.5 * 0.33)).abs() < 1e-14);
        let cell = m.locate(&[0.3, 1.1]);
        let mut jac = [0.0; 4];
        m.eval_in_cell(&cell, &[0.3, 1.1], &mut out, Some(&mut jac));
        assert!((jac[0] - (2.0 + 0.5 * 1.1)).abs() < 1e-13);
        assert!((jac[1] - (-1.0 + 0.5 * 0.3)).abs() < 1e-13);
        // x^2 is only piecewise linear: slope over [0, 0.5]
        assert!((jac[2] - 0.5).abs() < 1e-13);
        assert!(matches!(m.eval_at(&[1.5, 0.0], &mut out), Err(Error::ChartExit(_))));
    }

    #[test]
    fn node_jacobian_uses_neighbours() {
        let m = bilinear_map();
        let j = m.node_jacobian(&[2, 4]);
        assert!((j[0] - (2.0 + 0.5)).abs() < 1e-13);
        assert!((j[1] - (-1.0)).abs() < 1e-13);
        // x^2 at the left edge is differentiated exactly
        let j = m.node_jacobian(&[0, 0]);
        assert!((j[2] - (-2.0)).abs() < 1e-13);
    }

    #[test]
    fn json_round_trip_and_csv_payload() {
        let m = bilinear_map();
        let dir = std::env::temp_dir().join(format!("carnot-map-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("m.json");
        m.write_json(&p, Some("heisenberg:1")).unwrap();
        let (back, file) = SampledMap::read_json(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(file.group.as_deref(), Some("heisenberg:1"));

        let csv: String = m.values().chunks(2).map(|r| format!("{},{}\n", r[0], r[1])).collect();
        std::fs::write(dir.join("payload.csv"), format!("f1,f2\n{csv}")).unwrap();
        let header = r#"{"domain":{"lo":[-1,0],"hi":[1,2]},"resolution":[5,9],"target_dim":2,"payload_csv":"payload.csv"}"#;
        std::fs::write(dir.join("h.json"), header).unwrap();
        assert_eq!(SampledMap::read_json(&dir.join("h.json")).unwrap().0, m);

        std::fs::write(dir.join("bad.json"), "{\"domain\": {\"lo\": [0]}}").unwrap();
        assert!(matches!(SampledMap::read_json(&dir.join("bad.json")), Err(Error::Malformed(_))));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn empty_box_is_refused() {
        assert!(Chart::new(vec![1.0], vec![1.0], vec![3]).is_err());
        assert!(Chart::new(vec![0.0], vec![1.0], vec![1]).is_err());
    }
}
