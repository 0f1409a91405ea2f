use std::path::Path;

use carnot_lift::{
    read_numeric_csv, weierstrass, CarnotGroup, CentralExtension, Chart, Error, ExtensionDef, FnMap, GroupDef,
    MapSource, Result, SampledMap, StratifiedAlgebra,
};
use nalgebra::DMatrix;

use crate::args::MapArgs;

pub fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Comma separated numbers.
pub fn vector(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .enumerate()
        .map(|(k, s)| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("{what}: field {} ({:?}) is not a number", k + 1, s.trim()))
            })
        })
        .collect()
}

pub fn vector_of_len(text: &str, len: usize, what: &str) -> Result<Vec<f64>> {
    let v = vector(text, what)?;
    if v.len() != len {
        return Err(Error::InvalidArgument(format!("{what} needs {len} coordinates, got {}", v.len())));
    }
    Ok(v)
}

/// Points separated by ';'.
pub fn points(text: &str, len: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').filter(|s| !s.trim().is_empty()).map(|s| vector_of_len(s, len, what)).collect()
}

/// `lo..hi` inclusive.
pub fn int_range(text: &str, what: &str) -> Result<(i32, i32)> {
    let bad = || Error::InvalidArgument(format!("{what}: expected lo..hi, got {text:?}"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let lo = a.trim().parse().map_err(|_| bad())?;
    let hi = b.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Inline rows separated by ';', or a CSV file.
pub fn matrix(text: &str, what: &str, inputs: &mut Vec<String>) -> Result<DMatrix<f64>> {
    let rows = if Path::new(text).is_file() {
        inputs.push(text.to_string());
        let f = std::fs::File::open(text)?;
        read_numeric_csv(std::io::BufReader::new(f), None)
            .map_err(|e| Error::Malformed(format!("{text}: {}", strip(&e))))?
    } else {
        text.split(';').filter(|s| !s.trim().is_empty()).map(|s| vector(s, what)).collect::<Result<Vec<_>>>()?
    };
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Malformed(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_row_slice(rows.len(), cols, &rows.concat()))
}

fn strip(e: &Error) -> String {
    match e {
        Error::Malformed(m) => m.clone(),
        other => other.to_string(),
    }
}

fn json_file<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("{path}: line {}, column {}: {e}", e.line(), e.column())))
}

fn is_file_spec(spec: &str) -> bool {
    spec.ends_with(".json") || Path::new(spec).is_file()
}

pub fn group(spec: &str, inputs: &mut Vec<String>) -> Result<CarnotGroup> {
    if is_file_spec(spec) {
        inputs.push(spec.to_string());
        let def: GroupDef = json_file(spec)?;
        let alg = StratifiedAlgebra::from_def(&def)?;
        let report = alg.validate();
        if !report.is_valid() {
            return Err(Error::Validation(format!("{spec}: {report}")));
        }
        CarnotGroup::new(alg)
    } else {
        CarnotGroup::builtin(spec)
    }
}

/// Algebra from a built-in name or file, without validating it.
pub fn algebra(spec: &str, inputs: &mut Vec<String>) -> Result<StratifiedAlgebra> {
    if is_file_spec(spec) {
        inputs.push(spec.to_string());
        StratifiedAlgebra::from_def(&json_file::<GroupDef>(spec)?)
    } else {
        StratifiedAlgebra::builtin(spec)
    }
}

/// Extension file, or the top-layer extension of a named group.
pub fn extension(spec: &str, inputs: &mut Vec<String>) -> Result<CentralExtension> {
    if is_file_spec(spec) {
        inputs.push(spec.to_string());
        CentralExtension::from_def(&json_file::<ExtensionDef>(spec)?)
    } else {
        CentralExtension::by_top_layer(&CarnotGroup::builtin(spec)?)
    }
}

pub fn point(text: Option<&str>, dim: usize, what: &str) -> Result<Vec<f64>> {
    match text {
        Some(t) => vector_of_len(t, dim, what),
        None => Ok(vec![0.0; dim]),
    }
}

/// Closed-form maps addressable by name on `R^dim`.
pub fn named_map(name: &str, dim: usize, matrix_spec: Option<&str>, inputs: &mut Vec<String>) -> Result<Box<dyn MapSource>> {
    let need_plane = |m: &str| {
        if dim < 2 {
            Err(Error::InvalidArgument(format!("map `{m}` needs at least two coordinates")))
        } else {
            Ok(())
        }
    };
    Ok(match name {
        "identity" => Box::new(FnMap::new(dim, dim, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x))),
        "shear" => {
            need_plane(name)?;
            Box::new(FnMap::new(dim, dim, |x: &[f64], o: &mut [f64]| {
                o.copy_from_slice(x);
                o[0] = x[0] + x[1] * x[1];
            }))
        }
        "square" => {
            need_plane(name)?;
            Box::new(FnMap::new(dim, dim, |x: &[f64], o: &mut [f64]| {
                o.copy_from_slice(x);
                o[0] = x[0] * x[0];
            }))
        }
        "linear" => {
            let spec = matrix_spec.ok_or_else(|| Error::InvalidArgument("map `linear` needs --matrix".into()))?;
            let a = matrix(spec, "matrix", inputs)?;
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::InvalidArgument(format!("--matrix must be {dim}x{dim}")));
            }
            Box::new(FnMap::new(dim, dim, move |x: &[f64], o: &mut [f64]| {
                for (i, out) in o.iter_mut().enumerate() {
                    *out = (0..x.len()).map(|j| a[(i, j)] * x[j]).sum();
                }
            }))
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "`{other}` is neither a map file nor a named map (identity, shear, square, linear)"
            )))
        }
    })
}

/// Map of `R^dim` from a file or by name, sampled on its chart, together
/// with the closed form when there is one.
pub struct LoadedMap {
    pub sampled: SampledMap,
    pub exact: Option<Box<dyn MapSource>>,
}

/// `dim` is the required source dimension; named maps default to the plane.
pub fn map(args: &MapArgs, dim: Option<usize>, inputs: &mut Vec<String>) -> Result<LoadedMap> {
    if is_file_spec(&args.map) {
        inputs.push(args.map.clone());
        let (sampled, _) = SampledMap::read_json(Path::new(&args.map)).map_err(|e| match e {
            Error::Io(io) => Error::Malformed(format!("{}: {io}", args.map)),
            other => other,
        })?;
        if let Some(d) = dim.filter(|&d| d != sampled.chart().dim()) {
            return Err(Error::Structure(format!(
                "{}: map is defined on R^{}, expected R^{d}",
                args.map,
                sampled.chart().dim()
            )));
        }
        return Ok(LoadedMap { sampled, exact: None });
    }
    let dim = dim.unwrap_or(2);
    let exact = named_map(&args.map, dim, args.matrix.as_deref(), inputs)?;
    let chart = chart(args, dim)?;
    let sampled = SampledMap::from_source(chart, exact.as_ref())?;
    Ok(LoadedMap { sampled, exact: Some(exact) })
}

pub fn chart(args: &MapArgs, dim: usize) -> Result<Chart> {
    let range = vector_of_len(&args.domain, 2, "domain")?;
    let res = args.resolution.unwrap_or(if dim <= 2 { 65 } else { 9 });
    Chart::cube(dim, range[0], range[1], res)
}

/// `g_N` on `[0, 1]`.
pub fn weierstrass_map(terms: usize) -> impl MapSource {
    FnMap::new(1, 1, move |x: &[f64], o: &mut [f64]| o[0] = weierstrass(x[0], terms))
}

/// One column of numbers, one row per sample.
pub fn path_samples(path: &Path, inputs: &mut Vec<String>) -> Result<Vec<f64>> {
    inputs.push(path.display().to_string());
    let f = std::fs::File::open(path).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let rows = read_numeric_csv(std::io::BufReader::new(f), Some(1))
        .map_err(|e| Error::Malformed(format!("{}: {}", path.display(), strip(&e))))?;
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

/// Polynomial in `x1..x4` as a sum of signed monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    terms: Vec<(f64, [u32; 4])>,
}

impl Polynomial {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("polynomial {text:?}: {msg}"));
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad("empty"));
        }
        let mut terms = Vec::new();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1.0, &rest[1..]),
                b'-' => (-1.0, &rest[1..]),
                _ if terms.is_empty() => (1.0, rest),
                _ => return Err(bad("expected + or -")),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let (monomial, tail) = body.split_at(end);
            let mut coef = sign;
            let mut powers = [0u32; 4];
            for factor in monomial.split('*') {
                if let Some(var) = factor.strip_prefix('x') {
                    let (idx, pow) = match var.split_once('^') {
                        Some((i, p)) => (i, p.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                        None => (var, 1),
                    };
                    let i: usize = idx.parse().map_err(|_| bad("variables are x1..x4"))?;
                    if !(1..=4).contains(&i) {
                        return Err(bad("variables are x1..x4"));
                    }
                    powers[i - 1] += pow;
                } else {
                    coef *= factor.parse::<f64>().map_err(|_| bad(&format!("cannot read factor {factor:?}")))?;
                }
            }
            terms.push((coef, powers));
            rest = tail;
        }
        Ok(Self { terms })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, p)| c * p.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn field(self) -> impl MapSource {
        FnMap::new(4, 1, move |x: &[f64], o: &mut [f64]| o[0] = self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials() {
        let p = Polynomial::parse("x3 + x1*x2").unwrap();
        assert_eq!(p.eval(&[2.0, 3.0, 5.0, 7.0]), 11.0);
        let q = Polynomial::parse("-2*x1^2 - x4 + 0.5").unwrap();
        assert_eq!(q.eval(&[3.0, 0.0, 0.0, 1.0]), -18.5);
        assert!(Polynomial::parse("x5").is_err());
        assert!(Polynomial::parse("x1 ** 2").is_err());
    }

    #[test]
    fn vectors_and_ranges() {
        assert_eq!(vector("1, -2,0.5", "p").unwrap(), vec![1.0, -2.0, 0.5]);
        assert!(vector("1,a", "p").is_err());
        assert_eq!(int_range("4..10", "k").unwrap(), (4, 10));
        assert!(int_range("10..4", "k").is_err());
        let m = matrix("1,2;3,4", "m", &mut Vec::new()).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
    }
}
