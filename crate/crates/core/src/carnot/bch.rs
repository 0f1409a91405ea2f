//! Dynkin's form of the Baker–Campbell–Hausdorff series, truncated at a
//! fixed degree and collected by right-nested bracket words.

use std::collections::BTreeMap;

use super::algebra::StratifiedAlgebra;

/// One collected term: `coeff * [w_1, [w_2, ... [w_{k-1}, w_k]]]` where a
/// letter is `false` for `X` and `true` for `Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct BchTerm {
    pub coeff: f64,
    pub word: Vec<bool>,
}

impl BchTerm {
    pub fn degree(&self) -> usize {
        self.word.len()
    }

    /// Number of `Y` letters.
    pub fn y_count(&self) -> usize {
        self.word.iter().filter(|&&l| l).count()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Collected Dynkin terms of total degree at most `max_degree`.
pub fn dynkin_terms(max_degree: usize) -> Vec<BchTerm> {
    let mut collected: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    let mut pairs = Vec::new();
    for n in 1..=max_degree {
        expand(n, max_degree, &mut pairs, &mut collected);
    }
    collected
        .into_iter()
        .filter(|(word, c)| c.abs() > 1e-15 && !vanishes(word))
        .map(|(word, coeff)| BchTerm { coeff, word })
        .collect()
}

fn vanishes(word: &[bool]) -> bool {
    let k = word.len();
    k >= 2 && word[k - 1] == word[k - 2]
}

fn expand(
    n: usize,
    budget: usize,
    pairs: &mut Vec<(usize, usize)>,
    out: &mut BTreeMap<Vec<bool>, f64>,
) {
    if pairs.len() == n {
        let degree: usize = pairs.iter().map(|&(r, s)| r + s).sum();
        let denom: f64 = pairs.iter().map(|&(r, s)| factorial(r) * factorial(s)).product();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let coeff = sign / (n as f64) / (degree as f64) / denom;
        let mut word = Vec::with_capacity(degree);
        for &(r, s) in pairs.iter() {
            word.extend(std::iter::repeat_n(false, r));
            word.extend(std::iter::repeat_n(true, s));
        }
        *out.entry(word).or_insert(0.0) += coeff;
        return;
    }
    let used: usize = pairs.iter().map(|&(r, s)| r + s).sum();
    let remaining_slots = n - pairs.len() - 1;
    for total in 1..=(budget - used - remaining_slots) {
        for r in 0..=total {
            pairs.push((r, total - r));
            expand(n, budget, pairs, out);
            pairs.pop();
        }
    }
}

/// Evaluates `sum coeff [word](x, y)` over the given terms.
pub fn evaluate(algebra: &StratifiedAlgebra, terms: &[BchTerm], x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = algebra.total_dim();
    let mut out = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for term in terms {
        let letters = &term.word;
        let last = letters[letters.len() - 1];
        acc.copy_from_slice(if last { y } else { x });
        for &letter in letters[..letters.len() - 1].iter().rev() {
            algebra.bracket_into(if letter { y } else { x }, &acc, &mut tmp);
            std::mem::swap(&mut acc, &mut tmp);
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o += term.coeff * a;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeff(terms: &[BchTerm], word: &str) -> f64 {
        let w: Vec<bool> = word.chars().map(|c| c == 'Y').collect();
        terms.iter().find(|t| t.word == w).map(|t| t.coeff).unwrap_or(0.0)
    }

    #[test]
    fn low_degree_coefficients() {
        let t = dynkin_terms(3);
        assert_eq!(coeff(&t, "X"), 1.0);
        assert_eq!(coeff(&t, "Y"), 1.0);
        // XY and YX both encode [X,Y] up to sign; their net must be 1/2.
        assert!((coeff(&t, "XY") - coeff(&t, "YX") - 0.5).abs() < 1e-15);
        // degree 3: 1/12 [X,[X,Y]] - 1/12 [Y,[X,Y]]
        let xxy = coeff(&t, "XXY") - coeff(&t, "XYX");
        let yxy = coeff(&t, "YXY") - coeff(&t, "YYX");
        assert!((xxy - 1.0 / 12.0).abs() < 1e-15, "{xxy}");
        assert!((yxy + 1.0 / 12.0).abs() < 1e-15, "{yxy}");
    }

    #[test]
    fn degree_four_term() {
        // -1/24 [Y,[X,[X,Y]]] with X = X1 + X2, Y = X1 in filiform:4 gives X5 / 24
        let alg = StratifiedAlgebra::filiform(4).unwrap();
        let t: Vec<_> = dynkin_terms(4).into_iter().filter(|t| t.degree() == 4).collect();
        let v = evaluate(&alg, &t, &[1.0, 1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let expected = [0.0, 0.0, 0.0, 0.0, 1.0 / 24.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{v:?}");
        }
    }
}
