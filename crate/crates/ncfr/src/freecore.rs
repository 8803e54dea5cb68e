//! Words over `d` letters and truncated word-indexed series.
//!
//! Letters are `1..=d`. Everything is enumerated in degree-lex order:
//! shorter words first, then lexicographic on letters.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};

/// Largest number of coefficients a dense series may hold.
pub const SERIES_CAP: usize = 1 << 26;

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(j: u8) -> Self {
        Word(vec![j])
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reverse(&self) -> Word {
        reverse(self)
    }

    pub fn concat(&self, other: &Word) -> Word {
        concat(self, other)
    }

    /// Checks that every letter lies in `1..=d`.
    pub fn check(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l == 0 || l as usize > d) {
            Some(l) => Err(NcError::InvalidInput(format!("letter {l} outside 1..={d}"))),
            None => Ok(()),
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Vec<u8>> for Word {
    fn from(v: Vec<u8>) -> Self {
        Word(v)
    }
}

impl From<&[u8]> for Word {
    fn from(v: &[u8]) -> Self {
        Word(v.to_vec())
    }
}

pub fn reverse(w: &Word) -> Word {
    Word(w.0.iter().rev().copied().collect())
}

pub fn concat(u: &Word, v: &Word) -> Word {
    let mut out = Vec::with_capacity(u.len() + v.len());
    out.extend_from_slice(&u.0);
    out.extend_from_slice(&v.0);
    Word(out)
}

/// Number of words of length exactly `k`.
pub fn level_size(d: usize, k: usize) -> Option<usize> {
    d.checked_pow(k as u32)
}

/// Number of words of length `<= n`.
pub fn num_words(d: usize, n: usize) -> Option<usize> {
    let mut total = 0usize;
    let mut level = 1usize;
    for k in 0..=n {
        total = total.checked_add(level)?;
        if k < n {
            level = level.checked_mul(d)?;
        }
    }
    Some(total)
}

/// Index of the first word of length `k`.
pub fn level_offset(d: usize, k: usize) -> usize {
    if k == 0 {
        0
    } else {
        num_words(d, k - 1).expect("level offset overflow")
    }
}

/// Position of `w` in the degree-lex enumeration.
pub fn word_index(w: &Word, d: usize) -> usize {
    let mut local = 0usize;
    for &l in &w.0 {
        local = local * d + (l as usize - 1);
    }
    level_offset(d, w.len()) + local
}

/// Inverse of [`word_index`].
pub fn word_at(index: usize, d: usize) -> Word {
    let mut k = 0;
    let mut start = 0usize;
    let mut size = 1usize;
    while index >= start + size {
        start += size;
        size *= d;
        k += 1;
    }
    let mut local = index - start;
    let mut letters = vec![0u8; k];
    for slot in letters.iter_mut().rev() {
        *slot = (local % d) as u8 + 1;
        local /= d;
    }
    Word(letters)
}

/// All words of length `<= n` in degree-lex order.
pub fn words_upto(d: usize, n: usize) -> Vec<Word> {
    let total = num_words(d, n).expect("word count overflow");
    (0..total).map(|i| word_at(i, d)).collect()
}

/// Truncated series: coefficients of every word with `|w| <= order`, stored densely.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSeries {
    d: usize,
    order: usize,
    coeffs: Vec<Complex64>,
}

impl FreeSeries {
    pub fn zeros(d: usize, order: usize) -> Result<Self> {
        if d == 0 {
            return Err(NcError::InvalidInput("alphabet size must be positive".into()));
        }
        let len = num_words(d, order)
            .filter(|&n| n <= SERIES_CAP)
            .ok_or(NcError::CapExceeded { entries: usize::MAX })?;
        Ok(FreeSeries { d, order, coeffs: vec![Complex64::new(0.0, 0.0); len] })
    }

    /// The unit series `δ_∅`.
    pub fn unit(d: usize, order: usize) -> Result<Self> {
        let mut s = Self::zeros(d, order)?;
        s.coeffs[0] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_pairs(d: usize, order: usize, pairs: &[(Word, Complex64)]) -> Result<Self> {
        let mut s = Self::zeros(d, order)?;
        for (w, c) in pairs {
            s.set(w, *c)?;
        }
        Ok(s)
    }

    /// Builds a series by evaluating `f` on every word up to `order`.
    pub fn from_fn(d: usize, order: usize, mut f: impl FnMut(&Word) -> Complex64) -> Result<Self> {
        let mut s = Self::zeros(d, order)?;
        for (i, c) in s.coeffs.iter_mut().enumerate() {
            *c = f(&word_at(i, d));
        }
        Ok(s)
    }

    /// Wraps a dense degree-lex coefficient vector.
    pub fn from_dense(d: usize, order: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let expected = num_words(d, order).unwrap_or(usize::MAX);
        if coeffs.len() != expected {
            return Err(NcError::DimensionMismatch(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(FreeSeries { d, order, coeffs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Dense coefficients in degree-lex order.
    pub fn dense(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, w: &Word) -> Result<Complex64> {
        series_get(self, w)
    }

    /// Coefficient by degree-lex index.
    pub fn at(&self, index: usize) -> Complex64 {
        self.coeffs[index]
    }

    pub fn set(&mut self, w: &Word, c: Complex64) -> Result<()> {
        w.check(self.d)?;
        if w.len() > self.order {
            return Err(NcError::OrderExceeded { requested: w.len(), available: self.order });
        }
        let i = word_index(w, self.d);
        self.coeffs[i] = c;
        Ok(())
    }

    /// Nonzero coefficients in degree-lex order.
    pub fn nonzero(&self) -> impl Iterator<Item = (Word, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(move |(i, c)| (word_at(i, self.d), *c))
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order {
            return Err(NcError::OrderExceeded { requested: order, available: self.order });
        }
        let len = num_words(self.d, order).unwrap();
        Ok(FreeSeries { d: self.d, order, coeffs: self.coeffs[..len].to_vec() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        FreeSeries { coeffs: self.coeffs.iter().map(|c| c * lambda).collect(), ..self.clone() }
    }

    pub fn conj(&self) -> Self {
        FreeSeries { coeffs: self.coeffs.iter().map(|c| c.conj()).collect(), ..self.clone() }
    }

    /// The series `fᵗ` with `fᵗ_w = f_{reverse(w)}`.
    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        for (i, c) in self.coeffs.iter().enumerate() {
            let w = word_at(i, self.d);
            out.coeffs[word_index(&w.reverse(), self.d)] = *c;
        }
        out
    }

    /// Sum of `|f_w|^2` over words of length exactly `k`.
    pub fn level_energy(&self, k: usize) -> f64 {
        if k > self.order {
            return 0.0;
        }
        let start = level_offset(self.d, k);
        let end = start + level_size(self.d, k).unwrap();
        self.coeffs[start..end].iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest coefficient difference over words of length `<= upto`.
    pub fn max_abs_diff(&self, other: &Self, upto: usize) -> Result<f64> {
        if self.d != other.d {
            return Err(NcError::DimensionMismatch("alphabet sizes differ".into()));
        }
        let n = upto.min(self.order).min(other.order);
        if n < upto {
            return Err(NcError::OrderExceeded { requested: upto, available: n });
        }
        let len = num_words(self.d, n).unwrap();
        Ok((0..len).map(|i| (self.coeffs[i] - other.coeffs[i]).norm()).fold(0.0, f64::max))
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.d != other.d {
            return Err(NcError::DimensionMismatch("alphabet sizes differ".into()));
        }
        let order = self.order.min(other.order);
        let len = num_words(self.d, order).unwrap();
        let coeffs = (0..len).map(|i| f(self.coeffs[i], other.coeffs[i])).collect();
        Ok(FreeSeries { d: self.d, order, coeffs })
    }
}

pub fn series_get(f: &FreeSeries, w: &Word) -> Result<Complex64> {
    w.check(f.d)?;
    if w.len() > f.order {
        return Err(NcError::OrderExceeded { requested: w.len(), available: f.order });
    }
    Ok(f.coeffs[word_index(w, f.d)])
}

/// Truncated product with `(fg)_w = Σ_{uv=w} f_u g_v`.
pub fn series_mul(f: &FreeSeries, g: &FreeSeries, n: usize) -> Result<FreeSeries> {
    if f.d != g.d {
        return Err(NcError::DimensionMismatch("alphabet sizes differ".into()));
    }
    let avail = f.order.min(g.order);
    if n > avail {
        return Err(NcError::OrderExceeded { requested: n, available: avail });
    }
    let d = f.d;
    let mut out = FreeSeries::zeros(d, n)?;
    for ku in 0..=n {
        let u0 = level_offset(d, ku);
        let usz = level_size(d, ku).unwrap();
        for iu in 0..usz {
            let fu = f.coeffs[u0 + iu];
            if fu == Complex64::new(0.0, 0.0) {
                continue;
            }
            for kv in 0..=(n - ku) {
                let v0 = level_offset(d, kv);
                let vsz = level_size(d, kv).unwrap();
                let base = level_offset(d, ku + kv) + iu * vsz;
                for iv in 0..vsz {
                    out.coeffs[base + iv] += fu * g.coeffs[v0 + iv];
                }
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CoeffRecord {
    word: Vec<u8>,
    value: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    d: usize,
    order: usize,
    coeffs: Vec<CoeffRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measure: Option<bool>,
}

impl FreeSeries {
    /// JSON value in the series schema; `measure` adds the measure flag.
    pub fn to_json(&self, measure: bool) -> serde_json::Value {
        let js = SeriesJson {
            d: self.d,
            order: self.order,
            coeffs: self
                .nonzero()
                .map(|(w, c)| CoeffRecord { word: w.0, value: [c.re, c.im] })
                .collect(),
            measure: measure.then_some(true),
        };
        serde_json::to_value(js).expect("series serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let js: SeriesJson =
            serde_json::from_value(v.clone()).map_err(|e| NcError::InvalidInput(e.to_string()))?;
        let mut s = FreeSeries::zeros(js.d, js.order)?;
        for r in js.coeffs {
            s.set(&Word(r.word), Complex64::new(r.value[0], r.value[1]))?;
        }
        Ok(s)
    }
}

impl Serialize for FreeSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json(false).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreeSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        FreeSeries::from_json(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        for d in 1..4 {
            for i in 0..num_words(d, 4).unwrap() {
                assert_eq!(word_index(&word_at(i, d), d), i);
            }
        }
    }

    #[test]
    fn degree_lex_matches_ord() {
        let ws = words_upto(2, 3);
        assert!(ws.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(ws[3], Word::new(vec![1, 1]));
    }
}
