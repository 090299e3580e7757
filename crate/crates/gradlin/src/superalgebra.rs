//! Free supercommutative polynomial algebras over the rationals.
//!
//! Coordinates carry a weight and a parity. Odd coordinates anticommute and
//! square to zero; a monomial is kept as a sorted list of coordinates with
//! exponents, and reordering a product into that form produces a Koszul sign.
//! Every polynomial is truncated at a total degree: multiplying past it drops
//! the excess terms and raises the `truncated` flag.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::weights::{AdditionalSymbol, Parity, Weight, WeightSystem};
use crate::Rational;

#[derive(Debug)]
struct CoordinateData {
    name: String,
    tags: Vec<AdditionalSymbol>,
    weight: Weight,
    parity: Parity,
}

/// A generator of a chart algebra.
///
/// Identified by a base name and the set of lifts applied to it. Ordered by
/// weight, then base name, then tag set.
#[derive(Clone)]
pub struct Coordinate(Arc<CoordinateData>);

impl Coordinate {
    pub fn new(name: impl Into<String>, mut tags: Vec<AdditionalSymbol>, weight: Weight, parity: Parity) -> Self {
        tags.sort();
        tags.dedup();
        Coordinate(Arc::new(CoordinateData {
            name: name.into(),
            tags,
            weight,
            parity,
        }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn tags(&self) -> &[AdditionalSymbol] {
        &self.0.tags
    }

    pub fn weight(&self) -> &Weight {
        &self.0.weight
    }

    pub fn parity(&self) -> Parity {
        self.0.parity
    }

    pub fn is_odd(&self) -> bool {
        self.0.parity.is_odd()
    }

    /// `name` followed by the tag list in brackets, when there are tags.
    pub fn label(&self) -> String {
        format!("{self}")
    }

    fn key(&self) -> (&Weight, &str, &[AdditionalSymbol]) {
        (&self.0.weight, &self.0.name, &self.0.tags)
    }
}

impl PartialEq for Coordinate {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.key() == other.key()
    }
}

impl Eq for Coordinate {}

impl Ord for Coordinate {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Coordinate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)?;
        if !self.0.tags.is_empty() {
            f.write_str("[")?;
            for (k, t) in self.0.tags.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A product of coordinates in canonical order. Odd coordinates have exponent 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Monomial(Vec<(Coordinate, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn from_coordinate(c: Coordinate) -> Self {
        Monomial(vec![(c, 1)])
    }

    /// Sort a raw product of coordinates. Returns the sign of the reordering,
    /// or `None` when an odd coordinate repeats.
    pub fn normalize(raw: &[Coordinate]) -> Option<(Monomial, bool)> {
        let mut swaps = 0usize;
        for (k, a) in raw.iter().enumerate() {
            if !a.is_odd() {
                continue;
            }
            for b in raw[k + 1..].iter().filter(|b| b.is_odd()) {
                match a.cmp(b) {
                    Ordering::Greater => swaps += 1,
                    Ordering::Equal => return None,
                    Ordering::Less => {}
                }
            }
        }
        let mut sorted = raw.to_vec();
        sorted.sort();
        let mut factors: Vec<(Coordinate, u32)> = Vec::new();
        for c in sorted {
            match factors.last_mut() {
                Some((last, e)) if *last == c => *e += 1,
                _ => factors.push((c, 1)),
            }
        }
        Some((Monomial(factors), swaps % 2 == 1))
    }

    pub fn factors(&self) -> &[(Coordinate, u32)] {
        &self.0
    }

    /// The first `k` factors, with `extra` more copies of factor `k` when it is even.
    pub fn prefix(&self, k: usize, extra: u32) -> Monomial {
        let mut v = self.0[..k].to_vec();
        if extra > 0 {
            v.push((self.0[k].0.clone(), extra));
        }
        Monomial(v)
    }

    /// Factors after position `k`.
    pub fn suffix(&self, k: usize) -> Monomial {
        Monomial(self.0[k + 1..].to_vec())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn weight(&self) -> Weight {
        Weight::from_terms(
            self.0
                .iter()
                .flat_map(|(c, e)| c.weight().terms().iter().map(move |&(s, k)| (s, k * *e as i64))),
        )
    }

    pub fn parity(&self) -> Parity {
        Parity::from_bit(self.0.iter().filter(|(c, _)| c.is_odd()).count() as u8 % 2)
    }

    pub fn contains(&self, c: &Coordinate) -> bool {
        self.0.iter().any(|(d, _)| d == c)
    }

    /// Factors with multiplicity, in order.
    pub fn occurrences(&self) -> Vec<Coordinate> {
        self.0
            .iter()
            .flat_map(|(c, e)| core::iter::repeat_n(c.clone(), *e as usize))
            .collect()
    }

    /// Product with the sign from moving `other` into place, or `None` if it vanishes.
    pub fn mul(&self, other: &Monomial) -> Option<(Monomial, bool)> {
        let mut swaps = 0usize;
        for (b, _) in other.0.iter().filter(|(b, _)| b.is_odd()) {
            for (a, _) in self.0.iter().filter(|(a, _)| a.is_odd()) {
                match a.cmp(b) {
                    Ordering::Greater => swaps += 1,
                    Ordering::Equal => return None,
                    Ordering::Less => {}
                }
            }
        }
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Some((Monomial(out), swaps % 2 == 1))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, (c, e)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" * ")?;
            }
            write!(f, "{c}")?;
            if *e != 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Rational linear combination of monomials of total degree at most `trunc`.
#[derive(Clone)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
    trunc: u32,
    truncated: bool,
}

impl Polynomial {
    pub fn zero(trunc: u32) -> Self {
        Polynomial {
            terms: BTreeMap::new(),
            trunc,
            truncated: false,
        }
    }

    pub fn one(trunc: u32) -> Self {
        Polynomial::constant(Rational::one(), trunc)
    }

    pub fn constant(c: Rational, trunc: u32) -> Self {
        Polynomial::monomial(Monomial::one(), c, trunc)
    }

    pub fn coordinate(c: &Coordinate, trunc: u32) -> Self {
        Polynomial::monomial(Monomial::from_coordinate(c.clone()), Rational::one(), trunc)
    }

    pub fn monomial(m: Monomial, c: Rational, trunc: u32) -> Self {
        let mut p = Polynomial::zero(trunc);
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>, trunc: u32) -> Self {
        let mut p = Polynomial::zero(trunc);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Add `c * m`, dropping it past the truncation degree.
    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        if m.degree() > self.trunc {
            self.truncated = true;
            return;
        }
        match self.terms.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    /// Whether some nonzero term was dropped by truncation while building this polynomial.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn mark_truncated(&mut self, flag: bool) {
        self.truncated |= flag;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&Monomial::one())
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).min()
    }

    /// Weights of the monomials that occur.
    pub fn weights(&self) -> BTreeSet<Weight> {
        self.terms.keys().map(Monomial::weight).collect()
    }

    /// Zero counts as homogeneous of every weight.
    pub fn is_homogeneous_of(&self, w: &Weight) -> bool {
        self.terms.keys().all(|m| m.weight() == *w)
    }

    pub fn parity(&self) -> Option<Parity> {
        let mut ps = self.terms.keys().map(Monomial::parity);
        let first = ps.next()?;
        ps.all(|p| p == first).then_some(first)
    }

    pub fn homogeneous_component(&self, w: &Weight) -> Polynomial {
        self.filter_terms(|m| m.weight() == *w)
    }

    /// Keep the terms whose monomial satisfies `keep`.
    pub fn filter_terms(&self, keep: impl Fn(&Monomial) -> bool) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
            trunc: self.trunc,
            truncated: self.truncated,
        }
    }

    /// Drop every monomial containing a coordinate rejected by `keep`.
    pub fn restrict(&self, keep: impl Fn(&Coordinate) -> bool) -> Polynomial {
        self.filter_terms(|m| m.factors().iter().all(|(c, _)| keep(c)))
    }

    pub fn coordinates(&self) -> BTreeSet<Coordinate> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(c, _)| c.clone()))
            .collect()
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            let mut z = Polynomial::zero(self.trunc);
            z.truncated = self.truncated;
            return z;
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
            trunc: self.trunc,
            truncated: self.truncated,
        }
    }

    /// Same terms with a new truncation degree.
    pub fn with_trunc(&self, trunc: u32) -> Polynomial {
        let mut p = Polynomial::zero(trunc);
        p.truncated = self.truncated;
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    fn combine(&self, other: &Polynomial, negate: bool) -> Polynomial {
        let mut out = self.with_trunc(self.trunc.min(other.trunc));
        out.truncated |= other.truncated;
        for (m, c) in &other.terms {
            out.add_term(m.clone(), if negate { -c.clone() } else { c.clone() });
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let trunc = self.trunc.min(other.trunc);
        let mut out = Polynomial::zero(trunc);
        out.truncated = self.truncated || other.truncated;
        for (a, ca) in &self.terms {
            let da = a.degree();
            for (b, cb) in &other.terms {
                if let Some((m, neg)) = a.mul(b) {
                    if da + b.degree() > trunc {
                        out.truncated = true;
                        continue;
                    }
                    let c = ca * cb;
                    out.add_term(m, if neg { -c } else { c });
                }
            }
        }
        out
    }
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Eq for Polynomial {}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, false)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, true)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c} * {m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Generators of a chart algebra, their weight system and the truncation degree.
#[derive(Clone, Debug)]
pub struct Chart {
    system: WeightSystem,
    coords: Vec<Coordinate>,
    index: BTreeMap<(String, Vec<AdditionalSymbol>), usize>,
    trunc: u32,
}

impl Chart {
    /// Every coordinate weight must lie in `system` and fix the coordinate parity.
    pub fn new(system: WeightSystem, mut coords: Vec<Coordinate>, trunc: u32) -> Result<Chart> {
        coords.sort();
        let mut index = BTreeMap::new();
        for (k, c) in coords.iter().enumerate() {
            if !system.contains(c.weight()) {
                return Err(Error::NotInSystem(c.weight().clone()));
            }
            if system.parity(c.weight()) != c.parity() {
                return Err(Error::ParityMismatch(c.label()));
            }
            let key = (String::from(c.name()), c.tags().to_vec());
            if index.insert(key, k).is_some() {
                return Err(Error::InvalidSystem(format!("duplicate coordinate {c}")));
            }
        }
        Ok(Chart {
            system,
            coords,
            index,
            trunc,
        })
    }

    pub fn system(&self) -> &WeightSystem {
        &self.system
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn lookup(&self, name: &str, tags: &[AdditionalSymbol]) -> Option<&Coordinate> {
        self.index
            .get(&(String::from(name), tags.to_vec()))
            .map(|&k| &self.coords[k])
    }

    pub fn contains(&self, c: &Coordinate) -> bool {
        self.coords.binary_search(c).is_ok()
    }

    /// Whether every coordinate of `p` is a generator of this chart.
    pub fn owns(&self, p: &Polynomial) -> bool {
        p.coordinates().iter().all(|c| self.contains(c))
    }

    pub fn of_weight<'a>(&'a self, w: &'a Weight) -> impl Iterator<Item = &'a Coordinate> + 'a {
        self.coords.iter().filter(move |c| c.weight() == w)
    }

    /// Number of generators of each weight that occurs.
    pub fn dims(&self) -> BTreeMap<Weight, usize> {
        let mut out = BTreeMap::new();
        for c in &self.coords {
            *out.entry(c.weight().clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coords.iter().all(|c| c.weight().is_nonnegative())
    }

    pub fn generator(&self, c: &Coordinate) -> Polynomial {
        Polynomial::coordinate(c, self.trunc)
    }

    pub fn zero(&self) -> Polynomial {
        Polynomial::zero(self.trunc)
    }

    pub fn one(&self) -> Polynomial {
        Polynomial::one(self.trunc)
    }

    pub fn monomial(&self, m: Monomial) -> Polynomial {
        Polynomial::monomial(m, Rational::one(), self.trunc)
    }

    /// Subchart on the coordinates accepted by `keep`, over `system`.
    pub fn restrict(&self, system: WeightSystem, keep: impl Fn(&Coordinate) -> bool) -> Result<Chart> {
        Chart::new(
            system,
            self.coords.iter().filter(|c| keep(c)).cloned().collect(),
            self.trunc,
        )
    }

    /// Monomials of weight `w` and degree at most the truncation degree.
    pub fn component_basis(&self, w: &Weight) -> Vec<Monomial> {
        self.component_basis_up_to(w, self.trunc)
    }

    /// Monomials of weight `w` and degree at most `max_degree`, in canonical order.
    pub fn component_basis_up_to(&self, w: &Weight, max_degree: u32) -> Vec<Monomial> {
        let prune = self.is_nonnegative();
        if prune && !w.is_nonnegative() {
            return Vec::new();
        }
        let candidates: Vec<&Coordinate> = self
            .coords
            .iter()
            .filter(|c| !prune || c.weight().is_below(w))
            .collect();
        let mut out = Vec::new();
        let mut current = Vec::new();
        enumerate(&candidates, 0, w.clone(), max_degree, prune, &mut current, &mut out);
        out.sort();
        out
    }
}

fn enumerate(
    cands: &[&Coordinate],
    k: usize,
    remaining: Weight,
    degree_left: u32,
    prune: bool,
    current: &mut Vec<(Coordinate, u32)>,
    out: &mut Vec<Monomial>,
) {
    if k == cands.len() {
        if remaining.is_zero() {
            out.push(Monomial(current.clone()));
        }
        return;
    }
    if prune && remaining.is_zero() && !cands[k].weight().is_zero() {
        enumerate(cands, k + 1, remaining, degree_left, prune, current, out);
        return;
    }
    let c = cands[k];
    let max_e = if c.is_odd() { degree_left.min(1) } else { degree_left };
    enumerate(cands, k + 1, remaining.clone(), degree_left, prune, current, out);
    let mut rem = remaining;
    for e in 1..=max_e {
        rem = &rem - c.weight();
        if prune && !rem.is_nonnegative() {
            break;
        }
        current.push((c.clone(), e));
        enumerate(cands, k + 1, rem.clone(), degree_left - e, prune, current, out);
        current.pop();
    }
}

/// Data describing a chart of a graded manifold: a weight system, the number of
/// generators of each nonzero weight, the number of weight-zero coordinates and
/// the truncation degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartLayout {
    pub system: WeightSystem,
    pub base_dim: usize,
    pub dims: BTreeMap<Weight, usize>,
    pub trunc: u32,
}

impl ChartLayout {
    /// Weights absent from `dims` get dimension zero.
    pub fn new(system: WeightSystem, base_dim: usize, dims: BTreeMap<Weight, usize>, trunc: u32) -> Result<Self> {
        if let Some(w) = dims.keys().find(|w| !system.contains(w) || w.is_zero()) {
            return Err(Error::NotInSystem(w.clone()));
        }
        let dims = system
            .elements()
            .iter()
            .filter(|w| !w.is_zero())
            .map(|w| (w.clone(), dims.get(w).copied().unwrap_or(0)))
            .collect();
        Ok(ChartLayout {
            system,
            base_dim,
            dims,
            trunc,
        })
    }

    /// One weight-zero coordinate and `dim` generators of every nonzero weight.
    pub fn uniform(system: WeightSystem, dim: usize, trunc: u32) -> Self {
        let dims = system
            .elements()
            .iter()
            .filter(|w| !w.is_zero())
            .map(|w| (w.clone(), dim))
            .collect();
        ChartLayout {
            system,
            base_dim: 1,
            dims,
            trunc,
        }
    }

    pub fn dim(&self, w: &Weight) -> usize {
        if w.is_zero() {
            self.base_dim
        } else {
            self.dims.get(w).copied().unwrap_or(0)
        }
    }

    /// Standard coordinates: `x` or `x1..xm` in weight zero, `xi<w>` or `xi<w>_k` otherwise.
    pub fn chart(&self) -> Result<Chart> {
        let mut coords = Vec::new();
        for w in self.system.elements() {
            let dim = self.dim(w);
            let stem = if w.is_zero() {
                String::from("x")
            } else {
                format!("xi<{w}>")
            };
            for k in 1..=dim {
                let name = match (dim, w.is_zero()) {
                    (1, _) => stem.clone(),
                    (_, true) => format!("{stem}{k}"),
                    _ => format!("{stem}_{k}"),
                };
                coords.push(Coordinate::new(name, Vec::new(), w.clone(), self.system.parity(w)));
            }
        }
        Chart::new(self.system.clone(), coords, self.trunc)
    }
}
