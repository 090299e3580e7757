//! Weights, weight systems and the combinatorics of linearization.
//!
//! A weight is an integer combination of basis symbols: the basic weights
//! `a<i>` of a system and, after linearization, the additional weights
//! `b<j>_<i>` paired with `a<i>`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum Parity {
    #[default]
    Even,
    Odd,
}

impl Parity {
    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

impl Add for Parity {
    type Output = Parity;

    fn add(self, rhs: Parity) -> Parity {
        if self == rhs {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// The additional weight `b<j>_<i>`, paired with the basic weight `a<i>`.
///
/// Ordered by `(i, j)`, which is the order in which lifts are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AdditionalSymbol {
    pub j: u32,
    pub i: u32,
}

impl AdditionalSymbol {
    pub fn new(j: u32, i: u32) -> Self {
        assert!(j >= 2 && i >= 1, "additional weight b{j}_{i} out of range");
        AdditionalSymbol { j, i }
    }

    pub fn paired_basic(self) -> BasisSymbol {
        BasisSymbol::Basic(self.i)
    }

    /// Weight shift `b<j>_<i> - a<i>` carried by the matching differential.
    pub fn shift(self) -> Weight {
        Weight::from_terms([(BasisSymbol::Additional(self), 1), (self.paired_basic(), -1)])
    }
}

impl Ord for AdditionalSymbol {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.i, self.j).cmp(&(other.i, other.j))
    }
}

impl PartialOrd for AdditionalSymbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AdditionalSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}_{}", self.j, self.i)
    }
}

/// A basis vector of the weight lattice. Basic symbols precede additional ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisSymbol {
    Basic(u32),
    Additional(AdditionalSymbol),
}

impl fmt::Display for BasisSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisSymbol::Basic(i) => write!(f, "a{i}"),
            BasisSymbol::Additional(s) => s.fmt(f),
        }
    }
}

/// Finite integer combination of basis symbols. Zero coefficients are never stored.
///
/// The total order compares coefficients starting from the last basis symbol,
/// so `0 < a1 < 2a1 < b2_1 - a1 < b2_1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Weight(Vec<(BasisSymbol, i64)>);

impl Weight {
    pub fn zero() -> Self {
        Weight(Vec::new())
    }

    pub fn basic(i: u32) -> Self {
        Weight::symbol(BasisSymbol::Basic(i))
    }

    pub fn additional(s: AdditionalSymbol) -> Self {
        Weight::symbol(BasisSymbol::Additional(s))
    }

    pub fn symbol(s: BasisSymbol) -> Self {
        Weight(vec![(s, 1)])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (BasisSymbol, i64)>) -> Self {
        let mut acc: BTreeMap<BasisSymbol, i64> = BTreeMap::new();
        for (s, c) in terms {
            *acc.entry(s).or_insert(0) += c;
        }
        Weight(acc.into_iter().filter(|&(_, c)| c != 0).collect())
    }

    /// Weight with coefficient `coeffs[k]` on `a<k+1>`.
    pub fn from_basic_coefficients(coeffs: &[i64]) -> Self {
        Weight::from_terms(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (BasisSymbol::Basic(k as u32 + 1), c)),
        )
    }

    /// Weight with coefficient `coeffs[k]` on `basis[k]`.
    pub fn from_dense(basis: &[BasisSymbol], coeffs: &[i64]) -> Self {
        Weight::from_terms(basis.iter().copied().zip(coeffs.iter().copied()))
    }

    pub fn dense(&self, basis: &[BasisSymbol]) -> Vec<i64> {
        basis.iter().map(|&s| self.coefficient(s)).collect()
    }

    pub fn terms(&self) -> &[(BasisSymbol, i64)] {
        &self.0
    }

    pub fn coefficient(&self, s: BasisSymbol) -> i64 {
        self.0
            .binary_search_by(|(t, _)| t.cmp(&s))
            .map(|k| self.0[k].1)
            .unwrap_or(0)
    }

    pub fn basic_coefficient(&self, i: u32) -> i64 {
        self.coefficient(BasisSymbol::Basic(i))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&(_, c)| c >= 0)
    }

    pub fn is_multiplicity_free(&self) -> bool {
        self.0.iter().all(|&(_, c)| c == 0 || c == 1)
    }

    /// Coefficientwise comparison.
    pub fn is_below(&self, other: &Weight) -> bool {
        (other - self).is_nonnegative()
    }

    pub fn scale(&self, k: i64) -> Weight {
        Weight::from_terms(self.0.iter().map(|&(s, c)| (s, c * k)))
    }

    /// Image under the differential of weight `b<j>_<i> - a<i>`.
    pub fn shifted(&self, lift: AdditionalSymbol) -> Weight {
        self + &lift.shift()
    }

    pub fn symbols(&self) -> impl Iterator<Item = BasisSymbol> + '_ {
        self.0.iter().map(|&(s, _)| s)
    }

    /// Replace every `b<j>_<i>` by `a<i>`.
    pub fn project_additional(&self) -> Weight {
        Weight::from_terms(self.0.iter().map(|&(s, c)| match s {
            BasisSymbol::Additional(a) => (a.paired_basic(), c),
            b => (b, c),
        }))
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.0.iter().rev().peekable();
        let mut b = other.0.iter().rev().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(&&(_, x)), None) => return x.cmp(&0),
                (None, Some(&&(_, y))) => return 0.cmp(&y),
                (Some(&&(sa, x)), Some(&&(sb, y))) => match sa.cmp(&sb) {
                    Ordering::Greater => return x.cmp(&0),
                    Ordering::Less => return 0.cmp(&y),
                    Ordering::Equal => {
                        if x != y {
                            return x.cmp(&y);
                        }
                        a.next();
                        b.next();
                    }
                },
            }
        }
    }
}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Weight {
    type Output = Weight;

    fn add(self, rhs: &Weight) -> Weight {
        Weight::from_terms(self.0.iter().chain(rhs.0.iter()).copied())
    }
}

impl Add for Weight {
    type Output = Weight;

    fn add(self, rhs: Weight) -> Weight {
        &self + &rhs
    }
}

impl Sub for &Weight {
    type Output = Weight;

    fn sub(self, rhs: &Weight) -> Weight {
        Weight::from_terms(self.0.iter().copied().chain(rhs.0.iter().map(|&(s, c)| (s, -c))))
    }
}

impl Sub for Weight {
    type Output = Weight;

    fn sub(self, rhs: Weight) -> Weight {
        &self - &rhs
    }
}

impl Neg for &Weight {
    type Output = Weight;

    fn neg(self) -> Weight {
        self.scale(-1)
    }
}

impl Neg for Weight {
    type Output = Weight;

    fn neg(self) -> Weight {
        self.scale(-1)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        for (k, &(s, c)) in self.0.iter().enumerate() {
            let sign = if c < 0 {
                "-"
            } else if k > 0 {
                "+"
            } else {
                ""
            };
            f.write_str(sign)?;
            if c.abs() != 1 {
                write!(f, "{}", c.abs())?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Outcome of checking the defining conditions of a weight system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub rank: usize,
    pub contains_zero: bool,
    pub missing_basis: Vec<BasisSymbol>,
    pub negative: Vec<Weight>,
    pub multiplicity_free: bool,
}

impl ValidationReport {
    /// Numbers of the violated conditions. Finiteness (1) always holds for a stored set.
    pub fn violated(&self) -> Vec<u8> {
        let mut out = Vec::new();
        if !self.contains_zero || !self.missing_basis.is_empty() {
            out.push(2);
        }
        if !self.negative.is_empty() {
            out.push(3);
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violated().is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let violated = self.violated();
        if violated.is_empty() {
            let mf = if self.multiplicity_free {
                "multiplicity-free"
            } else {
                "not multiplicity-free"
            };
            return write!(f, "valid, rank {}, {mf}", self.rank);
        }
        f.write_str("invalid:")?;
        for (k, c) in violated.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, " condition {c} violated")?;
            match c {
                2 => {
                    let mut missing: Vec<String> = self.missing_basis.iter().map(|s| format!("{s}")).collect();
                    if !self.contains_zero {
                        missing.insert(0, String::from("0"));
                    }
                    write!(f, " (missing {})", missing.join(", "))?;
                }
                _ => {
                    let neg: Vec<String> = self.negative.iter().map(|w| format!("{w}")).collect();
                    write!(f, " (negative {})", neg.join(", "))?;
                }
            }
        }
        Ok(())
    }
}

/// Result of reversing the fiber directions of a system relative to a base subsystem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dualization {
    pub system: WeightSystem,
    /// Basic weight whose coefficient separates the fiber from the base.
    pub direction: BasisSymbol,
    /// A lattice basis in which the dual system is expressed; index `k` replaces `direction`.
    pub suggested_basis: Vec<Weight>,
}

/// A finite set of weights over a fixed basis together with the parities of the basic weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSystem {
    parities: Vec<Parity>,
    additional: Vec<AdditionalSymbol>,
    elements: BTreeSet<Weight>,
}

impl WeightSystem {
    /// System over the basic weights `a1..ar`, with `r = parities.len()`.
    pub fn new(parities: Vec<Parity>, elements: impl IntoIterator<Item = Weight>) -> Result<Self> {
        WeightSystem::with_additional(parities, Vec::new(), elements)
    }

    pub fn with_additional(
        parities: Vec<Parity>,
        mut additional: Vec<AdditionalSymbol>,
        elements: impl IntoIterator<Item = Weight>,
    ) -> Result<Self> {
        additional.sort();
        additional.dedup();
        let r = parities.len() as u32;
        if let Some(s) = additional.iter().find(|s| s.i > r) {
            return Err(Error::InvalidSystem(format!("{s} pairs with a missing basic weight")));
        }
        let ws = WeightSystem {
            parities,
            additional,
            elements: elements.into_iter().collect(),
        };
        if let Some(w) = ws.elements.iter().find(|w| !ws.spans(w)) {
            return Err(Error::SymbolOutsideBasis(w.clone()));
        }
        Ok(ws)
    }

    /// System given by rows of coefficients over the basic weights.
    pub fn from_rows(parities: Vec<Parity>, rows: &[Vec<i64>]) -> Result<Self> {
        let r = parities.len();
        if let Some(row) = rows.iter().find(|row| row.len() != r) {
            return Err(Error::InvalidSystem(format!(
                "row has {} coefficients, rank is {r}",
                row.len()
            )));
        }
        WeightSystem::new(parities, rows.iter().map(|row| Weight::from_basic_coefficients(row)))
    }

    fn spans(&self, w: &Weight) -> bool {
        w.symbols().all(|s| self.has_symbol(s))
    }

    pub fn has_symbol(&self, s: BasisSymbol) -> bool {
        match s {
            BasisSymbol::Basic(i) => i >= 1 && i as usize <= self.parities.len(),
            BasisSymbol::Additional(a) => self.additional.binary_search(&a).is_ok(),
        }
    }

    /// Same basis and parities, different elements.
    pub fn with_elements(&self, elements: impl IntoIterator<Item = Weight>) -> Result<Self> {
        WeightSystem::with_additional(self.parities.clone(), self.additional.clone(), elements)
    }

    pub fn basic_rank(&self) -> usize {
        self.parities.len()
    }

    /// Number of basis symbols, basic and additional.
    pub fn rank(&self) -> usize {
        self.parities.len() + self.additional.len()
    }

    pub fn basis(&self) -> Vec<BasisSymbol> {
        (1..=self.parities.len() as u32)
            .map(BasisSymbol::Basic)
            .chain(self.additional.iter().copied().map(BasisSymbol::Additional))
            .collect()
    }

    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }

    pub fn additional(&self) -> &[AdditionalSymbol] {
        &self.additional
    }

    pub fn elements(&self) -> &BTreeSet<Weight> {
        &self.elements
    }

    pub fn contains(&self, w: &Weight) -> bool {
        self.elements.contains(w)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn symbol_parity(&self, s: BasisSymbol) -> Parity {
        match s {
            BasisSymbol::Basic(i) => self.parities[i as usize - 1],
            BasisSymbol::Additional(a) => self.parities[a.i as usize - 1].flip(),
        }
    }

    pub fn parity(&self, w: &Weight) -> Parity {
        w.terms().iter().fold(
            Parity::Even,
            |p, &(s, c)| {
                if c % 2 != 0 {
                    p + self.symbol_parity(s)
                } else {
                    p
                }
            },
        )
    }

    pub fn validate(&self) -> ValidationReport {
        ValidationReport {
            rank: self.rank(),
            contains_zero: self.contains(&Weight::zero()),
            missing_basis: self
                .basis()
                .into_iter()
                .filter(|&s| !self.contains(&Weight::symbol(s)))
                .collect(),
            negative: self.elements.iter().filter(|w| !w.is_nonnegative()).cloned().collect(),
            multiplicity_free: self.is_multiplicity_free(),
        }
    }

    pub fn is_multiplicity_free(&self) -> bool {
        self.elements.iter().all(Weight::is_multiplicity_free)
    }

    fn require_valid_basic(&self) -> Result<()> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidSystem(format!("{report}")));
        }
        if !self.additional.is_empty() {
            return Err(Error::InvalidSystem(String::from(
                "system already carries additional weights",
            )));
        }
        Ok(())
    }

    /// Largest coefficient of each basic weight over the system.
    pub fn max_multiplicities(&self) -> Vec<u32> {
        (1..=self.parities.len() as u32)
            .map(|i| {
                self.elements
                    .iter()
                    .map(|w| w.basic_coefficient(i).max(0) as u32)
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    /// Number of tangent lifts needed to linearize.
    pub fn lift_count(&self) -> usize {
        self.max_multiplicities()
            .iter()
            .map(|&n| n.saturating_sub(1) as usize)
            .sum()
    }

    /// Additional weights `b<j>_<i>`, `2 <= j <= n_i`, in lift order.
    pub fn lift_symbols(&self) -> Vec<AdditionalSymbol> {
        self.max_multiplicities()
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| (2..=n).map(move |j| AdditionalSymbol::new(j, k as u32 + 1)))
            .collect()
    }

    /// Weights of the linearized system lying over `delta`.
    pub fn fiber(&self, delta: &Weight) -> Result<Vec<Weight>> {
        self.require_valid_basic()?;
        if !self.contains(delta) {
            return Err(Error::NotInSystem(delta.clone()));
        }
        Ok(self.fiber_unchecked(delta, &self.max_multiplicities()))
    }

    fn fiber_unchecked(&self, delta: &Weight, n: &[u32]) -> Vec<Weight> {
        let mut partial = vec![delta.clone()];
        for (k, &n_i) in n.iter().enumerate() {
            let i = k as u32 + 1;
            let a = delta.basic_coefficient(i);
            if a == 0 {
                continue;
            }
            let avail = n_i.saturating_sub(1);
            let mut next = Vec::new();
            for mask in 0u64..(1u64 << avail) {
                let size = mask.count_ones() as i64;
                if size != a && size != a - 1 {
                    continue;
                }
                let mut shift = Weight::basic(i).scale(-size);
                for bit in 0..avail {
                    if mask >> bit & 1 == 1 {
                        shift = &shift + &Weight::additional(AdditionalSymbol::new(bit + 2, i));
                    }
                }
                next.extend(partial.iter().map(|w| w + &shift));
            }
            partial = next;
        }
        let set: BTreeSet<Weight> = partial.into_iter().collect();
        set.into_iter().collect()
    }

    /// The linearized system, over the basic weights and the additional weights `b<j>_<i>`.
    pub fn linearized(&self) -> Result<WeightSystem> {
        self.require_valid_basic()?;
        let n = self.max_multiplicities();
        let elements: BTreeSet<Weight> = self.elements.iter().flat_map(|d| self.fiber_unchecked(d, &n)).collect();
        WeightSystem::with_additional(self.parities.clone(), self.lift_symbols(), elements)
    }

    /// A pair `(delta, part)` where `delta` lies in `subset`, `part` occurs in a
    /// decomposition of `delta` into nonzero elements of the system and `part` is outside `subset`.
    pub fn closure_violation(&self, subset: &BTreeSet<Weight>) -> Result<Option<(Weight, Weight)>> {
        if !self.elements.iter().all(Weight::is_nonnegative) {
            return Err(Error::NotNonNegative);
        }
        if let Some(w) = subset.iter().find(|w| !self.contains(w)) {
            return Err(Error::NotInSystem(w.clone()));
        }
        let parts: Vec<&Weight> = self.elements.iter().filter(|w| !w.is_zero()).collect();
        let mut memo = BTreeMap::new();
        for delta in subset {
            for part in &parts {
                if subset.contains(*part) || !part.is_below(delta) {
                    continue;
                }
                if representable(&(delta - *part), &parts, &mut memo) {
                    return Ok(Some((delta.clone(), (*part).clone())));
                }
            }
        }
        Ok(None)
    }

    pub fn is_closed_subsystem(&self, subset: &BTreeSet<Weight>) -> Result<bool> {
        Ok(self.closure_violation(subset)?.is_none())
    }

    /// Negate every weight outside `base`.
    ///
    /// Requires a basic weight whose coefficient is the same unit `±1` on every
    /// weight outside `base` and vanishes on `base`.
    pub fn dualize(&self, base: &BTreeSet<Weight>) -> Result<Dualization> {
        if let Some(w) = base.iter().find(|w| !self.contains(w)) {
            return Err(Error::NotInSystem(w.clone()));
        }
        let fiber: Vec<&Weight> = self.elements.iter().filter(|w| !base.contains(*w)).collect();
        let first = fiber.first().ok_or(Error::NoFiberDirection)?;
        let direction = self
            .basis()
            .into_iter()
            .find(|&s| {
                let c = first.coefficient(s);
                c.abs() == 1
                    && fiber.iter().all(|w| w.coefficient(s) == c)
                    && base.iter().all(|w| w.coefficient(s) == 0)
            })
            .ok_or(Error::NoFiberDirection)?;
        let dual_fiber: Vec<Weight> = fiber.iter().map(|w| -*w).collect();
        let system = self.with_elements(base.iter().cloned().chain(dual_fiber.iter().cloned()))?;

        let basis = self.basis();
        let floor = Weight::from_dense(
            &basis,
            &basis
                .iter()
                .map(|&s| dual_fiber.iter().map(|w| w.coefficient(s)).min().unwrap_or(0))
                .collect::<Vec<_>>(),
        );
        let generator = if dual_fiber.contains(&floor) {
            floor
        } else {
            Weight::symbol(direction).scale(-first.coefficient(direction))
        };
        let suggested_basis = basis
            .iter()
            .map(|&s| {
                if s == direction {
                    generator.clone()
                } else {
                    Weight::symbol(s)
                }
            })
            .collect();
        Ok(Dualization {
            system,
            direction,
            suggested_basis,
        })
    }
}

fn representable(w: &Weight, parts: &[&Weight], memo: &mut BTreeMap<Weight, bool>) -> bool {
    if w.is_zero() {
        return true;
    }
    if !w.is_nonnegative() {
        return false;
    }
    if let Some(&known) = memo.get(w) {
        return known;
    }
    let found = parts
        .iter()
        .any(|p| p.is_below(w) && representable(&(w - *p), parts, memo));
    memo.insert(w.clone(), found);
    found
}
