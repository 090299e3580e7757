//! Tangent lifts, their de Rham differentials and the quotient by negative weights.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::superalgebra::{Chart, Coordinate, Monomial, Polynomial};
use crate::weights::{AdditionalSymbol, Parity, Weight, WeightSystem};
use crate::Rational;

/// A homogeneous derivation, given by its values on generators.
///
/// Extended to products by the graded Leibniz rule
/// `D(ab) = D(a) b + (-1)^{|D||a|} a D(b)`. Generators without an image map to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    weight: Weight,
    parity: Parity,
    images: BTreeMap<Coordinate, Polynomial>,
}

impl Derivation {
    pub fn new(weight: Weight, parity: Parity, images: BTreeMap<Coordinate, Polynomial>) -> Self {
        let images = images.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        Derivation { weight, parity, images }
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn images(&self) -> &BTreeMap<Coordinate, Polynomial> {
        &self.images
    }

    pub fn image(&self, c: &Coordinate) -> Option<&Polynomial> {
        self.images.get(c)
    }

    /// Replace the value on one generator.
    pub fn set_image(&mut self, c: Coordinate, p: Polynomial) {
        if p.is_zero() {
            self.images.remove(&c);
        } else {
            self.images.insert(c, p);
        }
    }

    /// The generator whose image has the wrong weight or parity, if any.
    pub fn inhomogeneous_generator(&self) -> Option<&Coordinate> {
        self.images.iter().find_map(|(c, p)| {
            let w = c.weight() + &self.weight;
            let par = c.parity() + self.parity;
            let ok = p.is_homogeneous_of(&w) && p.parity().is_none_or(|q| q == par);
            (!ok).then_some(c)
        })
    }

    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(p.trunc());
        out.mark_truncated(p.is_truncated());
        for (m, c) in p.terms() {
            let t = self.apply_monomial(m, p.trunc()).scale(c);
            out = &out + &t;
        }
        out
    }

    pub fn apply_monomial(&self, m: &Monomial, trunc: u32) -> Polynomial {
        let mut out = Polynomial::zero(trunc);
        let mut odd_before = 0usize;
        for (k, (c, e)) in m.factors().iter().enumerate() {
            if let Some(img) = self.images.get(c) {
                let extra = if c.is_odd() { 0 } else { e - 1 };
                let negative = self.parity.is_odd() && odd_before % 2 == 1;
                let mut coeff = Rational::from_integer((*e).into());
                if negative {
                    coeff = -coeff;
                }
                let left = Polynomial::monomial(m.prefix(k, extra), coeff, trunc);
                let right = Polynomial::monomial(m.suffix(k), Rational::one(), trunc);
                out = &out + &(&(&left * img) * &right);
            }
            if c.is_odd() {
                odd_before += 1;
            }
        }
        out
    }

    /// `[self, other]` evaluated on `p`, with the graded sign.
    pub fn supercommutator(&self, other: &Derivation, p: &Polynomial) -> Polynomial {
        let ab = self.apply(&other.apply(p));
        let ba = other.apply(&self.apply(p));
        if self.parity.is_odd() && other.parity.is_odd() {
            &ab + &ba
        } else {
            &ab - &ba
        }
    }
}

/// A chart after a sequence of tangent lifts.
///
/// Every base coordinate `c` gives a coordinate `c[S]` for each subset `S` of
/// the applied lifts, of weight `wt(c) + sum (b - a_i)` over `S` and with parity
/// flipped `|S|` times.
#[derive(Clone, Debug)]
pub struct TangentChart {
    base: Chart,
    lifts: Vec<AdditionalSymbol>,
    chart: Chart,
}

impl TangentChart {
    pub fn new(base: Chart) -> Result<Self> {
        if let Some(c) = base.coordinates().iter().find(|c| !c.tags().is_empty()) {
            return Err(Error::Hypothesis(alloc::format!(
                "base coordinate {c} is already lifted"
            )));
        }
        Ok(TangentChart {
            chart: base.clone(),
            base,
            lifts: Vec::new(),
        })
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    /// Lifts in the order they were applied.
    pub fn lifts(&self) -> &[AdditionalSymbol] {
        &self.lifts
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Apply one more lift. Lifts must come in increasing `(i, j)` order.
    pub fn lift(&self, b: AdditionalSymbol) -> Result<Self> {
        if self.lifts.last().is_some_and(|last| *last > b) {
            return Err(Error::LiftOutOfOrder(b));
        }
        self.lift_unchecked(b)
    }

    /// Apply one more lift in any order.
    pub fn lift_unchecked(&self, b: AdditionalSymbol) -> Result<Self> {
        let base_system = self.base.system();
        if self.lifts.contains(&b) || base_system.additional().contains(&b) {
            return Err(Error::LiftRepeated(b));
        }
        if b.i as usize > base_system.basic_rank() {
            return Err(Error::SymbolOutsideBasis(Weight::additional(b)));
        }
        let mut lifts = self.lifts.clone();
        lifts.push(b);
        let mut coords = Vec::new();
        for c in self.base.coordinates() {
            for mask in 0u64..(1u64 << lifts.len()) {
                let tags: Vec<AdditionalSymbol> = lifts
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, l)| *l)
                    .collect();
                let weight = tags.iter().fold(c.weight().clone(), |w, l| w.shifted(*l));
                let parity = if tags.len() % 2 == 1 {
                    c.parity().flip()
                } else {
                    c.parity()
                };
                coords.push(Coordinate::new(String::from(c.name()), tags, weight, parity));
            }
        }
        let mut elements: Vec<Weight> = coords.iter().map(|c| c.weight().clone()).collect();
        elements.push(Weight::zero());
        let mut additional = base_system.additional().to_vec();
        additional.extend(lifts.iter().copied());
        let system = WeightSystem::with_additional(base_system.parities().to_vec(), additional, elements)?;
        Ok(TangentChart {
            base: self.base.clone(),
            chart: Chart::new(system, coords, self.base.trunc())?,
            lifts,
        })
    }

    /// The coordinate obtained from `base` by the lifts in `tags`.
    pub fn tagged(&self, base: &Coordinate, tags: &[AdditionalSymbol]) -> Option<&Coordinate> {
        let mut sorted = tags.to_vec();
        sorted.sort();
        self.chart.lookup(base.name(), &sorted)
    }

    /// The odd differential of the lift `b`.
    ///
    /// `d(c[S]) = (-1)^k c[S + b]` where `k` counts the lifts in `S` applied after `b`,
    /// and `d(c[S]) = 0` when `b` is in `S`.
    pub fn de_rham(&self, b: AdditionalSymbol) -> Result<Derivation> {
        let pos = self
            .lifts
            .iter()
            .position(|l| *l == b)
            .ok_or(Error::MissingOperator(b))?;
        let trunc = self.chart.trunc();
        let mut images = BTreeMap::new();
        for c in self.chart.coordinates() {
            if c.tags().contains(&b) {
                continue;
            }
            let later = c
                .tags()
                .iter()
                .filter(|t| self.lifts.iter().position(|l| l == *t) > Some(pos))
                .count();
            let mut tags = c.tags().to_vec();
            tags.push(b);
            tags.sort();
            let target = self
                .chart
                .lookup(c.name(), &tags)
                .ok_or_else(|| Error::UnknownCoordinate(c.label()))?;
            let sign = if later % 2 == 1 {
                -Rational::one()
            } else {
                Rational::one()
            };
            images.insert(
                c.clone(),
                Polynomial::monomial(Monomial::from_coordinate(target.clone()), sign, trunc),
            );
        }
        Ok(Derivation::new(b.shift(), Parity::Odd, images))
    }

    /// Generators of the quotient by the ideal of negatively weighted elements.
    pub fn quotient_chart(&self) -> Result<Chart> {
        let system = self.chart.system();
        let elements = system.elements().iter().filter(|w| w.is_nonnegative()).cloned();
        self.chart
            .restrict(system.with_elements(elements)?, |c| c.weight().is_nonnegative())
    }

    /// Generators of non-negative multiplicity-free weight.
    pub fn multiplicity_free_chart(&self) -> Result<Chart> {
        let system = self.chart.system();
        let keep = |w: &Weight| w.is_nonnegative() && w.is_multiplicity_free();
        let elements = system.elements().iter().filter(|w| keep(w)).cloned();
        self.chart
            .restrict(system.with_elements(elements)?, |c| keep(c.weight()))
    }
}

/// Image in the quotient by the ideal generated by negatively weighted coordinates.
pub fn quotient_negative(p: &Polynomial) -> Polynomial {
    p.restrict(|c| c.weight().is_nonnegative())
}

/// Whether `p` has no nonzero term of degree zero.
pub fn has_no_constant(p: &Polynomial) -> bool {
    p.constant_term().is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superalgebra::ChartLayout;
    use alloc::vec;
    use proptest::prelude::*;

    fn b(j: u32, i: u32) -> AdditionalSymbol {
        AdditionalSymbol::new(j, i)
    }

    fn m3(parity: u8, dim: usize) -> Chart {
        let ws =
            WeightSystem::from_rows(vec![Parity::from_bit(parity)], &[vec![0], vec![1], vec![2], vec![3]]).unwrap();
        ChartLayout::uniform(ws, dim, 3).chart().unwrap()
    }

    fn lifted(chart: Chart, lifts: &[AdditionalSymbol]) -> TangentChart {
        lifts
            .iter()
            .fold(TangentChart::new(chart).unwrap(), |t, l| t.lift(*l).unwrap())
    }

    fn w(a: i64, b21: i64, b31: i64) -> Weight {
        Weight::from_terms([
            (crate::BasisSymbol::Basic(1), a),
            (crate::BasisSymbol::Additional(b(2, 1)), b21),
            (crate::BasisSymbol::Additional(b(3, 1)), b31),
        ])
    }

    #[test]
    fn m3_lifted_twice() {
        let t = lifted(m3(1, 1), &[b(2, 1), b(3, 1)]);
        let weights: Vec<Weight> = t.chart().coordinates().iter().map(|c| c.weight().clone()).collect();
        let expected = vec![
            w(0, 0, 0),
            w(1, 0, 0),
            w(2, 0, 0),
            w(3, 0, 0),
            w(-1, 1, 0),
            w(0, 1, 0),
            w(1, 1, 0),
            w(2, 1, 0),
            w(-1, 0, 1),
            w(0, 0, 1),
            w(1, 0, 1),
            w(2, 0, 1),
            w(-2, 1, 1),
            w(-1, 1, 1),
            w(0, 1, 1),
            w(1, 1, 1),
        ];
        assert_eq!(weights, expected);
        let labels: Vec<String> = t
            .multiplicity_free_chart()
            .unwrap()
            .coordinates()
            .iter()
            .map(Coordinate::label)
            .collect();
        assert_eq!(
            labels,
            [
                "x",
                "xi<a1>",
                "xi<a1>[b2_1]",
                "xi<2a1>[b2_1]",
                "xi<a1>[b3_1]",
                "xi<2a1>[b3_1]",
                "xi<2a1>[b2_1,b3_1]",
                "xi<3a1>[b2_1,b3_1]",
            ]
        );
    }

    #[test]
    fn differentials_anticommute_with_sign() {
        let t = lifted(m3(1, 1), &[b(2, 1), b(3, 1)]);
        let (d21, d31) = (t.de_rham(b(2, 1)).unwrap(), t.de_rham(b(3, 1)).unwrap());
        let xi = t.chart().lookup("xi<2a1>", &[]).unwrap();
        let p = t.chart().generator(xi);
        let both = t.tagged(xi, &[b(2, 1), b(3, 1)]).unwrap();
        assert_eq!(d31.apply(&d21.apply(&p)), t.chart().generator(both));
        assert_eq!(d21.apply(&d31.apply(&p)), -&t.chart().generator(both));
    }

    #[test]
    fn lift_order_is_enforced() {
        let t = lifted(m3(0, 1), &[b(3, 1)]);
        assert_eq!(t.lift(b(2, 1)).unwrap_err(), Error::LiftOutOfOrder(b(2, 1)));
        assert_eq!(t.lift(b(3, 1)).unwrap_err(), Error::LiftRepeated(b(3, 1)));
        assert!(t.lift_unchecked(b(2, 1)).is_ok());
    }

    #[test]
    fn reordered_lifts_are_isomorphic() {
        let base = m3(0, 1);
        let (b1, b2) = (b(2, 1), b(3, 1));
        let n1 = lifted(base.clone(), &[b1, b2]);
        let n2 = TangentChart::new(base)
            .unwrap()
            .lift(b2)
            .unwrap()
            .lift_unchecked(b1)
            .unwrap();
        // phi: O(n2) -> O(n1), identity on names with a sign on the doubly lifted coordinates
        let phi = |p: &Polynomial| -> Polynomial {
            let mut out = Polynomial::zero(p.trunc());
            for (m, c) in p.terms() {
                let raw: Vec<Coordinate> = m
                    .occurrences()
                    .iter()
                    .map(|x| n1.chart().lookup(x.name(), x.tags()).unwrap().clone())
                    .collect();
                let flips = m.occurrences().iter().filter(|x| x.tags().len() == 2).count();
                let (mono, neg) = Monomial::normalize(&raw).unwrap();
                let c = if (flips % 2 == 1) ^ neg { -c.clone() } else { c.clone() };
                out.add_term(mono, c);
            }
            out
        };
        for beta in [b1, b2] {
            let d1 = n1.de_rham(beta).unwrap();
            let d2 = n2.de_rham(beta).unwrap();
            for c in n2.chart().coordinates() {
                let g = n2.chart().generator(c);
                assert_eq!(phi(&d2.apply(&g)), d1.apply(&phi(&g)), "{c} under {beta}");
            }
        }
        let eta = n2.chart().lookup("xi<a1>", &[]).unwrap();
        let g = n2.chart().generator(eta);
        let twice = n2.de_rham(b1).unwrap().apply(&n2.de_rham(b2).unwrap().apply(&g));
        let once = n1.de_rham(b2).unwrap().apply(&n1.de_rham(b1).unwrap().apply(&phi(&g)));
        assert_eq!(phi(&twice), -&once);
    }

    #[test]
    fn quotient_and_restriction_agree_on_free_weights() {
        let t = lifted(m3(0, 2), &[b(2, 1), b(3, 1)]);
        let q = t.quotient_chart().unwrap();
        let mf = t.multiplicity_free_chart().unwrap();
        for wt in mf.system().elements() {
            assert_eq!(q.component_basis(wt), mf.component_basis(wt), "{wt}");
        }
    }

    fn random_poly(chart: &Chart, seed: &[(usize, usize, usize, i64)], odd: Option<bool>) -> Polynomial {
        let cs = chart.coordinates();
        let mut p = chart.zero();
        for &(a, b2, c, k) in seed {
            let raw = [
                cs[a % cs.len()].clone(),
                cs[b2 % cs.len()].clone(),
                cs[c % cs.len()].clone(),
            ];
            let take = 1 + (k.unsigned_abs() as usize % 3);
            if let Some((m, neg)) = Monomial::normalize(&raw[..take]) {
                if odd.is_some_and(|o| m.parity().is_odd() != o) {
                    continue;
                }
                let c = Rational::from_integer(k.into());
                p.add_term(m, if neg { -c } else { c });
            }
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn de_rham_identities(
            parity in 0u8..2,
            sp in proptest::collection::vec((0usize..64, 0usize..64, 0usize..64, -3i64..4), 1..5),
            sq in proptest::collection::vec((0usize..64, 0usize..64, 0usize..64, -3i64..4), 1..5),
            podd in any::<bool>(),
        ) {
            let t = lifted(m3(parity, 1), &[b(2, 1), b(3, 1)]);
            let ds = [t.de_rham(b(2, 1)).unwrap(), t.de_rham(b(3, 1)).unwrap()];
            let p = random_poly(t.chart(), &sp, Some(podd));
            let q = random_poly(t.chart(), &sq, None);
            for d in &ds {
                prop_assert!(d.apply(&d.apply(&q)).is_zero());
                let lhs = d.apply(&(&p * &q));
                let mut rhs_b = &p * &d.apply(&q);
                if podd {
                    rhs_b = -&rhs_b;
                }
                prop_assert_eq!(lhs, &(&d.apply(&p) * &q) + &rhs_b);
            }
            prop_assert!(ds[0].supercommutator(&ds[1], &q).is_zero());
        }
    }
}
