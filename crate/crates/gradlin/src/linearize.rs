//! Linearization of charts and chart morphisms.
//!
//! A chart over `Δ` is lifted once for every additional weight, the
//! negatively weighted coordinates are divided out and the coordinates of
//! multiplicity-free weight are kept. The differentials of the lifts descend
//! to odd operators on the result.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::superalgebra::{Chart, Coordinate, Polynomial};
use crate::tangent::{has_no_constant, quotient_negative, Derivation, TangentChart};
use crate::weights::{AdditionalSymbol, Weight, WeightSystem};

/// A chart over the linearized system, its operators and the charts it was built from.
#[derive(Clone, Debug)]
pub struct LinearizedChart {
    source: Chart,
    lifted: TangentChart,
    differentials: BTreeMap<AdditionalSymbol, Derivation>,
    quotient: Chart,
    chart: Chart,
    operators: BTreeMap<AdditionalSymbol, Derivation>,
}

/// One generator of the linearized chart and the source coordinate it comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableEntry {
    pub source: Coordinate,
    pub lifts: Vec<AdditionalSymbol>,
    pub target: Coordinate,
}

impl TableEntry {
    pub fn source_weight(&self) -> &Weight {
        self.source.weight()
    }

    pub fn target_weight(&self) -> &Weight {
        self.target.weight()
    }
}

pub fn linearize_chart(source: &Chart) -> Result<LinearizedChart> {
    LinearizedChart::new(source)
}

impl LinearizedChart {
    pub fn new(source: &Chart) -> Result<Self> {
        LinearizedChart::with_cancel(source, &mut || false)
    }

    /// Like [`LinearizedChart::new`], polling `cancel` before every lift.
    pub fn with_cancel(source: &Chart, cancel: &mut dyn FnMut() -> bool) -> Result<Self> {
        let system = source.system();
        let target_system = system.linearized()?;
        let mut lifted = TangentChart::new(source.clone())?;
        for b in system.lift_symbols() {
            if cancel() {
                return Err(Error::Cancelled);
            }
            lifted = lifted.lift(b)?;
        }
        let differentials = lifted
            .lifts()
            .iter()
            .map(|&b| Ok((b, lifted.de_rham(b)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let quotient = lifted.quotient_chart()?;
        let chart = lifted.chart().restrict(target_system, |c| {
            c.weight().is_nonnegative() && c.weight().is_multiplicity_free()
        })?;
        let mut operators = BTreeMap::new();
        for (&b, d) in &differentials {
            let mut images = BTreeMap::new();
            for c in chart.coordinates() {
                let img = quotient_negative(&d.apply(&chart.generator(c)));
                if !chart.owns(&img) {
                    return Err(Error::Hypothesis(format!("image of {c} leaves the linearized chart")));
                }
                images.insert(c.clone(), img);
            }
            operators.insert(b, Derivation::new(b.shift(), d.parity(), images));
        }
        Ok(LinearizedChart {
            source: source.clone(),
            lifted,
            differentials,
            quotient,
            chart,
            operators,
        })
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    /// The chart before dividing out negative weights.
    pub fn lifted(&self) -> &TangentChart {
        &self.lifted
    }

    /// Generators of non-negative weight of the lifted chart.
    pub fn quotient(&self) -> &Chart {
        &self.quotient
    }

    /// Generators of the linearized chart.
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn system(&self) -> &WeightSystem {
        self.chart.system()
    }

    pub fn lifts(&self) -> &[AdditionalSymbol] {
        self.lifted.lifts()
    }

    pub fn operators(&self) -> &BTreeMap<AdditionalSymbol, Derivation> {
        &self.operators
    }

    pub fn operator(&self, b: AdditionalSymbol) -> Result<&Derivation> {
        self.operators.get(&b).ok_or(Error::MissingOperator(b))
    }

    /// Differential of a lift on the chart before the quotient.
    pub fn differential(&self, b: AdditionalSymbol) -> Result<&Derivation> {
        self.differentials.get(&b).ok_or(Error::MissingOperator(b))
    }

    /// Apply the differential of `b` and divide out negative weights.
    pub fn apply_reduced(&self, b: AdditionalSymbol, p: &Polynomial) -> Result<Polynomial> {
        Ok(quotient_negative(&self.differential(b)?.apply(p)))
    }

    /// Weight reached from `delta` by the operators in `lambda`.
    pub fn shifted_weight(lambda: &[AdditionalSymbol], delta: &Weight) -> Weight {
        lambda.iter().fold(delta.clone(), |w, b| w.shifted(*b))
    }

    /// `d_{l1} ∘ ... ∘ d_{ls}` applied to a polynomial of the source chart, modulo
    /// negative weights. The last entry of `lambda` acts first.
    pub fn apply_d_lambda(&self, lambda: &[AdditionalSymbol], p: &Polynomial) -> Result<Polynomial> {
        if !self.source.owns(p) {
            return Err(Error::Hypothesis(format!(
                "{p} is not a polynomial on the source chart"
            )));
        }
        let mut out = p.clone();
        for &b in lambda.iter().rev() {
            out = self.apply_reduced(b, &out)?;
        }
        Ok(out)
    }

    /// Generator reached from `source` by the lifts in `tags`, if it survives.
    pub fn generator_for(&self, source: &Coordinate, tags: &[AdditionalSymbol]) -> Option<&Coordinate> {
        let mut sorted = tags.to_vec();
        sorted.sort();
        self.chart.lookup(source.name(), &sorted)
    }

    /// For every source coordinate `c` of weight `d` and every weight `d'` over `d`,
    /// the generator obtained by applying the operators of `d'` to `c` in increasing order.
    pub fn coordinate_table(&self) -> Result<Vec<TableEntry>> {
        let system = self.source.system();
        let mut out = Vec::new();
        for c in self.source.coordinates() {
            for target_weight in system.fiber(c.weight())? {
                let lifts: Vec<AdditionalSymbol> = self
                    .lifts()
                    .iter()
                    .copied()
                    .filter(|b| target_weight.coefficient(crate::BasisSymbol::Additional(*b)) == 1)
                    .collect();
                let mut p = self.lifted.chart().generator(c);
                for &b in &lifts {
                    p = self.apply_reduced(b, &p)?;
                }
                let target = self
                    .generator_for(c, &lifts)
                    .ok_or_else(|| Error::UnknownCoordinate(c.label()))?;
                if p != self.chart.generator(target) || *target.weight() != target_weight {
                    return Err(Error::Hypothesis(format!("table entry for {c} over {target_weight}")));
                }
                out.push(TableEntry {
                    source: c.clone(),
                    lifts,
                    target: target.clone(),
                });
            }
        }
        out.sort_by(|a, b| a.target.cmp(&b.target));
        Ok(out)
    }
}

/// A weight-preserving morphism of charts, given by the pullbacks of the target generators.
///
/// Pullbacks have no constant term, so truncation commutes with composition.
/// Generators without an entry pull back to zero.
#[derive(Clone, Debug)]
pub struct ChartMorphism {
    source: Chart,
    target: Chart,
    images: BTreeMap<Coordinate, Polynomial>,
}

impl ChartMorphism {
    pub fn new(source: Chart, target: Chart, images: BTreeMap<Coordinate, Polynomial>) -> Result<Self> {
        for (c, p) in &images {
            if !target.contains(c) {
                return Err(Error::UnknownCoordinate(c.label()));
            }
            if !source.owns(p) {
                return Err(Error::Hypothesis(format!("pullback of {c} uses foreign coordinates")));
            }
            if !p.is_homogeneous_of(c.weight()) {
                return Err(Error::WeightMismatch {
                    expected: c.weight().clone(),
                    found: p.weights().into_iter().find(|w| w != c.weight()).unwrap_or_default(),
                });
            }
            if p.parity().is_some_and(|q| q != c.parity()) {
                return Err(Error::ParityMismatch(c.label()));
            }
            if !has_no_constant(p) {
                return Err(Error::DegreeLowering);
            }
        }
        let images = images.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        Ok(ChartMorphism { source, target, images })
    }

    pub fn identity(chart: &Chart) -> Self {
        ChartMorphism {
            source: chart.clone(),
            target: chart.clone(),
            images: chart
                .coordinates()
                .iter()
                .map(|c| (c.clone(), chart.generator(c)))
                .collect(),
        }
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn images(&self) -> &BTreeMap<Coordinate, Polynomial> {
        &self.images
    }

    pub fn image(&self, c: &Coordinate) -> Polynomial {
        self.images.get(c).cloned().unwrap_or_else(|| self.source.zero())
    }

    /// Substitute the pullbacks into a polynomial on the target chart.
    pub fn pullback(&self, p: &Polynomial) -> Result<Polynomial> {
        if !self.target.owns(p) {
            return Err(Error::Hypothesis(format!(
                "{p} is not a polynomial on the target chart"
            )));
        }
        let trunc = self.source.trunc().min(p.trunc());
        let mut out = Polynomial::zero(trunc);
        out.mark_truncated(p.is_truncated());
        for (m, c) in p.terms() {
            let mut term = Polynomial::constant(c.clone(), trunc);
            for x in m.occurrences() {
                term = &term * &self.image(&x);
                if term.is_zero() {
                    break;
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// The composite `next ∘ self`, pulling back along `next` first.
    pub fn then(&self, next: &ChartMorphism) -> Result<ChartMorphism> {
        let images = next
            .target
            .coordinates()
            .iter()
            .map(|c| Ok((c.clone(), self.pullback(&next.image(c))?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        ChartMorphism::new(self.source.clone(), next.target.clone(), images)
    }

    /// Whether both morphisms pull back every target generator to the same polynomial.
    pub fn same_pullbacks(&self, other: &ChartMorphism) -> bool {
        self.target
            .coordinates()
            .iter()
            .chain(other.target.coordinates())
            .all(|c| self.image(c) == other.image(c))
    }

    /// First generator `g` and operator `b` with `pullback(D_b g) != D_b pullback(g)`.
    pub fn commutation_failure(
        &self,
        source_ops: &BTreeMap<AdditionalSymbol, Derivation>,
        target_ops: &BTreeMap<AdditionalSymbol, Derivation>,
    ) -> Result<Option<(AdditionalSymbol, Coordinate)>> {
        for (b, dt) in target_ops {
            let ds = source_ops.get(b).ok_or(Error::MissingOperator(*b))?;
            for c in self.target.coordinates() {
                let lhs = self.pullback(&dt.apply(&self.target.generator(c)))?;
                let rhs = ds.apply(&self.image(c));
                if lhs != rhs {
                    return Ok(Some((*b, c.clone())));
                }
            }
        }
        Ok(None)
    }
}

fn same_generators(a: &Chart, b: &Chart) -> bool {
    a.coordinates() == b.coordinates()
}

/// The induced morphism of linearized charts.
///
/// A generator `c[S]` of the target pulls back to the lifted differentials of
/// `S`, applied in increasing order to the pullback of `c`, modulo negative weights.
pub fn lift_morphism(psi: &ChartMorphism, source: &LinearizedChart, target: &LinearizedChart) -> Result<ChartMorphism> {
    if !same_generators(psi.source(), source.source()) || !same_generators(psi.target(), target.source()) {
        return Err(Error::Hypothesis("morphism does not connect the given charts".into()));
    }
    if source.lifts() != target.lifts() {
        return Err(Error::Hypothesis("charts are linearized over different systems".into()));
    }
    let mut images = BTreeMap::new();
    for g in target.chart().coordinates() {
        let base = target
            .source()
            .lookup(g.name(), &[])
            .ok_or_else(|| Error::UnknownCoordinate(g.label()))?;
        let mut p = psi.image(base);
        for &b in g.tags() {
            p = source.apply_reduced(b, &p)?;
        }
        if !source.chart().owns(&p) {
            return Err(Error::Hypothesis(format!(
                "pullback of {g} leaves the linearized chart"
            )));
        }
        images.insert(g.clone(), p);
    }
    ChartMorphism::new(source.chart().clone(), target.chart().clone(), images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superalgebra::{ChartLayout, Monomial};
    use crate::weights::Parity;
    use crate::Rational;
    use alloc::string::String;
    use proptest::prelude::*;

    fn b(j: u32, i: u32) -> AdditionalSymbol {
        AdditionalSymbol::new(j, i)
    }

    fn chart(parities: &[u8], rows: &[&[i64]], dims: &[usize], trunc: u32) -> Chart {
        let ws = WeightSystem::from_rows(
            parities.iter().map(|&p| Parity::from_bit(p)).collect(),
            &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        let nonzero: Vec<Weight> = ws.elements().iter().filter(|w| !w.is_zero()).cloned().collect();
        let map = nonzero.into_iter().zip(dims.iter().copied()).collect();
        ChartLayout::new(ws, 1, map, trunc).unwrap().chart().unwrap()
    }

    #[test]
    fn d_lambda_on_product_of_odd_generators() {
        let src = chart(&[1], &[&[0], &[1], &[3]], &[2, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let xi1 = src.lookup("xi<a1>_1", &[]).unwrap().clone();
        let xi2 = src.lookup("xi<a1>_2", &[]).unwrap().clone();
        let f = &src.generator(&xi1) * &src.generator(&xi2);
        let got = lc.apply_d_lambda(&[b(2, 1), b(3, 1)], &f).unwrap();
        let g = |c: &Coordinate, t: AdditionalSymbol| lc.chart().generator(lc.generator_for(c, &[t]).unwrap());
        let expected = &(&g(&xi1, b(3, 1)) * &g(&xi2, b(2, 1))) - &(&g(&xi1, b(2, 1)) * &g(&xi2, b(3, 1)));
        assert_eq!(got, expected);
        assert!(!got.is_zero());
    }

    #[test]
    fn m3_coordinate_table() {
        let src = chart(&[1], &[&[0], &[1], &[2], &[3]], &[1, 1, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let table = lc.coordinate_table().unwrap();
        let rows: Vec<(String, String)> = table.iter().map(|e| (e.source.label(), e.target.label())).collect();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[3], (String::from("xi<2a1>"), String::from("xi<2a1>[b2_1]")));
        assert_eq!(rows[7], (String::from("xi<3a1>"), String::from("xi<3a1>[b2_1,b3_1]")));
        assert_eq!(lc.chart().len(), 8);
        assert_eq!(lc.system().len(), 8);
    }

    #[test]
    fn cancel_stops_at_lift_boundary() {
        let src = chart(&[0], &[&[0], &[1], &[3]], &[1, 1], 3);
        let mut calls = 0;
        let err = LinearizedChart::with_cancel(&src, &mut || {
            calls += 1;
            calls > 1
        })
        .unwrap_err();
        assert_eq!(err, Error::Cancelled);
        assert_eq!(calls, 2);
    }

    #[test]
    fn multiplicity_free_input_has_no_operators() {
        let src = chart(&[0, 1], &[&[0, 0], &[1, 0], &[0, 1], &[1, 1]], &[1, 2, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        assert!(lc.operators().is_empty());
        assert_eq!(lc.chart().coordinates(), src.coordinates());
    }

    #[test]
    fn quotient_each_step_matches_quotient_at_end() {
        let src = chart(&[0], &[&[0], &[1], &[2], &[3]], &[2, 1, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let lambda = [b(2, 1), b(3, 1)];
        for w in src.system().elements() {
            for m in src.component_basis(w) {
                let p = src.monomial(m);
                let mut raw = p.clone();
                for &l in lambda.iter().rev() {
                    raw = lc.differential(l).unwrap().apply(&raw);
                }
                assert_eq!(quotient_negative(&raw), lc.apply_d_lambda(&lambda, &p).unwrap());
            }
        }
    }

    fn random_linear(src: &Chart, tgt: &Chart, seed: &[i64]) -> ChartMorphism {
        let mut k = 0usize;
        let mut next = || {
            k += 1;
            seed[k % seed.len()]
        };
        let mut images = BTreeMap::new();
        for c in tgt.coordinates() {
            let mut p = src.zero();
            for s in src.of_weight(c.weight()) {
                p.add_term(
                    Monomial::from_coordinate(s.clone()),
                    Rational::from_integer(next().into()),
                );
            }
            if c.weight().basic_coefficient(1) == 2 && c.parity() == Parity::Even {
                let a1 = Weight::basic(1);
                let odd: Vec<&Coordinate> = src.of_weight(&a1).collect();
                if odd.len() == 2 && odd[0].is_odd() {
                    let m = Monomial::normalize(&[odd[0].clone(), odd[1].clone()]).unwrap().0;
                    p.add_term(m, Rational::from_integer(next().into()));
                }
            }
            images.insert(c.clone(), p);
        }
        ChartMorphism::new(src.clone(), tgt.clone(), images).unwrap()
    }

    #[test]
    fn identity_lifts_to_identity() {
        let src = chart(&[1], &[&[0], &[1], &[2], &[3]], &[2, 1, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let id = lift_morphism(&ChartMorphism::identity(&src), &lc, &lc).unwrap();
        assert!(id.same_pullbacks(&ChartMorphism::identity(lc.chart())));
    }

    #[test]
    fn constant_pullback_is_rejected() {
        let src = chart(&[0], &[&[0], &[1]], &[1], 3);
        let x = src.lookup("x", &[]).unwrap().clone();
        let img = &src.generator(&x) + &src.one();
        let err = ChartMorphism::new(src.clone(), src.clone(), [(x, img)].into_iter().collect());
        assert_eq!(err.unwrap_err(), Error::DegreeLowering);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn functoriality(parity in 0u8..2, d1 in 1usize..3, d2 in 1usize..3, s1 in proptest::collection::vec(-2i64..3, 1..12), s2 in proptest::collection::vec(-2i64..3, 1..12)) {
            let rows: &[&[i64]] = &[&[0], &[1], &[2], &[3]];
            let a = chart(&[parity], rows, &[d1, 1, 1], 3);
            let bch = chart(&[parity], rows, &[d2, 2, 1], 3);
            let c = chart(&[parity], rows, &[2, 1, 1], 3);
            let (la, lb, lcc) = (linearize_chart(&a).unwrap(), linearize_chart(&bch).unwrap(), linearize_chart(&c).unwrap());
            let phi = random_linear(&a, &bch, &s1);
            let psi = random_linear(&bch, &c, &s2);
            let f_phi = lift_morphism(&phi, &la, &lb).unwrap();
            let f_psi = lift_morphism(&psi, &lb, &lcc).unwrap();
            let f_comp = lift_morphism(&phi.then(&psi).unwrap(), &la, &lcc).unwrap();
            prop_assert!(f_comp.same_pullbacks(&f_phi.then(&f_psi).unwrap()));
            prop_assert_eq!(f_phi.commutation_failure(la.operators(), lb.operators()).unwrap(), None);
            prop_assert_eq!(f_psi.commutation_failure(lb.operators(), lcc.operators()).unwrap(), None);
        }
    }

    #[test]
    fn operators_square_to_zero_and_anticommute() {
        let src = chart(&[1], &[&[0], &[1], &[2], &[3]], &[2, 1, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let ops: Vec<&Derivation> = lc.operators().values().collect();
        for c in lc.chart().coordinates() {
            let g = lc.chart().generator(c);
            for x in &ops {
                for y in &ops {
                    assert!(x.supercommutator(y, &g).is_zero());
                }
            }
        }
        assert_eq!(lc.operators().len(), 2);
    }
}
