//! Seeded generators of weight systems, charts, polynomials and morphisms.

use std::collections::{BTreeMap, BTreeSet};

use gradlin::{
    BasisSymbol, Chart, ChartLayout, ChartMorphism, Monomial, Parity, Polynomial, Rational, Weight, WeightSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random_bool(0.5)
    }

    /// A small nonzero integer.
    pub fn coefficient(&mut self) -> Rational {
        let v: i64 = self.rng.random_range(1..=3);
        Rational::from_integer(if self.coin() { v } else { -v }.into())
    }

    pub fn parities(&mut self, rank: usize) -> Vec<Parity> {
        (0..rank)
            .map(|_| Parity::from_bit(self.rng.random_range(0..2)))
            .collect()
    }

    /// A valid non-negative system of rank at most `max_rank`, with basic
    /// coefficients at most `max_mult` and at most `max_len` elements.
    pub fn weight_system(&mut self, max_rank: usize, max_mult: i64, max_len: usize) -> WeightSystem {
        let rank = self.rng.random_range(1..=max_rank);
        let mut rows: BTreeSet<Vec<i64>> = BTreeSet::new();
        rows.insert(vec![0; rank]);
        for i in 0..rank {
            let mut row = vec![0; rank];
            row[i] = 1;
            rows.insert(row);
        }
        let extra = self.rng.random_range(0..=max_len.saturating_sub(rows.len()));
        for _ in 0..extra {
            let row: Vec<i64> = (0..rank).map(|_| self.rng.random_range(0..=max_mult)).collect();
            if row.iter().any(|&c| c > 0) {
                rows.insert(row);
            }
        }
        let rows: Vec<Vec<i64>> = rows.into_iter().collect();
        WeightSystem::from_rows(self.parities(rank), &rows).expect("rows have the system rank")
    }

    /// A system of rank one containing `n * a1`, so that it needs `n - 1` lifts.
    pub fn rank_one_system(&mut self, n: i64) -> WeightSystem {
        let mut rows = vec![vec![0], vec![1], vec![n]];
        for k in 2..n {
            if self.coin() {
                rows.push(vec![k]);
            }
        }
        WeightSystem::from_rows(self.parities(1), &rows).expect("rank one rows")
    }

    pub fn chart_layout(&mut self, ws: &WeightSystem, max_dim: usize, trunc: u32) -> ChartLayout {
        let dims: BTreeMap<Weight, usize> = ws
            .elements()
            .iter()
            .filter(|w| !w.is_zero())
            .map(|w| (w.clone(), self.rng.random_range(1..=max_dim)))
            .collect();
        let base = self.rng.random_range(1..=2);
        ChartLayout::new(ws.clone(), base, dims, trunc).expect("dims keyed by system elements")
    }

    pub fn chart(&mut self, ws: &WeightSystem, max_dim: usize, trunc: u32) -> Chart {
        self.chart_layout(ws, max_dim, trunc).chart().expect("standard chart")
    }

    /// A random combination of up to `terms` monomials of weight `w`.
    pub fn polynomial(&mut self, chart: &Chart, w: &Weight, terms: usize) -> Polynomial {
        let basis = chart.component_basis(w);
        let mut out = chart.zero();
        if basis.is_empty() {
            return out;
        }
        for _ in 0..terms {
            let m = basis[self.below(basis.len())].clone();
            out = &out + &chart.monomial(m).scale(&self.coefficient());
        }
        out
    }

    /// A morphism from `source` to `target` over the same system: each target
    /// generator pulls back to a combination of source generators of its weight,
    /// sometimes with weight-zero coefficients and a decomposable term.
    pub fn morphism(&mut self, source: &Chart, target: &Chart) -> ChartMorphism {
        let mut images = BTreeMap::new();
        let base: Vec<Polynomial> = source.of_weight(&Weight::zero()).map(|x| source.generator(x)).collect();
        for g in target.coordinates() {
            let mut img = source.zero();
            for c in source.of_weight(g.weight()) {
                if self.rng.random_bool(0.7) {
                    let mut term = source.generator(c).scale(&self.coefficient());
                    if !base.is_empty() && self.rng.random_bool(0.3) {
                        term = &term * &base[self.below(base.len())];
                    }
                    img = &img + &term;
                }
            }
            if !g.weight().is_zero() && self.rng.random_bool(0.3) {
                let decomposable: Vec<Monomial> = source
                    .component_basis(g.weight())
                    .into_iter()
                    .filter(|m| m.factors().iter().filter(|(c, _)| !c.weight().is_zero()).count() >= 2)
                    .collect();
                if !decomposable.is_empty() {
                    let m = decomposable[self.below(decomposable.len())].clone();
                    img = &img + &source.monomial(m).scale(&self.coefficient());
                }
            }
            images.insert(g.clone(), img);
        }
        ChartMorphism::new(source.clone(), target.clone(), images).expect("weight-preserving images")
    }

    /// A system and base subsystem admitting a fiber direction: the base has
    /// zero coefficient at the direction and every other element coefficient one.
    pub fn dualizable(&mut self) -> (WeightSystem, BTreeSet<Weight>) {
        let rank = self.rng.random_range(2..=3);
        let k = self.below(rank);
        let direction = BasisSymbol::Basic(k as u32 + 1);
        let mut base: BTreeSet<Weight> = BTreeSet::new();
        let mut fiber: BTreeSet<Weight> = BTreeSet::new();
        base.insert(Weight::zero());
        fiber.insert(Weight::symbol(direction));
        for i in 0..rank {
            if i != k {
                base.insert(Weight::basic(i as u32 + 1));
            }
        }
        for _ in 0..self.rng.random_range(0..4) {
            let mut row: Vec<i64> = (0..rank).map(|_| self.rng.random_range(0..=2)).collect();
            row[k] = 0;
            if row.iter().any(|&c| c > 0) {
                base.insert(Weight::from_basic_coefficients(&row));
            }
            row[k] = 1;
            if self.coin() {
                fiber.insert(Weight::from_basic_coefficients(&row));
            }
        }
        let parities = self.parities(rank);
        let ws = WeightSystem::new(parities, base.iter().chain(fiber.iter()).cloned()).expect("basic rank");
        (ws, base)
    }
}
