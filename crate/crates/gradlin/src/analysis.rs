//! Exact linear algebra on weight components of a chart carrying odd operators.
//!
//! Every check works on the finite monomial basis of a weight component up to a
//! fixed degree. Operators and morphisms here never lower the degree, so the
//! matrix of the degree-`D` truncation is obtained by dropping higher terms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linearize::{ChartMorphism, LinearizedChart};
use crate::superalgebra::{Chart, ChartLayout, Coordinate, Monomial, Polynomial};
use crate::tangent::Derivation;
use crate::weights::{AdditionalSymbol, BasisSymbol, Weight, WeightSystem};
use crate::Rational;

/// A chart together with one odd operator per additional symbol.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    chart: Chart,
    operators: BTreeMap<AdditionalSymbol, Derivation>,
}

impl OperatorFamily {
    pub fn new(chart: Chart, operators: BTreeMap<AdditionalSymbol, Derivation>) -> Result<Self> {
        for (b, d) in &operators {
            if !chart.system().additional().contains(b) {
                return Err(Error::SymbolOutsideBasis(Weight::additional(*b)));
            }
            if *d.weight() != b.shift() {
                return Err(Error::WeightMismatch {
                    expected: b.shift(),
                    found: d.weight().clone(),
                });
            }
            if !d.parity().is_odd() {
                return Err(Error::ParityMismatch(format!("operator {b}")));
            }
            if let Some(c) = d.images().keys().find(|c| !chart.contains(c)) {
                return Err(Error::UnknownCoordinate(c.label()));
            }
        }
        Ok(OperatorFamily { chart, operators })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn operators(&self) -> &BTreeMap<AdditionalSymbol, Derivation> {
        &self.operators
    }

    pub fn operator(&self, b: AdditionalSymbol) -> Result<&Derivation> {
        self.operators.get(&b).ok_or(Error::MissingOperator(b))
    }

    /// Replace the image of one generator under one operator.
    pub fn set_image(&mut self, b: AdditionalSymbol, c: Coordinate, p: Polynomial) -> Result<()> {
        if !self.chart.contains(&c) {
            return Err(Error::UnknownCoordinate(c.label()));
        }
        self.operators
            .get_mut(&b)
            .ok_or(Error::MissingOperator(b))?
            .set_image(c, p);
        Ok(())
    }
}

impl From<&LinearizedChart> for OperatorFamily {
    fn from(lc: &LinearizedChart) -> Self {
        OperatorFamily {
            chart: lc.chart().clone(),
            operators: lc.operators().clone(),
        }
    }
}

/// A linear map between two weight components in their monomial bases.
#[derive(Clone, Debug)]
pub struct ComponentMatrix {
    pub domain: Vec<Monomial>,
    pub codomain: Vec<Monomial>,
    pub matrix: Matrix,
    /// Some image had terms above the degree bound, which were dropped.
    pub overflow: bool,
    trunc: u32,
    max_degree: u32,
}

impl ComponentMatrix {
    /// Matrix of `f` from the span of `domain` to the span of `codomain`.
    ///
    /// Fails with [`Error::DegreeLowering`] when an image term has lower degree than its source.
    pub fn build(
        domain: Vec<Monomial>,
        codomain: Vec<Monomial>,
        trunc: u32,
        max_degree: u32,
        mut f: impl FnMut(&Monomial) -> Result<Polynomial>,
    ) -> Result<Self> {
        let mut out = ComponentMatrix {
            matrix: Matrix::zeros(codomain.len(), domain.len()),
            domain,
            codomain,
            overflow: false,
            trunc,
            max_degree,
        };
        let index = out.index();
        for j in 0..out.domain.len() {
            let m = out.domain[j].clone();
            let image = f(&m)?;
            if image.terms().any(|(t, _)| t.degree() < m.degree()) {
                return Err(Error::DegreeLowering);
            }
            let col = out.expand(&index, &image)?;
            for (i, v) in col.into_iter().enumerate() {
                out.matrix[(i, j)] = v;
            }
        }
        Ok(out)
    }

    fn index(&self) -> BTreeMap<Monomial, usize> {
        self.codomain.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect()
    }

    fn expand(&mut self, index: &BTreeMap<Monomial, usize>, p: &Polynomial) -> Result<Vec<Rational>> {
        let mut v = vec![Rational::zero(); self.codomain.len()];
        if p.is_truncated() && p.trunc() <= self.max_degree {
            self.overflow = true;
        }
        for (m, c) in p.terms() {
            if m.degree() > self.max_degree {
                self.overflow = true;
                continue;
            }
            let i = index.get(m).ok_or_else(|| Error::UnknownCoordinate(format!("{m}")))?;
            v[*i] = c.clone();
        }
        Ok(v)
    }

    /// Coordinates of `p` in the codomain basis.
    pub fn codomain_vector(&self, p: &Polynomial) -> Result<Vec<Rational>> {
        let mut scratch = self.clone();
        scratch.expand(&self.index(), p)
    }

    /// Coordinates of `p` in the domain basis.
    pub fn domain_vector(&self, p: &Polynomial) -> Result<Vec<Rational>> {
        let flipped = ComponentMatrix {
            domain: Vec::new(),
            codomain: self.domain.clone(),
            matrix: Matrix::zeros(self.domain.len(), 0),
            overflow: false,
            trunc: self.trunc,
            max_degree: self.max_degree,
        };
        flipped.codomain_vector(p)
    }

    pub fn domain_polynomial(&self, v: &[Rational]) -> Polynomial {
        combine(&self.domain, v, self.trunc)
    }

    pub fn codomain_polynomial(&self, v: &[Rational]) -> Polynomial {
        combine(&self.codomain, v, self.trunc)
    }

    /// The same map on monomials of degree at most `d`.
    pub fn restrict_degree(&self, d: u32) -> ComponentMatrix {
        let keep =
            |basis: &[Monomial]| -> Vec<usize> { (0..basis.len()).filter(|&k| basis[k].degree() <= d).collect() };
        let rows = keep(&self.codomain);
        let cols = keep(&self.domain);
        ComponentMatrix {
            domain: cols.iter().map(|&k| self.domain[k].clone()).collect(),
            codomain: rows.iter().map(|&k| self.codomain[k].clone()).collect(),
            matrix: self.matrix.select(&rows, &cols),
            overflow: self.overflow,
            trunc: self.trunc,
            max_degree: d.min(self.max_degree),
        }
    }

    pub fn is_bijective(&self) -> bool {
        self.domain.len() == self.codomain.len() && self.matrix.rank() == self.domain.len()
    }
}

fn combine(basis: &[Monomial], v: &[Rational], trunc: u32) -> Polynomial {
    Polynomial::from_terms(
        basis
            .iter()
            .cloned()
            .zip(v.iter().cloned())
            .filter(|(_, c)| !c.is_zero()),
        trunc,
    )
}

fn support(v: &[Rational]) -> usize {
    v.iter().filter(|x| !x.is_zero()).count()
}

/// The vector of smallest support, for readable witnesses.
fn sparsest(vs: &[Vec<Rational>]) -> Option<&Vec<Rational>> {
    vs.iter().min_by_key(|v| support(v))
}

fn unit(n: usize, k: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    v[k] = Rational::one();
    v
}

/// First unit vector outside the span of `cols`.
fn first_unreached(dim: usize, cols: &[Vec<Rational>]) -> Option<usize> {
    let m = Matrix::from_columns(dim, cols);
    (0..dim).find(|&k| !m.spans(&unit(dim, k)))
}

/// Matrix of `op` from the weight-`w` component to the weight `w + wt(op)` component.
pub fn component_map(chart: &Chart, op: &Derivation, w: &Weight, max_degree: u32) -> Result<ComponentMatrix> {
    let target = w + op.weight();
    ComponentMatrix::build(
        chart.component_basis_up_to(w, max_degree),
        chart.component_basis_up_to(&target, max_degree),
        chart.trunc(),
        max_degree,
        |m| Ok(op.apply(&chart.monomial(m.clone()))),
    )
}

/// Matrix of the pullback of `m` on the weight-`w` components.
pub fn morphism_component(m: &ChartMorphism, w: &Weight, max_degree: u32) -> Result<ComponentMatrix> {
    ComponentMatrix::build(
        m.target().component_basis_up_to(w, max_degree),
        m.source().component_basis_up_to(w, max_degree),
        m.source().trunc(),
        max_degree,
        |mono| m.pullback(&m.target().monomial(mono.clone())),
    )
}

/// Coefficients of the degree-one parts of the pullbacks: rows are source
/// generators, columns target generators.
pub fn linear_part(m: &ChartMorphism) -> Matrix {
    let src = m.source().coordinates();
    let tgt = m.target().coordinates();
    let mut out = Matrix::zeros(src.len(), tgt.len());
    for (j, g) in tgt.iter().enumerate() {
        let img = m.image(g);
        for (i, c) in src.iter().enumerate() {
            out[(i, j)] = img.coefficient(&Monomial::from_coordinate(c.clone()));
        }
    }
    out
}

/// Whether `m` is invertible, i.e. its linear part is.
pub fn is_isomorphism(m: &ChartMorphism) -> bool {
    m.source().len() == m.target().len() && m.source().trunc() == m.target().trunc() && {
        let j = linear_part(m);
        j.rank() == j.rows()
    }
}

/// Per-check memo of component bases and operator matrices.
struct Components<'a> {
    family: &'a OperatorFamily,
    max_degree: u32,
    bases: BTreeMap<Weight, Vec<Monomial>>,
    maps: BTreeMap<(AdditionalSymbol, Weight), ComponentMatrix>,
    inverses: BTreeMap<(AdditionalSymbol, Weight), Option<Matrix>>,
}

impl<'a> Components<'a> {
    fn new(family: &'a OperatorFamily, max_degree: u32) -> Self {
        Components {
            family,
            max_degree: max_degree.min(family.chart.trunc()),
            bases: BTreeMap::new(),
            maps: BTreeMap::new(),
            inverses: BTreeMap::new(),
        }
    }

    fn basis(&mut self, w: &Weight) -> Vec<Monomial> {
        let chart = &self.family.chart;
        let d = self.max_degree;
        self.bases
            .entry(w.clone())
            .or_insert_with(|| chart.component_basis_up_to(w, d))
            .clone()
    }

    fn map(&mut self, b: AdditionalSymbol, w: &Weight) -> Result<ComponentMatrix> {
        if let Some(m) = self.maps.get(&(b, w.clone())) {
            return Ok(m.clone());
        }
        let op = self.family.operator(b)?;
        let m = component_map(&self.family.chart, op, w, self.max_degree)?;
        self.maps.insert((b, w.clone()), m.clone());
        Ok(m)
    }

    fn inverse(&mut self, b: AdditionalSymbol, w: &Weight) -> Result<Matrix> {
        if !self.inverses.contains_key(&(b, w.clone())) {
            let m = self.map(b, w)?;
            let inv = if m.is_bijective() { m.matrix.inverse() } else { None };
            self.inverses.insert((b, w.clone()), inv);
        }
        self.inverses[&(b, w.clone())]
            .clone()
            .ok_or_else(|| Error::Degenerate(w.clone()))
    }

    /// Basis of the joint kernel of the operators whose symbol occurs in `w`.
    fn kernel_part(&mut self, w: &Weight) -> Result<Vec<Vec<Rational>>> {
        let dim = self.basis(w).len();
        let mut stacked = Matrix::zeros(0, dim);
        for b in occurring(w) {
            stacked = stacked.stack(&self.map(b, w)?.matrix);
        }
        Ok(stacked.kernel())
    }

    fn polynomial(&mut self, w: &Weight, v: &[Rational]) -> Polynomial {
        let basis = self.basis(w);
        combine(&basis, v, self.family.chart.trunc())
    }
}

/// Additional symbols with nonzero coefficient in `w`.
fn occurring(w: &Weight) -> Vec<AdditionalSymbol> {
    w.terms()
        .iter()
        .filter_map(|(s, _)| match s {
            BasisSymbol::Additional(b) => Some(*b),
            BasisSymbol::Basic(_) => None,
        })
        .collect()
}

/// A counterexample: a description and a polynomial exhibiting the failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub context: String,
    pub polynomial: Polynomial,
}

/// Outcome of a bijectivity check of one operator between two components.
#[derive(Clone, Debug)]
pub struct Nondegeneracy {
    pub bijective: bool,
    pub domain_dim: usize,
    pub codomain_dim: usize,
    /// Smallest degree bound at which bijectivity fails.
    pub degree: Option<u32>,
    pub witness: Option<Witness>,
}

/// Whether `D_b` maps the `delta` component bijectively onto the shifted one,
/// for every degree bound up to `max_degree`.
pub fn is_nondegenerate(
    family: &OperatorFamily,
    b: AdditionalSymbol,
    delta: &Weight,
    max_degree: u32,
) -> Result<Nondegeneracy> {
    let system = family.chart.system();
    let target = delta.shifted(b);
    for w in [delta, &target] {
        if !system.contains(w) {
            return Err(Error::NotInSystem(w.clone()));
        }
    }
    let full = component_map(
        &family.chart,
        family.operator(b)?,
        delta,
        max_degree.min(family.chart.trunc()),
    )?;
    for d in 0..=max_degree.min(family.chart.trunc()) {
        let m = full.restrict_degree(d);
        if m.is_bijective() {
            continue;
        }
        let kernel = m.matrix.kernel();
        let witness = match sparsest(&kernel) {
            Some(v) => Witness {
                context: format!("D_{b} kills an element of weight {delta}"),
                polynomial: m.domain_polynomial(v),
            },
            None => {
                let k = first_unreached(m.codomain.len(), &m.matrix.columns()).unwrap_or(0);
                Witness {
                    context: format!("D_{b} misses an element of weight {target}"),
                    polynomial: m.codomain_polynomial(&unit(m.codomain.len(), k)),
                }
            }
        };
        return Ok(Nondegeneracy {
            bijective: false,
            domain_dim: full.domain.len(),
            codomain_dim: full.codomain.len(),
            degree: Some(d),
            witness: Some(witness),
        });
    }
    Ok(Nondegeneracy {
        bijective: true,
        domain_dim: full.domain.len(),
        codomain_dim: full.codomain.len(),
        degree: None,
        witness: None,
    })
}

/// A component split into decomposable products and the joint kernel.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub weight: Weight,
    pub dimension: usize,
    /// Basis of the span of products of two components of nonzero weight.
    pub products: Vec<Polynomial>,
    /// Basis of the joint kernel of the operators of the occurring additional symbols.
    pub kernel: Vec<Polynomial>,
    /// Dimension of the intersection of the two spans.
    pub intersection: usize,
    pub spans: bool,
    pub witness: Option<Polynomial>,
}

/// Nonzero weights strictly below `w` coefficientwise.
fn proper_parts(w: &Weight) -> Vec<Weight> {
    let mut parts = vec![Weight::zero()];
    for (s, k) in w.terms() {
        let mut next = Vec::new();
        for p in &parts {
            for e in 0..=*k {
                next.push(p + &Weight::symbol(*s).scale(e));
            }
        }
        parts = next;
    }
    parts.into_iter().filter(|p| !p.is_zero() && p != w).collect()
}

pub fn check_decomposition(family: &OperatorFamily, delta: &Weight, max_degree: u32) -> Result<Decomposition> {
    let mut cache = Components::new(family, max_degree);
    decomposition(&mut cache, delta)
}

fn decomposition(cache: &mut Components, delta: &Weight) -> Result<Decomposition> {
    let chart = &cache.family.chart;
    let basis = cache.basis(delta);
    let dim = basis.len();
    let index: BTreeMap<Monomial, usize> = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let mut product_cols = BTreeSet::new();
    if delta.is_nonnegative() {
        for part in proper_parts(delta) {
            let rest = delta - &part;
            let left = cache.basis(&part);
            let right = cache.basis(&rest);
            for m1 in &left {
                for m2 in &right {
                    if m1.degree() + m2.degree() > cache.max_degree {
                        continue;
                    }
                    if let Some((m, _)) = m1.mul(m2) {
                        product_cols.insert(index[&m]);
                    }
                }
            }
        }
    }
    let products: Vec<Vec<Rational>> = product_cols.iter().map(|&k| unit(dim, k)).collect();
    let kernel = cache.kernel_part(delta)?;
    let p = Matrix::from_columns(dim, &products);
    let k = Matrix::from_columns(dim, &kernel);
    let joint = p.augment(&k);
    let (rp, rk, rj) = (p.rank(), k.rank(), joint.rank());
    let mut all = products.clone();
    all.extend(kernel.iter().cloned());
    let witness = first_unreached(dim, &all).map(|i| chart.monomial(basis[i].clone()));
    let trunc = chart.trunc();
    Ok(Decomposition {
        weight: delta.clone(),
        dimension: dim,
        products: products.iter().map(|v| combine(&basis, v, trunc)).collect(),
        kernel: kernel.iter().map(|v| combine(&basis, v, trunc)).collect(),
        intersection: rp + rk - rj,
        spans: rj == dim,
        witness,
    })
}

/// Outcome of the cocycle identity on the kernel of `D_j` at one weight.
#[derive(Clone, Debug)]
pub struct CocycleCheck {
    pub kernel_dim: usize,
    pub holds: bool,
    pub witness: Option<Polynomial>,
}

/// Both sides of the cocycle identity evaluated on one polynomial.
///
/// `lhs` is `D_j^-1 D_j2 f`, `rhs` is `D_j1^-1 D_j2 D_j^-1 D_j1 f`; the identity
/// asks for `lhs = -rhs`.
#[derive(Clone, Debug)]
pub struct CocycleComparison {
    pub input: Polynomial,
    pub lhs: Polynomial,
    pub rhs: Polynomial,
}

impl CocycleComparison {
    pub fn holds(&self) -> bool {
        self.lhs == -&self.rhs
    }
}

/// The weights `delta - b_j + b_j1` and `delta - b_j + b_j2` after checking the shape of `delta`.
fn cocycle_weights(
    system: &WeightSystem,
    j: AdditionalSymbol,
    j1: AdditionalSymbol,
    j2: AdditionalSymbol,
    delta: &Weight,
) -> Result<(Weight, Weight)> {
    let i = j.i;
    if j1.i != i || j2.i != i || j == j1 || j == j2 || j1 == j2 {
        return Err(Error::Hypothesis(format!(
            "{j}, {j1}, {j2} must be distinct over one basic weight"
        )));
    }
    let add = |b: AdditionalSymbol| BasisSymbol::Additional(b);
    if delta.coefficient(BasisSymbol::Basic(i)) != 1
        || delta.coefficient(add(j)) != 1
        || delta.coefficient(add(j1)) != 0
        || delta.coefficient(add(j2)) != 0
    {
        return Err(Error::Hypothesis(format!(
            "{delta} is not a{i}+{j}+theta with theta free of {j1}, {j2}"
        )));
    }
    let bj = Weight::additional(j);
    let d1 = &(delta - &bj) + &Weight::additional(j1);
    let d2 = &(delta - &bj) + &Weight::additional(j2);
    for w in [
        delta.clone(),
        d1.clone(),
        d2.clone(),
        delta.shifted(j1),
        delta.shifted(j2),
        d1.shifted(j2),
    ] {
        if !system.contains(&w) {
            return Err(Error::NotInSystem(w));
        }
    }
    Ok((d1, d2))
}

/// Matrices of both sides of the cocycle identity on the `delta` component.
fn cocycle_sides(
    cache: &mut Components,
    j: AdditionalSymbol,
    j1: AdditionalSymbol,
    j2: AdditionalSymbol,
    delta: &Weight,
) -> Result<(Matrix, Matrix, Weight)> {
    let (d1, d2) = cocycle_weights(cache.family.chart.system(), j, j1, j2, delta)?;
    let lhs = cache.inverse(j, &d2)?.mul(&cache.map(j2, delta)?.matrix);
    let rhs = cache
        .inverse(j1, &d2)?
        .mul(&cache.map(j2, &d1)?.matrix)
        .mul(&cache.inverse(j, &d1)?)
        .mul(&cache.map(j1, delta)?.matrix);
    Ok((lhs, rhs, d2))
}

pub fn check_cocycle(
    family: &OperatorFamily,
    j: AdditionalSymbol,
    j1: AdditionalSymbol,
    j2: AdditionalSymbol,
    delta: &Weight,
    max_degree: u32,
) -> Result<CocycleCheck> {
    let mut cache = Components::new(family, max_degree);
    cocycle(&mut cache, j, j1, j2, delta)
}

fn cocycle(
    cache: &mut Components,
    j: AdditionalSymbol,
    j1: AdditionalSymbol,
    j2: AdditionalSymbol,
    delta: &Weight,
) -> Result<CocycleCheck> {
    let (lhs, rhs, _) = cocycle_sides(cache, j, j1, j2, delta)?;
    let kernel = cache.map(j, delta)?.matrix.kernel();
    let failing: Vec<Vec<Rational>> = kernel
        .iter()
        .filter(|v| lhs.apply(v) != rhs.neg().apply(v))
        .cloned()
        .collect();
    let witness = sparsest(&failing).map(|v| cache.polynomial(delta, v));
    Ok(CocycleCheck {
        kernel_dim: kernel.len(),
        holds: witness.is_none(),
        witness,
    })
}

/// Evaluate both sides of the cocycle identity on an arbitrary `f` of weight `delta`.
pub fn evaluate_cocycle(
    family: &OperatorFamily,
    j: AdditionalSymbol,
    j1: AdditionalSymbol,
    j2: AdditionalSymbol,
    f: &Polynomial,
    max_degree: u32,
) -> Result<CocycleComparison> {
    let delta = homogeneous_weight(f)?;
    let mut cache = Components::new(family, max_degree);
    let (lhs, rhs, d2) = cocycle_sides(&mut cache, j, j1, j2, &delta)?;
    let v = cache.map(j, &delta)?.domain_vector(f)?;
    Ok(CocycleComparison {
        input: f.clone(),
        lhs: cache.polynomial(&d2, &lhs.apply(&v)),
        rhs: cache.polynomial(&d2, &rhs.apply(&v)),
    })
}

/// The off-kernel test input `xi1 * D_j(xi2)` and both sides of the cocycle identity on it.
pub fn cocycle_counterexample(
    family: &OperatorFamily,
    j: AdditionalSymbol,
    j1: AdditionalSymbol,
    j2: AdditionalSymbol,
    xi1: &Coordinate,
    xi2: &Coordinate,
    max_degree: u32,
) -> Result<CocycleComparison> {
    let a = Weight::basic(j.i);
    for xi in [xi1, xi2] {
        if *xi.weight() != a {
            return Err(Error::WeightMismatch {
                expected: a,
                found: xi.weight().clone(),
            });
        }
    }
    let chart = &family.chart;
    let f = &chart.generator(xi1) * &family.operator(j)?.apply(&chart.generator(xi2));
    evaluate_cocycle(family, j, j1, j2, &f, max_degree)
}

fn homogeneous_weight(p: &Polynomial) -> Result<Weight> {
    let ws = p.weights();
    match ws.len() {
        0 => Err(Error::Hypothesis("zero polynomial has no weight".into())),
        1 => Ok(ws.into_iter().next().unwrap_or_default()),
        _ => Err(Error::NotHomogeneous),
    }
}

/// Outcome of the check that `D_s^-1 D_j` carries joint kernels onto joint kernels.
#[derive(Clone, Debug)]
pub struct KernelPreservation {
    pub source_dim: usize,
    pub target_dim: usize,
    pub preserved: bool,
    pub witness: Option<Witness>,
}

/// Check `D_s^-1 D_j (S_delta) = S_delta'` with `delta' = delta - b_s + b_j`, where
/// `S_w` is the joint kernel of the operators of the additional symbols occurring in `w`.
pub fn check_kernel_preservation(
    family: &OperatorFamily,
    j: AdditionalSymbol,
    s: AdditionalSymbol,
    delta: &Weight,
    max_degree: u32,
) -> Result<KernelPreservation> {
    let mut cache = Components::new(family, max_degree);
    kernel_preservation(&mut cache, j, s, delta)
}

fn kernel_preservation_target(
    system: &WeightSystem,
    j: AdditionalSymbol,
    s: AdditionalSymbol,
    delta: &Weight,
) -> Result<Weight> {
    let i = j.i;
    if s.i != i || s == j {
        return Err(Error::Hypothesis(format!(
            "{j} and {s} must be distinct over one basic weight"
        )));
    }
    if delta.coefficient(BasisSymbol::Additional(j)) != 0
        || delta.coefficient(BasisSymbol::Basic(i)) == 0
        || delta.coefficient(BasisSymbol::Additional(s)) == 0
    {
        return Err(Error::Hypothesis(format!(
            "{delta} must contain a{i} and {s} but not {j}"
        )));
    }
    let target = &(delta - &Weight::additional(s)) + &Weight::additional(j);
    for w in [delta.clone(), target.clone(), delta.shifted(j)] {
        if !system.contains(&w) {
            return Err(Error::NotInSystem(w));
        }
    }
    Ok(target)
}

fn kernel_preservation(
    cache: &mut Components,
    j: AdditionalSymbol,
    s: AdditionalSymbol,
    delta: &Weight,
) -> Result<KernelPreservation> {
    let target = kernel_preservation_target(cache.family.chart.system(), j, s, delta)?;
    let m = cache.inverse(s, &target)?.mul(&cache.map(j, delta)?.matrix);
    let source_part = cache.kernel_part(delta)?;
    let target_part = cache.kernel_part(&target)?;
    let tdim = cache.basis(&target).len();
    let images: Vec<Vec<Rational>> = source_part.iter().map(|v| m.apply(v)).collect();
    let tmat = Matrix::from_columns(tdim, &target_part);
    let imat = Matrix::from_columns(tdim, &images);
    let mut witness = None;
    if let Some(v) = source_part.iter().find(|v| !tmat.spans(&m.apply(v))) {
        witness = Some(Witness {
            context: format!("D_{s}^-1 D_{j} leaves the joint kernel at {target}"),
            polynomial: cache.polynomial(delta, v),
        });
    } else if let Some(v) = target_part.iter().find(|v| !imat.spans(v)) {
        witness = Some(Witness {
            context: format!("joint kernel element at {target} is not reached from {delta}"),
            polynomial: cache.polynomial(&target, v),
        });
    }
    Ok(KernelPreservation {
        source_dim: source_part.len(),
        target_dim: target_part.len(),
        preserved: witness.is_none(),
        witness,
    })
}

/// The six structural properties of an operator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Property {
    Linearity,
    Supercommutation,
    Nondegeneracy,
    Decomposition,
    Cocycle,
    KernelPreservation,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Linearity,
        Property::Supercommutation,
        Property::Nondegeneracy,
        Property::Decomposition,
        Property::Cocycle,
        Property::KernelPreservation,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::Linearity => "linear over weight zero",
            Property::Supercommutation => "supercommute",
            Property::Nondegeneracy => "non-degenerate",
            Property::Decomposition => "decomposition",
            Property::Cocycle => "cocycle condition",
            Property::KernelPreservation => "preserve kernels",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail(Witness),
}

#[derive(Clone, Debug)]
pub struct PropertyOutcome {
    pub property: Property,
    /// Number of checked instances.
    pub instances: usize,
    pub status: Status,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub trunc: u32,
    pub outcomes: Vec<PropertyOutcome>,
    pub decompositions: Vec<Decomposition>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(PropertyOutcome::passed)
    }

    pub fn outcome(&self, p: Property) -> &PropertyOutcome {
        &self.outcomes[p as usize]
    }
}

struct Tally {
    property: Property,
    instances: usize,
    failure: Option<Witness>,
}

impl Tally {
    fn new(property: Property) -> Self {
        Tally {
            property,
            instances: 0,
            failure: None,
        }
    }

    fn record(&mut self, failure: Option<Witness>) {
        self.instances += 1;
        if self.failure.is_none() {
            self.failure = failure;
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            property: self.property,
            instances: self.instances,
            status: self.failure.map_or(Status::Pass, Status::Fail),
        }
    }
}

/// Run all six property checks on every applicable weight, up to `max_degree`.
///
/// Instances of the cocycle and kernel checks whose inverses do not exist are
/// skipped; the non-degeneracy outcome already records those.
pub fn check_all_properties(family: &OperatorFamily, max_degree: u32) -> Result<PropertyReport> {
    let chart = &family.chart;
    let system = chart.system();
    let elements: Vec<Weight> = system.elements().iter().cloned().collect();
    let ops = &family.operators;
    let mut cache = Components::new(family, max_degree);

    let mut linear = Tally::new(Property::Linearity);
    for (b, d) in ops {
        for x in chart.of_weight(&Weight::zero()) {
            let img = d.apply(&chart.generator(x));
            linear.record((!img.is_zero()).then(|| Witness {
                context: format!("D_{b}({x}) is nonzero"),
                polynomial: img,
            }));
        }
    }

    let mut commute = Tally::new(Property::Supercommutation);
    for (a, da) in ops {
        for (b, db) in ops.range(a..) {
            for c in chart.coordinates() {
                let img = da.supercommutator(db, &chart.generator(c));
                commute.record((!img.is_zero()).then(|| Witness {
                    context: format!("[D_{a}, D_{b}]({c}) is nonzero"),
                    polynomial: img,
                }));
            }
        }
    }

    let mut nondeg = Tally::new(Property::Nondegeneracy);
    for b in ops.keys() {
        for delta in &elements {
            if !system.contains(&delta.shifted(*b)) {
                continue;
            }
            let n = is_nondegenerate(family, *b, delta, cache.max_degree)?;
            nondeg.record(n.witness);
        }
    }

    let mut decomp = Tally::new(Property::Decomposition);
    let mut decompositions = Vec::new();
    for delta in &elements {
        let d = decomposition(&mut cache, delta)?;
        decomp.record(d.witness.clone().map(|p| Witness {
            context: format!("not spanned by products and the joint kernel at {delta}"),
            polynomial: p,
        }));
        decompositions.push(d);
    }

    let mut cocycles = Tally::new(Property::Cocycle);
    let symbols: Vec<AdditionalSymbol> = ops.keys().copied().collect();
    for delta in &elements {
        for &j in &symbols {
            for &j1 in &symbols {
                for &j2 in &symbols {
                    if cocycle_weights(system, j, j1, j2, delta).is_err() {
                        continue;
                    }
                    match cocycle(&mut cache, j, j1, j2, delta) {
                        Ok(c) => cocycles.record(c.witness.map(|p| Witness {
                            context: format!("cocycle ({j}, {j1}, {j2}) fails at {delta}"),
                            polynomial: p,
                        })),
                        Err(Error::Degenerate(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }

    let mut kernels = Tally::new(Property::KernelPreservation);
    for delta in &elements {
        for &j in &symbols {
            for &s in &symbols {
                if kernel_preservation_target(system, j, s, delta).is_err() {
                    continue;
                }
                match kernel_preservation(&mut cache, j, s, delta) {
                    Ok(k) => kernels.record(k.witness),
                    Err(Error::Degenerate(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }

    Ok(PropertyReport {
        trunc: cache.max_degree,
        outcomes: [linear, commute, nondeg, decomp, cocycles, kernels]
            .into_iter()
            .map(Tally::finish)
            .collect(),
        decompositions,
    })
}

/// Whether the composite operators reach the whole joint kernel at weight `w`:
/// every additional symbol occurring in `w` has its basic weight occurring too.
pub fn surjectivity_hypothesis(w: &Weight) -> bool {
    occurring(w)
        .into_iter()
        .all(|b| w.coefficient(BasisSymbol::Basic(b.i)) != 0)
}

/// The weight `delta` with `D^lambda(delta) = target`.
pub fn source_weight(lambda: &[AdditionalSymbol], target: &Weight) -> Weight {
    lambda.iter().fold(target.clone(), |w, b| &w - &b.shift())
}

/// Solve `D^lambda(F) = f` for `F`, where the last entry of `lambda` acts first.
///
/// `f` lives on the linearized chart and must be killed by every operator in
/// `lambda`. The answer is found by peeling one differential at a time: at each
/// step a preimage is chosen that is also killed by the differentials still to
/// be peeled. `F` lives on the source chart when its weight involves basic
/// weights only, and on the quotient of the lifted chart otherwise.
pub fn solve_inverse(lc: &LinearizedChart, lambda: &[AdditionalSymbol], f: &Polynomial) -> Result<Polynomial> {
    let distinct: BTreeSet<_> = lambda.iter().collect();
    if distinct.len() != lambda.len() {
        return Err(Error::Hypothesis("repeated operator in the composite".into()));
    }
    for &b in lambda {
        lc.operator(b)?;
    }
    if !lc.chart().owns(f) {
        return Err(Error::Hypothesis(format!(
            "{f} is not a polynomial on the linearized chart"
        )));
    }
    let quotient = lc.quotient();
    if f.is_zero() {
        return Ok(quotient.zero());
    }
    let target = homogeneous_weight(f)?;
    if !target.is_nonnegative() || !target.is_multiplicity_free() {
        return Err(Error::Hypothesis(format!(
            "{target} is not multiplicity free and non-negative"
        )));
    }
    let delta = source_weight(lambda, &target);
    if !delta.is_nonnegative() {
        return Err(Error::Hypothesis(format!("no source weight below {target}")));
    }
    for &b in lambda {
        if !lc.operator(b)?.apply(f).is_zero() {
            return Err(Error::KernelHypothesis);
        }
    }
    let trunc = quotient.trunc();
    let mut current = f.clone();
    let mut w = target;
    for (p, &b) in lambda.iter().enumerate() {
        let next = &w - &b.shift();
        let domain = quotient.component_basis(&next);
        let mut stacked = Matrix::zeros(0, domain.len());
        let mut rhs = Vec::new();
        for (q, &c) in lambda.iter().enumerate().skip(p) {
            let m = ComponentMatrix::build(
                domain.clone(),
                quotient.component_basis(&next.shifted(c)),
                trunc,
                trunc,
                |mono| lc.apply_reduced(c, &quotient.monomial(mono.clone())),
            )?;
            if q == p {
                rhs.extend(m.codomain_vector(&current)?);
            } else {
                rhs.extend(core::iter::repeat_n(Rational::zero(), m.codomain.len()));
            }
            stacked = stacked.stack(&m.matrix);
        }
        let x = stacked.solve(&rhs).ok_or(Error::NoSolution)?;
        current = combine(&domain, &x, trunc);
        w = next;
    }
    if lc.source().owns(&current) {
        Ok(current.with_trunc(lc.source().trunc()))
    } else {
        Ok(current)
    }
}

/// A degree-2 chart rebuilt from a double vector bundle chart with one odd operator.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// The rebuilt chart of type `{0, a1, 2a1}`.
    pub layout: ChartLayout,
    /// Its linearization.
    pub linearized: LinearizedChart,
    /// The isomorphism from the linearization onto the given chart, by pullbacks.
    pub morphism: ChartMorphism,
    /// Dimension of the joint kernel in the top weight.
    pub kernel_dim: usize,
    pub commutes: bool,
    pub linear_part_invertible: bool,
    /// Bijectivity of the pullback on each weight component of the system.
    pub bijective: Vec<(Weight, bool)>,
}

impl Reconstruction {
    pub fn is_isomorphism(&self) -> bool {
        self.commutes && self.linear_part_invertible && self.bijective.iter().all(|(_, b)| *b)
    }
}

/// Rebuild a chart of type `{0, a1, 2a1}` from a chart over `{0, a1, b2_1, a1+b2_1}`
/// and an odd operator of weight `b2_1 - a1`.
///
/// The new top-weight generators pull back to `z - p`, where `z` runs over the
/// top-weight generators and `p` is a sum of products with `D(p) = D(z)`.
pub fn reconstruct_degree2(dvb: &Chart, op: &Derivation) -> Result<Reconstruction> {
    let b = AdditionalSymbol::new(2, 1);
    let system = dvb.system();
    let alpha = Weight::basic(1);
    let beta = Weight::additional(b);
    let top = &alpha + &beta;
    let expected: BTreeSet<Weight> = [Weight::zero(), alpha.clone(), beta.clone(), top.clone()].into();
    if system.basis() != [BasisSymbol::Basic(1), BasisSymbol::Additional(b)] || *system.elements() != expected {
        return Err(Error::Hypothesis("chart is not over {0, a1, b2_1, a1+b2_1}".into()));
    }
    let family = OperatorFamily::new(dvb.clone(), [(b, op.clone())].into())?;
    if dvb
        .of_weight(&Weight::zero())
        .any(|x| !op.apply(&dvb.generator(x)).is_zero())
    {
        return Err(Error::Hypothesis("operator is not linear over weight zero".into()));
    }
    let trunc = dvb.trunc();
    if !is_nondegenerate(&family, b, &alpha, trunc)?.bijective {
        return Err(Error::Degenerate(alpha));
    }

    let top_map = component_map(dvb, op, &top, trunc)?;
    let kernel_dim = top_map.matrix.kernel().len();
    let products: Vec<usize> = (0..top_map.domain.len())
        .filter(|&k| top_map.domain[k].factors().iter().all(|(c, _)| *c.weight() != top))
        .collect();
    let all_rows: Vec<usize> = (0..top_map.codomain.len()).collect();
    let on_products = top_map.matrix.select(&all_rows, &products);
    let mut kappas = Vec::new();
    for z in dvb.of_weight(&top) {
        let zeta = dvb.generator(z);
        let x = on_products
            .solve(&top_map.codomain_vector(&op.apply(&zeta))?)
            .ok_or(Error::NoSolution)?;
        let mut full = vec![Rational::zero(); top_map.domain.len()];
        for (k, v) in products.iter().zip(x) {
            full[*k] = v;
        }
        kappas.push(&zeta - &top_map.domain_polynomial(&full));
    }

    let count = |w: &Weight| dvb.of_weight(w).count();
    let m2 = WeightSystem::from_rows(system.parities().to_vec(), &[vec![0], vec![1], vec![2]])?;
    let layout = ChartLayout::new(
        m2,
        count(&Weight::zero()),
        [
            (alpha.clone(), count(&alpha)),
            (Weight::basic(1).scale(2), kappas.len()),
        ]
        .into(),
        trunc,
    )?;
    let linearized = LinearizedChart::new(&layout.chart()?)?;
    let source = linearized.source();
    let position = |c: &Coordinate| source.of_weight(c.weight()).position(|d| d == c).unwrap_or(0);
    let base_gens: Vec<Coordinate> = dvb.of_weight(&Weight::zero()).cloned().collect();
    let alpha_gens: Vec<Coordinate> = dvb.of_weight(&alpha).cloned().collect();
    let mut images = BTreeMap::new();
    for g in linearized.chart().coordinates() {
        let base = source
            .lookup(g.name(), &[])
            .ok_or_else(|| Error::UnknownCoordinate(g.label()))?;
        let k = position(base);
        let img = if g.tags().is_empty() {
            if g.weight().is_zero() {
                dvb.generator(&base_gens[k])
            } else {
                dvb.generator(&alpha_gens[k])
            }
        } else if *base.weight() == alpha {
            op.apply(&dvb.generator(&alpha_gens[k]))
        } else {
            kappas[k].clone()
        };
        images.insert(g.clone(), img);
    }
    let morphism = ChartMorphism::new(dvb.clone(), linearized.chart().clone(), images)?;
    let commutes = morphism
        .commutation_failure(family.operators(), linearized.operators())?
        .is_none();
    let bijective = system
        .elements()
        .iter()
        .map(|w| Ok((w.clone(), morphism_component(&morphism, w, trunc)?.is_bijective())))
        .collect::<Result<Vec<_>>>()?;
    Ok(Reconstruction {
        linear_part_invertible: is_isomorphism(&morphism),
        layout,
        linearized,
        morphism,
        kernel_dim,
        commutes,
        bijective,
    })
}

/// The morphism from the rebuilt chart to the chart whose linearization was
/// reconstructed, found by inverting the single operator on the top-weight pullbacks.
///
/// Its linearization coincides with the reconstruction morphism.
pub fn recover_source_morphism(rec: &Reconstruction, source: &LinearizedChart) -> Result<ChartMorphism> {
    if rec.morphism.source().coordinates() != source.chart().coordinates() {
        return Err(Error::Hypothesis(
            "reconstruction was built from a different chart".into(),
        ));
    }
    let b = AdditionalSymbol::new(2, 1);
    let target = rec.linearized.source();
    let mut images = BTreeMap::new();
    for g in target.coordinates() {
        let img = if g.weight().basic_coefficient(1) < 2 {
            rec.morphism.image(g)
        } else {
            let lifted = rec
                .linearized
                .generator_for(g, &[b])
                .ok_or_else(|| Error::UnknownCoordinate(g.label()))?;
            solve_inverse(source, &[b], &rec.morphism.image(lifted))?
        };
        images.insert(g.clone(), img);
    }
    ChartMorphism::new(source.source().clone(), target.clone(), images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearize::{lift_morphism, linearize_chart};
    use crate::weights::Parity;
    use proptest::prelude::*;

    fn b(j: u32, i: u32) -> AdditionalSymbol {
        AdditionalSymbol::new(j, i)
    }

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    fn chart(parities: &[u8], rows: &[&[i64]], base_dim: usize, dims: &[usize], trunc: u32) -> Chart {
        let ws = WeightSystem::from_rows(
            parities.iter().map(|&p| Parity::from_bit(p)).collect(),
            &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        let nonzero: Vec<Weight> = ws.elements().iter().filter(|w| !w.is_zero()).cloned().collect();
        let map = nonzero.into_iter().zip(dims.iter().copied()).collect();
        ChartLayout::new(ws, base_dim, map, trunc).unwrap().chart().unwrap()
    }

    fn m3() -> LinearizedChart {
        linearize_chart(&chart(&[1], &[&[0], &[1], &[2], &[3]], 1, &[1, 1, 1], 3)).unwrap()
    }

    fn w(terms: &[(BasisSymbol, i64)]) -> Weight {
        Weight::from_terms(terms.iter().copied())
    }

    fn a(i: u32) -> BasisSymbol {
        BasisSymbol::Basic(i)
    }

    fn bb(j: u32, i: u32) -> BasisSymbol {
        BasisSymbol::Additional(b(j, i))
    }

    /// Entry-by-entry recomputation of a component matrix.
    fn oracle_matrix(chart: &Chart, op: &Derivation, w: &Weight, d: u32) -> Vec<Vec<Rational>> {
        let dom = chart.component_basis_up_to(w, d);
        let cod = chart.component_basis_up_to(&(w + op.weight()), d);
        cod.iter()
            .map(|r| {
                dom.iter()
                    .map(|c| op.apply(&chart.monomial(c.clone())).coefficient(r))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn component_map_matches_entrywise_oracle() {
        let lc = m3();
        for op in lc.operators().values() {
            for wt in lc.system().elements() {
                let m = component_map(lc.chart(), op, wt, 3).unwrap();
                let oracle = oracle_matrix(lc.chart(), op, wt, 3);
                for (i, row) in oracle.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        assert_eq!(&m.matrix[(i, j)], v);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_operator_gives_zero_matrix() {
        let lc = m3();
        let zero = Derivation::new(b(2, 1).shift(), Parity::Odd, BTreeMap::new());
        let m = component_map(lc.chart(), &zero, &Weight::basic(1), 3).unwrap();
        assert!(m.matrix.is_zero());
    }

    #[test]
    fn degree_two_operator_is_bijective_on_first_weight() {
        let lc = linearize_chart(&chart(&[0], &[&[0], &[1], &[2]], 1, &[2, 1], 3)).unwrap();
        let fam = OperatorFamily::from(&lc);
        let n = is_nondegenerate(&fam, b(2, 1), &Weight::basic(1), 3).unwrap();
        assert!(n.bijective);
        assert!(n.domain_dim > 0);
        assert_eq!(n.domain_dim, n.codomain_dim);
        assert!(matches!(
            is_nondegenerate(&fam, b(2, 1), &Weight::additional(b(2, 1)), 3),
            Err(Error::NotInSystem(_))
        ));
    }

    #[test]
    fn every_applicable_operator_of_m3_is_nondegenerate() {
        let lc = m3();
        let fam = OperatorFamily::from(&lc);
        let mut count = 0;
        for &s in lc.lifts() {
            for delta in lc.system().elements() {
                if lc.system().contains(&delta.shifted(s)) {
                    assert!(is_nondegenerate(&fam, s, delta, 3).unwrap().bijective);
                    count += 1;
                }
            }
        }
        assert!(count >= 4);
    }

    #[test]
    fn zeroed_image_is_degenerate_with_witness() {
        let lc = m3();
        let mut fam = OperatorFamily::from(&lc);
        let xi = lc.chart().lookup("xi<a1>", &[]).unwrap().clone();
        fam.set_image(b(2, 1), xi.clone(), lc.chart().zero()).unwrap();
        let n = is_nondegenerate(&fam, b(2, 1), &Weight::basic(1), 3).unwrap();
        assert!(!n.bijective);
        assert_eq!(n.degree, Some(1));
        assert_eq!(n.witness.unwrap().polynomial, lc.chart().generator(&xi));
        let report = check_all_properties(&fam, 3).unwrap();
        assert!(!report.outcome(Property::Nondegeneracy).passed());
    }

    #[test]
    fn m3_decomposition_at_a1_plus_b31() {
        let lc = m3();
        let fam = OperatorFamily::from(&lc);
        let delta = w(&[(a(1), 1), (bb(3, 1), 1)]);
        let d = check_decomposition(&fam, &delta, 3).unwrap();
        assert!(d.spans);
        assert_eq!(d.intersection, 0);
        let xi = lc.chart().lookup("xi<a1>", &[]).unwrap();
        let dxi = lc.chart().lookup("xi<a1>", &[b(3, 1)]).unwrap();
        let core = lc.chart().lookup("xi<2a1>", &[b(3, 1)]).unwrap();
        let product = &lc.chart().generator(xi) * &lc.chart().generator(dxi);
        assert!(d.products.contains(&product));
        assert!(d.kernel.contains(&lc.chart().generator(core)));
        assert_eq!(d.products.len() + d.kernel.len(), d.dimension);
    }

    #[test]
    fn decomposition_at_a_basic_weight_is_all_kernel() {
        let lc = m3();
        let d = check_decomposition(&OperatorFamily::from(&lc), &Weight::basic(1), 3).unwrap();
        assert!(d.products.is_empty());
        assert_eq!(d.kernel.len(), d.dimension);
    }

    /// Product span described directly: monomials with at least two factors of nonzero weight.
    fn oracle_product_count(chart: &Chart, delta: &Weight, d: u32) -> usize {
        chart
            .component_basis_up_to(delta, d)
            .iter()
            .filter(|m| {
                m.factors()
                    .iter()
                    .filter(|(c, _)| !c.weight().is_zero())
                    .map(|(_, e)| *e)
                    .sum::<u32>()
                    >= 2
            })
            .count()
    }

    #[test]
    fn product_span_matches_factor_count() {
        let lc = linearize_chart(&chart(
            &[0, 1],
            &[&[0, 0], &[1, 0], &[0, 1], &[1, 1], &[2, 1]],
            1,
            &[2, 1, 1, 1],
            3,
        ))
        .unwrap();
        let fam = OperatorFamily::from(&lc);
        for delta in lc.system().elements() {
            let d = check_decomposition(&fam, delta, 3).unwrap();
            assert_eq!(d.products.len(), oracle_product_count(lc.chart(), delta, 3), "{delta}");
            assert!(d.spans, "{delta}");
        }
    }

    fn n4(dim: usize) -> LinearizedChart {
        linearize_chart(&chart(&[1], &[&[0], &[1], &[2], &[3], &[4]], 1, &[dim, 1, 1, 1], 3)).unwrap()
    }

    #[test]
    fn cocycle_holds_on_kernel_and_fails_off_it() {
        let lc = n4(2);
        let fam = OperatorFamily::from(&lc);
        let (j, j1, j2) = (b(2, 1), b(3, 1), b(4, 1));
        let delta = w(&[(a(1), 1), (bb(2, 1), 1)]);
        let c = check_cocycle(&fam, j, j1, j2, &delta, 3).unwrap();
        assert!(c.holds);
        assert!(c.kernel_dim > 0);
        let xi1 = lc.chart().lookup("xi<a1>_1", &[]).unwrap();
        let xi2 = lc.chart().lookup("xi<a1>_2", &[]).unwrap();
        let cmp = cocycle_counterexample(&fam, j, j1, j2, xi1, xi2, 3).unwrap();
        assert!(!cmp.holds());
        assert_ne!(cmp.lhs, cmp.rhs);
        let g = |c: &Coordinate, t: AdditionalSymbol| lc.chart().generator(lc.generator_for(c, &[t]).unwrap());
        let expected_lhs = &g(xi1, j2) * &lc.chart().generator(xi2);
        let expected_rhs = &lc.chart().generator(xi1) * &g(xi2, j2);
        assert!(cmp.lhs == expected_lhs || cmp.lhs == -&expected_lhs);
        assert!(cmp.rhs == expected_rhs || cmp.rhs == -&expected_rhs);
    }

    #[test]
    fn cocycle_holds_for_all_triples_with_one_dimensional_fibers() {
        let lc = n4(1);
        let fam = OperatorFamily::from(&lc);
        let report = check_all_properties(&fam, 3).unwrap();
        assert!(report.outcome(Property::Cocycle).instances > 0);
        assert!(report.passed(), "{:?}", report.outcomes);
    }

    #[test]
    fn cocycle_rejects_malformed_weights() {
        let lc = n4(1);
        let fam = OperatorFamily::from(&lc);
        let bad = w(&[(a(1), 1), (bb(3, 1), 1)]);
        assert!(matches!(
            check_cocycle(&fam, b(2, 1), b(3, 1), b(4, 1), &bad, 3),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn m3_kernel_preservation() {
        let lc = m3();
        let fam = OperatorFamily::from(&lc);
        let delta = w(&[(a(1), 1), (bb(3, 1), 1)]);
        let k = check_kernel_preservation(&fam, b(2, 1), b(3, 1), &delta, 3).unwrap();
        assert!(k.preserved);
        assert!(k.source_dim > 0);
        assert_eq!(k.source_dim, k.target_dim);
    }

    #[test]
    fn m3_passes_all_properties() {
        let lc = m3();
        let report = check_all_properties(&OperatorFamily::from(&lc), 3).unwrap();
        assert!(report.passed(), "{:?}", report.outcomes);
        for p in Property::ALL {
            let n = report.outcome(p).instances;
            assert_eq!(n == 0, p == Property::Cocycle, "{}", p.name());
        }
    }

    #[test]
    fn zero_operator_on_nonzero_fiber_fails_nondegeneracy() {
        let lc = linearize_chart(&chart(&[0], &[&[0], &[1], &[2]], 1, &[1, 1], 2)).unwrap();
        let zero = Derivation::new(b(2, 1).shift(), Parity::Odd, BTreeMap::new());
        let fam = OperatorFamily::new(lc.chart().clone(), [(b(2, 1), zero)].into()).unwrap();
        let report = check_all_properties(&fam, 2).unwrap();
        assert!(matches!(
            report.outcome(Property::Nondegeneracy).status,
            Status::Fail(_)
        ));
    }

    #[test]
    fn solve_inverse_on_generator() {
        let lc = m3();
        let xi2 = lc.source().lookup("xi<2a1>", &[]).unwrap();
        let f = lc.chart().generator(lc.generator_for(xi2, &[b(2, 1)]).unwrap());
        let got = solve_inverse(&lc, &[b(2, 1)], &f).unwrap();
        assert_eq!(got, lc.source().generator(xi2));
    }

    #[test]
    fn solve_inverse_on_product_of_odd_generators() {
        let src = chart(&[1], &[&[0], &[1], &[3]], 1, &[2, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let xi1 = src.lookup("xi<a1>_1", &[]).unwrap();
        let xi2 = src.lookup("xi<a1>_2", &[]).unwrap();
        let g = |c: &Coordinate, t: AdditionalSymbol| lc.chart().generator(lc.generator_for(c, &[t]).unwrap());
        let f = &(&g(xi1, b(3, 1)) * &g(xi2, b(2, 1))) - &(&g(xi1, b(2, 1)) * &g(xi2, b(3, 1)));
        let got = solve_inverse(&lc, &[b(2, 1), b(3, 1)], &f).unwrap();
        assert_eq!(got, &src.generator(xi1) * &src.generator(xi2));
        assert!(!surjectivity_hypothesis(
            &(&Weight::additional(b(2, 1)) + &Weight::additional(b(3, 1)))
        ));
    }

    #[test]
    fn inputs_outside_the_image_are_rejected() {
        let src = chart(&[1], &[&[0], &[1], &[3]], 1, &[2, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let xi1 = src.lookup("xi<a1>_1", &[]).unwrap();
        let xi2 = src.lookup("xi<a1>_2", &[]).unwrap();
        let g = |c: &Coordinate, t: AdditionalSymbol| lc.chart().generator(lc.generator_for(c, &[t]).unwrap());
        let outside_image = &g(xi1, b(2, 1)) * &g(xi2, b(3, 1));
        assert_eq!(
            solve_inverse(&lc, &[b(2, 1), b(3, 1)], &outside_image),
            Err(Error::NoSolution)
        );
        let off_kernel = &lc.chart().generator(xi1) * &g(xi2, b(2, 1));
        assert_eq!(
            solve_inverse(&lc, &[b(2, 1)], &off_kernel),
            Err(Error::KernelHypothesis)
        );
        assert!(matches!(
            solve_inverse(&lc, &[b(2, 1), b(2, 1)], &outside_image),
            Err(Error::Hypothesis(_))
        ));
    }

    /// Direct solve: matrix of the composite from the whole source component.
    fn oracle_inverse(lc: &LinearizedChart, lambda: &[AdditionalSymbol], f: &Polynomial) -> Option<Polynomial> {
        let target = homogeneous_weight(f).ok()?;
        let delta = source_weight(lambda, &target);
        let src = lc.source();
        let dom = src.component_basis(&delta);
        let cod = lc.quotient().component_basis(&target);
        let images: Vec<Polynomial> = dom
            .iter()
            .map(|m| lc.apply_d_lambda(lambda, &src.monomial(m.clone())).unwrap())
            .collect();
        let cols: Vec<Vec<Rational>> = images
            .iter()
            .map(|p| cod.iter().map(|m| p.coefficient(m)).collect())
            .collect();
        let rhs: Vec<Rational> = cod.iter().map(|m| f.coefficient(m)).collect();
        let x = Matrix::from_columns(cod.len(), &cols).solve(&rhs)?;
        Some(combine(&dom, &x, src.trunc()))
    }

    #[test]
    fn peeling_agrees_with_direct_solve() {
        let src = chart(&[0], &[&[0], &[1], &[2], &[3]], 1, &[2, 1, 1], 3);
        let lc = linearize_chart(&src).unwrap();
        let lambda = [b(2, 1), b(3, 1)];
        let delta = Weight::basic(1).scale(3);
        for m in src.component_basis(&delta) {
            let f0 = src.monomial(m);
            let f = lc.apply_d_lambda(&lambda, &f0).unwrap();
            let got = solve_inverse(&lc, &lambda, &f).unwrap();
            assert_eq!(got, f0);
            assert_eq!(oracle_inverse(&lc, &lambda, &f), Some(f0));
        }
    }

    #[test]
    fn every_kernel_element_is_reached_under_the_hypothesis() {
        let lc = m3();
        let lambda = [b(2, 1), b(3, 1)];
        let target = w(&[(a(1), 1), (bb(2, 1), 1), (bb(3, 1), 1)]);
        assert!(surjectivity_hypothesis(&target));
        let fam = OperatorFamily::from(&lc);
        let mut cache = Components::new(&fam, 3);
        let mut stacked = Matrix::zeros(0, cache.basis(&target).len());
        for s in lambda {
            stacked = stacked.stack(&cache.map(s, &target).unwrap().matrix);
        }
        let kernel = stacked.kernel();
        assert!(!kernel.is_empty());
        for v in kernel {
            let f = cache.polynomial(&target, &v);
            let big_f = solve_inverse(&lc, &lambda, &f).unwrap();
            assert_eq!(lc.apply_d_lambda(&lambda, &big_f).unwrap(), f);
        }
    }

    fn m2_round_trip(parity: u8, dims: (usize, usize, usize)) {
        let src = chart(&[parity], &[&[0], &[1], &[2]], dims.0, &[dims.1, dims.2], 3);
        let lc = linearize_chart(&src).unwrap();
        let op = lc.operator(b(2, 1)).unwrap();
        let rec = reconstruct_degree2(lc.chart(), op).unwrap();
        assert!(rec.is_isomorphism(), "{:?}", rec.bijective);
        assert_eq!(rec.layout.dim(&Weight::basic(1)), dims.1);
        assert_eq!(rec.layout.dim(&Weight::basic(1).scale(2)), dims.2);
        let psi = recover_source_morphism(&rec, &lc).unwrap();
        assert!(is_isomorphism(&psi));
        let lifted = lift_morphism(&psi, &lc, &rec.linearized).unwrap();
        assert!(lifted.same_pullbacks(&rec.morphism));
    }

    #[test]
    fn degree_two_round_trips() {
        m2_round_trip(0, (1, 2, 1));
        m2_round_trip(1, (1, 2, 2));
        m2_round_trip(1, (2, 1, 1));
    }

    #[test]
    fn trivial_core_reconstructs_without_top_generators() {
        let src = chart(&[0], &[&[0], &[1], &[2]], 1, &[2, 0], 3);
        let lc = linearize_chart(&src).unwrap();
        let rec = reconstruct_degree2(lc.chart(), lc.operator(b(2, 1)).unwrap()).unwrap();
        assert_eq!(rec.layout.dim(&Weight::basic(1).scale(2)), 0);
        assert!(rec.is_isomorphism());
        assert!(rec.kernel_dim > 0);
    }

    #[test]
    fn single_odd_generator_reconstructs() {
        m2_round_trip(1, (1, 1, 1));
    }

    #[test]
    fn degenerate_operator_is_rejected() {
        let src = chart(&[0], &[&[0], &[1], &[2]], 1, &[1, 1], 2);
        let lc = linearize_chart(&src).unwrap();
        let zero = Derivation::new(b(2, 1).shift(), Parity::Odd, BTreeMap::new());
        assert!(matches!(
            reconstruct_degree2(lc.chart(), &zero),
            Err(Error::Degenerate(_))
        ));
    }

    fn random_source() -> impl Strategy<Value = (u8, Vec<usize>)> {
        (0u8..2, proptest::collection::vec(1usize..3, 3))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn linearized_m3_families_pass((p, dims) in random_source()) {
            let src = chart(&[p], &[&[0], &[1], &[2], &[3]], 1, &dims, 2);
            let lc = linearize_chart(&src).unwrap();
            let report = check_all_properties(&OperatorFamily::from(&lc), 2).unwrap();
            prop_assert!(report.passed(), "{:?}", report.outcomes);
        }

        #[test]
        fn solve_round_trips((p, dims) in random_source(), seed in 0usize..64) {
            let src = chart(&[p], &[&[0], &[1], &[2], &[3]], 1, &dims, 3);
            let lc = linearize_chart(&src).unwrap();
            let lambda = [b(2, 1), b(3, 1)];
            for delta in [Weight::basic(1).scale(2), Weight::basic(1).scale(3)] {
                let basis = src.component_basis(&delta);
                if basis.is_empty() {
                    continue;
                }
                let mut f0 = src.zero();
                for (k, m) in basis.iter().enumerate() {
                    let c = ((seed >> (k % 6)) as i64 % 5) - 2;
                    f0 = &f0 + &src.monomial(m.clone()).scale(&q(c));
                }
                let f = lc.apply_d_lambda(&lambda, &f0).unwrap();
                let got = solve_inverse(&lc, &lambda, &f).unwrap();
                prop_assert_eq!(got, f0);
            }
        }
    }
}
