//! Reduction of fully contracted quadratic scalars to the invariant basis
//! `{R_l, T_l, M_l, N_l}`.
//!
//! Multiterm identities (the two Bianchi families) are handled by relation
//! closure and exact Gaussian elimination rather than rewriting: starting
//! from the canonical monomials of the input, every relation instance is
//! assembled into a sparse system over canonical keys, and elimination
//! expresses the input over the keys of the defining basis monomials. Any
//! gap surfaces as an `Irreducible` error naming the offending key instead
//! of a wrong answer.
//!
//! The partially contracted families `X^g_l` expand into the basis by pure
//! matching enumeration; the closed-form coefficients `d^g_l`, `e^g_l` live
//! in [`crate::comb`] and the enumeration here is the independent route used
//! to check them and the recursion laws.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::canon::{canonicalize, symmetry_group_order, Canonical, CanonicalKey, KeyMode};
use crate::comb::{binom, d_coeff, double_factorial_odd, e_coeff, factorial};
use crate::expr::{print, Expression, Factor, Kind, Label, Monomial};
use crate::ratio::{q_big, q_int, Q};
use crate::rules::{first_bianchi_closure, normalize_monomial, second_bianchi_closure, HypothesisSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    R,
    T,
    M,
    N,
}

impl Family {
    pub fn kind(self) -> Kind {
        match self {
            Family::R => Kind::Riem,
            _ => Kind::Ric,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::R => "R",
            Family::T => "T",
            Family::M => "M",
            Family::N => "N",
        }
    }

    /// Extra derivative slots wired into the other factor's body (0 for the
    /// square families, 1 for `M`, 2 for `N`).
    pub fn body_links(self) -> u32 {
        match self {
            Family::R | Family::T => 0,
            Family::M => 1,
            Family::N => 2,
        }
    }
}

/// Invariant names: the final basis `X_l`, the partially contracted families
/// `X^g_l` (`l` Laplacians on the first factor), and the doubled family
/// `T^g_{1,1}` (one Laplacian on each factor).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvariantTag {
    Basis(Family, u32),
    Sup(Family, u32, u32),
    Sup11(u32),
}

impl fmt::Display for InvariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantTag::Basis(fam, l) => write!(f, "{}_{}", fam.name(), l),
            InvariantTag::Sup(fam, g, 0) => write!(f, "{}^{}", fam.name(), g),
            InvariantTag::Sup(fam, g, l) => write!(f, "{}^{}_{}", fam.name(), g, l),
            InvariantTag::Sup11(g) => write!(f, "T^{}_(1,1)", g),
        }
    }
}

impl InvariantTag {
    /// Basis tags outside their defining range are conventionally zero:
    /// `T_l, R_l` need `2l <= w`, `M_l` needs `2l+1 <= w`, `N_l` needs
    /// `2l+2 <= w`.
    pub fn in_range(&self, omega: u32) -> bool {
        match self {
            InvariantTag::Basis(fam, l) => 2 * l + fam.body_links() <= omega,
            InvariantTag::Sup(fam, g, l) => g + 2 * l + fam.body_links() <= omega,
            InvariantTag::Sup11(g) => g + 2 <= omega,
        }
    }
}

/// Exact-rational linear combination over invariant tags. Inserting a tag
/// that is conventionally zero for the given jet order is a no-op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisCombination {
    pub omega: u32,
    terms: BTreeMap<InvariantTag, Q>,
}

impl BasisCombination {
    pub fn new(omega: u32) -> Self {
        BasisCombination { omega, terms: BTreeMap::new() }
    }

    pub fn add(&mut self, tag: InvariantTag, coeff: Q) {
        if coeff.is_zero() || !tag.in_range(self.omega) {
            return;
        }
        let entry = self.terms.entry(tag).or_insert_with(Q::zero);
        *entry = &*entry + &coeff;
        if entry.is_zero() {
            self.terms.remove(&tag);
        }
    }

    pub fn add_all(&mut self, other: &BasisCombination) {
        for (tag, c) in &other.terms {
            self.add(*tag, c.clone());
        }
    }

    pub fn scaled(&self, c: &Q) -> BasisCombination {
        let mut out = BasisCombination::new(self.omega);
        for (tag, v) in &self.terms {
            out.add(*tag, v * c);
        }
        out
    }

    pub fn sub(&self, other: &BasisCombination) -> BasisCombination {
        let mut out = self.clone();
        out.add_all(&other.scaled(&q_int(-1)));
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&InvariantTag, &Q)> {
        self.terms.iter()
    }

    pub fn coeff(&self, tag: &InvariantTag) -> Q {
        self.terms.get(tag).cloned().unwrap_or_else(Q::zero)
    }

    pub fn single(omega: u32, tag: InvariantTag, coeff: Q) -> Self {
        let mut out = BasisCombination::new(omega);
        out.add(tag, coeff);
        out
    }

    /// Only final-basis tags present?
    pub fn is_final(&self) -> bool {
        self.terms.keys().all(|t| matches!(t, InvariantTag::Basis(..)))
    }
}

impl fmt::Display for BasisCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(tag, c)| format!("{} {}", crate::ratio::q_display(c), tag))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

// ---------------------------------------------------------------------------
// Defining monomials of the basis invariants
// ---------------------------------------------------------------------------

struct LabelGen(u64);

impl LabelGen {
    fn fresh(&mut self) -> Label {
        let l = Label::Anon(self.0);
        self.0 += 1;
        l
    }

    fn pair(&mut self) -> (Label, Label) {
        let l = self.fresh();
        (l.clone(), l)
    }
}

/// The defining monomial of a basis invariant (unit coefficient, fully
/// contracted, both factors of derivative order `omega`).
pub fn basis_monomial(tag: InvariantTag, omega: u32) -> Option<Monomial> {
    let InvariantTag::Basis(fam, ell) = tag else { return None };
    if !tag.in_range(omega) {
        return None;
    }
    let mut gen = LabelGen(0);
    let cross = omega - 2 * ell - fam.body_links();
    let k: Vec<Label> = (0..cross).map(|_| gen.fresh()).collect();
    let mut d1: Vec<Label> = k.clone();
    let mut d2: Vec<Label> = k.clone();
    for _ in 0..ell {
        let (a, b) = gen.pair();
        d1.push(a);
        d1.push(b);
        let (a, b) = gen.pair();
        d2.push(a);
        d2.push(b);
    }
    let (body1, body2) = match fam {
        Family::R => {
            let (i, a, b, j) = (gen.fresh(), gen.fresh(), gen.fresh(), gen.fresh());
            (vec![i.clone(), a.clone(), b.clone(), j.clone()], vec![i, a, b, j])
        }
        Family::T => {
            let (i, j) = (gen.fresh(), gen.fresh());
            (vec![i.clone(), j.clone()], vec![i, j])
        }
        Family::M => {
            // grad_{K a} X_{bc} . grad_{K c} X_{ab}
            let (a, b, c) = (gen.fresh(), gen.fresh(), gen.fresh());
            d1.push(a.clone());
            d2.push(c.clone());
            (vec![b.clone(), c], vec![a, b])
        }
        Family::N => {
            // grad_{K' cd} X_{ab} . grad_{K' ab} X_{cd}
            let (a, b, c, d) = (gen.fresh(), gen.fresh(), gen.fresh(), gen.fresh());
            d1.push(c.clone());
            d1.push(d.clone());
            d2.push(a.clone());
            d2.push(b.clone());
            (vec![a, b], vec![c, d])
        }
    };
    let kind = fam.kind();
    let f1 = Factor { kind, deriv: d1, body: body1, pinned: None };
    let f2 = Factor { kind, deriv: d2, body: body2, pinned: None };
    Some(Monomial { coeff: q_int(1), factors: vec![f1, f2] })
}

/// All basis tags that exist at this jet order, in display order.
pub fn basis_tags(omega: u32) -> Vec<InvariantTag> {
    let mut out = Vec::new();
    for fam in [Family::R, Family::T, Family::M, Family::N] {
        let mut l = 0;
        while 2 * l + fam.body_links() <= omega {
            out.push(InvariantTag::Basis(fam, l));
            l += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Closed-form and enumerated expansions of the partially contracted families
// ---------------------------------------------------------------------------

/// Matching-enumeration expansion of `X^g_l`: the two-by-two contraction of
/// the symmetrisation over the free blocks, with `a` internal pairs on the
/// first factor, lands on `X_{l+a}` with multiplicity
/// `2^(m/2) (m/2)! C(g,2a)(2a-1)!! C(g+2l,2(a+l))(2(a+l)-1)!! (g-2a)!`.
pub fn sup_expand_enumerated(gamma: u32, ell: u32) -> Vec<(u32, Q)> {
    let g = gamma as u64;
    let l = ell as u64;
    let half = g + l;
    let prefactor = q_big(BigInt::from(2).pow(half as u32) * factorial(half));
    let mut out = Vec::new();
    let mut a = 0u64;
    while 2 * a <= g {
        let b = a + l;
        let count = binom(g as i64, 2 * a as i64)
            * double_factorial_odd(a)
            * binom((g + 2 * l) as i64, 2 * b as i64)
            * double_factorial_odd(b)
            * factorial(g - 2 * a);
        out.push(((l + a) as u32, prefactor.clone() * q_big(count)));
        a += 1;
    }
    out
}

/// Same enumeration for the doubled family `T^g_{1,1}` (one Laplacian on
/// each factor, equal free blocks of size `g`).
pub fn sup11_expand_enumerated(gamma: u32) -> Vec<(u32, Q)> {
    let g = gamma as u64;
    let prefactor = q_big(BigInt::from(2).pow(g as u32) * factorial(g));
    let mut out = Vec::new();
    let mut a = 0u64;
    while 2 * a <= g {
        let count = binom(g as i64, 2 * a as i64).pow(2)
            * double_factorial_odd(a).pow(2)
            * factorial(g - 2 * a);
        out.push(((1 + a) as u32, prefactor.clone() * q_big(count)));
        a += 1;
    }
    out
}

/// Closed-form expansion over the final basis: `X^g = sum d^g_l X_l`,
/// `X^{g}_1 = sum e^{g+2}_{l-1} X_l`, `T^g_{1,1} = sum d^g_{l-1} T_l`;
/// deeper Laplacian counts fall back to the enumeration.
pub fn expand_gamma(tag: InvariantTag, omega: u32) -> BasisCombination {
    let mut out = BasisCombination::new(omega);
    match tag {
        InvariantTag::Basis(..) => out.add(tag, q_int(1)),
        InvariantTag::Sup(fam, g, 0) => {
            for l in 0..=(g / 2) {
                out.add(InvariantTag::Basis(fam, l), d_coeff(g, l));
            }
        }
        InvariantTag::Sup(fam, g, 1) => {
            for l in 1..=(g / 2 + 1) {
                out.add(InvariantTag::Basis(fam, l), e_coeff(g + 2, l - 1));
            }
        }
        InvariantTag::Sup(fam, g, ell) => {
            for (l, c) in sup_expand_enumerated(g, ell) {
                out.add(InvariantTag::Basis(fam, l), c);
            }
        }
        InvariantTag::Sup11(g) => {
            for l in 1..=(g / 2 + 1) {
                out.add(InvariantTag::Basis(Family::T, l), d_coeff(g, l - 1));
            }
        }
    }
    out
}

/// Expands every superscript tag of a combination into the final basis.
pub fn expand_all(comb: &BasisCombination) -> BasisCombination {
    let mut out = BasisCombination::new(comb.omega);
    for (tag, c) in comb.terms() {
        out.add_all(&expand_gamma(*tag, comb.omega).scaled(c));
    }
    out
}

/// The partially contracted pattern behind `X^g_l` (or `T^g_{1,1}` with
/// `double`), as an expression plus the free labels its two-by-two
/// symmetrised contraction ranges over. Independent of the closed forms.
pub fn sup_pattern(fam: Family, gamma: u32, ell: u32, double: bool, omega: u32) -> Option<(Expression, Vec<Label>)> {
    let links = fam.body_links();
    let (l1, l2) = if double { (1, 1) } else { (ell, 0) };
    let free1 = gamma;
    let free2 = if double { gamma } else { gamma + 2 * ell };
    let beta = omega.checked_sub(free1 + 2 * l1 + links)?;
    if free2 + 2 * l2 + beta + links != omega {
        return None;
    }
    let mut gen = LabelGen(0);
    let k: Vec<Label> = (0..beta).map(|_| gen.fresh()).collect();
    let mut d1 = k.clone();
    let mut d2 = k;
    for _ in 0..l1 {
        let (a, b) = gen.pair();
        d1.push(a);
        d1.push(b);
    }
    for _ in 0..l2 {
        let (a, b) = gen.pair();
        d2.push(a);
        d2.push(b);
    }
    let mut frees = Vec::new();
    for i in 0..free1 {
        let l = Label::named(&format!("u{i}"));
        frees.push(l.clone());
        d1.push(l);
    }
    for i in 0..free2 {
        let l = Label::named(&format!("v{i}"));
        frees.push(l.clone());
        d2.push(l);
    }
    let (body1, body2) = match fam {
        Family::R => {
            let (i, a, b, j) = (gen.fresh(), gen.fresh(), gen.fresh(), gen.fresh());
            (vec![i.clone(), a.clone(), b.clone(), j.clone()], vec![i, a, b, j])
        }
        Family::T => {
            let (i, j) = (gen.fresh(), gen.fresh());
            (vec![i.clone(), j.clone()], vec![i, j])
        }
        Family::M => {
            let (p, i, j) = (gen.fresh(), gen.fresh(), gen.fresh());
            d1.push(p.clone());
            d2.push(i.clone());
            (vec![i, j.clone()], vec![p, j])
        }
        Family::N => {
            let (p, q, i, j) = (gen.fresh(), gen.fresh(), gen.fresh(), gen.fresh());
            d1.push(p.clone());
            d1.push(q.clone());
            d2.push(i.clone());
            d2.push(j.clone());
            (vec![i, j], vec![p, q])
        }
    };
    let kind = fam.kind();
    let m = Monomial {
        coeff: q_int(1),
        factors: vec![
            Factor { kind, deriv: d1, body: body1, pinned: None },
            Factor { kind, deriv: d2, body: body2, pinned: None },
        ],
    };
    Some((Expression::from_monomials_unchecked(vec![m]), frees))
}

// ---------------------------------------------------------------------------
// Reduction to the basis
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("irreducible monomial class (missing relation): {monomial}")]
    Irreducible { monomial: String },
    #[error("relation closure produced a dependency among basis invariants: {0}")]
    BasisDependent(String),
    #[error("expression outside the reducible regime: {0}")]
    WrongRegime(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReduceStats {
    pub monomial_classes: usize,
    pub relation_rows: usize,
    pub max_group_order: usize,
}

type Row = BTreeMap<usize, Q>;

fn row_sub_scaled(target: &mut Row, factor: &Q, source: &Row) {
    for (idx, c) in source {
        let entry = target.entry(*idx).or_insert_with(Q::zero);
        *entry = &*entry - &(factor * c);
        if entry.is_zero() {
            target.remove(idx);
        }
    }
}

fn row_normalize(row: &mut Row) {
    if let Some((_, lead)) = row.iter().next().map(|(i, c)| (*i, c.clone())) {
        if !lead.is_one() {
            for c in row.values_mut() {
                *c = &*c / &lead;
            }
        }
    }
}

/// Reduces a fully contracted expression (quadratic in curvature, both
/// factors of derivative order `omega` after normalisation) to the invariant
/// basis.
pub fn reduce_to_basis(e: &Expression, h: &HypothesisSet) -> Result<(BasisCombination, ReduceStats), ReduceError> {
    let omega = h.omega;
    let mut stats = ReduceStats::default();

    // canonical coordinates of the input
    let mut reps: BTreeMap<CanonicalKey, Monomial> = BTreeMap::new();
    let mut vector: BTreeMap<CanonicalKey, Q> = BTreeMap::new();
    let mut queue: VecDeque<CanonicalKey> = VecDeque::new();
    let mut enqueue = |m: &Monomial,
                       reps: &mut BTreeMap<CanonicalKey, Monomial>,
                       queue: &mut VecDeque<CanonicalKey>,
                       stats: &mut ReduceStats|
     -> Option<(CanonicalKey, Q)> {
        match canonicalize(m, KeyMode::Exact).expect("valid monomial") {
            Canonical::Zero => None,
            Canonical::Term(key, rep) => {
                stats.max_group_order = stats.max_group_order.max(symmetry_group_order(m));
                let coeff = rep.coeff.clone();
                if !reps.contains_key(&key) {
                    let mut unit = rep;
                    unit.coeff = q_int(1);
                    reps.insert(key.clone(), unit);
                    queue.push_back(key.clone());
                }
                Some((key, coeff))
            }
        }
    };

    for m in &e.monomials {
        if !m.free_labels().is_empty() {
            return Err(ReduceError::WrongRegime(format!("free labels in {}", print(e))));
        }
        let Some(n) = normalize_monomial(m, h) else { continue };
        if n.factors.len() != 2 || n.factors.iter().any(|f| f.order() != omega as usize || f.pinned.is_some()) {
            return Err(ReduceError::WrongRegime(format!(
                "expected two order-{omega} factors, got {}",
                print(&Expression::from_monomials_unchecked(vec![n.clone()]))
            )));
        }
        if let Some((key, c)) = enqueue(&n, &mut reps, &mut queue, &mut stats) {
            let entry = vector.entry(key).or_insert_with(Q::zero);
            *entry = &*entry + &c;
        }
    }

    // relation closure over reachable canonical classes
    let mut raw_rows: BTreeSet<Vec<(CanonicalKey, Q)>> = BTreeSet::new();
    while let Some(key) = queue.pop_front() {
        let rep = reps.get(&key).expect("queued key has rep").clone();
        let mut relations = first_bianchi_closure(std::slice::from_ref(&rep));
        relations.extend(second_bianchi_closure(std::slice::from_ref(&rep)));
        for relation in relations {
            let mut row: BTreeMap<CanonicalKey, Q> = BTreeMap::new();
            for term in relation {
                let Some(n) = normalize_monomial(&term, h) else { continue };
                if let Some((k, c)) = enqueue(&n, &mut reps, &mut queue, &mut stats) {
                    let entry = row.entry(k).or_insert_with(Q::zero);
                    *entry = &*entry + &c;
                }
            }
            row.retain(|_, c| !c.is_zero());
            if !row.is_empty() {
                let mut flat: Vec<(CanonicalKey, Q)> = row.into_iter().collect();
                let lead = flat[0].1.clone();
                for (_, c) in &mut flat {
                    *c = &*c / &lead;
                }
                raw_rows.insert(flat);
            }
        }
    }
    stats.monomial_classes = reps.len();
    stats.relation_rows = raw_rows.len();

    // variable order: non-basis classes first, basis classes last
    let mut basis_of_key: BTreeMap<CanonicalKey, (InvariantTag, Q)> = BTreeMap::new();
    for tag in basis_tags(omega) {
        let m = basis_monomial(tag, omega).expect("in-range tag");
        match canonicalize(&m, KeyMode::Exact).expect("valid basis monomial") {
            Canonical::Term(key, rep) => {
                // VALUE(unit rep) = sign * tag
                basis_of_key.insert(key, (tag, rep.coeff));
            }
            Canonical::Zero => panic!("basis monomial {tag} canonicalised to zero"),
        }
    }
    let mut index: BTreeMap<CanonicalKey, usize> = BTreeMap::new();
    let mut ordered: Vec<CanonicalKey> = Vec::new();
    for key in reps.keys() {
        if !basis_of_key.contains_key(key) {
            index.insert(key.clone(), ordered.len());
            ordered.push(key.clone());
        }
    }
    let first_basis_index = ordered.len();
    for key in basis_of_key.keys() {
        index.insert(key.clone(), ordered.len());
        ordered.push(key.clone());
    }

    // elimination
    let mut pivots: BTreeMap<usize, Row> = BTreeMap::new();
    for flat in raw_rows {
        let mut row: Row = flat
            .into_iter()
            .map(|(k, c)| (*index.get(&k).expect("indexed key"), c))
            .collect();
        loop {
            let Some((&lead, _)) = row.iter().next() else { break };
            match pivots.get(&lead) {
                Some(p) => {
                    let factor = row[&lead].clone();
                    row_sub_scaled(&mut row, &factor, p);
                }
                None => break,
            }
        }
        if row.is_empty() {
            continue;
        }
        let lead = *row.keys().next().expect("nonempty");
        if lead >= first_basis_index {
            // a relation purely among basis invariants would contradict their
            // independence
            let detail: Vec<String> = row
                .iter()
                .map(|(i, c)| format!("{} {}", crate::ratio::q_display(c), basis_of_key[&ordered[*i]].0))
                .collect();
            return Err(ReduceError::BasisDependent(detail.join(" + ")));
        }
        row_normalize(&mut row);
        pivots.insert(lead, row);
    }

    // reduce the input vector
    let mut v: Row = vector
        .into_iter()
        .map(|(k, c)| (index[&k], c))
        .collect();
    loop {
        let Some((&lead, _)) = v.iter().next() else { break };
        if lead >= first_basis_index {
            break;
        }
        match pivots.get(&lead) {
            Some(p) => {
                let factor = v[&lead].clone();
                row_sub_scaled(&mut v, &factor, p);
            }
            None => {
                return Err(ReduceError::Irreducible {
                    monomial: print(&Expression::from_monomials_unchecked(vec![reps[&ordered[lead]].clone()])),
                });
            }
        }
    }
    if let Some((&lead, _)) = v.iter().next() {
        if lead < first_basis_index {
            return Err(ReduceError::Irreducible {
                monomial: print(&Expression::from_monomials_unchecked(vec![reps[&ordered[lead]].clone()])),
            });
        }
    }
    let mut out = BasisCombination::new(omega);
    for (idx, c) in v {
        let (tag, sign) = &basis_of_key[&ordered[idx]];
        out.add(*tag, c * sign);
    }
    Ok((out, stats))
}

/// Linearity helper: reduce a whole list and sum with coefficients.
pub fn reduce_linear(parts: &[(Q, Expression)], h: &HypothesisSet) -> Result<BasisCombination, ReduceError> {
    let mut out = BasisCombination::new(h.omega);
    for (c, e) in parts {
        let (r, _) = reduce_to_basis(e, h)?;
        out.add_all(&r.scaled(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::collect;
    use crate::ratio::q_ratio;
    use crate::rules::tr_sym;

    fn h(omega: u32) -> HypothesisSet {
        HypothesisSet::full(omega)
    }

    #[test]
    fn basis_monomials_reduce_to_themselves() {
        for omega in 1..=4u32 {
            for tag in basis_tags(omega) {
                let m = basis_monomial(tag, omega).unwrap();
                let e = Expression::from_monomials_unchecked(vec![m]);
                let (comb, _) = reduce_to_basis(&e, &h(omega)).unwrap();
                assert_eq!(comb, BasisCombination::single(omega, tag, q_int(1)), "tag {tag}");
            }
        }
    }

    #[test]
    fn enumerated_expansion_matches_closed_forms() {
        for g in 0..=12u32 {
            let enumerated = sup_expand_enumerated(g, 0);
            for (l, c) in enumerated {
                assert_eq!(c, d_coeff(g, l), "d^{g}_{l}");
            }
            if g >= 2 {
                let enumerated = sup_expand_enumerated(g - 2, 1);
                for (l, c) in enumerated {
                    assert_eq!(c, e_coeff(g, l - 1), "e^{g}_{}", l - 1);
                }
                for (l, c) in sup11_expand_enumerated(g - 2) {
                    assert_eq!(c, d_coeff(g - 2, l - 1), "T11 d^{}_{}", g - 2, l - 1);
                }
            }
        }
    }

    #[test]
    fn sup_pattern_expansion_matches_enumeration() {
        // the real Tr Sym machinery against the counting formula
        for (fam, gamma, ell, omega) in [
            (Family::T, 2, 0, 2),
            (Family::T, 3, 0, 3),
            (Family::T, 1, 1, 3),
            (Family::M, 2, 0, 3),
            (Family::N, 1, 0, 3),
            (Family::R, 2, 0, 2),
            (Family::T, 2, 1, 4),
        ] {
            let (pattern, frees) = sup_pattern(fam, gamma, ell, false, omega).unwrap();
            let expanded = tr_sym(&pattern, &frees).unwrap();
            let (comb, _) = reduce_to_basis(&expanded, &h(omega)).unwrap();
            let mut want = BasisCombination::new(omega);
            for (l, c) in sup_expand_enumerated(gamma, ell) {
                want.add(InvariantTag::Basis(fam, l), c);
            }
            assert_eq!(comb, want, "{fam:?}^{gamma}_{ell} at omega={omega}");
        }
        // doubled family
        let omega = 4;
        let (pattern, frees) = sup_pattern(Family::T, 2, 1, true, omega).unwrap();
        let expanded = tr_sym(&pattern, &frees).unwrap();
        let (comb, _) = reduce_to_basis(&expanded, &h(omega)).unwrap();
        let mut want = BasisCombination::new(omega);
        for (l, c) in sup11_expand_enumerated(2) {
            want.add(InvariantTag::Basis(Family::T, l), c);
        }
        assert_eq!(comb, want);
    }

    #[test]
    fn first_bianchi_halves_the_twisted_square() {
        // grad_c R_{iabj} grad_c R_{ibaj} = 1/2 | grad Riem |^2 at omega 1
        let e = crate::expr::parse("D[c] Riem[i,a,b,j] * D[c] Riem[i,b,a,j]").unwrap();
        let (comb, _) = reduce_to_basis(&e, &h(1)).unwrap();
        assert_eq!(comb, BasisCombination::single(1, InvariantTag::Basis(Family::R, 0), q_ratio(1, 2)));
        // and the second-Bianchi variant of the same square
        let e = crate::expr::parse("D[c] Riem[i,a,b,j] * D[b] Riem[i,a,c,j]").unwrap();
        let (comb, _) = reduce_to_basis(&e, &h(1)).unwrap();
        assert_eq!(comb, BasisCombination::single(1, InvariantTag::Basis(Family::R, 0), q_ratio(1, 2)));
    }

    #[test]
    fn collect_then_reduce_is_linear() {
        let a = crate::expr::parse("D[c] Riem[i,a,b,j] * D[c] Riem[i,b,a,j]").unwrap();
        let b = crate::expr::parse("D[c] Ric[i,j] * D[c] Ric[i,j]").unwrap();
        let sum = collect(&a.add(&b.scaled(&q_int(3))));
        let (left, _) = reduce_to_basis(&sum, &h(1)).unwrap();
        let (ra, _) = reduce_to_basis(&a, &h(1)).unwrap();
        let (rb, _) = reduce_to_basis(&b, &h(1)).unwrap();
        let mut right = ra.clone();
        right.add_all(&rb.scaled(&q_int(3)));
        assert_eq!(left, right);
    }

    #[test]
    fn rejects_free_labels() {
        let e = crate::expr::parse("D[a] Ric[b,c] * Ric[b,c]").unwrap();
        assert!(matches!(reduce_to_basis(&e, &h(1)), Err(ReduceError::WrongRegime(_))));
    }

    #[test]
    fn recursion_instances() {
        // T^2 = 2*2*1 T^0_1 + 2*4 T^1 as combinations
        let omega = 4;
        let lhs = expand_gamma(InvariantTag::Sup(Family::T, 2, 0), omega);
        let mut rhs = expand_gamma(InvariantTag::Sup(Family::T, 0, 1), omega).scaled(&q_int(4));
        rhs.add_all(&expand_gamma(InvariantTag::Sup(Family::T, 1, 0), omega).scaled(&q_int(8)));
        assert_eq!(lhs, rhs);
    }
}
