//! Deterministic canonical forms for monomials.
//!
//! Two monomials get the same key exactly when one maps to the other by
//! renaming contracted (dummy) labels and applying monoterm slot symmetries:
//! total symmetry of derivative slots, the two antisymmetries and the pair
//! exchange of `Riem`, and the body symmetry of `Ric`. The strategy is
//! exhaustive minimisation over the (small) body symmetry group of each
//! factor times the factor orderings, with the derivative-slot symmetry
//! handled structurally: derivative slots enter the key only through partner
//! classes and pair counts, never through positions.
//!
//! If the minimal encoding is reachable with both signs the monomial is zero
//! (an antisymmetric slot pair meeting a symmetric identification) and the
//! zero flag is returned instead of a key.
//!
//! A factor with a pinned derivative slot keeps that slot's depth in the key;
//! its remaining derivative slots are still treated as jointly symmetric,
//! which matches the only regime that produces pinned factors (all other
//! slots carry labels that an outer symmetrisation ranges over).
//!
//! Multiterm identities (the Bianchi relations) are deliberately not part of
//! canonicalisation; they are handled as linear relations during reduction.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_traits::Zero;

use crate::expr::{ExprError, Expression, Factor, Kind, Label, Monomial};
use crate::ratio::Q;

/// Exact keys distinguish free labels by name; shape keys treat free labels
/// as interchangeable (the equivalence that matters for terms living under an
/// outer symmetrisation over all their free indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMode {
    Exact,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub Vec<u8>);

impl std::fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Canonical {
    /// The monomial is identically zero by a monoterm symmetry collision.
    Zero,
    /// Canonical key plus the canonical representative; the representative's
    /// coefficient is the input coefficient times the symmetry sign.
    Term(CanonicalKey, Monomial),
}

#[derive(Debug, Clone)]
struct GroupElement {
    /// `view[i] = body[perm[i]]`
    perm: Vec<usize>,
    sign: i8,
}

fn compose(a: &GroupElement, b: &GroupElement) -> GroupElement {
    // applying b, then a
    let perm = a.perm.iter().map(|&i| b.perm[i]).collect();
    GroupElement { perm, sign: a.sign * b.sign }
}

fn close_group(generators: &[GroupElement], arity: usize) -> Vec<GroupElement> {
    let id = GroupElement { perm: (0..arity).collect(), sign: 1 };
    let mut elems: Vec<GroupElement> = vec![id];
    let mut frontier = elems.clone();
    while let Some(g) = frontier.pop() {
        for gen in generators {
            let h = compose(gen, &g);
            if !elems.iter().any(|e| e.perm == h.perm && e.sign == h.sign) {
                if elems.iter().any(|e| e.perm == h.perm && e.sign != h.sign) {
                    panic!("inconsistent symmetry group");
                }
                elems.push(h.clone());
                frontier.push(h);
            }
        }
    }
    elems.sort_by(|a, b| a.perm.cmp(&b.perm));
    elems
}

fn body_group(kind: Kind) -> &'static [GroupElement] {
    static RIEM: OnceLock<Vec<GroupElement>> = OnceLock::new();
    static RIC: OnceLock<Vec<GroupElement>> = OnceLock::new();
    static SCAL: OnceLock<Vec<GroupElement>> = OnceLock::new();
    match kind {
        Kind::Riem => RIEM.get_or_init(|| {
            close_group(
                &[
                    GroupElement { perm: vec![1, 0, 2, 3], sign: -1 },
                    GroupElement { perm: vec![0, 1, 3, 2], sign: -1 },
                    GroupElement { perm: vec![2, 3, 0, 1], sign: 1 },
                ],
                4,
            )
        }),
        Kind::Ric => RIC.get_or_init(|| close_group(&[GroupElement { perm: vec![1, 0], sign: 1 }], 2)),
        Kind::Scal => SCAL.get_or_init(|| close_group(&[], 0)),
    }
}

/// Order of the monoterm symmetry group canonicalisation searches for one
/// monomial (factor orderings times body groups). Reported for performance
/// tracking.
pub fn symmetry_group_order(m: &Monomial) -> usize {
    let mut order = (1..=m.factors.len()).product::<usize>();
    for f in &m.factors {
        order *= body_group(f.kind).len();
    }
    order
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Body(usize, usize),
    Deriv(usize),
    Pinned(usize),
}

struct View<'a> {
    factors: Vec<&'a Factor>,
    elems: Vec<&'a GroupElement>,
    sign: i8,
}

impl<'a> View<'a> {
    fn body_label(&self, fi: usize, s: usize) -> &'a Label {
        &self.factors[fi].body[self.elems[fi].perm[s]]
    }
}

fn occurrences<'a>(view: &View<'a>) -> BTreeMap<&'a Label, Vec<Slot>> {
    let mut occ: BTreeMap<&Label, Vec<Slot>> = BTreeMap::new();
    for (fi, f) in view.factors.iter().enumerate() {
        for s in 0..f.body.len() {
            occ.entry(view.body_label(fi, s)).or_default().push(Slot::Body(fi, s));
        }
        for (di, l) in f.deriv.iter().enumerate() {
            let slot = if f.pinned == Some(di) { Slot::Pinned(fi) } else { Slot::Deriv(fi) };
            occ.entry(l).or_default().push(slot);
        }
    }
    occ
}

fn push_partner(out: &mut Vec<u8>, mode: KeyMode, label: &Label, here: Slot, occ: &BTreeMap<&Label, Vec<Slot>>) {
    let slots = &occ[label];
    if slots.len() == 1 {
        match (mode, label) {
            (KeyMode::Exact, Label::Named(name)) => {
                out.push(0x10);
                out.push(name.len() as u8);
                out.extend_from_slice(name.as_bytes());
            }
            (KeyMode::Exact, Label::Anon(k)) => {
                out.push(0x1f);
                out.extend_from_slice(&k.to_be_bytes());
            }
            (KeyMode::Shape, _) => out.push(0x11),
        }
        return;
    }
    let other = if slots[0] == here { slots[1] } else { slots[0] };
    match other {
        Slot::Body(fj, t) => {
            out.push(0x12);
            out.push(fj as u8);
            out.push(t as u8);
        }
        Slot::Deriv(fj) => {
            out.push(0x13);
            out.push(fj as u8);
        }
        Slot::Pinned(fj) => {
            out.push(0x14);
            out.push(fj as u8);
        }
    }
}

fn encode(view: &View<'_>, mode: KeyMode) -> Vec<u8> {
    let occ = occurrences(view);
    let n = view.factors.len();
    let mut out = Vec::with_capacity(64);
    out.push(match mode {
        KeyMode::Exact => 0,
        KeyMode::Shape => 1,
    });
    out.push(n as u8);
    for f in &view.factors {
        out.push(f.kind as u8);
        out.push(f.deriv.len() as u8);
        out.push(f.pinned.map(|p| p as u8).unwrap_or(0xff));
    }
    for (fi, f) in view.factors.iter().enumerate() {
        for s in 0..f.body.len() {
            push_partner(&mut out, mode, view.body_label(fi, s), Slot::Body(fi, s), &occ);
        }
    }
    // free derivative labels per factor
    for (fi, f) in view.factors.iter().enumerate() {
        let mut free: Vec<&Label> = f
            .deriv
            .iter()
            .enumerate()
            .filter(|(di, l)| f.pinned != Some(*di) && occ[*l].len() == 1)
            .map(|(_, l)| l)
            .collect();
        free.sort();
        match mode {
            KeyMode::Exact => {
                out.push(0x20);
                out.push(free.len() as u8);
                for l in free {
                    match l {
                        Label::Named(name) => {
                            out.push(name.len() as u8);
                            out.extend_from_slice(name.as_bytes());
                        }
                        Label::Anon(k) => {
                            out.push(0xfe);
                            out.extend_from_slice(&k.to_be_bytes());
                        }
                    }
                }
            }
            KeyMode::Shape => {
                out.push(0x21);
                out.push(free.len() as u8);
            }
        }
        let _ = fi;
    }
    // derivative-derivative pair counts (unpinned on both sides)
    let mut pair_counts = vec![0u8; n * n];
    for slots in occ.values() {
        if slots.len() == 2 {
            if let (Slot::Deriv(a), Slot::Deriv(b)) = (slots[0], slots[1]) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                pair_counts[lo * n + hi] += 1;
            }
        }
    }
    out.push(0x30);
    out.extend_from_slice(&pair_counts);
    // pinned slot partners
    for (fi, f) in view.factors.iter().enumerate() {
        if let Some(p) = f.pinned {
            out.push(0x40);
            out.push(fi as u8);
            push_partner(&mut out, mode, &f.deriv[p], Slot::Pinned(fi), &occ);
        }
    }
    out
}

fn factor_orders(n: usize) -> Vec<Vec<usize>> {
    match n {
        0 => vec![vec![]],
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => panic!("monomials are restricted to at most two factors"),
    }
}

/// Rebuilds the canonical representative from the winning view: factors are
/// reordered, body slots permuted, and contracted labels renamed to a fixed
/// enumeration. Derivative vectors are rebuilt in a deterministic order
/// (body-linked labels in body traversal order, free labels sorted, cross
/// pairs, then self pairs), with the pinned label reinserted at its depth.
fn rebuild<'a>(view: &View<'a>, coeff: Q, mode: KeyMode) -> Monomial {
    let occ = occurrences(view);
    let mut names: BTreeMap<&Label, Label> = BTreeMap::new();
    let mut next = 0u64;
    let mut canon_label = |l: &'a Label, contracted: bool, names: &mut BTreeMap<&'a Label, Label>| -> Label {
        if let Some(x) = names.get(l) {
            return x.clone();
        }
        let out = if contracted || mode == KeyMode::Shape {
            let x = Label::Anon(next);
            next += 1;
            x
        } else {
            l.clone()
        };
        names.insert(l, out.clone());
        out
    };

    let n = view.factors.len();
    let mut bodies: Vec<Vec<Label>> = Vec::with_capacity(n);
    for (fi, f) in view.factors.iter().enumerate() {
        let mut body = Vec::with_capacity(f.body.len());
        for s in 0..f.body.len() {
            let l = view.body_label(fi, s);
            body.push(canon_label(l, occ[l].len() == 2, &mut names));
        }
        bodies.push(body);
    }
    // derivative slots
    let mut derivs: Vec<Vec<Label>> = vec![Vec::new(); n];
    let mut pinned_labels: Vec<Option<Label>> = vec![None; n];
    for (fi, f) in view.factors.iter().enumerate() {
        let mut body_linked: Vec<&'a Label> = Vec::new();
        let mut free: Vec<&'a Label> = Vec::new();
        let mut cross: Vec<&'a Label> = Vec::new();
        let mut selfs: Vec<&'a Label> = Vec::new();
        for (di, l) in f.deriv.iter().enumerate() {
            if f.pinned == Some(di) {
                pinned_labels[fi] = Some(canon_label(l, occ[l].len() == 2, &mut names));
                continue;
            }
            let slots = &occ[l];
            if slots.len() == 1 {
                free.push(l);
                continue;
            }
            if slots[0] == Slot::Deriv(fi) && slots[1] == Slot::Deriv(fi) {
                if !selfs.contains(&l) {
                    selfs.push(l);
                }
                continue;
            }
            let here = Slot::Deriv(fi);
            let other = if slots[0] == here { slots[1] } else { slots[0] };
            match other {
                Slot::Body(..) | Slot::Pinned(_) => body_linked.push(l),
                Slot::Deriv(_) => cross.push(l),
            }
        }
        let mut out = Vec::new();
        let mut linked: Vec<Label> = body_linked.iter().map(|l| canon_label(l, true, &mut names)).collect();
        linked.sort();
        out.extend(linked);
        free.sort();
        for l in free {
            out.push(canon_label(l, false, &mut names));
        }
        cross.sort();
        for l in cross {
            out.push(canon_label(l, true, &mut names));
        }
        for l in selfs {
            let x = canon_label(l, true, &mut names);
            out.push(x.clone());
            out.push(x);
        }
        derivs[fi] = out;
    }
    let mut factors = Vec::with_capacity(n);
    for fi in 0..n {
        let f = view.factors[fi];
        let mut deriv = std::mem::take(&mut derivs[fi]);
        let mut pinned = None;
        if let Some(p) = f.pinned {
            let depth = p.min(deriv.len());
            deriv.insert(depth, pinned_labels[fi].clone().expect("pinned label"));
            pinned = Some(depth);
        }
        factors.push(Factor { kind: f.kind, deriv, body: bodies[fi].clone(), pinned });
    }
    Monomial { coeff, factors }
}

pub fn canonicalize(m: &Monomial, mode: KeyMode) -> Result<Canonical, ExprError> {
    m.validate()?;
    let n = m.factors.len();
    if n > 2 {
        panic!("monomials are restricted to at most two factors");
    }
    let mut best: Option<(Vec<u8>, View<'_>, i8)> = None;
    let mut both_signs = false;
    for order in factor_orders(n) {
        let factors: Vec<&Factor> = order.iter().map(|&i| &m.factors[i]).collect();
        let groups: Vec<&[GroupElement]> = factors.iter().map(|f| body_group(f.kind)).collect();
        let mut idx = vec![0usize; n];
        loop {
            let elems: Vec<&GroupElement> = (0..n).map(|i| &groups[i][idx[i]]).collect();
            let sign = elems.iter().map(|e| e.sign).product::<i8>();
            let view = View { factors: factors.clone(), elems, sign };
            let enc = encode(&view, mode);
            match &best {
                Some((b, _, s)) => {
                    if enc < *b {
                        best = Some((enc, view, sign));
                        both_signs = false;
                    } else if enc == *b && sign != *s {
                        both_signs = true;
                    }
                }
                None => best = Some((enc, view, sign)),
            }
            // advance multi-index
            let mut i = 0;
            loop {
                if i == n {
                    break;
                }
                idx[i] += 1;
                if idx[i] < groups[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        if n == 0 {
            break;
        }
    }
    let (enc, view, sign) = best.expect("at least one view");
    if both_signs {
        return Ok(Canonical::Zero);
    }
    let coeff = if sign < 0 { -m.coeff.clone() } else { m.coeff.clone() };
    let rep = rebuild(&view, coeff, mode);
    Ok(Canonical::Term(CanonicalKey(enc), rep))
}

/// Merges monomials with equal canonical keys, dropping zero coefficients and
/// zero-flagged monomials; output ordered by key.
pub fn collect(e: &Expression) -> Expression {
    let mut acc: BTreeMap<CanonicalKey, Monomial> = BTreeMap::new();
    for m in &e.monomials {
        if m.coeff.is_zero() {
            continue;
        }
        match canonicalize(m, KeyMode::Exact).expect("valid monomial") {
            Canonical::Zero => {}
            Canonical::Term(key, rep) => {
                acc.entry(key)
                    .and_modify(|existing| existing.coeff = &existing.coeff + &rep.coeff)
                    .or_insert(rep);
            }
        }
    }
    Expression::from_monomials_unchecked(acc.into_values().filter(|m| !m.coeff.is_zero()).collect())
}

/// Convenience: exact canonical key of a monomial plus the symmetry sign
/// relating it to the canonical representative; `None` when zero-flagged.
pub fn exact_key(m: &Monomial) -> Result<Option<(CanonicalKey, i8)>, ExprError> {
    match canonicalize(m, KeyMode::Exact)? {
        Canonical::Zero => Ok(None),
        Canonical::Term(key, rep) => {
            let sign = if rep.coeff == m.coeff { 1 } else { -1 };
            Ok(Some((key, sign)))
        }
    }
}

/// Two expressions are canonically equal when their collected forms coincide.
pub fn canonically_equal(a: &Expression, b: &Expression) -> bool {
    collect(a) == collect(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::ratio::q_int;

    fn key_of(text: &str) -> CanonicalKey {
        let e = parse(text).unwrap();
        match canonicalize(&e.monomials[0], KeyMode::Exact).unwrap() {
            Canonical::Term(k, _) => k,
            Canonical::Zero => panic!("unexpected zero for {text}"),
        }
    }

    #[test]
    fn antisymmetry_flips_sign_same_key() {
        let e1 = parse("D[c] Riem[a,b,i,j] * D[c] Riem[a,b,i,j]").unwrap();
        let e2 = parse("D[c] Riem[b,a,i,j] * D[c] Riem[a,b,i,j]").unwrap();
        let k1 = canonicalize(&e1.monomials[0], KeyMode::Exact).unwrap();
        let k2 = canonicalize(&e2.monomials[0], KeyMode::Exact).unwrap();
        match (k1, k2) {
            (Canonical::Term(ka, ra), Canonical::Term(kb, rb)) => {
                assert_eq!(ka, kb);
                assert_eq!(ra.coeff, -rb.coeff);
            }
            _ => panic!("unexpected zero"),
        }
    }

    #[test]
    fn dummy_renaming_same_key() {
        assert_eq!(key_of("Riem[a,b,a,b]"), key_of("Riem[i,j,i,j]"));
        assert_eq!(key_of("D[c] Ric[c,q]"), key_of("D[z] Ric[z,q]"));
    }

    #[test]
    fn traced_antisymmetric_pair_is_zero() {
        let e = parse("Riem[a,a,b,j]").unwrap();
        assert!(matches!(canonicalize(&e.monomials[0], KeyMode::Exact).unwrap(), Canonical::Zero));
        // ... while a body trace across the pairs is not zero-flagged
        let e = parse("Riem[a,b,a,j]").unwrap();
        assert!(matches!(canonicalize(&e.monomials[0], KeyMode::Exact).unwrap(), Canonical::Term(..)));
    }

    #[test]
    fn shape_mode_kills_free_antisymmetric_slots() {
        // with interchangeable free labels, Riem[a,b,c,d] is odd under a<->b
        let e = parse("Riem[a,b,c,d]").unwrap();
        assert!(matches!(canonicalize(&e.monomials[0], KeyMode::Shape).unwrap(), Canonical::Zero));
        // exact mode keeps it
        assert!(matches!(canonicalize(&e.monomials[0], KeyMode::Exact).unwrap(), Canonical::Term(..)));
    }

    #[test]
    fn collect_cancels_antisymmetrised_pair() {
        let e = parse("Riem[a,b,i,j] + Riem[b,a,i,j]").unwrap();
        assert!(collect(&e).is_zero());
        let e = parse("2 * Ric[a,b] + 3 * Ric[b,a]").unwrap();
        let c = collect(&e);
        assert_eq!(c.monomials.len(), 1);
        assert_eq!(c.monomials[0].coeff, q_int(5));
    }

    #[test]
    fn idempotent() {
        for text in [
            "D[c] Riem[i,a,b,j] * D[c] Riem[i,b,a,j]",
            "D[a] D[a] Ric[i,j] * Ric[i,j]",
            "3/2 * D[p] Riem[p,q,r,s] * D[s] Ric[q,r]",
        ] {
            let e = parse(text).unwrap();
            let c1 = match canonicalize(&e.monomials[0], KeyMode::Exact).unwrap() {
                Canonical::Term(k, m) => (k, m),
                Canonical::Zero => panic!(),
            };
            let c2 = match canonicalize(&c1.1, KeyMode::Exact).unwrap() {
                Canonical::Term(k, m) => (k, m),
                Canonical::Zero => panic!(),
            };
            assert_eq!(c1.0, c2.0);
            assert_eq!(c1.1, c2.1);
        }
    }

    #[test]
    fn factor_order_is_immaterial() {
        assert_eq!(
            key_of("D[c] Ric[i,j] * Riem[i,p,p,j]"),
            key_of("Riem[i,p,p,j] * D[c] Ric[i,j]")
        );
    }
}
