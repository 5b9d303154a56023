//! Multicategories over a cartesian monad, their maps, discrete
//! opfibrations, and the two equivalent notions of algebra.
//!
//! A configuration over an arrow `a` is an element of `T C1` whose image
//! under `T c` is `d a`; composition is a finite table keyed by
//! `(a, configuration)`. Bounded fragments may leave some composites
//! undefined, and the checkers then test every law whose terms all exist.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::finbase::{pair_atom, pullback, Atom, FinMap, FinSet, SliceObj};
use crate::monadkit::{MonadInstance, Shape, TElem};
use crate::report::Report;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MGraph {
    pub monad: MonadInstance,
    pub objects: FinSet,
    pub arrows: FinSet,
    pub dom: IndexMap<Atom, TElem>,
    pub cod: IndexMap<Atom, Atom>,
    into: BTreeMap<Atom, Vec<Atom>>,
}

impl MGraph {
    pub fn new(
        monad: MonadInstance,
        objects: FinSet,
        arrows: FinSet,
        dom: IndexMap<Atom, TElem>,
        cod: IndexMap<Atom, Atom>,
    ) -> Result<Self> {
        for a in arrows.iter() {
            let d = dom.get(a).ok_or_else(|| Error::NotTotal(format!("domain of {a}")))?;
            if !monad.is_well_formed(d) {
                return Err(Error::Malformed(format!("domain of {a}")));
            }
            if let Some(s) = d.leaves().into_iter().find(|s| !objects.contains(s)) {
                return Err(Error::UnknownAtom(s.clone()));
            }
            let c = cod.get(a).ok_or_else(|| Error::NotTotal(format!("codomain of {a}")))?;
            if !objects.contains(c) {
                return Err(Error::UnknownAtom(c.clone()));
            }
        }
        let mut into: BTreeMap<Atom, Vec<Atom>> = objects.iter().map(|s| (s.clone(), Vec::new())).collect();
        for a in arrows.iter() {
            into.get_mut(&cod[a]).expect("checked").push(a.clone());
        }
        let dom = arrows.iter().map(|a| (a.clone(), dom[a].clone())).collect();
        let cod = arrows.iter().map(|a| (a.clone(), cod[a].clone())).collect();
        Ok(MGraph { monad, objects, arrows, dom, cod, into })
    }

    pub fn d(&self, a: &str) -> &TElem {
        &self.dom[a]
    }

    pub fn c(&self, a: &str) -> &Atom {
        &self.cod[a]
    }

    /// Arrows with codomain `s`.
    pub fn arrows_into(&self, s: &str) -> &[Atom] {
        self.into.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every configuration that can feed into `a`.
    pub fn configurations(&self, a: &str) -> Vec<TElem> {
        self.monad.fibre(self.d(a), |s| self.arrows_into(s).to_vec())
    }

    /// `μ (T d β)`, the domain of a composite with inner configuration `β`.
    pub fn composite_domain(&self, beta: &TElem) -> Result<TElem> {
        self.monad.mult(&self.monad.map(beta, |b| self.d(b).clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multicat {
    pub graph: MGraph,
    pub ids: IndexMap<Atom, Atom>,
    pub comp: HashMap<(Atom, TElem), Atom>,
    /// A bounded fragment: composites outside the fragment are absent.
    pub fragment: bool,
}

impl Multicat {
    /// Tabulate `compose` over every configuration. `None` marks a composite
    /// that leaves the fragment.
    pub fn tabulate(
        graph: MGraph,
        ids: IndexMap<Atom, Atom>,
        fragment: bool,
        compose: impl Fn(&Atom, &TElem) -> Option<Atom>,
    ) -> Result<Self> {
        let configs: Vec<(Atom, Vec<TElem>)> = graph.arrows.iter().map(|a| (a.clone(), graph.configurations(a))).collect();
        Multicat::fill_table(graph, ids, fragment, configs, compose)
    }

    /// Tabulate a fragment, visiting only configurations over `a` whose
    /// inner arrows have total `weight` at most `budget(a)`. Sound whenever
    /// every composite outside that window is absent from the fragment.
    pub fn tabulate_within(
        graph: MGraph,
        ids: IndexMap<Atom, Atom>,
        weight: impl Fn(&Atom) -> usize,
        budget: impl Fn(&Atom) -> usize,
        compose: impl Fn(&Atom, &TElem) -> Option<Atom>,
    ) -> Result<Self> {
        let mut into: HashMap<&Atom, Vec<(usize, &Atom)>> = HashMap::new();
        for a in graph.arrows.iter() {
            into.entry(graph.c(a)).or_default().push((weight(a), a));
        }
        into.values_mut().for_each(|v| v.sort());
        let mut configs = Vec::new();
        for a in graph.arrows.iter() {
            let d = graph.d(a);
            let options: Vec<&[(usize, &Atom)]> = d.leaves().iter().map(|s| into.get(*s).map(Vec::as_slice).unwrap_or(&[])).collect();
            let mut found = Vec::new();
            budgeted(&options, budget(a), &mut Vec::new(), &mut |pick: &[Atom]| found.push(d.relabel(pick).expect("leaf count")));
            configs.push((a.clone(), found));
        }
        Multicat::fill_table(graph, ids, true, configs, compose)
    }

    fn fill_table(
        graph: MGraph,
        ids: IndexMap<Atom, Atom>,
        fragment: bool,
        configs: Vec<(Atom, Vec<TElem>)>,
        compose: impl Fn(&Atom, &TElem) -> Option<Atom>,
    ) -> Result<Self> {
        for s in graph.objects.iter() {
            let i = ids.get(s).ok_or_else(|| Error::NotTotal(format!("identity on {s}")))?;
            if !graph.arrows.contains(i) {
                return Err(Error::UnknownAtom(i.clone()));
            }
        }
        let mut comp = HashMap::new();
        for (a, betas) in configs {
            for beta in betas {
                match compose(&a, &beta) {
                    Some(r) if graph.arrows.contains(&r) => {
                        comp.insert((a.clone(), beta), r);
                    }
                    Some(r) => return Err(Error::UnknownAtom(r)),
                    None if fragment => {}
                    None => return Err(Error::Missing(format!("composite of {a} with {beta:?}"))),
                }
            }
        }
        Ok(Multicat { graph, ids, comp, fragment })
    }

    pub fn monad(&self) -> MonadInstance {
        self.graph.monad
    }

    pub fn id(&self, s: &str) -> &Atom {
        &self.ids[s]
    }

    pub fn composite(&self, outer: &str, inner: &TElem) -> Option<&Atom> {
        self.comp.get(&(outer.to_string(), inner.clone()))
    }

    /// A small category seen as a multicategory over the identity monad.
    /// `arrows` are `(name, dom, cod)`; `compose(g, f)` is `g ∘ f`.
    pub fn category(
        objects: &[&str],
        arrows: &[(&str, &str, &str)],
        ids: &[(&str, &str)],
        compose: impl Fn(&str, &str) -> Option<String>,
    ) -> Result<Self> {
        let m = MonadInstance::Identity;
        let graph = MGraph::new(
            m,
            FinSet::new(objects.iter().copied())?,
            FinSet::new(arrows.iter().map(|a| a.0))?,
            arrows.iter().map(|(a, d, _)| (a.to_string(), Shape::Leaf(d.to_string()))).collect(),
            arrows.iter().map(|(a, _, c)| (a.to_string(), c.to_string())).collect(),
        )?;
        let ids = ids.iter().map(|(s, i)| (s.to_string(), i.to_string())).collect();
        Multicat::tabulate(graph, ids, false, |g, beta| match beta {
            Shape::Leaf(f) => compose(g, f),
            _ => None,
        })
    }

    pub fn to_json(&self) -> Value {
        let m = self.monad();
        let mut comp: Vec<_> = self
            .comp
            .iter()
            .map(|((o, i), r)| (o.clone(), m.key(i), json!({"outer": o, "inner": m.to_json(i), "result": r})))
            .collect();
        comp.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        json!({
            "monad": m.name(),
            "objects": self.graph.objects,
            "arrows": self.graph.arrows.iter().map(|a| json!({"id": a, "dom": m.to_json(self.graph.d(a)), "cod": self.graph.c(a)})).collect::<Vec<_>>(),
            "ids": self.ids,
            "comp": comp.into_iter().map(|c| c.2).collect::<Vec<_>>(),
            "fragment": self.fragment,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| v.get(k).ok_or_else(|| Error::Json(format!("missing field `{k}`")));
        let m = MonadInstance::from_name(field("monad")?.as_str().ok_or_else(|| Error::Json("monad".into()))?)?;
        let objects: FinSet = serde_json::from_value(field("objects")?.clone())?;
        let arrows = field("arrows")?.as_array().ok_or_else(|| Error::Json("arrows".into()))?;
        let mut names = Vec::new();
        let mut dom = IndexMap::new();
        let mut cod = IndexMap::new();
        for a in arrows {
            let id = a["id"].as_str().ok_or_else(|| Error::Json("arrow id".into()))?.to_string();
            dom.insert(id.clone(), m.from_json(&a["dom"])?);
            cod.insert(id.clone(), a["cod"].as_str().ok_or_else(|| Error::Json("arrow cod".into()))?.to_string());
            names.push(id);
        }
        let graph = MGraph::new(m, objects, FinSet::new(names)?, dom, cod)?;
        let ids: IndexMap<Atom, Atom> = serde_json::from_value(field("ids")?.clone())?;
        let fragment = v.get("fragment").and_then(Value::as_bool).unwrap_or(false);
        let mut table = HashMap::new();
        for e in field("comp")?.as_array().ok_or_else(|| Error::Json("comp".into()))? {
            let outer = e["outer"].as_str().ok_or_else(|| Error::Json("outer".into()))?.to_string();
            let result = e["result"].as_str().ok_or_else(|| Error::Json("result".into()))?.to_string();
            table.insert((outer, m.from_json(&e["inner"])?), result);
        }
        Multicat::tabulate(graph, ids, fragment, |a, beta| table.get(&(a.clone(), beta.clone())).cloned())
    }
}

fn budgeted(options: &[&[(usize, &Atom)]], budget: usize, acc: &mut Vec<Atom>, emit: &mut impl FnMut(&[Atom])) {
    let Some((first, rest)) = options.split_first() else {
        emit(acc);
        return;
    };
    for (w, a) in first.iter() {
        if *w > budget {
            break;
        }
        acc.push((*a).clone());
        budgeted(rest, budget - w, acc, emit);
        acc.pop();
    }
}

/// Compose `outer` with an inner configuration, checking that it matches.
pub fn compose_cells(mc: &Multicat, outer: &str, inner: &TElem) -> Result<Atom> {
    let g = &mc.graph;
    if !g.arrows.contains(outer) {
        return Err(Error::UnknownAtom(outer.to_string()));
    }
    let image = g.monad.try_map(inner, |b| {
        g.cod.get(b).cloned().ok_or_else(|| Error::UnknownAtom(b.clone()))
    })?;
    if &image != g.d(outer) {
        return Err(Error::NotComposable(format!("codomains {image:?} do not match domain of {outer}")));
    }
    mc.composite(outer, inner).cloned().ok_or_else(|| Error::Missing(format!("composite of {outer} outside the fragment")))
}

pub fn check_multicategory(mc: &Multicat) -> Report {
    check_multicategory_with(Exec::default(), mc)
}

/// Identity and associativity laws over every configuration.
pub fn check_multicategory_with(exec: Exec, mc: &Multicat) -> Report {
    let g = &mc.graph;
    let m = g.monad;
    let mut report = Report::new();
    for s in g.objects.iter() {
        report.checked += 1;
        let i = mc.id(s);
        if g.d(i) != &m.unit(s.clone()) || g.c(i) != s {
            report.fail("identity boundary", format!("ids({s}) = {i}"));
        }
    }
    let mut defined: HashMap<&Atom, Vec<(&TElem, &Atom)>> = HashMap::new();
    for ((a, beta), r) in &mc.comp {
        defined.entry(a).or_default().push((beta, r));
    }
    defined.values_mut().for_each(|v| v.sort());
    let arrows = g.arrows.atoms();
    let per_arrow = exec.map(&arrows, |a| {
        let mut r = Report::new();
        let left = mc.composite(mc.id(g.c(a)), &m.unit(a.clone()));
        r.checked += 1;
        if left != Some(a) {
            r.fail("left unit", format!("ids({}) ∘ {a} = {left:?}", g.c(a)));
        }
        let ids_cfg = m.map(g.d(a), |s| mc.id(s).clone());
        let right = mc.composite(a, &ids_cfg);
        r.checked += 1;
        if right != Some(a) {
            r.fail("right unit", format!("{a} ∘ ids = {right:?}"));
        }
        if !mc.fragment {
            for beta in g.configurations(a) {
                if mc.composite(a, &beta).is_none() {
                    r.fail("closure", format!("{a} ∘ {beta:?} undefined"));
                }
            }
        }
        for (beta, ab) in defined.get(a).into_iter().flatten() {
            r.checked += 1;
            match g.composite_domain(beta) {
                Ok(d) if &d == g.d(ab) && g.c(ab) == g.c(a) => {}
                _ => r.fail("composite boundary", format!("{a} ∘ {beta:?} = {ab}")),
            }
            // only inner composites that exist can take part in a law
            let options: Vec<Vec<(&TElem, &Atom)>> =
                beta.leaves().iter().map(|b| defined.get(*b).cloned().unwrap_or_default()).collect();
            crate::monadkit::product(&options, &mut Vec::new(), &mut |picks: &[(&TElem, &Atom)]| {
                let gammas: Vec<TElem> = picks.iter().map(|(gm, _)| (*gm).clone()).collect();
                let nested = beta.relabel(&gammas).expect("leaf count");
                let Ok(flat) = m.mult(&nested) else {
                    r.fail("associativity", format!("cannot flatten {nested:?}"));
                    return;
                };
                let Some(lhs) = mc.composite(ab, &flat) else { return };
                let inner: Vec<Atom> = picks.iter().map(|(_, x)| (*x).clone()).collect();
                let Some(rhs) = mc.composite(a, &beta.relabel(&inner).expect("leaf count")) else { return };
                r.checked += 1;
                if lhs != rhs {
                    r.fail("associativity", format!("{a}, {beta:?}, {gammas:?}: {lhs} vs {rhs}"));
                }
            });
        }
        r
    });
    per_arrow.into_iter().for_each(|r| report.merge(r));
    report
}

/// One object `*`; one arrow for each element of `T 1` of size at most
/// `arity_bound` (plus the unit, always); composition by `μ`.
pub fn terminal_multicategory(monad: MonadInstance, arity_bound: usize) -> Multicat {
    let star = "*".to_string();
    let mut elems = monad.enumerate(&[star.clone()], arity_bound);
    let unit = monad.unit(star.clone());
    if !elems.contains(&unit) {
        elems.push(unit.clone());
    }
    let names: Vec<Atom> = elems.iter().map(|e| monad.key(e)).collect();
    let by_elem: HashMap<TElem, Atom> = elems.iter().cloned().zip(names.iter().cloned()).collect();
    let graph = MGraph::new(
        monad,
        FinSet::new([star.clone()]).expect("singleton"),
        FinSet::new(names.clone()).expect("distinct keys"),
        names.iter().cloned().zip(elems.iter().cloned()).collect(),
        names.iter().map(|n| (n.clone(), star.clone())).collect(),
    )
    .expect("well formed");
    let ids = IndexMap::from([(star, monad.key(&unit))]);
    let size = |a: &Atom| monad.size_of(graph.d(a));
    Multicat::tabulate_within(graph.clone(), ids, size, |_| arity_bound.max(1), |_, beta| {
        let d = graph.composite_domain(beta).ok()?;
        by_elem.get(&d).cloned()
    })
    .expect("terminal multicategory is well formed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiMap {
    pub f0: FinMap,
    pub f1: FinMap,
}

impl MultiMap {
    pub fn identity(c: &Multicat) -> Self {
        MultiMap { f0: FinMap::identity(&c.graph.objects), f1: FinMap::identity(&c.graph.arrows) }
    }

    /// Check that this is a map of multicategories `src → dst`.
    pub fn validate(&self, src: &Multicat, dst: &Multicat) -> Report {
        let (g, h) = (&src.graph, &dst.graph);
        let m = g.monad;
        let mut r = Report::new();
        if self.f0.dom() != &g.objects || self.f0.cod() != &h.objects || self.f1.dom() != &g.arrows || self.f1.cod() != &h.arrows {
            r.fail("map boundary", "component maps have the wrong (co)domains");
            return r;
        }
        for a in g.arrows.iter() {
            r.checked += 1;
            let fa = &self.f1.graph()[a];
            if h.d(fa) != &m.map(g.d(a), |s| self.f0.graph()[s].clone()) || h.c(fa) != &self.f0.graph()[g.c(a)] {
                r.fail("map graph", format!("{a} ↦ {fa}"));
            }
        }
        for s in g.objects.iter() {
            r.checked += 1;
            if &self.f1.graph()[src.id(s)] != dst.id(&self.f0.graph()[s]) {
                r.fail("map identities", s.clone());
            }
        }
        for ((a, beta), ab) in &src.comp {
            let image = dst.composite(&self.f1.graph()[a], &m.map(beta, |b| self.f1.graph()[b].clone()));
            if let Some(x) = image {
                r.checked += 1;
                if x != &self.f1.graph()[ab] {
                    r.fail("map composition", format!("{a} ∘ {beta:?}"));
                }
            } else if !dst.fragment {
                r.fail("map composition", format!("{a} ∘ {beta:?} has no image"));
            }
        }
        r
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &MultiMap) -> Result<MultiMap> {
        Ok(MultiMap { f0: self.f0.then(&other.f0)?, f1: self.f1.then(&other.f1)? })
    }
}

/// `f: D → C` is a discrete opfibration when every arrow of `C` has exactly
/// one lift through each domain lying over its own.
pub fn is_discrete_opfibration(d: &Multicat, c: &Multicat, f: &MultiMap) -> bool {
    opfibration_witness(d, c, f).is_none()
}

fn opfibration_witness(d: &Multicat, c: &Multicat, f: &MultiMap) -> Option<String> {
    if let Some(v) = f.validate(d, c).violations.first() {
        return Some(format!("not a map: {} {}", v.law, v.witness));
    }
    let m = c.monad();
    let mut lifts: HashMap<(&Atom, &TElem), usize> = HashMap::new();
    for b in d.graph.arrows.iter() {
        *lifts.entry((&f.f1.graph()[b], d.graph.d(b))).or_default() += 1;
    }
    for a in c.graph.arrows.iter() {
        for xi in m.fibre(c.graph.d(a), |s| f.f0.fiber(s)) {
            let n = lifts.get(&(a, &xi)).copied().unwrap_or(0);
            if n != 1 {
                return Some(format!("{a} over {xi:?} has {n} lifts"));
            }
        }
    }
    None
}

/// `X^•`: pairs `(ξ, a)` with `ξ ∈ T X` lying over `d a`, projected by `c a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blob {
    pub slice: SliceObj,
    pub elems: Vec<(TElem, Atom)>,
    index: HashMap<(TElem, Atom), usize>,
}

impl Blob {
    pub fn name(&self, i: usize) -> &Atom {
        self.slice.total.get(i).expect("in range")
    }

    pub fn lookup(&self, xi: &TElem, a: &str) -> Option<&Atom> {
        self.index.get(&(xi.clone(), a.to_string())).map(|&i| self.name(i))
    }

    pub fn decode(&self, name: &str) -> Option<&(TElem, Atom)> {
        self.slice.total.index_of(name).map(|i| &self.elems[i])
    }
}

pub fn blob_name(m: MonadInstance, xi: &TElem, a: &str) -> Atom {
    json!([m.to_json(xi), a]).to_string()
}

pub fn blob_apply(c: &Multicat, x: &SliceObj) -> Result<Blob> {
    if x.base != c.graph.objects {
        return Err(Error::CodomainMismatch("carrier must lie over the objects".into()));
    }
    let m = c.monad();
    let mut elems = Vec::new();
    for a in c.graph.arrows.iter() {
        for xi in m.fibre(c.graph.d(a), |s| x.proj.fiber(s)) {
            elems.push((xi, a.clone()));
        }
    }
    let names: Vec<Atom> = elems.iter().map(|(xi, a)| blob_name(m, xi, a)).collect();
    let total = FinSet::new(names.clone())?;
    let proj = FinMap::new(
        total.clone(),
        c.graph.objects.clone(),
        names.iter().cloned().zip(elems.iter().map(|(_, a)| c.graph.c(a).clone())).collect(),
    )?;
    let index = elems.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
    Ok(Blob { slice: SliceObj::new(proj), elems, index })
}

/// Unit of the induced monad: `x ↦ (η x, ids(p x))`.
pub fn blob_unit<'b>(c: &Multicat, x: &SliceObj, bx: &'b Blob, atom: &str) -> Option<&'b Atom> {
    let p = &x.proj.graph()[atom];
    bx.lookup(&c.monad().unit(atom.to_string()), c.id(p))
}

/// Multiplication of the induced monad, `X^•• → X^•`: flatten the carrier
/// elements and compose the arrows. `None` when the composite leaves the
/// fragment.
pub fn blob_mult<'b>(c: &Multicat, bx: &'b Blob, bbx: &Blob, elem: &str) -> Option<&'b Atom> {
    let m = c.monad();
    let (big_xi, a) = bbx.decode(elem)?;
    let parts = m.try_map(big_xi, |n| bx.decode(n).cloned().ok_or_else(|| Error::UnknownAtom(n.clone()))).ok()?;
    let xi = m.mult(&parts.fmap(&mut |(x, _)| x.clone())).ok()?;
    let arrows = parts.fmap(&mut |(_, b)| b.clone());
    let r = c.composite(a, &arrows)?;
    bx.lookup(&xi, r)
}

/// Unit laws of the induced monad on `X^•` and, at depth 2, associativity
/// on `X^•••`.
pub fn check_blob_monad(c: &Multicat, x: &SliceObj, depth: usize) -> Result<Report> {
    if !(1..=2).contains(&depth) {
        return Err(Error::Unsupported(format!("blob monad depth {depth}")));
    }
    let m = c.monad();
    let b1 = blob_apply(c, x)?;
    let b2 = blob_apply(c, &b1.slice)?;
    let mut r = Report::new();
    for (i, (xi, a)) in b1.elems.iter().enumerate() {
        let e = b1.name(i);
        r.checked += 1;
        // μ ∘ η at X^•
        let wrapped = b2.lookup(&m.unit(e.clone()), c.id(c.graph.c(a)));
        match wrapped.and_then(|w| blob_mult(c, &b1, &b2, w)) {
            Some(v) if v == e => {}
            other => r.fail("blob left unit", format!("{e} -> {other:?}")),
        }
        // μ ∘ T^• η
        let units = m.try_map(xi, |y| blob_unit(c, x, &b1, y).cloned().ok_or_else(|| Error::Missing(y.clone())));
        let lifted = units.ok().and_then(|u| b2.lookup(&u, a));
        match lifted.and_then(|w| blob_mult(c, &b1, &b2, w)) {
            Some(v) if v == e => {}
            other => r.fail("blob right unit", format!("{e} -> {other:?}")),
        }
    }
    if depth == 2 {
        let b3 = blob_apply(c, &b2.slice)?;
        for i in 0..b3.elems.len() {
            let e = b3.name(i);
            let Some(inner) = blob_mult(c, &b2, &b3, e) else { continue };
            let Some(lhs) = blob_mult(c, &b1, &b2, inner) else { continue };
            let (big, a) = &b3.elems[i];
            let Ok(flat) = m.try_map(big, |n| blob_mult(c, &b1, &b2, n).cloned().ok_or_else(|| Error::Missing(n.clone()))) else {
                continue;
            };
            let Some(mid) = b2.lookup(&flat, a) else { continue };
            let Some(rhs) = blob_mult(c, &b1, &b2, mid) else { continue };
            r.checked += 1;
            if lhs != rhs {
                r.fail("blob associativity", format!("{e}: {lhs} vs {rhs}"));
            }
        }
    }
    Ok(r)
}

/// An algebra: a carrier over the objects and an action `h: X^• → X`
/// satisfying the unit and multiplication laws. Validated on construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgebraStr {
    pub carrier: SliceObj,
    pub action: IndexMap<Atom, Atom>,
    blob: Blob,
}

impl AlgebraStr {
    pub fn new(c: &Multicat, carrier: SliceObj, h: impl Fn(&TElem, &Atom) -> Option<Atom>) -> Result<Self> {
        let blob = blob_apply(c, &carrier)?;
        let mut action = IndexMap::new();
        for (i, (xi, a)) in blob.elems.iter().enumerate() {
            let x = h(xi, a).ok_or_else(|| Error::Missing(format!("action on {}", blob.name(i))))?;
            if carrier.proj.graph().get(&x) != Some(c.graph.c(a)) {
                return Err(Error::Law(format!("action on {} lands in the wrong fibre", blob.name(i))));
            }
            action.insert(blob.name(i).clone(), x);
        }
        let alg = AlgebraStr { carrier, action, blob };
        alg.check(c)?;
        Ok(alg)
    }

    pub fn blob(&self) -> &Blob {
        &self.blob
    }

    pub fn act(&self, xi: &TElem, a: &str) -> Option<&Atom> {
        self.blob.lookup(xi, a).map(|n| &self.action[n])
    }

    fn check(&self, c: &Multicat) -> Result<()> {
        let m = c.monad();
        for x in self.carrier.total.iter() {
            let e = blob_unit(c, &self.carrier, &self.blob, x).ok_or_else(|| Error::Missing(format!("unit at {x}")))?;
            if &self.action[e] != x {
                return Err(Error::Law(format!("unit law fails at {x}")));
            }
        }
        // walk X^•• without naming its elements
        let mut fibres: HashMap<&Atom, Vec<Atom>> = HashMap::new();
        for (name, s) in self.blob.slice.proj.graph() {
            fibres.entry(s).or_default().push(name.clone());
        }
        for a in c.graph.arrows.iter() {
            for big in m.fibre(c.graph.d(a), |s| fibres.get(s).cloned().unwrap_or_default()) {
                let parts = big.fmap(&mut |n| self.blob.decode(n).expect("blob element"));
                let arrows = parts.fmap(&mut |(_, b)| b.clone());
                let Some(r) = c.composite(a, &arrows) else { continue };
                let xi = m.mult(&parts.fmap(&mut |(x, _)| x.clone()))?;
                let Some(flat) = self.blob.lookup(&xi, r) else { continue };
                let acted = m.map(&big, |n| self.action[n].clone());
                let rhs = self.act(&acted, a).ok_or_else(|| Error::Missing(format!("action on {acted:?}")))?;
                if &self.action[flat] != rhs {
                    return Err(Error::Law(format!("multiplication law fails at {}", blob_name(m, &big, a))));
                }
            }
        }
        Ok(())
    }
}

/// Every algebra on a given carrier, by trying all actions. Exponential;
/// meant for desk-scale cross-checks.
pub fn algebras_on(c: &Multicat, carrier: &SliceObj) -> Vec<AlgebraStr> {
    let Ok(blob) = blob_apply(c, carrier) else { return Vec::new() };
    let options: Vec<Vec<Atom>> = blob.elems.iter().map(|(_, a)| carrier.proj.fiber(c.graph.c(a))).collect();
    let mut out = Vec::new();
    crate::monadkit::product(&options, &mut Vec::new(), &mut |choice: &[Atom]| {
        let table: HashMap<(TElem, Atom), Atom> = blob.elems.iter().cloned().zip(choice.iter().cloned()).collect();
        if let Ok(alg) = AlgebraStr::new(c, carrier.clone(), |xi, a| table.get(&(xi.clone(), a.clone())).cloned()) {
            out.push(alg);
        }
    });
    out
}

/// The discrete opfibration `D → C` of an algebra: objects are carrier
/// elements, arrows are elements of `X^•`, with codomain given by the action.
pub fn algebra_to_opfibration(c: &Multicat, alg: &AlgebraStr) -> Result<(Multicat, MultiMap)> {
    let m = c.monad();
    let blob = alg.blob();
    let names = blob.slice.total.clone();
    let graph = MGraph::new(
        m,
        alg.carrier.total.clone(),
        names.clone(),
        names.iter().cloned().zip(blob.elems.iter().map(|(xi, _)| xi.clone())).collect(),
        alg.action.clone(),
    )?;
    let mut ids = IndexMap::new();
    for x in alg.carrier.total.iter() {
        let e = blob_unit(c, &alg.carrier, blob, x).ok_or_else(|| Error::Missing(format!("unit at {x}")))?;
        ids.insert(x.clone(), e.clone());
    }
    let d = Multicat::tabulate(graph.clone(), ids, c.fragment, |outer, beta| {
        let (_, a) = blob.decode(outer)?;
        let xi = graph.composite_domain(beta).ok()?;
        let below = m.map(beta, |b| blob.decode(b).expect("arrow").1.clone());
        let r = c.composite(a, &below)?;
        blob.lookup(&xi, r).cloned()
    })?;
    let f1 = FinMap::new(names.clone(), c.graph.arrows.clone(), names.iter().cloned().zip(blob.elems.iter().map(|(_, a)| a.clone())).collect())?;
    Ok((d, MultiMap { f0: alg.carrier.proj.clone(), f1 }))
}

/// The algebra of a discrete opfibration: act by taking the codomain of the
/// unique lift.
pub fn opfibration_to_algebra(c: &Multicat, d: &Multicat, f: &MultiMap) -> Result<AlgebraStr> {
    if let Some(w) = opfibration_witness(d, c, f) {
        return Err(Error::NotOpfibration(w));
    }
    let mut lift: HashMap<(Atom, TElem), Atom> = HashMap::new();
    for b in d.graph.arrows.iter() {
        lift.insert((f.f1.graph()[b].clone(), d.graph.d(b).clone()), d.graph.c(b).clone());
    }
    AlgebraStr::new(c, SliceObj::new(f.f0.clone()), |xi, a| lift.get(&(a.clone(), xi.clone())).cloned())
}

/// Whether two multicategories over the same objects agree up to the arrow
/// bijection `phi` (identity on objects).
pub fn isomorphic_via(a: &Multicat, b: &Multicat, phi: &FinMap) -> bool {
    if a.graph.objects != b.graph.objects || !phi.is_bijective() {
        return false;
    }
    let m = a.monad();
    let ga = &a.graph;
    let gb = &b.graph;
    ga.arrows.iter().all(|x| {
        let y = &phi.graph()[x];
        gb.d(y) == ga.d(x) && gb.c(y) == ga.c(x)
    }) && ga.objects.iter().all(|s| &phi.graph()[a.id(s)] == b.id(s))
        && a.comp.len() == b.comp.len()
        && a.comp.iter().all(|((o, beta), r)| {
            b.composite(&phi.graph()[o], &m.map(beta, |x| phi.graph()[x].clone())) == Some(&phi.graph()[r])
        })
}

/// Pull an algebra back along `g: C → C′`.
pub fn restrict_algebra(c: &Multicat, g: &MultiMap, alg: &AlgebraStr) -> Result<AlgebraStr> {
    let m = c.monad();
    let pb = pullback(&g.f0, &alg.carrier.proj)?;
    let carrier = SliceObj::new(pb.pa.clone());
    AlgebraStr::new(c, carrier, |xi, a| {
        let upstairs = m.map(xi, |p| pb.pb.graph()[p].clone());
        let image = &g.f1.graph()[a];
        let x = alg.act(&upstairs, image)?;
        Some(pair_atom(c.graph.c(a), x))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finbase::FinSet;
    use MonadInstance::*;

    /// The walking arrow `A → B` with identities.
    pub(crate) fn arrow_category() -> Multicat {
        Multicat::category(
            &["A", "B"],
            &[("1A", "A", "A"), ("1B", "B", "B"), ("u", "A", "B")],
            &[("A", "1A"), ("B", "1B")],
            |g, f| match (g, f) {
                ("1A", "1A") => Some("1A".into()),
                ("1B", "1B") => Some("1B".into()),
                ("u", "1A") | ("1B", "u") => Some("u".into()),
                _ => None,
            },
        )
        .unwrap()
    }

    /// Category laws checked directly on a composition function.
    fn category_laws_hold(arrows: &[(&str, &str, &str)], ids: &[(&str, &str)], comp: &dyn Fn(&str, &str) -> Option<String>) -> bool {
        let id = |s: &str| ids.iter().find(|(o, _)| *o == s).unwrap().1;
        arrows.iter().all(|&(f, d, c)| comp(id(c), f).as_deref() == Some(f) && comp(f, id(d)).as_deref() == Some(f))
            && arrows.iter().all(|&(h, hd, _)| {
                arrows.iter().filter(|g| g.2 == hd).all(|&(g, gd, _)| {
                    arrows.iter().filter(|f| f.2 == gd).all(|&(f, _, _)| {
                        let hg = comp(h, g).unwrap();
                        let gf = comp(g, f).unwrap();
                        comp(&hg, f) == comp(h, &gf)
                    })
                })
            })
    }

    #[test]
    fn identity_instance_matches_category_checker() {
        let arrows = [("e", "*", "*"), ("s", "*", "*")];
        // the two-element monoids {e, s}: s∘s = s (idempotent) or s∘s = e (group)
        for ss in ["s", "e"] {
            let comp = move |g: &str, f: &str| -> Option<String> {
                Some(match (g, f) {
                    ("e", x) | (x, "e") => x.to_string(),
                    _ => ss.to_string(),
                })
            };
            let mc = Multicat::category(&["*"], &arrows, &[("*", "e")], comp).unwrap();
            assert_eq!(check_multicategory(&mc).passed(), category_laws_hold(&arrows, &[("*", "e")], &comp));
        }
        // a non-associative table: both checkers must reject it
        let bad = |g: &str, f: &str| -> Option<String> {
            Some(match (g, f) {
                ("e", x) | (x, "e") => x.to_string(),
                ("s", "s") => "t".into(),
                ("s", "t") => "e".into(),
                ("t", "s") => "s".into(),
                _ => "t".into(),
            })
        };
        let arrows3 = [("e", "*", "*"), ("s", "*", "*"), ("t", "*", "*")];
        let mc = Multicat::category(&["*"], &arrows3, &[("*", "e")], bad).unwrap();
        assert!(!category_laws_hold(&arrows3, &[("*", "e")], &bad));
        assert!(!check_multicategory(&mc).passed());
    }

    #[test]
    fn terminal_examples() {
        let t = terminal_multicategory(FreeMonoid, 3);
        assert_eq!(t.graph.arrows.len(), 4);
        assert!(check_multicategory(&t).passed());
        let two = t.graph.monad.key(&Shape::Seq(vec![Shape::Leaf("*".into()); 2]));
        let one = t.graph.monad.key(&Shape::Seq(vec![Shape::Leaf("*".into()); 1]));
        let zero = t.graph.monad.key(&Shape::Seq(vec![]));
        let beta = Shape::Seq(vec![Shape::Leaf(two.clone()), Shape::Leaf(zero.clone())]);
        let r = compose_cells(&t, &two, &beta).unwrap();
        assert_eq!(r, two);
        let beta = Shape::Seq(vec![Shape::Leaf(one.clone()), Shape::Leaf(zero)]);
        assert_eq!(compose_cells(&t, &two, &beta).unwrap(), one);
        assert!(compose_cells(&t, &two, &Shape::Seq(vec![Shape::Leaf(one)])).is_err());

        let tree = terminal_multicategory(BDTree, 3);
        assert_eq!(tree.graph.arrows.len(), BDTree.enumerate(&["*".to_string()], 3).len());
        assert!(check_multicategory(&tree).passed());
        let id = terminal_multicategory(Identity, 3);
        assert_eq!(id.graph.arrows.len(), 1);
        assert!(check_multicategory(&id).passed());
    }

    #[test]
    fn unit_composites() {
        let c = arrow_category();
        assert_eq!(compose_cells(&c, "1B", &Shape::Leaf("u".into())).unwrap(), "u");
        assert_eq!(compose_cells(&c, "u", &Shape::Leaf("1A".into())).unwrap(), "u");
        assert!(matches!(compose_cells(&c, "u", &Shape::Leaf("1B".into())), Err(Error::NotComposable(_))));
    }

    #[test]
    fn corrupted_table_is_caught() {
        let mut t = terminal_multicategory(FreeMonoid, 2);
        let key = t.comp.keys().find(|(o, b)| o.contains("*\",\"*") && b.leaf_count() == 2).cloned().unwrap();
        let wrong = t.graph.arrows.iter().find(|a| **a != t.comp[&key]).unwrap().clone();
        t.comp.insert(key, wrong);
        assert!(!check_multicategory(&t).passed());
    }

    #[test]
    fn opfibration_examples() {
        let c = arrow_category();
        assert!(is_discrete_opfibration(&c, &c, &MultiMap::identity(&c)));

        // two parallel arrows with the same domain collapse onto one
        let d = Multicat::category(
            &["A", "B"],
            &[("1A", "A", "A"), ("1B", "B", "B"), ("u", "A", "B"), ("v", "A", "B")],
            &[("A", "1A"), ("B", "1B")],
            |g, f| match (g, f) {
                ("1A", "1A") => Some("1A".into()),
                ("1B", "1B") => Some("1B".into()),
                (x, "1A") | ("1B", x) => Some(x.into()),
                _ => None,
            },
        )
        .unwrap();
        let f0 = FinMap::identity(&d.graph.objects);
        let f1 = FinMap::from_fn(d.graph.arrows.clone(), c.graph.arrows.clone(), |a| if a == "v" { "u".into() } else { a.into() }).unwrap();
        let f = MultiMap { f0, f1 };
        assert!(f.validate(&d, &c).passed());
        assert!(!is_discrete_opfibration(&d, &c, &f));
    }

    fn functor_algebra(c: &Multicat) -> AlgebraStr {
        // F(A) = {a1, a2}, F(B) = {b1}, F(u) constant
        let total = FinSet::new(["a1", "a2", "b1"]).unwrap();
        let proj = FinMap::from_fn(total, c.graph.objects.clone(), |x| if x.starts_with('a') { "A".into() } else { "B".into() }).unwrap();
        AlgebraStr::new(c, SliceObj::new(proj), |xi, a| {
            let Shape::Leaf(x) = xi else { return None };
            Some(if a == "u" { "b1".into() } else { x.clone() })
        })
        .unwrap()
    }

    #[test]
    fn grothendieck_construction() {
        let c = arrow_category();
        let alg = functor_algebra(&c);
        let (d, f) = algebra_to_opfibration(&c, &alg).unwrap();
        // one arrow per (element of F s, arrow out of s)
        assert_eq!(d.graph.arrows.len(), 5);
        assert!(check_multicategory(&d).passed());
        assert!(is_discrete_opfibration(&d, &c, &f));
        let back = opfibration_to_algebra(&c, &d, &f).unwrap();
        assert_eq!(back, alg);
    }

    fn monoid_algebra(t: &Multicat, n: usize, op: impl Fn(usize, usize) -> usize, unit: usize) -> Result<AlgebraStr> {
        let total = FinSet::numbered("m", n);
        let proj = FinMap::to_terminal(&total, "*");
        let idx = |s: &str| s[1..].parse::<usize>().unwrap();
        AlgebraStr::new(t, SliceObj::new(proj), |xi, _| {
            Some(format!("m{}", xi.leaves().iter().fold(unit, |acc, x| op(acc, idx(x)))))
        })
    }

    #[test]
    fn monoid_gives_plus_construction() {
        let t = terminal_multicategory(FreeMonoid, 3);
        let alg = monoid_algebra(&t, 2, |a, b| (a + b) % 2, 0).unwrap();
        let (mplus, f) = algebra_to_opfibration(&t, &alg).unwrap();
        assert!(is_discrete_opfibration(&mplus, &t, &f));
        for a in mplus.graph.arrows.iter() {
            let sum: usize = mplus.graph.d(a).leaves().iter().map(|x| x[1..].parse::<usize>().unwrap()).sum();
            assert_eq!(mplus.graph.c(a), &format!("m{}", sum % 2));
        }
        // non-associative operations are rejected eagerly
        assert!(monoid_algebra(&t, 3, |a, b| (2 * a + b) % 3, 0).is_err());
    }

    #[test]
    fn empty_carrier() {
        let t = terminal_multicategory(FreeMonoid, 2);
        let proj = FinMap::new(FinSet::empty(), t.graph.objects.clone(), IndexMap::new()).unwrap();
        let alg = AlgebraStr::new(&t, SliceObj::new(proj), |_, _| Some("none".into()));
        // the nullary arrow has no possible value on an empty carrier
        assert!(alg.is_err());
        let id = terminal_multicategory(Identity, 1);
        let proj = FinMap::new(FinSet::empty(), id.graph.objects.clone(), IndexMap::new()).unwrap();
        let alg = AlgebraStr::new(&id, SliceObj::new(proj), |_, _| None).unwrap();
        let (d, _) = algebra_to_opfibration(&id, &alg).unwrap();
        assert_eq!(d.graph.arrows.len(), 0);
    }

    #[test]
    fn blob_examples() {
        let t = terminal_multicategory(FreeMonoid, 3);
        let one = SliceObj::identity(&t.graph.objects);
        assert_eq!(blob_apply(&t, &one).unwrap().elems.len(), t.graph.arrows.len());
        let two = SliceObj::new(FinMap::to_terminal(&FinSet::numbered("x", 2), "*"));
        let b = blob_apply(&t, &two).unwrap();
        assert_eq!(b.elems.len(), 1 + 2 + 4 + 8);
        assert!(check_blob_monad(&t, &two, 1).unwrap().passed());
        let t2 = terminal_multicategory(FreeMonoid, 2);
        assert!(check_blob_monad(&t2, &two, 2).unwrap().passed());

        let c = arrow_category();
        let x = functor_algebra(&c).carrier;
        let bx = blob_apply(&c, &x).unwrap();
        // (TX)_s = sum over arrows s' → s of X_s'
        assert_eq!(bx.slice.proj.fiber("A").len(), 2);
        assert_eq!(bx.slice.proj.fiber("B").len(), 3);
        assert!(check_blob_monad(&c, &x, 2).unwrap().passed());
    }

    #[test]
    fn corrupted_comp_breaks_blob_monad() {
        let mut t = terminal_multicategory(FreeMonoid, 2);
        let unary = t.graph.monad.key(&Shape::Seq(vec![Shape::Leaf("*".into())]));
        let binary = t.graph.arrows.iter().find(|a| a.matches('*').count() == 2).unwrap().clone();
        let bad_key = (binary.clone(), Shape::Seq(vec![Shape::Leaf(unary.clone()), Shape::Leaf(unary)]));
        let other = t.graph.arrows.iter().find(|a| **a != binary).unwrap().clone();
        t.comp.insert(bad_key, other);
        let two = SliceObj::new(FinMap::to_terminal(&FinSet::numbered("x", 2), "*"));
        assert!(!check_blob_monad(&t, &two, 1).unwrap().passed());
    }

    #[test]
    fn restriction() {
        let c = arrow_category();
        let alg = functor_algebra(&c);
        let same = restrict_algebra(&c, &MultiMap::identity(&c), &alg).unwrap();
        assert_eq!(same.carrier.total.len(), alg.carrier.total.len());

        // truncating the terminal plain operad keeps the monoid structure
        let big = terminal_multicategory(FreeMonoid, 3);
        let small = terminal_multicategory(FreeMonoid, 2);
        let f0 = FinMap::identity(&small.graph.objects);
        let f1 = FinMap::from_fn(small.graph.arrows.clone(), big.graph.arrows.clone(), |a| a.to_string()).unwrap();
        let g = MultiMap { f0, f1 };
        assert!(g.validate(&small, &big).passed());
        let alg = monoid_algebra(&big, 3, |a, b| (a + b) % 3, 0).unwrap();
        let r = restrict_algebra(&small, &g, &alg).unwrap();
        assert_eq!(r.carrier.total.len(), 3);
    }

    #[test]
    fn json_round_trip() {
        for mc in [terminal_multicategory(FreeMonoid, 2), arrow_category(), terminal_multicategory(BDTree, 2)] {
            let back = Multicat::from_json(&mc.to_json()).unwrap();
            assert_eq!(back, mc);
        }
    }

    /// `{e, g}` with `g∘g = e`, as a one-object category.
    fn z2() -> Multicat {
        Multicat::category(&["*"], &[("e", "*", "*"), ("g", "*", "*")], &[("*", "e")], |a, b| {
            Some(if a == b { "e".into() } else if a == "e" { b.into() } else { a.into() })
        })
        .unwrap()
    }

    fn carrier_over(base: &FinSet, sizes: &[usize]) -> SliceObj {
        let mut graph = IndexMap::new();
        for (s, &n) in base.iter().zip(sizes) {
            for i in 0..n {
                graph.insert(format!("{s}.{i}"), s.clone());
            }
        }
        let total = FinSet::new(graph.keys().cloned()).unwrap();
        SliceObj::new(FinMap::new(total, base.clone(), graph).unwrap())
    }

    #[test]
    fn monoid_categories_have_blob_monads() {
        // every unital table on {e, s, t}; the associative ones are monoids
        let names = ["s", "t"];
        let mut monoids = 0;
        for code in 0..81usize {
            let entry = |i: usize, j: usize| ["e", "s", "t"][(code / 3usize.pow((2 * i + j) as u32)) % 3];
            let comp = |a: &str, b: &str| -> Option<String> {
                Some(match (a, b) {
                    ("e", x) | (x, "e") => x.to_string(),
                    _ => entry(names.iter().position(|n| *n == a)?, names.iter().position(|n| *n == b)?).to_string(),
                })
            };
            let mc = Multicat::category(&["*"], &[("e", "*", "*"), ("s", "*", "*"), ("t", "*", "*")], &[("*", "e")], comp).unwrap();
            if !check_multicategory(&mc).passed() {
                continue;
            }
            monoids += 1;
            for n in 0..=3 {
                let x = carrier_over(&mc.graph.objects, &[n]);
                assert!(check_blob_monad(&mc, &x, 2).unwrap().passed());
            }
        }
        // brute-force count of unital associative tables on {e, s, t}
        assert_eq!(monoids, 11);
    }

    #[test]
    fn round_trips_both_ways() {
        for c in [arrow_category(), z2(), terminal_multicategory(FreeMonoid, 2)] {
            let n = c.graph.objects.len();
            for sizes in [vec![1; n], vec![2; n]] {
                let carrier = carrier_over(&c.graph.objects, &sizes);
                for alg in algebras_on(&c, &carrier) {
                    let (d, f) = algebra_to_opfibration(&c, &alg).unwrap();
                    assert!(check_multicategory(&d).passed());
                    let back = opfibration_to_algebra(&c, &d, &f).unwrap();
                    assert_eq!(back, alg);
                    let (d2, f2) = algebra_to_opfibration(&c, &back).unwrap();
                    let phi = FinMap::from_fn(d.graph.arrows.clone(), d2.graph.arrows.clone(), |b| {
                        blob_name(c.monad(), d.graph.d(b), &f.f1.graph()[b])
                    })
                    .unwrap();
                    assert!(isomorphic_via(&d, &d2, &phi));
                    assert_eq!(f2.f0, f.f0);
                }
            }
        }
    }

    #[test]
    fn opfibrations_compose() {
        let c = z2();
        let mut seen = 0;
        for alg in algebras_on(&c, &carrier_over(&c.graph.objects, &[2])) {
            let (d, f) = algebra_to_opfibration(&c, &alg).unwrap();
            for sizes in [vec![1, 1], vec![1, 2], vec![2, 2]] {
                for beta in algebras_on(&d, &carrier_over(&d.graph.objects, &sizes)) {
                    let (e, g) = algebra_to_opfibration(&d, &beta).unwrap();
                    assert!(is_discrete_opfibration(&e, &c, &g.then(&f).unwrap()));
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }
}
