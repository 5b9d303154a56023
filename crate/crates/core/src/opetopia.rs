//! The opetope tower, the pasting-diagram categories `pd_n`, and slicing.
//!
//! An n-opetope for n ≥ 3 is a pasting term: a unit on an (n−2)-opetope, or
//! an (n−1)-opetope with one term plugged into each of its inputs. The inputs
//! of an opetope of dimension ≥ 3 are its node labels in preorder; its output
//! is computed by substituting pastings for nodes.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::finbase::{Atom, FinSet};
use crate::freealg::{free_arrows, weak_compositions, FreeArrow};
use crate::monadkit::{product, MonadInstance, Shape, TElem};
use crate::multicat::{is_discrete_opfibration, MGraph, MultiMap, Multicat};
use crate::report::Report;

/// Planar trees: `•` or a sequence of trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PTree {
    Edge,
    Node(Vec<PTree>),
}

impl PTree {
    pub fn corolla(k: usize) -> PTree {
        PTree::Node(vec![PTree::Edge; k])
    }

    pub fn leaves(&self) -> usize {
        match self {
            PTree::Edge => 1,
            PTree::Node(ch) => ch.iter().map(PTree::leaves).sum(),
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            PTree::Edge => 0,
            PTree::Node(ch) => 1 + ch.iter().map(PTree::nodes).sum::<usize>(),
        }
    }

    /// Constructor count.
    pub fn size(&self) -> usize {
        match self {
            PTree::Edge => 1,
            PTree::Node(ch) => 1 + ch.iter().map(PTree::size).sum::<usize>(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            PTree::Edge => json!("*"),
            PTree::Node(ch) => Value::Array(ch.iter().map(PTree::to_json).collect()),
        }
    }

    pub fn from_json(v: &Value) -> Result<PTree> {
        match v {
            Value::String(s) if s == "*" => Ok(PTree::Edge),
            Value::Array(items) => Ok(PTree::Node(items.iter().map(PTree::from_json).collect::<Result<_>>()?)),
            other => Err(Error::Malformed(format!("tree expects \"*\" or an array, got {other}"))),
        }
    }

    fn plug(&self, parts: &mut std::slice::Iter<'_, PTree>) -> PTree {
        match self {
            PTree::Edge => parts.next().expect("counted").clone(),
            PTree::Node(ch) => PTree::Node(ch.iter().map(|c| c.plug(parts)).collect()),
        }
    }
}

impl fmt::Display for PTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PTree::Edge => write!(f, "•"),
            PTree::Node(ch) => {
                write!(f, "⟨")?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "⟩")
            }
        }
    }
}

/// Substitute `parts[i]` for the i-th leaf of `base`.
pub fn graft(base: &PTree, parts: &[PTree]) -> Result<PTree> {
    if parts.len() != base.leaves() {
        return Err(Error::Arity { expected: base.leaves(), got: parts.len() });
    }
    Ok(base.plug(&mut parts.iter()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pasting {
    Unit(Box<Opetope>),
    Node(Box<Opetope>, Vec<Pasting>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opetope {
    Point,
    Arrow,
    Arity(usize),
    Paste { dim: usize, term: Pasting },
}

impl Pasting {
    pub fn unit_count(&self) -> usize {
        match self {
            Pasting::Unit(_) => 1,
            Pasting::Node(_, ch) => ch.iter().map(Pasting::unit_count).sum(),
        }
    }

    /// The object the term lands in, an opetope two dimensions down.
    pub fn cod(&self) -> Result<Opetope> {
        match self {
            Pasting::Unit(s) => Ok((**s).clone()),
            Pasting::Node(w, _) => w.boundary(),
        }
    }

    fn labels(&self, out: &mut Vec<Opetope>) {
        if let Pasting::Node(w, ch) = self {
            out.push((**w).clone());
            ch.iter().for_each(|c| c.labels(out));
        }
    }

    fn size(&self, dim: usize) -> usize {
        match self {
            Pasting::Unit(_) if dim == 3 => 1,
            Pasting::Unit(s) => 1 + s.size(),
            Pasting::Node(_, ch) if dim == 3 => 1 + ch.iter().map(|c| c.size(dim)).sum::<usize>(),
            Pasting::Node(w, ch) => 1 + w.size() + ch.iter().map(|c| c.size(dim)).sum::<usize>(),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Pasting::Unit(s) => {
                if s.dim() + 2 != dim {
                    return Err(Error::Malformed(format!("unit on a {}-opetope inside dimension {dim}", s.dim())));
                }
                s.validate()
            }
            Pasting::Node(w, ch) => {
                if w.dim() + 1 != dim {
                    return Err(Error::Malformed(format!("node labelled by a {}-opetope inside dimension {dim}", w.dim())));
                }
                w.validate()?;
                let inputs = w.inputs();
                if inputs.len() != ch.len() {
                    return Err(Error::Arity { expected: inputs.len(), got: ch.len() });
                }
                for (c, want) in ch.iter().zip(&inputs) {
                    c.check(dim)?;
                    let got = c.cod()?;
                    if &got != want {
                        return Err(Error::NotComposable(format!("input {want} fed by {got}")));
                    }
                }
                Ok(())
            }
        }
    }

    fn to_ptree(&self) -> PTree {
        match self {
            Pasting::Unit(_) => PTree::Edge,
            Pasting::Node(_, ch) => PTree::Node(ch.iter().map(Pasting::to_ptree).collect()),
        }
    }

    fn from_ptree(t: &PTree) -> Pasting {
        match t {
            PTree::Edge => Pasting::Unit(Box::new(Opetope::Arrow)),
            PTree::Node(ch) => Pasting::Node(Box::new(Opetope::Arity(ch.len())), ch.iter().map(Pasting::from_ptree).collect()),
        }
    }
}

impl Opetope {
    pub fn dim(&self) -> usize {
        match self {
            Opetope::Point => 0,
            Opetope::Arrow => 1,
            Opetope::Arity(_) => 2,
            Opetope::Paste { dim, .. } => *dim,
        }
    }

    pub fn tree(t: &PTree) -> Opetope {
        Opetope::Paste { dim: 3, term: Pasting::from_ptree(t) }
    }

    pub fn as_tree(&self) -> Option<PTree> {
        match self {
            Opetope::Paste { dim: 3, term } => Some(term.to_ptree()),
            _ => None,
        }
    }

    /// Payload size: 0 in dimensions 0 and 1, the arity in dimension 2,
    /// constructor count for trees, and above that every constructor plus
    /// the size of its label.
    pub fn size(&self) -> usize {
        match self {
            Opetope::Point | Opetope::Arrow => 0,
            Opetope::Arity(k) => *k,
            Opetope::Paste { dim, term } => term.size(*dim),
        }
    }

    /// Input faces, one dimension down, in canonical order.
    pub fn inputs(&self) -> Vec<Opetope> {
        match self {
            Opetope::Point => Vec::new(),
            Opetope::Arrow => vec![Opetope::Point],
            Opetope::Arity(k) => vec![Opetope::Arrow; *k],
            Opetope::Paste { term, .. } => {
                let mut out = Vec::new();
                term.labels(&mut out);
                out
            }
        }
    }

    /// The output face.
    pub fn boundary(&self) -> Result<Opetope> {
        match self {
            Opetope::Point => Err(Error::Malformed("a point has no boundary".into())),
            Opetope::Arrow => Ok(Opetope::Point),
            Opetope::Arity(_) => Ok(Opetope::Arrow),
            Opetope::Paste { dim: 3, term } => Ok(Opetope::Arity(term.unit_count())),
            Opetope::Paste { dim, term } => Ok(Opetope::Paste { dim: dim - 1, term: strip(&output_tagged(*dim, term)?) }),
        }
    }

    /// The pasting consisting of this opetope alone, one dimension up.
    pub fn single(&self) -> Opetope {
        match self {
            Opetope::Point => Opetope::Arrow,
            Opetope::Arrow => Opetope::Arity(1),
            _ => Opetope::Paste {
                dim: self.dim() + 1,
                term: Pasting::Node(Box::new(self.clone()), self.inputs().into_iter().map(|i| Pasting::Unit(Box::new(i))).collect()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Opetope::Paste { dim, term } if *dim < 3 => Err(Error::Malformed(format!("pasting term in dimension {dim} {term:?}"))),
            Opetope::Paste { dim, term } => {
                term.check(*dim)?;
                if *dim > 3 {
                    output_tagged(*dim, term)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"dim": self.dim(), "payload": self.payload()})
    }

    fn payload(&self) -> Value {
        match self {
            Opetope::Point | Opetope::Arrow => json!("*"),
            Opetope::Arity(k) => json!(k),
            Opetope::Paste { dim: 3, term } => term.to_ptree().to_json(),
            Opetope::Paste { term, .. } => term_json(term),
        }
    }

    pub fn from_json(v: &Value) -> Result<Opetope> {
        let dim = v.get("dim").and_then(Value::as_u64).ok_or_else(|| Error::Malformed("opetope needs a dim".into()))?;
        let payload = v.get("payload").ok_or_else(|| Error::Malformed("opetope needs a payload".into()))?;
        let op = Opetope::from_payload(dim as usize, payload)?;
        op.validate()?;
        Ok(op)
    }

    fn from_payload(dim: usize, v: &Value) -> Result<Opetope> {
        match dim {
            0 => Ok(Opetope::Point),
            1 => Ok(Opetope::Arrow),
            2 => v.as_u64().map(|k| Opetope::Arity(k as usize)).ok_or_else(|| Error::Malformed(format!("arity expected, got {v}"))),
            3 => Ok(Opetope::tree(&PTree::from_json(v)?)),
            _ => Ok(Opetope::Paste { dim, term: term_from_json(dim, v)? }),
        }
    }
}

fn term_json(t: &Pasting) -> Value {
    match t {
        Pasting::Unit(s) => json!({"unit": s.payload()}),
        Pasting::Node(w, ch) => json!({"node": w.payload(), "children": ch.iter().map(term_json).collect::<Vec<_>>()}),
    }
}

fn term_from_json(dim: usize, v: &Value) -> Result<Pasting> {
    if let Some(u) = v.get("unit") {
        return Ok(Pasting::Unit(Box::new(Opetope::from_payload(dim - 2, u)?)));
    }
    let w = v.get("node").ok_or_else(|| Error::Malformed(format!("pasting term expected, got {v}")))?;
    let ch = v.get("children").and_then(Value::as_array).ok_or_else(|| Error::Malformed("node needs children".into()))?;
    Ok(Pasting::Node(
        Box::new(Opetope::from_payload(dim - 1, w)?),
        ch.iter().map(|c| term_from_json(dim, c)).collect::<Result<_>>()?,
    ))
}

impl fmt::Display for Opetope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Opetope::Point => write!(f, "·"),
            Opetope::Arrow => write!(f, "→"),
            Opetope::Arity(k) => write!(f, "{k}"),
            Opetope::Paste { dim: 3, term } => write!(f, "{}", term.to_ptree()),
            Opetope::Paste { term, .. } => write_term(f, term),
        }
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &Pasting) -> fmt::Result {
    match t {
        Pasting::Unit(s) => write!(f, "ι({s})"),
        Pasting::Node(w, ch) => {
            write!(f, "{w}[")?;
            for (i, c) in ch.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write_term(f, c)?;
            }
            write!(f, "]")
        }
    }
}

/// A pasting term whose nodes carry tags, used to track where the cells of
/// a substitution came from.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Tagged<T> {
    Unit(Opetope),
    Node(Opetope, T, Vec<Tagged<T>>),
}

fn strip<T>(t: &Tagged<T>) -> Pasting {
    match t {
        Tagged::Unit(s) => Pasting::Unit(Box::new(s.clone())),
        Tagged::Node(w, _, ch) => Pasting::Node(Box::new(w.clone()), ch.iter().map(strip).collect()),
    }
}

fn tag<T>(t: &Pasting, next: &mut impl FnMut() -> T) -> Tagged<T> {
    match t {
        Pasting::Unit(s) => Tagged::Unit((**s).clone()),
        Pasting::Node(w, ch) => {
            let here = next();
            Tagged::Node((**w).clone(), here, ch.iter().map(|c| tag(c, next)).collect())
        }
    }
}

fn tags<T: Clone>(t: &Tagged<T>, out: &mut Vec<T>) {
    if let Tagged::Node(_, x, ch) = t {
        out.push(x.clone());
        ch.iter().for_each(|c| tags(c, out));
    }
}

fn retag<T, U>(t: Tagged<T>, f: &impl Fn(T) -> U) -> Tagged<U> {
    match t {
        Tagged::Unit(s) => Tagged::Unit(s),
        Tagged::Node(w, x, ch) => Tagged::Node(w, f(x), ch.into_iter().map(|c| retag(c, f)).collect()),
    }
}

fn plug_units<T: Clone>(t: &Tagged<T>, next: &mut impl FnMut() -> Tagged<T>) -> Tagged<T> {
    match t {
        Tagged::Unit(_) => next(),
        Tagged::Node(w, x, ch) => Tagged::Node(w.clone(), x.clone(), ch.iter().map(|c| plug_units(c, next)).collect()),
    }
}

/// Output of an n-term (n ≥ 4); each node is tagged with the index of the
/// unit of `t` it comes from, units counted in preorder.
fn output_tagged(n: usize, t: &Pasting) -> Result<Tagged<usize>> {
    match t {
        Pasting::Unit(s) => Ok(Tagged::Node((**s).clone(), 0, s.inputs().into_iter().map(Tagged::Unit).collect())),
        Pasting::Node(w, ch) => {
            let mut parts = Vec::with_capacity(ch.len());
            let mut offset = 0;
            for c in ch {
                let o = output_tagged(n, c)?;
                parts.push(retag(o, &|u| u + offset));
                offset += c.unit_count();
            }
            let Opetope::Paste { term, .. } = &**w else {
                return Err(Error::Malformed(format!("label {w} is not a pasting")));
            };
            substitute(n - 1, term, parts)
        }
    }
}

/// Replace the i-th node of the m-term `omega` (preorder) by `parts[i]`,
/// whose output must be that node's label.
fn substitute<T: Clone>(m: usize, omega: &Pasting, parts: Vec<Tagged<T>>) -> Result<Tagged<T>> {
    let expected = omega.count_nodes();
    if parts.len() != expected {
        return Err(Error::Arity { expected, got: parts.len() });
    }
    let mut it = parts.into_iter();
    subst_rec(m, omega, &mut it)
}

fn subst_rec<T: Clone>(m: usize, omega: &Pasting, parts: &mut impl Iterator<Item = Tagged<T>>) -> Result<Tagged<T>> {
    match omega {
        Pasting::Unit(s) => Ok(Tagged::Unit((**s).clone())),
        Pasting::Node(alpha, ch) => {
            let p = parts.next().expect("counted");
            let subs = ch.iter().map(|c| subst_rec(m, c, parts)).collect::<Result<Vec<_>>>()?;
            let perm = unit_to_input(m, &strip(&p), alpha)?;
            let mut u = 0;
            Ok(plug_units(&p, &mut || {
                let j = perm[u];
                u += 1;
                subs[j].clone()
            }))
        }
    }
}

/// For an m-term `p` with output `alpha`, the input of `alpha` matched by
/// each unit of `p`.
fn unit_to_input(m: usize, p: &Pasting, alpha: &Opetope) -> Result<Vec<usize>> {
    let units = p.unit_count();
    if m == 3 {
        return if alpha == &Opetope::Arity(units) {
            Ok((0..units).collect())
        } else {
            Err(Error::NotComposable(format!("tree with {units} leaves in place of {alpha}")))
        };
    }
    let out = output_tagged(m, p)?;
    match alpha {
        Opetope::Paste { term, .. } if *term == strip(&out) => {}
        _ => return Err(Error::NotComposable(format!("pasting with output {} in place of {alpha}", strip(&out).to_ptree()))),
    }
    let mut order = Vec::new();
    tags(&out, &mut order);
    let mut perm = vec![0; units];
    for (j, u) in order.into_iter().enumerate() {
        perm[u] = j;
    }
    Ok(perm)
}

impl Pasting {
    fn count_nodes(&self) -> usize {
        match self {
            Pasting::Unit(_) => 0,
            Pasting::Node(_, ch) => 1 + ch.iter().map(Pasting::count_nodes).sum::<usize>(),
        }
    }
}

/// Every n-opetope of payload size at most `bound`, ordered by size.
pub fn opetopes(n: usize, bound: usize) -> Vec<Opetope> {
    let mut out = match n {
        0 => vec![Opetope::Point],
        1 => vec![Opetope::Arrow],
        2 => (0..=bound).map(Opetope::Arity).collect(),
        3 => trees_via_free(bound).iter().map(Opetope::tree).collect(),
        _ => {
            let labels: Vec<Label> = opetopes(n - 1, bound.saturating_sub(1))
                .into_iter()
                .map(|w| Label { size: w.size(), out: w.boundary().expect("dimension ≥ 3"), inputs: w.inputs(), op: w })
                .collect();
            let mut memo = HashMap::new();
            let mut all = Vec::new();
            for tau in opetopes(n - 2, bound) {
                all.extend(terms_into(n, &tau, bound, &labels, &mut memo).into_iter().map(|(term, _)| Opetope::Paste { dim: n, term }));
            }
            all
        }
    };
    out.sort_by(|a, b| (a.size(), a).cmp(&(b.size(), b)));
    out
}

/// Trees of size ≤ `bound` as terms of the free plain multicategory on the
/// graph with one k-ary generator for each k, layered by constructor count
/// (an identity or a generator each count 1).
fn trees_via_free(bound: usize) -> Vec<PTree> {
    let names: Vec<Atom> = (0..bound).map(|k| k.to_string()).collect();
    let graph = MGraph::new(
        MonadInstance::FreeMonoid,
        FinSet::new(["*"]).expect("one object"),
        FinSet::new(names.clone()).expect("distinct"),
        names.iter().enumerate().map(|(k, a)| (a.clone(), Shape::Seq(vec![Shape::Leaf("*".to_string()); k]))).collect(),
        names.iter().map(|a| (a.clone(), "*".to_string())).collect(),
    )
    .expect("terminal graph");
    let mut layers: Vec<Vec<FreeArrow>> = vec![Vec::new()];
    for s in 1..=bound {
        let mut layer = Vec::new();
        if s == 1 {
            layer.push(FreeArrow::Id("*".to_string()));
        }
        for (k, gen) in names.iter().enumerate().take(s) {
            let d = graph.d(gen);
            for parts in weak_compositions(s - 1 - k, k) {
                // every child costs at least 1; `parts` spreads the rest
                let options: Vec<Vec<FreeArrow>> = parts.iter().map(|&p| layers[p + 1].clone()).collect();
                product(&options, &mut Vec::new(), &mut |pick: &[FreeArrow]| {
                    layer.push(FreeArrow::Node { gen: gen.clone(), inner: Box::new(d.relabel(pick).expect("leaf count")) });
                });
            }
        }
        layers.push(layer);
    }
    fn to_tree(a: &FreeArrow) -> PTree {
        match a {
            FreeArrow::Id(_) => PTree::Edge,
            FreeArrow::Node { inner, .. } => PTree::Node(inner.leaves().into_iter().map(to_tree).collect()),
        }
    }
    layers.iter().flatten().map(to_tree).collect()
}

struct Label {
    op: Opetope,
    size: usize,
    out: Opetope,
    inputs: Vec<Opetope>,
}

type Memo = HashMap<(Opetope, usize), Vec<(Pasting, usize)>>;

/// n-terms landing in `tau` with size ≤ `budget`, with their sizes.
fn terms_into(n: usize, tau: &Opetope, budget: usize, labels: &[Label], memo: &mut Memo) -> Vec<(Pasting, usize)> {
    if let Some(hit) = memo.get(&(tau.clone(), budget)) {
        return hit.clone();
    }
    let mut out = Vec::new();
    if 1 + tau.size() <= budget {
        out.push((Pasting::Unit(Box::new(tau.clone())), 1 + tau.size()));
    }
    for l in labels.iter().filter(|l| &l.out == tau) {
        let head = 1 + l.size;
        if head + l.inputs.len() > budget {
            continue;
        }
        let mut acc = Vec::new();
        children(n, &l.inputs, budget - head, labels, memo, &mut acc, 0, &mut |ch, used| {
            out.push((Pasting::Node(Box::new(l.op.clone()), ch.to_vec()), head + used));
        });
    }
    memo.insert((tau.clone(), budget), out.clone());
    out
}

#[allow(clippy::too_many_arguments)]
fn children(
    n: usize,
    inputs: &[Opetope],
    budget: usize,
    labels: &[Label],
    memo: &mut Memo,
    acc: &mut Vec<Pasting>,
    used: usize,
    emit: &mut impl FnMut(&[Pasting], usize),
) {
    let i = acc.len();
    if i == inputs.len() {
        emit(acc, used);
        return;
    }
    let reserve = inputs.len() - i - 1;
    let room = budget - used - reserve;
    for (t, s) in terms_into(n, &inputs[i], room, labels, memo) {
        acc.push(t);
        children(n, inputs, budget, labels, memo, acc, used + s, emit);
        acc.pop();
    }
}

/// A morphism of `pd_n`: each constituent of `cod` is assigned a
/// sub-pasting of `dom` with that constituent as its output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PdMorphism {
    pub n: usize,
    pub dom: Opetope,
    pub cod: Opetope,
    pub parts: Vec<Opetope>,
}

impl PdMorphism {
    /// Build from a codomain and its decomposition; the domain is the
    /// reassembled pasting.
    pub fn new(n: usize, cod: Opetope, parts: Vec<Opetope>) -> Result<Self> {
        let dom = reassemble(n, &cod, &parts)?;
        Ok(PdMorphism { n, dom, cod, parts })
    }

    pub fn identity(n: usize, b: &Opetope) -> Result<Self> {
        PdMorphism::new(n, b.clone(), b.inputs().iter().map(Opetope::single).collect())
    }

    pub fn to_json(&self) -> Value {
        json!({"dom": self.dom.to_json(), "cod": self.cod.to_json(), "parts": self.parts.iter().map(Opetope::to_json).collect::<Vec<_>>()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let get = |k: &str| v.get(k).ok_or_else(|| Error::Malformed(format!("morphism needs {k}")));
        let dom = Opetope::from_json(get("dom")?)?;
        let cod = Opetope::from_json(get("cod")?)?;
        let parts = get("parts")?
            .as_array()
            .ok_or_else(|| Error::Malformed("parts must be an array".into()))?
            .iter()
            .map(Opetope::from_json)
            .collect::<Result<Vec<_>>>()?;
        let n = cod.dim().checked_sub(1).ok_or_else(|| Error::Malformed("codomain is a point".into()))?;
        let m = PdMorphism::new(n, cod, parts)?;
        if m.dom != dom {
            return Err(Error::NotComposable(format!("parts reassemble to {}, not {dom}", m.dom)));
        }
        Ok(m)
    }
}

/// Glue the decomposition back together.
pub fn reassemble(n: usize, cod: &Opetope, parts: &[Opetope]) -> Result<Opetope> {
    Ok(reassemble_traced(n, cod, parts)?.0)
}

/// Reassemble, reporting for each constituent of the result the part and
/// the position within it that it came from.
fn reassemble_traced(n: usize, cod: &Opetope, parts: &[Opetope]) -> Result<(Opetope, Vec<(usize, usize)>)> {
    if cod.dim() != n + 1 {
        return Err(Error::Malformed(format!("{cod} is not an object of pd_{n}")));
    }
    let inputs = cod.inputs();
    if inputs.len() != parts.len() {
        return Err(Error::Arity { expected: inputs.len(), got: parts.len() });
    }
    for (p, want) in parts.iter().zip(&inputs) {
        if p.dim() != n + 1 || &p.boundary()? != want {
            return Err(Error::NotComposable(format!("part {p} does not bound {want}")));
        }
    }
    match cod {
        Opetope::Point => unreachable!("dimension checked"),
        Opetope::Arrow => Ok((Opetope::Arrow, vec![(0, 0)])),
        Opetope::Arity(_) => {
            let mut trace = Vec::new();
            for (w, p) in parts.iter().enumerate() {
                trace.extend((0..p.inputs().len()).map(|j| (w, j)));
            }
            Ok((Opetope::Arity(trace.len()), trace))
        }
        Opetope::Paste { dim, term } => {
            let tagged = parts
                .iter()
                .enumerate()
                .map(|(w, p)| {
                    let Opetope::Paste { term: pt, .. } = p else { unreachable!("dimension checked") };
                    let mut j = 0;
                    tag(pt, &mut || {
                        j += 1;
                        (w, j - 1)
                    })
                })
                .collect();
            let out = substitute(*dim, term, tagged)?;
            let mut trace = Vec::new();
            tags(&out, &mut trace);
            Ok((Opetope::Paste { dim: *dim, term: strip(&out) }, trace))
        }
    }
}

/// `g ∘ f`: nest f's parts inside g's, then flatten.
pub fn pd_compose(g: &PdMorphism, f: &PdMorphism) -> Result<PdMorphism> {
    if f.n != g.n || f.cod != g.dom {
        return Err(Error::NotComposable(format!("{} then {}", f.cod, g.dom)));
    }
    let (mid, trace) = reassemble_traced(g.n, &g.cod, &g.parts)?;
    debug_assert_eq!(mid, g.dom);
    let mut groups: Vec<Vec<(usize, &Opetope)>> = vec![Vec::new(); g.parts.len()];
    for ((w, j), part) in trace.into_iter().zip(&f.parts) {
        groups[w].push((j, part));
    }
    let parts = groups
        .into_iter()
        .zip(&g.parts)
        .map(|(mut grp, gw)| {
            grp.sort_by_key(|(j, _)| *j);
            reassemble(g.n, gw, &grp.into_iter().map(|(_, p)| p.clone()).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let h = PdMorphism::new(g.n, g.cod.clone(), parts)?;
    if h.dom != f.dom {
        return Err(Error::Law(format!("composite has domain {}, expected {}", h.dom, f.dom)));
    }
    Ok(h)
}

pub fn pd_hom(n: usize, dom: &Opetope, cod: &Opetope) -> Result<Vec<PdMorphism>> {
    pd_hom_with(n, dom, cod, false)
}

/// All morphisms `dom → cod` in `pd_n` for n ≤ 2. With `contraction_only`
/// no constituent may be assigned the empty pasting.
pub fn pd_hom_with(n: usize, dom: &Opetope, cod: &Opetope, contraction_only: bool) -> Result<Vec<PdMorphism>> {
    if n > 2 {
        return Err(Error::Unsupported(format!("hom enumeration in pd_{n}")));
    }
    for o in [dom, cod] {
        if o.dim() != n + 1 {
            return Err(Error::Malformed(format!("{o} is not an object of pd_{n}")));
        }
        o.validate()?;
    }
    let build = |parts: Vec<Opetope>| PdMorphism { n, dom: dom.clone(), cod: cod.clone(), parts };
    Ok(match (dom, cod) {
        (Opetope::Arrow, Opetope::Arrow) => vec![build(vec![Opetope::Arrow])],
        (Opetope::Arity(m), Opetope::Arity(k)) => weak_compositions(*m, *k)
            .into_iter()
            .filter(|c| !contraction_only || c.iter().all(|&x| x > 0))
            .map(|c| build(c.into_iter().map(Opetope::Arity).collect()))
            .collect(),
        _ => {
            let (s, t) = (dom.as_tree().expect("dimension 3"), cod.as_tree().expect("dimension 3"));
            decompositions(&s, &t, contraction_only)
                .into_iter()
                .map(|parts| build(parts.iter().map(Opetope::tree).collect()))
                .collect()
        }
    })
}

/// Ways to cut `s` into a top piece and the subtrees hanging off its leaves.
fn prefixes(s: &PTree) -> Vec<(PTree, Vec<PTree>)> {
    let mut out = vec![(PTree::Edge, vec![s.clone()])];
    if let PTree::Node(ch) = s {
        let options: Vec<Vec<(PTree, Vec<PTree>)>> = ch.iter().map(prefixes).collect();
        product(&options, &mut Vec::new(), &mut |pick: &[(PTree, Vec<PTree>)]| {
            let top = PTree::Node(pick.iter().map(|(t, _)| t.clone()).collect());
            let rest = pick.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
            out.push((top, rest));
        });
    }
    out
}

/// Assignments of a subtree of `s` to each node of `t` (preorder) that
/// reassemble to `s`.
fn decompositions(s: &PTree, t: &PTree, contraction_only: bool) -> Vec<Vec<PTree>> {
    match t {
        PTree::Edge => {
            if s == &PTree::Edge {
                vec![Vec::new()]
            } else {
                Vec::new()
            }
        }
        PTree::Node(tc) => {
            let mut out = Vec::new();
            for (top, rest) in prefixes(s) {
                if rest.len() != tc.len() || (contraction_only && top == PTree::Edge) {
                    continue;
                }
                let options: Vec<Vec<Vec<PTree>>> =
                    rest.iter().zip(tc).map(|(r, c)| decompositions(r, c, contraction_only)).collect();
                product(&options, &mut Vec::new(), &mut |pick: &[Vec<PTree>]| {
                    let mut parts = vec![top.clone()];
                    pick.iter().for_each(|p| parts.extend(p.iter().cloned()));
                    out.push(parts);
                });
            }
            out
        }
    }
}

/// Category laws of `pd_n` on the given objects: identities, unit laws,
/// closure of composites in the enumerated hom-sets, associativity.
pub fn check_pd_category(exec: Exec, n: usize, objects: &[Opetope], contraction_only: bool) -> Report {
    let mut report = Report::new();
    let pairs: Vec<(usize, usize)> = (0..objects.len()).flat_map(|i| (0..objects.len()).map(move |j| (i, j))).collect();
    let homs: Vec<Result<Vec<PdMorphism>>> =
        exec.map(&pairs, |&(i, j)| pd_hom_with(n, &objects[i], &objects[j], contraction_only));
    let mut hom: HashMap<(usize, usize), Vec<PdMorphism>> = HashMap::new();
    for (&(i, j), h) in pairs.iter().zip(homs) {
        match h {
            Ok(h) => {
                let distinct: std::collections::HashSet<&PdMorphism> = h.iter().collect();
                report.checked += 1;
                if distinct.len() != h.len() {
                    report.fail("duplicate-free", format!("Hom({}, {})", objects[i], objects[j]));
                }
                hom.insert((i, j), h);
            }
            Err(e) => report.fail("enumeration", e.to_string()),
        }
    }
    let ids: Vec<Option<PdMorphism>> = objects.iter().map(|b| PdMorphism::identity(n, b).ok()).collect();
    let nobj = objects.len();
    let position: HashMap<(usize, usize), HashMap<&PdMorphism, usize>> =
        hom.iter().map(|(&k, h)| (k, h.iter().enumerate().map(|(i, f)| (f, i)).collect())).collect();
    // table[a][(b, c)][f][g] = index of g ∘ f in Hom(a, c), when it is there
    type Table = HashMap<(usize, usize), Vec<Vec<Option<usize>>>>;
    let sources: Vec<usize> = (0..nobj).collect();
    let built: Vec<(Report, Table)> = exec.map(&sources, |&a| {
        let mut r = Report::new();
        let mut table = Table::new();
        let Some(ida) = &ids[a] else {
            r.fail("identity", format!("{}", objects[a]));
            return (r, table);
        };
        r.checked += 1;
        if !position[&(a, a)].contains_key(ida) {
            r.fail("identity", format!("identity of {} missing from its hom-set", objects[a]));
        }
        for b in 0..nobj {
            for f in &hom[&(a, b)] {
                let idb = ids[b].as_ref().expect("checked in its own row");
                r.checked += 2;
                if pd_compose(idb, f).as_ref() != Ok(f) {
                    r.fail("left unit", format!("{}", f.to_json()));
                }
                if pd_compose(f, ida).as_ref() != Ok(f) {
                    r.fail("right unit", format!("{}", f.to_json()));
                }
            }
            for c in 0..nobj {
                let rows = hom[&(a, b)]
                    .iter()
                    .map(|f| {
                        hom[&(b, c)]
                            .iter()
                            .map(|g| {
                                r.checked += 1;
                                match pd_compose(g, f) {
                                    Ok(gf) => {
                                        let at = position[&(a, c)].get(&gf).copied();
                                        if at.is_none() {
                                            r.fail("closure", format!("{}", gf.to_json()));
                                        }
                                        at
                                    }
                                    Err(e) => {
                                        r.fail("composable", e.to_string());
                                        None
                                    }
                                }
                            })
                            .collect()
                    })
                    .collect();
                table.insert((b, c), rows);
            }
        }
        (r, table)
    });
    let mut tables = Vec::with_capacity(nobj);
    for (r, t) in built {
        report.merge(r);
        tables.push(t);
    }
    if !report.passed() {
        return report;
    }
    let per_source: Vec<Report> = exec.map(&sources, |&a| {
        let mut r = Report::new();
        for b in 0..nobj {
            for c in 0..nobj {
                for d in 0..nobj {
                    let (fg, ghs, fgh) = (&tables[a][&(b, c)], &tables[b][&(c, d)], &tables[a][&(c, d)]);
                    let fhg = &tables[a][&(b, d)];
                    for (fi, row) in fg.iter().enumerate() {
                        for (gi, gf) in row.iter().enumerate() {
                            for (hi, hg) in ghs[gi].iter().enumerate() {
                                r.checked += 1;
                                let left = gf.and_then(|x| fgh[x][hi]);
                                let right = hg.and_then(|x| fhg[fi][x]);
                                if left.is_none() || left != right {
                                    let (f, g, h) = (&hom[&(a, b)][fi], &hom[&(b, c)][gi], &hom[&(c, d)][hi]);
                                    r.fail("associativity", format!("{} ∘ {} ∘ {}", h.to_json(), g.to_json(), f.to_json()));
                                }
                            }
                        }
                    }
                }
            }
        }
        r
    });
    per_source.into_iter().for_each(|r| report.merge(r));
    report
}

/// The multicategory obtained by slicing over an algebra presented as a
/// discrete opfibration: its domain, kept together with the projection.
#[derive(Debug, Clone)]
pub struct Slice {
    pub multicat: Multicat,
    pub over: MultiMap,
}

pub fn slice_by_algebra(d: &Multicat, e: &Multicat, f: &MultiMap) -> Result<Slice> {
    let report = f.validate(e, d);
    if !report.passed() {
        return Err(Error::NotOpfibration(report.to_string()));
    }
    if !is_discrete_opfibration(e, d, f) {
        return Err(Error::NotOpfibration("some configuration has no unique lift".into()));
    }
    Ok(Slice { multicat: e.clone(), over: f.clone() })
}

/// The slice `C⁺`: objects are arrows of `C`, arrows are pastings of
/// `C`-arrows together with the arrow they compose to.
#[derive(Debug, Clone)]
pub struct SlicePlus {
    pub base: Multicat,
    pub bound: usize,
    pub arrows: Vec<(FreeArrow, Atom)>,
}

/// Generator occurrences of a term, in preorder.
pub fn generators(a: &FreeArrow) -> Vec<Atom> {
    fn go(a: &FreeArrow, out: &mut Vec<Atom>) {
        if let FreeArrow::Node { gen, inner } = a {
            out.push(gen.clone());
            inner.leaves().into_iter().for_each(|x| go(x, out));
        }
    }
    let mut out = Vec::new();
    go(a, &mut out);
    out
}

/// Compose a term inside `c`; `None` when a composite leaves the fragment.
pub fn evaluate(c: &Multicat, a: &FreeArrow) -> Option<Atom> {
    match a {
        FreeArrow::Id(s) => Some(c.id(s).clone()),
        FreeArrow::Node { gen, inner } => {
            let beta: TElem = inner.try_fmap(&mut |x| evaluate(c, x).ok_or(())).ok()?;
            c.composite(gen, &beta).cloned()
        }
    }
}

pub fn slice_plus(c: &Multicat, bound: usize) -> SlicePlus {
    let arrows = free_arrows(&c.graph, bound).into_iter().filter_map(|a| evaluate(c, &a).map(|r| (a, r))).collect();
    SlicePlus { base: c.clone(), bound, arrows }
}

impl SlicePlus {
    pub fn objects(&self) -> &FinSet {
        &self.base.graph.arrows
    }

    /// Pastings with the given generators (preorder) composing to `target`.
    pub fn hom(&self, inputs: &[Atom], target: &str) -> Vec<&FreeArrow> {
        self.arrows.iter().filter(|(a, r)| r == target && generators(a) == inputs).map(|(a, _)| a).collect()
    }

    /// As a plain multicategory. Pastings of unary arrows are chains, so
    /// their generator lists determine them; other shapes need a richer
    /// monad than the shipped ones.
    pub fn to_multicat(&self) -> Result<Multicat> {
        let g = &self.base.graph;
        if let Some(a) = g.arrows.iter().find(|a| g.d(a).leaf_count() != 1) {
            return Err(Error::Unsupported(format!("slice of a multicategory with non-unary arrow {a}")));
        }
        let m = self.base.monad();
        let names: Vec<Atom> = self.arrows.iter().map(|(a, _)| a.to_json(m).to_string()).collect();
        let by_term: HashMap<&FreeArrow, &Atom> = self.arrows.iter().map(|(a, _)| a).zip(&names).collect();
        let terms: HashMap<&Atom, &FreeArrow> = names.iter().zip(self.arrows.iter().map(|(a, _)| a)).collect();
        let graph = MGraph::new(
            MonadInstance::FreeMonoid,
            g.arrows.clone(),
            FinSet::new(names.clone())?,
            names.iter().zip(&self.arrows).map(|(n, (a, _))| (n.clone(), Shape::Seq(generators(a).into_iter().map(Shape::Leaf).collect()))).collect(),
            names.iter().zip(&self.arrows).map(|(n, (_, r))| (n.clone(), r.clone())).collect(),
        )?;
        let mut ids = IndexMap::new();
        for a in g.arrows.iter() {
            let single = FreeArrow::generator(g, a);
            let name = by_term.get(&single).ok_or_else(|| Error::Missing(format!("single arrow {a}; bound too small")))?;
            ids.insert(a.clone(), (*name).clone());
        }
        let size = |a: &Atom| terms[a].size();
        Multicat::tabulate_within(graph, ids, size, |_| self.bound, |outer, beta| {
            let pieces: Vec<&FreeArrow> = beta.leaves().iter().map(|b| terms[*b]).collect();
            let gens: Vec<Atom> = pieces.iter().flat_map(|p| generators(p)).collect();
            let r = chain(g, gens, bottom(terms[outer]));
            by_term.get(&r).map(|n| (*n).clone())
        })
    }
}

fn bottom(a: &FreeArrow) -> Atom {
    match a {
        FreeArrow::Id(s) => s.clone(),
        FreeArrow::Node { inner, .. } => bottom(inner.leaves()[0]),
    }
}

fn chain(g: &MGraph, gens: Vec<Atom>, base: Atom) -> FreeArrow {
    gens.into_iter().rev().fold(FreeArrow::Id(base), |acc, gen| {
        let inner = Box::new(g.d(&gen).fmap(&mut |_| acc.clone()));
        FreeArrow::Node { gen, inner }
    })
}
