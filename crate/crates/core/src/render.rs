//! DOT and ASCII pictures of trees, opetopes and globular sets.

use std::fmt::Write as _;

use serde_json::Value;

use crate::batanin::{BTree, GlobSet};
use crate::error::{Error, Result};
use crate::opetopia::{Opetope, Pasting, PTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Dot,
    Ascii,
}

impl Format {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "dot" => Ok(Format::Dot),
            "ascii" => Ok(Format::Ascii),
            other => Err(Error::Unsupported(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Renderable {
    PTree(PTree),
    BTree(BTree),
    Opetope(Opetope),
    GlobSet(GlobSet),
}

impl Renderable {
    /// Read `{"ptree": …}`, `{"btree": …}`, `{"opetope": …}` or `{"globset": …}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let (kind, body) = v
            .as_object()
            .and_then(|o| o.iter().next())
            .ok_or_else(|| Error::Malformed("expected {kind: object}".into()))?;
        Ok(match kind.as_str() {
            "ptree" => Renderable::PTree(PTree::from_json(body)?),
            "btree" => Renderable::BTree(BTree::from_json(body)?),
            "opetope" => Renderable::Opetope(Opetope::from_json(body)?),
            "globset" => Renderable::GlobSet(GlobSet::from_json(body)?),
            other => return Err(Error::Unsupported(format!("cannot render `{other}`"))),
        })
    }

    pub fn to_json(&self) -> Value {
        match self {
            Renderable::PTree(t) => t.to_json(),
            Renderable::BTree(t) => t.to_json(),
            Renderable::Opetope(o) => o.to_json(),
            Renderable::GlobSet(g) => g.to_json(),
        }
    }
}

/// A labelled rooted tree, the common currency of both formats.
struct Outline {
    label: String,
    kids: Vec<Outline>,
}

impl Outline {
    fn leaf(label: &str) -> Self {
        Outline { label: label.into(), kids: Vec::new() }
    }

    fn ascii(&self) -> String {
        let mut out = self.label.clone();
        self.ascii_kids("", &mut out);
        out
    }

    fn ascii_kids(&self, indent: &str, out: &mut String) {
        for (i, k) in self.kids.iter().enumerate() {
            let last = i + 1 == self.kids.len();
            let _ = write!(out, "\n{indent}{}{}", if last { "└─ " } else { "├─ " }, k.label);
            k.ascii_kids(&format!("{indent}{}", if last { "   " } else { "│  " }), out);
        }
    }

    fn dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n");
        let mut next = 0;
        self.dot_into(&mut next, &mut out);
        out.push_str("}\n");
        out
    }

    fn dot_into(&self, next: &mut usize, out: &mut String) -> usize {
        let me = *next;
        *next += 1;
        let _ = writeln!(out, "  n{me} [label=\"{}\"];", self.label.replace('"', "\\\""));
        for k in &self.kids {
            let child = k.dot_into(next, out);
            let _ = writeln!(out, "  n{child} -> n{me};");
        }
        me
    }
}

fn ptree_outline(t: &PTree) -> Outline {
    match t {
        PTree::Edge => Outline::leaf("*"),
        PTree::Node(ch) => Outline { label: "o".into(), kids: ch.iter().map(ptree_outline).collect() },
    }
}

fn btree_outline(t: &BTree) -> Outline {
    fn go(t: &BTree, depth: usize) -> Outline {
        let label = if depth == 0 { "*".to_string() } else { "o".to_string() };
        Outline { label, kids: t.kids().iter().map(|k| go(k, depth + 1)).collect() }
    }
    go(t, 0)
}

fn pasting_outline(p: &Pasting) -> Outline {
    match p {
        Pasting::Unit(o) => Outline { label: "unit".into(), kids: vec![opetope_outline(o)] },
        Pasting::Node(o, ch) => {
            let mut kids = vec![opetope_outline(o)];
            kids.extend(ch.iter().map(pasting_outline));
            Outline { label: "node".into(), kids }
        }
    }
}

fn opetope_outline(o: &Opetope) -> Outline {
    match o {
        Opetope::Point => Outline::leaf("point"),
        Opetope::Arrow => Outline::leaf("arrow"),
        Opetope::Arity(k) => Outline { label: format!("arity {k}"), kids: (0..*k).map(|_| Outline::leaf("*")).collect() },
        Opetope::Paste { .. } => match o.as_tree() {
            Some(t) => ptree_outline(&t),
            None => match o {
                Opetope::Paste { dim, term } => {
                    Outline { label: format!("dim {dim}"), kids: vec![pasting_outline(term)] }
                }
                _ => unreachable!(),
            },
        },
    }
}

/// The tree drawn root-down: each node sits over the middle of its
/// children, and childless nodes take a column of their own.
fn btree_picture(t: &BTree) -> String {
    if t.stage() == 0 {
        return "*".into();
    }
    // rows[h] = (x, parent x) for nodes at height h
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); t.stage() + 1];
    fn place(t: &BTree, h: usize, next: &mut usize, rows: &mut Vec<Vec<(usize, usize)>>) -> usize {
        let xs: Vec<usize> = t.kids().iter().map(|k| place(k, h + 1, next, rows)).collect();
        let x = match (xs.first(), xs.last()) {
            (Some(a), Some(b)) => (a + b) / 2,
            _ => {
                *next += 4;
                *next - 4
            }
        };
        let start = rows[h + 1].len() - xs.len();
        for slot in &mut rows[h + 1][start..] {
            slot.1 = x;
        }
        rows[h].push((x, x));
        x
    }
    let mut next = 0;
    rows.push(Vec::new());
    place(t, 0, &mut next, &mut rows);
    rows.pop();
    let width = rows.iter().flatten().map(|(x, _)| x + 2).max().unwrap_or(1);
    let mut lines = Vec::new();
    for h in (0..rows.len()).rev() {
        if rows[h].is_empty() {
            continue;
        }
        let mut nodes = vec![' '; width];
        for (x, _) in &rows[h] {
            nodes[*x] = if h == 0 { '*' } else { 'o' };
        }
        lines.push(nodes.iter().collect::<String>().trim_end().to_string());
        if h > 0 {
            let mut edges = vec![' '; width];
            for (x, p) in &rows[h] {
                let (at, c) = match x.cmp(p) {
                    std::cmp::Ordering::Less => (x + 1, '\\'),
                    std::cmp::Ordering::Equal => (*x, '|'),
                    std::cmp::Ordering::Greater => (x - 1, '/'),
                };
                edges[at] = c;
            }
            lines.push(edges.iter().collect::<String>().trim_end().to_string());
        }
    }
    lines.join("\n")
}

fn globset_ascii(g: &GlobSet) -> String {
    let mut out = String::new();
    for (k, cells) in g.cells.iter().enumerate() {
        let _ = write!(out, "{k}:");
        for x in cells.iter() {
            if k == 0 {
                let _ = write!(out, " {x}");
            } else {
                let _ = write!(out, " {x}:{}→{}", g.s[k - 1].graph()[x], g.t[k - 1].graph()[x]);
            }
        }
        out.push('\n');
    }
    out.trim_end().to_string()
}

fn globset_dot(g: &GlobSet) -> String {
    let mut out = "digraph glob {\n".to_string();
    for (k, cells) in g.cells.iter().enumerate() {
        for x in cells.iter() {
            let _ = writeln!(out, "  \"{x}\" [label=\"{x}\", rank={k}];");
        }
    }
    for k in 0..g.n {
        for (x, y) in g.s[k].graph() {
            let _ = writeln!(out, "  \"{x}\" -> \"{y}\" [label=\"s\"];");
        }
        for (x, y) in g.t[k].graph() {
            let _ = writeln!(out, "  \"{x}\" -> \"{y}\" [label=\"t\"];");
        }
    }
    out.push_str("}\n");
    out
}

pub fn render(obj: &Renderable, format: Format) -> Result<String> {
    match (obj, format) {
        (_, Format::Json) => Ok(serde_json::to_string(&obj.to_json())?),
        (Renderable::PTree(t), Format::Ascii) => Ok(ptree_outline(t).ascii()),
        (Renderable::PTree(t), Format::Dot) => Ok(ptree_outline(t).dot("ptree")),
        (Renderable::BTree(t), Format::Ascii) => Ok(btree_picture(t)),
        (Renderable::BTree(t), Format::Dot) => Ok(btree_outline(t).dot("btree")),
        (Renderable::Opetope(o), Format::Ascii) => Ok(opetope_outline(o).ascii()),
        (Renderable::Opetope(o), Format::Dot) if o.dim() >= 2 => Ok(opetope_outline(o).dot("opetope")),
        (Renderable::Opetope(o), Format::Dot) => Err(Error::Unsupported(format!("no DOT picture of a {}-opetope", o.dim()))),
        (Renderable::GlobSet(g), Format::Ascii) => Ok(globset_ascii(g)),
        (Renderable::GlobSet(g), Format::Dot) => Ok(globset_dot(g)),
    }
}
