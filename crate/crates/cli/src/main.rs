use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use opetope_forge::batanin::{self, BTree, KBounds};
use opetope_forge::finbase::{FinMap, FinSet};
use opetope_forge::monadkit::{check_cartesian_with, check_monad_laws_with, MonadInstance};
use opetope_forge::multicat::{check_multicategory_with, AlgebraStr, MultiMap, Multicat};
use opetope_forge::opetopia::{self, Opetope, PTree, PdMorphism};
use opetope_forge::render::{render, Format, Renderable};
use opetope_forge::{Error, Exec, Report};

/// Cartesian monads, multicategories, opetopes and Batanin operads at desk scale.
#[derive(Parser)]
#[command(name = "opetope-forge", version)]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Output format: json, dot or ascii.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Limits {
    /// Largest size to enumerate.
    #[arg(long, default_value_t = 4)]
    max_size: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Size of generated elements, or generator weight for `k`.
    #[arg(long, default_value_t = 4)]
    bound: usize,
}

#[derive(Args, Clone)]
struct Input {
    /// JSON input file; `-` reads stdin.
    #[arg(long)]
    input: Option<String>,
    /// Inline JSON input.
    #[arg(long)]
    json: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate n-opetopes of bounded size.
    Opetopes {
        #[command(flatten)]
        limits: Limits,
    },
    /// Trees of the opetope tower and the category of trees.
    Trees {
        #[command(subcommand)]
        op: TreesOp,
    },
    /// Batanin trees.
    Btrees {
        #[command(subcommand)]
        op: BtreesOp,
    },
    /// Law checks; exit 1 when a law fails.
    Check {
        #[command(subcommand)]
        op: CheckOp,
    },
    /// Bounded fragments of the initial operad with contraction.
    K {
        #[command(subcommand)]
        op: KOp,
    },
    /// Slice multicategories.
    Slice {
        #[command(subcommand)]
        op: SliceOp,
    },
    /// Draw a tree, opetope or globular set given as {"kind": value}.
    Render {
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Subcommand)]
enum TreesOp {
    Enumerate {
        #[command(flatten)]
        limits: Limits,
    },
    Graft {
        #[arg(long)]
        base: String,
        /// JSON array of trees, one per leaf.
        #[arg(long)]
        parts: String,
    },
    /// Morphisms of the category of trees (or of Δ with `--dim 1`).
    Hom {
        #[arg(long)]
        dom: String,
        #[arg(long)]
        cod: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// `g ∘ f` for morphisms given as JSON.
    Compose {
        #[arg(long)]
        g: String,
        #[arg(long)]
        f: String,
    },
}

#[derive(Subcommand)]
enum BtreesOp {
    Enumerate {
        #[command(flatten)]
        limits: Limits,
    },
    Boundary {
        #[arg(long)]
        tree: String,
    },
    /// The globular set of formal cells, listing the cell order used by `subst`.
    Glob {
        #[arg(long)]
        tree: String,
    },
    /// Substitute trees into the cells of a tree.
    Subst {
        #[arg(long)]
        tree: String,
        /// JSON array of trees, one per cell.
        #[arg(long)]
        labels: String,
    },
}

#[derive(Subcommand)]
enum CheckOp {
    /// Unit and associativity laws of a monad on a set of the given size.
    Monad {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 2)]
        set_size: usize,
        #[arg(long, default_value_t = 4)]
        bound: usize,
    },
    /// Naturality squares are pullbacks and the functor preserves pullbacks, along one map.
    Cartesian {
        #[arg(long)]
        instance: String,
        /// `AtoB`: the monotone map from an A-element set onto a B-element set.
        #[arg(long, default_value = "2to1")]
        map: String,
        #[arg(long, default_value_t = 4)]
        bound: usize,
    },
    /// Multicategory laws of a JSON multicategory.
    Multicat {
        #[command(flatten)]
        input: Input,
    },
    /// Operad laws on the terminal operad, a `K` fragment or a `K_n` fragment.
    Operad {
        #[arg(long, default_value = "terminal")]
        instance: String,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        truncate: Option<usize>,
    },
    /// Algebra laws for {"multicat", "carrier", "action"}.
    Algebra {
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Subcommand)]
enum KOp {
    Generate {
        #[command(flatten)]
        gen: KArgs,
    },
    /// Cells per tree.
    Count {
        #[command(flatten)]
        gen: KArgs,
    },
}

#[derive(Args)]
struct KArgs {
    #[command(flatten)]
    limits: Limits,
    /// Build `K_n` instead of `K`.
    #[arg(long)]
    truncate: Option<usize>,
    /// JSON array of trees allowed to carry generators.
    #[arg(long)]
    generator_trees: Option<String>,
}

#[derive(Subcommand)]
enum SliceOp {
    /// The multicategory of a category's free structured arrows, unary part.
    Plus {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 4)]
        bound: usize,
    },
    /// Slice by an algebra given as {"d", "e", "f": {"f0", "f1"}}.
    ByAlgebra {
        #[command(flatten)]
        input: Input,
    },
}

enum Failure {
    Usage(String),
    Law(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Out = Result<String, Failure>;

fn parse(s: &str) -> Result<Value, Failure> {
    serde_json::from_str(s).map_err(|e| Failure::Usage(format!("bad JSON: {e}")))
}

fn read_input(i: &Input) -> Result<Value, Failure> {
    match (&i.input, &i.json) {
        (_, Some(s)) => parse(s),
        (Some(p), None) if p == "-" => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| Failure::Usage(e.to_string()))?;
            parse(&s)
        }
        (Some(p), None) => parse(&fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{p}: {e}")))?),
        (None, None) => Err(Failure::Usage("give --input FILE or --json TEXT".into())),
    }
}

fn verdict(r: Report) -> Out {
    if r.passed() {
        Ok(r.to_string())
    } else {
        Err(Failure::Law(r.to_string()))
    }
}

fn json_out(v: Value) -> Out {
    Ok(serde_json::to_string_pretty(&v).expect("values serialize"))
}

fn pictures(items: Vec<Renderable>, format: Format) -> Out {
    if format == Format::Json {
        return json_out(Value::Array(items.iter().map(Renderable::to_json).collect()));
    }
    let parts = items.iter().map(|r| render(r, format)).collect::<Result<Vec<_>, _>>()?;
    Ok(parts.join("\n\n"))
}

fn btree(s: &str) -> Result<BTree, Failure> {
    Ok(BTree::from_json(&parse(s)?)?)
}

fn ptree(s: &str) -> Result<PTree, Failure> {
    Ok(PTree::from_json(&parse(s)?)?)
}

fn k_bounds(k: &KArgs) -> Result<KBounds, Failure> {
    let mut b = KBounds::new(k.limits.dim, k.limits.max_size, k.limits.bound);
    if let Some(ts) = &k.generator_trees {
        let items = parse(ts)?;
        let items = items.as_array().ok_or_else(|| Failure::Usage("--generator-trees takes an array".into()))?;
        b.generator_trees = Some(items.iter().map(BTree::from_json).collect::<Result<_, _>>()?);
    }
    Ok(b)
}

fn k_fragment(k: &KArgs) -> Result<batanin::KFragment, Failure> {
    let b = k_bounds(k)?;
    Ok(match k.truncate {
        Some(n) => batanin::generate_k_n(n, &b)?,
        None => batanin::generate_k(&b)?,
    })
}

fn set_map(text: &str) -> Result<FinMap, Failure> {
    let (a, b) = text.split_once("to").ok_or_else(|| Failure::Usage(format!("map `{text}` is not AtoB")))?;
    let (a, b): (usize, usize) = (a.parse().map_err(|_| Failure::Usage(text.into()))?, b.parse().map_err(|_| Failure::Usage(text.into()))?);
    if b == 0 && a > 0 {
        return Err(Failure::Usage("no map into the empty set".into()));
    }
    let (x, y) = (FinSet::numbered("x", a), FinSet::numbered("y", b));
    let ys = y.atoms();
    Ok(FinMap::from_fn(x.clone(), y, |s| {
        let i: usize = x.index_of(s).expect("element");
        ys[i.min(b - 1)].clone()
    })?)
}

fn multimap(v: &Value, src: &Multicat, dst: &Multicat) -> Result<MultiMap, Failure> {
    let graph = |k: &str| -> Result<indexmap::IndexMap<String, String>, Failure> {
        serde_json::from_value(v.get(k).cloned().unwrap_or(Value::Null)).map_err(|e| Failure::Usage(format!("{k}: {e}")))
    };
    Ok(MultiMap {
        f0: FinMap::new(src.graph.objects.clone(), dst.graph.objects.clone(), graph("f0")?)?,
        f1: FinMap::new(src.graph.arrows.clone(), dst.graph.arrows.clone(), graph("f1")?)?,
    })
}

fn run(cli: &Cli) -> Out {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let format = Format::from_name(&cli.format)?;
    match &cli.cmd {
        Cmd::Opetopes { limits } => {
            pictures(opetopia::opetopes(limits.dim, limits.max_size).into_iter().map(Renderable::Opetope).collect(), format)
        }
        Cmd::Trees { op } => match op {
            TreesOp::Enumerate { limits } => pictures(
                opetopia::opetopes(3, limits.max_size).into_iter().filter_map(|o| o.as_tree()).map(Renderable::PTree).collect(),
                format,
            ),
            TreesOp::Graft { base, parts } => {
                let parts = parse(parts)?;
                let parts = parts.as_array().ok_or_else(|| Failure::Usage("--parts takes an array".into()))?;
                let parts = parts.iter().map(PTree::from_json).collect::<Result<Vec<_>, _>>()?;
                pictures(vec![Renderable::PTree(opetopia::graft(&ptree(base)?, &parts)?)], format).map(unwrap_single)
            }
            TreesOp::Hom { dom, cod, dim } => {
                let obj = |s: &str| -> Result<Opetope, Failure> {
                    let v = parse(s)?;
                    Ok(match (*dim, v.as_u64()) {
                        (1, Some(k)) => Opetope::Arity(k as usize),
                        _ => Opetope::tree(&PTree::from_json(&v)?),
                    })
                };
                let homs = opetopia::pd_hom(*dim, &obj(dom)?, &obj(cod)?)?;
                json_out(Value::Array(homs.iter().map(PdMorphism::to_json).collect()))
            }
            TreesOp::Compose { g, f } => {
                let (g, f) = (PdMorphism::from_json(&parse(g)?)?, PdMorphism::from_json(&parse(f)?)?);
                json_out(opetopia::pd_compose(&g, &f)?.to_json())
            }
        },
        Cmd::Btrees { op } => match op {
            BtreesOp::Enumerate { limits } => {
                pictures(batanin::trees(limits.dim, limits.max_size).into_iter().map(Renderable::BTree).collect(), format)
            }
            BtreesOp::Boundary { tree } => {
                pictures(vec![Renderable::BTree(btree(tree)?.boundary()?)], format).map(unwrap_single)
            }
            BtreesOp::Glob { tree } => pictures(vec![Renderable::GlobSet(batanin::tau_hat(&btree(tree)?))], format).map(unwrap_single),
            BtreesOp::Subst { tree, labels } => {
                let tau = btree(tree)?;
                let cells = tau.cells();
                let ls = parse(labels)?;
                let ls = ls.as_array().ok_or_else(|| Failure::Usage("--labels takes an array".into()))?;
                if ls.len() != cells.len() {
                    return Err(Failure::Usage(format!("{} cells need {} labels", cells.len(), cells.len())));
                }
                let labels = cells
                    .iter()
                    .zip(ls)
                    .map(|(c, l)| BTree::from_json_at(batanin::cell_dim(c), l))
                    .collect::<Result<Vec<_>, _>>()?;
                let sub = batanin::btree_substitute(&tau, &labels)?;
                pictures(vec![Renderable::BTree(sub.tree)], format).map(unwrap_single)
            }
        },
        Cmd::Check { op } => match op {
            CheckOp::Monad { instance, set_size, bound } => {
                let m = MonadInstance::from_name(instance)?;
                verdict(check_monad_laws_with(exec, m, &FinSet::numbered("x", *set_size), *bound))
            }
            CheckOp::Cartesian { instance, map, bound } => {
                let m = MonadInstance::from_name(instance)?;
                verdict(check_cartesian_with(exec, m, &set_map(map)?, *bound))
            }
            CheckOp::Multicat { input } => verdict(check_multicategory_with(exec, &Multicat::from_json(&read_input(input)?)?)),
            CheckOp::Operad { instance, limits, truncate } => {
                let b = KBounds::new(limits.dim, limits.max_size, limits.bound);
                match instance.as_str() {
                    "terminal" => verdict(batanin::check_operad(exec, &batanin::terminal_operad(limits.dim, limits.max_size))),
                    "k" => {
                        let k = match truncate {
                            Some(n) => batanin::generate_k_n(*n, &b)?,
                            None => batanin::generate_k(&b)?,
                        };
                        let mut r = batanin::check_operad(exec, &k);
                        r.merge(batanin::check_contraction(&k.collection, &k.contraction));
                        verdict(r)
                    }
                    other => Err(Failure::Usage(format!("unknown operad `{other}`; use terminal or k"))),
                }
            }
            CheckOp::Algebra { input } => {
                let v = read_input(input)?;
                let m = Multicat::from_json(&v["multicat"])?;
                let carrier: indexmap::IndexMap<String, String> =
                    serde_json::from_value(v["carrier"].clone()).map_err(|e| Failure::Usage(format!("carrier: {e}")))?;
                let total = FinSet::new(carrier.keys().cloned())?;
                let proj = FinMap::new(total, m.graph.objects.clone(), carrier)?;
                let mut action = std::collections::HashMap::new();
                for e in v["action"].as_array().ok_or_else(|| Failure::Usage("action takes an array".into()))? {
                    let xi = m.monad().from_json(&e["inputs"])?;
                    let a = e["arrow"].as_str().unwrap_or_default().to_string();
                    let out = e["value"].as_str().unwrap_or_default().to_string();
                    action.insert((xi, a), out);
                }
                match AlgebraStr::new(&m, opetope_forge::finbase::SliceObj::new(proj), |xi, a| action.get(&(xi.clone(), a.clone())).cloned()) {
                    Ok(_) => Ok("PASS".into()),
                    Err(Error::Law(w)) | Err(Error::NotTotal(w)) => Err(Failure::Law(format!("FAIL: {w}"))),
                    Err(e) => Err(e.into()),
                }
            }
        },
        Cmd::K { op } => match op {
            KOp::Generate { gen } => json_out(k_fragment(gen)?.to_json()),
            KOp::Count { gen } => {
                let k = k_fragment(gen)?;
                let rows: Vec<Value> = k
                    .collection
                    .fibres
                    .iter()
                    .filter(|(_, v)| !v.is_empty())
                    .map(|(t, v)| json!({"stage": t.stage(), "tree": t.to_json(), "count": v.len()}))
                    .collect();
                json_out(Value::Array(rows))
            }
        },
        Cmd::Slice { op } => match op {
            SliceOp::Plus { input, bound } => {
                let c = Multicat::from_json(&read_input(input)?)?;
                json_out(opetopia::slice_plus(&c, *bound).to_multicat()?.to_json())
            }
            SliceOp::ByAlgebra { input } => {
                let v = read_input(input)?;
                let (d, e) = (Multicat::from_json(&v["d"])?, Multicat::from_json(&v["e"])?);
                let f = multimap(&v["f"], &e, &d)?;
                json_out(opetopia::slice_by_algebra(&d, &e, &f)?.multicat.to_json())
            }
        },
        Cmd::Render { input } => Ok(render(&Renderable::from_json(&read_input(input)?)?, format)?),
    }
}

/// Single results print as the object itself rather than a one-element list.
fn unwrap_single(s: String) -> String {
    match serde_json::from_str::<Value>(&s) {
        Ok(Value::Array(mut items)) if items.len() == 1 => serde_json::to_string_pretty(&items.remove(0)).expect("values serialize"),
        _ => s,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (text, code) = match run(&cli) {
        Ok(s) => (s, 0),
        Err(Failure::Law(s)) => (s, 1),
        Err(Failure::Usage(s)) => {
            eprintln!("error: {s}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(p) => fs::write(p, format!("{text}\n")),
        None => writeln!(io::stdout(), "{text}"),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
