use std::process::{Command, Output};

use opetope_forge::batanin::{BTree, KCell};
use opetope_forge::multicat::Multicat;
use opetope_forge::opetopia::{Opetope, PdMorphism};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opetope-forge")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

#[test]
fn opetopes_of_dimension_three() {
    let v = json(&["opetopes", "--dim", "3", "--max-size", "3"]);
    let items = v.as_array().unwrap();
    assert_eq!(items.len(), 10);
    let parsed: Vec<Opetope> = items.iter().map(|i| Opetope::from_json(i).unwrap()).collect();
    let sizes: Vec<usize> = (1..=3).map(|s| parsed.iter().filter(|o| o.size() == s).count()).collect();
    assert_eq!(sizes, vec![2, 2, 6]);
}

#[test]
fn law_checks_set_the_exit_code() {
    let out = run(&["check", "monad", "--instance", "free-monoid", "--set-size", "2", "--bound", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
    let out = run(&["check", "cartesian", "--instance", "free-comm-monoid", "--map", "2to1", "--bound", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL: mu-naturality"));
    let out = run(&["check", "monad", "--instance", "corrupted-tree", "--bound", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["check", "operad", "--dim", "2", "--max-size", "3"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["opetopes", "--dimension", "2"]).status.code(), Some(2));
    assert_eq!(run(&["check", "monad", "--instance", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["btrees", "boundary", "--tree", "[0,[0]]"]).status.code(), Some(2));
    assert_eq!(run(&["render", "--json", "{\"opetope\":{\"dim\":1,\"payload\":\"*\"}}", "--format", "dot"]).status.code(), Some(2));
    assert_eq!(run(&["opetopes", "--format", "svg"]).status.code(), Some(2));
}

#[test]
fn renderings() {
    assert_eq!(stdout(&["render", "--json", "{\"ptree\":\"*\"}", "--format", "ascii"]).trim(), "*");
    let dot = stdout(&["render", "--json", "{\"ptree\":[\"*\",\"*\"]}", "--format", "dot"]);
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("[label=").count(), 3);
    let pic = stdout(&["render", "--json", "{\"btree\":[[0,0,0],[],[0]]}", "--format", "ascii"]);
    let rows: Vec<&str> = pic.lines().collect();
    assert_eq!(rows[2].matches('o').count(), 3);
    assert_eq!(rows.last().unwrap().trim(), "*");
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["opetopes", "--dim", "4", "--max-size", "4"][..],
        &["k", "generate", "--dim", "2", "--max-size", "3", "--bound", "2"],
        &["btrees", "enumerate", "--dim", "3", "--max-size", "4", "--format", "ascii"],
    ] {
        assert_eq!(stdout(args), stdout(args));
    }
}

#[test]
fn json_outputs_parse_back() {
    for t in json(&["btrees", "enumerate", "--dim", "2", "--max-size", "4"]).as_array().unwrap() {
        assert_eq!(BTree::from_json_at(2, t).unwrap().to_json(), *t);
    }
    let b = json(&["btrees", "boundary", "--tree", "[[0,0,0],[],[0]]"]);
    assert_eq!(BTree::from_json(&b).unwrap(), BTree::path(3));
    // the interchange square from a vertical pair of horizontal pairs
    let s = json(&["btrees", "subst", "--tree", "[[0,0]]", "--labels", "[0,0,[0,0],[0,0],[0,0],[[0],[0]],[[0],[0]]]"]);
    assert_eq!(s, serde_json::json!([[0, 0], [0, 0]]));
    let k = json(&["k", "generate", "--dim", "2", "--max-size", "3", "--bound", "2"]);
    for c in k["cells"].as_array().unwrap() {
        let term = KCell::from_json(&c["term"]).unwrap();
        assert_eq!(term.tree().to_json(), c["tree"]);
    }
    let homs = json(&["trees", "hom", "--dom", "[[],[]]", "--cod", "[\"*\",\"*\"]"]);
    for h in homs.as_array().unwrap() {
        assert_eq!(PdMorphism::from_json(h).unwrap().to_json(), *h);
    }
    let one = json(&["trees", "hom", "--dom", "\"*\"", "--cod", "[\"*\"]"]);
    assert_eq!(one.as_array().unwrap().len(), 1);
    let delta = json(&["trees", "hom", "--dim", "1", "--dom", "3", "--cod", "2"]);
    assert_eq!(delta.as_array().unwrap().len(), 4);
}

fn z2() -> Value {
    serde_json::json!({
        "monad": "identity",
        "objects": ["*"],
        "arrows": [{"id": "0", "dom": "*", "cod": "*"}, {"id": "1", "dom": "*", "cod": "*"}],
        "ids": {"*": "0"},
        "comp": [
            {"outer": "0", "inner": "0", "result": "0"}, {"outer": "0", "inner": "1", "result": "1"},
            {"outer": "1", "inner": "0", "result": "1"}, {"outer": "1", "inner": "1", "result": "0"}
        ]
    })
}

#[test]
fn multicategory_files() {
    let dir = std::env::temp_dir().join(format!("opetope-forge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("z2.json");
    std::fs::write(&path, z2().to_string()).unwrap();
    let p = path.to_str().unwrap();
    assert!(stdout(&["check", "multicat", "--input", p]).starts_with("PASS"));
    let plus = json(&["slice", "plus", "--input", p, "--bound", "3"]);
    let m = Multicat::from_json(&plus).unwrap();
    assert_eq!(m.to_json(), plus);

    let mut broken = z2();
    broken["comp"][1]["result"] = "0".into();
    std::fs::write(&path, broken.to_string()).unwrap();
    assert_eq!(run(&["check", "multicat", "--input", p]).status.code(), Some(1));

    // Z/2 acting on itself
    let alg = serde_json::json!({
        "multicat": z2(),
        "carrier": {"a": "*", "b": "*"},
        "action": [
            {"arrow": "0", "inputs": "a", "value": "a"}, {"arrow": "0", "inputs": "b", "value": "b"},
            {"arrow": "1", "inputs": "a", "value": "b"}, {"arrow": "1", "inputs": "b", "value": "a"}
        ]
    });
    std::fs::write(&path, alg.to_string()).unwrap();
    assert!(stdout(&["check", "algebra", "--input", p]).starts_with("PASS"));
    let mut bad = alg.clone();
    bad["action"][2]["value"] = "a".into();
    std::fs::write(&path, bad.to_string()).unwrap();
    assert_eq!(run(&["check", "algebra", "--input", p]).status.code(), Some(1));

    let out = dir.join("out.json");
    stdout(&["btrees", "boundary", "--tree", "[[0]]", "--out", out.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&out).unwrap().trim(), "[\n  0\n]");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn slicing_by_an_algebra() {
    let input = serde_json::json!({"d": z2(), "e": z2(), "f": {"f0": {"*": "*"}, "f1": {"0": "0", "1": "1"}}});
    let out = json(&["slice", "by-algebra", "--json", &input.to_string()]);
    assert_eq!(Multicat::from_json(&out).unwrap().to_json(), out);
}
