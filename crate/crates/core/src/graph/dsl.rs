//! Text format for mixed graphs.
//!
//! ```text
//! # M-bias
//! latent U1; latent U2
//! U1 -> A; U1 -> C2
//! U2 -> C2; U2 -> Y
//! A -> Y
//! ```
//!
//! Statements are separated by `;` or newlines and `#` starts a comment that
//! runs to the end of the line. A statement is one of `X -> Y`, `X <-> Y`,
//! `X -- Y`, `latent X`, `deterministic X` or a bare `X` (plain node
//! declaration). Names match `[A-Za-z_][A-Za-z0-9_]*`.

use std::collections::BTreeSet;

use super::{EdgeKind, GraphError, MixedGraph};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Arrow(EdgeKind),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

#[derive(Debug)]
enum Stmt {
    Node(String),
    Latent(String),
    Deterministic(String),
    Edge(String, String, EdgeKind),
}

fn syntax(line: usize, col: usize, expected: &str) -> GraphError {
    GraphError::SyntaxError { line, col, expected: expected.to_string() }
}

/// Splits the input into statements, each a list of tokens.
fn lex(text: &str) -> Result<Vec<Vec<Spanned>>, GraphError> {
    let mut stmts = Vec::new();
    let mut current = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let chars: Vec<(usize, char)> = content.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            let col = i + 1;
            if c == ';' {
                if !current.is_empty() {
                    stmts.push(std::mem::take(&mut current));
                }
                i += 1;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                current.push(Spanned { tok: Tok::Name(name), line, col });
            } else {
                let rest: String = chars[i..].iter().map(|&(_, c)| c).collect();
                let (kind, len) = if rest.starts_with("<->") {
                    (EdgeKind::Bidirected, 3)
                } else if rest.starts_with("->") {
                    (EdgeKind::Directed, 2)
                } else if rest.starts_with("--") {
                    (EdgeKind::Undirected, 2)
                } else {
                    return Err(syntax(line, col, "a node name, `->`, `<->`, `--`, `;` or `#`"));
                };
                current.push(Spanned { tok: Tok::Arrow(kind), line, col });
                i += len;
            }
        }
        if !current.is_empty() {
            stmts.push(std::mem::take(&mut current));
        }
    }
    Ok(stmts)
}

fn parse_stmt(toks: &[Spanned]) -> Result<Stmt, GraphError> {
    let name_at = |i: usize, what: &str| -> Result<String, GraphError> {
        match toks.get(i) {
            Some(Spanned { tok: Tok::Name(n), .. }) => Ok(n.clone()),
            Some(t) => Err(syntax(t.line, t.col, what)),
            None => {
                let last = toks.last().expect("statement non-empty");
                Err(syntax(last.line, last.col + 1, what))
            }
        }
    };
    let first = name_at(0, "a node name or declaration")?;
    match toks.get(1) {
        None => Ok(Stmt::Node(first)),
        Some(Spanned { tok: Tok::Name(n), line, col }) => {
            let decl = match first.as_str() {
                "latent" => Stmt::Latent(n.clone()),
                "deterministic" => Stmt::Deterministic(n.clone()),
                _ => return Err(syntax(*line, *col, "`->`, `<->` or `--`")),
            };
            if let Some(extra) = toks.get(2) {
                return Err(syntax(extra.line, extra.col, "end of statement"));
            }
            Ok(decl)
        }
        Some(Spanned { tok: Tok::Arrow(kind), .. }) => {
            let head = name_at(2, "a node name")?;
            if let Some(extra) = toks.get(3) {
                return Err(syntax(extra.line, extra.col, "end of statement"));
            }
            Ok(Stmt::Edge(first, head, *kind))
        }
    }
}

fn parse_with(text: &str, strict: bool) -> Result<MixedGraph, GraphError> {
    let stmts = lex(text)?.iter().map(|s| parse_stmt(s)).collect::<Result<Vec<_>, _>>()?;

    let declared: BTreeSet<&str> = stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Node(n) | Stmt::Latent(n) | Stmt::Deterministic(n) => Some(n.as_str()),
            Stmt::Edge(..) => None,
        })
        .collect();

    let mut g = MixedGraph::new();
    for stmt in &stmts {
        match stmt {
            Stmt::Node(n) => {
                g.ensure_node(n);
            }
            Stmt::Latent(n) => {
                let v = g.ensure_node(n);
                g.set_latent(v, true);
            }
            Stmt::Deterministic(n) => {
                let v = g.ensure_node(n);
                g.set_deterministic(v, true);
            }
            Stmt::Edge(a, b, kind) => {
                if strict {
                    for n in [a, b] {
                        if !declared.contains(n.as_str()) {
                            return Err(GraphError::UnknownNode(n.clone()));
                        }
                    }
                }
                let t = g.ensure_node(a);
                let h = g.ensure_node(b);
                g.add_edge(t, h, *kind)?;
            }
        }
    }
    Ok(g)
}

/// Parses the graph DSL; nodes first seen in an edge are created as
/// observed, non-deterministic nodes.
pub fn parse_graph(text: &str) -> Result<MixedGraph, GraphError> {
    parse_with(text, false)
}

/// Like [`parse_graph`] but every node used in an edge must be declared.
pub fn parse_graph_strict(text: &str) -> Result<MixedGraph, GraphError> {
    parse_with(text, true)
}

/// Canonical text: node declarations sorted by name, then edges sorted
/// lexicographically. Symmetric edges list the smaller name first.
pub fn render_graph(g: &MixedGraph) -> String {
    let mut nodes: Vec<_> = g.node_ids().collect();
    nodes.sort_by(|&a, &b| g.name(a).cmp(g.name(b)));
    let mut out = String::new();
    for v in nodes {
        let node = g.node(v);
        if node.latent {
            out.push_str(&format!("latent {};\n", node.name));
        }
        if node.deterministic {
            out.push_str(&format!("deterministic {};\n", node.name));
        }
        if !node.latent && !node.deterministic {
            out.push_str(&format!("{};\n", node.name));
        }
    }
    let mut edges: Vec<String> = g
        .edges()
        .map(|e| {
            let (a, b) = (g.name(e.tail), g.name(e.head));
            let (a, b) = if e.kind.is_symmetric() && b < a { (b, a) } else { (a, b) };
            format!("{} {} {};\n", a, e.kind.token(), b)
        })
        .collect();
    edges.sort();
    for e in edges {
        out.push_str(&e);
    }
    out
}
