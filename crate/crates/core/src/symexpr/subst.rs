use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{normalize, Expr, Node, OpaqueApp, PartialAtom, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstError {
    #[error("cyclic substitution: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("cannot substitute a non-symbol for argument `{arg}` of opaque function `{function}`")]
    OpaqueArgument { function: String, arg: String },
}

/// Simultaneous substitution followed by normalization. Symbols are matched
/// by name.
pub fn substitute(e: &Expr, bindings: &BTreeMap<Symbol, Expr>) -> Result<Expr, SubstError> {
    let by_name: BTreeMap<&str, &Expr> = bindings.iter().map(|(k, v)| (k.name(), v)).collect();
    check_cycles(&by_name)?;
    Ok(normalize(&replace(e, &by_name)?))
}

fn check_cycles(map: &BTreeMap<&str, &Expr>) -> Result<(), SubstError> {
    let deps: BTreeMap<&str, BTreeSet<String>> = map
        .iter()
        .map(|(k, v)| (*k, v.symbols().into_iter().map(|s| s.name().to_string()).collect()))
        .collect();

    fn visit(
        node: &str,
        deps: &BTreeMap<&str, BTreeSet<String>>,
        path: &mut Vec<String>,
        done: &mut BTreeSet<String>,
    ) -> Result<(), SubstError> {
        if let Some(pos) = path.iter().position(|p| p == node) {
            let mut cycle = path[pos..].to_vec();
            cycle.push(node.to_string());
            return Err(SubstError::Cycle(cycle));
        }
        if done.contains(node) {
            return Ok(());
        }
        path.push(node.to_string());
        if let Some(next) = deps.get(node) {
            for n in next {
                if deps.contains_key(n.as_str()) {
                    visit(n, deps, path, done)?;
                }
            }
        }
        path.pop();
        done.insert(node.to_string());
        Ok(())
    }

    let mut done = BTreeSet::new();
    for k in deps.keys() {
        visit(k, &deps, &mut Vec::new(), &mut done)?;
    }
    Ok(())
}

fn rename_args(app: &OpaqueApp, map: &BTreeMap<&str, &Expr>) -> Result<OpaqueApp, SubstError> {
    let args = app
        .args
        .iter()
        .map(|a| match map.get(a.name()) {
            None => Ok(a.clone()),
            Some(v) => match v.node() {
                Node::Sym(s) => Ok(s.clone()),
                _ => Err(SubstError::OpaqueArgument {
                    function: app.sig.name.name().to_string(),
                    arg: a.name().to_string(),
                }),
            },
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OpaqueApp { sig: app.sig.clone(), args })
}

fn replace(e: &Expr, map: &BTreeMap<&str, &Expr>) -> Result<Expr, SubstError> {
    Ok(match e.node() {
        Node::Const(_) | Node::Rep(_) => e.clone(),
        Node::Sym(s) => map.get(s.name()).map(|v| (*v).clone()).unwrap_or_else(|| e.clone()),
        Node::Sum(xs) => Expr::sum(xs.iter().map(|x| replace(x, map)).collect::<Result<_, _>>()?),
        Node::Product(xs) => {
            Expr::product(xs.iter().map(|x| replace(x, map)).collect::<Result<_, _>>()?)
        }
        Node::Pow(b, r) => replace(b, map)?.pow(*r),
        Node::Apply(app) => Expr::from_node(Node::Apply(rename_args(app, map)?)),
        Node::Partial(p) => Expr::partial(PartialAtom {
            app: rename_args(&p.app, map)?,
            orders: p.orders.clone(),
        }),
    })
}
