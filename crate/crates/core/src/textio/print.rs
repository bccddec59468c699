//! Text, JSON and LaTeX renderings of canonical expressions.

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::scalar::{fmt_ratio, Scalar};
use crate::symexpr::poly::{Base, Factor, Monomial, Poly};
use crate::symexpr::{normalize, Expr, Node, OpaqueApp, PartialAtom};

/// Output format for expressions and operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Latex,
}

pub fn print_expr(e: &Expr, format: Format) -> String {
    match format {
        Format::Text => print_text(e),
        Format::Json => expr_json(e).to_string(),
        Format::Latex => print_latex(e),
    }
}

/// Re-parsable text form of the canonical expression.
pub fn print_text(e: &Expr) -> String {
    poly_text(&Poly::from_expr(e))
}

fn poly_text(p: &Poly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (m, c)) in p.terms.iter().enumerate() {
        let (neg, body) = term_text(c, m);
        match (idx, neg) {
            (0, true) => {
                out.push('-');
                out.push_str(&body);
            }
            (0, false) => out.push_str(&body),
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&body);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&body);
            }
        }
    }
    out
}

struct Coeff {
    neg: bool,
    num: Option<String>,
    den: Option<String>,
}

fn split_coeff(c: &Scalar, imag_unit: &str) -> Coeff {
    let ratio_parts = |r: &num_rational::BigRational| {
        let n = r.numer().abs();
        let num = if n.is_one() { None } else { Some(n.to_string()) };
        let den = if r.denom().is_one() { None } else { Some(r.denom().to_string()) };
        (num, den)
    };
    if c.im.is_zero() {
        let (num, den) = ratio_parts(&c.re);
        Coeff { neg: c.re.is_negative(), num, den }
    } else if c.re.is_zero() {
        let (num, den) = ratio_parts(&c.im);
        let num = Some(match num {
            Some(n) => format!("{n}*{imag_unit}"),
            None => imag_unit.to_string(),
        });
        Coeff { neg: c.im.is_negative(), num, den }
    } else {
        Coeff { neg: false, num: Some(c.to_string()), den: None }
    }
}

/// Two factors share a noncommuting class, so their order must survive.
fn order_matters(m: &Monomial) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    m.0.iter().any(|f| f.base.classes().into_iter().any(|c| !seen.insert(c)))
}

fn term_text(c: &Scalar, m: &Monomial) -> (bool, String) {
    let coeff = split_coeff(c, "i");
    if order_matters(m) {
        let mut items: Vec<String> = coeff.num.into_iter().collect();
        for f in &m.0 {
            if f.exp.is_negative() && f.exp.is_integer() {
                let (t, atomic) = base_text(&f.base);
                let t = if atomic { t } else { format!("({t})") };
                items.push(format!("{t}^({})", f.exp.to_integer()));
            } else {
                items.push(factor_text(&f.base, f.exp));
            }
        }
        let mut body = items.join("*");
        if let Some(d) = coeff.den {
            body = format!("{body}/{d}");
        }
        return (coeff.neg, body);
    }
    let mut atoms = Vec::new();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for f in &m.0 {
        let positive_int = f.exp.is_integer() && f.exp.is_positive();
        if f.base.is_function_atom() && positive_int {
            atoms.push(factor_text(&f.base, f.exp));
        } else if f.exp.is_positive() {
            num.push(factor_text(&f.base, f.exp));
        } else {
            den.push(factor_text(&f.base, -f.exp));
        }
    }
    let mut num_items: Vec<String> = coeff.num.into_iter().collect();
    num_items.extend(num);
    let mut den_items: Vec<String> = coeff.den.into_iter().collect();
    den_items.extend(den);

    let rest_trivial = num_items.is_empty() && den_items.is_empty();
    let rest = if rest_trivial {
        String::new()
    } else {
        let n = if num_items.is_empty() { "1".to_string() } else { num_items.join("*") };
        match den_items.len() {
            0 => n,
            1 => format!("{n}/{}", den_items[0]),
            _ => format!("{n}/({})", den_items.join("*")),
        }
    };
    let body = if atoms.is_empty() {
        if rest_trivial {
            "1".to_string()
        } else {
            rest
        }
    } else {
        let a = atoms.join("*");
        if rest_trivial {
            a
        } else if num_items.len() == 1 && den_items.is_empty() {
            format!("{a}*{rest}")
        } else {
            format!("{a}*({rest})")
        }
    };
    (coeff.neg, body)
}

fn exp_text(r: Rational64) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("({}/{})", r.numer(), r.denom())
    }
}

fn base_text(b: &Base) -> (String, bool) {
    match b {
        Base::Sym(s) => (s.name().to_string(), true),
        Base::Opaque(app) => (app_text(app), true),
        Base::Partial(p) => (partial_text(p), true),
        Base::Rep(r) => (format!("R[{},{}]", r.dependent, r.independent), true),
        Base::Compound(e) => {
            let t = print_text(e);
            let atomic = match e.node() {
                Node::Const(c) => c.is_real() && !c.re.is_negative() && c.re.is_integer(),
                _ => false,
            };
            (t, atomic)
        }
    }
}

fn factor_text(b: &Base, exp: Rational64) -> String {
    let (t, atomic) = base_text(b);
    if exp.is_one() {
        return if atomic { t } else { format!("({t})") };
    }
    if exp == Rational64::new(1, 2) {
        return format!("sqrt({t})");
    }
    let t = if atomic { t } else { format!("({t})") };
    format!("{t}^{}", exp_text(exp))
}

fn app_text(app: &OpaqueApp) -> String {
    if app.uses_default_args() {
        app.sig.name.name().to_string()
    } else {
        let args: Vec<&str> = app.args.iter().map(|a| a.name()).collect();
        format!("{}({})", app.sig.name, args.join(","))
    }
}

fn partial_text(p: &PartialAtom) -> String {
    let mut vars = Vec::new();
    for (param, order) in p.index() {
        for _ in 0..order {
            vars.push(param.name());
        }
    }
    format!("D[{},{}]", app_text(&p.app), vars.join(","))
}

/// JSON tree of the canonical expression with one tag per node.
pub fn expr_json(e: &Expr) -> Value {
    node_json(&normalize(e))
}

fn scalar_json(c: &Scalar) -> Value {
    json!({"re": fmt_ratio(&c.re), "im": fmt_ratio(&c.im)})
}

fn node_json(e: &Expr) -> Value {
    match e.node() {
        Node::Const(c) => json!({ "const": scalar_json(c) }),
        Node::Sym(s) => json!({ "sym": s.name() }),
        Node::Sum(xs) => json!({ "sum": xs.iter().map(node_json).collect::<Vec<_>>() }),
        Node::Product(xs) => json!({ "product": xs.iter().map(node_json).collect::<Vec<_>>() }),
        Node::Pow(b, r) => json!({ "pow": { "base": node_json(b), "exp": r.to_string() } }),
        Node::Apply(app) => json!({ "apply": {
            "fn": app.sig.name.name(),
            "args": app.args.iter().map(|a| a.name()).collect::<Vec<_>>(),
        }}),
        Node::Partial(p) => json!({ "partial": {
            "fn": p.app.sig.name.name(),
            "args": p.app.args.iter().map(|a| a.name()).collect::<Vec<_>>(),
            "wrt": p.index().map(|(s, o)| json!([s.name(), o])).collect::<Vec<_>>(),
        }}),
        Node::Rep(r) => json!({ "rep": {
            "dependent": r.dependent.name(),
            "independent": r.independent.name(),
        }}),
    }
}

/// Presentation-only LaTeX.
pub fn print_latex(e: &Expr) -> String {
    let p = Poly::from_expr(e);
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (m, c)) in p.terms.iter().enumerate() {
        let coeff = split_coeff(c, "i");
        let mut num: Vec<String> = coeff.num.into_iter().collect();
        let mut den: Vec<String> = coeff.den.into_iter().collect();
        for f in &m.0 {
            if f.exp.is_positive() {
                num.push(latex_factor(f, f.exp));
            } else {
                den.push(latex_factor(f, -f.exp));
            }
        }
        let body = match (num.is_empty(), den.is_empty()) {
            (true, true) => "1".to_string(),
            (_, true) => num.join(" "),
            (n, false) => format!(
                "\\frac{{{}}}{{{}}}",
                if n { "1".to_string() } else { num.join(" ") },
                den.join(" ")
            ),
        };
        match (idx, coeff.neg) {
            (0, true) => out.push_str(&format!("-{body}")),
            (0, false) => out.push_str(&body),
            (_, true) => out.push_str(&format!(" - {body}")),
            (_, false) => out.push_str(&format!(" + {body}")),
        }
    }
    out
}

fn latex_factor(f: &Factor, exp: Rational64) -> String {
    let base = match &f.base {
        Base::Sym(s) => s.name().to_string(),
        Base::Opaque(app) => app_text(app),
        Base::Rep(r) => format!("\\frac{{\\partial {}}}{{\\partial {}}}", r.dependent, r.independent),
        Base::Partial(p) => {
            let n = p.total_order();
            let head = if n == 1 { "\\partial".to_string() } else { format!("\\partial^{n}") };
            let vars: Vec<String> = p
                .index()
                .map(|(s, o)| {
                    if o == 1 {
                        format!("\\partial {}", s.name())
                    } else {
                        format!("\\partial {}^{o}", s.name())
                    }
                })
                .collect();
            format!("\\frac{{{head} {}}}{{{}}}", p.app.sig.name, vars.join(" "))
        }
        Base::Compound(e) => {
            if exp == Rational64::new(1, 2) {
                return format!("\\sqrt{{{}}}", print_latex(e));
            }
            format!("\\left({}\\right)", print_latex(e))
        }
    };
    if exp.is_one() {
        base
    } else if matches!(f.base, Base::Partial(_)) {
        format!("\\left({base}\\right)^{{{exp}}}")
    } else {
        format!("{base}^{{{exp}}}")
    }
}
