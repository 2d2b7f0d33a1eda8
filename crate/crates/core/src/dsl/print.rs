use super::{BinOp, Node, UnOp, Var};

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn precedence(n: &Node) -> u8 {
    match n {
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => ADD,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => MUL,
        Node::Unary(UnOp::Neg, _) => NEG,
        Node::Pow(..) => POW,
        Node::Const(c) if *c < 0.0 || c.is_sign_negative() => NEG,
        _ => ATOM,
    }
}

fn number(c: f64) -> String {
    // `Display` for f64 is the shortest string that parses back exactly.
    format!("{c}")
}

fn write(n: &Node, out: &mut String) {
    match n {
        Node::Const(c) => out.push_str(&number(*c)),
        Node::Var(Var::T) => out.push('t'),
        Node::Var(Var::X(i)) => out.push_str(&format!("x{i}")),
        Node::Var(Var::V(i)) => out.push_str(&format!("v{i}")),
        Node::Unary(UnOp::Neg, a) => {
            out.push('-');
            wrap(a, precedence(a) < NEG, out);
        }
        Node::Unary(op, a) => {
            out.push_str(op.name());
            out.push('(');
            write(a, out);
            out.push(')');
        }
        Node::Binary(op, a, b) => {
            let p = precedence(n);
            wrap(a, precedence(a) < p, out);
            out.push(' ');
            out.push(op.symbol());
            out.push(' ');
            wrap(b, precedence(b) <= p, out);
        }
        Node::Pow(a, e) => {
            wrap(a, precedence(a) <= POW, out);
            out.push('^');
            out.push_str(&number(*e));
        }
    }
}

fn wrap(n: &Node, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write(n, out);
        out.push(')');
    } else {
        write(n, out);
    }
}

pub(super) fn to_string(n: &Node) -> String {
    let mut s = String::new();
    write(n, &mut s);
    s
}
