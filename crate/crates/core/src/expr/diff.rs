use super::{Func, Node};

fn c(v: f64) -> Node {
    Node::Const(v)
}

fn b(n: Node) -> Box<Node> {
    Box::new(n)
}

fn mul(a: Node, b_: Node) -> Node {
    simplify(Node::Mul(b(a), b(b_)))
}

fn div(a: Node, b_: Node) -> Node {
    simplify(Node::Div(b(a), b(b_)))
}

fn add(a: Node, b_: Node) -> Node {
    simplify(Node::Add(b(a), b(b_)))
}

fn sub(a: Node, b_: Node) -> Node {
    simplify(Node::Sub(b(a), b(b_)))
}

fn call(f: Func, a: Node) -> Node {
    Node::Call(f, b(a))
}

fn pow(a: Node, n: i32) -> Node {
    simplify(Node::Pow(b(a), n))
}

pub(super) fn derivative(node: &Node, slot: usize) -> Node {
    match node {
        Node::Const(_) => c(0.0),
        Node::Var(i) => c(if *i == slot { 1.0 } else { 0.0 }),
        Node::Neg(a) => simplify(Node::Neg(b(derivative(a, slot)))),
        Node::Add(a, b_) => add(derivative(a, slot), derivative(b_, slot)),
        Node::Sub(a, b_) => sub(derivative(a, slot), derivative(b_, slot)),
        Node::Mul(a, b_) => add(mul(derivative(a, slot), (**b_).clone()), mul((**a).clone(), derivative(b_, slot))),
        Node::Div(a, b_) => {
            // (a'b - ab') / b^2
            let num = sub(mul(derivative(a, slot), (**b_).clone()), mul((**a).clone(), derivative(b_, slot)));
            div(num, pow((**b_).clone(), 2))
        }
        Node::Pow(a, n) => {
            if *n == 0 {
                return c(0.0);
            }
            let outer = mul(c(*n as f64), pow((**a).clone(), n - 1));
            mul(outer, derivative(a, slot))
        }
        Node::Call(f, a) => {
            let da = derivative(a, slot);
            if da == c(0.0) {
                return c(0.0);
            }
            let u = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, u),
                Func::Cos => simplify(Node::Neg(b(call(Func::Sin, u)))),
                Func::Tan => div(c(1.0), pow(call(Func::Cos, u), 2)),
                Func::Exp => call(Func::Exp, u),
                Func::Log => div(c(1.0), u),
                Func::Sinh => call(Func::Cosh, u),
                Func::Cosh => call(Func::Sinh, u),
                Func::Tanh => div(c(1.0), pow(call(Func::Cosh, u), 2)),
                Func::Sqrt => div(c(0.5), call(Func::Sqrt, u)),
                // u/|u|: undefined at u = 0, reported at evaluation time
                Func::Abs => div(u.clone(), call(Func::Abs, u)),
                Func::Atan => div(c(1.0), add(c(1.0), pow(u, 2))),
            };
            mul(outer, da)
        }
    }
}

/// Constant folding and removal of additive/multiplicative identities.
/// Folding is skipped whenever it would produce a non-finite constant.
pub(super) fn simplify(node: Node) -> Node {
    let folded = |v: f64, orig: Node| if v.is_finite() { Node::Const(v) } else { orig };
    match node {
        Node::Neg(a) => match simplify(*a) {
            Node::Const(v) => Node::Const(-v),
            Node::Neg(inner) => *inner,
            other => Node::Neg(b(other)),
        },
        Node::Add(x, y) => match (simplify(*x), simplify(*y)) {
            (Node::Const(p), Node::Const(q)) => folded(p + q, Node::Add(b(c(p)), b(c(q)))),
            (Node::Const(z), other) | (other, Node::Const(z)) if z == 0.0 => other,
            (p, q) => Node::Add(b(p), b(q)),
        },
        Node::Sub(x, y) => match (simplify(*x), simplify(*y)) {
            (Node::Const(p), Node::Const(q)) => folded(p - q, Node::Sub(b(c(p)), b(c(q)))),
            (other, Node::Const(0.0)) => other,
            (Node::Const(0.0), other) => simplify(Node::Neg(b(other))),
            (p, q) => Node::Sub(b(p), b(q)),
        },
        Node::Mul(x, y) => match (simplify(*x), simplify(*y)) {
            (Node::Const(p), Node::Const(q)) => folded(p * q, Node::Mul(b(c(p)), b(c(q)))),
            (Node::Const(z), _) | (_, Node::Const(z)) if z == 0.0 => c(0.0),
            (Node::Const(o), other) | (other, Node::Const(o)) if o == 1.0 => other,
            (Node::Const(m), other) | (other, Node::Const(m)) if m == -1.0 => simplify(Node::Neg(b(other))),
            (p, q) => Node::Mul(b(p), b(q)),
        },
        Node::Div(x, y) => match (simplify(*x), simplify(*y)) {
            (Node::Const(p), Node::Const(q)) if q != 0.0 => folded(p / q, Node::Div(b(c(p)), b(c(q)))),
            (Node::Const(z), q) if z == 0.0 && q != c(0.0) => c(0.0),
            (p, Node::Const(1.0)) => p,
            (p, q) => Node::Div(b(p), b(q)),
        },
        Node::Pow(a, n) => match (simplify(*a), n) {
            (_, 0) => c(1.0),
            (p, 1) => p,
            (Node::Const(p), n) if p != 0.0 || n > 0 => folded(p.powi(n), Node::Pow(b(c(p)), n)),
            (p, n) => Node::Pow(b(p), n),
        },
        Node::Call(f, a) => Node::Call(f, b(simplify(*a))),
        leaf => leaf,
    }
}
