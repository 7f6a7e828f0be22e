use super::{BinaryOp, Coord, Expr, Node, UnaryOp};

pub(super) fn differentiate(e: &Expr, var: Coord) -> Expr {
    match e.node() {
        Node::Const(_) | Node::Param(_) => Expr::zero(),
        Node::Coord(c) => {
            if *c == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Unary(op, a) => {
            let da = differentiate(a, var);
            if da.is_zero() {
                return Expr::zero();
            }
            let outer = match op {
                UnaryOp::Neg => return da.neg(),
                UnaryOp::Sin => a.cos(),
                UnaryOp::Cos => a.sin().neg(),
                UnaryOp::Exp => e.clone(),
                UnaryOp::Log => return da.div(a),
                UnaryOp::Sqrt => return da.div(&e.scale(2.0)),
                UnaryOp::Tanh => Expr::one().sub(&e.powi(2)),
            };
            da.mul(&outer)
        }
        Node::Binary(op, a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            match op {
                BinaryOp::Add => da.add(&db),
                BinaryOp::Sub => da.sub(&db),
                BinaryOp::Mul => da.mul(b).add(&a.mul(&db)),
                BinaryOp::Div => {
                    if db.is_zero() {
                        da.div(b)
                    } else {
                        // (a' b - a b') / b^2
                        da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                    }
                }
            }
        }
        Node::Pow(a, k) => {
            let da = differentiate(a, var);
            if da.is_zero() || *k == 0 {
                return Expr::zero();
            }
            Expr::constant(f64::from(*k)).mul(&a.powi(k - 1)).mul(&da)
        }
    }
}
