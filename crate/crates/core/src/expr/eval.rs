use std::collections::HashMap;

use num_rational::BigRational;

use super::{Expr, Node};
use crate::scalar::{rational_to_f64, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("`{0}` cannot be evaluated exactly in rational mode")]
    Transcendental(&'static str),
    #[error("point has {got} coordinates, expression needs at least {need}")]
    Dimension { need: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Op {
    Const(u32),
    Var(usize),
    Sum(u32, u32),
    Product(u32, u32),
    Pow(u32, i64),
    Neg(u32),
    Sin(u32),
    Cos(u32),
    Exp(u32),
}

/// A set of expressions flattened into one straight-line program.
///
/// Shared subtrees are emitted once, and structurally identical nodes are
/// merged while compiling, so evaluating all components of a tensor costs
/// one pass over the combined DAG.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    args: Vec<u32>,
    consts: Vec<(BigRational, f64)>,
    roots: Vec<u32>,
    dim: usize,
}

impl Tape {
    pub fn compile(roots: &[Expr]) -> Tape {
        let mut b = Builder::default();
        let roots = roots.iter().map(|r| b.emit(r)).collect();
        Tape { ops: b.ops, args: b.args, consts: b.consts, roots, dim: b.dim }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    /// Number of coordinates the tape reads.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval<S: Scalar>(&self, point: &[S]) -> Result<Vec<S>, EvalError> {
        let vals = self.eval_all(point)?;
        Ok(self.roots.iter().map(|&r| vals[r as usize].clone()).collect())
    }

    fn eval_all<S: Scalar>(&self, point: &[S]) -> Result<Vec<S>, EvalError> {
        if point.len() < self.dim {
            return Err(EvalError::Dimension { need: self.dim, got: point.len() });
        }
        let mut vals: Vec<S> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => {
                    let (exact, float) = &self.consts[*c as usize];
                    if S::EXACT {
                        S::from_rational(exact)
                    } else {
                        S::from_f64(*float)
                    }
                }
                Op::Var(i) => point[*i].clone(),
                Op::Sum(s, e) => {
                    let mut acc = vals[self.args[*s as usize] as usize].clone();
                    for a in &self.args[*s as usize + 1..*e as usize] {
                        acc = acc.add(&vals[*a as usize]);
                    }
                    acc
                }
                Op::Product(s, e) => {
                    let mut acc = vals[self.args[*s as usize] as usize].clone();
                    for a in &self.args[*s as usize + 1..*e as usize] {
                        acc = acc.mul(&vals[*a as usize]);
                    }
                    acc
                }
                Op::Pow(b, k) => vals[*b as usize].powi(*k)?,
                Op::Neg(u) => vals[*u as usize].neg(),
                Op::Sin(u) => vals[*u as usize].sin()?,
                Op::Cos(u) => vals[*u as usize].cos()?,
                Op::Exp(u) => vals[*u as usize].exp()?,
            };
            vals.push(v);
        }
        Ok(vals)
    }
}

#[derive(Default)]
struct Builder {
    ops: Vec<Op>,
    args: Vec<u32>,
    consts: Vec<(BigRational, f64)>,
    const_index: HashMap<BigRational, u32>,
    by_addr: HashMap<usize, (Expr, u32)>,
    by_key: HashMap<(Op, Vec<u32>), u32>,
    dim: usize,
}

impl Builder {
    fn emit(&mut self, e: &Expr) -> u32 {
        if let Some((_, id)) = self.by_addr.get(&e.addr()) {
            return *id;
        }
        // iterative post-order walk keeps deep trees off the call stack
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if self.by_addr.contains_key(&cur.addr()) {
                continue;
            }
            if !expanded {
                stack.push((cur.clone(), true));
                for child in children(&cur) {
                    if !self.by_addr.contains_key(&child.addr()) {
                        stack.push((child.clone(), false));
                    }
                }
                continue;
            }
            let id = self.intern(&cur);
            self.by_addr.insert(cur.addr(), (cur.clone(), id));
        }
        self.by_addr[&e.addr()].1
    }

    fn child_id(&self, e: &Expr) -> u32 {
        self.by_addr[&e.addr()].1
    }

    fn intern(&mut self, e: &Expr) -> u32 {
        let (op, list) = match e.node() {
            Node::Const(c) => {
                let next = self.consts.len() as u32;
                let idx = *self.const_index.entry(c.clone()).or_insert(next);
                if idx == next {
                    self.consts.push((c.clone(), rational_to_f64(c)));
                }
                (Op::Const(idx), Vec::new())
            }
            Node::Var(i) => {
                self.dim = self.dim.max(i + 1);
                (Op::Var(*i), Vec::new())
            }
            Node::Sum(v) => {
                let mut ids: Vec<u32> = v.iter().map(|c| self.child_id(c)).collect();
                ids.sort_unstable();
                (Op::Sum(0, 0), ids)
            }
            Node::Product(v) => {
                let mut ids: Vec<u32> = v.iter().map(|c| self.child_id(c)).collect();
                ids.sort_unstable();
                (Op::Product(0, 0), ids)
            }
            Node::Pow(b, k) => (Op::Pow(self.child_id(b), *k), Vec::new()),
            Node::Neg(u) => (Op::Neg(self.child_id(u)), Vec::new()),
            Node::Sin(u) => (Op::Sin(self.child_id(u)), Vec::new()),
            Node::Cos(u) => (Op::Cos(self.child_id(u)), Vec::new()),
            Node::Exp(u) => (Op::Exp(self.child_id(u)), Vec::new()),
        };
        let key = (op, list);
        if let Some(&id) = self.by_key.get(&key) {
            return id;
        }
        let (op, list) = key.clone();
        let op = match op {
            Op::Sum(..) | Op::Product(..) => {
                let s = self.args.len() as u32;
                self.args.extend_from_slice(&list);
                let e = self.args.len() as u32;
                if matches!(op, Op::Sum(..)) {
                    Op::Sum(s, e)
                } else {
                    Op::Product(s, e)
                }
            }
            other => other,
        };
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.by_key.insert(key, id);
        id
    }
}

fn children(e: &Expr) -> Vec<&Expr> {
    match e.node() {
        Node::Const(_) | Node::Var(_) => Vec::new(),
        Node::Sum(v) | Node::Product(v) => v.iter().collect(),
        Node::Pow(b, _) => vec![b],
        Node::Neg(u) | Node::Sin(u) | Node::Cos(u) | Node::Exp(u) => vec![u],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn evaluates_polynomial_exactly() {
        let e = parse("x0^2 + 1", 1).unwrap();
        assert_eq!(e.eval(&[q(2, 1)]).unwrap(), q(5, 1));
        assert_eq!(e.eval(&[q(1, 3)]).unwrap(), q(10, 9));
    }

    #[test]
    fn negative_power_at_zero_is_domain_error() {
        let e = parse("x0^(-1)", 1).unwrap();
        assert!(matches!(e.eval(&[q(0, 1)]), Err(EvalError::Domain(_))));
        assert!(matches!(e.eval(&[0.0f64]), Err(EvalError::Domain(_))));
    }

    #[test]
    fn transcendental_rejected_in_rational_mode() {
        let e = parse("sin(x0)", 1).unwrap();
        assert!(matches!(e.eval(&[q(1, 2)]), Err(EvalError::Transcendental("sin"))));
        assert!((e.eval(&[0.5f64]).unwrap() - 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn shared_nodes_compile_once() {
        let x = Expr::var(0);
        let big = &(&x + &Expr::int(1)) * &(&x + &Expr::int(1));
        let tape = Tape::compile(&[big.clone(), big]);
        // x0, 1, x0+1 and the product; the duplicate sum is merged
        assert_eq!(tape.len(), 4);
        assert_eq!(tape.root_count(), 2);
    }

    #[test]
    fn short_point_is_rejected() {
        let e = parse("x1", 2).unwrap();
        assert!(matches!(e.eval(&[1.0f64]), Err(EvalError::Dimension { .. })));
    }
}
