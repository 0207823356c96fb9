use std::collections::HashMap;

use super::{Expr, Node};

/// Symbolic partial differentiation with a cache that survives across calls.
///
/// Differentiating many expressions that share subtrees (all components of a
/// tensor, say) through one `Differentiator` keeps the results shared too.
#[derive(Default)]
pub struct Differentiator {
    // keyed by node address; the source is kept alive so the address stays unique
    cache: HashMap<(usize, usize), (Expr, Expr)>,
}

impl Differentiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diff(&mut self, e: &Expr, coord: usize) -> Expr {
        let key = (e.addr(), coord);
        if let Some((_, d)) = self.cache.get(&key) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => Expr::int(0),
            Node::Var(i) => Expr::int(i64::from(*i == coord)),
            Node::Sum(terms) => Expr::sum(
                terms
                    .iter()
                    .map(|t| self.diff(t, coord))
                    .filter(|t| !t.is_const_zero())
                    .collect::<Vec<_>>(),
            ),
            Node::Product(factors) => {
                let derivs: Vec<Expr> = factors.iter().map(|f| self.diff(f, coord)).collect();
                let mut terms = Vec::new();
                for (i, di) in derivs.iter().enumerate() {
                    if di.is_const_zero() {
                        continue;
                    }
                    let mut parts: Vec<Expr> = Vec::with_capacity(factors.len());
                    for (j, f) in factors.iter().enumerate() {
                        parts.push(if i == j { di.clone() } else { f.clone() });
                    }
                    terms.push(Expr::product(parts));
                }
                Expr::sum(terms)
            }
            Node::Pow(base, k) => {
                let db = self.diff(base, coord);
                if db.is_const_zero() {
                    Expr::int(0)
                } else {
                    Expr::product([Expr::int(*k), Expr::pow(base.clone(), k - 1), db])
                }
            }
            Node::Neg(u) => Expr::neg(self.diff(u, coord)),
            Node::Sin(u) => {
                let du = self.diff(u, coord);
                if du.is_const_zero() {
                    Expr::int(0)
                } else {
                    Expr::product([Expr::cos(u.clone()), du])
                }
            }
            Node::Cos(u) => {
                let du = self.diff(u, coord);
                if du.is_const_zero() {
                    Expr::int(0)
                } else {
                    Expr::neg(Expr::product([Expr::sin(u.clone()), du]))
                }
            }
            Node::Exp(u) => {
                let du = self.diff(u, coord);
                if du.is_const_zero() {
                    Expr::int(0)
                } else {
                    Expr::product([e.clone(), du])
                }
            }
        };
        self.cache.insert(key, (e.clone(), d.clone()));
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn at(e: &Expr, p: &[f64]) -> f64 {
        e.eval(p).unwrap()
    }

    #[test]
    fn power_rule() {
        let e = parse("x0^2", 1).unwrap();
        let d = e.diff(0);
        assert_eq!(at(&d, &[3.0]), 6.0);
    }

    #[test]
    fn chain_rule_base_case() {
        let e = parse("sin(x1)", 2).unwrap();
        let d = e.diff(1);
        assert_eq!(at(&d, &[0.0, 0.7]), 0.7f64.cos());
        assert!(e.diff(0).is_const_zero());
    }

    #[test]
    fn constants_differentiate_to_zero() {
        for c in ["3", "1/4", "2.5"] {
            assert!(parse(c, 2).unwrap().diff(1).is_const_zero());
        }
    }

    #[test]
    fn shared_cache_shares_results() {
        let e = parse("(1 + x0^2)^(-2)", 1).unwrap();
        let mut d = Differentiator::new();
        let a = d.diff(&e, 0);
        let b = d.diff(&e, 0);
        assert!(a.ptr_eq(&b));
    }
}
