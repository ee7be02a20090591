//! Reverse-mode recording.
//!
//! A [`Trace`] is a per-call, topologically ordered list of operations.
//! [`Var`] handles borrow the trace they were recorded on, so a trace cannot
//! outlive its evaluation and there is no global tape. The trace is generic
//! over its value type: recording over `Dual<f64>` or over another trace's
//! `Var` is what makes the nested second-order compositions work.

use alloc::vec::Vec;
use core::cell::RefCell;
use core::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

/// Operation kind of one recorded node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    /// Power with a constant real exponent.
    Powf(f64),
    /// Inner product; operands live in the trace's side list as
    /// `(start, len)` of interleaved `(a_i, b_i)` pairs.
    Dot,
}

#[derive(Clone, Copy, Debug)]
pub struct Node<T> {
    pub op: Op,
    pub args: [u32; 2],
    pub value: T,
}

#[derive(Debug)]
pub struct Trace<T> {
    nodes: RefCell<Vec<Node<T>>>,
    dot_operands: RefCell<Vec<u32>>,
    inputs: RefCell<Vec<u32>>,
}

impl<T> Default for Trace<T> {
    fn default() -> Self {
        Trace {
            nodes: RefCell::new(Vec::new()),
            dot_operands: RefCell::new(Vec::new()),
            inputs: RefCell::new(Vec::new()),
        }
    }
}

impl<T: Scalar> Trace<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Trace {
            nodes: RefCell::new(Vec::with_capacity(n)),
            dot_operands: RefCell::new(Vec::new()),
            inputs: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, index: usize) -> Node<T> {
        self.nodes.borrow()[index]
    }

    /// Indices of the input nodes, in registration order.
    pub fn input_indices(&self) -> Vec<u32> {
        self.inputs.borrow().clone()
    }

    /// Operand indices of node `index` (two for binary ops, one for unary,
    /// `2n` for a dot of length `n`, none for leaves).
    pub fn operands(&self, index: usize) -> Vec<u32> {
        let node = self.node(index);
        match node.op {
            Op::Input | Op::Const => Vec::new(),
            Op::Add | Op::Sub | Op::Mul | Op::Div => node.args.to_vec(),
            Op::Neg | Op::Exp | Op::Log | Op::Sin | Op::Cos | Op::Powf(_) => {
                alloc::vec![node.args[0]]
            }
            Op::Dot => {
                let (start, len) = (node.args[0] as usize, node.args[1] as usize);
                self.dot_operands.borrow()[start..start + len].to_vec()
            }
        }
    }

    fn push(&self, op: Op, args: [u32; 2], value: T) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node { op, args, value });
        index
    }

    /// Register one independent variable.
    pub fn input(&self, value: T) -> Var<'_, T> {
        let index = self.push(Op::Input, [0, 0], value);
        self.inputs.borrow_mut().push(index);
        Var {
            trace: Some(self),
            index,
            value,
        }
    }

    pub fn inputs(&self, values: &[T]) -> Vec<Var<'_, T>> {
        values.iter().map(|v| self.input(*v)).collect()
    }

    /// Reverse sweep. Seeds are `(node, cotangent)` pairs; returns the
    /// accumulated adjoint of every node (`None` where nothing flowed).
    pub fn adjoints(&self, seeds: &[(u32, T)]) -> Vec<Option<T>> {
        let nodes = self.nodes.borrow();
        let dot_operands = self.dot_operands.borrow();
        let mut adj: Vec<Option<T>> = alloc::vec![None; nodes.len()];
        for &(i, s) in seeds {
            accumulate(&mut adj, i, s);
        }
        for i in (0..nodes.len()).rev() {
            let a = match adj[i] {
                Some(a) => a,
                None => continue,
            };
            let node = nodes[i];
            let [l, r] = node.args;
            let value_of = |k: u32| nodes[k as usize].value;
            match node.op {
                Op::Input | Op::Const => {}
                Op::Add => {
                    accumulate(&mut adj, l, a);
                    accumulate(&mut adj, r, a);
                }
                Op::Sub => {
                    accumulate(&mut adj, l, a);
                    accumulate(&mut adj, r, -a);
                }
                Op::Mul => {
                    accumulate(&mut adj, l, a * value_of(r));
                    accumulate(&mut adj, r, a * value_of(l));
                }
                Op::Div => {
                    let denom = value_of(r);
                    accumulate(&mut adj, l, a / denom);
                    accumulate(&mut adj, r, -(a * node.value) / denom);
                }
                Op::Neg => accumulate(&mut adj, l, -a),
                Op::Exp => accumulate(&mut adj, l, a * node.value),
                Op::Log => accumulate(&mut adj, l, a / value_of(l)),
                Op::Sin => accumulate(&mut adj, l, a * value_of(l).cos()),
                Op::Cos => accumulate(&mut adj, l, -(a * value_of(l).sin())),
                Op::Powf(p) => {
                    let d = T::from_f64(p) * value_of(l).powf(p - 1.0);
                    accumulate(&mut adj, l, a * d);
                }
                Op::Dot => {
                    let (start, len) = (l as usize, r as usize);
                    for pair in dot_operands[start..start + len].chunks_exact(2) {
                        accumulate(&mut adj, pair[0], a * value_of(pair[1]));
                        accumulate(&mut adj, pair[1], a * value_of(pair[0]));
                    }
                }
            }
        }
        adj
    }

    /// Pull output cotangents back to the registered inputs.
    ///
    /// Outputs that are untracked constants contribute nothing. Inputs that
    /// received no adjoint come back as zero.
    pub fn pullback(&self, outputs: &[Var<'_, T>], cotangents: &[T]) -> Vec<T> {
        debug_assert_eq!(outputs.len(), cotangents.len());
        let seeds: Vec<(u32, T)> = outputs
            .iter()
            .zip(cotangents)
            .filter_map(|(o, c)| match o.trace {
                Some(t) if core::ptr::eq(t, self) => Some((o.index, *c)),
                _ => None,
            })
            .collect();
        let adj = self.adjoints(&seeds);
        self.inputs
            .borrow()
            .iter()
            .map(|&i| adj[i as usize].unwrap_or_else(|| T::from_f64(0.0)))
            .collect()
    }
}

impl Trace<f64> {
    /// Re-evaluate every node from new input values, returning all node
    /// values. Replaying the recorded inputs reproduces the recorded values
    /// bit for bit.
    pub fn replay(&self, inputs: &[f64]) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let dot_operands = self.dot_operands.borrow();
        let mut values = Vec::with_capacity(nodes.len());
        let mut next_input = 0;
        for node in nodes.iter() {
            let [l, r] = node.args;
            let v = |k: u32, values: &Vec<f64>| values[k as usize];
            let value = match node.op {
                Op::Input => {
                    next_input += 1;
                    inputs[next_input - 1]
                }
                Op::Const => node.value,
                Op::Add => v(l, &values) + v(r, &values),
                Op::Sub => v(l, &values) - v(r, &values),
                Op::Mul => v(l, &values) * v(r, &values),
                Op::Div => v(l, &values) / v(r, &values),
                Op::Neg => -v(l, &values),
                Op::Exp => v(l, &values).exp(),
                Op::Log => Scalar::ln(v(l, &values)),
                Op::Sin => Scalar::sin(v(l, &values)),
                Op::Cos => Scalar::cos(v(l, &values)),
                Op::Powf(p) => Scalar::powf(v(l, &values), p),
                Op::Dot => {
                    let (start, len) = (l as usize, r as usize);
                    let mut acc = 0.0;
                    for pair in dot_operands[start..start + len].chunks_exact(2) {
                        acc += v(pair[0], &values) * v(pair[1], &values);
                    }
                    acc
                }
            };
            values.push(value);
        }
        values
    }
}

#[inline]
fn accumulate<T: Scalar>(adj: &mut [Option<T>], index: u32, value: T) {
    let slot = &mut adj[index as usize];
    *slot = Some(match *slot {
        Some(prev) => prev + value,
        None => value,
    });
}

/// A value recorded on a [`Trace`], or an untracked constant.
#[derive(Debug)]
pub struct Var<'t, T> {
    trace: Option<&'t Trace<T>>,
    index: u32,
    value: T,
}

impl<T: Copy> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T: Copy> Copy for Var<'_, T> {}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn constant(value: T) -> Self {
        Var {
            trace: None,
            index: u32::MAX,
            value,
        }
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn index(&self) -> Option<u32> {
        self.trace.map(|_| self.index)
    }

    fn index_in(&self, trace: &'t Trace<T>) -> u32 {
        match self.trace {
            Some(_) => self.index,
            None => trace.push(Op::Const, [0, 0], self.value),
        }
    }

    fn unary(self, op: Op, value: T) -> Self {
        match self.trace {
            Some(t) => Var {
                trace: Some(t),
                index: t.push(op, [self.index, 0], value),
                value,
            },
            None => Var::constant(value),
        }
    }

    fn binary(self, rhs: Self, op: Op, value: T) -> Self {
        let trace = match (self.trace, rhs.trace) {
            (Some(t), other) => {
                debug_assert!(other.is_none_or(|o| core::ptr::eq(o, t)));
                t
            }
            (None, Some(t)) => t,
            (None, None) => return Var::constant(value),
        };
        let l = self.index_in(trace);
        let r = rhs.index_in(trace);
        Var {
            trace: Some(trace),
            index: trace.push(op, [l, r], value),
            value,
        }
    }
}

impl<T: Scalar> Add for Var<'_, T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let v = self.value + rhs.value;
        self.binary(rhs, Op::Add, v)
    }
}

impl<T: Scalar> Sub for Var<'_, T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let v = self.value - rhs.value;
        self.binary(rhs, Op::Sub, v)
    }
}

impl<T: Scalar> Mul for Var<'_, T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let v = self.value * rhs.value;
        self.binary(rhs, Op::Mul, v)
    }
}

impl<T: Scalar> Div for Var<'_, T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let v = self.value / rhs.value;
        self.binary(rhs, Op::Div, v)
    }
}

impl<T: Scalar> Neg for Var<'_, T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let v = -self.value;
        self.unary(Op::Neg, v)
    }
}

impl<T: Scalar> Scalar for Var<'_, T> {
    fn from_f64(v: f64) -> Self {
        Var::constant(T::from_f64(v))
    }

    fn primal(&self) -> f64 {
        self.value.primal()
    }

    fn exp(self) -> Self {
        self.unary(Op::Exp, self.value.exp())
    }

    fn ln(self) -> Self {
        self.unary(Op::Log, self.value.ln())
    }

    fn sin(self) -> Self {
        self.unary(Op::Sin, self.value.sin())
    }

    fn cos(self) -> Self {
        self.unary(Op::Cos, self.value.cos())
    }

    fn powf(self, p: f64) -> Self {
        self.unary(Op::Powf(p), self.value.powf(p))
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let trace = match a.iter().chain(b).find_map(|v| v.trace) {
            Some(t) => t,
            None => {
                let mut acc = T::from_f64(0.0);
                for (x, y) in a.iter().zip(b) {
                    acc = acc + x.value * y.value;
                }
                return Var::constant(acc);
            }
        };
        let mut value = T::from_f64(0.0);
        let mut pairs = Vec::with_capacity(2 * a.len());
        for (x, y) in a.iter().zip(b) {
            value = value + x.value * y.value;
            pairs.push(x.index_in(trace));
            pairs.push(y.index_in(trace));
        }
        let start = {
            let mut ops = trace.dot_operands.borrow_mut();
            let start = ops.len() as u32;
            ops.extend_from_slice(&pairs);
            start
        };
        Var {
            trace: Some(trace),
            index: trace.push(Op::Dot, [start, pairs.len() as u32], value),
            value,
        }
    }

    fn all_finite(&self) -> bool {
        self.value.all_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_product() {
        let t = Trace::<f64>::new();
        let x = t.input(3.0);
        let y = t.input(4.0);
        let z = x * y + x;
        let g = t.pullback(&[z], &[1.0]);
        assert_eq!(g, [5.0, 3.0]);
    }

    #[test]
    fn constants_do_not_reach_inputs() {
        let t = Trace::<f64>::new();
        let x = t.input(2.0);
        let c = Var::constant(10.0);
        let z = c * x - c;
        let g = t.pullback(&[z], &[1.0]);
        assert_eq!(g, [10.0]);
    }

    #[test]
    fn dot_node() {
        let t = Trace::<f64>::new();
        let a = t.inputs(&[1.0, 2.0, 3.0]);
        let b = t.inputs(&[4.0, 5.0, 6.0]);
        let d = Scalar::dot(&a, &b);
        assert_eq!(d.value(), 32.0);
        assert_eq!(t.node(d.index().unwrap() as usize).op, Op::Dot);
        let g = t.pullback(&[d], &[2.0]);
        assert_eq!(g, [8.0, 10.0, 12.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn topological_order_and_replay() {
        let t = Trace::<f64>::new();
        let x = t.inputs(&[0.3, 1.7]);
        let z = (x[0] * x[1]).exp().ln() + x[1].sin() / x[0].cos() - x[0].powf(2.5);
        let z = Scalar::dot(&[z, x[0]], &[x[1], z]);
        for i in 0..t.len() {
            for op in t.operands(i) {
                assert!((op as usize) < i);
            }
        }
        let replayed = t.replay(&[0.3, 1.7]);
        let out = z.index().unwrap() as usize;
        assert_eq!(replayed[out].to_bits(), z.value().to_bits());
        let moved = t.replay(&[0.4, 1.1]);
        assert_ne!(moved[out], z.value());
    }
}
