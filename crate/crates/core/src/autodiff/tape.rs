use std::collections::BTreeMap;
use std::sync::Arc;

use super::AdError;

/// Smallest magnitude allowed for a divisor or a logarithm argument.
pub const DENOMINATOR_GUARD: f64 = 1e-300;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A named parameter tensor, flat in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamValue {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ParamValue {
    pub fn vector(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            rows: 1,
            cols: values.len(),
            values,
        }
    }

    pub fn matrix(name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(rows * cols, values.len(), "matrix shape does not match data");
        Self {
            name: name.into(),
            rows,
            cols,
            values,
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Exp(Var),
    Log(Var),
    Neg(Var),
    Sum(Var),
    Dot(Var, Var),
    Affine { w: Var, b: Var, x: Var },
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    SquaredDistance { x: Var, w: Var },
    NormalizeBySum(Var),
    Concat(Vec<Var>),
    Slice { v: Var, start: usize },
    Outer(Var, Var),
    SparseLinear { v: Var, entries: Arc<[(usize, usize, f64)]> },
    ClampMin { v: Var, floor: f64 },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
}

/// Gradients of a scalar output with respect to every registered parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    by_name: BTreeMap<String, Vec<f64>>,
    unreachable: Vec<String>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.by_name.get(name).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.by_name.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parameters the output does not depend on; their gradient is zero.
    pub fn unreachable(&self) -> &[String] {
        &self.unreachable
    }
}

/// A recording of operations. Single-owner; use one tape per sample.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
}

fn shape_err(op: &'static str, detail: String) -> AdError {
    AdError::ShapeMismatch { op, detail }
}

fn guard_divisor(op: &'static str, d: f64) -> Result<f64, AdError> {
    if d == 0.0 || !d.is_finite() {
        return Err(AdError::DomainError {
            op,
            detail: format!("divisor {d}"),
        });
    }
    Ok(if d.abs() < DENOMINATOR_GUARD {
        DENOMINATOR_GUARD.copysign(d)
    } else {
        d
    })
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { value, rows, cols, op });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    /// The single value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let n = self.node(v);
        debug_assert_eq!(n.value.len(), 1);
        n.value[0]
    }

    pub fn constant(&mut self, values: Vec<f64>) -> Var {
        let n = values.len();
        self.push(values, 1, n, Op::Leaf)
    }

    pub fn constant_matrix(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Var {
        assert_eq!(rows * cols, values.len());
        self.push(values, rows, cols, Op::Leaf)
    }

    pub fn constant_scalar(&mut self, x: f64) -> Var {
        self.push(vec![x], 1, 1, Op::Leaf)
    }

    /// Registers a named leaf whose gradient [`backward`](Self::backward) reports.
    pub fn param(&mut self, p: &ParamValue) -> Result<Var, AdError> {
        if self.params.iter().any(|(n, _)| n == &p.name) {
            return Err(AdError::DuplicateParameter(p.name.clone()));
        }
        if p.rows * p.cols != p.values.len() {
            return Err(shape_err(
                "param",
                format!("{} declared {}x{} with {} values", p.name, p.rows, p.cols, p.values.len()),
            ));
        }
        let v = self.push(p.values.clone(), p.rows, p.cols, Op::Leaf);
        self.params.push((p.name.clone(), v));
        Ok(v)
    }

    pub fn param_var(&self, name: &str) -> Option<Var> {
        self.params.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize, usize), AdError> {
        let (na, nb) = (self.node(a), self.node(b));
        let (la, lb) = (na.value.len(), nb.value.len());
        if la == lb {
            Ok((la, na.rows, na.cols))
        } else if la == 1 {
            Ok((lb, nb.rows, nb.cols))
        } else if lb == 1 {
            Ok((la, na.rows, na.cols))
        } else {
            Err(shape_err(op, format!("{la} vs {lb} elements")))
        }
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> Result<f64, AdError>,
        tag: Op,
    ) -> Result<Var, AdError> {
        let (len, rows, cols) = self.broadcast(op, a, b)?;
        let (va, vb) = (&self.node(a).value, &self.node(b).value);
        let pick = |v: &Vec<f64>, i: usize| if v.len() == 1 { v[0] } else { v[i] };
        let value = (0..len).map(|i| f(pick(va, i), pick(vb, i))).collect::<Result<Vec<_>, _>>()?;
        Ok(self.push(value, rows, cols, tag))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary("add", a, b, |x, y| Ok(x + y), Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary("sub", a, b, |x, y| Ok(x - y), Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary("mul", a, b, |x, y| Ok(x * y), Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary("div", a, b, |x, y| Ok(x / guard_divisor("div", y)?), Op::Div(a, b))
    }

    fn unary(&mut self, v: Var, f: impl Fn(f64) -> f64, tag: Op) -> Var {
        let n = self.node(v);
        let (rows, cols) = (n.rows, n.cols);
        let value = n.value.iter().map(|&x| f(x)).collect();
        self.push(value, rows, cols, tag)
    }

    pub fn exp(&mut self, v: Var) -> Var {
        self.unary(v, f64::exp, Op::Exp(v))
    }

    pub fn log(&mut self, v: Var) -> Result<Var, AdError> {
        if let Some(&x) = self.value(v).iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(AdError::DomainError {
                op: "log",
                detail: format!("argument {x}"),
            });
        }
        Ok(self.unary(v, |x| x.max(DENOMINATOR_GUARD).ln(), Op::Log(v)))
    }

    pub fn neg(&mut self, v: Var) -> Var {
        self.unary(v, |x| -x, Op::Neg(v))
    }

    pub fn relu(&mut self, v: Var) -> Var {
        self.unary(v, |x| x.max(0.0), Op::Relu(v))
    }

    pub fn sigmoid(&mut self, v: Var) -> Var {
        self.unary(v, sigmoid, Op::Sigmoid(v))
    }

    /// `max(v, floor)` element-wise; the gradient is cut where the floor binds.
    pub fn clamp_min(&mut self, v: Var, floor: f64) -> Var {
        self.unary(v, |x| x.max(floor), Op::ClampMin { v, floor })
    }

    pub fn sum(&mut self, v: Var) -> Var {
        let s = self.value(v).iter().sum();
        self.push(vec![s], 1, 1, Op::Sum(v))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(shape_err("dot", format!("{} vs {}", va.len(), vb.len())));
        }
        let s = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![s], 1, 1, Op::Dot(a, b)))
    }

    /// `W x + b` with `W` of shape `out × in`.
    pub fn affine(&mut self, w: Var, b: Var, x: Var) -> Result<Var, AdError> {
        let (nw, nb, nx) = (self.node(w), self.node(b), self.node(x));
        let (out, inp) = (nw.rows, nw.cols);
        if nx.value.len() != inp || nb.value.len() != out {
            return Err(shape_err(
                "affine",
                format!("W {out}x{inp}, b {}, x {}", nb.value.len(), nx.value.len()),
            ));
        }
        let value = (0..out)
            .map(|i| {
                let row = &nw.value[i * inp..(i + 1) * inp];
                row.iter().zip(&nx.value).map(|(a, b)| a * b).sum::<f64>() + nb.value[i]
            })
            .collect();
        Ok(self.push(value, 1, out, Op::Affine { w, b, x }))
    }

    /// Row-wise softmax; a vector is a single row.
    pub fn softmax(&mut self, v: Var) -> Var {
        let n = self.node(v);
        let (rows, cols) = (n.rows, n.cols);
        let mut value = Vec::with_capacity(n.value.len());
        for row in n.value.chunks(cols.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            value.extend(exps.into_iter().map(|e| e / z));
        }
        self.push(value, rows, cols, Op::Softmax(v))
    }

    /// `‖x − w_i‖²` for every row `w_i` of `w`; a vector `w` gives a scalar.
    pub fn squared_distance(&mut self, x: Var, w: Var) -> Result<Var, AdError> {
        let (nx, nw) = (self.node(x), self.node(w));
        let dim = nx.value.len();
        if nw.cols != dim {
            return Err(shape_err(
                "squared_distance",
                format!("x has {dim} values, rows of w have {}", nw.cols),
            ));
        }
        let value: Vec<f64> = nw
            .value
            .chunks(dim.max(1))
            .map(|row| row.iter().zip(&nx.value).map(|(w, x)| (x - w) * (x - w)).sum())
            .collect();
        let rows = value.len();
        Ok(self.push(value, 1, rows, Op::SquaredDistance { x, w }))
    }

    /// `v / Σ v`. A zero (or negative) total is a domain error.
    pub fn normalize_by_sum(&mut self, v: Var) -> Result<Var, AdError> {
        let n = self.node(v);
        let total: f64 = n.value.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(AdError::DomainError {
                op: "normalize_by_sum",
                detail: format!("total {total}"),
            });
        }
        let total = total.max(DENOMINATOR_GUARD);
        let (rows, cols) = (n.rows, n.cols);
        let value = n.value.iter().map(|x| x / total).collect();
        Ok(self.push(value, rows, cols, Op::NormalizeBySum(v)))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value: Vec<f64> = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        let n = value.len();
        self.push(value, 1, n, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, v: Var, start: usize, len: usize) -> Result<Var, AdError> {
        let src = self.value(v);
        if start + len > src.len() {
            return Err(shape_err("slice", format!("{start}..{} of {}", start + len, src.len())));
        }
        let value = src[start..start + len].to_vec();
        Ok(self.push(value, 1, len, Op::Slice { v, start }))
    }

    pub fn index(&mut self, v: Var, i: usize) -> Result<Var, AdError> {
        self.slice(v, i, 1)
    }

    /// Row `i` of a matrix node.
    pub fn row(&mut self, m: Var, i: usize) -> Result<Var, AdError> {
        let cols = self.node(m).cols;
        self.slice(m, i * cols, cols)
    }

    /// Outer product flattened row-major: element `i·|b| + j` is `a_i b_j`.
    pub fn outer(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let value: Vec<f64> = va.iter().flat_map(|x| vb.iter().map(move |y| x * y)).collect();
        let (rows, cols) = (va.len(), vb.len());
        self.push(value, rows, cols, Op::Outer(a, b))
    }

    /// `out[o] = Σ coef · v[i]` over the `(o, i, coef)` entries.
    pub fn sparse_linear(&mut self, v: Var, entries: Arc<[(usize, usize, f64)]>, out_len: usize) -> Result<Var, AdError> {
        let src = self.value(v);
        let mut value = vec![0.0; out_len];
        for &(o, i, c) in entries.iter() {
            if o >= out_len || i >= src.len() {
                return Err(shape_err(
                    "sparse_linear",
                    format!("entry ({o}, {i}) outside {out_len}x{}", src.len()),
                ));
            }
            value[o] += c * src[i];
        }
        Ok(self.push(value, 1, out_len, Op::SparseLinear { v, entries }))
    }

    /// Reverse sweep from a scalar output. Accumulators start at zero on every call.
    pub fn backward(&self, output: Var) -> Result<Gradients, AdError> {
        let len = self.node(output).value.len();
        if len != 1 {
            return Err(AdError::NotScalar { len });
        }
        let mut adj: Vec<Vec<f64>> = Vec::with_capacity(output.0 + 1);
        let mut reached = vec![false; output.0 + 1];
        for n in &self.nodes[..=output.0] {
            adj.push(vec![0.0; n.value.len()]);
        }
        adj[output.0][0] = 1.0;
        reached[output.0] = true;

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !reached[idx] || matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = std::mem::take(&mut adj[idx]);
            let mut send = |target: Var, adj: &mut Vec<Vec<f64>>, f: &mut dyn FnMut(&mut [f64])| {
                reached[target.0] = true;
                f(&mut adj[target.0]);
            };
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    send(*a, &mut adj, &mut |d| accumulate_broadcast(d, &g, 1.0));
                    send(*b, &mut adj, &mut |d| accumulate_broadcast(d, &g, sign));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.node(*a).value, &self.node(*b).value);
                    let ga: Vec<f64> = (0..g.len()).map(|i| g[i] * pick(vb, i)).collect();
                    let gb: Vec<f64> = (0..g.len()).map(|i| g[i] * pick(va, i)).collect();
                    send(*a, &mut adj, &mut |d| accumulate_broadcast(d, &ga, 1.0));
                    send(*b, &mut adj, &mut |d| accumulate_broadcast(d, &gb, 1.0));
                }
                Op::Div(a, b) => {
                    let (va, vb) = (&self.node(*a).value, &self.node(*b).value);
                    let den = |i: usize| guard_divisor("div", pick(vb, i)).expect("checked in forward");
                    let ga: Vec<f64> = (0..g.len()).map(|i| g[i] / den(i)).collect();
                    let gb: Vec<f64> = (0..g.len()).map(|i| -g[i] * pick(va, i) / (den(i) * den(i))).collect();
                    send(*a, &mut adj, &mut |d| accumulate_broadcast(d, &ga, 1.0));
                    send(*b, &mut adj, &mut |d| accumulate_broadcast(d, &gb, 1.0));
                }
                Op::Exp(a) => {
                    let y = &node.value;
                    send(*a, &mut adj, &mut |d| {
                        d.iter_mut().enumerate().for_each(|(i, di)| *di += g[i] * y[i])
                    });
                }
                Op::Log(a) => {
                    let x = &self.node(*a).value;
                    send(*a, &mut adj, &mut |d| {
                        d.iter_mut()
                            .enumerate()
                            .for_each(|(i, di)| *di += g[i] / x[i].max(DENOMINATOR_GUARD))
                    });
                }
                Op::Neg(a) => send(*a, &mut adj, &mut |d| accumulate_broadcast(d, &g, -1.0)),
                Op::Relu(a) => {
                    let x = &self.node(*a).value;
                    send(*a, &mut adj, &mut |d| {
                        d.iter_mut().enumerate().for_each(|(i, di)| {
                            if x[i] > 0.0 {
                                *di += g[i]
                            }
                        })
                    });
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    send(*a, &mut adj, &mut |d| {
                        d.iter_mut().enumerate().for_each(|(i, di)| *di += g[i] * y[i] * (1.0 - y[i]))
                    });
                }
                Op::ClampMin { v, floor } => {
                    let x = &self.node(*v).value;
                    send(*v, &mut adj, &mut |d| {
                        d.iter_mut().enumerate().for_each(|(i, di)| {
                            if x[i] >= *floor {
                                *di += g[i]
                            }
                        })
                    });
                }
                Op::Sum(a) => send(*a, &mut adj, &mut |d| d.iter_mut().for_each(|di| *di += g[0])),
                Op::Dot(a, b) => {
                    let (va, vb) = (&self.node(*a).value, &self.node(*b).value);
                    send(*a, &mut adj, &mut |d| {
                        d.iter_mut().zip(vb).for_each(|(di, y)| *di += g[0] * y)
                    });
                    send(*b, &mut adj, &mut |d| {
                        d.iter_mut().zip(va).for_each(|(di, x)| *di += g[0] * x)
                    });
                }
                Op::Affine { w, b, x } => {
                    let nw = self.node(*w);
                    let (out, inp) = (nw.rows, nw.cols);
                    let (vw, vx) = (&nw.value, &self.node(*x).value);
                    send(*w, &mut adj, &mut |d| {
                        for i in 0..out {
                            for j in 0..inp {
                                d[i * inp + j] += g[i] * vx[j];
                            }
                        }
                    });
                    send(*b, &mut adj, &mut |d| accumulate_broadcast(d, &g, 1.0));
                    send(*x, &mut adj, &mut |d| {
                        for i in 0..out {
                            for j in 0..inp {
                                d[j] += g[i] * vw[i * inp + j];
                            }
                        }
                    });
                }
                Op::Softmax(a) => {
                    let cols = node.cols.max(1);
                    let y = &node.value;
                    send(*a, &mut adj, &mut |d| {
                        for r in 0..y.len() / cols {
                            let span = r * cols..(r + 1) * cols;
                            let inner: f64 = span.clone().map(|k| g[k] * y[k]).sum();
                            for k in span {
                                d[k] += y[k] * (g[k] - inner);
                            }
                        }
                    });
                }
                Op::SquaredDistance { x, w } => {
                    let (vx, vw) = (&self.node(*x).value, &self.node(*w).value);
                    let dim = vx.len();
                    send(*x, &mut adj, &mut |d| {
                        for (i, gi) in g.iter().enumerate() {
                            for j in 0..dim {
                                d[j] += 2.0 * gi * (vx[j] - vw[i * dim + j]);
                            }
                        }
                    });
                    send(*w, &mut adj, &mut |d| {
                        for (i, gi) in g.iter().enumerate() {
                            for j in 0..dim {
                                d[i * dim + j] -= 2.0 * gi * (vx[j] - vw[i * dim + j]);
                            }
                        }
                    });
                }
                Op::NormalizeBySum(a) => {
                    let total: f64 = self.node(*a).value.iter().sum::<f64>().max(DENOMINATOR_GUARD);
                    let y = &node.value;
                    let inner: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    send(*a, &mut adj, &mut |d| {
                        d.iter_mut().enumerate().for_each(|(i, di)| *di += (g[i] - inner) / total)
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.node(p).value.len();
                        let chunk = &g[offset..offset + n];
                        send(p, &mut adj, &mut |d| accumulate_broadcast(d, chunk, 1.0));
                        offset += n;
                    }
                }
                Op::Slice { v, start } => {
                    send(*v, &mut adj, &mut |d| {
                        d[*start..*start + g.len()].iter_mut().zip(&g).for_each(|(di, gi)| *di += gi)
                    });
                }
                Op::Outer(a, b) => {
                    let (va, vb) = (&self.node(*a).value, &self.node(*b).value);
                    let m = vb.len();
                    send(*a, &mut adj, &mut |d| {
                        for (i, di) in d.iter_mut().enumerate() {
                            *di += (0..m).map(|j| g[i * m + j] * vb[j]).sum::<f64>();
                        }
                    });
                    send(*b, &mut adj, &mut |d| {
                        for (j, dj) in d.iter_mut().enumerate() {
                            *dj += va.iter().enumerate().map(|(i, x)| g[i * m + j] * x).sum::<f64>();
                        }
                    });
                }
                Op::SparseLinear { v, entries } => {
                    send(*v, &mut adj, &mut |d| {
                        for &(o, i, c) in entries.iter() {
                            d[i] += c * g[o];
                        }
                    });
                }
            }
        }

        let mut grads = Gradients::default();
        for (name, v) in &self.params {
            if v.0 > output.0 || !reached[v.0] {
                grads.unreachable.push(name.clone());
                grads.by_name.insert(name.clone(), vec![0.0; self.node(*v).value.len()]);
            } else {
                grads.by_name.insert(name.clone(), adj[v.0].clone());
            }
        }
        Ok(grads)
    }
}

fn pick(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

/// Adds `scale · g` into `d`, summing over `g` when `d` is a broadcast scalar.
fn accumulate_broadcast(d: &mut [f64], g: &[f64], scale: f64) {
    if d.len() == g.len() {
        d.iter_mut().zip(g).for_each(|(di, gi)| *di += scale * gi);
    } else {
        d[0] += scale * g.iter().sum::<f64>();
    }
}
