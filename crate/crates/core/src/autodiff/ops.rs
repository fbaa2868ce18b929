//! Forward definitions and their reverse-mode rules.

use rand::Rng;

use super::{accumulate, Graph, ParamId, Var};
use crate::{Error, Result};

#[derive(Debug)]
pub(super) enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Transpose { a: Var, rows: usize, cols: usize },
    Tanh(Var),
    Sigmoid(Var),
    Elu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Concat(Vec<Var>),
    Slice { a: Var, start: usize },
    Reshape(Var),
    StackRows(Vec<Var>),
    GatherRows { a: Var, rows: Vec<usize>, cols: usize },
    Dropout { a: Var, mask: Vec<f64> },
    ConvMaxPool { x: Var, w: Var, argmax: Vec<usize>, span: usize, filters: usize },
    CrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
    LogSoftmaxRows { a: Var, cols: usize },
    CrossEntropyRows { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
}

fn as_matrix(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [r, c] => Some((*r, *c)),
        _ => None,
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Graph<'_> {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, data, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, data, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, data, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, data, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.unary(a, |x| x * factor, Op::Scale(a, factor))
    }

    /// Add a vector to every row of a matrix.
    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (rows, cols) = as_matrix(self.shape(m)).ok_or_else(|| Error::Dimension {
            op: "add_row",
            left: self.shape(m).to_vec(),
            right: self.shape(v).to_vec(),
        })?;
        if self.shape(v) != [cols] {
            return Err(Error::Dimension {
                op: "add_row",
                left: self.shape(m).to_vec(),
                right: self.shape(v).to_vec(),
            });
        }
        let vv = self.value(v);
        let mut data = self.value(m).to_vec();
        for r in 0..rows {
            for (x, y) in data[r * cols..(r + 1) * cols].iter_mut().zip(vv) {
                *x += y;
            }
        }
        Ok(self.push(vec![rows, cols], data, Op::AddRow(m, v)))
    }

    /// Matrix product. Vectors act as a row (left operand) or a column
    /// (right operand); the corresponding output axis is dropped.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let mismatch = || Error::Dimension {
            op: "matmul",
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        };
        let (m, k, a_vec) = match self.shape(a) {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(mismatch()),
        };
        let (k2, n, b_vec) = match self.shape(b) {
            [k] => (*k, 1, true),
            [k, n] => (*k, *n, false),
            _ => return Err(mismatch()),
        };
        if k != k2 {
            return Err(mismatch());
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let arow = &av[i * k..(i + 1) * k];
            let crow = &mut data[i * n..(i + 1) * n];
            for (p, &x) in arow.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (c, &y) in crow.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                    *c += x * y;
                }
            }
        }
        let shape = match (a_vec, b_vec) {
            (false, false) => vec![m, n],
            (false, true) => vec![m],
            (true, false) => vec![n],
            (true, true) => vec![],
        };
        Ok(self.push(shape, data, Op::MatMul { a, b, m, k, n }))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = as_matrix(self.shape(a)).ok_or_else(|| Error::Dimension {
            op: "transpose",
            left: self.shape(a).to_vec(),
            right: vec![],
        })?;
        let av = self.value(a);
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                data[c * rows + r] = av[r * cols + c];
            }
        }
        Ok(self.push(vec![cols, rows], data, Op::Transpose { a, rows, cols }))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { x.exp_m1() }, Op::Elu(a))
    }

    /// Softmax over all elements.
    pub fn softmax(&mut self, a: Var) -> Var {
        let data = softmax(self.value(a));
        let shape = self.shape(a).to_vec();
        self.push(shape, data, Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let lse = log_sum_exp(self.value(a));
        self.unary(a, |x| x - lse, Op::LogSoftmax(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).iter().sum();
        self.push(vec![], vec![total], Op::Sum(a))
    }

    /// Concatenate the flattened inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p));
        }
        self.push(vec![data.len()], data, Op::Concat(parts.to_vec()))
    }

    /// `len` consecutive elements of the flattened input, as a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.value(a).len();
        if start + len > total {
            return Err(Error::Dimension {
                op: "slice",
                left: self.shape(a).to_vec(),
                right: vec![start, len],
            });
        }
        let data = self.value(a)[start..start + len].to_vec();
        Ok(self.push(vec![len], data, Op::Slice { a, start }))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(Error::Dimension {
                op: "reshape",
                left: self.shape(a).to_vec(),
                right: shape.to_vec(),
            });
        }
        let data = self.value(a).to_vec();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(a)))
    }

    /// Stack equally sized vectors into a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::Dimension {
                op: "stack_rows",
                left: vec![0],
                right: vec![],
            });
        };
        let cols = self.value(first).len();
        let mut data = Vec::with_capacity(cols * rows.len());
        for &r in rows {
            if self.shape(r) != [cols] {
                return Err(Error::Dimension {
                    op: "stack_rows",
                    left: vec![cols],
                    right: self.shape(r).to_vec(),
                });
            }
            data.extend_from_slice(self.value(r));
        }
        Ok(self.push(vec![rows.len(), cols], data, Op::StackRows(rows.to_vec())))
    }

    /// Select rows of a matrix (embedding lookup).
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (nrows, cols) = as_matrix(self.shape(a)).ok_or_else(|| Error::Dimension {
            op: "gather_rows",
            left: self.shape(a).to_vec(),
            right: vec![],
        })?;
        let av = self.value(a);
        let mut data = Vec::with_capacity(cols * rows.len());
        for &r in rows {
            if r >= nrows {
                return Err(Error::Dimension {
                    op: "gather_rows",
                    left: vec![nrows, cols],
                    right: vec![r],
                });
            }
            data.extend_from_slice(&av[r * cols..(r + 1) * cols]);
        }
        Ok(self.push(
            vec![rows.len(), cols],
            data,
            Op::GatherRows {
                a,
                rows: rows.to_vec(),
                cols,
            },
        ))
    }

    /// One row of a matrix as a vector.
    pub fn row(&mut self, a: Var, r: usize) -> Result<Var> {
        let m = self.gather_rows(a, &[r])?;
        let cols = self.shape(m)[1];
        self.nodes[m.0].shape = vec![cols];
        Ok(m)
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - rate)`.
    /// Identity outside training mode.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Argument(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !self.training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(a).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = self.value(a).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, data, Op::Dropout { a, mask }))
    }

    /// Valid 1-d convolution over the rows of `x` (`[m, d]`) followed by a
    /// max over positions. `filters` is `[window * d, f]`; the result has
    /// length `f`. Callers pad `x` to at least `window` rows.
    pub fn conv1d_maxpool(&mut self, x: Var, filters: Var, window: usize) -> Result<Var> {
        let mismatch = || Error::Dimension {
            op: "conv1d_maxpool",
            left: self.shape(x).to_vec(),
            right: self.shape(filters).to_vec(),
        };
        let (m, d) = as_matrix(self.shape(x)).ok_or_else(mismatch)?;
        let (span, f) = as_matrix(self.shape(filters)).ok_or_else(mismatch)?;
        if window == 0 || span != window * d || m < window {
            return Err(mismatch());
        }
        let xv = self.value(x);
        let wv = self.value(filters);
        let mut best = vec![f64::NEG_INFINITY; f];
        let mut argmax = vec![0; f];
        let mut out = vec![0.0; f];
        for p in 0..=m - window {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (q, &xq) in xv[p * d..p * d + span].iter().enumerate() {
                if xq == 0.0 {
                    continue;
                }
                for (o, &w) in out.iter_mut().zip(&wv[q * f..(q + 1) * f]) {
                    *o += xq * w;
                }
            }
            for j in 0..f {
                if out[j] > best[j] {
                    best[j] = out[j];
                    argmax[j] = p;
                }
            }
        }
        Ok(self.push(
            vec![f],
            best,
            Op::ConvMaxPool {
                x,
                w: filters,
                argmax,
                span,
                filters: f,
            },
        ))
    }

    /// `-log softmax(logits)[target]` as a scalar.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lv = self.value(logits);
        if target >= lv.len() {
            return Err(Error::Dimension {
                op: "cross_entropy",
                left: self.shape(logits).to_vec(),
                right: vec![target],
            });
        }
        let loss = log_sum_exp(lv) - lv[target];
        let probs = softmax(lv);
        Ok(self.push(
            vec![],
            vec![loss],
            Op::CrossEntropy {
                logits,
                target,
                probs,
            },
        ))
    }

    /// Row-wise log-softmax of a matrix.
    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = as_matrix(self.shape(a)).ok_or_else(|| Error::Dimension {
            op: "log_softmax_rows",
            left: self.shape(a).to_vec(),
            right: vec![],
        })?;
        let mut data = self.value(a).to_vec();
        for row in data.chunks_mut(cols.max(1)) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|x| *x -= lse);
        }
        Ok(self.push(vec![rows, cols], data, Op::LogSoftmaxRows { a, cols }))
    }

    /// Summed cross-entropy of each matrix row against its target column.
    pub fn cross_entropy_rows(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let mismatch = || Error::Dimension {
            op: "cross_entropy_rows",
            left: self.shape(logits).to_vec(),
            right: vec![targets.len()],
        };
        let (rows, cols) = as_matrix(self.shape(logits)).ok_or_else(mismatch)?;
        if rows != targets.len() || targets.iter().any(|&t| t >= cols) {
            return Err(mismatch());
        }
        let lv = self.value(logits);
        let mut loss = 0.0;
        let mut probs = Vec::with_capacity(lv.len());
        for (row, &t) in lv.chunks(cols).zip(targets) {
            loss += log_sum_exp(row) - row[t];
            probs.extend(softmax(row));
        }
        Ok(self.push(
            vec![],
            vec![loss],
            Op::CrossEntropyRows {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    pub(super) fn propagate(&self, i: usize, grad: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = match &self.nodes[i].value {
            super::Value::Owned(v) => v.as_slice(),
            super::Value::Param(_) => unreachable!("parameters are leaves"),
        };
        let len = |v: Var| self.value(v).len();
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) => {
                for (&v, sign) in [(a, 1.0), (b, 1.0)] {
                    let g = accumulate(grads, v, len(v));
                    g.iter_mut().zip(grad).for_each(|(x, y)| *x += sign * y);
                }
            }
            Op::Sub(a, b) => {
                for (&v, sign) in [(a, 1.0), (b, -1.0)] {
                    let g = accumulate(grads, v, len(v));
                    g.iter_mut().zip(grad).for_each(|(x, y)| *x += sign * y);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let g = accumulate(grads, *a, av.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] * bv[j];
                }
                let g = accumulate(grads, *b, bv.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] * av[j];
                }
            }
            Op::Scale(a, f) => {
                let g = accumulate(grads, *a, grad.len());
                g.iter_mut().zip(grad).for_each(|(x, y)| *x += f * y);
            }
            Op::AddRow(m, v) => {
                let cols = len(*v);
                let g = accumulate(grads, *m, grad.len());
                g.iter_mut().zip(grad).for_each(|(x, y)| *x += y);
                let g = accumulate(grads, *v, cols);
                for row in grad.chunks(cols) {
                    g.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                }
            }
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let (av, bv) = (self.value(*a), self.value(*b));
                {
                    let ga = accumulate(grads, *a, m * k);
                    for r in 0..m {
                        let grow = &grad[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            ga[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                let gb = accumulate(grads, *b, k * n);
                for r in 0..m {
                    let grow = &grad[r * n..(r + 1) * n];
                    for p in 0..k {
                        let x = av[r * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        for (g, y) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *g += x * y;
                        }
                    }
                }
            }
            Op::Transpose { a, rows, cols } => {
                let g = accumulate(grads, *a, rows * cols);
                for r in 0..*rows {
                    for c in 0..*cols {
                        g[r * cols + c] += grad[c * rows + r];
                    }
                }
            }
            Op::Tanh(a) => {
                let g = accumulate(grads, *a, grad.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] * (1.0 - out[j] * out[j]);
                }
            }
            Op::Sigmoid(a) => {
                let g = accumulate(grads, *a, grad.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] * out[j] * (1.0 - out[j]);
                }
            }
            Op::Elu(a) => {
                let x = self.value(*a);
                let g = accumulate(grads, *a, grad.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] * if x[j] > 0.0 { 1.0 } else { out[j] + 1.0 };
                }
            }
            Op::Softmax(a) => {
                let dot: f64 = grad.iter().zip(out).map(|(g, y)| g * y).sum();
                let g = accumulate(grads, *a, grad.len());
                for j in 0..grad.len() {
                    g[j] += out[j] * (grad[j] - dot);
                }
            }
            Op::LogSoftmax(a) => {
                let total: f64 = grad.iter().sum();
                let g = accumulate(grads, *a, grad.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] - out[j].exp() * total;
                }
            }
            Op::Sum(a) => {
                let g = accumulate(grads, *a, len(*a));
                g.iter_mut().for_each(|x| *x += grad[0]);
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = len(p);
                    let g = accumulate(grads, p, n);
                    g.iter_mut()
                        .zip(&grad[offset..offset + n])
                        .for_each(|(x, y)| *x += y);
                    offset += n;
                }
            }
            Op::Slice { a, start } => {
                let g = accumulate(grads, *a, len(*a));
                g[*start..*start + grad.len()]
                    .iter_mut()
                    .zip(grad)
                    .for_each(|(x, y)| *x += y);
            }
            Op::Reshape(a) => {
                let g = accumulate(grads, *a, grad.len());
                g.iter_mut().zip(grad).for_each(|(x, y)| *x += y);
            }
            Op::StackRows(rows) => {
                let cols = grad.len() / rows.len();
                for (r, &v) in rows.iter().enumerate() {
                    let g = accumulate(grads, v, cols);
                    g.iter_mut()
                        .zip(&grad[r * cols..(r + 1) * cols])
                        .for_each(|(x, y)| *x += y);
                }
            }
            Op::GatherRows { a, rows, cols } => {
                let g = accumulate(grads, *a, len(*a));
                for (k, &r) in rows.iter().enumerate() {
                    g[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&grad[k * cols..(k + 1) * cols])
                        .for_each(|(x, y)| *x += y);
                }
            }
            Op::Dropout { a, mask } => {
                let g = accumulate(grads, *a, grad.len());
                for j in 0..grad.len() {
                    g[j] += grad[j] * mask[j];
                }
            }
            Op::ConvMaxPool {
                x,
                w,
                argmax,
                span,
                filters,
            } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let d = self.shape(*x)[1];
                {
                    let gw = accumulate(grads, *w, span * filters);
                    for j in 0..*filters {
                        let base = argmax[j] * d;
                        for q in 0..*span {
                            gw[q * filters + j] += grad[j] * xv[base + q];
                        }
                    }
                }
                let gx = accumulate(grads, *x, xv.len());
                for j in 0..*filters {
                    let base = argmax[j] * d;
                    for q in 0..*span {
                        gx[base + q] += grad[j] * wv[q * filters + j];
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                target,
                probs,
            } => {
                let g = accumulate(grads, *logits, probs.len());
                for j in 0..probs.len() {
                    let onehot = if j == *target { 1.0 } else { 0.0 };
                    g[j] += grad[0] * (probs[j] - onehot);
                }
            }
            Op::LogSoftmaxRows { a, cols } => {
                let g = accumulate(grads, *a, grad.len());
                for ((gr, orow), grow) in g
                    .chunks_mut(*cols)
                    .zip(out.chunks(*cols))
                    .zip(grad.chunks(*cols))
                {
                    let total: f64 = grow.iter().sum();
                    for j in 0..*cols {
                        gr[j] += grow[j] - orow[j].exp() * total;
                    }
                }
            }
            Op::CrossEntropyRows {
                logits,
                targets,
                probs,
            } => {
                let cols = probs.len() / targets.len();
                let g = accumulate(grads, *logits, probs.len());
                for (r, &t) in targets.iter().enumerate() {
                    for j in 0..cols {
                        let onehot = if j == t { 1.0 } else { 0.0 };
                        g[r * cols + j] += grad[0] * (probs[r * cols + j] - onehot);
                    }
                }
            }
        }
    }
}
