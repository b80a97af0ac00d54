//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! A [`Tape`] records primitive operations in topological order; every
//! node keeps its output value so the backward pass can replay the trace
//! in reverse and produce exact gradients. Tensors produced by tape
//! methods carry a [`NodeId`] tagging both the tape and the position,
//! which lets cross-tape misuse fail loudly instead of silently mixing
//! traces. One backward pass is allowed per trace.

use std::cell::{Cell, RefCell};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::TensorError;
use crate::tensor::{self, Activation, ConvMode, Tensor};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Position of a value inside one specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    Add { a: usize, b: usize },
    Hadamard { a: usize, b: usize },
    AddRow { x: usize, row: usize },
    Activation { x: usize, kind: Activation },
    Conv1d {
        x: usize,
        kernel: usize,
        bias: usize,
        mode: ConvMode,
        seg_len: usize,
    },
    PoolMean { x: usize, seg_len: usize },
    PoolLast { x: usize, seg_len: usize },
    Sum { x: usize },
    MseLoss { pred: usize, target: Tensor },
    SoftmaxCrossEntropy { logits: usize, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients of one scalar loss with respect to every traced node.
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a traced tensor, if it participated in the loss.
    pub fn get(&self, t: &Tensor) -> Option<&Tensor> {
        let node = t.node()?;
        if node.tape != self.tape {
            return None;
        }
        self.grads.get(node.index)?.as_ref()
    }
}

/// Recording context for one forward trace.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: Tensor) -> Tensor {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(Node {
            op,
            value: value.clone().detach(),
        });
        value.with_node(NodeId {
            tape: self.id,
            index,
        })
    }

    /// Register a tensor as a differentiable input of this trace.
    pub fn leaf(&self, t: &Tensor) -> Tensor {
        self.push(Op::Leaf, t.clone().detach())
    }

    /// Node index of `t` on this tape; untraced tensors are lifted to
    /// constant leaves, tensors from another tape are an error.
    fn operand(&self, op: &'static str, t: &Tensor) -> Result<usize, TensorError> {
        match t.node() {
            Some(node) if node.tape == self.id => Ok(node.index),
            Some(_) => Err(TensorError::NotOnTape { op }),
            None => {
                let leaf = self.leaf(t);
                Ok(leaf.node().expect("fresh leaf carries a node").index)
            }
        }
    }

    pub fn matmul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        let value = tensor::matmul(a, b)?;
        let (ia, ib) = (self.operand("matmul", a)?, self.operand("matmul", b)?);
        Ok(self.push(Op::MatMul { a: ia, b: ib }, value))
    }

    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        let value = tensor::add(a, b)?;
        let (ia, ib) = (self.operand("add", a)?, self.operand("add", b)?);
        Ok(self.push(Op::Add { a: ia, b: ib }, value))
    }

    pub fn hadamard(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        let value = tensor::hadamard(a, b)?;
        let (ia, ib) = (self.operand("hadamard", a)?, self.operand("hadamard", b)?);
        Ok(self.push(Op::Hadamard { a: ia, b: ib }, value))
    }

    pub fn add_row(&self, x: &Tensor, row: &Tensor) -> Result<Tensor, TensorError> {
        let value = tensor::add_row(x, row)?;
        let (ix, ir) = (self.operand("add_row", x)?, self.operand("add_row", row)?);
        Ok(self.push(Op::AddRow { x: ix, row: ir }, value))
    }

    pub fn activation(&self, kind: Activation, x: &Tensor) -> Result<Tensor, TensorError> {
        let value = tensor::apply_activation(kind, x)?;
        let ix = self.operand("apply_activation", x)?;
        Ok(self.push(Op::Activation { x: ix, kind }, value))
    }

    /// Same-padded convolution applied independently per `seg_len`-row segment.
    pub fn conv1d_seg(
        &self,
        x: &Tensor,
        kernel: &Tensor,
        bias: &Tensor,
        mode: ConvMode,
        seg_len: usize,
    ) -> Result<Tensor, TensorError> {
        let value = tensor::conv1d_seg(x, kernel, bias, mode, seg_len)?;
        let ix = self.operand("conv1d", x)?;
        let ik = self.operand("conv1d", kernel)?;
        let ib = self.operand("conv1d", bias)?;
        Ok(self.push(
            Op::Conv1d {
                x: ix,
                kernel: ik,
                bias: ib,
                mode,
                seg_len,
            },
            value,
        ))
    }

    pub fn conv1d(
        &self,
        x: &Tensor,
        kernel: &Tensor,
        bias: &Tensor,
        mode: ConvMode,
    ) -> Result<Tensor, TensorError> {
        let rows = x.rows();
        self.conv1d_seg(x, kernel, bias, mode, rows)
    }

    /// Mean over each `seg_len`-row segment.
    pub fn pool_mean_seg(&self, x: &Tensor, seg_len: usize) -> Result<Tensor, TensorError> {
        let value = tensor::mean_rows_seg(x, seg_len)?;
        let ix = self.operand("mean_rows", x)?;
        Ok(self.push(Op::PoolMean { x: ix, seg_len }, value))
    }

    /// Last row of each `seg_len`-row segment.
    pub fn pool_last_seg(&self, x: &Tensor, seg_len: usize) -> Result<Tensor, TensorError> {
        let value = tensor::last_row_seg(x, seg_len)?;
        let ix = self.operand("last_row", x)?;
        Ok(self.push(Op::PoolLast { x: ix, seg_len }, value))
    }

    pub fn sum(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        let value = tensor::sum(x);
        let ix = self.operand("sum", x)?;
        Ok(self.push(Op::Sum { x: ix }, value))
    }

    /// Mean squared error against a constant target of the same shape.
    pub fn mse_loss(&self, pred: &Tensor, target: &Tensor) -> Result<Tensor, TensorError> {
        if pred.shape() != target.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mse_loss",
                left: pred.shape().to_vec(),
                right: target.shape().to_vec(),
            });
        }
        let n = pred.numel() as f64;
        let sse: f64 = pred
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let ip = self.operand("mse_loss", pred)?;
        Ok(self.push(
            Op::MseLoss {
                pred: ip,
                target: target.clone().detach(),
            },
            Tensor::scalar(sse / n),
        ))
    }

    /// Mean softmax cross-entropy of row logits against constant class ids.
    pub fn softmax_cross_entropy(
        &self,
        logits: &Tensor,
        labels: &[usize],
    ) -> Result<Tensor, TensorError> {
        let (rows, cols) = (logits.rows(), logits.cols());
        if labels.len() != rows {
            return Err(TensorError::BadParameter {
                op: "softmax_cross_entropy",
                what: format!("{} labels for {} logit rows", labels.len(), rows),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= cols) {
            return Err(TensorError::BadParameter {
                op: "softmax_cross_entropy",
                what: format!("class id {bad} out of range for {cols} classes"),
            });
        }
        let mut total = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = &logits.data()[i * cols..(i + 1) * cols];
            total += log_sum_exp(row) - row[label];
        }
        let il = self.operand("softmax_cross_entropy", logits)?;
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits: il,
                labels: labels.to_vec(),
            },
            Tensor::scalar(total / rows as f64),
        ))
    }

    /// Exact reverse-mode gradients of a scalar loss for every traced node.
    pub fn backward(&self, loss: &Tensor) -> Result<Gradients, TensorError> {
        let loss_node = match loss.node() {
            Some(node) if node.tape == self.id => node,
            _ => return Err(TensorError::NotOnTape { op: "backward" }),
        };
        if loss.numel() != 1 {
            return Err(TensorError::NotScalarLoss {
                shape: loss.shape().to_vec(),
            });
        }
        if self.consumed.replace(true) {
            return Err(TensorError::TapeConsumed);
        }
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss_node.index] = Some(Tensor::scalar(1.0));

        for i in (0..=loss_node.index).rev() {
            // split so the node's own gradient stays readable while parent
            // slots (always earlier on the tape) are written
            let (before, rest) = grads.split_at_mut(i);
            let g = match rest[0].as_ref() {
                Some(g) => g,
                None => continue,
            };
            let node = &nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    accumulate(&mut before[*a], tensor::matmul_nt(g, &nodes[*b].value)?);
                    accumulate(&mut before[*b], tensor::matmul_tn(&nodes[*a].value, g)?);
                }
                Op::Add { a, b } => {
                    accumulate(&mut before[*a], g.clone());
                    accumulate(&mut before[*b], g.clone());
                }
                Op::Hadamard { a, b } => {
                    accumulate(&mut before[*a], tensor::hadamard(g, &nodes[*b].value)?);
                    accumulate(&mut before[*b], tensor::hadamard(g, &nodes[*a].value)?);
                }
                Op::AddRow { x, row } => {
                    accumulate(&mut before[*x], g.clone());
                    let cols = g.cols();
                    let mut colsum = vec![0.0; cols];
                    for r in 0..g.rows() {
                        for c in 0..cols {
                            colsum[c] += g.get(r, c);
                        }
                    }
                    accumulate(&mut before[*row], Tensor::vector(colsum)?);
                }
                Op::Activation { x, kind } => {
                    let xv = &nodes[*x].value;
                    let data: Vec<f64> = xv
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&xi, &gi)| gi * kind.deriv(xi))
                        .collect();
                    accumulate(&mut before[*x], Tensor::new(xv.shape().to_vec(), data)?);
                }
                Op::Conv1d {
                    x,
                    kernel,
                    bias,
                    mode,
                    seg_len,
                } => {
                    let (dx, dk, db) = conv1d_backward(
                        &nodes[*x].value,
                        &nodes[*kernel].value,
                        g,
                        *mode,
                        *seg_len,
                    )?;
                    accumulate(&mut before[*x], dx);
                    accumulate(&mut before[*kernel], dk);
                    accumulate(&mut before[*bias], db);
                }
                Op::PoolMean { x, seg_len } => {
                    let xv = &nodes[*x].value;
                    let cols = xv.cols();
                    let inv = 1.0 / *seg_len as f64;
                    let mut dx = vec![0.0; xv.numel()];
                    for s in 0..g.rows() {
                        for t in 0..*seg_len {
                            for c in 0..cols {
                                dx[(s * seg_len + t) * cols + c] = g.get(s, c) * inv;
                            }
                        }
                    }
                    accumulate(&mut before[*x], Tensor::matrix(xv.rows(), cols, dx)?);
                }
                Op::PoolLast { x, seg_len } => {
                    let xv = &nodes[*x].value;
                    let cols = xv.cols();
                    let mut dx = vec![0.0; xv.numel()];
                    for s in 0..g.rows() {
                        for c in 0..cols {
                            dx[(s * seg_len + seg_len - 1) * cols + c] = g.get(s, c);
                        }
                    }
                    accumulate(&mut before[*x], Tensor::matrix(xv.rows(), cols, dx)?);
                }
                Op::Sum { x } => {
                    let xv = &nodes[*x].value;
                    let gi = g.item();
                    accumulate(
                        &mut before[*x],
                        Tensor::new(xv.shape().to_vec(), vec![gi; xv.numel()])?,
                    );
                }
                Op::MseLoss { pred, target } => {
                    let pv = &nodes[*pred].value;
                    let scale = 2.0 * g.item() / pv.numel() as f64;
                    let data: Vec<f64> = pv
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(p, t)| scale * (p - t))
                        .collect();
                    accumulate(&mut before[*pred], Tensor::new(pv.shape().to_vec(), data)?);
                }
                Op::SoftmaxCrossEntropy { logits, labels } => {
                    let lv = &nodes[*logits].value;
                    let (rows, cols) = (lv.rows(), lv.cols());
                    let scale = g.item() / rows as f64;
                    let mut data = vec![0.0; rows * cols];
                    for (r, &label) in labels.iter().enumerate() {
                        let row = &lv.data()[r * cols..(r + 1) * cols];
                        let lse = log_sum_exp(row);
                        for c in 0..cols {
                            let soft = (row[c] - lse).exp();
                            let indicator = if c == label { 1.0 } else { 0.0 };
                            data[r * cols + c] = scale * (soft - indicator);
                        }
                    }
                    accumulate(&mut before[*logits], Tensor::matrix(rows, cols, data)?);
                }
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn accumulate(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(existing) => {
            debug_assert_eq!(existing.shape(), delta.shape());
            for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                *e += d;
            }
        }
        None => *slot = Some(delta),
    }
}

/// Gradients of the segmented same-padded correlation w.r.t. input, kernel
/// and bias.
fn conv1d_backward(
    x: &Tensor,
    kernel: &Tensor,
    g: &Tensor,
    mode: ConvMode,
    seg_len: usize,
) -> Result<(Tensor, Tensor, Tensor), TensorError> {
    let rows = x.rows();
    let d_in = x.cols();
    let k = kernel.shape()[0];
    let d_out = g.cols();
    let (pad_left, _) = tensor::same_padding(k);
    let segs = rows / seg_len;

    let mut dx = vec![0.0; rows * d_in];
    let mut dk = vec![0.0; kernel.numel()];
    let mut db = vec![0.0; d_out];

    for s in 0..segs {
        let base = s * seg_len;
        for t in 0..seg_len {
            let grow = &g.data()[(base + t) * d_out..(base + t + 1) * d_out];
            for (c, gv) in grow.iter().enumerate() {
                db[c] += gv;
            }
            for j in 0..k {
                let src = t + j;
                if src < pad_left || src - pad_left >= seg_len {
                    continue;
                }
                let xi = base + src - pad_left;
                let xrow = &x.data()[xi * d_in..(xi + 1) * d_in];
                match mode {
                    ConvMode::Depthwise => {
                        let krow = &kernel.data()[j * d_in..(j + 1) * d_in];
                        for d in 0..d_in {
                            dx[xi * d_in + d] += krow[d] * grow[d];
                            dk[j * d_in + d] += xrow[d] * grow[d];
                        }
                    }
                    ConvMode::Full => {
                        for di in 0..d_in {
                            let koff = (j * d_in + di) * d_out;
                            let krow = &kernel.data()[koff..koff + d_out];
                            let mut acc = 0.0;
                            for c in 0..d_out {
                                acc += krow[c] * grow[c];
                                dk[koff + c] += xrow[di] * grow[c];
                            }
                            dx[xi * d_in + di] += acc;
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::matrix(rows, d_in, dx)?,
        Tensor::new(kernel.shape().to_vec(), dk)?,
        Tensor::vector(db)?,
    ))
}
