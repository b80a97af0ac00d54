//! Dense row-major f64 tensors and the pure numeric kernels.
//!
//! Every operation here is untraced: outputs never carry a tape node.
//! The tape in [`crate::tape`] calls these same kernels and attaches
//! bookkeeping, so traced and untraced paths share one numeric code path.

use crate::error::TensorError;
use crate::tape::NodeId;

/// Dense tensor of 64-bit floats in row-major order.
///
/// `node` links the value into a differentiation tape when the tensor was
/// produced by a traced operation; plain construction and the free
/// functions in this module leave it empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    node: Option<NodeId>,
}

impl Tensor {
    /// Build a tensor from an explicit shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor, TensorError> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || numel != data.len() {
            return Err(TensorError::BadParameter {
                op: "Tensor::new",
                what: format!(
                    "shape {:?} does not describe {} data elements",
                    shape,
                    data.len()
                ),
            });
        }
        Ok(Tensor {
            shape,
            data,
            node: None,
        })
    }

    /// Rank-2 constructor.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor, TensorError> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Rank-1 constructor.
    pub fn vector(data: Vec<f64>) -> Result<Tensor, TensorError> {
        Tensor::new(vec![data.len()], data)
    }

    /// 1x1 tensor holding one value.
    pub fn scalar(x: f64) -> Tensor {
        Tensor {
            shape: vec![1, 1],
            data: vec![x],
            node: None,
        }
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let numel: usize = shape.iter().product();
        assert!(!shape.is_empty() && !shape.contains(&0), "zeros: degenerate shape");
        Tensor {
            shape,
            data: vec![0.0; numel],
            node: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Row count; the tensor must be rank 2.
    pub fn rows(&self) -> usize {
        assert!(self.shape.len() == 2, "rows: rank-2 tensor required");
        self.shape[0]
    }

    /// Column count; the tensor must be rank 2.
    pub fn cols(&self) -> usize {
        assert!(self.shape.len() == 2, "cols: rank-2 tensor required");
        self.shape[1]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// In-place access, e.g. for optimizer updates. A tape stores its own
    /// snapshot of every recorded value, so mutating a tensor after tracing
    /// affects later uses of this handle only, never an existing recording.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Element of a rank-2 tensor.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(self.shape.len() == 2, "get: rank-2 tensor required");
        self.data[r * self.shape[1] + c]
    }

    /// The single value of a 1-element tensor.
    pub fn item(&self) -> f64 {
        assert!(self.data.len() == 1, "item: tensor has more than one element");
        self.data[0]
    }

    pub fn node(&self) -> Option<NodeId> {
        self.node
    }

    pub(crate) fn with_node(mut self, node: NodeId) -> Tensor {
        self.node = Some(node);
        self
    }

    /// Drop the tape link, keeping the value.
    pub fn detach(mut self) -> Tensor {
        self.node = None;
        self
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Elementwise activation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    HardSigmoid,
    Relu,
    Gelu,
    Tanh,
}

// Saturation clamps for the sigmoid. Four epsilons of headroom at each end
// keep g*r + r strictly between r and 2r through every intermediate
// rounding (two for the combination, one for the ratio); a tighter clamp
// lets deep saturation round the modulation factor onto the closed ends of
// its (1, 2) band. Only |x| > ~36 is affected, where exp() has saturated
// anyway.
const SIGMOID_FLOOR: f64 = 4.0 * f64::EPSILON;
const SIGMOID_CEIL: f64 = 1.0 - 4.0 * f64::EPSILON;

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

impl Activation {
    /// Scalar value of the activation.
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                s.clamp(SIGMOID_FLOOR, SIGMOID_CEIL)
            }
            Activation::HardSigmoid => (0.2 * x + 0.5).clamp(0.0, 1.0),
            Activation::Relu => x.max(0.0),
            // Exact error-function form.
            Activation::Gelu => x * std_normal_cdf(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Scalar derivative with respect to the input.
    ///
    /// Kink conventions: relu'(0) = 0; hard_sigmoid' = 0 outside the open
    /// linear region (-2.5, 2.5).
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.value(x);
                s * (1.0 - s)
            }
            Activation::HardSigmoid => {
                if x > -2.5 && x < 2.5 {
                    0.2
                } else {
                    0.0
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => std_normal_cdf(x) + x * std_normal_pdf(x),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Convolution channel mixing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// One independent k-tap kernel per channel; kernel shape `[k, D]`.
    Depthwise,
    /// Full channel mixing; kernel shape `[k, D_in, D_out]`.
    Full,
}

fn require_rank2(op: &'static str, t: &Tensor) -> Result<(usize, usize), TensorError> {
    if t.shape.len() != 2 {
        return Err(TensorError::BadParameter {
            op,
            what: format!("rank-2 tensor required, got shape {:?}", t.shape),
        });
    }
    Ok((t.shape[0], t.shape[1]))
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), TensorError> {
    if a.shape != b.shape {
        return Err(TensorError::ShapeMismatch {
            op,
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    Ok(())
}

/// Matrix product of an `m x k` and a `k x n` tensor.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (m, ka) = require_rank2("matmul", a)?;
    let (kb, n) = require_rank2("matmul", b)?;
    if ka != kb {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..ka {
            let av = a.data[i * ka + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(m, n, out)
}

/// `a * b^T` for `a: m x n`, `b: k x n`.
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (m, n) = require_rank2("matmul_nt", a)?;
    let (k, nb) = require_rank2("matmul_nt", b)?;
    if n != nb {
        return Err(TensorError::ShapeMismatch {
            op: "matmul_nt",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a.data[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b.data[j * n..(j + 1) * n];
            out[i * k + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Tensor::matrix(m, k, out)
}

/// `a^T * b` for `a: m x k`, `b: m x n`.
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (ma, k) = require_rank2("matmul_tn", a)?;
    let (mb, n) = require_rank2("matmul_tn", b)?;
    if ma != mb {
        return Err(TensorError::ShapeMismatch {
            op: "matmul_tn",
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let mut out = vec![0.0; k * n];
    for i in 0..ma {
        let arow = &a.data[i * k..(i + 1) * k];
        let brow = &b.data[i * n..(i + 1) * n];
        for (j, av) in arow.iter().enumerate() {
            if *av == 0.0 {
                continue;
            }
            let orow = &mut out[j * n..(j + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(k, n, out)
}

/// Elementwise (Hadamard) product of equal-shaped tensors.
pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    same_shape("hadamard", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape.clone(), data)
}

/// Elementwise sum of equal-shaped tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    same_shape("add", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape.clone(), data)
}

/// Add a rank-1 row vector to every row of a rank-2 tensor.
pub fn add_row(x: &Tensor, row: &Tensor) -> Result<Tensor, TensorError> {
    let (r, c) = require_rank2("add_row", x)?;
    if row.shape != [c] {
        return Err(TensorError::ShapeMismatch {
            op: "add_row",
            left: x.shape.clone(),
            right: row.shape.clone(),
        });
    }
    let mut data = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            data.push(x.data[i * c + j] + row.data[j]);
        }
    }
    Tensor::matrix(r, c, data)
}

/// Elementwise activation.
pub fn apply_activation(kind: Activation, x: &Tensor) -> Result<Tensor, TensorError> {
    let data = x.data.iter().map(|&v| kind.value(v)).collect();
    Tensor::new(x.shape.clone(), data)
}

/// Left/right zero padding for same-length output; even k pads one extra
/// sample on the left.
pub(crate) fn same_padding(k: usize) -> (usize, usize) {
    (k / 2, (k - 1) / 2)
}

fn check_conv_args(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    mode: ConvMode,
) -> Result<(usize, usize, usize), TensorError> {
    let (_, d_in) = require_rank2("conv1d", x)?;
    let (k, d_out) = match mode {
        ConvMode::Depthwise => {
            if kernel.shape.len() != 2 || kernel.shape[1] != d_in {
                return Err(TensorError::ShapeMismatch {
                    op: "conv1d",
                    left: x.shape.clone(),
                    right: kernel.shape.clone(),
                });
            }
            (kernel.shape[0], d_in)
        }
        ConvMode::Full => {
            if kernel.shape.len() != 3 || kernel.shape[1] != d_in {
                return Err(TensorError::ShapeMismatch {
                    op: "conv1d",
                    left: x.shape.clone(),
                    right: kernel.shape.clone(),
                });
            }
            (kernel.shape[0], kernel.shape[2])
        }
    };
    if k == 0 {
        return Err(TensorError::BadParameter {
            op: "conv1d",
            what: "kernel size must be positive".to_string(),
        });
    }
    if bias.shape != [d_out] {
        return Err(TensorError::ShapeMismatch {
            op: "conv1d",
            left: kernel.shape.clone(),
            right: bias.shape.clone(),
        });
    }
    Ok((k, d_in, d_out))
}

/// Same-padded correlation along the row axis, applied independently to
/// each consecutive segment of `seg_len` rows.
///
/// A plain `L x D` input is the single-segment case; batched inputs stack
/// segments so the convolution never crosses a segment boundary.
pub(crate) fn conv1d_seg(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    mode: ConvMode,
    seg_len: usize,
) -> Result<Tensor, TensorError> {
    let (k, d_in, d_out) = check_conv_args(x, kernel, bias, mode)?;
    let rows = x.rows();
    if seg_len == 0 || rows % seg_len != 0 {
        return Err(TensorError::BadParameter {
            op: "conv1d",
            what: format!("{rows} rows do not divide into segments of {seg_len}"),
        });
    }
    let (pad_left, _) = same_padding(k);
    let segs = rows / seg_len;
    let mut out = vec![0.0; rows * d_out];
    for s in 0..segs {
        let base = s * seg_len;
        for t in 0..seg_len {
            let orow = &mut out[(base + t) * d_out..(base + t + 1) * d_out];
            orow.copy_from_slice(bias.data());
            for j in 0..k {
                // in-segment source index t + j - pad_left, zero outside
                let src = t + j;
                if src < pad_left || src - pad_left >= seg_len {
                    continue;
                }
                let xrow = &x.data[(base + src - pad_left) * d_in..(base + src - pad_left + 1) * d_in];
                match mode {
                    ConvMode::Depthwise => {
                        let krow = &kernel.data[j * d_in..(j + 1) * d_in];
                        for d in 0..d_in {
                            orow[d] += krow[d] * xrow[d];
                        }
                    }
                    ConvMode::Full => {
                        for (di, xv) in xrow.iter().enumerate() {
                            if *xv == 0.0 {
                                continue;
                            }
                            let krow = &kernel.data
                                [(j * d_in + di) * d_out..(j * d_in + di + 1) * d_out];
                            for (o, kv) in orow.iter_mut().zip(krow) {
                                *o += xv * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::matrix(rows, d_out, out)
}

/// Same-padded 1-D convolution along the row axis of an `L x D` tensor.
pub fn conv1d(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    mode: ConvMode,
) -> Result<Tensor, TensorError> {
    let rows = require_rank2("conv1d", x)?.0;
    conv1d_seg(x, kernel, bias, mode, rows)
}

/// Mean over each consecutive segment of `seg_len` rows; `(B*L) x D -> B x D`.
pub(crate) fn mean_rows_seg(x: &Tensor, seg_len: usize) -> Result<Tensor, TensorError> {
    let (rows, cols) = require_rank2("mean_rows", x)?;
    if seg_len == 0 || rows % seg_len != 0 {
        return Err(TensorError::BadParameter {
            op: "mean_rows",
            what: format!("{rows} rows do not divide into segments of {seg_len}"),
        });
    }
    let segs = rows / seg_len;
    let mut out = vec![0.0; segs * cols];
    for s in 0..segs {
        for t in 0..seg_len {
            let xrow = &x.data[(s * seg_len + t) * cols..(s * seg_len + t + 1) * cols];
            let orow = &mut out[s * cols..(s + 1) * cols];
            for (o, v) in orow.iter_mut().zip(xrow) {
                *o += v;
            }
        }
    }
    let inv = 1.0 / seg_len as f64;
    for v in &mut out {
        *v *= inv;
    }
    Tensor::matrix(segs, cols, out)
}

/// Last row of each consecutive segment of `seg_len` rows.
pub(crate) fn last_row_seg(x: &Tensor, seg_len: usize) -> Result<Tensor, TensorError> {
    let (rows, cols) = require_rank2("last_row", x)?;
    if seg_len == 0 || rows % seg_len != 0 {
        return Err(TensorError::BadParameter {
            op: "last_row",
            what: format!("{rows} rows do not divide into segments of {seg_len}"),
        });
    }
    let segs = rows / seg_len;
    let mut out = Vec::with_capacity(segs * cols);
    for s in 0..segs {
        let last = (s * seg_len + seg_len - 1) * cols;
        out.extend_from_slice(&x.data[last..last + cols]);
    }
    Tensor::matrix(segs, cols, out)
}

/// Column mean of a rank-2 tensor, as a `1 x D` row.
pub fn mean_rows(x: &Tensor) -> Result<Tensor, TensorError> {
    let rows = require_rank2("mean_rows", x)?.0;
    mean_rows_seg(x, rows)
}

/// Last row of a rank-2 tensor, as a `1 x D` row.
pub fn last_row(x: &Tensor) -> Result<Tensor, TensorError> {
    let rows = require_rank2("last_row", x)?.0;
    last_row_seg(x, rows)
}

/// Sum of all elements, as a 1x1 tensor.
pub fn sum(x: &Tensor) -> Tensor {
    Tensor::scalar(x.data.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_hand_case() {
        let a = t(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = t(2, 1, &[5.0, 6.0]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_identity_and_zero() {
        let i2 = t(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let a = t(2, 3, &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0]);
        assert_eq!(matmul(&i2, &a).unwrap(), a);
        let z = Tensor::zeros(vec![2, 2]);
        assert!(matmul(&z, &a).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = t(2, 3, &[0.0; 6]);
        let b = t(2, 2, &[0.0; 4]);
        match matmul(&a, &b) {
            Err(TensorError::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn transposed_products_match_plain_matmul() {
        let a = t(2, 3, &[1.0, 2.0, -1.0, 0.5, 3.0, 2.5]);
        let b = t(4, 3, &[1.0, 0.0, 2.0, -1.5, 1.0, 0.25, 2.0, -2.0, 0.5, 1.0, 1.0, 1.0]);
        // a * b^T via explicit transpose
        let bt = t(3, 4, &{
            let mut v = vec![0.0; 12];
            for r in 0..4 {
                for c in 0..3 {
                    v[c * 4 + r] = b.get(r, c);
                }
            }
            v
        });
        assert_eq!(matmul_nt(&a, &b).unwrap(), matmul(&a, &bt).unwrap());
        let c = t(2, 4, &[1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 1.0, 2.0]);
        let at = t(3, 2, &{
            let mut v = vec![0.0; 6];
            for r in 0..2 {
                for col in 0..3 {
                    v[col * 2 + r] = a.get(r, col);
                }
            }
            v
        });
        assert_eq!(matmul_tn(&a, &c).unwrap(), matmul(&at, &c).unwrap());
    }

    #[test]
    fn hadamard_cases() {
        let a = t(1, 2, &[1.0, 2.0]);
        let b = t(1, 2, &[3.0, 4.0]);
        assert_eq!(hadamard(&a, &b).unwrap().data(), &[3.0, 8.0]);
        let ones = t(1, 2, &[1.0, 1.0]);
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        let zeros = Tensor::zeros(vec![1, 2]);
        assert_eq!(hadamard(&a, &zeros).unwrap(), zeros);
        assert!(hadamard(&a, &t(2, 1, &[1.0, 1.0])).is_err());
    }

    #[test]
    fn conv1d_hand_cases() {
        let x = t(3, 1, &[1.0, 2.0, 3.0]);
        let zero_bias = Tensor::vector(vec![0.0]).unwrap();
        let boxcar = t(3, 1, &[1.0, 1.0, 1.0]);
        let y = conv1d(&x, &boxcar, &zero_bias, ConvMode::Depthwise).unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
        let edge = t(3, 1, &[1.0, 0.0, -1.0]);
        let y = conv1d(&x, &edge, &zero_bias, ConvMode::Depthwise).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0, 2.0]);
    }

    #[test]
    fn conv1d_impulse_is_identity() {
        let x = t(4, 2, &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0]);
        let impulse = t(3, 2, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let zero_bias = Tensor::vector(vec![0.0, 0.0]).unwrap();
        assert_eq!(conv1d(&x, &impulse, &zero_bias, ConvMode::Depthwise).unwrap(), x);
    }

    #[test]
    fn conv1d_zero_kernel_yields_bias() {
        let x = t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let zero_k = Tensor::zeros(vec![3, 2]);
        let bias = Tensor::vector(vec![0.5, -0.5]).unwrap();
        let y = conv1d(&x, &zero_k, &bias, ConvMode::Depthwise).unwrap();
        for r in 0..3 {
            assert_eq!(y.get(r, 0), 0.5);
            assert_eq!(y.get(r, 1), -0.5);
        }
    }

    #[test]
    fn conv1d_full_mixes_channels() {
        // k=1 full kernel is a position-wise matrix product
        let x = t(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let kernel = Tensor::new(vec![1, 2, 2], vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let bias = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let y = conv1d(&x, &kernel, &bias, ConvMode::Full).unwrap();
        let w = t(2, 2, &[1.0, -1.0, 0.5, 2.0]);
        assert_eq!(y, matmul(&x, &w).unwrap());
    }

    #[test]
    fn conv1d_kernel_longer_than_input_is_pure_padding() {
        let x = t(2, 1, &[1.0, 2.0]);
        let k5 = t(5, 1, &[1.0, 1.0, 1.0, 1.0, 1.0]);
        let zero_bias = Tensor::vector(vec![0.0]).unwrap();
        let y = conv1d(&x, &k5, &zero_bias, ConvMode::Depthwise).unwrap();
        assert_eq!(y.data(), &[3.0, 3.0]);
    }

    #[test]
    fn conv1d_rejects_zero_kernel_size() {
        let x = t(2, 1, &[1.0, 2.0]);
        let bad = Tensor {
            shape: vec![0, 1],
            data: vec![],
            node: None,
        };
        let zero_bias = Tensor::vector(vec![0.0]).unwrap();
        assert!(matches!(
            conv1d(&x, &bad, &zero_bias, ConvMode::Depthwise),
            Err(TensorError::ShapeMismatch { .. }) | Err(TensorError::BadParameter { .. })
        ));
    }

    #[test]
    fn even_kernel_pads_extra_left() {
        // k=2, pad_left=1, pad_right=0: out[t] = k0*x[t-1] + k1*x[t]
        let x = t(3, 1, &[1.0, 2.0, 3.0]);
        let k2 = t(2, 1, &[1.0, 10.0]);
        let zero_bias = Tensor::vector(vec![0.0]).unwrap();
        let y = conv1d(&x, &k2, &zero_bias, ConvMode::Depthwise).unwrap();
        assert_eq!(y.data(), &[10.0, 21.0, 32.0]);
    }

    #[test]
    fn activation_hand_values() {
        assert_eq!(Activation::Relu.value(-1.0), 0.0);
        assert_eq!(Activation::Relu.value(2.0), 2.0);
        assert_eq!(Activation::Sigmoid.value(0.0), 0.5);
        assert!((Activation::HardSigmoid.value(0.5) - 0.6).abs() < 1e-15);
        assert_eq!(Activation::HardSigmoid.value(10.0), 1.0);
        assert_eq!(Activation::HardSigmoid.value(-10.0), 0.0);
        // gelu(x) ~ x for large x, ~0 for very negative x
        assert!((Activation::Gelu.value(10.0) - 10.0).abs() < 1e-9);
        assert!(Activation::Gelu.value(-10.0).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_stays_inside_open_unit_interval() {
        for &x in &[-1e6, -500.0, -37.0, 0.0, 37.0, 500.0, 1e6, f64::MAX, f64::MIN] {
            let s = Activation::Sigmoid.value(x);
            assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s} left (0,1)");
        }
    }

    #[test]
    fn relu_gradient_is_zero_at_zero() {
        assert_eq!(Activation::Relu.deriv(0.0), 0.0);
        assert_eq!(Activation::Relu.deriv(1e-300), 1.0);
        assert_eq!(Activation::Relu.deriv(-1e-300), 0.0);
    }

    #[test]
    fn segmented_ops_respect_boundaries() {
        // two segments of 2 rows; conv must not leak across the boundary
        let x = t(4, 1, &[1.0, 2.0, 10.0, 20.0]);
        let boxcar = t(3, 1, &[1.0, 1.0, 1.0]);
        let zero_bias = Tensor::vector(vec![0.0]).unwrap();
        let y = conv1d_seg(&x, &boxcar, &zero_bias, ConvMode::Depthwise, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 3.0, 30.0, 30.0]);
        let m = mean_rows_seg(&x, 2).unwrap();
        assert_eq!(m.data(), &[1.5, 15.0]);
        let l = last_row_seg(&x, 2).unwrap();
        assert_eq!(l.data(), &[2.0, 20.0]);
    }

    #[test]
    fn add_row_broadcasts() {
        let x = t(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let row = Tensor::vector(vec![10.0, 20.0]).unwrap();
        let y = add_row(&x, &row).unwrap();
        assert_eq!(y.data(), &[11.0, 22.0, 13.0, 24.0]);
    }
}
