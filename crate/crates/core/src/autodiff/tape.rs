//! Eager reverse-mode tape over real tensors.
//!
//! Complex quantities travel as separate real/imaginary nodes; the one
//! primitive that cannot be composed from real arithmetic is the right-form
//! complex linear solve, which carries its LU factorization for the adjoint
//! pass. Forward values are computed at record time, so a tape is also a
//! deterministic evaluator.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::linalg::{lu_factor, ComplexMatrix, LuFactorization};

use super::tensor::{axis_split, Tensor};
use super::AutodiffError;

/// Index of a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

/// Which real channel of a complex solve result a node exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Re,
    Im,
}

/// Factorization and solution retained by a complex solve for its adjoint.
#[derive(Debug)]
pub struct SolveCache {
    lu: LuFactorization,
    solution: ComplexMatrix,
}

/// Primitive operations. Leaves are `Input` (constant) and `Param`
/// (trainable).
#[derive(Debug, Clone)]
pub enum OpKind {
    Input,
    Param,
    Add,
    Sub,
    /// Elementwise product of two same-shape tensors.
    Mul,
    /// Multiplication by a compile-time scalar.
    Scale(f64),
    /// `[q, p] x [p, rest..] -> [q, rest..]`, contracting the leading axis
    /// of the right operand.
    MatMul,
    Relu,
    Sin,
    Cos,
    /// Natural logarithm.
    Log,
    Recip,
    Square,
    SumAxis(usize),
    MeanAxis(usize),
    /// Insert a replicated axis of `size` at position `axis`.
    BroadcastAxis {
        axis: usize,
        size: usize,
    },
    /// Concatenate along the leading (feature) axis.
    ConcatFeature,
    /// Place entries of axis 1 at new positions: input `[f, n, u]` maps to
    /// output `[f, out_size, u]` with `out[.., map[i], ..] = in[.., i, ..]`
    /// and zeros elsewhere. `map` must be injective.
    ScatterElements {
        map: Arc<Vec<usize>>,
        out_size: usize,
    },
    /// `re^2 + im^2` of a (re, im) node pair.
    MagnitudeSquared,
    /// One real channel of `X` solving `X A = B`; inputs are
    /// `(a_re, a_im, b_re, b_im)`. The factorization is cached for the
    /// adjoint pass.
    ComplexSolveRight {
        channel: Channel,
        cache: Arc<SolveCache>,
    },
}

#[derive(Debug)]
struct Node {
    op: OpKind,
    inputs: Vec<NodeId>,
    value: Tensor,
}

/// Append-only operation tape in topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
    solve_memo: HashMap<[usize; 4], Arc<SolveCache>>,
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn params(&self) -> &[NodeId] {
        &self.params
    }

    /// Register a constant leaf.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(OpKind::Input, Vec::new(), value)
    }

    /// Register a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        let id = self.push(OpKind::Param, Vec::new(), value);
        self.params.push(id);
        id
    }

    fn push(&mut self, op: OpKind, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, inputs, value });
        id
    }

    fn shape_err(&self, op: &str, detail: String) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op: op.to_string(),
            detail,
        }
    }

    /// Record an operation, computing its forward value eagerly.
    pub fn record(&mut self, op: OpKind, inputs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        for &id in inputs {
            if id.0 >= self.nodes.len() {
                return Err(self.shape_err("record", format!("input id {} out of range", id.0)));
            }
        }
        let value = self.forward(&op, inputs)?;
        Ok(self.push(op, inputs.to_vec(), value))
    }

    fn forward(&self, op: &OpKind, inputs: &[NodeId]) -> Result<Tensor, AutodiffError> {
        let arity_err = |n: usize| AutodiffError::ShapeMismatch {
            op: format!("{op:?}"),
            detail: format!("expected {n} inputs, got {}", inputs.len()),
        };
        let val = |i: usize| &self.nodes[inputs[i].0].value;
        match op {
            OpKind::Input | OpKind::Param => Err(AutodiffError::ShapeMismatch {
                op: format!("{op:?}"),
                detail: "leaves are registered via input()/param()".into(),
            }),
            OpKind::Add | OpKind::Sub | OpKind::Mul => {
                if inputs.len() != 2 {
                    return Err(arity_err(2));
                }
                let (a, b) = (val(0), val(1));
                if a.shape() != b.shape() {
                    return Err(self
                        .shape_err("elementwise", format!("{:?} vs {:?}", a.shape(), b.shape())));
                }
                let data = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| match op {
                        OpKind::Add => x + y,
                        OpKind::Sub => x - y,
                        _ => x * y,
                    })
                    .collect();
                Ok(Tensor::from_vec(a.shape(), data))
            }
            OpKind::Scale(c) => {
                if inputs.len() != 1 {
                    return Err(arity_err(1));
                }
                let a = val(0);
                Ok(Tensor::from_vec(
                    a.shape(),
                    a.data().iter().map(|x| x * c).collect(),
                ))
            }
            OpKind::Relu => Ok(unary(val(0), |x| if x > 0.0 { x } else { 0.0 })),
            OpKind::Sin => Ok(unary(val(0), f64::sin)),
            OpKind::Cos => Ok(unary(val(0), f64::cos)),
            OpKind::Log => Ok(unary(val(0), f64::ln)),
            OpKind::Recip => Ok(unary(val(0), |x| 1.0 / x)),
            OpKind::Square => Ok(unary(val(0), |x| x * x)),
            OpKind::MatMul => {
                if inputs.len() != 2 {
                    return Err(arity_err(2));
                }
                let (a, b) = (val(0), val(1));
                if a.shape().len() != 2 || b.shape().is_empty() || a.shape()[1] != b.shape()[0] {
                    return Err(
                        self.shape_err("matmul", format!("{:?} x {:?}", a.shape(), b.shape()))
                    );
                }
                let q = a.shape()[0];
                let p = a.shape()[1];
                let rest: usize = b.shape()[1..].iter().product();
                let mut out_shape = vec![q];
                out_shape.extend_from_slice(&b.shape()[1..]);
                let mut out = Tensor::zeros(&out_shape);
                let ad = a.data();
                let bd = b.data();
                let od = out.data_mut();
                for i in 0..q {
                    for k in 0..p {
                        let aik = ad[i * p + k];
                        if aik == 0.0 {
                            continue;
                        }
                        let brow = &bd[k * rest..(k + 1) * rest];
                        let orow = &mut od[i * rest..(i + 1) * rest];
                        for r in 0..rest {
                            orow[r] += aik * brow[r];
                        }
                    }
                }
                Ok(out)
            }
            OpKind::SumAxis(axis) | OpKind::MeanAxis(axis) => {
                if inputs.len() != 1 {
                    return Err(arity_err(1));
                }
                let a = val(0);
                if *axis >= a.shape().len() {
                    return Err(self.shape_err(
                        "reduce",
                        format!("axis {axis} out of range for {:?}", a.shape()),
                    ));
                }
                let (outer, mid, inner) = axis_split(a.shape(), *axis);
                let mut out_shape = a.shape().to_vec();
                out_shape.remove(*axis);
                let mut out = Tensor::zeros(&out_shape);
                let ad = a.data();
                let od = out.data_mut();
                for o in 0..outer {
                    for m in 0..mid {
                        let src = &ad[(o * mid + m) * inner..(o * mid + m + 1) * inner];
                        let dst = &mut od[o * inner..(o + 1) * inner];
                        for i in 0..inner {
                            dst[i] += src[i];
                        }
                    }
                }
                if matches!(op, OpKind::MeanAxis(_)) {
                    let scale = 1.0 / mid as f64;
                    for v in out.data_mut() {
                        *v *= scale;
                    }
                }
                Ok(out)
            }
            OpKind::BroadcastAxis { axis, size } => {
                if inputs.len() != 1 {
                    return Err(arity_err(1));
                }
                let a = val(0);
                if *axis > a.shape().len() {
                    return Err(self.shape_err(
                        "broadcast",
                        format!("axis {axis} out of range for {:?}", a.shape()),
                    ));
                }
                let mut out_shape = a.shape().to_vec();
                out_shape.insert(*axis, *size);
                let (outer, mid, inner) = axis_split(&out_shape, *axis);
                let mut out = Tensor::zeros(&out_shape);
                let ad = a.data();
                let od = out.data_mut();
                for o in 0..outer {
                    let src = &ad[o * inner..(o + 1) * inner];
                    for m in 0..mid {
                        let dst = &mut od[(o * mid + m) * inner..(o * mid + m + 1) * inner];
                        dst.copy_from_slice(src);
                    }
                }
                Ok(out)
            }
            OpKind::ConcatFeature => {
                if inputs.is_empty() {
                    return Err(arity_err(1));
                }
                let rest0 = &val(0).shape()[1..].to_vec();
                let mut total = 0usize;
                for i in 0..inputs.len() {
                    let s = val(i).shape();
                    if s.is_empty() || &s[1..] != rest0.as_slice() {
                        return Err(self.shape_err(
                            "concat",
                            format!("incompatible trailing dims {:?} vs {:?}", s, rest0),
                        ));
                    }
                    total += s[0];
                }
                let mut out_shape = vec![total];
                out_shape.extend_from_slice(rest0);
                let mut data = Vec::with_capacity(out_shape.iter().product());
                for i in 0..inputs.len() {
                    data.extend_from_slice(val(i).data());
                }
                Ok(Tensor::from_vec(&out_shape, data))
            }
            OpKind::ScatterElements { map, out_size } => {
                if inputs.len() != 1 {
                    return Err(arity_err(1));
                }
                let a = val(0);
                if a.shape().len() != 3 || a.shape()[1] != map.len() {
                    return Err(self.shape_err(
                        "scatter",
                        format!(
                            "input {:?} incompatible with map of {}",
                            a.shape(),
                            map.len()
                        ),
                    ));
                }
                let mut seen = vec![false; *out_size];
                for &m in map.iter() {
                    if m >= *out_size || seen[m] {
                        return Err(self.shape_err(
                            "scatter",
                            format!("map entry {m} out of range or duplicated"),
                        ));
                    }
                    seen[m] = true;
                }
                let (f, n_in, u) = (a.shape()[0], a.shape()[1], a.shape()[2]);
                let mut out = Tensor::zeros(&[f, *out_size, u]);
                let ad = a.data();
                let od = out.data_mut();
                for fi in 0..f {
                    for (ni, &m) in map.iter().enumerate() {
                        let src = &ad[(fi * n_in + ni) * u..(fi * n_in + ni + 1) * u];
                        let dst = &mut od[(fi * out_size + m) * u..(fi * out_size + m + 1) * u];
                        dst.copy_from_slice(src);
                    }
                }
                Ok(out)
            }
            OpKind::MagnitudeSquared => {
                if inputs.len() != 2 {
                    return Err(arity_err(2));
                }
                let (re, im) = (val(0), val(1));
                if re.shape() != im.shape() {
                    return Err(self.shape_err(
                        "magnitude_squared",
                        format!("{:?} vs {:?}", re.shape(), im.shape()),
                    ));
                }
                let data = re
                    .data()
                    .iter()
                    .zip(im.data())
                    .map(|(r, i)| r * r + i * i)
                    .collect();
                Ok(Tensor::from_vec(re.shape(), data))
            }
            OpKind::ComplexSolveRight { channel, cache } => {
                // The cache already holds the solution computed by
                // `complex_solve_right`; expose the requested channel.
                if inputs.len() != 4 {
                    return Err(arity_err(4));
                }
                let x = &cache.solution;
                let shape = [x.rows(), x.cols()];
                let data = x
                    .entries()
                    .iter()
                    .map(|z| match channel {
                        Channel::Re => z.re,
                        Channel::Im => z.im,
                    })
                    .collect();
                Ok(Tensor::from_vec(&shape, data))
            }
        }
    }

    /// Record the right-form complex solve `X A = B`, with the operands given
    /// as (re, im) node pairs of shapes `[n, n]` and `[k, n]`. Returns the
    /// (re, im) pair of `X`.
    pub fn complex_solve_right(
        &mut self,
        a: (NodeId, NodeId),
        b: (NodeId, NodeId),
    ) -> Result<(NodeId, NodeId), AutodiffError> {
        let key = [a.0 .0, a.1 .0, b.0 .0, b.1 .0];
        let cache = match self.solve_memo.get(&key) {
            Some(c) => Arc::clone(c),
            None => {
                let a_mat = self.pair_to_matrix(a.0, a.1, "complex_solve_right(a)")?;
                let b_mat = self.pair_to_matrix(b.0, b.1, "complex_solve_right(b)")?;
                if !a_mat.is_square() || b_mat.cols() != a_mat.rows() {
                    return Err(self.shape_err(
                        "complex_solve_right",
                        format!(
                            "a is {}x{}, b is {}x{}",
                            a_mat.rows(),
                            a_mat.cols(),
                            b_mat.rows(),
                            b_mat.cols()
                        ),
                    ));
                }
                let lu = lu_factor(&a_mat)?;
                let solution = lu.solve_right(&b_mat)?;
                let cache = Arc::new(SolveCache { lu, solution });
                self.solve_memo.insert(key, Arc::clone(&cache));
                cache
            }
        };
        let ids = [a.0, a.1, b.0, b.1];
        let re = self.record(
            OpKind::ComplexSolveRight {
                channel: Channel::Re,
                cache: Arc::clone(&cache),
            },
            &ids,
        )?;
        let im = self.record(
            OpKind::ComplexSolveRight {
                channel: Channel::Im,
                cache,
            },
            &ids,
        )?;
        Ok((re, im))
    }

    fn pair_to_matrix(
        &self,
        re: NodeId,
        im: NodeId,
        op: &str,
    ) -> Result<ComplexMatrix, AutodiffError> {
        let (re_t, im_t) = (self.value(re), self.value(im));
        if re_t.shape() != im_t.shape() || re_t.shape().len() != 2 {
            return Err(self.shape_err(
                op,
                format!("pair shapes {:?} vs {:?}", re_t.shape(), im_t.shape()),
            ));
        }
        let (rows, cols) = (re_t.shape()[0], re_t.shape()[1]);
        let entries = re_t
            .data()
            .iter()
            .zip(im_t.data())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        Ok(ComplexMatrix::from_vec(rows, cols, entries))
    }

    /// Reverse pass from a one-element output node. Returns one gradient per
    /// registered parameter in registration order; parameters the output does
    /// not depend on get zero gradients.
    pub fn backward(&self, output: NodeId) -> Result<Vec<Tensor>, AutodiffError> {
        let out_val = self.value(output);
        if out_val.numel() != 1 {
            return Err(AutodiffError::NonScalarOutput {
                shape: out_val.shape().to_vec(),
            });
        }
        let mut adjoints: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adjoints[output.0] = Some(Tensor::from_vec(out_val.shape(), vec![1.0]));

        for id in (0..self.nodes.len()).rev() {
            let Some(up) = adjoints[id].take() else {
                continue;
            };
            self.accumulate_inputs(id, &up, &mut adjoints);
            // parameters keep their adjoint for collection
            if matches!(self.nodes[id].op, OpKind::Param | OpKind::Input) {
                adjoints[id] = Some(up);
            }
        }

        Ok(self
            .params
            .iter()
            .map(|&pid| {
                adjoints[pid.0]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(self.value(pid).shape()))
            })
            .collect())
    }

    fn accumulate_inputs(&self, id: usize, up: &Tensor, adjoints: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let add_to =
            |adjoints: &mut [Option<Tensor>], target: NodeId, delta: Tensor| match &mut adjoints
                [target.0]
            {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            };
        let val = |i: usize| &self.nodes[node.inputs[i].0].value;

        match &node.op {
            OpKind::Input | OpKind::Param => {}
            OpKind::Add => {
                add_to(adjoints, node.inputs[0], up.clone());
                add_to(adjoints, node.inputs[1], up.clone());
            }
            OpKind::Sub => {
                add_to(adjoints, node.inputs[0], up.clone());
                let neg = Tensor::from_vec(up.shape(), up.data().iter().map(|v| -v).collect());
                add_to(adjoints, node.inputs[1], neg);
            }
            OpKind::Mul => {
                let (a, b) = (val(0), val(1));
                let da = zip_mul(up, b);
                let db = zip_mul(up, a);
                add_to(adjoints, node.inputs[0], da);
                add_to(adjoints, node.inputs[1], db);
            }
            OpKind::Scale(c) => {
                let da = Tensor::from_vec(up.shape(), up.data().iter().map(|v| v * c).collect());
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::Relu => {
                let a = val(0);
                let da = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(a.data())
                        .map(|(u, x)| if *x > 0.0 { *u } else { 0.0 })
                        .collect(),
                );
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::Sin => {
                let a = val(0);
                let da = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(a.data())
                        .map(|(u, x)| u * x.cos())
                        .collect(),
                );
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::Cos => {
                let a = val(0);
                let da = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(a.data())
                        .map(|(u, x)| -u * x.sin())
                        .collect(),
                );
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::Log => {
                let a = val(0);
                let da = Tensor::from_vec(
                    up.shape(),
                    up.data().iter().zip(a.data()).map(|(u, x)| u / x).collect(),
                );
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::Recip => {
                let a = val(0);
                let da = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(a.data())
                        .map(|(u, x)| -u / (x * x))
                        .collect(),
                );
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::Square => {
                let a = val(0);
                let da = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(a.data())
                        .map(|(u, x)| 2.0 * u * x)
                        .collect(),
                );
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::MatMul => {
                let (a, b) = (val(0), val(1));
                let q = a.shape()[0];
                let p = a.shape()[1];
                let rest: usize = b.shape()[1..].iter().product();
                // da[i,k] = sum_r up[i,r] b[k,r]
                let mut da = Tensor::zeros(a.shape());
                {
                    let dad = da.data_mut();
                    for i in 0..q {
                        let urow = &up.data()[i * rest..(i + 1) * rest];
                        for k in 0..p {
                            let brow = &b.data()[k * rest..(k + 1) * rest];
                            let mut acc = 0.0;
                            for r in 0..rest {
                                acc += urow[r] * brow[r];
                            }
                            dad[i * p + k] = acc;
                        }
                    }
                }
                // db[k,r] = sum_i a[i,k] up[i,r]
                let mut db = Tensor::zeros(b.shape());
                {
                    let dbd = db.data_mut();
                    for i in 0..q {
                        let urow = &up.data()[i * rest..(i + 1) * rest];
                        for k in 0..p {
                            let aik = a.data()[i * p + k];
                            if aik == 0.0 {
                                continue;
                            }
                            let drow = &mut dbd[k * rest..(k + 1) * rest];
                            for r in 0..rest {
                                drow[r] += aik * urow[r];
                            }
                        }
                    }
                }
                add_to(adjoints, node.inputs[0], da);
                add_to(adjoints, node.inputs[1], db);
            }
            OpKind::SumAxis(axis) | OpKind::MeanAxis(axis) => {
                let a = val(0);
                let (outer, mid, inner) = axis_split(a.shape(), *axis);
                let scale = if matches!(node.op, OpKind::MeanAxis(_)) {
                    1.0 / mid as f64
                } else {
                    1.0
                };
                let mut da = Tensor::zeros(a.shape());
                let dad = da.data_mut();
                for o in 0..outer {
                    let src = &up.data()[o * inner..(o + 1) * inner];
                    for m in 0..mid {
                        let dst = &mut dad[(o * mid + m) * inner..(o * mid + m + 1) * inner];
                        for i in 0..inner {
                            dst[i] = src[i] * scale;
                        }
                    }
                }
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::BroadcastAxis { axis, size } => {
                let a = val(0);
                let mut out_shape = a.shape().to_vec();
                out_shape.insert(*axis, *size);
                let (outer, mid, inner) = axis_split(&out_shape, *axis);
                let mut da = Tensor::zeros(a.shape());
                let dad = da.data_mut();
                for o in 0..outer {
                    let dst = &mut dad[o * inner..(o + 1) * inner];
                    for m in 0..mid {
                        let src = &up.data()[(o * mid + m) * inner..(o * mid + m + 1) * inner];
                        for i in 0..inner {
                            dst[i] += src[i];
                        }
                    }
                }
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::ConcatFeature => {
                let rest: usize = up.shape()[1..].iter().product();
                let mut offset = 0usize;
                for (slot, &inp) in node.inputs.iter().enumerate() {
                    let f = self.nodes[inp.0].value.shape()[0];
                    let block = up.data()[offset * rest..(offset + f) * rest].to_vec();
                    let da = Tensor::from_vec(self.nodes[inp.0].value.shape(), block);
                    add_to(adjoints, node.inputs[slot], da);
                    offset += f;
                }
            }
            OpKind::ScatterElements { map, out_size } => {
                let a = val(0);
                let (f, n_in, u) = (a.shape()[0], a.shape()[1], a.shape()[2]);
                let mut da = Tensor::zeros(a.shape());
                let dad = da.data_mut();
                for fi in 0..f {
                    for (ni, &m) in map.iter().enumerate() {
                        let src = &up.data()[(fi * out_size + m) * u..(fi * out_size + m + 1) * u];
                        let dst = &mut dad[(fi * n_in + ni) * u..(fi * n_in + ni + 1) * u];
                        dst.copy_from_slice(src);
                    }
                }
                add_to(adjoints, node.inputs[0], da);
            }
            OpKind::MagnitudeSquared => {
                let (re, im) = (val(0), val(1));
                let dre = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(re.data())
                        .map(|(u, r)| 2.0 * u * r)
                        .collect(),
                );
                let dim = Tensor::from_vec(
                    up.shape(),
                    up.data()
                        .iter()
                        .zip(im.data())
                        .map(|(u, i)| 2.0 * u * i)
                        .collect(),
                );
                add_to(adjoints, node.inputs[0], dre);
                add_to(adjoints, node.inputs[1], dim);
            }
            OpKind::ComplexSolveRight { channel, cache } => {
                // X solves X A = B. With the upstream gradient of this
                // channel as the matching real part of the complex adjoint
                // Ḡ, the input adjoints are
                //   B̄ = solve of B̄ Aᴴ = Ḡ,   Ā = -Xᴴ B̄.
                let x = &cache.solution;
                let (k, n) = (x.rows(), x.cols());
                let g = ComplexMatrix::from_fn(k, n, |i, j| {
                    let u = up.data()[i * n + j];
                    match channel {
                        Channel::Re => Complex64::new(u, 0.0),
                        Channel::Im => Complex64::new(0.0, u),
                    }
                });
                let b_bar = cache
                    .lu
                    .solve_right_conj_transpose(&g)
                    .expect("adjoint solve reuses a valid factorization");
                let a_bar = crate::linalg::cmatmul(&x.conj_transpose(), &b_bar)
                    .expect("shapes fixed by forward pass")
                    .scale(Complex64::new(-1.0, 0.0));

                let to_tensor = |m: &ComplexMatrix, take_re: bool| {
                    Tensor::from_vec(
                        &[m.rows(), m.cols()],
                        m.entries()
                            .iter()
                            .map(|z| if take_re { z.re } else { z.im })
                            .collect(),
                    )
                };
                add_to(adjoints, node.inputs[0], to_tensor(&a_bar, true));
                add_to(adjoints, node.inputs[1], to_tensor(&a_bar, false));
                add_to(adjoints, node.inputs[2], to_tensor(&b_bar, true));
                add_to(adjoints, node.inputs[3], to_tensor(&b_bar, false));
            }
        }
    }
}

/// Shorthand recorders for the common single-op cases.
impl Tape {
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Scale(c), &[a])
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::MatMul, &[a, b])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Relu, &[a])
    }

    pub fn sin(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Sin, &[a])
    }

    pub fn cos(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Cos, &[a])
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Log, &[a])
    }

    pub fn recip(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Recip, &[a])
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::Square, &[a])
    }

    pub fn sum_axis(&mut self, a: NodeId, axis: usize) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::SumAxis(axis), &[a])
    }

    pub fn mean_axis(&mut self, a: NodeId, axis: usize) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::MeanAxis(axis), &[a])
    }

    pub fn broadcast_axis(
        &mut self,
        a: NodeId,
        axis: usize,
        size: usize,
    ) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::BroadcastAxis { axis, size }, &[a])
    }

    pub fn concat_feature(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::ConcatFeature, parts)
    }

    pub fn scatter_elements(
        &mut self,
        a: NodeId,
        map: Arc<Vec<usize>>,
        out_size: usize,
    ) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::ScatterElements { map, out_size }, &[a])
    }

    pub fn magnitude_squared(&mut self, re: NodeId, im: NodeId) -> Result<NodeId, AutodiffError> {
        self.record(OpKind::MagnitudeSquared, &[re, im])
    }

    /// Complex product of (re, im) matrix pairs as the paired-real composite:
    /// four real products plus the cross add/sub.
    pub fn complex_matmul(
        &mut self,
        a: (NodeId, NodeId),
        b: (NodeId, NodeId),
    ) -> Result<(NodeId, NodeId), AutodiffError> {
        let rr = self.matmul(a.0, b.0)?;
        let ii = self.matmul(a.1, b.1)?;
        let ri = self.matmul(a.0, b.1)?;
        let ir = self.matmul(a.1, b.0)?;
        let re = self.sub(rr, ii)?;
        let im = self.add(ri, ir)?;
        Ok((re, im))
    }
}

fn unary(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_vec(a.shape(), a.data().iter().map(|&x| f(x)).collect())
}

fn zip_mul(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor::from_vec(
        a.shape(),
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect(),
    )
}
