//! Reverse-mode tape over dense tensors.
//!
//! Every primitive application appends one node holding its output value and
//! whatever it needs for the backward pass. `backward` walks the node list in
//! reverse, so each primitive is visited exactly once.

use super::tensor::Tensor;
use crate::error::{MqatError, Result};
use crate::quant::levels::LevelRange;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive kinds available through [`Tape::apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Primitive {
    Matmul,
    Add,
    Relu,
    Concat,
    L2Normalize,
    Mse,
    QuatGeodesic,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Matmul => "matmul",
            Primitive::Add => "add",
            Primitive::Relu => "relu",
            Primitive::Concat => "concat",
            Primitive::L2Normalize => "l2_normalize",
            Primitive::Mse => "mse",
            Primitive::QuatGeodesic => "quat_geodesic",
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Concat(Vec<Var>),
    L2Normalize {
        x: Var,
        norms: Vec<f64>,
    },
    Mse(Var, Var),
    QuatGeodesic {
        pred: Var,
        target: Var,
    },
    Scale(Var, f32),
    SliceCols {
        x: Var,
        start: usize,
    },
    FakeQuant {
        w: Var,
        step: Var,
        range: LevelRange,
        grad_scale: f32,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of primitive applications.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    recording: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            recording: true,
        }
    }

    /// A tape that only evaluates values; nothing is kept for backward.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let requires_grad = self.recording;
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let op = if self.recording && requires_grad {
            op
        } else {
            Op::Leaf
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad: self.recording && requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn record(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.all_finite() {
            return Err(MqatError::NonFinite {
                context: format!("{name} output"),
            });
        }
        let rg = self.needs(inputs);
        Ok(self.push(value, op, rg))
    }

    /// Applies `kind` to `inputs`; the generic entry point over the primitive set.
    pub fn apply(&mut self, kind: Primitive, inputs: &[Var]) -> Result<Var> {
        let arity = |n: usize| -> Result<()> {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(MqatError::shape(
                    kind.name(),
                    format!("expected {n} inputs, got {}", inputs.len()),
                ))
            }
        };
        match kind {
            Primitive::Matmul => {
                arity(2)?;
                self.matmul(inputs[0], inputs[1])
            }
            Primitive::Add => {
                arity(2)?;
                self.add(inputs[0], inputs[1])
            }
            Primitive::Relu => {
                arity(1)?;
                self.relu(inputs[0])
            }
            Primitive::Concat => self.concat(inputs),
            Primitive::L2Normalize => {
                arity(1)?;
                self.l2_normalize(inputs[0])
            }
            Primitive::Mse => {
                arity(2)?;
                self.mse(inputs[0], inputs[1])
            }
            Primitive::QuatGeodesic => {
                arity(2)?;
                self.quat_geodesic(inputs[0], inputs[1])
            }
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.record("matmul", value, Op::Matmul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(MqatError::shape(
                "add",
                format!("lhs {:?} rhs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let mut value = ta.clone();
        value.add_assign(tb);
        self.record("add", value, Op::Add(a, b), &[a, b])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(0.0));
        self.record("relu", value, Op::Relu(x), &[x])
    }

    /// Column-wise concatenation of rank-2 tensors with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(MqatError::shape("concat", "no inputs"));
        }
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            dims.push(self.value(p).dims2("concat")?);
        }
        let rows = dims[0].0;
        if dims.iter().any(|d| d.0 != rows) {
            return Err(MqatError::shape(
                "concat",
                format!(
                    "row counts differ: {:?}",
                    dims.iter().map(|d| d.0).collect::<Vec<_>>()
                ),
            ));
        }
        let cols: usize = dims.iter().map(|d| d.1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new([rows, cols], data)?;
        self.record("concat", value, Op::Concat(parts.to_vec()), parts)
    }

    /// Row-wise unit normalization; zero rows are an error.
    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (rows, cols) = t.dims2("l2_normalize")?;
        let mut norms = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row = t.row(r);
            let norm = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(MqatError::invalid(format!(
                    "l2_normalize: row {r} has zero norm"
                )));
            }
            norms.push(norm);
            data.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
        }
        let value = Tensor::new([rows, cols], data)?;
        self.record("l2_normalize", value, Op::L2Normalize { x, norms }, &[x])
    }

    /// Mean squared error over all elements.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(MqatError::shape(
                "mse",
                format!("lhs {:?} rhs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let sum: f64 = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
            .sum();
        let value = Tensor::scalar((sum / ta.len() as f64) as f32);
        self.record("mse", value, Op::Mse(a, b), &[a, b])
    }

    /// Mean over rows of the rotation angle `2·acos(|⟨p̂, q⟩|)` between the
    /// normalized predicted quaternion `p̂` and a unit target `q`.
    ///
    /// Gradients flow into `pred` only; `target` is treated as data.
    pub fn quat_geodesic(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tq) = (self.value(pred), self.value(target));
        let (rows, cols) = tp.dims2("quat_geodesic")?;
        if cols != 4 || tq.shape() != tp.shape() {
            return Err(MqatError::shape(
                "quat_geodesic",
                format!(
                    "pred {:?} target {:?}, need [B, 4] both",
                    tp.shape(),
                    tq.shape()
                ),
            ));
        }
        let mut total = 0f64;
        for r in 0..rows {
            let (angle, _) = geodesic_row(tp.row(r), tq.row(r))?;
            total += angle;
        }
        let value = Tensor::scalar((total / rows as f64) as f32);
        self.record(
            "quat_geodesic",
            value,
            Op::QuatGeodesic { pred, target },
            &[pred],
        )
    }

    pub fn scale(&mut self, x: Var, factor: f32) -> Result<Var> {
        let value = self.value(x).map(|v| v * factor);
        self.record("scale", value, Op::Scale(x, factor), &[x])
    }

    /// Columns `start..end` of a rank-2 tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        let (rows, cols) = t.dims2("slice_cols")?;
        if start >= end || end > cols {
            return Err(MqatError::shape(
                "slice_cols",
                format!("range {start}..{end} outside {cols} columns"),
            ));
        }
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&t.row(r)[start..end]);
        }
        let value = Tensor::new([rows, end - start], data)?;
        self.record("slice_cols", value, Op::SliceCols { x, start }, &[x])
    }

    /// Learned-step fake quantization `clamp(round(w/s), -Q_N, Q_P)·s`.
    ///
    /// Weight gradient is straight-through inside the clamp range and zero
    /// outside. The step-size gradient follows the LSQ rule scaled by
    /// `grad_scale`.
    pub fn fake_quant(
        &mut self,
        w: Var,
        step: Var,
        range: LevelRange,
        grad_scale: f32,
    ) -> Result<Var> {
        let s = self.value(step).item()?;
        if !(s > 0.0) {
            return Err(MqatError::invalid(format!(
                "fake_quant: step size {s} must be positive"
            )));
        }
        let value = self.value(w).map(|v| range.quantize(v, s));
        self.record(
            "fake_quant",
            value,
            Op::FakeQuant {
                w,
                step,
                range,
                grad_scale,
            },
            &[w, step],
        )
    }

    /// Propagates d(loss)/d(node) for every node that requires gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(MqatError::invalid("backward on an empty tape"));
        }
        if !self.value(loss).is_scalar() {
            return Err(MqatError::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(dy);
                    continue;
                }
                Op::Matmul(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        let da = dy.matmul_nt(self.value(*b))?;
                        accumulate(&mut grads, *a, da);
                    }
                    if self.nodes[b.0].requires_grad {
                        let db = self.value(*a).matmul_tn(&dy)?;
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, *a, dy.clone());
                    }
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, *b, dy.clone());
                    }
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let mut dx = dy.clone();
                    for (g, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Concat(parts) => {
                    let rows = dy.shape()[0];
                    let mut offset = 0;
                    for p in parts {
                        let (_, c) = self.value(*p).dims2("concat")?;
                        if self.nodes[p.0].requires_grad {
                            let mut data = Vec::with_capacity(rows * c);
                            for r in 0..rows {
                                data.extend_from_slice(&dy.row(r)[offset..offset + c]);
                            }
                            accumulate(&mut grads, *p, Tensor::new([rows, c], data)?);
                        }
                        offset += c;
                    }
                }
                Op::L2Normalize { x, norms } => {
                    let y = &node.value;
                    let (rows, cols) = y.dims2("l2_normalize")?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for r in 0..rows {
                        let (yr, gr) = (y.row(r), dy.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(&a, &b)| a as f64 * b as f64).sum();
                        for (&yv, &gv) in yr.iter().zip(gr) {
                            data.push(((gv as f64 - yv as f64 * dot) / norms[r]) as f32);
                        }
                    }
                    accumulate(&mut grads, *x, Tensor::new([rows, cols], data)?);
                }
                Op::Mse(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let g = dy.item()? as f64 * 2.0 / ta.len() as f64;
                    let diff: Vec<f32> = ta
                        .data()
                        .iter()
                        .zip(tb.data())
                        .map(|(&x, &y)| ((x as f64 - y as f64) * g) as f32)
                        .collect();
                    let da = Tensor::new(ta.shape().to_vec(), diff)?;
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, *b, da.map(|v| -v));
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, *a, da);
                    }
                }
                Op::QuatGeodesic { pred, target } => {
                    let (tp, tq) = (self.value(*pred), self.value(*target));
                    let rows = tp.shape()[0];
                    let g = dy.item()? as f64 / rows as f64;
                    let mut data = Vec::with_capacity(rows * 4);
                    for r in 0..rows {
                        let (_, grad) = geodesic_row(tp.row(r), tq.row(r))?;
                        data.extend(grad.iter().map(|&v| (v * g) as f32));
                    }
                    accumulate(&mut grads, *pred, Tensor::new([rows, 4], data)?);
                }
                Op::Scale(x, factor) => {
                    let f = *factor;
                    accumulate(&mut grads, *x, dy.map(|v| v * f));
                }
                Op::SliceCols { x, start } => {
                    let (rows, cols) = self.value(*x).dims2("slice_cols")?;
                    let width = dy.shape()[1];
                    let mut dx = Tensor::zeros([rows, cols]);
                    for r in 0..rows {
                        dx.data_mut()[r * cols + start..r * cols + start + width]
                            .copy_from_slice(dy.row(r));
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::FakeQuant {
                    w,
                    step,
                    range,
                    grad_scale,
                } => {
                    let wv = self.value(*w);
                    let s = self.value(*step).item()?;
                    let mut dw = dy.clone();
                    let mut ds = 0f64;
                    for (g, &x) in dw.data_mut().iter_mut().zip(wv.data()) {
                        let (inside, dstep) = range.ste(x, s);
                        ds += *g as f64 * dstep as f64;
                        if !inside {
                            *g = 0.0;
                        }
                    }
                    if self.nodes[w.0].requires_grad {
                        accumulate(&mut grads, *w, dw);
                    }
                    if self.nodes[step.0].requires_grad {
                        let ds = Tensor::new(
                            self.value(*step).shape().to_vec(),
                            vec![(ds * *grad_scale as f64) as f32],
                        )?;
                        accumulate(&mut grads, *step, ds);
                    }
                }
            }
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.all_finite() {
                    return Err(MqatError::NonFinite {
                        context: format!("gradient of node {i}"),
                    });
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Angle and its gradient with respect to the raw prediction.
///
/// The gradient is `-2·t / (|t|·|p|)` with `t` the tangent component of the
/// sign-aligned target at `p̂`; its magnitude is constant at `2/|p|`.
fn geodesic_row(pred: &[f32], target: &[f32]) -> Result<(f64, [f64; 4])> {
    let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    let q: Vec<f64> = target.iter().map(|&v| v as f64).collect();
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if pn < 1e-12 {
        return Err(MqatError::invalid(
            "quat_geodesic: predicted quaternion has zero norm",
        ));
    }
    if qn < 1e-12 {
        return Err(MqatError::invalid(
            "quat_geodesic: target quaternion has zero norm",
        ));
    }
    let u: Vec<f64> = p.iter().map(|v| v / pn).collect();
    let qh: Vec<f64> = q.iter().map(|v| v / qn).collect();
    let d: f64 = u.iter().zip(&qh).map(|(a, b)| a * b).sum();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    let ad = (d * sign).min(1.0);
    let angle = 2.0 * ad.acos();
    let mut t = [0f64; 4];
    for i in 0..4 {
        t[i] = sign * qh[i] - ad * u[i];
    }
    let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut grad = [0f64; 4];
    if tn > 1e-12 {
        for i in 0..4 {
            grad[i] = -2.0 * t[i] / (tn * pn);
        }
    }
    Ok((angle, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: usize, cols: usize, data: &[f32]) -> Tensor {
        Tensor::new([rows, cols], data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(t2(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let i = tape.constant(t2(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let y = tape.apply(Primitive::Matmul, &[a, i]).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn relu_definition() {
        let mut tape = Tape::new();
        let x = tape.constant(t2(1, 3, &[-1.0, 0.0, 2.0]));
        let y = tape.apply(Primitive::Relu, &[x]).unwrap();
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn mse_hand_value() {
        let mut tape = Tape::new();
        let a = tape.constant(t2(1, 2, &[1.0, 2.0]));
        let b = tape.constant(t2(1, 2, &[1.0, 4.0]));
        let y = tape.apply(Primitive::Mse, &[a, b]).unwrap();
        assert_eq!(tape.value(y).item().unwrap(), 2.0);
    }

    #[test]
    fn shape_errors_name_the_primitive() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros([2, 3]));
        let b = tape.constant(Tensor::zeros([2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
        let c = tape.constant(Tensor::zeros([3, 2]));
        assert!(tape.add(a, c).unwrap_err().to_string().contains("add"));
    }

    #[test]
    fn grad_of_squared_product() {
        // loss = mse(w·x, y) with w=1, x=2, y=0: d/dw (2w)^2 = 8w.
        let mut tape = Tape::new();
        let w = tape.leaf(t2(1, 1, &[1.0]));
        let x = tape.constant(t2(1, 1, &[2.0]));
        let y = tape.constant(t2(1, 1, &[0.0]));
        let wx = tape.matmul(x, w).unwrap();
        let loss = tape.mse(wx, y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[8.0]);
    }

    #[test]
    fn unused_leaf_gets_no_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(t2(1, 1, &[1.0]));
        let x = tape.leaf(t2(1, 1, &[3.0]));
        let y = tape.constant(t2(1, 1, &[0.0]));
        let loss = tape.mse(x, y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(w).is_none());
    }

    #[test]
    fn shared_input_accumulates() {
        // loss = mse(x + x, 0) = 4x^2 → 8x
        let mut tape = Tape::new();
        let x = tape.leaf(t2(1, 1, &[0.5]));
        let z = tape.constant(t2(1, 1, &[0.0]));
        let s = tape.add(x, x).unwrap();
        let loss = tape.mse(s, z).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(t2(1, 2, &[0.5, 1.0]));
        assert!(tape.backward(x).is_err());
        assert!(Tape::new().backward(Var(0)).is_err());
    }

    #[test]
    fn geodesic_handles_double_cover() {
        let mut tape = Tape::new();
        let gt = tape.constant(t2(1, 4, &[0.5, 0.5, 0.5, 0.5]));
        let neg = tape.leaf(t2(1, 4, &[-0.5, -0.5, -0.5, -0.5]));
        let d = tape.quat_geodesic(neg, gt).unwrap();
        assert_eq!(tape.value(d).item().unwrap(), 0.0);
    }

    #[test]
    fn geodesic_quarter_turn() {
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let mut tape = Tape::new();
        let gt = tape.constant(t2(1, 4, &[1.0, 0.0, 0.0, 0.0]));
        let p = tape.leaf(t2(1, 4, &[h, 0.0, 0.0, h]));
        let d = tape.quat_geodesic(p, gt).unwrap();
        let v = tape.value(d).item().unwrap();
        assert!((v - std::f32::consts::FRAC_PI_2).abs() < 1e-5, "{v}");
    }

    #[test]
    fn no_grad_tape_keeps_values_only() {
        let mut tape = Tape::no_grad();
        let x = tape.leaf(t2(1, 2, &[1.0, -1.0]));
        let y = tape.relu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 0.0]);
        let z = tape.constant(t2(1, 2, &[0.0, 0.0]));
        let l = tape.mse(y, z).unwrap();
        let grads = tape.backward(l).unwrap();
        assert!(grads.get(x).is_none());
    }
}
