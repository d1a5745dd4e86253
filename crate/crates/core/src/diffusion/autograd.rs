//! A small reverse-mode tape over dense `f64` matrices.

use std::borrow::Cow;

use ndarray::{Array2, Axis};

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    /// `a + 1·row` with `row` a `1 × n` matrix.
    AddRow(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    SoftmaxRows(Var),
    ConcatRows(Var, Var),
    /// Mean squared difference to a constant target, as a `1 × 1` value.
    Mse(Var, Array2<f64>),
}

#[derive(Debug, Clone)]
struct Node<'a> {
    value: Cow<'a, Array2<f64>>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    /// Leaf whose gradient is reported under parameter id `id`.
    pub fn param(&mut self, id: usize, value: &'a Array2<f64>) -> Var {
        self.nodes.push(Node { value: Cow::Borrowed(value), op: Op::Leaf { param: Some(id) } });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * sigmoid(x));
        self.push(v, Op::Silu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let v = ndarray::concatenate(Axis(0), &[self.value(a).view(), self.value(b).view()])
            .expect("concatenated blocks share a column count");
        self.push(v, Op::ConcatRows(a, b))
    }

    pub fn mse(&mut self, a: Var, target: Array2<f64>) -> Var {
        let diff = self.value(a) - &target;
        let v = Array2::from_elem((1, 1), diff.mapv(|x| x * x).mean().unwrap_or(0.0));
        self.push(v, Op::Mse(a, target))
    }

    /// Back-propagates from the `1 × 1` node `loss`; returns `(param id,
    /// gradient)` for every parameter leaf, in tape order.
    pub fn backward(&self, loss: Var) -> Vec<(usize, Array2<f64>)> {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = Vec::new();
        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(x) => *x += &g,
                slot => *slot = Some(g),
            }
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(id) = param {
                        out.push((*id, g));
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g * *s),
                Op::Silu(a) => {
                    let x = self.value(*a);
                    let mut ga = g;
                    ga.zip_mut_with(x, |gv, &xv| {
                        let s = sigmoid(xv);
                        *gv *= s * (1.0 + xv * (1.0 - s));
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y: &Array2<f64> = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = y * &(&g - &dot);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(a, b) => {
                    let na = self.value(*a).nrows();
                    let ga = g.slice(ndarray::s![..na, ..]).to_owned();
                    let gb = g.slice(ndarray::s![na.., ..]).to_owned();
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Mse(a, target) => {
                    let x = self.value(*a);
                    let n = x.len().max(1) as f64;
                    let ga = (x - target) * (2.0 * g[[0, 0]] / n);
                    acc(&mut grads, *a, ga);
                }
            }
        }
        out.reverse();
        out
    }
}
