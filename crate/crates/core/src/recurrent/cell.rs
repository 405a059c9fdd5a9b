//! LSTM and GRU cells: single steps, and backpropagation through a whole
//! unrolled chain of steps.

use rand::Rng;

use super::tensor::{add_assign, sigmoid, Matrix, Real};

/// Gate order of [`LstmCell`] tensors.
pub const LSTM_GATES: [&str; 4] = ["input", "forget", "output", "candidate"];
/// Gate order of [`GruCell`] tensors.
pub const GRU_GATES: [&str; 3] = ["update", "reset", "candidate"];

const I: usize = 0;
const F: usize = 1;
const O: usize = 2;
const G: usize = 3;

const Z: usize = 0;
const R: usize = 1;
const N: usize = 2;

/// Per-gate input weights `u` (h x d), recurrent weights `w` (h x h) and
/// biases `b` (h), in [`LSTM_GATES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    pub u: [Matrix<T>; 4],
    pub w: [Matrix<T>; 4],
    pub b: [Vec<T>; 4],
}

/// Same layout as [`LstmCell`] with [`GRU_GATES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell<T> {
    pub u: [Matrix<T>; 3],
    pub w: [Matrix<T>; 3],
    pub b: [Vec<T>; 3],
}

impl<T: Real> LstmCell<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            u: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            w: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![T::zero(); hidden]),
        }
    }

    /// Uniform(±1/sqrt(fan_in)) weights, zero biases except the forget
    /// gate, which starts at 1.
    pub fn init<Rn: Rng>(input: usize, hidden: usize, rng: &mut Rn) -> Self {
        let bu = 1.0 / (input.max(1) as f64).sqrt();
        let bw = 1.0 / (hidden.max(1) as f64).sqrt();
        let mut cell = LstmCell {
            u: std::array::from_fn(|_| Matrix::uniform(hidden, input, bu, rng)),
            w: std::array::from_fn(|_| Matrix::uniform(hidden, hidden, bw, rng)),
            b: std::array::from_fn(|_| vec![T::zero(); hidden]),
        };
        cell.b[F] = vec![T::one(); hidden];
        cell
    }

    pub fn hidden(&self) -> usize {
        self.b[0].len()
    }

    pub fn input(&self) -> usize {
        self.u[0].cols
    }

    /// One step; returns `(h_t, c_t)`.
    pub fn step(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> (Vec<T>, Vec<T>) {
        let s = self.step_cached(x, h_prev, c_prev);
        (s.h, s.c)
    }

    pub(crate) fn step_cached(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> LstmStep<T> {
        let pre = |k: usize| {
            let mut a = self.b[k].clone();
            self.u[k].matvec_add(x, &mut a);
            self.w[k].matvec_add(h_prev, &mut a);
            a
        };
        let i: Vec<T> = pre(I).into_iter().map(sigmoid).collect();
        let f: Vec<T> = pre(F).into_iter().map(sigmoid).collect();
        let o: Vec<T> = pre(O).into_iter().map(sigmoid).collect();
        let g: Vec<T> = pre(G).into_iter().map(|v| v.tanh()).collect();
        let c: Vec<T> = (0..g.len())
            .map(|k| f[k] * c_prev[k] + i[k] * g[k])
            .collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = o.iter().zip(&tanh_c).map(|(&o, &t)| o * t).collect();
        LstmStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            o,
            g,
            c,
            tanh_c,
            h,
        }
    }

    /// Run over `xs` from a zero state.
    pub(crate) fn run(&self, xs: &[&[T]]) -> Vec<LstmStep<T>> {
        let hd = self.hidden();
        let mut h = vec![T::zero(); hd];
        let mut c = vec![T::zero(); hd];
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.step_cached(x, &h, &c);
            h.clone_from(&s.h);
            c.clone_from(&s.c);
            steps.push(s);
        }
        steps
    }

    /// BPTT over a chain from [`run`](Self::run). `dh_ext[t]` is the loss
    /// gradient arriving at `h_t` from outside the recurrence. Parameter
    /// gradients are added into `grads`; input gradients into `dxs[t]`.
    pub(crate) fn backprop(
        &self,
        steps: &[LstmStep<T>],
        dh_ext: &[Vec<T>],
        grads: &mut LstmCell<T>,
        dxs: &mut [Vec<T>],
    ) {
        let hd = self.hidden();
        let one = T::one();
        let mut dh_next = vec![T::zero(); hd];
        let mut dc_next = vec![T::zero(); hd];
        let mut da: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hd]);
        for (t, s) in steps.iter().enumerate().rev() {
            for k in 0..hd {
                let dh = dh_ext[t][k] + dh_next[k];
                let dc = dc_next[k] + dh * s.o[k] * (one - s.tanh_c[k] * s.tanh_c[k]);
                da[I][k] = dc * s.g[k] * s.i[k] * (one - s.i[k]);
                da[F][k] = dc * s.c_prev[k] * s.f[k] * (one - s.f[k]);
                da[O][k] = dh * s.tanh_c[k] * s.o[k] * (one - s.o[k]);
                da[G][k] = dc * s.i[k] * (one - s.g[k] * s.g[k]);
                dc_next[k] = dc * s.f[k];
            }
            dh_next.iter_mut().for_each(|v| *v = T::zero());
            #[allow(clippy::needless_range_loop)]
            for gate in 0..4 {
                grads.u[gate].add_outer(&da[gate], &s.x);
                grads.w[gate].add_outer(&da[gate], &s.h_prev);
                add_assign(&mut grads.b[gate], &da[gate]);
                self.u[gate].t_matvec_add(&da[gate], &mut dxs[t]);
                self.w[gate].t_matvec_add(&da[gate], &mut dh_next);
            }
        }
    }

    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(12);
        for (k, name) in LSTM_GATES.iter().enumerate() {
            out.push((format!("U_{}", name), self.u[k].data.as_slice()));
            out.push((format!("W_{}", name), self.w[k].data.as_slice()));
            out.push((format!("b_{}", name), self.b[k].as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(12);
        for ((u, w), b) in self
            .u
            .iter_mut()
            .zip(self.w.iter_mut())
            .zip(self.b.iter_mut())
        {
            out.push(u.data.as_mut_slice());
            out.push(w.data.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LstmStep<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    o: Vec<T>,
    g: Vec<T>,
    c: Vec<T>,
    tanh_c: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Real> GruCell<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruCell {
            u: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            w: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![T::zero(); hidden]),
        }
    }

    pub fn init<Rn: Rng>(input: usize, hidden: usize, rng: &mut Rn) -> Self {
        let bu = 1.0 / (input.max(1) as f64).sqrt();
        let bw = 1.0 / (hidden.max(1) as f64).sqrt();
        GruCell {
            u: std::array::from_fn(|_| Matrix::uniform(hidden, input, bu, rng)),
            w: std::array::from_fn(|_| Matrix::uniform(hidden, hidden, bw, rng)),
            b: std::array::from_fn(|_| vec![T::zero(); hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b[0].len()
    }

    pub fn input(&self) -> usize {
        self.u[0].cols
    }

    pub fn step(&self, x: &[T], h_prev: &[T]) -> Vec<T> {
        self.step_cached(x, h_prev).h
    }

    pub(crate) fn step_cached(&self, x: &[T], h_prev: &[T]) -> GruStep<T> {
        let mut az = self.b[Z].clone();
        self.u[Z].matvec_add(x, &mut az);
        self.w[Z].matvec_add(h_prev, &mut az);
        let mut ar = self.b[R].clone();
        self.u[R].matvec_add(x, &mut ar);
        self.w[R].matvec_add(h_prev, &mut ar);
        let z: Vec<T> = az.into_iter().map(sigmoid).collect();
        let r: Vec<T> = ar.into_iter().map(sigmoid).collect();
        let rh: Vec<T> = r.iter().zip(h_prev).map(|(&r, &h)| r * h).collect();
        let mut an = self.b[N].clone();
        self.u[N].matvec_add(x, &mut an);
        self.w[N].matvec_add(&rh, &mut an);
        let n: Vec<T> = an.into_iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = (0..n.len())
            .map(|k| (T::one() - z[k]) * h_prev[k] + z[k] * n[k])
            .collect();
        GruStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            rh,
            n,
            h,
        }
    }

    pub(crate) fn run(&self, xs: &[&[T]]) -> Vec<GruStep<T>> {
        let mut h = vec![T::zero(); self.hidden()];
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let s = self.step_cached(x, &h);
            h.clone_from(&s.h);
            steps.push(s);
        }
        steps
    }

    pub(crate) fn backprop(
        &self,
        steps: &[GruStep<T>],
        dh_ext: &[Vec<T>],
        grads: &mut GruCell<T>,
        dxs: &mut [Vec<T>],
    ) {
        let hd = self.hidden();
        let one = T::one();
        let mut dh_next = vec![T::zero(); hd];
        let mut da: [Vec<T>; 3] = std::array::from_fn(|_| vec![T::zero(); hd]);
        let mut d_rh = vec![T::zero(); hd];
        for (t, s) in steps.iter().enumerate().rev() {
            let dh: Vec<T> = (0..hd).map(|k| dh_ext[t][k] + dh_next[k]).collect();
            // direct path through (1 - z) * h_prev
            for k in 0..hd {
                dh_next[k] = dh[k] * (one - s.z[k]);
                da[Z][k] = dh[k] * (s.n[k] - s.h_prev[k]) * s.z[k] * (one - s.z[k]);
                da[N][k] = dh[k] * s.z[k] * (one - s.n[k] * s.n[k]);
            }
            d_rh.iter_mut().for_each(|v| *v = T::zero());
            self.w[N].t_matvec_add(&da[N], &mut d_rh);
            for k in 0..hd {
                da[R][k] = d_rh[k] * s.h_prev[k] * s.r[k] * (one - s.r[k]);
                dh_next[k] += d_rh[k] * s.r[k];
            }
            grads.w[N].add_outer(&da[N], &s.rh);
            grads.w[Z].add_outer(&da[Z], &s.h_prev);
            grads.w[R].add_outer(&da[R], &s.h_prev);
            self.w[Z].t_matvec_add(&da[Z], &mut dh_next);
            self.w[R].t_matvec_add(&da[R], &mut dh_next);
            #[allow(clippy::needless_range_loop)]
            for gate in 0..3 {
                grads.u[gate].add_outer(&da[gate], &s.x);
                add_assign(&mut grads.b[gate], &da[gate]);
                self.u[gate].t_matvec_add(&da[gate], &mut dxs[t]);
            }
        }
    }

    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(9);
        for (k, name) in GRU_GATES.iter().enumerate() {
            out.push((format!("U_{}", name), self.u[k].data.as_slice()));
            out.push((format!("W_{}", name), self.w[k].data.as_slice()));
            out.push((format!("b_{}", name), self.b[k].as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(9);
        for ((u, w), b) in self
            .u
            .iter_mut()
            .zip(self.w.iter_mut())
            .zip(self.b.iter_mut())
        {
            out.push(u.data.as_mut_slice());
            out.push(w.data.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GruStep<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    z: Vec<T>,
    r: Vec<T>,
    rh: Vec<T>,
    n: Vec<T>,
    pub h: Vec<T>,
}

/// Either cell family.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell<T> {
    Lstm(LstmCell<T>),
    Gru(GruCell<T>),
}

#[derive(Debug, Clone)]
pub(crate) enum Chain<T> {
    Lstm(Vec<LstmStep<T>>),
    Gru(Vec<GruStep<T>>),
}

impl<T: Real> Chain<T> {
    pub fn len(&self) -> usize {
        match self {
            Chain::Lstm(s) => s.len(),
            Chain::Gru(s) => s.len(),
        }
    }

    pub fn hidden_at(&self, t: usize) -> &[T] {
        match self {
            Chain::Lstm(s) => &s[t].h,
            Chain::Gru(s) => &s[t].h,
        }
    }
}

impl<T: Real> Cell<T> {
    pub fn hidden(&self) -> usize {
        match self {
            Cell::Lstm(c) => c.hidden(),
            Cell::Gru(c) => c.hidden(),
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Cell::Lstm(c) => c.input(),
            Cell::Gru(c) => c.input(),
        }
    }

    /// Zero tensors of the same family and shape.
    pub fn zeros_like(&self) -> Self {
        match self {
            Cell::Lstm(c) => Cell::Lstm(LstmCell::zeros(c.input(), c.hidden())),
            Cell::Gru(c) => Cell::Gru(GruCell::zeros(c.input(), c.hidden())),
        }
    }

    pub(crate) fn run(&self, xs: &[&[T]]) -> Chain<T> {
        match self {
            Cell::Lstm(c) => Chain::Lstm(c.run(xs)),
            Cell::Gru(c) => Chain::Gru(c.run(xs)),
        }
    }

    pub(crate) fn backprop(
        &self,
        chain: &Chain<T>,
        dh_ext: &[Vec<T>],
        grads: &mut Cell<T>,
        dxs: &mut [Vec<T>],
    ) {
        match (self, chain, grads) {
            (Cell::Lstm(c), Chain::Lstm(s), Cell::Lstm(g)) => c.backprop(s, dh_ext, g, dxs),
            (Cell::Gru(c), Chain::Gru(s), Cell::Gru(g)) => c.backprop(s, dh_ext, g, dxs),
            _ => unreachable!("cell family mismatch is checked by the caller"),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &[T])> {
        match self {
            Cell::Lstm(c) => c.tensors(),
            Cell::Gru(c) => c.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Cell::Lstm(c) => c.tensors_mut(),
            Cell::Gru(c) => c.tensors_mut(),
        }
    }

    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        let (d, h) = (self.input(), self.hidden());
        let gates = match self {
            Cell::Lstm(_) => 4,
            Cell::Gru(_) => 3,
        };
        (0..gates).flat_map(|_| [(h, d), (h, h), (h, 1)]).collect()
    }
}
