//! Batched LSTM cell with padding masks, forward and backward.
//!
//! Padded steps carry hidden and cell state through unchanged and
//! contribute no gradient, so trailing `<pad>` positions never change the
//! output. Both directions use the same code: the caller feeds steps in
//! processing order and reverses the sequence for the backward direction.

use ndarray::{s, Array1, Array2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    /// `[input_dim, 4 * hidden]`, gate order i, f, g, o.
    pub w_x: Array2<f64>,
    /// `[hidden, 4 * hidden]`.
    pub w_h: Array2<f64>,
    /// `[4 * hidden]`.
    pub b: Array1<f64>,
}

impl CellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        CellParams {
            w_x: Array2::zeros((input_dim, 4 * hidden)),
            w_h: Array2::zeros((hidden, 4 * hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.nrows()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub struct StepCache {
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
    c_prev: Array2<f64>,
    h_prev: Array2<f64>,
}

pub struct LstmCache {
    steps: Vec<StepCache>,
}

/// Run the cell over `xs` (one `[batch, input_dim]` array per step) with
/// `masks` (`[batch, 1]`, 1.0 on real tokens). Returns the final hidden
/// state `[batch, hidden]`.
pub fn forward(
    params: &CellParams,
    xs: &[Array2<f64>],
    masks: &[Array2<f64>],
) -> (Array2<f64>, LstmCache) {
    let hidden = params.hidden();
    let batch = xs.first().map(|x| x.nrows()).unwrap_or(0);
    let mut h = Array2::<f64>::zeros((batch, hidden));
    let mut c = Array2::<f64>::zeros((batch, hidden));
    let mut steps = Vec::with_capacity(xs.len());
    for (x, m) in xs.iter().zip(masks) {
        let mut gates = x.dot(&params.w_x) + h.dot(&params.w_h);
        gates += &params.b;
        let i = gates.slice(s![.., 0..hidden]).mapv(sigmoid);
        let f = gates.slice(s![.., hidden..2 * hidden]).mapv(sigmoid);
        let g = gates.slice(s![.., 2 * hidden..3 * hidden]).mapv(f64::tanh);
        let o = gates.slice(s![.., 3 * hidden..4 * hidden]).mapv(sigmoid);
        let c_tilde = &f * &c + &i * &g;
        let tanh_c = c_tilde.mapv(f64::tanh);
        let h_tilde = &o * &tanh_c;
        let keep = m.mapv(|v| 1.0 - v);
        let c_next = &c_tilde * m + &c * &keep;
        let h_next = &h_tilde * m + &h * &keep;
        steps.push(StepCache {
            i,
            f,
            g,
            o,
            tanh_c,
            c_prev: c,
            h_prev: h,
        });
        c = c_next;
        h = h_next;
    }
    (h, LstmCache { steps })
}

/// Backpropagate the gradient of the final hidden state. Returns parameter
/// gradients; input gradients are not needed (embeddings stay frozen).
pub fn backward(
    params: &CellParams,
    xs: &[Array2<f64>],
    masks: &[Array2<f64>],
    cache: &LstmCache,
    d_final_h: &Array2<f64>,
) -> CellParams {
    let hidden = params.hidden();
    let input_dim = params.w_x.nrows();
    let mut grads = CellParams::zeros(input_dim, hidden);
    let batch = d_final_h.nrows();
    let mut dh = d_final_h.clone();
    let mut dc = Array2::<f64>::zeros((batch, hidden));
    for t in (0..cache.steps.len()).rev() {
        let st = &cache.steps[t];
        let m = &masks[t];
        let keep = m.mapv(|v| 1.0 - v);
        let dh_tilde = &dh * m;
        let dh_carry = &dh * &keep;
        let mut dc_tilde = &dc * m;
        let dc_carry = &dc * &keep;

        let d_o = &dh_tilde * &st.tanh_c;
        dc_tilde = dc_tilde + &dh_tilde * &st.o * &st.tanh_c.mapv(|v| 1.0 - v * v);
        let d_f = &dc_tilde * &st.c_prev;
        let d_i = &dc_tilde * &st.g;
        let d_g = &dc_tilde * &st.i;
        dc = &dc_tilde * &st.f + dc_carry;

        let mut d_gates = Array2::<f64>::zeros((batch, 4 * hidden));
        d_gates
            .slice_mut(s![.., 0..hidden])
            .assign(&(&d_i * &st.i * &st.i.mapv(|v| 1.0 - v)));
        d_gates
            .slice_mut(s![.., hidden..2 * hidden])
            .assign(&(&d_f * &st.f * &st.f.mapv(|v| 1.0 - v)));
        d_gates
            .slice_mut(s![.., 2 * hidden..3 * hidden])
            .assign(&(&d_g * &st.g.mapv(|v| 1.0 - v * v)));
        d_gates
            .slice_mut(s![.., 3 * hidden..4 * hidden])
            .assign(&(&d_o * &st.o * &st.o.mapv(|v| 1.0 - v)));

        grads.w_x = grads.w_x + xs[t].t().dot(&d_gates);
        grads.w_h = grads.w_h + st.h_prev.t().dot(&d_gates);
        grads.b = grads.b + d_gates.sum_axis(Axis(0));

        dh = d_gates.dot(&params.w_h.t()) + dh_carry;
    }
    grads
}
