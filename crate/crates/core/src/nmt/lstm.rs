//! Standard LSTM cell with cached activations for backpropagation.
//!
//! Gate layout in the weight matrix rows: input, forget, output, candidate.

use rand::Rng;

use super::tensor::{concat, sigmoid, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4h × (input + h)`
    pub w: Mat,
    /// `4h × 1`
    pub b: Mat,
}

/// Activations of one cell step.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub xh: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, o, g]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmParams {
    pub fn init<R: Rng>(input: usize, hidden: usize, range: f64, rng: &mut R) -> Self {
        let w = Mat::uniform(4 * hidden, input + hidden, range, rng);
        let mut b = Mat::zeros(4 * hidden, 1);
        b.data[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        Self { w, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Mat::zeros(4 * hidden, input + hidden),
            b: Mat::zeros(4 * hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.rows / 4
    }

    pub fn input(&self) -> usize {
        self.w.cols - self.hidden()
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let h = self.hidden();
        let xh = concat(x, h_prev);
        let mut z = vec![0.0; 4 * h];
        self.w.matvec(&xh, &mut z);
        for (zi, bi) in z.iter_mut().zip(&self.b.data) {
            *zi += bi;
        }
        for v in &mut z[..3 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut z[3 * h..] {
            *v = v.tanh();
        }
        let (i, f, o, g) = (&z[..h], &z[h..2 * h], &z[2 * h..3 * h], &z[3 * h..]);
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hv: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        LstmStep {
            xh,
            c_prev: c_prev.to_vec(),
            gates: z,
            c,
            tanh_c,
            h: hv,
        }
    }

    /// Accumulates parameter gradients into `grad` and returns
    /// `(d input, d h_prev, d c_prev)`.
    pub fn backward(
        &self,
        step: &LstmStep,
        dh: &[f64],
        dc_next: &[f64],
        grad: &mut LstmParams,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden();
        let g = &step.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, o, gg) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let dc = dc_next[k] + dh[k] * o * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
            dz[k] = dc * gg * i * (1.0 - i);
            dz[h + k] = dc * step.c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dh[k] * step.tanh_c[k] * o * (1.0 - o);
            dz[3 * h + k] = dc * i * (1.0 - gg * gg);
            dc_prev[k] = dc * f;
        }
        grad.w.outer_acc(&dz, &step.xh);
        for (gb, d) in grad.b.data.iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dxh = vec![0.0; self.w.cols];
        self.w.matvec_t_acc(&dz, &mut dxh);
        let dh_prev = dxh.split_off(self.input());
        (dxh, dh_prev, dc_prev)
    }
}
