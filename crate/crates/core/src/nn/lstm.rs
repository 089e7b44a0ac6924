use rand::Rng;

use super::backend::{Backend, Eval};
use super::params::{ParamId, Params};
use super::NnError;

pub const INIT_SCALE: f64 = 0.1;
pub const FORGET_BIAS: f64 = 1.0;

/// One LSTM layer. Gate rows are stacked `[i; f; g; o]` and act on `[x; h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmLayer {
    pub fn new<R: Rng>(params: &mut Params, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let w = params.add_uniform(format!("{name}.w"), 4 * hidden, input + hidden, INIT_SCALE, rng);
        let b = params.add_zeros(format!("{name}.b"), 4 * hidden, 1);
        for x in &mut params.get_mut(b).data[hidden..2 * hidden] {
            *x = FORGET_BIAS;
        }
        LstmLayer { w, b, input, hidden }
    }

    pub fn step<B: Backend>(&self, b: &mut B, h: &B::V, c: &B::V, x: &B::V) -> (B::V, B::V) {
        let d = self.hidden;
        let xh = b.concat(&[x.clone(), h.clone()]);
        let z = b.affine(self.w, self.b, &xh);
        let zi = b.slice(&z, 0, d);
        let zf = b.slice(&z, d, d);
        let zg = b.slice(&z, 2 * d, d);
        let zo = b.slice(&z, 3 * d, d);
        let i = b.sigmoid(&zi);
        let f = b.sigmoid(&zf);
        let g = b.tanh(&zg);
        let o = b.sigmoid(&zo);
        let fc = b.mul(&f, c);
        let ig = b.mul(&i, &g);
        let c2 = b.add(&fc, &ig);
        let tc = b.tanh(&c2);
        let h2 = b.mul(&o, &tc);
        (h2, c2)
    }
}

/// Per-layer hidden and cell vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<V = Vec<f64>> {
    pub h: Vec<V>,
    pub c: Vec<V>,
}

impl<V> LstmState<V> {
    pub fn top(&self) -> &V {
        self.h.last().expect("lstm has at least one layer")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub layers: Vec<LstmLayer>,
}

impl Lstm {
    pub fn new<R: Rng>(params: &mut Params, name: &str, input: usize, hidden: usize, depth: usize, rng: &mut R) -> Self {
        assert!(depth >= 1 && hidden >= 1);
        let layers = (0..depth)
            .map(|l| {
                let inp = if l == 0 { input } else { hidden };
                LstmLayer::new(params, &format!("{name}.l{l}"), inp, hidden, rng)
            })
            .collect();
        Lstm { layers }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn input(&self) -> usize {
        self.layers[0].input
    }

    pub fn zero_state<B: Backend>(&self, b: &mut B) -> LstmState<B::V> {
        let d = self.hidden();
        let z = b.constant(vec![0.0; d]);
        LstmState {
            h: vec![z.clone(); self.layers.len()],
            c: vec![z; self.layers.len()],
        }
    }

    pub fn step<B: Backend>(&self, b: &mut B, state: &LstmState<B::V>, x: &B::V) -> LstmState<B::V> {
        let mut h = Vec::with_capacity(self.layers.len());
        let mut c = Vec::with_capacity(self.layers.len());
        let mut input = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let (h2, c2) = layer.step(b, &state.h[l], &state.c[l], &input);
            input = h2.clone();
            h.push(h2);
            c.push(c2);
        }
        LstmState { h, c }
    }
}

/// Checked single step over concrete vectors.
pub fn lstm_step(params: &Params, lstm: &Lstm, state: &LstmState, input: &[f64]) -> Result<LstmState, NnError> {
    let d = lstm.hidden();
    if input.len() != lstm.input() {
        return Err(NnError::Dimension {
            what: "lstm input".into(),
            expected: lstm.input(),
            found: input.len(),
        });
    }
    if state.h.len() != lstm.layers.len() || state.c.len() != lstm.layers.len() {
        return Err(NnError::Dimension {
            what: "lstm layer count".into(),
            expected: lstm.layers.len(),
            found: state.h.len().min(state.c.len()),
        });
    }
    if let Some(bad) = state.h.iter().chain(&state.c).find(|v| v.len() != d) {
        return Err(NnError::Dimension {
            what: "lstm state".into(),
            expected: d,
            found: bad.len(),
        });
    }
    let mut e = Eval::new(params);
    Ok(lstm.step(&mut e, state, &input.to_vec()))
}

/// Embedding, stacked LSTM, and a linear softmax layer. Used as the word
/// language model and, over action tokens, as the ActionLSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLm {
    pub embed: ParamId,
    pub lstm: Lstm,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub n_in: usize,
    pub n_out: usize,
}

impl LstmLm {
    pub fn new<R: Rng>(
        params: &mut Params,
        name: &str,
        n_in: usize,
        n_out: usize,
        dim: usize,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let embed = params.add_uniform(format!("{name}.embed"), n_in, dim, INIT_SCALE, rng);
        let lstm = Lstm::new(params, &format!("{name}.lstm"), dim, dim, depth, rng);
        let out_w = params.add_uniform(format!("{name}.out.w"), n_out, dim, INIT_SCALE, rng);
        let out_b = params.add_zeros(format!("{name}.out.b"), n_out, 1);
        LstmLm {
            embed,
            lstm,
            out_w,
            out_b,
            n_in,
            n_out,
        }
    }

    pub fn start<B: Backend>(&self, b: &mut B) -> LstmState<B::V> {
        self.lstm.zero_state(b)
    }

    pub fn step<B: Backend>(&self, b: &mut B, state: &LstmState<B::V>, token: usize) -> LstmState<B::V> {
        assert!(token < self.n_in, "input token {token} out of range {}", self.n_in);
        let x = b.row(self.embed, token);
        self.lstm.step(b, state, &x)
    }

    pub fn logits<B: Backend>(&self, b: &mut B, state: &LstmState<B::V>) -> B::V {
        b.affine(self.out_w, self.out_b, state.top())
    }

    /// Sum of cross-entropies (bits) for predicting `targets[t]` after
    /// reading `inputs[..=t]`, with optional per-step masks. Returns the
    /// per-step loss nodes.
    pub fn sequence_losses<B: Backend>(
        &self,
        b: &mut B,
        inputs: &[usize],
        targets: &[usize],
        masks: Option<&[Vec<bool>]>,
    ) -> Vec<B::V> {
        assert_eq!(inputs.len(), targets.len());
        let mut st = self.start(b);
        let mut out = Vec::with_capacity(targets.len());
        for (t, (&i, &y)) in inputs.iter().zip(targets).enumerate() {
            st = self.step(b, &st, i);
            let z = self.logits(b, &st);
            out.push(b.xent(&z, y, masks.map(|m| m[t].as_slice())));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let mut rng = SmallRng::seed_from_u64(1);
        let mut p = Params::new();
        let lstm = Lstm::new(&mut p, "l", 3, 4, 1, &mut rng);
        for id in p.ids().collect::<Vec<_>>() {
            p.get_mut(id).data.fill(0.0);
        }
        let st = LstmState {
            h: vec![vec![0.0; 4]],
            c: vec![vec![0.0; 4]],
        };
        let out = lstm_step(&p, &lstm, &st, &[0.0; 3]).unwrap();
        assert_eq!(out.h[0], vec![0.0; 4]);
        assert_eq!(out.c[0], vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_carries_cell() {
        let mut rng = SmallRng::seed_from_u64(2);
        let mut p = Params::new();
        let lstm = Lstm::new(&mut p, "l", 2, 3, 1, &mut rng);
        let layer = &lstm.layers[0];
        p.get_mut(layer.w).data.fill(0.0);
        let bias = &mut p.get_mut(layer.b).data;
        bias.fill(0.0);
        bias[3..6].fill(60.0);
        let c = vec![0.7, -1.3, 2.0];
        let st = LstmState {
            h: vec![vec![0.2, 0.1, -0.4]],
            c: vec![c.clone()],
        };
        let out = lstm_step(&p, &lstm, &st, &[5.0, -2.0]).unwrap();
        for (a, b) in out.c[0].iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_scalar_gate_equations() {
        let mut rng = SmallRng::seed_from_u64(3);
        let mut p = Params::new();
        let (n, d) = (3, 4);
        let lstm = Lstm::new(&mut p, "l", n, d, 2, &mut rng);
        for id in p.ids().collect::<Vec<_>>() {
            for x in &mut p.get_mut(id).data {
                *x = rng.random_range(-1.0..1.0);
            }
        }
        let st = LstmState {
            h: (0..2).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            c: (0..2).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = lstm_step(&p, &lstm, &st, &x).unwrap();

        let mut input = x.clone();
        for (l, layer) in lstm.layers.iter().enumerate() {
            let w = p.get(layer.w);
            let b = &p.get(layer.b).data;
            let cols = w.cols;
            let pre = |gate: usize, k: usize| {
                let r = gate * d + k;
                let mut s = b[r];
                for j in 0..input.len() {
                    s += w.data[r * cols + j] * input[j];
                }
                for j in 0..d {
                    s += w.data[r * cols + input.len() + j] * st.h[l][j];
                }
                s
            };
            let mut h = vec![0.0; d];
            for k in 0..d {
                let i = sig(pre(0, k));
                let f = sig(pre(1, k));
                let g = pre(2, k).tanh();
                let o = sig(pre(3, k));
                let c = f * st.c[l][k] + i * g;
                h[k] = o * c.tanh();
                assert!((got.c[l][k] - c).abs() < 1e-14);
                assert!((got.h[l][k] - h[k]).abs() < 1e-14);
            }
            input = h;
        }
    }

    #[test]
    fn dimension_errors() {
        let mut rng = SmallRng::seed_from_u64(4);
        let mut p = Params::new();
        let lstm = Lstm::new(&mut p, "l", 2, 3, 1, &mut rng);
        let st = LstmState {
            h: vec![vec![0.0; 3]],
            c: vec![vec![0.0; 3]],
        };
        assert!(matches!(
            lstm_step(&p, &lstm, &st, &[0.0; 5]),
            Err(NnError::Dimension { expected: 2, found: 5, .. })
        ));
        let short = LstmState {
            h: vec![vec![0.0; 2]],
            c: vec![vec![0.0; 3]],
        };
        assert!(lstm_step(&p, &lstm, &short, &[0.0; 2]).is_err());
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = SmallRng::seed_from_u64(5);
        let mut p = Params::new();
        let layer = LstmLayer::new(&mut p, "x", 2, 3, &mut rng);
        let b = &p.get(layer.b).data;
        assert_eq!(&b[..3], &[0.0; 3]);
        assert_eq!(&b[3..6], &[1.0; 3]);
        assert!(p.get(layer.w).data.iter().all(|w| w.abs() < INIT_SCALE));
    }
}
