use rand::rngs::SmallRng;
use rand::SeedableRng;

use super::actions::{ActionKind, ActionSpace};
use super::model::SyntaxLm;
use super::parser::{ParseLimits, ParserState};
use super::train::{ActionScorer, SyntaxConfig};
use super::SyntaxError;
use crate::nn::{Backend, Eval, Lstm, LstmLayer, LstmState, ParamId, Params, INIT_SCALE};

/// Generative RNNG: a stack LSTM reads the stack of word, open-nonterminal
/// and composed-constituent vectors; REDUCE replaces an open constituent and
/// its children by a bidirectional-LSTM composition.
#[derive(Clone, Debug, PartialEq)]
pub struct Rnng {
    pub config: SyntaxConfig,
    pub params: Params,
    space: ActionSpace,
    word_embed: ParamId,
    nt_embed: ParamId,
    guard: ParamId,
    stack: Lstm,
    comp_fwd: LstmLayer,
    comp_bwd: LstmLayer,
    comp_w: ParamId,
    comp_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry<V> {
    repr: V,
    open: Option<usize>,
}

/// Stack contents plus the stack-LSTM state after each push; `lstm[0]` is
/// the state after reading the guard vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RnngState<V = Vec<f64>> {
    entries: Vec<Entry<V>>,
    lstm: Vec<LstmState<V>>,
}

impl<V> RnngState<V> {
    pub fn stack_len(&self) -> usize {
        self.entries.len()
    }
}

impl Rnng {
    pub fn new(space: ActionSpace, config: SyntaxConfig) -> Self {
        let mut rng = SmallRng::seed_from_u64(config.seed);
        let mut p = Params::new();
        let d = config.dim;
        let word_embed = p.add_uniform("rnng.word_embed", space.vocab().len(), d, INIT_SCALE, &mut rng);
        let nt_embed = p.add_uniform("rnng.nt_embed", space.labels().len(), d, INIT_SCALE, &mut rng);
        let guard = p.add_uniform("rnng.guard", d, 1, INIT_SCALE, &mut rng);
        let stack = Lstm::new(&mut p, "rnng.stack", d, d, config.layers, &mut rng);
        let comp_fwd = LstmLayer::new(&mut p, "rnng.comp.fwd", d, d, &mut rng);
        let comp_bwd = LstmLayer::new(&mut p, "rnng.comp.bwd", d, d, &mut rng);
        let comp_w = p.add_uniform("rnng.comp.w", d, 2 * d, INIT_SCALE, &mut rng);
        let comp_b = p.add_zeros("rnng.comp.b", d, 1);
        let out_w = p.add_uniform("rnng.out.w", space.len(), d, INIT_SCALE, &mut rng);
        let out_b = p.add_zeros("rnng.out.b", space.len(), 1);
        Rnng {
            config,
            params: p,
            space,
            word_embed,
            nt_embed,
            guard,
            stack,
            comp_fwd,
            comp_bwd,
            comp_w,
            comp_b,
            out_w,
            out_b,
        }
    }

    /// Composition of a closed constituent: forward LSTM over
    /// `[label, c1 .. cn]`, backward LSTM over `[label, cn .. c1]`, then
    /// `tanh(W [f; b] + bias)`.
    pub fn compose<B: Backend>(&self, b: &mut B, label: usize, children: &[B::V]) -> Result<B::V, SyntaxError> {
        if children.is_empty() {
            return Err(SyntaxError::EmptyComposition);
        }
        let d = self.config.dim;
        let lab = b.row(self.nt_embed, label);
        let read = |b: &mut B, layer: &LstmLayer, seq: &mut dyn Iterator<Item = &B::V>| {
            let zero = b.constant(vec![0.0; d]);
            let (mut h, mut c) = layer.step(b, &zero, &zero, &lab);
            for x in seq {
                (h, c) = layer.step(b, &h, &c, x);
            }
            h
        };
        let f = read(b, &self.comp_fwd, &mut children.iter());
        let r = read(b, &self.comp_bwd, &mut children.iter().rev());
        let fr = b.concat(&[f, r]);
        let z = b.affine(self.comp_w, self.comp_b, &fr);
        Ok(b.tanh(&z))
    }

    fn start<B: Backend>(&self, b: &mut B) -> RnngState<B::V> {
        let zero = self.stack.zero_state(b);
        let g = b.param(self.guard);
        RnngState {
            entries: Vec::new(),
            lstm: vec![self.stack.step(b, &zero, &g)],
        }
    }

    fn push<B: Backend>(&self, b: &mut B, st: &mut RnngState<B::V>, repr: B::V, open: Option<usize>) {
        let next = self.stack.step(b, st.lstm.last().expect("guard state"), &repr);
        st.lstm.push(next);
        st.entries.push(Entry { repr, open });
    }

    fn step<B: Backend>(&self, b: &mut B, st: &RnngState<B::V>, action: usize) -> RnngState<B::V> {
        let mut st = st.clone();
        match self.space.kind(action) {
            ActionKind::Nt(l) => {
                let x = b.row(self.nt_embed, l);
                self.push(b, &mut st, x, Some(l));
            }
            ActionKind::Gen(w) => {
                let x = b.row(self.word_embed, w);
                self.push(b, &mut st, x, None);
            }
            ActionKind::Reduce => {
                let mut children = Vec::new();
                let label = loop {
                    let e = st.entries.pop().expect("REDUCE needs an open constituent");
                    st.lstm.pop();
                    match e.open {
                        Some(l) => break l,
                        None => children.push(e.repr),
                    }
                };
                children.reverse();
                let c = self.compose(b, label, &children).expect("REDUCE needs a child");
                self.push(b, &mut st, c, None);
            }
        }
        st
    }

    fn head<B: Backend>(&self, b: &mut B, st: &RnngState<B::V>) -> B::V {
        let top = st.lstm.last().expect("guard state").top().clone();
        b.affine(self.out_w, self.out_b, &top)
    }
}

impl ActionScorer for Rnng {
    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn losses<B: Backend>(&self, b: &mut B, actions: &[usize], limits: &ParseLimits) -> Result<Vec<B::V>, SyntaxError> {
        let mut parser = ParserState::new();
        let mut st = self.start(b);
        let mut out = Vec::new();
        for (t, &a) in actions.iter().enumerate() {
            let mask = parser.mask(&self.space, limits);
            if !mask[a] {
                return Err(SyntaxError::InvalidTransition(format!("{} at step {t}", self.space.name(a))));
            }
            if mask.iter().filter(|v| **v).count() > 1 {
                let z = self.head(b, &st);
                out.push(b.xent(&z, a, Some(&mask)));
            }
            parser.apply(self.space.kind(a), limits)?;
            if t + 1 < actions.len() {
                st = self.step(b, &st, a);
            }
        }
        Ok(out)
    }
}

impl SyntaxLm for Rnng {
    type State = RnngState;

    fn space(&self) -> &ActionSpace {
        &self.space
    }

    fn initial(&self) -> RnngState {
        self.start(&mut Eval::new(&self.params))
    }

    fn logits(&self, state: &RnngState) -> Vec<f64> {
        self.head(&mut Eval::new(&self.params), state)
    }

    fn advance(&self, state: &RnngState, action: usize) -> RnngState {
        self.step(&mut Eval::new(&self.params), state, action)
    }
}
