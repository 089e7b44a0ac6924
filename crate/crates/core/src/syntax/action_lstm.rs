use rand::rngs::SmallRng;
use rand::SeedableRng;

use super::actions::ActionSpace;
use super::model::SyntaxLm;
use super::parser::{ParseLimits, ParserState};
use super::train::{ActionScorer, SyntaxConfig};
use super::SyntaxError;
use crate::nn::{Backend, Eval, LstmLm, LstmState, Params};

/// Sequence model over the raw action history: an [`LstmLm`] whose input
/// alphabet is the action space plus a start token.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionLstm {
    pub config: SyntaxConfig,
    pub params: Params,
    space: ActionSpace,
    net: LstmLm,
}

impl ActionLstm {
    pub fn new(space: ActionSpace, config: SyntaxConfig) -> Self {
        let mut rng = SmallRng::seed_from_u64(config.seed);
        let mut params = Params::new();
        let n = space.len();
        let net = LstmLm::new(&mut params, "alstm", n + 1, n, config.dim, config.layers, &mut rng);
        ActionLstm {
            config,
            params,
            space,
            net,
        }
    }

    pub fn start_token(&self) -> usize {
        self.space.len()
    }

    pub fn net(&self) -> &LstmLm {
        &self.net
    }
}

impl ActionScorer for ActionLstm {
    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn losses<B: Backend>(&self, b: &mut B, actions: &[usize], limits: &ParseLimits) -> Result<Vec<B::V>, SyntaxError> {
        let mut parser = ParserState::new();
        let st = self.net.start(b);
        let mut st = self.net.step(b, &st, self.start_token());
        let mut out = Vec::new();
        for (t, &a) in actions.iter().enumerate() {
            let mask = parser.mask(&self.space, limits);
            if !mask[a] {
                return Err(SyntaxError::InvalidTransition(format!("{} at step {t}", self.space.name(a))));
            }
            // forced moves contribute nothing to the loss
            if mask.iter().filter(|v| **v).count() > 1 {
                let z = self.net.logits(b, &st);
                out.push(b.xent(&z, a, Some(&mask)));
            }
            parser.apply(self.space.kind(a), limits)?;
            if t + 1 < actions.len() {
                st = self.net.step(b, &st, a);
            }
        }
        Ok(out)
    }
}

impl SyntaxLm for ActionLstm {
    type State = LstmState;

    fn space(&self) -> &ActionSpace {
        &self.space
    }

    fn initial(&self) -> LstmState {
        let mut e = Eval::new(&self.params);
        let st = self.net.start(&mut e);
        self.net.step(&mut e, &st, self.start_token())
    }

    fn logits(&self, state: &LstmState) -> Vec<f64> {
        let mut e = Eval::new(&self.params);
        self.net.logits(&mut e, state)
    }

    fn advance(&self, state: &LstmState, action: usize) -> LstmState {
        let mut e = Eval::new(&self.params);
        self.net.step(&mut e, state, action)
    }
}
