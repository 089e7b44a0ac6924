//! Syntax-supervised language models over NT/GEN/REDUCE action sequences.

mod action_lstm;
mod actions;
mod model;
mod parser;
mod rnng;
mod train;

pub use action_lstm::ActionLstm;
pub use actions::{actions_to_tree, tree_to_actions, Action, ActionKind, ActionSpace};
pub use model::{
    action_surprisals, encode_tree, joint_logprob, next_action_distribution, next_action_log2probs, sample_actions,
    Hypothesis, SyntaxLm,
};
pub use parser::{ParseLimits, ParserState};
pub use rnng::{Rnng, RnngState};
pub use train::{
    build_space, prepare_bank, train_syntax_lm, train_syntax_lm_with, ActionScorer, SyntaxConfig, SyntaxModel,
    SyntaxTrainLog, Variant,
};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("malformed action sequence at position {position}: {reason}")]
    Malformed { position: usize, reason: String },
    #[error("unknown nonterminal `{0}`")]
    UnknownLabel(String),
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("no action is possible from a terminal parser state")]
    Terminal,
    #[error("composition needs at least one child")]
    EmptyComposition,
    #[error("treebank has no usable trees")]
    EmptyTreebank,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[cfg(test)]
pub(crate) mod stubs {
    use super::*;

    /// Constant logits: uniform over whatever the mask allows.
    pub struct UniformSyntax(pub ActionSpace);

    impl SyntaxLm for UniformSyntax {
        type State = ();
        fn space(&self) -> &ActionSpace {
            &self.0
        }
        fn initial(&self) {}
        fn logits(&self, _: &()) -> Vec<f64> {
            vec![0.0; self.0.len()]
        }
        fn advance(&self, _: &(), _: usize) {}
    }

    /// Fixed random logits per (history length, action), so the model is
    /// context dependent without any parameters.
    pub struct HashedSyntax {
        pub space: ActionSpace,
        pub salt: u64,
    }

    impl SyntaxLm for HashedSyntax {
        type State = Vec<u32>;
        fn space(&self) -> &ActionSpace {
            &self.space
        }
        fn initial(&self) -> Vec<u32> {
            Vec::new()
        }
        fn logits(&self, hist: &Vec<u32>) -> Vec<f64> {
            use std::hash::{DefaultHasher, Hash, Hasher};
            (0..self.space.len())
                .map(|a| {
                    let mut h = DefaultHasher::new();
                    (self.salt, hist, a).hash(&mut h);
                    (h.finish() % 10_000) as f64 / 2_500.0 - 2.0
                })
                .collect()
        }
        fn advance(&self, hist: &Vec<u32>, a: usize) -> Vec<u32> {
            let mut h = hist.clone();
            h.push(a as u32);
            h
        }
    }

    pub fn space(labels: &[&str], words: &[&str]) -> ActionSpace {
        ActionSpace::new(
            labels.iter().map(|s| s.to_string()).collect(),
            crate::lm::Vocabulary::from_words(words.iter().map(|s| s.to_string())),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::stubs::*;
    use super::*;
    use crate::nn::{grad_check, Eval, Gradients, Graph, LstmLm, Params};
    use crate::treebank::parse_bracketed;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn tree(s: &str) -> crate::treebank::Tree {
        parse_bracketed(s).unwrap()
    }

    /// Tree `k` groups the first `k` words of a fixed sequence into pairs,
    /// so every tree is determined by its length.
    fn prefix_bank() -> Vec<crate::treebank::Tree> {
        let words = [
            "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p", "q", "r", "s", "t",
        ];
        (1..=20)
            .map(|k| {
                let groups: Vec<String> = words[..k]
                    .chunks(2)
                    .enumerate()
                    .map(|(i, c)| {
                        let tagged: Vec<String> = c.iter().map(|w| format!("(W {w})")).collect();
                        format!("({} {})", if i % 2 == 0 { "NP" } else { "VP" }, tagged.join(" "))
                    })
                    .collect();
                tree(&format!("(S {})", groups.join(" ")))
            })
            .collect()
    }

    fn randomize(p: &mut Params, seed: u64, scale: f64) {
        let mut rng = SmallRng::seed_from_u64(seed);
        for id in p.ids().collect::<Vec<_>>() {
            for v in &mut p.get_mut(id).data {
                *v = rng.random_range(-scale..scale);
            }
        }
    }

    fn small_config(variant: Variant) -> SyntaxConfig {
        SyntaxConfig {
            variant,
            dim: 6,
            layers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn masking_examples() {
        let m = UniformSyntax(space(&["S", "NP"], &["a", "b"]));
        let limits = ParseLimits::default().with_words(1);
        let h = Hypothesis::initial(&m);
        let p = next_action_distribution(&m, &h, &limits).unwrap();
        assert_eq!(p[0], 0.0);
        assert_eq!(&p[1..3], &[0.5, 0.5]);
        assert!(p[3..].iter().all(|x| *x == 0.0));

        let h = h.extend(&m, 1, -1.0, &limits).extend(&m, m.space().gen(2), -2.0, &limits);
        let p = next_action_distribution(&m, &h, &limits).unwrap();
        assert_eq!(p[ActionSpace::REDUCE], 1.0);
        let h = h.extend(&m, 0, 0.0, &limits);
        assert!(matches!(next_action_distribution(&m, &h, &limits), Err(SyntaxError::Terminal)));
    }

    #[test]
    fn joint_logprob_is_sum_of_stepped_surprisals() {
        let m = HashedSyntax {
            space: space(&["S", "NP", "VP"], &["the", "door", "opens"]),
            salt: 3,
        };
        let t = tree("(S (NP the door) (VP opens))");
        let limits = ParseLimits::default();
        let total = joint_logprob(&m, &t, &limits).unwrap();
        let stepped_limits = limits.with_words(3);
        let mut h = Hypothesis::initial(&m);
        let mut sum = 0.0;
        for a in encode_tree(m.space(), &t).unwrap() {
            let p = next_action_distribution(&m, &h, &stepped_limits).unwrap();
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            sum -= p[a].log2();
            h = h.extend(&m, a, p[a].log2(), &stepped_limits);
        }
        assert!((total - sum).abs() < 1e-12);
        assert!(h.parser.is_terminal());
    }

    #[test]
    fn unreachable_trees_are_rejected() {
        let m = UniformSyntax(space(&["S"], &["a"]));
        let deep = tree("(S (S (S (S a))))");
        let limits = ParseLimits {
            max_structural: 3,
            ..Default::default()
        };
        assert!(matches!(joint_logprob(&m, &deep, &limits), Err(SyntaxError::InvalidTransition(_))));
        assert!(joint_logprob(&m, &tree("(S (S (S a)))"), &limits).is_ok());
    }

    #[test]
    fn action_lstm_matches_generic_sequence_scorer() {
        let bank = vec![tree("(S (NP the door) (VP opens))"), tree("(S (NP doors) (VP open now))")];
        let (model, _) = train_syntax_lm(&bank, &SyntaxConfig { epochs: 3, ..small_config(Variant::ActionLstm) }).unwrap();
        let SyntaxModel::ActionLstm(m) = model else { unreachable!() };
        let limits = ParseLimits::default();
        for t in &bank {
            let actions = encode_tree(m.space(), t).unwrap();
            let lim = limits.with_words(t.words().len());
            // replay the transition system to get per-step masks, then score
            // the action tokens with the plain sequence LM
            let mut parser = ParserState::new();
            let mut masks = Vec::new();
            for &a in &actions {
                masks.push(parser.mask(m.space(), &lim));
                parser.apply(m.space().kind(a), &lim).unwrap();
            }
            let mut inputs = vec![m.start_token()];
            inputs.extend_from_slice(&actions[..actions.len() - 1]);
            let net: &LstmLm = m.net();
            let mut e = Eval::new(&m.params);
            let generic: f64 = net
                .sequence_losses(&mut e, &inputs, &actions, Some(&masks))
                .iter()
                .map(|l| l[0])
                .sum();
            let joint = joint_logprob(&m, t, &limits).unwrap();
            assert!((generic - joint).abs() < 1e-9, "{generic} vs {joint}");
        }
    }

    #[test]
    fn composition_examples() {
        let sp = space(&["NP", "VP"], &["a"]);
        let mut m = Rnng::new(sp.clone(), small_config(Variant::Rnng));
        for id in m.params.ids().collect::<Vec<_>>() {
            m.params.get_mut(id).data.fill(0.0);
        }
        let mut e = Eval::new(&m.params);
        let child = vec![0.3; 6];
        assert_eq!(m.compose(&mut e, 0, &[child]).unwrap(), vec![0.0; 6]);
        assert!(matches!(m.compose(&mut e, 0, &[]), Err(SyntaxError::EmptyComposition)));

        let m = Rnng::new(sp, small_config(Variant::Rnng));
        let mut p = m.params.clone();
        randomize(&mut p, 5, 0.5);
        let mut e = Eval::new(&p);
        let a: Vec<f64> = (0..6).map(|i| i as f64 / 6.0 - 0.4).collect();
        let b: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let ab = m.compose(&mut e, 1, &[a.clone(), b.clone()]).unwrap();
        let ba = m.compose(&mut e, 1, &[b, a]).unwrap();
        assert!(ab.iter().zip(&ba).any(|(x, y)| (x - y).abs() > 1e-6));
    }

    fn check_model_gradients(variant: Variant) {
        let bank = vec![tree("(S (NP the door) (VP opens (NP the window)))")];
        let trees = prepare_bank(&bank, false);
        let sp = build_space(&trees, 1);
        let mut model = SyntaxModel::new(sp, small_config(variant));
        let t = &trees[0];
        let limits = ParseLimits::default().with_words(t.words().len());
        let report = match &mut model {
            SyntaxModel::ActionLstm(m) => {
                randomize(&mut m.params, 8, 0.5);
                let actions = encode_tree(m.space(), t).unwrap();
                grads_vs_fd(m, &actions, &limits)
            }
            SyntaxModel::Rnng(m) => {
                randomize(&mut m.params, 9, 0.5);
                let actions = encode_tree(m.space(), t).unwrap();
                grads_vs_fd(m, &actions, &limits)
            }
        };
        assert!(report.max_error() < 1e-4, "{report:?}");
    }

    fn grads_vs_fd<M: ActionScorer + Clone>(m: &M, actions: &[usize], limits: &ParseLimits) -> crate::nn::GradCheckReport {
        let mut g = Graph::new(m.params());
        let losses = m.losses(&mut g, actions, limits).unwrap();
        let mut grads = Gradients::zeros_like(m.params());
        g.backward(&losses, &mut grads);
        let mut probe = m.clone();
        grad_check(
            m.params(),
            &grads,
            |q| {
                *probe.params_mut() = q.clone();
                probe.sequence_bits(actions, limits).unwrap()
            },
            1e-3,
            48,
            4,
        )
    }

    #[test]
    fn action_lstm_gradients() {
        check_model_gradients(Variant::ActionLstm);
    }

    #[test]
    fn rnng_gradients_including_composition() {
        check_model_gradients(Variant::Rnng);
    }

    #[test]
    fn memorizes_prefix_bank() {
        let bank = prefix_bank();
        for variant in [Variant::ActionLstm, Variant::Rnng] {
            let cfg = SyntaxConfig {
                variant,
                dim: 32,
                epochs: 200,
                batch_size: 4,
                lr: 1.0,
                lr_decay: 0.95,
                decay_after: 150,
                ..Default::default()
            };
            let (model, log) = train_syntax_lm(&bank, &cfg).unwrap();
            assert_eq!(log.trees_used, 20);
            for t in &prepare_bank(&bank, false) {
                let bits = match &model {
                    SyntaxModel::ActionLstm(m) => joint_logprob(m, t, &cfg.limits).unwrap(),
                    SyntaxModel::Rnng(m) => joint_logprob(m, t, &cfg.limits).unwrap(),
                };
                assert!(bits < 1.0, "{variant:?}: {bits} bits for {t}");
            }
        }
    }

    #[test]
    fn training_is_reproducible_and_finite() {
        let bank = vec![
            tree("(S (NP (DT the) (NN door)) (VP (VBZ opens)))"),
            tree("(S (NP (NP the doors) (CC and) (NP a key)) (VP are (ADJP red)))"),
        ];
        for variant in [Variant::ActionLstm, Variant::Rnng] {
            let cfg = SyntaxConfig { epochs: 2, ..small_config(variant) };
            let (a, _) = train_syntax_lm(&bank, &cfg).unwrap();
            let (b, _) = train_syntax_lm(&bank, &cfg).unwrap();
            assert_eq!(a.to_checkpoint(), b.to_checkpoint());
            for t in prepare_bank(&bank, false) {
                let bits = match &a {
                    SyntaxModel::ActionLstm(m) => joint_logprob(m, &t, &cfg.limits).unwrap(),
                    SyntaxModel::Rnng(m) => joint_logprob(m, &t, &cfg.limits).unwrap(),
                };
                assert!(bits.is_finite() && bits > 0.0);
            }
        }
        assert!(matches!(train_syntax_lm(&[], &SyntaxConfig::default()), Err(SyntaxError::EmptyTreebank)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let bank = vec![tree("(S (NP the door) (VP opens))")];
        let dir = tempfile::tempdir().unwrap();
        for variant in [Variant::ActionLstm, Variant::Rnng] {
            let (m, _) = train_syntax_lm(&bank, &SyntaxConfig { epochs: 1, ..small_config(variant) }).unwrap();
            let path = dir.path().join(format!("{}.json", variant.as_str()));
            m.save(&path).unwrap();
            assert_eq!(SyntaxModel::load(&path).unwrap(), m);
        }
    }

    #[test]
    fn preterminals_can_be_kept() {
        let bank = vec![tree("(S (NP (DT the) (NN door)) (VP (VBZ opens)))")];
        let kept = prepare_bank(&bank, true);
        let sp = build_space(&kept, 1);
        assert!(sp.label_id("NN").is_some());
        let stripped = build_space(&prepare_bank(&bank, false), 1);
        assert!(stripped.label_id("NN").is_none());
    }

    #[test]
    fn sampled_sequences_decode() {
        let bank = vec![tree("(S (NP the door) (VP opens (PP in (NP May))))")];
        let trees = prepare_bank(&bank, false);
        let sp = build_space(&trees, 1);
        let limits = ParseLimits {
            max_words: Some(12),
            ..Default::default()
        };
        let mut rng = SmallRng::seed_from_u64(42);
        for variant in [Variant::ActionLstm, Variant::Rnng] {
            let model = SyntaxModel::new(sp.clone(), small_config(variant));
            for _ in 0..300 {
                let seq = match &model {
                    SyntaxModel::ActionLstm(m) => sample_actions(m, &limits, &mut rng),
                    SyntaxModel::Rnng(m) => sample_actions(m, &limits, &mut rng),
                };
                let acts: Vec<Action> = seq.iter().map(|a| sp.decode(*a)).collect();
                let t = actions_to_tree(&acts).unwrap();
                assert_eq!(tree_to_actions(&t), acts);
            }
        }
    }
}
