pub mod features;
pub mod stimuli;
pub mod treebank;
pub mod nn;
pub mod lm;
pub mod syntax;
pub mod beam;
pub mod analysis;
pub mod synth;
pub mod pipeline;
