//! The Leg-UP attacker: templates, a preference learner with a learnable
//! discretization layer, a discriminator and the alternating training loop.

pub mod checkpoint;
pub mod discretize;
mod discriminator;
mod generator;
pub mod losses;
mod templates;
mod train;

pub use discretize::Discretization;
pub use discriminator::{Discriminator, DEFAULT_DISCRIMINATOR_WIDTHS};
pub use generator::{GenForward, Generator, PreferenceLearner};
pub use templates::{sample_templates, TemplateBatch};
pub use train::{
    assemble_fake_batch, legup_attack, train, GenerationLoss, LegUpConfig, LegUpModel, LegUpOutcome, LossHistory, TemplateSchedule,
};
