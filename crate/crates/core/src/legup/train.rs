use ndarray::{Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::discretize::{Discretization, DEFAULT_XI};
use super::discriminator::{Discriminator, DEFAULT_DISCRIMINATOR_WIDTHS};
use super::generator::{Generator, PreferenceLearner};
use super::losses::{generation_indirect, in_segment_users};
use super::templates::{sample_templates, TemplateBatch};
use crate::attacks::FakeProfileBatch;
use crate::dataset::{AttackBudget, RatingMatrix};
use crate::diffcore::Optimizer;
use crate::error::{Error, Result};
use crate::seed;
use crate::surrogate::{InnerLoopConfig, RatingView, SurrogateConfig, SurrogateHarness};

/// Which objective drives the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GenerationLoss {
    /// Target promotion on the unrolled surrogate.
    #[default]
    Direct,
    /// Reconstruction of the templates.
    Indirect,
}

/// When fresh templates are drawn during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSchedule {
    /// One batch for the whole run.
    Fixed,
    #[default]
    PerEpoch,
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LegUpConfig {
    pub learner: PreferenceLearner,
    pub discretization: Discretization,
    pub loss: GenerationLoss,
    pub use_discriminator: bool,
    /// Measure promotion on in-segment users only.
    pub in_segment: bool,
    pub xi: f64,
    /// Autoencoder hidden width.
    pub hidden: usize,
    pub discriminator_hidden: Vec<usize>,
    /// Discriminator steps per epoch.
    pub k1: usize,
    /// Generator steps per epoch.
    pub k2: usize,
    pub epochs: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    /// Weight of the adversarial term in the generator gradient.
    pub adversarial_weight: f64,
    pub templates: TemplateSchedule,
    pub surrogate: SurrogateConfig,
    pub inner: InnerLoopConfig,
}

impl Default for LegUpConfig {
    fn default() -> Self {
        Self {
            learner: PreferenceLearner::AutoEncoder,
            discretization: Discretization::Learnable,
            loss: GenerationLoss::Direct,
            use_discriminator: true,
            in_segment: false,
            xi: DEFAULT_XI,
            hidden: 128,
            discriminator_hidden: DEFAULT_DISCRIMINATOR_WIDTHS.to_vec(),
            k1: 1,
            k2: 1,
            epochs: 50,
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            adversarial_weight: 1.0,
            templates: TemplateSchedule::PerEpoch,
            surrogate: SurrogateConfig::default(),
            inner: InnerLoopConfig::default(),
        }
    }
}

impl LegUpConfig {
    /// Every problem with the configuration, empty when it is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.xi > 0.0 && self.xi < 0.5) {
            out.push(format!("legup.xi must lie in (0, 0.5), got {}", self.xi));
        }
        if self.hidden == 0 || self.discriminator_hidden.contains(&0) {
            out.push("legup hidden widths must be >= 1".into());
        }
        if self.k1 == 0 || self.k2 == 0 {
            out.push(format!("legup.k1 and legup.k2 must be >= 1 (got {}, {})", self.k1, self.k2));
        }
        for (name, lr) in [("lr_generator", self.lr_generator), ("lr_discriminator", self.lr_discriminator)] {
            if !(lr > 0.0 && lr.is_finite()) {
                out.push(format!("legup.{name} must be > 0, got {lr}"));
            }
        }
        if !(self.adversarial_weight >= 0.0 && self.adversarial_weight.is_finite()) {
            out.push(format!("legup.adversarial_weight must be >= 0, got {}", self.adversarial_weight));
        }
        if let Err(e) = self.inner.validate() {
            out.push(e.to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Per-epoch values, each taken at the last step of its phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// Discriminator objective (maximised); `None` without a discriminator.
    pub discriminator: Option<Vec<f64>>,
    /// Promotion or reconstruction loss of the generator.
    pub generator: Vec<f64>,
    /// `mean log(1 - D(fake))`; `None` without a discriminator.
    pub adversarial: Option<Vec<f64>>,
    /// `mean log D(real) + L_gen + mean log(1 - D(fake))`.
    pub total: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LegUpModel {
    pub generator: Generator,
    pub discriminator: Option<Discriminator>,
    /// Templates the final generator was applied to.
    pub templates: TemplateBatch,
    pub history: LossHistory,
}

#[derive(Debug, Clone)]
pub struct LegUpOutcome {
    pub batch: FakeProfileBatch,
    pub model: LegUpModel,
}

fn check_targets(budget: &AttackBudget, num_items: usize) -> Result<()> {
    budget.validate()?;
    if budget.targets.is_empty() {
        return Err(Error::invalid("Leg-UP needs at least one target item"));
    }
    if let Some(&t) = budget.targets.iter().find(|&&t| t >= num_items) {
        return Err(Error::invalid(format!("target {t} outside {num_items} items")));
    }
    Ok(())
}

/// Soft fake rows as the recommender would see them: generator output with
/// every target at the maximum rating.
fn with_targets(soft: &Array2<f64>, mask: &Array2<f64>, targets: &[usize], rmax: f64) -> (Array2<f64>, Array2<f64>) {
    let mut values = soft.clone();
    let mut observed = mask.clone();
    for &t in targets {
        values.column_mut(t).fill(rmax);
        observed.column_mut(t).fill(1.0);
    }
    (values, observed)
}

fn real_batch(dense: &Array2<f64>, size: usize, rng: &mut seed::Rng) -> Array2<f64> {
    let rows: Vec<usize> = (0..size).map(|_| rng.random_range(0..dense.nrows())).collect();
    dense.select(Axis(0), &rows)
}

/// Trains generator and (optionally) discriminator with alternating updates.
pub fn train(real: &RatingMatrix, budget: &AttackBudget, config: &LegUpConfig, seed: u64) -> Result<LegUpModel> {
    config.validate()?;
    check_targets(budget, real.num_items())?;
    if real.is_empty() {
        return Err(Error::EmptyMatrix("Leg-UP needs real users".into()));
    }
    let rmax = budget.rating_max as f64;
    let targets = &budget.targets;
    let (a, m) = (budget.attack_size, real.num_items());

    let template_seed = |tag: String| seed::derive_seed(seed, &["legup", "templates", &tag]);
    let mut templates = sample_templates(real, budget, template_seed("init".into()))?;
    let mut generator = Generator::new(
        config.learner,
        config.discretization,
        m,
        a,
        config.hidden,
        config.xi,
        seed::derive_seed(seed, &["legup", "generator"]),
    )?;
    let mut gen_opt = Optimizer::adam(config.lr_generator)?;

    let dense = real.to_dense();
    let mut discriminator = if config.use_discriminator {
        Some(Discriminator::new(
            m,
            &config.discriminator_hidden,
            seed::derive_seed(seed, &["legup", "discriminator"]),
        )?)
    } else {
        None
    };
    let mut dis_opt = Optimizer::adam(config.lr_discriminator)?;
    let mut batch_rng = seed::rng(seed::derive_seed(seed, &["legup", "real-batches"]));

    let mut harness = if config.loss == GenerationLoss::Direct {
        let mut view = RatingView::from_matrix(real);
        let mut eval_users = real.num_users();
        if config.in_segment {
            // in-segment users first, so the promotion loss covers a prefix
            let segment = in_segment_users(real, &budget.selected)?;
            let mut order = segment.clone();
            order.extend((0..real.num_users()).filter(|u| segment.binary_search(u).is_err()));
            view = RatingView::new(view.values.select(Axis(0), &order), view.observed.select(Axis(0), &order))?;
            eval_users = segment.len();
        }
        let init = generator.forward(&templates)?;
        let (values, observed) = with_targets(&init.soft, &init.mask, targets, rmax);
        let mut h = SurrogateHarness::new(
            &view,
            &values,
            &observed,
            &config.surrogate,
            config.inner,
            seed::derive_seed(seed, &["legup", "surrogate"]),
        )?;
        h.eval_users = eval_users;
        Some(h)
    } else {
        None
    };

    let mut history = LossHistory {
        discriminator: config.use_discriminator.then(Vec::new),
        adversarial: config.use_discriminator.then(Vec::new),
        ..LossHistory::default()
    };

    for epoch in 0..config.epochs {
        if config.templates == TemplateSchedule::PerEpoch && epoch > 0 {
            templates = sample_templates(real, budget, template_seed(format!("epoch-{epoch}")))?;
        }

        let mut real_term = 0.0;
        if let Some(disc) = discriminator.as_mut() {
            let mut value = 0.0;
            for _ in 0..config.k1 {
                let fwd = generator.forward(&templates)?;
                let (fake, _) = with_targets(&fwd.soft, &fwd.mask, targets, rmax);
                let batch = real_batch(&dense, a, &mut batch_rng);
                value = disc.loss_and_grad(&batch, &fake)?;
                if !value.is_finite() {
                    return Err(Error::diverged("Leg-UP discriminator", epoch, value));
                }
                dis_opt.step(&mut disc.net.params_mut())?;
            }
            let batch = real_batch(&dense, a, &mut batch_rng);
            real_term = disc
                .logits(&batch)?
                .iter()
                .map(|&z| crate::diffcore::loss::log_sigmoid(z))
                .sum::<f64>()
                / a as f64;
            if let Some(h) = history.discriminator.as_mut() {
                h.push(value);
            }
        }

        let mut gen_loss = 0.0;
        let mut adv_loss = 0.0;
        for step in 0..config.k2 {
            if config.templates == TemplateSchedule::PerStep && (epoch > 0 || step > 0) {
                templates = sample_templates(real, budget, template_seed(format!("epoch-{epoch}-step-{step}")))?;
            }
            let fwd = generator.forward(&templates)?;
            let (values, observed) = with_targets(&fwd.soft, &fwd.mask, targets, rmax);
            let mut d_soft = match harness.as_mut() {
                Some(h) => {
                    h.set_fake_rows(&values, &observed)?;
                    h.train_epoch()?;
                    let unrolled = h.attack_grad(targets)?;
                    gen_loss = unrolled.loss;
                    unrolled.grad
                }
                None => {
                    let (v, g) = generation_indirect(&fwd.soft, &templates.values)?;
                    gen_loss = v;
                    g
                }
            };
            if !gen_loss.is_finite() {
                return Err(Error::diverged("Leg-UP generator", epoch, gen_loss));
            }
            if let Some(disc) = discriminator.as_mut() {
                let (adv, d_adv) = disc.adversarial(&values)?;
                adv_loss = adv;
                d_soft.scaled_add(config.adversarial_weight, &d_adv);
            }
            for &t in targets {
                d_soft.column_mut(t).fill(0.0);
            }
            generator.zero_grad();
            generator.backward(&fwd, &d_soft)?;
            for p in generator.params_mut() {
                p.check_finite("Leg-UP generator gradient")?;
            }
            gen_opt.step(&mut generator.params_mut())?;
        }

        history.generator.push(gen_loss);
        if let Some(h) = history.adversarial.as_mut() {
            h.push(adv_loss);
        }
        let total = real_term + gen_loss + adv_loss;
        if !total.is_finite() {
            return Err(Error::diverged("Leg-UP", epoch, total));
        }
        history.total.push(total);
    }

    Ok(LegUpModel {
        generator,
        discriminator,
        templates,
        history,
    })
}

/// Hard-discretised generator output with every target at the maximum
/// rating.
pub fn assemble_fake_batch(generator: &Generator, templates: &TemplateBatch, budget: &AttackBudget, seed: u64) -> Result<FakeProfileBatch> {
    check_targets(budget, generator.num_items())?;
    let mut rows = generator.hard_ratings(templates)?;
    for row in &mut rows {
        row.retain(|(i, _)| !budget.targets.contains(i));
        row.extend(budget.targets.iter().map(|&t| (t, budget.rating_max)));
    }
    FakeProfileBatch::new(
        generator.num_items(),
        rows,
        "legup",
        seed,
        Some(templates.source_users.clone()),
        budget.rating_max,
    )
}

/// Trains Leg-UP and emits its fake profiles.
pub fn legup_attack(real: &RatingMatrix, budget: &AttackBudget, config: &LegUpConfig, seed: u64) -> Result<LegUpOutcome> {
    let model = train(real, budget, config, seed)?;
    let batch = assemble_fake_batch(&model.generator, &model.templates, budget, seed)?;
    Ok(LegUpOutcome { batch, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::WrmfConfig;

    fn real() -> RatingMatrix {
        let mut t = Vec::new();
        for u in 0..30 {
            for i in 0..16 {
                if (u * 5 + i * 3) % 7 < 3 {
                    t.push((format!("u{u}"), format!("i{i}"), 1 + ((u * 3 + i) % 5) as u8));
                }
            }
        }
        RatingMatrix::from_triples(t, 5).unwrap()
    }

    fn config() -> LegUpConfig {
        LegUpConfig {
            hidden: 8,
            discriminator_hidden: vec![16, 8],
            epochs: 6,
            lr_generator: 0.01,
            surrogate: SurrogateConfig::Wrmf(WrmfConfig {
                dim: 4,
                init_std: 0.1,
                ..WrmfConfig::default()
            }),
            inner: InnerLoopConfig {
                pretrain_steps: 30,
                inner_steps: 3,
                surrogate_lr: 0.05,
                unroll_lr: 0.01,
                ..InnerLoopConfig::default()
            },
            ..LegUpConfig::default()
        }
    }

    fn budget(m: &RatingMatrix) -> AttackBudget {
        AttackBudget::new(5, 4, vec![], vec![m.item_index("i2").unwrap()], 5).unwrap()
    }

    #[test]
    fn deterministic_history_and_profiles() {
        let m = real();
        let a = legup_attack(&m, &budget(&m), &config(), 9).unwrap();
        let b = legup_attack(&m, &budget(&m), &config(), 9).unwrap();
        assert_eq!(a.model.history, b.model.history);
        assert_eq!(a.batch, b.batch);
        assert_eq!(a.model.history.total.len(), 6);
        assert_eq!(a.model.history.discriminator.as_ref().map(Vec::len), Some(6));
    }

    #[test]
    fn ablation_switches() {
        let m = real();
        let b = budget(&m);
        let t = b.targets[0];
        for cfg in [
            LegUpConfig {
                use_discriminator: false,
                ..config()
            },
            LegUpConfig {
                loss: GenerationLoss::Indirect,
                ..config()
            },
            LegUpConfig {
                learner: PreferenceLearner::Simple,
                ..config()
            },
            LegUpConfig {
                discretization: Discretization::Rounding,
                ..config()
            },
            LegUpConfig {
                templates: TemplateSchedule::PerStep,
                k2: 2,
                k1: 2,
                ..config()
            },
        ] {
            let out = legup_attack(&m, &b, &cfg, 1).unwrap();
            assert_eq!(out.model.history.discriminator.is_some(), cfg.use_discriminator);
            assert_eq!(out.model.history.adversarial.is_some(), cfg.use_discriminator);
            assert_eq!(out.model.history.generator.len(), cfg.epochs);
            assert_eq!(out.batch.len(), 5);
            for (k, row) in out.batch.rows.iter().enumerate() {
                assert!(row.contains(&(t, 5)));
                assert!(row.iter().all(|&(_, r)| (1..=5).contains(&r)));
                assert!(out.batch.filler_count(k, &b) <= b.profile_size);
            }
        }
    }

    #[test]
    fn indirect_loss_decreases() {
        let m = real();
        let cfg = LegUpConfig {
            loss: GenerationLoss::Indirect,
            use_discriminator: false,
            templates: TemplateSchedule::Fixed,
            epochs: 200,
            lr_generator: 0.05,
            ..config()
        };
        let out = train(&m, &budget(&m), &cfg, 4).unwrap();
        let h = &out.history.generator;
        assert!(h[h.len() - 1] < 0.5 * h[0], "{} -> {}", h[0], h[h.len() - 1]);
    }

    #[test]
    fn fillers_stay_on_template_support() {
        let m = real();
        let b = budget(&m);
        let out = legup_attack(&m, &b, &config(), 2).unwrap();
        let tmpl = &out.model.templates;
        for (v, row) in out.batch.rows.iter().enumerate() {
            let u = tmpl.source_users[v];
            for &(i, _) in row.iter().filter(|(i, _)| !b.targets.contains(i)) {
                assert!(tmpl.values[[v, i]] != 0.0 && m.get(u, i).is_some());
            }
        }
    }

    #[test]
    fn in_segment_needs_a_segment() {
        let m = real();
        let mut b = budget(&m);
        b.selected = vec![
            m.item_index("i0").unwrap(),
            m.item_index("i1").unwrap(),
            m.item_index("i5").unwrap(),
        ];
        let cfg = LegUpConfig {
            in_segment: true,
            ..config()
        };
        match in_segment_users(&m, &b.selected) {
            Ok(_) => assert!(train(&m, &b, &cfg, 0).is_ok()),
            Err(_) => assert!(train(&m, &b, &cfg, 0).is_err()),
        }
        b.selected = vec![m.item_index("i0").unwrap()];
        let seg = in_segment_users(&m, &b.selected).unwrap();
        assert!(!seg.is_empty());
        assert!(train(&m, &b, &cfg, 0).is_ok());
    }

    #[test]
    fn rejects_bad_config() {
        let m = real();
        let cfg = LegUpConfig {
            k1: 0,
            xi: 0.7,
            ..config()
        };
        match train(&m, &budget(&m), &cfg, 0) {
            Err(Error::Config(p)) => assert_eq!(p.len(), 2, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }
}
