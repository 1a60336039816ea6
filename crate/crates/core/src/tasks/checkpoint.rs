use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssp_nn::{AmsGrad, AmsGradConfig, LayerSpec, Moments, Sequential};

use super::chain::{Chain, Stage};
use super::{Task, TrainConfig};
use crate::container::Container;
use crate::dataio::Standardizer;
use crate::error::{CoreError, Result};

pub const CHECKPOINT_KIND: &str = "checkpoint";

/// Trained parameters with everything needed to use them: optimizer state,
/// the train-time standardizers and the input channel mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub chain: Chain,
    pub optimizer: AmsGrad,
    pub input_st: Standardizer,
    pub output_st: Option<Standardizer>,
    /// Input channels replaced by their training mean.
    pub mask: BTreeSet<usize>,
    /// Mean training loss before the first step, then after each epoch.
    pub history: Vec<f64>,
}

impl Checkpoint {
    pub fn task(&self) -> Task {
        self.config.task
    }

    pub fn expect_task(&self, task: Task) -> Result<()> {
        if self.task() != task {
            return Err(CoreError::Config(format!(
                "checkpoint was trained for task '{}', expected '{}'",
                self.task(),
                task
            )));
        }
        Ok(())
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new(CHECKPOINT_KIND);
        c.set_meta("task", self.task().name());
        c.set_meta("input_spec", &self.config.input_spec);
        c.set_meta("config", serde_json::to_string(&self.config).expect("config serializes"));
        let names: Vec<&str> = self.chain.stages.iter().map(|s| s.name.as_str()).collect();
        c.set_meta("stages", names.join(","));
        for s in &self.chain.stages {
            c.set_meta(&format!("stage.{}.frozen", s.name), s.frozen);
            let layers: Vec<String> = s.net.specs().iter().map(spec_to_text).collect();
            c.set_meta(&format!("stage.{}.layers", s.name), layers.join(";"));
            for (k, p) in s.net.params().iter().enumerate() {
                c.push_array(format!("stage.{}.p{k}", s.name), p.shape.clone(), p.value.clone());
            }
        }
        let o = &self.optimizer;
        c.set_meta("opt.step", o.step);
        c.set_meta("opt.lr", o.config.lr);
        c.set_meta("opt.beta1", o.config.beta1);
        c.set_meta("opt.beta2", o.config.beta2);
        c.set_meta("opt.eps", o.config.eps);
        for (k, m) in o.moments.iter().enumerate() {
            let n = m.m.len();
            c.push_array(format!("opt.{k}.m"), vec![n], m.m.clone());
            c.push_array(format!("opt.{k}.v"), vec![n], m.v.clone());
            c.push_array(format!("opt.{k}.vmax"), vec![n], m.v_max.clone());
        }
        self.input_st.write(&mut c, "st.in");
        if let Some(st) = &self.output_st {
            st.write(&mut c, "st.out");
        }
        let mask: Vec<String> = self.mask.iter().map(usize::to_string).collect();
        c.set_meta("mask", mask.join(","));
        let hist: Vec<String> = self.history.iter().map(f64::to_string).collect();
        c.set_meta("history", hist.join(","));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != CHECKPOINT_KIND {
            return Err(CoreError::Config(format!("expected a checkpoint, found '{}'", c.kind)));
        }
        let config: TrainConfig = serde_json::from_str(c.require_meta("config")?)
            .map_err(|e| CoreError::Config(format!("checkpoint config: {e}")))?;
        let mut stages = Vec::new();
        for name in c.require_meta("stages")?.split(',').filter(|s| !s.is_empty()) {
            let specs = c
                .require_meta(&format!("stage.{name}.layers"))?
                .split(';')
                .map(spec_from_text)
                .collect::<Result<Vec<_>>>()?;
            // Values are overwritten below; the rng only satisfies the constructor.
            let mut net = Sequential::new(&specs, &mut ChaCha8Rng::seed_from_u64(0))?;
            let blocks = (0..net.params().len())
                .map(|k| Ok(c.array(&format!("stage.{name}.p{k}"))?.data.clone()))
                .collect::<Result<Vec<_>>>()?;
            net.load_params(&blocks)?;
            stages.push(Stage {
                name: name.to_string(),
                net,
                frozen: c.meta_parse(&format!("stage.{name}.frozen"))?,
            });
        }
        let chain = Chain { stages };
        let n_blocks = chain.trainable_params().len();
        let moments = (0..n_blocks)
            .map(|k| {
                Ok(Moments {
                    m: c.array(&format!("opt.{k}.m"))?.data.clone(),
                    v: c.array(&format!("opt.{k}.v"))?.data.clone(),
                    v_max: c.array(&format!("opt.{k}.vmax"))?.data.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let optimizer = AmsGrad {
            config: AmsGradConfig {
                lr: c.meta_parse("opt.lr")?,
                beta1: c.meta_parse("opt.beta1")?,
                beta2: c.meta_parse("opt.beta2")?,
                eps: c.meta_parse("opt.eps")?,
            },
            step: c.meta_parse("opt.step")?,
            moments,
        };
        let output_st = if c.meta("st.out.epsilon").is_some() {
            Some(Standardizer::read(c, "st.out")?)
        } else {
            None
        };
        let parse_list = |key: &str| -> Result<Vec<String>> {
            Ok(c.require_meta(key)?
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect())
        };
        let mask = parse_list("mask")?
            .iter()
            .map(|s| s.parse().map_err(|_| CoreError::Config(format!("bad mask entry {s:?}"))))
            .collect::<Result<BTreeSet<usize>>>()?;
        let history = parse_list("history")?
            .iter()
            .map(|s| s.parse().map_err(|_| CoreError::Config(format!("bad history entry {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            config,
            chain,
            optimizer,
            input_st: Standardizer::read(c, "st.in")?,
            output_st,
            mask,
            history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

fn spec_to_text(s: &LayerSpec) -> String {
    match *s {
        LayerSpec::Conv { in_ch, out_ch, kernel } => format!("conv {in_ch} {out_ch} {kernel}"),
        LayerSpec::TransposedConv {
            in_ch,
            out_ch,
            kernel,
            stride,
        } => format!("tconv {in_ch} {out_ch} {kernel} {stride}"),
        LayerSpec::Relu => "relu".into(),
        LayerSpec::Sigmoid => "sigmoid".into(),
        LayerSpec::Dropout(p) => format!("dropout {p}"),
        LayerSpec::MaxPool => "maxpool".into(),
    }
}

fn spec_from_text(s: &str) -> Result<LayerSpec> {
    let bad = || CoreError::Config(format!("invalid layer description {s:?}"));
    let toks: Vec<&str> = s.split_whitespace().collect();
    let n = |i: usize| -> Result<usize> { toks.get(i).and_then(|t| t.parse().ok()).ok_or_else(bad) };
    Ok(match toks.first().copied() {
        Some("conv") => LayerSpec::Conv {
            in_ch: n(1)?,
            out_ch: n(2)?,
            kernel: n(3)?,
        },
        Some("tconv") => LayerSpec::TransposedConv {
            in_ch: n(1)?,
            out_ch: n(2)?,
            kernel: n(3)?,
            stride: n(4)?,
        },
        Some("relu") => LayerSpec::Relu,
        Some("sigmoid") => LayerSpec::Sigmoid,
        Some("dropout") => LayerSpec::Dropout(toks.get(1).and_then(|t| t.parse().ok()).ok_or_else(bad)?),
        Some("maxpool") => LayerSpec::MaxPool,
        _ => return Err(bad()),
    })
}
