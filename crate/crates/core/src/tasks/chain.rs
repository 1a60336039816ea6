use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssp_nn::{
    bce_loss, l1_penalty, l1_penalty_grad, mse_loss, LayerSpec, LossKind, Mode, Objective, Param, Probe, Sequential,
    Tensor,
};

use crate::error::{CoreError, Result};

/// A named network stage. Frozen stages still pass gradients to earlier
/// stages but are never updated.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub name: String,
    pub net: Sequential,
    pub frozen: bool,
}

/// Stages applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub stages: Vec<Stage>,
}

impl Chain {
    pub fn single(name: &str, specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            stages: vec![Stage {
                name: name.to_string(),
                net: Sequential::new(specs, rng)?,
                frozen: false,
            }],
        })
    }

    pub fn stage(&self, name: &str) -> Result<&Stage> {
        self.stages
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CoreError::Missing(format!("network stage '{name}'")))
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
        let mut h = x.clone();
        for s in &mut self.stages {
            h = s.net.forward(&h, mode, rng)?;
        }
        Ok(h)
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for s in &self.stages {
            h = s.net.infer(&h)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let mut g = dy.clone();
        for s in self.stages.iter_mut().rev() {
            g = s.net.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        self.stages.iter_mut().for_each(|s| s.net.zero_grad());
    }

    pub fn trainable_params(&self) -> Vec<&Param> {
        self.stages
            .iter()
            .filter(|s| !s.frozen)
            .flat_map(|s| s.net.params())
            .collect()
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Param> {
        self.stages
            .iter_mut()
            .filter(|s| !s.frozen)
            .flat_map(|s| s.net.params_mut())
            .collect()
    }

    pub fn kink_signature(&self) -> u64 {
        self.stages
            .iter()
            .fold(0u64, |acc, s| acc.rotate_left(17) ^ s.net.kink_signature())
    }

    /// Parameter shapes of every stage, for architecture comparisons.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.stages
            .iter()
            .flat_map(|s| s.net.params().into_iter().map(|p| p.shape.clone()))
            .collect()
    }
}

/// Loss of a chain on one batch, with l1 on its trainable parameters.
pub fn chain_loss(
    chain: &mut Chain,
    x: &Tensor,
    y: &Tensor,
    loss: LossKind,
    lambda_l1: f64,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<(f64, f64, Tensor)> {
    let out = chain.forward(x, mode, rng)?;
    let l = match loss {
        LossKind::Bce => bce_loss(&out, y)?,
        LossKind::Mse => mse_loss(&out, y)?,
    };
    let penalty = l1_penalty(chain.trainable_params(), lambda_l1);
    Ok((l.value, penalty, l.grad))
}

/// Finite-difference view of a chain's trainable parameters.
pub struct ChainObjective<'a> {
    pub chain: &'a mut Chain,
    pub input: Tensor,
    pub target: Tensor,
    pub loss: LossKind,
    pub lambda_l1: f64,
    pub mode: Mode,
    pub dropout_seed: u64,
}

impl ChainObjective<'_> {
    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (b, p) in self.chain.trainable_params().iter().enumerate() {
            if index < p.len() {
                return (b, index);
            }
            index -= p.len();
        }
        panic!("parameter index out of range");
    }

    fn evaluate(&mut self) -> Result<(f64, Tensor)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.dropout_seed);
        let (data, penalty, grad) = chain_loss(
            self.chain,
            &self.input,
            &self.target,
            self.loss,
            self.lambda_l1,
            self.mode,
            &mut rng,
        )?;
        Ok((data + penalty, grad))
    }
}

impl Objective for ChainObjective<'_> {
    fn num_params(&self) -> usize {
        self.chain.trainable_params().iter().map(|p| p.len()).sum()
    }

    fn param(&self, index: usize) -> f64 {
        let (b, i) = self.locate(index);
        self.chain.trainable_params()[b].value[i]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        let (b, i) = self.locate(index);
        self.chain.trainable_params_mut()[b].value[i] = value;
    }

    fn probe(&mut self) -> ssp_nn::Result<Probe> {
        let (loss, _) = self.evaluate().map_err(to_nn)?;
        Ok(Probe {
            loss,
            signature: self.chain.kink_signature(),
        })
    }

    fn gradient(&mut self) -> ssp_nn::Result<Vec<f64>> {
        self.chain.zero_grad();
        let (_, dy) = self.evaluate().map_err(to_nn)?;
        self.chain.backward(&dy).map_err(to_nn)?;
        l1_penalty_grad(self.chain.trainable_params_mut(), self.lambda_l1);
        Ok(self
            .chain
            .trainable_params()
            .iter()
            .flat_map(|p| p.grad.iter().copied())
            .collect())
    }
}

fn to_nn(e: CoreError) -> ssp_nn::NnError {
    match e {
        CoreError::Nn(n) => n,
        other => ssp_nn::NnError::InvalidLayer(other.to_string()),
    }
}
