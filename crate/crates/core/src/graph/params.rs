//! Named traversal of every learnable parameter, used by the weight
//! archive for both export and import.

use mtscene_tensor::{ConvParams, Nbt1dWeights, NormParams, Tensor, UpsampleWeights};

use crate::error::Result;

pub trait ParamVisitor {
    fn tensor(&mut self, name: &str, t: &mut Tensor) -> Result<()>;
}

pub trait Visit {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()>;
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn visit_vec(prefix: &str, name: &str, data: &mut Vec<f32>, v: &mut dyn ParamVisitor) -> Result<()> {
    let mut t = Tensor::new(vec![data.len()], std::mem::take(data))?;
    let res = v.tensor(&join(prefix, name), &mut t);
    *data = t.into_data();
    res
}

impl Visit for Tensor {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        v.tensor(prefix, self)
    }
}

impl Visit for ConvParams {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        v.tensor(&join(prefix, "weight"), &mut self.weight)?;
        if let Some(b) = &mut self.bias {
            visit_vec(prefix, "bias", b, v)?;
        }
        Ok(())
    }
}

impl Visit for NormParams {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        visit_vec(prefix, "gamma", &mut self.gamma, v)?;
        visit_vec(prefix, "beta", &mut self.beta, v)?;
        visit_vec(prefix, "running_mean", &mut self.running_mean, v)?;
        visit_vec(prefix, "running_var", &mut self.running_var, v)
    }
}

impl Visit for UpsampleWeights {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        v.tensor(&join(prefix, "kernel"), &mut self.kernel)?;
        visit_vec(prefix, "bias", &mut self.bias, v)
    }
}

impl Visit for Nbt1dWeights {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.conv3x1_1.visit(&join(prefix, "conv3x1_1"), v)?;
        self.conv1x3_1.visit(&join(prefix, "conv1x3_1"), v)?;
        self.norm1.visit(&join(prefix, "norm1"), v)?;
        self.conv3x1_2.visit(&join(prefix, "conv3x1_2"), v)?;
        self.conv1x3_2.visit(&join(prefix, "conv1x3_2"), v)?;
        self.norm2.visit(&join(prefix, "norm2"), v)?;
        if let Some((conv, norm)) = &mut self.projection {
            conv.visit(&join(prefix, "projection.conv"), v)?;
            norm.visit(&join(prefix, "projection.norm"), v)?;
        }
        Ok(())
    }
}
