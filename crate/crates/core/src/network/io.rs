use std::path::Path;

use serde_json::{Map, Value};

use super::config::ModelConfig;
use super::model::Model;
use crate::container::{self, Record};
use crate::error::{Error, Result};
use crate::nncore::Parameterized;

const KIND: &str = "model";

/// Serialises the model (and optional preprocessing metadata) to bytes.
pub fn encode_model(model: &Model<f32>, preprocessing: Option<&Value>) -> Result<Vec<u8>> {
    let mut header = Map::new();
    header.insert("kind".into(), Value::from(KIND));
    header.insert("config".into(), serde_json::to_value(&model.config)?);
    if let Some(p) = preprocessing {
        header.insert("preprocessing".into(), p.clone());
    }
    let records: Vec<Record<'_>> = model
        .named_params()
        .into_iter()
        .map(|(name, p)| Record {
            name,
            shape: p.dims().to_vec(),
            values: &p.value,
        })
        .collect();
    container::encode(header, &records)
}

pub fn decode_model(bytes: &[u8]) -> Result<(Model<f32>, Option<Value>)> {
    let mut c = container::decode(bytes)?;
    c.require_kind(KIND)?;
    let config: ModelConfig = c.header_field("config")?;
    let preprocessing = c.header.get("preprocessing").cloned();
    let mut model = Model::<f32>::build(&config)?;
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    for (name, param) in names.into_iter().zip(model.params_mut()) {
        let (shape, values) = c.take(&name)?;
        if shape != param.dims() {
            return Err(Error::ManifestShape {
                name,
                shape,
                expected: param.len(),
                actual: values.len(),
            });
        }
        param.value = values;
        param.zero_grad();
    }
    if let Some((extra, _)) = c.tensors.first() {
        return Err(Error::Header(format!(
            "tensor `{}` does not belong to this architecture",
            extra.name
        )));
    }
    Ok((model, preprocessing))
}

pub fn save_weights(model: &Model<f32>, path: &Path) -> Result<()> {
    save_checkpoint(model, None, path)
}

pub fn save_checkpoint(model: &Model<f32>, preprocessing: Option<&Value>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model, preprocessing)?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<Model<f32>> {
    Ok(load_checkpoint(path)?.0)
}

pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, Option<Value>)> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits_and_config() {
        let cfg = ModelConfig {
            window_len: 32,
            groups: 2,
            scales: 3,
            width: 2,
            seed: 99,
            ..Default::default()
        };
        let model = Model::<f32>::build(&cfg).unwrap();
        let pre = serde_json::json!({"note": "x"});
        let (back, p) = decode_model(&encode_model(&model, Some(&pre)).unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(p, Some(pre));
        assert_eq!(back.param_count(), model.param_count());
    }
}
