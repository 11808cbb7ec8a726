//! Plain-text model checkpoints.
//!
//! ```text
//! pvreg-checkpoint 1
//! spec {"kind":"dnn","lookback":24,...}
//! tag fingerprint=3f2a...
//! param dense1.weight weight 624x128
//! 0.0123 -0.0456 ...
//! param dense1.bias bias 128
//! 0 0 ...
//! ```
//!
//! `tag` lines are optional free-form annotations, ignored on load. One `param` header line per tensor, in parameter order, followed by one line holding
//! every value in row-major order. Values are written in Rust's shortest round-trip
//! decimal form, so loading reproduces each parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::network::{build, Model};
use crate::models::spec::ModelSpec;
use crate::params::ParamRole;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

const MAGIC: &str = "pvreg-checkpoint 1";

pub fn to_checkpoint_string<T: Scalar>(model: &Model<T>) -> Result<String> {
    to_tagged_checkpoint_string(model, &[])
}

/// Checkpoint text with one `tag` line per entry of `tags`, which must be single-line.
pub fn to_tagged_checkpoint_string<T: Scalar>(model: &Model<T>, tags: &[&str]) -> Result<String> {
    if tags.iter().any(|t| t.contains('\n')) {
        return Err(Error::invalid("checkpoint tags must be single-line"));
    }
    let mut out = String::new();
    let spec = serde_json::to_string(&model.spec).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "spec {spec}").unwrap();
    for tag in tags {
        writeln!(out, "tag {tag}").unwrap();
    }
    for (name, p) in model.params.iter() {
        let role = match p.role {
            ParamRole::Weight => "weight",
            ParamRole::Bias => "bias",
        };
        let dims: Vec<String> = p.value.shape().iter().map(usize::to_string).collect();
        writeln!(out, "param {name} {role} {}", dims.join("x")).unwrap();
        let values: Vec<String> = p.value.data().iter().map(|v| format!("{:?}", v.as_f64())).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    Ok(out)
}

pub fn from_checkpoint_str<T: Scalar>(text: &str) -> Result<Model<T>> {
    let bad = |msg: &str| Error::Data(format!("checkpoint: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing header"));
    }
    let spec_line = lines
        .next()
        .and_then(|l| l.strip_prefix("spec "))
        .ok_or_else(|| bad("missing spec line"))?;
    let spec: ModelSpec = serde_json::from_str(spec_line).map_err(|e| bad(&e.to_string()))?;
    let mut model: Model<T> = build(&spec, &mut SeededRng::new(0, 0))?;
    let mut seen = 0;
    while let Some(header) = lines.next() {
        if header.trim().is_empty() || header.starts_with("tag ") {
            continue;
        }
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [tag, name, _role, dims] = fields[..] else {
            return Err(bad(&format!("malformed header '{header}'")));
        };
        if tag != "param" {
            return Err(bad(&format!("unexpected line '{header}'")));
        }
        let shape: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        let values: Vec<T> = lines
            .next()
            .ok_or_else(|| bad("missing values"))?
            .split_whitespace()
            .map(|v| v.parse::<f64>().map(T::lit).map_err(|_| bad("bad value")))
            .collect::<Result<_>>()?;
        let param = model.params.get_mut(name)?;
        if param.value.shape() != shape.as_slice() || values.len() != param.value.len() {
            return Err(bad(&format!("shape mismatch for {name}")));
        }
        param.value.data_mut().copy_from_slice(&values);
        seen += 1;
    }
    if seen != model.params.len() {
        return Err(bad(&format!(
            "expected {} parameters, found {seen}",
            model.params.len()
        )));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    std::fs::write(path, to_checkpoint_string(model)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    from_checkpoint_str(&std::fs::read_to_string(path)?)
}
