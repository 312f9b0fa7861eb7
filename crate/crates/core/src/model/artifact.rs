//! Single-file text serialization of a trained mapper.
//!
//! ```text
//! #jtm-model version=1
//! taxonomy_sha256 <hex>
//! model_config <json>
//! semantic <json>
//! taxonomy <count>
//! <title>\t<group>
//! poincare <count> <dim>
//! <title>\t<v1,v2,...>
//! tensor <name> <d1>x<d2>...
//! <v1,v2,...>
//! end
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so a save/load cycle is bit-exact.

use std::io::{BufRead, Write};

use super::{FeatureSpace, MapperModel, MapperParams, ModelConfig, SemanticSpec};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::poincare::{BallPoint, HyperbolicEmbeddingTable};
use crate::syntactic::Taxonomy;
use crate::tsv::{fmt_vector, parse_vector, parse_vector_row};

pub const FORMAT_VERSION: u32 = 1;

pub fn write_model<W: Write>(mut w: W, model: &MapperModel) -> Result<()> {
    let tax = model.taxonomy();
    writeln!(w, "#jtm-model version={FORMAT_VERSION}")?;
    writeln!(w, "taxonomy_sha256 {}", tax.version())?;
    writeln!(w, "model_config {}", serde_json::to_string(&model.config)?)?;
    writeln!(w, "semantic {}", serde_json::to_string(model.features.semantic_spec())?)?;
    writeln!(w, "taxonomy {}", tax.len())?;
    for k in 0..tax.len() {
        writeln!(w, "{}\t{}", tax.title(k), tax.group(k).unwrap_or(""))?;
    }
    let table = model.features.poincare();
    writeln!(w, "poincare {} {}", table.len(), table.dim())?;
    for (t, p) in table.iter() {
        writeln!(w, "{t}\t{}", fmt_vector(p))?;
    }
    for (name, t) in model.params.named() {
        let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        writeln!(w, "tensor {name} {}", shape.join("x"))?;
        writeln!(w, "{}", fmt_vector(t.data()))?;
    }
    writeln!(w, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(Error::format(self.line, "unexpected end of model file")),
        }
    }

    /// Next line, which must start with `key `; returns the remainder.
    fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| Error::format(self.line, format!("expected `{key}`")))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.line, msg)
    }
}

fn parse_count(s: &str, lines: &Lines<impl BufRead>) -> Result<usize> {
    s.trim().parse().map_err(|_| lines.err(format!("bad count {s:?}")))
}

pub fn read_model<R: BufRead>(reader: R) -> Result<MapperModel> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let header = lines.next()?;
    let version = header
        .strip_prefix("#jtm-model version=")
        .ok_or_else(|| lines.err("not a model file"))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(lines.err(format!("unsupported model format version {version}")));
    }
    let hash = lines.keyed("taxonomy_sha256")?;
    let config: ModelConfig = serde_json::from_str(&lines.keyed("model_config")?)
        .map_err(|e| lines.err(format!("model_config: {e}")))?;
    let semantic: SemanticSpec = serde_json::from_str(&lines.keyed("semantic")?)
        .map_err(|e| lines.err(format!("semantic: {e}")))?;

    let n = lines.keyed("taxonomy")?;
    let n = parse_count(&n, &lines)?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let l = lines.next()?;
        let (t, g) = l.split_once('\t').ok_or_else(|| lines.err("expected title<TAB>group"))?;
        rows.push((t.to_string(), (!g.is_empty()).then(|| g.to_string())));
    }
    let taxonomy = Taxonomy::with_groups(rows.iter().map(|(t, g)| (t.as_str(), g.as_deref())))?;
    if taxonomy.version() != hash {
        return Err(Error::Data(format!(
            "taxonomy hash mismatch: header {hash}, contents {}",
            taxonomy.version()
        )));
    }

    let p = lines.keyed("poincare")?;
    let (count, dim) = p
        .split_once(' ')
        .ok_or_else(|| lines.err("expected `poincare <count> <dim>`"))?;
    let (count, dim) = (parse_count(count, &lines)?, parse_count(dim, &lines)?);
    let mut table = HyperbolicEmbeddingTable::new(dim);
    for _ in 0..count {
        let l = lines.next()?;
        let (t, v) = parse_vector_row(&l, lines.line)?;
        if v.len() != dim {
            return Err(lines.err(format!("{} coordinates, expected {dim}", v.len())));
        }
        table.insert(t, BallPoint::new(v).map_err(|e| lines.err(e.to_string()))?)?;
    }

    let mut tensors = Vec::new();
    loop {
        let l = lines.next()?;
        if l == "end" {
            break;
        }
        let rest = l
            .strip_prefix("tensor ")
            .ok_or_else(|| lines.err("expected `tensor` or `end`"))?;
        let (name, shape) = rest
            .split_once(' ')
            .ok_or_else(|| lines.err("expected `tensor <name> <shape>`"))?;
        let shape = shape
            .split('x')
            .map(|d| parse_count(d, &lines))
            .collect::<Result<Vec<_>>>()?;
        let values = lines.next()?;
        let data = parse_vector(&values, lines.line)?;
        let t = Tensor::new(shape, data).map_err(|e| lines.err(e.to_string()))?;
        tensors.push((name.to_string(), t));
    }
    let params = MapperParams::from_named(config.variant, tensors)?;
    let features = FeatureSpace::new(taxonomy, table, semantic)?;
    let d = (features.d_s(), params.fusion_w.shape()[0]);
    if d.0 != d.1 {
        return Err(Error::dim(format!(
            "fusion layer has {} outputs for {} standard titles",
            d.1, d.0
        )));
    }
    Ok(MapperModel {
        config,
        features,
        params,
    })
}
