use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::poincare::HyperbolicEmbeddingTable;
use crate::semantic::{ProviderSpec, SemanticProvider};
use crate::syntactic::{SyntacticEncoder, Taxonomy};
use crate::text::{canonicalize_title, QgramTokenizer};

/// How semantic vectors are produced; stored in the model so inference
/// rebuilds the same provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticSpec {
    pub provider: ProviderSpec,
    pub dim: usize,
    pub seed: u64,
    /// For precomputed vectors: encode missing titles with the hashed
    /// encoder instead of failing.
    pub fallback: bool,
}

impl Default for SemanticSpec {
    fn default() -> Self {
        Self {
            provider: ProviderSpec::Hashed,
            dim: 128,
            seed: 0,
            fallback: true,
        }
    }
}

/// Everything needed to turn a title into its three view vectors.
pub struct FeatureSpace {
    taxonomy: Taxonomy,
    poincare: HyperbolicEmbeddingTable,
    semantic_spec: SemanticSpec,
    semantic: Box<dyn SemanticProvider>,
    syntactic: SyntacticEncoder,
    candidates_b: Tensor,
    candidates_s: Tensor,
}

impl std::fmt::Debug for FeatureSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureSpace")
            .field("taxonomy", &self.taxonomy.version())
            .field("d_h", &self.poincare.dim())
            .field("semantic", &self.semantic.id())
            .finish()
    }
}

/// Per-title view vectors, one row per title.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub h: Tensor,
    pub b: Tensor,
    pub s: Tensor,
}

impl Features {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, idx: &[usize]) -> Result<Features> {
        let pick = |t: &Tensor| -> Result<Tensor> {
            let c = t.cols();
            let mut data = Vec::with_capacity(idx.len() * c);
            for &i in idx {
                data.extend_from_slice(t.row(i));
            }
            Tensor::matrix(idx.len(), c, data)
        };
        Ok(Features {
            h: pick(&self.h)?,
            b: pick(&self.b)?,
            s: pick(&self.s)?,
        })
    }
}

impl FeatureSpace {
    pub fn new(taxonomy: Taxonomy, poincare: HyperbolicEmbeddingTable, semantic_spec: SemanticSpec) -> Result<Self> {
        let semantic = semantic_spec
            .provider
            .build(semantic_spec.dim, semantic_spec.seed, semantic_spec.fallback)?;
        let syntactic = SyntacticEncoder::new(taxonomy.clone(), QgramTokenizer::default())?;
        let mut cb = Vec::with_capacity(taxonomy.len() * semantic.dim());
        let mut cs = Vec::with_capacity(taxonomy.len() * taxonomy.len());
        for t in taxonomy.titles() {
            cb.extend(semantic.embed(t)?);
            cs.extend(syntactic.encode(t)?.values);
        }
        let y = taxonomy.len();
        Ok(Self {
            candidates_b: Tensor::matrix(y, semantic.dim(), cb)?,
            candidates_s: Tensor::matrix(y, y, cs)?,
            taxonomy,
            poincare,
            semantic_spec,
            semantic,
            syntactic,
        })
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn poincare(&self) -> &HyperbolicEmbeddingTable {
        &self.poincare
    }

    pub fn semantic_spec(&self) -> &SemanticSpec {
        &self.semantic_spec
    }

    pub fn d_h(&self) -> usize {
        self.poincare.dim()
    }

    pub fn d_b(&self) -> usize {
        self.semantic.dim()
    }

    pub fn d_s(&self) -> usize {
        self.taxonomy.len()
    }

    /// `[Y, d_b]` semantic vectors of the standard titles.
    pub fn candidates_b(&self) -> &Tensor {
        &self.candidates_b
    }

    /// `[Y, Y]` syntactic vectors of the standard titles.
    pub fn candidates_s(&self) -> &Tensor {
        &self.candidates_s
    }

    /// View vectors for `titles`. Titles outside the transition graph get a
    /// zero topological vector.
    pub fn featurize<S: AsRef<str>>(&self, titles: &[S]) -> Result<Features> {
        if titles.is_empty() {
            return Err(Error::Degenerate("no titles to featurize".into()));
        }
        let n = titles.len();
        let (dh, db, ds) = (self.d_h(), self.d_b(), self.d_s());
        let mut h = Vec::with_capacity(n * dh);
        let mut b = Vec::with_capacity(n * db);
        let mut s = Vec::with_capacity(n * ds);
        for t in titles {
            let t = canonicalize_title(t.as_ref())?;
            h.extend(self.poincare.get_or_origin(&t));
            b.extend(self.semantic.embed(&t)?);
            s.extend(self.syntactic.encode(&t)?.values);
        }
        Ok(Features {
            h: Tensor::matrix(n, dh, h)?,
            b: Tensor::matrix(n, db, b)?,
            s: Tensor::matrix(n, ds, s)?,
        })
    }
}
