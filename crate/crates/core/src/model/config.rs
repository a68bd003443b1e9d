use super::ModelError;

/// Decoder architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    /// Two masked cross-attention blocks per layer (bits <- checks, then
    /// checks <- bits) sharing one set of weights.
    CrossMpt,
    /// One masked self-attention block per layer over the concatenated
    /// [bits; checks] sequence.
    Ecct,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::CrossMpt => "crossmpt",
            Arch::Ecct => "ecct",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "crossmpt" | "cross" => Ok(Arch::CrossMpt),
            "ecct" => Ok(Arch::Ecct),
            _ => Err(ModelError::Config(format!("unknown architecture {s:?}"))),
        }
    }
}

/// How syndrome bits scale their positional embedding rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SyndromeEmbedding {
    /// 0 -> +1, 1 -> -1.
    #[default]
    PlusMinus,
    /// Literal bit value; every satisfied check embeds to the zero row.
    ZeroOne,
}

impl SyndromeEmbedding {
    pub fn map(self, bit: u8) -> f64 {
        match (self, bit) {
            (SyndromeEmbedding::PlusMinus, 0) => 1.0,
            (SyndromeEmbedding::PlusMinus, _) => -1.0,
            (SyndromeEmbedding::ZeroOne, b) => f64::from(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub n: usize,
    pub k: usize,
    /// Rows of the parity-check matrix (n - k unless redundant rows are kept).
    pub checks: usize,
    pub num_layers: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub ffnn_multiplier: usize,
    pub arch: Arch,
    pub syndrome_embedding: SyndromeEmbedding,
}

impl ModelConfig {
    /// Configuration with the default 8 heads and 4x feed-forward width.
    pub fn new(n: usize, k: usize, checks: usize, num_layers: usize, embed_dim: usize, arch: Arch) -> Self {
        ModelConfig {
            n,
            k,
            checks,
            num_layers,
            embed_dim,
            heads: 8,
            ffnn_multiplier: 4,
            arch,
            syndrome_embedding: SyndromeEmbedding::PlusMinus,
        }
    }

    pub fn for_code(code: &crate::LinearCode, num_layers: usize, embed_dim: usize, arch: Arch) -> Self {
        Self::new(code.n(), code.k(), code.checks(), num_layers, embed_dim, arch)
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }

    pub fn with_arch(mut self, arch: Arch) -> Self {
        self.arch = arch;
        self
    }

    /// Length of the concatenated [bits; checks] sequence.
    pub fn seq_len(&self) -> usize {
        self.n + self.checks
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_layers == 0 {
            return Err(ModelError::Config("num_layers must be at least 1".into()));
        }
        if self.heads == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return Err(ModelError::Config(format!(
                "embed_dim {} is not divisible by {} heads",
                self.embed_dim, self.heads
            )));
        }
        if self.n == 0 || self.checks == 0 || self.ffnn_multiplier == 0 {
            return Err(ModelError::Config("n, checks and ffnn_multiplier must be positive".into()));
        }
        if self.k >= self.n {
            return Err(ModelError::Config(format!("k = {} must be below n = {}", self.k, self.n)));
        }
        Ok(())
    }
}
