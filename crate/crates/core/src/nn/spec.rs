use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOGITS_TAP: &str = "logits";

fn default_pool() -> bool {
    true
}

/// One convolution block: same-padded square convolution, rectifier, and
/// (unless disabled) 2× average pooling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub window: usize,
    pub out_channels: usize,
    #[serde(default = "default_pool")]
    pub pool: bool,
}

impl BlockSpec {
    pub fn conv3(out_channels: usize) -> Self {
        Self {
            window: 3,
            out_channels,
            pool: true,
        }
    }
}

/// Architecture of a small layered image classifier.
///
/// Taps are named `layer1..layerL` (output of each block) and `logits`
/// (pre-softmax head output).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `(channels, height, width)`.
    pub input: [usize; 3],
    pub blocks: Vec<BlockSpec>,
    pub n_classes: usize,
}

/// Named parameter slice inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl NetworkSpec {
    /// Desk-scale default: three 3×3 blocks on 1×32×32 grayscale input.
    pub fn desk_default(n_classes: usize) -> Self {
        Self {
            input: [1, 32, 32],
            blocks: vec![BlockSpec::conv3(4), BlockSpec::conv3(8), BlockSpec::conv3(8)],
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one block".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig("n_classes must be at least 2".into()));
        }
        if self.input.contains(&0) {
            return Err(Error::InvalidConfig(format!("degenerate input shape {:?}", self.input)));
        }
        let [_, mut h, mut w] = self.input;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.window == 0 || b.window % 2 == 0 {
                return Err(Error::InvalidConfig(format!(
                    "block {} window {} must be odd",
                    i + 1,
                    b.window
                )));
            }
            if b.out_channels == 0 {
                return Err(Error::InvalidConfig(format!("block {} has no channels", i + 1)));
            }
            if b.pool {
                if h < 2 || w < 2 {
                    return Err(Error::InvalidConfig(format!(
                        "block {} pools a {h}×{w} map",
                        i + 1
                    )));
                }
                h /= 2;
                w /= 2;
            }
        }
        Ok(())
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Input volume per example.
    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn tap_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.blocks.len()).map(|i| format!("layer{i}")).collect();
        names.push(LOGITS_TAP.to_string());
        names
    }

    /// Stage index of a tap: `1..=L` for blocks, `L + 1` for logits.
    pub fn tap_stage(&self, tap: &str) -> Result<usize> {
        self.tap_names()
            .iter()
            .position(|t| t == tap)
            .map(|p| p + 1)
            .ok_or_else(|| Error::UnknownTap {
                tap: tap.to_string(),
                valid: self.tap_names(),
            })
    }

    /// `(channels, height, width)` produced by each block.
    pub fn block_shapes(&self) -> Vec<[usize; 3]> {
        let [_, mut h, mut w] = self.input;
        let mut out = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let c = b.out_channels;
            if b.pool {
                h /= 2;
                w /= 2;
            }
            out.push([c, h, w]);
        }
        out
    }

    /// Unflattened output shape at a tap.
    pub fn tap_shape(&self, tap: &str) -> Result<Vec<usize>> {
        let stage = self.tap_stage(tap)?;
        if stage > self.blocks.len() {
            Ok(vec![self.n_classes])
        } else {
            Ok(self.block_shapes()[stage - 1].to_vec())
        }
    }

    pub fn tap_dim(&self, tap: &str) -> Result<usize> {
        Ok(self.tap_shape(tap)?.iter().product())
    }

    pub fn feature_dim(&self) -> usize {
        self.block_shapes().last().map_or(0, |s| s.iter().product())
    }

    pub fn layout(&self) -> Vec<ParamEntry> {
        let mut entries = Vec::new();
        let mut offset = 0;
        let mut cin = self.input[0];
        let mut push = |name: String, shape: Vec<usize>, offset: &mut usize| {
            let len: usize = shape.iter().product();
            entries.push(ParamEntry {
                name,
                offset: *offset,
                shape,
            });
            *offset += len;
        };
        for (i, b) in self.blocks.iter().enumerate() {
            push(
                format!("layer{}.weight", i + 1),
                vec![b.out_channels, cin, b.window, b.window],
                &mut offset,
            );
            push(format!("layer{}.bias", i + 1), vec![b.out_channels], &mut offset);
            cin = b.out_channels;
        }
        let d = self.feature_dim();
        push("head.weight".into(), vec![self.n_classes, d], &mut offset);
        push("head.bias".into(), vec![self.n_classes], &mut offset);
        entries
    }

    pub fn n_params(&self) -> usize {
        self.layout().last().map_or(0, |e| e.offset + e.len())
    }

    /// Number of leading parameters that influence the output at `stage`.
    pub fn prefix_params(&self, stage: usize) -> usize {
        let layout = self.layout();
        let take = (2 * stage).min(layout.len());
        layout[..take].last().map_or(0, |e| e.offset + e.len())
    }
}
