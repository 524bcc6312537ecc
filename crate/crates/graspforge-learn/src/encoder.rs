//! Shared-MLP point encoder: the same small MLP applied to every point,
//! followed by a column-wise max pool. Permutation invariance of the pooled
//! feature is structural (max over rows).

use graspforge_core::rng::SeedStream;

use crate::tape::{Tape, VarId};
use crate::trainer::ParamSet;

/// Per-point trunk widths; `[64, 128, 256]` unless a toy model shrinks them.
pub const DEFAULT_WIDTHS: [usize; 3] = [64, 128, 256];

/// Parameter indices of one trunk inside a [`ParamSet`].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct TrunkLayout {
    pub input_dim: usize,
    pub widths: [usize; 3],
    /// `(weight idx, bias idx)` per layer.
    pub layers: [(usize, usize); 3],
}

impl TrunkLayout {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        widths: [usize; 3],
        stream: &mut SeedStream,
    ) -> Self {
        let l1 = params.init_linear(&format!("{prefix}.mlp1"), input_dim, widths[0], stream);
        let l2 = params.init_linear(&format!("{prefix}.mlp2"), widths[0], widths[1], stream);
        let l3 = params.init_linear(&format!("{prefix}.mlp3"), widths[1], widths[2], stream);
        TrunkLayout {
            input_dim,
            widths,
            layers: [l1, l2, l3],
        }
    }

    pub fn pooled_dim(&self) -> usize {
        self.widths[2]
    }

    pub fn local_dim(&self) -> usize {
        self.widths[0]
    }
}

/// Trunk outputs on the tape.
pub struct TrunkOutput {
    /// First-layer per-point features (K x widths[0]).
    pub local: VarId,
    /// Last-layer per-point features before pooling (K x widths[2]).
    pub features: VarId,
    /// Max-pooled global feature (1 x widths[2]).
    pub pooled: VarId,
}

/// Run the trunk over `input` (K x input_dim) given registered param ids.
pub fn trunk_forward(
    tape: &mut Tape,
    layout: &TrunkLayout,
    param_ids: &[VarId],
    input: VarId,
) -> TrunkOutput {
    let mut x = input;
    let mut local = None;
    for (w, b) in layout.layers {
        x = tape.affine_relu(x, param_ids[w], param_ids[b]);
        if local.is_none() {
            local = Some(x);
        }
    }
    TrunkOutput {
        local: local.unwrap(),
        features: x,
        pooled: tape.max_pool_rows(x),
    }
}
