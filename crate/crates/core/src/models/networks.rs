use rand::Rng;

use super::graph::{GraphBuilder, ImageShape, LayerGraph};
use crate::engine::{Mode, Padding, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Width of the augmenter's hidden convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmenterArch {
    pub hidden_filters: usize,
}

impl Default for AugmenterArch {
    fn default() -> Self {
        Self { hidden_filters: 16 }
    }
}

/// Layer widths of the small classifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierArch {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub dense_units: usize,
    pub dropout: f64,
}

impl Default for ClassifierArch {
    fn default() -> Self {
        Self {
            conv1_filters: 16,
            conv2_filters: 32,
            dense_units: 1024,
            dropout: 0.5,
        }
    }
}

/// Fully convolutional augmenter: `k·c` packed channels in, `c` channels out,
/// same spatial size, values in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct NetworkA {
    pub graph: LayerGraph,
    in_channels: usize,
    out_channels: usize,
    forward_passes: usize,
}

impl NetworkA {
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    /// Number of forward passes run through this network since it was built.
    pub fn forward_passes(&self) -> usize {
        self.forward_passes
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, tape: &mut Tape<'_>, x: Var, mode: Mode, rng: &mut R) -> Result<Var> {
        self.forward_passes += 1;
        self.graph.forward(tape, x, mode, rng)
    }

    /// Wraps a graph rebuilt from a descriptor.
    pub fn from_graph(graph: LayerGraph) -> Result<Self> {
        let input = graph.input_spec();
        let out = graph.output_spec().to_vec();
        if out.len() != 3 || out[1] != input.height || out[2] != input.width {
            return Err(Error::shape(
                "network A",
                format!("graph maps {:?} to {out:?}; spatial dims must be preserved", input.dims()),
            ));
        }
        Ok(Self {
            in_channels: input.channels,
            out_channels: out[0],
            graph,
            forward_passes: 0,
        })
    }
}

/// conv(3×3, h) → ReLU → conv(3×3, h) → ReLU → conv(3×3, out) → sigmoid, all same-padded.
pub fn build_network_a<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    in_channels: usize,
    out_channels: usize,
    spatial: (usize, usize),
    arch: AugmenterArch,
    rng: &mut R,
) -> Result<NetworkA> {
    if in_channels == 0 || out_channels == 0 || arch.hidden_filters == 0 {
        return Err(Error::InvalidArgument("network A channel counts must be positive".into()));
    }
    let input = ImageShape::new(in_channels, spatial.0, spatial.1);
    let h = arch.hidden_filters;
    let graph = GraphBuilder::new(store, rng, name, input)
        .conv2d(h, 3, Padding::Same)?
        .relu()
        .conv2d(h, 3, Padding::Same)?
        .relu()
        .conv2d(out_channels, 3, Padding::Same)?
        .sigmoid()
        .finish();
    Ok(NetworkA {
        graph,
        in_channels,
        out_channels,
        forward_passes: 0,
    })
}

/// Two conv/BN/ReLU/pool stages, then a hidden dense layer with dropout and a
/// `num_classes`-way logit layer.
#[derive(Clone, Debug)]
pub struct NetworkB1 {
    pub graph: LayerGraph,
    num_classes: usize,
}

impl NetworkB1 {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Returns `[n, num_classes]` logits.
    pub fn forward<R: Rng + ?Sized>(&mut self, tape: &mut Tape<'_>, x: Var, mode: Mode, rng: &mut R) -> Result<Var> {
        self.graph.forward(tape, x, mode, rng)
    }

    pub fn from_graph(graph: LayerGraph) -> Result<Self> {
        match graph.output_spec() {
            [k] if *k >= 2 => Ok(Self {
                num_classes: *k,
                graph,
            }),
            other => Err(Error::shape("network B", format!("classifier must end in >= 2 logits, got {other:?}"))),
        }
    }
}

pub fn build_network_b1<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    in_channels: usize,
    num_classes: usize,
    spatial: (usize, usize),
    arch: ClassifierArch,
    rng: &mut R,
) -> Result<NetworkB1> {
    let (h, w) = spatial;
    if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
        return Err(Error::shape(
            "network B1",
            format!("input {h}x{w} must be divisible by 4 for two pooling stages; resize the images"),
        ));
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {num_classes}")));
    }
    let graph = GraphBuilder::new(store, rng, name, ImageShape::new(in_channels, h, w))
        .conv2d(arch.conv1_filters, 3, Padding::Same)?
        .batchnorm2d()?
        .relu()
        .maxpool2()?
        .conv2d(arch.conv2_filters, 3, Padding::Same)?
        .batchnorm2d()?
        .relu()
        .maxpool2()?
        .flatten()
        .dense(arch.dense_units)?
        .relu()
        .dropout(arch.dropout)?
        .dense(num_classes)?
        .finish();
    Ok(NetworkB1 { graph, num_classes })
}
