use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::checkpoint::NamedTensor;
use crate::engine::{ChannelStats, Mode, Padding, ParamId, ParamStore, Tape, Tensor, Var, BN_EPSILON, BN_MOMENTUM};
use crate::error::{Error, Result};

/// Per-sample input shape of an image network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Conv2d {
        weight: ParamId,
        bias: ParamId,
        in_channels: usize,
        filters: usize,
        kernel: usize,
        padding: Padding,
    },
    BatchNorm2d {
        gamma: ParamId,
        beta: ParamId,
        channels: usize,
        running: ChannelStats,
    },
    Relu,
    Sigmoid,
    MaxPool2,
    Flatten,
    Dense {
        weight: ParamId,
        bias: ParamId,
        inputs: usize,
        units: usize,
    },
    Dropout {
        rate: f64,
    },
}

impl Layer {
    fn params(&self) -> Vec<ParamId> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![*weight, *bias],
            Layer::BatchNorm2d { gamma, beta, .. } => vec![*gamma, *beta],
            _ => Vec::new(),
        }
    }

    fn describe(&self) -> String {
        match self {
            Layer::Conv2d {
                in_channels,
                filters,
                kernel,
                padding,
                ..
            } => {
                let pad = match padding {
                    Padding::Same => "same",
                    Padding::Valid => "valid",
                };
                format!("conv2d in={in_channels} filters={filters} kernel={kernel} padding={pad}")
            }
            Layer::BatchNorm2d { channels, .. } => format!("batchnorm2d channels={channels}"),
            Layer::Relu => "relu".into(),
            Layer::Sigmoid => "sigmoid".into(),
            Layer::MaxPool2 => "maxpool2".into(),
            Layer::Flatten => "flatten".into(),
            Layer::Dense { inputs, units, .. } => format!("dense in={inputs} units={units}"),
            Layer::Dropout { rate } => format!("dropout rate={rate}"),
        }
    }
}

/// Activation shape while building a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flow {
    Image(ImageShape),
    Flat(usize),
}

/// Ordered layer composition with its parameters registered in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct LayerGraph {
    name: String,
    layers: Vec<Layer>,
    input: ImageShape,
    output: Vec<usize>,
}

/// Incrementally assembles a [`LayerGraph`], checking shape compatibility and
/// initializing weights from `N(0, 2 / fan_in)`.
pub struct GraphBuilder<'a, R: Rng + ?Sized> {
    store: &'a mut ParamStore,
    rng: &'a mut R,
    name: String,
    layers: Vec<Layer>,
    input: ImageShape,
    flow: Flow,
}

impl<'a, R: Rng + ?Sized> GraphBuilder<'a, R> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut R, name: &str, input: ImageShape) -> Self {
        Self {
            store,
            rng,
            name: name.to_string(),
            layers: Vec::new(),
            input,
            flow: Flow::Image(input),
        }
    }

    fn param_name(&self, kind: &str) -> String {
        format!("{}.{}.{}", self.name, self.layers.len(), kind)
    }

    fn he_normal(&mut self, shape: &[usize], fan_in: usize) -> Result<Tensor> {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
            .map_err(|e| Error::InvalidArgument(format!("initializer: {e}")))?;
        let numel = shape.iter().product();
        let data = (0..numel).map(|_| normal.sample(&mut *self.rng)).collect();
        Tensor::new(shape.to_vec(), data)
    }

    fn image(&self, kind: &str) -> Result<ImageShape> {
        match self.flow {
            Flow::Image(s) => Ok(s),
            Flow::Flat(_) => Err(Error::shape("graph", format!("{kind} needs an image input, got a flat vector"))),
        }
    }

    pub fn conv2d(mut self, filters: usize, kernel: usize, padding: Padding) -> Result<Self> {
        let s = self.image("conv2d")?;
        if kernel % 2 == 0 {
            return Err(Error::shape("conv2d", format!("kernel {kernel} must be odd")));
        }
        let fan_in = s.channels * kernel * kernel;
        let w = self.he_normal(&[filters, s.channels, kernel, kernel], fan_in)?;
        let weight = self.store.insert(self.param_name("weight"), w)?;
        let bias = self.store.insert(self.param_name("bias"), Tensor::zeros(&[filters]))?;
        let (h, w) = match padding {
            Padding::Same => (s.height, s.width),
            Padding::Valid => (s.height + 1 - kernel, s.width + 1 - kernel),
        };
        self.layers.push(Layer::Conv2d {
            weight,
            bias,
            in_channels: s.channels,
            filters,
            kernel,
            padding,
        });
        self.flow = Flow::Image(ImageShape::new(filters, h, w));
        Ok(self)
    }

    pub fn batchnorm2d(mut self) -> Result<Self> {
        let s = self.image("batchnorm2d")?;
        let gamma = self.store.insert(self.param_name("gamma"), Tensor::full(&[s.channels], 1.0))?;
        let beta = self.store.insert(self.param_name("beta"), Tensor::zeros(&[s.channels]))?;
        self.layers.push(Layer::BatchNorm2d {
            gamma,
            beta,
            channels: s.channels,
            running: ChannelStats::identity(s.channels),
        });
        Ok(self)
    }

    pub fn maxpool2(mut self) -> Result<Self> {
        let s = self.image("maxpool2")?;
        if s.height % 2 != 0 || s.width % 2 != 0 {
            return Err(Error::shape(
                "maxpool2",
                format!("{}x{} cannot be pooled by 2; resize the input", s.height, s.width),
            ));
        }
        self.layers.push(Layer::MaxPool2);
        self.flow = Flow::Image(ImageShape::new(s.channels, s.height / 2, s.width / 2));
        Ok(self)
    }

    pub fn relu(mut self) -> Self {
        self.layers.push(Layer::Relu);
        self
    }

    pub fn sigmoid(mut self) -> Self {
        self.layers.push(Layer::Sigmoid);
        self
    }

    pub fn flatten(mut self) -> Self {
        if let Flow::Image(s) = self.flow {
            self.flow = Flow::Flat(s.channels * s.height * s.width);
            self.layers.push(Layer::Flatten);
        }
        self
    }

    pub fn dense(mut self, units: usize) -> Result<Self> {
        let Flow::Flat(inputs) = self.flow else {
            return Err(Error::shape("dense", "flatten the image before a dense layer"));
        };
        let w = self.he_normal(&[inputs, units], inputs)?;
        let weight = self.store.insert(self.param_name("weight"), w)?;
        let bias = self.store.insert(self.param_name("bias"), Tensor::zeros(&[units]))?;
        self.layers.push(Layer::Dense {
            weight,
            bias,
            inputs,
            units,
        });
        self.flow = Flow::Flat(units);
        Ok(self)
    }

    pub fn dropout(mut self, rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} must lie in [0, 1)")));
        }
        self.layers.push(Layer::Dropout { rate });
        Ok(self)
    }

    pub fn finish(self) -> LayerGraph {
        let output = match self.flow {
            Flow::Image(s) => s.dims().to_vec(),
            Flow::Flat(u) => vec![u],
        };
        LayerGraph {
            name: self.name,
            layers: self.layers,
            input: self.input,
            output,
        }
    }
}

impl LayerGraph {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_spec(&self) -> ImageShape {
        self.input
    }

    /// Per-sample output shape.
    pub fn output_spec(&self) -> &[usize] {
        &self.output
    }

    /// Every trainable parameter, in layer order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn param_count(&self, store: &ParamStore) -> usize {
        store.count(&self.param_ids())
    }

    /// Applies the layers in order to a `[n, c, h, w]` batch.
    pub fn forward<R: Rng + ?Sized>(&mut self, tape: &mut Tape<'_>, x: Var, mode: Mode, rng: &mut R) -> Result<Var> {
        let shape = tape.value(x).shape();
        if shape.len() != 4 || shape[1..] != self.input.dims() {
            return Err(Error::shape(
                "forward",
                format!("{} expects [n, {:?}], got {shape:?}", self.name, self.input.dims()),
            ));
        }
        let mut h = x;
        for layer in &mut self.layers {
            h = match layer {
                Layer::Conv2d {
                    weight, bias, padding, ..
                } => {
                    let (w, b) = (tape.param(*weight), tape.param(*bias));
                    tape.conv2d(h, w, b, *padding)?
                }
                Layer::BatchNorm2d {
                    gamma, beta, running, ..
                } => {
                    let (g, b) = (tape.param(*gamma), tape.param(*beta));
                    match mode {
                        Mode::Train => {
                            let (y, stats) = tape.batchnorm2d_train(h, g, b, BN_EPSILON)?;
                            running.blend(&stats, BN_MOMENTUM);
                            y
                        }
                        Mode::Infer => tape.batchnorm2d_infer(h, g, b, running, BN_EPSILON)?,
                    }
                }
                Layer::Relu => tape.relu(h)?,
                Layer::Sigmoid => tape.sigmoid(h)?,
                Layer::MaxPool2 => tape.maxpool2d(h)?,
                Layer::Flatten => tape.flatten(h)?,
                Layer::Dense { weight, bias, .. } => {
                    let (w, b) = (tape.param(*weight), tape.param(*bias));
                    tape.dense(h, w, b)?
                }
                Layer::Dropout { rate } => tape.dropout(h, *rate, mode, rng)?,
            };
        }
        Ok(h)
    }

    /// Parameters plus batch-norm running statistics, keyed by name.
    pub fn state(&self, store: &ParamStore) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for id in layer.params() {
                let t = store.tensor(id);
                let plain = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("valid tensor");
                out.push((store.name(id).to_string(), plain));
            }
            if let Layer::BatchNorm2d {
                gamma,
                running,
                channels,
                ..
            } = layer
            {
                let prefix = store.name(*gamma).trim_end_matches(".gamma").to_string();
                let mean = Tensor::new(vec![*channels], running.mean.clone()).expect("valid tensor");
                let var = Tensor::new(vec![*channels], running.var.clone()).expect("valid tensor");
                out.push((format!("{prefix}.running_mean"), mean));
                out.push((format!("{prefix}.running_var"), var));
            }
        }
        out
    }

    /// Restores a state produced by [`state`](Self::state). Every entry this
    /// graph needs must be present with a matching shape.
    pub fn load_state(&mut self, store: &mut ParamStore, entries: &[NamedTensor]) -> Result<()> {
        let lookup = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            let (_, t) = entries
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::Data(format!("checkpoint has no entry `{name}`")))?;
            if t.shape() != shape {
                return Err(Error::shape(
                    "load_state",
                    format!("`{name}` is {:?} in the checkpoint, {shape:?} in the network", t.shape()),
                ));
            }
            Ok(t.data().to_vec())
        };
        for layer in &mut self.layers {
            for id in layer.params() {
                let values = lookup(store.name(id), store.tensor(id).shape())?;
                store.tensor_mut(id).data_mut().copy_from_slice(&values);
            }
            if let Layer::BatchNorm2d {
                gamma,
                running,
                channels,
                ..
            } = layer
            {
                let prefix = store.name(*gamma).trim_end_matches(".gamma").to_string();
                running.mean = lookup(&format!("{prefix}.running_mean"), &[*channels])?;
                running.var = lookup(&format!("{prefix}.running_var"), &[*channels])?;
            }
        }
        Ok(())
    }

    /// Plain-text architecture: a header line then one layer per line.
    pub fn descriptor(&self) -> String {
        let mut s = String::new();
        let i = self.input;
        writeln!(s, "network {} input={}x{}x{}", self.name, i.channels, i.height, i.width).unwrap();
        for layer in &self.layers {
            writeln!(s, "{}", layer.describe()).unwrap();
        }
        s
    }

    /// Rebuilds a freshly initialized graph from [`descriptor`](Self::descriptor) text.
    pub fn from_descriptor<R: Rng + ?Sized>(text: &str, store: &mut ParamStore, rng: &mut R) -> Result<LayerGraph> {
        let bad = |line: usize, msg: String| Error::Format {
            what: "architecture descriptor",
            detail: format!("line {line}: {msg}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty descriptor".into()))?;
        let mut words = header.split_whitespace();
        if words.next() != Some("network") {
            return Err(bad(1, "expected `network <name> input=CxHxW`".into()));
        }
        let name = words.next().ok_or_else(|| bad(1, "missing network name".into()))?;
        let input = words
            .next()
            .and_then(|w| w.strip_prefix("input="))
            .and_then(|dims| {
                let d: Vec<usize> = dims.split('x').filter_map(|v| v.parse().ok()).collect();
                (d.len() == 3).then(|| ImageShape::new(d[0], d[1], d[2]))
            })
            .ok_or_else(|| bad(1, "missing or malformed input=CxHxW".into()))?;

        let mut b = GraphBuilder::new(store, rng, name, input);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let mut words = line.split_whitespace();
            let kind = words.next().unwrap_or_default();
            let kv: Vec<(&str, &str)> = words.filter_map(|w| w.split_once('=')).collect();
            let get = |key: &str| -> Result<&str> {
                kv.iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| bad(lineno, format!("{kind} needs `{key}=`")))
            };
            let num = |key: &str| -> Result<usize> {
                get(key)?.parse().map_err(|_| bad(lineno, format!("`{key}` is not an integer")))
            };
            b = match kind {
                "conv2d" => {
                    let padding = match get("padding")? {
                        "same" => Padding::Same,
                        "valid" => Padding::Valid,
                        other => return Err(bad(lineno, format!("unknown padding `{other}`"))),
                    };
                    b.conv2d(num("filters")?, num("kernel")?, padding)?
                }
                "batchnorm2d" => b.batchnorm2d()?,
                "relu" => b.relu(),
                "sigmoid" => b.sigmoid(),
                "maxpool2" => b.maxpool2()?,
                "flatten" => b.flatten(),
                "dense" => b.dense(num("units")?)?,
                "dropout" => {
                    let rate = get("rate")?.parse().map_err(|_| bad(lineno, "`rate` is not a number".into()))?;
                    b.dropout(rate)?
                }
                other => return Err(bad(lineno, format!("unknown layer `{other}`"))),
            };
        }
        Ok(b.finish())
    }
}
