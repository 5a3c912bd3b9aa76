//! Feedforward classifiers: sigmoid hidden layers, softmax output, full-batch
//! gradient descent on cross-entropy with optional L2 weight decay.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Layer sizes from input to output. Hidden layers use the logistic
/// sigmoid and the output layer a softmax.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub layers: Vec<usize>,
}

impl Topology {
    pub fn new(layers: impl Into<Vec<usize>>) -> Result<Topology> {
        let t = Topology { layers: layers.into() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 3 {
            return Err(Error::Config(format!("topology {:?} needs at least one hidden layer", self.layers)));
        }
        if self.layers.contains(&0) {
            return Err(Error::Config(format!("topology {:?} has an empty layer", self.layers)));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layers.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.layers.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("-"))
    }
}

/// Range of the uniform weight draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `±1/√fan_in`.
    FanIn,
    /// `±1/√((fan_in + fan_out)/2)`.
    FanAverage,
}

/// The three network configurations compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "FNN")]
    Fnn,
    #[serde(rename = "DNN")]
    Dnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mlp, ModelKind::Fnn, ModelKind::Dnn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "MLP",
            ModelKind::Fnn => "FNN",
            ModelKind::Dnn => "DNN",
        }
    }

    /// One hidden layer of `max(8, 2n)` for MLP/FNN; `[2n, n, n]` for DNN.
    pub fn topology(self, inputs: usize, outputs: usize) -> Topology {
        let hidden = match self {
            ModelKind::Mlp | ModelKind::Fnn => vec![(2 * inputs).max(8)],
            ModelKind::Dnn => vec![2 * inputs, inputs, inputs],
        };
        let mut layers = vec![inputs];
        layers.extend(hidden);
        layers.push(outputs);
        Topology { layers }
    }

    pub fn init_scheme(self) -> InitScheme {
        match self {
            ModelKind::Fnn => InitScheme::FanAverage,
            ModelKind::Mlp | ModelKind::Dnn => InitScheme::FanIn,
        }
    }

    pub fn default_l2(self) -> f64 {
        match self {
            ModelKind::Dnn => 1e-4,
            ModelKind::Mlp | ModelKind::Fnn => 0.0,
        }
    }

    /// A freshly initialized network of this kind.
    pub fn build(self, inputs: usize, outputs: usize, seed: u64) -> Result<NeuralNet> {
        let mut net = init_network_with(&self.topology(inputs, outputs), self.init_scheme(), seed)?;
        net.kind = self;
        Ok(net)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MLP" => Ok(ModelKind::Mlp),
            "FNN" => Ok(ModelKind::Fnn),
            "DNN" => Ok(ModelKind::Dnn),
            _ => Err(Error::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    /// Training stops once the mean cross-entropy falls to this value.
    pub target_error: f64,
    /// Seeds weight initialization.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { max_iterations: 10_000, learning_rate: 0.1, l2_lambda: 0.0, target_error: 1e-3, seed: 0 }
    }
}

impl TrainConfig {
    pub fn for_kind(kind: ModelKind) -> TrainConfig {
        TrainConfig { l2_lambda: kind.default_l2(), ..TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(Error::Config(format!("l2_lambda must be non-negative, got {}", self.l2_lambda)));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("train config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    pub kind: ModelKind,
    pub topology: Topology,
    /// `weights[l]` maps layer `l` to `l + 1` and has shape `(out, in)`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub seed: u64,
    /// Digest of the configuration the parameters were trained with.
    pub train_digest: Option<String>,
}

pub fn init_network(topology: &Topology, seed: u64) -> Result<NeuralNet> {
    init_network_with(topology, InitScheme::FanIn, seed)
}

/// Weights uniform in the scheme's range, biases zero.
pub fn init_network_with(topology: &Topology, scheme: InitScheme, seed: u64) -> Result<NeuralNet> {
    topology.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in topology.layers.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = match scheme {
            InitScheme::FanIn => 1.0 / (fan_in as f64).sqrt(),
            InitScheme::FanAverage => 1.0 / ((fan_in + fan_out) as f64 / 2.0).sqrt(),
        };
        weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit)));
        biases.push(Array1::zeros(fan_out));
    }
    Ok(NeuralNet { kind: ModelKind::Mlp, topology: topology.clone(), weights, biases, seed, train_digest: None })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row-wise softmax of logits.
fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

/// Mean of `−log softmax(z)[y]`, computed through a shifted log-sum-exp so
/// saturated logits stay finite.
fn mean_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .sum();
    total / labels.len() as f64
}

/// Gradients of the regularized objective, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Loss of one batch evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    /// Mean cross-entropy.
    pub cross_entropy: f64,
    /// Cross-entropy plus `λ/2 · Σw²`.
    pub objective: f64,
}

impl NeuralNet {
    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.topology.inputs() {
            return Err(Error::Domain(format!(
                "input has {len} features, network expects {}",
                self.topology.inputs()
            )));
        }
        Ok(())
    }

    /// Activations of every layer for a batch (rows are examples); the last
    /// entry holds softmax probabilities. Also returns the output logits.
    fn activations(&self, inputs: ArrayView2<f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let last = self.weights.len() - 1;
        let mut acts = vec![inputs.to_owned()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += b;
            if l == last {
                let probs = softmax_rows(&z);
                acts.push(probs);
                return (acts, z);
            }
            z.mapv_inplace(sigmoid);
            acts.push(z);
        }
        unreachable!("topology has an output layer")
    }

    fn weight_penalty(&self, l2: f64) -> f64 {
        if l2 == 0.0 {
            return 0.0;
        }
        0.5 * l2 * self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
    }

    /// Class probabilities for a batch.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(inputs.ncols())?;
        Ok(self.activations(inputs).0.pop().unwrap())
    }

    /// Objective and its gradient over a batch.
    pub fn loss_and_gradients(&self, inputs: ArrayView2<f64>, labels: &[usize], l2: f64) -> (Loss, Gradients) {
        let n = inputs.nrows() as f64;
        let (acts, logits) = self.activations(inputs);
        let output = acts.last().unwrap();
        let ce = mean_cross_entropy(&logits, labels);
        let loss = Loss { cross_entropy: ce, objective: ce + self.weight_penalty(l2) };

        let mut delta = output.clone();
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        delta /= n;

        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        for l in (0..layers).rev() {
            let mut w_grad = delta.t().dot(&acts[l]);
            if l2 != 0.0 {
                w_grad.scaled_add(l2, &self.weights[l]);
            }
            gw.push(w_grad);
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                back.zip_mut_with(&acts[l], |d, &a| *d *= a * (1.0 - a));
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        (loss, Gradients { weights: gw, biases: gb })
    }

    /// Objective without gradients.
    pub fn loss(&self, inputs: ArrayView2<f64>, labels: &[usize], l2: f64) -> Loss {
        let (_, logits) = self.activations(inputs);
        let ce = mean_cross_entropy(&logits, labels);
        Loss { cross_entropy: ce, objective: ce + self.weight_penalty(l2) }
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Class probabilities for one input.
pub fn forward(net: &NeuralNet, input: &[f64]) -> Result<Vec<f64>> {
    net.check_input(input.len())?;
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
    Ok(net.activations(x).0.pop().unwrap().into_raw_vec_and_offset().0)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn predict(net: &NeuralNet, input: &[f64]) -> Result<(usize, Vec<f64>)> {
    let scores = forward(net, input)?;
    Ok((argmax(&scores), scores))
}

/// Examples as a dense matrix plus class indices.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn from_pairs(pairs: &[(Vec<f64>, usize)]) -> Result<TrainingSet> {
        let width = pairs.first().map(|(x, _)| x.len()).ok_or_else(|| Error::Domain("empty training set".into()))?;
        let mut flat = Vec::with_capacity(pairs.len() * width);
        for (x, _) in pairs {
            if x.len() != width {
                return Err(Error::Domain("training examples differ in width".into()));
            }
            flat.extend_from_slice(x);
        }
        let inputs = Array2::from_shape_vec((pairs.len(), width), flat).expect("shape checked");
        Ok(TrainingSet { inputs, labels: pairs.iter().map(|(_, y)| *y).collect() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Objective before each update.
    pub losses: Vec<f64>,
    /// Parameter updates performed.
    pub iterations: usize,
    pub final_loss: Loss,
}

/// Full-batch gradient descent. Stops after `max_iterations` updates or as
/// soon as the mean cross-entropy reaches `target_error`.
pub fn train(mut net: NeuralNet, data: &TrainingSet, config: &TrainConfig) -> Result<(NeuralNet, TrainHistory)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("empty training set".into()));
    }
    net.check_input(data.inputs.ncols())?;
    let classes = net.topology.outputs();
    if let Some(&bad) = data.labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Domain(format!("label {bad} outside {classes} output classes")));
    }

    let x = data.inputs.view();
    let mut losses = Vec::new();
    let mut iterations = 0;
    loop {
        let (loss, grads) = net.loss_and_gradients(x, &data.labels, config.l2_lambda);
        if !loss.objective.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        losses.push(loss.objective);
        if loss.cross_entropy <= config.target_error || iterations == config.max_iterations {
            net.train_digest = Some(config.digest());
            return Ok((net, TrainHistory { losses, iterations, final_loss: loss }));
        }
        for (w, g) in net.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-config.learning_rate, g);
        }
        for (b, g) in net.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-config.learning_rate, g);
        }
        iterations += 1;
        if !net.all_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
    }
}

/// Largest relative disagreement between backpropagated and central-difference
/// gradients of the regularized objective on one example:
/// `max |g_a − g_n| / max(1e−12, |g_a| + |g_n|)`.
pub fn gradient_check(net: &NeuralNet, input: &[f64], label: usize, l2: f64, epsilon: f64) -> Result<f64> {
    net.check_input(input.len())?;
    if label >= net.topology.outputs() {
        return Err(Error::Domain(format!("label {label} outside the output layer")));
    }
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
    let labels = [label];
    let (_, analytic) = net.loss_and_gradients(x, &labels, l2);

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut compare = |ga: f64, gn: f64| {
        let rel = (ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-12);
        worst = worst.max(rel);
    };
    for l in 0..net.weights.len() {
        for idx in 0..net.weights[l].len() {
            let (r, c) = (idx / net.weights[l].ncols(), idx % net.weights[l].ncols());
            let orig = net.weights[l][[r, c]];
            probe.weights[l][[r, c]] = orig + epsilon;
            let up = probe.loss(x, &labels, l2).objective;
            probe.weights[l][[r, c]] = orig - epsilon;
            let down = probe.loss(x, &labels, l2).objective;
            probe.weights[l][[r, c]] = orig;
            compare(analytic.weights[l][[r, c]], (up - down) / (2.0 * epsilon));
        }
        for j in 0..net.biases[l].len() {
            let orig = net.biases[l][j];
            probe.biases[l][j] = orig + epsilon;
            let up = probe.loss(x, &labels, l2).objective;
            probe.biases[l][j] = orig - epsilon;
            let down = probe.loss(x, &labels, l2).objective;
            probe.biases[l][j] = orig;
            compare(analytic.biases[l][j], (up - down) / (2.0 * epsilon));
        }
    }
    Ok(worst)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Activations {
    hidden: String,
    output: String,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    kind: ModelKind,
    topology: Vec<usize>,
    activations: Activations,
    seed: u64,
    #[serde(default)]
    train_config_digest: Option<String>,
    /// Row-major `(out, in)` per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// JSON model document. Floats are written in shortest round-trip form, so
/// loading restores every parameter bit for bit.
pub fn save_model(net: &NeuralNet) -> String {
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        kind: net.kind,
        topology: net.topology.layers.clone(),
        activations: Activations { hidden: "sigmoid".into(), output: "softmax".into() },
        seed: net.seed,
        train_config_digest: net.train_digest.clone(),
        weights: net.weights.iter().map(|w| w.iter().copied().collect()).collect(),
        biases: net.biases.iter().map(|b| b.to_vec()).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

pub fn load_model(document: &str) -> Result<NeuralNet> {
    let doc: ModelDocument = serde_json::from_str(document).map_err(|e| Error::ModelLoad(e.to_string()))?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelLoad(format!(
            "format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.activations.hidden != "sigmoid" || doc.activations.output != "softmax" {
        return Err(Error::ModelLoad("only sigmoid hidden and softmax output layers are supported".into()));
    }
    let topology = Topology { layers: doc.topology };
    topology.validate().map_err(|e| Error::ModelLoad(e.to_string()))?;
    let layers = topology.layers.len() - 1;
    if doc.weights.len() != layers || doc.biases.len() != layers {
        return Err(Error::ModelLoad(format!("expected {layers} weight and bias blocks")));
    }
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for (l, (w, b)) in doc.weights.into_iter().zip(doc.biases).enumerate() {
        let (fan_in, fan_out) = (topology.layers[l], topology.layers[l + 1]);
        if w.len() != fan_in * fan_out || b.len() != fan_out {
            return Err(Error::ModelLoad(format!("layer {l} parameters do not match shape {fan_out}x{fan_in}")));
        }
        weights.push(Array2::from_shape_vec((fan_out, fan_in), w).expect("length checked"));
        biases.push(Array1::from(b));
    }
    let net = NeuralNet { kind: doc.kind, topology, weights, biases, seed: doc.seed, train_digest: doc.train_config_digest };
    if !net.all_finite() {
        return Err(Error::ModelLoad("non-finite parameter".into()));
    }
    Ok(net)
}

/// Loads a model and checks it has the expected topology.
pub fn load_model_expecting(document: &str, expected: &Topology) -> Result<NeuralNet> {
    let net = load_model(document)?;
    if &net.topology != expected {
        return Err(Error::ModelLoad(format!("model topology {} does not match expected {expected}", net.topology)));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> TrainingSet {
        TrainingSet::from_pairs(&[
            (vec![0.0, 0.0], 0),
            (vec![0.0, 1.0], 1),
            (vec![1.0, 0.0], 1),
            (vec![1.0, 1.0], 0),
        ])
        .unwrap()
    }

    fn zero_net(layers: &[usize]) -> NeuralNet {
        let mut net = init_network(&Topology::new(layers.to_vec()).unwrap(), 0).unwrap();
        for w in &mut net.weights {
            w.fill(0.0);
        }
        net
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let t = Topology::new(vec![2, 3, 2]).unwrap();
        let a = init_network(&t, 42).unwrap();
        assert_eq!(a, init_network(&t, 42).unwrap());
        assert_ne!(a, init_network(&t, 43).unwrap());
        assert_eq!(a.weights[0].dim(), (3, 2));
        assert_eq!(a.weights[1].dim(), (2, 3));
        assert!(a.weights[0].iter().all(|w| w.abs() <= 1.0 / 2f64.sqrt()));
        assert!(a.weights[1].iter().all(|w| w.abs() <= 1.0 / 3f64.sqrt()));
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn invalid_topologies() {
        assert!(matches!(Topology::new(vec![3, 2]), Err(Error::Config(_))));
        assert!(matches!(Topology::new(vec![3, 0, 2]), Err(Error::Config(_))));
    }

    #[test]
    fn presets() {
        assert_eq!(ModelKind::Mlp.topology(3, 2).layers, vec![3, 8, 2]);
        assert_eq!(ModelKind::Fnn.topology(10, 3).layers, vec![10, 20, 3]);
        assert_eq!(ModelKind::Dnn.topology(10, 3).layers, vec![10, 20, 10, 10, 3]);
        assert!(ModelKind::Dnn.default_l2() > 0.0);
        assert!(ModelKind::Dnn.topology(4, 3).layers.len() - 2 >= 2);
        let fnn = ModelKind::Fnn.build(10, 3, 1).unwrap();
        let limit = 1.0 / 15f64.sqrt();
        assert!(fnn.weights[0].iter().all(|w| w.abs() <= limit));
        assert_eq!(fnn.kind, ModelKind::Fnn);
    }

    #[test]
    fn symmetric_net_is_uniform() {
        let net = zero_net(&[4, 5, 3]);
        let scores = forward(&net, &[1.0, -2.0, 3.0, 0.5]).unwrap();
        for s in &scores {
            assert!((s - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(predict(&net, &[0.0; 4]).unwrap().0, 0);
        assert!(matches!(forward(&net, &[0.0; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn argmax_ties_and_values() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.4, 0.2, 0.4]), 0);
    }

    #[test]
    fn learns_xor() {
        let net = init_network(&Topology::new(vec![2, 4, 2]).unwrap(), 7).unwrap();
        let cfg = TrainConfig { max_iterations: 20_000, learning_rate: 0.5, ..TrainConfig::default() };
        let (net, hist) = train(net, &xor(), &cfg).unwrap();
        for (x, y) in [([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)] {
            assert_eq!(predict(&net, &x).unwrap().0, y, "{x:?}");
        }
        assert!(hist.losses.last().unwrap() < &hist.losses[0]);
    }

    #[test]
    fn strong_l2_shrinks_weights() {
        let data = xor();
        let t = Topology::new(vec![2, 4, 2]).unwrap();
        let norm = |net: &NeuralNet| net.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
        let base = TrainConfig { max_iterations: 500, learning_rate: 0.5, ..TrainConfig::default() };
        let (plain, _) = train(init_network(&t, 3).unwrap(), &data, &base).unwrap();
        // λ·lr must stay below 2 for the decay step to be stable.
        let decayed_cfg = TrainConfig { l2_lambda: 1e3, learning_rate: 1e-3, ..base };
        let (decayed, _) = train(init_network(&t, 3).unwrap(), &data, &decayed_cfg).unwrap();
        assert!(norm(&decayed) < norm(&plain));
    }

    #[test]
    fn single_example_descends() {
        let data = TrainingSet::from_pairs(&[(vec![0.3, -0.2, 0.9], 2)]).unwrap();
        let net = init_network(&Topology::new(vec![3, 4, 3]).unwrap(), 1).unwrap();
        let (_, hist) = train(net, &data, &TrainConfig { max_iterations: 50, ..TrainConfig::default() }).unwrap();
        assert!(hist.losses.last().unwrap() < &hist.losses[0]);
        assert_eq!(hist.iterations, 50);
    }

    #[test]
    fn training_errors() {
        let net = init_network(&Topology::new(vec![2, 3, 2]).unwrap(), 1).unwrap();
        let bad = TrainingSet::from_pairs(&[(vec![0.0, 0.0], 2)]).unwrap();
        assert!(matches!(train(net.clone(), &bad, &TrainConfig::default()), Err(Error::Domain(_))));
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(matches!(train(net.clone(), &xor(), &cfg), Err(Error::Config(_))));
        let cfg = TrainConfig { learning_rate: 1e308, ..TrainConfig::default() };
        assert!(matches!(train(net, &xor(), &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let t = Topology::new(vec![2, 5, 2]).unwrap();
        let cfg = TrainConfig { max_iterations: 300, learning_rate: 0.5, l2_lambda: 1e-3, ..TrainConfig::default() };
        let (a, ha) = train(init_network(&t, 9).unwrap(), &xor(), &cfg).unwrap();
        let (b, hb) = train(init_network(&t, 9).unwrap(), &xor(), &cfg).unwrap();
        assert_eq!(save_model(&a), save_model(&b));
        assert_eq!(ha, hb);
    }

    #[test]
    fn gradient_check_small_net() {
        let net = init_network(&Topology::new(vec![3, 4, 3]).unwrap(), 5).unwrap();
        for l2 in [0.0, 1e-2] {
            let err = gradient_check(&net, &[0.5, -1.0, 0.25], 1, l2, 1e-5).unwrap();
            assert!(err < 1e-6, "{err}");
        }
        let zero = zero_net(&[3, 4, 3]);
        let err = gradient_check(&zero, &[0.5, -1.0, 0.25], 0, 0.0, 1e-5).unwrap();
        assert!(err.is_finite() && err < 1e-6, "{err}");
    }

    #[test]
    fn output_bias_shift_keeps_label() {
        let mut net = init_network(&Topology::new(vec![3, 6, 4]).unwrap(), 11).unwrap();
        let x = [0.2, 0.9, -0.4];
        let (label, _) = predict(&net, &x).unwrap();
        net.biases[1].mapv_inplace(|b| b + 37.5);
        assert_eq!(predict(&net, &x).unwrap().0, label);
    }

    #[test]
    fn model_round_trip_and_errors() {
        let mut net = ModelKind::Dnn.build(5, 3, 17).unwrap();
        net.biases[2][1] = 0.1 + 0.2;
        let doc = save_model(&net);
        let back = load_model(&doc).unwrap();
        assert_eq!(back, net);
        assert!(matches!(load_model(&doc[..doc.len() / 2]), Err(Error::ModelLoad(_))));
        let other = Topology::new(vec![5, 8, 3]).unwrap();
        assert!(matches!(load_model_expecting(&doc, &other), Err(Error::ModelLoad(_))));
        let bumped = doc.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(load_model(&bumped), Err(Error::ModelLoad(_))));
    }
}
