use crate::error::{Error, Result};
use crate::kernels::{avg_pool, conv1d, dense, global_avg_pool, gru_output, gru_step, softmax_pow2};
use crate::tensor::QTensor;

use super::{Layer, ModelGraph};

/// Result of classifying one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub probabilities: Vec<f64>,
    pub class: usize,
    pub logits: QTensor,
}

/// One recorded layer output.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub layer: usize,
    /// Window index for per-window layers and GRU steps, `None` for the head.
    pub window: Option<usize>,
    pub output: QTensor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn get(&self, layer: usize, window: Option<usize>) -> Option<&QTensor> {
        self.entries.iter().find(|e| e.layer == layer && e.window == window).map(|e| &e.output)
    }
}

/// Per-recording evaluation state. One engine per concurrent evaluation;
/// the graph itself is shared.
#[derive(Debug)]
pub struct Engine<'g> {
    graph: &'g ModelGraph,
    /// Index of the first layer after the per-window front end.
    split: usize,
    state: Option<QTensor>,
    features: Option<QTensor>,
    steps: usize,
}

impl<'g> Engine<'g> {
    pub fn new(graph: &'g ModelGraph) -> Result<Self> {
        let split = graph.layers.iter().position(|l| !l.kind().is_per_window()).unwrap_or(graph.layers.len());
        let mut grus = 0;
        for l in &graph.layers[split..] {
            match l {
                Layer::Gru(_) => grus += 1,
                Layer::Dense(_) | Layer::Softmax => {}
                other => {
                    return Err(Error::Shape(format!("{:?} cannot follow the per-window front end", other.kind())));
                }
            }
        }
        if grus > 1 || (grus == 1 && !matches!(graph.layers.get(split), Some(Layer::Gru(_)))) {
            return Err(Error::Shape("at most one GRU, directly after the front end".into()));
        }
        let mut engine = Self { graph, split, state: None, features: None, steps: 0 };
        engine.reset();
        Ok(engine)
    }

    pub fn reset(&mut self) {
        self.state = self.graph.gru().map(|g| g.zero_state());
        self.features = None;
        self.steps = 0;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn check_window(&self, window: &QTensor) -> Result<()> {
        let g = self.graph;
        if window.shape() != (g.meta.window_len, 1) {
            return Err(Error::Shape(format!(
                "window shape {:?}, expected ({}, 1)",
                window.shape(),
                g.meta.window_len
            )));
        }
        if window.fmt() != g.input_fmt {
            return Err(Error::Format(format!("window is {}, model input is {}", window.fmt(), g.input_fmt)));
        }
        Ok(())
    }

    fn run_layer(layer: &Layer, x: &QTensor) -> Result<QTensor> {
        match layer {
            Layer::Conv(c) => conv1d(x, c),
            Layer::AvgPool { size, stride } => avg_pool(x, *size, *stride),
            Layer::GlobalAvgPool => global_avg_pool(x),
            Layer::Dense(d) => dense(x, d),
            Layer::Gru(_) | Layer::Softmax => Ok(x.clone()),
        }
    }

    fn frontend_impl(&self, window: &QTensor, w: usize, trace: Option<&mut Trace>) -> Result<QTensor> {
        self.check_window(window)?;
        let mut trace = trace;
        let mut x = window.clone();
        for (i, layer) in self.graph.layers[..self.split].iter().enumerate() {
            x = Self::run_layer(layer, &x)?;
            if let Some(t) = trace.as_deref_mut() {
                t.entries.push(TraceEntry { layer: i, window: Some(w), output: x.clone() });
            }
        }
        Ok(x)
    }

    /// Run the per-window layers (convolutions and pooling) on one window.
    pub fn frontend(&self, window: &QTensor) -> Result<QTensor> {
        self.frontend_impl(window, 0, None)
    }

    /// Feed one window's feature vector into the recurrence.
    pub fn recur(&mut self, features: &QTensor) -> Result<()> {
        match self.graph.layers.get(self.split) {
            Some(Layer::Gru(g)) => {
                let state = self.state.as_ref().expect("state exists when the graph has a GRU");
                self.state = Some(gru_step(state, features, g)?);
            }
            _ if self.steps > 0 => {
                return Err(Error::Shape("a graph without a GRU takes exactly one window".into()));
            }
            _ => self.features = Some(features.clone()),
        }
        self.steps += 1;
        Ok(())
    }

    fn head_impl(&self, mut trace: Option<&mut Trace>) -> Result<Inference> {
        if self.steps == 0 {
            return Err(Error::EmptyTensor);
        }
        let mut start = self.split;
        let mut x = match self.graph.layers.get(self.split) {
            Some(Layer::Gru(g)) => {
                start += 1;
                gru_output(self.state.as_ref().expect("GRU state"), g)?
            }
            _ => self.features.clone().expect("features recorded"),
        };
        if start > self.split {
            if let Some(t) = trace.as_deref_mut() {
                t.entries.push(TraceEntry { layer: self.split, window: None, output: x.clone() });
            }
        }
        let mut probabilities = None;
        for (i, layer) in self.graph.layers.iter().enumerate().skip(start) {
            if let Layer::Softmax = layer {
                probabilities = Some(softmax_pow2(&x)?);
                continue;
            }
            x = Self::run_layer(layer, &x)?;
            if let Some(t) = trace.as_deref_mut() {
                t.entries.push(TraceEntry { layer: i, window: None, output: x.clone() });
            }
        }
        let probabilities = probabilities.unwrap_or_else(|| x.to_real());
        let class = argmax_first(x.data());
        Ok(Inference { probabilities, class, logits: x })
    }

    /// Requantize the final state and run the classifier head.
    pub fn head(&self) -> Result<Inference> {
        self.head_impl(None)
    }

    pub fn run(&mut self, windows: &[QTensor]) -> Result<Inference> {
        self.reset();
        for w in windows {
            let f = self.frontend(w)?;
            self.recur(&f)?;
        }
        self.head()
    }

    /// Like [`Engine::run`], also recording every layer output.
    pub fn run_traced(&mut self, windows: &[QTensor]) -> Result<(Inference, Trace)> {
        self.reset();
        let mut trace = Trace::default();
        for (w, win) in windows.iter().enumerate() {
            let f = self.frontend_impl(win, w, Some(&mut trace))?;
            self.recur(&f)?;
            if let Some(state) = &self.state {
                trace.entries.push(TraceEntry { layer: self.split, window: Some(w), output: state.clone() });
            }
        }
        let inf = self.head_impl(Some(&mut trace))?;
        Ok((inf, trace))
    }
}

fn argmax_first(v: &[i16]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Classify one recording given its quantized windows, in order.
pub fn forward_quantized(graph: &ModelGraph, windows: &[QTensor]) -> Result<Inference> {
    Engine::new(graph)?.run(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_canonical_model;
    use crate::qformat::QFormat;

    #[test]
    fn zero_model_is_uniform() {
        let g = build_canonical_model();
        let w = QTensor::from_real(&vec![0.3; 256], 256, 1, QFormat::Q2_5).unwrap();
        let out = forward_quantized(&g, &[w]).unwrap();
        assert_eq!(out.probabilities, vec![0.25; 4]);
    }

    #[test]
    fn four_windows_four_steps_one_output() {
        let g = build_canonical_model();
        let windows: Vec<QTensor> = (0..4)
            .map(|i| QTensor::from_real(&vec![i as f64 * 0.1; 256], 256, 1, QFormat::Q2_5).unwrap())
            .collect();
        let mut e = Engine::new(&g).unwrap();
        let out = e.run(&windows).unwrap();
        assert_eq!(e.steps(), 4);
        assert_eq!(out.probabilities.len(), 4);
    }

    #[test]
    fn rejects_bad_windows() {
        let g = build_canonical_model();
        let short = QTensor::zeros(128, 1, QFormat::Q2_5);
        assert!(matches!(forward_quantized(&g, &[short]), Err(Error::Shape(_))));
        let wrong = QTensor::zeros(256, 1, QFormat::Q0_7);
        assert!(matches!(forward_quantized(&g, &[wrong]), Err(Error::Format(_))));
        assert!(matches!(forward_quantized(&g, &[]), Err(Error::EmptyTensor)));
    }

    #[test]
    fn trace_covers_every_layer() {
        let g = build_canonical_model();
        let w = QTensor::zeros(256, 1, QFormat::Q2_5);
        let (_, trace) = Engine::new(&g).unwrap().run_traced(&[w.clone(), w]).unwrap();
        // 15 front-end layers x 2 windows, 2 GRU states, GRU output, dense
        assert_eq!(trace.entries.len(), 15 * 2 + 2 + 1 + 1);
        assert_eq!(trace.get(0, Some(1)).unwrap().shape(), (256, 8));
        assert_eq!(trace.get(15, None).unwrap().fmt(), QFormat::Q2_5);
    }
}
