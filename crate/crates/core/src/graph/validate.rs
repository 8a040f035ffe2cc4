use serde::Serialize;

use crate::kernels::{fast_conv_eligible, GruShifts};
use crate::qformat::{derive_shifts, QFormat};

use super::{layer_names, Layer, ModelGraph, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub layer: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
    /// `(layer name, parameter count)` for every layer.
    pub param_counts: Vec<(String, usize)>,
    pub total_params: usize,
    /// `(conv layer name, eligible for the fast kernel)`.
    pub fast_eligible: Vec<(String, bool)>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }
}

/// Check shape and format chains, shifts and fast-kernel eligibility.
pub fn validate(graph: &ModelGraph) -> ValidationReport {
    let kinds = graph.kinds();
    let names = layer_names(&kinds);
    let mut report = ValidationReport::default();
    let mut push = |sev: Severity, layer: Option<&str>, message: String| {
        report.diagnostics.push(Diagnostic { severity: sev, layer: layer.map(str::to_string), message })
    };

    if graph.layers.is_empty() {
        push(Severity::Error, None, "graph has no layers".into());
    }

    let mut shape = Some(Shape::Seq { len: graph.meta.window_len, channels: 1 });
    let mut fmt: Option<QFormat> = Some(graph.input_fmt);
    let mut fast = Vec::new();
    for (i, layer) in graph.layers.iter().enumerate() {
        let name = names[i].as_str();
        if let Some(s) = shape {
            shape = match kinds[i].output_shape(s) {
                Ok(next) => Some(next),
                Err(e) => {
                    push(Severity::Error, Some(name), format!("shape chain break: {e}"));
                    None
                }
            };
        }
        let expect_in = |want: QFormat, push: &mut dyn FnMut(Severity, Option<&str>, String)| {
            if let Some(f) = fmt {
                if f != want {
                    push(Severity::Error, Some(name), format!("format chain break: receives {f}, declares {want}"));
                }
            }
        };
        match layer {
            Layer::Conv(c) => {
                expect_in(c.in_fmt, &mut push);
                if let Err(e) = c.check_blobs() {
                    push(Severity::Error, Some(name), e.to_string());
                }
                match derive_shifts(c.in_fmt, c.weights.fmt, c.bias.fmt, c.out_fmt) {
                    Ok(s) if s != c.shifts => push(
                        Severity::Error,
                        Some(name),
                        format!("stored shifts {:?} differ from derived {s:?}", c.shifts),
                    ),
                    Ok(_) => {}
                    Err(e) => push(Severity::Error, Some(name), format!("negative shift: {e}")),
                }
                let eligible = fast_conv_eligible(c.in_channels, c.out_channels);
                if c.fast && !eligible {
                    push(
                        Severity::Error,
                        Some(name),
                        format!("flagged fast but channels {} -> {} violate the 4/2 rule", c.in_channels, c.out_channels),
                    );
                }
                fast.push((name.to_string(), eligible));
                fmt = Some(c.out_fmt);
            }
            Layer::Gru(g) => {
                expect_in(g.in_fmt, &mut push);
                if let Err(e) = g.check_blobs() {
                    push(Severity::Error, Some(name), e.to_string());
                }
                let derived = GruShifts::derive(g.in_fmt, g.kernel.fmt, g.recurrent.fmt, g.bias.fmt, g.state_fmt, g.gate_fmt);
                if derived != g.shifts {
                    push(Severity::Error, Some(name), format!("stored shifts {:?} differ from derived {derived:?}", g.shifts));
                }
                if g.gate_fmt.total_bits() != 16 {
                    push(Severity::Warning, Some(name), format!("gate format {} is not 16-bit", g.gate_fmt));
                }
                fmt = Some(g.out_fmt);
            }
            Layer::Dense(d) => {
                expect_in(d.in_fmt, &mut push);
                if let Err(e) = d.check_blobs() {
                    push(Severity::Error, Some(name), e.to_string());
                }
                match derive_shifts(d.in_fmt, d.weights.fmt, d.bias.fmt, d.out_fmt) {
                    Ok(s) if s != d.shifts => push(
                        Severity::Error,
                        Some(name),
                        format!("stored shifts {:?} differ from derived {s:?}", d.shifts),
                    ),
                    Ok(_) => {}
                    Err(e) => push(Severity::Error, Some(name), format!("negative shift: {e}")),
                }
                fmt = Some(d.out_fmt);
            }
            Layer::AvgPool { .. } | Layer::GlobalAvgPool | Layer::Softmax => {}
        }
    }
    for (name, eligible) in &fast {
        if *eligible {
            push(Severity::Info, Some(name), "eligible for the fast convolution kernel".into());
        }
    }
    report.fast_eligible = fast;
    report.param_counts = names.iter().cloned().zip(graph.layers.iter().map(Layer::param_count)).collect();
    report.total_params = graph.param_count();
    report
}
