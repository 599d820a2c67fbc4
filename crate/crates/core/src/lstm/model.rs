//! A trained network bundled with everything needed to use it on raw bars,
//! and its versioned JSON file format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::cell::{CellVariant, GateParams, LstmLayerParams};
use super::matrix::Matrix;
use super::network::{DenseHead, ForwardCache, LstmNetwork};
use super::train::TrainConfig;
use super::LstmError;
use crate::indicators::{ColumnSet, FeatureSpec};
use crate::scaling::ScalerParams;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Univariate,
    Multivariate,
}

impl Mode {
    pub fn for_columns(set: ColumnSet) -> Self {
        match set {
            ColumnSet::Univariate => Self::Univariate,
            _ => Self::Multivariate,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Univariate => "univariate",
            Self::Multivariate => "multivariate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub mode: Mode,
    pub network: LstmNetwork,
    pub scaler: ScalerParams,
    pub feature_names: Vec<String>,
    pub features: FeatureSpec,
    pub lookback: usize,
    pub train_config: TrainConfig,
    pub rng_seed: u64,
}

impl LstmModel {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// One prediction (scaled Close) from a `lookback x features` window.
    pub fn forward(&self, window: &[f64]) -> Result<(f64, ForwardCache), LstmError> {
        let expected = self.lookback * self.num_features();
        if window.len() != expected {
            return Err(LstmError::ShapeMismatch(format!(
                "window has {} values, model expects {} x {}",
                window.len(),
                self.lookback,
                self.num_features()
            )));
        }
        let (p, cache) = self.network.forward(window, self.lookback)?;
        if !p.is_finite() {
            return Err(LstmError::NonFiniteOutput);
        }
        Ok((p, cache))
    }

    pub fn predict(&self, window: &[f64]) -> Result<f64, LstmError> {
        self.forward(window).map(|(p, _)| p)
    }

    /// Cross-checks the metadata against the network shapes.
    pub fn validate(&self) -> Result<(), String> {
        self.network.validate()?;
        self.scaler.validate().map_err(|e| format!("scaler: {e}"))?;
        if self.lookback == 0 {
            return Err("lookback: must be >= 1".into());
        }
        if self.network.input_size() != self.feature_names.len() {
            return Err(format!(
                "feature_names: {} names for network input size {}",
                self.feature_names.len(),
                self.network.input_size()
            ));
        }
        if self.scaler.column_names != self.feature_names {
            return Err("scaler.column_names: differ from feature_names".into());
        }
        if self.features.column_names() != self.feature_names {
            return Err("features: column set does not produce feature_names".into());
        }
        if self.mode != Mode::for_columns(self.features.column_set) {
            return Err("mode: inconsistent with features.column_set".into());
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w_fx: Matrix,
    w_fh: Matrix,
    b_f: Vec<f64>,
    w_ix: Matrix,
    w_ih: Matrix,
    b_i: Vec<f64>,
    w_gx: Matrix,
    w_gh: Matrix,
    b_g: Vec<f64>,
    w_ox: Matrix,
    w_oh: Matrix,
    b_o: Vec<f64>,
}

impl From<&LstmLayerParams> for LayerFile {
    fn from(l: &LstmLayerParams) -> Self {
        Self {
            w_fx: l.forget.w_x.clone(),
            w_fh: l.forget.w_h.clone(),
            b_f: l.forget.b.clone(),
            w_ix: l.input.w_x.clone(),
            w_ih: l.input.w_h.clone(),
            b_i: l.input.b.clone(),
            w_gx: l.candidate.w_x.clone(),
            w_gh: l.candidate.w_h.clone(),
            b_g: l.candidate.b.clone(),
            w_ox: l.output.w_x.clone(),
            w_oh: l.output.w_h.clone(),
            b_o: l.output.b.clone(),
        }
    }
}

impl From<LayerFile> for LstmLayerParams {
    fn from(f: LayerFile) -> Self {
        let gate = |w_x, w_h, b| GateParams { w_x, w_h, b };
        Self {
            forget: gate(f.w_fx, f.w_fh, f.b_f),
            input: gate(f.w_ix, f.w_ih, f.b_i),
            candidate: gate(f.w_gx, f.w_gh, f.b_g),
            output: gate(f.w_ox, f.w_oh, f.b_o),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    mode: Mode,
    cell_variant: CellVariant,
    feature_names: Vec<String>,
    lookback: usize,
    hidden_sizes: Vec<usize>,
    features: FeatureSpec,
    scaler: ScalerParams,
    train_config: TrainConfig,
    rng_seed: u64,
    layers: Vec<LayerFile>,
    head: DenseHead,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Writes every float in scientific notation with 17 significant digits.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serialises the model to its JSON document.
pub fn model_to_json(model: &LstmModel) -> Result<String, LstmError> {
    model
        .validate()
        .map_err(LstmError::InvalidModel)?;
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        mode: model.mode,
        cell_variant: model.network.cell_variant,
        feature_names: model.feature_names.clone(),
        lookback: model.lookback,
        hidden_sizes: model.network.hidden_sizes(),
        features: model.features.clone(),
        scaler: model.scaler.clone(),
        train_config: model.train_config.clone(),
        rng_seed: model.rng_seed,
        layers: model.network.layers.iter().map(LayerFile::from).collect(),
        head: model.network.head.clone(),
    };
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    file.serialize(&mut ser)
        .map_err(|e| LstmError::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn save_model(model: &LstmModel, mut sink: impl Write) -> Result<(), LstmError> {
    let text = model_to_json(model)?;
    sink.write_all(text.as_bytes())
        .map_err(|e| LstmError::Io(e.to_string()))
}

/// Parses a model document, reporting where in the document it is broken.
pub fn model_from_json(text: &str) -> Result<LstmModel, LstmError> {
    let corrupt = |path: &str, message: String| LstmError::CorruptModel {
        path: path.to_string(),
        message,
    };
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| corrupt("format_version", e.to_string()))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(LstmError::UnsupportedVersion(probe.format_version));
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| corrupt(&e.path().to_string(), e.inner().to_string()))?;

    if file.hidden_sizes.len() != file.layers.len() {
        return Err(corrupt("hidden_sizes", "length differs from layers".into()));
    }
    let layers: Vec<LstmLayerParams> = file.layers.into_iter().map(Into::into).collect();
    for (k, (layer, &h)) in layers.iter().zip(&file.hidden_sizes).enumerate() {
        if layer.hidden_size() != h {
            return Err(corrupt(&format!("layers[{k}]"), format!("hidden size {} != {h}", layer.hidden_size())));
        }
    }
    let model = LstmModel {
        mode: file.mode,
        network: LstmNetwork {
            cell_variant: file.cell_variant,
            layers,
            head: file.head,
        },
        scaler: file.scaler,
        feature_names: file.feature_names,
        features: file.features,
        lookback: file.lookback,
        train_config: file.train_config,
        rng_seed: file.rng_seed,
    };
    model.validate().map_err(|e| {
        let path = e.split(':').next().unwrap_or("").to_string();
        corrupt(&path, e)
    })?;
    Ok(model)
}

pub fn load_model(mut source: impl Read) -> Result<LstmModel, LstmError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| LstmError::Io(e.to_string()))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicators::IndicatorConfig;

    fn model() -> LstmModel {
        let features = FeatureSpec {
            column_set: ColumnSet::Univariate,
            indicators: IndicatorConfig::default(),
            use_adj_close: false,
        };
        LstmModel {
            mode: Mode::Univariate,
            network: LstmNetwork::init(1, &[3, 2], CellVariant::Standard, 9),
            scaler: ScalerParams {
                column_names: vec!["Close".into()],
                mins: vec![10.0],
                maxs: vec![20.0],
                clip: false,
            },
            feature_names: vec!["Close".into()],
            features,
            lookback: 4,
            train_config: TrainConfig::default(),
            rng_seed: 9,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let text = model_to_json(&m).unwrap();
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_json(&back).unwrap(), text);
        let w = [0.1, -0.3, 0.5, 0.9];
        assert_eq!(m.predict(&w).unwrap(), back.predict(&w).unwrap());
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let text = model_to_json(&model()).unwrap();
        assert!(text.contains("\"mins\":[1.0000000000000000e1]"), "{text}");
        assert!(text.contains("\"format_version\":1"));
        assert!(text.contains("\"w_fx\":[["));
    }

    #[test]
    fn corrupt_and_version_errors() {
        let text = model_to_json(&model()).unwrap();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(model_from_json(truncated), Err(LstmError::CorruptModel { .. })));

        let bumped = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert_eq!(model_from_json(&bumped), Err(LstmError::UnsupportedVersion(2)));

        let broken = text.replacen("\"lookback\":4", "\"lookback\":\"x\"", 1);
        match model_from_json(&broken) {
            Err(LstmError::CorruptModel { path, .. }) => assert_eq!(path, "lookback"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_shape_checked() {
        assert!(matches!(model().predict(&[0.0; 3]), Err(LstmError::ShapeMismatch(_))));
    }
}
