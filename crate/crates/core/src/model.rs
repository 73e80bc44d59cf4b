//! The two-headed network: convolution stem, residual stages, optional
//! sequence-channel attention, global average pooling, and one linear head
//! per task. Also the `DT4E` checkpoint format.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::nn::{
    self, join, BatchNorm1dLayer, Conv1dLayer, LinearLayer, Mode, Module, NamedTensor,
    ResidualBlock1d,
};
use crate::rng::seeded;
use crate::sca::{ScaModule, DEFAULT_REDUCTION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StemConfig {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub out_channels: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_len: usize,
    pub n_subjects: usize,
    pub n_activities: usize,
    pub stem: StemConfig,
    pub blocks: Vec<BlockConfig>,
    pub block_kernel: usize,
    pub sca_reduction: usize,
    pub use_sca: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_len: 300,
            n_subjects: 15,
            n_activities: 3,
            stem: StemConfig {
                out_channels: 32,
                kernel: 7,
                stride: 2,
                padding: 3,
            },
            blocks: vec![
                BlockConfig {
                    out_channels: 64,
                    stride: 2,
                },
                BlockConfig {
                    out_channels: 128,
                    stride: 2,
                },
                BlockConfig {
                    out_channels: 128,
                    stride: 1,
                },
            ],
            block_kernel: 3,
            sca_reduction: DEFAULT_REDUCTION,
            use_sca: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// A small network on 40-sample inputs, for tests and demos.
    pub fn tiny() -> Self {
        ModelConfig {
            input_len: 40,
            n_subjects: 4,
            n_activities: 3,
            stem: StemConfig {
                out_channels: 4,
                kernel: 5,
                stride: 2,
                padding: 2,
            },
            blocks: vec![
                BlockConfig {
                    out_channels: 8,
                    stride: 2,
                },
                BlockConfig {
                    out_channels: 8,
                    stride: 1,
                },
            ],
            block_kernel: 3,
            sca_reduction: 4,
            use_sca: true,
            seed: 3,
        }
    }

    /// Time length after the stem and after each block, in order.
    pub fn time_lengths(&self) -> Result<Vec<usize>> {
        let bad = |what: &str| Error::Config(format!("{what} leaves no samples on the time axis"));
        let mut lens = vec![self.input_len];
        let mut len = nn::conv_out_len(
            self.input_len,
            self.stem.kernel,
            self.stem.stride,
            self.stem.padding,
        )
        .ok_or_else(|| bad("stem"))?;
        lens.push(len);
        let pad = self.block_kernel / 2;
        for (i, b) in self.blocks.iter().enumerate() {
            len = nn::conv_out_len(len, self.block_kernel, b.stride, pad)
                .ok_or_else(|| bad(&format!("block {i}")))?;
            lens.push(len);
        }
        Ok(lens)
    }

    pub fn feature_width(&self) -> usize {
        self.blocks
            .last()
            .map_or(self.stem.out_channels, |b| b.out_channels)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_len", self.input_len),
            ("n_subjects", self.n_subjects),
            ("n_activities", self.n_activities),
            ("stem.out_channels", self.stem.out_channels),
            ("stem.kernel", self.stem.kernel),
            ("stem.stride", self.stem.stride),
            ("block_kernel", self.block_kernel),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.out_channels == 0 || b.stride == 0 {
                return Err(Error::Config(format!(
                    "model.blocks[{i}] needs positive channels and stride"
                )));
            }
        }
        if self.block_kernel.is_multiple_of(2) {
            return Err(Error::Config("model.block_kernel must be odd".into()));
        }
        self.time_lengths()?;
        if self.use_sca
            && (self.sca_reduction == 0 || !self.feature_width().is_multiple_of(self.sca_reduction))
        {
            return Err(Error::Config(format!(
                "model.sca_reduction {} must divide the final channel count {}",
                self.sca_reduction,
                self.feature_width()
            )));
        }
        Ok(())
    }
}

/// Which parameters the GradNorm gradient norms are taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SharedScope {
    /// Final residual block plus the attention module.
    #[default]
    LastStage,
    /// Every parameter below the task heads.
    Backbone,
}

#[derive(Debug, Clone)]
pub struct Dt4EcgModel<T: Scalar> {
    pub config: ModelConfig,
    pub stem_conv: Conv1dLayer<T>,
    pub stem_bn: BatchNorm1dLayer<T>,
    pub blocks: Vec<ResidualBlock1d<T>>,
    pub sca: Option<ScaModule<T>>,
    pub head_id: LinearLayer<T>,
    pub head_activity: LinearLayer<T>,
    pub mode: Mode,
}

/// Logits of both heads plus the pooled features they share.
pub struct ModelOutput<T: Scalar> {
    pub id_logits: Tensor<T>,
    pub activity_logits: Tensor<T>,
    pub features: Tensor<T>,
}

impl<T: Scalar> Dt4EcgModel<T> {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(config.seed, &[0x6d6f_64656c]);
        let lens = config.time_lengths()?;
        let stem_conv = Conv1dLayer::new(
            1,
            config.stem.out_channels,
            config.stem.kernel,
            config.stem.stride,
            config.stem.padding,
            &mut rng,
        )?;
        let stem_bn = BatchNorm1dLayer::new(config.stem.out_channels)?;
        let mut blocks = Vec::with_capacity(config.blocks.len());
        let mut c_in = config.stem.out_channels;
        for b in &config.blocks {
            blocks.push(ResidualBlock1d::new(
                c_in,
                b.out_channels,
                b.stride,
                config.block_kernel,
                &mut rng,
            )?);
            c_in = b.out_channels;
        }
        let sca = if config.use_sca {
            Some(ScaModule::new(
                c_in,
                *lens.last().unwrap(),
                config.sca_reduction,
                &mut rng,
            )?)
        } else {
            None
        };
        let head_id = LinearLayer::new(c_in, config.n_subjects, &mut rng)?;
        let head_activity = LinearLayer::new(c_in, config.n_activities, &mut rng)?;
        Ok(Dt4EcgModel {
            config,
            stem_conv,
            stem_bn,
            blocks,
            sca,
            head_id,
            head_activity,
            mode: Mode::Train,
        })
    }

    pub fn train(&mut self) {
        self.mode = Mode::Train;
    }

    pub fn eval(&mut self) {
        self.mode = Mode::Eval;
    }

    /// Backbone features `(B, width)` after attention and global average pooling.
    pub fn features(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, c, t) = x.dims3("model_forward")?;
        if c != 1 || t != self.config.input_len {
            return Err(Error::shape(
                "model_forward",
                format!(
                    "expected input (B,1,{}), got {:?}",
                    self.config.input_len,
                    x.shape()
                ),
            ));
        }
        let mut h = nn::relu(
            &self
                .stem_bn
                .forward(&self.stem_conv.forward(x)?, self.mode)?,
        );
        for block in &self.blocks {
            h = block.forward(&h, self.mode)?;
        }
        if let Some(sca) = &self.sca {
            h = sca.forward(&h)?;
        }
        nn::global_avg_pool(&h)
    }

    pub fn forward_full(&self, x: &Tensor<T>) -> Result<ModelOutput<T>> {
        let features = self.features(x)?;
        Ok(ModelOutput {
            id_logits: self.head_id.forward(&features)?,
            activity_logits: self.head_activity.forward(&features)?,
            features,
        })
    }

    /// `(id_logits (B, n_subjects), activity_logits (B, n_activities))`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let out = self.forward_full(x)?;
        Ok((out.id_logits, out.activity_logits))
    }

    /// Parameters whose task-gradient norms drive GradNorm.
    pub fn shared_parameters(&self, scope: SharedScope) -> Vec<Tensor<T>> {
        let mut out = Vec::new();
        match scope {
            SharedScope::LastStage => {
                if let Some(last) = self.blocks.last() {
                    last.collect("", &mut out);
                }
                if let Some(sca) = &self.sca {
                    sca.collect("", &mut out);
                }
                if out.is_empty() {
                    self.stem_conv.collect("", &mut out);
                    self.stem_bn.collect("", &mut out);
                }
            }
            SharedScope::Backbone => self.collect_backbone("", &mut out),
        }
        out.into_iter()
            .filter(|n| n.role == nn::Role::Param)
            .map(|n| n.tensor)
            .collect()
    }

    fn collect_backbone(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        self.stem_conv.collect(&join(prefix, "stem.conv"), out);
        self.stem_bn.collect(&join(prefix, "stem.bn"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect(&join(prefix, &format!("blocks.{i}")), out);
        }
        if let Some(sca) = &self.sca {
            sca.collect(&join(prefix, "sca"), out);
        }
    }
}

impl<T: Scalar> Module<T> for Dt4EcgModel<T> {
    fn collect(&self, prefix: &str, out: &mut Vec<NamedTensor<T>>) {
        self.collect_backbone(prefix, out);
        self.head_id.collect(&join(prefix, "head_id"), out);
        self.head_activity
            .collect(&join(prefix, "head_activity"), out);
    }
}

/// Number of trainable scalars.
pub fn count_parameters<T: Scalar>(m: &impl Module<T>) -> usize {
    m.num_parameters()
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DT4E";
pub const CHECKPOINT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// Serialise every parameter and running statistic.
pub fn encode_checkpoint(m: &Dt4EcgModel<f32>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let config = serde_json::to_string(&m.config)?;
    put_u32(&mut buf, config.len())?;
    buf.extend_from_slice(config.as_bytes());
    let tensors = m.named_tensors();
    put_u32(&mut buf, tensors.len())?;
    for nt in &tensors {
        put_u32(&mut buf, nt.name.len())?;
        buf.extend_from_slice(nt.name.as_bytes());
        buf.push(DTYPE_F32);
        let shape = nt.tensor.shape();
        let rank = u8::try_from(shape.len())
            .map_err(|_| Error::invalid("checkpoint", "rank above 255"))?;
        buf.push(rank);
        for &d in shape {
            put_u32(&mut buf, d)?;
        }
        for v in nt.tensor.data().iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| Error::invalid("checkpoint", format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Little-endian cursor that reports the byte offset of any failure.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| self.err("length overflow"))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let start = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::Format {
                offset: start as u64,
                msg: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            });
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Dt4EcgModel<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported checkpoint version {version}"),
        });
    }
    let config_len = r.u32("config length")? as usize;
    let config_at = r.offset();
    let config_text =
        std::str::from_utf8(r.take(config_len, "config")?).map_err(|_| Error::Format {
            offset: config_at,
            msg: "config is not UTF-8".into(),
        })?;
    let config: ModelConfig = serde_json::from_str(config_text).map_err(|e| Error::Format {
        offset: config_at,
        msg: format!("config: {e}"),
    })?;
    let model = Dt4EcgModel::<f32>::new(config).map_err(|e| Error::Format {
        offset: config_at,
        msg: format!("config: {e}"),
    })?;
    let expected: HashMap<String, Tensor<f32>> = model
        .named_tensors()
        .into_iter()
        .map(|n| (n.name, n.tensor))
        .collect();

    let count = r.u32("tensor count")? as usize;
    if count != expected.len() {
        return Err(r.err(format!(
            "{count} tensors stored, model has {}",
            expected.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let at = r.offset();
        let name_len = r.u32("name length")? as usize;
        let name = String::from_utf8(r.take(name_len, "tensor name")?.to_vec()).map_err(|_| {
            Error::Format {
                offset: at,
                msg: "tensor name is not UTF-8".into(),
            }
        })?;
        let Some(target) = expected.get(&name) else {
            return Err(Error::Format {
                offset: at,
                msg: format!("unknown tensor {name:?}"),
            });
        };
        if !seen.insert(name.clone()) {
            return Err(Error::Format {
                offset: at,
                msg: format!("duplicate tensor {name:?}"),
            });
        }
        let dtype = r.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(r.err(format!("unsupported dtype code {dtype}")));
        }
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("extent")? as usize);
        }
        if shape != target.shape() {
            return Err(r.err(format!(
                "tensor {name:?} has shape {shape:?}, model expects {:?}",
                target.shape()
            )));
        }
        let values = r.f32s(target.numel(), "tensor payload")?;
        target.data_mut().copy_from_slice(&values);
    }
    r.finish()?;
    Ok(model)
}

pub fn save_checkpoint(m: &Dt4EcgModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(m)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Dt4EcgModel<f32>> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ops;

    fn input(batch: usize, len: usize) -> Tensor<f32> {
        let data = (0..batch * len)
            .map(|i| ((i as f32) * 0.37).sin())
            .collect();
        Tensor::new(data, &[batch, 1, len]).unwrap()
    }

    #[test]
    fn default_plan_time_lengths() {
        assert_eq!(
            ModelConfig::default().time_lengths().unwrap(),
            vec![300, 150, 75, 38, 38]
        );
        assert_eq!(ModelConfig::default().feature_width(), 128);
    }

    #[test]
    fn output_shapes_and_input_check() {
        let m = Dt4EcgModel::<f32>::new(ModelConfig::default()).unwrap();
        let (id, act) = m.forward(&input(4, 300)).unwrap();
        assert_eq!(id.shape(), &[4, 15]);
        assert_eq!(act.shape(), &[4, 3]);
        assert!(m.forward(&input(4, 299)).is_err());
    }

    #[test]
    fn count_parameters_small_layers() {
        let mut rng = seeded(0, &[]);
        assert_eq!(
            count_parameters(&LinearLayer::<f32>::new(4, 3, &mut rng).unwrap()),
            15
        );
        assert_eq!(
            count_parameters(&Conv1dLayer::<f32>::new(1, 2, 3, 1, 0, &mut rng).unwrap()),
            8
        );
    }

    #[test]
    fn count_parameters_matches_layer_tally() {
        // conv: co*ci*k + co; bn: 2c; linear: o*i + o
        let conv = |ci: usize, co: usize, k: usize| co * ci * k + co;
        let bn = |c: usize| 2 * c;
        let block = |ci: usize, co: usize, proj: bool| {
            conv(ci, co, 3)
                + bn(co)
                + conv(co, co, 3)
                + bn(co)
                + if proj { conv(ci, co, 1) + bn(co) } else { 0 }
        };
        let sca = conv(128, 32, 1) + conv(32, 128, 1) + (38 * 38 + 38);
        let want = conv(1, 32, 7)
            + bn(32)
            + block(32, 64, true)
            + block(64, 128, true)
            + block(128, 128, false)
            + sca
            + (128 * 15 + 15)
            + (128 * 3 + 3);
        let m = Dt4EcgModel::<f32>::new(ModelConfig::default()).unwrap();
        assert_eq!(count_parameters(&m), want);
    }

    #[test]
    fn heads_do_not_affect_each_other() {
        let mut m = Dt4EcgModel::<f32>::new(ModelConfig::tiny()).unwrap();
        m.eval();
        let x = input(3, 40);
        let (id0, act0) = m.forward(&x).unwrap();
        m.head_id
            .weight
            .data_mut()
            .iter_mut()
            .for_each(|w| *w += 0.5);
        let (id1, act1) = m.forward(&x).unwrap();
        assert_eq!(act0.to_vec(), act1.to_vec());
        assert_ne!(id0.to_vec(), id1.to_vec());
        m.head_activity.bias.data_mut()[0] = 3.0;
        let (id2, act2) = m.forward(&x).unwrap();
        assert_eq!(id1.to_vec(), id2.to_vec());
        assert_ne!(act1.to_vec(), act2.to_vec());
    }

    #[test]
    fn zeroed_heads_give_uniform_losses() {
        let m = Dt4EcgModel::<f32>::new(ModelConfig::default()).unwrap();
        for h in [&m.head_id, &m.head_activity] {
            h.weight.data_mut().iter_mut().for_each(|w| *w = 0.0);
        }
        let (id, act) = m.forward(&input(4, 300)).unwrap();
        assert!(id.data().iter().chain(act.data().iter()).all(|&v| v == 0.0));
        let l_id = nn::cross_entropy(&id, &[0, 3, 7, 14]).unwrap().item();
        let l_act = nn::cross_entropy(&act, &[0, 1, 2, 1]).unwrap().item();
        assert!((l_id - 15f32.ln()).abs() < 1e-6);
        assert!((l_act - 3f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn id_loss_gradient_reaches_backbone() {
        let m = Dt4EcgModel::<f32>::new(ModelConfig::tiny()).unwrap();
        let (id, _) = m.forward(&input(4, 40)).unwrap();
        let loss = nn::cross_entropy(&id, &[0, 1, 2, 3]).unwrap();
        loss.backward().unwrap();
        let stem_grad = m.stem_conv.weight.grad().unwrap();
        assert!(stem_grad.iter().any(|&g| g != 0.0));
        let act_head_grad = m.head_activity.weight.grad().unwrap();
        assert!(act_head_grad.iter().all(|&g| g == 0.0));
        let _ = ops::sum(&id);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut m = Dt4EcgModel::<f32>::new(ModelConfig::tiny()).unwrap();
        m.forward(&input(4, 40)).unwrap(); // moves running stats off their defaults
        let bytes = encode_checkpoint(&m).unwrap();
        let mut loaded = decode_checkpoint(&bytes).unwrap();
        assert_eq!(encode_checkpoint(&loaded).unwrap(), bytes);
        m.eval();
        loaded.eval();
        let x = input(2, 40);
        let (a, b) = m.forward(&x).unwrap();
        let (c, d) = loaded.forward(&x).unwrap();
        assert_eq!(a.to_vec(), c.to_vec());
        assert_eq!(b.to_vec(), d.to_vec());
    }

    #[test]
    fn checkpoint_names_follow_module_order() {
        let m = Dt4EcgModel::<f32>::new(ModelConfig::tiny()).unwrap();
        let bytes = encode_checkpoint(&m).unwrap();
        let names: Vec<String> = m.named_tensors().into_iter().map(|n| n.name).collect();
        // walk the file independently of the decoder
        let mut pos = 8;
        let cfg_len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4 + cfg_len;
        let count = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        assert_eq!(count, names.len());
        for want in &names {
            let n = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            pos += 4;
            assert_eq!(std::str::from_utf8(&bytes[pos..pos + n]).unwrap(), want);
            pos += n;
            assert_eq!(bytes[pos], 0);
            let rank = bytes[pos + 1] as usize;
            pos += 2;
            let mut numel = 1;
            for _ in 0..rank {
                numel *= u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
                pos += 4;
            }
            pos += 4 * numel;
        }
        assert_eq!(pos, bytes.len());
        assert!(names.contains(&"blocks.0.shortcut.bn.running_var".to_string()));
        assert!(names.contains(&"sca.seq_fc.weight".to_string()));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected_with_offsets() {
        let m = Dt4EcgModel::<f32>::new(ModelConfig::tiny()).unwrap();
        let bytes = encode_checkpoint(&m).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        match decode_checkpoint(&bad) {
            Err(Error::Format { offset: 0, msg }) => assert!(msg.contains("magic")),
            other => panic!("{other:?}"),
        }
        let cut = bytes.len() - 3;
        match decode_checkpoint(&bytes[..cut]) {
            Err(Error::Format { offset, msg }) => {
                assert!(msg.contains("truncated"), "{msg}");
                assert!(offset as usize <= cut);
            }
            other => panic!("{other:?}"),
        }
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(
            decode_checkpoint(&bad_version),
            Err(Error::Format { offset: 4, .. })
        ));
    }
}
