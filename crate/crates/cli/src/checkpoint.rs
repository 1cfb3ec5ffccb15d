//! `.pinck` checkpoints: little-endian binary with a version byte.
//!
//! Layout: magic `PINCK`, version, the resolved config as TOML, the
//! frequency bank, architecture and level weights, every parameter block,
//! the optimiser step, and a trailing FNV-1a checksum of everything before
//! it. Adam moments are not stored; a loaded model is for evaluation.

use std::path::Path;

use pin_core::encoding::FrequencyBank;
use pin_core::model::{PinArchitecture, PinModel};
use pin_core::numerics::{ParamStore, Parameterized};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

const MAGIC: &[u8; 5] = b"PINCK";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub model: PinModel,
}

fn fnv(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Checkpoint("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| CliError::Checkpoint("size overflow".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(CliError::Checkpoint("array length exceeds file size".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CliError::Checkpoint("invalid UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn new(config: RunConfig, model: PinModel) -> Self {
        Checkpoint { config, model }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.0.extend_from_slice(MAGIC);
        w.u8(VERSION);
        w.str(&self.config.to_toml());

        let bank = self.model.bank();
        w.u64(bank.input_dim() as u64);
        w.f64(bank.sigma());
        w.u64(bank.seed());
        w.f64s(bank.frequencies());
        w.f64s(bank.phases());
        w.u64(bank.level_offsets().len() as u64);
        bank.level_offsets().iter().for_each(|&o| w.u64(o as u64));

        let arch = self.model.arch();
        for v in [arch.output_dim, arch.hidden, arch.depth, arch.head_depth] {
            w.u64(v as u64);
        }
        w.u8(arch.conditioning as u8);
        w.u8(arch.raw_coords as u8);
        w.f64s(self.model.level_weights());

        let params = self.model.params();
        w.u64(params.blocks().len() as u64);
        for b in params.blocks() {
            w.str(&b.name);
            w.u64(b.rows as u64);
            w.u64(b.cols as u64);
            w.u8(b.trainable as u8);
            w.f64s(&b.value);
        }
        w.u64(params.step());
        let sum = fnv(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 1 + 8 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CliError::Checkpoint("not a .pinck file".into()));
        }
        let version = bytes[MAGIC.len()];
        if version != VERSION {
            return Err(CliError::Version { found: version, expected: VERSION });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fnv(body) != u64::from_le_bytes(tail.try_into().expect("8 bytes")) {
            return Err(CliError::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { bytes: body, pos: MAGIC.len() + 1 };
        let config = RunConfig::parse(&r.str()?)?;

        let input_dim = r.usize()?;
        let sigma = r.f64()?;
        let seed = r.u64()?;
        let frequencies = r.f64s()?;
        let phases = r.f64s()?;
        let n_off = r.usize()?;
        let offsets = (0..n_off).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let bank = FrequencyBank::from_parts(input_dim, sigma, seed, frequencies, phases, offsets)?;

        let output_dim = r.usize()?;
        let hidden = r.usize()?;
        let depth = r.usize()?;
        let head_depth = r.usize()?;
        let conditioning = r.u8()? != 0;
        let raw_coords = r.u8()? != 0;
        let arch = PinArchitecture { output_dim, hidden, depth, head_depth, conditioning, raw_coords };
        let weights = r.f64s()?;

        let mut params = ParamStore::new();
        let n_blocks = r.usize()?;
        for _ in 0..n_blocks {
            let name = r.str()?;
            let rows = r.usize()?;
            let cols = r.usize()?;
            let trainable = r.u8()? != 0;
            let value = r.f64s()?;
            if rows.checked_mul(cols) != Some(value.len()) {
                return Err(CliError::Checkpoint(format!("block `{name}` has the wrong size")));
            }
            if params.find(&name).is_some() {
                return Err(CliError::Checkpoint(format!("duplicate block `{name}`")));
            }
            let id = params.add(name, rows, cols, value);
            params.set_trainable(id, trainable);
        }
        params.set_step(r.u64()?);
        if r.pos != body.len() {
            return Err(CliError::Checkpoint("trailing bytes".into()));
        }
        let model = PinModel::assemble(bank, arch, weights, params)?;
        Ok(Checkpoint { config, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
